//! End-to-end inpainting of binary and grayscale images.
//!
//! Binary images are inpainted directly. Grayscale images are split into bit
//! planes, each plane is inpainted as a binary image, projected onto
//! `{-1, +1}` and the planes are reassembled.

use std::thread;

use crate::error::{Error, Result};
use crate::evolution::{initial_guess, run_two_stage, RunReport, TwoStageConfig};
use crate::grid::{field_from_image, GridSpec, ScalarField};
use crate::image::Grayscale8Image;
use crate::potentials::PotentialSpec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mask pixels at or above this value mark damaged nodes.
pub const MASK_THRESHOLD: u8 = 128;
/// Default stop tolerance for grayscale channels.
pub const GRAYSCALE_STOP_TOL: f64 = 1.0e-7;
pub const NOISE_AMPLITUDE: f64 = 1.0e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Binary,
    /// Bit-plane decomposition into `channels` planes, most significant first.
    Grayscale {
        channels: u8,
    },
}

#[derive(Clone, Debug)]
pub struct InpaintJob {
    pub image: Grayscale8Image,
    pub mask: Grayscale8Image,
    pub mode: Mode,
    pub potential: PotentialSpec,
    pub schedule: TwoStageConfig,
    /// When set, the start field inside the damaged region is seeded noise
    /// of amplitude [`NOISE_AMPLITUDE`] instead of `0`.
    pub noise_seed: Option<u64>,
}

impl InpaintJob {
    pub fn new(
        image: Grayscale8Image,
        mask: Grayscale8Image,
        mode: Mode,
        potential: PotentialSpec,
        schedule: TwoStageConfig,
    ) -> Result<Self> {
        image.ensure_same_dims(&mask)?;
        if let Mode::Grayscale { channels } = mode {
            check_channels(channels as usize)?;
        }
        potential.validate()?;
        Ok(Self {
            image,
            mask,
            mode,
            potential,
            schedule,
            noise_seed: None,
        })
    }

    /// Damaged-node flags from the mask.
    pub fn damaged(&self) -> Vec<bool> {
        damaged_from_mask(&self.mask)
    }
}

/// Result of one channel: final field before projection and the stage reports.
#[derive(Clone, Debug)]
pub struct ChannelOutcome {
    pub raw: ScalarField,
    pub stage1: RunReport,
    pub stage2: RunReport,
}

impl ChannelOutcome {
    pub fn is_clean(&self) -> bool {
        self.stage1.is_clean() && self.stage2.is_clean()
    }
}

#[derive(Clone, Debug)]
pub struct InpaintResult {
    pub mode: Mode,
    /// One entry per channel, most significant first.
    pub channels: Vec<ChannelOutcome>,
    pub projected_image: Grayscale8Image,
    /// `|input - projected|` per pixel.
    pub error_map: Grayscale8Image,
    pub warnings: Vec<String>,
}

impl InpaintResult {
    /// True when every stage of every channel met its stop tolerance with
    /// converged inner solves.
    pub fn converged(&self) -> bool {
        self.channels.iter().all(ChannelOutcome::is_clean)
    }
}

pub fn damaged_from_mask(mask: &Grayscale8Image) -> Vec<bool> {
    mask.pixels().iter().map(|&p| p >= MASK_THRESHOLD).collect()
}

/// Pointwise sign with `0` sent to `+1`.
pub fn project_binary(f: &ScalarField) -> ScalarField {
    let values = f
        .values()
        .iter()
        .map(|&v| if v >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    ScalarField::new(*f.grid(), values).expect("signs are finite")
}

fn check_channels(k: usize) -> Result<()> {
    if !(1..=8).contains(&k) {
        return Err(Error::param(
            "channels",
            format!("must be in 1..=8, got {k}"),
        ));
    }
    Ok(())
}

/// Splits an image into `k` bit planes; plane `c` (0-based) holds bit `7 - c`
/// as `+1` (set) or `-1` (clear).
pub fn bit_split(img: &Grayscale8Image, k: usize) -> Result<Vec<ScalarField>> {
    check_channels(k)?;
    let grid = GridSpec::new(img.width(), img.height())?;
    Ok((0..k)
        .map(|c| {
            let shift = 7 - c;
            let values = img
                .pixels()
                .iter()
                .map(|p| if (p >> shift) & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            ScalarField::new(grid, values).expect("signs are finite")
        })
        .collect())
}

/// Inverse of [`bit_split`]. Bits below the last channel are zero.
pub fn bit_assemble(channels: &[ScalarField]) -> Result<Grayscale8Image> {
    let Some(first) = channels.first() else {
        return Err(Error::InvalidInput("no channels to assemble".into()));
    };
    check_channels(channels.len())?;
    let grid = *first.grid();
    let mut pixels = vec![0u8; grid.len()];
    for (c, ch) in channels.iter().enumerate() {
        grid.ensure_same(ch.grid())?;
        for (node, (&v, p)) in ch.values().iter().zip(pixels.iter_mut()).enumerate() {
            if v == 1.0 {
                *p |= 1 << (7 - c);
            } else if v != -1.0 {
                return Err(Error::InvalidInput(format!(
                    "channel {} is not binary at node {node}: {v}",
                    c + 1
                )));
            }
        }
    }
    Grayscale8Image::new(grid.nx(), grid.ny(), pixels)
}

/// Per-pixel absolute difference.
pub fn error_map(original: &Grayscale8Image, result: &Grayscale8Image) -> Result<Grayscale8Image> {
    original.ensure_same_dims(result)?;
    let pixels = original
        .pixels()
        .iter()
        .zip(result.pixels())
        .map(|(a, b)| a.abs_diff(*b))
        .collect();
    Grayscale8Image::new(original.width(), original.height(), pixels)
}

fn inpaint_channel(
    channel: usize,
    image: &ScalarField,
    damaged: &[bool],
    job: &InpaintJob,
) -> Result<ChannelOutcome> {
    let schedule = job.schedule.with_potential(job.potential)?;
    let mut u0 = initial_guess(image, damaged)?;
    if let Some(seed) = job.noise_seed {
        // each channel gets its own stream so results do not depend on scheduling
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(channel as u64));
        for (j, d) in damaged.iter().enumerate() {
            if *d {
                u0[j] = rng.gen_range(-NOISE_AMPLITUDE..=NOISE_AMPLITUDE);
            }
        }
    }
    let (raw, stage1, stage2) = run_two_stage(&u0, image, damaged, &schedule)?;
    Ok(ChannelOutcome {
        raw,
        stage1,
        stage2,
    })
}

fn check_damage(damaged: &[bool]) -> Result<()> {
    let count = damaged.iter().filter(|d| **d).count();
    if count == 0 {
        return Err(Error::InvalidMask("mask marks no damaged pixels".into()));
    }
    if count == damaged.len() {
        return Err(Error::InvalidMask(
            "mask marks every pixel as damaged".into(),
        ));
    }
    Ok(())
}

/// Inpaints a binary image. Pixels other than `0` and `255` are snapped to
/// the nearer of the two and reported in `warnings`.
pub fn inpaint_binary(job: &InpaintJob) -> Result<InpaintResult> {
    if job.mode != Mode::Binary {
        return Err(Error::InvalidInput(
            "inpaint_binary needs Mode::Binary".into(),
        ));
    }
    let damaged = job.damaged();
    check_damage(&damaged)?;
    let mut warnings = Vec::new();
    let snapped: Vec<u8> = job
        .image
        .pixels()
        .iter()
        .map(|&p| if p >= 128 { 255 } else { 0 })
        .collect();
    let changed = snapped
        .iter()
        .zip(job.image.pixels())
        .filter(|(a, b)| a != b)
        .count();
    if changed > 0 {
        warnings.push(format!("{changed} non-binary pixels snapped to 0 or 255"));
    }
    let binary = Grayscale8Image::new(job.image.width(), job.image.height(), snapped)?;
    let grid = GridSpec::new(binary.width(), binary.height())?;
    let image = field_from_image(&binary, &grid)?;
    let outcome = inpaint_channel(0, &image, &damaged, job)?;
    let projected = project_binary(&outcome.raw);
    let pixels = projected
        .values()
        .iter()
        .map(|&v| if v > 0.0 { 255 } else { 0 })
        .collect();
    let projected_image = Grayscale8Image::new(grid.nx(), grid.ny(), pixels)?;
    let error_map = error_map(&job.image, &projected_image)?;
    Ok(InpaintResult {
        mode: job.mode,
        channels: vec![outcome],
        projected_image,
        error_map,
        warnings,
    })
}

/// Inpaints every bit plane independently, on separate threads, and
/// reassembles the projected planes.
pub fn inpaint_grayscale(job: &InpaintJob) -> Result<InpaintResult> {
    let Mode::Grayscale { channels } = job.mode else {
        return Err(Error::InvalidInput(
            "inpaint_grayscale needs Mode::Grayscale".into(),
        ));
    };
    let damaged = job.damaged();
    check_damage(&damaged)?;
    let planes = bit_split(&job.image, channels as usize)?;

    let outcomes: Vec<Result<ChannelOutcome>> = thread::scope(|s| {
        let handles: Vec<_> = planes
            .iter()
            .enumerate()
            .map(|(c, plane)| {
                let damaged = &damaged;
                s.spawn(move || inpaint_channel(c, plane, damaged, job))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("channel worker panicked"))
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let projected: Vec<ScalarField> = outcomes.iter().map(|o| project_binary(&o.raw)).collect();
    let projected_image = bit_assemble(&projected)?;
    let error_map = error_map(&job.image, &projected_image)?;
    let warnings = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.is_clean())
        .map(|(c, _)| format!("channel {} did not meet its stop tolerance", c + 1))
        .collect();
    Ok(InpaintResult {
        mode: job.mode,
        channels: outcomes,
        projected_image,
        error_map,
        warnings,
    })
}

/// Dispatches on `job.mode`.
pub fn inpaint(job: &InpaintJob) -> Result<InpaintResult> {
    match job.mode {
        Mode::Binary => inpaint_binary(job),
        Mode::Grayscale { .. } => inpaint_grayscale(job),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(nx, ny).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = grid(3, 2);
        let f = ScalarField::new(g, vec![0.3, -0.2, 0.0, -1.0, 1.0, -0.0]).unwrap();
        let p = project_binary(&f);
        assert_eq!(p.values(), &[1.0, -1.0, 1.0, -1.0, 1.0, 1.0]);
        assert_eq!(project_binary(&p).values(), p.values());
    }

    #[test]
    fn bit_split_examples() {
        let img = Grayscale8Image::new(2, 2, vec![255, 200, 0, 1]).unwrap();
        let planes = bit_split(&img, 8).unwrap();
        let at = |node: usize| planes.iter().map(|p| p[node]).collect::<Vec<_>>();
        assert_eq!(at(0), vec![1.0; 8]);
        assert_eq!(at(1), vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0]);
        assert_eq!(at(2), vec![-1.0; 8]);
        assert_eq!(at(3)[7], 1.0);
        assert_eq!(bit_assemble(&planes).unwrap(), img);
    }

    #[test]
    fn channel_count_is_validated() {
        let img = Grayscale8Image::filled(2, 2, 9).unwrap();
        assert!(matches!(
            bit_split(&img, 0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            bit_split(&img, 9),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(bit_assemble(&[]).is_err());
    }

    #[test]
    fn truncated_assembly_drops_low_bits() {
        let img = Grayscale8Image::new(2, 2, vec![255, 200, 0, 77]).unwrap();
        let planes = bit_split(&img, 3).unwrap();
        let out = bit_assemble(&planes).unwrap();
        assert_eq!(out.pixels(), &[224, 192, 0, 64]);
    }

    #[test]
    fn assembly_rejects_non_binary_channels() {
        let f = ScalarField::new(grid(2, 2), vec![1.0, -1.0, 0.5, 1.0]).unwrap();
        assert!(matches!(bit_assemble(&[f]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn error_map_examples() {
        let a = Grayscale8Image::new(3, 1, vec![255, 200, 7]).unwrap();
        let b = Grayscale8Image::new(3, 1, vec![0, 56, 7]).unwrap();
        assert_eq!(error_map(&a, &b).unwrap().pixels(), &[255, 144, 0]);
        assert!(error_map(&a, &a).unwrap().pixels().iter().all(|p| *p == 0));
        let c = Grayscale8Image::filled(1, 3, 0).unwrap();
        assert!(matches!(error_map(&a, &c), Err(Error::Shape { .. })));
    }

    #[test]
    fn masks_without_damage_or_without_data_are_rejected() {
        let img = Grayscale8Image::filled(4, 4, 255).unwrap();
        let schedule = TwoStageConfig::new(0.1, 0.05, 1e3, 1e4, 1e-3).unwrap();
        for fill in [0u8, 255] {
            let mask = Grayscale8Image::filled(4, 4, fill).unwrap();
            let job = InpaintJob::new(
                img.clone(),
                mask,
                Mode::Binary,
                PotentialSpec::Obstacle,
                schedule,
            )
            .unwrap();
            assert!(matches!(inpaint_binary(&job), Err(Error::InvalidMask(_))));
        }
    }

    #[test]
    fn job_validation() {
        let img = Grayscale8Image::filled(4, 4, 255).unwrap();
        let schedule = TwoStageConfig::new(0.1, 0.05, 1e3, 1e4, 1e-3).unwrap();
        let small = Grayscale8Image::filled(3, 4, 0).unwrap();
        assert!(InpaintJob::new(
            img.clone(),
            small,
            Mode::Binary,
            PotentialSpec::Obstacle,
            schedule
        )
        .is_err());
        let mask = Grayscale8Image::filled(4, 4, 0).unwrap();
        let bad = Mode::Grayscale { channels: 9 };
        assert!(InpaintJob::new(img, mask, bad, PotentialSpec::Obstacle, schedule).is_err());
    }
}
