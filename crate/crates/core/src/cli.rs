//! Command-line front end.
//!
//! Exit codes: `0` success, `2` bad input or configuration, `3` the solver
//! did not meet its tolerances (outputs are still written and the trace ends
//! with a `# not converged` line).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::config::{apply_config, preset, JobConfig, ModeKind, PotentialKind};
use crate::error::{Error, Result};
use crate::grid::value_to_pixel;
use crate::image::Grayscale8Image;
use crate::io::{read_image, write_image};
use crate::pipeline::{inpaint, InpaintJob, InpaintResult, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ch-inpaint",
    version,
    about = "Inpaint damaged regions of binary or grayscale images with the double-obstacle Cahn-Hilliard flow"
)]
pub struct Args {
    /// Input image (PGM P2/P5 or 8-bit grayscale PNG)
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    /// Damage mask of the same size; pixels >= 128 are damaged
    #[arg(long, value_name = "PATH")]
    pub mask: PathBuf,
    /// Configuration file with `key = value` lines
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Bundled parameter set (fig1, fig2, fig3, fig4, fig6, fig7, fig8), applied before --config
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Stop tolerance for both stages
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, value_parser = ["binary", "grayscale"])]
    pub mode: Option<String>,
    #[arg(long, value_parser = ["obstacle", "my", "quartic"])]
    pub potential: Option<String>,
    /// Moreau-Yosida penalty parameter, required with `--potential my`
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of bit planes in grayscale mode
    #[arg(long)]
    pub k_channels: Option<u8>,
    /// Projected result [default: <image stem>_inpainted.pgm]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Unprojected result mapped back to gray levels
    #[arg(long, value_name = "PATH")]
    pub raw: Option<PathBuf>,
    /// Per-pixel |input - result|
    #[arg(long, value_name = "PATH")]
    pub error_map: Option<PathBuf>,
    /// Per-step trace: index, stop value, energy, mass
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Seeds small noise in the damaged region of the start field
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Args {
    /// Preset, then config file, then flags.
    pub fn job_config(&self) -> Result<JobConfig> {
        let mut cfg = JobConfig::default();
        if let Some(name) = &self.preset {
            let text = preset(name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown preset `{name}`")))?;
            apply_config(&mut cfg, text)?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            apply_config(&mut cfg, &text)?;
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.eps1, self.eps1);
        set(&mut cfg.eps2, self.eps2);
        set(&mut cfg.alpha, self.alpha);
        set(&mut cfg.alpha2, self.alpha2);
        set(&mut cfg.tau, self.tau);
        if let Some(tol) = self.tol {
            cfg.tol1 = Some(tol);
            cfg.tol2 = Some(tol);
        }
        if let Some(steps) = self.max_steps {
            cfg.max_steps = steps;
        }
        if let Some(mode) = &self.mode {
            cfg.mode = mode.parse::<ModeKind>().map_err(Error::InvalidInput)?;
        }
        if let Some(pot) = &self.potential {
            cfg.potential = pot.parse::<PotentialKind>().map_err(Error::InvalidInput)?;
        }
        if self.delta.is_some() {
            cfg.delta = self.delta;
        }
        if let Some(k) = self.k_channels {
            cfg.k_channels = k;
        }
        for (slot, flag) in [
            (&mut cfg.out, &self.out),
            (&mut cfg.error_map, &self.error_map),
            (&mut cfg.trace, &self.trace),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_out(image: &Path) -> PathBuf {
    let stem = image
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image");
    image.with_file_name(format!("{stem}_inpainted.pgm"))
}

/// The unprojected fields as an image. Grayscale channels are weighted by
/// their bit significance after mapping `[-1, 1]` to `[0, 1]`.
pub fn raw_image(result: &InpaintResult) -> Grayscale8Image {
    let first = &result.channels[0].raw;
    let grid = first.grid();
    let pixels = if result.mode == Mode::Binary {
        first.values().iter().map(|&v| value_to_pixel(v)).collect()
    } else {
        (0..grid.len())
            .map(|j| {
                let level: f64 = result
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(c, ch)| {
                        (ch.raw[j].clamp(-1.0, 1.0) + 1.0) / 2.0 * (1u32 << (7 - c)) as f64
                    })
                    .sum();
                level.round().clamp(0.0, 255.0) as u8
            })
            .collect()
    };
    Grayscale8Image::new(grid.nx(), grid.ny(), pixels).expect("grid dimensions")
}

fn write_trace(path: &Path, result: &InpaintResult) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    let multi = result.channels.len() > 1;
    for (c, ch) in result.channels.iter().enumerate() {
        if multi {
            writeln!(out, "# channel {}", c + 1).map_err(io_err)?;
        }
        ch.stage1.write_trace(&mut out, 0).map_err(io_err)?;
        ch.stage2
            .write_trace(&mut out, ch.stage1.steps_taken)
            .map_err(io_err)?;
    }
    if !result.converged() {
        let mut notes = Vec::new();
        for (c, ch) in result.channels.iter().enumerate() {
            for (s, r) in [(1, &ch.stage1), (2, &ch.stage2)] {
                if r.hit_max_steps {
                    notes.push(format!("channel {} stage {s} hit the step limit", c + 1));
                }
                if !r.unconverged_steps.is_empty() {
                    notes.push(format!(
                        "channel {} stage {s} had {} unconverged inner solves",
                        c + 1,
                        r.unconverged_steps.len()
                    ));
                }
            }
        }
        writeln!(out, "# not converged: {}", notes.join("; ")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Runs a job described by parsed arguments and returns the exit code.
pub fn run(args: &Args) -> Result<i32> {
    let cfg = args.job_config()?;
    let image = read_image(&args.image)?;
    let mask = read_image(&args.mask)?;
    let mut job = InpaintJob::new(
        image,
        mask,
        cfg.mode_spec()?,
        cfg.potential_spec()?,
        cfg.schedule()?,
    )?;
    job.noise_seed = args.seed;
    let result = inpaint(&job)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let out = cfg.out.clone().unwrap_or_else(|| default_out(&args.image));
    write_image(&result.projected_image, &out)?;
    if let Some(path) = &args.raw {
        write_image(&raw_image(&result), path)?;
    }
    if let Some(path) = &cfg.error_map {
        write_image(&result.error_map, path)?;
    }
    if let Some(path) = &cfg.trace {
        write_trace(path, &result)?;
    }
    for (c, ch) in result.channels.iter().enumerate() {
        eprintln!(
            "channel {}: stage 1 {} steps (stop {:.3e}), stage 2 {} steps (stop {:.3e})",
            c + 1,
            ch.stage1.steps_taken,
            ch.stage1.stop_value_final,
            ch.stage2.steps_taken,
            ch.stage2.stop_value_final
        );
    }
    if result.converged() {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: solver did not meet its tolerances");
        Ok(EXIT_NOT_CONVERGED)
    }
}

/// Entry point shared by the binary and the tests.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
