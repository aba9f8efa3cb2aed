//! `key = value` job configuration files and the bundled parameter presets.
//!
//! ```text
//! # stripe test, wide then sharp interface
//! eps1 = 0.04
//! eps2 = 0.0033333333333333335
//! alpha = 8e3
//! alpha2 = 1e5
//! tau = 1e-5
//! ```
//!
//! Recognised keys: `eps1`, `eps2`, `alpha`, `alpha2`, `tau`, `tol1`, `tol2`,
//! `inner_tol`, `max_steps`, `mode` (`binary` or `grayscale`), `k_channels`,
//! `potential` (`obstacle`, `my` or `quartic`), `delta`, `out`, `error_map`,
//! `trace`.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evolution::{TwoStageConfig, DEFAULT_MAX_STEPS, DEFAULT_STOP_TOL};
use crate::pipeline::{Mode, GRAYSCALE_STOP_TOL};
use crate::potentials::PotentialSpec;
use crate::step::DEFAULT_INNER_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Binary,
    Grayscale,
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "binary" => Ok(ModeKind::Binary),
            "grayscale" => Ok(ModeKind::Grayscale),
            other => Err(format!(
                "unknown mode `{other}`, expected binary or grayscale"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Obstacle,
    MoreauYosida,
    Quartic,
}

impl FromStr for PotentialKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "obstacle" => Ok(PotentialKind::Obstacle),
            "my" => Ok(PotentialKind::MoreauYosida),
            "quartic" => Ok(PotentialKind::Quartic),
            other => Err(format!(
                "unknown potential `{other}`, expected obstacle, my or quartic"
            )),
        }
    }
}

/// Everything needed to run one inpainting job. Tolerances left unset fall
/// back to mode-dependent defaults, see [`JobConfig::stop_tols`].
#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub alpha: f64,
    pub alpha2: f64,
    pub tau: f64,
    pub tol1: Option<f64>,
    pub tol2: Option<f64>,
    pub inner_tol: f64,
    pub max_steps: usize,
    pub mode: ModeKind,
    pub k_channels: u8,
    pub potential: PotentialKind,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub error_map: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl Default for JobConfig {
    /// The stripe-comparison parameters: `eps` from `0.04` down to `1/300`.
    fn default() -> Self {
        Self {
            eps1: 0.04,
            eps2: 1.0 / 300.0,
            alpha: 8.0e3,
            alpha2: 1.0e5,
            tau: 1.0e-5,
            tol1: None,
            tol2: None,
            inner_tol: DEFAULT_INNER_TOL,
            max_steps: DEFAULT_MAX_STEPS,
            mode: ModeKind::Binary,
            k_channels: 8,
            potential: PotentialKind::Obstacle,
            delta: None,
            out: None,
            error_map: None,
            trace: None,
        }
    }
}

impl JobConfig {
    /// Stage tolerances: `tol2` defaults to `tol1`, which defaults to
    /// `5e-6` for binary and `1e-7` for grayscale jobs.
    pub fn stop_tols(&self) -> (f64, f64) {
        let fallback = match self.mode {
            ModeKind::Binary => DEFAULT_STOP_TOL,
            ModeKind::Grayscale => GRAYSCALE_STOP_TOL,
        };
        let tol1 = self.tol1.unwrap_or(fallback);
        (tol1, self.tol2.unwrap_or(tol1))
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        match (self.potential, self.delta) {
            (PotentialKind::MoreauYosida, Some(delta)) => PotentialSpec::moreau_yosida(delta),
            (PotentialKind::MoreauYosida, None) => {
                Err(Error::param("delta", "required with the my potential"))
            }
            (_, Some(_)) => Err(Error::param("delta", "only used with the my potential")),
            (PotentialKind::Obstacle, None) => Ok(PotentialSpec::Obstacle),
            (PotentialKind::Quartic, None) => Ok(PotentialSpec::Quartic),
        }
    }

    pub fn mode_spec(&self) -> Result<Mode> {
        match self.mode {
            ModeKind::Binary => Ok(Mode::Binary),
            ModeKind::Grayscale if (1..=8).contains(&self.k_channels) => Ok(Mode::Grayscale {
                channels: self.k_channels,
            }),
            ModeKind::Grayscale => Err(Error::param(
                "k_channels",
                format!("must be in 1..=8, got {}", self.k_channels),
            )),
        }
    }

    pub fn schedule(&self) -> Result<TwoStageConfig> {
        let (tol1, tol2) = self.stop_tols();
        TwoStageConfig::new(self.eps1, self.eps2, self.alpha, self.alpha2, self.tau)?
            .with_stop_tols(tol1, tol2)?
            .with_max_steps(self.max_steps)?
            .with_inner_tol(self.inner_tol)?
            .with_potential(self.potential_spec()?)
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        self.mode_spec()?;
        self.schedule().map(|_| ())
    }
}

fn positive(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("`{key}` expects a number, got `{value}`"),
    })?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config {
            line,
            reason: format!("`{key}` must be positive, got {value}"),
        });
    }
    Ok(v)
}

fn count(line: usize, key: &str, value: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Config {
            line,
            reason: format!("`{key}` must be a positive integer, got `{value}`"),
        }),
    }
}

/// Parses configuration text on top of [`JobConfig::default`].
///
/// Only syntax and per-key ranges are checked here; call
/// [`JobConfig::validate`] once all overrides are applied.
pub fn parse_config(text: &str) -> Result<JobConfig> {
    let mut cfg = JobConfig::default();
    apply_config(&mut cfg, text)?;
    Ok(cfg)
}

/// Applies the assignments in `text` to an existing configuration.
pub fn apply_config(cfg: &mut JobConfig, text: &str) -> Result<()> {
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(Error::Config {
                line,
                reason: format!("`{key}` has no value"),
            });
        }
        let text_err = |reason: String| Error::Config { line, reason };
        match key {
            "eps1" => cfg.eps1 = positive(line, key, value)?,
            "eps2" => cfg.eps2 = positive(line, key, value)?,
            "alpha" => cfg.alpha = positive(line, key, value)?,
            "alpha2" => cfg.alpha2 = positive(line, key, value)?,
            "tau" => cfg.tau = positive(line, key, value)?,
            "tol1" => cfg.tol1 = Some(positive(line, key, value)?),
            "tol2" => cfg.tol2 = Some(positive(line, key, value)?),
            "inner_tol" => cfg.inner_tol = positive(line, key, value)?,
            "delta" => cfg.delta = Some(positive(line, key, value)?),
            "max_steps" => cfg.max_steps = count(line, key, value)?,
            "k_channels" => {
                let k = count(line, key, value)?;
                if k > 8 {
                    return Err(text_err(format!("`k_channels` must be at most 8, got {k}")));
                }
                cfg.k_channels = k as u8;
            }
            "mode" => cfg.mode = value.parse().map_err(text_err)?,
            "potential" => cfg.potential = value.parse().map_err(text_err)?,
            "out" => cfg.out = Some(PathBuf::from(value)),
            "error_map" => cfg.error_map = Some(PathBuf::from(value)),
            "trace" => cfg.trace = Some(PathBuf::from(value)),
            other => return Err(text_err(format!("unknown key `{other}`"))),
        }
    }
    Ok(())
}

/// Bundled parameter sets, named after the figure they reproduce.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.conf")),
    ("fig2", include_str!("../presets/fig2.conf")),
    ("fig3", include_str!("../presets/fig3.conf")),
    ("fig4", include_str!("../presets/fig4.conf")),
    ("fig6", include_str!("../presets/fig6.conf")),
    ("fig7", include_str!("../presets/fig7.conf")),
    ("fig8", include_str!("../presets/fig8.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
