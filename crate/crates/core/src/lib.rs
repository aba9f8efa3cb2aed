//! Image inpainting with the double-obstacle Cahn-Hilliard model.
//!
//! A damaged binary image is evolved by a Cahn-Hilliard flow with a fidelity
//! term that pulls the intact pixels toward the input while the damaged ones
//! evolve freely. Each time step is a finite element discretization on the
//! pixel grid and is solved as a complementarity problem for `u` in `[-1, 1]`.
//! Grayscale images are handled one bit plane at a time.
//!
//! ```
//! use ch_inpaint::evolution::TwoStageConfig;
//! use ch_inpaint::pipeline::{inpaint, InpaintJob, Mode};
//! use ch_inpaint::{Grayscale8Image, PotentialSpec};
//!
//! let image = Grayscale8Image::from_fn(10, 10, |x, _| if x < 5 { 0 } else { 255 })?;
//! let mask = Grayscale8Image::from_fn(10, 10, |x, y| if (x, y) == (2, 6) { 255 } else { 0 })?;
//! let schedule = TwoStageConfig::new(0.04, 1.0 / 300.0, 8e3, 1e5, 1e-5)?;
//! let job = InpaintJob::new(image.clone(), mask, Mode::Binary, PotentialSpec::Obstacle, schedule)?;
//! let result = inpaint(&job)?;
//! assert_eq!(result.projected_image, image);
//! # Ok::<(), ch_inpaint::Error>(())
//! ```
//!
//! The modules build on each other. [`grid`] holds the mesh with its lumped
//! masses and stiffness, [`step`] solves one time step and [`evolution`] runs
//! the two stages of a job. [`pipeline`] turns images into jobs and back.
//! File handling lives in [`io`] and [`config`], and [`cli`] is the
//! command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod image;
pub mod io;
mod linalg;
pub mod pipeline;
pub mod potentials;
mod sparse;
pub mod step;

pub use error::{Error, Result};
pub use grid::{FidelityField, GridSpec, ScalarField};
pub use image::Grayscale8Image;
pub use pipeline::{InpaintJob, InpaintResult, Mode};
pub use potentials::PotentialSpec;
