//! Pure Cahn-Hilliard coarsening: without fidelity the energy decreases at
//! every step and the mass stays put.

use ch_inpaint::evolution::{run_stage, StageParams};
use ch_inpaint::{FidelityField, GridSpec, PotentialSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ch_inpaint::Result<()> {
    let grid = GridSpec::new(48, 48)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u0 = ScalarField::from_fn(grid, |_, _| rng.gen_range(-0.2..=0.2));
    let none = FidelityField::none(grid);
    // alpha is ignored when the fidelity field is identically zero
    let stage = StageParams::new(0.05, 1.0, 1e-5)?
        .with_max_steps(400)?
        .with_stop_tol(1e-12)?;
    let (u, report) = run_stage(&u0, &u0, &none, &stage, PotentialSpec::Obstacle)?;

    for k in (0..report.steps_taken).step_by(50) {
        println!(
            "step {:>4}  energy {:>10.5}  mass {:+.3e}",
            k + 1,
            report.energy_trace[k],
            report.mass_trace[k]
        );
    }
    let rises = report
        .energy_trace
        .windows(2)
        .filter(|w| w[1] > w[0] + 1e-10)
        .count();
    println!("energy increases: {rises}");
    let pure = u.values().iter().filter(|v| v.abs() == 1.0).count();
    println!("{pure} of {} nodes sit on an obstacle", grid.len());
    Ok(())
}
