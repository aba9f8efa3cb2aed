//! One obstacle time step with both solvers and its complementarity report.

use std::time::Instant;

use ch_inpaint::step::{kkt_residual, step_obstacle, step_obstacle_active_set, StepProblem};
use ch_inpaint::{FidelityField, GridSpec, ScalarField};

fn main() -> ch_inpaint::Result<()> {
    let grid = GridSpec::new(48, 48)?;
    // a disc of +1 in a -1 background, with a smeared edge
    let u_prev = ScalarField::from_fn(grid, |i, j| {
        let r = ((i as f64 - 24.0).powi(2) + (j as f64 - 24.0).powi(2)).sqrt();
        (12.0 - r).clamp(-1.0, 1.0)
    });
    let fidelity = FidelityField::none(grid);
    let p = StepProblem::new(&u_prev, &u_prev, &fidelity, 0.05, 1e-5)?;

    for (name, solve) in [
        (
            "active set",
            step_obstacle_active_set as fn(&StepProblem<'_>) -> _,
        ),
        ("Gauss-Seidel", step_obstacle),
    ] {
        let t = Instant::now();
        let r = solve(&p)?;
        let kkt = kkt_residual(&grid, &r, &p);
        println!(
            "{name:<13} {:>6} iterations {:>9.1?}  converged {}  contact {}+{}  kkt {:.1e}",
            r.inner_iterations,
            t.elapsed(),
            r.converged,
            r.active_upper,
            r.active_lower,
            kkt.max()
        );
    }
    println!("mass before {:.12}", u_prev.mass());
    println!(
        "mass after  {:.12}",
        step_obstacle_active_set(&p)?.u_next.mass()
    );
    Ok(())
}
