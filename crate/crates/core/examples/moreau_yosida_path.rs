//! Moreau-Yosida steps approach the obstacle step as the penalty `delta`
//! goes to zero.

use ch_inpaint::step::{step_moreau_yosida, step_obstacle_active_set, StepProblem};
use ch_inpaint::{FidelityField, GridSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ch_inpaint::Result<()> {
    let grid = GridSpec::new(24, 24)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u_prev = ScalarField::from_fn(grid, |_, _| rng.gen_range(-1.0..=1.0));
    let image = ScalarField::from_fn(grid, |i, _| if i < 12 { -1.0 } else { 1.0 });
    let damaged: Vec<bool> = (0..grid.len()).map(|j| grid.coords(j).1 >= 12).collect();
    let fidelity = FidelityField::from_damage(grid, &damaged, 1e3)?;
    let p = StepProblem::new(&u_prev, &image, &fidelity, 0.1, 1e-3)?.with_inner_tol(1e-12)?;

    let exact = step_obstacle_active_set(&p)?;
    println!("obstacle step: {} set updates", exact.inner_iterations);
    println!(
        "{:>8} {:>14} {:>14}",
        "delta", "max |u - u*|", "max |u| - 1"
    );
    for delta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let r = step_moreau_yosida(&p, delta)?;
        println!(
            "{delta:>8.0e} {:>14.3e} {:>14.3e}",
            r.u_next.max_diff(&exact.u_next)?,
            r.u_next.max_abs() - 1.0
        );
    }
    Ok(())
}
