use ch_inpaint::grid::stiffness_apply;
use ch_inpaint::step::{kkt_residual, step_obstacle, StepProblem};
use ch_inpaint::{FidelityField, GridSpec, ScalarField};
use ch_inpaint_oracle::fixtures::RandomStep;
use ch_inpaint_oracle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: GridSpec, seed: u64, lo: f64, hi: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(grid, |_, _| rng.gen_range(lo..=hi))
}

#[test]
fn dense_assembly_matches_stencil() {
    for (nx, ny) in [(2, 2), (3, 3), (4, 4), (5, 3), (8, 8), (2, 7)] {
        let g = GridSpec::new(nx, ny).unwrap();
        let k = assemble_stiffness(&g);
        for r in 0..g.len() {
            let row_sum: f64 = k.row(r).iter().sum();
            assert!(row_sum.abs() < 1e-14);
        }
        let m = assemble_mass(&g);
        for j in 0..g.len() {
            assert!((m[j] - g.weight(j)).abs() < 1e-15);
        }
        assert!((m.sum() - g.area()).abs() < 1e-12 * g.area());
        for seed in 0..5 {
            let f = random_field(g, seed, -1.0, 1.0);
            let dense = &k * nalgebra::DVector::from_column_slice(f.values());
            let stencil = stiffness_apply(&g, &f).unwrap();
            for j in 0..g.len() {
                assert!((dense[j] - stencil[j]).abs() < 1e-12, "{nx}x{ny} node {j}");
            }
        }
    }
}

#[test]
fn linear_ramp_matches_dense_product_on_4x4() {
    let g = GridSpec::new(4, 4).unwrap();
    let f = ScalarField::from_fn(g, |i, _| i as f64 * g.h());
    let dense = assemble_stiffness(&g) * nalgebra::DVector::from_column_slice(f.values());
    let stencil = stiffness_apply(&g, &f).unwrap();
    for j in 0..g.len() {
        assert!((dense[j] - stencil[j]).abs() < 1e-15);
    }
}

#[test]
fn oracle_zero_fixed_point() {
    let g = GridSpec::new(2, 2).unwrap();
    let zero = ScalarField::zeros(g);
    let fid = FidelityField::none(g);
    let p = StepProblem::new(&zero, &zero, &fid, 0.1, 1e-3).unwrap();
    let (u, w) = oracle_step_dense(&p).unwrap();
    assert!(u.max_abs() < 1e-14);
    assert!(w.max_abs() < 1e-12);
}

#[test]
fn oracle_contact_fixed_point() {
    let g = GridSpec::new(2, 2).unwrap();
    let one = ScalarField::constant(g, 1.0);
    let fid = FidelityField::everywhere(g, 1e3).unwrap();
    let p = StepProblem::new(&one, &one, &fid, 0.1, 1e-3).unwrap();
    let (u, w) = oracle_step_dense(&p).unwrap();
    assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    let sys = DenseStepSystem::from_problem(&p);
    let g_vals = sys.complementarity(
        &nalgebra::DVector::from_column_slice(u.values()),
        &nalgebra::DVector::from_column_slice(w.values()),
    );
    assert!(g_vals.iter().all(|v| *v <= 1e-12));
}

#[test]
fn oracle_rejects_large_grids() {
    let g = GridSpec::new(9, 8).unwrap();
    let z = ScalarField::zeros(g);
    let fid = FidelityField::none(g);
    let p = StepProblem::new(&z, &z, &fid, 0.1, 1e-3).unwrap();
    assert!(matches!(
        oracle_step_dense(&p),
        Err(OracleError::TooLarge(72))
    ));
}

#[test]
fn enumeration_and_pdas_agree_with_gauss_seidel_on_small_grids() {
    for (seed, (nx, ny)) in [(2, 2), (3, 2), (3, 3), (2, 5), (4, 4), (6, 5)]
        .into_iter()
        .enumerate()
    {
        let rs = RandomStep::generate(seed as u64 + 100, nx, ny, 1e3, 0.1, 1e-3);
        let p = rs.problem();
        let (u_oracle, _) = oracle_step_dense(&p).unwrap();
        let r = step_obstacle(&p).unwrap();
        assert!(r.converged);
        let d = r.u_next.max_diff(&u_oracle).unwrap();
        assert!(d <= 1e-8, "{nx}x{ny}: {d}");
        assert!(kkt_residual(&g_of(&p), &r, &p).max() <= 10.0 * p.inner_tol());
    }
}

fn g_of(p: &StepProblem<'_>) -> GridSpec {
    *p.grid()
}

#[test]
fn oracle_solution_independent_of_search_order() {
    for seed in 0..6 {
        let (nx, ny) = if seed % 2 == 0 { (3, 3) } else { (6, 6) };
        let rs = RandomStep::generate(seed, nx, ny, 1e3, 0.1, 1e-3);
        let p = rs.problem();
        let (a, _) = oracle_step_dense_ordered(&p, EnumerationOrder::Forward).unwrap();
        let (b, _) = oracle_step_dense_ordered(&p, EnumerationOrder::Reverse).unwrap();
        assert!(a.max_diff(&b).unwrap() < 1e-10);
    }
}

#[test]
fn stationarity_measure_examples() {
    let g = GridSpec::new(5, 5).unwrap();
    let image = random_field(g, 3, -1.0, 1.0);
    let mut damaged = vec![false; g.len()];
    damaged[12] = true;
    let fid = FidelityField::from_damage(g, &damaged, 10.0).unwrap();
    assert_eq!(check_stationarity(&image, &image, &fid).unwrap(), 0.0);
    let mut shifted = image.clone();
    for j in 0..g.len() {
        if !fid.is_damaged(j) {
            shifted[j] += 0.1;
        } else {
            shifted[j] = 7.0;
        }
    }
    assert!((check_stationarity(&shifted, &image, &fid).unwrap() - 0.1).abs() < 1e-12);
    assert!(check_stationarity(&image, &image, &FidelityField::none(g)).is_err());
}

#[test]
fn regularized_energy_gradient_matches_finite_differences() {
    let g = GridSpec::new(6, 5).unwrap();
    let zero = ScalarField::zeros(g);
    assert!(regularized_energy_gradient(&g, &zero, 0.1, 1e-2).amax() == 0.0);
    assert!(energy_gradient_check(&g, &zero, 0.1, 1e-2) < 1e-8);

    for seed in 0..4 {
        let u = random_field(g, seed, -0.9, 0.9);
        let gap = energy_gradient_check(&g, &u, 0.1, 1e-2);
        assert!(gap <= 1e-5, "seed {seed}: {gap}");
    }
    // values straddling the kinks, including some within the one-sided window
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let u = ScalarField::from_fn(g, |_, _| {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        sign * rng.gen_range(0.9995..1.3)
    });
    let gap = energy_gradient_check(&g, &u, 0.1, 1e-2);
    assert!(gap <= 1e-4, "{gap}");
}

#[test]
fn report_formats_one_line_per_check() {
    let mut r = VerificationReport::new();
    assert!(r.at_most("small", 1e-9, 1e-8));
    assert!(!r.at_least("big", 0.5, 0.9));
    assert!(!r.at_most("nan", f64::NAN, 1.0));
    let text = r.to_string();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("PASS small"));
    assert!(!r.all_passed());
}
