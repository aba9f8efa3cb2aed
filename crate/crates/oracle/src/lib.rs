//! Brute-force verification for `ch-inpaint`.
//!
//! * [`oracle_step_dense`] solves one obstacle time step on a tiny grid by
//!   searching over active sets of the dense KKT system;
//! * [`check_stationarity`] measures the mean defect over the intact region;
//! * [`energy_gradient_check`] compares the analytic gradient of the
//!   regularized energy with finite differences of the library's energy.
//!
//! Everything here is assembled independently of the stencil and sweep code
//! it is used to check.

pub mod dense;
pub mod fixtures;
pub mod report;

use ch_inpaint::potentials::{discrete_energy, PotentialSpec};
use ch_inpaint::step::StepProblem;
use ch_inpaint::{FidelityField, GridSpec, ScalarField};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use dense::{assemble_mass, assemble_stiffness, DenseStepSystem};
pub use report::VerificationReport;

/// Largest node count the dense oracle accepts.
pub const MAX_ORACLE_NODES: usize = 64;
/// Node count up to which all `3^n` active sets are enumerated.
pub const ENUMERATION_LIMIT: usize = 10;
pub const PDAS_RESTARTS: usize = 50;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid has {0} nodes, oracle supports at most {MAX_ORACLE_NODES}")]
    TooLarge(usize),
    #[error("no active set satisfies the KKT conditions")]
    NoConsistentActiveSet,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Lower,
    Free,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumerationOrder {
    Forward,
    Reverse,
}

/// Exact KKT point `(u, w)` of one obstacle step.
pub fn oracle_step_dense(p: &StepProblem<'_>) -> Result<(ScalarField, ScalarField), OracleError> {
    oracle_step_dense_ordered(p, EnumerationOrder::Forward)
}

pub fn oracle_step_dense_ordered(
    p: &StepProblem<'_>,
    order: EnumerationOrder,
) -> Result<(ScalarField, ScalarField), OracleError> {
    let grid = *p.grid();
    let n = grid.len();
    if n > MAX_ORACLE_NODES {
        return Err(OracleError::TooLarge(n));
    }
    if p.u_prev().values().iter().any(|v| v.abs() > 1.0 + 1e-12) {
        return Err(OracleError::InvalidInput(
            "previous state leaves [-1, 1]".into(),
        ));
    }
    let sys = DenseStepSystem::from_problem(p);
    let (u, w) = if n <= ENUMERATION_LIMIT {
        enumerate(&sys, order)?
    } else {
        pdas_with_restarts(&sys, order)?
    };
    let to_field =
        |v: DVector<f64>| ScalarField::new(grid, v.iter().copied().collect()).expect("finite");
    Ok((to_field(u), to_field(w)))
}

fn enumerate(
    sys: &DenseStepSystem,
    order: EnumerationOrder,
) -> Result<(DVector<f64>, DVector<f64>), OracleError> {
    let n = sys.len();
    let total = 3usize.pow(n as u32);
    let decode = |mut k: usize| -> Vec<NodeState> {
        (0..n)
            .map(|_| {
                let s = match k % 3 {
                    0 => NodeState::Free,
                    1 => NodeState::Upper,
                    _ => NodeState::Lower,
                };
                k /= 3;
                s
            })
            .collect()
    };
    let indices: Box<dyn Iterator<Item = usize>> = match order {
        EnumerationOrder::Forward => Box::new(0..total),
        EnumerationOrder::Reverse => Box::new((0..total).rev()),
    };
    for k in indices {
        let states = decode(k);
        if let Some((u, w)) = solve_assignment(sys, &states) {
            if is_kkt_point(sys, &states, &u, &w) {
                return Ok((u, w));
            }
        }
    }
    Err(OracleError::NoConsistentActiveSet)
}

fn pdas_with_restarts(
    sys: &DenseStepSystem,
    order: EnumerationOrder,
) -> Result<(DVector<f64>, DVector<f64>), OracleError> {
    let n = sys.len();
    let seed = match order {
        EnumerationOrder::Forward => 0x5eed,
        EnumerationOrder::Reverse => 0xdeed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..=PDAS_RESTARTS {
        let mut states: Vec<NodeState> = if attempt == 0 {
            vec![NodeState::Free; n]
        } else {
            (0..n)
                .map(|_| match rng.gen_range(0..3) {
                    0 => NodeState::Free,
                    1 => NodeState::Upper,
                    _ => NodeState::Lower,
                })
                .collect()
        };
        for _ in 0..200 {
            let Some((u, w)) = solve_assignment(sys, &states) else {
                break;
            };
            let g = sys.complementarity(&u, &w);
            let next: Vec<NodeState> = (0..n)
                .map(|j| match states[j] {
                    NodeState::Free if u[j] > sys.upper => NodeState::Upper,
                    NodeState::Free if u[j] < sys.lower => NodeState::Lower,
                    NodeState::Free => NodeState::Free,
                    NodeState::Upper if g[j] > 0.0 => NodeState::Free,
                    NodeState::Upper => NodeState::Upper,
                    NodeState::Lower if g[j] < 0.0 => NodeState::Free,
                    NodeState::Lower => NodeState::Lower,
                })
                .collect();
            if next == states {
                if is_kkt_point(sys, &states, &u, &w) {
                    return Ok((u, w));
                }
                break;
            }
            states = next;
        }
    }
    Err(OracleError::NoConsistentActiveSet)
}

/// Solves the linear KKT system for a fixed assignment of node states.
pub fn solve_assignment(
    sys: &DenseStepSystem,
    states: &[NodeState],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = sys.len();
    let (eps, tau) = (sys.eps, sys.tau);
    let bound = |s: NodeState| match s {
        NodeState::Upper => sys.upper,
        NodeState::Lower => sys.lower,
        NodeState::Free => 0.0,
    };

    if states.iter().all(|s| *s != NodeState::Free) {
        // u is pinned; w solves K w = (rhs_mass - M u) / tau up to a constant
        let u = DVector::from_iterator(n, states.iter().map(|s| bound(*s)));
        let r = (&sys.rhs_mass - sys.mass.component_mul(&u)) / tau;
        let scale = sys.rhs_mass.abs().sum().max(1e-300) / tau;
        if r.sum().abs() > 1e-12 * scale {
            return None;
        }
        let regularized = &sys.stiffness + DMatrix::from_element(n, n, 1.0);
        let w0 = regularized.lu().solve(&r)?;
        let g0 = sys.complementarity(&u, &w0);
        // shifting w by c changes g_j by -m_j c
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for j in 0..n {
            let t = g0[j] / sys.mass[j];
            match states[j] {
                NodeState::Upper => lo = lo.max(t),
                NodeState::Lower => hi = hi.min(t),
                NodeState::Free => unreachable!(),
            }
        }
        if lo > hi + 1e-9 * (1.0 + lo.abs().min(hi.abs())) {
            return None;
        }
        let c = if lo.is_finite() { lo } else { hi };
        let w = w0.add_scalar(c);
        return Some((u, w));
    }

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DVector::zeros(2 * n);
    for j in 0..n {
        a[(j, j)] = sys.mass[j];
        for k in 0..n {
            a[(j, n + k)] = tau * sys.stiffness[(j, k)];
        }
        b[j] = sys.rhs_mass[j];
        match states[j] {
            NodeState::Free => {
                for k in 0..n {
                    a[(n + j, k)] = eps * sys.stiffness[(j, k)];
                }
                a[(n + j, n + j)] = -sys.mass[j];
                b[n + j] = sys.rhs_free[j];
            }
            s => {
                a[(n + j, j)] = 1.0;
                b[n + j] = bound(s);
            }
        }
    }
    let x = a.lu().solve(&b)?;
    let u = x.rows(0, n).into_owned();
    let w = x.rows(n, n).into_owned();
    Some((u, w))
}

/// Primal feasibility on free nodes and admissible signs on contact nodes.
pub fn is_kkt_point(
    sys: &DenseStepSystem,
    states: &[NodeState],
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> bool {
    const TOL_U: f64 = 1e-11;
    let g = sys.complementarity(u, w);
    let w_scale = 1.0 + w.amax() + 1.0 / sys.eps;
    states.iter().enumerate().all(|(j, s)| {
        let tol_g = 1e-11 * sys.mass[j] * w_scale;
        match s {
            NodeState::Free => u[j] <= sys.upper + TOL_U && u[j] >= sys.lower - TOL_U,
            NodeState::Upper => g[j] <= tol_g,
            NodeState::Lower => g[j] >= -tol_g,
        }
    })
}

/// Mean defect `|sum_{lambda>0} m_j (I_j - u_j)| / sum_{lambda>0} m_j`.
pub fn check_stationarity(
    u: &ScalarField,
    image: &ScalarField,
    fid: &FidelityField,
) -> Result<f64, OracleError> {
    let grid = u.grid();
    if grid != image.grid() || grid != fid.grid() {
        return Err(OracleError::InvalidInput(
            "fields live on different grids".into(),
        ));
    }
    let mass = assemble_mass(grid);
    let (mut defect, mut weight) = (0.0, 0.0);
    for j in 0..grid.len() {
        if fid.lambda()[j] > 0.0 {
            defect += mass[j] * (image[j] - u[j]);
            weight += mass[j];
        }
    }
    if weight == 0.0 {
        return Err(OracleError::InvalidInput("no undamaged nodes".into()));
    }
    Ok(defect.abs() / weight)
}

/// Nodal gradient of `E(u) = (eps/2) u.K u + (1/eps) sum_j m_j W_delta(u_j)`.
pub fn regularized_energy_gradient(
    grid: &GridSpec,
    u: &ScalarField,
    eps: f64,
    delta: f64,
) -> DVector<f64> {
    let k = assemble_stiffness(grid);
    let m = assemble_mass(grid);
    let uv = DVector::from_column_slice(u.values());
    let ku = &k * &uv;
    DVector::from_iterator(
        grid.len(),
        (0..grid.len()).map(|j| {
            let s = uv[j];
            let beta = ((s - 1.0).max(0.0) + (s + 1.0).min(0.0)) / delta;
            eps * ku[j] + m[j] / eps * (beta - s)
        }),
    )
}

/// Max-norm gap between the analytic gradient and finite differences of
/// `discrete_energy`. Central differences with step `1e-6`, one-sided (away
/// from the kink) for nodes within `1e-3` of `|u| = 1`.
pub fn energy_gradient_check(grid: &GridSpec, u: &ScalarField, eps: f64, delta: f64) -> f64 {
    const STEP: f64 = 1e-6;
    const KINK_WINDOW: f64 = 1e-3;
    let pot = PotentialSpec::MoreauYosida { delta };
    let analytic = regularized_energy_gradient(grid, u, eps, delta);
    let energy = |f: &ScalarField| discrete_energy(grid, f, eps, pot).expect("valid energy input");
    let base = energy(u);
    let mut worst: f64 = 0.0;
    let mut probe = u.clone();
    for j in 0..grid.len() {
        let s = u[j];
        let fd = if (s.abs() - 1.0).abs() < KINK_WINDOW {
            // step away from the kink at |s| = 1
            let dir = if s.abs() < 1.0 {
                -s.signum()
            } else {
                s.signum()
            };
            probe[j] = s + dir * STEP;
            let e = energy(&probe);
            dir * (e - base) / STEP
        } else {
            probe[j] = s + STEP;
            let ep = energy(&probe);
            probe[j] = s - STEP;
            let em = energy(&probe);
            (ep - em) / (2.0 * STEP)
        };
        probe[j] = s;
        worst = worst.max((fd - analytic[j]).abs());
    }
    worst
}
