//! One time step of the semi-implicit scheme for the inpainting flow.
//!
//! Every solver computes `(u, w)` from the previous state `u_prev` such that,
//! with lumped masses `m_j` and stiffness `K`,
//!
//! ```text
//! m_j (u_j - u_prev_j) / tau + (K w)_j = m_j lambda_j (I_j - u_prev_j)
//! ```
//!
//! holds at every node. The second relation depends on the potential:
//!
//! * obstacle: `g_j = eps (K u)_j - m_j (w_j + u_prev_j / eps)` vanishes where
//!   `|u_j| < 1`, is `<= 0` where `u_j = 1` and `>= 0` where `u_j = -1`;
//! * Moreau-Yosida: `m_j w_j = eps (K u)_j + (m_j / eps) (beta_delta(u_j) - u_prev_j)`;
//! * quartic: `m_j w_j = eps (K u)_j + (4 m_j / eps) (u_prev_j^2 u_j - u_prev_j)`.
//!
//! The fidelity term is always explicit. The concave part of the potential
//! is explicit, the rest implicit.

use crate::error::{Error, Result};
use crate::grid::{stiffness_apply_into, FidelityField, GridSpec, ScalarField};
use crate::linalg::minres;
use crate::potentials::{beta_unchecked, FEASIBILITY_SLACK};
use crate::sparse::{Contact, FrozenContactSystem};

pub const DEFAULT_INNER_TOL: f64 = 1e-9;

/// Inner solver for the obstacle potential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ObstacleSolver {
    /// [`step_obstacle_active_set`]: sparse direct solves, fast on large grids.
    #[default]
    ActiveSet,
    /// [`step_obstacle`]: matrix-free projected sweeps.
    GaussSeidel,
}

/// Input of a single time step.
#[derive(Clone, Debug)]
pub struct StepProblem<'a> {
    u_prev: &'a ScalarField,
    image: &'a ScalarField,
    fidelity: &'a FidelityField,
    w_init: Option<&'a ScalarField>,
    eps: f64,
    tau: f64,
    inner_tol: f64,
    max_inner_iters: usize,
}

impl<'a> StepProblem<'a> {
    pub fn new(
        u_prev: &'a ScalarField,
        image: &'a ScalarField,
        fidelity: &'a FidelityField,
        eps: f64,
        tau: f64,
    ) -> Result<Self> {
        let grid = u_prev.grid();
        grid.ensure_same(image.grid())?;
        grid.ensure_same(fidelity.grid())?;
        positive("eps", eps)?;
        positive("tau", tau)?;
        Ok(Self {
            u_prev,
            image,
            fidelity,
            w_init: None,
            eps,
            tau,
            inner_tol: DEFAULT_INNER_TOL,
            max_inner_iters: 10 * grid.len(),
        })
    }

    pub fn with_inner_tol(mut self, tol: f64) -> Result<Self> {
        positive("inner_tol", tol)?;
        self.inner_tol = tol;
        Ok(self)
    }

    pub fn with_max_inner_iters(mut self, iters: usize) -> Result<Self> {
        if iters == 0 {
            return Err(Error::param("max_inner_iters", "must be at least 1"));
        }
        self.max_inner_iters = iters;
        Ok(self)
    }

    /// Starting guess for the chemical potential, usually the previous step's.
    pub fn with_w_init(mut self, w: &'a ScalarField) -> Result<Self> {
        self.grid().ensure_same(w.grid())?;
        self.w_init = Some(w);
        Ok(self)
    }

    pub fn grid(&self) -> &GridSpec {
        self.u_prev.grid()
    }

    pub fn u_prev(&self) -> &ScalarField {
        self.u_prev
    }

    pub fn image(&self) -> &ScalarField {
        self.image
    }

    pub fn fidelity(&self) -> &FidelityField {
        self.fidelity
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn inner_tol(&self) -> f64 {
        self.inner_tol
    }

    pub fn max_inner_iters(&self) -> usize {
        self.max_inner_iters
    }

    /// Explicit fidelity source `lambda_j (I_j - u_prev_j)`, with the image
    /// clamped to `[-1, 1]`.
    pub fn source(&self) -> Vec<f64> {
        self.fidelity
            .lambda()
            .iter()
            .zip(self.image.values())
            .zip(self.u_prev.values())
            .map(|((l, i), u)| l * (i.clamp(-1.0, 1.0) - u))
            .collect()
    }

    fn check_feasible(&self) -> Result<()> {
        for (node, v) in self.u_prev.values().iter().enumerate() {
            if v.abs() > 1.0 + FEASIBILITY_SLACK {
                return Err(Error::ConstraintViolation {
                    node,
                    value: v.abs(),
                });
            }
        }
        Ok(())
    }

    fn initial_w(&self) -> Vec<f64> {
        if let Some(w) = self.w_init {
            return w.values().to_vec();
        }
        let grid = self.grid();
        let up = self.u_prev.values();
        let mut ku = vec![0.0; grid.len()];
        stiffness_apply_into(grid, up, &mut ku);
        ku.iter()
            .zip(up)
            .enumerate()
            .map(|(j, (k, u))| self.eps * k / grid.weight(j) - u / self.eps)
            .collect()
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::param(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub u_next: ScalarField,
    pub w_next: ScalarField,
    pub inner_iterations: usize,
    pub final_residual: f64,
    /// Nodes with `u >= 1`.
    pub active_upper: usize,
    /// Nodes with `u <= -1`.
    pub active_lower: usize,
    /// False when the inner solver ran out of iterations.
    pub converged: bool,
}

impl StepResult {
    fn assemble(
        grid: GridSpec,
        u: Vec<f64>,
        w: Vec<f64>,
        inner_iterations: usize,
        final_residual: f64,
        converged: bool,
    ) -> Self {
        let active_upper = u.iter().filter(|v| **v >= 1.0).count();
        let active_lower = u.iter().filter(|v| **v <= -1.0).count();
        Self {
            u_next: ScalarField::from_vec_unchecked(grid, u),
            w_next: ScalarField::from_vec_unchecked(grid, w),
            inner_iterations,
            final_residual,
            active_upper,
            active_lower,
            converged,
        }
    }
}

/// Nodewise complementarity residuals of the obstacle step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KKTReport {
    /// `max |g_j|` over nodes with `|u_j| < 1`.
    pub max_interior_residual: f64,
    /// `max(0, g_j)` over nodes with `u_j = 1`.
    pub max_sign_violation_upper: f64,
    /// `max(0, -g_j)` over nodes with `u_j = -1`.
    pub max_sign_violation_lower: f64,
}

impl KKTReport {
    pub fn max(&self) -> f64 {
        self.max_interior_residual
            .max(self.max_sign_violation_upper)
            .max(self.max_sign_violation_lower)
    }
}

/// Obstacle step by projected block Gauss-Seidel.
///
/// Nodes are visited row-major. At each node the 2x2 system for `(u_j, w_j)`
/// is solved exactly with the neighbours frozen, `u_j` is clipped to
/// `[-1, 1]` and `w_j` is recomputed from the mass equation. Sweeps stop once
/// the largest nodal update (absolute in `u`, relative in `w`) drops to
/// `inner_tol`.
pub fn step_obstacle(p: &StepProblem<'_>) -> Result<StepResult> {
    p.check_feasible()?;
    let sys = ObstacleData::new(p);
    let u = p.u_prev.values().to_vec();
    let w = p.initial_w();
    Ok(sys.gauss_seidel(p, u, w, p.max_inner_iters))
}

/// Obstacle step by a primal-dual active-set iteration.
///
/// For the current contact sets the linear system in `(u, w)` is solved with
/// a sparse LU factorization, then nodes whose `u` left the box enter the
/// contact set and contact nodes whose complementarity residual has the wrong
/// sign are released. When the sets stop changing the result satisfies the
/// same conditions as [`step_obstacle`], usually after a handful of
/// factorizations. If the iteration cycles or the sets do not settle, the
/// last iterate is handed to the Gauss-Seidel sweeps as a warm start.
pub fn step_obstacle_active_set(p: &StepProblem<'_>) -> Result<StepResult> {
    const MAX_SET_UPDATES: usize = 200;
    p.check_feasible()?;
    let grid = *p.grid();
    let n = grid.len();
    let sys = ObstacleData::new(p);
    let frozen = FrozenContactSystem::new(&grid, &sys.mass, p.eps, p.tau);
    let up = p.u_prev.values();

    let mut states: Vec<Contact> = up
        .iter()
        .map(|&v| {
            if v >= 1.0 {
                Contact::Upper
            } else if v <= -1.0 {
                Contact::Lower
            } else {
                Contact::Free
            }
        })
        .collect();
    let mut u = up.to_vec();
    let mut w = p.initial_w();
    let mut seen: Vec<Vec<Contact>> = Vec::new();
    let mut updates = 0;
    let mut ku = vec![0.0; n];
    let mut cap = usize::MAX;

    while updates < MAX_SET_UPDATES.min(p.max_inner_iters) {
        updates += 1;
        let Some((un, wn)) = frozen.solve(&states, &sys.rhs_mass, &sys.rhs_free) else {
            break;
        };
        u = un;
        w = wn;
        stiffness_apply_into(&grid, &u, &mut ku);
        let w_scale = 1.0 + w.iter().fold(0.0_f64, |a, v| a.max(v.abs())) + 1.0 / p.eps;
        // candidate moves with a dimensionless violation for ranking
        let mut moves: Vec<(usize, Contact, f64)> = Vec::new();
        for j in 0..n {
            let g = p.eps * ku[j] - sys.mass[j] * (w[j] + up[j] / p.eps);
            let scale = sys.mass[j] * w_scale;
            match states[j] {
                Contact::Free if u[j] > 1.0 + SET_SLACK => {
                    moves.push((j, Contact::Upper, u[j] - 1.0))
                }
                Contact::Free if u[j] < -1.0 - SET_SLACK => {
                    moves.push((j, Contact::Lower, -1.0 - u[j]))
                }
                Contact::Upper if g > 1e-12 * scale => moves.push((j, Contact::Free, g / scale)),
                Contact::Lower if g < -1e-12 * scale => moves.push((j, Contact::Free, -g / scale)),
                _ => {}
            }
        }
        if moves.is_empty() {
            for v in u.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
            let report = obstacle_kkt(&grid, p, &u, &w);
            if report.max() <= p.inner_tol {
                return Ok(StepResult::assemble(
                    grid,
                    u,
                    w,
                    updates,
                    report.max(),
                    true,
                ));
            }
            break;
        }
        moves.sort_by(|a, b| b.2.total_cmp(&a.2));
        let mut next = states.clone();
        loop {
            next.clone_from(&states);
            for &(j, s, _) in moves.iter().take(cap) {
                next[j] = s;
            }
            // with no free node left the frozen system is singular
            if !next.contains(&Contact::Free) {
                if let Some(&(j, _, _)) =
                    moves.iter().take(cap).rev().find(|m| m.1 != Contact::Free)
                {
                    next[j] = Contact::Free;
                }
            }
            if !seen.contains(&next) {
                break;
            }
            // damp the iteration: from now on only the worst violations move
            if cap == 1 {
                break;
            }
            cap = (moves.len().min(cap) / 4).max(1);
            seen.clear();
        }
        if seen.contains(&next) {
            break;
        }
        seen.push(std::mem::replace(&mut states, next));
    }

    for v in u.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    let budget = p.max_inner_iters.saturating_sub(updates).max(1);
    let mut r = sys.gauss_seidel(p, u, w, budget);
    r.inner_iterations += updates;
    Ok(r)
}

/// Tolerance on `|u| - 1` before a free node is moved into contact.
const SET_SLACK: f64 = 1e-12;

/// Node data shared by the obstacle solvers.
struct ObstacleData {
    mass: Vec<f64>,
    kdiag: Vec<f64>,
    /// `m (u_prev + tau source)`, the mass equation times `tau`.
    rhs_mass: Vec<f64>,
    /// `m u_prev / eps`, the free-node equation.
    rhs_free: Vec<f64>,
}

impl ObstacleData {
    fn new(p: &StepProblem<'_>) -> Self {
        let grid = p.grid();
        let n = grid.len();
        let src = p.source();
        let up = p.u_prev.values();
        let mass = grid.weights();
        let kdiag = (0..n).map(|j| grid.stiffness_diag(j)).collect();
        let rhs_mass = (0..n).map(|j| mass[j] * (up[j] + p.tau * src[j])).collect();
        let rhs_free = (0..n).map(|j| mass[j] * up[j] / p.eps).collect();
        Self {
            mass,
            kdiag,
            rhs_mass,
            rhs_free,
        }
    }

    fn gauss_seidel(
        &self,
        p: &StepProblem<'_>,
        mut u: Vec<f64>,
        mut w: Vec<f64>,
        max_sweeps: usize,
    ) -> StepResult {
        let grid = *p.grid();
        let (eps, tau) = (p.eps, p.tau);
        let (mass, kdiag) = (&self.mass, &self.kdiag);
        let denom: Vec<f64> = (0..grid.len())
            .map(|j| eps * kdiag[j] + mass[j] * mass[j] / (tau * kdiag[j]))
            .collect();
        let mut change = f64::INFINITY;
        let mut sweeps = 0;
        while sweeps < max_sweeps {
            sweeps += 1;
            change = 0.0;
            for j in 0..grid.len() {
                let tk = tau * kdiag[j];
                let a = self.rhs_mass[j] + tau * grid.neighbor_sum(j, &w);
                let b = self.rhs_free[j] + eps * grid.neighbor_sum(j, &u);
                let uj = ((b + mass[j] * a / tk) / denom[j]).clamp(-1.0, 1.0);
                let wj = (a - mass[j] * uj) / tk;
                let du = (uj - u[j]).abs();
                let dw = (wj - w[j]).abs() / (1.0 + wj.abs());
                change = change.max(du).max(dw);
                u[j] = uj;
                w[j] = wj;
            }
            if change <= p.inner_tol {
                break;
            }
        }
        let converged = change <= p.inner_tol;
        StepResult::assemble(grid, u, w, sweeps, change, converged)
    }
}

/// Linearized step shared by the Moreau-Yosida and quartic solvers:
///
/// ```text
/// [ eps K + M D   -M     ] [u]   [ rhs_w                        ]
/// [ -M            -tau K ] [w] = [ -(M u_prev + tau M source)   ]
/// ```
struct LinearizedStep<'g> {
    grid: &'g GridSpec,
    eps: f64,
    tau: f64,
    mass: Vec<f64>,
    kdiag: Vec<f64>,
}

struct LinearSolve {
    iterations: usize,
    relative_residual: f64,
    converged: bool,
}

impl<'g> LinearizedStep<'g> {
    fn new(grid: &'g GridSpec, eps: f64, tau: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            eps,
            tau,
            mass: grid.weights(),
            kdiag: (0..n).map(|j| grid.stiffness_diag(j)).collect(),
        }
    }

    /// Solves in place; `uw` holds `[u; w]` and is used as the initial guess.
    fn solve(
        &self,
        diag: &[f64],
        rhs_w: &[f64],
        rhs_mass: &[f64],
        uw: &mut [f64],
        max_iter: usize,
    ) -> LinearSolve {
        const RTOL: f64 = 1e-14;
        const REFINEMENTS: usize = 4;
        let n = self.grid.len();
        let (eps, tau) = (self.eps, self.tau);
        let mass = &self.mass;
        let grid = self.grid;
        let apply = |x: &[f64], out: &mut [f64]| {
            let (u, w) = x.split_at(n);
            let (ou, ow) = out.split_at_mut(n);
            stiffness_apply_into(grid, u, ou);
            stiffness_apply_into(grid, w, ow);
            for j in 0..n {
                ou[j] = eps * ou[j] + mass[j] * (diag[j] * u[j] - w[j]);
                ow[j] = -mass[j] * u[j] - tau * ow[j];
            }
        };
        let mut precond = vec![0.0; 2 * n];
        for j in 0..n {
            let pu = eps * self.kdiag[j] + mass[j] * diag[j];
            precond[j] = pu;
            precond[n + j] = tau * self.kdiag[j] + mass[j] * mass[j] / pu;
        }
        let mut b = Vec::with_capacity(2 * n);
        b.extend_from_slice(rhs_w);
        b.extend(rhs_mass.iter().map(|v| -v));
        let b_norm = b
            .iter()
            .zip(&precond)
            .map(|(v, p)| v * v / p)
            .sum::<f64>()
            .sqrt();

        let mut iterations = 0;
        let mut relative_residual = f64::INFINITY;
        let mut tmp = vec![0.0; 2 * n];
        // restarts act as iterative refinement against rounding drift
        for _ in 0..REFINEMENTS {
            let out = minres(
                &apply,
                &precond,
                &b,
                uw,
                RTOL,
                max_iter.saturating_sub(iterations).max(1),
            );
            iterations += out.iterations;
            apply(uw, &mut tmp);
            let r = b
                .iter()
                .zip(&tmp)
                .zip(&precond)
                .map(|((bi, ai), p)| (bi - ai) * (bi - ai) / p)
                .sum::<f64>()
                .sqrt();
            relative_residual = if b_norm > 0.0 { r / b_norm } else { r };
            if relative_residual <= 10.0 * RTOL || iterations >= max_iter || !out.converged {
                break;
            }
        }
        LinearSolve {
            iterations,
            relative_residual,
            converged: relative_residual <= 1e-11,
        }
    }
}

fn linear_iteration_cap(grid: &GridSpec) -> usize {
    (40 * grid.len()).max(2000)
}

/// Moreau-Yosida step by primal-dual active sets.
///
/// `beta_delta` is piecewise linear, so each iteration solves the linear
/// system for the current sets `{u > 1}` and `{u < -1}` exactly; the iteration
/// stops when the sets repeat.
pub fn step_moreau_yosida(p: &StepProblem<'_>, delta: f64) -> Result<StepResult> {
    positive("delta", delta)?;
    let grid = *p.grid();
    let n = grid.len();
    let (eps, tau) = (p.eps, p.tau);
    let lin = LinearizedStep::new(&grid, eps, tau);
    let up = p.u_prev.values();
    let src = p.source();
    let rhs_mass: Vec<f64> = (0..n)
        .map(|j| lin.mass[j] * (up[j] + tau * src[j]))
        .collect();

    let mut uw = Vec::with_capacity(2 * n);
    uw.extend_from_slice(up);
    uw.extend(p.initial_w());

    // -1, 0, +1 per node: below the box, inside, above
    let classify = |u: &[f64]| -> Vec<i8> {
        u.iter()
            .map(|&v| {
                if v > 1.0 {
                    1
                } else if v < -1.0 {
                    -1
                } else {
                    0
                }
            })
            .collect()
    };
    let mut sets = classify(up);
    let slope = 1.0 / (eps * delta);
    let mut diag = vec![0.0; n];
    let mut rhs_w = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut linear_ok = true;
    let cap = linear_iteration_cap(&grid);

    while iterations < p.max_inner_iters {
        iterations += 1;
        for j in 0..n {
            let s = sets[j] as f64;
            diag[j] = s.abs() * slope;
            rhs_w[j] = lin.mass[j] * (up[j] / eps + s * slope);
        }
        let solve = lin.solve(&diag, &rhs_w, &rhs_mass, &mut uw, cap);
        linear_ok = solve.converged;
        let next = classify(&uw[..n]);
        if next == sets {
            converged = linear_ok;
            break;
        }
        sets = next;
    }

    let (u, w) = uw.split_at(n);
    let residual = moreau_yosida_residual(&grid, eps, delta, up, u, w);
    Ok(StepResult::assemble(
        grid,
        u.to_vec(),
        w.to_vec(),
        iterations,
        residual,
        converged && linear_ok,
    ))
}

/// Max over nodes of `|eps (K u)_j / m_j + (beta(u_j) - u_prev_j) / eps - w_j|`.
fn moreau_yosida_residual(
    grid: &GridSpec,
    eps: f64,
    delta: f64,
    up: &[f64],
    u: &[f64],
    w: &[f64],
) -> f64 {
    let mut ku = vec![0.0; grid.len()];
    stiffness_apply_into(grid, u, &mut ku);
    (0..grid.len())
        .map(|j| {
            let lhs = eps * ku[j] / grid.weight(j) + (beta_unchecked(u[j], delta) - up[j]) / eps;
            (lhs - w[j]).abs() / (1.0 + w[j].abs())
        })
        .fold(0.0, f64::max)
}

/// Quartic double-well step with the lagged convex split
/// `W'(u) ~ 4 u_prev^2 u - 4 u_prev`; one symmetric linear solve, no projection.
pub fn step_quartic(p: &StepProblem<'_>) -> Result<StepResult> {
    let grid = *p.grid();
    let n = grid.len();
    let (eps, tau) = (p.eps, p.tau);
    let lin = LinearizedStep::new(&grid, eps, tau);
    let up = p.u_prev.values();
    let src = p.source();
    let rhs_mass: Vec<f64> = (0..n)
        .map(|j| lin.mass[j] * (up[j] + tau * src[j]))
        .collect();
    let diag: Vec<f64> = up.iter().map(|v| 4.0 * v * v / eps).collect();
    let rhs_w: Vec<f64> = (0..n).map(|j| 4.0 * lin.mass[j] * up[j] / eps).collect();

    let mut uw = Vec::with_capacity(2 * n);
    uw.extend_from_slice(up);
    uw.extend(p.initial_w());
    let cap = linear_iteration_cap(&grid).min(p.max_inner_iters.max(1));
    let solve = lin.solve(&diag, &rhs_w, &rhs_mass, &mut uw, cap);
    let (u, w) = uw.split_at(n);
    Ok(StepResult::assemble(
        grid,
        u.to_vec(),
        w.to_vec(),
        solve.iterations,
        solve.relative_residual,
        solve.converged && solve.relative_residual <= p.inner_tol,
    ))
}

/// Complementarity residuals `g_j = eps (K u)_j - m_j (w_j + u_prev_j / eps)`.
pub fn kkt_residual(grid: &GridSpec, r: &StepResult, p: &StepProblem<'_>) -> KKTReport {
    obstacle_kkt(grid, p, r.u_next.values(), r.w_next.values())
}

fn obstacle_kkt(grid: &GridSpec, p: &StepProblem<'_>, u: &[f64], w: &[f64]) -> KKTReport {
    let up = p.u_prev.values();
    let mut ku = vec![0.0; grid.len()];
    stiffness_apply_into(grid, u, &mut ku);
    let mut report = KKTReport::default();
    for j in 0..grid.len() {
        let g = p.eps * ku[j] - grid.weight(j) * (w[j] + up[j] / p.eps);
        if u[j] >= 1.0 {
            report.max_sign_violation_upper = report.max_sign_violation_upper.max(g);
        } else if u[j] <= -1.0 {
            report.max_sign_violation_lower = report.max_sign_violation_lower.max(-g);
        } else {
            report.max_interior_residual = report.max_interior_residual.max(g.abs());
        }
    }
    report
}

/// `sum_j m_j (u_j - u_prev_j) - tau sum_j m_j source_j`; zero for an exact step.
pub fn mass_defect(p: &StepProblem<'_>, r: &StepResult) -> f64 {
    let grid = p.grid();
    let src = p.source();
    let up = p.u_prev.values();
    r.u_next
        .values()
        .iter()
        .enumerate()
        .map(|(j, u)| grid.weight(j) * ((u - up[j]) - p.tau * src[j]))
        .sum()
}
