//! Time stepping: single stages run to the stopping criterion and the
//! two-stage edge-sharpening schedule.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{FidelityField, GridSpec, ScalarField};
use crate::potentials::{discrete_energy, PotentialSpec};
use crate::step::{self, ObstacleSolver, StepProblem, StepResult, DEFAULT_INNER_TOL};

pub const DEFAULT_STOP_TOL: f64 = 5.0e-6;
pub const DEFAULT_MAX_STEPS: usize = 200_000;

/// Parameters of one stage of the schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageParams {
    pub eps: f64,
    pub alpha: f64,
    pub tau: f64,
    pub stop_tol: f64,
    pub max_steps: usize,
    pub inner_tol: f64,
    /// Inner solver used with the obstacle potential.
    pub obstacle_solver: ObstacleSolver,
}

impl StageParams {
    pub fn new(eps: f64, alpha: f64, tau: f64) -> Result<Self> {
        let p = Self {
            eps,
            alpha,
            tau,
            stop_tol: DEFAULT_STOP_TOL,
            max_steps: DEFAULT_MAX_STEPS,
            inner_tol: DEFAULT_INNER_TOL,
            obstacle_solver: ObstacleSolver::ActiveSet,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Result<Self> {
        self.stop_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_steps(mut self, steps: usize) -> Result<Self> {
        self.max_steps = steps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_inner_tol(mut self, tol: f64) -> Result<Self> {
        self.inner_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_obstacle_solver(mut self, solver: ObstacleSolver) -> Self {
        self.obstacle_solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps", self.eps),
            ("alpha", self.alpha),
            ("tau", self.tau),
            ("stop_tol", self.stop_tol),
            ("inner_tol", self.inner_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-run diagnostics. All traces have one entry per step taken.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub steps_taken: usize,
    pub stop_value_final: f64,
    pub hit_max_steps: bool,
    /// Lumped squared change `sum_j m_j (u_n - u_{n-1})^2`.
    pub stop_trace: Vec<f64>,
    pub energy_trace: Vec<f64>,
    /// Lumped mass `sum_j m_j u_n` after each step.
    pub mass_trace: Vec<f64>,
    /// `tau sum_j m_j lambda_j (I_j - u_{n-1})`, the mass added by the step.
    pub source_trace: Vec<f64>,
    pub max_abs_trace: Vec<f64>,
    /// Steps whose inner solver did not converge.
    pub unconverged_steps: Vec<usize>,
    pub max_inner_iterations: usize,
    /// Mass of the initial field.
    pub initial_mass: f64,
}

impl RunReport {
    pub fn is_clean(&self) -> bool {
        !self.hit_max_steps && self.unconverged_steps.is_empty()
    }

    /// Writes one line per step: index, stop value, energy, mass, tab-separated.
    pub fn write_trace(&self, out: &mut impl Write, first_index: usize) -> io::Result<()> {
        for k in 0..self.steps_taken {
            writeln!(
                out,
                "{}\t{:e}\t{:e}\t{:e}",
                first_index + k + 1,
                self.stop_trace[k],
                self.energy_trace[k],
                self.mass_trace[k]
            )?;
        }
        Ok(())
    }
}

fn solve_step(
    p: &StepProblem<'_>,
    pot: PotentialSpec,
    solver: ObstacleSolver,
) -> Result<StepResult> {
    match pot {
        PotentialSpec::Obstacle => match solver {
            ObstacleSolver::ActiveSet => step::step_obstacle_active_set(p),
            ObstacleSolver::GaussSeidel => step::step_obstacle(p),
        },
        PotentialSpec::MoreauYosida { delta } => step::step_moreau_yosida(p, delta),
        PotentialSpec::Quartic => step::step_quartic(p),
    }
}

/// Steps until `sum_j m_j (u_n - u_{n-1})^2 <= stop_tol` or `max_steps`.
///
/// `fidelity` supplies the damaged region; its weight is replaced by
/// `stage.alpha` unless it is identically zero.
pub fn run_stage(
    u0: &ScalarField,
    image: &ScalarField,
    fidelity: &FidelityField,
    stage: &StageParams,
    pot: PotentialSpec,
) -> Result<(ScalarField, RunReport)> {
    run_stage_inner(u0, image, fidelity, stage, pot, None).map(|(u, _, r)| (u, r))
}

fn run_stage_inner(
    u0: &ScalarField,
    image: &ScalarField,
    fidelity: &FidelityField,
    stage: &StageParams,
    pot: PotentialSpec,
    w0: Option<&ScalarField>,
) -> Result<(ScalarField, ScalarField, RunReport)> {
    stage.validate()?;
    pot.validate()?;
    let grid: GridSpec = *u0.grid();
    grid.ensure_same(image.grid())?;
    grid.ensure_same(fidelity.grid())?;
    let fid = if fidelity.lambda().iter().all(|l| *l == 0.0) {
        fidelity.clone()
    } else {
        fidelity.with_alpha(stage.alpha)?
    };

    let mut u = u0.clone();
    let mut w: Option<ScalarField> = w0.cloned();
    let mut report = RunReport {
        initial_mass: u0.mass(),
        ..RunReport::default()
    };

    for n in 1..=stage.max_steps {
        let mut problem = StepProblem::new(&u, image, &fid, stage.eps, stage.tau)?
            .with_inner_tol(stage.inner_tol)?;
        if let Some(w_prev) = w.as_ref() {
            problem = problem.with_w_init(w_prev)?;
        }
        let source: f64 = problem
            .source()
            .iter()
            .enumerate()
            .map(|(j, f)| grid.weight(j) * f)
            .sum::<f64>()
            * stage.tau;
        let result = solve_step(&problem, pot, stage.obstacle_solver)?;

        let stop_value: f64 = result
            .u_next
            .values()
            .iter()
            .zip(u.values())
            .enumerate()
            .map(|(j, (a, b))| grid.weight(j) * (a - b) * (a - b))
            .sum();
        let energy = discrete_energy(&grid, &result.u_next, stage.eps, pot)?;

        report.steps_taken = n;
        report.stop_value_final = stop_value;
        report.stop_trace.push(stop_value);
        report.energy_trace.push(energy);
        report.mass_trace.push(result.u_next.mass());
        report.source_trace.push(source);
        report.max_abs_trace.push(result.u_next.max_abs());
        report.max_inner_iterations = report.max_inner_iterations.max(result.inner_iterations);
        if !result.converged {
            report.unconverged_steps.push(n);
        }

        u = result.u_next;
        w = Some(result.w_next);
        if stop_value <= stage.stop_tol {
            break;
        }
    }
    report.hit_max_steps = report.stop_value_final > stage.stop_tol;
    let w = w.unwrap_or_else(|| ScalarField::zeros(grid));
    Ok((u, w, report))
}

/// Two stages: a wide interface `eps1` with fidelity `alpha`, then a sharp
/// interface `eps2` with the larger fidelity `alpha2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoStageConfig {
    pub stage1: StageParams,
    pub stage2: StageParams,
    pub potential: PotentialSpec,
}

impl TwoStageConfig {
    pub fn new(eps1: f64, eps2: f64, alpha: f64, alpha2: f64, tau: f64) -> Result<Self> {
        Ok(Self {
            stage1: StageParams::new(eps1, alpha, tau)?,
            stage2: StageParams::new(eps2, alpha2, tau)?,
            potential: PotentialSpec::Obstacle,
        })
    }

    pub fn with_potential(mut self, pot: PotentialSpec) -> Result<Self> {
        pot.validate()?;
        self.potential = pot;
        Ok(self)
    }

    pub fn with_stop_tols(mut self, tol1: f64, tol2: f64) -> Result<Self> {
        self.stage1 = self.stage1.with_stop_tol(tol1)?;
        self.stage2 = self.stage2.with_stop_tol(tol2)?;
        Ok(self)
    }

    pub fn with_max_steps(mut self, steps: usize) -> Result<Self> {
        self.stage1 = self.stage1.with_max_steps(steps)?;
        self.stage2 = self.stage2.with_max_steps(steps)?;
        Ok(self)
    }

    pub fn with_inner_tol(mut self, tol: f64) -> Result<Self> {
        self.stage1 = self.stage1.with_inner_tol(tol)?;
        self.stage2 = self.stage2.with_inner_tol(tol)?;
        Ok(self)
    }

    pub fn with_obstacle_solver(mut self, solver: ObstacleSolver) -> Self {
        self.stage1 = self.stage1.with_obstacle_solver(solver);
        self.stage2 = self.stage2.with_obstacle_solver(solver);
        self
    }
}

/// Start field: the image on intact nodes and `0` on damaged ones.
pub fn initial_guess(image: &ScalarField, damaged: &[bool]) -> Result<ScalarField> {
    let grid = image.grid();
    grid.ensure_len(damaged.len())?;
    let values = image
        .values()
        .iter()
        .zip(damaged)
        .map(|(v, d)| if *d { 0.0 } else { v.clamp(-1.0, 1.0) })
        .collect();
    ScalarField::new(*grid, values)
}

/// Runs both stages; stage 2 starts from the stage-1 field with its own step
/// budget.
pub fn run_two_stage(
    u0: &ScalarField,
    image: &ScalarField,
    damaged: &[bool],
    config: &TwoStageConfig,
) -> Result<(ScalarField, RunReport, RunReport)> {
    let grid = *u0.grid();
    let fid = FidelityField::from_damage(grid, damaged, config.stage1.alpha)?;
    let (u1, w1, r1) = run_stage_inner(u0, image, &fid, &config.stage1, config.potential, None)?;
    // the chemical potential scales with 1/eps, so only reuse it when eps is unchanged
    let w_start = (config.stage1.eps == config.stage2.eps).then_some(&w1);
    let (u2, _, r2) = run_stage_inner(&u1, image, &fid, &config.stage2, config.potential, w_start)?;
    Ok((u2, r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_stops_after_one_step() {
        let g = GridSpec::new(8, 6).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let mut damaged = vec![false; g.len()];
        damaged[10] = true;
        let fid = FidelityField::from_damage(g, &damaged, 1e4).unwrap();
        let stage = StageParams::new(0.04, 8e3, 1e-5).unwrap();
        let (u, r) = run_stage(&one, &one, &fid, &stage, PotentialSpec::Obstacle).unwrap();
        assert_eq!(r.steps_taken, 1);
        assert!(r.stop_value_final <= stage.stop_tol);
        assert!(!r.hit_max_steps);
        assert!(u.max_diff(&one).unwrap() < 1e-14);
        assert_eq!(r.energy_trace.len(), 1);
    }

    #[test]
    fn step_budget_is_honoured() {
        let g = GridSpec::new(10, 10).unwrap();
        let u0 = ScalarField::from_fn(g, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0 - 0.4);
        let zero = ScalarField::zeros(g);
        let stage = StageParams::new(0.1, 1.0, 1e-4)
            .unwrap()
            .with_stop_tol(1e-30)
            .unwrap()
            .with_max_steps(3)
            .unwrap();
        let (_, r) = run_stage(
            &u0,
            &zero,
            &FidelityField::none(g),
            &stage,
            PotentialSpec::Obstacle,
        )
        .unwrap();
        assert_eq!(r.steps_taken, 3);
        assert!(r.hit_max_steps);
        assert_eq!(r.mass_trace.len(), 3);
        for m in &r.mass_trace {
            assert!((m - u0.mass()).abs() < 1e-10 * g.area());
        }
    }

    #[test]
    fn stage_params_validation() {
        assert!(StageParams::new(0.0, 1.0, 1.0).is_err());
        assert!(StageParams::new(1.0, -1.0, 1.0).is_err());
        assert!(StageParams::new(1.0, 1.0, 1.0)
            .unwrap()
            .with_max_steps(0)
            .is_err());
        assert!(TwoStageConfig::new(0.04, 1.0 / 300.0, 8e3, 1e5, 1e-5)
            .unwrap()
            .with_potential(PotentialSpec::MoreauYosida { delta: 0.0 })
            .is_err());
    }

    #[test]
    fn initial_guess_zeroes_damage() {
        let g = GridSpec::new(2, 2).unwrap();
        let img = ScalarField::new(g, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let u0 = initial_guess(&img, &[false, true, false, false]).unwrap();
        assert_eq!(u0.values(), &[1.0, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn trace_lines_are_tab_separated() {
        let r = RunReport {
            steps_taken: 2,
            stop_trace: vec![1.0, 0.5],
            energy_trace: vec![3.0, 2.0],
            mass_trace: vec![0.1, 0.1],
            ..RunReport::default()
        };
        let mut buf = Vec::new();
        r.write_trace(&mut buf, 0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split('\t').count(), 4);
        assert!(lines[1].starts_with("2\t"));
    }
}
