//! Dense assembly of the per-step system from first principles.
//!
//! The stiffness matrix is assembled element by element from piecewise
//! linear hat functions on the right-triangulated grid, and the lumped mass
//! from the tensor-product trapezoidal rule. Neither path goes through the
//! stencil code in `ch_inpaint::grid`.

use ch_inpaint::step::StepProblem;
use ch_inpaint::GridSpec;
use nalgebra::{DMatrix, DVector};

/// Dense form of one obstacle time step.
#[derive(Clone, Debug)]
pub struct DenseStepSystem {
    /// Diagonal of the lumped mass matrix.
    pub mass: DVector<f64>,
    pub stiffness: DMatrix<f64>,
    /// `M u_prev + tau M lambda (I - u_prev)`, the mass equation times `tau`.
    pub rhs_mass: DVector<f64>,
    /// `M u_prev / eps`.
    pub rhs_free: DVector<f64>,
    pub lower: f64,
    pub upper: f64,
    pub eps: f64,
    pub tau: f64,
}

/// Element-by-element P1 stiffness on the triangulation that splits every
/// grid cell along its rising diagonal.
pub fn assemble_stiffness(grid: &GridSpec) -> DMatrix<f64> {
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let n = nx * ny;
    let mut k = DMatrix::zeros(n, n);
    let node = |i: usize, j: usize| j * nx + i;
    let pos = |i: usize, j: usize| (i as f64 * h, j as f64 * h);
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let tris = [
                [(i, j), (i + 1, j), (i + 1, j + 1)],
                [(i, j), (i + 1, j + 1), (i, j + 1)],
            ];
            for tri in tris {
                let p: Vec<(f64, f64)> = tri.iter().map(|&(a, b)| pos(a, b)).collect();
                let area2 =
                    (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
                let area = 0.5 * area2.abs();
                // gradient of the hat at vertex a: rotate the opposite edge
                let grads: Vec<(f64, f64)> = (0..3)
                    .map(|a| {
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        ((p[b].1 - p[c].1) / area2, (p[c].0 - p[b].0) / area2)
                    })
                    .collect();
                for a in 0..3 {
                    for b in 0..3 {
                        let ga = grads[a];
                        let gb = grads[b];
                        let ia = node(tri[a].0, tri[a].1);
                        let ib = node(tri[b].0, tri[b].1);
                        k[(ia, ib)] += area * (ga.0 * gb.0 + ga.1 * gb.1);
                    }
                }
            }
        }
    }
    k
}

/// Lumped mass from the tensor-product trapezoidal rule.
pub fn assemble_mass(grid: &GridSpec) -> DVector<f64> {
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let trap = |i: usize, n: usize| if i == 0 || i == n - 1 { h / 2.0 } else { h };
    DVector::from_iterator(
        nx * ny,
        (0..ny).flat_map(|j| (0..nx).map(move |i| trap(i, nx) * trap(j, ny))),
    )
}

impl DenseStepSystem {
    pub fn from_problem(p: &StepProblem<'_>) -> Self {
        let grid = p.grid();
        let n = grid.len();
        let mass = assemble_mass(grid);
        let stiffness = assemble_stiffness(grid);
        let up = p.u_prev().values();
        let img = p.image().values();
        let lambda = p.fidelity().lambda();
        let (eps, tau) = (p.eps(), p.tau());
        let rhs_mass = DVector::from_iterator(
            n,
            (0..n).map(|j| mass[j] * (up[j] + tau * lambda[j] * (img[j].clamp(-1.0, 1.0) - up[j]))),
        );
        let rhs_free = DVector::from_iterator(n, (0..n).map(|j| mass[j] * up[j] / eps));
        Self {
            mass,
            stiffness,
            rhs_mass,
            rhs_free,
            lower: -1.0,
            upper: 1.0,
            eps,
            tau,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Complementarity function `g = eps K u - M w - rhs_free`.
    pub fn complementarity(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.stiffness * u * self.eps - self.mass.component_mul(w) - &self.rhs_free
    }

    /// Residual of the mass equation `M u + tau K w - rhs_mass`.
    pub fn mass_residual(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.mass.component_mul(u) + &self.stiffness * w * self.tau - &self.rhs_mass
    }
}
