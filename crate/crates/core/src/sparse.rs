//! Sparse direct solves of the obstacle step for a fixed active set.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::grid::GridSpec;

/// Contact state of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Contact {
    Lower,
    Free,
    Upper,
}

impl Contact {
    pub(crate) fn bound(self) -> f64 {
        match self {
            Contact::Lower => -1.0,
            Contact::Free => 0.0,
            Contact::Upper => 1.0,
        }
    }
}

/// What a stored entry of the upper triangle holds.
#[derive(Clone, Copy)]
enum Slot {
    /// `(u_j, u_j)`
    UDiag(usize),
    /// `(u_k, u_j)` with coupling `c`
    UOff(usize, usize, f64),
    /// `(u_j, w_j)`
    Cross(usize),
    /// `(w_j, w_j)`
    WDiag(usize),
    /// `(w_k, w_j)` with coupling `c`
    WOff(f64),
}

/// The obstacle step with the contact set frozen, in unknowns `[u; w]`:
///
/// ```text
/// (m_j / tau) u_j + (K w)_j               = rhs_mass_j / tau
/// eps (K u)_j - m_j w_j                   = rhs_free_j        (free j)
/// u_j                                     = +-1               (contact j)
/// ```
///
/// Scaling the mass rows by `-tau` and moving the known contact values to the
/// right-hand side gives the symmetric matrix
///
/// ```text
/// [ eps K_FF + I_C    -M_F   ]
/// [ -M_F^T            -tau K ]
/// ```
///
/// It is quasi-definite once any node is in contact, so `LDL^T` exists for
/// every symmetric ordering. Its pattern does not depend on the contact set,
/// which lets one ordering and symbolic analysis serve all set updates.
/// With no contact at all the matrix is still regular but indefinite in a
/// less convenient way, and a general sparse LU is used instead.
pub(crate) struct FrozenContactSystem<'g> {
    grid: &'g GridSpec,
    eps: f64,
    tau: f64,
    mass: &'g [f64],
    pattern: SymbolicSparseColMat<usize>,
    slots: Vec<Slot>,
    symbolic: Option<SymbolicCholesky<usize>>,
}

impl<'g> FrozenContactSystem<'g> {
    pub(crate) fn new(grid: &'g GridSpec, mass: &'g [f64], eps: f64, tau: f64) -> Self {
        let n = grid.len();
        let mut col_ptr = Vec::with_capacity(2 * n + 1);
        let mut row_idx = Vec::with_capacity(8 * n);
        let mut slots = Vec::with_capacity(8 * n);
        let mut lower = Vec::with_capacity(4);
        let lower_neighbors = |j: usize, lower: &mut Vec<(usize, f64)>| {
            lower.clear();
            grid.for_each_neighbor(j, |k, c| {
                if k < j {
                    lower.push((k, c));
                }
            });
            lower.sort_by_key(|&(k, _)| k);
        };
        col_ptr.push(0);
        for j in 0..n {
            lower_neighbors(j, &mut lower);
            for &(k, c) in &lower {
                row_idx.push(k);
                slots.push(Slot::UOff(k, j, c));
            }
            row_idx.push(j);
            slots.push(Slot::UDiag(j));
            col_ptr.push(row_idx.len());
        }
        for j in 0..n {
            row_idx.push(j);
            slots.push(Slot::Cross(j));
            lower_neighbors(j, &mut lower);
            for &(k, c) in &lower {
                row_idx.push(n + k);
                slots.push(Slot::WOff(c));
            }
            row_idx.push(n + j);
            slots.push(Slot::WDiag(j));
            col_ptr.push(row_idx.len());
        }
        let pattern = SymbolicSparseColMat::new_checked(2 * n, 2 * n, col_ptr, None, row_idx);
        let symbolic = factorize_symbolic_cholesky(
            pattern.as_ref(),
            Side::Upper,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .ok();
        Self {
            grid,
            eps,
            tau,
            mass,
            pattern,
            slots,
            symbolic,
        }
    }

    /// Returns `None` when every node is in contact, where `w` is at best
    /// fixed up to a constant, or when no factorization succeeds.
    pub(crate) fn solve(
        &self,
        states: &[Contact],
        rhs_mass: &[f64],
        rhs_free: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        if !states.contains(&Contact::Free) {
            return None;
        }
        let x = if states.contains(&Contact::Upper) || states.contains(&Contact::Lower) {
            self.solve_ldlt(states, rhs_mass, rhs_free)
                .or_else(|| self.solve_lu(states, rhs_mass, rhs_free))?
        } else {
            self.solve_lu(states, rhs_mass, rhs_free)?
        };
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let n = self.grid.len();
        let mut u = x;
        let w = u.split_off(n);
        Some((u, w))
    }

    fn solve_ldlt(
        &self,
        states: &[Contact],
        rhs_mass: &[f64],
        rhs_free: &[f64],
    ) -> Option<Vec<f64>> {
        let symbolic = self.symbolic.as_ref()?;
        let grid = self.grid;
        let n = grid.len();
        let (eps, tau) = (self.eps, self.tau);
        let free = |j: usize| states[j] == Contact::Free;
        let values: Vec<f64> = self
            .slots
            .iter()
            .map(|&slot| match slot {
                Slot::UDiag(j) if free(j) => eps * grid.stiffness_diag(j),
                Slot::UDiag(_) => 1.0,
                Slot::UOff(k, j, c) if free(k) && free(j) => -eps * c,
                Slot::UOff(..) => 0.0,
                Slot::Cross(j) if free(j) => -self.mass[j],
                Slot::Cross(_) => 0.0,
                Slot::WDiag(j) => -tau * grid.stiffness_diag(j),
                Slot::WOff(c) => tau * c,
            })
            .collect();
        let mut b = vec![0.0; 2 * n];
        for j in 0..n {
            match states[j] {
                Contact::Free => {
                    let mut r = rhs_free[j];
                    grid.for_each_neighbor(j, |k, c| r += eps * c * states[k].bound());
                    b[j] = r;
                    b[n + j] = -rhs_mass[j];
                }
                s => {
                    b[j] = s.bound();
                    b[n + j] = -rhs_mass[j] + self.mass[j] * s.bound();
                }
            }
        }

        let a = SparseColMatRef::new(self.pattern.as_ref(), &values);
        let par = Par::Seq;
        let mut l_values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::new(
            symbolic
                .factorize_numeric_ldlt_scratch::<f64>(par, Default::default())
                .or(symbolic.solve_in_place_scratch::<f64>(1, par)),
        );
        let ldlt = symbolic
            .factorize_numeric_ldlt(
                &mut l_values,
                a,
                Side::Upper,
                Default::default(),
                par,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .ok()?;

        let mut x = Mat::<f64>::from_fn(2 * n, 1, |r, _| b[r]);
        ldlt.solve_in_place_with_conj(Conj::No, x.as_mut(), par, MemStack::new(&mut mem));
        // one step of iterative refinement against the stored upper triangle
        let mut resid = Mat::<f64>::from_fn(2 * n, 1, |r, _| b[r]);
        let (col_ptr, row_idx) = (self.pattern.col_ptr(), self.pattern.row_idx());
        for col in 0..2 * n {
            for idx in col_ptr[col]..col_ptr[col + 1] {
                let (row, v) = (row_idx[idx], values[idx]);
                resid[(row, 0)] -= v * x[(col, 0)];
                if row != col {
                    resid[(col, 0)] -= v * x[(row, 0)];
                }
            }
        }
        ldlt.solve_in_place_with_conj(Conj::No, resid.as_mut(), par, MemStack::new(&mut mem));
        Some((0..2 * n).map(|r| x[(r, 0)] + resid[(r, 0)]).collect())
    }

    fn solve_lu(&self, states: &[Contact], rhs_mass: &[f64], rhs_free: &[f64]) -> Option<Vec<f64>> {
        let grid = self.grid;
        let n = grid.len();
        let (eps, tau) = (self.eps, self.tau);
        let mut entries: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(12 * n);
        for (j, &state) in states.iter().enumerate() {
            entries.push(Triplet::new(j, j, self.mass[j] / tau));
            entries.push(Triplet::new(j, n + j, grid.stiffness_diag(j)));
            grid.for_each_neighbor(j, |k, c| entries.push(Triplet::new(j, n + k, -c)));
            match state {
                Contact::Free => {
                    entries.push(Triplet::new(n + j, j, eps * grid.stiffness_diag(j)));
                    grid.for_each_neighbor(j, |k, c| {
                        entries.push(Triplet::new(n + j, k, -eps * c))
                    });
                    entries.push(Triplet::new(n + j, n + j, -self.mass[j]));
                }
                _ => entries.push(Triplet::new(n + j, j, 1.0)),
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(2 * n, 2 * n, &entries).ok()?;
        let lu = a.sp_lu().ok()?;

        let b = Mat::<f64>::from_fn(2 * n, 1, |r, _| {
            if r < n {
                rhs_mass[r] / tau
            } else {
                match states[r - n] {
                    Contact::Free => rhs_free[r - n],
                    s => s.bound(),
                }
            }
        });
        let x = lu.solve(&b);
        let mut resid = b.clone();
        for t in &entries {
            resid[(t.row, 0)] -= t.val * x[(t.col, 0)];
        }
        lu.solve_in_place(&mut resid);
        Some((0..2 * n).map(|r| x[(r, 0)] + resid[(r, 0)]).collect())
    }
}
