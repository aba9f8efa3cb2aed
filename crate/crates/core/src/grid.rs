//! Uniform-grid discretization of the image domain.
//!
//! Nodes sit on pixel centres and are numbered row-major (`j * nx + i`).
//! The longer image side is mapped to the unit interval, so the spacing is
//! `h = 1 / (max(nx, ny) - 1)`. All spatial operators use homogeneous Neumann
//! boundary conditions:
//!
//! * the lumped inner product weights node `(i, j)` by `h^2` in the interior,
//!   `h^2 / 2` on edges and `h^2 / 4` at corners;
//! * the stiffness form `(K f)_j = (grad f, grad phi_j)` is the 5-point
//!   stencil with half-weight couplings along the boundary, which coincides
//!   with piecewise-linear elements on a right-triangulated uniform mesh.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::image::Grayscale8Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    h: f64,
}

impl GridSpec {
    /// Builds the grid for an `nx` by `ny` node image.
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2x2 nodes, got {nx}x{ny}"
            )));
        }
        let h = 1.0 / (nx.max(ny) - 1) as f64;
        Ok(Self { nx, ny, h })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    /// Physical position of a node.
    pub fn position(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.coords(node);
        (i as f64 * self.h, j as f64 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.h * self.h * ((self.nx - 1) * (self.ny - 1)) as f64
    }

    /// Lumped mass weight of a single node.
    #[inline]
    pub fn weight(&self, node: usize) -> f64 {
        let (i, j) = self.coords(node);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        self.h * self.h * wx * wy
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.weight(n)).collect()
    }

    /// Diagonal entry `K_jj` of the stiffness matrix.
    #[inline]
    pub fn stiffness_diag(&self, node: usize) -> f64 {
        let mut d = 0.0;
        self.for_each_neighbor(node, |_, c| d += c);
        d
    }

    /// Calls `f(neighbor, coupling)` for every stencil neighbour of `node`.
    /// The off-diagonal stiffness entry is `-coupling`.
    #[inline]
    pub fn for_each_neighbor(&self, node: usize, mut f: impl FnMut(usize, f64)) {
        let (i, j) = self.coords(node);
        let (nx, ny) = (self.nx, self.ny);
        // horizontal edges lie on the boundary when the row is the first/last
        let ch = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        let cv = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
        if i > 0 {
            f(node - 1, ch);
        }
        if i + 1 < nx {
            f(node + 1, ch);
        }
        if j > 0 {
            f(node - nx, cv);
        }
        if j + 1 < ny {
            f(node + nx, cv);
        }
    }

    /// Neighbour sum `sum_k coupling_jk * f_k`, i.e. `K_jj f_j - (K f)_j`.
    #[inline]
    pub(crate) fn neighbor_sum(&self, node: usize, values: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each_neighbor(node, |k, c| s += c * values[k]);
        s
    }

    pub(crate) fn ensure_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::shape(
                format!("{} nodes ({}x{})", self.len(), self.nx, self.ny),
                format!("{len} values"),
            ));
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::shape(
                format!("{}x{} grid", self.nx, self.ny),
                format!("{}x{} grid", other.nx, other.ny),
            ));
        }
        Ok(())
    }
}

/// Nodal values of a field (image intensity `u` or chemical potential `w`).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.ensure_len(values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at node {pos}",
                values[pos]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Builds a field from a function of the node's grid coordinates.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|n| {
                let (i, j) = grid.coords(n);
                f(i, j)
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum-norm distance to another field on the same grid.
    pub fn max_diff(&self, other: &ScalarField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Lumped integral `sum_j m_j f_j`.
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| self.grid.weight(n) * v)
            .sum()
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;

    fn index(&self, node: usize) -> &f64 {
        &self.values[node]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, node: usize) -> &mut f64 {
        &mut self.values[node]
    }
}

/// Per-node fidelity weight: `alpha` on intact nodes, `0` inside the damaged
/// region.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityField {
    grid: GridSpec,
    lambda: Vec<f64>,
    alpha: f64,
}

impl FidelityField {
    /// Fidelity from a damage flag per node. Requires a nonempty damaged set
    /// that does not cover the whole image.
    pub fn from_damage(grid: GridSpec, damaged: &[bool], alpha: f64) -> Result<Self> {
        grid.ensure_len(damaged.len())?;
        check_alpha(alpha)?;
        let n_damaged = damaged.iter().filter(|d| **d).count();
        if n_damaged == 0 {
            return Err(Error::InvalidMask("damaged region is empty".into()));
        }
        if n_damaged == damaged.len() {
            return Err(Error::InvalidMask(
                "damaged region covers the whole image".into(),
            ));
        }
        let lambda = damaged
            .iter()
            .map(|&d| if d { 0.0 } else { alpha })
            .collect();
        Ok(Self {
            grid,
            lambda,
            alpha,
        })
    }

    /// `lambda = 0` everywhere: the pure Cahn-Hilliard flow.
    pub fn none(grid: GridSpec) -> Self {
        Self {
            grid,
            lambda: vec![0.0; grid.len()],
            alpha: 1.0,
        }
    }

    /// `lambda = alpha` everywhere (no damaged nodes).
    pub fn everywhere(grid: GridSpec, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            grid,
            lambda: vec![alpha; grid.len()],
            alpha,
        })
    }

    /// Same damaged region, new fidelity weight.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let lambda = self
            .lambda
            .iter()
            .map(|&l| if l > 0.0 { alpha } else { 0.0 })
            .collect();
        Ok(Self {
            grid: self.grid,
            lambda,
            alpha,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn is_damaged(&self, node: usize) -> bool {
        self.lambda[node] == 0.0
    }

    pub fn damaged_count(&self) -> usize {
        self.lambda.iter().filter(|l| **l == 0.0).count()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(
            "alpha",
            format!("must be positive, got {alpha}"),
        ));
    }
    Ok(())
}

/// Applies the Neumann stiffness form: `(K f)_j = (grad f, grad phi_j)`.
pub fn stiffness_apply(grid: &GridSpec, f: &ScalarField) -> Result<ScalarField> {
    grid.ensure_same(f.grid())?;
    let mut out = vec![0.0; grid.len()];
    stiffness_apply_into(grid, f.values(), &mut out);
    Ok(ScalarField::from_vec_unchecked(*grid, out))
}

pub(crate) fn stiffness_apply_into(grid: &GridSpec, f: &[f64], out: &mut [f64]) {
    for (node, o) in out.iter_mut().enumerate() {
        let fj = f[node];
        let mut acc = 0.0;
        grid.for_each_neighbor(node, |k, c| acc += c * (fj - f[k]));
        *o = acc;
    }
}

/// Lumped inner product `(a, b)_h = sum_j m_j a_j b_j`.
pub fn lumped_inner(grid: &GridSpec, a: &ScalarField, b: &ScalarField) -> Result<f64> {
    grid.ensure_same(a.grid())?;
    grid.ensure_same(b.grid())?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(n, (x, y))| grid.weight(n) * x * y)
        .sum())
}

/// Maps pixel `p` to `2 p / 255 - 1`, so black is `-1` and white is `+1`.
pub fn field_from_image(img: &Grayscale8Image, grid: &GridSpec) -> Result<ScalarField> {
    if img.width() != grid.nx() || img.height() != grid.ny() {
        return Err(Error::shape(
            format!("{}x{} image", grid.nx(), grid.ny()),
            format!("{}x{} image", img.width(), img.height()),
        ));
    }
    let values = img.pixels().iter().map(|&p| pixel_to_value(p)).collect();
    Ok(ScalarField::from_vec_unchecked(*grid, values))
}

/// Inverse of [`field_from_image`] with clamping to `[-1, 1]`.
pub fn image_from_field(f: &ScalarField) -> Grayscale8Image {
    let g = f.grid();
    let pixels = f.values().iter().map(|&v| value_to_pixel(v)).collect();
    Grayscale8Image::new(g.nx(), g.ny(), pixels).expect("grid has at least 2x2 nodes")
}

#[inline]
pub fn pixel_to_value(p: u8) -> f64 {
    2.0 * (p as f64 / 255.0) - 1.0
}

#[inline]
pub fn value_to_pixel(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    (255.0 * (v + 1.0) / 2.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(grid: GridSpec, v: &[f64]) -> ScalarField {
        ScalarField::new(grid, v.to_vec()).unwrap()
    }

    #[test]
    fn two_by_two_grid_is_unit_square() {
        let g = GridSpec::new(2, 2).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.weights(), vec![0.25; 4]);
        assert_eq!(g.area(), 1.0);
    }

    #[test]
    fn finest_mesh_spacing() {
        let g = GridSpec::new(257, 257).unwrap();
        assert!((g.h() - 3.9e-3).abs() < 1e-4);
        assert_eq!(g.h(), 1.0 / 256.0);
    }

    #[test]
    fn three_by_two_weights_sum_to_half() {
        let g = GridSpec::new(3, 2).unwrap();
        assert_eq!(g.h(), 0.5);
        // corners h^2/4 = 1/16 (x4), edge midpoints h^2/2 = 1/8 (x2)
        let w = g.weights();
        assert_eq!(
            w,
            vec![
                1.0 / 16.0,
                1.0 / 8.0,
                1.0 / 16.0,
                1.0 / 16.0,
                1.0 / 8.0,
                1.0 / 16.0
            ]
        );
        assert_eq!(w.iter().sum::<f64>(), 0.5);
        assert_eq!(g.area(), 0.5);
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(matches!(GridSpec::new(1, 5), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::new(4, 0), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn stiffness_kills_constants() {
        let g = GridSpec::new(7, 5).unwrap();
        let k = stiffness_apply(&g, &ScalarField::constant(g, 3.7)).unwrap();
        assert!(k.values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn stiffness_of_centre_hat_on_3x3() {
        let g = GridSpec::new(3, 3).unwrap();
        let mut f = ScalarField::zeros(g);
        f[4] = 1.0;
        let k = stiffness_apply(&g, &f).unwrap();
        assert_eq!(
            k.values(),
            &[0.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0]
        );
    }

    #[test]
    fn stiffness_of_linear_ramp_vanishes_inside() {
        let g = GridSpec::new(4, 4).unwrap();
        let f = ScalarField::from_fn(g, |i, _| i as f64 * g.h());
        let k = stiffness_apply(&g, &f).unwrap();
        for n in 0..g.len() {
            let (i, _) = g.coords(n);
            if i != 0 && i != 3 {
                assert!(k[n].abs() < 1e-15, "node {n}: {}", k[n]);
            }
        }
        // flux leaves through the left/right boundaries only
        let (top_left, mid_left) = (k[g.index(0, 0)], k[g.index(0, 1)]);
        assert!((top_left + 0.5 * g.h()).abs() < 1e-15);
        assert!((mid_left + g.h()).abs() < 1e-15);
    }

    #[test]
    fn stiffness_rejects_foreign_field() {
        let g = GridSpec::new(3, 3).unwrap();
        let other = GridSpec::new(4, 3).unwrap();
        assert!(matches!(
            stiffness_apply(&g, &ScalarField::zeros(other)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn lumped_inner_cases() {
        let g = GridSpec::new(2, 2).unwrap();
        let a = field(g, &[1.0, 2.0, 3.0, 4.0]);
        let one = ScalarField::constant(g, 1.0);
        assert_eq!(lumped_inner(&g, &a, &one).unwrap(), 2.5);
        assert_eq!(lumped_inner(&g, &one, &one).unwrap(), 1.0);
        let g5 = GridSpec::new(5, 3).unwrap();
        let b = ScalarField::from_fn(g5, |i, j| (i * 3 + j) as f64 * 0.1);
        let one5 = ScalarField::constant(g5, 1.0);
        assert!((lumped_inner(&g5, &one5, &b).unwrap() - b.mass()).abs() < 1e-15);
    }

    #[test]
    fn pixel_mapping_endpoints() {
        assert_eq!(pixel_to_value(255), 1.0);
        assert_eq!(pixel_to_value(0), -1.0);
        assert!((pixel_to_value(128) - 1.0 / 255.0).abs() < 1e-15);
        assert_eq!(value_to_pixel(1.0), 255);
        assert_eq!(value_to_pixel(1.7), 255);
        assert_eq!(value_to_pixel(-4.0), 0);
    }

    #[test]
    fn all_gray_levels_round_trip() {
        let g = GridSpec::new(16, 16).unwrap();
        let img = Grayscale8Image::new(16, 16, (0..=255).collect()).unwrap();
        let back = image_from_field(&field_from_image(&img, &g).unwrap());
        assert_eq!(back, img);
    }

    #[test]
    fn image_dims_must_match_grid() {
        let g = GridSpec::new(3, 4).unwrap();
        let img = Grayscale8Image::filled(4, 3, 0).unwrap();
        assert!(field_from_image(&img, &g).is_err());
    }

    #[test]
    fn fidelity_requires_proper_damage() {
        let g = GridSpec::new(2, 2).unwrap();
        assert!(matches!(
            FidelityField::from_damage(g, &[false; 4], 1.0),
            Err(Error::InvalidMask(_))
        ));
        assert!(matches!(
            FidelityField::from_damage(g, &[true; 4], 1.0),
            Err(Error::InvalidMask(_))
        ));
        let f = FidelityField::from_damage(g, &[true, false, false, false], 5.0).unwrap();
        assert_eq!(f.lambda(), &[0.0, 5.0, 5.0, 5.0]);
        let f2 = f.with_alpha(9.0).unwrap();
        assert_eq!(f2.lambda(), &[0.0, 9.0, 9.0, 9.0]);
        assert!(f.with_alpha(-1.0).is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = GridSpec::new(2, 2).unwrap();
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
    }
}
