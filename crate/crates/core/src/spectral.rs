//! Sine eigenbasis of the negative Dirichlet Laplacian on (0, 1).
//!
//! Modes are `e_j(x) = √2 sin(jπx)` with eigenvalues `λ_j = (jπ)²`. States
//! live in modal form (the first `N` coefficients); the nonlinearity is
//! evaluated on `K` interior collocation nodes `x_i = i / (K + 1)`, where the
//! discrete sine transform is exactly orthonormal:
//!
//! ```text
//! (1/(K+1)) Σ_{i=1}^{K} e_j(x_i) e_k(x_i) = δ_jk,   1 ≤ j, k ≤ K.
//! ```
//!
//! Transforms are dense table products, `O(N·K)` each.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Eigenpairs and transform tables for the first `dim` Dirichlet modes.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    dim: usize,
    grid_size: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    /// `dim × grid_size`, entry `(j-1, i-1) = e_j(x_i)`.
    modes_by_node: Array2<f64>,
    /// `grid_size × dim`, transpose of `modes_by_node`.
    nodes_by_mode: Array2<f64>,
}

impl SpectralBasis {
    /// Builds the basis with `dim` retained modes and `grid_size` interior nodes.
    pub fn new(dim: usize, grid_size: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("basis dimension must be at least 1"));
        }
        if grid_size < dim {
            return Err(invalid(format!(
                "grid size K={grid_size} is smaller than N={dim}; retained modes would alias"
            )));
        }
        let eigenvalues = (1..=dim).map(|j| eigenvalue(j)).collect();
        let nodes = (1..=grid_size)
            .map(|i| i as f64 / (grid_size + 1) as f64)
            .collect();

        // sin(jπ i/(K+1)) with the angle reduced exactly in integers.
        let period = 2 * (grid_size as u64 + 1);
        let modes_by_node = Array2::from_shape_fn((dim, grid_size), |(j, i)| {
            let m = ((j as u64 + 1) * (i as u64 + 1)) % period;
            std::f64::consts::SQRT_2 * (PI * m as f64 / (grid_size + 1) as f64).sin()
        });
        let nodes_by_mode = modes_by_node.t().as_standard_layout().into_owned();

        Ok(Self {
            dim,
            grid_size,
            eigenvalues,
            nodes,
            modes_by_node,
            nodes_by_mode,
        })
    }

    /// Basis with the default grid `K = 4N`.
    pub fn with_default_grid(dim: usize) -> Result<Self> {
        Self::new(dim, 4 * dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_N`, the largest retained eigenvalue.
    pub fn top_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Value of mode `j` (1-based) at node `i` (1-based).
    pub fn mode_at_node(&self, j: usize, i: usize) -> f64 {
        self.modes_by_node[(j - 1, i - 1)]
    }

    pub fn modes_by_node(&self) -> &Array2<f64> {
        &self.modes_by_node
    }

    pub fn nodes_by_mode(&self) -> &Array2<f64> {
        &self.nodes_by_mode
    }

    /// Quadrature weight `1/(K+1)` of the interior-node rule.
    pub fn quadrature_weight(&self) -> f64 {
        1.0 / (self.grid_size + 1) as f64
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn orthogonality_residual(&self) -> f64 {
        let gram = self.modes_by_node.dot(&self.nodes_by_mode) * self.quadrature_weight();
        gram.indexed_iter()
            .map(|((j, k), &g)| (g - if j == k { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Writes nodal values of the modal expansion `coeffs` into `grid`.
    pub fn synthesize_into(&self, coeffs: &[f64], grid: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.dim);
        debug_assert_eq!(grid.len(), self.grid_size);
        grid.fill(0.0);
        for (row, &c) in self.modes_by_node.outer_iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            let row = row.as_slice().expect("standard layout");
            for (g, &e) in grid.iter_mut().zip(row) {
                *g += c * e;
            }
        }
    }

    /// Writes the first `N` quadrature coefficients of `grid` into `coeffs`.
    pub fn analyze_into(&self, grid: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.dim);
        debug_assert_eq!(grid.len(), self.grid_size);
        coeffs.fill(0.0);
        for (row, &g) in self.nodes_by_mode.outer_iter().zip(grid) {
            if g == 0.0 {
                continue;
            }
            let row = row.as_slice().expect("standard layout");
            for (c, &e) in coeffs.iter_mut().zip(row) {
                *c += g * e;
            }
        }
        let w = self.quadrature_weight();
        coeffs.iter_mut().for_each(|c| *c *= w);
    }

    /// `exp(-λ_j t)` for each retained mode.
    pub fn decay_factors(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(invalid(format!("semigroup time must be nonnegative, got {t}")));
        }
        Ok(self.eigenvalues.iter().map(|&l| (-l * t).exp()).collect())
    }

    fn check_modal(&self, state: &ModalState) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: state.len(),
            });
        }
        Ok(())
    }

    fn check_grid(&self, grid: &GridState) -> Result<()> {
        if grid.len() != self.grid_size {
            return Err(Error::DimensionMismatch {
                expected: self.grid_size,
                found: grid.len(),
            });
        }
        Ok(())
    }
}

/// `λ_j = (jπ)²` for a 1-based mode index.
pub fn eigenvalue(j: usize) -> f64 {
    let k = j as f64 * PI;
    k * k
}

/// Galerkin state: coefficients of `e_1..e_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState(Vec<f64>);

impl ModalState {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self(coefficients)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// State with a single nonzero coefficient on mode `j` (1-based).
    pub fn unit(dim: usize, j: usize, value: f64) -> Self {
        let mut c = vec![0.0; dim];
        c[j - 1] = value;
        Self(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// `L²(0,1)` norm; by Parseval the Euclidean norm of the coefficients.
    pub fn h_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `‖A^{ϑ/2} x‖ = (Σ λ_j^ϑ c_j²)^{1/2}`; any real `ϑ`.
    pub fn sobolev_norm(&self, theta: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(j, c)| eigenvalue(j + 1).powf(theta) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, other: &ModalState) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Nodal values `u(x_i)` at the `K` interior collocation nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState(Vec<f64>);

impl GridState {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Grid approximation of the sup norm.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.0)
    }

    /// Interior-node quadrature of the `L^r` norm, `r ≥ 1`.
    pub fn lr_norm(&self, r: f64) -> Result<f64> {
        lr_norm(&self.0, r)
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn lr_norm(values: &[f64], r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(invalid(format!("L^r norm requires r >= 1, got {r}")));
    }
    let w = 1.0 / (values.len() + 1) as f64;
    let sum: f64 = values.iter().map(|v| v.abs().powf(r)).sum();
    Ok((w * sum).powf(1.0 / r))
}

/// Nodal values of the modal expansion.
pub fn to_grid(state: &ModalState, basis: &SpectralBasis) -> Result<GridState> {
    basis.check_modal(state)?;
    let mut grid = vec![0.0; basis.grid_size];
    basis.synthesize_into(state.coefficients(), &mut grid);
    Ok(GridState(grid))
}

/// Discrete projection onto the retained modes.
pub fn to_modal(grid: &GridState, basis: &SpectralBasis) -> Result<ModalState> {
    basis.check_grid(grid)?;
    let mut coeffs = vec![0.0; basis.dim];
    basis.analyze_into(grid.values(), &mut coeffs);
    Ok(ModalState(coeffs))
}

/// `E_N(t) x`: multiplies coefficient `j` by `exp(-λ_j t)`.
pub fn apply_semigroup(state: &ModalState, t: f64, basis: &SpectralBasis) -> Result<ModalState> {
    basis.check_modal(state)?;
    let decay = basis.decay_factors(t)?;
    Ok(ModalState(
        state.0.iter().zip(&decay).map(|(c, d)| d * c).collect(),
    ))
}

/// All norms of a state at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub h: f64,
    pub v: f64,
    pub lr: f64,
    pub sobolev: f64,
}

/// H, grid-sup V, quadrature `L^r` and `Ḣ^ϑ` norms of `state`.
pub fn norms(state: &ModalState, basis: &SpectralBasis, r: f64, theta: f64) -> Result<Norms> {
    let grid = to_grid(state, basis)?;
    Ok(Norms {
        h: state.h_norm(),
        v: grid.sup_norm(),
        lr: grid.lr_norm(r)?,
        sobolev: state.sobolev_norm(theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn first_eigenpair() {
        let b = SpectralBasis::new(1, 1).unwrap();
        assert!((b.eigenvalues()[0] - PI * PI).abs() < 1e-14);
        assert!((b.eigenvalues()[0] - 9.8696).abs() < 1e-4);
        // the single node is x = 1/2
        assert_eq!(b.nodes(), &[0.5]);
        assert!((b.mode_at_node(1, 1) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn second_eigenvalue() {
        let b = SpectralBasis::new(2, 3).unwrap();
        assert!((b.eigenvalues()[1] - 4.0 * PI * PI).abs() < 1e-12);
        assert!((b.eigenvalues()[1] - 39.478).abs() < 1e-3);
    }

    #[test]
    fn rejects_aliasing_grid() {
        assert!(matches!(
            SpectralBasis::new(8, 7),
            Err(Error::InvalidParameter(_))
        ));
        assert!(SpectralBasis::new(0, 4).is_err());
    }

    #[test]
    fn discrete_orthogonality() {
        let b = SpectralBasis::new(64, 256).unwrap();
        assert!(b.orthogonality_residual() < 1e-12);
        let b = SpectralBasis::new(5, 5).unwrap();
        assert!(b.orthogonality_residual() < 1e-12);
    }

    #[test]
    fn eigenvalues_increase() {
        let b = SpectralBasis::new(32, 128).unwrap();
        assert!(b.eigenvalues().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn to_grid_unit_mode_at_midpoint() {
        let b = SpectralBasis::new(4, 7).unwrap();
        let g = to_grid(&ModalState::unit(4, 1, 1.0), &b).unwrap();
        // x_4 = 4/8
        assert!((g.values()[3] - SQRT_2).abs() < 1e-15);
        let z = to_grid(&ModalState::zeros(4), &b).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn to_modal_picks_single_mode() {
        let b = SpectralBasis::new(6, 24).unwrap();
        let g = GridState::new(b.nodes().iter().map(|x| SQRT_2 * (2.0 * PI * x).sin()).collect());
        let c = to_modal(&g, &b).unwrap();
        for (j, v) in c.coefficients().iter().enumerate() {
            let expect = if j == 1 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-12, "mode {}: {v}", j + 1);
        }
        let z = to_modal(&GridState::new(vec![0.0; 24]), &b).unwrap();
        assert!(z.coefficients().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cube_of_first_mode_projects_onto_odd_modes() {
        // (√2 sin πx)³ = (3 e_1 − e_3) / 2
        let b = SpectralBasis::new(3, 9).unwrap();
        let g = GridState::new(
            b.nodes()
                .iter()
                .map(|x| (SQRT_2 * (PI * x).sin()).powi(3))
                .collect(),
        );
        let c = to_modal(&g, &b).unwrap();
        assert!((c.coefficients()[0] - 1.5).abs() < 1e-12);
        assert!(c.coefficients()[1].abs() < 1e-12);
        assert!((c.coefficients()[2] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let b = SpectralBasis::new(4, 16).unwrap();
        assert!(matches!(
            to_grid(&ModalState::zeros(3), &b),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
        assert!(to_modal(&GridState::new(vec![0.0; 15]), &b).is_err());
    }

    #[test]
    fn semigroup_values() {
        let b = SpectralBasis::new(8, 32).unwrap();
        let x = ModalState::new((1..=8).map(|j| j as f64).collect());
        assert_eq!(apply_semigroup(&x, 0.0, &b).unwrap(), x);
        let y = apply_semigroup(&ModalState::unit(8, 1, 1.0), 0.1, &b).unwrap();
        assert!((y.coefficients()[0] - 0.372_707_838_853_437_94).abs() < 1e-14);
        let far = apply_semigroup(&x, 1e3, &b).unwrap();
        assert!(far.h_norm() <= (-PI * PI * 1e3).exp() * x.h_norm());
        assert!(apply_semigroup(&x, -1.0, &b).is_err());
    }

    #[test]
    fn norm_examples() {
        let b = SpectralBasis::new(4, 16).unwrap();
        let x = ModalState::unit(4, 1, 2.0);
        assert!((x.h_norm() - 2.0).abs() < 1e-15);
        assert!((x.sobolev_norm(1.0) - 2.0 * PI).abs() < 1e-12);

        let b255 = SpectralBasis::new(1, 255).unwrap();
        let g = to_grid(&ModalState::unit(1, 1, 1.0), &b255).unwrap();
        assert!((g.sup_norm() - SQRT_2).abs() < 2e-4);

        let n = norms(&ModalState::zeros(4), &b, 6.0, -0.5).unwrap();
        assert_eq!(n, Norms { h: 0.0, v: 0.0, lr: 0.0, sobolev: 0.0 });
        assert!(GridState::new(vec![1.0; 3]).lr_norm(0.5).is_err());
    }

    #[test]
    fn lr_norm_of_constant_grid() {
        // (1/(K+1)) Σ 1 = K/(K+1)
        let g = GridState::new(vec![1.0; 9]);
        assert!((g.lr_norm(2.0).unwrap() - (0.9f64).sqrt()).abs() < 1e-15);
    }
}
