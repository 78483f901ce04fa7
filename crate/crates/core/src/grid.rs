//! Cell-centred grids on the unit interval / unit square, vector fields over
//! them, and the discrete differential operators and norms the dynamics are
//! measured in.
//!
//! Neumann boundary conditions are imposed with reflected ghost cells, which
//! makes the five-point (three-point in 1D) Laplacian symmetric with respect
//! to the midpoint-quadrature L² inner product. Its eigenvectors are the
//! DCT-II cosine modes, used by [`SpectralDecomposition`] for the negative
//! order norms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub const MIN_CELLS_PER_AXIS: usize = 4;

/// Uniform cell-centred grid of the unit interval (d = 1) or unit square (d = 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    dimension: usize,
    cells_per_axis: usize,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    dimension: usize,
    cells_per_axis: usize,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.dimension, r.cells_per_axis)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        Self {
            dimension: g.dimension,
            cells_per_axis: g.cells_per_axis,
        }
    }
}

impl Grid {
    pub fn new(dimension: usize, cells_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if cells_per_axis < MIN_CELLS_PER_AXIS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS_PER_AXIS} cells per axis, got {cells_per_axis}"
            )));
        }
        Ok(Self {
            dimension,
            cells_per_axis,
        })
    }

    pub fn one_d(cells: usize) -> Result<Self> {
        Self::new(1, cells)
    }

    pub fn two_d(cells_per_axis: usize) -> Result<Self> {
        Self::new(2, cells_per_axis)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(self.dimension as u32)
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.cells_per_axis)
    }

    /// Quadrature weight of one cell, `spacing^d`.
    pub fn cell_volume<T: Real>(&self) -> T {
        self.spacing::<T>().powi(self.dimension as i32)
    }

    /// Per-axis indices of a flat cell index (x fastest).
    #[inline]
    pub fn axis_indices(&self, cell: usize) -> [usize; 2] {
        let n = self.cells_per_axis;
        if self.dimension == 1 {
            [cell, 0]
        } else {
            [cell % n, cell / n]
        }
    }

    #[inline]
    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        ix + self.cells_per_axis * iy
    }

    /// Cell-centre coordinates; the second entry is 0 in 1D.
    pub fn center<T: Real>(&self, cell: usize) -> [T; 2] {
        let h = self.spacing::<T>();
        let half = T::lit(0.5);
        let [ix, iy] = self.axis_indices(cell);
        let x = (T::from_usize_lossy(ix) + half) * h;
        let y = if self.dimension == 1 {
            T::zero()
        } else {
            (T::from_usize_lossy(iy) + half) * h
        };
        [x, y]
    }

    fn describe(&self) -> String {
        format!("{}D/{} cells per axis", self.dimension, self.cells_per_axis)
    }
}

/// A 3-vector per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<Vec3<T>>,
}

impl<T: Real> Field<T> {
    /// Validating constructor: length must match and every component be finite.
    pub fn new(grid: Grid, values: Vec<Vec3<T>>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::FieldLength {
                expected: grid.cell_count(),
                got: values.len(),
            });
        }
        let f = Self { grid, values };
        f.check_finite()?;
        Ok(f)
    }

    /// Constructor for values produced by the crate's own operators; finiteness
    /// is checked by callers where it can fail.
    pub(crate) fn from_parts(grid: Grid, values: Vec<Vec3<T>>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, Vec3::zero())
    }

    pub fn constant(grid: Grid, v: Vec3<T>) -> Self {
        Self::from_parts(grid, vec![v; grid.cell_count()])
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid, f: impl Fn([T; 2]) -> Vec3<T>) -> Self {
        let values = (0..grid.cell_count()).map(|c| f(grid.center(c))).collect();
        Self::from_parts(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[Vec3<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec3<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(cell) => Err(Error::NonFiniteField { cell }),
            None => Ok(()),
        }
    }

    pub fn ensure_same_grid(&self, other: &Field<T>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.describe(),
                right: other.grid.describe(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Field<T> {
        Self::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(
        &self,
        other: &Field<T>,
        f: impl Fn(Vec3<T>, Vec3<T>) -> Vec3<T>,
    ) -> Result<Field<T>> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_map_unchecked(other, f))
    }

    pub(crate) fn zip_map_unchecked(
        &self,
        other: &Field<T>,
        f: impl Fn(Vec3<T>, Vec3<T>) -> Vec3<T>,
    ) -> Field<T> {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_parts(self.grid, values)
    }

    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: T) -> Field<T> {
        self.map(|v| v * s)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &Field<T>) -> Result<()> {
        self.ensure_same_grid(x)?;
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += v * a;
        }
        Ok(())
    }

    /// Midpoint-rule L² inner product.
    pub fn inner(&self, other: &Field<T>) -> Result<T> {
        self.ensure_same_grid(other)?;
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a.dot(b))
            .sum();
        Ok(s * self.grid.cell_volume::<T>())
    }

    /// Pointwise Euclidean magnitudes.
    pub fn magnitudes(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn cast<U: Real>(&self) -> Field<U> {
        Field::from_parts(self.grid, self.values.iter().map(|v| v.cast()).collect())
    }
}

/// Cellwise cross product `f(ξ) × g(ξ)`.
pub fn pointwise_cross<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<Field<T>> {
    f.zip_map(g, |a, b| a.cross(b))
}

/// Cellwise dot product.
pub fn pointwise_dot<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<Vec<T>> {
    f.ensure_same_grid(g)?;
    Ok(f.values.iter().zip(&g.values).map(|(&a, &b)| a.dot(b)).collect())
}

/// Second-order Neumann Laplacian with reflected ghost cells.
pub fn neumann_laplacian<T: Real>(f: &Field<T>) -> Field<T> {
    let grid = f.grid;
    let n = grid.cells_per_axis;
    let inv_h2 = T::one() / (grid.spacing::<T>() * grid.spacing::<T>());
    let v = &f.values;
    let mut out = vec![Vec3::zero(); v.len()];
    for (c, o) in out.iter_mut().enumerate() {
        let [ix, iy] = grid.axis_indices(c);
        let center = v[c];
        let mut acc = Vec3::zero();
        // x direction
        let left = if ix > 0 { v[c - 1] } else { center };
        let right = if ix + 1 < n { v[c + 1] } else { center };
        acc += (left - center) + (right - center);
        if grid.dimension == 2 {
            let down = if iy > 0 { v[c - n] } else { center };
            let up = if iy + 1 < n { v[c + n] } else { center };
            acc += (down - center) + (up - center);
        }
        *o = acc * inv_h2;
    }
    Field::from_parts(grid, out)
}

/// Checked variant of [`neumann_laplacian`] that also validates its input.
pub fn try_neumann_laplacian<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    f.check_finite()?;
    Ok(neumann_laplacian(f))
}

/// `‖∇f‖²_{L²}` from face differences; boundary faces carry zero flux, so
/// `‖∇f‖² = −⟨Δf, f⟩` holds exactly in exact arithmetic.
pub fn gradient_norm_squared<T: Real>(f: &Field<T>) -> T {
    let grid = f.grid;
    let n = grid.cells_per_axis;
    let h = grid.spacing::<T>();
    let v = &f.values;
    let mut s = T::zero();
    for c in 0..v.len() {
        let [ix, iy] = grid.axis_indices(c);
        if ix + 1 < n {
            s += (v[c + 1] - v[c]).norm_squared();
        }
        if grid.dimension == 2 && iy + 1 < n {
            s += (v[c + n] - v[c]).norm_squared();
        }
    }
    s * grid.cell_volume::<T>() / (h * h)
}

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind<T> {
    L2,
    L4,
    H1,
    /// `‖Δf‖_{L²}`.
    H2Semi,
    /// Dual fractional norm `‖f‖_{X^{−β}}` with `X^β = dom((I + A)^β)`.
    Dual(T),
}

pub fn l2_norm<T: Real>(f: &Field<T>) -> T {
    l2_norm_squared(f).sqrt()
}

pub fn l2_norm_squared<T: Real>(f: &Field<T>) -> T {
    let s: T = f.values.iter().map(|v| v.norm_squared()).sum();
    s * f.grid.cell_volume::<T>()
}

/// `‖f‖⁴_{L⁴}`.
pub fn l4_norm_fourth<T: Real>(f: &Field<T>) -> T {
    let s: T = f
        .values
        .iter()
        .map(|v| {
            let q = v.norm_squared();
            q * q
        })
        .sum();
    s * f.grid.cell_volume::<T>()
}

pub fn h1_norm_squared<T: Real>(f: &Field<T>) -> T {
    l2_norm_squared(f) + gradient_norm_squared(f)
}

pub fn norm<T: Real>(f: &Field<T>, kind: NormKind<T>) -> Result<T> {
    Ok(match kind {
        NormKind::L2 => l2_norm(f),
        NormKind::L4 => l4_norm_fourth(f).sqrt().sqrt(),
        NormKind::H1 => h1_norm_squared(f).sqrt(),
        NormKind::H2Semi => l2_norm(&neumann_laplacian(f)),
        NormKind::Dual(beta) => {
            if !(beta >= T::zero()) {
                return Err(invalid("beta", format!("must be >= 0, got {beta}")));
            }
            SpectralDecomposition::new(f.grid).dual_norm(f, beta)?
        }
    })
}

/// Eigen-decomposition of the discrete Neumann Laplacian: DCT-II modes
/// `cos(πk(i + ½)/n)` with eigenvalues `λ_k = (4/h²) sin²(πk/2n)` of `A = −Δ`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T> {
    grid: Grid,
    /// Per-axis eigenvalues of `−Δ` in one dimension.
    axis_eigenvalues: Vec<T>,
    /// Row `k` is the Euclidean-orthonormal DCT-II vector of mode `k`.
    basis: Vec<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn new(grid: Grid) -> Self {
        let n = grid.cells_per_axis;
        let nf = T::from_usize_lossy(n);
        let h = grid.spacing::<T>();
        let pi = T::PI();
        let half = T::lit(0.5);
        let four_over_h2 = T::lit(4.0) / (h * h);
        let axis_eigenvalues = (0..n)
            .map(|k| {
                let s = (pi * T::from_usize_lossy(k) / (T::lit(2.0) * nf)).sin();
                four_over_h2 * s * s
            })
            .collect();
        let c0 = (T::one() / nf).sqrt();
        let ck = (T::lit(2.0) / nf).sqrt();
        let mut basis = Vec::with_capacity(n * n);
        for k in 0..n {
            let c = if k == 0 { c0 } else { ck };
            for i in 0..n {
                let arg = pi * T::from_usize_lossy(k) * (T::from_usize_lossy(i) + half) / nf;
                basis.push(c * arg.cos());
            }
        }
        Self {
            grid,
            axis_eigenvalues,
            basis,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Eigenvalues of `A = −Δ` per mode, in mode order (`kx + n·ky` in 2D).
    /// In 1D this sequence is nondecreasing with `λ_0 = 0`.
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.grid.cells_per_axis;
        match self.grid.dimension {
            1 => self.axis_eigenvalues.clone(),
            _ => (0..n * n)
                .map(|m| self.axis_eigenvalues[m % n] + self.axis_eigenvalues[m / n])
                .collect(),
        }
    }

    pub fn sorted_eigenvalues(&self) -> Vec<T> {
        let mut ev = self.eigenvalues();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        ev
    }

    /// Mode `k` as a field normalized to unit L² norm, scaled by `direction`.
    pub fn mode(&self, k: usize, direction: Vec3<T>) -> Field<T> {
        let mut coeffs = vec![Vec3::zero(); self.grid.cell_count()];
        coeffs[k] = direction;
        self.inverse_unchecked(&coeffs)
    }

    fn transform_axis(&self, data: &mut [Vec3<T>], forward: bool) {
        let n = self.grid.cells_per_axis;
        let mut scratch = vec![Vec3::zero(); n];
        let lines: Vec<(usize, usize)> = match self.grid.dimension {
            1 => vec![(0, 1)],
            _ => (0..n).map(|iy| (iy * n, 1)).collect(),
        };
        self.apply_lines(data, &lines, &mut scratch, forward);
        if self.grid.dimension == 2 {
            let lines: Vec<(usize, usize)> = (0..n).map(|ix| (ix, n)).collect();
            self.apply_lines(data, &lines, &mut scratch, forward);
        }
    }

    fn apply_lines(
        &self,
        data: &mut [Vec3<T>],
        lines: &[(usize, usize)],
        scratch: &mut [Vec3<T>],
        forward: bool,
    ) {
        let n = self.grid.cells_per_axis;
        for &(start, stride) in lines {
            for (k, out) in scratch.iter_mut().enumerate() {
                let mut acc = Vec3::zero();
                for i in 0..n {
                    let w = if forward {
                        self.basis[k * n + i]
                    } else {
                        self.basis[i * n + k]
                    };
                    acc += data[start + i * stride] * w;
                }
                *out = acc;
            }
            for (i, &s) in scratch.iter().enumerate() {
                data[start + i * stride] = s;
            }
        }
    }

    /// Coefficients `f̂_k = ⟨f, e_k⟩_{L²}` against the L²-orthonormal modes.
    pub fn forward(&self, f: &Field<T>) -> Result<Vec<Vec3<T>>> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch {
                left: f.grid.describe(),
                right: self.grid.describe(),
            });
        }
        let mut data = f.values.clone();
        self.transform_axis(&mut data, true);
        let scale = self.grid.cell_volume::<T>().sqrt();
        Ok(data.into_iter().map(|v| v * scale).collect())
    }

    pub fn inverse(&self, coeffs: &[Vec3<T>]) -> Result<Field<T>> {
        if coeffs.len() != self.grid.cell_count() {
            return Err(Error::FieldLength {
                expected: self.grid.cell_count(),
                got: coeffs.len(),
            });
        }
        Ok(self.inverse_unchecked(coeffs))
    }

    fn inverse_unchecked(&self, coeffs: &[Vec3<T>]) -> Field<T> {
        let mut data = coeffs.to_vec();
        self.transform_axis(&mut data, false);
        let scale = T::one() / self.grid.cell_volume::<T>().sqrt();
        Field::from_parts(self.grid, data.into_iter().map(|v| v * scale).collect())
    }

    /// Laplacian applied in the eigenbasis; equals [`neumann_laplacian`] up to
    /// rounding.
    pub fn apply_laplacian(&self, f: &Field<T>) -> Result<Field<T>> {
        let ev = self.eigenvalues();
        let coeffs: Vec<_> = self
            .forward(f)?
            .into_iter()
            .zip(&ev)
            .map(|(c, &l)| c * (-l))
            .collect();
        Ok(self.inverse_unchecked(&coeffs))
    }

    /// `‖f‖_{X^{−β}} = (Σ_k (1+λ_k)^{−2β} |f̂_k|²)^{1/2}`.
    pub fn dual_norm(&self, f: &Field<T>, beta: T) -> Result<T> {
        Ok(self.dual_norm_squared(f, beta)?.sqrt())
    }

    pub fn dual_norm_squared(&self, f: &Field<T>, beta: T) -> Result<T> {
        if !(beta >= T::zero()) {
            return Err(invalid("beta", format!("must be >= 0, got {beta}")));
        }
        let ev = self.eigenvalues();
        let two_beta = T::lit(2.0) * beta;
        Ok(self
            .forward(f)?
            .into_iter()
            .zip(&ev)
            .map(|(c, &l)| c.norm_squared() * (T::one() + l).powf(-two_beta))
            .sum())
    }
}

/// Field with i.i.d. uniform components in `[-amplitude, amplitude]`.
pub fn random_field<T: Real, R: Rng + ?Sized>(grid: Grid, amplitude: f64, rng: &mut R) -> Field<T> {
    let values = (0..grid.cell_count())
        .map(|_| {
            Vec3::new(
                T::lit(rng.random_range(-amplitude..=amplitude)),
                T::lit(rng.random_range(-amplitude..=amplitude)),
                T::lit(rng.random_range(-amplitude..=amplitude)),
            )
        })
        .collect();
    Field::from_parts(grid, values)
}
