//! The Marcus jump map and the operators derived from it.
//!
//! For the noise coefficient `g(v) = v × h`, the time-one flow of
//! `dv/dt = l·v × h(ξ)` is, in every cell, the rotation of `v(ξ)` about the
//! axis `ĥ(ξ)` by the angle `−l|h(ξ)|`. Everything here is evaluated in
//! closed form with Rodrigues' formula:
//!
//! * `Φ(l, v)`: the jump map,
//! * `G(l, v) = Φ(l, v) − v`: the jump increment,
//! * `H(l, v) = Φ(l, v) − v − l·g(v)`: its second-order remainder,
//! * `b(v) = ∫_B H(l, v) ν(dl)`: the compensator drift.
//!
//! `H` uses a series for `sin θ − θ` at small angles so that its `O(l²)`
//! behaviour is resolved without cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::levy::LevyMeasureSpec;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Cells with `|h(ξ)|` below this are treated as having no rotation axis.
pub const DEGENERATE_AXIS: f64 = 1e-14;

/// The material field `h` with per-cell unit axis and magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField<T> {
    field: Field<T>,
    axis: Vec<Vec3<T>>,
    magnitude: Vec<T>,
}

impl<T: Real> MaterialField<T> {
    pub fn new(field: Field<T>) -> Self {
        let tiny = T::lit(DEGENERATE_AXIS);
        let (axis, magnitude) = field
            .values()
            .iter()
            .map(|&v| {
                let n = v.norm();
                if n < tiny {
                    (Vec3::zero(), T::zero())
                } else {
                    (v * (T::one() / n), n)
                }
            })
            .unzip();
        Self {
            field,
            axis,
            magnitude,
        }
    }

    pub fn field(&self) -> &Field<T> {
        &self.field
    }

    pub fn axis(&self) -> &[Vec3<T>] {
        &self.axis
    }

    pub fn magnitude(&self) -> &[T] {
        &self.magnitude
    }

    pub fn degenerate_cells(&self) -> Vec<usize> {
        self.magnitude
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == T::zero())
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest face difference quotient `max |h(ξ') − h(ξ)| / spacing` over
    /// neighbouring cells: the discrete Lipschitz constant of `h`.
    pub fn lipschitz_constant(&self) -> T {
        let grid = self.field.grid();
        let n = grid.cells_per_axis();
        let v = self.field.values();
        let mut best = T::zero();
        for c in 0..v.len() {
            let [ix, iy] = grid.axis_indices(c);
            if ix + 1 < n {
                best = best.max((v[c + 1] - v[c]).norm());
            }
            if grid.dimension() == 2 && iy + 1 < n {
                best = best.max((v[c + n] - v[c]).norm());
            }
        }
        best / grid.spacing::<T>()
    }
}

#[inline]
fn rotate<T: Real>(v: Vec3<T>, k: Vec3<T>, theta: T) -> Vec3<T> {
    let (s, c) = theta.sin_cos();
    let one_minus_cos = T::lit(2.0) * (theta * T::lit(0.5)).sin().powi(2);
    v * c + k.cross(v) * s + k * (k.dot(v) * one_minus_cos)
}

#[inline]
fn rotation_increment<T: Real>(v: Vec3<T>, k: Vec3<T>, theta: T) -> Vec3<T> {
    let s = theta.sin();
    let one_minus_cos = T::lit(2.0) * (theta * T::lit(0.5)).sin().powi(2);
    k.cross(v) * s + (k * k.dot(v) - v) * one_minus_cos
}

/// `sin θ − θ` without cancellation for small `θ`.
#[inline]
fn sin_minus_id<T: Real>(theta: T) -> T {
    if theta.abs() < T::lit(0.25) {
        let t2 = theta * theta;
        // −θ³/3! + θ⁵/5! − … − θ¹³/13!
        let coeffs = [
            -1.0 / 6.0,
            1.0 / 120.0,
            -1.0 / 5040.0,
            1.0 / 362_880.0,
            -1.0 / 39_916_800.0,
            1.0 / 6_227_020_800.0,
        ];
        let mut acc = T::zero();
        for c in coeffs.iter().rev() {
            acc = acc * t2 + T::lit(*c);
        }
        acc * t2 * theta
    } else {
        theta.sin() - theta
    }
}

#[inline]
fn rotation_remainder<T: Real>(v: Vec3<T>, k: Vec3<T>, theta: T) -> Vec3<T> {
    let one_minus_cos = T::lit(2.0) * (theta * T::lit(0.5)).sin().powi(2);
    k.cross(v) * sin_minus_id(theta) + (k * k.dot(v) - v) * one_minus_cos
}

fn check_jump_size<T: Real>(l: T) -> Result<()> {
    if !l.is_finite() {
        return Err(Error::InvalidParameter {
            name: "l",
            reason: format!("jump size must be finite, got {l}"),
        });
    }
    Ok(())
}

fn cellwise<T: Real>(
    v: &Field<T>,
    h: &MaterialField<T>,
    l: T,
    f: impl Fn(Vec3<T>, Vec3<T>, T) -> Vec3<T>,
) -> Field<T> {
    let values = v
        .values()
        .iter()
        .zip(h.axis.iter().zip(&h.magnitude))
        .map(|(&x, (&k, &mag))| {
            if mag == T::zero() {
                f(x, Vec3::zero(), T::zero())
            } else {
                f(x, k, -l * mag)
            }
        })
        .collect();
    Field::from_parts(v.grid(), values)
}

/// `g(v) = v × h`.
pub fn g_op<T: Real>(v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
    v.ensure_same_grid(&h.field)?;
    Ok(g_op_unchecked(v, h))
}

pub(crate) fn g_op_unchecked<T: Real>(v: &Field<T>, h: &MaterialField<T>) -> Field<T> {
    v.zip_map_unchecked(&h.field, |a, b| a.cross(b))
}

/// Exact pointwise rotation `x(ξ) ↦ R(ĥ(ξ), −s|h(ξ)|) x(ξ)` for any real
/// `s`: the flow of `dv/dt = v × h` for time `s`.
pub fn rotate_about_h<T: Real>(s: T, x: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
    x.ensure_same_grid(&h.field)?;
    Ok(cellwise(x, h, s, rotate))
}

/// The Marcus map `Φ(l, x)`: time-one solution of `dΦ/dt = l·g(Φ)`.
///
/// Jump sizes of a Lévy measure on `B` satisfy `|l| ≤ 1`, but the rotation is
/// defined for every finite `l`; only non-finite sizes are rejected.
pub fn phi<T: Real>(l: T, x: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
    check_jump_size(l)?;
    x.ensure_same_grid(&h.field)?;
    if l == T::zero() {
        return Ok(x.clone());
    }
    Ok(cellwise(x, h, l, rotate))
}

/// `G(l, v) = Φ(l, v) − v`.
pub fn jump_increment<T: Real>(l: T, v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
    check_jump_size(l)?;
    v.ensure_same_grid(&h.field)?;
    Ok(cellwise(v, h, l, rotation_increment))
}

/// `H(l, v) = Φ(l, v) − v − l·g(v)`.
pub fn jump_remainder<T: Real>(l: T, v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
    check_jump_size(l)?;
    v.ensure_same_grid(&h.field)?;
    Ok(cellwise(v, h, l, rotation_remainder))
}

fn integrate<T: Real>(
    v: &Field<T>,
    spec: &LevyMeasureSpec<T>,
    h: &MaterialField<T>,
    kernel: fn(Vec3<T>, Vec3<T>, T) -> Vec3<T>,
) -> Result<Field<T>> {
    v.ensure_same_grid(&h.field)?;
    let mut acc = vec![Vec3::zero(); v.len()];
    for (l, w) in spec.quadrature() {
        let term = cellwise(v, h, l, kernel);
        for (a, t) in acc.iter_mut().zip(term.values()) {
            *a += *t * w;
        }
    }
    Ok(Field::from_parts(v.grid(), acc))
}

/// Compensator drift `b(v) = ∫_B H(l, v) ν(dl)`.
pub fn compensator_drift<T: Real>(
    v: &Field<T>,
    spec: &LevyMeasureSpec<T>,
    h: &MaterialField<T>,
) -> Result<Field<T>> {
    integrate(v, spec, h, rotation_remainder)
}

/// `∫_B G(l, v) ν(dl)` with the same quadrature as [`compensator_drift`].
pub fn increment_integral<T: Real>(
    v: &Field<T>,
    spec: &LevyMeasureSpec<T>,
    h: &MaterialField<T>,
) -> Result<Field<T>> {
    integrate(v, spec, h, rotation_increment)
}

/// A rule for how a jump of size `l` acts on the state.
pub trait JumpMap<T: Real>: Sync {
    fn jump(&self, l: T, x: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>>;

    fn increment(&self, l: T, v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
        self.jump(l, v, h)?.sub(v)
    }

    fn remainder(&self, l: T, v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
        let mut r = self.increment(l, v, h)?;
        r.axpy(-l, &g_op(v, h)?)?;
        Ok(r)
    }
}

/// Which jump semantics to use. `Linearized` (`x ↦ x + l·g(x)`) is the
/// Itô-style first-order map and exists so the property suites can be shown
/// to reject it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRule {
    #[default]
    Marcus,
    Linearized,
}

impl<T: Real> JumpMap<T> for JumpRule {
    fn jump(&self, l: T, x: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
        match self {
            JumpRule::Marcus => phi(l, x, h),
            JumpRule::Linearized => {
                check_jump_size(l)?;
                let mut out = x.clone();
                out.axpy(l, &g_op(x, h)?)?;
                Ok(out)
            }
        }
    }

    fn increment(&self, l: T, v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
        match self {
            JumpRule::Marcus => jump_increment(l, v, h),
            JumpRule::Linearized => Ok(g_op(v, h)?.scaled(l)),
        }
    }

    fn remainder(&self, l: T, v: &Field<T>, h: &MaterialField<T>) -> Result<Field<T>> {
        match self {
            JumpRule::Marcus => jump_remainder(l, v, h),
            JumpRule::Linearized => {
                check_jump_size(l)?;
                Ok(Field::zeros(v.grid()))
            }
        }
    }
}
