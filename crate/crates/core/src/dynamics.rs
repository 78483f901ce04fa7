//! Deterministic Landau–Lifshitz–Bloch drift above the Curie temperature.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{neumann_laplacian, Field};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Coefficients of `κ₁Δm + γ m×Δm − κ(1 + μ|m|²)m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants<T> {
    /// Exchange diffusion.
    pub kappa1: T,
    /// Precession.
    pub gamma: T,
    /// Longitudinal relaxation, `κ₁/χ_∥`.
    pub kappa: T,
    /// Cubic coefficient, `(3/5)·T/(T − T_c)`.
    pub mu: T,
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::unit()
    }
}

impl<T: Real> PhysicalConstants<T> {
    pub fn unit() -> Self {
        Self {
            kappa1: T::one(),
            gamma: T::one(),
            kappa: T::one(),
            mu: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa1 > T::zero()) || !self.kappa1.is_finite() {
            return Err(invalid("kappa1", "must be positive and finite"));
        }
        for (name, v) in [("gamma", self.gamma), ("kappa", self.kappa), ("mu", self.mu)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Parameters of the entropy correction `−(1/χ_∥)(1 + μ|m|²)m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyCorrection<T> {
    pub chi_parallel: T,
    pub mu: T,
}

impl<T: Real> EntropyCorrection<T> {
    /// `μ = (3/5)·T/(T − T_c)`; singular at the Curie temperature.
    pub fn from_temperatures(chi_parallel: T, temperature: T, curie: T) -> Result<Self> {
        if temperature == curie {
            return Err(invalid(
                "temperature",
                "equals the Curie temperature; μ = (3/5)T/(T − T_c) is singular",
            ));
        }
        if !(chi_parallel > T::zero()) {
            return Err(invalid("chi_parallel", "must be positive"));
        }
        Ok(Self {
            chi_parallel,
            mu: T::lit(0.6) * temperature / (temperature - curie),
        })
    }

    pub fn unit() -> Self {
        Self {
            chi_parallel: T::one(),
            mu: T::one(),
        }
    }
}

/// `H_eff = Δm − (1/χ_∥)(1 + μ|m|²)m`.
pub fn effective_field<T: Real>(m: &Field<T>, entropy: &EntropyCorrection<T>) -> Field<T> {
    let lap = neumann_laplacian(m);
    let inv_chi = T::one() / entropy.chi_parallel;
    m.zip_map_unchecked(&lap, |v, l| {
        l - v * (inv_chi * (T::one() + entropy.mu * v.norm_squared()))
    })
}

/// `κ₁Δm + γ m×Δm − κ(1 + μ|m|²)m`.
pub fn llb_drift<T: Real>(m: &Field<T>, c: &PhysicalConstants<T>) -> Field<T> {
    let lap = neumann_laplacian(m);
    m.zip_map_unchecked(&lap, |v, l| llb_cell(v, l, c))
}

#[inline]
pub(crate) fn llb_cell<T: Real>(v: Vec3<T>, lap: Vec3<T>, c: &PhysicalConstants<T>) -> Vec3<T> {
    lap * c.kappa1 + v.cross(lap) * c.gamma - v * (c.kappa * (T::one() + c.mu * v.norm_squared()))
}

/// Explicit (non-diffusive) part of the drift: precession and relaxation.
#[inline]
pub(crate) fn explicit_cell<T: Real>(
    v: Vec3<T>,
    lap: Vec3<T>,
    c: &PhysicalConstants<T>,
) -> Vec3<T> {
    v.cross(lap) * c.gamma - v * (c.kappa * (T::one() + c.mu * v.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gradient_norm_squared, l4_norm_fourth, l2_norm_squared, pointwise_cross, random_field, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit() -> PhysicalConstants<f64> {
        PhysicalConstants::unit()
    }

    #[test]
    fn effective_field_examples() {
        let g = Grid::one_d(16).unwrap();
        let e = EntropyCorrection::unit();
        assert!(effective_field(&Field::<f64>::zeros(g), &e)
            .values()
            .iter()
            .all(|v| *v == Vec3::zero()));
        let a = 0.7;
        let h = effective_field(&Field::constant(g, Vec3::new(a, 0.0, 0.0)), &e);
        for v in h.values() {
            assert!((v.x + (1.0 + a * a) * a).abs() < 1e-15 && v.y == 0.0 && v.z == 0.0);
        }
    }

    #[test]
    fn unit_temperatures_give_unit_mu() {
        // (3/5)·T/(T − T_c) = 1 at T = 5/2, T_c = 1
        let e = EntropyCorrection::<f64>::from_temperatures(1.0, 2.5, 1.0).unwrap();
        assert!((e.mu - 1.0).abs() < 1e-15);
        assert!(EntropyCorrection::from_temperatures(1.0, 3.0, 3.0).is_err());
    }

    #[test]
    fn effective_field_cosine_mode_second_order() {
        let e = EntropyCorrection::unit();
        let mut errs = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let g = Grid::one_d(n).unwrap();
            let m = Field::from_fn(g, |[x, _]: [f64; 2]| Vec3::new((PI * x).cos(), 0.0, 0.0));
            let h = effective_field(&m, &e);
            let err = h
                .values()
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    let [x, _] = g.center::<f64>(c);
                    let cx = (PI * x).cos();
                    (v.x - (-PI * PI * cx - (1.0 + cx * cx) * cx)).abs()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!(((w[0] / w[1]).log2() - 2.0).abs() < 0.05);
        }
    }

    #[test]
    fn drift_examples() {
        let g = Grid::one_d(8).unwrap();
        assert!(llb_drift(&Field::<f64>::zeros(g), &unit())
            .values()
            .iter()
            .all(|v| *v == Vec3::zero()));
        let a = -1.3;
        let d = llb_drift(&Field::constant(g, Vec3::new(a, 0.0, 0.0)), &unit());
        for v in d.values() {
            assert!((v.x + (1.0 + a * a) * a).abs() < 1e-15);
        }
    }

    #[test]
    fn drift_energy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = PhysicalConstants {
            kappa1: 0.7,
            gamma: 1.9,
            kappa: 1.3,
            mu: 0.4,
        };
        for grid in [Grid::one_d(32).unwrap(), Grid::two_d(8).unwrap()] {
            for _ in 0..20 {
                let m: Field<f64> = random_field(grid, 1.0, &mut rng);
                let lhs = llb_drift(&m, &c).inner(&m).unwrap();
                // independent right side from grid norms
                let rhs = -c.kappa1 * gradient_norm_squared(&m)
                    - c.kappa * (l2_norm_squared(&m) + c.mu * l4_norm_fourth(&m));
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
                let unit_lhs = llb_drift(&m, &unit()).inner(&m).unwrap();
                assert!(unit_lhs <= 0.0);
                let prec = pointwise_cross(&m, &neumann_laplacian(&m)).unwrap();
                assert!(prec.inner(&m).unwrap().abs() < 1e-12 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn triple_product_and_precession_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = Grid::one_d(32).unwrap();
        let e = EntropyCorrection::unit();
        for _ in 0..10 {
            let m: Field<f64> = random_field(g, 1.0, &mut rng);
            let heff = effective_field(&m, &e);
            let lap = neumann_laplacian(&m);
            for ((&v, &h), &l) in m.values().iter().zip(heff.values()).zip(lap.values()) {
                let resid = v.cross(v.cross(h)) + h * v.norm_squared() - v * v.dot(h);
                let scale = v.norm_squared() * h.norm();
                assert!(resid.norm() <= 1e-13 * scale.max(1.0));
                // entropy term is parallel to m, so it drops out of m × H_eff
                let d = v.cross(h) - v.cross(l);
                assert!(d.norm() <= 1e-13 * (v.norm() * l.norm()).max(1.0));
            }
        }
    }

    #[test]
    fn constants_validation() {
        assert!(unit().validate().is_ok());
        let mut c = unit();
        c.kappa1 = 0.0;
        assert!(c.validate().is_err());
        c.kappa1 = 1.0;
        c.mu = f64::NAN;
        assert!(c.validate().is_err());
    }
}
