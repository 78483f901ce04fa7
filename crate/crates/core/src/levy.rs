//! Lévy measures on the punctured unit interval `B = [-1, 1] \ {0}` and
//! sampling of the associated Poisson random measure on `[0, T] × B`.
//!
//! Only finite-activity measures are simulated. The power-law family carries
//! a mandatory inner cutoff `ε`; the discarded small-jump mass is dropped, not
//! replaced by a Gaussian correction.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::marcus::{g_op_unchecked, MaterialField};
use crate::quadrature::gauss_legendre_on;
use crate::rng;
use crate::scalar::Real;

/// Gauss–Legendre order used per panel for continuous densities.
pub const QUADRATURE_ORDER: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub location: T,
    pub mass: T,
}

/// The families of restricted Lévy measures `ν` that can be simulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevyFamily<T> {
    /// The zero measure: no jumps at all.
    Empty,
    /// `Σ w_i δ_{l_i}`.
    Atoms { atoms: Vec<Atom<T>> },
    /// Constant density `intensity` on `[-b, b] \ {0}`.
    Uniform { intensity: T, half_width: T },
    /// Symmetric density `scale / |l|^{1+α}` on `cutoff ≤ |l| ≤ 1`.
    PowerLaw { alpha: T, scale: T, cutoff: T },
}

/// A validated [`LevyFamily`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevyFamily<T>", into = "LevyFamily<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct LevyMeasureSpec<T: Real> {
    family: LevyFamily<T>,
}

impl<T: Real> TryFrom<LevyFamily<T>> for LevyMeasureSpec<T> {
    type Error = Error;
    fn try_from(family: LevyFamily<T>) -> Result<Self> {
        Self::new(family)
    }
}

impl<T: Real> From<LevyMeasureSpec<T>> for LevyFamily<T> {
    fn from(s: LevyMeasureSpec<T>) -> Self {
        s.family
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidLevyMeasure(msg.into())
}

impl<T: Real> LevyMeasureSpec<T> {
    pub fn new(family: LevyFamily<T>) -> Result<Self> {
        let one = T::one();
        match &family {
            LevyFamily::Empty => {}
            LevyFamily::Atoms { atoms } => {
                for a in atoms {
                    if !a.location.is_finite() || a.location == T::zero() || a.location.abs() > one {
                        return Err(bad(format!(
                            "atom location {} must satisfy 0 < |l| <= 1",
                            a.location
                        )));
                    }
                    if !(a.mass > T::zero()) || !a.mass.is_finite() {
                        return Err(bad(format!("atom mass {} must be positive", a.mass)));
                    }
                }
            }
            LevyFamily::Uniform {
                intensity,
                half_width,
            } => {
                if !(*intensity > T::zero()) || !intensity.is_finite() {
                    return Err(bad("uniform intensity must be positive"));
                }
                if !(*half_width > T::zero() && *half_width <= one) {
                    return Err(bad("uniform half width must lie in (0, 1]"));
                }
            }
            LevyFamily::PowerLaw {
                alpha,
                scale,
                cutoff,
            } => {
                if !(*alpha > T::zero() && *alpha < T::lit(2.0)) {
                    return Err(bad("power-law alpha must lie in (0, 2)"));
                }
                if !(*scale > T::zero()) || !scale.is_finite() {
                    return Err(bad("power-law scale must be positive"));
                }
                if !(*cutoff > T::zero() && *cutoff < one) {
                    return Err(bad(
                        "power-law inner cutoff must lie in (0, 1); untruncated measures cannot be simulated",
                    ));
                }
            }
        }
        Ok(Self { family })
    }

    pub fn empty() -> Self {
        Self {
            family: LevyFamily::Empty,
        }
    }

    pub fn atoms(atoms: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        Self::new(LevyFamily::Atoms {
            atoms: atoms
                .into_iter()
                .map(|(location, mass)| Atom { location, mass })
                .collect(),
        })
    }

    pub fn uniform(intensity: T, half_width: T) -> Result<Self> {
        Self::new(LevyFamily::Uniform {
            intensity,
            half_width,
        })
    }

    pub fn power_law(alpha: T, scale: T, cutoff: T) -> Result<Self> {
        Self::new(LevyFamily::PowerLaw {
            alpha,
            scale,
            cutoff,
        })
    }

    pub fn family(&self) -> &LevyFamily<T> {
        &self.family
    }

    /// `ν(B)`, in closed form.
    pub fn total_mass(&self) -> T {
        match &self.family {
            LevyFamily::Empty => T::zero(),
            LevyFamily::Atoms { atoms } => atoms.iter().map(|a| a.mass).sum(),
            LevyFamily::Uniform {
                intensity,
                half_width,
            } => T::lit(2.0) * *intensity * *half_width,
            LevyFamily::PowerLaw {
                alpha,
                scale,
                cutoff,
            } => T::lit(2.0) * *scale * (cutoff.powf(-*alpha) - T::one()) / *alpha,
        }
    }

    /// `∫_B l ν(dl)`; exactly zero for the symmetric families.
    pub fn mean_jump(&self) -> T {
        match &self.family {
            LevyFamily::Atoms { atoms } => atoms.iter().map(|a| a.location * a.mass).sum(),
            _ => T::zero(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.family, LevyFamily::Atoms { .. }) || self.mean_jump() == T::zero()
    }

    /// Quadrature rule `(l_i, w_i)` with `∫ f dν ≈ Σ w_i f(l_i)`: exact for
    /// atoms, Gauss–Legendre of order [`QUADRATURE_ORDER`] per panel for
    /// densities. Negative nodes mirror positive ones exactly, so odd
    /// integrands cancel to rounding.
    pub fn quadrature(&self) -> Vec<(T, T)> {
        match &self.family {
            LevyFamily::Empty => Vec::new(),
            LevyFamily::Atoms { atoms } => atoms.iter().map(|a| (a.location, a.mass)).collect(),
            LevyFamily::Uniform {
                intensity,
                half_width,
            } => {
                let rule = gauss_legendre_on(QUADRATURE_ORDER, 0.0, half_width.as_f64());
                mirrored(rule.into_iter().map(|(l, w)| (l, w * intensity.as_f64())))
            }
            LevyFamily::PowerLaw {
                alpha,
                scale,
                cutoff,
            } => {
                // Geometric panels [ε 2^j, ε 2^{j+1}] keep the density smooth
                // on every panel relative to its width.
                let (a, c, eps) = (alpha.as_f64(), scale.as_f64(), cutoff.as_f64());
                let mut edges = vec![eps];
                while *edges.last().expect("nonempty") * 2.0 < 1.0 {
                    let next = edges.last().expect("nonempty") * 2.0;
                    edges.push(next);
                }
                edges.push(1.0);
                let mut nodes = Vec::new();
                for w in edges.windows(2) {
                    for (l, wt) in gauss_legendre_on(QUADRATURE_ORDER, w[0], w[1]) {
                        nodes.push((l, wt * c * l.powf(-1.0 - a)));
                    }
                }
                mirrored(nodes.into_iter())
            }
        }
    }

    /// One jump size drawn from `ν / ν(B)`.
    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match &self.family {
            LevyFamily::Empty => panic!("cannot sample from the zero measure"),
            LevyFamily::Atoms { atoms } => {
                let total = self.total_mass().as_f64();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.mass.as_f64();
                    if u < acc {
                        return a.location;
                    }
                }
                atoms.last().expect("nonempty atoms").location
            }
            LevyFamily::Uniform { half_width, .. } => {
                let b = half_width.as_f64();
                loop {
                    let l = b * (2.0 * rng.random::<f64>() - 1.0);
                    if l != 0.0 {
                        return T::lit(l);
                    }
                }
            }
            LevyFamily::PowerLaw { alpha, cutoff, .. } => {
                let (a, eps) = (alpha.as_f64(), cutoff.as_f64());
                let top = eps.powf(-a);
                let u: f64 = rng.random();
                // inverse CDF of |l| on [ε, 1] with density ∝ l^{-1-α}
                let mag = (top - u * (top - 1.0)).powf(-1.0 / a).clamp(eps, 1.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                T::lit(sign * mag)
            }
        }
    }

    /// CDF of the normalized measure `ν / ν(B)` on `[-1, 1]`.
    pub fn normalized_cdf(&self, l: f64) -> f64 {
        match &self.family {
            LevyFamily::Empty => 0.0,
            LevyFamily::Atoms { atoms } => {
                let total = self.total_mass().as_f64();
                atoms
                    .iter()
                    .filter(|a| a.location.as_f64() <= l)
                    .map(|a| a.mass.as_f64())
                    .sum::<f64>()
                    / total
            }
            LevyFamily::Uniform { half_width, .. } => {
                let b = half_width.as_f64();
                ((l + b) / (2.0 * b)).clamp(0.0, 1.0)
            }
            LevyFamily::PowerLaw { alpha, cutoff, .. } => {
                let (a, eps) = (alpha.as_f64(), cutoff.as_f64());
                let tail = |x: f64| -> f64 {
                    // P(|L| <= x)
                    if x <= eps {
                        0.0
                    } else if x >= 1.0 {
                        1.0
                    } else {
                        (eps.powf(-a) - x.powf(-a)) / (eps.powf(-a) - 1.0)
                    }
                };
                if l >= 0.0 {
                    0.5 + 0.5 * tail(l)
                } else {
                    0.5 - 0.5 * tail(-l)
                }
            }
        }
    }
}

fn mirrored<T: Real>(positive: impl Iterator<Item = (f64, f64)>) -> Vec<(T, T)> {
    let pos: Vec<(T, T)> = positive.map(|(l, w)| (T::lit(l), T::lit(w))).collect();
    let mut out: Vec<(T, T)> = pos.iter().rev().map(|&(l, w)| (-l, w)).collect();
    out.extend(pos);
    out
}

/// An atom `(t, l)` of the Poisson random measure `η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent<T> {
    pub time: T,
    pub size: T,
}

/// Samples `η` on `[0, horizon] × B` as a compound Poisson point process:
/// `Poisson(ν(B)·T)` events with uniform times (sorted ascending) and
/// i.i.d. sizes from `ν/ν(B)`. Deterministic in `seed`.
pub fn sample_prm<T: Real>(
    spec: &LevyMeasureSpec<T>,
    horizon: T,
    seed: u64,
) -> Result<Vec<JumpEvent<T>>> {
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("must be positive and finite, got {horizon}"),
        });
    }
    let rate = spec.total_mass().as_f64() * horizon.as_f64();
    if rate == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = rng::stream(seed, 0);
    let count = Poisson::new(rate)
        .map_err(|e| Error::InvalidLevyMeasure(e.to_string()))?
        .sample(&mut rng) as usize;
    let t_end = horizon.as_f64();
    let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * t_end).collect();
    times.sort_by(f64::total_cmp);
    Ok(times
        .into_iter()
        .map(|t| JumpEvent {
            time: T::lit(t),
            size: spec.sample_size(&mut rng),
        })
        .collect())
}

/// The inter-jump drift `b(m) − ∫_B G(l, m) ν(dl) = −(∫_B l ν(dl))·(m × h)`,
/// a rotation generator pointwise orthogonal to `m`.
pub fn compensated_noise_drift<T: Real>(
    spec: &LevyMeasureSpec<T>,
    m: &Field<T>,
    h: &MaterialField<T>,
) -> Result<Field<T>> {
    m.ensure_same_grid(h.field())?;
    let mean = spec.mean_jump();
    Ok(g_op_unchecked(m, h).scaled(-mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{random_field, Grid};
    use crate::marcus::{compensator_drift, increment_integral};
    use crate::vec3::Vec3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Spec = LevyMeasureSpec<f64>;

    fn families() -> Vec<Spec> {
        vec![
            Spec::atoms([(0.5, 2.0)]).unwrap(),
            Spec::atoms([(0.3, 1.0), (-0.3, 1.0), (0.9, 0.5)]).unwrap(),
            Spec::uniform(1.5, 0.8).unwrap(),
            Spec::power_law(0.5, 1.0, 0.01).unwrap(),
            Spec::power_law(1.5, 0.2, 0.05).unwrap(),
        ]
    }

    #[test]
    fn construction_invariants() {
        assert!(Spec::atoms([(0.0, 1.0)]).is_err());
        assert!(Spec::atoms([(1.2, 1.0)]).is_err());
        assert!(Spec::atoms([(0.5, 0.0)]).is_err());
        assert!(Spec::atoms([(-1.0, 1.0)]).is_ok());
        assert!(Spec::uniform(1.0, 1.5).is_err());
        assert!(Spec::uniform(0.0, 0.5).is_err());
        assert!(Spec::power_law(0.5, 1.0, 0.0).is_err());
        assert!(Spec::power_law(2.0, 1.0, 0.1).is_err());
        assert!(Spec::power_law(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let s = Spec::power_law(0.5, 1.0, 0.01).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"family\":\"power_law\""));
        let back: Spec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"family":"power_law","alpha":0.5,"scale":1.0,"cutoff":0.0}"#;
        assert!(serde_json::from_str::<Spec>(bad).is_err());
    }

    #[test]
    fn moments_examples() {
        let s = Spec::atoms([(0.5, 2.0)]).unwrap();
        assert_eq!(s.total_mass(), 2.0);
        assert_eq!(s.mean_jump(), 1.0);
        let s = Spec::atoms([(0.3, 1.0), (-0.3, 1.0)]).unwrap();
        assert_eq!(s.mean_jump(), 0.0);
        let s = Spec::power_law(0.5, 1.0, 0.01).unwrap();
        assert!((s.total_mass() - 36.0).abs() < 1e-12);
        assert_eq!(s.mean_jump(), 0.0);
        assert_eq!(Spec::empty().total_mass(), 0.0);
    }

    #[test]
    fn quadrature_matches_closed_form_moments() {
        for s in families() {
            let q = s.quadrature();
            let mass: f64 = q.iter().map(|(_, w)| w).sum();
            let mean: f64 = q.iter().map(|(l, w)| l * w).sum();
            assert!((mass - s.total_mass()).abs() <= 1e-12 * s.total_mass(), "{s:?}");
            assert!((mean - s.mean_jump()).abs() <= 1e-12, "{s:?}");
            // second moment of the power law in closed form
            if let LevyFamily::PowerLaw { alpha, scale, cutoff } = *s.family() {
                let m2: f64 = q.iter().map(|(l, w)| l * l * w).sum();
                let exact = 2.0 * scale * (1.0 - cutoff.powf(2.0 - alpha)) / (2.0 - alpha);
                assert!((m2 - exact).abs() <= 1e-12 * exact);
            }
        }
    }

    #[test]
    fn empty_measure_samples_nothing() {
        assert!(sample_prm(&Spec::empty(), 3.0, 1).unwrap().is_empty());
    }

    #[test]
    fn rejects_nonpositive_horizon() {
        let s = Spec::atoms([(0.5, 2.0)]).unwrap();
        assert!(sample_prm(&s, 0.0, 1).is_err());
        assert!(sample_prm(&s, -1.0, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_sorted() {
        for s in families() {
            let a = sample_prm(&s, 2.0, 99).unwrap();
            let b = sample_prm(&s, 2.0, 99).unwrap();
            assert_eq!(a, b);
            assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
            assert!(a.iter().all(|e| e.time >= 0.0 && e.time <= 2.0));
            assert!(a.iter().all(|e| e.size != 0.0 && e.size.abs() <= 1.0));
        }
    }

    #[test]
    fn poisson_mean_count() {
        let s = Spec::atoms([(0.5, 2.0)]).unwrap();
        let n = 100_000u64;
        let total: usize = (0..n).map(|seed| sample_prm(&s, 1.0, seed).unwrap().len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean count {mean}");
    }

    #[test]
    fn size_distribution_kolmogorov_smirnov() {
        let n = 100_000;
        let critical = 1.628 / (n as f64).sqrt(); // 1% level
        for s in families() {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut xs: Vec<f64> = (0..n).map(|_| s.sample_size(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let mut d: f64 = 0.0;
            let mut i = 0;
            while i < n {
                let mut j = i;
                while j + 1 < n && xs[j + 1] == xs[i] {
                    j += 1;
                }
                let f = s.normalized_cdf(xs[i]);
                let below = i as f64 / n as f64;
                let upto = (j + 1) as f64 / n as f64;
                let f_left = s.normalized_cdf(xs[i] - 1e-12);
                d = d.max((upto - f).abs()).max((below - f_left).abs());
                i = j + 1;
            }
            assert!(d < critical, "{s:?}: KS {d} >= {critical}");
        }
    }

    fn poisson_pmf(k: usize, mu: f64) -> f64 {
        let mut p = (-mu).exp();
        for i in 1..=k {
            p *= mu / i as f64;
        }
        p
    }

    #[test]
    fn disjoint_window_counts_independent_poisson() {
        // joint law of counts in [0, ½) and [½, 1] is Poisson(μ) ⊗ Poisson(μ)
        let s = Spec::uniform(1.0, 1.0).unwrap(); // mass 2, μ = 1 per window
        let runs = 10_000;
        let k_max = 3; // counts >= 3 pooled
        let mut table = vec![vec![0usize; k_max + 1]; k_max + 1];
        for seed in 0..runs {
            let ev = sample_prm(&s, 1.0, 1_000 + seed).unwrap();
            let a = ev.iter().filter(|e| e.time < 0.5).count().min(k_max);
            let b = ev.iter().filter(|e| e.time >= 0.5).count().min(k_max);
            table[a][b] += 1;
        }
        let mu = 1.0;
        let p = |k: usize| {
            if k < k_max {
                poisson_pmf(k, mu)
            } else {
                1.0 - (0..k_max).map(|j| poisson_pmf(j, mu)).sum::<f64>()
            }
        };
        let mut chi2 = 0.0;
        for a in 0..=k_max {
            for b in 0..=k_max {
                let e = runs as f64 * p(a) * p(b);
                chi2 += (table[a][b] as f64 - e).powi(2) / e;
            }
        }
        let df = ((k_max + 1) * (k_max + 1) - 1) as f64;
        // Wilson–Hilferty 99% quantile
        let z = 2.326_347_874;
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }

    #[test]
    fn compensated_drift_examples() {
        let grid = Grid::one_d(8).unwrap();
        let h = MaterialField::new(Field::constant(grid, Vec3::e3()));
        let m = Field::constant(grid, Vec3::<f64>::e1());
        let s = Spec::atoms([(0.5, 2.0)]).unwrap();
        let d = compensated_noise_drift(&s, &m, &h).unwrap();
        assert!(d.values().iter().all(|v| (*v - Vec3::e2()).norm() < 1e-15));
        let sym = Spec::atoms([(0.3, 1.0), (-0.3, 1.0)]).unwrap();
        let d = compensated_noise_drift(&sym, &m, &h).unwrap();
        assert!(d.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn compensated_drift_orthogonal_and_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = Grid::one_d(16).unwrap();
        for s in families() {
            let m: Field<f64> = random_field(grid, 1.0, &mut rng);
            let h = MaterialField::new(random_field(grid, 1.0, &mut rng));
            let d = compensated_noise_drift(&s, &m, &h).unwrap();
            for (a, b) in d.values().iter().zip(m.values()) {
                assert!(a.dot(*b).abs() < 1e-13);
            }
            let b = compensator_drift(&m, &s, &h).unwrap();
            let ig = increment_integral(&m, &s, &h).unwrap();
            let other = b.sub(&ig).unwrap();
            let err = crate::grid::l2_norm(&other.sub(&d).unwrap());
            assert!(err < 1e-10, "{s:?}: {err}");
        }
    }
}
