//! Executable property suites with a machine-readable report.
//!
//! Everything here runs in `f64`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControlSchedule;
use crate::error::{invalid, Result};
use crate::grid::{
    gradient_norm_squared, h1_norm_squared, l2_norm, l2_norm_squared, l4_norm_fourth, neumann_laplacian,
    random_field, Field, Grid, SpectralDecomposition,
};
use crate::integrator::{simulate, simulate_at, SimConfig, Toggles};
use crate::levy::LevyMeasureSpec;
use crate::marcus::{compensator_drift, g_op, increment_integral, JumpMap, JumpRule, MaterialField};
use crate::rng::derive_seed;
use crate::vec3::Vec3;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub statistics: BTreeMap<String, f64>,
    pub subchecks: Vec<SubCheck>,
    pub witnesses: Vec<String>,
    pub warnings: Vec<String>,
}

const MAX_WITNESSES: usize = 5;

impl CheckRecord {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pass: true,
            ..Default::default()
        }
    }

    fn stat(&mut self, key: impl Into<String>, value: f64) {
        self.statistics.insert(key.into(), value);
    }

    fn sub(&mut self, name: impl Into<String>, pass: bool, value: f64, threshold: f64) {
        self.pass &= pass;
        self.subchecks.push(SubCheck {
            name: name.into(),
            pass,
            value,
            threshold,
        });
    }

    fn witness(&mut self, w: impl FnOnce() -> String) {
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(w());
        }
    }

    pub fn subcheck(&self, name: &str) -> Option<&SubCheck> {
        self.subchecks.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

/// Least-squares fit of `log y` against `log x`: `(slope, intercept, R²)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

fn smooth_material<R: Rng>(grid: Grid, rng: &mut R) -> MaterialField<f64> {
    let mut coeff = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let (a, b, c) = (coeff(), coeff(), coeff());
    MaterialField::new(Field::from_fn(grid, |[x, y]: [f64; 2]| {
        a + b * (std::f64::consts::PI * x).cos() + c * (std::f64::consts::PI * y).cos()
    }))
}

/// Rotation, growth, Lipschitz, remainder-order and identity checks on the
/// jump map, over 10³ random samples.
pub fn check_marcus_lemmas(seed: u64, rule: JumpRule) -> CheckRecord {
    const SAMPLES: usize = 1000;
    let mut rec = CheckRecord::new("marcus_lemmas");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids = [Grid::one_d(32).expect("grid"), Grid::two_d(8).expect("grid")];

    let mut worst_iso = 0.0f64;
    let mut worst_growth_margin = f64::NEG_INFINITY;
    let mut worst_growth_ratio = 0.0f64;
    let mut worst_lip = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut slopes = Vec::new();

    for i in 0..SAMPLES {
        let grid = grids[i % 2];
        let h = smooth_material(grid, &mut rng);
        let l: f64 = rng.random_range(-1.0..=1.0);
        let x: Field<f64> = random_field(grid, 1.0, &mut rng);
        let y: Field<f64> = random_field(grid, 1.0, &mut rng);

        let px = rule.jump(l, &x, &h).expect("finite jump");
        let iso = px
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| (a.norm() - b.norm()).abs() / b.norm().max(1e-300))
            .fold(0.0, f64::max);
        if iso > 1e-13 {
            rec.witness(|| format!("isometry: sample {i}, l = {l}, relative defect {iso:e}"));
        }
        worst_iso = worst_iso.max(iso);

        let d = grid.dimension() as f64;
        let lip = h.lipschitz_constant();
        let bound = (2.0 + d * (l * lip).powi(2)).sqrt();
        let ratio = h1_norm_squared(&px).sqrt() / (1.0 + h1_norm_squared(&x).sqrt());
        if ratio > bound {
            rec.witness(|| format!("H1 growth: sample {i}, l = {l}, ratio {ratio} > {bound}"));
        }
        worst_growth_ratio = worst_growth_ratio.max(ratio);
        worst_growth_margin = worst_growth_margin.max(ratio - bound);

        let gx = rule.increment(l, &x, &h).expect("finite");
        let gy = rule.increment(l, &y, &h).expect("finite");
        let diff = l2_norm(&x.sub(&y).expect("grid"));
        let lratio = l2_norm(&gx.sub(&gy).expect("grid")) / diff;
        if lratio > 2.0 + 1e-9 {
            rec.witness(|| format!("G-Lipschitz: sample {i}, l = {l}, ratio {lratio}"));
        }
        worst_lip = worst_lip.max(lratio);

        let hx = rule.remainder(l, &x, &h).expect("finite");
        let lg = g_op(&x, &h).expect("grid").scaled(l);
        let resid = l2_norm(&gx.sub(&hx).expect("grid").sub(&lg).expect("grid"));
        let rel = resid / (1.0 + l2_norm(&lg));
        if rel > 1e-14 {
            rec.witness(|| format!("G - H = l g: sample {i}, l = {l}, residual {resid:e}"));
        }
        worst_identity = worst_identity.max(rel);

        if i % 50 == 0 {
            let ls: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
            let hs: Vec<f64> = ls
                .iter()
                .map(|&s| l2_norm(&rule.remainder(s, &x, &h).expect("finite")))
                .collect();
            let slope = if hs.iter().all(|v| *v > 0.0) {
                fit_loglog(&ls, &hs).0
            } else {
                f64::NAN
            };
            if !((slope - 2.0).abs() <= 0.1) {
                rec.witness(|| format!("H order: sample {i}, fitted slope {slope}"));
            }
            slopes.push(slope);
        }
    }

    let worst_slope = slopes
        .iter()
        .map(|s| if s.is_nan() { f64::INFINITY } else { (s - 2.0).abs() })
        .fold(0.0, f64::max);

    // everything vanishes at l = 0
    let grid = grids[0];
    let h = smooth_material(grid, &mut rng);
    let x: Field<f64> = random_field(grid, 1.0, &mut rng);
    let at_zero = [
        l2_norm(&rule.jump(0.0, &x, &h).expect("finite").sub(&x).expect("grid")),
        l2_norm(&rule.increment(0.0, &x, &h).expect("finite")),
        l2_norm(&rule.remainder(0.0, &x, &h).expect("finite")),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    rec.stat("samples", SAMPLES as f64);
    rec.stat("max_isometry_defect", worst_iso);
    rec.stat("max_h1_growth_ratio", worst_growth_ratio);
    rec.stat("max_g_lipschitz_ratio", worst_lip);
    rec.stat("max_identity_residual", worst_identity);
    rec.stat("min_remainder_slope", slopes.iter().copied().fold(f64::INFINITY, f64::min));
    rec.stat("max_remainder_slope", slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    rec.sub("isometry", worst_iso <= 1e-13, worst_iso, 1e-13);
    rec.sub("h1_growth", worst_growth_margin <= 0.0, worst_growth_margin, 0.0);
    rec.sub("g_lipschitz", worst_lip <= 2.0 + 1e-9, worst_lip, 2.0 + 1e-9);
    rec.sub("remainder_order", worst_slope <= 0.1, worst_slope, 0.1);
    rec.sub("increment_identity", worst_identity <= 1e-14, worst_identity, 1e-14);
    rec.sub("vanish_at_zero", at_zero == 0.0, at_zero, 0.0);
    rec
}

/// `b(m) − ∫ G dν + (∫ l dν)·g(m)` over random fields for each measure.
pub fn check_compensator_identity(specs: &[(String, LevyMeasureSpec<f64>)], seed: u64, tolerance: f64) -> CheckRecord {
    let mut rec = CheckRecord::new("compensator_identity");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, spec) in specs {
        let mut worst = 0.0f64;
        for grid in [Grid::one_d(32).expect("grid"), Grid::two_d(8).expect("grid")] {
            for _ in 0..10 {
                let h = smooth_material(grid, &mut rng);
                let m: Field<f64> = random_field(grid, 1.0, &mut rng);
                let b = compensator_drift(&m, spec, &h).expect("grid");
                let ig = increment_integral(&m, spec, &h).expect("grid");
                let mut r = b.sub(&ig).expect("grid");
                r.axpy(spec.mean_jump(), &g_op(&m, &h).expect("grid")).expect("grid");
                worst = worst.max(l2_norm(&r));
            }
        }
        if worst > tolerance {
            rec.witness(|| format!("{name}: residual {worst:e}"));
        }
        rec.stat(format!("{name}.max_residual"), worst);
        rec.stat(format!("{name}.mean_jump"), spec.mean_jump());
        rec.sub(name.clone(), worst <= tolerance, worst, tolerance);
    }
    rec
}

/// The three families used by the default compensator check.
pub fn default_compensator_specs() -> Vec<(String, LevyMeasureSpec<f64>)> {
    vec![
        ("atoms_symmetric".into(), LevyMeasureSpec::atoms([(-0.3, 1.0), (0.3, 1.0)]).expect("valid")),
        ("atom_single".into(), LevyMeasureSpec::atoms([(0.5, 2.0)]).expect("valid")),
        ("uniform".into(), LevyMeasureSpec::uniform(3.0, 0.8).expect("valid")),
        ("power_law".into(), LevyMeasureSpec::power_law(1.5, 1.0, 1e-3).expect("valid")),
    ]
}

/// Monte Carlo means of the five energy functionals of one configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyFunctionals {
    /// `E sup_t ‖m‖²_{L²}`
    pub sup_l2: f64,
    /// `E ∫ ‖m‖²_{H¹} dt`
    pub int_h1: f64,
    /// `E sup_t ‖m‖⁴_{L⁴}`
    pub sup_l4: f64,
    /// `E sup_t ‖m‖²_{H¹}`
    pub sup_h1: f64,
    /// `E ∫ ‖Δm‖²_{L²} dt`
    pub int_laplacian: f64,
}

impl EnergyFunctionals {
    pub const NAMES: [&'static str; 5] = ["sup_l2", "int_h1", "sup_l4", "sup_h1", "int_laplacian"];

    pub fn as_array(&self) -> [f64; 5] {
        [self.sup_l2, self.int_h1, self.sup_l4, self.sup_h1, self.int_laplacian]
    }

    fn from_path(times: &[f64], states: &[Field<f64>]) -> Self {
        let mut e = Self::default();
        for (i, m) in states.iter().enumerate() {
            let l2 = l2_norm_squared(m);
            let h1 = l2 + gradient_norm_squared(m);
            e.sup_l2 = e.sup_l2.max(l2);
            e.sup_l4 = e.sup_l4.max(l4_norm_fourth(m));
            e.sup_h1 = e.sup_h1.max(h1);
            if let Some(&next) = times.get(i + 1) {
                let dt = next - times[i];
                if dt > 0.0 {
                    e.int_h1 += dt * h1;
                    e.int_laplacian += dt * l2_norm_squared(&neumann_laplacian(m));
                }
            }
        }
        e
    }
}

/// Mean energy functionals over `n_paths` paths; path `i` uses seed
/// `derive_seed(seed, i)` so different step sizes see the same jumps.
pub fn energy_functionals<S: ControlSchedule<f64> + ?Sized>(
    config: &SimConfig<f64>,
    schedule: &S,
    n_paths: usize,
    seed: u64,
) -> Result<EnergyFunctionals> {
    if n_paths == 0 {
        return Err(invalid("n_paths", "need at least one path"));
    }
    let mut cfg = config.clone();
    cfg.snapshot_stride = 1;
    let per_path: Vec<Result<[f64; 5]>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let traj = simulate(&cfg, schedule, derive_seed(seed, i as u64))?;
            Ok(EnergyFunctionals::from_path(&traj.times, &traj.states).as_array())
        })
        .collect();
    let mut sum = [0.0; 5];
    for (i, r) in per_path.into_iter().enumerate() {
        let a = r.map_err(|e| crate::Error::Path {
            path: i,
            source: Box::new(e),
        })?;
        for (s, v) in sum.iter_mut().zip(a) {
            *s += v;
        }
    }
    let n = n_paths as f64;
    Ok(EnergyFunctionals {
        sup_l2: sum[0] / n,
        int_h1: sum[1] / n,
        sup_l4: sum[2] / n,
        sup_h1: sum[3] / n,
        int_laplacian: sum[4] / n,
    })
}

/// Energy functionals at each step size; passes iff all are finite and the
/// coarsest-to-finest ratio of each lies within `[1/1.15, 1.15]`.
pub fn check_energy_estimates<S: ControlSchedule<f64> + ?Sized>(
    config: &SimConfig<f64>,
    schedule: &S,
    n_paths: usize,
    dt_levels: &[f64],
    seed: u64,
) -> CheckRecord {
    const BAND: f64 = 1.15;
    let mut rec = CheckRecord::new("energy_estimates");
    let mut levels = Vec::new();
    for &dt in dt_levels {
        let mut cfg = config.clone();
        cfg.dt_max = dt;
        match energy_functionals(&cfg, schedule, n_paths, seed) {
            Ok(e) => {
                for (name, v) in EnergyFunctionals::NAMES.iter().zip(e.as_array()) {
                    rec.stat(format!("dt={dt:e}.{name}"), v);
                }
                levels.push(e);
            }
            Err(err) => {
                rec.witness(|| format!("dt = {dt:e}: {err}"));
                rec.sub(format!("dt={dt:e}.ran"), false, f64::NAN, 0.0);
            }
        }
    }
    if levels.len() == dt_levels.len() && !levels.is_empty() {
        let coarse = levels[0].as_array();
        let fine = levels[levels.len() - 1].as_array();
        for (k, name) in EnergyFunctionals::NAMES.iter().enumerate() {
            let finite = levels.iter().all(|e| e.as_array()[k].is_finite());
            let ratio = if coarse[k] == fine[k] { 1.0 } else { coarse[k] / fine[k] };
            let ok = finite && ratio.is_finite() && ratio <= BAND && ratio >= 1.0 / BAND;
            if !ok {
                rec.witness(|| format!("{name}: coarse {} fine {} ratio {ratio}", coarse[k], fine[k]));
            }
            rec.sub(format!("{name}.ratio"), ok, ratio, BAND);
        }
    }
    rec.stat("n_paths", n_paths as f64);
    rec
}

/// `E‖m(t₀ + θ) − m(t₀)‖²_{X^{−1/2}}` over the θ levels, with a log-log fit.
pub fn check_increment_moments<S: ControlSchedule<f64> + ?Sized>(
    config: &SimConfig<f64>,
    schedule: &S,
    t0: f64,
    thetas: &[f64],
    n_paths: usize,
    seed: u64,
) -> CheckRecord {
    const MIN_SLOPE: f64 = 0.9;
    const MIN_R2: f64 = 0.95;
    let mut rec = CheckRecord::new("increment_moments");
    if thetas.len() < 2 || thetas.iter().any(|th| !(*th > 0.0 && t0 + th <= config.horizon)) || t0 < 0.0 {
        rec.sub("theta_levels", false, f64::NAN, config.horizon);
        rec.witness(|| "need at least two θ levels with 0 < θ and t₀ + θ ≤ T".into());
        return rec;
    }
    let spectral = SpectralDecomposition::<f64>::new(config.grid());
    let mut times = vec![t0];
    times.extend(thetas.iter().map(|th| t0 + th));
    let per_path: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let states = simulate_at(config, schedule, derive_seed(seed, i as u64), &times)?;
            states[1..]
                .iter()
                .map(|s| spectral.dual_norm_squared(&s.sub(&states[0])?, 0.5))
                .collect()
        })
        .collect();
    let mut means = vec![0.0; thetas.len()];
    for (i, r) in per_path.into_iter().enumerate() {
        match r {
            Ok(v) => {
                for (m, x) in means.iter_mut().zip(v) {
                    *m += x / n_paths as f64;
                }
            }
            Err(e) => {
                rec.witness(|| format!("path {i}: {e}"));
                rec.sub("paths", false, i as f64, 0.0);
                return rec;
            }
        }
    }
    for (th, m) in thetas.iter().zip(&means) {
        rec.stat(format!("theta={th:e}"), *m);
    }
    if means.iter().all(|m| *m == 0.0) {
        rec.warnings.push("all increments vanish; the regression is vacuous".into());
        rec.stat("slope", f64::NAN);
        return rec;
    }
    if means.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        rec.witness(|| format!("non-positive or non-finite moment in {means:?}"));
        rec.sub("moments_positive", false, f64::NAN, 0.0);
        return rec;
    }
    let (slope, _, r2) = fit_loglog(thetas, &means);
    rec.stat("slope", slope);
    rec.stat("r2", r2);
    rec.stat("n_paths", n_paths as f64);
    rec.sub("slope", slope >= MIN_SLOPE, slope, MIN_SLOPE);
    rec.sub("r2", r2 >= MIN_R2, r2, MIN_R2);
    rec
}

/// Noise-only paths (drift and control switched off) must keep `|m(t, ξ)|`
/// equal to `|m₀(ξ)|` in every cell, up to `1e-12` relative to `max(1, |m₀|)`.
pub fn check_noise_isometry<S: ControlSchedule<f64> + ?Sized>(
    config: &SimConfig<f64>,
    schedule: &S,
    n_paths: usize,
    seed: u64,
) -> CheckRecord {
    const TOL: f64 = 1e-12;
    let mut rec = CheckRecord::new("noise_isometry");
    let mut cfg = config.clone();
    cfg.toggles = Toggles {
        drift: false,
        noise: true,
        control: false,
    };
    cfg.snapshot_stride = 1;
    let m0 = cfg.initial.magnitudes();
    let per_path: Vec<Result<(f64, usize)>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let traj = simulate(&cfg, schedule, derive_seed(seed, i as u64))?;
            let worst = traj
                .states
                .iter()
                .flat_map(|s| s.magnitudes().into_iter().zip(&m0).map(|(a, b)| (a - b).abs() / b.max(1.0)))
                .fold(0.0, f64::max);
            Ok((worst, traj.jumps.len()))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut jumps = 0;
    for (i, r) in per_path.into_iter().enumerate() {
        match r {
            Ok((w, n)) => {
                if w > TOL {
                    rec.witness(|| format!("path {i}: magnitude defect {w:e}"));
                }
                worst = worst.max(w);
                jumps += n;
            }
            Err(e) => {
                rec.witness(|| format!("path {i}: {e}"));
                worst = f64::INFINITY;
            }
        }
    }
    if !cfg.levy.is_symmetric() {
        rec.warnings.push("the Lévy measure is not symmetric".into());
    }
    if jumps == 0 {
        rec.warnings.push("no jumps were sampled; the check is vacuous".into());
    }
    rec.stat("n_paths", n_paths as f64);
    rec.stat("total_jumps", jumps as f64);
    rec.sub("magnitude_defect", worst <= TOL, worst, TOL);
    rec
}

/// Errors against a reference and the fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub parameter: String,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
}

impl ConvergenceTable {
    fn fitted(parameter: &str, steps: Vec<f64>, errors: Vec<f64>) -> Self {
        let (slope, r2) = if errors.iter().all(|e| *e > 0.0 && e.is_finite()) && steps.len() >= 2 {
            let (s, _, r2) = fit_loglog(&steps, &errors);
            (s, r2)
        } else {
            (f64::NAN, f64::NAN)
        };
        Self {
            parameter: parameter.into(),
            steps,
            errors,
            slope,
            r2,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},error", self.parameter)?;
        for (s, e) in self.steps.iter().zip(&self.errors) {
            writeln!(w, "{s:e},{e:e}")?;
        }
        Ok(())
    }
}

/// Mean `‖m_dt(T) − m_ref(T)‖_{L²}` over paths, the reference run using
/// step `reference_dt` with the same jumps.
pub fn dt_sweep<S: ControlSchedule<f64> + ?Sized>(
    config: &SimConfig<f64>,
    schedule: &S,
    dts: &[f64],
    reference_dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ConvergenceTable> {
    let finals = |dt: f64| -> Result<Vec<Field<f64>>> {
        let mut cfg = config.clone();
        cfg.dt_max = dt;
        cfg.snapshot_stride = usize::MAX;
        (0..n_paths)
            .into_par_iter()
            .map(|i| Ok(simulate(&cfg, schedule, derive_seed(seed, i as u64))?.final_state().clone()))
            .collect()
    };
    let reference = finals(reference_dt)?;
    let mut errors = Vec::new();
    for &dt in dts {
        let f = finals(dt)?;
        let mut e = 0.0;
        for (a, b) in f.iter().zip(&reference) {
            e += l2_norm(&a.sub(b)?) / n_paths as f64;
        }
        errors.push(e);
    }
    Ok(ConvergenceTable::fitted("dt", dts.to_vec(), errors))
}

/// `‖b_ε(m) − b_ref(m)‖_{L²}` for power-law measures truncated at each `ε`;
/// the expected rate is `ε^{2−α}`.
pub fn epsilon_sweep(
    alpha: f64,
    scale: f64,
    cutoffs: &[f64],
    reference_cutoff: f64,
    grid: Grid,
    seed: u64,
) -> Result<ConvergenceTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = smooth_material(grid, &mut rng);
    let m: Field<f64> = random_field(grid, 1.0, &mut rng);
    let b = |eps: f64| -> Result<Field<f64>> {
        compensator_drift(&m, &LevyMeasureSpec::power_law(alpha, scale, eps)?, &h)
    };
    let reference = b(reference_cutoff)?;
    let errors = cutoffs
        .iter()
        .map(|&eps| Ok(l2_norm(&b(eps)?.sub(&reference)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceTable::fitted("epsilon", cutoffs.to_vec(), errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        let (s, c, r2) = fit_loglog(&xs, &ys);
        assert!((s - 1.7).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_functionals_of_constant_path() {
        let g = Grid::one_d(8).unwrap();
        let m = Field::constant(g, Vec3::new(2.0, 0.0, 0.0));
        let e = EnergyFunctionals::from_path(&[0.0, 0.5, 1.0], &[m.clone(), m.clone(), m]);
        assert_eq!(e.sup_l2, 4.0);
        assert_eq!(e.sup_l4, 16.0);
        assert_eq!(e.sup_h1, 4.0);
        assert_eq!(e.int_h1, 4.0);
        assert_eq!(e.int_laplacian, 0.0);
    }

    #[test]
    fn report_passes_only_if_all_checks_pass() {
        let ok = CheckRecord::new("a");
        let mut bad = CheckRecord::new("b");
        bad.sub("x", false, 1.0, 0.0);
        assert!(VerifyReport::new(vec![ok.clone()]).pass);
        assert!(!VerifyReport::new(vec![ok, bad]).pass);
    }
}
