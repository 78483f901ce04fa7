//! Cross-entropy minimization of the Monte Carlo relaxed cost over
//! piecewise constant Young measures.
//!
//! Each generation samples candidate rows from per-interval Dirichlet
//! distributions, evaluates every candidate on the same path seeds, and
//! refits the Dirichlet means to the elite set. The current mean and the
//! previous elites are re-entered every generation, so the elite mean can
//! only rise through sampling noise.

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{monte_carlo_cost, project_to_simplex, CostEstimate, Problem, YoungMeasure};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, stream};
use crate::scalar::Real;

const MIN_ALPHA: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub max_iterations: usize,
    /// Weight of the elite average in the mean update.
    pub smoothing: f64,
    pub paths_per_evaluation: usize,
    /// Stop once, for `patience` consecutive generations, the elite mean
    /// moves by less than this plus two combined standard errors and no
    /// Dirichlet mean weight moves by more than `weight_tolerance`.
    pub tolerance: f64,
    pub weight_tolerance: f64,
    pub patience: usize,
    /// Dirichlet concentration; `None` uses the number of control points.
    pub concentration: Option<f64>,
    /// Number of equal time intervals of the searched measures.
    pub intervals: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population: 32,
            elite_fraction: 0.25,
            max_iterations: 40,
            smoothing: 0.7,
            paths_per_evaluation: 64,
            tolerance: 1e-6,
            weight_tolerance: 1e-2,
            patience: 3,
            concentration: None,
            intervals: 4,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(invalid("population", "must be at least 4"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(invalid("elite_fraction", "must lie in (0, 1)"));
        }
        if self.elite_fraction * (self.population as f64) < 1.0 {
            return Err(invalid("elite_fraction", "population × fraction must be at least 1"));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(invalid("smoothing", "must lie in (0, 1]"));
        }
        if !(self.tolerance > 0.0) || !(self.weight_tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if self.max_iterations == 0 || self.patience == 0 || self.intervals == 0 {
            return Err(invalid("max_iterations", "iterations, patience and intervals must be positive"));
        }
        if self.paths_per_evaluation < 2 {
            return Err(invalid("paths_per_evaluation", "need at least two paths"));
        }
        if let Some(c) = self.concentration {
            if !(c > 0.0) || !c.is_finite() {
                return Err(invalid("concentration", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).floor() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub elite_mean: f64,
    /// Mean of the elite standard errors. The elites share path seeds, so
    /// their errors are correlated and this is the honest bound on the
    /// error of the elite mean.
    pub elite_stderr: f64,
    pub best_cost: f64,
    pub failed_candidates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct OptimizationReport<T: Real> {
    /// Winner of the final generation. The previous winner is re-entered
    /// every generation, so this is the best candidate under common seeds.
    pub measure: YoungMeasure<T>,
    /// Its cost on fresh path seeds.
    pub estimate: CostEstimate<T>,
    /// Its cost as seen during the search.
    pub in_search: CostEstimate<T>,
    pub dirac: YoungMeasure<T>,
    /// Cost of the Dirac projection on the same fresh seeds.
    pub dirac_estimate: CostEstimate<T>,
    pub history: Vec<GenerationRecord>,
    pub converged: bool,
}

impl<T: Real> OptimizationReport<T> {
    /// Dirac cost minus relaxed cost.
    pub fn relaxation_gap(&self) -> T {
        self.dirac_estimate.estimate - self.estimate.estimate
    }

    /// Fresh and in-search estimates agree within `k` combined standard errors.
    pub fn selection_bias_ok(&self, k: f64) -> bool {
        let d = (self.estimate.estimate - self.in_search.estimate).abs().as_f64();
        let s = (self.estimate.stderr.powi(2) + self.in_search.stderr.powi(2)).sqrt().as_f64();
        d <= k * s + 1e-12 * self.estimate.estimate.abs().as_f64().max(1.0)
    }
}

/// Elite means never rise by more than `k` pooled standard errors.
pub fn history_is_monotone(history: &[GenerationRecord], k: f64) -> bool {
    history.windows(2).all(|w| {
        let slack = k * (w[0].elite_stderr.powi(2) + w[1].elite_stderr.powi(2)).sqrt();
        w[1].elite_mean <= w[0].elite_mean + slack + 1e-12 * w[0].elite_mean.abs().max(1.0)
    })
}

/// Each row replaced by the Dirac at its largest entry; ties go to the
/// lowest control index.
pub fn project_to_dirac<T: Real>(measure: &YoungMeasure<T>) -> YoungMeasure<T> {
    let indices: Vec<usize> = measure
        .weights()
        .iter()
        .map(|row| {
            let mut best = 0;
            for (k, w) in row.iter().enumerate() {
                if *w > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    YoungMeasure::dirac(measure.knots().to_vec(), &indices, measure.controls()).expect("valid indices")
}

fn sample_row<T: Real, R: rand::Rng + ?Sized>(mean: &[T], concentration: f64, rng: &mut R) -> Vec<T> {
    let draws: Vec<f64> = mean
        .iter()
        .map(|m| {
            let alpha = (concentration * m.as_f64()).max(MIN_ALPHA);
            Gamma::new(alpha, 1.0).expect("positive shape").sample(rng)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        let raw: Vec<T> = draws.iter().map(|d| T::lit(d / total)).collect();
        project_to_simplex(&raw)
    } else {
        // every gamma draw underflowed: fall back to the mean's argmax
        let mut row = vec![T::zero(); mean.len()];
        let best = (0..mean.len()).fold(0, |b, k| if mean[k] > mean[b] { k } else { b });
        row[best] = T::one();
        row
    }
}

fn evaluate<T: Real>(
    problem: &Problem<T>,
    candidates: &[YoungMeasure<T>],
    paths: usize,
    seed: u64,
) -> Vec<Result<CostEstimate<T>>> {
    candidates
        .par_iter()
        .map(|c| {
            let e = monte_carlo_cost(problem, c, paths, seed)?;
            if e.estimate.is_finite() {
                Ok(e)
            } else {
                Err(Error::Optimization(format!("non-finite cost {}", e.estimate)))
            }
        })
        .collect()
}

fn fresh_seed(master: u64) -> u64 {
    derive_seed(master, u64::MAX)
}

/// Searches for the Young measure with the smallest Monte Carlo cost.
pub fn cross_entropy_minimize<T: Real>(
    problem: &Problem<T>,
    opt: &OptimizerConfig,
) -> Result<OptimizationReport<T>> {
    opt.validate()?;
    let k = problem.sim.controls.len();
    let knots = YoungMeasure::uniform_knots(problem.sim.horizon, opt.intervals);
    let mut mean = YoungMeasure::uniform(knots, k)?;
    let concentration = opt.concentration.unwrap_or(k as f64);
    let n_elite = opt.elite_count();
    let smoothing = T::lit(opt.smoothing);

    let mut elites: Vec<YoungMeasure<T>> = Vec::new();
    let mut best: Option<(YoungMeasure<T>, CostEstimate<T>)> = None;
    let mut history: Vec<GenerationRecord> = Vec::new();
    let mut calm = 0usize;
    let mut converged = false;

    for generation in 0..opt.max_iterations {
        let mut rng = stream(opt.seed, 1 + generation as u64);
        let mut candidates = vec![mean.clone()];
        candidates.extend(elites.iter().cloned());
        if k > 1 {
            while candidates.len() < opt.population {
                let mut c = mean.clone();
                for j in 0..c.intervals() {
                    let row = sample_row(mean.row(j), concentration, &mut rng);
                    c.set_row(j, &row)?;
                }
                candidates.push(c);
            }
        }
        candidates.truncate(opt.population);

        let crn = derive_seed(derive_seed(opt.seed, 0), generation as u64);
        let results = evaluate(problem, &candidates, opt.paths_per_evaluation, crn);
        let mut scored: Vec<(usize, CostEstimate<T>)> = Vec::new();
        let mut first_error = None;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(e) => scored.push((i, e)),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        let failed = candidates.len() - scored.len();
        if scored.is_empty() {
            return Err(Error::Optimization(format!(
                "all {} candidates of generation {generation} failed; first error: {}",
                candidates.len(),
                first_error.map_or_else(String::new, |e| e.to_string())
            )));
        }
        scored.sort_by(|a, b| {
            a.1.estimate
                .partial_cmp(&b.1.estimate)
                .expect("finite estimates")
                .then(a.0.cmp(&b.0))
        });
        let top = &scored[..n_elite.min(scored.len())];
        let ne = top.len() as f64;
        let elite_mean = top.iter().map(|(_, e)| e.estimate.as_f64()).sum::<f64>() / ne;
        let elite_stderr = top.iter().map(|(_, e)| e.stderr.as_f64()).sum::<f64>() / ne;
        let (bi, be) = top[0];
        best = Some((candidates[bi].clone(), be));
        history.push(GenerationRecord {
            generation,
            elite_mean,
            elite_stderr,
            best_cost: be.estimate.as_f64(),
            failed_candidates: failed,
        });

        elites = top.iter().map(|(i, _)| candidates[*i].clone()).collect();
        if k == 1 {
            converged = true;
            break;
        }
        let mut moved = 0.0f64;
        for j in 0..mean.intervals() {
            let avg: Vec<T> = (0..k)
                .map(|c| elites.iter().map(|e| e.row(j)[c]).sum::<T>() / T::from_usize_lossy(elites.len()))
                .collect();
            let row: Vec<T> = mean
                .row(j)
                .iter()
                .zip(&avg)
                .map(|(m, a)| (T::one() - smoothing) * *m + smoothing * *a)
                .collect();
            let before = mean.row(j).to_vec();
            mean.set_row(j, &row)?;
            for (a, b) in before.iter().zip(mean.row(j)) {
                moved = moved.max((*a - *b).abs().as_f64());
            }
        }

        if let [.., prev, last] = history.as_slice() {
            let noise = 2.0 * (prev.elite_stderr.powi(2) + last.elite_stderr.powi(2)).sqrt();
            let still = (last.elite_mean - prev.elite_mean).abs() <= opt.tolerance + noise;
            if still && moved <= opt.weight_tolerance {
                calm += 1;
            } else {
                calm = 0;
            }
        }
        if calm >= opt.patience {
            converged = true;
            break;
        }
    }

    let (measure, in_search) = best.expect("at least one generation evaluated");
    let fresh = fresh_seed(opt.seed);
    let estimate = monte_carlo_cost(problem, &measure, opt.paths_per_evaluation, fresh)?;
    let dirac = project_to_dirac(&measure);
    let dirac_estimate = monte_carlo_cost(problem, &dirac, opt.paths_per_evaluation, fresh)?;
    Ok(OptimizationReport {
        measure,
        estimate,
        in_search,
        dirac,
        dirac_estimate,
        history,
        converged,
    })
}

/// Evaluates every Dirac measure on `intervals` equal pieces with common
/// path seeds and returns the cheapest. Intended as a brute-force baseline.
pub fn exhaustive_dirac_search<T: Real>(
    problem: &Problem<T>,
    intervals: usize,
    n_paths: usize,
    seed: u64,
) -> Result<(YoungMeasure<T>, CostEstimate<T>)> {
    let k = problem.sim.controls.len();
    let count = (k as u128).checked_pow(intervals as u32).filter(|c| *c <= 1 << 16);
    let Some(count) = count else {
        return Err(invalid("intervals", "too many Dirac measures to enumerate"));
    };
    let knots = YoungMeasure::uniform_knots(problem.sim.horizon, intervals);
    let candidates: Vec<YoungMeasure<T>> = (0..count as usize)
        .map(|mut code| {
            let idx: Vec<usize> = (0..intervals)
                .map(|_| {
                    let i = code % k;
                    code /= k;
                    i
                })
                .collect();
            YoungMeasure::dirac(knots.clone(), &idx, k)
        })
        .collect::<Result<_>>()?;
    let results = evaluate(problem, &candidates, n_paths, seed);
    let mut best: Option<(usize, CostEstimate<T>)> = None;
    for (i, r) in results.into_iter().enumerate() {
        if let Ok(e) = r {
            if best.is_none_or(|(_, b)| e.estimate < b.estimate) {
                best = Some((i, e));
            }
        }
    }
    let (i, e) = best.ok_or_else(|| Error::Optimization("every Dirac measure failed".into()))?;
    Ok((candidates[i].clone(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn knots() -> Vec<f64> {
        vec![0.0, 0.5, 1.0]
    }

    #[test]
    fn dirac_projection_examples() {
        let y = YoungMeasure::new(knots(), vec![vec![0.2, 0.5, 0.3], vec![0.0, 0.0, 1.0]]).unwrap();
        let d = project_to_dirac(&y);
        assert_eq!(d.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(d.row(1), &[0.0, 0.0, 1.0]);
        assert_eq!(project_to_dirac(&d), d);
        let tie = YoungMeasure::new(vec![0.0, 1.0], vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(project_to_dirac(&tie).row(0), &[1.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let mut c = OptimizerConfig {
            population: 3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.population = 8;
        c.elite_fraction = 0.1;
        assert!(c.validate().is_err());
        c.elite_fraction = 0.25;
        c.tolerance = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn dirichlet_rows_are_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mean in [vec![0.25; 4], vec![1.0, 0.0, 0.0, 0.0], vec![0.97, 0.01, 0.01, 0.01]] {
            for _ in 0..200 {
                let r: Vec<f64> = sample_row(&mean, 4.0, &mut rng);
                assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!(r.iter().all(|w| *w >= 0.0));
            }
        }
    }

    #[test]
    fn monotone_history_check() {
        let rec = |m: f64, s: f64| GenerationRecord {
            generation: 0,
            elite_mean: m,
            elite_stderr: s,
            best_cost: m,
            failed_candidates: 0,
        };
        assert!(history_is_monotone(&[rec(3.0, 0.1), rec(3.1, 0.1), rec(2.0, 0.0)], 2.0));
        assert!(!history_is_monotone(&[rec(3.0, 0.1), rec(3.5, 0.1)], 2.0));
    }
}
