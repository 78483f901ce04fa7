use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ControlSchedule, CostAccumulator, CostSpec};
use crate::error::{invalid, Error, Result};
use crate::integrator::{simulate_observed, SimConfig};
use crate::rng::derive_seed;
use crate::scalar::Real;

/// A simulation configuration paired with a running cost.
#[derive(Clone, Debug)]
pub struct Problem<T: Real> {
    pub sim: SimConfig<T>,
    pub cost: CostSpec<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(sim: SimConfig<T>, cost: CostSpec<T>) -> Result<Self> {
        sim.validate()?;
        sim.initial.ensure_same_grid(cost.target())?;
        Ok(Self { sim, cost })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate<T> {
    pub estimate: T,
    pub stderr: T,
    pub n_paths: usize,
}

/// Relaxed cost of a single path, accumulated while it is simulated.
pub fn path_cost<T: Real, S: ControlSchedule<T> + ?Sized>(
    problem: &Problem<T>,
    schedule: &S,
    seed: u64,
) -> Result<T> {
    let mut acc = CostAccumulator::new(schedule, &problem.cost, &problem.sim.controls);
    let mut failure = None;
    simulate_observed(&problem.sim, schedule, seed, |t, m| {
        if failure.is_none() {
            if let Err(e) = acc.push(t, m) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    acc.finish()
}

/// Sample mean and standard error of the pathwise relaxed cost. Path `i`
/// uses seed `derive_seed(master_seed, i)`; the reduction runs in path order.
pub fn monte_carlo_cost<T: Real, S: ControlSchedule<T> + ?Sized>(
    problem: &Problem<T>,
    schedule: &S,
    n_paths: usize,
    master_seed: u64,
) -> Result<CostEstimate<T>> {
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least two paths"));
    }
    schedule.check_compatible(&problem.sim.controls)?;
    let costs: Vec<Result<T>> = (0..n_paths)
        .into_par_iter()
        .map(|i| path_cost(problem, schedule, derive_seed(master_seed, i as u64)))
        .collect();

    let mut mean = T::zero();
    let mut m2 = T::zero();
    for (i, c) in costs.into_iter().enumerate() {
        let x = c.map_err(|e| Error::Path {
            path: i,
            source: Box::new(e),
        })?;
        let k = T::from_usize_lossy(i + 1);
        let delta = x - mean;
        mean += delta / k;
        m2 += delta * (x - mean);
    }
    let n = T::from_usize_lossy(n_paths);
    let var = m2 / (n - T::one());
    Ok(CostEstimate {
        estimate: mean,
        stderr: (var / n).sqrt(),
        n_paths,
    })
}
