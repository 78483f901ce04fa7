use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-sum tolerance for probability vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidYoungMeasure(msg.into())
}

pub(crate) fn validate_knots<T: Real>(knots: &[T]) -> Result<()> {
    if knots.len() < 2 {
        return Err(bad("need at least two time knots"));
    }
    if knots[0] != T::zero() {
        return Err(bad(format!("first knot must be 0, got {}", knots[0])));
    }
    if !knots.iter().all(|t| t.is_finite()) {
        return Err(bad("knots must be finite"));
    }
    if !knots.windows(2).all(|w| w[0] < w[1]) {
        return Err(bad("knots must be strictly increasing"));
    }
    Ok(())
}

/// Index `j` of the interval `[t_j, t_{j+1})` containing `t`; the horizon
/// itself belongs to the last interval.
pub(crate) fn interval_index<T: Real>(knots: &[T], t: T) -> Result<usize> {
    let horizon = *knots.last().expect("validated knots");
    if !(t >= T::zero() && t <= horizon) {
        return Err(Error::TimeOutOfRange {
            t: t.as_f64(),
            horizon: horizon.as_f64(),
        });
    }
    let j = knots.partition_point(|&k| k <= t);
    Ok(j.saturating_sub(1).min(knots.len() - 2))
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut u: Vec<T> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - T::one()) / T::from_usize_lossy(j + 1);
        if uj - t > T::zero() {
            tau = t;
        }
    }
    let mut w: Vec<T> = v.iter().map(|&x| (x - tau).max(T::zero())).collect();
    // final renormalization keeps the row sum at 1 to rounding
    let s: T = w.iter().copied().sum();
    if s > T::zero() {
        for x in &mut w {
            *x /= s;
        }
    }
    w
}

/// A relaxed control: piecewise constant in time, a probability vector over
/// the control grid on each interval `[t_j, t_{j+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "YoungMeasureRepr<T>", into = "YoungMeasureRepr<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct YoungMeasure<T: Real> {
    knots: Vec<T>,
    weights: Vec<Vec<T>>,
}

/// Serialized form: knots plus the weight matrix flattened row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungMeasureRepr<T> {
    pub knots: Vec<T>,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<T>,
}

impl<T: Real> TryFrom<YoungMeasureRepr<T>> for YoungMeasure<T> {
    type Error = Error;
    fn try_from(r: YoungMeasureRepr<T>) -> Result<Self> {
        if r.weights.len() != r.rows * r.cols || r.cols == 0 {
            return Err(bad(format!(
                "{} weights do not form a {}x{} matrix",
                r.weights.len(),
                r.rows,
                r.cols
            )));
        }
        let weights = r.weights.chunks(r.cols).map(<[T]>::to_vec).collect();
        YoungMeasure::new(r.knots, weights)
    }
}

impl<T: Real> From<YoungMeasure<T>> for YoungMeasureRepr<T> {
    fn from(y: YoungMeasure<T>) -> Self {
        Self {
            rows: y.weights.len(),
            cols: y.weights.first().map_or(0, Vec::len),
            weights: y.weights.into_iter().flatten().collect(),
            knots: y.knots,
        }
    }
}

impl<T: Real> YoungMeasure<T> {
    pub fn new(knots: Vec<T>, weights: Vec<Vec<T>>) -> Result<Self> {
        validate_knots(&knots)?;
        if weights.len() != knots.len() - 1 {
            return Err(bad(format!(
                "{} rows for {} intervals",
                weights.len(),
                knots.len() - 1
            )));
        }
        let k = weights[0].len();
        if k == 0 {
            return Err(bad("rows must be nonempty"));
        }
        let tol = T::lit(SIMPLEX_TOLERANCE);
        for (j, row) in weights.iter().enumerate() {
            if row.len() != k {
                return Err(bad(format!("row {j} has {} entries, expected {k}", row.len())));
            }
            if !row.iter().all(|w| w.is_finite() && *w >= T::zero()) {
                return Err(bad(format!("row {j} has a negative or non-finite entry")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(bad(format!("row {j} sums to {s}")));
            }
        }
        Ok(Self { knots, weights })
    }

    /// Equal weight on every control point in every interval.
    pub fn uniform(knots: Vec<T>, controls: usize) -> Result<Self> {
        validate_knots(&knots)?;
        if controls == 0 {
            return Err(bad("need at least one control point"));
        }
        let w = T::one() / T::from_usize_lossy(controls);
        let rows = vec![vec![w; controls]; knots.len() - 1];
        // 1/K summed K times can miss 1 by a few ulps; project to be safe
        let rows = rows.iter().map(|r| project_to_simplex(r)).collect();
        Self::new(knots, rows)
    }

    /// Ordinary control encoded as a Young measure: a Dirac row per interval.
    pub fn dirac(knots: Vec<T>, indices: &[usize], controls: usize) -> Result<Self> {
        validate_knots(&knots)?;
        if indices.len() != knots.len() - 1 {
            return Err(bad("one control index per interval required"));
        }
        let mut rows = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= controls {
                return Err(bad(format!("control index {i} out of range")));
            }
            let mut r = vec![T::zero(); controls];
            r[i] = T::one();
            rows.push(r);
        }
        Self::new(knots, rows)
    }

    /// `knots` spanning `[0, horizon]` with `intervals` equal pieces.
    pub fn uniform_knots(horizon: T, intervals: usize) -> Vec<T> {
        let n = T::from_usize_lossy(intervals);
        let mut k: Vec<T> = (0..=intervals)
            .map(|j| horizon * T::from_usize_lossy(j) / n)
            .collect();
        *k.last_mut().expect("nonempty") = horizon;
        k
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn horizon(&self) -> T {
        *self.knots.last().expect("validated knots")
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn intervals(&self) -> usize {
        self.weights.len()
    }

    pub fn controls(&self) -> usize {
        self.weights[0].len()
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.weights[j]
    }

    pub fn interval_index(&self, t: T) -> Result<usize> {
        interval_index(&self.knots, t)
    }

    /// Replaces row `j` by the simplex projection of `row`.
    pub fn set_row(&mut self, j: usize, row: &[T]) -> Result<()> {
        if j >= self.weights.len() {
            return Err(bad(format!("row {j} out of range")));
        }
        if row.len() != self.controls() {
            return Err(bad("row length does not match control grid"));
        }
        if !row.iter().all(|w| w.is_finite()) {
            return Err(bad("row has non-finite entries"));
        }
        self.weights[j] = project_to_simplex(row);
        Ok(())
    }

    /// Index of the Dirac atom if row `j` is a Dirac row.
    pub fn dirac_index(&self, j: usize) -> Option<usize> {
        let row = &self.weights[j];
        let mut hit = None;
        for (k, &w) in row.iter().enumerate() {
            if w == T::one() && hit.is_none() {
                hit = Some(k);
            } else if w != T::zero() {
                return None;
            }
        }
        hit
    }

    pub fn is_dirac(&self) -> bool {
        (0..self.intervals()).all(|j| self.dirac_index(j).is_some())
    }

    /// Time-averaged total variation distance `Σ_j (Δt_j / T) · ½ Σ_k |w − w'|`.
    pub fn total_variation(&self, other: &YoungMeasure<T>) -> Result<T> {
        if self.knots != other.knots || self.controls() != other.controls() {
            return Err(bad("measures live on different knots or control grids"));
        }
        let horizon = self.horizon();
        let half = T::lit(0.5);
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .zip(self.knots.windows(2))
            .map(|((a, b), w)| {
                let d: T = a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum();
                (w[1] - w[0]) / horizon * half * d
            })
            .sum())
    }
}
