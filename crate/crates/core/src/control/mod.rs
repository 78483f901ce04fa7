//! Control space, control operators, running cost and relaxed controls.

mod monte_carlo;
mod young;

pub use monte_carlo::{monte_carlo_cost, path_cost, CostEstimate, Problem};
pub use young::{project_to_simplex, YoungMeasure, YoungMeasureRepr, SIMPLEX_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{l2_norm, Field};
use crate::integrator::Trajectory;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Finite set of control points in `R^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ControlGrid<T: Real> {
    points: Vec<Vec<T>>,
}

impl<T: Real> TryFrom<Vec<Vec<T>>> for ControlGrid<T> {
    type Error = Error;
    fn try_from(points: Vec<Vec<T>>) -> Result<Self> {
        Self::new(points)
    }
}

impl<T: Real> From<ControlGrid<T>> for Vec<Vec<T>> {
    fn from(g: ControlGrid<T>) -> Self {
        g.points
    }
}

impl<T: Real> ControlGrid<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(invalid("controls", "control grid is empty"));
        };
        let q = first.len();
        if q == 0 {
            return Err(invalid("controls", "control points need at least one component"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != q {
                return Err(invalid("controls", format!("point {i} has dimension {}, expected {q}", p.len())));
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(invalid("controls", format!("point {i} is not finite")));
            }
            if points[..i].contains(p) {
                return Err(invalid("controls", format!("point {i} is a duplicate")));
            }
        }
        Ok(Self { points })
    }

    /// Scalar controls.
    pub fn scalar(values: impl IntoIterator<Item = T>) -> Result<Self> {
        Self::new(values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[T] {
        &self.points[k]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }
}

/// Coercivity weight `κ(t, v)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaWeight {
    /// `κ(t, v) = |v|`.
    #[default]
    EuclideanNorm,
}

impl KappaWeight {
    pub fn eval<T: Real>(&self, _t: T, v: &[T]) -> T {
        match self {
            KappaWeight::EuclideanNorm => v.iter().map(|x| *x * *x).sum::<T>().sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlKind<T> {
    /// `L(m, v) = Σ_j v_j w_j`.
    AdditiveForcing,
    /// `L(m, v) = ‖m‖^r (m × w_v + w_v) / (1 + ‖m‖)` with `w_v = Σ_j v_j w_j`.
    StateScaledForcing { exponent: T },
}

/// The control-to-field map `L(m, v)`, one shape field per control component.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlOperator<T: Real> {
    kind: ControlKind<T>,
    shapes: Vec<Field<T>>,
    constant: T,
}

impl<T: Real> ControlOperator<T> {
    pub fn new(kind: ControlKind<T>, shapes: Vec<Field<T>>) -> Result<Self> {
        let Some(first) = shapes.first() else {
            return Err(invalid("shapes", "need one shape field per control component"));
        };
        for s in &shapes {
            first.ensure_same_grid(s)?;
            s.check_finite()?;
        }
        if let ControlKind::StateScaledForcing { exponent } = kind {
            if !(exponent >= T::zero() && exponent < T::lit(2.0)) {
                return Err(invalid("exponent", format!("r = {exponent} is outside [0, 2)")));
            }
        }
        let sum_sq: T = match kind {
            ControlKind::AdditiveForcing => shapes.iter().map(|s| s.inner(s).expect("same grid")).sum(),
            ControlKind::StateScaledForcing { .. } => shapes
                .iter()
                .map(|s| {
                    let sup = s.values().iter().map(|v| v.norm()).fold(T::zero(), T::max);
                    sup * sup
                })
                .sum(),
        };
        // a few ulps of slack so the bound survives rounding in `apply`
        let constant = sum_sq.sqrt() * (T::one() + T::lit(64.0) * T::epsilon());
        Ok(Self {
            kind,
            shapes,
            constant,
        })
    }

    /// Additive forcing with all shapes zero: the dynamics ignore the control.
    pub fn inert(grid: crate::grid::Grid, components: usize) -> Self {
        Self::new(ControlKind::AdditiveForcing, vec![Field::zeros(grid); components.max(1)])
            .expect("zero shapes are valid")
    }

    pub fn kind(&self) -> ControlKind<T> {
        self.kind
    }

    pub fn shapes(&self) -> &[Field<T>] {
        &self.shapes
    }

    pub fn components(&self) -> usize {
        self.shapes.len()
    }

    /// Growth exponent `r`.
    pub fn exponent(&self) -> T {
        match self.kind {
            ControlKind::AdditiveForcing => T::zero(),
            ControlKind::StateScaledForcing { exponent } => exponent,
        }
    }

    /// Constant `C` in `‖L(m, v)‖ ≤ C ‖m‖^r κ(v)` for the Euclidean weight.
    pub fn growth_constant(&self) -> T {
        self.constant
    }

    pub fn apply(&self, m: &Field<T>, v: &[T]) -> Result<Field<T>> {
        if v.len() != self.shapes.len() {
            return Err(invalid(
                "control",
                format!("control has {} components, operator expects {}", v.len(), self.shapes.len()),
            ));
        }
        m.ensure_same_grid(&self.shapes[0])?;
        Ok(self.apply_unchecked(m, v))
    }

    pub(crate) fn apply_unchecked(&self, m: &Field<T>, v: &[T]) -> Field<T> {
        let n = m.len();
        let mut w = vec![Vec3::zero(); n];
        for (vj, shape) in v.iter().zip(&self.shapes) {
            for (acc, s) in w.iter_mut().zip(shape.values()) {
                *acc += *s * *vj;
            }
        }
        match self.kind {
            ControlKind::AdditiveForcing => Field::from_parts(m.grid(), w),
            ControlKind::StateScaledForcing { exponent } => {
                let norm = l2_norm(m);
                let s = norm.powf(exponent) / (T::one() + norm);
                let values = m
                    .values()
                    .iter()
                    .zip(w)
                    .map(|(mv, wv)| (mv.cross(wv) + wv) * s)
                    .collect();
                Field::from_parts(m.grid(), values)
            }
        }
    }
}

/// Running cost `F(t, m, v) = ‖m − m_ref‖² + c_κ κ(t, v)⁴`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec<T: Real> {
    target: Field<T>,
    c_kappa: T,
    kappa: KappaWeight,
}

impl<T: Real> CostSpec<T> {
    pub fn new(target: Field<T>, c_kappa: T, kappa: KappaWeight) -> Result<Self> {
        target.check_finite()?;
        if !(c_kappa > T::zero()) || !c_kappa.is_finite() {
            return Err(invalid("c_kappa", "must be positive and finite"));
        }
        Ok(Self {
            target,
            c_kappa,
            kappa,
        })
    }

    pub fn target(&self) -> &Field<T> {
        &self.target
    }

    pub fn c_kappa(&self) -> T {
        self.c_kappa
    }

    pub fn kappa(&self) -> KappaWeight {
        self.kappa
    }

    /// `‖m − m_ref‖²`.
    pub fn state_cost(&self, m: &Field<T>) -> Result<T> {
        m.ensure_same_grid(&self.target)?;
        let vol = m.grid().cell_volume::<T>();
        Ok(m
            .values()
            .iter()
            .zip(self.target.values())
            .map(|(a, b)| (*a - *b).norm_squared())
            .sum::<T>()
            * vol)
    }

    pub fn control_cost(&self, t: T, v: &[T]) -> T {
        let k = self.kappa.eval(t, v);
        let k2 = k * k;
        self.c_kappa * k2 * k2
    }

    pub fn running_cost(&self, t: T, m: &Field<T>, v: &[T]) -> Result<T> {
        Ok(self.state_cost(m)? + self.control_cost(t, v))
    }
}

/// An ordinary (non-relaxed) piecewise constant control `u(t) ∈ R^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct OrdinaryControl<T: Real> {
    knots: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Real> OrdinaryControl<T> {
    pub fn new(knots: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        young::validate_knots(&knots)?;
        if values.len() != knots.len() - 1 {
            return Err(invalid("values", "one control value per interval required"));
        }
        if !values.iter().flatten().all(|x| x.is_finite()) {
            return Err(invalid("values", "control values must be finite"));
        }
        Ok(Self { knots, values })
    }

    /// The control picked by a Dirac measure; `None` if any row is not Dirac.
    pub fn from_dirac(measure: &YoungMeasure<T>, controls: &ControlGrid<T>) -> Option<Self> {
        let values = (0..measure.intervals())
            .map(|j| measure.dirac_index(j).map(|k| controls.point(k).to_vec()))
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            knots: measure.knots().to_vec(),
            values,
        })
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }
}

/// Anything that supplies the control term and running cost over time.
pub trait ControlSchedule<T: Real>: Sync {
    fn knots(&self) -> &[T];

    /// Errors if the schedule cannot be used with the given control grid.
    fn check_compatible(&self, controls: &ControlGrid<T>) -> Result<()>;

    /// Control term entering the drift at time `t`.
    fn control_term(
        &self,
        m: &Field<T>,
        t: T,
        op: &ControlOperator<T>,
        controls: &ControlGrid<T>,
    ) -> Result<Field<T>>;

    /// Averaged running cost at time `t`, given the precomputed state cost.
    fn running_cost(&self, state_cost: T, t: T, cost: &CostSpec<T>, controls: &ControlGrid<T>) -> Result<T>;

    /// Averaged `κ(t, ·)⁴`.
    fn kappa4(&self, t: T, kappa: KappaWeight, controls: &ControlGrid<T>) -> Result<T>;

    fn horizon(&self) -> T {
        *self.knots().last().expect("validated knots")
    }
}

fn kappa4_of<T: Real>(kappa: KappaWeight, t: T, v: &[T]) -> T {
    let k = kappa.eval(t, v);
    let k2 = k * k;
    k2 * k2
}

impl<T: Real> ControlSchedule<T> for YoungMeasure<T> {
    fn knots(&self) -> &[T] {
        YoungMeasure::knots(self)
    }

    fn check_compatible(&self, controls: &ControlGrid<T>) -> Result<()> {
        if self.controls() != controls.len() {
            return Err(Error::InvalidYoungMeasure(format!(
                "measure has {} columns, control grid has {} points",
                self.controls(),
                controls.len()
            )));
        }
        Ok(())
    }

    fn control_term(
        &self,
        m: &Field<T>,
        t: T,
        op: &ControlOperator<T>,
        controls: &ControlGrid<T>,
    ) -> Result<Field<T>> {
        relaxed_control_term(m, self, t, op, controls)
    }

    fn running_cost(&self, state_cost: T, t: T, cost: &CostSpec<T>, controls: &ControlGrid<T>) -> Result<T> {
        let row = self.row(self.interval_index(t)?);
        Ok(row
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != T::zero())
            .map(|(k, w)| *w * (state_cost + cost.control_cost(t, controls.point(k))))
            .sum())
    }

    fn kappa4(&self, t: T, kappa: KappaWeight, controls: &ControlGrid<T>) -> Result<T> {
        let row = self.row(self.interval_index(t)?);
        Ok(row
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != T::zero())
            .map(|(k, w)| *w * kappa4_of(kappa, t, controls.point(k)))
            .sum())
    }
}

impl<T: Real> ControlSchedule<T> for OrdinaryControl<T> {
    fn knots(&self) -> &[T] {
        &self.knots
    }

    fn check_compatible(&self, _controls: &ControlGrid<T>) -> Result<()> {
        Ok(())
    }

    fn control_term(
        &self,
        m: &Field<T>,
        t: T,
        op: &ControlOperator<T>,
        _controls: &ControlGrid<T>,
    ) -> Result<Field<T>> {
        let j = young::interval_index(&self.knots, t)?;
        op.apply(m, &self.values[j])
    }

    fn running_cost(&self, state_cost: T, t: T, cost: &CostSpec<T>, _controls: &ControlGrid<T>) -> Result<T> {
        let j = young::interval_index(&self.knots, t)?;
        // same arithmetic as a Dirac row: 1 · (state + control)
        Ok(T::one() * (state_cost + cost.control_cost(t, &self.values[j])))
    }

    fn kappa4(&self, t: T, kappa: KappaWeight, _controls: &ControlGrid<T>) -> Result<T> {
        let j = young::interval_index(&self.knots, t)?;
        Ok(T::one() * kappa4_of(kappa, t, &self.values[j]))
    }
}

/// `Σ_k w_{j(t),k} L(m, v_k)`. A Dirac row returns `L(m, v_k)` unchanged.
pub fn relaxed_control_term<T: Real>(
    m: &Field<T>,
    measure: &YoungMeasure<T>,
    t: T,
    op: &ControlOperator<T>,
    controls: &ControlGrid<T>,
) -> Result<Field<T>> {
    measure.check_compatible(controls)?;
    let j = measure.interval_index(t)?;
    if let Some(k) = measure.dirac_index(j) {
        return op.apply(m, controls.point(k));
    }
    let mut acc = Field::zeros(m.grid());
    for (k, &w) in measure.row(j).iter().enumerate() {
        if w != T::zero() {
            acc.axpy(w, &op.apply(m, controls.point(k))?)?;
        }
    }
    Ok(acc)
}

/// Left-endpoint accumulation of `∫ Σ_k w F dt` over a stream of
/// `(t, m)` samples; intervals are split at the schedule's knots.
pub(crate) struct CostAccumulator<'a, T: Real, S: ?Sized> {
    schedule: &'a S,
    cost: &'a CostSpec<T>,
    controls: &'a ControlGrid<T>,
    last: Option<(T, T)>,
    total: T,
}

impl<'a, T: Real, S: ControlSchedule<T> + ?Sized> CostAccumulator<'a, T, S> {
    pub(crate) fn new(schedule: &'a S, cost: &'a CostSpec<T>, controls: &'a ControlGrid<T>) -> Self {
        Self {
            schedule,
            cost,
            controls,
            last: None,
            total: T::zero(),
        }
    }

    pub(crate) fn push(&mut self, t: T, m: &Field<T>) -> Result<()> {
        if let Some((t0, sc)) = self.last {
            if t > t0 {
                self.integrate(t0, t, sc)?;
            }
        }
        self.last = Some((t, self.cost.state_cost(m)?));
        Ok(())
    }

    fn integrate(&mut self, a: T, b: T, state_cost: T) -> Result<()> {
        let mut s = a;
        for &k in self.schedule.knots() {
            if k > s && k < b {
                self.total += (k - s) * self.schedule.running_cost(state_cost, s, self.cost, self.controls)?;
                s = k;
            }
        }
        self.total += (b - s) * self.schedule.running_cost(state_cost, s, self.cost, self.controls)?;
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<T> {
        let horizon = self.schedule.horizon();
        match self.last {
            Some((end, _)) if end == horizon => Ok(self.total),
            Some((end, _)) => Err(Error::IncompleteTrajectory {
                end: end.as_f64(),
                horizon: horizon.as_f64(),
            }),
            None => Err(Error::IncompleteTrajectory {
                end: f64::NAN,
                horizon: horizon.as_f64(),
            }),
        }
    }
}

/// Pathwise relaxed cost `∫₀ᵀ Σ_k w_{j(t),k} F(t, m(t), v_k) dt` by the
/// left-endpoint rule on the trajectory's recorded times.
pub fn relaxed_cost_of_path<T: Real, S: ControlSchedule<T> + ?Sized>(
    traj: &Trajectory<T>,
    schedule: &S,
    cost: &CostSpec<T>,
    controls: &ControlGrid<T>,
) -> Result<T> {
    schedule.check_compatible(controls)?;
    if traj.times.first() != Some(&T::zero()) {
        return Err(Error::IncompleteTrajectory {
            end: traj.times.last().map_or(f64::NAN, |t| t.as_f64()),
            horizon: schedule.horizon().as_f64(),
        });
    }
    let mut acc = CostAccumulator::new(schedule, cost, controls);
    for (t, m) in traj.times.iter().zip(&traj.states) {
        acc.push(*t, m)?;
    }
    acc.finish()
}

/// `∫₀ᵀ Σ_k w κ⁴ dt`, exact for piecewise constant schedules.
pub fn kappa_integral<T: Real, S: ControlSchedule<T> + ?Sized>(
    schedule: &S,
    kappa: KappaWeight,
    controls: &ControlGrid<T>,
) -> Result<T> {
    schedule.check_compatible(controls)?;
    schedule
        .knots()
        .windows(2)
        .map(|w| Ok((w[1] - w[0]) * schedule.kappa4(w[0], kappa, controls)?))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{random_field, Grid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g() -> Grid {
        Grid::one_d(8).unwrap()
    }

    fn additive_e1() -> ControlOperator<f64> {
        ControlOperator::new(
            ControlKind::AdditiveForcing,
            vec![Field::constant(g(), Vec3::e1())],
        )
        .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(ControlGrid::<f64>::new(vec![]).is_err());
        assert!(ControlGrid::scalar([0.0, 1.0, 0.0]).is_err());
        assert!(ControlGrid::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert_eq!(ControlGrid::scalar([0.0, 1.0]).unwrap().dimension(), 1);
    }

    #[test]
    fn relaxed_term_examples() {
        let m = Field::constant(g(), Vec3::new(0.3, -0.2, 0.5));
        let op = additive_e1();
        let controls = ControlGrid::scalar([0.0, 1.0, 2.0]).unwrap();
        let y = YoungMeasure::new(vec![0.0, 1.0], vec![vec![0.5, 0.25, 0.25]]).unwrap();
        let out = relaxed_control_term(&m, &y, 0.5, &op, &controls).unwrap();
        for v in out.values() {
            assert!((v.x - 0.75).abs() < 1e-15 && v.y == 0.0 && v.z == 0.0);
        }

        let sym = ControlGrid::scalar([-1.0, 1.0]).unwrap();
        let u = YoungMeasure::uniform(vec![0.0, 1.0], 2).unwrap();
        let out = relaxed_control_term(&m, &u, 0.0, &op, &sym).unwrap();
        assert!(out.values().iter().all(|v| *v == Vec3::zero()));

        let d = YoungMeasure::dirac(vec![0.0, 1.0], &[1], 3).unwrap();
        let scaled = ControlOperator::new(
            ControlKind::StateScaledForcing { exponent: 1.5 },
            vec![Field::from_fn(g(), |[x, _]: [f64; 2]| Vec3::new(x, 1.0 - x, 0.2))],
        )
        .unwrap();
        let m = random_field(g(), 1.0, &mut ChaCha8Rng::seed_from_u64(4));
        let a = relaxed_control_term(&m, &d, 0.3, &scaled, &controls).unwrap();
        let b = scaled.apply(&m, &[1.0]).unwrap();
        assert_eq!(a, b);
        assert!(relaxed_control_term(&m, &d, 1.5, &scaled, &controls).is_err());
    }

    #[test]
    fn cost_examples() {
        let zero = Field::zeros(g());
        let cost = CostSpec::new(zero.clone(), 1.0, KappaWeight::EuclideanNorm).unwrap();
        let controls = ControlGrid::scalar([2.0]).unwrap();
        let y = YoungMeasure::dirac(vec![0.0, 1.0], &[0], 1).unwrap();
        let traj = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![zero.clone(), zero.clone(), zero.clone()],
            jumps: vec![],
        };
        assert_eq!(relaxed_cost_of_path(&traj, &y, &cost, &controls).unwrap(), 16.0);

        let controls0 = ControlGrid::scalar([0.0]).unwrap();
        assert_eq!(relaxed_cost_of_path(&traj, &y, &cost, &controls0).unwrap(), 0.0);

        let short = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![zero.clone(), zero],
            jumps: vec![],
        };
        assert!(matches!(
            relaxed_cost_of_path(&short, &y, &cost, &controls),
            Err(Error::IncompleteTrajectory { .. })
        ));
        assert!(CostSpec::new(Field::<f64>::zeros(g()), 0.0, KappaWeight::EuclideanNorm).is_err());
    }

    #[test]
    fn quadrature_is_first_order_in_recording_step() {
        // m(t) = t e1 against m_ref = 0: exact ∫ t² dt = 1/3
        let cost = CostSpec::new(Field::zeros(g()), 1.0, KappaWeight::EuclideanNorm).unwrap();
        let controls = ControlGrid::scalar([0.0]).unwrap();
        let y = YoungMeasure::dirac(vec![0.0, 1.0], &[0], 1).unwrap();
        let err = |n: usize| {
            let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let states = times.iter().map(|t| Field::constant(g(), Vec3::new(*t, 0.0, 0.0))).collect();
            let traj = Trajectory { times, states, jumps: vec![] };
            (relaxed_cost_of_path(&traj, &y, &cost, &controls).unwrap() - 1.0 / 3.0).abs()
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn knots_split_recorded_intervals() {
        let cost = CostSpec::new(Field::zeros(g()), 1.0, KappaWeight::EuclideanNorm).unwrap();
        let controls = ControlGrid::scalar([0.0, 1.0]).unwrap();
        let y = YoungMeasure::dirac(vec![0.0, 0.25, 1.0], &[1, 0], 2).unwrap();
        let z = Field::zeros(g());
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![z.clone(), z],
            jumps: vec![],
        };
        assert_eq!(relaxed_cost_of_path(&traj, &y, &cost, &controls).unwrap(), 0.25);
        assert_eq!(kappa_integral(&y, KappaWeight::EuclideanNorm, &controls).unwrap(), 0.25);
    }

    #[test]
    fn ordinary_matches_dirac_cost_bitwise() {
        let cost = CostSpec::new(Field::constant(g(), Vec3::e2()), 0.7, KappaWeight::EuclideanNorm).unwrap();
        let controls = ControlGrid::<f64>::new(vec![vec![0.3, -1.1], vec![2.0, 0.5]]).unwrap();
        let y = YoungMeasure::dirac(vec![0.0, 0.4, 1.0], &[1, 0], 2).unwrap();
        let u = OrdinaryControl::from_dirac(&y, &controls).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let times = vec![0.0, 0.1, 0.4, 0.4, 0.75, 1.0];
        let states = times.iter().map(|_| random_field(g(), 1.0, &mut rng)).collect();
        let traj = Trajectory { times, states, jumps: vec![] };
        let a = relaxed_cost_of_path(&traj, &y, &cost, &controls).unwrap();
        let b = relaxed_cost_of_path(&traj, &u, &cost, &controls).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(OrdinaryControl::from_dirac(&YoungMeasure::uniform(vec![0.0, 1.0], 2).unwrap(), &controls).is_none());
    }

    proptest! {
        #[test]
        fn growth_certificate(seed in any::<u64>(), r in 0.0f64..1.99, v0 in -3.0f64..3.0, v1 in -3.0f64..3.0, amp in 0.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shapes = vec![random_field(g(), 2.0, &mut rng), random_field(g(), 0.5, &mut rng)];
            let m: Field<f64> = random_field(g(), amp, &mut rng);
            for kind in [ControlKind::AdditiveForcing, ControlKind::StateScaledForcing { exponent: r }] {
                let op = ControlOperator::new(kind, shapes.clone()).unwrap();
                let v = [v0, v1];
                let lhs = l2_norm(&op.apply(&m, &v).unwrap());
                let rhs = op.growth_constant() * l2_norm(&m).powf(op.exponent()) * KappaWeight::EuclideanNorm.eval(0.0, &v);
                prop_assert!(lhs <= rhs, "{lhs} > {rhs}");
            }
        }

        #[test]
        fn coercivity_and_kappa_integrability(seed in any::<u64>(), rows in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let controls = ControlGrid::<f64>::scalar([-1.5, 0.0, 0.5, 2.0]).unwrap();
            let knots = YoungMeasure::uniform_knots(1.7, rows);
            let mut y = YoungMeasure::uniform(knots, 4).unwrap();
            for j in 0..rows {
                let raw: Vec<f64> = (0..4).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
                y.set_row(j, &raw).unwrap();
            }
            let cost = CostSpec::new(random_field(g(), 1.0, &mut rng), 0.3, KappaWeight::EuclideanNorm).unwrap();
            let m = random_field(g(), 1.0, &mut rng);
            for p in controls.points() {
                let f = cost.running_cost(0.2, &m, p).unwrap();
                prop_assert!(f >= 0.3 * p[0].powi(4));
            }
            let k = kappa_integral(&y, KappaWeight::EuclideanNorm, &controls).unwrap();
            prop_assert!(k.is_finite() && k <= 1.7 * 16.0 * (1.0 + 1e-12));
        }
    }
}
