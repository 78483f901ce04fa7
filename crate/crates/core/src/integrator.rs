//! Jump-adapted time stepping of the relaxed controlled Marcus equation.
//!
//! Between jumps the drift is advanced by an IMEX step: `κ₁Δ` implicit
//! (tridiagonal solves with Neumann rows, alternating directions in 2D),
//! precession, relaxation and the control term explicit at the left
//! endpoint. The compensated noise drift `−(∫ l ν(dl)) m × h` is a rotation
//! generator and is applied afterwards as an exact rotation. Jumps are
//! applied at their sampled times through the Marcus map.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::control::{ControlGrid, ControlOperator, ControlSchedule};
use crate::dynamics::{explicit_cell, PhysicalConstants};
use crate::error::{invalid, Error, Result};
use crate::grid::{neumann_laplacian, Field, Grid};
use crate::levy::{sample_prm, JumpEvent, LevyMeasureSpec};
use crate::marcus::{rotate_about_h, JumpMap, JumpRule, MaterialField};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Which parts of the equation are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    pub drift: bool,
    pub noise: bool,
    pub control: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            drift: true,
            noise: true,
            control: true,
        }
    }
}

impl Toggles {
    pub fn none() -> Self {
        Self {
            drift: false,
            noise: false,
            control: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig<T: Real> {
    pub horizon: T,
    pub dt_max: T,
    pub constants: PhysicalConstants<T>,
    pub material: MaterialField<T>,
    pub levy: LevyMeasureSpec<T>,
    pub control: ControlOperator<T>,
    pub controls: ControlGrid<T>,
    pub initial: Field<T>,
    pub toggles: Toggles,
    /// Record every `snapshot_stride`-th drift step (jumps and `T` always).
    pub snapshot_stride: usize,
    pub jump_rule: JumpRule,
}

impl<T: Real> SimConfig<T> {
    /// Unit constants, no noise, inert control on a single zero control point.
    pub fn deterministic(initial: Field<T>, material: MaterialField<T>, horizon: T, dt_max: T) -> Self {
        let grid = initial.grid();
        Self {
            horizon,
            dt_max,
            constants: PhysicalConstants::unit(),
            material,
            levy: LevyMeasureSpec::empty(),
            control: ControlOperator::inert(grid, 1),
            controls: ControlGrid::scalar([T::zero()]).expect("one point"),
            initial,
            toggles: Toggles::default(),
            snapshot_stride: 1,
            jump_rule: JumpRule::Marcus,
        }
    }

    pub fn grid(&self) -> Grid {
        self.initial.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        if !(self.dt_max > T::zero() && self.dt_max <= self.horizon) {
            return Err(invalid("dt_max", "must lie in (0, horizon]"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be at least 1"));
        }
        self.constants.validate()?;
        self.initial.check_finite()?;
        self.initial.ensure_same_grid(self.material.field())?;
        self.initial.ensure_same_grid(&self.control.shapes()[0])?;
        if self.controls.dimension() != self.control.components() {
            return Err(invalid(
                "controls",
                format!(
                    "control points have {} components, operator has {} shapes",
                    self.controls.dimension(),
                    self.control.components()
                ),
            ));
        }
        Ok(())
    }
}

/// A recorded sample path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Field<T>>,
    pub jumps: Vec<JumpEvent<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> &Field<T> {
        self.states.last().expect("trajectory is nonempty")
    }

    /// CSV with header `t,cell,x,mx,my,mz`; `x` is the first coordinate of
    /// the cell centre.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,cell,x,mx,my,mz")?;
        for (t, m) in self.times.iter().zip(&self.states) {
            let grid = m.grid();
            for (c, v) in m.values().iter().enumerate() {
                let [x, _] = grid.center::<f64>(c);
                writeln!(
                    w,
                    "{:e},{},{:e},{:e},{:e},{:e}",
                    t.as_f64(),
                    c,
                    x,
                    v.x.as_f64(),
                    v.y.as_f64(),
                    v.z.as_f64()
                )?;
            }
        }
        Ok(())
    }
}

/// LU factors of the symmetric tridiagonal `I − r·D²` with Neumann rows.
struct Tridiagonal<T> {
    r: T,
    upper: Vec<T>,
    inv_pivot: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    fn new(n: usize, r: T) -> Self {
        let diag = |i: usize| {
            if i == 0 || i == n - 1 {
                T::one() + r
            } else {
                T::one() + r + r
            }
        };
        let mut upper = Vec::with_capacity(n);
        let mut inv_pivot = Vec::with_capacity(n);
        let mut prev_upper = T::zero();
        for i in 0..n {
            let pivot = diag(i) + r * prev_upper;
            assert!(pivot > T::zero(), "tridiagonal pivot {pivot} not positive");
            let ip = T::one() / pivot;
            prev_upper = -r * ip;
            upper.push(prev_upper);
            inv_pivot.push(ip);
        }
        Self { r, upper, inv_pivot }
    }

    /// Solves in place along the line `offset + i·stride`, `i < n`.
    fn solve(&self, values: &mut [Vec3<T>], offset: usize, stride: usize) {
        let n = self.upper.len();
        let idx = |i: usize| offset + i * stride;
        let mut prev = values[idx(0)] * self.inv_pivot[0];
        values[idx(0)] = prev;
        for i in 1..n {
            prev = (values[idx(i)] + prev * self.r) * self.inv_pivot[i];
            values[idx(i)] = prev;
        }
        for i in (0..n - 1).rev() {
            let next = values[idx(i + 1)];
            values[idx(i)] -= next * self.upper[i];
        }
    }
}

/// Backward-Euler heat step `(I − dt·κ₁Δ)⁻¹`, factored by direction in 2D.
fn implicit_diffusion<T: Real>(rhs: Field<T>, dt_kappa1: T) -> Field<T> {
    let grid = rhs.grid();
    let n = grid.cells_per_axis();
    let h = grid.spacing::<T>();
    let solver = Tridiagonal::new(n, dt_kappa1 / (h * h));
    let mut values = rhs.into_values();
    match grid.dimension() {
        1 => solver.solve(&mut values, 0, 1),
        _ => {
            for iy in 0..n {
                solver.solve(&mut values, iy * n, 1);
            }
            for ix in 0..n {
                solver.solve(&mut values, ix, n);
            }
        }
    }
    Field::from_parts(grid, values)
}

fn first_non_finite<T: Real>(m: &Field<T>) -> Option<usize> {
    m.values().iter().position(|v| !v.is_finite())
}

/// One drift step of length `dt` from time `t`.
pub fn drift_step<T: Real, S: ControlSchedule<T> + ?Sized>(
    m: &Field<T>,
    dt: T,
    t: T,
    schedule: &S,
    config: &SimConfig<T>,
) -> Result<Field<T>> {
    // mesh points are rounded products, so allow a relative sliver
    if !(dt >= T::zero() && dt <= config.dt_max * (T::one() + T::lit(1e-9))) {
        return Err(invalid("dt", format!("step {dt} outside [0, dt_max]")));
    }
    let toggles = config.toggles;
    let mean = config.levy.mean_jump();
    let rotate = toggles.noise && mean != T::zero();
    if !toggles.drift && !toggles.control && !rotate {
        return Ok(m.clone());
    }
    let mut out = m.clone();
    if toggles.drift {
        let lap = neumann_laplacian(m);
        let c = &config.constants;
        out = m.zip_map_unchecked(&lap, |v, l| v + explicit_cell(v, l, c) * dt);
    }
    if toggles.control {
        let u = schedule.control_term(m, t, &config.control, &config.controls)?;
        out.axpy(dt, &u)?;
    }
    if toggles.drift {
        out = implicit_diffusion(out, dt * config.constants.kappa1);
    }
    if rotate {
        out = rotate_about_h(-mean * dt, &out, &config.material)?;
    }
    if let Some(cell) = first_non_finite(&out) {
        return Err(Error::NonFiniteState {
            time: (t + dt).as_f64(),
            cell,
        });
    }
    Ok(out)
}

/// `m⁺ = Φ(l, m⁻)` under the chosen jump rule.
pub fn apply_jump<T: Real>(m: &Field<T>, l: T, h: &MaterialField<T>, rule: JumpRule) -> Result<Field<T>> {
    rule.jump(l, m, h)
}

/// Uniform mesh of width at most `dt_max` merged with the schedule knots.
pub fn time_mesh<T: Real>(horizon: T, dt_max: T, knots: &[T]) -> Vec<T> {
    let ratio = (horizon / dt_max).to_f64().unwrap_or(f64::INFINITY);
    let near = ratio.round();
    let steps = if (ratio - near).abs() <= 1e-9 * near.max(1.0) {
        near
    } else {
        ratio.ceil()
    } as usize;
    let steps = steps.max(1);
    let tol = horizon * T::lit(1e-12);
    let n = T::from_usize_lossy(steps);
    let mut mesh: Vec<T> = (0..steps)
        .map(|k| horizon * T::from_usize_lossy(k) / n)
        .filter(|&t| t == T::zero() || knots.iter().all(|&k| (k - t).abs() > tol))
        .collect();
    mesh.extend(knots.iter().copied().filter(|&k| k > T::zero() && k < horizon));
    mesh.push(horizon);
    mesh.sort_by(|a, b| a.partial_cmp(b).expect("finite mesh"));
    mesh.dedup();
    mesh
}

fn check_schedule<T: Real, S: ControlSchedule<T> + ?Sized>(config: &SimConfig<T>, schedule: &S) -> Result<()> {
    schedule.check_compatible(&config.controls)?;
    let end = schedule.horizon();
    if end != config.horizon {
        return Err(Error::InvalidYoungMeasure(format!(
            "knots span [0, {end}] but the horizon is {}",
            config.horizon
        )));
    }
    Ok(())
}

/// Runs one path, handing every recorded `(t, m)` to `observe` in time
/// order. Returns the jump log.
pub fn simulate_observed<T: Real, S: ControlSchedule<T> + ?Sized>(
    config: &SimConfig<T>,
    schedule: &S,
    seed: u64,
    observe: impl FnMut(T, &Field<T>),
) -> Result<Vec<JumpEvent<T>>> {
    run(config, schedule, seed, &[], config.snapshot_stride, observe)
}

/// States at the requested times (post-jump if a jump falls exactly on one).
pub fn simulate_at<T: Real, S: ControlSchedule<T> + ?Sized>(
    config: &SimConfig<T>,
    schedule: &S,
    seed: u64,
    times: &[T],
) -> Result<Vec<Field<T>>> {
    if let Some(t) = times.iter().find(|t| !(**t >= T::zero() && **t <= config.horizon)) {
        return Err(Error::TimeOutOfRange {
            t: t.as_f64(),
            horizon: config.horizon.as_f64(),
        });
    }
    let mut out: Vec<Option<Field<T>>> = vec![None; times.len()];
    run(config, schedule, seed, times, 1, |t, m| {
        for (slot, want) in out.iter_mut().zip(times) {
            if *want == t {
                *slot = Some(m.clone());
            }
        }
    })?;
    Ok(out.into_iter().map(|m| m.expect("requested times are mesh points")).collect())
}

fn run<T: Real, S: ControlSchedule<T> + ?Sized>(
    config: &SimConfig<T>,
    schedule: &S,
    seed: u64,
    extra: &[T],
    stride: usize,
    mut observe: impl FnMut(T, &Field<T>),
) -> Result<Vec<JumpEvent<T>>> {
    config.validate()?;
    check_schedule(config, schedule)?;
    let horizon = config.horizon;
    let jumps = if config.toggles.noise {
        sample_prm(&config.levy, horizon, seed)?
    } else {
        Vec::new()
    };
    let mut mesh = time_mesh(horizon, config.dt_max, schedule.knots());
    if !extra.is_empty() {
        mesh.extend(extra.iter().copied());
        mesh.sort_by(|a, b| a.partial_cmp(b).expect("finite mesh"));
        mesh.dedup();
    }

    let mut m = config.initial.clone();
    let mut t = T::zero();
    let mut steps = 0usize;
    let mut next_jump = jumps.iter().peekable();
    observe(t, &m);
    for &b in &mesh[1..] {
        while let Some(ev) = next_jump.next_if(|ev| ev.time <= b) {
            if ev.time > t {
                m = drift_step(&m, ev.time - t, t, schedule, config)?;
                t = ev.time;
                steps += 1;
            }
            observe(t, &m);
            m = apply_jump(&m, ev.size, &config.material, config.jump_rule)?;
            if let Some(cell) = first_non_finite(&m) {
                return Err(Error::NonFiniteState {
                    time: t.as_f64(),
                    cell,
                });
            }
            observe(t, &m);
        }
        if b > t {
            m = drift_step(&m, b - t, t, schedule, config)?;
            t = b;
            steps += 1;
            if steps % stride == 0 || t == horizon {
                observe(t, &m);
            }
        }
    }
    Ok(jumps)
}

/// Simulates one sample path of the relaxed controlled equation.
pub fn simulate<T: Real, S: ControlSchedule<T> + ?Sized>(
    config: &SimConfig<T>,
    schedule: &S,
    seed: u64,
) -> Result<Trajectory<T>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let jumps = simulate_observed(config, schedule, seed, |t, m| {
        times.push(t);
        states.push(m.clone());
    })?;
    Ok(Trajectory { times, states, jumps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlKind, YoungMeasure};
    use crate::grid::{l2_norm, random_field};
    use crate::levy::LevyMeasureSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e3_material(g: Grid) -> MaterialField<f64> {
        MaterialField::new(Field::constant(g, Vec3::e3()))
    }

    fn free(knots_end: f64) -> YoungMeasure<f64> {
        YoungMeasure::uniform(vec![0.0, knots_end], 1).unwrap()
    }

    fn closed_form(t: f64) -> f64 {
        let e = (-2.0 * t).exp();
        (e / (2.0 - e)).sqrt()
    }

    #[test]
    fn constant_field_golden_step() {
        let g = Grid::one_d(8).unwrap();
        let a = 0.8;
        let dt = 0.01;
        let mut cfg = SimConfig::deterministic(Field::constant(g, Vec3::new(a, 0.0, 0.0)), e3_material(g), 1.0, dt);
        cfg.toggles.noise = false;
        cfg.toggles.control = false;
        let out = drift_step(&cfg.initial, dt, 0.0, &free(1.0), &cfg).unwrap();
        let expected = a - dt * (1.0 + a * a) * a;
        for v in out.values() {
            assert!((v.x - expected).abs() < 1e-15, "{} vs {expected}", v.x);
            assert_eq!((v.y, v.z), (0.0, 0.0));
        }
    }

    #[test]
    fn all_toggles_off_is_identity() {
        let g = Grid::two_d(6).unwrap();
        let m = random_field(g, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        let mut cfg = SimConfig::deterministic(m.clone(), e3_material(g), 1.0, 0.1);
        cfg.levy = LevyMeasureSpec::atoms([(0.3, 2.0)]).unwrap();
        cfg.toggles = Toggles::none();
        let out = drift_step(&m, 0.1, 0.0, &free(1.0), &cfg).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn pure_heat_step_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in [Grid::one_d(32).unwrap(), Grid::two_d(8).unwrap()] {
            for dt in [1e-4, 1e-2, 1.0] {
                let m = random_field(g, 1.0, &mut rng);
                let mut cfg = SimConfig::deterministic(m.clone(), e3_material(g), 1.0, 1.0);
                cfg.constants.gamma = 0.0;
                cfg.constants.kappa = 0.0;
                cfg.toggles.noise = false;
                cfg.toggles.control = false;
                let out = drift_step(&m, dt, 0.0, &free(1.0), &cfg).unwrap();
                assert!(l2_norm(&out) <= l2_norm(&m) * (1.0 + 1e-14));
                // constants are preserved by the Neumann solve
                let c = Field::constant(g, Vec3::new(0.2, -0.4, 0.9));
                let out = drift_step(&c, dt, 0.0, &free(1.0), &cfg).unwrap();
                for v in out.values() {
                    assert!((*v - Vec3::new(0.2, -0.4, 0.9)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn tridiagonal_solve_matches_operator() {
        // apply (I − rD²) to the solution and compare with the right side
        let n = 9;
        let r = 3.7;
        let solver = Tridiagonal::new(n, r);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rhs: Vec<Vec3<f64>> = random_field(Grid::one_d(n).unwrap(), 1.0, &mut rng).into_values();
        let mut x = rhs.clone();
        solver.solve(&mut x, 0, 1);
        for i in 0..n {
            let left = if i == 0 { x[0] } else { x[i - 1] };
            let right = if i == n - 1 { x[n - 1] } else { x[i + 1] };
            let ax = x[i] - (left - x[i] * 2.0 + right) * r;
            assert!((ax - rhs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_decay() {
        let g = Grid::one_d(4).unwrap();
        let mut cfg = SimConfig::deterministic(Field::constant(g, Vec3::e1()), e3_material(g), 0.5, 1e-4);
        cfg.toggles.noise = false;
        cfg.toggles.control = false;
        cfg.snapshot_stride = 1000;
        let traj = simulate(&cfg, &free(0.5), 0).unwrap();
        assert_eq!(*traj.times.last().unwrap(), 0.5);
        let a = traj.final_state().values()[0].norm();
        assert!((a - 0.47477).abs() < 1e-4, "{a}");
        assert!((a - closed_form(0.5)).abs() < 1e-4);
    }

    #[test]
    fn noise_only_paths_preserve_magnitudes() {
        let g = Grid::one_d(16).unwrap();
        let m0 = random_field(g, 1.0, &mut ChaCha8Rng::seed_from_u64(5));
        let h = MaterialField::new(Field::from_fn(g, |[x, _]: [f64; 2]| Vec3::new(1.0 - x, 0.3, x)));
        let mut cfg = SimConfig::deterministic(m0.clone(), h, 1.0, 0.05);
        cfg.levy = LevyMeasureSpec::atoms([(-0.3, 1.0), (0.3, 1.0), (0.7, 2.0)]).unwrap();
        cfg.toggles = Toggles {
            drift: false,
            noise: true,
            control: false,
        };
        let traj = simulate(&cfg, &free(1.0), 11).unwrap();
        assert!(!traj.jumps.is_empty());
        let mags0 = m0.magnitudes();
        for s in &traj.states {
            for (a, b) in s.magnitudes().iter().zip(&mags0) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn trajectory_structure() {
        let g = Grid::one_d(8).unwrap();
        let m0 = Field::from_fn(g, |[x, _]: [f64; 2]| Vec3::new((std::f64::consts::PI * x).cos(), 0.0, 0.1));
        let mut cfg = SimConfig::deterministic(m0, e3_material(g), 1.0, 0.1);
        cfg.levy = LevyMeasureSpec::atoms([(-0.3, 3.0), (0.3, 3.0)]).unwrap();
        cfg.control = ControlOperator::new(ControlKind::AdditiveForcing, vec![Field::constant(g, Vec3::e2())]).unwrap();
        cfg.controls = ControlGrid::scalar([-1.0, 1.0]).unwrap();
        let y = YoungMeasure::new(vec![0.0, 0.33, 1.0], vec![vec![0.2, 0.8], vec![1.0, 0.0]]).unwrap();
        let traj = simulate(&cfg, &y, 3).unwrap();
        let again = simulate(&cfg, &y, 3).unwrap();
        assert_eq!(traj, again);
        assert_eq!(traj.jumps, sample_prm(&cfg.levy, 1.0, 3).unwrap());
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        assert!(traj.times.windows(2).all(|w| w[0] <= w[1]));
        // each jump appears as a pre/post pair
        for ev in &traj.jumps {
            let hits = traj.times.iter().filter(|t| **t == ev.time).count();
            assert!(hits >= 2);
        }
        assert_eq!(traj.times.len(), 11 + 1 + 2 * traj.jumps.len());
        // no drift step longer than dt_max
        assert!(traj.times.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-15));
    }

    #[test]
    fn mesh_contains_knots() {
        let mesh = time_mesh(1.0, 0.3, &[0.0, 0.5, 1.0]);
        assert_eq!(mesh.first(), Some(&0.0));
        assert_eq!(mesh.last(), Some(&1.0));
        assert!(mesh.contains(&0.5));
        assert!(mesh.windows(2).all(|w| w[1] - w[0] <= 0.3 && w[1] > w[0]));
        assert_eq!(time_mesh(1.0, 0.1, &[0.0, 1.0]).len(), 11);
    }

    #[test]
    fn schedule_must_span_horizon() {
        let g = Grid::one_d(8).unwrap();
        let cfg = SimConfig::deterministic(Field::zeros(g), e3_material(g), 1.0, 0.1);
        assert!(simulate(&cfg, &free(0.5), 0).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let g = Grid::one_d(8).unwrap();
        let mut cfg = SimConfig::deterministic(Field::constant(g, Vec3::new(1e3, 0.0, 0.0)), e3_material(g), 3.0, 0.5);
        cfg.toggles.noise = false;
        match simulate(&cfg, &free(3.0), 0) {
            Err(Error::NonFiniteState { time, .. }) => assert!(time > 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
