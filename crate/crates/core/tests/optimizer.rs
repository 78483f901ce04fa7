use sllb_core::control::{ControlGrid, ControlKind, ControlOperator, CostSpec, KappaWeight, Problem, YoungMeasure};
use sllb_core::grid::{Field, Grid};
use sllb_core::optimize::{cross_entropy_minimize, history_is_monotone, OptimizerConfig};
use sllb_core::presets::{cosine_mode, reference_config, MaterialPreset};
use sllb_core::Vec3;

fn sim(grid: Grid) -> sllb_core::SimConfig64 {
    let mut s = reference_config();
    s.initial = cosine_mode(grid, Vec3::e1());
    s.material = MaterialPreset::ConstantE3.build(grid);
    s.control = ControlOperator::inert(grid, 1);
    s
}

fn quick() -> OptimizerConfig {
    OptimizerConfig {
        population: 12,
        paths_per_evaluation: 8,
        max_iterations: 25,
        intervals: 3,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn control_only_cost_concentrates_on_cheapest_point() {
    let grid = Grid::one_d(8).unwrap();
    let mut s = sim(grid);
    s.controls = ControlGrid::scalar([1.0, -0.6, 0.3, 2.0]).unwrap();
    let p = Problem::new(s, CostSpec::new(Field::zeros(grid), 1.0, KappaWeight::EuclideanNorm).unwrap()).unwrap();
    let r = cross_entropy_minimize(&p, &quick()).unwrap();
    for row in r.measure.weights() {
        assert!(row[2] >= 0.99, "{row:?}");
    }
    assert!(history_is_monotone(&r.history, 2.0));
    assert!(r.selection_bias_ok(3.0));
}

#[test]
fn single_control_point_needs_one_generation() {
    let grid = Grid::one_d(8).unwrap();
    let mut s = sim(grid);
    s.controls = ControlGrid::scalar([0.5]).unwrap();
    let p = Problem::new(s, CostSpec::new(Field::zeros(grid), 1.0, KappaWeight::EuclideanNorm).unwrap()).unwrap();
    let r = cross_entropy_minimize(&p, &quick()).unwrap();
    assert_eq!(r.history.len(), 1);
    assert!(r.converged);
    assert!(r.measure.is_dirac());
    assert_eq!(r.dirac, r.measure);
}

#[test]
fn search_is_deterministic() {
    let grid = Grid::one_d(8).unwrap();
    let mut s = sim(grid);
    s.controls = ControlGrid::scalar([-1.0, 1.0]).unwrap();
    s.control = ControlOperator::new(ControlKind::AdditiveForcing, vec![Field::constant(grid, Vec3::e1())]).unwrap();
    let p = Problem::new(
        s,
        CostSpec::new(Field::constant(grid, Vec3::new(2.0, 0.0, 0.0)), 0.1, KappaWeight::EuclideanNorm).unwrap(),
    )
    .unwrap();
    let opt = OptimizerConfig {
        max_iterations: 6,
        ..quick()
    };
    let a = cross_entropy_minimize(&p, &opt).unwrap();
    let b = cross_entropy_minimize(&p, &opt).unwrap();
    assert_eq!(a.measure, b.measure);
    assert_eq!(a.history, b.history);
    assert_eq!(a.estimate, b.estimate);
    // pushing m toward +2e₁ wants the +1 control
    assert!(a.measure.weights().iter().all(|row| row[1] > 0.5));
}

#[test]
fn budget_exhaustion_is_flagged() {
    let grid = Grid::one_d(8).unwrap();
    let mut s = sim(grid);
    s.controls = ControlGrid::scalar([-1.0, 1.0, 0.5]).unwrap();
    let p = Problem::new(s, CostSpec::new(Field::zeros(grid), 1.0, KappaWeight::EuclideanNorm).unwrap()).unwrap();
    let opt = OptimizerConfig {
        max_iterations: 1,
        ..quick()
    };
    let r = cross_entropy_minimize(&p, &opt).unwrap();
    assert!(!r.converged);
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.measure.knots(), YoungMeasure::uniform_knots(1.0, 3).as_slice());
}

#[test]
fn all_failing_candidates_abort() {
    let grid = Grid::one_d(8).unwrap();
    let mut s = sim(grid);
    s.initial = Field::constant(grid, Vec3::new(1e4, 0.0, 0.0));
    s.dt_max = 0.5;
    s.controls = ControlGrid::scalar([-1.0, 1.0]).unwrap();
    let p = Problem::new(s, CostSpec::new(Field::zeros(grid), 1.0, KappaWeight::EuclideanNorm).unwrap()).unwrap();
    let err = cross_entropy_minimize(&p, &quick()).unwrap_err();
    assert!(matches!(err, sllb_core::Error::Optimization(_)));
}
