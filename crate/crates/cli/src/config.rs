//! The TOML run configuration and its resolution into core types.

use serde::{Deserialize, Serialize};
use sllb_core::control::{ControlGrid, ControlKind, ControlOperator, CostSpec, KappaWeight, Problem};
use sllb_core::dynamics::PhysicalConstants;
use sllb_core::grid::{Field, Grid};
use sllb_core::integrator::{SimConfig, Toggles};
use sllb_core::levy::LevyMeasureSpec;
use sllb_core::marcus::{JumpRule, MaterialField};
use sllb_core::optimize::OptimizerConfig;
use sllb_core::presets::{cosine_mode, MaterialPreset};
use sllb_core::Vec3;

/// A vector field on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Preset { name: MaterialPreset },
    Constant { value: [f64; 3] },
    /// `cos(πx)·direction`.
    CosineMode { direction: [f64; 3] },
    /// One 3-vector per cell, in flat cell order.
    Values { values: Vec<[f64; 3]> },
}

impl FieldSpec {
    pub fn build(&self, grid: Grid, at: &str) -> Result<Field<f64>, String> {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let field = match self {
            FieldSpec::Zero => Field::zeros(grid),
            FieldSpec::Preset { name } => name.field(grid),
            FieldSpec::Constant { value } => Field::constant(grid, v(*value)),
            FieldSpec::CosineMode { direction } => cosine_mode(grid, v(*direction)),
            FieldSpec::Values { values } => {
                Field::new(grid, values.iter().copied().map(v).collect()).map_err(|e| format!("{at}: {e}"))?
            }
        };
        field.check_finite().map_err(|e| format!("{at}: {e}"))?;
        Ok(field)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub dt_max: f64,
    #[serde(default = "one")]
    pub snapshot_stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub forcing: ControlKind<f64>,
    /// One shape field `w_j` per control component.
    pub shapes: Vec<FieldSpec>,
    /// The control grid `V`, one point per entry.
    pub points: ControlGrid<f64>,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            forcing: ControlKind::AdditiveForcing,
            shapes: vec![FieldSpec::Zero],
            points: ControlGrid::scalar([0.0]).expect("one point"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(default = "zero_field")]
    pub target: FieldSpec,
    #[serde(default = "unit")]
    pub c_kappa: f64,
    #[serde(default)]
    pub kappa: KappaWeight,
}

fn zero_field() -> FieldSpec {
    FieldSpec::Zero
}

fn unit() -> f64 {
    1.0
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            target: FieldSpec::Zero,
            c_kappa: 1.0,
            kappa: KappaWeight::EuclideanNorm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub marcus: bool,
    pub compensator_tolerance: f64,
    pub energy_dts: Vec<f64>,
    pub increment_t0: f64,
    pub increment_thetas: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            marcus: true,
            compensator_tolerance: 1e-10,
            energy_dts: vec![1e-2, 5e-3, 2.5e-3],
            increment_t0: 0.25,
            increment_thetas: (3..=8).map(|k| 0.5f64.powi(k)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub alpha: f64,
    pub scale: f64,
    pub cutoffs: Vec<f64>,
    pub reference_cutoff: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            dts: vec![2e-2, 1e-2, 5e-3],
            reference_dt: 1.25e-3,
            alpha: 1.5,
            scale: 1.0,
            cutoffs: vec![0.2, 0.1, 0.05, 0.025],
            reference_cutoff: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo paths for `cost`, `verify` and `convergence`.
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub jump_rule: JumpRule,
    pub grid: Grid,
    pub time: TimeSection,
    #[serde(default)]
    pub constants: PhysicalConstants<f64>,
    pub material: FieldSpec,
    pub initial: FieldSpec,
    #[serde(default = "LevyMeasureSpec::empty")]
    pub levy: LevyMeasureSpec<f64>,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
}

fn default_paths() -> usize {
    64
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check_seeds()?;
        Ok(cfg)
    }

    /// TOML integers are signed 64-bit, so seeds must stay below 2⁶³.
    pub fn check_seeds(&self) -> Result<(), String> {
        for (name, s) in [("seed", self.seed), ("optimizer.seed", self.optimizer.seed)] {
            if s > MAX_SEED {
                return Err(format!("{name}: must be at most {MAX_SEED}, got {s}"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn sim_config(&self) -> Result<SimConfig<f64>, String> {
        let grid = self.grid;
        let shapes = self
            .control
            .shapes
            .iter()
            .enumerate()
            .map(|(j, s)| s.build(grid, &format!("control.shapes[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let control = ControlOperator::new(self.control.forcing, shapes).map_err(|e| format!("control: {e}"))?;
        let cfg = SimConfig {
            horizon: self.time.horizon,
            dt_max: self.time.dt_max,
            constants: self.constants,
            material: MaterialField::new(self.material.build(grid, "material")?),
            levy: self.levy.clone(),
            control,
            controls: self.control.points.clone(),
            initial: self.initial.build(grid, "initial")?,
            toggles: self.toggles,
            snapshot_stride: self.time.snapshot_stride,
            jump_rule: self.jump_rule,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn problem(&self) -> Result<Problem<f64>, String> {
        let sim = self.sim_config()?;
        let target = self.cost.target.build(self.grid, "cost.target")?;
        let cost = CostSpec::new(target, self.cost.c_kappa, self.cost.kappa).map_err(|e| format!("cost: {e}"))?;
        Problem::new(sim, cost).map_err(|e| e.to_string())
    }

    /// The shipped reference configuration.
    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_TOML).expect("reference config parses")
    }
}

pub const MAX_SEED: u64 = i64::MAX as u64;

pub const REFERENCE_TOML: &str = include_str!("../../../configs/reference.toml");

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_matches_core_preset() {
        let cfg = RunConfig::reference();
        let sim = cfg.sim_config().unwrap();
        let core = sllb_core::presets::reference_config();
        assert_eq!(sim.initial, core.initial);
        assert_eq!(sim.material, core.material);
        assert_eq!(sim.levy, core.levy);
        assert_eq!(sim.dt_max, core.dt_max);
        assert_eq!(sim.horizon, core.horizon);
    }

    #[test]
    fn reference_round_trips() {
        let cfg = RunConfig::reference();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_line_and_field() {
        let bad = REFERENCE_TOML.replace("dt_max = 0.01", "dt_max = \"fast\"");
        let err = RunConfig::from_toml(&bad).unwrap_err();
        assert!(err.contains("dt_max"), "{err}");
        assert!(err.contains("line"), "{err}");
        let unknown = format!("{REFERENCE_TOML}\nbogus = 1\n");
        assert!(RunConfig::from_toml(&unknown).unwrap_err().contains("bogus"));
    }

    #[test]
    fn semantic_errors_are_reported() {
        let mut cfg = RunConfig::reference();
        cfg.material = FieldSpec::Values { values: vec![[0.0; 3]; 3] };
        assert!(cfg.sim_config().unwrap_err().starts_with("material"));
        let bad = REFERENCE_TOML.replace("cells_per_axis = 64", "cells_per_axis = 2");
        assert!(RunConfig::from_toml(&bad).unwrap_err().contains("cells"));
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, Just(0.0), Just(1e-300), Just(-0.1 + 0.2)]
    }

    proptest! {
        #[test]
        fn arbitrary_configs_round_trip(
            seed in 0..=MAX_SEED,
            paths in 2usize..1000,
            dim in 1usize..=2,
            cells in 4usize..12,
            dt in 1e-6..1.0f64,
            consts in prop::array::uniform4(finite()),
            values in prop::collection::vec(prop::array::uniform3(finite()), 4..12),
            points in prop::collection::vec(finite(), 1..5),
            atoms in prop::collection::vec((-1.0..1.0f64, 0.01..10.0f64), 1..4),
            stride in 1usize..10,
            rule in prop_oneof![Just(JumpRule::Marcus), Just(JumpRule::Linearized)],
            conc in prop::option::of(0.1..100.0f64),
        ) {
            let mut cfg = RunConfig::reference();
            cfg.seed = seed;
            cfg.paths = paths;
            cfg.grid = Grid::new(dim, cells).unwrap();
            cfg.time.dt_max = dt;
            cfg.time.snapshot_stride = stride;
            cfg.constants = PhysicalConstants { kappa1: consts[0], gamma: consts[1], kappa: consts[2], mu: consts[3] };
            cfg.material = FieldSpec::Values { values: values.clone() };
            cfg.initial = FieldSpec::Constant { value: values[0] };
            let mut pts: Vec<f64> = points;
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            cfg.control.points = ControlGrid::scalar(pts).unwrap();
            cfg.control.forcing = ControlKind::StateScaledForcing { exponent: 0.5 };
            let atoms: Vec<_> = atoms.into_iter().filter(|(l, _)| *l != 0.0).collect();
            if !atoms.is_empty() {
                cfg.levy = LevyMeasureSpec::atoms(atoms).unwrap();
            }
            cfg.jump_rule = rule;
            cfg.optimizer.concentration = conc;
            let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
