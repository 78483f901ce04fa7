//! Named material fields, initial fields and the reference configuration.

use serde::{Deserialize, Serialize};

use crate::control::{ControlGrid, ControlOperator};
use crate::grid::{Field, Grid};
use crate::integrator::{SimConfig, Toggles};
use crate::levy::LevyMeasureSpec;
use crate::marcus::{JumpRule, MaterialField};
use crate::dynamics::PhysicalConstants;
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialPreset {
    /// `h = e₃`.
    ConstantE3,
    /// `h = (1 − x, 0, x)`.
    LinearRamp,
    /// `h = (½(1 − cos 2πx), 0, 1)`.
    CosineBump,
}

impl MaterialPreset {
    pub fn field<T: Real>(self, grid: Grid) -> Field<T> {
        Field::from_fn(grid, |[x, _]: [T; 2]| match self {
            MaterialPreset::ConstantE3 => Vec3::e3(),
            MaterialPreset::LinearRamp => Vec3::new(T::one() - x, T::zero(), x),
            MaterialPreset::CosineBump => Vec3::new(
                T::lit(0.5) * (T::one() - (T::TAU() * x).cos()),
                T::zero(),
                T::one(),
            ),
        })
    }

    pub fn build<T: Real>(self, grid: Grid) -> MaterialField<T> {
        MaterialField::new(self.field(grid))
    }
}

/// `cos(πx)·direction`.
pub fn cosine_mode<T: Real>(grid: Grid, direction: Vec3<T>) -> Field<T> {
    Field::from_fn(grid, |[x, _]: [T; 2]| direction * (T::PI() * x).cos())
}

/// 64 cells, atoms `±0.3` of mass 1, `m₀ = cos(πx)e₁`, `h = e₃`, `T = 1`,
/// `dt_max = 10⁻²`, unit constants, an inert control.
pub fn reference_config() -> SimConfig<f64> {
    let grid = Grid::one_d(64).expect("valid grid");
    SimConfig {
        horizon: 1.0,
        dt_max: 1e-2,
        constants: PhysicalConstants::unit(),
        material: MaterialPreset::ConstantE3.build(grid),
        levy: LevyMeasureSpec::atoms([(-0.3, 1.0), (0.3, 1.0)]).expect("valid atoms"),
        control: ControlOperator::inert(grid, 1),
        controls: ControlGrid::scalar([0.0]).expect("one point"),
        initial: cosine_mode(grid, Vec3::e1()),
        toggles: Toggles::default(),
        snapshot_stride: 1,
        jump_rule: JumpRule::Marcus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_formulas() {
        let g = Grid::one_d(4).unwrap();
        let ramp: Field<f64> = MaterialPreset::LinearRamp.field(g);
        assert_eq!(ramp.values()[0], Vec3::new(0.875, 0.0, 0.125));
        let bump: Field<f64> = MaterialPreset::CosineBump.field(g);
        assert!((bump.values()[1].x - 0.5 * (1.0 - (std::f64::consts::TAU * 0.375).cos())).abs() < 1e-15);
        assert!(reference_config().validate().is_ok());
    }
}
