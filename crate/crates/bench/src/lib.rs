//! Fixtures shared by the benchmarks: the two published gates at each model
//! level, with step counts small enough for repeated timing.

use nhqc_core::experiment::GateSetup;
use nhqc_core::{GateSchedule, ModelLevel, PhysicalParams};

/// Not gate on the single-qubit preset.
pub fn not_gate(level: ModelLevel) -> GateSetup {
    let params = PhysicalParams::preset("single-qubit-paper").expect("preset exists");
    GateSetup::new(GateSchedule::not_gate(), params, level, 0.0)
}

/// C-Not gate on the two-qubit preset.
pub fn cnot_gate(level: ModelLevel) -> GateSetup {
    let params = PhysicalParams::preset("two-qubit-paper").expect("preset exists");
    GateSetup::new(GateSchedule::cnot(), params, level, 0.0)
}

/// Same setup with decay rate `gamma` in units of `1/T`.
pub fn with_decay(mut setup: GateSetup, gamma: f64) -> GateSetup {
    setup.params.gamma = gamma;
    setup
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build_models() {
        for level in [ModelLevel::L0FullLab, ModelLevel::L2Effective] {
            assert_eq!(not_gate(level).model().unwrap().dim(), 6);
            assert_eq!(cnot_gate(level).model().unwrap().dim(), 18);
        }
        assert_eq!(with_decay(not_gate(ModelLevel::L2Effective), 0.1).params.gamma, 0.1);
    }
}
