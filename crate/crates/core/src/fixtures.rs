//! Small hand-checkable instances used by tests, benches and examples.

use crate::model::{Scenario, ScenarioSet, ScenarioSlice, StorageTech, Tariff, TimeGrid};

/// Lossless storage with `κ = 1`, `κc^X = 0.1`, `κc^P = 0.05`, `c^s = 0.001`,
/// `c_a^c = 0`, `c_a^d = 0.1` and `γ ∈ [0, 1]`.
pub fn lossless_tech() -> StorageTech {
    StorageTech {
        user_charge_eff: 1.0,
        user_discharge_eff: 1.0,
        agg_charge_eff: 1.0,
        agg_discharge_eff: 1.0,
        gamma_min: 0.0,
        gamma_max: 1.0,
        capacity_cost: 0.1,
        power_cost: 0.05,
        operation_cost: 0.001,
        extra_charge_cost: 0.0,
        extra_discharge_cost: 0.1,
        kappa: 1.0,
    }
}

/// Two slots, load `[2, 0]`, no renewables, `π_b = 0.03`, `π_p = 0.4`.
pub fn tiny() -> (ScenarioSlice, Tariff, StorageTech) {
    let slice = ScenarioSlice::new(TimeGrid::hourly(2), vec![2.0, 0.0], vec![0.0, 0.0])
        .expect("valid fixture");
    (slice, Tariff::default(), lossless_tech())
}

/// TINY as a one-user, one-scenario set.
pub fn tiny_set() -> ScenarioSet {
    ScenarioSet::new(
        TimeGrid::hourly(2),
        vec!["A".into()],
        vec![Scenario {
            id: "s1".into(),
            probability: 1.0,
            load: vec![vec![2.0, 0.0]],
            renewable: vec![vec![0.0, 0.0]],
        }],
    )
    .expect("valid fixture")
}

/// Two users with mirrored loads `[2, 0]` and `[0, 2]` whose dispatch cancels.
pub fn tiny2_set() -> ScenarioSet {
    ScenarioSet::new(
        TimeGrid::hourly(2),
        vec!["A".into(), "B".into()],
        vec![Scenario {
            id: "s1".into(),
            probability: 1.0,
            load: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            renewable: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        }],
    )
    .expect("valid fixture")
}
