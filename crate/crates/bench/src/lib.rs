//! Inputs shared by the criterion benches.

use vshare_core::model::{ScenarioSlice, TimeGrid};

/// A 24-slot day with an evening peak and midday solar.
pub fn residential_day() -> ScenarioSlice {
    let load: Vec<f64> = (0..24)
        .map(|t| {
            let h = t as f64 + 0.5;
            0.4 + 1.6 * (-0.5 * ((h - 19.5) / 2.0).powi(2)).exp() + 0.8 * (-0.5 * ((h - 7.5) / 1.5).powi(2)).exp()
        })
        .collect();
    let solar: Vec<f64> =
        (0..24).map(|t| (1.5 * (-0.5 * ((t as f64 + 0.5 - 12.5) / 2.5).powi(2)).exp() * 1000.0).round() / 1000.0).collect();
    ScenarioSlice::new(TimeGrid::hourly(24), load, solar).expect("valid day")
}
