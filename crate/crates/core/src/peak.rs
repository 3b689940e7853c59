//! Net-load peaks before and after users apply their limiting dispatch.
//!
//! Two peak measures are reported: the sum of each user's own daily peak
//! (what demand charges bill) and the coincident peak of the summed net load.

use crate::aggregator::AggregatorModel;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSlot {
    pub scenario: String,
    /// 1-based.
    pub slot: usize,
    /// Summed net load of all users.
    pub original: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPeak {
    pub scenario: String,
    pub user: String,
    pub original: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPeak {
    pub scenario: String,
    pub probability: f64,
    /// Coincident peak of the summed net load.
    pub system_original: f64,
    pub system_after: f64,
    /// Sum of individual user peaks.
    pub demand_original: f64,
    pub demand_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub price: f64,
    pub slots: Vec<PeakSlot>,
    pub users: Vec<UserPeak>,
    pub scenarios: Vec<ScenarioPeak>,
    /// Reduction of the expected sum of user peaks, in percent.
    pub demand_peak_reduction_pct: f64,
    /// Reduction of the expected coincident peak, in percent.
    pub system_peak_reduction_pct: f64,
}

fn reduction_pct(original: f64, after: f64) -> f64 {
    if original.abs() <= f64::EPSILON {
        0.0
    } else {
        100.0 * (original - after) / original
    }
}

fn peak(series: &[f64]) -> f64 {
    series.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Peaks at a non-threshold price.
pub fn emit_peak_report(model: &AggregatorModel, price: f64) -> Result<PeakReport> {
    let iv = model.interval(model.interval_of(price)?)?;
    let set = &model.scenarios;
    let t_len = set.time.slots;
    let mut slots = Vec::new();
    let mut users = Vec::new();
    let mut scenarios = Vec::new();
    let (mut demand_o, mut demand_a, mut system_o, mut system_a) = (0.0, 0.0, 0.0, 0.0);
    for (w, s) in set.scenarios.iter().enumerate() {
        let mut total_o = vec![0.0; t_len];
        let mut total_a = vec![0.0; t_len];
        let (mut sum_o, mut sum_a) = (0.0, 0.0);
        for (i, name) in set.users.iter().enumerate() {
            let d = &model.profiles[w][i].dispatch[iv.choice[w][i]];
            let original: Vec<f64> = (0..t_len).map(|t| s.load[i][t] - s.renewable[i][t]).collect();
            let after: Vec<f64> =
                (0..t_len).map(|t| original[t] + d.charge[t] - d.discharge[t]).collect();
            for t in 0..t_len {
                total_o[t] += original[t];
                total_a[t] += after[t];
            }
            let (po, pa) = (peak(&original), peak(&after));
            sum_o += po;
            sum_a += pa;
            users.push(UserPeak { scenario: s.id.clone(), user: name.clone(), original: po, after: pa });
        }
        for t in 0..t_len {
            slots.push(PeakSlot { scenario: s.id.clone(), slot: t + 1, original: total_o[t], after: total_a[t] });
        }
        let (so, sa) = (peak(&total_o), peak(&total_a));
        demand_o += s.probability * sum_o;
        demand_a += s.probability * sum_a;
        system_o += s.probability * so;
        system_a += s.probability * sa;
        scenarios.push(ScenarioPeak {
            scenario: s.id.clone(),
            probability: s.probability,
            system_original: so,
            system_after: sa,
            demand_original: sum_o,
            demand_after: sum_a,
        });
    }
    Ok(PeakReport {
        price,
        slots,
        users,
        scenarios,
        demand_peak_reduction_pct: reduction_pct(demand_o, demand_a),
        system_peak_reduction_pct: reduction_pct(system_o, system_a),
    })
}
