//! Synthetic three-user dataset: one commercial user with a midday load peak
//! and night-time wind, two residential users with morning and evening peaks
//! and rooftop solar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vshare_core::model::{Scenario, ScenarioSet, TimeGrid};
use vshare_core::Result;

pub const SEED: u64 = 20_190_501;
pub const SLOTS: usize = 24;
pub const SCENARIOS: usize = 7;

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    (-0.5 * ((hour - center) / width).powi(2)).exp()
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Load and renewable profile of user type `kind` (0, 1, 2) for one day.
fn profile(kind: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let scale: f64 = rng.gen_range(0.85..1.15);
    let weather: f64 = rng.gen_range(0.4..1.0);
    let mut load = Vec::with_capacity(SLOTS);
    let mut ren = Vec::with_capacity(SLOTS);
    for t in 0..SLOTS {
        let h = t as f64 + 0.5;
        let noise: f64 = rng.gen_range(0.93..1.07);
        let (l, r) = match kind {
            0 => {
                let l = 1.2 + 3.6 * bump(h, 12.5, 2.5);
                let night = bump(h, 2.0, 3.0) + bump(h, 24.0, 2.5);
                (l, 2.2 * weather * night)
            }
            _ => {
                let (m, e) = if kind == 1 { (7.5, 19.5) } else { (8.5, 20.5) };
                let l = 0.5 + 2.4 * bump(h, m, 1.3) + 3.0 * bump(h, e, 1.6);
                let sun = if (6.0..19.0).contains(&h) { bump(h, 12.5, 2.6) } else { 0.0 };
                (l, 2.8 * weather * sun)
            }
        };
        load.push(round3(scale * l * noise));
        ren.push(round3(r * rng.gen_range(0.9..1.1)));
    }
    (load, ren)
}

/// The bundled dataset; identical for every call.
pub fn synthetic_dataset() -> Result<ScenarioSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let days: Vec<u32> = (0..SCENARIOS).map(|_| rng.gen_range(35..70)).collect();
    let total: u32 = days.iter().sum();
    let scenarios = days
        .iter()
        .enumerate()
        .map(|(w, d)| {
            let (load, renewable) = (0..3).map(|k| profile(k, &mut rng)).unzip();
            Scenario {
                id: format!("w{}", w + 1),
                probability: f64::from(*d) / f64::from(total),
                load,
                renewable,
            }
        })
        .collect();
    ScenarioSet::new(
        TimeGrid::hourly(SLOTS),
        vec!["type1".into(), "type2".into(), "type3".into()],
        scenarios,
    )
}
