//! Benchmark: each user buys and operates a physical battery of one fixed
//! size across all scenarios.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ScenarioSet, StorageTech, Tariff, UserDecision};
use crate::solver::{solve_lp, LinearProgram, LpStatus, RowKind};

/// Unit prices a user pays for physical storage, over the investment phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkPrices {
    /// Per kWh of capacity.
    pub capacity: f64,
    /// Per kW of power rating.
    pub power: f64,
}

/// Capacity markup of the retailer preset over production cost.
pub const RETAIL_MARKUP: f64 = 2.76;

impl BenchmarkPrices {
    /// Users pay production cost.
    pub fn production(tech: &StorageTech) -> Self {
        Self { capacity: tech.capacity_cost, power: tech.power_cost }
    }

    /// Capacity at `markup` times production cost; power rating at cost.
    pub fn retailer(tech: &StorageTech, markup: f64) -> Self {
        Self { capacity: markup * tech.capacity_cost, power: tech.power_cost }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub user: String,
    pub capacity: f64,
    pub power: f64,
    /// Expected daily net cost.
    pub cost: f64,
    /// `κ·(c_u^x·x + c_u^p·p)`.
    pub capital_cost: f64,
    /// Expected charge/discharge operating cost.
    pub operation_cost: f64,
    /// Expected bill minus feed-in revenue.
    pub bill: f64,
    /// Dispatch per scenario.
    pub dispatch: Vec<UserDecision>,
}

pub fn solve_benchmark(
    set: &ScenarioSet,
    user: usize,
    tariff: &Tariff,
    tech: &StorageTech,
    prices: BenchmarkPrices,
) -> Result<BenchmarkResult> {
    set.validate()?;
    tariff.validate()?;
    tech.validate()?;
    if user >= set.users.len() {
        return Err(Error::Domain(format!("no user {user}")));
    }
    if !(prices.capacity >= 0.0 && prices.power >= 0.0) {
        return Err(Error::Domain("storage prices must be nonnegative".into()));
    }
    let t_len = set.time.slots;
    let h = set.time.slot_hours;
    let (eta_c, eta_d) = (tech.user_charge_eff, tech.user_discharge_eff);
    let block = 2 + 3 * t_len;
    let base = |w: usize| 2 + w * block;
    let pm = |w: usize| base(w);
    let e0 = |w: usize| base(w) + 1;
    let ru = |w: usize, t: usize| base(w) + 2 + t;
    let ch = |w: usize, t: usize| base(w) + 2 + t_len + t;
    let dis = |w: usize, t: usize| base(w) + 2 + 2 * t_len + t;

    let n_s = set.scenarios.len();
    let mut lp = LinearProgram::new(2 + n_s * block);
    lp.cost[0] = tech.kappa * prices.capacity;
    lp.cost[1] = tech.kappa * prices.power;
    let mut constant = 0.0;
    for (w, s) in set.scenarios.iter().enumerate() {
        let rho = s.probability;
        let load = &s.load[user];
        let ren = &s.renewable[user];
        constant += rho
            * h
            * (tariff.energy_price * load.iter().sum::<f64>()
                - tariff.feed_in_price * ren.iter().sum::<f64>());
        lp.cost[pm(w)] = rho * tariff.peak_price;
        for t in 0..t_len {
            lp.set_bounds(ru(w, t), 0.0, ren[t]);
            lp.cost[ru(w, t)] = rho * h * (tariff.feed_in_price - tariff.energy_price);
            lp.cost[ch(w, t)] = rho * h * (tariff.energy_price + tech.operation_cost);
            lp.cost[dis(w, t)] = rho * h * (tech.operation_cost - tariff.energy_price);
        }
        let level = |t: usize| -> Vec<(usize, f64)> {
            let mut terms = vec![(e0(w), 1.0)];
            for tau in 0..t {
                terms.push((ch(w, tau), eta_c * h));
                terms.push((dis(w, tau), -h / eta_d));
            }
            terms
        };
        lp.add_row(&level(t_len)[1..], RowKind::Eq, 0.0);
        for t in 0..t_len {
            let mut hi = level(t);
            hi.push((0, -tech.gamma_max));
            lp.add_row(&hi, RowKind::Le, 0.0);
            let mut lo = level(t);
            lo.push((0, -tech.gamma_min));
            lp.add_row(&lo, RowKind::Ge, 0.0);
            let draw = [(ru(w, t), -1.0), (dis(w, t), -1.0), (ch(w, t), 1.0)];
            lp.add_row(&draw, RowKind::Ge, -load[t]);
            let mut capped = draw.to_vec();
            capped.push((pm(w), -1.0));
            lp.add_row(&capped, RowKind::Le, -load[t]);
            lp.add_row(&[(ch(w, t), 1.0), (1, -1.0)], RowKind::Le, 0.0);
            lp.add_row(&[(dis(w, t), 1.0), (1, -1.0)], RowKind::Le, 0.0);
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("benchmark returned {:?}", sol.status)));
    }
    let z = &sol.x;
    let capacity = z[0].max(0.0) + 0.0;
    let power = z[1].max(0.0) + 0.0;
    let mut dispatch = Vec::with_capacity(n_s);
    let mut bill = 0.0;
    let mut operation_cost = 0.0;
    for (w, s) in set.scenarios.iter().enumerate() {
        let charge: Vec<f64> = (0..t_len).map(|t| z[ch(w, t)]).collect();
        let discharge: Vec<f64> = (0..t_len).map(|t| z[dis(w, t)]).collect();
        let renewable_used: Vec<f64> = (0..t_len).map(|t| z[ru(w, t)]).collect();
        let mut energy = vec![z[e0(w)]];
        for t in 0..t_len {
            energy.push(energy[t] + eta_c * charge[t] * h - discharge[t] * h / eta_d);
        }
        let mut b = tariff.peak_price * z[pm(w)];
        for t in 0..t_len {
            b += tariff.energy_price * h * (s.load[user][t] - renewable_used[t] - discharge[t] + charge[t])
                - tariff.feed_in_price * h * (s.renewable[user][t] - renewable_used[t]);
        }
        let through: f64 = charge.iter().chain(&discharge).sum();
        bill += s.probability * b;
        operation_cost += s.probability * tech.operation_cost * through * h;
        dispatch.push(UserDecision {
            capacity,
            renewable_used,
            charge,
            discharge,
            energy,
            peak: z[pm(w)],
            bill: b,
        });
    }
    Ok(BenchmarkResult {
        user: set.users[user].clone(),
        capacity,
        power,
        cost: sol.objective + constant,
        capital_cost: tech.kappa * (prices.capacity * capacity + prices.power * power),
        operation_cost,
        bill,
        dispatch,
    })
}

/// Benchmark for every user.
pub fn solve_benchmarks(
    set: &ScenarioSet,
    tariff: &Tariff,
    tech: &StorageTech,
    prices: BenchmarkPrices,
) -> Result<Vec<BenchmarkResult>> {
    (0..set.users.len())
        .into_par_iter()
        .map(|i| solve_benchmark(set, i, tariff, tech, prices))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn tiny_buys_one_kwh() {
        let set = fixtures::tiny_set();
        let tech = fixtures::lossless_tech();
        let r = solve_benchmark(&set, 0, &Tariff::default(), &tech, BenchmarkPrices::production(&tech)).unwrap();
        assert!((r.capacity - 1.0).abs() < 1e-9);
        assert!((r.power - 1.0).abs() < 1e-9);
        // 0.46 bill + 0.1 + 0.05 capital + 0.002 operation
        assert!((r.cost - 0.612).abs() < 1e-9);
        assert!((r.capital_cost + r.operation_cost + r.bill - r.cost).abs() < 1e-9);
        for (d, s) in r.dispatch.iter().zip(0..) {
            d.check(&set.slice(0, s), &tech, 1e-8).unwrap();
        }
    }

    #[test]
    fn prohibitive_prices_buy_nothing() {
        let set = fixtures::tiny_set();
        let tech = fixtures::lossless_tech();
        let prices = BenchmarkPrices { capacity: 1e6, power: 1e6 };
        let r = solve_benchmark(&set, 0, &Tariff::default(), &tech, prices).unwrap();
        assert_eq!((r.capacity, r.power), (0.0, 0.0));
        assert!((r.cost - 0.86).abs() < 1e-12);
    }

    #[test]
    fn retailer_preset_marks_up_capacity_only() {
        let tech = StorageTech::default();
        let r = BenchmarkPrices::retailer(&tech, RETAIL_MARKUP);
        assert!((r.capacity - 2.76 * 160.0).abs() < 1e-9);
        assert_eq!(r.power, tech.power_cost);
    }
}
