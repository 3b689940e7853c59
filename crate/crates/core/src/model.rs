//! Domain types and closed-form model arithmetic: tariffs, power balance,
//! storage dynamics, net cost and the capital recovery factor.

use crate::error::{Error, Result};

/// Round-off allowance for grid draw and renewable use.
pub const ROUND_OFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub slots: usize,
    pub slot_hours: f64,
}

impl TimeGrid {
    pub fn new(slots: usize, slot_hours: f64) -> Result<Self> {
        if slots == 0 {
            return Err(Error::Domain("time grid needs at least one slot".into()));
        }
        if !(slot_hours > 0.0 && slot_hours.is_finite()) {
            return Err(Error::Domain(format!("slot_hours must be positive, got {slot_hours}")));
        }
        Ok(Self { slots, slot_hours })
    }

    pub fn hourly(slots: usize) -> Self {
        Self { slots, slot_hours: 1.0 }
    }
}

/// One operational horizon: per-user load and renewable series with a probability weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub probability: f64,
    /// `load[i][t]` in kW for user `i`.
    pub load: Vec<Vec<f64>>,
    /// `renewable[i][t]` in kW for user `i`.
    pub renewable: Vec<Vec<f64>>,
}

/// A validated collection of scenarios sharing one user list and time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub time: TimeGrid,
    pub users: Vec<String>,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(time: TimeGrid, users: Vec<String>, scenarios: Vec<Scenario>) -> Result<Self> {
        let set = Self { time, users, scenarios };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Validation("scenario set has no users".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Validation("scenario set has no scenarios".into()));
        }
        let mut total = 0.0;
        for s in &self.scenarios {
            if !(s.probability >= 0.0 && s.probability.is_finite()) {
                return Err(Error::Validation(format!(
                    "scenario {} has invalid probability {}",
                    s.id, s.probability
                )));
            }
            total += s.probability;
            if s.load.len() != self.users.len() || s.renewable.len() != self.users.len() {
                return Err(Error::Validation(format!(
                    "scenario {} does not cover all {} users",
                    s.id,
                    self.users.len()
                )));
            }
            for (i, user) in self.users.iter().enumerate() {
                for (name, series) in [("load", &s.load[i]), ("renewable", &s.renewable[i])] {
                    if series.len() != self.time.slots {
                        return Err(Error::Validation(format!(
                            "scenario {} user {user}: {name} has {} slots, expected {}",
                            s.id,
                            series.len(),
                            self.time.slots
                        )));
                    }
                    if let Some(v) = series.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                        return Err(Error::Validation(format!(
                            "scenario {} user {user}: {name} value {v} is not a nonnegative number",
                            s.id
                        )));
                    }
                }
            }
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!("scenario probabilities sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// The series of user `i` in scenario `w`.
    pub fn slice(&self, user: usize, scenario: usize) -> ScenarioSlice {
        let s = &self.scenarios[scenario];
        ScenarioSlice {
            time: self.time,
            load: s.load[user].clone(),
            renewable: s.renewable[user].clone(),
        }
    }
}

/// Load and renewable series of a single user in a single scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSlice {
    pub time: TimeGrid,
    pub load: Vec<f64>,
    pub renewable: Vec<f64>,
}

impl ScenarioSlice {
    pub fn new(time: TimeGrid, load: Vec<f64>, renewable: Vec<f64>) -> Result<Self> {
        let s = Self { time, load, renewable };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.load.len() != self.time.slots || self.renewable.len() != self.time.slots {
            return Err(Error::Dimension(format!(
                "slice series have lengths {} and {}, expected {}",
                self.load.len(),
                self.renewable.len(),
                self.time.slots
            )));
        }
        if self.load.iter().chain(&self.renewable).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("load and renewable must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Net load (load minus renewable) per slot, in kW.
    pub fn net_load(&self) -> Vec<f64> {
        self.load.iter().zip(&self.renewable).map(|(l, r)| l - r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tariff {
    /// Energy price per kWh drawn from the grid.
    pub energy_price: f64,
    /// Peak-demand price per kW of maximum draw in the horizon.
    pub peak_price: f64,
    /// Feed-in price per kWh of renewable energy sold back.
    pub feed_in_price: f64,
}

impl Tariff {
    pub fn new(energy_price: f64, peak_price: f64, feed_in_price: f64) -> Result<Self> {
        let t = Self { energy_price, peak_price, feed_in_price };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { energy_price: b, peak_price: p, feed_in_price: s } = *self;
        if ![b, p, s].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("tariff prices must be finite".into()));
        }
        if !(0.0 <= s && s < b) {
            return Err(Error::Domain(format!(
                "feed-in price {s} must satisfy 0 <= feed-in < energy price {b}"
            )));
        }
        if p < 0.0 {
            return Err(Error::Domain(format!("peak price {p} is negative")));
        }
        Ok(())
    }
}

impl Default for Tariff {
    fn default() -> Self {
        Self { energy_price: 0.03, peak_price: 0.4, feed_in_price: 0.01 }
    }
}

/// Storage efficiencies, energy-level limits and cost coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageTech {
    pub user_charge_eff: f64,
    pub user_discharge_eff: f64,
    pub agg_charge_eff: f64,
    pub agg_discharge_eff: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Capacity cost over the investment phase, per kWh.
    pub capacity_cost: f64,
    /// Power-rating cost over the investment phase, per kW.
    pub power_cost: f64,
    /// Operational cost per kWh charged or discharged.
    pub operation_cost: f64,
    /// Cost per kWh of absorbing charge demand with additional resources.
    pub extra_charge_cost: f64,
    /// Cost per kWh of serving discharge demand with additional resources.
    pub extra_discharge_cost: f64,
    /// Daily capital recovery factor.
    pub kappa: f64,
}

impl StorageTech {
    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [
            ("user charge efficiency", self.user_charge_eff),
            ("user discharge efficiency", self.user_discharge_eff),
            ("aggregator charge efficiency", self.agg_charge_eff),
            ("aggregator discharge efficiency", self.agg_discharge_eff),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Domain(format!("{name} {eta} outside (0, 1]")));
            }
        }
        if !(0.0 <= self.gamma_min && self.gamma_min < self.gamma_max && self.gamma_max <= 1.0) {
            return Err(Error::Domain(format!(
                "energy-level fractions need 0 <= gamma_min < gamma_max <= 1, got [{}, {}]",
                self.gamma_min, self.gamma_max
            )));
        }
        for (name, c) in [
            ("capacity cost", self.capacity_cost),
            ("power cost", self.power_cost),
            ("operation cost", self.operation_cost),
            ("extra charge cost", self.extra_charge_cost),
            ("extra discharge cost", self.extra_discharge_cost),
            ("kappa", self.kappa),
        ] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Domain(format!("{name} {c} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    /// Same efficiency for every conversion, user and aggregator side.
    pub fn with_efficiency(mut self, eta: f64) -> Self {
        self.user_charge_eff = eta;
        self.user_discharge_eff = eta;
        self.agg_charge_eff = eta;
        self.agg_discharge_eff = eta;
        self
    }
}

impl Default for StorageTech {
    fn default() -> Self {
        Self {
            user_charge_eff: 0.95,
            user_discharge_eff: 0.95,
            agg_charge_eff: 0.95,
            agg_discharge_eff: 0.95,
            gamma_min: 0.9,
            gamma_max: 1.0,
            capacity_cost: 160.0,
            power_cost: 55.0,
            operation_cost: 0.001,
            extra_charge_cost: 0.0,
            extra_discharge_cost: 0.1,
            kappa: capital_recovery_factor(0.05, 15.0, 365.0).expect("valid defaults"),
        }
    }
}

/// Capacity purchase and dispatch of one user in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDecision {
    /// Virtual capacity in kWh.
    pub capacity: f64,
    pub renewable_used: Vec<f64>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// Energy level in kWh, indices `0..=T`.
    pub energy: Vec<f64>,
    /// Peak grid draw in kW.
    pub peak: f64,
    /// Electricity bill minus feed-in revenue.
    pub bill: f64,
}

impl UserDecision {
    /// Checks the storage, grid-draw and renewable invariants at tolerance `tol`.
    pub fn check(&self, slice: &ScenarioSlice, tech: &StorageTech, tol: f64) -> Result<()> {
        let t_len = slice.time.slots;
        let h = slice.time.slot_hours;
        if self.charge.len() != t_len
            || self.discharge.len() != t_len
            || self.renewable_used.len() != t_len
            || self.energy.len() != t_len + 1
        {
            return Err(Error::Dimension("decision series do not match the time grid".into()));
        }
        let fail = |what: String| Err(Error::Domain(what));
        for t in 0..t_len {
            if self.charge[t] < -tol || self.discharge[t] < -tol {
                return fail(format!("negative charge/discharge at slot {t}"));
            }
            if self.renewable_used[t] < -tol || self.renewable_used[t] > slice.renewable[t] + tol {
                return fail(format!("renewable use out of range at slot {t}"));
            }
            let step = self.energy[t + 1]
                - self.energy[t]
                - tech.user_charge_eff * self.charge[t] * h
                + self.discharge[t] * h / tech.user_discharge_eff;
            if step.abs() > tol {
                return fail(format!("storage dynamics violated by {step:e} at slot {}", t + 1));
            }
            let grid = slice.load[t] - self.renewable_used[t] - self.discharge[t] + self.charge[t];
            if grid < -tol || grid > self.peak + tol {
                return fail(format!("grid draw {grid} outside [0, {}] at slot {t}", self.peak));
            }
        }
        for (t, e) in self.energy.iter().enumerate() {
            if *e < -tol || *e > self.capacity + tol {
                return fail(format!("energy level {e} outside [0, {}] at index {t}", self.capacity));
            }
        }
        if (self.energy[0] - self.energy[t_len]).abs() > tol {
            return fail("energy level is not periodic".into());
        }
        Ok(())
    }

    pub fn grid_draw(&self, slice: &ScenarioSlice) -> Result<Vec<f64>> {
        power_balance(&slice.load, &self.renewable_used, &self.charge, &self.discharge)
    }
}

fn same_len(series: &[&[f64]]) -> Result<usize> {
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Dimension(format!(
            "series lengths differ: {:?}",
            series.iter().map(|s| s.len()).collect::<Vec<_>>()
        )));
    }
    Ok(n)
}

/// Grid draw per slot: load − renewable used − discharge + charge. Not clamped.
pub fn power_balance(
    load: &[f64],
    renewable_used: &[f64],
    charge: &[f64],
    discharge: &[f64],
) -> Result<Vec<f64>> {
    same_len(&[load, renewable_used, charge, discharge])?;
    Ok((0..load.len())
        .map(|t| load[t] - renewable_used[t] - discharge[t] + charge[t])
        .collect())
}

/// Energy charge over the horizon plus the peak charge on the maximum draw.
pub fn electricity_bill(grid_draw: &[f64], tariff: &Tariff, slot_hours: f64) -> Result<f64> {
    if grid_draw.is_empty() {
        return Err(Error::Dimension("empty grid-draw series".into()));
    }
    let mut energy = 0.0;
    let mut peak = 0.0_f64;
    for (t, &g) in grid_draw.iter().enumerate() {
        if g < -ROUND_OFF {
            return Err(Error::Domain(format!("negative grid draw {g} at slot {t}")));
        }
        let g = g.max(0.0);
        energy += g * slot_hours;
        peak = peak.max(g);
    }
    Ok(tariff.energy_price * energy + tariff.peak_price * peak)
}

pub fn renewable_revenue(
    renewable: &[f64],
    renewable_used: &[f64],
    tariff: &Tariff,
    slot_hours: f64,
) -> Result<f64> {
    same_len(&[renewable, renewable_used])?;
    let mut sold = 0.0;
    for (t, (r, u)) in renewable.iter().zip(renewable_used).enumerate() {
        if *u > r + ROUND_OFF {
            return Err(Error::Domain(format!("renewable use {u} exceeds generation {r} at slot {t}")));
        }
        sold += (r - u).max(0.0) * slot_hours;
    }
    Ok(tariff.feed_in_price * sold)
}

/// Bill minus feed-in revenue for the dispatch in `decision`, excluding the capacity payment.
pub fn user_bill(decision: &UserDecision, slice: &ScenarioSlice, tariff: &Tariff) -> Result<f64> {
    let h = slice.time.slot_hours;
    let grid = decision.grid_draw(slice)?;
    Ok(electricity_bill(&grid, tariff, h)?
        - renewable_revenue(&slice.renewable, &decision.renewable_used, tariff, h)?)
}

/// Capacity payment plus bill minus feed-in revenue.
pub fn user_net_cost(
    decision: &UserDecision,
    slice: &ScenarioSlice,
    tariff: &Tariff,
    price: f64,
) -> Result<f64> {
    Ok(price * decision.capacity + user_bill(decision, slice, tariff)?)
}

/// Annuity factor turning an investment-phase cost into a per-day cost.
pub fn capital_recovery_factor(rate: f64, years: f64, days_per_year: f64) -> Result<f64> {
    if !(rate >= 0.0 && years >= 1.0 && days_per_year >= 1.0) {
        return Err(Error::Precondition(format!(
            "need r >= 0, y >= 1, Y_d >= 1; got r={rate}, y={years}, Y_d={days_per_year}"
        )));
    }
    // At and below this rate the analytic r -> 0 limit is returned; the
    // exact value differs from it by a relative (y + 1) r / 2.
    if rate <= ZERO_RATE_CUTOFF {
        return Ok(1.0 / (years * days_per_year));
    }
    let growth_m1 = (years * rate.ln_1p()).exp_m1();
    Ok(rate * (1.0 + growth_m1) / growth_m1 / days_per_year)
}

/// Interest rates up to this value are treated as zero in the capital recovery factor.
pub const ZERO_RATE_CUTOFF: f64 = 1e-9;

/// Daily peak price from a monthly one: `π_M · p_month / Σ_d p_day`.
pub fn daily_peak_price(monthly_price: f64, monthly_peak: f64, daily_peaks: &[f64]) -> Result<f64> {
    let total: f64 = daily_peaks.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("daily peaks must have a positive sum".into()));
    }
    Ok(monthly_price * monthly_peak / total)
}

/// Daily peak price assuming every day of the month reaches the monthly peak.
pub fn daily_peak_price_uniform(monthly_price: f64, days: usize) -> Result<f64> {
    if days == 0 {
        return Err(Error::Domain("a month needs at least one day".into()));
    }
    Ok(monthly_price / days as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_tariff() -> Tariff {
        Tariff::new(0.03, 0.4, 0.01).unwrap()
    }

    #[test]
    fn power_balance_cases() {
        let z = [0.0, 0.0];
        assert_eq!(power_balance(&[2.0, 0.0], &z, &z, &z).unwrap(), vec![2.0, 0.0]);
        assert_eq!(
            power_balance(&[2.0, 0.0], &z, &[0.0, 1.0], &[1.0, 0.0]).unwrap(),
            vec![1.0, 1.0]
        );
        assert_eq!(power_balance(&[1.0, 1.0], &[1.0, 1.0], &z, &z).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(power_balance(&[1.0], &z, &z, &z), Err(Error::Dimension(_))));
    }

    #[test]
    fn bill_cases() {
        let t = tiny_tariff();
        assert!((electricity_bill(&[2.0, 0.0], &t, 1.0).unwrap() - 0.86).abs() < 1e-12);
        assert_eq!(electricity_bill(&[0.0, 0.0], &t, 1.0).unwrap(), 0.0);
        assert!((electricity_bill(&[1.0, 1.0], &t, 1.0).unwrap() - 0.46).abs() < 1e-12);
        assert!(electricity_bill(&[], &t, 1.0).is_err());
        assert_eq!(electricity_bill(&[-1e-12, 0.0], &t, 1.0).unwrap(), 0.0);
        assert!(electricity_bill(&[-1e-6, 0.0], &t, 1.0).is_err());
        // half-hour slots halve the energy term only
        assert!((electricity_bill(&[2.0, 0.0], &t, 0.5).unwrap() - 0.83).abs() < 1e-12);
    }

    #[test]
    fn revenue_cases() {
        let t = tiny_tariff();
        assert_eq!(renewable_revenue(&[1.0, 1.0], &[1.0, 1.0], &t, 1.0).unwrap(), 0.0);
        assert!((renewable_revenue(&[2.0, 0.0], &[0.0, 0.0], &t, 1.0).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(renewable_revenue(&[0.0, 0.0], &[0.0, 0.0], &t, 1.0).unwrap(), 0.0);
        assert!(renewable_revenue(&[0.0], &[1.0], &t, 1.0).is_err());
    }

    #[test]
    fn net_cost_of_tiny_dispatch() {
        let slice = ScenarioSlice::new(TimeGrid::hourly(2), vec![2.0, 0.0], vec![0.0, 0.0]).unwrap();
        let t = tiny_tariff();
        let idle = UserDecision {
            capacity: 0.0,
            renewable_used: vec![0.0; 2],
            charge: vec![0.0; 2],
            discharge: vec![0.0; 2],
            energy: vec![0.0; 3],
            peak: 2.0,
            bill: 0.86,
        };
        assert!((user_net_cost(&idle, &slice, &t, 0.2).unwrap() - 0.86).abs() < 1e-12);
        let shaved = UserDecision {
            capacity: 1.0,
            charge: vec![0.0, 1.0],
            discharge: vec![1.0, 0.0],
            energy: vec![1.0, 0.0, 1.0],
            peak: 1.0,
            bill: 0.46,
            ..idle.clone()
        };
        let tech = StorageTech::default().with_efficiency(1.0);
        shaved.check(&slice, &tech, 1e-12).unwrap();
        assert!((user_net_cost(&shaved, &slice, &t, 0.2).unwrap() - 0.66).abs() < 1e-12);
        let mut free = idle.clone();
        free.capacity = 5.0;
        assert!((user_net_cost(&free, &slice, &t, 0.0).unwrap() - 0.86).abs() < 1e-12);
    }

    #[test]
    fn kappa_values() {
        let k0 = capital_recovery_factor(0.0, 10.0, 365.0).unwrap();
        assert!((k0 - 1.0 / 3650.0).abs() < 1e-18);
        let k = capital_recovery_factor(0.05, 15.0, 365.0).unwrap();
        assert!((k - 2.639e-4).abs() < 1e-7);
        let tiny = capital_recovery_factor(1e-9, 10.0, 365.0).unwrap();
        assert!(((tiny - k0) / k0).abs() < 1e-9);
        assert!(capital_recovery_factor(-0.1, 10.0, 365.0).is_err());
    }

    #[test]
    fn kappa_is_continuous_across_branch() {
        let below = capital_recovery_factor(ZERO_RATE_CUTOFF, 20.0, 365.0).unwrap();
        let above = capital_recovery_factor(ZERO_RATE_CUTOFF * 1.01, 20.0, 365.0).unwrap();
        assert!(((above - below) / below).abs() < 1e-7);
        let r: f64 = 0.05;
        let direct = r * (1.0 + r).powi(20) / ((1.0 + r).powi(20) - 1.0) / 365.0;
        let k = capital_recovery_factor(r, 20.0, 365.0).unwrap();
        assert!(((k - direct) / direct).abs() < 1e-13);
    }

    #[test]
    fn monthly_peak_price_scaling() {
        let p = daily_peak_price_uniform(10.8, 30).unwrap();
        assert!((p - 0.36).abs() < 1e-12);
        let p = daily_peak_price(12.0, 5.0, &[5.0; 30]).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tariff_rejects_feed_in_above_energy_price() {
        assert!(Tariff::new(0.03, 0.4, 0.05).is_err());
        assert!(Tariff::new(0.03, -0.1, 0.01).is_err());
    }
}
