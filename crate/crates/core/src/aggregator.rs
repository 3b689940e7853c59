//! First stage: netting user dispatch, sizing physical storage, and pricing
//! virtual capacity.
//!
//! Between two consecutive thresholds of the union of all users' threshold
//! sets every user's capacity and limiting dispatch is constant, so the
//! limiting profit is affine there: `q·E[Σx] − C_a`. The model evaluates each
//! interval once and caches it; one-sided limits at a threshold are the affine
//! pieces of the neighbouring intervals evaluated at the threshold itself.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ScenarioSet, StorageTech, Tariff, TimeGrid, UserDecision, ROUND_OFF};
use crate::solver::{solve_lp, LinearProgram, LpStatus, RowKind, WarmStart};
use crate::user::{build_profile, build_user_problem, solve_user_warm, ThresholdProfile, UserProblem};

/// Net charge and discharge the aggregator must serve, per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDemand {
    pub charge: Vec<Vec<f64>>,
    pub discharge: Vec<Vec<f64>>,
}

/// `([Σch − Σdis]⁺, [Σdis − Σch]⁺)` per slot.
pub fn aggregate_net(charges: &[&[f64]], discharges: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    if charges.len() != discharges.len() {
        return Err(Error::Dimension("charge and discharge user counts differ".into()));
    }
    let t_len = charges.first().map_or(0, |c| c.len());
    if charges.iter().chain(discharges).any(|s| s.len() != t_len) {
        return Err(Error::Dimension("user series lengths differ".into()));
    }
    let mut ch = vec![0.0; t_len];
    let mut dis = vec![0.0; t_len];
    for t in 0..t_len {
        let net: f64 = charges.iter().map(|c| c[t]).sum::<f64>() - discharges.iter().map(|d| d[t]).sum::<f64>();
        if net > 0.0 {
            ch[t] = net;
        } else if net < 0.0 {
            dis[t] = -net;
        }
    }
    Ok((ch, dis))
}

impl AggregateDemand {
    /// Nets `decisions[ω][i]`.
    pub fn from_decisions(decisions: &[Vec<UserDecision>]) -> Result<Self> {
        let mut charge = Vec::with_capacity(decisions.len());
        let mut discharge = Vec::with_capacity(decisions.len());
        for users in decisions {
            let ch: Vec<&[f64]> = users.iter().map(|d| d.charge.as_slice()).collect();
            let dis: Vec<&[f64]> = users.iter().map(|d| d.discharge.as_slice()).collect();
            let (c, d) = aggregate_net(&ch, &dis)?;
            charge.push(c);
            discharge.push(d);
        }
        Ok(Self { charge, discharge })
    }
}

/// Physical storage plan for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAllocation {
    pub storage_charge: Vec<f64>,
    pub storage_discharge: Vec<f64>,
    pub extra_charge: Vec<f64>,
    pub extra_discharge: Vec<f64>,
    /// Physical energy level, indices `0..=T`.
    pub energy: Vec<f64>,
}

/// Optimal physical sizing and its expected daily cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostAllocation {
    pub capacity: f64,
    pub power: f64,
    pub scenarios: Vec<ScenarioAllocation>,
    pub cost: f64,
}

impl CostAllocation {
    /// Expected cost recomputed from the allocation.
    pub fn evaluate(&self, tech: &StorageTech, probabilities: &[f64], slot_hours: f64) -> f64 {
        let mut cost = tech.kappa * (tech.capacity_cost * self.capacity + tech.power_cost * self.power);
        for (s, rho) in self.scenarios.iter().zip(probabilities) {
            let through: f64 = s.storage_charge.iter().chain(&s.storage_discharge).sum();
            let extra: f64 = s.extra_charge.iter().sum::<f64>() * tech.extra_charge_cost
                + s.extra_discharge.iter().sum::<f64>() * tech.extra_discharge_cost;
            cost += rho * slot_hours * (tech.operation_cost * through + extra);
        }
        cost
    }
}

pub fn solve_cost_allocation(
    demand: &AggregateDemand,
    tech: &StorageTech,
    probabilities: &[f64],
    time: TimeGrid,
) -> Result<CostAllocation> {
    tech.validate()?;
    let n_s = probabilities.len();
    if demand.charge.len() != n_s || demand.discharge.len() != n_s {
        return Err(Error::Dimension("demand and probabilities disagree on scenario count".into()));
    }
    let t_len = time.slots;
    let h = time.slot_hours;
    for (c, d) in demand.charge.iter().zip(&demand.discharge) {
        if c.len() != t_len || d.len() != t_len {
            return Err(Error::Dimension("demand series do not match the time grid".into()));
        }
        for t in 0..t_len {
            if c[t] < 0.0 || d[t] < 0.0 || (c[t] > 0.0 && d[t] > 0.0) {
                return Err(Error::Domain(format!("demand at slot {t} is not net")));
            }
        }
    }

    // columns: X, P, then per active scenario e0 and the storage-served series
    struct Block {
        scenario: usize,
        e0: usize,
        ch: Vec<Option<usize>>,
        dis: Vec<Option<usize>>,
    }
    let mut cols = 2;
    let mut blocks = Vec::new();
    for w in 0..n_s {
        let active = demand.charge[w].iter().chain(&demand.discharge[w]).any(|v| *v > 0.0);
        if !active || probabilities[w] <= 0.0 {
            continue;
        }
        let e0 = cols;
        cols += 1;
        let mut take = |series: &Vec<f64>| -> Vec<Option<usize>> {
            series
                .iter()
                .map(|&v| {
                    (v > 0.0).then(|| {
                        cols += 1;
                        cols - 1
                    })
                })
                .collect()
        };
        let ch = take(&demand.charge[w]);
        let dis = take(&demand.discharge[w]);
        blocks.push(Block { scenario: w, e0, ch, dis });
    }

    let mut lp = LinearProgram::new(cols);
    lp.cost[0] = tech.kappa * tech.capacity_cost;
    lp.cost[1] = tech.kappa * tech.power_cost;
    let (eta_c, eta_d) = (tech.agg_charge_eff, tech.agg_discharge_eff);
    let mut constant = 0.0;
    for b in &blocks {
        let rho = probabilities[b.scenario];
        for t in 0..t_len {
            constant += rho
                * h
                * (tech.extra_charge_cost * demand.charge[b.scenario][t]
                    + tech.extra_discharge_cost * demand.discharge[b.scenario][t]);
            if let Some(j) = b.ch[t] {
                lp.set_bounds(j, 0.0, demand.charge[b.scenario][t]);
                lp.cost[j] = rho * h * (tech.operation_cost - tech.extra_charge_cost);
                lp.add_row(&[(j, 1.0), (1, -1.0)], RowKind::Le, 0.0);
            }
            if let Some(j) = b.dis[t] {
                lp.set_bounds(j, 0.0, demand.discharge[b.scenario][t]);
                lp.cost[j] = rho * h * (tech.operation_cost - tech.extra_discharge_cost);
                lp.add_row(&[(j, 1.0), (1, -1.0)], RowKind::Le, 0.0);
            }
        }
        let level = |t: usize| -> Vec<(usize, f64)> {
            let mut terms = vec![(b.e0, 1.0)];
            for tau in 0..t {
                if let Some(j) = b.ch[tau] {
                    terms.push((j, eta_c * h));
                }
                if let Some(j) = b.dis[tau] {
                    terms.push((j, -h / eta_d));
                }
            }
            terms
        };
        let mut cycle = level(t_len);
        cycle.remove(0);
        if !cycle.is_empty() {
            lp.add_row(&cycle, RowKind::Eq, 0.0);
        }
        for t in 0..t_len {
            let mut upper = level(t);
            upper.push((0, -tech.gamma_max));
            lp.add_row(&upper, RowKind::Le, 0.0);
            let mut lower = level(t);
            lower.push((0, -tech.gamma_min));
            lp.add_row(&lower, RowKind::Ge, 0.0);
        }
    }

    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("cost allocation returned {:?}", sol.status)));
    }
    let z = &sol.x;
    let capacity = z[0] + 0.0;
    let power = z[1] + 0.0;
    let mut scenarios: Vec<ScenarioAllocation> = (0..n_s)
        .map(|w| ScenarioAllocation {
            storage_charge: vec![0.0; t_len],
            storage_discharge: vec![0.0; t_len],
            extra_charge: demand.charge[w].clone(),
            extra_discharge: demand.discharge[w].clone(),
            energy: vec![tech.gamma_min * capacity; t_len + 1],
        })
        .collect();
    for b in &blocks {
        let s = &mut scenarios[b.scenario];
        for t in 0..t_len {
            if let Some(j) = b.ch[t] {
                s.storage_charge[t] = z[j];
                s.extra_charge[t] = (demand.charge[b.scenario][t] - z[j]).max(0.0);
            }
            if let Some(j) = b.dis[t] {
                s.storage_discharge[t] = z[j];
                s.extra_discharge[t] = (demand.discharge[b.scenario][t] - z[j]).max(0.0);
            }
        }
        s.energy[0] = z[b.e0];
        for t in 0..t_len {
            s.energy[t + 1] =
                s.energy[t] + eta_c * s.storage_charge[t] * h - s.storage_discharge[t] * h / eta_d;
        }
    }
    Ok(CostAllocation { capacity, power, scenarios, cost: sol.objective + constant })
}

/// `Σ_ω ρ^ω · q · Σ_i x_i^ω` for `capacities[ω][i]`.
pub fn expected_revenue(q: f64, capacities: &[Vec<f64>], probabilities: &[f64]) -> f64 {
    capacities
        .iter()
        .zip(probabilities)
        .map(|(xs, rho)| rho * q * xs.iter().sum::<f64>())
        .sum()
}

/// Outcome of pricing virtual capacity at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitPoint {
    pub price: f64,
    /// `None` for the limiting (ε → 0) evaluation.
    pub penalty: Option<f64>,
    /// Expected total virtual capacity sold.
    pub sold: f64,
    pub revenue: f64,
    pub cost: f64,
    pub profit: f64,
    pub capacity: f64,
    pub power: f64,
    /// Expected net cost `q·x + bill` per user.
    pub user_costs: Vec<f64>,
}

/// Cached limiting evaluation of one threshold interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalProfit {
    pub lower: f64,
    /// `∞` for the last interval.
    pub upper: f64,
    /// Profile interval index per `[ω][i]`.
    pub choice: Vec<Vec<usize>>,
    pub sold: f64,
    /// Expected bill per user, excluding the capacity payment.
    pub user_bills: Vec<f64>,
    /// Expected capacity bought per user.
    pub user_capacity: Vec<f64>,
    pub allocation: CostAllocation,
}

impl IntervalProfit {
    pub fn profit(&self, q: f64) -> f64 {
        q * self.sold - self.allocation.cost
    }

    pub fn point(&self, q: f64) -> ProfitPoint {
        ProfitPoint {
            price: q,
            penalty: None,
            sold: self.sold,
            revenue: q * self.sold,
            cost: self.allocation.cost,
            profit: self.profit(q),
            capacity: self.allocation.capacity,
            power: self.allocation.power,
            user_costs: self.user_bills.iter().zip(&self.user_capacity).map(|(b, x)| b + q * x).collect(),
        }
    }
}

/// Users' threshold profiles plus everything the aggregator needs to price.
#[derive(Debug)]
pub struct AggregatorModel {
    pub scenarios: ScenarioSet,
    pub tariff: Tariff,
    pub tech: StorageTech,
    /// `profiles[ω][i]`.
    pub profiles: Vec<Vec<ThresholdProfile>>,
    thresholds: Vec<f64>,
    intervals: Mutex<Vec<Option<IntervalProfit>>>,
}

impl AggregatorModel {
    pub fn new(scenarios: ScenarioSet, tariff: Tariff, tech: StorageTech) -> Result<Self> {
        scenarios.validate()?;
        tariff.validate()?;
        tech.validate()?;
        let n_u = scenarios.users.len();
        let pairs: Vec<(usize, usize)> =
            (0..scenarios.scenarios.len()).flat_map(|w| (0..n_u).map(move |i| (w, i))).collect();
        let flat: Vec<ThresholdProfile> = pairs
            .par_iter()
            .map(|&(w, i)| {
                build_profile(
                    &scenarios.users[i],
                    &scenarios.scenarios[w].id,
                    &scenarios.slice(i, w),
                    &tariff,
                    &tech,
                )
            })
            .collect::<Result<_>>()?;
        let profiles: Vec<Vec<ThresholdProfile>> = flat.chunks(n_u.max(1)).map(|c| c.to_vec()).collect();
        let mut thresholds: Vec<f64> = profiles.iter().flatten().flat_map(|p| p.prices.iter().copied()).collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup_by(|b, a| (*b - *a).abs() <= ROUND_OFF);
        let slots = thresholds.len();
        Ok(Self {
            scenarios,
            tariff,
            tech,
            profiles,
            thresholds,
            intervals: Mutex::new(vec![None; slots]),
        })
    }

    /// Union of all users' threshold prices, increasing, starting at 0.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.probabilities()
    }

    /// Interval `k` is `(a_k, a_{k+1})`, the last one unbounded.
    pub fn interval(&self, k: usize) -> Result<IntervalProfit> {
        if k >= self.thresholds.len() {
            return Err(Error::Domain(format!("no interval {k}")));
        }
        if let Some(hit) = &self.intervals.lock().expect("interval cache").get(k).cloned().flatten() {
            return Ok(hit.clone());
        }
        let lower = self.thresholds[k];
        let upper = self.thresholds.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let probe = if upper.is_finite() { 0.5 * (lower + upper) } else { 2.0 * lower + 1.0 };
        let probs = self.probabilities();
        let choice: Vec<Vec<usize>> = self
            .profiles
            .iter()
            .map(|users| users.iter().map(|p| p.prices.partition_point(|&a| a < probe) - 1).collect())
            .collect();
        let decisions: Vec<Vec<UserDecision>> = self
            .profiles
            .iter()
            .zip(&choice)
            .map(|(users, ks)| users.iter().zip(ks).map(|(p, &k)| p.dispatch[k].clone()).collect())
            .collect();
        let demand = AggregateDemand::from_decisions(&decisions)?;
        let allocation = solve_cost_allocation(&demand, &self.tech, &probs, self.scenarios.time)?;
        let capacities: Vec<Vec<f64>> =
            decisions.iter().map(|users| users.iter().map(|d| d.capacity).collect()).collect();
        let sold = expected_revenue(1.0, &capacities, &probs);
        let mut user_bills = vec![0.0; self.scenarios.users.len()];
        let mut user_capacity = vec![0.0; self.scenarios.users.len()];
        for (users, rho) in decisions.iter().zip(&probs) {
            for (i, d) in users.iter().enumerate() {
                user_bills[i] += rho * d.bill;
                user_capacity[i] += rho * d.capacity;
            }
        }
        let entry = IntervalProfit { lower, upper, choice, sold, user_bills, user_capacity, allocation };
        self.intervals.lock().expect("interval cache")[k] = Some(entry.clone());
        Ok(entry)
    }

    /// Interval containing a non-threshold price.
    pub fn interval_of(&self, q: f64) -> Result<usize> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Domain(format!("price must be positive, got {q}")));
        }
        if let Some(j) = self.thresholds.iter().position(|&a| (q - a).abs() <= ROUND_OFF) {
            return Err(Error::AmbiguousPrice {
                price: q,
                lower: if j == 0 { 0.0 } else { self.thresholds[j - 1] },
                upper: self.thresholds.get(j + 1).copied().unwrap_or(f64::INFINITY),
            });
        }
        Ok(self.thresholds.partition_point(|&a| a < q) - 1)
    }

    /// Profit in the limit ε → 0 at a non-threshold price.
    pub fn limiting_profit(&self, q: f64) -> Result<ProfitPoint> {
        Ok(self.interval(self.interval_of(q)?)?.point(q))
    }

    /// Limiting profit of interval `k − 1` as `q ↑ a_k`.
    pub fn left_limit(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("no left limit at the zero threshold".into()));
        }
        Ok(self.interval(k - 1)?.profit(self.thresholds[k]))
    }

    /// Limiting profit of interval `k` as `q ↓ a_k`.
    pub fn right_limit(&self, k: usize) -> Result<f64> {
        Ok(self.interval(k)?.profit(self.thresholds[k]))
    }
}

/// Solves every user's penalized problem at `(q, ε)` and prices the result.
/// Keeps warm starts between calls; evaluating prices in order is fastest.
pub struct CommunicationUnit<'a> {
    model: &'a AggregatorModel,
    problems: Vec<Vec<UserProblem>>,
    warm: Vec<Vec<Option<WarmStart>>>,
}

/// User decisions and aggregator plan behind one communication-unit evaluation.
#[derive(Debug, Clone)]
pub struct CuOutcome {
    pub point: ProfitPoint,
    /// `decisions[ω][i]`.
    pub decisions: Vec<Vec<UserDecision>>,
    pub allocation: CostAllocation,
}

impl<'a> CommunicationUnit<'a> {
    pub fn new(model: &'a AggregatorModel) -> Result<Self> {
        let set = &model.scenarios;
        let problems = (0..set.scenarios.len())
            .map(|w| {
                (0..set.users.len())
                    .map(|i| build_user_problem(&set.slice(i, w), &model.tariff, &model.tech, 1.0, 1.0))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let warm = problems.iter().map(|u| vec![None; u.len()]).collect();
        Ok(Self { model, problems, warm })
    }

    pub fn evaluate(&mut self, q: f64, penalty: f64) -> Result<CuOutcome> {
        if !(q > 0.0 && penalty > 0.0) {
            return Err(Error::Domain(format!("price and penalty must be positive, got ({q}, {penalty})")));
        }
        let mut jobs: Vec<(&UserProblem, &mut Option<WarmStart>)> = self
            .problems
            .iter()
            .flatten()
            .zip(self.warm.iter_mut().flatten())
            .collect();
        let flat: Vec<UserDecision> = jobs
            .par_iter_mut()
            .map(|(p, warm)| solve_user_warm(&p.repriced(q, penalty)?, warm))
            .collect::<Result<_>>()?;
        let n_u = self.model.scenarios.users.len();
        let decisions: Vec<Vec<UserDecision>> = flat.chunks(n_u.max(1)).map(|c| c.to_vec()).collect();
        let probs = self.model.probabilities();
        let demand = AggregateDemand::from_decisions(&decisions)?;
        let allocation = solve_cost_allocation(&demand, &self.model.tech, &probs, self.model.scenarios.time)?;
        let capacities: Vec<Vec<f64>> =
            decisions.iter().map(|users| users.iter().map(|d| d.capacity).collect()).collect();
        let sold = expected_revenue(1.0, &capacities, &probs);
        let mut user_costs = vec![0.0; n_u];
        for (users, rho) in decisions.iter().zip(&probs) {
            for (i, d) in users.iter().enumerate() {
                user_costs[i] += rho * (q * d.capacity + d.bill);
            }
        }
        let revenue = q * sold;
        let point = ProfitPoint {
            price: q,
            penalty: Some(penalty),
            sold,
            revenue,
            cost: allocation.cost,
            profit: revenue - allocation.cost,
            capacity: allocation.capacity,
            power: allocation.power,
            user_costs,
        };
        Ok(CuOutcome { point, decisions, allocation })
    }
}

/// One-shot communication unit without warm starts.
pub fn communication_unit(model: &AggregatorModel, q: f64, penalty: f64) -> Result<CuOutcome> {
    CommunicationUnit::new(model)?.evaluate(q, penalty)
}

/// Communication-unit profit at each price, in the given order.
pub fn profit_sweep(model: &AggregatorModel, prices: &[f64], penalty: f64) -> Result<Vec<ProfitPoint>> {
    let mut cu = CommunicationUnit::new(model)?;
    prices.iter().map(|&q| Ok(cu.evaluate(q, penalty)?.point)).collect()
}

/// Which branch of the lowest-nonnegative-profit search produced the price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LnpCase {
    /// Zero crossing inside an interval.
    Interior,
    /// Left limit at a threshold is zero.
    LeftZero,
    /// Right limit at a threshold is nonnegative.
    RightNonnegative,
}

impl LnpCase {
    pub fn number(self) -> u8 {
        match self {
            LnpCase::Interior => 1,
            LnpCase::LeftZero => 2,
            LnpCase::RightNonnegative => 3,
        }
    }
}

/// Conditions worth surfacing alongside a search result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchFlag {
    /// No user buys capacity at any positive price.
    NoSales,
    /// The best left limit is not positive.
    NonPositiveProfit,
    /// The back-off step left its interval and was pulled to the midpoint.
    Clamped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub penalty: f64,
    pub profit: f64,
    pub limiting_profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSearchResult {
    pub price: f64,
    pub penalty: f64,
    pub capacity: f64,
    pub power: f64,
    pub profit: f64,
    pub revenue: f64,
    pub cost: f64,
    pub sold: f64,
    pub limiting_profit: f64,
    pub user_costs: Vec<f64>,
    pub case: Option<LnpCase>,
    pub flags: Vec<SearchFlag>,
    pub trace: Vec<TraceStep>,
}

const MAX_PENALTY_STEPS: usize = 20;

fn validate_tol(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Validation(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Shrinks ε by 10 from `eps0` until `accept(profit_eps, profit_lim)` holds.
fn refine(
    model: &AggregatorModel,
    q: f64,
    eps0: f64,
    limit: f64,
    accept: impl Fn(f64, f64) -> bool,
) -> Result<(CuOutcome, f64, Vec<TraceStep>)> {
    let mut cu = CommunicationUnit::new(model)?;
    let mut eps = eps0;
    let mut trace = Vec::new();
    for _ in 0..MAX_PENALTY_STEPS {
        eps /= 10.0;
        let out = cu.evaluate(q, eps)?;
        trace.push(TraceStep { penalty: eps, profit: out.point.profit, limiting_profit: limit });
        if accept(out.point.profit, limit) {
            return Ok((out, eps, trace));
        }
    }
    Err(Error::Numerical(format!("penalty loop did not converge at price {q} within {MAX_PENALTY_STEPS} steps")))
}

fn result_from(
    out: CuOutcome,
    eps: f64,
    limit: f64,
    case: Option<LnpCase>,
    flags: Vec<SearchFlag>,
    trace: Vec<TraceStep>,
) -> PriceSearchResult {
    let p = out.point;
    PriceSearchResult {
        price: p.price,
        penalty: eps,
        capacity: p.capacity,
        power: p.power,
        profit: p.profit,
        revenue: p.revenue,
        cost: p.cost,
        sold: p.sold,
        limiting_profit: limit,
        user_costs: p.user_costs,
        case,
        flags,
        trace,
    }
}

/// Keeps a back-off step inside interval `(lo, hi)`.
fn clamp_into(q: f64, lo: f64, hi: f64, flags: &mut Vec<SearchFlag>) -> f64 {
    if q > lo && q < hi && (q - lo).abs() > ROUND_OFF && (hi - q).abs() > ROUND_OFF {
        return q;
    }
    flags.push(SearchFlag::Clamped);
    0.5 * (lo + hi)
}

/// Near-optimal-profit price: back off from the threshold with the best left
/// limit so the profit loss is a fraction `err1`, then shrink ε until the
/// penalized profit is within relative `err2` of the limit.
pub fn search_op_price(model: &AggregatorModel, err1: f64, err2: f64, eps0: f64) -> Result<PriceSearchResult> {
    for (name, v) in [("err1", err1), ("err2", err2), ("eps0", eps0)] {
        validate_tol(name, v)?;
    }
    if err1 >= 1.0 || err2 >= 1.0 {
        return Err(Error::Validation("err1 and err2 must lie in (0, 1)".into()));
    }
    let a = model.thresholds();
    if a.len() < 2 {
        let user_costs = model.interval(0)?.user_bills;
        return Ok(PriceSearchResult {
            price: 0.0,
            penalty: eps0,
            capacity: 0.0,
            power: 0.0,
            profit: 0.0,
            revenue: 0.0,
            cost: 0.0,
            sold: 0.0,
            limiting_profit: 0.0,
            user_costs,
            case: None,
            flags: vec![SearchFlag::NoSales],
            trace: Vec::new(),
        });
    }
    let mut best = 1;
    let mut best_profit = model.left_limit(1)?;
    for k in 2..a.len() {
        let r = model.left_limit(k)?;
        if r > best_profit {
            best = k;
            best_profit = r;
        }
    }
    let mut flags = Vec::new();
    if best_profit <= 0.0 {
        flags.push(SearchFlag::NonPositiveProfit);
    }
    let iv = model.interval(best - 1)?;
    let slope = iv.sold;
    let raw = if best_profit > 0.0 {
        a[best] - best_profit * err1 / slope
    } else {
        a[best] - err1 * a[best]
    };
    let q = clamp_into(raw, a[best - 1], a[best], &mut flags);
    let limit = iv.profit(q);
    let (out, eps, trace) = refine(model, q, eps0, limit, |r, lim| {
        (r - lim).abs() <= err2 * lim.abs().max(f64::MIN_POSITIVE)
    })?;
    Ok(result_from(out, eps, limit, None, flags, trace))
}

/// Lowest price with nonnegative profit, approached from the nonnegative side
/// within `err3` and refined until the penalized profit is within `err4` of
/// the target.
pub fn search_lnp_price(model: &AggregatorModel, err3: f64, err4: f64, eps0: f64) -> Result<PriceSearchResult> {
    for (name, v) in [("err3", err3), ("err4", err4), ("eps0", eps0)] {
        validate_tol(name, v)?;
    }
    let a = model.thresholds();
    for k in 0..a.len() {
        if k > 0 {
            let left = model.left_limit(k)?;
            let prev = model.interval(k - 1)?;
            if left > ROUND_OFF {
                let right_prev = model.right_limit(k - 1)?;
                let q = (a[k - 1] * left - a[k] * right_prev) / (left - right_prev);
                let mut flags = Vec::new();
                let q = clamp_into(q, a[k - 1], a[k], &mut flags);
                let limit = prev.profit(q);
                let (out, eps, trace) = refine(model, q, eps0, limit, |r, _| r.abs() <= err4)?;
                return Ok(result_from(out, eps, limit, Some(LnpCase::Interior), flags, trace));
            }
            if left.abs() <= ROUND_OFF {
                let mut flags = Vec::new();
                // half of err3 so that the limiting profit stays strictly inside the band
                let q = clamp_into(a[k] - 0.5 * err3 / prev.sold, a[k - 1], a[k], &mut flags);
                let limit = prev.profit(q);
                let (out, eps, trace) = refine(model, q, eps0, limit, |r, lim| (r - lim).abs() <= err4)?;
                return Ok(result_from(out, eps, limit, Some(LnpCase::LeftZero), flags, trace));
            }
        }
        // the last interval sells nothing
        if k + 1 == a.len() {
            break;
        }
        let right = model.right_limit(k)?;
        if right >= -ROUND_OFF {
            let iv = model.interval(k)?;
            let mut flags = Vec::new();
            let q = clamp_into(a[k] + err3 / iv.sold, a[k], a[k + 1], &mut flags);
            let limit = iv.profit(q);
            let (out, eps, trace) = refine(model, q, eps0, limit, |r, lim| (r - lim).abs() <= err4)?;
            return Ok(result_from(out, eps, limit, Some(LnpCase::RightNonnegative), flags, trace));
        }
    }
    Err(Error::NoViablePrice)
}
