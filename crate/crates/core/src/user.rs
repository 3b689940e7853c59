//! Second stage: one user's capacity purchase and dispatch in one scenario.
//!
//! The energy level is eliminated: `e[t] = e[0] + h·Σ_{τ≤t}(η^c·ch[τ] − dis[τ]/η^d)`,
//! so the decision vector is `[x, p^m, e[0], p^{r,u}, p^{ch}, p^{dis}]`. The
//! constant `π_b·h·ΣL − π_s·h·ΣR` is kept out of the objective and added back
//! when a decision is reported.

use crate::error::{Error, Result};
use crate::model::{ScenarioSlice, StorageTech, Tariff, UserDecision, ROUND_OFF};
use crate::solver::{
    parametric_rhs_ray, solve_lp, solve_qp_warm, Hessian, LinearProgram, LpStatus,
    QuadraticProgram, RowKind, WarmStart,
};

/// Column layout of a user problem. `x` is absent when capacity is a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub slots: usize,
    pub has_capacity: bool,
}

impl Layout {
    fn offset(&self) -> usize {
        usize::from(self.has_capacity)
    }
    pub fn capacity(&self) -> Option<usize> {
        self.has_capacity.then_some(0)
    }
    pub fn peak(&self) -> usize {
        self.offset()
    }
    pub fn initial_energy(&self) -> usize {
        self.offset() + 1
    }
    pub fn renewable_used(&self, t: usize) -> usize {
        self.offset() + 2 + t
    }
    pub fn charge(&self, t: usize) -> usize {
        self.offset() + 2 + self.slots + t
    }
    pub fn discharge(&self, t: usize) -> usize {
        self.offset() + 2 + 2 * self.slots + t
    }
    pub fn cols(&self) -> usize {
        self.offset() + 2 + 3 * self.slots
    }
}

/// Feasible set and bill coefficients shared by every user-side problem.
#[derive(Debug, Clone)]
struct Skeleton {
    lp: LinearProgram,
    layout: Layout,
    /// Rows `e[t] ≤ x`, `t = 0..T−1`.
    capacity_rows: Vec<usize>,
    /// Coefficients of the bill's variable part (no capacity term).
    bill_cost: Vec<f64>,
    bill_constant: f64,
}

/// Upper bound on useful capacity: everything the user could ever store.
pub fn capacity_bound(slice: &ScenarioSlice) -> f64 {
    let h = slice.time.slot_hours;
    slice.load.iter().chain(&slice.renewable).sum::<f64>() * h
}

fn skeleton(
    slice: &ScenarioSlice,
    tariff: &Tariff,
    tech: &StorageTech,
    has_capacity: bool,
    fixed_capacity: f64,
) -> Result<Skeleton> {
    slice.validate()?;
    tariff.validate()?;
    tech.validate()?;
    let t_len = slice.time.slots;
    let h = slice.time.slot_hours;
    let layout = Layout { slots: t_len, has_capacity };
    let mut lp = LinearProgram::new(layout.cols());
    let (eta_c, eta_d) = (tech.user_charge_eff, tech.user_discharge_eff);

    if let Some(x) = layout.capacity() {
        lp.set_bounds(x, 0.0, capacity_bound(slice));
    }
    for t in 0..t_len {
        lp.set_bounds(layout.renewable_used(t), 0.0, slice.renewable[t]);
    }

    // e[t] − e[0] as terms, t = 0..=T
    let level = |t: usize| -> Vec<(usize, f64)> {
        let mut terms = Vec::with_capacity(2 * t + 1);
        for tau in 0..t {
            terms.push((layout.charge(tau), eta_c * h));
            terms.push((layout.discharge(tau), -h / eta_d));
        }
        terms
    };
    lp.add_row(&level(t_len), RowKind::Eq, 0.0);
    for t in 1..t_len {
        let mut terms = level(t);
        terms.push((layout.initial_energy(), 1.0));
        lp.add_row(&terms, RowKind::Ge, 0.0);
    }
    let mut capacity_rows = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut terms = level(t);
        terms.push((layout.initial_energy(), 1.0));
        let rhs = match layout.capacity() {
            Some(x) => {
                terms.push((x, -1.0));
                0.0
            }
            None => fixed_capacity,
        };
        capacity_rows.push(lp.add_row(&terms, RowKind::Le, rhs));
    }
    for t in 0..t_len {
        let draw = [
            (layout.renewable_used(t), -1.0),
            (layout.discharge(t), -1.0),
            (layout.charge(t), 1.0),
        ];
        lp.add_row(&draw, RowKind::Ge, -slice.load[t]);
        let mut capped = draw.to_vec();
        capped.push((layout.peak(), -1.0));
        lp.add_row(&capped, RowKind::Le, -slice.load[t]);
    }

    let mut bill_cost = vec![0.0; layout.cols()];
    bill_cost[layout.peak()] = tariff.peak_price;
    for t in 0..t_len {
        bill_cost[layout.charge(t)] = tariff.energy_price * h;
        bill_cost[layout.discharge(t)] = -tariff.energy_price * h;
        bill_cost[layout.renewable_used(t)] = (tariff.feed_in_price - tariff.energy_price) * h;
    }
    let bill_constant = tariff.energy_price * h * slice.load.iter().sum::<f64>()
        - tariff.feed_in_price * h * slice.renewable.iter().sum::<f64>();
    Ok(Skeleton { lp, layout, capacity_rows, bill_cost, bill_constant })
}

impl Skeleton {
    fn decision(&self, z: &[f64], slice: &ScenarioSlice, tech: &StorageTech, capacity: f64) -> UserDecision {
        let l = self.layout;
        let h = slice.time.slot_hours;
        let clean = |v: f64| if v.abs() <= ROUND_OFF * 1e-3 { 0.0 } else { v };
        let charge: Vec<f64> = (0..l.slots).map(|t| clean(z[l.charge(t)])).collect();
        let discharge: Vec<f64> = (0..l.slots).map(|t| clean(z[l.discharge(t)])).collect();
        let renewable_used: Vec<f64> = (0..l.slots).map(|t| clean(z[l.renewable_used(t)])).collect();
        let mut energy = Vec::with_capacity(l.slots + 1);
        energy.push(z[l.initial_energy()]);
        for t in 0..l.slots {
            let prev = energy[t];
            energy.push(
                prev + tech.user_charge_eff * charge[t] * h - discharge[t] * h / tech.user_discharge_eff,
            );
        }
        let bill = self.bill_cost.iter().zip(z).map(|(c, v)| c * v).sum::<f64>() + self.bill_constant;
        UserDecision {
            capacity,
            renewable_used,
            charge,
            discharge,
            energy,
            peak: z[l.peak()],
            bill,
        }
    }
}

/// Problem UP (`penalty = 0`) or UPP for one user and scenario at price `price`.
#[derive(Debug, Clone)]
pub struct UserProblem {
    pub slice: ScenarioSlice,
    pub tariff: Tariff,
    pub tech: StorageTech,
    pub price: f64,
    pub penalty: f64,
    /// `½·penalty·2·Σ(ch² + dis²) + c·z`; the LP part alone is Problem UP.
    pub qp: QuadraticProgram,
    pub layout: Layout,
    /// Bill terms that do not depend on decisions.
    pub constant: f64,
    skeleton: Skeleton,
}

pub fn build_user_problem(
    slice: &ScenarioSlice,
    tariff: &Tariff,
    tech: &StorageTech,
    price: f64,
    penalty: f64,
) -> Result<UserProblem> {
    if !(price.is_finite() && price >= 0.0) {
        return Err(Error::Domain(format!("capacity price must be nonnegative, got {price}")));
    }
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::Domain(format!("penalty must be nonnegative, got {penalty}")));
    }
    let sk = skeleton(slice, tariff, tech, true, 0.0)?;
    let layout = sk.layout;
    let mut lp = sk.lp.clone();
    lp.cost = sk.bill_cost.clone();
    lp.cost[0] = price;
    let mut diag = vec![0.0; layout.cols()];
    for t in 0..layout.slots {
        diag[layout.charge(t)] = 2.0 * penalty;
        diag[layout.discharge(t)] = 2.0 * penalty;
    }
    Ok(UserProblem {
        slice: slice.clone(),
        tariff: *tariff,
        tech: *tech,
        price,
        penalty,
        qp: QuadraticProgram { hessian: Hessian::Diagonal(diag), lp },
        layout,
        constant: sk.bill_constant,
        skeleton: sk,
    })
}

impl UserProblem {
    /// Maps a solver vector back to a decision.
    pub fn decision(&self, z: &[f64]) -> UserDecision {
        self.skeleton.decision(z, &self.slice, &self.tech, z[0])
    }

    /// Same problem at another price; the feasible set is unchanged.
    pub fn repriced(&self, price: f64, penalty: f64) -> Result<UserProblem> {
        if !(price.is_finite() && price >= 0.0 && penalty.is_finite() && penalty >= 0.0) {
            return Err(Error::Domain(format!("bad price/penalty ({price}, {penalty})")));
        }
        let mut next = self.clone();
        next.price = price;
        next.penalty = penalty;
        next.qp.lp.cost[0] = price;
        if let Hessian::Diagonal(d) = &mut next.qp.hessian {
            for t in 0..self.layout.slots {
                d[self.layout.charge(t)] = 2.0 * penalty;
                d[self.layout.discharge(t)] = 2.0 * penalty;
            }
        }
        Ok(next)
    }
}

pub fn solve_user(problem: &UserProblem) -> Result<UserDecision> {
    solve_user_warm(problem, &mut None)
}

/// Solves UP/UPP, reusing and refreshing `warm` (only meaningful for `penalty > 0`).
pub fn solve_user_warm(problem: &UserProblem, warm: &mut Option<WarmStart>) -> Result<UserDecision> {
    if problem.price <= 0.0 {
        return Err(Error::UnboundedCapacity(problem.price));
    }
    let sol = if problem.penalty == 0.0 {
        solve_lp(&problem.qp.lp)?
    } else {
        let (sol, next) = solve_qp_warm(&problem.qp, warm.as_ref())?;
        *warm = next;
        sol
    };
    match sol.status {
        LpStatus::Optimal => Ok(problem.decision(&sol.x)),
        LpStatus::Infeasible => Err(Error::Infeasible("user problem".into())),
        LpStatus::Unbounded => Err(Error::Unbounded("user problem".into())),
    }
}

/// Convex piecewise-linear minimal bill `f(x)` as a function of capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    /// `f(0)`: bill without storage.
    pub base: f64,
    /// Breakpoints `b_1 < … < b_m`, all positive.
    pub breakpoints: Vec<f64>,
    /// Slope on `[0, b_1]`, …, `[b_m, ∞)`; the last one is 0.
    pub slopes: Vec<f64>,
}

impl ValueFunction {
    pub fn value(&self, x: f64) -> f64 {
        let mut f = self.base;
        let mut left = 0.0;
        for (k, slope) in self.slopes.iter().enumerate() {
            let right = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
            if x <= right {
                return f + slope * (x - left);
            }
            f += slope * (right - left);
            left = right;
        }
        f
    }
}

pub fn compute_value_function(
    slice: &ScenarioSlice,
    tariff: &Tariff,
    tech: &StorageTech,
) -> Result<ValueFunction> {
    let sk = skeleton(slice, tariff, tech, false, 0.0)?;
    let mut lp = sk.lp.clone();
    lp.cost = sk.bill_cost.clone();
    let mut direction = vec![0.0; lp.rows()];
    for &r in &sk.capacity_rows {
        direction[r] = 1.0;
    }
    let ray = parametric_rhs_ray(&lp, &direction)?;
    if ray.end.is_some() {
        return Err(Error::Numerical("capacity ray turned infeasible".into()));
    }
    let mut slopes = ray.slopes.clone();
    let mut breakpoints = ray.transitions.clone();
    let last = *slopes.last().expect("ray has a slope");
    if last.abs() > 1e-7 {
        return Err(Error::Numerical(format!("terminal slope {last} of the value function is not zero")));
    }
    *slopes.last_mut().expect("ray has a slope") = 0.0;
    // merge slopes that differ by round-off
    let mut k = 1;
    while k < slopes.len() {
        if (slopes[k] - slopes[k - 1]).abs() <= ROUND_OFF {
            let keep = if k == slopes.len() - 1 { slopes[k] } else { slopes[k - 1] };
            slopes[k - 1] = keep;
            slopes.remove(k);
            breakpoints.remove(k - 1);
        } else {
            k += 1;
        }
    }
    Ok(ValueFunction { base: ray.base_value + sk.bill_constant, breakpoints, slopes })
}

/// Threshold prices and capacities of one user in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProfile {
    pub user: String,
    pub scenario: String,
    /// `0 = q_0 < q_1 < … < q_K`.
    pub prices: Vec<f64>,
    /// `x_0 > x_1 > … > x_K = 0`; `x_k` is optimal on `(q_k, q_{k+1})`.
    pub capacities: Vec<f64>,
    /// Limiting dispatch per interval; empty unless requested.
    pub dispatch: Vec<UserDecision>,
}

impl ThresholdProfile {
    /// Index `k` with `q ∈ (q_k, q_{k+1})`.
    pub fn interval(&self, q: f64) -> Result<usize> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Domain(format!("price must be positive, got {q}")));
        }
        if let Some(j) = self.prices.iter().position(|&p| (q - p).abs() <= ROUND_OFF) {
            return Err(Error::AmbiguousPrice {
                price: q,
                lower: if j == 0 { 0.0 } else { self.prices[j - 1] },
                upper: self.prices.get(j + 1).copied().unwrap_or(f64::INFINITY),
            });
        }
        let k = self.prices.partition_point(|&p| p < q);
        Ok(k - 1)
    }
}

pub fn compute_thresholds(
    slice: &ScenarioSlice,
    tariff: &Tariff,
    tech: &StorageTech,
) -> Result<ThresholdProfile> {
    let f = compute_value_function(slice, tariff, tech)?;
    let m = f.breakpoints.len();
    let mut prices = vec![0.0];
    let mut capacities = Vec::with_capacity(m + 1);
    for k in (0..m).rev() {
        capacities.push(f.breakpoints[k]);
        prices.push(-f.slopes[k]);
    }
    capacities.push(0.0);
    Ok(ThresholdProfile {
        user: String::new(),
        scenario: String::new(),
        prices,
        capacities,
        dispatch: Vec::new(),
    })
}

/// Thresholds plus the limiting dispatch of every interval.
pub fn build_profile(
    user: &str,
    scenario: &str,
    slice: &ScenarioSlice,
    tariff: &Tariff,
    tech: &StorageTech,
) -> Result<ThresholdProfile> {
    let mut profile = compute_thresholds(slice, tariff, tech)?;
    profile.user = user.to_string();
    profile.scenario = scenario.to_string();
    profile.dispatch = profile
        .capacities
        .iter()
        .map(|&x| limiting_dispatch(slice, tariff, tech, x))
        .collect::<Result<_>>()?;
    Ok(profile)
}

/// Optimal capacity at a non-threshold price.
pub fn optimal_capacity(profile: &ThresholdProfile, q: f64) -> Result<f64> {
    Ok(profile.capacities[profile.interval(q)?])
}

/// Dispatch at fixed capacity `x_star` that attains the minimal bill with the
/// least `Σ(ch² + dis²)`.
pub fn limiting_dispatch(
    slice: &ScenarioSlice,
    tariff: &Tariff,
    tech: &StorageTech,
    x_star: f64,
) -> Result<UserDecision> {
    if !(x_star.is_finite() && x_star >= 0.0) {
        return Err(Error::Domain(format!("capacity must be nonnegative, got {x_star}")));
    }
    let sk = skeleton(slice, tariff, tech, false, x_star)?;
    let mut v_lp = sk.lp.clone();
    v_lp.cost = sk.bill_cost.clone();
    let v = solve_lp(&v_lp)?;
    match v.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Domain(format!("capacity {x_star} is infeasible"))),
        LpStatus::Unbounded => return Err(Error::Unbounded("minimal bill at fixed capacity".into())),
    }
    let terms: Vec<(usize, f64)> =
        sk.bill_cost.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
    let mut cd = sk.lp.clone();
    // tiny relative slack keeps the V vertex feasible under round-off
    cd.add_row(&terms, RowKind::Le, v.objective + 1e-12 * (1.0 + v.objective.abs()));
    let l = sk.layout;
    let mut diag = vec![0.0; l.cols()];
    for t in 0..l.slots {
        diag[l.charge(t)] = 2.0;
        diag[l.discharge(t)] = 2.0;
    }
    let qp = QuadraticProgram { hessian: Hessian::Diagonal(diag), lp: cd };
    // the bill-optimal vertex is feasible for CD
    let start = WarmStart { x: v.x.clone(), working: Vec::new() };
    let (sol, _) = solve_qp_warm(&qp, Some(&start))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("least-effort dispatch returned {:?}", sol.status)));
    }
    Ok(sk.decision(&sol.x, slice, tech, x_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::user_bill;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn tiny_up_optimum() {
        let (slice, tariff, tech) = fixtures::tiny();
        let p = build_user_problem(&slice, &tariff, &tech, 0.2, 0.0).unwrap();
        let d = solve_user(&p).unwrap();
        assert!(close(d.capacity, 1.0, 1e-9));
        assert!(close(0.2 * d.capacity + d.bill, 0.66, 1e-9));
        d.check(&slice, &tech, 1e-8).unwrap();
    }

    #[test]
    fn zero_load_buys_nothing() {
        let (slice, tariff, tech) = fixtures::tiny();
        let slice = ScenarioSlice::new(slice.time, vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let p = build_user_problem(&slice, &tariff, &tech, 0.2, 0.0).unwrap();
        let d = solve_user(&p).unwrap();
        assert_eq!(d.capacity, 0.0);
        assert!(close(d.bill, 0.0, 1e-12));
        let prof = compute_thresholds(&slice, &tariff, &tech).unwrap();
        assert_eq!(prof.prices, vec![0.0]);
        assert_eq!(prof.capacities, vec![0.0]);
    }

    #[test]
    fn penalty_only_touches_the_diagonal() {
        let (slice, tariff, tech) = fixtures::tiny();
        let a = build_user_problem(&slice, &tariff, &tech, 0.2, 0.0).unwrap();
        let b = build_user_problem(&slice, &tariff, &tech, 0.2, 1e-12).unwrap();
        assert_eq!(a.qp.lp, b.qp.lp);
        assert_ne!(a.qp.hessian, b.qp.hessian);
    }

    #[test]
    fn penalized_tiny() {
        let (slice, tariff, tech) = fixtures::tiny();
        let p = build_user_problem(&slice, &tariff, &tech, 0.2, 1e-7).unwrap();
        let d = solve_user(&p).unwrap();
        assert!(close(d.capacity, 1.0, 1e-6));
        let grid = d.grid_draw(&slice).unwrap();
        assert!(close(grid[0], 1.0, 1e-6) && close(grid[1], 1.0, 1e-6));
        assert!(close(0.2 * d.capacity + d.bill, 0.66, 1e-6));

        let p = build_user_problem(&slice, &tariff, &tech, 0.5, 1e-7).unwrap();
        let d = solve_user(&p).unwrap();
        assert!(close(d.capacity, 0.0, 1e-9));
        assert!(close(d.bill, 0.86, 1e-9));
    }

    #[test]
    fn zero_price_is_unbounded() {
        let (slice, tariff, tech) = fixtures::tiny();
        let p = build_user_problem(&slice, &tariff, &tech, 0.0, 1e-7).unwrap();
        assert!(matches!(solve_user(&p), Err(Error::UnboundedCapacity(_))));
    }

    #[test]
    fn tiny_value_function() {
        let (slice, tariff, tech) = fixtures::tiny();
        let f = compute_value_function(&slice, &tariff, &tech).unwrap();
        assert_eq!(f.breakpoints.len(), 1);
        assert!(close(f.breakpoints[0], 1.0, 1e-9));
        assert!(close(f.slopes[0], -0.4, 1e-9));
        assert_eq!(f.slopes[1], 0.0);
        assert!(close(f.base, 0.86, 1e-9));

        let doubled = ScenarioSlice::new(slice.time, vec![4.0, 0.0], vec![0.0, 0.0]).unwrap();
        let f = compute_value_function(&doubled, &tariff, &tech).unwrap();
        assert!(close(f.breakpoints[0], 2.0, 1e-9));
        assert!(close(f.slopes[0], -0.4, 1e-9));
    }

    #[test]
    fn tiny_thresholds_and_lookup() {
        let (slice, tariff, tech) = fixtures::tiny();
        let prof = compute_thresholds(&slice, &tariff, &tech).unwrap();
        assert_eq!(prof.prices.len(), 2);
        assert!(close(prof.prices[1], 0.4, 1e-9));
        assert!(close(prof.capacities[0], 1.0, 1e-9));
        assert_eq!(prof.capacities[1], 0.0);
        assert!(close(optimal_capacity(&prof, 0.2).unwrap(), 1.0, 1e-9));
        assert_eq!(optimal_capacity(&prof, 0.41).unwrap(), 0.0);
        assert_eq!(optimal_capacity(&prof, 7.0).unwrap(), 0.0);
        assert!(matches!(optimal_capacity(&prof, 0.4), Err(Error::AmbiguousPrice { .. })));
    }

    #[test]
    fn lossy_tiny_threshold() {
        let (slice, tariff, tech) = fixtures::tiny();
        let tech = tech.with_efficiency(0.95);
        let prof = compute_thresholds(&slice, &tariff, &tech).unwrap();
        assert_eq!(prof.prices.len(), 2);
        assert!(prof.prices[1] < 0.4 && prof.prices[1] > 0.3);
        // charge c, discharge d: d = 0.95² c, 2 − d = c, so d = 2·0.9025/1.9025
        let d = 2.0 * 0.9025 / 1.9025;
        assert!(close(prof.capacities[0], d / 0.95, 1e-9));
    }

    #[test]
    fn tiny_limiting_dispatch() {
        let (slice, tariff, tech) = fixtures::tiny();
        let d = limiting_dispatch(&slice, &tariff, &tech, 1.0).unwrap();
        assert!(close(d.charge[0], 0.0, 1e-8) && close(d.charge[1], 1.0, 1e-8));
        assert!(close(d.discharge[0], 1.0, 1e-8) && close(d.discharge[1], 0.0, 1e-8));
        assert!(close(d.peak, 1.0, 1e-8));
        assert!(close(d.bill, 0.46, 1e-8));
        assert!(close(user_bill(&d, &slice, &tariff).unwrap(), d.bill, 1e-7));
        d.check(&slice, &tech, 1e-8).unwrap();

        let d = limiting_dispatch(&slice, &tariff, &tech, 0.0).unwrap();
        assert!(d.charge.iter().chain(&d.discharge).all(|v| v.abs() < 1e-9));
        assert!(close(d.bill, 0.86, 1e-9));
        assert!(matches!(limiting_dispatch(&slice, &tariff, &tech, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn profile_carries_dispatch() {
        let (slice, tariff, tech) = fixtures::tiny();
        let prof = build_profile("a", "s", &slice, &tariff, &tech).unwrap();
        assert_eq!(prof.dispatch.len(), prof.capacities.len());
        for (d, &x) in prof.dispatch.iter().zip(&prof.capacities) {
            d.check(&slice, &tech, 1e-8).unwrap();
            assert_eq!(d.capacity, x);
        }
    }
}
