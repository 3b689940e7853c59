//! Right-hand-side ray tracing for `z(φ) = min { c·x : Ax = b + φΔb, x ≥ 0 }`.
//!
//! Starting from the optimum at `φ = 0`, the tracer alternates two LPs: the
//! largest `φ` for which the current dual stays optimal (primal columns with
//! positive reduced cost removed), and the largest directional derivative
//! `Δb·y` over the dual optimal face at that `φ` (dual rows of positive primal
//! columns made tight). General rows and bounds are brought to standard form
//! first.

use crate::error::{Error, Result};

use super::lp::{solve_lp, LinearProgram, LpStatus, RowKind};

/// Reduced costs above this are treated as strictly positive.
const SUPPORT_TOL: f64 = 1e-9;

/// Piecewise-linear value function along a right-hand-side direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricRay {
    pub direction: Vec<f64>,
    /// `z(0)`.
    pub base_value: f64,
    /// Transition points `φ(1) < … < φ(K)`, all positive.
    pub transitions: Vec<f64>,
    /// Slope on `[0, φ(1)]`, `[φ(1), φ(2)]`, …, `[φ(K), end)`; one more than `transitions`.
    pub slopes: Vec<f64>,
    /// Largest feasible `φ` when the problem turns infeasible along the ray.
    pub end: Option<f64>,
}

impl ParametricRay {
    /// `z(φ)` reconstructed from the slopes; `None` past the end of the ray.
    pub fn value(&self, phi: f64) -> Option<f64> {
        if phi < 0.0 || self.end.is_some_and(|e| phi > e * (1.0 + 1e-12) + 1e-12) {
            return None;
        }
        let mut z = self.base_value;
        let mut left = 0.0;
        for (k, &slope) in self.slopes.iter().enumerate() {
            let right = self.transitions.get(k).copied().unwrap_or(f64::INFINITY);
            if phi <= right {
                return Some(z + slope * (phi - left));
            }
            z += slope * (right - left);
            left = right;
        }
        Some(z)
    }

    /// `z` at every transition point.
    pub fn breakpoint_values(&self) -> Vec<f64> {
        self.transitions.iter().map(|&p| self.value(p).unwrap_or(f64::NAN)).collect()
    }
}

/// `Ax = b, x ≥ 0` view of a general LP with the column map back.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    delta: Vec<f64>,
    constant: f64,
}

impl StandardForm {
    fn new(lp: &LinearProgram, direction: &[f64]) -> Self {
        let (m, n) = (lp.rows(), lp.cols());
        // each original column maps to (std column, sign) pairs plus a shift
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut shift = vec![0.0; n];
        let mut ns = 0;
        let mut upper_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if l.is_finite() {
                shift[j] = l;
                cols.push(vec![(ns, 1.0)]);
                if u.is_finite() {
                    upper_rows.push((ns, u - l));
                }
                ns += 1;
            } else if u.is_finite() {
                shift[j] = u;
                cols.push(vec![(ns, -1.0)]);
                ns += 1;
            } else {
                cols.push(vec![(ns, 1.0), (ns + 1, -1.0)]);
                ns += 2;
            }
        }
        let slack_start = ns;
        ns += lp.kinds.iter().filter(|k| **k != RowKind::Eq).count();
        ns += upper_rows.len();

        let ms = m + upper_rows.len();
        let mut a = vec![vec![0.0; ns]; ms];
        let mut b = vec![0.0; ms];
        let mut delta = vec![0.0; ms];
        let mut next_slack = slack_start;
        for i in 0..m {
            let row = lp.row(i);
            let mut rhs = lp.rhs[i];
            for j in 0..n {
                let aij = row[j];
                if aij == 0.0 {
                    continue;
                }
                rhs -= aij * shift[j];
                for &(k, sg) in &cols[j] {
                    a[i][k] += aij * sg;
                }
            }
            match lp.kinds[i] {
                RowKind::Eq => {}
                RowKind::Le => {
                    a[i][next_slack] = 1.0;
                    next_slack += 1;
                }
                RowKind::Ge => {
                    a[i][next_slack] = -1.0;
                    next_slack += 1;
                }
            }
            b[i] = rhs;
            delta[i] = direction[i];
        }
        for (r, &(k, width)) in upper_rows.iter().enumerate() {
            let i = m + r;
            a[i][k] = 1.0;
            a[i][next_slack] = 1.0;
            next_slack += 1;
            b[i] = width;
        }
        let mut c = vec![0.0; ns];
        let mut constant = 0.0;
        for j in 0..n {
            constant += lp.cost[j] * shift[j];
            for &(k, sg) in &cols[j] {
                c[k] += lp.cost[j] * sg;
            }
        }
        Self { a, b, c, delta, constant }
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    fn cols(&self) -> usize {
        self.c.len()
    }

    fn primal(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.cols());
        lp.cost = self.c.clone();
        for i in 0..self.rows() {
            lp.add_dense_row(&self.a[i], RowKind::Eq, self.b[i]);
        }
        lp
    }

    fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols())
            .map(|j| self.c[j] - (0..self.rows()).map(|i| self.a[i][j] * y[i]).sum::<f64>())
            .collect()
    }

    /// `max Δb·y` over dual-feasible `y` tight on the support of `x`.
    /// `None` when unbounded.
    fn steepest_dual(&self, x: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let ms = self.rows();
        let mut lp = LinearProgram::new(ms);
        for i in 0..ms {
            lp.cost[i] = -self.delta[i];
            lp.set_bounds(i, f64::NEG_INFINITY, f64::INFINITY);
        }
        let xscale = x.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let mut col = vec![0.0; ms];
        for j in 0..self.cols() {
            for i in 0..ms {
                col[i] = self.a[i][j];
            }
            let kind = if x[j] > SUPPORT_TOL * xscale { RowKind::Eq } else { RowKind::Le };
            lp.add_dense_row(&col, kind, self.c[j]);
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(Some((-sol.objective, sol.x))),
            LpStatus::Unbounded => Ok(None),
            LpStatus::Infeasible => Err(Error::Numerical(
                "dual optimal face is empty along the ray".into(),
            )),
        }
    }

    /// `max φ` keeping only columns with zero reduced cost under `s`.
    /// `None` when unbounded.
    fn furthest_phi(&self, s: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let keep: Vec<usize> = (0..self.cols()).filter(|&j| s[j] <= SUPPORT_TOL).collect();
        let ms = self.rows();
        let nk = keep.len();
        let mut lp = LinearProgram::new(nk + 1);
        lp.cost[nk] = -1.0;
        lp.set_bounds(nk, f64::NEG_INFINITY, f64::INFINITY);
        let mut row = vec![0.0; nk + 1];
        for i in 0..ms {
            for (c, &j) in keep.iter().enumerate() {
                row[c] = self.a[i][j];
            }
            row[nk] = -self.delta[i];
            lp.add_dense_row(&row, RowKind::Eq, self.b[i]);
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {
                let mut x = vec![0.0; self.cols()];
                for (c, &j) in keep.iter().enumerate() {
                    x[j] = sol.x[c];
                }
                Ok(Some((sol.x[nk], x)))
            }
            LpStatus::Unbounded => Ok(None),
            LpStatus::Infeasible => Err(Error::Numerical(
                "current dual is not optimal at its own transition point".into(),
            )),
        }
    }
}

/// Traces `z(φ)` along `direction` from `φ = 0`.
pub fn parametric_rhs_ray(lp: &LinearProgram, direction: &[f64]) -> Result<ParametricRay> {
    lp.validate()?;
    if direction.len() != lp.rows() {
        return Err(Error::Dimension(format!(
            "direction has {} entries for {} rows",
            direction.len(),
            lp.rows()
        )));
    }
    let sf = StandardForm::new(lp, direction);
    let base = solve_lp(&sf.primal())?;
    if base.status != LpStatus::Optimal {
        return Err(Error::Precondition(format!(
            "linear program is {:?} at the origin of the ray",
            base.status
        )));
    }
    let base_value = base.objective + sf.constant;

    let Some((first_slope, mut y)) = sf.steepest_dual(&base.x)? else {
        return Err(Error::Precondition("problem becomes infeasible immediately along the ray".into()));
    };
    let mut transitions: Vec<f64> = Vec::new();
    let mut slopes = vec![first_slope];
    let mut end = None;
    let mut phi = 0.0_f64;
    let cap = 4 * (sf.rows() + sf.cols()) + 50;
    for _ in 0..cap {
        let s = sf.reduced_costs(&y);
        let Some((next_phi, x)) = sf.furthest_phi(&s)? else {
            return Ok(finish(direction, base_value, transitions, slopes, end));
        };
        let next_phi = next_phi.max(phi);
        match sf.steepest_dual(&x)? {
            None => {
                end = Some(next_phi);
                push_transition(&mut transitions, &mut slopes, next_phi, None);
                return Ok(finish(direction, base_value, transitions, slopes, end));
            }
            Some((next_slope, next_y)) => {
                push_transition(&mut transitions, &mut slopes, next_phi, Some(next_slope));
                phi = next_phi;
                y = next_y;
            }
        }
    }
    Err(Error::Numerical(format!("ray tracing did not terminate within {cap} transitions")))
}

fn push_transition(transitions: &mut Vec<f64>, slopes: &mut Vec<f64>, phi: f64, slope: Option<f64>) {
    let last = transitions.last().copied().unwrap_or(0.0);
    let same_point = (phi - last).abs() <= 1e-9 * (1.0 + last.abs());
    match slope {
        Some(s) => {
            if same_point {
                // a zero-length interval: keep only the newest slope
                *slopes.last_mut().expect("at least one slope") = s;
            } else {
                transitions.push(phi);
                slopes.push(s);
            }
        }
        None => {
            if !same_point {
                transitions.push(phi);
                slopes.push(f64::NAN);
            }
        }
    }
}

fn finish(
    direction: &[f64],
    base_value: f64,
    mut transitions: Vec<f64>,
    mut slopes: Vec<f64>,
    end: Option<f64>,
) -> ParametricRay {
    if end.is_some() && slopes.last().is_some_and(|s| s.is_nan()) {
        slopes.pop();
        transitions.pop();
    }
    // merge neighbouring intervals whose slopes agree
    let mut t_out: Vec<f64> = Vec::new();
    let mut s_out = vec![slopes[0]];
    for (k, &t) in transitions.iter().enumerate() {
        let s = slopes[k + 1];
        if (s - *s_out.last().expect("nonempty")).abs() <= 1e-9 {
            continue;
        }
        t_out.push(t);
        s_out.push(s);
    }
    ParametricRay { direction: direction.to_vec(), base_value, transitions: t_out, slopes: s_out, end }
}
