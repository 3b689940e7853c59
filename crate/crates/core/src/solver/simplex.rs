//! Dense bounded-variable primal simplex on a full tableau.
//!
//! Phase 1 minimises the sum of artificials; phase 2 keeps any artificial
//! still basic pinned to `[0, 0]`. Pricing is Dantzig with lowest-index ties
//! and switches to Bland's rule after [`DANTZIG_LIMIT`] pivots. The final
//! basis is refactorised with LU to recompute primal values and duals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::lp::{LinearProgram, LpSolution, LpStatus, RowKind};

const DANTZIG_LIMIT: usize = 1000;
const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const REFACTOR_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free column resting at zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basic {
    Col(usize),
    /// Artificial of the row it sits in.
    Art,
}

struct Tableau<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    ncol: usize,
    /// Slack column and its sign for each inequality row.
    slack: Vec<Option<(usize, f64)>>,
    /// Row owning each slack column (indexed by `column - n`).
    slack_row: Vec<usize>,
    /// Sign of the artificial in each row.
    art_sign: Vec<f64>,
    tab: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<Basic>,
    /// Value of the basic variable of each row (artificial or column).
    value: Vec<f64>,
    d: Vec<f64>,
    art_hi: f64,
    iterations: usize,
    cap: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let (m, n) = (lp.rows(), lp.cols());
        let mut slack = vec![None; m];
        let mut slack_row = Vec::new();
        let mut ncol = n;
        for i in 0..m {
            let sign = match lp.kinds[i] {
                RowKind::Le => 1.0,
                RowKind::Ge => -1.0,
                RowKind::Eq => continue,
            };
            slack[i] = Some((ncol, sign));
            slack_row.push(i);
            ncol += 1;
        }
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        lo.resize(ncol, 0.0);
        hi.resize(ncol, f64::INFINITY);
        let mut cost = lp.cost.clone();
        cost.resize(ncol, 0.0);

        let mut x = vec![0.0; ncol];
        let mut state = vec![State::Lower; ncol];
        for j in 0..n {
            if lo[j].is_finite() {
                x[j] = lo[j];
            } else if hi[j].is_finite() {
                x[j] = hi[j];
                state[j] = State::Upper;
            } else {
                state[j] = State::Zero;
            }
        }

        let mut tab = vec![0.0; m * ncol];
        let mut basis = vec![Basic::Art; m];
        let mut value = vec![0.0; m];
        let mut art_sign = vec![1.0; m];
        for i in 0..m {
            let row = lp.row(i);
            let r = lp.rhs[i] - row.iter().zip(&x[..n]).map(|(a, v)| a * v).sum::<f64>();
            let t = &mut tab[i * ncol..(i + 1) * ncol];
            t[..n].copy_from_slice(row);
            let coef = match slack[i] {
                Some((k, sg)) if r * sg >= 0.0 => {
                    t[k] = sg;
                    basis[i] = Basic::Col(k);
                    state[k] = State::Basic;
                    x[k] = r * sg;
                    value[i] = r * sg;
                    sg
                }
                other => {
                    if let Some((k, sg)) = other {
                        t[k] = sg;
                    }
                    let sg = if r < 0.0 { -1.0 } else { 1.0 };
                    art_sign[i] = sg;
                    value[i] = r.abs();
                    sg
                }
            };
            if coef != 1.0 {
                t.iter_mut().for_each(|v| *v /= coef);
            }
        }

        let cap = 50 * (m + n).max(1);
        Self {
            lp,
            m,
            n,
            ncol,
            slack,
            slack_row,
            art_sign,
            tab,
            lo,
            hi,
            cost,
            x,
            state,
            basis,
            value,
            d: vec![0.0; ncol],
            art_hi: f64::INFINITY,
            iterations: 0,
            cap,
        }
    }

    fn basic_cost(&self, i: usize, phase_one: bool) -> f64 {
        match (self.basis[i], phase_one) {
            (Basic::Art, true) => 1.0,
            (Basic::Art, false) | (Basic::Col(_), true) => 0.0,
            (Basic::Col(j), false) => self.cost[j],
        }
    }

    fn price(&mut self, phase_one: bool) {
        let nc = self.ncol;
        for j in 0..nc {
            self.d[j] = if phase_one { 0.0 } else { self.cost[j] };
        }
        for i in 0..self.m {
            let cb = self.basic_cost(i, phase_one);
            if cb != 0.0 {
                let row = &self.tab[i * nc..(i + 1) * nc];
                for j in 0..nc {
                    self.d[j] -= cb * row[j];
                }
            }
        }
        for j in 0..nc {
            if self.state[j] == State::Basic {
                self.d[j] = 0.0;
            }
        }
    }

    fn infeasibility(&self) -> f64 {
        (0..self.m)
            .filter(|&i| self.basis[i] == Basic::Art)
            .map(|i| self.value[i].max(0.0))
            .sum()
    }

    fn basic_bounds(&self, i: usize) -> (f64, f64) {
        match self.basis[i] {
            Basic::Art => (0.0, self.art_hi),
            Basic::Col(j) => (self.lo[j], self.hi[j]),
        }
    }

    fn basic_rank(&self, i: usize) -> usize {
        match self.basis[i] {
            Basic::Col(j) => j,
            Basic::Art => self.ncol + i,
        }
    }

    fn entering(&self, bland: bool, tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncol {
            let dj = self.d[j];
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.lo[j] == self.hi[j] => continue,
                State::Lower if dj < -tol => 1.0,
                State::Upper if dj > tol => -1.0,
                State::Zero if dj.abs() > tol => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| dj.abs() > score) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// One pivot or bound flip; `Some` once the phase terminates.
    fn step(&mut self, phase_one: bool) -> Result<Option<Outcome>> {
        let bland = self.iterations >= DANTZIG_LIMIT;
        let scale = self.cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        let tol = if phase_one { COST_TOL } else { COST_TOL * scale };
        let Some((q, dir)) = self.entering(bland, tol) else {
            return Ok(Some(Outcome::Optimal));
        };
        self.iterations += 1;
        if self.iterations > self.cap {
            return Err(Error::Numerical(format!(
                "simplex exceeded {} iterations on a {}x{} problem",
                self.cap, self.m, self.n
            )));
        }

        let nc = self.ncol;
        let mut step = if self.lo[q].is_finite() && self.hi[q].is_finite() {
            self.hi[q] - self.lo[q]
        } else {
            f64::INFINITY
        };
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_piv = 0.0;
        for i in 0..self.m {
            let alpha = self.tab[i * nc + q] * dir;
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let (lo, hi) = self.basic_bounds(i);
            let v = self.value[i];
            let (t, to_upper) = if alpha > 0.0 {
                if !lo.is_finite() {
                    continue;
                }
                (((v - lo) / alpha).max(0.0), false)
            } else {
                if !hi.is_finite() {
                    continue;
                }
                (((hi - v) / -alpha).max(0.0), true)
            };
            let slack = if step.is_finite() { 1e-12 * (1.0 + step) } else { 0.0 };
            let take = if t < step - slack {
                true
            } else if t <= step + slack {
                match leave {
                    // prefer a pivot over a bound flip of the entering column
                    None => true,
                    Some((r, _)) if bland => self.basic_rank(i) < self.basic_rank(r),
                    Some(_) => alpha.abs() > leave_piv,
                }
            } else {
                false
            };
            if take {
                step = if t < step - slack { t } else { step.min(t) };
                leave = Some((i, to_upper));
                leave_piv = alpha.abs();
            }
        }
        if !step.is_finite() {
            return Ok(Some(Outcome::Unbounded));
        }

        for i in 0..self.m {
            let a = self.tab[i * nc + q];
            if a != 0.0 {
                self.value[i] -= a * dir * step;
            }
        }
        self.x[q] += dir * step;

        let Some((r, to_upper)) = leave else {
            self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
            self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
            self.sync_basic_values();
            return Ok(None);
        };

        if let Basic::Col(j) = self.basis[r] {
            let (lo, hi) = (self.lo[j], self.hi[j]);
            self.state[j] = if to_upper { State::Upper } else { State::Lower };
            self.x[j] = if to_upper { hi } else { lo };
        }
        self.pivot(r, q);
        self.value[r] = self.x[q];
        self.sync_basic_values();
        Ok(None)
    }

    fn sync_basic_values(&mut self) {
        for i in 0..self.m {
            if let Basic::Col(j) = self.basis[i] {
                self.x[j] = self.value[i];
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncol;
        let piv = self.tab[r * nc + q];
        {
            let row = &mut self.tab[r * nc..(r + 1) * nc];
            row.iter_mut().for_each(|v| *v /= piv);
            row[q] = 1.0;
        }
        let nz: Vec<usize> = (0..nc).filter(|&j| self.tab[r * nc + j] != 0.0).collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&j| self.tab[r * nc + j]).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for (k, &j) in nz.iter().enumerate() {
                row[j] -= f * pivot_row[k];
            }
            row[q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for (k, &j) in nz.iter().enumerate() {
                self.d[j] -= dq * pivot_row[k];
            }
            self.d[q] = 0.0;
        }
        if let Basic::Col(j) = self.basis[r] {
            debug_assert_ne!(self.state[j], State::Basic);
        }
        self.basis[r] = Basic::Col(q);
        self.state[q] = State::Basic;
    }

    fn run(&mut self, phase_one: bool) -> Result<Outcome> {
        self.price(phase_one);
        loop {
            if let Some(out) = self.step(phase_one)? {
                return Ok(out);
            }
        }
    }

    /// Column `j` of `[A | slacks]`, or the artificial column of row `i`.
    fn original_column(&self, b: Basic, row: usize) -> DVector<f64> {
        let mut col = DVector::zeros(self.m);
        match b {
            Basic::Art => col[row] = self.art_sign[row],
            Basic::Col(j) if j < self.n => {
                for i in 0..self.m {
                    col[i] = self.lp.entry(i, j);
                }
            }
            Basic::Col(j) => {
                let i = self.slack_row[j - self.n];
                col[i] = self.slack[i].expect("slack row").1;
            }
        }
        col
    }

    fn original_cost(&self, b: Basic) -> f64 {
        match b {
            Basic::Art => 0.0,
            Basic::Col(j) => self.cost[j],
        }
    }

    /// Recomputes basic values and duals from an LU of the basis matrix.
    /// Returns `(y, consistent)` where `consistent` reports whether the
    /// refactorised point is primal and dual feasible.
    fn refactor(&mut self) -> Result<(DVector<f64>, bool)> {
        let m = self.m;
        if m == 0 {
            return Ok((DVector::zeros(0), self.optimal_prices(&DVector::zeros(0))));
        }
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &b) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.original_column(b, k));
        }
        let lu = bmat.clone().lu();
        let mut rhs = DVector::from_column_slice(&self.lp.rhs);
        for j in 0..self.ncol {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                rhs -= self.original_column(Basic::Col(j), 0) * self.x[j];
            }
        }
        let xb = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular basis during refactorisation".into()))?;
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&b| self.original_cost(b)));
        let y = bmat
            .transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| Error::Numerical("singular basis transpose".into()))?;

        let mut primal_ok = true;
        for i in 0..m {
            self.value[i] = xb[i];
            let (lo, hi) = self.basic_bounds(i);
            let tol = 1e-9 * (1.0 + xb[i].abs());
            if xb[i] < lo - tol || xb[i] > hi + tol {
                primal_ok = false;
            }
        }
        self.sync_basic_values();
        let dual_ok = self.optimal_prices(&y);
        Ok((y, primal_ok && dual_ok))
    }

    fn reduced_cost(&self, j: usize, y: &DVector<f64>) -> f64 {
        if j < self.n {
            self.cost[j] - (0..self.m).map(|i| self.lp.entry(i, j) * y[i]).sum::<f64>()
        } else {
            let i = self.slack_row[j - self.n];
            -self.slack[i].expect("slack row").1 * y[i]
        }
    }

    fn optimal_prices(&self, y: &DVector<f64>) -> bool {
        let scale = self.cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        let tol = 1e-9 * scale;
        (0..self.ncol).all(|j| {
            if self.state[j] == State::Basic || self.lo[j] == self.hi[j] {
                return true;
            }
            let dj = self.reduced_cost(j, y);
            match self.state[j] {
                State::Lower => dj >= -tol,
                State::Upper => dj <= tol,
                State::Zero => dj.abs() <= tol,
                State::Basic => true,
            }
        })
    }

    /// Rebuilds the tableau rows as `B⁻¹ [A | slacks]` for the current basis.
    fn rebuild(&mut self) -> Result<()> {
        let m = self.m;
        let nc = self.ncol;
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &b) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.original_column(b, k));
        }
        let mut full = DMatrix::zeros(m, nc);
        for j in 0..nc {
            full.set_column(j, &self.original_column(Basic::Col(j), 0));
        }
        let lu = bmat.lu();
        if !lu.solve_mut(&mut full) {
            return Err(Error::Numerical("singular basis while rebuilding tableau".into()));
        }
        for i in 0..m {
            for j in 0..nc {
                self.tab[i * nc + j] = full[(i, j)];
            }
            if let Basic::Col(j) = self.basis[i] {
                self.tab[i * nc + j] = 1.0;
            }
        }
        Ok(())
    }

    fn solution(&self, y: &DVector<f64>) -> LpSolution {
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = self.lp.objective_at(&x);
        let s: Vec<f64> = (0..self.n).map(|j| self.reduced_cost(j, y)).collect();
        let mut basis: Vec<usize> = self
            .basis
            .iter()
            .filter_map(|b| match *b {
                Basic::Col(j) if j < self.n => Some(j),
                Basic::Col(j) => Some(self.n + self.slack_row[j - self.n]),
                Basic::Art => None,
            })
            .collect();
        basis.sort_unstable();
        LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            y: y.iter().copied().collect(),
            s,
            basis,
            iterations: self.iterations,
        }
    }
}

pub(crate) fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let mut tab = Tableau::new(lp);
    let b_scale = lp.rhs.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    let x_scale = lp
        .lower
        .iter()
        .chain(&lp.upper)
        .filter(|v| v.is_finite())
        .fold(b_scale, |a, v| a.max(v.abs()));

    if tab.basis.contains(&Basic::Art) {
        let mut rounds = 0;
        loop {
            tab.run(true)?;
            if tab.infeasibility() <= 1e-9 * x_scale || rounds >= REFACTOR_ROUNDS {
                break;
            }
            // Drift can leave a spurious residual; confirm on a fresh tableau.
            tab.refactor()?;
            tab.rebuild()?;
            rounds += 1;
            if tab.infeasibility() <= 1e-9 * x_scale {
                break;
            }
        }
        if tab.infeasibility() > 1e-9 * x_scale {
            return Ok(LpSolution::without_solution(LpStatus::Infeasible, lp, tab.iterations));
        }
        tab.art_hi = 0.0;
        for i in 0..tab.m {
            if tab.basis[i] == Basic::Art {
                tab.value[i] = 0.0;
            }
        }
    }

    let mut rounds = 0;
    loop {
        if let Outcome::Unbounded = tab.run(false)? {
            return Ok(LpSolution::without_solution(LpStatus::Unbounded, lp, tab.iterations));
        }
        let (y, consistent) = tab.refactor()?;
        if consistent || rounds >= REFACTOR_ROUNDS {
            if !consistent {
                return Err(Error::Numerical(
                    "simplex basis stays inconsistent after refactorisation".into(),
                ));
            }
            return Ok(tab.solution(&y));
        }
        tab.rebuild()?;
        rounds += 1;
    }
}
