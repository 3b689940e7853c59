//! Primal active-set method for convex quadratic programs.
//!
//! The working set holds equality rows, active general rows and active
//! bounds. Bounds fix their column; the remaining columns are reduced onto
//! the null space of the working general rows through a Householder QR. Zero
//! curvature directions of the reduced Hessian are followed to the next
//! blocking constraint; otherwise a (pseudo-inverse) Newton step is taken.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

use super::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, RowKind};

/// Positive-semidefinite objective matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Hessian {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl Hessian {
    fn dim(&self) -> usize {
        match self {
            Hessian::Diagonal(d) => d.len(),
            Hessian::Dense(m) => m.nrows(),
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Hessian::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            Hessian::Dense(m) => (m * DVector::from_column_slice(x)).iter().copied().collect(),
        }
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            Hessian::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            Hessian::Dense(m) => m[(i, j)],
        }
    }

    fn max_diag(&self) -> f64 {
        (0..self.dim()).fold(0.0_f64, |a, i| a.max(self.entry(i, i).abs()))
    }
}

/// `min ½ xᵀQx + c·x` over the feasible set of `lp` (whose cost is `c`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub hessian: Hessian,
    pub lp: LinearProgram,
}

/// Same shape as an LP result; `basis` lists the final working set.
pub type QpSolution = LpSolution;

/// Feasible starting point with constraints known to be active there.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub working: Vec<usize>,
}

impl QuadraticProgram {
    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        if self.hessian.dim() != self.lp.cols() {
            return Err(Error::Dimension(format!(
                "hessian has dimension {} for {} columns",
                self.hessian.dim(),
                self.lp.cols()
            )));
        }
        match &self.hessian {
            Hessian::Diagonal(d) => {
                if d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::Domain("diagonal hessian must be finite and nonnegative".into()));
                }
            }
            Hessian::Dense(m) => {
                let n = m.nrows();
                if m.ncols() != n || m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain("dense hessian must be square and finite".into()));
                }
                for i in 0..n {
                    for j in 0..i {
                        if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                            return Err(Error::Domain("dense hessian is not symmetric".into()));
                        }
                    }
                }
                let eig = SymmetricEigen::new(m.clone()).eigenvalues;
                let scale = self.hessian.max_diag().max(1e-300);
                if eig.iter().any(|l| *l < -1e-10 * scale) {
                    return Err(Error::Domain("dense hessian is not positive semidefinite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let qx = self.hessian.mul(x);
        0.5 * qx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.lp.objective_at(x)
    }
}

/// Solves a convex QP from a cold start.
pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution> {
    Ok(solve_qp_warm(qp, None)?.0)
}

/// Solves a convex QP, optionally from a feasible point and working set that
/// came out of a previous solve over the same feasible region.
pub fn solve_qp_warm(
    qp: &QuadraticProgram,
    start: Option<&WarmStart>,
) -> Result<(QpSolution, Option<WarmStart>)> {
    qp.validate()?;
    let mut set = ActiveSet::new(qp);
    match start {
        Some(ws) if ws.x.len() == qp.lp.cols() => {
            set.x = ws.x.clone();
            if ws.working.is_empty() {
                set.greedy_working_set();
            } else {
                set.install(&ws.working);
            }
        }
        _ => {
            let Some(x0) = starting_point(&qp.lp)? else {
                let sol = LpSolution::without_solution(LpStatus::Infeasible, &qp.lp, 0);
                return Ok((sol, None));
            };
            set.x = x0;
            set.greedy_working_set();
        }
    }
    match set.run()? {
        LpStatus::Optimal => {
            let sol = set.solution();
            let ws = WarmStart { x: set.x.clone(), working: set.working.clone() };
            Ok((sol, Some(ws)))
        }
        status => Ok((LpSolution::without_solution(status, &qp.lp, set.iterations), None)),
    }
}

/// A vertex minimising the linear part, or any feasible basic point when the
/// linear part alone is unbounded. `None` if infeasible.
fn starting_point(lp: &LinearProgram) -> Result<Option<Vec<f64>>> {
    let sol = solve_lp(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.x)),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => {
            let mut flat = lp.clone();
            flat.cost.iter_mut().for_each(|c| *c = 0.0);
            let sol = solve_lp(&flat)?;
            Ok((sol.status == LpStatus::Optimal).then_some(sol.x))
        }
    }
}

/// Constraint ids: `0..m` are rows, `m + 2j` the lower and `m + 2j + 1` the
/// upper bound of column `j`. Every constraint reads `normal·x ≤ bound`
/// (or `=` for equality rows).
struct ActiveSet<'a> {
    qp: &'a QuadraticProgram,
    m: usize,
    n: usize,
    x: Vec<f64>,
    working: Vec<usize>,
    in_working: Vec<bool>,
    /// Column fixed by a working bound, with that bound's id.
    fixed: Vec<Option<usize>>,
    iterations: usize,
    cap: usize,
    qscale: f64,
}

struct Reduced {
    free: Vec<usize>,
    rows: Vec<usize>,
    /// Orthonormal basis of the full free space; first `rows.len()` columns span the row space.
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl<'a> ActiveSet<'a> {
    fn new(qp: &'a QuadraticProgram) -> Self {
        let (m, n) = (qp.lp.rows(), qp.lp.cols());
        Self {
            qp,
            m,
            n,
            x: vec![0.0; n],
            working: Vec::new(),
            in_working: vec![false; m + 2 * n],
            fixed: vec![None; n],
            iterations: 0,
            cap: 50 * (m + n) + 200,
            qscale: qp.hessian.max_diag(),
        }
    }

    fn is_equality(&self, k: usize) -> bool {
        k < self.m && self.qp.lp.kinds[k] == RowKind::Eq
    }

    fn bound_of(&self, k: usize) -> Option<(usize, bool)> {
        (k >= self.m).then(|| ((k - self.m) / 2, (k - self.m) % 2 == 1))
    }

    fn exists(&self, k: usize) -> bool {
        match self.bound_of(k) {
            Some((j, true)) => self.qp.lp.upper[j].is_finite(),
            Some((j, false)) => self.qp.lp.lower[j].is_finite(),
            None => true,
        }
    }

    /// `(sign, bound)` so the constraint reads `sign * a·x ≤ bound`.
    fn row_form(&self, k: usize) -> (f64, f64) {
        let lp = &self.qp.lp;
        match lp.kinds[k] {
            RowKind::Le | RowKind::Eq => (1.0, lp.rhs[k]),
            RowKind::Ge => (-1.0, -lp.rhs[k]),
        }
    }

    fn normal_dot(&self, k: usize, v: &[f64]) -> f64 {
        match self.bound_of(k) {
            Some((j, true)) => v[j],
            Some((j, false)) => -v[j],
            None => {
                let (sg, _) = self.row_form(k);
                sg * self.qp.lp.activity(k, v)
            }
        }
    }

    fn rhs_of(&self, k: usize) -> f64 {
        match self.bound_of(k) {
            Some((j, true)) => self.qp.lp.upper[j],
            Some((j, false)) => -self.qp.lp.lower[j],
            None => self.row_form(k).1,
        }
    }

    fn normal(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        match self.bound_of(k) {
            Some((j, up)) => v[j] = if up { 1.0 } else { -1.0 },
            None => {
                let (sg, _) = self.row_form(k);
                for (j, a) in self.qp.lp.row(k).iter().enumerate() {
                    v[j] = sg * a;
                }
            }
        }
        v
    }

    fn add(&mut self, k: usize) {
        self.working.push(k);
        self.in_working[k] = true;
        if let Some((j, up)) = self.bound_of(k) {
            self.fixed[j] = Some(k);
            self.x[j] = if up { self.qp.lp.upper[j] } else { self.qp.lp.lower[j] };
        }
    }

    fn remove(&mut self, k: usize) {
        self.working.retain(|&w| w != k);
        self.in_working[k] = false;
        if let Some((j, _)) = self.bound_of(k) {
            self.fixed[j] = None;
        }
    }

    fn install(&mut self, ids: &[usize]) {
        for &k in ids {
            if k < self.in_working.len() && !self.in_working[k] && self.exists(k) {
                self.add(k);
            }
        }
    }

    fn is_active(&self, k: usize) -> bool {
        let b = self.rhs_of(k);
        (self.normal_dot(k, &self.x) - b).abs() <= 1e-9 * (1.0 + b.abs())
    }

    /// Greedy independent subset of the constraints active at `x`:
    /// equalities first, then bounds, then inequality rows.
    fn greedy_working_set(&mut self) {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut order: Vec<usize> = (0..self.m).filter(|&k| self.is_equality(k)).collect();
        order.extend((self.m..self.m + 2 * self.n).filter(|&k| self.exists(k)));
        order.extend((0..self.m).filter(|&k| !self.is_equality(k)));
        for k in order {
            if basis.len() == self.n {
                break;
            }
            if !self.is_equality(k) && !self.is_active(k) {
                continue;
            }
            let mut v = self.normal(k);
            let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for b in &basis {
                    let p: f64 = b.iter().zip(&v).map(|(a, c)| a * c).sum();
                    v.iter_mut().zip(b).for_each(|(a, c)| *a -= p * c);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-9 * norm0 {
                v.iter_mut().for_each(|a| *a /= norm);
                basis.push(v);
                self.add(k);
            }
        }
    }

    fn gradient(&self) -> Vec<f64> {
        let mut g = self.qp.hessian.mul(&self.x);
        g.iter_mut().zip(&self.qp.lp.cost).for_each(|(a, c)| *a += c);
        g
    }

    fn reduce(&self) -> Result<Reduced> {
        let free: Vec<usize> = (0..self.n).filter(|&j| self.fixed[j].is_none()).collect();
        let rows: Vec<usize> = self.working.iter().copied().filter(|&k| k < self.m).collect();
        let nf = free.len();
        let mg = rows.len();
        if mg > nf {
            return Err(Error::Numerical("working set exceeds free dimension".into()));
        }
        if mg == 0 {
            return Ok(Reduced { free, rows, q: DMatrix::identity(nf, nf), r: DMatrix::zeros(0, 0) });
        }
        let mut mt = DMatrix::zeros(nf, mg);
        for (c, &k) in rows.iter().enumerate() {
            let (sg, _) = self.row_form(k);
            let row = self.qp.lp.row(k);
            for (r, &j) in free.iter().enumerate() {
                mt[(r, c)] = sg * row[j];
            }
        }
        let qr = mt.qr();
        let mut qt = DMatrix::identity(nf, nf);
        qr.q_tr_mul(&mut qt);
        let r = qr.r();
        let rmax = (0..mg).fold(0.0_f64, |a, i| a.max(r[(i, i)].abs()));
        if (0..mg).any(|i| r[(i, i)].abs() <= 1e-11 * rmax.max(1e-300)) {
            return Err(Error::Numerical("working rows became linearly dependent".into()));
        }
        Ok(Reduced { free, rows, q: qt.transpose(), r })
    }

    /// Multipliers of the working set, as `(constraint, λ)` with `λ ≥ 0`
    /// required for inequalities.
    fn multipliers(&self, red: &Reduced, g: &[f64]) -> Vec<(usize, f64)> {
        let mg = red.rows.len();
        let mut out = Vec::with_capacity(self.working.len());
        let mut lam_rows = DVector::zeros(mg);
        if mg > 0 {
            let gf = DVector::from_iterator(red.free.len(), red.free.iter().map(|&j| g[j]));
            let yt_g = red.q.columns(0, mg).transpose() * gf;
            let rhs = -yt_g;
            lam_rows = red
                .r
                .solve_upper_triangular(&rhs)
                .unwrap_or_else(|| DVector::zeros(mg));
        }
        let mut resid = g.to_vec();
        for (c, &k) in red.rows.iter().enumerate() {
            let (sg, _) = self.row_form(k);
            for (j, a) in self.qp.lp.row(k).iter().enumerate() {
                resid[j] += lam_rows[c] * sg * a;
            }
            out.push((k, lam_rows[c]));
        }
        for &k in &self.working {
            if let Some((j, up)) = self.bound_of(k) {
                let lam = if up { -resid[j] } else { resid[j] };
                out.push((k, lam));
            }
        }
        out
    }

    fn run(&mut self) -> Result<LpStatus> {
        let mut at_min = false;
        loop {
            self.iterations += 1;
            if self.iterations > self.cap {
                return Err(Error::Numerical(format!(
                    "active-set method exceeded {} iterations",
                    self.cap
                )));
            }
            let bland = self.iterations > self.cap / 2;
            let red = self.reduce()?;
            let g = self.gradient();
            let gscale = g.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            let nf = red.free.len();
            let r = nf - red.rows.len();

            if r == 0 || at_min {
                let lams = self.multipliers(&red, &g);
                let tol = 1e-12 * gscale;
                let mut drop: Option<(usize, f64)> = None;
                for &(k, lam) in &lams {
                    if self.is_equality(k) || lam >= -tol {
                        continue;
                    }
                    let better = match drop {
                        None => true,
                        Some((kd, ld)) => {
                            if bland {
                                k < kd
                            } else {
                                lam < ld || (lam == ld && k < kd)
                            }
                        }
                    };
                    if better {
                        drop = Some((k, lam));
                    }
                }
                match drop {
                    None => return Ok(LpStatus::Optimal),
                    Some((k, _)) => {
                        self.remove(k);
                        at_min = false;
                        continue;
                    }
                }
            }

            let z = red.q.columns(red.rows.len(), r).into_owned();
            let gf = DVector::from_iterator(nf, red.free.iter().map(|&j| g[j]));
            let gz = z.transpose() * &gf;
            if gz.norm() <= 1e-14 * gscale {
                at_min = true;
                continue;
            }
            let mut hff = DMatrix::zeros(nf, nf);
            for (a, &i) in red.free.iter().enumerate() {
                match &self.qp.hessian {
                    Hessian::Diagonal(d) => hff[(a, a)] = d[i],
                    Hessian::Dense(_) => {
                        for (b, &j) in red.free.iter().enumerate() {
                            hff[(a, b)] = self.qp.hessian.entry(i, j);
                        }
                    }
                }
            }
            let h = z.transpose() * &hff * &z;
            let eig = SymmetricEigen::new(h);
            let flat = 1e-8 * self.qscale;
            let w = eig.eigenvectors.transpose() * &gz;
            let mut null_dir = DVector::zeros(r);
            let mut newton_dir = DVector::zeros(r);
            for k in 0..r {
                let v = eig.eigenvectors.column(k);
                if eig.eigenvalues[k] <= flat {
                    null_dir -= v * w[k];
                } else {
                    newton_dir -= v * (w[k] / eig.eigenvalues[k]);
                }
            }
            let newton = null_dir.norm() <= 1e-13 * gscale;
            let dz = if newton { newton_dir } else { null_dir };
            let df = &z * dz;
            let mut d = vec![0.0; self.n];
            for (a, &j) in red.free.iter().enumerate() {
                d[j] = df[a];
            }
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if slope >= -1e-18 * gscale * dnorm.max(1.0) {
                at_min = true;
                continue;
            }
            let qd = self.qp.hessian.mul(&d);
            let curv: f64 = qd.iter().zip(&d).map(|(a, b)| a * b).sum();
            let line = if curv > 0.0 { -slope / curv } else { f64::INFINITY };

            let mut block: Option<(usize, f64)> = None;
            for k in 0..self.m + 2 * self.n {
                if self.in_working[k] || self.is_equality(k) || !self.exists(k) {
                    continue;
                }
                if let Some((j, _)) = self.bound_of(k) {
                    if d[j] == 0.0 {
                        continue;
                    }
                }
                let nd = self.normal_dot(k, &d);
                if nd <= 1e-12 * dnorm {
                    continue;
                }
                let alpha = ((self.rhs_of(k) - self.normal_dot(k, &self.x)) / nd).max(0.0);
                if block.is_none_or(|(_, a)| alpha < a) {
                    block = Some((k, alpha));
                }
            }
            let (alpha, blocked) = match block {
                Some((k, a)) if a < line => (a, Some(k)),
                _ => (line, None),
            };
            if !alpha.is_finite() || (blocked.is_none() && alpha * dnorm > 1e15) {
                return Ok(LpStatus::Unbounded);
            }
            for j in 0..self.n {
                self.x[j] += alpha * d[j];
            }
            match blocked {
                Some(k) => {
                    self.add(k);
                    at_min = false;
                }
                None => at_min = newton,
            }
        }
    }

    fn solution(&self) -> QpSolution {
        let lp = &self.qp.lp;
        let g = self.gradient();
        let mut y = vec![0.0; self.m];
        if let Ok(red) = self.reduce() {
            for (k, lam) in self.multipliers(&red, &g) {
                if k < self.m {
                    // internal form sign·a·x ≤ b with g + λ·sign·a = 0
                    y[k] = -lam * self.row_form(k).0;
                }
            }
        }
        let mut s = g.clone();
        for i in 0..self.m {
            for (j, a) in lp.row(i).iter().enumerate() {
                s[j] -= a * y[i];
            }
        }
        let mut basis = self.working.clone();
        basis.sort_unstable();
        LpSolution {
            status: LpStatus::Optimal,
            x: self.x.clone(),
            objective: self.qp.objective_at(&self.x),
            y,
            s,
            basis,
            iterations: self.iterations,
        }
    }
}
