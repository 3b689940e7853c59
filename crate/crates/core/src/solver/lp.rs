use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

use super::simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

/// `min c·x` subject to dense rows `a_i·x (=|≤|≥) b_i` and `lower ≤ x ≤ upper`.
///
/// Bounds may be infinite; the default column is `[0, +inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    /// Row-major, `rows × cols`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub kinds: Vec<RowKind>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(cols: usize) -> Self {
        Self {
            cost: vec![0.0; cols],
            matrix: Vec::new(),
            rhs: Vec::new(),
            kinds: Vec::new(),
            lower: vec![0.0; cols],
            upper: vec![f64::INFINITY; cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.cost.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.matrix[i * n..(i + 1) * n]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols() + j]
    }

    /// Adds a row from `(column, coefficient)` pairs; repeated columns accumulate.
    pub fn add_row(&mut self, terms: &[(usize, f64)], kind: RowKind, rhs: f64) -> usize {
        let n = self.cols();
        let start = self.matrix.len();
        self.matrix.resize(start + n, 0.0);
        for &(j, a) in terms {
            self.matrix[start + j] += a;
        }
        self.rhs.push(rhs);
        self.kinds.push(kind);
        self.rhs.len() - 1
    }

    pub fn add_dense_row(&mut self, coeffs: &[f64], kind: RowKind, rhs: f64) -> usize {
        assert_eq!(coeffs.len(), self.cols(), "row length must match column count");
        self.matrix.extend_from_slice(coeffs);
        self.rhs.push(rhs);
        self.kinds.push(kind);
        self.rhs.len() - 1
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows(), self.cols());
        if self.matrix.len() != m * n || self.kinds.len() != m {
            return Err(Error::Dimension(format!(
                "matrix has {} entries for {m} rows and {n} columns",
                self.matrix.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension("bound vectors do not match column count".into()));
        }
        if !self.cost.iter().chain(&self.matrix).chain(&self.rhs).all(|v| v.is_finite()) {
            return Err(Error::Domain("linear program has non-finite coefficients".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("column {j} has invalid bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }

    /// Row activity `a_i·x`.
    pub fn activity(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal-dual result. Duals follow the convention `s = c − Aᵀy`, so `y_i ≤ 0`
/// on `≤` rows and `y_i ≥ 0` on `≥` rows of a minimisation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Basic columns; slack of row `i` is reported as `cols + i`.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_solution(status: LpStatus, lp: &LinearProgram, iterations: usize) -> Self {
        Self {
            status,
            x: vec![f64::NAN; lp.cols()],
            objective: f64::NAN,
            y: vec![f64::NAN; lp.rows()],
            s: vec![f64::NAN; lp.cols()],
            basis: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Residuals of the optimality conditions of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Worst row or bound violation, scaled by `1 + |rhs|`.
    pub primal: f64,
    /// Worst sign violation of `y` and `s`.
    pub dual: f64,
    /// Worst product of a multiplier with its constraint slack.
    pub complementarity: f64,
    /// `|c·x − dual objective| / (1 + |c·x|)`.
    pub gap: f64,
}

impl Certificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.primal <= tol && self.dual <= tol && self.complementarity <= tol && self.gap <= tol
    }

    pub fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity).max(self.gap)
    }
}

/// Evaluates the optimality conditions of `(x, y, s)` for `lp`.
pub fn certificate(lp: &LinearProgram, x: &[f64], y: &[f64]) -> Certificate {
    let (m, n) = (lp.rows(), lp.cols());
    let mut primal = 0.0_f64;
    let mut dual = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut dual_obj = 0.0;
    let mut s = lp.cost.clone();
    for i in 0..m {
        let row = lp.row(i);
        for j in 0..n {
            s[j] -= row[j] * y[i];
        }
        let slack = lp.activity(i, x) - lp.rhs[i];
        let scale = 1.0 + lp.rhs[i].abs();
        let (viol, sign_viol) = match lp.kinds[i] {
            RowKind::Eq => (slack.abs(), 0.0),
            RowKind::Le => (slack.max(0.0), y[i].max(0.0)),
            RowKind::Ge => ((-slack).max(0.0), (-y[i]).max(0.0)),
        };
        primal = primal.max(viol / scale);
        dual = dual.max(sign_viol);
        if lp.kinds[i] != RowKind::Eq {
            comp = comp.max((y[i] * slack).abs());
        }
        dual_obj += lp.rhs[i] * y[i];
    }
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            primal = primal.max((l - x[j]).max(0.0) / (1.0 + l.abs()));
        }
        if u.is_finite() {
            primal = primal.max((x[j] - u).max(0.0) / (1.0 + u.abs()));
        }
        let (sp, sn) = (s[j].max(0.0), (-s[j]).max(0.0));
        if l.is_finite() {
            comp = comp.max(sp * (x[j] - l).abs());
            dual_obj += sp * l;
        } else {
            dual = dual.max(sp);
        }
        if u.is_finite() {
            comp = comp.max(sn * (u - x[j]).abs());
            dual_obj -= sn * u;
        } else {
            dual = dual.max(sn);
        }
    }
    let obj = lp.objective_at(x);
    Certificate {
        primal,
        dual,
        complementarity: comp,
        gap: (obj - dual_obj).abs() / (1.0 + obj.abs()),
    }
}

/// Tolerance applied by the solve counters below.
pub const CERTIFICATE_TOL: f64 = 1e-8;

static SOLVES: AtomicU64 = AtomicU64::new(0);
static FAILURES: AtomicU64 = AtomicU64::new(0);
static WORST: AtomicU64 = AtomicU64::new(0);

/// Process-wide tally of optimal LP solves and of those whose certificate
/// exceeded [`CERTIFICATE_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateStats {
    pub solves: u64,
    pub failures: u64,
    pub worst: f64,
}

pub fn certificate_stats() -> CertificateStats {
    CertificateStats {
        solves: SOLVES.load(Ordering::Relaxed),
        failures: FAILURES.load(Ordering::Relaxed),
        worst: f64::from_bits(WORST.load(Ordering::Relaxed)),
    }
}

fn record(cert: &Certificate) {
    SOLVES.fetch_add(1, Ordering::Relaxed);
    let w = cert.worst();
    if !cert.passes(CERTIFICATE_TOL) {
        FAILURES.fetch_add(1, Ordering::Relaxed);
    }
    let _ = WORST.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |cur| {
        (w > f64::from_bits(cur)).then_some(w.to_bits())
    });
}

/// Solves `lp` with the bounded-variable primal simplex.
///
/// Infeasible and unbounded problems are reported through the status; an
/// error is returned only for malformed input or when the pivot cap is hit.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let sol = simplex::solve(lp)?;
    if sol.is_optimal() {
        record(&certificate(lp, &sol.x, &sol.y));
    }
    Ok(sol)
}
