//! Dense bounded-variable primal simplex for small LPs.
//!
//! Written independently of the MILP backend so the enumeration oracle does
//! not share code paths with the solver it checks.

use crate::model::{MilpModel, Sense};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 50;
const BLAND_AFTER: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal {
        objective: f64,
        x: Vec<f64>,
    },
    Infeasible,
    Unbounded,
    /// Iteration limit or a singular basis.
    Failed(String),
}

/// `min c'x` s.t. `A x (<=,>=,=) b`, `l <= x <= u`, dense.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub sense: Vec<Sense>,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DenseLp {
    /// LP relaxation of `model` (binaries keep their bounds).
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.vars.len();
        let mut c = vec![0.0; n];
        for &(j, v) in &model.objective {
            c[j] += v;
        }
        let a = model
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![0.0; n];
                for &(j, v) in &r.coeffs {
                    row[j] += v;
                }
                row
            })
            .collect();
        DenseLp {
            c,
            a,
            sense: model.rows.iter().map(|r| r.sense).collect(),
            b: model.rows.iter().map(|r| r.rhs).collect(),
            lower: model.vars.iter().map(|v| v.lower).collect(),
            upper: model.vars.iter().map(|v| v.upper).collect(),
        }
    }

    pub fn solve(&self) -> LpStatus {
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return LpStatus::Infeasible;
        }
        Tableau::new(self).run()
    }
}

struct Tableau {
    m: usize,
    n: usize,
    /// Full column matrix `[A | I (slacks) | D (artificials)]`, row-major.
    cols_a: Vec<Vec<f64>>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    phase2_cost: Vec<f64>,
    /// `B^-1 [A | I | D]`.
    t: Vec<Vec<f64>>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    d: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn new(lp: &DenseLp) -> Self {
        let m = lp.a.len();
        let n = lp.c.len();
        let total = n + 2 * m;
        let mut lo = Vec::with_capacity(total);
        let mut hi = Vec::with_capacity(total);
        lo.extend_from_slice(&lp.lower);
        hi.extend_from_slice(&lp.upper);
        for s in &lp.sense {
            let (l, u) = match s {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(u);
        }
        let mut x = vec![0.0; total];
        for j in 0..n {
            x[j] = if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
        }
        let mut cols_a = vec![vec![0.0; total]; m];
        for i in 0..m {
            cols_a[i][..n].copy_from_slice(&lp.a[i]);
            cols_a[i][n + i] = 1.0;
            let resid = lp.b[i] - (0..n).map(|j| lp.a[i][j] * x[j]).sum::<f64>();
            let sign = if resid >= 0.0 { 1.0 } else { -1.0 };
            cols_a[i][n + m + i] = sign;
            x[n + m + i] = resid.abs();
        }
        for _ in 0..m {
            lo.push(0.0);
            hi.push(f64::INFINITY);
        }
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        let mut phase2_cost = vec![0.0; total];
        phase2_cost[..n].copy_from_slice(&lp.c);
        let basis: Vec<usize> = (0..m).map(|i| n + m + i).collect();
        let mut is_basic = vec![false; total];
        for &j in &basis {
            is_basic[j] = true;
        }
        let mut tab = Tableau {
            m,
            n,
            cols_a,
            b: lp.b.clone(),
            lo,
            hi,
            cost,
            phase2_cost,
            t: Vec::new(),
            x,
            basis,
            is_basic,
            d: Vec::new(),
            pivots_since_refactor: 0,
        };
        tab.refactor().expect("artificial basis is diagonal");
        tab
    }

    fn total(&self) -> usize {
        self.n + 2 * self.m
    }

    /// Recomputes `B^-1`, the tableau, basic values and reduced costs from
    /// the original data.
    fn refactor(&mut self) -> Result<(), String> {
        let m = self.m;
        let total = self.total();
        // Gauss-Jordan on [B | I].
        let mut aug: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = self.basis.iter().map(|&j| self.cols_a[i][j]).collect();
                row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .ok_or("empty basis")?;
            if aug[piv][col].abs() < 1e-12 {
                return Err("singular basis".into());
            }
            aug.swap(col, piv);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            let prow = aug[col].clone();
            for (r, row) in aug.iter_mut().enumerate() {
                if r != col && row[col] != 0.0 {
                    let f = row[col];
                    for (v, pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let binv: Vec<Vec<f64>> = aug.into_iter().map(|r| r[m..].to_vec()).collect();
        self.t = (0..m)
            .map(|i| {
                let mut row = vec![0.0; total];
                for (k, &bik) in binv[i].iter().enumerate() {
                    if bik != 0.0 {
                        for (v, a) in row.iter_mut().zip(&self.cols_a[k]) {
                            *v += bik * a;
                        }
                    }
                }
                row
            })
            .collect();
        let mut resid = self.b.clone();
        for (i, r) in resid.iter_mut().enumerate() {
            for j in 0..total {
                if !self.is_basic[j] && self.x[j] != 0.0 {
                    *r -= self.cols_a[i][j] * self.x[j];
                }
            }
        }
        for (row, &b) in binv.iter().zip(&self.basis) {
            self.x[b] = row.iter().zip(&resid).map(|(a, r)| a * r).sum();
        }
        self.recompute_costs();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn recompute_costs(&mut self) {
        let total = self.total();
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(&self.t[i][..total]) {
                    *dj -= cb * tij;
                }
            }
        }
        for &j in &self.basis {
            d[j] = 0.0;
        }
        self.d = d;
    }

    fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.total() {
            if self.is_basic[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -COST_TOL && self.x[j] < self.hi[j] {
                1.0
            } else if dj > COST_TOL && self.x[j] > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(k, _)| dj.abs() > self.d[k].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// Runs simplex on the current cost vector until optimal.
    fn optimize(&mut self) -> Result<(), LpStatus> {
        let mut degenerate = 0usize;
        let limit = 50 * (self.total() + 10);
        for _ in 0..limit {
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor().map_err(LpStatus::Failed)?;
            }
            let Some((q, dir)) = self.entering(degenerate >= BLAND_AFTER) else {
                // Confirm optimality on fresh factors.
                if self.pivots_since_refactor > 0 {
                    self.refactor().map_err(LpStatus::Failed)?;
                    if self.entering(false).is_some() {
                        continue;
                    }
                }
                return Ok(());
            };
            // Ratio test. Basic variable i moves by -dir * t[i][q] per unit step.
            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let tiq = self.t[i][q];
                if tiq.abs() < PIVOT_TOL {
                    continue;
                }
                let bj = self.basis[i];
                let rate = -dir * tiq;
                let (limit, bound) = if rate < 0.0 {
                    ((self.x[bj] - self.lo[bj]) / -rate, self.lo[bj])
                } else {
                    ((self.hi[bj] - self.x[bj]) / rate, self.hi[bj])
                };
                if !limit.is_finite() {
                    continue;
                }
                let limit = limit.max(0.0);
                let better = limit < step - 1e-12
                    || (limit <= step + 1e-12 && leave.is_none_or(|(k, _)| tiq.abs() > self.t[k][q].abs()));
                if better {
                    step = limit;
                    leave = Some((i, bound));
                }
            }
            if !step.is_finite() {
                return Err(LpStatus::Unbounded);
            }
            degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };
            self.x[q] += dir * step;
            for i in 0..self.m {
                let tiq = self.t[i][q];
                if tiq != 0.0 {
                    self.x[self.basis[i]] -= dir * step * tiq;
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.x[out] = bound;
                    self.pivot(r, q);
                }
            }
        }
        Err(LpStatus::Failed("iteration limit".into()))
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let out = self.basis[r];
        let p = self.t[r][q];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for i in 0..self.m {
            if i != r {
                let f = self.t[i][q];
                if f != 0.0 {
                    for (v, pv) in self.t[i].iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
        self.basis[r] = q;
        self.is_basic[out] = false;
        self.is_basic[q] = true;
        self.d[q] = 0.0;
        self.pivots_since_refactor += 1;
    }

    fn run(mut self) -> LpStatus {
        if let Err(s) = self.optimize() {
            return match s {
                LpStatus::Unbounded => LpStatus::Failed("phase 1 unbounded".into()),
                other => other,
            };
        }
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if self.objective() > FEAS_TOL * scale {
            return LpStatus::Infeasible;
        }
        // Artificials are pinned at zero for phase 2.
        for k in 0..self.m {
            let j = self.n + self.m + k;
            self.hi[j] = 0.0;
            self.x[j] = 0.0;
        }
        self.cost = std::mem::take(&mut self.phase2_cost);
        if let Err(e) = self.refactor() {
            return LpStatus::Failed(e);
        }
        match self.optimize() {
            Ok(()) => {
                let x = self.x[..self.n].to_vec();
                let objective = self.objective();
                LpStatus::Optimal { objective, x }
            }
            Err(s) => s,
        }
    }
}
