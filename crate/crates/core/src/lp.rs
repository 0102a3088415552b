//! Dense two-phase tableau simplex with Bland's rule, for
//! `max cᵀx` subject to `A x = b, x >= 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::feasible::LinearFeasibility;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
/// Phase-one objective above which the system is reported infeasible.
pub const PHASE1_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless the status is `Optimal`.
    pub x: Vec<f64>,
    /// `cᵀx` at the optimum (NaN otherwise).
    pub value: f64,
    pub iterations: usize,
    /// Sum of artificial variables at the end of phase one.
    pub phase1_residual: f64,
}

struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[(r, self.ncols)]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.ncols + 1;
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let f = self.t[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..width {
                let v = self.t[(row, j)];
                if v != 0.0 {
                    self.t[(r, j)] -= f * v;
                }
            }
            self.t[(r, col)] = 0.0;
        }
        for r in 0..self.m {
            let v = self.t[(r, self.ncols)];
            if v < 0.0 && v > -1e-13 {
                self.t[(r, self.ncols)] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Installs `cost` as the objective row (reduced costs for maximization).
    fn set_objective(&mut self, cost: &[f64]) {
        let obj = self.m;
        for j in 0..=self.ncols {
            self.t[(obj, j)] = if j < self.ncols { cost[j] } else { 0.0 };
        }
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..=self.ncols {
                    let v = self.t[(r, j)];
                    self.t[(obj, j)] -= cb * v;
                }
            }
        }
    }

    /// Bland-rule pivoting until optimal. Columns at or beyond `allowed` never enter.
    fn optimize(&mut self, allowed: usize, pivots: &mut usize) -> LpStatus {
        let obj = self.m;
        loop {
            let Some(col) = (0..allowed).find(|&j| self.t[(obj, j)] > COST_TOL) else {
                return LpStatus::Optimal;
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.t[(r, col)];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bv)) => {
                            let tie = (ratio - bv).abs() <= 1e-12 * (1.0 + bv.abs());
                            if ratio < bv && !tie || tie && self.basis[r] < self.basis[br] {
                                Some((r, ratio))
                            } else {
                                Some((br, bv))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return LpStatus::Unbounded;
            };
            self.pivot(row, col);
            *pivots += 1;
            if *pivots >= MAX_PIVOTS {
                return LpStatus::IterationLimit;
            }
        }
    }
}

/// Solves `max cᵀx` over `{A x = b, x >= 0}`.
pub fn lp_maximize(c: &[f64], a: &DMatrix<f64>, b: &DVector<f64>) -> LpSolution {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n, "cost vector length must match the number of columns");
    assert_eq!(b.len(), m, "rhs length must match the number of rows");
    let ncols = n + m;
    let mut t = DMatrix::zeros(m + 1, ncols + 1);
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(r, j)] = sign * a[(r, j)];
        }
        t[(r, n + r)] = 1.0;
        t[(r, ncols)] = sign * b[r];
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), m, ncols };
    let mut pivots = 0;

    let phase1_cost: Vec<f64> = (0..ncols).map(|j| if j >= n { -1.0 } else { 0.0 }).collect();
    tab.set_objective(&phase1_cost);
    let status = tab.optimize(ncols, &mut pivots);
    let infeasibility: f64 = (0..m).filter(|&r| tab.basis[r] >= n).map(|r| tab.rhs(r)).sum();
    let fail = |status, pivots, res| LpSolution { status, x: vec![], value: f64::NAN, iterations: pivots, phase1_residual: res };
    if status == LpStatus::IterationLimit {
        return fail(status, pivots, infeasibility);
    }
    let scale = 1.0 + b.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if infeasibility > PHASE1_TOL * scale {
        return fail(LpStatus::Infeasible, pivots, infeasibility);
    }

    // Drive remaining artificials out of the basis; rows with no usable
    // pivot are redundant and are dropped.
    let mut r = 0;
    while r < tab.m {
        if tab.basis[r] < n {
            r += 1;
            continue;
        }
        let entering = (0..n).find(|&j| tab.t[(r, j)].abs() > 1e-9);
        match entering {
            Some(j) => {
                tab.pivot(r, j);
                pivots += 1;
                r += 1;
            }
            None => {
                tab.t = tab.t.clone().remove_row(r);
                tab.basis.remove(r);
                tab.m -= 1;
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(c);
    tab.set_objective(&cost);
    let status = tab.optimize(n, &mut pivots);
    if status != LpStatus::Optimal {
        return fail(status, pivots, infeasibility);
    }
    let mut x = vec![0.0; n];
    for (row, &var) in tab.basis.iter().enumerate() {
        if var < n {
            x[var] = tab.rhs(row).max(0.0);
        }
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    LpSolution { status, x, value, iterations: pivots, phase1_residual: infeasibility }
}

/// `max cᵀx` over a feasibility system (normalization included).
pub fn lp_solve(c: &[f64], sys: &LinearFeasibility) -> LpSolution {
    lp_maximize(c, sys.a(), sys.b())
}
