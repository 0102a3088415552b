//! Linear feasibility systems over the probability simplex, and the
//! active-set projection of an approximately feasible point onto them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prob::{Channel, Pmf};
use crate::quantum::{canonical_purification, partial_trace, CqChannelQ, DensityOperator};

/// Singular values at or below this fraction of the largest are zero.
pub const PINV_RTOL: f64 = 1e-11;
/// Relative residual below which a row counts as linearly dependent.
pub const ROW_FILTER_TOL: f64 = 1e-10;
/// Least-squares residual above which `b` is outside the column space.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `A x = b` with the all-ones normalization row stored last, exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeasibility {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl LinearFeasibility {
    /// Builds a system from constraint rows, appending `1ᵀx = 1`. Rows that
    /// already state the normalization are folded into the appended one.
    pub fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::ShapeMismatch(format!("{} rows but {} right-hand sides", rows.len(), rhs.len())));
        }
        let beta = match rows.first() {
            Some(r) => r.len(),
            None => return Err(Error::ShapeMismatch("no constraint rows; use LinearFeasibility::simplex".into())),
        };
        Self::assemble(beta, rows, rhs)
    }

    /// The bare simplex `{x >= 0, 1ᵀx = 1}` in `beta` coordinates.
    pub fn simplex(beta: usize) -> Result<Self> {
        Self::assemble(beta, vec![], vec![])
    }

    fn assemble(beta: usize, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if beta == 0 {
            return Err(Error::ShapeMismatch("system has no unknowns".into()));
        }
        let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
        for (r, v) in rows.into_iter().zip(rhs) {
            if r.len() != beta {
                return Err(Error::ShapeMismatch(format!("row of length {} in a {beta}-column system", r.len())));
            }
            if r.iter().chain(std::iter::once(&v)).any(|e| !e.is_finite()) {
                return Err(Error::ShapeMismatch("non-finite coefficient".into()));
            }
            let is_norm = r.iter().all(|&e| e == 1.0) && v == 1.0;
            if !is_norm {
                kept.push((r, v));
            }
        }
        let alpha = kept.len() + 1;
        let mut a = DMatrix::zeros(alpha, beta);
        let mut b = DVector::zeros(alpha);
        for (i, (r, v)) in kept.iter().enumerate() {
            a.row_mut(i).copy_from_slice(r);
            b[i] = *v;
        }
        a.row_mut(alpha - 1).fill(1.0);
        b[alpha - 1] = 1.0;
        Ok(LinearFeasibility { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Number of unknowns.
    pub fn beta(&self) -> usize {
        self.a.ncols()
    }

    /// Number of rows, normalization included.
    pub fn alpha(&self) -> usize {
        self.a.nrows()
    }

    /// The constraint rows without the normalization row.
    pub fn constraint_rows(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.alpha() - 1;
        (self.a.rows(0, k).into_owned(), self.b.rows(0, k).into_owned())
    }

    pub fn residual(&self, x: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(x) - &self.b
    }

    pub fn residual_l1(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().map(|v| v.abs()).sum()
    }

    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Removes linearly dependent rows (on the augmented `[A | b]`) by
    /// greedy pivoted Gram-Schmidt. The normalization row is always kept.
    pub fn filtered(&self) -> LinearFeasibility {
        let (a, b) = filter_rows(&self.a, &self.b, ROW_FILTER_TOL);
        LinearFeasibility { a, b }
    }
}

/// Greedy pivoted Gram-Schmidt row selection on `[A | b]`. The last row of
/// the input is taken first and emitted last.
fn filter_rows(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> (DMatrix<f64>, DVector<f64>) {
    let alpha = a.nrows();
    let beta = a.ncols();
    let aug: Vec<DVector<f64>> = (0..alpha)
        .map(|i| {
            let mut v = DVector::zeros(beta + 1);
            v.rows_mut(0, beta).copy_from(&a.row(i).transpose());
            v[beta] = b[i];
            v
        })
        .collect();
    let norms: Vec<f64> = aug.iter().map(|v| v.norm()).collect();
    let mut residual = aug.clone();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut chosen = vec![alpha - 1];
    let mut taken = vec![false; alpha];
    taken[alpha - 1] = true;

    let push = |basis: &mut Vec<DVector<f64>>, residual: &mut Vec<DVector<f64>>, idx: usize| {
        let q = residual[idx].normalize();
        for r in residual.iter_mut() {
            // Two passes keep the residuals orthogonal to working precision.
            for _ in 0..2 {
                let c = q.dot(r);
                r.axpy(-c, &q, 1.0);
            }
        }
        basis.push(q);
    };
    push(&mut basis, &mut residual, alpha - 1);
    loop {
        let best = (0..alpha)
            .filter(|&i| !taken[i] && norms[i] > 0.0)
            .map(|i| (i, residual[i].norm() / norms[i]))
            .max_by(|x, y| x.1.total_cmp(&y.1));
        match best {
            Some((i, rel)) if rel > tol => {
                taken[i] = true;
                chosen.push(i);
                push(&mut basis, &mut residual, i);
            }
            _ => break,
        }
    }
    let mut order: Vec<usize> = chosen[1..].to_vec();
    order.sort_unstable();
    order.push(alpha - 1);
    let fa = DMatrix::from_fn(order.len(), beta, |r, c| a[(order[r], c)]);
    let fb = DVector::from_fn(order.len(), |r, _| b[order[r]]);
    (fa, fb)
}

/// `{P_Y : sum_y P_Y(y) W(x|y) = P_X(x)}` for a backward channel `W: Y -> X`.
pub fn classical_feasibility(p_x: &Pmf, w: &Channel) -> Result<LinearFeasibility> {
    if w.n_outputs() != p_x.len() {
        return Err(Error::ShapeMismatch(format!(
            "channel produces {} source letters, source has {}",
            w.n_outputs(),
            p_x.len()
        )));
    }
    let rows = (0..p_x.len())
        .map(|x| (0..w.n_inputs()).map(|y| w.get(y, x)).collect())
        .collect();
    LinearFeasibility::new(rows, p_x.probs().to_vec())
}

/// Labels used to read a quantum-classical setup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QcLabels {
    pub a: String,
    pub r: String,
    pub b: String,
}

impl Default for QcLabels {
    fn default() -> Self {
        QcLabels { a: "A".into(), r: "R".into(), b: "B".into() }
    }
}

/// Target `Tr_A{phi^{RAB}}` from the canonical purification, with the
/// reference sized to match the CQ channel's `R` factor.
pub fn purified_target(rho_ab: &DensityOperator, w: &CqChannelQ, labels: &QcLabels) -> Result<DensityOperator> {
    let r_dim = w.layout().dim_of(&labels.r)?;
    rho_ab.layout().position(&labels.a)?;
    let phi = canonical_purification(rho_ab, &labels.r, Some(r_dim))?.density()?;
    let keep: Vec<&str> = phi
        .layout()
        .labels()
        .into_iter()
        .filter(|l| *l != labels.a)
        .collect();
    let target = partial_trace(&phi, &keep)?;
    if target.layout() != w.layout() {
        return Err(Error::ShapeMismatch(format!(
            "CQ channel layout {:?} does not match purified target layout {:?}",
            w.layout().factors(),
            target.layout().factors()
        )));
    }
    Ok(target)
}

/// `{P_X : sum_x P_X(x) W_x^{RB} = Tr_A{phi^{RAB}}}` embedded in real
/// coordinates (real parts of the upper triangle, imaginary parts of the
/// strict upper triangle) with dependent rows removed.
pub fn quantum_feasibility(rho_ab: &DensityOperator, w: &CqChannelQ, labels: &QcLabels) -> Result<LinearFeasibility> {
    let target = purified_target(rho_ab, w, labels)?;
    Ok(hermitian_system(&target, w)?.filtered())
}

pub(crate) fn hermitian_system(target: &DensityOperator, w: &CqChannelQ) -> Result<LinearFeasibility> {
    let d = target.dim();
    let t = target.matrix();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..d {
        for j in i..d {
            rows.push(w.states().iter().map(|s| s.matrix()[(i, j)].re).collect());
            rhs.push(t[(i, j)].re);
            if i < j {
                rows.push(w.states().iter().map(|s| s.matrix()[(i, j)].im).collect());
                rhs.push(t[(i, j)].im);
            }
        }
    }
    LinearFeasibility::new(rows, rhs)
}

/// Moore-Penrose inverse via SVD.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    svd.pseudo_inverse(PINV_RTOL * smax).expect("non-negative threshold")
}

/// Smallest singular value above the pseudoinverse cutoff (0 for a zero matrix).
pub fn smallest_nonzero_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter()
        .copied()
        .filter(|&s| s > PINV_RTOL * smax)
        .fold(f64::INFINITY, f64::min)
        .min(if smax > 0.0 { f64::INFINITY } else { 0.0 })
}

/// Outcome of [`project_to_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub x: Vec<f64>,
    pub l1_distance: f64,
    /// `‖A x0 - b‖₁` of the input point.
    pub delta: f64,
    /// `delta sqrt(beta) / sigma_min` of the final (column-zeroed) system.
    pub bound: f64,
    /// Same bound with the unmodified system's `sigma_min`.
    pub bound_initial: f64,
    pub sigma_min_final: f64,
    pub sigma_min_initial: f64,
    /// Coordinates pinned to zero by the active-set correction.
    pub active_set: Vec<usize>,
    /// Number of correction rounds (1 when no correction was needed).
    pub iterations: usize,
    /// Set when the exact active-set solver changed the outcome of plain
    /// column zeroing (overshoot or a non-optimal active set).
    pub exact_qp: bool,
}

fn ls_residual(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let x = pseudoinverse(a) * b;
    (a * x - b).norm()
}

/// Projects a simplex point onto `{x >= 0, A x = b}`.
///
/// Computes `w = x0 - A⁺(A x0 - b)`; while `w` has negative entries they are
/// added to the active set `S`, the columns in `S` are zeroed in every row
/// (normalization row included), `x0` is zeroed on `S`, and the correction is
/// recomputed. Stops after at most `beta` rounds.
pub fn project_to_feasible(sys: &LinearFeasibility, x0: &[f64]) -> Result<ProjectionResult> {
    project_to_feasible_with(sys, x0, FEASIBILITY_TOL)
}

pub fn project_to_feasible_with(sys: &LinearFeasibility, x0: &[f64], feas_tol: f64) -> Result<ProjectionResult> {
    let beta = sys.beta();
    if x0.len() != beta {
        return Err(Error::ShapeMismatch(format!("x0 has {} entries, system has {beta} unknowns", x0.len())));
    }
    if x0.iter().any(|&v| !v.is_finite() || v < -1e-12) {
        return Err(Error::InvalidPmf("x0 must be non-negative".into()));
    }
    let total: f64 = x0.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPmf(format!("x0 sums to {total}")));
    }
    let delta = sys.residual_l1(x0);
    let filtered = sys.filtered();
    let (a, b) = (filtered.a(), filtered.b());
    let res = ls_residual(a, b);
    if res > feas_tol {
        return Err(Error::Infeasible(res));
    }
    let sigma_min_initial = smallest_nonzero_singular_value(a);

    let x0v = DVector::from_column_slice(x0);
    let finish = |x: DVector<f64>, active: &[bool], rounds: usize, exact_qp: bool| {
        let abar = zero_columns(a, active);
        let sigma_min_final = smallest_nonzero_singular_value(&abar);
        let x: Vec<f64> = x.iter().copied().collect();
        let l1_distance = x.iter().zip(x0).map(|(a, b)| (a - b).abs()).sum();
        let scale = delta * (beta as f64).sqrt();
        ProjectionResult {
            x,
            l1_distance,
            delta,
            bound: scale / sigma_min_final,
            bound_initial: scale / sigma_min_initial,
            sigma_min_final,
            sigma_min_initial,
            active_set: (0..beta).filter(|&j| active[j]).collect(),
            iterations: rounds,
            exact_qp,
        }
    };

    let mut active = vec![false; beta];
    for round in 1..=beta {
        let abar = zero_columns(a, &active);
        if ls_residual(&abar, b) > feas_tol {
            // Zeroing overshot: some coordinate in S must stay positive.
            let (x, active, rounds) = exact_projection(a, b, &x0v, None)?;
            return Ok(finish(x, &active, round + rounds, true));
        }
        let w = zeroed_step(&abar, b, &x0v, &active);
        let negative: Vec<usize> = (0..beta).filter(|&j| w[j] < -1e-12).collect();
        if negative.is_empty() {
            if round == 1 {
                return Ok(finish(w, &active, round, false));
            }
            // Corrected points are feasible but not necessarily nearest;
            // refine until the multipliers on S are non-negative.
            let w = w.map(|v| v.max(0.0));
            let (x, refined, rounds) = exact_projection(a, b, &x0v, Some((w, active.clone())))?;
            let changed = refined != active;
            return Ok(finish(x, &refined, round + rounds - 1, changed));
        }
        for j in negative {
            active[j] = true;
        }
    }
    Err(Error::IterationCap(beta))
}

fn zero_columns(a: &DMatrix<f64>, active: &[bool]) -> DMatrix<f64> {
    let mut abar = a.clone();
    for (j, &on) in active.iter().enumerate() {
        if on {
            abar.column_mut(j).fill(0.0);
        }
    }
    abar
}

/// `x0 - Ā⁺(Ā x0 - b)` with `x0` zeroed on the active set.
fn zeroed_step(abar: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>, active: &[bool]) -> DVector<f64> {
    let mut start = x0.clone();
    for (j, &on) in active.iter().enumerate() {
        if on {
            start[j] = 0.0;
        }
    }
    &start - pseudoinverse(abar) * (abar * &start - b)
}

/// Primal active-set method for `min ‖x - x0‖₂` over `{A x = b, x >= 0}`,
/// started from `start` (a feasible point and working set) or an LP vertex.
/// Each subproblem is the column-zeroed
/// pseudoinverse step; constraints leave the working set on negative
/// multipliers.
fn exact_projection(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    start: Option<(DVector<f64>, Vec<bool>)>,
) -> Result<(DVector<f64>, Vec<bool>, usize)> {
    let beta = x0.len();
    let (mut x, mut work) = match start {
        Some(s) => s,
        None => {
            let sys = LinearFeasibility { a: a.clone(), b: b.clone() };
            let lp = crate::lp::lp_solve(&vec![0.0; beta], &sys);
            if lp.status != crate::lp::LpStatus::Optimal {
                return Err(Error::Infeasible(lp.phase1_residual));
            }
            let x = DVector::from_iterator(beta, lp.x.iter().map(|v| v.max(0.0)));
            let work = x.iter().map(|&v| v <= 1e-12).collect();
            (x, work)
        }
    };
    for j in 0..beta {
        if work[j] {
            x[j] = 0.0;
        }
    }
    let cap = 20 * beta + 100;
    for round in 1..=cap {
        let abar = zero_columns(a, &work);
        let y = zeroed_step(&abar, b, x0, &work);
        let d = &y - &x;
        if d.amax() <= 1e-13 {
            let g = &x - x0;
            let mut gf = g.clone();
            for j in 0..beta {
                if work[j] {
                    gf[j] = 0.0;
                }
            }
            let nu = pseudoinverse(&abar.transpose()) * gf;
            let mu = &g - a.transpose() * nu;
            let worst = (0..beta).filter(|&j| work[j]).min_by(|&i, &j| mu[i].total_cmp(&mu[j]));
            match worst {
                Some(j) if mu[j] < -1e-10 => work[j] = false,
                _ => return Ok((x, work, round)),
            }
            continue;
        }
        let mut step = 1.0;
        let mut blocking = None;
        for j in 0..beta {
            if !work[j] && d[j] < 0.0 {
                let t = -x[j] / d[j];
                if t < step {
                    step = t;
                    blocking = Some(j);
                }
            }
        }
        x += d * step;
        if let Some(j) = blocking {
            work[j] = true;
            x[j] = 0.0;
        }
    }
    Err(Error::IterationCap(cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalization_row_once() {
        let sys = LinearFeasibility::new(vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.3]).unwrap();
        assert_eq!(sys.alpha(), 2);
        let last = sys.a().row(1);
        assert!(last.iter().all(|&v| v == 1.0));
        assert_eq!(sys.b()[1], 1.0);
    }

    #[test]
    fn classical_identity_pins_source() {
        let p = Pmf::new(vec![0.2, 0.8]).unwrap();
        let sys = classical_feasibility(&p, &Channel::identity(2)).unwrap();
        let r = project_to_feasible(&sys, &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(r.x[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.x[1], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn classical_uninformative_accepts_everything() {
        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let w = Channel::constant(3, &p);
        let sys = classical_feasibility(&p, &w).unwrap();
        for x in [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]] {
            assert!(sys.residual_inf(&x) < 1e-15);
        }
    }

    #[test]
    fn classical_bsc_contains_uniform() {
        let sys = classical_feasibility(&Pmf::uniform(2), &Channel::bsc(0.1)).unwrap();
        assert!(sys.residual_inf(&[0.5, 0.5]) < 1e-15);
    }

    #[test]
    fn pseudoinverse_basics() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((pseudoinverse(&i3) - &i3).norm() < 1e-15);
        let z = DMatrix::<f64>::zeros(2, 4);
        assert_eq!(pseudoinverse(&z), DMatrix::zeros(4, 2));
    }

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let sys = LinearFeasibility::new(vec![vec![1.0, 1.0, 0.0]], vec![0.5]).unwrap();
        let r = project_to_feasible(&sys, &[0.25, 0.25, 0.5]).unwrap();
        assert!(r.l1_distance < 1e-15);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn projection_single_point_set() {
        let sys = LinearFeasibility::new(vec![vec![1.0, 0.0]], vec![0.3]).unwrap();
        let r = project_to_feasible(&sys, &[0.4, 0.6]).unwrap();
        assert_abs_diff_eq!(r.x[0], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(r.x[1], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(r.l1_distance, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn projection_matches_grid_qp() {
        let sys = LinearFeasibility::new(vec![vec![1.0, 1.0, 0.0]], vec![0.5]).unwrap();
        let x0 = [0.1, 0.3, 0.6];
        // Dense grid over the feasible segment {(t, 0.5 - t, 0.5)}.
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for k in 0..=50_000 {
            let t = 0.5 * k as f64 / 50_000.0;
            let d = (t - x0[0]).powi(2) + (0.5 - t - x0[1]).powi(2) + (0.5 - x0[2]).powi(2);
            if d < best {
                best = d;
                arg = t;
            }
        }
        assert_abs_diff_eq!(arg, 0.15, epsilon = 1e-5);
        let r = project_to_feasible(&sys, &x0).unwrap();
        assert_abs_diff_eq!(r.x[0], 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(r.x[1], 0.35, epsilon = 1e-12);
        assert_abs_diff_eq!(r.x[2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.l1_distance, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn projection_uses_active_set() {
        // x1 - x2 = 0.6 forces x2 <= 0.2; from (0, 0.5, 0.5) the plain
        // correction drives x2 negative.
        let sys = LinearFeasibility::new(vec![vec![1.0, -1.0, 0.0]], vec![0.6]).unwrap();
        let r = project_to_feasible(&sys, &[0.0, 0.5, 0.5]).unwrap();
        assert!(r.x.iter().all(|&v| v >= -1e-12));
        assert!(sys.residual_inf(&r.x) < 1e-9);
        assert!(r.iterations > 1);
        assert!(!r.active_set.is_empty());
    }

    #[test]
    fn projection_rejects_infeasible() {
        let sys = LinearFeasibility::new(vec![vec![1.0, 1.0]], vec![0.5]).unwrap();
        assert!(matches!(project_to_feasible(&sys, &[0.5, 0.5]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn filtering_drops_dependent_rows() {
        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let sys = classical_feasibility(&p, &Channel::bsc(0.2)).unwrap();
        // Source rows sum to the normalization row.
        assert_eq!(sys.alpha(), 3);
        assert_eq!(sys.filtered().alpha(), 2);
    }
}
