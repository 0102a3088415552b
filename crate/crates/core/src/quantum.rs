//! Small-dimension density operators and the quantum information quantities
//! needed for the quantum-classical rate: partial trace, canonical
//! purification, von Neumann entropy, CQ states and `I(X;R|B)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prob::Pmf;

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Largest operator dimension accepted by the eigensolver.
pub const MAX_DIM: usize = 64;

const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

/// Ordered tensor factors `(label, dimension)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    factors: Vec<(String, usize)>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(factors: Vec<(S, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> = factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if factors.is_empty() {
            return Err(Error::ShapeMismatch("layout has no factors".into()));
        }
        for (i, (label, d)) in factors.iter().enumerate() {
            if *d == 0 {
                return Err(Error::ShapeMismatch(format!("factor `{label}` has dimension 0")));
            }
            if factors[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::ShapeMismatch(format!("duplicate label `{label}`")));
            }
        }
        Ok(SubsystemLayout { factors })
    }

    /// Unlabelled single factor.
    pub fn single(label: &str, dim: usize) -> Self {
        SubsystemLayout { factors: vec![(label.to_string(), dim)] }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|(_, d)| *d).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].1)
    }

    /// Layout `self ⊗ other`.
    pub fn tensor(&self, other: &SubsystemLayout) -> Result<Self> {
        let mut f = self.factors.clone();
        f.extend(other.factors.iter().cloned());
        SubsystemLayout::new(f)
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    layout: SubsystemLayout,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}x{}, layout needs {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if d > MAX_DIM {
            return Err(Error::InvalidOperator(format!("dimension {d} exceeds cap {MAX_DIM}")));
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..d {
            for j in i..d {
                let diff = (matrix[(i, j)] - matrix[(j, i)].conj()).norm();
                if diff > HERMITIAN_TOL * scale {
                    return Err(Error::InvalidOperator(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidOperator(format!("trace is {tr}")));
        }
        let op = DensityOperator { layout, matrix: hermitize(&matrix) };
        let min = op.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::InvalidOperator(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(op)
    }

    pub(crate) fn from_trusted(layout: SubsystemLayout, matrix: CMatrix) -> Self {
        DensityOperator { layout, matrix: hermitize(&matrix) }
    }

    pub fn from_pure(layout: SubsystemLayout, amplitudes: &[C64]) -> Result<Self> {
        PureState::new(layout, amplitudes.to_vec())?.density()
    }

    /// Diagonal operator with the given probabilities.
    pub fn diagonal(layout: SubsystemLayout, probs: &Pmf) -> Result<Self> {
        if probs.len() != layout.total_dim() {
            return Err(Error::ShapeMismatch("diagonal length does not match layout".into()));
        }
        let m = CMatrix::from_diagonal(&DVector::from_iterator(
            probs.len(),
            probs.probs().iter().map(|&p| C64::new(p, 0.0)),
        ));
        DensityOperator::new(layout, m)
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        let m = CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        DensityOperator { layout, matrix: m }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        let layout = self.layout.tensor(&other.layout)?;
        Ok(DensityOperator { layout, matrix: self.matrix.kronecker(&other.matrix) })
    }

    /// Same matrix, relabelled factors (dimensions must agree).
    pub fn relabel(&self, layout: SubsystemLayout) -> Result<Self> {
        if layout.dims() != self.layout.dims() {
            return Err(Error::ShapeMismatch("relabel changes dimensions".into()));
        }
        Ok(DensityOperator { layout, matrix: self.matrix.clone() })
    }
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Unit vector on a labelled layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    layout: SubsystemLayout,
    amplitudes: DVector<C64>,
}

impl PureState {
    pub fn new(layout: SubsystemLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::ShapeMismatch("amplitude count does not match layout".into()));
        }
        let v = DVector::from_vec(amplitudes);
        if (v.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidOperator(format!("state norm is {}", v.norm())));
        }
        Ok(PureState { layout, amplitudes: v })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn density(&self) -> Result<DensityOperator> {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        if m.nrows() > MAX_DIM {
            return Err(Error::InvalidOperator(format!("dimension {} exceeds cap {MAX_DIM}", m.nrows())));
        }
        Ok(DensityOperator::from_trusted(self.layout.clone(), m))
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns; each eigenvector's first non-negligible component is made real
/// and positive.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let mut a = hermitize(m);
    let mut v = CMatrix::identity(n, n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // Phase step: rotate basis vector q so that a[p][q] is real.
                let phase = apq.conj() / r;
                for k in 0..n {
                    a[(k, q)] *= phase;
                }
                for k in 0..n {
                    a[(q, k)] *= phase.conj();
                }
                for k in 0..n {
                    v[(k, q)] *= phase;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s;
                    a[(k, q)] = akp * s + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * s;
                    a[(q, k)] = apk * s + aqk * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s;
                    v[(k, q)] = vkp * s + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut column = v.column(i).clone_owned();
        if let Some(first) = column.iter().find(|z| z.norm() > 1e-12).copied() {
            let fix = first.conj() / first.norm();
            column *= fix;
        }
        vecs.set_column(col, &column);
    }
    (values, vecs)
}

/// Reduced operator on the kept factors, in layout order.
pub fn partial_trace(op: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    let layout = op.layout();
    let mut keep_pos = Vec::with_capacity(keep.len());
    for label in keep {
        keep_pos.push(layout.position(label)?);
    }
    keep_pos.sort_unstable();
    keep_pos.dedup();
    let dims = layout.dims();
    let kept_layout = SubsystemLayout::new(
        keep_pos.iter().map(|&k| layout.factors()[k].clone()).collect::<Vec<_>>(),
    )
    .unwrap_or_else(|_| SubsystemLayout::single("", 1));
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_pos.contains(k)).collect();
    let kd: usize = keep_pos.iter().map(|&k| dims[k]).product();
    let td: usize = traced.iter().map(|&k| dims[k]).product();

    // Full index from (kept index, traced index).
    let compose = |ki: usize, ti: usize| -> usize {
        let mut digits = vec![0; dims.len()];
        let mut r = ki;
        for &k in keep_pos.iter().rev() {
            digits[k] = r % dims[k];
            r /= dims[k];
        }
        let mut r = ti;
        for &k in traced.iter().rev() {
            digits[k] = r % dims[k];
            r /= dims[k];
        }
        digits.iter().zip(&dims).fold(0, |acc, (d, s)| acc * s + d)
    };
    let index: Vec<Vec<usize>> = (0..kd).map(|ki| (0..td).map(|ti| compose(ki, ti)).collect()).collect();

    let m = op.matrix();
    let mut out = CMatrix::zeros(kd, kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..td {
                acc += m[(index[i][t], index[j][t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityOperator::from_trusted(kept_layout, out))
}

/// Canonical purification `sum_i sqrt(l_i) |i>_R |v_i>` on layout
/// `(R, original factors)`. The reference dimension defaults to the operator
/// dimension; a smaller one is allowed when the rank fits.
pub fn canonical_purification(rho: &DensityOperator, r_label: &str, r_dim: Option<usize>) -> Result<PureState> {
    let d = rho.dim();
    let r_dim = r_dim.unwrap_or(d);
    if r_dim == 0 {
        return Err(Error::InvalidParameter("reference dimension must be positive".into()));
    }
    let (values, vecs) = hermitian_eigen(rho.matrix());
    if let Some(dropped) = values.iter().skip(r_dim).find(|&&l| l > 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "reference dimension {r_dim} is below the rank (dropped eigenvalue {dropped:.3e})"
        )));
    }
    let layout = SubsystemLayout::single(r_label, r_dim).tensor(rho.layout())?;
    let mut amps = vec![C64::new(0.0, 0.0); r_dim * d];
    for (i, &l) in values.iter().enumerate().take(r_dim.min(d)) {
        // Roundoff-level eigenvalues would otherwise leak as sqrt(1e-16) amplitudes.
        let w = if l > 1e-14 { l.sqrt() } else { 0.0 };
        for k in 0..d {
            amps[i * d + k] = vecs[(k, i)] * w;
        }
    }
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|z| *z /= norm);
    PureState::new(layout, amps)
}

fn entropy_from_eigenvalues(values: &[f64]) -> f64 {
    values
        .iter()
        .map(|&l| l.max(0.0))
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_from_eigenvalues(&rho.eigenvalues())
}

/// Entropy of the reduction onto `labels` (empty set gives 0).
pub fn reduced_entropy(rho: &DensityOperator, labels: &[&str]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    Ok(von_neumann_entropy(&partial_trace(rho, labels)?))
}

/// `I(A;B) = S(A) + S(B) - S(AB)` between two label groups.
pub fn quantum_mutual_information(rho: &DensityOperator, a: &[&str], b: &[&str]) -> Result<f64> {
    let ab: Vec<&str> = a.iter().chain(b).copied().collect();
    Ok(reduced_entropy(rho, a)? + reduced_entropy(rho, b)? - reduced_entropy(rho, &ab)?)
}

/// `I(A;B|C) = S(AC) + S(BC) - S(C) - S(ABC)`.
pub fn quantum_conditional_mi(rho: &DensityOperator, a: &str, b: &str, c: &str) -> Result<f64> {
    Ok(reduced_entropy(rho, &[a, c])? + reduced_entropy(rho, &[b, c])?
        - reduced_entropy(rho, &[c])?
        - reduced_entropy(rho, &[a, b, c])?)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.iter().map(|l| l.abs()).sum()
}

/// Map from a finite alphabet into density operators on a common layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CqChannelQ {
    states: Vec<DensityOperator>,
}

impl CqChannelQ {
    pub fn new(states: Vec<DensityOperator>) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::ShapeMismatch("CQ channel needs at least one letter".into()))?;
        if states.iter().any(|s| s.layout() != first.layout()) {
            return Err(Error::ShapeMismatch("CQ channel states use different layouts".into()));
        }
        Ok(CqChannelQ { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn state(&self, x: usize) -> &DensityOperator {
        &self.states[x]
    }

    pub fn layout(&self) -> &SubsystemLayout {
        self.states[0].layout()
    }

    fn check(&self, p: &Pmf) -> Result<()> {
        if p.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "distribution has {} letters, CQ channel has {}",
                p.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// `W(p) = sum_x p(x) W_x`.
pub fn average_state(p: &Pmf, w: &CqChannelQ) -> Result<DensityOperator> {
    w.check(p)?;
    let d = w.layout().total_dim();
    let mut m = CMatrix::zeros(d, d);
    for (x, s) in w.states().iter().enumerate() {
        m += s.matrix() * C64::new(p.get(x), 0.0);
    }
    Ok(DensityOperator::from_trusted(w.layout().clone(), m))
}

/// Block-diagonal `sum_x p(x) |x><x| ⊗ W_x` on layout `(X, W's factors)`.
pub fn cq_state(p: &Pmf, w: &CqChannelQ, x_label: &str) -> Result<DensityOperator> {
    w.check(p)?;
    let layout = SubsystemLayout::single(x_label, p.len()).tensor(w.layout())?;
    let d = w.layout().total_dim();
    let mut m = CMatrix::zeros(p.len() * d, p.len() * d);
    for (x, s) in w.states().iter().enumerate() {
        let block = s.matrix() * C64::new(p.get(x), 0.0);
        m.view_mut((x * d, x * d), (d, d)).copy_from(&block);
    }
    Ok(DensityOperator::from_trusted(layout, m))
}

/// Both evaluations of `I(X;R|B)` on the CQ state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumCmi {
    /// `S(XB) + S(RB) - S(B) - S(XRB)` on the assembled state.
    pub value: f64,
    /// `sum_x p(x)[S(W_x^B) - S(W_x^RB)] + S(W(p)^RB) - S(W(p)^B)`.
    pub block_value: f64,
}

/// `I(X;R|B)` of `sum_x p(x)|x><x| ⊗ W_x^{RB}`.
pub fn quantum_cmi(p: &Pmf, w: &CqChannelQ, r_label: &str, b_label: &str) -> Result<QuantumCmi> {
    let x_label = unused_label(w.layout(), "X");
    let sigma = cq_state(p, w, &x_label)?;
    let value = quantum_conditional_mi(&sigma, &x_label, r_label, b_label)?;

    let mut per_letter = 0.0;
    for (x, s) in w.states().iter().enumerate() {
        if p.get(x) > 0.0 {
            per_letter += p.get(x)
                * (reduced_entropy(s, &[b_label])? - reduced_entropy(s, &[r_label, b_label])?);
        }
    }
    let avg = average_state(p, w)?;
    let block_value =
        per_letter + reduced_entropy(&avg, &[r_label, b_label])? - reduced_entropy(&avg, &[b_label])?;
    Ok(QuantumCmi { value, block_value })
}

pub(crate) fn unused_label(layout: &SubsystemLayout, base: &str) -> String {
    let mut label = base.to_string();
    while layout.position(&label).is_ok() {
        label.push('\'');
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::entropy;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit(label: &str) -> SubsystemLayout {
        SubsystemLayout::single(label, 2)
    }

    fn bell() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let layout = SubsystemLayout::new(vec![("A", 2), ("B", 2)]).unwrap();
        DensityOperator::from_pure(layout, &[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap()
    }

    fn mixed_qubit(label: &str) -> DensityOperator {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0)]);
        DensityOperator::new(qubit(label), m).unwrap()
    }

    #[test]
    fn rejects_invalid_operators() {
        let nonherm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(DensityOperator::new(qubit("A"), nonherm).is_err());
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        assert!(DensityOperator::new(qubit("A"), neg).is_err());
        let trace2 = CMatrix::identity(2, 2);
        assert!(DensityOperator::new(qubit("A"), trace2).is_err());
    }

    #[test]
    fn eigen_reconstructs() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.5, 0.0), c(0.1, 0.2), c(0.0, -0.1),
                c(0.1, -0.2), c(0.3, 0.0), c(0.05, 0.0),
                c(0.0, 0.1), c(0.05, 0.0), c(0.2, 0.0),
            ],
        );
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(3, vals.iter().map(|&l| c(l, 0.0))));
        let back = &vecs * diag * vecs.adjoint();
        assert!((back - &m).norm() < 1e-13);
        let ortho = vecs.adjoint() * &vecs - CMatrix::identity(3, 3);
        assert!(ortho.norm() < 1e-13);
    }

    #[test]
    fn partial_trace_of_product() {
        let rho = mixed_qubit("A");
        let sigma = DensityOperator::maximally_mixed(SubsystemLayout::single("B", 3));
        let prod = rho.tensor(&sigma).unwrap();
        let back = partial_trace(&prod, &["A"]).unwrap();
        assert!((back.matrix() - rho.matrix()).norm() < 1e-15);
        let other = partial_trace(&prod, &["B"]).unwrap();
        assert!((other.matrix() - sigma.matrix()).norm() < 1e-15);
        assert!(partial_trace(&prod, &["Q"]).is_err());
    }

    #[test]
    fn bell_reductions_are_maximally_mixed() {
        let b = bell();
        for label in ["A", "B"] {
            let red = partial_trace(&b, &[label]).unwrap();
            let half = CMatrix::identity(2, 2) * c(0.5, 0.0);
            assert!((red.matrix() - half).norm() < 1e-15);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(von_neumann_entropy(&bell()), 0.0, epsilon = 1e-12);
        let half = DensityOperator::maximally_mixed(qubit("A"));
        assert_abs_diff_eq!(von_neumann_entropy(&half), 1.0, epsilon = 1e-14);
        let d = DensityOperator::diagonal(qubit("A"), &Pmf::new(vec![0.1, 0.9]).unwrap()).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&d), 0.468996, epsilon = 1e-6);
        assert_abs_diff_eq!(
            von_neumann_entropy(&d),
            entropy(&Pmf::new(vec![0.1, 0.9]).unwrap()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn purification_of_pure_state_is_product() {
        let s = 0.6;
        let t = 0.8;
        let rho = DensityOperator::from_pure(qubit("A"), &[c(s, 0.0), c(0.0, t)]).unwrap();
        let phi = canonical_purification(&rho, "R", None).unwrap();
        let a = phi.amplitudes();
        // |0>_R |psi>, with |psi>'s first component real positive.
        assert_abs_diff_eq!(a[0].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].im, t, epsilon = 1e-12);
        assert!(a[2].norm() < 1e-12 && a[3].norm() < 1e-12);
        let compact = canonical_purification(&rho, "R", Some(1)).unwrap();
        assert_eq!(compact.layout().dims(), vec![1, 2]);
    }

    #[test]
    fn purification_of_maximally_mixed_qubit() {
        let rho = DensityOperator::maximally_mixed(qubit("A"));
        let phi = canonical_purification(&rho, "R", None).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [s, 0.0, 0.0, s];
        for (a, e) in phi.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.re, e, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-12);
        }
        assert!(canonical_purification(&rho, "R", Some(1)).is_err());
    }

    #[test]
    fn purification_round_trip() {
        let rho = mixed_qubit("A");
        let phi = canonical_purification(&rho, "R", None).unwrap().density().unwrap();
        let back = partial_trace(&phi, &["A"]).unwrap();
        assert!((back.matrix() - rho.matrix()).norm() < 1e-12);
    }

    #[test]
    fn cq_state_and_average() {
        let w0 = DensityOperator::diagonal(qubit("B"), &Pmf::new(vec![1.0, 0.0]).unwrap()).unwrap();
        let w1 = DensityOperator::diagonal(qubit("B"), &Pmf::new(vec![0.0, 1.0]).unwrap()).unwrap();
        let w = CqChannelQ::new(vec![w0.clone(), w1]).unwrap();
        let avg = average_state(&Pmf::uniform(2), &w).unwrap();
        assert!((avg.matrix() - DensityOperator::maximally_mixed(qubit("B")).matrix().clone()).norm() < 1e-15);
        let point = average_state(&Pmf::point_mass(2, 0), &w).unwrap();
        assert_eq!(point.matrix(), w0.matrix());

        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let sigma = cq_state(&p, &w, "X").unwrap();
        assert_abs_diff_eq!(sigma.matrix().trace().re, 1.0, epsilon = 1e-15);
        assert_eq!(sigma.layout().labels(), vec!["X", "B"]);
        assert!(average_state(&Pmf::uniform(3), &w).is_err());
    }

    #[test]
    fn cq_state_with_constant_channel_is_product() {
        let rho = mixed_qubit("B");
        let w = CqChannelQ::new(vec![rho.clone(), rho.clone(), rho.clone()]).unwrap();
        let p = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        let sigma = cq_state(&p, &w, "X").unwrap();
        let expect = DensityOperator::diagonal(SubsystemLayout::single("X", 3), &p)
            .unwrap()
            .tensor(&rho)
            .unwrap();
        assert!((sigma.matrix() - expect.matrix()).norm() < 1e-15);
    }

    #[test]
    fn qcmi_vanishes_for_constant_channel_and_trivial_r() {
        let layout = SubsystemLayout::new(vec![("R", 2), ("B", 2)]).unwrap();
        let s = bell().relabel(layout).unwrap();
        let w = CqChannelQ::new(vec![s.clone(), s]).unwrap();
        let q = quantum_cmi(&Pmf::new(vec![0.4, 0.6]).unwrap(), &w, "R", "B").unwrap();
        assert_abs_diff_eq!(q.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.block_value, 0.0, epsilon = 1e-12);

        let lay = SubsystemLayout::new(vec![("R", 1), ("B", 2)]).unwrap();
        let a = mixed_qubit("B").relabel(qubit("B")).unwrap();
        let w = CqChannelQ::new(vec![
            DensityOperator::new(lay.clone(), a.matrix().clone()).unwrap(),
            DensityOperator::maximally_mixed(lay),
        ])
        .unwrap();
        let q = quantum_cmi(&Pmf::uniform(2), &w, "R", "B").unwrap();
        assert_abs_diff_eq!(q.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_norm_of_difference() {
        let a = DensityOperator::diagonal(qubit("A"), &Pmf::new(vec![1.0, 0.0]).unwrap()).unwrap();
        let b = DensityOperator::diagonal(qubit("A"), &Pmf::new(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(trace_norm(&(a.matrix() - b.matrix())), 2.0, epsilon = 1e-15);
    }
}
