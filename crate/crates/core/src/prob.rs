//! Finite-alphabet distributions, channels and the entropic functionals built
//! on them. All information quantities are in bits, with `0 log 0 = 0`.

use crate::error::{Error, Result};

/// Normalization tolerance for distributions supplied by callers.
pub const PMF_TOL: f64 = 1e-12;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates `probs`; no renormalization is performed.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        Ok(Pmf { probs })
    }

    /// Scales non-negative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPmf("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPmf("weights sum to zero".into()));
        }
        Ok(Pmf { probs: weights.into_iter().map(|w| w / total).collect() })
    }

    /// Clamps solver noise (entries down to `-tol`) and renormalizes.
    pub fn from_solver(x: &[f64], tol: f64) -> Result<Self> {
        if let Some(bad) = x.iter().find(|v| **v < -tol || !v.is_finite()) {
            return Err(Error::InvalidPmf(format!("solver output entry {bad} is negative")));
        }
        Pmf::normalized(x.iter().map(|v| v.max(0.0)).collect())
    }

    pub fn uniform(k: usize) -> Self {
        Pmf { probs: vec![1.0 / k as f64; k] }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Pmf { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidPmf("empty alphabet".into()));
    }
    for (i, p) in probs.iter().enumerate() {
        if !p.is_finite() || *p < 0.0 {
            return Err(Error::InvalidPmf(format!("entry {i} = {p}")));
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(Error::InvalidPmf(format!("entries sum to {total}")));
    }
    Ok(())
}

/// A row-stochastic matrix: `get(i, j)` is the probability of output `j`
/// given input `i`. Multi-input channels flatten their inputs row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    n_in: usize,
    n_out: usize,
    data: Vec<f64>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_in = rows.len();
        if n_in == 0 {
            return Err(Error::InvalidChannel("no rows".into()));
        }
        let n_out = rows[0].len();
        let mut data = Vec::with_capacity(n_in * n_out);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_out {
                return Err(Error::InvalidChannel(format!("row {i} has length {}", row.len())));
            }
            check_probs(&row).map_err(|e| Error::InvalidChannel(format!("row {i}: {e}")))?;
            data.extend(row);
        }
        Ok(Channel { n_in, n_out, data })
    }

    /// Every row equal to `p`.
    pub fn constant(n_in: usize, p: &Pmf) -> Self {
        let data = (0..n_in).flat_map(|_| p.probs().iter().copied()).collect();
        Channel { n_in, n_out: p.len(), data }
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Channel { n_in: k, n_out: k, data }
    }

    /// Binary symmetric channel with the given crossover.
    pub fn bsc(p: f64) -> Self {
        Channel { n_in: 2, n_out: 2, data: vec![1.0 - p, p, p, 1.0 - p] }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.n_out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_out..(i + 1) * self.n_out]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_out + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_out)
    }

    /// The joint `p(i) W(j|i)` as a two-axis table (input, output).
    pub fn joint_with_input(&self, p: &Pmf) -> Result<JointPmf> {
        if p.len() != self.n_in {
            return Err(Error::ShapeMismatch(format!(
                "input distribution has {} symbols, channel expects {}",
                p.len(),
                self.n_in
            )));
        }
        let table = (0..self.n_in)
            .flat_map(|i| self.row(i).iter().map(move |w| p.get(i) * w))
            .collect();
        Ok(JointPmf { axes: vec![self.n_in, self.n_out], table })
    }

    /// Output distribution `sum_i p(i) W(.|i)`.
    pub fn output_of(&self, p: &Pmf) -> Result<Pmf> {
        Ok(self.joint_with_input(p)?.marginal(&[1])?.to_pmf())
    }
}

/// A joint distribution on a product of finite alphabets, stored row-major
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    axes: Vec<usize>,
    table: Vec<f64>,
}

impl JointPmf {
    pub fn new(axes: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|&a| a == 0) {
            return Err(Error::InvalidPmf("axis sizes must be positive".into()));
        }
        let size: usize = axes.iter().product();
        if table.len() != size {
            return Err(Error::ShapeMismatch(format!(
                "table has {} cells, axes {:?} need {size}",
                table.len(),
                axes
            )));
        }
        check_probs(&table)?;
        Ok(JointPmf { axes, table })
    }

    /// Product distribution of independent marginals.
    pub fn product(marginals: &[&Pmf]) -> Self {
        let axes: Vec<usize> = marginals.iter().map(|p| p.len()).collect();
        let mut table = vec![1.0];
        for p in marginals {
            table = table
                .iter()
                .flat_map(|t| p.probs().iter().map(move |q| t * q))
                .collect();
        }
        JointPmf { axes, table }
    }

    pub(crate) fn from_raw(axes: Vec<usize>, table: Vec<f64>) -> Self {
        JointPmf { axes, table }
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Multi-index of a flat cell.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (k, &size) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % size;
            flat /= size;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.table[self.ravel(idx)]
    }

    /// Marginal on the listed axes, in the listed order.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointPmf> {
        if let Some(bad) = keep.iter().find(|&&k| k >= self.axes.len()) {
            return Err(Error::ShapeMismatch(format!("axis {bad} out of range")));
        }
        let out_axes: Vec<usize> = keep.iter().map(|&k| self.axes[k]).collect();
        let mut out = vec![0.0; out_axes.iter().product()];
        for (flat, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let idx = self.unravel(flat);
            let o = keep.iter().fold(0, |acc, &k| acc * self.axes[k] + idx[k]);
            out[o] += p;
        }
        Ok(JointPmf { axes: out_axes, table: out })
    }

    /// Flat table as a distribution (sum already checked).
    pub fn to_pmf(&self) -> Pmf {
        Pmf { probs: self.table.clone() }
    }
}

fn entropy_of(values: &[f64]) -> f64 {
    let h: f64 = values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

/// Entropy of the whole joint table.
pub fn joint_entropy(j: &JointPmf) -> f64 {
    entropy_of(j.table())
}

fn clamp_info(v: f64) -> f64 {
    if v < 0.0 && v > -1e-12 {
        0.0
    } else {
        v
    }
}

fn marginal_entropy(j: &JointPmf, keep: &[usize]) -> f64 {
    if keep.is_empty() {
        return 0.0;
    }
    joint_entropy(&j.marginal(keep).expect("axes validated by caller"))
}

/// `I(X;Y)` of a two-axis joint.
pub fn mutual_information(j: &JointPmf) -> Result<f64> {
    if j.axes().len() != 2 {
        return Err(Error::ShapeMismatch(format!("expected 2 axes, got {}", j.axes().len())));
    }
    let v = marginal_entropy(j, &[0]) + marginal_entropy(j, &[1]) - joint_entropy(j);
    Ok(clamp_info(v))
}

/// `I(A;B|C)` of a three-axis joint (A, B, C).
pub fn conditional_mutual_information(j: &JointPmf) -> Result<f64> {
    if j.axes().len() != 3 {
        return Err(Error::ShapeMismatch(format!("expected 3 axes, got {}", j.axes().len())));
    }
    let v = marginal_entropy(j, &[0, 2]) + marginal_entropy(j, &[1, 2])
        - marginal_entropy(j, &[2])
        - joint_entropy(j);
    Ok(clamp_info(v))
}

/// Mutual information between two groups of axes of a joint.
pub fn mutual_information_between(j: &JointPmf, a: &[usize], b: &[usize]) -> Result<f64> {
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    j.marginal(&ab)?;
    let v = marginal_entropy(j, a) + marginal_entropy(j, b) - marginal_entropy(j, &ab);
    Ok(clamp_info(v))
}

/// Total variation `(1/2) sum |p - q|`.
pub fn total_variation(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    if p.axes() != q.axes() {
        return Err(Error::ShapeMismatch(format!(
            "axes {:?} vs {:?}",
            p.axes(),
            q.axes()
        )));
    }
    Ok(tv_slices(p.table(), q.table()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Conditional distribution of one axis given others. Rows are indexed by
/// the conditioning axes flattened row-major in the order given; rows whose
/// conditioning cell has zero mass are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub n_target: usize,
    pub rows: Vec<Option<Vec<f64>>>,
}

impl Posterior {
    pub fn is_defined(&self, row: usize) -> bool {
        self.rows[row].is_some()
    }

    /// Converts to a channel, failing if any row is undefined.
    pub fn to_channel(&self) -> Result<Channel> {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.clone()
                    .ok_or_else(|| Error::InvalidChannel(format!("row {i} has zero conditioning mass")))
            })
            .collect::<Result<Vec<_>>>()?;
        Channel::new(rows)
    }
}

/// Bayes posterior of `target` given `given` under `j`.
pub fn bayes_posterior(j: &JointPmf, target: usize, given: &[usize]) -> Result<Posterior> {
    if given.contains(&target) {
        return Err(Error::ShapeMismatch("target axis is also conditioned on".into()));
    }
    let mut keep: Vec<usize> = given.to_vec();
    keep.push(target);
    let m = j.marginal(&keep)?;
    let n_target = j.axes()[target];
    let rows = m
        .table()
        .chunks(n_target)
        .map(|chunk| {
            let mass: f64 = chunk.iter().sum();
            (mass > 0.0).then(|| chunk.iter().map(|v| v / mass).collect())
        })
        .collect();
    Ok(Posterior { n_target, rows })
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn joint2(t: [[f64; 2]; 2]) -> JointPmf {
        JointPmf::new(vec![2, 2], t.iter().flatten().copied().collect()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&Pmf::uniform(4)), 2.0, epsilon = 1e-15);
        assert_eq!(entropy(&Pmf::point_mass(3, 1)), 0.0);
        let hand = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
        let h = entropy(&Pmf::new(vec![0.1, 0.9]).unwrap());
        assert_abs_diff_eq!(h, hand, epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.468996, epsilon = 1e-6);
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::new(vec![0.5, 0.6]).is_err());
        assert!(Pmf::new(vec![-0.1, 1.1]).is_err());
        assert!(Pmf::new(vec![]).is_err());
        assert!(Pmf::new(vec![0.1, 0.2, 0.7]).is_ok());
        assert_eq!(Pmf::normalized(vec![1.0, 3.0]).unwrap().probs(), &[0.25, 0.75]);
    }

    #[test]
    fn mutual_information_examples() {
        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let q = Pmf::new(vec![0.6, 0.4]).unwrap();
        assert_abs_diff_eq!(
            mutual_information(&JointPmf::product(&[&p, &q])).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let copy = joint2([[0.5, 0.0], [0.0, 0.5]]);
        assert_abs_diff_eq!(mutual_information(&copy).unwrap(), 1.0, epsilon = 1e-15);
        let j = joint2([[0.4, 0.1], [0.1, 0.4]]);
        let closed = 1.0 - binary_entropy(0.2);
        assert_abs_diff_eq!(mutual_information(&j).unwrap(), closed, epsilon = 1e-14);
        assert_abs_diff_eq!(closed, 0.278072, epsilon = 1e-6);
    }

    #[test]
    fn cmi_examples() {
        let b = Pmf::uniform(2);
        let c = Pmf::new(vec![0.2, 0.8]).unwrap();
        let indep = JointPmf::product(&[&b, &c, &b]);
        assert_abs_diff_eq!(conditional_mutual_information(&indep).unwrap(), 0.0, epsilon = 1e-14);
        let mut t = vec![0.0; 8];
        t[0] = 0.5;
        t[7] = 0.5;
        let same = JointPmf::new(vec![2, 2, 2], t).unwrap();
        assert_abs_diff_eq!(conditional_mutual_information(&same).unwrap(), 0.0, epsilon = 1e-14);
        assert!(conditional_mutual_information(&joint2([[0.25; 2]; 2])).is_err());
    }

    #[test]
    fn tv_examples() {
        let p = JointPmf::new(vec![2], vec![0.4, 0.6]).unwrap();
        let q = JointPmf::new(vec![2], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(total_variation(&p, &q).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let a = JointPmf::new(vec![2], vec![1.0, 0.0]).unwrap();
        let b = JointPmf::new(vec![2], vec![0.0, 1.0]).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        let c = JointPmf::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        assert!(total_variation(&a, &c).is_err());
    }

    #[test]
    fn posterior_examples() {
        let j = joint2([[0.4, 0.1], [0.1, 0.4]]);
        let post = bayes_posterior(&j, 0, &[1]).unwrap();
        let rows: Vec<Vec<f64>> = post.rows.iter().map(|r| r.clone().unwrap()).collect();
        assert_abs_diff_eq!(rows[0][0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[0][1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[1][0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[1][1], 0.8, epsilon = 1e-15);

        let copy = joint2([[0.3, 0.0], [0.0, 0.7]]);
        let post = bayes_posterior(&copy, 1, &[0]).unwrap();
        assert_eq!(post.to_channel().unwrap(), Channel::identity(2));

        let p = Pmf::new(vec![0.25, 0.75]).unwrap();
        let q = Pmf::new(vec![0.1, 0.6, 0.3]).unwrap();
        let post = bayes_posterior(&JointPmf::product(&[&p, &q]), 0, &[1]).unwrap();
        for r in &post.rows {
            let r = r.as_ref().unwrap();
            assert_abs_diff_eq!(r[0], 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn posterior_flags_zero_mass() {
        let j = joint2([[0.5, 0.0], [0.5, 0.0]]);
        let post = bayes_posterior(&j, 0, &[1]).unwrap();
        assert!(post.is_defined(0));
        assert!(!post.is_defined(1));
        assert!(post.to_channel().is_err());
    }

    #[test]
    fn channel_validation() {
        assert!(Channel::new(vec![vec![0.5, 0.5], vec![0.9, 0.2]]).is_err());
        assert!(Channel::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        let w = Channel::bsc(0.1);
        let out = w.output_of(&Pmf::new(vec![0.25, 0.75]).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(0), 0.25 * 0.9 + 0.75 * 0.1, epsilon = 1e-15);
    }
}
