//! JSON schemas for inputs and results, and the simulation manifest runner.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::LinearFeasibility;
use crate::prob::{Channel, JointPmf, Pmf};
use crate::quantum::{CqChannelQ, DensityOperator, SubsystemLayout, C64};
use crate::rate::{distortion_matrix, DistortionSpec};
use crate::sim::{
    derive_seed, empirical_distortion, exact_block_tv, exact_tv_cost, failure_rates, simulate, single_letter_diagnostic,
    Code, ProtocolSetup, SimParams, SpmfMode, DEFAULT_TV_BUDGET,
};
use crate::wz::{wz_inner_bound, WzOptions, WzSetup};

/// `{ "alphabet": [...], "probs": [...] }`. With `normalize`, the weights are
/// rescaled instead of being required to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<String>>,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

impl PmfJson {
    pub fn to_pmf(&self) -> Result<Pmf> {
        check_alphabet(self.alphabet.as_deref(), self.probs.len(), "alphabet")?;
        if self.normalize {
            Pmf::normalized(self.probs.clone())
        } else {
            Pmf::new(self.probs.clone())
        }
    }

    pub fn from_pmf(p: &Pmf) -> Self {
        PmfJson { alphabet: None, probs: p.probs().to_vec(), normalize: false }
    }
}

/// `{ "input": [...], "output": [...], "rows": [[...]] }`; row `i` is the
/// output distribution for input `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl ChannelJson {
    pub fn to_channel(&self) -> Result<Channel> {
        check_alphabet(self.input.as_deref(), self.rows.len(), "input")?;
        if let Some(first) = self.rows.first() {
            check_alphabet(self.output.as_deref(), first.len(), "output")?;
        }
        Channel::new(self.rows.clone())
    }

    pub fn from_channel(w: &Channel) -> Self {
        ChannelJson { input: None, output: None, rows: w.rows().map(<[f64]>::to_vec).collect() }
    }
}

fn check_alphabet(names: Option<&[String]>, len: usize, what: &str) -> Result<()> {
    match names {
        Some(a) if a.len() != len => {
            Err(Error::ShapeMismatch(format!("{what} lists {} symbols, data has {len}", a.len())))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisJson {
    pub name: String,
    pub alphabet: Vec<String>,
}

/// Named axes and a flat row-major table (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointJson {
    pub axes: Vec<AxisJson>,
    pub probs: Vec<f64>,
}

impl JointJson {
    pub fn to_joint(&self) -> Result<JointPmf> {
        JointPmf::new(self.axes.iter().map(|a| a.alphabet.len()).collect(), self.probs.clone())
    }

    /// Checks the axis names against `expected` before converting.
    pub fn to_joint_named(&self, expected: &[&str]) -> Result<JointPmf> {
        let names: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        if names != expected {
            return Err(Error::ShapeMismatch(format!("expected axes {expected:?}, found {names:?}")));
        }
        self.to_joint()
    }
}

/// `{ "dims": [..], "labels": [..], "re": [[..]], "im": [[..]] }`; `im`
/// defaults to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl DensityJson {
    /// `default_labels` names the factors when the file does not.
    pub fn to_operator(&self, default_labels: &[&str]) -> Result<DensityOperator> {
        let labels: Vec<String> = match &self.labels {
            Some(l) => l.clone(),
            None if self.dims.len() == default_labels.len() => default_labels.iter().map(|s| s.to_string()).collect(),
            None => {
                return Err(Error::ShapeMismatch(format!(
                    "{} factors but no labels; expected {} factors {default_labels:?}",
                    self.dims.len(),
                    default_labels.len()
                )))
            }
        };
        if labels.len() != self.dims.len() {
            return Err(Error::ShapeMismatch("labels and dims differ in length".into()));
        }
        let layout = SubsystemLayout::new(labels.into_iter().zip(self.dims.iter().copied()).collect())?;
        let d = layout.total_dim();
        let square = |m: &Vec<Vec<f64>>, what: &str| -> Result<()> {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Error::ShapeMismatch(format!("`{what}` must be {d}x{d}")));
            }
            Ok(())
        };
        square(&self.re, "re")?;
        if let Some(im) = &self.im {
            square(im, "im")?;
        }
        let m = DMatrix::from_fn(d, d, |i, j| {
            C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        });
        DensityOperator::new(layout, m)
    }

    pub fn from_operator(op: &DensityOperator) -> Self {
        let d = op.dim();
        let m = op.matrix();
        DensityJson {
            dims: op.layout().dims(),
            labels: Some(op.layout().labels().iter().map(|s| s.to_string()).collect()),
            re: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
            im: Some((0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect()),
        }
    }
}

/// A classical alphabet mapped to density operators on one layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqChannelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<Vec<String>>,
    pub states: Vec<DensityJson>,
}

impl CqChannelJson {
    pub fn to_channel(&self, default_labels: &[&str]) -> Result<CqChannelQ> {
        check_alphabet(self.alphabet.as_deref(), self.states.len(), "alphabet")?;
        let states = self.states.iter().map(|s| s.to_operator(default_labels)).collect::<Result<Vec<_>>>()?;
        CqChannelQ::new(states)
    }
}

/// `{ "A": [[..]], "b": [..] }`; normalization is appended automatically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl SystemJson {
    pub fn to_system(&self) -> Result<LinearFeasibility> {
        LinearFeasibility::new(self.a.clone(), self.b.clone())
    }
}

/// Starting point for projection: a bare array or `{ "x0": [..] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointJson {
    Bare(Vec<f64>),
    Wrapped { x0: Vec<f64> },
}

impl PointJson {
    pub fn into_vec(self) -> Vec<f64> {
        match self {
            PointJson::Bare(v) | PointJson::Wrapped { x0: v } => v,
        }
    }
}

/// `{ "P_XZ": joint(X, Z), "Y": [...], "W": channel (Y,Z) -> X, "U_size": k }`.
/// `W` rows are indexed by `y * |Z| + z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WzSetupJson {
    #[serde(rename = "P_XZ")]
    pub p_xz: JointJson,
    #[serde(rename = "Y")]
    pub y: Vec<String>,
    #[serde(rename = "W")]
    pub w: ChannelJson,
    #[serde(rename = "U_size", default, skip_serializing_if = "Option::is_none")]
    pub u_size: Option<usize>,
}

impl WzSetupJson {
    pub fn to_setup(&self) -> Result<WzSetup> {
        if self.p_xz.axes.len() != 2 {
            return Err(Error::ShapeMismatch("P_XZ must have exactly two axes (X, Z)".into()));
        }
        WzSetup::new(self.p_xz.to_joint()?, self.y.len(), self.w.to_channel()?, self.u_size)
    }
}

/// Distortion for the simulator: an explicit matrix `d[x][y]`, or the
/// `-c log2 W(x|y) + b(x)` family of a side-information-free setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionJson {
    Matrix(Vec<Vec<f64>>),
    FromChannel { c: f64, b: Vec<f64> },
}

impl DistortionJson {
    pub fn to_spec(&self, setup: &WzSetup) -> Result<DistortionSpec> {
        match self {
            DistortionJson::Matrix(d) => DistortionSpec::new(d.clone(), 0.0),
            DistortionJson::FromChannel { c, b } => {
                if setup.n_z() != 1 {
                    return Err(Error::InvalidParameter("from_channel distortion needs |Z| = 1".into()));
                }
                DistortionSpec::new(distortion_matrix(setup.w(), *c, b)?, 0.0)
            }
        }
    }
}

fn default_eta() -> f64 {
    0.1
}

fn default_trials() -> usize {
    1000
}

fn default_budget() -> f64 {
    DEFAULT_TV_BUDGET
}

/// Simulation run: setup, auxiliary channels, rates, slacks, block lengths,
/// trial count and seeds. When the auxiliary channels are omitted they are
/// taken from the inner-bound search on the setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest {
    pub setup: WzSetupJson,
    #[serde(rename = "P_U_given_X", default, skip_serializing_if = "Option::is_none")]
    pub p_u_given_x: Option<ChannelJson>,
    #[serde(rename = "P_Y_given_UZ", default, skip_serializing_if = "Option::is_none")]
    pub p_y_given_uz: Option<ChannelJson>,
    #[serde(rename = "R")]
    pub rate: f64,
    #[serde(rename = "R_bar")]
    pub rate_bar: f64,
    pub delta: f64,
    pub delta_hat: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub n: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionJson>,
    #[serde(default = "default_budget")]
    pub exact_tv_budget: f64,
    /// Refuse (instead of skipping) block lengths whose exact TV exceeds the budget.
    #[serde(default)]
    pub require_exact: bool,
}

impl SimManifest {
    /// Resolves the auxiliary channels, running the inner-bound search if needed.
    pub fn channels(&self, setup: &WzSetup) -> Result<(Channel, Channel)> {
        match (&self.p_u_given_x, &self.p_y_given_uz) {
            (Some(pu), Some(py)) => Ok((pu.to_channel()?, py.to_channel()?)),
            (None, None) => {
                let opts = WzOptions { seed: self.master_seed, ..Default::default() };
                let res = wz_inner_bound(setup, &opts)?;
                let cand = res.candidate.ok_or(Error::Infeasible(res.residual))?;
                Ok((cand.p_u_given_x, cand.p_y_given_uz))
            }
            _ => Err(Error::InvalidParameter("give both P_U_given_X and P_Y_given_UZ or neither".into())),
        }
    }

    pub fn protocol(&self, setup: &WzSetup, channels: &(Channel, Channel), n: usize) -> Result<ProtocolSetup> {
        let params = SimParams {
            n,
            rate: self.rate,
            rate_bar: self.rate_bar,
            delta: self.delta,
            delta_hat: self.delta_hat,
            eta: self.eta,
        };
        ProtocolSetup::new(setup.clone(), channels.0.clone(), channels.1.clone(), params)
    }
}

pub const CSV_HEADER: &str = "# ratechannel-sim csv v1";
pub const CSV_COLUMNS: &str = "n,R,R_bar,codebook_size,bins,exact_tv,diagnostic_tv,diagnostic_se,distortion_mean,distortion_se,encode_failure_rate,decode_fallback_rate,spmf_failure_rate,spmf_mode";

/// One block length of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub n: usize,
    pub rate: f64,
    pub rate_bar: f64,
    pub codebook_size: usize,
    pub bins: usize,
    pub codebook_seed: u64,
    pub trial_seed: u64,
    /// `None` when the exact evaluation exceeds the budget.
    pub exact_tv: Option<f64>,
    pub diagnostic_tv: f64,
    pub diagnostic_se: f64,
    pub distortion_mean: Option<f64>,
    pub distortion_se: Option<f64>,
    pub infinite_distortion_trials: usize,
    pub encode_failure_rate: f64,
    pub decode_fallback_rate: f64,
    pub spmf_failure_rate: f64,
    pub spmf_mode: String,
}

impl SimRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.rate,
            self.rate_bar,
            self.codebook_size,
            self.bins,
            opt(self.exact_tv),
            self.diagnostic_tv,
            self.diagnostic_se,
            opt(self.distortion_mean),
            opt(self.distortion_se),
            self.encode_failure_rate,
            self.decode_fallback_rate,
            self.spmf_failure_rate,
            self.spmf_mode
        )
    }
}

pub fn spmf_mode_name(m: SpmfMode) -> &'static str {
    match m {
        SpmfMode::CodebookPassed => "codebook_passed",
        SpmfMode::CodebookFailed => "codebook_failed",
        SpmfMode::PerSequence => "per_sequence",
    }
}

/// Runs every block length in the manifest. Codebook and trial seeds are
/// derived from the master seed and `n`.
pub fn run_manifest(m: &SimManifest) -> Result<Vec<SimRow>> {
    let setup = m.setup.to_setup()?;
    let channels = m.channels(&setup)?;
    let spec = m.distortion.as_ref().map(|d| d.to_spec(&setup)).transpose()?;
    let mut rows = Vec::with_capacity(m.n.len());
    for &n in &m.n {
        let proto = m.protocol(&setup, &channels, n)?;
        let codebook_seed = derive_seed(m.master_seed, 2 * n as u64);
        let trial_seed = derive_seed(m.master_seed, 2 * n as u64 + 1);
        let code = Code::draw(&proto, codebook_seed);
        let exact_tv = if m.require_exact || exact_tv_cost(&proto) <= m.exact_tv_budget {
            Some(exact_block_tv(&proto, &code, m.exact_tv_budget)?.tv)
        } else {
            None
        };
        let trials = simulate(&proto, &code, m.trials, trial_seed);
        let diag = single_letter_diagnostic(&trials, &proto)?;
        let dist = spec.as_ref().map(|s| empirical_distortion(&trials, s)).transpose()?;
        let fails = failure_rates(&trials);
        rows.push(SimRow {
            n,
            rate: m.rate,
            rate_bar: m.rate_bar,
            codebook_size: proto.codebook_size(),
            bins: proto.bin_count(),
            codebook_seed,
            trial_seed,
            exact_tv,
            diagnostic_tv: diag.tv,
            diagnostic_se: diag.se,
            distortion_mean: dist.map(|d| d.mean),
            distortion_se: dist.map(|d| d.se),
            infinite_distortion_trials: dist.map_or(0, |d| d.trials_with_infinite),
            encode_failure_rate: fails.encode_failure,
            decode_fallback_rate: fails.decode_fallback,
            spmf_failure_rate: fails.spmf_failure,
            spmf_mode: spmf_mode_name(code.spmf).to_string(),
        });
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[SimRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n{CSV_COLUMNS}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_roundtrip_and_normalize_flag() {
        let p: PmfJson = serde_json::from_str(r#"{"alphabet":["a","b"],"probs":[0.25,0.75]}"#).unwrap();
        assert_eq!(p.to_pmf().unwrap().probs(), &[0.25, 0.75]);
        let q: PmfJson = serde_json::from_str(r#"{"probs":[1,3]}"#).unwrap();
        assert!(q.to_pmf().is_err());
        let q: PmfJson = serde_json::from_str(r#"{"probs":[1,3],"normalize":true}"#).unwrap();
        assert_eq!(q.to_pmf().unwrap().probs(), &[0.25, 0.75]);
        let bad: PmfJson = serde_json::from_str(r#"{"alphabet":["a"],"probs":[0.5,0.5]}"#).unwrap();
        assert!(bad.to_pmf().is_err());
    }

    #[test]
    fn point_accepts_both_forms() {
        let a: PointJson = serde_json::from_str("[0.4, 0.6]").unwrap();
        let b: PointJson = serde_json::from_str(r#"{"x0": [0.4, 0.6]}"#).unwrap();
        assert_eq!(a.into_vec(), b.into_vec());
    }

    #[test]
    fn density_defaults_labels_and_imaginary_part() {
        let d: DensityJson = serde_json::from_str(r#"{"dims":[2],"re":[[0.5,0],[0,0.5]]}"#).unwrap();
        let op = d.to_operator(&["B"]).unwrap();
        assert_eq!(op.layout().labels(), vec!["B"]);
        assert!(d.to_operator(&["R", "B"]).is_err());
    }

    #[test]
    fn system_json_uses_capital_a() {
        let s: SystemJson = serde_json::from_str(r#"{"A":[[1,0]],"b":[0.3]}"#).unwrap();
        assert_eq!(s.to_system().unwrap().beta(), 2);
    }

    #[test]
    fn distortion_json_variants() {
        let m: DistortionJson = serde_json::from_str(r#"{"matrix":[[0,1],[1,0]]}"#).unwrap();
        assert!(matches!(m, DistortionJson::Matrix(_)));
        let c: DistortionJson = serde_json::from_str(r#"{"from_channel":{"c":1,"b":[0,0]}}"#).unwrap();
        assert!(matches!(c, DistortionJson::FromChannel { .. }));
    }
}
