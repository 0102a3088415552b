//! Finite-blocklength simulation of the side-information random-coding
//! protocol: pruned codebook, likelihood encoder, binning and a
//! joint-typicality decoder. `|Z| = 1` gives the protocol without side
//! information.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prob::{Channel, JointPmf, Pmf};
use crate::rate::DistortionSpec;
use crate::typical::{is_jointly_typical, is_typical, PrunedProduct, TypicalityParams};
use crate::wz::WzSetup;

/// Default budget for [`exact_block_tv`], in elementary evaluations.
pub const DEFAULT_TV_BUDGET: f64 = (1u64 << 28) as f64;
/// Largest `|X|^n` for which the sub-PMF condition is checked over every
/// source sequence when the code is built.
pub const SPMF_EXHAUSTIVE_LIMIT: usize = 1 << 16;
const MAX_CODEBOOK: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub n: usize,
    /// Transmitted rate `R` in bits per symbol.
    pub rate: f64,
    /// Codebook rate `R̄`.
    pub rate_bar: f64,
    /// Slack for codewords and the decoder's joint typicality tests.
    pub delta: f64,
    /// Slack for the encoder's source typicality test.
    pub delta_hat: f64,
    pub eta: f64,
}

/// `ceil(2^{n r})`, ignoring floating-point spill just above an integer.
pub fn block_count(n: usize, r: f64) -> f64 {
    let v = (n as f64 * r).exp2();
    (v - 1e-9 * v.max(1.0)).ceil().max(1.0)
}

#[derive(Debug, Clone)]
pub struct ProtocolSetup {
    wz: WzSetup,
    p_u_given_x: Channel,
    p_y_given_uz: Channel,
    params: SimParams,
    p_x: Pmf,
    p_u: Pmf,
    p_ux: JointPmf,
    p_uz: JointPmf,
    pruned_u: PrunedProduct,
    codebook_size: usize,
    bin_count: usize,
    fallback: Vec<usize>,
    // ln(P(u,x) / (P(u) P(x))), indexed [u][x].
    log_ratio: Vec<Vec<f64>>,
}

impl ProtocolSetup {
    pub fn new(wz: WzSetup, p_u_given_x: Channel, p_y_given_uz: Channel, params: SimParams) -> Result<Self> {
        let (nx, ny, nz) = (wz.n_x(), wz.n_y(), wz.n_z());
        if p_u_given_x.n_inputs() != nx {
            return Err(Error::ShapeMismatch(format!("P_U|X has {} inputs, |X| = {nx}", p_u_given_x.n_inputs())));
        }
        let nu = p_u_given_x.n_outputs();
        if p_y_given_uz.n_inputs() != nu * nz || p_y_given_uz.n_outputs() != ny {
            return Err(Error::ShapeMismatch(format!(
                "P_Y|UZ must map {nu}x{nz} inputs to {ny} outputs, got {} -> {}",
                p_y_given_uz.n_inputs(),
                p_y_given_uz.n_outputs()
            )));
        }
        let SimParams { n, rate, rate_bar, delta, delta_hat, eta } = params;
        if !(rate >= 0.0 && rate_bar >= rate && rate_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!("need 0 <= R <= R_bar, got R = {rate}, R_bar = {rate_bar}")));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
        }
        let typ = TypicalityParams::new(n, delta)?;
        TypicalityParams::new(n, delta_hat)?;
        let l = block_count(n, rate_bar);
        let m = block_count(n, rate);
        if l > MAX_CODEBOOK as f64 {
            return Err(Error::BudgetExceeded { needed: l, budget: MAX_CODEBOOK as f64 });
        }
        let p_x = wz.p_x();
        let mut ux = vec![0.0; nu * nx];
        for x in 0..nx {
            for u in 0..nu {
                ux[u * nx + x] = p_x.get(x) * p_u_given_x.get(x, u);
            }
        }
        let p_ux = JointPmf::from_raw(vec![nu, nx], ux);
        let p_u = p_ux.marginal(&[0])?.to_pmf();
        let mut uz = vec![0.0; nu * nz];
        for x in 0..nx {
            for z in 0..nz {
                let pxz = wz.p_xz().get(&[x, z]);
                for u in 0..nu {
                    uz[u * nz + z] += pxz * p_u_given_x.get(x, u);
                }
            }
        }
        let p_uz = JointPmf::from_raw(vec![nu, nz], uz);
        let pruned_u = PrunedProduct::new(&p_u, typ)?;
        let fallback = vec![0; n];
        if is_typical(&fallback, &p_u, &typ) {
            return Err(Error::TypicalFallback(delta));
        }
        let log_ratio = (0..nu)
            .map(|u| {
                (0..nx)
                    .map(|x| {
                        let j = p_ux.get(&[u, x]);
                        if j > 0.0 {
                            (j / (p_u.get(u) * p_x.get(x))).ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ProtocolSetup {
            wz,
            p_u_given_x,
            p_y_given_uz,
            params,
            p_x,
            p_u,
            p_ux,
            p_uz,
            pruned_u,
            codebook_size: l as usize,
            bin_count: m as usize,
            fallback,
            log_ratio,
        })
    }

    pub fn wz(&self) -> &WzSetup {
        &self.wz
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn p_u_given_x(&self) -> &Channel {
        &self.p_u_given_x
    }

    pub fn p_y_given_uz(&self) -> &Channel {
        &self.p_y_given_uz
    }

    pub fn p_u(&self) -> &Pmf {
        &self.p_u
    }

    pub fn p_x(&self) -> &Pmf {
        &self.p_x
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    /// The constant sequence `u0` emitted on decoding failure.
    pub fn fallback(&self) -> &[usize] {
        &self.fallback
    }

    /// `eps`: i.i.d. mass of `P_U^n` outside the typical set.
    pub fn epsilon(&self) -> f64 {
        self.pruned_u.epsilon()
    }

    fn typ(&self) -> TypicalityParams {
        TypicalityParams { n: self.params.n, delta: self.params.delta }
    }

    fn typ_hat(&self) -> TypicalityParams {
        TypicalityParams { n: self.params.n, delta: self.params.delta_hat }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub entries: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Codewords `U^n(1..=L)` drawn i.i.d. from the pruned product of `P_U`.
pub fn build_codebook(setup: &ProtocolSetup, seed: u64) -> Codebook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..setup.codebook_size).map(|_| setup.pruned_u.sample(&mut rng)).collect();
    Codebook { entries, seed }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinningMap {
    /// Bin of codeword `l` (1-based index `l` stored at `table[l - 1]`), in `1..=bins`.
    pub table: Vec<usize>,
    pub bins: usize,
    pub seed: u64,
    /// True when every codeword has its own bin (`bins >= L`).
    pub identity: bool,
    members: Vec<Vec<usize>>,
}

impl BinningMap {
    fn new(table: Vec<usize>, bins: usize, seed: u64, identity: bool) -> Self {
        let mut members = vec![Vec::new(); bins + 1];
        for (i, &m) in table.iter().enumerate() {
            members[m].push(i + 1);
        }
        BinningMap { table, bins, seed, identity, members }
    }

    /// `B(l)`, with the failure index mapped to the failure message.
    pub fn bin_of(&self, l: usize) -> usize {
        if l == 0 {
            0
        } else {
            self.table[l - 1]
        }
    }

    /// Codeword indices in bin `m`.
    pub fn members(&self, m: usize) -> &[usize] {
        if m == 0 || m > self.bins {
            &[]
        } else {
            &self.members[m]
        }
    }
}

/// Uniform random bin per codeword. When there are at least as many bins as
/// codewords the identity assignment is used, so no two codewords collide.
pub fn build_binning(setup: &ProtocolSetup, seed: u64) -> BinningMap {
    let (l, m) = (setup.codebook_size, setup.bin_count);
    if m >= l {
        return BinningMap::new((1..=l).collect(), m, seed, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = (0..l).map(|_| rng.gen_range(1..=m)).collect();
    BinningMap::new(table, m, seed, false)
}

/// Encoder output for one source sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPmf {
    /// Masses on `l = 0..=L`; index 0 is the failure index.
    pub masses: Vec<f64>,
    /// Total candidate mass before failure handling.
    pub raw_total: f64,
    pub typical: bool,
    /// Candidate masses exceeded one, so everything went to `l = 0`.
    pub spmf_failure: bool,
}

/// Likelihood encoder for one `x^n`: a typical `x^n` puts mass
/// `(1/L) (1-eps)/(1+eta) P^n(x|U(l)) / P^n(x)` on each `l` whose codeword is
/// jointly typical with it; the rest goes to `l = 0`.
pub fn encoder_pmf(x: &[usize], codebook: &Codebook, setup: &ProtocolSetup) -> EncoderPmf {
    let l = codebook.entries.len();
    let mut masses = vec![0.0; l + 1];
    if !is_typical(x, &setup.p_x, &setup.typ_hat()) {
        masses[0] = 1.0;
        return EncoderPmf { masses, raw_total: 0.0, typical: false, spmf_failure: false };
    }
    let typ = setup.typ();
    let log_scale = ((1.0 - setup.epsilon()) / ((1.0 + setup.params.eta) * l as f64)).ln();
    let mut total = 0.0;
    for (k, u) in codebook.entries.iter().enumerate() {
        if !is_jointly_typical(u, x, &setup.p_ux, &typ) {
            continue;
        }
        let lr: f64 = u.iter().zip(x).map(|(&ui, &xi)| setup.log_ratio[ui][xi]).sum();
        let mass = (log_scale + lr).exp();
        masses[k + 1] = mass;
        total += mass;
    }
    if total > 1.0 + 1e-12 {
        masses.iter_mut().for_each(|v| *v = 0.0);
        masses[0] = 1.0;
        return EncoderPmf { masses, raw_total: total, typical: true, spmf_failure: true };
    }
    masses[0] = (1.0 - total).max(0.0);
    EncoderPmf { masses, raw_total: total, typical: true, spmf_failure: false }
}

/// How the sub-PMF condition is enforced for a code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpmfMode {
    /// Checked over all source sequences; the condition held.
    CodebookPassed,
    /// Checked over all source sequences; it failed somewhere, so the
    /// encoder always outputs `l = 0`.
    CodebookFailed,
    /// Too many sequences to check; failures are detected per `x^n`.
    PerSequence,
}

/// A drawn codebook with its binning and sub-PMF verdict.
#[derive(Debug, Clone)]
pub struct Code {
    pub codebook: Codebook,
    pub binning: BinningMap,
    pub spmf: SpmfMode,
}

impl Code {
    pub fn new(setup: &ProtocolSetup, codebook: Codebook, binning: BinningMap) -> Self {
        let spmf = spmf_verdict(setup, &codebook);
        Code { codebook, binning, spmf }
    }

    /// Codebook from `seed`, binning from a seed derived from it.
    pub fn draw(setup: &ProtocolSetup, seed: u64) -> Self {
        let codebook = build_codebook(setup, seed);
        let binning = build_binning(setup, derive_seed(seed, u64::MAX));
        Code::new(setup, codebook, binning)
    }

    /// Encoder after applying the code-level sub-PMF verdict.
    pub fn encode(&self, x: &[usize], setup: &ProtocolSetup) -> EncoderPmf {
        if self.spmf == SpmfMode::CodebookFailed {
            let mut masses = vec![0.0; self.codebook.entries.len() + 1];
            masses[0] = 1.0;
            let typical = is_typical(x, &setup.p_x, &setup.typ_hat());
            return EncoderPmf { masses, raw_total: f64::NAN, typical, spmf_failure: true };
        }
        encoder_pmf(x, &self.codebook, setup)
    }
}

fn spmf_verdict(setup: &ProtocolSetup, codebook: &Codebook) -> SpmfMode {
    let nx = setup.wz.n_x();
    let Some(count) = checked_pow(nx, setup.n()).filter(|&c| c <= SPMF_EXHAUSTIVE_LIMIT) else {
        return SpmfMode::PerSequence;
    };
    for idx in 0..count {
        let x = unravel(idx, nx, setup.n());
        if encoder_pmf(&x, codebook, setup).spmf_failure {
            return SpmfMode::CodebookFailed;
        }
    }
    SpmfMode::CodebookPassed
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

fn unravel(mut idx: usize, k: usize, n: usize) -> Vec<usize> {
    let mut s = vec![0; n];
    for i in (0..n).rev() {
        s[i] = idx % k;
        idx /= k;
    }
    s
}

/// Decoder output and whether the fallback was used.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub u: Vec<usize>,
    pub fallback: bool,
}

/// Returns `U^n(l)` when `l` is the unique codeword in bin `m` jointly
/// typical with `z^n`; otherwise the fallback `u0`. `m = 0` always falls back.
pub fn decode(m: usize, z: &[usize], codebook: &Codebook, binning: &BinningMap, setup: &ProtocolSetup) -> Decoded {
    let typ = setup.typ();
    let mut found: Option<usize> = None;
    for &l in binning.members(m) {
        if is_jointly_typical(&codebook.entries[l - 1], z, &setup.p_uz, &typ) {
            if found.is_some() {
                return Decoded { u: setup.fallback.clone(), fallback: true };
            }
            found = Some(l);
        }
    }
    match found {
        Some(l) => Decoded { u: codebook.entries[l - 1].clone(), fallback: false },
        None => Decoded { u: setup.fallback.clone(), fallback: true },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub x: Vec<usize>,
    pub z: Vec<usize>,
    pub l: usize,
    pub m: usize,
    pub u: Vec<usize>,
    pub y: Vec<usize>,
    pub encode_failure: bool,
    pub decode_fallback: bool,
    pub spmf_failure: bool,
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut t = rng.gen::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if t < p {
            return i;
        }
        t -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// SplitMix64 finalizer over `(master, index)`: independent per-trial seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One realization: source and side information, encoder, binning, decoder
/// and the per-letter reconstruction `y_i ~ P_{Y|UZ}(.|u_i, z_i)`.
pub fn run_trial(setup: &ProtocolSetup, code: &Code, seed: u64) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = setup.n();
    let nz = setup.wz.n_z();
    let table = setup.wz.p_xz().table();
    let (mut x, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let k = sample_index(table, &mut rng);
        x.push(k / nz);
        z.push(k % nz);
    }
    let enc = code.encode(&x, setup);
    let l = sample_index(&enc.masses, &mut rng);
    let m = code.binning.bin_of(l);
    let dec = decode(m, &z, &code.codebook, &code.binning, setup);
    let y = dec
        .u
        .iter()
        .zip(&z)
        .map(|(&u, &zi)| sample_index(setup.p_y_given_uz.row(u * nz + zi), &mut rng))
        .collect();
    TrialRecord {
        x,
        z,
        l,
        m,
        u: dec.u,
        y,
        encode_failure: l == 0,
        decode_fallback: dec.fallback,
        spmf_failure: enc.spmf_failure,
    }
}

/// `trials` independent runs with seeds derived from `master_seed`.
pub fn simulate(setup: &ProtocolSetup, code: &Code, trials: usize, master_seed: u64) -> Vec<TrialRecord> {
    (0..trials as u64).map(|k| run_trial(setup, code, derive_seed(master_seed, k))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactTv {
    pub tv: f64,
    /// Total mass of the induced joint (should be 1).
    pub induced_mass: f64,
    /// Probability that the encoder outputs `l = 0`.
    pub encode_failure: f64,
}

/// `|X|^n |Y|^n |Z|^n 2^{n R̄}`, the work estimate gating [`exact_block_tv`].
pub fn exact_tv_cost(setup: &ProtocolSetup) -> f64 {
    let n = setup.n() as i32;
    let (nx, ny, nz) = (setup.wz.n_x() as f64, setup.wz.n_y() as f64, setup.wz.n_z() as f64);
    nx.powi(n) * ny.powi(n) * nz.powi(n) * setup.codebook_size as f64
}

/// Exact `‖P_{X^n Y^n Z^n} - P_{Y^n Z^n} W^n‖_TV` for a fixed code, where the
/// first distribution is induced by the protocol and the second pairs its
/// `(Y^n, Z^n)` marginal with the product posterior.
pub fn exact_block_tv(setup: &ProtocolSetup, code: &Code, budget: f64) -> Result<ExactTv> {
    let needed = exact_tv_cost(setup);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let n = setup.n();
    let (nx, ny, nz) = (setup.wz.n_x(), setup.wz.n_y(), setup.wz.n_z());
    let xs: Vec<Vec<usize>> = (0..nx.pow(n as u32)).map(|i| unravel(i, nx, n)).collect();
    let ys: Vec<Vec<usize>> = (0..ny.pow(n as u32)).map(|i| unravel(i, ny, n)).collect();
    let zs: Vec<Vec<usize>> = (0..nz.pow(n as u32)).map(|i| unravel(i, nz, n)).collect();
    let bins = code.binning.bins;

    // Message distribution B(m | x^n) for every source sequence.
    let mut encode_failure = 0.0;
    let p_x = setup.p_x.probs();
    let msg: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let enc = code.encode(x, setup);
            let px: f64 = x.iter().map(|&a| p_x[a]).product();
            encode_failure += px * enc.masses[0];
            let mut b = vec![0.0; bins + 1];
            for (l, &mass) in enc.masses.iter().enumerate() {
                if mass > 0.0 {
                    b[code.binning.bin_of(l)] += mass;
                }
            }
            b
        })
        .collect();

    let pxz = setup.wz.p_xz();
    let k = &setup.p_y_given_uz;
    let mut tv = 0.0;
    let mut induced_mass = 0.0;
    let mut joint = vec![0.0; xs.len() * ys.len()];
    for z in &zs {
        // Messages that decode to the same sequence induce the same Y^n law.
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for m in 0..=bins {
            groups.entry(decode(m, z, &code.codebook, &code.binning, setup).u).or_default().push(m);
        }
        let group_y: Vec<Vec<f64>> = groups
            .keys()
            .map(|u| {
                ys.iter()
                    .map(|y| (0..n).map(|i| k.get(u[i] * nz + z[i], y[i])).product())
                    .collect()
            })
            .collect();
        joint.iter_mut().for_each(|v| *v = 0.0);
        for (xi, x) in xs.iter().enumerate() {
            let p: f64 = (0..n).map(|i| pxz.get(&[x[i], z[i]])).product();
            if p == 0.0 {
                continue;
            }
            for (g, members) in groups.values().enumerate() {
                let w: f64 = members.iter().map(|&m| msg[xi][m]).sum();
                if w == 0.0 {
                    continue;
                }
                let row = &mut joint[xi * ys.len()..(xi + 1) * ys.len()];
                for (v, &py) in row.iter_mut().zip(&group_y[g]) {
                    *v += p * w * py;
                }
            }
        }
        for (yi, y) in ys.iter().enumerate() {
            let pyz: f64 = (0..xs.len()).map(|xi| joint[xi * ys.len() + yi]).sum();
            induced_mass += pyz;
            for (xi, x) in xs.iter().enumerate() {
                let wn: f64 = (0..n).map(|i| setup.wz.posterior(x[i], y[i], z[i])).product();
                tv += (joint[xi * ys.len() + yi] - pyz * wn).abs();
            }
        }
    }
    Ok(ExactTv { tv: (0.5 * tv).clamp(0.0, 1.0), induced_mass, encode_failure })
}

/// Averaged single-letter TV estimate with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticTv {
    pub tv: f64,
    pub se: f64,
    pub trials: usize,
}

/// `‖P̂_{X_Q Y_Q Z_Q} - P̂_{Y_Q Z_Q} W‖_TV` from the per-letter empirical
/// joint pooled over letters and trials.
pub fn single_letter_diagnostic(trials: &[TrialRecord], setup: &ProtocolSetup) -> Result<DiagnosticTv> {
    if trials.is_empty() {
        return Err(Error::InvalidParameter("diagnostic needs at least one trial".into()));
    }
    let (nx, ny, nz) = (setup.wz.n_x(), setup.wz.n_y(), setup.wz.n_z());
    let cell = |x: usize, y: usize, z: usize| (x * ny + y) * nz + z;
    let size = nx * ny * nz;
    let n = setup.n() as f64;
    let t = trials.len() as f64;
    let per_trial: Vec<Vec<f64>> = trials
        .iter()
        .map(|tr| {
            let mut s = vec![0.0; size];
            for i in 0..tr.x.len() {
                s[cell(tr.x[i], tr.y[i], tr.z[i])] += 1.0 / n;
            }
            s
        })
        .collect();
    let mut p = vec![0.0; size];
    for s in &per_trial {
        for (a, b) in p.iter_mut().zip(s) {
            *a += b / t;
        }
    }
    let mut tv = 0.0;
    let mut grad = vec![0.0; size];
    for y in 0..ny {
        for z in 0..nz {
            let pyz: f64 = (0..nx).map(|x| p[cell(x, y, z)]).sum();
            let signs: Vec<f64> = (0..nx)
                .map(|x| {
                    let d = p[cell(x, y, z)] - pyz * setup.wz.posterior(x, y, z);
                    tv += d.abs();
                    if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let avg: f64 = (0..nx).map(|x| signs[x] * setup.wz.posterior(x, y, z)).sum();
            for x in 0..nx {
                grad[cell(x, y, z)] = 0.5 * (signs[x] - avg);
            }
        }
    }
    let lin: Vec<f64> = per_trial.iter().map(|s| s.iter().zip(&grad).map(|(a, b)| a * b).sum()).collect();
    let mean = lin.iter().sum::<f64>() / t;
    let var = if trials.len() > 1 { lin.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0) } else { 0.0 };
    Ok(DiagnosticTv { tv: 0.5 * tv, se: (var / t).sqrt(), trials: trials.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionStats {
    /// Mean of the per-trial average distortion over trials with only finite pairs.
    pub mean: f64,
    pub se: f64,
    pub trials_used: usize,
    /// Trials excluded because some letter pair had infinite distortion.
    pub trials_with_infinite: usize,
    pub infinite_pairs: usize,
}

pub fn empirical_distortion(trials: &[TrialRecord], spec: &DistortionSpec) -> Result<DistortionStats> {
    let mut values = Vec::with_capacity(trials.len());
    let mut infinite_pairs = 0;
    let mut trials_with_infinite = 0;
    for tr in trials {
        let mut total = 0.0;
        let mut inf = 0;
        for (&x, &y) in tr.x.iter().zip(&tr.y) {
            if x >= spec.n_source() || y >= spec.n_reconstruction() {
                return Err(Error::ShapeMismatch(format!("pair ({x}, {y}) outside the distortion matrix")));
            }
            let d = spec.get(x, y);
            if d.is_infinite() {
                inf += 1;
            } else {
                total += d;
            }
        }
        if inf > 0 {
            infinite_pairs += inf;
            trials_with_infinite += 1;
        } else if !tr.x.is_empty() {
            values.push(total / tr.x.len() as f64);
        }
    }
    let k = values.len() as f64;
    let mean = if values.is_empty() { f64::NAN } else { values.iter().sum::<f64>() / k };
    let se = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        f64::NAN
    };
    Ok(DistortionStats { mean, se, trials_used: values.len(), trials_with_infinite, infinite_pairs })
}

/// Fractions of trials with each failure flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureRates {
    pub encode_failure: f64,
    pub decode_fallback: f64,
    pub spmf_failure: f64,
}

pub fn failure_rates(trials: &[TrialRecord]) -> FailureRates {
    let t = trials.len().max(1) as f64;
    let frac = |f: fn(&TrialRecord) -> bool| trials.iter().filter(|r| f(r)).count() as f64 / t;
    FailureRates {
        encode_failure: frac(|r| r.encode_failure),
        decode_fallback: frac(|r| r.decode_fallback),
        spmf_failure: frac(|r| r.spmf_failure),
    }
}
