//! Optimal single-letter rates.
//!
//! With the source pinned by the feasibility constraints, mutual information
//! is affine in the reconstruction distribution, so both the classical and
//! the quantum-classical minimizations are linear programs. The
//! rate-distortion side uses Blahut-Arimoto with bisection on the slope.

use crate::error::{Error, Result};
use crate::feasible::{classical_feasibility, hermitian_system, purified_target, quantum_feasibility, QcLabels};
use crate::lp::{lp_solve, LpStatus};
use crate::prob::{entropy, mutual_information, Channel, Pmf};
use crate::quantum::{quantum_cmi, reduced_entropy, CqChannelQ, DensityOperator};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateDiagnostics {
    /// `|objective formula - direct information evaluation|` at the optimizer.
    pub objective_gap: f64,
    /// Simplex pivots.
    pub iterations: usize,
    /// `‖A x - b‖∞` of the optimizer against the unfiltered system.
    pub feasibility_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    /// `None` when the feasibility set is empty.
    pub rate_bits: Option<f64>,
    pub optimizer: Option<Pmf>,
    pub status: LpStatus,
    pub diagnostics: RateDiagnostics,
}

impl RateResult {
    fn without_solution(status: LpStatus, iterations: usize) -> Self {
        RateResult {
            rate_bits: None,
            optimizer: None,
            status,
            diagnostics: RateDiagnostics { iterations, ..Default::default() },
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// `min I(X;Y)` over `P_Y` with `sum_y P_Y(y) W(x|y) = P_X(x)`, where `W`
/// maps reconstructions `Y` to source letters `X`.
pub fn rate_channel_fn(p_x: &Pmf, w: &Channel) -> Result<RateResult> {
    let sys = classical_feasibility(p_x, w)?;
    let gains: Vec<f64> = w.rows().map(|row| entropy_of_row(row)).collect();
    let sol = lp_solve(&gains, &sys);
    if sol.status != LpStatus::Optimal {
        return Ok(RateResult::without_solution(sol.status, sol.iterations));
    }
    let p_y = Pmf::from_solver(&sol.x, 1e-9)?;
    let h_x = entropy(p_x);
    let rate = (h_x - sol.value).clamp(0.0, h_x);
    let direct = mutual_information(&w.joint_with_input(&p_y)?)?;
    Ok(RateResult {
        rate_bits: Some(rate),
        diagnostics: RateDiagnostics {
            objective_gap: (rate - direct).abs(),
            iterations: sol.iterations,
            feasibility_residual: sys.residual_inf(p_y.probs()),
        },
        optimizer: Some(p_y),
        status: LpStatus::Optimal,
    })
}

fn entropy_of_row(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Per-letter coefficients `S(W_x^B) - S(W_x^{RB})` and the constant
/// `S(rho^{RB}) - S(rho^B)` of the affine quantum-classical objective.
fn qc_affine_terms(target: &DensityOperator, w: &CqChannelQ, labels: &QcLabels) -> Result<(Vec<f64>, f64)> {
    let (r, b) = (labels.r.as_str(), labels.b.as_str());
    let coeffs = w
        .states()
        .iter()
        .map(|s| Ok(reduced_entropy(s, &[b])? - reduced_entropy(s, &[r, b])?))
        .collect::<Result<Vec<f64>>>()?;
    let constant = reduced_entropy(target, &[r, b])? - reduced_entropy(target, &[b])?;
    Ok((coeffs, constant))
}

/// `min I(X;R|B)` over `P_X` with `sum_x P_X(x) W_x^{RB} = Tr_A(phi^{RAB})`,
/// `phi` the canonical purification of `rho_AB`.
pub fn qc_rate_fn(rho_ab: &DensityOperator, w: &CqChannelQ, labels: &QcLabels) -> Result<RateResult> {
    let target = purified_target(rho_ab, w, labels)?;
    let sys = quantum_feasibility(rho_ab, w, labels)?;
    let (coeffs, constant) = qc_affine_terms(&target, w, labels)?;
    let neg: Vec<f64> = coeffs.iter().map(|v| -v).collect();
    let sol = lp_solve(&neg, &sys);
    if sol.status != LpStatus::Optimal {
        return Ok(RateResult::without_solution(sol.status, sol.iterations));
    }
    let p_x = Pmf::from_solver(&sol.x, 1e-9)?;
    let affine = constant - sol.value;
    let cmi = quantum_cmi(&p_x, w, &labels.r, &labels.b)?;
    let full = hermitian_system(&target, w)?;
    Ok(RateResult {
        rate_bits: Some(affine.max(0.0)),
        diagnostics: RateDiagnostics {
            objective_gap: (affine - cmi.value).abs().max((affine - cmi.block_value).abs()),
            iterations: sol.iterations,
            feasibility_residual: full.residual_inf(p_x.probs()),
        },
        optimizer: Some(p_x),
        status: LpStatus::Optimal,
    })
}

/// `I(X;R|B)` at a given `P_X`, with its distance from the feasibility set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcEvaluation {
    pub cmi_bits: f64,
    /// `‖A p - b‖∞` of the embedded membership constraints.
    pub membership_residual: f64,
}

pub fn qc_rate_at(rho_ab: &DensityOperator, w: &CqChannelQ, labels: &QcLabels, p_x: &Pmf) -> Result<QcEvaluation> {
    let target = purified_target(rho_ab, w, labels)?;
    let full = hermitian_system(&target, w)?;
    if p_x.len() != w.len() {
        return Err(Error::ShapeMismatch(format!("{} letters for a {}-letter CQ channel", p_x.len(), w.len())));
    }
    Ok(QcEvaluation {
        cmi_bits: quantum_cmi(p_x, w, &labels.r, &labels.b)?.value,
        membership_residual: full.residual_inf(p_x.probs()),
    })
}

/// Distortion matrix `d[x][y]` (entries may be `+inf`) and a target level.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    d: Vec<Vec<f64>>,
    pub level: f64,
}

impl DistortionSpec {
    pub fn new(d: Vec<Vec<f64>>, level: f64) -> Result<Self> {
        let ny = d.first().map(|r| r.len()).unwrap_or(0);
        if d.is_empty() || ny == 0 {
            return Err(Error::ShapeMismatch("distortion matrix is empty".into()));
        }
        for (x, row) in d.iter().enumerate() {
            if row.len() != ny {
                return Err(Error::ShapeMismatch(format!("distortion row {x} has {} entries, expected {ny}", row.len())));
            }
            if row.iter().any(|v| v.is_nan() || *v < 0.0) {
                return Err(Error::InvalidParameter(format!("distortion row {x} has a negative or NaN entry")));
            }
            if row.iter().all(|v| v.is_infinite()) {
                return Err(Error::InvalidParameter(format!("source letter {x} has no finite-distortion reconstruction")));
            }
        }
        if level.is_nan() {
            return Err(Error::InvalidParameter("distortion level is NaN".into()));
        }
        Ok(DistortionSpec { d, level })
    }

    pub fn hamming(k: usize, level: f64) -> Self {
        let d = (0..k).map(|x| (0..k).map(|y| if x == y { 0.0 } else { 1.0 }).collect()).collect();
        DistortionSpec { d, level }
    }

    pub fn with_level(&self, level: f64) -> Self {
        DistortionSpec { d: self.d.clone(), level }
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.d[x][y]
    }

    pub fn n_source(&self) -> usize {
        self.d.len()
    }

    pub fn n_reconstruction(&self) -> usize {
        self.d[0].len()
    }

    /// Number of `+inf` entries.
    pub fn infinite_entries(&self) -> usize {
        self.d.iter().flatten().filter(|v| v.is_infinite()).count()
    }

    /// `sum_x P(x) min_y d(x,y)`.
    pub fn min_distortion(&self, p: &Pmf) -> f64 {
        self.d
            .iter()
            .zip(p.probs())
            .filter(|(_, &px)| px > 0.0)
            .map(|(row, &px)| px * row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// `min_y sum_x P(x) d(x,y)`: the smallest level reachable at rate zero.
    pub fn zero_rate_distortion(&self, p: &Pmf) -> (f64, usize) {
        (0..self.n_reconstruction())
            .map(|y| (expected_column(&self.d, p, y), y))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

fn expected_column(d: &[Vec<f64>], p: &Pmf, y: usize) -> f64 {
    d.iter()
        .zip(p.probs())
        .filter(|(_, &px)| px > 0.0)
        .map(|(row, &px)| px * row[y])
        .sum()
}

/// A point on the rate-distortion curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RdResult {
    pub rate_bits: f64,
    pub level: f64,
    /// `E d(X,Y)` under the returned test channel.
    pub achieved_distortion: f64,
    /// Lagrange slope `s` in bits per distortion unit (`inf` at the minimum level).
    pub slope: f64,
    /// Total Blahut-Arimoto iterations over the whole bisection.
    pub iterations: usize,
    /// Reconstruction marginal of the final test channel.
    pub output: Pmf,
}

const BA_GAP_TOL: f64 = 1e-10;
const BA_MAX_ITERS: usize = 200_000;
const LEVEL_TOL: f64 = 1e-6;

struct SlopePoint {
    rate: f64,
    distortion: f64,
    q: Vec<f64>,
    iterations: usize,
}

/// Blahut-Arimoto at fixed slope. `weights[x][y]` are the unnormalized
/// test-channel factors (`0` marks a forbidden transition).
fn blahut_arimoto(p: &Pmf, d: &[Vec<f64>], weights: &[Vec<f64>]) -> SlopePoint {
    let ny = weights[0].len();
    let support: Vec<usize> = (0..p.len()).filter(|&x| p.get(x) > 0.0).collect();
    let usable: Vec<bool> = (0..ny).map(|y| support.iter().any(|&x| weights[x][y] > 0.0)).collect();
    let n_usable = usable.iter().filter(|&&u| u).count() as f64;
    let mut q: Vec<f64> = usable.iter().map(|&u| if u { 1.0 / n_usable } else { 0.0 }).collect();
    let mut iterations = 0;
    let mut prev_rate = f64::INFINITY;
    let mut z = vec![0.0; p.len()];
    let mut c = vec![0.0; ny];
    loop {
        for &x in &support {
            z[x] = (0..ny).map(|y| q[y] * weights[x][y]).sum();
        }
        for y in 0..ny {
            c[y] = support.iter().map(|&x| p.get(x) * weights[x][y] / z[x]).sum();
        }
        let cmax = c.iter().copied().fold(0.0, f64::max);
        let avg: f64 = (0..ny).filter(|&y| q[y] > 0.0).map(|y| q[y] * c[y].log2()).sum();
        let gap = cmax.log2() - avg;
        let (rate, distortion) = evaluate(p, d, weights, &q, &z, &support);
        iterations += 1;
        if gap < BA_GAP_TOL && (rate - prev_rate).abs() < 1e-9 || iterations >= BA_MAX_ITERS {
            return SlopePoint { rate, distortion, q, iterations };
        }
        prev_rate = rate;
        let mut total = 0.0;
        for y in 0..ny {
            q[y] *= c[y];
            total += q[y];
        }
        q.iter_mut().for_each(|v| *v /= total);
    }
}

fn evaluate(p: &Pmf, d: &[Vec<f64>], weights: &[Vec<f64>], q: &[f64], z: &[f64], support: &[usize]) -> (f64, f64) {
    let mut rate = 0.0;
    let mut dist = 0.0;
    for &x in support {
        for y in 0..q.len() {
            let t = q[y] * weights[x][y] / z[x];
            if t > 0.0 {
                let joint = p.get(x) * t;
                rate += joint * (t / q[y]).log2();
                dist += joint * d[x][y];
            }
        }
    }
    (rate.max(0.0), dist)
}

fn slope_weights(d: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    d.iter()
        .map(|row| {
            let m = row.iter().copied().fold(f64::INFINITY, f64::min);
            row.iter()
                .map(|&v| if v.is_infinite() { 0.0 } else { (-s * (v - m)).exp2() })
                .collect()
        })
        .collect()
}

fn min_level_weights(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    d.iter()
        .map(|row| {
            let m = row.iter().copied().fold(f64::INFINITY, f64::min);
            row.iter()
                .map(|&v| if v <= m + 1e-12 * (1.0 + m.abs()) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Shannon rate-distortion function `R(D)` at `spec.level`.
pub fn blahut_arimoto_rd(p_x: &Pmf, spec: &DistortionSpec) -> Result<RdResult> {
    if spec.n_source() != p_x.len() {
        return Err(Error::ShapeMismatch(format!(
            "distortion matrix has {} source rows, source has {} letters",
            spec.n_source(),
            p_x.len()
        )));
    }
    let d = spec.matrix();
    let level = spec.level;
    let d_min = spec.min_distortion(p_x);
    let (d_max, y0) = spec.zero_rate_distortion(p_x);
    let tol = 1e-9 * (1.0 + d_min.abs());
    if level < d_min - tol {
        return Err(Error::DistortionOutOfRange { level, min: d_min, max: d_max });
    }
    if level >= d_max {
        return Ok(RdResult {
            rate_bits: 0.0,
            level,
            achieved_distortion: d_max,
            slope: 0.0,
            iterations: 0,
            output: Pmf::point_mass(spec.n_reconstruction(), y0),
        });
    }
    if level <= d_min + tol {
        let pt = blahut_arimoto(p_x, d, &min_level_weights(d));
        return Ok(RdResult {
            rate_bits: pt.rate,
            level,
            achieved_distortion: pt.distortion,
            slope: f64::INFINITY,
            iterations: pt.iterations,
            output: Pmf::normalized(pt.q)?,
        });
    }

    let mut iterations = 0;
    let mut run = |s: f64| {
        let pt = blahut_arimoto(p_x, d, &slope_weights(d, s));
        iterations += pt.iterations;
        pt
    };
    // D(s) is non-increasing; s -> 0 approaches the zero-rate level.
    let mut lo = (0.0, SlopePoint { rate: 0.0, distortion: d_max, q: vec![], iterations: 0 });
    let mut s_hi = 50.0;
    let mut hi = run(s_hi);
    while hi.distortion > level && s_hi < 1e6 {
        lo = (s_hi, hi);
        s_hi *= 2.0;
        hi = run(s_hi);
    }
    let mut hi = (s_hi, hi);
    if hi.1.distortion > level {
        // Too close to the minimum level for any finite slope; join the
        // largest-slope point to the minimum-level point.
        let end = blahut_arimoto(p_x, d, &min_level_weights(d));
        let t = (hi.1.distortion - level) / (hi.1.distortion - end.distortion);
        return Ok(RdResult {
            rate_bits: hi.1.rate + t * (end.rate - hi.1.rate),
            level,
            achieved_distortion: level,
            slope: hi.0,
            iterations: iterations + end.iterations,
            output: Pmf::normalized(end.q)?,
        });
    }
    for _ in 0..200 {
        if (hi.1.distortion - level).abs() <= LEVEL_TOL {
            break;
        }
        if hi.0 - lo.0 <= 1e-12 * hi.0 {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let pt = run(mid);
        if pt.distortion > level {
            lo = (mid, pt);
        } else {
            hi = (mid, pt);
        }
    }
    let (s, pt) = hi;
    if (pt.distortion - level).abs() <= LEVEL_TOL || lo.1.q.is_empty() {
        return Ok(RdResult {
            rate_bits: pt.rate,
            level,
            achieved_distortion: pt.distortion,
            slope: s,
            iterations,
            output: Pmf::normalized(pt.q)?,
        });
    }
    // The slope bracket collapsed on a straight segment of R(D); the curve is
    // linear between the two endpoints.
    let (dl, rl) = (lo.1.distortion, lo.1.rate);
    let t = (dl - level) / (dl - pt.distortion);
    Ok(RdResult {
        rate_bits: rl + t * (pt.rate - rl),
        level,
        achieved_distortion: level,
        slope: s,
        iterations,
        output: Pmf::normalized(pt.q)?,
    })
}

/// `d(x,y) = -c log2 W(x|y) + b(x)` with the level `E d` under the
/// rate-channel optimizer. `W(x|y) = 0` gives `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDistortion {
    pub spec: DistortionSpec,
    /// The rate-channel optimizer `P_Y*` the level is computed under.
    pub optimizer: Pmf,
    pub infinite_entries: usize,
}

pub fn distortion_matrix(w: &Channel, c: f64, b: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    if b.len() != w.n_outputs() {
        return Err(Error::ShapeMismatch(format!("b has {} entries, source has {}", b.len(), w.n_outputs())));
    }
    Ok((0..w.n_outputs())
        .map(|x| {
            (0..w.n_inputs())
                .map(|y| {
                    let p = w.get(y, x);
                    if p == 0.0 {
                        f64::INFINITY
                    } else {
                        let v = -c * p.log2() + b[x];
                        // Cancellation in e.g. -c log2(0.9) + c log2(0.9).
                        if v < 0.0 && v > -1e-12 { 0.0 } else { v }
                    }
                })
                .collect()
        })
        .collect())
}

pub fn distortion_from_channel(p_x: &Pmf, w: &Channel, c: f64, b: &[f64]) -> Result<ChannelDistortion> {
    let d = distortion_matrix(w, c, b)?;
    let res = rate_channel_fn(p_x, w)?;
    let p_y = res.optimizer.ok_or(Error::Infeasible(f64::NAN))?;
    let mut level = 0.0;
    for (y, &py) in p_y.probs().iter().enumerate() {
        for x in 0..w.n_outputs() {
            let wxy = w.get(y, x);
            if py > 0.0 && wxy > 0.0 {
                level += py * wxy * d[x][y];
            }
        }
    }
    let spec = DistortionSpec::new(d, level)?;
    let infinite_entries = spec.infinite_entries();
    Ok(ChannelDistortion { spec, optimizer: p_y, infinite_entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeReport {
    pub level: f64,
    pub rd_rate: f64,
    pub rate_channel_rate: f64,
    pub difference: f64,
    pub equal: bool,
}

pub const BRIDGE_TOL: f64 = 1e-4;

/// Compares `R(D)` for the induced distortion with the rate-channel rate.
pub fn bridge_check(p_x: &Pmf, w: &Channel, c: f64, b: &[f64]) -> Result<BridgeReport> {
    let rc = rate_channel_fn(p_x, w)?;
    let rate_channel_rate = rc.rate_bits.ok_or(Error::Infeasible(f64::NAN))?;
    let cd = distortion_from_channel(p_x, w, c, b)?;
    let rd = blahut_arimoto_rd(p_x, &cd.spec)?;
    let difference = (rd.rate_bits - rate_channel_rate).abs();
    Ok(BridgeReport {
        level: cd.spec.level,
        rd_rate: rd.rate_bits,
        rate_channel_rate,
        difference,
        equal: difference <= BRIDGE_TOL,
    })
}
