//! Rate with decoder side information: `min I(X;U) - I(U;Z)` over auxiliary
//! channels `P_{U|X}`, `P_{Y|UZ}` whose induced joint has posterior
//! `P_{X|YZ} = W` and satisfies `X - (Y,Z) - U`.
//!
//! Channel index conventions: `W` has inputs `(y, z)` flattened as
//! `y * |Z| + z`; `P_{Y|UZ}` has inputs `u * |Z| + z`. The induced joint has
//! axes `(U, X, Y, Z)`.
//!
//! Search strategy. Write `q_u = P_{X|U=u}`. The induced `P_{X|U=u,Z=z}` is
//! proportional to `q_u(x) P(z|x)`, and a candidate is feasible exactly when,
//! for every `(u, z)` with mass, this posterior equals `W(.|y, z)` for every
//! `y` the decoder may emit. Fixing a label `y_z` per `z` turns this into a
//! polytope of admissible `q_u`. The objective depends on `P_{U|X}` only:
//! `H(X) - H(Z) + sum_u P(u) [H(q_u P_{Z|X}) - H(q_u)]`. So the search
//! collects points from every label polytope, solves a linear program for the
//! best mixture reproducing `P_X`, and refines around the points it uses.
//! The result is an upper bound on the true minimum.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feasible::LinearFeasibility;
use crate::lp::{lp_solve, LpStatus};
use crate::prob::{entropy, mutual_information_between, Channel, JointPmf, Pmf};

/// Residual at or below which a candidate counts as feasible.
pub const FEASIBLE_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct WzSetup {
    p_xz: JointPmf,
    n_y: usize,
    w: Channel,
    u_size: usize,
}

impl WzSetup {
    /// `u_size = None` picks `|X| |Z| + 2`.
    pub fn new(p_xz: JointPmf, n_y: usize, w: Channel, u_size: Option<usize>) -> Result<Self> {
        let axes = p_xz.axes();
        if axes.len() != 2 {
            return Err(Error::ShapeMismatch(format!("P_XZ must have 2 axes, has {}", axes.len())));
        }
        let (nx, nz) = (axes[0], axes[1]);
        if n_y == 0 {
            return Err(Error::ShapeMismatch("reconstruction alphabet is empty".into()));
        }
        if w.n_inputs() != n_y * nz || w.n_outputs() != nx {
            return Err(Error::ShapeMismatch(format!(
                "W must map {}x{} (y,z) pairs to {} letters, got {} -> {}",
                n_y,
                nz,
                nx,
                w.n_inputs(),
                w.n_outputs()
            )));
        }
        let u_size = u_size.unwrap_or(nx * nz + 2);
        if u_size == 0 {
            return Err(Error::InvalidParameter("U_size must be at least 1".into()));
        }
        Ok(WzSetup { p_xz, n_y, w, u_size })
    }

    pub fn p_xz(&self) -> &JointPmf {
        &self.p_xz
    }

    pub fn w(&self) -> &Channel {
        &self.w
    }

    pub fn n_x(&self) -> usize {
        self.p_xz.axes()[0]
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_z(&self) -> usize {
        self.p_xz.axes()[1]
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn with_u_size(&self, u_size: usize) -> Result<Self> {
        WzSetup::new(self.p_xz.clone(), self.n_y, self.w.clone(), Some(u_size))
    }

    pub fn p_x(&self) -> Pmf {
        self.p_xz.marginal(&[0]).expect("axis 0 exists").to_pmf()
    }

    pub fn p_z(&self) -> Pmf {
        self.p_xz.marginal(&[1]).expect("axis 1 exists").to_pmf()
    }

    /// `W(x | y, z)`.
    pub fn posterior(&self, x: usize, y: usize, z: usize) -> f64 {
        self.w.get(y * self.n_z() + z, x)
    }

    /// The no-side-information setup `|Z| = 1` for a rate channel `W: Y -> X`.
    pub fn without_side_information(p_x: &Pmf, w: &Channel, u_size: Option<usize>) -> Result<Self> {
        let p_xz = JointPmf::new(vec![p_x.len(), 1], p_x.probs().to_vec())?;
        WzSetup::new(p_xz, w.n_inputs(), w.clone(), u_size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WzCandidate {
    pub p_u_given_x: Channel,
    pub p_y_given_uz: Channel,
    pub induced: JointPmf,
    pub objective_bits: f64,
    pub residual: f64,
}

impl WzCandidate {
    pub fn new(setup: &WzSetup, p_u_given_x: Channel, p_y_given_uz: Channel) -> Result<Self> {
        let induced = induced_joint(setup, &p_u_given_x, &p_y_given_uz)?;
        let objective_bits = objective_of_joint(&induced)?;
        let residual = residual_of_joint(setup, &induced);
        Ok(WzCandidate { p_u_given_x, p_y_given_uz, induced, objective_bits, residual })
    }

    pub fn n_u(&self) -> usize {
        self.p_u_given_x.n_outputs()
    }
}

/// `P(u,x,y,z) = P_XZ(x,z) P_{U|X}(u|x) P_{Y|UZ}(y|u,z)` on axes `(U,X,Y,Z)`.
pub fn induced_joint(setup: &WzSetup, p_u_given_x: &Channel, p_y_given_uz: &Channel) -> Result<JointPmf> {
    let (nx, ny, nz) = (setup.n_x(), setup.n_y(), setup.n_z());
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
    let mut table = vec![0.0; nu * nx * ny * nz];
    for u in 0..nu {
        for x in 0..nx {
            let pux = p_u_given_x.get(x, u);
            for y in 0..ny {
                for z in 0..nz {
                    table[((u * nx + x) * ny + y) * nz + z] =
                        setup.p_xz.get(&[x, z]) * pux * p_y_given_uz.get(u * nz + z, y);
                }
            }
        }
    }
    JointPmf::new(vec![nu, nx, ny, nz], table)
}

fn objective_of_joint(j: &JointPmf) -> Result<f64> {
    Ok(mutual_information_between(j, &[1], &[0])? - mutual_information_between(j, &[0], &[3])?)
}

fn residual_of_joint(setup: &WzSetup, j: &JointPmf) -> f64 {
    let a = j.axes();
    let (nu, nx, ny, nz) = (a[0], a[1], a[2], a[3]);
    let t = j.table();
    let idx = |u: usize, x: usize, y: usize, z: usize| ((u * nx + x) * ny + y) * nz + z;
    let mut posterior_term = 0.0;
    let mut chain_term = 0.0;
    for y in 0..ny {
        for z in 0..nz {
            let pxyz: Vec<f64> = (0..nx).map(|x| (0..nu).map(|u| t[idx(u, x, y, z)]).sum()).collect();
            let pyz: f64 = pxyz.iter().sum();
            if pyz <= 0.0 {
                continue;
            }
            for x in 0..nx {
                posterior_term += (pxyz[x] - pyz * setup.posterior(x, y, z)).abs();
            }
            for u in 0..nu {
                let puyz: f64 = (0..nx).map(|x| t[idx(u, x, y, z)]).sum();
                for x in 0..nx {
                    chain_term += (t[idx(u, x, y, z)] - puyz * pxyz[x] / pyz).abs();
                }
            }
        }
    }
    posterior_term + chain_term
}

/// `sum_{y,z} P(y,z) ‖P_{X|y,z} - W(.|y,z)‖₁ + sum_{y,z} P(y,z) sum_{x,u}
/// |P(u,x|y,z) - P(u|y,z) P(x|y,z)|`; zero-mass `(y,z)` cells are skipped.
pub fn posterior_residual(setup: &WzSetup, cand: &WzCandidate) -> f64 {
    residual_of_joint(setup, &cand.induced)
}

/// `I(X;U) - I(U;Z)` of the induced joint (may be negative off the feasible set).
pub fn wz_objective(cand: &WzCandidate) -> f64 {
    cand.objective_bits
}

#[derive(Debug, Clone, PartialEq)]
pub struct WzOptions {
    /// Random search directions per label polytope and points per refinement round.
    pub restarts: usize,
    pub seed: u64,
    /// Label tuples beyond this count are sampled rather than enumerated.
    pub max_label_tuples: usize,
    pub refine_rounds: usize,
}

impl Default for WzOptions {
    fn default() -> Self {
        WzOptions { restarts: 64, seed: 0, max_label_tuples: 4096, refine_rounds: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WzResult {
    /// Best feasible rate, clamped at 0; `None` when nothing feasible was found.
    pub rate_bits: Option<f64>,
    pub candidate: Option<WzCandidate>,
    pub residual: f64,
    pub label_tuples: usize,
    pub nonempty_polytopes: usize,
    pub pool_size: usize,
}

impl WzResult {
    pub fn feasible(&self) -> bool {
        self.rate_bits.is_some()
    }
}

/// Admissible `P_{X|U=u}` for a fixed label tuple, in scaled coordinates
/// `(q, c) / 2` so the unknowns live on the simplex.
struct LabelPolytope {
    labels: Vec<usize>,
    vertices: Vec<Vec<f64>>,
}

fn label_system(setup: &WzSetup, labels: &[usize], p_x: &Pmf, pz_given_x: &[Vec<f64>]) -> Result<LinearFeasibility> {
    let (nx, nz) = (setup.n_x(), setup.n_z());
    let dim = nx + nz;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for z in 0..nz {
        for x in 0..nx {
            let mut r = vec![0.0; dim];
            r[x] = pz_given_x[x][z];
            r[nx + z] = -setup.posterior(x, labels[z], z);
            rows.push(r);
            rhs.push(0.0);
        }
    }
    for x in 0..nx {
        if p_x.get(x) == 0.0 {
            let mut r = vec![0.0; dim];
            r[x] = 1.0;
            rows.push(r);
            rhs.push(0.0);
        }
    }
    let mut half = vec![0.0; dim];
    half[..nx].fill(1.0);
    rows.push(half);
    rhs.push(0.5);
    LinearFeasibility::new(rows, rhs)
}

fn explore_polytope(
    setup: &WzSetup,
    labels: Vec<usize>,
    p_x: &Pmf,
    pz_given_x: &[Vec<f64>],
    directions: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<LabelPolytope>> {
    let sys = label_system(setup, &labels, p_x, pz_given_x)?;
    let nx = setup.n_x();
    let dim = sys.beta();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut push = |x: &[f64]| {
        let q: Vec<f64> = x[..nx].iter().map(|v| (2.0 * v).max(0.0)).collect();
        let s: f64 = q.iter().sum();
        let q: Vec<f64> = q.into_iter().map(|v| v / s).collect();
        if !vertices.iter().any(|v| v.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12)) {
            vertices.push(q);
        }
    };
    for k in 0..directions.max(2 * nx) {
        let c: Vec<f64> = if k < 2 * nx {
            // Coordinate directions first.
            (0..dim).map(|j| if j == k / 2 { if k % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 }).collect()
        } else {
            (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let sol = lp_solve(&c, &sys);
        match sol.status {
            LpStatus::Optimal => push(&sol.x),
            LpStatus::Infeasible => return Ok(None),
            _ => {}
        }
    }
    Ok(Some(LabelPolytope { labels, vertices }))
}

struct PoolPoint {
    q: Vec<f64>,
    cost: f64,
    polytope: usize,
}

fn point_cost(q: &[f64], pz_given_x: &[Vec<f64>], nz: usize) -> f64 {
    let pz: Vec<f64> = (0..nz).map(|z| q.iter().enumerate().map(|(x, &qx)| qx * pz_given_x[x][z]).sum()).collect();
    h(&pz) - h(q)
}

fn h(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

fn random_combination(vertices: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let weights: Vec<f64> = vertices.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = weights.iter().sum();
    let mut q = vec![0.0; vertices[0].len()];
    for (v, w) in vertices.iter().zip(&weights) {
        for (a, b) in q.iter_mut().zip(v) {
            *a += w / total * b;
        }
    }
    q
}

fn solve_mixture(pool: &[PoolPoint], p_x: &Pmf) -> Option<(f64, Vec<f64>)> {
    let nx = p_x.len();
    let rows: Vec<Vec<f64>> = (0..nx).map(|x| pool.iter().map(|p| p.q[x]).collect()).collect();
    let sys = LinearFeasibility::new(rows, p_x.probs().to_vec()).ok()?;
    let neg: Vec<f64> = pool.iter().map(|p| -p.cost).collect();
    let sol = lp_solve(&neg, &sys);
    (sol.status == LpStatus::Optimal).then(|| (-sol.value, sol.x))
}

fn label_tuples(ny: usize, nz: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let total = (ny as f64).powi(nz as i32);
    if total <= cap as f64 {
        let mut out = vec![vec![]];
        for _ in 0..nz {
            out = out
                .into_iter()
                .flat_map(|t: Vec<usize>| {
                    (0..ny).map(move |y| {
                        let mut t = t.clone();
                        t.push(y);
                        t
                    })
                })
                .collect();
        }
        out
    } else {
        (0..cap).map(|_| (0..nz).map(|_| rng.gen_range(0..ny)).collect()).collect()
    }
}

/// Searches for the smallest `I(X;U) - I(U;Z)` over feasible auxiliaries.
/// Deterministic for a fixed `options.seed`.
pub fn wz_inner_bound(setup: &WzSetup, options: &WzOptions) -> Result<WzResult> {
    let (nx, ny, nz) = (setup.n_x(), setup.n_y(), setup.n_z());
    let p_x = setup.p_x();
    let pz_given_x: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..nz).map(|z| if p_x.get(x) > 0.0 { setup.p_xz.get(&[x, z]) / p_x.get(x) } else { 0.0 }).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let tuples = label_tuples(ny, nz, options.max_label_tuples, &mut rng);
    let n_tuples = tuples.len();

    let mut polytopes = Vec::new();
    for labels in tuples {
        if let Some(p) = explore_polytope(setup, labels, &p_x, &pz_given_x, options.restarts, &mut rng)? {
            polytopes.push(p);
        }
    }
    let infeasible = |pool_size| WzResult {
        rate_bits: None,
        candidate: None,
        residual: f64::INFINITY,
        label_tuples: n_tuples,
        nonempty_polytopes: polytopes.len(),
        pool_size,
    };
    if polytopes.is_empty() {
        return Ok(infeasible(0));
    }

    let mut pool: Vec<PoolPoint> = Vec::new();
    for (k, poly) in polytopes.iter().enumerate() {
        for v in &poly.vertices {
            pool.push(PoolPoint { cost: point_cost(v, &pz_given_x, nz), q: v.clone(), polytope: k });
        }
        if poly.vertices.len() > 1 {
            for _ in 0..options.restarts / 4 {
                let q = random_combination(&poly.vertices, &mut rng);
                pool.push(PoolPoint { cost: point_cost(&q, &pz_given_x, nz), q, polytope: k });
            }
        }
    }
    let Some((mut best, mut weights)) = solve_mixture(&pool, &p_x) else {
        return Ok(infeasible(pool.len()));
    };

    // Local refinement: move active points toward random points of their
    // own polytope with a shrinking step.
    let mut step = 0.5;
    for _ in 0..options.refine_rounds {
        let active: Vec<usize> = (0..pool.len()).filter(|&k| weights[k] > 1e-12).collect();
        let mut added = 0;
        for &k in &active {
            let poly = &polytopes[pool[k].polytope];
            if poly.vertices.len() < 2 {
                continue;
            }
            for _ in 0..(options.restarts / active.len().max(1)).max(2) {
                let target = if rng.gen_bool(0.5) {
                    poly.vertices.choose(&mut rng).expect("non-empty").clone()
                } else {
                    random_combination(&poly.vertices, &mut rng)
                };
                let t = step * rng.gen::<f64>();
                let q: Vec<f64> = pool[k].q.iter().zip(&target).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                pool.push(PoolPoint { cost: point_cost(&q, &pz_given_x, nz), q, polytope: pool[k].polytope });
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
        match solve_mixture(&pool, &p_x) {
            Some((v, w)) if v < best - 1e-12 => {
                best = v;
                weights = w;
            }
            _ => step *= 0.5,
        }
        weights.resize(pool.len(), 0.0);
        // Keep the pool bounded: active points plus the original vertices.
        if pool.len() > 4096 {
            let keep: Vec<bool> = weights.iter().map(|&w| w > 1e-12).collect();
            let mut idx = 0;
            let mut new_weights = Vec::new();
            pool.retain(|_| {
                let kk = keep[idx];
                if kk {
                    new_weights.push(weights[idx]);
                }
                idx += 1;
                kk
            });
            weights = new_weights;
        }
        if step < 1e-6 {
            break;
        }
    }

    let active: Vec<usize> = (0..pool.len()).filter(|&k| weights[k] > 1e-12).collect();
    if active.len() > setup.u_size() {
        return Ok(restricted_support(setup, &pool, &polytopes, &p_x, &pz_given_x, n_tuples));
    }
    let atoms: Vec<(f64, &[f64], &[usize])> = active
        .iter()
        .map(|&k| (weights[k], pool[k].q.as_slice(), polytopes[pool[k].polytope].labels.as_slice()))
        .collect();
    let cand = candidate_from_atoms(setup, &p_x, &atoms)?;
    Ok(finish(cand, n_tuples, polytopes.len(), pool.len()))
}

fn finish(cand: WzCandidate, label_tuples: usize, nonempty: usize, pool_size: usize) -> WzResult {
    let residual = cand.residual;
    if residual > FEASIBLE_RESIDUAL {
        return WzResult { rate_bits: None, candidate: Some(cand), residual, label_tuples, nonempty_polytopes: nonempty, pool_size };
    }
    WzResult {
        rate_bits: Some(cand.objective_bits.max(0.0)),
        candidate: Some(cand),
        residual,
        label_tuples,
        nonempty_polytopes: nonempty,
        pool_size,
    }
}

/// Builds `P_{U|X}` and a deterministic `P_{Y|UZ}` from weighted posteriors.
fn candidate_from_atoms(setup: &WzSetup, p_x: &Pmf, atoms: &[(f64, &[f64], &[usize])]) -> Result<WzCandidate> {
    let (nx, ny, nz, nu) = (setup.n_x(), setup.n_y(), setup.n_z(), setup.u_size());
    let mut pu_x = vec![vec![0.0; nu]; nx];
    for (x, row) in pu_x.iter_mut().enumerate() {
        if p_x.get(x) > 0.0 {
            for (u, (w, q, _)) in atoms.iter().enumerate() {
                row[u] = w * q[x] / p_x.get(x);
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row[0] = 1.0;
        }
    }
    let mut py_uz = vec![vec![0.0; ny]; nu * nz];
    for u in 0..nu {
        for z in 0..nz {
            let y = atoms.get(u).map_or(0, |a| a.2[z]);
            py_uz[u * nz + z][y] = 1.0;
        }
    }
    WzCandidate::new(setup, Channel::new(pu_x)?, Channel::new(py_uz)?)
}

/// Fallback when the mixture needs more auxiliary letters than allowed:
/// exhaustive search over subsets of the pool's most useful points.
fn restricted_support(
    setup: &WzSetup,
    pool: &[PoolPoint],
    polytopes: &[LabelPolytope],
    p_x: &Pmf,
    _pz_given_x: &[Vec<f64>],
    n_tuples: usize,
) -> WzResult {
    let k = setup.u_size();
    let nx = setup.n_x();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[a].cost.total_cmp(&pool[b].cost));
    order.truncate(48);
    let mut best: Option<(f64, Vec<(f64, usize)>)> = None;
    let mut subset = Vec::new();
    fn rec(
        start: usize,
        k: usize,
        order: &[usize],
        subset: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if !subset.is_empty() {
            visit(subset);
        }
        if subset.len() == k {
            return;
        }
        for i in start..order.len() {
            subset.push(order[i]);
            rec(i + 1, k, order, subset, visit);
            subset.pop();
        }
    }
    let mut visit = |s: &[usize]| {
        let a = nalgebra::DMatrix::from_fn(nx, s.len(), |x, j| pool[s[j]].q[x]);
        let b = nalgebra::DVector::from_column_slice(p_x.probs());
        let w = crate::feasible::pseudoinverse(&a) * &b;
        if (&a * &w - &b).amax() > 1e-10 || w.iter().any(|&v| v < -1e-12) {
            return;
        }
        let val: f64 = s.iter().zip(w.iter()).map(|(&i, &wi)| wi * pool[i].cost).sum();
        if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
            best = Some((val, s.iter().zip(w.iter()).map(|(&i, &wi)| (wi.max(0.0), i)).collect()));
        }
    };
    rec(0, k, &order, &mut subset, &mut visit);
    match best {
        Some((_, atoms)) => {
            let atoms: Vec<(f64, &[f64], &[usize])> = atoms
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|&(w, i)| (w, pool[i].q.as_slice(), polytopes[pool[i].polytope].labels.as_slice()))
                .collect();
            match candidate_from_atoms(setup, p_x, &atoms) {
                Ok(c) => finish(c, n_tuples, polytopes.len(), pool.len()),
                Err(_) => empty_result(n_tuples, polytopes.len(), pool.len()),
            }
        }
        None => empty_result(n_tuples, polytopes.len(), pool.len()),
    }
}

fn empty_result(label_tuples: usize, nonempty: usize, pool_size: usize) -> WzResult {
    WzResult { rate_bits: None, candidate: None, residual: f64::INFINITY, label_tuples, nonempty_polytopes: nonempty, pool_size }
}

/// `H(X) - H(Z)`: the constant part of the objective.
pub fn objective_offset(setup: &WzSetup) -> f64 {
    entropy(&setup.p_x()) - entropy(&setup.p_z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{binary_entropy, bayes_posterior};
    use approx::assert_abs_diff_eq;

    fn no_side_info_bsc() -> WzSetup {
        WzSetup::without_side_information(&Pmf::uniform(2), &Channel::bsc(0.1), Some(2)).unwrap()
    }

    #[test]
    fn degenerates_to_rate_channel() {
        let r = wz_inner_bound(&no_side_info_bsc(), &WzOptions::default()).unwrap();
        assert_abs_diff_eq!(r.rate_bits.unwrap(), 1.0 - binary_entropy(0.1), epsilon = 5e-3);
        assert!(r.residual <= FEASIBLE_RESIDUAL);
    }

    #[test]
    fn perfect_side_information_costs_nothing() {
        // Z = X and W(x|y,z) = 1{x = z}.
        let p_xz = JointPmf::new(vec![2, 2], vec![0.3, 0.0, 0.0, 0.7]).unwrap();
        let rows = (0..2).flat_map(|_y| (0..2).map(|z| if z == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })).collect();
        let setup = WzSetup::new(p_xz, 2, Channel::new(rows).unwrap(), None).unwrap();
        let r = wz_inner_bound(&setup, &WzOptions::default()).unwrap();
        assert_abs_diff_eq!(r.rate_bits.unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn induced_joint_marginalizes_to_source() {
        let setup = no_side_info_bsc();
        let c = WzCandidate::new(&setup, Channel::bsc(0.3), Channel::bsc(0.2)).unwrap();
        let m = c.induced.marginal(&[1, 3]).unwrap();
        for (a, b) in m.table().iter().zip(setup.p_xz().table()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn self_consistent_candidate_has_zero_residual() {
        // U = Y with a copy decoder; W is the induced posterior.
        let p_xz = JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.15, 0.35]).unwrap();
        let pu_x = Channel::bsc(0.2);
        let nz = 2;
        let copy = Channel::new((0..4).map(|i| if i / nz == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect()).unwrap();
        let dummy_w = Channel::new(vec![vec![0.5, 0.5]; 4]).unwrap();
        let dummy = WzSetup::new(p_xz.clone(), 2, dummy_w, Some(2)).unwrap();
        let j = induced_joint(&dummy, &pu_x, &copy).unwrap();
        let post = bayes_posterior(&j, 1, &[2, 3]).unwrap().to_channel().unwrap();
        let setup = WzSetup::new(p_xz, 2, post, Some(2)).unwrap();
        let c = WzCandidate::new(&setup, pu_x, copy).unwrap();
        assert!(posterior_residual(&setup, &c) < 1e-15);
    }

    #[test]
    fn mismatched_candidate_has_positive_residual() {
        let p_xz = JointPmf::new(vec![2, 1], vec![0.5, 0.5]).unwrap();
        let setup = WzSetup::new(p_xz, 2, Channel::new(vec![vec![0.5, 0.5]; 2]).unwrap(), Some(2)).unwrap();
        let c = WzCandidate::new(&setup, Channel::identity(2), Channel::identity(2)).unwrap();
        assert!(posterior_residual(&setup, &c) > 0.5);
    }

    #[test]
    fn independent_u_has_zero_objective() {
        let setup = no_side_info_bsc();
        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let c = WzCandidate::new(&setup, Channel::constant(2, &p), Channel::bsc(0.1)).unwrap();
        assert_abs_diff_eq!(wz_objective(&c), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = no_side_info_bsc();
        let o = WzOptions { seed: 9, ..Default::default() };
        assert_eq!(wz_inner_bound(&s, &o).unwrap(), wz_inner_bound(&s, &o).unwrap());
    }
}
