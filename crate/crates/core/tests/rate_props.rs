use proptest::prelude::*;
use ratechannel::feasible::{classical_feasibility, LinearFeasibility};
use ratechannel::lp::{lp_solve, LpStatus};
use ratechannel::prob::{entropy, mutual_information, Channel, Pmf};
use ratechannel::rate::{blahut_arimoto_rd, rate_channel_fn, bridge_check, DistortionSpec};

fn simplex_point(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

fn channel(n_in: usize, n_out: usize) -> impl Strategy<Value = Channel> {
    prop::collection::vec(simplex_point(n_out), n_in).prop_map(|rows| Channel::new(rows).unwrap())
}

/// A source in the image of `w`, so the feasibility set is non-empty.
fn feasible_instance(ny: usize, nx: usize) -> impl Strategy<Value = (Pmf, Channel)> {
    (channel(ny, nx), simplex_point(ny)).prop_map(|(w, py)| {
        let px = w.output_of(&Pmf::normalized(py).unwrap()).unwrap();
        (Pmf::normalized(px.into_vec()).unwrap(), w)
    })
}

/// Best objective over all basic feasible solutions, by brute force.
fn vertex_enumeration(c: &[f64], sys: &LinearFeasibility) -> Option<f64> {
    let filtered = sys.filtered();
    let (a, b) = (filtered.a(), filtered.b());
    let (m, n) = a.shape();
    let mut best: Option<f64> = None;
    let mut cols: Vec<usize> = (0..m).collect();
    loop {
        let sub = nalgebra::DMatrix::from_fn(m, m, |r, k| a[(r, cols[k])]);
        if let Some(inv) = sub.clone().try_inverse() {
            let xb = inv * b;
            if xb.iter().all(|&v| v >= -1e-10) {
                let val: f64 = cols.iter().zip(xb.iter()).map(|(&j, &v)| c[j] * v).sum();
                best = Some(best.map_or(val, |bv: f64| bv.max(val)));
            }
        }
        // Next combination.
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if cols[i] < n - m + i {
                cols[i] += 1;
                for k in i + 1..m {
                    cols[k] = cols[k - 1] + 1;
                }
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_within_bounds_and_matches_mi((p, w) in (2usize..5, 2usize..4).prop_flat_map(|(ny, nx)| feasible_instance(ny, nx))) {
        let r = rate_channel_fn(&p, &w).unwrap();
        prop_assert_eq!(r.status, LpStatus::Optimal);
        let rate = r.rate_bits.unwrap();
        prop_assert!(rate >= 0.0 && rate <= entropy(&p) + 1e-12);
        let py = r.optimizer.unwrap();
        let mi = mutual_information(&w.joint_with_input(&py).unwrap()).unwrap();
        prop_assert!((mi - rate).abs() <= 1e-9);
        prop_assert!(r.diagnostics.feasibility_residual <= 1e-9);
    }

    #[test]
    fn lp_matches_vertex_enumeration((p, w) in (2usize..7, 2usize..4).prop_flat_map(|(ny, nx)| feasible_instance(ny, nx)),
                                     c in prop::collection::vec(-1.0f64..1.0, 6)) {
        let sys = classical_feasibility(&p, &w).unwrap();
        let c = &c[..w.n_inputs()];
        let sol = lp_solve(c, &sys);
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_enumeration(c, &sys).unwrap();
        prop_assert!(oracle <= sol.value + 1e-9, "vertex {} beats simplex {}", oracle, sol.value);
        prop_assert!((oracle - sol.value).abs() <= 1e-9);
    }

    #[test]
    fn rd_is_monotone_and_convex(p in simplex_point(3), w in channel(3, 3)) {
        let p = Pmf::normalized(p).unwrap();
        let d: Vec<Vec<f64>> = (0..3).map(|x| (0..3).map(|y| 2.0 * w.get(x, y)).collect()).collect();
        let spec = DistortionSpec::new(d, 0.0).unwrap();
        let lo = spec.min_distortion(&p);
        let hi = spec.zero_rate_distortion(&p).0;
        let grid: Vec<f64> = (0..=8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect();
        let r: Vec<f64> = grid.iter().map(|&l| blahut_arimoto_rd(&p, &spec.with_level(l)).unwrap().rate_bits).collect();
        for k in 1..r.len() {
            prop_assert!(r[k] <= r[k - 1] + 1e-6);
        }
        for k in 1..r.len() - 1 {
            prop_assert!(r[k] <= 0.5 * (r[k - 1] + r[k + 1]) + 1e-6);
        }
    }

    #[test]
    fn bridge_on_random_instances((p, w) in feasible_instance(3, 3), c in 0.3f64..3.0, b in prop::collection::vec(0.0f64..1.0, 3)) {
        let rep = bridge_check(&p, &w, c, &b).unwrap();
        prop_assert!(rep.equal, "{:?}", rep);
    }
}
