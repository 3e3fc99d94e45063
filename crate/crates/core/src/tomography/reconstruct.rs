use num_complex::Complex;

use super::counts::{CountsTable, ExpectationSet};
use super::TomoError;
use crate::linalg::{kron, Mat4};
use crate::optimize::{bfgs, BfgsOptions};
use crate::quantum::{PauliLabel, TwoQubitState};

/// `ρ = ¼ Σ S_ij σi ⊗ σj`. Hermitian with unit trace, not necessarily
/// positive.
pub fn linear_inversion(s: &ExpectationSet) -> Result<TwoQubitState<f64>, TomoError> {
    let mut rho = Mat4::<f64>::zeros();
    for i in PauliLabel::ALL {
        for j in PauliLabel::ALL {
            let v = s.values[i.index()][j.index()];
            if v != 0.0 {
                rho = rho + kron(&i.matrix(), &j.matrix()).scale_re(0.25 * v);
            }
        }
    }
    Ok(TwoQubitState::new(rho)?)
}

/// Closest state in Hilbert-Schmidt norm with non-negative spectrum:
/// negative eigenvalue mass is removed and spread over the rest.
pub fn project_physical(state: &TwoQubitState<f64>) -> TwoQubitState<f64> {
    let e = state.matrix().eigh();
    // descending order
    let mut mu: Vec<f64> = e.values.iter().rev().copied().collect();
    let mut acc = 0.0;
    let mut i = mu.len();
    while i > 0 && mu[i - 1] + acc / i as f64 <= 0.0 {
        acc += mu[i - 1];
        mu[i - 1] = 0.0;
        i -= 1;
    }
    for m in mu.iter_mut().take(i) {
        *m += acc / i as f64;
    }
    let lambda: Vec<f64> = mu.into_iter().rev().collect();
    let mut rho = Mat4::<f64>::zeros();
    for (k, l) in lambda.iter().enumerate() {
        if *l > 0.0 {
            rho = rho + e.vector(k).outer().scale_re(*l);
        }
    }
    TwoQubitState::normalized_from(&rho).unwrap_or_else(|_| TwoQubitState::maximally_mixed())
}

struct Outcome {
    projector: Mat4<f64>,
    count: f64,
}

fn outcomes(counts: &CountsTable) -> Vec<Outcome> {
    let mut out = Vec::new();
    for ((a, p), cells) in counts.iter() {
        for (k, (sa, sp)) in [(true, true), (true, false), (false, true), (false, false)].into_iter().enumerate() {
            out.push(Outcome {
                projector: kron(&a.projector::<f64>(sa), &p.projector::<f64>(sp)),
                count: cells[k],
            });
        }
    }
    out
}

fn trace_product(a: &Mat4<f64>, b: &Mat4<f64>) -> f64 {
    let mut acc = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            acc += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    acc
}

const PROB_FLOOR: f64 = 1e-300;

/// Multinomial log-likelihood `Σ n ln p` of the counts under `state`.
pub fn log_likelihood(counts: &CountsTable, state: &TwoQubitState<f64>) -> f64 {
    outcomes(counts)
        .iter()
        .filter(|o| o.count > 0.0)
        .map(|o| o.count * trace_product(state.matrix(), &o.projector).max(PROB_FLOOR).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub state: TwoQubitState<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

const PARAMS: usize = 16;

fn t_from_params(x: &[f64]) -> Mat4<f64> {
    let mut t = Mat4::<f64>::zeros();
    let mut k = 0;
    for r in 0..4 {
        for c in 0..=r {
            if r == c {
                t[(r, c)] = Complex::new(x[k], 0.0);
                k += 1;
            } else {
                t[(r, c)] = Complex::new(x[k], x[k + 1]);
                k += 2;
            }
        }
    }
    t
}

/// Lower-triangular `T` with `T†T = ρ`.
fn params_from_state(state: &TwoQubitState<f64>) -> Vec<f64> {
    // Cholesky of the index-reversed matrix J ρ J = L L† gives ρ = U U† with
    // U = J L J upper triangular, so T = U†.
    let rho = state.matrix();
    let rev = |i: usize| 3 - i;
    let a = Mat4::<f64>::from_fn(|r, c| rho[(rev(r), rev(c))]);
    let mut l = Mat4::<f64>::zeros();
    for j in 0..4 {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        let djj = d.max(1e-12).sqrt();
        l[(j, j)] = Complex::new(djj, 0.0);
        for i in j + 1..4 {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    let u = Mat4::<f64>::from_fn(|r, c| l[(rev(r), rev(c))]);
    let t = u.adjoint();
    let mut x = Vec::with_capacity(PARAMS);
    for r in 0..4 {
        for c in 0..=r {
            x.push(t[(r, c)].re);
            if r != c {
                x.push(t[(r, c)].im);
            }
        }
    }
    x
}

fn state_from_params(x: &[f64]) -> TwoQubitState<f64> {
    let t = t_from_params(x);
    let m = t.adjoint() * t;
    TwoQubitState::normalized_from(&m).unwrap_or_else(|_| TwoQubitState::maximally_mixed())
}

/// Maximum-likelihood physical state, `ρ = T†T / Tr(T†T)` with `T` lower
/// triangular, started from the physical projection of `start` slightly
/// mixed with the identity.
pub fn mle_reconstruct(counts: &CountsTable, start: &TwoQubitState<f64>) -> Result<MleResult, TomoError> {
    let obs = outcomes(counts);
    let n_total: f64 = obs.iter().map(|o| o.count).sum();
    if obs.is_empty() || !(n_total > 0.0) {
        return Err(TomoError::NoCounts);
    }
    let obs: Vec<Outcome> = obs.into_iter().filter(|o| o.count > 0.0).collect();

    let seed = TwoQubitState::maximally_mixed().mix(&project_physical(start), 1e-3);
    let x0 = params_from_state(&seed);

    let objective = |x: &[f64]| -> f64 {
        let t = t_from_params(x);
        let m = t.adjoint() * t;
        let tr = m.trace().re;
        if !(tr > 0.0) {
            return f64::INFINITY;
        }
        let ll: f64 = obs
            .iter()
            .map(|o| o.count * (trace_product(&m, &o.projector).max(PROB_FLOOR) / tr).ln())
            .sum();
        -ll / n_total
    };
    let gradient = |x: &[f64]| -> Vec<f64> {
        let t = t_from_params(x);
        let m = t.adjoint() * t;
        let tr = m.trace().re.max(PROB_FLOOR);
        let mut g = Mat4::<f64>::identity().scale_re(-1.0 / tr);
        for o in &obs {
            let p = trace_product(&m, &o.projector).max(PROB_FLOOR);
            g = g + o.projector.scale_re(o.count / (n_total * p));
        }
        let a = g * t.adjoint();
        let mut out = Vec::with_capacity(PARAMS);
        for r in 0..4 {
            for c in 0..=r {
                out.push(-2.0 * a[(c, r)].re);
                if r != c {
                    out.push(2.0 * a[(c, r)].im);
                }
            }
        }
        out
    };

    let opts = BfgsOptions {
        max_iter: 5000,
        grad_tol: 1e-11,
        step_tol: 1e-9,
        rel_value_tol: 1e-12,
    };
    let best = bfgs(objective, gradient, &x0, &opts);
    let state = state_from_params(&best.x);
    let result = MleResult {
        log_likelihood: log_likelihood(counts, &state),
        state,
        iterations: best.iterations,
        converged: best.converged,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(TomoError::NotConverged(Box::new(result)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::numeric_gradient;
    use crate::quantum::random::random_density;
    use crate::tomography::expectations_from_counts;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inversion_round_trips_exact_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rank in 1..=4 {
            let rho = random_density(&mut rng, rank);
            let back = linear_inversion(&ExpectationSet::exact(&rho)).unwrap();
            assert!(back.matrix().approx_eq(rho.matrix(), 1e-10));
        }
        let bell = linear_inversion(&ExpectationSet::exact(&TwoQubitState::bell_target())).unwrap();
        assert!(bell.matrix().approx_eq(TwoQubitState::<f64>::bell_target().matrix(), 1e-12));
    }

    #[test]
    fn finite_samples_of_a_pure_state_are_usually_unphysical() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut unphysical = 0;
        for _ in 0..20 {
            let t = CountsTable::sample(&TwoQubitState::bell_target(), 2000, &mut rng);
            let rho = linear_inversion(&expectations_from_counts(&t).unwrap()).unwrap();
            if !rho.is_physical(1e-12).physical {
                unphysical += 1;
            }
        }
        assert!(unphysical >= 15, "{unphysical}");
    }

    #[test]
    fn projection_is_physical_and_fixes_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rho = random_density(&mut rng, 3);
        assert!(project_physical(&rho).matrix().approx_eq(rho.matrix(), 1e-12));
        let t = CountsTable::sample(&TwoQubitState::bell_target(), 500, &mut rng);
        let raw = linear_inversion(&expectations_from_counts(&t).unwrap()).unwrap();
        assert!(project_physical(&raw).is_physical(1e-12).physical);
    }

    #[test]
    fn cholesky_parameters_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho = random_density(&mut rng, 4);
        let back = state_from_params(&params_from_state(&rho));
        assert!(back.matrix().approx_eq(rho.matrix(), 1e-10));
    }

    #[test]
    fn analytic_gradient_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let truth = random_density(&mut rng, 4);
        let counts = CountsTable::sample(&truth, 1000, &mut rng);
        let x = params_from_state(&random_density(&mut rng, 4));
        let n: f64 = counts.iter().map(|(_, c)| c.iter().sum::<f64>()).sum();
        let f = |p: &[f64]| -log_likelihood(&counts, &state_from_params(p)) / n;
        let numeric = numeric_gradient(&f, &x, 1e-6);
        // rebuild the analytic gradient through a one-step run
        let obs = outcomes(&counts);
        let t = t_from_params(&x);
        let m = t.adjoint() * t;
        let tr = m.trace().re;
        let mut g = Mat4::<f64>::identity().scale_re(-1.0 / tr);
        for o in &obs {
            g = g + o.projector.scale_re(o.count / (n * trace_product(&m, &o.projector)));
        }
        let a = g * t.adjoint();
        let mut k = 0;
        for r in 0..4 {
            for c in 0..=r {
                assert!((numeric[k] + 2.0 * a[(c, r)].re).abs() < 1e-6);
                k += 1;
                if r != c {
                    assert!((numeric[k] - 2.0 * a[(c, r)].im).abs() < 1e-6);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn exact_counts_recover_full_rank_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let truth = random_density(&mut rng, 4);
        let counts = CountsTable::expected(&truth, 1e6);
        let r = mle_reconstruct(&counts, &TwoQubitState::maximally_mixed()).unwrap();
        assert!(r.state.trace_distance(&truth) < 1e-3, "{}", r.state.trace_distance(&truth));
    }

    #[test]
    fn sampled_bell_counts_reconstruct_with_high_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let counts = CountsTable::sample(&TwoQubitState::bell_target(), 100_000, &mut rng);
        let lin = linear_inversion(&expectations_from_counts(&counts).unwrap()).unwrap();
        let r = mle_reconstruct(&counts, &lin).unwrap();
        assert!(r.state.is_physical(1e-9).physical);
        assert!(r.state.bell_fidelity() >= 0.99);
        assert!(r.log_likelihood >= log_likelihood(&counts, &project_physical(&lin)) - 1e-9);
    }

    #[test]
    fn optimum_does_not_depend_on_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let truth = random_density(&mut rng, 4);
        let counts = CountsTable::sample(&truth, 50_000, &mut rng);
        let lin = linear_inversion(&expectations_from_counts(&counts).unwrap()).unwrap();
        let a = mle_reconstruct(&counts, &lin).unwrap();
        let b = mle_reconstruct(&counts, &TwoQubitState::maximally_mixed()).unwrap();
        assert!(a.state.trace_distance(&b.state) < 1e-6, "{}", a.state.trace_distance(&b.state));
    }

    #[test]
    fn empty_counts_are_rejected() {
        assert!(matches!(
            mle_reconstruct(&CountsTable::new(), &TwoQubitState::maximally_mixed()),
            Err(TomoError::NoCounts)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn output_is_always_physical(cells in prop::collection::vec(prop::array::uniform4(0u32..50), 9)) {
            let mut counts = CountsTable::new();
            let mut it = cells.iter();
            for a in PauliLabel::MEASURABLE {
                for p in PauliLabel::MEASURABLE {
                    let c = it.next().unwrap();
                    counts.insert(a, p, c.map(f64::from)).unwrap();
                }
            }
            prop_assume!(counts.iter().any(|(_, c)| c.iter().sum::<f64>() > 0.0));
            let r = match mle_reconstruct(&counts, &TwoQubitState::maximally_mixed()) {
                Ok(r) => r,
                Err(TomoError::NotConverged(best)) => *best,
                Err(e) => panic!("{e}"),
            };
            prop_assert!(r.state.is_physical(1e-9).physical);
        }
    }
}
