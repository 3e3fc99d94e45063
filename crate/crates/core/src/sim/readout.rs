use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::config::ReadoutModel;

/// `P(N < k)` for `N ~ Poisson(λ)`.
pub fn poisson_below(lambda: f64, k: u32) -> f64 {
    if lambda == 0.0 {
        return if k > 0 { 1.0 } else { 0.0 };
    }
    let mut term = (-lambda).exp();
    let mut sum = 0.0;
    for n in 0..k {
        sum += term;
        term *= lambda / (n + 1) as f64;
    }
    sum.min(1.0)
}

/// Probability that an atom in the given state is called bright.
pub fn p_called_bright(model: &ReadoutModel, atom_is_bright: bool) -> f64 {
    let above = |l: f64| 1.0 - poisson_below(l, model.threshold);
    let (own, other) = if atom_is_bright {
        (model.lambda_bright, model.lambda_dark)
    } else {
        (model.lambda_dark, model.lambda_bright)
    };
    (1.0 - model.contrast_penalty) * above(own) + model.contrast_penalty * above(other)
}

/// Mean probability of a correct call over bright and dark atoms.
pub fn readout_fidelity(model: &ReadoutModel) -> f64 {
    0.5 * (p_called_bright(model, true) + 1.0 - p_called_bright(model, false))
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Simulated fluorescence readout; `true` means called bright.
pub fn fluorescence_readout<R: Rng + ?Sized>(atom_is_bright: bool, model: &ReadoutModel, rng: &mut R) -> bool {
    let swap = model.contrast_penalty > 0.0 && rng.random::<f64>() < model.contrast_penalty;
    let lambda = if atom_is_bright != swap {
        model.lambda_bright
    } else {
        model.lambda_dark
    };
    poisson_draw(lambda, rng) >= model.threshold as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(lb: f64, ld: f64, thr: u32) -> ReadoutModel {
        ReadoutModel {
            lambda_bright: lb,
            lambda_dark: ld,
            threshold: thr,
            contrast_penalty: 0.0,
        }
    }

    /// Closed-form tails for threshold 2: P(N ≥ 2) = 1 − e^{−λ}(1 + λ).
    fn oracle_threshold_two(lb: f64, ld: f64) -> f64 {
        let bright_ok = 1.0 - (-lb).exp() * (1.0 + lb);
        let dark_ok = (-ld).exp() * (1.0 + ld);
        0.5 * (bright_ok + dark_ok)
    }

    #[test]
    fn fidelity_matches_closed_form() {
        for (lb, ld) in [(12.0, 0.3), (12.0, 0.401), (5.0, 1.0)] {
            assert!((readout_fidelity(&model(lb, ld, 2)) - oracle_threshold_two(lb, ld)).abs() < 1e-14);
        }
        // frozen: the (12, 0.3, 2) model discriminates at 98.15 %
        assert!((readout_fidelity(&model(12.0, 0.3, 2)) - 0.981_492).abs() < 1e-6);
        // the default dark mean reproduces 96.9 %
        assert!((readout_fidelity(&ReadoutModel::default()) - 0.969).abs() < 5e-4);
    }

    #[test]
    fn degenerate_models() {
        assert!((readout_fidelity(&model(3.0, 3.0, 2)) - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = model(1e4, 0.0, 1);
        assert!((0..1000).all(|_| fluorescence_readout(true, &m, &mut rng)));
        assert!((0..1000).all(|_| !fluorescence_readout(false, &m, &mut rng)));
    }

    #[test]
    fn sampling_matches_analytic() {
        let m = ReadoutModel {
            contrast_penalty: 0.05,
            ..model(12.0, 0.401, 2)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200_000;
        for bright in [true, false] {
            let hits = (0..n).filter(|_| fluorescence_readout(bright, &m, &mut rng)).count() as f64 / n as f64;
            let p = p_called_bright(&m, bright);
            assert!((hits - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-9, "{bright} {hits} {p}");
        }
    }

    #[test]
    fn poisson_tail_sums_to_one() {
        assert!((poisson_below(7.0, 200) - 1.0).abs() < 1e-14);
        assert_eq!(poisson_below(0.0, 1), 1.0);
        assert_eq!(poisson_below(2.0, 0), 0.0);
    }
}
