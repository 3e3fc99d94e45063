use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::TomoError;
use crate::linalg::kron;
use crate::quantum::{PauliLabel, TwoQubitState};
use crate::sim::{AtomAnalysis, JointCounts, RunSummary, SummaryRow};

/// Joint counts in the order `[n(a+, p+), n(a+, p−), n(a−, p+), n(a−, p−)]`,
/// i.e. (bright, H), (bright, V), (dark, H), (dark, V).
pub type Cells = [f64; 4];

pub fn cells_from_joint(c: &JointCounts) -> Cells {
    [c.h_bright as f64, c.v_bright as f64, c.h_dark as f64, c.v_dark as f64]
}

/// Outcome probabilities of the atom/photon Pauli setting in [`Cells`] order.
pub fn setting_probabilities(state: &TwoQubitState<f64>, atom: PauliLabel, photon: PauliLabel) -> Cells {
    let mut out = [0.0; 4];
    for (k, (a, p)) in [(true, true), (true, false), (false, true), (false, false)].into_iter().enumerate() {
        let proj = kron(&atom.projector::<f64>(a), &photon.projector::<f64>(p));
        out[k] = state.expectation(&proj).max(0.0);
    }
    out
}

/// Counts per (atom, photon) Pauli setting. Cells are real so that
/// corrected counts stay representable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    cells: BTreeMap<(PauliLabel, PauliLabel), Cells>,
}

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds counts to a setting.
    pub fn insert(&mut self, atom: PauliLabel, photon: PauliLabel, counts: Cells) -> Result<(), TomoError> {
        if atom == PauliLabel::Identity || photon == PauliLabel::Identity {
            return Err(TomoError::MissingSetting(vec![format!("{atom}{photon} is not a measurable setting")]));
        }
        if let Some(bad) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(TomoError::NegativeCount(*bad));
        }
        let cell = self.cells.entry((atom, photon)).or_insert([0.0; 4]);
        for (c, n) in cell.iter_mut().zip(counts) {
            *c += n;
        }
        Ok(())
    }

    pub fn get(&self, atom: PauliLabel, photon: PauliLabel) -> Option<&Cells> {
        self.cells.get(&(atom, photon))
    }

    pub fn total(&self, atom: PauliLabel, photon: PauliLabel) -> Option<f64> {
        self.get(atom, photon).map(|c| c.iter().sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = ((PauliLabel, PauliLabel), &Cells)> {
        self.cells.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Applies `f` to every setting's cells.
    pub fn map_cells(&self, mut f: impl FnMut(PauliLabel, PauliLabel, &Cells) -> Cells) -> Self {
        Self {
            cells: self.cells.iter().map(|(&(a, p), c)| ((a, p), f(a, p, c))).collect(),
        }
    }

    /// Keeps the rows whose atomic analysis is a Pauli basis; other Δφ scan
    /// points do not enter tomography.
    pub fn from_rows(rows: &[SummaryRow]) -> Result<Self, TomoError> {
        let mut t = Self::new();
        for row in rows {
            let atom = match row.delta_phi_rad {
                None => Some(PauliLabel::Z),
                Some(p) => AtomAnalysis::Equatorial(p).label(),
            };
            if let Some(atom) = atom {
                t.insert(atom, row.basis, cells_from_joint(&row.counts()))?;
            }
        }
        Ok(t)
    }

    pub fn from_summary(summary: &RunSummary) -> Result<Self, TomoError> {
        let mut t = Self::new();
        for s in &summary.settings {
            if let Some(atom) = s.setting.atom.label() {
                t.insert(atom, s.setting.photon, cells_from_joint(&s.counts))?;
            }
        }
        Ok(t)
    }

    /// Expected counts of `total` events per setting for all nine settings.
    pub fn expected(state: &TwoQubitState<f64>, total: f64) -> Self {
        let mut t = Self::new();
        for a in PauliLabel::MEASURABLE {
            for p in PauliLabel::MEASURABLE {
                let probs = setting_probabilities(state, a, p);
                t.cells.insert((a, p), probs.map(|q| q * total));
            }
        }
        t
    }

    /// Multinomial sample of `shots` events per setting for all nine settings.
    pub fn sample<R: Rng + ?Sized>(state: &TwoQubitState<f64>, shots: u64, rng: &mut R) -> Self {
        let mut t = Self::new();
        for a in PauliLabel::MEASURABLE {
            for p in PauliLabel::MEASURABLE {
                let probs = setting_probabilities(state, a, p);
                t.cells.insert((a, p), multinomial(shots, &probs, rng).map(|n| n as f64));
            }
        }
        t
    }
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64; 4], rng: &mut R) -> [u64; 4] {
    let total: f64 = probs.iter().sum();
    let mut left = n;
    let mut mass = 1.0;
    let mut out = [0u64; 4];
    for k in 0..3 {
        let p = probs[k] / total;
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    out[3] = left;
    out
}

/// Two-qubit Pauli expectation values `S[i][j]` (atom index first) with
/// standard errors. `mirrored` marks entries copied from `S[j][i]` because
/// the setting itself was not measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSet {
    pub values: [[f64; 4]; 4],
    pub errors: [[f64; 4]; 4],
    pub mirrored: [[bool; 4]; 4],
}

impl ExpectationSet {
    pub fn exact(state: &TwoQubitState<f64>) -> Self {
        Self {
            values: state.correlation_table(),
            errors: [[0.0; 4]; 4],
            mirrored: [[false; 4]; 4],
        }
    }

    pub fn get(&self, atom: PauliLabel, photon: PauliLabel) -> f64 {
        self.values[atom.index()][photon.index()]
    }
}

fn parity_error(s: f64, n: f64) -> f64 {
    ((1.0 - s * s).max(0.0) / n).sqrt()
}

pub fn expectations_from_counts(counts: &CountsTable) -> Result<ExpectationSet, TomoError> {
    let mut values = [[0.0; 4]; 4];
    let mut errors = [[0.0; 4]; 4];
    let mut mirrored = [[false; 4]; 4];
    values[0][0] = 1.0;
    let mut missing = Vec::new();
    let correlation = |c: &Cells| (c[0] - c[1] - c[2] + c[3], c.iter().sum::<f64>());
    for a in PauliLabel::MEASURABLE {
        for p in PauliLabel::MEASURABLE {
            let (i, j) = (a.index(), p.index());
            let own = counts.get(a, p).filter(|c| c.iter().sum::<f64>() > 0.0);
            let (cells, flip) = match own {
                Some(c) => (c, false),
                None => match counts.get(p, a).filter(|c| c.iter().sum::<f64>() > 0.0) {
                    Some(c) => (c, true),
                    None => {
                        missing.push(format!("{a}{p}"));
                        continue;
                    }
                },
            };
            let (num, n) = correlation(cells);
            let s = (num / n).clamp(-1.0, 1.0);
            values[i][j] = s;
            errors[i][j] = parity_error(s, n);
            mirrored[i][j] = flip;
        }
    }
    if !missing.is_empty() {
        return Err(TomoError::MissingSetting(missing));
    }
    // single-qubit marginals pool every setting that measured the qubit
    for q in PauliLabel::MEASURABLE {
        let (mut atom_num, mut atom_n, mut photon_num, mut photon_n) = (0.0, 0.0, 0.0, 0.0);
        for ((a, p), c) in counts.iter() {
            let n: f64 = c.iter().sum();
            if a == q {
                atom_num += c[0] + c[1] - c[2] - c[3];
                atom_n += n;
            }
            if p == q {
                photon_num += c[0] - c[1] + c[2] - c[3];
                photon_n += n;
            }
        }
        if atom_n <= 0.0 || photon_n <= 0.0 {
            return Err(TomoError::MissingSetting(vec![format!("marginal {q}")]));
        }
        let sa = (atom_num / atom_n).clamp(-1.0, 1.0);
        let sp = (photon_num / photon_n).clamp(-1.0, 1.0);
        values[q.index()][0] = sa;
        errors[q.index()][0] = parity_error(sa, atom_n);
        values[0][q.index()] = sp;
        errors[0][q.index()] = parity_error(sp, photon_n);
    }
    Ok(ExpectationSet { values, errors, mirrored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::random::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_counts_give_anticorrelation() {
        let t = CountsTable::expected(&TwoQubitState::bell_target(), 1000.0);
        let s = expectations_from_counts(&t).unwrap();
        for p in PauliLabel::MEASURABLE {
            assert!((s.get(p, p) + 1.0).abs() < 1e-12);
        }
        assert!(s.get(PauliLabel::X, PauliLabel::Z).abs() < 1e-12);
        assert_eq!(s.values[0][0], 1.0);
    }

    #[test]
    fn flat_counts_give_zero() {
        let mut t = CountsTable::new();
        for a in PauliLabel::MEASURABLE {
            for p in PauliLabel::MEASURABLE {
                t.insert(a, p, [25.0; 4]).unwrap();
            }
        }
        let s = expectations_from_counts(&t).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 0) {
                    assert_eq!(s.values[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn sampled_expectations_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = TwoQubitState::bell_target();
        let t = CountsTable::sample(&truth, 100_000, &mut rng);
        let s = expectations_from_counts(&t).unwrap();
        let exact = truth.correlation_table();
        for a in PauliLabel::MEASURABLE {
            for p in PauliLabel::MEASURABLE {
                let (i, j) = (a.index(), p.index());
                let tol = 3.0 * s.errors[i][j].max(1.0 / 100_000.0);
                assert!((s.values[i][j] - exact[i][j]).abs() <= tol, "{a}{p}");
            }
        }
    }

    #[test]
    fn missing_settings_are_reported() {
        let full = CountsTable::expected(&TwoQubitState::maximally_mixed(), 100.0);
        let mut t = CountsTable::new();
        for ((a, p), c) in full.iter() {
            if (a, p) != (PauliLabel::X, PauliLabel::Y) {
                t.insert(a, p, *c).unwrap();
            }
        }
        // the symmetric partner stands in
        let s = expectations_from_counts(&t).unwrap();
        assert!(s.mirrored[1][2]);
        let mut partial = CountsTable::new();
        partial.insert(PauliLabel::Z, PauliLabel::Z, [1.0; 4]).unwrap();
        assert!(matches!(expectations_from_counts(&partial), Err(TomoError::MissingSetting(_))));
        assert!(partial.insert(PauliLabel::Z, PauliLabel::X, [-1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let rho = random_density(&mut rng, 4);
            let probs = setting_probabilities(&rho, PauliLabel::X, PauliLabel::Y);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(multinomial(777, &probs, &mut rng).iter().sum::<u64>(), 777);
        }
    }
}
