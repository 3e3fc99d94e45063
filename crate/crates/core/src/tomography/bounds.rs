use serde::{Deserialize, Serialize};

use super::counts::{Cells, CountsTable};
use super::TomoError;

/// Value with a one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
}

/// Joint probabilities of one basis in the order (↑H, ↑V, ↓H, ↓V), with the
/// number of events they were estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisProbabilities {
    pub p: [f64; 4],
    pub events: f64,
}

impl BasisProbabilities {
    pub fn new(p: [f64; 4], events: f64) -> Result<Self, TomoError> {
        if let Some(bad) = p.iter().find(|v| !(**v >= 0.0)) {
            return Err(TomoError::NegativeProbability(*bad));
        }
        let sum: f64 = p.iter().sum();
        if sum > 1.0 + 1e-9 {
            return Err(TomoError::NegativeProbability(1.0 - sum));
        }
        Ok(Self { p, events })
    }

    /// Normalized [`Cells`]; bright is ↑ and H is photon +1.
    pub fn from_cells(c: &Cells) -> Result<Self, TomoError> {
        let n: f64 = c.iter().sum();
        if !(n > 0.0) {
            return Err(TomoError::NoCounts);
        }
        Self::new(c.map(|v| v / n), n)
    }

    /// Variance of `Σ g_k p̂_k` for multinomial sampling.
    fn linear_variance(&self, g: &[f64; 4]) -> f64 {
        if !(self.events > 0.0) || !self.events.is_finite() {
            return 0.0;
        }
        let m: f64 = g.iter().zip(&self.p).map(|(a, b)| a * b).sum();
        let s: f64 = g.iter().zip(&self.p).map(|(a, b)| a * a * b).sum();
        (s - m * m).max(0.0) / self.events
    }
}

const UH: usize = 0;
const UV: usize = 1;
const DH: usize = 2;
const DV: usize = 3;

/// Which rotated basis supplies the coherence terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotatedSource {
    Single(BasisProbabilities),
    /// Mean of the σx and σy terms.
    AverageXY(BasisProbabilities, BasisProbabilities),
}

impl RotatedSource {
    pub fn label(&self) -> &'static str {
        match self {
            RotatedSource::Single(_) => "single",
            RotatedSource::AverageXY(..) => "average_xy",
        }
    }
}

fn rotated_term(p: &[f64; 4]) -> f64 {
    p[UV] + p[DH] - p[UH] - p[DV]
}

const ROTATED_GRADIENT: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];

/// `½(ρ↑V + ρ↓H − √(ρ↑H ρ↓V) + ρ̃↑V + ρ̃↓H − ρ̃↑H − ρ̃↓V)` with Gaussian
/// propagation of the multinomial errors of each basis.
pub fn fidelity_lower_bound(z: &BasisProbabilities, rotated: &RotatedSource) -> Estimate {
    let p = &z.p;
    let root = (p[UH] * p[DV]).sqrt();
    let z_part = p[UV] + p[DH] - root;
    // d√(ab)/da = √(b/a)/2, guarded at the boundary
    let dr = |num: f64, den: f64| if den > 0.0 { 0.5 * (num / den).sqrt() } else { 0.0 };
    let gz = [-0.5 * dr(p[DV], p[UH]), 0.5, 0.5, -0.5 * dr(p[UH], p[DV])];
    let mut var = z.linear_variance(&gz);
    let rot_part = match rotated {
        RotatedSource::Single(r) => {
            var += r.linear_variance(&ROTATED_GRADIENT.map(|g| 0.5 * g));
            rotated_term(&r.p)
        }
        RotatedSource::AverageXY(x, y) => {
            let g = ROTATED_GRADIENT.map(|g| 0.25 * g);
            var += x.linear_variance(&g) + y.linear_variance(&g);
            0.5 * (rotated_term(&x.p) + rotated_term(&y.p))
        }
    };
    Estimate::new(0.5 * (z_part + rot_part), var.sqrt())
}

/// `½(1 + √(2P − 1))`, the largest Bell overlap at purity `P`.
pub fn fidelity_upper_bound(purity: f64) -> Result<f64, TomoError> {
    if !(0.5..=1.0 + 1e-9).contains(&purity) {
        return Err(TomoError::Domain(purity));
    }
    Ok(0.5 * (1.0 + (2.0 * purity - 1.0).max(0.0).sqrt()))
}

/// Upper bound with the purity error carried through.
pub fn fidelity_upper_estimate(purity: Estimate) -> Result<Estimate, TomoError> {
    let value = fidelity_upper_bound(purity.value)?;
    let slope = 0.5 / (2.0 * purity.value - 1.0).max(1e-12).sqrt();
    Ok(Estimate::new(value, (slope * purity.error).min(0.5)))
}

/// One cell that would have gone negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampedCell {
    pub setting: String,
    pub cell: usize,
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkCorrected {
    pub counts: CountsTable,
    pub clamped: Vec<ClampedCell>,
}

/// Expected dark clicks `attempts·p_port`, split evenly between the bright
/// and dark atomic outcomes of that port, removed from every setting.
/// `p_h` and `p_v` are per-attempt probabilities of a dark click that
/// survives post-selection.
pub fn dark_count_correct(counts: &CountsTable, p_h: f64, p_v: f64, attempts: f64) -> DarkCorrected {
    let sub_h = attempts * p_h / 2.0;
    let sub_v = attempts * p_v / 2.0;
    let mut clamped = Vec::new();
    let corrected = counts.map_cells(|a, p, c| {
        let mut out = *c;
        for (k, sub) in [(0, sub_h), (1, sub_v), (2, sub_h), (3, sub_v)] {
            let v = c[k] - sub;
            if v < 0.0 {
                clamped.push(ClampedCell {
                    setting: format!("{a}{p}"),
                    cell: k,
                    deficit: -v,
                });
            }
            out[k] = v.max(0.0);
        }
        out
    });
    DarkCorrected {
        counts: corrected,
        clamped,
    }
}

/// Same correction for one setting's cells.
pub fn dark_count_correct_cells(c: &Cells, p_h: f64, p_v: f64, attempts: f64) -> Cells {
    let sub = [p_h, p_v, p_h, p_v].map(|p| attempts * p / 2.0);
    [0, 1, 2, 3].map(|k| (c[k] - sub[k]).max(0.0))
}
