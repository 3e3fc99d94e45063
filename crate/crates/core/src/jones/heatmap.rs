use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fiber_unitary, horizontal, hwp, qwp, FiberModel, JonesError, Offsets};
use crate::scalar::Real;

/// Reflected V-port intensity for one pair of commanded waveplate angles:
/// `|⟨V| Hᵀ Qᵀ Fᵀ · F Q H |H⟩|²`, the laser entering through the PBS,
/// reflecting at the far fiber end and returning.
pub fn v_rate<T: Real>(fiber: &FiberModel<T>, offsets: &Offsets, theta_hwp: T, theta_qwp: T) -> T {
    let h = hwp(theta_hwp + T::lit(offsets.hwp));
    let q = qwp(theta_qwp + T::lit(offsets.qwp));
    let f = fiber_unitary(fiber);
    let forward = h.then(&q).then(&f);
    let round_trip = forward.then(&forward.reversed());
    round_trip.apply(&horizontal()).entry(1).norm_sqr()
}

/// Rectangular map of normalized V-port rates. `rates[i][j]` belongs to
/// `hwp[i]`, `qwp[j]`; angles are in radians and sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub hwp: Vec<f64>,
    pub qwp: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
}

impl HeatMap {
    pub fn len(&self) -> usize {
        self.hwp.len() * self.qwp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evenly spaced grid over `[0, span)` in each angle.
    pub fn grid(n_hwp: usize, n_qwp: usize, span: f64) -> (Vec<f64>, Vec<f64>) {
        let axis = |n: usize| (0..n).map(|k| span * k as f64 / n as f64).collect();
        (axis(n_hwp), axis(n_qwp))
    }

    pub fn max(&self) -> f64 {
        self.rates.iter().flatten().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Copy scaled so the largest rate is one.
    pub fn normalized(&self) -> Self {
        let m = self.max();
        let scale = if m > 0.0 { 1.0 / m } else { 1.0 };
        Self {
            hwp: self.hwp.clone(),
            qwp: self.qwp.clone(),
            rates: self.rates.iter().map(|row| row.iter().map(|v| v * scale).collect()).collect(),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.hwp
            .iter()
            .enumerate()
            .flat_map(move |(i, &h)| self.qwp.iter().enumerate().map(move |(j, &q)| (h, q, self.rates[i][j])))
    }

    pub fn rms_difference(&self, other: &Self) -> f64 {
        let n = self.len().max(1) as f64;
        let ss: f64 = self.points().zip(other.points()).map(|(a, b)| (a.2 - b.2).powi(2)).sum();
        (ss / n).sqrt()
    }
}

pub fn simulate_reflection_heatmap(fiber: &FiberModel<f64>, offsets: &Offsets, hwp_angles: &[f64], qwp_angles: &[f64]) -> HeatMap {
    let rates = hwp_angles
        .par_iter()
        .map(|&h| qwp_angles.iter().map(|&q| v_rate(fiber, offsets, h, q)).collect())
        .collect();
    HeatMap {
        hwp: hwp_angles.to_vec(),
        qwp: qwp_angles.to_vec(),
        rates,
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    theta_hwp_deg: f64,
    theta_qwp_deg: f64,
    v_rate: f64,
}

/// Writes `theta_hwp_deg,theta_qwp_deg,v_rate` rows, HWP angle outermost.
pub fn write_heatmap_csv<W: Write>(map: &HeatMap, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta_hwp_deg", "theta_qwp_deg", "v_rate"])?;
    for (h, q, r) in map.points() {
        w.write_record([
            format!("{:.4}", h.to_degrees()),
            format!("{:.4}", q.to_degrees()),
            format!("{:.6}", r.clamp(0.0, 1.0)),
        ])?;
    }
    w.flush()
}

pub fn read_heatmap_csv<R: Read>(input: R) -> Result<HeatMap, JonesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["theta_hwp_deg", "theta_qwp_deg", "v_rate"] {
        return Err(parse_err(1, format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| parse_err(k + 2, e.to_string()))?;
        if !(0.0..=1.0).contains(&row.v_rate) {
            return Err(parse_err(k + 2, format!("rate {} outside [0, 1]", row.v_rate)));
        }
        rows.push(row);
    }
    let mut hs: Vec<f64> = rows.iter().map(|r| r.theta_hwp_deg).collect();
    let mut qs: Vec<f64> = rows.iter().map(|r| r.theta_qwp_deg).collect();
    for v in [&mut hs, &mut qs] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    if hs.len() * qs.len() != rows.len() {
        return Err(JonesError::NotRectangular(format!(
            "{} rows for {} HWP x {} QWP angles",
            rows.len(),
            hs.len(),
            qs.len()
        )));
    }
    let mut rates = vec![vec![f64::NAN; qs.len()]; hs.len()];
    for r in &rows {
        let i = hs.binary_search_by(|v| v.total_cmp(&r.theta_hwp_deg)).unwrap_or(0);
        let j = qs.binary_search_by(|v| v.total_cmp(&r.theta_qwp_deg)).unwrap_or(0);
        if !rates[i][j].is_nan() {
            return Err(JonesError::NotRectangular(format!(
                "duplicate point ({}, {})",
                r.theta_hwp_deg, r.theta_qwp_deg
            )));
        }
        rates[i][j] = r.v_rate;
    }
    Ok(HeatMap {
        hwp: hs.iter().map(|d| d.to_radians()).collect(),
        qwp: qs.iter().map(|d| d.to_radians()).collect(),
        rates,
    })
}

fn parse_err(line: usize, message: String) -> JonesError {
    JonesError::Parse { line, message }
}
