//! Closed-form cavity-QED budget: cooperativity, Purcell linewidth, coupling
//! rate, emission and detection probabilities, resonator geometry and the
//! temporal shape of the emitted photon.
//!
//! Rates are angular frequencies in rad/s. Mirror figures are in ppm.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CavityError {
    #[error("Purcell linewidth {gamma_purcell} is below the bare linewidth {gamma_atom}")]
    LinewidthNarrowing { gamma_purcell: f64, gamma_atom: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    NotProbability { name: &'static str, value: f64 },
    #[error("mirror budget sums to zero")]
    ZeroLoss,
    #[error("unstable resonator: g1 = {g1:.4}, g2 = {g2:.4}, g1*g2 = {product:.4}")]
    Unstable { g1: f64, g2: f64, product: f64 },
    #[error("time grid step {step_ns} ns is coarser than {max_step_ns} ns")]
    GridTooCoarse { step_ns: f64, max_step_ns: f64 },
    #[error("full width at half maximum is undefined: {0}")]
    FwhmUndefined(&'static str),
}

fn f<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn non_negative<T: Real>(name: &'static str, value: T) -> Result<T, CavityError> {
    if value >= T::zero() {
        Ok(value)
    } else {
        Err(CavityError::Negative { name, value: f(value) })
    }
}

fn positive<T: Real>(name: &'static str, value: T) -> Result<T, CavityError> {
    if value > T::zero() {
        Ok(value)
    } else {
        Err(CavityError::NonPositive { name, value: f(value) })
    }
}

fn probability<T: Real>(name: &'static str, value: T) -> Result<T, CavityError> {
    if value >= T::zero() && value <= T::one() {
        Ok(value)
    } else {
        Err(CavityError::NotProbability { name, value: f(value) })
    }
}

/// `2π · f[MHz] · 1e6`
pub fn mhz_to_angular<T: Real>(mhz: T) -> T {
    T::TAU() * mhz * T::lit(1e6)
}

pub fn angular_to_mhz<T: Real>(omega: T) -> T {
    omega / (T::TAU() * T::lit(1e6))
}

/// Mirror transmissions and round-trip loss, in ppm. `t_in` is the mirror
/// the photon is collected through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorSet<T> {
    pub t_in: T,
    pub t_other: T,
    pub loss_total: T,
}

impl<T: Real> MirrorSet<T> {
    pub fn new(t_in: T, t_other: T, loss_total: T) -> Result<Self, CavityError> {
        let m = Self {
            t_in: non_negative("t_in", t_in)?,
            t_other: non_negative("t_other", t_other)?,
            loss_total: non_negative("loss_total", loss_total)?,
        };
        if m.total_ppm() <= T::zero() {
            return Err(CavityError::ZeroLoss);
        }
        Ok(m)
    }

    pub fn total_ppm(&self) -> T {
        self.t_in + self.t_other + self.loss_total
    }
}

/// Fraction of intracavity photons leaving through `t_in`.
pub fn extraction_efficiency<T: Real>(m: &MirrorSet<T>) -> Result<T, CavityError> {
    let total = m.total_ppm();
    if total <= T::zero() {
        return Err(CavityError::ZeroLoss);
    }
    Ok(m.t_in / total)
}

/// `2π / Σ losses` with the losses converted from ppm.
pub fn finesse<T: Real>(m: &MirrorSet<T>) -> Result<T, CavityError> {
    let total = m.total_ppm();
    if total <= T::zero() {
        return Err(CavityError::ZeroLoss);
    }
    Ok(T::TAU() / (total * T::lit(1e-6)))
}

/// Two-mirror resonator; all lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry<T> {
    pub length: T,
    pub r1: T,
    pub r2: T,
    pub wavelength: T,
}

impl<T: Real> CavityGeometry<T> {
    pub fn new(length: T, r1: T, r2: T, wavelength: T) -> Result<Self, CavityError> {
        Ok(Self {
            length: positive("length", length)?,
            r1,
            r2,
            wavelength: positive("wavelength", wavelength)?,
        })
    }

    /// `(1 − L/R1, 1 − L/R2)`
    pub fn stability(&self) -> (T, T) {
        (T::one() - self.length / self.r1, T::one() - self.length / self.r2)
    }
}

/// Waist (1/e² intensity radius) of the fundamental Gaussian mode.
pub fn mode_waist<T: Real>(g: &CavityGeometry<T>) -> Result<T, CavityError> {
    let (g1, g2) = g.stability();
    let p = g1 * g2;
    let tiny = T::lit(1e-12);
    if g1.abs() < tiny && g2.abs() < tiny {
        // symmetric confocal limit
        return Ok((g.length * g.wavelength / T::TAU()).sqrt());
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(CavityError::Unstable {
            g1: f(g1),
            g2: f(g2),
            product: f(p),
        });
    }
    let denom = g1 + g2 - T::lit(2.0) * p;
    let w2 = g.length * g.wavelength / T::PI() * (p * (T::one() - p) / (denom * denom)).sqrt();
    Ok(w2.sqrt())
}

/// Atom-cavity rates (angular) and the effective cooperativity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomCavityParams<T> {
    /// Full atomic linewidth Γ.
    pub gamma_atom_full: T,
    /// Cavity field decay rate κ (HWHM).
    pub kappa: T,
    pub c_eff: T,
}

impl<T: Real> AtomCavityParams<T> {
    pub fn new(gamma_atom_full: T, kappa: T, c_eff: T) -> Result<Self, CavityError> {
        Ok(Self {
            gamma_atom_full: positive("gamma_atom_full", gamma_atom_full)?,
            kappa: positive("kappa", kappa)?,
            c_eff: non_negative("c_eff", c_eff)?,
        })
    }

    /// Takes the cooperativity from a measured Purcell-broadened linewidth.
    pub fn from_linewidths(gamma_atom_full: T, gamma_purcell: T, kappa: T) -> Result<Self, CavityError> {
        let c_eff = cooperativity_from_linewidth(gamma_purcell, gamma_atom_full)?;
        Self::new(gamma_atom_full, kappa, c_eff)
    }

    pub fn gamma_purcell(&self) -> T {
        self.gamma_atom_full * (T::one() + T::lit(2.0) * self.c_eff)
    }

    pub fn g_eff(&self) -> T {
        (self.c_eff * T::lit(2.0) * self.kappa * self.gamma_atom_full * T::lit(0.5)).sqrt()
    }

    pub fn p_cavity(&self) -> T {
        let two_c = T::lit(2.0) * self.c_eff;
        two_c / (two_c + T::one())
    }
}

/// `C = (Γ′/Γ − 1)/2`
pub fn cooperativity_from_linewidth<T: Real>(gamma_purcell: T, gamma_atom_full: T) -> Result<T, CavityError> {
    positive("gamma_atom_full", gamma_atom_full)?;
    if gamma_purcell < gamma_atom_full {
        return Err(CavityError::LinewidthNarrowing {
            gamma_purcell: f(gamma_purcell),
            gamma_atom: f(gamma_atom_full),
        });
    }
    Ok((gamma_purcell / gamma_atom_full - T::one()) * T::lit(0.5))
}

/// `Γ′ = Γ(1 + 2C)`
pub fn purcell_linewidth<T: Real>(gamma_atom_full: T, c_eff: T) -> Result<T, CavityError> {
    non_negative("gamma_atom_full", gamma_atom_full)?;
    non_negative("c_eff", c_eff)?;
    Ok(gamma_atom_full * (T::one() + T::lit(2.0) * c_eff))
}

/// `g = √(2Cκγ)` with γ the half linewidth.
pub fn coupling_rate<T: Real>(c_eff: T, kappa: T, gamma_half: T) -> Result<T, CavityError> {
    non_negative("c_eff", c_eff)?;
    non_negative("kappa", kappa)?;
    non_negative("gamma_half", gamma_half)?;
    Ok((c_eff * T::lit(2.0) * kappa * gamma_half).sqrt())
}

/// `2C / (2C + 1)`
pub fn emission_probability<T: Real>(c_eff: T) -> Result<T, CavityError> {
    non_negative("c_eff", c_eff)?;
    let two_c = T::lit(2.0) * c_eff;
    Ok(two_c / (two_c + T::one()))
}

/// Factors between emission into the cavity mode and a detector click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain<T> {
    pub p_cavity: T,
    pub eta_ext: T,
    pub epsilon_mode: T,
    pub eta_path: T,
    pub eta_detector: T,
}

impl<T: Real> EfficiencyChain<T> {
    pub fn factors(&self) -> [(&'static str, T); 5] {
        [
            ("p_cavity", self.p_cavity),
            ("eta_ext", self.eta_ext),
            ("epsilon_mode", self.epsilon_mode),
            ("eta_path", self.eta_path),
            ("eta_detector", self.eta_detector),
        ]
    }

    /// Everything after the cavity emission.
    pub fn collection(&self) -> T {
        self.eta_ext * self.epsilon_mode * self.eta_path * self.eta_detector
    }
}

pub fn detection_efficiency<T: Real>(chain: &EfficiencyChain<T>) -> Result<T, CavityError> {
    let mut p = T::one();
    for (name, v) in chain.factors() {
        p = p * probability(name, v)?;
    }
    Ok(p)
}

pub fn entanglement_rate<T: Real>(p_success: T, attempt_rate_hz: T) -> Result<T, CavityError> {
    probability("p_success", p_success)?;
    non_negative("attempt_rate", attempt_rate_hz)?;
    Ok(p_success * attempt_rate_hz)
}

/// Uniform sampling grid starting at `t = 0`, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub step: T,
    pub span: T,
}

impl<T: Real> TimeGrid<T> {
    pub const MAX_STEP_S: f64 = 0.05e-9;

    pub fn new(step: T, span: T) -> Result<Self, CavityError> {
        positive("step", step)?;
        positive("span", span)?;
        if step > T::lit(Self::MAX_STEP_S) {
            return Err(CavityError::GridTooCoarse {
                step_ns: f(step) * 1e9,
                max_step_ns: Self::MAX_STEP_S * 1e9,
            });
        }
        Ok(Self { step, span })
    }

    pub fn len(&self) -> usize {
        (self.span / self.step).round().to_usize().unwrap_or(0) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|k| T::lit(k as f64) * self.step).collect()
    }
}

impl<T: Real> Default for TimeGrid<T> {
    fn default() -> Self {
        Self {
            step: T::lit(10e-12),
            span: T::lit(200e-9),
        }
    }
}

/// Intensity profile of the emitted photon.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket<T> {
    pub times: Vec<T>,
    /// Probability density in 1/s; integrates to one over `[0, ∞)`.
    pub intensity: Vec<T>,
    pub fwhm: T,
    pub peak_time: T,
}

/// Density of `Exp(a) + Exp(b)`, the convolution of the atomic intensity
/// decay with the cavity response.
pub fn two_exponential_density<T: Real>(a: T, b: T, t: T) -> T {
    if t < T::zero() {
        return T::zero();
    }
    let rel = ((b - a) / (a + b)).abs();
    if rel < T::lit(1e-6) {
        let m = (a + b) * T::lit(0.5);
        return m * m * t * (-m * t).exp();
    }
    a * b / (b - a) * ((-a * t).exp() - (-b * t).exp())
}

/// Photon intensity for Purcell rate `gamma_purcell` (1/s) and cavity field
/// decay constant `tau_cavity` (s), sampled on `grid`.
pub fn photon_wavepacket<T: Real>(gamma_purcell: T, tau_cavity: T, grid: &TimeGrid<T>) -> Result<Wavepacket<T>, CavityError> {
    positive("gamma_purcell", gamma_purcell)?;
    positive("tau_cavity", tau_cavity)?;
    let grid = TimeGrid::new(grid.step, grid.span)?;
    let b = T::one() / tau_cavity;
    let times = grid.times();
    let intensity: Vec<T> = times.iter().map(|&t| two_exponential_density(gamma_purcell, b, t)).collect();
    let (peak_time, fwhm) = fwhm_linear(&times, &intensity)?;
    Ok(Wavepacket {
        times,
        intensity,
        fwhm,
        peak_time,
    })
}

/// Location of the maximum and full width at half maximum of a sampled
/// curve, with crossings found by linear interpolation. A curve already
/// above half maximum at its first sample uses that sample as left edge.
pub fn fwhm_linear<T: Real>(x: &[T], y: &[T]) -> Result<(T, T), CavityError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(CavityError::FwhmUndefined("fewer than two samples"));
    }
    let (k, &peak) = y
        .iter()
        .enumerate()
        .fold((0, &y[0]), |best, (i, v)| if *v > *best.1 { (i, v) } else { best });
    if !(peak > T::zero()) {
        return Err(CavityError::FwhmUndefined("no positive maximum"));
    }
    let half = peak * T::lit(0.5);
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = match (0..k).rev().find(|&i| y[i] < half) {
        Some(i) => cross(i, i + 1),
        None => x[0],
    };
    let right = (k + 1..y.len())
        .find(|&i| y[i] < half)
        .map(|i| cross(i - 1, i))
        .ok_or(CavityError::FwhmUndefined("curve does not fall below half maximum"))?;
    if right - left <= T::zero() {
        return Err(CavityError::FwhmUndefined("zero width"));
    }
    Ok((x[k], right - left))
}

/// Probability that a photon with the two-exponential profile arrives in
/// `[start, start + width]`.
pub fn window_capture<T: Real>(gamma_purcell: T, tau_cavity: T, start: T, width: T) -> T {
    let cdf = |t: T| -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let a = gamma_purcell;
        let b = T::one() / tau_cavity;
        if ((b - a) / (a + b)).abs() < T::lit(1e-6) {
            let m = (a + b) * T::lit(0.5);
            return T::one() - (T::one() + m * t) * (-m * t).exp();
        }
        T::one() - (b * (-a * t).exp() - a * (-b * t).exp()) / (b - a)
    };
    cdf(start + width) - cdf(start)
}

/// Inputs of the efficiency and rate budget, in laboratory units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetInputs {
    pub gamma_atom_mhz: f64,
    pub gamma_purcell_mhz: f64,
    pub kappa_mhz: f64,
    pub t_out_ppm: f64,
    pub t_other_ppm: f64,
    pub loss_ppm: f64,
    pub epsilon_mode: f64,
    pub eta_path: f64,
    pub eta_detector: f64,
    pub length_um: f64,
    pub r1_um: f64,
    pub r2_um: f64,
    pub wavelength_nm: f64,
    pub tau_cavity_ns: f64,
    /// Measured single-shot success probability used for the rate.
    pub p_success: f64,
    pub attempt_period_us: f64,
}

impl Default for BudgetInputs {
    fn default() -> Self {
        Self {
            gamma_atom_mhz: 19.4,
            gamma_purcell_mhz: 21.58,
            kappa_mhz: 58.0,
            t_out_ppm: 500.0,
            t_other_ppm: 100.0,
            loss_ppm: 350.0,
            epsilon_mode: 0.44,
            eta_path: 0.65,
            eta_detector: 0.215,
            length_um: 261.0,
            r1_um: 271.0,
            r2_um: 304.0,
            wavelength_nm: 370.0,
            tau_cavity_ns: 1.3,
            p_success: 2.5e-3,
            attempt_period_us: 40.0,
        }
    }
}

/// Budget values under the fixed report keys. `waist_um` is `None` when the
/// geometry is unstable, with the reason in `waist_note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub c_eff: f64,
    pub g_eff_mhz: f64,
    pub gamma_purcell_mhz: f64,
    pub p_cavity: f64,
    pub eta_ext: f64,
    pub p_detect: f64,
    pub finesse: f64,
    pub waist_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waist_note: Option<String>,
    pub fwhm_ns: f64,
    pub rate_hz: f64,
}

impl BudgetReport {
    pub fn compute(inp: &BudgetInputs) -> Result<Self, CavityError> {
        let gamma = mhz_to_angular(inp.gamma_atom_mhz);
        let gamma_p = mhz_to_angular(inp.gamma_purcell_mhz);
        let params = AtomCavityParams::from_linewidths(gamma, gamma_p, mhz_to_angular(inp.kappa_mhz))?;
        let mirrors = MirrorSet::new(inp.t_out_ppm, inp.t_other_ppm, inp.loss_ppm)?;
        let eta_ext = extraction_efficiency(&mirrors)?;
        let chain = EfficiencyChain {
            p_cavity: params.p_cavity(),
            eta_ext,
            epsilon_mode: inp.epsilon_mode,
            eta_path: inp.eta_path,
            eta_detector: inp.eta_detector,
        };
        let geometry = CavityGeometry::new(inp.length_um * 1e-6, inp.r1_um * 1e-6, inp.r2_um * 1e-6, inp.wavelength_nm * 1e-9)?;
        let (waist_um, waist_note) = match mode_waist(&geometry) {
            Ok(w) => (Some(w * 1e6), None),
            Err(CavityError::Unstable { product, .. }) => (None, Some(format!("UNSTABLE(g1g2={product:.4})"))),
            Err(e) => return Err(e),
        };
        let packet = photon_wavepacket(params.gamma_purcell(), inp.tau_cavity_ns * 1e-9, &TimeGrid::default())?;
        positive("attempt_period_us", inp.attempt_period_us)?;
        Ok(Self {
            c_eff: params.c_eff,
            g_eff_mhz: angular_to_mhz(params.g_eff()),
            gamma_purcell_mhz: angular_to_mhz(params.gamma_purcell()),
            p_cavity: chain.p_cavity,
            eta_ext,
            p_detect: detection_efficiency(&chain)?,
            finesse: finesse(&mirrors)?,
            waist_um,
            waist_note,
            fwhm_ns: packet.fwhm * 1e9,
            rate_hz: entanglement_rate(inp.p_success, 1e6 / inp.attempt_period_us)?,
        })
    }

    /// One `name = value unit` line per key.
    pub fn to_text(&self) -> String {
        let waist = match (&self.waist_um, &self.waist_note) {
            (Some(w), _) => format!("waist_um = {w:.4} um"),
            (None, Some(note)) => format!("waist_um = {note} um"),
            (None, None) => "waist_um = UNSTABLE um".to_string(),
        };
        [
            format!("c_eff = {:.6} 1", self.c_eff),
            format!("g_eff_mhz = {:.4} MHz", self.g_eff_mhz),
            format!("gamma_purcell_mhz = {:.4} MHz", self.gamma_purcell_mhz),
            format!("p_cavity = {:.6} 1", self.p_cavity),
            format!("eta_ext = {:.6} 1", self.eta_ext),
            format!("p_detect = {:.6e} 1", self.p_detect),
            format!("finesse = {:.1} 1", self.finesse),
            waist,
            format!("fwhm_ns = {:.4} ns", self.fwhm_ns),
            format!("rate_hz = {:.3} Hz", self.rate_hz),
        ]
        .join("\n")
            + "\n"
    }
}
