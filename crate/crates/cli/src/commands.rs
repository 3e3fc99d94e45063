use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ionphoton::cavity::{BudgetInputs, BudgetReport};
use ionphoton::jones::{
    extinction, fit_fiber, read_heatmap_csv, simulate_reflection_heatmap, solve_basis_angles, v_rate, write_heatmap_csv, BasisSolution,
    FitOptions, FitReport, HeatMap, Offsets,
};
use ionphoton::quantum::format::write_density;
use ionphoton::sim::{
    arrival_time_histogram, read_summary_csv, run_sequence, simulate_ramsey, tomography_settings, write_shot_log, write_summary_csv,
    Histogram, RamseyQubit, RamseyResult, RunMetadata, RunOutput, Setting, SummaryRow,
};
use ionphoton::tomography::{analyze, fit_scan, Analysis, AnalysisOptions, BasisContrast, DarkCounts, Estimate, FidelityReport, TomoError};
use ionphoton::{FiberModel, PauliLabel};
use serde::{Deserialize, Serialize};

use crate::config::{NodeConfig, Resolved};
use crate::error::CliError;
use crate::manifest::{unix_now, OutputDir, RunManifest};
use crate::svg;

pub const SUMMARY_HEADER: &str = "basis,delta_phi_rad,hv,hd,vb,vd\n";
const REGISTER_LABELS: [&str; 4] = ["uH", "uV", "dH", "dV"];

/// Shared inputs of every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub resolved: Resolved,
    pub out: PathBuf,
    pub command_line: Vec<String>,
    pub svg: bool,
}

impl Context {
    pub fn config(&self) -> &NodeConfig {
        &self.resolved.config
    }
}

/// What a command printed, warned about and recorded.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub manifest: RunManifest,
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

// ---------------------------------------------------------------- budget

/// Budget report plus the split of intracavity photons between the output
/// mirror, the other mirror and scatter/absorption.
pub fn budget_text(inp: &BudgetInputs) -> Result<(BudgetReport, String, Vec<String>), CliError> {
    let report = BudgetReport::compute(inp)?;
    let total = inp.t_out_ppm + inp.t_other_ppm + inp.loss_ppm;
    let other = inp.t_other_ppm / total;
    let loss = inp.loss_ppm / total;
    let mut text = report.to_text();
    let _ = writeln!(text, "eta_other_mirror = {other:.6} 1");
    let _ = writeln!(text, "eta_loss = {loss:.6} 1");
    let _ = writeln!(text, "eta_partition_sum = {:.6} 1", report.eta_ext + other + loss);
    let mut warnings = Vec::new();
    if let Some(note) = &report.waist_note {
        warnings.push(format!("cavity geometry is unstable, no mode waist: {note}"));
    }
    Ok((report, text, warnings))
}

pub fn cmd_budget(ctx: &Context) -> Result<Outcome, CliError> {
    let started = unix_now();
    let (report, text, warnings) = budget_text(&ctx.config().budget)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("budget.txt", text.as_bytes())?;
    out.write("budget.json", &json_bytes(&report)?)?;
    let manifest = out.finish("budget", &ctx.command_line, ctx.config(), started)?;
    Ok(Outcome {
        stdout: text,
        warnings,
        manifest,
    })
}

// ---------------------------------------------------------------- simulate

/// Which analysis settings a simulation run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SettingsKind {
    /// σx and σy parity scans plus the remaining Pauli settings.
    #[default]
    Tomography,
    /// The nine Pauli settings.
    Pauli,
    /// σz ⊗ σz only.
    Z,
}

pub fn settings_for(kind: SettingsKind, scan_points: usize) -> Vec<Setting> {
    let paulis = [PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
    match kind {
        SettingsKind::Tomography => tomography_settings(scan_points),
        SettingsKind::Pauli => paulis
            .iter()
            .flat_map(|a| paulis.iter().filter_map(move |p| Setting::paulis(*a, *p)))
            .collect(),
        SettingsKind::Z => Setting::paulis(PauliLabel::Z, PauliLabel::Z).into_iter().collect(),
    }
}

pub fn summary_rows(run: &RunOutput) -> Vec<SummaryRow> {
    run.summary
        .settings
        .iter()
        .map(|s| SummaryRow {
            basis: s.setting.photon,
            delta_phi_rad: s.setting.atom.delta_phi(),
            hv: s.counts.h_bright,
            hd: s.counts.h_dark,
            vb: s.counts.v_bright,
            vd: s.counts.v_dark,
        })
        .collect()
}

/// Contrast figures of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub attempts: u64,
    pub detected: u64,
    pub detection_probability: f64,
    pub contrasts: Vec<BasisContrast>,
    pub histogram_fwhm_ns: Option<f64>,
}

impl SimulationReport {
    pub fn contrast(&self, basis: &str) -> Option<Estimate> {
        self.contrasts.iter().find(|c| c.basis == basis).map(|c| c.contrast)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "attempts = {}", self.attempts);
        let _ = writeln!(s, "detected = {}", self.detected);
        let _ = writeln!(s, "detection_probability = {:.4e}", self.detection_probability);
        for c in &self.contrasts {
            let _ = writeln!(s, "contrast_{} = {:.4} +- {:.4}", c.basis, c.contrast.value, c.contrast.error);
        }
        match self.histogram_fwhm_ns {
            Some(f) => {
                let _ = writeln!(s, "arrival_fwhm_ns = {f:.3}");
            }
            None => s.push_str("arrival_fwhm_ns = undefined\n"),
        }
        s
    }
}

/// z contrast from the σz⊗σz counts and parity contrasts of the scans
/// present in `rows`.
pub fn contrast_report(rows: &[SummaryRow], attempts: u64, detected: u64, histogram: Option<&Histogram>) -> Result<SimulationReport, CliError> {
    let mut contrasts = Vec::new();
    if let Some(zz) = rows.iter().find(|r| r.basis == PauliLabel::Z && r.delta_phi_rad.is_none()) {
        let c = zz.counts();
        let n = c.total() as f64;
        if n > 0.0 {
            let p = (c.h_dark + c.v_bright) as f64 / n;
            contrasts.push(BasisContrast {
                basis: "z".into(),
                contrast: Estimate::new(2.0 * p - 1.0, 2.0 * (p * (1.0 - p) / n).sqrt()),
            });
        }
    }
    for photon in [PauliLabel::X, PauliLabel::Y] {
        if rows.iter().filter(|r| r.basis == photon && r.delta_phi_rad.is_some()).count() >= 6 {
            let (fit, _) = fit_scan(rows, photon, None)?;
            contrasts.push(BasisContrast {
                basis: photon.letter().to_string(),
                contrast: Estimate::new(fit.contrast, fit.contrast_err),
            });
        }
    }
    Ok(SimulationReport {
        attempts,
        detected,
        detection_probability: if attempts > 0 { detected as f64 / attempts as f64 } else { 0.0 },
        contrasts,
        histogram_fwhm_ns: histogram.and_then(|h| h.fwhm().ok()),
    })
}

#[derive(Serialize)]
struct HistogramRow {
    bin_start_ns: f64,
    bin_center_ns: f64,
    counts: u64,
}

fn histogram_csv(h: &Histogram) -> Result<Vec<u8>, CliError> {
    let rows = h.counts.iter().enumerate().map(|(k, &counts)| HistogramRow {
        bin_start_ns: k as f64 * h.bin_ns,
        bin_center_ns: (k as f64 + 0.5) * h.bin_ns,
        counts,
    });
    let bytes = csv_bytes(rows)?;
    Ok(if bytes.is_empty() { b"bin_start_ns,bin_center_ns,counts\n".to_vec() } else { bytes })
}

/// Runs the sequence simulation and returns the run with its histogram.
pub fn simulate_run(cfg: &NodeConfig, kind: SettingsKind) -> Result<(RunOutput, Histogram), CliError> {
    let settings = settings_for(kind, cfg.analysis.scan_points);
    let run = run_sequence(&cfg.experiment, &settings, true)?;
    let log = run.log.as_deref().unwrap_or(&[]);
    let hist = arrival_time_histogram(log, cfg.analysis.histogram_bin_ns, cfg.analysis.histogram_span_ns)?;
    Ok((run, hist))
}

pub fn cmd_simulate(ctx: &Context, kind: SettingsKind, shot_log: bool) -> Result<Outcome, CliError> {
    let started = unix_now();
    let cfg = ctx.config();
    let mut out = OutputDir::create(&ctx.out)?;
    let mut warnings = Vec::new();
    if cfg.experiment.shots == 0 {
        warnings.push("0 shots requested: wrote an empty summary".to_string());
        out.write("summary.csv", SUMMARY_HEADER.as_bytes())?;
        let empty = Histogram {
            bin_ns: cfg.analysis.histogram_bin_ns,
            counts: Vec::new(),
        };
        out.write("histogram.csv", &histogram_csv(&empty)?)?;
        let report = contrast_report(&[], 0, 0, None)?;
        let text = report.to_text();
        out.write("report.txt", text.as_bytes())?;
        let manifest = out.finish("simulate", &ctx.command_line, cfg, started)?;
        return Ok(Outcome {
            stdout: text,
            warnings,
            manifest,
        });
    }
    let (run, hist) = simulate_run(cfg, kind)?;
    let mut summary = Vec::new();
    write_summary_csv(&run.summary, &mut summary)?;
    out.write("summary.csv", &summary)?;
    out.write("metadata.json", &json_bytes(&RunMetadata::new(&cfg.experiment, &run.summary))?)?;
    out.write("histogram.csv", &histogram_csv(&hist)?)?;
    if shot_log {
        let mut buf = Vec::new();
        write_shot_log(run.log.as_deref().unwrap_or(&[]), &mut buf)?;
        out.write("shots.jsonl", &buf)?;
    }
    let report = match contrast_report(&summary_rows(&run), run.summary.attempts, run.summary.detected, Some(&hist)) {
        Ok(r) => r,
        Err(e) => {
            warnings.push(format!("parity fit skipped: {e}"));
            contrast_report(&[], run.summary.attempts, run.summary.detected, Some(&hist))?
        }
    };
    if report.histogram_fwhm_ns.is_none() {
        warnings.push("too few clicks for an arrival-time width".into());
    }
    let text = report.to_text();
    out.write("report.txt", text.as_bytes())?;
    out.write("report.json", &json_bytes(&report)?)?;
    if ctx.svg {
        let pts = hist.centers().into_iter().zip(hist.counts.iter().map(|&c| c as f64)).collect();
        let chart = svg::line_chart(
            "photon arrival times",
            "time after excitation (ns)",
            "clicks",
            &[svg::Series {
                name: "clicks".into(),
                points: pts,
                markers: false,
            }],
        );
        out.write("histogram.svg", chart.as_bytes())?;
    }
    let manifest = out.finish("simulate", &ctx.command_line, cfg, started)?;
    Ok(Outcome {
        stdout: text,
        warnings,
        manifest,
    })
}

// ---------------------------------------------------------------- tomo

/// Reads and concatenates summary files; errors name the file and line.
pub fn read_summaries(paths: &[PathBuf]) -> Result<Vec<SummaryRow>, CliError> {
    let mut rows = Vec::new();
    for p in paths {
        let file = std::fs::File::open(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        let part = read_summary_csv(file).map_err(|e| CliError::from(e).context(p.display()))?;
        rows.extend(part);
    }
    Ok(rows)
}

/// Settings the analysis needs that `rows` do not provide, all at once.
pub fn missing_settings(rows: &[SummaryRow], opts: &AnalysisOptions) -> Vec<String> {
    use ionphoton::tomography::{CountsTable, RotatedChoice};
    let mut missing = Vec::new();
    let table = match CountsTable::from_rows(rows) {
        Ok(t) => t,
        Err(e) => return vec![e.to_string()],
    };
    let paulis = [PauliLabel::X, PauliLabel::Y, PauliLabel::Z];
    for a in paulis {
        for p in paulis {
            let have = table.get(a, p).is_some() || (a != p && table.get(p, a).is_some());
            if !have {
                missing.push(format!("atom {a} / photon {p}"));
            }
        }
    }
    if table.get(PauliLabel::Z, PauliLabel::Z).is_none() && !missing.iter().any(|m| m == "atom z / photon z") {
        missing.push("atom z / photon z".into());
    }
    let scans: &[PauliLabel] = match opts.rotated {
        RotatedChoice::ExtremumAverage => &[PauliLabel::X, PauliLabel::Y],
        RotatedChoice::ExtremumX => &[PauliLabel::X],
        RotatedChoice::ExtremumY => &[PauliLabel::Y],
        RotatedChoice::PauliAverage => &[],
    };
    for &s in scans {
        let n = rows.iter().filter(|r| r.basis == s && r.delta_phi_rad.is_some()).count();
        if n < 6 {
            missing.push(format!("photon {s} parity scan ({n} of at least 6 points)"));
        }
    }
    missing
}

/// Dark-click probabilities inside the acceptance window.
pub fn accepted_dark_counts(cfg: &NodeConfig, attempts_per_setting: f64) -> DarkCounts {
    let e = &cfg.experiment;
    let frac = e.acceptance_window_ns / e.wait_window_ns;
    DarkCounts {
        p_h: e.dark_count_prob_h * frac,
        p_v: e.dark_count_prob_v * frac,
        attempts_per_setting,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoReport {
    pub inputs: Vec<String>,
    pub rows: usize,
    pub raw: FidelityReport,
    pub dark: Option<DarkCounts>,
    pub dark_corrected: Option<FidelityReport>,
    pub mle_iterations: usize,
}

fn estimate(e: &Estimate) -> String {
    format!("{:.4} +- {:.4}", e.value, e.error)
}

fn report_lines(s: &mut String, prefix: &str, r: &FidelityReport) {
    let _ = writeln!(s, "{prefix}f_lower = {}", estimate(&r.f_lower));
    let _ = writeln!(s, "{prefix}f_upper = {}", estimate(&r.f_upper));
    let _ = writeln!(s, "{prefix}purity = {}", estimate(&r.purity));
    let _ = writeln!(s, "{prefix}mle_fidelity = {:.4}", r.mle_fidelity);
    let _ = writeln!(s, "{prefix}aligned_fidelity = {:.4} (gain {:+.4})", r.overlap.overlap, r.overlap.gain);
    for c in &r.contrasts {
        let _ = writeln!(s, "{prefix}contrast_{} = {}", c.basis, estimate(&c.contrast));
    }
}

impl TomoReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "inputs = {}", self.inputs.join(", "));
        let _ = writeln!(s, "rotated_source = {}", self.raw.rotated_source);
        report_lines(&mut s, "raw.", &self.raw);
        if let Some(c) = &self.dark_corrected {
            report_lines(&mut s, "dark_corrected.", c);
            let _ = writeln!(s, "dark_correction_gain = {:+.4}", c.f_lower.value - self.raw.f_lower.value);
            if !c.clamped.is_empty() {
                let _ = writeln!(s, "dark_correction_clamped_cells = {}", c.clamped.len());
            }
        }
        s
    }
}

#[derive(Serialize)]
struct DensityBar {
    row: usize,
    col: usize,
    row_label: &'static str,
    col_label: &'static str,
    abs_mle: f64,
    abs_linear: f64,
}

#[derive(Serialize)]
struct ParityRow {
    basis: String,
    delta_phi_rad: f64,
    correlated_fraction: f64,
    events: f64,
    fit: f64,
}

fn parity_rows(rows: &[SummaryRow], analysis: &Analysis) -> Vec<ParityRow> {
    let mut out = Vec::new();
    for (photon, fit) in &analysis.parity {
        for r in rows.iter().filter(|r| r.basis == *photon) {
            let Some(phi) = r.delta_phi_rad else { continue };
            let c = r.counts();
            let n = c.total() as f64;
            out.push(ParityRow {
                basis: photon.letter().to_string(),
                delta_phi_rad: phi,
                correlated_fraction: if n > 0.0 { (c.h_dark + c.v_bright) as f64 / n } else { f64::NAN },
                events: n,
                fit: fit.offset + 0.5 * fit.contrast * (phi - fit.phase).cos(),
            });
        }
    }
    out
}

/// Raw and, when enabled, dark-corrected analysis of summary rows.
pub fn tomo_analysis(cfg: &NodeConfig, rows: &[SummaryRow], attempts_per_setting: f64) -> Result<(Analysis, Option<(DarkCounts, Analysis)>), CliError> {
    let opts = AnalysisOptions {
        dark: None,
        rotated: cfg.analysis.rotated,
    };
    let missing = missing_settings(rows, &opts);
    if !missing.is_empty() {
        return Err(TomoError::MissingSetting(missing).into());
    }
    let raw = analyze(rows, &opts)?;
    let corrected = if cfg.analysis.dark_correction {
        let dark = accepted_dark_counts(cfg, attempts_per_setting);
        let a = analyze(
            rows,
            &AnalysisOptions {
                dark: Some(dark),
                ..opts
            },
        )?;
        Some((dark, a))
    } else {
        None
    };
    Ok((raw, corrected))
}

/// Attempts per setting from the metadata next to the first summary, or
/// the configured shot count.
fn attempts_per_setting(cfg: &NodeConfig, inputs: &[PathBuf]) -> f64 {
    inputs
        .first()
        .and_then(|p| p.parent())
        .map(|d| d.join("metadata.json"))
        .and_then(|m| std::fs::read_to_string(m).ok())
        .and_then(|t| serde_json::from_str::<RunMetadata>(&t).ok())
        .map(|m| m.attempts_per_setting as f64)
        .unwrap_or(cfg.experiment.shots as f64)
}

pub fn cmd_tomo(ctx: &Context, inputs: &[PathBuf]) -> Result<Outcome, CliError> {
    let started = unix_now();
    let cfg = ctx.config();
    if inputs.is_empty() {
        return Err(CliError::validation("tomo needs at least one summary file"));
    }
    let rows = read_summaries(inputs)?;
    let attempts = attempts_per_setting(cfg, inputs);
    let (raw, corrected) = tomo_analysis(cfg, &rows, attempts)?;
    let mut warnings = Vec::new();
    if let Some((_, c)) = &corrected {
        for cell in &c.report.clamped {
            warnings.push(format!("dark correction clamped setting {} cell {} (deficit {:.3})", cell.setting, cell.cell, cell.deficit));
        }
    }
    if !raw.report.f_upper.value.is_finite() {
        warnings.push(format!("purity {:.4} is below 1/2: no purity bound", raw.report.purity.value));
    }
    let report = TomoReport {
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        rows: rows.len(),
        raw: raw.report.clone(),
        dark: corrected.as_ref().map(|c| c.0),
        dark_corrected: corrected.as_ref().map(|c| c.1.report.clone()),
        mle_iterations: raw.mle.iterations,
    };
    let text = report.to_text();
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("report.txt", text.as_bytes())?;
    out.write("report.json", &json_bytes(&report)?)?;
    out.write("rho_mle.txt", write_density(raw.mle.state.matrix()).as_bytes())?;
    out.write("rho_linear.txt", write_density(raw.linear.matrix()).as_bytes())?;
    if let Some((_, c)) = &corrected {
        out.write("rho_mle_dark_corrected.txt", write_density(c.mle.state.matrix()).as_bytes())?;
    }
    let mle = raw.mle.state.matrix();
    let lin = raw.linear.matrix();
    let bars: Vec<DensityBar> = (0..16)
        .map(|k| {
            let (row, col) = (k / 4, k % 4);
            DensityBar {
                row,
                col,
                row_label: REGISTER_LABELS[row],
                col_label: REGISTER_LABELS[col],
                abs_mle: mle[(row, col)].norm(),
                abs_linear: lin[(row, col)].norm(),
            }
        })
        .collect();
    if ctx.svg {
        let data: Vec<(String, f64)> = bars.iter().map(|b| (format!("{}{}", b.row_label, b.col_label), b.abs_mle)).collect();
        out.write("rho_abs.svg", svg::bar_chart("|rho_ij| (likelihood estimate)", "|rho_ij|", &data).as_bytes())?;
    }
    out.write("rho_abs.csv", &csv_bytes(bars)?)?;
    let parity = parity_rows(&rows, &raw);
    if ctx.svg {
        let mut series = Vec::new();
        for b in ["x", "y"] {
            let pts: Vec<&ParityRow> = parity.iter().filter(|p| p.basis == b).collect();
            if pts.is_empty() {
                continue;
            }
            series.push(svg::Series {
                name: format!("photon {b} data"),
                points: pts.iter().map(|p| (p.delta_phi_rad, p.correlated_fraction)).collect(),
                markers: true,
            });
            series.push(svg::Series {
                name: format!("photon {b} fit"),
                points: pts.iter().map(|p| (p.delta_phi_rad, p.fit)).collect(),
                markers: false,
            });
        }
        out.write("parity.svg", svg::line_chart("parity scans", "delta phi (rad)", "correlated fraction", &series).as_bytes())?;
    }
    out.write("parity.csv", &csv_bytes(parity)?)?;
    let manifest = out.finish("tomo", &ctx.command_line, cfg, started)?;
    Ok(Outcome {
        stdout: text,
        warnings,
        manifest,
    })
}

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub fit: FitReport,
    pub bases: Vec<BasisSolution>,
    /// Worst leakage of each solution re-simulated through the fitted path.
    pub extinction: Vec<f64>,
}

#[derive(Serialize)]
struct AngleRow {
    basis: String,
    theta_hwp_deg: f64,
    theta_qwp_deg: f64,
    physical_hwp_deg: f64,
    physical_qwp_deg: f64,
    extinction: f64,
}

#[derive(Serialize)]
struct FitRow {
    theta_hwp_deg: f64,
    theta_qwp_deg: f64,
    v_rate: f64,
    model: f64,
}

pub fn calibrate_map(map: &HeatMap) -> Result<CalibrationReport, CliError> {
    let fit = fit_fiber(map, &FitOptions::default())?;
    let mut bases = Vec::new();
    let mut ext = Vec::new();
    for b in [PauliLabel::X, PauliLabel::Y, PauliLabel::Z] {
        let sol = solve_basis_angles(&fit.fiber, &fit.offsets, b)?;
        ext.push(extinction(&fit.fiber, &sol.setting, b));
        bases.push(sol);
    }
    Ok(CalibrationReport {
        fit,
        bases,
        extinction: ext,
    })
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        let f = &self.fit;
        let c = &f.canonical;
        let mut s = String::new();
        let _ = writeln!(s, "points = {}", f.points);
        let _ = writeln!(s, "rms_residual = {:.3e}", f.rms);
        let _ = writeln!(s, "scale = {:.6}", f.scale);
        let _ = writeln!(s, "fiber_axis_rad = {:.6}", c.axis);
        let _ = writeln!(s, "fiber_retardance_rad = {:.6}", c.retardance);
        let _ = writeln!(s, "qwp_offset_rad = {:.6}", c.qwp_offset);
        let _ = writeln!(s, "hwp_offset_rad = 0 (absorbed, see gauge notes)");
        let _ = writeln!(s, "conditioning = {:.3e}", f.conditioning);
        let _ = writeln!(s, "degenerate = {}", f.degenerate);
        for (b, e) in self.bases.iter().zip(&self.extinction) {
            let _ = writeln!(
                s,
                "basis {}: hwp = {:.4} deg, qwp = {:.4} deg, extinction = {:.2e}",
                b.basis,
                b.setting.theta_hwp.to_degrees(),
                b.setting.theta_qwp.to_degrees(),
                e
            );
        }
        s
    }
}

pub fn read_heatmap(path: &Path) -> Result<HeatMap, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_heatmap_csv(file).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn cmd_calibrate(ctx: &Context, heatmap: &Path) -> Result<Outcome, CliError> {
    let started = unix_now();
    let map = read_heatmap(heatmap)?;
    let report = calibrate_map(&map).map_err(|e| e.context(heatmap.display()))?;
    let mut warnings = Vec::new();
    if report.fit.degenerate {
        warnings.push(format!(
            "degenerate fit: {} distinct parameter sets explain the map equally well",
            report.fit.alternatives.len() + 1
        ));
    }
    if !report.fit.converged {
        warnings.push("fiber fit did not converge".into());
    }
    let text = report.to_text();
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("calibration.txt", text.as_bytes())?;
    out.write("calibration.json", &json_bytes(&report)?)?;
    let angles = report.bases.iter().zip(&report.extinction).map(|(b, e)| AngleRow {
        basis: b.basis.letter().to_string(),
        theta_hwp_deg: b.setting.theta_hwp.to_degrees(),
        theta_qwp_deg: b.setting.theta_qwp.to_degrees(),
        physical_hwp_deg: b.setting.physical_hwp().to_degrees(),
        physical_qwp_deg: b.setting.physical_qwp().to_degrees(),
        extinction: *e,
    });
    out.write("angles.csv", &csv_bytes(angles)?)?;
    let scale = report.fit.scale * map.max();
    let rows = map.points().map(|(h, q, r)| FitRow {
        theta_hwp_deg: h.to_degrees(),
        theta_qwp_deg: q.to_degrees(),
        v_rate: r,
        model: scale * v_rate(&report.fit.fiber, &report.fit.offsets, h, q),
    });
    out.write("heatmap_fit.csv", &csv_bytes(rows)?)?;
    let manifest = out.finish("calibrate", &ctx.command_line, ctx.config(), started)?;
    if report.fit.converged {
        Ok(Outcome {
            stdout: text,
            warnings,
            manifest,
        })
    } else {
        Err(CliError::NonConvergence(format!("fiber fit did not converge (rms {:.3e})", report.fit.rms)))
    }
}

/// Parameters of a synthetic reflection map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSpec {
    pub fiber: FiberModel,
    pub offsets: Offsets,
    pub n_hwp: usize,
    pub n_qwp: usize,
    pub span_rad: f64,
}

pub fn cmd_heatmap(ctx: &Context, spec: &HeatmapSpec) -> Result<Outcome, CliError> {
    let started = unix_now();
    let (h, q) = HeatMap::grid(spec.n_hwp, spec.n_qwp, spec.span_rad);
    let map = simulate_reflection_heatmap(&spec.fiber, &spec.offsets, &h, &q);
    let mut buf = Vec::new();
    write_heatmap_csv(&map, &mut buf)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("heatmap.csv", &buf)?;
    let manifest = out.finish("heatmap", &ctx.command_line, ctx.config(), started)?;
    Ok(Outcome {
        stdout: format!("{} points written to {}\n", map.len(), ctx.out.join("heatmap.csv").display()),
        warnings: Vec::new(),
        manifest,
    })
}

// ---------------------------------------------------------------- ramsey

#[derive(Serialize)]
struct RamseyRow {
    qubit: RamseyQubit,
    hold_us: f64,
    visibility: f64,
    visibility_err: f64,
    fit: f64,
}

fn tau_text(r: &RamseyResult) -> String {
    use ionphoton::tomography::RamseyFit;
    match r.fit {
        RamseyFit::Decaying { tau, tau_err, .. } => format!("{tau:.1} +- {tau_err:.1} us"),
        RamseyFit::Unbounded { tau_lower } => format!("unbounded (> {tau_lower:.3e} us)"),
    }
}

/// Both qubits with the configured dephasing model.
pub fn ramsey_pair(cfg: &NodeConfig) -> Result<(RamseyResult, RamseyResult), CliError> {
    let base = &cfg.ramsey;
    let run = |qubit| {
        let c = ionphoton::sim::RamseyConfig { qubit, ..base.clone() };
        simulate_ramsey(&c, &cfg.experiment.dephasing)
    };
    Ok((run(RamseyQubit::Zeeman)?, run(RamseyQubit::Hyperfine)?))
}

pub fn cmd_ramsey(ctx: &Context) -> Result<Outcome, CliError> {
    let started = unix_now();
    let cfg = ctx.config();
    let (z, h) = ramsey_pair(cfg)?;
    let mut text = String::new();
    let _ = writeln!(text, "zeeman_tau = {}", tau_text(&z));
    let _ = writeln!(text, "hyperfine_tau = {}", tau_text(&h));
    let mut warnings = Vec::new();
    for r in [&z, &h] {
        if r.fit.tau().is_none() {
            warnings.push(format!("{:?} visibility shows no decay over the hold times; tau is unbounded", r.qubit));
        }
    }
    let fit_at = |r: &RamseyResult, t: f64| r.fit.tau().map_or(1.0, |tau| (-t / tau).exp());
    let rows: Vec<RamseyRow> = [&z, &h]
        .iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| RamseyRow {
                qubit: r.qubit,
                hold_us: p.hold_us,
                visibility: p.visibility,
                visibility_err: p.visibility_err,
                fit: fit_at(r, p.hold_us),
            })
        })
        .collect();
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("ramsey.txt", text.as_bytes())?;
    out.write("ramsey.json", &json_bytes(&[&z, &h])?)?;
    if ctx.svg {
        let mut series = Vec::new();
        for r in [&z, &h] {
            series.push(svg::Series {
                name: format!("{:?}", r.qubit),
                points: r.points.iter().map(|p| (p.hold_us, p.visibility)).collect(),
                markers: true,
            });
            series.push(svg::Series {
                name: format!("{:?} fit", r.qubit),
                points: r.points.iter().map(|p| (p.hold_us, fit_at(r, p.hold_us))).collect(),
                markers: false,
            });
        }
        out.write("ramsey.svg", svg::line_chart("Ramsey visibility", "hold time (us)", "visibility", &series).as_bytes())?;
    }
    out.write("ramsey.csv", &csv_bytes(rows)?)?;
    let manifest = out.finish("ramsey", &ctx.command_line, cfg, started)?;
    Ok(Outcome {
        stdout: text,
        warnings,
        manifest,
    })
}

// ---------------------------------------------------------------- verify

pub fn cmd_verify(dir: &Path) -> Result<String, CliError> {
    let m = RunManifest::load(dir)?;
    let problems = m.verify(dir);
    if problems.is_empty() {
        Ok(format!("{}: {} files match, config hash {}\n", dir.display(), m.outputs.len(), m.config_hash))
    } else {
        Err(CliError::validation(problems.join("\n")))
    }
}
