//! Parameter sweeps over transmit power, element spacing and RIS size, and
//! their CSV output.
//!
//! Randomness: the RIS load sequence of every grid point comes from the
//! scenario's `"loads"` substream, so all points of a sweep with the same
//! RIS size share one load sequence. Monte-Carlo noise for transmit power
//! `p` dBm and trial `t` comes from substream `"noise/<p>/<t>"`; the label is
//! the power value itself, so adding or removing grid points never changes
//! the noise seen by the others.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bounds::{dbm_to_watts, BoundReport, MismatchAnalysis};
use crate::channel::{model_matrix, realify, sample_loads, ChannelVector, RealifiedModel, RisLoadSequence};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Radiator};
use crate::impedance::{
    coupling_vector, grid_impedance_matrix, impedance_matrix, mutual_impedance, ImpedanceSet,
};
use crate::scenario::Scenario;

pub const DEFAULT_POWERS_DBM: [f64; 10] = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];
pub const DEFAULT_POWER_SPACINGS: [f64; 3] = [0.02, 0.1, 0.5];
pub const DEFAULT_SPACINGS: [f64; 10] = [0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.5];
pub const DEFAULT_SIZES: [(usize, usize); 3] = [(4, 4), (8, 8), (12, 12)];
pub const DEFAULT_CRLB_POWER_DBM: f64 = 40.0;
pub const DEFAULT_TRIALS: usize = 500;

/// Impedances, loads and both realified models of one scenario.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub impedances: ImpedanceSet,
    pub loads: RisLoadSequence,
    pub b_true: DMatrix<Complex64>,
    pub b_est: DMatrix<Complex64>,
    pub d_true: RealifiedModel,
    pub d_est: RealifiedModel,
    pub x_true: ChannelVector,
    /// Worst reciprocal condition estimate of `Z_SS + Z_RIS,g` over `g`.
    pub min_rcond: f64,
}

/// `z_ST`, `z_RS` and `Z_SS` for a scenario. With `use_cache` the element
/// matrix is integrated once per distinct grid offset.
pub fn compute_impedances(scenario: &Scenario, use_cache: bool) -> Result<ImpedanceSet> {
    let constants = &scenario.constants;
    let quad = &scenario.quadrature;
    let elements = scenario.ris_elements();
    let (z_ss_self, z_ss_mutual) = if use_cache {
        grid_impedance_matrix(
            &scenario.ris,
            scenario.element_half_length,
            scenario.element_wire_radius,
            constants,
            quad,
        )?
    } else {
        impedance_matrix(&elements, constants, quad)?
    };
    let z_st = coupling_vector(&scenario.tx, &elements, constants, quad)
        .map_err(|e| e.context("transmitter coupling"))?;
    let z_rs = coupling_vector(&scenario.rx, &elements, constants, quad)
        .map_err(|e| e.context("receiver coupling"))?;
    Ok(ImpedanceSet {
        z_st,
        z_rs,
        z_ss_self,
        z_ss_mutual,
    })
}

impl LinkModel {
    pub fn build(scenario: &Scenario, use_cache: bool) -> Result<Self> {
        let impedances = compute_impedances(scenario, use_cache)?;
        Self::from_impedances(scenario, impedances)
    }

    pub fn from_impedances(scenario: &Scenario, impedances: ImpedanceSet) -> Result<Self> {
        let loads = sample_loads(scenario)?;
        let truth = model_matrix(&impedances, &loads, true)?;
        let est = model_matrix(&impedances, &loads, false)?;
        Ok(Self {
            d_true: realify(&truth.b, true),
            d_est: realify(&est.b, false),
            x_true: ChannelVector::from_complex(&impedances.z_st),
            min_rcond: truth.min_rcond.min(est.min_rcond),
            b_true: truth.b,
            b_est: est.b,
            impedances,
            loads,
        })
    }

    /// Bound analysis with the coupling-unaware model, or the true model when
    /// `matched`.
    pub fn analysis(&self, matched: bool) -> Result<MismatchAnalysis> {
        let d_est = if matched { &self.d_true } else { &self.d_est };
        MismatchAnalysis::new(d_est, &self.d_true, &self.x_true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    LbVsPower,
    BiasVsSpacing,
    CrlbVsSpacing,
    McRmse,
}

impl SweepKind {
    pub fn columns(&self, with_rmse: bool) -> &'static [&'static str] {
        match self {
            SweepKind::LbVsPower | SweepKind::McRmse => {
                if with_rmse {
                    &["p_t_dbm", "d_over_lambda", "tr_mcrb", "tr_bias", "lb", "crlb", "rmse"]
                } else {
                    &["p_t_dbm", "d_over_lambda", "tr_mcrb", "tr_bias", "lb", "crlb"]
                }
            }
            SweepKind::BiasVsSpacing => &["d_over_lambda", "n1", "n2", "sqrt_tr_bias"],
            SweepKind::CrlbVsSpacing => &["d_over_lambda", "n1", "n2", "crlb"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub kind: SweepKind,
    /// Transmit powers in dBm.
    pub power_grid: Vec<f64>,
    /// Element spacings in wavelengths.
    pub spacing_grid: Vec<f64>,
    pub sizes: Vec<(usize, usize)>,
    /// Monte-Carlo trials per power point; zero skips the RMSE.
    pub trials: usize,
    pub scenario: Scenario,
    /// Estimate with the true model instead of the coupling-unaware one.
    pub matched: bool,
    /// Run Monte-Carlo trials without observation noise.
    pub noiseless: bool,
    pub use_impedance_cache: bool,
}

impl SweepRequest {
    /// Request with the reference grids of `kind`.
    pub fn new(kind: SweepKind, scenario: Scenario) -> Self {
        let size = (scenario.ris.n1, scenario.ris.n2);
        let (power_grid, spacing_grid, sizes, trials) = match kind {
            SweepKind::LbVsPower => (DEFAULT_POWERS_DBM.to_vec(), DEFAULT_POWER_SPACINGS.to_vec(), vec![size], 0),
            SweepKind::McRmse => (DEFAULT_POWERS_DBM.to_vec(), vec![scenario.spacing_over_lambda], vec![size], DEFAULT_TRIALS),
            SweepKind::BiasVsSpacing => (vec![DEFAULT_CRLB_POWER_DBM], DEFAULT_SPACINGS.to_vec(), DEFAULT_SIZES.to_vec(), 0),
            SweepKind::CrlbVsSpacing => (vec![DEFAULT_CRLB_POWER_DBM], DEFAULT_SPACINGS.to_vec(), DEFAULT_SIZES.to_vec(), 0),
        };
        Self {
            kind,
            power_grid,
            spacing_grid,
            sizes,
            trials,
            scenario,
            matched: false,
            noiseless: false,
            use_impedance_cache: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        strictly_increasing("power grid", &self.power_grid)?;
        strictly_increasing("spacing grid", &self.spacing_grid)?;
        if self.sizes.is_empty() {
            return Err(Error::InvalidArgument("size list is empty".into()));
        }
        if let Some((n1, n2)) = self.sizes.iter().find(|(a, b)| *a == 0 || *b == 0) {
            return Err(Error::InvalidArgument(format!("invalid RIS size {n1}x{n2}")));
        }
        if self.kind == SweepKind::McRmse && self.trials == 0 {
            return Err(Error::InvalidArgument("mc-rmse needs at least one trial".into()));
        }
        if self.spacing_grid.iter().any(|d| *d <= 0.0) {
            return Err(Error::InvalidArgument("spacings must be positive".into()));
        }
        Ok(())
    }
}

fn strictly_increasing(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has non-finite values")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub p_t_dbm: f64,
    pub d_over_lambda: f64,
    pub n1: usize,
    pub n2: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone)]
pub struct SweepMetadata {
    pub scenario_config: String,
    pub seed: u64,
    pub code_version: &'static str,
    pub wall_clock: Duration,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub with_rmse: bool,
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn header(&self) -> Vec<&'static str> {
        self.kind.columns(self.with_rmse).to_vec()
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|row| {
                let r = &row.report;
                match self.kind {
                    SweepKind::LbVsPower | SweepKind::McRmse => {
                        let mut rec = vec![
                            fmt_plain(row.p_t_dbm),
                            fmt_plain(row.d_over_lambda),
                            fmt_float(r.tr_mcrb),
                            fmt_float(r.tr_bias),
                            fmt_float(r.lb),
                            fmt_float(r.crlb),
                        ];
                        if self.with_rmse {
                            rec.push(r.rmse.map(fmt_float).unwrap_or_default());
                        }
                        rec
                    }
                    SweepKind::BiasVsSpacing => vec![
                        fmt_plain(row.d_over_lambda),
                        row.n1.to_string(),
                        row.n2.to_string(),
                        fmt_float(r.sqrt_tr_bias()),
                    ],
                    SweepKind::CrlbVsSpacing => vec![
                        fmt_plain(row.d_over_lambda),
                        row.n1.to_string(),
                        row.n2.to_string(),
                        fmt_float(r.crlb),
                    ],
                }
            })
            .collect()
    }
}

/// Shortest decimal that parses back to the same `f64`, in exponent form.
pub fn fmt_float(v: f64) -> String {
    format!("{v:e}")
}

/// Shortest round-trip decimal for grid coordinates.
pub fn fmt_plain(v: f64) -> String {
    format!("{v}")
}

pub fn run(request: &SweepRequest) -> Result<SweepResult> {
    match request.kind {
        SweepKind::LbVsPower => run_lb_vs_power(request),
        SweepKind::BiasVsSpacing => run_bias_vs_spacing(request),
        SweepKind::CrlbVsSpacing => run_crlb_vs_spacing(request),
        SweepKind::McRmse => run_mc_rmse(request),
    }
}

fn expect_kind(request: &SweepRequest, kind: SweepKind) -> Result<()> {
    if request.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "request kind {:?} passed to the {kind:?} sweep",
            request.kind
        )));
    }
    request.validate()
}

fn metadata(request: &SweepRequest, started: Instant) -> SweepMetadata {
    SweepMetadata {
        scenario_config: request.scenario.to_config_text(),
        seed: request.scenario.rng_seed,
        code_version: env!("CARGO_PKG_VERSION"),
        wall_clock: started.elapsed(),
    }
}

fn point_error(err: Error, what: String) -> Error {
    err.context(what)
}

/// Per spacing, bounds at every power; impedances and models are built once
/// per spacing and reused across the power grid.
pub fn run_lb_vs_power(request: &SweepRequest) -> Result<SweepResult> {
    expect_kind(request, SweepKind::LbVsPower)?;
    power_sweep(request)
}

/// Same table as [`run_lb_vs_power`] with the Monte-Carlo RMSE column always
/// present.
pub fn run_mc_rmse(request: &SweepRequest) -> Result<SweepResult> {
    expect_kind(request, SweepKind::McRmse)?;
    power_sweep(request)
}

fn power_sweep(request: &SweepRequest) -> Result<SweepResult> {
    let started = Instant::now();
    let (n1, n2) = request.sizes[0];
    let base = request.scenario.with_size(n1, n2)?;
    let sigma2 = base.sigma2();

    let per_spacing: Vec<Vec<SweepRow>> = request
        .spacing_grid
        .par_iter()
        .map(|&d| {
            let scenario = base.with_spacing(d)?;
            let link = LinkModel::build(&scenario, request.use_impedance_cache)
                .map_err(|e| point_error(e, format!("spacing {d} lambda")))?;
            let analysis = link
                .analysis(request.matched)
                .map_err(|e| point_error(e, format!("spacing {d} lambda")))?;
            request
                .power_grid
                .iter()
                .map(|&p_dbm| {
                    let p_t = dbm_to_watts(p_dbm);
                    let mut report = analysis.report(p_t, sigma2)?;
                    if request.trials > 0 {
                        let noise = (!request.noiseless).then_some(sigma2);
                        report.rmse = Some(
                            analysis
                                .mc_rmse(p_t, noise, request.trials, scenario.rng_seed, &fmt_plain(p_dbm))
                                .map_err(|e| point_error(e, format!("power {p_dbm} dBm")))?,
                        );
                    }
                    Ok(SweepRow {
                        p_t_dbm: p_dbm,
                        d_over_lambda: d,
                        n1,
                        n2,
                        report,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    // Power-major order, spacings within each power.
    let mut rows = Vec::with_capacity(request.power_grid.len() * request.spacing_grid.len());
    for pi in 0..request.power_grid.len() {
        for spacing_rows in &per_spacing {
            rows.push(spacing_rows[pi]);
        }
    }
    Ok(SweepResult {
        kind: request.kind,
        with_rmse: request.trials > 0,
        rows,
        metadata: metadata(request, started),
    })
}

/// Size-major grid of `(size, spacing)` points, each with its own models.
fn spacing_sweep<F>(request: &SweepRequest, p_dbm: f64, matched: bool, started: Instant, finish: F) -> Result<SweepResult>
where
    F: Fn(&MismatchAnalysis, f64, f64) -> Result<BoundReport> + Sync,
{
    let points: Vec<((usize, usize), f64)> = request
        .sizes
        .iter()
        .flat_map(|&size| request.spacing_grid.iter().map(move |&d| (size, d)))
        .collect();
    let sigma2 = request.scenario.sigma2();
    let p_t = dbm_to_watts(p_dbm);
    let rows = points
        .par_iter()
        .map(|&((n1, n2), d)| {
            let label = format!("{n1}x{n2} at spacing {d} lambda");
            let scenario = request
                .scenario
                .with_size(n1, n2)
                .and_then(|s| s.with_spacing(d))
                .map_err(|e| point_error(e, label.clone()))?;
            let link = LinkModel::build(&scenario, request.use_impedance_cache)
                .map_err(|e| point_error(e, label.clone()))?;
            let analysis = link.analysis(matched).map_err(|e| point_error(e, label.clone()))?;
            let report = finish(&analysis, p_t, sigma2).map_err(|e| point_error(e, label))?;
            Ok(SweepRow {
                p_t_dbm: p_dbm,
                d_over_lambda: d,
                n1,
                n2,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: request.kind,
        with_rmse: false,
        rows,
        metadata: metadata(request, started),
    })
}

/// `sqrt(Tr(Bias))` of the coupling-unaware estimate per `(size, spacing)`.
pub fn run_bias_vs_spacing(request: &SweepRequest) -> Result<SweepResult> {
    expect_kind(request, SweepKind::BiasVsSpacing)?;
    let started = Instant::now();
    spacing_sweep(request, request.power_grid[0], false, started, |a, p_t, sigma2| {
        a.report(p_t, sigma2)
    })
}

/// Matched-model CRLB per `(size, spacing)` at the first power of the grid.
pub fn run_crlb_vs_spacing(request: &SweepRequest) -> Result<SweepResult> {
    expect_kind(request, SweepKind::CrlbVsSpacing)?;
    let started = Instant::now();
    spacing_sweep(request, request.power_grid[0], true, started, |a, p_t, sigma2| {
        a.report(p_t, sigma2)
    })
}

/// `|Z_qp|` between two side-by-side wires of the scenario's template at
/// each horizontal distance (in wavelengths).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSweep {
    pub rows: Vec<(f64, Complex64)>,
}

pub const IMPEDANCE_COLUMNS: [&str; 4] = ["d_over_lambda", "re_z_ohm", "im_z_ohm", "abs_z_ohm"];

impl ImpedanceSweep {
    pub fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|(d, z)| vec![fmt_plain(*d), fmt_float(z.re), fmt_float(z.im), fmt_float(z.norm())])
            .collect()
    }
}

pub fn run_impedance_sweep(scenario: &Scenario, distances_over_lambda: &[f64]) -> Result<ImpedanceSweep> {
    if distances_over_lambda.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidArgument("distances must be positive".into()));
    }
    let lambda = scenario.constants.wavelength;
    let p = Radiator::new(Point3::zeros(), scenario.element_half_length, scenario.element_wire_radius)?;
    let rows = distances_over_lambda
        .par_iter()
        .map(|&d| {
            let q = p.moved_to(Point3::new(d * lambda, 0.0, 0.0));
            mutual_impedance(&p, &q, &scenario.constants, &scenario.quadrature)
                .map(|z| (d, z))
                .map_err(|e| e.context(format!("distance {d} lambda")))
        })
        .collect::<Result<_>>()?;
    Ok(ImpedanceSweep { rows })
}

/// Writes a header row followed by `records`.
pub fn write_csv(path: &Path, header: &[&str], records: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(header).map_err(csv_err)?;
    for rec in records {
        writer.write_record(rec).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Same bytes that [`write_csv`] would put in a file.
pub fn csv_string(header: &[&str], records: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for rec in records {
        let _ = writeln!(out, "{}", rec.join(","));
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_csv(path, &result.header(), &result.records())
}

/// Complex matrix as CSV, row-major with a `re,im` column pair per entry.
pub fn dump_complex_matrix(m: &DMatrix<Complex64>, path: &Path) -> Result<()> {
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|j| [format!("re_{j}"), format!("im_{j}")])
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let records: Vec<Vec<String>> = m
        .row_iter()
        .map(|row| row.iter().flat_map(|z| [fmt_float(z.re), fmt_float(z.im)]).collect())
        .collect();
    write_csv(path, &header_refs, &records)
}

/// Real matrix as CSV, row-major.
pub fn dump_real_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let records: Vec<Vec<String>> = m
        .row_iter()
        .map(|row| row.iter().map(|v| fmt_float(*v)).collect())
        .collect();
    write_csv(path, &header_refs, &records)
}
