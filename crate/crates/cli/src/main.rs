//! `ris-mcrb`: bound and impedance sweeps for RIS-aided channel estimation
//! under unmodelled mutual coupling. Results go to CSV, run metadata to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ris_mcrb_core::experiment::{
    self, csv_string, dump_complex_matrix, dump_real_matrix, run_impedance_sweep, write_csv,
    LinkModel, SweepKind, SweepRequest, IMPEDANCE_COLUMNS,
};
use ris_mcrb_core::{load_scenario, Error, ErrorClass, Scenario};

#[derive(Parser, Debug)]
#[command(name = "ris-mcrb", version, about = "Misspecified Cramér-Rao bounds for RIS channel estimation under mutual coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// |Z| between two side-by-side element dipoles versus their distance.
    ImpedanceSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_SPACINGS)]
        distances_over_lambda: Vec<f64>,
    },
    /// Lower bound, CRLB and optional Monte-Carlo RMSE versus transmit power.
    LbVsPower {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = experiment::DEFAULT_POWERS_DBM)]
        powers_dbm: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_POWER_SPACINGS)]
        spacings_over_lambda: Vec<f64>,
        /// Monte-Carlo trials per power point; 0 skips the RMSE column.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        /// Estimate with the coupling-aware model.
        #[arg(long)]
        matched: bool,
    },
    /// Deterministic bias norm versus element spacing for several RIS sizes.
    BiasVsSpacing {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_SPACINGS)]
        spacings_over_lambda: Vec<f64>,
        /// Comma-separated sizes such as `4x4,8x8`.
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_values_t = default_sizes())]
        sizes: Vec<Size>,
    },
    /// Mismatch-free CRLB versus element spacing for several RIS sizes.
    CrlbVsSpacing {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_SPACINGS)]
        spacings_over_lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_values_t = default_sizes())]
        sizes: Vec<Size>,
        #[arg(long, allow_hyphen_values = true, default_value_t = experiment::DEFAULT_CRLB_POWER_DBM)]
        power_dbm: f64,
    },
    /// Monte-Carlo RMSE of the ML estimate next to the bounds.
    McRmse {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = experiment::DEFAULT_POWERS_DBM)]
        powers_dbm: Vec<f64>,
        /// Defaults to the scenario's spacing.
        #[arg(long, value_delimiter = ',')]
        spacings_over_lambda: Vec<f64>,
        #[arg(long, default_value_t = experiment::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        matched: bool,
        /// Trials without observation noise.
        #[arg(long)]
        noiseless: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file; missing keys take the default scenario's values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrate every element pair instead of once per grid offset.
    #[arg(long)]
    no_cache: bool,
    /// Write B and D of every spacing as CSV into this directory.
    #[arg(long)]
    dump_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Size(usize, usize);

impl std::fmt::Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

fn default_sizes() -> Vec<Size> {
    experiment::DEFAULT_SIZES.iter().map(|&(a, b)| Size(a, b)).collect()
}

fn parse_size(s: &str) -> Result<Size, String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected N1xN2, got `{s}`"))?;
    let n1 = a.trim().parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let n2 = b.trim().parse().map_err(|_| format!("bad column count in `{s}`"))?;
    Ok(Size(n1, n2))
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(err.class()))
        }
    }
}

fn scenario(common: &Common) -> Result<Scenario, Error> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let scenario = load_scenario(&text).map_err(|e| match &common.config {
        Some(path) => e.context(format!("config {}", path.display())),
        None => e,
    })?;
    Ok(match common.seed {
        Some(seed) => scenario.with_seed(seed),
        None => scenario,
    })
}

fn output(common: &Common, header: &[&str], records: &[Vec<String>]) -> Result<(), Error> {
    match &common.out {
        Some(path) => write_csv(path, header, records),
        None => {
            let text = csv_string(header, records);
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn dump_models(dir: &Path, scenario: &Scenario, sizes: &[(usize, usize)], spacings: &[f64], cache: bool) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for &(n1, n2) in sizes {
        for &d in spacings {
            let s = scenario.with_size(n1, n2)?.with_spacing(d)?;
            let link = LinkModel::build(&s, cache)?;
            let tag = format!("{n1}x{n2}_d{d}");
            dump_complex_matrix(&link.b_true, &dir.join(format!("b_true_{tag}.csv")))?;
            dump_complex_matrix(&link.b_est, &dir.join(format!("b_est_{tag}.csv")))?;
            dump_real_matrix(&link.d_true.d, &dir.join(format!("d_true_{tag}.csv")))?;
            dump_real_matrix(&link.d_est.d, &dir.join(format!("d_est_{tag}.csv")))?;
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), Error> {
    if let Command::ImpedanceSweep {
        common,
        distances_over_lambda,
    } = &command
    {
        let scenario = scenario(common)?;
        let sweep = run_impedance_sweep(&scenario, distances_over_lambda)?;
        return output(common, &IMPEDANCE_COLUMNS, &sweep.records());
    }

    let (common, request) = match command {
        Command::LbVsPower {
            common,
            powers_dbm,
            spacings_over_lambda,
            trials,
            matched,
        } => {
            let mut r = SweepRequest::new(SweepKind::LbVsPower, scenario(&common)?);
            r.power_grid = powers_dbm;
            r.spacing_grid = spacings_over_lambda;
            r.trials = trials;
            r.matched = matched;
            (common, r)
        }
        Command::BiasVsSpacing {
            common,
            spacings_over_lambda,
            sizes,
        } => {
            let mut r = SweepRequest::new(SweepKind::BiasVsSpacing, scenario(&common)?);
            r.spacing_grid = spacings_over_lambda;
            r.sizes = sizes.iter().map(|s| (s.0, s.1)).collect();
            (common, r)
        }
        Command::CrlbVsSpacing {
            common,
            spacings_over_lambda,
            sizes,
            power_dbm,
        } => {
            let mut r = SweepRequest::new(SweepKind::CrlbVsSpacing, scenario(&common)?);
            r.spacing_grid = spacings_over_lambda;
            r.sizes = sizes.iter().map(|s| (s.0, s.1)).collect();
            r.power_grid = vec![power_dbm];
            (common, r)
        }
        Command::McRmse {
            common,
            powers_dbm,
            spacings_over_lambda,
            trials,
            matched,
            noiseless,
        } => {
            let mut r = SweepRequest::new(SweepKind::McRmse, scenario(&common)?);
            r.power_grid = powers_dbm;
            if !spacings_over_lambda.is_empty() {
                r.spacing_grid = spacings_over_lambda;
            }
            r.trials = trials;
            r.matched = matched;
            r.noiseless = noiseless;
            (common, r)
        }
        Command::ImpedanceSweep { .. } => unreachable!(),
    };
    let mut request = request;
    request.use_impedance_cache = !common.no_cache;
    request.validate()?;

    if let Some(dir) = &common.dump_model {
        dump_models(dir, &request.scenario, &request.sizes, &request.spacing_grid, request.use_impedance_cache)?;
    }
    let result = experiment::run(&request)?;
    let meta = &result.metadata;
    eprintln!(
        "ris-mcrb {} seed={} rows={} elapsed={:.3}s",
        meta.code_version,
        meta.seed,
        result.rows.len(),
        meta.wall_clock.as_secs_f64()
    );
    output(&common, &result.header(), &result.records())
}
