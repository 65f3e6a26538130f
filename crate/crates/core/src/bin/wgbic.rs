use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use waveguide_bic::cli::{self, Backend, RunConfig};
use waveguide_bic::{Error, Result};

#[derive(Parser)]
#[command(name = "wgbic", version, about = "Bound-state generation on a two-qubit waveguide")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one configuration; writes timeseries.csv and summary.json.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Include wall time in the summary (breaks byte-identical output).
        #[arg(long)]
        timing: bool,
    },
    /// P_BIC over a grid of bandwidths and delays at resonance; writes grid.csv.
    SweepGrid {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.5, 3.5])]
        gamma_band_taus: Vec<f64>,
        /// Delays as γτ; converted to the nearest number of bins.
        #[arg(long, value_delimiter = ',', conflicts_with = "ells")]
        gamma_taus: Vec<f64>,
        /// Delays as numbers of bins.
        #[arg(long, value_delimiter = ',')]
        ells: Vec<usize>,
        /// Feed the input symmetry opposite to the bound-state parity.
        #[arg(long)]
        wrong_parity: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Final Bell population against the pre-switch detuning; writes detuning.csv.
    SweepDetuning {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma_tau: f64,
        #[arg(long, default_value_t = 2.513)]
        gamma_band_tau: f64,
        /// Detunings in units of γ; the ideal-switch row is always added.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 1000.0])]
        delta_omegas: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Time to 90% of the asymptotic P_BIC at the optimal bandwidth; writes t90.csv.
    T90 {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [25usize, 50, 100, 200])]
        ells: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Closed-form probabilities and optimal bandwidth as JSON on stdout.
    Analytic {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 4.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.625, conflicts_with = "gamma_band_tau")]
        gamma_band: f64,
        #[arg(long)]
        gamma_band_tau: Option<f64>,
    },
    /// Run the MPS engine and the exact oracle side by side.
    OracleCheck {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value config file; flags below override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set ell=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, default_value = "mps")]
    backend: Backend,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run { cfg, timing } => {
            let cfg = cfg_with_backend(&cfg)?;
            let report = cli::cmd_run(&cfg.0, cfg.1, timing)?;
            let s = &report.summary;
            println!(
                "p_bic_inferred {} p_bell {} trapped_n {} (step {})",
                s.p_bic_inferred, s.p_bell, s.trapped_n, s.final_step
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Cmd::SweepGrid { cfg, gamma_band_taus, gamma_taus, ells, wrong_parity, jobs } => {
            let (cfg, backend) = cfg_with_backend(&cfg)?;
            cfg.params.validate()?;
            let ells = if !ells.is_empty() {
                ells
            } else {
                let gts = if gamma_taus.is_empty() { vec![1.0, 2.0, 4.0] } else { gamma_taus };
                gts.iter().map(|&g| cli::ell_for_gamma_tau(&cfg.params, g)).collect::<Result<_>>()?
            };
            let rows = cli::sweep_grid(&cfg.params, &gamma_band_taus, &ells, wrong_parity, backend, jobs)?;
            let csv = cli::grid_csv(&rows);
            print!("{csv}");
            cli::write_output(&cfg.output_dir, "grid.csv", &csv)?;
        }
        Cmd::SweepDetuning { cfg, gamma_tau, gamma_band_tau, delta_omegas, jobs } => {
            let (cfg, backend) = cfg_with_backend(&cfg)?;
            let scan = cli::sweep_detuning(&cfg.params, gamma_tau, gamma_band_tau, &delta_omegas, backend, jobs)?;
            let csv = cli::detuning_csv(&scan.rows);
            print!("{csv}");
            if let (Some(d), Some(v)) = (scan.best_delta_omega, scan.best_p_bell) {
                println!("max p_bell {} at delta_omega {} (ideal switch {})", cli::fmt_sig(v, 6), d, cli::fmt_sig(scan.ideal_switch, 6));
            }
            cli::write_output(&cfg.output_dir, "detuning.csv", &csv)?;
            cli::write_output(&cfg.output_dir, "detuning_summary.json", &cli::json_string(&scan)?)?;
        }
        Cmd::T90 { cfg, ells, jobs } => {
            let (cfg, backend) = cfg_with_backend(&cfg)?;
            let report = cli::t90_scan(&cfg.params, &ells, backend, jobs)?;
            let csv = cli::t90_csv(&report.rows);
            print!("{csv}");
            if let Some(f) = report.fit {
                println!(
                    "fit t90 = {} * gamma_tau + {}  (R^2 = {})",
                    cli::fmt_sig(f.slope, 6),
                    cli::fmt_sig(f.intercept, 6),
                    cli::fmt_sig(f.r2, 6)
                );
            }
            cli::write_output(&cfg.output_dir, "t90.csv", &csv)?;
            cli::write_output(&cfg.output_dir, "t90_fit.json", &cli::json_string(&report)?)?;
        }
        Cmd::Analytic { gamma, tau, gamma_band, gamma_band_tau } => {
            let gb = match gamma_band_tau {
                Some(u) if tau > 0.0 => u / tau,
                Some(_) => 0.0,
                None => gamma_band,
            };
            print!("{}", cli::analytic_json(gb, gamma, tau)?);
        }
        Cmd::OracleCheck { cfg } => {
            let (cfg, _) = cfg_with_backend(&cfg)?;
            let check = cli::oracle_check(&cfg.params)?;
            println!(
                "fidelity {:.12} max observable deviation {:.3e} discarded {:.3e}",
                check.fidelity, check.max_observable_deviation, check.cumulative_discarded
            );
            cli::write_output(&cfg.output_dir, "oracle_check.json", &cli::json_string(&check)?)?;
        }
    }
    Ok(())
}

fn cfg_with_backend(args: &ConfigArgs) -> Result<(RunConfig, Backend)> {
    Ok((args.resolve()?, args.backend))
}
