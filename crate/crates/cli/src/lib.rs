//! `hkt-ccd` command line: campaign configs in, plot-ready CSV and JSON out.

pub mod artifacts;
mod commands;
pub mod config;
pub mod error;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{CampaignConfig, LawName, ModeName};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hkt-ccd", version, about = "Hydrokinetic turbine control co-design campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cp versus tip speed ratio of the configured blade
    BemCurve(Common),
    /// Closed-loop (or freewheeling) response of the configured blade
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        law: Option<LawArg>,
        /// feedback gain; defaults to the blade's optimal-TSR gain
        #[arg(long)]
        gain: Option<f64>,
        /// rad/s
        #[arg(long)]
        initial_omega: Option<f64>,
        /// feed the law through the noisy, filtered speed sensor
        #[arg(long)]
        noise: bool,
    },
    /// Open-loop optimal control of the fixed blade
    Oloc(Common),
    /// Co-design of blade and controller for each configured mode
    Ccd(Common),
    /// All three modes plus the baseline-blade open-loop optimum
    Compare(Common),
    /// Robustness of the co-designed controllers under inflow uncertainty
    Sensitivity(Common),
    /// Table and figure data from earlier outputs of the same config
    Report(Common),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LawArg {
    Quadratic,
    Linear,
    Freewheel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Oloc,
    Quadratic,
    Linear,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Args)]
struct Common {
    /// TOML campaign config
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1 = step inflow, 2 = sinusoidal inflow
    #[arg(long)]
    scenario: Option<u8>,
    /// generator torque limit, N m
    #[arg(long, conflicts_with = "unconstrained")]
    constraint: Option<f64>,
    /// drop any torque limit from the config
    #[arg(long)]
    unconstrained: bool,
    #[arg(long)]
    name: Option<String>,
    /// output directory (relative to $HKT_CCD_OUT)
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// s
    #[arg(long)]
    horizon: Option<f64>,
    /// s
    #[arg(long)]
    dt: Option<f64>,
    /// `baseline` or a geometry CSV
    #[arg(long)]
    geometry: Option<String>,
    /// `default` or a polar CSV
    #[arg(long)]
    polar: Option<String>,
    /// repeat to select several
    #[arg(long = "mode", value_enum)]
    modes: Vec<ModeArg>,
    #[arg(long)]
    freeze_geometry: bool,
    #[arg(long)]
    segments: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<CampaignConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => CampaignConfig::from_path(p)?,
            None => CampaignConfig::default(),
        };
        if let Some(s) = self.scenario {
            c.scenario = s;
        }
        if let Some(u) = self.constraint {
            c.u_max = Some(u);
        }
        if self.unconstrained {
            c.u_max = None;
        }
        if let Some(n) = &self.name {
            c.name = n.clone();
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(h) = self.horizon {
            c.horizon = Some(h);
        }
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        if let Some(g) = &self.geometry {
            c.geometry = g.clone();
        }
        if let Some(p) = &self.polar {
            c.polar = p.clone();
        }
        if !self.modes.is_empty() {
            c.modes = self
                .modes
                .iter()
                .map(|m| match m {
                    ModeArg::Oloc => ModeName::Oloc,
                    ModeArg::Quadratic => ModeName::Quadratic,
                    ModeArg::Linear => ModeName::Linear,
                })
                .collect();
        }
        if self.freeze_geometry {
            c.freeze_geometry = true;
        }
        if let Some(n) = self.segments {
            c.n_segments = n;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs one invocation and returns the process exit code. Failures print a
/// single JSON record on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            let err = CliError::Config(first.to_string());
            eprintln!("{}", err.record());
            return err.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::BemCurve(c) => commands::bem_curve(&c.resolve()?),
        Command::Simulate { common, law, gain, initial_omega, noise } => {
            let mut c = common.resolve()?;
            if let Some(l) = law {
                c.simulate.law = match l {
                    LawArg::Quadratic => LawName::Quadratic,
                    LawArg::Linear => LawName::Linear,
                    LawArg::Freewheel => LawName::Freewheel,
                };
            }
            if gain.is_some() {
                c.simulate.gain = gain;
            }
            if initial_omega.is_some() {
                c.simulate.initial_omega = initial_omega;
            }
            c.simulate.sensor_noise |= noise;
            c.validate()?;
            commands::simulate(&c)
        }
        Command::Oloc(c) => commands::oloc(&c.resolve()?),
        Command::Ccd(c) => commands::ccd(&c.resolve()?),
        Command::Compare(c) => commands::compare(&c.resolve()?),
        Command::Sensitivity(c) => commands::sensitivity(&c.resolve()?),
        Command::Report(c) => report::report(&c.resolve()?),
    }
}
