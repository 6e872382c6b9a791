use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfmimo::harness::{self, SchemeSpec, SweepAxis};
use cfmimo::{verify, QuantModel, SystemConfig};

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Limited-feedback cell-free massive MIMO downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every scheme at the configured SNR.
    SingleRun(Common),
    /// Sweep the transmit SNR in dB.
    SweepSnr(Sweep),
    /// Sweep the per-AP feedback budget in bits.
    SweepBits(Sweep),
    /// Sweep the number of APs.
    SweepAps(Sweep),
    /// Sweep the number of UEs.
    SweepUes(Sweep),
    /// Sweep the per-AP stream cap.
    SweepStreams(Sweep),
    /// Run the invariant and oracle checks.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; desk-scale defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated `association:allocation` pairs, or `all`.
    #[arg(long, default_value = "all")]
    schemes: String,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quant_model: Option<QuantModel>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

impl Common {
    fn load(&self) -> cfmimo::Result<SystemConfig> {
        let mut config = match &self.config {
            Some(path) => SystemConfig::from_file(path)?,
            None => SystemConfig::default(),
        };
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(d) = self.drops {
            config.drops = d;
        }
        if let Some(r) = self.realizations {
            config.realizations = r;
        }
        if let Some(q) = self.quant_model {
            config.quant_model = q;
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> cfmimo::Result<ExitCode> {
    let (common, axis, values) = match &cli.command {
        Command::SingleRun(c) | Command::Verify(c) => (c, None, Vec::new()),
        Command::SweepSnr(s) => (&s.common, Some(SweepAxis::Snr), s.values.clone()),
        Command::SweepBits(s) => (&s.common, Some(SweepAxis::Budget), s.values.clone()),
        Command::SweepAps(s) => (&s.common, Some(SweepAxis::NumAps), s.values.clone()),
        Command::SweepUes(s) => (&s.common, Some(SweepAxis::NumUes), s.values.clone()),
        Command::SweepStreams(s) => (&s.common, Some(SweepAxis::Streams), s.values.clone()),
    };
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| cfmimo::Error::InvalidConfig(e.to_string()))?;
    }
    let config = common.load()?;

    if let Command::Verify(_) = cli.command {
        let outcomes = verify::run_all(&config);
        for o in &outcomes {
            println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        }
        let failed = outcomes.iter().filter(|o| !o.passed).count();
        return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }

    let schemes = SchemeSpec::parse_list(&common.schemes)?;
    let result = match axis {
        Some(axis) => harness::sweep(&config, axis, &values, &schemes)?,
        None => harness::single_run(&config, &schemes)?,
    };
    match &common.out {
        Some(path) => harness::emit_csv(&result, path)?,
        None => harness::write_csv(&result, std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}
