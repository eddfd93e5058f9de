use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scrambling::cli::{self, config::Origin, ExperimentConfig, RawConfig, ResultRecord, ToleranceSpec};

#[derive(Parser)]
#[command(name = "scrambling", version, about = "OTOC experiments for coupled kicked rotors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write CSV + JSON results.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config value, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Compare two result files column by column.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// e.g. `rel=1e-9` or `c_norm:sigma=3;*:rel=0`.
        #[arg(long, default_value = "rel=0")]
        tolerance: String,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> scrambling::Result<bool> {
    match Cli::parse().command {
        Command::Run {
            config,
            set,
            out,
            seed,
            threads,
            scenario,
        } => {
            let mut raw = match config {
                Some(path) => RawConfig::parse(&std::fs::read_to_string(path)?)?,
                None => RawConfig::default(),
            };
            for (i, pair) in set.iter().enumerate() {
                raw.apply_override(pair, i)?;
            }
            if let Some(s) = scenario {
                raw.set("scenario", s, Origin::Flag("scenario"));
            }
            if let Some(s) = seed {
                raw.set("seed", s.to_string(), Origin::Flag("seed"));
            }
            if let Some(t) = threads {
                raw.set("threads", t.to_string(), Origin::Flag("threads"));
            }
            if let Some(o) = out {
                raw.set("out", o.display().to_string(), Origin::Flag("out"));
            }
            let cfg = ExperimentConfig::from_raw(&raw)?;
            let record = cli::run(&cfg)?;
            let files = record.write(&cfg.out)?;
            println!("wrote {}", files.csv.display());
            println!("wrote {}", files.json.display());
            for g in &files.grids {
                println!("wrote {}", g.display());
            }
            for (name, fit) in &record.fits {
                println!(
                    "fit {name}: slope {:.6} +- {:.2e} over {:?} (R^2 {:.4})",
                    fit.slope, fit.slope_stderr, fit.window, fit.r_squared
                );
            }
            for note in &record.notes {
                println!("note: {note}");
            }
            for c in &record.checks {
                println!(
                    "check {} {}: measured {:.6} reference {:.6} tolerance {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.reference,
                    c.tolerance
                );
            }
            Ok(record.all_checks_passed())
        }
        Command::Compare { a, b, tolerance } => {
            let spec = ToleranceSpec::parse(&tolerance)?;
            let report = cli::compare(&ResultRecord::load(&a)?, &ResultRecord::load(&b)?, &spec)?;
            println!("{report}");
            Ok(report.passed)
        }
    }
}
