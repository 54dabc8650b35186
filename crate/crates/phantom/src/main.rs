use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phantom::error::{Error, Result};
use phantom::report::{write_csv, Balance, Tds};
use phantom::{format, load_model, load_spec, memcmp, run_model, run_sweep, selftest, synth, RunSpec};

#[derive(Parser)]
#[command(name = "phantom", version, about = "Sparse CNN accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TdsArg {
    Io,
    Ooo,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BalanceArg {
    None,
    Intra,
    Inter,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate every layer of a model under one configuration.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lf: usize,
        #[arg(long, value_enum)]
        tds: TdsArg,
        #[arg(long, value_enum, default_value = "full")]
        balance: BalanceArg,
        /// Feed each layer the previous layer's output.
        #[arg(long)]
        chain: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of filters simulated per layer (unchained runs only).
        #[arg(long, default_value_t = 1.0)]
        filter_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep spec over a model.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask vs CSC metadata traffic of each layer's input.
    Memcmp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        index_bits: u32,
        #[arg(long, default_value_t = 16)]
        offset_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Activation density for every layer instead of the model's.
        #[arg(long)]
        activation_density: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write each layer's seeded weights and input as tensor files.
    Gen {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Oracle-equivalence and golden-value checks.
    Selftest,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn run(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Run { model, lf, tds, balance, chain, seed, filter_fraction, out } => {
            let layers = load_model(&model)?;
            let spec = RunSpec {
                lf,
                tds: match tds {
                    TdsArg::Io => Tds::InOrder,
                    TdsArg::Ooo => Tds::OutOfOrder,
                },
                balance: match balance {
                    BalanceArg::None => Balance::None,
                    BalanceArg::Intra => Balance::Intra,
                    BalanceArg::Inter => Balance::Inter,
                    BalanceArg::Full => Balance::Full,
                },
                seed,
                chain,
                filter_fraction,
            };
            if chain && filter_fraction < 1.0 {
                return Err(Error::Invalid("--chain needs --filter-fraction 1".into()));
            }
            write_csv(create(&out)?, &run_model(&layers, &spec)?)?;
        }
        Cmd::Sweep { model, spec, out } => {
            let layers = load_model(&model)?;
            let spec = load_spec(&spec)?;
            write_csv(create(&out)?, &run_sweep(&layers, &spec)?)?;
        }
        Cmd::Memcmp { model, index_bits, offset_bits, seed, activation_density, out } => {
            let layers = load_model(&model)?;
            if let Some(d) = activation_density {
                if !(d > 0.0 && d <= 1.0) {
                    return Err(Error::Invalid(format!("activation density {d} outside (0, 1]")));
                }
            }
            let dens = activation_density.map(|d| (1.0, d));
            let rows = memcmp::memcmp(&layers, seed, dens, index_bits, offset_bits, |l, e| {
                eprintln!("warning: skipping layer '{}': {e}", l.name);
            })?;
            write_csv(create(&out)?, &rows)?;
        }
        Cmd::Gen { model, seed, out_dir } => {
            let layers = load_model(&model)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            for (i, l) in layers.iter().enumerate() {
                let t = synth::layer_tensors(l, i, None, seed);
                for (suffix, tensor) in [("weights", &t.weights), ("acts", &t.acts)] {
                    let path = out_dir.join(format!("{i:02}_{}_{suffix}.phsm", l.name));
                    format::write_tensor(create(&path)?, tensor).map_err(|e| Error::io(&path, e))?;
                }
            }
        }
        Cmd::Selftest => {
            let checks = selftest::run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
