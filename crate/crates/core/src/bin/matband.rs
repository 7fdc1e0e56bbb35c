use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use matband::calibrate::C1Mode;
use matband::pipeline::{self, OutputFormat, RunConfig, VerifySelection};

/// Band structure, spectral gaps, and asymptotic-window verification for
/// the one-dimensional Schrodinger operator with a periodic Hermitian
/// matrix potential.
#[derive(Parser, Debug)]
#[command(name = "matband", version, disable_help_subcommand = true)]
struct Cli {
    /// Potential-definition document (TOML: `m`, `modes` with n/re/im)
    #[arg(long)]
    potential: PathBuf,

    /// Fourier truncation K; defaults to a size derived from --nbands
    #[arg(long)]
    kmax: Option<usize>,

    /// Number of quasimomentum grid points on [-pi, pi]
    #[arg(long, default_value_t = 101)]
    tgrid: usize,

    /// Number of band functions to compute
    #[arg(long)]
    nbands: Option<usize>,

    /// Localization prefactor: a positive number or `fit`
    #[arg(long, default_value = "fit")]
    c1: String,

    /// Verification selection: `all`, `none`, or a comma list of
    /// theorem1,corollary1,theorem2,theorem3,corollary2,theorem4
    #[arg(long, default_value = "all")]
    verify: String,

    /// Polish gap edges with the monodromy determinant: `on` or `off`
    #[arg(long, default_value = "off")]
    oracle: String,

    /// Galerkin convergence tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Band table format: `csv` or `structured`
    #[arg(long, default_value = "csv")]
    format: String,
}

fn build_config(cli: Cli) -> matband::Result<RunConfig> {
    let c1 = match cli.c1.trim() {
        "fit" => C1Mode::Fit,
        text => match text.parse::<f64>() {
            Ok(v) if v > 0.0 => C1Mode::Fixed(v),
            _ => {
                return Err(matband::Error::InvalidParameter(format!(
                    "--c1 expects a positive number or `fit`, got `{text}`"
                )))
            }
        },
    };
    let oracle = match cli.oracle.trim() {
        "on" => true,
        "off" => false,
        other => {
            return Err(matband::Error::InvalidParameter(format!(
                "--oracle expects `on` or `off`, got `{other}`"
            )))
        }
    };
    let mut config = RunConfig::new(cli.potential);
    config.truncation = cli.kmax;
    config.t_samples = cli.tgrid;
    config.n_bands = cli.nbands;
    config.c1 = c1;
    config.verify = VerifySelection::parse(&cli.verify)?;
    config.oracle = oracle;
    config.convergence_tol = cli.tol;
    config.out_dir = cli.out;
    config.format = OutputFormat::parse(&cli.format)?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not input errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let outcome = build_config(cli).and_then(|config| {
        let outcome = pipeline::run(&config)?;
        eprintln!("bands:        {}", outcome.band_table.display());
        eprintln!("gaps:         {}", outcome.gap_report.display());
        if let Some(v) = &outcome.verification_report {
            eprintln!("verification: {}", v.display());
        }
        eprintln!("manifest:     {}", outcome.manifest.display());
        Ok(outcome)
    });
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    ExitCode::from(pipeline::exit_code(&outcome) as u8)
}
