use clap::Parser;
use curvforge::cli::{self, parse_config, Command, RunConfig};
use std::path::PathBuf;

/// Metric surgeries, curvature calculus and prescribed-curvature solvers on
/// flat tori and annuli.
#[derive(Parser, Debug)]
#[command(name = "curvforge", version)]
struct Args {
    /// verify | synthesize | surface2d | info
    command: String,
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// override every resolution in the sweep
    #[arg(long)]
    resolution: Option<usize>,
    /// fd4 | spectral
    #[arg(long)]
    scheme: Option<String>,
    /// seed for randomized suites
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let args = Args::parse();
    if args.command == "info" {
        println!("{}", cli::info_text());
        std::process::exit(cli::EXIT_OK);
    }
    let config_path = match &args.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config is required for command '{}'", args.command);
            std::process::exit(cli::EXIT_CONFIG_ERROR);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            std::process::exit(cli::EXIT_CONFIG_ERROR);
        }
    };
    let mut cfg: RunConfig = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cli::EXIT_CONFIG_ERROR);
        }
    };
    // command-line command wins over the config field
    cfg.command = match args.command.as_str() {
        "verify" => Command::Verify,
        "synthesize" => Command::Synthesize,
        "surface2d" => Command::Surface2d,
        other => {
            eprintln!("error: unknown command '{other}'");
            std::process::exit(cli::EXIT_CONFIG_ERROR);
        }
    };
    if let Some(out) = args.out {
        cfg.out_dir = Some(out.display().to_string());
    }
    if let Some(n) = args.resolution {
        cfg.resolutions = Some(vec![n]);
    }
    if let Some(scheme) = args.scheme {
        cfg.scheme = match scheme.as_str() {
            "fd4" => curvforge::Scheme::Fd4,
            "spectral" => curvforge::Scheme::Spectral,
            other => {
                eprintln!("error: unknown scheme '{other}'");
                std::process::exit(cli::EXIT_CONFIG_ERROR);
            }
        };
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (_report, code) = cli::run(&cfg);
    std::process::exit(code);
}
