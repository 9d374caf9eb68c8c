use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sonar_cli::commands::{self, Context, SimulateOptions};
use sonar_cli::config::RunConfig;
use sonar_cli::{server, CliError, Result};
use sonar_complexity::analysis::DEFAULT_SELF_CONSISTENCY_THRESHOLD;

#[derive(Parser, Debug)]
#[command(name = "sonar-complexity", version, about = "Seabed image complexity: metrics, Elo ranking and rating server")]
struct Cli {
    /// Seed for every randomized step (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for tables, plots and config sidecars.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// TOML file with [elo], [metrics], [simulate] and [serve] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a dataset and tabulate accepted and rejected chips.
    IngestCheck {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Compute complexity metrics for every accepted chip.
    Metrics {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Replicated Elo ranking from a judgment log.
    Rank {
        #[arg(long)]
        log: PathBuf,
        /// Dataset supplying the image list and site labels.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// `id,latent` table to correlate the ranking against.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Regress each metric on Elo score.
    Analyze {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        elo: PathBuf,
    },
    /// Operator agreement matrix from a judgment log.
    Consistency {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SELF_CONSISTENCY_THRESHOLD)]
        threshold: f64,
    },
    /// Simulated raters producing a judgment log and its ground truth.
    Simulate {
        #[arg(long)]
        n_images: Option<usize>,
        #[arg(long)]
        n_comparisons: Option<usize>,
        /// Number of identical simulated raters.
        #[arg(long)]
        raters: Option<usize>,
        /// Logistic noise scale of every rater (0 = noiseless).
        #[arg(long)]
        noise: Option<f64>,
        /// Per-image perception offset standard deviation.
        #[arg(long)]
        bias_sd: Option<f64>,
        #[arg(long)]
        neutral_band: Option<f64>,
        #[arg(long)]
        p_repeat: Option<f64>,
        /// Also write a synthetic chip dataset here.
        #[arg(long)]
        dataset_out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        chip_px: usize,
        #[arg(long, default_value_t = 0.1)]
        mpp: f64,
        /// Derive latent complexity from this metric of the synthetic chips.
        #[arg(long, requires = "dataset_out")]
        latent_from: Option<String>,
    },
    /// Run the rating service and serve the web rater.
    Serve {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        p_repeat: Option<f64>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    let mut ctx = Context::new(&cli.out, config.clone());
    ctx.seed = cli.seed;
    match cli.command {
        Command::IngestCheck { dataset } => {
            let s = commands::ingest_check(&ctx, &dataset)?;
            println!("{} accepted, {} rejected", s.accepted, s.rejected);
        }
        Command::Metrics { dataset } => {
            let s = commands::metrics_table(&ctx, &dataset)?;
            println!(
                "{} chips measured, {} metric(s) undefined, {} chips rejected at load",
                s.rows, s.failed_cells, s.rejected_chips
            );
        }
        Command::Rank { log, dataset, truth } => {
            let s = commands::rank(&ctx, &log, dataset.as_deref(), truth.as_deref())?;
            println!("ranked {} images from {} judgments", s.images, s.judgments);
            if let Some(r) = s.spearman_vs_truth {
                println!("spearman vs truth: {r:.4}");
            }
        }
        Command::Analyze { metrics, elo } => {
            for (name, fit) in commands::analyze(&ctx, &metrics, &elo)? {
                match fit {
                    Ok(f) => println!("{name:<24} R2 {:.4}  n {}", f.r_squared, f.n),
                    Err(reason) => println!("{name:<24} {reason}"),
                }
            }
        }
        Command::Consistency { log, threshold } => {
            let m = commands::consistency(&ctx, &log, threshold)?;
            for (op, status) in m.statuses(threshold) {
                let diag = m.self_consistency(&op).map_or("-".into(), |v| format!("{v:.3}"));
                println!("{op:<20} self {diag:>6}  {}", status.as_str());
            }
        }
        Command::Simulate {
            n_images,
            n_comparisons,
            raters,
            noise,
            bias_sd,
            neutral_band,
            p_repeat,
            dataset_out,
            chip_px,
            mpp,
            latent_from,
        } => {
            let opts = SimulateOptions {
                n_images,
                n_comparisons,
                raters,
                noise,
                bias_sd,
                neutral_band,
                p_repeat,
                dataset_out,
                chip_px,
                meters_per_pixel: mpp,
                latent_from,
            };
            let s = commands::simulate(&ctx, &opts)?;
            println!("{} judgments over {} images -> {}", s.judgments, s.images, s.log.display());
        }
        Command::Serve {
            dataset,
            log,
            listen,
            p_repeat,
            static_dir,
        } => {
            config.apply_env(|k| std::env::var(k).ok())?;
            let s = &mut config.serve;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if dataset.is_some() {
                s.dataset = dataset;
            }
            if let Some(l) = log {
                s.log = l;
            }
            if let Some(l) = listen {
                s.listen = l;
            }
            if let Some(p) = p_repeat {
                s.p_repeat = p;
            }
            if static_dir.is_some() {
                s.static_dir = static_dir;
            }
            serve(&config)?;
        }
    }
    Ok(())
}

fn serve(config: &RunConfig) -> Result<()> {
    let cfg = &config.serve;
    let (state, skipped) = server::build_state(cfg, config.metrics.drc_epsilon)?;
    for e in &skipped {
        eprintln!("warning: {}:{}: {}", cfg.log.display(), e.line, e.message);
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {}: {e}", cfg.listen)))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        let app = server::router(state.clone(), cfg.static_dir.as_deref());
        server::serve(listener, app, server::shutdown_signal()).await
    })?;
    let total = state.service().records().len();
    println!("shut down; {total} judgments in {}", cfg.log.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
