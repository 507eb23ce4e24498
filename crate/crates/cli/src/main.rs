use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use affectloop::trial::{Stack, TrialConfig, TrialService};
use affectloop::Ontology;
use affectloop_cli::api::{router, ApiOptions};
use affectloop_cli::commands;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "affectloop", version, about = "Emotion-aware dialogue policy training and trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain and fine-tune a policy against the simulated user.
    Train {
        /// TOML file overriding the default configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train this seed only; defaults to every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Components to switch off: state, conduct, reward, all.
        #[arg(long)]
        ablation: Option<String>,
        /// Start from the long schedule instead of the desk one.
        #[arg(long)]
        full_scale: bool,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Metrics over episode logs; two logs are also compared pairwise.
    Evaluate {
        /// Episode log (JSON lines); repeatable.
        #[arg(long, required = true)]
        episodes: Vec<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        /// Also write the metric reports as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Conduct distribution of an annotated corpus.
    CorpusStats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        by_turn: bool,
        /// Write behavior-cloning examples (JSON lines) here.
        #[arg(long)]
        export_bc: Option<PathBuf>,
    },
    /// Serve the trial API.
    Serve {
        /// Training directory or checkpoint file; repeatable. The first is the default.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Session store directory.
        #[arg(long, default_value = "trial-data")]
        data: PathBuf,
        /// TOML file with trial settings (turn cap, goals, quality rules).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Browser origin allowed by CORS; any origin when omitted.
        #[arg(long)]
        ui_origin: Option<String>,
        /// Shared bearer token required on every request.
        #[arg(long, env = "AFFECTLOOP_TRIAL_TOKEN")]
        token: Option<String>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config, seed, ablation, full_scale, out } => {
            let config = commands::train_config(config.as_deref(), full_scale, ablation.as_deref())?;
            let seeds = seed.map_or_else(|| config.seeds.clone(), |s| vec![s]);
            for (dir, run) in commands::train(&config, &seeds, &out)? {
                print!("{}", commands::curves_table(&run));
                println!("written to {}\n", dir.display());
            }
        }
        Command::Evaluate { episodes, resamples, report } => {
            let (table, reports) = commands::evaluate(&episodes, resamples)?;
            print!("{table}");
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_vec_pretty(&reports)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::CorpusStats { input, by_turn, export_bc } => {
            let r = commands::corpus_stats(&input, by_turn, export_bc.as_deref())?;
            print!("{}", r.render());
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Serve { checkpoint, port, host, data, config, ui_origin, token } => {
            let ontology = Arc::new(Ontology::desk());
            let mut stacks = BTreeMap::new();
            let mut default_checkpoint = None;
            for path in &checkpoint {
                let (id, model) = commands::load_policy(path, &ontology)?;
                default_checkpoint.get_or_insert_with(|| id.clone());
                stacks.insert(id, Stack::Policy(Arc::new(model)));
            }
            let trial: TrialConfig = match config {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => TrialConfig::default(),
            };
            let svc = Arc::new(TrialService::open(&data, ontology, stacks, trial)?);
            let app = router(svc.clone(), ApiOptions { default_checkpoint, ui_origin, token })?;
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("serving {} on http://{}", svc.checkpoints().join(", "), listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
    }
    Ok(())
}
