//! The `rallycoach` command line.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rally_core::fixture::{self, FixtureSpec};
use rally_core::recommend::render_grid;
use rally_core::simulate::parse_seed;
use rally_core::{
    best_response, opening_recommendation, recommendation_table, simulate, Category, ConditionalModel, Config, Dataset,
    LegalityMatrix, Matchup, PolicyRegistry, RewardConfig, SimConfig,
};

use crate::session::SessionConfig;
use crate::store::{SessionStore, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "rallycoach", version, about = "Shot recommendation and rally simulation for badminton")]
pub struct Cli {
    /// TOML config with rewards, smoothing, depth, k and soft rules.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate rally logs, optionally writing them back out merged and canonical.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, conflicts_with = "validate_only")]
        out: Option<PathBuf>,
        #[arg(long)]
        validate_only: bool,
    },
    /// Build response models from rally logs.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Rank responses to a stimulus, or print the full table.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "table")]
        stimulus: Option<String>,
        #[arg(long)]
        table: bool,
        /// Rank serves instead of responses.
        #[arg(long, conflicts_with_all = ["table", "stimulus"])]
        opening: bool,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Play out a rally from a seed with both players following lookahead.
    Simulate {
        #[arg(long)]
        model_p: PathBuf,
        #[arg(long)]
        model_o: PathBuf,
        /// Comma-separated `p:shot` / `o:shot` tokens.
        #[arg(long)]
        seed: String,
        /// Focal shots in the line, seed included.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_enum)]
        live_update: Option<Switch>,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, value_enum, default_value_t = SimFormat::Table)]
        format: SimFormat,
    },
    /// Shot counts for one player.
    Frequencies {
        #[arg(long = "dataset", required = true, num_args = 1..)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        player: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write the synthetic fixture dataset.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = fixture::FIXTURE_SEED)]
        seed: u64,
    },
    /// Run the coaching HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Count a responder's answers to a stimulator's shots.
    Build {
        #[arg(long = "dataset", required = true, num_args = 1..)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        responder: String,
        #[arg(long)]
        stimulator: String,
        #[arg(long)]
        alpha: Option<f64>,
        /// `hp,mp,mn,ln`
        #[arg(long)]
        rewards: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// `NAME=PATH` or `PATH` (named after the file stem). The bundled fixture is served when none is given.
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
    /// Session logs are kept here; without it sessions live in memory only.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn load_datasets(paths: &[PathBuf], legality: &LegalityMatrix, err: &mut dyn Write) -> Result<Dataset> {
    let loaded = Dataset::load_all(paths, legality)?;
    for w in &loaded.warnings {
        writeln!(err, "warning: {w}")?;
    }
    Ok(loaded.dataset)
}

fn matrix_for(model: &ConditionalModel, cfg: &Config) -> LegalityMatrix {
    LegalityMatrix::new(model.taxonomy().clone()).with_soft_rule(
        Category::Drop,
        Category::Smash,
        cfg.soft_rules.drop_to_smash,
    )
}

fn write_or_print(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// Runs everything except `serve`, writing results to `out` and warnings to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { files, out: dest, validate_only } => {
            let d = load_datasets(&files, &cfg.legality()?, err)?;
            writeln!(
                out,
                "{} players, {} matches, {} rallies, {} shots; version {}",
                d.players().len(),
                d.matches().len(),
                d.rally_count(),
                d.shot_count(),
                d.version()
            )?;
            if let (Some(dest), false) = (dest, validate_only) {
                std::fs::write(&dest, d.to_log_string()).with_context(|| format!("writing {}", dest.display()))?;
            }
        }
        Command::Model(ModelCommand::Build { datasets, responder, stimulator, alpha, rewards, out: dest }) => {
            let d = load_datasets(&datasets, &cfg.legality()?, err)?;
            let rewards = match rewards {
                Some(list) => RewardConfig::parse_list(&list)?,
                None => cfg.rewards,
            };
            let m = ConditionalModel::build(&d, &responder, &stimulator, rewards, alpha.unwrap_or(cfg.model.alpha))?;
            write_or_print(dest.as_deref(), &m.to_json(), out)?;
        }
        Command::Recommend { model, stimulus, table, opening, k, format } => {
            let m = ConditionalModel::load(&model)?;
            let matrix = matrix_for(&m, &cfg);
            let tax = m.taxonomy();
            let k = k.unwrap_or(cfg.recommend.k);
            if table {
                let t = recommendation_table(&m, k, &matrix);
                let text = match format {
                    Format::Text => t.to_text(tax),
                    Format::Csv => t.to_csv(tax),
                    Format::Json => format!("{:#}\n", t.to_json(tax)),
                };
                out.write_all(text.as_bytes())?;
                return Ok(());
            }
            let r = match (stimulus, opening) {
                (Some(s), _) => best_response(&m, tax.parse(&s)?, k, &matrix),
                (None, true) => opening_recommendation(&m, k),
                (None, false) => bail!("give --stimulus <shot>, --opening or --table"),
            };
            match format {
                Format::Json => writeln!(out, "{:#}", r.to_json(tax))?,
                Format::Text | Format::Csv => {
                    let header: Vec<String> =
                        ["rank", "shot", "p", "p_success", "utility", "support"].map(String::from).to_vec();
                    let rows: Vec<Vec<String>> = r
                        .ranked
                        .iter()
                        .enumerate()
                        .map(|(i, b)| {
                            vec![
                                (i + 1).to_string(),
                                tax.name(b.shot).to_string(),
                                format!("{:.4}", b.p),
                                format!("{:.4}", b.p_success),
                                format!("{:.4}", b.utility),
                                b.support.to_string(),
                            ]
                        })
                        .collect();
                    if format == Format::Csv {
                        writeln!(out, "{}", header.join(","))?;
                        for row in rows {
                            writeln!(out, "{}", row.join(","))?;
                        }
                    } else {
                        out.write_all(render_grid(&header, &rows).as_bytes())?;
                    }
                }
            }
        }
        Command::Simulate { model_p, model_o, seed, steps, depth, live_update, policy, format } => {
            let mu = Matchup::new(ConditionalModel::load(&model_p)?, ConditionalModel::load(&model_o)?)?;
            let matrix = matrix_for(&mu.focal, &cfg);
            let base = cfg.simulate.sim_config();
            let sim = SimConfig {
                depth: depth.unwrap_or(base.depth),
                step_limit: steps.unwrap_or(base.step_limit),
                opponent_policy: policy.unwrap_or(base.opponent_policy),
                live_update: live_update.map_or(base.live_update, |s| s == Switch::On),
            };
            let seed = parse_seed(&seed, &mu)?;
            let rollout = simulate(&mu, &seed, &sim, &PolicyRegistry::default(), &matrix)?;
            let tax = mu.taxonomy();
            match format {
                SimFormat::Table => out.write_all(
                    rollout
                        .to_table(tax, &mu.focal.responder().display_name, &mu.opponent.responder().display_name)
                        .as_bytes(),
                )?,
                SimFormat::Json => writeln!(out, "{:#}", rollout.to_json(tax))?,
            }
        }
        Command::Frequencies { datasets, player, format } => {
            let d = load_datasets(&datasets, &cfg.legality()?, err)?;
            let freq = d.shot_frequencies(&player)?;
            let tax = d.taxonomy();
            match format {
                Format::Json => {
                    let map: serde_json::Map<String, serde_json::Value> =
                        freq.iter().map(|(s, n)| (tax.name(*s).to_string(), (*n).into())).collect();
                    writeln!(out, "{:#}", serde_json::json!({ "player": player, "counts": map }))?;
                }
                Format::Csv => {
                    writeln!(out, "shot,count")?;
                    for (s, n) in &freq {
                        writeln!(out, "{},{n}", tax.name(*s))?;
                    }
                }
                Format::Text => {
                    let rows: Vec<Vec<String>> =
                        freq.iter().map(|(s, n)| vec![tax.name(*s).to_string(), n.to_string()]).collect();
                    out.write_all(render_grid(&["shot".into(), "count".into()], &rows).as_bytes())?;
                }
            }
        }
        Command::Fixture { out: dest, seed } => {
            let d = fixture::generate(&FixtureSpec { seed, ..FixtureSpec::default() }, &cfg.legality()?)?;
            std::fs::write(&dest, d.to_log_string()).with_context(|| format!("writing {}", dest.display()))?;
            writeln!(out, "wrote {} rallies to {}", d.rally_count(), dest.display())?;
        }
        Command::Serve(args) => {
            let store = open_store(&cfg, &args, err)?;
            let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().context("bad --host/--port")?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                eprintln!("rallycoach listening on http://{}", listener.local_addr()?);
                axum::serve(listener, crate::api::router(Arc::new(store))).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

/// Loads the datasets named on the command line and replays any saved sessions.
pub fn open_store(cfg: &Config, args: &ServeArgs, err: &mut dyn Write) -> Result<SessionStore> {
    let legality = cfg.legality()?;
    let mut datasets = Vec::new();
    for arg in &args.datasets {
        let (name, path) = match arg.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(arg);
                let stem = p.file_stem().and_then(|s| s.to_str()).context("dataset path has no file name")?;
                (stem.to_string(), p)
            }
        };
        datasets.push((name, load_datasets(&[path], &legality, err)?));
    }
    if datasets.is_empty() {
        datasets.push(("fixture".to_string(), fixture::bundled()));
    }
    Ok(SessionStore::open(datasets, SessionConfig::from(cfg), PolicyRegistry::default(), args.data_dir.clone())?)
}
