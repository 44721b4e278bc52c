use std::fs::File;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use communitylm::baselines::{self, KeywordVariant};
use communitylm::corpus::{self, CommunityCorpus, PoliticianList, DEFAULT_DEM_MIN, DEFAULT_REP_MIN};
use communitylm::eval::{aggregate_table, write_report};
use communitylm::interface::probe::{self, ContextMode, EvalOptions, ProbeSpec};
use communitylm::interface::service::{self, AppState};
use communitylm::interface::{Engine, Settings};
use communitylm::promptgen::PromptTemplate;
use communitylm::stance::TiePolicy;
use communitylm::Community;

#[derive(Parser)]
#[command(name = "communitylm", version, about = "Probe partisan community language models")]
struct Cli {
    /// Settings file (TOML); COMMUNITYLM_<SECTION>__<KEY> variables override it.
    #[arg(long, short, global = true, env = "COMMUNITYLM_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or balance community tweet corpora.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Probe both communities about one subject.
    Probe(ProbeArgs),
    /// Evaluate the configured generators over the whole survey catalog.
    Eval(EvalArgs),
    /// Rank the catalog's public figures by one community's stance.
    Rank(RankArgs),
    /// Corpus-only baselines.
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Run the HTTP probe service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Label users by follows and split a tweet stream into per-community corpora.
    Build {
        /// JSON lines {user_id, text, timestamp?}
        #[arg(long)]
        tweets: PathBuf,
        /// JSON lines {user_id, follows: [handle, ...]}
        #[arg(long)]
        follows: PathBuf,
        /// CSV with handle,party columns
        #[arg(long)]
        politicians: PathBuf,
        /// Output directory; defaults to paths.corpus_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DEM_MIN)]
        dem_min: usize,
        #[arg(long, default_value_t = DEFAULT_REP_MIN)]
        rep_min: usize,
    },
    /// Downsample the larger corpus to the size of the smaller one.
    Balance {
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ProbeArgs {
    /// Catalog id (e.g. ftfauci1), catalog name, or free text.
    #[arg(long)]
    subject: String,
    #[arg(long)]
    template: Option<PromptTemplate>,
    /// d, r, or own (each community its own clause).
    #[arg(long)]
    context_party: Option<ContextMode>,
    /// Required for free text: singular or plural.
    #[arg(long)]
    number: Option<String>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    template: Option<PromptTemplate>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    community: Community,
    #[arg(long)]
    template: Option<PromptTemplate>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Surname,
}

impl From<VariantArg> for KeywordVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => KeywordVariant::Full,
            VariantArg::Surname => KeywordVariant::Surname,
        }
    }
}

#[derive(Subcommand)]
enum BaselineCmd {
    /// Predict the community that mentions each item more often.
    Freq {
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Count the corpora in this directory instead of using the packaged counts.
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        /// Count table (question_id, variant, dem_count, rep_count).
        #[arg(long, conflicts_with = "corpus_dir")]
        counts: Option<PathBuf>,
    },
    /// Average the sentiment of tweets mentioning each item.
    Retrieval {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    host: Option<String>,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_corpora(dir: &Path) -> Result<(CommunityCorpus, CommunityCorpus)> {
    let read = |c| {
        CommunityCorpus::read_from_dir(dir, c).with_context(|| format!("reading {c} corpus from {}", dir.display()))
    };
    Ok((read(Community::Democrat)?, read(Community::Republican)?))
}

fn corpus_cmd(settings: &Settings, cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Build { tweets, follows, politicians, out, dem_min, rep_min } => {
            let out = out.unwrap_or_else(|| settings.paths.corpus_dir.clone());
            let list = PoliticianList::from_csv(
                File::open(&politicians).with_context(|| format!("opening {}", politicians.display()))?,
            )?;
            let follows = File::open(&follows).with_context(|| format!("opening {}", follows.display()))?;
            let labels = corpus::label_users(BufReader::new(follows), &list, dem_min, rep_min)?;
            let tweets = File::open(&tweets).with_context(|| format!("opening {}", tweets.display()))?;
            let built = corpus::build_corpora(BufReader::new(tweets), &labels)?;
            for c in [&built.democrat, &built.republican] {
                let path = c.write_to_dir(&out)?;
                log::info!("{}: {} tweets -> {}", c.community, c.len(), path.display());
            }
            print_json(&built.stats)
        }
        CorpusCmd::Balance { dir, out, seed } => {
            let dir = dir.unwrap_or_else(|| settings.paths.corpus_dir.clone());
            let out = out.unwrap_or_else(|| dir.clone());
            let (d, r) = read_corpora(&dir)?;
            let (d, r) = corpus::balance_corpora(d, r, seed);
            d.write_to_dir(&out)?;
            r.write_to_dir(&out)?;
            println!("balanced to {} tweets per community in {}", d.len(), out.display());
            Ok(())
        }
    }
}

async fn baseline_cmd(settings: &Settings, cmd: BaselineCmd) -> Result<()> {
    let catalog = match &settings.paths.catalog {
        Some(p) => communitylm::survey::SurveyCatalog::load(p)?,
        None => communitylm::survey::SurveyCatalog::packaged(),
    };
    let report = match cmd {
        BaselineCmd::Freq { variant, corpus_dir, counts } => {
            let variant = KeywordVariant::from(variant);
            let (counts, source) = match (corpus_dir, counts) {
                (Some(dir), _) => {
                    let (d, r) = read_corpora(&dir)?;
                    (baselines::keyword_counts(&d, &r, &catalog, variant)?, format!("corpus:{}", dir.display()))
                }
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let rows = baselines::parse_counts(&text)?;
                    (rows.into_iter().filter(|c| c.variant == variant).collect(), format!("counts:{}", path.display()))
                }
                (None, None) => (variant.packaged_counts(), "packaged-counts".to_string()),
            };
            baselines::frequency_report(&counts, &catalog, variant, &source, TiePolicy::default())?
        }
        BaselineCmd::Retrieval { variant, corpus_dir } => {
            let dir = corpus_dir.unwrap_or_else(|| settings.paths.corpus_dir.clone());
            let (d, r) = read_corpora(&dir)?;
            let engine = Engine::from_settings(settings)?;
            baselines::retrieval_report(&d, &r, &catalog, variant.into(), engine.classifier.as_ref(), TiePolicy::default())
                .await?
        }
    };
    let path = write_report(&settings.paths.runs_dir, &report)?;
    println!(
        "{}: accuracy {:.2}  weighted F1 {:.2}  ({} errors)  -> {}",
        report.run_id,
        report.accuracy * 100.0,
        report.weighted_f1 * 100.0,
        report.errors.len(),
        path.display()
    );
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}

async fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Corpus(cmd) => corpus_cmd(&settings, cmd),
        Command::Baseline(cmd) => baseline_cmd(&settings, cmd).await,
        Command::Probe(a) => {
            let engine = Engine::from_settings(&settings)?;
            let spec = ProbeSpec {
                subject: a.subject,
                number: a.number.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?,
                template: a.template.unwrap_or(engine.defaults.template),
                n: a.n.unwrap_or(engine.defaults.n_samples),
                seed: a.seed.unwrap_or(engine.defaults.seed),
                context: a.context_party.unwrap_or_default(),
            };
            print_json(&probe::probe(&engine, &spec).await?)
        }
        Command::Eval(a) => {
            let engine = Engine::from_settings(&settings)?;
            let mut options = EvalOptions::from_defaults(&engine);
            options.template = a.template.unwrap_or(options.template);
            options.n = a.n.unwrap_or(options.n);
            options.seed = a.seed.unwrap_or(options.seed);
            options.runs = a.runs;
            let (reports, aggregate) = probe::run_evals(&engine, &options).await?;
            for r in &reports {
                eprintln!("{}: accuracy {:.4}, errors {:?}", r.run_id, r.accuracy, r.errors);
            }
            let table = aggregate_table(&[aggregate]);
            let path = engine.runs_dir.join(format!("aggregate-{}.tsv", reports[0].run_id));
            std::fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
            print!("{table}");
            Ok(())
        }
        Command::Rank(a) => {
            let engine = Engine::from_settings(&settings)?;
            let ranking = probe::rank(
                &engine,
                a.community,
                a.template.unwrap_or(engine.defaults.template),
                a.n.unwrap_or(engine.defaults.n_samples),
                a.seed.unwrap_or(engine.defaults.seed),
            )
            .await?;
            print_json(&ranking)
        }
        Command::Serve(a) => {
            let engine = Arc::new(Engine::from_settings(&settings)?);
            let host = a.host.unwrap_or(settings.service.host.clone());
            let port = a.port.unwrap_or(settings.service.port);
            let addr: SocketAddr = format!("{host}:{port}").parse().with_context(|| format!("bad address {host}:{port}"))?;
            let state = AppState::new(engine, settings.service.workers, settings.service.sync_probe_limit);
            service::serve(state, addr).await.with_context(|| format!("serving on {addr}"))
        }
    }
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()).await {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
