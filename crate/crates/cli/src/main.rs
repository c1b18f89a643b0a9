use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use embeval::curation::{stratified_split, SplitRatios, DEFAULT_MIN_ANNOTATIONS};
use embeval::harness::{self, EvalConfig, CURATED_FILE, SPLIT_FILE};
use embeval::io;
use embeval::rng::derive_seed;
use embeval::umap::{umap, LayoutParams};

/// Evaluate and compare embedding spaces of audio feature extractors.
#[derive(Parser)]
#[command(name = "embeval", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON evaluation config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Neighbors for the kNN classifier (default 15); overrides the config file.
    #[arg(long, global = true)]
    knn_k: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Filter and de-overlap annotations, then write the train/val/test split.
    Curate {
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        min_annotations: Option<usize>,
        #[arg(long)]
        drop_overlaps: bool,
    },
    /// Validate embedding files, optionally against a model registry.
    EmbedCheck {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Reduce an embedding file with UMAP.
    Reduce {
        input: PathBuf,
        #[arg(long, value_parser = ["300", "2"])]
        dims: String,
        /// Output file; defaults to `<out>/<stem>.umap<dims>.bemb`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the full protocol and write reports, tables and plots.
    Eval {
        /// Embedding files (BEMB or CSV); repeat for several models.
        #[arg(long)]
        embeddings: Vec<PathBuf>,
        /// Annotation CSV.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Model registry JSON.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Render tables and plots from a saved report.json.
    Report {
        report: PathBuf,
        /// Recompute category means from the per-model rows and fail on mismatch.
        #[arg(long)]
        check: bool,
    },
}

fn load_config(global: &Global) -> Result<Option<EvalConfig>> {
    global
        .config
        .as_ref()
        .map(|p| EvalConfig::load(p).with_context(|| format!("loading config {}", p.display())))
        .transpose()
}

fn eval_config(
    global: &Global,
    embeddings: Vec<PathBuf>,
    annotations: Option<PathBuf>,
    registry: Option<PathBuf>,
) -> Result<EvalConfig> {
    let mut config = match load_config(global)? {
        Some(c) => c,
        None => {
            let (Some(annotations), Some(registry)) = (annotations.clone(), registry.clone()) else {
                bail!("eval needs --config or --annotations and --registry");
            };
            EvalConfig::new(embeddings.clone(), annotations, registry, 0)
        }
    };
    if !embeddings.is_empty() {
        config.embeddings = embeddings;
    }
    if let Some(a) = annotations {
        config.annotations = a;
    }
    if let Some(r) = registry {
        config.registry = r;
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(k) = global.knn_k {
        config.knn_k = k;
    }
    config.validate()?;
    Ok(config)
}

fn curate(global: &Global, annotations: Option<PathBuf>, min: Option<usize>, drop_overlaps: bool) -> Result<()> {
    let config = load_config(global)?;
    let path = annotations
        .or_else(|| config.as_ref().map(|c| c.annotations.clone()))
        .context("curate needs --annotations or --config")?;
    let min = min.or(config.as_ref().map(|c| c.curation.min_annotations)).unwrap_or(DEFAULT_MIN_ANNOTATIONS);
    let drop_overlaps = drop_overlaps || config.as_ref().is_some_and(|c| c.curation.drop_overlaps);
    let ratios = config.as_ref().map_or_else(SplitRatios::default, |c| c.split);
    let seed = global.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);

    let raw = io::load_annotations(&path)?;
    let curated = harness::curate(&raw, min, drop_overlaps)?;
    let split = stratified_split(&curated.label_vector(), ratios, seed)?;
    fs::create_dir_all(&global.out)?;
    io::save_annotations(&curated, global.out.join(CURATED_FILE))?;
    let ids: Vec<String> = curated.rows().iter().map(|e| e.event_id.clone()).collect();
    split.write_csv(&ids, global.out.join(SPLIT_FILE))?;
    println!("{} of {} events kept, {} classes", curated.len(), raw.len(), curated.label_vector().n_classes());
    Ok(())
}

fn embed_check(files: &[PathBuf], registry: Option<&Path>) -> Result<bool> {
    let registry = registry.map(io::load_registry).transpose()?;
    let mut ok = true;
    for file in files {
        let outcome = io::load_embeddings(file).map_err(anyhow::Error::from).and_then(|set| {
            if let Some(reg) = &registry {
                let entry = reg.get(set.model_name()).with_context(|| format!("model {:?} not in registry", set.model_name()))?;
                if entry.dimension != set.dim() {
                    bail!("registry dimension {} differs from file dimension {}", entry.dimension, set.dim());
                }
            }
            Ok(set)
        });
        match outcome {
            Ok(set) => println!("ok    {}: model={} count={} dim={}", file.display(), set.model_name(), set.count(), set.dim()),
            Err(e) => {
                ok = false;
                println!("FAIL  {}: {e:#}", file.display());
            }
        }
    }
    Ok(ok)
}

fn reduce(global: &Global, input: &Path, dims: usize, output: Option<PathBuf>) -> Result<()> {
    let config = load_config(global)?;
    let set = io::load_embeddings(input)?;
    let seed = derive_seed(global.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0), set.model_name());
    let params = match &config {
        Some(c) => c.umap.layout_for(dims, seed),
        None => LayoutParams::with_components(dims, seed),
    };
    let out = umap(set.to_f64().view(), &params)?;
    let reduced = set.with_data(format!("{}+umap{dims}", set.model_name()), out.embedding.mapv(|v| v as f32))?;
    let path = output.unwrap_or_else(|| {
        global.out.join(harness::reduced_file(set.model_name(), &format!("umap{dims}")))
    });
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    io::save_embeddings(&reduced, &path)?;
    println!("{} -> {} ({} x {dims}, init {:?})", input.display(), path.display(), reduced.count(), out.init);
    Ok(())
}

fn report(global: &Global, path: &Path, check: bool) -> Result<bool> {
    let report = harness::render_saved_report(path, &global.out)?;
    for row in &report.categories.rows {
        println!("{}", harness::format_category_row(row));
    }
    if !check {
        return Ok(true);
    }
    let problems = report.check_consistency(1e-12);
    for p in &problems {
        println!("inconsistent: {p}");
    }
    if problems.is_empty() {
        println!("consistency check passed");
    }
    Ok(problems.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    let global = &cli.global;
    if let Some(n) = global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    match cli.command {
        Command::Curate { annotations, min_annotations, drop_overlaps } => {
            curate(global, annotations, min_annotations, drop_overlaps)?;
        }
        Command::EmbedCheck { files, registry } => return embed_check(&files, registry.as_deref()),
        Command::Reduce { input, dims, output } => reduce(global, &input, dims.parse()?, output)?,
        Command::Eval { embeddings, annotations, registry } => {
            let config = eval_config(global, embeddings, annotations, registry)?;
            let run = harness::evaluate(&config)?;
            harness::write_outputs(&run, &global.out)?;
            for row in &run.report.categories.rows {
                println!("{}", harness::format_category_row(row));
            }
            println!("wrote {}", global.out.join(harness::REPORT_FILE).display());
        }
        Command::Report { report: path, check } => return report(global, &path, check),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
