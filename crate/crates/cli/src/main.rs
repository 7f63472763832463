//! `shapematch` command-line tool. Machine-readable JSON lines go to stdout;
//! failures print `{"error": kind, "message": ...}` to stderr and exit 1.
//! Usage errors exit 2.

mod plot;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use shapematch::datasets::{adapt_mcb, adapt_tless, make_desk_dataset, write_manifest};
use shapematch::eval::pca_project;
use shapematch::geometry::{normalize_unit_sphere, occlude, read_obj, sample_surface, write_point_cloud};
use shapematch::nn::FeatureVector;
use shapematch::pipeline::{
    distances_for_files, query_file, read_evaluation, run_stage, ExperimentConfig, RunOptions, Stage, StageOutcome,
};
use shapematch::render::{render_views, write_png, write_viewset};
use shapematch::retrieval::read_catalog;
use shapematch::Exec;

pub const CONFIG_ENV: &str = "SHAPEMATCH_CONFIG";
pub const OUT_ENV: &str = "SHAPEMATCH_OUT";

#[derive(Debug)]
pub enum CliError {
    Core(shapematch::Error),
    Usage(String),
    Input { path: PathBuf, message: String },
}

impl CliError {
    pub fn input(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Input { .. } => "input",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
            CliError::Input { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl From<shapematch::Error> for CliError {
    fn from(e: shapematch::Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "shapematch", version, about = "CAD shape classification and retrieval")]
struct Cli {
    /// Experiment config (TOML). Defaults to the built-in desk preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for pipeline stages, output path for file commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Human-readable tables instead of JSON lines.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Hist,
    Scatter,
}

#[derive(clap::Args)]
struct StageFlags {
    /// Fail on stale artifacts instead of rebuilding them.
    #[arg(long)]
    strict: bool,
    /// Rerun even when up to date.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the procedural desk corpus, or adapt an MCB / T-LESS copy,
    /// into a manifest.
    GenDataset {
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        /// Class-per-folder MCB root.
        #[arg(long, conflicts_with = "from_tless")]
        from_mcb: Option<PathBuf>,
        /// T-LESS root with cad/ and reconstructed/ OBJ folders.
        #[arg(long)]
        from_tless: Option<PathBuf>,
    },
    /// Render the configured view ring of a mesh.
    Render {
        #[arg(long)]
        input: PathBuf,
        /// Also write one PNG per view.
        #[arg(long)]
        png: bool,
    },
    /// Sample a normalized point cloud from a mesh (`.smpc` or `.csv` by extension).
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(short = 'n', long)]
        points: Option<usize>,
        /// Drop this fraction of points farthest along `--direction`.
        #[arg(long)]
        occlude: Option<f64>,
        #[arg(long, default_value = "0,0,1")]
        direction: String,
    },
    /// Run the prepare and train stages.
    Train(StageFlags),
    /// Run the index stage.
    Index(StageFlags),
    /// Run the evaluate stage and print its metrics.
    Eval(StageFlags),
    /// Embed an OBJ or point cloud and print the top-k catalog models.
    Query {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(short = 'k', long, default_value_t = 5)]
        k: usize,
        /// Checkpoint to embed with; defaults to the one named by the catalog.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Project catalog features onto principal axes.
    Pca {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
    /// Distance from each input to every catalog model.
    Distances {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Draw a histogram or scatter PNG from a CSV export.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Histogram value column.
        #[arg(long, default_value = "distance")]
        column: String,
        /// Column whose values split the data into coloured groups.
        #[arg(long)]
        group: Option<String>,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        #[arg(long, default_value = "x")]
        x: String,
        #[arg(long, default_value = "y")]
        y: String,
    },
}

struct Ctx {
    cfg: ExperimentConfig,
    out: Option<PathBuf>,
    pretty: bool,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self> {
        let config = cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match &config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::desk(),
        };
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        let root = cli.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from));
        // `--out` names the run directory only for pipeline stages
        let stage_cmd = matches!(cli.command, Command::Train(_) | Command::Index(_) | Command::Eval(_));
        if stage_cmd {
            if let Some(r) = &root {
                cfg.output_dir = r.clone();
            }
        }
        let out = match (&cli.out, stage_cmd) {
            (Some(o), false) => Some(o.clone()),
            _ => None,
        };
        Ok(Ctx {
            cfg,
            out,
            pretty: cli.pretty,
        })
    }

    /// Explicit `--out`, else `name` under `$SHAPEMATCH_OUT` or the current directory.
    fn out_or(&self, name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_default()
                .join(name)
        })
    }

    fn emit(&self, v: serde_json::Value) {
        if self.pretty {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        } else {
            println!("{v}");
        }
    }
}

fn mkdirs(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| CliError::input(p, e))
}

fn write_text(p: &Path, s: &str) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        mkdirs(d)?;
    }
    std::fs::write(p, s).map_err(|e| CliError::input(p, e))
}

fn parse_vec3(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("`{s}` is not x,y,z")))?;
    <[f64; 3]>::try_from(v).map_err(|_| CliError::Usage(format!("`{s}` is not x,y,z")))
}

fn stage_line(ctx: &Ctx, o: &StageOutcome) {
    ctx.emit(json!({
        "stage": o.report.stage,
        "skipped": o.skipped,
        "inputs_sha256": o.report.inputs_sha256,
        "outputs": o.report.outputs.len(),
    }));
}

fn run_stages(ctx: &Ctx, stages: &[Stage], f: &StageFlags) -> Result<()> {
    let opts = RunOptions {
        strict: f.strict,
        force: f.force,
    };
    for &s in stages {
        let o = run_stage(&ctx.cfg, s, opts)?;
        stage_line(ctx, &o);
    }
    Ok(())
}

fn print_metrics(ctx: &Ctx) -> Result<()> {
    let r = read_evaluation(&ctx.cfg.output_dir)?;
    if !ctx.pretty {
        println!("{}", serde_json::to_string(&r).expect("json"));
        return Ok(());
    }
    let c = &r.classification;
    println!("dataset {}  branches {}", r.dataset, r.branches);
    println!("{:<16} {:>8} {:>10} {:>8}", "class", "support", "precision", "recall");
    for m in &c.per_class {
        println!("{:<16} {:>8} {:>10.2} {:>8.2}", m.class, m.support, m.precision, m.recall);
    }
    println!("accuracy {:.2}  macro precision {:.2}  macro recall {:.2}", c.overall_accuracy, c.macro_precision, c.macro_recall);
    for (k, v) in &r.retrieval.topk_accuracy {
        println!("top-{k} {v:.2}");
    }
    println!("threshold {:.4} ({})  F1 {:.3}", r.retrieval.threshold, r.retrieval.threshold_source, r.retrieval.f1);
    for p in &r.partial {
        println!(
            "partial [{}] clean {:.4} occluded {:.4} ratio {}",
            p.tag,
            p.mean_clean,
            p.mean_occluded,
            p.mean_ratio.map_or("-".into(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::load(&cli)?;
    let exec = Exec::default();
    match cli.command {
        Command::GenDataset {
            per_class,
            classes,
            from_mcb,
            from_tless,
        } => {
            let dir = ctx.out_or("dataset");
            let (manifest, report) = if let Some(root) = from_mcb.or(from_tless.clone()) {
                let a = if from_tless.is_some() { adapt_tless(&root)? } else { adapt_mcb(&root)? };
                mkdirs(&dir)?;
                write_manifest(&a.manifest, &dir.join("manifest.csv"))?;
                if !a.pairs.is_empty() {
                    let pairs = serde_json::to_string_pretty(&a.pairs).expect("json");
                    write_text(&dir.join("pairs.json"), &(pairs + "\n"))?;
                }
                (a.manifest, Some(a.report))
            } else {
                let mut desk = ctx.cfg.effective_desk();
                if let Some(n) = per_class {
                    desk.per_class = n;
                }
                if let Some(c) = classes {
                    desk.classes = c;
                }
                (make_desk_dataset(&desk, &dir, exec)?, None)
            };
            ctx.emit(json!({
                "manifest": dir.join("manifest.csv"),
                "models": manifest.len(),
                "classes": manifest.inventory(),
                "warnings": report.map(|r| r.warnings).unwrap_or_default(),
            }));
        }
        Command::Render { input, png } => {
            let mesh = read_obj(&input)?.normalized();
            let stem = mesh.model_id.clone();
            let dir = ctx.out_or(&format!("render-{stem}"));
            mkdirs(&dir)?;
            let seed = shapematch::seeds::derive(ctx.cfg.seed, &[shapematch::seeds::label("render")]);
            let views = render_views(&mesh, &ctx.cfg.render, seed)?;
            write_viewset(&views, &dir.join(format!("{stem}.smvw")))?;
            if png {
                for (i, im) in views.images.iter().enumerate() {
                    write_png(im, &dir.join(format!("{stem}-view{i}.png")))?;
                }
            }
            ctx.emit(json!({ "views": views.len(), "dir": dir }));
        }
        Command::Sample {
            input,
            points,
            occlude: fraction,
            direction,
        } => {
            let mesh = read_obj(&input)?.normalized();
            let n = points.unwrap_or(ctx.cfg.sampling.point_count);
            let seed = shapematch::seeds::derive(ctx.cfg.seed, &[shapematch::seeds::label(&mesh.model_id)]);
            let mut pc = sample_surface(&mesh, n, shapematch::seeds::derive(seed, &[2]))?;
            if let Some(f) = fraction {
                pc = occlude(&pc, parse_vec3(&direction)?, f, shapematch::seeds::derive(seed, &[5]))?;
            }
            let pc = normalize_unit_sphere(&pc);
            let out = ctx.out_or(&format!("{}.smpc", mesh.model_id));
            write_point_cloud(&pc, &out)?;
            ctx.emit(json!({ "points": pc.len(), "path": out }));
        }
        Command::Train(f) => run_stages(&ctx, &[Stage::Prepare, Stage::Train], &f)?,
        Command::Index(f) => run_stages(&ctx, &[Stage::Index], &f)?,
        Command::Eval(f) => {
            run_stages(&ctx, &[Stage::Evaluate], &f)?;
            print_metrics(&ctx)?;
        }
        Command::Query {
            catalog,
            input,
            k,
            checkpoint,
        } => {
            if k == 0 {
                return Err(CliError::Usage("-k must be at least 1".into()));
            }
            let r = query_file(&catalog, &input, k, checkpoint.as_deref())?;
            for (rank, (id, d)) in r.ranked.iter().enumerate() {
                if ctx.pretty {
                    println!("{:>3}  {id:<32} {d:.6}", rank + 1);
                } else {
                    println!("{}", json!({ "rank": rank + 1, "model_id": id, "distance": d }));
                }
            }
        }
        Command::Pca { catalog, dims } => {
            let cat = read_catalog(&catalog)?;
            let feats: Vec<FeatureVector> = cat.entries().iter().map(|e| e.feature.clone()).collect();
            let p = pca_project(&feats, dims)?;
            let labels: Vec<(String, String, String)> = cat
                .entries()
                .iter()
                .map(|e| (e.model_id.clone(), e.class_label.clone(), e.provenance.to_string()))
                .collect();
            let out = ctx.out_or("pca.csv");
            write_text(&out, &p.to_csv(&labels))?;
            let side = out.with_extension("variance.json");
            let v = json!({ "explained_variance_ratio": p.explained_variance_ratio, "count": labels.len() });
            write_text(&side, &(serde_json::to_string_pretty(&v).expect("json") + "\n"))?;
            ctx.emit(json!({ "csv": out, "variance": side, "explained_variance_ratio": p.explained_variance_ratio }));
        }
        Command::Distances {
            catalog,
            inputs,
            checkpoint,
        } => {
            let t = distances_for_files(&catalog, &inputs, checkpoint.as_deref(), exec)?;
            let out = ctx.out_or("distances.csv");
            write_text(&out, &t.to_csv())?;
            let summary = out.with_extension("summary.csv");
            write_text(&summary, &t.summary_csv())?;
            for s in &t.summary {
                ctx.emit(json!({ "query_id": s.query_id, "nearest": s.nearest, "min": s.min, "mean": s.mean }));
            }
        }
        Command::Plot {
            input,
            kind,
            column,
            group,
            bins,
            x,
            y,
        } => {
            let table = plot::Table::read(&input)?;
            let out = ctx.out.clone().unwrap_or_else(|| input.with_extension("png"));
            match kind {
                PlotKind::Hist => {
                    let s = table.series(&column, group.as_deref())?;
                    plot::histogram_png(&s, bins.max(1), &out)?;
                }
                PlotKind::Scatter => {
                    let xs = table.series(&x, group.as_deref())?;
                    let ys = table.series(&y, group.as_deref())?;
                    let pts: BTreeMap<String, Vec<(f64, f64)>> = xs
                        .into_iter()
                        .map(|(g, xv)| {
                            let yv = &ys[&g];
                            (g, xv.into_iter().zip(yv.iter().copied()).collect())
                        })
                        .collect();
                    plot::scatter_png(&pts, &out)?;
                }
            }
            ctx.emit(json!({ "png": out }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap prints usage and exits 2 on bad arguments
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}
