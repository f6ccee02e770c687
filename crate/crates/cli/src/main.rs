use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egoscan::chi2::chi2_detect_with;
use egoscan::detect::{detect_with, recover_clique};
use egoscan::fit::fit;
use egoscan::io::{
    read_edge_list, read_report, write_edge_list, write_report, CliqueReport, LabeledDetection, LabeledGraph,
    ReportBody, ReportDocument,
};
use egoscan::models::{
    calibrate_density, embed_clique, generate, make_simulation_spec, CliquePlan, ModelKind, ModelSpec,
    SIMULATION_DENSITY,
};
use egoscan::par::{with_threads, Execution};
use egoscan::sim::{render_tables, run, study_suite, Detector, SimConfig, SimSummary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "egoscan", version, about = "Egonet scan test for anomalous cliques")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Er,
    Chunglu,
    Sbm,
    Dcsbm,
    Pabm,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Er => ModelKind::ErdosRenyi,
            Model::Chunglu => ModelKind::ChungLu,
            Model::Sbm => ModelKind::Sbm,
            Model::Dcsbm => ModelKind::Dcsbm,
            Model::Pabm => ModelKind::Pabm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    #[value(alias = "paper")]
    Study,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a network from a null model and write it as an edge list.
    Generate {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        n: usize,
        /// Edge probability (Erdos-Renyi only).
        #[arg(long, conflicts_with = "density")]
        p: Option<f64>,
        /// Expected density; defaults to the simulation density.
        #[arg(long)]
        density: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Make a set of nodes pairwise adjacent.
    EmbedClique {
        /// Edge list ("-" for stdin).
        input: PathBuf,
        /// Size of a uniformly random clique.
        #[arg(long, required_unless_present = "members", conflicts_with = "members")]
        m: Option<usize>,
        /// Comma-separated node labels.
        #[arg(long, value_delimiter = ',')]
        members: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the egonet test (and optionally the chi-square benchmark).
    Detect {
        input: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Number of communities (block models).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Also run the chi-square benchmark.
        #[arg(long)]
        chi2: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Largest clique among flagged nodes.
    RecoverClique {
        input: PathBuf,
        /// Comma-separated flagged labels.
        #[arg(
            long,
            value_delimiter = ',',
            required_unless_present = "report",
            conflicts_with = "report"
        )]
        flagged: Option<Vec<String>>,
        /// Detection report written by `detect --out`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo study of false-alarm and detection rates.
    Simulate {
        /// Run the whole simulation grid.
        #[arg(long, value_enum, conflicts_with = "model")]
        suite: Option<Suite>,
        /// Replicate scale for `--suite`.
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[arg(long, value_enum, required_unless_present = "suite")]
        model: Option<Model>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Clique sizes; 0 runs clique-free networks.
        #[arg(long, value_delimiter = ',', default_value = "0,10")]
        clique_sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        /// Also run the chi-square benchmark.
        #[arg(long)]
        chi2: bool,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<egoscan::Error> for Failure {
    fn from(e: egoscan::Error) -> Self {
        match e {
            egoscan::Error::InvalidParameter(msg) => Failure::Usage(msg),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Failure> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

fn read_graph(path: &Path) -> Result<LabeledGraph, Failure> {
    read_edge_list(open_input(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn cmd_generate(model: Model, n: usize, p: Option<f64>, density: Option<f64>, common: &Common) -> Outcome {
    let kind = ModelKind::from(model);
    let spec = match (kind, p) {
        (ModelKind::ErdosRenyi, Some(p)) => ModelSpec::erdos_renyi(n, p)?,
        (_, Some(_)) => return Err(Failure::Usage("--p applies to the er model only".into())),
        _ => calibrate_density(
            &make_simulation_spec(kind, n, common.seed)?,
            density.unwrap_or(SIMULATION_DENSITY),
        )?,
    };
    let g = generate(&spec, common.seed)?;
    write_edge_list(&LabeledGraph::with_index_labels(g), open_output(&common.out)?)?;
    Ok(())
}

fn cmd_embed(input: &Path, m: Option<usize>, members: Option<Vec<String>>, common: &Common) -> Outcome {
    let lg = read_graph(input)?;
    let plan = match (m, members) {
        (_, Some(labels)) => CliquePlan::new(lg.indices_of(&labels).map_err(|e| Failure::Data(e.to_string()))?)?,
        (Some(m), None) => CliquePlan::random(lg.graph.n(), m, &mut ChaCha8Rng::seed_from_u64(common.seed))?,
        (None, None) => return Err(Failure::Usage("give --m or --members".into())),
    };
    let graph = embed_clique(&lg.graph, &plan)?;
    eprintln!("clique: {}", lg.labels_of(plan.members()).join(","));
    let out = LabeledGraph {
        graph,
        labels: lg.labels,
    };
    write_edge_list(&out, open_output(&common.out)?)?;
    Ok(())
}

fn execution(threads: usize) -> Execution {
    if threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn cmd_detect(input: &Path, model: Model, k: Option<usize>, alpha: f64, chi2: bool, common: &Common) -> Outcome {
    let kind = ModelKind::from(model);
    let k = match (kind, k) {
        (ModelKind::ErdosRenyi | ModelKind::ChungLu, k) => k.unwrap_or(1),
        (_, Some(k)) => k,
        (_, None) => return Err(Failure::Usage(format!("--k is required for the {kind} model"))),
    };
    let lg = read_graph(input)?;
    let exec = execution(common.threads);
    let (report, chi2_report) = with_threads(common.threads, || -> Result<_, egoscan::Error> {
        let fm = fit(&lg.graph, kind, k, common.seed)?;
        let report = detect_with(&lg.graph, &fm, alpha, exec)?;
        let chi2_report = if chi2 {
            Some(chi2_detect_with(&lg.graph, &fm, alpha, exec)?)
        } else {
            None
        };
        Ok((report, chi2_report))
    })?;
    let flagged = lg.labels_of(&report.flagged);
    println!("reject: {}", if report.reject { "yes" } else { "no" });
    println!("T_n: {:e}", report.t_n);
    println!("threshold: {:e}", report.threshold);
    println!("flagged: {}", flagged.join(","));
    if let Some(c) = &chi2_report {
        println!(
            "chi2: statistic {:.4}, critical value {:.4}, reject {}",
            c.statistic,
            c.critical_value,
            if c.reject { "yes" } else { "no" }
        );
    }
    if common.out.is_some() {
        let mut body = LabeledDetection::new(&report, &lg.labels, kind.as_str());
        body.chi2 = chi2_report;
        let doc = ReportDocument::new(ReportBody::Detection(body))
            .with_seed(Some(common.seed))
            .with_config("input", input.display())
            .with_config("model", kind)
            .with_config("k", k)
            .with_config("alpha", alpha);
        write_report(&doc, open_output(&common.out)?)?;
    }
    Ok(())
}

fn cmd_recover(input: &Path, flagged: Option<Vec<String>>, report: Option<PathBuf>, common: &Common) -> Outcome {
    let lg = read_graph(input)?;
    let labels = match (flagged, report) {
        (Some(labels), _) => labels,
        (None, Some(path)) => {
            let doc = read_report(open_input(&path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            match doc.body {
                ReportBody::Detection(d) => d.flagged,
                _ => return Err(Failure::Data(format!("{} is not a detection report", path.display()))),
            }
        }
        (None, None) => return Err(Failure::Usage("give --flagged or --report".into())),
    };
    let nodes = lg.indices_of(&labels).map_err(|e| Failure::Data(e.to_string()))?;
    let clique = lg.labels_of(&recover_clique(&lg.graph, &nodes).map_err(|e| Failure::Data(e.to_string()))?);
    println!("clique: {}", clique.join(","));
    if common.out.is_some() {
        let doc = ReportDocument::new(ReportBody::Clique(CliqueReport {
            flagged: labels,
            clique,
        }))
        .with_config("input", input.display());
        write_report(&doc, open_output(&common.out)?)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    suite: Option<Suite>,
    scale: f64,
    model: Option<Model>,
    n: usize,
    clique_sizes: Vec<usize>,
    alphas: Vec<f64>,
    replicates: usize,
    chi2: bool,
    common: &Common,
) -> Outcome {
    let mut detectors = vec![Detector::Egonet];
    if chi2 {
        detectors.push(Detector::Chi2);
    }
    let mut doc_config: Vec<(&str, String)> = vec![("detectors", if chi2 { "egonet,chi2" } else { "egonet" }.into())];
    let summary: SimSummary = match (suite, model) {
        (Some(Suite::Study), _) => {
            doc_config.push(("suite", "study".into()));
            doc_config.push(("scale", scale.to_string()));
            study_suite(scale, common.seed, common.threads, &detectors)?
        }
        (None, Some(model)) => {
            let cfg = SimConfig {
                model: model.into(),
                n,
                clique_sizes: clique_sizes.clone(),
                alphas: alphas.clone(),
                replicates,
                base_seed: common.seed,
                detectors,
                threads: common.threads,
            };
            doc_config.push(("model", cfg.model.to_string()));
            doc_config.push(("n", n.to_string()));
            doc_config.push(("clique_sizes", format!("{clique_sizes:?}")));
            doc_config.push(("alphas", format!("{alphas:?}")));
            doc_config.push(("replicates", replicates.to_string()));
            run(&cfg)?
        }
        (None, None) => return Err(Failure::Usage("give --suite or --model".into())),
    };
    print!("{}", render_tables(&summary));
    if common.out.is_some() {
        let mut doc = ReportDocument::new(ReportBody::Simulation(summary)).with_seed(Some(common.seed));
        for (key, value) in doc_config {
            doc = doc.with_config(key, value);
        }
        write_report(&doc, open_output(&common.out)?)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Generate {
            model,
            n,
            p,
            density,
            common,
        } => cmd_generate(model, n, p, density, &common),
        Command::EmbedClique {
            input,
            m,
            members,
            common,
        } => cmd_embed(&input, m, members, &common),
        Command::Detect {
            input,
            model,
            k,
            alpha,
            chi2,
            common,
        } => cmd_detect(&input, model, k, alpha, chi2, &common),
        Command::RecoverClique {
            input,
            flagged,
            report,
            common,
        } => cmd_recover(&input, flagged, report, &common),
        Command::Simulate {
            suite,
            scale,
            model,
            n,
            clique_sizes,
            alphas,
            replicates,
            chi2,
            common,
        } => cmd_simulate(suite, scale, model, n, clique_sizes, alphas, replicates, chi2, &common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
