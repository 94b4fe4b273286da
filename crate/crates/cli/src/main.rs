use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sbm_gof::blocks::{GibbsInit, GibbsOptions, SpectralOptions};
use sbm_gof::gof::GofKind;
use sbm_gof::io::{
    parse_blocks, parse_edge_list, parse_experiment_configs, parse_simulation_config, report_gof_files,
    text_histogram, write_blocks, write_edge_list,
};
use sbm_gof::polytope::{add_membership, er_membership};
use sbm_gof::sampler::{enumerate_fiber, walk_with, ChainSettings};
use sbm_gof::synth::{run_experiment, simulate, Regime, SimulationConfig};
use sbm_gof::testing::{
    estimate_blocks, gof_dispatch, test_known, test_latent, Estimator, TestReport, TestSettings,
};
use sbm_gof::{BlockAssignment, Error, Graph, Model, SufficientStatistics};

#[derive(Parser)]
#[command(name = "sbm-gof", version, about = "Exact goodness-of-fit tests for stochastic block models")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "er")]
    model: Model,
    /// Statistic: chi2-bc or pearson (default depends on the model).
    #[arg(long, global = true)]
    gof: Option<String>,
    #[arg(long, global = true, default_value_t = 1000)]
    num_graphs: usize,
    /// Walk steps before the first draw (default 10·C(n,2)).
    #[arg(long, global = true)]
    burn_in: Option<u64>,
    /// Walk steps between draws (default C(n,2)).
    #[arg(long, global = true)]
    thin: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print a 20-bin text histogram of each fiber's statistics to stderr.
    #[arg(long, global = true)]
    text_hist: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Spectral,
    Gibbs,
}

#[derive(clap::Args)]
struct EstimatorArgs {
    #[arg(long, value_enum, default_value_t = Method::Gibbs)]
    method: Method,
    /// Spectral regularizer.
    #[arg(long, default_value_t = 0.25)]
    tau: f64,
    /// Gibbs draws kept after burn-in.
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    /// Gibbs sweeps discarded first.
    #[arg(long, default_value_t = 500)]
    sweeps_burn_in: usize,
    /// Start the Gibbs chain from a random assignment instead of the spectral estimate.
    #[arg(long)]
    random_init: bool,
    /// Drop assignments with posterior weight at or below this (default 1/iterations).
    #[arg(long)]
    truncation: Option<f64>,
    #[arg(long)]
    max_fibers: Option<usize>,
}

impl EstimatorArgs {
    fn estimator(&self, seed: u64) -> Estimator {
        match self.method {
            Method::Spectral => Estimator::Spectral(SpectralOptions { tau: self.tau, seed, ..Default::default() }),
            Method::Gibbs => Estimator::Gibbs {
                options: GibbsOptions {
                    iterations: self.iterations,
                    burn_in: self.sweeps_burn_in,
                    init: if self.random_init { GibbsInit::Random } else { GibbsInit::Spectral },
                },
                truncation: self.truncation,
                max_fibers: self.max_fibers,
            },
        }
    }
}

#[derive(clap::Args)]
struct TestArgs {
    /// Report (count + 1) / (N + 1).
    #[arg(long)]
    plus_one: bool,
    /// Fit parameters once instead of per sampled assignment.
    #[arg(long)]
    single_fit: bool,
    /// Treat boundary statistics as MLE nonexistence for the ER and additive models.
    #[arg(long)]
    require_interior: bool,
    /// Write each fiber's statistics as CSV plus a JSON sidecar into this directory.
    #[arg(long)]
    samples_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a block-model graph.
    Simulate {
        /// JSON simulation config; overrides the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value = "dense")]
        regime: Regime,
        /// Also write the planted blocks here.
        #[arg(long)]
        blocks_out: Option<PathBuf>,
    },
    /// Estimate a distribution of block assignments.
    EstimateBlocks {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Test with a known block assignment.
    TestKnown {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        blocks: PathBuf,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Test with a latent block assignment.
    TestLatent {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Sample graphs from the fiber of the observed graph.
    SampleFiber {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        blocks: PathBuf,
        /// Write every applied move as a JSON line.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Check the sufficient statistic against the model polytope.
    PolytopeCheck {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        blocks: PathBuf,
    },
    /// Run rejection-rate experiments from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Enumerate a small fiber exhaustively.
    FiberEnum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        blocks: PathBuf,
    },
}

/// Exit codes: 1 usage, 2 data, 3 numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MleNonexistence(_) | Error::ZeroExpected { .. } => 3,
        Error::InvalidParams(_) | Error::Unsupported(_) | Error::TooLarge { .. } => 1,
        _ => 2,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Graph, Error> {
    parse_edge_list(&read(path)?)
}

fn load_blocks(path: &Path, g: &Graph) -> Result<BlockAssignment, Error> {
    let z = parse_blocks(&read(path)?, None)?;
    z.check_graph(g)?;
    Ok(z)
}

struct Ctx {
    out: Option<PathBuf>,
    format: Format,
}

impl Ctx {
    fn emit(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<(), Error> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.emit(&s)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn emit_report(ctx: &Ctx, cli: &Cli, report: &TestReport, test: &TestArgs) -> Result<(), Error> {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if cli.text_hist {
        for f in &report.fibers {
            eprintln!("fiber {} (weight {:.4}, p = {:.4})", f.fiber_id, f.weight, f.p_value);
            eprint!("{}", text_histogram(&f.samples, f.observed, 50));
        }
    }
    if let Some(dir) = &test.samples_dir {
        fs::create_dir_all(dir)?;
        for (csv, side) in report_gof_files(report) {
            fs::write(dir.join(format!("fiber{}.csv", side.fiber_id)), csv)?;
            fs::write(dir.join(format!("fiber{}.json", side.fiber_id)), serde_json::to_string_pretty(&side)?)?;
        }
    }
    match ctx.format {
        Format::Json => {
            let mut r = report.clone();
            if test.samples_dir.is_some() {
                r.fibers.iter_mut().for_each(|f| f.samples.clear());
            }
            ctx.emit_json(&r)
        }
        Format::Csv => {
            let mut s = String::from("fiber_id,weight,observed,p_value,status\n");
            for f in &report.fibers {
                let status = serde_json::to_value(&f.status)?;
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    f.fiber_id,
                    f.weight,
                    fmt_opt(f.observed),
                    f.p_value,
                    status["status"].as_str().unwrap_or("")
                ));
            }
            s.push_str(&format!("overall,1,,{},\n", report.p_value));
            ctx.emit(&s)
        }
    }
}

fn test_settings(cli: &Cli, test: &TestArgs) -> TestSettings {
    TestSettings {
        chain: chain(cli),
        refit_per_fiber: !test.single_fit,
        plus_one: test.plus_one,
        require_interior: test.require_interior,
        keep_samples: cli.text_hist || test.samples_dir.is_some() || cli.format == Format::Json,
    }
}

fn chain(cli: &Cli) -> ChainSettings {
    ChainSettings { burn_in: cli.burn_in, thin: cli.thin, num_graphs: cli.num_graphs }
}

fn gof(cli: &Cli) -> Result<GofKind, Error> {
    // An unknown statistic name is a usage error, not a data error.
    let choice = gof_dispatch(cli.model, cli.gof.as_deref()).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(choice.kind)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let ctx = Ctx { out: cli.out.clone(), format: cli.format };
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    match &cli.command {
        Command::Simulate { config, n, k, regime, blocks_out } => {
            let cfg = match config {
                Some(p) => parse_simulation_config(&read(p)?)?,
                None => {
                    let n = n.ok_or_else(|| Error::InvalidParams("give --n or --config".into()))?;
                    let mut c = SimulationConfig::new(cli.model, n, *regime);
                    c.k = *k;
                    c.seed = cli.seed;
                    c
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let rep = simulate(&cfg, &mut rng)?;
            if let Some(p) = blocks_out {
                fs::write(p, write_blocks(&rep.z))?;
            }
            match ctx.format {
                Format::Csv => ctx.emit(&write_edge_list(&rep.graph)),
                Format::Json => {
                    let edges: Vec<[usize; 2]> = rep.graph.edges().map(|d| [d.u() + 1, d.v() + 1]).collect();
                    ctx.emit_json(&serde_json::json!({
                        "n": rep.graph.n(),
                        "edges": edges,
                        "z": rep.z.to_1based(),
                        "params": rep.params,
                    }))
                }
            }
        }
        Command::EstimateBlocks { graph, k, estimator } => {
            let g = load_graph(graph)?;
            let dist = estimate_blocks(&g, *k, &estimator.estimator(cli.seed), &mut rng)?;
            match ctx.format {
                Format::Json => ctx.emit_json(&dist),
                Format::Csv => {
                    let mut s = String::from("weight,z\n");
                    for a in dist.atoms() {
                        let z: Vec<String> = a.z.to_1based().iter().map(|b| b.to_string()).collect();
                        s.push_str(&format!("{},{}\n", a.weight, z.join(" ")));
                    }
                    ctx.emit(&s)
                }
            }
        }
        Command::TestKnown { graph, blocks, test } => {
            let g = load_graph(graph)?;
            let z = load_blocks(blocks, &g)?;
            let mut report = test_known(&g, &z, cli.model, gof(cli)?, &test_settings(cli, test), &mut rng)?;
            report.seed = Some(cli.seed);
            emit_report(&ctx, cli, &report, test)
        }
        Command::TestLatent { graph, k, estimator, test } => {
            let g = load_graph(graph)?;
            let est = estimator.estimator(cli.seed);
            let mut report =
                test_latent(&g, cli.model, gof(cli)?, *k, &est, &test_settings(cli, test), &mut rng)?;
            report.seed = Some(cli.seed);
            emit_report(&ctx, cli, &report, test)
        }
        Command::SampleFiber { graph, blocks, audit } => {
            let g = load_graph(graph)?;
            let z = load_blocks(blocks, &g)?;
            let mut graphs = Vec::new();
            let mut log = String::new();
            let diag = walk_with(
                &g,
                &z,
                cli.model,
                &chain(cli),
                &mut rng,
                |s| graphs.push(s.edges().map(|d| [d.u() + 1, d.v() + 1]).collect::<Vec<_>>()),
                |m| {
                    if audit.is_some() {
                        log.push_str(&serde_json::to_string(m).unwrap_or_default());
                        log.push('\n');
                    }
                },
            )?;
            if let Some(p) = audit {
                fs::write(p, log)?;
            }
            if diag.is_stuck() {
                eprintln!("warning: the walk never moved");
            }
            match ctx.format {
                Format::Json => ctx.emit_json(&serde_json::json!({ "diagnostics": diag, "graphs": graphs })),
                Format::Csv => {
                    let mut s = String::from("sample,u,v\n");
                    for (i, edges) in graphs.iter().enumerate() {
                        for [u, v] in edges {
                            s.push_str(&format!("{i},{u},{v}\n"));
                        }
                    }
                    ctx.emit(&s)
                }
            }
        }
        Command::PolytopeCheck { graph, blocks } => {
            let g = load_graph(graph)?;
            let z = load_blocks(blocks, &g)?;
            let t = SufficientStatistics::compute(cli.model, &g, &z)?;
            let verdict = match cli.model {
                Model::Er => er_membership(&t, z.sizes())?,
                Model::Add => add_membership(&t, z.sizes())?,
                Model::Beta => {
                    return Err(Error::Unsupported(
                        "no polytope check for the β model; run test-known to see whether the fit exists".into(),
                    ))
                }
            };
            match ctx.format {
                Format::Json => ctx.emit_json(&serde_json::json!({ "statistic": t.values, "membership": verdict })),
                Format::Csv => ctx.emit(&format!("verdict,tight\n{:?},{}\n", verdict.verdict, verdict.tight.len())),
            }
        }
        Command::Experiment { config } => {
            let configs = parse_experiment_configs(&read(config)?)?;
            let cells = configs.iter().map(run_experiment).collect::<Result<Vec<_>, _>>()?;
            match ctx.format {
                Format::Json => ctx.emit_json(&cells),
                Format::Csv => {
                    let mut s =
                        String::from("data_model,null_model,n,regime,rejection_rate,completed,failures,mean_density\n");
                    for c in &cells {
                        s.push_str(&format!(
                            "{},{},{},{:?},{},{},{},{:.4}\n",
                            c.data_model, c.null_model, c.n, c.regime, c.rejection_rate, c.completed, c.failures,
                            c.mean_density
                        ));
                    }
                    ctx.emit(&s.to_lowercase())
                }
            }
        }
        Command::FiberEnum { graph, blocks } => {
            let g = load_graph(graph)?;
            let z = load_blocks(blocks, &g)?;
            let fiber = enumerate_fiber(&g, &z, cli.model)?;
            let graphs: Vec<Vec<[usize; 2]>> =
                fiber.iter().map(|f| f.edges().map(|d| [d.u() + 1, d.v() + 1]).collect()).collect();
            match ctx.format {
                Format::Json => ctx.emit_json(&serde_json::json!({ "size": fiber.len(), "graphs": graphs })),
                Format::Csv => ctx.emit(&format!("size\n{}\n", fiber.len())),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
