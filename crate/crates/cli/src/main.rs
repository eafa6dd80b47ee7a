//! `sbm`: thresholds, the contiguity functional, samplers and finite-n
//! checks for sparse stochastic block models.
//!
//! Exit codes: 0 success, 2 invalid input, 3 budget exceeded, 1 I/O failure.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sbm_thresholds::detection::{
    bayes_overlap_experiment, default_slack, exact_marginals, exhaustive_good_search, goodness, Labeling,
};
use sbm_thresholds::experiments::{default_window, exact_second_moment, records_to_csv, run_sweep, DEFAULT_BUDGET};
use sbm_thresholds::graph::{count_cycles, cycle_poisson_check, sample_er, sample_sbm, Graph};
use sbm_thresholds::qfunc::{phi_max, phi_scan, sufficiency_verdict};
use sbm_thresholds::thresholds::{d_lower, d_upper, kesten_stigum, lambda_star, ThresholdReport};
use sbm_thresholds::{Error, ModelParams, ParamSpec};

#[derive(Parser)]
#[command(name = "sbm", version, about = "Detection thresholds and finite-n checks for sparse block models")]
struct Cli {
    /// Master seed; every replica derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Label distribution for a general model, comma separated.
    #[arg(long, value_delimiter = ',')]
    pi: Option<Vec<f64>>,
    /// Connectivity matrix for a general model, as JSON rows.
    #[arg(long = "M", alias = "m")]
    m: Option<String>,
    /// A JSON parameter file: {"q", "d", "lambda"} or {"pi", "M"}.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ParamSpec> {
        if let Some(path) = &self.params {
            return Ok(ParamSpec::from_json(&read_text(path)?)?);
        }
        match (&self.pi, &self.m) {
            (Some(pi), Some(m)) => {
                let m: Vec<Vec<f64>> = serde_json::from_str(m).context("--M must be a JSON array of rows")?;
                Ok(ParamSpec::General { pi: pi.clone(), m })
            }
            (None, None) => match (self.q, self.d, self.lambda) {
                (Some(q), Some(d), Some(lambda)) => Ok(ParamSpec::Symmetric { q, d, lambda }),
                _ => bail!(Error::InvalidParams("give --q, --d and --lambda, or --pi and --M, or --params".into())),
            },
            _ => bail!(Error::InvalidParams("--pi and --M go together".into())),
        }
    }

    fn build(&self) -> Result<ModelParams> {
        Ok(self.spec()?.build()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph as an edge list.
    Gen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        /// Sample G(n, d/n) instead of the block model.
        #[arg(long)]
        er: bool,
        /// Also write the planted labels, one per line.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Threshold report for the symmetric model.
    Thresholds {
        #[arg(long)]
        q: usize,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        d: Option<f64>,
        /// Also optimize Q with this many restarts (needs --d).
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// The crossing of d_upper with the Kesten–Stigum bound, per q.
    LambdaStar {
        #[arg(long, value_delimiter = ',', required = true)]
        q_list: Vec<usize>,
    },
    /// Optimize the contiguity functional Q and report the verdict.
    QFunctional {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Φ along the path from J/q to the identity.
    PhiScan {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        d: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Check a labeling for goodness, or search all labelings of a small graph.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        d: f64,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// `auto` (n^{2/3}) or a number.
        #[arg(long, default_value = "auto")]
        slack: String,
        /// Labeling to check; without it every labeling is searched.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Exact posterior marginals of a graph, or the Bayes-overlap experiment.
    Posterior {
        #[command(flatten)]
        model: ModelArgs,
        /// Graph to condition on; without it graphs are sampled.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
    /// Short-cycle counts of a graph, or Poisson-mean checks over samples.
    Cycles {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 5)]
        m_max: usize,
    },
    /// Exact finite-n second moment along a ladder of n.
    SecondMoment {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        /// Ω_n half-width; defaults to n^{2/3}.
        #[arg(long)]
        a_n: Option<f64>,
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Run a JSON experiment config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_graph(path: &Path) -> Result<Graph> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Graph::read_edge_list(BufReader::new(file))?)
}

/// What a command produces: a single JSON document, a table, or raw text.
enum Output {
    Doc(Value),
    /// Rows, with the columns to put first in CSV.
    Table(Vec<Value>, &'static [&'static str]),
    Text(String),
}

fn doc<T: Serialize>(x: &T) -> Result<Output> {
    Ok(Output::Doc(serde_json::to_value(x)?))
}

fn table<T: Serialize>(rows: &[T], leading: &'static [&'static str]) -> Result<Output> {
    let rows = rows.iter().map(serde_json::to_value).collect::<Result<_, _>>()?;
    Ok(Output::Table(rows, leading))
}

fn render(output: Output, format: Format) -> Result<String> {
    Ok(match (output, format) {
        (Output::Text(s), _) => s,
        (Output::Doc(v), Format::Json) => serde_json::to_string_pretty(&v)? + "\n",
        (Output::Table(rows, _), Format::Json) => serde_json::to_string_pretty(&rows)? + "\n",
        (Output::Doc(v), Format::Csv) => records_to_csv(&[v], &[])?,
        (Output::Table(rows, leading), Format::Csv) => records_to_csv(&rows, leading)?,
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let seed = cli.seed;
    let (output, default_format) = match &cli.command {
        Command::Gen { model, n, er, labels } => {
            let params = model.build()?;
            let text = if *er {
                sample_er(*n, params.degree(), seed)?.to_edge_list()
            } else {
                let sample = sample_sbm(&params, *n, seed)?;
                if let Some(path) = labels {
                    fs::write(path, sample.sigma.to_lines()).with_context(|| format!("writing {}", path.display()))?;
                }
                sample.graph.to_edge_list()
            };
            (Output::Text(text), Format::Json)
        }
        Command::Thresholds { q, lambda, d, restarts } => {
            let out = match d {
                Some(d) => {
                    let report = ThresholdReport::new(*q, *d, *lambda)?;
                    match restarts {
                        Some(r) => doc(&report.with_q_value(*r, seed)?)?,
                        None => doc(&report)?,
                    }
                }
                None => {
                    if restarts.is_some() {
                        bail!(Error::InvalidInput("--restarts needs --d".into()));
                    }
                    let extended = |x: f64| if x.is_finite() { json!(x) } else { json!("inf") };
                    Output::Doc(json!({
                        "q": q,
                        "lambda": lambda,
                        "d_upper": extended(d_upper(*q, *lambda)?),
                        "d_lower": extended(d_lower(*q, *lambda)?),
                        "ks": extended(kesten_stigum(*lambda)),
                        "lambda_star": lambda_star(*q).ok(),
                        "lower_bound_vacuous": *q == 2,
                    }))
                }
            };
            (out, Format::Json)
        }
        Command::LambdaStar { q_list } => {
            let rows: Vec<Value> = q_list
                .iter()
                .map(|&q| match lambda_star(q) {
                    Ok(l) => json!({ "q": q, "lambda_star": l }),
                    Err(e) => json!({ "q": q, "lambda_star": null, "note": e.to_string() }),
                })
                .collect();
            (Output::Table(rows, &["q", "lambda_star"]), Format::Csv)
        }
        Command::QFunctional { model, restarts } => {
            let params = model.build()?;
            let verdict = sufficiency_verdict(&params, *restarts, seed)?;
            let phi = match params.symmetric_params() {
                Some(p) => Some(phi_max(p.q, p.d, p.lambda, *restarts, seed)?.value),
                None => None,
            };
            let out = json!({
                "sufficiency": verdict.sufficiency,
                "q_result": verdict.q,
                "d_lambda2_sq": params.degree() * params.lambda2().powi(2),
                "phi_max": phi,
            });
            (Output::Doc(out), Format::Json)
        }
        Command::PhiScan { q, d, lambda, points } => (table(&phi_scan(*q, *d, *lambda, *points)?, &["t"])?, Format::Csv),
        Command::Detect {
            input,
            q,
            d,
            lambda,
            slack,
            labels,
        } => {
            let g = read_graph(input)?;
            let params = ModelParams::symmetric(*q, *d, *lambda)?
                .symmetric_params()
                .expect("built from symmetric parameters");
            let slack = match slack.as_str() {
                "auto" => default_slack(g.n()),
                s => s
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("--slack must be `auto` or a number, got {s}")))?,
            };
            let out = match labels {
                Some(path) => {
                    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
                    let tau = Labeling::read_lines(BufReader::new(file), *q)?;
                    doc(&goodness(&g, &tau, &params, slack)?)?
                }
                None => {
                    let good = exhaustive_good_search(&g, &params, slack)?;
                    let sep = if *q <= 10 { "" } else { "," };
                    let shown: Vec<String> = good
                        .iter()
                        .take(10)
                        .map(|l| l.values().iter().map(usize::to_string).collect::<Vec<_>>().join(sep))
                        .collect();
                    Output::Doc(json!({ "slack": slack, "good_count": good.len(), "first": shown }))
                }
            };
            (out, Format::Json)
        }
        Command::Posterior { model, input, n, reps } => {
            let params = model.build()?;
            let out = match input {
                Some(path) => {
                    let g = read_graph(path)?;
                    let rows: Vec<Value> = exact_marginals(&g, &params, None)?
                        .into_iter()
                        .enumerate()
                        .map(|(v, m)| json!({ "vertex": v, "marginal": m }))
                        .collect();
                    Output::Table(rows, &["vertex"])
                }
                None => doc(&bayes_overlap_experiment(&params, *n, *reps, seed)?)?,
            };
            (out, Format::Json)
        }
        Command::Cycles {
            model,
            input,
            n,
            reps,
            m_max,
        } => {
            let out = match input {
                Some(path) => {
                    let counts = count_cycles(&read_graph(path)?, *m_max)?;
                    let rows: Vec<Value> = counts.iter().map(|(m, c)| json!({ "m": m, "count": c })).collect();
                    Output::Table(rows, &["m"])
                }
                None => {
                    let report = cycle_poisson_check(&model.build()?, *n, *m_max, *reps, seed)?;
                    let rows: Vec<Value> = report
                        .rows
                        .iter()
                        .map(|r| {
                            let (z_q, z_p) = r.z_scores();
                            let mut v = serde_json::to_value(r).expect("plain numbers");
                            v["z_q"] = json!(z_q);
                            v["z_p"] = json!(z_p);
                            v
                        })
                        .collect();
                    Output::Table(rows, &["m"])
                }
            };
            (out, Format::Csv)
        }
        Command::SecondMoment {
            model,
            n_list,
            a_n,
            budget,
        } => {
            let params = model.build()?;
            let records = n_list
                .iter()
                .map(|&n| {
                    exact_second_moment(
                        &params,
                        n,
                        a_n.unwrap_or_else(|| default_window(n)),
                        budget.unwrap_or(DEFAULT_BUDGET),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            (table(&records, &["n"])?, Format::Csv)
        }
        Command::Sweep { config } => {
            let dataset = run_sweep(&read_text(config)?)?;
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => dataset.to_json()?,
                Format::Csv => dataset.to_csv()?,
            };
            (Output::Text(text), Format::Json)
        }
    };
    let text = render(output, cli.format.unwrap_or(default_format))?;
    match &cli.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::BudgetExceeded(_) => 3,
                Error::Io(_) => 1,
                _ => 2,
            };
        }
        if cause.is::<io::Error>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
