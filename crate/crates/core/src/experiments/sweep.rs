//! Config-driven experiment runner with provenance.
//!
//! A config is a JSON document
//!
//! ```json
//! {
//!   "seed": 7,
//!   "experiments": [
//!     {"kind": "lambda-star", "qs": [5, 6, 7]},
//!     {"kind": "q-sweep", "restarts": 16,
//!      "points": [{"q": 3, "lambda": 0.3, "d_multiplier": 0.95, "relative_to": "lower"}]}
//!   ]
//! }
//! ```
//!
//! Every computation unit gets its own seed `replica_seed(seed, unit)`, units
//! numbered in config order, so reruns are byte-identical. A failing unit
//! becomes an error row and the sweep carries on.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::second_moment::{default_window, exact_second_moment, DEFAULT_BUDGET};
use crate::detection::bayes_overlap_experiment;
use crate::error::{Error, Result};
use crate::graph::cycle_poisson_check;
use crate::model::ModelParams;
use crate::qfunc::{phi_max, sufficiency_verdict};
use crate::rng::replica_seed;
use crate::thresholds::{d_lower, d_upper, kesten_stigum, lambda_star, ThresholdReport};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    /// One `ThresholdReport` per point, with `Q` when `restarts` is given.
    Thresholds {
        points: Vec<PointSpec>,
        #[serde(default)]
        restarts: Option<usize>,
    },
    LambdaStar {
        qs: Vec<usize>,
    },
    /// `Q`, its verdict and `max Φ` per point.
    QSweep {
        points: Vec<PointSpec>,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    /// One row per point and cycle length.
    Cycles {
        points: Vec<PointSpec>,
        n: usize,
        reps: usize,
        #[serde(default = "default_m_max")]
        m_max: usize,
    },
    /// One row per point and `n`.
    SecondMoment {
        points: Vec<PointSpec>,
        ns: Vec<usize>,
        #[serde(default)]
        a_n: Option<f64>,
        #[serde(default)]
        budget: Option<f64>,
    },
    BayesOverlap {
        points: Vec<PointSpec>,
        n: usize,
        reps: usize,
    },
}

fn default_restarts() -> usize {
    32
}

fn default_m_max() -> usize {
    5
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Thresholds { .. } => "thresholds",
            Experiment::LambdaStar { .. } => "lambda-star",
            Experiment::QSweep { .. } => "q-sweep",
            Experiment::Cycles { .. } => "cycles",
            Experiment::SecondMoment { .. } => "second-moment",
            Experiment::BayesOverlap { .. } => "bayes-overlap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    Lower,
    Upper,
    Ks,
}

/// A symmetric parameter point. The degree is either given directly as `d`
/// or as `d_multiplier` times a threshold (`relative_to`, default `lower`).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub q: usize,
    pub lambda: f64,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub d_multiplier: Option<f64>,
    #[serde(default)]
    pub relative_to: Option<Reference>,
}

impl PointSpec {
    pub fn degree(&self) -> Result<f64> {
        match (self.d, self.d_multiplier) {
            (Some(d), None) => Ok(d),
            (None, Some(k)) => {
                let base = match self.relative_to.unwrap_or(Reference::Lower) {
                    Reference::Lower => d_lower(self.q, self.lambda)?,
                    Reference::Upper => d_upper(self.q, self.lambda)?,
                    Reference::Ks => kesten_stigum(self.lambda),
                };
                let d = k * base;
                if !d.is_finite() {
                    return Err(Error::InvalidParams(format!("reference threshold is {base}, no finite degree")));
                }
                Ok(d)
            }
            _ => Err(Error::InvalidInput("a point needs exactly one of d and d_multiplier".into())),
        }
    }

    fn model(&self) -> Result<(f64, ModelParams)> {
        let d = self.degree()?;
        Ok((d, ModelParams::symmetric(self.q, d, self.lambda)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: &'static str,
    pub index: usize,
    /// Seed of the computation unit that produced this row.
    pub seed: u64,
    pub status: RowStatus,
    pub error: Option<String>,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    /// SHA-256 of the canonical (key-sorted, compact) config JSON.
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
    pub rows: Vec<Row>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Hex SHA-256 of the config after canonicalization, so whitespace and key
/// order do not change the hash.
pub fn config_hash(text: &str) -> Result<String> {
    let value: Value = serde_json::from_str(text)?;
    let digest = Sha256::digest(serde_json::to_vec(&value)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

struct Builder {
    master: u64,
    unit: u64,
    rows: Vec<Row>,
}

impl Builder {
    fn next_seed(&mut self) -> u64 {
        let seed = replica_seed(self.master, self.unit);
        self.unit += 1;
        seed
    }

    fn push(&mut self, experiment: &'static str, seed: u64, result: Result<Value>, context: Value) {
        let (status, error, data) = match result {
            Ok(data) => (RowStatus::Ok, None, data),
            Err(e) => (RowStatus::Error, Some(e.to_string()), context),
        };
        let index = self.rows.len();
        self.rows.push(Row {
            experiment,
            index,
            seed,
            status,
            error,
            data,
        });
    }
}

fn point_context(p: &PointSpec) -> Value {
    json!({ "q": p.q, "lambda": p.lambda, "d": p.d, "d_multiplier": p.d_multiplier })
}

/// Runs a parsed config. `text` is the raw config, used only for the hash.
pub fn run_sweep(text: &str) -> Result<Dataset> {
    let config = SweepConfig::from_json(text)?;
    let mut b = Builder {
        master: config.seed,
        unit: 0,
        rows: Vec::new(),
    };
    for exp in &config.experiments {
        let name = exp.name();
        match exp {
            Experiment::Thresholds { points, restarts } => {
                for p in points {
                    let seed = b.next_seed();
                    let result = p.degree().and_then(|d| {
                        let report = ThresholdReport::new(p.q, d, p.lambda)?;
                        let report = match restarts {
                            Some(r) => report.with_q_value(*r, seed)?,
                            None => report,
                        };
                        Ok(serde_json::to_value(report)?)
                    });
                    b.push(name, seed, result, point_context(p));
                }
            }
            Experiment::LambdaStar { qs } => {
                for &q in qs {
                    let seed = b.next_seed();
                    let result = lambda_star(q).map(|l| json!({ "q": q, "lambda_star": l }));
                    b.push(name, seed, result, json!({ "q": q }));
                }
            }
            Experiment::QSweep { points, restarts } => {
                for p in points {
                    let seed = b.next_seed();
                    let result = p.model().and_then(|(d, params)| {
                        let verdict = sufficiency_verdict(&params, *restarts, seed)?;
                        let phi = phi_max(p.q, d, p.lambda, *restarts, seed)?;
                        Ok(json!({
                            "q": p.q,
                            "lambda": p.lambda,
                            "d": d,
                            "d_lambda_sq": d * p.lambda * p.lambda,
                            "q_value": verdict.q.value,
                            "hessian_ratio": verdict.q.hessian_ratio,
                            "best_found": verdict.q.best_found,
                            "converged_restarts": verdict.q.converged_restarts,
                            "sufficiency": verdict.sufficiency,
                            "phi_max": phi.value,
                        }))
                    });
                    b.push(name, seed, result, point_context(p));
                }
            }
            Experiment::Cycles { points, n, reps, m_max } => {
                for p in points {
                    let seed = b.next_seed();
                    let report = p.model().and_then(|(d, params)| {
                        Ok((d, cycle_poisson_check(&params, *n, *m_max, *reps, seed)?))
                    });
                    match report {
                        Ok((d, report)) => {
                            for row in &report.rows {
                                let (z_q, z_p) = row.z_scores();
                                let mut data = serde_json::to_value(row)?;
                                let extra = json!({
                                    "q": p.q, "lambda": p.lambda, "d": d, "n": n, "reps": reps,
                                    "z_q": z_q, "z_p": z_p,
                                });
                                merge(&mut data, extra);
                                b.push(name, seed, Ok(data), Value::Null);
                            }
                        }
                        Err(e) => b.push(name, seed, Err(e), point_context(p)),
                    }
                }
            }
            Experiment::SecondMoment { points, ns, a_n, budget } => {
                for p in points {
                    for &n in ns {
                        let seed = b.next_seed();
                        let result = p.model().and_then(|(d, params)| {
                            let window = a_n.unwrap_or_else(|| default_window(n));
                            let record = exact_second_moment(&params, n, window, budget.unwrap_or(DEFAULT_BUDGET))?;
                            let mut data = serde_json::to_value(record)?;
                            merge(&mut data, json!({ "lambda": p.lambda, "d": d }));
                            Ok(data)
                        });
                        let mut context = point_context(p);
                        merge(&mut context, json!({ "n": n }));
                        b.push(name, seed, result, context);
                    }
                }
            }
            Experiment::BayesOverlap { points, n, reps } => {
                for p in points {
                    let seed = b.next_seed();
                    let result = p.model().and_then(|(d, params)| {
                        let r = bayes_overlap_experiment(&params, *n, *reps, seed)?;
                        Ok(json!({
                            "q": p.q, "lambda": p.lambda, "d": d, "n": r.n, "reps": r.reps,
                            "anchored": r.anchored, "mean": r.mean, "std_err": r.std_err,
                            "ci_low": r.ci_low, "ci_high": r.ci_high,
                        }))
                    });
                    b.push(name, seed, result, point_context(p));
                }
            }
        }
    }
    Ok(Dataset {
        config_hash: config_hash(text)?,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
        rows: b.rows,
    })
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

const FIXED_COLUMNS: [&str; 5] = ["experiment", "index", "seed", "status", "error"];

impl Dataset {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Wide CSV: provenance as `#` comment lines, then the fixed columns and
    /// the sorted union of data fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "# config_hash={}\n# seed={}\n# version={}\n",
            self.config_hash, self.seed, self.version
        );
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut record = json!({
                    "experiment": row.experiment,
                    "index": row.index,
                    "seed": row.seed,
                    "status": row.status,
                    "error": row.error,
                });
                merge(&mut record, row.data.clone());
                record
            })
            .collect();
        out.push_str(&records_to_csv(&records, &FIXED_COLUMNS)?);
        Ok(out)
    }
}

/// Writes JSON objects as CSV: the `leading` columns first, then the sorted
/// union of all other keys. Missing fields are empty; non-scalar fields are
/// written as compact JSON. An empty slice gives an empty string.
pub fn records_to_csv(records: &[Value], leading: &[&str]) -> Result<String> {
    if records.is_empty() {
        return Ok(String::new());
    }
    let rest: BTreeSet<&str> = records
        .iter()
        .filter_map(Value::as_object)
        .flat_map(|o| o.keys().map(String::as_str))
        .filter(|k| !leading.contains(k))
        .collect();
    let columns: Vec<&str> = leading.iter().copied().chain(rest).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns)?;
    for record in records {
        w.write_record(columns.iter().map(|c| record.get(*c).map(csv_cell).unwrap_or_default()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Scalar JSON as plain text, anything else as compact JSON.
pub fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        _ => v.to_string(),
    }
}
