//! Runs a template suite through the HLL model, a compiler mapping and a set of
//! microarchitecture models, and classifies every variant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::c11ax::eval_hll;
use crate::litmus::{expand_template, variant_orders, Expect, LitmusTemplate};
use crate::mapping::{compile_test, IsaProgram, MappingId};
use crate::uarchax::{eval_uarch, model_preset, IsaExecution, McmVersion, ModelConfig, ModelId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Bug,
    OverlyStrict,
    Equivalent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Bug => "Bug",
            Verdict::OverlyStrict => "OverlyStrict",
            Verdict::Equivalent => "Equivalent",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

pub fn classify(hll: Expect, observable: bool) -> Verdict {
    match (hll, observable) {
        (Expect::Forbidden, true) => Verdict::Bug,
        (Expect::Permitted, false) => Verdict::OverlyStrict,
        _ => Verdict::Equivalent,
    }
}

/// A model under a display name and mcm label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    pub mcm: String,
    pub config: ModelConfig,
}

impl ModelSpec {
    pub fn preset(id: ModelId, mcm: McmVersion) -> ModelSpec {
        ModelSpec { name: id.as_str().to_string(), mcm: mcm.as_str().to_string(), config: model_preset(id, mcm) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantResult {
    pub suite: String,
    pub variant_name: String,
    pub orders: Vec<String>,
    pub mapping: String,
    pub model: String,
    pub mcm: String,
    pub hll_verdict: Option<Expect>,
    pub observable: Option<bool>,
    pub class: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<IsaExecution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DriverError {
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("report: {0}")]
    Report(String),
}

struct Prepared {
    name: String,
    orders: Vec<String>,
    hll: Result<Expect, String>,
    prog: Result<IsaProgram, String>,
}

/// Evaluates every variant of `tpl` on every model. Results are ordered by
/// model, then by variant, whatever the degree of parallelism.
pub fn tricheck_run(
    suite: &str,
    tpl: &LitmusTemplate,
    mapping: MappingId,
    models: &[ModelSpec],
    witnesses: bool,
    jobs: Option<usize>,
) -> Result<Vec<VariantResult>, DriverError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| DriverError::Pool(e.to_string()))?;
    Ok(pool.install(|| run_in_pool(suite, tpl, mapping, models, witnesses)))
}

fn run_in_pool(suite: &str, tpl: &LitmusTemplate, mapping: MappingId, models: &[ModelSpec], witnesses: bool) -> Vec<VariantResult> {
    let variants = expand_template(tpl);
    let prepared: Vec<Prepared> = variants
        .par_iter()
        .map(|v| Prepared {
            name: v.name.clone(),
            orders: variant_orders(tpl, v).iter().map(|o| o.as_str().to_string()).collect(),
            hll: eval_hll(v).map(|h| h.target).map_err(|e| e.to_string()),
            prog: compile_test(v, mapping).map_err(|e| e.to_string()),
        })
        .collect();
    let jobs: Vec<(&ModelSpec, &Prepared)> = models.iter().flat_map(|m| prepared.iter().map(move |p| (m, p))).collect();
    jobs.par_iter()
        .map(|(m, p)| {
            let mut r = VariantResult {
                suite: suite.to_string(),
                variant_name: p.name.clone(),
                orders: p.orders.clone(),
                mapping: mapping.as_str().to_string(),
                model: m.name.clone(),
                mcm: m.mcm.clone(),
                hll_verdict: p.hll.as_ref().ok().copied(),
                observable: None,
                class: Verdict::Inconclusive,
                witness: None,
                error: None,
            };
            let prog = match &p.prog {
                Ok(prog) => prog,
                Err(e) => {
                    r.error = Some(e.clone());
                    return r;
                }
            };
            match eval_uarch(prog, &m.config) {
                Ok(o) => {
                    r.observable = Some(o.observable);
                    if witnesses {
                        r.witness = o.witness;
                    }
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            match (&p.hll, r.observable) {
                (Ok(h), Some(obs)) => r.class = classify(*h, obs),
                (Err(e), _) => r.error = Some(e.clone()),
                _ => {}
            }
            r
        })
        .collect()
}

/// Per (suite, model, mcm, mapping) tallies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollup {
    pub suite: String,
    pub model: String,
    pub mcm: String,
    pub mapping: String,
    pub bugs: usize,
    pub overly_strict: usize,
    pub equivalent: usize,
    pub inconclusive: usize,
}

impl Rollup {
    pub fn total(&self) -> usize {
        self.bugs + self.overly_strict + self.equivalent + self.inconclusive
    }
}

/// Rollups in first-appearance order.
pub fn rollup(results: &[VariantResult]) -> Vec<Rollup> {
    let mut index: BTreeMap<(String, String, String, String), usize> = BTreeMap::new();
    let mut out: Vec<Rollup> = Vec::new();
    for r in results {
        let key = (r.suite.clone(), r.model.clone(), r.mcm.clone(), r.mapping.clone());
        let i = *index.entry(key).or_insert_with(|| {
            out.push(Rollup {
                suite: r.suite.clone(),
                model: r.model.clone(),
                mcm: r.mcm.clone(),
                mapping: r.mapping.clone(),
                ..Rollup::default()
            });
            out.len() - 1
        });
        let e = &mut out[i];
        match r.class {
            Verdict::Bug => e.bugs += 1,
            Verdict::OverlyStrict => e.overly_strict += 1,
            Verdict::Equivalent => e.equivalent += 1,
            Verdict::Inconclusive => e.inconclusive += 1,
        }
    }
    out
}

pub fn count_class(results: &[VariantResult], class: Verdict) -> usize {
    results.iter().filter(|r| r.class == class).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "text" => Some(ReportFormat::Text),
            "json" => Some(ReportFormat::Json),
            "csv" => Some(ReportFormat::Csv),
            _ => None,
        }
    }
}

pub const CSV_HEADER: &str = "suite,model,mcm,mapping,bugs,overly_strict,equivalent";

pub fn emit_report(results: &[VariantResult], format: ReportFormat) -> String {
    let mut s = String::new();
    match format {
        ReportFormat::Json => {
            s = serde_json::to_string_pretty(results).expect("results serialize");
            s.push('\n');
        }
        ReportFormat::Csv => {
            s.push_str(CSV_HEADER);
            s.push('\n');
            for r in rollup(results) {
                let _ = writeln!(s, "{},{},{},{},{},{},{}", r.suite, r.model, r.mcm, r.mapping, r.bugs, r.overly_strict, r.equivalent);
            }
        }
        ReportFormat::Text => {
            for r in results {
                let hll = match r.hll_verdict {
                    Some(Expect::Permitted) => "permitted",
                    Some(Expect::Forbidden) => "forbidden",
                    None => "-",
                };
                let obs = match r.observable {
                    Some(true) => "observable",
                    Some(false) => "unobservable",
                    None => "-",
                };
                let _ = write!(s, "{:<32} {:<8} {:<5} {:<10} {:<13} {}", r.variant_name, r.model, r.mcm, hll, obs, r.class.as_str());
                if let Some(e) = &r.error {
                    let _ = write!(s, " ({e})");
                }
                s.push('\n');
                if let Some(w) = &r.witness {
                    let _ = writeln!(s, "    witness: {}", witness_line(w));
                }
            }
            for r in rollup(results) {
                let _ = writeln!(
                    s,
                    "{} {} {} {}: {} bugs, {} overly strict, {} equivalent, {} inconclusive of {}",
                    r.suite,
                    r.model,
                    r.mcm,
                    r.mapping,
                    r.bugs,
                    r.overly_strict,
                    r.equivalent,
                    r.inconclusive,
                    r.total()
                );
            }
        }
    }
    s
}

pub fn witness_line(w: &IsaExecution) -> String {
    use crate::uarchax::Node;
    w.timeline
        .iter()
        .map(|n| match n {
            Node::Exec((t, p)) => format!("ex T{t}.{p}"),
            Node::Prop { write: (t, p), core: Some(c) } => format!("prop T{t}.{p}->C{c}"),
            Node::Prop { write: (t, p), core: None } => format!("prop T{t}.{p}->all"),
        })
        .collect::<Vec<_>>()
        .join(" < ")
}

pub fn load_report(json: &str) -> Result<Vec<VariantResult>, DriverError> {
    serde_json::from_str(json).map_err(|e| DriverError::Report(e.to_string()))
}
