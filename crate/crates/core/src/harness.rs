//! Seeded Monte-Carlo engine for exact-reconstruction-rate experiments.
//!
//! A plan fixes the problem dimensions, signal class, sparsity sweep,
//! trial count, algorithm roster, and a master seed. Each `(sparsity,
//! trial)` pair maps to its own random stream, so every algorithm in the
//! roster sees the identical instance (paired comparison) and reruns are
//! bit-reproducible regardless of worker scheduling.

use crate::algo::{run_algorithm, AlgorithmSpec, StoppingCriteria};
use crate::error::{Error, Result};
use crate::l1::{basis_pursuit, L1Config};
use crate::problem::{build_instance, MeasurementInstance, SignalKind};
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

/// One entry of the comparison roster: a greedy pursuit or the convex
/// baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "lowercase")]
pub enum Method {
    Pursuit(AlgorithmSpec),
    L1(L1Config),
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Pursuit(spec) => spec.id.as_str(),
            Method::L1(_) => "l1",
        }
    }

    pub fn mu_display(&self) -> String {
        match self {
            Method::Pursuit(spec) => spec.mu_display(),
            Method::L1(_) => String::new(),
        }
    }

    pub fn params_display(&self) -> String {
        match self {
            Method::Pursuit(spec) => spec.params_display(),
            Method::L1(cfg) => {
                let d = L1Config::default();
                if *cfg == d {
                    String::new()
                } else {
                    format!("tol={};max_iter={}", cfg.tolerance, cfg.max_iterations)
                }
            }
        }
    }

    /// Human-readable one-liner, e.g. `stp:mu=3`.
    pub fn display_name(&self) -> String {
        let mut name = self.label().to_string();
        let mut extras = Vec::new();
        let mu = self.mu_display();
        if !mu.is_empty() {
            extras.push(format!("mu={mu}"));
        }
        let params = self.params_display();
        if !params.is_empty() {
            extras.push(params.replace(';', ","));
        }
        if !extras.is_empty() {
            name.push(':');
            name.push_str(&extras.join(","));
        }
        name
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Pursuit(spec) => spec.validate_params(),
            Method::L1(cfg) => {
                if cfg.tolerance <= 0.0 || cfg.max_iterations == 0 {
                    Err(Error::invalid("l1 config invalid"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Parses the roster mini-grammar: comma-separated items of
    /// `name[:param=value[,param=value]]`. A bare `param=value` token
    /// (a leftover from splitting on commas inside an item) continues the
    /// previous item.
    pub fn parse_list(input: &str) -> Result<Vec<Method>> {
        let mut items: Vec<String> = Vec::new();
        for token in input.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let is_continuation = token.contains('=') && !token.contains(':') && {
                let head = token.split('=').next().unwrap_or("");
                crate::algo::AlgorithmId::parse(head).is_err() && head != "l1"
            };
            if is_continuation {
                match items.last_mut() {
                    Some(last) => {
                        last.push(',');
                        last.push_str(token);
                    }
                    None => {
                        return Err(Error::invalid(format!(
                            "parameter '{token}' appears before any algorithm name"
                        )))
                    }
                }
            } else {
                items.push(token.to_string());
            }
        }
        if items.is_empty() {
            return Err(Error::invalid("empty algorithm list"));
        }
        items.iter().map(|item| Method::parse_item(item)).collect()
    }

    fn parse_item(item: &str) -> Result<Method> {
        let name = item.split(':').next().unwrap_or("").trim();
        if name == "l1" {
            let mut cfg = L1Config::default();
            if let Some((_, params)) = item.split_once(':') {
                for kv in params.split(',') {
                    let kv = kv.trim();
                    if kv.is_empty() {
                        continue;
                    }
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::invalid(format!("expected key=value in '{kv}'")))?;
                    match k.trim() {
                        "tol" | "tolerance" => {
                            cfg.tolerance = v
                                .trim()
                                .parse()
                                .map_err(|_| Error::invalid(format!("bad l1 tolerance '{v}'")))?
                        }
                        "max_iter" | "max_iterations" => {
                            cfg.max_iterations = v
                                .trim()
                                .parse()
                                .map_err(|_| Error::invalid(format!("bad l1 max_iter '{v}'")))?
                        }
                        other => {
                            return Err(Error::invalid(format!(
                                "parameter '{other}' is not meaningful for l1"
                            )))
                        }
                    }
                }
            }
            Ok(Method::L1(cfg))
        } else {
            Ok(Method::Pursuit(AlgorithmSpec::parse_grammar_item(item)?))
        }
    }
}

/// A complete experiment description; rates are a pure function of it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub m: usize,
    pub n: usize,
    pub signal_kind: SignalKind,
    pub sweep: Vec<usize>,
    pub trials: usize,
    pub algorithms: Vec<Method>,
    pub stop: StoppingCriteria,
    pub master_seed: u64,
    /// Relative l2 error below which a trial counts as exact recovery.
    pub success_tolerance: f64,
}

pub const DEFAULT_SUCCESS_TOLERANCE: f64 = 1e-6;

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.m >= self.n {
            return Err(Error::invalid(format!(
                "plan requires 0 < m < n, got {}x{}",
                self.m, self.n
            )));
        }
        if self.sweep.is_empty() {
            return Err(Error::invalid("sweep must be nonempty"));
        }
        if !self.sweep.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("sweep must be strictly increasing"));
        }
        let max_s = *self.sweep.last().unwrap();
        if max_s >= self.m {
            return Err(Error::invalid(format!(
                "sweep maximum {max_s} must stay below m = {}",
                self.m
            )));
        }
        if self.sweep[0] == 0 {
            return Err(Error::invalid("sparsity must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithm list must be nonempty"));
        }
        for method in &self.algorithms {
            method.validate()?;
        }
        self.stop.validate()?;
        if self.success_tolerance.is_nan() || self.success_tolerance <= 0.0 {
            return Err(Error::invalid("success tolerance must be positive"));
        }
        Ok(())
    }

    /// Stream feeding the instance of trial `t` at sparsity `s`; shared by
    /// every algorithm in the roster.
    pub fn instance_stream(master_seed: u64, s: usize, trial: usize) -> RngStream {
        RngStream::new(master_seed, ((s as u64) << 32) | trial as u64)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let pstr = path.as_ref().display().to_string();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(&pstr, e.to_string()))?;
        std::fs::write(path.as_ref(), json).map_err(|e| Error::io(&pstr, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let pstr = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
        let plan: ExperimentPlan =
            serde_json::from_str(&text).map_err(|e| Error::format(&pstr, e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Aggregated outcome of one sparsity level for one method.
#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub s: usize,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub mean_iterations: f64,
    pub mean_wall_ms: f64,
    /// Order-sensitive digest of the instance hashes consumed at this
    /// point; equal digests certify paired trials across runs.
    pub instances_digest: u64,
}

/// Empirical exact-reconstruction rates of one method over the sweep.
#[derive(Clone, Debug, Serialize)]
pub struct RateCurve {
    pub algorithm: Method,
    pub points: Vec<RatePoint>,
    /// Worst least-squares orthogonality statistic over all runs.
    pub max_ls_orthogonality: f64,
}

/// How the critical sparsity is extracted from a curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalRule {
    LastFullRate,
}

/// Largest sparsity of the contiguous full-rate prefix of a curve.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalSparsityReport {
    pub algorithm: Method,
    pub critical_s: usize,
    pub rule: CriticalRule,
    pub trials: usize,
}

struct MethodOutcome {
    success: bool,
    iterations: usize,
    wall_ms: f64,
    orthogonality: f64,
    error: Option<String>,
}

fn run_method(
    method: &Method,
    inst: &MeasurementInstance,
    s: usize,
    stop: &StoppingCriteria,
    success_tolerance: f64,
) -> MethodOutcome {
    let truth = inst.truth.as_ref().expect("generated instances have truth");
    let start = Instant::now();
    let (estimate, iterations, orthogonality, error) = match method {
        Method::Pursuit(spec) => match run_algorithm(spec, inst, s, stop) {
            Ok(res) => (
                Some(res.estimate),
                res.iterations,
                res.max_ls_orthogonality,
                None,
            ),
            Err(e) => (None, 0, 0.0, Some(e.to_string())),
        },
        Method::L1(cfg) => match basis_pursuit(&inst.phi, &inst.y, cfg) {
            Ok(res) => (Some(res.estimate), res.iterations, 0.0, None),
            Err(e) => (None, 0, 0.0, Some(e.to_string())),
        },
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let success = estimate
        .map(|est| {
            let diff: f64 = est
                .iter()
                .zip(truth.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            diff <= success_tolerance * truth.norm()
        })
        .unwrap_or(false);
    MethodOutcome {
        success,
        iterations,
        wall_ms,
        orthogonality,
        error,
    }
}

/// Runs the whole plan and aggregates one curve per method. Trials are
/// dispatched to the ambient rayon pool; aggregation is order-fixed, so
/// the result does not depend on scheduling.
pub fn run_rate_curve(plan: &ExperimentPlan) -> Result<Vec<RateCurve>> {
    plan.validate()?;
    let n_methods = plan.algorithms.len();
    let mut curves: Vec<RateCurve> = plan
        .algorithms
        .iter()
        .map(|algorithm| RateCurve {
            algorithm: algorithm.clone(),
            points: Vec::with_capacity(plan.sweep.len()),
            max_ls_orthogonality: 0.0,
        })
        .collect();

    for &s in &plan.sweep {
        let rows: Vec<(u64, Vec<MethodOutcome>)> = (0..plan.trials)
            .into_par_iter()
            .map(|trial| {
                let stream = ExperimentPlan::instance_stream(plan.master_seed, s, trial);
                let inst = build_instance(plan.m, plan.n, s, plan.signal_kind, 0.0, stream)
                    .expect("plan validated");
                let outcomes: Vec<MethodOutcome> = plan
                    .algorithms
                    .iter()
                    .map(|method| {
                        let out = run_method(method, &inst, s, &plan.stop, plan.success_tolerance);
                        if let Some(err) = &out.error {
                            log::warn!(
                                "trial failed: {} s={} trial={}: {}",
                                method.display_name(),
                                s,
                                trial,
                                err
                            );
                        }
                        out
                    })
                    .collect();
                (inst.content_hash(), outcomes)
            })
            .collect();

        let mut digest = 0xcbf2_9ce4_8422_2325u64;
        for (hash, _) in &rows {
            for b in hash.to_le_bytes() {
                digest ^= b as u64;
                digest = digest.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        for (mi, curve) in curves.iter_mut().enumerate().take(n_methods) {
            let mut successes = 0usize;
            let mut iter_sum = 0usize;
            let mut wall_sum = 0.0f64;
            for (_, outcomes) in &rows {
                let o = &outcomes[mi];
                if o.success {
                    successes += 1;
                }
                iter_sum += o.iterations;
                wall_sum += o.wall_ms;
                if o.orthogonality > curve.max_ls_orthogonality {
                    curve.max_ls_orthogonality = o.orthogonality;
                }
            }
            curve.points.push(RatePoint {
                s,
                successes,
                trials: plan.trials,
                rate: successes as f64 / plan.trials as f64,
                mean_iterations: iter_sum as f64 / plan.trials as f64,
                mean_wall_ms: wall_sum / plan.trials as f64,
                instances_digest: digest,
            });
        }
    }
    Ok(curves)
}

/// Contiguous-prefix rule: the largest swept sparsity such that every
/// swept value up to it has rate exactly one.
pub fn find_critical_sparsity(curve: &RateCurve) -> CriticalSparsityReport {
    let mut critical = 0usize;
    let trials = curve.points.first().map(|p| p.trials).unwrap_or(0);
    for point in &curve.points {
        if point.successes == point.trials {
            critical = point.s;
        } else {
            break;
        }
    }
    CriticalSparsityReport {
        algorithm: curve.algorithm.clone(),
        critical_s: critical,
        rule: CriticalRule::LastFullRate,
        trials,
    }
}

/// Output format for [`export_results`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str =
    "algorithm,mu,params,s,trials,successes,rate,mean_iterations,mean_wall_ms";

/// Writes curves (and, for JSON, the critical-sparsity reports plus plan
/// metadata) to `path`.
pub fn export_results(
    plan: &ExperimentPlan,
    curves: &[RateCurve],
    reports: &[CriticalSparsityReport],
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<()> {
    let pstr = path.as_ref().display().to_string();
    let file = File::create(path.as_ref()).map_err(|e| Error::io(&pstr, e))?;
    let mut w = BufWriter::new(file);
    match format {
        ExportFormat::Csv => {
            writeln!(w, "{CSV_HEADER}").map_err(|e| Error::io(&pstr, e))?;
            for curve in curves {
                let label = curve.algorithm.label();
                let mu = curve.algorithm.mu_display();
                let params = curve.algorithm.params_display();
                for p in &curve.points {
                    writeln!(
                        w,
                        "{label},{mu},{params},{},{},{},{},{},{}",
                        p.s, p.trials, p.successes, p.rate, p.mean_iterations, p.mean_wall_ms
                    )
                    .map_err(|e| Error::io(&pstr, e))?;
                }
            }
        }
        ExportFormat::Json => {
            let doc = serde_json::json!({
                "artifact_version": env!("CARGO_PKG_VERSION"),
                "success_rule": format!(
                    "relative l2 error <= {} after debias (l1) or directly (greedy)",
                    plan.success_tolerance
                ),
                "plan": plan,
                "curves": curves,
                "critical_sparsity": reports,
            });
            serde_json::to_writer_pretty(&mut w, &doc)
                .map_err(|e| Error::format(&pstr, e.to_string()))?;
            writeln!(w).map_err(|e| Error::io(&pstr, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&pstr, e))
}
