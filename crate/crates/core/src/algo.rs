//! The reconstruction algorithms.
//!
//! All algorithms share the same skeleton: identify promising columns from
//! correlations, solve a least-squares problem on a candidate support,
//! prune, and repeat until the common stopping criteria fire (relative
//! residual below tolerance, or the iteration cap). Subspace thresholding
//! pursuit (`stp`) inserts a gradient-corrected re-identification step
//! between the prune and the final least squares; the `*v2` variants graft
//! that same step onto CoSaMP, HTP, SAMP, and FBP. Disabling it through
//! [`AlgorithmSpec::iht_identification_enabled`] recovers the original
//! algorithms.
//!
//! Every runner is a pure function of `(spec, instance, s, stop)`; repeated
//! calls produce bit-identical results.

use crate::error::{Error, Result};
use crate::linalg::{
    argmax_magnitude, correlate, norm2, restricted_least_squares, top_k_indices, DenseMatrix,
    IndexSet, RestrictedLsSolution,
};
use crate::problem::MeasurementInstance;
use serde::{Deserialize, Serialize};

/// Algorithm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmId {
    Omp,
    Sp,
    Cosamp,
    Iht,
    Niht,
    Htp,
    Stp,
    Stpv2,
    Cosampv2,
    Htpv2,
    Sampv2,
    Fbpv2,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 12] = [
        AlgorithmId::Omp,
        AlgorithmId::Sp,
        AlgorithmId::Cosamp,
        AlgorithmId::Iht,
        AlgorithmId::Niht,
        AlgorithmId::Htp,
        AlgorithmId::Stp,
        AlgorithmId::Stpv2,
        AlgorithmId::Cosampv2,
        AlgorithmId::Htpv2,
        AlgorithmId::Sampv2,
        AlgorithmId::Fbpv2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmId::Omp => "omp",
            AlgorithmId::Sp => "sp",
            AlgorithmId::Cosamp => "cosamp",
            AlgorithmId::Iht => "iht",
            AlgorithmId::Niht => "niht",
            AlgorithmId::Htp => "htp",
            AlgorithmId::Stp => "stp",
            AlgorithmId::Stpv2 => "stpv2",
            AlgorithmId::Cosampv2 => "cosampv2",
            AlgorithmId::Htpv2 => "htpv2",
            AlgorithmId::Sampv2 => "sampv2",
            AlgorithmId::Fbpv2 => "fbpv2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm '{s}'")))
    }

    fn supports(&self, key: &str) -> bool {
        use AlgorithmId::*;
        match key {
            "mu" => matches!(self, Stp | Stpv2 | Cosampv2 | Htpv2 | Sampv2 | Fbpv2),
            "mu_prime" => matches!(self, Htpv2),
            "alpha" => matches!(self, Cosamp | Cosampv2 | Htpv2),
            "gamma" => matches!(self, Stpv2),
            "nu0" => matches!(self, Sampv2),
            "nu" => matches!(self, Fbpv2),
            "chi" => matches!(self, Fbpv2),
            "iht_identify" => matches!(self, Cosampv2 | Sampv2 | Fbpv2),
            _ => false,
        }
    }
}

/// An algorithm plus its tunable parameters. Construct with
/// [`AlgorithmSpec::new`] (which installs per-algorithm defaults) and
/// adjust through [`AlgorithmSpec::set_param`], which rejects parameters
/// that are meaningless for the chosen algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub id: AlgorithmId,
    /// Weight of the gradient correction in the re-identification step.
    pub mu: f64,
    /// Weight of the first identification step of `htpv2`.
    pub mu_prime: f64,
    /// Identification width multiplier for the CoSaMP family and `htpv2`.
    pub alpha: usize,
    /// Width-limit fraction for `stpv2`; required for that algorithm.
    pub gamma: Option<f64>,
    /// Stage-size increment for `sampv2`.
    pub nu0: usize,
    /// Forward width for `fbpv2`.
    pub nu: usize,
    /// Backward shrink for `fbpv2` (must stay below `nu`).
    pub chi: usize,
    /// When false, the `*v2` variants skip the gradient re-identification
    /// and reduce to the original CoSaMP/SAMP/FBP support choice.
    pub iht_identification_enabled: bool,
}

impl AlgorithmSpec {
    pub fn new(id: AlgorithmId) -> Self {
        AlgorithmSpec {
            id,
            mu: 1.0,
            mu_prime: 1.0,
            alpha: match id {
                AlgorithmId::Htpv2 => 1,
                _ => 2,
            },
            gamma: None,
            nu0: 2,
            nu: 20,
            chi: 18,
            iht_identification_enabled: !matches!(id, AlgorithmId::Cosamp),
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    /// Sets one parameter by name, rejecting keys that do not apply to
    /// this algorithm.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.id.supports(key) {
            return Err(Error::invalid(format!(
                "parameter '{key}' is not meaningful for algorithm '{}'",
                self.id.as_str()
            )));
        }
        let bad = |k: &str, v: &str| Error::invalid(format!("cannot parse {k}={v}"));
        match key {
            "mu" => self.mu = value.parse().map_err(|_| bad(key, value))?,
            "mu_prime" => self.mu_prime = value.parse().map_err(|_| bad(key, value))?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad(key, value))?,
            "gamma" => self.gamma = Some(value.parse().map_err(|_| bad(key, value))?),
            "nu0" => self.nu0 = value.parse().map_err(|_| bad(key, value))?,
            "nu" => self.nu = value.parse().map_err(|_| bad(key, value))?,
            "chi" => self.chi = value.parse().map_err(|_| bad(key, value))?,
            "iht_identify" => {
                self.iht_identification_enabled = match value {
                    "true" | "on" | "1" => true,
                    "false" | "off" | "0" => false,
                    _ => return Err(bad(key, value)),
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Parses one item of the algorithm mini-grammar,
    /// `name[:param=value[,param=value]]`, e.g. `stp:mu=2.5`.
    pub fn parse_grammar_item(item: &str) -> Result<Self> {
        let (name, params) = match item.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p)),
            None => (item.trim(), None),
        };
        let mut spec = AlgorithmSpec::new(AlgorithmId::parse(name)?);
        if let Some(params) = params {
            for kv in params.split(',') {
                let kv = kv.trim();
                if kv.is_empty() {
                    continue;
                }
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("expected key=value, got '{kv}'")))?;
                spec.set_param(k.trim(), v.trim())?;
            }
        }
        spec.validate_params()?;
        Ok(spec)
    }

    /// Checks parameter invariants that do not depend on the instance.
    pub fn validate_params(&self) -> Result<()> {
        if self.mu.is_nan() || self.mu < 0.0 || !self.mu.is_finite() {
            return Err(Error::invalid("mu must be a finite nonnegative real"));
        }
        if self.mu_prime.is_nan() || self.mu_prime < 0.0 || !self.mu_prime.is_finite() {
            return Err(Error::invalid("mu_prime must be a finite nonnegative real"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::invalid("gamma must lie in (0, 1]"));
            }
        }
        if self.id == AlgorithmId::Stpv2 && self.gamma.is_none() {
            return Err(Error::invalid("stpv2 requires gamma"));
        }
        if self.id == AlgorithmId::Sampv2 && self.nu0 == 0 {
            return Err(Error::invalid("nu0 must be positive"));
        }
        if self.id == AlgorithmId::Fbpv2 {
            if self.nu == 0 {
                return Err(Error::invalid("nu must be positive"));
            }
            if self.chi >= self.nu {
                return Err(Error::invalid(format!(
                    "chi ({}) must be smaller than nu ({})",
                    self.chi, self.nu
                )));
            }
        }
        Ok(())
    }

    /// Compact display of the distinguishing parameters, for reports.
    pub fn params_display(&self) -> String {
        use AlgorithmId::*;
        let mut parts: Vec<String> = Vec::new();
        match self.id {
            Htpv2 => {
                parts.push(format!("alpha={}", self.alpha));
                parts.push(format!("mu_prime={}", self.mu_prime));
            }
            Cosamp | Cosampv2 => parts.push(format!("alpha={}", self.alpha)),
            Stpv2 => {
                if let Some(g) = self.gamma {
                    parts.push(format!("gamma={g}"));
                }
            }
            Sampv2 => parts.push(format!("nu0={}", self.nu0)),
            Fbpv2 => {
                parts.push(format!("nu={}", self.nu));
                parts.push(format!("chi={}", self.chi));
            }
            _ => {}
        }
        if self.id.supports("iht_identify") && !self.iht_identification_enabled {
            parts.push("iht_identify=off".to_string());
        }
        parts.join(";")
    }

    /// `mu` rendered only for algorithms where it matters.
    pub fn mu_display(&self) -> String {
        if self.id.supports("mu") {
            format!("{}", self.mu)
        } else {
            String::new()
        }
    }
}

/// Stopping criteria shared by all iterative algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingCriteria {
    pub max_iterations: usize,
    /// Relative to the observation norm.
    pub residual_tolerance: f64,
    /// Opt-in algorithm-specific rule (SP residual increase, support
    /// fixpoint for the thresholding family). The common criteria above
    /// always apply; this adds an extra exit.
    pub native_rule_enabled: bool,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        StoppingCriteria {
            max_iterations: 200,
            residual_tolerance: 1e-10,
            native_rule_enabled: false,
        }
    }
}

impl StoppingCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if self.residual_tolerance.is_nan() || self.residual_tolerance < 0.0 {
            return Err(Error::invalid("residual tolerance must be nonnegative"));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Residual,
    MaxIterations,
    NativeRule,
}

/// Evaluates the stopping rule for one committed iterate.
pub fn stopping_met(
    residual_norm: f64,
    y_norm: f64,
    iteration: usize,
    stop: &StoppingCriteria,
    native_signal: bool,
) -> bool {
    residual_norm < stop.residual_tolerance * y_norm
        || iteration >= stop.max_iterations
        || (stop.native_rule_enabled && native_signal)
}

/// Per-iteration record kept for diagnostics and trace export.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub support: IndexSet,
    pub residual_norm: f64,
    pub ls_rank_deficient: bool,
    /// Candidate (pre-prune) support, for algorithms that merge one.
    #[serde(skip)]
    pub candidate_support: Option<IndexSet>,
}

/// Extra recording knobs for [`run_algorithm_traced`].
#[derive(Clone, Copy, Debug, Default)]
pub struct TraceOptions {
    /// Keep a dense copy of the committed estimate at every iteration.
    pub record_estimates: bool,
}

/// Output of one recovery run.
#[derive(Clone, Debug)]
pub struct RecoveryResult {
    /// Length-N estimate, supported on `support`.
    pub estimate: Vec<f64>,
    pub support: IndexSet,
    pub iterations: usize,
    /// Residual norm of each committed iterate, length `iterations`.
    pub residual_history: Vec<f64>,
    /// Final relative residual fell below the tolerance.
    pub converged: bool,
    pub stop_reason: StopReason,
    pub trace: Vec<IterationRecord>,
    /// Populated when [`TraceOptions::record_estimates`] is set.
    pub estimate_history: Option<Vec<Vec<f64>>>,
    /// Worst relative residual/column inner product observed after any
    /// least-squares step (numerical-hygiene diagnostic).
    pub max_ls_orthogonality: f64,
}

impl RecoveryResult {
    pub fn final_relative_residual(&self, y_norm: f64) -> f64 {
        match self.residual_history.last() {
            Some(r) => r / y_norm,
            None => 1.0,
        }
    }
}

/// Intermediate state of the subspace-thresholding iteration.
#[derive(Clone, Debug)]
pub struct StpState {
    pub x_prev: Vec<f64>,
    pub s_prev: IndexSet,
    pub iteration: usize,
}

impl StpState {
    pub fn initial(n: usize) -> Self {
        StpState {
            x_prev: vec![0.0; n],
            s_prev: IndexSet::empty(),
            iteration: 0,
        }
    }
}

/// Every intermediate quantity of one subspace-thresholding step, used by
/// the theory checks, which must evaluate exact iterates rather than
/// re-simulations.
#[derive(Clone, Debug)]
pub struct StpStepDetail {
    pub x_prev: Vec<f64>,
    pub delta_support: IndexSet,
    pub merged_support: IndexSet,
    pub merged_estimate: Vec<f64>,
    pub merged_rank_deficient: bool,
    pub pruned_support: IndexSet,
    pub pruned_estimate: Vec<f64>,
    pub final_support: IndexSet,
    pub final_estimate: Vec<f64>,
    pub final_rank_deficient: bool,
    pub final_residual_norm: f64,
}

/// Gradient-corrected re-identification: the `k` largest magnitudes of
/// `u + mu * Phi^T (y - Phi u)`.
pub fn iht_identify(
    u: &[f64],
    mu: f64,
    phi: &DenseMatrix,
    y: &[f64],
    k: usize,
) -> Result<IndexSet> {
    let w = iht_selection_vector(u, mu, phi, y)?;
    top_k_indices(&w, k)
}

fn iht_selection_vector(u: &[f64], mu: f64, phi: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if u.len() != phi.cols() || y.len() != phi.rows() {
        return Err(Error::invalid(
            "iht identification: dimensions do not agree",
        ));
    }
    let au = phi.mul_vec(u);
    let r: Vec<f64> = y.iter().zip(&au).map(|(a, b)| a - b).collect();
    let c = correlate(phi, &r)?;
    Ok(u.iter().zip(&c).map(|(ui, ci)| ui + mu * ci).collect())
}

/// Identification width for the width-limited variant: `s` when
/// `s <= gamma * m`, otherwise `ceil(2 gamma m) - s`. The merged candidate
/// support then never exceeds `ceil(2 gamma m)` columns.
pub fn stpv2_effective_width(s: usize, gamma: f64, m: usize) -> Result<usize> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid("gamma must lie in (0, 1]"));
    }
    if s == 0 {
        return Err(Error::invalid("sparsity must be positive"));
    }
    let gm = gamma * m as f64;
    if s as f64 <= gm {
        return Ok(s);
    }
    let cap = (2.0 * gm).ceil() as usize;
    if s >= cap {
        return Err(Error::invalid(format!(
            "sparsity {s} is at or above the width cap {cap} (gamma={gamma}, m={m})"
        )));
    }
    Ok(cap - s)
}

/// One full subspace-thresholding iteration, as a reusable pure step.
pub fn stp_iterate(
    state: &StpState,
    spec: &AlgorithmSpec,
    inst: &MeasurementInstance,
    s: usize,
    k_identify: usize,
) -> Result<StpState> {
    let detail = stp_step(
        &inst.phi,
        &inst.y,
        &state.x_prev,
        &state.s_prev,
        spec.mu,
        s,
        k_identify,
    )?;
    Ok(StpState {
        x_prev: detail.final_estimate,
        s_prev: detail.final_support,
        iteration: state.iteration + 1,
    })
}

fn stp_step(
    phi: &DenseMatrix,
    y: &[f64],
    x_prev: &[f64],
    s_prev: &IndexSet,
    mu: f64,
    s: usize,
    k_identify: usize,
) -> Result<StpStepDetail> {
    if k_identify == 0 {
        return Err(Error::invalid("identification width must be positive"));
    }
    // 1-2: correlation identification, merged with the previous support.
    let ax = phi.mul_sparse(s_prev.as_slice(), x_prev);
    let r: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let c = correlate(phi, &r)?;
    let delta_support = top_k_indices(&c, k_identify)?;
    let merged_support = s_prev.union(&delta_support);
    // 3: least squares on the merged support.
    let merged = restricted_least_squares(phi, y, &merged_support)?;
    // 4-5: prune to the s largest entries.
    let pruned_support = top_k_indices(&merged.estimate, s)?;
    let mut pruned_estimate = vec![0.0; phi.cols()];
    for i in pruned_support.iter() {
        pruned_estimate[i] = merged.estimate[i];
    }
    // 6: gradient-corrected re-identification.
    let final_support = iht_identify(&pruned_estimate, mu, phi, y, s)?;
    // 7: final least squares.
    let fin = restricted_least_squares(phi, y, &final_support)?;
    Ok(StpStepDetail {
        x_prev: x_prev.to_vec(),
        delta_support,
        merged_support,
        merged_estimate: merged.estimate,
        merged_rank_deficient: merged.rank_deficient,
        pruned_support,
        pruned_estimate,
        final_support,
        final_estimate: fin.estimate,
        final_rank_deficient: fin.rank_deficient,
        final_residual_norm: fin.residual_norm,
    })
}

/// Runs `spec` on `inst` targeting sparsity `s` under the given stopping
/// criteria. See the module docs for the per-algorithm contracts.
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    inst: &MeasurementInstance,
    s: usize,
    stop: &StoppingCriteria,
) -> Result<RecoveryResult> {
    run_algorithm_traced(spec, inst, s, stop, TraceOptions::default())
}

/// Same as [`run_algorithm`] with extra trace recording.
pub fn run_algorithm_traced(
    spec: &AlgorithmSpec,
    inst: &MeasurementInstance,
    s: usize,
    stop: &StoppingCriteria,
    opts: TraceOptions,
) -> Result<RecoveryResult> {
    spec.validate_params()?;
    stop.validate()?;
    let m = inst.rows();
    let n = inst.cols();
    if s == 0 || s > m {
        return Err(Error::invalid(format!(
            "sparsity {s} out of range for {m} measurements"
        )));
    }
    if s > n {
        return Err(Error::invalid(format!(
            "sparsity {s} exceeds signal length {n}"
        )));
    }
    // Width requirements: the merged candidate support must fit in an
    // overdetermined least-squares solve.
    match spec.id {
        AlgorithmId::Sp | AlgorithmId::Stp => {
            if 2 * s > m {
                return Err(Error::invalid(format!(
                    "{}: merged support 2s = {} exceeds {m} measurements",
                    spec.id.as_str(),
                    2 * s
                )));
            }
        }
        AlgorithmId::Stpv2 => {
            let gamma = spec.gamma.expect("validated");
            if gamma * (m as f64) < 1.0 {
                return Err(Error::invalid("gamma * m must be at least 1"));
            }
            let width = stpv2_effective_width(s, gamma, m)?;
            if s + width > m {
                return Err(Error::invalid(format!(
                    "stpv2: candidate support s + s' = {} exceeds {m} measurements",
                    s + width
                )));
            }
        }
        AlgorithmId::Cosamp | AlgorithmId::Cosampv2 => {
            let width = spec.alpha.saturating_mul(s);
            if width == 0 || width > n {
                return Err(Error::invalid(format!(
                    "identification width alpha*s = {width} out of range for {n} columns"
                )));
            }
            if s + width > m {
                return Err(Error::invalid(format!(
                    "{}: merged support (1+alpha)s = {} exceeds {m} measurements",
                    spec.id.as_str(),
                    s + width
                )));
            }
        }
        AlgorithmId::Htpv2 => {
            let width = (spec.alpha + 1).saturating_mul(s);
            if width > m || width > n {
                return Err(Error::invalid(format!(
                    "htpv2: identification width (alpha+1)s = {width} exceeds matrix size"
                )));
            }
        }
        _ => {}
    }

    let y_norm = norm2(&inst.y);
    let mut engine = Engine::new(inst, *stop, opts, y_norm);
    if y_norm == 0.0 {
        // Degenerate observation: the zero vector is already exact.
        return Ok(engine.finish(vec![0.0; n], IndexSet::empty(), StopReason::Residual, true));
    }

    match spec.id {
        AlgorithmId::Omp => run_omp(&mut engine, s),
        AlgorithmId::Sp => run_sp(&mut engine, s),
        AlgorithmId::Iht => run_iht(&mut engine, s),
        AlgorithmId::Niht => run_niht(&mut engine, s),
        AlgorithmId::Htp => run_htp(&mut engine, s),
        AlgorithmId::Stp => run_stp(&mut engine, spec, s, s, None),
        AlgorithmId::Stpv2 => {
            let width = stpv2_effective_width(s, spec.gamma.expect("validated"), inst.rows())?;
            run_stp(&mut engine, spec, s, width, None)
        }
        AlgorithmId::Cosamp | AlgorithmId::Cosampv2 => run_cosamp_family(&mut engine, spec, s),
        AlgorithmId::Htpv2 => run_htpv2(&mut engine, spec, s),
        AlgorithmId::Sampv2 => run_sampv2(&mut engine, spec),
        AlgorithmId::Fbpv2 => run_fbpv2(&mut engine, spec),
    }
}

/// Runs subspace thresholding pursuit and returns every intermediate
/// quantity of every iteration alongside the result.
pub fn run_stp_detailed(
    spec: &AlgorithmSpec,
    inst: &MeasurementInstance,
    s: usize,
    stop: &StoppingCriteria,
) -> Result<(RecoveryResult, Vec<StpStepDetail>)> {
    if spec.id != AlgorithmId::Stp {
        return Err(Error::invalid("detailed runs are defined for stp"));
    }
    let mut details = Vec::new();
    let y_norm = norm2(&inst.y);
    let mut engine = Engine::new(inst, *stop, TraceOptions::default(), y_norm);
    if y_norm == 0.0 {
        let res = engine.finish(
            vec![0.0; inst.cols()],
            IndexSet::empty(),
            StopReason::Residual,
            true,
        );
        return Ok((res, details));
    }
    let res = run_stp(&mut engine, spec, s, s, Some(&mut details))?;
    Ok((res, details))
}

// ---------------------------------------------------------------------------
// Shared iteration machinery.

struct Engine<'a> {
    phi: &'a DenseMatrix,
    y: &'a [f64],
    y_norm: f64,
    col_norms: Vec<f64>,
    stop: StoppingCriteria,
    trace: Vec<IterationRecord>,
    residual_history: Vec<f64>,
    estimate_history: Option<Vec<Vec<f64>>>,
    max_orth: f64,
}

impl<'a> Engine<'a> {
    fn new(
        inst: &'a MeasurementInstance,
        stop: StoppingCriteria,
        opts: TraceOptions,
        y_norm: f64,
    ) -> Self {
        Engine {
            phi: &inst.phi,
            y: &inst.y,
            y_norm,
            col_norms: inst.phi.column_norms(),
            stop,
            trace: Vec::new(),
            residual_history: Vec::new(),
            estimate_history: if opts.record_estimates {
                Some(Vec::new())
            } else {
                None
            },
            max_orth: 0.0,
        }
    }

    fn n(&self) -> usize {
        self.phi.cols()
    }

    fn residual_of(&self, support: &IndexSet, estimate: &[f64]) -> (Vec<f64>, f64) {
        let ax = self.phi.mul_sparse(support.as_slice(), estimate);
        let r: Vec<f64> = self.y.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let norm = norm2(&r);
        (r, norm)
    }

    /// Least squares plus the residual-orthogonality hygiene statistic.
    fn ls(&mut self, support: &IndexSet) -> Result<RestrictedLsSolution> {
        let sol = restricted_least_squares(self.phi, self.y, support)?;
        self.note_orthogonality_of(support, &sol.residual);
        Ok(sol)
    }

    fn note_orthogonality_of(&mut self, support: &IndexSet, residual: &[f64]) {
        let max_col = support
            .iter()
            .map(|j| self.col_norms[j])
            .fold(0.0f64, f64::max);
        let scale = self.y_norm * max_col;
        if scale == 0.0 {
            return;
        }
        for j in support.iter() {
            let mut dot = 0.0;
            for (i, r) in residual.iter().enumerate() {
                dot += self.phi.get(i, j) * r;
            }
            let rel = dot.abs() / scale;
            if rel > self.max_orth {
                self.max_orth = rel;
            }
        }
    }

    /// Orthogonality statistic for a least-squares estimate computed
    /// outside [`Engine::ls`] (the detailed step path).
    fn note_orthogonality(&mut self, support: &IndexSet, estimate: &[f64]) {
        let (residual, _) = self.residual_of(support, estimate);
        self.note_orthogonality_of(support, &residual);
    }

    fn commit(
        &mut self,
        iteration: usize,
        support: &IndexSet,
        residual_norm: f64,
        ls_rank_deficient: bool,
        candidate_support: Option<IndexSet>,
        estimate: &[f64],
    ) {
        self.trace.push(IterationRecord {
            iteration,
            support: support.clone(),
            residual_norm,
            ls_rank_deficient,
            candidate_support,
        });
        self.residual_history.push(residual_norm);
        if let Some(h) = self.estimate_history.as_mut() {
            h.push(estimate.to_vec());
        }
    }

    /// Stop decision for a committed iterate; `None` keeps iterating.
    fn decide(&self, residual_norm: f64, iteration: usize, native: bool) -> Option<StopReason> {
        if residual_norm < self.stop.residual_tolerance * self.y_norm {
            return Some(StopReason::Residual);
        }
        if self.stop.native_rule_enabled && native {
            return Some(StopReason::NativeRule);
        }
        if iteration >= self.stop.max_iterations {
            return Some(StopReason::MaxIterations);
        }
        None
    }

    fn finish(
        &mut self,
        estimate: Vec<f64>,
        support: IndexSet,
        stop_reason: StopReason,
        converged: bool,
    ) -> RecoveryResult {
        RecoveryResult {
            estimate,
            support,
            iterations: self.residual_history.len(),
            residual_history: std::mem::take(&mut self.residual_history),
            converged,
            stop_reason,
            trace: std::mem::take(&mut self.trace),
            estimate_history: self.estimate_history.take(),
            max_ls_orthogonality: self.max_orth,
        }
    }

    fn converged_flag(&self, residual_norm: f64) -> bool {
        residual_norm < self.stop.residual_tolerance * self.y_norm
    }
}

// ---------------------------------------------------------------------------
// Individual algorithms.

fn run_omp(engine: &mut Engine, s: usize) -> Result<RecoveryResult> {
    let n = engine.n();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut residual = engine.y.to_vec();
    let mut rnorm = engine.y_norm;
    let mut reason = StopReason::NativeRule; // the s-step budget
    for iter in 1..=s {
        let c = correlate(engine.phi, &residual)?;
        let pick = argmax_magnitude(&c);
        support = support.union(&IndexSet::new(vec![pick]));
        let sol = engine.ls(&support)?;
        estimate = sol.estimate;
        residual = sol.residual;
        rnorm = sol.residual_norm;
        engine.commit(iter, &support, rnorm, sol.rank_deficient, None, &estimate);
        if let Some(r) = engine.decide(rnorm, iter, false) {
            reason = r;
            break;
        }
    }
    let converged = engine.converged_flag(rnorm);
    Ok(engine.finish(estimate, support, reason, converged))
}

fn run_sp(engine: &mut Engine, s: usize) -> Result<RecoveryResult> {
    let n = engine.n();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut rnorm = engine.y_norm;
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, _) = engine.residual_of(&support, &estimate);
        let c = correlate(engine.phi, &residual)?;
        let delta = top_k_indices(&c, s)?;
        let merged = support.union(&delta);
        let merged_sol = engine.ls(&merged)?;
        let pruned = top_k_indices(&merged_sol.estimate, s)?;
        let sol = engine.ls(&pruned)?;
        // Native SP rule: the residual stopped decreasing. The rule's
        // contract is to keep the previous iterate.
        if engine.stop.native_rule_enabled && sol.residual_norm >= rnorm {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, StopReason::NativeRule, converged));
        }
        support = pruned;
        estimate = sol.estimate;
        rnorm = sol.residual_norm;
        engine.commit(
            iter,
            &support,
            rnorm,
            merged_sol.rank_deficient || sol.rank_deficient,
            Some(merged),
            &estimate,
        );
        if let Some(reason) = engine.decide(rnorm, iter, false) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_iht(engine: &mut Engine, s: usize) -> Result<RecoveryResult> {
    let n = engine.n();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, rcheck) = engine.residual_of(&support, &estimate);
        if !rcheck.is_finite() {
            // The fixed-step iteration can diverge when the matrix has
            // large spectral norm; end the run instead of overflowing.
            return Ok(engine.finish(estimate, support, StopReason::MaxIterations, false));
        }
        let c = correlate(engine.phi, &residual)?;
        let w: Vec<f64> = estimate.iter().zip(&c).map(|(x, g)| x + g).collect();
        support = top_k_indices(&w, s)?;
        estimate = vec![0.0; n];
        for i in support.iter() {
            estimate[i] = w[i];
        }
        let (_, rnorm) = engine.residual_of(&support, &estimate);
        engine.commit(iter, &support, rnorm, false, None, &estimate);
        if let Some(reason) = engine.decide(rnorm, iter, false) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_niht(engine: &mut Engine, s: usize) -> Result<RecoveryResult> {
    let n = engine.n();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, rcheck) = engine.residual_of(&support, &estimate);
        if !rcheck.is_finite() {
            return Ok(engine.finish(estimate, support, StopReason::MaxIterations, false));
        }
        let g = correlate(engine.phi, &residual)?;
        // Normalized step on the working support (the proxy's top entries
        // while the estimate is still empty).
        let working = if support.is_empty() {
            top_k_indices(&g, s)?
        } else {
            support.clone()
        };
        let mut g_restricted = vec![0.0; n];
        for i in working.iter() {
            g_restricted[i] = g[i];
        }
        let g_norm2: f64 = working.iter().map(|i| g[i] * g[i]).sum();
        let ag = engine.phi.mul_sparse(working.as_slice(), &g_restricted);
        let denom: f64 = ag.iter().map(|v| v * v).sum();
        let omega = if denom > 0.0 { g_norm2 / denom } else { 0.0 };
        let w: Vec<f64> = estimate
            .iter()
            .zip(&g)
            .map(|(x, gi)| x + omega * gi)
            .collect();
        support = top_k_indices(&w, s)?;
        estimate = vec![0.0; n];
        for i in support.iter() {
            estimate[i] = w[i];
        }
        let (_, rnorm) = engine.residual_of(&support, &estimate);
        engine.commit(iter, &support, rnorm, false, None, &estimate);
        if let Some(reason) = engine.decide(rnorm, iter, false) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_htp(engine: &mut Engine, s: usize) -> Result<RecoveryResult> {
    let n = engine.n();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, _) = engine.residual_of(&support, &estimate);
        let c = correlate(engine.phi, &residual)?;
        let w: Vec<f64> = estimate.iter().zip(&c).map(|(x, g)| x + g).collect();
        let next_support = top_k_indices(&w, s)?;
        let native = next_support == support;
        let sol = engine.ls(&next_support)?;
        support = next_support;
        estimate = sol.estimate;
        let rnorm = sol.residual_norm;
        engine.commit(iter, &support, rnorm, sol.rank_deficient, None, &estimate);
        if let Some(reason) = engine.decide(rnorm, iter, native) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_stp(
    engine: &mut Engine,
    spec: &AlgorithmSpec,
    s: usize,
    k_identify: usize,
    mut details: Option<&mut Vec<StpStepDetail>>,
) -> Result<RecoveryResult> {
    let n = engine.n();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let step = stp_step(
            engine.phi,
            engine.y,
            &estimate,
            &support,
            spec.mu,
            s,
            k_identify,
        )?;
        // Track orthogonality for both least-squares solves of the step.
        engine.note_orthogonality(&step.merged_support, &step.merged_estimate);
        engine.note_orthogonality(&step.final_support, &step.final_estimate);
        let native = step.final_support == support;
        support = step.final_support.clone();
        estimate = step.final_estimate.clone();
        let rnorm = step.final_residual_norm;
        engine.commit(
            iter,
            &support,
            rnorm,
            step.merged_rank_deficient || step.final_rank_deficient,
            Some(step.merged_support.clone()),
            &estimate,
        );
        if let Some(d) = details.as_deref_mut() {
            d.push(step);
        }
        if let Some(reason) = engine.decide(rnorm, iter, native) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_cosamp_family(
    engine: &mut Engine,
    spec: &AlgorithmSpec,
    s: usize,
) -> Result<RecoveryResult> {
    let n = engine.n();
    let width = spec.alpha * s;
    let iht_on = spec.id == AlgorithmId::Cosampv2 && spec.iht_identification_enabled;
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, _) = engine.residual_of(&support, &estimate);
        let c = correlate(engine.phi, &residual)?;
        let delta = top_k_indices(&c, width)?;
        let merged = support.union(&delta);
        let merged_sol = engine.ls(&merged)?;
        let pruned = top_k_indices(&merged_sol.estimate, s)?;
        let mut pruned_estimate = vec![0.0; n];
        for i in pruned.iter() {
            pruned_estimate[i] = merged_sol.estimate[i];
        }
        // The committed estimate is a hard-thresholded selection vector,
        // not a least-squares refit.
        let (next_support, next_estimate) = if iht_on {
            let w = iht_selection_vector(&pruned_estimate, spec.mu, engine.phi, engine.y)?;
            let sel = top_k_indices(&w, s)?;
            let mut e = vec![0.0; n];
            for i in sel.iter() {
                e[i] = w[i];
            }
            (sel, e)
        } else {
            (pruned, pruned_estimate)
        };
        support = next_support;
        estimate = next_estimate;
        let (_, rnorm) = engine.residual_of(&support, &estimate);
        engine.commit(
            iter,
            &support,
            rnorm,
            merged_sol.rank_deficient,
            Some(merged),
            &estimate,
        );
        if let Some(reason) = engine.decide(rnorm, iter, false) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_htpv2(engine: &mut Engine, spec: &AlgorithmSpec, s: usize) -> Result<RecoveryResult> {
    let n = engine.n();
    let width = (spec.alpha + 1) * s;
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, _) = engine.residual_of(&support, &estimate);
        let c = correlate(engine.phi, &residual)?;
        let w1: Vec<f64> = estimate
            .iter()
            .zip(&c)
            .map(|(x, g)| x + spec.mu_prime * g)
            .collect();
        let candidate = top_k_indices(&w1, width)?;
        let cand_sol = engine.ls(&candidate)?;
        let pruned = top_k_indices(&cand_sol.estimate, s)?;
        let mut pruned_estimate = vec![0.0; n];
        for i in pruned.iter() {
            pruned_estimate[i] = cand_sol.estimate[i];
        }
        let next_support = iht_identify(&pruned_estimate, spec.mu, engine.phi, engine.y, s)?;
        let native = next_support == support;
        let sol = engine.ls(&next_support)?;
        support = next_support;
        estimate = sol.estimate;
        let rnorm = sol.residual_norm;
        engine.commit(
            iter,
            &support,
            rnorm,
            cand_sol.rank_deficient || sol.rank_deficient,
            Some(candidate),
            &estimate,
        );
        if let Some(reason) = engine.decide(rnorm, iter, native) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_sampv2(engine: &mut Engine, spec: &AlgorithmSpec) -> Result<RecoveryResult> {
    let n = engine.n();
    let m = engine.phi.rows();
    // The merged candidate holds up to two stages' worth of columns; cap
    // the stage so least squares stays overdetermined.
    let stage_cap = (m / 2).max(1).min(n);
    let mut stage = spec.nu0.min(stage_cap);
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut rnorm = engine.y_norm;
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, _) = engine.residual_of(&support, &estimate);
        let c = correlate(engine.phi, &residual)?;
        let delta = top_k_indices(&c, stage)?;
        let merged = support.union(&delta);
        let merged_sol = engine.ls(&merged)?;
        let keep = stage.min(merged.len());
        let pruned = top_k_indices(&merged_sol.estimate, keep)?;
        let mut pruned_estimate = vec![0.0; n];
        for i in pruned.iter() {
            pruned_estimate[i] = merged_sol.estimate[i];
        }
        let candidate_support = if spec.iht_identification_enabled {
            iht_identify(&pruned_estimate, spec.mu, engine.phi, engine.y, keep)?
        } else {
            pruned
        };
        let cand_sol = engine.ls(&candidate_support)?;
        let rank_def = merged_sol.rank_deficient || cand_sol.rank_deficient;
        if cand_sol.residual_norm >= rnorm {
            // Candidate rejected: grow the stage, keep the committed state.
            stage = (stage + spec.nu0).min(stage_cap);
            engine.commit(iter, &support, rnorm, rank_def, Some(merged), &estimate);
        } else {
            support = candidate_support;
            estimate = cand_sol.estimate;
            rnorm = cand_sol.residual_norm;
            engine.commit(iter, &support, rnorm, rank_def, Some(merged), &estimate);
        }
        if let Some(reason) = engine.decide(rnorm, iter, false) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}

fn run_fbpv2(engine: &mut Engine, spec: &AlgorithmSpec) -> Result<RecoveryResult> {
    let n = engine.n();
    let m = engine.phi.rows();
    let mut support = IndexSet::empty();
    let mut estimate = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        let (residual, _) = engine.residual_of(&support, &estimate);
        let c = correlate(engine.phi, &residual)?;
        // Forward step, clipped so the merged support stays solvable.
        let forward = spec.nu.min(n).min(m.saturating_sub(support.len())).max(1);
        let delta = top_k_indices(&c, forward)?;
        let merged = support.union(&delta);
        let merged_sol = engine.ls(&merged)?;
        // Backward step: keep |merged| - chi entries, at least one, and at
        // most m - 1 so the final solve stays overdetermined.
        let keep = merged
            .len()
            .saturating_sub(spec.chi)
            .clamp(1, (m - 1).max(1));
        let pruned = top_k_indices(&merged_sol.estimate, keep)?;
        let mut pruned_estimate = vec![0.0; n];
        for i in pruned.iter() {
            pruned_estimate[i] = merged_sol.estimate[i];
        }
        let next_support = if spec.iht_identification_enabled {
            iht_identify(&pruned_estimate, spec.mu, engine.phi, engine.y, keep)?
        } else {
            pruned
        };
        let sol = engine.ls(&next_support)?;
        support = next_support;
        estimate = sol.estimate;
        let rnorm = sol.residual_norm;
        engine.commit(
            iter,
            &support,
            rnorm,
            merged_sol.rank_deficient || sol.rank_deficient,
            Some(merged),
            &estimate,
        );
        if let Some(reason) = engine.decide(rnorm, iter, false) {
            let converged = engine.converged_flag(rnorm);
            return Ok(engine.finish(estimate, support, reason, converged));
        }
    }
}
