//! Restricted-isometry diagnostics and worst-case guarantees.
//!
//! Small matrices admit exact restricted isometry constants by exhaustive
//! support enumeration; on top of those this module evaluates the
//! contraction factor `rho` and noise amplification `tau` of the
//! subspace-thresholding error recursion, the admissible range of the
//! correction weight `mu`, the largest workable constant `delta_max(mu)`,
//! an iteration bound for noiseless recovery, and numerical oracles for
//! the supporting inequalities (evaluated on exact algorithm iterates,
//! never on re-simulated approximations).

use crate::algo::StpStepDetail;
use crate::error::{Error, Result};
use crate::linalg::{correlate, extreme_singular_values, norm2, DenseMatrix, IndexSet};
use crate::problem::{MeasurementInstance, SparseSignal};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Exhaustive enumeration is refused beyond this many supports.
pub const RIC_ENUMERATION_CAP: u64 = 1_000_000;

/// How a restricted isometry constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RicMethod {
    Exhaustive,
    Sampled,
}

/// Restricted isometry constant of one order.
#[derive(Clone, Debug, Serialize)]
pub struct RicReport {
    pub order: usize,
    /// Largest deviation `max(sigma_max^2 - 1, 1 - sigma_min^2)` over the
    /// examined supports. Values above 1 mean the matrix fails the
    /// isometry property at this order.
    pub delta: f64,
    pub argmax_support: IndexSet,
    pub method: RicMethod,
}

fn support_deviation(phi: &DenseMatrix, support: &[usize]) -> f64 {
    let mut cols = phi.gather_columns(support);
    let (lo, hi) = extreme_singular_values(&mut cols, phi.rows(), support.len());
    (hi * hi - 1.0).max(1.0 - lo * lo)
}

fn binomial_capped(n: usize, k: usize, cap: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) may overflow; saturate well above the cap instead.
        acc = match acc.checked_mul((n - i) as u64) {
            Some(v) => v / (i as u64 + 1),
            None => return cap + 1,
        };
        if acc > cap.saturating_mul(2) {
            return cap + 1;
        }
    }
    acc
}

fn for_each_combination(n: usize, s: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        while i > 0 && idx[i - 1] == n - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact order-`s` restricted isometry constant by enumerating every
/// size-`s` support and computing extreme singular values of the
/// restricted columns. Refuses when `C(N, s)` exceeds
/// [`RIC_ENUMERATION_CAP`]; use [`sampled_ric`] then.
pub fn exact_ric(phi: &DenseMatrix, s: usize) -> Result<RicReport> {
    if s == 0 || s > phi.rows() {
        return Err(Error::invalid(format!(
            "order {s} out of range for {} rows",
            phi.rows()
        )));
    }
    if s > phi.cols() {
        return Err(Error::invalid(format!(
            "order {s} exceeds {} columns",
            phi.cols()
        )));
    }
    let count = binomial_capped(phi.cols(), s, RIC_ENUMERATION_CAP);
    if count > RIC_ENUMERATION_CAP {
        return Err(Error::invalid(format!(
            "C({}, {s}) exceeds the enumeration cap {RIC_ENUMERATION_CAP}; use sampled mode",
            phi.cols()
        )));
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_support: Vec<usize> = Vec::new();
    for_each_combination(phi.cols(), s, |support| {
        let dev = support_deviation(phi, support);
        if dev > best {
            best = dev;
            best_support = support.to_vec();
        }
    });
    Ok(RicReport {
        order: s,
        delta: best,
        argmax_support: IndexSet::new(best_support),
        method: RicMethod::Exhaustive,
    })
}

/// Lower bound on the order-`s` constant from randomly sampled supports.
pub fn sampled_ric(
    phi: &DenseMatrix,
    s: usize,
    samples: usize,
    rng: RngStream,
) -> Result<RicReport> {
    if s == 0 || s > phi.rows() || s > phi.cols() {
        return Err(Error::invalid("order out of range"));
    }
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let n = phi.cols();
    let mut sampler = rng.sampler();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_support = Vec::new();
    for _ in 0..samples {
        for i in 0..s {
            let j = i + sampler.index(n - i);
            pool.swap(i, j);
        }
        let mut support = pool[..s].to_vec();
        support.sort_unstable();
        let dev = support_deviation(phi, &support);
        if dev > best {
            best = dev;
            best_support = support;
        }
    }
    Ok(RicReport {
        order: s,
        delta: best,
        argmax_support: IndexSet::new(best_support),
        method: RicMethod::Sampled,
    })
}

/// Exact constants for every order `1..=max_order`, index `k` holding
/// order `k` (index 0 unused).
pub fn ric_profile(phi: &DenseMatrix, max_order: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0];
    for order in 1..=max_order {
        out.push(exact_ric(phi, order)?.delta);
    }
    Ok(out)
}

/// Contraction factor of the error recursion:
/// `2 d (|mu-1| + mu d) sqrt(1 + 2 d^2) / (1 - d^2)`.
pub fn rho(mu: f64, delta3s: f64) -> Result<f64> {
    if mu.is_nan() || mu < 0.0 || !mu.is_finite() {
        return Err(Error::invalid("mu must be a finite nonnegative real"));
    }
    if !(0.0..1.0).contains(&delta3s) {
        return Err(Error::invalid("delta must lie in [0, 1)"));
    }
    let d = delta3s;
    Ok(2.0 * d * ((mu - 1.0).abs() + mu * d) * (1.0 + 2.0 * d * d).sqrt() / (1.0 - d * d))
}

/// Noise amplification constant; defined only while `rho < 1`.
pub fn tau(mu: f64, delta3s: f64) -> Result<f64> {
    let r = rho(mu, delta3s)?;
    if r >= 1.0 {
        return Err(Error::invalid(format!(
            "tau undefined: rho({mu}, {delta3s}) = {r} >= 1"
        )));
    }
    Ok(tau_times_one_minus_rho(mu, delta3s) / (1.0 - r))
}

/// The product `(1 - rho) * tau` in closed form.
pub fn tau_times_one_minus_rho(mu: f64, delta3s: f64) -> f64 {
    let d = delta3s;
    let weight = (mu - 1.0).abs() + mu * d;
    let first = (2.0 + std::f64::consts::SQRT_2).sqrt() * d * weight / (1.0 - d * d).sqrt() + 1.0;
    let second = ((2.0 * (1.0 - d)).sqrt() + (1.0 + d).sqrt()) / (1.0 - d);
    let third = (4.0 + std::f64::consts::SQRT_2).sqrt() * weight / (1.0 - d).sqrt();
    first * second + third
}

/// Both constants bundled.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvergenceConstants {
    pub mu: f64,
    pub delta3s: f64,
    pub rho: f64,
    /// None when the recursion does not contract (`rho >= 1`).
    pub tau: Option<f64>,
}

pub fn convergence_constants(mu: f64, delta3s: f64) -> Result<ConvergenceConstants> {
    let r = rho(mu, delta3s)?;
    let t = if r < 1.0 {
        Some(tau_times_one_minus_rho(mu, delta3s) / (1.0 - r))
    } else {
        None
    };
    Ok(ConvergenceConstants {
        mu,
        delta3s,
        rho: r,
        tau: t,
    })
}

/// Open intervals of the correction weight for which the recursion
/// contracts at a given constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MuAdmissibleRange {
    /// `(lower, 1)`, clipped at zero; None when empty.
    pub below_one: Option<(f64, f64)>,
    /// `(1, upper)`; None when empty.
    pub above_one: Option<(f64, f64)>,
    /// Whether `mu = 1` itself contracts (delta below the unit-weight
    /// threshold, about 0.534).
    pub unit_admissible: bool,
}

pub fn mu_admissible_range(delta3s: f64) -> Result<MuAdmissibleRange> {
    if delta3s.is_nan() || delta3s <= 0.0 || delta3s >= 1.0 {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    let d = delta3s;
    let root = (1.0 + 2.0 * d * d).sqrt();
    let lower = 1.0 / (1.0 - d) - (1.0 + d) / (2.0 * d * root);
    let upper = 1.0 / (1.0 + d) + (1.0 - d) / (2.0 * d * root);
    let below_one = if lower < 1.0 {
        Some((lower.max(0.0), 1.0))
    } else {
        None
    };
    let above_one = if upper > 1.0 { Some((1.0, upper)) } else { None };
    let unit_admissible = rho(1.0, d)? < 1.0;
    Ok(MuAdmissibleRange {
        below_one,
        above_one,
        unit_admissible,
    })
}

/// Largest `delta` with `rho(mu, delta) < 1`, by bisection (the factor is
/// continuous and strictly increasing in `delta`).
pub fn delta_max(mu: f64) -> Result<f64> {
    if mu.is_nan() || mu <= 0.0 || !mu.is_finite() {
        return Err(Error::invalid("mu must be a positive real"));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0 - 1e-9;
    if rho(mu, lo)? >= 1.0 {
        return Ok(0.0);
    }
    if rho(mu, hi)? < 1.0 {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if rho(mu, mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Iteration bound for noiseless recovery:
/// `min(ceil(ln(||x||/xi) / ln(1/rho)), ceil(1.5 s / ln(1/rho)))`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationBound {
    pub magnitude_term: u64,
    pub sparsity_term: u64,
    /// The raw minimum; zero when the signal has a single dominant scale.
    pub raw: u64,
    /// Raw floored at one, since at least one iteration always runs.
    pub bound: u64,
}

pub fn iteration_bound(x: &SparseSignal, rho_value: f64) -> Result<IterationBound> {
    if rho_value.is_nan() || rho_value <= 0.0 || rho_value >= 1.0 {
        return Err(Error::invalid("rho must lie in (0, 1)"));
    }
    let xi = x.min_nonzero_magnitude();
    let norm = x.norm();
    if xi <= 0.0 || norm <= 0.0 {
        return Err(Error::invalid("signal must be nonzero"));
    }
    let log_gain = (1.0 / rho_value).ln();
    let magnitude_term = ((norm / xi).ln() / log_gain).ceil().max(0.0) as u64;
    let sparsity_term = ((1.5 * x.sparsity() as f64) / log_gain).ceil().max(0.0) as u64;
    let raw = magnitude_term.min(sparsity_term);
    Ok(IterationBound {
        magnitude_term,
        sparsity_term,
        raw,
        bound: raw.max(1),
    })
}

// ---------------------------------------------------------------------------
// Numerical oracles for the supporting inequalities.

/// Which inequality to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    /// Constants are monotone in the order.
    L1Monotonicity,
    /// Bounds on `(I - mu Phi^T Phi)` restricted to sparse directions.
    L1RipProducts,
    /// Correlated noise restricted to a small support.
    L2Noise,
    /// Consequences of least-squares orthogonality.
    L4Orthogonality,
    /// Support loss of the correlation identification step.
    L5SpIdentification,
    /// Support loss of the gradient re-identification step.
    L6IhtIdentification,
}

impl LemmaId {
    pub const ALL: [LemmaId; 6] = [
        LemmaId::L1Monotonicity,
        LemmaId::L1RipProducts,
        LemmaId::L2Noise,
        LemmaId::L4Orthogonality,
        LemmaId::L5SpIdentification,
        LemmaId::L6IhtIdentification,
    ];
}

/// One evaluated inequality: `lhs <= rhs` up to floating-point slack.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaCheck {
    pub lemma_id: LemmaId,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Everything a lemma evaluation needs: the instance, the exact iterate
/// quantities of a subspace-thresholding run, and exact constants for
/// every order up to `3s`.
pub struct LemmaInputs<'a> {
    pub instance: &'a MeasurementInstance,
    pub mu: f64,
    pub steps: &'a [StpStepDetail],
    /// `rics[k]` is the exact order-`k` constant; length at least `3s + 1`.
    pub rics: &'a [f64],
}

impl<'a> LemmaInputs<'a> {
    fn delta(&self, order: usize) -> Result<f64> {
        self.rics.get(order).copied().ok_or_else(|| {
            Error::invalid(format!(
                "constant of order {order} not supplied (have up to {})",
                self.rics.len().saturating_sub(1)
            ))
        })
    }

    fn truth(&self) -> Result<&SparseSignal> {
        self.instance
            .truth
            .as_ref()
            .ok_or_else(|| Error::invalid("lemma checks need the ground-truth signal"))
    }
}

fn norm_on(v: &[f64], set: &IndexSet) -> f64 {
    set.iter().map(|i| v[i] * v[i]).sum::<f64>().sqrt()
}

fn norm_outside(v: &[f64], set: &IndexSet) -> f64 {
    let total: f64 = v.iter().map(|x| x * x).sum();
    let inside: f64 = set.iter().map(|i| v[i] * v[i]).sum();
    (total - inside).max(0.0).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn nonzero_support(v: &[f64]) -> IndexSet {
    IndexSet::new(
        v.iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Evaluates every applicable sub-inequality of `id` on the supplied run.
pub fn evaluate_lemma(id: LemmaId, inputs: &LemmaInputs) -> Result<Vec<LemmaCheck>> {
    let mut checks = Vec::new();
    let push = |checks: &mut Vec<LemmaCheck>, lhs: f64, rhs: f64| {
        checks.push(LemmaCheck {
            lemma_id: id,
            lhs,
            rhs,
            slack: rhs - lhs,
        });
    };
    match id {
        LemmaId::L1Monotonicity => {
            for order in 1..inputs.rics.len().saturating_sub(1) {
                push(&mut checks, inputs.rics[order], inputs.rics[order + 1]);
            }
        }
        LemmaId::L1RipProducts => {
            let truth = inputs.truth()?;
            let phi = &inputs.instance.phi;
            let mu = inputs.mu;
            for step in inputs.steps {
                let v = sub(truth.values(), &step.pruned_estimate);
                let v_support = nonzero_support(&v);
                if v_support.is_empty() {
                    continue;
                }
                let sym_diff = step
                    .final_support
                    .difference(truth.support())
                    .union(&truth.support().difference(&step.final_support));
                let u_set = if sym_diff.is_empty() {
                    step.final_support.clone()
                } else {
                    sym_diff
                };
                // w = (I - mu Phi^T Phi) v
                let av = phi.mul_vec(&v);
                let atav = correlate(phi, &av)?;
                let w: Vec<f64> = v.iter().zip(&atav).map(|(x, g)| x - mu * g).collect();
                let order = u_set.union(&v_support).len();
                let coeff = (mu - 1.0).abs() + mu * inputs.delta(order)?;
                // Inner-product form with u = v restricted to the set.
                let inner: f64 = u_set.iter().map(|i| v[i] * w[i]).sum();
                push(
                    &mut checks,
                    inner.abs(),
                    coeff * norm_on(&v, &u_set) * norm2(&v),
                );
                // Restriction form.
                push(&mut checks, norm_on(&w, &u_set), coeff * norm2(&v));
            }
        }
        LemmaId::L2Noise => {
            let noise = &inputs.instance.noise;
            let phi = &inputs.instance.phi;
            let noise_norm = norm2(noise);
            let corr = correlate(phi, noise)?;
            for step in inputs.steps {
                for set in [&step.merged_support, &step.final_support] {
                    let rhs = (1.0 + inputs.delta(set.len())?).sqrt() * noise_norm;
                    push(&mut checks, norm_on(&corr, set), rhs);
                }
            }
        }
        LemmaId::L4Orthogonality => {
            let truth = inputs.truth()?;
            let s = truth.sparsity();
            let noise_norm = norm2(&inputs.instance.noise);
            for step in inputs.steps {
                let cases = [
                    (&step.merged_support, &step.merged_estimate, true),
                    (&step.final_support, &step.final_estimate, false),
                ];
                for (t_set, z_p, has_prune) in cases {
                    let t = t_set.len();
                    let err = sub(truth.values(), z_p);
                    let err_norm = norm2(&err);
                    let d_st = inputs.delta(s + t)?;
                    let d_t = inputs.delta(t)?;
                    // Restriction of the error to the solved support.
                    push(
                        &mut checks,
                        norm_on(&err, t_set),
                        d_st * err_norm + (1.0 + d_t).sqrt() * noise_norm,
                    );
                    // Full-error bound; meaningful only under isometry.
                    if d_st < 1.0 {
                        let rhs = (1.0 / (1.0 - d_st * d_st)).sqrt()
                            * norm_outside(truth.values(), t_set)
                            + (1.0 + d_t).sqrt() / (1.0 - d_st) * noise_norm;
                        push(&mut checks, err_norm, rhs);
                    }
                    // Discarded-entry bound, using the exact pruned set.
                    if has_prune && t > s {
                        let discarded = t_set.difference(&step.pruned_support);
                        let rhs = std::f64::consts::SQRT_2 * d_st * err_norm
                            + (2.0 * (1.0 + d_t)).sqrt() * noise_norm;
                        push(&mut checks, norm_on(truth.values(), &discarded), rhs);
                    }
                }
            }
        }
        LemmaId::L5SpIdentification => {
            let truth = inputs.truth()?;
            let s = truth.sparsity();
            let noise_norm = norm2(&inputs.instance.noise);
            let d3 = inputs.delta(3 * s)?;
            let d2 = inputs.delta(2 * s)?;
            for step in inputs.steps {
                let prev_err = sub(truth.values(), &step.x_prev);
                let rhs = std::f64::consts::SQRT_2 * d3 * norm2(&prev_err)
                    + (2.0 * (1.0 + d2)).sqrt() * noise_norm;
                push(
                    &mut checks,
                    norm_outside(truth.values(), &step.merged_support),
                    rhs,
                );
            }
        }
        LemmaId::L6IhtIdentification => {
            let truth = inputs.truth()?;
            let s = truth.sparsity();
            let noise_norm = norm2(&inputs.instance.noise);
            let mu = inputs.mu;
            let d3 = inputs.delta(3 * s)?;
            let d2 = inputs.delta(2 * s)?;
            for step in inputs.steps {
                let u_err = sub(truth.values(), &step.pruned_estimate);
                let rhs = std::f64::consts::SQRT_2 * ((mu - 1.0).abs() + mu * d3) * norm2(&u_err)
                    + (2.0 * (1.0 + d2)).sqrt() * mu * noise_norm;
                push(
                    &mut checks,
                    norm_outside(truth.values(), &step.final_support),
                    rhs,
                );
            }
        }
    }
    Ok(checks)
}

/// Worst-slack check of one lemma; errors when nothing was applicable
/// (missing constants, no iterations, preconditions never met).
pub fn check_lemma(id: LemmaId, inputs: &LemmaInputs) -> Result<LemmaCheck> {
    let checks = evaluate_lemma(id, inputs)?;
    checks
        .into_iter()
        .min_by(|a, b| a.slack.partial_cmp(&b.slack).expect("finite slack"))
        .ok_or_else(|| Error::invalid("no applicable inequality on this instance"))
}

#[cfg(test)]
mod tests {
    #![allow(clippy::needless_range_loop)] // oracle code is deliberately naive
    use super::*;
    use crate::algo::{run_stp_detailed, AlgorithmId, AlgorithmSpec, StoppingCriteria};
    use crate::problem::{build_instance, SignalKind};

    #[test]
    fn rho_reference_values() {
        assert!((rho(1.0, 0.5340).unwrap() - 1.0).abs() <= 2e-3);
        assert_eq!(rho(0.7, 0.0).unwrap(), 0.0);
        assert_eq!(rho(3.0, 0.0).unwrap(), 0.0);
        assert!((rho(1.0, 0.3).unwrap() - 0.21486818554022404).abs() < 1e-12);
        assert!(rho(1.0, 1.0).is_err());
        assert!(rho(-0.5, 0.3).is_err());
    }

    #[test]
    fn tau_reference_values() {
        let t0 = tau(1.0, 0.0).unwrap();
        assert!((t0 - (std::f64::consts::SQRT_2 + 1.0)).abs() < 1e-12);

        // Term-by-term recomputation at mu=1, delta=0.3.
        let d: f64 = 0.3;
        let weight = 0.3; // |1-1| + 1*0.3
        let first = ((2.0 + 2f64.sqrt()).sqrt() * d * weight / (1.0f64 - d * d).sqrt() + 1.0)
            * ((2.0 * (1.0 - d)).sqrt() + (1.0f64 + d).sqrt())
            / (1.0 - d);
        let third = (4.0 + 2f64.sqrt()).sqrt() * weight / (1.0f64 - d).sqrt();
        let expected = (first + third) / (1.0 - rho(1.0, 0.3).unwrap());
        let got = tau(1.0, 0.3).unwrap();
        assert!(got.is_finite() && got > 0.0);
        assert!((got - expected).abs() < 1e-12 * expected);

        // Divergence toward the contraction boundary.
        let t52 = tau(1.0, 0.52).unwrap();
        let t53 = tau(1.0, 0.53).unwrap();
        let t533 = tau(1.0, 0.533).unwrap();
        assert!(t52 < t53 && t53 < t533);
        // Undefined past the boundary.
        assert!(tau(1.0, 0.54).is_err());
    }

    #[test]
    fn tau_identity_reproduces_closed_form() {
        for (mu, d) in [(1.0, 0.2), (0.8, 0.35), (1.3, 0.1), (2.0, 0.05)] {
            let r = rho(mu, d).unwrap();
            if r < 1.0 {
                let t = tau(mu, d).unwrap();
                let product = t * (1.0 - r);
                let direct = tau_times_one_minus_rho(mu, d);
                assert!((product - direct).abs() <= 1e-12 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn mu_range_reference_values() {
        let range = mu_admissible_range(0.3).unwrap();
        let (lo, hi) = range.above_one.unwrap();
        assert_eq!(lo, 1.0);
        assert!((hi - 1.8432344901).abs() < 1e-6, "upper {hi}");
        // Sub-unity lower bound is negative, so the interval clips to (0, 1).
        let (blo, bhi) = range.below_one.unwrap();
        assert_eq!(blo, 0.0);
        assert_eq!(bhi, 1.0);
        assert!(range.unit_admissible);

        // Grid consistency: inside the intervals rho < 1, outside >= 1.
        for i in 1..50 {
            let d = i as f64 / 50.0 * 0.98 + 0.005;
            let range = mu_admissible_range(d).unwrap();
            for j in 0..20 {
                let mu = 0.05 + j as f64 * 0.25;
                if (mu - 1.0).abs() < 1e-12 {
                    continue;
                }
                let inside = match (range.below_one, range.above_one) {
                    (Some((a, b)), _) if mu > a && mu < b && mu > 0.0 => true,
                    (_, Some((a, b))) if mu > a && mu < b => true,
                    _ => false,
                };
                let r = rho(mu, d).unwrap();
                if inside {
                    assert!(r < 1.0, "rho({mu}, {d}) = {r} inside admissible range");
                } else {
                    assert!(r >= 1.0 - 1e-12, "rho({mu}, {d}) = {r} outside range");
                }
            }
        }
    }

    #[test]
    fn delta_max_reference_values() {
        let d1 = delta_max(1.0).unwrap();
        assert!((d1 - 0.5340).abs() <= 5e-4, "delta_max(1) = {d1}");
        let d15 = delta_max(1.5).unwrap();
        let d2 = delta_max(2.0).unwrap();
        assert!(d2 < d15 && d15 < d1);
        // Boundary consistency.
        for mu in [0.4, 0.9, 1.0, 1.7, 3.0] {
            let dm = delta_max(mu).unwrap();
            let r = rho(mu, dm).unwrap();
            assert!((r - 1.0).abs() <= 1e-5, "rho({mu}, delta_max) = {r}");
        }
    }

    #[test]
    fn rho_monotonicity_and_weight_optimum() {
        // Increasing in delta for fixed mu.
        for mu in [0.5, 1.0, 2.5] {
            let mut prev = -1.0;
            for i in 0..40 {
                let d = i as f64 / 40.0 * 0.95;
                let r = rho(mu, d).unwrap();
                assert!(r >= prev);
                prev = r;
            }
        }
        // Minimum over the weight at mu = 1 for fixed delta.
        for d in [0.1, 0.3, 0.5] {
            let at_one = rho(1.0, d).unwrap();
            for j in 0..30 {
                let mu = 0.1 + j as f64 * 0.12;
                assert!(rho(mu, d).unwrap() >= at_one - 1e-12);
            }
        }
    }

    #[test]
    fn iteration_bound_examples() {
        // ||x|| / xi = e^3, s = 2, rho = 0.5.
        let mut values = vec![0.0; 10];
        values[1] = 1.0;
        values[4] = std::f64::consts::E.powi(3).powi(2);
        values[4] = (values[4] - 1.0).sqrt(); // ||x|| = e^3 with xi = 1
        let x = SparseSignal::from_values(values, SignalKind::Custom).unwrap();
        let ratio = x.norm() / x.min_nonzero_magnitude();
        assert!((ratio - std::f64::consts::E.powi(3)).abs() < 1e-9);
        let b = iteration_bound(&x, 0.5).unwrap();
        assert_eq!(b.magnitude_term, 5);
        assert_eq!(b.sparsity_term, 5);
        assert_eq!(b.raw, 5);

        // Constant-amplitude signal: xi = 1, ||x|| = sqrt(s).
        let cars = sparse_cars(16, 9);
        let b = iteration_bound(&cars, 0.5).unwrap();
        let expect = ((9f64).sqrt().ln() / (2f64).ln()).ceil() as u64;
        assert_eq!(b.magnitude_term, expect);

        // Single spike: the raw bound collapses to zero, floored to one.
        let mut spike = vec![0.0; 8];
        spike[3] = 2.5;
        let x = SparseSignal::from_values(spike, SignalKind::Custom).unwrap();
        let b = iteration_bound(&x, 0.5).unwrap();
        assert_eq!(b.magnitude_term, 0);
        assert_eq!(b.raw, 0);
        assert_eq!(b.bound, 1);

        assert!(iteration_bound(&x, 1.0).is_err());
    }

    fn sparse_cars(n: usize, s: usize) -> SparseSignal {
        let mut values = vec![0.0; n];
        for i in 0..s {
            values[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        SparseSignal::from_values(values, SignalKind::Custom).unwrap()
    }

    #[test]
    fn exact_ric_identity_and_duplicates() {
        let id = DenseMatrix::identity(6);
        let rep = exact_ric(&id, 3).unwrap();
        assert!(rep.delta.abs() < 1e-12);
        assert_eq!(rep.argmax_support.as_slice(), &[0, 1, 2]);
        assert_eq!(rep.method, RicMethod::Exhaustive);

        // Two identical unit columns: order-2 constant is exactly 1.
        let mut data = vec![0.0; 4 * 3];
        for i in 0..4 {
            data[i * 3] = 0.5;
            data[i * 3 + 1] = 0.5;
            data[i * 3 + 2] = if i == 0 { 1.0 } else { 0.0 };
        }
        let phi = DenseMatrix::from_vec(4, 3, data).unwrap();
        let rep = exact_ric(&phi, 2).unwrap();
        assert!((rep.delta - 1.0).abs() < 1e-12);
        assert_eq!(rep.argmax_support.as_slice(), &[0, 1]);
    }

    #[test]
    fn exact_ric_matches_eigenvalue_oracle() {
        use nalgebra::DMatrix;
        let inst =
            build_instance(8, 12, 2, SignalKind::Gaussian, 0.0, RngStream::new(40, 4)).unwrap();
        let rep = exact_ric(&inst.phi, 2).unwrap();
        // Oracle: eigenvalues of the restricted Gram minus identity over
        // all 66 supports.
        let mut best = f64::NEG_INFINITY;
        for a in 0..12 {
            for b in (a + 1)..12 {
                let sub = DMatrix::from_fn(8, 2, |i, c| inst.phi.get(i, [a, b][c]));
                let gram = sub.transpose() * &sub;
                let eig = gram.symmetric_eigen();
                for v in eig.eigenvalues.iter() {
                    best = best.max((v - 1.0).abs());
                }
            }
        }
        assert!(
            (rep.delta - best).abs() <= 1e-10 * (1.0 + best),
            "{} vs {}",
            rep.delta,
            best
        );
    }

    #[test]
    fn exact_ric_is_permutation_invariant() {
        let inst =
            build_instance(8, 10, 2, SignalKind::Gaussian, 0.0, RngStream::new(41, 0)).unwrap();
        let base = exact_ric(&inst.phi, 2).unwrap();
        // Reverse the column order.
        let mut data = vec![0.0; 8 * 10];
        for i in 0..8 {
            for j in 0..10 {
                data[i * 10 + j] = inst.phi.get(i, 9 - j);
            }
        }
        let permuted = DenseMatrix::from_vec(8, 10, data).unwrap();
        let rep = exact_ric(&permuted, 2).unwrap();
        assert!((rep.delta - base.delta).abs() < 1e-12);
    }

    #[test]
    fn exact_ric_enforces_enumeration_cap() {
        let inst =
            build_instance(20, 300, 2, SignalKind::Gaussian, 0.0, RngStream::new(42, 0)).unwrap();
        // C(300, 5) is far beyond the cap.
        assert!(exact_ric(&inst.phi, 5).is_err());
        let sampled = sampled_ric(&inst.phi, 5, 50, RngStream::new(1, 1)).unwrap();
        assert_eq!(sampled.method, RicMethod::Sampled);
        assert!(sampled.delta > 0.0);
    }

    #[test]
    fn lemma_checks_are_trivial_on_identity() {
        let n = 8;
        let mut values = vec![0.0; n];
        values[1] = 1.0;
        values[5] = -2.0;
        let truth =
            crate::problem::SparseSignal::from_values(values.clone(), SignalKind::Custom).unwrap();
        let inst = MeasurementInstance {
            phi: DenseMatrix::identity(n),
            y: values,
            truth: Some(truth),
            noise: vec![0.0; n],
            seed: 0,
            noise_level: 0.0,
        };
        let spec = AlgorithmSpec::new(AlgorithmId::Stp);
        let (_, steps) = run_stp_detailed(&spec, &inst, 2, &StoppingCriteria::default()).unwrap();
        let rics = ric_profile(&inst.phi, 6).unwrap();
        assert!(rics.iter().all(|d| d.abs() < 1e-12));
        let inputs = LemmaInputs {
            instance: &inst,
            mu: 1.0,
            steps: &steps,
            rics: &rics,
        };
        for id in LemmaId::ALL {
            let checks = evaluate_lemma(id, &inputs).unwrap();
            for c in &checks {
                assert!(c.slack >= -1e-9, "{:?}: slack {}", id, c.slack);
            }
        }
    }

    #[test]
    fn lemma_monotonicity_on_seeded_matrix() {
        let inst =
            build_instance(8, 12, 2, SignalKind::Gaussian, 0.0, RngStream::new(50, 1)).unwrap();
        let rics = ric_profile(&inst.phi, 4).unwrap();
        for k in 1..4 {
            assert!(
                rics[k] <= rics[k + 1] + 1e-12,
                "order {k}: {} > {}",
                rics[k],
                rics[k + 1]
            );
        }
    }
}
