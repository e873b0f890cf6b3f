#![allow(clippy::needless_range_loop)] // constructions mirror the math

//! Acceptance suite: one test per gate criterion, each printing a PASS
//! line with the measured values (run with `--nocapture` to see them).
//!
//! The heavy Monte-Carlo sweeps (criteria 3-5) are computed once in
//! shared lazies and reused by the numerical-hygiene checks of
//! criterion 9.

use pursuitlab::algo::{
    run_algorithm_traced, run_stp_detailed, AlgorithmId, AlgorithmSpec,
    StoppingCriteria, TraceOptions,
};
use pursuitlab::harness::{
    export_results, find_critical_sparsity, run_rate_curve, ExperimentPlan, ExportFormat, Method,
    RateCurve,
};
use pursuitlab::l1::L1Config;
use pursuitlab::linalg::DenseMatrix;
use pursuitlab::problem::{build_instance, sparse_signal, MeasurementInstance, SignalKind, SparseSignal};
use pursuitlab::rng::RngStream;
use pursuitlab::theory::{
    delta_max, evaluate_lemma, iteration_bound, rho, ric_profile, LemmaId, LemmaInputs,
};
use rayon::prelude::*;
use std::sync::LazyLock;
use std::time::Instant;

const TABLE_SEED: u64 = 1;
const S5_SEED: u64 = 4242;

fn desk_plan(
    kind: SignalKind,
    method: Method,
    lo: usize,
    hi: usize,
    trials: usize,
    seed: u64,
) -> ExperimentPlan {
    ExperimentPlan {
        m: 100,
        n: 1000,
        signal_kind: kind,
        sweep: (lo..=hi).collect(),
        trials,
        algorithms: vec![method],
        stop: StoppingCriteria::default(),
        master_seed: seed,
        success_tolerance: 1e-6,
    }
}

fn sp_method() -> Method {
    Method::Pursuit(AlgorithmSpec::new(AlgorithmId::Sp))
}

fn stp_method(mu: f64) -> Method {
    Method::Pursuit(AlgorithmSpec::new(AlgorithmId::Stp).with_mu(mu))
}

struct TableData {
    curves: Vec<RateCurve>,
    criticals: Vec<usize>,
}

/// Gaussian-signal desk-scale row: SP, HTP, STP(mu=3), each swept over a
/// step-1 window bracketing its transition (paired instances across the
/// windows come from the shared master seed).
static TABLE2: LazyLock<TableData> = LazyLock::new(|| {
    let runs = [
        (sp_method(), 9usize, 21usize),
        (Method::Pursuit(AlgorithmSpec::new(AlgorithmId::Htp)), 10, 18),
        (stp_method(3.0), 18, 28),
    ];
    let mut curves = Vec::new();
    let mut criticals = Vec::new();
    for (method, lo, hi) in runs {
        let plan = desk_plan(SignalKind::Gaussian, method, lo, hi, 200, TABLE_SEED);
        let curve = run_rate_curve(&plan).unwrap().remove(0);
        criticals.push(find_critical_sparsity(&curve).critical_s);
        curves.push(curve);
    }
    TableData { curves, criticals }
});

/// Constant-amplitude-random-sign row: SP, STP(mu=2.5), basis pursuit.
static TABLE3: LazyLock<TableData> = LazyLock::new(|| {
    let runs = [
        (sp_method(), 6usize, 14usize),
        (stp_method(2.5), 10, 18),
        (Method::L1(L1Config::default()), 9, 17),
    ];
    let mut curves = Vec::new();
    let mut criticals = Vec::new();
    for (method, lo, hi) in runs {
        let plan = desk_plan(SignalKind::Cars, method, lo, hi, 200, TABLE_SEED);
        let curve = run_rate_curve(&plan).unwrap().remove(0);
        criticals.push(find_critical_sparsity(&curve).critical_s);
        curves.push(curve);
    }
    TableData { curves, criticals }
});

/// Every implemented method at s = 5, both signal classes, 100 trials.
static SMALL_S: LazyLock<Vec<(SignalKind, String, f64, f64)>> = LazyLock::new(|| {
    let mut roster: Vec<Method> = AlgorithmId::ALL
        .iter()
        .map(|&id| {
            let mut spec = AlgorithmSpec::new(id);
            if id == AlgorithmId::Stpv2 {
                spec.gamma = Some(0.24);
            }
            Method::Pursuit(spec)
        })
        .collect();
    roster.push(Method::L1(L1Config::default()));
    let mut out = Vec::new();
    for kind in [SignalKind::Gaussian, SignalKind::Cars] {
        let plan = ExperimentPlan {
            m: 100,
            n: 1000,
            signal_kind: kind,
            sweep: vec![5],
            trials: 100,
            algorithms: roster.clone(),
            stop: StoppingCriteria::default(),
            master_seed: S5_SEED,
            success_tolerance: 1e-6,
        };
        for curve in run_rate_curve(&plan).unwrap() {
            out.push((
                kind,
                curve.algorithm.display_name(),
                curve.points[0].rate,
                curve.max_ls_orthogonality,
            ));
        }
    }
    out
});

#[test]
fn c1_theory_constants() {
    let start = Instant::now();
    let r = rho(1.0, 0.5340).unwrap();
    let dm = delta_max(1.0).unwrap();
    let elapsed = start.elapsed();
    assert!(
        (r - 1.0).abs() <= 2e-3,
        "rho(1, 0.5340) = {r}, expected 1.000 within 2e-3"
    );
    assert!(
        (dm - 0.5340).abs() <= 5e-4,
        "delta_max(1) = {dm}, expected 0.5340 within 5e-4"
    );
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 1: PASS  rho(1,0.5340)={r:.6} delta_max(1)={dm:.6} ({elapsed:?})"
    );
}

#[test]
fn c2_delta_max_profile() {
    let start = Instant::now();
    // Weight grid 0.2, 0.3, ..., 3.5 (integer tenths to avoid drift).
    let grid: Vec<f64> = (2..=35).map(|k| k as f64 / 10.0).collect();
    let values: Vec<f64> = grid.iter().map(|&mu| delta_max(mu).unwrap()).collect();
    let peak_idx = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert!(
        (grid[peak_idx] - 1.0).abs() < 1e-12,
        "profile peaks at mu={} not 1.0",
        grid[peak_idx]
    );
    for w in values[..=peak_idx].windows(2) {
        assert!(w[0] <= w[1] + 1e-12, "not increasing below the peak");
    }
    for w in values[peak_idx..].windows(2) {
        assert!(w[0] >= w[1] - 1e-12, "not decreasing above the peak");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "criterion 2: PASS  delta_max peaks at mu=1 ({:.4}), monotone on both sides ({elapsed:?})",
        values[peak_idx]
    );
}

#[test]
fn c3_table2_gaussian_critical_sparsity() {
    let start = Instant::now();
    let data = &*TABLE2;
    let (sp, htp, stp3) = (data.criticals[0], data.criticals[1], data.criticals[2]);
    assert!(
        (11..=15).contains(&sp),
        "sp critical {sp} outside [11, 15] (reference 13)"
    );
    assert!(
        (12..=16).contains(&htp),
        "htp critical {htp} outside [12, 16] (reference 14)"
    );
    assert!(
        (21..=27).contains(&stp3),
        "stp(mu=3) critical {stp3} outside [21, 27] (reference 24)"
    );
    assert!(
        stp3 >= sp + 6,
        "stp(mu=3) critical {stp3} does not exceed sp {sp} by 6"
    );
    // Pointwise dominance on the common swept range at and beyond 15,
    // with a 3-failure slack for sampling noise.
    let sp_curve = &data.curves[0];
    let stp_curve = &data.curves[2];
    for sp_pt in sp_curve.points.iter().filter(|p| p.s >= 15) {
        if let Some(stp_pt) = stp_curve.points.iter().find(|p| p.s == sp_pt.s) {
            assert!(
                stp_pt.successes + 3 >= sp_pt.successes,
                "s={}: stp(mu=3) {} vs sp {}",
                sp_pt.s,
                stp_pt.successes,
                sp_pt.successes
            );
        }
    }
    println!(
        "criterion 3: PASS  critical sparsity sp={sp} htp={htp} stp(mu=3)={stp3}, gap {} ({:?})",
        stp3 - sp,
        start.elapsed()
    );
}

#[test]
fn c4_table3_cars_critical_sparsity() {
    let start = Instant::now();
    let data = &*TABLE3;
    let (sp, stp25, l1) = (data.criticals[0], data.criticals[1], data.criticals[2]);
    assert!(
        (8..=12).contains(&sp),
        "sp critical {sp} outside [8, 12] (reference 10)"
    );
    assert!(
        (12..=16).contains(&stp25),
        "stp(mu=2.5) critical {stp25} outside [12, 16] (reference 14)"
    );
    assert!(
        (11..=15).contains(&l1),
        "basis pursuit critical {l1} outside [11, 15] (reference 13)"
    );
    assert!(
        stp25 + 2 >= l1,
        "stp(mu=2.5) critical {stp25} more than 2 below basis pursuit {l1}"
    );
    println!(
        "criterion 4: PASS  critical sparsity sp={sp} stp(mu=2.5)={stp25} l1={l1} ({:?})",
        start.elapsed()
    );
}

#[test]
fn c5_small_sparsity_universal_rates() {
    let start = Instant::now();
    let rows = &*SMALL_S;
    let mut failures = Vec::new();
    for (kind, name, rate, _) in rows {
        println!("criterion 5 detail: {:?} {name}: rate {rate:.2}", kind);
        if *rate < 0.99 {
            failures.push(format!("{:?} {name}: rate {rate:.2}", kind));
        }
    }
    if failures.is_empty() {
        println!(
            "criterion 5: PASS  all methods at rate >= 0.99 for s=5 ({:?})",
            start.elapsed()
        );
    } else {
        println!(
            "criterion 5: FAIL  {} method/kind combinations below 0.99: {failures:?}",
            failures.len()
        );
    }
    // Known limitation, kept as an honest red: the fixed-unit-step
    // thresholding iteration (iht) diverges on a fraction of Gaussian
    // 100x1000 instances (spectral norm of the measurement matrix is ~4,
    // and nothing re-anchors the iterates), so its empirical rate at
    // s=5 sits near 0.75-0.80 regardless of seed or iteration budget.
    // Every least-squares-anchored method and the normalized variant
    // meet the bar.
    assert!(
        failures.is_empty(),
        "rate >= 0.99 violated by: {failures:?}"
    );
}

#[test]
fn c6_lemma_oracles_small_instances() {
    let start = Instant::now();
    let n_instances = 1000u64;
    let mus = [0.5, 1.0, 2.0];
    let results: Vec<(f64, usize)> = (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let noise_level = if i % 2 == 0 { 0.0 } else { 0.1 };
            let mu = mus[(i % 3) as usize];
            let inst = build_instance(
                8,
                12,
                2,
                SignalKind::Gaussian,
                noise_level,
                RngStream::new(777, i),
            )
            .unwrap();
            let mut spec = AlgorithmSpec::new(AlgorithmId::Stp);
            spec.mu = mu;
            let stop = StoppingCriteria {
                max_iterations: 6,
                residual_tolerance: 1e-10,
                native_rule_enabled: false,
            };
            let (_, steps) = run_stp_detailed(&spec, &inst, 2, &stop).unwrap();
            let rics = ric_profile(&inst.phi, 6).unwrap();
            let inputs = LemmaInputs {
                instance: &inst,
                mu,
                steps: &steps,
                rics: &rics,
            };
            let mut min_slack = f64::INFINITY;
            let mut checks = 0usize;
            for id in LemmaId::ALL {
                for check in evaluate_lemma(id, &inputs).unwrap() {
                    assert!(
                        check.slack >= -1e-9,
                        "instance {i} (mu={mu}, noise={noise_level}): {:?} violated, \
                         lhs={} rhs={}",
                        check.lemma_id,
                        check.lhs,
                        check.rhs
                    );
                    min_slack = min_slack.min(check.slack);
                    checks += 1;
                }
            }
            (min_slack, checks)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let total: usize = results.iter().map(|r| r.1).sum();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "criterion 6: PASS  {total} inequality evaluations over {n_instances} instances, \
         worst slack {worst:.3e} ({elapsed:?})"
    );
}

/// Rotated near-orthonormal frame `Q [I | v]` where `v` is a random-sign
/// unit vector flat over its first `spread` coordinates: the exact
/// order-k constant is sqrt(min(k-1, spread) / spread), so choosing the
/// spread places the constant anywhere below the contraction threshold.
/// The rotation and signs vary the instance without moving the constants.
/// A `planted` signal puts one dominant and one tiny entry on the
/// adversarial support (the composite column plus an overlapped identity
/// column); otherwise the support and values are random.
fn small_ric_instance(
    m: usize,
    s: usize,
    spread: usize,
    planted: bool,
    seed: u64,
) -> MeasurementInstance {
    let n = m + 1;
    let mut sampler = RngStream::new(9000 + seed, 0).sampler();
    let mut q = vec![vec![0.0f64; m]; m];
    for col in q.iter_mut() {
        sampler.fill_standard_normal(col);
    }
    // Modified Gram-Schmidt.
    for i in 0..m {
        for j in 0..i {
            let dot: f64 = (0..m).map(|k| q[i][k] * q[j][k]).sum();
            for k in 0..m {
                q[i][k] -= dot * q[j][k];
            }
        }
        let norm: f64 = (0..m).map(|k| q[i][k] * q[i][k]).sum::<f64>().sqrt();
        for k in 0..m {
            q[i][k] /= norm;
        }
    }
    let mut v = vec![0.0f64; m];
    for vi in v.iter_mut().take(spread) {
        *vi = sampler.sign() / (spread as f64).sqrt();
    }
    let mut data = vec![0.0f64; m * n];
    for row in 0..m {
        for col in 0..m {
            data[row * n + col] = q[col][row];
        }
        let mut acc = 0.0;
        for col in 0..m {
            acc += q[col][row] * v[col];
        }
        data[row * n + m] = acc;
    }
    let phi = DenseMatrix::from_vec(m, n, data).unwrap();
    let mut sig_sampler = RngStream::new(9000 + seed, 1).sampler();
    let signal = if planted {
        let mut values = vec![0.0f64; n];
        values[m] = sig_sampler.sign();
        values[sig_sampler.index(spread)] = sig_sampler.sign() * 0.01;
        SparseSignal::from_values(values, SignalKind::Custom).unwrap()
    } else {
        sparse_signal(n, s, SignalKind::Gaussian, RngStream::new(9000 + seed, 1)).unwrap()
    };
    let y = phi.mul_sparse(signal.support().as_slice(), signal.values());
    MeasurementInstance {
        phi,
        y,
        truth: Some(signal),
        noise: vec![0.0; m],
        seed,
        noise_level: 0.0,
    }
}

#[test]
fn c7_contraction_and_iteration_bound() {
    let start = Instant::now();
    // Three families: flat spread (low constants), spread 25 at s=2
    // (mid), and boundary-hugging spreads at s=2 with planted
    // dominant/tiny signals on the adversarial support.
    let mut cases: Vec<(usize, usize, usize, bool, u64)> = Vec::new();
    cases.extend((0..20).map(|i| (16usize, 1usize, 16usize, false, i as u64)));
    cases.extend((0..8).map(|i| (25, 2, 25, false, 100 + i as u64)));
    cases.extend((0..4).map(|i| (25, 2, 18, true, 200 + i as u64)));
    cases.extend((0..4).map(|i| (25, 2, 20, true, 300 + i as u64)));
    let outcomes: Vec<(f64, f64, usize, u64)> = cases
        .par_iter()
        .map(|&(m, s, spread, planted, seed)| {
            let inst = small_ric_instance(m, s, spread, planted, seed);
            let truth = inst.truth.as_ref().unwrap().clone();
            let d3 = ric_profile(&inst.phi, 3 * s).unwrap()[3 * s];
            assert!(
                d3 < 0.5340,
                "constructed instance (m={m}, seed={seed}) has delta_3s={d3}"
            );
            let r = rho(1.0, d3).unwrap();
            assert!(r < 1.0);
            let res = run_algorithm_traced(
                &AlgorithmSpec::new(AlgorithmId::Stp),
                &inst,
                s,
                &StoppingCriteria::default(),
                TraceOptions {
                    record_estimates: true,
                },
            )
            .unwrap();
            assert!(res.converged, "m={m} seed={seed} did not converge");
            let x_norm = truth.norm();
            let history = res.estimate_history.as_ref().unwrap();
            let mut prev_err = x_norm; // iterate 0 is the zero vector
            for (idx, est) in history.iter().enumerate() {
                let err: f64 = est
                    .iter()
                    .zip(truth.values())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let n_iter = (idx + 1) as i32;
                let geometric = r.powi(n_iter) * x_norm + 1e-9;
                assert!(
                    err <= geometric,
                    "m={m} seed={seed} iter {n_iter}: error {err} above rho^n bound {geometric}"
                );
                assert!(
                    err <= r * prev_err + 1e-9,
                    "m={m} seed={seed} iter {n_iter}: per-step contraction violated"
                );
                prev_err = err;
            }
            let bound = iteration_bound(&truth, r).unwrap();
            assert!(
                res.iterations as u64 <= bound.bound,
                "m={m} seed={seed}: {} iterations exceeds bound {}",
                res.iterations,
                bound.bound
            );
            (d3, r, res.iterations, bound.bound)
        })
        .collect();
    let max_iters = outcomes.iter().map(|o| o.2).max().unwrap();
    let max_bound = outcomes.iter().map(|o| o.3).max().unwrap();
    // Observation: every compliant instance recovers essentially
    // immediately; the geometric envelope and the iteration bound (up to
    // dozens of allowed iterations) are loose worst cases.
    println!(
        "criterion 7: PASS  {} instances, delta_3s in [{:.3}, {:.3}], recovery within bounds \
         (max {} iterations against bounds up to {}) ({:?})",
        outcomes.len(),
        outcomes.iter().map(|o| o.0).fold(f64::INFINITY, f64::min),
        outcomes.iter().map(|o| o.0).fold(0.0f64, f64::max),
        max_iters,
        max_bound,
        start.elapsed()
    );
}

#[test]
fn c8_degradation_identities() {
    let start = Instant::now();
    let trace_opts = TraceOptions {
        record_estimates: true,
    };
    for i in 0..50u64 {
        let s = 3 + (i % 6) as usize;
        let inst = build_instance(
            40,
            120,
            s,
            if i % 2 == 0 {
                SignalKind::Gaussian
            } else {
                SignalKind::Cars
            },
            0.0,
            RngStream::new(31000, i),
        )
        .unwrap();
        // Forced full budgets so the identity is checked on every step.
        let stop_single = StoppingCriteria {
            max_iterations: 8,
            residual_tolerance: 0.0,
            native_rule_enabled: false,
        };
        let stop_double = StoppingCriteria {
            max_iterations: 16,
            residual_tolerance: 0.0,
            native_rule_enabled: false,
        };

        // htpv2 with alpha=0, mu'=mu=1 walks the htp orbit at double
        // speed: its candidate/committed pair at iteration j equals htp's
        // iterates 2j-1 and 2j.
        let htp = run_algorithm_traced(
            &AlgorithmSpec::new(AlgorithmId::Htp),
            &inst,
            s,
            &stop_double,
            trace_opts,
        )
        .unwrap();
        let mut v2 = AlgorithmSpec::new(AlgorithmId::Htpv2);
        v2.alpha = 0;
        v2.mu_prime = 1.0;
        v2.mu = 1.0;
        let htpv2 = run_algorithm_traced(&v2, &inst, s, &stop_single, trace_opts).unwrap();
        let he = htp.estimate_history.as_ref().unwrap();
        let ve = htpv2.estimate_history.as_ref().unwrap();
        for j in 0..8 {
            assert_eq!(
                htpv2.trace[j].candidate_support.as_ref().unwrap(),
                &htp.trace[2 * j].support,
                "instance {i}: identification sets diverge at iteration {j}"
            );
            assert_eq!(
                htpv2.trace[j].support, htp.trace[2 * j + 1].support,
                "instance {i}: supports diverge at iteration {j}"
            );
            assert_eq!(
                htpv2.residual_history[j],
                htp.residual_history[2 * j + 1],
                "instance {i}: residuals diverge at iteration {j}"
            );
            assert_eq!(ve[j], he[2 * j + 1], "instance {i}: estimates diverge");
        }

        // stpv2 with s <= gamma m is the plain algorithm, bit for bit.
        let stp = run_algorithm_traced(
            &AlgorithmSpec::new(AlgorithmId::Stp),
            &inst,
            s,
            &stop_single,
            trace_opts,
        )
        .unwrap();
        let stpv2 = run_algorithm_traced(
            &AlgorithmSpec::new(AlgorithmId::Stpv2).with_gamma(0.3),
            &inst,
            s,
            &stop_single,
            trace_opts,
        )
        .unwrap();
        assert_eq!(stp.residual_history, stpv2.residual_history, "instance {i}");
        assert_eq!(
            stp.estimate_history, stpv2.estimate_history,
            "instance {i}"
        );
        for (a, b) in stp.trace.iter().zip(&stpv2.trace) {
            assert_eq!(a.support, b.support, "instance {i}");
            assert_eq!(a.candidate_support, b.candidate_support, "instance {i}");
        }
    }
    println!(
        "criterion 8: PASS  50 instances, both degradation identities bit-exact ({:?})",
        start.elapsed()
    );
}

#[test]
fn c9_numerical_hygiene_and_reproducibility() {
    let start = Instant::now();
    // Orthogonality across every least-squares step of criteria 3-5.
    let mut worst: f64 = 0.0;
    for curve in TABLE2.curves.iter().chain(TABLE3.curves.iter()) {
        worst = worst.max(curve.max_ls_orthogonality);
    }
    for (_, _, _, orth) in SMALL_S.iter() {
        worst = worst.max(*orth);
    }
    assert!(
        worst <= 1e-10,
        "least-squares orthogonality statistic {worst} above 1e-10"
    );

    // Bit-reproducibility of a representative plan, down to the exported
    // bytes (wall-clock column excluded, being a timing).
    let plan = ExperimentPlan {
        m: 60,
        n: 240,
        signal_kind: SignalKind::Cars,
        sweep: vec![4, 8, 12],
        trials: 50,
        algorithms: vec![sp_method(), stp_method(2.0)],
        stop: StoppingCriteria::default(),
        master_seed: 90210,
        success_tolerance: 1e-6,
    };
    let a = run_rate_curve(&plan).unwrap();
    let b = run_rate_curve(&plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pa = dir.path().join("a.csv");
    let pb = dir.path().join("b.csv");
    export_results(&plan, &a, &[], &pa, ExportFormat::Csv).unwrap();
    export_results(&plan, &b, &[], &pb, ExportFormat::Csv).unwrap();
    let ta = std::fs::read_to_string(&pa).unwrap();
    let tb = std::fs::read_to_string(&pb).unwrap();
    for (la, lb) in ta.lines().zip(tb.lines()) {
        let fa: Vec<&str> = la.split(',').collect();
        let fb: Vec<&str> = lb.split(',').collect();
        assert_eq!(fa[..8], fb[..8], "non-timing CSV fields differ");
    }
    for (ca, cb) in a.iter().zip(&b) {
        for (qa, qb) in ca.points.iter().zip(&cb.points) {
            assert_eq!(qa.successes, qb.successes);
            assert_eq!(qa.mean_iterations, qb.mean_iterations);
            assert_eq!(qa.instances_digest, qb.instances_digest);
        }
    }
    println!(
        "criterion 9: PASS  worst orthogonality {worst:.3e}, reruns bit-identical ({:?})",
        start.elapsed()
    );
}

/// Informative (non-gating) reduced-scale stand-in for the full-size
/// width-limited experiments: at 150x300 the width-limited variant should
/// reach at least the plain algorithm's critical sparsity. Run with
/// `cargo test -p pursuitlab --test acceptance -- --ignored --nocapture`.
#[test]
#[ignore = "informative long-running check; see README"]
fn informative_stpv2_dominance_150x300() {
    let start = Instant::now();
    let mut plan = ExperimentPlan {
        m: 150,
        n: 300,
        signal_kind: SignalKind::Gaussian,
        sweep: (62..=80).step_by(2).collect(),
        trials: 100,
        algorithms: vec![
            stp_method(2.0),
            Method::Pursuit(
                AlgorithmSpec::new(AlgorithmId::Stpv2)
                    .with_mu(2.0)
                    .with_gamma(0.46),
            ),
        ],
        stop: StoppingCriteria::default(),
        master_seed: 7700,
        success_tolerance: 1e-6,
    };
    plan.stop.max_iterations = 200;
    let curves = run_rate_curve(&plan).unwrap();
    let stp_crit = find_critical_sparsity(&curves[0]).critical_s;
    let v2_crit = find_critical_sparsity(&curves[1]).critical_s;
    let verdict = if v2_crit >= stp_crit { "HOLDS" } else { "VIOLATED" };
    println!(
        "informative: width-limited dominance {verdict} at 150x300 \
         (stp mu=2: {stp_crit}, width-limited: {v2_crit}, ceil(m/2) = 75) ({:?})",
        start.elapsed()
    );
    for curve in &curves {
        let rates: Vec<(usize, f64)> = curve.points.iter().map(|p| (p.s, p.rate)).collect();
        println!(
            "informative detail {}: {rates:?}",
            curve.algorithm.display_name()
        );
    }
}
