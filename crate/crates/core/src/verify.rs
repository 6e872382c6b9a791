//! Quick invariant and oracle checks, run by the `verify` subcommand.

use num_complex::Complex64;
use rand::Rng;

use crate::allocation;
use crate::association;
use crate::channel::{self, ChannelSet, QuantModel};
use crate::config::SystemConfig;
use crate::cvec;
use crate::error::Result;
use crate::harness::{self, SchemeSpec};
use crate::rng::{self, Purpose};
use crate::topology;
use crate::transmission;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Runs every check on small instances derived from `config`. Errors raised
/// inside a check count as failures of that check.
pub fn run_all(config: &SystemConfig) -> Vec<CheckOutcome> {
    type Check = fn(&SystemConfig) -> Result<CheckOutcome>;
    let checks: [(&'static str, Check); 8] = [
        ("path_loss_anchor", path_loss_anchor),
        ("quantizer_distortion", quantizer_distortion),
        ("waterfill_vs_grid", waterfill_vs_grid),
        ("allocation_consistency", allocation_consistency),
        ("zf_nullity", zf_nullity),
        ("jensen_step", jensen_step),
        ("lemma3_bounds", lemma3_bounds),
        ("thread_determinism", thread_determinism),
    ];
    checks
        .iter()
        .map(|(name, f)| f(config).unwrap_or_else(|e| outcome(name, false, format!("error: {e}"))))
        .collect()
}

fn path_loss_anchor(_: &SystemConfig) -> Result<CheckOutcome> {
    let pl = topology::path_loss_db(10.0);
    let rx = 50.0 + pl;
    Ok(outcome(
        "path_loss_anchor",
        (pl + 56.18).abs() < 1e-9 && (rx + 6.0).abs() < 0.2,
        format!("PL(10 m) = {pl:.4} dB, receive SNR at 50 dB = {rx:.4} dB"),
    ))
}

fn quantizer_distortion(config: &SystemConfig) -> Result<CheckOutcome> {
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for b in [1.0, 2.0, 4.0, 8.0] {
        let mut r = rng::stream(config.master_seed, Purpose::Auxiliary, &[1, b as u64]);
        let mut acc = 0.0;
        for _ in 0..draws {
            let g = channel::standard_complex_normal(&mut r);
            let q = channel::quantize_gain(g, b, &mut r, config.quant_model)?;
            acc += (g - q).norm_sqr();
        }
        worst = worst.max((acc / draws as f64 / (-b).exp2() - 1.0).abs());
    }
    Ok(outcome(
        "quantizer_distortion",
        worst < 0.02,
        format!("worst relative distortion error {worst:.4} over {draws} draws"),
    ))
}

fn waterfill_vs_grid(config: &SystemConfig) -> Result<CheckOutcome> {
    let mut r = rng::stream(config.master_seed, Purpose::Auxiliary, &[2]);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_budget: f64 = 0.0;
    for _ in 0..50 {
        let n = r.random_range(1..=4);
        let weights: Vec<f64> = (0..n).map(|_| r.random_range(1e-3..1.0)).collect();
        let budget = r.random_range(0..=6) as f64;
        let wf = allocation::waterfill(&weights, budget)?;
        let (_, grid) = allocation::grid_oracle(&weights, budget, 0.05)?;
        worst_gap = worst_gap.max(allocation::objective(&weights, &wf.levels) - grid);
        worst_budget = worst_budget.max((wf.levels.iter().sum::<f64>() - budget).abs());
    }
    Ok(outcome(
        "waterfill_vs_grid",
        worst_gap <= 1e-3 && worst_budget <= 1e-9,
        format!("max objective excess {worst_gap:.3e}, max budget error {worst_budget:.3e}"),
    ))
}

fn allocation_consistency(config: &SystemConfig) -> Result<CheckOutcome> {
    let mut failures = 0;
    for d in 0..10 {
        let state = harness::prepare_drop(config, d)?;
        let assoc = association::propose_association(&state.initial, &state.long_term, config)?;
        let ap = allocation::allocate_ap_bits(&assoc, &state.long_term, config)?;
        if !allocation::consistency_check(&ap, &state.long_term, &assoc)? {
            failures += 1;
        }
    }
    Ok(outcome("allocation_consistency", failures == 0, format!("{failures} of 10 drops inconsistent")))
}

fn zf_nullity(config: &SystemConfig) -> Result<CheckOutcome> {
    let n = config.antennas_per_ap;
    let group = config.stream_cap.min(n);
    let cfg = SystemConfig {
        num_aps: 1,
        num_ues: group,
        ..config.clone()
    };
    let assoc = association::Association::from_ue_groups(group, vec![(0..group).collect()])?;
    let mut r = rng::stream(config.master_seed, Purpose::Auxiliary, &[3]);
    let mut worst_null: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for _ in 0..50 {
        let vectors: Vec<Vec<Complex64>> = (0..group)
            .map(|_| (0..n).map(|_| channel::standard_complex_normal(&mut r)).collect())
            .collect();
        let set = ChannelSet::new(1, group, n, vectors)?;
        let pre = transmission::zf_precoder(&set, &assoc, &cfg)?;
        for k in 0..group {
            let w = pre.vector(0, k).unwrap_or_default();
            worst_norm = worst_norm.max((cvec::norm(w) - 1.0).abs());
            for j in (0..group).filter(|&j| j != k) {
                let h = set.get(0, j);
                worst_null = worst_null.max(cvec::inner(h, w).norm() / cvec::norm(h));
            }
        }
    }
    Ok(outcome(
        "zf_nullity",
        worst_null <= 1e-9 && worst_norm <= 1e-10,
        format!("max relative leakage {worst_null:.3e}, max norm error {worst_norm:.3e}"),
    ))
}

fn jensen_step(config: &SystemConfig) -> Result<CheckOutcome> {
    let mut violations = 0;
    for d in 0..20 {
        let state = harness::prepare_drop(config, d)?;
        let assoc = association::propose_association(&state.initial, &state.long_term, config)?;
        let alloc = harness::scheme_allocation(&assoc, &state.long_term, harness::AllocationPolicy::Proposed, config)?;
        let s = transmission::surrogate_metrics(&assoc, &state.long_term, &alloc.bits, config);
        if s.r_sum_alt > s.sum_r_alt() {
            violations += 1;
        }
    }
    Ok(outcome("jensen_step", violations == 0, format!("{violations} of 20 instances violate")))
}

fn lemma3_bounds(config: &SystemConfig) -> Result<CheckOutcome> {
    let state = harness::prepare_drop(config, 0)?;
    let assoc = association::propose_association(&state.initial, &state.long_term, config)?;
    let alloc = harness::scheme_allocation(&assoc, &state.long_term, harness::AllocationPolicy::Proposed, config)?;
    let report = transmission::verify_lemma3(&state.long_term, &assoc, &alloc.bits, config, 2000)?;
    let failed = report.failures();
    Ok(outcome(
        "lemma3_bounds",
        failed.is_empty(),
        format!("{} UEs, failing UEs {failed:?}", report.ues.len()),
    ))
}

fn thread_determinism(config: &SystemConfig) -> Result<CheckOutcome> {
    let cfg = SystemConfig {
        drops: 4,
        realizations: 3,
        ..config.clone()
    };
    let schemes = SchemeSpec::all();
    let run = |threads: usize| -> Result<Vec<u8>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Precondition(e.to_string()))?;
        let res = pool.install(|| harness::single_run(&cfg, &schemes))?;
        let mut buf = Vec::new();
        harness::write_csv(&res, &mut buf)?;
        Ok(buf)
    };
    let same = run(1)? == run(4)?;
    Ok(outcome("thread_determinism", same, format!("1 vs 4 threads identical: {same}")))
}

/// Whether `model` supports zero-bit links (used in the CLI's summary).
pub fn supports_zero_bits(model: QuantModel) -> bool {
    channel::quantize_with_noise(Complex64::new(1.0, 0.0), 0.0, Complex64::new(0.0, 0.0), model).is_ok()
}
