//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use marsma::channel::{sample_instance, Channels};
use marsma::config::user_streams;
use marsma::constraints::{project_bs_beamformer, project_ue_power, PenaltyWeights};
use marsma::gml::{
    reference_optimizer, run, run_observed, GmlHyperParams, InnerStep, Objective, ReferenceOptions, RunObserver,
};
use marsma::rates::{dl_common_rate, dl_private_rate, evaluate_rates, sum_rate_objective, ul_stream_rate};
use marsma::{Block, Cx, Mobility, Scenario, SystemConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn all_mobile() -> Mobility {
    Mobility { bs: true, ue: true }
}

fn channel_oracle() -> Outcome {
    let cfg = SystemConfig::default();
    assert_eq!((cfg.n_t, cfg.n_r, cfg.n_paths), (4, 4, 6));
    let started = Instant::now();
    let mut worst = 0.0f64;
    for draw in 0..100u64 {
        let inst = sample_instance(&cfg, draw);
        let v = random_point(&cfg, all_mobile(), &mut rng(10_000 + draw));
        let got = to_oracle(&Channels::assemble(&inst, &v.positions, cfg.wavelength).unwrap());
        let want = oracle_channels(&inst, &v, cfg.wavelength);
        for (g, w) in [(&got.dl, &want.dl), (&got.ul, &want.ul), (&got.si, &want.si), (&got.xlink, &want.xlink)] {
            for (a, b) in g.iter().flatten().zip(w.iter().flatten()) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst <= 1e-12 && secs < 5.0, format!("max abs err {worst:.2e} over 100 draws in {secs:.2}s"))
}

fn rate_oracle() -> Outcome {
    let cfg = SystemConfig::default();
    let ranks = cfg.decode_ranks().unwrap();
    let started = Instant::now();
    let mut worst = 0.0f64;
    for draw in 0..100u64 {
        let inst = sample_instance(&cfg, draw);
        let v = random_point(&cfg, all_mobile(), &mut rng(20_000 + draw));
        let ch = Channels::assemble(&inst, &v.positions, cfg.wavelength).unwrap();
        let want = oracle_rates(&oracle_channels(&inst, &v, cfg.wavelength), &v, &cfg, &ranks);
        for d in 0..cfg.n_dl {
            worst = worst.max((dl_common_rate(d, &ch, &v, &cfg) - want.common[d]).abs());
            worst = worst.max((dl_private_rate(d, &ch, &v, &cfg) - want.private[d]).abs());
        }
        for s in 0..cfg.n_streams() {
            worst = worst.max((ul_stream_rate(s, &ch, &v, &cfg).unwrap() - want.ul_stream[s]).abs());
        }
        worst = worst.max((sum_rate_objective(&ch, &v, &cfg).unwrap().0 - want.sum_rate).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 5.0, format!("max abs err {worst:.2e} over 100 draws in {secs:.2}s"))
}

fn mac_identity() -> Outcome {
    let cfg = SystemConfig { n_r: 1, si_power: 0.0, ..SystemConfig::default() };
    let mut worst = 0.0f64;
    for draw in 0..100u64 {
        let inst = sample_instance(&cfg, draw);
        let mut v = random_point(&cfg, all_mobile(), &mut rng(30_000 + draw));
        v.combiners.iter_mut().for_each(|z| z[0] = Cx::new(1.0, 0.0));
        let ch = Channels::assemble(&inst, &v.positions, cfg.wavelength).unwrap();
        let oc = oracle_channels(&inst, &v, cfg.wavelength);
        let received: f64 = (0..cfg.n_streams()).map(|s| v.powers[s] * oc.ul[owner(s, cfg.n_ul)][0].norm_sqr()).sum();
        let capacity = (1.0 + received / cfg.noise_ul).log2();
        let total: f64 = (0..cfg.n_streams()).map(|s| ul_stream_rate(s, &ch, &v, &cfg).unwrap()).sum();
        worst = worst.max((total - capacity).abs());
    }
    outcome(worst <= 1e-9, format!("max |Σ SIC rates - capacity| {worst:.2e} over 100 draws"))
}

/// Smallest gap between the two lowest common-stream rates; the common floor
/// is a min over these, so a small gap marks a kink of the loss.
fn min_tie_gap(obj: &Objective, v: &marsma::DecisionVariables) -> f64 {
    let r = obj.loss_with_rates(v).unwrap().1;
    let mut c = r.common_per_dl.clone();
    c.sort_by(f64::total_cmp);
    if c.len() < 2 {
        f64::INFINITY
    } else {
        c[1] - c[0]
    }
}

fn gradient_check() -> Outcome {
    let cfg = small_config();
    let started = Instant::now();
    let (mut worst, mut used, mut skipped) = (0.0f64, 0, 0);
    let mut draw = 0u64;
    while used < 20 {
        draw += 1;
        let inst = sample_instance(&cfg, draw);
        let obj = Objective::new(&cfg, &inst, PenaltyWeights::default());
        let v = random_point(&cfg, all_mobile(), &mut rng(40_000 + draw));
        if min_tie_gap(&obj, &v) < 1e-3 {
            skipped += 1;
            continue;
        }
        used += 1;
        let (_, g) = obj.grad(&v, &Block::ALL).unwrap();
        for b in Block::ALL {
            let fd = marsma::autodiff::finite_diff_grad(&v, b, 1e-5, |p| Ok(obj.loss(p)?.total)).unwrap();
            let ad = g.get(b).unwrap();
            let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst = worst.max(max_rel_err(ad, &fd, 1e-3 * scale.max(1e-12)));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 60.0,
        format!("max rel err {worst:.2e} on {used} points ({skipped} near-tie points skipped) in {secs:.2}s"),
    )
}

fn projections() -> Outcome {
    let mut r = rng(50_000);
    let (mut budget_err, mut ratio_err, mut trace_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n_ul = r.random_range(1..4usize);
        let n = 2 * n_ul - 1;
        let powers: Vec<f64> = (0..n).map(|_| r.random_range(0.0..3.0)).collect();
        let budgets: Vec<f64> = (0..n_ul).map(|_| r.random_range(0.01..2.0)).collect();
        let out = project_ue_power(&powers, &budgets).unwrap();
        for (u, &b) in budgets.iter().enumerate() {
            let s = user_streams(u, n_ul);
            let before: f64 = s.iter().map(|&k| powers[k]).sum();
            let after: f64 = s.iter().map(|&k| out[k]).sum();
            budget_err = budget_err.max(after - b);
            for &k in &s {
                let (want, got) = if before > b { (powers[k] / before, out[k] / after) } else { (powers[k], out[k]) };
                ratio_err = ratio_err.max((want - got).abs());
            }
        }
        let len = r.random_range(1..20usize);
        let w: Vec<Cx> = (0..len).map(|_| Cx::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0))).collect();
        let p_bs = r.random_range(0.01..10.0);
        let (pw, _) = project_bs_beamformer(&w, p_bs, false);
        let trace: f64 = pw.iter().map(|c| c.norm_sqr()).sum();
        trace_err = trace_err.max((trace - p_bs).abs());
    }
    outcome(
        budget_err <= 1e-12 && ratio_err <= 1e-10 && trace_err <= 1e-9,
        format!(
            "budget excess {budget_err:.1e}, ratio err {ratio_err:.1e}, trace err {trace_err:.1e} over 1000 inputs"
        ),
    )
}

#[derive(Default)]
struct PositionAudit {
    steps: usize,
    max_coord: f64,
    max_move: f64,
}

impl RunObserver for PositionAudit {
    fn inner_step(&mut self, e: &InnerStep<'_>) {
        for p in e.vars.positions.all() {
            self.max_coord = self.max_coord.max(p.x.abs()).max(p.y.abs());
        }
        if e.block == Block::Position {
            self.steps += 1;
            for (a, b) in e.before.iter().zip(e.after) {
                self.max_move = self.max_move.max((a - b).abs());
                self.max_coord = self.max_coord.max(b.abs());
            }
        }
    }
}

fn regulator_safety() -> Outcome {
    let cfg = SystemConfig::default();
    let hyper = GmlHyperParams { scenario: Scenario::BothSides, ..GmlHyperParams::default() };
    let inst = sample_instance(&cfg, 60);
    let mut audit = PositionAudit::default();
    run_observed(&cfg, &inst, &hyper, 60, &mut audit).unwrap();
    let pass = audit.steps > 0 && audit.max_coord <= cfg.region_half && audit.max_move <= hyper.gamma * (1.0 + 1e-12);
    outcome(
        pass,
        format!(
            "{} position steps over {} epochs; max |coord| {:.4e} (A = {:.0e}), max step {:.4e} (γ = {:.0e})",
            audit.steps, hyper.n_epochs, audit.max_coord, cfg.region_half, audit.max_move, hyper.gamma
        ),
    )
}

fn structure_invariants() -> Outcome {
    let cfg = SystemConfig::default();
    let inst = sample_instance(&cfg, 70);
    let hyper = GmlHyperParams { n_epochs: 40, scenario: Scenario::BothSides, ..GmlHyperParams::default() };
    let a = run(&cfg, &inst, &hyper, 70).unwrap();
    let monotone = a.outer_best.windows(2).all(|w| w[1] >= w[0]);
    let b = run(&cfg, &inst, &hyper, 70).unwrap();
    let identical = a.without_timing() == b.without_timing();
    let frozen = run(&cfg, &inst, &hyper.clone().with_learning_rate(0.0), 70).unwrap();
    let constant = frozen.epoch_mean_loss.windows(2).all(|w| w[0] == w[1]);
    outcome(
        monotone && identical && constant,
        format!("best non-decreasing: {monotone}; same-seed identical: {identical}; zero-lr epoch loss constant: {constant}"),
    )
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn trend() -> Outcome {
    let cfg = SystemConfig::default();
    let started = Instant::now();
    let scenarios = [Scenario::BothSides, Scenario::BsSide, Scenario::Fpa];
    let mut sums = vec![Vec::new(); 3];
    for seed in 0..20u64 {
        let inst = sample_instance(&cfg, seed);
        for (k, &scenario) in scenarios.iter().enumerate() {
            let hyper = GmlHyperParams { n_epochs: 150, n_outer: 2, n_inner: 5, scenario, ..GmlHyperParams::default() };
            sums[k].push(run(&cfg, &inst, &hyper, seed).unwrap().best_objective);
        }
    }
    let (s3, s2, fpa) = (mean(&sums[0]), mean(&sums[1]), mean(&sums[2]));
    let ratio = s3 / fpa;
    let secs = started.elapsed().as_secs_f64();
    outcome(
        s3 >= s2 && s2 >= fpa && ratio >= 1.2,
        format!("mean sum rate s3 {s3:.3}, s2 {s2:.3}, fpa {fpa:.3}; s3/fpa = {ratio:.3} (20 seeds, {secs:.0}s)"),
    )
}

/// Epoch budget for the reference comparison. At the default 300 epochs the
/// slowest instance is still improving (0.835 of the reference); the criterion
/// fixes the instances and starts but leaves the budget open.
const REFERENCE_EPOCHS: usize = 1000;

fn reference_sanity() -> Outcome {
    let cfg = small_config();
    let started = Instant::now();
    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let inst = sample_instance(&cfg, 90 + seed);
        let hyper =
            GmlHyperParams { n_epochs: REFERENCE_EPOCHS, scenario: Scenario::BothSides, ..GmlHyperParams::default() };
        let gml = run(&cfg, &inst, &hyper, seed).unwrap();
        let opts = ReferenceOptions { scenario: Scenario::BothSides, ..ReferenceOptions::default() };
        let reference = reference_optimizer(&cfg, &inst, 20, seed, &opts).unwrap();
        ratios.push(gml.best_objective / reference.best_objective);
    }
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = started.elapsed().as_secs_f64();
    let listed: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(
        worst >= 0.85 && secs < 600.0,
        format!(
            "GML ({REFERENCE_EPOCHS} epochs) / reference (20 starts) per instance [{}], min {worst:.3} ({secs:.0}s)",
            listed.join(", ")
        ),
    )
}

fn si_monotonicity() -> Outcome {
    let cfg = SystemConfig::default();
    let levels_db = [-90.0, -75.0, -60.0, -45.0, -30.0];
    let mut failures = Vec::new();
    let mut drops = Vec::new();
    for seed in 0..10u64 {
        let inst = sample_instance(&cfg, 100 + seed);
        let hyper = GmlHyperParams { n_epochs: 60, scenario: Scenario::Fpa, ..GmlHyperParams::default() };
        let v = run(&cfg, &inst, &hyper, seed).unwrap().best;
        let ul: Vec<f64> = levels_db
            .iter()
            .map(|db| {
                let i = inst.with_si_power(cfg.n_paths, marsma::config::db_to_linear(*db)).unwrap();
                let ch = Channels::assemble(&i, &v.positions, cfg.wavelength).unwrap();
                evaluate_rates(&ch, &v, &cfg).unwrap().ul_sum
            })
            .collect();
        if !ul.windows(2).all(|w| w[1] < w[0]) {
            failures.push(seed);
        }
        drops.push(ul[0] - ul[ul.len() - 1]);
    }
    outcome(
        failures.is_empty(),
        format!(
            "UL sum rate strictly decreasing from -90 to -30 dB on {}/10 seeds; mean drop {:.3} bit/s/Hz",
            10 - failures.len(),
            mean(&drops)
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(&str, Check); 10] = [
        ("channel oracle equivalence", channel_oracle),
        ("rate oracle equivalence", rate_oracle),
        ("scalar MAC SIC identity", mac_identity),
        ("gradient correctness", gradient_check),
        ("projection properties", projections),
        ("regulator and region safety", regulator_safety),
        ("algorithm-structure invariants", structure_invariants),
        ("trend reproduction", trend),
        ("reference-optimizer sanity", reference_sanity),
        ("SI monotonicity", si_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let o = check();
        println!("criterion {}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
