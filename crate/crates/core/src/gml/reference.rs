//! Multi-start block-coordinate projected gradient descent on the meta-loss.
//! Used as a yardstick for the meta-learner.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::Objective;
use super::optimizer::{finish, initial_point, score_candidate, Best, RunResult};
use crate::channel::Instance;
use crate::config::{user_streams, Scenario, SystemConfig};
use crate::constraints::{normalize_combiners, project_bs_beamformer, project_ue_power, PenaltyWeights};
use crate::error::{Error, Result};
use crate::scalar::Cx;
use crate::variables::{Block, DecisionVariables};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptions {
    pub scenario: Scenario,
    pub penalties: PenaltyWeights,
    /// Block sweeps per start.
    pub max_sweeps: usize,
    /// Relative loss decrease per sweep below which a start stops.
    pub tol: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self { scenario: Scenario::BothSides, penalties: PenaltyWeights::default(), max_sweeps: 400, tol: 1e-9 }
    }
}

/// Start 0 is the meta-learner's initial point for `seed`; start `k` uses
/// stream `k` of the same generator and randomises powers and positions.
pub fn starting_point(cfg: &SystemConfig, scenario: Scenario, seed: u64, k: u64) -> DecisionVariables {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let mut v = initial_point(cfg, scenario.mobility(), &mut rng);
    if k == 0 {
        return v;
    }
    for u in 0..cfg.n_ul {
        let streams = user_streams(u, cfg.n_ul);
        let share = cfg.p_ue_max / streams.len() as f64;
        streams.into_iter().for_each(|s| v.powers[s] = rng.random_range(0.0..=share));
    }
    let a = cfg.region_half;
    let coords: Vec<f64> = (0..v.block_len(Block::Position)).map(|_| rng.random_range(-a..=a)).collect();
    v.set_block(Block::Position, &coords).expect("length matches");
    v
}

fn project_block(b: Block, x: &mut [f64], cfg: &SystemConfig) -> Result<()> {
    match b {
        Block::Power => {
            x.iter_mut().for_each(|p| *p = p.max(0.0));
            let p = project_ue_power(x, &cfg.ue_budgets())?;
            x.copy_from_slice(&p);
        }
        Block::Beamformer => {
            let w: Vec<Cx> = x.chunks(2).map(|c| Cx::new(c[0], c[1])).collect();
            let (w, _) = project_bs_beamformer(&w, cfg.p_bs, cfg.project_only_if_exceeded);
            x.iter_mut().zip(w.iter().flat_map(|c| [c.re, c.im])).for_each(|(d, s)| *d = s);
        }
        Block::Combiner => {
            let n_r = cfg.n_r;
            let mut z: Vec<Vec<Cx>> =
                x.chunks(2 * n_r).map(|s| s.chunks(2).map(|c| Cx::new(c[0], c[1])).collect()).collect();
            normalize_combiners(&mut z);
            x.iter_mut().zip(z.iter().flatten().flat_map(|c| [c.re, c.im])).for_each(|(d, s)| *d = s);
        }
        Block::CommonSplit => x.iter_mut().for_each(|c| *c = c.max(0.0)),
        Block::Position => x.iter_mut().for_each(|c| *c = c.clamp(-cfg.region_half, cfg.region_half)),
    }
    Ok(())
}

fn initial_step(b: Block, cfg: &SystemConfig) -> f64 {
    match b {
        Block::Power => 0.1 * cfg.p_ue_max,
        Block::Beamformer => 0.1 * cfg.p_bs.sqrt(),
        Block::Combiner => 0.1,
        Block::CommonSplit => 0.1,
        Block::Position => 0.05 * cfg.wavelength,
    }
}

/// Descends from one start and returns the final point.
pub fn descend(obj: &Objective, start: DecisionVariables, opts: &ReferenceOptions) -> Result<DecisionVariables> {
    let cfg = obj.cfg;
    let blocks: Vec<Block> = Block::ALL.into_iter().filter(|&b| start.block_len(b) > 0).collect();
    let mut x = start;
    for &b in &blocks {
        let mut flat = x.flatten(b);
        project_block(b, &mut flat, cfg)?;
        x.set_block(b, &flat)?;
    }
    let mut steps: Vec<f64> = blocks.iter().map(|&b| initial_step(b, cfg)).collect();
    let mut f = obj.loss(&x)?.total;
    for _ in 0..opts.max_sweeps {
        let f_sweep = f;
        for (i, &b) in blocks.iter().enumerate() {
            let (f0, g) = obj.grad(&x, &[b])?;
            let g = g.get(b).expect("requested block");
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn == 0.0 || !gn.is_finite() {
                continue;
            }
            let base = x.flatten(b);
            let floor = initial_step(b, cfg) * 1e-9;
            while steps[i] > floor {
                let mut trial: Vec<f64> = base.iter().zip(g).map(|(v, d)| v - steps[i] * d / gn).collect();
                project_block(b, &mut trial, cfg)?;
                let mut y = x.clone();
                y.set_block(b, &trial)?;
                match obj.loss(&y) {
                    Ok(l) if l.total < f0 => {
                        x = y;
                        f = l.total;
                        steps[i] = (steps[i] * 1.5).min(initial_step(b, cfg) * 10.0);
                        break;
                    }
                    _ => steps[i] *= 0.5,
                }
            }
            f = f.min(f0);
        }
        if f_sweep - f <= opts.tol * (1.0 + f.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Best of `n_starts` descents, scored like the meta-learner's candidates.
pub fn reference_optimizer(
    cfg: &SystemConfig,
    instance: &Instance,
    n_starts: usize,
    seed: u64,
    opts: &ReferenceOptions,
) -> Result<RunResult> {
    let started = Instant::now();
    if n_starts == 0 {
        return Err(Error::Config("the reference needs at least one start".into()));
    }
    cfg.validate()?;
    let obj = Objective::new(cfg, instance, opts.penalties);
    let mut best: Option<Best> = None;
    let mut trace = Vec::with_capacity(n_starts);
    let mut diagnostics = Vec::new();
    for k in 0..n_starts as u64 {
        let start = starting_point(cfg, opts.scenario, seed, k);
        match descend(&obj, start, opts).and_then(|x| score_candidate(&obj, &x)) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
            Err(e) => diagnostics.push(format!("start {k}: {e}")),
        }
        trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.score));
    }
    let best = best.ok_or_else(|| Error::Diverged { what: "every start", context: diagnostics.join("; ") })?;
    let mut result = finish(&obj, best, opts.scenario, seed, started)?;
    result.outer_best = trace;
    result.diagnostics = diagnostics;
    result.seconds = started.elapsed().as_secs_f64();
    Ok(result)
}
