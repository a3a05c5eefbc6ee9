use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::Mlp;
use super::objective::Objective;
use crate::channel::{cscg, Instance};
use crate::config::{user_streams, Scenario, SystemConfig};
use crate::constraints::{
    feasibility_from_rates, project_bs_beamformer, project_ue_power, BeamformerProjection, FeasibilityReport,
    PenaltyWeights,
};
use crate::error::{Error, Result};
use crate::rates::RateReport;
use crate::scalar::{norm_sqr, Cx};
use crate::variables::{Block, DecisionVariables, Mobility, Positions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmlHyperParams {
    pub n_inner: usize,
    pub n_outer: usize,
    pub n_epochs: usize,
    /// Largest per-step antenna displacement, metres.
    pub gamma: f64,
    pub penalties: PenaltyWeights,
    /// Adam learning rate per network, in [`Block::ALL`] order.
    pub learning_rates: [f64; 5],
    pub scenario: Scenario,
    pub hidden: usize,
    /// Feed unit-norm gradients to the networks.
    pub normalize_inputs: bool,
    /// Multiplier on the natural per-block output scale.
    pub step_scale: f64,
    /// Gain applied to the position network output inside the regulator's
    /// `tanh`.
    pub position_gain: f64,
}

impl Default for GmlHyperParams {
    fn default() -> Self {
        Self {
            n_inner: 5,
            n_outer: 2,
            n_epochs: 300,
            gamma: 0.1 * SystemConfig::default().wavelength,
            penalties: PenaltyWeights::default(),
            learning_rates: [1e-3; 5],
            scenario: Scenario::BothSides,
            hidden: 200,
            normalize_inputs: true,
            step_scale: 1.0,
            position_gain: 10.0,
        }
    }
}

impl GmlHyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_inner == 0 || self.n_outer == 0 || self.n_epochs == 0 {
            return Err(Error::Config("inner, outer and epoch counts must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.learning_rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("learning rates must be nonnegative".into()));
        }
        if self.hidden == 0
            || self.step_scale.is_nan()
            || self.step_scale <= 0.0
            || self.position_gain.is_nan()
            || self.position_gain <= 0.0
        {
            return Err(Error::Config("hidden width, step scale and position gain must be positive".into()));
        }
        self.penalties.validate()
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rates = [lr; 5];
        self
    }
}

fn slot(b: Block) -> usize {
    Block::ALL.iter().position(|&x| x == b).expect("every block is listed")
}

/// One network per variable block; blocks without coordinates get none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkBundle {
    nets: [Option<Mlp>; 5],
}

impl NetworkBundle {
    fn build(vars: &DecisionVariables, hidden: usize, mut make: impl FnMut(&[usize]) -> Result<Mlp>) -> Result<Self> {
        let mut nets: [Option<Mlp>; 5] = Default::default();
        for b in Block::ALL {
            let n = vars.block_len(b);
            if n > 0 {
                nets[slot(b)] = Some(make(&[n, hidden, hidden, n])?);
            }
        }
        Ok(Self { nets })
    }

    /// Networks sized for `vars`, initialised in [`Block::ALL`] order.
    pub fn init(vars: &DecisionVariables, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::build(vars, hidden, |s| Mlp::init(s, rng))
    }

    pub fn zeros(vars: &DecisionVariables, hidden: usize) -> Result<Self> {
        Self::build(vars, hidden, Mlp::zeros)
    }

    pub fn get(&self, b: Block) -> Option<&Mlp> {
        self.nets[slot(b)].as_ref()
    }

    pub fn get_mut(&mut self, b: Block) -> Option<&mut Mlp> {
        self.nets[slot(b)].as_mut()
    }
}

/// Feasible starting point: random beamformers at full BS power, random unit
/// combiners, half of each UE budget split evenly over its streams, zero
/// common shares and the reference antenna layout.
pub fn initial_point(cfg: &SystemConfig, mobility: Mobility, rng: &mut ChaCha8Rng) -> DecisionVariables {
    let mut v = DecisionVariables::zeros(cfg, mobility);
    let w: Vec<Cx> = (0..cfg.n_t * (cfg.n_dl + 1)).map(|_| cscg(rng, 1.0)).collect();
    let (w, _) = project_bs_beamformer(&w, cfg.p_bs, false);
    v.set_beamformers(&w);
    for z in &mut v.combiners {
        z.iter_mut().for_each(|c| *c = cscg(rng, 1.0));
        let n = norm_sqr(z).sqrt();
        z.iter_mut().for_each(|c| *c = c.scale_f(1.0 / n));
    }
    for u in 0..cfg.n_ul {
        let streams = user_streams(u, cfg.n_ul);
        let each = 0.5 * cfg.p_ue_max / streams.len() as f64;
        streams.into_iter().for_each(|s| v.powers[s] = each);
    }
    v.positions = Positions::reference_layout(cfg);
    v
}

/// Natural magnitude of one coordinate of a block, used to scale network
/// outputs into increments.
fn output_scale(b: Block, cfg: &SystemConfig, hyper: &GmlHyperParams) -> f64 {
    let s = match b {
        Block::Power => cfg.p_ue_max,
        Block::Beamformer => (cfg.p_bs / (cfg.n_t * (cfg.n_dl + 1)) as f64).sqrt(),
        Block::Combiner => (1.0 / cfg.n_r as f64).sqrt(),
        Block::CommonSplit => 1.0,
        Block::Position => return hyper.position_gain,
    };
    s * hyper.step_scale
}

fn network_input(g: &[f64], normalize: bool) -> Vec<f64> {
    if !normalize {
        return g.to_vec();
    }
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        g.iter().map(|v| v / n).collect()
    } else {
        g.to_vec()
    }
}

#[derive(Clone, Debug)]
enum ProjectionRecord {
    None,
    Power { pre: Vec<f64>, post: Vec<f64> },
    Beamformer { pre: Vec<f64>, how: BeamformerProjection },
}

/// What the meta-gradient needs to know about one inner cycle.
#[derive(Clone, Debug)]
pub struct CycleRecord {
    pub block: Block,
    inputs: Vec<Vec<f64>>,
    /// Derivative of the block value with respect to each network output.
    factors: Vec<Vec<f64>>,
    projection: ProjectionRecord,
}

/// Event passed to [`RunObserver::inner_step`].
#[derive(Debug)]
pub struct InnerStep<'a> {
    pub epoch: usize,
    pub outer: usize,
    pub block: Block,
    pub step: usize,
    pub before: &'a [f64],
    pub after: &'a [f64],
    pub vars: &'a DecisionVariables,
}

/// Event passed to [`RunObserver::outer_iteration`].
#[derive(Debug)]
pub struct OuterStep<'a> {
    pub epoch: usize,
    pub outer: usize,
    pub loss: f64,
    pub best_score: f64,
    pub candidate: &'a DecisionVariables,
}

pub trait RunObserver {
    fn inner_step(&mut self, _event: &InnerStep<'_>) {}
    fn outer_iteration(&mut self, _event: &OuterStep<'_>) {}
    fn epoch_end(&mut self, _epoch: usize, _mean_loss: f64) {}
}

pub struct NoopObserver;

impl RunObserver for NoopObserver {}

#[derive(Clone, Copy, Debug, Default)]
struct Cursor {
    epoch: usize,
    outer: usize,
}

/// Runs `N_i` network-driven updates of `block` starting from `init`, with all
/// other blocks taken from `bundle`, then applies the block's projection.
/// Returns the updated block value.
#[allow(clippy::too_many_arguments)]
pub fn inner_cycle(
    block: Block,
    net: &Mlp,
    bundle: &DecisionVariables,
    init: &DecisionVariables,
    obj: &Objective,
    hyper: &GmlHyperParams,
    observer: &mut dyn RunObserver,
) -> Result<(Vec<f64>, CycleRecord)> {
    inner_cycle_at(block, net, bundle, init, obj, hyper, observer, Cursor::default())
}

#[allow(clippy::too_many_arguments)]
fn inner_cycle_at(
    block: Block,
    net: &Mlp,
    bundle: &DecisionVariables,
    init: &DecisionVariables,
    obj: &Objective,
    hyper: &GmlHyperParams,
    observer: &mut dyn RunObserver,
    at: Cursor,
) -> Result<(Vec<f64>, CycleRecord)> {
    let cfg = obj.cfg;
    let mut cur = bundle.clone();
    let mut x = init.flatten(block);
    cur.set_block(block, &x)?;
    let fixed_channels = if block == Block::Position { None } else { Some(obj.channels(&cur.positions)?) };
    let scale = output_scale(block, cfg, hyper);
    let mut rec = CycleRecord { block, inputs: Vec::new(), factors: Vec::new(), projection: ProjectionRecord::None };

    for step in 0..hyper.n_inner {
        let (_, mut g) = match &fixed_channels {
            Some(ch) => obj.grad_at(&cur, &[block], ch)?,
            None => obj.grad(&cur, &[block])?,
        };
        let g = g.take(block).expect("requested block");
        let input = network_input(&g, hyper.normalize_inputs);
        let out = net.forward(&input)?;
        if out.iter().any(|o| !o.is_finite()) {
            return Err(Error::Diverged { what: "network output", context: format!("block {}", block.name()) });
        }
        let before = x.clone();
        let mut factor = vec![scale; x.len()];
        match block {
            Block::Power => {
                for k in 0..x.len() {
                    x[k] += out[k] * scale;
                    if x[k] <= 0.0 {
                        x[k] = 0.0;
                        factor[k] = 0.0;
                    }
                }
            }
            Block::Position => {
                let a = cfg.region_half;
                for k in 0..x.len() {
                    let t = (out[k] * scale).tanh();
                    let moved = x[k] + hyper.gamma * t;
                    x[k] = moved.clamp(-a, a);
                    factor[k] = if moved == x[k] { hyper.gamma * (1.0 - t * t) * scale } else { 0.0 };
                }
            }
            _ => x.iter_mut().zip(&out).for_each(|(v, o)| *v += o * scale),
        }
        cur.set_block(block, &x)?;
        observer.inner_step(&InnerStep {
            epoch: at.epoch,
            outer: at.outer,
            block,
            step,
            before: &before,
            after: &x,
            vars: &cur,
        });
        rec.inputs.push(input);
        rec.factors.push(factor);
    }

    match block {
        Block::Power => {
            let post = project_ue_power(&x, &cfg.ue_budgets())?;
            rec.projection = ProjectionRecord::Power { pre: x, post: post.clone() };
            Ok((post, rec))
        }
        Block::Beamformer => {
            let w: Vec<Cx> = x.chunks(2).map(|c| Cx::new(c[0], c[1])).collect();
            let (proj, how) = project_bs_beamformer(&w, cfg.p_bs, cfg.project_only_if_exceeded);
            rec.projection = ProjectionRecord::Beamformer { pre: x, how };
            Ok((proj.iter().flat_map(|c| [c.re, c.im]).collect(), rec))
        }
        _ => Ok((x, rec)),
    }
}

/// Pulls a gradient at the projected value back to the pre-projection value.
fn projection_vjp(rec: &CycleRecord, up: &[f64], cfg: &SystemConfig) -> Vec<f64> {
    match &rec.projection {
        ProjectionRecord::None => up.to_vec(),
        ProjectionRecord::Power { pre, post } => {
            let mut out = up.to_vec();
            for (u, budget) in cfg.ue_budgets().into_iter().enumerate() {
                let streams = user_streams(u, cfg.n_ul);
                let total: f64 = streams.iter().map(|&s| pre[s]).sum();
                if total > budget {
                    let mix: f64 = streams.iter().map(|&s| up[s] * post[s]).sum::<f64>() / budget;
                    for &s in &streams {
                        out[s] = budget / total * (up[s] - mix);
                    }
                }
            }
            out
        }
        ProjectionRecord::Beamformer { pre, how } => match how {
            BeamformerProjection::Scaled(k) => {
                let nn: f64 = pre.iter().map(|v| v * v).sum();
                let dot: f64 = pre.iter().zip(up).map(|(a, b)| a * b).sum();
                up.iter().zip(pre).map(|(u, w)| k * (u - w * dot / nn)).collect()
            }
            _ => up.to_vec(),
        },
    }
}

/// Result of one outer iteration.
#[derive(Clone, Debug)]
pub struct OuterOutcome {
    pub loss: f64,
    pub candidate: DecisionVariables,
    /// First-order meta-gradient per network, in [`Block::ALL`] order.
    pub param_grads: [Option<Vec<f64>>; 5],
}

fn active_blocks(v: &DecisionVariables) -> Vec<Block> {
    Block::ALL.into_iter().filter(|&b| v.block_len(b) > 0).collect()
}

/// Runs the five inner cycles in order, each restarting its block from
/// `init`, evaluates the meta-loss at the candidate and back-propagates it to
/// the network parameters (first order: gradient inputs are treated as data).
pub fn outer_iteration(
    nets: &NetworkBundle,
    bundle: &DecisionVariables,
    init: &DecisionVariables,
    obj: &Objective,
    hyper: &GmlHyperParams,
    observer: &mut dyn RunObserver,
) -> Result<OuterOutcome> {
    outer_iteration_at(nets, bundle, init, obj, hyper, observer, Cursor::default())
}

fn outer_iteration_at(
    nets: &NetworkBundle,
    bundle: &DecisionVariables,
    init: &DecisionVariables,
    obj: &Objective,
    hyper: &GmlHyperParams,
    observer: &mut dyn RunObserver,
    at: Cursor,
) -> Result<OuterOutcome> {
    let blocks = active_blocks(init);
    let mut cand = bundle.clone();
    let mut records = Vec::with_capacity(blocks.len());
    for &b in &blocks {
        let net = nets.get(b).ok_or_else(|| Error::Dimension(format!("no network for block {}", b.name())))?;
        let (value, rec) = inner_cycle_at(b, net, &cand, init, obj, hyper, observer, at)?;
        cand.set_block(b, &value)?;
        records.push(rec);
    }
    let (loss, g) = obj.grad(&cand, &blocks)?;
    if !g.is_finite() {
        return Err(Error::Diverged { what: "meta-loss gradient", context: "candidate".into() });
    }
    let mut param_grads: [Option<Vec<f64>>; 5] = Default::default();
    for rec in &records {
        let net = nets.get(rec.block).expect("checked above");
        let up = projection_vjp(rec, g.get(rec.block).expect("requested block"), obj.cfg);
        let mut acc = vec![0.0; net.params().len()];
        for (input, factor) in rec.inputs.iter().zip(&rec.factors) {
            let upstream: Vec<f64> = up.iter().zip(factor).map(|(a, b)| a * b).collect();
            net.accumulate_param_grads(input, &upstream, &mut acc)?;
        }
        param_grads[slot(rec.block)] = Some(acc);
    }
    Ok(OuterOutcome { loss, candidate: cand, param_grads })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: DecisionVariables,
    /// Sum rate at `best`.
    pub best_objective: f64,
    /// Negative meta-loss at `best`; the tracked quantity.
    pub best_score: f64,
    pub best_rates: RateReport,
    pub feasibility: FeasibilityReport,
    pub feasible: bool,
    pub epoch_mean_loss: Vec<f64>,
    /// Best score within each epoch.
    pub epoch_best: Vec<f64>,
    /// Global best score after each outer iteration.
    pub outer_best: Vec<f64>,
    pub epochs: usize,
    pub diagnostics: Vec<String>,
    pub seconds: f64,
    pub seed: u64,
    pub scenario: Scenario,
}

impl RunResult {
    /// Copy with wall-clock zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { seconds: 0.0, ..self.clone() }
    }
}

pub(crate) struct Best {
    pub vars: DecisionVariables,
    pub score: f64,
}

/// Scores a candidate by the negative meta-loss of its repaired form.
pub(crate) fn score_candidate(obj: &Objective, cand: &DecisionVariables) -> Result<Best> {
    let vars = obj.repair(cand)?;
    let score = -obj.loss(&vars)?.total;
    if !score.is_finite() {
        return Err(Error::Diverged { what: "score", context: "candidate".into() });
    }
    Ok(Best { vars, score })
}

pub(crate) fn finish(
    obj: &Objective,
    best: Best,
    scenario: Scenario,
    seed: u64,
    started: Instant,
) -> Result<RunResult> {
    let (_, rates) = obj.loss_with_rates(&best.vars)?;
    let feasibility = feasibility_from_rates(&rates, &best.vars, obj.cfg)?;
    Ok(RunResult {
        best_objective: rates.sum_rate,
        best_score: best.score,
        feasible: feasibility.satisfied(),
        best: best.vars,
        best_rates: rates,
        feasibility,
        epoch_mean_loss: Vec::new(),
        epoch_best: Vec::new(),
        outer_best: Vec::new(),
        epochs: 0,
        diagnostics: Vec::new(),
        seconds: started.elapsed().as_secs_f64(),
        seed,
        scenario,
    })
}

/// Seeded GML run: variables are initialised first, then the networks.
pub fn run(cfg: &SystemConfig, instance: &Instance, hyper: &GmlHyperParams, seed: u64) -> Result<RunResult> {
    run_observed(cfg, instance, hyper, seed, &mut NoopObserver)
}

pub fn run_observed(
    cfg: &SystemConfig,
    instance: &Instance,
    hyper: &GmlHyperParams,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<RunResult> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = initial_point(cfg, hyper.scenario.mobility(), &mut rng);
    let nets = NetworkBundle::init(&init, hyper.hidden, &mut rng)?;
    run_with(cfg, instance, hyper, init, nets, seed, observer)
}

/// Runs the epoch loop from explicit starting variables and networks.
pub fn run_with(
    cfg: &SystemConfig,
    instance: &Instance,
    hyper: &GmlHyperParams,
    init: DecisionVariables,
    mut nets: NetworkBundle,
    seed: u64,
    observer: &mut dyn RunObserver,
) -> Result<RunResult> {
    let started = Instant::now();
    cfg.validate()?;
    hyper.validate()?;
    init.check_shape(cfg)?;
    let obj = Objective::new(cfg, instance, hyper.penalties);
    let blocks = active_blocks(&init);
    let mut adam: Vec<Option<AdamState>> = Block::ALL
        .iter()
        .map(|&b| nets.get(b).map(|n| AdamState::new(n.params().len(), hyper.learning_rates[slot(b)])))
        .collect();

    let mut best: Option<Best> = None;
    let mut epoch_mean_loss = Vec::with_capacity(hyper.n_epochs);
    let mut epoch_best = Vec::with_capacity(hyper.n_epochs);
    let mut outer_best = Vec::with_capacity(hyper.n_epochs * hyper.n_outer);
    let mut diagnostics = Vec::new();

    for epoch in 0..hyper.n_epochs {
        let mut bundle = init.clone();
        let mut losses = Vec::with_capacity(hyper.n_outer);
        let mut acc: Vec<Option<Vec<f64>>> =
            Block::ALL.iter().map(|&b| nets.get(b).map(|n| vec![0.0; n.params().len()])).collect();
        let mut this_epoch_best = f64::NEG_INFINITY;
        for outer in 0..hyper.n_outer {
            let at = Cursor { epoch, outer };
            let mut loss = f64::NAN;
            let step = outer_iteration_at(&nets, &bundle, &init, &obj, hyper, observer, at)
                .and_then(|o| score_candidate(&obj, &o.candidate).map(|s| (o, s)));
            match step {
                Ok((o, scored)) => {
                    loss = o.loss;
                    losses.push(o.loss);
                    for (a, g) in acc.iter_mut().zip(&o.param_grads) {
                        if let (Some(a), Some(g)) = (a.as_mut(), g) {
                            a.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                        }
                    }
                    this_epoch_best = this_epoch_best.max(scored.score);
                    if best.as_ref().is_none_or(|b| scored.score > b.score) {
                        best = Some(scored);
                    }
                    bundle = o.candidate;
                }
                Err(e) => diagnostics.push(format!("epoch {epoch} outer {outer}: {e}")),
            }
            let best_score = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.score);
            outer_best.push(best_score);
            observer.outer_iteration(&OuterStep { epoch, outer, loss, best_score, candidate: &bundle });
        }
        let mean = if losses.is_empty() { f64::NAN } else { losses.iter().sum::<f64>() / losses.len() as f64 };
        epoch_mean_loss.push(mean);
        epoch_best.push(this_epoch_best);
        observer.epoch_end(epoch, mean);
        if losses.is_empty() {
            continue;
        }
        for &b in &blocks {
            let k = slot(b);
            if let (Some(net), Some(state), Some(g)) = (nets.get_mut(b), adam[k].as_mut(), acc[k].as_mut()) {
                g.iter_mut().for_each(|v| *v /= hyper.n_outer as f64);
                state.step(net.params_mut(), g)?;
            }
        }
    }

    let best = best.ok_or_else(|| Error::Diverged {
        what: "every outer iteration",
        context: diagnostics.last().cloned().unwrap_or_default(),
    })?;
    let mut result = finish(&obj, best, hyper.scenario, seed, started)?;
    result.epoch_mean_loss = epoch_mean_loss;
    result.epoch_best = epoch_best;
    result.outer_best = outer_best;
    result.epochs = hyper.n_epochs;
    result.diagnostics = diagnostics;
    result.seconds = started.elapsed().as_secs_f64();
    Ok(result)
}
