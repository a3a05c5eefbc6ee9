//! Constraint handling: budget projections, the antenna step regulator,
//! region clipping, the penalised meta-loss and feasibility reports.

use serde::{Deserialize, Serialize};

use crate::channel::{Channels, Position2D};
use crate::config::{user_streams, SystemConfig};
use crate::error::{Error, Result};
use crate::rates::{evaluate_rates, RateReport};
use crate::scalar::{norm_sqr, sum, Cx, Scalar};
use crate::variables::DecisionVariables;

/// Tolerance used when deciding whether a slack counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    /// Rate thresholds.
    pub rho1: f64,
    /// Combiner norms.
    pub rho2: f64,
    /// Common-rate split.
    pub rho3: f64,
    /// Inter-antenna spacing, per metre of shortfall.
    pub rho4: f64,
}

impl Default for PenaltyWeights {
    /// The spacing shortfall is measured in metres, so its weight is scaled
    /// to cost about 10 per tenth of a default wavelength.
    fn default() -> Self {
        Self { rho1: 10.0, rho2: 10.0, rho3: 10.0, rho4: 1e4 }
    }
}

impl PenaltyWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.rho1, self.rho2, self.rho3, self.rho4].iter().all(|r| *r >= 0.0 && r.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("penalty weights must be nonnegative: {self:?}")))
        }
    }
}

/// Rescales each user's stream powers onto its budget when exceeded; the
/// power ratios within a user are kept.
pub fn project_ue_power(powers: &[f64], budgets: &[f64]) -> Result<Vec<f64>> {
    if let Some((stream, &value)) = powers.iter().enumerate().find(|(_, p)| **p < 0.0) {
        return Err(Error::NegativePower { stream, value });
    }
    let n_ul = budgets.len();
    if powers.len() != crate::config::n_streams(n_ul) {
        return Err(Error::Dimension(format!("{} powers for {n_ul} uplink users", powers.len())));
    }
    let mut out = powers.to_vec();
    for (u, &budget) in budgets.iter().enumerate() {
        let streams = user_streams(u, n_ul);
        let total: f64 = streams.iter().map(|&s| powers[s]).sum();
        if total > budget {
            let k = budget / total;
            for s in streams {
                out[s] = powers[s] * k;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BeamformerProjection {
    Scaled(f64),
    Unchanged,
    /// All-zero beamformers cannot be rescaled.
    Degenerate,
}

/// Rescales the stacked beamformers so that `Tr(W W^H) = P_BS`. With
/// `only_if_exceeded`, beamformers already inside the budget are kept.
pub fn project_bs_beamformer(w: &[Cx], p_bs: f64, only_if_exceeded: bool) -> (Vec<Cx>, BeamformerProjection) {
    let power = norm_sqr(w);
    if power == 0.0 {
        return (w.to_vec(), BeamformerProjection::Degenerate);
    }
    if only_if_exceeded && power <= p_bs {
        return (w.to_vec(), BeamformerProjection::Unchanged);
    }
    let k = (p_bs / power).sqrt();
    (w.iter().map(|c| c.scale_f(k)).collect(), BeamformerProjection::Scaled(k))
}

/// `γ tanh(δ)` per coordinate; bounded by `γ` in magnitude.
pub fn regulate_ma_step(delta: &[f64], gamma: f64) -> Vec<f64> {
    delta.iter().map(|d| gamma * d.tanh()).collect()
}

pub fn clip_to_region(p: Position2D, half: f64) -> Position2D {
    Position2D::new(p.x.clamp(-half, half), p.y.clamp(-half, half))
}

/// Euclidean projection of the common-rate shares onto
/// `{c >= 0, Σ c <= floor}`.
pub fn project_common_split(c: &[f64], floor: f64) -> Vec<f64> {
    let clamped: Vec<f64> = c.iter().map(|v| v.max(0.0)).collect();
    let budget = floor.max(0.0);
    if budget == 0.0 {
        return vec![0.0; c.len()];
    }
    if clamped.iter().sum::<f64>() <= budget {
        return clamped;
    }
    // projection onto the scaled simplex {x >= 0, Σ x = budget}
    let mut sorted = c.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - budget) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    c.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// Rescales each combiner to unit norm; all-zero combiners are left alone.
pub fn normalize_combiners(z: &mut [Vec<Cx>]) {
    for v in z {
        let n = norm_sqr(v).sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|c| *c = c.scale_f(1.0 / n));
        }
    }
}

/// Pushes apart antenna pairs closer than `min_spacing` (symmetrically along
/// their connecting line) while keeping everyone inside `[-half, half]`.
/// Returns whether the array ends up satisfying the spacing constraint.
pub fn repair_spacing(ants: &mut [Position2D], min_spacing: f64, half: f64) -> bool {
    let target = min_spacing * (1.0 + 1e-9);
    for _ in 0..200 {
        let mut clean = true;
        for i in 0..ants.len() {
            for j in i + 1..ants.len() {
                let (dx, dy) = (ants[j].x - ants[i].x, ants[j].y - ants[i].y);
                let d = (dx * dx + dy * dy).sqrt();
                if d >= min_spacing {
                    continue;
                }
                clean = false;
                let (ux, uy) = if d > 0.0 { (dx / d, dy / d) } else { (1.0, 0.0) };
                let push = (target - d) / 2.0;
                ants[i] = clip_to_region(Position2D::new(ants[i].x - ux * push, ants[i].y - uy * push), half);
                ants[j] = clip_to_region(Position2D::new(ants[j].x + ux * push, ants[j].y + uy * push), half);
            }
        }
        if clean {
            return true;
        }
    }
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaLossBreakdown<S = f64> {
    pub rate_term: S,
    pub threshold_term: S,
    pub norm_term: S,
    pub common_term: S,
    pub ma_dist_term: S,
    pub total: S,
}

impl<S: Scalar> MetaLossBreakdown<S> {
    pub fn values(&self) -> MetaLossBreakdown<f64> {
        MetaLossBreakdown {
            rate_term: self.rate_term.value(),
            threshold_term: self.threshold_term.value(),
            norm_term: self.norm_term.value(),
            common_term: self.common_term.value(),
            ma_dist_term: self.ma_dist_term.value(),
            total: self.total.value(),
        }
    }
}

fn spacing_violation<S: Scalar>(ants: &[Position2D<S>], min_spacing: f64) -> S {
    let mut acc = S::zero();
    for i in 0..ants.len() {
        for j in i + 1..ants.len() {
            let dx = ants[i].x - ants[j].x;
            let dy = ants[i].y - ants[j].y;
            let dist = (dx * dx + dy * dy).sqrt();
            acc = acc + (-dist + min_spacing).hinge();
        }
    }
    acc
}

/// Negative sum rate plus hinge penalties for the rate thresholds, unit
/// combiner norms, the common-rate split and BS antenna spacing.
pub fn meta_loss<S: Scalar>(
    ch: &Channels<S>,
    vars: &DecisionVariables<S>,
    cfg: &SystemConfig,
    w: &PenaltyWeights,
) -> Result<MetaLossBreakdown<S>> {
    meta_loss_with_rates(ch, vars, cfg, w).map(|(m, _)| m)
}

pub fn meta_loss_with_rates<S: Scalar>(
    ch: &Channels<S>,
    vars: &DecisionVariables<S>,
    cfg: &SystemConfig,
    w: &PenaltyWeights,
) -> Result<(MetaLossBreakdown<S>, RateReport<S>)> {
    let r = evaluate_rates(ch, vars, cfg)?;
    let rate_term = r.sum_rate;

    let dl_short = sum(r.dl_total.iter().map(|&x| (-x + cfg.rate_th_dl).hinge()));
    let ul_short = sum(r.ul_user.iter().map(|&x| (-x + cfg.rate_th_ul).hinge()));
    let threshold_term = (dl_short + ul_short) * w.rho1;

    let norm_term = sum(vars.combiners.iter().map(|z| (norm_sqr(z).sqrt() - 1.0).abs())) * w.rho2;

    let common_term = if vars.common_split.is_empty() {
        S::zero()
    } else {
        (sum(vars.common_split.iter().copied()) - r.common_floor).hinge() * w.rho3
    };

    let ma_dist_term = (spacing_violation(&vars.positions.bs_tx, cfg.min_spacing)
        + spacing_violation(&vars.positions.bs_rx, cfg.min_spacing))
        * w.rho4;

    let total = -rate_term + threshold_term + norm_term + common_term + ma_dist_term;
    Ok((MetaLossBreakdown { rate_term, threshold_term, norm_term, common_term, ma_dist_term, total }, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    BsPower,
    UePower,
    PowerNonNegative,
    DlRate,
    UlRate,
    CombinerNorm,
    CommonSplit,
    CommonShareNonNegative,
    TxSpacing,
    RxSpacing,
    Region,
}

/// One constraint evaluated at a point. Nonnegative slack means satisfied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSlack {
    pub kind: ConstraintKind,
    pub index: usize,
    /// Second antenna of a spacing pair.
    pub partner: Option<usize>,
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub constraints: Vec<ConstraintSlack>,
}

impl FeasibilityReport {
    pub fn satisfied(&self) -> bool {
        self.constraints.iter().all(|c| c.satisfied)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintSlack> {
        self.constraints.iter().filter(|c| !c.satisfied)
    }

    pub fn slack(&self, kind: ConstraintKind, index: usize) -> Option<f64> {
        self.constraints.iter().find(|c| c.kind == kind && c.index == index).map(|c| c.slack)
    }

    pub fn of_kind(&self, kind: ConstraintKind) -> impl Iterator<Item = &ConstraintSlack> {
        self.constraints.iter().filter(move |c| c.kind == kind)
    }

    fn push(&mut self, kind: ConstraintKind, index: usize, partner: Option<usize>, slack: f64) {
        let satisfied = slack >= -FEASIBILITY_TOL;
        self.constraints.push(ConstraintSlack { kind, index, partner, slack, satisfied });
    }
}

/// Slack of every constraint at `vars`, in natural units.
pub fn feasibility_report(ch: &Channels, vars: &DecisionVariables, cfg: &SystemConfig) -> Result<FeasibilityReport> {
    let r = evaluate_rates(ch, vars, cfg)?;
    feasibility_from_rates(&r, vars, cfg)
}

pub fn feasibility_from_rates(
    r: &RateReport,
    vars: &DecisionVariables,
    cfg: &SystemConfig,
) -> Result<FeasibilityReport> {
    use ConstraintKind::*;
    let mut rep = FeasibilityReport::default();
    rep.push(BsPower, 0, None, cfg.p_bs - norm_sqr(&vars.beamformers()));
    for u in 0..cfg.n_ul {
        let total: f64 = user_streams(u, cfg.n_ul).iter().map(|&s| vars.powers[s]).sum();
        rep.push(UePower, u, None, cfg.p_ue_max - total);
    }
    for (s, &p) in vars.powers.iter().enumerate() {
        rep.push(PowerNonNegative, s, None, p);
    }
    for (d, &x) in r.dl_total.iter().enumerate() {
        rep.push(DlRate, d, None, x - cfg.rate_th_dl);
    }
    for (u, &x) in r.ul_user.iter().enumerate() {
        rep.push(UlRate, u, None, x - cfg.rate_th_ul);
    }
    for (s, z) in vars.combiners.iter().enumerate() {
        rep.push(CombinerNorm, s, None, -(norm_sqr(z).sqrt() - 1.0).abs());
    }
    if !vars.common_split.is_empty() {
        rep.push(CommonSplit, 0, None, r.common_floor - vars.common_split.iter().sum::<f64>());
    }
    for (d, &c) in vars.common_split.iter().enumerate() {
        rep.push(CommonShareNonNegative, d, None, c);
    }
    let p = &vars.positions;
    for (kind, ants) in [(TxSpacing, &p.bs_tx), (RxSpacing, &p.bs_rx)] {
        for i in 0..ants.len() {
            for j in i + 1..ants.len() {
                rep.push(kind, i, Some(j), ants[i].distance(ants[j]) - cfg.min_spacing);
            }
        }
    }
    let mut k = 0;
    let mut region = |ants: &[Position2D], movable: bool, rep: &mut FeasibilityReport| {
        for a in ants {
            if movable {
                rep.push(Region, k, None, cfg.region_half - a.x.abs().max(a.y.abs()));
                k += 1;
            }
        }
    };
    let m = vars.mobility;
    region(&p.bs_tx, m.bs, &mut rep);
    region(&p.bs_rx, m.bs, &mut rep);
    region(&p.ul, m.ue, &mut rep);
    region(&p.dl, m.ue, &mut rep);
    Ok(rep)
}
