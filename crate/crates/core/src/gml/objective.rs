use crate::autodiff::{self, GradientVector};
use crate::channel::{Channels, Instance};
use crate::config::SystemConfig;
use crate::constraints::{
    meta_loss, meta_loss_with_rates, normalize_combiners, project_common_split, repair_spacing, MetaLossBreakdown,
    PenaltyWeights,
};
use crate::error::Result;
use crate::rates::RateReport;
use crate::variables::{Block, DecisionVariables, Positions};

/// The penalised loss of one instance, shared by the optimizers.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    pub cfg: &'a SystemConfig,
    pub instance: &'a Instance,
    pub weights: PenaltyWeights,
}

impl<'a> Objective<'a> {
    pub fn new(cfg: &'a SystemConfig, instance: &'a Instance, weights: PenaltyWeights) -> Self {
        Self { cfg, instance, weights }
    }

    pub fn channels(&self, pos: &Positions) -> Result<Channels> {
        Channels::assemble(self.instance, pos, self.cfg.wavelength)
    }

    pub fn loss(&self, v: &DecisionVariables) -> Result<MetaLossBreakdown> {
        meta_loss(&self.channels(&v.positions)?, v, self.cfg, &self.weights)
    }

    pub fn loss_with_rates(&self, v: &DecisionVariables) -> Result<(MetaLossBreakdown, RateReport)> {
        meta_loss_with_rates(&self.channels(&v.positions)?, v, self.cfg, &self.weights)
    }

    /// Meta-loss gradient. Channels are rebuilt on the tape only when
    /// positions are among the requested blocks.
    pub fn grad(&self, v: &DecisionVariables, blocks: &[Block]) -> Result<(f64, GradientVector)> {
        if blocks.contains(&Block::Position) && v.mobility.any() {
            let (cfg, inst, w) = (self.cfg, self.instance, self.weights);
            autodiff::grad(v, blocks, |x| {
                let ch = Channels::assemble(inst, &x.positions, cfg.wavelength)?;
                Ok(meta_loss(&ch, x, cfg, &w)?.total)
            })
        } else {
            let ch = self.channels(&v.positions)?;
            self.grad_at(v, blocks, &ch)
        }
    }

    /// Gradient with channels held fixed; `ch` must match `v.positions`.
    pub fn grad_at(&self, v: &DecisionVariables, blocks: &[Block], ch: &Channels) -> Result<(f64, GradientVector)> {
        let (cfg, w) = (self.cfg, self.weights);
        autodiff::grad(v, blocks, |x| {
            let c = ch.lift();
            Ok(meta_loss(&c, x, cfg, &w)?.total)
        })
    }

    /// Unit-norm combiners (rates are invariant to their scale), movable BS
    /// arrays pushed back to the minimum spacing, and common shares projected
    /// onto `{c >= 0, Σ c <= R_c}`.
    pub fn repair(&self, v: &DecisionVariables) -> Result<DecisionVariables> {
        let mut out = v.clone();
        normalize_combiners(&mut out.combiners);
        if out.mobility.bs {
            let (ds, a) = (self.cfg.min_spacing, self.cfg.region_half);
            repair_spacing(&mut out.positions.bs_tx, ds, a);
            repair_spacing(&mut out.positions.bs_rx, ds, a);
        }
        if !out.common_split.is_empty() {
            let (_, rates) = self.loss_with_rates(&out)?;
            out.common_split = project_common_split(&out.common_split, rates.common_floor);
        }
        Ok(out)
    }
}
