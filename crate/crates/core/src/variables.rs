//! Optimization state and its flat real-vector views.

use serde::{Deserialize, Serialize};

use crate::channel::Position2D;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scalar::{Cx, Scalar};

/// Movable antenna groups. Fixed groups never change during optimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mobility {
    pub bs: bool,
    pub ue: bool,
}

impl Mobility {
    pub const FIXED: Mobility = Mobility { bs: false, ue: false };

    pub fn any(self) -> bool {
        self.bs || self.ue
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positions<S = f64> {
    pub bs_tx: Vec<Position2D<S>>,
    pub bs_rx: Vec<Position2D<S>>,
    pub ul: Vec<Position2D<S>>,
    pub dl: Vec<Position2D<S>>,
}

impl Positions<f64> {
    /// Uniform linear arrays at `spacing` along x, centred on the origin, for
    /// the BS; UE antennas at their region centre.
    pub fn reference_layout(cfg: &SystemConfig) -> Self {
        let ula = |n: usize| -> Vec<Position2D> {
            let mid = (n as f64 - 1.0) / 2.0;
            (0..n).map(|i| Position2D::new((i as f64 - mid) * cfg.min_spacing, 0.0)).collect()
        };
        Self {
            bs_tx: ula(cfg.n_t),
            bs_rx: ula(cfg.n_r),
            ul: vec![Position2D::new(0.0, 0.0); cfg.n_ul],
            dl: vec![Position2D::new(0.0, 0.0); cfg.n_dl],
        }
    }

    pub fn lift<S: Scalar>(&self) -> Positions<S> {
        let l = |v: &Vec<Position2D>| v.iter().map(|p| Position2D::new(S::constant(p.x), S::constant(p.y))).collect();
        Positions { bs_tx: l(&self.bs_tx), bs_rx: l(&self.bs_rx), ul: l(&self.ul), dl: l(&self.dl) }
    }

    pub fn all(&self) -> impl Iterator<Item = &Position2D> {
        self.bs_tx.iter().chain(&self.bs_rx).chain(&self.ul).chain(&self.dl)
    }
}

/// Variable blocks, in the order the meta-learner visits them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    /// Uplink stream powers `P`.
    Power,
    /// Transmit beamformers `W = [W_c, W_p,1 .. W_p,D]`.
    Beamformer,
    /// Receive combiners `Z`, one per uplink stream.
    Combiner,
    /// Common-rate shares `c`.
    CommonSplit,
    /// Coordinates of the movable antennas.
    Position,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::Power, Block::Beamformer, Block::Combiner, Block::CommonSplit, Block::Position];

    pub fn name(self) -> &'static str {
        match self {
            Block::Power => "P",
            Block::Beamformer => "W",
            Block::Combiner => "Z",
            Block::CommonSplit => "c",
            Block::Position => "u",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVariables<S = f64> {
    /// Per uplink stream, see [`crate::config::stream_kind`].
    pub powers: Vec<S>,
    pub w_common: Vec<Cx<S>>,
    pub w_private: Vec<Vec<Cx<S>>>,
    pub combiners: Vec<Vec<Cx<S>>>,
    pub common_split: Vec<S>,
    pub positions: Positions<S>,
    pub mobility: Mobility,
}

impl DecisionVariables<f64> {
    /// All-zero signal variables on the reference antenna layout.
    pub fn zeros(cfg: &SystemConfig, mobility: Mobility) -> Self {
        let s = cfg.n_streams();
        Self {
            powers: vec![0.0; s],
            w_common: vec![Cx::zero(); cfg.n_t],
            w_private: vec![vec![Cx::zero(); cfg.n_t]; cfg.n_dl],
            combiners: vec![vec![Cx::zero(); cfg.n_r]; s],
            common_split: vec![0.0; cfg.n_dl],
            positions: Positions::reference_layout(cfg),
            mobility,
        }
    }

    pub fn block_len(&self, b: Block) -> usize {
        match b {
            Block::Power => self.powers.len(),
            Block::Beamformer => 2 * (self.w_common.len() + self.w_private.iter().map(Vec::len).sum::<usize>()),
            Block::Combiner => 2 * self.combiners.iter().map(Vec::len).sum::<usize>(),
            Block::CommonSplit => self.common_split.len(),
            Block::Position => 2 * self.movable_count(),
        }
    }

    /// Number of antennas whose position is a decision variable.
    pub fn movable_count(&self) -> usize {
        let p = &self.positions;
        let mut n = 0;
        if self.mobility.bs {
            n += p.bs_tx.len() + p.bs_rx.len();
        }
        if self.mobility.ue {
            n += p.ul.len() + p.dl.len();
        }
        n
    }

    /// Flat real view of a block. Complex entries are interleaved `re, im`;
    /// positions are interleaved `x, y` over movable groups in the order
    /// BS transmit, BS receive, UL UEs, DL UEs.
    pub fn flatten(&self, b: Block) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.block_len(b));
        let cx = |out: &mut Vec<f64>, v: &[Cx]| v.iter().for_each(|c| out.extend([c.re, c.im]));
        match b {
            Block::Power => out.extend(&self.powers),
            Block::Beamformer => {
                cx(&mut out, &self.w_common);
                self.w_private.iter().for_each(|w| cx(&mut out, w));
            }
            Block::Combiner => self.combiners.iter().for_each(|z| cx(&mut out, z)),
            Block::CommonSplit => out.extend(&self.common_split),
            Block::Position => {
                for group in self.movable_groups() {
                    group.iter().for_each(|p| out.extend([p.x, p.y]));
                }
            }
        }
        out
    }

    fn movable_groups(&self) -> Vec<&Vec<Position2D>> {
        let p = &self.positions;
        let mut g = Vec::new();
        if self.mobility.bs {
            g.push(&p.bs_tx);
            g.push(&p.bs_rx);
        }
        if self.mobility.ue {
            g.push(&p.ul);
            g.push(&p.dl);
        }
        g
    }

    pub fn set_block(&mut self, b: Block, flat: &[f64]) -> Result<()> {
        let n = self.block_len(b);
        if flat.len() != n {
            return Err(Error::Dimension(format!("block {} expects {n} values, got {}", b.name(), flat.len())));
        }
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("length checked");
        let set_cx = |v: &mut [Cx], next: &mut dyn FnMut() -> f64| {
            for c in v {
                c.re = next();
                c.im = next();
            }
        };
        match b {
            Block::Power => self.powers.iter_mut().for_each(|p| *p = next()),
            Block::Beamformer => {
                set_cx(&mut self.w_common, &mut next);
                for w in &mut self.w_private {
                    set_cx(w, &mut next);
                }
            }
            Block::Combiner => {
                for z in &mut self.combiners {
                    set_cx(z, &mut next);
                }
            }
            Block::CommonSplit => self.common_split.iter_mut().for_each(|c| *c = next()),
            Block::Position => {
                let m = self.mobility;
                let p = &mut self.positions;
                let mut groups: Vec<&mut Vec<Position2D>> = Vec::new();
                if m.bs {
                    groups.push(&mut p.bs_tx);
                    groups.push(&mut p.bs_rx);
                }
                if m.ue {
                    groups.push(&mut p.ul);
                    groups.push(&mut p.dl);
                }
                for g in groups {
                    for q in g.iter_mut() {
                        q.x = next();
                        q.y = next();
                    }
                }
            }
        }
        Ok(())
    }

    /// Stacked beamformers `[W_c, W_p,1, ..]`.
    pub fn beamformers(&self) -> Vec<Cx> {
        let mut v = self.w_common.clone();
        self.w_private.iter().for_each(|w| v.extend_from_slice(w));
        v
    }

    pub fn set_beamformers(&mut self, stacked: &[Cx]) {
        let n_t = self.w_common.len();
        self.w_common.copy_from_slice(&stacked[..n_t]);
        for (d, w) in self.w_private.iter_mut().enumerate() {
            w.copy_from_slice(&stacked[n_t * (d + 1)..n_t * (d + 2)]);
        }
    }

    /// Re-express every variable in another scalar type. `leaf` is called once
    /// per flat coordinate, in [`Block::ALL`] order and [`flatten`](Self::flatten)
    /// order within a block; fixed positions become constants.
    pub fn lift<S: Scalar>(&self, mut leaf: impl FnMut(Block, f64) -> S) -> DecisionVariables<S> {
        let cx = |b: Block, v: &[Cx], leaf: &mut dyn FnMut(Block, f64) -> S| -> Vec<Cx<S>> {
            v.iter()
                .map(|c| {
                    let re = leaf(b, c.re);
                    let im = leaf(b, c.im);
                    Cx::new(re, im)
                })
                .collect()
        };
        let powers = self.powers.iter().map(|&p| leaf(Block::Power, p)).collect();
        let w_common = cx(Block::Beamformer, &self.w_common, &mut leaf);
        let w_private = self.w_private.iter().map(|w| cx(Block::Beamformer, w, &mut leaf)).collect();
        let combiners = self.combiners.iter().map(|z| cx(Block::Combiner, z, &mut leaf)).collect();
        let common_split = self.common_split.iter().map(|&c| leaf(Block::CommonSplit, c)).collect();
        let mut group = |movable: bool, v: &[Position2D]| -> Vec<Position2D<S>> {
            v.iter()
                .map(|p| {
                    if movable {
                        let x = leaf(Block::Position, p.x);
                        let y = leaf(Block::Position, p.y);
                        Position2D::new(x, y)
                    } else {
                        Position2D::new(S::constant(p.x), S::constant(p.y))
                    }
                })
                .collect()
        };
        let m = self.mobility;
        let positions = Positions {
            bs_tx: group(m.bs, &self.positions.bs_tx),
            bs_rx: group(m.bs, &self.positions.bs_rx),
            ul: group(m.ue, &self.positions.ul),
            dl: group(m.ue, &self.positions.dl),
        };
        DecisionVariables { powers, w_common, w_private, combiners, common_split, positions, mobility: m }
    }

    pub fn is_finite(&self) -> bool {
        Block::ALL.iter().all(|&b| self.flatten(b).iter().all(|v| v.is_finite()))
    }

    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<()> {
        let s = cfg.n_streams();
        let ok = self.powers.len() == s
            && self.w_common.len() == cfg.n_t
            && self.w_private.len() == cfg.n_dl
            && self.w_private.iter().all(|w| w.len() == cfg.n_t)
            && self.combiners.len() == s
            && self.combiners.iter().all(|z| z.len() == cfg.n_r)
            && self.common_split.len() == cfg.n_dl
            && self.positions.bs_tx.len() == cfg.n_t
            && self.positions.bs_rx.len() == cfg.n_r
            && self.positions.ul.len() == cfg.n_ul
            && self.positions.dl.len() == cfg.n_dl;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("decision variables do not match the system configuration".into()))
        }
    }
}
