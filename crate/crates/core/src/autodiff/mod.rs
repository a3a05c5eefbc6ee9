//! Reverse-mode differentiation of scalar losses over [`DecisionVariables`].

pub mod tape;

pub use tape::{Op, Tape, Var};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::variables::{Block, DecisionVariables};

/// Gradient per block, in [`DecisionVariables::flatten`] layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientVector {
    blocks: [Option<Vec<f64>>; 5],
}

fn slot(b: Block) -> usize {
    Block::ALL.iter().position(|&x| x == b).expect("every block is listed")
}

impl GradientVector {
    pub fn get(&self, b: Block) -> Option<&[f64]> {
        self.blocks[slot(b)].as_deref()
    }

    pub fn take(&mut self, b: Block) -> Option<Vec<f64>> {
        self.blocks[slot(b)].take()
    }

    pub fn insert(&mut self, b: Block, g: Vec<f64>) {
        self.blocks[slot(b)] = Some(g);
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Value and gradient of `f` at `at` with respect to `blocks`. Coordinates of
/// other blocks enter as constants.
pub fn grad<F>(at: &DecisionVariables, blocks: &[Block], f: F) -> Result<(f64, GradientVector)>
where
    F: for<'t> Fn(&DecisionVariables<Var<'t>>) -> Result<Var<'t>>,
{
    let tape = Tape::with_capacity(1 << 14);
    let mut leaves: [Vec<usize>; 5] = Default::default();
    let lifted = at.lift(|b, v| {
        if blocks.contains(&b) {
            let x = tape.leaf(v);
            leaves[slot(b)].push(x.index().expect("leaf is on the tape"));
            x
        } else {
            Var::constant(v)
        }
    });
    let out = f(&lifted)?;
    tape.check_finite(out)?;
    let adj = tape.adjoints(out);
    let mut g = GradientVector::default();
    for &b in blocks {
        g.insert(b, leaves[slot(b)].iter().map(|&i| adj[i]).collect());
    }
    Ok((out.value(), g))
}

/// Central differences with a step relative to each coordinate,
/// `h * max(|x|, 1e-3)`.
pub fn finite_diff_grad<F>(at: &DecisionVariables, block: Block, h: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&DecisionVariables) -> Result<f64>,
{
    let base = at.flatten(block);
    let mut probe = at.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let step = h * base[i].abs().max(1e-3);
        let mut x = base.clone();
        x[i] = base[i] + step;
        probe.set_block(block, &x)?;
        let up = f(&probe)?;
        x[i] = base[i] - step;
        probe.set_block(block, &x)?;
        let down = f(&probe)?;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}
