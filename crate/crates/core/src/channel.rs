//! Field-response channel model.
//!
//! Every link is described by per-path angles on the transmit and receive side
//! and a path-response matrix (PRM) coupling transmit paths to receive paths.
//! Moving an antenna only rotates the phase of each path, so a channel is a
//! bilinear form `f(r)^H Σ g(t)` between two field-response vectors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scalar::{Cx, Scalar};
use crate::variables::Positions;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position2D<S = f64> {
    pub x: S,
    pub y: S,
}

impl<S> Position2D<S> {
    pub const fn new(x: S, y: S) -> Self {
        Self { x, y }
    }
}

impl Position2D<f64> {
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Elevation/azimuth angles of the paths seen from one side of a link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAngles {
    theta: Vec<f64>,
    phi: Vec<f64>,
}

impl PathAngles {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::Dimension(format!("{} elevations vs {} azimuths", theta.len(), phi.len())));
        }
        if theta.is_empty() {
            return Err(Error::Dimension("a link needs at least one path".into()));
        }
        Ok(Self { theta, phi })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

/// Path-response matrix, `rows` receive paths by `cols` transmit paths, row major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prm {
    rows: usize,
    cols: usize,
    entries: Vec<Cx>,
}

impl Prm {
    pub fn full(rows: usize, cols: usize, entries: Vec<Cx>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "PRM {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn diagonal(diag: &[Cx]) -> Self {
        let n = diag.len();
        let mut entries = vec![Cx::zero(); n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        Self { rows: n, cols: n, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Cx {
        self.entries[i * self.cols + j]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|c| c.scale_f(k)).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    tx: PathAngles,
    rx: PathAngles,
    prm: Prm,
}

impl PathSet {
    pub fn new(tx: PathAngles, rx: PathAngles, prm: Prm) -> Result<Self> {
        if prm.rows != rx.len() || prm.cols != tx.len() {
            return Err(Error::Dimension(format!(
                "PRM is {}x{} but the link has {} receive and {} transmit paths",
                prm.rows,
                prm.cols,
                rx.len(),
                tx.len()
            )));
        }
        Ok(Self { tx, rx, prm })
    }

    pub fn tx(&self) -> &PathAngles {
        &self.tx
    }

    pub fn rx(&self) -> &PathAngles {
        &self.rx
    }

    pub fn prm(&self) -> &Prm {
        &self.prm
    }

    pub fn with_prm(&self, prm: Prm) -> Result<Self> {
        PathSet::new(self.tx.clone(), self.rx.clone(), prm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub g0: f64,
    pub alpha: f64,
    pub distance: f64,
    pub variance_per_path: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgets {
    pub dl: Vec<LinkBudget>,
    pub ul: Vec<LinkBudget>,
    /// Indexed `[u][d]`.
    pub xlink: Vec<Vec<LinkBudget>>,
    pub si_variance_per_path: f64,
}

/// One random channel realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub dl_paths: Vec<PathSet>,
    pub ul_paths: Vec<PathSet>,
    pub si_paths: PathSet,
    /// Indexed `[u][d]`: UL UE `u` to DL UE `d`.
    pub xlink_paths: Vec<Vec<PathSet>>,
    pub budgets: LinkBudgets,
    pub dl_placements: Vec<Position2D>,
    pub ul_placements: Vec<Position2D>,
}

impl Instance {
    /// Same realization with the self-interference PRM rescaled to total power
    /// `si_power` (the normalised path gains are reused).
    pub fn with_si_power(&self, n_paths: usize, si_power: f64) -> Result<Self> {
        let old = self.budgets.si_variance_per_path;
        let new = si_power / n_paths as f64;
        if old <= 0.0 {
            return Err(Error::Config("cannot rescale a zero-power SI channel".into()));
        }
        let mut out = self.clone();
        out.si_paths = self.si_paths.with_prm(self.si_paths.prm.scaled((new / old).sqrt()))?;
        out.budgets.si_variance_per_path = new;
        Ok(out)
    }
}

/// Path-length difference of a position relative to the region reference
/// point along the direction `(theta, phi)`.
pub fn phase_offset<S: Scalar>(p: Position2D<S>, theta: f64, phi: f64) -> S {
    p.x * (theta.cos() * phi.sin()) + p.y * theta.sin()
}

/// Unit-modulus per-path phase factors `exp(j 2π ρ_i / λ)`.
pub fn field_response_vector<S: Scalar>(p: Position2D<S>, angles: &PathAngles, wavelength: f64) -> Vec<Cx<S>> {
    let k = 2.0 * PI / wavelength;
    angles.theta.iter().zip(&angles.phi).map(|(&th, &ph)| Cx::cis(phase_offset(p, th, ph) * k)).collect()
}

/// `f^H Σ g`, skipping structurally zero PRM entries.
fn bilinear<S: Scalar>(f: &[Cx<S>], prm: &Prm, g: &[Cx<S>]) -> Cx<S> {
    let mut acc = Cx::zero();
    for (i, fi) in f.iter().enumerate() {
        let mut row = Cx::zero();
        let mut any = false;
        for (j, gj) in g.iter().enumerate() {
            let s = prm.get(i, j);
            if s.re != 0.0 || s.im != 0.0 {
                row += gj.mul_c(s);
                any = true;
            }
        }
        if any {
            acc += fi.conj_mul(row);
        }
    }
    acc
}

/// BS to DL UE channel, one entry per BS transmit antenna.
pub fn assemble_dl_channel<S: Scalar>(
    t_bs: &[Position2D<S>],
    r_dl: Position2D<S>,
    paths: &PathSet,
    wavelength: f64,
) -> Vec<Cx<S>> {
    let f = field_response_vector(r_dl, &paths.rx, wavelength);
    t_bs.iter().map(|&t| bilinear(&f, &paths.prm, &field_response_vector(t, &paths.tx, wavelength))).collect()
}

/// UL UE to BS channel, one entry per BS receive antenna.
pub fn assemble_ul_channel<S: Scalar>(
    t_ul: Position2D<S>,
    r_bs: &[Position2D<S>],
    paths: &PathSet,
    wavelength: f64,
) -> Vec<Cx<S>> {
    let g = field_response_vector(t_ul, &paths.tx, wavelength);
    r_bs.iter().map(|&r| bilinear(&field_response_vector(r, &paths.rx, wavelength), &paths.prm, &g)).collect()
}

/// Self-interference channel `H_SI`, `[n_t][n_r]`; `H_SI^H x` is the leakage
/// seen by the receive array for transmit vector `x`.
pub fn assemble_si_channel<S: Scalar>(
    t_bs: &[Position2D<S>],
    r_bs: &[Position2D<S>],
    paths: &PathSet,
    wavelength: f64,
) -> Vec<Vec<Cx<S>>> {
    let fs: Vec<Vec<Cx<S>>> = r_bs.iter().map(|&r| field_response_vector(r, &paths.rx, wavelength)).collect();
    t_bs.iter()
        .map(|&t| {
            let g = field_response_vector(t, &paths.tx, wavelength);
            fs.iter().map(|f| bilinear(f, &paths.prm, &g)).collect()
        })
        .collect()
}

/// UL UE to DL UE interference coefficient.
pub fn assemble_xlink_channel<S: Scalar>(
    t_ul: Position2D<S>,
    r_dl: Position2D<S>,
    paths: &PathSet,
    wavelength: f64,
) -> Cx<S> {
    bilinear(
        &field_response_vector(r_dl, &paths.rx, wavelength),
        &paths.prm,
        &field_response_vector(t_ul, &paths.tx, wavelength),
    )
}

/// All channels of an instance at one antenna configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Channels<S = f64> {
    /// `[d][n_t]`
    pub dl: Vec<Vec<Cx<S>>>,
    /// `[u][n_r]`
    pub ul: Vec<Vec<Cx<S>>>,
    /// `[n_t][n_r]`
    pub si: Vec<Vec<Cx<S>>>,
    /// `[u][d]`
    pub xlink: Vec<Vec<Cx<S>>>,
}

impl<S: Scalar> Channels<S> {
    pub fn assemble(instance: &Instance, pos: &Positions<S>, wavelength: f64) -> Result<Self> {
        if instance.dl_paths.len() != pos.dl.len() || instance.ul_paths.len() != pos.ul.len() {
            return Err(Error::Dimension("instance and antenna layout disagree on user counts".into()));
        }
        let dl = instance
            .dl_paths
            .iter()
            .zip(&pos.dl)
            .map(|(p, &r)| assemble_dl_channel(&pos.bs_tx, r, p, wavelength))
            .collect();
        let ul = instance
            .ul_paths
            .iter()
            .zip(&pos.ul)
            .map(|(p, &t)| assemble_ul_channel(t, &pos.bs_rx, p, wavelength))
            .collect();
        let si = assemble_si_channel(&pos.bs_tx, &pos.bs_rx, &instance.si_paths, wavelength);
        let xlink = instance
            .xlink_paths
            .iter()
            .zip(&pos.ul)
            .map(|(row, &t)| {
                row.iter().zip(&pos.dl).map(|(p, &r)| assemble_xlink_channel(t, r, p, wavelength)).collect()
            })
            .collect();
        Ok(Self { dl, ul, si, xlink })
    }
}

impl Channels<f64> {
    pub fn lift<S: Scalar>(&self) -> Channels<S> {
        let m = |v: &Vec<Vec<Cx>>| v.iter().map(|r| r.iter().map(|&c| Cx::constant(c)).collect()).collect();
        Channels { dl: m(&self.dl), ul: m(&self.ul), si: m(&self.si), xlink: m(&self.xlink) }
    }
}

fn uniform_angles(rng: &mut ChaCha8Rng, n: usize) -> PathAngles {
    let theta = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let phi = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    PathAngles { theta, phi }
}

/// Circularly symmetric complex Gaussian with the given total variance.
pub fn cscg(rng: &mut impl Rng, variance: f64) -> Cx {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cx::new(re * s, im * s)
}

fn sample_link(rng: &mut ChaCha8Rng, n: usize, variance: f64) -> PathSet {
    let tx = uniform_angles(rng, n);
    let rx = uniform_angles(rng, n);
    let diag: Vec<Cx> = (0..n).map(|_| cscg(rng, variance)).collect();
    PathSet { tx, rx, prm: Prm::diagonal(&diag) }
}

/// Path loss is only defined beyond the 1 m reference distance.
const MIN_DISTANCE: f64 = 1.0;

/// Draws one channel realization: UE placements uniform in the cell, all
/// angles i.i.d. uniform on `[0, 2π)`, diagonal PRMs with per-path variance
/// `g0 d^-α / L` (or `SI / L`). Pure function of `(config, seed)`.
pub fn sample_instance(cfg: &SystemConfig, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = cfg.cell_size / 2.0;
    let place = |rng: &mut ChaCha8Rng| Position2D::new(rng.random_range(-half..half), rng.random_range(-half..half));
    let dl_placements: Vec<Position2D> = (0..cfg.n_dl).map(|_| place(&mut rng)).collect();
    let ul_placements: Vec<Position2D> = (0..cfg.n_ul).map(|_| place(&mut rng)).collect();
    let l = cfg.n_paths;
    let budget = |g0: f64, alpha: f64, d: f64| {
        let distance = d.max(MIN_DISTANCE);
        LinkBudget { g0, alpha, distance, variance_per_path: g0 * distance.powf(-alpha) / l as f64 }
    };

    let dl_budgets: Vec<LinkBudget> = dl_placements.iter().map(|p| budget(cfg.g0, cfg.alpha, p.norm())).collect();
    let ul_budgets: Vec<LinkBudget> = ul_placements.iter().map(|p| budget(cfg.g0, cfg.alpha, p.norm())).collect();
    let xlink_budgets: Vec<Vec<LinkBudget>> = ul_placements
        .iter()
        .map(|u| dl_placements.iter().map(|d| budget(cfg.g0_xlink, cfg.alpha_xlink, u.distance(*d))).collect())
        .collect();
    let si_var = cfg.si_power / l as f64;

    let dl_paths = dl_budgets.iter().map(|b| sample_link(&mut rng, l, b.variance_per_path)).collect();
    let ul_paths = ul_budgets.iter().map(|b| sample_link(&mut rng, l, b.variance_per_path)).collect();
    let si_paths = sample_link(&mut rng, l, si_var);
    let xlink_paths = xlink_budgets
        .iter()
        .map(|row| row.iter().map(|b| sample_link(&mut rng, l, b.variance_per_path)).collect())
        .collect();

    Instance {
        dl_paths,
        ul_paths,
        si_paths,
        xlink_paths,
        budgets: LinkBudgets { dl: dl_budgets, ul: ul_budgets, xlink: xlink_budgets, si_variance_per_path: si_var },
        dl_placements,
        ul_placements,
    }
}
