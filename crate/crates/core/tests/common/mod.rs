//! Independent reference implementations used as test oracles. Everything
//! here is written directly from the system model with `num_complex`, sharing
//! no arithmetic with the crate.

#![allow(dead_code)]

use std::f64::consts::PI;

use marsma::channel::{Channels, Instance, PathSet, Position2D};
use marsma::{Cx, DecisionVariables, Mobility, SystemConfig};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(x: Cx) -> C {
    C::new(x.re, x.im)
}

/// `[e^{j 2π ρ_l / λ}]_l` with `ρ = x cosθ sinφ + y sinθ`.
pub fn frv(p: Position2D, theta: &[f64], phi: &[f64], lambda: f64) -> Vec<C> {
    theta
        .iter()
        .zip(phi)
        .map(|(t, f)| {
            let rho = p.x * t.cos() * f.sin() + p.y * t.sin();
            C::from_polar(1.0, 2.0 * PI * rho / lambda)
        })
        .collect()
}

/// `f^H Σ g` with a dense loop over the PRM.
#[allow(clippy::needless_range_loop)]
pub fn link(f: &[C], paths: &PathSet, g: &[C]) -> C {
    let mut acc = C::new(0.0, 0.0);
    for i in 0..paths.prm().rows() {
        for j in 0..paths.prm().cols() {
            acc += f[i].conj() * c(paths.prm().get(i, j)) * g[j];
        }
    }
    acc
}

pub fn rx_frv(p: Position2D, paths: &PathSet, lambda: f64) -> Vec<C> {
    frv(p, paths.rx().theta(), paths.rx().phi(), lambda)
}

pub fn tx_frv(p: Position2D, paths: &PathSet, lambda: f64) -> Vec<C> {
    frv(p, paths.tx().theta(), paths.tx().phi(), lambda)
}

pub struct OracleChannels {
    pub dl: Vec<Vec<C>>,
    pub ul: Vec<Vec<C>>,
    /// `[n][r]`: transmit antenna n to receive antenna r.
    pub si: Vec<Vec<C>>,
    pub xlink: Vec<Vec<C>>,
}

pub fn oracle_channels(inst: &Instance, v: &DecisionVariables, lambda: f64) -> OracleChannels {
    let p = &v.positions;
    let dl = (0..p.dl.len())
        .map(|d| {
            let paths = &inst.dl_paths[d];
            p.bs_tx.iter().map(|&t| link(&rx_frv(p.dl[d], paths, lambda), paths, &tx_frv(t, paths, lambda))).collect()
        })
        .collect();
    let ul = (0..p.ul.len())
        .map(|u| {
            let paths = &inst.ul_paths[u];
            p.bs_rx.iter().map(|&r| link(&rx_frv(r, paths, lambda), paths, &tx_frv(p.ul[u], paths, lambda))).collect()
        })
        .collect();
    let si = p
        .bs_tx
        .iter()
        .map(|&t| {
            p.bs_rx
                .iter()
                .map(|&r| link(&rx_frv(r, &inst.si_paths, lambda), &inst.si_paths, &tx_frv(t, &inst.si_paths, lambda)))
                .collect()
        })
        .collect();
    let xlink = (0..p.ul.len())
        .map(|u| {
            (0..p.dl.len())
                .map(|d| {
                    let paths = &inst.xlink_paths[u][d];
                    link(&rx_frv(p.dl[d], paths, lambda), paths, &tx_frv(p.ul[u], paths, lambda))
                })
                .collect()
        })
        .collect();
    OracleChannels { dl, ul, si, xlink }
}

pub fn to_oracle(ch: &Channels) -> OracleChannels {
    let m = |v: &Vec<Vec<Cx>>| v.iter().map(|r| r.iter().map(|&x| c(x)).collect()).collect();
    OracleChannels { dl: m(&ch.dl), ul: m(&ch.ul), si: m(&ch.si), xlink: m(&ch.xlink) }
}

fn herm(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cv(v: &[Cx]) -> Vec<C> {
    v.iter().map(|&x| c(x)).collect()
}

/// Owner of uplink stream `s`: streams `2u, 2u+1` belong to user `u < U-1`,
/// the last stream to user `U-1`.
pub fn owner(s: usize, n_ul: usize) -> usize {
    if s == 2 * (n_ul - 1) {
        n_ul - 1
    } else {
        s / 2
    }
}

pub struct OracleRates {
    pub common: Vec<f64>,
    pub private: Vec<f64>,
    pub ul_stream: Vec<f64>,
    pub sum_rate: f64,
}

/// Flat-formula evaluation of every rate. `ranks[s]` is the decode rank of
/// stream `s`; a stream is interfered by streams decoded after it.
pub fn oracle_rates(ch: &OracleChannels, v: &DecisionVariables, cfg: &SystemConfig, ranks: &[usize]) -> OracleRates {
    let n_ul = cfg.n_ul;
    let wc = cv(&v.w_common);
    let wp: Vec<Vec<C>> = v.w_private.iter().map(|w| cv(w)).collect();
    let leak =
        |d: usize| -> f64 { (0..v.powers.len()).map(|s| v.powers[s] * ch.xlink[owner(s, n_ul)][d].norm_sqr()).sum() };
    let mut common = Vec::new();
    let mut private = Vec::new();
    for d in 0..cfg.n_dl {
        let h = &ch.dl[d];
        let all_p: f64 = wp.iter().map(|w| herm(h, w).norm_sqr()).sum();
        let own = herm(h, &wp[d]).norm_sqr();
        common.push((1.0 + herm(h, &wc).norm_sqr() / (all_p + leak(d) + cfg.noise_dl)).log2());
        private.push((1.0 + own / (all_p - own + leak(d) + cfg.noise_dl)).log2());
    }
    // x = W_c + Σ W_p; leakage at receive antenna r is Σ_n conj(H_SI[n][r]) x_n
    let x: Vec<C> = (0..cfg.n_t).map(|n| wc[n] + wp.iter().map(|w| w[n]).sum::<C>()).collect();
    let si: Vec<C> = (0..cfg.n_r).map(|r| (0..cfg.n_t).map(|n| ch.si[n][r].conj() * x[n]).sum()).collect();
    let mut ul_stream = Vec::new();
    for s in 0..v.powers.len() {
        let z = cv(&v.combiners[s]);
        let g = |k: usize| herm(&z, &ch.ul[owner(k, n_ul)]).norm_sqr();
        let mut den = herm(&z, &si).norm_sqr() + cfg.noise_ul * z.iter().map(|q| q.norm_sqr()).sum::<f64>();
        for k in 0..v.powers.len() {
            let interferes = if cfg.literal_interference { k != s } else { ranks[k] > ranks[s] };
            if interferes {
                den += v.powers[k] * g(k);
            }
        }
        ul_stream.push((1.0 + v.powers[s] * g(s) / den).log2());
    }
    let dl: f64 = v.common_split.iter().sum::<f64>() + private.iter().sum::<f64>();
    let sum_rate = dl + ul_stream.iter().sum::<f64>();
    OracleRates { common, private, ul_stream, sum_rate }
}

pub fn small_config() -> SystemConfig {
    SystemConfig { n_t: 2, n_r: 2, n_dl: 2, n_ul: 2, n_paths: 2, ..SystemConfig::default() }
}

fn cn(rng: &mut ChaCha8Rng, scale: f64) -> Cx {
    Cx::new(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale)
}

/// Random point with every block populated; movable antennas scattered in
/// the region with at least `min_spacing` between BS antennas.
pub fn random_point(cfg: &SystemConfig, mobility: Mobility, rng: &mut ChaCha8Rng) -> DecisionVariables {
    let mut v = DecisionVariables::zeros(cfg, mobility);
    let w_scale = (cfg.p_bs / (cfg.n_t * (cfg.n_dl + 1)) as f64).sqrt();
    v.w_common.iter_mut().for_each(|x| *x = cn(rng, w_scale));
    v.w_private.iter_mut().flatten().for_each(|x| *x = cn(rng, w_scale));
    v.combiners.iter_mut().flatten().for_each(|x| *x = cn(rng, 1.0));
    v.powers.iter_mut().for_each(|p| *p = rng.random_range(0.01..1.0) * cfg.p_ue_max / 2.0);
    v.common_split.iter_mut().for_each(|c| *c = rng.random_range(0.0..0.5));
    let a = cfg.region_half * 0.9;
    let place = |n: usize, spaced: bool, rng: &mut ChaCha8Rng| -> Vec<Position2D> {
        let mut out: Vec<Position2D> = Vec::new();
        while out.len() < n {
            let p = Position2D::new(rng.random_range(-a..a), rng.random_range(-a..a));
            if !spaced || out.iter().all(|q| q.distance(p) > cfg.min_spacing * 1.1) {
                out.push(p);
            }
        }
        out
    };
    if mobility.bs {
        v.positions.bs_tx = place(cfg.n_t, true, rng);
        v.positions.bs_rx = place(cfg.n_r, true, rng);
    }
    if mobility.ue {
        v.positions.ul = place(cfg.n_ul, false, rng);
        v.positions.dl = place(cfg.n_dl, false, rng);
    }
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest relative deviation, with magnitudes floored at `floor`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(floor)).fold(0.0, f64::max)
}
