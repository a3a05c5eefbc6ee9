//! Achievable rates of the full-duplex RSMA system.
//!
//! Downlink users decode the common stream treating every private stream and
//! all uplink intra-cell interference as noise, remove it, then decode their
//! own private stream. The BS decodes uplink streams in decode-rank order; a
//! stream sees as interference only the streams not yet removed by SIC, plus
//! residual self-interference and combiner-shaped noise.

use serde::{Deserialize, Serialize};

use crate::channel::Channels;
use crate::config::{stream_owner, user_streams, SystemConfig};
use crate::error::{Error, Result};
use crate::scalar::{argmin, inner, norm_sqr, sum, Cx, Scalar};
use crate::variables::DecisionVariables;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport<S = f64> {
    pub common_per_dl: Vec<S>,
    pub common_floor: S,
    pub private: Vec<S>,
    pub dl_total: Vec<S>,
    pub ul_stream: Vec<S>,
    pub ul_user: Vec<S>,
    pub dl_sum: S,
    pub ul_sum: S,
    pub sum_rate: S,
}

impl<S: Scalar> RateReport<S> {
    pub fn values(&self) -> RateReport<f64> {
        let v = |x: &Vec<S>| x.iter().map(|s| s.value()).collect();
        RateReport {
            common_per_dl: v(&self.common_per_dl),
            common_floor: self.common_floor.value(),
            private: v(&self.private),
            dl_total: v(&self.dl_total),
            ul_stream: v(&self.ul_stream),
            ul_user: v(&self.ul_user),
            dl_sum: self.dl_sum.value(),
            ul_sum: self.ul_sum.value(),
            sum_rate: self.sum_rate.value(),
        }
    }
}

fn rate<S: Scalar>(signal: S, interference_plus_noise: S) -> S {
    (signal / interference_plus_noise + 1.0).log2()
}

/// Power of all uplink streams leaking into DL UE `d`.
fn ul_leakage_at_dl<S: Scalar>(d: usize, ch: &Channels<S>, vars: &DecisionVariables<S>, n_ul: usize) -> S {
    sum(vars.powers.iter().enumerate().map(|(s, &p)| p * ch.xlink[stream_owner(s, n_ul)][d].norm_sqr()))
}

/// Rate at which DL UE `d` decodes the common stream.
pub fn dl_common_rate<S: Scalar>(d: usize, ch: &Channels<S>, vars: &DecisionVariables<S>, cfg: &SystemConfig) -> S {
    let h = &ch.dl[d];
    let signal = inner(h, &vars.w_common).norm_sqr();
    let private = sum(vars.w_private.iter().map(|w| inner(h, w).norm_sqr()));
    rate(signal, private + ul_leakage_at_dl(d, ch, vars, cfg.n_ul) + cfg.noise_dl)
}

/// Rate at which DL UE `d` decodes its private stream after removing the common one.
pub fn dl_private_rate<S: Scalar>(d: usize, ch: &Channels<S>, vars: &DecisionVariables<S>, cfg: &SystemConfig) -> S {
    let h = &ch.dl[d];
    let mut signal = S::zero();
    let mut others = S::zero();
    for (k, w) in vars.w_private.iter().enumerate() {
        let g = inner(h, w).norm_sqr();
        if k == d {
            signal = g;
        } else {
            others = others + g;
        }
    }
    rate(signal, others + ul_leakage_at_dl(d, ch, vars, cfg.n_ul) + cfg.noise_dl)
}

/// Rate every DL UE can decode the common stream at: the minimum, first
/// index on ties. `None` without downlink users.
pub fn common_rate_floor<S: Scalar>(rates: &[S]) -> Option<S> {
    argmin(rates).map(|i| rates[i])
}

/// `H_SI^H (W_c + Σ_d W_p,d)`, the self-interference at the receive array.
pub fn si_leakage<S: Scalar>(ch: &Channels<S>, vars: &DecisionVariables<S>) -> Vec<Cx<S>> {
    let n_t = vars.w_common.len();
    let n_r = ch.si.first().map_or(0, Vec::len);
    let x: Vec<Cx<S>> = (0..n_t).map(|n| vars.w_private.iter().fold(vars.w_common[n], |acc, w| acc + w[n])).collect();
    (0..n_r).map(|r| (0..n_t).fold(Cx::zero(), |acc, n| acc + ch.si[n][r].conj_mul(x[n]))).collect()
}

/// Streams counted as interference when decoding stream `s`.
pub fn interference_set(s: usize, ranks: &[usize], literal: bool) -> impl Iterator<Item = usize> + '_ {
    (0..ranks.len()).filter(move |&k| k != s && (literal || ranks[k] > ranks[s]))
}

fn ul_stream_rate_with<S: Scalar>(
    s: usize,
    ranks: &[usize],
    ch: &Channels<S>,
    vars: &DecisionVariables<S>,
    cfg: &SystemConfig,
    si: &[Cx<S>],
) -> S {
    let z = &vars.combiners[s];
    let gain = |k: usize| inner(z, &ch.ul[stream_owner(k, cfg.n_ul)]).norm_sqr();
    let signal = vars.powers[s] * gain(s);
    let interference = sum(interference_set(s, ranks, cfg.literal_interference).map(|k| vars.powers[k] * gain(k)));
    let self_interference = inner(z, si).norm_sqr();
    rate(signal, interference + self_interference + norm_sqr(z) * cfg.noise_ul)
}

/// Rate of uplink stream `s` under the configured decoding order.
pub fn ul_stream_rate<S: Scalar>(
    s: usize,
    ch: &Channels<S>,
    vars: &DecisionVariables<S>,
    cfg: &SystemConfig,
) -> Result<S> {
    let ranks = cfg.decode_ranks()?;
    if s >= ranks.len() {
        return Err(Error::Dimension(format!("stream {s} out of range")));
    }
    Ok(ul_stream_rate_with(s, &ranks, ch, vars, cfg, &si_leakage(ch, vars)))
}

/// Total rate of UL UE `u`: the sum over its sub-messages.
pub fn ul_user_rate<S: Scalar>(u: usize, stream_rates: &[S], n_ul: usize) -> S {
    sum(user_streams(u, n_ul).into_iter().map(|s| stream_rates[s]))
}

/// Every rate of the system at one point.
pub fn evaluate_rates<S: Scalar>(
    ch: &Channels<S>,
    vars: &DecisionVariables<S>,
    cfg: &SystemConfig,
) -> Result<RateReport<S>> {
    let ranks = cfg.decode_ranks()?;
    let common_per_dl: Vec<S> = (0..cfg.n_dl).map(|d| dl_common_rate(d, ch, vars, cfg)).collect();
    let private: Vec<S> = (0..cfg.n_dl).map(|d| dl_private_rate(d, ch, vars, cfg)).collect();
    let common_floor = common_rate_floor(&common_per_dl).unwrap_or_else(S::zero);
    let dl_total: Vec<S> = vars.common_split.iter().zip(&private).map(|(&c, &p)| c + p).collect();
    let si = si_leakage(ch, vars);
    let ul_stream: Vec<S> = (0..cfg.n_streams()).map(|s| ul_stream_rate_with(s, &ranks, ch, vars, cfg, &si)).collect();
    let ul_user: Vec<S> = (0..cfg.n_ul).map(|u| ul_user_rate(u, &ul_stream, cfg.n_ul)).collect();
    let dl_sum = sum(dl_total.iter().copied());
    let ul_sum = sum(ul_user.iter().copied());
    Ok(RateReport {
        common_per_dl,
        common_floor,
        private,
        dl_total,
        ul_stream,
        ul_user,
        dl_sum,
        ul_sum,
        sum_rate: dl_sum + ul_sum,
    })
}

/// Total sum rate `Σ_d (c_d + R_p,d) + Σ_u R_u` with the full breakdown.
pub fn sum_rate_objective<S: Scalar>(
    ch: &Channels<S>,
    vars: &DecisionVariables<S>,
    cfg: &SystemConfig,
) -> Result<(S, RateReport<S>)> {
    let report = evaluate_rates(ch, vars, cfg)?;
    Ok((report.sum_rate, report))
}
