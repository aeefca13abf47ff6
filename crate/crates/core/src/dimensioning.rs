//! Choosing the signature weight `K` and frame length `L` for a target goodput.
//!
//! The chain runs target goodput -> target false-positive probability ->
//! (weight, length) fixed point -> predicted false-positive probability and
//! goodput. Powers with exponents up to the number of arrivals are evaluated
//! through `ln_1p`/`exp_m1`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::ormac::ChannelParams;

/// Fixed-point iterations before giving up.
pub const MAX_ITERATIONS: usize = 100;

/// `N (1 - G) / ((T - N) G)`: the false-positive probability at which the
/// expected goodput equals `target_goodput`.
pub fn target_false_positive(arrivals: f64, population: f64, target_goodput: f64) -> Result<f64> {
    if !(arrivals > 0.0 && arrivals < population) {
        return Err(Error::invalid(format!(
            "need 0 < N < T, got N={arrivals}, T={population}"
        )));
    }
    if !(target_goodput > 0.0 && target_goodput <= 1.0) {
        return Err(Error::invalid(format!(
            "target goodput must lie in (0, 1], got {target_goodput}"
        )));
    }
    Ok(arrivals * (1.0 - target_goodput) / ((population - arrivals) * target_goodput))
}

/// Probability that a given preamble of a given RAO is used by none of the
/// `arrivals` active signatures: `(1 - K/(L M))^N`.
pub fn idle_probability(weight: usize, raos: usize, preambles: usize, arrivals: f64) -> f64 {
    let cells = (raos * preambles) as f64;
    debug_assert!(weight as f64 <= cells);
    if arrivals == 0.0 {
        return 1.0;
    }
    (arrivals * (-(weight as f64) / cells).ln_1p()).exp()
}

/// Approximate probability that an inactive signature is decoded:
/// `[p_d + (p_f - p_d) p_idle]^K`.
pub fn false_positive_probability(
    weight: usize,
    raos: usize,
    preambles: usize,
    arrivals: f64,
    channel: &ChannelParams,
) -> f64 {
    if weight == 0 {
        return 1.0;
    }
    let idle = idle_probability(weight, raos, preambles, arrivals);
    let (pd, pf) = (channel.p_detect(), channel.p_false_alarm());
    let per_cell = pd + (pf - pd) * idle;
    (weight as f64 * per_cell.ln()).exp()
}

/// Real-valued weight minimising the false-positive probability for frame
/// length `raos`, capped at one preamble per RAO: `L min(1, (M/N) ln 2)`.
pub fn k_min(raos: usize, preambles: usize, arrivals: f64) -> f64 {
    raos as f64 * (preambles as f64 / arrivals * LN_2).min(1.0)
}

/// Real-valued frame length that meets `target` with weight `weight`:
/// `(K/M) [1 - ((target^(1/K) - p_d)/(p_f - p_d))^(1/N)]^-1`.
pub fn required_length(
    weight: usize,
    preambles: usize,
    arrivals: f64,
    target: f64,
    channel: &ChannelParams,
) -> Result<f64> {
    if weight == 0 {
        return Err(Error::invalid("weight must be positive"));
    }
    let (pd, pf) = (channel.p_detect(), channel.p_false_alarm());
    let root = if target > 0.0 {
        (target.ln() / weight as f64).exp()
    } else {
        0.0
    };
    if root <= pf {
        return Err(Error::Infeasible {
            weight,
            target,
            reason: "target^(1/K) does not exceed p_f",
        });
    }
    if root >= pd {
        return Err(Error::Infeasible {
            weight,
            target,
            reason: "target^(1/K) is not below p_d",
        });
    }
    let ratio = (root - pd) / (pf - pd);
    // 1 - ratio^(1/N), computed without cancellation
    let gap = -(ratio.ln() / arrivals).exp_m1();
    Ok(weight as f64 / preambles as f64 / gap)
}

/// `N / (N + p_fa (T - N))`.
pub fn analytic_goodput(arrivals: f64, population: f64, p_false_alarm: f64) -> f64 {
    let denom = arrivals + p_false_alarm * (population - arrivals);
    if denom == 0.0 {
        return 1.0;
    }
    arrivals / denom
}

/// Mean number of decoded inactive signatures, `p_fa (T - N)`.
pub fn expected_false_positives(arrivals: f64, population: f64, p_false_alarm: f64) -> f64 {
    p_false_alarm * (population - arrivals)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensioningInput {
    pub arrivals: f64,
    pub population: f64,
    pub preambles: usize,
    pub target_goodput: f64,
    pub channel: ChannelParams,
}

impl DimensioningInput {
    pub fn new(
        arrivals: f64,
        population: f64,
        preambles: usize,
        target_goodput: f64,
        channel: ChannelParams,
    ) -> Result<Self> {
        let input = DimensioningInput {
            arrivals,
            population,
            preambles,
            target_goodput,
            channel,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrivals > 0.0 && self.arrivals <= self.population) {
            return Err(Error::invalid(format!(
                "need 0 < N <= T, got N={}, T={}",
                self.arrivals, self.population
            )));
        }
        if self.preambles == 0 {
            return Err(Error::invalid("M must be positive"));
        }
        if self.arrivals <= self.preambles as f64 * LN_2 {
            return Err(Error::invalid(format!(
                "N={} must exceed M ln 2 = {:.3}",
                self.arrivals,
                self.preambles as f64 * LN_2
            )));
        }
        if self.channel.p_detect() < 0.99 || self.channel.p_false_alarm() > 1e-3 {
            return Err(Error::invalid(format!(
                "fixed point is only guaranteed for p_d >= 0.99 and p_f <= 1e-3, got p_d={}, p_f={}",
                self.channel.p_detect(),
                self.channel.p_false_alarm()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensioningResult {
    pub weight: usize,
    pub frame_len: usize,
    pub p_fa_target: f64,
    pub p_fa_predicted: f64,
    pub goodput_predicted: f64,
    pub iterations: usize,
}

/// Iterates `L <- ceil(required_length(ceil(k_min(L)), ...))` to a fixed point.
///
/// Starts from the ideal-channel Bloom length
/// `ceil(N ln(1/p_fa) / (M (ln 2)^2))`. Revisiting a length other than the
/// current one, or running out of iterations, is reported as
/// [`Error::NonConvergence`] with the visited lengths.
pub fn dimension(input: &DimensioningInput) -> Result<DimensioningResult> {
    input.validate()?;
    let n = input.arrivals;
    let m = input.preambles;
    let target = target_false_positive(n, input.population, input.target_goodput)?;

    let start = (n * (1.0 / target).ln() / (m as f64 * LN_2 * LN_2)).ceil();
    let mut len = if start.is_finite() && start >= 1.0 {
        start as usize
    } else {
        1
    };
    let mut visited = vec![len];
    for iteration in 1..=MAX_ITERATIONS {
        let weight = weight_for(len, m, n);
        let next = required_length(weight, m, n, target, &input.channel)?.ceil() as usize;
        if next == len {
            let p_fa = false_positive_probability(weight, len, m, n, &input.channel);
            return Ok(DimensioningResult {
                weight,
                frame_len: len,
                p_fa_target: target,
                p_fa_predicted: p_fa,
                goodput_predicted: analytic_goodput(n, input.population, p_fa),
                iterations: iteration,
            });
        }
        if visited.contains(&next) {
            visited.push(next);
            return Err(Error::NonConvergence { trace: visited });
        }
        visited.push(next);
        len = next;
    }
    Err(Error::NonConvergence { trace: visited })
}

/// `ceil(k_min)` clamped so the codec constraint `1 <= K <= min(M, L)` holds.
fn weight_for(raos: usize, preambles: usize, arrivals: f64) -> usize {
    let k = k_min(raos, preambles, arrivals).ceil() as usize;
    k.clamp(1, raos.min(preambles).max(1))
}
