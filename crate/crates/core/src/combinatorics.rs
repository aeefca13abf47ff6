//! Counting results for the signature space.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Number of distinct weight-`k` signatures: `C(L, K) * M^K`.
pub fn signature_space_size(raos: usize, preambles: usize, weight: usize) -> BigUint {
    binomial(raos, weight) * BigUint::from(preambles).pow(weight as u32)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Natural log of a (possibly huge) big integer.
pub(crate) fn ln_big(x: &BigUint) -> f64 {
    if let Some(v) = x.to_f64().filter(|v| v.is_finite()) {
        return v.ln();
    }
    let shift = x.bits() - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Probability that two or more of `population` devices draw the same
/// signature when each signature is equally likely:
/// `sum_{i=2}^{T} C(T,i) p^i (1-p)^(T-i)` with `p = 1 / (C(L,K) M^K)`.
///
/// Evaluated term by term in the log domain; no `1 - ...` cancellation.
pub fn shared_signature_prob(population: u64, raos: usize, preambles: usize, weight: usize) -> f64 {
    let space = signature_space_size(raos, preambles, weight);
    if population < 2 || space.is_zero() {
        return 0.0;
    }
    let ln_p = -ln_big(&space);
    if ln_p == 0.0 {
        // a single possible signature is always shared
        return 1.0;
    }
    let ln_q = (-ln_p.exp()).ln_1p();
    let t = population as f64;
    // ln C(T, 2)
    let mut ln_binom = (t * (t - 1.0) / 2.0).ln();
    let mut terms = Vec::with_capacity(population as usize - 1);
    for i in 2..=population {
        let i_f = i as f64;
        terms.push(ln_binom + i_f * ln_p + (t - i_f) * ln_q);
        ln_binom += (t - i_f).ln() - (i_f + 1.0).ln();
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|&x| (x - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// Probability that `K` independent uniform RAO picks out of `L` are not all
/// distinct: `1 - K! C(L,K) / L^K`.
pub fn distinct_rao_collision_prob(raos: usize, weight: usize) -> f64 {
    assert!(weight <= raos, "K={weight} exceeds L={raos}");
    let l = raos as f64;
    let ln_all_distinct: f64 = (0..weight).map(|j| (-(j as f64) / l).ln_1p()).sum();
    -ln_all_distinct.exp_m1()
}
