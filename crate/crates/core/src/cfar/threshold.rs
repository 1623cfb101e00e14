//! Threshold factors that give a design false-alarm probability on
//! square-law (exponentially distributed) noise.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// CA-CFAR factor for `n` training cells: `n * (pfa^(-1/n) - 1)`.
pub fn ca_factor(n: usize, pfa: f64) -> f64 {
    let n = n as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

/// 1-based rank `ceil(fraction * n)`, kept within `1..=n`.
pub fn os_rank(n: usize, fraction: f64) -> usize {
    // The epsilon keeps products like 0.7 * 10 from rounding up a whole rank.
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// OS-CFAR factor for the `k`-th smallest of `n` training cells, solving
/// `pfa = prod_{i<k} (n - i) / (n - i + alpha)`.
pub fn os_factor(n: usize, k: usize, pfa: f64) -> f64 {
    let log_pfa = |alpha: f64| -> f64 {
        (0..k)
            .map(|i| {
                let m = (n - i) as f64;
                (m / (m + alpha)).ln()
            })
            .sum()
    };
    solve_decreasing(|alpha| log_pfa(alpha) - pfa.ln())
}

/// CAOS factor: each of `n` training values is the mean of `m` exponential
/// cells, and the statistic is the `k`-th smallest of them. The false-alarm
/// probability `E[exp(-alpha X_(k))]` is integrated numerically over the
/// order-statistic density.
pub fn caos_factor(m: usize, n: usize, k: usize, pfa: f64) -> f64 {
    // The integration is costly and the same few window shapes recur on
    // every frame, so results are memoised for the whole process.
    type Memo = HashMap<(usize, usize, usize, u64), f64>;
    static MEMO: OnceLock<Mutex<Memo>> = OnceLock::new();
    let key = (m, n, k, pfa.to_bits());
    let memo = MEMO.get_or_init(Default::default);
    if let Some(&v) = memo.lock().expect("memo lock").get(&key) {
        return v;
    }
    let v = caos_factor_uncached(m, n, k, pfa);
    memo.lock().expect("memo lock").insert(key, v);
    v
}

fn caos_factor_uncached(m: usize, n: usize, k: usize, pfa: f64) -> f64 {
    let mf = m as f64;
    // Mean of m unit exponentials is Gamma(m, rate m): mean 1, sd 1/sqrt(m).
    let upper = 1.0 + 40.0 / mf.sqrt();
    let steps = 20_000;
    let h = upper / steps as f64;
    let ln_fact_m1: f64 = (1..m).map(|j| (j as f64).ln()).sum();
    let ln_binom = ln_choose(n, k) + (k as f64).ln();

    let cdf = |x: f64| -> f64 {
        // 1 - exp(-mx) sum_{j<m} (mx)^j / j!
        let mx = mf * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..m {
            term *= mx / j as f64;
            sum += term;
        }
        (1.0 - (-mx).exp() * sum).clamp(0.0, 1.0)
    };
    let weights: Vec<(f64, f64)> = (0..=steps)
        .filter_map(|i| {
            let x = i as f64 * h;
            if x == 0.0 {
                return None;
            }
            let f = cdf(x);
            if f <= 0.0 || f >= 1.0 {
                return None;
            }
            let ln_pdf = mf * mf.ln() + (mf - 1.0) * x.ln() - mf * x - ln_fact_m1;
            let ln_density =
                ln_binom + (k as f64 - 1.0) * f.ln() + (n - k) as f64 * (1.0 - f).ln() + ln_pdf;
            let simpson = if i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            Some((x, simpson * h / 3.0 * ln_density.exp()))
        })
        .collect();
    let log_pfa = |alpha: f64| -> f64 {
        weights
            .iter()
            .map(|&(x, w)| w * (-alpha * x).exp())
            .sum::<f64>()
            .ln()
    };
    solve_decreasing(|alpha| log_pfa(alpha) - pfa.ln())
}

fn ln_choose(n: usize, k: usize) -> f64 {
    (0..k).map(|i| ((n - i) as f64 / (k - i) as f64).ln()).sum()
}

/// Root of a function decreasing in `alpha >= 0` that starts positive.
fn solve_decreasing(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
