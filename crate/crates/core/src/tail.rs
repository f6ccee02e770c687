//! Upper-tail probabilities for Binomial and Poisson counts.
//!
//! `P[B >= k]` for `B ~ Binomial(n, p)` is the regularized incomplete beta
//! function `I_p(k, n - k + 1)`, and `P[X >= k]` for `X ~ Poisson(lambda)` is
//! the regularized lower incomplete gamma function `P(k, lambda)`. Both are
//! evaluated as a point mass times a continued fraction (or series). The point
//! masses come from the saddle-point expansion (Stirling error plus deviance
//! term), which keeps full relative precision for `n` in the tens of thousands
//! where differences of `ln Gamma` values would lose several digits.

use std::f64::consts::PI;

use crate::{Error, Result};

const MAX_ITER: usize = 200_000;
const TINY: f64 = 1e-300;
const CF_EPS: f64 = 1e-16;

/// `ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)]` for integer `n <= 15`.
#[allow(clippy::excessive_precision)]
const STIRLING_ERR: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_99,
    0.011_896_709_945_891_770_10,
    0.010_411_265_261_972_096_50,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

/// Error of Stirling's approximation to `ln(n!)` at integer `n`.
pub(crate) fn stirling_error(n: u64) -> f64 {
    if n <= 15 {
        return STIRLING_ERR[n as usize];
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / m) + m - x`, accurate when `x` is close to `m`.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln P[B = k]` for `B ~ Binomial(n, p)` with `q = 1 - p`.
fn ln_binom_pmf(k: u64, n: u64, p: f64, q: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_q = if p < 0.5 { (-p).ln_1p() } else { q.ln() };
    let ln_p = if q < 0.5 { (-q).ln_1p() } else { p.ln() };
    if k == 0 {
        return n as f64 * ln_q;
    }
    if k == n {
        return n as f64 * ln_p;
    }
    let (nf, kf) = (n as f64, k as f64);
    let lc = stirling_error(n)
        - stirling_error(k)
        - stirling_error(n - k)
        - deviance(kf, nf * p)
        - deviance(nf - kf, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln P[X = k]` for `X ~ Poisson(lambda)`.
fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0 {
        return -lambda;
    }
    let kf = k as f64;
    -stirling_error(k) - deviance(kf, lambda) - 0.5 * (2.0 * PI * kf).ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("probability {p} outside [0, 1]")))
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("Poisson rate {lambda} must be finite and >= 0")))
    }
}

/// Natural log of `P[B >= k]`, `B ~ Binomial(n, p)`.
pub fn binom_log_sf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_probability(p)?;
    if k == 0 {
        return Ok(0.0);
    }
    if k > n || p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let (a, b) = (k as f64, (n - k + 1) as f64);
    if p < (a + 1.0) / (a + b + 2.0) {
        // I_p(a, b) = P[B = k] * q * cf(a, b, p)
        Ok(ln_binom_pmf(k, n, p, q) + q.ln() + beta_cf(a, b, p).ln())
    } else {
        // 1 - I_q(b, a), where I_q(b, a) = P[B = k - 1] * p * cf(b, a, q)
        let lower = (ln_binom_pmf(k - 1, n, p, q) + p.ln() + beta_cf(b, a, q).ln()).exp();
        Ok((-lower.min(1.0)).ln_1p())
    }
}

/// `P[B >= k]` for `B ~ Binomial(n, p)`.
pub fn binom_sf(k: u64, n: u64, p: f64) -> Result<f64> {
    Ok(binom_log_sf(k, n, p)?.exp())
}

/// Smallest `j` with `P[B >= j] <= t`; at most `n + 1`.
pub fn binom_threshold_k(n: u64, p: f64, t: f64) -> Result<u64> {
    check_probability(p)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("threshold {t} outside (0, 1)")));
    }
    // invariant: sf(lo) > t >= sf(hi)
    let (mut lo, mut hi) = (0u64, n + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binom_sf(mid, n, p)? <= t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Natural log of `P[X >= k]`, `X ~ Poisson(lambda)`.
pub fn poisson_log_sf(k: u64, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    if k == 0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let a = k as f64;
    if lambda < a + 1.0 {
        // P(a, x) = P[X = k] * sum_n prod_{i<=n} x / (a + i)
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..=MAX_ITER {
            term *= lambda / (a + i as f64);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        Ok(ln_poisson_pmf(k, lambda) + sum.ln())
    } else {
        // Q(a, x) = lambda * P[X = k - 1] * cf
        let mut b = lambda + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let i = i as f64;
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < CF_EPS {
                break;
            }
        }
        let upper = (ln_poisson_pmf(k - 1, lambda) + lambda.ln() + h.ln()).exp();
        Ok((-upper.min(1.0)).ln_1p())
    }
}

/// `P[X >= k]` for `X ~ Poisson(lambda)`.
pub fn poisson_sf(k: u64, lambda: f64) -> Result<f64> {
    Ok(poisson_log_sf(k, lambda)?.exp())
}

/// Survival function of the chi-square law with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        statrs::function::erf::erfc((x / 2.0).sqrt())
    }
}

/// Quantile of the chi-square law with one degree of freedom: the `x` with
/// `P[X <= x] = level`.
pub fn chi2_1_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("quantile level {level} outside (0, 1)")));
    }
    let target = 1.0 - level;
    let mut hi = 1.0;
    while chi2_1_sf(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_1_sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
