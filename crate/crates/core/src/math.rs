//! Small numerical helpers shared by the samplers.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Logistic function `1 / (1 + e^{-x})` without overflow for any finite `x`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable in both tails.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln logistic(x)`.
#[inline]
pub fn log_logistic(x: f64) -> f64 {
    -log1p_exp(-x)
}

/// Bernoulli log-mass of `y` under success log-odds `psi`.
#[inline]
pub fn bernoulli_logit_lpmf(y: bool, psi: f64) -> f64 {
    if y {
        log_logistic(psi)
    } else {
        log_logistic(-psi)
    }
}

/// Log-density of the standard logistic distribution.
#[inline]
pub fn logistic_lpdf(x: f64) -> f64 {
    -x.abs() - 2.0 * (-x.abs()).exp().ln_1p()
}

/// Standard logistic CDF (used by tests and by the synthetic generator).
#[inline]
pub fn logistic_cdf(x: f64) -> f64 {
    logistic(x)
}

#[inline]
pub fn normal_lpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Inverse-gamma log-density with shape `a` and scale `b`.
#[inline]
pub fn inv_gamma_lpdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// `ln Φ(x)` for the standard normal CDF, accurate far into the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic expansion of the Mills ratio.
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - 0.5 * LN_2PI + series.ln()
    }
}

#[inline]
pub fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Draws `Z ~ N(0, 1)` conditioned on `Z > a`.
fn std_normal_above<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= 0.25 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > a {
                return z;
            }
        }
    }
    // Exponential proposal with the optimal rate for the tail.
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / lambda;
        let u: f64 = rng.random();
        let d = z - lambda;
        if u <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Draws from `N(mean, sd²)` restricted to `(lower, ∞)`.
pub fn normal_above<R: Rng + ?Sized>(mean: f64, sd: f64, lower: f64, rng: &mut R) -> f64 {
    let z = std_normal_above((lower - mean) / sd, rng);
    (mean + sd * z).max(lower.next_up())
}

/// Draws from `N(mean, sd²)` restricted to `(-∞, upper)`.
pub fn normal_below<R: Rng + ?Sized>(mean: f64, sd: f64, upper: f64, rng: &mut R) -> f64 {
    let z = std_normal_above((mean - upper) / sd, rng);
    (mean - sd * z).min(upper.next_down())
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
