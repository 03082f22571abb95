//! Exact sampling of Pólya-Gamma `PG(1, c)` variates.
//!
//! Uses Devroye's alternating-series accept/reject scheme for the `J*(1, z)`
//! distribution with `z = |c| / 2`, returning `J* / 4`. The proposal mixes a
//! truncated inverse Gaussian on `(0, t]` with a tilted exponential on
//! `(t, ∞)`, `t = 0.64`.

use std::f64::consts::{FRAC_1_PI, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::math::log_normal_cdf;

const TRUNC: f64 = 0.64;
const PI2_OVER_8: f64 = PI * PI / 8.0;

/// Draws one `PG(1, c)` variate.
///
/// The distribution depends on `c` only through `|c|`. Fails for non-finite
/// `c`; the result is always strictly positive.
pub fn draw_pg1<R: Rng + ?Sized>(c: f64, rng: &mut R) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::Numeric(format!("PG tilt must be finite, got {c}")));
    }
    let x = draw_jstar(0.5 * c.abs(), rng);
    Ok((0.25 * x).max(f64::MIN_POSITIVE))
}

/// `E[PG(1, c)] = tanh(c/2) / (2c)`, with the `c → 0` limit of 1/4.
pub fn pg1_mean(c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-6 {
        // Taylor expansion around zero.
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// `Var[PG(1, c)]`, used by tests to size standard errors.
pub fn pg1_variance(c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-3 {
        // 1/24 - c^2/120 + O(c^4)
        1.0 / 24.0 - c * c / 120.0
    } else {
        let s = 1.0 / (0.5 * c).cosh();
        (c.sinh() - c) * s * s / (4.0 * c * c * c)
    }
}

fn draw_jstar<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let fz = PI2_OVER_8 + 0.5 * z * z;
    let p_exp = mass_tilted_exponential(z, fz);
    loop {
        let x = if rng.random::<f64>() < p_exp {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };

        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0usize;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Probability of choosing the exponential tail piece of the proposal.
fn mass_tilted_exponential(z: f64, fz: f64) -> f64 {
    let t = TRUNC;
    let rt = (1.0 / t).sqrt();
    let b = rt * (t * z - 1.0);
    let a = -rt * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + log_normal_cdf(b);
    let xa = x0 + z + log_normal_cdf(a);
    let q_over_p = 4.0 * FRAC_1_PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Piecewise coefficients of the alternating series for the `J*(1, 0)` density.
#[inline]
fn series_coef(n: usize, x: f64) -> f64 {
    let k = n as f64 + 0.5;
    if x > TRUNC {
        PI * k * (-0.5 * k * k * PI * PI * x).exp()
    } else {
        (2.0 * FRAC_1_PI / x).powf(1.5) * PI * k * (-2.0 * k * k / x).exp()
    }
}

/// Inverse Gaussian with mean `1/z`, shape 1, truncated to `(0, TRUNC]`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let r = TRUNC;
    if z < 1.0 / r {
        // Mean beyond the truncation point: sample via the scaled chi-square
        // route and accept with the exponential tilt.
        loop {
            let (mut e1, mut e2): (f64, f64);
            loop {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / r {
                    break;
                }
            }
            let denom = 1.0 + r * e1;
            let x = r / (denom * denom);
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    }
    let mu = 1.0 / z;
    loop {
        let n: f64 = StandardNormal.sample(rng);
        let y = n * n;
        let half_mu = 0.5 * mu;
        let mut x = mu + half_mu * mu * y - half_mu * (4.0 * mu * y + (mu * y) * (mu * y)).sqrt();
        if rng.random::<f64>() > mu / (mu + x) {
            x = mu * mu / x;
        }
        if x <= r && x > 0.0 {
            return x;
        }
    }
}
