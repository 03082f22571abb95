//! Covariate model for bridge membership: logistic regression of `ζ` on a
//! centered design with a g-prior spike-and-slab over coefficients, a
//! Beta-Binomial model prior, and a standard-logistic intercept.
//!
//! After Pólya-Gamma augmentation the likelihood of `ζ` is Gaussian in the
//! linear predictor: `exp{-½ Σ ν_i (z_i - η_0 - x_iᵀη)²}` with
//! `z_i = (ζ_i - ½) / ν_i`. Everything here works with the weighted residual
//! `ν_i (z_i - η_0)` so the `ν → 0` limit stays finite.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::math::{ln_choose, logistic, logistic_lpdf, LN_2PI};
use crate::polya_gamma::draw_pg1;

/// Probability of a flip move away from the null and saturated models.
const P_FLIP: f64 = 0.9;
/// Distribution of the number of flipped inclusion indicators.
const FLIP_SIZES: [f64; 4] = [0.6, 0.2, 0.15, 0.05];
/// Degrees of freedom of the independence proposal for the intercept.
const ETA0_PROPOSAL_DF: f64 = 4.0;
/// Precision of the Gaussian matched to the standard logistic prior.
const LOGISTIC_PRECISION: f64 = 3.0 / (std::f64::consts::PI * std::f64::consts::PI);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeState {
    pub eta0: f64,
    pub eta: Vec<f64>,
    pub xi: Vec<bool>,
    pub nu: Vec<f64>,
    /// g-prior scale, fixed to the number of legislators.
    pub g: f64,
}

impl BridgeState {
    pub fn new(n_legislators: usize, n_covariates: usize) -> Self {
        Self {
            eta0: 0.0,
            eta: vec![0.0; n_covariates],
            xi: vec![false; n_covariates],
            nu: vec![0.25; n_legislators],
            g: n_legislators as f64,
        }
    }

    pub fn model_size(&self) -> usize {
        self.xi.iter().filter(|x| **x).count()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (k, (&e, &x)) in self.eta.iter().zip(&self.xi).enumerate() {
            if !x && e != 0.0 {
                return Err(Error::Numeric(format!("coefficient {k} excluded but equal to {e}")));
            }
        }
        if !self.eta0.is_finite() || self.eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numeric("non-finite bridge regression coefficient".into()));
        }
        Ok(())
    }

    /// `η_0 + x_iᵀη` for every legislator.
    pub fn linear_predictors(&self, x: &DMatrix<f64>) -> Vec<f64> {
        linear_predictors(x, self.eta0, &self.eta)
    }
}

/// `θ_i = logistic(η_0 + x_iᵀη)`.
pub fn bridge_probability(eta0: f64, eta: &[f64], x: &[f64]) -> f64 {
    let lin: f64 = eta0 + eta.iter().zip(x).map(|(e, v)| e * v).sum::<f64>();
    logistic(lin)
}

pub fn linear_predictors(x: &DMatrix<f64>, eta0: f64, eta: &[f64]) -> Vec<f64> {
    let mut out = vec![eta0; x.nrows()];
    for (k, &e) in eta.iter().enumerate() {
        if e != 0.0 {
            for (o, v) in out.iter_mut().zip(x.column(k).iter()) {
                *o += e * v;
            }
        }
    }
    out
}

/// PG-Gaussianised likelihood of the bridge indicators with the intercept
/// removed: weights `ν_i` and weighted residuals `ν_i (z_i - η_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingResponse {
    pub nu: Vec<f64>,
    pub weighted: Vec<f64>,
}

impl WorkingResponse {
    pub fn from_zeta(nu: &[f64], zeta: &[bool], eta0: f64) -> Self {
        let weighted = nu
            .iter()
            .zip(zeta)
            .map(|(n, z)| (if *z { 0.5 } else { -0.5 }) - n * eta0)
            .collect();
        Self {
            nu: nu.to_vec(),
            weighted,
        }
    }

    pub fn from_z(nu: &[f64], z: &[f64], eta0: f64) -> Self {
        let weighted = nu.iter().zip(z).map(|(n, z)| n * (z - eta0)).collect();
        Self {
            nu: nu.to_vec(),
            weighted,
        }
    }
}

/// `ν_i ~ PG(1, η_0 + x_iᵀη)`.
pub fn draw_bridge_pg<R: Rng + ?Sized>(state: &mut BridgeState, x: &DMatrix<f64>, rng: &mut R) -> Result<()> {
    let lin = state.linear_predictors(x);
    for (nu, psi) in state.nu.iter_mut().zip(lin) {
        *nu = draw_pg1(psi, rng)?;
    }
    Ok(())
}

/// Log target of the intercept: Gaussianised likelihood plus logistic prior.
/// `weighted_resid[i] = ν_i (z_i - x_iᵀη)`.
pub fn eta0_log_target(eta0: f64, nu: &[f64], weighted_resid: &[f64]) -> f64 {
    let s_nu: f64 = nu.iter().sum();
    let s_r: f64 = weighted_resid.iter().sum();
    eta0 * s_r - 0.5 * s_nu * eta0 * eta0 + logistic_lpdf(eta0)
}

/// Student-t independence proposal for the intercept: location and scale.
pub fn eta0_proposal(nu: &[f64], weighted_resid: &[f64]) -> (f64, f64) {
    let var = 1.0 / (nu.iter().sum::<f64>() + LOGISTIC_PRECISION);
    (var * weighted_resid.iter().sum::<f64>(), var.sqrt())
}

fn student_t_lpdf(x: f64, loc: f64, scale: f64, df: f64) -> f64 {
    let t = (x - loc) / scale;
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln() - scale.ln()
        - 0.5 * (df + 1.0) * (t * t / df).ln_1p()
}

/// One independence Metropolis-Hastings step for `η_0`. Returns the new
/// value and whether the proposal was accepted.
pub fn mh_eta0<R: Rng + ?Sized>(eta0: f64, nu: &[f64], weighted_resid: &[f64], rng: &mut R) -> (f64, bool) {
    let (loc, scale) = eta0_proposal(nu, weighted_resid);
    let t: f64 = StudentT::new(ETA0_PROPOSAL_DF).expect("df > 0").sample(rng);
    let prop = loc + scale * t;
    let log_ratio = eta0_log_target(prop, nu, weighted_resid) - eta0_log_target(eta0, nu, weighted_resid)
        + student_t_lpdf(eta0, loc, scale, ETA0_PROPOSAL_DF)
        - student_t_lpdf(prop, loc, scale, ETA0_PROPOSAL_DF);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        (prop, true)
    } else {
        (eta0, false)
    }
}

/// Metropolis-Hastings update of the intercept given `ν`, `ζ` and `η`.
pub fn update_eta0<R: Rng + ?Sized>(state: &mut BridgeState, zeta: &[bool], x: &DMatrix<f64>, rng: &mut R) -> bool {
    let offsets = linear_predictors(x, 0.0, &state.eta);
    let resid: Vec<f64> = state
        .nu
        .iter()
        .zip(zeta)
        .zip(&offsets)
        .map(|((n, z), o)| (if *z { 0.5 } else { -0.5 }) - n * o)
        .collect();
    let (v, accepted) = mh_eta0(state.eta0, &state.nu, &resid, rng);
    state.eta0 = v;
    accepted
}

/// Beta-Binomial(1, 1) log prior of an inclusion vector.
pub fn log_beta_binomial_prior(xi: &[bool]) -> f64 {
    let p = xi.len() as f64;
    let k = xi.iter().filter(|x| **x).count() as f64;
    ln_gamma(k + 1.0) + ln_gamma(p - k + 1.0) - ln_gamma(p + 2.0)
}

fn capped_flip_probability(k: usize, p: usize) -> f64 {
    let kmax = p.min(FLIP_SIZES.len());
    if k == 0 || k > kmax {
        0.0
    } else if k < kmax {
        FLIP_SIZES[k - 1]
    } else {
        FLIP_SIZES[k - 1..].iter().sum()
    }
}

/// Probability that the model proposal moves `from` to `to`.
pub fn proposal_log_prob(from: &[bool], to: &[bool]) -> f64 {
    let p = from.len();
    let size = from.iter().filter(|x| **x).count();
    let dist = from.iter().zip(to).filter(|(a, b)| a != b).count();
    let interior = size > 0 && size < p;
    let p_flip = if interior { P_FLIP } else { 1.0 };
    let mut q = p_flip * capped_flip_probability(dist, p) / ln_choose(p, dist).exp();
    if interior && dist == 2 && to.iter().filter(|x| **x).count() == size {
        q += (1.0 - P_FLIP) / (size * (p - size)) as f64;
    }
    q.ln()
}

/// Draws a candidate model. Returns it with `ln q(ξ|ξ*) - ln q(ξ*|ξ)`.
pub fn propose_model<R: Rng + ?Sized>(xi: &[bool], rng: &mut R) -> (Vec<bool>, f64) {
    let p = xi.len();
    let mut out = xi.to_vec();
    if p == 0 {
        return (out, 0.0);
    }
    let size = xi.iter().filter(|x| **x).count();
    let interior = size > 0 && size < p;
    if interior && rng.random::<f64>() >= P_FLIP {
        let inside: Vec<usize> = (0..p).filter(|k| xi[*k]).collect();
        let outside: Vec<usize> = (0..p).filter(|k| !xi[*k]).collect();
        let a = inside[rng.random_range(0..inside.len())];
        let b = outside[rng.random_range(0..outside.len())];
        out[a] = false;
        out[b] = true;
    } else {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = FLIP_SIZES.len();
        for (m, w) in FLIP_SIZES.iter().enumerate() {
            acc += w;
            if u < acc {
                k = m + 1;
                break;
            }
        }
        let k = k.min(p);
        for idx in index::sample(rng, p, k) {
            out[idx] = !out[idx];
        }
    }
    let log_ratio = proposal_log_prob(&out, xi) - proposal_log_prob(xi, &out);
    (out, log_ratio)
}

fn selected_columns(x: &DMatrix<f64>, xi: &[bool]) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..xi.len()).filter(|k| xi[*k]).collect();
    x.select_columns(cols.iter())
}

/// Cholesky factors needed by both the Bayes factor and the coefficient draw.
struct SelectedSystem {
    /// Posterior precision `X_ξᵀ (V + I/(4g)) X_ξ`.
    precision: Cholesky<f64, Dyn>,
    /// Prior precision `X_ξᵀX_ξ / (4g)`.
    prior_precision: Cholesky<f64, Dyn>,
    /// `X_ξᵀ V (z - η_0)`.
    rhs: DVector<f64>,
}

fn selected_system(xi: &[bool], wr: &WorkingResponse, x: &DMatrix<f64>, g: f64) -> Result<SelectedSystem> {
    let xs = selected_columns(x, xi);
    let gram = xs.transpose() * &xs;
    let prior = &gram / (4.0 * g);
    let mut weighted = xs.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= wr.nu[i];
    }
    let precision = xs.transpose() * weighted + &prior;
    let rhs = xs.transpose() * DVector::from_column_slice(&wr.weighted);
    let singular = || Error::Degenerate("selected covariate columns are collinear".into());
    Ok(SelectedSystem {
        prior_precision: Cholesky::new(prior).ok_or_else(singular)?,
        precision: Cholesky::new(precision).ok_or_else(singular)?,
        rhs,
    })
}

fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Log Bayes factor of model `ξ` against the null model, with the
/// coefficients integrated over their g-prior.
pub fn log_bayes_factor(xi: &[bool], wr: &WorkingResponse, x: &DMatrix<f64>, g: f64) -> Result<f64> {
    if !xi.iter().any(|v| *v) {
        return Ok(0.0);
    }
    let sys = selected_system(xi, wr, x, g)?;
    let solved = sys.precision.l().solve_lower_triangular(&sys.rhs).ok_or_else(|| {
        Error::Numeric("triangular solve failed in Bayes factor".into())
    })?;
    Ok(-0.5 * (log_det(&sys.precision) - log_det(&sys.prior_precision)) + 0.5 * solved.norm_squared())
}

/// One Metropolis-Hastings step over models with a caller-supplied log
/// Bayes factor. Returns the new model and whether it was accepted.
pub fn model_mh_step<R, F>(xi: &[bool], current_log_bf: f64, mut log_bf: F, rng: &mut R) -> Result<(Vec<bool>, f64, bool)>
where
    R: Rng + ?Sized,
    F: FnMut(&[bool]) -> Result<f64>,
{
    let (cand, proposal_log_ratio) = propose_model(xi, rng);
    if cand == xi {
        return Ok((cand, current_log_bf, true));
    }
    let cand_bf = log_bf(&cand)?;
    let delta = cand_bf - current_log_bf + log_beta_binomial_prior(&cand) - log_beta_binomial_prior(xi) + proposal_log_ratio;
    if delta >= 0.0 || rng.random::<f64>().ln() < delta {
        Ok((cand, cand_bf, true))
    } else {
        Ok((xi.to_vec(), current_log_bf, false))
    }
}

/// Draws `η_ξ` from its Gaussian conditional and zeroes excluded entries.
pub fn draw_eta_given_model<R: Rng + ?Sized>(
    xi: &[bool],
    wr: &WorkingResponse,
    x: &DMatrix<f64>,
    g: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut eta = vec![0.0; xi.len()];
    if !xi.iter().any(|v| *v) {
        return Ok(eta);
    }
    let sys = selected_system(xi, wr, x, g)?;
    let mean = sys.precision.solve(&sys.rhs);
    let eps = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    let dev = sys
        .precision
        .l()
        .transpose()
        .solve_upper_triangular(&eps)
        .ok_or_else(|| Error::Numeric("triangular solve failed in coefficient draw".into()))?;
    let draw = mean + dev;
    for (slot, v) in (0..xi.len()).filter(|k| xi[*k]).zip(draw.iter()) {
        eta[slot] = *v;
    }
    Ok(eta)
}

/// Mean and covariance of `η_ξ | ξ, ν, ζ, η_0` (for diagnostics and tests).
pub fn eta_conditional_moments(xi: &[bool], wr: &WorkingResponse, x: &DMatrix<f64>, g: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let sys = selected_system(xi, wr, x, g)?;
    Ok((sys.precision.solve(&sys.rhs), sys.precision.inverse()))
}

/// Refreshes `η` given the current model.
pub fn update_eta_given_model<R: Rng + ?Sized>(
    state: &mut BridgeState,
    zeta: &[bool],
    x: &DMatrix<f64>,
    rng: &mut R,
) -> Result<()> {
    let wr = WorkingResponse::from_zeta(&state.nu, zeta, state.eta0);
    state.eta = draw_eta_given_model(&state.xi, &wr, x, state.g, rng)?;
    Ok(())
}

/// Model move followed by a coefficient refresh (also after rejection).
pub fn update_model<R: Rng + ?Sized>(state: &mut BridgeState, zeta: &[bool], x: &DMatrix<f64>, rng: &mut R) -> Result<bool> {
    if state.xi.is_empty() {
        return Ok(false);
    }
    let wr = WorkingResponse::from_zeta(&state.nu, zeta, state.eta0);
    let g = state.g;
    let current = log_bayes_factor(&state.xi, &wr, x, g)?;
    let (xi, _, accepted) = model_mh_step(&state.xi, current, |m| log_bayes_factor(m, &wr, x, g), rng)?;
    state.xi = xi;
    state.eta = draw_eta_given_model(&state.xi, &wr, x, g, rng)?;
    Ok(accepted)
}

/// Log prior of the bridge regression: logistic intercept, g-prior
/// coefficients and the model prior.
pub fn log_prior(state: &BridgeState, x: &DMatrix<f64>) -> Result<f64> {
    let mut lp = logistic_lpdf(state.eta0) + log_beta_binomial_prior(&state.xi);
    let k = state.model_size();
    if k > 0 {
        let xs = selected_columns(x, &state.xi);
        let prior_prec = (xs.transpose() * &xs) / (4.0 * state.g);
        let ch = Cholesky::new(prior_prec).ok_or_else(|| Error::Degenerate("selected covariate columns are collinear".into()))?;
        let eta: Vec<f64> = state.eta.iter().zip(&state.xi).filter(|(_, x)| **x).map(|(e, _)| *e).collect();
        let e = DVector::from_vec(eta);
        let quad = (ch.l().transpose() * &e).norm_squared();
        lp += -0.5 * (k as f64) * LN_2PI + 0.5 * log_det(&ch) - 0.5 * quad;
    }
    Ok(lp)
}
