//! Policy-space parameters of the two-domain logistic IRT model and their
//! Gibbs updates under Pólya-Gamma augmentation (one latent dimension).
//!
//! Every vote cell `(i, j)` contributes `exp{κ ψ - ν ψ² / 2}` with
//! `κ = y - 1/2` and `ψ = μ_j + α_j β_{i,γ_j}`, so all sums below are written
//! in terms of `κ` and `ν` rather than the pseudo-response `z = κ / ν`.
//! Cells that are missing while imputation is disabled are left out entirely,
//! which is equivalent to marginalising them.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::data::{AnchorSpec, Domain, Vote, VoteMatrix, VoteTypeVector};
use crate::error::{Error, Result};
use crate::identify;
use crate::math::{bernoulli_logit_lpmf, inv_gamma_lpdf, log_logistic, logistic, normal_above, normal_below, normal_lpdf};
use crate::polya_gamma::draw_pg1;

/// `P(y = 1) = logistic(μ_j + α_j β)`.
#[inline]
pub fn vote_probability(mu_j: f64, alpha_j: f64, beta: f64) -> f64 {
    logistic(mu_j + alpha_j * beta)
}

/// Intercepts and spike-and-slab discriminations of every bill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillParams {
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_active: Vec<bool>,
}

/// Procedural and final-passage ideal points plus bridge indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealPoints {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub zeta: Vec<bool>,
}

impl IdealPoints {
    #[inline]
    pub fn get(&self, i: usize, domain: Domain) -> f64 {
        match domain {
            Domain::Procedural => self.beta0[i],
            Domain::FinalPassage => self.beta1[i],
        }
    }

    pub fn n_bridges(&self) -> usize {
        self.zeta.iter().filter(|z| **z).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyHyper {
    pub rho_mu: f64,
    pub kappa2_mu: f64,
    pub omega_alpha: f64,
    pub kappa2_alpha: f64,
    pub rho_beta: f64,
    pub sigma2_beta: f64,
}

/// Normal prior on a location hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

/// Inverse-gamma prior (shape, scale) on a variance hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaPrior {
    pub fn mean(&self) -> f64 {
        if self.shape > 1.0 {
            self.scale / (self.shape - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        inv_gamma(self.shape, self.scale, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

/// Hyperpriors of the policy block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyPriors {
    pub rho_mu: NormalPrior,
    pub kappa2_mu: InvGammaPrior,
    pub omega_alpha: BetaPrior,
    pub kappa2_alpha: InvGammaPrior,
    pub rho_beta: NormalPrior,
    pub sigma2_beta: InvGammaPrior,
}

impl Default for PolicyPriors {
    fn default() -> Self {
        let std_normal = NormalPrior { mean: 0.0, var: 1.0 };
        let ig21 = InvGammaPrior { shape: 2.0, scale: 1.0 };
        Self {
            rho_mu: std_normal,
            kappa2_mu: ig21,
            omega_alpha: BetaPrior { a: 1.0, b: 1.0 },
            kappa2_alpha: ig21,
            rho_beta: std_normal,
            sigma2_beta: ig21,
        }
    }
}

impl PolicyPriors {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be positive and finite")));
        for (name, v) in [
            ("rho_mu.var", self.rho_mu.var),
            ("rho_beta.var", self.rho_beta.var),
            ("kappa2_mu.shape", self.kappa2_mu.shape),
            ("kappa2_mu.scale", self.kappa2_mu.scale),
            ("kappa2_alpha.shape", self.kappa2_alpha.shape),
            ("kappa2_alpha.scale", self.kappa2_alpha.scale),
            ("sigma2_beta.shape", self.sigma2_beta.shape),
            ("sigma2_beta.scale", self.sigma2_beta.scale),
            ("omega_alpha.a", self.omega_alpha.a),
            ("omega_alpha.b", self.omega_alpha.b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name);
            }
        }
        Ok(())
    }

    /// Hyperparameters at their prior means (prior mode-free starting point).
    pub fn prior_means(&self) -> PolicyHyper {
        PolicyHyper {
            rho_mu: self.rho_mu.mean,
            kappa2_mu: self.kappa2_mu.mean(),
            omega_alpha: self.omega_alpha.a / (self.omega_alpha.a + self.omega_alpha.b),
            kappa2_alpha: self.kappa2_alpha.mean(),
            rho_beta: self.rho_beta.mean,
            sigma2_beta: self.sigma2_beta.mean(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PolicyHyper {
        PolicyHyper {
            rho_mu: normal(self.rho_mu.mean, self.rho_mu.var, rng),
            kappa2_mu: self.kappa2_mu.sample(rng),
            omega_alpha: beta(self.omega_alpha.a, self.omega_alpha.b, rng),
            kappa2_alpha: self.kappa2_alpha.sample(rng),
            rho_beta: normal(self.rho_beta.mean, self.rho_beta.var, rng),
            sigma2_beta: self.sigma2_beta.sample(rng),
        }
    }
}

/// Pólya-Gamma latents and current (partially imputed) votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAugment {
    pub nu: Vec<f64>,
    pub y: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub bills: BillParams,
    pub ideal: IdealPoints,
    pub hyper: PolicyHyper,
    pub augment: PolicyAugment,
}

/// Read-only data and options shared by all policy updates.
#[derive(Debug, Clone, Copy)]
pub struct PolicyModel<'a> {
    pub votes: &'a VoteMatrix,
    pub types: &'a VoteTypeVector,
    pub priors: &'a PolicyPriors,
    /// Redraw missing cells each sweep. When false they are marginalised out.
    pub impute: bool,
}

impl<'a> PolicyModel<'a> {
    pub fn new(votes: &'a VoteMatrix, types: &'a VoteTypeVector, priors: &'a PolicyPriors) -> Self {
        Self {
            votes,
            types,
            priors,
            impute: true,
        }
    }

    #[inline]
    pub fn n_legislators(&self) -> usize {
        self.votes.n_legislators()
    }

    #[inline]
    pub fn n_bills(&self) -> usize {
        self.votes.n_bills()
    }

    /// Whether cell `(i, j)` enters the augmented likelihood.
    #[inline]
    fn included(&self, i: usize, j: usize) -> bool {
        self.impute || self.votes.get(i, j) != Vote::Missing
    }
}

impl PolicyState {
    #[inline]
    pub fn linear_predictor(&self, types: &VoteTypeVector, i: usize, j: usize) -> f64 {
        self.bills.mu[j] + self.bills.alpha[j] * self.ideal.get(i, types.get(j))
    }

    /// Copies observed votes into `augment.y`; missing cells start as nay.
    pub fn reset_observed(&mut self, votes: &VoteMatrix) {
        self.augment.y = votes.cells().iter().map(|v| *v == Vote::Yea).collect();
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (j, (&a, &on)) in self.bills.alpha.iter().zip(&self.bills.alpha_active).enumerate() {
            if !on && a != 0.0 {
                return Err(Error::Numeric(format!("bill {j}: inactive discrimination is {a}")));
            }
        }
        for i in 0..self.ideal.zeta.len() {
            if self.ideal.zeta[i] && self.ideal.beta0[i].to_bits() != self.ideal.beta1[i].to_bits() {
                return Err(Error::Numeric(format!("legislator {i}: bridge with distinct ideal points")));
            }
        }
        let finite = self.bills.mu.iter().chain(&self.bills.alpha).chain(&self.ideal.beta0).chain(&self.ideal.beta1);
        if let Some(v) = finite.into_iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite policy parameter {v}")));
        }
        Ok(())
    }
}

/// Redraws every missing cell from its current vote probability.
pub fn impute_missing<R: Rng + ?Sized>(model: &PolicyModel, state: &mut PolicyState, rng: &mut R) {
    if !model.impute {
        return;
    }
    let nj = model.n_bills();
    for i in 0..model.n_legislators() {
        for j in 0..nj {
            if model.votes.get(i, j) == Vote::Missing {
                let p = logistic(state.linear_predictor(model.types, i, j));
                state.augment.y[i * nj + j] = rng.random::<f64>() < p;
            }
        }
    }
}

/// `ν_{ij} ~ PG(1, ψ_{ij})` for every included cell.
pub fn draw_policy_pg<R: Rng + ?Sized>(model: &PolicyModel, state: &mut PolicyState, rng: &mut R) -> Result<()> {
    let nj = model.n_bills();
    for i in 0..model.n_legislators() {
        for j in 0..nj {
            if model.included(i, j) {
                let psi = state.linear_predictor(model.types, i, j);
                state.augment.nu[i * nj + j] = draw_pg1(psi, rng)?;
            }
        }
    }
    Ok(())
}

/// Gibbs update of every bill intercept.
pub fn update_mu<R: Rng + ?Sized>(model: &PolicyModel, state: &mut PolicyState, rng: &mut R) {
    let nj = model.n_bills();
    let h = state.hyper;
    for j in 0..nj {
        let gamma = model.types.get(j);
        let alpha = state.bills.alpha[j];
        let (mut prec, mut lin) = (0.0, 0.0);
        for i in 0..model.n_legislators() {
            if !model.included(i, j) {
                continue;
            }
            let c = i * nj + j;
            let nu = state.augment.nu[c];
            let kappa = kappa_of(state.augment.y[c]);
            prec += nu;
            lin += kappa - nu * alpha * state.ideal.get(i, gamma);
        }
        let (mean, var) = gaussian_conditional(h.rho_mu, h.kappa2_mu, prec, lin);
        state.bills.mu[j] = normal(mean, var, rng);
    }
}

/// Sufficient statistics of the slab conditional of one bill's discrimination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabConditional {
    pub mean: f64,
    pub var: f64,
    /// Posterior log-odds of the spike.
    pub spike_log_odds: f64,
}

/// Spike/slab conditional given `Σν β²`, `Σ(κ - ν μ)β` and the hyperparameters.
pub fn alpha_conditional(sum_nu_b2: f64, sum_resid_b: f64, omega: f64, kappa2: f64) -> SlabConditional {
    let var = 1.0 / (1.0 / kappa2 + sum_nu_b2);
    let mean = var * sum_resid_b;
    let prior_log_odds = if omega <= 0.0 {
        f64::NEG_INFINITY
    } else if omega >= 1.0 {
        f64::INFINITY
    } else {
        omega.ln() - (-omega).ln_1p()
    };
    let spike_log_odds = prior_log_odds + 0.5 * (kappa2.ln() - var.ln()) - 0.5 * mean * mean / var;
    SlabConditional {
        mean,
        var,
        spike_log_odds,
    }
}

/// Spike-and-slab Gibbs update of every discrimination parameter.
pub fn update_alpha<R: Rng + ?Sized>(model: &PolicyModel, state: &mut PolicyState, rng: &mut R) {
    let nj = model.n_bills();
    let h = state.hyper;
    for j in 0..nj {
        let gamma = model.types.get(j);
        let mu = state.bills.mu[j];
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..model.n_legislators() {
            if !model.included(i, j) {
                continue;
            }
            let c = i * nj + j;
            let nu = state.augment.nu[c];
            let beta = state.ideal.get(i, gamma);
            a += nu * beta * beta;
            b += (kappa_of(state.augment.y[c]) - nu * mu) * beta;
        }
        let cond = alpha_conditional(a, b, h.omega_alpha, h.kappa2_alpha);
        let p_spike = logistic(cond.spike_log_odds);
        if rng.random::<f64>() < p_spike {
            state.bills.alpha[j] = 0.0;
            state.bills.alpha_active[j] = false;
        } else {
            state.bills.alpha[j] = normal(cond.mean, cond.var, rng);
            state.bills.alpha_active[j] = true;
        }
    }
}

/// Per-domain sufficient statistics for one legislator:
/// `A_γ = Σ ν α²` and `B_γ = Σ (κ - ν μ) α` over bills of domain `γ`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LegislatorStats {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl LegislatorStats {
    pub fn collect(model: &PolicyModel, state: &PolicyState, i: usize) -> Self {
        let nj = model.n_bills();
        let mut s = Self::default();
        for j in 0..nj {
            if !model.included(i, j) {
                continue;
            }
            let alpha = state.bills.alpha[j];
            if alpha == 0.0 {
                continue;
            }
            let c = i * nj + j;
            let nu = state.augment.nu[c];
            let d = model.types.get(j).index();
            s.a[d] += nu * alpha * alpha;
            s.b[d] += (kappa_of(state.augment.y[c]) - nu * state.bills.mu[j]) * alpha;
        }
        s
    }
}

/// Normal prior `N(prior_mean, prior_var)` combined with a Gaussian
/// likelihood of precision `sum_prec` and linear term `sum_lin`.
#[inline]
pub fn gaussian_conditional(prior_mean: f64, prior_var: f64, sum_prec: f64, sum_lin: f64) -> (f64, f64) {
    let var = 1.0 / (1.0 / prior_var + sum_prec);
    (var * (prior_mean / prior_var + sum_lin), var)
}

#[inline]
fn beta_conditional(a: f64, b: f64, rho: f64, sigma2: f64) -> (f64, f64) {
    gaussian_conditional(rho, sigma2, a, b)
}

/// Log posterior odds of `ζ_i = 1` given the bridge-regression log-odds
/// `η_0 + x_iᵀη` and the legislator's sufficient statistics.
pub fn zeta_log_odds(stats: &LegislatorStats, prior_log_odds: f64, rho: f64, sigma2: f64) -> f64 {
    let inv_s2 = 1.0 / sigma2;
    let var_shared = 1.0 / (inv_s2 + stats.a[0] + stats.a[1]);
    let var0 = 1.0 / (inv_s2 + stats.a[0]);
    let var1 = 1.0 / (inv_s2 + stats.a[1]);
    // Sums of q α ν with q = z - μ - ρ α.
    let q0 = stats.b[0] - rho * stats.a[0];
    let q1 = stats.b[1] - rho * stats.a[1];
    let q = q0 + q1;
    let log_det = 0.5 * (sigma2.ln() + var_shared.ln() - var0.ln() - var1.ln());
    let quad = 0.5 * (var_shared * q * q - var0 * q0 * q0 - var1 * q1 * q1);
    prior_log_odds + log_det + quad
}

/// Gibbs update of the bridge indicators. `bridge_log_odds[i]` is
/// `η_0 + x_iᵀη`, the log prior odds that legislator `i` is a bridge.
pub fn update_zeta<R: Rng + ?Sized>(
    model: &PolicyModel,
    state: &mut PolicyState,
    bridge_log_odds: &[f64],
    rng: &mut R,
) {
    let h = state.hyper;
    for (i, &prior_lo) in bridge_log_odds.iter().enumerate().take(model.n_legislators()) {
        let stats = LegislatorStats::collect(model, state, i);
        let lo = zeta_log_odds(&stats, prior_lo, h.rho_beta, h.sigma2_beta);
        state.ideal.zeta[i] = rng.random::<f64>() < logistic(lo);
    }
}

/// Gibbs update of all ideal points given `ζ`.
///
/// With `sign_anchor`, the sign legislator is drawn last and, when not a
/// bridge, its final-passage point is truncated to the same side of the
/// anchored origin as its procedural point.
pub fn update_beta<R: Rng + ?Sized>(
    model: &PolicyModel,
    state: &mut PolicyState,
    sign_anchor: Option<&AnchorSpec>,
    rng: &mut R,
) {
    let h = state.hyper;
    let signed = sign_anchor.map(|a| a.sign_legislator);
    let order = (0..model.n_legislators()).filter(|i| Some(*i) != signed).chain(signed);
    for i in order {
        let stats = LegislatorStats::collect(model, state, i);
        if state.ideal.zeta[i] {
            let (m, v) = beta_conditional(stats.a[0] + stats.a[1], stats.b[0] + stats.b[1], h.rho_beta, h.sigma2_beta);
            let b = normal(m, v, rng);
            state.ideal.beta0[i] = b;
            state.ideal.beta1[i] = b;
            continue;
        }
        let (m0, v0) = beta_conditional(stats.a[0], stats.b[0], h.rho_beta, h.sigma2_beta);
        let (m1, v1) = beta_conditional(stats.a[1], stats.b[1], h.rho_beta, h.sigma2_beta);
        state.ideal.beta0[i] = normal(m0, v0, rng);
        let pivot = match sign_anchor {
            Some(spec) if Some(i) == signed => identify::origin_preimage(&state.ideal.beta0, spec),
            _ => None,
        };
        state.ideal.beta1[i] = match pivot {
            Some(p) if state.ideal.beta0[i] >= p => normal_above(m1, v1.sqrt(), p, rng),
            Some(p) => normal_below(m1, v1.sqrt(), p, rng),
            None => normal(m1, v1, rng),
        };
    }
}

/// Metropolis-Hastings move that reflects the final-passage scale about
/// `ρ_β`: `β_{i,1} ↦ 2ρ_β - β_{i,1}` for non-bridges and, for final-passage
/// bills, `α_j ↦ -α_j`, `μ_j ↦ μ_j + 2ρ_β α_j`. The map is a volume-preserving
/// involution that leaves every non-bridge linear predictor unchanged, so the
/// acceptance ratio involves only the bridges' final-passage cells and the
/// prior of `μ`. It lets a chain leave a mode in which the two scales point
/// in opposite directions. Returns whether the move was accepted.
pub fn reflect_final_passage<R: Rng + ?Sized>(
    model: &PolicyModel,
    state: &mut PolicyState,
    sign_anchor: Option<&AnchorSpec>,
    rng: &mut R,
) -> bool {
    if let Some(spec) = sign_anchor {
        let s = spec.sign_legislator;
        if !state.ideal.zeta[s] {
            if let Some(pivot) = identify::origin_preimage(&state.ideal.beta0, spec) {
                let b1 = 2.0 * state.hyper.rho_beta - state.ideal.beta1[s];
                if (state.ideal.beta0[s] >= pivot) != (b1 >= pivot) {
                    return false;
                }
            }
        }
    }
    let delta = reflection_log_ratio(model, state);
    if delta < 0.0 && rng.random::<f64>().ln() >= delta {
        return false;
    }
    apply_reflection(model, state);
    true
}

fn reflection_log_ratio(model: &PolicyModel, state: &PolicyState) -> f64 {
    let h = state.hyper;
    let nj = model.n_bills();
    let mut delta = 0.0;
    for j in (0..nj).filter(|j| model.types.get(*j) == Domain::FinalPassage) {
        let (mu, alpha) = (state.bills.mu[j], state.bills.alpha[j]);
        if alpha == 0.0 {
            continue;
        }
        let mu_new = mu + 2.0 * h.rho_beta * alpha;
        delta += normal_lpdf(mu_new, h.rho_mu, h.kappa2_mu) - normal_lpdf(mu, h.rho_mu, h.kappa2_mu);
        for i in (0..model.n_legislators()).filter(|i| state.ideal.zeta[*i]) {
            if !model.included(i, j) {
                continue;
            }
            let y = state.augment.y[i * nj + j];
            let b = state.ideal.beta0[i];
            delta += bernoulli_logit_lpmf(y, mu_new - alpha * b) - bernoulli_logit_lpmf(y, mu + alpha * b);
        }
    }
    delta
}

fn apply_reflection(model: &PolicyModel, state: &mut PolicyState) {
    let rho = state.hyper.rho_beta;
    for j in (0..model.n_bills()).filter(|j| model.types.get(*j) == Domain::FinalPassage) {
        let alpha = state.bills.alpha[j];
        if alpha != 0.0 {
            state.bills.mu[j] += 2.0 * rho * alpha;
            state.bills.alpha[j] = -alpha;
        }
    }
    for i in 0..model.n_legislators() {
        if !state.ideal.zeta[i] {
            state.ideal.beta1[i] = 2.0 * rho - state.ideal.beta1[i];
        }
    }
}

/// Conjugate updates of all policy hyperparameters.
pub fn update_policy_hyper<R: Rng + ?Sized>(model: &PolicyModel, state: &mut PolicyState, rng: &mut R) {
    let pr = model.priors;
    let h = &mut state.hyper;

    let mu = &state.bills.mu;
    h.rho_mu = normal_mean_given(&pr.rho_mu, mu, h.kappa2_mu, rng);
    h.kappa2_mu = variance_given(&pr.kappa2_mu, mu, h.rho_mu, rng);

    let active: Vec<f64> = state
        .bills
        .alpha
        .iter()
        .zip(&state.bills.alpha_active)
        .filter(|(_, on)| **on)
        .map(|(a, _)| *a)
        .collect();
    h.kappa2_alpha = variance_given(&pr.kappa2_alpha, &active, 0.0, rng);
    let n_inactive = state.bills.alpha.len() - active.len();
    h.omega_alpha = beta(pr.omega_alpha.a + n_inactive as f64, pr.omega_alpha.b + active.len() as f64, rng);

    let points = distinct_ideal_points(&state.ideal);
    h.rho_beta = normal_mean_given(&pr.rho_beta, &points, h.sigma2_beta, rng);
    h.sigma2_beta = variance_given(&pr.sigma2_beta, &points, h.rho_beta, rng);
}

/// One value per bridge and two per non-bridge.
pub fn distinct_ideal_points(ideal: &IdealPoints) -> Vec<f64> {
    let mut pts = Vec::with_capacity(2 * ideal.zeta.len());
    for i in 0..ideal.zeta.len() {
        pts.push(ideal.beta0[i]);
        if !ideal.zeta[i] {
            pts.push(ideal.beta1[i]);
        }
    }
    pts
}

fn normal_mean_given<R: Rng + ?Sized>(prior: &NormalPrior, xs: &[f64], var: f64, rng: &mut R) -> f64 {
    let prec = 1.0 / prior.var + xs.len() as f64 / var;
    let lin = prior.mean / prior.var + xs.iter().sum::<f64>() / var;
    normal(lin / prec, 1.0 / prec, rng)
}

fn variance_given<R: Rng + ?Sized>(prior: &InvGammaPrior, xs: &[f64], center: f64, rng: &mut R) -> f64 {
    let ss: f64 = xs.iter().map(|x| (x - center) * (x - center)).sum();
    inv_gamma(prior.shape + 0.5 * xs.len() as f64, prior.scale + 0.5 * ss, rng)
}

/// Log of the unnormalised joint density of the policy block: observed-cell
/// likelihood, bill and ideal-point priors, the bridge indicators' Bernoulli
/// prior with log-odds `bridge_log_odds`, and the hyperpriors.
pub fn log_joint(model: &PolicyModel, state: &PolicyState, bridge_log_odds: &[f64]) -> f64 {
    log_likelihood(model.votes, model.types, state) + log_prior(model.priors, state, bridge_log_odds)
}

/// Observed-cell log-likelihood.
pub fn log_likelihood(votes: &VoteMatrix, types: &VoteTypeVector, state: &PolicyState) -> f64 {
    let nj = votes.n_bills();
    let mut ll = 0.0;
    for i in 0..votes.n_legislators() {
        for j in 0..nj {
            if let Some(y) = votes.get(i, j).observed() {
                ll += bernoulli_logit_lpmf(y, state.linear_predictor(types, i, j));
            }
        }
    }
    ll
}

fn log_prior(pr: &PolicyPriors, state: &PolicyState, bridge_log_odds: &[f64]) -> f64 {
    let h = &state.hyper;
    let mut lp = 0.0;
    for &m in &state.bills.mu {
        lp += normal_lpdf(m, h.rho_mu, h.kappa2_mu);
    }
    for (&a, &on) in state.bills.alpha.iter().zip(&state.bills.alpha_active) {
        lp += if on {
            (-h.omega_alpha).ln_1p() + normal_lpdf(a, 0.0, h.kappa2_alpha)
        } else {
            h.omega_alpha.ln()
        };
    }
    let ideal = &state.ideal;
    for i in 0..ideal.zeta.len() {
        lp += normal_lpdf(ideal.beta0[i], h.rho_beta, h.sigma2_beta);
        if ideal.zeta[i] {
            lp += log_logistic(bridge_log_odds[i]);
        } else {
            lp += normal_lpdf(ideal.beta1[i], h.rho_beta, h.sigma2_beta);
            lp += log_logistic(-bridge_log_odds[i]);
        }
    }
    lp += normal_lpdf(h.rho_mu, pr.rho_mu.mean, pr.rho_mu.var);
    lp += inv_gamma_lpdf(h.kappa2_mu, pr.kappa2_mu.shape, pr.kappa2_mu.scale);
    lp += (pr.omega_alpha.a - 1.0) * h.omega_alpha.ln() + (pr.omega_alpha.b - 1.0) * (-h.omega_alpha).ln_1p()
        - ln_beta(pr.omega_alpha.a, pr.omega_alpha.b);
    lp += inv_gamma_lpdf(h.kappa2_alpha, pr.kappa2_alpha.shape, pr.kappa2_alpha.scale);
    lp += normal_lpdf(h.rho_beta, pr.rho_beta.mean, pr.rho_beta.var);
    lp += inv_gamma_lpdf(h.sigma2_beta, pr.sigma2_beta.shape, pr.sigma2_beta.scale);
    lp
}

#[inline]
fn kappa_of(y: bool) -> f64 {
    if y {
        0.5
    } else {
        -0.5
    }
}

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    Normal::new(mean, var.sqrt()).expect("finite normal parameters").sample(rng)
}

pub(crate) fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / scale).expect("positive gamma parameters").sample(rng);
    1.0 / g.max(f64::MIN_POSITIVE)
}

fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(ni: usize, nj: usize, missing: bool) -> (VoteMatrix, VoteTypeVector) {
        let ids = (0..ni).map(|i| format!("L{i}")).collect();
        let bills = (0..nj).map(|j| format!("B{j}")).collect();
        let cell = if missing { Vote::Missing } else { Vote::Yea };
        let votes = VoteMatrix::new_unchecked(ids, bills, vec![cell; ni * nj]).unwrap();
        let codes: Vec<u8> = (0..nj).map(|j| (j % 2) as u8).collect();
        (votes, VoteTypeVector::from_codes(&codes).unwrap())
    }

    fn state(ni: usize, nj: usize) -> PolicyState {
        PolicyState {
            bills: BillParams {
                mu: vec![0.0; nj],
                alpha: vec![1.0; nj],
                alpha_active: vec![true; nj],
            },
            ideal: IdealPoints {
                beta0: vec![0.0; ni],
                beta1: vec![0.0; ni],
                zeta: vec![false; ni],
            },
            hyper: PolicyPriors::default().prior_means(),
            augment: PolicyAugment {
                nu: vec![1.0; ni * nj],
                y: vec![true; ni * nj],
            },
        }
    }

    #[test]
    fn vote_probability_cases() {
        assert_eq!(vote_probability(0.0, 0.0, 7.3), 0.5);
        assert!((vote_probability(0.0, 1.0, 3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(vote_probability(1000.0, 0.0, 0.0), 1.0);
        assert_eq!(vote_probability(-1000.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn imputation_frequency_and_observed_cells() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let bills = vec!["x".to_string(), "y".to_string()];
        let votes = VoteMatrix::new_unchecked(ids, bills, vec![Vote::Missing, Vote::Nay, Vote::Missing, Vote::Yea]).unwrap();
        let types = VoteTypeVector::from_codes(&[0, 1]).unwrap();
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(2, 2);
        s.reset_observed(&votes);
        s.bills.mu = vec![0.0, 0.0];
        s.bills.alpha = vec![1.0, 1.0];
        s.ideal.beta0 = vec![0.0, 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let (mut c0, mut c1) = (0, 0);
        for _ in 0..n {
            impute_missing(&model, &mut s, &mut rng);
            c0 += s.augment.y[0] as usize;
            c1 += s.augment.y[2] as usize;
            assert!(!s.augment.y[1] && s.augment.y[3]);
        }
        assert!((c0 as f64 / n as f64 - 0.5).abs() < 0.01 * 1.5);
        let p4 = 4f64.exp() / (1.0 + 4f64.exp());
        assert!((c1 as f64 / n as f64 - p4).abs() < 0.005);
    }

    #[test]
    fn gaussian_conditional_examples() {
        // I=2, ν=(1,1), z - αβ = (2, 0), prior N(0, 1): N(2/3, 1/3).
        let (m, v) = gaussian_conditional(0.0, 1.0, 2.0, 2.0);
        assert!((m - 2.0 / 3.0).abs() < 1e-15 && (v - 1.0 / 3.0).abs() < 1e-15);
        // I=1, ν=1, z - αβ = 0: N(0, 1/2).
        assert_eq!(gaussian_conditional(0.0, 1.0, 1.0, 0.0), (0.0, 0.5));
        // No data: the prior.
        assert_eq!(gaussian_conditional(0.3, 2.0, 0.0, 0.0), (0.3, 2.0));
    }

    #[test]
    fn mu_update_samples_its_conditional() {
        let (votes, types) = fixture(2, 2, false);
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(2, 2);
        s.bills.alpha = vec![0.0; 2];
        s.bills.alpha_active = vec![false; 2];
        s.hyper.rho_mu = 0.0;
        s.hyper.kappa2_mu = 1.0;
        s.augment.nu = vec![0.25, 1.0, 1.0, 1.0];
        // Column 0 has ν = (0.25, 1) and κ = (0.5, 0.5): Σν = 1.25, Σνz = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                update_mu(&model, &mut s, &mut rng);
                s.bills.mu[0]
            })
            .collect();
        let var = 1.0 / (1.0 + 1.25);
        let mean = var * 1.0;
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / n as f64;
        assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt());
        assert!((v - var).abs() < 0.01);
    }

    #[test]
    fn alpha_spike_odds_single_cell() {
        let c = alpha_conditional(1.0, 3.0, 0.5, 1.0);
        assert!((c.var - 0.5).abs() < 1e-15);
        assert!((c.mean - 1.5).abs() < 1e-15);
        let odds = c.spike_log_odds.exp();
        assert!((odds - 2f64.sqrt() * (-2.25f64).exp()).abs() < 1e-12);
        assert!((odds - 0.1490).abs() < 1e-4);
        assert!((logistic(c.spike_log_odds) - 0.1297).abs() < 1e-4);
    }

    #[test]
    fn alpha_spike_odds_match_numeric_integration() {
        // Marginal likelihood under the slab, integrated on a fine grid, versus
        // the spike likelihood (α = 0), for one cell with ν = 1, β = 1, κ - νμ = 3.
        let (a, b, kappa2) = (1.0, 3.0, 1.0);
        let h = 1e-4;
        let slab: f64 = (-200_000..=200_000)
            .map(|k| {
                let x = k as f64 * h;
                normal_lpdf(x, 0.0, kappa2).exp() * (-0.5 * a * x * x + b * x).exp()
            })
            .sum::<f64>()
            * h;
        let odds_numeric = 1.0 / slab;
        let c = alpha_conditional(a, b, 0.5, kappa2);
        assert!((c.spike_log_odds - odds_numeric.ln()).abs() < 1e-8);
    }

    #[test]
    fn alpha_prior_limits() {
        let c = alpha_conditional(0.0, 0.0, 0.3, 2.0);
        assert!((logistic(c.spike_log_odds) - 0.3).abs() < 1e-15);
        let c = alpha_conditional(5.0, 1.0, 0.0, 2.0);
        assert_eq!(logistic(c.spike_log_odds), 0.0);
    }

    #[test]
    fn zeta_odds_reduce_to_prior_without_data() {
        let stats = LegislatorStats::default();
        for lo in [-2.0, 0.0, 1.3] {
            assert!((zeta_log_odds(&stats, lo, 0.7, 2.0) - lo).abs() < 1e-15);
        }
        assert_eq!(logistic(zeta_log_odds(&stats, f64::INFINITY, 0.0, 1.0)), 1.0);
    }

    #[test]
    fn beta_single_bill_conditional() {
        let (m, v) = beta_conditional(1.0, 2.0, 0.0, 1.0);
        assert!((m - 1.0).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bridges_share_bit_identical_points() {
        let (votes, types) = fixture(4, 4, false);
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(4, 4);
        s.ideal.zeta = vec![true, false, true, false];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            update_beta(&model, &mut s, None, &mut rng);
            s.check_invariants().unwrap();
        }
        assert_ne!(s.ideal.beta0[1], s.ideal.beta1[1]);
    }

    #[test]
    fn sign_legislator_stays_on_one_side_of_origin() {
        let (votes, types) = fixture(4, 6, false);
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(4, 6);
        s.bills.alpha = vec![1.0, -1.0, 0.5, 2.0, -0.3, 1.0];
        s.ideal.beta0 = vec![-1.0, 1.0, 0.2, -0.4];
        s.ideal.beta1 = s.ideal.beta0.clone();
        let spec = AnchorSpec {
            anchor_low: 0,
            anchor_high: 1,
            anchor_values: (-1.0, 1.0),
            sign_legislator: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            update_beta(&model, &mut s, Some(&spec), &mut rng);
            let p = identify::origin_preimage(&s.ideal.beta0, &spec).unwrap();
            assert_eq!(s.ideal.beta0[2] >= p, s.ideal.beta1[2] >= p);
        }
    }

    #[test]
    fn hyper_counts_for_omega() {
        // J = 10 with 4 active: ω ~ Beta(7, 5), mean 7/12.
        let (votes, types) = fixture(3, 10, false);
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(3, 10);
        s.bills.alpha_active = (0..10).map(|j| j < 4).collect();
        s.bills.alpha = (0..10).map(|j| if j < 4 { 0.5 } else { 0.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40_000;
        let mut m = 0.0;
        for _ in 0..n {
            update_policy_hyper(&model, &mut s, &mut rng);
            m += s.hyper.omega_alpha;
        }
        assert!((m / n as f64 - 7.0 / 12.0).abs() < 0.005);
    }

    #[test]
    fn inactive_alpha_hyper_is_prior() {
        // With no active bills κ²_α ~ IG(2, 1): P(κ² ≤ 1) = 2/e.
        let (votes, types) = fixture(3, 4, false);
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(3, 4);
        s.bills.alpha = vec![0.0; 4];
        s.bills.alpha_active = vec![false; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 40_000;
        let below = (0..n)
            .filter(|_| {
                update_policy_hyper(&model, &mut s, &mut rng);
                s.hyper.kappa2_alpha <= 1.0
            })
            .count();
        assert!((below as f64 / n as f64 - 2.0 / std::f64::consts::E).abs() < 0.01);
    }

    #[test]
    fn distinct_points_count_bridges_once() {
        let ideal = IdealPoints {
            beta0: vec![1.0, 2.0, 3.0],
            beta1: vec![1.0, 5.0, 3.0],
            zeta: vec![true, false, true],
        };
        assert_eq!(distinct_ideal_points(&ideal), vec![1.0, 2.0, 5.0, 3.0]);
    }

    #[test]
    fn log_likelihood_is_reflection_symmetric() {
        let (votes, types) = fixture(3, 4, false);
        let mut s = state(3, 4);
        s.bills.mu = vec![0.0; 4];
        s.bills.alpha = vec![0.4, -1.2, 2.0, 0.1];
        s.ideal.beta0 = vec![-0.3, 0.5, 1.5];
        s.ideal.beta1 = vec![0.9, -0.2, 1.5];
        let before = log_likelihood(&votes, &types, &s);
        for a in s.bills.alpha.iter_mut() {
            *a = -*a;
        }
        for b in s.ideal.beta0.iter_mut().chain(s.ideal.beta1.iter_mut()) {
            *b = -*b;
        }
        assert!((log_likelihood(&votes, &types, &s) - before).abs() < 1e-12);
    }

    #[test]
    fn missing_cells_excluded_without_imputation() {
        let (votes, types) = fixture(3, 4, true);
        let priors = PolicyPriors::default();
        let mut model = PolicyModel::new(&votes, &types, &priors);
        model.impute = false;
        let s = state(3, 4);
        let st = LegislatorStats::collect(&model, &s, 0);
        assert_eq!(st, LegislatorStats::default());
    }

    #[test]
    fn final_passage_reflection_ratio_and_involution() {
        let (ni, nj) = (6, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cells: Vec<Vote> = (0..ni * nj).map(|_| if rng.random::<bool>() { Vote::Yea } else { Vote::Nay }).collect();
        let ids = (0..ni).map(|i| format!("L{i}")).collect();
        let bills = (0..nj).map(|j| format!("B{j}")).collect();
        let votes = VoteMatrix::new_unchecked(ids, bills, cells).unwrap();
        let codes: Vec<u8> = (0..nj).map(|j| (j % 2) as u8).collect();
        let types = VoteTypeVector::from_codes(&codes).unwrap();
        let priors = PolicyPriors::default();
        let model = PolicyModel::new(&votes, &types, &priors);
        let mut s = state(ni, nj);
        s.reset_observed(&votes);
        s.hyper.rho_beta = 0.4;
        s.hyper.rho_mu = -0.3;
        s.ideal.zeta = vec![true, false, true, false, false, true];
        for i in 0..ni {
            s.ideal.beta0[i] = normal(0.0, 1.0, &mut rng);
            s.ideal.beta1[i] = if s.ideal.zeta[i] { s.ideal.beta0[i] } else { normal(0.0, 1.0, &mut rng) };
        }
        for j in 0..nj {
            s.bills.mu[j] = normal(0.0, 1.0, &mut rng);
            s.bills.alpha[j] = normal(0.0, 1.0, &mut rng);
        }
        s.bills.alpha[3] = 0.0;
        s.bills.alpha_active[3] = false;
        let odds = vec![0.2; ni];
        let before = s.clone();
        let ratio = reflection_log_ratio(&model, &s);
        apply_reflection(&model, &mut s);
        let diff = log_joint(&model, &s, &odds) - log_joint(&model, &before, &odds);
        assert!((ratio - diff).abs() < 1e-10, "{ratio} vs {diff}");
        for i in (0..ni).filter(|i| !before.ideal.zeta[*i]) {
            for j in 0..nj {
                let (a, b) = (s.linear_predictor(&types, i, j), before.linear_predictor(&types, i, j));
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(s.bills.alpha[3], 0.0);
        apply_reflection(&model, &mut s);
        for j in 0..nj {
            assert!((s.bills.mu[j] - before.bills.mu[j]).abs() < 1e-12);
            assert_eq!(s.bills.alpha[j], before.bills.alpha[j]);
        }
        for i in 0..ni {
            assert!((s.ideal.beta1[i] - before.ideal.beta1[i]).abs() < 1e-12);
        }
    }
}
