//! Forward simulator for the full model and brute-force reference
//! computations used to validate the sampler.
//!
//! The reference routines here are deliberately naive: dense I×I algebra,
//! exhaustive enumeration and tensor-grid quadrature. They share no code
//! paths with the sampler's updates.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bridge::{bridge_probability, log_beta_binomial_prior};
use crate::data::{
    write_anchors, AnchorSpec, Dataset, DesignMatrix, Domain, Vote, VoteMatrix, VoteTypeVector,
};
use crate::error::{Error, Result};
use crate::ideal_points::{
    normal, BillParams, IdealPoints, PolicyAugment, PolicyHyper, PolicyState,
};
use crate::math::{logistic, LN_2PI};

/// Maximum number of covariates for exhaustive model enumeration.
pub const MAX_ENUMERATION_P: usize = 12;

/// How bridge indicators are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ZetaMode {
    /// `ζ_i ~ Bernoulli(logistic(η_0 + x_iᵀη))`.
    Regression,
    /// Every legislator gets the given indicator.
    Forced(bool),
    /// Every legislator has the given bridge probability.
    Probability(f64),
}

/// Size and effect configuration of a simulated chamber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n_legislators: usize,
    pub n_bills: usize,
    pub n_covariates: usize,
    /// Share of bills that are final-passage votes.
    pub final_passage_share: f64,
    pub missing_fraction: f64,
    /// Hyperparameters used to draw bill parameters and ideal points.
    pub hyper: PolicyHyper,
    /// Fixed coefficients; `None` draws the model and coefficients from the prior.
    pub eta: Option<Vec<f64>>,
    /// Fixed intercept; `None` draws it from the logistic prior unless
    /// `bridge_share` is set.
    pub eta0: Option<f64>,
    /// Solve for the intercept so the average bridge probability hits this value.
    pub bridge_share: Option<f64>,
    pub zeta: ZetaMode,
}

impl Scenario {
    fn base(name: &str, n_legislators: usize, n_bills: usize, eta: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            n_legislators,
            n_bills,
            n_covariates: eta.len(),
            final_passage_share: 0.5,
            missing_fraction: 0.0,
            hyper: PolicyHyper {
                rho_mu: 0.0,
                kappa2_mu: 4.0,
                omega_alpha: 0.05,
                kappa2_alpha: 4.0,
                rho_beta: 0.0,
                sigma2_beta: 1.0,
            },
            eta: Some(eta),
            eta0: None,
            bridge_share: Some(0.7),
            zeta: ZetaMode::Regression,
        }
    }

    /// 20 legislators, 40 bills, 2 covariates.
    pub fn smoke() -> Self {
        Self::base("smoke", 20, 40, vec![1.0, 0.0])
    }

    /// 100 legislators, 300 bills, one active covariate out of five, about
    /// 30% non-bridges and 5% missing votes.
    pub fn recovery() -> Self {
        let mut s = Self::base("recovery", 100, 300, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        s.missing_fraction = 0.05;
        s
    }

    /// The recovery design with every coefficient zero.
    pub fn recovery_null() -> Self {
        let mut s = Self::recovery();
        s.name = "recovery-null".into();
        s.eta = Some(vec![0.0; 5]);
        s
    }

    /// Chamber-sized instance with 21 covariates, three of them active.
    pub fn paperlike() -> Self {
        let mut eta = vec![0.0; 21];
        eta[0] = 1.0;
        eta[1] = -0.5;
        eta[2] = 0.5;
        let mut s = Self::base("paperlike", 435, 1000, eta);
        s.missing_fraction = 0.03;
        s
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "smoke" => Some(Self::smoke()),
            "recovery" => Some(Self::recovery()),
            "recovery-null" => Some(Self::recovery_null()),
            "paperlike" => Some(Self::paperlike()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 4] = ["smoke", "recovery", "recovery-null", "paperlike"];

    fn validate(&self) -> Result<()> {
        if self.n_legislators < 3 || self.n_bills < 2 {
            return Err(Error::InvalidConfig("scenario needs at least 3 legislators and 2 bills".into()));
        }
        let n_final = (self.final_passage_share * self.n_bills as f64).round() as usize;
        if n_final == 0 || n_final == self.n_bills {
            return Err(Error::InvalidConfig("scenario puts every bill in one domain".into()));
        }
        if !(0.0..0.5).contains(&self.missing_fraction) {
            return Err(Error::InvalidConfig("missing_fraction must lie in [0, 0.5)".into()));
        }
        if let Some(eta) = &self.eta {
            if eta.len() != self.n_covariates {
                return Err(Error::InvalidConfig("eta length differs from n_covariates".into()));
            }
        }
        if let ZetaMode::Probability(p) = self.zeta {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig("bridge probability must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Generating parameters together with the data they produced.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub scenario: Scenario,
    pub bills: BillParams,
    pub ideal: IdealPoints,
    pub hyper: PolicyHyper,
    pub eta0: f64,
    pub eta: Vec<f64>,
    pub xi: Vec<bool>,
    pub dataset: Dataset,
    /// Anchors whose targets are the true procedural positions, so the
    /// identified posterior lives on the generating scale.
    pub anchors: AnchorSpec,
}

#[derive(Serialize)]
struct TruthFile<'a> {
    scenario: &'a Scenario,
    hyper: &'a PolicyHyper,
    eta0: f64,
    eta: &'a [f64],
    xi: &'a [bool],
    mu: &'a [f64],
    alpha: &'a [f64],
    beta0: &'a [f64],
    beta1: &'a [f64],
    zeta: &'a [bool],
}

impl SyntheticTruth {
    /// Policy state at the generating values with observed votes copied in.
    pub fn policy_state(&self) -> PolicyState {
        let n = self.dataset.votes.cells().len();
        let mut s = PolicyState {
            bills: self.bills.clone(),
            ideal: self.ideal.clone(),
            hyper: self.hyper,
            augment: PolicyAugment {
                nu: vec![0.25; n],
                y: vec![false; n],
            },
        };
        s.reset_observed(&self.dataset.votes);
        s
    }

    /// `η_0 + x_iᵀη` at the generating values.
    pub fn bridge_log_odds(&self) -> Vec<f64> {
        crate::bridge::linear_predictors(self.dataset.covariates.matrix(), self.eta0, &self.eta)
    }

    /// Writes `votes.csv`, `types.csv`, `covariates.csv`, `anchors.json` and
    /// `truth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let d = &self.dataset;
        let ids = d.votes.legislator_ids();
        d.votes.write_wide(&dir.join("votes.csv"))?;
        d.types.write(d.votes.bill_ids(), &dir.join("types.csv"))?;
        if d.covariates.n_cols() > 0 {
            d.covariates.write(ids, &dir.join("covariates.csv"))?;
        }
        write_anchors(&self.anchors, ids, &dir.join("anchors.json"))?;
        let truth = TruthFile {
            scenario: &self.scenario,
            hyper: &self.hyper,
            eta0: self.eta0,
            eta: &self.eta,
            xi: &self.xi,
            mu: &self.bills.mu,
            alpha: &self.bills.alpha,
            beta0: &self.ideal.beta0,
            beta1: &self.ideal.beta1,
            zeta: &self.ideal.zeta,
        };
        let path = dir.join("truth.json");
        std::fs::write(&path, serde_json::to_string_pretty(&truth)? + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// Draws `(ξ, η)` from the Beta-Binomial model prior and the g-prior given `ξ`.
pub fn sample_model_prior<R: Rng + ?Sized>(x: &DMatrix<f64>, g: f64, rng: &mut R) -> Result<(Vec<bool>, Vec<f64>)> {
    let p = x.ncols();
    let size = rng.random_range(0..=p);
    let mut xi = vec![false; p];
    for k in rand::seq::index::sample(rng, p, size) {
        xi[k] = true;
    }
    let mut eta = vec![0.0; p];
    if size == 0 {
        return Ok((xi, eta));
    }
    let cols: Vec<usize> = (0..p).filter(|k| xi[*k]).collect();
    let xs = x.select_columns(cols.iter());
    let prec = (xs.transpose() * &xs) / (4.0 * g);
    let chol = prec
        .cholesky()
        .ok_or_else(|| Error::Degenerate("selected covariate columns are collinear".into()))?;
    let e = DVector::from_fn(size, |_, _| normal(0.0, 1.0, rng));
    let draw = chol
        .l()
        .transpose()
        .solve_upper_triangular(&e)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    for (k, v) in cols.iter().zip(draw.iter()) {
        eta[*k] = *v;
    }
    Ok((xi, eta))
}

/// Bill parameters from the spike-and-slab prior given hyperparameters.
pub fn sample_bills<R: Rng + ?Sized>(n_bills: usize, h: &PolicyHyper, rng: &mut R) -> BillParams {
    let mut bills = BillParams {
        mu: Vec::with_capacity(n_bills),
        alpha: Vec::with_capacity(n_bills),
        alpha_active: Vec::with_capacity(n_bills),
    };
    for _ in 0..n_bills {
        bills.mu.push(normal(h.rho_mu, h.kappa2_mu, rng));
        let active = rng.random::<f64>() >= h.omega_alpha;
        bills.alpha_active.push(active);
        bills.alpha.push(if active { normal(0.0, h.kappa2_alpha, rng) } else { 0.0 });
    }
    bills
}

/// Ideal points given bridge indicators.
pub fn sample_ideal_points<R: Rng + ?Sized>(zeta: Vec<bool>, h: &PolicyHyper, rng: &mut R) -> IdealPoints {
    let n = zeta.len();
    let mut beta0 = Vec::with_capacity(n);
    let mut beta1 = Vec::with_capacity(n);
    for &z in &zeta {
        let b0 = normal(h.rho_beta, h.sigma2_beta, rng);
        beta0.push(b0);
        beta1.push(if z { b0 } else { normal(h.rho_beta, h.sigma2_beta, rng) });
    }
    IdealPoints { beta0, beta1, zeta }
}

/// Draws every vote from its logistic probability; each cell is then
/// masked as missing with probability `missing_fraction`.
pub fn simulate_votes<R: Rng + ?Sized>(
    types: &VoteTypeVector,
    bills: &BillParams,
    ideal: &IdealPoints,
    missing_fraction: f64,
    rng: &mut R,
) -> Vec<Vote> {
    let (ni, nj) = (ideal.zeta.len(), bills.mu.len());
    let mut cells = Vec::with_capacity(ni * nj);
    for i in 0..ni {
        for j in 0..nj {
            let psi = bills.mu[j] + bills.alpha[j] * ideal.get(i, types.get(j));
            let yea = rng.random::<f64>() < logistic(psi);
            let masked = missing_fraction > 0.0 && rng.random::<f64>() < missing_fraction;
            cells.push(match (masked, yea) {
                (true, _) => Vote::Missing,
                (false, true) => Vote::Yea,
                (false, false) => Vote::Nay,
            });
        }
    }
    cells
}

fn bridge_share_intercept(lin: &[f64], share: f64) -> f64 {
    let mean_at = |e0: f64| lin.iter().map(|l| logistic(e0 + l)).sum::<f64>() / lin.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < share {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sample_logistic<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    (u / (1.0 - u)).ln()
}

/// Anchors at the 10th and 90th percentile of the true procedural points;
/// the sign legislator is the non-bridge whose two points sit furthest from
/// the origin on a common side.
fn choose_anchors(ideal: &IdealPoints) -> AnchorSpec {
    let n = ideal.beta0.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| ideal.beta0[*a].total_cmp(&ideal.beta0[*b]));
    let low = order[n / 10];
    let high = order[(9 * n) / 10];
    let margin = |i: usize| {
        let (a, b) = (ideal.beta0[i], ideal.beta1[i]);
        if a * b > 0.0 {
            a.abs().min(b.abs())
        } else {
            f64::NEG_INFINITY
        }
    };
    let candidates = (0..n).filter(|i| *i != low && *i != high);
    let sign = candidates
        .clone()
        .filter(|i| !ideal.zeta[*i])
        .max_by(|a, b| margin(*a).total_cmp(&margin(*b)))
        .filter(|i| margin(*i) > f64::NEG_INFINITY)
        .or_else(|| candidates.max_by(|a, b| margin(*a).total_cmp(&margin(*b))))
        .unwrap_or(high);
    AnchorSpec {
        anchor_low: low,
        anchor_high: high,
        anchor_values: (ideal.beta0[low], ideal.beta0[high]),
        sign_legislator: sign,
    }
}

/// Simulates a chamber from the scenario.
pub fn generate<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<SyntheticTruth> {
    scenario.validate()?;
    let (ni, nj, p) = (scenario.n_legislators, scenario.n_bills, scenario.n_covariates);
    let h = scenario.hyper;

    let covariates = if p == 0 {
        DesignMatrix::empty(ni)
    } else {
        let raw = DMatrix::from_fn(ni, p, |_, _| normal(0.0, 1.0, rng));
        DesignMatrix::from_raw(raw, (1..=p).map(|k| format!("x{k}")).collect())?
    };
    let x = covariates.matrix();

    let (xi, eta) = match &scenario.eta {
        Some(eta) => (eta.iter().map(|e| *e != 0.0).collect(), eta.clone()),
        None => sample_model_prior(x, ni as f64, rng)?,
    };
    let offsets = crate::bridge::linear_predictors(x, 0.0, &eta);
    let eta0 = match (scenario.eta0, scenario.bridge_share) {
        (Some(v), _) => v,
        (None, Some(share)) => bridge_share_intercept(&offsets, share),
        (None, None) => sample_logistic(rng),
    };

    let zeta: Vec<bool> = (0..ni)
        .map(|i| match scenario.zeta {
            ZetaMode::Regression => {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                rng.random::<f64>() < bridge_probability(eta0, &eta, &row)
            }
            ZetaMode::Forced(z) => z,
            ZetaMode::Probability(theta) => rng.random::<f64>() < theta,
        })
        .collect();
    let ideal = sample_ideal_points(zeta, &h, rng);

    let n_final = (scenario.final_passage_share * nj as f64).round() as usize;
    let mut gamma: Vec<Domain> = (0..nj)
        .map(|j| if j < n_final { Domain::FinalPassage } else { Domain::Procedural })
        .collect();
    gamma.shuffle(rng);
    let types = VoteTypeVector::new(gamma)?;
    let bills = sample_bills(nj, &h, rng);

    let cells = simulate_votes(&types, &bills, &ideal, scenario.missing_fraction, rng);
    let width = ni.to_string().len().max(3);
    let ids = (1..=ni).map(|i| format!("L{i:0width$}")).collect();
    let bill_width = nj.to_string().len().max(3);
    let bill_ids = (1..=nj).map(|j| format!("B{j:0bill_width$}")).collect();
    let votes = VoteMatrix::new(ids, bill_ids, cells)?;
    let dataset = Dataset::new(votes, types, covariates)?;
    let anchors = choose_anchors(&ideal);

    Ok(SyntheticTruth {
        scenario: scenario.clone(),
        bills,
        ideal,
        hyper: h,
        eta0,
        eta,
        xi,
        dataset,
        anchors,
    })
}

/// `log N(r; 0, Σ)` via a dense LU factorization.
fn dense_gaussian_log_density(r: &DVector<f64>, cov: DMatrix<f64>) -> Result<f64> {
    let n = r.len() as f64;
    let lu = cov.lu();
    let det = lu.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Numeric(format!("covariance determinant {det} is not positive")));
    }
    let sol = lu.solve(r).ok_or_else(|| Error::Numeric("singular covariance".into()))?;
    Ok(-0.5 * (n * LN_2PI + det.ln() + r.dot(&sol)))
}

/// Log Bayes factor of `ξ` against the null model as the ratio of two
/// marginal densities of `r = z - η_0`: `N(0, V⁻¹)` under the null and
/// `N(0, V⁻¹ + 4g X_ξ(X_ξᵀX_ξ)⁻¹X_ξᵀ)` with the coefficients integrated out.
pub fn dense_log_bayes_factor(xi: &[bool], nu: &[f64], z: &[f64], eta0: f64, x: &DMatrix<f64>, g: f64) -> Result<f64> {
    let n = nu.len();
    let r = DVector::from_iterator(n, z.iter().map(|v| v - eta0));
    let v_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, nu.iter().map(|v| 1.0 / v)));
    let null = dense_gaussian_log_density(&r, v_inv.clone())?;
    let cols: Vec<usize> = (0..xi.len()).filter(|k| xi[*k]).collect();
    if cols.is_empty() {
        return Ok(0.0);
    }
    let xs = x.select_columns(cols.iter());
    let gram_inv = (xs.transpose() * &xs)
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("selected covariate columns are collinear".into()))?;
    let cov = v_inv + (&xs * gram_inv * xs.transpose()) * (4.0 * g);
    Ok(dense_gaussian_log_density(&r, cov)? - null)
}

/// Mean and covariance of `η_ξ | ξ, ν, z, η_0` by direct inversion.
pub fn dense_eta_moments(
    xi: &[bool],
    nu: &[f64],
    z: &[f64],
    eta0: f64,
    x: &DMatrix<f64>,
    g: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let cols: Vec<usize> = (0..xi.len()).filter(|k| xi[*k]).collect();
    let xs = x.select_columns(cols.iter());
    let v = DMatrix::from_diagonal(&DVector::from_column_slice(nu));
    let r = DVector::from_iterator(nu.len(), z.iter().map(|v| v - eta0));
    let prec = xs.transpose() * &v * &xs + (xs.transpose() * &xs) / (4.0 * g);
    let cov = prec.try_inverse().ok_or_else(|| Error::Degenerate("singular coefficient precision".into()))?;
    let mean = &cov * xs.transpose() * v * r;
    Ok((mean, cov))
}

/// Posterior over all `2^p` models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPosterior {
    pub models: Vec<Vec<bool>>,
    pub probs: Vec<f64>,
}

impl ModelPosterior {
    pub fn prob(&self, xi: &[bool]) -> f64 {
        self.models.iter().position(|m| m == xi).map_or(0.0, |k| self.probs[k])
    }

    pub fn pips(&self) -> Vec<f64> {
        let p = self.models.first().map_or(0, Vec::len);
        (0..p)
            .map(|k| self.models.iter().zip(&self.probs).filter(|(m, _)| m[k]).map(|(_, q)| q).sum())
            .collect()
    }

    /// Total-variation distance to an empirical frequency table.
    pub fn total_variation(&self, freqs: &[f64]) -> f64 {
        0.5 * self.probs.iter().zip(freqs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Index of a model in the enumeration order used by [`exact_model_posterior`].
pub fn model_index(xi: &[bool]) -> usize {
    xi.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| 1usize << k).sum()
}

pub fn enumerate_models(p: usize) -> Vec<Vec<bool>> {
    (0..1usize << p).map(|c| (0..p).map(|k| c >> k & 1 == 1).collect()).collect()
}

/// Normalizes `BF(ξ)·prior(ξ)` over every model, with `g = I`.
pub fn exact_model_posterior(nu: &[f64], z: &[f64], eta0: f64, x: &DMatrix<f64>) -> Result<ModelPosterior> {
    let p = x.ncols();
    if p > MAX_ENUMERATION_P {
        return Err(Error::InvalidConfig(format!("enumeration needs p ≤ {MAX_ENUMERATION_P}, got {p}")));
    }
    let g = nu.len() as f64;
    let models = enumerate_models(p);
    let mut logs = Vec::with_capacity(models.len());
    for m in &models {
        logs.push(dense_log_bayes_factor(m, nu, z, eta0, x, g)? + log_beta_binomial_prior(m));
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(ModelPosterior {
        models,
        probs: w.into_iter().map(|v| v / total).collect(),
    })
}

/// Uniform grid on `[lo, hi]` with `n` points (`n` odd for Simpson's rule).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n: if n % 2 == 0 { n + 1 } else { n } }
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    fn point(&self, k: usize) -> f64 {
        self.lo + self.step() * k as f64
    }

    fn simpson_weight(&self, k: usize) -> f64 {
        let w = if k == 0 || k == self.n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * self.step() / 3.0
    }
}

/// Normalizing constant (on the log scale) and moments of an unnormalized density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub log_norm: f64,
    pub mean: f64,
    pub var: f64,
}

fn grid_values<F: FnMut(f64) -> f64>(grid: &Grid, mut log_f: F) -> Result<Vec<f64>> {
    (0..grid.n)
        .map(|k| {
            let v = log_f(grid.point(k));
            if v.is_nan() || v == f64::INFINITY {
                Err(Error::Numeric(format!("integrand is {v} at {}", grid.point(k))))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Simpson quadrature of `exp(log_f)` over a 1-d grid.
pub fn quadrature_1d<F: FnMut(f64) -> f64>(grid: Grid, log_f: F) -> Result<Moments> {
    let logs = grid_values(&grid, log_f)?;
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        let w = grid.simpson_weight(k) * (l - top).exp();
        let x = grid.point(k);
        z += w;
        m1 += w * x;
        m2 += w * x * x;
    }
    let mean = m1 / z;
    Ok(Moments {
        log_norm: top + z.ln(),
        mean,
        var: m2 / z - mean * mean,
    })
}

/// Tensor-product Simpson quadrature of `exp(log_f)`; returns the log
/// normalizing constant and the two marginal means.
pub fn quadrature_2d<F: FnMut(f64, f64) -> f64>(gx: Grid, gy: Grid, mut log_f: F) -> Result<(f64, f64, f64)> {
    let mut logs = Vec::with_capacity(gx.n * gy.n);
    for a in 0..gx.n {
        for b in 0..gy.n {
            let v = log_f(gx.point(a), gy.point(b));
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::Numeric(format!("integrand is {v} at ({}, {})", gx.point(a), gy.point(b))));
            }
            logs.push(v);
        }
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut mx, mut my) = (0.0, 0.0, 0.0);
    for a in 0..gx.n {
        let wa = gx.simpson_weight(a);
        for b in 0..gy.n {
            let w = wa * gy.simpson_weight(b) * (logs[a * gy.n + b] - top).exp();
            z += w;
            mx += w * gx.point(a);
            my += w * gy.point(b);
        }
    }
    Ok((top + z.ln(), mx / z, my / z))
}

/// One augmented vote cell seen by a single legislator: `ν`, `κ = y - ½`, `μ_j`, `α_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub nu: f64,
    pub kappa: f64,
    pub mu: f64,
    pub alpha: f64,
}

fn cells_log_lik(cells: &[Cell], b: f64) -> f64 {
    cells
        .iter()
        .map(|c| {
            let psi = c.mu + c.alpha * b;
            c.kappa * psi - 0.5 * c.nu * psi * psi
        })
        .sum()
}

/// `P(ζ = 1)` for one legislator given fixed augmentation, by integrating
/// the shared point (1-d) and the two separate points (2-d) numerically.
pub fn zeta_probability_quadrature(
    procedural: &[Cell],
    final_passage: &[Cell],
    prior_log_odds: f64,
    rho: f64,
    sigma2: f64,
    grid: Grid,
) -> Result<f64> {
    let prior = |b: f64| -0.5 * (LN_2PI + sigma2.ln() + (b - rho) * (b - rho) / sigma2);
    let shared = quadrature_1d(grid, |b| prior(b) + cells_log_lik(procedural, b) + cells_log_lik(final_passage, b))?;
    let (split, _, _) = quadrature_2d(grid, grid, |b0, b1| {
        prior(b0) + prior(b1) + cells_log_lik(procedural, b0) + cells_log_lik(final_passage, b1)
    })?;
    Ok(logistic(prior_log_odds + shared.log_norm - split))
}

/// `PG(1, c)` as a truncated weighted sum of exponentials:
/// `(1 / 2π²) Σ_k g_k / ((k - ½)² + c² / 4π²)`.
pub fn pg1_truncated_sum<R: Rng + ?Sized>(c: f64, terms: usize, rng: &mut R) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let shift = c * c / (4.0 * pi2);
    let mut acc = 0.0;
    for k in 1..=terms {
        let g: f64 = Exp1.sample(rng);
        let d = k as f64 - 0.5;
        acc += g / (d * d + shift);
    }
    acc / (2.0 * pi2)
}

/// Mean of the truncated series, computed term by term.
pub fn pg1_truncated_mean(c: f64, terms: usize) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let shift = c * c / (4.0 * pi2);
    (1..=terms)
        .map(|k| {
            let d = k as f64 - 0.5;
            1.0 / (d * d + shift)
        })
        .sum::<f64>()
        / (2.0 * pi2)
}

/// Area under the ROC curve of `scores` for binary `labels`, ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (s_pos, _) in scores.iter().zip(labels).filter(|(_, l)| **l) {
        for (s_neg, _) in scores.iter().zip(labels).filter(|(_, l)| !**l) {
            pairs += 1.0;
            if s_pos > s_neg {
                wins += 1.0;
            } else if s_pos == s_neg {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{log_bayes_factor, WorkingResponse};
    use crate::ideal_points::{log_likelihood, PolicyPriors};
    use crate::math::logistic_lpdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forced_bridges_share_points() {
        let mut s = Scenario::smoke();
        s.zeta = ZetaMode::Forced(true);
        let t = generate(&s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(t.ideal.zeta.iter().all(|z| *z));
        assert_eq!(t.ideal.beta0, t.ideal.beta1);
    }

    #[test]
    fn clamped_probability_makes_everyone_a_bridge() {
        let mut s = Scenario::smoke();
        s.zeta = ZetaMode::Probability(1.0);
        let t = generate(&s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(t.ideal.zeta.iter().all(|z| *z));
    }

    #[test]
    fn uninformative_bill_yea_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = generate(&Scenario::recovery(), &mut rng).unwrap();
        let nj = 300;
        let bills = BillParams {
            mu: vec![0.0; nj],
            alpha: vec![0.0; nj],
            alpha_active: vec![false; nj],
        };
        let cells = simulate_votes(&t.dataset.types, &bills, &t.ideal, 0.0, &mut rng);
        let rate = cells.iter().filter(|v| **v == Vote::Yea).count() as f64 / cells.len() as f64;
        assert!((rate - 0.5).abs() < 0.03, "{rate}");
        // A single bill's rate over 100 legislators.
        let col: Vec<_> = (0..100).map(|i| cells[i * nj]).collect();
        let r0 = col.iter().filter(|v| **v == Vote::Yea).count() as f64 / 100.0;
        assert!((r0 - 0.5).abs() < 0.2);
    }

    #[test]
    fn recovery_preset_shape() {
        let t = generate(&Scenario::recovery(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let d = &t.dataset;
        assert_eq!((d.n_legislators(), d.n_bills(), d.n_covariates()), (100, 300, 5));
        let share = t.ideal.n_bridges() as f64 / 100.0;
        assert!((0.55..0.85).contains(&share), "{share}");
        let miss = d.votes.n_missing() as f64 / 30_000.0;
        assert!((miss - 0.05).abs() < 0.01);
        assert_eq!(t.xi, vec![true, false, false, false, false]);
        let a = t.anchors;
        assert_eq!(a.anchor_values, (t.ideal.beta0[a.anchor_low], t.ideal.beta0[a.anchor_high]));
        assert!(t.ideal.beta0[a.sign_legislator] * t.ideal.beta1[a.sign_legislator] > 0.0);
    }

    #[test]
    fn degenerate_scenario_rejected() {
        let mut s = Scenario::smoke();
        s.final_passage_share = 0.0;
        assert!(generate(&s, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    }

    #[test]
    fn truth_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = generate(&Scenario::smoke(), &mut rng).unwrap();
        let priors = PolicyPriors::default();
        let model = crate::ideal_points::PolicyModel::new(&t.dataset.votes, &t.dataset.types, &priors);
        let state = t.policy_state();
        let lo = t.bridge_log_odds();
        let base = crate::ideal_points::log_joint(&model, &state, &lo);
        assert!(base.is_finite());
        let ll = log_likelihood(&t.dataset.votes, &t.dataset.types, &state);
        assert!(ll.is_finite() && ll < 0.0);
        let mut wins = 0;
        for _ in 0..100 {
            let mut s = state.clone();
            for v in s.bills.mu.iter_mut() {
                *v += normal(0.0, 1.0, &mut rng);
            }
            for v in s.ideal.beta0.iter_mut() {
                *v += normal(0.0, 1.0, &mut rng);
            }
            for i in 0..s.ideal.zeta.len() {
                if s.ideal.zeta[i] {
                    s.ideal.beta1[i] = s.ideal.beta0[i];
                }
            }
            if base > crate::ideal_points::log_joint(&model, &s, &lo) {
                wins += 1;
            }
        }
        assert!(wins >= 95, "{wins}");
    }

    fn fixture(ni: usize, p: usize, seed: u64) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(ni, p, |_, _| normal(0.0, 1.0, &mut rng));
        let x = DesignMatrix::from_raw(raw, (0..p).map(|k| format!("c{k}")).collect()).unwrap();
        let nu: Vec<f64> = (0..ni).map(|_| 0.05 + 0.3 * rng.random::<f64>()).collect();
        let z: Vec<f64> = nu.iter().map(|n| if rng.random::<bool>() { 0.5 / n } else { -0.5 / n }).collect();
        (nu, z, x.matrix().clone())
    }

    #[test]
    fn dense_and_factored_bayes_factors_agree() {
        let (nu, z, x) = fixture(6, 1, 7);
        let wr = WorkingResponse::from_z(&nu, &z, 0.3);
        let a = log_bayes_factor(&[true], &wr, &x, 6.0).unwrap();
        let b = dense_log_bayes_factor(&[true], &nu, &z, 0.3, &x, 6.0).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn enumeration_edge_cases() {
        let x = DMatrix::<f64>::zeros(5, 0);
        let post = exact_model_posterior(&[0.2; 5], &[1.0; 5], 0.0, &x).unwrap();
        assert_eq!(post.models, vec![Vec::<bool>::new()]);
        assert_eq!(post.probs, vec![1.0]);
        let big = DMatrix::<f64>::zeros(5, 13);
        assert!(exact_model_posterior(&[0.2; 5], &[1.0; 5], 0.0, &big).is_err());
    }

    #[test]
    fn duplicated_columns_get_equal_mass() {
        let (nu, z, x1) = fixture(10, 1, 8);
        let eps = 1e-7;
        let col: Vec<f64> = x1.column(0).iter().copied().collect();
        let mut x = DMatrix::zeros(10, 2);
        for i in 0..10 {
            x[(i, 0)] = col[i];
            x[(i, 1)] = col[i] * (1.0 + eps);
        }
        let post = exact_model_posterior(&nu, &z, 0.1, &x).unwrap();
        let a = post.prob(&[true, false]);
        let b = post.prob(&[false, true]);
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn enumeration_is_permutation_invariant() {
        let (nu, z, x) = fixture(12, 3, 9);
        let post = exact_model_posterior(&nu, &z, -0.2, &x).unwrap();
        let perm = [2usize, 0, 1];
        let xp = x.select_columns(perm.iter());
        let post_p = exact_model_posterior(&nu, &z, -0.2, &xp).unwrap();
        for m in &post.models {
            let mp: Vec<bool> = perm.iter().map(|k| m[*k]).collect();
            assert!((post.prob(m) - post_p.prob(&mp)).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_density_integrates_to_one() {
        let m = quadrature_1d(Grid::new(-30.0, 30.0, 100_000), logistic_lpdf).unwrap();
        assert!(m.log_norm.exp() - 1.0 < 1e-8 && 1.0 - m.log_norm.exp() < 1e-8);
        let n = quadrature_1d(Grid::new(-12.0, 12.0, 20_001), |x| -0.5 * x * x).unwrap();
        assert!(n.mean.abs() < 1e-10);
        assert!((n.var - 1.0).abs() < 1e-9);
        assert!((n.log_norm - 0.5 * LN_2PI).abs() < 1e-10);
    }

    #[test]
    fn quadrature_rejects_nan() {
        assert!(quadrature_1d(Grid::new(-1.0, 1.0, 11), |_| f64::NAN).is_err());
    }

    #[test]
    fn truncated_series_mean() {
        assert!((pg1_truncated_mean(2.0, 10_000) - 0.190_40).abs() < 1e-4);
        assert!((pg1_truncated_mean(2.0, 1_000_000) - crate::polya_gamma::pg1_mean(2.0)).abs() < 1e-7);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        assert!(pg1_truncated_sum(1.0, 100, &mut rng) > 0.0);
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.9, 0.8, 0.1], &[true, true, false]), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]), 0.0);
        assert_eq!(auc(&[0.5, 0.5], &[true, false]), 0.5);
    }
}
