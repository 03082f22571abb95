//! Chain initialization, the sweep schedule, multi-chain execution and
//! run-directory I/O.

pub mod config;
pub mod diagnose;
pub mod draws;
pub mod rhat;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{self, BridgeState};
use crate::data::{AnchorSpec, Dataset};
use crate::error::{Error, Result};
use crate::identify::{self, AffineMap, IdentifyReport};
use crate::ideal_points::{
    self as policy, normal, BillParams, IdealPoints, PolicyAugment, PolicyModel, PolicyPriors, PolicyState,
};
use crate::math::logistic;

pub use config::{AnchorConfig, MonitorConfig, RunConfig};
pub use diagnose::{monitored_rhat, RhatEntry};
pub use draws::{ChainDraws, Quantity};
pub use rhat::gelman_rubin;

/// Full sampler state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub policy: PolicyState,
    pub bridge: BridgeState,
    /// Map applied by the last identification step (reflection included).
    pub transform: AffineMap,
}

/// Switches for the parts of a sweep that are not plain Gibbs/MH updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub identify: bool,
    pub min_bridges: bool,
    pub sign_constraint: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            identify: true,
            min_bridges: true,
            sign_constraint: true,
        }
    }
}

impl SweepOptions {
    /// Plain Gibbs/MH sweep targeting the unconstrained posterior.
    pub const UNCONSTRAINED: SweepOptions = SweepOptions {
        identify: false,
        min_bridges: false,
        sign_constraint: false,
    };
}

/// Counters accumulated over a chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub sweeps: u64,
    pub identify: IdentifyReport,
    pub eta0_accepted: u64,
    pub model_moves: u64,
    pub model_accepted: u64,
    /// Accepted final-passage reflection moves.
    pub domain_reflections: u64,
}

/// Read-only inputs of the sweep.
#[derive(Debug, Clone, Copy)]
pub struct Sampler<'a> {
    pub data: &'a Dataset,
    pub priors: &'a PolicyPriors,
    pub anchors: Option<&'a AnchorSpec>,
    pub impute: bool,
    pub options: SweepOptions,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, priors: &'a PolicyPriors, anchors: Option<&'a AnchorSpec>) -> Self {
        Self {
            data,
            priors,
            anchors,
            impute: true,
            options: SweepOptions::default(),
        }
    }

    pub fn policy_model(&self) -> PolicyModel<'a> {
        PolicyModel {
            votes: &self.data.votes,
            types: &self.data.types,
            priors: self.priors,
            impute: self.impute,
        }
    }

    /// Over-dispersed starting state: `β ~ N(0, 4)`, `ζ ~ Bernoulli(½)`,
    /// `μ_j` at the logit of the clipped observed yea share, `α ~ N(0, 1)`,
    /// `ξ ~ Bernoulli(½)`, `η = 0`, `η_0 = 0`, hyperparameters at their
    /// prior means.
    pub fn initialize<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let d = self.data;
        let (ni, nj, p) = (d.n_legislators(), d.n_bills(), d.n_covariates());
        let mut zeta: Vec<bool> = (0..ni).map(|_| rng.random::<bool>()).collect();
        while self.options.min_bridges && !identify::check_min_bridges(&zeta) {
            zeta = (0..ni).map(|_| rng.random::<bool>()).collect();
        }
        let beta0: Vec<f64> = (0..ni).map(|_| normal(0.0, 4.0, rng)).collect();
        let beta1 = (0..ni)
            .map(|i| if zeta[i] { beta0[i] } else { normal(0.0, 4.0, rng) })
            .collect();
        let mu = (0..nj)
            .map(|j| {
                let r = d.votes.yea_rate(j).unwrap_or(0.5).clamp(0.05, 0.95);
                (r / (1.0 - r)).ln()
            })
            .collect();
        let alpha = (0..nj).map(|_| normal(0.0, 1.0, rng)).collect();
        let mut policy = PolicyState {
            bills: BillParams {
                mu,
                alpha,
                alpha_active: vec![true; nj],
            },
            ideal: IdealPoints { beta0, beta1, zeta },
            hyper: self.priors.prior_means(),
            augment: PolicyAugment {
                nu: vec![0.25; ni * nj],
                y: Vec::new(),
            },
        };
        policy.reset_observed(&d.votes);
        let mut bridge = BridgeState::new(ni, p);
        bridge.xi = (0..p).map(|_| rng.random::<bool>()).collect();
        ChainState {
            policy,
            bridge,
            transform: AffineMap::IDENTITY,
        }
    }

    /// One full sweep: missing votes, policy latents, `μ`, `α`, `ζ`, `β`, the
    /// final-passage reflection move, identification, policy hyperparameters, then the bridge regression.
    pub fn sweep<R: Rng + ?Sized>(&self, s: &mut ChainState, stats: &mut ChainStats, rng: &mut R) -> Result<()> {
        let model = self.policy_model();
        let x = self.data.covariates.matrix();

        policy::impute_missing(&model, &mut s.policy, rng);
        policy::draw_policy_pg(&model, &mut s.policy, rng)?;
        policy::update_mu(&model, &mut s.policy, rng);
        policy::update_alpha(&model, &mut s.policy, rng);

        let log_odds = s.bridge.linear_predictors(x);
        let previous = self.options.min_bridges.then(|| s.policy.ideal.zeta.clone());
        policy::update_zeta(&model, &mut s.policy, &log_odds, rng);
        if let Some(prev) = previous {
            if !identify::check_min_bridges(&s.policy.ideal.zeta) {
                s.policy.ideal.zeta = prev;
                stats.identify.min_bridge_violations += 1;
            }
        }
        let sign = if self.options.sign_constraint { self.anchors } else { None };
        policy::update_beta(&model, &mut s.policy, sign, rng);
        if policy::reflect_final_passage(&model, &mut s.policy, sign, rng) {
            stats.domain_reflections += 1;
        }

        s.transform = AffineMap::IDENTITY;
        if let (true, Some(spec)) = (self.options.identify, self.anchors) {
            if identify::align_signs(&mut s.policy, spec) {
                stats.identify.reflections_applied += 1;
                s.transform = AffineMap { shift: 0.0, scale: -1.0 };
            }
            match identify::anchor_transform(&mut s.policy, spec) {
                Some(m) => {
                    s.transform = AffineMap {
                        shift: s.transform.scale * m.shift,
                        scale: s.transform.scale * m.scale,
                    }
                }
                None => stats.identify.transforms_skipped += 1,
            }
        }
        policy::update_policy_hyper(&model, &mut s.policy, rng);

        bridge::draw_bridge_pg(&mut s.bridge, x, rng)?;
        if bridge::update_eta0(&mut s.bridge, &s.policy.ideal.zeta, x, rng) {
            stats.eta0_accepted += 1;
        }
        if !s.bridge.xi.is_empty() {
            stats.model_moves += 1;
            if bridge::update_model(&mut s.bridge, &s.policy.ideal.zeta, x, rng)? {
                stats.model_accepted += 1;
            }
        }

        stats.sweeps += 1;
        s.policy.check_invariants()?;
        s.bridge.check_invariants()
    }

    /// Unnormalized log posterior of the full model at `s`.
    pub fn log_joint(&self, s: &ChainState) -> Result<f64> {
        let x = self.data.covariates.matrix();
        let log_odds = s.bridge.linear_predictors(x);
        Ok(policy::log_joint(&self.policy_model(), &s.policy, &log_odds) + bridge::log_prior(&s.bridge, x)?)
    }
}

/// Random stream of chain `chain` under `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Indices into [`ChainDraws::quantities`] for the recorder.
struct Recorder {
    ideal: bool,
    bills: bool,
    predictors: bool,
}

impl Recorder {
    fn declare(monitor: &MonitorConfig, data: &Dataset, n_kept: usize, chain: usize) -> (Self, ChainDraws) {
        let (ni, nj, p) = (data.n_legislators(), data.n_bills(), data.n_covariates());
        let mut d = ChainDraws::new(chain);
        for name in SCALARS {
            d.declare(name, vec![1], n_kept);
        }
        d.declare("zeta", vec![ni], n_kept);
        d.declare("xi", vec![p], n_kept);
        d.declare("eta", vec![p], n_kept);
        if monitor.ideal_points {
            d.declare("beta0", vec![ni], n_kept);
            d.declare("beta1", vec![ni], n_kept);
        }
        if monitor.bill_params {
            d.declare("mu", vec![nj], n_kept);
            d.declare("alpha", vec![nj], n_kept);
        }
        if monitor.bridge_predictors {
            d.declare("bridge_predictor", vec![ni], n_kept);
        }
        let rec = Recorder {
            ideal: monitor.ideal_points,
            bills: monitor.bill_params,
            predictors: monitor.bridge_predictors,
        };
        (rec, d)
    }

    fn record(&self, d: &mut ChainDraws, s: &ChainState, log_joint: f64, x: &nalgebra::DMatrix<f64>) {
        let h = &s.policy.hyper;
        let flag = |b: &bool| if *b { 1.0 } else { 0.0 };
        let scalars = [
            log_joint,
            s.policy.ideal.n_bridges() as f64,
            s.bridge.model_size() as f64,
            s.bridge.eta0,
            h.rho_mu,
            h.kappa2_mu,
            h.omega_alpha,
            h.kappa2_alpha,
            h.rho_beta,
            h.sigma2_beta,
            s.transform.shift,
            s.transform.scale,
        ];
        let mut k = 0;
        for v in scalars {
            d.push(k, [v]);
            k += 1;
        }
        d.push(k, s.policy.ideal.zeta.iter().map(flag));
        d.push(k + 1, s.bridge.xi.iter().map(flag));
        d.push(k + 2, s.bridge.eta.iter().copied());
        k += 3;
        if self.ideal {
            d.push(k, s.policy.ideal.beta0.iter().copied());
            d.push(k + 1, s.policy.ideal.beta1.iter().copied());
            k += 2;
        }
        if self.bills {
            d.push(k, s.policy.bills.mu.iter().copied());
            d.push(k + 1, s.policy.bills.alpha.iter().copied());
            k += 2;
        }
        if self.predictors {
            d.push(k, s.bridge.linear_predictors(x));
        }
    }
}

/// Scalar quantities stored for every kept draw, in file order.
pub const SCALARS: [&str; 12] = [
    "log_joint",
    "n_bridges",
    "model_size",
    "eta0",
    "rho_mu",
    "kappa2_mu",
    "omega_alpha",
    "kappa2_alpha",
    "rho_beta",
    "sigma2_beta",
    "transform_shift",
    "transform_scale",
];

/// Per-chain bookkeeping written to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: usize,
    pub seed: u64,
    pub stream: u64,
    pub runtime_seconds: f64,
    pub stats: ChainStats,
    pub eta0_acceptance: f64,
    pub model_acceptance: Option<f64>,
    pub n_draws: usize,
    pub file: String,
}

/// Runs one chain with the stream derived from `(config.seed, chain)`.
pub fn run_chain(
    data: &Dataset,
    anchors: Option<&AnchorSpec>,
    config: &RunConfig,
    chain: usize,
) -> Result<(ChainDraws, ChainSummary)> {
    config.validate()?;
    let start = Instant::now();
    let mut sampler = Sampler::new(data, &config.priors, anchors);
    sampler.impute = config.impute_missing;
    let mut rng = chain_rng(config.seed, chain);
    let mut state = sampler.initialize(&mut rng);
    let mut stats = ChainStats::default();
    let (rec, mut draws) = Recorder::declare(&config.monitor, data, config.n_kept, chain);
    let x = data.covariates.matrix();

    for sweep in 1..=config.total_sweeps() {
        let step = sampler.sweep(&mut state, &mut stats, &mut rng).and_then(|_| {
            let kept = sweep > config.n_burnin && (sweep - config.n_burnin) % config.thin == 0;
            if kept {
                let lj = sampler.log_joint(&state)?;
                if !lj.is_finite() {
                    return Err(Error::Numeric(format!("log joint is {lj}")));
                }
                rec.record(&mut draws, &state, lj, x);
            }
            Ok(())
        });
        if let Err(e) = step {
            return Err(Error::Chain {
                chain,
                sweep: sweep as u64,
                snapshot: serde_json::to_string(&state).ok(),
                source: Box::new(e),
            });
        }
    }
    draws.check_lengths(config.n_kept)?;
    let summary = ChainSummary {
        chain,
        seed: config.seed,
        stream: chain as u64,
        runtime_seconds: start.elapsed().as_secs_f64(),
        eta0_acceptance: stats.eta0_accepted as f64 / stats.sweeps.max(1) as f64,
        model_acceptance: (stats.model_moves > 0).then(|| stats.model_accepted as f64 / stats.model_moves as f64),
        stats,
        n_draws: config.n_kept,
        file: draw_file_name(chain),
    };
    Ok((draws, summary))
}

/// Runs every chain, concurrently on the current rayon pool. Results do not
/// depend on scheduling.
pub fn run_chains(
    data: &Dataset,
    anchors: Option<&AnchorSpec>,
    config: &RunConfig,
) -> Result<Vec<(ChainDraws, ChainSummary)>> {
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(data, anchors, config, c))
        .collect()
}

pub fn draw_file_name(chain: usize) -> String {
    format!("chain_{chain}.draws")
}

/// Legislator-facing description of the anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub anchor_low: String,
    pub anchor_high: String,
    pub anchor_values: (f64, f64),
    pub sign_legislator: String,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub legislator_ids: Vec<String>,
    pub bill_ids: Vec<String>,
    pub bill_types: Vec<u8>,
    pub covariate_names: Vec<String>,
    pub covariate_offsets: Vec<f64>,
    pub anchors: Option<AnchorRecord>,
    pub chains: Vec<ChainSummary>,
}

impl Manifest {
    pub fn new(data: &Dataset, anchors: Option<&AnchorSpec>, config: &RunConfig, chains: Vec<ChainSummary>) -> Self {
        let ids = data.votes.legislator_ids();
        Self {
            format_version: 1,
            config: config.clone(),
            legislator_ids: ids.to_vec(),
            bill_ids: data.votes.bill_ids().to_vec(),
            bill_types: data.types.codes(),
            covariate_names: data.covariates.column_names().to_vec(),
            covariate_offsets: data.covariates.offsets().to_vec(),
            anchors: anchors.map(|a| AnchorRecord {
                anchor_low: ids[a.anchor_low].clone(),
                anchor_high: ids[a.anchor_high].clone(),
                anchor_values: a.anchor_values,
                sign_legislator: ids[a.sign_legislator].clone(),
            }),
            chains,
        }
    }
}

/// Writes every chain's draws and the manifest into `dir`.
pub fn write_run(
    dir: &Path,
    data: &Dataset,
    anchors: Option<&AnchorSpec>,
    config: &RunConfig,
    results: &[(ChainDraws, ChainSummary)],
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (draws, summary) in results {
        draws.write(&dir.join(&summary.file))?;
    }
    let manifest = Manifest::new(data, anchors, config, results.iter().map(|(_, s)| s.clone()).collect());
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads the manifest and every chain's draws from a run directory.
pub fn load_run(dir: &Path) -> Result<(Manifest, Vec<ChainDraws>)> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?;
    let draws = manifest
        .chains
        .iter()
        .map(|c| ChainDraws::read(&dir.join(&c.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, draws))
}

/// Probability that a legislator is a bridge under the stored predictors.
pub fn bridge_probabilities(draws: &ChainDraws) -> Option<Vec<f64>> {
    let q = draws.get("bridge_predictor")?;
    Some(q.values.iter().map(|v| logistic(*v)).collect())
}
