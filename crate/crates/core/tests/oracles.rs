//! Samplers checked against independent numerical oracles: quadrature,
//! dense linear algebra, exhaustive enumeration and direct summation.

use bridgeirt::bridge::{self, draw_eta_given_model, update_eta0, update_model, BridgeState, WorkingResponse};
use bridgeirt::data::{Vote, VoteMatrix, VoteTypeVector};
use bridgeirt::ideal_points::{
    self as policy, BillParams, IdealPoints, PolicyAugment, PolicyHyper, PolicyModel, PolicyPriors, PolicyState,
};
use bridgeirt::oracle::{self, dense_eta_moments, exact_model_posterior, quadrature_1d, quadrature_2d, Grid, Scenario};
use bridgeirt::runner::{run_chain, ChainDraws, RunConfig};
use bridgeirt::summary::compute_pip;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, Continuous, InverseGamma, Normal};

fn batch_mean_se(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    let b = (n as f64).sqrt() as usize;
    let per = n / b;
    let means: Vec<f64> = (0..b).map(|k| series[k * per..(k + 1) * per].iter().sum::<f64>() / per as f64).collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    (series.iter().sum::<f64>() / n as f64, (var / b as f64).sqrt())
}

fn centered_design(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    for mut c in x.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    x
}

fn smoke_state() -> (bridgeirt::oracle::SyntheticTruth, PolicyState) {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let truth = oracle::generate(&Scenario::smoke(), &mut rng).unwrap();
    let state = truth.policy_state();
    (truth, state)
}

#[test]
fn kappa2_mu_conditional_matches_quadrature() {
    // Closed form: with every μ_j at ρ_μ the conditional is IG(2 + J/2, 1).
    let j = 40.0;
    let q = quadrature_1d(Grid::new(1e-4, 1.0, 20_001), |k| {
        InverseGamma::new(2.0, 1.0).unwrap().ln_pdf(k) + j * Normal::new(0.0, k.sqrt()).unwrap().ln_pdf(0.0)
    })
    .unwrap();
    assert!((q.mean - 1.0 / (1.0 + j / 2.0)).abs() < 1e-8, "{}", q.mean);

    // The sampler alternates ρ_μ and κ²_μ given μ ≡ 0; its κ²_μ marginal is
    // checked against 2-d quadrature of the joint conditional.
    let (truth, mut state) = smoke_state();
    let priors = PolicyPriors::default();
    let model = PolicyModel::new(&truth.dataset.votes, &truth.dataset.types, &priors);
    state.bills.mu.iter_mut().for_each(|m| *m = 0.0);
    let nj = state.bills.mu.len() as f64;
    let (_, rho_mean, kappa_mean) = quadrature_2d(Grid::new(-0.6, 0.6, 601), Grid::new(1e-3, 0.4, 801), |r, k| {
        Normal::new(0.0, 1.0).unwrap().ln_pdf(r)
            + InverseGamma::new(2.0, 1.0).unwrap().ln_pdf(k)
            + nj * Normal::new(r, k.sqrt()).unwrap().ln_pdf(0.0)
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 40_000;
    let mut kappa = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for _ in 0..n {
        policy::update_policy_hyper(&model, &mut state, &mut rng);
        kappa.push(state.hyper.kappa2_mu);
        rho.push(state.hyper.rho_mu);
    }
    let (km, kse) = batch_mean_se(&kappa);
    let (rm, rse) = batch_mean_se(&rho);
    assert!((km - kappa_mean).abs() < 3.0 * kse, "κ² {km} ± {kse} vs {kappa_mean}");
    assert!((rm - rho_mean).abs() < 3.0 * rse, "ρ {rm} ± {rse} vs {rho_mean}");
}

#[test]
fn log_joint_matches_direct_summation() {
    let votes = VoteMatrix::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec!["p1".into(), "f1".into(), "p2".into(), "f2".into()],
        vec![
            Vote::Yea, Vote::Nay, Vote::Missing, Vote::Yea,
            Vote::Nay, Vote::Nay, Vote::Yea, Vote::Missing,
            Vote::Yea, Vote::Yea, Vote::Nay, Vote::Nay,
        ],
    )
    .unwrap();
    let types = VoteTypeVector::from_codes(&[0, 1, 0, 1]).unwrap();
    let priors = PolicyPriors::default();
    let model = PolicyModel::new(&votes, &types, &priors);
    let state = PolicyState {
        bills: BillParams {
            mu: vec![0.3, -0.2, 1.1, 0.0],
            alpha: vec![1.4, 0.0, -0.7, 2.0],
            alpha_active: vec![true, false, true, true],
        },
        ideal: IdealPoints {
            beta0: vec![-0.8, 0.4, 1.2],
            beta1: vec![-0.8, -0.5, 1.2],
            zeta: vec![true, false, true],
        },
        hyper: PolicyHyper {
            rho_mu: 0.1,
            kappa2_mu: 1.5,
            omega_alpha: 0.3,
            kappa2_alpha: 0.8,
            rho_beta: -0.2,
            sigma2_beta: 1.3,
        },
        augment: PolicyAugment {
            nu: vec![0.25; 12],
            y: vec![true; 12],
        },
    };
    let log_odds = [0.5, -1.0, 2.0];

    let h = state.hyper;
    let mut expected = 0.0;
    for i in 0..3 {
        for jj in 0..4 {
            let beta = if jj % 2 == 1 { state.ideal.beta1[i] } else { state.ideal.beta0[i] };
            let p = 1.0 / (1.0 + (-(state.bills.mu[jj] + state.bills.alpha[jj] * beta)).exp());
            match votes.get(i, jj) {
                Vote::Yea => expected += p.ln(),
                Vote::Nay => expected += (1.0 - p).ln(),
                Vote::Missing => {}
            }
        }
    }
    let n = |m: f64, v: f64, x: f64| Normal::new(m, v.sqrt()).unwrap().ln_pdf(x);
    for jj in 0..4 {
        expected += n(h.rho_mu, h.kappa2_mu, state.bills.mu[jj]);
        expected += if state.bills.alpha_active[jj] {
            (1.0 - h.omega_alpha).ln() + n(0.0, h.kappa2_alpha, state.bills.alpha[jj])
        } else {
            h.omega_alpha.ln()
        };
    }
    for i in 0..3 {
        let pb = 1.0 / (1.0 + (-log_odds[i] as f64).exp());
        expected += n(h.rho_beta, h.sigma2_beta, state.ideal.beta0[i]);
        if state.ideal.zeta[i] {
            expected += pb.ln();
        } else {
            expected += (1.0 - pb).ln() + n(h.rho_beta, h.sigma2_beta, state.ideal.beta1[i]);
        }
    }
    let ig = |x: f64| InverseGamma::new(2.0, 1.0).unwrap().ln_pdf(x);
    expected += n(0.0, 1.0, h.rho_mu) + ig(h.kappa2_mu) + ig(h.kappa2_alpha) + ig(h.sigma2_beta);
    expected += Beta::new(1.0, 1.0).unwrap().ln_pdf(h.omega_alpha);
    expected += n(0.0, 1.0, h.rho_beta);

    let got = policy::log_joint(&model, &state, &log_odds);
    assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
}

#[test]
fn bridge_latents_have_pg_mean_at_zero_tilt() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let x = centered_design(10, 2, &mut rng);
    let mut state = BridgeState::new(10, 2);
    let mut sum = 0.0;
    let reps = 10_000;
    for _ in 0..reps {
        bridge::draw_bridge_pg(&mut state, &x, &mut rng).unwrap();
        sum += state.nu.iter().sum::<f64>();
    }
    let mean = sum / (10 * reps) as f64;
    assert!((mean - 0.25).abs() < 0.005, "{mean}");
}

#[test]
fn intercept_mh_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let ni = 20;
    let x = centered_design(ni, 2, &mut rng);
    let mut state = BridgeState::new(ni, 2);
    state.nu = (0..ni).map(|_| 0.05 + 0.25 * rng.random::<f64>()).collect();
    state.eta = vec![0.8, 0.0];
    state.xi = vec![true, false];
    let zeta: Vec<bool> = (0..ni).map(|i| i % 3 != 0).collect();
    let offsets = bridge::linear_predictors(&x, 0.0, &state.eta);

    // Independent target: Gaussianised likelihood of every ζ_i plus the
    // standard logistic prior density.
    let target = |e: f64| {
        let mut lp = -e - 2.0 * (-e).exp().ln_1p();
        for i in 0..ni {
            let psi = e + offsets[i];
            let kappa = if zeta[i] { 0.5 } else { -0.5 };
            lp += kappa * psi - 0.5 * state.nu[i] * psi * psi;
        }
        lp
    };
    let q = quadrature_1d(Grid::new(-15.0, 15.0, 30_001), target).unwrap();

    let n = 100_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        update_eta0(&mut state, &zeta, &x, &mut rng);
        draws.push(state.eta0);
    }
    let (m, se) = batch_mean_se(&draws);
    assert!((m - q.mean).abs() < 3.0 * se, "{m} ± {se} vs {}", q.mean);
}

#[test]
fn coefficient_draws_match_dense_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let ni = 6;
    let x = centered_design(ni, 2, &mut rng);
    let nu: Vec<f64> = (0..ni).map(|_| 0.1 + 0.3 * rng.random::<f64>()).collect();
    let z: Vec<f64> = (0..ni).map(|i| if i % 2 == 0 { 2.0 } else { -1.5 } + rng.random::<f64>()).collect();
    let eta0 = 0.3;
    let g = ni as f64;
    let xi = [true, false];
    let (mean, cov) = dense_eta_moments(&xi, &nu, &z, eta0, &x, g).unwrap();
    let wr = WorkingResponse::from_z(&nu, &z, eta0);

    let n = 100_000;
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        let e = draw_eta_given_model(&xi, &wr, &x, g, &mut rng).unwrap();
        assert_eq!(e[1], 0.0);
        s.push(e[0]);
    }
    let m = s.iter().sum::<f64>() / n as f64;
    let v = s.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let (mu, var) = (mean[0], cov[(0, 0)]);
    assert!((m - mu).abs() < 3.0 * (var / n as f64).sqrt(), "mean {m} vs {mu}");
    assert!((v - var).abs() < 3.0 * var * (2.0 / n as f64).sqrt(), "var {v} vs {var}");
}

#[test]
fn model_chain_pips_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let ni = 30;
    let x = centered_design(ni, 2, &mut rng);
    let mut state = BridgeState::new(ni, 2);
    state.nu = (0..ni).map(|_| 0.1 + 0.2 * rng.random::<f64>()).collect();
    state.eta0 = 0.4;
    let zeta: Vec<bool> = (0..ni).map(|i| x[(i, 0)] + 0.3 * rng.random::<f64>() > 0.0).collect();
    let z: Vec<f64> = state.nu.iter().zip(&zeta).map(|(n, b)| (if *b { 0.5 } else { -0.5 }) / n).collect();
    let exact = exact_model_posterior(&state.nu, &z, state.eta0, &x).unwrap().pips();

    let n = 100_000;
    let mut d = ChainDraws::new(0);
    d.declare("xi", vec![2], n);
    d.declare("eta", vec![2], n);
    for _ in 0..n {
        update_model(&mut state, &zeta, &x, &mut rng).unwrap();
        d.push(0, state.xi.iter().map(|b| *b as u8 as f64));
        d.push(1, state.eta.clone());
    }
    let got = compute_pip(&[d]).unwrap();
    for (g, e) in got.iter().zip(&exact) {
        assert!((g - e).abs() < 0.02, "{got:?} vs {exact:?}");
    }
}

#[test]
fn smoke_run_keeps_the_sign_legislator_on_one_side() {
    let (truth, _) = smoke_state();
    let config = RunConfig {
        n_chains: 1,
        n_burnin: 5_000,
        n_kept: 5_000,
        thin: 1,
        seed: 47,
        ..RunConfig::default()
    };
    let (draws, summary) = run_chain(&truth.dataset, Some(&truth.anchors), &config, 0).unwrap();
    assert_eq!(summary.stats.sweeps, 10_000);
    let s = truth.anchors.sign_legislator;
    let (b0, b1) = (draws.require("beta0").unwrap(), draws.require("beta1").unwrap());
    for k in 0..draws.n_draws() {
        let (a, b) = (b0.draw(k)[s], b1.draw(k)[s]);
        assert_eq!(a.signum(), b.signum(), "draw {k}: {a} vs {b}");
    }
    let lj = draws.require("log_joint").unwrap().element(0);
    assert!(lj.iter().all(|v| v.is_finite()));
}
