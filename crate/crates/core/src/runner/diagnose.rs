//! Between-chain convergence checks over the monitored quantities.

use serde::Serialize;

use super::draws::ChainDraws;
use super::rhat::gelman_rubin;
use crate::error::{Error, Result};

/// Scalars that track the identification bookkeeping rather than the
/// posterior; they are cumulative and not expected to be stationary.
const BOOKKEEPING: [&str; 2] = ["transform_shift", "transform_scale"];

/// Per-element quantities included alongside the scalars.
const VECTORS: [&str; 3] = ["bridge_predictor", "beta0", "beta1"];

/// R̂ of one monitored series. `rhat` is infinite when every chain is
/// constant but the chains disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhatEntry {
    pub quantity: String,
    pub element: Option<usize>,
    pub rhat: f64,
}

impl RhatEntry {
    pub fn label(&self) -> String {
        match self.element {
            Some(k) => format!("{}[{k}]", self.quantity),
            None => self.quantity.clone(),
        }
    }
}

fn series_rhat(series: &[Vec<f64>]) -> Result<Option<f64>> {
    match gelman_rubin(series) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Degenerate(_)) => {
            let first = series[0][0];
            if series.iter().flatten().all(|v| *v == first) {
                Ok(None)
            } else {
                Ok(Some(f64::INFINITY))
            }
        }
        Err(e) => Err(e),
    }
}

/// R̂ for every monitored scalar: the log joint, number of bridges, model
/// size, `η_0`, policy hyperparameters, and each legislator's bridge
/// predictor and ideal points when stored. Series that are one identical
/// constant in every chain carry no information and are skipped.
pub fn monitored_rhat(chains: &[ChainDraws]) -> Result<Vec<RhatEntry>> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidData("no chains to diagnose".into()))?;
    let mut out = Vec::new();
    for q in &first.quantities {
        let scalar = q.width() == 1 && !BOOKKEEPING.contains(&q.name.as_str());
        let vector = VECTORS.contains(&q.name.as_str());
        if !scalar && !vector {
            continue;
        }
        let per_chain = chains.iter().map(|c| c.require(&q.name)).collect::<Result<Vec<_>>>()?;
        for k in 0..q.width() {
            let series: Vec<Vec<f64>> = per_chain.iter().map(|c| c.element(k)).collect();
            if let Some(rhat) = series_rhat(&series)? {
                out.push(RhatEntry {
                    quantity: q.name.clone(),
                    element: vector.then_some(k),
                    rhat,
                });
            }
        }
    }
    Ok(out)
}

/// Largest R̂ among `entries`, if any.
pub fn worst(entries: &[RhatEntry]) -> Option<&RhatEntry> {
    entries.iter().max_by(|a, b| a.rhat.total_cmp(&b.rhat))
}
