//! Identifiability enforcement applied after each sweep: minimum bridge
//! count, orientation of the two scales, and the anchor affine map.

use serde::{Deserialize, Serialize};

use crate::data::AnchorSpec;
use crate::ideal_points::PolicyState;

/// Minimum number of bridges needed to link the two scales (`d + 1`).
pub const MIN_BRIDGES: usize = 2;

pub fn check_min_bridges(zeta: &[bool]) -> bool {
    zeta.iter().filter(|z| **z).count() >= MIN_BRIDGES
}

/// Affine map `β ↦ (β - shift) / scale` sending the anchors to their targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub shift: f64,
    pub scale: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { shift: 0.0, scale: 1.0 };

    /// Solves for the map taking `beta0[anchor_low]` and `beta0[anchor_high]`
    /// to `anchor_values`. `None` when the anchors coincide.
    pub fn from_anchors(beta0: &[f64], spec: &AnchorSpec) -> Option<AffineMap> {
        let (lo, hi) = (beta0[spec.anchor_low], beta0[spec.anchor_high]);
        let (v_lo, v_hi) = spec.anchor_values;
        let scale = (hi - lo) / (v_hi - v_lo);
        if scale == 0.0 || !scale.is_finite() {
            return None;
        }
        Some(AffineMap {
            shift: lo - scale * v_lo,
            scale,
        })
    }

    #[inline]
    pub fn apply(&self, beta: f64) -> f64 {
        (beta - self.shift) / self.scale
    }
}

/// The point of the current scale that the anchor map sends to zero.
pub fn origin_preimage(beta0: &[f64], spec: &AnchorSpec) -> Option<f64> {
    AffineMap::from_anchors(beta0, spec).map(|m| m.shift)
}

/// Diagnostics accumulated over a chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentifyReport {
    pub min_bridge_violations: u64,
    pub reflections_applied: u64,
    pub transforms_skipped: u64,
}

/// Global reflection: negate every ideal point and discrimination when the
/// anchors are ordered against their targets. Returns whether it fired.
pub fn align_signs(state: &mut PolicyState, spec: &AnchorSpec) -> bool {
    let b = &state.ideal.beta0;
    let current = b[spec.anchor_high] - b[spec.anchor_low];
    let target = spec.anchor_values.1 - spec.anchor_values.0;
    if current * target >= 0.0 {
        return false;
    }
    for v in state.ideal.beta0.iter_mut().chain(state.ideal.beta1.iter_mut()) {
        *v = -*v;
    }
    for a in state.bills.alpha.iter_mut() {
        if *a != 0.0 {
            *a = -*a;
        }
    }
    true
}

/// Maps ideal points onto the anchored scale and compensates the bill
/// parameters so every linear predictor `μ_j + α_j β` is unchanged.
/// Returns `None`, leaving the state untouched, when the anchors coincide.
pub fn anchor_transform(state: &mut PolicyState, spec: &AnchorSpec) -> Option<AffineMap> {
    let map = AffineMap::from_anchors(&state.ideal.beta0, spec)?;
    for v in state.ideal.beta0.iter_mut().chain(state.ideal.beta1.iter_mut()) {
        *v = map.apply(*v);
    }
    state.ideal.beta0[spec.anchor_low] = spec.anchor_values.0;
    state.ideal.beta0[spec.anchor_high] = spec.anchor_values.1;
    for i in [spec.anchor_low, spec.anchor_high] {
        if state.ideal.zeta[i] {
            state.ideal.beta1[i] = state.ideal.beta0[i];
        }
    }
    for (mu, alpha) in state.bills.mu.iter_mut().zip(state.bills.alpha.iter_mut()) {
        if *alpha != 0.0 {
            *mu += map.shift * *alpha;
            *alpha *= map.scale;
        }
    }
    Some(map)
}
