//! Click simulation under a position-bias/noise user model, and RandPair
//! swap perturbation of logged impressions.
//!
//! Both operations take an explicit RNG stream; callers own stream
//! partitioning, and nothing here touches global random state.

use rand::Rng;
use thiserror::Error;

use crate::model::{ClickVector, Impression};

#[derive(Debug, Error, PartialEq)]
pub enum ClickError {
    #[error("impression has {got} docs but {labels} labels")]
    LabelMismatch { got: usize, labels: usize },

    #[error("invalid click model config: {0}")]
    BadConfig(String),

    #[error("impressions of length {0} cannot be swapped (need K >= 2)")]
    ListTooShort(usize),
}

/// User model: examination decays as `(1/k)^eta` with rank, a relevant item
/// clicks with probability `eps_plus` once examined, an irrelevant one with
/// `eps_minus`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickModelConfig {
    pub eta: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub seed: u64,
}

impl ClickModelConfig {
    pub fn validate(&self) -> Result<(), ClickError> {
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(ClickError::BadConfig("eta must be finite and >= 0".into()));
        }
        for (name, v) in [("eps_plus", self.eps_plus), ("eps_minus", self.eps_minus)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ClickError::BadConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.eps_plus < self.eps_minus {
            return Err(ClickError::BadConfig(
                "eps_plus must be >= eps_minus".into(),
            ));
        }
        Ok(())
    }
}

/// RandPair settings: `percent` of impressions (in expectation) receive one
/// uniform adjacent swap.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapConfig {
    pub percent: f64,
    pub seed: u64,
}

impl SwapConfig {
    pub fn validate(&self) -> Result<(), ClickError> {
        if !(0.0..=100.0).contains(&self.percent) {
            return Err(ClickError::BadConfig("B must lie in [0, 100]".into()));
        }
        Ok(())
    }
}

/// Simulates clicks on one impression. `labels[i]` is the binary relevance
/// of the document at rank `i + 1`. Rank `k` is examined with probability
/// `(1/k)^eta`; an examined document is clicked with probability `eps_plus`
/// when relevant and `eps_minus` otherwise. Two uniforms are drawn per rank
/// regardless of the outcome, so the stream layout is fixed.
pub fn simulate_clicks<R: Rng>(
    impression: &Impression,
    labels: &[u8],
    cfg: &ClickModelConfig,
    rng: &mut R,
) -> Result<ClickVector, ClickError> {
    cfg.validate()?;
    if labels.len() != impression.len() {
        return Err(ClickError::LabelMismatch {
            got: impression.len(),
            labels: labels.len(),
        });
    }

    let mut clicks = Vec::with_capacity(impression.len());
    for (i, &label) in labels.iter().enumerate() {
        let rank = (i + 1) as f64;
        let examine_p = (1.0 / rank).powf(cfg.eta);
        let u_examine: f64 = rng.gen();
        let u_click: f64 = rng.gen();
        let p_click = if label > 0 { cfg.eps_plus } else { cfg.eps_minus };
        let clicked = u_examine < examine_p && u_click < p_click;
        clicks.push(u8::from(clicked));
    }
    Ok(ClickVector(clicks))
}

/// Applies RandPair perturbation: each impression is independently selected
/// with probability `percent/100`, and a selected impression gets exactly one
/// swap of adjacent positions k and k+1 with k uniform over 1..K-1.
pub fn apply_randpair<R: Rng>(
    impressions: &[Impression],
    cfg: &SwapConfig,
    rng: &mut R,
) -> Result<Vec<Impression>, ClickError> {
    cfg.validate()?;
    let p_select = cfg.percent / 100.0;
    let mut out = Vec::with_capacity(impressions.len());
    for imp in impressions {
        let selected = p_select > 0.0 && rng.gen::<f64>() < p_select;
        if !selected {
            out.push(imp.clone());
            continue;
        }
        if imp.len() < 2 {
            return Err(ClickError::ListTooShort(imp.len()));
        }
        let mut swapped = imp.clone();
        let k0 = rng.gen_range(0..imp.len() - 1); // 0-based left position
        swapped.docs.swap(k0, k0 + 1);
        out.push(swapped);
    }
    Ok(out)
}
