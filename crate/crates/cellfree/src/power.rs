//! Scalable fractional power control for the data phase.
//!
//! Each UE scales its transmit power by the aggregate large-scale gain of
//! its serving APs raised to -theta, normalized so the weakest UE transmits
//! at full power. theta = 0 is equal power allocation; theta = 1 compresses
//! the received-power spread the hardest. Pilots always go at full power.

use crate::access::ServiceMap;
use crate::{Error, Result};
use serde::Serialize;

/// Per-UE data transmit powers under fractional power control.
#[derive(Clone, Debug, Serialize)]
pub struct PowerPolicy {
    pub theta: f64,
    /// Maximum UE transmit power in watts.
    pub max_power: f64,
    /// Scaling eta = min_i (sum of serving gains of i)^theta.
    pub eta: f64,
    /// Data powers in watts, one per UE.
    pub powers: Vec<f64>,
}

/// Aggregate serving gain sum_{l in M_k} beta_kl per UE.
fn aggregate_gains(beta: &[f64], map: &ServiceMap) -> Result<Vec<f64>> {
    (0..map.num_ues)
        .map(|k| {
            if map.ap_sets[k].is_empty() {
                return Err(Error::EmptyServingSet(k));
            }
            Ok(map.ap_sets[k]
                .iter()
                .map(|&l| beta[k * map.num_aps + l])
                .sum())
        })
        .collect()
}

/// p_k = eta / (sum_{l in M_k} beta_kl)^theta * p_bar with
/// eta = min_i (sum_{l in M_i} beta_il)^theta.
pub fn fractional_power(
    beta: &[f64],
    map: &ServiceMap,
    theta: f64,
    p_bar: f64,
) -> Result<PowerPolicy> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig("theta must lie in [0, 1]".into()));
    }
    if !(p_bar > 0.0) {
        return Err(Error::InvalidConfig("p_bar must be positive".into()));
    }
    let aggregates = aggregate_gains(beta, map)?;
    let eta = aggregates
        .iter()
        .map(|g| g.powf(theta))
        .fold(f64::INFINITY, f64::min);
    let powers = aggregates
        .iter()
        .map(|g| (eta / g.powf(theta) * p_bar).min(p_bar))
        .collect();
    Ok(PowerPolicy {
        theta,
        max_power: p_bar,
        eta,
        powers,
    })
}

/// Large-scale SIR per UE: desired power weighted by the squared aggregate
/// serving gain against the gain-weighted interference from every other UE.
/// A lone UE gets +inf.
pub fn large_scale_sir(beta: &[f64], map: &ServiceMap, powers: &[f64]) -> Vec<f64> {
    let l_count = map.num_aps;
    (0..map.num_ues)
        .map(|k| {
            let agg: f64 = map.ap_sets[k]
                .iter()
                .map(|&l| beta[k * l_count + l])
                .sum();
            let mut interference = 0.0;
            for i in 0..map.num_ues {
                if i == k {
                    continue;
                }
                let cross: f64 = map.ap_sets[k]
                    .iter()
                    .map(|&l| beta[k * l_count + l] * beta[i * l_count + l])
                    .sum();
                interference += powers[i] * cross;
            }
            if interference == 0.0 {
                f64::INFINITY
            } else {
                powers[k] * agg * agg / interference
            }
        })
        .collect()
}
