//! Correlated Rayleigh channel realizations, pilot reception and MMSE
//! channel estimation under pilot contamination.
//!
//! Channels are drawn per coherence block as h = F z with F a PSD factor of
//! the spatial correlation matrix and z standard complex Gaussian. Pilot
//! despreading and the MMSE estimator follow the standard cell-free model:
//! the received pilot at AP l on pilot t sums the pilot-sharing UEs' channels
//! plus noise, and the estimate applies tau_p-scaled correlation matrices
//! against the pilot correlation matrix Psi.

use crate::linalg::{psd_factor, CMatrix, CholeskyFactor, C64};
use crate::netgen::NetworkRealization;
use crate::pilots::PilotPlan;
use crate::rng::{self, stream};
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;

/// Materialized channel realizations for a set of trials.
///
/// Layout: `[((trial * K + ue) * L + ap) * N ..][N]`. Big experiment runs
/// never materialize this; the receiver streams trials instead. Both paths
/// share the per-trial kernels below, so a materialized batch is bit-equal
/// to the streamed draws for the same seed.
#[derive(Clone, Debug)]
pub struct ChannelBatch {
    pub trials: usize,
    pub num_ues: usize,
    pub num_aps: usize,
    pub antennas: usize,
    pub trial_seed_base: u64,
    data: Vec<C64>,
}

impl ChannelBatch {
    #[inline]
    pub fn channel(&self, trial: usize, ue: usize, ap: usize) -> &[C64] {
        let n = self.antennas;
        let idx = ((trial * self.num_ues + ue) * self.num_aps + ap) * n;
        &self.data[idx..idx + n]
    }
}

/// PSD factors F_kl with F F^H = R_kl, one per UE-AP pair.
pub(crate) fn sqrt_factors(net: &NetworkRealization) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(net.num_ues * net.num_aps);
    for ue in 0..net.num_ues {
        for ap in 0..net.num_aps {
            out.push(psd_factor(net.corr(ue, ap)));
        }
    }
    out
}

/// Draws one trial of channels for every UE-AP pair into `out` (same layout
/// as one batch trial). Draw order is fixed: UE-major, then AP.
pub(crate) fn draw_trial_channels(
    factors: &[CMatrix],
    num_ues: usize,
    num_aps: usize,
    antennas: usize,
    rng: &mut ChaCha8Rng,
    out: &mut [C64],
) {
    debug_assert_eq!(out.len(), num_ues * num_aps * antennas);
    let mut z = vec![C64::new(0.0, 0.0); antennas];
    for ue in 0..num_ues {
        for ap in 0..num_aps {
            for zi in z.iter_mut() {
                *zi = rng::complex_gaussian(rng);
            }
            let dst = ((ue * num_aps) + ap) * antennas;
            factors[ue * num_aps + ap].mul_vec(&z, &mut out[dst..dst + antennas]);
        }
    }
}

/// RNG for the channel draws of one trial.
pub(crate) fn trial_channel_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    rng::derive_rng(seed, &[stream::CHANNEL, trial as u64])
}

/// RNG for the pilot-phase noise of one trial.
pub(crate) fn trial_pilot_noise_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    rng::derive_rng(seed, &[stream::PILOT_NOISE, trial as u64])
}

/// Draws `trials` independent channel realizations. Each trial derives its
/// own RNG stream from `(seed, trial)`, so any single trial can be
/// reproduced in isolation.
pub fn draw_channels(net: &NetworkRealization, trials: usize, seed: u64) -> ChannelBatch {
    let (k, l, n) = (net.num_ues, net.num_aps, net.antennas);
    let factors = sqrt_factors(net);
    let mut data = vec![C64::new(0.0, 0.0); trials * k * l * n];
    for trial in 0..trials {
        let mut rng = trial_channel_rng(seed, trial);
        let base = trial * k * l * n;
        draw_trial_channels(&factors, k, l, n, &mut rng, &mut data[base..base + k * l * n]);
    }
    ChannelBatch {
        trials,
        num_ues: k,
        num_aps: l,
        antennas: n,
        trial_seed_base: seed,
        data,
    }
}

/// Deterministic second-order statistics of the pilot phase: the pilot
/// correlation matrices Psi per (pilot, AP), the estimate covariances B and
/// the error covariances C per UE-AP pair, with B + C = R.
#[derive(Clone, Debug)]
pub struct EstimationStats {
    pub tau_p: usize,
    pub num_ues: usize,
    pub num_aps: usize,
    pub antennas: usize,
    psi: Vec<CMatrix>,
    psi_chol: Vec<Option<CholeskyFactor>>,
    b: Vec<CMatrix>,
    c: Vec<CMatrix>,
}

impl EstimationStats {
    #[inline]
    pub fn psi(&self, pilot: usize, ap: usize) -> &CMatrix {
        &self.psi[pilot * self.num_aps + ap]
    }

    #[inline]
    pub(crate) fn psi_solver(&self, pilot: usize, ap: usize) -> &CholeskyFactor {
        self.psi_chol[pilot * self.num_aps + ap]
            .as_ref()
            .expect("Psi factor exists for every occupied pilot")
    }

    /// Estimate covariance B_kl.
    #[inline]
    pub fn estimate_cov(&self, ue: usize, ap: usize) -> &CMatrix {
        &self.b[ue * self.num_aps + ap]
    }

    /// Error covariance C_kl = R_kl - B_kl.
    #[inline]
    pub fn error_cov(&self, ue: usize, ap: usize) -> &CMatrix {
        &self.c[ue * self.num_aps + ap]
    }
}

/// Psi_tl = sum_{i: t_i = t} tau_p q_i R_il + sigma^2 I,
/// B_kl = tau_p q_k R_kl Psi^{-1} R_kl, C_kl = R_kl - B_kl.
pub fn compute_estimation_stats(
    net: &NetworkRealization,
    plan: &PilotPlan,
    pilot_powers: &[f64],
    noise: f64,
) -> EstimationStats {
    let (k_count, l_count, n) = (net.num_ues, net.num_aps, net.antennas);
    let tau_p = plan.tau_p;
    assert_eq!(plan.num_ues(), k_count);
    assert_eq!(pilot_powers.len(), k_count);

    let mut psi = Vec::with_capacity(tau_p * l_count);
    for t in 0..tau_p {
        for l in 0..l_count {
            let mut m = CMatrix::zeros(n, n);
            for &i in &plan.sharing[t] {
                m.add_scaled(net.corr(i, l), tau_p as f64 * pilot_powers[i]);
            }
            m.add_diagonal(noise);
            psi.push(m);
        }
    }
    // Factor Psi only for pilots somebody transmits on; an unused pilot's
    // Psi is sigma^2 I and can even be all-zero in noiseless tests.
    let psi_chol: Vec<Option<CholeskyFactor>> = psi
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            if plan.sharing[idx / l_count].is_empty() {
                None
            } else {
                Some(
                    CholeskyFactor::new(m)
                        .expect("Psi is positive definite for sigma^2 > 0 and PSD R"),
                )
            }
        })
        .collect();

    let mut b = Vec::with_capacity(k_count * l_count);
    let mut c = Vec::with_capacity(k_count * l_count);
    for ue in 0..k_count {
        let t = plan.pilot_of(ue);
        for ap in 0..l_count {
            let r = net.corr(ue, ap);
            let solver = psi_chol[t * l_count + ap]
                .as_ref()
                .expect("the UE's own pilot is occupied");
            let solved = solver.solve_mat(r);
            let mut bm = r.mul(&solved);
            bm.scale(tau_p as f64 * pilot_powers[ue]);
            let mut cm = r.clone();
            cm.add_scaled(&bm, -1.0);
            b.push(bm);
            c.push(cm);
        }
    }

    EstimationStats {
        tau_p,
        num_ues: k_count,
        num_aps: l_count,
        antennas: n,
        psi,
        psi_chol,
        b,
        c,
    }
}

/// Trial-independent estimator matrices E_kl = sqrt(tau_p q_k) R_kl
/// Psi_{t_k l}^{-1}, so that hhat = E y. R is recovered as B + C.
pub(crate) fn estimator_matrix(
    stats: &EstimationStats,
    plan: &PilotPlan,
    pilot_powers: &[f64],
    ue: usize,
    ap: usize,
) -> CMatrix {
    let mut r = stats.estimate_cov(ue, ap).clone();
    r.add_scaled(stats.error_cov(ue, ap), 1.0);
    let t = plan.pilot_of(ue);
    // (Psi^{-1} R)^H = R Psi^{-1} since both factors are Hermitian.
    let mut e = stats.psi_solver(t, ap).solve_mat(&r).conj_transpose();
    e.scale((stats.tau_p as f64 * pilot_powers[ue]).sqrt());
    e
}

/// Received pilot signals for one trial: for every (pilot, AP) pair,
/// y_tl = sum_{i on pilot t} sqrt(tau_p q_i) h_il + noise. Layout
/// `[(t * L + l) * N ..]`. Noise is drawn pilot-major after the signal sum,
/// in a fixed order.
pub(crate) fn pilot_signals_for_trial(
    h_trial: &[C64],
    plan: &PilotPlan,
    pilot_powers: &[f64],
    num_aps: usize,
    antennas: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
    y_out: &mut [C64],
) {
    let tau_p = plan.tau_p;
    debug_assert_eq!(y_out.len(), tau_p * num_aps * antennas);
    y_out.fill(C64::new(0.0, 0.0));
    for (i, &t) in plan.assignments.iter().enumerate() {
        let scale = (tau_p as f64 * pilot_powers[i]).sqrt();
        for ap in 0..num_aps {
            let src = (i * num_aps + ap) * antennas;
            let dst = (t * num_aps + ap) * antennas;
            for a in 0..antennas {
                y_out[dst + a] += h_trial[src + a] * scale;
            }
        }
    }
    let sigma = noise.sqrt();
    for y in y_out.iter_mut() {
        *y += rng::complex_gaussian(rng) * sigma;
    }
}

/// Materialized MMSE channel estimates, same layout as [`ChannelBatch`].
#[derive(Clone, Debug)]
pub struct ChannelEstimates {
    pub trials: usize,
    pub num_ues: usize,
    pub num_aps: usize,
    pub antennas: usize,
    data: Vec<C64>,
}

impl ChannelEstimates {
    #[inline]
    pub fn estimate(&self, trial: usize, ue: usize, ap: usize) -> &[C64] {
        let n = self.antennas;
        let idx = ((trial * self.num_ues + ue) * self.num_aps + ap) * n;
        &self.data[idx..idx + n]
    }
}

/// MMSE estimates for every trial and UE-AP pair of a materialized batch.
/// Pilot noise derives from `(seed, trial)` streams.
pub fn estimate_channels(
    batch: &ChannelBatch,
    stats: &EstimationStats,
    plan: &PilotPlan,
    pilot_powers: &[f64],
    noise: f64,
    seed: u64,
) -> Result<ChannelEstimates> {
    let (k_count, l_count, n) = (batch.num_ues, batch.num_aps, batch.antennas);
    if plan.num_ues() != k_count || stats.num_aps != l_count {
        return Err(Error::InvalidConfig(
            "batch, plan and stats disagree on dimensions".into(),
        ));
    }
    let estimators: Vec<CMatrix> = (0..k_count)
        .flat_map(|ue| {
            (0..l_count).map(move |ap| estimator_matrix(stats, plan, pilot_powers, ue, ap))
        })
        .collect();

    let mut data = vec![C64::new(0.0, 0.0); batch.trials * k_count * l_count * n];
    let mut y = vec![C64::new(0.0, 0.0); plan.tau_p * l_count * n];
    for trial in 0..batch.trials {
        let h_base = trial * k_count * l_count * n;
        let h_trial = &batch.data[h_base..h_base + k_count * l_count * n];
        let mut noise_rng = trial_pilot_noise_rng(seed, trial);
        pilot_signals_for_trial(
            h_trial,
            plan,
            pilot_powers,
            l_count,
            n,
            noise,
            &mut noise_rng,
            &mut y,
        );
        for ue in 0..k_count {
            let t = plan.pilot_of(ue);
            for ap in 0..l_count {
                let src = (t * l_count + ap) * n;
                let dst = h_base + (ue * l_count + ap) * n;
                estimators[ue * l_count + ap].mul_vec(&y[src..src + n], &mut data[dst..dst + n]);
            }
        }
    }
    Ok(ChannelEstimates {
        trials: batch.trials,
        num_ues: k_count,
        num_aps: l_count,
        antennas: n,
        data,
    })
}
