//! Network geometry, large-scale fading and spatial correlation.
//!
//! A [`NetworkRealization`] fixes everything that stays constant over a
//! simulation drop: AP/UE positions on a wrap-around square, the distance and
//! large-scale gain matrices, and one Hermitian PSD spatial correlation
//! matrix per UE-AP pair.

use crate::linalg::{CMatrix, C64};
use crate::rng::{self, stream};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// AP placement in the coverage square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    /// sqrt(L) x sqrt(L) lattice, APs centered in their cells.
    Grid,
    /// APs placed uniformly at random.
    UniformRandom,
}

/// Log-distance pathloss with log-normal shadowing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathlossModel {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub shadow_std_db: f64,
}

impl Default for PathlossModel {
    fn default() -> Self {
        // Urban-microcell style constants used widely in the cell-free
        // literature: beta[dB] = -30.5 - 36.7 log10(d / 1 m), 4 dB shadowing.
        Self {
            intercept_db: -30.5,
            slope_db_per_decade: 36.7,
            shadow_std_db: 4.0,
        }
    }
}

/// Spatial correlation construction for the N-antenna uniform linear arrays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SpatialCorrelation {
    /// Gaussian local scattering around the nominal angle.
    LocalScattering { asd_degrees: f64 },
    /// R = beta * I (infinite angular spread limit).
    Uncorrelated,
}

impl Default for SpatialCorrelation {
    fn default() -> Self {
        SpatialCorrelation::LocalScattering { asd_degrees: 15.0 }
    }
}

/// Static description of a network to generate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Number of APs (L).
    pub num_aps: usize,
    /// Number of UEs (K).
    pub num_ues: usize,
    /// Antennas per AP (N).
    pub antennas_per_ap: usize,
    /// Side of the square coverage area in meters.
    pub side_length: f64,
    pub deployment: Deployment,
    pub pathloss: PathlossModel,
    pub correlation: SpatialCorrelation,
    /// Receiver noise power in dBm.
    pub noise_power_dbm: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_aps: 100,
            num_ues: 50,
            antennas_per_ap: 4,
            side_length: 500.0,
            deployment: Deployment::Grid,
            pathloss: PathlossModel::default(),
            correlation: SpatialCorrelation::default(),
            noise_power_dbm: -94.0,
            seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_aps == 0 || self.num_ues == 0 || self.antennas_per_ap == 0 {
            return Err(Error::InvalidConfig(
                "num_aps, num_ues and antennas_per_ap must all be at least 1".into(),
            ));
        }
        if !(self.side_length > 0.0) {
            return Err(Error::InvalidConfig("side_length must be positive".into()));
        }
        if self.deployment == Deployment::Grid {
            let root = (self.num_aps as f64).sqrt().round() as usize;
            if root * root != self.num_aps {
                return Err(Error::NonSquareGrid(self.num_aps));
            }
        }
        if let SpatialCorrelation::LocalScattering { asd_degrees } = self.correlation {
            if !(asd_degrees > 0.0) {
                return Err(Error::InvalidConfig(
                    "asd_degrees must be positive; use the uncorrelated model instead".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn noise_power_watts(&self) -> f64 {
        10f64.powf((self.noise_power_dbm - 30.0) / 10.0)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: NetworkConfig =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One generated network drop. Immutable after creation.
#[derive(Clone, Debug)]
pub struct NetworkRealization {
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas: usize,
    pub side_length: f64,
    /// Noise power in watts.
    pub noise_power: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Large-scale gains, row-major [k * L + l], linear scale.
    beta: Vec<f64>,
    /// Wrap-around distances in meters, row-major [k * L + l].
    distances: Vec<f64>,
    /// Spatial correlation matrices, [k * L + l], each N x N Hermitian PSD.
    corr: Vec<CMatrix>,
}

impl NetworkRealization {
    #[inline]
    pub fn beta(&self, ue: usize, ap: usize) -> f64 {
        self.beta[ue * self.num_aps + ap]
    }

    /// Gains of one UE toward every AP.
    #[inline]
    pub fn beta_row(&self, ue: usize) -> &[f64] {
        &self.beta[ue * self.num_aps..(ue + 1) * self.num_aps]
    }

    pub fn beta_matrix(&self) -> &[f64] {
        &self.beta
    }

    #[inline]
    pub fn distance(&self, ue: usize, ap: usize) -> f64 {
        self.distances[ue * self.num_aps + ap]
    }

    pub fn distance_row(&self, ue: usize) -> &[f64] {
        &self.distances[ue * self.num_aps..(ue + 1) * self.num_aps]
    }

    #[inline]
    pub fn corr(&self, ue: usize, ap: usize) -> &CMatrix {
        &self.corr[ue * self.num_aps + ap]
    }
}

/// Displacement from `from` to the wrap-around-nearest mirror image of `to`,
/// and its length. Scans the nine mirror images of the square.
pub fn wrap_displacement(from: [f64; 2], to: [f64; 2], side: f64) -> ([f64; 2], f64) {
    let mut best = [0.0, 0.0];
    let mut best_d2 = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = to[0] + sx * side - from[0];
            let dy = to[1] + sy * side - from[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = [dx, dy];
            }
        }
    }
    (best, best_d2.sqrt())
}

/// Wrap-around distance between two points of the square.
pub fn wrap_distance(a: [f64; 2], b: [f64; 2], side: f64) -> f64 {
    wrap_displacement(a, b, side).1
}

/// Gaussian local-scattering correlation matrix for a half-wavelength ULA.
///
/// Entry (m, n) is
/// `beta * exp(j pi (m - n) sin(theta)) * exp(-(asd^2 / 2) (pi (m - n) cos(theta))^2)`
/// for nominal angle `theta` and angular standard deviation `asd`, both in
/// radians. The diagonal equals `beta`, so trace/N = beta by construction.
pub fn local_scattering_corr(nominal_angle: f64, asd: f64, beta: f64, n: usize) -> CMatrix {
    debug_assert!(asd > 0.0 && beta > 0.0);
    let sin_t = nominal_angle.sin();
    let cos_t = nominal_angle.cos();
    CMatrix::from_fn(n, n, |row, col| {
        let delta = row as f64 - col as f64;
        let phase = std::f64::consts::PI * delta * sin_t;
        let spread = std::f64::consts::PI * delta * cos_t;
        let mag = beta * (-(asd * asd / 2.0) * spread * spread).exp();
        C64::new(mag * phase.cos(), mag * phase.sin())
    })
}

/// Minimum UE-AP distance in meters, guarding the pathloss singularity.
pub const MIN_DISTANCE: f64 = 1.0;

/// Generates a network drop: positions, gains and correlation matrices.
/// Deterministic given `cfg.seed`.
pub fn generate_network(cfg: &NetworkConfig) -> Result<NetworkRealization> {
    cfg.validate()?;
    let l = cfg.num_aps;
    let k = cfg.num_ues;
    let n = cfg.antennas_per_ap;
    let side = cfg.side_length;

    let mut pos_rng = rng::derive_rng(cfg.seed, &[stream::NETWORK]);
    let ap_positions: Vec<[f64; 2]> = match cfg.deployment {
        Deployment::Grid => {
            let root = (l as f64).sqrt().round() as usize;
            let spacing = side / root as f64;
            let mut pos = Vec::with_capacity(l);
            for ix in 0..root {
                for iy in 0..root {
                    pos.push([
                        (ix as f64 + 0.5) * spacing,
                        (iy as f64 + 0.5) * spacing,
                    ]);
                }
            }
            pos
        }
        Deployment::UniformRandom => (0..l)
            .map(|_| {
                [
                    rand::Rng::gen::<f64>(&mut pos_rng) * side,
                    rand::Rng::gen::<f64>(&mut pos_rng) * side,
                ]
            })
            .collect(),
    };
    let ue_positions: Vec<[f64; 2]> = (0..k)
        .map(|_| {
            [
                rand::Rng::gen::<f64>(&mut pos_rng) * side,
                rand::Rng::gen::<f64>(&mut pos_rng) * side,
            ]
        })
        .collect();

    let mut shadow_rng = rng::derive_rng(cfg.seed, &[stream::SHADOWING]);
    let mut beta = vec![0.0; k * l];
    let mut distances = vec![0.0; k * l];
    let mut corr = Vec::with_capacity(k * l);
    for ue in 0..k {
        for ap in 0..l {
            let (disp, raw_d) = wrap_displacement(ap_positions[ap], ue_positions[ue], side);
            let d = raw_d.max(MIN_DISTANCE);
            let shadow = cfg.pathloss.shadow_std_db * rng::gaussian(&mut shadow_rng);
            let gain_db =
                cfg.pathloss.intercept_db - cfg.pathloss.slope_db_per_decade * d.log10() + shadow;
            let gain = 10f64.powf(gain_db / 10.0);
            let angle = disp[1].atan2(disp[0]);
            let r = match cfg.correlation {
                SpatialCorrelation::LocalScattering { asd_degrees } => {
                    local_scattering_corr(angle, asd_degrees.to_radians(), gain, n)
                }
                SpatialCorrelation::Uncorrelated => {
                    let mut m = CMatrix::identity(n);
                    m.scale(gain);
                    m
                }
            };
            beta[ue * l + ap] = gain;
            distances[ue * l + ap] = d;
            corr.push(r);
        }
    }

    Ok(NetworkRealization {
        num_aps: l,
        num_ues: k,
        antennas: n,
        side_length: side,
        noise_power: cfg.noise_power_watts(),
        ap_positions,
        ue_positions,
        beta,
        distances,
        corr,
    })
}

/// Serializable snapshot of a realization for replay and inspection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas: usize,
    pub side_length: f64,
    pub noise_power: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub beta: Vec<f64>,
    pub distances: Vec<f64>,
    /// Column-major (re, im) entries of each N x N correlation matrix.
    pub corr: Vec<Vec<[f64; 2]>>,
}

impl NetworkRealization {
    pub fn to_snapshot(&self) -> NetworkSnapshot {
        NetworkSnapshot {
            num_aps: self.num_aps,
            num_ues: self.num_ues,
            antennas: self.antennas,
            side_length: self.side_length,
            noise_power: self.noise_power,
            ap_positions: self.ap_positions.clone(),
            ue_positions: self.ue_positions.clone(),
            beta: self.beta.clone(),
            distances: self.distances.clone(),
            corr: self
                .corr
                .iter()
                .map(|m| m.data().iter().map(|v| [v.re, v.im]).collect())
                .collect(),
        }
    }

    pub fn from_snapshot(s: NetworkSnapshot) -> Result<Self> {
        let n = s.antennas;
        if s.beta.len() != s.num_ues * s.num_aps || s.corr.len() != s.beta.len() {
            return Err(Error::Serialization("inconsistent snapshot shape".into()));
        }
        let corr = s
            .corr
            .iter()
            .map(|entries| {
                if entries.len() != n * n {
                    return Err(Error::Serialization("bad correlation block size".into()));
                }
                let mut m = CMatrix::zeros(n, n);
                for (dst, src) in m.data_mut().iter_mut().zip(entries) {
                    *dst = C64::new(src[0], src[1]);
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            num_aps: s.num_aps,
            num_ues: s.num_ues,
            antennas: s.antennas,
            side_length: s.side_length,
            noise_power: s.noise_power,
            ap_positions: s.ap_positions,
            ue_positions: s.ue_positions,
            beta: s.beta,
            distances: s.distances,
            corr,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_snapshot()).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: NetworkSnapshot =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_snapshot(snap)
    }
}
