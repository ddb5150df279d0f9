//! System configuration and random channel generation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::complex_gaussian;
use crate::{CMatrix, C64};

/// Array and power configuration of one base station / user population.
///
/// `gamma` is the linear SNR p/σ², with σ² the noise variance. The number of
/// antennas per subarray `N = M / N_RF` must be an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    m: usize,
    k: usize,
    n_rf: usize,
    gamma: f64,
    seed: u64,
}

impl SystemConfig {
    pub fn new(m: usize, k: usize, n_rf: usize, gamma: f64, seed: u64) -> Result<Self> {
        if m == 0 || k == 0 || n_rf == 0 {
            return Err(Error::InvalidConfig(format!(
                "M, K and N_RF must be positive (M = {m}, K = {k}, N_RF = {n_rf})"
            )));
        }
        if m % n_rf != 0 {
            return Err(Error::NotDivisible { m, n_rf });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive and finite, got {gamma}")));
        }
        Ok(Self { m, k, n_rf, gamma, seed })
    }

    /// The standing regime with one RF chain per user (N_RF = K).
    pub fn with_rf_per_user(m: usize, k: usize, gamma: f64, seed: u64) -> Result<Self> {
        Self::new(m, k, k, gamma, seed)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    /// Antennas per subarray.
    pub fn n(&self) -> usize {
        self.m / self.n_rf
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.m, self.k, self.n_rf, gamma, self.seed)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn require_rf_per_user(&self) -> Result<()> {
        if self.n_rf != self.k {
            return Err(Error::RfChainMismatch { n_rf: self.n_rf, k: self.k });
        }
        Ok(())
    }
}

/// Geometric mmWave channel parameters for a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmWaveParams {
    /// Number of propagation paths per user.
    pub paths: usize,
    /// Antenna spacing over wavelength, d/λ.
    pub spacing_ratio: f64,
}

impl MmWaveParams {
    pub fn new(paths: usize, spacing_ratio: f64) -> Result<Self> {
        let params = Self { paths, spacing_ratio };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidConfig("mmWave path count must be at least 1".into()));
        }
        if !(self.spacing_ratio > 0.0 && self.spacing_ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "antenna spacing ratio must be positive, got {}",
                self.spacing_ratio
            )));
        }
        Ok(())
    }
}

impl Default for MmWaveParams {
    fn default() -> Self {
        Self { paths: 4, spacing_ratio: 0.5 }
    }
}

/// Channel model selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Rayleigh,
    MmWave(MmWaveParams),
}

impl ChannelModel {
    pub fn kind(&self) -> ChannelKind {
        match self {
            ChannelModel::Rayleigh => ChannelKind::Rayleigh,
            ChannelModel::MmWave(_) => ChannelKind::MmWave,
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, config: &SystemConfig, rng: &mut R) -> Result<ChannelMatrix> {
        match self {
            ChannelModel::Rayleigh => Ok(generate_rayleigh_channel(config, rng)),
            ChannelModel::MmWave(params) => generate_mmwave_channel(config, params, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Rayleigh,
    MmWave,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::MmWave => "mmwave",
        }
    }
}

/// M×K uplink channel; column k is user k's channel `h_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
    kind: ChannelKind,
}

impl ChannelMatrix {
    pub fn from_entries(entries: CMatrix, kind: ChannelKind) -> Self {
        Self { entries, kind }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn users(&self) -> usize {
        self.entries.ncols()
    }

    /// Entry `h_{k,i}`: antenna `i` of user `k` (both 0-based).
    pub fn entry(&self, user: usize, antenna: usize) -> C64 {
        self.entries[(antenna, user)]
    }
}

/// I.i.d. CN(0, 1) entries, filled column by column.
pub fn generate_rayleigh_channel<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelMatrix {
    let (m, k) = (config.m(), config.k());
    let mut entries = CMatrix::zeros(m, k);
    for user in 0..k {
        for antenna in 0..m {
            entries[(antenna, user)] = complex_gaussian(rng);
        }
    }
    ChannelMatrix { entries, kind: ChannelKind::Rayleigh }
}

/// `h_k = sqrt(M/L) Σ_l α_l a(φ_l)` with α_l ~ CN(0, 1) and φ_l ~ U[0, 2π).
pub fn generate_mmwave_channel<R: Rng + ?Sized>(
    config: &SystemConfig,
    params: &MmWaveParams,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    params.validate()?;
    let (m, k, paths) = (config.m(), config.k(), params.paths);
    let scale = (m as f64 / paths as f64).sqrt();
    let mut entries = CMatrix::zeros(m, k);
    for user in 0..k {
        for _ in 0..paths {
            let gain = complex_gaussian(rng);
            let phi = rng.random_range(0.0..2.0 * PI);
            let response = steering_vector(m, params.spacing_ratio, phi);
            for (antenna, a) in response.iter().enumerate() {
                entries[(antenna, user)] += scale * gain * a;
            }
        }
    }
    Ok(ChannelMatrix { entries, kind: ChannelKind::MmWave })
}

/// ULA response, entry m = exp(-j 2π (d/λ) m sin φ) / sqrt(M).
///
/// The negative exponent is the conjugated (Hermitian-transposed) row form.
pub fn steering_vector(m: usize, spacing_ratio: f64, phi: f64) -> Vec<C64> {
    let norm = 1.0 / (m as f64).sqrt();
    let step = -2.0 * PI * spacing_ratio * phi.sin();
    (0..m).map(|i| C64::from_polar(norm, step * i as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::substream;

    #[test]
    fn config_rejects_indivisible_arrays() {
        assert_eq!(SystemConfig::new(10, 3, 3, 1.0, 0), Err(Error::NotDivisible { m: 10, n_rf: 3 }));
        assert!(SystemConfig::new(0, 1, 1, 1.0, 0).is_err());
        assert!(SystemConfig::new(4, 2, 2, 0.0, 0).is_err());
        assert!(SystemConfig::new(4, 2, 2, f64::NAN, 0).is_err());
        let cfg = SystemConfig::new(120, 10, 10, 10.0, 1).unwrap();
        assert_eq!(cfg.n(), 12);
    }

    #[test]
    fn rf_per_user_requirement() {
        let cfg = SystemConfig::new(8, 2, 4, 1.0, 0).unwrap();
        assert_eq!(cfg.require_rf_per_user(), Err(Error::RfChainMismatch { n_rf: 4, k: 2 }));
        assert!(SystemConfig::with_rf_per_user(8, 2, 1.0, 0).unwrap().require_rf_per_user().is_ok());
    }

    #[test]
    fn rayleigh_is_deterministic_per_stream() {
        let cfg = SystemConfig::with_rf_per_user(2, 1, 1.0, 42).unwrap();
        let a = generate_rayleigh_channel(&cfg, &mut substream(42, 0));
        let b = generate_rayleigh_channel(&cfg, &mut substream(42, 0));
        let c = generate_rayleigh_channel(&cfg, &mut substream(42, 1));
        assert_eq!(a.entries().shape(), (2, 1));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn steering_vector_examples() {
        let s = 1.0 / 2f64.sqrt();
        let v = steering_vector(2, 0.5, 0.0);
        assert!((v[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::new(s, 0.0)).norm() < 1e-15);
        let v = steering_vector(2, 0.5, PI / 2.0);
        assert!((v[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::new(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mmwave_single_zero_angle_path_is_all_ones() {
        // α = 1 and φ = 0 by hand: sqrt(4/1) * (1/2)[1, 1, 1, 1].
        let a = steering_vector(4, 0.5, 0.0);
        let h: Vec<C64> = a.iter().map(|x| 2.0 * x).collect();
        for x in h {
            assert!((x - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn mmwave_rejects_zero_paths() {
        let cfg = SystemConfig::with_rf_per_user(4, 1, 1.0, 0).unwrap();
        let bad = MmWaveParams { paths: 0, spacing_ratio: 0.5 };
        assert!(generate_mmwave_channel(&cfg, &bad, &mut substream(0, 0)).is_err());
        assert!(MmWaveParams::new(2, -1.0).is_err());
    }
}
