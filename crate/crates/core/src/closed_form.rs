//! Closed-form ergodic rate approximations, rate gaps and SNR thresholds.
//!
//! All rates are per user, in bits/s/Hz, for `N_RF = K` subarrays of `N`
//! antennas each and linear SNR `gamma`.

use std::f64::consts::{LN_2, PI};

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::beamform::Scheme;
use crate::error::{Error, Result};
use crate::linear_to_db;

fn check(gamma: f64, n: usize, k: usize) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    if n == 0 || k == 0 {
        return Err(Error::Domain(format!("N and K must be positive (N = {n}, K = {k})")));
    }
    Ok(())
}

/// Pure analog detection: log2(1 + γ(πN/4) / (γ(K−1) + 1)).
pub fn rate_analog(gamma: f64, n: usize, k: usize) -> Result<f64> {
    check(gamma, n, k)?;
    let (n, k) = (n as f64, k as f64);
    Ok(log2_1p(gamma * PI * n / 4.0 / (gamma * (k - 1.0) + 1.0)))
}

/// MRC hybrid detection:
/// log2(1 + γ(πN/4 + K)² / (γ(K−1)(πN/2 + K) + πN/4 + K)).
pub fn rate_mrc_hybrid(gamma: f64, n: usize, k: usize) -> Result<f64> {
    check(gamma, n, k)?;
    let (n, k) = (n as f64, k as f64);
    let q = PI * n / 4.0 + k;
    Ok(log2_1p(gamma * q * q / (gamma * (k - 1.0) * (PI * n / 2.0 + k) + q)))
}

/// ZF hybrid detection: log2(1 + γ(πN/(4K) + 1)).
pub fn rate_zf_hybrid(gamma: f64, n: usize, k: usize) -> Result<f64> {
    check(gamma, n, k)?;
    Ok(log2_1p(zf_mean_sinr(gamma, n, k)))
}

pub fn rate(scheme: Scheme, gamma: f64, n: usize, k: usize) -> Result<f64> {
    match scheme {
        Scheme::Analog => rate_analog(gamma, n, k),
        Scheme::Mrc => rate_mrc_hybrid(gamma, n, k),
        Scheme::Zf => rate_zf_hybrid(gamma, n, k),
    }
}

/// Predicted mean ZF SINR γ(πN/(4K) + 1), also the scale of its density.
pub fn zf_mean_sinr(gamma: f64, n: usize, k: usize) -> f64 {
    gamma * (PI * n as f64 / (4.0 * k as f64) + 1.0)
}

fn check_pdf_args(x: f64, gamma: f64, n: usize, k: usize, n_rf: usize) -> Result<()> {
    check(gamma, n, k)?;
    if n_rf < k {
        return Err(Error::Domain(format!("density needs N_RF >= K (N_RF = {n_rf}, K = {k})")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("SINR must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Approximate density of the per-user ZF SINR: a Gamma law with shape
/// `N_RF − K + 1` and scale γ(πN/(4K) + 1). Exponential when `N_RF = K`.
pub fn zf_sinr_pdf(x: f64, gamma: f64, n: usize, k: usize, n_rf: usize) -> Result<f64> {
    check_pdf_args(x, gamma, n, k, n_rf)?;
    let theta = zf_mean_sinr(gamma, n, k);
    let dof = (n_rf - k) as f64;
    let t = x / theta;
    if dof == 0.0 {
        return Ok((-t).exp() / theta);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok((-t + dof * t.ln() - ln_gamma(dof + 1.0)).exp() / theta)
}

/// Distribution function matching [`zf_sinr_pdf`].
pub fn zf_sinr_cdf(x: f64, gamma: f64, n: usize, k: usize, n_rf: usize) -> Result<f64> {
    check_pdf_args(x, gamma, n, k, n_rf)?;
    let theta = zf_mean_sinr(gamma, n, k);
    if x == 0.0 {
        return Ok(0.0);
    }
    let shape = (n_rf - k + 1) as f64;
    Ok(gamma_lr(shape, x / theta))
}

/// Rate gap ΔR = R_hybrid − R_analog for an MRC or ZF digital stage.
pub fn rate_gap(gamma: f64, n: usize, k: usize, scheme: Scheme) -> Result<f64> {
    let hybrid = match scheme {
        Scheme::Mrc => rate_mrc_hybrid(gamma, n, k)?,
        Scheme::Zf => rate_zf_hybrid(gamma, n, k)?,
        Scheme::Analog => return Err(Error::Domain("rate gap needs a hybrid scheme (mrc or zf)".into())),
    };
    Ok(hybrid - rate_analog(gamma, n, k)?)
}

/// Constant c in the MRC dominance condition K² > c·M.
pub fn dominance_constant() -> f64 {
    PI * (5f64.sqrt() - 1.0) / 8.0
}

/// SNR threshold below which MRC hybrid detection beats analog detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta1 {
    Threshold(f64),
    /// The quadratic (πN/4)² − πNK/4 − K² is nonpositive: MRC wins at every SNR.
    HybridAlwaysDominates,
}

impl Eta1 {
    pub fn value(&self) -> Option<f64> {
        match self {
            Eta1::Threshold(x) => Some(*x),
            Eta1::HybridAlwaysDominates => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub m: usize,
    pub k: usize,
    pub eta1: Eta1,
    /// SNR above which ZF hybrid detection beats analog detection.
    pub eta2: f64,
    /// K² > π(√5 − 1)M/8.
    pub mrc_always_dominates: bool,
}

impl ThresholdReport {
    pub fn eta1_db(&self) -> Option<f64> {
        self.eta1.value().filter(|x| *x > 0.0).map(linear_to_db)
    }

    pub fn eta2_db(&self) -> Option<f64> {
        (self.eta2 > 0.0).then(|| linear_to_db(self.eta2))
    }

    /// Right-hand side of the dominance test, π(√5 − 1)M/8.
    pub fn dominance_bound(&self) -> f64 {
        dominance_constant() * self.m as f64
    }
}

pub fn thresholds(m: usize, k: usize) -> Result<ThresholdReport> {
    if k < 2 {
        return Err(Error::SingleUser);
    }
    if m == 0 || m % k != 0 {
        return Err(Error::NotDivisible { m, n_rf: k });
    }
    let n = (m / k) as f64;
    let kf = k as f64;
    let x = PI * n / 4.0;
    let quadratic = x * x - PI * n * kf / 4.0 - kf * kf;
    let eta1 = if quadratic > 0.0 {
        Eta1::Threshold(kf * (x + kf) / ((kf - 1.0) * quadratic))
    } else {
        Eta1::HybridAlwaysDominates
    };
    let y = x * (kf - 1.0) / kf;
    let eta2 = (y - 1.0) / (y + kf - 1.0);
    let mrc_always_dominates = kf * kf > dominance_constant() * m as f64;
    Ok(ThresholdReport { m, k, eta1, eta2, mrc_always_dominates })
}

/// High-SNR limit of the MRC rate gap: 4K²/(π ln2 M) − 1.
pub fn high_snr_gap_asymptote(m: usize, k: usize) -> Result<f64> {
    if k < 2 || m == 0 {
        return Err(Error::Domain(format!("asymptote needs K >= 2 and M > 0 (M = {m}, K = {k})")));
    }
    let kf = k as f64;
    Ok(high_snr_gap_from_load(kf * kf / m as f64))
}

/// The same limit as a function of the load K²/M.
pub fn high_snr_gap_from_load(load: f64) -> f64 {
    4.0 / (PI * LN_2) * load - 1.0
}

/// ω₁ = E[|g_kᴴ g_k|²] = (πN/4 + K − π/4)² + πN(1 − π/4) + 2(1 − π/4)² + (K − 1).
pub fn omega1(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    let v = 1.0 - PI / 4.0;
    let mean = PI * n / 4.0 + k - PI / 4.0;
    mean * mean + PI * n * v + 2.0 * v * v + (k - 1.0)
}

/// ω₂ = E[|g_kᴴ g_j|²] = πN/2 + K − π/2 for j ≠ k.
pub fn omega2(n: usize, k: usize) -> f64 {
    PI * n as f64 / 2.0 + k as f64 - PI / 2.0
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db_to_linear;

    // Reference values below were evaluated at 30 significant digits with
    // mpmath, independently of this module.

    #[test]
    fn rates_at_reference_point() {
        assert!((rate_analog(10.0, 12, 10).unwrap() - 1.025_517_799_971_285).abs() < 1e-12);
        assert!((rate_mrc_hybrid(10.0, 12, 10).unwrap() - 1.288_314_790_128_404).abs() < 1e-12);
        assert!((rate_zf_hybrid(10.0, 12, 10).unwrap() - 4.352_248_489_701_989).abs() < 1e-12);
        assert!((rate_analog(10.0, 12, 10).unwrap() - 1.02553).abs() < 1e-4);
        assert!((rate_mrc_hybrid(10.0, 12, 10).unwrap() - 1.28837).abs() < 1e-4);
        assert!((rate_zf_hybrid(10.0, 12, 10).unwrap() - 4.35230).abs() < 1e-4);
    }

    #[test]
    fn vanishing_snr() {
        for scheme in Scheme::ALL {
            let r = rate(scheme, 1e-14, 12, 10).unwrap();
            assert!((0.0..1e-12).contains(&r));
        }
    }

    #[test]
    fn single_user_forms() {
        for &g in &[0.1, 1.0, 10.0, 100.0] {
            let expect = (1.0 + g * PI * 16.0 / 4.0).log2();
            assert!((rate_analog(g, 16, 1).unwrap() - expect).abs() < 1e-12);
            let mrc = (1.0 + g * (PI * 16.0 / 4.0 + 1.0)).log2();
            assert!((rate_mrc_hybrid(g, 16, 1).unwrap() - mrc).abs() < 1e-12);
            assert!(rate_mrc_hybrid(g, 16, 1).unwrap() > rate_analog(g, 16, 1).unwrap());
        }
    }

    #[test]
    fn zf_gains_one_bit_per_doubling() {
        let a = rate_zf_hybrid(100.0, 1 << 10, 4).unwrap();
        let b = rate_zf_hybrid(100.0, 1 << 11, 4).unwrap();
        assert!((b - a - 1.0).abs() < 0.01);
    }

    #[test]
    fn domain_errors() {
        assert!(rate_analog(0.0, 12, 10).is_err());
        assert!(rate_analog(-1.0, 12, 10).is_err());
        assert!(rate_mrc_hybrid(1.0, 0, 10).is_err());
        assert!(rate_zf_hybrid(1.0, 12, 0).is_err());
        assert!(rate_gap(1.0, 12, 10, Scheme::Analog).is_err());
        assert!(zf_sinr_pdf(-1.0, 1.0, 12, 10, 10).is_err());
        assert!(zf_sinr_pdf(1.0, 1.0, 12, 10, 9).is_err());
    }

    #[test]
    fn exponential_density_at_origin() {
        let theta = 10.0 * (PI * 12.0 / 40.0 + 1.0);
        assert!((zf_sinr_pdf(0.0, 10.0, 12, 10, 10).unwrap() - 1.0 / theta).abs() < 1e-15);
        assert!((zf_mean_sinr(10.0, 12, 10) - 19.424_777_960_769_38).abs() < 1e-12);
        assert!((zf_sinr_cdf(theta, 10.0, 12, 10, 10).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn thresholds_reference_cases() {
        let r = thresholds(120, 6).unwrap();
        let eta1 = r.eta1.value().unwrap();
        assert!((eta1 - 0.223_616_059_767_392_8).abs() < 1e-12);
        assert!((r.eta1_db().unwrap() - (-6.504_970_092_923_305)).abs() < 1e-9);
        assert!(!r.mrc_always_dominates);

        let r = thresholds(120, 10).unwrap();
        assert!(r.mrc_always_dominates);
        assert_eq!(r.eta1, Eta1::HybridAlwaysDominates);
        assert!((r.dominance_bound() - 58.248_331_161_763_997).abs() < 1e-9);

        let r = thresholds(64, 8).unwrap();
        assert!((r.eta2 - 0.359_886_681_701_077_3).abs() < 1e-12);
        assert!((r.eta2_db().unwrap() - (-4.438_342_249_524_079)).abs() < 1e-9);
    }

    #[test]
    fn thresholds_reject_single_user_and_indivisible() {
        assert_eq!(thresholds(64, 1), Err(Error::SingleUser));
        assert!(matches!(thresholds(65, 8), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn gap_sign_flips_around_eta1() {
        let eta1 = thresholds(120, 6).unwrap().eta1.value().unwrap();
        assert!(rate_gap(eta1 / 2.0, 20, 6, Scheme::Mrc).unwrap() > 0.0);
        assert!(rate_gap(eta1 * 2.0, 20, 6, Scheme::Mrc).unwrap() < 0.0);
        assert!(rate_gap(eta1, 20, 6, Scheme::Mrc).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gap_sign_flips_around_eta2() {
        let eta2 = thresholds(64, 8).unwrap().eta2;
        assert!(rate_gap(eta2 / 2.0, 8, 8, Scheme::Zf).unwrap() < 0.0);
        assert!(rate_gap(eta2 * 2.0, 8, 8, Scheme::Zf).unwrap() > 0.0);
        assert!(rate_gap(eta2, 8, 8, Scheme::Zf).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mrc_dominates_on_grid_when_k_squared_is_large() {
        for i in 0..=60 {
            let gamma = db_to_linear(-30.0 + i as f64);
            assert!(rate_gap(gamma, 12, 10, Scheme::Mrc).unwrap() > 0.0);
        }
    }

    #[test]
    fn asymptote_values() {
        assert!((high_snr_gap_asymptote(120, 10).unwrap() - 0.530_746_980_877_617).abs() < 1e-12);
        assert!((high_snr_gap_asymptote(120, 10).unwrap() - 0.53070).abs() < 1e-4);
        assert!(high_snr_gap_asymptote(120, 1).is_err());
        // ΔR at γ = 1e6 for M = 2400, K = 10 is −0.833701060216622 (mpmath).
        let gap = rate_gap(1e6, 240, 10, Scheme::Mrc).unwrap();
        assert!((gap - (-0.833_701_060_216_622)).abs() < 1e-9);
        let asym = high_snr_gap_asymptote(2400, 10).unwrap();
        assert!((gap - asym).abs() / asym.abs() < 0.10);
    }

    #[test]
    fn gap_neutral_load() {
        assert!(high_snr_gap_from_load(PI * LN_2 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn omegas() {
        assert!((omega2(12, 10) - 27.278_759_594_743_863).abs() < 1e-12);
    }
}
