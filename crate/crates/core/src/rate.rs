//! Per-realization SINR and Monte Carlo ergodic rates.
//!
//! Powers are normalised to `p = γ` and `σ² = 1`. For a fixed channel draw the
//! per-user signal, interference and noise gains do not depend on `γ`, so one
//! draw is evaluated for every requested SNR at once.

use rayon::prelude::*;

use crate::beamform::{
    design_analog_combiner, design_digital_combiner, downlink_precoder, effective_channel, AnalogCombiner,
    DigitalCombiner, DownlinkPrecoder, Scheme,
};
use crate::closed_form;
use crate::error::{Error, Result};
use crate::stats::Summary;
use crate::stream::substream;
use crate::system::{ChannelKind, ChannelMatrix, ChannelModel, SystemConfig};
use crate::CMatrix;

/// Redraws allowed per trial before a degenerate configuration is reported.
pub const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
        }
    }
}

/// SINR of one user in one channel realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub user: usize,
    pub sinr: f64,
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

/// SNR-independent gains: SINR(γ) = γ·signal / (γ·interference + noise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl LinkGains {
    pub fn sample(&self, user: usize, gamma: f64) -> SinrSample {
        let signal = gamma * self.signal;
        let interference = gamma * self.interference;
        let sinr = signal / (interference + self.noise);
        SinrSample { user, sinr, signal, interference, noise: self.noise }
    }

    pub fn rate(&self, gamma: f64) -> f64 {
        (gamma * self.signal / (gamma * self.interference + self.noise)).ln_1p() / std::f64::consts::LN_2
    }
}

/// Splits row `k` of the `K × K` matrix `E = W·G` into signal and interference.
fn split_rows(e: &CMatrix, noise: impl Fn(usize) -> f64) -> Vec<LinkGains> {
    (0..e.nrows())
        .map(|k| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for j in 0..e.ncols() {
                let p = e[(k, j)].norm_sqr();
                if j == k {
                    signal = p;
                } else {
                    interference += p;
                }
            }
            LinkGains { signal, interference, noise: noise(k) }
        })
        .collect()
}

/// Uplink gains: `|w_kᵀ A h_j|²` terms and noise gain `‖w_kᵀ A‖²`.
pub fn uplink_gains(h: &ChannelMatrix, a: &AnalogCombiner, w: &DigitalCombiner) -> Result<Vec<LinkGains>> {
    let g = effective_channel(a, h)?;
    let wm = w.entries();
    if wm.ncols() != g.rf_chains() || wm.nrows() != g.users() {
        return Err(Error::DimensionMismatch(format!(
            "combiner is {}x{}, effective channel is {}x{}",
            wm.nrows(),
            wm.ncols(),
            g.rf_chains(),
            g.users()
        )));
    }
    let e = wm * g.entries();
    let wa = a.left_apply(wm)?;
    Ok(split_rows(&e, |k| wa.row(k).norm_squared()))
}

/// Downlink gains: user `k` receives `h_kᴴ x` with unit noise variance.
pub fn downlink_gains(h: &ChannelMatrix, precoder: &DownlinkPrecoder) -> Result<Vec<LinkGains>> {
    let f = precoder.composite();
    if f.nrows() != h.antennas() || f.ncols() != h.users() {
        return Err(Error::DimensionMismatch(format!(
            "precoder is {}x{}, channel is {}x{}",
            f.nrows(),
            f.ncols(),
            h.antennas(),
            h.users()
        )));
    }
    let e = h.entries().adjoint() * f;
    Ok(split_rows(&e, |_| 1.0))
}

/// Exact per-user uplink SINR for one realization.
pub fn per_user_sinr(
    h: &ChannelMatrix,
    a: &AnalogCombiner,
    w: &DigitalCombiner,
    gamma: f64,
) -> Result<Vec<SinrSample>> {
    check_gamma(gamma)?;
    Ok(uplink_gains(h, a, w)?
        .iter()
        .enumerate()
        .map(|(k, g)| g.sample(k, gamma))
        .collect())
}

/// Exact per-user downlink SINR for one realization.
pub fn per_user_downlink_sinr(h: &ChannelMatrix, precoder: &DownlinkPrecoder, gamma: f64) -> Result<Vec<SinrSample>> {
    check_gamma(gamma)?;
    Ok(downlink_gains(h, precoder)?
        .iter()
        .enumerate()
        .map(|(k, g)| g.sample(k, gamma))
        .collect())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

/// Monte Carlo ergodic rate, optionally paired with its closed-form prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    /// Mean of log2(1 + SINR) over users and trials, bits/s/Hz.
    pub per_user_rate: f64,
    /// `K × per_user_rate`.
    pub sum_rate: f64,
    pub trials: usize,
    /// Standard error of `per_user_rate`, from per-trial user averages.
    pub standard_error: f64,
    /// Channel draws discarded because zero forcing was ill-conditioned.
    pub rejected_draws: usize,
    /// Closed-form per-user rate (uplink Rayleigh with N_RF = K only).
    pub closed_form: Option<f64>,
}

impl RateEstimate {
    pub fn sum_standard_error(&self, users: usize) -> f64 {
        users as f64 * self.standard_error
    }

    pub fn closed_form_sum(&self, users: usize) -> Option<f64> {
        self.closed_form.map(|r| users as f64 * r)
    }
}

/// Gains of every requested scheme for one channel draw.
fn draw_gains(
    config: &SystemConfig,
    h: &ChannelMatrix,
    direction: Direction,
    schemes: &[Scheme],
) -> Result<Vec<Vec<LinkGains>>> {
    let a = design_analog_combiner(h, config)?;
    let g = effective_channel(&a, h)?;
    schemes
        .iter()
        .map(|&scheme| match direction {
            Direction::Uplink => uplink_gains(h, &a, &design_digital_combiner(&g, scheme)?),
            Direction::Downlink => downlink_gains(h, &downlink_precoder(&a, &g, scheme)?),
        })
        .collect()
}

struct TrialOutcome {
    /// Per-user average rate, indexed `[scheme][gamma]`.
    rates: Vec<Vec<f64>>,
    rejected: usize,
}

fn run_trial(
    config: &SystemConfig,
    model: &ChannelModel,
    direction: Direction,
    schemes: &[Scheme],
    gammas: &[f64],
    index: u64,
) -> Result<TrialOutcome> {
    let mut rng = substream(config.seed(), index);
    let mut rejected = 0;
    loop {
        let h = model.generate(config, &mut rng)?;
        match draw_gains(config, &h, direction, schemes) {
            Ok(gains) => {
                let users = config.k() as f64;
                let rates = gains
                    .iter()
                    .map(|per_user| {
                        gammas
                            .iter()
                            .map(|&gamma| per_user.iter().map(|g| g.rate(gamma)).sum::<f64>() / users)
                            .collect()
                    })
                    .collect();
                return Ok(TrialOutcome { rates, rejected });
            }
            Err(Error::Singular { condition }) => {
                rejected += 1;
                if rejected > MAX_REDRAWS {
                    return Err(Error::Singular { condition });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Monte Carlo rates for several schemes and SNRs on common channel draws.
///
/// Trial `t` uses substream `(config.seed, t)` for every scheme and SNR, so the
/// curves share their randomness. Returns estimates indexed `[scheme][gamma]`.
/// A draw on which any requested zero-forcing stage is ill-conditioned is
/// discarded for all schemes and redrawn from the same substream.
pub fn simulate_rates(
    config: &SystemConfig,
    model: &ChannelModel,
    direction: Direction,
    schemes: &[Scheme],
    gammas: &[f64],
    trials: usize,
) -> Result<Vec<Vec<RateEstimate>>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    config.require_rf_per_user()?;
    for &gamma in gammas {
        check_gamma(gamma)?;
    }
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, model, direction, schemes, gammas, t))
        .collect::<Result<_>>()?;
    let rejected: usize = outcomes.iter().map(|o| o.rejected).sum();
    let users = config.k();
    let closed_form_available = direction == Direction::Uplink && model.kind() == ChannelKind::Rayleigh;

    let mut column = Vec::with_capacity(trials);
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            gammas
                .iter()
                .enumerate()
                .map(|(i, &gamma)| {
                    column.clear();
                    column.extend(outcomes.iter().map(|o| o.rates[s][i]));
                    let summary = Summary::of(&column);
                    let closed_form = closed_form_available
                        .then(|| closed_form::rate(scheme, gamma, config.n(), users).ok())
                        .flatten();
                    RateEstimate {
                        per_user_rate: summary.mean,
                        sum_rate: users as f64 * summary.mean,
                        trials,
                        standard_error: summary.std_error(),
                        rejected_draws: rejected,
                        closed_form,
                    }
                })
                .collect()
        })
        .collect())
}

/// Uplink ergodic rate of one scheme at `config.gamma()`.
pub fn monte_carlo_rate(
    config: &SystemConfig,
    model: &ChannelModel,
    scheme: Scheme,
    trials: usize,
) -> Result<RateEstimate> {
    let mut out = simulate_rates(config, model, Direction::Uplink, &[scheme], &[config.gamma()], trials)?;
    Ok(out.remove(0).remove(0))
}

/// Downlink ergodic rate of one precoding scheme at `config.gamma()`.
pub fn monte_carlo_downlink_rate(
    config: &SystemConfig,
    model: &ChannelModel,
    scheme: Scheme,
    trials: usize,
) -> Result<RateEstimate> {
    let mut out = simulate_rates(config, model, Direction::Downlink, &[scheme], &[config.gamma()], trials)?;
    Ok(out.remove(0).remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::generate_rayleigh_channel;
    use crate::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hand_example_single_user() {
        let h = ChannelMatrix::from_entries(
            CMatrix::from_column_slice(2, 1, &[c(3.0, 0.0), c(0.0, 4.0)]),
            ChannelKind::Rayleigh,
        );
        let cfg = SystemConfig::with_rf_per_user(2, 1, 1.0, 0).unwrap();
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let g = effective_channel(&a, &h).unwrap();
        let w = design_digital_combiner(&g, Scheme::Analog).unwrap();
        let s = per_user_sinr(&h, &a, &w, 1.0).unwrap();
        assert!((s[0].sinr - 24.5).abs() < 1e-12);
        assert_eq!(s[0].interference, 0.0);
        assert!((s[0].noise - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_users_see_no_interference() {
        let mut hm = CMatrix::zeros(2, 2);
        hm[(0, 0)] = c(1.0, 0.0);
        hm[(1, 1)] = c(1.0, 0.0);
        let h = ChannelMatrix::from_entries(hm, ChannelKind::Rayleigh);
        let cfg = SystemConfig::with_rf_per_user(2, 2, 3.0, 0).unwrap();
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let g = effective_channel(&a, &h).unwrap();
        let w = design_digital_combiner(&g, Scheme::Analog).unwrap();
        for s in per_user_sinr(&h, &a, &w, 3.0).unwrap() {
            assert!((s.sinr - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_sinr_matches_gram_inverse() {
        let cfg = SystemConfig::with_rf_per_user(40, 4, 10.0, 11).unwrap();
        let h = generate_rayleigh_channel(&cfg, &mut substream(11, 0));
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let g = effective_channel(&a, &h).unwrap();
        let w = design_digital_combiner(&g, Scheme::Zf).unwrap();
        let gram_inv = (g.entries().adjoint() * g.entries()).try_inverse().unwrap();
        for s in per_user_sinr(&h, &a, &w, 10.0).unwrap() {
            assert!(s.interference < 1e-12);
            let expected = 10.0 / gram_inv[(s.user, s.user)].re;
            assert!((s.sinr - expected).abs() / expected < 1e-10);
        }
    }

    #[test]
    fn sinr_rejects_bad_gamma() {
        let cfg = SystemConfig::with_rf_per_user(4, 2, 1.0, 0).unwrap();
        let h = generate_rayleigh_channel(&cfg, &mut substream(0, 0));
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let g = effective_channel(&a, &h).unwrap();
        let w = design_digital_combiner(&g, Scheme::Mrc).unwrap();
        assert!(per_user_sinr(&h, &a, &w, 0.0).is_err());
        assert!(per_user_sinr(&h, &a, &w, -1.0).is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = SystemConfig::with_rf_per_user(4, 2, 1.0, 0).unwrap();
        assert!(monte_carlo_rate(&cfg, &ChannelModel::Rayleigh, Scheme::Analog, 0).is_err());
    }

    #[test]
    fn vanishing_snr_gives_vanishing_rate() {
        let cfg = SystemConfig::with_rf_per_user(40, 4, 1e-12, 3).unwrap();
        for scheme in Scheme::ALL {
            let up = monte_carlo_rate(&cfg, &ChannelModel::Rayleigh, scheme, 50).unwrap();
            assert!(up.per_user_rate < 1e-10 && up.per_user_rate >= 0.0);
            let down = monte_carlo_downlink_rate(&cfg, &ChannelModel::Rayleigh, scheme, 50).unwrap();
            assert!(down.per_user_rate < 1e-10 && down.per_user_rate >= 0.0);
        }
    }

    #[test]
    fn sum_rate_is_users_times_per_user() {
        let cfg = SystemConfig::with_rf_per_user(40, 4, 2.0, 3).unwrap();
        let r = monte_carlo_rate(&cfg, &ChannelModel::Rayleigh, Scheme::Mrc, 100).unwrap();
        assert!((r.sum_rate - 4.0 * r.per_user_rate).abs() < 1e-12);
        assert!(r.closed_form.is_some());
        let d = monte_carlo_downlink_rate(&cfg, &ChannelModel::Rayleigh, Scheme::Mrc, 10).unwrap();
        assert!(d.closed_form.is_none());
    }
}
