//! Sub-connected analog combiner, effective channel and digital combiners.
//!
//! The analog stage gives each RF chain an exclusive block of `N` antennas and
//! co-phases that block to its own user. Digital stages act on the resulting
//! `N_RF × K` effective channel `G = A·H`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::system::{ChannelMatrix, SystemConfig};
use crate::{CMatrix, C64};

/// Condition-number limit on `GᴴG` beyond which zero forcing is refused.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Linear processing scheme.
///
/// In the downlink `Mrc` denotes matched-filter (MRT) precoding and `Analog`
/// denotes analog-only transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Analog,
    Mrc,
    Zf,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Analog, Scheme::Mrc, Scheme::Zf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Analog => "analog",
            Scheme::Mrc => "mrc",
            Scheme::Zf => "zf",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analog" | "analog-identity" | "analog-only" => Ok(Scheme::Analog),
            "mrc" | "mrt" => Ok(Scheme::Mrc),
            "zf" => Ok(Scheme::Zf),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Block-diagonal phase-shifter network, `N_RF × M`.
///
/// Row `r` is supported on antennas `r·N .. (r+1)·N` and every entry there has
/// modulus `1/sqrt(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCombiner {
    entries: CMatrix,
    subarray: usize,
}

impl AnalogCombiner {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn rf_chains(&self) -> usize {
        self.entries.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.entries.ncols()
    }

    /// Antennas per subarray.
    pub fn subarray(&self) -> usize {
        self.subarray
    }

    /// `W·A` for a `rows × N_RF` matrix `W`, using the block support of `A`.
    pub fn left_apply(&self, w: &CMatrix) -> Result<CMatrix> {
        if w.ncols() != self.rf_chains() {
            return Err(Error::DimensionMismatch(format!(
                "left operand has {} columns, combiner has {} rows",
                w.ncols(),
                self.rf_chains()
            )));
        }
        let n = self.subarray;
        let mut out = CMatrix::zeros(w.nrows(), self.antennas());
        for rf in 0..self.rf_chains() {
            for antenna in rf * n..(rf + 1) * n {
                let a = self.entries[(rf, antenna)];
                for row in 0..w.nrows() {
                    out[(row, antenna)] = w[(row, rf)] * a;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose `Aᴴ`, the downlink analog precoder.
    pub fn adjoint(&self) -> CMatrix {
        self.entries.adjoint()
    }
}

/// Phase-only combiner maximising each user's gain on its own subarray.
///
/// Entry `(k, i)` on user `k`'s block is `conj(h_{k,i}) / (|h_{k,i}| sqrt(N))`.
/// A zero channel entry gets phase factor 1.
pub fn design_analog_combiner(h: &ChannelMatrix, config: &SystemConfig) -> Result<AnalogCombiner> {
    config.require_rf_per_user()?;
    check_channel_shape(h, config)?;
    let n = config.n();
    let scale = 1.0 / (n as f64).sqrt();
    let mut entries = CMatrix::zeros(config.n_rf(), config.m());
    for user in 0..config.k() {
        for antenna in user * n..(user + 1) * n {
            let x = h.entry(user, antenna);
            let r = x.norm();
            let phase = if r > 0.0 { x.conj() / r } else { C64::new(1.0, 0.0) };
            entries[(user, antenna)] = phase * scale;
        }
    }
    Ok(AnalogCombiner { entries, subarray: n })
}

fn check_channel_shape(h: &ChannelMatrix, config: &SystemConfig) -> Result<()> {
    if h.antennas() != config.m() || h.users() != config.k() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, configuration expects {}x{}",
            h.antennas(),
            h.users(),
            config.m(),
            config.k()
        )));
    }
    Ok(())
}

/// `G = A·H`, `N_RF × K`. Column `k` is user `k`'s post-analog channel `g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    entries: CMatrix,
}

impl EffectiveChannel {
    pub fn from_entries(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn rf_chains(&self) -> usize {
        self.entries.nrows()
    }

    pub fn users(&self) -> usize {
        self.entries.ncols()
    }

    /// Post-analog channel of user `k`.
    pub fn column(&self, user: usize) -> Vec<C64> {
        self.entries.column(user).iter().copied().collect()
    }
}

/// Product `A·H` restricted to the nonzero blocks of `A`.
pub fn effective_channel(a: &AnalogCombiner, h: &ChannelMatrix) -> Result<EffectiveChannel> {
    if a.antennas() != h.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "combiner spans {} antennas, channel has {}",
            a.antennas(),
            h.antennas()
        )));
    }
    let n = a.subarray();
    let hm = h.entries();
    let mut g = CMatrix::zeros(a.rf_chains(), h.users());
    for rf in 0..a.rf_chains() {
        for user in 0..h.users() {
            let mut acc = C64::new(0.0, 0.0);
            for antenna in rf * n..(rf + 1) * n {
                acc += a.entries[(rf, antenna)] * hm[(antenna, user)];
            }
            g[(rf, user)] = acc;
        }
    }
    Ok(EffectiveChannel { entries: g })
}

/// Baseband combiner `W`, `K × N_RF`; row `k` detects user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalCombiner {
    entries: CMatrix,
    scheme: Scheme,
}

impl DigitalCombiner {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

pub fn design_digital_combiner(g: &EffectiveChannel, scheme: Scheme) -> Result<DigitalCombiner> {
    let entries = match scheme {
        Scheme::Analog => {
            if g.rf_chains() != g.users() {
                return Err(Error::RfChainMismatch { n_rf: g.rf_chains(), k: g.users() });
            }
            CMatrix::identity(g.users(), g.rf_chains())
        }
        Scheme::Mrc => g.entries.adjoint(),
        Scheme::Zf => zero_forcing(&g.entries)?,
    };
    Ok(DigitalCombiner { entries, scheme })
}

/// Left pseudo-inverse `(GᴴG)⁻¹Gᴴ` through a thin QR factorisation.
fn zero_forcing(g: &CMatrix) -> Result<CMatrix> {
    if g.nrows() < g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "zero forcing needs N_RF >= K, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let condition = gram_condition(g);
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let qr = g.clone().qr();
    let q = qr.q();
    let r = qr.r();
    r.solve_upper_triangular(&q.adjoint())
        .ok_or(Error::Singular { condition: f64::INFINITY })
}

/// Condition number of `GᴴG`, i.e. the squared condition number of `G`.
pub fn gram_condition(g: &CMatrix) -> f64 {
    let sv = g.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        return f64::INFINITY;
    }
    (max / min).powi(2)
}

/// Downlink precoders: analog `Aᴴ` (`M × N_RF`) and a digital stage
/// (`N_RF × K`) scaled so the composite has unit Frobenius norm.
///
/// Transmitting `x = sqrt(p)·Aᴴ·F·s` with `E[ssᴴ] = I` therefore radiates total
/// power exactly `p`. For analog-only transmission the columns of `Aᴴ` are
/// orthonormal, so every user receives `p/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkPrecoder {
    analog: CMatrix,
    digital: CMatrix,
    scheme: Scheme,
}

impl DownlinkPrecoder {
    pub fn analog(&self) -> &CMatrix {
        &self.analog
    }

    pub fn digital(&self) -> &CMatrix {
        &self.digital
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `Aᴴ·F`, `M × K`.
    pub fn composite(&self) -> CMatrix {
        &self.analog * &self.digital
    }

    /// Total radiated power for transmit power budget `p`.
    pub fn transmit_power(&self, p: f64) -> f64 {
        p * self.composite().norm_squared()
    }
}

/// Downlink precoders from the uplink analog design and reciprocity.
///
/// The downlink effective channel is `HᴴAᴴ = Gᴴ`. Matched filtering uses
/// `F = G`, zero forcing the right inverse `F = G(GᴴG)⁻¹`.
pub fn design_downlink_precoders(
    h: &ChannelMatrix,
    config: &SystemConfig,
    scheme: Scheme,
) -> Result<(AnalogCombiner, DownlinkPrecoder)> {
    let a = design_analog_combiner(h, config)?;
    let g = effective_channel(&a, h)?;
    let precoder = downlink_precoder(&a, &g, scheme)?;
    Ok((a, precoder))
}

pub(crate) fn downlink_precoder(a: &AnalogCombiner, g: &EffectiveChannel, scheme: Scheme) -> Result<DownlinkPrecoder> {
    let digital = match scheme {
        Scheme::Analog => CMatrix::identity(g.rf_chains(), g.users()),
        Scheme::Mrc => g.entries.clone(),
        Scheme::Zf => zero_forcing(&g.entries)?.adjoint(),
    };
    let analog = a.adjoint();
    let norm = (&analog * &digital).norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    Ok(DownlinkPrecoder { analog, digital: digital.unscale(norm), scheme })
}
