//! Parameter sweeps, figure presets and CSV output for the command line.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::beamform::Scheme;
use crate::closed_form::{self, Eta1, ThresholdReport};
use crate::error::{Error, Result};
use crate::moments::MomentCheckResult;
use crate::rate::{simulate_rates, Direction};
use crate::system::{ChannelModel, MmWaveParams, SystemConfig};
use crate::{db_to_linear, linear_to_db};

pub const DEFAULT_TRIALS: usize = 2000;

/// Column order of sweep CSV files.
pub const SWEEP_HEADER: [&str; 11] = [
    "swept_var",
    "value",
    "scheme",
    "direction",
    "channel_model",
    "trials",
    "sum_rate_sim",
    "stderr",
    "sum_rate_closed_form",
    "m",
    "k",
];

pub const MOMENT_HEADER: [&str; 11] = [
    "name", "n", "k", "target", "estimate", "std_error", "rel_error", "tolerance", "samples", "asserted", "pass",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptVar {
    SnrDb,
    M,
    K,
}

impl SweptVar {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweptVar::SnrDb => "snr_db",
            SweptVar::M => "m",
            SweptVar::K => "k",
        }
    }
}

/// `start:step:stop` (inclusive) or a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl ValueRange {
    pub fn single(x: f64) -> Self {
        Self { start: x, step: 1.0, stop: x }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidConfig(format!("invalid number '{p}' in range '{s}'")))
        };
        let range = match parts.as_slice() {
            [x] => Self::single(num(x)?),
            [a, b, c] => Self { start: num(a)?, step: num(b)?, stop: num(c)? },
            _ => return Err(Error::InvalidConfig(format!("expected start:step:stop or a value, got '{s}'"))),
        };
        range.validate()?;
        Ok(range)
    }

    pub fn is_single(&self) -> bool {
        self.start == self.stop
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Err(Error::InvalidConfig(format!(
                "empty range {}:{}:{} (need step > 0 and start <= stop)",
                self.start, self.step, self.stop
            )));
        }
        Ok(())
    }

    /// Grid points `start + i·step` up to `stop`, rounded to 1e-9.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

/// A fully specified sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub swept: SweptVar,
    pub range: ValueRange,
    pub m: usize,
    pub k: usize,
    pub snr_db: f64,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    pub channel: ChannelModel,
    pub direction: Direction,
}

impl SweepSpec {
    /// Checks the range, trial count and every (M, K) pair of the sweep.
    pub fn validate(&self) -> Result<()> {
        self.range.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme is required".into()));
        }
        if let ChannelModel::MmWave(p) = &self.channel {
            p.validate()?;
        }
        for (m, k, _) in self.points()? {
            if k == 0 || m == 0 {
                return Err(Error::InvalidConfig(format!("M and K must be positive (M = {m}, K = {k})")));
            }
            if m % k != 0 {
                return Err(Error::InvalidConfig(format!("M = {m} is not divisible by K = {k}")));
            }
        }
        Ok(())
    }

    /// (M, K, SNR dB) per swept value.
    fn points(&self) -> Result<Vec<(usize, usize, f64)>> {
        let as_count = |x: f64| -> Result<usize> {
            if x < 1.0 || x.fract() != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{} must be a positive integer, got {x}",
                    self.swept.as_str()
                )));
            }
            Ok(x as usize)
        };
        self.range
            .values()
            .into_iter()
            .map(|v| match self.swept {
                SweptVar::SnrDb => Ok((self.m, self.k, v)),
                SweptVar::M => Ok((as_count(v)?, self.k, self.snr_db)),
                SweptVar::K => Ok((self.m, as_count(v)?, self.snr_db)),
            })
            .collect()
    }
}

/// One CSV row: one swept value and one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub swept_var: SweptVar,
    pub value: f64,
    pub scheme: Scheme,
    pub direction: Direction,
    pub channel_model: &'static str,
    pub trials: usize,
    pub sum_rate_sim: f64,
    pub stderr: f64,
    pub sum_rate_closed_form: Option<f64>,
    pub m: usize,
    pub k: usize,
}

/// Runs a sweep. SNR sweeps share channel draws across all points.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    let row = |value: f64, scheme: Scheme, m: usize, k: usize, est: &crate::rate::RateEstimate| SweepRow {
        swept_var: spec.swept,
        value,
        scheme,
        direction: spec.direction,
        channel_model: spec.channel.kind().as_str(),
        trials: est.trials,
        sum_rate_sim: est.sum_rate,
        stderr: est.sum_standard_error(k),
        sum_rate_closed_form: est.closed_form_sum(k),
        m,
        k,
    };
    match spec.swept {
        SweptVar::SnrDb => {
            let values = spec.range.values();
            let gammas: Vec<f64> = values.iter().map(|&db| db_to_linear(db)).collect();
            let cfg = SystemConfig::with_rf_per_user(spec.m, spec.k, gammas[0], spec.seed)?;
            let est = simulate_rates(&cfg, &spec.channel, spec.direction, &spec.schemes, &gammas, spec.trials)?;
            for (i, &v) in values.iter().enumerate() {
                for (s, &scheme) in spec.schemes.iter().enumerate() {
                    rows.push(row(v, scheme, spec.m, spec.k, &est[s][i]));
                }
            }
        }
        SweptVar::M | SweptVar::K => {
            let gamma = db_to_linear(spec.snr_db);
            for (v, (m, k, _)) in spec.range.values().into_iter().zip(spec.points()?) {
                let cfg = SystemConfig::with_rf_per_user(m, k, gamma, spec.seed)?;
                let est = simulate_rates(&cfg, &spec.channel, spec.direction, &spec.schemes, &[gamma], spec.trials)?;
                for (s, &scheme) in spec.schemes.iter().enumerate() {
                    rows.push(row(v, scheme, m, k, &est[s][0]));
                }
            }
        }
    }
    Ok(rows)
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidConfig(format!("CSV write failed: {e}"));
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.swept_var.as_str().to_string(),
            num(r.value),
            r.scheme.as_str().to_string(),
            r.direction.as_str().to_string(),
            r.channel_model.to_string(),
            r.trials.to_string(),
            num(r.sum_rate_sim),
            num(r.stderr),
            r.sum_rate_closed_form.map(num).unwrap_or_default(),
            r.m.to_string(),
            r.k.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn write_moment_csv<W: Write>(results: &[MomentCheckResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidConfig(format!("CSV write failed: {e}"));
    w.write_record(MOMENT_HEADER).map_err(io)?;
    for r in results {
        w.write_record([
            r.name.clone(),
            r.n.to_string(),
            r.k.to_string(),
            num(r.target),
            num(r.estimate),
            num(r.std_error),
            num(r.rel_error),
            num(r.tolerance),
            r.samples.to_string(),
            r.asserted.to_string(),
            r.pass.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("CSV write failed: {e}")))?;
    Ok(())
}

/// Writes to `path`, or stdout when `path` is `None`.
pub fn write_to(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = std::fs::File::create(p)
                .map_err(|e| Error::InvalidConfig(format!("cannot create {}: {e}", p.display())))?;
            f(&mut file)
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

/// Locations where `diffs` changes sign, linearly interpolated in `xs`.
/// Exact zeros count as a crossing at that point.
pub fn sign_changes(xs: &[f64], diffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (&x, &d) in xs.iter().zip(diffs) {
        if d == 0.0 {
            out.push(x);
            prev = None;
            continue;
        }
        if let Some((px, pd)) = prev {
            if (pd < 0.0) != (d < 0.0) {
                out.push(px + (x - px) * pd / (pd - d));
            }
        }
        prev = Some((x, d));
    }
    out
}

/// Named figure presets. Multi-curve figures expand to one spec per K.
pub fn preset(name: &str) -> Result<Vec<SweepSpec>> {
    let base = SweepSpec {
        swept: SweptVar::SnrDb,
        range: ValueRange { start: -10.0, step: 2.0, stop: 20.0 },
        m: 64,
        k: 8,
        snr_db: 10.0,
        schemes: Scheme::ALL.to_vec(),
        trials: DEFAULT_TRIALS,
        seed: 0,
        channel: ChannelModel::Rayleigh,
        direction: Direction::Uplink,
    };
    let specs = match name {
        "fig1a" => [6, 10]
            .into_iter()
            .map(|k| SweepSpec { m: 120, k, range: ValueRange { start: -10.0, step: 2.0, stop: 14.0 }, ..base.clone() })
            .collect(),
        "fig1b" => vec![SweepSpec {
            swept: SweptVar::M,
            range: ValueRange { start: 20.0, step: 10.0, stop: 200.0 },
            m: 120,
            k: 10,
            snr_db: 10.0,
            ..base.clone()
        }],
        "fig2" => vec![SweepSpec {
            range: ValueRange { start: -20.0, step: 2.0, stop: 20.0 },
            schemes: vec![Scheme::Analog, Scheme::Zf],
            ..base.clone()
        }],
        "fig3" => [4, 8]
            .into_iter()
            .map(|k| SweepSpec { k, direction: Direction::Downlink, ..base.clone() })
            .collect(),
        "fig4" => [4, 8]
            .into_iter()
            .map(|k| SweepSpec { k, channel: ChannelModel::MmWave(MmWaveParams { paths: 4, spacing_ratio: 0.5 }), ..base.clone() })
            .collect(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset '{other}' (expected fig1a, fig1b, fig2, fig3 or fig4)"
            )))
        }
    };
    Ok(specs)
}

/// Flat key-value sweep description, as read from a JSON config file or
/// assembled from command-line flags. `m`, `k` and `snr_db` accept either a
/// value or a `start:step:stop` range; at most one of them may be a range.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub m: Option<NumOrText>,
    pub k: Option<NumOrText>,
    pub snr_db: Option<NumOrText>,
    pub schemes: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub channel: Option<String>,
    pub paths: Option<usize>,
    pub spacing: Option<f64>,
    pub direction: Option<String>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NumOrText {
    Num(f64),
    Text(String),
}

impl NumOrText {
    fn range(&self) -> Result<ValueRange> {
        match self {
            NumOrText::Num(x) => Ok(ValueRange::single(*x)),
            NumOrText::Text(s) => ValueRange::parse(s),
        }
    }
}

impl SweepOptions {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("invalid config file: {e}")))
    }

    /// Fields set in `overrides` replace those in `self`.
    pub fn merge(self, overrides: SweepOptions) -> Self {
        Self {
            m: overrides.m.or(self.m),
            k: overrides.k.or(self.k),
            snr_db: overrides.snr_db.or(self.snr_db),
            schemes: overrides.schemes.or(self.schemes),
            trials: overrides.trials.or(self.trials),
            seed: overrides.seed.or(self.seed),
            channel: overrides.channel.or(self.channel),
            paths: overrides.paths.or(self.paths),
            spacing: overrides.spacing.or(self.spacing),
            direction: overrides.direction.or(self.direction),
            out: overrides.out.or(self.out),
        }
    }

    pub fn into_spec(&self) -> Result<SweepSpec> {
        let m = self.m.as_ref().map(NumOrText::range).transpose()?.unwrap_or(ValueRange::single(64.0));
        let k = self.k.as_ref().map(NumOrText::range).transpose()?.unwrap_or(ValueRange::single(8.0));
        let default_snr = if m.is_single() && k.is_single() {
            ValueRange { start: -10.0, step: 2.0, stop: 20.0 }
        } else {
            ValueRange::single(10.0)
        };
        let snr = self.snr_db.as_ref().map(NumOrText::range).transpose()?.unwrap_or(default_snr);

        let ranged: Vec<SweptVar> = [(SweptVar::M, &m), (SweptVar::K, &k), (SweptVar::SnrDb, &snr)]
            .into_iter()
            .filter(|(_, r)| !r.is_single())
            .map(|(v, _)| v)
            .collect();
        let (swept, range) = match ranged.as_slice() {
            [] => (SweptVar::SnrDb, snr),
            [SweptVar::M] => (SweptVar::M, m),
            [SweptVar::K] => (SweptVar::K, k),
            [SweptVar::SnrDb] => (SweptVar::SnrDb, snr),
            _ => return Err(Error::InvalidConfig("only one of m, k and snr_db may be a range".into())),
        };
        let count = |r: &ValueRange, name: &str| -> Result<usize> {
            let x = r.start;
            if x < 1.0 || x.fract() != 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be a positive integer, got {x}")));
            }
            Ok(x as usize)
        };

        let schemes = match &self.schemes {
            Some(s) => s.split(',').map(str::parse).collect::<Result<Vec<Scheme>>>()?,
            None => Scheme::ALL.to_vec(),
        };
        let channel = match self.channel.as_deref().unwrap_or("rayleigh").to_ascii_lowercase().as_str() {
            "rayleigh" => ChannelModel::Rayleigh,
            "mmwave" => ChannelModel::MmWave(MmWaveParams::new(self.paths.unwrap_or(4), self.spacing.unwrap_or(0.5))?),
            other => return Err(Error::InvalidConfig(format!("unknown channel model '{other}'"))),
        };
        let direction = match self.direction.as_deref().unwrap_or("up").to_ascii_lowercase().as_str() {
            "up" | "uplink" => Direction::Uplink,
            "down" | "downlink" => Direction::Downlink,
            other => return Err(Error::InvalidConfig(format!("unknown direction '{other}'"))),
        };

        let spec = SweepSpec {
            swept,
            range,
            m: count(&m, "m")?,
            k: count(&k, "k")?,
            snr_db: snr.start,
            schemes,
            trials: self.trials.unwrap_or(DEFAULT_TRIALS),
            seed: self.seed.unwrap_or(0),
            channel,
            direction,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Human-readable threshold report.
pub fn format_thresholds(report: &ThresholdReport) -> String {
    let k2 = (report.k * report.k) as f64;
    let bound = report.dominance_bound();
    let mut s = format!("M = {}, K = {}, N = {}\n", report.m, report.k, report.m / report.k);
    let relation = if report.mrc_always_dominates { ">" } else { "<=" };
    s.push_str(&format!("K^2 = {k2} {relation} pi(sqrt(5)-1)M/8 = {bound:.4}\n"));
    match report.eta1 {
        Eta1::HybridAlwaysDominates => {
            s.push_str("eta1: not applicable, MRC hybrid dominates analog at all SNR\n");
        }
        Eta1::Threshold(x) => {
            s.push_str(&format!(
                "eta1 = {x:.6} ({:.3} dB): MRC hybrid beats analog below, analog wins above\n",
                linear_to_db(x)
            ));
        }
    }
    match report.eta2_db() {
        Some(db) => s.push_str(&format!(
            "eta2 = {:.6} ({db:.3} dB): analog beats ZF hybrid below, ZF hybrid wins above\n",
            report.eta2
        )),
        None => s.push_str(&format!("eta2 = {:.6}: ZF hybrid beats analog at all SNR\n", report.eta2)),
    }
    s
}

pub fn query_thresholds(m: usize, k: usize) -> Result<String> {
    Ok(format_thresholds(&closed_form::thresholds(m, k)?))
}
