//! What the gateway knows about the channel: phase-degraded, sparsified,
//! quantized and stale terminal reports, plus the Walsh-Hadamard sequences
//! that let terminals tell the beams apart.
//!
//! # Report wire format
//!
//! All integers are big-endian.
//!
//! | bytes | field |
//! |-------|-------|
//! | 2 | magic `0x53 0x32` |
//! | 1 | version (`1`) |
//! | 4 | user id |
//! | 8 | report time, milliseconds |
//! | 1 | coefficient count `c` |
//! | 4c | per coefficient: feed index (16 bits), amplitude code, phase code |
//!
//! The amplitude code counts 0.25 dB steps below the strongest coefficient of
//! the row (`0..=160`); `0xFF` marks a coefficient more than 40 dB down, which
//! is reported as zero and must carry phase code 0. The phase code counts
//! steps of 360/256 degrees.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{config, Error, Result};
use crate::linalg::{CMat, ZERO};

pub const MAGIC: [u8; 2] = [0x53, 0x32];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const COEFF_LEN: usize = 4;
pub const AMP_STEP_DB: f64 = 0.25;
pub const AMP_FLOOR_DB: f64 = -40.0;
pub const AMP_ZERO: u8 = 0xFF;
const AMP_MAX_CODE: u8 = 160;
pub const PHASE_STEP: f64 = TAU / 256.0;

/// Fastest report cadence the return channel allows.
pub const MIN_CADENCE_S: f64 = 0.5;
/// Feedback loop delay bounds: report to precoded signal at the terminal.
pub const MIN_DELAY_S: f64 = 0.5;
pub const MAX_DELAY_S: f64 = 0.6;

/// Multiply every entry by an independent `exp(j e)`, `e ~ N(0, sigma^2)`.
/// Magnitudes are untouched.
pub fn degrade_csit<R: Rng + ?Sized>(h: &CMat, phase_sigma_deg: f64, rng: &mut R) -> Result<CMat> {
    if !(phase_sigma_deg >= 0.0 && phase_sigma_deg.is_finite()) {
        return config(format!("phase sigma must be >= 0, got {phase_sigma_deg}"));
    }
    if phase_sigma_deg == 0.0 {
        return Ok(h.clone());
    }
    let err = Normal::new(0.0, phase_sigma_deg.to_radians()).map_err(|e| Error::Config(e.to_string()))?;
    // Column-major draw order, matching nalgebra's storage.
    Ok(h.map(|z| {
        let (r, theta) = z.to_polar();
        Complex64::from_polar(r, theta + err.sample(rng))
    }))
}

/// Keep the `min(m, N)` largest-magnitude entries (ties to the lower feed
/// index) and zero the rest.
pub fn select_strongest(row: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].norm().total_cmp(&row[a].norm()).then(a.cmp(&b)));
    let mut out = vec![ZERO; row.len()];
    for &i in order.iter().take(m) {
        out[i] = row[i];
    }
    out
}

/// A decoded channel report. Coefficient values are relative to the
/// strongest reported coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CsitReport {
    pub user_id: u32,
    pub coefficients: Vec<(usize, Complex64)>,
    pub report_time: f64,
    /// When precoding computed from this report reaches the terminal; set by
    /// the feedback pipeline, unknown for a bare decoded message.
    pub applied_time: Option<f64>,
}

impl CsitReport {
    pub fn staleness(&self) -> Option<f64> {
        self.applied_time.map(|a| a - self.report_time)
    }

    /// Dense row of length `feeds` scaled by `scale`.
    pub fn to_row(&self, feeds: usize, scale: f64) -> Result<Vec<Complex64>> {
        let mut row = vec![ZERO; feeds];
        for &(n, v) in &self.coefficients {
            if n >= feeds {
                return Err(Error::Dimension(format!("feed index {n} out of {feeds}")));
            }
            row[n] = v * scale;
        }
        Ok(row)
    }
}

fn amplitude_code(rel_db: f64) -> u8 {
    if !(rel_db >= AMP_FLOOR_DB) {
        return AMP_ZERO;
    }
    ((-rel_db / AMP_STEP_DB).round() as u8).min(AMP_MAX_CODE)
}

fn phase_code(z: Complex64) -> u8 {
    ((z.arg() / PHASE_STEP).round() as i64).rem_euclid(256) as u8
}

/// Encode an explicit coefficient list.
pub fn encode_coefficients(user_id: u32, coefficients: &[(usize, Complex64)], report_time: f64) -> Result<Vec<u8>> {
    if !(report_time >= 0.0 && report_time.is_finite()) {
        return config(format!("report time must be >= 0, got {report_time}"));
    }
    if coefficients.len() > u8::MAX as usize {
        return config(format!("{} coefficients exceed one report", coefficients.len()));
    }
    let peak = coefficients.iter().map(|c| c.1.norm()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(HEADER_LEN + COEFF_LEN * coefficients.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&user_id.to_be_bytes());
    out.extend_from_slice(&((report_time * 1000.0).round() as u64).to_be_bytes());
    out.push(coefficients.len() as u8);
    for (i, &(feed, v)) in coefficients.iter().enumerate() {
        let feed = u16::try_from(feed).map_err(|_| Error::Config(format!("feed index {feed} exceeds 16 bits")))?;
        if coefficients[..i].iter().any(|c| c.0 == feed as usize) {
            return config(format!("duplicate feed index {feed}"));
        }
        let amp =
            if peak > 0.0 && v.norm() > 0.0 { amplitude_code(20.0 * (v.norm() / peak).log10()) } else { AMP_ZERO };
        let ph = if amp == AMP_ZERO { 0 } else { phase_code(v) };
        out.extend_from_slice(&feed.to_be_bytes());
        out.push(amp);
        out.push(ph);
    }
    Ok(out)
}

/// Encode a sparse row (as produced by [`select_strongest`]); exact zeros are
/// not reported.
pub fn encode_report(user_id: u32, row: &[Complex64], report_time: f64) -> Result<Vec<u8>> {
    let coeffs: Vec<(usize, Complex64)> =
        row.iter().enumerate().filter(|(_, z)| z.norm_sqr() > 0.0).map(|(i, &z)| (i, z)).collect();
    encode_coefficients(user_id, &coeffs, report_time)
}

fn malformed<T>(offset: usize, reason: impl Into<String>) -> Result<T> {
    Err(Error::Malformed { offset, reason: reason.into() })
}

/// Decode one message from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(CsitReport, usize)> {
    if bytes.len() < HEADER_LEN {
        return malformed(bytes.len(), format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()));
    }
    if bytes[0..2] != MAGIC {
        return malformed(0, format!("bad magic {:02x} {:02x}", bytes[0], bytes[1]));
    }
    if bytes[2] != VERSION {
        return malformed(2, format!("unsupported version {}", bytes[2]));
    }
    let user_id = u32::from_be_bytes(bytes[3..7].try_into().unwrap());
    let ms = u64::from_be_bytes(bytes[7..15].try_into().unwrap());
    let count = bytes[15] as usize;
    let total = HEADER_LEN + COEFF_LEN * count;
    if bytes.len() < total {
        return malformed(bytes.len(), format!("truncated body: {count} coefficients need {total} bytes"));
    }
    let mut coefficients = Vec::with_capacity(count);
    for i in 0..count {
        let at = HEADER_LEN + COEFF_LEN * i;
        let feed = u16::from_be_bytes([bytes[at], bytes[at + 1]]) as usize;
        let amp = bytes[at + 2];
        let ph = bytes[at + 3];
        if coefficients.iter().any(|c: &(usize, Complex64)| c.0 == feed) {
            return malformed(at, format!("duplicate feed index {feed}"));
        }
        let value = match amp {
            AMP_ZERO if ph == 0 => ZERO,
            AMP_ZERO => return malformed(at + 3, "nonzero phase on a zero coefficient"),
            a if a > AMP_MAX_CODE => return malformed(at + 2, format!("amplitude code {a} out of range")),
            a => Complex64::from_polar(10f64.powf(-(a as f64) * AMP_STEP_DB / 20.0), ph as f64 * PHASE_STEP),
        };
        coefficients.push((feed, value));
    }
    Ok((CsitReport { user_id, coefficients, report_time: ms as f64 / 1000.0, applied_time: None }, total))
}

/// Decode exactly one message; trailing bytes are an error.
pub fn decode_report(bytes: &[u8]) -> Result<CsitReport> {
    let (report, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return malformed(used, format!("{} trailing bytes", bytes.len() - used));
    }
    Ok(report)
}

/// Decode a concatenation of messages.
pub fn decode_stream(bytes: &[u8]) -> Result<Vec<CsitReport>> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let (r, used) = decode_prefix(&bytes[at..]).map_err(|e| match e {
            Error::Malformed { offset, reason } => Error::Malformed { offset: offset + at, reason },
            other => other,
        })?;
        out.push(r);
        at += used;
    }
    Ok(out)
}

/// Row `beam_id mod order` of the Sylvester-Hadamard matrix of `order`.
pub fn hadamard_sosf(order: usize, beam_id: usize) -> Result<Vec<i8>> {
    if !(2..=256).contains(&order) || !order.is_power_of_two() {
        return config(format!("Walsh-Hadamard order must be a power of two in 2..=256, got {order}"));
    }
    let row = beam_id % order;
    Ok((0..order).map(|j| if (row & j).count_ones().is_multiple_of(2) { 1 } else { -1 }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    pub phase_sigma_deg: f64,
    /// Coefficients reported per terminal (16 or 32).
    pub strongest: usize,
    pub cadence_s: f64,
    pub delay_s: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self { phase_sigma_deg: 10.0, strongest: 16, cadence_s: 0.5, delay_s: 0.55 }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cadence_s >= MIN_CADENCE_S) {
            return config(format!("report cadence {} s is faster than one per {MIN_CADENCE_S} s", self.cadence_s));
        }
        if !(MIN_DELAY_S..=MAX_DELAY_S).contains(&self.delay_s) {
            return config(format!("feedback delay {} s outside [{MIN_DELAY_S}, {MAX_DELAY_S}]", self.delay_s));
        }
        if self.strongest != 16 && self.strongest != 32 {
            return config(format!("reported coefficient count must be 16 or 32, got {}", self.strongest));
        }
        if !(self.phase_sigma_deg >= 0.0 && self.phase_sigma_deg.is_finite()) {
            return config("phase sigma must be >= 0");
        }
        Ok(())
    }

    /// Most recent report instant usable at gateway time `t`.
    pub fn report_instant(&self, t: f64) -> Result<f64> {
        let latest = t - self.delay_s;
        if latest < 0.0 {
            return config(format!("no report is old enough at t = {t} s"));
        }
        let mut tr = (latest / self.cadence_s).floor() * self.cadence_s;
        if tr > latest {
            tr -= self.cadence_s;
        }
        Ok(tr.max(0.0))
    }
}

/// Channel as reconstructed at the gateway from terminal reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedChannelMatrix {
    pub entries: CMat,
    pub staleness: f64,
    pub reports: Vec<CsitReport>,
}

/// Sample the true channel at the most recent report instant, degrade its
/// phases, keep the strongest coefficients, and pass every row through the
/// report codec. Decoded rows are rescaled by their strongest true magnitude,
/// which the gateway tracks through the terminals' SNR reports.
pub fn feedback_pipeline<F, R>(source: F, cfg: &FeedbackConfig, t: f64, rng: &mut R) -> Result<ReportedChannelMatrix>
where
    F: Fn(f64) -> Result<CMat>,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let tr = cfg.report_instant(t)?;
    let h = degrade_csit(&source(tr)?, cfg.phase_sigma_deg, rng)?;
    let (k, n) = h.shape();
    let mut entries = CMat::zeros(k, n);
    let mut reports = Vec::with_capacity(k);
    for row in 0..k {
        let dense: Vec<Complex64> = h.row(row).iter().copied().collect();
        let scale = dense.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sparse = select_strongest(&dense, cfg.strongest);
        let uid = u32::try_from(row).map_err(|_| Error::Config("too many terminals".into()))?;
        let mut report = decode_report(&encode_report(uid, &sparse, tr)?)?;
        report.applied_time = Some(t);
        for (j, v) in report.to_row(n, scale)?.into_iter().enumerate() {
            entries[(row, j)] = v;
        }
        reports.push(report);
    }
    Ok(ReportedChannelMatrix { entries, staleness: t - tr, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_sigma_is_identity() {
        let h = CMat::from_fn(3, 4, |i, j| c(i as f64 - 1.0, j as f64 * 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(degrade_csit(&h, 0.0, &mut rng).unwrap(), h);
        assert!(degrade_csit(&h, -1.0, &mut rng).is_err());
    }

    #[test]
    fn phase_error_has_requested_spread() {
        let h = CMat::from_element(400, 250, c(0.3, -0.4));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = degrade_csit(&h, 10.0, &mut rng).unwrap();
        let diffs: Vec<f64> = h.iter().zip(d.iter()).map(|(a, b)| (b / a).arg().to_degrees()).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 10.0).abs() < 0.2, "std {std}");
        assert!(mean.abs() < 0.2);
        for (a, b) in h.iter().zip(d.iter()) {
            assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * a.norm());
        }
    }

    #[test]
    fn strongest_selection() {
        let row: Vec<_> = (0..7).map(|i| c(i as f64, 0.0)).collect();
        assert_eq!(select_strongest(&row, 16), row);
        let row = vec![c(3.0, 0.0), c(0.0, 5.0), c(-4.0, 0.0), c(1.0, 0.0)];
        assert_eq!(select_strongest(&row, 2), vec![ZERO, c(0.0, 5.0), c(-4.0, 0.0), ZERO]);
        // Ties go to the lower index.
        let tie = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)];
        assert_eq!(select_strongest(&tie, 2), vec![c(1.0, 0.0), c(0.0, 1.0), ZERO]);
    }

    #[test]
    fn zero_row_has_no_coefficients() {
        let bytes = encode_report(9, &[ZERO; 5], 1.5).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(bytes[15], 0);
        let r = decode_report(&bytes).unwrap();
        assert!(r.coefficients.is_empty());
        assert_eq!(r.report_time, 1.5);
        assert_eq!(encode_coefficients(9, &r.coefficients, r.report_time).unwrap(), bytes);
    }

    #[test]
    fn single_coefficient_roundtrip() {
        let mut row = vec![ZERO; 8];
        row[3] = c(1.0, 0.0);
        let r = decode_report(&encode_report(1, &row, 0.0).unwrap()).unwrap();
        assert_eq!(r.coefficients.len(), 1);
        let (feed, v) = r.coefficients[0];
        assert_eq!(feed, 3);
        assert!((20.0 * v.norm().log10()).abs() <= 0.25);
        assert!(v.arg().to_degrees().abs() <= 1.41);
    }

    #[test]
    fn exact_header_layout() {
        let mut row = vec![ZERO; 3];
        row[2] = c(0.0, 2.0);
        row[0] = c(-0.0201, 0.0);
        let b = encode_report(0x01020304, &row, 1.234).unwrap();
        assert_eq!(&b[..HEADER_LEN], &[0x53, 0x32, 1, 1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0x04, 0xD2, 2]);
        // Feed 0 is 40 dB below the peak: code 160, phase 180 degrees = 128.
        assert_eq!(&b[16..20], &[0, 0, 160, 128]);
        // Feed 2 is the peak at +90 degrees = 64.
        assert_eq!(&b[20..24], &[0, 2, 0, 64]);
    }

    #[test]
    fn weak_coefficients_are_zeroed() {
        let row = vec![c(1.0, 0.0), c(0.0, 0.009)];
        let b = encode_report(0, &row, 0.0).unwrap();
        assert_eq!(&b[20..24], &[0, 1, AMP_ZERO, 0]);
        let r = decode_report(&b).unwrap();
        assert_eq!(r.coefficients[1], (1, ZERO));
    }

    #[test]
    fn malformed_messages_report_offsets() {
        let mut row = vec![ZERO; 4];
        row[1] = c(1.0, 1.0);
        row[2] = c(0.5, 0.0);
        let good = encode_report(5, &row, 2.0).unwrap();
        let err = |b: &[u8]| match decode_report(b) {
            Err(Error::Malformed { offset, .. }) => offset,
            other => panic!("expected malformed, got {other:?}"),
        };
        assert_eq!(err(&good[..10]), 10);
        assert_eq!(err(&good[..good.len() - 1]), good.len() - 1);
        let mut bad = good.clone();
        bad[0] = 0;
        assert_eq!(err(&bad), 0);
        let mut bad = good.clone();
        bad[2] = 7;
        assert_eq!(err(&bad), 2);
        let mut bad = good.clone();
        bad[22] = 200;
        assert_eq!(err(&bad), 22);
        let mut bad = good.clone();
        bad[20..22].copy_from_slice(&[0, 1]);
        assert_eq!(err(&bad), 20);
        let mut long = good.clone();
        long.push(0);
        assert_eq!(err(&long), good.len());
    }

    #[test]
    fn stream_decoding() {
        let a = encode_report(1, &[c(1.0, 0.0)], 0.5).unwrap();
        let b = encode_report(2, &[ZERO, c(0.0, 1.0)], 1.0).unwrap();
        let mut both = a.clone();
        both.extend_from_slice(&b);
        let reps = decode_stream(&both).unwrap();
        assert_eq!(reps.len(), 2);
        assert_eq!(reps[1].user_id, 2);
        both.truncate(both.len() - 2);
        match decode_stream(&both) {
            Err(Error::Malformed { offset, .. }) => assert_eq!(offset, both.len()),
            other => panic!("{other:?}"),
        }
    }

    fn sylvester(order: usize) -> Vec<Vec<i8>> {
        let mut h = vec![vec![1i8]];
        while h.len() < order {
            let n = h.len();
            let mut next = vec![vec![0i8; 2 * n]; 2 * n];
            for i in 0..n {
                for j in 0..n {
                    next[i][j] = h[i][j];
                    next[i][j + n] = h[i][j];
                    next[i + n][j] = h[i][j];
                    next[i + n][j + n] = -h[i][j];
                }
            }
            h = next;
        }
        h
    }

    #[test]
    fn hadamard_rows() {
        assert_eq!(hadamard_sosf(2, 0).unwrap(), vec![1, 1]);
        assert_eq!(hadamard_sosf(2, 1).unwrap(), vec![1, -1]);
        assert_eq!(hadamard_sosf(4, 6).unwrap(), hadamard_sosf(4, 2).unwrap());
        for order in [2, 4, 8, 16, 32, 64] {
            let oracle = sylvester(order);
            for (i, row) in oracle.iter().enumerate() {
                assert_eq!(&hadamard_sosf(order, i).unwrap(), row);
            }
        }
        for bad in [0, 1, 3, 12, 512] {
            assert!(hadamard_sosf(bad, 0).is_err());
        }
    }

    #[test]
    fn cadence_and_delay_limits() {
        let bad = FeedbackConfig { cadence_s: 0.4, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        assert!(FeedbackConfig { delay_s: 0.45, ..Default::default() }.validate().is_err());
        assert!(FeedbackConfig { delay_s: 0.65, ..Default::default() }.validate().is_err());
        assert!(FeedbackConfig { strongest: 8, ..Default::default() }.validate().is_err());
        let h = |_t: f64| Ok(CMat::identity(2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(feedback_pipeline(h, &bad, 10.0, &mut rng).is_err());
        assert!(feedback_pipeline(h, &FeedbackConfig::default(), 0.3, &mut rng).is_err());
    }

    #[test]
    fn static_channel_reports_exactly_on_support() {
        let h0 = CMat::from_fn(3, 5, |i, j| Complex64::from_polar(1.0 + (i + j) as f64 * 0.1, 0.0));
        let cfg = FeedbackConfig { phase_sigma_deg: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = feedback_pipeline(|_| Ok(h0.clone()), &cfg, 7.3, &mut rng).unwrap();
        for (a, b) in h0.iter().zip(rep.entries.iter()) {
            // Only quantization remains: half an amplitude step, zero phase.
            assert!((20.0 * (b.norm() / a.norm()).log10()).abs() <= 0.125 + 1e-12);
            assert!(b.arg().abs() < 1e-12);
        }
        assert!(rep.staleness >= 0.5);
        for r in &rep.reports {
            assert!(r.staleness().unwrap() >= 0.5);
        }
    }

    #[test]
    fn drift_lag_tracks_cadence_window() {
        let rate = 1f64.to_radians();
        let src = |t: f64| Ok(CMat::from_element(1, 1, Complex64::from_polar(1.0, rate * t)));
        let cfg = FeedbackConfig { phase_sigma_deg: 0.0, strongest: 16, cadence_s: 1.0, delay_s: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for &t in &[10.5, 10.75, 11.2, 11.49] {
            let rep = feedback_pipeline(src, &cfg, t, &mut rng).unwrap();
            let truth = src(t).unwrap()[(0, 0)];
            let lag = (truth / rep.entries[(0, 0)]).arg().to_degrees();
            let half_step = PHASE_STEP.to_degrees() / 2.0;
            assert!(lag >= 0.5 - half_step && lag <= 1.5 + half_step, "t {t}: lag {lag}");
            assert!((rep.staleness - lag).abs() <= half_step + 1e-9);
        }
    }
}
