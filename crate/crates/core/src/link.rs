//! Link evaluation: SINR, spectral efficiency, multicast frame rates and beam
//! throughput, plus the four-color frequency reuse reference.

use std::fmt;

use crate::channel::SystemGeometry;
use crate::error::{config, Error, Result};
use crate::linalg::{row_col, CMat};
use crate::scheduler::Schedule;

/// Shannon cap in bits/s/Hz.
pub const DEFAULT_SE_CAP: f64 = 5.9;
/// Frequency reuse factor of the reference system.
pub const REUSE: usize = 4;

/// DVB-S2X-like step table, `threshold_dB SE` per line.
pub const DVBS2X_TABLE: &str = "\
# threshold_dB  SE (bits/s/Hz)
-2.35 0.49
-1.24 0.66
-0.30 0.79
1.00 0.99
2.23 1.19
3.10 1.32
4.03 1.49
4.68 1.59
5.18 1.65
6.20 1.77
6.62 1.98
7.91 2.23
8.97 2.64
10.21 2.97
11.03 3.17
11.61 3.30
12.73 3.70
13.64 3.95
14.28 4.12
15.69 4.40
16.05 4.45
17.73 4.94
19.57 5.20
21.50 5.90
";

#[derive(Debug, Clone, PartialEq)]
pub enum SeLaw {
    /// `min(log2(1 + SINR), cap)`.
    Shannon { cap: f64 },
    /// `(threshold_dB, SE)` steps with strictly increasing thresholds.
    Table(Vec<(f64, f64)>),
}

impl Default for SeLaw {
    fn default() -> Self {
        SeLaw::Shannon { cap: DEFAULT_SE_CAP }
    }
}

impl fmt::Display for SeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeLaw::Shannon { cap } => write!(f, "shannon(cap {cap})"),
            SeLaw::Table(rows) => write!(f, "table({} rows)", rows.len()),
        }
    }
}

impl SeLaw {
    pub fn shannon(cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return config(format!("spectral efficiency cap must be > 0, got {cap}"));
        }
        Ok(SeLaw::Shannon { cap })
    }

    /// Parse `threshold_dB SE` lines; `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [t, s] => t.parse::<f64>().ok().zip(s.parse::<f64>().ok()),
                _ => None,
            };
            let Some((t, s)) = parsed.filter(|(t, s)| t.is_finite() && s.is_finite() && *s >= 0.0) else {
                return config(format!("SE table line {}: expected 'threshold_dB SE', got '{raw}'", i + 1));
            };
            if let Some(&(pt, ps)) = rows.last() {
                if t <= pt {
                    return config(format!("SE table line {}: thresholds must increase", i + 1));
                }
                if s < ps {
                    return config(format!("SE table line {}: efficiency decreases", i + 1));
                }
            }
            rows.push((t, s));
        }
        if rows.is_empty() {
            return config("SE table is empty");
        }
        Ok(SeLaw::Table(rows))
    }

    pub fn spectral_efficiency(&self, sinr: f64) -> f64 {
        let sinr = sinr.max(0.0);
        match self {
            SeLaw::Shannon { cap } => (1.0 + sinr).log2().min(*cap),
            SeLaw::Table(rows) => {
                let db = 10.0 * sinr.log10();
                rows.iter().take_while(|(t, _)| *t <= db).last().map_or(0.0, |r| r.1)
            }
        }
    }
}

/// Per-user link figures for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLink {
    pub user: usize,
    pub group: usize,
    pub sinr: f64,
    /// Carrier over co-channel interference; infinite without interference.
    pub c_over_i: f64,
}

/// SINR of every member of `active` (column `g` of `w` serves `active[g]`)
/// against the true channel `h`, with unit noise.
pub fn compute_sinr(h: &CMat, w: &CMat, active: &[Vec<usize>]) -> Result<Vec<UserLink>> {
    if h.ncols() != w.nrows() {
        return Err(Error::Dimension(format!("channel has {} feeds, precoder {}", h.ncols(), w.nrows())));
    }
    if active.len() != w.ncols() {
        return Err(Error::Dimension(format!("{} groups for {} precoder columns", active.len(), w.ncols())));
    }
    let mut out = Vec::new();
    for (g, members) in active.iter().enumerate() {
        for &k in members {
            if k >= h.nrows() {
                return Err(Error::MissingRow(k));
            }
            let mut signal = 0.0;
            let mut interference = 0.0;
            for c in 0..w.ncols() {
                let p = row_col(h, k, w, c).norm_sqr();
                if c == g {
                    signal = p;
                } else {
                    interference += p;
                }
            }
            out.push(UserLink {
                user: k,
                group: g,
                sinr: signal / (interference + 1.0),
                c_over_i: if interference > 0.0 { signal / interference } else { f64::INFINITY },
            });
        }
    }
    Ok(out)
}

/// Multicast rate: the weakest member sets the modcod.
pub fn frame_rate(member_sinr: &[f64], bandwidth_hz: f64, law: &SeLaw) -> Result<f64> {
    if member_sinr.is_empty() {
        return config("frame has no members");
    }
    let worst = member_sinr.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(law.spectral_efficiency(worst) * bandwidth_hz)
}

/// Per-beam average of active-frame rates across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamThroughput {
    /// bits/s per beam; beams with no frames report zero.
    pub per_beam: Vec<f64>,
}

impl BeamThroughput {
    pub fn system_mean(&self) -> f64 {
        if self.per_beam.is_empty() {
            return 0.0;
        }
        self.per_beam.iter().sum::<f64>() / self.per_beam.len() as f64
    }
}

/// `rates[b]` holds beam `b`'s active-frame rate in each epoch it served.
pub fn beam_throughput(rates: &[Vec<f64>]) -> BeamThroughput {
    BeamThroughput {
        per_beam: rates
            .iter()
            .map(|r| if r.is_empty() { 0.0 } else { r.iter().sum::<f64>() / r.len() as f64 })
            .collect(),
    }
}

/// Run every epoch of `schedule`. `precode` gets the active `(beam, frame)`
/// list and returns the `N x G` precoder in the same order; SINR is measured
/// on `h_true`.
pub fn evaluate_schedule<F>(
    h_true: &CMat,
    schedule: &Schedule,
    bandwidth_hz: f64,
    law: &SeLaw,
    mut precode: F,
) -> Result<BeamThroughput>
where
    F: FnMut(&[(usize, &[usize])]) -> Result<CMat>,
{
    let mut rates = vec![Vec::new(); schedule.n_beams()];
    for e in 0..schedule.n_epochs() {
        let active = schedule.active(e);
        let w = precode(&active)?;
        let groups: Vec<Vec<usize>> = active.iter().map(|(_, f)| f.to_vec()).collect();
        let links = compute_sinr(h_true, &w, &groups)?;
        for (g, (beam, _)) in active.iter().enumerate() {
            let sinr: Vec<f64> = links.iter().filter(|l| l.group == g).map(|l| l.sinr).collect();
            rates[*beam].push(frame_rate(&sinr, bandwidth_hz, law)?);
        }
    }
    Ok(beam_throughput(&rates))
}

/// Four-color reuse: each feed serves only its own beam at `feed_power` in a
/// quarter of the band; interference comes from same-color beams only.
pub fn four_color_reference(
    geom: &SystemGeometry,
    h_true: &CMat,
    schedule: &Schedule,
    bandwidth_hz: f64,
    law: &SeLaw,
    feed_power: f64,
) -> Result<BeamThroughput> {
    if !geom.coloring_is_valid() {
        return config("beam coloring is not a proper four-coloring");
    }
    if h_true.ncols() != geom.n_beams() || schedule.n_beams() != geom.n_beams() {
        return Err(Error::Dimension("four-color reference needs one feed and one schedule entry per beam".into()));
    }
    let band = bandwidth_hz / REUSE as f64;
    let mut rates = vec![Vec::new(); geom.n_beams()];
    for e in 0..schedule.n_epochs() {
        let active = schedule.active(e);
        for &(b, frame) in &active {
            let mut sinr = Vec::with_capacity(frame.len());
            for &k in frame {
                if k >= h_true.nrows() {
                    return Err(Error::MissingRow(k));
                }
                let interference: f64 = active
                    .iter()
                    .filter(|(o, _)| *o != b && geom.colors[*o] == geom.colors[b])
                    .map(|(o, _)| feed_power * h_true[(k, *o)].norm_sqr())
                    .sum();
                sinr.push(feed_power * h_true[(k, b)].norm_sqr() / (interference + 1.0));
            }
            rates[b].push(frame_rate(&sinr, band, law)?);
        }
    }
    Ok(beam_throughput(&rates))
}
