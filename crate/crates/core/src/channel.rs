//! Multibeam forward-link channel: hexagonal beam layout, tapered-aperture
//! beam pattern, rain fading and the carrier phase contributors.
//!
//! Angles are in radians throughout. Beam and user positions live in the
//! (u, v) angular plane seen from the satellite; the angular offset between a
//! user and a feed boresight is the Euclidean distance in that plane.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{config, Error, Result};
use crate::linalg::CMat;

pub type Point = [f64; 2];

/// Argument scale of the taper model: the gain is 3 dB down at `u = 2.07123`.
pub const TAPER_U_3DB: f64 = 2.07123;

/// Largest lattice accepted by [`build_geometry`].
pub const MAX_RINGS: usize = 40;

/// Upper clamp on a single rain-fade sample.
pub const MAX_RAIN_DB: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaperModel {
    /// `[J1(u)/(2u) + 36 J3(u)/u^3]^2`, unity at boresight.
    Bessel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaParams {
    pub peak_gain_db: f64,
    pub taper: TaperModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub rings: usize,
    /// 3 dB beam radius in radians.
    pub beam_radius: f64,
    /// Lattice spacing as a multiple of the beam radius. With `sqrt(3)` the
    /// 3 dB circles circumscribe the hexagonal cells.
    pub spacing_factor: f64,
    pub peak_gain_db: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { rings: 1, beam_radius: 0.25f64.to_radians(), spacing_factor: 3f64.sqrt(), peak_gain_db: 52.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    pub beam_centers: Vec<Point>,
    pub beam_radius: f64,
    /// Center-to-center distance of neighboring beams.
    pub spacing: f64,
    pub antenna: AntennaParams,
    /// Four-colour frequency plan, one colour in `0..4` per beam.
    pub colors: Vec<u8>,
}

/// Build a hexagonal lattice of `1 + 3R(R+1)` beams with the standard
/// four-colour reuse plan.
pub fn build_geometry(cfg: &GeometryConfig) -> Result<SystemGeometry> {
    if !(cfg.beam_radius.is_finite() && cfg.beam_radius > 0.0 && cfg.beam_radius < PI / 4.0) {
        return config(format!("beam radius must be in (0, pi/4), got {}", cfg.beam_radius));
    }
    if cfg.rings > MAX_RINGS {
        return config(format!("ring count {} exceeds {}", cfg.rings, MAX_RINGS));
    }
    if !(cfg.spacing_factor.is_finite() && cfg.spacing_factor > 0.0) {
        return config("spacing factor must be positive");
    }
    let spacing = cfg.spacing_factor * cfg.beam_radius;
    let r = cfg.rings as i64;

    // Axial coordinates, ordered by ring and then by angle.
    let mut cells = Vec::new();
    for q in -r..=r {
        for s in (-r).max(-q - r)..=r.min(-q + r) {
            let ring = q.abs().max(s.abs()).max((q + s).abs());
            let x = spacing * (q as f64 + s as f64 / 2.0);
            let y = spacing * (3f64.sqrt() / 2.0) * s as f64;
            let ang = y.atan2(x).rem_euclid(TAU);
            cells.push((ring, ang, q, s, [x, y]));
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let geom = SystemGeometry {
        beam_centers: cells.iter().map(|c| c.4).collect(),
        beam_radius: cfg.beam_radius,
        spacing,
        antenna: AntennaParams { peak_gain_db: cfg.peak_gain_db, taper: TaperModel::Bessel },
        colors: cells.iter().map(|c| (c.2.rem_euclid(2) + 2 * c.3.rem_euclid(2)) as u8).collect(),
    };
    if !geom.coloring_is_valid() {
        return config("beam spacing too tight for a four-colour plan");
    }
    Ok(geom)
}

/// Number of beams in an `R`-ring hexagonal lattice.
pub fn hex_beam_count(rings: usize) -> usize {
    1 + 3 * rings * (rings + 1)
}

fn taper_field(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        // Series of J1(u)/(2u) + 36 J3(u)/u^3 around the origin.
        return 1.0 - 0.078125 * u * u;
    }
    libm::j1(u) / (2.0 * u) + 36.0 * libm::jn(3, u) / (u * u * u)
}

/// Normalized taper gain (unity at boresight) at angular offset `theta` for a
/// beam with 3 dB radius `theta_3db`.
pub fn taper_gain(theta: f64, theta_3db: f64) -> f64 {
    let u = TAPER_U_3DB * theta.sin() / theta_3db.sin();
    let f = taper_field(u);
    f * f
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl SystemGeometry {
    pub fn n_beams(&self) -> usize {
        self.beam_centers.len()
    }

    pub fn peak_gain(&self) -> f64 {
        10f64.powf(self.antenna.peak_gain_db / 10.0)
    }

    /// Angular offset of `pos` from the boresight of `feed`.
    pub fn offset(&self, pos: Point, feed: usize) -> f64 {
        distance(pos, self.beam_centers[feed])
    }

    /// Linear antenna gain of `feed` toward `pos`.
    pub fn beam_gain(&self, pos: Point, feed: usize) -> f64 {
        self.peak_gain() * self.normalized_gain(pos, feed)
    }

    /// Gain relative to boresight, in `[0, 1]`.
    pub fn normalized_gain(&self, pos: Point, feed: usize) -> f64 {
        match self.antenna.taper {
            TaperModel::Bessel => taper_gain(self.offset(pos, feed), self.beam_radius),
        }
    }

    /// Feed with maximal gain toward `pos`; ties go to the lower index.
    pub fn home_beam(&self, pos: Point) -> usize {
        let mut best = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for n in 0..self.n_beams() {
            let g = self.normalized_gain(pos, n);
            if g > best_gain {
                best = n;
                best_gain = g;
            }
        }
        best
    }

    pub fn center_distance(&self, a: usize, b: usize) -> f64 {
        distance(self.beam_centers[a], self.beam_centers[b])
    }

    /// Beams whose 3 dB footprints overlap (centers within two radii).
    pub fn overlapping(&self, a: usize, b: usize) -> bool {
        a != b && self.center_distance(a, b) <= 2.0 * self.beam_radius
    }

    /// Beams within `factor` beam radii of beam `b`, excluding `b`.
    pub fn neighbors(&self, b: usize, factor: f64) -> Vec<usize> {
        (0..self.n_beams()).filter(|&o| o != b && self.center_distance(b, o) <= factor * self.beam_radius).collect()
    }

    /// Exhaustive scan: no two overlapping beams share a colour.
    pub fn coloring_is_valid(&self) -> bool {
        if self.colors.len() != self.n_beams() || self.colors.iter().any(|&c| c > 3) {
            return false;
        }
        (0..self.n_beams())
            .all(|a| (a + 1..self.n_beams()).all(|b| !self.overlapping(a, b) || self.colors[a] != self.colors[b]))
    }

    /// Smallest axis-aligned box containing every 3 dB footprint.
    pub fn coverage_box(&self) -> (Point, Point) {
        let r = self.beam_radius;
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.beam_centers {
            for i in 0..2 {
                lo[i] = lo[i].min(c[i] - r);
                hi[i] = hi[i].max(c[i] + r);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTerminal {
    pub id: usize,
    pub position: Point,
    pub home_beam: usize,
    pub rain_att_db: f64,
    /// Receiver LO phase; mirrors the per-user entry of the phase draw.
    pub lnb_phase: f64,
}

/// Bernoulli-lognormal rain fade: clear sky with probability
/// `clear_sky_prob`, otherwise `exp(N(ln_mean, ln_std^2))` dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainParams {
    pub ln_mean: f64,
    pub ln_std: f64,
    pub clear_sky_prob: f64,
}

impl Default for RainParams {
    fn default() -> Self {
        Self { ln_mean: 0.0, ln_std: 0.7, clear_sky_prob: 0.8 }
    }
}

impl RainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ln_std >= 0.0 && self.ln_std.is_finite()) {
            return config(format!("rain log-std must be >= 0, got {}", self.ln_std));
        }
        if !(0.0..=1.0).contains(&self.clear_sky_prob) {
            return config(format!("clear-sky probability {} outside [0, 1]", self.clear_sky_prob));
        }
        if !self.ln_mean.is_finite() {
            return config("rain log-mean must be finite");
        }
        Ok(())
    }
}

/// Draw one rain attenuation in dB, clamped to `[0, 40]`. Samples are
/// independent of position.
pub fn sample_rain<R: Rng + ?Sized>(rng: &mut R, _pos: Point, params: &RainParams) -> Result<f64> {
    params.validate()?;
    let clear: f64 = rng.random();
    if clear < params.clear_sky_prob {
        return Ok(0.0);
    }
    let z: f64 = Normal::new(params.ln_mean, params.ln_std).map_err(|e| Error::Config(e.to_string()))?.sample(rng);
    Ok(z.exp().clamp(0.0, MAX_RAIN_DB))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// Standard deviation of the per-feed phase drift rate, degrees/second.
    pub drift_std_deg_per_s: f64,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self { drift_std_deg_per_s: 1.0 }
    }
}

/// Carrier phase contributors: a per-feed payload phase with linear drift
/// (common to all terminals) and a per-terminal phase (common to all feeds).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDecomposition {
    pub payload_phase: Vec<f64>,
    pub user_phase: Vec<f64>,
    /// Radians per second, one per feed.
    pub time_drift_rate: Vec<f64>,
}

impl PhaseDecomposition {
    /// Total phase of entry (k, n) at time `t`, wrapped to `[0, 2pi)`.
    pub fn phase(&self, k: usize, n: usize, t: f64) -> f64 {
        (self.payload_phase[n] + self.time_drift_rate[n] * t + self.user_phase[k]).rem_euclid(TAU)
    }
}

pub fn sample_phases<R: Rng + ?Sized>(
    rng: &mut R,
    params: &PhaseParams,
    users: usize,
    feeds: usize,
) -> Result<PhaseDecomposition> {
    if users == 0 || feeds == 0 {
        return Err(Error::Dimension("phase draw needs at least one user and one feed".into()));
    }
    let sigma = params.drift_std_deg_per_s.to_radians();
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return config("drift std must be >= 0");
    }
    let payload_phase = (0..feeds).map(|_| rng.random::<f64>() * TAU).collect();
    let user_phase = (0..users).map(|_| rng.random::<f64>() * TAU).collect();
    let drift = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let time_drift_rate = (0..feeds).map(|_| drift.sample(rng)).collect();
    Ok(PhaseDecomposition { payload_phase, user_phase, time_drift_rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Uniform inside the 3 dB circle, restricted to the beam's own cell.
    Uniform,
    /// Every terminal at its beam's boresight.
    Boresight,
}

/// Drop `per_beam` terminals into every beam. Ids are assigned beam-major.
pub fn drop_users<R: Rng + ?Sized>(
    rng: &mut R,
    geom: &SystemGeometry,
    per_beam: usize,
    placement: Placement,
    rain: &RainParams,
) -> Result<Vec<UserTerminal>> {
    rain.validate()?;
    let mut users = Vec::with_capacity(per_beam * geom.n_beams());
    for b in 0..geom.n_beams() {
        let c = geom.beam_centers[b];
        for _ in 0..per_beam {
            let position = match placement {
                Placement::Boresight => c,
                Placement::Uniform => loop {
                    let rad = geom.beam_radius * rng.random::<f64>().sqrt();
                    let ang = rng.random::<f64>() * TAU;
                    let p = [c[0] + rad * ang.cos(), c[1] + rad * ang.sin()];
                    if geom.home_beam(p) == b {
                        break p;
                    }
                },
            };
            let rain_att_db = sample_rain(rng, position, rain)?;
            users.push(UserTerminal {
                id: users.len(),
                position,
                home_beam: geom.home_beam(position),
                rain_att_db,
                lnb_phase: 0.0,
            });
        }
    }
    Ok(users)
}

/// True channel with unit noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// K x N, rows are terminals and columns are feeds.
    pub entries: CMat,
    /// Clear-sky boresight SNR the rows are scaled to.
    pub noise_ref_snr_db: f64,
}

/// `h_kn = sqrt(snr * g_kn) * 10^(-rain_k/20) * exp(j(payload_n + drift_n t + user_k))`.
pub fn assemble_channel(
    geom: &SystemGeometry,
    users: &[UserTerminal],
    phases: &PhaseDecomposition,
    t: f64,
    ref_snr_db: f64,
) -> Result<ChannelMatrix> {
    let n = geom.n_beams();
    if phases.payload_phase.len() != n || phases.time_drift_rate.len() != n {
        return Err(Error::Dimension(format!("{} feeds but {} payload phases", n, phases.payload_phase.len())));
    }
    if phases.user_phase.len() != users.len() {
        return Err(Error::Dimension(format!("{} users but {} user phases", users.len(), phases.user_phase.len())));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return config(format!("channel time must be >= 0, got {t}"));
    }
    let snr = 10f64.powf(ref_snr_db / 10.0);
    let entries = CMat::from_fn(users.len(), n, |k, f| {
        let u = &users[k];
        let amp = (snr * geom.normalized_gain(u.position, f)).sqrt() * 10f64.powf(-u.rain_att_db / 20.0);
        Complex64::from_polar(amp, phases.phase(k, f, t))
    });
    Ok(ChannelMatrix { entries, noise_ref_snr_db: ref_snr_db })
}

/// A user drop plus its phase draw; evaluates the true channel at any time.
#[derive(Debug, Clone)]
pub struct ChannelSource {
    pub geometry: SystemGeometry,
    pub users: Vec<UserTerminal>,
    pub phases: PhaseDecomposition,
    pub ref_snr_db: f64,
}

impl ChannelSource {
    pub fn new(
        geometry: SystemGeometry,
        mut users: Vec<UserTerminal>,
        phases: PhaseDecomposition,
        ref_snr_db: f64,
    ) -> Self {
        for (u, &p) in users.iter_mut().zip(&phases.user_phase) {
            u.lnb_phase = p;
        }
        Self { geometry, users, phases, ref_snr_db }
    }

    pub fn at(&self, t: f64) -> Result<ChannelMatrix> {
        assemble_channel(&self.geometry, &self.users, &self.phases, t, self.ref_snr_db)
    }
}
