//! Scenario files: flat `key = value` lines with dotted section names.
//! `#` starts a comment; lists are comma separated. Unknown or repeated keys
//! are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{GeometryConfig, PhaseParams, Placement, RainParams, MAX_RINGS};
use crate::csit::FeedbackConfig;
use crate::error::{config, Error, Result};
use crate::link::{SeLaw, DVBS2X_TABLE};
use crate::multigw::DEFAULT_EDGE_FACTOR;
use crate::precoders::{FrameBasedOptions, NullSpaceMode, PrecoderKind, PrecoderSettings};
use crate::scheduler::SchedulerKind;

/// Channel view the precoder works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CsitCondition {
    /// The true channel at transmission time.
    Perfect,
    /// The gateway's reconstruction from degraded, stale reports.
    Reported,
}

impl CsitCondition {
    pub fn name(self) -> &'static str {
        match self {
            Self::Perfect => "perfect",
            Self::Reported => "reported",
        }
    }
}

impl fmt::Display for CsitCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CsitCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(Self::Perfect),
            "reported" => Ok(Self::Reported),
            _ => config(format!("unknown CSIT condition '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub ref_snr_db: f64,
    pub bandwidth_hz: f64,
    pub se_law: SeLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationConfig {
    /// Frames per beam; each beam holds `rho * frames_per_beam` users.
    pub frames_per_beam: usize,
    /// Fixed users per beam, overriding `frames_per_beam`.
    pub users_per_beam: Option<usize>,
    pub placement: Placement,
}

impl PopulationConfig {
    pub fn users_for(&self, rho: usize) -> usize {
        self.users_per_beam.unwrap_or(rho * self.frames_per_beam)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsitSettings {
    pub feedback: FeedbackConfig,
    pub conditions: Vec<CsitCondition>,
    /// Gateway time at which the evaluated frames are sent.
    pub eval_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub precoders: Vec<PrecoderKind>,
    pub schedulers: Vec<SchedulerKind>,
    pub users_per_frame: Vec<usize>,
    /// Also emit the four-color reuse reference per scheduler and `rho`.
    pub four_color: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Partition {
    Auto,
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// Gateway counts evaluated besides the single-gateway baseline.
    pub counts: Vec<usize>,
    pub partition: Partition,
    /// Edge distance in beam radii.
    pub edge_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub runs: usize,
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub link: LinkConfig,
    pub population: PopulationConfig,
    pub rain: RainParams,
    pub phases: PhaseParams,
    pub csit: CsitSettings,
    pub grid: GridConfig,
    pub precoder: PrecoderSettings,
    pub gateways: GatewayConfig,
    pub kmeans_iters: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 1,
            geometry: GeometryConfig::default(),
            link: LinkConfig { ref_snr_db: 15.0, bandwidth_hz: 500e6, se_law: SeLaw::default() },
            population: PopulationConfig { frames_per_beam: 2, users_per_beam: None, placement: Placement::Uniform },
            rain: RainParams::default(),
            phases: PhaseParams::default(),
            csit: CsitSettings {
                feedback: FeedbackConfig::default(),
                conditions: vec![CsitCondition::Reported],
                eval_time_s: 1.2,
            },
            grid: GridConfig {
                precoders: PrecoderKind::ALL.to_vec(),
                schedulers: vec![SchedulerKind::Random],
                users_per_frame: vec![1, 2, 3, 4, 6],
                four_color: true,
            },
            precoder: PrecoderSettings::default(),
            gateways: GatewayConfig {
                counts: Vec::new(),
                partition: Partition::Auto,
                edge_factor: DEFAULT_EDGE_FACTOR,
            },
            kmeans_iters: 20,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let out: Vec<T> =
        v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect::<Result<_>>()?;
    if out.is_empty() {
        return config(format!("{key}: empty list"));
    }
    Ok(out)
}

fn named<T: FromStr<Err = Error>>(v: &str) -> Result<Vec<T>> {
    let out: Vec<T> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?;
    if out.is_empty() {
        return config("empty list");
    }
    Ok(out)
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => config(format!("{key}: expected true or false, got '{v}'")),
    }
}

/// `0 1 2; 3 4 5` style explicit partition.
fn partition(v: &str) -> Result<Partition> {
    if v == "auto" {
        return Ok(Partition::Auto);
    }
    let clusters = v
        .split(';')
        .map(|c| c.split_whitespace().map(|b| num("gateways.partition", b)).collect::<Result<Vec<usize>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::Explicit(clusters))
}

impl ScenarioConfig {
    /// Parse scenario text. SE table files named by `link.se_law = table:<path>`
    /// resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return config(format!("line {}: expected 'key = value'", i + 1));
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return config(format!("line {}: duplicate key '{k}'", i + 1));
            }
        }
        let mut cfg = Self::default();
        let mut se_cap = None;
        let mut se_law = None;
        for (k, v) in &entries {
            let v = v.as_str();
            let key = k.as_str();
            match key {
                "runs" => cfg.runs = num(key, v)?,
                "seed" => cfg.seed = num(key, v)?,
                "geometry.rings" => cfg.geometry.rings = num(key, v)?,
                "geometry.beam_radius_deg" => cfg.geometry.beam_radius = num::<f64>(key, v)?.to_radians(),
                "geometry.spacing_factor" => cfg.geometry.spacing_factor = num(key, v)?,
                "geometry.peak_gain_db" => cfg.geometry.peak_gain_db = num(key, v)?,
                "link.ref_snr_db" => cfg.link.ref_snr_db = num(key, v)?,
                "link.bandwidth_hz" => cfg.link.bandwidth_hz = num(key, v)?,
                "link.se_law" => se_law = Some(v.to_string()),
                "link.se_cap" => se_cap = Some(num::<f64>(key, v)?),
                "link.feed_power" => cfg.precoder.feed_power = num(key, v)?,
                "population.frames_per_beam" => cfg.population.frames_per_beam = num(key, v)?,
                "population.users_per_beam" => cfg.population.users_per_beam = Some(num(key, v)?),
                "population.placement" => {
                    cfg.population.placement = match v {
                        "uniform" => Placement::Uniform,
                        "boresight" => Placement::Boresight,
                        _ => return config(format!("{key}: unknown placement '{v}'")),
                    }
                }
                "rain.ln_mean" => cfg.rain.ln_mean = num(key, v)?,
                "rain.ln_std" => cfg.rain.ln_std = num(key, v)?,
                "rain.clear_sky_prob" => cfg.rain.clear_sky_prob = num(key, v)?,
                "phases.drift_std_deg_per_s" => cfg.phases.drift_std_deg_per_s = num(key, v)?,
                "csit.phase_sigma_deg" => cfg.csit.feedback.phase_sigma_deg = num(key, v)?,
                "csit.m" => cfg.csit.feedback.strongest = num(key, v)?,
                "csit.cadence_s" => cfg.csit.feedback.cadence_s = num(key, v)?,
                "csit.delay_s" => cfg.csit.feedback.delay_s = num(key, v)?,
                "csit.eval_time_s" => cfg.csit.eval_time_s = num(key, v)?,
                "csit.conditions" => cfg.csit.conditions = named(v).map_err(|e| prefix(key, e))?,
                "grid.precoders" => cfg.grid.precoders = named(v).map_err(|e| prefix(key, e))?,
                "grid.schedulers" => cfg.grid.schedulers = named(v).map_err(|e| prefix(key, e))?,
                "grid.users_per_frame" => cfg.grid.users_per_frame = list(key, v)?,
                "grid.four_color" => cfg.grid.four_color = flag(key, v)?,
                "precoder.mmse_alpha" => cfg.precoder.mmse_alpha = if v == "auto" { None } else { Some(num(key, v)?) },
                "precoder.bsvd_fallback" => {
                    cfg.precoder.null_space = match v {
                        "dominant" => NullSpaceMode::DominantSubspace,
                        "none" => NullSpaceMode::Exact,
                        _ => return config(format!("{key}: expected dominant or none, got '{v}'")),
                    }
                }
                "precoder.mmse_power" => cfg.precoder.mmse_power = num(key, v)?,
                "precoder.bsvd_power" => cfg.precoder.bsvd_power = num(key, v)?,
                "precoder.fb_max_iters" => cfg.precoder.frame_based.max_iters = num(key, v)?,
                "precoder.fb_tol" => cfg.precoder.frame_based.tol = num(key, v)?,
                "precoder.fb_patience" => cfg.precoder.frame_based.patience = num(key, v)?,
                "gateways.count" => cfg.gateways.counts = list(key, v)?,
                "gateways.partition" => cfg.gateways.partition = partition(v)?,
                "gateways.edge_factor" => cfg.gateways.edge_factor = num(key, v)?,
                "kmeans.iters" => cfg.kmeans_iters = num(key, v)?,
                _ => return config(format!("unknown key '{key}'")),
            }
        }
        let cap = se_cap.unwrap_or(crate::link::DEFAULT_SE_CAP);
        cfg.link.se_law = match se_law.as_deref() {
            None | Some("shannon") => SeLaw::shannon(cap)?,
            Some("dvbs2x") => SeLaw::parse_table(DVBS2X_TABLE)?,
            Some(other) => match other.strip_prefix("table:") {
                Some(path) => {
                    let full = base.map_or_else(|| Path::new(path).to_path_buf(), |b| b.join(path));
                    let text = std::fs::read_to_string(&full)
                        .map_err(|e| Error::Io { path: full.display().to_string(), message: e.to_string() })?;
                    SeLaw::parse_table(&text)?
                }
                None => return config(format!("link.se_law: unknown law '{other}'")),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return config("runs must be >= 1");
        }
        if self.geometry.rings > MAX_RINGS {
            return config(format!("geometry.rings must be <= {MAX_RINGS}"));
        }
        if !(self.link.bandwidth_hz > 0.0 && self.link.bandwidth_hz.is_finite()) {
            return config("link.bandwidth_hz must be positive");
        }
        if !self.link.ref_snr_db.is_finite() {
            return config("link.ref_snr_db must be finite");
        }
        if !(self.precoder.feed_power > 0.0 && self.precoder.feed_power.is_finite()) {
            return config("link.feed_power must be positive");
        }
        if self.population.frames_per_beam == 0 || self.population.users_per_beam == Some(0) {
            return config("population sizes must be >= 1");
        }
        if self.grid.users_per_frame.contains(&0) {
            return config("grid.users_per_frame values must be >= 1");
        }
        if self.kmeans_iters == 0 {
            return config("kmeans.iters must be >= 1");
        }
        if self.precoder.mmse_alpha.is_some_and(|a| !(a >= 0.0 && a.is_finite())) {
            return config("precoder.mmse_alpha must be >= 0");
        }
        let fb: &FrameBasedOptions = &self.precoder.frame_based;
        if fb.max_iters == 0 || fb.patience == 0 || !(fb.tol >= 0.0) {
            return config("frame-based solver options out of range");
        }
        if self.csit.conditions.is_empty() {
            return config("csit.conditions is empty");
        }
        self.csit.feedback.validate()?;
        self.csit.feedback.report_instant(self.csit.eval_time_s)?;
        self.rain.validate()?;
        if !(self.phases.drift_std_deg_per_s >= 0.0 && self.phases.drift_std_deg_per_s.is_finite()) {
            return config("phases.drift_std_deg_per_s must be >= 0");
        }
        if self.gateways.counts.contains(&0) {
            return config("gateways.count values must be >= 1");
        }
        if !(self.gateways.edge_factor > 0.0) {
            return config("gateways.edge_factor must be positive");
        }
        if matches!(self.gateways.partition, Partition::Explicit(_)) && self.gateways.counts.len() > 1 {
            return config("an explicit gateway partition fixes a single gateway count");
        }
        Ok(())
    }
}

fn prefix(key: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{key}: {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoders::PowerMode;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ScenarioConfig::parse("", None).unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn keys_are_applied() {
        let text = "
# comment
runs = 3
seed = 18446744073709551615
geometry.rings = 2
geometry.beam_radius_deg = 0.5
link.se_law = dvbs2x
population.users_per_beam = 4   # trailing comment
csit.conditions = perfect, reported
grid.precoders = mmse,block_svd
grid.schedulers = guc, fbc, perfect
grid.users_per_frame = 1, 2
precoder.mmse_alpha = 0.5
precoder.bsvd_fallback = none
precoder.bsvd_power = per_antenna
gateways.count = 1, 3
";
        let c = ScenarioConfig::parse(text, None).unwrap();
        assert_eq!(c.runs, 3);
        assert_eq!(c.seed, u64::MAX);
        assert_eq!(c.geometry.rings, 2);
        assert!((c.geometry.beam_radius - 0.5f64.to_radians()).abs() < 1e-18);
        assert!(matches!(c.link.se_law, SeLaw::Table(_)));
        assert_eq!(c.population.users_for(3), 4);
        assert_eq!(c.csit.conditions, vec![CsitCondition::Perfect, CsitCondition::Reported]);
        assert_eq!(c.grid.precoders, vec![PrecoderKind::Mmse, PrecoderKind::BlockSvd]);
        assert_eq!(c.grid.schedulers.len(), 3);
        assert_eq!(c.precoder.mmse_alpha, Some(0.5));
        assert_eq!(c.precoder.null_space, NullSpaceMode::Exact);
        assert_eq!(c.precoder.bsvd_power, PowerMode::PerAntenna);
        assert_eq!(c.precoder.mmse_power, PowerMode::Sum);
        assert_eq!(c.gateways.counts, vec![1, 3]);
    }

    #[test]
    fn bad_input_is_rejected() {
        for bad in [
            "runs = 0",
            "runs = x",
            "nonsense = 1",
            "runs = 1\nruns = 2",
            "just a line",
            "grid.schedulers = kmeans",
            "grid.users_per_frame = 0",
            "csit.cadence_s = 0.25",
            "csit.delay_s = 0.3",
            "csit.m = 8",
            "link.se_law = magic",
            "population.placement = ring",
            "gateways.count = 2, 3\ngateways.partition = 0 1; 2",
        ] {
            assert!(ScenarioConfig::parse(bad, None).is_err(), "{bad}");
        }
    }

    #[test]
    fn table_law_from_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("se.txt"), "0 1\n10 3\n").unwrap();
        let c = ScenarioConfig::parse("link.se_law = table:se.txt", Some(dir.path())).unwrap();
        assert_eq!(c.link.se_law, SeLaw::Table(vec![(0.0, 1.0), (10.0, 3.0)]));
        let err = ScenarioConfig::parse("link.se_law = table:missing.txt", Some(dir.path())).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn explicit_partition_parses() {
        let c = ScenarioConfig::parse("gateways.count = 2\ngateways.partition = 0 1 2; 3 4 5 6", None).unwrap();
        assert_eq!(c.gateways.partition, Partition::Explicit(vec![vec![0, 1, 2], vec![3, 4, 5, 6]]));
    }
}
