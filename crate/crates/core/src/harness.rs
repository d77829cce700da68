//! Monte Carlo driver: user drops, feedback, scheduling, precoding and link
//! evaluation over the configured grid, with CSV output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{build_geometry, drop_users, sample_phases, ChannelSource, SystemGeometry};
use crate::config::{CsitCondition, Partition, ScenarioConfig};
use crate::csit::feedback_pipeline;
use crate::error::{config, Error, Result};
use crate::linalg::CMat;
use crate::link::{evaluate_schedule, four_color_reference, BeamThroughput};
use crate::multigw::{partition_clusters, per_cluster_precode, GatewayClustering};
use crate::precoders::{GroupChannel, PrecoderKind};
use crate::scheduler::{csi_schedule, guc_schedule, random_schedule, CsiMode, Schedule, SchedulerKind};

pub const CSV_HEADER: &str = "run,precoder,scheduler,users_per_frame,csit,beam,throughput_bps";

/// Precoder label of the four-color reference rows.
pub const FOUR_COLOR: &str = "four_color";
/// CSIT label of rows that use no channel knowledge.
pub const NO_CSIT: &str = "none";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `r`: `splitmix64(seed + (r + 1) * 0x9E3779B97F4A7C15)`.
pub fn child_seed(seed: u64, r: u64) -> u64 {
    mix(seed.wrapping_add(r.wrapping_add(1).wrapping_mul(GOLDEN)))
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, tag))
}

const STREAM_DROP: u64 = 1;
const STREAM_PHASE: u64 = 2;
const STREAM_CSIT: u64 = 3;
const STREAM_SCHED: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run: usize,
    pub precoder: String,
    pub scheduler: String,
    pub users_per_frame: usize,
    pub csit: String,
    pub beam: usize,
    /// NaN marks a failed cell.
    pub throughput_bps: f64,
}

impl Row {
    fn same(&self, other: &Row) -> bool {
        let t = self.throughput_bps.to_bits() == other.throughput_bps.to_bits()
            || (self.throughput_bps.is_nan() && other.throughput_bps.is_nan());
        t && self.run == other.run
            && self.precoder == other.precoder
            && self.scheduler == other.scheduler
            && self.users_per_frame == other.users_per_frame
            && self.csit == other.csit
            && self.beam == other.beam
    }
}

/// Rows equal field by field, NaN matching NaN.
pub fn rows_equal(a: &[Row], b: &[Row]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub precoder: String,
    pub scheduler: String,
    pub users_per_frame: usize,
    pub csit: String,
}

impl CellKey {
    pub fn new(precoder: &str, scheduler: &str, users_per_frame: usize, csit: &str) -> Self {
        Self { precoder: precoder.into(), scheduler: scheduler.into(), users_per_frame, csit: csit.into() }
    }

    fn of(row: &Row) -> Self {
        Self::new(&row.precoder, &row.scheduler, row.users_per_frame, &row.csit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub run: usize,
    pub cell: CellKey,
    pub message: String,
}

/// Statistics of the per-run system mean throughput of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub cell: CellKey,
    pub runs: usize,
    pub failures: usize,
    pub mean: f64,
    pub std: f64,
    /// Half width of the normal 95% interval of the mean.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub runs: usize,
    pub n_beams: usize,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
}

impl ScenarioResult {
    /// Cells in first-appearance order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out: Vec<CellKey> = Vec::new();
        for r in &self.rows {
            if r.run != self.rows[0].run {
                break;
            }
            let k = CellKey::of(r);
            if out.last() != Some(&k) && !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Per-beam throughput of one cell in one run.
    pub fn beams(&self, run: usize, cell: &CellKey) -> Vec<f64> {
        self.rows.iter().filter(|r| r.run == run && CellKey::of(r) == *cell).map(|r| r.throughput_bps).collect()
    }

    /// Mean over beams of one cell, per run; NaN for failed runs.
    pub fn run_means(&self, cell: &CellKey) -> Vec<f64> {
        let mut sum = vec![0.0; self.runs];
        let mut n = vec![0usize; self.runs];
        for r in self.rows.iter().filter(|r| CellKey::of(r) == *cell) {
            sum[r.run] += r.throughput_bps;
            n[r.run] += 1;
        }
        sum.iter().zip(&n).map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 }).collect()
    }

    pub fn aggregates(&self) -> Vec<CellStats> {
        self.cells()
            .into_iter()
            .map(|cell| {
                let means = self.run_means(&cell);
                let ok: Vec<f64> = means.iter().copied().filter(|m| !m.is_nan()).collect();
                let n = ok.len();
                let mean = if n == 0 { f64::NAN } else { ok.iter().sum::<f64>() / n as f64 };
                let std = if n < 2 {
                    0.0
                } else {
                    (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                };
                CellStats {
                    ci95: if n == 0 { f64::NAN } else { 1.96 * std / (n as f64).sqrt() },
                    failures: means.len() - n,
                    runs: n,
                    mean,
                    std,
                    cell,
                }
            })
            .collect()
    }
}

fn user_rows(pool: usize, count: usize, n_beams: usize) -> Vec<Vec<usize>> {
    (0..n_beams).map(|b| (b * pool..b * pool + count).collect()).collect()
}

fn groups_for(view: &CMat, active: &[(usize, &[usize])]) -> Result<GroupChannel> {
    let members: Vec<Vec<usize>> = active.iter().map(|(_, f)| f.to_vec()).collect();
    GroupChannel::from_rows(view, &members, active.iter().map(|(b, _)| *b).collect())
}

/// Geometry and gateway clusterings shared by all runs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub geometry: SystemGeometry,
    pub clusterings: Vec<(usize, GatewayClustering)>,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let geometry = build_geometry(&cfg.geometry)?;
    let mut clusterings = Vec::new();
    for &m in &cfg.gateways.counts {
        let c = match &cfg.gateways.partition {
            Partition::Auto => partition_clusters(&geometry, m)?,
            Partition::Explicit(lists) => {
                let c = GatewayClustering::from_lists(lists.clone(), geometry.n_beams())?;
                if c.n_clusters() != m {
                    return config(format!(
                        "explicit partition has {} clusters, gateways.count is {m}",
                        c.n_clusters()
                    ));
                }
                c
            }
        };
        clusterings.push((m, c));
    }
    Ok(Prepared { geometry, clusterings })
}

/// Precoder labels evaluated for `kind`: the single-gateway path, then one
/// per configured gateway count.
fn labels(kind: PrecoderKind, clusterings: &[(usize, GatewayClustering)]) -> Vec<String> {
    std::iter::once(kind.name().to_string())
        .chain(clusterings.iter().map(|(m, _)| format!("{}@gw{m}", kind.name())))
        .collect()
}

struct RunOutput {
    rows: Vec<Row>,
    failures: Vec<Failure>,
}

impl RunOutput {
    fn push(&mut self, run: usize, cell: CellKey, outcome: Result<BeamThroughput>, n_beams: usize) {
        match outcome {
            Ok(t) => {
                for (beam, &v) in t.per_beam.iter().enumerate() {
                    self.rows.push(row(run, &cell, beam, v));
                }
            }
            Err(e) => {
                for beam in 0..n_beams {
                    self.rows.push(row(run, &cell, beam, f64::NAN));
                }
                self.failures.push(Failure { run, cell, message: e.to_string() });
            }
        }
    }
}

fn row(run: usize, cell: &CellKey, beam: usize, v: f64) -> Row {
    Row {
        run,
        precoder: cell.precoder.clone(),
        scheduler: cell.scheduler.clone(),
        users_per_frame: cell.users_per_frame,
        csit: cell.csit.clone(),
        beam,
        throughput_bps: v,
    }
}

struct Drop {
    users: Vec<crate::channel::UserTerminal>,
    h_true: CMat,
    reported: CMat,
}

fn draw(cfg: &ScenarioConfig, geom: &SystemGeometry, seed: u64, pool: usize) -> Result<Drop> {
    let users = drop_users(&mut stream(seed, STREAM_DROP), geom, pool, cfg.population.placement, &cfg.rain)?;
    let phases = sample_phases(&mut stream(seed, STREAM_PHASE), &cfg.phases, users.len(), geom.n_beams())?;
    let source = ChannelSource::new(geom.clone(), users, phases, cfg.link.ref_snr_db);
    let t = cfg.csit.eval_time_s;
    let h_true = source.at(t)?.entries;
    let reported = feedback_pipeline(
        |tt| source.at(tt).map(|c| c.entries),
        &cfg.csit.feedback,
        t,
        &mut stream(seed, STREAM_CSIT),
    )?
    .entries;
    Ok(Drop { users: source.users, h_true, reported })
}

fn schedule(
    cfg: &ScenarioConfig,
    kind: SchedulerKind,
    drop: &Drop,
    by_beam: &[Vec<usize>],
    rho: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Schedule> {
    let iters = cfg.kmeans_iters;
    match kind {
        SchedulerKind::Random => random_schedule(by_beam, rho, rng),
        SchedulerKind::Guc => guc_schedule(&drop.users, by_beam, rho, rng, iters),
        SchedulerKind::Perfect => csi_schedule(&drop.h_true, &drop.users, by_beam, rho, CsiMode::Perfect, rng, iters),
        SchedulerKind::Fbc => csi_schedule(&drop.reported, &drop.users, by_beam, rho, CsiMode::Fbc, rng, iters),
    }
}

fn run_one(cfg: &ScenarioConfig, prep: &Prepared, run: usize) -> RunOutput {
    let geom = &prep.geometry;
    let n = geom.n_beams();
    let seed = child_seed(cfg.seed, run as u64);
    let pool = cfg.grid.users_per_frame.iter().map(|&r| cfg.population.users_for(r)).max().unwrap_or(1);
    let mut out = RunOutput { rows: Vec::new(), failures: Vec::new() };
    let drop = draw(cfg, geom, seed, pool);
    let law = &cfg.link.se_law;
    let bw = cfg.link.bandwidth_hz;

    for (i, &rho) in cfg.grid.users_per_frame.iter().enumerate() {
        let by_beam = user_rows(pool, cfg.population.users_for(rho), n);
        for (j, &sk) in cfg.grid.schedulers.iter().enumerate() {
            let mut rng = stream(seed, STREAM_SCHED + (i * 64 + j) as u64);
            let sched = drop.as_ref().map_err(Clone::clone).and_then(|d| schedule(cfg, sk, d, &by_beam, rho, &mut rng));
            for &cond in &cfg.csit.conditions {
                for &pk in &cfg.grid.precoders {
                    for (l, label) in labels(pk, &prep.clusterings).into_iter().enumerate() {
                        let cell = CellKey::new(&label, sk.name(), rho, cond.name());
                        let outcome = match (&drop, &sched) {
                            (Ok(d), Ok(s)) => {
                                let view = match cond {
                                    CsitCondition::Perfect => &d.h_true,
                                    CsitCondition::Reported => &d.reported,
                                };
                                evaluate_schedule(&d.h_true, s, bw, law, |active| {
                                    if l == 0 {
                                        cfg.precoder.precode(pk, &groups_for(view, active)?).map(|p| p.w)
                                    } else {
                                        per_cluster_precode(&prep.clusterings[l - 1].1, view, active, &cfg.precoder, pk)
                                            .map(|p| p.w)
                                    }
                                })
                            }
                            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                        };
                        out.push(run, cell, outcome, n);
                    }
                }
            }
            if cfg.grid.four_color {
                let cell = CellKey::new(FOUR_COLOR, sk.name(), rho, NO_CSIT);
                let outcome = match (&drop, &sched) {
                    (Ok(d), Ok(s)) => four_color_reference(geom, &d.h_true, s, bw, law, cfg.precoder.feed_power),
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                };
                out.push(run, cell, outcome, n);
            }
        }
    }
    out
}

/// Run every configured run on `workers` threads (0 picks the default).
/// Output is identical for any worker count.
pub fn run_scenario(cfg: &ScenarioConfig, workers: usize) -> Result<ScenarioResult> {
    let prep = prepare(cfg)?;
    let outputs = run_all(cfg, &prep, workers)?;
    let mut result =
        ScenarioResult { runs: cfg.runs, n_beams: prep.geometry.n_beams(), rows: Vec::new(), failures: Vec::new() };
    for o in outputs {
        result.rows.extend(o.rows);
        result.failures.extend(o.failures);
    }
    Ok(result)
}

#[cfg(feature = "parallel")]
fn run_all(cfg: &ScenarioConfig, prep: &Prepared, workers: usize) -> Result<Vec<RunOutput>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| (0..cfg.runs).into_par_iter().map(|r| run_one(cfg, prep, r)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_all(cfg: &ScenarioConfig, prep: &Prepared, _workers: usize) -> Result<Vec<RunOutput>> {
    Ok((0..cfg.runs).map(|r| run_one(cfg, prep, r)).collect())
}

/// CSV text of `rows`, header first, LF line ends.
pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.run, r.precoder, r.scheduler, r.users_per_frame, r.csit, r.beam, r.throughput_bps
        );
    }
    s
}

pub fn emit_csv(result: &ScenarioResult, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io { path: path.display().to_string(), message: e.to_string() };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(to_csv(&result.rows).as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return config("CSV header mismatch");
    }
    let bad = |i: usize| Error::Config(format!("CSV line {}: malformed row", i + 2));
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(i));
            }
            Ok(Row {
                run: f[0].parse().map_err(|_| bad(i))?,
                precoder: f[1].to_string(),
                scheduler: f[2].to_string(),
                users_per_frame: f[3].parse().map_err(|_| bad(i))?,
                csit: f[4].to_string(),
                beam: f[5].parse().map_err(|_| bad(i))?,
                throughput_bps: f[6].parse().map_err(|_| bad(i))?,
            })
        })
        .collect()
}
