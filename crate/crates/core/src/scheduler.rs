//! User scheduling: each beam's users are split into frames of at most `rho`
//! members; one frame per beam is active in every epoch.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::UserTerminal;
use crate::error::{config, Error, Result};
use crate::linalg::CMat;

/// Per-beam frames of user row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// `frames[b][e]` is the frame beam `b` serves in epoch `e`.
    pub frames: Vec<Vec<Vec<usize>>>,
}

impl Schedule {
    pub fn n_beams(&self) -> usize {
        self.frames.len()
    }

    pub fn n_epochs(&self) -> usize {
        self.frames.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Active `(beam, frame)` pairs of epoch `e`, by beam id.
    pub fn active(&self, e: usize) -> Vec<(usize, &[usize])> {
        self.frames.iter().enumerate().filter_map(|(b, f)| f.get(e).map(|fr| (b, fr.as_slice()))).collect()
    }

    /// Check the partition against the intended membership `by_beam`.
    pub fn validate(&self, by_beam: &[Vec<usize>], rho: usize) -> Result<()> {
        if self.frames.len() != by_beam.len() {
            return Err(Error::Dimension(format!(
                "schedule has {} beams, population {}",
                self.frames.len(),
                by_beam.len()
            )));
        }
        for (b, (frames, members)) in self.frames.iter().zip(by_beam).enumerate() {
            let mut seen: Vec<usize> = frames.iter().flatten().copied().collect();
            if frames.iter().any(|f| f.is_empty() || f.len() > rho) {
                return config(format!("beam {b} has a frame outside 1..={rho} members"));
            }
            seen.sort_unstable();
            let mut want = members.clone();
            want.sort_unstable();
            if seen != want {
                return config(format!("beam {b} frames do not partition its users"));
            }
        }
        Ok(())
    }
}

/// Row indices of `users` grouped by home beam, in id order.
pub fn users_by_beam(users: &[UserTerminal], n_beams: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_beams];
    for (i, u) in users.iter().enumerate() {
        out[u.home_beam].push(i);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchedulerKind {
    Random,
    Guc,
    Fbc,
    Perfect,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 4] = [Self::Random, Self::Guc, Self::Fbc, Self::Perfect];

    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Guc => "guc",
            Self::Fbc => "fbc",
            Self::Perfect => "perfect",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config(format!("unknown scheduler '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    /// Cluster of each point.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances after seeding and after every
    /// accepted iteration.
    pub history: Vec<f64>,
}

impl KMeansOutcome {
    pub fn objective(&self) -> f64 {
        *self.history.last().unwrap_or(&0.0)
    }

    /// Non-empty clusters as point lists, by cluster index.
    pub fn clusters(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); k];
        for (p, &c) in self.assignment.iter().enumerate() {
            out[c].push(p);
        }
        out.retain(|c| !c.is_empty());
        out
    }
}

/// Independent seedings tried by [`constrained_kmeans`]; the best is kept.
pub const KMEANS_RESTARTS: usize = 16;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroids(points: &[Vec<f64>], assignment: &[usize], k: usize, previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sum = vec![vec![0.0; dim]; k];
    let mut count = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        count[c] += 1;
        sum[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    (0..k)
        .map(|c| if count[c] == 0 { previous[c].clone() } else { sum[c].iter().map(|s| s / count[c] as f64).collect() })
        .collect()
}

fn sse(points: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let cent = centroids(points, assignment, k, &vec![vec![0.0; points[0].len()]; k]);
    points.iter().zip(assignment).map(|(p, &c)| sq_dist(p, &cent[c])).sum()
}

/// Capacity-constrained nearest-centroid assignment, then pairwise swaps and
/// moves into free capacity while they lower the cost against `cent`.
fn assign(points: &[Vec<f64>], cent: &[Vec<f64>], rho: usize) -> Vec<usize> {
    let k = cent.len();
    let d: Vec<Vec<f64>> = points.iter().map(|p| cent.iter().map(|c| sq_dist(p, c)).collect()).collect();
    let margin = |row: &[f64]| {
        let mut s = row.to_vec();
        s.sort_by(f64::total_cmp);
        if s.len() > 1 {
            s[1] - s[0]
        } else {
            0.0
        }
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    let margins: Vec<f64> = d.iter().map(|r| margin(r)).collect();
    order.sort_by(|&a, &b| margins[b].total_cmp(&margins[a]).then(a.cmp(&b)));
    let mut load = vec![0usize; k];
    let mut out = vec![usize::MAX; points.len()];
    for &p in &order {
        let c = (0..k)
            .filter(|&c| load[c] < rho)
            .min_by(|&a, &b| d[p][a].total_cmp(&d[p][b]))
            .expect("capacity checked by caller");
        out[p] = c;
        load[c] += 1;
    }
    loop {
        let mut improved = false;
        for i in 0..points.len() {
            for c in 0..k {
                if c != out[i] && load[c] < rho && d[i][c] < d[i][out[i]] - 1e-15 {
                    load[out[i]] -= 1;
                    load[c] += 1;
                    out[i] = c;
                    improved = true;
                }
            }
            for j in i + 1..points.len() {
                let (a, b) = (out[i], out[j]);
                if a != b && d[i][b] + d[j][a] < d[i][a] + d[j][b] - 1e-15 {
                    out.swap(i, j);
                    improved = true;
                }
            }
        }
        if !improved {
            return out;
        }
    }
}

fn seed_centroids<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut cent = vec![points[rng.random_range(0..points.len())].clone()];
    while cent.len() < k {
        let d: Vec<f64> =
            points.iter().map(|p| cent.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            d.iter()
                .position(|&x| {
                    r -= x;
                    r < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        cent.push(points[pick].clone());
    }
    cent
}

fn kmeans_once<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rho: usize, rng: &mut R, iters: usize) -> KMeansOutcome {
    let mut cent = seed_centroids(points, k, rng);
    let mut current = assign(points, &cent, rho);
    let mut history = vec![sse(points, &current, k)];
    for _ in 0..iters {
        cent = centroids(points, &current, k, &cent);
        let next = assign(points, &cent, rho);
        let obj = sse(points, &next, k);
        if obj < *history.last().unwrap() - 1e-12 * obj.abs() {
            current = next;
            history.push(obj);
        } else {
            break;
        }
    }
    if let Some(obj) = refine(points, &mut current, k, rho) {
        history.push(obj);
    }
    KMeansOutcome { assignment: current, history }
}

/// Pairwise swaps and moves into free capacity on the exact objective.
/// Returns the new objective when anything changed.
fn refine(points: &[Vec<f64>], assignment: &mut [usize], k: usize, rho: usize) -> Option<f64> {
    let start = sse(points, assignment, k);
    let mut obj = start;
    let mut load = vec![0usize; k];
    assignment.iter().for_each(|&c| load[c] += 1);
    loop {
        let mut improved = false;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if assignment[i] == assignment[j] {
                    continue;
                }
                assignment.swap(i, j);
                let trial = sse(points, assignment, k);
                if trial < obj * (1.0 - 1e-12) {
                    obj = trial;
                    improved = true;
                } else {
                    assignment.swap(i, j);
                }
            }
            for c in 0..k {
                let from = assignment[i];
                if c == from || load[c] >= rho || load[from] == 1 {
                    continue;
                }
                assignment[i] = c;
                let trial = sse(points, assignment, k);
                if trial < obj * (1.0 - 1e-12) {
                    obj = trial;
                    load[from] -= 1;
                    load[c] += 1;
                    improved = true;
                } else {
                    assignment[i] = from;
                }
            }
        }
        if !improved {
            return (obj < start).then_some(obj);
        }
    }
}

/// Lloyd-style clustering of `points` into `k` clusters of at most `rho`.
pub fn constrained_kmeans<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    rho: usize,
    rng: &mut R,
    iters: usize,
) -> Result<KMeansOutcome> {
    if k == 0 || rho == 0 || k.saturating_mul(rho) < points.len() {
        return Err(Error::Capacity { clusters: k, capacity: rho, points: points.len() });
    }
    if iters == 0 {
        return config("k-means needs at least one iteration");
    }
    if points.is_empty() {
        return Ok(KMeansOutcome { assignment: Vec::new(), history: vec![0.0] });
    }
    if points.iter().any(|p| p.len() != points[0].len()) {
        return Err(Error::Dimension("k-means points differ in dimension".into()));
    }
    let k_eff = k.min(points.len());
    let mut best: Option<KMeansOutcome> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = kmeans_once(points, k_eff, rho, rng, iters);
        if best.as_ref().is_none_or(|b| run.objective() < b.objective()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn chop(members: &[usize], rho: usize) -> Vec<Vec<usize>> {
    members.chunks(rho).map(<[usize]>::to_vec).collect()
}

fn beam_rngs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<ChaCha8Rng> {
    (0..n).map(|_| ChaCha8Rng::seed_from_u64(rng.random())).collect()
}

fn check_rho(rho: usize) -> Result<()> {
    if rho == 0 {
        return config("users per frame must be >= 1");
    }
    Ok(())
}

/// Uniform shuffle of every beam's users, chopped into frames of `rho`.
pub fn random_schedule<R: Rng + ?Sized>(by_beam: &[Vec<usize>], rho: usize, rng: &mut R) -> Result<Schedule> {
    check_rho(rho)?;
    let frames = by_beam
        .iter()
        .map(|m| {
            let mut m = m.clone();
            m.shuffle(rng);
            chop(&m, rho)
        })
        .collect();
    Ok(Schedule { frames })
}

fn cluster_beam<R: Rng + ?Sized>(
    members: &[usize],
    points: Vec<Vec<f64>>,
    rho: usize,
    rng: &mut R,
    iters: usize,
) -> Result<Vec<Vec<usize>>> {
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let k = members.len().div_ceil(rho);
    let out = constrained_kmeans(&points, k, rho, rng, iters)?;
    Ok(out.clusters(k).into_iter().map(|c| c.into_iter().map(|p| members[p]).collect()).collect())
}

/// Geographic clustering on terminal positions.
pub fn guc_schedule<R: Rng + ?Sized>(
    users: &[UserTerminal],
    by_beam: &[Vec<usize>],
    rho: usize,
    rng: &mut R,
    iters: usize,
) -> Result<Schedule> {
    check_rho(rho)?;
    let mut rngs = beam_rngs(rng, by_beam.len());
    let mut frames = Vec::with_capacity(by_beam.len());
    for (members, r) in by_beam.iter().zip(&mut rngs) {
        let mut points = Vec::with_capacity(members.len());
        for &u in members {
            let t = users.get(u).ok_or(Error::MissingRow(u))?;
            points.push(t.position.to_vec());
        }
        frames.push(cluster_beam(members, points, rho, r, iters)?);
    }
    Ok(Schedule { frames })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// Cluster on the true channel; frame order as clustered.
    Perfect,
    /// Cluster on the reported channel and align frames across beams.
    Fbc,
}

/// Row `k` rotated so entry `anchor` is real non-negative, unit norm, as
/// `[re.., im..]`.
pub fn phase_aligned(h: &CMat, k: usize, anchor: usize) -> Vec<f64> {
    let row = h.row(k);
    let a = if row[anchor].norm() > 0.0 {
        anchor
    } else {
        (0..row.len()).max_by(|&i, &j| row[i].norm().total_cmp(&row[j].norm())).unwrap_or(0)
    };
    let rot = Complex64::from_polar(1.0, -row[a].arg());
    let norm = row.norm();
    let inv = if norm > 0.0 { norm.recip() } else { 0.0 };
    let z: Vec<Complex64> = row.iter().map(|v| v * rot * inv).collect();
    z.iter().map(|v| v.re).chain(z.iter().map(|v| v.im)).collect()
}

/// `|h_i h_j^H| / (|h_i| |h_j|)`; zero for a zero row.
pub fn similarity(h: &CMat, i: usize, j: usize) -> f64 {
    let (a, b) = (h.row(i), h.row(j));
    let den = a.norm() * b.norm();
    if den == 0.0 {
        return 0.0;
    }
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum::<Complex64>().norm() / den
}

/// Mean pairwise similarity over the members of `a` and `b`; for `a == b`
/// the distinct pairs within the frame (one for singletons).
pub fn frame_similarity(h: &CMat, a: &[usize], b: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (x, &i) in a.iter().enumerate() {
        for (y, &j) in b.iter().enumerate() {
            if std::ptr::eq(a, b) && y <= x {
                continue;
            }
            sum += similarity(h, i, j);
            n += 1;
        }
    }
    if n == 0 {
        1.0
    } else {
        sum / n as f64
    }
}

/// Mean over all frames of their within-frame similarity.
pub fn mean_within_similarity(h: &CMat, schedule: &Schedule) -> f64 {
    let all: Vec<&Vec<usize>> = schedule.frames.iter().flatten().collect();
    if all.is_empty() {
        return 0.0;
    }
    all.iter().map(|f| frame_similarity(h, f, f)).sum::<f64>() / all.len() as f64
}

fn align_epochs(h: &CMat, frames: &mut [Vec<Vec<usize>>]) {
    for b in 1..frames.len() {
        let mut pool: Vec<Vec<usize>> = std::mem::take(&mut frames[b]);
        let mut placed = Vec::with_capacity(pool.len());
        for e in 0.. {
            if pool.is_empty() {
                break;
            }
            let cost = |f: &Vec<usize>| {
                frames[..b]
                    .iter()
                    .filter_map(|other| other.get(e))
                    .map(|g| frame_similarity(h, f, g))
                    .fold(0.0, f64::max)
            };
            let pick = (0..pool.len())
                .min_by(|&i, &j| cost(&pool[i]).total_cmp(&cost(&pool[j])).then(i.cmp(&j)))
                .expect("pool is non-empty");
            placed.push(pool.remove(pick));
        }
        frames[b] = placed;
    }
}

/// Channel-similarity clustering on phase-aligned rows of `h`.
pub fn csi_schedule<R: Rng + ?Sized>(
    h: &CMat,
    users: &[UserTerminal],
    by_beam: &[Vec<usize>],
    rho: usize,
    mode: CsiMode,
    rng: &mut R,
    iters: usize,
) -> Result<Schedule> {
    check_rho(rho)?;
    let mut rngs = beam_rngs(rng, by_beam.len());
    let mut frames = Vec::with_capacity(by_beam.len());
    for (members, r) in by_beam.iter().zip(&mut rngs) {
        let mut points = Vec::with_capacity(members.len());
        for &u in members {
            if u >= h.nrows() {
                return Err(Error::MissingRow(u));
            }
            let home = users.get(u).ok_or(Error::MissingRow(u))?.home_beam;
            if home >= h.ncols() {
                return Err(Error::Dimension(format!("home beam {home} outside {} feeds", h.ncols())));
            }
            points.push(phase_aligned(h, u, home));
        }
        frames.push(cluster_beam(members, points, rho, r, iters)?);
    }
    if mode == CsiMode::Fbc {
        align_epochs(h, &mut frames);
    }
    Ok(Schedule { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    fn brute_force_pairs(points: &[Vec<f64>]) -> f64 {
        // All 15 perfect matchings of 6 points.
        fn rec(left: &[usize], points: &[Vec<f64>]) -> f64 {
            if left.is_empty() {
                return 0.0;
            }
            let a = left[0];
            let mut best = f64::INFINITY;
            for i in 1..left.len() {
                let b = left[i];
                let cost = sq_dist(&points[a], &points[b]) / 2.0;
                let rest: Vec<usize> = left[1..].iter().copied().filter(|&x| x != b).collect();
                best = best.min(cost + rec(&rest, points));
            }
            best
        }
        rec(&(0..points.len()).collect::<Vec<_>>(), points)
    }

    #[test]
    fn kmeans_finds_separated_clumps() {
        let p = pts(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1]]);
        let out = constrained_kmeans(&p, 2, 10, &mut rng(0), 20).unwrap();
        let mut c = out.clusters(2);
        c.sort();
        assert_eq!(c, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn kmeans_singletons_and_capacity_error() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let out = constrained_kmeans(&p, 3, 1, &mut rng(1), 5).unwrap();
        assert_eq!(out.clusters(3).len(), 3);
        assert_eq!(
            constrained_kmeans(&p, 1, 2, &mut rng(1), 5).unwrap_err(),
            Error::Capacity { clusters: 1, capacity: 2, points: 3 }
        );
        assert!(constrained_kmeans(&p, 3, 1, &mut rng(1), 0).is_err());
    }

    #[test]
    fn kmeans_near_exhaustive_optimum() {
        let mut r = rng(2);
        for _ in 0..200 {
            let p: Vec<Vec<f64>> = (0..6).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
            let out = constrained_kmeans(&p, 3, 2, &mut r, 20).unwrap();
            assert!(out.clusters(3).iter().all(|c| c.len() == 2));
            let best = brute_force_pairs(&p);
            assert!(out.objective() <= 1.1 * best + 1e-12, "{} vs {best}", out.objective());
        }
    }

    #[test]
    fn kmeans_history_never_increases() {
        let mut r = rng(3);
        for _ in 0..50 {
            let p: Vec<Vec<f64>> = (0..17).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
            let out = constrained_kmeans(&p, 5, 4, &mut r, 30).unwrap();
            assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
            assert!(out.clusters(5).iter().all(|c| c.len() <= 4));
        }
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let p: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let a = constrained_kmeans(&p, 4, 3, &mut rng(9), 10).unwrap();
        let b = constrained_kmeans(&p, 4, 3, &mut rng(9), 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_schedule_chops() {
        let by_beam = vec![(0..7).collect::<Vec<_>>(), (7..9).collect()];
        let s = random_schedule(&by_beam, 3, &mut rng(4)).unwrap();
        assert_eq!(s.frames[0].iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 1]);
        assert_eq!(s.frames[1].len(), 1);
        s.validate(&by_beam, 3).unwrap();
        assert_eq!(s, random_schedule(&by_beam, 3, &mut rng(4)).unwrap());
        let single = random_schedule(&by_beam, 1, &mut rng(5)).unwrap();
        assert!(single.frames.iter().flatten().all(|f| f.len() == 1));
        assert_eq!(s.n_epochs(), 3);
        assert_eq!(s.active(2).len(), 1);
    }

    fn users_at(points: &[[f64; 2]], beam: usize) -> Vec<UserTerminal> {
        points
            .iter()
            .enumerate()
            .map(|(id, &position)| UserTerminal { id, position, home_beam: beam, rain_att_db: 0.0, lnb_phase: 0.0 })
            .collect()
    }

    #[test]
    fn guc_frames_follow_clumps() {
        let users = users_at(&[[0.0, 0.0], [3.0, 3.0], [0.01, 0.0], [3.01, 3.0], [0.0, 0.01], [3.0, 3.01]], 0);
        let by_beam = users_by_beam(&users, 1);
        let s = guc_schedule(&users, &by_beam, 3, &mut rng(6), 10).unwrap();
        let mut f: Vec<Vec<usize>> = s.frames[0]
            .iter()
            .map(|f| {
                let mut f = f.clone();
                f.sort();
                f
            })
            .collect();
        f.sort();
        assert_eq!(f, vec![vec![0, 2, 4], vec![1, 3, 5]]);
        let all = guc_schedule(&users, &by_beam, 10, &mut rng(6), 10).unwrap();
        assert_eq!(all.frames[0].len(), 1);
    }

    #[test]
    fn csi_schedule_separates_orthogonal_users_only_when_allowed() {
        let users = users_at(&[[0.0, 0.0], [0.0, 0.0]], 0);
        let h = CMat::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.0), Complex64::new(0.0, 1.0)],
        );
        let by_beam = vec![vec![0, 1]];
        let together = csi_schedule(&h, &users, &by_beam, 2, CsiMode::Perfect, &mut rng(7), 5).unwrap();
        assert_eq!(together.frames[0].len(), 1);
        let apart = csi_schedule(&h, &users, &by_beam, 1, CsiMode::Perfect, &mut rng(7), 5).unwrap();
        assert_eq!(apart.frames[0].len(), 2);
        assert_eq!(
            csi_schedule(&h, &users, &[vec![0, 5]], 1, CsiMode::Fbc, &mut rng(7), 5).unwrap_err(),
            Error::MissingRow(5)
        );
    }

    #[test]
    fn collinear_users_have_unit_similarity() {
        let base = [Complex64::new(1.0, 0.5), Complex64::new(-0.2, 0.1), Complex64::new(0.05, 0.0)];
        let scales =
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, -2.0), Complex64::new(0.3, 0.3), Complex64::new(-1.5, 0.2)];
        let h = CMat::from_fn(4, 3, |i, j| base[j] * scales[i]);
        let users = users_at(&[[0.0, 0.0]; 4], 0);
        let s = csi_schedule(&h, &users, &[vec![0, 1, 2, 3]], 2, CsiMode::Perfect, &mut rng(8), 5).unwrap();
        s.validate(&[vec![0, 1, 2, 3]], 2).unwrap();
        assert!((mean_within_similarity(&h, &s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csi_schedule_ignores_per_user_phase() {
        let mut r = rng(10);
        for _ in 0..20 {
            let k = 12;
            let h = CMat::from_fn(k, 3, |_, _| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
            let rot = CMat::from_fn(k, 3, |i, j| h[(i, j)] * Complex64::from_polar(1.0, 0.37 * i as f64 + 1.0));
            let users: Vec<UserTerminal> = (0..k)
                .map(|id| UserTerminal {
                    id,
                    position: [0.0, 0.0],
                    home_beam: id % 3,
                    rain_att_db: 0.0,
                    lnb_phase: 0.0,
                })
                .collect();
            let by_beam = users_by_beam(&users, 3);
            for mode in [CsiMode::Perfect, CsiMode::Fbc] {
                let a = csi_schedule(&h, &users, &by_beam, 2, mode, &mut rng(11), 10).unwrap();
                let b = csi_schedule(&rot, &users, &by_beam, 2, mode, &mut rng(11), 10).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn scheduler_names_roundtrip() {
        for k in SchedulerKind::ALL {
            assert_eq!(k.name().parse::<SchedulerKind>().unwrap(), k);
        }
        assert!("kmeans".parse::<SchedulerKind>().is_err());
    }
}
