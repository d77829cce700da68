//! Multi-gateway operation: beams are split into clusters and every gateway
//! precodes its own cluster with its own users' CSIT only.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::SystemGeometry;
use crate::error::{config, Error, Result};
use crate::linalg::{select_cols, select_rows, CMat};
use crate::precoders::{GroupChannel, PowerBudget, PrecoderKind, PrecoderSettings, PrecodingMatrix};
use crate::scheduler::constrained_kmeans;

/// Default edge distance in beam radii: first-ring neighbours only.
pub const DEFAULT_EDGE_FACTOR: f64 = 2.2;

const PARTITION_ATTEMPTS: u64 = 16;
const PARTITION_SEED: u64 = 0x6777_5f70_6172_7469;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayClustering {
    /// Beam ids of every cluster, ascending; clusters ordered by first beam.
    pub clusters: Vec<Vec<usize>>,
    /// Cluster of every beam.
    pub of_beam: Vec<usize>,
}

impl GatewayClustering {
    /// Validate and normalize an explicit partition.
    pub fn from_lists(mut clusters: Vec<Vec<usize>>, n_beams: usize) -> Result<Self> {
        let mut of_beam = vec![usize::MAX; n_beams];
        for c in &mut clusters {
            if c.is_empty() {
                return config("gateway cluster is empty");
            }
            c.sort_unstable();
        }
        clusters.sort();
        for (i, c) in clusters.iter().enumerate() {
            for &b in c {
                if b >= n_beams {
                    return config(format!("gateway partition names beam {b} of {n_beams}"));
                }
                if of_beam[b] != usize::MAX {
                    return config(format!("beam {b} appears in two gateway clusters"));
                }
                of_beam[b] = i;
            }
        }
        if let Some(b) = of_beam.iter().position(|&c| c == usize::MAX) {
            return config(format!("beam {b} is not assigned to a gateway"));
        }
        Ok(Self { clusters, of_beam })
    }

    pub fn single(n_beams: usize) -> Self {
        Self { clusters: vec![(0..n_beams).collect()], of_beam: vec![0; n_beams] }
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Every cluster forms one connected component of overlapping beams.
    pub fn is_contiguous(&self, geom: &SystemGeometry) -> bool {
        self.clusters.iter().all(|c| {
            let mut seen = vec![false; c.len()];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..c.len() {
                    if !seen[j] && geom.overlapping(c[i], c[j]) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        })
    }

    /// Beams with a beam of another cluster within `factor` beam radii.
    pub fn edge_beams(&self, geom: &SystemGeometry, factor: f64) -> Vec<bool> {
        (0..geom.n_beams())
            .map(|b| geom.neighbors(b, factor).into_iter().any(|o| self.of_beam[o] != self.of_beam[b]))
            .collect()
    }
}

/// Split the beams into `m` contiguous clusters of at most `ceil(N/m)` beams
/// by capacity-constrained k-means on beam centers.
pub fn partition_clusters(geom: &SystemGeometry, m: usize) -> Result<GatewayClustering> {
    let n = geom.n_beams();
    if m == 0 || m > n {
        return config(format!("gateway count must be in 1..={n}, got {m}"));
    }
    if m == 1 {
        return Ok(GatewayClustering::single(n));
    }
    let cap = n.div_ceil(m);
    let points: Vec<Vec<f64>> = geom.beam_centers.iter().map(|c| c.to_vec()).collect();
    let mut best: Option<(usize, f64, GatewayClustering)> = None;
    for attempt in 0..PARTITION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(PARTITION_SEED ^ attempt);
        let out = constrained_kmeans(&points, m, cap, &mut rng, 50)?;
        let clusters = out.clusters(m);
        if clusters.len() != m {
            continue;
        }
        let candidate = GatewayClustering::from_lists(clusters, n)?;
        if !candidate.is_contiguous(geom) {
            continue;
        }
        let sizes = candidate.clusters.iter().map(Vec::len);
        let spread = sizes.clone().max().unwrap_or(0) - sizes.min().unwrap_or(0);
        let key = (spread, out.objective());
        if best.as_ref().is_none_or(|(s, o, _)| key.0 < *s || (key.0 == *s && key.1 < *o - 1e-12)) {
            best = Some((key.0, key.1, candidate));
        }
    }
    best.map(|b| b.2).ok_or_else(|| Error::Config(format!("no contiguous partition of {n} beams into {m} clusters")))
}

/// Block-diagonal precoder: each gateway solves its cluster's sub-problem on
/// the rows of its own users and its own feed columns of `h_view`.
pub fn per_cluster_precode(
    clustering: &GatewayClustering,
    h_view: &CMat,
    active: &[(usize, &[usize])],
    settings: &PrecoderSettings,
    kind: PrecoderKind,
) -> Result<PrecodingMatrix> {
    let n = h_view.ncols();
    if clustering.of_beam.len() != n {
        return Err(Error::Dimension(format!("{} clustered beams for {n} feeds", clustering.of_beam.len())));
    }
    let mut w = CMat::zeros(n, active.len());
    let mut warnings = Vec::new();
    let mut budget = None;
    for feeds in &clustering.clusters {
        let cols: Vec<usize> = (0..active.len()).filter(|&g| feeds.binary_search(&active[g].0).is_ok()).collect();
        if cols.is_empty() {
            continue;
        }
        let sub = select_cols(h_view, feeds);
        let mut blocks = Vec::with_capacity(cols.len());
        for &g in &cols {
            if let Some(&r) = active[g].1.iter().find(|&&r| r >= sub.nrows()) {
                return Err(Error::MissingRow(r));
            }
            blocks.push(select_rows(&sub, active[g].1));
        }
        let groups = GroupChannel::new(blocks, cols.iter().map(|&g| active[g].0).collect())?;
        let p = settings.precode(kind, &groups)?;
        for (j, &g) in cols.iter().enumerate() {
            for (i, &f) in feeds.iter().enumerate() {
                w[(f, g)] = p.w[(i, j)];
            }
        }
        warnings.extend(p.warnings);
        budget = Some(p.budget);
    }
    let budget = match budget {
        Some(PowerBudget::PerAntenna(_)) => PowerBudget::PerAntenna(vec![settings.feed_power; n]),
        _ => PowerBudget::Sum(settings.feed_power * n as f64),
    };
    Ok(PrecodingMatrix { w, budget, warnings })
}
