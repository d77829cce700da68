//! Linear multigroup multicast precoders.
//!
//! Every precoder maps a [`GroupChannel`] (one block of member rows per
//! simultaneously served frame) to an `N x G` matrix whose column `g` carries
//! the codeword of group `g`. Noise power is one.

mod block_svd;
mod frame_based;
mod maxmin;

use num_complex::Complex64;

use crate::error::{config, Error, Result};
use crate::linalg::{numerical_rank, right_singular, row_col, select_rows, CMat};

pub use block_svd::{block_svd_precoder, NullSpaceMode};
pub use frame_based::{frame_based_precoder, FrameBasedOptions, FrameBasedOutcome};
pub use maxmin::allocate_power;

/// Relative slack allowed on power constraints.
pub const POWER_TOL: f64 = 1e-9;

/// Member channel rows of the groups served in one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupChannel {
    /// One `rho_g x N` block per group.
    pub groups: Vec<CMat>,
    /// Beam each group belongs to.
    pub beams: Vec<usize>,
}

impl GroupChannel {
    pub fn new(groups: Vec<CMat>, beams: Vec<usize>) -> Result<Self> {
        if groups.len() != beams.len() {
            return Err(Error::Dimension(format!("{} groups but {} beams", groups.len(), beams.len())));
        }
        if let Some(first) = groups.first() {
            let n = first.ncols();
            if groups.iter().any(|g| g.ncols() != n) {
                return Err(Error::Dimension("groups disagree on the number of feeds".into()));
            }
        }
        Ok(Self { groups, beams })
    }

    /// Gather member rows of `h`; `members[g]` lists row indices of group `g`.
    pub fn from_rows(h: &CMat, members: &[Vec<usize>], beams: Vec<usize>) -> Result<Self> {
        for rows in members {
            if let Some(&r) = rows.iter().find(|&&r| r >= h.nrows()) {
                return Err(Error::MissingRow(r));
            }
        }
        Self::new(members.iter().map(|m| select_rows(h, m)).collect(), beams)
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_feeds(&self) -> usize {
        self.groups.first().map_or(0, |g| g.ncols())
    }

    pub fn n_users(&self) -> usize {
        self.groups.iter().map(|g| g.nrows()).sum()
    }

    /// All member rows stacked, with the group of each row.
    pub fn stacked(&self) -> (CMat, Vec<usize>) {
        let n = self.n_feeds();
        let mut h = CMat::zeros(self.n_users(), n);
        let mut owner = Vec::with_capacity(self.n_users());
        let mut r = 0;
        for (g, block) in self.groups.iter().enumerate() {
            for i in 0..block.nrows() {
                h.row_mut(r).copy_from(&block.row(i));
                owner.push(g);
                r += 1;
            }
        }
        (h, owner)
    }

    fn check_nonempty(&self) -> Result<()> {
        match self.groups.iter().position(|g| g.nrows() == 0) {
            Some(g) => Err(Error::EmptyGroup(g)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PowerBudget {
    /// Total transmit power.
    Sum(f64),
    /// One budget per feed.
    PerAntenna(Vec<f64>),
}

impl PowerBudget {
    pub fn total(&self) -> f64 {
        match self {
            PowerBudget::Sum(p) => *p,
            PowerBudget::PerAntenna(p) => p.iter().sum(),
        }
    }

    fn validate(&self, feeds: usize) -> Result<()> {
        match self {
            PowerBudget::Sum(p) if !(*p > 0.0 && p.is_finite()) => {
                config(format!("power budget must be positive, got {p}"))
            }
            PowerBudget::PerAntenna(p) if p.len() != feeds => {
                Err(Error::Dimension(format!("{} per-antenna budgets for {feeds} feeds", p.len())))
            }
            PowerBudget::PerAntenna(p) if p.iter().any(|x| !(*x > 0.0 && x.is_finite())) => {
                config("per-antenna budgets must be positive")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecoderWarning {
    /// The averaged channel of this group nearly cancelled; its first member
    /// row was used instead.
    DegenerateGroup(usize),
    /// Iteration cap hit before the min-SINR settled.
    NotConverged { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    /// `N x G`.
    pub w: CMat,
    pub budget: PowerBudget,
    pub warnings: Vec<PrecoderWarning>,
}

impl PrecodingMatrix {
    pub fn row_power(&self, n: usize) -> f64 {
        self.w.row(n).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_feasible(&self) -> bool {
        match &self.budget {
            PowerBudget::Sum(p) => self.total_power() <= p * (1.0 + POWER_TOL),
            PowerBudget::PerAntenna(p) => (0..self.w.nrows()).all(|n| self.row_power(n) <= p[n] * (1.0 + POWER_TOL)),
        }
    }
}

/// Rescale `w` onto its budget along its own direction: sum mode meets the
/// total with equality, per-antenna mode shrinks (never grows) until the worst
/// row sits on its budget.
pub fn enforce_power(w: &CMat, budget: &PowerBudget) -> Result<CMat> {
    budget.validate(w.nrows())?;
    let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let scale = match budget {
        PowerBudget::Sum(p) => (p / total).sqrt(),
        PowerBudget::PerAntenna(p) => {
            let worst =
                (0..w.nrows()).map(|n| w.row(n).iter().map(|z| z.norm_sqr()).sum::<f64>() / p[n]).fold(0.0, f64::max);
            if worst <= 1.0 {
                return Ok(w.clone());
            }
            worst.sqrt().recip()
        }
    };
    Ok(w * Complex64::new(scale, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedChannel {
    /// `G x N`, one averaged row per group.
    pub h_eq: CMat,
    /// Groups whose average nearly cancelled.
    pub degenerate: Vec<usize>,
}

/// Relative norm below which an averaged row counts as cancelled.
pub const DEGENERATE_RATIO: f64 = 1e-9;

/// Replace each group by the arithmetic mean of its member rows.
pub fn average_group_channels(groups: &GroupChannel) -> Result<AveragedChannel> {
    groups.check_nonempty()?;
    let n = groups.n_feeds();
    let mut h_eq = CMat::zeros(groups.n_groups(), n);
    let mut degenerate = Vec::new();
    for (g, block) in groups.groups.iter().enumerate() {
        let rho = block.nrows() as f64;
        for j in 0..n {
            h_eq[(g, j)] = block.column(j).iter().sum::<Complex64>() / rho;
        }
        let mean_norm = (0..block.nrows()).map(|i| block.row(i).norm()).sum::<f64>() / rho;
        if h_eq.row(g).norm() < DEGENERATE_RATIO * mean_norm {
            degenerate.push(g);
        }
    }
    Ok(AveragedChannel { h_eq, degenerate })
}

impl AveragedChannel {
    /// Averaged rows with every degenerate group replaced by its first member.
    pub fn with_fallback(&self, groups: &GroupChannel) -> CMat {
        let mut h = self.h_eq.clone();
        for &g in &self.degenerate {
            h.row_mut(g).copy_from(&groups.groups[g].row(0));
        }
        h
    }
}

/// Regularizer `G * sigma^2 / P` with unit noise.
pub fn default_mmse_alpha(groups: usize, total_power: f64) -> f64 {
    groups as f64 / total_power
}

/// Regularized channel inversion `H^H (H H^H + alpha I)^-1`, scaled to the
/// total power.
pub fn mmse_precoder(h_eq: &CMat, total_power: f64, alpha: f64) -> Result<PrecodingMatrix> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return config(format!("regularizer must be >= 0, got {alpha}"));
    }
    let budget = PowerBudget::Sum(total_power);
    budget.validate(h_eq.ncols())?;
    let g = h_eq.nrows();
    let singular = || {
        let (values, _) = right_singular(&h_eq.adjoint());
        Error::Singular { rank: numerical_rank(&values, g.max(h_eq.ncols())), required: g }
    };
    if alpha == 0.0 {
        let (values, _) = right_singular(&h_eq.adjoint());
        if numerical_rank(&values, g.max(h_eq.ncols())) < g {
            return Err(singular());
        }
    }
    let gram = h_eq * h_eq.adjoint() + CMat::identity(g, g) * Complex64::new(alpha, 0.0);
    let inv = match gram.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => gram.try_inverse().ok_or_else(singular)?,
    };
    let w = enforce_power(&(h_eq.adjoint() * inv), &budget)?;
    Ok(PrecodingMatrix { w, budget, warnings: Vec::new() })
}

/// MMSE on the per-group averaged channels.
pub fn mmse_group_precoder(groups: &GroupChannel, total_power: f64, alpha: Option<f64>) -> Result<PrecodingMatrix> {
    let avg = average_group_channels(groups)?;
    let h = avg.with_fallback(groups);
    let alpha = alpha.unwrap_or_else(|| default_mmse_alpha(groups.n_groups(), total_power));
    let mut p = mmse_precoder(&h, total_power, alpha)?;
    p.warnings = avg.degenerate.into_iter().map(PrecoderWarning::DegenerateGroup).collect();
    Ok(p)
}

/// Per-user SINR of `w` against the channel rows in `groups`, in stacked
/// (group-major) order.
pub fn group_sinr(groups: &GroupChannel, w: &CMat) -> Vec<f64> {
    let mut out = Vec::with_capacity(groups.n_users());
    for (g, block) in groups.groups.iter().enumerate() {
        for k in 0..block.nrows() {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for c in 0..w.ncols() {
                let p = row_col(block, k, w, c).norm_sqr();
                if c == g {
                    signal = p;
                } else {
                    interference += p;
                }
            }
            out.push(signal / (interference + 1.0));
        }
    }
    out
}

pub fn min_sinr(groups: &GroupChannel, w: &CMat) -> f64 {
    group_sinr(groups, w).into_iter().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecoderKind {
    Mmse,
    BlockSvd,
    FrameBased,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 3] = [Self::Mmse, Self::BlockSvd, Self::FrameBased];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mmse => "mmse",
            Self::BlockSvd => "block_svd",
            Self::FrameBased => "frame_based",
        }
    }
}

impl std::fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PrecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config(format!("unknown precoder '{s}'")))
    }
}

/// How the closed-form precoders meet the payload power limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// `N * feed_power` shared freely across feeds.
    #[default]
    Sum,
    /// Designed under the sum budget, then shrunk until no feed exceeds
    /// `feed_power`.
    PerAntenna,
}

impl PowerMode {
    pub fn name(self) -> &'static str {
        match self {
            PowerMode::Sum => "sum",
            PowerMode::PerAntenna => "per_antenna",
        }
    }
}

impl std::str::FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(PowerMode::Sum),
            "per_antenna" => Ok(PowerMode::PerAntenna),
            other => config(format!("unknown power mode '{other}'")),
        }
    }
}

/// Solver options shared by all precoders of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSettings {
    /// Power of every feed. Sum-power designs get `N * feed_power`.
    pub feed_power: f64,
    pub mmse_power: PowerMode,
    pub bsvd_power: PowerMode,
    /// `None` uses [`default_mmse_alpha`].
    pub mmse_alpha: Option<f64>,
    pub null_space: NullSpaceMode,
    pub frame_based: FrameBasedOptions,
}

impl Default for PrecoderSettings {
    fn default() -> Self {
        Self {
            feed_power: 1.0,
            mmse_power: PowerMode::default(),
            bsvd_power: PowerMode::default(),
            mmse_alpha: None,
            null_space: NullSpaceMode::DominantSubspace,
            frame_based: FrameBasedOptions::default(),
        }
    }
}

impl PrecoderSettings {
    pub fn precode(&self, kind: PrecoderKind, groups: &GroupChannel) -> Result<PrecodingMatrix> {
        let n = groups.n_feeds();
        let total = self.feed_power * n as f64;
        let (p, mode) = match kind {
            PrecoderKind::Mmse => (mmse_group_precoder(groups, total, self.mmse_alpha)?, self.mmse_power),
            PrecoderKind::BlockSvd => (block_svd_precoder(groups, total, self.null_space)?, self.bsvd_power),
            PrecoderKind::FrameBased => {
                return frame_based_precoder(groups, &vec![self.feed_power; n], &self.frame_based).map(|o| o.precoder)
            }
        };
        match mode {
            PowerMode::Sum => Ok(p),
            PowerMode::PerAntenna => {
                let budget = PowerBudget::PerAntenna(vec![self.feed_power; n]);
                Ok(PrecodingMatrix { w: enforce_power(&p.w, &budget)?, budget, warnings: p.warnings })
            }
        }
    }
}

#[cfg(test)]
mod tests;
