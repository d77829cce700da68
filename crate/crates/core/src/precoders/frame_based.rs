//! Max-min SINR multigroup multicast precoding under per-antenna power
//! constraints.
//!
//! Alternates two steps from an MMSE start:
//! 1. with the beam directions fixed, balance the SINR of all users by
//!    bisection on the common target ([`allocate_power`]);
//! 2. update the directions. Each pass proposes loaded-MMSE beams from the
//!    uplink dual of the per-antenna problem (feed noise loading raised on
//!    overloaded feeds, user weights from the uplink fixed point), then
//!    refines them by projected gradient steps on a softmin of the users'
//!    log-SINR.
//!
//! The softmin temperature decreases across iterations. The best iterate is
//! kept, so the reported min-SINR never decreases.

use num_complex::Complex64;

use super::maxmin::{directions, maxmin_unit_beam, softmin};
use super::{
    allocate_power, average_group_channels, default_mmse_alpha, enforce_power, group_sinr, min_sinr, mmse_precoder,
    GroupChannel, PowerBudget, PrecoderWarning, PrecodingMatrix,
};
use crate::error::{config, Result};
use crate::linalg::{fro_sqr, row_col, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBasedOptions {
    pub max_iters: usize,
    /// Relative min-SINR improvement below which the solver stops.
    pub tol: f64,
    /// Iterations over which the improvement is measured.
    pub patience: usize,
    /// MMSE regularizer for the starting point; `None` uses `G / P`.
    pub init_alpha: Option<f64>,
}

impl Default for FrameBasedOptions {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-5, patience: 15, init_alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBasedOutcome {
    pub precoder: PrecodingMatrix,
    pub min_sinr: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Best-so-far min-SINR after the start and after every iteration.
    pub history: Vec<f64>,
}

const T_START: f64 = 0.1;
const T_DECAY: f64 = 0.9;
const T_FLOOR: f64 = 1e-3;
/// Gradient steps per iteration.
const INNER_STEPS: usize = 10;
/// Exponent of the multiplicative feed-loading update.
const LOADING_RATE: f64 = 0.5;
/// Search effort for each group's beam in the whitened space.
const BEAM_ITERS: usize = 20;

fn project(w: &mut CMat, per_antenna: &[f64]) {
    for (n, &p) in per_antenna.iter().enumerate() {
        let load: f64 = w.row(n).iter().map(|z| z.norm_sqr()).sum();
        if load > p {
            let s = (p / load).sqrt();
            w.row_mut(n).iter_mut().for_each(|z| *z *= s);
        }
    }
}

/// Smoothed min of log-SINR and its gradient with respect to `conj(W)`.
fn smoothed(h: &CMat, owner: &[usize], w: &CMat, temperature: f64, with_grad: bool) -> (f64, CMat) {
    let g_count = w.ncols();
    let mut y = CMat::zeros(h.nrows(), g_count);
    let mut log_sinr = Vec::with_capacity(h.nrows());
    let mut sig = Vec::with_capacity(h.nrows());
    let mut interf = Vec::with_capacity(h.nrows());
    for k in 0..h.nrows() {
        let mut i_k = 1.0;
        for c in 0..g_count {
            y[(k, c)] = row_col(h, k, w, c);
            if c != owner[k] {
                i_k += y[(k, c)].norm_sqr();
            }
        }
        let s_k = y[(k, owner[k])].norm_sqr().max(1e-300);
        log_sinr.push(s_k.ln() - i_k.ln());
        sig.push(s_k);
        interf.push(i_k);
    }
    let (weights, value) = softmin(&log_sinr, temperature);
    let mut grad = CMat::zeros(w.nrows(), g_count);
    if with_grad {
        for k in 0..h.nrows() {
            for c in 0..g_count {
                let coef = if c == owner[k] {
                    y[(k, c)] * (weights[k] / sig[k])
                } else {
                    -y[(k, c)] * (weights[k] / interf[k])
                };
                for n in 0..w.nrows() {
                    grad[(n, c)] += h[(k, n)].conj() * coef;
                }
            }
        }
    }
    (value, grad)
}

/// Uplink dual of the per-antenna problem: a noise loading per feed and a
/// weight per user.
struct Dual {
    loading: Vec<f64>,
    weight: Vec<f64>,
}

impl Dual {
    fn new(feeds: usize, users: usize, total: f64) -> Self {
        Self { loading: vec![1.0; feeds], weight: vec![total / users as f64; users] }
    }

    /// `diag(loading) + sum of weight_k h_k^H h_k` over users outside `group`.
    fn covariance(&self, h: &CMat, owner: &[usize], group: usize) -> CMat {
        let n = h.ncols();
        let mut b = CMat::from_diagonal(&CVec::from_iterator(n, self.loading.iter().map(|&q| Complex64::new(q, 0.0))));
        for k in 0..h.nrows() {
            if owner[k] != group {
                let r = h.row(k);
                b += r.adjoint() * r * Complex64::new(self.weight[k], 0.0);
            }
        }
        b
    }

    /// Per group, the unit beam maximizing the weakest member's gain over
    /// loaded interference-plus-noise.
    fn directions(&self, h: &CMat, owner: &[usize], g_count: usize) -> Option<CMat> {
        let mut v = CMat::zeros(h.ncols(), g_count);
        for g in 0..g_count {
            let l = self.covariance(h, owner, g).cholesky()?.unpack();
            let l_inv = l.solve_lower_triangular(&CMat::identity(h.ncols(), h.ncols()))?;
            let rows: Vec<usize> = (0..h.nrows()).filter(|&k| owner[k] == g).collect();
            let whitened = crate::linalg::select_rows(h, &rows) * l_inv.adjoint();
            let x = maxmin_unit_beam(&whitened, BEAM_ITERS);
            let mut col = l_inv.adjoint() * x;
            let n = col.norm();
            if !(n > 0.0 && n.is_finite()) {
                return None;
            }
            col /= Complex64::new(n, 0.0);
            v.set_column(g, &col);
        }
        Some(v)
    }

    /// Move the user weights to the uplink fixed point at `level` and the
    /// feed loading towards the feeds that `w` overloads.
    fn update(&mut self, h: &CMat, owner: &[usize], g_count: usize, level: f64, w: &CMat, per_antenna: &[f64]) {
        let mut weight = self.weight.clone();
        for g in 0..g_count {
            let Some(inv) = self.covariance(h, owner, g).try_inverse() else {
                return;
            };
            for k in (0..h.nrows()).filter(|&k| owner[k] == g) {
                let r = h.row(k);
                let gain = (r * &inv * r.adjoint())[(0, 0)].re;
                if gain > 0.0 {
                    weight[k] = level.max(1e-9) / gain;
                }
            }
        }
        self.weight = weight;
        let total: f64 = per_antenna.iter().sum();
        for (n, q) in self.loading.iter_mut().enumerate() {
            let load: f64 = w.row(n).iter().map(|z| z.norm_sqr()).sum::<f64>() / per_antenna[n];
            *q *= load.max(1e-3).powf(LOADING_RATE);
        }
        let spent: f64 = self.loading.iter().zip(per_antenna).map(|(q, p)| q * p).sum();
        self.loading.iter_mut().for_each(|q| *q *= total / spent);
    }
}

/// Projected gradient ascent on the softmin objective from `w`; stops early
/// when no step improves it.
fn ascend(h: &CMat, owner: &[usize], w: &mut CMat, step: &mut f64, temperature: f64, per_antenna: &[f64]) {
    for _ in 0..INNER_STEPS {
        let (value, grad) = smoothed(h, owner, w, temperature, true);
        let gnorm = fro_sqr(&grad).sqrt();
        if !(gnorm > 0.0 && gnorm.is_finite()) {
            return;
        }
        let mut trial = *step * 2.0;
        let mut moved = false;
        for _ in 0..40 {
            let mut cand = &*w + &grad * Complex64::new(trial / gnorm, 0.0);
            project(&mut cand, per_antenna);
            if smoothed(h, owner, &cand, temperature, false).0 > value {
                *w = cand;
                *step = trial;
                moved = true;
                break;
            }
            trial *= 0.5;
        }
        if !moved {
            return;
        }
    }
}

/// Approximate max-min SINR precoder with per-antenna budgets `per_antenna`.
pub fn frame_based_precoder(
    groups: &GroupChannel,
    per_antenna: &[f64],
    opts: &FrameBasedOptions,
) -> Result<FrameBasedOutcome> {
    let budget = PowerBudget::PerAntenna(per_antenna.to_vec());
    budget.validate(groups.n_feeds())?;
    if opts.max_iters == 0 {
        return config("frame-based solver needs at least one iteration");
    }
    let g_count = groups.n_groups();
    let avg = average_group_channels(groups)?;
    let total: f64 = per_antenna.iter().sum();
    let alpha = opts.init_alpha.unwrap_or_else(|| default_mmse_alpha(g_count, total));
    let start = mmse_precoder(&avg.with_fallback(groups), total, alpha)?;
    let mut w = enforce_power(&start.w, &budget)?;
    let (balanced, _) = allocate_power(groups, &directions(&w), per_antenna);
    if min_sinr(groups, &balanced) > min_sinr(groups, &w) {
        w = balanced;
    }

    let (h, owner) = groups.stacked();
    let mut dual = Dual::new(h.ncols(), h.nrows(), total);
    let mut best_w = w.clone();
    let mut best = min_sinr(groups, &w);
    let mut history = vec![best];
    let mut step = 0.1 * fro_sqr(&w).sqrt();
    let mut temperature = T_START;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iters {
        iterations = it;
        let proposal = dual.directions(&h, &owner, g_count).map(|v| allocate_power(groups, &v, per_antenna));
        if let Some((wd, level)) = &proposal {
            if min_sinr(groups, wd) >= min_sinr(groups, &w) {
                w = wd.clone();
            }
            dual.update(&h, &owner, g_count, *level, wd, per_antenna);
        }
        let mut refined = w.clone();
        ascend(&h, &owner, &mut refined, &mut step, temperature, per_antenna);
        let (balanced, _) = allocate_power(groups, &directions(&refined), per_antenna);
        if min_sinr(groups, &balanced) >= min_sinr(groups, &w) {
            w = balanced;
        }
        let current = min_sinr(groups, &w);
        if current > best {
            best = current;
            best_w = w.clone();
        }
        history.push(best);
        temperature = (temperature * T_DECAY).max(T_FLOOR);

        if it >= opts.patience {
            let before = history[it - opts.patience];
            if best - before <= opts.tol * best.abs() {
                converged = true;
                break;
            }
        }
    }

    let mut warnings: Vec<PrecoderWarning> = avg.degenerate.into_iter().map(PrecoderWarning::DegenerateGroup).collect();
    if !converged {
        warnings.push(PrecoderWarning::NotConverged { iterations });
    }
    debug_assert!(group_sinr(groups, &best_w).iter().all(|s| *s >= 0.0));
    Ok(FrameBasedOutcome {
        precoder: PrecodingMatrix { w: best_w, budget, warnings },
        min_sinr: best,
        converged,
        iterations,
        history,
    })
}
