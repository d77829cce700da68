//! Max-min building blocks shared by the block-SVD and frame-based
//! precoders: softmin smoothing, unit-norm beam search and SINR-balancing
//! power allocation under per-antenna budgets.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::GroupChannel;
use crate::linalg::{dot, right_singular, CMat, CVec};

/// Softmin weights `exp(-x_k / T)` normalized to one, and the smoothed
/// minimum `-T ln sum exp(-x_k / T)`.
pub(crate) fn softmin(x: &[f64], temperature: f64) -> (Vec<f64>, f64) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = x.iter().map(|&v| (-(v - lo) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    (e.iter().map(|v| v / s).collect(), lo - temperature * s.ln())
}

fn gains(a: &CMat, x: &CVec) -> Vec<f64> {
    (0..a.nrows()).map(|k| dot(a.row(k).iter().copied(), x.iter().copied()).norm_sqr()).collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Unit vector `x` approximately maximizing `min_k |a_k x|^2`.
pub(crate) fn maxmin_unit_beam(a: &CMat, iters: usize) -> CVec {
    let d = a.ncols();
    if a.nrows() == 1 {
        let x = a.row(0).adjoint();
        let n = x.norm();
        return if n > 0.0 { x / Complex64::new(n, 0.0) } else { unit(d, 0) };
    }
    // Candidates: dominant direction of the row-normalized block and every
    // member's matched filter.
    let mut normed = a.clone();
    for k in 0..a.nrows() {
        let n = a.row(k).norm();
        if n > 0.0 {
            normed.row_mut(k).scale_mut(n.recip());
        }
    }
    let (_, basis) = right_singular(&normed);
    let mut start = basis.column(0).into_owned();
    let mut best = min_of(&gains(a, &start));
    for k in 0..a.nrows() {
        let n = a.row(k).norm();
        if n == 0.0 {
            continue;
        }
        let x = a.row(k).adjoint() / Complex64::new(n, 0.0);
        let m = min_of(&gains(a, &x));
        if m > best {
            best = m;
            start = x;
        }
    }
    if best <= 0.0 {
        return start;
    }

    let objective = |x: &CVec, t: f64| {
        let l: Vec<f64> = gains(a, x).iter().map(|g| g.max(1e-300).ln()).collect();
        softmin(&l, t)
    };
    let mut x = start.clone();
    let mut best_x = start;
    let mut step = 0.5;
    let mut temperature = 0.5;
    for _ in 0..iters {
        let (w, f) = objective(&x, temperature);
        let mut grad = CVec::zeros(d);
        for k in 0..a.nrows() {
            let ak = a.row(k);
            let y = dot(ak.iter().copied(), x.iter().copied());
            let g = y.norm_sqr().max(1e-300);
            grad += ak.adjoint() * (y * (w[k] / g));
        }
        let mut moved = false;
        for _ in 0..30 {
            let mut cand = &x + &grad * Complex64::new(step, 0.0);
            let n = cand.norm();
            cand /= Complex64::new(n, 0.0);
            if objective(&cand, temperature).1 > f {
                x = cand;
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        let m = min_of(&gains(a, &x));
        if m > best {
            best = m;
            best_x = x.clone();
        }
        if !moved {
            if temperature <= 1e-3 {
                break;
            }
            step = 0.5;
        }
        temperature = (temperature * 0.9).max(1e-3);
    }
    best_x
}

fn unit(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = Complex64::new(1.0, 0.0);
    v
}

/// Precomputed `|h_k v_g|^2` for unit-norm directions.
struct Coupling {
    /// Row per user, column per group.
    gain: DMatrix<f64>,
    owner: Vec<usize>,
}

impl Coupling {
    fn new(groups: &GroupChannel, v: &CMat) -> Self {
        let (h, owner) = groups.stacked();
        let prod = &h * v;
        Self { gain: prod.map(|z| z.norm_sqr()), owner }
    }

    /// Least powers meeting SINR target `t` for every user, by policy
    /// iteration over each group's bottleneck member. `None` when the target
    /// is not attainable at any power.
    fn min_powers(&self, t: f64) -> Option<DVector<f64>> {
        let g_count = self.gain.ncols();
        let need = |k: usize, q: &DVector<f64>| {
            let g = self.owner[k];
            let mut interf = 1.0;
            for c in 0..g_count {
                if c != g {
                    interf += self.gain[(k, c)] * q[c];
                }
            }
            t * interf / self.gain[(k, g)]
        };
        // Start from each group's weakest member.
        let mut policy = vec![usize::MAX; g_count];
        for (k, &g) in self.owner.iter().enumerate() {
            if self.gain[(k, g)] <= 0.0 {
                return None;
            }
            if policy[g] == usize::MAX || self.gain[(k, g)] < self.gain[(policy[g], g)] {
                policy[g] = k;
            }
        }
        if policy.contains(&usize::MAX) {
            return None;
        }
        for _ in 0..4 * self.owner.len() + 4 {
            let mut m = DMatrix::<f64>::identity(g_count, g_count);
            let mut rhs = DVector::<f64>::zeros(g_count);
            for g in 0..g_count {
                let k = policy[g];
                let own = self.gain[(k, g)];
                for c in 0..g_count {
                    if c != g {
                        m[(g, c)] = -t * self.gain[(k, c)] / own;
                    }
                }
                rhs[g] = t / own;
            }
            let q = m.lu().solve(&rhs)?;
            if q.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return None;
            }
            let mut changed = false;
            for g in 0..g_count {
                let current = need(policy[g], &q);
                for (k, &o) in self.owner.iter().enumerate() {
                    if o == g && k != policy[g] && need(k, &q) > current * (1.0 + 1e-12) {
                        policy[g] = k;
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                return Some(q);
            }
        }
        None
    }
}

/// Best max-min power split over fixed beam directions `v` (unit-norm
/// columns) under per-antenna budgets. Returns the scaled precoder and the
/// balanced SINR level it guarantees.
pub fn allocate_power(groups: &GroupChannel, v: &CMat, per_antenna: &[f64]) -> (CMat, f64) {
    let g_count = v.ncols();
    let coupling = Coupling::new(groups, v);
    let row_load = |q: &DVector<f64>| -> bool {
        (0..v.nrows()).all(|n| {
            let load: f64 = (0..g_count).map(|g| q[g] * v[(n, g)].norm_sqr()).sum();
            load <= per_antenna[n] * (1.0 + 1e-12)
        })
    };
    // Interference-free bound on the balanced level.
    let mut hi = f64::INFINITY;
    for (k, &g) in coupling.owner.iter().enumerate() {
        let qmax = (0..v.nrows())
            .filter(|&n| v[(n, g)].norm_sqr() > 0.0)
            .map(|n| per_antenna[n] / v[(n, g)].norm_sqr())
            .fold(f64::INFINITY, f64::min);
        hi = hi.min(coupling.gain[(k, g)] * qmax);
    }
    if !(hi > 0.0 && hi.is_finite()) {
        return (CMat::zeros(v.nrows(), g_count), 0.0);
    }
    let mut lo = 0.0;
    let mut lo_q: Option<DVector<f64>> = None;
    match coupling.min_powers(hi) {
        Some(q) if row_load(&q) => {
            lo = hi;
            lo_q = Some(q);
        }
        _ => {
            for _ in 0..100 {
                let mid = if lo > 0.0 { (lo * hi).sqrt() } else { hi * 1e-6 };
                match coupling.min_powers(mid) {
                    Some(q) if row_load(&q) => {
                        lo = mid;
                        lo_q = Some(q);
                    }
                    _ => hi = mid,
                }
                if lo > 0.0 && hi / lo - 1.0 < 1e-10 {
                    break;
                }
            }
        }
    }
    let Some(q) = lo_q else {
        return (CMat::zeros(v.nrows(), g_count), 0.0);
    };
    // Spend leftover budget uniformly; it only raises every SINR.
    let slack = (0..v.nrows())
        .map(|n| {
            let load: f64 = (0..g_count).map(|g| q[g] * v[(n, g)].norm_sqr()).sum();
            if load > 0.0 {
                per_antenna[n] / load
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
        .max(1.0);
    let mut w = v.clone();
    for g in 0..g_count {
        let s = Complex64::new((q[g] * slack).sqrt(), 0.0);
        w.column_mut(g).iter_mut().for_each(|z| *z *= s);
    }
    (w, lo)
}

/// Unit-norm columns of `w` (zero columns stay zero).
pub(crate) fn directions(w: &CMat) -> CMat {
    let mut v = w.clone();
    for g in 0..v.ncols() {
        let n = v.column(g).norm();
        if n > 0.0 {
            v.column_mut(g).scale_mut(n.recip());
        }
    }
    v
}
