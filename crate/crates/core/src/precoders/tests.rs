use super::*;
use crate::linalg::{angular_distance, fro_sqr};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) / 2f64.sqrt()
    })
}

fn random_groups(rng: &mut ChaCha8Rng, n: usize, sizes: &[usize]) -> GroupChannel {
    let blocks = sizes.iter().map(|&r| gaussian(rng, r, n)).collect();
    GroupChannel::new(blocks, (0..sizes.len()).collect()).unwrap()
}

/// DFT rows: mutually orthogonal with equal norm sqrt(n).
fn dft(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| Complex64::from_polar(1.0, std::f64::consts::TAU * (i * j) as f64 / n as f64))
}

fn singleton_groups(h: &CMat) -> GroupChannel {
    GroupChannel::from_rows(h, &(0..h.nrows()).map(|k| vec![k]).collect::<Vec<_>>(), (0..h.nrows()).collect()).unwrap()
}

fn col(w: &CMat, g: usize) -> Vec<Complex64> {
    w.column(g).iter().copied().collect()
}

#[test]
fn averaging_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_groups(&mut rng, 4, &[1, 1, 1]);
    let avg = average_group_channels(&g).unwrap();
    for i in 0..3 {
        assert_eq!(avg.h_eq.row(i), g.groups[i].row(0));
    }
    assert!(avg.degenerate.is_empty());

    let h = gaussian(&mut rng, 1, 4);
    let twin = GroupChannel::new(vec![CMat::from_fn(2, 4, |_, j| h[(0, j)])], vec![0]).unwrap();
    let avg = average_group_channels(&twin).unwrap();
    assert!((avg.h_eq.row(0) - h.row(0)).norm() < 1e-15);

    let anti =
        GroupChannel::new(vec![CMat::from_fn(2, 4, |i, j| if i == 0 { h[(0, j)] } else { -h[(0, j)] })], vec![0])
            .unwrap();
    let avg = average_group_channels(&anti).unwrap();
    assert_eq!(avg.degenerate, vec![0]);
    assert!(avg.h_eq.row(0).norm() == 0.0);
    assert_eq!(avg.with_fallback(&anti).row(0), h.row(0));

    let empty = GroupChannel::new(vec![CMat::zeros(0, 4)], vec![0]).unwrap();
    assert_eq!(average_group_channels(&empty), Err(Error::EmptyGroup(0)));
}

#[test]
fn mmse_scalar_case() {
    let p = mmse_precoder(&CMat::from_element(1, 1, c(1.0, 0.0)), 1.0, 0.3).unwrap();
    assert!((p.w[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn mmse_zero_forcing_on_orthogonal_rows_is_matched_filter() {
    let h = dft(4);
    let p = mmse_precoder(&h, 4.0, 0.0).unwrap();
    for g in 0..4 {
        let mf: Vec<_> = h.row(g).iter().map(|z| z.conj()).collect();
        assert!(angular_distance(&col(&p.w, g), &mf) < 1e-6);
    }
    assert!((p.total_power() - 4.0).abs() < 1e-12);
}

#[test]
fn mmse_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let h = gaussian(&mut rng, 4, 7);
        let scale = fro_sqr(&h);
        let zf = mmse_precoder(&h, 4.0, 0.0).unwrap();
        let near_zf = mmse_precoder(&h, 4.0, 1e-6 * scale).unwrap();
        let near_mf = mmse_precoder(&h, 4.0, 1e6 * scale).unwrap();
        for g in 0..4 {
            let mf: Vec<_> = h.row(g).iter().map(|z| z.conj()).collect();
            assert!(angular_distance(&col(&near_mf.w, g), &mf) < 1e-3);
            assert!(angular_distance(&col(&near_zf.w, g), &col(&zf.w, g)) < 1e-3);
        }
    }
}

#[test]
fn mmse_singular_reports_rank() {
    let h = CMat::from_fn(2, 3, |_, j| c(j as f64 + 1.0, 0.0));
    assert_eq!(mmse_precoder(&h, 1.0, 0.0).unwrap_err(), Error::Singular { rank: 1, required: 2 });
    assert!(mmse_precoder(&h, 1.0, 0.1).is_ok());
    assert!(matches!(mmse_precoder(&h, 1.0, -1.0), Err(Error::Config(_))));
}

#[test]
fn enforce_power_examples() {
    let w = CMat::from_fn(2, 2, |i, j| c((i + j) as f64 * 0.1, 0.05));
    let feasible = PowerBudget::PerAntenna(vec![10.0, 10.0]);
    assert_eq!(enforce_power(&w, &feasible).unwrap(), w);

    let w4 = CMat::from_fn(2, 2, |i, j| if i == j { c(2f64.sqrt(), 0.0) } else { c(0.0, 0.0) });
    let half = enforce_power(&w4, &PowerBudget::Sum(1.0)).unwrap();
    assert!((half - &w4 * c(0.5, 0.0)).norm() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let w = gaussian(&mut rng, 5, 3) * c(3.0, 0.0);
        let p: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let out = enforce_power(&w, &PowerBudget::PerAntenna(p.clone())).unwrap();
        let worst = (0..5).map(|n| out.row(n).norm_squared() / p[n]).fold(0.0, f64::max);
        assert!((worst - 1.0).abs() < 1e-12);
        // Direction-preserving.
        assert!(angular_distance(w.as_slice(), out.as_slice()) < 1e-7);
    }
    assert_eq!(enforce_power(&CMat::zeros(2, 2), &PowerBudget::Sum(1.0)), Err(Error::ZeroMatrix));
}

fn max_leakage(groups: &GroupChannel, w: &CMat, p: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (g, block) in groups.groups.iter().enumerate() {
        for k in 0..block.nrows() {
            let hn = block.row(k).norm_squared();
            for c in 0..w.ncols() {
                if c != g {
                    worst = worst.max(row_col(block, k, w, c).norm_sqr() / (p * hn));
                }
            }
        }
    }
    worst
}

#[test]
fn block_svd_orthogonal_rows_give_matched_filters() {
    let h = dft(4);
    let groups = GroupChannel::from_rows(&h, &[vec![0], vec![1, 2]], vec![0, 1]).unwrap();
    let p = block_svd_precoder(&groups, 2.0, NullSpaceMode::Exact).unwrap();
    let mf: Vec<_> = h.row(0).iter().map(|z| z.conj()).collect();
    assert!(angular_distance(&col(&p.w, 0), &mf) < 1e-6);
    assert!(max_leakage(&groups, &p.w, 2.0) <= 1e-18);
    assert!((p.total_power() - 2.0).abs() < 1e-12);
}

#[test]
fn block_svd_nulls_interference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let sizes: Vec<usize> = (0..3).map(|_| rng.random_range(1..=2)).collect();
        let n = sizes.iter().sum::<usize>() + rng.random_range(0..3);
        let groups = random_groups(&mut rng, n, &sizes);
        let p = block_svd_precoder(&groups, 3.0, NullSpaceMode::Exact).unwrap();
        assert!(max_leakage(&groups, &p.w, 3.0) <= 1e-18, "trial {trial}");
        assert!(p.is_feasible());
    }
}

#[test]
fn block_svd_counts_degrees_of_freedom() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let groups = random_groups(&mut rng, 2, &[1, 1, 1]);
    assert_eq!(
        block_svd_precoder(&groups, 1.0, NullSpaceMode::Exact).unwrap_err(),
        Error::Infeasible { feeds: 2, constraints: 2 }
    );
    // Three groups of two on four feeds: exact nulling needs five.
    let groups = random_groups(&mut rng, 4, &[2, 2, 2]);
    assert!(block_svd_precoder(&groups, 1.0, NullSpaceMode::Exact).is_err());
    let p = block_svd_precoder(&groups, 1.0, NullSpaceMode::DominantSubspace).unwrap();
    assert!((p.total_power() - 1.0).abs() < 1e-12);
    // Each column is orthogonal to the dominant direction of the other groups.
    for g in 0..3 {
        for o in (0..3).filter(|&o| o != g) {
            let (_, basis) = crate::linalg::right_singular(&groups.groups[o]);
            let v: Complex64 = (0..4).map(|n| basis[(n, 0)].conj() * p.w[(n, g)]).sum();
            assert!(v.norm() < 1e-12);
        }
    }
    // Still infeasible when even one direction per group does not fit.
    let groups = random_groups(&mut rng, 2, &[2, 2, 2]);
    assert!(block_svd_precoder(&groups, 1.0, NullSpaceMode::DominantSubspace).is_err());
}

#[test]
fn block_svd_multicast_direction_beats_single_member_filters() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let a = gaussian(&mut rng, 3, 5);
        let x = maxmin::maxmin_unit_beam(&a, 200);
        let score = |v: &[Complex64]| {
            (0..3)
                .map(|k| a.row(k).iter().zip(v).map(|(p, q)| p * q).sum::<Complex64>().norm_sqr())
                .fold(f64::INFINITY, f64::min)
        };
        let got = score(x.as_slice());
        assert!((x.norm() - 1.0).abs() < 1e-12);
        for k in 0..3 {
            let mf: Vec<_> = a.row(k).iter().map(|z| z.conj() / a.row(k).norm()).collect();
            assert!(got >= score(&mf) * (1.0 - 1e-12));
        }
    }
}

fn rotate_rows(h: &CMat, phases: &[f64]) -> CMat {
    CMat::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * Complex64::from_polar(1.0, phases[i]))
}

#[test]
fn per_user_phase_rotation_leaves_sinr_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let h = gaussian(&mut rng, 5, 7);
        let phi: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let rot = rotate_rows(&h, &phi);
        let g0 = singleton_groups(&h);
        let g1 = singleton_groups(&rot);
        for (w0, w1) in [
            (mmse_group_precoder(&g0, 5.0, None).unwrap().w, mmse_group_precoder(&g1, 5.0, None).unwrap().w),
            (
                block_svd_precoder(&g0, 5.0, NullSpaceMode::Exact).unwrap().w,
                block_svd_precoder(&g1, 5.0, NullSpaceMode::Exact).unwrap().w,
            ),
        ] {
            let s0 = group_sinr(&g0, &w0);
            let s1 = group_sinr(&g1, &w1);
            for (a, b) in s0.iter().zip(&s1) {
                assert!((a - b).abs() <= 1e-9 * a.abs());
            }
        }
    }
}

#[test]
fn frame_based_single_user_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let h = gaussian(&mut rng, 1, 6);
        let p: Vec<f64> = (0..6).map(|_| rng.random_range(0.5..2.0)).collect();
        let groups = singleton_groups(&h);
        let out = frame_based_precoder(&groups, &p, &FrameBasedOptions::default()).unwrap();
        // w_n = sqrt(p_n) exp(-j arg h_n) reaches (sum |h_n| sqrt(p_n))^2.
        let optimum = h.iter().zip(&p).map(|(z, pn)| z.norm() * pn.sqrt()).sum::<f64>().powi(2);
        assert!((out.min_sinr - optimum).abs() <= 1e-6 * optimum, "{} vs {optimum}", out.min_sinr);
        assert!(out.precoder.is_feasible());
        assert!(out.converged);
    }
}

#[test]
fn frame_based_matches_block_svd_on_orthogonal_channels() {
    let h = dft(5) * c(3.0, 0.0);
    let groups = singleton_groups(&h);
    let fb = frame_based_precoder(&groups, &[1.0; 5], &FrameBasedOptions::default()).unwrap();
    let bs = block_svd_precoder(&groups, 5.0, NullSpaceMode::Exact).unwrap();
    let target = min_sinr(&groups, &bs.w);
    assert!((fb.min_sinr - target).abs() <= 0.01 * target, "{} vs {target}", fb.min_sinr);
}

#[test]
fn frame_based_history_is_monotone_and_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let groups = random_groups(&mut rng, 6, &[2, 2, 2]);
        let out = frame_based_precoder(&groups, &[1.0; 6], &FrameBasedOptions::default()).unwrap();
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.precoder.is_feasible());
        assert_eq!(*out.history.last().unwrap(), out.min_sinr);
        assert!((min_sinr(&groups, &out.precoder.w) - out.min_sinr).abs() <= 1e-12 * out.min_sinr);
    }
}

#[test]
fn frame_based_rejects_bad_budgets_and_flags_iteration_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let groups = random_groups(&mut rng, 3, &[1, 1]);
    assert!(matches!(
        frame_based_precoder(&groups, &[1.0, 0.0, 1.0], &FrameBasedOptions::default()),
        Err(Error::Config(_))
    ));
    let short = FrameBasedOptions { max_iters: 2, patience: 50, ..Default::default() };
    let out = frame_based_precoder(&groups, &[1.0; 3], &short).unwrap();
    assert!(!out.converged);
    assert!(out.precoder.warnings.contains(&PrecoderWarning::NotConverged { iterations: 2 }));
}

#[test]
fn power_allocation_balances_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let groups = random_groups(&mut rng, 4, &[1, 1, 1]);
    let v = maxmin::directions(&gaussian(&mut rng, 4, 3));
    let (w, level) = allocate_power(&groups, &v, &[1.0; 4]);
    let s = group_sinr(&groups, &w);
    assert!(s.iter().all(|&x| x >= level * (1.0 - 1e-9)));
    assert!((0..4).all(|n| w.row(n).norm_squared() <= 1.0 + 1e-9));
}

#[test]
fn per_antenna_mode_shrinks_closed_form_precoders() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let groups = random_groups(&mut rng, 6, &[2, 1, 2]);
    let sum = PrecoderSettings::default();
    let per =
        PrecoderSettings { mmse_power: PowerMode::PerAntenna, bsvd_power: PowerMode::PerAntenna, ..Default::default() };
    assert_eq!("per_antenna".parse::<PowerMode>().unwrap(), PowerMode::PerAntenna);
    assert!("peak".parse::<PowerMode>().is_err());
    for kind in [PrecoderKind::Mmse, PrecoderKind::BlockSvd] {
        let a = sum.precode(kind, &groups).unwrap();
        let b = per.precode(kind, &groups).unwrap();
        assert!((a.total_power() - 6.0).abs() < 1e-9);
        assert!(b.is_feasible());
        let worst = (0..6).map(|n| b.row_power(n)).fold(0.0, f64::max);
        assert!((worst - 1.0).abs() < 1e-12);
        assert!(angular_distance(a.w.as_slice(), b.w.as_slice()) < 1e-6);
    }
}
