use num_complex::Complex64;

use super::maxmin::maxmin_unit_beam;
use super::{GroupChannel, PowerBudget, PrecodingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{null_space, right_singular, CMat};

/// How each group's interference constraints are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullSpaceMode {
    /// Null every member row of every other group; fails when that leaves no
    /// degrees of freedom.
    #[default]
    Exact,
    /// Like `Exact` when feasible. Otherwise each other group is represented
    /// by its `floor((N-1)/(G-1))` dominant right singular directions.
    DominantSubspace,
}

fn stack(rows: &[CMat], n: usize) -> CMat {
    let total: usize = rows.iter().map(|r| r.nrows()).sum();
    let mut c = CMat::zeros(total, n);
    let mut at = 0;
    for r in rows {
        c.view_mut((at, 0), (r.nrows(), n)).copy_from(r);
        at += r.nrows();
    }
    c
}

fn dominant_rows(block: &CMat, d: usize) -> CMat {
    let (_, basis) = right_singular(block);
    let keep = d.min(block.nrows());
    // Constraint rows are the conjugated singular vectors: v^H w = 0.
    basis.columns(0, keep).adjoint()
}

/// Block-SVD precoder: column `g` is confined to the null space of the other
/// groups' channels and, inside it, steered to maximize the weakest member
/// gain. Columns share the total power equally.
pub fn block_svd_precoder(groups: &GroupChannel, total_power: f64, mode: NullSpaceMode) -> Result<PrecodingMatrix> {
    groups.check_nonempty()?;
    let budget = PowerBudget::Sum(total_power);
    let n = groups.n_feeds();
    budget.validate(n)?;
    let g_count = groups.n_groups();
    let mut w = CMat::zeros(n, g_count);

    for g in 0..g_count {
        let others: Vec<CMat> = (0..g_count).filter(|&o| o != g).map(|o| groups.groups[o].clone()).collect();
        let exact = stack(&others, n);
        let mut z = null_space(&exact);
        if z.ncols() == 0 && mode == NullSpaceMode::DominantSubspace && g_count > 1 {
            let d = (n - 1) / (g_count - 1);
            if d > 0 {
                let reduced: Vec<CMat> = others.iter().map(|b| dominant_rows(b, d)).collect();
                z = null_space(&stack(&reduced, n));
            }
        }
        if z.ncols() == 0 {
            return Err(Error::Infeasible { feeds: n, constraints: exact.nrows() });
        }
        let projected = &groups.groups[g] * &z;
        let x = maxmin_unit_beam(&projected, 200);
        w.column_mut(g).copy_from(&(&z * x));
    }

    let scale = Complex64::new((total_power / g_count as f64).sqrt(), 0.0);
    Ok(PrecodingMatrix { w: w * scale, budget, warnings: Vec::new() })
}
