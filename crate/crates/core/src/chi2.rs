//! Residual-PCA quadrant chi-square benchmark detector.
//!
//! The residual `R = A - E[A]` is projected onto its two dominant
//! eigenvectors. The resulting planar point cloud is split into quadrants at
//! 32 rotation angles `k pi / 16`, `k = 1..=32`, and the largest 2x2
//! independence statistic is compared against the chi-square(1) quantile.

use serde::{Deserialize, Serialize};

use crate::fit::{expected_adjacency, FittedModel};
use crate::graph::Graph;
use crate::linalg::top_eigenpairs;
use crate::par::{self, Execution};
use crate::tail::chi2_1_quantile;
use crate::{Error, Result};

pub const ROTATIONS: usize = 32;
const EIG_TOL: f64 = 1e-8;
const EIG_SEED: u64 = 0x5EED;

/// Quadrant counts `[n11, n12, n21, n22]`: first index is the sign of the
/// first rotated coordinate (1 = nonnegative), second index the second.
pub type QuadrantTable = [u64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Report {
    pub alpha: f64,
    pub statistic: f64,
    /// Grid angle attaining the statistic (first one on ties).
    pub angle: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub quadrant_tables: Vec<QuadrantTable>,
}

/// Grid angles `k pi / 16`, `k = 1..=32`.
pub fn rotation_grid() -> Vec<f64> {
    (1..=ROTATIONS)
        .map(|k| k as f64 * std::f64::consts::PI / 16.0)
        .collect()
}

/// Canonical sign: the entry of largest magnitude is positive.
fn fix_sign(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v.get(pivot).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Unit eigenvectors of the two largest-magnitude eigenvalues of the
/// residual `A - E[A]`, sign-normalized.
pub fn residual_pcs(g: &Graph, fm: &FittedModel) -> Result<(Vec<f64>, Vec<f64>)> {
    if g.n() < 2 {
        return Err(Error::invalid("residual PCA needs at least two nodes"));
    }
    if g.n() != fm.n() {
        return Err(Error::SizeMismatch {
            graph: g.n(),
            model: fm.n(),
        });
    }
    let mut residual = expected_adjacency(fm);
    residual.neg_mut();
    for (i, j, w) in g.edges() {
        residual[(i, j)] += w as f64;
        residual[(j, i)] += w as f64;
    }
    let eig = top_eigenpairs(&residual, 2, EIG_TOL, EIG_SEED)?;
    let mut it = eig.vectors.into_iter();
    let mut x1 = it.next().expect("two vectors");
    let mut x2 = it.next().expect("two vectors");
    fix_sign(&mut x1);
    fix_sign(&mut x2);
    Ok((x1, x2))
}

/// Quadrant counts after rotating every point by `-angle`. Coordinates equal
/// to zero count as nonnegative.
pub fn quadrant_table(x1: &[f64], x2: &[f64], angle: f64) -> Result<QuadrantTable> {
    if x1.len() != x2.len() {
        return Err(Error::invalid(format!(
            "coordinate vectors differ in length ({} vs {})",
            x1.len(),
            x2.len()
        )));
    }
    let (s, c) = angle.sin_cos();
    let mut t = [0u64; 4];
    for (&a, &b) in x1.iter().zip(x2) {
        let u = a * c + b * s;
        let v = -a * s + b * c;
        let row = usize::from(u < 0.0);
        let col = usize::from(v < 0.0);
        t[2 * row + col] += 1;
    }
    Ok(t)
}

/// Pearson independence statistic of a 2x2 table, no continuity correction;
/// zero when any margin is empty.
pub fn table_chi2(t: &QuadrantTable) -> f64 {
    let [a, b, c, d] = t.map(|x| x as f64);
    let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
    if r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
        return 0.0;
    }
    let n = r1 + r2;
    let cross = a * d - b * c;
    n * cross * cross / (r1 * r2 * c1 * c2)
}

pub fn quadrant_chi2(x1: &[f64], x2: &[f64], angle: f64) -> Result<f64> {
    Ok(table_chi2(&quadrant_table(x1, x2, angle)?))
}

/// Maximized statistic over the rotation grid: `(statistic, angle, tables)`.
pub fn max_rotated_chi2(x1: &[f64], x2: &[f64], exec: Execution) -> Result<(f64, f64, Vec<QuadrantTable>)> {
    let grid = rotation_grid();
    let tables = par::map_slice(exec, &grid, |&a| quadrant_table(x1, x2, a))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for (t, &a) in tables.iter().zip(&grid) {
        let stat = table_chi2(t);
        if stat > best.0 {
            best = (stat, a);
        }
    }
    Ok((best.0, best.1, tables))
}

/// Runs the benchmark test at level `alpha`.
pub fn chi2_detect(g: &Graph, fm: &FittedModel, alpha: f64) -> Result<Chi2Report> {
    chi2_detect_with(g, fm, alpha, Execution::default())
}

pub fn chi2_detect_with(g: &Graph, fm: &FittedModel, alpha: f64, exec: Execution) -> Result<Chi2Report> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let critical_value = chi2_1_quantile(1.0 - alpha)?;
    let (x1, x2) = residual_pcs(g, fm)?;
    let (statistic, angle, quadrant_tables) = max_rotated_chi2(&x1, &x2, exec)?;
    Ok(Chi2Report {
        alpha,
        statistic,
        angle,
        critical_value,
        reject: statistic > critical_value,
        quadrant_tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        assert_eq!(table_chi2(&[25, 25, 25, 25]), 0.0);
        assert!((table_chi2(&[50, 0, 0, 50]) - 100.0).abs() < 1e-12);
        assert_eq!(table_chi2(&[40, 0, 0, 0]), 0.0);
    }

    #[test]
    fn quarter_turn_permutes_quadrants() {
        let x1 = [0.3, -0.7, 0.2, 0.9, -0.1, -0.4, 0.55, 0.12];
        let x2 = [0.1, 0.2, -0.8, 0.35, -0.6, 0.45, -0.05, 0.77];
        for a in [0.1, 0.4, 1.3] {
            let base = quadrant_chi2(&x1, &x2, a).unwrap();
            let quarter = quadrant_chi2(&x1, &x2, a + std::f64::consts::FRAC_PI_2).unwrap();
            let full = quadrant_chi2(&x1, &x2, a + 2.0 * std::f64::consts::PI).unwrap();
            assert!((base - quarter).abs() < 1e-12);
            assert!((base - full).abs() < 1e-12);
        }
        assert!(quadrant_chi2(&x1, &x2[..3], 0.0).is_err());
    }

    #[test]
    fn single_quadrant_is_degenerate() {
        let x = [0.1, 0.2, 0.3];
        let (stat, _, tables) = max_rotated_chi2(&x, &x, Execution::Sequential).unwrap();
        assert!(stat >= 0.0);
        assert_eq!(tables.len(), ROTATIONS);
        // unrotated (k = 32 is a full turn): all points in one quadrant
        assert_eq!(table_chi2(&tables[31]), 0.0);
    }

    #[test]
    fn statistic_dominates_grid() {
        let x1: Vec<f64> = (0..50).map(|i| ((i * 7 % 13) as f64 - 6.0) / 10.0).collect();
        let x2: Vec<f64> = (0..50).map(|i| ((i * 5 % 11) as f64 - 5.0) / 10.0).collect();
        let (stat, angle, tables) = max_rotated_chi2(&x1, &x2, Execution::Parallel).unwrap();
        assert!(tables.iter().all(|t| table_chi2(t) <= stat));
        assert!(rotation_grid().contains(&angle));
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.3];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
        let mut w: Vec<f64> = v.iter().map(|x| -x).collect();
        fix_sign(&mut w);
        assert_eq!(w, v);
    }
}
