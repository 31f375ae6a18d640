//! Small-instance equidistribution diagnostics for the point generators.

use super::SampleBlock;
use crate::error::{Error, Result};

/// Exact star discrepancy of a small point set: the supremum over anchored
/// boxes [0, t) of |empirical measure - volume|.
///
/// The supremum is attained (as a one-sided limit) on the grid of boxes
/// whose upper corners run over the point coordinates and 1, evaluating
/// both the open and closed counts at each corner. Exact enumeration is
/// exponential in d, so this diagnostic is restricted to d <= 2, n <= 256.
pub fn star_discrepancy_exact(points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Config("empty point set".into()));
    }
    let d = points[0].len();
    let n = points.len();
    if d == 0 || d > 2 {
        return Err(Error::Unsupported(format!(
            "exact star discrepancy supports d in {{1, 2}}, got {d}"
        )));
    }
    if n > 256 {
        return Err(Error::Unsupported(format!(
            "exact star discrepancy supports n <= 256, got {n}"
        )));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Config("ragged point set".into()));
    }

    let nf = n as f64;
    let mut grid: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut coords: Vec<f64> = points.iter().map(|p| p[j]).collect();
        coords.push(1.0);
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        coords.dedup();
        grid.push(coords);
    }

    let mut sup: f64 = 0.0;
    match d {
        1 => {
            for &t in &grid[0] {
                let open = points.iter().filter(|p| p[0] < t).count() as f64;
                let closed = points.iter().filter(|p| p[0] <= t).count() as f64;
                sup = sup.max(t - open / nf).max(closed / nf - t);
            }
        }
        2 => {
            for &t0 in &grid[0] {
                for &t1 in &grid[1] {
                    let vol = t0 * t1;
                    let open = points
                        .iter()
                        .filter(|p| p[0] < t0 && p[1] < t1)
                        .count() as f64;
                    let closed = points
                        .iter()
                        .filter(|p| p[0] <= t0 && p[1] <= t1)
                        .count() as f64;
                    sup = sup.max(vol - open / nf).max(closed / nf - vol);
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(sup)
}

/// Dyadic stratification balance of one coordinate of a block.
///
/// Splits [0,1) into `2^level` equal intervals and returns the maximum
/// absolute deviation between the observed count per interval and the
/// ideal `n / 2^level`. Zero means the projection is perfectly stratified
/// at that level, as Sobol' blocks are for `level <= tau`.
pub fn one_dim_projection_balance(block: &SampleBlock, coord: usize, level: u32) -> f64 {
    assert!(coord < block.d(), "coordinate {coord} out of range");
    let bins = 1usize << level;
    let mut counts = vec![0u64; bins];
    for row in block.rows() {
        let b = ((row[coord] * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let ideal = block.n() as f64 / bins as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - ideal).abs())
        .fold(0.0, f64::max)
}
