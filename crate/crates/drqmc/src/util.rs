//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// slice order, so results are independent of how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Pairwise sum of equal-length vectors into a single vector.
pub fn pairwise_vec_sum(rows: &[Vec<f64>]) -> Vec<f64> {
    assert!(!rows.is_empty());
    if rows.len() == 1 {
        return rows[0].clone();
    }
    if rows.len() <= 16 {
        let mut acc = rows[0].clone();
        for row in &rows[1..] {
            for (a, b) in acc.iter_mut().zip(row) {
                *a += b;
            }
        }
        return acc;
    }
    let mid = rows.len() / 2;
    let mut left = pairwise_vec_sum(&rows[..mid]);
    let right = pairwise_vec_sum(&rows[mid..]);
    for (a, b) in left.iter_mut().zip(&right) {
        *a += b;
    }
    left
}

pub fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn linf_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Median of a small sample (not NaN-safe; callers guarantee finite inputs).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Slope of the least-squares line through (x, y) pairs.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// SplitMix64 output at stream position `n` for the given seed. A pure
/// function, so any position can be addressed without stepping through
/// earlier ones. Fixed here so seeded runs stay reproducible across
/// releases.
pub fn splitmix64_at(seed: u64, n: u64) -> u64 {
    let z = seed.wrapping_add(n.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    mix64(z)
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform f64 in [0, 1) from the top 53 bits of a u64.
pub fn u64_to_unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
