//! Grid quadratic variation, regular subgrid allocation, subsampled RV and
//! the two scales realized volatility.

use crate::error::{Error, Result};

/// The K regular subgrids of {0..n}: subgrid j (0-based) takes indices
/// j, j+K, j+2K, ... The subgrids partition the index set; `n_bar` is the
/// average number of increments per subgrid, kept as the exact ratio
/// (n - K + 1) / K and never rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgridAllocation {
    n: usize,
    k: usize,
}

impl SubgridAllocation {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::InvalidK { k, n });
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of subgrid j, 0 <= j < K.
    pub fn subgrid(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        assert!(j < self.k, "subgrid index out of range");
        (j..=self.n).step_by(self.k)
    }

    /// Number of grid points in subgrid j.
    pub fn subgrid_len(&self, j: usize) -> usize {
        assert!(j < self.k, "subgrid index out of range");
        (self.n - j) / self.k + 1
    }

    /// n_bar as an exact integer ratio (numerator, denominator).
    pub fn n_bar_ratio(&self) -> (u64, u64) {
        ((self.n - self.k + 1) as u64, self.k as u64)
    }

    pub fn n_bar(&self) -> f64 {
        (self.n - self.k + 1) as f64 / self.k as f64
    }
}

/// Regular allocation of the observation grid into K subgrids.
pub fn regular_allocation(n: usize, k: usize) -> Result<SubgridAllocation> {
    SubgridAllocation::new(n, k)
}

/// Quadratic covariation of two sequences over an arbitrary grid of indices:
/// the sum of products of increments between consecutive grid points.
/// A single-point grid gives 0.
pub fn grid_qv(z1: &[f64], z2: &[f64], indices: &[usize]) -> Result<f64> {
    if z1.len() != z2.len() {
        return Err(Error::InvalidInput(format!(
            "sequences must have equal length, got {} and {}",
            z1.len(),
            z2.len()
        )));
    }
    if indices.is_empty() {
        return Err(Error::InvalidIndices("index list is empty".into()));
    }
    if let Some(&last) = indices.last() {
        if last >= z1.len() {
            return Err(Error::InvalidIndices(format!(
                "index {last} out of range for length {}",
                z1.len()
            )));
        }
    }
    if indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidIndices(
            "indices must be strictly increasing".into(),
        ));
    }
    let mut acc = 0.0;
    for w in indices.windows(2) {
        acc += (z1[w[1]] - z1[w[0]]) * (z2[w[1]] - z2[w[0]]);
    }
    Ok(acc)
}

/// Realized volatility over the full observation grid.
pub fn rv_all(y: &[f64]) -> f64 {
    y.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

/// Average of the realized volatilities over the K subgrids.
pub fn rv_avg(y: &[f64], alloc: &SubgridAllocation) -> Result<f64> {
    if y.len() != alloc.n() + 1 {
        return Err(Error::InvalidInput(format!(
            "series length {} does not match allocation n = {}",
            y.len(),
            alloc.n()
        )));
    }
    let k = alloc.k();
    let mut total = 0.0;
    for j in 0..k {
        let mut sub = 0.0;
        let mut prev: Option<f64> = None;
        for idx in alloc.subgrid(j) {
            let v = y[idx];
            if let Some(p) = prev {
                let d = v - p;
                sub += d * d;
            }
            prev = Some(v);
        }
        total += sub;
    }
    Ok(total / k as f64)
}

/// Output of the two scales realized volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsrvResult {
    pub rv_all: f64,
    pub rv_avg: f64,
    /// rv_avg - (n_bar / n) * rv_all; may be negative.
    pub tsrv: f64,
    pub k: usize,
    pub n_bar: f64,
    /// tsrv / (1 - n_bar / n), when the small-sample rescaling is requested.
    pub adjusted: Option<f64>,
}

/// Two scales realized volatility with K subgrids. Negative values are
/// returned as-is; `adjust` additionally reports the small-sample rescaled
/// value (the plain estimator stays the primary output). The rescaling is
/// undefined at K = 1, where n_bar = n.
pub fn tsrv(y: &[f64], k: usize, adjust: bool) -> Result<TsrvResult> {
    if y.len() < 2 {
        return Err(Error::InvalidInput(
            "series must contain at least two observations".into(),
        ));
    }
    let n = y.len() - 1;
    let alloc = regular_allocation(n, k)?;
    let all = rv_all(y);
    let avg = rv_avg(y, &alloc)?;
    let n_bar = alloc.n_bar();
    let estimate = avg - n_bar / n as f64 * all;
    let denom = 1.0 - n_bar / n as f64;
    let adjusted = (adjust && denom > 0.0).then(|| estimate / denom);
    Ok(TsrvResult {
        rv_all: all,
        rv_avg: avg,
        tsrv: estimate,
        k,
        n_bar,
        adjusted,
    })
}

/// K = round(c * n^(2/3)) clamped to [1, n], the rate-optimal subgrid count.
pub fn select_k(n: usize, c: f64) -> Result<usize> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("c must be > 0, got {c}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
    }
    let raw = (c * (n as f64).powf(2.0 / 3.0)).round();
    Ok((raw as usize).clamp(1, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_qv_direct_cases() {
        let z = [0.0, 1.0, 3.0];
        assert_eq!(grid_qv(&z, &z, &[0, 1, 2]).unwrap(), 5.0);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        assert_eq!(grid_qv(&z, &neg, &[0, 1, 2]).unwrap(), -5.0);
        assert_eq!(grid_qv(&z, &z, &[1]).unwrap(), 0.0);
        assert!(grid_qv(&z, &z, &[0, 0]).is_err());
        assert!(grid_qv(&z, &z, &[2, 1]).is_err());
        assert!(grid_qv(&z, &z, &[0, 3]).is_err());
        assert!(grid_qv(&z, &z, &[]).is_err());
        assert!(grid_qv(&z, &[0.0], &[0]).is_err());
    }

    #[test]
    fn grid_qv_matches_brute_force_on_random_instances() {
        // independent re-summation straight from the definition
        fn brute(z1: &[f64], z2: &[f64], idx: &[usize]) -> f64 {
            let a: Vec<f64> = idx.iter().map(|&i| z1[i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| z2[i]).collect();
            let mut s = 0.0;
            for j in 1..a.len() {
                s += (a[j] - a[j - 1]) * (b[j] - b[j - 1]);
            }
            s
        }
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..1000 {
            let len = rng.random_range(2..=51);
            let z1: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z2: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut idx: Vec<usize> = (0..len).filter(|_| rng.random_bool(0.6)).collect();
            if idx.is_empty() {
                idx.push(rng.random_range(0..len));
            }
            let a = grid_qv(&z1, &z2, &idx).unwrap();
            let b = brute(&z1, &z2, &idx);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn regular_allocation_matches_hand_example() {
        let alloc = regular_allocation(4, 2).unwrap();
        assert_eq!(alloc.subgrid(0).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(alloc.subgrid(1).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(alloc.n_bar(), 1.5);

        let full = regular_allocation(7, 1).unwrap();
        assert_eq!(full.subgrid(0).collect::<Vec<_>>(), (0..=7).collect::<Vec<_>>());
        assert_eq!(full.n_bar(), 7.0);

        assert!(regular_allocation(4, 0).is_err());
        assert!(regular_allocation(4, 5).is_err());
    }

    #[test]
    fn allocation_partitions_index_set_exhaustively() {
        for n in 2..=12usize {
            for k in 1..=n {
                let alloc = regular_allocation(n, k).unwrap();
                let mut seen = vec![false; n + 1];
                let mut sizes = Vec::new();
                for j in 0..k {
                    let mut count = 0;
                    for idx in alloc.subgrid(j) {
                        assert!(!seen[idx], "index {idx} appears twice (n={n}, K={k})");
                        seen[idx] = true;
                        count += 1;
                    }
                    assert_eq!(count, alloc.subgrid_len(j));
                    sizes.push(count);
                }
                assert!(seen.iter().all(|&s| s), "partition misses indices (n={n}, K={k})");
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                assert!(max - min <= 1);
                // sum of increments per subgrid
                let increments: usize = sizes.iter().map(|s| s - 1).sum();
                assert_eq!(increments, n + 1 - k);
                // n_bar * K = n - K + 1 exactly in integer arithmetic
                let (num, den) = alloc.n_bar_ratio();
                assert_eq!(num, (n - k + 1) as u64);
                assert_eq!(den, k as u64);
            }
        }
    }

    #[test]
    fn rv_hand_example() {
        let y = [0.0, 1.0, 0.0, 1.0, 0.0];
        let alloc = regular_allocation(4, 2).unwrap();
        assert_eq!(rv_all(&y), 4.0);
        assert_eq!(rv_avg(&y, &alloc).unwrap(), 0.0);
        let one = regular_allocation(4, 1).unwrap();
        assert_eq!(rv_avg(&y, &one).unwrap(), rv_all(&y));
        let flat = [2.5; 5];
        assert_eq!(rv_all(&flat), 0.0);
        assert_eq!(rv_avg(&flat, &alloc).unwrap(), 0.0);
        assert!(rv_avg(&y[..3], &alloc).is_err());
    }

    #[test]
    fn tsrv_hand_example_is_negative() {
        let y = [0.0, 1.0, 0.0, 1.0, 0.0];
        let r = tsrv(&y, 2, false).unwrap();
        assert_eq!(r.tsrv, -1.5);
        assert_eq!(r.rv_all, 4.0);
        assert_eq!(r.rv_avg, 0.0);
        assert_eq!(r.n_bar, 1.5);
        assert!(r.adjusted.is_none());

        let flat = [0.7; 9];
        for k in 1..=8 {
            assert_eq!(tsrv(&flat, k, false).unwrap().tsrv, 0.0);
        }
        assert!(tsrv(&y, 5, false).is_err());
    }

    #[test]
    fn tsrv_identity_and_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-0.01..0.01)).collect();
        for k in [1usize, 3, 14, 50] {
            let r = tsrv(&y, k, true).unwrap();
            let n = (y.len() - 1) as f64;
            let resid = r.tsrv + r.n_bar / n * r.rv_all - r.rv_avg;
            assert!(resid.abs() <= 1e-15 * r.rv_avg.abs().max(r.rv_all.abs()));
            if k == 1 {
                // n_bar = n: the rescaling is undefined
                assert!(r.adjusted.is_none());
            } else {
                let adj = r.adjusted.unwrap();
                assert!((adj - r.tsrv / (1.0 - r.n_bar / n)).abs() <= 1e-18);
            }

            // adding a constant shifts every increment's endpoints equally;
            // the comparison scale is rv_all since shifting loses absolute
            // precision in the differences
            let shifted: Vec<f64> = y.iter().map(|v| v + 5.3).collect();
            let rs = tsrv(&shifted, k, false).unwrap();
            let scale = 1e-11 * r.rv_all;
            assert!((rs.rv_all - r.rv_all).abs() <= scale);
            assert!((rs.rv_avg - r.rv_avg).abs() <= scale);
            assert!((rs.tsrv - r.tsrv).abs() <= scale);
        }
    }

    #[test]
    fn select_k_examples() {
        assert_eq!(select_k(1000, 1.0).unwrap(), 100);
        assert_eq!(select_k(8, 1.0).unwrap(), 4);
        assert_eq!(select_k(23400, 1.0).unwrap(), 818);
        // clamping
        assert_eq!(select_k(4, 10.0).unwrap(), 4);
        assert_eq!(select_k(100, 1e-9).unwrap(), 1);
        assert!(select_k(100, 0.0).is_err());
        assert!(select_k(1, 1.0).is_err());
    }
}
