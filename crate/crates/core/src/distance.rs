//! Two-sample statistical distances on empirical CDFs, and dynamic time
//! warping for sequence alignment.
//!
//! The ECDF measures (Wasserstein, Kolmogorov–Smirnov, Cramér–von Mises)
//! quantify distributional dissimilarity between pooled value samples; DTW
//! serves clustering and nearest-centroid assignment. Everything here is a
//! pure function; callers may evaluate distances in parallel as long as they
//! reduce results in a fixed order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::num::{count, Scalar};

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("distance requires non-empty samples")]
    EmptySample,
    #[error("band {band} is narrower than the length difference {diff}")]
    BandTooNarrow { band: usize, diff: usize },
}

fn sorted<T: Scalar>(sample: &[T]) -> Vec<T> {
    let mut v = sample.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Empirical CDF of a sample: the right-continuous step function
/// `x -> (#values <= x) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf<T> {
    sorted: Vec<T>,
}

impl<T: Scalar> EmpiricalCdf<T> {
    pub fn new(sample: &[T]) -> Result<Self, DistanceError> {
        if sample.is_empty() {
            return Err(DistanceError::EmptySample);
        }
        Ok(Self {
            sorted: sorted(sample),
        })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_sample(&self) -> &[T] {
        &self.sorted
    }

    pub fn evaluate(&self, x: T) -> T {
        let below = self.sorted.partition_point(|v| *v <= x);
        count::<T>(below) / count::<T>(self.sorted.len())
    }
}

/// First-order Wasserstein distance between two samples: the integral of
/// `|F_a - F_b|` computed exactly over the merged breakpoint grid. For
/// samples of equal size this equals the mean absolute difference of order
/// statistics.
pub fn wasserstein<T: Scalar>(a: &[T], b: &[T]) -> Result<T, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::EmptySample);
    }
    let sa = sorted(a);
    let sb = sorted(b);
    let mut grid = Vec::with_capacity(sa.len() + sb.len());
    grid.extend_from_slice(&sa);
    grid.extend_from_slice(&sb);
    grid.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));

    let na = count::<T>(sa.len());
    let nb = count::<T>(sb.len());
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = T::zero();
    for k in 0..grid.len() - 1 {
        let x0 = grid[k];
        let x1 = grid[k + 1];
        while ia < sa.len() && sa[ia] <= x0 {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= x0 {
            ib += 1;
        }
        let fa = count::<T>(ia) / na;
        let fb = count::<T>(ib) / nb;
        total = total + (fa - fb).abs() * (x1 - x0);
    }
    Ok(total)
}

/// Two-sample Kolmogorov–Smirnov statistic: `sup_x |F_a(x) - F_b(x)|`,
/// attained at one of the merged sample points. Always in `[0, 1]`.
pub fn kolmogorov_smirnov<T: Scalar>(a: &[T], b: &[T]) -> Result<T, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::EmptySample);
    }
    let sa = sorted(a);
    let sb = sorted(b);
    let mut grid = Vec::with_capacity(sa.len() + sb.len());
    grid.extend_from_slice(&sa);
    grid.extend_from_slice(&sb);
    grid.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));

    let na = count::<T>(sa.len());
    let nb = count::<T>(sb.len());
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut best = T::zero();
    for &x in &grid {
        while ia < sa.len() && sa[ia] <= x {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= x {
            ib += 1;
        }
        let diff = (count::<T>(ia) / na - count::<T>(ib) / nb).abs();
        if diff > best {
            best = diff;
        }
    }
    Ok(best)
}

/// Two-sample Cramér–von Mises criterion:
/// `n*m / (n+m)^2 * sum_z (F_a(z) - F_b(z))^2` over the merged sample
/// (points counted with multiplicity). Zero for identical samples.
pub fn cramer_von_mises<T: Scalar>(a: &[T], b: &[T]) -> Result<T, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::EmptySample);
    }
    let sa = sorted(a);
    let sb = sorted(b);
    let mut grid = Vec::with_capacity(sa.len() + sb.len());
    grid.extend_from_slice(&sa);
    grid.extend_from_slice(&sb);
    grid.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));

    let na = count::<T>(sa.len());
    let nb = count::<T>(sb.len());
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut sum = T::zero();
    let mut k = 0;
    while k < grid.len() {
        let x = grid[k];
        let mut run = 1;
        while k + run < grid.len() && grid[k + run] == x {
            run += 1;
        }
        while ia < sa.len() && sa[ia] <= x {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= x {
            ib += 1;
        }
        let d = count::<T>(ia) / na - count::<T>(ib) / nb;
        sum = sum + count::<T>(run) * d * d;
        k += run;
    }
    let total = na + nb;
    Ok(na * nb / (total * total) * sum)
}

/// Tags the ECDF-based dissimilarity measure used throughout the pipeline.
/// Every variant is symmetric, non-negative and zero on identical samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMeasure {
    Wasserstein,
    KolmogorovSmirnov,
    CramerVonMises,
}

impl DistanceMeasure {
    pub fn distance<T: Scalar>(&self, a: &[T], b: &[T]) -> Result<T, DistanceError> {
        match self {
            DistanceMeasure::Wasserstein => wasserstein(a, b),
            DistanceMeasure::KolmogorovSmirnov => kolmogorov_smirnov(a, b),
            DistanceMeasure::CramerVonMises => cramer_von_mises(a, b),
        }
    }
}

impl fmt::Display for DistanceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DistanceMeasure::Wasserstein => "wasserstein",
            DistanceMeasure::KolmogorovSmirnov => "kolmogorov-smirnov",
            DistanceMeasure::CramerVonMises => "cramer-von-mises",
        };
        f.write_str(name)
    }
}

impl FromStr for DistanceMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wasserstein" | "wd" => Ok(DistanceMeasure::Wasserstein),
            "kolmogorov-smirnov" | "ks" => Ok(DistanceMeasure::KolmogorovSmirnov),
            "cramer-von-mises" | "cvm" => Ok(DistanceMeasure::CramerVonMises),
            other => Err(format!(
                "unknown measure `{other}` (expected wasserstein, kolmogorov-smirnov or cramer-von-mises)"
            )),
        }
    }
}

/// Local cost for DTW cells. Absolute difference keeps units linear and is
/// the default; squared cost is available as a configuration option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DtwCost {
    #[default]
    Abs,
    Squared,
}

impl DtwCost {
    #[inline]
    fn cell<T: Scalar>(&self, x: T, y: T) -> T {
        let d = x - y;
        match self {
            DtwCost::Abs => d.abs(),
            DtwCost::Squared => d * d,
        }
    }
}

impl fmt::Display for DtwCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DtwCost::Abs => "abs",
            DtwCost::Squared => "squared",
        })
    }
}

impl FromStr for DtwCost {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "abs" | "l1" => Ok(DtwCost::Abs),
            "squared" | "l2" => Ok(DtwCost::Squared),
            other => Err(format!("unknown dtw cost `{other}` (expected abs or squared)")),
        }
    }
}

/// DTW configuration: local cost and optional Sakoe–Chiba band half-width.
/// The band is unconstrained by default; it exists as an optimization knob
/// for long sequences and must be at least the length difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DtwParams {
    pub cost: DtwCost,
    pub band: Option<usize>,
}

/// Dynamic time warping alignment cost with unit-step moves
/// (match/insert/delete) and absolute-difference local cost.
pub fn dtw<T: Scalar>(a: &[T], b: &[T], band: Option<usize>) -> Result<T, DistanceError> {
    dtw_with(
        a,
        b,
        &DtwParams {
            cost: DtwCost::Abs,
            band,
        },
    )
}

/// DTW under explicit parameters.
pub fn dtw_with<T: Scalar>(a: &[T], b: &[T], params: &DtwParams) -> Result<T, DistanceError> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(DistanceError::EmptySample);
    }
    if let Some(band) = params.band {
        let diff = n.abs_diff(m);
        if band < diff {
            return Err(DistanceError::BandTooNarrow { band, diff });
        }
    }
    let inf = T::infinity();
    let mut prev = vec![inf; m + 1];
    prev[0] = T::zero();
    let mut cur = vec![inf; m + 1];
    for i in 1..=n {
        cur.fill(inf);
        let (jlo, jhi) = match params.band {
            Some(band) => (1.max(i.saturating_sub(band)), m.min(i + band)),
            None => (1, m),
        };
        for j in jlo..=jhi {
            let c = params.cost.cell(a[i - 1], b[j - 1]);
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = c + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// DTW cost plus one optimal alignment path as `(i, j)` element pairs.
///
/// Ties between predecessors resolve diagonal-first, then vertical, then
/// horizontal, so the path is deterministic.
pub(crate) fn dtw_path<T: Scalar>(
    a: &[T],
    b: &[T],
    params: &DtwParams,
) -> Result<(T, Vec<(usize, usize)>), DistanceError> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(DistanceError::EmptySample);
    }
    let inf = T::infinity();
    let mut table = vec![inf; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    table[at(0, 0)] = T::zero();
    for i in 1..=n {
        for j in 1..=m {
            let c = params.cost.cell(a[i - 1], b[j - 1]);
            let best = table[at(i - 1, j - 1)]
                .min(table[at(i - 1, j)])
                .min(table[at(i, j - 1)]);
            table[at(i, j)] = c + best;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        path.push((i - 1, j - 1));
        if i == 1 && j == 1 {
            break;
        }
        let diag = if i > 1 && j > 1 { table[at(i - 1, j - 1)] } else { inf };
        let up = if i > 1 { table[at(i - 1, j)] } else { inf };
        let left = if j > 1 { table[at(i, j - 1)] } else { inf };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    Ok((table[at(n, m)], path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_steps_through_the_sample() {
        let cdf = EmpiricalCdf::new(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(cdf.evaluate(f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf.evaluate(f64::INFINITY), 1.0);
        assert_eq!(cdf.evaluate(0.5), 0.0);
        assert_eq!(cdf.evaluate(1.0), 0.25);
        assert_eq!(cdf.evaluate(2.0), 0.75);
        assert_eq!(cdf.evaluate(2.5), 0.75);
        assert_eq!(cdf.evaluate(3.0), 1.0);
        assert!(EmpiricalCdf::<f64>::new(&[]).is_err());
    }

    #[test]
    fn wasserstein_identity_and_unit_shift() {
        let a = [0.7, 0.1, 0.4];
        assert_eq!(wasserstein(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn wasserstein_equals_order_statistics_mean_for_equal_sizes() {
        let a: [f64; 4] = [0.9, 0.2, 0.5, 0.1];
        let b: [f64; 4] = [0.3, 0.8, 0.4, 0.6];
        let mut sa = a.to_vec();
        let mut sb = b.to_vec();
        sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
        sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let by_order: f64 = sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / 4.0;
        let d = wasserstein(&a, &b).unwrap();
        assert!((d - by_order).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_smirnov_identity_and_disjoint_supports() {
        let a = [0.0, 1.0];
        assert_eq!(kolmogorov_smirnov(&a, &a).unwrap(), 0.0);
        assert_eq!(kolmogorov_smirnov(&[0.0, 1.0], &[10.0, 11.0]).unwrap(), 1.0);
    }

    #[test]
    fn cramer_von_mises_identity_and_shift_monotonicity() {
        let a = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(cramer_von_mises(&a, &a).unwrap(), 0.0);
        // Shifts large enough to move mass across ECDF breakpoints.
        let mut last = 0.0;
        for shift in [0.5, 1.0, 2.0, 3.0] {
            let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let d = cramer_von_mises(&a, &b).unwrap();
            assert!(d > last, "shift {shift}: {d} <= {last}");
            last = d;
        }
    }

    #[test]
    fn cramer_von_mises_matches_hand_computed_cases() {
        // Two singletons {1} vs {2}: F differs by 1 at z=1 only.
        // n*m/(n+m)^2 * (1 + 0) = 1/4.
        assert!((cramer_von_mises::<f64>(&[1.0], &[2.0]).unwrap() - 0.25).abs() < 1e-15);
        // {1,3} vs {2,4}: diffs at z=1..4 are 0.5,0,0.5,0 -> sum sq 0.5.
        // 4/16 * 0.5 = 0.125.
        assert!((cramer_von_mises::<f64>(&[1.0, 3.0], &[2.0, 4.0]).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn dtw_identity_and_constant_offset() {
        let a = [0.3, 0.1, 0.2];
        assert_eq!(dtw(&a, &a, None).unwrap(), 0.0);
        assert_eq!(dtw(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], None).unwrap(), 3.0);
    }

    #[test]
    fn dtw_absorbs_a_repeated_sample() {
        // Full-table check by hand: the duplicate 1 aligns at zero cost.
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0, 3.0], None).unwrap(), 0.0);
    }

    #[test]
    fn dtw_band_validation_and_dominance() {
        let a = [0.0, 1.0, 2.0, 3.0, 4.0];
        let b = [0.0, 2.0, 4.0];
        assert!(matches!(
            dtw(&a, &b, Some(1)),
            Err(DistanceError::BandTooNarrow { band: 1, diff: 2 })
        ));
        let free = dtw(&a, &b, None).unwrap();
        for band in [2usize, 3, 4] {
            let banded = dtw(&a, &b, Some(band)).unwrap();
            assert!(free <= banded);
        }
    }

    #[test]
    fn dtw_path_aligns_every_index() {
        let a = [0.0, 1.0, 2.0, 1.0];
        let b = [0.0, 2.0, 1.0];
        let (cost, path) = dtw_path(&a, &b, &DtwParams::default()).unwrap();
        assert_eq!(cost, dtw(&a, &b, None).unwrap());
        assert_eq!(path.first(), Some(&(0, 0)));
        assert_eq!(path.last(), Some(&(3, 2)));
        for w in path.windows(2) {
            let (i0, j0) = w[0];
            let (i1, j1) = w[1];
            assert!(i1 - i0 <= 1 && j1 - j0 <= 1 && (i1 > i0 || j1 > j0));
        }
    }

    #[test]
    fn squared_cost_is_selectable() {
        let params = DtwParams {
            cost: DtwCost::Squared,
            band: None,
        };
        assert_eq!(
            dtw_with(&[0.0, 0.0], &[2.0, 2.0], &params).unwrap(),
            8.0
        );
    }

    #[test]
    fn measure_tags_parse_and_dispatch() {
        assert_eq!("wasserstein".parse::<DistanceMeasure>().unwrap(), DistanceMeasure::Wasserstein);
        assert_eq!("ks".parse::<DistanceMeasure>().unwrap(), DistanceMeasure::KolmogorovSmirnov);
        assert_eq!("cvm".parse::<DistanceMeasure>().unwrap(), DistanceMeasure::CramerVonMises);
        assert!("euclid".parse::<DistanceMeasure>().is_err());
        let a = [0.0, 1.0];
        let b = [1.0, 2.0];
        assert_eq!(
            DistanceMeasure::Wasserstein.distance(&a, &b).unwrap(),
            wasserstein(&a, &b).unwrap()
        );
    }
}
