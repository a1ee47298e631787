//! K-means over fixed-length windows under dynamic time warping, with
//! barycenter-averaged centroids and silhouette-scored selection of the
//! cluster count.
//!
//! Determinism contract: given the same seed the whole construction is
//! bit-identical, regardless of thread count. Distance evaluations run in
//! parallel but are collected in window-index order and reduced
//! sequentially, and every arg-min scan breaks ties toward the lowest index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::distance::{dtw_path, dtw_with, DistanceError, DtwParams};
use crate::num::{count, lit, Scalar};
use crate::series::Window;

const DBA_REFINEMENTS: usize = 10;
const DEFAULT_MAX_ITER: usize = 50;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k must be at least 2, got {k}")]
    KTooSmall { k: usize },
    #[error("need at least {k} windows for {k} clusters, got {n}")]
    TooFewWindows { k: usize, n: usize },
    #[error("windows must share one length (found {first} and {other})")]
    MixedWindowLengths { first: usize, other: usize },
    #[error("windows must be non-empty")]
    EmptyWindows,
    #[error("instance length {got} does not match the model window length {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("silhouette requires at least two clusters")]
    SingleCluster,
    #[error("model has {assignments} assignments but {windows} windows were supplied")]
    WindowCountMismatch { assignments: usize, windows: usize },
    #[error("clustering degenerated to an unrepairable empty cluster (fewer than {k} distinct windows?)")]
    Degenerate { k: usize },
    #[error("invalid k range: k_min {k_min}, k_max {k_max}, step {step}")]
    BadKRange { k_min: usize, k_max: usize, step: usize },
    #[error("inconsistent model parts: {reason}")]
    BadParts { reason: String },
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// A fitted clustering: `k` centroids of window length `w`, one assignment
/// per input window, member counts, the model silhouette and the seed plus
/// DTW parameters it was built with. No cluster is empty, and every window's
/// assigned centroid is its DTW-nearest one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T> {
    centroids: Vec<Vec<T>>,
    assignments: Vec<usize>,
    sizes: Vec<usize>,
    silhouette: T,
    seed: u64,
    dtw: DtwParams,
}

impl<T: Scalar> ClusterModel<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn window_len(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<T>] {
        &self.centroids
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn silhouette(&self) -> T {
        self.silhouette
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dtw_params(&self) -> &DtwParams {
        &self.dtw
    }

    /// Rebuilds a model from serialized parts, revalidating the invariants.
    pub fn from_parts(
        centroids: Vec<Vec<T>>,
        assignments: Vec<usize>,
        silhouette: T,
        seed: u64,
        dtw: DtwParams,
    ) -> Result<Self, ClusterError> {
        let k = centroids.len();
        if k < 2 {
            return Err(ClusterError::KTooSmall { k });
        }
        let w = centroids[0].len();
        if w == 0 {
            return Err(ClusterError::EmptyWindows);
        }
        for c in &centroids {
            if c.len() != w {
                return Err(ClusterError::MixedWindowLengths {
                    first: w,
                    other: c.len(),
                });
            }
        }
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            if a >= k {
                return Err(ClusterError::BadParts {
                    reason: format!("assignment {} out of range for k={}", a, k),
                });
            }
            sizes[a] += 1;
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(ClusterError::BadParts {
                reason: "empty cluster".to_string(),
            });
        }
        Ok(Self {
            centroids,
            assignments,
            sizes,
            silhouette,
            seed,
            dtw,
        })
    }

    /// Nearest centroid of `instance` by DTW, with its distance. Ties break
    /// toward the lowest cluster id.
    pub fn assign(&self, instance: &[T]) -> Result<(usize, T), ClusterError> {
        if instance.len() != self.window_len() {
            return Err(ClusterError::LengthMismatch {
                want: self.window_len(),
                got: instance.len(),
            });
        }
        Ok(nearest_centroid(&self.centroids, instance, &self.dtw))
    }

    /// The cluster with the fewest members and that count; ties break toward
    /// the lowest cluster id.
    pub fn smallest_cluster(&self) -> (usize, usize) {
        let mut best = 0;
        for (c, &s) in self.sizes.iter().enumerate() {
            if s < self.sizes[best] {
                best = c;
            }
        }
        (best, self.sizes[best])
    }
}

/// Index and distance of the DTW-nearest centroid, lowest id on ties.
pub fn nearest_centroid<T: Scalar>(centroids: &[Vec<T>], values: &[T], params: &DtwParams) -> (usize, T) {
    let mut best = 0usize;
    let mut best_d = dtw_with(values, &centroids[0], params).expect("validated inputs");
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = dtw_with(values, centroid, params).expect("validated inputs");
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Full pairwise DTW matrix over the windows, rows computed in parallel.
struct Pairwise<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Pairwise<T> {
    fn build(values: &[&[T]], params: &DtwParams) -> Self {
        let n = values.len();
        let rows: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| dtw_with(values[i], values[j], params).expect("validated inputs"))
                    .collect()
            })
            .collect();
        let mut data = vec![T::zero(); n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, d) in row.into_iter().enumerate() {
                let j = i + 1 + offset;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }
}

fn validate_windows<T: Scalar>(windows: &[Window<T>]) -> Result<usize, ClusterError> {
    let first = windows.first().ok_or(ClusterError::EmptyWindows)?;
    let w = first.len();
    if w == 0 {
        return Err(ClusterError::EmptyWindows);
    }
    for win in windows {
        if win.len() != w {
            return Err(ClusterError::MixedWindowLengths {
                first: w,
                other: win.len(),
            });
        }
    }
    Ok(w)
}

/// K-means++-style seeding over precomputed pairwise distances.
fn seed_indices<T: Scalar>(matrix: &Pairwise<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = matrix.n;
    let first = rng.gen_range(0..n);
    let mut chosen = vec![first];
    let mut weight: Vec<f64> = (0..n)
        .map(|i| {
            let d = matrix.get(i, first).to_f64().unwrap_or(0.0);
            d * d
        })
        .collect();
    while chosen.len() < k {
        let total: f64 = weight.iter().sum();
        let next = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut picked = n - 1;
            for (i, &w) in weight.iter().enumerate() {
                acc += w;
                if acc > r {
                    picked = i;
                    break;
                }
            }
            picked
        } else {
            // All remaining windows coincide with a chosen one; fall back to
            // the lowest unchosen index.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for i in 0..n {
            let d = matrix.get(i, next).to_f64().unwrap_or(0.0);
            weight[i] = weight[i].min(d * d);
        }
    }
    chosen
}

fn assign_all<T: Scalar>(
    values: &[&[T]],
    centroids: &[Vec<T>],
    params: &DtwParams,
) -> (Vec<usize>, Vec<T>) {
    let pairs: Vec<(usize, T)> = values
        .par_iter()
        .map(|v| nearest_centroid(centroids, v, params))
        .collect();
    pairs.into_iter().unzip()
}

/// Sum of member distances to a candidate centroid, evaluated in member
/// order so the reduction is deterministic.
fn member_sum<T: Scalar>(values: &[&[T]], members: &[usize], candidate: &[T], params: &DtwParams) -> T {
    let dists: Vec<T> = members
        .par_iter()
        .map(|&i| dtw_with(values[i], candidate, params).expect("validated inputs"))
        .collect();
    dists.into_iter().fold(T::zero(), |acc, d| acc + d)
}

/// One barycenter-averaging pass: align every member to the current
/// centroid and average the values warped onto each centroid position.
fn dba_average<T: Scalar>(values: &[&[T]], members: &[usize], centroid: &[T], params: &DtwParams) -> Vec<T> {
    let w = centroid.len();
    let paths: Vec<Vec<(usize, usize)>> = members
        .par_iter()
        .map(|&i| {
            dtw_path(centroid, values[i], params)
                .expect("validated inputs")
                .1
        })
        .collect();
    let mut sums = vec![T::zero(); w];
    let mut counts = vec![0usize; w];
    for (path, &member) in paths.iter().zip(members) {
        for &(ci, mi) in path {
            sums[ci] = sums[ci] + values[member][mi];
            counts[ci] += 1;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| s / count::<T>(c.max(1)))
        .collect()
}

/// Barycenter refinement for one cluster. Candidates are the previous
/// centroid, the medoid member, and up to `DBA_REFINEMENTS` averaging
/// iterates; the candidate with the smallest member-distance sum wins, so an
/// update never raises the within-cluster cost.
fn refine_centroid<T: Scalar>(
    values: &[&[T]],
    members: &[usize],
    previous: &[T],
    previous_sum: T,
    matrix: &Pairwise<T>,
    params: &DtwParams,
) -> (Vec<T>, T) {
    let mut best = previous.to_vec();
    let mut best_sum = previous_sum;

    // Medoid by matrix row sums restricted to the member set.
    let mut medoid = members[0];
    let mut medoid_sum = T::infinity();
    for &i in members {
        let mut s = T::zero();
        for &j in members {
            s = s + matrix.get(i, j);
        }
        if s < medoid_sum {
            medoid_sum = s;
            medoid = i;
        }
    }
    if medoid_sum < best_sum {
        best = values[medoid].to_vec();
        best_sum = medoid_sum;
    }

    let mut cur = values[medoid].to_vec();
    let mut cur_sum = medoid_sum;
    for _ in 0..DBA_REFINEMENTS {
        let next = dba_average(values, members, &cur, params);
        let next_sum = member_sum(values, members, &next, params);
        if next_sum < best_sum {
            best = next.clone();
            best_sum = next_sum;
        }
        if next_sum >= cur_sum {
            break;
        }
        cur = next;
        cur_sum = next_sum;
    }
    (best, best_sum)
}

/// Moves the farthest-from-centroid window out of a multi-member cluster
/// into each empty cluster. Returns whether anything changed.
fn repair_empty_clusters<T: Scalar>(
    values: &[&[T]],
    centroids: &[Vec<T>],
    assignments: &mut [usize],
    dists: &mut [T],
    sizes: &mut [usize],
    params: &DtwParams,
) -> bool {
    let mut repaired = false;
    for empty in 0..sizes.len() {
        if sizes[empty] > 0 {
            continue;
        }
        let mut donor: Option<usize> = None;
        for (i, &d) in dists.iter().enumerate() {
            if sizes[assignments[i]] < 2 {
                continue;
            }
            match donor {
                Some(best) if d <= dists[best] => {}
                _ => donor = Some(i),
            }
        }
        let Some(i) = donor else { break };
        sizes[assignments[i]] -= 1;
        assignments[i] = empty;
        sizes[empty] = 1;
        dists[i] = dtw_with(values[i], &centroids[empty], params).expect("validated inputs");
        repaired = true;
    }
    repaired
}

fn sum_in_order<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x)
}

struct FittedParts<T> {
    centroids: Vec<Vec<T>>,
    assignments: Vec<usize>,
    sizes: Vec<usize>,
}

fn kmeans_core<T: Scalar>(
    values: &[&[T]],
    k: usize,
    seed: u64,
    max_iter: usize,
    params: &DtwParams,
    matrix: &Pairwise<T>,
) -> Result<FittedParts<T>, ClusterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<T>> = seed_indices(matrix, k, &mut rng)
        .into_iter()
        .map(|i| values[i].to_vec())
        .collect();

    let (mut assignments, mut dists) = assign_all(values, &centroids, params);
    let mut sizes = vec![0usize; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    let mut inertia = sum_in_order(&dists);
    // After a repair the assignment is no longer the nearest-centroid map,
    // so the monotonicity check pauses for one round and the model must not
    // be returned until a clean assignment pass happens.
    let mut last_was_repair = repair_empty_clusters(
        values,
        &centroids,
        &mut assignments,
        &mut dists,
        &mut sizes,
        params,
    );

    for _ in 0..max_iter.max(1) {
        // Update step: best-of candidates per cluster, so the within-cluster
        // cost never rises relative to the previous centroid.
        let member_lists: Vec<Vec<usize>> = {
            let mut lists = vec![Vec::new(); k];
            for (i, &a) in assignments.iter().enumerate() {
                lists[a].push(i);
            }
            lists
        };
        for (c, members) in member_lists.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let previous_sum = sum_in_order(&members.iter().map(|&i| dists[i]).collect::<Vec<_>>());
            let (centroid, _) = refine_centroid(values, members, &centroids[c], previous_sum, matrix, params);
            centroids[c] = centroid;
        }

        let (new_assignments, new_dists) = assign_all(values, &centroids, params);
        let new_inertia = sum_in_order(&new_dists);
        if !last_was_repair {
            let slack = lit::<T>(1e-9) * (T::one() + inertia.abs());
            assert!(
                new_inertia <= inertia + slack,
                "inertia increased: {new_inertia} > {inertia}"
            );
        }

        let converged = !last_was_repair && new_assignments == assignments;
        assignments = new_assignments;
        dists = new_dists;
        inertia = new_inertia;
        sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        if sizes.iter().all(|&s| s > 0) {
            last_was_repair = false;
            if converged {
                break;
            }
        } else {
            repair_empty_clusters(
                values,
                &centroids,
                &mut assignments,
                &mut dists,
                &mut sizes,
                params,
            );
            last_was_repair = true;
        }
    }

    if last_was_repair || sizes.iter().any(|&s| s == 0) {
        return Err(ClusterError::Degenerate { k });
    }
    Ok(FittedParts {
        centroids,
        assignments,
        sizes,
    })
}

/// Mean silhouette over the windows given an assignment and the pairwise
/// matrix. Members of singleton clusters contribute 0, as does the 0/0 case.
fn silhouette_from_matrix<T: Scalar>(
    matrix: &Pairwise<T>,
    assignments: &[usize],
    sizes: &[usize],
) -> T {
    let n = assignments.len();
    let k = sizes.len();
    let scores: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] == 1 {
                return T::zero();
            }
            let mut sums = vec![T::zero(); k];
            for j in 0..n {
                if j != i {
                    sums[assignments[j]] = sums[assignments[j]] + matrix.get(i, j);
                }
            }
            let a = sums[own] / count::<T>(sizes[own] - 1);
            let mut b = T::infinity();
            for c in 0..k {
                if c != own && sizes[c] > 0 {
                    let mean = sums[c] / count::<T>(sizes[c]);
                    if mean < b {
                        b = mean;
                    }
                }
            }
            let denom = a.max(b);
            if denom == T::zero() {
                T::zero()
            } else {
                (b - a) / denom
            }
        })
        .collect();
    sum_in_order(&scores) / count::<T>(n)
}

/// Clusters the windows into `k` groups. Deterministic given the seed;
/// converges when assignments stop changing or after `max_iter` rounds.
pub fn kmeans_dtw<T: Scalar>(
    windows: &[Window<T>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterModel<T>, ClusterError> {
    kmeans_dtw_with(windows, k, seed, max_iter, DtwParams::default())
}

/// [`kmeans_dtw`] under explicit DTW parameters.
pub fn kmeans_dtw_with<T: Scalar>(
    windows: &[Window<T>],
    k: usize,
    seed: u64,
    max_iter: usize,
    params: DtwParams,
) -> Result<ClusterModel<T>, ClusterError> {
    if k < 2 {
        return Err(ClusterError::KTooSmall { k });
    }
    validate_windows(windows)?;
    if windows.len() < k {
        return Err(ClusterError::TooFewWindows {
            k,
            n: windows.len(),
        });
    }
    let values: Vec<&[T]> = windows.iter().map(|w| w.values.as_slice()).collect();
    let matrix = Pairwise::build(&values, &params);
    let parts = kmeans_core(&values, k, seed, max_iter, &params, &matrix)?;
    let silhouette = silhouette_from_matrix(&matrix, &parts.assignments, &parts.sizes);
    Ok(ClusterModel {
        centroids: parts.centroids,
        assignments: parts.assignments,
        sizes: parts.sizes,
        silhouette,
        seed,
        dtw: params,
    })
}

/// Mean silhouette of a fitted model over its windows, recomputed from
/// scratch with the model's DTW parameters.
pub fn silhouette_dtw<T: Scalar>(
    model: &ClusterModel<T>,
    windows: &[Window<T>],
) -> Result<T, ClusterError> {
    if model.k() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    if windows.len() != model.assignments.len() {
        return Err(ClusterError::WindowCountMismatch {
            assignments: model.assignments.len(),
            windows: windows.len(),
        });
    }
    validate_windows(windows)?;
    let values: Vec<&[T]> = windows.iter().map(|w| w.values.as_slice()).collect();
    let matrix = Pairwise::build(&values, &model.dtw);
    Ok(silhouette_from_matrix(&matrix, &model.assignments, &model.sizes))
}

/// Per-centroid value summary for human review of a candidate clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSummary<T> {
    pub len: usize,
    pub mean: T,
    pub min: T,
    pub max: T,
}

/// Score sheet for one attempted cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct KScore<T> {
    pub k: usize,
    pub silhouette: T,
    pub centroids: Vec<CentroidSummary<T>>,
}

/// Outcome of scanning a range of cluster counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSelection<T> {
    pub k_min: usize,
    pub k_max: usize,
    pub step: usize,
    pub scores: Vec<KScore<T>>,
    pub chosen_k: usize,
}

fn summarize_centroid<T: Scalar>(centroid: &[T]) -> CentroidSummary<T> {
    let mut min = centroid[0];
    let mut max = centroid[0];
    let mut sum = T::zero();
    for &v in centroid {
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
        sum = sum + v;
    }
    CentroidSummary {
        len: centroid.len(),
        mean: sum / count::<T>(centroid.len()),
        min,
        max,
    }
}

/// Runs K-means for every `k` in `k_min..=k_max` (stepping by `step`),
/// records silhouettes, and returns the model for the chosen count.
///
/// Selection rule: the largest silhouette wins; candidates within 0.01 of
/// the best are treated as tied and the largest k among them is chosen.
pub fn select_clusters<T: Scalar>(
    windows: &[Window<T>],
    k_min: usize,
    k_max: usize,
    step: usize,
    seed: u64,
) -> Result<(ClusterSelection<T>, ClusterModel<T>), ClusterError> {
    select_clusters_with(windows, k_min, k_max, step, seed, DtwParams::default())
}

/// [`select_clusters`] under explicit DTW parameters.
pub fn select_clusters_with<T: Scalar>(
    windows: &[Window<T>],
    k_min: usize,
    k_max: usize,
    step: usize,
    seed: u64,
    params: DtwParams,
) -> Result<(ClusterSelection<T>, ClusterModel<T>), ClusterError> {
    if k_min < 2 || k_min > k_max || step == 0 {
        return Err(ClusterError::BadKRange { k_min, k_max, step });
    }
    validate_windows(windows)?;
    if windows.len() < k_max {
        return Err(ClusterError::TooFewWindows {
            k: k_max,
            n: windows.len(),
        });
    }
    let values: Vec<&[T]> = windows.iter().map(|w| w.values.as_slice()).collect();
    let matrix = Pairwise::build(&values, &params);

    let mut scores = Vec::new();
    let mut candidates: Vec<(usize, T, FittedParts<T>)> = Vec::new();
    let mut k = k_min;
    while k <= k_max {
        let parts = kmeans_core(&values, k, seed, DEFAULT_MAX_ITER, &params, &matrix)?;
        let silhouette = silhouette_from_matrix(&matrix, &parts.assignments, &parts.sizes);
        scores.push(KScore {
            k,
            silhouette,
            centroids: parts.centroids.iter().map(|c| summarize_centroid(c)).collect(),
        });
        candidates.push((k, silhouette, parts));
        k += step;
    }

    let best = candidates
        .iter()
        .map(|(_, s, _)| *s)
        .fold(T::neg_infinity(), T::max);
    let tie_band = lit::<T>(0.01);
    let chosen_k = candidates
        .iter()
        .filter(|(_, s, _)| *s >= best - tie_band)
        .map(|(k, _, _)| *k)
        .max()
        .expect("non-empty candidate list");
    let (_, silhouette, parts) = candidates
        .into_iter()
        .find(|(k, _, _)| *k == chosen_k)
        .expect("chosen k was scored");

    let model = ClusterModel {
        centroids: parts.centroids,
        assignments: parts.assignments,
        sizes: parts.sizes,
        silhouette,
        seed,
        dtw: params,
    };
    Ok((
        ClusterSelection {
            k_min,
            k_max,
            step,
            scores,
            chosen_k,
        },
        model,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::dtw;

    fn window(start: usize, values: Vec<f64>) -> Window<f64> {
        Window { start, values }
    }

    /// Three exactly repeated patterns, five copies each.
    fn duplicated_patterns() -> (Vec<Window<f64>>, Vec<usize>) {
        let zeros = vec![0.0; 8];
        let ones = vec![1.0; 8];
        let ramp: Vec<f64> = (0..8).map(|i| i as f64 / 4.0 - 1.0).collect();
        let mut windows = Vec::new();
        let mut labels = Vec::new();
        for rep in 0..5 {
            for (label, pattern) in [&zeros, &ones, &ramp].into_iter().enumerate() {
                windows.push(window(rep * 3 + label, pattern.clone()));
                labels.push(label);
            }
        }
        (windows, labels)
    }

    /// Three level-separated patterns with deterministic jitter, so every
    /// window is distinct and larger k remain feasible.
    fn noisy_patterns() -> Vec<Window<f64>> {
        (0..15)
            .map(|i| {
                let level = [0.0, 2.0, 5.0][i % 3];
                let values = (0..8)
                    .map(|j| level + ((i * 8 + j) as f64 * 0.73).sin() * 0.05)
                    .collect();
                window(i, values)
            })
            .collect()
    }

    /// Canonical relabeling by first occurrence, for label-permutation
    /// invariant partition comparison.
    fn canonical(assignments: &[usize]) -> Vec<usize> {
        let mut map = std::collections::HashMap::new();
        assignments
            .iter()
            .map(|&a| {
                let next = map.len();
                *map.entry(a).or_insert(next)
            })
            .collect()
    }

    #[test]
    fn separates_duplicated_patterns_exactly() {
        let (windows, labels) = duplicated_patterns();
        let model = kmeans_dtw(&windows, 3, 7, 50).unwrap();
        assert_eq!(canonical(model.assignments()), canonical(&labels));
        // Centroids equal the patterns and every member sits at distance 0.
        for (i, win) in windows.iter().enumerate() {
            let c = model.assignments()[i];
            assert_eq!(model.centroids()[c], win.values);
        }
        let inertia: f64 = windows
            .iter()
            .zip(model.assignments())
            .map(|(w, &c)| dtw_with(&w.values, &model.centroids()[c], model.dtw_params()).unwrap())
            .sum();
        assert_eq!(inertia, 0.0);
    }

    #[test]
    fn partition_is_seed_invariant_on_separated_data() {
        let (windows, _) = duplicated_patterns();
        let a = kmeans_dtw(&windows, 3, 1, 50).unwrap();
        let b = kmeans_dtw(&windows, 3, 2, 50).unwrap();
        assert_eq!(canonical(a.assignments()), canonical(b.assignments()));
    }

    #[test]
    fn rerun_with_same_seed_is_bit_identical() {
        let (windows, _) = duplicated_patterns();
        let a = kmeans_dtw(&windows, 3, 42, 50).unwrap();
        let b = kmeans_dtw(&windows, 3, 42, 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_windows_assign_to_their_stored_cluster() {
        let (windows, _) = duplicated_patterns();
        let model = kmeans_dtw(&windows, 3, 9, 50).unwrap();
        for (i, win) in windows.iter().enumerate() {
            let (c, _) = model.assign(&win.values).unwrap();
            assert_eq!(c, model.assignments()[i]);
        }
    }

    #[test]
    fn validates_inputs() {
        let (windows, _) = duplicated_patterns();
        assert!(matches!(
            kmeans_dtw(&windows, 1, 0, 10),
            Err(ClusterError::KTooSmall { k: 1 })
        ));
        assert!(matches!(
            kmeans_dtw(&windows[..2], 3, 0, 10),
            Err(ClusterError::TooFewWindows { .. })
        ));
        let mixed = vec![window(0, vec![0.0; 4]), window(1, vec![0.0; 5]), window(2, vec![0.0; 4])];
        assert!(matches!(
            kmeans_dtw(&mixed, 2, 0, 10),
            Err(ClusterError::MixedWindowLengths { .. })
        ));
    }

    #[test]
    fn identical_windows_cannot_fill_two_clusters() {
        let windows: Vec<_> = (0..5).map(|i| window(i, vec![1.5; 6])).collect();
        assert!(matches!(
            kmeans_dtw(&windows, 2, 3, 20),
            Err(ClusterError::Degenerate { k: 2 })
        ));
    }

    #[test]
    fn silhouette_high_for_far_separated_tight_groups() {
        let mut windows = Vec::new();
        for i in 0..6 {
            let offset = if i % 2 == 0 { 0.0 } else { 100.0 };
            let values: Vec<f64> = (0..6).map(|j| offset + (i + j) as f64 * 0.01).collect();
            windows.push(window(i, values));
        }
        let model = kmeans_dtw(&windows, 2, 11, 50).unwrap();
        assert!(model.silhouette() > 0.9, "silhouette {}", model.silhouette());
    }

    #[test]
    fn silhouette_zero_when_all_windows_identical() {
        // Degenerate split of identical windows: build the model by parts to
        // pin the 0/0 -> 0 convention.
        let windows: Vec<_> = (0..4).map(|i| window(i, vec![2.0; 5])).collect();
        let model = ClusterModel::from_parts(
            vec![vec![2.0; 5], vec![2.0; 5]],
            vec![0, 0, 1, 1],
            0.0,
            0,
            DtwParams::default(),
        )
        .unwrap();
        let score = silhouette_dtw(&model, &windows).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn silhouette_matches_brute_force_oracle() {
        // Direct reimplementation from pairwise distances.
        let windows: Vec<Window<f64>> = (0..9)
            .map(|i| {
                let base = (i % 3) as f64 * 2.0;
                window(i, (0..5).map(|j| base + ((i * 5 + j) as f64 * 0.37).sin() * 0.3).collect())
            })
            .collect();
        let model = kmeans_dtw(&windows, 3, 5, 50).unwrap();

        let n = windows.len();
        let d = |i: usize, j: usize| dtw(&windows[i].values, &windows[j].values, None).unwrap();
        let assignments = model.assignments();
        let mut expected = 0.0;
        for i in 0..n {
            let own = assignments[i];
            let own_size = assignments.iter().filter(|&&a| a == own).count();
            if own_size == 1 {
                continue;
            }
            let a: f64 = (0..n)
                .filter(|&j| j != i && assignments[j] == own)
                .map(|j| d(i, j))
                .sum::<f64>()
                / (own_size - 1) as f64;
            let b = (0..model.k())
                .filter(|&c| c != own)
                .map(|c| {
                    let members: Vec<usize> = (0..n).filter(|&j| assignments[j] == c).collect();
                    members.iter().map(|&j| d(i, j)).sum::<f64>() / members.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            let s = if a.max(b) == 0.0 { 0.0 } else { (b - a) / a.max(b) };
            expected += s;
        }
        expected /= n as f64;
        let got = silhouette_dtw(&model, &windows).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn selection_scans_the_range_and_reports_scores() {
        let windows = noisy_patterns();
        let (selection, model) = select_clusters(&windows, 2, 6, 1, 3).unwrap();
        assert_eq!(selection.scores.len(), 5);
        assert_eq!(selection.chosen_k, 3);
        assert_eq!(model.k(), 3);
        for (score, k) in selection.scores.iter().zip(2..=6) {
            assert_eq!(score.k, k);
            assert_eq!(score.centroids.len(), k);
        }
    }

    #[test]
    fn singleton_range_returns_that_k() {
        let windows = noisy_patterns();
        let (selection, model) = select_clusters(&windows, 5, 5, 1, 3).unwrap();
        assert_eq!(selection.chosen_k, 5);
        assert_eq!(model.k(), 5);
        assert_eq!(selection.scores.len(), 1);
    }

    #[test]
    fn assign_breaks_ties_toward_lowest_id() {
        let model = ClusterModel::from_parts(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 3.0], vec![1.0, 1.0]],
            vec![0, 1, 2, 3],
            0.0,
            0,
            DtwParams::default(),
        )
        .unwrap();
        // Equidistant from centroids 1 and 3 (identical); nearer than 0 and 2.
        let (c, d) = model.assign(&[1.1_f64, 1.1]).unwrap();
        assert_eq!(c, 1);
        assert!((d - 0.2).abs() < 1e-12);
        assert!(matches!(
            model.assign(&[1.0]),
            Err(ClusterError::LengthMismatch { want: 2, got: 1 })
        ));
    }

    #[test]
    fn assign_exact_centroid_is_distance_zero() {
        let (windows, _) = duplicated_patterns();
        let model = kmeans_dtw(&windows, 3, 21, 50).unwrap();
        for (j, centroid) in model.centroids().iter().enumerate() {
            let (c, d) = model.assign(centroid).unwrap();
            assert_eq!(c, j);
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn smallest_cluster_and_tie_break() {
        let model = ClusterModel::from_parts(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0; 10]
                .into_iter()
                .chain(vec![1; 3])
                .chain(vec![2; 7])
                .collect(),
            0.0,
            0,
            DtwParams::default(),
        )
        .unwrap();
        assert_eq!(model.smallest_cluster(), (1, 3));

        let tied = ClusterModel::from_parts(
            vec![vec![0.0], vec![1.0]],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            0.0,
            0,
            DtwParams::default(),
        )
        .unwrap();
        assert_eq!(tied.smallest_cluster(), (0, 4));
    }

    #[test]
    fn smallest_cluster_matches_direct_count() {
        let (windows, _) = duplicated_patterns();
        let model = kmeans_dtw(&windows, 3, 13, 50).unwrap();
        let (c, m) = model.smallest_cluster();
        let direct = model
            .assignments()
            .iter()
            .filter(|&&a| a == c)
            .count();
        assert_eq!(m, direct);
        for s in model.sizes() {
            assert!(*s >= m);
        }
    }
}
