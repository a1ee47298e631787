//! Reliability estimation for a single data instance.
//!
//! The score blends two ingredients: the mean squared prediction error of
//! the instance's nearest neighbors (the members of its DTW-assigned
//! cluster), and the instance's statistical distance from that cluster,
//! taken relative to the cluster's distance from an all-zero reference
//! series of the same length. With `mse` the neighbor error mean,
//! `d` the instance distance and `d0` the origin distance:
//!
//! ```text
//! confine = 1 - mse
//! score   = (2 - mse - d/d0) / 2
//! ```
//!
//! Perfect neighbors and an instance sitting exactly on the cluster
//! representative give a score of 1. The score is unbounded below and is
//! never clamped; reports flag values outside `[0, 1]` instead.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cluster::{ClusterError, ClusterModel};
use crate::distance::{DistanceError, DistanceMeasure};
use crate::num::{count, lit, Scalar};
use crate::seed::derive_seed;
use crate::series::Window;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("reliability requires at least one neighbor error")]
    EmptyErrors,
    #[error("no prediction error recorded for member window {window}")]
    MissingError { window: usize },
    #[error("cluster {cluster} is out of range for a model with {k} clusters")]
    UnknownCluster { cluster: usize, k: usize },
    #[error("cluster representative is all zeros, so the origin distance vanishes")]
    DegenerateCluster,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Confidence from neighbor errors alone: `1 - mean(e_i^2)`.
pub fn confine<T: Scalar>(errors: &[T]) -> Result<T, ReliabilityError> {
    if errors.is_empty() {
        return Err(ReliabilityError::EmptyErrors);
    }
    let sum_sq: T = errors.iter().map(|&e| e * e).sum();
    Ok(T::one() - sum_sq / count::<T>(errors.len()))
}

/// The neighbor set drawn for one instance: `m` member windows of the
/// assigned cluster together with their prediction errors, where `m` is the
/// size of the model's smallest cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborErrors<T> {
    pub cluster_id: usize,
    pub member_indices: Vec<usize>,
    pub errors: Vec<T>,
    pub m: usize,
}

/// Selects the neighbor errors for `cluster_id`.
///
/// If the cluster already has exactly `m` members (it is the smallest), all
/// of them are taken; otherwise `m` members are sampled uniformly without
/// replacement, deterministically for a given seed. Selected indices are
/// reported in ascending order.
pub fn neighbor_errors<T: Scalar>(
    model: &ClusterModel<T>,
    cluster_id: usize,
    per_window_errors: &HashMap<usize, T>,
    seed: u64,
) -> Result<NeighborErrors<T>, ReliabilityError> {
    if cluster_id >= model.k() {
        return Err(ReliabilityError::UnknownCluster {
            cluster: cluster_id,
            k: model.k(),
        });
    }
    let (_, m) = model.smallest_cluster();
    let mut members: Vec<usize> = model
        .assignments()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == cluster_id)
        .map(|(i, _)| i)
        .collect();

    let chosen = if members.len() == m {
        members
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Partial Fisher-Yates: uniform without replacement.
        for i in 0..m {
            let j = rng.gen_range(i..members.len());
            members.swap(i, j);
        }
        let mut selected = members[..m].to_vec();
        selected.sort_unstable();
        selected
    };

    let errors = chosen
        .iter()
        .map(|&i| {
            per_window_errors
                .get(&i)
                .copied()
                .ok_or(ReliabilityError::MissingError { window: i })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NeighborErrors {
        cluster_id,
        member_indices: chosen,
        errors,
        m,
    })
}

/// The all-zero reference series of length `w` that anchors the distance
/// ratio: a cluster's distance from it measures how far the cluster sits
/// from nothing at all.
pub fn origin_series<T: Scalar>(w: usize) -> Vec<T> {
    vec![T::zero(); w]
}

/// Which sample represents a cluster in the distance ratio: its centroid
/// (default) or the pooled values of all member windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterRepr {
    #[default]
    Centroid,
    Pooled,
}

impl std::fmt::Display for ClusterRepr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClusterRepr::Centroid => "centroid",
            ClusterRepr::Pooled => "pooled",
        })
    }
}

impl std::str::FromStr for ClusterRepr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centroid" => Ok(ClusterRepr::Centroid),
            "pooled" => Ok(ClusterRepr::Pooled),
            other => Err(format!("unknown cluster representative `{other}` (expected centroid or pooled)")),
        }
    }
}

/// Scoring configuration. `seed` is the base neighbor-sampling seed; every
/// instance derives its own stream from `(seed, instance_start)`, so adding
/// instances never perturbs the neighbors drawn for earlier ones.
#[derive(Debug, Clone, Copy)]
pub struct StadreParams {
    pub measure: DistanceMeasure,
    pub repr: ClusterRepr,
    pub seed: u64,
}

impl Default for StadreParams {
    fn default() -> Self {
        Self {
            measure: DistanceMeasure::Wasserstein,
            repr: ClusterRepr::Centroid,
            seed: 0,
        }
    }
}

/// Reliability report for one instance. `stadre` always equals
/// `(2 - mean_sq_error - d_instance/d_origin) / 2` computed from its own
/// fields; `out_of_range` marks scores outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport<T> {
    pub instance_start: usize,
    pub cluster_id: usize,
    pub m: usize,
    pub mean_sq_error: T,
    pub d_instance: T,
    pub d_origin: T,
    pub confine: T,
    pub stadre: T,
    pub seed: u64,
    pub out_of_range: bool,
}

/// Scores one instance window against a fitted cluster model.
///
/// The instance is assigned to its DTW-nearest cluster, neighbor errors are
/// drawn from that cluster's members, and the distances to the cluster
/// representative and to the all-zero origin are measured with the
/// configured ECDF distance.
pub fn stadre<T: Scalar>(
    instance: &Window<T>,
    model: &ClusterModel<T>,
    windows: &[Window<T>],
    per_window_errors: &HashMap<usize, T>,
    params: &StadreParams,
) -> Result<ReliabilityReport<T>, ReliabilityError> {
    let (cluster_id, _) = model.assign(&instance.values)?;

    let representative: Vec<T> = match params.repr {
        ClusterRepr::Centroid => model.centroids()[cluster_id].clone(),
        ClusterRepr::Pooled => model
            .assignments()
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == cluster_id)
            .flat_map(|(i, _)| windows[i].values.iter().copied())
            .collect(),
    };

    let origin = origin_series::<T>(model.window_len());
    let d_origin = params.measure.distance(&representative, &origin)?;
    if d_origin <= T::zero() {
        return Err(ReliabilityError::DegenerateCluster);
    }
    let d_instance = params.measure.distance(&representative, &instance.values)?;

    let instance_seed = derive_seed(params.seed, instance.start as u64);
    let neighbors = neighbor_errors(model, cluster_id, per_window_errors, instance_seed)?;
    let sum_sq: T = neighbors.errors.iter().map(|&e| e * e).sum();
    let mean_sq_error = sum_sq / count::<T>(neighbors.errors.len());

    let two = lit::<T>(2.0);
    let ratio = d_instance / d_origin;
    let stadre = (two - mean_sq_error - ratio) / two;
    let out_of_range = !(stadre >= T::zero() && stadre <= T::one());

    Ok(ReliabilityReport {
        instance_start: instance.start,
        cluster_id,
        m: neighbors.m,
        mean_sq_error,
        d_instance,
        d_origin,
        confine: T::one() - mean_sq_error,
        stadre,
        seed: params.seed,
        out_of_range,
    })
}
