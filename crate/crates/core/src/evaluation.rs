//! Clustering quality against ground-truth edge-node labels, the epsilon
//! sweep harness, and Monte-Carlo calibration of the Constellation Distance.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::clustering::{dbscan, ClusterParams, Clustering, DEFAULT_MIN_PTS};
use crate::constellation::{euclidean_distance, point_set_distance};
use crate::features::{extract_cache_features, normalize_snapshot, CacheFeatures, FeatureMode};
use crate::flow::Snapshot;
use crate::math::{derive_seed, sqrt};
use crate::{Error, Result};

/// Edge-node label of each cache.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub labels: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn insert(&mut self, cache: impl Into<String>, label: impl Into<String>) {
        self.labels.insert(cache.into(), label.into());
    }

    pub fn label(&self, cache: &str) -> Option<&str> {
        self.labels.get(cache).map(String::as_str)
    }

    /// Distinct labels over the whole mapping.
    pub fn label_count(&self) -> usize {
        self.labels.values().collect::<BTreeSet<_>>().len()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for GroundTruth {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        GroundTruth { labels: iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    /// Winning label of each cluster, by cluster index.
    pub cluster_labels: Vec<String>,
    /// Label handed to each clustered cache.
    pub assigned: BTreeMap<String, String>,
    pub n_tp: usize,
    pub n_fp: usize,
}

/// Most frequent label among `labels`; the lexicographically smallest wins ties.
pub fn majority<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    // max_by_key returns the last maximum; iterate in reverse so it is the smallest label.
    counts.into_iter().rev().max_by_key(|(_, c)| *c).map(|(l, _)| l)
}

/// Gives each cluster its majority ground-truth label. Noise stays unlabeled.
pub fn majority_vote_labels(clustering: &Clustering, truth: &GroundTruth) -> Result<Vote> {
    let mut vote = Vote { cluster_labels: Vec::new(), assigned: BTreeMap::new(), n_tp: 0, n_fp: 0 };
    for cluster in &clustering.clusters {
        let labels = cluster
            .cache_ids()
            .map(|id| truth.label(id).ok_or_else(|| Error::MissingLabel(id.into())))
            .collect::<Result<Vec<&str>>>()?;
        let winner = majority(labels.iter().copied()).unwrap_or_default();
        for (id, gt) in cluster.cache_ids().zip(&labels) {
            if *gt == winner {
                vote.n_tp += 1;
            } else {
                vote.n_fp += 1;
            }
            vote.assigned.insert(id.into(), winner.into());
        }
        vote.cluster_labels.push(winner.into());
    }
    Ok(vote)
}

/// TPR, fragmentation (mu) and pureness (phi) of a clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityIndices {
    pub tpr: f64,
    /// `None` when no cluster exists.
    pub fragmentation: Option<f64>,
    pub pureness: f64,
    pub noise_count: usize,
    pub n_tp: usize,
    pub n_fp: usize,
    /// |X|: clustered plus noise caches.
    pub n_points: usize,
    pub n_clusters: usize,
    /// Distinct labels won by at least one cluster.
    pub n_labels: usize,
    /// Distinct ground-truth labels among the caches of the snapshot.
    pub n_gt: usize,
}

pub fn clustering_indices(clustering: &Clustering, truth: &GroundTruth) -> Result<QualityIndices> {
    let vote = majority_vote_labels(clustering, truth)?;
    let n_points = clustering.point_count();
    let n_clusters = clustering.clusters.len();
    let n_labels = vote.cluster_labels.iter().collect::<BTreeSet<_>>().len();
    let n_gt = clustering
        .assignments()
        .filter_map(|(id, _, _)| truth.label(id))
        .collect::<BTreeSet<_>>()
        .len();
    Ok(QualityIndices {
        tpr: if n_points == 0 { 0.0 } else { vote.n_tp as f64 / n_points as f64 },
        fragmentation: (n_labels > 0).then(|| n_clusters as f64 / n_labels as f64),
        pureness: if n_gt == 0 { 0.0 } else { n_labels as f64 / n_gt as f64 },
        noise_count: clustering.noise.len(),
        n_tp: vote.n_tp,
        n_fp: vote.n_fp,
        n_points,
        n_clusters,
        n_labels,
        n_gt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub indices: QualityIndices,
}

/// Settings of an epsilon sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub min_pts: usize,
    pub min_flow: usize,
    pub mode: FeatureMode,
}

impl SweepConfig {
    /// `steps + 1` evenly spaced values in `[from, to]`.
    pub fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|i| from + (to - from) * i as f64 / steps.max(1) as f64).collect()
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: Self::grid(0.005, 0.2, 39),
            min_pts: DEFAULT_MIN_PTS,
            min_flow: crate::features::DEFAULT_MIN_FLOW,
            mode: FeatureMode::default(),
        }
    }
}

/// Clusters one snapshot for every epsilon of the grid and scores each result.
pub fn epsilon_sweep(snapshot: &Snapshot<'_>, truth: &GroundTruth, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let features = extract_cache_features(snapshot, config.min_flow, &config.mode)?.features;
    sweep_features(&features, truth, &config.epsilons, config.min_pts)
}

/// [`epsilon_sweep`] over already extracted features.
pub fn sweep_features(
    features: &[CacheFeatures],
    truth: &GroundTruth,
    epsilons: &[f64],
    min_pts: usize,
) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon grid".into()));
    }
    if epsilons.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("epsilon grid must be ascending".into()));
    }
    let points = if features.is_empty() { Vec::new() } else { normalize_snapshot(features)?.0 };
    epsilons
        .iter()
        .map(|&epsilon| {
            let clustering = dbscan(&points, ClusterParams::new(epsilon, min_pts)?)?;
            Ok(SweepRow { epsilon, indices: clustering_indices(&clustering, truth)? })
        })
        .collect()
}

/// One run of the displacement experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    /// Stars in the base constellation.
    pub stars: usize,
    /// Radius of the displacement ball.
    pub radius: f64,
    pub trials: usize,
    /// Stars added to the perturbed copy.
    pub extra_stars: usize,
    /// Space dimension; `None` uses the star count.
    pub dim: Option<usize>,
    pub seed: u64,
}

impl CalibrationConfig {
    pub fn new(stars: usize, radius: f64, trials: usize, extra_stars: usize, seed: u64) -> Self {
        CalibrationConfig { stars, radius, trials, extra_stars, dim: None, seed }
    }

    pub fn dimension(&self) -> usize {
        self.dim.unwrap_or(self.stars)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub mean_cd: f64,
    /// Average length of the displacements actually drawn.
    pub mean_displacement: f64,
}

/// Uniform point in the ball of `radius` around the origin.
pub fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 || dim == 0 {
        return alloc::vec![0.0; dim];
    }
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = sqrt(dir.iter().map(|x| x * x).sum());
    let r = radius * libm::pow(rng.random::<f64>(), 1.0 / dim as f64);
    for x in &mut dir {
        *x *= r / norm;
    }
    dir
}

/// Mean CD between a random constellation and its displaced (and possibly
/// enlarged) copy, over independent trials.
pub fn cd_calibration(config: &CalibrationConfig) -> Result<CalibrationResult> {
    if config.stars == 0 || config.trials == 0 {
        return Err(Error::InvalidParameter("stars and trials must be at least 1".into()));
    }
    if !(config.radius >= 0.0) {
        return Err(Error::InvalidParameter("radius must be non-negative".into()));
    }
    let dim = config.dimension();
    let sentinel = sqrt(dim as f64);
    let mut cd_sum = 0.0;
    let mut displacement_sum = 0.0;
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[trial as u64]));
        let base: Vec<Vec<f64>> =
            (0..config.stars).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let mut moved: Vec<Vec<f64>> = base
            .iter()
            .map(|s| {
                let delta = sample_in_ball(&mut rng, dim, config.radius);
                displacement_sum += sqrt(delta.iter().map(|x| x * x).sum());
                s.iter().zip(&delta).map(|(a, b)| a + b).collect()
            })
            .collect();
        for _ in 0..config.extra_stars {
            moved.push((0..dim).map(|_| rng.random::<f64>()).collect());
        }
        cd_sum += point_set_distance(&base, &moved, sentinel, euclidean_distance).cd;
    }
    Ok(CalibrationResult {
        mean_cd: cd_sum / config.trials as f64,
        mean_displacement: displacement_sum / (config.trials * config.stars) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{Cluster, Member, Role};
    use alloc::format;
    use alloc::vec;

    fn clustering(clusters: &[&[&str]], noise: &[&str]) -> Clustering {
        Clustering {
            clusters: clusters
                .iter()
                .map(|c| Cluster { members: c.iter().map(|id| Member { cache_id: (*id).into(), role: Role::Core }).collect() })
                .collect(),
            noise: noise.iter().map(|n| (*n).into()).collect(),
            params: ClusterParams::default(),
            snapshot: None,
        }
    }

    #[test]
    fn pure_and_mixed_clusters() {
        let gt: GroundTruth = [("a", "E1"), ("b", "E1"), ("c", "E1"), ("d", "E2"), ("e", "E2")].into_iter().collect();
        let v = majority_vote_labels(&clustering(&[&["a", "b", "c"]], &[]), &gt).unwrap();
        assert_eq!((v.n_tp, v.n_fp), (3, 0));
        let v = majority_vote_labels(&clustering(&[&["a", "b", "c", "d", "e"]], &[]), &gt).unwrap();
        assert_eq!(v.cluster_labels, vec!["E1"]);
        assert_eq!((v.n_tp, v.n_fp), (3, 2));
        assert_eq!(v.assigned["d"], "E1");
    }

    #[test]
    fn vote_ties_pick_smallest_label() {
        assert_eq!(majority(["E2", "E1", "E2", "E1"]), Some("E1"));
        assert_eq!(majority(["B", "A", "B"]), Some("B"));
        assert_eq!(majority([]), None);
    }

    #[test]
    fn unlabeled_member_is_an_error() {
        let gt: GroundTruth = [("a", "E1")].into_iter().collect();
        assert_eq!(
            majority_vote_labels(&clustering(&[&["a", "z"]], &[]), &gt),
            Err(Error::MissingLabel("z".into()))
        );
        // Unlabeled noise is fine.
        assert!(clustering_indices(&clustering(&[&["a"]], &["z"]), &gt).is_ok());
    }

    #[test]
    fn split_label_gives_fragmentation_two() {
        let ids: Vec<String> = (0..11).map(|i| format!("c{i}")).collect();
        let gt: GroundTruth = ids.iter().map(|i| (i.clone(), "E1")).collect();
        let first: Vec<&str> = ids[..5].iter().map(String::as_str).collect();
        let second: Vec<&str> = ids[5..].iter().map(String::as_str).collect();
        let q = clustering_indices(&clustering(&[&first, &second], &[]), &gt).unwrap();
        assert_eq!(q.tpr, 1.0);
        assert_eq!((q.n_clusters, q.n_labels, q.n_gt), (2, 1, 1));
        assert_eq!(q.fragmentation, Some(2.0));
        assert_eq!(q.pureness, 1.0);
    }

    #[test]
    fn perfect_and_all_noise() {
        let gt: GroundTruth = [("a", "E1"), ("b", "E1"), ("c", "E2"), ("d", "E2")].into_iter().collect();
        let q = clustering_indices(&clustering(&[&["a", "b"], &["c", "d"]], &[]), &gt).unwrap();
        assert_eq!((q.tpr, q.fragmentation, q.pureness), (1.0, Some(1.0), 1.0));

        let q = clustering_indices(&clustering(&[], &["a", "b", "c", "d"]), &gt).unwrap();
        assert_eq!(q.tpr, 0.0);
        assert_eq!(q.n_labels, 0);
        assert_eq!(q.fragmentation, None);
        assert_eq!(q.pureness, 0.0);
        assert_eq!(q.noise_count, 4);
    }

    #[test]
    fn noise_lowers_tpr() {
        let gt: GroundTruth = [("a", "E1"), ("b", "E1"), ("c", "E1"), ("d", "E1")].into_iter().collect();
        let q = clustering_indices(&clustering(&[&["a", "b", "c"]], &["d"]), &gt).unwrap();
        assert_eq!(q.tpr, 0.75);
    }

    #[test]
    fn calibration_origin_and_validation() {
        for seed in [0, 1, 99] {
            let r = cd_calibration(&CalibrationConfig::new(7, 0.0, 5, 0, seed)).unwrap();
            assert_eq!(r.mean_cd, 0.0);
        }
        assert!(cd_calibration(&CalibrationConfig::new(0, 0.1, 5, 0, 0)).is_err());
        assert!(cd_calibration(&CalibrationConfig::new(3, -1.0, 5, 0, 0)).is_err());
    }

    #[test]
    fn calibration_is_seeded() {
        let c = CalibrationConfig::new(5, 0.05, 10, 1, 42);
        assert_eq!(cd_calibration(&c).unwrap(), cd_calibration(&c).unwrap());
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [1, 2, 5, 10] {
            for _ in 0..200 {
                let p = sample_in_ball(&mut rng, dim, 0.3);
                assert_eq!(p.len(), dim);
                assert!(sqrt(p.iter().map(|x| x * x).sum()) <= 0.3 + 1e-12);
            }
        }
    }
}
