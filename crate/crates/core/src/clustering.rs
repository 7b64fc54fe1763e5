//! DBSCAN over cache feature vectors.
//!
//! A point is *core* when at least `min_pts` points (itself included) lie
//! within Euclidean distance `epsilon`. Core points within `epsilon` of each
//! other share a cluster; a non-core point within `epsilon` of some core point
//! is a *border* point of the cluster owning the lowest-indexed such core
//! point; everything else is noise. Clusters are numbered by their
//! lowest-indexed core point, so the output is a pure function of input order.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::features::FeatureVector;
use crate::math::squared_euclidean;
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.04;
pub const DEFAULT_MIN_PTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub epsilon: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { epsilon: DEFAULT_EPSILON, min_pts: DEFAULT_MIN_PTS }
    }
}

impl ClusterParams {
    pub fn new(epsilon: f64, min_pts: usize) -> Result<Self> {
        let p = ClusterParams { epsilon, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Core,
    Border,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Core => "core",
            Role::Border => "border",
        }
    }
}

/// Per-point outcome of [`dbscan_labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Member { cluster: usize, role: Role },
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Member { cluster, .. } => Some(cluster),
            Label::Noise => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub cache_id: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<Member>,
}

impl Cluster {
    pub fn cache_ids(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.cache_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Partition of a snapshot's caches into clusters and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub noise: Vec<String>,
    pub params: ClusterParams,
    pub snapshot: Option<usize>,
}

impl Clustering {
    pub fn point_count(&self) -> usize {
        self.noise.len() + self.clusters.iter().map(Cluster::len).sum::<usize>()
    }

    /// `(cache_id, cluster index or None for noise, role)` rows in cluster order.
    pub fn assignments(&self) -> impl Iterator<Item = (&str, Option<usize>, Option<Role>)> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(c, cl)| cl.members.iter().map(move |m| (m.cache_id.as_str(), Some(c), Some(m.role))))
            .chain(self.noise.iter().map(|n| (n.as_str(), None, None)))
    }
}

/// Indices of all points within `epsilon` of `points[index]`, itself included.
pub fn region_query<P: AsRef<[f64]>>(points: &[P], index: usize, epsilon: f64) -> Vec<usize> {
    let q = points[index].as_ref();
    let eps2 = epsilon * epsilon;
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| squared_euclidean(q, p.as_ref()) <= eps2)
        .map(|(i, _)| i)
        .collect()
}

/// Runs DBSCAN over raw coordinate vectors and returns one label per point.
pub fn dbscan_labels<P: AsRef<[f64]>>(points: &[P], params: ClusterParams) -> Result<Vec<Label>> {
    params.validate()?;
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let dim = first.as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.as_ref().len() });
    }

    let neighborhoods: Vec<Vec<usize>> =
        (0..points.len()).map(|i| region_query(points, i, params.epsilon)).collect();
    let is_core: Vec<bool> = neighborhoods.iter().map(|n| n.len() >= params.min_pts).collect();

    // Connected components of the core graph, seeded in index order.
    let mut component = vec![usize::MAX; points.len()];
    let mut clusters = 0;
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if !is_core[seed] || component[seed] != usize::MAX {
            continue;
        }
        component[seed] = clusters;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neighborhoods[p] {
                if is_core[q] && component[q] == usize::MAX {
                    component[q] = clusters;
                    queue.push_back(q);
                }
            }
        }
        clusters += 1;
    }

    Ok((0..points.len())
        .map(|i| {
            if is_core[i] {
                return Label::Member { cluster: component[i], role: Role::Core };
            }
            // Neighborhoods are ascending, so the first core hit is the lowest index.
            match neighborhoods[i].iter().find(|&&q| is_core[q]) {
                Some(&q) => Label::Member { cluster: component[q], role: Role::Border },
                None => Label::Noise,
            }
        })
        .collect())
}

/// Clusters feature vectors into edge-nodes.
pub fn dbscan(points: &[FeatureVector], params: ClusterParams) -> Result<Clustering> {
    let coords: Vec<&[f64]> = points.iter().map(|p| p.values.as_slice()).collect();
    let labels = dbscan_labels(&coords, params)?;
    let n_clusters = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);
    let mut clusters = vec![Cluster { members: Vec::new() }; n_clusters];
    let mut noise = Vec::new();
    for (p, label) in points.iter().zip(labels) {
        match label {
            Label::Member { cluster, role } => {
                clusters[cluster].members.push(Member { cache_id: p.cache_id.clone(), role })
            }
            Label::Noise => noise.push(p.cache_id.clone()),
        }
    }
    Ok(Clustering { clusters, noise, params, snapshot: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn fv(id: usize, values: Vec<f64>) -> FeatureVector {
        FeatureVector { cache_id: format!("c{id}"), values }
    }

    #[test]
    fn two_blobs() {
        let mut pts = Vec::new();
        for i in 0..10 {
            let jitter = i as f64 * 1e-4;
            pts.push(fv(i, vec![0.1 + jitter; 10]));
            pts.push(fv(100 + i, vec![0.9 - jitter; 10]));
        }
        let c = dbscan(&pts, ClusterParams::default()).unwrap();
        assert_eq!(c.clusters.len(), 2);
        assert!(c.noise.is_empty());
        assert!(c.clusters.iter().all(|cl| cl.len() == 10));
    }

    #[test]
    fn isolated_point_is_noise() {
        let c = dbscan(&[fv(0, vec![0.5; 4])], ClusterParams::new(0.1, 5).unwrap()).unwrap();
        assert!(c.clusters.is_empty());
        assert_eq!(c.noise, vec!["c0"]);
    }

    #[test]
    fn identical_points_form_one_core_cluster() {
        let pts: Vec<_> = (0..7).map(|i| fv(i, vec![0.3; 3])).collect();
        let c = dbscan(&pts, ClusterParams::default()).unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert!(c.clusters[0].members.iter().all(|m| m.role == Role::Core));
    }

    #[test]
    fn empty_input_and_errors() {
        let c = dbscan(&[], ClusterParams::default()).unwrap();
        assert_eq!(c.point_count(), 0);
        let bad = [fv(0, vec![0.0; 2]), fv(1, vec![0.0; 3])];
        assert_eq!(
            dbscan(&bad, ClusterParams::default()),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
        assert!(ClusterParams::new(0.0, 5).is_err());
        assert!(ClusterParams::new(0.1, 0).is_err());
    }

    #[test]
    fn border_tie_goes_to_lowest_core() {
        // Border point at x=1 sees one core of each cluster and nothing else.
        let xs = [2.0, 2.5, 2.5, 2.5, 1.0, 0.0, -0.5, -0.5, -0.5];
        let pts: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
        let labels = dbscan_labels(&pts, ClusterParams::new(1.0, 4).unwrap()).unwrap();
        assert_eq!(labels[0], Label::Member { cluster: 0, role: Role::Core });
        assert_eq!(labels[5], Label::Member { cluster: 1, role: Role::Core });
        assert_eq!(labels[4], Label::Member { cluster: 0, role: Role::Border });
    }

    #[test]
    fn region_query_extremes() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(region_query(&pts, 1, 0.0), vec![1]);
        assert_eq!(region_query(&pts, 1, 2.0), vec![0, 1, 2]);
    }
}
