//! Constellations of cluster centroids and the Constellation Distance.
//!
//! Each cluster becomes a *star*: the centroid of its members after both
//! snapshots have been rescaled with shared (joint) bounds. The Astral
//! Distance of a star is its distance to the nearest star of the other
//! constellation; the Constellation Distance sums Astral Distances in both
//! directions, so a moved, born or vanished star adds its own share and can be
//! singled out from the coupling lists.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::clustering::Clustering;
use crate::features::{CacheFeatures, Metric, NormalizationBounds};
use crate::math::{euclidean, sqrt};
use crate::{Error, Result};

/// Distance between two points of the feature space.
pub type DistanceFn = fn(&[f64], &[f64]) -> f64;

/// Euclidean distance; the default and the only one with linear behavior
/// under small star displacements.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    euclidean(a, b)
}

/// Merges two snapshots' bounds: smallest minimum and largest maximum per metric.
pub fn joint_bounds(a: &NormalizationBounds, b: &NormalizationBounds) -> NormalizationBounds {
    NormalizationBounds { metrics: [0, 1].map(|i| a.metrics[i].union(&b.metrics[i])) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Star {
    /// Centroid in the jointly rescaled space.
    pub position: Vec<f64>,
    /// Centroid in raw metric units.
    pub raw_centroid: Vec<f64>,
    pub members: Vec<String>,
    /// Index of the source cluster in its clustering.
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub stars: Vec<Star>,
    pub snapshot: Option<usize>,
    pub bounds: NormalizationBounds,
    /// Values per metric; positions have `2 * k` components.
    pub k: usize,
}

impl Constellation {
    pub fn dim(&self) -> usize {
        2 * self.k
    }

    /// Astral Distance of an empty constellation: the diagonal of the unit
    /// hypercube.
    pub fn sentinel(&self) -> f64 {
        sqrt(self.dim() as f64)
    }

    pub fn positions(&self) -> Vec<&[f64]> {
        self.stars.iter().map(|s| s.position.as_slice()).collect()
    }
}

/// Raw-space centroid of each cluster, computed once per snapshot.
pub fn raw_centroids(clustering: &Clustering, raw: &[CacheFeatures]) -> Result<Vec<Vec<f64>>> {
    let by_id: BTreeMap<&str, &CacheFeatures> = raw.iter().map(|f| (f.cache_id.as_str(), f)).collect();
    let mut out = Vec::with_capacity(clustering.clusters.len());
    for cluster in &clustering.clusters {
        let mut sum: Vec<f64> = Vec::new();
        for id in cluster.cache_ids() {
            let f = by_id.get(id).ok_or_else(|| Error::MissingFeatures(id.into()))?;
            let v = f.concatenated();
            if sum.is_empty() {
                sum = alloc::vec![0.0; v.len()];
            } else if v.len() != sum.len() {
                return Err(Error::DimensionMismatch { expected: sum.len(), found: v.len() });
            }
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += x;
            }
        }
        let n = cluster.len() as f64;
        out.push(sum.into_iter().map(|s| s / n).collect());
    }
    Ok(out)
}

/// One star per cluster; noise caches are ignored.
///
/// The raw centroid is averaged first and then rescaled: the rescaling is
/// affine per metric, so this equals the mean of the rescaled members.
pub fn build_constellation(
    clustering: &Clustering,
    raw: &[CacheFeatures],
    bounds: &NormalizationBounds,
) -> Result<Constellation> {
    let k = raw.first().map_or(0, |f| f.metric(Metric::Rtt).len());
    let centroids = raw_centroids(clustering, raw)?;
    let stars = clustering
        .clusters
        .iter()
        .zip(centroids)
        .enumerate()
        .map(|(i, (cluster, raw_centroid))| Star {
            position: bounds.scale_vector(&raw_centroid, k),
            raw_centroid,
            members: cluster.cache_ids().map(String::from).collect(),
            cluster: i,
        })
        .collect();
    Ok(Constellation { stars, snapshot: clustering.snapshot, bounds: *bounds, k })
}

/// Nearest-star coupling of one star.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub star: usize,
    /// `None` when the other constellation has no stars.
    pub nearest: Option<usize>,
    pub distance: f64,
}

/// Minimum distance from `point` to any of `stars`, lowest index on ties.
pub fn nearest_star<P: AsRef<[f64]>>(point: &[f64], stars: &[P], distance: DistanceFn) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in stars.iter().enumerate() {
        let d = distance(point, s.as_ref());
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

/// Astral Distance of `star` from `constellation`, with the index of the
/// nearest star (`None` for an empty constellation).
pub fn astral_distance(star: &[f64], constellation: &Constellation) -> Result<(f64, Option<usize>)> {
    if star.len() != constellation.dim() {
        return Err(Error::DimensionMismatch { expected: constellation.dim(), found: star.len() });
    }
    let positions = constellation.positions();
    Ok(match nearest_star(star, &positions, euclidean_distance) {
        Some((i, d)) => (d, Some(i)),
        None => (constellation.sentinel(), None),
    })
}

/// Which constellation of the compared pair a star belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    /// The earlier snapshot.
    A,
    /// The later snapshot.
    B,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::A => "a",
            Side::B => "b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contributor {
    pub side: Side,
    pub star: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdReport {
    pub cd: f64,
    /// One entry per star of A, coupled to B.
    pub couplings_ab: Vec<Coupling>,
    /// One entry per star of B, coupled to A.
    pub couplings_ba: Vec<Coupling>,
    /// All stars by Astral Distance, largest first.
    pub contributors: Vec<Contributor>,
}

fn couple<P: AsRef<[f64]>>(from: &[P], to: &[P], sentinel: f64, distance: DistanceFn) -> Vec<Coupling> {
    from.iter()
        .enumerate()
        .map(|(i, p)| match nearest_star(p.as_ref(), to, distance) {
            Some((j, d)) => Coupling { star: i, nearest: Some(j), distance: d },
            None => Coupling { star: i, nearest: None, distance: sentinel },
        })
        .collect()
}

/// Constellation Distance between two plain point sets.
///
/// `sentinel` is the Astral Distance charged to a star when the other side is
/// empty.
pub fn point_set_distance<P: AsRef<[f64]>>(a: &[P], b: &[P], sentinel: f64, distance: DistanceFn) -> CdReport {
    let couplings_ab = couple(a, b, sentinel, distance);
    let couplings_ba = couple(b, a, sentinel, distance);
    let mut contributors: Vec<Contributor> = couplings_ab
        .iter()
        .map(|c| Contributor { side: Side::A, star: c.star, distance: c.distance })
        .chain(couplings_ba.iter().map(|c| Contributor { side: Side::B, star: c.star, distance: c.distance }))
        .collect();
    // Stable sort keeps A before B and lower star indices first on ties.
    contributors.sort_by(|x, y| y.distance.total_cmp(&x.distance));
    // Summing each side on its own makes CD(a, b) and CD(b, a) bit-identical.
    let side_sum = |cs: &[Coupling]| cs.iter().map(|c| c.distance).sum::<f64>();
    let cd = side_sum(&couplings_ab) + side_sum(&couplings_ba);
    CdReport { cd, couplings_ab, couplings_ba, contributors }
}

/// Constellation Distance with Euclidean Astral Distances.
pub fn constellation_distance(a: &Constellation, b: &Constellation) -> Result<CdReport> {
    constellation_distance_with(a, b, euclidean_distance)
}

/// Constellation Distance with a caller-supplied point distance.
pub fn constellation_distance_with(a: &Constellation, b: &Constellation, distance: DistanceFn) -> Result<CdReport> {
    if a.bounds != b.bounds {
        return Err(Error::BoundsMismatch);
    }
    if a.k != b.k {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(point_set_distance(&a.positions(), &b.positions(), a.sentinel(), distance))
}
