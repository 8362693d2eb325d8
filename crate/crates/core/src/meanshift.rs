//! Flat-kernel Mean-Shift over fixed-dimension points in the unit hypercube.

use thiserror::Error;

use crate::scene::MobileId;

/// Neighborhood radius used when no override is given: trajectories closer
/// than 10% of the normalized range are grouped.
pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const CONVERGENCE_EPS: f64 = 1e-4;
pub const MAX_ITER: usize = 100;

pub fn tolerance_default() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanShiftError {
    #[error("mean-shift needs at least one point")]
    Empty,
    #[error("point of owner {owner} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        owner: MobileId,
        expected: usize,
        found: usize,
    },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint {
    pub coords: Vec<f64>,
    pub owner: MobileId,
}

impl FeaturePoint {
    pub fn new(owner: MobileId, coords: Vec<f64>) -> Self {
        Self { coords, owner }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub mode: Vec<f64>,
    /// Sorted, unique owner ids.
    pub members: Vec<MobileId>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Clusters `points` without a preset cluster count.
///
/// Every point is shifted to the mean of the input points within `tolerance`
/// until the shift drops below [`CONVERGENCE_EPS`] or [`MAX_ITER`] is hit.
/// Converged modes closer than `tolerance / 2` (transitively) form one cluster.
/// Input is sorted by owner before iterating so the result does not depend on
/// input order.
pub fn mean_shift(points: &[FeaturePoint], tolerance: f64) -> Result<Vec<Cluster>, MeanShiftError> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(MeanShiftError::BadTolerance(tolerance));
    }
    let first = points.first().ok_or(MeanShiftError::Empty)?;
    let dim = first.dim();
    if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
        return Err(MeanShiftError::DimensionMismatch {
            owner: bad.owner,
            expected: dim,
            found: bad.dim(),
        });
    }

    let mut sorted: Vec<&FeaturePoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.owner.cmp(&b.owner).then_with(|| {
            a.coords
                .iter()
                .zip(&b.coords)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let tol_sq = tolerance * tolerance;
    let eps_sq = CONVERGENCE_EPS * CONVERGENCE_EPS;
    let modes: Vec<Vec<f64>> = sorted
        .iter()
        .map(|start| {
            let mut current = start.coords.clone();
            for _ in 0..MAX_ITER {
                let mut sum = vec![0.0; dim];
                let mut count = 0usize;
                for p in &sorted {
                    if sq_dist(&current, &p.coords) <= tol_sq {
                        for (s, c) in sum.iter_mut().zip(&p.coords) {
                            *s += c;
                        }
                        count += 1;
                    }
                }
                if count == 0 {
                    break;
                }
                let next: Vec<f64> = sum.into_iter().map(|s| s / count as f64).collect();
                let shift = sq_dist(&current, &next);
                current = next;
                if shift < eps_sq {
                    break;
                }
            }
            current
        })
        .collect();

    // union-find over modes closer than tolerance / 2
    let n = modes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let merge_sq = (tolerance / 2.0) * (tolerance / 2.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if sq_dist(&modes[i], &modes[j]) < merge_sq {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match clusters.iter_mut().find(|(r, _)| *r == root) {
            Some((_, idx)) => idx.push(i),
            None => clusters.push((root, vec![i])),
        }
    }

    let out = clusters
        .into_iter()
        .map(|(_, idx)| {
            let mut mode = vec![0.0; dim];
            for &i in &idx {
                for (m, c) in mode.iter_mut().zip(&modes[i]) {
                    *m += c;
                }
            }
            for m in &mut mode {
                *m /= idx.len() as f64;
            }
            let mut members: Vec<MobileId> = idx.iter().map(|&i| sorted[i].owner).collect();
            members.dedup();
            Cluster { mode, members }
        })
        .collect();
    Ok(out)
}
