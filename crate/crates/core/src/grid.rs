//! Uniform spatial grid index for nearest-neighbor distances on point clouds.
//!
//! Certification needs exact minimum distances (cloud-to-cloud and pairwise
//! within a cloud) on up to ~10⁵ points in ℝ^{2n}; a hash grid with expanding
//! shell search keeps that in the seconds range. Falls back to brute force
//! when a shell enumeration would be larger than scanning all points.

use std::collections::HashMap;

use crate::geom::{dist, Point};

pub struct GridIndex {
    cell: f64,
    dim: usize,
    cells: HashMap<Vec<i64>, Vec<u32>>,
    points: Vec<Point>,
}

fn key_of(x: &[f64], cell: f64) -> Vec<i64> {
    x.iter().map(|v| (v / cell).floor() as i64).collect()
}

impl GridIndex {
    /// Builds an index with a cell size adapted to the cloud density.
    pub fn build(points: &[Point]) -> Self {
        assert!(!points.is_empty(), "cannot index an empty cloud");
        let dim = points[0].len();
        let bbox = crate::geom::BoxN::from_points(dim, points.iter()).unwrap();
        let extent = bbox.diameter().max(1e-300);
        // aim for O(1) points per cell
        let cell = (extent / (points.len() as f64).powf(1.0 / dim as f64)).max(extent * 1e-9);
        Self::build_with_cell(points, cell)
    }

    pub fn build_with_cell(points: &[Point], cell: f64) -> Self {
        let dim = points[0].len();
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key_of(p, cell)).or_default().push(i as u32);
        }
        GridIndex {
            cell,
            dim,
            cells,
            points: points.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn brute_nearest(&self, x: &[f64], skip: Option<u32>) -> (f64, u32) {
        let mut best = f64::INFINITY;
        let mut arg = u32::MAX;
        for (i, p) in self.points.iter().enumerate() {
            if Some(i as u32) == skip {
                continue;
            }
            let d = dist(x, p);
            if d < best {
                best = d;
                arg = i as u32;
            }
        }
        (best, arg)
    }

    /// Distance from `x` to the nearest indexed point (optionally skipping one
    /// index, for within-cloud queries). Exact.
    pub fn nearest(&self, x: &[f64], skip: Option<u32>) -> (f64, u32) {
        let base = key_of(x, self.cell);
        let mut best = f64::INFINITY;
        let mut arg = u32::MAX;
        let mut r: i64 = 0;
        loop {
            // give up on shell enumeration when it outgrows a linear scan
            let shell_cells = ((2 * r + 1) as f64).powi(self.dim as i32);
            if shell_cells > (2 * self.points.len()) as f64 + 64.0 {
                return self.brute_nearest(x, skip);
            }
            self.visit_shell(&base, r, |key| {
                if let Some(idxs) = self.cells.get(key) {
                    for &i in idxs {
                        if Some(i) == skip {
                            continue;
                        }
                        let d = dist(x, &self.points[i as usize]);
                        if d < best {
                            best = d;
                            arg = i;
                        }
                    }
                }
            });
            // points in shells > r are at distance ≥ r·cell from x
            if best <= r as f64 * self.cell || r as f64 * self.cell > 1e12 {
                return (best, arg);
            }
            r += 1;
        }
    }

    fn visit_shell<F: FnMut(&Vec<i64>)>(&self, base: &[i64], r: i64, mut f: F) {
        let dim = self.dim;
        let mut offset = vec![-r; dim];
        if r == 0 {
            f(&base.to_vec());
            return;
        }
        loop {
            if offset.iter().any(|o| o.abs() == r) {
                let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
                f(&key);
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == dim {
                    return;
                }
                offset[i] += 1;
                if offset[i] <= r {
                    break;
                }
                offset[i] = -r;
                i += 1;
            }
        }
    }

    /// Exact minimum distance from any point of `cloud` to the indexed cloud.
    /// Returns (distance, cloud index, indexed index).
    pub fn min_dist_from(&self, cloud: &[Point]) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (i, p) in cloud.iter().enumerate() {
            let (d, j) = self.nearest(p, None);
            if d < best.0 {
                best = (d, i, j as usize);
            }
        }
        best
    }
}

/// Exact minimum pairwise distance within a cloud; returns (dist, i, j).
pub fn min_pairwise_distance(points: &[Point]) -> (f64, usize, usize) {
    assert!(points.len() >= 2);
    let idx = GridIndex::build(points);
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (i, p) in points.iter().enumerate() {
        let (d, j) = idx.nearest(p, Some(i as u32));
        if d < best.0 {
            best = (d, i, j as usize);
        }
    }
    best
}

/// Greedy thinning: keeps points pairwise at least `min_sep` apart
/// (first-come order, deterministic).
pub fn thin_cloud(points: &[Point], min_sep: f64) -> Vec<Point> {
    let mut kept: Vec<Point> = Vec::new();
    let cell = min_sep.max(1e-300);
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    'outer: for p in points {
        let base = key_of(p, cell);
        // min_sep-neighbors can only live in adjacent cells
        let dim = p.len();
        let mut offset = vec![-1i64; dim];
        loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(idxs) = cells.get(&key) {
                for &i in idxs {
                    if dist(p, &kept[i]) < min_sep {
                        continue 'outer;
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == dim {
                    let id = kept.len();
                    kept.push(p.clone());
                    cells.entry(base).or_default().push(id);
                    continue 'outer;
                }
                offset[i] += 1;
                if offset[i] <= 1 {
                    break;
                }
                offset[i] = -1;
                i += 1;
            }
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize) -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(vec![i as f64, j as f64]);
            }
        }
        pts
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = lattice(13);
        let idx = GridIndex::build(&pts);
        let queries = [
            vec![3.4, 7.9],
            vec![-2.0, -2.0],
            vec![20.0, 5.5],
            vec![6.0, 6.0],
        ];
        for q in &queries {
            let (d, _) = idx.nearest(q, None);
            let brute = pts
                .iter()
                .map(|p| dist(q, p))
                .fold(f64::INFINITY, f64::min);
            assert!((d - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn min_pairwise_on_lattice_is_one() {
        let (d, _, _) = min_pairwise_distance(&lattice(9));
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thinning_enforces_separation() {
        let mut pts = lattice(6);
        pts.extend(lattice(6)); // duplicates
        let thinned = thin_cloud(&pts, 0.5);
        assert_eq!(thinned.len(), 36);
        let (d, _, _) = min_pairwise_distance(&thinned);
        assert!(d >= 0.5);
    }
}
