//! Transport rays: end points, branching sets, the non-branched transport
//! set and its partition into chains ordered by the potential.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{ones, BitMatrix};
use crate::mmspace::MMSpace;
use crate::w1solve::{GammaSet, W1Solution};

/// Sets derived from a saturation set `gamma`.
#[derive(Debug, Clone)]
pub struct TransportStructure {
    pub gamma: GammaSet,
    /// `gamma` union its transpose.
    pub r: BitMatrix,
    /// Points of `T_e` without a strict predecessor.
    pub initial_points: Vec<usize>,
    /// Points of `T_e` without a strict successor.
    pub final_points: Vec<usize>,
    pub transport_set_e: Vec<usize>,
    pub branching_fwd: Vec<usize>,
    pub branching_bwd: Vec<usize>,
    pub transport_set: Vec<usize>,
}

fn has_strict(row: &[u64], x: usize) -> bool {
    ones(row).any(|y| y != x)
}

/// True when some `z, w` in the set `row` satisfy `(z, w) not in r`.
fn not_clique(row: &[u64], r: &BitMatrix) -> bool {
    ones(row).any(|z| row.iter().zip(r.row(z)).any(|(s, rz)| s & !rz != 0))
}

/// Builds end points, `T_e`, the branching sets `A+`, `A-` and
/// `T = T_e \ (A+ u A-)` from a saturation set.
pub fn build_transport_structure(gamma: GammaSet) -> TransportStructure {
    let n = gamma.len();
    let g = gamma.bits();
    let gt = g.transpose();
    let r = g.union(&gt);
    let flags: Vec<(bool, bool, bool, bool)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let succ = has_strict(g.row(x), x);
            let pred = has_strict(gt.row(x), x);
            let fwd = succ && not_clique(g.row(x), &r);
            let bwd = pred && not_clique(gt.row(x), &r);
            (succ, pred, fwd, bwd)
        })
        .collect();
    let pick = |f: &dyn Fn(&(bool, bool, bool, bool)) -> bool| -> Vec<usize> {
        (0..n).filter(|&x| f(&flags[x])).collect()
    };
    TransportStructure {
        initial_points: pick(&|&(s, p, _, _)| s && !p),
        final_points: pick(&|&(s, p, _, _)| p && !s),
        transport_set_e: pick(&|&(s, p, _, _)| s || p),
        branching_fwd: pick(&|f| f.2),
        branching_bwd: pick(&|f| f.3),
        transport_set: pick(&|&(s, p, a, b)| (s || p) && !a && !b),
        gamma,
        r,
    }
}

impl TransportStructure {
    pub fn in_transport_set(&self) -> Vec<bool> {
        let mut v = vec![false; self.gamma.len()];
        for &x in &self.transport_set {
            v[x] = true;
        }
        v
    }

    /// `m(A+ u A-) / m(T_e)`, zero when `T_e` is empty.
    pub fn branching_mass_fraction(&self, space: &MMSpace) -> f64 {
        let w = space.weights();
        let te: f64 = self.transport_set_e.iter().map(|&x| w[x]).sum();
        if te == 0.0 {
            return 0.0;
        }
        let mut branched = vec![false; w.len()];
        for &x in self.branching_fwd.iter().chain(&self.branching_bwd) {
            branched[x] = true;
        }
        let b = (0..w.len()).filter(|&x| branched[x]).map(|x| w[x]).fold(0.0, |a, v| a + v);
        b / te
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub id: usize,
    /// Points in order of decreasing potential.
    pub points: Vec<usize>,
    /// Arclength parameter, zero at the representative, increasing along
    /// the direction of transport.
    pub params: Vec<f64>,
    pub representative: usize,
    /// Reference mass carried by the ray.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayDecomposition {
    pub rays: Vec<Ray>,
    /// Points of `T` in no ray.
    pub orphans: Vec<usize>,
    /// Number of components of `R` on `T` that failed the chain test.
    pub non_chain_components: usize,
    /// Ray index of each point, if any.
    pub ray_of: Vec<Option<usize>>,
}

impl RayDecomposition {
    /// Parameter of a point on a ray.
    pub fn param(&self, x: usize) -> Option<f64> {
        let r = self.ray_of[x]?;
        let ray = &self.rays[r];
        ray.points.iter().position(|&p| p == x).map(|i| ray.params[i])
    }
}

/// Index of the point whose potential is closest to the median potential.
fn median_representative(points: &[usize], phi: &[f64]) -> usize {
    let mut vals: Vec<f64> = points.iter().map(|&p| phi[p]).collect();
    vals.sort_by(f64::total_cmp);
    let k = vals.len();
    let median = if k % 2 == 1 { vals[k / 2] } else { 0.5 * (vals[k / 2 - 1] + vals[k / 2]) };
    let mut best = 0;
    for (i, &p) in points.iter().enumerate() {
        if (phi[p] - median).abs() < (phi[points[best]] - median).abs() {
            best = i;
        }
    }
    best
}

/// Splits `T` into rays: connected components of `R` restricted to `T`
/// that are totally ordered by the potential. Components failing the order
/// test, and single points, become orphans.
pub fn partition_rays(space: &MMSpace, structure: &TransportStructure, solution: &W1Solution) -> RayDecomposition {
    let phi = &solution.potential;
    debug_assert_eq!(phi, &structure.gamma.potential);
    let n = space.len();
    let in_t = structure.in_transport_set();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &x in &structure.transport_set {
        for y in structure.r.row_ones(x) {
            if y > x && in_t[y] {
                let (a, b) = (find(&mut parent, x), find(&mut parent, y));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for &x in &structure.transport_set {
        let root = find(&mut parent, x);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(x);
    }

    let gamma = &structure.gamma;
    let checked: Vec<(Vec<usize>, bool)> = groups
        .into_par_iter()
        .map(|mut g| {
            g.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
            let chain = g.len() >= 2
                && (0..g.len()).all(|i| ((i + 1)..g.len()).all(|j| gamma.contains(g[i], g[j])));
            (g, chain)
        })
        .collect();

    let weights = space.weights();
    let mut rays = Vec::new();
    let mut orphans = Vec::new();
    let mut non_chain_components = 0;
    let mut ray_of = vec![None; n];
    for (points, chain) in checked {
        match chain {
            true => {
                let rep = median_representative(&points, phi);
                let rep_phi = phi[points[rep]];
                let id = rays.len();
                for &p in &points {
                    ray_of[p] = Some(id);
                }
                rays.push(Ray {
                    id,
                    params: points.iter().map(|&p| rep_phi - phi[p]).collect(),
                    representative: points[rep],
                    mass: points.iter().map(|&p| weights[p]).sum(),
                    points,
                });
            }
            false => {
                if points.len() >= 2 {
                    non_chain_components += 1;
                }
                orphans.extend(points);
            }
        }
    }
    orphans.sort_unstable();
    RayDecomposition { rays, orphans, non_chain_components, ray_of }
}

/// Quotient assignment: per ray, the representative and the ray mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quotient {
    pub representatives: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Representatives (median-potential points) and quotient weights.
pub fn select_quotient(decomposition: &RayDecomposition) -> Quotient {
    Quotient {
        representatives: decomposition.rays.iter().map(|r| r.representative).collect(),
        weights: decomposition.rays.iter().map(|r| r.mass).collect(),
    }
}

/// Largest `| |t(u) - t(v)| - d(u, v) |` over pairs on a common ray.
pub fn ray_isometry_defect(space: &MMSpace, decomposition: &RayDecomposition) -> f64 {
    decomposition
        .rays
        .par_iter()
        .map(|ray| {
            let k = ray.points.len();
            let mut worst = 0.0f64;
            for i in 0..k {
                for j in (i + 1)..k {
                    let dt = (ray.params[i] - ray.params[j]).abs();
                    worst = worst.max((dt - space.dist(ray.points[i], ray.points[j])).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}
