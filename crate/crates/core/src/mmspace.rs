//! Finite metric measure spaces and the synthetic model spaces built on them.
//!
//! An [`MMSpace`] is a dense distance matrix, a probability vector and a
//! geodesy description used to produce chains of points along shortest
//! paths. Spaces are immutable once built.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the metric axioms.
pub const METRIC_REL_TOL: f64 = 1e-12;
/// Tolerance on the total mass of the weight vector.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Above this size only `RANDOM_TRIPLES` triples are checked.
pub const EXHAUSTIVE_TRIPLE_LIMIT: usize = 300;
pub const RANDOM_TRIPLES: usize = 1_000_000;

/// A density sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl Density1D {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::BadDensity(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::BadDensity("need at least two grid points".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::BadDensity("grid must be finite and strictly increasing".into()));
        }
        if values.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::BadDensity("values must be finite and nonnegative".into()));
        }
        let density = Density1D { grid, values };
        let mass = density.integral();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::BadDensity(format!("integral {mass} is not positive")));
        }
        Ok(density)
    }

    /// Samples `f` on a uniform grid of `n` points over `[a, b]`.
    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(Error::BadDensity(format!("bad grid [{a}, {b}] with {n} points")));
        }
        let grid = uniform_grid(a, b, n);
        let values = grid.iter().map(|&t| f(t)).collect();
        Density1D::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Largest grid spacing.
    pub fn mesh(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Trapezoid integral of the density.
    pub fn integral(&self) -> f64 {
        trapezoid_masses(&self.grid, &self.values).iter().sum()
    }

    /// Linear interpolation of the density; zero outside the domain.
    pub fn eval(&self, t: f64) -> f64 {
        interpolate(&self.grid, &self.values, t)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Density1D::new(self.grid.clone(), self.values.iter().map(|h| h * c).collect())
    }
}

pub(crate) fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + step * i as f64 })
        .collect()
}

/// Per-node trapezoid masses `h_i (t_{i+1} - t_{i-1}) / 2`.
pub(crate) fn trapezoid_masses(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            values[i] * 0.5 * (left + right)
        })
        .collect()
}

/// Piecewise-linear interpolation on a sorted grid, zero outside.
pub(crate) fn interpolate(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let n = grid.len();
    if t < grid[0] || t > grid[n - 1] || t.is_nan() {
        return 0.0;
    }
    let j = grid.partition_point(|&g| g <= t);
    if j == 0 {
        return values[0];
    }
    if j >= n {
        return values[n - 1];
    }
    let (t0, t1) = (grid[j - 1], grid[j]);
    let s = (t - t0) / (t1 - t0);
    values[j - 1] * (1.0 - s) + values[j] * s
}

/// How shortest chains between two points are produced.
#[derive(Debug, Clone)]
enum Geodesy {
    /// Chains are built from the "between" relation of the matrix.
    Matrix,
    /// Points on a line with the given coordinates.
    Line(Vec<f64>),
    /// Shortest-path predecessor matrix (`pred[src * n + v]`).
    Graph(Vec<u32>),
    /// Unit vectors on the round two-sphere.
    Sphere(Vec<[f64; 3]>),
}

/// A finite metric measure space `(X, d, m)` with `m(X) = 1`.
#[derive(Debug, Clone)]
pub struct MMSpace {
    ids: Vec<String>,
    dist: Vec<f64>,
    weights: Vec<f64>,
    geodesy: Geodesy,
    max_dist: f64,
}

/// Metric part of a space description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MetricSpec {
    Matrix {
        data: Vec<Vec<f64>>,
    },
    Graph {
        edges: Vec<(usize, usize, f64)>,
    },
    Interval {
        #[serde(rename = "K")]
        k: f64,
        #[serde(rename = "N")]
        n_dim: f64,
        #[serde(rename = "D")]
        d: f64,
        n: usize,
    },
    Sphere2 {
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

/// The space-spec JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(default)]
    pub points: Vec<String>,
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl SpaceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("space spec: {e}")))
    }

    /// Builds the space. Interval specs also return their model density.
    pub fn build(&self) -> Result<(MMSpace, Option<Density1D>)> {
        match &self.metric {
            MetricSpec::Interval { k, n_dim, d, n } => {
                let (mut space, density) = generate_interval_model(*k, *n_dim, *d, *n)?;
                space.apply_overrides(&self.points, self.weights.as_deref())?;
                Ok((space, Some(density)))
            }
            MetricSpec::Sphere2 { n, seed } => {
                let mut space = generate_sphere_sample(2, *n, *seed)?;
                space.apply_overrides(&self.points, self.weights.as_deref())?;
                Ok((space, None))
            }
            metric => {
                let space = build_space(&self.points, metric, self.weights.as_deref())?;
                Ok((space, None))
            }
        }
    }
}

/// Builds and validates a space from explicit points and a metric spec.
/// An empty `points` slice yields ids `"0".."n-1"`; missing weights are
/// uniform. Weights are normalized to unit mass.
pub fn build_space(points: &[String], metric: &MetricSpec, weights: Option<&[f64]>) -> Result<MMSpace> {
    let (n, dist, geodesy) = match metric {
        MetricSpec::Matrix { data } => {
            let n = data.len();
            if n == 0 {
                return Err(Error::EmptySpace);
            }
            let mut dist = Vec::with_capacity(n * n);
            for (i, row) in data.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "matrix row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                dist.extend_from_slice(row);
            }
            (n, dist, Geodesy::Matrix)
        }
        MetricSpec::Graph { edges } => {
            let n = if points.is_empty() {
                edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0)
            } else {
                points.len()
            };
            if n == 0 {
                return Err(Error::EmptySpace);
            }
            let (dist, pred) = graph_metric(n, edges)?;
            (n, dist, Geodesy::Graph(pred))
        }
        MetricSpec::Interval { .. } | MetricSpec::Sphere2 { .. } => {
            return Err(Error::InvalidInput(
                "generated metrics are built through SpaceSpec::build".into(),
            ))
        }
    };
    let ids = make_ids(points, n)?;
    let weights = normalize_weights(weights, n)?;
    MMSpace::from_parts(ids, dist, weights, geodesy)
}

fn make_ids(points: &[String], n: usize) -> Result<Vec<String>> {
    if points.is_empty() {
        return Ok((0..n).map(|i| i.to_string()).collect());
    }
    if points.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} point ids for a metric on {n} points",
            points.len()
        )));
    }
    Ok(points.to_vec())
}

fn normalize_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    let Some(w) = weights else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    if w.len() != n {
        return Err(Error::BadWeights(format!("{} weights for {n} points", w.len())));
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::BadWeights("weights must be finite and nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::BadWeights("weights sum to zero".into()));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// All-pairs Dijkstra. Returns the dense distance matrix and the
/// predecessor matrix used to reconstruct shortest paths.
fn graph_metric(n: usize, edges: &[(usize, usize, f64)]) -> Result<(Vec<f64>, Vec<u32>)> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, w) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidInput(format!("edge ({i}, {j}) out of range for {n} points")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::MetricViolation(format!("edge ({i}, {j}) has weight {w}")));
        }
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    let mut dist = vec![f64::INFINITY; n * n];
    let mut pred = vec![u32::MAX; n * n];
    let mut heap = BinaryHeap::new();
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        let prow = &mut pred[src * n..(src + 1) * n];
        row[src] = 0.0;
        prow[src] = src as u32;
        heap.push(HeapItem(0.0, src));
        while let Some(HeapItem(du, u)) = heap.pop() {
            if du > row[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let cand = du + w;
                if cand < row[v] {
                    row[v] = cand;
                    prow[v] = u as u32;
                    heap.push(HeapItem(cand, v));
                }
            }
        }
        if let Some(v) = row.iter().position(|d| d.is_infinite()) {
            return Err(Error::DisconnectedGraph(v));
        }
    }
    // Dijkstra from both ends can disagree in the last bit; symmetrize.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[i * n + j].min(dist[j * n + i]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok((dist, pred))
}

/// Generates the one-dimensional model space of curvature `k` and
/// dimension `n_dim` on `[0, diameter]`, sampled at `n` uniform points.
///
/// The density solves `(h^{1/(N-1)})'' + K/(N-1) h^{1/(N-1)} = 0`: a sine
/// power for `K > 0`, a hyperbolic sine power for `K < 0`, and the constant
/// for `K = 0` or `N = 1`. Point weights are the normalized trapezoid
/// masses of the density.
pub fn generate_interval_model(k: f64, n_dim: f64, diameter: f64, n: usize) -> Result<(MMSpace, Density1D)> {
    if !(n_dim >= 1.0) {
        return Err(Error::BadDimension(n_dim));
    }
    if n < 16 {
        return Err(Error::InvalidInput(format!("interval model needs n >= 16, got {n}")));
    }
    if !(diameter > 0.0 && diameter.is_finite()) {
        return Err(Error::InvalidInput(format!("diameter must be positive, got {diameter}")));
    }
    if k > 0.0 {
        let bound = PI * ((n_dim - 1.0) / k).sqrt();
        if diameter > bound * (1.0 + 1e-12) {
            return Err(Error::BadDiameter { diameter, bound });
        }
    }
    let grid = uniform_grid(0.0, diameter, n);
    let values: Vec<f64> = grid.iter().map(|&t| model_density(k, n_dim, t)).collect();
    let density = Density1D::new(grid.clone(), values)?;
    let masses = trapezoid_masses(density.grid(), density.values());
    let weights = normalize_weights(Some(&masses), n)?;
    let space = MMSpace::line(grid, weights)?;
    Ok((space, density))
}

/// Unnormalized model density at `t`.
pub fn model_density(k: f64, n_dim: f64, t: f64) -> f64 {
    if n_dim == 1.0 || k == 0.0 {
        return 1.0;
    }
    let kappa = (k.abs() / (n_dim - 1.0)).sqrt();
    let base = if k > 0.0 { (kappa * t).sin() } else { (kappa * t).sinh() };
    base.max(0.0).powf(n_dim - 1.0)
}

/// Quasi-uniform sample of the unit round sphere `S^2` (Ricci = 1): a
/// Fibonacci lattice with a small seeded tangential jitter, great-circle
/// distances and uniform weights.
pub fn generate_sphere_sample(dim: usize, n: usize, seed: u64) -> Result<MMSpace> {
    if dim != 2 {
        return Err(Error::Unsupported(format!("sphere dimension {dim} (only 2 is supported)")));
    }
    if n < 100 {
        return Err(Error::InvalidInput(format!("sphere sample needs n >= 100, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = PI * (3.0 - 5f64.sqrt());
    // Jitter amplitude is a tenth of the typical spacing.
    let jitter = 0.1 * (4.0 * PI / n as f64).sqrt();
    let points: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * i as f64;
            let p = [r * theta.cos(), r * theta.sin(), z];
            let (e1, e2) = tangent_frame(p);
            let a = jitter * rng.gen_range(-1.0..1.0);
            let b = jitter * rng.gen_range(-1.0..1.0);
            normalize3([
                p[0] + a * e1[0] + b * e2[0],
                p[1] + a * e1[1] + b * e2[1],
                p[2] + a * e1[2] + b * e2[2],
            ])
        })
        .collect();
    MMSpace::sphere(points)
}

fn tangent_frame(p: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if p[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = normalize3(cross(helper, p));
    let e2 = cross(p, e1);
    (e1, e2)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let r = dot(a, a).sqrt();
    [a[0] / r, a[1] / r, a[2] / r]
}

/// Great-circle distance, accurate for nearby and antipodal points.
pub fn great_circle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = cross(a, b);
    dot(c, c).sqrt().atan2(dot(a, b))
}

impl MMSpace {
    fn from_parts(ids: Vec<String>, dist: Vec<f64>, weights: Vec<f64>, geodesy: Geodesy) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        let max_dist = dist.iter().cloned().fold(0.0, f64::max);
        let space = MMSpace { ids, dist, weights, geodesy, max_dist };
        space.validate_metric(0x5eed)?;
        let total: f64 = space.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::BadWeights(format!("weights sum to {total}")));
        }
        Ok(space)
    }

    /// Points on a line at the given sorted coordinates.
    pub fn line(coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = (coords[i] - coords[j]).abs();
            }
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        let weights = normalize_weights(Some(&weights), n)?;
        MMSpace::from_parts(ids, dist, weights, Geodesy::Line(coords))
    }

    /// Points of the unit two-sphere with uniform weights.
    pub fn sphere(points: Vec<[f64; 3]>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = great_circle(points[i], points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        MMSpace::from_parts(ids, dist, vec![1.0 / n as f64; n], Geodesy::Sphere(points))
    }

    /// Points of the plane with the Euclidean metric.
    pub fn planar(points: &[[f64; 2]], weights: Option<&[f64]>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = (points[i][0] - points[j][0], points[i][1] - points[j][1]);
                dist[i * n + j] = dx.hypot(dy);
            }
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        let weights = normalize_weights(weights, n)?;
        MMSpace::from_parts(ids, dist, weights, Geodesy::Matrix)
    }

    fn apply_overrides(&mut self, points: &[String], weights: Option<&[f64]>) -> Result<()> {
        let n = self.len();
        if !points.is_empty() {
            self.ids = make_ids(points, n)?;
        }
        if weights.is_some() {
            self.weights = normalize_weights(weights, n)?;
        }
        Ok(())
    }

    /// Checks symmetry, the zero diagonal and the triangle inequality.
    /// All triples are checked for small spaces, `RANDOM_TRIPLES` seeded
    /// random triples otherwise.
    pub fn validate_metric(&self, seed: u64) -> Result<()> {
        let n = self.len();
        let tol = METRIC_REL_TOL * self.max_dist.max(f64::MIN_POSITIVE);
        for i in 0..n {
            if self.dist(i, i).abs() > tol {
                return Err(Error::MetricViolation(format!("d({i},{i}) = {}", self.dist(i, i))));
            }
            for j in 0..n {
                let d = self.dist(i, j);
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::MetricViolation(format!("d({i},{j}) = {d}")));
                }
                if (d - self.dist(j, i)).abs() > tol {
                    return Err(Error::MetricViolation(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        let check = |x: usize, y: usize, z: usize| -> Result<()> {
            if self.dist(x, z) > self.dist(x, y) + self.dist(y, z) + tol {
                return Err(Error::MetricViolation(format!(
                    "d({x},{z}) = {} > d({x},{y}) + d({y},{z}) = {}",
                    self.dist(x, z),
                    self.dist(x, y) + self.dist(y, z)
                )));
            }
            Ok(())
        };
        if n <= EXHAUSTIVE_TRIPLE_LIMIT {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        check(x, y, z)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..RANDOM_TRIPLES {
                check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|p| p == id)
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_distance(&self) -> f64 {
        self.max_dist
    }

    /// Largest nearest-neighbour distance.
    pub fn mesh(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.dist(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }

    /// Line coordinates, when the space is a sampled interval.
    pub fn coords(&self) -> Option<&[f64]> {
        match &self.geodesy {
            Geodesy::Line(c) => Some(c),
            _ => None,
        }
    }

    /// Unit vectors, when the space is a sphere sample.
    pub fn sphere_points(&self) -> Option<&[[f64; 3]]> {
        match &self.geodesy {
            Geodesy::Sphere(p) => Some(p),
            _ => None,
        }
    }

    /// An ordered chain of points from `x` to `y` along a shortest path.
    ///
    /// Matrix, line and graph spaces return metrically straight chains.
    /// Sphere samples return the sample points closest to the great-circle
    /// arc, which are straight only up to the sampling mesh.
    pub fn geodesic(&self, x: usize, y: usize) -> Vec<usize> {
        if x == y {
            return vec![x];
        }
        match &self.geodesy {
            Geodesy::Matrix => self.between_chain(x, y),
            Geodesy::Line(coords) => {
                let (lo, hi) = (coords[x].min(coords[y]), coords[x].max(coords[y]));
                let mut chain: Vec<usize> =
                    (0..self.len()).filter(|&z| coords[z] >= lo && coords[z] <= hi).collect();
                chain.sort_by(|&a, &b| self.dist(x, a).total_cmp(&self.dist(x, b)));
                dedupe_coincident(self, x, y, chain)
            }
            Geodesy::Graph(pred) => {
                let n = self.len();
                let mut chain = vec![y];
                let mut v = y;
                while v != x {
                    v = pred[x * n + v] as usize;
                    chain.push(v);
                }
                chain.reverse();
                chain
            }
            Geodesy::Sphere(points) => self.sphere_chain(points, x, y),
        }
    }

    /// Greedy chain through points `z` with `d(x,z) + d(z,y) = d(x,y)`.
    fn between_chain(&self, x: usize, y: usize) -> Vec<usize> {
        let dxy = self.dist(x, y);
        let tol = 1e-12 * self.max_dist.max(f64::MIN_POSITIVE);
        let mut between: Vec<usize> = (0..self.len())
            .filter(|&z| z != x && z != y && self.dist(x, z) + self.dist(z, y) <= dxy + tol)
            .collect();
        between.sort_by(|&a, &b| self.dist(x, a).total_cmp(&self.dist(x, b)));
        let mut chain = vec![x];
        for z in between {
            let last = *chain.last().unwrap();
            if self.dist(last, z) + self.dist(z, y) <= self.dist(last, y) + tol && self.dist(last, z) > 0.0 {
                chain.push(z);
            }
        }
        chain.push(y);
        chain
    }

    fn sphere_chain(&self, points: &[[f64; 3]], x: usize, y: usize) -> Vec<usize> {
        let (a, b) = (points[x], points[y]);
        let theta = self.dist(x, y);
        // Spacing of the probes along the arc: a quarter of the mean
        // nearest-neighbour spacing.
        let spacing = 0.25 * (4.0 * PI / self.len() as f64).sqrt();
        let steps = (theta / spacing).ceil().max(1.0) as usize;
        let axis = {
            let c = cross(a, b);
            let r = dot(c, c).sqrt();
            if r > 1e-12 {
                Some([c[0] / r, c[1] / r, c[2] / r])
            } else {
                None
            }
        };
        let Some(axis) = axis else {
            // antipodal or coincident: no canonical arc
            return vec![x, y];
        };
        let ortho = cross(axis, a);
        let mut chain = vec![x];
        for s in 1..steps {
            let ang = theta * s as f64 / steps as f64;
            let (sn, cs) = ang.sin_cos();
            let probe = [
                cs * a[0] + sn * ortho[0],
                cs * a[1] + sn * ortho[1],
                cs * a[2] + sn * ortho[2],
            ];
            let nearest = (0..points.len())
                .min_by(|&i, &j| {
                    great_circle(points[i], probe).total_cmp(&great_circle(points[j], probe))
                })
                .unwrap();
            if !chain.contains(&nearest) && nearest != y {
                chain.push(nearest);
            }
        }
        chain.push(y);
        chain
    }

    /// Sum of consecutive chain distances minus the endpoint distance.
    pub fn chain_excess(&self, chain: &[usize]) -> f64 {
        if chain.len() < 2 {
            return 0.0;
        }
        let walk: f64 = chain.windows(2).map(|w| self.dist(w[0], w[1])).sum();
        walk - self.dist(chain[0], chain[chain.len() - 1])
    }
}

fn dedupe_coincident(space: &MMSpace, x: usize, y: usize, chain: Vec<usize>) -> Vec<usize> {
    let mut out = vec![x];
    for z in chain {
        if z == x || z == y {
            continue;
        }
        if space.dist(*out.last().unwrap(), z) > 0.0 && space.dist(z, y) > 0.0 {
            out.push(z);
        }
    }
    out.push(y);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn two_point_space() {
        let metric = MetricSpec::Matrix { data: vec![vec![0.0, 1.0], vec![1.0, 0.0]] };
        let s = build_space(&ids(2), &metric, Some(&[0.5, 0.5])).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dist(0, 1), 1.0);
        assert_eq!(s.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn path_graph_distance() {
        let metric = MetricSpec::Graph { edges: vec![(0, 1, 1.0), (1, 2, 1.0)] };
        let s = build_space(&[], &metric, None).unwrap();
        assert_eq!(s.dist(0, 2), 2.0);
        assert_eq!(s.geodesic(0, 2), vec![0, 1, 2]);
    }

    #[test]
    fn triangle_violation_rejected() {
        let metric = MetricSpec::Matrix {
            data: vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]],
        };
        let err = build_space(&[], &metric, None).unwrap_err();
        assert!(matches!(err, Error::MetricViolation(_)), "{err:?}");
    }

    #[test]
    fn asymmetric_rejected() {
        let metric = MetricSpec::Matrix { data: vec![vec![0.0, 1.0], vec![2.0, 0.0]] };
        assert!(matches!(build_space(&[], &metric, None), Err(Error::MetricViolation(_))));
    }

    #[test]
    fn disconnected_graph_rejected() {
        let metric = MetricSpec::Graph { edges: vec![(0, 1, 1.0), (2, 3, 1.0)] };
        assert!(matches!(build_space(&[], &metric, None), Err(Error::DisconnectedGraph(_))));
    }

    #[test]
    fn empty_space_rejected() {
        let metric = MetricSpec::Matrix { data: vec![] };
        assert_eq!(build_space(&[], &metric, None).unwrap_err(), Error::EmptySpace);
    }

    #[test]
    fn weights_are_normalized() {
        let metric = MetricSpec::Matrix { data: vec![vec![0.0, 2.0], vec![2.0, 0.0]] };
        let s = build_space(&[], &metric, Some(&[3.0, 1.0])).unwrap();
        assert_eq!(s.weights(), &[0.75, 0.25]);
        assert!(matches!(
            build_space(&[], &metric, Some(&[-1.0, 2.0])),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn flat_interval_model_is_uniform() {
        let (s, h) = generate_interval_model(0.0, 3.0, 1.0, 100).unwrap();
        assert!(h.values().iter().all(|&v| v == 1.0));
        // interior weights equal, endpoints carry half
        let w = s.weights();
        assert!((w[1] - w[50]).abs() < 1e-15);
        assert!((w[0] - 0.5 * w[1]).abs() < 1e-15);
    }

    #[test]
    fn sine_model_mass_matches_antiderivative() {
        // the antiderivative of sin on [0, pi] is 1 - cos t, total 2
        let (s, h) = generate_interval_model(1.0, 2.0, PI, 1000).unwrap();
        assert!((h.integral() - 2.0).abs() < 2e-6);
        let total: f64 = s.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // mass of [0, pi/2] is (1 - cos(pi/2)) / 2 = 1/2
        let coords = s.coords().unwrap();
        let half: f64 = (0..s.len())
            .filter(|&i| coords[i] < PI / 2.0)
            .map(|i| s.weights()[i])
            .sum();
        assert!((half - 0.5).abs() < 2e-3);
    }

    #[test]
    fn bonnet_myers_bound_enforced() {
        // pi * sqrt((N-1)/K) = pi / 2 < pi
        let err = generate_interval_model(8.0, 3.0, PI, 100).unwrap_err();
        assert!(matches!(err, Error::BadDiameter { .. }));
        assert!(generate_interval_model(2.0, 3.0, PI, 100).is_ok());
        assert!(matches!(generate_interval_model(0.0, 0.5, 1.0, 100), Err(Error::BadDimension(_))));
    }

    #[test]
    fn sphere_antipodes_and_weights() {
        let a = [0.0, 0.0, 1.0];
        let b = [0.0, 0.0, -1.0];
        assert!((great_circle(a, b) - PI).abs() < 1e-15);
        let s = generate_sphere_sample(2, 1000, 7).unwrap();
        assert!(s.weights().iter().all(|&w| w == 1e-3));
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(generate_sphere_sample(3, 1000, 7), Err(Error::Unsupported(_))));
    }

    #[test]
    fn matrix_geodesic_is_straight() {
        let coords = [0.0, 0.3, 0.5, 1.0];
        let data: Vec<Vec<f64>> =
            coords.iter().map(|a| coords.iter().map(|b| f64::abs(a - b)).collect()).collect();
        let s = build_space(&[], &MetricSpec::Matrix { data }, None).unwrap();
        let chain = s.geodesic(3, 0);
        assert_eq!(chain, vec![3, 2, 1, 0]);
        assert!(s.chain_excess(&chain).abs() < 1e-12);
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"points":["a","b","c"],"metric":{"type":"graph","edges":[[0,1,1.0],[1,2,2.0]]},"weights":[1,1,2]}"#;
        let spec = SpaceSpec::from_json(text).unwrap();
        let (s, h) = spec.build().unwrap();
        assert!(h.is_none());
        assert_eq!(s.ids(), &["a", "b", "c"]);
        assert_eq!(s.dist(0, 2), 3.0);
        assert_eq!(s.weights()[2], 0.5);
        let interval = r#"{"metric":{"type":"interval","K":1,"N":2,"D":3.0,"n":50}}"#;
        let (s, h) = SpaceSpec::from_json(interval).unwrap().build().unwrap();
        assert_eq!(s.len(), 50);
        assert!(h.is_some());
    }
}
