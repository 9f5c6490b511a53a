//! Exact Wasserstein-1 transport on a finite metric measure space.
//!
//! The primal is solved by network simplex on the bipartite graph between
//! the positive and negative parts of `mu0 - mu1`, with masses and costs
//! quantized to integers. The dual is recovered from the node prices and
//! then turned into a 1-Lipschitz potential on the whole space.
//!
//! Dual optima are not unique. Within a connected component of the plan
//! support the potential is forced up to a constant. Between components
//! the constants are free, and a vertex dual saturates spurious pairs
//! (the degenerate basis arcs). Those pairs would enter the saturation set
//! and glue unrelated transport rays together. The offsets are therefore
//! moved into the relative interior of the feasible set, so a pair is
//! saturated only when every optimal potential with the same component
//! structure saturates it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::flow::{FlowError, FlowProblem};
use crate::mmspace::MMSpace;

/// Integer cost units per unit of distance.
pub const COST_SCALE: f64 = 1e12;
/// Integer mass units per unit of probability. Below 2^53 so scaled masses
/// are exact in f64, and divisible by every integer up to 16 and by large
/// powers of 2 and 5, so uniform masses on most sample sizes quantize
/// without remainder.
pub const MASS_UNITS: u64 = 7_207_200_000_000_000;
/// Largest admissible difference between the two total masses.
pub const MASS_TOL: f64 = 1e-10;
/// Relative slack (times the largest distance) for the default saturation
/// set; the level at which the potential is certified 1-Lipschitz.
pub const DEFAULT_GAMMA_REL_TOL: f64 = 1e-9;
/// Component counts above this skip the all-pairs centering pass.
const CENTERING_FLOYD_LIMIT: usize = 2500;
const CENTERING_SWEEPS: usize = 30;

/// One entry of a transport plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
    /// Mass in units of `1 / MASS_UNITS`.
    pub units: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct W1Solution {
    pub plan: Vec<PlanEntry>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Kantorovich potential, shifted so its minimum is zero.
    pub potential: Vec<f64>,
    pub lipschitz_residual: f64,
    pub duality_gap: f64,
    /// Objective in integer units: `sum units * round(d * COST_SCALE)`.
    pub cost_units: i128,
    /// Number of connected components of the plan support.
    pub components: usize,
}

/// Splits a probability vector into `MASS_UNITS` integer units by the
/// largest-remainder rule, so the parts sum exactly to `MASS_UNITS`.
pub fn quantize_masses(mu: &[f64]) -> Vec<u64> {
    let total: f64 = mu.iter().sum();
    let scaled: Vec<f64> = mu.iter().map(|m| m / total * MASS_UNITS as f64).collect();
    let mut units: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();
    let mut order: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned <= MASS_UNITS {
        let deficit = (MASS_UNITS - assigned) as usize;
        for &i in order.iter().cycle().take(deficit) {
            units[i] += 1;
        }
    } else {
        let mut excess = assigned - MASS_UNITS;
        while excess > 0 {
            for &i in order.iter().rev() {
                if excess > 0 && units[i] > 0 {
                    units[i] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    units
}

fn check_measure(space: &MMSpace, mu: &[f64], name: &str) -> Result<f64> {
    if mu.len() != space.len() {
        return Err(Error::InvalidInput(format!(
            "{name} has {} entries for a space of {} points",
            mu.len(),
            space.len()
        )));
    }
    if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidInput(format!("{name} must be finite and nonnegative")));
    }
    let total: f64 = mu.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(format!("{name} has zero mass")));
    }
    Ok(total)
}

#[inline]
pub(crate) fn cost_units(d: f64) -> i64 {
    (d * COST_SCALE).round() as i64
}

/// Solves the Kantorovich problem with cost `d` between `mu0` and `mu1`.
pub fn solve_w1(space: &MMSpace, mu0: &[f64], mu1: &[f64]) -> Result<W1Solution> {
    let m0 = check_measure(space, mu0, "mu0")?;
    let m1 = check_measure(space, mu1, "mu1")?;
    if (m0 - m1).abs() > MASS_TOL {
        return Err(Error::UnbalancedMarginals(m0 - m1));
    }
    let n = space.len();
    let q0 = quantize_masses(mu0);
    let q1 = quantize_masses(mu1);

    let mut plan = Vec::new();
    for i in 0..n {
        let stay = q0[i].min(q1[i]);
        if stay > 0 {
            plan.push(PlanEntry { source: i, target: i, mass: stay as f64 / MASS_UNITS as f64, units: stay });
        }
    }
    let sources: Vec<usize> = (0..n).filter(|&i| q0[i] > q1[i]).collect();
    let sinks: Vec<usize> = (0..n).filter(|&i| q1[i] > q0[i]).collect();

    // base potential on the support, and component labels
    let mut base = vec![0.0f64; n];
    let mut comp = vec![usize::MAX; n];
    let mut components = 0;
    if !sources.is_empty() {
        let (s, t) = (sources.len(), sinks.len());
        let mut supply: Vec<i64> = sources.iter().map(|&i| (q0[i] - q1[i]) as i64).collect();
        supply.extend(sinks.iter().map(|&j| -((q1[j] - q0[j]) as i64)));
        let mut problem = FlowProblem::new(supply);
        for (a, &x) in sources.iter().enumerate() {
            let row = space.row(x);
            for (b, &y) in sinks.iter().enumerate() {
                problem.add_arc(a, s + b, cost_units(row[y]));
            }
        }
        let sol = problem.solve().map_err(|e| match e {
            FlowError::Unbalanced(d) => Error::SolverFailure(format!("quantized supplies off by {d}")),
            FlowError::Infeasible => Error::SolverFailure("infeasible".into()),
            FlowError::Unbounded => Error::SolverFailure("unbounded".into()),
        })?;
        let mut uf = UnionFind::new(s + t);
        for a in 0..s {
            for b in 0..t {
                let f = sol.flow[a * t + b];
                if f > 0 {
                    plan.push(PlanEntry {
                        source: sources[a],
                        target: sinks[b],
                        mass: f as f64 / MASS_UNITS as f64,
                        units: f as u64,
                    });
                    uf.union(a, s + b);
                }
            }
        }
        for (a, &x) in sources.iter().enumerate() {
            base[x] = -(sol.potential[a] as f64) / COST_SCALE;
        }
        for (b, &y) in sinks.iter().enumerate() {
            base[y] = -(sol.potential[s + b] as f64) / COST_SCALE;
        }
        let mut label = vec![usize::MAX; s + t];
        for v in 0..s + t {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = components;
                components += 1;
            }
            let node = if v < s { sources[v] } else { sinks[v - s] };
            comp[node] = label[r];
        }
    }
    plan.sort_by_key(|e| (e.source, e.target));

    let support: Vec<usize> = (0..n).filter(|&i| comp[i] != usize::MAX).collect();
    let offsets = center_offsets(space, &support, &comp, &base, components);
    let mut potential = vec![0.0f64; n];
    for &i in &support {
        potential[i] = base[i] + offsets[comp[i]];
    }
    extend_midpoint(space, &support, &mut potential);
    let min = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    for p in potential.iter_mut() {
        *p -= min;
    }

    let primal_value: f64 = plan.iter().map(|e| e.mass * space.dist(e.source, e.target)).sum();
    let dual_value: f64 =
        (0..n).map(|i| potential[i] * (mu0[i] / m0 - mu1[i] / m1)).sum();
    let lipschitz_residual = lipschitz_residual(space, &potential);
    let cost_units_total: i128 = plan
        .iter()
        .map(|e| e.units as i128 * cost_units(space.dist(e.source, e.target)) as i128)
        .sum();
    Ok(W1Solution {
        plan,
        primal_value,
        dual_value,
        potential,
        lipschitz_residual,
        duality_gap: primal_value - dual_value,
        cost_units: cost_units_total,
        components,
    })
}

/// `max_{x,y} (|phi(x) - phi(y)| - d(x,y))^+`.
pub fn lipschitz_residual(space: &MMSpace, phi: &[f64]) -> f64 {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let row = space.row(i);
            (0..n).map(|j| (phi[i] - phi[j]).abs() - row[j]).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Offsets per plan component placing the potential in the relative
/// interior of the feasible set `c_A - c_B <= w(A, B)`.
fn center_offsets(space: &MMSpace, support: &[usize], comp: &[usize], base: &[f64], k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![0.0; k];
    }
    // w[a * k + b] = min over x in A, y in B of d(x,y) - base(x) + base(y)
    let mut w = vec![f64::INFINITY; k * k];
    for &x in support {
        let a = comp[x];
        let row = space.row(x);
        for &y in support {
            let b = comp[y];
            if a != b {
                let v = row[y] - base[x] + base[y];
                let slot = &mut w[a * k + b];
                if v < *slot {
                    *slot = v;
                }
            }
        }
    }
    for a in 0..k {
        w[a * k + a] = 0.0;
    }
    // The vertex dual (all offsets zero) is feasible up to quantization.
    let mut c = vec![0.0f64; k];
    if k <= CENTERING_FLOYD_LIMIT {
        // dist[r][a] = shortest path r -> a where edge b -> a has weight w(a, b);
        // each row is a feasible offset vector, and their average leaves
        // every non-forced constraint strictly slack.
        let mut dist = vec![0.0f64; k * k];
        for r in 0..k {
            for a in 0..k {
                dist[r * k + a] = w[a * k + r];
            }
        }
        for m in 0..k {
            let mid: Vec<f64> = dist[m * k..(m + 1) * k].to_vec();
            dist.par_chunks_mut(k).for_each(|row| {
                let rm = row[m];
                if rm.is_finite() {
                    for (slot, &v) in row.iter_mut().zip(&mid) {
                        let cand = rm + v;
                        if cand < *slot {
                            *slot = cand;
                        }
                    }
                }
            });
        }
        for a in 0..k {
            c[a] = (0..k).map(|r| dist[r * k + a]).sum::<f64>() / k as f64;
        }
    }
    // Coordinate sweeps: move each offset to the middle of its interval.
    for _ in 0..CENTERING_SWEEPS {
        let mut moved = 0.0f64;
        for a in 0..k {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for b in 0..k {
                if b != a {
                    hi = hi.min(c[b] + w[a * k + b]);
                    lo = lo.max(c[b] - w[b * k + a]);
                }
            }
            if lo.is_finite() && hi.is_finite() {
                let mid = 0.5 * (lo + hi);
                moved = moved.max((mid - c[a]).abs());
                c[a] = mid;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    c
}

/// Extends the potential from the support to every other point by the
/// midpoint of the smallest and largest 1-Lipschitz extensions.
fn extend_midpoint(space: &MMSpace, support: &[usize], phi: &mut [f64]) {
    let n = space.len();
    if support.is_empty() {
        return;
    }
    let on_support: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in support {
            v[i] = true;
        }
        v
    };
    let fixed: Vec<(usize, f64)> = support.iter().map(|&i| (i, phi[i])).collect();
    let ext: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .filter(|&z| !on_support[z])
        .map(|z| {
            let row = space.row(z);
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for &(a, pa) in &fixed {
                lo = lo.max(pa - row[a]);
                hi = hi.min(pa + row[a]);
            }
            (z, 0.5 * (lo + hi))
        })
        .collect();
    for (z, v) in ext {
        phi[z] = v;
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// The saturation set `{(x, y) : phi(x) - phi(y) >= d(x, y) - tol}`.
#[derive(Debug, Clone)]
pub struct GammaSet {
    pub potential: Vec<f64>,
    pub tol: f64,
    bits: BitMatrix,
}

impl GammaSet {
    /// Saturation set of an arbitrary potential.
    pub fn from_potential(space: &MMSpace, potential: &[f64], tol: f64) -> Result<Self> {
        if potential.len() != space.len() {
            return Err(Error::InvalidInput("potential length does not match the space".into()));
        }
        let n = space.len();
        let rows: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|x| {
                let row = space.row(x);
                (0..n).filter(|&y| potential[x] - potential[y] >= row[y] - tol).collect()
            })
            .collect();
        let mut bits = BitMatrix::new(n);
        for (x, ys) in rows.iter().enumerate() {
            for &y in ys {
                bits.set(x, y);
            }
        }
        Ok(GammaSet { potential: potential.to_vec(), tol, bits })
    }

    pub fn len(&self) -> usize {
        self.bits.size()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.size() == 0
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits.get(x, y)
    }

    /// Membership at a different slack, evaluated from the potential.
    pub fn contains_with_tol(&self, space: &MMSpace, x: usize, y: usize, tol: f64) -> bool {
        self.potential[x] - self.potential[y] >= space.dist(x, y) - tol
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    /// Successors `Gamma(x)`.
    pub fn successors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.bits.row_ones(x)
    }

    /// All pairs with `x != y`.
    pub fn off_diagonal_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.bits.size();
        (0..n)
            .flat_map(|x| self.bits.row_ones(x).filter(move |&y| y != x).map(move |y| (x, y)))
            .collect()
    }

    /// Number of pairs including the diagonal.
    pub fn pair_count(&self) -> usize {
        self.bits.count()
    }
}

/// Saturation set of a solution's potential. Every plan pair that moves
/// mass must belong to it; otherwise `tol` is too small for the potential.
pub fn gamma_set(space: &MMSpace, solution: &W1Solution, tol: f64) -> Result<GammaSet> {
    let gamma = GammaSet::from_potential(space, &solution.potential, tol)?;
    for e in &solution.plan {
        if e.source != e.target && e.units > 0 && !gamma.contains(e.source, e.target) {
            let slack = space.dist(e.source, e.target)
                - (solution.potential[e.source] - solution.potential[e.target]);
            return Err(Error::TolTooSmall { tol, from: e.source, to: e.target, slack });
        }
    }
    Ok(gamma)
}

/// Default saturation slack for a space.
pub fn default_tol(space: &MMSpace) -> f64 {
    DEFAULT_GAMMA_REL_TOL * space.max_distance()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub k: usize,
    pub cycles_checked: usize,
    /// Largest `sum d(x_i, y_i) - sum d(x_i, y_{i+1})`; positive values are
    /// violations of cyclic monotonicity. Zero when nothing was checked.
    pub worst_violation: f64,
}

/// Samples `trials` random `k`-cycles of off-diagonal pairs of `gamma` and
/// returns the worst cyclic-monotonicity defect. Trials are sharded into
/// independently seeded chunks drawn from `rng`.
pub fn check_cyclic_monotonicity<R: Rng>(
    space: &MMSpace,
    gamma: &GammaSet,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> CycleReport {
    assert!(k >= 2, "cycles need k >= 2");
    let pairs = gamma.off_diagonal_pairs();
    if pairs.is_empty() || trials == 0 {
        return CycleReport { k, cycles_checked: 0, worst_violation: 0.0 };
    }
    const CHUNK: usize = 1024;
    let seeds: Vec<(u64, usize)> = (0..trials.div_ceil(CHUNK))
        .map(|c| (rng.gen::<u64>(), CHUNK.min(trials - c * CHUNK)))
        .collect();
    let worst = seeds
        .par_iter()
        .map(|&(seed, count)| {
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let mut worst = f64::NEG_INFINITY;
            let mut cycle = Vec::with_capacity(k);
            for _ in 0..count {
                cycle.clear();
                for _ in 0..k {
                    cycle.push(pairs[local.gen_range(0..pairs.len())]);
                }
                let matched: f64 = cycle.iter().map(|&(x, y)| space.dist(x, y)).sum();
                let shifted: f64 =
                    (0..k).map(|i| space.dist(cycle[i].0, cycle[(i + 1) % k].1)).sum();
                worst = worst.max(matched - shifted);
            }
            worst
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    CycleReport { k, cycles_checked: trials, worst_violation: worst }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicReport {
    pub pairs_sampled: usize,
    pub subpairs_checked: usize,
    pub failures: usize,
    pub failure_fraction: f64,
}

/// For up to `samples` random pairs `(x, y)` of `gamma`, walks the chain
/// from `x` to `y` and checks that every ordered sub-pair `(u, v)` is
/// saturated within `tol`.
pub fn check_geodesic_stability<R: Rng>(
    space: &MMSpace,
    gamma: &GammaSet,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> GeodesicReport {
    let pairs = gamma.off_diagonal_pairs();
    let chosen: Vec<(usize, usize)> = if pairs.len() <= samples {
        pairs
    } else {
        (0..samples).map(|_| pairs[rng.gen_range(0..pairs.len())]).collect()
    };
    let (checked, failures) = chosen
        .par_iter()
        .map(|&(x, y)| {
            let chain = space.geodesic(x, y);
            let mut checked = 0usize;
            let mut failures = 0usize;
            for i in 0..chain.len() {
                for j in (i + 1)..chain.len() {
                    checked += 1;
                    if !gamma.contains_with_tol(space, chain[i], chain[j], tol) {
                        failures += 1;
                    }
                }
            }
            (checked, failures)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    GeodesicReport {
        pairs_sampled: chosen.len(),
        subpairs_checked: checked,
        failures,
        failure_fraction: if checked == 0 { 0.0 } else { failures as f64 / checked as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::{build_space, MetricSpec};

    fn line(coords: &[f64]) -> MMSpace {
        MMSpace::line(coords.to_vec(), vec![1.0; coords.len()]).unwrap()
    }

    #[test]
    fn quantization_is_exact() {
        let q = quantize_masses(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(q.iter().sum::<u64>(), MASS_UNITS);
        let q = quantize_masses(&[0.7, 0.3, 0.0]);
        assert_eq!(q, vec![MASS_UNITS / 10 * 7, MASS_UNITS / 10 * 3, 0]);
    }

    #[test]
    fn dirac_to_dirac() {
        let s = line(&[0.0, 0.25, 1.0, 1.5]);
        let sol = solve_w1(&s, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((sol.primal_value - 1.5).abs() < 1e-12);
        assert_eq!(sol.plan.len(), 1);
        // phi(z) = d(z, y) is an admissible certificate
        let phi: Vec<f64> = (0..4).map(|z| s.dist(z, 3)).collect();
        let dual: f64 = phi[0] - phi[3];
        assert!((dual - sol.primal_value).abs() < 1e-12);
        let g = gamma_set(&s, &sol, default_tol(&s)).unwrap();
        assert!(g.contains(0, 3));
    }

    #[test]
    fn identical_marginals_cost_nothing() {
        let s = line(&[0.0, 1.0, 2.0]);
        let mu = [0.2, 0.5, 0.3];
        let sol = solve_w1(&s, &mu, &mu).unwrap();
        assert_eq!(sol.primal_value, 0.0);
        assert!(sol.potential.iter().all(|&p| p == 0.0));
        assert!(sol.plan.iter().all(|e| e.source == e.target));
    }

    #[test]
    fn two_point_value() {
        // the only free parameter is the mass moved from 0 to 1, at least 0.5
        let s = line(&[0.0, 1.0]);
        let sol = solve_w1(&s, &[0.7, 0.3], &[0.2, 0.8]).unwrap();
        let brute = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .filter(|&a| a <= 0.7 && 0.7 - a <= 0.2 + 1e-12)
            .map(|a| a * 1.0)
            .fold(f64::INFINITY, f64::min);
        assert!((sol.primal_value - brute).abs() < 1e-12);
        assert!((sol.primal_value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_marginals() {
        let s = line(&[0.0, 1.0]);
        assert!(matches!(
            solve_w1(&s, &[0.5, 0.5], &[0.5, 0.6]),
            Err(Error::UnbalancedMarginals(_))
        ));
    }

    #[test]
    fn gamma_of_linear_potential_on_grid() {
        let coords: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let s = line(&coords);
        let phi: Vec<f64> = coords.iter().map(|x| -x).collect();
        let g = GammaSet::from_potential(&s, &phi, 1e-12).unwrap();
        for x in 0..11 {
            for y in 0..11 {
                assert_eq!(g.contains(x, y), y >= x, "({x},{y})");
            }
        }
    }

    #[test]
    fn tol_too_small_is_reported() {
        let s = line(&[0.0, 1.0, 2.0]);
        let mut sol = solve_w1(&s, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        sol.potential[2] += 0.5;
        assert!(matches!(gamma_set(&s, &sol, 1e-9), Err(Error::TolTooSmall { .. })));
    }

    #[test]
    fn adversarial_pair_breaks_cyclic_monotonicity() {
        let coords: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let s = line(&coords);
        let phi: Vec<f64> = coords.iter().map(|x| -x).collect();
        let mut g = GammaSet::from_potential(&s, &phi, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let clean = check_cyclic_monotonicity(&s, &g, 2, 2000, &mut rng);
        assert!(clean.worst_violation <= 1e-12);
        // (5, 0) moves leftward: phi(5) - phi(0) = -5 < d - 0.1
        g.bits.set(5, 0);
        let dirty = check_cyclic_monotonicity(&s, &g, 2, 20_000, &mut rng);
        // hand computation: pairs (5,0) and (0,5): 5 + 5 vs d(5,5) + d(0,0) = 0
        assert!(dirty.worst_violation > 0.0);
        assert!((dirty.worst_violation - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_gamma_is_vacuous() {
        let s = line(&[0.0, 1.0]);
        let g = GammaSet::from_potential(&s, &[0.0, 0.0], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = check_cyclic_monotonicity(&s, &g, 3, 100, &mut rng);
        assert_eq!(r.cycles_checked, 0);
        let geo = check_geodesic_stability(&s, &g, 10, 1e-9, &mut rng);
        assert_eq!(geo.subpairs_checked, 0);
    }

    #[test]
    fn interval_geodesic_stability() {
        let coords: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let s = line(&coords);
        let mut mu0 = vec![0.0; 30];
        let mut mu1 = vec![0.0; 30];
        for i in 0..15 {
            mu0[i] = 1.0;
            mu1[29 - i] = 1.0;
        }
        let sol = solve_w1(&s, &mu0, &mu1).unwrap();
        let g = gamma_set(&s, &sol, default_tol(&s)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = check_geodesic_stability(&s, &g, 200, default_tol(&s), &mut rng);
        assert!(r.subpairs_checked > 0);
        assert_eq!(r.failures, 0);
    }

    #[test]
    fn tripod_graph_solves() {
        let metric = MetricSpec::Graph { edges: vec![(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)] };
        let s = build_space(&[], &metric, None).unwrap();
        let sol = solve_w1(&s, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!((sol.primal_value - 2.0).abs() < 1e-12);
        assert!(sol.duality_gap.abs() < 1e-9);
    }
}
