//! Model isoperimetric profiles, Minkowski content of subsets of a finite
//! space, candidate-search profiles and the Levy-Gromov comparison.
//!
//! The model profile `I_{K,N,D}(v)` is computed over densities
//! `h = max(J, 0)^{N-1}` where `J'' + K/(N-1) J = 0`, restricted to
//! `[0, D]`, and over half-line sets `{t <= r}`, `{t >= r}`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::Verdict;
use crate::error::{Error, Result};
use crate::mmspace::MMSpace;
use crate::w1solve::solve_w1;

/// Quadrature points per candidate density.
const MODEL_GRID: usize = 4001;
const MULTISTART: usize = 64;
const GOLDEN_ITERS: usize = 60;

/// Default neighbourhood radii, in multiples of the mesh.
pub const DEFAULT_EPS_MULTIPLIERS: [f64; 3] = [8.0, 6.0, 4.0];
/// Relative floor of the Levy-Gromov allowance.
pub const DEFAULT_ALLOWANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelProfileSpec {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "D", with = "crate::report::ext_float")]
    pub d: f64,
}

impl ModelProfileSpec {
    pub fn new(k: f64, n: f64, d: f64) -> Result<Self> {
        if !(n >= 1.0) {
            return Err(Error::BadDimension(n));
        }
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!("model diameter must be positive, got {d}")));
        }
        if !k.is_finite() {
            return Err(Error::InvalidInput(format!("curvature must be finite, got {k}")));
        }
        Ok(Self { k, n, d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub v: f64,
    #[serde(with = "crate::report::ext_float")]
    pub content: f64,
}

/// One-parameter family of ODE solutions, scaled to avoid overflow.
struct Family {
    k: f64,
    kappa: f64,
    n: f64,
    d: f64,
}

impl Family {
    fn new(spec: &ModelProfileSpec) -> Self {
        let kappa = if spec.k == 0.0 { 0.0 } else { (spec.k.abs() / (spec.n - 1.0)).sqrt() };
        let mut d = spec.d;
        if spec.k > 0.0 {
            d = d.min(PI / kappa);
        }
        Self { k: spec.k, kappa, n: spec.n, d }
    }

    /// First positive zero of `J_alpha`, capped at `D`.
    fn support(&self, alpha: f64) -> f64 {
        let (c, s) = (alpha.cos(), alpha.sin());
        let z = if self.k > 0.0 {
            (PI / 2.0 + alpha) / self.kappa
        } else if self.k == 0.0 {
            if s < 0.0 { -self.d * c / s } else { f64::INFINITY }
        } else if s < 0.0 && c < -s {
            (-c / s).atanh() / self.kappa
        } else {
            f64::INFINITY
        };
        z.min(self.d)
    }

    /// `J_alpha(t)` times a positive constant depending only on `alpha`.
    fn j(&self, alpha: f64, t: f64, len: f64) -> f64 {
        let (c, s) = (alpha.cos(), alpha.sin());
        if self.k > 0.0 {
            (self.kappa * t - alpha).cos()
        } else if self.k == 0.0 {
            c + s * t / self.d
        } else {
            // J = (p e^{kt} + q e^{-kt}) / 2, rescaled by the larger endpoint term
            let (p, q) = (c + s, c - s);
            let lp = (p.abs() / 2.0).ln();
            let lq = (q.abs() / 2.0).ln();
            let top = (lp + self.kappa * len).max(lq);
            p.signum() * (lp + self.kappa * t - top).exp() + q.signum() * (lq - self.kappa * t - top).exp()
        }
    }

    /// Smallest half-line content at volume `v` for the density `J_alpha^{N-1}`.
    fn content(&self, alpha: f64, v: f64) -> f64 {
        let len = self.support(alpha);
        if !(len > 0.0) {
            return f64::INFINITY;
        }
        let m = MODEL_GRID;
        let step = len / (m - 1) as f64;
        let h: Vec<f64> = (0..m)
            .map(|i| self.j(alpha, i as f64 * step, len).max(0.0).powf(self.n - 1.0))
            .collect();
        let mut cum = vec![0.0; m];
        for i in 1..m {
            cum[i] = cum[i - 1] + 0.5 * step * (h[i - 1] + h[i]);
        }
        let total = cum[m - 1];
        if !(total > 0.0) || !total.is_finite() {
            return f64::INFINITY;
        }
        let at = |target: f64| -> f64 {
            let i = cum.partition_point(|&c| c < target).clamp(1, m - 1);
            let seg = cum[i] - cum[i - 1];
            let frac = if seg > 0.0 { ((target - cum[i - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
            let r = (i - 1) as f64 * step + frac * step;
            self.j(alpha, r, len).max(0.0).powf(self.n - 1.0) / total
        };
        at(v * total).min(at((1.0 - v) * total))
    }
}

/// `I_{K,N,D}(v)`.
pub fn model_profile(spec: &ModelProfileSpec, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::BadVolume(v));
    }
    let spec = ModelProfileSpec::new(spec.k, spec.n, spec.d)?;
    if v == 0.0 || v == 1.0 {
        return Ok(0.0);
    }
    if spec.n == 1.0 {
        return Ok(if spec.d.is_finite() { 1.0 / spec.d } else { 0.0 });
    }
    if spec.k <= 0.0 && spec.d.is_infinite() {
        return Ok(0.0);
    }
    let fam = Family::new(&spec);
    let lo = -PI / 2.0;
    let hi = PI / 2.0;
    let step = (hi - lo) / MULTISTART as f64;
    let grid: Vec<(f64, f64)> = (1..=MULTISTART)
        .map(|i| {
            let a = lo + i as f64 * step;
            (a, fam.content(a, v))
        })
        .collect();
    let mut best = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    // refine around the three smallest grid values
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1));
    for &i in order.iter().take(3) {
        let a = (grid[i].0 - step).max(lo + 1e-12);
        let b = (grid[i].0 + step).min(hi);
        best = best.min(golden_min(|x| fam.content(x, v), a, b));
    }
    Ok(best)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.min(fd);
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        best = best.min(fc).min(fd);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiEstimate {
    /// Extrapolated limit of the quotients.
    pub content: f64,
    /// `(eps, (m(A^eps) - m(A)) / eps)` in the order given.
    pub quotients: Vec<(f64, f64)>,
}

/// Distance from every point to the set; `+inf` everywhere when it is empty.
fn distance_to_set(space: &MMSpace, indicator: &[bool]) -> Vec<f64> {
    let members: Vec<usize> = (0..space.len()).filter(|&i| indicator[i]).collect();
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            if indicator[x] {
                0.0
            } else {
                let row = space.row(x);
                members.iter().map(|&y| row[y]).fold(f64::INFINITY, f64::min)
            }
        })
        .collect()
}

/// Minkowski content of `{indicator}` from closed-ball neighbourhoods.
///
/// The limit is the intercept of the least-squares line through the
/// quotients (a single quotient is returned as is).
pub fn minkowski_content(space: &MMSpace, indicator: &[bool], eps_list: &[f64]) -> Result<MinkowskiEstimate> {
    if indicator.len() != space.len() {
        return Err(Error::InvalidInput(format!(
            "indicator has {} entries for {} points",
            indicator.len(),
            space.len()
        )));
    }
    check_eps(eps_list, space.mesh())?;
    let dist = distance_to_set(space, indicator);
    Ok(content_from_distances(space.weights(), indicator, &dist, eps_list))
}

fn check_eps(eps_list: &[f64], mesh: f64) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput("eps_list is empty".into()));
    }
    if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidInput("eps values must be positive and finite".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps_list must be strictly decreasing".into()));
    }
    let min = eps_list[eps_list.len() - 1];
    if min < 2.0 * mesh * (1.0 - 1e-12) {
        return Err(Error::MeshTooCoarse { eps: min, mesh });
    }
    Ok(())
}

fn content_from_distances(weights: &[f64], indicator: &[bool], dist: &[f64], eps_list: &[f64]) -> MinkowskiEstimate {
    let total: f64 = weights.iter().sum();
    let quotients: Vec<(f64, f64)> = eps_list
        .iter()
        .map(|&eps| {
            let grown = (0..weights.len())
                .filter(|&x| !indicator[x] && dist[x] <= eps)
                .fold(0.0, |acc, x| acc + weights[x]);
            (eps, grown / total / eps)
        })
        .collect();
    MinkowskiEstimate { content: extrapolate(&quotients).max(0.0), quotients }
}

fn extrapolate(q: &[(f64, f64)]) -> f64 {
    if q.len() == 1 {
        return q[0].1;
    }
    let n = q.len() as f64;
    let me = q.iter().map(|p| p.0).sum::<f64>() / n;
    let mq = q.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = q.iter().map(|p| (p.0 - me).powi(2)).sum();
    let sxy: f64 = q.iter().map(|p| (p.0 - me) * (p.1 - mq)).sum();
    mq - sxy / sxx * me
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Ball,
    PotentialSublevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPoint {
    /// Requested volume.
    pub v: f64,
    /// Mass of the winning candidate.
    pub attained: f64,
    /// `|attained - v|`.
    pub mass_defect: f64,
    #[serde(with = "crate::report::ext_float")]
    pub content: f64,
    pub kind: CandidateKind,
    /// Base point of a ball, or index of the potential draw.
    pub seed_index: usize,
    pub quotients: Vec<(f64, f64)>,
    pub candidates: usize,
}

impl EmpiricalPoint {
    pub fn point(&self) -> ProfilePoint {
        ProfilePoint { v: self.attained, content: self.content }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Total number of candidate sets.
    pub candidate_budget: usize,
    /// How many of them come from Kantorovich potentials.
    pub potential_candidates: usize,
    pub seed: u64,
    pub eps_multipliers: Vec<f64>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            candidate_budget: 48,
            potential_candidates: 2,
            seed: 0,
            eps_multipliers: DEFAULT_EPS_MULTIPLIERS.to_vec(),
        }
    }
}

impl ProfileOptions {
    pub fn with_budget(candidate_budget: usize) -> Self {
        let potential_candidates = (candidate_budget / 16).clamp(usize::from(candidate_budget > 1), 4);
        Self { candidate_budget, potential_candidates, ..Self::default() }
    }

    fn eps_list(&self, mesh: f64) -> Vec<f64> {
        let mut m = self.eps_multipliers.clone();
        m.sort_by(|a, b| b.total_cmp(a));
        m.dedup();
        // a hair above the multiple so grid distances are not lost to rounding
        m.iter().map(|k| k * mesh * (1.0 + 1e-9)).collect()
    }
}

/// Prefix of `order` whose mass is closest to `v` (at least one point, not all).
fn greedy_fill(weights: &[f64], total: f64, order: &[usize], v: f64) -> (Vec<bool>, f64) {
    let mut best = (1usize, f64::INFINITY, 0.0);
    let mut acc = 0.0;
    for (k, &i) in order.iter().enumerate().take(order.len().saturating_sub(1)) {
        acc += weights[i] / total;
        let gap = (acc - v).abs();
        if gap < best.1 {
            best = (k + 1, gap, acc);
        }
        if acc > v {
            break;
        }
    }
    let mut ind = vec![false; weights.len()];
    for &i in &order[..best.0] {
        ind[i] = true;
    }
    (ind, best.2)
}

fn sorted_by(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// Upper estimate of the isoperimetric profile at `v` by candidate search.
pub fn empirical_profile(space: &MMSpace, v: f64, options: &ProfileOptions) -> Result<EmpiricalPoint> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::BadVolume(v));
    }
    let n = space.len();
    if n < 2 {
        return Err(Error::InvalidInput("profile needs at least two points".into()));
    }
    if options.candidate_budget == 0 {
        return Err(Error::InvalidInput("candidate budget must be positive".into()));
    }
    let mesh = space.mesh();
    let eps_list = options.eps_list(mesh);
    check_eps(&eps_list, mesh)?;
    let weights = space.weights();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let n_pot = options.potential_candidates.min(options.candidate_budget);
    let n_balls = (options.candidate_budget - n_pot).min(n);
    let mut bases: Vec<usize> = (0..n).collect();
    bases.shuffle(&mut rng);
    bases.truncate(n_balls);
    let mut sets: Vec<(CandidateKind, usize, Vec<usize>)> =
        bases.iter().map(|&b| (CandidateKind::Ball, b, sorted_by(space.row(b)))).collect();
    for draw in 0..n_pot {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = f.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total;
        let g: Vec<f64> = f.iter().map(|a| a - mean).collect();
        let mu0: Vec<f64> = g.iter().zip(weights).map(|(a, w)| a.max(0.0) * w).collect();
        let mu1: Vec<f64> = g.iter().zip(weights).map(|(a, w)| (-a).max(0.0) * w).collect();
        let s0: f64 = mu0.iter().sum();
        let s1: f64 = mu1.iter().sum();
        if !(s0 > 0.0 && s1 > 0.0) {
            continue;
        }
        let mu0: Vec<f64> = mu0.iter().map(|m| m / s0).collect();
        let mu1: Vec<f64> = mu1.iter().map(|m| m / s1).collect();
        let sol = solve_w1(space, &mu0, &mu1)?;
        sets.push((CandidateKind::PotentialSublevel, draw, sorted_by(&sol.potential)));
    }

    let evaluated: Vec<EmpiricalPoint> = sets
        .par_iter()
        .map(|(kind, idx, order)| {
            let (ind, attained) = greedy_fill(weights, total, order, v);
            let dist = distance_to_set(space, &ind);
            let est = content_from_distances(weights, &ind, &dist, &eps_list);
            EmpiricalPoint {
                v,
                attained,
                mass_defect: (attained - v).abs(),
                content: est.content,
                kind: *kind,
                seed_index: *idx,
                quotients: est.quotients,
                candidates: 0,
            }
        })
        .collect();
    let count = evaluated.len();
    let mut best = evaluated
        .into_iter()
        .min_by(|a, b| a.content.total_cmp(&b.content))
        .ok_or_else(|| Error::InvalidInput("no candidate sets".into()))?;
    best.candidates = count;
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyGromovEntry {
    pub v: f64,
    pub attained: f64,
    pub empirical: f64,
    pub model: f64,
    /// `(empirical - model) / model`; zero when both sides vanish.
    #[serde(with = "crate::report::ext_float")]
    pub slack: f64,
    pub allowance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyGromovReport {
    pub spec: ModelProfileSpec,
    pub mesh: f64,
    pub entries: Vec<LevyGromovEntry>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevyGromovOptions {
    pub profile: ProfileOptions,
    /// Relative allowance; `None` means `max(5%, 4 mesh / model)`.
    pub allowance: Option<f64>,
}

/// Compares candidate-search profiles of `space` with `I_{K,N,D}`.
pub fn levy_gromov_check(
    space: &MMSpace,
    spec: &ModelProfileSpec,
    v_grid: &[f64],
    options: &LevyGromovOptions,
) -> Result<LevyGromovReport> {
    let spec = ModelProfileSpec::new(spec.k, spec.n, spec.d)?;
    if let Some(v) = v_grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::BadVolume(*v));
    }
    let mesh = space.mesh();
    let entries = v_grid
        .par_iter()
        .map(|&v| -> Result<LevyGromovEntry> {
            let (attained, empirical) = if v == 0.0 || v == 1.0 {
                (v, 0.0)
            } else {
                let p = empirical_profile(space, v, &options.profile)?;
                (p.attained, p.content)
            };
            let model = model_profile(&spec, attained)?;
            let allowance = options
                .allowance
                .unwrap_or_else(|| if model > 0.0 { DEFAULT_ALLOWANCE.max(4.0 * mesh / model) } else { DEFAULT_ALLOWANCE });
            let slack = if model > 0.0 {
                (empirical - model) / model
            } else if empirical >= 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            Ok(LevyGromovEntry { v, attained, empirical, model, slack, allowance, passed: slack >= -allowance })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if entries.iter().all(|e| e.passed) { Verdict::Pass } else { Verdict::Fail };
    Ok(LevyGromovReport { spec, mesh, entries, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::generate_interval_model;

    fn spec(k: f64, n: f64, d: f64) -> ModelProfileSpec {
        ModelProfileSpec::new(k, n, d).unwrap()
    }

    #[test]
    fn round_model_half() {
        let v = model_profile(&spec(1.0, 2.0, PI), 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-4, "{v}");
        // cap of mass v on the round model: (1 - cos r)/2 = v, content sin r / 2
        for &v in &[0.1, 0.25, 0.75] {
            let r = (1.0f64 - 2.0 * v).acos();
            let got = model_profile(&spec(1.0, 2.0, PI), v).unwrap();
            assert!((got - r.sin() / 2.0).abs() < 1e-4, "v={v} {got}");
        }
    }

    #[test]
    fn affine_family_brute_force() {
        // densities max(t + xi, 0) on [0, 1] and the constant, both half-lines
        let v = 0.5;
        let mut oracle: f64 = 1.0;
        for i in 0..10_000 {
            let xi = -1.0 + 4.0 * i as f64 / 9_999.0;
            let lo = (-xi).max(0.0);
            if lo >= 1.0 {
                continue;
            }
            let cdf = |r: f64| 0.5 * (r + xi).powi(2) - 0.5 * (lo + xi).powi(2);
            let z = cdf(1.0);
            for target in [v * z, (1.0 - v) * z] {
                // (r + xi)^2 = 2 target + (lo + xi)^2
                let r = (2.0 * target + (lo + xi).powi(2)).sqrt() - xi;
                oracle = oracle.min((r + xi) / z);
            }
        }
        let got = model_profile(&spec(0.0, 2.0, 1.0), v).unwrap();
        assert!(got >= 1.0 - 1e-6, "{got}");
        assert!((got - oracle).abs() < 1e-4, "{got} vs {oracle}");
    }

    #[test]
    fn trivial_cases() {
        let s = spec(1.0, 3.0, 2.0);
        assert_eq!(model_profile(&s, 0.0).unwrap(), 0.0);
        assert_eq!(model_profile(&s, 1.0).unwrap(), 0.0);
        assert!(matches!(model_profile(&s, 1.5), Err(Error::BadVolume(_))));
        assert_eq!(model_profile(&spec(-1.0, 3.0, f64::INFINITY), 0.3).unwrap(), 0.0);
        assert_eq!(model_profile(&spec(0.0, 3.0, f64::INFINITY), 0.3).unwrap(), 0.0);
        assert!((model_profile(&spec(0.0, 1.0, 4.0), 0.3).unwrap() - 0.25).abs() < 1e-15);
        // an infinite diameter with K > 0 is capped by Bonnet-Myers
        let a = model_profile(&spec(1.0, 2.0, f64::INFINITY), 0.5).unwrap();
        assert!((a - 0.5).abs() < 1e-4);
    }

    #[test]
    fn symmetry_and_monotonicity_in_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..12 {
            let k = rng.gen_range(-2.0..2.0);
            let n = rng.gen_range(1.5..5.0);
            let d = rng.gen_range(0.5..3.0);
            let v = rng.gen_range(0.05..0.95);
            let s = spec(k, n, d);
            let a = model_profile(&s, v).unwrap();
            let b = model_profile(&s, 1.0 - v).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{s:?} v={v}: {a} {b}");
            let wider = model_profile(&spec(k, n, d * 1.5), v).unwrap();
            assert!(wider <= a * (1.0 + 1e-6), "{s:?} v={v}: {wider} > {a}");
        }
    }

    #[test]
    fn hyperbolic_large_diameter_is_finite() {
        let v = model_profile(&spec(-1.0, 3.0, 2000.0), 0.5).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn minkowski_on_interval_models() {
        let (space, _) = generate_interval_model(0.0, 2.0, 1.0, 1001).unwrap();
        let mesh = space.mesh();
        let coords = space.coords().unwrap().to_vec();
        let eps: Vec<f64> = [8.0, 6.0, 4.0].iter().map(|k| k * mesh * (1.0 + 1e-9)).collect();
        let half: Vec<bool> = coords.iter().map(|&t| t <= 0.5).collect();
        let est = minkowski_content(&space, &half, &eps).unwrap();
        assert!((est.content - 1.0).abs() < 2e-3, "{est:?}");

        let (space, density) = generate_interval_model(1.0, 2.0, PI, 1001).unwrap();
        let mesh = space.mesh();
        let eps: Vec<f64> = [8.0, 6.0, 4.0].iter().map(|k| k * mesh * (1.0 + 1e-9)).collect();
        let coords = space.coords().unwrap().to_vec();
        let ind: Vec<bool> = coords.iter().map(|&t| t <= PI / 2.0 + 1e-12).collect();
        let est = minkowski_content(&space, &ind, &eps).unwrap();
        let oracle = density.eval(PI / 2.0) / density.integral();
        assert!((est.content - oracle).abs() < 2e-3, "{est:?} vs {oracle}");

        let all = vec![true; space.len()];
        assert_eq!(minkowski_content(&space, &all, &eps).unwrap().content, 0.0);
        assert!(matches!(
            minkowski_content(&space, &ind, &[space.mesh()]),
            Err(Error::MeshTooCoarse { .. })
        ));
        assert!(minkowski_content(&space, &ind, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn minkowski_first_order_rate() {
        let (space, density) = generate_interval_model(1.0, 3.0, PI, 4001).unwrap();
        let coords = space.coords().unwrap().to_vec();
        let r = 1.0;
        let ind: Vec<bool> = coords.iter().map(|&t| t <= r).collect();
        let r_eff = coords.iter().copied().filter(|&t| t <= r).fold(0.0, f64::max);
        let truth = density.eval(r_eff) / density.integral();
        let mesh = space.mesh();
        let eps: Vec<f64> = [320.0, 160.0, 80.0].iter().map(|k| k * mesh * (1.0 + 1e-9)).collect();
        let est = minkowski_content(&space, &ind, &eps).unwrap();
        let errs: Vec<f64> = est.quotients.iter().map(|q| q.1 - truth).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.15, "{errs:?}");
        }
        assert!((est.content - truth).abs() < 0.1 * errs[2].abs(), "{est:?} {truth}");
    }

    #[test]
    fn interval_profile_matches_cuts() {
        let (space, _) = generate_interval_model(1.0, 2.0, PI, 1000).unwrap();
        let p = empirical_profile(&space, 0.5, &ProfileOptions::default()).unwrap();
        // direct oracle: every cut {t <= c} and {t >= c}
        let coords = space.coords().unwrap();
        let w = space.weights();
        let mut oracle = f64::INFINITY;
        let mut acc = 0.0;
        for i in 0..coords.len() - 1 {
            acc += w[i];
            if (acc - 0.5).abs() <= w[i] {
                let c = coords[i];
                oracle = oracle.min((c.sin() / 2.0).min((coords[i + 1]).sin() / 2.0));
            }
        }
        assert!(p.mass_defect <= w.iter().cloned().fold(0.0, f64::max));
        assert!((p.content - oracle).abs() < 0.01, "{p:?} vs {oracle}");
        assert!(p.candidates >= 2);
    }

    #[test]
    fn small_volume_reports_defect() {
        let (space, _) = generate_interval_model(0.0, 2.0, 1.0, 64).unwrap();
        let p = empirical_profile(&space, 1e-6, &ProfileOptions::with_budget(8)).unwrap();
        let wmax = space.weights().iter().cloned().fold(0.0, f64::max);
        assert!(p.attained > 0.0 && p.attained <= wmax);
        assert!((p.mass_defect - (p.attained - 1e-6)).abs() < 1e-15);
        assert!(p.content.is_finite());
    }

    #[test]
    fn levy_gromov_interval_and_flat() {
        let (space, _) = generate_interval_model(1.0, 2.0, PI, 1000).unwrap();
        let rep = levy_gromov_check(&space, &spec(1.0, 2.0, PI), &[0.0, 0.25, 0.5, 0.75], &Default::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
        for e in &rep.entries {
            assert!(e.slack.abs() <= 0.05, "{e:?}");
        }
        // the flat interval does not carry CD(1, 2) at diameter 1
        let (flat, _) = generate_interval_model(0.0, 2.0, 1.0, 500).unwrap();
        let strict = LevyGromovOptions { allowance: Some(0.0), ..Default::default() };
        let rep = levy_gromov_check(&flat, &spec(1.0, 2.0, 1.0), &[0.25, 0.5, 0.75], &strict).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail, "{rep:?}");
    }
}
