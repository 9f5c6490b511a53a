//! Distortion coefficients and one-dimensional curvature-dimension checks
//! on sampled densities.
//!
//! A density `h` on an interval satisfies CD(K, N) for `N > 1` when
//! `g = h^{1/(N-1)}` obeys
//! `g((1-s) t0 + s t1) >= sigma_{K,N-1}^{(1-s)}(t1 - t0) g(t0) + sigma_{K,N-1}^{(s)}(t1 - t0) g(t1)`
//! and for `N = 1` when `h` is constant.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::{interpolate, Density1D};

/// Relative slack below which a tested inequality counts as violated.
pub const DEFAULT_REL_TOL: f64 = 1e-7;
/// Denominator floor for relative slacks.
const TINY: f64 = 1e-300;

/// `sigma_{K,N}^{(t)}(theta)`. The flat case `K theta^2 = 0` is checked
/// first, so `N = 0` with `K theta^2 = 0` gives `t`.
pub fn sigma(k: f64, n: f64, t: f64, theta: f64) -> f64 {
    let kt2 = k * theta * theta;
    if kt2 == 0.0 {
        t
    } else if kt2 >= n * PI * PI {
        f64::INFINITY
    } else if kt2 > 0.0 {
        let a = theta * (k / n).sqrt();
        (t * a).sin() / a.sin()
    } else if n == 0.0 {
        t
    } else {
        let a = theta * (-k / n).sqrt();
        (t * a).sinh() / a.sinh()
    }
}

/// `tau_{K,N}^{(t)}(theta) = t^{1/N} sigma_{K,N-1}^{(t)}(theta)^{(N-1)/N}`.
/// For `N = 1` this is `+inf` when `K theta^2 > 0` and `t` otherwise.
pub fn tau(k: f64, n: f64, t: f64, theta: f64) -> f64 {
    let s = sigma(k, n - 1.0, t, theta);
    if n == 1.0 {
        return if s.is_infinite() { f64::INFINITY } else { t };
    }
    t.powf(1.0 / n) * s.powf((n - 1.0) / n)
}

/// Generalized sine `s_{K/(N-1)}(x)`: sine, identity or hyperbolic sine.
pub fn generalized_sine(k: f64, n: f64, x: f64) -> f64 {
    if k == 0.0 {
        x
    } else if k > 0.0 {
        (x * (k / (n - 1.0)).sqrt()).sin()
    } else {
        (x * (-k / (n - 1.0)).sqrt()).sinh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CDReport {
    pub verdict: Verdict,
    /// Smallest relative slack `(lhs - rhs) / rhs` over tested triples.
    #[serde(with = "crate::report::ext_float")]
    pub margin: f64,
    /// `(t0, t1, s)` attaining the margin.
    pub worst_triple: Option<[f64; 3]>,
    pub tested: usize,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCPReport {
    pub verdict: Verdict,
    #[serde(with = "crate::report::ext_float")]
    pub margin: f64,
    /// `(s, tau, sigma_minus, sigma_plus)` attaining the margin.
    pub worst_quadruple: Option<[f64; 4]>,
    pub tested: usize,
    pub reason: Option<String>,
}

/// Which points of a density enter a check. Sampled variants use grid
/// nodes only, so no interpolation is involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sampling {
    /// Every combination of the grid nodes whose index is a multiple of
    /// `stride`, plus the last node.
    Grid { stride: usize },
    /// `count` random combinations of grid nodes.
    Random { count: usize, seed: u64 },
    /// Explicit tuples in the density's coordinate; off-grid values are
    /// interpolated linearly in `h^{1/(N-1)}`.
    Explicit { tuples: Vec<Vec<f64>> },
}

fn validate(k: f64, n: f64) -> Result<()> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::BadDimension(n));
    }
    if !k.is_finite() {
        return Err(Error::InvalidInput(format!("K must be finite, got {k}")));
    }
    Ok(())
}

/// Fails with `DegenerateDensity` when `h` vanishes at an interior node
/// whose two neighbours are positive.
fn check_degenerate(h: &Density1D) -> Result<()> {
    let v = h.values();
    for i in 1..v.len() - 1 {
        if v[i] == 0.0 && v[i - 1] > 0.0 && v[i + 1] > 0.0 {
            return Err(Error::DegenerateDensity(h.grid()[i]));
        }
    }
    Ok(())
}

/// Grid indices used by `Sampling::Grid`.
fn strided(len: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

#[derive(Clone, Copy)]
struct Worst {
    margin: f64,
    at: [f64; 4],
    reason: Option<&'static str>,
}

impl Worst {
    fn none() -> Self {
        Worst { margin: f64::INFINITY, at: [f64::NAN; 4], reason: None }
    }
    fn min(self, other: Worst) -> Worst {
        if other.margin < self.margin || (other.margin == self.margin && other.at < self.at) {
            other
        } else {
            self
        }
    }
}

/// `(lhs - rhs) / rhs`, with `inf * 0 = 0` on the right-hand side.
fn relative_slack(lhs: f64, c0: f64, g0: f64, c1: f64, g1: f64) -> (f64, Option<&'static str>) {
    let term = |c: f64, g: f64| if g == 0.0 { 0.0 } else { c * g };
    let rhs = term(c0, g0) + term(c1, g1);
    if rhs.is_infinite() {
        return (f64::NEG_INFINITY, Some("interval longer than the Bonnet-Myers bound for K"));
    }
    ((lhs - rhs) / rhs.abs().max(TINY), None)
}

/// One-dimensional CD(K, N) test of `h` on triples `(t0, t1, s)`.
pub fn cd_density_check(h: &Density1D, k: f64, n: f64, sampling: &Sampling, rel_tol: f64) -> Result<CDReport> {
    validate(k, n)?;
    check_degenerate(h)?;
    if n == 1.0 {
        return Ok(constant_check(h, rel_tol));
    }
    let grid = h.grid();
    let g: Vec<f64> = h.values().iter().map(|v| v.powf(1.0 / (n - 1.0))).collect();
    let eval_triple = |i: usize, j: usize, m: usize| -> Worst {
        let (t0, t1, tm) = (grid[i], grid[j], grid[m]);
        let s = (tm - t0) / (t1 - t0);
        let theta = t1 - t0;
        let (margin, reason) =
            relative_slack(g[m], sigma(k, n - 1.0, 1.0 - s, theta), g[i], sigma(k, n - 1.0, s, theta), g[j]);
        Worst { margin, at: [t0, t1, s, 0.0], reason }
    };
    let (worst, tested) = match sampling {
        Sampling::Grid { stride } => {
            let idx = strided(grid.len(), *stride);
            let w = (0..idx.len())
                .into_par_iter()
                .map(|a| {
                    let mut w = Worst::none();
                    for b in (a + 2)..idx.len() {
                        for c in (a + 1)..b {
                            w = w.min(eval_triple(idx[a], idx[b], idx[c]));
                        }
                    }
                    w
                })
                .reduce(Worst::none, Worst::min);
            let m = idx.len();
            (w, m * (m - 1) * (m.saturating_sub(2)) / 6)
        }
        Sampling::Random { count, seed } => {
            let len = grid.len();
            if len < 3 {
                return Err(Error::BadDensity("need at least three grid points".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let triples: Vec<(usize, usize, usize)> = (0..*count)
                .map(|_| {
                    let i = rng.gen_range(0..len - 2);
                    let j = rng.gen_range(i + 2..len);
                    let m = rng.gen_range(i + 1..j);
                    (i, j, m)
                })
                .collect();
            let w = triples.par_iter().map(|&(i, j, m)| eval_triple(i, j, m)).reduce(Worst::none, Worst::min);
            (w, *count)
        }
        Sampling::Explicit { tuples } => {
            let mut w = Worst::none();
            for tuple in tuples {
                let [t0, t1, s] = tuple[..] else {
                    return Err(Error::InvalidInput("CD triples are (t0, t1, s)".into()));
                };
                if !(t0 < t1 && (0.0..=1.0).contains(&s)) {
                    return Err(Error::InvalidInput(format!("bad triple ({t0}, {t1}, {s})")));
                }
                let gm = interpolate(grid, &g, (1.0 - s) * t0 + s * t1);
                let (margin, reason) = relative_slack(
                    gm,
                    sigma(k, n - 1.0, 1.0 - s, t1 - t0),
                    interpolate(grid, &g, t0),
                    sigma(k, n - 1.0, s, t1 - t0),
                    interpolate(grid, &g, t1),
                );
                w = w.min(Worst { margin, at: [t0, t1, s, 0.0], reason });
            }
            (w, tuples.len())
        }
    };
    Ok(finish_cd(worst, tested, rel_tol))
}

fn finish_cd(w: Worst, tested: usize, rel_tol: f64) -> CDReport {
    let found = w.margin.is_finite() || w.margin == f64::NEG_INFINITY;
    CDReport {
        verdict: if w.margin < -rel_tol { Verdict::Fail } else { Verdict::Pass },
        margin: if found { w.margin } else { 0.0 },
        worst_triple: if found { Some([w.at[0], w.at[1], w.at[2]]) } else { None },
        tested,
        reason: w.reason.map(str::to_string),
    }
}

/// `N = 1`: the density must be constant.
fn constant_check(h: &Density1D, rel_tol: f64) -> CDReport {
    let v = h.values();
    let top = v.iter().cloned().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0, 0);
    for i in 0..v.len() {
        if v[i] < v[lo] {
            lo = i;
        }
        if v[i] > v[hi] {
            hi = i;
        }
    }
    let margin = -(v[hi] - v[lo]) / top.max(TINY);
    CDReport {
        verdict: if margin < -rel_tol { Verdict::Fail } else { Verdict::Pass },
        margin,
        worst_triple: Some([h.grid()[lo.min(hi)], h.grid()[lo.max(hi)], 0.0]),
        tested: v.len(),
        reason: (margin < -rel_tol).then(|| "N = 1 requires a constant density".to_string()),
    }
}

/// Two-sided MCP(K, N) density bounds
/// `(S(sp - tau) / S(sp - s))^{N-1} <= h(tau) / h(s) <= (S(tau - sm) / S(s - sm))^{N-1}`
/// for `sm < s <= tau < sp`, where `S` is the generalized sine.
pub fn mcp_density_check(h: &Density1D, k: f64, n: f64, sampling: &Sampling, rel_tol: f64) -> Result<MCPReport> {
    validate(k, n)?;
    check_degenerate(h)?;
    if n == 1.0 {
        let c = constant_check(h, rel_tol);
        return Ok(MCPReport {
            verdict: c.verdict,
            margin: c.margin,
            worst_quadruple: None,
            tested: c.tested,
            reason: c.reason,
        });
    }
    let grid = h.grid();
    let vals = h.values();
    let e = n - 1.0;
    let quad = |s: f64, t: f64, sm: f64, sp: f64, hs: f64, ht: f64| -> Worst {
        if k > 0.0 && (sp - sm) * (k / e).sqrt() > PI {
            return Worst {
                margin: f64::NEG_INFINITY,
                at: [s, t, sm, sp],
                reason: Some("interval longer than the Bonnet-Myers bound for K"),
            };
        }
        // lower: h(t) S(sp - s)^e >= S(sp - t)^e h(s)
        let lo_rhs = generalized_sine(k, n, sp - t).powf(e) * hs;
        let lo = (ht * generalized_sine(k, n, sp - s).powf(e) - lo_rhs) / lo_rhs.abs().max(TINY);
        // upper: S(t - sm)^e h(s) >= h(t) S(s - sm)^e
        let up_rhs = ht * generalized_sine(k, n, s - sm).powf(e);
        let up = (generalized_sine(k, n, t - sm).powf(e) * hs - up_rhs) / up_rhs.abs().max(TINY);
        Worst { margin: lo.min(up), at: [s, t, sm, sp], reason: None }
    };
    let by_index = |i: usize, j: usize, a: usize, b: usize| quad(grid[i], grid[j], grid[a], grid[b], vals[i], vals[j]);
    let (worst, tested) = match sampling {
        Sampling::Grid { stride } => {
            let idx = strided(grid.len(), *stride);
            let m = idx.len();
            let (w, count) = (0..m)
                .into_par_iter()
                .map(|a| {
                    let mut w = Worst::none();
                    let mut count = 0;
                    for i in (a + 1)..m {
                        for j in i..m {
                            for b in (j + 1)..m {
                                w = w.min(by_index(idx[i], idx[j], idx[a], idx[b]));
                                count += 1;
                            }
                        }
                    }
                    (w, count)
                })
                .reduce(|| (Worst::none(), 0), |x, y| (x.0.min(y.0), x.1 + y.1));
            (w, count)
        }
        Sampling::Random { count, seed } => {
            let len = grid.len();
            if len < 3 {
                return Err(Error::BadDensity("need at least three grid points".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let quads: Vec<[usize; 4]> = (0..*count)
                .map(|_| {
                    let mut q = [
                        rng.gen_range(0..len),
                        rng.gen_range(0..len),
                        rng.gen_range(0..len),
                        rng.gen_range(0..len),
                    ];
                    q.sort_unstable();
                    // sm < s <= tau < sp
                    if q[0] == q[1] {
                        q[1] = (q[1] + 1).min(len - 2);
                    }
                    if q[2] < q[1] {
                        q[2] = q[1];
                    }
                    if q[3] <= q[2] {
                        q[3] = (q[2] + 1).min(len - 1);
                    }
                    q
                })
                .filter(|q| q[0] < q[1] && q[1] <= q[2] && q[2] < q[3])
                .collect();
            let w = quads.par_iter().map(|q| by_index(q[1], q[2], q[0], q[3])).reduce(Worst::none, Worst::min);
            (w, quads.len())
        }
        Sampling::Explicit { tuples } => {
            let mut w = Worst::none();
            for tuple in tuples {
                let [s, t, sm, sp] = tuple[..] else {
                    return Err(Error::InvalidInput("MCP quadruples are (s, tau, sigma_minus, sigma_plus)".into()));
                };
                if !(sm < s && s <= t && t < sp) {
                    return Err(Error::InvalidInput(format!("bad quadruple ({s}, {t}, {sm}, {sp})")));
                }
                w = w.min(quad(s, t, sm, sp, h.eval(s), h.eval(t)));
            }
            (w, tuples.len())
        }
    };
    let found = worst.margin.is_finite() || worst.margin == f64::NEG_INFINITY;
    Ok(MCPReport {
        verdict: if worst.margin < -rel_tol { Verdict::Fail } else { Verdict::Pass },
        margin: if found { worst.margin } else { 0.0 },
        worst_quadruple: found.then_some(worst.at),
        tested,
        reason: worst.reason.map(str::to_string),
    })
}

/// Standard bump `exp(-1 / (1 - x^2))` moved to `(0, 1)`, unnormalized.
fn bump(u: f64) -> f64 {
    let x = 2.0 * u - 1.0;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Composite Simpson weights for `m` (even) intervals on `[0, 1]`.
fn simpson_weights(m: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    (0..=m)
        .map(|i| {
            let c = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// `h_eps = [h^{1/(N-1)} * psi_eps]^{N-1}` with `psi` a smooth bump
/// supported in `[0, 1]` and `h` extended by zero. The output grid is the
/// input grid extended by its mesh to `[a - eps, b + eps]`; the convolution
/// uses composite Simpson with step at most a tenth of the input mesh.
pub fn mollify_density(h: &Density1D, n: f64, eps: f64) -> Result<Density1D> {
    if !(n > 1.0) || !n.is_finite() {
        return Err(Error::BadDimension(n));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let (a, b) = h.domain();
    let mesh = h.mesh();
    let g: Vec<f64> = h.values().iter().map(|v| v.powf(1.0 / (n - 1.0))).collect();
    let mut m = ((10.0 * eps / mesh).ceil() as usize).max(2);
    m += m % 2;
    let sw = simpson_weights(m);
    let nodes: Vec<(f64, f64)> = (0..=m)
        .map(|i| {
            let u = i as f64 / m as f64;
            (u, sw[i] * bump(u))
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let norm: f64 = nodes.iter().map(|&(_, w)| w).sum();

    let extra = (eps / mesh).ceil() as usize;
    let step_left = eps / extra as f64;
    let mut grid: Vec<f64> = (0..extra).map(|i| a - eps + step_left * i as f64).collect();
    grid.extend_from_slice(h.grid());
    grid.extend((1..=extra).map(|i| if i == extra { b + eps } else { b + step_left * i as f64 }));

    let src = h.grid();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&t| {
            let conv: f64 = nodes.iter().map(|&(u, w)| w * interpolate(src, &g, t - eps * u)).sum::<f64>() / norm;
            conv.max(0.0).powf(n - 1.0)
        })
        .collect();
    Density1D::new(grid, values)
}

/// `int |f - g|` over the union of the two domains, both extended by zero,
/// by the trapezoid rule on the merged grid.
pub fn l1_distance(f: &Density1D, g: &Density1D) -> f64 {
    let mut ts: Vec<f64> = f.grid().iter().chain(g.grid()).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.windows(2)
        .map(|w| {
            let d0 = (f.eval(w[0]) - g.eval(w[0])).abs();
            let d1 = (f.eval(w[1]) - g.eval(w[1])).abs();
            0.5 * (d0 + d1) * (w[1] - w[0])
        })
        .sum()
}

/// Restriction of a density to the nodes inside `[lo, hi]`.
pub fn restrict(h: &Density1D, lo: f64, hi: f64) -> Result<Density1D> {
    let (grid, values): (Vec<f64>, Vec<f64>) =
        h.grid().iter().zip(h.values()).filter(|(&t, _)| t >= lo && t <= hi).map(|(&t, &v)| (t, v)).unzip();
    Density1D::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_power(n: f64, a: f64, b: f64, pts: usize) -> Density1D {
        Density1D::from_fn(a, b, pts, |t| t.sin().max(0.0).powf(n - 1.0)).unwrap()
    }

    #[test]
    fn sigma_cases() {
        assert_eq!(sigma(0.0, 5.0, 0.3, 2.0), 0.3);
        assert_eq!(sigma(4.0, 1.0, 0.5, PI), f64::INFINITY);
        assert!((sigma(1.0, 1.0, 0.5, PI / 2.0) - 0.5f64.sqrt()).abs() < 1e-10);
        // N = 0 with negative curvature
        assert_eq!(sigma(-1.0, 0.0, 0.25, 1.0), 0.25);
        // hyperbolic branch against its closed form
        let v = sigma(-2.0, 2.0, 0.4, 1.5);
        assert!((v - (0.6f64).sinh() / (1.5f64).sinh()).abs() < 1e-15);
    }

    #[test]
    fn tau_cases() {
        for &(n, t, th) in &[(2.0, 0.3, 1.0), (5.0, 0.9, 3.0), (1.0, 0.2, 7.0)] {
            assert!((tau(0.0, n, t, th) - t).abs() < 1e-15);
        }
        assert!((tau(2.0, 3.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        let direct = 0.5f64.powf(1.0 / 3.0) * ((0.5f64).sin() / 1f64.sin()).powf(2.0 / 3.0);
        assert!((tau(2.0, 3.0, 0.5, 1.0) - direct).abs() < 1e-15);
        assert!((tau(2.0, 3.0, 0.5, 1.0) - 0.545_479).abs() < 1e-6);
        assert_eq!(tau(1.0, 1.0, 0.5, 1.0), f64::INFINITY);
        assert_eq!(tau(-1.0, 1.0, 0.5, 1.0), 0.5);
    }

    #[test]
    fn model_passes() {
        for &n in &[2.0, 3.0, 5.0] {
            let h = sin_power(n, 0.01, PI - 0.01, 601);
            let r = cd_density_check(&h, n - 1.0, n, &Sampling::Grid { stride: 6 }, DEFAULT_REL_TOL).unwrap();
            assert!(r.verdict.passed(), "N={n}: {r:?}");
            assert!(r.margin >= -1e-9);
        }
    }

    #[test]
    fn flat_density_fails_positive_curvature() {
        let h = Density1D::from_fn(0.0, 3.0, 301, |_| 1.0).unwrap();
        let r = cd_density_check(&h, 1.0, 2.0, &Sampling::Grid { stride: 1 }, DEFAULT_REL_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let [t0, t1, s] = r.worst_triple.unwrap();
        assert!(t0.abs() < 1e-12 && (t1 - 3.0).abs() < 1e-12 && (s - 0.5).abs() < 1e-9);
        let rhs = 2.0 * (1.5f64).sin() / (3.0f64).sin();
        assert!((rhs - 14.1).abs() < 0.05);
        assert!((r.margin - (1.0 - rhs) / rhs).abs() < 1e-9);
        let e = cd_density_check(
            &h,
            1.0,
            2.0,
            &Sampling::Explicit { tuples: vec![vec![0.0, 3.0, 0.5]] },
            DEFAULT_REL_TOL,
        )
        .unwrap();
        assert!((e.margin - r.margin).abs() < 1e-12);
    }

    #[test]
    fn flat_density_flat_curvature() {
        let h = Density1D::from_fn(0.0, 2.0, 101, |_| 0.7).unwrap();
        for n in [1.0, 2.0, 4.5] {
            let r = cd_density_check(&h, 0.0, n, &Sampling::Grid { stride: 2 }, DEFAULT_REL_TOL).unwrap();
            assert!(r.verdict.passed());
        }
    }

    #[test]
    fn scale_equivariance() {
        let h = Density1D::from_fn(0.0, 2.0, 201, |t| 1.0 + t * (2.0 - t)).unwrap();
        let s = Sampling::Random { count: 2000, seed: 3 };
        let a = cd_density_check(&h, 0.5, 3.0, &s, DEFAULT_REL_TOL).unwrap();
        let b = cd_density_check(&h.scaled(17.0).unwrap(), 0.5, 3.0, &s, DEFAULT_REL_TOL).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert!((a.margin - b.margin).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_requires_constant() {
        let h = Density1D::from_fn(0.0, 1.0, 50, |t| 1.0 + t).unwrap();
        let r = cd_density_check(&h, 0.0, 1.0, &Sampling::Grid { stride: 1 }, DEFAULT_REL_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn interior_zero_is_degenerate() {
        let h = Density1D::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            cd_density_check(&h, 0.0, 2.0, &Sampling::Grid { stride: 1 }, DEFAULT_REL_TOL),
            Err(Error::DegenerateDensity(t)) if t == 1.0
        ));
    }

    #[test]
    fn sigma_second_difference() {
        let (k, n, theta) = (2.0, 3.0, 1.7);
        let f = |s: f64| sigma(k, n, s, theta);
        let residual = |ds: f64| {
            let mut worst = 0.0f64;
            let mut s = ds;
            while s <= 1.0 - ds {
                let d2 = (f(s + ds) - 2.0 * f(s) + f(s - ds)) / (ds * ds);
                worst = worst.max((d2 + theta * theta * k / n * f(s)).abs());
                s += ds;
            }
            worst
        };
        let (r1, r2, r3) = (residual(0.02), residual(0.01), residual(0.005));
        assert!(r1 / r2 >= 3.5 && r2 / r3 >= 3.5, "{r1} {r2} {r3}");
    }

    #[test]
    fn mcp_model_and_spike() {
        let n = 3.0;
        let h = sin_power(n, 0.0, PI, 401);
        let r = mcp_density_check(&h, n - 1.0, n, &Sampling::Random { count: 10_000, seed: 9 }, DEFAULT_REL_TOL)
            .unwrap();
        assert!(r.verdict.passed(), "{r:?}");
        let mut v = h.values().to_vec();
        v[200] *= 10.0;
        let spiked = Density1D::new(h.grid().to_vec(), v).unwrap();
        let r = mcp_density_check(&spiked, n - 1.0, n, &Sampling::Grid { stride: 10 }, DEFAULT_REL_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn mcp_equal_points() {
        let h = sin_power(2.0, 0.0, PI, 101);
        let r = mcp_density_check(
            &h,
            1.0,
            2.0,
            &Sampling::Explicit { tuples: vec![vec![1.0, 1.0, 0.5, 2.0]] },
            DEFAULT_REL_TOL,
        )
        .unwrap();
        assert!(r.verdict.passed());
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn mollified_constant_stays_constant() {
        let h = Density1D::from_fn(0.0, 2.0, 201, |_| 1.0).unwrap();
        let eps = 0.1;
        let m = mollify_density(&h, 2.0, eps).unwrap();
        let (a, b) = m.domain();
        assert!(a >= -eps - 1e-15 && b <= 2.0 + eps + 1e-15);
        for (&t, &v) in m.grid().iter().zip(m.values()) {
            if t >= eps && t <= 2.0 {
                assert!((v - 1.0).abs() < 1e-12, "t={t} v={v}");
            }
            if t < 0.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn mollifier_l1_decreases() {
        let h = Density1D::from_fn(0.0, PI, 2001, |t| t.sin().powi(2)).unwrap();
        let errs: Vec<f64> =
            [0.1, 0.05, 0.025].iter().map(|&e| l1_distance(&mollify_density(&h, 3.0, e).unwrap(), &h)).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
