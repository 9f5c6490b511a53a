//! Disintegration of a measure over a ray decomposition, with the
//! consistency identity and the per-ray balance of mean-zero functions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rays::RayDecomposition;

/// Largest admissible `|sum f dm|` for a mean-zero function.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disintegration {
    /// Measure of each ray.
    pub quotient_weights: Vec<f64>,
    /// Conditional probabilities, aligned with the points of each ray.
    /// Empty for rays of zero measure.
    pub conditionals: Vec<Vec<f64>>,
    /// Measure carried by points on no ray.
    pub residual_mass: f64,
    /// Rays whose measure is zero.
    pub zero_mass_rays: Vec<usize>,
    /// Largest single-point conditional mass per ray.
    pub max_atom: Vec<f64>,
}

fn check_measure(decomposition: &RayDecomposition, measure: &[f64]) -> Result<()> {
    if measure.len() != decomposition.ray_of.len() {
        return Err(Error::InvalidInput(format!(
            "measure has {} entries for {} points",
            measure.len(),
            decomposition.ray_of.len()
        )));
    }
    if measure.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidInput("measure must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Restricts `measure` to each ray and renormalizes.
pub fn disintegrate(decomposition: &RayDecomposition, measure: &[f64]) -> Result<Disintegration> {
    check_measure(decomposition, measure)?;
    let mut quotient_weights = Vec::with_capacity(decomposition.rays.len());
    let mut conditionals = Vec::with_capacity(decomposition.rays.len());
    let mut zero_mass_rays = Vec::new();
    let mut max_atom = Vec::with_capacity(decomposition.rays.len());
    for ray in &decomposition.rays {
        let q: f64 = ray.points.iter().map(|&p| measure[p]).sum();
        quotient_weights.push(q);
        if q > 0.0 {
            let c: Vec<f64> = ray.points.iter().map(|&p| measure[p] / q).collect();
            max_atom.push(c.iter().cloned().fold(0.0, f64::max));
            conditionals.push(c);
        } else {
            zero_mass_rays.push(ray.id);
            max_atom.push(0.0);
            conditionals.push(Vec::new());
        }
    }
    let residual_mass = (0..measure.len())
        .filter(|&x| decomposition.ray_of[x].is_none())
        .map(|x| measure[x])
        .sum();
    Ok(Disintegration { quotient_weights, conditionals, residual_mass, zero_mass_rays, max_atom })
}

/// Largest `|m(B n Q^-1(C)) - sum_{q in C} q(q) m_q(B)|` over the given
/// pairs, where `B` is a point indicator and `C` a list of ray indices.
pub fn check_consistency(
    decomposition: &RayDecomposition,
    disintegration: &Disintegration,
    measure: &[f64],
    pairs: &[(Vec<bool>, Vec<usize>)],
) -> f64 {
    pairs
        .par_iter()
        .map(|(b, c)| {
            let mut in_c = vec![false; decomposition.rays.len()];
            for &q in c {
                in_c[q] = true;
            }
            let lhs: f64 = (0..measure.len())
                .filter(|&x| b[x] && decomposition.ray_of[x].is_some_and(|q| in_c[q]))
                .map(|x| measure[x])
                .sum();
            let rhs: f64 = c
                .iter()
                .map(|&q| {
                    let cond = &disintegration.conditionals[q];
                    let mq_b: f64 = decomposition.rays[q]
                        .points
                        .iter()
                        .zip(cond)
                        .filter(|(&p, _)| b[p])
                        .map(|(_, &w)| w)
                        .sum();
                    disintegration.quotient_weights[q] * mq_b
                })
                .sum();
            (lhs - rhs).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// `count` random pairs `(B, C)`: each point and each ray is included
/// independently with probability one half.
pub fn random_test_pairs<R: Rng>(
    decomposition: &RayDecomposition,
    count: usize,
    rng: &mut R,
) -> Vec<(Vec<bool>, Vec<usize>)> {
    let n = decomposition.ray_of.len();
    (0..count)
        .map(|_| {
            let b: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let c: Vec<usize> = (0..decomposition.rays.len()).filter(|_| rng.gen_bool(0.5)).collect();
            (b, c)
        })
        .collect()
}

/// Pointwise `max |sum_q q(q) m_q(x) + residual(x) - m(x)|`.
pub fn reconstruction_error(decomposition: &RayDecomposition, disintegration: &Disintegration, measure: &[f64]) -> f64 {
    let mut rebuilt: Vec<f64> =
        (0..measure.len()).map(|x| if decomposition.ray_of[x].is_none() { measure[x] } else { 0.0 }).collect();
    for (q, ray) in decomposition.rays.iter().enumerate() {
        for (&p, &w) in ray.points.iter().zip(&disintegration.conditionals[q]) {
            rebuilt[p] += disintegration.quotient_weights[q] * w;
        }
    }
    rebuilt.iter().zip(measure).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// `sum_{x in ray} f(x) m(x)` per ray.
    pub per_ray: Vec<f64>,
    pub max_abs: f64,
    /// `sum_q q(q) |int f dm_q|`.
    pub weighted_mean: f64,
}

/// Per-ray integrals of `f` against `m`. `f` must have zero mean.
pub fn check_balance(decomposition: &RayDecomposition, weights: &[f64], f: &[f64]) -> Result<BalanceReport> {
    check_measure(decomposition, weights)?;
    if f.len() != weights.len() || f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("f must be finite with one value per point".into()));
    }
    let total: f64 = f.iter().zip(weights).map(|(a, b)| a * b).sum();
    if total.abs() > MEAN_ZERO_TOL {
        return Err(Error::NotMeanZero(total));
    }
    let per_ray: Vec<f64> =
        decomposition.rays.iter().map(|r| r.points.iter().map(|&p| f[p] * weights[p]).sum()).collect();
    Ok(BalanceReport {
        max_abs: per_ray.iter().map(|v| v.abs()).fold(0.0, f64::max),
        weighted_mean: per_ray.iter().map(|v| v.abs()).sum(),
        per_ray,
    })
}

/// Source and target marginals of the transport problem attached to a
/// mean-zero `f`: `f+ m` and `f- m`, each normalized.
pub fn balance_marginals(weights: &[f64], f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let pos: Vec<f64> = f.iter().zip(weights).map(|(v, w)| v.max(0.0) * w).collect();
    let neg: Vec<f64> = f.iter().zip(weights).map(|(v, w)| (-v).max(0.0) * w).collect();
    let (sp, sn): (f64, f64) = (pos.iter().sum(), neg.iter().sum());
    if !(sp > 0.0 && sn > 0.0) {
        return Err(Error::InvalidInput("f must take both signs".into()));
    }
    if (sp - sn).abs() > MEAN_ZERO_TOL {
        return Err(Error::NotMeanZero(sp - sn));
    }
    Ok((pos.iter().map(|v| v / sp).collect(), neg.iter().map(|v| v / sn).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::{generate_interval_model, MMSpace};
    use crate::rays::{build_transport_structure, partition_rays};
    use crate::w1solve::{default_tol, gamma_set, solve_w1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decompose_balance(space: &MMSpace, f: &[f64]) -> RayDecomposition {
        let (mu0, mu1) = balance_marginals(space.weights(), f).unwrap();
        let sol = solve_w1(space, &mu0, &mu1).unwrap();
        let g = gamma_set(space, &sol, default_tol(space)).unwrap();
        partition_rays(space, &build_transport_structure(g), &sol)
    }

    fn interval_split(n: usize, r: f64) -> (MMSpace, Vec<f64>) {
        let (s, _) = generate_interval_model(1.0, 2.0, std::f64::consts::PI, n).unwrap();
        let w = s.weights();
        let coords = s.coords().unwrap();
        let v: f64 = (0..n).filter(|&i| coords[i] <= r).map(|i| w[i]).sum();
        let f: Vec<f64> = coords.iter().map(|&t| if t <= r { 1.0 - v } else { -v }).collect();
        (s, f)
    }

    fn grid(w: usize, h: usize) -> (MMSpace, Vec<f64>) {
        let pts: Vec<[f64; 2]> =
            (0..h).flat_map(|r| (0..w).map(move |c| [c as f64 / w as f64, r as f64])).collect();
        let s = MMSpace::planar(&pts, None).unwrap();
        let f = pts.iter().map(|p| if p[0] < 0.5 { 1.0 } else { -1.0 }).collect();
        (s, f)
    }

    #[test]
    fn single_ray_interval() {
        let (s, f) = interval_split(200, 1.0);
        let rd = decompose_balance(&s, &f);
        assert_eq!(rd.rays.len(), 1);
        let d = disintegrate(&rd, s.weights()).unwrap();
        assert!((d.quotient_weights[0] - 1.0).abs() < 1e-12);
        for (&p, &c) in rd.rays[0].points.iter().zip(&d.conditionals[0]) {
            assert!((c - s.weights()[p]).abs() < 1e-12);
        }
        let b = check_balance(&rd, s.weights(), &f).unwrap();
        assert!(b.max_abs < 1e-12);
    }

    #[test]
    fn grid_rows_uniform() {
        let (s, f) = grid(10, 6);
        let rd = decompose_balance(&s, &f);
        assert_eq!(rd.rays.len(), 6);
        let d = disintegrate(&rd, s.weights()).unwrap();
        for (q, c) in d.quotient_weights.iter().zip(&d.conditionals) {
            assert!((q - 10.0 / 60.0).abs() < 1e-12);
            assert!(c.iter().all(|&v| (v - 0.1).abs() < 1e-12));
        }
        assert_eq!(d.residual_mass, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs = random_test_pairs(&rd, 100, &mut rng);
        assert!(check_consistency(&rd, &d, s.weights(), &pairs) <= 1e-12);
        assert!(reconstruction_error(&rd, &d, s.weights()) <= 1e-12);
        assert!(check_balance(&rd, s.weights(), &f).unwrap().max_abs <= 1e-12);
    }

    #[test]
    fn trivial_consistency_sets() {
        let (s, f) = grid(8, 3);
        let rd = decompose_balance(&s, &f);
        let d = disintegrate(&rd, s.weights()).unwrap();
        let all = (vec![true; s.len()], (0..rd.rays.len()).collect());
        let none = (vec![false; s.len()], (0..rd.rays.len()).collect());
        assert!(check_consistency(&rd, &d, s.weights(), &[all, none]) <= 1e-15);
    }

    #[test]
    fn measure_off_transport_set() {
        let (s, f) = grid(8, 3);
        let rd = decompose_balance(&s, &f);
        // an isolated point carrying all the mass
        let mut pts: Vec<[f64; 2]> = (0..3).flat_map(|r| (0..8).map(move |c| [c as f64 / 8.0, r as f64])).collect();
        pts.push([50.0, 50.0]);
        let mut ray_of = rd.ray_of.clone();
        ray_of.push(None);
        let rd2 = RayDecomposition { ray_of, ..rd };
        let mut m = vec![0.0; pts.len()];
        m[24] = 1.0;
        let d = disintegrate(&rd2, &m).unwrap();
        assert_eq!(d.residual_mass, 1.0);
        assert_eq!(d.zero_mass_rays.len(), rd2.rays.len());
        assert!(d.conditionals.iter().all(|c| c.is_empty()));
    }

    #[test]
    fn zero_function_balances() {
        let (s, f) = grid(6, 2);
        let rd = decompose_balance(&s, &f);
        let b = check_balance(&rd, s.weights(), &vec![0.0; s.len()]).unwrap();
        assert!(b.per_ray.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn not_mean_zero() {
        let (s, f) = grid(6, 2);
        let rd = decompose_balance(&s, &f);
        assert!(matches!(check_balance(&rd, s.weights(), &vec![1.0; s.len()]), Err(Error::NotMeanZero(_))));
    }

    #[test]
    fn interval_balance_nonincreasing() {
        let mut prev = f64::INFINITY;
        for n in [250, 500, 1000] {
            let (s, f) = interval_split(n, 1.0);
            let rd = decompose_balance(&s, &f);
            let b = check_balance(&rd, s.weights(), &f).unwrap();
            assert!(b.max_abs <= prev.max(1e-12));
            prev = b.max_abs;
        }
    }
}
