//! Monotone rearrangement on the line and its gluing along transport rays
//! into a coupling of the whole space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::MMSpace;
use crate::rays::RayDecomposition;
use crate::w1solve::{cost_units, PlanEntry, W1Solution, MASS_UNITS};

/// A point mass on the line, with mass in integer units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMap1D {
    /// Sorted by position.
    pub source_atoms: Vec<Atom>,
    pub target_atoms: Vec<Atom>,
    /// `(i, j, units)` into the sorted atom lists.
    pub assignment: Vec<(usize, usize, u64)>,
    /// No source atom is split between two targets.
    pub is_map: bool,
}

impl MonotoneMap1D {
    /// `sum units * |s - t|`, with mass in probability units.
    pub fn cost(&self) -> f64 {
        self.assignment
            .iter()
            .map(|&(i, j, u)| {
                u as f64 / MASS_UNITS as f64 * (self.target_atoms[j].position - self.source_atoms[i].position).abs()
            })
            .sum()
    }
}

fn sorted(atoms: &[Atom]) -> Vec<Atom> {
    let mut v: Vec<Atom> = atoms.iter().copied().filter(|a| a.units > 0).collect();
    v.sort_by(|a, b| a.position.total_cmp(&b.position));
    v
}

/// The quantile coupling: both atom lists are swept in increasing order and
/// mass is matched greedily.
pub fn monotone_rearrangement(source: &[Atom], target: &[Atom]) -> Result<MonotoneMap1D> {
    if source.iter().chain(target).any(|a| !a.position.is_finite()) {
        return Err(Error::InvalidInput("atom positions must be finite".into()));
    }
    let source_mass: u64 = source.iter().map(|a| a.units).sum();
    let target_mass: u64 = target.iter().map(|a| a.units).sum();
    if source_mass != target_mass {
        return Err(Error::MassMismatch { source_mass, target_mass });
    }
    let source_atoms = sorted(source);
    let target_atoms = sorted(target);
    let mut assignment = Vec::with_capacity(source_atoms.len() + target_atoms.len());
    let (mut i, mut j) = (0, 0);
    let mut left_s = source_atoms.first().map_or(0, |a| a.units);
    let mut left_t = target_atoms.first().map_or(0, |a| a.units);
    let mut is_map = true;
    let mut targets_of_i = 0;
    while i < source_atoms.len() && j < target_atoms.len() {
        let m = left_s.min(left_t);
        assignment.push((i, j, m));
        targets_of_i += 1;
        if targets_of_i > 1 {
            is_map = false;
        }
        left_s -= m;
        left_t -= m;
        if left_s == 0 {
            i += 1;
            targets_of_i = 0;
            if i < source_atoms.len() {
                left_s = source_atoms[i].units;
            }
        }
        if left_t == 0 {
            j += 1;
            if j < target_atoms.len() {
                left_t = target_atoms[j].units;
            }
        }
    }
    Ok(MonotoneMap1D { source_atoms, target_atoms, assignment, is_map })
}

/// Atoms from positions and probability masses, quantized so the total is
/// exactly `MASS_UNITS`.
pub fn atoms_from_masses(positions: &[f64], masses: &[f64]) -> Vec<Atom> {
    crate::w1solve::quantize_masses(masses)
        .into_iter()
        .zip(positions)
        .map(|(units, &position)| Atom { position, units })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
    pub units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MongeCoupling {
    pub coupling: Vec<CouplingEntry>,
    pub cost: f64,
    /// `sum units * round(d * COST_SCALE)`, comparable with the solver.
    pub cost_units: i128,
    pub is_map: bool,
    pub per_ray_costs: Vec<f64>,
    /// `|mu0(ray) - mu1(ray)|` per ray, before conditioning through the plan.
    pub ray_marginal_defects: Vec<f64>,
    /// Mass coupled directly through the plan because it leaves or enters
    /// the rays.
    pub off_ray_mass: f64,
}

/// Glues per-ray monotone rearrangements into a coupling of `mu0` and
/// `mu1`. On each ray the source is `mu0` restricted to the ray and the
/// target is the image of that mass under the plan; plan mass whose source
/// or target lies off the rays is kept as is.
pub fn assemble_monge_map(
    space: &MMSpace,
    decomposition: &RayDecomposition,
    solution: &W1Solution,
    mu1: &[f64],
) -> Result<MongeCoupling> {
    let nrays = decomposition.rays.len();
    let position = |x: usize| -> f64 { decomposition.param(x).expect("point on a ray") };
    let mut sources: Vec<Vec<Atom>> = vec![Vec::new(); nrays];
    let mut targets: Vec<Vec<Atom>> = vec![Vec::new(); nrays];
    let mut direct: Vec<PlanEntry> = Vec::new();
    for e in &solution.plan {
        match (decomposition.ray_of[e.source], decomposition.ray_of[e.target]) {
            (Some(a), Some(b)) if a == b => {
                sources[a].push(Atom { position: position(e.source), units: e.units });
                targets[a].push(Atom { position: position(e.target), units: e.units });
            }
            _ => direct.push(*e),
        }
    }

    let mut mu0_ray = vec![0u64; nrays];
    for e in &solution.plan {
        if let Some(a) = decomposition.ray_of[e.source] {
            mu0_ray[a] += e.units;
        }
    }
    let mu1_total: f64 = mu1.iter().sum();
    let ray_marginal_defects: Vec<f64> = decomposition
        .rays
        .iter()
        .map(|r| {
            let m1: f64 = r.points.iter().map(|&p| mu1[p] / mu1_total).sum();
            (mu0_ray[r.id] as f64 / MASS_UNITS as f64 - m1).abs()
        })
        .collect();

    let per_ray: Vec<Result<(Vec<CouplingEntry>, f64, bool)>> = (0..nrays)
        .into_par_iter()
        .map(|q| {
            let s_units: u64 = sources[q].iter().map(|a| a.units).sum();
            let t_units: u64 = targets[q].iter().map(|a| a.units).sum();
            if s_units != t_units {
                return Err(Error::RayMarginalMismatch {
                    ray: q,
                    source_mass: s_units as f64 / MASS_UNITS as f64,
                    target_mass: t_units as f64 / MASS_UNITS as f64,
                });
            }
            let map = monotone_rearrangement(&merge(&sources[q]), &merge(&targets[q]))?;
            let ray = &decomposition.rays[q];
            let point_at = |t: f64| -> usize {
                // params increase along the ray
                ray.points[ray.params.partition_point(|&p| p < t)]
            };
            let entries: Vec<CouplingEntry> = map
                .assignment
                .iter()
                .map(|&(i, j, u)| CouplingEntry {
                    from: point_at(map.source_atoms[i].position),
                    to: point_at(map.target_atoms[j].position),
                    mass: u as f64 / MASS_UNITS as f64,
                    units: u,
                })
                .collect();
            Ok((entries, map.cost(), map.is_map))
        })
        .collect();

    let mut coupling = Vec::new();
    let mut per_ray_costs = Vec::with_capacity(nrays);
    let mut is_map = true;
    for r in per_ray {
        let (entries, cost, m) = r?;
        coupling.extend(entries);
        per_ray_costs.push(cost);
        is_map &= m;
    }
    let off_ray_mass = direct.iter().filter(|e| e.source != e.target).map(|e| e.mass).sum();
    coupling.extend(direct.iter().map(|e| CouplingEntry { from: e.source, to: e.target, mass: e.mass, units: e.units }));
    coupling.sort_by_key(|e| (e.from, e.to));
    // a source split across rays and direct entries also breaks the map property
    for w in coupling.windows(2) {
        if w[0].from == w[1].from {
            is_map = false;
        }
    }
    let cost = coupling.iter().map(|e| e.mass * space.dist(e.from, e.to)).sum();
    let cost_units_total =
        coupling.iter().map(|e| e.units as i128 * cost_units(space.dist(e.from, e.to)) as i128).sum();
    Ok(MongeCoupling {
        coupling,
        cost,
        cost_units: cost_units_total,
        is_map,
        per_ray_costs,
        ray_marginal_defects,
        off_ray_mass,
    })
}

/// Combines atoms at equal positions.
fn merge(atoms: &[Atom]) -> Vec<Atom> {
    let mut v = sorted(atoms);
    let mut out: Vec<Atom> = Vec::with_capacity(v.len());
    for a in v.drain(..) {
        match out.last_mut() {
            Some(last) if last.position == a.position => last.units += a.units,
            _ => out.push(a),
        }
    }
    out
}

/// Largest `max(0, d(x, y) - (phi(x) - phi(y)))` over coupled pairs.
pub fn coupling_gamma_defect(space: &MMSpace, coupling: &MongeCoupling, phi: &[f64]) -> f64 {
    coupling
        .coupling
        .iter()
        .filter(|e| e.units > 0)
        .map(|e| (space.dist(e.from, e.to) - (phi[e.from] - phi[e.to])).max(0.0))
        .fold(0.0, f64::max)
}

/// `int |F - G|` for two atomic measures on the line, evaluated exactly
/// between consecutive atom positions.
pub fn cdf_distance(source: &[Atom], target: &[Atom]) -> f64 {
    let mut events: Vec<(f64, i128)> = source
        .iter()
        .map(|a| (a.position, a.units as i128))
        .chain(target.iter().map(|a| (a.position, -(a.units as i128))))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc: i128 = 0;
    let mut total = 0.0;
    for w in events.windows(2) {
        acc += w[0].1;
        total += (acc.unsigned_abs() as f64 / MASS_UNITS as f64) * (w[1].0 - w[0].0);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::{build_transport_structure, partition_rays};
    use crate::w1solve::{default_tol, gamma_set, solve_w1};

    fn atom(position: f64, units: u64) -> Atom {
        Atom { position, units }
    }

    #[test]
    fn translation() {
        let h = MASS_UNITS / 2;
        let m = monotone_rearrangement(&[atom(0.0, h), atom(1.0, h)], &[atom(2.0, h), atom(3.0, h)]).unwrap();
        assert_eq!(m.assignment, vec![(0, 0, h), (1, 1, h)]);
        assert!((m.cost() - 2.0).abs() < 1e-12);
        assert!(m.is_map);
    }

    #[test]
    fn identity() {
        let atoms = atoms_from_masses(&[0.0, 0.3, 0.9], &[0.2, 0.5, 0.3]);
        let m = monotone_rearrangement(&atoms, &atoms).unwrap();
        assert!(m.assignment.iter().all(|&(i, j, _)| i == j));
        assert_eq!(m.cost(), 0.0);
    }

    #[test]
    fn mass_mismatch() {
        assert!(matches!(
            monotone_rearrangement(&[atom(0.0, 3)], &[atom(1.0, 2)]),
            Err(Error::MassMismatch { source_mass: 3, target_mass: 2 })
        ));
    }

    #[test]
    fn halving_map_against_cdf_inversion() {
        let n = 400;
        let src: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let tgt: Vec<f64> = src.iter().map(|s| s / 2.0).collect();
        let w = vec![1.0; n];
        let m = monotone_rearrangement(&atoms_from_masses(&src, &w), &atoms_from_masses(&tgt, &w)).unwrap();
        // H(s) = s and F(t) = 2t give T(s) = s / 2
        let mesh = 1.0 / n as f64;
        for &(i, j, _) in &m.assignment {
            let s = m.source_atoms[i].position;
            assert!((m.target_atoms[j].position - s / 2.0).abs() <= mesh);
        }
    }

    #[test]
    fn split_atom_is_not_a_map() {
        let h = MASS_UNITS / 2;
        let m = monotone_rearrangement(&[atom(0.0, MASS_UNITS)], &[atom(1.0, h), atom(2.0, h)]).unwrap();
        assert!(!m.is_map);
        assert_eq!(m.assignment.len(), 2);
    }

    #[test]
    fn cost_matches_cdf_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let k = rng.gen_range(1..40);
            let l = rng.gen_range(1..40);
            let ps: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let pt: Vec<f64> = (0..l).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ms: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let mt: Vec<f64> = (0..l).map(|_| rng.gen_range(0.01..1.0)).collect();
            let (a, b) = (atoms_from_masses(&ps, &ms), atoms_from_masses(&pt, &mt));
            let m = monotone_rearrangement(&a, &b).unwrap();
            assert!((m.cost() - cdf_distance(&a, &b)).abs() < 1e-9);
        }
    }

    #[test]
    fn interval_halves_assembly() {
        let n = 200;
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let s = MMSpace::line(coords.clone(), vec![1.0; n]).unwrap();
        let mu0: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();
        let mu1: Vec<f64> = (0..n).map(|i| if i >= n / 2 { 1.0 } else { 0.0 }).collect();
        let sol = solve_w1(&s, &mu0, &mu1).unwrap();
        let g = gamma_set(&s, &sol, default_tol(&s)).unwrap();
        let rd = partition_rays(&s, &build_transport_structure(g), &sol);
        let mc = assemble_monge_map(&s, &rd, &sol, &mu1).unwrap();
        assert!((mc.cost - 0.5).abs() <= 2.0 / (n - 1) as f64);
        assert!((mc.cost - sol.primal_value).abs() <= 1e-9);
        assert!(mc.is_map);
        assert!(coupling_gamma_defect(&s, &mc, &sol.potential) <= default_tol(&s));
    }

    #[test]
    fn equal_marginals_identity() {
        let s = MMSpace::line(vec![0.0, 1.0, 2.5], vec![1.0; 3]).unwrap();
        let mu = [0.2, 0.3, 0.5];
        let sol = solve_w1(&s, &mu, &mu).unwrap();
        let g = gamma_set(&s, &sol, default_tol(&s)).unwrap();
        let rd = partition_rays(&s, &build_transport_structure(g), &sol);
        let mc = assemble_monge_map(&s, &rd, &sol, &mu).unwrap();
        assert_eq!(mc.cost, 0.0);
        assert!(mc.coupling.iter().all(|e| e.from == e.to));
    }
}
