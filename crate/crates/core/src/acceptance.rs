//! The acceptance suite: nine end-to-end checks with fixed seeds and
//! tolerances. Shared by the `acceptance` test target and `needle selftest`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curvature::{
    cd_density_check, mcp_density_check, mollify_density, l1_distance, restrict, sigma, Sampling, Verdict,
    DEFAULT_REL_TOL,
};
use crate::disint::{balance_marginals, check_balance, check_consistency, disintegrate, random_test_pairs};
use crate::error::Result;
use crate::isoperim::{empirical_profile, levy_gromov_check, model_profile, ModelProfileSpec, ProfileOptions};
use crate::mmspace::{build_space, generate_interval_model, generate_sphere_sample, Density1D, MMSpace, MetricSpec};
use crate::monge1d::assemble_monge_map;
use crate::rays::{build_transport_structure, partition_rays, RayDecomposition, TransportStructure};
use crate::w1solve::{check_cyclic_monotonicity, default_tol, gamma_set, solve_w1, W1Solution};

/// Seed of every sphere sample in the suite.
pub const SPHERE_SEED: u64 = 0;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {} {:<28} {}  ({:.1}s) {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub const NAMES: [&str; 9] = [
    "duality",
    "cyclic-monotonicity",
    "monge-optimality",
    "disintegration-balance",
    "curvature-coefficients",
    "levy-gromov",
    "mollifier",
    "mcp-bounds",
    "branching",
];

/// Runs criterion `id` (1 to 9).
pub fn run(id: usize) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => duality(),
        2 => cyclic_monotonicity(),
        3 => monge_optimality(),
        4 => disintegration_balance(),
        5 => curvature_coefficients(),
        6 => levy_gromov(),
        7 => mollifier(),
        8 => mcp_bounds(),
        9 => branching(),
        _ => panic!("no criterion {id}"),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error {}: {e}", e.code())),
    };
    let budget = match id {
        1 => Some(10.0),
        5 => Some(5.0),
        6 => Some(60.0),
        _ => None,
    };
    if let Some(b) = budget {
        if seconds > b {
            passed = false;
            detail.push_str(&format!("; runtime {seconds:.1}s over {b}s"));
        }
    }
    CriterionResult { id, name: NAMES[id - 1], passed, detail, seconds }
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=9).map(run).collect()
}

type Outcome = Result<(bool, String)>;

fn random_cloud(rng: &mut ChaCha8Rng) -> Result<(MMSpace, Vec<f64>, Vec<f64>)> {
    let n = rng.gen_range(8..=60);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
    let space = MMSpace::planar(&pts, None)?;
    let mut draw = |density: f64| -> Vec<f64> {
        let mut v: Vec<f64> =
            (0..n).map(|_| if rng.gen_bool(density) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    };
    let mu0 = draw(0.5);
    let mu1 = draw(0.5);
    Ok((space, mu0, mu1))
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_gap = 0.0f64;
    let mut worst_lip = 0.0f64;
    for _ in 0..50 {
        let (space, mu0, mu1) = random_cloud(&mut rng)?;
        let sol = solve_w1(&space, &mu0, &mu1)?;
        let phi = &sol.potential;
        let dual: f64 = (0..space.len()).map(|x| phi[x] * (mu0[x] - mu1[x])).sum();
        let primal: f64 = sol.plan.iter().map(|e| e.mass * space.dist(e.source, e.target)).sum();
        worst_gap = worst_gap.max((primal - dual).abs() / (1.0 + primal.abs()));
        let mut lip = 0.0f64;
        for x in 0..space.len() {
            for y in 0..space.len() {
                lip = lip.max(phi[x] - phi[y] - space.dist(x, y));
            }
        }
        worst_lip = worst_lip.max(lip / space.max_distance());
    }
    let ok = worst_gap <= 1e-9 && worst_lip <= 1e-9;
    Ok((ok, format!("50 clouds: max relative gap {worst_gap:.2e}, max Lipschitz residual / max d {worst_lip:.2e}")))
}

fn cyclic_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    let instances = 10;
    for _ in 0..instances {
        let (space, mu0, mu1) = random_cloud(&mut rng)?;
        let sol = solve_w1(&space, &mu0, &mu1)?;
        let gamma = gamma_set(&space, &sol, default_tol(&space))?;
        // 10^4 cycles per instance, spread over k = 2..=6
        for k in 2..=6 {
            let r = check_cyclic_monotonicity(&space, &gamma, k, 2000, &mut rng);
            checked += r.cycles_checked;
            worst = worst.max(r.worst_violation);
        }
    }
    let ok = worst <= 1e-9;
    Ok((ok, format!("{instances} instances, {checked} cycles, worst violation {worst:.2e}")))
}

fn decompose(space: &MMSpace, mu0: &[f64], mu1: &[f64]) -> Result<(W1Solution, TransportStructure, RayDecomposition)> {
    let sol = solve_w1(space, mu0, mu1)?;
    let g = gamma_set(space, &sol, default_tol(space))?;
    let st = build_transport_structure(g);
    let rd = partition_rays(space, &st, &sol);
    Ok((sol, st, rd))
}

fn monge_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n = 1000;
    let mut worst = 0.0f64;
    let mut maps = 0;
    for _ in 0..20 {
        let (space, _) = generate_interval_model(0.0, 2.0, 1.0, n)?;
        let coords = space.coords().unwrap_or_default().to_vec();
        let bump = |rng: &mut ChaCha8Rng| {
            let (c, w) = (rng.gen_range(0.1..0.9), rng.gen_range(0.05..0.3));
            let a: f64 = rng.gen_range(0.2..1.0);
            move |t: f64| a * (-((t - c) / w).powi(2)).exp()
        };
        let (b0, b1, b2) = (bump(&mut rng), bump(&mut rng), bump(&mut rng));
        let mu0: Vec<f64> = coords.iter().map(|&t| b0(t) + 1e-3).collect();
        let mu1: Vec<f64> = coords.iter().map(|&t| b1(t) + b2(t) + 1e-3).collect();
        let (s0, s1) = (mu0.iter().sum::<f64>(), mu1.iter().sum::<f64>());
        let mu0: Vec<f64> = mu0.iter().map(|v| v / s0).collect();
        let mu1: Vec<f64> = mu1.iter().map(|v| v / s1).collect();
        let (sol, _, rd) = decompose(&space, &mu0, &mu1)?;
        let mc = assemble_monge_map(&space, &rd, &sol, &mu1)?;
        worst = worst.max((mc.cost - sol.primal_value).abs() / (1.0 + sol.primal_value));
        maps += usize::from(mc.is_map);
    }
    // atom-split instances: a few heavy atoms sent onto many light ones
    let mut exact = 0;
    let trials = 10;
    for _ in 0..trials {
        let m = rng.gen_range(20..80);
        // integer positions, so scaled distances are exact and additive
        let coords: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let space = MMSpace::line(coords, vec![1.0; m])?;
        let mut mu0 = vec![0.0; m];
        for _ in 0..rng.gen_range(1..4) {
            mu0[rng.gen_range(0..m / 3)] += 1.0;
        }
        let mu1: Vec<f64> = (0..m).map(|i| if i >= m / 3 { 1.0 } else { 0.0 }).collect();
        let s0: f64 = mu0.iter().sum();
        let s1: f64 = mu1.iter().sum();
        let mu0: Vec<f64> = mu0.iter().map(|v| v / s0).collect();
        let mu1: Vec<f64> = mu1.iter().map(|v| v / s1).collect();
        let (sol, _, rd) = decompose(&space, &mu0, &mu1)?;
        let mc = assemble_monge_map(&space, &rd, &sol, &mu1)?;
        exact += usize::from(mc.cost_units == sol.cost_units);
    }
    let ok = worst <= 1e-6 && exact == trials;
    Ok((
        ok,
        format!(
            "20 intervals n={n}: max relative cost gap {worst:.2e} ({maps} maps); atom-split integer costs equal {exact}/{trials}"
        ),
    ))
}

fn hemisphere_f(space: &MMSpace) -> Vec<f64> {
    let pts = space.sphere_points().unwrap_or_default();
    let n = pts.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pts[b][2].total_cmp(&pts[a][2]).then(a.cmp(&b)));
    let mut f = vec![-0.5; n];
    for &i in &order[..n / 2] {
        f[i] = 0.5;
    }
    f
}

fn balance_decompose(space: &MMSpace, f: &[f64]) -> Result<(TransportStructure, RayDecomposition)> {
    let (mu0, mu1) = balance_marginals(space.weights(), f)?;
    let (_, st, rd) = decompose(space, &mu0, &mu1)?;
    Ok((st, rd))
}

fn disintegration_balance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    // 2D grid: rows of a [0,1) x {0..h} lattice, f = +-1 on the two halves
    let (w, h) = (20usize, 8usize);
    let pts: Vec<[f64; 2]> = (0..h).flat_map(|r| (0..w).map(move |c| [c as f64 / w as f64, r as f64])).collect();
    let grid = MMSpace::planar(&pts, None)?;
    let fg: Vec<f64> = pts.iter().map(|p| if p[0] < 0.5 { 1.0 } else { -1.0 }).collect();
    let (_, rd) = balance_decompose(&grid, &fg)?;
    let grid_balance = check_balance(&rd, grid.weights(), &fg)?.max_abs;

    let mut consistency = 0.0f64;
    let d = disintegrate(&rd, grid.weights())?;
    consistency = consistency.max(check_consistency(&rd, &d, grid.weights(), &random_test_pairs(&rd, 100, &mut rng)));
    let (interval, _) = generate_interval_model(1.0, 2.0, PI, 500)?;
    let coords = interval.coords().unwrap_or_default().to_vec();
    let wi = interval.weights();
    let v: f64 = (0..coords.len()).filter(|&i| coords[i] <= 1.0).map(|i| wi[i]).sum();
    let fi: Vec<f64> = coords.iter().map(|&t| if t <= 1.0 { 1.0 - v } else { -v }).collect();
    let (_, rdi) = balance_decompose(&interval, &fi)?;
    let di = disintegrate(&rdi, wi)?;
    consistency = consistency.max(check_consistency(&rdi, &di, wi, &random_test_pairs(&rdi, 100, &mut rng)));

    let mut sphere = Vec::new();
    for n in [500, 1000, 2000] {
        let s = generate_sphere_sample(2, n, SPHERE_SEED)?;
        let f = hemisphere_f(&s);
        let (_, rds) = balance_decompose(&s, &f)?;
        let ds = disintegrate(&rds, s.weights())?;
        consistency = consistency.max(check_consistency(&rds, &ds, s.weights(), &random_test_pairs(&rds, 100, &mut rng)));
        sphere.push(check_balance(&rds, s.weights(), &f)?.max_abs);
    }
    let nonincreasing = sphere.windows(2).all(|p| p[1] <= p[0] + 1e-12);
    let ok = consistency <= 1e-12 && grid_balance <= 1e-12 && nonincreasing;
    Ok((
        ok,
        format!(
            "consistency max {consistency:.2e}; grid balance {grid_balance:.2e}; sphere balance n=500/1000/2000: {:.2e} {:.2e} {:.2e}",
            sphere[0], sphere[1], sphere[2]
        ),
    ))
}

fn curvature_coefficients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let flat_exact = (0..1000).all(|_| {
        let n = rng.gen_range(0.0..10.0);
        let t = rng.gen_range(0.0..1.0);
        let theta = rng.gen_range(0.0..10.0);
        sigma(0.0, n, t, theta) == t
    });
    let (k, n, theta) = (2.0, 3.0, 1.7);
    let residual = |ds: f64| {
        let f = |s: f64| sigma(k, n, s, theta);
        let steps = (1.0 / ds).round() as usize;
        (1..steps)
            .map(|i| {
                let s = i as f64 * ds;
                let d2 = (f(s + ds) - 2.0 * f(s) + f(s - ds)) / (ds * ds);
                (d2 + theta * theta * k / n * f(s)).abs()
            })
            .fold(0.0, f64::max)
    };
    let (r1, r2, r3) = (residual(0.02), residual(0.01), residual(0.005));
    let ode_ok = r1 / r2 >= 3.5 && r2 / r3 >= 3.5;

    let mut model_margin = f64::INFINITY;
    for nn in [2.0, 3.0, 5.0] {
        // exact zeros at both ends; sin(pi) rounds to 1.2e-16
        let h = Density1D::from_fn(0.0, PI, 601, |t| if t <= 0.0 || t >= PI { 0.0 } else { t.sin().powf(nn - 1.0) })?;
        let r = cd_density_check(&h, nn - 1.0, nn, &Sampling::Grid { stride: 6 }, DEFAULT_REL_TOL)?;
        model_margin = model_margin.min(r.margin);
    }
    let flat = Density1D::from_fn(0.0, 3.0, 301, |_| 1.0)?;
    let r = cd_density_check(&flat, 1.0, 2.0, &Sampling::Grid { stride: 1 }, DEFAULT_REL_TOL)?;
    let triple_ok = r.worst_triple.is_some_and(|[t0, t1, s]| t0.abs() < 1e-12 && (t1 - 3.0).abs() < 1e-12 && (s - 0.5).abs() < 1e-9);
    let flat_fails = r.verdict == Verdict::Fail && triple_ok;
    let ok = flat_exact && ode_ok && model_margin >= -1e-7 && flat_fails;
    Ok((
        ok,
        format!(
            "sigma K=0 exact: {flat_exact}; ODE residual ratios {:.2} {:.2}; sine-power min margin {model_margin:.2e}; h=1 K=1 worst triple {:?}",
            r1 / r2,
            r2 / r3,
            r.worst_triple
        ),
    ))
}

fn levy_gromov() -> Outcome {
    let spec = ModelProfileSpec::new(1.0, 2.0, PI)?;
    let closed = model_profile(&spec, 0.5)?;
    let closed_ok = (closed - 0.5).abs() <= 1e-4;

    let (interval, _) = generate_interval_model(1.0, 2.0, PI, 1000)?;
    let report = levy_gromov_check(&interval, &spec, &[0.25, 0.5, 0.75], &Default::default())?;
    let interval_ok = report.entries.iter().all(|e| e.slack.abs() <= 0.05);
    let slacks: Vec<String> = report.entries.iter().map(|e| format!("{:+.1e}", e.slack)).collect();

    let sphere = generate_sphere_sample(2, 2000, SPHERE_SEED)?;
    let best = empirical_profile(&sphere, 0.5, &ProfileOptions::default())?;
    let model = model_profile(&spec, best.attained)?;
    let sphere_ok = best.content >= 0.9 * model;
    Ok((
        closed_ok && interval_ok && sphere_ok,
        format!(
            "model(1/2) = {closed:.6}; interval slacks {}; sphere n=2000 best cap {:.4} vs model {model:.4} (threshold {:.4})",
            slacks.join(" "),
            best.content,
            0.9 * model
        ),
    ))
}

fn mollifier() -> Outcome {
    let h = Density1D::from_fn(0.0, PI, 2001, |t| t.sin().powi(2))?;
    let mut support_ok = true;
    let mut errs = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let m = mollify_density(&h, 3.0, eps)?;
        support_ok &= m.grid().iter().zip(m.values()).all(|(&t, &v)| v == 0.0 || (-eps..=PI + eps).contains(&t));
        errs.push(l1_distance(&m, &h));
    }
    let decreasing = errs[0] > errs[1] && errs[1] > errs[2];

    // sin on [0, pi] is CD(1, 2); the smoothed density is checked away
    // from the boundary layer the convolution creates
    let eps = 0.05;
    let base = Density1D::from_fn(0.0, PI, 2001, f64::sin)?;
    let base_ok = cd_density_check(&base, 1.0, 2.0, &Sampling::Random { count: 1000, seed: 7 }, DEFAULT_REL_TOL)?;
    let m = mollify_density(&base, 2.0, eps)?;
    let inner = restrict(&m, eps, PI)?;
    let r = cd_density_check(&inner, 1.0, 2.0, &Sampling::Random { count: 1000, seed: 7 }, DEFAULT_REL_TOL)?;
    let ok = support_ok && decreasing && base_ok.verdict.passed() && r.verdict.passed();
    Ok((
        ok,
        format!(
            "support ok: {support_ok}; L1 errors {:.2e} {:.2e} {:.2e}; CD(1,2) margin after smoothing {:.2e} on {} triples",
            errs[0], errs[1], errs[2], r.margin, r.tested
        ),
    ))
}

fn mcp_bounds() -> Outcome {
    let n = 3.0;
    let h = Density1D::from_fn(0.0, PI, 401, |t| t.sin().max(0.0).powf(n - 1.0))?;
    let model = mcp_density_check(&h, n - 1.0, n, &Sampling::Random { count: 10_000, seed: 9 }, DEFAULT_REL_TOL)?;
    let mut v = h.values().to_vec();
    v[200] *= 10.0;
    let spiked = Density1D::new(h.grid().to_vec(), v)?;
    let spike = mcp_density_check(&spiked, n - 1.0, n, &Sampling::Grid { stride: 10 }, DEFAULT_REL_TOL)?;
    let ok = model.verdict.passed() && model.margin >= -1e-7 && spike.verdict == Verdict::Fail;
    Ok((
        ok,
        format!(
            "model margin {:.2e} on {} quadruples; spiked verdict {:?} margin {:.2e}",
            model.margin, model.tested, spike.verdict, spike.margin
        ),
    ))
}

fn branching() -> Outcome {
    let metric = MetricSpec::Graph { edges: vec![(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)] };
    let tripod = build_space(&[], &metric, None)?;
    let (_, st, _) = decompose(&tripod, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.5, 0.5, 0.0])?;
    // exhaustive evaluation of the definition over the saturation set
    let g = &st.gamma;
    let related = |a: usize, b: usize| g.contains(a, b) || g.contains(b, a);
    let oracle: Vec<usize> = (0..4)
        .filter(|&x| st.transport_set_e.contains(&x))
        .filter(|&x| {
            let succ: Vec<usize> = (0..4).filter(|&y| g.contains(x, y)).collect();
            succ.iter().any(|&z| succ.iter().any(|&w| !related(z, w)))
        })
        .collect();
    let hub_ok = st.branching_fwd.contains(&3) && st.branching_fwd == oracle;

    let mut interval = Vec::new();
    let mut sphere = Vec::new();
    for n in [1000, 2000] {
        let (s, _) = generate_interval_model(1.0, 2.0, PI, n)?;
        let coords = s.coords().unwrap_or_default().to_vec();
        let w = s.weights();
        let v: f64 = (0..n).filter(|&i| coords[i] <= 1.0).map(|i| w[i]).sum();
        let f: Vec<f64> = coords.iter().map(|&t| if t <= 1.0 { 1.0 - v } else { -v }).collect();
        let (st, _) = balance_decompose(&s, &f)?;
        interval.push(st.branching_mass_fraction(&s));

        let s = generate_sphere_sample(2, n, SPHERE_SEED)?;
        let (st, _) = balance_decompose(&s, &hemisphere_f(&s))?;
        sphere.push(st.branching_mass_fraction(&s));
    }
    let small = interval.iter().chain(&sphere).all(|&b| b <= 0.05);
    let mono = interval[1] <= interval[0] && sphere[1] <= sphere[0];
    Ok((
        hub_ok && small && mono,
        format!(
            "tripod A+ = {:?} (hub 3); branching fraction interval n=1000/2000: {:.4} {:.4}, sphere: {:.4} {:.4}",
            st.branching_fwd, interval[0], interval[1], sphere[0], sphere[1]
        ),
    ))
}
