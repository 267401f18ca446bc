//! Acceptance criteria, one printed line per criterion.
//!
//! Runs without the test harness so the report is always printed.

use std::sync::OnceLock;
use std::time::Instant;

use degenflow::dual::{duality_gap, relative_gap, solve_dual, DualParams, DualSolution};
use degenflow::experiment::{run_experiment, ExperimentConfig};
use degenflow::grid::{Grid2D, ScalarField, VectorField};
use degenflow::potentials::{norm, PotentialSpec};
use degenflow::primal::{solve_primal, PrimalParams, PrimalSolution};
use degenflow::regularity::{
    composition_diagnostic, degiorgi_recursion, degiorgi_threshold, fit_log_modulus, DiagnosticsConfig,
};
use degenflow::sources::builtin_source;
use degenflow::traffic::{
    congestion_cost, deposit_intensity, split_source, trace_curves, wardrop_audit, Curve, TrafficParams,
};
use degenflow::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Criteria that cannot hold as stated. At the threshold with b = 2, β = 1 the
/// recursion decays exactly like 2^(−n), so Y20/Y1 = 2^(−19) stays above 1e−6.
const EXPECTED_FAILURES: &[u32] = &[5];

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn two_blocks(n: usize) -> (Grid2D, ScalarField) {
    let g = Grid2D::unit_square(n).unwrap();
    let f = builtin_source(&g, "two-blocks", &Value::Null).unwrap().field;
    (g, f)
}

fn q2() -> PotentialSpec {
    PotentialSpec::power(2.0).unwrap()
}

struct QuasiOneD {
    grid: Grid2D,
    f: ScalarField,
    primal: PrimalSolution,
    dual: DualSolution,
    seconds: f64,
}

/// Primal and dual solves of the two-blocks instance at 128², shared by two criteria.
fn quasi_1d() -> &'static QuasiOneD {
    static SOLVED: OnceLock<QuasiOneD> = OnceLock::new();
    SOLVED.get_or_init(|| {
        let (grid, f) = two_blocks(128);
        let start = Instant::now();
        let primal = solve_primal(&grid, &q2(), &f, &PrimalParams::default()).unwrap();
        let dual = solve_dual(&grid, &q2(), &f, &DualParams::default()).unwrap();
        QuasiOneD { grid, f, primal, dual, seconds: start.elapsed().as_secs_f64() }
    })
}

fn duality_certificate() -> Outcome {
    let s = quasi_1d();
    let gap = duality_gap(&s.grid, &q2(), &s.primal, &s.dual, &s.f).unwrap();
    let rel = relative_gap(gap, s.primal.energy, s.dual.objective);
    let diff = s.primal.sigma.sub(&s.dual.sigma_bar).l2_norm() / s.dual.sigma_bar.l2_norm();
    Outcome {
        id: 1,
        name: "duality-gap certificate",
        passed: rel.abs() <= 1e-4 && diff <= 1e-3 && s.seconds <= 60.0,
        detail: format!("relative gap {rel:.2e}, flux difference {diff:.2e}, {:.1} s", s.seconds),
    }
}

fn tent_profile() -> Outcome {
    let s = quasi_1d();
    // 1D two-point problem σ' = f, σ(0) = σ(1) = 0 with f = ±1
    let exact = s.grid.sample_faces(|x| x[0].min(1.0 - x[0]), |_| 0.0, true);
    let sup = |v: &VectorField| v.sub(&exact).max_abs() / 0.5;
    let peak = s.primal.sigma.max_abs();
    let (ep, ed) = (sup(&s.primal.sigma), sup(&s.dual.sigma_bar));
    Outcome {
        id: 2,
        name: "exact tent profile",
        passed: ep <= 0.02 && ed <= 0.02 && (peak - 0.5).abs() <= 0.01,
        detail: format!("peak {peak:.5}, sup error primal {ep:.2e}, dual {ed:.2e}"),
    }
}

/// `sup_r (r s − (r − 1)₊^q / q)` by ternary search; the objective is concave in `r`.
fn legendre(s: f64, q: f64) -> f64 {
    let obj = |r: f64| r * s - (r - 1.0).max(0.0).powf(q) / q;
    let (mut lo, mut hi) = (0.0, 2.0 + s.powf(1.0 / (q - 1.0)) * 2.0);
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if obj(m1) < obj(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    obj(0.5 * (lo + hi))
}

fn conjugacy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for p in [1.5, 2.0] {
        let q = p / (p - 1.0);
        let spec = PotentialSpec::power(q).unwrap();
        for _ in 0..200 {
            let r = 4.0 * rng.gen::<f64>().sqrt();
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let sigma = [r * t.cos(), r * t.sin()];
            let got = spec.conjugate(sigma).unwrap();
            worst = worst.max((got - legendre(norm(sigma), q)).abs());
        }
    }
    Outcome { id: 3, name: "conjugacy", passed: worst <= 1e-4, detail: format!("max error {worst:.2e}") }
}

fn random_z(rng: &mut ChaCha8Rng, rmax: f64) -> Vec2 {
    let r = rmax * rng.gen::<f64>().sqrt();
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    [r * t.cos(), r * t.sin()]
}

fn gamma_lipschitz() -> Outcome {
    const PAIRS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut passed = true;
    let mut detail = Vec::new();
    for q in [2.0, 3.0] {
        let spec = PotentialSpec::power(q).unwrap();
        for delta in [0.1, 0.5, 1.0] {
            let bound = 1.0 / spec.ellipticity_floor(delta).unwrap();
            let mut lip = 0.0f64;
            for k in 0..PAIRS {
                let z1 = random_z(&mut rng, 4.0);
                // half the pairs are close, to probe the local slope
                let z2 = if k % 2 == 0 {
                    random_z(&mut rng, 4.0)
                } else {
                    let d = random_z(&mut rng, 0.05);
                    let z = [z1[0] + d[0], z1[1] + d[1]];
                    if norm(z) > 4.0 {
                        continue;
                    }
                    z
                };
                let e = random_z(&mut rng, 1.0);
                let e = if norm(e) > 0.0 { [e[0] / norm(e), e[1] / norm(e)] } else { [1.0, 0.0] };
                let (a1, a2) = (spec.force(z1), spec.force(z2));
                let da = norm([a1[0] - a2[0], a1[1] - a2[1]]);
                if da == 0.0 {
                    continue;
                }
                let g1 = spec.gamma_delta(a1, delta, e).unwrap();
                let g2 = spec.gamma_delta(a2, delta, e).unwrap();
                lip = lip.max((g1 - g2).abs() / da);
            }
            passed &= lip <= bound * (1.0 + 1e-6);
            if q == 2.0 && delta == 1.0 {
                passed &= (bound - 2.0).abs() <= 1e-6;
            }
            detail.push(format!("q{q} d{delta}: {lip:.4}/{bound:.4}"));
        }
    }
    Outcome { id: 4, name: "gamma Lipschitz bound", passed, detail: detail.join(", ") }
}

fn degiorgi() -> Outcome {
    let mut stuck = Vec::new();
    let mut diverged = 0;
    for c in [0.5, 1.0, 2.0] {
        for b in [2.0, 4.0, 16.0] {
            for beta in [0.25, 0.5, 1.0] {
                let y1 = degiorgi_threshold(c, b, beta);
                let (seq, ok) = degiorgi_recursion(c, b, beta, y1, 20);
                if !ok {
                    stuck.push(format!("(c {c}, b {b}, beta {beta}: Y20/Y1 {:.2e})", seq[19] / y1));
                }
                if !degiorgi_recursion(c, b, beta, 2.0 * y1, 20).1 {
                    diverged += 1;
                }
            }
        }
    }
    Outcome {
        id: 5,
        name: "De Giorgi recursion",
        passed: stuck.is_empty() && diverged > 0,
        detail: format!(
            "{} of 27 threshold starts miss 1e-6 {}; {diverged} over-threshold starts diverge",
            stuck.len(),
            stuck.join(" ")
        ),
    }
}

fn continuity() -> Outcome {
    let g = Grid2D::unit_square(64).unwrap();
    let f = builtin_source(&g, "gaussian-dipole", &Value::Null).unwrap().field;
    let p = solve_primal(&g, &q2(), &f, &PrimalParams::default()).unwrap();
    let grad = g.gradient(&p.u, false).unwrap();
    let max_grad = g.center_gradient(&grad).unwrap().iter().map(|z| norm(*z)).fold(0.0, f64::max);
    let cfg = DiagnosticsConfig::default();
    let table = composition_diagnostic(&g, &grad, |z| (norm(z) - 1.0).max(0.0), &cfg).unwrap();
    let mut labels = vec!["excess@0".to_string()];
    labels.extend((0..16).map(|k| format!("direction{k}@0")));
    let mut monotone = 0;
    let mut fits = 0;
    let mut worst_residual = 0.0f64;
    for label in &labels {
        let row = table.row(label).unwrap();
        // radii decrease along the ladder, so the modulus must not grow
        if row.values.windows(2).all(|w| w[1] <= 1.1 * w[0]) {
            monotone += 1;
        }
        let pairs: Vec<(f64, f64)> = table.radii.iter().copied().zip(row.values.iter().copied()).collect();
        if let Ok(fit) = fit_log_modulus(&pairs) {
            if fit.c_fit.is_finite() {
                fits += 1;
                worst_residual = worst_residual.max(fit.residual);
            }
        }
    }
    let scales = table.radii.len();
    Outcome {
        id: 6,
        name: "continuity diagnostics",
        passed: max_grad > 1.5 && scales >= 4 && monotone == labels.len() && fits >= 1,
        detail: format!(
            "max |grad u| {max_grad:.3}, {scales} scales, {monotone}/17 monotone, {fits}/17 finite fits, worst residual {worst_residual:.2}"
        ),
    }
}

fn intensity_error(n: usize) -> (f64, f64) {
    let (g, f) = two_blocks(n);
    let d = solve_dual(&g, &q2(), &f, &DualParams::default()).unwrap();
    let (fp, fm) = split_source(&f).unwrap();
    let plan = trace_curves(&d.sigma_bar, &fp, &fm, &TrafficParams::default()).unwrap();
    let i = deposit_intensity(&plan, &g).unwrap();
    let s = d.sigma_bar.center_magnitude();
    (i.sub(&s).l1_norm() / s.l1_norm(), plan.terminal_error_rel)
}

fn traffic_identity() -> Outcome {
    let (e128, t128) = intensity_error(128);
    let (e256, t256) = intensity_error(256);
    Outcome {
        id: 7,
        name: "traffic identity",
        passed: e128 <= 0.10 && e256 <= 0.07 && t128 <= 0.05 && t256 <= 0.05,
        detail: format!("L1 error {e128:.2e} at 128, {e256:.2e} at 256; terminal {t128:.2e}, {t256:.2e}"),
    }
}

fn wardrop() -> Outcome {
    let s = quasi_1d();
    let g = s.grid;
    let (fp, fm) = split_source(&s.f).unwrap();
    let params = TrafficParams::default();
    let mut plan = trace_curves(&s.dual.sigma_bar, &fp, &fm, &params).unwrap();
    let intensity = deposit_intensity(&plan, &g).unwrap();
    let gfun = congestion_cost(1.0);
    let audit = wardrop_audit(&plan, &intensity, &gfun, &params, 0).unwrap();

    let mut zig = vec![[0.1, 0.3]];
    for k in 1..=10 {
        zig.push([0.1 + 0.05 * k as f64, if k % 2 == 1 { 0.35 } else { 0.3 }]);
    }
    let id = plan.curves.len();
    plan.curves = vec![Curve {
        id,
        start_cell: g.locate(zig[0]).unwrap(),
        weight: 1e-4,
        times: (0..zig.len()).map(|k| k as f64 / 10.0).collect(),
        points: zig,
        truncated: false,
        clamped: false,
        stalled: false,
    }];
    let control = wardrop_audit(&plan, &intensity, &gfun, &params, 0).unwrap();
    let flagged = control.entries.iter().any(|e| e.curve == id && e.flagged);
    Outcome {
        id: 8,
        name: "Wardrop audit",
        passed: audit.passing_fraction >= 0.95 && flagged,
        detail: format!("passing fraction {:.4}, zig-zag flagged {flagged}", audit.passing_fraction),
    }
}

fn discrete_structure() -> Outcome {
    let g = Grid2D::new(37, 29, 1.3, 0.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut adj = 0.0f64;
    let mut feas = 0.0f64;
    for _ in 0..50 {
        let u = g.sample(|_| rng.gen_range(-1.0..1.0));
        let mut s = g.zero_flux();
        s.x.iter_mut().chain(s.y.iter_mut()).for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s.clamp_boundary();
        let lhs = g.gradient(&u, true).unwrap().dot(&s);
        let rhs = u.dot(&g.divergence(&s).unwrap());
        adj = adj.max((lhs + rhs).abs() / lhs.abs().max(rhs.abs()));
        let mut f = g.sample(|_| rng.gen_range(-1.0..1.0));
        f.remove_mean();
        let proj = g.project_divergence(&s, &f).unwrap();
        feas = feas.max(g.divergence(&proj).unwrap().sub(&f).l2_norm() / f.l2_norm());
    }
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let manifests: Vec<_> = dirs
        .iter()
        .map(|d| {
            let mut cfg = ExperimentConfig::from_json(
                r#"{"grid": {"nx": 64, "ny": 64}, "potential": {"kind": "power_q", "q": 2.0},
                    "source": {"name": "two-blocks"},
                    "pipeline": ["primal", "dual", "gap", "diagnose", "traffic"], "seed": 5,
                    "diagnostics": {"eps0": 0.5}}"#,
            )
            .unwrap();
            cfg.output_dir = d.path().to_path_buf();
            run_experiment(&cfg).unwrap().manifest
        })
        .collect();
    let same = manifests[0] == manifests[1];
    Outcome {
        id: 9,
        name: "discrete structure",
        passed: adj <= 1e-12 && feas <= 1e-10 && same,
        detail: format!("adjointness {adj:.1e}, projection {feas:.1e}, manifests identical {same}"),
    }
}

fn main() {
    let criteria: [fn() -> Outcome; 9] = [
        duality_certificate,
        tent_profile,
        conjugacy,
        gamma_lipschitz,
        degiorgi,
        continuity,
        traffic_identity,
        wardrop,
        discrete_structure,
    ];
    let mut failed = Vec::new();
    for run in criteria {
        let o = run();
        println!("criterion {} {}: {} ({})", o.id, o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(o.id);
        }
    }
    let unexpected: Vec<u32> = failed.iter().copied().filter(|id| !EXPECTED_FAILURES.contains(id)).collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
