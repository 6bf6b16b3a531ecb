//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{brute_force_umbilics, V3};
use principal_cli::*;
use principal_core::config::Tolerances;
use principal_core::foliation::{assemble_configuration, return_map, PipelineOptions};
use principal_core::integrate::{integrate_line, LineControls, Termination};
use principal_core::quadric::{confocal_of, confocal_of_strict, perturb_quadric, QuadricPoint9};
use principal_core::umbilic::{
    classify_darbouxian, lie_cartan_resolution, separatrix_count, CubicJet, Verdict, DEFAULT_TOL_CLASS,
};
use principal_core::{
    normal_curvature_quotient, principal_data, ImplicitQuadric, QuadricKind, Site, SurfaceModel, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn config(spec: &str) -> RunConfig {
    RunConfig::new(spec.parse().expect("valid surface spec"))
}

fn on_ellipsoid(axes: [f64; 3], theta: f64, phi: f64) -> Vec3 {
    Vec3::new(
        axes[0] * theta.sin() * phi.cos(),
        axes[1] * theta.sin() * phi.sin(),
        axes[2] * theta.cos(),
    )
}

fn random_site(s: &SurfaceModel, rng: &mut ChaCha8Rng) -> Site {
    match s.quadric_ref() {
        Some(q) => {
            let m = q.ellipsoid_map().expect("ellipsoid preset");
            let d = V3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Site::space(q.project(&m.point(&d.normalize())))
        }
        None => {
            let d = s.domain().expect("chart preset");
            let u = rng.random_range(d.u[0] * 0.9..d.u[1] * 0.9);
            let v = rng.random_range(d.v[0] * 0.9..d.v[1] * 0.9);
            Site::chart(u, v)
        }
    }
}

fn euler_formula() -> Outcome {
    let started = Instant::now();
    let presets = [
        SurfaceModel::ellipsoid(3.0, 2.0, 1.0),
        SurfaceModel::ellipsoid_chart_z(3.0, 2.0, 1.0),
        SurfaceModel::torus(3.0, 1.0),
        SurfaceModel::tube(3.0, 1.0, 0.3),
        SurfaceModel::monge_cubic(1.0, 4.0, 1.0, 0.5, 0.5),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for s in &presets {
        let mut checked = 0;
        while checked < 200 {
            let site = random_site(s, &mut rng);
            let theta = rng.random_range(0.0..PI);
            let Ok(f) = principal_data(s, &site) else { continue };
            if f.is_umbilic() {
                continue;
            }
            let kn = normal_curvature_quotient(s, &site, theta).map_err(|e| format!("{}: {e}", s.label))?;
            let (sn, cs) = theta.sin_cos();
            let euler = f.k1 * cs * cs + f.k2 * sn * sn;
            worst = worst.max((kn - euler).abs() / (1.0 + f.k1.abs() + f.k2.abs()));
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    check(
        worst < 1e-8 && elapsed < Duration::from_secs(5),
        format!("5 presets x 200 samples, worst scaled error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn triaxial_ellipsoid() -> Outcome {
    let started = Instant::now();
    let r = cmd_analyze(&config("ellipsoid:3,2,1")).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    if r.umbilics.len() != 4 {
        return Err(format!("{} umbilics", r.umbilics.len()));
    }
    let oracle = brute_force_umbilics([3.0, 2.0, 1.0], 1000, 1000, 1e-3);
    let worst = r
        .umbilics
        .iter()
        .map(|u| {
            let p = V3::from(u.point);
            oracle.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let all_d1 = r.umbilics.iter().all(|u| u.verdict == "D1");
    let one_each = r.umbilics.iter().all(|u| {
        [1u8, 2].iter().all(|&f| {
            r.separatrices
                .iter()
                .filter(|s| s.umbilic == u.id && s.foliation == f)
                .count()
                == 1
        })
    });
    let mut degree = [0usize; 4];
    for &(a, b, _) in &r.connections.edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let paired = r.separatrices.iter().all(|s| s.end == "connection" && s.end_umbilic.is_some())
        && r.connections.edges.len() == 4
        && degree == [2; 4]
        && r.sigma.d.status == "fails";
    check(
        oracle.len() == 4 && worst < 1e-6 && all_d1 && one_each && paired && elapsed < Duration::from_secs(60),
        format!(
            "4 umbilics, oracle distance {worst:.1e}, all D1 {all_d1}, one separatrix per foliation {one_each}, \
             connected in pairs {paired}, {elapsed:.2?}"
        ),
    )
}

fn darbouxian_sweep() -> Outcome {
    let tol = DEFAULT_TOL_CLASS;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut tested, mut agreed) = (0, 0);
    let mut per_type = [0usize; 3];
    while tested < 200 {
        let (a, b, c) = (rng.random_range(-6.0..6.0), rng.random_range(-3.0..3.0), rng.random_range(-4.0..4.0));
        let jet = CubicJet::new(rng.random_range(-1.0..1.0), a, b, c);
        let s = jet.scale();
        let t = b * (b - a);
        let (r, thr) = (a / b, (c / (2.0 * b)).powi(2) + 2.0);
        let m = 1f64.max(r.abs()).max(thr);
        let clear = t.abs() > 10.0 * tol * s * s
            && (r - thr).abs() > 10.0 * tol * m
            && (r - 1.0).abs() > 10.0 * tol * m
            && (a - 2.0 * b).abs() > 10.0 * tol * s
            && (c * c - 4.0 * b * (a - 2.0 * b)).abs() > 10.0 * tol * s * s;
        if !clear {
            continue;
        }
        let expected = if r > thr {
            Verdict::D1
        } else if r > 1.0 {
            Verdict::D2
        } else {
            Verdict::D3
        };
        let got = classify_darbouxian(&jet, tol).0;
        let count = lie_cartan_resolution(&jet, tol).map(|sing| separatrix_count(&sing)).ok();
        if got == expected && count == got.subscript() {
            agreed += 1;
        }
        if let Some(k) = expected.subscript() {
            per_type[k - 1] += 1;
        }
        tested += 1;
    }
    check(
        agreed == tested,
        format!("{agreed}/{tested} agree (D1/D2/D3 = {per_type:?})"),
    )
}

fn hyperbolicity() -> Outcome {
    let tol = Tolerances::default();
    let revolution = SurfaceModel::ellipsoid(2.0, 2.0, 1.0);
    let controls = LineControls::new(tol);
    let (mut worst_i, mut worst_rho) = (0.0f64, 0.0f64);
    for lat in [-1.2f64, -0.7, -0.2, 0.3, 0.8, 1.3] {
        let p = Vec3::new(2.0 * lat.cos(), 0.0, lat.sin());
        let line = integrate_line(&revolution, &Site::space(p), principal_core::Foliation::Maximal, &controls)
            .map_err(|e| e.to_string())?;
        if !matches!(line.termination, Termination::ClosedCycle { .. }) {
            return Err(format!("parallel at latitude {lat} ended with {:?}", line.termination));
        }
        let rho = return_map(&revolution, &line, &[], &tol).map_err(|e| e.to_string())?;
        worst_i = worst_i.max(line.integral().abs());
        worst_rho = worst_rho.max((rho - 1.0).abs());
    }
    let parallels = worst_i < 1e-8 && worst_rho < 1e-6;

    let base = QuadricPoint9::from_quadric(&ImplicitQuadric::ellipsoid(3.0, 2.0, 1.0));
    let (mut cycles, mut violations) = (0usize, Vec::new());
    let mut largest_i = 0.0f64;
    for seed in 0..20u64 {
        let q = perturb_quadric(&base, 1e-2, 100 + seed).quadric();
        if q.kind() != QuadricKind::Ellipsoid {
            return Err(format!("perturbation {seed} is not an ellipsoid"));
        }
        let c = assemble_configuration(&SurfaceModel::quadric(q), &PipelineOptions::default());
        for cyc in &c.cycles {
            cycles += 1;
            let i = cyc.integral;
            largest_i = largest_i.max(i.abs());
            let Some(lr) = cyc.log_rho() else {
                violations.push(format!("seed {seed}: cycle without a return map"));
                continue;
            };
            if i.abs() > 1e-4 && i.signum() != lr.signum() {
                violations.push(format!("seed {seed}: sign of {lr} vs {i}"));
            }
            if (lr - i).abs() >= 1e-4f64.max(0.05 * i.abs()) {
                violations.push(format!("seed {seed}: |log rho - I| = {:.2e}", (lr - i).abs()));
            }
        }
    }
    check(
        parallels && cycles > 0 && violations.is_empty(),
        format!(
            "parallels |I| <= {worst_i:.1e}, |rho - 1| <= {worst_rho:.1e}; {cycles} cycles on 20 perturbed \
             ellipsoids, max |I| {largest_i:.1e}, violations {violations:?}"
        ),
    )
}

fn confocal_oracle() -> Outcome {
    const AXES: [f64; 3] = [3.0, 2.0, 1.0];
    let s = SurfaceModel::ellipsoid(AXES[0], AXES[1], AXES[2]);
    let controls = LineControls::new(Tolerances::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut lines = 0;
    for f in principal_core::Foliation::BOTH {
        let mut done = 0;
        while done < 50 {
            let seed = on_ellipsoid(AXES, rng.random_range(0.2..PI - 0.2), rng.random_range(0.0..2.0 * PI));
            let Ok(line) = integrate_line(&s, &Site::space(seed), f, &controls) else { continue };
            let lambdas: Vec<[f64; 3]> = line
                .points()
                .map(|p| confocal_of(&p, AXES).map(|c| c.lambda))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let spread = [0, 1].map(|i| {
                let (lo, hi) = lambdas
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l[i]), hi.max(l[i])));
                (hi - lo) / lo.abs().max(hi.abs())
            });
            worst = worst.max(spread[0].min(spread[1]));
            done += 1;
            lines += 1;
        }
    }
    let mut ortho = 0.0f64;
    for _ in 0..1000 {
        let p = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let c = confocal_of_strict(&p, AXES).map_err(|e| e.to_string())?;
        let n = c.normals(&p, AXES);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            ortho = ortho.max((n[i].dot(&n[j]) / (n[i].norm() * n[j].norm())).abs());
        }
    }
    check(
        worst < 1e-6 && ortho < 1e-8,
        format!("{lines} lines, worst relative spread {worst:.1e}; worst cosine at 1000 points {ortho:.1e}"),
    )
}

fn stability_probe() -> Outcome {
    let mut cfg = config("ellipsoid:3,2,1");
    cfg.sampling.seed = 1000;
    let p = cmd_probe_stability(&cfg, 1e-3, 100).map_err(|e| e.to_string())?.result;
    let base = p.baseline.clone().map_err(|e| format!("baseline: {e}"))?;
    let generic = p.trials.iter().all(|t| {
        t.outcome
            .as_ref()
            .is_ok_and(|i| i.umbilic_count == 4 && i.darbouxian == 4 && i.graph == base.graph)
    });

    let mut cfg = config("sphere:1");
    cfg.sampling.seed = 2000;
    let q = cmd_probe_stability(&cfg, 1e-3, 20).map_err(|e| e.to_string())?.result;
    let degenerate = q.baseline.as_ref().is_ok_and(|b| b.everywhere_umbilic);
    let differing = q.trials.iter().filter(|t| t.outcome != q.baseline).count();
    check(
        generic && degenerate && differing == q.trials.len(),
        format!(
            "{} ellipsoid trials Darbouxian with graph {}: {generic}; {differing}/{} sphere trials differ from \
             the degenerate baseline",
            p.trials.len(),
            base.graph,
            q.trials.len()
        ),
    )
}

fn determinism() -> Outcome {
    let mut same = Vec::new();
    for spec in ["ellipsoid:3,2,1", "tube:3,1,0.3"] {
        let cfg = config(spec);
        let a = cmd_analyze(&cfg).and_then(|r| r.canonical_json()).map_err(|e| e.to_string())?;
        let b = cmd_analyze(&cfg).and_then(|r| r.canonical_json()).map_err(|e| e.to_string())?;
        same.push((spec, a == b, a.len()));
    }
    check(
        same.iter().all(|s| s.1),
        same.iter()
            .map(|(spec, eq, n)| format!("{spec}: identical {eq} ({n} bytes)"))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("Euler formula", euler_formula),
        ("triaxial ellipsoid configuration", triaxial_ellipsoid),
        ("Darbouxian inequality sweep", darbouxian_sweep),
        ("hyperbolicity criterion", hyperbolicity),
        ("confocal oracle", confocal_oracle),
        ("stability probe", stability_probe),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {name}: {tag} ({detail})", n + 1);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
