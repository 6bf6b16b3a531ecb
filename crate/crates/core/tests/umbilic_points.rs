mod common;

use common::{brute_force_umbilics, closed_form_umbilics, V3};
use nalgebra::Matrix3;
use principal_core::poly::Poly3;
use principal_core::umbilic::*;
use principal_core::{ImplicitQuadric, Site, SurfaceModel};
use proptest::prelude::*;

const TOL: f64 = DEFAULT_TOL_CLASS;

fn verdict(a: f64, b: f64, c: f64) -> Verdict {
    classify_darbouxian(&CubicJet::new(1.0, a, b, c), TOL).0
}

/// Height series `k/2 (u^2+v^2) + a/6 u^3 + b/2 u v^2 + c/6 v^3`, optionally
/// expressed in a chart rotated by `angle`.
fn normal_form(k: f64, a: f64, b: f64, c: f64, angle: f64) -> Poly3 {
    let mut p = Poly3::zero();
    p.set(2, 0, 0.5 * k);
    p.set(0, 2, 0.5 * k);
    p.set(3, 0, a / 6.0);
    p.set(1, 2, 0.5 * b);
    p.set(0, 3, c / 6.0);
    let (s, co) = angle.sin_cos();
    p.compose(&Poly3::linear(co, s), &Poly3::linear(-s, co))
}

#[test]
fn sphere_is_everywhere_umbilic() {
    let s = SurfaceModel::sphere(1.0);
    let search = find_umbilics(&s, &SearchConfig::default());
    assert!(matches!(search, UmbilicSearch::EverywhereUmbilic { .. }));
    let report = sigma_membership_local(&search, &[]);
    assert!(!report.holds && report.everywhere_umbilic);
}

#[test]
fn triaxial_ellipsoid_umbilics_match_brute_force_oracle() {
    let s = SurfaceModel::ellipsoid(3.0, 2.0, 1.0);
    let search = find_umbilics(&s, &SearchConfig::default());
    let found: Vec<V3> = search.points().iter().map(|p| V3::from(p.point)).collect();
    assert_eq!(found.len(), 4);
    let oracle = brute_force_umbilics([3.0, 2.0, 1.0], 1000, 1000, 1e-3);
    assert_eq!(oracle.len(), 4);
    for p in &found {
        let d = oracle.iter().map(|q| (q - p).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-6, "{p:?} is {d} from the oracle");
        assert!(p.y.abs() < 1e-9);
        assert!((p.x.abs() - 2.3717).abs() < 1e-4 && (p.z.abs() - 0.6124).abs() < 1e-4);
    }
    for q in closed_form_umbilics(3.0, 2.0, 1.0) {
        let d = found.iter().map(|p| (q - p).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-9);
    }
}

#[test]
fn revolution_ellipsoid_has_two_polar_umbilics() {
    let s = SurfaceModel::ellipsoid(2.0, 2.0, 1.0);
    let (search, pts) = umbilics(&s, &SearchConfig::default(), TOL);
    let found: Vec<V3> = search.points().iter().map(|p| V3::from(p.point)).collect();
    assert_eq!(found.len(), 2);
    for p in &found {
        assert!((p - V3::new(0.0, 0.0, p.z.signum())).norm() < 1e-6, "{p:?}");
    }
    // the SO(2)-invariant jet violates T
    assert!(pts.iter().all(|p| !p.verdict.is_darbouxian()));
    let report = sigma_membership_local(&search, &pts);
    assert!(!report.holds);
}

#[test]
fn adapted_monge_patch_is_returned_unchanged() {
    let s = SurfaceModel::monge_cubic(1.0, 4.0, 1.0, 0.0, 0.5);
    let j = adapted_jet(&s, &Site::chart(0.0, 0.0)).unwrap();
    assert_eq!(j.phi, 0.0);
    for (got, want) in [(j.k, 1.0), (j.a, 4.0), (j.b, 1.0), (j.c, 0.0)] {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn rotated_monge_patch_recovers_the_jet() {
    let s = SurfaceModel::monge_cubic_rotated(1.0, 4.0, 1.0, 0.0, 17f64.to_radians(), 0.5);
    let j = adapted_jet(&s, &Site::chart(0.0, 0.0)).unwrap();
    for (got, want) in [(j.k, 1.0), (j.a, 4.0), (j.b, 1.0), (j.c, 0.0)] {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
    assert!(j.residual <= 1e-10 * j.scale());
}

/// Exact height of the quadric over the plane through `x0` spanned by
/// `e1, e2`, along `n`.
fn quadric_height(q: &ImplicitQuadric, x0: &V3, axes: &[V3; 3], s: f64, t: f64) -> f64 {
    let a: Matrix3<f64> = q.matrix();
    let n = axes[2];
    let base = x0 + axes[0] * s + axes[1] * t;
    let qa = n.dot(&(a * n));
    let qb = 2.0 * base.dot(&(a * n)) + q.linear().dot(&n);
    let qc = q.value(&base);
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let r = -0.5 * (qb + qb.signum() * disc);
    qc / r
}

#[test]
fn ellipsoid_umbilic_jet_matches_exact_height() {
    let q = ImplicitQuadric::ellipsoid(3.0, 2.0, 1.0);
    let s = SurfaceModel::ellipsoid(3.0, 2.0, 1.0);
    let (_, pts) = umbilics(&s, &SearchConfig::default(), TOL);
    assert_eq!(pts.len(), 4);
    for p in &pts {
        let j = p.jet.as_ref().unwrap();
        let axes = j.axes.unwrap().map(V3::from);
        let x0 = p.point();
        let w = |s: f64, t: f64| quadric_height(&q, &x0, &axes, s, t);
        let h = 1e-3;
        let wss = (w(h, 0.0) - 2.0 * w(0.0, 0.0) + w(-h, 0.0)) / (h * h);
        let wsss = (w(2.0 * h, 0.0) - 2.0 * w(h, 0.0) + 2.0 * w(-h, 0.0) - w(-2.0 * h, 0.0)) / (2.0 * h.powi(3));
        let wttt = (w(0.0, 2.0 * h) - 2.0 * w(0.0, h) + 2.0 * w(0.0, -h) - w(0.0, -2.0 * h)) / (2.0 * h.powi(3));
        let wstt = ((w(h, h) - 2.0 * w(h, 0.0) + w(h, -h)) - (w(-h, h) - 2.0 * w(-h, 0.0) + w(-h, -h))) / (2.0 * h.powi(3));
        let wsst = ((w(h, h) - 2.0 * w(0.0, h) + w(-h, h)) - (w(h, -h) - 2.0 * w(0.0, -h) + w(-h, -h))) / (2.0 * h.powi(3));
        assert!((j.k - wss).abs() < 1e-5);
        assert!((j.a - wsss).abs() < 1e-5, "{} {}", j.a, wsss);
        assert!((j.b - wstt).abs() < 1e-5, "{} {}", j.b, wstt);
        assert!((j.c - wttt).abs() < 1e-5);
        assert!(wsst.abs() < 1e-5);
        // frozen values: k = -ac/b^3 for the outward normal, a/b = 3, c = 0
        assert!((j.k + 0.375).abs() < 1e-10);
        assert!((j.a.abs() - 0.544638283060).abs() < 1e-9);
        assert!((j.b.abs() - 0.181546094353).abs() < 1e-9);
        assert!(j.c.abs() < 1e-9);
        assert!(j.b * (j.b - j.a) != 0.0);
        assert_eq!(p.verdict, Verdict::D1);

        // O(rho^4) agreement of the jet with the surface
        let rho = 1e-2 * s.length_scale;
        let kappa = j.k.abs().max(1.0 / s.length_scale);
        for i in 0..16 {
            let th = std::f64::consts::PI * i as f64 / 8.0;
            let (u, v) = (rho * th.cos(), rho * th.sin());
            let err = (j.height(u, v) - w(u, v)).abs();
            assert!(err < 5.0 * rho.powi(4) * kappa.powi(3), "{err}");
        }
    }
}

#[test]
fn classification_examples() {
    assert_eq!(verdict(4.0, 1.0, 0.0), Verdict::D1);
    assert_eq!(verdict(1.5, 1.0, 0.0), Verdict::D2);
    assert_eq!(verdict(0.5, 1.0, 0.0), Verdict::D3);
    // a = 2b lies inside the D2 band once c != 0 and is excluded
    for c in [0.5, -1.0, 3.0] {
        let v = verdict(2.0, 1.0, c);
        assert!(matches!(v, Verdict::NonDarbouxian(_)), "{v:?}");
    }
    assert_eq!(
        verdict(2.0, 1.0, 1.0),
        Verdict::NonDarbouxian(NonDarbouxianReason::BoundaryCase(Condition::TwoB))
    );
    assert_eq!(
        verdict(1.0, 1.0, 0.2),
        Verdict::NonDarbouxian(NonDarbouxianReason::TransversalityFails)
    );
    assert_eq!(
        verdict(1.0 + 1e-9, 1.0, 0.2),
        Verdict::NonDarbouxian(NonDarbouxianReason::TransversalityFails)
    );
}

/// Curvature-line coefficients `(A, B, C)` of `A p^2 + B p + C = 0` for the
/// graph of the full normal form, from its own derivatives.
fn line_equation(k: f64, a: f64, b: f64, c: f64, u: f64, v: f64) -> [f64; 3] {
    let hu = k * u + 0.5 * a * u * u + 0.5 * b * v * v;
    let hv = k * v + b * u * v + 0.5 * c * v * v;
    let huu = k + a * u;
    let huv = b * v;
    let hvv = k + b * u + c * v;
    let (e_big, f_big, g_big) = (1.0 + hu * hu, hu * hv, 1.0 + hv * hv);
    let w = (1.0 + hu * hu + hv * hv).sqrt();
    let (e, f, g) = (huu / w, huv / w, hvv / w);
    [f_big * g - g_big * f, e_big * g - g_big * e, e_big * f - f_big * e]
}

struct Portrait {
    slopes: Vec<f64>,
    saddles: Vec<bool>,
}

/// Singular points of the lifted field `(F_p, p F_p, -(F_u + p F_v))` on
/// the slope axis, located on a 400-angle scan and typed by the eigenvalues
/// of its finite-difference Jacobian.
fn phase_portrait(k: f64, a: f64, b: f64, c: f64) -> Portrait {
    let big_f = |u: f64, v: f64, p: f64| {
        let [ca, cb, cc] = line_equation(k, a, b, c, u, v);
        ca * p * p + cb * p + cc
    };
    let h = 1e-6;
    let field = |x: [f64; 3]| -> [f64; 3] {
        let [u, v, p] = x;
        let fp = (big_f(u, v, p + h) - big_f(u, v, p - h)) / (2.0 * h);
        let fu = (big_f(u + h, v, p) - big_f(u - h, v, p)) / (2.0 * h);
        let fv = (big_f(u, v + h, p) - big_f(u, v - h, p)) / (2.0 * h);
        [fp, p * fp, -(fu + p * fv)]
    };
    let phi = |p: f64| field([0.0, 0.0, p])[2];
    let n = 400;
    let angles: Vec<f64> = (0..=n)
        .map(|i| -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (i as f64 + 0.5) / (n as f64 + 1.0))
        .collect();
    let mut slopes = Vec::new();
    for w in angles.windows(2) {
        let (mut lo, mut hi) = (w[0].tan(), w[1].tan());
        if phi(lo).signum() == phi(hi).signum() {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if phi(mid).signum() == phi(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        slopes.push(0.5 * (lo + hi));
    }
    let d = 1e-4;
    let saddles = slopes
        .iter()
        .map(|&p| {
            let x0 = [0.0, 0.0, p];
            let mut jac = Matrix3::zeros();
            for col in 0..3 {
                let (mut xp, mut xm) = (x0, x0);
                xp[col] += d;
                xm[col] -= d;
                let (fp, fm) = (field(xp), field(xm));
                for row in 0..3 {
                    jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * d);
                }
            }
            let mut ev: Vec<f64> = jac.complex_eigenvalues().iter().map(|z| z.re).collect();
            ev.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
            // the smallest eigenvalue is the zero across the lifted surface
            ev[1] * ev[2] < 0.0
        })
        .collect();
    Portrait { slopes, saddles }
}

#[test]
fn lie_cartan_census_matches_phase_portraits() {
    for (a, b, c, roots, saddles) in [
        (4.0, 1.0, 0.0, 1, 1),
        (0.5, 1.0, 0.0, 3, 3),
        (1.5, 1.0, 0.0, 3, 2),
        (5.0, 1.0, 1.2, 1, 1),
        (-1.0, 0.5, 0.7, 3, 3),
        (1.6, 1.0, 0.9, 3, 2),
    ] {
        let jet = CubicJet::new(1.0, a, b, c);
        let sing = lie_cartan_resolution(&jet, TOL).unwrap();
        let portrait = phase_portrait(1.0, a, b, c);
        assert_eq!(sing.len(), roots, "({a},{b},{c})");
        assert_eq!(portrait.slopes.len(), roots, "({a},{b},{c})");
        for (x, (p, saddle)) in sing.iter().zip(portrait.slopes.iter().zip(&portrait.saddles)) {
            assert!((x.slope - p).abs() < 1e-6, "{} vs {p}", x.slope);
            assert_eq!(x.kind == LocalType::Saddle, *saddle);
        }
        assert_eq!(separatrix_count(&sing), saddles);
        assert_eq!(portrait.saddles.iter().filter(|s| **s).count(), saddles);
        assert_eq!(classify_darbouxian(&jet, TOL).0.subscript(), Some(saddles));
    }
}

#[test]
fn root_conditioning_is_reported_at_d1_d2_boundary() {
    // c^2 = 4 b (a - 2b)
    let jet = CubicJet::new(1.0, 3.0, 1.0, 2.0);
    assert!(matches!(lie_cartan_resolution(&jet, TOL), Err(principal_core::UmbilicError::RootConditioning(_))));
    assert_eq!(
        classify_darbouxian(&jet, TOL).0,
        Verdict::NonDarbouxian(NonDarbouxianReason::BoundaryCase(Condition::D1D2))
    );
}

#[test]
fn verdict_agrees_across_every_adapted_rotation() {
    for (a, b, c) in [(0.5, 1.0, 0.3), (1.5, 1.0, 0.2), (-2.0, 1.0, 0.9), (6.0, 1.0, 0.1)] {
        for angle in [0.0, 0.3, 1.1, 2.0] {
            let h = normal_form(1.0, a, b, c, angle);
            let jets = jets_at_all_rotations(&h, 1.0).unwrap();
            let base = verdict(a, b, c);
            for j in &jets {
                assert!(j.residual < 1e-12);
                assert_eq!(classify_darbouxian(j, TOL).0, base, "phi={} of {:?}", j.phi, j.all_phi);
            }
        }
    }
}

#[test]
fn local_sigma_of_triaxial_ellipsoid_holds() {
    let s = SurfaceModel::ellipsoid(3.0, 2.0, 1.0);
    let (search, pts) = umbilics(&s, &SearchConfig::default(), TOL);
    let r = sigma_membership_local(&search, &pts);
    assert!(r.holds && r.coverage_complete);
    assert_eq!(r.verdicts.len(), 4);
    assert!(r.margins.iter().all(|(_, m)| *m > TOL));
}

#[test]
fn separatrix_tangents_lie_in_the_symmetry_plane() {
    let s = SurfaceModel::ellipsoid(3.0, 2.0, 1.0);
    let (_, pts) = umbilics(&s, &SearchConfig::default(), TOL);
    for p in pts {
        assert_eq!(p.separatrices.len(), 1);
        assert!(p.separatrices[0].tangent[1].abs() < 1e-9);
    }
}

/// Rotation-invariant mean square of the cubic part over the unit circle.
fn cubic_norm(j: &CubicJet) -> f64 {
    let n = 64;
    (0..n)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / n as f64;
            let (u, v) = (th.cos(), th.sin());
            let cubic = j.height(u, v) - 0.5 * j.k;
            cubic * cubic
        })
        .sum::<f64>()
        / n as f64
}

fn jet_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-2.0f64..2.0, -5.0f64..5.0, prop_oneof![-3.0f64..-0.2, 0.2f64..3.0], -4.0f64..4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn verdict_invariant_under_rotation_and_normal_flip((k, a, b, c) in jet_strategy(), angle in 0.0f64..6.28) {
        let base = classify_darbouxian(&CubicJet::new(k, a, b, c), TOL).0;
        let rotated = adapted_jet_from_height(&normal_form(k, a, b, c, angle), None, 1.0).unwrap();
        let flipped = adapted_jet_from_height(&normal_form(k, a, b, c, angle).scale(-1.0), None, 1.0).unwrap();
        for j in [&rotated, &flipped] {
            prop_assert_eq!(classify_darbouxian(j, TOL).0, base);
            let (n0, n1) = (cubic_norm(&CubicJet::new(k, a, b, c)), cubic_norm(j));
            prop_assert!((n0 - n1).abs() < 1e-9 * (1.0 + n0));
        }
        prop_assert!((flipped.k + k).abs() < 1e-9);
    }

    #[test]
    fn verdict_is_scale_covariant((k, a, b, c) in jet_strategy(), lambda in 0.1f64..10.0) {
        let base = classify_darbouxian(&CubicJet::new(k, a, b, c), TOL).0;
        let scaled = CubicJet::new(k / lambda, a / (lambda * lambda), b / (lambda * lambda), c / (lambda * lambda));
        // the k^2 term of the scale moves with the cubic
        prop_assert_eq!(classify_darbouxian(&scaled, TOL).0, base);
    }

    #[test]
    fn transversality_failures_are_never_darbouxian(k in -2.0f64..2.0, b in -3.0f64..3.0, c in -4.0f64..4.0, z in prop::bool::ANY) {
        let a = if z { b } else { 5.0 };
        let b = if z { b } else { 0.0 };
        let v = classify_darbouxian(&CubicJet::new(k, a, b, c), TOL).0;
        prop_assert!(!v.is_darbouxian());
    }
}

#[test]
fn classification_agrees_with_direct_inequalities_on_a_sweep() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut tested = 0;
    let mut per_type = [0usize; 3];
    while tested < 200 {
        let (a, b, c) = (rng.random_range(-6.0..6.0), rng.random_range(-3.0..3.0), rng.random_range(-4.0..4.0));
        let jet = CubicJet::new(rng.random_range(-1.0..1.0), a, b, c);
        let s = jet.scale();
        let t = b * (b - a);
        let (r, thr) = (a / b, (c / (2.0 * b)).powi(2) + 2.0);
        let m = 1f64.max(r.abs()).max(thr);
        let clear = t.abs() > 10.0 * TOL * s * s
            && (r - thr).abs() > 10.0 * TOL * m
            && (r - 1.0).abs() > 10.0 * TOL * m
            && (a - 2.0 * b).abs() > 10.0 * TOL * s
            && (c * c - 4.0 * b * (a - 2.0 * b)).abs() > 10.0 * TOL * s * s;
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
        let got = classify_darbouxian(&jet, TOL).0;
        assert_eq!(got, expected, "({a},{b},{c})");
        let sing = lie_cartan_resolution(&jet, TOL).unwrap();
        assert_eq!(Some(separatrix_count(&sing)), got.subscript());
        per_type[got.subscript().unwrap() - 1] += 1;
        tested += 1;
    }
    assert!(per_type.iter().all(|&n| n > 10), "{per_type:?}");
}

#[test]
fn adapted_root_next_to_zero_is_found() {
    for eps in [1e-17, -1e-17, 1e-14, -1e-14, 0.0] {
        let mut h = normal_form(1.0, 4.0, 1.0, 0.0, 0.0);
        h.set(2, 1, eps);
        let j = adapted_jet_from_height(&h, None, 1.0).unwrap();
        assert!((j.a - 4.0).abs() < 1e-9 && (j.b - 1.0).abs() < 1e-9, "{eps}: {j:?}");
        assert_eq!(classify_darbouxian(&j, TOL).0, Verdict::D1);
    }
}
