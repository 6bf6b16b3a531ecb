//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

pub type V3 = Vector3<f64>;

/// Principal curvatures of the axis-aligned ellipsoid at `p` (outward
/// normal) from the tangential projection of the Hessian of
/// `x^2/a^2 + y^2/b^2 + z^2/c^2 - 1`.
pub fn ellipsoid_curvatures(axes: [f64; 3], p: &V3) -> (f64, f64) {
    let h = Matrix3::from_diagonal(&V3::new(2.0 / axes[0].powi(2), 2.0 / axes[1].powi(2), 2.0 / axes[2].powi(2)));
    let g = h * p;
    let n = g.normalize();
    let proj = Matrix3::identity() - n * n.transpose();
    let m = proj * h * proj / g.norm();
    let eig = SymmetricEigen::new(m);
    // drop the eigenvalue belonging to the normal
    let mut ks: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.dot(&n).abs()))
        .collect();
    ks.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut k1, mut k2) = (-ks[0].0, -ks[1].0);
    if k1 > k2 {
        std::mem::swap(&mut k1, &mut k2);
    }
    (k1, k2)
}

/// Curvature of the planar normal section of a quadric through `p` in the
/// tangent direction `t`, from the exact section curve `s(t)` along `n`
/// and a Richardson-extrapolated second difference.
pub fn normal_section_curvature(
    value: &dyn Fn(&V3) -> f64,
    p: &V3,
    n: &V3,
    t: &V3,
) -> f64 {
    // height s(x) of the section over the tangent line, by bisection
    let height = |x: f64| -> f64 {
        let f = |s: f64| value(&(p + t * x + n * s));
        let (mut lo, mut hi) = (-0.5, 0.5);
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let d2 = |h: f64| (height(h) - 2.0 * height(0.0) + height(-h)) / (h * h);
    let h = 2e-3;
    (4.0 * d2(h / 2.0) - d2(h)) / 3.0
}

/// `k1, k2` from normal curvatures at 720 equally spaced angles, by fitting
/// `A + B cos 2t + C sin 2t`.
pub fn extremes_from_sections(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len() as f64;
    let a = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let b = 2.0 * samples.iter().map(|s| s.1 * (2.0 * s.0).cos()).sum::<f64>() / n;
    let c = 2.0 * samples.iter().map(|s| s.1 * (2.0 * s.0).sin()).sum::<f64>() / n;
    let r = b.hypot(c);
    (a - r, a + r)
}

/// Minimises `(k2 - k1)^2` of the axis-aligned ellipsoid over a
/// latitude/longitude grid of `rows x cols` samples, then polishes each
/// distinct local minimum by compass search. Returns the points.
pub fn brute_force_umbilics(axes: [f64; 3], rows: usize, cols: usize, threshold: f64) -> Vec<V3> {
    use std::f64::consts::PI;
    let point = |th: f64, ph: f64| V3::new(axes[0] * th.sin() * ph.cos(), axes[1] * th.sin() * ph.sin(), axes[2] * th.cos());
    let obj = |th: f64, ph: f64| {
        let (k1, k2) = ellipsoid_curvatures(axes, &point(th, ph));
        (k2 - k1).powi(2)
    };
    let grid: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let th = PI * ((i / cols) as f64 + 0.5) / rows as f64;
            let ph = 2.0 * PI * (i % cols) as f64 / cols as f64;
            obj(th, ph)
        })
        .collect();
    let mut found: Vec<V3> = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let g = grid[i * cols + j];
            if g > threshold {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let ii = i as i64 + di;
                    if (di == 0 && dj == 0) || ii < 0 || ii >= rows as i64 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(cols as i64) as usize;
                    if grid[ii as usize * cols + jj] < g {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let (mut th, mut ph) = (PI * (i as f64 + 0.5) / rows as f64, 2.0 * PI * j as f64 / cols as f64);
            let mut step = PI / rows as f64;
            let mut best = obj(th, ph);
            while step > 1e-13 {
                let mut moved = false;
                for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let v = obj(th + dt, ph + dp);
                    if v < best {
                        best = v;
                        th += dt;
                        ph += dp;
                        moved = true;
                        break;
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            let p = point(th, ph);
            if !found.iter().any(|q| (q - p).norm() < 1e-4) {
                found.push(p);
            }
        }
    }
    found
}

/// Closed-form umbilics of the ellipsoid `a > b > c`.
pub fn closed_form_umbilics(a: f64, b: f64, c: f64) -> Vec<V3> {
    let x = (a * a * (a * a - b * b) / (a * a - c * c)).sqrt();
    let z = (c * c * (b * b - c * c) / (a * a - c * c)).sqrt();
    let mut v = Vec::new();
    for sx in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            v.push(V3::new(sx * x, 0.0, sz * z));
        }
    }
    v
}
