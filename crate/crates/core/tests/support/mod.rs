//! Independent reference computations for the acceptance checks.

#![allow(dead_code)]

use std::sync::Mutex;

use bioinverse_core::lmsolver::{ModelFailure, ResidualFn};

/// Least-squares solution of `A x ≈ b` by Householder QR.
pub fn lstsq(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = a.len();
    let n = a[0].len();
    let mut r: Vec<Vec<f64>> = a.to_vec();
    let mut y = b.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * r[i][j]).sum::<f64>() * 2.0 / vv;
            for i in k..m {
                r[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..m).map(|i| v[i - k] * y[i]).sum::<f64>() * 2.0 / vv;
        for i in k..m {
            y[i] -= s * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| r[k][j] * x[j]).sum();
        x[k] = (y[k] - s) / r[k][k];
    }
    x
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(mut s: Vec<Vec<f64>>) -> Vec<f64> {
    let n = s.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| s[i][j] * s[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|i| s[i][i]).collect()
}

/// 2-norm condition number of a tall matrix.
pub fn condition_number(a: &[Vec<f64>]) -> f64 {
    let n = a[0].len();
    let ata: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a.iter().map(|row| row[i] * row[j]).sum()).collect())
        .collect();
    let ev = symmetric_eigenvalues(ata);
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    (max / min).sqrt()
}

/// Signed ray distance by dense sampling: each segment is sampled, sign
/// changes of the side function are refined by bisection, and the hit with
/// the smallest magnitude wins (the negative one on a tie).
pub fn brute_force_distance(
    origin: [f64; 2],
    dir: [f64; 2],
    max_length: f64,
    vertices: &[[f64; 2]],
    closed: bool,
    samples: usize,
) -> Option<f64> {
    let side = |p: [f64; 2]| dir[0] * (p[1] - origin[1]) - dir[1] * (p[0] - origin[0]);
    let along = |p: [f64; 2]| dir[0] * (p[0] - origin[0]) + dir[1] * (p[1] - origin[1]);
    let lerp = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let mut hits = Vec::new();
    let n = vertices.len();
    let segs = if closed { n } else { n - 1 };
    for k in 0..segs {
        let a = vertices[k];
        let b = vertices[(k + 1) % n];
        let mut s0 = 0.0;
        let mut g0 = side(a);
        for i in 1..=samples {
            let s1 = i as f64 / samples as f64;
            let g1 = side(lerp(a, b, s1));
            if g0 == 0.0 {
                hits.push(along(lerp(a, b, s0)));
            } else if g0 * g1 < 0.0 {
                let (mut lo, mut hi) = (s0, s1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if side(lerp(a, b, mid)) * g0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-17 {
                        break;
                    }
                }
                hits.push(along(lerp(a, b, 0.5 * (lo + hi))));
            }
            if i == samples && g1 == 0.0 {
                hits.push(along(b));
            }
            s0 = s1;
            g0 = g1;
        }
    }
    hits.retain(|t| t.abs() <= max_length);
    hits.into_iter().reduce(|best, t| {
        if t.abs() < best.abs() - 1e-12 || ((t.abs() - best.abs()).abs() <= 1e-12 && t < best) {
            t
        } else {
            best
        }
    })
}

/// Records every parameter vector passed to the wrapped residual.
pub struct Counting<R> {
    pub inner: R,
    pub calls: Mutex<Vec<Vec<f64>>>,
}

impl<R> Counting<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn log(&self) -> Vec<Vec<f64>> {
        self.calls.lock().unwrap().clone()
    }
}

impl<R: ResidualFn<f64>> ResidualFn<f64> for Counting<R> {
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, ModelFailure> {
        self.calls.lock().unwrap().push(x.to_vec());
        self.inner.residual(x)
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
