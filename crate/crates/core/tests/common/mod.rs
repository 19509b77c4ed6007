#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use romlab_core::normal_form::NormalFormCoeffs;
use romlab_core::{CubicTensor, ModalModel, QuadTensor, StructuralModel};

/// Index permutations of `(i, j, k)` without repeats.
fn perms3(i: usize, j: usize, k: usize) -> Vec<(usize, usize, usize)> {
    let mut out = vec![(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)];
    out.sort_unstable();
    out.dedup();
    out
}

fn perms4(idx: [usize; 4]) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let set = [a, b, c, d];
                    if (0..4).all(|x| set.contains(&x)) {
                        out.push([idx[a], idx[b], idx[c], idx[d]]);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Random model whose forces derive from a potential: SPD mass and
/// stiffness, fully symmetric quadratic and cubic tensors.
pub fn random_model(n: usize, seed: u64) -> StructuralModel {
    let mut rng = StdRng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.3..0.3));
    let mass = DMatrix::identity(n, n) + &a * a.transpose();
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let stiffness = &b * b.transpose() + DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 1.0 + 3.0 * i as f64));
    let mut g = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                g.extend(perms3(i, j, k).into_iter().map(|(p, q, r)| (p, q, r, v)));
            }
        }
    }
    let mut h = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                for l in k..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    h.extend(perms4([i, j, k, l]).into_iter().map(|[p, q, r, s]| (p, q, r, s, v)));
                }
            }
        }
    }
    StructuralModel::new(
        mass,
        stiffness,
        QuadTensor::from_entries(n, g).unwrap(),
        CubicTensor::from_entries(n, h).unwrap(),
    )
    .unwrap()
}

/// Dense triple-loop restoring force.
pub fn force_by_loops(model: &StructuralModel, u: &DVector<f64>) -> DVector<f64> {
    let n = model.n();
    let mut f = &model.stiffness * u;
    for p in 0..n {
        for i in 0..n {
            for j in 0..n {
                f[p] += model.quadratic.get(p, i, j) * u[i] * u[j];
                for k in 0..n {
                    f[p] += model.cubic.get(p, i, j, k) * u[i] * u[j] * u[k];
                }
            }
        }
    }
    f
}

/// Second-order invariance residual of a single-master normal-form map,
/// evaluated at phase `theta` of the linear master orbit with unit
/// amplitude.
///
/// The quadratic part of each mapped coordinate is the even part of the map
/// (the map has degree at most three). Its time derivative along the linear
/// flow follows from polarisation of the quadratic form. Both the velocity
/// consistency `d/dt X2 = Y2` and the modal equations
/// `d/dt Y2_k + w_k^2 X2_k + g^k_pp R^2 = 0` are returned.
pub fn nf_quadratic_residual(nf: &NormalFormCoeffs, modal: &ModalModel, theta: f64) -> (f64, f64) {
    let p = nf.master;
    let wp = modal.omega[p];
    let even = |r: f64, s: f64| {
        let (x1, y1) = nf.map(r, s);
        let (x2, y2) = nf.map(-r, -s);
        ((x1 + x2) * 0.5, (y1 + y2) * 0.5)
    };
    // d/dt Q(u) = 2 B(u, f(u)), B(u, v) = (Q(u + v) - Q(u - v)) / 4.
    let rate = |q: &dyn Fn(f64, f64) -> DVector<f64>, r: f64, s: f64| {
        let (fr, fs) = (s, -wp * wp * r);
        (q(r + fr, s + fs) - q(r - fr, s - fs)) * 0.5
    };
    let (r, s) = (theta.cos(), -wp * theta.sin());
    let (qx, qy) = even(r, s);
    let dqx = rate(&|a, b| even(a, b).0, r, s);
    let dqy = rate(&|a, b| even(a, b).1, r, s);
    let velocity = (&dqx - &qy).amax();
    let mut dynamics: f64 = 0.0;
    for k in 0..modal.n_modes() {
        let res = dqy[k] + modal.omega2(k) * qx[k] + modal.g.get(k, p, p) * r * r;
        dynamics = dynamics.max(res.abs());
    }
    (velocity, dynamics)
}
