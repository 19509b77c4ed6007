use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::system::PolySystem;
use crate::error::{Result, RomError};

/// Truncated Fourier series per coordinate,
/// `x_c(t) = c0 + sum_k (ck cos(k w t) + sk sin(k w t))`.
///
/// Row `c` of `coeffs` holds `[c0, c1, s1, c2, s2, ...]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicSignal {
    pub n_harm: usize,
    pub omega: f64,
    pub coeffs: DMatrix<f64>,
}

pub fn n_coeffs(n_harm: usize) -> usize {
    2 * n_harm + 1
}

/// Basis functions of phase `theta` and their first two phase derivatives.
fn basis(theta: f64, n_harm: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nc = n_coeffs(n_harm);
    let (mut b, mut db, mut ddb) = (vec![0.0; nc], vec![0.0; nc], vec![0.0; nc]);
    b[0] = 1.0;
    for k in 1..=n_harm {
        let kf = k as f64;
        let (s, c) = (kf * theta).sin_cos();
        b[2 * k - 1] = c;
        b[2 * k] = s;
        db[2 * k - 1] = -kf * s;
        db[2 * k] = kf * c;
        ddb[2 * k - 1] = -kf * kf * c;
        ddb[2 * k] = -kf * kf * s;
    }
    (b, db, ddb)
}

/// Samples `x`, `dx/dt`, `d2x/dt2` (coordinates x samples).
pub struct SignalSamples {
    pub x: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl HarmonicSignal {
    pub fn zeros(n_coords: usize, n_harm: usize, omega: f64) -> Self {
        HarmonicSignal {
            n_harm,
            omega,
            coeffs: DMatrix::zeros(n_coords, n_coeffs(n_harm)),
        }
    }

    pub fn n_coords(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn cos(&self, c: usize, k: usize) -> f64 {
        if k == 0 {
            self.coeffs[(c, 0)]
        } else {
            self.coeffs[(c, 2 * k - 1)]
        }
    }

    pub fn sin(&self, c: usize, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.coeffs[(c, 2 * k)]
        }
    }

    /// `sqrt(ck^2 + sk^2)`, or `|c0|` for `k = 0`.
    pub fn harmonic_amplitude(&self, c: usize, k: usize) -> f64 {
        self.cos(c, k).hypot(self.sin(c, k))
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// State `(x, dx/dt, d2x/dt2)` at time `t`.
    pub fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (b, db, ddb) = basis(self.omega * t, self.n_harm);
        let w = self.omega;
        (
            &self.coeffs * DVector::from_vec(b),
            &self.coeffs * DVector::from_vec(db) * w,
            &self.coeffs * DVector::from_vec(ddb) * (w * w),
        )
    }

    /// Values at `nt` uniform phases `2 pi m / nt`.
    pub fn sample(&self, nt: usize) -> SignalSamples {
        let nc = n_coeffs(self.n_harm);
        let mut b = DMatrix::zeros(nc, nt);
        let mut db = DMatrix::zeros(nc, nt);
        let mut ddb = DMatrix::zeros(nc, nt);
        for m in 0..nt {
            let (bb, dd, ee) = basis(2.0 * PI * m as f64 / nt as f64, self.n_harm);
            b.set_column(m, &DVector::from_vec(bb));
            db.set_column(m, &DVector::from_vec(dd));
            ddb.set_column(m, &DVector::from_vec(ee));
        }
        let w = self.omega;
        SignalSamples {
            x: &self.coeffs * b,
            v: &self.coeffs * db * w,
            a: &self.coeffs * ddb * (w * w),
        }
    }

    /// Fourier projection of uniformly sampled periodic data
    /// (coordinates x samples) on `n_harm` harmonics.
    pub fn from_samples(samples: &DMatrix<f64>, n_harm: usize, omega: f64) -> Self {
        let nt = samples.ncols();
        let w = projection_weights(n_harm, nt);
        HarmonicSignal {
            n_harm,
            omega,
            coeffs: samples * w.transpose(),
        }
    }

    /// Largest `|x_c(t)|` over one period, from `nt` samples.
    pub fn max_abs(&self, c: usize, nt: usize) -> f64 {
        self.sample(nt).x.row(c).amax()
    }

    /// Same orbit with a different number of harmonics (zero padded or
    /// truncated).
    pub fn resized(&self, n_harm: usize) -> Self {
        let mut out = HarmonicSignal::zeros(self.n_coords(), n_harm, self.omega);
        let nc = n_coeffs(n_harm.min(self.n_harm));
        out.coeffs
            .view_mut((0, 0), (self.n_coords(), nc))
            .copy_from(&self.coeffs.view((0, 0), (self.n_coords(), nc)));
        out
    }
}

/// Rows: coefficient index; columns: sample index.
fn projection_weights(n_harm: usize, nt: usize) -> DMatrix<f64> {
    let nc = n_coeffs(n_harm);
    let mut w = DMatrix::zeros(nc, nt);
    for m in 0..nt {
        let (b, _, _) = basis(2.0 * PI * m as f64 / nt as f64, n_harm);
        w[(0, m)] = 1.0 / nt as f64;
        for j in 1..nc {
            w[(j, m)] = 2.0 * b[j] / nt as f64;
        }
    }
    w
}

/// Harmonic-balance discretisation of a [`PolySystem`] with alternating
/// frequency/time evaluation on `4 n_harm + 1` samples, which projects cubic
/// products without aliasing.
///
/// Unknown vector: coefficients of coordinate 0, coordinate 1, ..., then
/// the frequency.
pub struct Hbm<'a> {
    pub system: &'a PolySystem,
    pub n_harm: usize,
    nt: usize,
    b: Vec<Vec<f64>>,
    db: Vec<Vec<f64>>,
    ddb: Vec<Vec<f64>>,
    w: DMatrix<f64>,
}

impl<'a> Hbm<'a> {
    pub fn new(system: &'a PolySystem, n_harm: usize) -> Result<Self> {
        if n_harm == 0 {
            return Err(RomError::InvalidParameter("n_harm must be at least 1".into()));
        }
        let nt = 4 * n_harm + 1;
        let mut b = Vec::with_capacity(nt);
        let mut db = Vec::with_capacity(nt);
        let mut ddb = Vec::with_capacity(nt);
        for m in 0..nt {
            let (x, y, z) = basis(2.0 * PI * m as f64 / nt as f64, n_harm);
            b.push(x);
            db.push(y);
            ddb.push(z);
        }
        Ok(Hbm {
            system,
            n_harm,
            nt,
            b,
            db,
            ddb,
            w: projection_weights(n_harm, nt),
        })
    }

    pub fn n_coeffs(&self) -> usize {
        n_coeffs(self.n_harm)
    }

    /// Number of equations (and of Fourier unknowns).
    pub fn n_eq(&self) -> usize {
        self.system.n() * self.n_coeffs()
    }

    pub fn index(&self, coord: usize, j: usize) -> usize {
        coord * self.n_coeffs() + j
    }

    pub fn pack(&self, s: &HarmonicSignal) -> Result<DVector<f64>> {
        if s.n_harm != self.n_harm || s.n_coords() != self.system.n() {
            return Err(RomError::dims("harmonic signal", self.n_eq(), s.coeffs.len()));
        }
        let mut z = DVector::zeros(self.n_eq() + 1);
        for c in 0..self.system.n() {
            for j in 0..self.n_coeffs() {
                z[self.index(c, j)] = s.coeffs[(c, j)];
            }
        }
        z[self.n_eq()] = s.omega;
        Ok(z)
    }

    pub fn unpack(&self, z: &DVector<f64>) -> HarmonicSignal {
        let n = self.system.n();
        let nc = self.n_coeffs();
        HarmonicSignal {
            n_harm: self.n_harm,
            omega: z[self.n_eq()],
            coeffs: DMatrix::from_fn(n, nc, |c, j| z[c * nc + j]),
        }
    }

    /// Time samples of displacement, phase derivative and second phase
    /// derivative at sample `m`.
    fn states(&self, z: &DVector<f64>, m: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.system.n();
        let nc = self.n_coeffs();
        let (mut x, mut xd, mut xdd) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for c in 0..n {
            for j in 0..nc {
                let zc = z[c * nc + j];
                x[c] += zc * self.b[m][j];
                xd[c] += zc * self.db[m][j];
                xdd[c] += zc * self.ddb[m][j];
            }
        }
        (x, xd, xdd)
    }

    /// Galerkin residual of the harmonic coefficients.
    pub fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        self.eval(z, false).0
    }

    /// Residual and its Jacobian with respect to all unknowns (last column:
    /// frequency).
    pub fn residual_jacobian(&self, z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (r, j) = self.eval(z, true);
        (r, j.expect("jacobian requested"))
    }

    fn eval(&self, z: &DVector<f64>, with_jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let n = self.system.n();
        let nc = self.n_coeffs();
        let omega = z[self.n_eq()];
        let mut res = DVector::zeros(self.n_eq());
        let mut jac = with_jac.then(|| DMatrix::<f64>::zeros(self.n_eq(), self.n_eq() + 1));
        let mut r = vec![0.0; n];
        // Per-sample sensitivity of the time residual to coefficient j of
        // coordinate c.
        let mut sens = DMatrix::<f64>::zeros(n, n * nc + 1);
        for m in 0..self.nt {
            let (x, xd, xdd) = self.states(z, m);
            let v: Vec<f64> = xd.iter().map(|q| q * omega).collect();
            let a: Vec<f64> = xdd.iter().map(|q| q * omega * omega).collect();
            self.system.residual_into(&x, &v, &a, &mut r);
            for e in 0..n {
                for jj in 0..nc {
                    res[e * nc + jj] += self.w[(jj, m)] * r[e];
                }
            }
            if let Some(jac) = jac.as_mut() {
                let p = self.system.partials(&x, &v, &a);
                for e in 0..n {
                    for c in 0..n {
                        let (dx, dv, da) = (p.dx[(e, c)], p.dv[(e, c)], p.da[(e, c)]);
                        for j in 0..nc {
                            sens[(e, c * nc + j)] = dx * self.b[m][j]
                                + dv * omega * self.db[m][j]
                                + da * omega * omega * self.ddb[m][j];
                        }
                    }
                    let mut dw = 0.0;
                    for c in 0..n {
                        dw += p.dv[(e, c)] * xd[c] + p.da[(e, c)] * 2.0 * omega * xdd[c];
                    }
                    sens[(e, n * nc)] = dw;
                }
                for e in 0..n {
                    for jj in 0..nc {
                        let wgt = self.w[(jj, m)];
                        if wgt == 0.0 {
                            continue;
                        }
                        let row = e * nc + jj;
                        for col in 0..=n * nc {
                            jac[(row, col)] += wgt * sens[(e, col)];
                        }
                    }
                }
            }
        }
        (res, jac)
    }
}

/// Outcome of a least-squares Newton solve.
pub struct Solved {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Gauss-Newton on a consistent (possibly overdetermined) system; each step
/// is the minimum-norm least-squares correction.
pub fn gauss_newton(
    mut f: impl FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
    z0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Solved> {
    let mut z = z0;
    let mut last = f64::INFINITY;
    for it in 0..=max_iter {
        let (r, j) = f(&z);
        let norm = r.amax();
        if !norm.is_finite() {
            return Err(RomError::Convergence("residual is not finite".into()));
        }
        if norm <= tol {
            return Ok(Solved {
                z,
                iterations: it,
                residual: norm,
            });
        }
        if it == max_iter || (it > 2 && norm > 0.5 * last && norm > 1e3 * tol) {
            break;
        }
        last = norm;
        let dz = lstsq(j, &(-r))?;
        z += dz;
    }
    Err(RomError::Convergence(format!(
        "Newton did not reach tolerance {tol:e} in {max_iter} iterations"
    )))
}

pub(crate) fn lstsq(j: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = j.svd(true, true);
    let eps = svd.singular_values.max() * 1e-13;
    svd.solve(rhs, eps)
        .map_err(|e| RomError::Singular(format!("least-squares step: {e}")))
}

/// Options shared by harmonic-balance solves.
#[derive(Clone, Copy, Debug)]
pub struct HbmOptions {
    pub n_harm: usize,
    /// Residual tolerance, relative to the largest stiffness entry.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HbmOptions {
    fn default() -> Self {
        HbmOptions {
            n_harm: 7,
            tol: 1e-10,
            max_iter: 25,
        }
    }
}

pub(crate) fn residual_tol(system: &PolySystem, tol: f64) -> f64 {
    tol * system.stiffness.amax().max(1.0)
}

/// Periodic orbit at fixed frequency, phase fixed by `s1(master) = 0`.
pub fn solve_fixed_frequency(
    system: &PolySystem,
    guess: &HarmonicSignal,
    master: usize,
    opts: HbmOptions,
) -> Result<(HarmonicSignal, f64)> {
    let guess = guess.resized(opts.n_harm);
    let hbm = Hbm::new(system, opts.n_harm)?;
    let z0 = hbm.pack(&guess)?;
    let omega = z0[hbm.n_eq()];
    let nu = hbm.n_eq();
    let phase = hbm.index(master, 2);
    let solved = gauss_newton(
        |zc| {
            let mut z = zc.clone().resize_vertically(nu + 1, 0.0);
            z[nu] = omega;
            let (r, j) = hbm.residual_jacobian(&z);
            let mut rr = r.resize_vertically(nu + 1, 0.0);
            rr[nu] = zc[phase];
            let mut jj = j.columns(0, nu).into_owned().resize_vertically(nu + 1, 0.0);
            jj[(nu, phase)] = 1.0;
            (rr, jj)
        },
        z0.rows(0, nu).into_owned(),
        residual_tol(system, opts.tol),
        opts.max_iter,
    )?;
    let mut z = solved.z.resize_vertically(nu + 1, 0.0);
    z[nu] = omega;
    Ok((hbm.unpack(&z), solved.residual))
}

/// Periodic orbit whose master first cosine harmonic equals `amp`, with
/// the frequency as unknown.
pub fn solve_at_amplitude(
    system: &PolySystem,
    guess: &HarmonicSignal,
    master: usize,
    amp: f64,
    opts: HbmOptions,
) -> Result<(HarmonicSignal, f64)> {
    let hbm = Hbm::new(system, opts.n_harm)?;
    let z0 = hbm.pack(&guess.resized(opts.n_harm))?;
    let nu = hbm.n_eq();
    let (phase, c1) = (hbm.index(master, 2), hbm.index(master, 1));
    let solved = gauss_newton(
        |z| {
            let (r, j) = hbm.residual_jacobian(z);
            let mut rr = r.resize_vertically(nu + 2, 0.0);
            rr[nu] = z[phase];
            rr[nu + 1] = z[c1] - amp;
            let mut jj = j.resize_vertically(nu + 2, 0.0);
            jj[(nu, phase)] = 1.0;
            jj[(nu + 1, c1)] = 1.0;
            (rr, jj)
        },
        z0,
        residual_tol(system, opts.tol),
        opts.max_iter,
    )?;
    Ok((hbm.unpack(&solved.z), solved.residual))
}
