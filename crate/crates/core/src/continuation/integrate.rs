use serde::Serialize;

use super::system::PolySystem;
use crate::error::{Result, RomError};

/// Substep counts of the extrapolation table (eighth order in `h`).
const SEQUENCE: [usize; 4] = [2, 4, 6, 8];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> (&[f64], &[f64]) {
        (self.x.last().expect("non-empty"), self.v.last().expect("non-empty"))
    }
}

fn rhs(system: &PolySystem, y: &[f64], out: &mut [f64]) -> Result<()> {
    let n = system.n();
    let a = system.acceleration(&y[..n], &y[n..])?;
    out[..n].copy_from_slice(&y[n..]);
    out[n..].copy_from_slice(&a);
    Ok(())
}

/// One modified-midpoint pass over `h` with `m` substeps.
fn midpoint(system: &PolySystem, y: &[f64], h: f64, m: usize) -> Result<Vec<f64>> {
    let len = y.len();
    let hs = h / m as f64;
    let mut f = vec![0.0; len];
    let mut z0 = y.to_vec();
    rhs(system, &z0, &mut f)?;
    let mut z1: Vec<f64> = (0..len).map(|i| z0[i] + hs * f[i]).collect();
    for _ in 1..m {
        rhs(system, &z1, &mut f)?;
        let z2: Vec<f64> = (0..len).map(|i| z0[i] + 2.0 * hs * f[i]).collect();
        z0 = z1;
        z1 = z2;
    }
    rhs(system, &z1, &mut f)?;
    Ok((0..len).map(|i| 0.5 * (z1[i] + z0[i] + hs * f[i])).collect())
}

/// Gragg-Bulirsch-Stoer step with fixed extrapolation depth (Neville
/// recursion in `h^2`).
fn gbs_step(system: &PolySystem, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut prev: Vec<Vec<f64>> = Vec::new();
    for (k, &nk) in SEQUENCE.iter().enumerate() {
        let mut row = vec![midpoint(system, y, h, nk)?];
        for j in 1..=k {
            let ratio = (nk as f64 / SEQUENCE[k - j] as f64).powi(2) - 1.0;
            let next = row[j - 1]
                .iter()
                .zip(&prev[j - 1])
                .map(|(a, b)| a + (a - b) / ratio)
                .collect();
            row.push(next);
        }
        prev = row;
    }
    Ok(prev.pop().expect("non-empty"))
}

/// Explicit fixed-step integration of `system` from `(x0, v0)` over
/// `t_span`, with the step adjusted to divide the span evenly.
pub fn integrate(
    system: &PolySystem,
    x0: &[f64],
    v0: &[f64],
    t_span: (f64, f64),
    dt: f64,
) -> Result<Trajectory> {
    let n = system.n();
    if x0.len() != n || v0.len() != n {
        return Err(RomError::dims("initial state", n, x0.len()));
    }
    let span = t_span.1 - t_span.0;
    if !(dt > 0.0) || !(span >= 0.0) {
        return Err(RomError::InvalidParameter(format!(
            "invalid time span {t_span:?} or step {dt}"
        )));
    }
    let steps = (span / dt).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
    };
    traj.t.push(t_span.0);
    traj.x.push(y[..n].to_vec());
    traj.v.push(y[n..].to_vec());
    for k in 1..=steps {
        y = gbs_step(system, &y, h)?;
        if y.iter().any(|q| !q.is_finite()) {
            return Err(RomError::Convergence(format!(
                "state diverged at t = {}",
                t_span.0 + k as f64 * h
            )));
        }
        traj.t.push(t_span.0 + k as f64 * h);
        traj.x.push(y[..n].to_vec());
        traj.v.push(y[n..].to_vec());
    }
    Ok(traj)
}
