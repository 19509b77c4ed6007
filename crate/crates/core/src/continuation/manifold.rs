use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::backbone::{BackboneCurve, BranchPoint};
use super::hbm::HarmonicSignal;
use crate::error::{Result, RomError};
use crate::modal_derivatives::{qm_map, ModalDerivativeSet};
use crate::normal_form::NormalFormCoeffs;

/// Single-master mapping from reduced displacement and velocity `(R, S)`
/// to modal displacements and velocities.
pub trait ReducedMapping {
    fn master(&self) -> usize;
    fn n_modes(&self) -> usize;
    fn map(&self, r: f64, s: f64) -> (DVector<f64>, DVector<f64>);
}

impl ReducedMapping for NormalFormCoeffs {
    fn master(&self) -> usize {
        self.master
    }

    fn n_modes(&self) -> usize {
        self.omega.len()
    }

    fn map(&self, r: f64, s: f64) -> (DVector<f64>, DVector<f64>) {
        NormalFormCoeffs::map(self, r, s)
    }
}

/// Quadratic manifold of a single-master derivative set; velocities follow
/// from the tangent, `Y = (e_p + theta_bar R) S`.
pub struct QmMapping<'a>(pub &'a ModalDerivativeSet);

impl<'a> QmMapping<'a> {
    pub fn new(mds: &'a ModalDerivativeSet) -> Result<Self> {
        if mds.n_masters() != 1 {
            return Err(RomError::InvalidParameter(
                "single-master derivative set required".into(),
            ));
        }
        Ok(QmMapping(mds))
    }
}

impl ReducedMapping for QmMapping<'_> {
    fn master(&self) -> usize {
        self.0.masters[0]
    }

    fn n_modes(&self) -> usize {
        self.0.omega.len()
    }

    fn map(&self, r: f64, s: f64) -> (DVector<f64>, DVector<f64>) {
        let (_, x) = qm_map(self.0, &DVector::from_element(1, r)).expect("single master");
        let theta = self.0.theta_bar_modal(0, 0);
        let mut y = theta * (r * s);
        y[self.master()] += s;
        (x, y)
    }
}

/// Distance from the modal state `(x, y)` to the manifold, measured along
/// the slave directions: the reduced coordinates are chosen so that the
/// master components match, then the remaining gap is returned.
pub fn manifold_distance(mapping: &dyn ReducedMapping, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let p = mapping.master();
    let n = mapping.n_modes();
    if x.len() != n || y.len() != n {
        return Err(RomError::dims("modal state", n, x.len()));
    }
    let master = |r: f64, s: f64| {
        let (mx, my) = mapping.map(r, s);
        (mx[p], my[p])
    };
    let (mut r, mut s) = (x[p], y[p]);
    let scale = 1.0 + x[p].abs().max(y[p].abs());
    for _ in 0..50 {
        let (fx, fy) = master(r, s);
        let (ex, ey) = (fx - x[p], fy - y[p]);
        if ex.abs().max(ey.abs()) <= 1e-14 * scale {
            break;
        }
        let h = 1e-7 * scale;
        let (rx, ry) = master(r + h, s);
        let (sx, sy) = master(r, s + h);
        let j = nalgebra::Matrix2::new((rx - fx) / h, (sx - fx) / h, (ry - fy) / h, (sy - fy) / h);
        let step = j
            .try_inverse()
            .ok_or_else(|| RomError::Singular("manifold fold reached".into()))?
            * nalgebra::Vector2::new(ex, ey);
        r -= step[0];
        s -= step[1];
    }
    let (mx, my) = mapping.map(r, s);
    Ok(((x - mx).norm_squared() + (y - my).norm_squared()).sqrt())
}

/// Table of manifold samples with named columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldSample {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn xy_columns(n: usize) -> Vec<String> {
    (0..n)
        .map(|k| format!("X{k}"))
        .chain((0..n).map(|k| format!("Y{k}")))
        .collect()
}

/// Grid evaluation: columns `R, S, X0.., Y0..`.
pub fn manifold_scan(mapping: &dyn ReducedMapping, r_grid: &[f64], s_grid: &[f64]) -> ManifoldSample {
    let mut columns = vec!["R".to_string(), "S".to_string()];
    columns.extend(xy_columns(mapping.n_modes()));
    let mut rows = Vec::with_capacity(r_grid.len() * s_grid.len());
    for &r in r_grid {
        for &s in s_grid {
            let (x, y) = mapping.map(r, s);
            let mut row = vec![r, s];
            row.extend(x.iter().chain(y.iter()));
            rows.push(row);
        }
    }
    ManifoldSample { columns, rows }
}

/// Orbit samples of a full-system backbone: columns `omega, phase, X0.., Y0..`.
pub fn fs_manifold(curve: &BackboneCurve, samples_per_orbit: usize) -> ManifoldSample {
    let n = curve.points.first().map_or(0, |p| p.signal.n_coords());
    let mut columns = vec!["omega".to_string(), "phase".to_string()];
    columns.extend(xy_columns(n));
    let mut rows = Vec::new();
    for p in &curve.points {
        let s = p.signal.sample(samples_per_orbit);
        for m in 0..samples_per_orbit {
            let mut row = vec![p.omega, 2.0 * std::f64::consts::PI * m as f64 / samples_per_orbit as f64];
            row.extend(s.x.column(m).iter().chain(s.v.column(m).iter()));
            rows.push(row);
        }
    }
    ManifoldSample { columns, rows }
}

/// Maps a one-coordinate reduced backbone to modal coordinates, keeping
/// `n_harm_out` harmonics of the mapped orbit. The master measures of the
/// result refer to `X_p`.
pub fn map_backbone(
    curve: &BackboneCurve,
    mapping: &dyn ReducedMapping,
    n_harm_out: usize,
) -> Result<BackboneCurve> {
    let nt = 4 * n_harm_out + 1;
    let n = mapping.n_modes();
    let mut points = Vec::with_capacity(curve.points.len());
    for p in &curve.points {
        if p.signal.n_coords() != 1 {
            return Err(RomError::dims("reduced backbone coordinates", 1, p.signal.n_coords()));
        }
        let s = p.signal.sample(nt);
        let mut xs = DMatrix::zeros(n, nt);
        for m in 0..nt {
            let (x, _) = mapping.map(s.x[(0, m)], s.v[(0, m)]);
            xs.set_column(m, &x);
        }
        let sig = HarmonicSignal::from_samples(&xs, n_harm_out, p.omega);
        points.push(BranchPoint::new(sig, mapping.master(), p.residual));
    }
    Ok(BackboneCurve {
        label: curve.label.clone(),
        master: mapping.master(),
        points,
        status: curve.status.clone(),
    })
}
