use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::hbm::{gauss_newton, residual_tol, solve_at_amplitude, Hbm, HarmonicSignal, HbmOptions};
use super::system::PolySystem;
use crate::eigen::eigenpairs;
use crate::error::{Result, RomError};

/// Samples per period used for the max-amplitude measure.
pub const AMPLITUDE_SAMPLES: usize = 256;

#[derive(Clone, Copy, Debug)]
pub struct BackboneOptions {
    pub hbm: HbmOptions,
    /// Coordinate carrying the phase condition and the amplitude measure.
    pub master: usize,
    /// Stop once the max-amplitude measure exceeds this value.
    pub max_amp: f64,
    pub steps: usize,
    pub start_amp: f64,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Stop once the frequency falls below this fraction of the linear one.
    pub min_omega_ratio: f64,
}

impl Default for BackboneOptions {
    fn default() -> Self {
        BackboneOptions {
            hbm: HbmOptions::default(),
            master: 0,
            max_amp: 1.0,
            steps: 2000,
            start_amp: 1e-3,
            ds: 0.01,
            ds_min: 1e-7,
            ds_max: 0.02,
            min_omega_ratio: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub omega: f64,
    pub signal: HarmonicSignal,
    /// `max_t |x_master(t)|`.
    pub amplitude: f64,
    /// First-harmonic amplitude of the master coordinate.
    pub h1: f64,
    pub residual: f64,
}

impl BranchPoint {
    pub fn new(signal: HarmonicSignal, master: usize, residual: f64) -> Self {
        BranchPoint {
            omega: signal.omega,
            amplitude: signal.max_abs(master, AMPLITUDE_SAMPLES),
            h1: signal.harmonic_amplitude(master, 1),
            signal,
            residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AmplitudeCap,
    StepLimit,
    /// The branch ran towards zero frequency (a separatrix or a fold of
    /// the reduced mass).
    FrequencyFloor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    Completed(StopReason),
    Terminated(String),
}

impl BranchStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, BranchStatus::Completed(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackboneCurve {
    pub label: String,
    pub master: usize,
    pub points: Vec<BranchPoint>,
    pub status: BranchStatus,
}

/// Which branch measure to interpolate on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    MaxAbs,
    FirstHarmonic,
}

impl BackboneCurve {
    fn measure(p: &BranchPoint, m: Measure) -> f64 {
        match m {
            Measure::MaxAbs => p.amplitude,
            Measure::FirstHarmonic => p.h1,
        }
    }

    /// Frequency at the first crossing of amplitude `a`, linearly
    /// interpolated between branch points.
    pub fn omega_at(&self, a: f64, m: Measure) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a0, a1) = (Self::measure(&w[0], m), Self::measure(&w[1], m));
            if (a0 - a) * (a1 - a) <= 0.0 && a0 != a1 {
                let t = (a - a0) / (a1 - a0);
                Some(w[0].omega + t * (w[1].omega - w[0].omega))
            } else {
                None
            }
        })
    }

    /// Index of the last point before the first crossing of `a`.
    pub fn bracket(&self, a: f64, m: Measure) -> Option<usize> {
        self.points.windows(2).position(|w| {
            (Self::measure(&w[0], m) - a) * (Self::measure(&w[1], m) - a) <= 0.0
        })
    }

    pub fn max_measure(&self, m: Measure) -> f64 {
        self.points.iter().map(|p| Self::measure(p, m)).fold(0.0, f64::max)
    }
}

fn phase_row(hbm: &Hbm, master: usize) -> usize {
    hbm.index(master, 2)
}

/// Residual and phase condition as a square system.
fn square(hbm: &Hbm, master: usize, z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let nu = hbm.n_eq();
    let (r, j) = hbm.residual_jacobian(z);
    let mut rr = r.resize_vertically(nu + 1, 0.0);
    let ph = phase_row(hbm, master);
    rr[nu] = z[ph];
    let mut jj = j.resize_vertically(nu + 1, 0.0);
    jj[(nu, ph)] = 1.0;
    (rr, jj)
}

/// Unit null direction of the square system: the branch tangent.
fn tangent(j: DMatrix<f64>) -> DVector<f64> {
    let svd = j.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let k = svd.singular_values.imin();
    v_t.row(k).transpose().normalize()
}

/// Backbone of the mode whose linear frequency is closest to `omega_start`,
/// by pseudo-arclength continuation of harmonic-balance orbits.
///
/// `direction > 0` follows increasing master amplitude.
pub fn backbone(
    system: &PolySystem,
    omega_start: f64,
    direction: f64,
    opts: BackboneOptions,
) -> Result<BackboneCurve> {
    let n = system.n();
    if opts.master >= n {
        return Err(RomError::IndexOutOfRange {
            context: "master coordinate".into(),
            index: opts.master,
            n,
        });
    }
    let (omega, phi) = eigenpairs(&system.mass, &system.stiffness, n)?;
    let mode = (0..n)
        .min_by(|&a, &b| (omega[a] - omega_start).abs().total_cmp(&(omega[b] - omega_start).abs()))
        .expect("at least one mode");
    let shape = phi.column(mode);
    if shape[opts.master].abs() < 1e-12 * shape.amax() {
        return Err(RomError::InvalidParameter(format!(
            "mode {mode} has no component on master coordinate {}",
            opts.master
        )));
    }
    let mut guess = HarmonicSignal::zeros(n, opts.hbm.n_harm, omega[mode]);
    for c in 0..n {
        guess.coeffs[(c, 1)] = opts.start_amp * shape[c] / shape[opts.master];
    }
    let (start, res0) = solve_at_amplitude(system, &guess, opts.master, opts.start_amp, opts.hbm)?;

    let hbm = Hbm::new(system, opts.hbm.n_harm)?;
    let tol = residual_tol(system, opts.hbm.tol);
    let label = system.labels.join(",");
    let mut curve = BackboneCurve {
        label,
        master: opts.master,
        points: vec![BranchPoint::new(start.clone(), opts.master, res0)],
        status: BranchStatus::Completed(StopReason::StepLimit),
    };
    if curve.points[0].amplitude >= opts.max_amp {
        curve.status = BranchStatus::Completed(StopReason::AmplitudeCap);
        return Ok(curve);
    }

    let c1 = hbm.index(opts.master, 1);
    let mut z = hbm.pack(&start)?;
    let mut t = tangent(square(&hbm, opts.master, &z).1);
    if t[c1] * direction < 0.0 {
        t = -t;
    }
    let mut ds = opts.ds;
    for _ in 0..opts.steps {
        let (z_new, iters) = loop {
            let pred = &z + &t * ds;
            let attempt = gauss_newton(
                |zc| {
                    let (r, j) = square(&hbm, opts.master, zc);
                    let m = r.len();
                    let mut rr = r.resize_vertically(m + 1, 0.0);
                    rr[m] = t.dot(&(zc - &z)) - ds;
                    let mut jj = j.resize_vertically(m + 1, 0.0);
                    jj.row_mut(m).copy_from(&t.transpose());
                    (rr, jj)
                },
                pred.clone(),
                tol,
                opts.hbm.max_iter.min(12),
            );
            match attempt {
                Ok(s) if (&s.z - &pred).norm() <= ds && s.z[hbm.n_eq()] > 0.0 => {
                    break (s.z, s.iterations)
                }
                _ => {
                    ds *= 0.5;
                    if ds < opts.ds_min {
                        curve.status = BranchStatus::Terminated(format!(
                            "corrector failed at omega = {:.6}, step below {:e}",
                            z[hbm.n_eq()],
                            opts.ds_min
                        ));
                        return Ok(curve);
                    }
                }
            }
        };
        let mut t_new = tangent(square(&hbm, opts.master, &z_new).1);
        if t_new.dot(&t) < 0.0 {
            t_new = -t_new;
        }
        t = t_new;
        z = z_new;
        let res = hbm.residual(&z).amax();
        let point = BranchPoint::new(hbm.unpack(&z), opts.master, res);
        let amp = point.amplitude;
        curve.points.push(point);
        if amp > opts.max_amp {
            curve.status = BranchStatus::Completed(StopReason::AmplitudeCap);
            return Ok(curve);
        }
        if z[hbm.n_eq()] < opts.min_omega_ratio * omega[mode] {
            curve.status = BranchStatus::Completed(StopReason::FrequencyFloor);
            return Ok(curve);
        }
        if iters <= 3 {
            ds = (ds * 1.5).min(opts.ds_max);
        }
    }
    Ok(curve)
}
