//! Single-master reduced oscillators, the hardening/softening coefficient
//! Gamma, multiple-scales solution, drift, mode shapes and the C-ratio
//! comparison curves.

use nalgebra::DVector;
use serde::Serialize;

use crate::eigen::ModalModel;
use crate::error::{Result, RomError};
use crate::modal_derivatives::{md_modal_closed_form, smd_modal_closed_form, ModalDerivativeSet};
use crate::normal_form::{nf_coefficients, NfOptions, NfOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RomMethod {
    Nf,
    QmMd,
    QmSmd,
    StaticCondensation,
}

impl RomMethod {
    pub fn name(self) -> &'static str {
        match self {
            RomMethod::Nf => "nf",
            RomMethod::QmMd => "qm-md",
            RomMethod::QmSmd => "qm-smd",
            RomMethod::StaticCondensation => "static-cond",
        }
    }
}

/// `R'' + w^2 R + C1 R^2 + C2 R'^2/w^2 + C3 R'' R/w^2 + C4 R^3
///  + C5 R'^2 R/w^2 + C6 R'' R^2/w^2 = 0`, with `c[k-1] = Ck`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedOscillator {
    pub omega_p: f64,
    pub c: [f64; 6],
    pub method: RomMethod,
}

impl ReducedOscillator {
    pub fn duffing(omega_p: f64, c4: f64) -> Self {
        ReducedOscillator {
            omega_p,
            c: [0.0, 0.0, 0.0, c4, 0.0, 0.0],
            method: RomMethod::Nf,
        }
    }

    /// Gamma in `w_NL = w_p (1 + Gamma a0^2)`.
    pub fn gamma(&self) -> f64 {
        let [c1, c2, c3, c4, c5, c6] = self.c;
        let w2 = self.omega_p * self.omega_p;
        -(10.0 * c1 * c1 + 10.0 * c1 * c2 + 4.0 * c2 * c2 - 7.0 * c2 * c3 + c3 * c3
            - 11.0 * c1 * c3)
            / (24.0 * w2 * w2)
            + (3.0 * c4 + c5 - 3.0 * c6) / (8.0 * w2)
    }

    /// Effective mass `1 + C3 R/w^2 + C6 R^2/w^2` multiplying `R''`.
    pub fn mass(&self, r: f64) -> f64 {
        let w2 = self.omega_p * self.omega_p;
        1.0 + (self.c[2] * r + self.c[5] * r * r) / w2
    }

    /// `R''` for given displacement and velocity.
    pub fn acceleration(&self, r: f64, v: f64) -> f64 {
        let [c1, c2, _, c4, c5, _] = self.c;
        let w2 = self.omega_p * self.omega_p;
        let rest = w2 * r + c1 * r * r + c2 * v * v / w2 + c4 * r * r * r + c5 * v * v * r / w2;
        -rest / self.mass(r)
    }
}

/// Oscillator of the single-master quadratic manifold built from the modal
/// vector `theta = theta_bar_pp` (all retained modes).
pub fn qm_oscillator(
    modal: &ModalModel,
    p: usize,
    theta: &DVector<f64>,
    method: RomMethod,
) -> Result<ReducedOscillator> {
    modal.check_mode(p)?;
    let n = modal.n_modes();
    if theta.len() != n {
        return Err(RomError::dims("modal derivative vector", n, theta.len()));
    }
    let wp2 = modal.omega2(p);
    let tp = theta[p];
    let gppp = modal.g.get(p, p, p);
    let mut c4 = modal.h.get(p, p, p, p);
    let mut sq = 0.0;
    for s in 0..n {
        let ts = theta[s];
        let gbar = 0.5 * (modal.g.get(p, p, s) + modal.g.get(p, s, p));
        c4 += gbar * ts + ts * (modal.g.get(s, p, p) + 0.5 * modal.omega2(s) * ts);
        sq += ts * ts;
    }
    Ok(ReducedOscillator {
        omega_p: modal.omega[p],
        c: [
            gppp + 1.5 * wp2 * tp,
            wp2 * tp,
            2.0 * wp2 * tp,
            c4,
            wp2 * sq,
            wp2 * sq,
        ],
        method,
    })
}

/// Reduced oscillator for master `p` with coefficients computed from the
/// modal data.
pub fn build_rom(modal: &ModalModel, p: usize, method: RomMethod) -> Result<ReducedOscillator> {
    build_rom_with(modal, p, method, NfOptions::default())
}

pub fn build_rom_with(
    modal: &ModalModel,
    p: usize,
    method: RomMethod,
    nf_opts: NfOptions,
) -> Result<ReducedOscillator> {
    modal.check_mode(p)?;
    match method {
        RomMethod::Nf => Ok(nf_coefficients(modal, p, NfOrder::Second, nf_opts)?.reduced_dynamics()),
        RomMethod::QmMd => qm_oscillator(modal, p, &md_modal_closed_form(modal, p, p)?, method),
        RomMethod::QmSmd => qm_oscillator(modal, p, &smd_modal_closed_form(modal, p, p)?, method),
        RomMethod::StaticCondensation => {
            let mut c4 = modal.h.get(p, p, p, p);
            for s in (0..modal.n_modes()).filter(|&s| s != p) {
                c4 -= 2.0 * modal.g.get(s, p, p).powi(2) / modal.omega2(s);
            }
            Ok(ReducedOscillator {
                omega_p: modal.omega[p],
                c: [0.0, 0.0, 0.0, c4, 0.0, 0.0],
                method,
            })
        }
    }
}

/// Reduced oscillator from a computed derivative set with a single master.
pub fn rom_from_derivatives(modal: &ModalModel, mds: &ModalDerivativeSet) -> Result<ReducedOscillator> {
    if mds.n_masters() != 1 {
        return Err(RomError::InvalidParameter(
            "single-master derivative set required".into(),
        ));
    }
    let method = match mds.kind {
        crate::modal_derivatives::DerivativeKind::Dynamic => RomMethod::QmMd,
        crate::modal_derivatives::DerivativeKind::Static => RomMethod::QmSmd,
    };
    qm_oscillator(modal, mds.masters[0], mds.theta_bar_modal(0, 0), method)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlaveCorrection {
    pub slave: usize,
    /// Method correction `C^s`.
    pub correction: f64,
    /// Static-condensation baseline `2 (g^s_pp / w_s)^2`.
    pub static_condensation: f64,
}

/// Closed-form split `Gamma = self_term + 3/(8 w_p^2) (h - sum_s C^s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaResult {
    pub method: RomMethod,
    pub gamma: f64,
    pub self_term: f64,
    pub h: f64,
    pub slaves: Vec<SlaveCorrection>,
    /// A denominator vanished; `gamma` is then a signed infinity or NaN.
    pub pole: bool,
}

/// Per-method closed form of Gamma from modal data (potential-symmetric
/// quadratic coefficients assumed). Poles are flagged, not raised.
pub fn gamma_closed_form(modal: &ModalModel, p: usize, method: RomMethod) -> Result<GammaResult> {
    modal.check_mode(p)?;
    let wp2 = modal.omega2(p);
    let gppp = modal.g.get(p, p, p);
    let h = modal.h.get(p, p, p, p);
    let self_term = match method {
        RomMethod::StaticCondensation => 0.0,
        _ => -5.0 / (12.0 * wp2) * gppp * gppp / wp2,
    };
    let mut slaves = Vec::new();
    let mut pole = false;
    for s in (0..modal.n_modes()).filter(|&s| s != p) {
        let ws2 = modal.omega2(s);
        let gs = modal.g.get(s, p, p);
        let sc = 2.0 * gs * gs / ws2;
        let (num, den) = match method {
            RomMethod::QmMd => (wp2 * (4.0 * ws2 - 3.0 * wp2), 3.0 * (ws2 - wp2).powi(2)),
            RomMethod::QmSmd => (4.0 * wp2, 3.0 * ws2),
            RomMethod::Nf => (4.0 * wp2, 3.0 * (ws2 - 4.0 * wp2)),
            RomMethod::StaticCondensation => (0.0, 1.0),
        };
        let correction = if gs == 0.0 {
            0.0
        } else {
            if den == 0.0 {
                pole = true;
            }
            sc * (1.0 + num / den)
        };
        slaves.push(SlaveCorrection {
            slave: s,
            correction,
            static_condensation: sc,
        });
    }
    let sum: f64 = slaves.iter().map(|c| c.correction).sum();
    Ok(GammaResult {
        method,
        gamma: self_term + 3.0 / (8.0 * wp2) * (h - sum),
        self_term,
        h,
        slaves,
        pole,
    })
}

/// Gamma from the reduced oscillator.
pub fn gamma(osc: &ReducedOscillator) -> f64 {
    osc.gamma()
}

/// Second-order multiple-scales solution
/// `R = a0 cos(w_NL t) + h0 + h2 cos(2 w_NL t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultipleScales {
    pub a0: f64,
    pub gamma: f64,
    pub omega_nl: f64,
    pub harmonic0: f64,
    pub harmonic1: f64,
    pub harmonic2: f64,
}

pub fn multiple_scales(osc: &ReducedOscillator, a0: f64) -> MultipleScales {
    let [c1, c2, c3, ..] = osc.c;
    let w2 = osc.omega_p * osc.omega_p;
    let g = osc.gamma();
    MultipleScales {
        a0,
        gamma: g,
        omega_nl: osc.omega_p * (1.0 + g * a0 * a0),
        harmonic0: -a0 * a0 * (c1 + c2 - c3) / (2.0 * w2),
        harmonic1: a0,
        harmonic2: a0 * a0 * (c1 - c2 - c3) / (6.0 * w2),
    }
}

/// C-ratios `C/C_SC` for a single slave at frequency ratio `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CRatios {
    pub rho: f64,
    pub md: f64,
    pub smd: f64,
    pub nf: f64,
}

fn is_pole(x: f64, at: f64) -> bool {
    (x - at).abs() <= 4.0 * f64::EPSILON * at
}

/// Errors on the MD pole `rho = 1` and the NF pole `rho = 2`.
pub fn c_ratios(rho: f64) -> Result<CRatios> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(RomError::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    if is_pole(rho, 1.0) {
        return Err(RomError::Pole { what: "C_MD", rho });
    }
    if is_pole(rho, 2.0) {
        return Err(RomError::Pole { what: "C_NF", rho });
    }
    Ok(c_ratios_unchecked(rho))
}

fn c_ratios_unchecked(rho: f64) -> CRatios {
    let r2 = rho * rho;
    CRatios {
        rho,
        md: 1.0 + 4.0 / 3.0 * (r2 - 0.75) / ((r2 - 1.0) * (r2 - 1.0)),
        smd: 1.0 + 4.0 / 3.0 / r2,
        nf: 1.0 + 4.0 / 3.0 / (r2 - 4.0),
    }
}

/// Sweep sample: poles become infinities with a flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CRatioSample {
    pub ratios: CRatios,
    pub md_pole: bool,
    pub nf_pole: bool,
}

pub fn c_ratios_sample(rho: f64) -> CRatioSample {
    let md_pole = is_pole(rho, 1.0);
    let nf_pole = is_pole(rho, 2.0);
    let mut ratios = c_ratios_unchecked(rho);
    if md_pole {
        ratios.md = f64::INFINITY;
    }
    if nf_pole {
        ratios.nf = f64::INFINITY;
    }
    CRatioSample {
        ratios,
        md_pole,
        nf_pole,
    }
}

/// Root of `f` in `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must differ in
/// sign.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(RomError::InvalidParameter(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gamma for each method on one model at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaTriple {
    pub rho: f64,
    pub md: f64,
    pub smd: f64,
    pub nf: f64,
    pub md_pole: bool,
    pub nf_pole: bool,
}

/// Closed forms for the flat-beam 2-dof model with `w1 = 1`, `w2 = rho`.
pub fn flat_gamma(rho: f64, d: f64, gbar: f64) -> GammaTriple {
    let r2 = rho * rho;
    let g2 = gbar * gbar;
    let md_pole = is_pole(rho, 1.0);
    let nf_pole = is_pole(rho, 2.0);
    let base = 3.0 * d / 8.0;
    GammaTriple {
        rho,
        md: if md_pole {
            f64::NEG_INFINITY
        } else {
            base - g2 * (3.0 * r2 - 2.0) * r2 / (4.0 * (r2 - 1.0).powi(2))
        },
        smd: base - g2 * (3.0 * r2 + 4.0) / (4.0 * r2),
        nf: if nf_pole {
            f64::NAN
        } else {
            base - g2 * (3.0 * r2 - 8.0) / (4.0 * (r2 - 4.0))
        },
        md_pole,
        nf_pole,
    }
}

/// Closed forms for the shell-like 2-dof model, which depend on `rho` only.
pub fn shell_gamma(rho: f64) -> GammaTriple {
    let r2 = rho * rho;
    let md_pole = is_pole(rho, 1.0);
    let nf_pole = is_pole(rho, 2.0);
    GammaTriple {
        rho,
        md: if md_pole {
            f64::NEG_INFINITY
        } else {
            -(16.0 * r2 * r2 - 27.0 * r2 + 12.0) / (16.0 * (r2 - 1.0).powi(2))
        },
        smd: -1.0,
        nf: if nf_pole { f64::NAN } else { -(r2 - 3.0) / (r2 - 4.0) },
        md_pole,
        nf_pole,
    }
}

/// Zeroth-harmonic offset per unit mode: `modal[s]` multiplies `phi_s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftVector {
    pub method: RomMethod,
    pub a0: f64,
    pub omega_nl: f64,
    pub modal: DVector<f64>,
    pub physical: DVector<f64>,
}

impl DriftVector {
    pub fn master_component(&self, p: usize) -> f64 {
        self.modal[p]
    }
}

fn require_mapping_method(method: RomMethod) -> Result<()> {
    if method == RomMethod::StaticCondensation {
        return Err(RomError::InvalidParameter(
            "static condensation defines no nonlinear mapping".into(),
        ));
    }
    Ok(())
}

/// Drift of the physical displacement at amplitude `a0`, with `w_NL` taken
/// from the method's multiple-scales solution.
pub fn drift(modal: &ModalModel, p: usize, method: RomMethod, a0: f64) -> Result<DriftVector> {
    require_mapping_method(method)?;
    let omega_nl = multiple_scales(&build_rom(modal, p, method)?, a0).omega_nl;
    drift_at(modal, p, method, a0, omega_nl)
}

/// Drift for an explicitly given nonlinear frequency.
pub fn drift_at(
    modal: &ModalModel,
    p: usize,
    method: RomMethod,
    a0: f64,
    omega_nl: f64,
) -> Result<DriftVector> {
    require_mapping_method(method)?;
    modal.check_mode(p)?;
    let n = modal.n_modes();
    let wp2 = modal.omega2(p);
    let wnl2 = omega_nl * omega_nl;
    let half = 0.5 * a0 * a0;
    let mut d = DVector::zeros(n);
    for s in 0..n {
        let gs = modal.g.get(s, p, p);
        let ws2 = modal.omega2(s);
        d[s] = if s == p {
            let factor = match method {
                RomMethod::Nf => 1.0 / 3.0 + 2.0 / 3.0 * wnl2 / wp2,
                _ => 1.0,
            };
            -half * gs / wp2 * factor
        } else {
            match method {
                RomMethod::QmMd => -half * gs / (ws2 - wp2),
                RomMethod::QmSmd => -half * gs / ws2,
                RomMethod::Nf => {
                    -half * gs / ws2 * (1.0 - 2.0 * (wnl2 - wp2) / (ws2 - 4.0 * wp2))
                }
                RomMethod::StaticCondensation => unreachable!(),
            }
        };
    }
    Ok(DriftVector {
        method,
        a0,
        omega_nl,
        physical: &modal.phi * &d,
        modal: d,
    })
}

/// Modal coordinates of the single-mode displacement at reduced state
/// `(R_p, S_p)`.
pub fn modeshape_modal(
    modal: &ModalModel,
    p: usize,
    method: RomMethod,
    r: f64,
    s: f64,
) -> Result<DVector<f64>> {
    require_mapping_method(method)?;
    modal.check_mode(p)?;
    let n = modal.n_modes();
    let wp2 = modal.omega2(p);
    let (r2, s2) = (r * r, s * s);
    let mut x = DVector::zeros(n);
    for k in 0..n {
        let gk = modal.g.get(k, p, p);
        let wk2 = modal.omega2(k);
        x[k] = if k == p {
            r - match method {
                RomMethod::QmMd => 0.0,
                RomMethod::QmSmd => gk / wp2 * r2,
                RomMethod::Nf => gk / wp2 / 3.0 * (r2 + 2.0 / wp2 * s2),
                RomMethod::StaticCondensation => unreachable!(),
            }
        } else {
            -match method {
                RomMethod::QmMd => gk / (wk2 - wp2) * r2,
                RomMethod::QmSmd => gk / wk2 * r2,
                RomMethod::Nf => {
                    gk / wk2
                        * ((wk2 - 2.0 * wp2) / (wk2 - 4.0 * wp2) * r2
                            - 2.0 / (wk2 - 4.0 * wp2) * s2)
                }
                RomMethod::StaticCondensation => unreachable!(),
            }
        };
    }
    Ok(x)
}

/// Physical single-mode displacement `u(t)` at reduced state `(R_p, S_p)`.
pub fn reconstruct_modeshape(
    modal: &ModalModel,
    p: usize,
    method: RomMethod,
    r: f64,
    s: f64,
) -> Result<DVector<f64>> {
    Ok(&modal.phi * modeshape_modal(modal, p, method, r, s)?)
}

/// `u - (phi_p^T u / phi_p^T phi_p) phi_p`.
pub fn orth_component(modal: &ModalModel, p: usize, u: &DVector<f64>) -> Result<DVector<f64>> {
    modal.check_mode(p)?;
    if u.len() != modal.n_dofs() {
        return Err(RomError::dims("displacement", modal.n_dofs(), u.len()));
    }
    let phi = modal.mode(p);
    Ok(u - &phi * (phi.dot(u) / phi.dot(&phi)))
}

/// Even part of a reference signal: mean of the orthogonal components at
/// the maximum and minimum turning points.
pub fn orth_symmetric_reference(
    modal: &ModalModel,
    p: usize,
    u_max: &DVector<f64>,
    u_min: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok((orth_component(modal, p, u_max)? + orth_component(modal, p, u_min)?) * 0.5)
}

/// First-harmonic amplitude of the master modal coordinate for a
/// multiple-scales amplitude `a0`.
pub fn first_harmonic_master(method: RomMethod, a0: f64, g_ppp: f64, omega_p: f64) -> f64 {
    match method {
        RomMethod::QmSmd => {
            let q = g_ppp / (omega_p * omega_p);
            a0 * (1.0 - a0 * a0 * 2.0 / 3.0 * q * q)
        }
        _ => a0,
    }
}
