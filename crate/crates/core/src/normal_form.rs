//! Normal-form nonlinear change of coordinates for a single master mode,
//! its reduced dynamics and internal-resonance detection.

use std::fmt;

use nalgebra::DVector;
use serde::Serialize;

use crate::eigen::ModalModel;
use crate::error::{Result, RomError};
use crate::rom::{ReducedOscillator, RomMethod};
use crate::tensors::{CubicTensor, QuadTensor};

pub const DEFAULT_RESONANCE_GUARD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceKind {
    OneToOne,
    TwoToOne,
    ThreeToOne,
}

impl ResonanceKind {
    pub fn ratio(self) -> f64 {
        match self {
            ResonanceKind::OneToOne => 1.0,
            ResonanceKind::TwoToOne => 2.0,
            ResonanceKind::ThreeToOne => 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonantPair {
    pub slave: usize,
    pub kind: ResonanceKind,
    /// `|w_s / w_p - k|` for a k:1 resonance.
    pub detuning: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceReport {
    pub master: usize,
    pub pairs: Vec<ResonantPair>,
}

impl ResonanceReport {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn filtered(&self, keep: impl Fn(ResonanceKind) -> bool) -> ResonanceReport {
        ResonanceReport {
            master: self.master,
            pairs: self.pairs.iter().filter(|p| keep(p.kind)).cloned().collect(),
        }
    }
}

impl fmt::Display for ResonanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "master {}:", self.master)?;
        for p in &self.pairs {
            write!(f, " mode {} {:?} (detuning {:.4})", p.slave, p.kind, p.detuning)?;
        }
        Ok(())
    }
}

/// Slaves whose frequency lies within `guard * w_p` of `k * w_p`, k = 1, 2, 3.
pub fn detect_resonances(modal: &ModalModel, p: usize, guard: f64) -> Result<ResonanceReport> {
    modal.check_mode(p)?;
    let wp = modal.omega[p];
    let mut pairs = Vec::new();
    for (s, &ws) in modal.omega.iter().enumerate() {
        if s == p {
            continue;
        }
        for kind in [
            ResonanceKind::OneToOne,
            ResonanceKind::TwoToOne,
            ResonanceKind::ThreeToOne,
        ] {
            let k = kind.ratio();
            if (ws - k * wp).abs() < guard * wp {
                pairs.push(ResonantPair {
                    slave: s,
                    kind,
                    detuning: (ws / wp - k).abs(),
                });
            }
        }
    }
    Ok(ResonanceReport { master: p, pairs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NfOrder {
    Second,
    Third,
}

#[derive(Clone, Copy, Debug)]
pub struct NfOptions {
    pub guard: f64,
    /// Compute coefficients even when a resonance lies inside the guard.
    pub force: bool,
}

impl Default for NfOptions {
    fn default() -> Self {
        NfOptions {
            guard: DEFAULT_RESONANCE_GUARD,
            force: false,
        }
    }
}

/// Coefficients of the single-master mapping, indexed by modal index `s`.
///
/// Third-order entries are zero at `s = p` and everywhere for a second-order
/// mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalFormCoeffs {
    pub master: usize,
    pub order: NfOrder,
    pub omega: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// `A^s_ppp = sum_l 2 gbar^s_pl a^l_pp`
    pub big_a: Vec<f64>,
    /// `B^s_ppp = sum_l 2 gbar^s_pl b^l_pp`
    pub big_b: Vec<f64>,
    /// `h^s_ppp`
    pub h_ppp: Vec<f64>,
}

pub fn nf_coefficients(
    modal: &ModalModel,
    p: usize,
    order: NfOrder,
    opts: NfOptions,
) -> Result<NormalFormCoeffs> {
    modal.check_mode(p)?;
    let report = detect_resonances(modal, p, opts.guard)?;
    let blocking = match order {
        NfOrder::Second => report.filtered(|k| k == ResonanceKind::TwoToOne),
        NfOrder::Third => report.clone(),
    };
    if !blocking.is_empty() && !opts.force {
        return Err(RomError::Resonance(blocking));
    }

    let n = modal.n_modes();
    let g = modal.g.to_dense();
    let wp2 = modal.omega2(p);

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    for s in 0..n {
        let gs = g.get(s, p, p);
        let ws2 = modal.omega2(s);
        let den = -ws2 * (4.0 * wp2 - ws2);
        a[s] = gs * (2.0 * wp2 - ws2) / den;
        b[s] = gs * 2.0 / den;
        gamma[s] = gs * 2.0 / (4.0 * wp2 - ws2);
    }

    let gbar = |s: usize, i: usize, j: usize| 0.5 * (g.get(s, i, j) + g.get(s, j, i));
    let big_a: Vec<f64> = (0..n)
        .map(|s| (0..n).map(|l| 2.0 * gbar(s, p, l) * a[l]).sum())
        .collect();
    let big_b: Vec<f64> = (0..n)
        .map(|s| (0..n).map(|l| 2.0 * gbar(s, p, l) * b[l]).sum())
        .collect();
    let h_ppp: Vec<f64> = (0..n).map(|s| modal.h.get(s, p, p, p)).collect();

    let mut r = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut nu = vec![0.0; n];
    if order == NfOrder::Third {
        for s in (0..n).filter(|&s| s != p) {
            let ws2 = modal.omega2(s);
            let den = (ws2 - wp2) * (ws2 - 9.0 * wp2);
            let w = big_a[s] + h_ppp[s];
            let bb = big_b[s];
            r[s] = (w * (7.0 * wp2 - ws2) + 2.0 * bb * wp2 * wp2) / den;
            u[s] = (6.0 * w + bb * (3.0 * wp2 - ws2)) / den;
            // Same expression as u; velocity consistency Y_k = d/dt X_k
            // requires it.
            mu[s] = u[s];
            nu[s] = (3.0 * w * (3.0 * wp2 - ws2) + 2.0 * bb * wp2 * ws2) / den;
        }
    }

    Ok(NormalFormCoeffs {
        master: p,
        order,
        omega: modal.omega.clone(),
        a,
        b,
        gamma,
        r,
        u,
        mu,
        nu,
        big_a,
        big_b,
        h_ppp,
    })
}

impl NormalFormCoeffs {
    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    /// Modal displacements and velocities on the invariant manifold.
    pub fn map(&self, r_p: f64, s_p: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.n_modes();
        let p = self.master;
        let mut x = DVector::zeros(n);
        let mut y = DVector::zeros(n);
        let (r2, s2, rs) = (r_p * r_p, s_p * s_p, r_p * s_p);
        for k in 0..n {
            if k == p {
                x[k] = r_p + self.a[k] * r2 + self.b[k] * s2;
                y[k] = s_p + self.gamma[k] * rs;
            } else {
                x[k] = self.a[k] * r2 + self.b[k] * s2 + self.r[k] * r2 * r_p + self.u[k] * r_p * s2;
                y[k] = self.gamma[k] * rs + self.mu[k] * s2 * s_p + self.nu[k] * s_p * r2;
            }
        }
        (x, y)
    }

    /// `R'' + w_p^2 R + (A + h) R^3 + B R R'^2 = 0` in the generic
    /// oscillator form (C5 scaled by `w_p^2`).
    pub fn reduced_dynamics(&self) -> ReducedOscillator {
        let p = self.master;
        let wp = self.omega[p];
        ReducedOscillator {
            omega_p: wp,
            c: [
                0.0,
                0.0,
                0.0,
                self.h_ppp[p] + self.big_a[p],
                self.big_b[p] * wp * wp,
                0.0,
            ],
            method: RomMethod::Nf,
        }
    }
}

pub fn nf_map(coeffs: &NormalFormCoeffs, r_p: f64, s_p: f64) -> (DVector<f64>, DVector<f64>) {
    coeffs.map(r_p, s_p)
}

pub fn nf_reduced_dynamics(coeffs: &NormalFormCoeffs) -> ReducedOscillator {
    coeffs.reduced_dynamics()
}

/// Multi-master reduced dynamics on the invariant manifold, for given
/// cubic coefficients `A^p_ijk`, `B^p_ijk` and `h^p_ijk` (all in modal
/// indices).
#[derive(Clone, Debug)]
pub struct MultiMasterNormalForm {
    pub masters: Vec<usize>,
    pub omega: Vec<f64>,
    pub h: CubicTensor,
    pub big_a: CubicTensor,
    pub big_b: CubicTensor,
}

impl MultiMasterNormalForm {
    /// Builds `A^p_ijk = sum_s 2 gbar^p_is a^s_jk` and the analogous `B`
    /// from second-order mapping coefficients `a^s_jk`, `b^s_jk`.
    pub fn from_second_order(
        modal: &ModalModel,
        masters: Vec<usize>,
        a2: &QuadTensor,
        b2: &QuadTensor,
    ) -> Result<Self> {
        let n = modal.n_modes();
        for &m in &masters {
            modal.check_mode(m)?;
        }
        if a2.n() != n || b2.n() != n {
            return Err(RomError::dims("second-order coefficient tensors", n, a2.n()));
        }
        let g = modal.g.to_dense();
        let build = |c: &QuadTensor| -> Result<CubicTensor> {
            let c = c.to_dense();
            let mut entries = Vec::new();
            for &p in &masters {
                for &i in &masters {
                    for &j in &masters {
                        for &k in &masters {
                            let v: f64 = (0..n)
                                .map(|s| (g.get(p, i, s) + g.get(p, s, i)) * c.get(s, j, k))
                                .sum();
                            if v != 0.0 {
                                entries.push((p, i, j, k, v));
                            }
                        }
                    }
                }
            }
            CubicTensor::from_entries(n, entries)
        };
        Ok(MultiMasterNormalForm {
            omega: masters.iter().map(|&m| modal.omega[m]).collect(),
            h: modal.h.clone(),
            big_a: build(a2)?,
            big_b: build(b2)?,
            masters,
        })
    }

    /// Accelerations `R''_p` for normal displacements `r` and velocities `s`
    /// (ordered like `masters`).
    pub fn acceleration(&self, r: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        let n = self.masters.len();
        if r.len() != n || s.len() != n {
            return Err(RomError::dims("normal coordinates", n, r.len()));
        }
        let m = &self.masters;
        let (h, a, b) = (&self.h, &self.big_a, &self.big_b);
        let mut out = vec![0.0; n];
        for ip in 0..n {
            let p = m[ip];
            let (rp, sp) = (r[ip], s[ip]);
            let mut f = self.omega[ip].powi(2) * rp
                + (a.get(p, p, p, p) + h.get(p, p, p, p)) * rp.powi(3)
                + b.get(p, p, p, p) * rp * sp * sp;
            for jj in (0..n).filter(|&jj| jj != ip) {
                let j = m[jj];
                let (rj, sj) = (r[jj], s[jj]);
                f += rp
                    * ((3.0 * h.get(p, p, j, j) + 2.0 * a.get(p, j, j, p) + a.get(p, p, j, j))
                        * rj
                        * rj
                        + b.get(p, p, j, j) * sj * sj);
                f += sp * 2.0 * b.get(p, j, j, p) * rj * sj;
            }
            out[ip] = -f;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_mode(omega: [f64; 2], g: Vec<(usize, usize, usize, f64)>) -> ModalModel {
        ModalModel::from_modal_equations(
            omega.to_vec(),
            QuadTensor::from_entries(2, g).unwrap(),
            CubicTensor::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn resonance_detection() {
        let m = two_mode([1.0, 10.0], vec![]);
        assert!(detect_resonances(&m, 0, 0.05).unwrap().is_empty());

        let m = two_mode([1.0, 2.01], vec![]);
        let rep = detect_resonances(&m, 0, 0.05).unwrap();
        assert_eq!(rep.pairs.len(), 1);
        assert_eq!(rep.pairs[0].slave, 1);
        assert_eq!(rep.pairs[0].kind, ResonanceKind::TwoToOne);
        assert!((rep.pairs[0].detuning - 0.01).abs() < 1e-12);

        let m = two_mode([1.0, 1.25], vec![]);
        let rep = detect_resonances(&m, 0, 0.3).unwrap();
        assert!(rep.pairs.iter().any(|p| p.kind == ResonanceKind::OneToOne));
    }

    #[test]
    fn zero_quadratic_gives_zero_coefficients() {
        let m = two_mode([1.0, 3.7], vec![]);
        let c = nf_coefficients(&m, 0, NfOrder::Third, NfOptions::default()).unwrap();
        for v in [&c.a, &c.b, &c.gamma, &c.r, &c.u, &c.mu, &c.nu, &c.big_a, &c.big_b] {
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn two_to_one_blocks_unless_forced() {
        let m = two_mode([1.0, 2.02], vec![(1, 0, 0, 1.0)]);
        let err = nf_coefficients(&m, 0, NfOrder::Second, NfOptions::default()).unwrap_err();
        assert!(matches!(err, RomError::Resonance(_)));
        let forced = NfOptions {
            force: true,
            ..Default::default()
        };
        assert!(nf_coefficients(&m, 0, NfOrder::Second, forced).is_ok());
    }

    #[test]
    fn one_to_one_blocks_only_third_order() {
        let m = two_mode([1.0, 1.02], vec![(1, 0, 0, 1.0)]);
        assert!(nf_coefficients(&m, 0, NfOrder::Second, NfOptions::default()).is_ok());
        assert!(nf_coefficients(&m, 0, NfOrder::Third, NfOptions::default()).is_err());
    }

    #[test]
    fn order_only_changes_slave_cubic_terms() {
        let m = two_mode(
            [1.0, 3.3],
            vec![(0, 0, 0, 0.7), (0, 0, 1, 0.4), (0, 1, 0, 0.4), (1, 0, 0, 0.4)],
        );
        let c2 = nf_coefficients(&m, 0, NfOrder::Second, NfOptions::default()).unwrap();
        let c3 = nf_coefficients(&m, 0, NfOrder::Third, NfOptions::default()).unwrap();
        let (x2, y2) = c2.map(0.2, -0.1);
        let (x3, y3) = c3.map(0.2, -0.1);
        assert_eq!(x2[0], x3[0]);
        assert_eq!(y2[0], y3[0]);
        assert!((x2[1] - x3[1]).abs() > 0.0);
        assert_eq!(c2.reduced_dynamics(), c3.reduced_dynamics());
        let (x0, y0) = c3.map(0.0, 0.0);
        assert_eq!(x0, DVector::zeros(2));
        assert_eq!(y0, DVector::zeros(2));
    }

    #[test]
    fn multi_master_single_reduces_to_scalar() {
        let m = two_mode(
            [1.0, 4.3],
            vec![(0, 0, 0, 0.3), (0, 0, 1, 0.5), (0, 1, 0, 0.5), (1, 0, 0, 0.5)],
        );
        let c = nf_coefficients(&m, 0, NfOrder::Second, NfOptions::default()).unwrap();
        let a2 = QuadTensor::from_entries(2, (0..2).map(|s| (s, 0, 0, c.a[s])).collect()).unwrap();
        let b2 = QuadTensor::from_entries(2, (0..2).map(|s| (s, 0, 0, c.b[s])).collect()).unwrap();
        let mm = MultiMasterNormalForm::from_second_order(&m, vec![0], &a2, &b2).unwrap();
        let osc = c.reduced_dynamics();
        let (r, s) = (0.13, -0.21);
        let acc = mm.acceleration(&[r], &[s]).unwrap()[0];
        let expected = -(osc.omega_p.powi(2) * r + osc.c[3] * r.powi(3) + osc.c[4] * r * s * s);
        assert!((acc - expected).abs() < 1e-14);
    }
}
