//! Modal derivatives (bordered dynamic system and static variant), their
//! modal-space closed forms and the quadratic-manifold mapping
//! `u = phi R + 1/2 Theta_bar R R`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::eigen::ModalModel;
use crate::error::{Result, RomError};
use crate::tensors::StructuralModel;

/// Relative gap `|w_s^2 - w_i^2| / w_i^2` under which the dynamic modal
/// derivative is refused.
pub const DEFAULT_RESONANCE_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    Dynamic,
    Static,
}

/// Modal derivatives for every ordered pair of masters.
///
/// Pair vectors are stored row-major over master positions: entry
/// `a * n + b` belongs to `(masters[a], masters[b])`. The symmetrized set
/// keeps only `a <= b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalDerivativeSet {
    pub kind: DerivativeKind,
    pub masters: Vec<usize>,
    /// Master eigenvectors as columns (N x n).
    pub phi: DMatrix<f64>,
    /// Eigenfrequencies of all retained modes.
    pub omega: Vec<f64>,
    theta: Vec<DVector<f64>>,
    theta_modal: Vec<DVector<f64>>,
    /// `d w_i^2 / d R_j`, dynamic kind only.
    pub dw2_dr: Option<DMatrix<f64>>,
    theta_bar: Vec<DVector<f64>>,
    theta_bar_modal: Vec<DVector<f64>>,
}

fn packed(a: usize, b: usize, n: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

impl ModalDerivativeSet {
    pub fn n_masters(&self) -> usize {
        self.masters.len()
    }

    /// Physical `Theta_ij` for master positions `a`, `b`.
    pub fn theta(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.theta[a * self.n_masters() + b]
    }

    /// Modal coordinates of `Theta_ij`.
    pub fn theta_modal(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.theta_modal[a * self.n_masters() + b]
    }

    /// Symmetrized `(Theta_ij + Theta_ji) / 2`.
    pub fn theta_bar(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.theta_bar[packed(a, b, self.n_masters())]
    }

    pub fn theta_bar_modal(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.theta_bar_modal[packed(a, b, self.n_masters())]
    }

    fn from_pairs(
        kind: DerivativeKind,
        modal: &ModalModel,
        masters: &[usize],
        theta: Vec<DVector<f64>>,
        theta_modal: Vec<DVector<f64>>,
        dw2_dr: Option<DMatrix<f64>>,
    ) -> Self {
        let n = masters.len();
        let mut theta_bar = Vec::with_capacity(n * (n + 1) / 2);
        let mut theta_bar_modal = Vec::with_capacity(n * (n + 1) / 2);
        for a in 0..n {
            for b in a..n {
                theta_bar.push((&theta[a * n + b] + &theta[b * n + a]) * 0.5);
                theta_bar_modal.push((&theta_modal[a * n + b] + &theta_modal[b * n + a]) * 0.5);
            }
        }
        let mut phi = DMatrix::zeros(modal.n_dofs(), n);
        for (col, &m) in masters.iter().enumerate() {
            phi.set_column(col, &modal.phi.column(m));
        }
        ModalDerivativeSet {
            kind,
            masters: masters.to_vec(),
            phi,
            omega: modal.omega.clone(),
            theta,
            theta_modal,
            dw2_dr,
            theta_bar,
            theta_bar_modal,
        }
    }

    /// Position of modal index `k` among the masters.
    pub fn master_position(&self, k: usize) -> Option<usize> {
        self.masters.iter().position(|&m| m == k)
    }
}

fn check_masters(modal: &ModalModel, masters: &[usize]) -> Result<()> {
    if masters.is_empty() {
        return Err(RomError::MissingInput("master mode list is empty".into()));
    }
    for &m in masters {
        modal.check_mode(m)?;
    }
    for (a, &m) in masters.iter().enumerate() {
        if masters[..a].contains(&m) {
            return Err(RomError::InvalidParameter(format!("master {m} listed twice")));
        }
    }
    Ok(())
}

fn check_model(model: &StructuralModel, modal: &ModalModel) -> Result<()> {
    if modal.n_dofs() != model.n() {
        return Err(RomError::dims("eigenvector rows", model.n(), modal.n_dofs()));
    }
    Ok(())
}

fn one_to_one_guard(modal: &ModalModel, i: usize, eps: f64) -> Result<()> {
    let wi2 = modal.omega2(i);
    for s in (0..modal.n_modes()).filter(|&s| s != i) {
        let ratio = (modal.omega2(s) - wi2).abs() / wi2;
        if ratio < eps {
            return Err(RomError::OneToOneResonance {
                master: i,
                slave: s,
                ratio,
            });
        }
    }
    Ok(())
}

/// Dynamic modal derivatives from the bordered system
/// `[[K - w_i^2 M, -M phi_i], [-phi_i^T M, 0]] [Theta_ij; dw_i^2/dR_j] = [-2 G phi_j phi_i; 0]`.
pub fn compute_md(
    model: &StructuralModel,
    modal: &ModalModel,
    masters: &[usize],
) -> Result<ModalDerivativeSet> {
    compute_md_with_guard(model, modal, masters, DEFAULT_RESONANCE_EPS)
}

pub fn compute_md_with_guard(
    model: &StructuralModel,
    modal: &ModalModel,
    masters: &[usize],
    eps: f64,
) -> Result<ModalDerivativeSet> {
    check_model(model, modal)?;
    check_masters(modal, masters)?;
    let nd = model.n();
    let n = masters.len();
    let mut theta = Vec::with_capacity(n * n);
    let mut dw2 = DMatrix::zeros(n, n);
    for (a, &i) in masters.iter().enumerate() {
        one_to_one_guard(modal, i, eps)?;
        let phi_i = modal.mode(i);
        let m_phi = &model.mass * &phi_i;
        let mut border = DMatrix::zeros(nd + 1, nd + 1);
        border
            .view_mut((0, 0), (nd, nd))
            .copy_from(&(&model.stiffness - &model.mass * modal.omega2(i)));
        for r in 0..nd {
            border[(r, nd)] = -m_phi[r];
            border[(nd, r)] = -m_phi[r];
        }
        let lu = border.lu();
        for (b, &j) in masters.iter().enumerate() {
            let phi_j = modal.mode(j);
            let rhs_top = model.quadratic.contract(&phi_j, &phi_i)? * -2.0;
            let rhs = DVector::from_iterator(nd + 1, rhs_top.iter().copied().chain([0.0]));
            let x = lu.solve(&rhs).ok_or_else(|| {
                RomError::Singular(format!("bordered system for master pair ({i}, {j})"))
            })?;
            theta.push(x.rows(0, nd).into_owned());
            dw2[(a, b)] = x[nd];
        }
    }
    let theta_modal = project(model, modal, &theta);
    Ok(ModalDerivativeSet::from_pairs(
        DerivativeKind::Dynamic,
        modal,
        masters,
        theta,
        theta_modal,
        Some(dw2),
    ))
}

/// Static modal derivatives `K Theta_ij = -2 G phi_j phi_i`.
pub fn compute_smd(
    model: &StructuralModel,
    modal: &ModalModel,
    masters: &[usize],
) -> Result<ModalDerivativeSet> {
    check_model(model, modal)?;
    check_masters(modal, masters)?;
    let n = masters.len();
    let lu = model.stiffness.clone().lu();
    if !lu.is_invertible() {
        return Err(RomError::Singular("stiffness matrix".into()));
    }
    let mut theta = vec![DVector::zeros(model.n()); n * n];
    for (a, &i) in masters.iter().enumerate() {
        for (b, &j) in masters.iter().enumerate() {
            if b < a && model.quadratic.symmetry().lower {
                // Right-hand side is symmetric in (i, j): reuse the solve.
                theta[a * n + b] = theta[b * n + a].clone();
                continue;
            }
            let rhs = model.quadratic.contract(&modal.mode(j), &modal.mode(i))? * -2.0;
            theta[a * n + b] = lu
                .solve(&rhs)
                .ok_or_else(|| RomError::Singular("stiffness matrix".into()))?;
        }
    }
    let theta_modal = project(model, modal, &theta);
    Ok(ModalDerivativeSet::from_pairs(
        DerivativeKind::Static,
        modal,
        masters,
        theta,
        theta_modal,
        None,
    ))
}

/// `theta^s_ij = -2 g^s_ij / (w_s^2 - w_i^2)` for `s != i`, zero at `s = i`.
pub fn md_modal_closed_form(modal: &ModalModel, i: usize, j: usize) -> Result<DVector<f64>> {
    modal.check_mode(i)?;
    modal.check_mode(j)?;
    one_to_one_guard(modal, i, DEFAULT_RESONANCE_EPS)?;
    let wi2 = modal.omega2(i);
    Ok(DVector::from_iterator(
        modal.n_modes(),
        (0..modal.n_modes()).map(|s| {
            if s == i {
                0.0
            } else {
                -2.0 * modal.g.get(s, i, j) / (modal.omega2(s) - wi2)
            }
        }),
    ))
}

/// `theta^s_ij = -2 g^s_ij / w_s^2` for every `s`.
pub fn smd_modal_closed_form(modal: &ModalModel, i: usize, j: usize) -> Result<DVector<f64>> {
    modal.check_mode(i)?;
    modal.check_mode(j)?;
    Ok(DVector::from_iterator(
        modal.n_modes(),
        (0..modal.n_modes()).map(|s| -2.0 * modal.g.get(s, i, j) / modal.omega2(s)),
    ))
}

/// Derivative set assembled from modal closed forms, for models given
/// directly in modal coordinates.
pub fn modal_derivatives_from_modal(
    modal: &ModalModel,
    masters: &[usize],
    kind: DerivativeKind,
) -> Result<ModalDerivativeSet> {
    check_masters(modal, masters)?;
    let n = masters.len();
    let mut theta_modal = Vec::with_capacity(n * n);
    for &i in masters {
        for &j in masters {
            theta_modal.push(match kind {
                DerivativeKind::Dynamic => md_modal_closed_form(modal, i, j)?,
                DerivativeKind::Static => smd_modal_closed_form(modal, i, j)?,
            });
        }
    }
    let theta = theta_modal.iter().map(|t| &modal.phi * t).collect();
    let dw2 = match kind {
        DerivativeKind::Dynamic => Some(DMatrix::from_fn(n, n, |a, b| {
            2.0 * modal.g.get(masters[a], masters[a], masters[b])
        })),
        DerivativeKind::Static => None,
    };
    Ok(ModalDerivativeSet::from_pairs(kind, modal, masters, theta, theta_modal, dw2))
}

/// Modal coordinates `Phi^T M Theta`; exact when all modes are retained,
/// the mass-orthogonal projection otherwise.
fn project(
    model: &StructuralModel,
    modal: &ModalModel,
    theta: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let proj = modal.phi.transpose() * &model.mass;
    theta.iter().map(|t| &proj * t).collect()
}

fn check_reduced(mds: &ModalDerivativeSet, r: &DVector<f64>) -> Result<()> {
    if r.len() != mds.n_masters() {
        return Err(RomError::dims("reduced coordinates", mds.n_masters(), r.len()));
    }
    Ok(())
}

/// Quadratic manifold: physical `u = phi R + 1/2 Theta_bar R R` and modal
/// `X_k = R_k + 1/2 theta_bar^k R R`.
pub fn qm_map(mds: &ModalDerivativeSet, r: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    check_reduced(mds, r)?;
    let n = mds.n_masters();
    let mut u = &mds.phi * r;
    let mut x = DVector::zeros(mds.omega.len());
    for (a, &m) in mds.masters.iter().enumerate() {
        x[m] += r[a];
    }
    for a in 0..n {
        for b in 0..n {
            let w = 0.5 * r[a] * r[b];
            u.axpy(w, mds.theta_bar(a, b), 1.0);
            x.axpy(w, mds.theta_bar_modal(a, b), 1.0);
        }
    }
    Ok((u, x))
}

/// Tangent of the quadratic manifold: columns `phi_i + sum_j Theta_bar_ij R_j`.
pub fn qm_tangent(mds: &ModalDerivativeSet, r: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_reduced(mds, r)?;
    let n = mds.n_masters();
    let mut t = mds.phi.clone();
    for a in 0..n {
        let mut col = t.column(a).into_owned();
        for b in 0..n {
            col.axpy(r[b], mds.theta_bar(a, b), 1.0);
        }
        t.set_column(a, &col);
    }
    Ok(t)
}
