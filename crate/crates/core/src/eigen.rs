//! Generalized symmetric eigenproblem `(K - w^2 M) phi = 0` with mass
//! normalisation, and the modal-coordinate model built from it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, RomError};
use crate::tensors::{check_spd, to_modal, CubicTensor, QuadTensor, StructuralModel};

/// Equations of motion in modal coordinates:
/// `X''_p + w_p^2 X_p + sum g[p][i][j] X_i X_j + sum h[p][i][j][k] X_i X_j X_k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalModel {
    /// Eigenfrequencies, ascending.
    pub omega: Vec<f64>,
    /// Mass-normalised eigenvectors as columns (N x m).
    pub phi: DMatrix<f64>,
    pub g: QuadTensor,
    pub h: CubicTensor,
}

impl ModalModel {
    /// Modal model of a system that is already written in modal
    /// coordinates (identity eigenvectors).
    pub fn from_modal_equations(omega: Vec<f64>, g: QuadTensor, h: CubicTensor) -> Result<Self> {
        let n = omega.len();
        if g.n() != n {
            return Err(RomError::dims("quadratic tensor", n, g.n()));
        }
        if h.n() != n {
            return Err(RomError::dims("cubic tensor", n, h.n()));
        }
        Ok(ModalModel {
            omega,
            phi: DMatrix::identity(n, n),
            g,
            h,
        })
    }

    /// Number of retained modes.
    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.phi.nrows()
    }

    pub fn omega2(&self, s: usize) -> f64 {
        self.omega[s] * self.omega[s]
    }

    pub fn mode(&self, s: usize) -> DVector<f64> {
        self.phi.column(s).into_owned()
    }

    /// Right-hand side of the modal equations: `w^2 X + g X X + h X X X`.
    pub fn modal_force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let lin = DVector::from_iterator(
            self.n_modes(),
            x.iter().enumerate().map(|(s, xs)| self.omega2(s) * xs),
        );
        Ok(lin + self.g.contract(x, x)? + self.h.contract(x, x, x)?)
    }

    pub(crate) fn check_mode(&self, p: usize) -> Result<()> {
        if p >= self.n_modes() {
            return Err(RomError::IndexOutOfRange {
                context: "mode index".into(),
                index: p,
                n: self.n_modes(),
            });
        }
        Ok(())
    }
}

/// Lowest `count` eigenpairs of `(K, M)`, mass-normalised, with the
/// largest-magnitude entry of each eigenvector made positive. The modal
/// tensors are projected on the returned modes.
pub fn solve_modes(model: &StructuralModel, count: usize) -> Result<ModalModel> {
    let (omega, phi) = eigenpairs(&model.mass, &model.stiffness, count)?;
    to_modal(model, &phi, &omega)
}

/// Eigenfrequencies and mass-normalised eigenvectors of `(K, M)`.
pub fn eigenpairs(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    count: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mass.nrows();
    if count == 0 || count > n {
        return Err(RomError::InvalidParameter(format!(
            "mode count {count} must be in 1..={n}"
        )));
    }
    check_spd(mass)?;
    let chol = mass
        .clone()
        .cholesky()
        .ok_or(RomError::NotPositiveDefinite { order: n })?;
    let l = chol.l();
    // A = L^-1 K L^-T
    let linv_k = l
        .solve_lower_triangular(stiffness)
        .ok_or_else(|| RomError::Singular("Cholesky factor".into()))?;
    let a_t = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| RomError::Singular("Cholesky factor".into()))?;
    let a = (&a_t + a_t.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);

    let mut omega = Vec::with_capacity(count);
    let mut phi = DMatrix::zeros(n, count);
    let lt = l.transpose();
    for (col, &idx) in order.iter().take(count).enumerate() {
        let lam = eig.eigenvalues[idx];
        if lam <= 1e-12 * scale {
            return Err(RomError::RigidBodyMode {
                index: col,
                eigenvalue: lam,
            });
        }
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut v = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| RomError::Singular("Cholesky factor".into()))?;
        let norm = v.dot(&(mass * &v)).sqrt();
        v /= norm;
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        omega.push(lam.sqrt());
        phi.set_column(col, &v);
    }
    Ok((omega, phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(m: DMatrix<f64>, k: DMatrix<f64>) -> StructuralModel {
        let n = m.nrows();
        StructuralModel::new(m, k, QuadTensor::zeros(n), CubicTensor::zeros(n)).unwrap()
    }

    #[test]
    fn diagonal_problem() {
        let model = linear(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0])),
        );
        let modal = solve_modes(&model, 2).unwrap();
        assert!((modal.omega[0] - 1.0).abs() < 1e-14);
        assert!((modal.omega[1] - 2.0).abs() < 1e-14);
        assert!((&modal.phi - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn two_by_two_coupled() {
        // det(K - l I) = (2 - l)^2 - 1 = 0  ->  l = 1, 3
        let model = linear(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]),
        );
        let modal = solve_modes(&model, 2).unwrap();
        assert!((modal.omega[0].powi(2) - 1.0).abs() < 1e-13);
        assert!((modal.omega[1].powi(2) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rigid_body_rejected() {
        let model = linear(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
        );
        assert!(matches!(
            solve_modes(&model, 2),
            Err(RomError::RigidBodyMode { index: 0, .. })
        ));
    }

    #[test]
    fn sign_convention() {
        let model = linear(
            DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0, 3.0])),
            DMatrix::from_row_slice(3, 3, &[4.0, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 5.0]),
        );
        let modal = solve_modes(&model, 3).unwrap();
        for s in 0..3 {
            let v = modal.mode(s);
            assert!(v[v.iamax()] > 0.0);
        }
    }

    #[test]
    fn partial_count() {
        let model = linear(
            DMatrix::identity(3, 3),
            DMatrix::from_diagonal(&DVector::from_column_slice(&[9.0, 1.0, 4.0])),
        );
        let modal = solve_modes(&model, 2).unwrap();
        assert_eq!(modal.n_modes(), 2);
        assert_eq!(modal.n_dofs(), 3);
        assert!((modal.omega[0] - 1.0).abs() < 1e-14);
        assert!((modal.omega[1] - 2.0).abs() < 1e-14);
        assert!(solve_modes(&model, 4).is_err());
    }
}
