use nalgebra::{DMatrix, DVector};

use crate::eigen::ModalModel;
use crate::error::{Result, RomError};
use crate::modal_derivatives::ModalDerivativeSet;
use crate::rom::ReducedOscillator;
use crate::tensors::StructuralModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Disp,
    Vel,
    Acc,
}

/// Monomial `coeff * prod(factors)` added to equation `eq`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub eq: usize,
    pub coeff: f64,
    pub factors: Vec<(usize, Kind)>,
}

/// Second-order polynomial ODE
/// `M a + K x + sum_terms coeff * prod(x_i | v_i | a_i) = 0`,
/// with at most one acceleration factor per term so that `a` follows from a
/// linear solve.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySystem {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub terms: Vec<Term>,
    pub labels: Vec<String>,
    mass_inv: Option<DMatrix<f64>>,
}

/// Partial derivatives of the residual with respect to displacement,
/// velocity and acceleration.
pub struct Partials {
    pub dx: DMatrix<f64>,
    pub dv: DMatrix<f64>,
    pub da: DMatrix<f64>,
}

impl PolySystem {
    pub fn new(mass: DMatrix<f64>, stiffness: DMatrix<f64>, terms: Vec<Term>) -> Result<Self> {
        let n = mass.nrows();
        if mass.ncols() != n || stiffness.shape() != (n, n) {
            return Err(RomError::dims("system matrices", n, stiffness.nrows()));
        }
        for t in &terms {
            if t.eq >= n || t.factors.iter().any(|&(c, _)| c >= n) {
                return Err(RomError::IndexOutOfRange {
                    context: "polynomial term".into(),
                    index: t.eq.max(t.factors.iter().map(|f| f.0).max().unwrap_or(0)),
                    n,
                });
            }
            if t.factors.iter().filter(|f| f.1 == Kind::Acc).count() > 1 {
                return Err(RomError::InvalidParameter(
                    "a term may hold at most one acceleration factor".into(),
                ));
            }
        }
        let has_acc = terms.iter().any(|t| t.factors.iter().any(|f| f.1 == Kind::Acc));
        let mass_inv = if has_acc {
            None
        } else {
            Some(
                mass.clone()
                    .try_inverse()
                    .ok_or_else(|| RomError::Singular("mass matrix".into()))?,
            )
        };
        Ok(PolySystem {
            mass,
            stiffness,
            terms,
            labels: Vec::new(),
            mass_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.mass.nrows()
    }

    pub fn from_structural(model: &StructuralModel) -> Result<Self> {
        let mut terms = Vec::new();
        for &(p, i, j, v) in model.quadratic.entries() {
            terms.push(Term {
                eq: p,
                coeff: v,
                factors: vec![(i, Kind::Disp), (j, Kind::Disp)],
            });
        }
        for &(p, i, j, k, v) in model.cubic.entries() {
            terms.push(Term {
                eq: p,
                coeff: v,
                factors: vec![(i, Kind::Disp), (j, Kind::Disp), (k, Kind::Disp)],
            });
        }
        let mut s = PolySystem::new(model.mass.clone(), model.stiffness.clone(), terms)?;
        s.labels = model.labels.clone();
        Ok(s)
    }

    /// Modal equations `X'' + Omega^2 X + g X X + h X X X = 0`.
    pub fn from_modal(modal: &ModalModel) -> Result<Self> {
        let n = modal.n_modes();
        let k = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|s| modal.omega2(s))));
        let mut terms = Vec::new();
        for &(p, i, j, v) in modal.g.entries() {
            terms.push(Term {
                eq: p,
                coeff: v,
                factors: vec![(i, Kind::Disp), (j, Kind::Disp)],
            });
        }
        for &(p, i, j, l, v) in modal.h.entries() {
            terms.push(Term {
                eq: p,
                coeff: v,
                factors: vec![(i, Kind::Disp), (j, Kind::Disp), (l, Kind::Disp)],
            });
        }
        PolySystem::new(DMatrix::identity(n, n), k, terms)
    }

    pub fn from_oscillator(osc: &ReducedOscillator) -> Result<Self> {
        use Kind::*;
        let w2 = osc.omega_p * osc.omega_p;
        let [c1, c2, c3, c4, c5, c6] = osc.c;
        let spec: [(f64, &[Kind]); 6] = [
            (c1, &[Disp, Disp]),
            (c2 / w2, &[Vel, Vel]),
            (c3 / w2, &[Acc, Disp]),
            (c4, &[Disp, Disp, Disp]),
            (c5 / w2, &[Vel, Vel, Disp]),
            (c6 / w2, &[Acc, Disp, Disp]),
        ];
        let terms = spec
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .map(|&(coeff, kinds)| Term {
                eq: 0,
                coeff,
                factors: kinds.iter().map(|&k| (0, k)).collect(),
            })
            .collect();
        let mut s = PolySystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, w2),
            terms,
        )?;
        s.labels = vec!["R".into()];
        Ok(s)
    }

    /// Multi-master quadratic-manifold reduced dynamics, obtained by
    /// Galerkin projection of the modal equations on the manifold built
    /// from the symmetrized derivatives in `mds`.
    pub fn qm_multi_master(modal: &ModalModel, mds: &ModalDerivativeSet) -> Result<Self> {
        use Kind::*;
        let n = mds.n_masters();
        let nm = modal.n_modes();
        if mds.omega.len() != nm {
            return Err(RomError::dims("derivative set modes", nm, mds.omega.len()));
        }
        let m = &mds.masters;
        let g = modal.g.to_dense();
        let gbar = |p: usize, i: usize, j: usize| 0.5 * (g.get(p, i, j) + g.get(p, j, i));
        let th = |s: usize, a: usize, b: usize| mds.theta_bar_modal(a, b)[s];
        let w2 = |s: usize| modal.omega2(s);
        let mut terms = Vec::new();
        let mut push = |eq: usize, coeff: f64, factors: Vec<(usize, Kind)>| {
            if coeff != 0.0 {
                terms.push(Term { eq, coeff, factors });
            }
        };
        for pa in 0..n {
            let mp = m[pa];
            for a in 0..n {
                for b in 0..n {
                    let (ma, mb) = (m[a], m[b]);
                    let cross = th(mb, pa, a);
                    push(
                        pa,
                        g.get(mp, ma, mb) + 0.5 * w2(mp) * th(mp, a, b) + cross * w2(mb),
                        vec![(a, Disp), (b, Disp)],
                    );
                    push(pa, th(mp, a, b), vec![(a, Vel), (b, Vel)]);
                    push(pa, th(mp, a, b) + cross, vec![(a, Disp), (b, Acc)]);
                    for c in 0..n {
                        let mc = m[c];
                        let mut cubic = modal.h.get(mp, ma, mb, mc);
                        let mut velacc = 0.0;
                        for s in 0..nm {
                            let tpc = th(s, pa, c);
                            cubic += gbar(mp, ma, s) * th(s, b, c)
                                + tpc * (g.get(s, ma, mb) + 0.5 * w2(s) * th(s, a, b));
                            velacc += tpc * th(s, a, b);
                        }
                        push(pa, cubic, vec![(a, Disp), (b, Disp), (c, Disp)]);
                        push(pa, velacc, vec![(a, Vel), (b, Vel), (c, Disp)]);
                        push(pa, velacc, vec![(a, Acc), (b, Disp), (c, Disp)]);
                    }
                }
            }
        }
        let k = DMatrix::from_diagonal(&DVector::from_iterator(n, m.iter().map(|&s| w2(s))));
        let mut s = PolySystem::new(DMatrix::identity(n, n), k, terms)?;
        s.labels = m.iter().map(|s| format!("R{s}")).collect();
        Ok(s)
    }

    fn factor(x: &[f64], v: &[f64], a: &[f64], (c, kind): (usize, Kind)) -> f64 {
        match kind {
            Kind::Disp => x[c],
            Kind::Vel => v[c],
            Kind::Acc => a[c],
        }
    }

    /// Residual `M a + K x + N(x, v, a)` written into `out`.
    pub fn residual_into(&self, x: &[f64], v: &[f64], a: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                r += self.mass[(i, j)] * a[j] + self.stiffness[(i, j)] * x[j];
            }
            out[i] = r;
        }
        for t in &self.terms {
            let mut p = t.coeff;
            for &f in &t.factors {
                p *= Self::factor(x, v, a, f);
            }
            out[t.eq] += p;
        }
    }

    pub fn residual(&self, x: &[f64], v: &[f64], a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.residual_into(x, v, a, &mut out);
        out
    }

    pub fn partials(&self, x: &[f64], v: &[f64], a: &[f64]) -> Partials {
        let mut dx = self.stiffness.clone();
        let mut dv = DMatrix::zeros(self.n(), self.n());
        let mut da = self.mass.clone();
        for t in &self.terms {
            for (k, &(c, kind)) in t.factors.iter().enumerate() {
                let mut p = t.coeff;
                for (l, &f) in t.factors.iter().enumerate() {
                    if l != k {
                        p *= Self::factor(x, v, a, f);
                    }
                }
                match kind {
                    Kind::Disp => dx[(t.eq, c)] += p,
                    Kind::Vel => dv[(t.eq, c)] += p,
                    Kind::Acc => da[(t.eq, c)] += p,
                }
            }
        }
        Partials { dx, dv, da }
    }

    /// Accelerations solving the residual for given displacement and
    /// velocity.
    pub fn acceleration(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let zero = vec![0.0; n];
        let mut r0 = vec![0.0; n];
        self.residual_into(x, v, &zero, &mut r0);
        if let Some(minv) = &self.mass_inv {
            return Ok((0..n)
                .map(|i| -(0..n).map(|j| minv[(i, j)] * r0[j]).sum::<f64>())
                .collect());
        }
        let da = self.partials(x, v, &zero).da;
        let rhs = -DVector::from_vec(r0);
        let sol = da
            .lu()
            .solve(&rhs)
            .ok_or_else(|| RomError::Singular("effective mass matrix".into()))?;
        Ok(sol.iter().copied().collect())
    }
}
