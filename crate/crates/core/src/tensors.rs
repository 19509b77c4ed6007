//! Quadratic and cubic stiffness tensors, the polynomial restoring force
//! `F(u) = K u + G u u + H u u u`, and the physical-to-modal transform.
//!
//! All contractions use full sums: `(G u v)_p = sum_i sum_j G[p][i][j] u_i v_j`,
//! without folding commuting products. A force term `c * x_i * x_j` with
//! `i != j` is therefore stored either as one entry of value `c` or as two
//! entries `(i, j)` and `(j, i)` of value `c / 2`; both give the same force.
//! Folded-sum coefficients from other conventions map to full-sum ones by
//! halving the off-diagonal entries.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::eigen::ModalModel;
use crate::error::{Result, RomError};

const SYMMETRY_RTOL: f64 = 1e-10;

/// Symmetry properties detected when a tensor is built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Symmetry {
    /// Invariant under permutations of the contracted (lower) indices.
    pub lower: bool,
    /// Invariant under all index permutations, i.e. the force derives from a
    /// potential.
    pub potential: bool,
}

/// Third-order tensor of quadratic force coefficients in coordinate-list form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadTensor {
    n: usize,
    entries: Vec<(usize, usize, usize, f64)>,
    symmetry: Symmetry,
}

/// Fourth-order tensor of cubic force coefficients in coordinate-list form.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicTensor {
    n: usize,
    entries: Vec<(usize, usize, usize, usize, f64)>,
    symmetry: Symmetry,
}

fn check_index(context: &str, index: usize, n: usize) -> Result<()> {
    if index >= n {
        return Err(RomError::IndexOutOfRange {
            context: context.to_string(),
            index,
            n,
        });
    }
    Ok(())
}

fn check_len(context: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(RomError::dims(context, n, v.len()));
    }
    Ok(())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= SYMMETRY_RTOL * scale
}

/// All distinct permutations of a small index tuple.
fn permutations(idx: &[usize]) -> Vec<Vec<usize>> {
    if idx.len() <= 1 {
        return vec![idx.to_vec()];
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for k in 0..idx.len() {
        let mut rest = idx.to_vec();
        let head = rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            if !out.contains(&tail) {
                out.push(tail);
            }
        }
    }
    out
}

fn factorial_count(idx: &[usize]) -> usize {
    let mut f = 1;
    for k in 2..=idx.len() {
        f *= k;
    }
    f
}

/// Accumulated values keyed by full index tuple `[p, i, j, ...]`.
fn accumulate<I: Iterator<Item = (Vec<usize>, f64)>>(it: I) -> HashMap<Vec<usize>, f64> {
    let mut map = HashMap::new();
    for (key, v) in it {
        *map.entry(key).or_insert(0.0) += v;
    }
    map
}

fn detect_symmetry(map: &HashMap<Vec<usize>, f64>) -> Symmetry {
    let scale = map.values().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let get = |k: &Vec<usize>| map.get(k).copied().unwrap_or(0.0);
    let mut lower = true;
    let mut potential = true;
    for (key, &v) in map {
        for perm in permutations(&key[1..]) {
            let mut k2 = vec![key[0]];
            k2.extend(perm);
            if !close(get(&k2), v, scale) {
                lower = false;
            }
        }
        for perm in permutations(key) {
            if !close(get(&perm), v, scale) {
                potential = false;
            }
        }
        if !lower && !potential {
            break;
        }
    }
    Symmetry {
        lower,
        potential: potential && lower,
    }
}

/// Averages each entry over the permutations of its lower indices.
fn symmetrize_lower(map: &HashMap<Vec<usize>, f64>) -> Vec<(Vec<usize>, f64)> {
    let mut out: HashMap<Vec<usize>, f64> = HashMap::new();
    for (key, &v) in map {
        let lower = &key[1..];
        let perms = permutations(lower);
        // Distinct permutations of a multiset; weight by full count so that
        // repeated indices keep their value.
        let total = factorial_count(lower) as f64;
        let share = v / total;
        let mult = total / perms.len() as f64;
        for perm in perms {
            let mut k2 = vec![key[0]];
            k2.extend(perm);
            *out.entry(k2).or_insert(0.0) += share * mult;
        }
    }
    let mut sorted: Vec<_> = out.into_iter().filter(|(_, v)| *v != 0.0).collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    sorted
}

impl QuadTensor {
    pub fn zeros(n: usize) -> Self {
        QuadTensor {
            n,
            entries: Vec::new(),
            symmetry: Symmetry {
                lower: true,
                potential: true,
            },
        }
    }

    /// Builds a tensor from `(p, i, j, value)` entries. Duplicate index
    /// tuples are allowed and add up.
    pub fn from_entries(n: usize, entries: Vec<(usize, usize, usize, f64)>) -> Result<Self> {
        for (k, &(p, i, j, _)) in entries.iter().enumerate() {
            let ctx = format!("quadratic entry {k}");
            check_index(&ctx, p, n)?;
            check_index(&ctx, i, n)?;
            check_index(&ctx, j, n)?;
        }
        let symmetry = detect_symmetry(&Self::map_of(&entries));
        Ok(QuadTensor {
            n,
            entries,
            symmetry,
        })
    }

    fn map_of(entries: &[(usize, usize, usize, f64)]) -> HashMap<Vec<usize>, f64> {
        accumulate(entries.iter().map(|&(p, i, j, v)| (vec![p, i, j], v)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_potential_symmetric(&self) -> bool {
        self.symmetry.potential
    }

    /// Coefficient `G[p][i][j]` (sum of matching entries).
    pub fn get(&self, p: usize, i: usize, j: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == p && e.1 == i && e.2 == j)
            .map(|e| e.3)
            .sum()
    }

    /// Mean of the two lower-index orderings, `(G[p][i][j] + G[p][j][i]) / 2`.
    pub fn get_sym(&self, p: usize, i: usize, j: usize) -> f64 {
        0.5 * (self.get(p, i, j) + self.get(p, j, i))
    }

    /// Force-preserving symmetrization over the lower indices.
    pub fn symmetrized(&self) -> Self {
        let entries = symmetrize_lower(&Self::map_of(&self.entries))
            .into_iter()
            .map(|(k, v)| (k[0], k[1], k[2], v))
            .collect();
        // Indices already validated.
        QuadTensor::from_entries(self.n, entries).expect("indices in range")
    }

    /// Full double contraction `(G u v)_p = sum_ij G[p][i][j] u_i v_j`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("quadratic contraction (u)", u, self.n)?;
        check_len("quadratic contraction (v)", v, self.n)?;
        let mut out = DVector::zeros(self.n);
        for &(p, i, j, g) in &self.entries {
            out[p] += g * u[i] * v[j];
        }
        Ok(out)
    }

    /// Single contraction on the last index: `(G u)[p][i] = sum_j G[p][i][j] u_j`.
    pub fn contract_last(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("quadratic contraction (u)", u, self.n)?;
        let mut out = DMatrix::zeros(self.n, self.n);
        for &(p, i, j, g) in &self.entries {
            out[(p, i)] += g * u[j];
        }
        Ok(out)
    }

    /// Dense copy indexed `[p][i][j]`, meant for small `n` (at most 64).
    pub fn to_dense(&self) -> DenseQuad {
        let n = self.n;
        let mut data = vec![0.0; n * n * n];
        for &(p, i, j, g) in &self.entries {
            data[(p * n + i) * n + j] += g;
        }
        DenseQuad { n, data }
    }
}

/// Dense quadratic tensor for small systems.
#[derive(Clone, Debug)]
pub struct DenseQuad {
    n: usize,
    data: Vec<f64>,
}

impl DenseQuad {
    pub fn get(&self, p: usize, i: usize, j: usize) -> f64 {
        self.data[(p * self.n + i) * self.n + j]
    }

    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (p, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                let row = &self.data[(p * n + i) * n..(p * n + i + 1) * n];
                let inner: f64 = row.iter().zip(v).map(|(g, vj)| g * vj).sum();
                acc += u[i] * inner;
            }
            *o = acc;
        }
        out
    }
}

impl CubicTensor {
    pub fn zeros(n: usize) -> Self {
        CubicTensor {
            n,
            entries: Vec::new(),
            symmetry: Symmetry {
                lower: true,
                potential: true,
            },
        }
    }

    pub fn from_entries(
        n: usize,
        entries: Vec<(usize, usize, usize, usize, f64)>,
    ) -> Result<Self> {
        for (e, &(p, i, j, k, _)) in entries.iter().enumerate() {
            let ctx = format!("cubic entry {e}");
            check_index(&ctx, p, n)?;
            check_index(&ctx, i, n)?;
            check_index(&ctx, j, n)?;
            check_index(&ctx, k, n)?;
        }
        let symmetry = detect_symmetry(&Self::map_of(&entries));
        Ok(CubicTensor {
            n,
            entries,
            symmetry,
        })
    }

    fn map_of(entries: &[(usize, usize, usize, usize, f64)]) -> HashMap<Vec<usize>, f64> {
        accumulate(entries.iter().map(|&(p, i, j, k, v)| (vec![p, i, j, k], v)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_potential_symmetric(&self) -> bool {
        self.symmetry.potential
    }

    pub fn get(&self, p: usize, i: usize, j: usize, k: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == p && e.1 == i && e.2 == j && e.3 == k)
            .map(|e| e.4)
            .sum()
    }

    pub fn symmetrized(&self) -> Self {
        let entries = symmetrize_lower(&Self::map_of(&self.entries))
            .into_iter()
            .map(|(k, v)| (k[0], k[1], k[2], k[3], v))
            .collect();
        CubicTensor::from_entries(self.n, entries).expect("indices in range")
    }

    /// Full triple contraction `(H u v w)_p = sum_ijk H[p][i][j][k] u_i v_j w_k`.
    pub fn contract(
        &self,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        check_len("cubic contraction (u)", u, self.n)?;
        check_len("cubic contraction (v)", v, self.n)?;
        check_len("cubic contraction (w)", w, self.n)?;
        let mut out = DVector::zeros(self.n);
        for &(p, i, j, k, h) in &self.entries {
            out[p] += h * u[i] * v[j] * w[k];
        }
        Ok(out)
    }

    /// Double contraction on the last two indices:
    /// `(H u u)[p][i] = sum_jk H[p][i][j][k] u_j u_k`.
    pub fn contract_last_two(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("cubic contraction (u)", u, self.n)?;
        let mut out = DMatrix::zeros(self.n, self.n);
        for &(p, i, j, k, h) in &self.entries {
            out[(p, i)] += h * u[j] * u[k];
        }
        Ok(out)
    }
}

/// Semi-discretised structure `M u'' + K u + G u u + H u u u = Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralModel {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub quadratic: QuadTensor,
    pub cubic: CubicTensor,
    /// External force; conservative analyses ignore it.
    pub force: DVector<f64>,
    pub labels: Vec<String>,
}

/// Checks positive definiteness by Cholesky, reporting the first leading
/// principal minor (1-based order) that is not positive.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(RomError::NotPositiveDefinite { order: j + 1 });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

impl StructuralModel {
    pub fn new(
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        quadratic: QuadTensor,
        cubic: CubicTensor,
    ) -> Result<Self> {
        let n = mass.nrows();
        if mass.ncols() != n {
            return Err(RomError::dims("mass matrix columns", n, mass.ncols()));
        }
        if stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(RomError::dims("stiffness matrix", n, stiffness.nrows()));
        }
        if quadratic.n() != n {
            return Err(RomError::dims("quadratic tensor", n, quadratic.n()));
        }
        if cubic.n() != n {
            return Err(RomError::dims("cubic tensor", n, cubic.n()));
        }
        if !is_symmetric(&mass) {
            return Err(RomError::NotSymmetric("mass matrix".into()));
        }
        if !is_symmetric(&stiffness) {
            return Err(RomError::NotSymmetric("stiffness matrix".into()));
        }
        check_spd(&mass)?;
        Ok(StructuralModel {
            mass,
            stiffness,
            quadratic,
            cubic,
            force: DVector::zeros(n),
            labels: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.mass.nrows()
    }

    /// Restoring force `K u + G u u + H u u u`.
    pub fn restoring_force(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("restoring force", u, self.n())?;
        Ok(&self.stiffness * u + self.quadratic.contract(u, u)? + self.cubic.contract(u, u, u)?)
    }

    fn require_lower_symmetry(&self) -> Result<()> {
        if !self.quadratic.symmetry().lower {
            return Err(RomError::NotSymmetric(
                "quadratic tensor must be symmetric in its lower indices".into(),
            ));
        }
        if !self.cubic.symmetry().lower {
            return Err(RomError::NotSymmetric(
                "cubic tensor must be symmetric in its lower indices".into(),
            ));
        }
        Ok(())
    }

    /// Tangent stiffness `K + 2 G u + 3 H u u`.
    pub fn jacobian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.require_lower_symmetry()?;
        check_len("jacobian", u, self.n())?;
        Ok(&self.stiffness
            + self.quadratic.contract_last(u)? * 2.0
            + self.cubic.contract_last_two(u)? * 3.0)
    }

    /// Second derivative `2 G + 6 H u` as a quadratic tensor.
    pub fn hessian(&self, u: &DVector<f64>) -> Result<QuadTensor> {
        self.require_lower_symmetry()?;
        check_len("hessian", u, self.n())?;
        let n = self.n();
        let mut dense = vec![0.0; n * n * n];
        for &(p, i, j, g) in self.quadratic.entries() {
            dense[(p * n + i) * n + j] += 2.0 * g;
        }
        for &(p, i, j, k, h) in self.cubic.entries() {
            dense[(p * n + i) * n + j] += 6.0 * h * u[k];
        }
        let mut entries = Vec::new();
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = dense[(p * n + i) * n + j];
                    if v != 0.0 {
                        entries.push((p, i, j, v));
                    }
                }
            }
        }
        QuadTensor::from_entries(n, entries)
    }

    /// Elastic potential whose gradient is the restoring force; valid when
    /// both tensors are potential-symmetric.
    pub fn potential_energy(&self, u: &DVector<f64>) -> Result<f64> {
        check_len("potential energy", u, self.n())?;
        let quad = u.dot(&self.quadratic.contract(u, u)?);
        let cubic = u.dot(&self.cubic.contract(u, u, u)?);
        Ok(0.5 * u.dot(&(&self.stiffness * u)) + quad / 3.0 + cubic / 4.0)
    }

    pub fn kinetic_energy(&self, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&(&self.mass * v))
    }
}

/// Projects a structural model onto a mass-normalised eigenbasis:
/// `g_ij = Phi^T G phi_i phi_j`, `h_ijk = Phi^T H phi_i phi_j phi_k`.
///
/// `phi` may hold a subset of the modes (N x m); the modal tensors are then
/// m-dimensional.
pub fn to_modal(model: &StructuralModel, phi: &DMatrix<f64>, omega: &[f64]) -> Result<ModalModel> {
    let n = model.n();
    if phi.nrows() != n {
        return Err(RomError::dims("eigenvector rows", n, phi.nrows()));
    }
    let m = phi.ncols();
    if omega.len() != m {
        return Err(RomError::dims("eigenfrequency count", m, omega.len()));
    }
    let gram = phi.transpose() * &model.mass * phi;
    let ident = DMatrix::<f64>::identity(m, m);
    if (&gram - &ident).amax() > 1e-8 {
        return Err(RomError::InvalidParameter(
            "eigenvectors are not mass-normalised".into(),
        ));
    }

    let mut g = vec![0.0; m * m * m];
    for &(q, k, l, v) in model.quadratic.entries() {
        for p in 0..m {
            let a = v * phi[(q, p)];
            if a == 0.0 {
                continue;
            }
            for i in 0..m {
                let b = a * phi[(k, i)];
                if b == 0.0 {
                    continue;
                }
                for j in 0..m {
                    g[(p * m + i) * m + j] += b * phi[(l, j)];
                }
            }
        }
    }
    let mut h = vec![0.0; m * m * m * m];
    for &(q, k, l, r, v) in model.cubic.entries() {
        for p in 0..m {
            let a = v * phi[(q, p)];
            if a == 0.0 {
                continue;
            }
            for i in 0..m {
                let b = a * phi[(k, i)];
                if b == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let c = b * phi[(l, j)];
                    if c == 0.0 {
                        continue;
                    }
                    for s in 0..m {
                        h[((p * m + i) * m + j) * m + s] += c * phi[(r, s)];
                    }
                }
            }
        }
    }

    let mut g_entries = Vec::new();
    for p in 0..m {
        for i in 0..m {
            for j in 0..m {
                let v = g[(p * m + i) * m + j];
                if v != 0.0 {
                    g_entries.push((p, i, j, v));
                }
            }
        }
    }
    let mut h_entries = Vec::new();
    for p in 0..m {
        for i in 0..m {
            for j in 0..m {
                for s in 0..m {
                    let v = h[((p * m + i) * m + j) * m + s];
                    if v != 0.0 {
                        h_entries.push((p, i, j, s, v));
                    }
                }
            }
        }
    }

    Ok(ModalModel {
        omega: omega.to_vec(),
        phi: phi.clone(),
        g: QuadTensor::from_entries(m, g_entries)?,
        h: CubicTensor::from_entries(m, h_entries)?,
    })
}
