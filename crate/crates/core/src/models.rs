//! Benchmark systems (flat beam and shell-like 2-dof models), the Galerkin
//! reduction of a clamped-clamped von Karman beam that feeds the flat
//! model, and JSON model files.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::eigen::ModalModel;
use crate::error::{Result, RomError};
use crate::tensors::{CubicTensor, QuadTensor, StructuralModel};

/// Parameters of the flat-beam 2-dof model (flexural master `X1` at unit
/// frequency, in-plane slave `X2` at frequency `rho`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlatBeamParams {
    pub rho: f64,
    pub d: f64,
    pub gbar: f64,
}

pub const FLAT_DEFAULT_D: f64 = 2.67;
pub const FLAT_DEFAULT_GBAR: f64 = 0.63;

impl FlatBeamParams {
    pub fn new(rho: f64) -> Self {
        FlatBeamParams {
            rho,
            d: FLAT_DEFAULT_D,
            gbar: FLAT_DEFAULT_GBAR,
        }
    }

    /// Frequency ratio from the slenderness `sigma = h / L`, using the
    /// default `beta`.
    pub fn from_slenderness(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self::new(rho_from_slenderness(clamped_beta()?, sigma)))
    }
}

impl Default for FlatBeamParams {
    fn default() -> Self {
        Self::new(10.0)
    }
}

/// `M = I`, `K = diag(1, rho^2)`,
/// `X1'' + X1 + 2 Gbar rho X1 X2 + D X1^3 = 0`,
/// `X2'' + rho^2 X2 + Gbar rho X1^2 = 0`.
pub fn flat_beam_model(params: &FlatBeamParams) -> Result<StructuralModel> {
    let FlatBeamParams { rho, d, gbar } = *params;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(RomError::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    let c = gbar * rho;
    let g = QuadTensor::from_entries(2, vec![(0, 0, 1, c), (0, 1, 0, c), (1, 0, 0, c)])?;
    let h = CubicTensor::from_entries(2, vec![(0, 0, 0, 0, d)])?;
    let mut model = StructuralModel::new(
        DMatrix::identity(2, 2),
        DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, rho * rho])),
        g,
        h,
    )?;
    model.labels = vec!["flexural".into(), "in-plane".into()];
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShellParams {
    pub omega1: f64,
    pub omega2: f64,
}

impl ShellParams {
    /// `omega1 = 1`, `omega2 = rho`.
    pub fn from_ratio(rho: f64) -> Self {
        ShellParams {
            omega1: 1.0,
            omega2: rho,
        }
    }
}

/// Mass connected to two springs: quadratic and cubic coefficients all
/// follow from the two eigenfrequencies, and the force derives from a
/// potential.
pub fn shell_model(params: &ShellParams) -> Result<StructuralModel> {
    let ShellParams { omega1, omega2 } = *params;
    if !(omega1 > 0.0 && omega2 > 0.0) || !(omega1.is_finite() && omega2.is_finite()) {
        return Err(RomError::InvalidParameter(format!(
            "eigenfrequencies ({omega1}, {omega2}) must be positive"
        )));
    }
    let (w1, w2) = (omega1 * omega1, omega2 * omega2);
    let c = 0.5 * (w1 + w2);
    let g = QuadTensor::from_entries(
        2,
        vec![
            (0, 0, 0, 1.5 * w1),
            (0, 1, 1, 0.5 * w1),
            (0, 0, 1, 0.5 * w2),
            (0, 1, 0, 0.5 * w2),
            (1, 1, 1, 1.5 * w2),
            (1, 0, 0, 0.5 * w2),
            (1, 0, 1, 0.5 * w1),
            (1, 1, 0, 0.5 * w1),
        ],
    )?;
    let h = CubicTensor::from_entries(
        2,
        vec![
            (0, 0, 0, 0, c),
            (0, 0, 1, 1, c / 3.0),
            (0, 1, 0, 1, c / 3.0),
            (0, 1, 1, 0, c / 3.0),
            (1, 1, 1, 1, c),
            (1, 0, 0, 1, c / 3.0),
            (1, 0, 1, 0, c / 3.0),
            (1, 1, 0, 0, c / 3.0),
        ],
    )?;
    let mut model = StructuralModel::new(
        DMatrix::identity(2, 2),
        DMatrix::from_diagonal(&DVector::from_column_slice(&[w1, w2])),
        g,
        h,
    )?;
    model.labels = vec!["x1".into(), "x2".into()];
    Ok(model)
}

/// Modal model of a system already written in modal coordinates
/// (`M = I`, diagonal `K`), keeping the coordinate order even when the
/// frequencies are not ascending.
pub fn diagonal_modal(model: &StructuralModel) -> Result<ModalModel> {
    let n = model.n();
    let off_diag = |m: &DMatrix<f64>| (0..n).any(|i| (0..n).any(|j| i != j && m[(i, j)] != 0.0));
    if model.mass != DMatrix::identity(n, n) || off_diag(&model.stiffness) {
        return Err(RomError::InvalidParameter(
            "model is not in modal coordinates".into(),
        ));
    }
    let mut omega = Vec::with_capacity(n);
    for i in 0..n {
        let k = model.stiffness[(i, i)];
        if !(k > 0.0) {
            return Err(RomError::RigidBodyMode {
                index: i,
                eigenvalue: k,
            });
        }
        omega.push(k.sqrt());
    }
    ModalModel::from_modal_equations(omega, model.quadratic.clone(), model.cubic.clone())
}

pub fn flat_beam_modal(params: &FlatBeamParams) -> Result<ModalModel> {
    diagonal_modal(&flat_beam_model(params)?)
}

pub fn shell_modal(params: &ShellParams) -> Result<ModalModel> {
    diagonal_modal(&shell_model(params)?)
}

/// Coefficients of the Galerkin reduction of the clamped-clamped beam on
/// its first flexural mode and an in-plane mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuumReduction {
    pub sigma: f64,
    pub beta: f64,
    /// Coupling in the in-plane equation.
    pub g: f64,
    /// Coupling in the flexural equation.
    pub c: f64,
    pub d: f64,
    pub gbar: f64,
    pub rho: f64,
}

impl ContinuumReduction {
    pub fn params(&self) -> FlatBeamParams {
        FlatBeamParams {
            rho: self.rho,
            d: self.d,
            gbar: self.gbar,
        }
    }
}

/// Number of Simpson intervals on `[0, 1]`.
pub const QUADRATURE_INTERVALS: usize = 2000;

/// First positive root of `cos(b) cosh(b) = 1` by bisection.
pub fn clamped_beta() -> Result<f64> {
    crate::rom::bisect(|b| b.cos() * b.cosh() - 1.0, 4.0, 5.0, 1e-14)
}

fn rho_from_slenderness(beta: f64, sigma: f64) -> f64 {
    4.0 * PI * 12f64.sqrt() / (beta * beta * sigma)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(RomError::InvalidParameter(format!(
            "slenderness {sigma} must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    let n = QUADRATURE_INTERVALS;
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    s * h / 3.0
}

/// Clamped-clamped flexural shape and its first two derivatives, not yet
/// normalised.
fn flexural_shape(beta: f64, x: f64) -> [f64; 3] {
    let a = beta.sin() - beta.sinh();
    let b = beta.cos() - beta.cosh();
    let bx = beta * x;
    let (s, c, sh, ch) = (bx.sin(), bx.cos(), bx.sinh(), bx.cosh());
    [
        (c - ch) * a - (s - sh) * b,
        beta * ((-s - sh) * a - (c - ch) * b),
        beta * beta * ((-c - ch) * a - (-s - sh) * b),
    ]
}

/// Galerkin coefficients `G`, `C`, `D` of the von Karman beam for
/// slenderness `sigma`, by composite Simpson quadrature.
///
/// The in-plane shape is `Psi = -sqrt(2) sin(4 pi x)`; its orientation fixes
/// the sign of `G` and `C` and is chosen to make them positive.
pub fn flat_beam_from_continuum(sigma: f64) -> Result<ContinuumReduction> {
    check_sigma(sigma)?;
    let beta = clamped_beta()?;
    let norm = simpson(|x| flexural_shape(beta, x)[0].powi(2)).sqrt();
    let phi = |x: f64| {
        let [f, d1, d2] = flexural_shape(beta, x);
        [f / norm, d1 / norm, d2 / norm]
    };
    let k = 4.0 * PI;
    let psi = |x: f64| -(2f64.sqrt()) * (k * x).sin();
    let dpsi = |x: f64| -(2f64.sqrt()) * k * (k * x).cos();
    let b4 = beta.powi(4);

    // Integrated by parts with the clamped boundary values.
    let g = 6.0 / b4 * simpson(|x| dpsi(x) * phi(x)[1].powi(2));
    let c = -12.0 / b4 * simpson(|x| {
        let [_, d1, d2] = phi(x);
        psi(x) * d1 * d2
    });
    let d = 6.0 / b4 * simpson(|x| phi(x)[1].powi(4));
    Ok(ContinuumReduction {
        sigma,
        beta,
        g,
        c,
        d,
        gbar: g * beta * beta / (4.0 * PI * 12f64.sqrt()),
        rho: rho_from_slenderness(beta, sigma),
    })
}

fn ing(location: impl Into<String>, message: impl Into<String>) -> RomError {
    RomError::ingestion(location, message)
}

fn as_index(v: &Value, n: usize, loc: &str) -> Result<usize> {
    let i = v
        .as_u64()
        .ok_or_else(|| ing(loc, format!("expected a non-negative integer index, found {v}")))?;
    let i = i as usize;
    if i >= n {
        return Err(ing(loc, format!("index {i} out of range for n = {n}")));
    }
    Ok(i)
}

fn as_number(v: &Value, loc: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ing(loc, format!("expected a finite number, found {v}")))
}

/// Dense matrix as nested rows or one flat row-major list.
fn parse_matrix(v: &Value, n: usize, name: &str) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| ing(name, "expected an array"))?;
    if rows.iter().all(Value::is_number) {
        if rows.len() != n * n {
            return Err(ing(name, format!("expected {} entries, found {}", n * n, rows.len())));
        }
        let mut m = DMatrix::zeros(n, n);
        for (k, x) in rows.iter().enumerate() {
            m[(k / n, k % n)] = as_number(x, &format!("{name}[{k}]"))?;
        }
        return Ok(m);
    }
    if rows.len() != n {
        return Err(ing(name, format!("expected {n} rows or {} entries, found {}", n * n, rows.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| ing(format!("{name}[{i}]"), "expected a row array"))?;
        if row.len() != n {
            return Err(ing(
                format!("{name}[{i}]"),
                format!("expected {n} columns, found {}", row.len()),
            ));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = as_number(x, &format!("{name}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

fn parse_entries(v: Option<&Value>, n: usize, name: &str, arity: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let Some(v) = v else {
        return Ok(Vec::new());
    };
    let list = v.as_array().ok_or_else(|| ing(name, "expected an array of entries"))?;
    let mut out = Vec::with_capacity(list.len());
    for (e, entry) in list.iter().enumerate() {
        let loc = format!("{name}[{e}]");
        let items = entry
            .as_array()
            .ok_or_else(|| ing(&loc, "expected an array"))?;
        if items.len() != arity + 1 {
            return Err(ing(
                &loc,
                format!("expected {} indices and a value, found {} items", arity, items.len()),
            ));
        }
        let mut idx = Vec::with_capacity(arity);
        for (k, x) in items[..arity].iter().enumerate() {
            idx.push(as_index(x, n, &format!("{loc}[{k}]"))?);
        }
        out.push((idx, as_number(&items[arity], &format!("{loc}[{arity}]"))?));
    }
    Ok(out)
}

/// Builds a model from the JSON object format.
pub fn model_from_json(text: &str) -> Result<StructuralModel> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| ing(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| ing("$", "expected a JSON object"))?;
    let n = obj
        .get("n")
        .ok_or_else(|| ing("n", "missing field"))?
        .as_u64()
        .filter(|&n| n > 0)
        .ok_or_else(|| ing("n", "expected a positive integer"))? as usize;

    let mass = match obj.get("mass") {
        None => return Err(ing("mass", "missing field")),
        Some(Value::String(s)) if s == "identity" => DMatrix::identity(n, n),
        Some(Value::String(s)) => return Err(ing("mass", format!("unknown mass keyword {s:?}"))),
        Some(v) => parse_matrix(v, n, "mass")?,
    };
    let stiffness = parse_matrix(
        obj.get("stiffness").ok_or_else(|| ing("stiffness", "missing field"))?,
        n,
        "stiffness",
    )?;
    let quad = parse_entries(obj.get("quadratic"), n, "quadratic", 3)?
        .into_iter()
        .map(|(i, v)| (i[0], i[1], i[2], v))
        .collect();
    let cubic = parse_entries(obj.get("cubic"), n, "cubic", 4)?
        .into_iter()
        .map(|(i, v)| (i[0], i[1], i[2], i[3], v))
        .collect();
    let symmetrize = match obj.get("symmetrize") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| ing("symmetrize", "expected a boolean"))?,
    };
    let mut g = QuadTensor::from_entries(n, quad)?;
    let mut h = CubicTensor::from_entries(n, cubic)?;
    if symmetrize {
        g = g.symmetrized();
        h = h.symmetrized();
    }
    if let Some(v) = obj.get("potential_symmetric") {
        let claimed = v
            .as_bool()
            .ok_or_else(|| ing("potential_symmetric", "expected a boolean"))?;
        if claimed && !g.is_potential_symmetric() {
            return Err(ing("quadratic", "declared potential-symmetric but is not"));
        }
        if claimed && !h.is_potential_symmetric() {
            return Err(ing("cubic", "declared potential-symmetric but is not"));
        }
    }

    let mut model = StructuralModel::new(mass, stiffness, g, h).map_err(|e| match e {
        RomError::NotPositiveDefinite { order } => ing(
            "mass",
            format!("not positive definite: leading minor of order {order} is not positive"),
        ),
        RomError::NotSymmetric(what) => ing(
            what.split(' ').next().unwrap_or("matrix").to_string(),
            format!("{what} is not symmetric"),
        ),
        other => other,
    })?;

    if let Some(v) = obj.get("labels") {
        let labels = v.as_array().ok_or_else(|| ing("labels", "expected an array"))?;
        if labels.len() != n {
            return Err(ing("labels", format!("expected {n} labels, found {}", labels.len())));
        }
        model.labels = labels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                l.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| ing(format!("labels[{k}]"), "expected a string"))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = obj.get("force") {
        let f = v.as_array().ok_or_else(|| ing("force", "expected an array"))?;
        if f.len() != n {
            return Err(ing("force", format!("expected {n} entries, found {}", f.len())));
        }
        let vals = f
            .iter()
            .enumerate()
            .map(|(k, x)| as_number(x, &format!("force[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        model.force = DVector::from_vec(vals);
    }
    Ok(model)
}

pub fn model_to_json(model: &StructuralModel) -> Value {
    let n = model.n();
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
    };
    let mass = if model.mass == DMatrix::identity(n, n) {
        json!("identity")
    } else {
        json!(rows(&model.mass))
    };
    let quad: Vec<Value> = model
        .quadratic
        .entries()
        .iter()
        .map(|&(p, i, j, v)| json!([p, i, j, v]))
        .collect();
    let cubic: Vec<Value> = model
        .cubic
        .entries()
        .iter()
        .map(|&(p, i, j, k, v)| json!([p, i, j, k, v]))
        .collect();
    let mut out = json!({
        "n": n,
        "mass": mass,
        "stiffness": rows(&model.stiffness),
        "quadratic": quad,
        "cubic": cubic,
        "symmetrize": false,
        "potential_symmetric":
            model.quadratic.is_potential_symmetric() && model.cubic.is_potential_symmetric(),
    });
    if !model.labels.is_empty() {
        out["labels"] = json!(model.labels);
    }
    if model.force.iter().any(|&f| f != 0.0) {
        out["force"] = json!(model.force.as_slice());
    }
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StructuralModel> {
    let text = fs::read_to_string(path)?;
    model_from_json(&text)
}

/// Writes via a temporary sibling file and a rename.
pub fn save_model(model: &StructuralModel, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&model_to_json(model))?;
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| RomError::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_model_structure() {
        let m = flat_beam_model(&FlatBeamParams::default()).unwrap();
        assert_eq!(m.stiffness[(1, 1)], 100.0);
        assert_eq!(m.cubic.get(0, 0, 0, 0), 2.67);
        assert_eq!(m.quadratic.get(0, 0, 0), 0.0);
        assert!(m.quadratic.is_potential_symmetric());
        assert!(flat_beam_model(&FlatBeamParams::new(0.0)).is_err());
    }

    #[test]
    fn flat_model_uncoupled_without_gbar() {
        let p = FlatBeamParams {
            gbar: 0.0,
            ..Default::default()
        };
        let m = flat_beam_model(&p).unwrap();
        assert!(m.quadratic.entries().iter().all(|e| e.3 == 0.0));
    }

    #[test]
    fn shell_model_symmetries() {
        let m = shell_model(&ShellParams::from_ratio(10.0)).unwrap();
        assert_eq!(m.quadratic.get(1, 0, 0), 50.0);
        assert_eq!(m.quadratic.get(0, 0, 0), 1.5);
        assert!(m.quadratic.is_potential_symmetric());
        assert!(m.cubic.is_potential_symmetric());

        let s = shell_model(&ShellParams::from_ratio(1.0)).unwrap();
        for &(p, i, j, v) in s.quadratic.entries() {
            assert_eq!(s.quadratic.get(1 - p, 1 - i, 1 - j), v);
        }
    }

    #[test]
    fn beta_root() {
        let b = clamped_beta().unwrap();
        assert!((b.cos() * b.cosh() - 1.0).abs() < 1e-8);
        assert!((b - 4.7300).abs() < 1e-4);
    }

    #[test]
    fn continuum_coefficients() {
        let c = flat_beam_from_continuum(0.1).unwrap();
        assert!((c.g - c.c).abs() < 1e-6);
        assert!((c.g - 1.23).abs() < 0.01, "{c:?}");
        assert!((c.d - 2.67).abs() < 0.01, "{c:?}");
        assert!((c.rho * 0.1 - 1.95).abs() < 0.01 * 1.95);
    }

    #[test]
    fn slenderness_bounds() {
        assert!(flat_beam_from_continuum(0.0).is_err());
        assert!(flat_beam_from_continuum(1.0).is_err());
    }

    #[test]
    fn json_errors_carry_locations() {
        let err = model_from_json(r#"{"n":2,"mass":"identity","stiffness":[[1,0],[0,4]],"quadratic":[[0,0,7,1.0]]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("quadratic[0][2]"), "{err}");

        let err = model_from_json(r#"{"n":2,"mass":[[1,0],[0,-1]],"stiffness":[[1,0],[0,4]]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("order 2"), "{err}");

        let err = model_from_json(r#"{"n":2,"mass":"identity"}"#).unwrap_err();
        assert!(err.to_string().contains("stiffness"), "{err}");

        let err = model_from_json("{ not json").unwrap_err();
        assert!(matches!(err, RomError::Ingestion { .. }));
    }

    #[test]
    fn json_symmetrize_and_flat_matrix() {
        let m = model_from_json(
            r#"{"n":2,"mass":[1,0,0,1],"stiffness":[1,0,0,4],"quadratic":[[0,0,1,1.0]],"symmetrize":true}"#,
        )
        .unwrap();
        assert_eq!(m.quadratic.get(0, 0, 1), 0.5);
        assert_eq!(m.quadratic.get(0, 1, 0), 0.5);
        let err = model_from_json(
            r#"{"n":2,"mass":"identity","stiffness":[1,0,0,4],"quadratic":[[0,0,1,1.0]],"potential_symmetric":true}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("quadratic"));
    }
}
