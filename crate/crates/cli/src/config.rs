use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use romlab_core::models::{
    flat_beam_model, load_model, shell_model, FlatBeamParams, ShellParams,
};
use romlab_core::StructuralModel;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelSource {
    Flat,
    Shell,
    File { path: PathBuf },
}

impl ModelSource {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "flat" => Ok(ModelSource::Flat),
            "shell" => Ok(ModelSource::Shell),
            _ => match text.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(ModelSource::File { path: p.into() }),
                _ => bail!("unknown model '{text}' (expected flat, shell or file:PATH)"),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelSource::Flat => "flat".into(),
            ModelSource::Shell => "shell".into(),
            ModelSource::File { path } => format!("file:{}", path.display()),
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, ModelSource::File { .. })
    }

    /// Structural model at frequency ratio `rho` (ignored for files).
    pub fn build(&self, rho: f64) -> Result<StructuralModel> {
        Ok(match self {
            ModelSource::Flat => flat_beam_model(&FlatBeamParams::new(rho))?,
            ModelSource::Shell => shell_model(&ShellParams::from_ratio(rho))?,
            ModelSource::File { path } => {
                load_model(path).with_context(|| format!("loading {}", path.display()))?
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "nf2")]
    Nf2,
    #[serde(rename = "nf3")]
    Nf3,
    #[serde(rename = "qm-md")]
    QmMd,
    #[serde(rename = "qm-smd")]
    QmSmd,
    #[serde(rename = "static-cond")]
    StaticCond,
    #[serde(rename = "full")]
    Full,
}

pub const ALL_METHODS: [Method; 6] = [
    Method::Full,
    Method::Nf2,
    Method::Nf3,
    Method::QmMd,
    Method::QmSmd,
    Method::StaticCond,
];

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nf2 => "nf2",
            Method::Nf3 => "nf3",
            Method::QmMd => "qm-md",
            Method::QmSmd => "qm-smd",
            Method::StaticCond => "static-cond",
            Method::Full => "full",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        ALL_METHODS
            .into_iter()
            .find(|m| m.name() == text)
            .with_context(|| {
                format!("unknown method '{text}' (expected nf2, nf3, qm-md, qm-smd, static-cond, full or all)")
            })
    }

    /// Comma-separated list, or `all`.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        if text == "all" {
            return Ok(ALL_METHODS.to_vec());
        }
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m = Self::parse(part)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        ensure!(!out.is_empty(), "empty method list");
        Ok(out)
    }
}

/// `a`, `a:b` or `a:b:step`; `b` is included when it lies on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

pub const DEFAULT_RHO_STEP: f64 = 0.01;

impl RhoRange {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number '{p}' in rho spec '{text}'")))
            .collect::<Result<_>>()?;
        let r = match parts[..] {
            [a] => RhoRange { start: a, stop: a, step: DEFAULT_RHO_STEP },
            [a, b] => RhoRange { start: a, stop: b, step: DEFAULT_RHO_STEP },
            [a, b, s] => RhoRange { start: a, stop: b, step: s },
            _ => bail!("rho spec '{text}' must be a, a:b or a:b:step"),
        };
        ensure!(
            r.start > 0.0 && r.stop >= r.start && r.step > 0.0 && r.stop.is_finite(),
            "rho spec '{text}' must satisfy 0 < a <= b and step > 0"
        );
        Ok(r)
    }

    pub fn single(self) -> Option<f64> {
        (self.start == self.stop).then_some(self.start)
    }

    /// Grid values computed as `start + k step` (no accumulated drift).
    pub fn values(self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuationSettings {
    pub n_harm: usize,
    pub tol: f64,
    pub max_amp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ManifoldGrid {
    pub r_max: f64,
    /// Velocity half-range in units of the master linear frequency.
    pub s_max: f64,
    pub points: usize,
    pub orbit_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Command {
    Gamma { ratios: bool },
    Backbone,
    Manifold(ManifoldGrid),
    Modeshape { a0: f64 },
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gamma { .. } => "gamma",
            Command::Backbone => "backbone",
            Command::Manifold(_) => "manifold",
            Command::Modeshape { .. } => "modeshape",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelSource,
    pub rho: RhoRange,
    pub master: usize,
    pub methods: Vec<Method>,
    pub continuation: ContinuationSettings,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.continuation.n_harm >= 1, "--n-harm must be at least 1");
        ensure!(self.continuation.tol > 0.0, "--tol must be positive");
        ensure!(
            self.continuation.max_amp >= 0.0 && self.continuation.max_amp.is_finite(),
            "--max-amp must be a finite non-negative number"
        );
        match self.command {
            Command::Manifold(g) => ensure!(
                g.r_max >= 0.0 && g.s_max >= 0.0 && g.points >= 1 && g.orbit_samples >= 1,
                "manifold grid extents must be non-negative and counts positive"
            ),
            Command::Modeshape { a0 } => {
                ensure!(a0.is_finite() && a0 >= 0.0, "--a0 must be a finite non-negative number")
            }
            _ => {}
        }
        Ok(())
    }

    /// The single frequency ratio of a non-sweep command.
    pub fn rho_value(&self) -> Result<f64> {
        self.rho
            .single()
            .with_context(|| format!("'{}' expects a single --rho value", self.command.name()))
    }

    pub fn model(&self) -> Result<StructuralModel> {
        self.model.build(self.rho_value()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_grid() {
        let r = RhoRange::parse("0.5:12:0.01").unwrap();
        let v = r.values();
        assert_eq!(v.len(), 1151);
        assert_eq!(v[0], 0.5);
        assert!((v[1150] - 12.0).abs() < 1e-12);
        assert_eq!(RhoRange::parse("2").unwrap().values(), vec![2.0]);
        assert_eq!(RhoRange::parse("3:3:0.1").unwrap().values().len(), 1);
        assert!(RhoRange::parse("3:1").is_err());
        assert!(RhoRange::parse("0:1").is_err());
        assert!(RhoRange::parse("1:x").is_err());
    }

    #[test]
    fn methods_and_models() {
        assert_eq!(Method::parse_list("all").unwrap().len(), 6);
        assert_eq!(
            Method::parse_list("qm-md, nf2,qm-md").unwrap(),
            vec![Method::QmMd, Method::Nf2]
        );
        assert!(Method::parse_list("md").is_err());
        assert_eq!(ModelSource::parse("shell").unwrap(), ModelSource::Shell);
        assert_eq!(
            ModelSource::parse("file:a/b.json").unwrap(),
            ModelSource::File { path: "a/b.json".into() }
        );
        assert!(ModelSource::parse("file:").is_err());
        assert!(ModelSource::parse("beam").is_err());
    }
}
