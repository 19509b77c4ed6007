use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use romlab_core::continuation::{
    backbone, fs_manifold, manifold_scan, map_backbone, solve_at_amplitude, BackboneCurve,
    BackboneOptions, BranchStatus, HbmOptions, Measure, PolySystem, QmMapping, ReducedMapping,
    StopReason,
};
use romlab_core::modal_derivatives::{compute_md, compute_smd, ModalDerivativeSet};
use romlab_core::models::{diagonal_modal, write_atomic};
use romlab_core::normal_form::{nf_coefficients, NfOptions, NfOrder, NormalFormCoeffs};
use romlab_core::rom::{
    build_rom, c_ratios_sample, gamma_closed_form, orth_component, rom_from_derivatives, RomMethod,
};
use romlab_core::{solve_modes, ModalModel, StructuralModel};
use serde::Serialize;

use crate::config::{Command, ManifoldGrid, Method, ModelSource, RunConfig};
use crate::svg::{self, PlotSpec, Series};
use crate::table::{Table, SCHEMA_VERSION};

/// Harmonics reported per modal coordinate in backbone tables.
const REPORTED_HARMONICS: usize = 4;

#[derive(Debug, Serialize)]
pub struct BranchSummary {
    pub method: String,
    pub ok: bool,
    pub status: String,
    pub points: usize,
    pub file: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub schema: u32,
    pub config: RunConfig,
    pub branches: Vec<BranchSummary>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn failed(&self) -> bool {
        self.branches.iter().any(|b| !b.ok)
    }
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Output<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), text.as_bytes())
            .with_context(|| format!("writing {name}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes the table and returns the parsed copy that plots are made from.
    fn table(&mut self, name: &str, table: &Table) -> Result<Table> {
        let text = table.to_csv();
        self.write(name, &text)?;
        Table::parse(&text)
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut out = Output { dir: &cfg.out, files: Vec::new() };
    let branches = match cfg.command {
        Command::Gamma { ratios } => gamma(cfg, &mut out, ratios)?,
        Command::Backbone => backbones(cfg, &mut out)?,
        Command::Manifold(grid) => manifolds(cfg, &mut out, grid)?,
        Command::Modeshape { a0 } => modeshapes(cfg, &mut out, a0)?,
    };
    let summary = RunSummary {
        schema: SCHEMA_VERSION,
        config: cfg.clone(),
        branches,
        files: std::mem::take(&mut out.files),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    out.write("summary.json", &(json + "\n"))?;
    Ok(summary)
}

fn base_table(cfg: &RunConfig, kind: &str, columns: Vec<String>) -> Table {
    let t = Table::new(kind, columns).with_meta("model", cfg.model.name());
    match cfg.rho.single() {
        Some(r) if cfg.model.is_builtin() => t.with_meta("rho", r),
        _ => t,
    }
    .with_meta("master", cfg.master)
}

/// Built-in models are already modal; files go through the eigensolver.
fn modal_of(source: &ModelSource, model: &StructuralModel) -> Result<ModalModel> {
    Ok(if source.is_builtin() {
        diagonal_modal(model)?
    } else {
        solve_modes(model, model.n())?
    })
}

fn rom_method(m: Method) -> Option<RomMethod> {
    match m {
        Method::Nf2 | Method::Nf3 => Some(RomMethod::Nf),
        Method::QmMd => Some(RomMethod::QmMd),
        Method::QmSmd => Some(RomMethod::QmSmd),
        Method::StaticCond => Some(RomMethod::StaticCondensation),
        Method::Full => None,
    }
}

// ---------------------------------------------------------------- gamma

fn gamma(cfg: &RunConfig, out: &mut Output, ratios: bool) -> Result<Vec<BranchSummary>> {
    let rhos = if cfg.model.is_builtin() || ratios {
        cfg.rho.values()
    } else {
        vec![f64::NAN]
    };
    let (name, table) = if ratios {
        let cols = ["rho", "md", "smd", "nf", "md_pole", "nf_pole"];
        let mut t = Table::new("c-ratios", cols.map(String::from).to_vec());
        for &rho in &rhos {
            let s = c_ratios_sample(rho);
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            t.push(vec![rho, s.ratios.md, s.ratios.smd, s.ratios.nf, flag(s.md_pole), flag(s.nf_pole)]);
        }
        ("c_ratios", t)
    } else {
        let methods: Vec<Method> = cfg.methods.iter().copied().filter(|&m| m != Method::Full).collect();
        if methods.is_empty() {
            bail!("gamma needs at least one reduced method");
        }
        let mut cols = vec!["rho".to_string()];
        for m in &methods {
            cols.push(format!("gamma_{}", m.name()));
            cols.push(format!("pole_{}", m.name()));
        }
        let mut t = base_table(cfg, "gamma", cols);
        let mut file_modal = None;
        for &rho in &rhos {
            let modal = if cfg.model.is_builtin() {
                modal_of(&cfg.model, &cfg.model.build(rho)?)?
            } else {
                if file_modal.is_none() {
                    let model = cfg.model.build(rho)?;
                    file_modal = Some(modal_of(&cfg.model, &model)?);
                }
                file_modal.clone().expect("set above")
            };
            let mut row = vec![rho];
            for &m in &methods {
                let g = gamma_closed_form(&modal, cfg.master, rom_method(m).expect("reduced method"))?;
                row.push(g.gamma);
                row.push(if g.pole { 1.0 } else { 0.0 });
            }
            t.push(row);
        }
        ("gamma", t)
    };
    let parsed = out.table(&format!("{name}.csv"), &table)?;
    let value_cols: Vec<&String> = parsed
        .columns
        .iter()
        .filter(|c| *c != "rho" && !c.contains("pole"))
        .collect();
    let series: Vec<Series> = value_cols
        .iter()
        .filter_map(|c| Series::from_table(&parsed, "rho", c, c.trim_start_matches("gamma_")))
        .collect();
    let spec = PlotSpec {
        title: if ratios { "C / C_SC".into() } else { format!("Gamma, {}", parsed.meta("model").unwrap_or("?")) },
        x_label: "rho".into(),
        y_label: if ratios { "ratio".into() } else { "Gamma".into() },
        y_range: Some(if ratios { (0.0, 4.0) } else { (-3.0, 3.0) }),
        markers: vec![1.0, 2.0],
    };
    out.write(&format!("{name}.svg"), &svg::render(&spec, &series))?;
    Ok(Vec::new())
}

// ------------------------------------------------------------- backbone

/// Static condensation keeps only the master coordinate.
struct MasterOnly {
    master: usize,
    n: usize,
}

impl ReducedMapping for MasterOnly {
    fn master(&self) -> usize {
        self.master
    }

    fn n_modes(&self) -> usize {
        self.n
    }

    fn map(&self, r: f64, s: f64) -> (DVector<f64>, DVector<f64>) {
        let mut x = DVector::zeros(self.n);
        let mut y = DVector::zeros(self.n);
        x[self.master] = r;
        y[self.master] = s;
        (x, y)
    }
}

struct Setup {
    modal: ModalModel,
    model: StructuralModel,
}

impl Setup {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let model = cfg.model()?;
        let modal = modal_of(&cfg.model, &model)?;
        if cfg.master >= modal.n_modes() {
            bail!("--master {} out of range ({} modes)", cfg.master, modal.n_modes());
        }
        Ok(Setup { modal, model })
    }

    fn nf(&self, cfg: &RunConfig, order: NfOrder) -> Result<NormalFormCoeffs> {
        Ok(nf_coefficients(&self.modal, cfg.master, order, NfOptions::default())?)
    }

    fn derivatives(&self, cfg: &RunConfig, m: Method) -> Result<ModalDerivativeSet> {
        let mds = if m == Method::QmMd {
            compute_md(&self.model, &self.modal, &[cfg.master])?
        } else {
            compute_smd(&self.model, &self.modal, &[cfg.master])?
        };
        Ok(mds)
    }
}

fn backbone_opts(cfg: &RunConfig, master: usize) -> BackboneOptions {
    BackboneOptions {
        hbm: HbmOptions {
            n_harm: cfg.continuation.n_harm,
            tol: cfg.continuation.tol,
            ..Default::default()
        },
        master,
        max_amp: cfg.continuation.max_amp,
        ..Default::default()
    }
}

/// Backbone of one method in modal coordinates.
fn method_backbone(cfg: &RunConfig, setup: &Setup, m: Method) -> Result<BackboneCurve> {
    let p = cfg.master;
    let wp = setup.modal.omega[p];
    if m == Method::Full {
        let sys = PolySystem::from_modal(&setup.modal)?;
        return Ok(backbone(&sys, wp, 1.0, backbone_opts(cfg, p))?);
    }
    let reduced = |osc| -> Result<BackboneCurve> {
        let sys = PolySystem::from_oscillator(&osc)?;
        Ok(backbone(&sys, wp, 1.0, backbone_opts(cfg, 0))?)
    };
    let nh = cfg.continuation.n_harm;
    let curve = match m {
        Method::Nf2 | Method::Nf3 => {
            let order = if m == Method::Nf2 { NfOrder::Second } else { NfOrder::Third };
            let nf = setup.nf(cfg, order)?;
            map_backbone(&reduced(nf.reduced_dynamics())?, &nf, nh)?
        }
        Method::QmMd | Method::QmSmd => {
            let mds = setup.derivatives(cfg, m)?;
            let osc = rom_from_derivatives(&setup.modal, &mds)?;
            map_backbone(&reduced(osc)?, &QmMapping::new(&mds)?, nh)?
        }
        Method::StaticCond => {
            let osc = build_rom(&setup.modal, p, RomMethod::StaticCondensation)?;
            let map = MasterOnly { master: p, n: setup.modal.n_modes() };
            map_backbone(&reduced(osc)?, &map, nh)?
        }
        Method::Full => unreachable!(),
    };
    Ok(curve)
}

fn backbone_columns(n: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["omega", "amplitude", "h1", "residual"].map(String::from).to_vec();
    for k in 0..n {
        for h in 0..REPORTED_HARMONICS {
            cols.push(format!("x{k}_h{h}"));
        }
    }
    cols
}

fn status_text(status: &BranchStatus) -> String {
    match status {
        BranchStatus::Completed(r) => format!(
            "completed: {}",
            match r {
                StopReason::AmplitudeCap => "amplitude cap",
                StopReason::StepLimit => "step limit",
                StopReason::FrequencyFloor => "frequency floor",
            }
        ),
        BranchStatus::Terminated(why) => format!("terminated: {why}"),
    }
}

fn backbones(cfg: &RunConfig, out: &mut Output) -> Result<Vec<BranchSummary>> {
    let setup = Setup::new(cfg)?;
    let n = setup.modal.n_modes();
    let p = cfg.master;
    let linear_only = cfg.continuation.max_amp == 0.0;
    let results: Vec<Result<BackboneCurve>> = if linear_only {
        Vec::new()
    } else {
        let setup = &setup;
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .methods
                .iter()
                .map(|&m| scope.spawn(move || method_backbone(cfg, setup, m)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("worker panicked"))))
                .collect()
        })
    };

    let mut branches = Vec::new();
    let mut plotted = Vec::new();
    for (i, &m) in cfg.methods.iter().enumerate() {
        let mut table = base_table(cfg, "backbone", backbone_columns(n)).with_meta("method", m.name());
        let (ok, status) = if linear_only {
            let mut row = vec![setup.modal.omega[p], 0.0, 0.0, 0.0];
            row.resize(table.columns.len(), 0.0);
            table.push(row);
            (true, "completed: linear point only".to_string())
        } else {
            match &results[i] {
                Ok(curve) => {
                    for pt in &curve.points {
                        let mut row = vec![pt.omega, pt.amplitude, pt.h1, pt.residual];
                        for k in 0..n {
                            row.push(pt.signal.cos(k, 0));
                            for h in 1..REPORTED_HARMONICS {
                                row.push(if h <= pt.signal.n_harm { pt.signal.harmonic_amplitude(k, h) } else { 0.0 });
                            }
                        }
                        table.push(row);
                    }
                    (curve.status.is_ok(), status_text(&curve.status))
                }
                Err(e) => (false, format!("error: {e:#}")),
            }
        };
        let file = format!("backbone_{}.csv", m.name());
        let points = table.rows.len();
        plotted.push((m, out.table(&file, &table)?));
        branches.push(BranchSummary { method: m.name().into(), ok, status, points, file: Some(file) });
    }

    let ycol = format!("x{p}_h1");
    let series: Vec<Series> = plotted
        .iter()
        .filter_map(|(m, t)| Series::from_table(t, "omega", &ycol, m.name()))
        .collect();
    let spec = PlotSpec {
        title: format!("Backbones, {} (master {p})", cfg.model.name()),
        x_label: "omega".into(),
        y_label: format!("first harmonic of X{p}"),
        ..Default::default()
    };
    out.write("backbone.svg", &svg::render(&spec, &series))?;
    Ok(branches)
}

// ------------------------------------------------------------- manifold

fn grid(max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|k| -max + 2.0 * max * k as f64 / (n - 1) as f64).collect()
}

fn cut_columns(n: usize) -> Vec<String> {
    std::iter::once("R".to_string()).chain((0..n).map(|k| format!("X{k}"))).collect()
}

fn manifolds(cfg: &RunConfig, out: &mut Output, g: ManifoldGrid) -> Result<Vec<BranchSummary>> {
    let setup = Setup::new(cfg)?;
    let n = setup.modal.n_modes();
    let p = cfg.master;
    let wp = setup.modal.omega[p];
    let r_grid = grid(g.r_max, g.points);
    let s_grid: Vec<f64> = grid(g.s_max, g.points).into_iter().map(|s| s * wp).collect();

    let mut branches = Vec::new();
    let mut cuts = Vec::new();
    for &m in &cfg.methods {
        let scan = |map: &dyn ReducedMapping| -> (Table, Table) {
            let sample = manifold_scan(map, &r_grid, &s_grid);
            let mut full = base_table(cfg, "manifold", sample.columns).with_meta("method", m.name());
            full.rows = sample.rows;
            let mut cut = base_table(cfg, "manifold-cut", cut_columns(n)).with_meta("method", m.name());
            for &r in &r_grid {
                let (x, _) = map.map(r, 0.0);
                cut.push(std::iter::once(r).chain(x.iter().copied()).collect());
            }
            (full, cut)
        };
        let result: Result<(Table, Table, String, bool)> = (|| {
            Ok(match m {
                Method::Nf2 | Method::Nf3 => {
                    let order = if m == Method::Nf2 { NfOrder::Second } else { NfOrder::Third };
                    let (a, b) = scan(&setup.nf(cfg, order)?);
                    (a, b, "completed".into(), true)
                }
                Method::QmMd | Method::QmSmd => {
                    let mds = setup.derivatives(cfg, m)?;
                    let (a, b) = scan(&QmMapping::new(&mds)?);
                    (a, b, "completed".into(), true)
                }
                Method::StaticCond => {
                    let (a, b) = scan(&MasterOnly { master: p, n });
                    (a, b, "completed".into(), true)
                }
                Method::Full => {
                    let curve = method_backbone(cfg, &setup, m)?;
                    let sample = fs_manifold(&curve, g.orbit_samples);
                    let mut full = base_table(cfg, "manifold-orbits", sample.columns).with_meta("method", m.name());
                    full.rows = sample.rows;
                    // Turning points of the even orbits: phase pi, then phase 0.
                    let mut cut = base_table(cfg, "manifold-cut", cut_columns(n)).with_meta("method", m.name());
                    let half: Vec<DVector<f64>> =
                        curve.points.iter().map(|pt| pt.signal.eval(0.5 * pt.signal.period()).0).collect();
                    for x in half.iter().rev() {
                        cut.push(std::iter::once(f64::NAN).chain(x.iter().copied()).collect());
                    }
                    for pt in &curve.points {
                        let x = pt.signal.eval(0.0).0;
                        cut.push(std::iter::once(f64::NAN).chain(x.iter().copied()).collect());
                    }
                    (full, cut, status_text(&curve.status), curve.status.is_ok())
                }
            })
        })();
        match result {
            Ok((full, cut, status, ok)) => {
                let file = format!("manifold_{}.csv", m.name());
                out.table(&file, &full)?;
                let cut = out.table(&format!("manifold_cut_{}.csv", m.name()), &cut)?;
                branches.push(BranchSummary { method: m.name().into(), ok, status, points: full.rows.len(), file: Some(file) });
                cuts.push((m, cut));
            }
            Err(e) => branches.push(BranchSummary {
                method: m.name().into(),
                ok: false,
                status: format!("error: {e:#}"),
                points: 0,
                file: None,
            }),
        }
    }

    let xp = format!("X{p}");
    for k in (0..n).filter(|&k| k != p) {
        let xk = format!("X{k}");
        let series: Vec<Series> = cuts
            .iter()
            .filter_map(|(m, t)| Series::from_table(t, &xp, &xk, m.name()))
            .collect();
        let spec = PlotSpec {
            title: format!("Manifold cut at Y{p} = 0"),
            x_label: xp.clone(),
            y_label: xk.clone(),
            ..Default::default()
        };
        out.write(&format!("manifold_cut_x{k}.svg"), &svg::render(&spec, &series))?;
    }
    Ok(branches)
}

// ------------------------------------------------------------ modeshape

/// Full-system orbit whose master first harmonic equals `a0`; returns the
/// modal displacements at the two turning points.
fn full_turning_points(cfg: &RunConfig, setup: &Setup, a0: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let p = cfg.master;
    let sys = PolySystem::from_modal(&setup.modal)?;
    let mut opts = backbone_opts(cfg, p);
    opts.max_amp = 1.5 * a0;
    let curve = backbone(&sys, setup.modal.omega[p], 1.0, opts)?;
    let k = curve
        .bracket(a0, Measure::FirstHarmonic)
        .with_context(|| format!("full-system branch never reaches amplitude {a0}"))?;
    let (sig, _) = solve_at_amplitude(&sys, &curve.points[k].signal, p, a0, opts.hbm)?;
    Ok((sig.eval(0.0).0, sig.eval(0.5 * sig.period()).0))
}

fn modeshapes(cfg: &RunConfig, out: &mut Output, a0: f64) -> Result<Vec<BranchSummary>> {
    let setup = Setup::new(cfg)?;
    let p = cfg.master;
    let modal = &setup.modal;
    let mut cols = vec!["dof".to_string()];
    let mut data: Vec<Vec<f64>> = Vec::new();
    let mut branches = Vec::new();
    let mut plotted = Vec::new();
    for &m in &cfg.methods {
        if m == Method::StaticCond {
            branches.push(BranchSummary {
                method: m.name().into(),
                ok: true,
                status: "skipped: no displacement mapping".into(),
                points: 0,
                file: None,
            });
            continue;
        }
        let turning: Result<(DVector<f64>, DVector<f64>)> = (|| {
            if a0 == 0.0 {
                let z = DVector::zeros(modal.n_modes());
                return Ok((z.clone(), z));
            }
            let pair = |map: &dyn ReducedMapping| (map.map(a0, 0.0).0, map.map(-a0, 0.0).0);
            Ok(match m {
                Method::Nf2 => pair(&setup.nf(cfg, NfOrder::Second)?),
                Method::Nf3 => pair(&setup.nf(cfg, NfOrder::Third)?),
                Method::QmMd | Method::QmSmd => pair(&QmMapping::new(&setup.derivatives(cfg, m)?)?),
                Method::StaticCond => unreachable!(),
                Method::Full => full_turning_points(cfg, &setup, a0)?,
            })
        })();
        match turning {
            Ok((xmax, xmin)) => {
                let umax = orth_component(modal, p, &(&modal.phi * xmax))?;
                let umin = orth_component(modal, p, &(&modal.phi * xmin))?;
                let sym = (&umax + &umin) * 0.5;
                for (suffix, v) in [("max", umax), ("min", umin), ("sym", sym)] {
                    cols.push(format!("{}_{suffix}", m.name()));
                    data.push(v.iter().copied().collect());
                }
                plotted.push(m);
                branches.push(BranchSummary {
                    method: m.name().into(),
                    ok: true,
                    status: "completed".into(),
                    points: modal.n_dofs(),
                    file: Some("modeshape.csv".into()),
                });
            }
            Err(e) => branches.push(BranchSummary {
                method: m.name().into(),
                ok: false,
                status: format!("error: {e:#}"),
                points: 0,
                file: None,
            }),
        }
    }
    let mut table = base_table(cfg, "modeshape", cols).with_meta("a0", a0);
    for d in 0..modal.n_dofs() {
        table.push(std::iter::once(d as f64).chain(data.iter().map(|c| c[d])).collect());
    }
    let parsed = out.table("modeshape.csv", &table)?;
    let series: Vec<Series> = plotted
        .iter()
        .filter_map(|m| Series::from_table(&parsed, "dof", &format!("{}_sym", m.name()), m.name()))
        .collect();
    let spec = PlotSpec {
        title: format!("Even part of u orthogonal to mode {p}, a0 = {a0}"),
        x_label: "dof".into(),
        y_label: "u_perp".into(),
        ..Default::default()
    };
    out.write("modeshape.svg", &svg::render(&spec, &series))?;
    Ok(branches)
}
