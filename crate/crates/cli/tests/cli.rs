use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use romlab_core::models::{save_model, shell_model, ShellParams};
use serde_json::Value;

fn romlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_romlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// Column header and numeric rows of a CSV written by the tool.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# romlab-csv schema=1\n"), "{}", path.display());
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn ratio_sweep_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["gamma", "--ratios", "--rho", "0.5:12:0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&dir.path().join("c_ratios.csv"));
    assert_eq!(rows.len(), 1151);
    let r10 = rows.iter().find(|r| (r[0] - 10.0).abs() < 1e-9).unwrap();
    let r2: f64 = 100.0;
    assert!((r10[col(&h, "md")] - (1.0 + 4.0 / 3.0 * (r2 - 0.75) / (r2 - 1.0).powi(2))).abs() < 1e-14);
    assert!((r10[col(&h, "smd")] - (1.0 + 4.0 / (3.0 * r2))).abs() < 1e-14);
    assert!((r10[col(&h, "nf")] - (1.0 + 4.0 / (3.0 * (r2 - 4.0)))).abs() < 1e-14);
    let svg = fs::read_to_string(dir.path().join("c_ratios.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn degenerate_sweep_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["gamma", "--model", "flat", "--rho", "3:3"]);
    assert!(o.status.success());
    let (h, rows) = read_csv(&dir.path().join("gamma.csv"));
    assert_eq!(rows.len(), 1);
    assert!(h.contains(&"gamma_nf2".to_string()) && h.contains(&"pole_qm-md".to_string()));
    assert!(!h.iter().any(|c| c.contains("full")));
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["backbone", "--model", "shell", "--rho", "2.5", "--max-amp", "0.2"];
    assert!(romlab(a.path(), &args).status.success());
    assert!(romlab(b.path(), &args).status.success());
    for f in ["backbone_full.csv", "backbone_nf2.csv", "backbone_qm-smd.csv", "backbone.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn zero_amplitude_cap_gives_linear_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["backbone", "--model", "shell", "--rho", "2.5", "--max-amp", "0"]);
    assert!(o.status.success());
    for m in ["full", "nf2", "nf3", "qm-md", "qm-smd", "static-cond"] {
        let (h, rows) = read_csv(&dir.path().join(format!("backbone_{m}.csv")));
        assert_eq!(rows.len(), 1, "{m}");
        assert_eq!(rows[0][col(&h, "omega")], 1.0);
        assert_eq!(rows[0][col(&h, "x0_h1")], 0.0);
    }
}

#[test]
fn reduced_backbones_follow_full_system_on_flat_beam() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["backbone", "--model", "flat", "--rho", "10", "--method", "full,nf2,qm-smd"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path());
    let branches = s["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 3);
    assert!(branches.iter().all(|b| b["ok"] == true));
    let (h, full) = read_csv(&dir.path().join("backbone_full.csv"));
    let (_, nf) = read_csv(&dir.path().join("backbone_nf2.csv"));
    let (w, a) = (col(&h, "omega"), col(&h, "x0_h1"));
    // Frequency at amplitude 0.2 by linear interpolation.
    let at = |rows: &[Vec<f64>]| {
        let k = rows.iter().position(|r| r[a] >= 0.2).unwrap();
        let t = (0.2 - rows[k - 1][a]) / (rows[k][a] - rows[k - 1][a]);
        rows[k - 1][w] + t * (rows[k][w] - rows[k - 1][w])
    };
    assert!((at(&full) - at(&nf)).abs() < 2e-3, "{} vs {}", at(&full), at(&nf));
}

#[test]
fn file_model_reproduces_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shell.json");
    save_model(&shell_model(&ShellParams::from_ratio(2.5)).unwrap(), &path).unwrap();
    let model_arg = format!("file:{}", path.display());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["backbone", "--method", "full,qm-md", "--max-amp", "0.2"];
    let o = romlab(&a, &[&args[..], &["--model", &model_arg]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(romlab(&b, &[&args[..], &["--model", "shell", "--rho", "2.5"]].concat()).status.success());
    for m in ["full", "qm-md"] {
        let (h, ra) = read_csv(&a.join(format!("backbone_{m}.csv")));
        let (_, rb) = read_csv(&b.join(format!("backbone_{m}.csv")));
        assert_eq!(ra.len(), rb.len(), "{m}");
        let (w, amp) = (col(&h, "omega"), col(&h, "amplitude"));
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x[w] - y[w]).abs() < 1e-8 && (x[amp] - y[amp]).abs() < 1e-8, "{m}");
        }
    }
}

#[test]
fn resonant_normal_form_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["backbone", "--model", "shell", "--rho", "2.0", "--method", "full,nf2"]);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(dir.path());
    let nf = &s["branches"][1];
    assert_eq!(nf["method"], "nf2");
    assert_eq!(nf["ok"], false);
    assert!(nf["status"].as_str().unwrap().contains("resonance"), "{}", nf["status"]);
    assert_eq!(s["branches"][0]["ok"], true);
}

#[test]
fn modeshape_has_no_master_content() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["modeshape", "--model", "flat", "--rho", "2.5", "--a0", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&dir.path().join("modeshape.csv"));
    assert_eq!(rows.len(), 2);
    for c in 1..h.len() {
        assert!(rows[0][c].abs() < 1e-12, "{}", h[c]);
    }
    // Flat beam: the slave displacement is even in the amplitude.
    let nf = col(&h, "nf2_max");
    assert_eq!(rows[1][nf], rows[1][col(&h, "nf2_min")]);
    let full = col(&h, "full_sym");
    assert!((rows[1][full] - rows[1][col(&h, "nf3_sym")]).abs() < 0.05 * rows[1][full].abs());
    let s = summary(dir.path());
    let sc = s["branches"].as_array().unwrap().iter().find(|b| b["method"] == "static-cond").unwrap();
    assert!(sc["status"].as_str().unwrap().starts_with("skipped"));
}

#[test]
fn modeshape_at_zero_amplitude_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["modeshape", "--model", "shell", "--rho", "10", "--a0", "0", "--method", "qm-md"]);
    assert!(o.status.success());
    let (_, rows) = read_csv(&dir.path().join("modeshape.csv"));
    assert!(rows.iter().all(|r| r[1..].iter().all(|&v| v == 0.0)));
}

#[test]
fn manifold_cut_shows_static_derivative_fold() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["manifold", "--model", "shell", "--rho", "10", "--method", "qm-smd,full", "--grid", "301"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, cut) = read_csv(&dir.path().join("manifold_cut_qm-smd.csv"));
    let x0 = col(&h, "X0");
    let peak = cut.iter().map(|r| r[x0]).fold(f64::MIN, f64::max);
    assert!((peak - 1.0 / 6.0).abs() < 1e-4, "{peak}");
    let (h, grid) = read_csv(&dir.path().join("manifold_qm-smd.csv"));
    assert_eq!(h[..2], ["R".to_string(), "S".to_string()]);
    assert_eq!(grid.len(), 301 * 301);
    let (h, orbits) = read_csv(&dir.path().join("manifold_full.csv"));
    assert_eq!(h[..2], ["omega".to_string(), "phase".to_string()]);
    assert_eq!(orbits.len() % 64, 0);
    assert!(dir.path().join("manifold_cut_x1.svg").exists());
}

#[test]
fn slenderness_sets_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let o = romlab(dir.path(), &["gamma", "--sigma", "0.195", "--method", "nf2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&dir.path().join("gamma.csv"));
    assert_eq!(rows.len(), 1);
    assert!((rows[0][0] * 0.195 - 1.95).abs() < 0.01, "{}", rows[0][0]);
}

#[test]
fn bad_arguments_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    for (args, needle) in [
        (&["backbone", "--method", "md"][..], "unknown method"),
        (&["backbone", "--rho", "1:3"][..], "single --rho"),
        (&["gamma", "--model", "beam"][..], "unknown model"),
        (&["gamma", "--rho", "3:1"][..], "0 < a <= b"),
        (&["gamma", "--sigma", "0.1", "--model", "shell"][..], "flat model only"),
        (&["backbone", "--n-harm", "0"][..], "--n-harm"),
        (&["backbone", "--model", "file:/nonexistent/m.json"][..], "loading"),
        (&["backbone", "--master", "5"][..], "out of range"),
    ] {
        let o = romlab(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}
