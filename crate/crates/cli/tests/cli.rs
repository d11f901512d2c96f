use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const KINDS: [&str; 9] = [
    "triangle",
    "chain_transfer",
    "router_abstract",
    "effective_solve",
    "full_model",
    "full_router",
    "blockade",
    "spectrum",
    "optimize",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chiral-router"))
}

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, config: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--output-dir")
        .arg(dir)
        .arg("--quiet")
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path, stem: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.manifest.json"))).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn list_shows_nine_kinds() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let listed: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with(' '))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(listed, KINDS);
}

#[test]
fn list_of_one_kind_shows_required_keys() {
    let o = bin().args(["list", "full_model"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["geometry.a_um", "geometry.b_um", "geometry.c_um", "field.B_gauss"] {
        assert!(text.lines().any(|l| l.contains(key) && l.contains("required")), "{key}");
    }
}

#[test]
fn unknown_kind_names_valid_kinds() {
    let o = bin().args(["list", "teleport"]).output().unwrap();
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("teleport"));
    for k in KINDS {
        assert!(e.contains(k), "{k} missing from: {e}");
    }
}

#[test]
fn malformed_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "kind = \"full_model\"\n[geometry]\na_nm = 17.0\nb_um = 12.25\nc_um = 9.83\n[field]\nB_gauss = 46.38\n",
    );
    for cmd in ["validate", "run"] {
        let o = bin().arg(cmd).arg(&cfg).arg("--output-dir").arg(dir.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("geometry.a_nm"), "{}", stderr(&o));
    }
}

#[test]
fn wrong_type_and_missing_key_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.toml", "kind = \"spectrum\"\n[chain]\nN = \"many\"\nJ_2piMHz = 1.0\n");
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("chain.N"));
    let cfg = write_config(dir.path(), "m.toml", "kind = \"spectrum\"\n[chain]\nN = 5\n");
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(stderr(&o).contains("chain.J_2piMHz"));
}

#[test]
fn zero_detuning_is_named_as_physics_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.toml",
        "kind = \"effective_solve\"\nmode = \"evaluate\"\n[geometry]\na_um = 17.0\nb_um = 12.25\nc_um = 9.83\n[field]\ndelta_2piMHz = 0.0\n",
    );
    let o = run_in(dir.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("physics") && e.contains("Δ = 0"), "{e}");
}

#[test]
fn every_example_validates() {
    let mut names: Vec<String> = std::fs::read_dir(examples())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".toml"))
        .collect();
    names.sort();
    for fig in 1..=8 {
        assert!(names.contains(&format!("fig{fig}.toml")), "fig{fig}.toml missing");
    }
    for n in &names {
        let o = bin().arg("validate").arg(examples().join(n)).output().unwrap();
        assert!(o.status.success(), "{n}: {}", stderr(&o));
    }
}

#[test]
fn triangle_example_circulates_counter_clockwise() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &examples().join("fig1.toml"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("fig1_triangle.csv"));
    assert_eq!(
        header,
        [
            "t_us", "site_1_pop", "site_2_pop", "site_3_pop", "norm", "re_amp_1", "re_amp_2", "re_amp_3", "im_amp_1",
            "im_amp_2", "im_amp_3"
        ]
    );
    let argmax = |col: usize, rows: &[Vec<f64>]| {
        rows.iter()
            .enumerate()
            .max_by(|a, b| a.1[col].total_cmp(&b.1[col]))
            .map(|(k, _)| k)
            .unwrap()
    };
    // Within the first period site 2 peaks before site 3, and each peak is near 1.
    let period = manifest(dir.path(), "fig1_triangle")["results"]["period_estimate_us"].as_f64().unwrap();
    let first: Vec<Vec<f64>> = rows.iter().filter(|r| r[0] <= period).cloned().collect();
    let (k2, k3) = (argmax(2, &first), argmax(3, &first));
    assert!(k2 < k3);
    assert!(first[k2][2] > 0.99 && first[k3][3] > 0.99);
    for r in &rows {
        assert!((r[4] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for name in ["fig1.toml", "fig5.toml", "fig8.toml"] {
        let cfg = examples().join(name);
        assert!(run_in(a.path(), &cfg, &[]).status.success());
        assert!(run_in(b.path(), &cfg, &[]).status.success());
    }
    let mut files: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert!(files.len() >= 7);
    for f in files {
        let x = std::fs::read(a.path().join(&f)).unwrap();
        let y = std::fs::read(b.path().join(&f)).unwrap();
        assert_eq!(x, y, "{f:?} differs");
    }
}

#[test]
fn chain_of_31_transfers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &examples().join("chain_n31.toml"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("chain_n31.csv"));
    let r = header.iter().position(|h| h == "site_r_pop").unwrap();
    let last = rows.last().unwrap();
    assert!(last[r] >= 0.95, "P_T = {}", last[r]);
    let m = manifest(dir.path(), "chain_n31");
    assert_eq!(m["kind"], "chain_transfer");
    assert_eq!(m["parameters"]["n"], 31);
    assert!((m["results"]["p_t"].as_f64().unwrap() - last[r]).abs() < 1e-11);
}

#[test]
fn manifest_records_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", "kind = \"spectrum\"\n[chain]\nN = 3\nJ_2piMHz = 1.0\n");
    assert!(run_in(dir.path(), &cfg, &[]).status.success());
    let m = manifest(dir.path(), "s");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["parameters"]["kind"], "spectrum");
    assert_eq!(m["outputs"][0], "s.csv");
    let (_, rows) = read_csv(&dir.path().join("s.csv"));
    let s2 = 2f64.sqrt();
    // Columns: index, nn formula, nn diagonalisation, r^-3 formula, r^-3 diagonalisation.
    let want = [(-s2, -s2), (0.0, -0.25), (s2, s2)];
    // Twelve significant digits in the file bound the comparison.
    for (row, (nn, r3)) in rows.iter().zip(want) {
        assert!((row[1] - nn).abs() < 1e-11);
        assert!((row[2] - nn).abs() < 1e-11);
        assert!((row[3] - r3).abs() < 1e-11);
    }
}

#[test]
fn optimizer_restarts_follow_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "o.toml",
        "kind = \"optimize\"\n[species]\nprofile = \"benchmark\"\n[atoms]\nassignment = \"stretched\"\n\
         [geometry]\na_um = 17.0\n[initial]\nb_um = 12.25\nc_um = 9.83\nB_gauss = 46.38\n\
         [optimizer]\nmax_evaluations = 6\nrestarts = 1\n",
    );
    let out = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let o = run_in(&d, &cfg, &["--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(d.join("o.csv")).unwrap(), manifest(&d, "o"))
    };
    let (a, ma) = out("7", "a");
    let (b, _) = out("7", "b");
    let (c, mc) = out("8", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(ma["seed"], 7);
    assert_eq!(ma["results"]["starts"][0]["start"], mc["results"]["starts"][0]["start"]);
    assert_ne!(ma["results"]["starts"][1]["start"], mc["results"]["starts"][1]["start"]);
}
