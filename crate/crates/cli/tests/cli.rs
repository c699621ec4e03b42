use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use spectra::PadicScalar;
use spectra_cli::datum::{emit_loaded, equivalent_loaded, load_file, load_str, LoadErrorKind, Loaded};
use spectra_cli::WORKED_EXAMPLE;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn scratch(name: &str, doc: &Value) -> PathBuf {
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

fn spectra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectra")).args(args).env("SPECTRA_SEED", "3").output().unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn constant_term(v: &Value, p: u64) -> PadicScalar {
    match v.get("1") {
        Some(Value::String(s)) => PadicScalar::parse_canonical(p, s).unwrap(),
        _ => PadicScalar::zero(p),
    }
}

fn diagonal_powers(p: u64, n: usize) -> Value {
    let entries: Vec<String> = (0..n).map(|j| format!("p^{j}*1")).collect();
    json!({
        "p": p, "relative_precision": 24, "x_degree_cap": n,
        "base": { "kind": "field" },
        "module": { "size": n },
        "phi": { "kind": "diagonal", "entries": entries },
    })
}

#[test]
fn bundled_example_loads() {
    let loaded = load_str(WORKED_EXAMPLE, None).unwrap();
    let Loaded::Affinoid(s) = loaded else { panic!("expected an affinoid base") };
    assert_eq!(s.datum.phi.size(), 2);
    assert_eq!(s.datum.hecke.len(), 1);
    assert_eq!(s.datum.like().chart().vars, vec!["T1", "T2"]);
}

#[test]
fn charpoly_of_the_worked_example() {
    let o = spectra(&["charpoly", data("unipotent.json").to_str().unwrap(), "--degree", "4"]);
    assert!(o.status.success());
    let doc = json_out(&o);
    let cs = doc["payload"]["coefficients"].as_array().unwrap();
    let want = [1, -2, 1, 0, 0];
    assert_eq!(cs.len(), want.len());
    for (c, w) in cs.iter().zip(want) {
        assert!(constant_term(c, 5).agrees_with(&PadicScalar::from_int(5, w, 20)), "{c} vs {w}");
        assert!(c.as_object().unwrap().keys().all(|k| k == "1"));
    }
}

#[test]
fn polygon_of_diagonal_powers() {
    let path = scratch("powers16.json", &diagonal_powers(2, 16));
    let o = spectra(&["polygon", path.to_str().unwrap()]);
    assert!(o.status.success());
    let doc = json_out(&o);
    let vs = doc["payload"]["vertices"].as_array().unwrap();
    assert_eq!(vs.len(), 17);
    for (n, v) in vs.iter().enumerate() {
        assert_eq!(v["x"], json!(n));
        assert_eq!(v["y"], json!(format!("{}/1", n * (n.max(1) - 1) / 2)));
    }

    let o = spectra(&["polygon", path.to_str().unwrap(), "--format", "tsv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "slope\tlength\tx_start");
    assert_eq!(lines[1], "0/1\t1\t0");
    assert_eq!(lines[16], "15/1\t1\t15");
}

#[test]
fn eigen_table_on_the_diagonal_datum() {
    let path = data("diagonal.json");
    let o = spectra(&["eigen", path.to_str().unwrap(), "--slope", "1", "--format", "tsv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);

    let doc = json_out(&spectra(&["eigen", path.to_str().unwrap(), "--slope", "1"]));
    let systems = doc["payload"]["fibers"][0]["systems"].as_array().unwrap();
    assert_eq!(systems.len(), 2);
    assert_eq!(systems[0]["slope"], json!("0/1"));
    assert_eq!(systems[1]["slope"], json!("1/1"));
    let t = &systems[1]["fingerprints"]["t"];
    let root = PadicScalar::parse_canonical(5, t[0].as_str().unwrap()).unwrap().neg();
    assert!(root.agrees_with(&PadicScalar::from_int(5, 3, 20)));
}

#[test]
fn worked_example_is_non_reduced() {
    let doc = json_out(&spectra(&["eigen", data("unipotent.json").to_str().unwrap(), "--slope", "0"]));
    let p = &doc["payload"];
    assert_eq!(p["rank"], json!(2));
    assert_eq!(p["algebra"]["has_nilpotents"], json!(true));
    let fibers = p["fibers"].as_array().unwrap();
    assert_eq!(fibers[0]["systems"][0]["reduced"], json!(true));
    assert_eq!(fibers[0]["base_change"]["nilpotency_index"], json!(2));
    assert_eq!(fibers[1]["systems"][0]["reduced"], json!(false));
    assert_eq!(p["slope_datum"]["valid"], json!(true));
}

#[test]
fn non_commuting_hecke_operators_are_rejected() {
    let doc = json!({
        "p": 3, "relative_precision": 10, "x_degree_cap": 2,
        "base": { "kind": "field" },
        "module": { "size": 2 },
        "phi": { "kind": "diagonal", "entries": [1, 3] },
        "hecke": {
            "t1": { "kind": "dense", "rows": [[0, 1], [0, 0]] },
            "t2": { "kind": "diagonal", "entries": [1, 2] }
        }
    });
    let path = scratch("noncommuting.json", &doc);
    let o = spectra(&["eigen", path.to_str().unwrap(), "--slope", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let report = json_out(&o);
    assert_eq!(report["error"]["kind"], json!("Validation"));
    let msg = report["error"]["message"].as_str().unwrap();
    assert!(msg.contains("t1") && msg.contains("t2"), "{msg}");

    let err = load_str(&doc.to_string(), None).unwrap_err();
    assert_eq!(err.kind, LoadErrorKind::Validation);
}

#[test]
fn schema_errors_carry_pointers() {
    let mut doc = diagonal_powers(3, 3);
    doc["phi"]["entries"][1] = json!("x7");
    let err = load_str(&doc.to_string(), None).unwrap_err();
    assert_eq!(err.kind, LoadErrorKind::Schema);
    assert_eq!(err.violations[0].0, "/phi/entries/1");
    assert_eq!(load_str("{", None).unwrap_err().kind, LoadErrorKind::Parse);
}

#[test]
fn usage_errors_exit_with_two() {
    let path = data("diagonal.json");
    let path = path.to_str().unwrap();
    assert_eq!(spectra(&["factor", path]).status.code(), Some(2));
    assert_eq!(spectra(&["charpoly", path]).status.code(), Some(2));
    assert_eq!(spectra(&["charpoly", path, "--degree", "2", "--format", "tsv"]).status.code(), Some(2));
    assert_eq!(spectra(&["nonsense", path]).status.code(), Some(2));
}

#[test]
fn computation_errors_still_report() {
    // the slope <= 0 part jumps from degree 1 to 0 at w = 0
    let doc = json!({
        "p": 3, "relative_precision": 12, "x_degree_cap": 1,
        "base": { "kind": "affinoid", "var": "w", "degree_bound": 2 },
        "module": { "size": 1 },
        "phi": { "kind": "dense", "rows": [[[0, 1]]] },
    });
    let path = scratch("jump.json", &doc);
    let o = spectra(&["factor", path.to_str().unwrap(), "--slope", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let report = json_out(&o);
    assert_eq!(report["status"], json!("error"));
    assert!(report["error"]["kind"].is_string());
}

#[test]
fn reports_are_byte_stable() {
    let path = data("unipotent.json");
    for args in [vec!["eigen", "--slope", "0"], vec!["riesz", "--slope", "0"], vec!["verify", "--slope", "0"]] {
        let mut full = vec![args[0], path.to_str().unwrap()];
        full.extend(&args[1..]);
        let a = spectra(&full);
        let b = spectra(&full);
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stdout));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn emitted_data_load_back() {
    for text in [WORKED_EXAMPLE.to_string(), std::fs::read_to_string(data("diagonal.json")).unwrap(), diagonal_powers(2, 6).to_string()] {
        let a = load_str(&text, None).unwrap();
        let b = load_file(&emit_loaded(&a), None).unwrap();
        assert!(equivalent_loaded(&a, &b));
        assert_eq!(emit_loaded(&a), emit_loaded(&b));
    }
}

#[test]
fn banded_and_univariate_entries() {
    let doc = json!({
        "p": 3, "relative_precision": 12, "x_degree_cap": 3,
        "base": { "kind": "affinoid", "var": "w", "degree_bound": 2 },
        "module": { "size": 3, "decay": { "kind": "explicit", "head": [0, 0, 2], "rate": 1 } },
        "phi": { "kind": "banded", "bands": { "0": [1, [0, 3], 9], "1": [["0", "1"], 0] } },
    });
    let Loaded::Affinoid(s) = load_str(&doc.to_string(), None).unwrap() else { panic!("affinoid") };
    let m = s.datum.phi.matrix();
    assert_eq!(m[(0, 1)].to_string(), spectra::AffinoidElement::variable(s.datum.like().chart(), "w").unwrap().to_string());
    assert!(m[(1, 0)].is_zero());
    let path = scratch("banded.json", &doc);
    let o = spectra(&["charpoly", path.to_str().unwrap(), "--degree", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json_out(&o)["payload"]["tail"], json!("columns"));

    let mut finite = doc.clone();
    finite["module"]["decay"] = json!({ "kind": "finite" });
    let path = scratch("banded_finite.json", &finite);
    let o = spectra(&["verify", path.to_str().unwrap(), "--slope", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_reports_every_module() {
    let doc = json_out(&spectra(&["verify", data("unipotent.json").to_str().unwrap(), "--slope", "0"]));
    let props = doc["payload"]["properties"].as_array().unwrap();
    for module in ["operators", "fredholm", "newton", "riesz", "eigen", "cli"] {
        assert!(props.iter().any(|p| p["module"] == json!(module)), "{module}");
    }
    assert!(props.iter().all(|p| p["status"] != json!("fail")));
}
