mod common;

use std::path::Path;
use std::process::{Command, Output};

use rgnn::graph::parse_edge_list;

fn rgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgnn")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn base_config(out: &str) -> String {
    format!(
        "manifold.model = poincare\nmanifold.curvature = -1\nmanifold.dim = 3\nmodel.depth = 6\n\
         model.activation = relu\ngraph.generator = path\ngraph.n = 7\nprotocol.seed = 3\noutput.dir = {out}\n"
    )
}

#[test]
fn generate_writes_expected_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.txt");
    let o = rgnn(&["generate", "--kind", "binary_tree", "--depth", "2", "--out", tree.to_str().unwrap()]);
    assert!(o.status.success());
    let g = parse_edge_list(&std::fs::read_to_string(&tree).unwrap()).unwrap();
    assert_eq!((g.node_count(), g.edge_count()), (7, 6));

    let cyc = dir.path().join("cycle.txt");
    assert!(rgnn(&["generate", "--kind", "cycle", "--n", "4", "--out", cyc.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(&cyc).unwrap();
    assert_eq!(text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count(), 4);

    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for p in [&a, &b] {
        let o = rgnn(&["generate", "--kind", "random_tree", "--n", "30", "--seed", "5", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = rgnn(&["generate", "--kind", "binary_tree", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hyperbolicity_reports_delta() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.txt");
    rgnn(&["generate", "--kind", "binary_tree", "--depth", "3", "--out", tree.to_str().unwrap()]);
    let o = rgnn(&["hyperbolicity", tree.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["delta"], 0.0);
    assert_eq!(v["n"], 15);

    let c6 = dir.path().join("c6.txt");
    rgnn(&["generate", "--kind", "cycle", "--n", "6", "--out", c6.to_str().unwrap()]);
    let json = dir.path().join("c6.json");
    let o = rgnn(&["hyperbolicity", c6.to_str().unwrap(), "--out", json.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let g = parse_edge_list(&std::fs::read_to_string(&c6).unwrap()).unwrap();
    let oracle = common::gromov_product_delta(&g);
    assert_eq!(v["delta"].as_f64().unwrap(), oracle);
    assert_eq!(std::fs::read(&json).unwrap(), o.stdout);

    let split = dir.path().join("split.txt");
    std::fs::write(&split, "0 1\n2 3\n").unwrap();
    assert!(!rgnn(&["hyperbolicity", split.to_str().unwrap()]).status.success());
}

#[test]
fn sensitivity_on_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "run.cfg", &base_config(out.to_str().unwrap()));
    let o = rgnn(&["sensitivity", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sensitivity.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,i,j,spectral_norm,frobenius_norm");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,0,6,"));
    assert!(lines[2].starts_with("summary,,,"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sensitivity.json")).unwrap()).unwrap();
    assert_eq!(v["pairs"], 1);
    assert_eq!(v["distance"], 6);
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let body = base_config("out").replace("model.activation = relu\n", "");
    let cfg = write_config(dir.path(), "missing.cfg", &body);
    let o = rgnn(&["sensitivity", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.activation"));

    let cfg = write_config(dir.path(), "d.cfg", &(base_config("out") + "protocol.distance = 3\n"));
    assert_eq!(rgnn(&["sensitivity", &cfg]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "u.cfg", &(base_config("out") + "model.dropout = 0.5\n"));
    let o = rgnn(&["train", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.dropout"));
}

#[test]
fn verify_bounds_and_recheck() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = base_config(out.to_str().unwrap()).replace("model.depth = 6", "model.depth = 3") + "protocol.ell = 2\n";
    let cfg = write_config(dir.path(), "vb.cfg", &body);
    let o = rgnn(&["verify-bounds", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["violations"], 0);
    let csv_path = out.join("bounds.csv");
    assert!(rgnn(&["verify-bounds", "--recheck", csv_path.to_str().unwrap()]).status.success());

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines: Vec<String> = csv.lines().map(str::to_owned).collect();
    let mut fields: Vec<String> = lines[1].split(',').map(str::to_owned).collect();
    fields[3] = format!("{}", fields[4].parse::<f64>().unwrap() * 2.0 + 1.0);
    lines[1] = fields.join(",");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    assert_eq!(rgnn(&["verify-bounds", "--recheck", bad.to_str().unwrap()]).status.code(), Some(1));

    let too_deep = write_config(dir.path(), "deep.cfg", &body.replace("protocol.ell = 2", "protocol.ell = 4"));
    assert_eq!(rgnn(&["verify-bounds", &too_deep]).status.code(), Some(2));
}

#[test]
fn train_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = base_config(out.to_str().unwrap()) + "train.epochs = 1\n";
    let cfg = write_config(dir.path(), "t.cfg", &body);
    let o = rgnn(&["train", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("train.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,loss,val_auc,sens_avg,sens_min,sens_max");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,"));
    assert_eq!(lines[1].split(',').count(), 6);

    let diverge = write_config(
        dir.path(),
        "big.cfg",
        &(base_config(out.to_str().unwrap())
            .replace("model.depth = 6", "model.depth = 1")
            .replace("manifold.model = poincare\nmanifold.curvature = -1", "manifold.model = euclidean")
            .replace("relu", "identity")
            + "train.learning_rate = 1e300\ntrain.epochs = 5\n"),
    );
    assert_eq!(rgnn(&["train", &diverge]).status.code(), Some(3));
}

#[test]
fn beta_table_and_schema() {
    let o = rgnn(&["beta-table", "--k-lower", "-1,0", "--k-upper", "-1,1", "--r-exp", "1", "--r-log", "0.5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k_lower,k_upper,r_exp,r_log,beta");
    assert_eq!(lines.len(), 5);
    let first: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((first - 1f64.sinh()).abs() < 1e-10);
    assert!(lines[3].ends_with("invalid"));

    let o = rgnn(&["--schema"]);
    assert!(o.status.success());
    let schema = String::from_utf8(o.stdout).unwrap();
    for header in ["epoch,i,j,spectral_norm,frobenius_norm", "i,j,ell,empirical,bound,slack", "epoch,loss,val_auc"] {
        assert!(schema.contains(header));
    }
    assert_eq!(rgnn(&[]).status.code(), Some(2));
}
