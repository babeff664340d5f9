use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn cfrelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfrelay"))
        .args(args)
        .env_remove("CFRELAY_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn validate_accepts_bundled_specs() {
    for name in [
        "noiseless_p2p.json",
        "useless_receiver.json",
        "symmetric_two_relay.json",
    ] {
        let o = cfrelay(&["validate", path(&spec(name))]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).starts_with("ok: "));
    }
}

#[test]
fn truncated_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(spec("symmetric_two_relay.json")).unwrap();
    let bad = dir.path().join("truncated.json");
    std::fs::write(&bad, &text[..text.len() / 2]).unwrap();
    let o = cfrelay(&["validate", path(&bad)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn bad_row_sum_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(spec("symmetric_two_relay.json")).unwrap()).unwrap();
    let row = v["channel"][1][0][0][0][0].as_array_mut().unwrap();
    let x = row[0].as_f64().unwrap();
    row[0] = serde_json::json!(x + 0.02);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    let o = cfrelay(&["validate", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("channel[1][0][0]"), "{e}");
    assert!(e.contains("1.02"), "{e}");
}

#[test]
fn region_without_dist_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(spec("noiseless_p2p.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("dist");
    let bare = dir.path().join("bare.json");
    std::fs::write(&bare, serde_json::to_string(&v).unwrap()).unwrap();
    let o = cfrelay(&["region", path(&bare)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cfrelay optimize"), "{}", stderr(&o));
}

#[test]
fn region_cross_check_and_dominance() {
    let sym = spec("symmetric_two_relay.json");
    let o = cfrelay(&["region", path(&sym), "--fme-check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("agreement: true"), "{}", stdout(&o));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.json");
    let o = cfrelay(&["region", path(&sym), "--mode", "both", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("dominance:"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["dominance"]["min_gap"].as_f64().unwrap() >= -1e-10);
    assert_eq!(report["dominance"]["grid"]["consistent"], true);
}

#[test]
fn optimize_noiseless_reaches_one_bit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt.json");
    let o = cfrelay(&[
        "optimize",
        path(&spec("noiseless_p2p.json")),
        "--restarts",
        "2",
        "--iters",
        "300",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rate = v["origin"]["rate"].as_f64().unwrap();
    assert!((rate - 1.0).abs() <= 1e-3, "{rate}");
    let o = cfrelay(&["region", path(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("individual decoding: feasible"));
}

#[test]
fn malformed_sweep_grid_is_a_user_error() {
    for grid in ["y0_noise=0:1", "bogus=0:1:3", "y0_noise=1.5"] {
        let o = cfrelay(&["sweep", path(&spec("symmetric_two_relay.json")), "--param", grid]);
        assert_eq!(o.status.code(), Some(1), "{grid}");
    }
}

#[test]
fn sweep_rows_and_endpoints() {
    let sym = spec("symmetric_two_relay.json");
    let o = cfrelay(&["sweep", path(&sym), "--param", "y0_noise=0:0.5:11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 11);
    let rates: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{rates:?}");

    let o = cfrelay(&["sweep", path(&sym), "--param", "y0_noise=0"]);
    let rows = data_rows(&stdout(&o));
    let region = stdout(&cfrelay(&["region", path(&sym)]));
    assert!(
        region.contains(&format!("rate {:.6}", rows[0][3].parse::<f64>().unwrap())),
        "{region}"
    );

    let o = cfrelay(&["sweep", path(&sym), "--param", "relay_skew=-0.3,0.3"]);
    let rows = data_rows(&stdout(&o));
    let (a, b): (f64, f64) = (rows[0][3].parse().unwrap(), rows[1][3].parse().unwrap());
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn simulate_zero_budgets_never_err() {
    let o = cfrelay(&[
        "simulate",
        path(&spec("symmetric_two_relay.json")),
        "--n",
        "4,8",
        "--trials",
        "50",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for row in data_rows(&stdout(&o)) {
        assert_eq!(row[12], "0");
    }
}

#[test]
fn simulate_seed_is_reproducible_and_read_from_env() {
    let noiseless = spec("noiseless_p2p.json");
    let args = [
        "simulate",
        path(&noiseless),
        "--n",
        "6",
        "--bits",
        "k_r=2",
        "--trials",
        "60",
    ];
    let with_flag = |seed: &str| {
        let mut a = args.to_vec();
        a.extend(["--seed", seed]);
        stdout(&cfrelay(&a))
    };
    assert_eq!(with_flag("9"), with_flag("9"));
    let from_env = Command::new(env!("CARGO_BIN_EXE_cfrelay"))
        .args(args)
        .env("CFRELAY_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(stdout(&from_env), with_flag("9"));
    assert!(stdout(&from_env).contains("# seed: 9"));
}
