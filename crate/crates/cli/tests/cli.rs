use std::io::Write;
use std::process::{Command, Output, Stdio};

use becbell::node::{build_linear_model, derive_node};
use becbell_cli::config::{parse, CouplingKey};
use becbell_cli::csv::extract_config;

fn becbell(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_becbell"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert_eq!(o.status.code(), Some(0), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn derive_reports_the_default_node() {
    let o = becbell(&["derive"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let kappa: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("kappa_per_s = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((kappa / 8.19e6 - 1.0).abs() < 1e-3, "{kappa}");
    assert_eq!(text.matches("stable = true").count(), 2);
}

#[test]
fn derive_exits_2_past_the_instability_threshold() {
    let unstable = |g: f64| {
        let cfg = parse(&format!(
            "[nodes.both]\nbec_damping_over_kappa = 0.0\ncoupling_over_omega_b0 = {g:?}\n"
        ))
        .unwrap();
        assert_eq!(cfg.node_a.coupling, CouplingKey::OverOmegaB0(g));
        !build_linear_model(&derive_node(&cfg.node_a.to_params()).unwrap()).is_stable()
    };
    let (mut lo, mut hi) = (1.0, 1000.0);
    assert!(!unstable(lo) && unstable(hi));
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if unstable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let config = |g: f64| {
        format!("[nodes.both]\nbec_damping_over_kappa = 0.0\ncoupling_over_omega_b0 = {g:?}\n")
    };
    let above = becbell(&["derive", "-"], Some(&config(hi * 1.01)));
    assert_eq!(above.status.code(), Some(2), "{}", stdout(&above));
    assert!(stdout(&above).contains("stable = false"));
    let below = becbell(&["derive", "-"], Some(&config(lo * 0.99)));
    assert_eq!(below.status.code(), Some(0));

    // Evaluating a point there is a physics error too.
    let point = becbell(&["point", "-"], Some(&config(hi * 1.01)));
    assert_eq!(point.status.code(), Some(2));
    assert!(stderr(&point).contains("unstable"));
}

#[test]
fn config_errors_exit_1_with_a_line() {
    let o = becbell(
        &["derive", "-"],
        Some("[nodes.both]\nfinesse = 1e5\n\nlength_mm = 1.0\n"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let o = becbell(&["point", "-"], Some("[detection]\nefficiency_1 = 0.0\n"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = becbell(&["point", "-"], Some("[nodes.both\n"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));

    let o = becbell(&["derive", "/nonexistent/config.toml"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(becbell(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(
        becbell(&["sweep", "--preset", "fig9"], None).status.code(),
        Some(1)
    );
    assert_eq!(becbell(&["sweep"], None).status.code(), Some(1));
    assert_eq!(
        becbell(&["sweep", "--preset", "fig3", "--workers", "0"], None)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        becbell(&["point", "--tol", "-1"], None).status.code(),
        Some(1)
    );
    assert_eq!(becbell(&["--help"], None).status.code(), Some(0));
    assert_eq!(becbell(&["--version"], None).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_1() {
    let o = becbell(
        &["point", "-"],
        Some("[filters.a]\ncenter_over_omega_b = 0.0\n"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("domain"), "{}", stderr(&o));
}

#[test]
fn unconverged_quadrature_exits_3() {
    let o = becbell(&["point", "--tol", "1e-300"], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn default_point_has_discord() {
    let v = json(&becbell(&["point"], None));
    assert!(v["discord"].as_f64().unwrap() > 0.0);
    assert!(v["eta_minus"].as_f64().unwrap() > 0.0);
    assert!(v["invariants"]["s1"].as_f64().unwrap() >= 1.0);
}

#[test]
fn uncoupled_point_has_no_correlations() {
    let v = json(&becbell(
        &["point", "-"],
        Some("[nodes.both]\ncoupling_over_omega_b0 = 0.0\n"),
    ));
    assert!(v["discord"].as_f64().unwrap().abs() < 1e-10, "{v}");
    assert_eq!(v["log_negativity"].as_f64().unwrap(), 0.0);
}

#[test]
fn blind_detectors_give_no_discord() {
    let v = json(&becbell(
        &["point", "-"],
        Some("[detection]\nefficiency_1 = 1e-6\nefficiency_2 = 1e-6\n"),
    ));
    assert!(v["discord"].as_f64().unwrap() < 1e-6, "{v}");
}

#[test]
fn sweep_csv_echo_round_trips() {
    let text = "[nodes.a]\ntemperature_uk = 0.2\n\n[sweep]\naxes = [\n  { knob = \"transmissivity\", min = 0.2, max = 0.8, count = 4 },\n]\noutputs = [\"discord\"]\n";
    let o = becbell(&["sweep", "-"], Some(text));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let resolved = parse(text).unwrap();
    let echoed = extract_config(&csv).unwrap();
    assert_eq!(parse(&echoed).unwrap(), resolved);

    // Feeding the echo back in reproduces the file byte for byte.
    let again = becbell(&["sweep", "-"], Some(&echoed));
    assert_eq!(stdout(&again), csv);

    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "transmissivity,discord,stable,error_code");
    assert_eq!(body.len(), 5);
    assert!(body[1].starts_with("0.2,"));
    assert!(body[4].starts_with("0.8,"));
}

#[test]
fn sweep_writes_preset_file_and_keeps_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested");
    let o = becbell(
        &[
            "sweep",
            "--preset",
            "fig4",
            "--resolution",
            "5",
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "2",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("fig4.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 25);
    // A filter centered at zero has no ε-defined bandwidth.
    for r in &rows {
        let zero = r[0] == "0.0" || r[1] == "0.0";
        assert_eq!(r[5] == "domain", zero, "{r:?}");
        assert_eq!(r[2].is_empty(), zero);
        assert_eq!(r[4], "true");
    }
}

#[test]
fn validate_passes_and_catches_a_flipped_kernel() {
    let o = becbell(&["validate"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 5);

    let o = becbell(&["validate", "--tighten", "100"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("quadrature tolerance 1e-10"));

    let o = becbell(&["validate", "--inject-k-sign-flip"], None);
    assert_eq!(o.status.code(), Some(3));
    let fail = stdout(&o)
        .lines()
        .find(|l| l.starts_with("FAIL"))
        .unwrap()
        .to_string();
    assert!(
        fail.contains("bell_oracle") && fail.contains("entry ("),
        "{fail}"
    );
    assert_eq!(stdout(&o).matches("PASS").count(), 4);
}
