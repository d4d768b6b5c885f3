use std::path::Path;
use std::process::{Command, Output};

fn nomocomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nomocomp")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, edits: &[(&str, &str)]) -> String {
    let mut text = stdout(&nomocomp(&["defaults"]));
    for (from, to) in edits {
        assert!(text.contains(from), "default config lacks {from:?}:\n{text}");
        text = text.replacen(from, to, 1);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn defaults_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.toml", &[]);
    let out = nomocomp(&["--config", &path, "defaults"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), stdout(&nomocomp(&["defaults"])));
}

#[test]
fn rates_csv_shape_and_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fig.toml", &[("nodes = 5", "nodes = 10")]);
    let csv = dir.path().join("rates.csv");
    let out = nomocomp(&["--config", &cfg, "--snr-db", "0:0.5:30", "--out", csv.to_str().unwrap(), "rates"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snr_db,rate_lattice,rate_separation,rate_awgn_bound,rate_tdma,rate_kolmogorov"
    );
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 61);
    let signs: Vec<f64> = rows.iter().map(|r| (r[1] - r[2]).signum()).filter(|&s| s != 0.0).collect();
    assert_eq!(signs.windows(2).filter(|w| w[0] != w[1]).count(), 1);
    assert!(rows.last().unwrap()[1] > rows.last().unwrap()[2]);
    // 15 dB lattice rate with N = 10, b0 = 11.
    let at15 = rows.iter().find(|r| r[0] == 15.0).unwrap();
    assert!((at15[1] - 0.174).abs() < 5e-4);
}

#[test]
fn rates_single_zero_db_point() {
    let out = nomocomp(&["--snr-db", "0:1:0", "rates"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("0,0,"), "{row}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn rates_are_byte_deterministic() {
    let a = nomocomp(&["rates"]);
    let b = nomocomp(&["rates"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn b0_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.toml", &[("nodes = 5", "nodes = 10")]);
    let out = nomocomp(&["--config", &cfg, "b0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("function: arithmetic_mean"), "{text}");
    assert!(text.contains("b0: 11\n"), "{text}");
    assert!(text.contains("fraction_bits: 10"), "{text}");

    let loose = write_config(dir.path(), "loose.toml", &[("eps = 0.001", "eps = 0.5")]);
    let text = stdout(&nomocomp(&["--config", &loose, "b0"]));
    let b0: u32 = text.lines().find_map(|l| l.strip_prefix("b0: ")).unwrap().parse().unwrap();
    let sup: f64 = text.lines().find_map(|l| l.strip_prefix("sup_error: ")).unwrap().parse().unwrap();
    assert!(b0 < 11 && sup < 0.5, "{text}");
}

#[test]
fn unknown_function_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &[("\"arithmetic_mean\"", "\"harmonic_mean\"")]);
    let out = nomocomp(&["--config", &cfg, "b0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("harmonic_mean"));
}

#[test]
fn malformed_inputs_exit_with_config_code() {
    assert_eq!(nomocomp(&["--snr-db", "0:2", "rates"]).status.code(), Some(2));
    assert_eq!(nomocomp(&["--config", "/nonexistent/x.toml", "rates"]).status.code(), Some(2));
    assert_eq!(nomocomp(&["--snr-db", "10:1:0", "rates"]).status.code(), Some(2));
    assert_eq!(nomocomp(&["demo-lattice", "--p", "4"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let out = nomocomp(&["--out", "/nonexistent/dir/rates.csv", "rates"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_noiseless_has_no_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "quiet.toml", &[("block_len = 5", "block_len = 5\nnoise_var = 0.0")]);
    let out = nomocomp(&["--config", &cfg, "--trials", "200", "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "snr_db,trials,sum_decode_failures,accuracy_failures,max_ok_error");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], &["inf", "200", "0", "0"]);
    assert!(row[4].parse::<f64>().unwrap() < 1e-3);
}

#[test]
fn simulate_is_reproducible_and_improves_with_snr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &[("nodes = 5", "nodes = 3"), ("block_len = 5", "block_len = 3")]);
    let args = ["--config", cfg.as_str(), "--trials", "400", "--snr-db", "0:15:30", "--seed", "5", "simulate"];
    let a = nomocomp(&args);
    let b = nomocomp(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let failures: Vec<u64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(failures.len(), 3);
    assert!(failures[2] < failures[0], "{text}");
}

#[test]
fn simulate_two_clusters_with_branch_file() {
    let dir = tempfile::tempdir().unwrap();
    let branches = dir.path().join("branches.toml");
    std::fs::write(
        &branches,
        r#"name = "sum_plus_norm"
domain = [0.0, 1.0]

[[branches]]
pre = { op = "identity" }
pre_range = [0.0, 1.0]
post = { op = "identity" }

[[branches]]
pre = { op = "square" }
pre_range = [0.0, 1.0]
post = { op = "chain", steps = [{ op = "affine", scale = 1.0, offset = 1.0 }, { op = "sqrt" }] }
"#,
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "multi.toml",
        &[
            ("nodes = 5", &format!("nodes = 3\nbranches = {:?}", branches.to_str().unwrap())),
            ("block_len = 5", "block_len = 2\nnoise_var = 0.0"),
            ("k = 1", "k = 2"),
            ("clusters = []", "clusters = [[0, 1], [1, 2]]"),
        ],
    );
    let out = nomocomp(&["--config", &cfg, "--trials", "100", "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("inf,100,0,0,"), "{row}");
}

#[test]
fn demo_lattice_lists_small_codebooks() {
    let out = nomocomp(&["demo-lattice", "--p", "3", "--k", "1", "--n", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("codebook (3 words):"), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains(" -> ")).count(), 3);
    assert!(text.contains("decoded sum"));

    let big = stdout(&nomocomp(&["demo-lattice", "--p", "5", "--k", "3", "--n", "4"]));
    assert!(big.contains("5^3 = 125 words, not listed"), "{big}");
}
