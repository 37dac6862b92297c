use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn packlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_packlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = packlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    packlab(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    v.sort();
    v
}

const VB: &str = r#"{algorithm = "visscher_bolsterli", n = 1000, k_drops = 1}"#;

#[test]
fn generate_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let args = ["generate", "--generator", VB, "--seed", "11", "--ensemble-size", "3", "--output-dir", s(&a)];
    ok(&args);
    let first = files(&a);
    assert_eq!(first.len(), 5);
    std::fs::remove_dir_all(&a).unwrap();
    ok(&args);
    assert_eq!(files(&a), first);

    // A different directory changes only the recorded arguments.
    let b = dir.path().join("b");
    ok(&["generate", "--generator", VB, "--seed", "11", "--ensemble-size", "3", "--output-dir", s(&b)]);
    for ((na, xa), (nb, xb)) in first.iter().zip(files(&b)) {
        assert_eq!(na, &nb);
        if nb != Path::new("provenance.json") {
            assert_eq!(xa, &xb, "{nb:?}");
        }
    }
    let c = dir.path().join("c");
    ok(&["generate", "--generator", VB, "--seed", "12", "--output-dir", s(&c)]);
    assert_ne!(
        std::fs::read(c.join("packing_0000.tsv")).unwrap(),
        std::fs::read(a.join("packing_0000.tsv")).unwrap()
    );
}

#[test]
fn provenance_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["generate", "--generator", VB, "--seed", "5", "--ensemble-size", "2", "--output-dir", s(&a)]);
    let rec: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(rec["command"], "generate");
    assert_eq!(rec["master_seed"], 5);
    assert_eq!(rec["seeds"].as_array().unwrap().len(), 2);
    assert!(rec["software"].as_str().unwrap().starts_with("packlab "));

    // The record alone is enough to rerun.
    let spec: packlab_core::GeneratorSpec = serde_json::from_value(rec["spec"].clone()).unwrap();
    let b = dir.path().join("b");
    let mut config = packlab_core::RunConfig::new(spec);
    config.seed = rec["master_seed"].as_u64().unwrap();
    config.ensemble_size = rec["seeds"].as_array().unwrap().len();
    config.output_dir = b.clone();
    let cfg = dir.path().join("again.toml");
    std::fs::write(&cfg, config.to_toml()).unwrap();
    ok(&["generate", "--config", s(&cfg)]);
    for name in ["packing_0000.tsv", "packing_0001.tsv", "summary.tsv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out_cfg = dir.path().join("from_config");
    std::fs::write(
        &cfg,
        format!(
            "seed = 4\nensemble_size = 2\noutput_dir = {:?}\n[generator]\nalgorithm = \"visscher_bolsterli\"\nn = 200\n",
            s(&out_cfg)
        ),
    )
    .unwrap();
    ok(&["generate", "--config", s(&cfg)]);
    assert_eq!(files(&out_cfg).len(), 4);
    let out_flag = dir.path().join("from_flags");
    ok(&["generate", "--config", s(&cfg), "--ensemble-size", "1", "--seed", "4", "--output-dir", s(&out_flag)]);
    assert_eq!(files(&out_flag).len(), 3);
    assert_eq!(
        std::fs::read(out_flag.join("packing_0000.tsv")).unwrap(),
        std::fs::read(out_cfg.join("packing_0000.tsv")).unwrap()
    );
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&["generate", "--generator", r#"{algorithm = "nope"}"#, "--output-dir", out]), 2);
    assert_eq!(code(&["generate", "--generator", r#"{algorithm = "jodrey_tory", n = 0}"#, "--output-dir", out]), 2);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "colour = 1\n[generator]\nalgorithm = \"visscher_bolsterli\"\nn = 10\n").unwrap();
    assert_eq!(code(&["generate", "--config", s(&cfg)]), 2);
    assert_eq!(code(&["stats", "/nonexistent/packing.tsv", "--output-dir", out]), 1);
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "# packlab packing 1\n# dim\t3\n# boundary\tnone\n0 1 2 nan 0.5\n").unwrap();
    assert_eq!(code(&["contacts", s(&bad), "--output-dir", out]), 2);

    // Two spheres fit in this box only if the first lands near a corner.
    let crowded = r#"{algorithm = "rsa", n = 2, region = {HardBox = {extents = [1.6, 1.6, 1.6]}}}"#;
    assert_eq!(code(&["generate", "--generator", crowded, "--output-dir", out]), 3);

    // A one-descriptor panel leaves the energy test nothing to compare.
    let model = dir.path().join("model.toml");
    std::fs::write(
        &model,
        "ensemble_size = 5\n[generator]\nalgorithm = \"visscher_bolsterli\"\nn = 600\n[[panel.descriptors]]\nkind = \"volume_fraction\"\n",
    )
    .unwrap();
    let args = ["assess", "--config", s(&model), "--data-config", s(&model), "--permutations", "99", "--output-dir", out];
    assert_eq!(code(&args), 4);
}

#[test]
fn measurement_commands_write_tables_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&["generate", "--generator", VB, "--seed", "2", "--output-dir", s(&gen)]);
    let packing = gen.join("packing_0000.tsv");
    let expect: [(&str, &[&str]); 5] = [
        ("stats", &["g.tsv", "K.tsv", "contact.tsv", "rdf.tsv"]),
        ("tessellate", &["cells.tsv", "local_density.tsv", "escape.tsv"]),
        ("contacts", &["contacts.tsv", "coordination.tsv", "rattlers.tsv"]),
        ("order", &["per_sphere.tsv"]),
        ("resist", &["currents.tsv", "potential.tsv"]),
    ];
    for (cmd, names) in expect {
        let out = dir.path().join(cmd);
        let stdout = ok(&[cmd, s(&packing), "--output-dir", s(&out)]);
        assert!(stdout.starts_with("# quantity\tvalue"), "{cmd}: {stdout}");
        for n in names.iter().chain(&["summary.tsv", "provenance.json"]) {
            assert!(out.join(n).exists(), "{cmd} did not write {n}");
        }
        let rec: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("provenance.json")).unwrap()).unwrap();
        assert_eq!(rec["inputs"][0], s(&packing));
    }
    let summary = std::fs::read_to_string(dir.path().join("stats/summary.tsv")).unwrap();
    let phi: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("interior_volume_fraction\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.54..0.62).contains(&phi), "{phi}");
    let stdout = ok(&["resist", s(&packing), "--axis", "2", "--output-dir", s(&dir.path().join("r2"))]);
    assert!(stdout.contains("resistance"));
    assert_eq!(code(&["resist", s(&packing), "--axis", "3", "--output-dir", s(&dir.path().join("r3"))]), 2);
}

#[test]
fn planar_order_reports_defects() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&["generate", "--generator", r#"{algorithm = "jodrey_tory", n = 300, dim = 2, cycles = 200}"#, "--output-dir", s(&gen)]);
    let out = dir.path().join("order");
    let stdout = ok(&["order", s(&gen.join("packing_0000.tsv")), "--output-dir", s(&out)]);
    assert!(stdout.contains("defect_fraction"));
    assert!(out.join("degrees.tsv").exists());
}

#[test]
fn import_converts_center_lists() {
    let dir = tempfile::tempdir().unwrap();
    let centers = dir.path().join("centers.txt");
    std::fs::write(&centers, "# x y z in micrometres\n10 10 10\n30 10 10\n10 30 10\n").unwrap();
    let out = dir.path().join("imp");
    let stdout = ok(&[
        "import",
        s(&centers),
        "--scale",
        "0.05",
        "--radius",
        "10",
        "--boundary",
        "hard_box 2 2 2",
        "--output-dir",
        s(&out),
    ]);
    assert!(stdout.contains("spheres\t3"));
    let loaded = packlab_core::read_configuration(&out.join("packing.tsv")).unwrap();
    assert_eq!(loaded.configuration.len(), 3);
    assert_eq!(loaded.configuration.spheres[1].center.x, 1.5);
    assert_eq!(loaded.min_gap, Some(0.0));
    assert_eq!(code(&["import", s(&centers), "--boundary", "torus 1", "--output-dir", s(&out)]), 2);
}

#[test]
fn assess_separates_different_drop_counts() {
    let dir = tempfile::tempdir().unwrap();
    let panel = "[[panel.descriptors]]\nkind = \"volume_fraction\"\n[[panel.descriptors]]\nkind = \"pair_correlation\"\nr = 1.0\n";
    let model = dir.path().join("model.toml");
    std::fs::write(
        &model,
        format!("seed = 1\nensemble_size = 12\n[generator]\nalgorithm = \"visscher_bolsterli\"\nn = 800\nk_drops = 1\n{panel}"),
    )
    .unwrap();
    let other = dir.path().join("other.toml");
    std::fs::write(
        &other,
        format!("seed = 2\nensemble_size = 12\n[generator]\nalgorithm = \"visscher_bolsterli\"\nn = 800\nk_drops = 30\n{panel}"),
    )
    .unwrap();
    let out = dir.path().join("assess");
    let stdout = ok(&["assess", "--config", s(&model), "--data-config", s(&other), "--permutations", "199", "--output-dir", s(&out)]);
    let energy = stdout.lines().find(|l| l.starts_with("energy")).unwrap();
    let fields: Vec<&str> = energy.split('\t').collect();
    assert!(fields[3].parse::<f64>().unwrap() < 0.01, "{energy}");
    assert_eq!(fields[5], "true");
    for n in ["tests.tsv", "diagnostics.tsv", "model.tsv", "data.tsv", "provenance.json"] {
        assert!(out.join(n).exists());
    }

    // The written data table can stand in for the data on a rerun.
    let again = dir.path().join("again");
    let stdout2 = ok(&[
        "assess",
        "--config",
        s(&model),
        "--data-table",
        s(&out.join("data.tsv")),
        "--permutations",
        "199",
        "--output-dir",
        s(&again),
    ]);
    assert_eq!(stdout, stdout2);
    assert_eq!(std::fs::read(out.join("tests.tsv")).unwrap(), std::fs::read(again.join("tests.tsv")).unwrap());
}

#[test]
fn fit_recovers_the_drop_count() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&["generate", "--generator", VB, "--seed", "77", "--ensemble-size", "3", "--output-dir", s(&gen)]);
    let data: Vec<String> = (0..3).map(|i| s(&gen.join(format!("packing_{i:04}.tsv"))).to_string()).collect();
    let out = dir.path().join("fit");
    let mut args = vec![
        "fit",
        "--generator",
        VB,
        "--param",
        "k_drops=1,30",
        "--r-grid",
        "1.0:1.5:0.05",
        "--replicates",
        "5",
        "--output-dir",
        s(&out),
        "--data",
    ];
    args.extend(data.iter().map(String::as_str));
    let stdout = ok(&args);
    assert!(stdout.contains("best.k_drops\t1\n"), "{stdout}");
    assert!(stdout.contains("non_identifiable\tfalse"));
    let profile = std::fs::read_to_string(out.join("profile.tsv")).unwrap();
    assert_eq!(profile.lines().filter(|l| !l.starts_with('#')).count(), 2);
    let rec: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(rec["spec"]["k_drops"], 1);

    let mut bad = args.clone();
    let k = bad.iter().position(|a| *a == "k_drops=1,30").unwrap();
    bad[k] = "k_drops=1.5,2";
    assert_eq!(code(&bad), 2);
}
