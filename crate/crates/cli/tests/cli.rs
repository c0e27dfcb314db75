use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--n-train",
    "80",
    "--n-val",
    "30",
    "--dim",
    "4",
    "--classes",
    "3",
    "--hidden",
    "6",
    "--epochs",
    "3",
];

fn bench(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klom-bench"))
        .args(args)
        .env("KLOM_BENCH_ROOT", root)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn tiny(root: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend_from_slice(TINY);
    bench(root, &all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_prints_a_three_split_table_and_caches() {
    let root = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--method",
        "noisy_descent",
        "--forget-set",
        "2",
        "--n-models",
        "3",
        "--steps",
        "20",
    ];
    let first = tiny(root.path(), &args);
    assert!(first.status.success(), "{}", stderr(&first));
    let out = stdout(&first);
    for split in ["forget", "retain", "val"] {
        assert!(out.lines().any(|l| l.starts_with(split)), "{out}");
    }
    assert!(stderr(&first).contains("pretrain: 3 models (3 trained, 0 cached)"));

    let second = tiny(root.path(), &args);
    assert!(second.status.success());
    assert_eq!(stdout(&second), out);
    let err = stderr(&second);
    assert!(
        err.contains("pretrain: 3 models (0 trained, 3 cached)"),
        "{err}"
    );
    assert!(
        err.contains("noisy_descent: 3 models (0 trained, 3 cached)"),
        "{err}"
    );
}

#[test]
fn usage_errors_exit_nonzero() {
    let root = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--method", "retrain"],
        vec![
            "run",
            "--method",
            "retrain",
            "--forget-set",
            "2",
            "--n-models",
            "1",
        ],
        vec![
            "run",
            "--method",
            "retrain",
            "--forget-set",
            "2",
            "--frobnicate",
        ],
        vec!["launch"],
    ] {
        let o = tiny(root.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = tiny(
        root.path(),
        &[
            "run",
            "--method",
            "retrain",
            "--forget-set",
            "99",
            "--n-models",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown forget set `99`"));
    let o = tiny(
        root.path(),
        &[
            "run",
            "--method",
            "nope",
            "--forget-set",
            "2",
            "--n-models",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unlearning stage"), "{}", stderr(&o));
    assert!(stderr(&o).contains("noisy_descent"));
}

#[test]
fn eval_margins_reads_stored_margins_only() {
    let root = tempfile::tempdir().unwrap();
    let missing = tiny(
        root.path(),
        &["eval-margins", "--forget-set", "2", "--n-models", "3"],
    );
    assert_eq!(missing.status.code(), Some(1));

    let run = tiny(
        root.path(),
        &[
            "run",
            "--method",
            "retrain",
            "--forget-set",
            "2",
            "--n-models",
            "3",
        ],
    );
    assert!(run.status.success(), "{}", stderr(&run));
    let same = tiny(
        root.path(),
        &[
            "eval-margins",
            "--forget-set",
            "2",
            "--n-models",
            "3",
            "--reference",
            "oracle",
            "--candidate",
            "oracle",
        ],
    );
    assert!(same.status.success(), "{}", stderr(&same));
    assert!(stdout(&same).contains("mean 0 p95 0"), "{}", stdout(&same));

    let base = tiny(
        root.path(),
        &[
            "eval-margins",
            "--forget-set",
            "2",
            "--n-models",
            "3",
            "--split",
            "forget",
        ],
    );
    assert!(base.status.success());
    let table = stdout(&run);
    let forget_row: Vec<&str> = table
        .lines()
        .find(|l| l.starts_with("forget"))
        .unwrap()
        .split_whitespace()
        .collect();
    assert!(
        stdout(&base).contains(&format!("mean {} p95 {}", forget_row[3], forget_row[4])),
        "{}",
        stdout(&base)
    );

    let too_many = tiny(
        root.path(),
        &["eval-margins", "--forget-set", "2", "--n-models", "4"],
    );
    assert_eq!(too_many.status.code(), Some(1));
    assert!(
        stderr(&too_many).contains("invalid input"),
        "{}",
        stderr(&too_many)
    );
}

#[test]
fn sensitivity_writes_six_rows_per_split_and_an_svg() {
    let root = tempfile::tempdir().unwrap();
    let o = tiny(
        root.path(),
        &["sensitivity", "--forget-set", "2", "--n-models", "100"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let csv_path = out
        .lines()
        .find_map(|l| l.strip_prefix("wrote ").filter(|p| p.ends_with(".csv")))
        .unwrap();
    let svg_path = out
        .lines()
        .find_map(|l| l.strip_prefix("wrote ").filter(|p| p.ends_with(".svg")))
        .unwrap();
    let mut reader = csv::Reader::from_path(csv_path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    for split in ["val", "forget", "retain"] {
        let ns: Vec<&str> = rows
            .iter()
            .filter(|r| &r[0] == split)
            .map(|r| r.get(1).unwrap())
            .collect();
        assert_eq!(ns, ["2", "5", "10", "20", "50", "100"]);
    }
    let svg = std::fs::read_to_string(svg_path).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 18);
}

#[test]
fn report_lists_methods_and_baseline_in_forget_order() {
    let root = tempfile::tempdir().unwrap();
    let empty = tiny(
        root.path(),
        &["report", "--forget-set", "2", "--n-models", "3"],
    );
    assert_eq!(empty.status.code(), Some(1));

    let run = tiny(
        root.path(),
        &[
            "run",
            "--method",
            "constant_margin_adversary",
            "--forget-set",
            "2",
            "--n-models",
            "3",
        ],
    );
    assert!(run.status.success(), "{}", stderr(&run));
    let o = tiny(
        root.path(),
        &["report", "--forget-set", "2", "--n-models", "3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let body: Vec<Vec<&str>> = out
        .lines()
        .skip(2)
        .take_while(|l| !l.starts_with("wrote"))
        .map(|l| {
            l.split("  ")
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .collect()
        })
        .collect();
    assert_eq!(body.len(), 2, "{out}");
    let means: Vec<f64> = body.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(means[0] <= means[1]);

    let csv_path = out.lines().find_map(|l| l.strip_prefix("wrote ")).unwrap();
    let mut reader = csv::Reader::from_path(csv_path).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    for (row, rec) in body.iter().zip(&records) {
        assert_eq!(row, &rec.iter().collect::<Vec<_>>());
    }
}

#[test]
fn forget_spec_files_are_accepted() {
    let root = tempfile::tempdir().unwrap();
    let spec_path = root.path().join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{"name": "mine", "strategy": "random", "size": 3, "indices": [5, 1, 9]}"#,
    )
    .unwrap();
    let o = tiny(
        root.path(),
        &[
            "run",
            "--method",
            "finetune_retain",
            "--steps",
            "5",
            "--forget-set",
            spec_path.to_str().unwrap(),
            "--n-models",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("forget set mine (random, 3 points)"),
        "{}",
        stdout(&o)
    );

    std::fs::write(
        &spec_path,
        r#"{"name": "bad", "strategy": "random", "size": 2, "indices": [1, 1, 1]}"#,
    )
    .unwrap();
    let o = tiny(
        root.path(),
        &[
            "run",
            "--method",
            "retrain",
            "--forget-set",
            spec_path.to_str().unwrap(),
            "--n-models",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn list_methods_shows_builtins() {
    let root = tempfile::tempdir().unwrap();
    let o = bench(root.path(), &["list-methods"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for m in [
        "noisy_descent",
        "finetune_retain",
        "gradient_ascent_forget",
        "retrain",
        "constant_margin_adversary",
    ] {
        assert!(out.contains(m));
    }
}
