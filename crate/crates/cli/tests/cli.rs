use std::path::Path;
use std::process::{Command, Output};

fn celltriage(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_celltriage"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SYNTH: &str = "n_cells = 12\nn_problematic = 3\nn_congested = 1\nseed = 2\n\
[ues_per_cell]\nmin = 6\nmax = 8\n[samples_per_ue]\nmin = 4\nmax = 6\n";

const PIPELINE: &str = "min_samples = 10\ncluster_ks = [2, 3]\ntrain_views = 2\n\
[mlp]\nhidden_layers = 0\ncell_max_samples = 10\nmax_epochs = 20\n";

fn setup(dir: &Path) {
    std::fs::write(dir.join("synth.toml"), SYNTH).unwrap();
    std::fs::write(dir.join("pipeline.toml"), PIPELINE).unwrap();
    let out = celltriage(
        &[
            "generate",
            "--config",
            "synth.toml",
            "--out",
            "data.csv",
            "--labels",
            "labels.csv",
        ],
        dir,
    );
    assert!(ok(&out).contains("12 cells (3 problematic)"));
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    let common = [
        "--config",
        "pipeline.toml",
        "--seed",
        "4",
        "--data",
        "data.csv",
        "--labels",
        "labels.csv",
    ];
    let with = |cmd: &str, out: &str| {
        let mut v = vec![cmd];
        v.extend_from_slice(&common);
        v.extend_from_slice(&["--out", out]);
        v.into_iter().map(String::from).collect::<Vec<_>>()
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&celltriage(&refs, d))
    };

    let train = run(with("train", "run"));
    assert!(train.contains("trained on 12 cells"), "{train}");
    let eval = run(with("evaluate", "run"));
    assert!(
        eval.contains("proposed") && eval.contains("baseline"),
        "{eval}"
    );
    assert!(d.join("run/evaluation.json").is_file());
    assert!(d.join("run/verdicts.csv").is_file());

    let classify = ok(&celltriage(
        &[
            "classify",
            "--bundle",
            "run",
            "--data",
            "data.csv",
            "--out",
            "verdicts.csv",
        ],
        d,
    ));
    assert!(classify.contains("of 12 cells"), "{classify}");
    let rows = std::fs::read_to_string(d.join("verdicts.csv")).unwrap();
    assert_eq!(rows.lines().count(), 13);

    run(with("baseline", "base"));
    assert!(d.join("base/baseline_scatter.csv").is_file());
    run(with("inspect-prior", "prior"));
    assert!(d.join("prior/prior.csv").is_file());
    let mut pre = with("preprocess", "pre");
    pre.push("--scramble".into());
    run(pre);
    assert!(d.join("pre/train.csv").is_file() && d.join("pre/test_labels.csv").is_file());

    // same seed, same reports
    run(with("train", "run2"));
    run(with("evaluate", "run2"));
    for f in ["train_report.json", "evaluation.json", "verdicts.csv"] {
        assert_eq!(
            std::fs::read(d.join("run").join(f)).unwrap(),
            std::fs::read(d.join("run2").join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);

    let out = celltriage(
        &[
            "train",
            "--data",
            "missing.csv",
            "--labels",
            "labels.csv",
            "--out",
            "o",
        ],
        d,
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("error: load:") && err.contains("missing.csv"),
        "{err}"
    );

    std::fs::write(d.join("bad.toml"), "train_fraction = 1.5\n").unwrap();
    let out = celltriage(&["train", "--config", "bad.toml", "--out", "o"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("error: setup:") && err.contains("train_fraction"),
        "{err}"
    );

    std::fs::create_dir_all(d.join("held")).unwrap();
    std::fs::write(d.join("held/.celltriage.lock"), "").unwrap();
    let out = celltriage(
        &[
            "train",
            "--data",
            "data.csv",
            "--labels",
            "labels.csv",
            "--out",
            "held",
        ],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));

    // unknown column in data
    let text = std::fs::read_to_string(d.join("data.csv")).unwrap();
    let mut lines = text.lines();
    let header = format!("{},extra", lines.next().unwrap());
    let body: Vec<String> = lines.map(|l| format!("{l},0")).collect();
    std::fs::write(
        d.join("extra.csv"),
        format!("{header}\n{}\n", body.join("\n")),
    )
    .unwrap();
    let out = celltriage(
        &[
            "inspect-prior",
            "--data",
            "extra.csv",
            "--labels",
            "labels.csv",
            "--out",
            "p",
        ],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown column `extra`"));
}
