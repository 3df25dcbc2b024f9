use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nrsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrsim"))
        .args(args)
        .current_dir(cwd)
        .env("NRSIM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn arch_run_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "run",
            "--arch",
            "4",
            "--n-ues",
            "10",
            "--seed",
            "7",
            "--replications",
            "3",
            "--sim-time-s",
            "2",
            "--transactions",
            "--grant-log",
            "--out-dir",
            out,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    for out in ["a", "b"] {
        let a = args(out);
        let o = nrsim(
            &a.iter().map(String::as_str).collect::<Vec<_>>(),
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = read_all(&tmp.path().join("a"));
    let b = read_all(&tmp.path().join("b"));
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert!(
        names.contains(&"feasibility.csv")
            && names.contains(&"reports.json")
            && names.contains(&"summary.csv")
    );
    assert!(names.iter().any(|n| n.starts_with("transactions_")));
    assert!(names.iter().any(|n| n.starts_with("grants_")));

    // Overwriting in place gives the same bytes too.
    let again = args("a");
    nrsim(
        &again.iter().map(String::as_str).collect::<Vec<_>>(),
        tmp.path(),
    );
    assert_eq!(read_all(&tmp.path().join("a")), b);
}

#[test]
fn fig2_sweep_rows() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("fig2.toml"),
        "output.figure = \"fig2\"\ntraffic.p_dl = 1.0\ntraffic.sim_time_s = 0.5\n",
    )
    .unwrap();
    let o = nrsim(
        &[
            "run",
            "--config",
            "fig2.toml",
            "--replications",
            "2",
            "--out-dir",
            "f",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("f/fig2.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        body[0],
        "series,bandwidth_mhz,scs_khz,mod_order,n_ues,mean_t_5g_nr_ms,ci90_ms,config_hash"
    );
    assert_eq!(body.len() - 1, 3 * 11);
    let series: std::collections::BTreeSet<&str> = body[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(series.len(), 3);
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("# config_hash="))
            .count(),
        33
    );
}

#[test]
fn malformed_config_exits_1_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        "traffic.n_ues = [1, 5]\nradio.scs_khz = \n",
    )
    .unwrap();
    let o = nrsim(&["run", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:2:"), "{err}");

    fs::write(
        tmp.path().join("range.toml"),
        "radio.scs_khz = 30\n\n[traffic]\np_dl = 3.0\n",
    )
    .unwrap();
    let o = nrsim(&["run", "--config", "range.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("range.toml:4:"));

    let o = nrsim(&["run", "--arch", "9"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "radio.bandwidth_mhz = 20\nradio.scs_khz = 60\nradio.mod_order = [64, 256]\ntraffic.n_ues = 3\n\
         traffic.replications = 2\ntraffic.sim_time_s = 1\noutput.dir = \"from_file\"\n",
    )
    .unwrap();
    let o = nrsim(
        &[
            "run",
            "--config",
            "c.toml",
            "--n-ues",
            "2,4",
            "--out-dir",
            "flag",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("from_file").exists());
    let summary = fs::read_to_string(tmp.path().join("flag/summary.csv")).unwrap();
    let rows: Vec<&str> = summary
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.contains(",20.000000,60,")));
}

#[test]
fn corpus_and_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nrsim(
        &[
            "corpus", "--out", "c.csv", "--series", "30", "--length", "150", "--seed", "3",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = nrsim(
        &[
            "evaluate", "--corpus", "c.csv", "--margin", "3,5", "--out", "m.json",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = fs::read_to_string(tmp.path().join("m.json")).unwrap();
    assert!(
        m.contains("\"pipeline\"")
            && m.contains("\"baseline\"")
            && m.contains("\"mean_advance_s\"")
    );

    // External scores: |az| as a naive model.
    let corpus = fs::read_to_string(tmp.path().join("c.csv")).unwrap();
    let mut scores = String::from("series_id,t_ms,score\n");
    for line in corpus.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        scores.push_str(&format!("{},{},{}\n", f[0], f[1], f[4]));
    }
    fs::write(tmp.path().join("s.csv"), scores).unwrap();
    let o = nrsim(
        &[
            "evaluate", "--corpus", "c.csv", "--scores", "s.csv", "--out", "s.json",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(tmp.path().join("s.json"))
        .unwrap()
        .contains("\"scores\""));

    fs::write(
        tmp.path().join("short.csv"),
        "series_id,t_ms,score\n0,0,1\n",
    )
    .unwrap();
    let o = nrsim(
        &["evaluate", "--corpus", "c.csv", "--scores", "short.csv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nrsim"))
        .args([
            "run",
            "--n-ues",
            "1",
            "--replications",
            "2",
            "--sim-time-s",
            "0.5",
        ])
        .current_dir(tmp.path())
        .env("NRSIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
