use std::process::Command;

const HEADER: &str = "trial,seed,kind,d,P,k,alpha,mode,M_bits,solver_or_player,queries,success,wall_ms,extra_json";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_oracle-arena"));
    c.env_remove("ORACLE_ARENA_SEED");
    c
}

fn stdout_of(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn params_show_strict_large() {
    let (code, out, _) = stdout_of(&["params", "show", "--d", "1000000", "--P", "2", "--k", "100", "--alpha", "1", "--mode", "strict"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "l=509"), "{out}");
}

#[test]
fn params_show_names_violated_assumption() {
    let (code, _, err) = stdout_of(&["params", "show", "--d", "100", "--P", "2", "--k", "5", "--mode", "strict"]);
    assert_eq!(code, 2);
    assert!(err.contains("4 l_q k ≤ d̃"), "{err}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let (code, _, err) = stdout_of(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
    let (code, _, _) = stdout_of(&["game", "chess"]);
    assert_eq!(code, 2);
}

#[test]
fn bad_values_exit_two() {
    assert_eq!(stdout_of(&["feas", "run", "--solver", "newton"]).0, 2);
    assert_eq!(stdout_of(&["feas", "run", "--mode", "fast"]).0, 2);
    assert_eq!(stdout_of(&["game", "probing", "--d", "5", "--l", "9"]).0, 2);
}

#[test]
fn feas_run_rows_and_append() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("feas.csv");
    let p = path.to_str().unwrap();
    let args = ["feas", "run", "--solver", "ellipsoid", "--d", "30", "--P", "2", "--eps", "1e-3", "--trials", "20", "--seed", "7", "--out", p];
    assert_eq!(stdout_of(&args).0, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 20);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
        assert_eq!(&r[11], "true");
        let extra: serde_json::Value = serde_json::from_str(&r[13]).unwrap();
        assert_eq!(extra["config"]["seed"], 7);
        assert!(extra["version"].is_string());
    }

    let second = dir.path().join("again.csv");
    let mut args2 = args;
    args2[15] = second.to_str().unwrap();
    assert_eq!(stdout_of(&args2).0, 0);
    let strip = |t: &str| -> Vec<Vec<String>> {
        csv::Reader::from_reader(t.as_bytes())
            .records()
            .map(|r| {
                let r = r.unwrap();
                r.iter().enumerate().filter(|(i, _)| *i != 12).map(|(_, v)| v.to_string()).collect()
            })
            .collect()
    };
    assert_eq!(strip(&text), strip(&std::fs::read_to_string(&second).unwrap()));

    let small = ["feas", "run", "--d", "30", "--eps", "1e-3", "--trials", "1", "--seed", "8", "--out", p];
    assert_eq!(stdout_of(&small).0, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.matches(HEADER).count(), 1);
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn every_game_subcommand_runs() {
    let cases: [&[&str]; 7] = [
        &["game", "probing", "--d", "40", "--k", "3", "--l", "2", "--rho", "0.2", "--trials", "2"],
        &["game", "osg", "--d", "60", "--k", "3", "--M-bits", "0", "--samples", "4", "--trials", "2"],
        &["game", "osg-simple", "--d", "60", "--k", "3", "--trials", "2"],
        &["game", "kernel", "--d", "80", "--d-tilde", "20", "--samples", "10", "--trials", "2"],
        &["game", "depth", "--d", "80", "--P", "2", "--k", "3", "--l", "2", "--eps", "1e-3", "--trials", "2"],
        &["game", "rand-feas", "--d", "120", "--P", "2", "--k", "3", "--l", "2", "--N", "4", "--eps", "1e-3", "--trials", "2"],
        &["game", "adapted-osg", "--d", "60", "--k", "3", "--j", "3", "--samples", "4", "--trials", "2"],
    ];
    for args in cases {
        let (code, out, err) = stdout_of(args);
        assert_eq!(code, 0, "{args:?}: {err}");
        assert_eq!(out.lines().next().unwrap(), HEADER);
        assert_eq!(out.lines().count(), 3, "{args:?}");
    }
}

#[test]
fn rmt_and_conc() {
    let (code, out, err) = stdout_of(&["rmt", "sweep", "--d", "10", "--C", "2,4", "--trials", "5", "--schema", "rmt"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().next().unwrap(), "n,C,alpha,trial,sigma_min,threshold,below_flag,seed");
    assert_eq!(out.lines().count(), 11);
    assert!(err.contains("min σ in C"));
    let (code, out, _) = stdout_of(&["rmt", "sweep", "--d", "10", "--C", "2", "--trials", "3"]);
    assert_eq!(code, 0);
    assert!(out.contains("min_sigma"));
    let (code, out, err) = stdout_of(&["conc", "suite", "--d", "60", "--k", "10", "--trials", "300"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.lines().count() > 10);
}

#[test]
fn config_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"kind":"game","game":"probing","d":30,"P":1,"k":3,"alpha":1.0,"l":2,"rho":0.3,"trials":3,"seed":5,"mode":"lab"}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let (code, a, _) = stdout_of(&["game", "probing", "--config", c]);
    assert_eq!(code, 0);
    let (_, b, _) = stdout_of(&["game", "probing", "--config", c, "--jobs", "2"]);
    let cut = |t: &str| t.lines().map(|l| l.split(',').take(12).collect::<Vec<_>>().join(",")).collect::<Vec<_>>();
    assert_eq!(cut(&a), cut(&b));
    assert_eq!(stdout_of(&["feas", "run", "--config", c]).0, 2);
}
