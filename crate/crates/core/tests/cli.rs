use std::path::Path;
use std::process::{Command, Output};

use hyperpolar::code::PolarCode;
use hyperpolar::harness::read_csv;
use hyperpolar::neural::Checkpoint;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperpolar"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code_of(code: i32, out: &Output) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn construct(dir: &Path, n: usize, k: usize) -> std::path::PathBuf {
    let path = dir.join(format!("code_{n}_{k}.txt"));
    let out = run(&["construct", "--n", &n.to_string(), "--k", &k.to_string(), "--method", "bhattacharyya", "--design-param", "0.5", "--out", p(&path)]);
    code_of(0, &out);
    path
}

#[test]
fn construct_writes_loadable_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = construct(dir.path(), 2, 2);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "# polar n=2 k=2\n0\n1\n");
    let code = PolarCode::load(&path).unwrap();
    assert_eq!(code.frozen_mask(), &[true, true, false, false]);

    let list = dir.path().join("list.txt");
    std::fs::write(&list, "0\n1\n2\n4\n").unwrap();
    let out_path = dir.path().join("from_file.txt");
    let out = run(&["construct", "--n", "3", "--k", "4", "--method", "file", "--design-param", p(&list), "--out", p(&out_path)]);
    code_of(0, &out);
    let code = PolarCode::load(&out_path).unwrap();
    assert_eq!(code.info_positions(), &[3, 5, 6, 7]);
}

#[test]
fn construct_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.txt");
    code_of(2, &run(&["construct", "--n", "3", "--k", "9", "--out", p(&out_path)]));
    code_of(2, &run(&["construct", "--n", "3", "--k", "4", "--design-param", "abc", "--out", p(&out_path)]));
    code_of(2, &run(&["construct", "--n", "3"]));
    let list = dir.path().join("short.txt");
    std::fs::write(&list, "0\n1\n").unwrap();
    code_of(3, &run(&["construct", "--n", "3", "--k", "4", "--method", "file", "--design-param", p(&list), "--out", p(&out_path)]));
}

#[test]
fn encode_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "1000\n0110\n1111\n").unwrap();
    let output = dir.path().join("out.txt");
    code_of(0, &run(&["encode", "--code", p(&code_path), "--in", p(&input), "--out", p(&output)]));
    let code = PolarCode::load(&code_path).unwrap();
    let got: Vec<String> = std::fs::read_to_string(&output).unwrap().lines().map(String::from).collect();
    for (line, word) in got.iter().zip(["1000", "0110", "1111"]) {
        let info: Vec<u8> = word.bytes().map(|b| b - b'0').collect();
        let expect: String = code.encode(&info).unwrap().iter().map(|b| char::from(b'0' + b)).collect();
        assert_eq!(line, &expect);
    }
    assert_eq!(got.len(), 3);

    std::fs::write(&input, "101\n").unwrap();
    code_of(3, &run(&["encode", "--code", p(&code_path), "--in", p(&input), "--out", p(&output)]));
    std::fs::write(&input, "10x1\n").unwrap();
    code_of(3, &run(&["encode", "--code", p(&code_path), "--in", p(&input), "--out", p(&output)]));
    let missing = dir.path().join("none.txt");
    code_of(3, &run(&["encode", "--code", p(&missing), "--in", p(&input), "--out", p(&output)]));
}

#[test]
fn simulate_writes_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 4, 8);
    let sim = |name: &str, decoder: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "simulate", "--code", p(&code_path), "--decoder", decoder, "--snr", "2:4:1", "--min-frames", "64",
            "--max-frames", "512", "--target-errors", "40", "--seed", "5", "--out", p(&out),
        ]);
        code_of(0, &o);
        std::fs::read(out).unwrap()
    };
    for decoder in ["bp-exact", "bp-minsum", "sc", "scl"] {
        let a = sim(&format!("{decoder}_a.csv"), decoder);
        let b = sim(&format!("{decoder}_b.csv"), decoder);
        assert_eq!(a, b, "{decoder}");
        let recs = read_csv(&dir.path().join(format!("{decoder}_a.csv"))).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.info_bits == r.frames * 8));
    }
    assert!(String::from_utf8(sim("h.csv", "bp-exact"))
        .unwrap()
        .starts_with("snr_db,frames,bit_errors,info_bits,frame_errors,ber,fer\n"));
}

#[test]
fn simulate_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let out = dir.path().join("r.csv");
    let base = ["simulate", "--code", p(&code_path), "--out", p(&out)];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = base.to_vec();
        v.extend_from_slice(extra);
        run(&v)
    };
    code_of(2, &with(&["--decoder", "ldpc"]));
    code_of(2, &with(&["--decoder", "hyper"]));
    code_of(2, &with(&["--decoder", "sc", "--snr", "5:1:1"]));
    code_of(2, &with(&["--decoder", "sc", "--min-frames", "10", "--max-frames", "5"]));
    let bogus = dir.path().join("bogus.ckpt");
    std::fs::write(&bogus, b"not a checkpoint").unwrap();
    code_of(3, &with(&["--decoder", "wbp", "--checkpoint", p(&bogus)]));
}

#[test]
fn train_then_simulate_learned() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let other_path = construct(dir.path(), 3, 5);
    let train = |variant: &str, ablation: &str, tag: &str| {
        let ck = dir.path().join(format!("{tag}.ckpt"));
        let metrics = dir.path().join(format!("{tag}.csv"));
        let o = run(&[
            "train", "--code", p(&code_path), "--decoder", variant, "--ablation", ablation, "--iters", "2", "--batch", "12",
            "--epochs", "2", "--lr0", "0.5", "--decay", "0.0001", "--seed", "4", "--checkpoint-out", p(&ck),
            "--metrics-out", p(&metrics), "--batches-per-epoch", "2", "--val-frames", "40",
        ]);
        code_of(0, &o);
        (ck, metrics)
    };
    let (ck, metrics) = train("hyper", "full", "h1");
    let (ck2, metrics2) = train("hyper", "full", "h2");
    assert_eq!(std::fs::read(&ck).unwrap(), std::fs::read(&ck2).unwrap());
    assert_eq!(std::fs::read(&metrics).unwrap(), std::fs::read(&metrics2).unwrap());
    let text = std::fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("epoch,lr,mean_loss,val_snr_db,val_ber\n"));
    assert_eq!(text.lines().count(), 3);
    let loaded = Checkpoint::load(&ck).unwrap();
    assert_eq!(loaded.iterations(), 2);

    let out = dir.path().join("sim.csv");
    code_of(0, &run(&["simulate", "--code", p(&code_path), "--decoder", "hyper", "--checkpoint", p(&ck), "--snr", "3", "--min-frames", "64", "--max-frames", "64", "--out", p(&out)]));
    // wrong variant and wrong code
    code_of(3, &run(&["simulate", "--code", p(&code_path), "--decoder", "wbp", "--checkpoint", p(&ck), "--out", p(&out)]));
    code_of(3, &run(&["simulate", "--code", p(&other_path), "--decoder", "hyper", "--checkpoint", p(&ck), "--out", p(&out)]));

    let (wck, _) = train("wbp", "full", "w");
    code_of(0, &run(&["simulate", "--code", p(&code_path), "--decoder", "wbp", "--checkpoint", p(&wck), "--snr", "3", "--min-frames", "64", "--max-frames", "64", "--out", p(&out)]));
}

#[test]
fn train_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let ck = dir.path().join("x.ckpt");
    let m = dir.path().join("x.csv");
    // batch not divisible by the six default SNRs
    code_of(2, &run(&["train", "--code", p(&code_path), "--batch", "10", "--epochs", "1", "--checkpoint-out", p(&ck), "--metrics-out", p(&m)]));
    code_of(2, &run(&["train", "--code", p(&code_path), "--decoder", "wbp", "--ablation", "no-gating", "--checkpoint-out", p(&ck), "--metrics-out", p(&m)]));
    code_of(2, &run(&["train", "--code", p(&code_path), "--ablation", "half", "--checkpoint-out", p(&ck), "--metrics-out", p(&m)]));
}

#[test]
fn train_non_finite_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let ck = dir.path().join("x.ckpt");
    let m = dir.path().join("x.csv");
    let o = run(&[
        "train", "--code", p(&code_path), "--decoder", "hyper", "--lr0", "1.7e308", "--batch", "6", "--epochs", "3",
        "--batches-per-epoch", "3", "--val-frames", "10", "--checkpoint-out", p(&ck), "--metrics-out", p(&m), "--iters", "2", "--grad-clip", "0",
    ]);
    code_of(4, &o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical abort"));
    assert!(dir.path().join("x.nonfinite.ckpt").exists());
}

#[test]
fn ablate_reuses_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let ckdir = dir.path().join("cks");
    let table = dir.path().join("table.csv");
    let args = |out: &Path| {
        vec![
            "ablate".to_string(), "--code".into(), p(&code_path).into(), "--out".into(), p(out).into(),
            "--reuse-checkpoints".into(), p(&ckdir).into(), "--iters".into(), "2".into(), "--batch".into(), "12".into(),
            "--epochs".into(), "1".into(), "--batches-per-epoch".into(), "2".into(), "--val-frames".into(), "20".into(),
            "--snr".into(), "1:2:1".into(), "--min-frames".into(), "64".into(), "--max-frames".into(), "64".into(),
        ]
    };
    let o = bin().args(args(&table)).output().unwrap();
    code_of(0, &o);
    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variant,1dB,2dB");
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["no-damping", "fixed-damping", "no-gating", "full"]);
    for name in &names {
        assert!(ckdir.join(format!("{name}.ckpt")).exists());
    }
    // second run loads instead of training and reproduces the table
    let table2 = dir.path().join("table2.csv");
    let o = bin().args(args(&table2)).output().unwrap();
    code_of(0, &o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("loaded"));
    assert_eq!(text, std::fs::read_to_string(&table2).unwrap());
}

#[test]
fn plot_renders_svg() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = construct(dir.path(), 3, 4);
    let mut files = Vec::new();
    for decoder in ["bp-minsum", "sc"] {
        let out = dir.path().join(format!("{decoder}.csv"));
        code_of(0, &run(&["simulate", "--code", p(&code_path), "--decoder", decoder, "--snr", "1:3:1", "--min-frames", "64", "--max-frames", "128", "--out", p(&out)]));
        files.push(out);
    }
    let svg = dir.path().join("curves.svg");
    let list = format!("{},{}", p(&files[0]), p(&files[1]));
    code_of(0, &run(&["plot", "--in", &list, "--out", p(&svg)]));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("bp-minsum") && text.contains(">sc<"));
    assert_eq!(text.matches("<polyline").count(), 2);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n").unwrap();
    code_of(3, &run(&["plot", "--in", p(&bad), "--out", p(&svg)]));
}
