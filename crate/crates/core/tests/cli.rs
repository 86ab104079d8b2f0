use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use irnn::imaging::ImageBuffer;

fn irnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&irnn(&[], p)), 2);
    assert_eq!(code(&irnn(&["frobnicate"], p)), 2);
    assert_eq!(code(&irnn(&["bench", "phase", "--m", "10"], p)), 2);
    assert_eq!(
        code(&irnn(
            &["bench", "noisy", "--seed", "1", "--colour", "red"],
            p
        )),
        2
    );
    assert_eq!(code(&irnn(&["penalty", "curves", "--lambda", "abc"], p)), 2);
    assert_eq!(code(&irnn(&["--help"], p)), 0);
    assert_eq!(code(&irnn(&["bench", "phase", "--help"], p)), 0);
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        code(&irnn(&["penalty", "curves", "--kind", "truncated"], p)),
        1
    );
    assert_eq!(
        code(&irnn(&["penalty", "curves", "--kind", "lp", "--p", "2"], p)),
        1
    );
    assert_eq!(
        code(&irnn(
            &["bench", "phase", "--seed", "1", "--ranks", "9..3"],
            p
        )),
        1
    );
    assert_eq!(
        code(&irnn(
            &["complete", "--input", "missing.csv", "--out", "x.csv"],
            p
        )),
        1
    );
    fs::write(p.join("bad.toml"), "[bench]\nsize = 3\n").unwrap();
    assert_eq!(
        code(&irnn(
            &["bench", "phase", "--seed", "1", "--config", "bad.toml"],
            p
        )),
        1
    );
}

#[test]
fn bench_is_byte_reproducible_and_flags_beat_toml() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("run.toml"),
        "[bench]\nm = 15\nn = 15\nranks = [1, 2]\ntrials = 3\nsolvers = [\"lp\", \"convex\"]\n",
    )
    .unwrap();
    let args = [
        "bench",
        "phase",
        "--seed",
        "7",
        "--config",
        "run.toml",
        "--trials",
        "2",
        "--out-dir",
        "a",
    ];
    assert_eq!(code(&irnn(&args, p)), 0);
    let mut again = args;
    again[9] = "b";
    assert_eq!(code(&irnn(&again, p)), 0);
    for name in [
        "phase_lp_trials.csv",
        "phase_lp_aggregate.csv",
        "phase_convex_trials.csv",
        "phase_convex_aggregate.csv",
    ] {
        let a = fs::read(p.join("a").join(name)).unwrap();
        assert_eq!(a, fs::read(p.join("b").join(name)).unwrap(), "{name}");
    }
    let trials = fs::read_to_string(p.join("a/phase_lp_trials.csv")).unwrap();
    // header plus 2 ranks x 2 trials: the flag wins over `trials = 3`
    assert_eq!(trials.lines().count(), 5);
    assert!(trials.starts_with("rank,trial,rel_error,success,iters,seconds"));

    assert_eq!(
        code(&irnn(
            &[
                "bench",
                "noisy",
                "--seed",
                "7",
                "--config",
                "run.toml",
                "--solvers",
                "scad",
                "--out-dir",
                "c"
            ],
            p
        )),
        0
    );
    assert!(p.join("c/noisy_scad_aggregate.csv").exists());
}

#[test]
fn complete_recovers_a_low_rank_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let u = [1.0, -2.0, 0.5, 3.0, 1.5, -1.0];
    let v = [2.0, 1.0, -1.0, 0.5, 1.0];
    let mut csv = String::from("# shape 6 5\nrow,col,value\n");
    for (i, a) in u.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            if (i + 2 * j) % 3 != 0 {
                csv.push_str(&format!("{i},{j},{}\n", a * b));
            }
        }
    }
    fs::write(p.join("obs.csv"), csv).unwrap();
    let out = irnn(
        &[
            "complete",
            "--input",
            "obs.csv",
            "--out",
            "x.csv",
            "--report",
            "trace.csv",
        ],
        p,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let x = irnn::losses::read_dense_csv(fs::read_to_string(p.join("x.csv")).unwrap().as_bytes())
        .unwrap();
    let err: f64 = (0..6)
        .flat_map(|i| (0..5).map(move |j| (i, j)))
        .map(|(i, j)| (x[(i, j)] - u[i] * v[j]).powi(2))
        .sum();
    assert!(err.sqrt() < 1e-3);
    assert!(fs::read_to_string(p.join("trace.csv"))
        .unwrap()
        .starts_with("iter,lambda,objective,rank,step"));

    let tri = irnn(
        &[
            "complete",
            "--input",
            "obs.csv",
            "--penalty",
            "scad",
            "--gamma",
            "4",
            "--format",
            "triplet",
            "--out",
            "t.csv",
        ],
        p,
    );
    assert_eq!(code(&tri), 0);
    let text = fs::read_to_string(p.join("t.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 31);
}

#[test]
fn penalty_curves_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = irnn(
        &[
            "penalty", "curves", "--kind", "lp", "--p", "0.5", "--grid", "0:4:2",
        ],
        p,
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "theta,g,dg\n0,0,inf\n2,1.4142135623730951,0.3535533905932738\n4,2,0.25\n"
    );

    assert_eq!(
        code(&irnn(
            &["penalty", "curves", "--grid", "0:1:0.25", "--out", "all.csv"],
            p
        )),
        0
    );
    let all = fs::read_to_string(p.join("all.csv")).unwrap();
    assert_eq!(all.lines().next(), Some("kind,theta,g,dg"));
    assert_eq!(all.lines().count(), 1 + 8 * 5);
}

#[test]
fn inpaint_writes_images_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let img = ImageBuffer::from_fn(20, 16, |x, y| {
        [(x * 12) as u8, (y * 15) as u8, ((x + y) * 6) as u8]
    })
    .unwrap();
    img.save_png(p.join("in.png")).unwrap();
    let mask = ImageBuffer::from_fn(
        20,
        16,
        |x, y| if y == 8 && x > 3 { [255; 3] } else { [0; 3] },
    )
    .unwrap();
    mask.save_png(p.join("mask.png")).unwrap();

    let args = [
        "inpaint",
        "--in",
        "in.png",
        "--random",
        "0.5",
        "--seed",
        "3",
        "--out",
        "r.png",
        "--corrupted-out",
        "c.png",
        "--report",
        "psnr.csv",
        "--compare-convex",
    ];
    let out = irnn(&args, p);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(p.join("psnr.csv")).unwrap();
    let rows: Vec<&str> = report
        .lines()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(rows, ["method", "corrupted", "irnn-lp", "convex"]);
    assert_eq!(ImageBuffer::load_png(p.join("r.png")).unwrap().width(), 20);
    assert!(p.join("c.png").exists());

    assert_eq!(
        code(&irnn(
            &[
                "inpaint",
                "--in",
                "in.png",
                "--mask",
                "mask.png",
                "--penalty",
                "convex",
                "--out",
                "m.png"
            ],
            p
        )),
        0
    );
    assert_eq!(
        code(&irnn(
            &[
                "inpaint", "--in", "in.png", "--mask", "mask.png", "--random", "0.5", "--out",
                "m.png"
            ],
            p
        )),
        2
    );
    assert_eq!(
        code(&irnn(&["inpaint", "--in", "in.png", "--out", "m.png"], p)),
        1
    );
}
