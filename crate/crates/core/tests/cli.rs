use std::process::{Command, Output};

use spconv::bench::generate_case;
use spconv::reference::direct_conv;
use spconv::textio::{read_dense, write_dense};
use spconv::ConvSpec;

fn spconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spconv"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn nnz_for_one_spec() {
    let o = spconv(&[
        "nnz", "--m", "3", "--n", "3", "--k", "3", "--s", "1", "--p", "1",
    ]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "name,m,n,k,s,p,bound,dense_count,savings_ratio\nspec,3,3,3,1,1,49,81,0.395062\n"
    );
}

#[test]
fn nnz_for_bundled_table() {
    let o = spconv(&["nnz"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 123);
    assert!(lines[1].starts_with("conv0,224,224,7,2,3,"));
}

#[test]
fn verify_small_sweep_exits_zero() {
    let o = spconv(&["verify", "--max-dim", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("failures=0"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(spconv(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(spconv(&["nnz", "--bogus"]).status.code(), Some(2));
    assert_eq!(spconv(&["build", "--m", "3"]).status.code(), Some(2));
    let o = spconv(&["bench", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn runtime_errors_exit_one() {
    let o = spconv(&[
        "nnz", "--m", "2", "--n", "2", "--k", "5", "--s", "1", "--p", "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = spconv(&[
        "convolve",
        "--transform",
        "/nonexistent/t",
        "--input",
        "/nonexistent/a",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/t"));
}

#[test]
fn build_then_convolve_matches_direct() {
    let dir = tempfile::tempdir().unwrap();
    let kernel_path = dir.path().join("k.txt");
    let input_path = dir.path().join("a.txt");
    let t_path = dir.path().join("t.txt");
    let out_path = dir.path().join("out.txt");

    let spec = ConvSpec::new(9, 11, 3, 2, 2).unwrap();
    let (input, kernel) = generate_case(&spec, 3, 0);
    write_dense(
        std::fs::File::create(&kernel_path).unwrap(),
        &kernel.to_grid(),
    )
    .unwrap();
    write_dense(std::fs::File::create(&input_path).unwrap(), &input).unwrap();

    let p = |path: &std::path::Path| path.to_str().unwrap().to_string();
    let o = spconv(&[
        "build",
        "--m",
        "9",
        "--n",
        "11",
        "--k",
        "3",
        "--s",
        "2",
        "--p",
        "2",
        "--layout",
        "csc",
        "--kernel",
        &p(&kernel_path),
        "--out",
        &p(&t_path),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("layout=csc"));

    let o = spconv(&[
        "convolve",
        "--transform",
        &p(&t_path),
        "--input",
        &p(&input_path),
        "--out",
        &p(&out_path),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = read_dense(std::io::BufReader::new(
        std::fs::File::open(&out_path).unwrap(),
    ))
    .unwrap();
    let expect = direct_conv(&input, &kernel, &spec).unwrap();
    assert!(got.max_abs_diff(&expect).unwrap() <= 1e-10);
}

#[test]
fn threaded_convolve_is_bitwise_equal() {
    let dir = tempfile::tempdir().unwrap();
    let t_path = dir.path().join("t.txt");
    let input_path = dir.path().join("a.txt");
    let spec = ConvSpec::new(30, 30, 3, 1, 1).unwrap();
    write_dense(
        std::fs::File::create(&input_path).unwrap(),
        &generate_case(&spec, 1, 0).0,
    )
    .unwrap();
    let (t, a) = (t_path.to_str().unwrap(), input_path.to_str().unwrap());
    assert!(spconv(&[
        "build", "--m", "30", "--n", "30", "--k", "3", "--s", "1", "--p", "1", "--out", t
    ])
    .status
    .success());

    let serial = spconv(&["convolve", "--transform", t, "--input", a]);
    let threaded = Command::new(env!("CARGO_BIN_EXE_spconv"))
        .env("SPCONV_THREADS", "4")
        .args(["convolve", "--transform", t, "--input", a])
        .output()
        .unwrap();
    assert!(serial.status.success() && threaded.status.success());
    assert_eq!(serial.stdout, threaded.stdout);
}

#[test]
fn bench_markdown_on_custom_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("layers.csv");
    std::fs::write(&table, "name,m,n,k,s,p\na,8,8,3,1,1\nb,9,7,2,2,0\n").unwrap();
    let o = spconv(&[
        "bench",
        "--trials",
        "3",
        "--warmup",
        "1",
        "--layers",
        table.to_str().unwrap(),
        "--format",
        "markdown",
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("| layer | method | mean_us | sem_us | build_time_us |"));
    assert_eq!(
        text.lines().filter(|l| l.starts_with("| TOTAL |")).count(),
        3
    );
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("| a |") || l.starts_with("| b |"))
            .count(),
        6
    );
}
