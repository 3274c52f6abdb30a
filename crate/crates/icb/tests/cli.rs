use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use icb::report::{strip_timing, CSV_HEADER};
use tempfile::TempDir;

fn icb() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_icb"));
    // Keep the caller's environment from overriding flags.
    for (k, _) in std::env::vars() {
        if k.starts_with("ICB_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    icb().args(args).output().expect("spawn icb")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn compress_examples() {
    let d = TempDir::new().unwrap();
    std::fs::write(p(&d, "sixteen"), (0u8..16).collect::<Vec<_>>()).unwrap();
    let o = run(&["compress", &p(&d, "sixteen"), &p(&d, "sixteen.sz")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::metadata(p(&d, "sixteen.sz")).unwrap().len(), 18);

    std::fs::write(p(&d, "empty"), b"").unwrap();
    assert_eq!(code(&run(&["compress", &p(&d, "empty"), &p(&d, "empty.sz")])), 0);
    assert_eq!(std::fs::read(p(&d, "empty.sz")).unwrap(), [0x00]);

    let o = run(&["compress", &p(&d, "missing"), &p(&d, "x")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("missing"), "{}", stderr(&o));
}

#[test]
fn decompress_examples() {
    let d = TempDir::new().unwrap();
    let data: Vec<u8> = (0..50_000u32).map(|i| (i % 251) as u8 ^ (i / 1000) as u8).collect();
    std::fs::write(p(&d, "in"), &data).unwrap();
    assert_eq!(code(&run(&["compress", &p(&d, "in"), &p(&d, "in.sz")])), 0);
    assert_eq!(code(&run(&["decompress", &p(&d, "in.sz"), &p(&d, "out")])), 0);
    assert_eq!(std::fs::read(p(&d, "out")).unwrap(), data);

    let block = std::fs::read(p(&d, "in.sz")).unwrap();
    std::fs::write(p(&d, "trunc.sz"), &block[..block.len() / 2]).unwrap();
    let o = run(&["decompress", &p(&d, "trunc.sz"), &p(&d, "t")]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));

    std::fs::write(p(&d, "zero.sz"), [0x00]).unwrap();
    assert_eq!(code(&run(&["decompress", &p(&d, "zero.sz"), &p(&d, "zero")])), 0);
    assert!(std::fs::read(p(&d, "zero")).unwrap().is_empty());
}

#[test]
fn gen_examples() {
    let d = TempDir::new().unwrap();
    for f in ["a", "b"] {
        let o = run(&["gen", "--seed", "7", "--count", "100", "--out", &p(&d, f)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = std::fs::read(p(&d, "a")).unwrap();
    assert_eq!(a, std::fs::read(p(&d, "b")).unwrap());
    let readings = icb::dataset::read_redd_file(Path::new(&p(&d, "a"))).unwrap();
    assert_eq!(readings.len(), 100);

    assert_eq!(code(&run(&["gen", "--count", "0"])), 2);
}

fn csv_rows(path: &str) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

const SMALL: [&str; 6] = ["--count", "20000", "--repetitions", "1", "--rate", "1G"];

#[test]
fn bench_grid_and_modes() {
    let d = TempDir::new().unwrap();
    let out = p(&d, "full.csv");
    let o = run(&[&["bench", "--out", &out][..], &SMALL].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 13);
    assert!(rows[0].starts_with(CSV_HEADER));
    assert!(Path::new(&format!("{out}.env.json")).exists());

    let out = p(&d, "raw.csv");
    let o = run(&[&["bench", "--modes", "raw", "--out", &out][..], &SMALL].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    assert!(rows[1..].iter().all(|r| r.contains(",raw_transmit,")));
}

#[test]
fn env_vars_mirror_flags() {
    let d = TempDir::new().unwrap();
    let out = p(&d, "env.csv");
    let o = icb()
        .args(["bench"])
        .env("ICB_MODES", "raw")
        .env("ICB_BATCH_SIZES", "500,50")
        .env("ICB_COUNT", "5000")
        .env("ICB_REPETITIONS", "1")
        .env("ICB_RATE", "1G")
        .env("ICB_FORMAT", "json")
        .env("ICB_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["batch_size"], 500);
    assert_eq!(rows[1]["mode"], "raw_transmit");
    assert_eq!(v["environment"]["rate_bits_per_s"], 1_000_000_000u64);
}

#[test]
fn rate_floor_holds() {
    let d = TempDir::new().unwrap();
    let out = p(&d, "floor.csv");
    let o = run(&[
        "bench", "--count", "20000", "--repetitions", "1", "--rate", "100M", "--batch-sizes", "1000,100",
        "--out", &out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for row in &csv_rows(&out)[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let elapsed: f64 = f[3].parse().unwrap();
        let wire: f64 = f[5].parse().unwrap();
        assert!(elapsed + 0.001 >= wire * 8.0 / 100e6, "{row}");
    }
}

#[test]
fn bench_validation_exit_codes() {
    for args in [
        &["bench", "--batch-sizes", "0"][..],
        &["bench", "--codec", "lzo"],
        &["bench", "--repetitions", "0"],
        &["bench", "--rate", "0"],
        &["bench", "--tx-cost-per-bit", "-3"],
        &["bench", "--count", "10", "--batch-sizes", "20"],
        &["serve", "--link", "inproc"],
    ] {
        let o = run(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
    let o = run(&["bench", "--input", "/nonexistent/redd.dat"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn redd_file_input() {
    let d = TempDir::new().unwrap();
    let data = p(&d, "channel_1.dat");
    assert_eq!(code(&run(&["gen", "--count", "3000", "--out", &data])), 0);
    let out = p(&d, "file.csv");
    let o = run(&[
        "bench", "--input", &data, "--batch-sizes", "100", "--repetitions", "1", "--rate", "1G", "--out", &out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_rows(&out).len(), 4);

    std::fs::write(p(&d, "bad.dat"), "1 2.0\n2 x\n").unwrap();
    let o = run(&["bench", "--input", &p(&d, "bad.dat"), "--batch-sizes", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn recorded_config_reruns_identically() {
    let d = TempDir::new().unwrap();
    let first = p(&d, "first.csv");
    let o = run(&[&["bench", "--seed", "11", "--out", &first][..], &SMALL].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let second = p(&d, "second.csv");
    let o = run(&["bench", "--config", &format!("{first}.env.json"), "--out", &second]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = std::fs::read_to_string(&first).unwrap();
    let b = std::fs::read_to_string(&second).unwrap();
    assert_eq!(strip_timing(&a), strip_timing(&b));
}

struct Server {
    child: Option<Child>,
    addr: String,
}

impl Server {
    fn start(addr: &str) -> Server {
        let mut child = icb()
            .args(["serve", "--addr", addr])
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected serve output {line:?}"))
            .to_string();
        Server { child: Some(child), addr }
    }

    fn interrupt(mut self) -> (i32, String) {
        let child = self.child.take().unwrap();
        let pid = child.id().to_string();
        assert!(Command::new("kill").args(["-INT", &pid]).status().unwrap().success());
        let out = child.wait_with_output().unwrap();
        (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

#[test]
fn serve_and_remote_bench() {
    let server = Server::start("127.0.0.1:0");

    let again = run(&["serve", "--addr", &server.addr]);
    assert_eq!(code(&again), 4, "{}", stderr(&again));

    let d = TempDir::new().unwrap();
    let out = p(&d, "remote.csv");
    let o = run(&[
        &["bench", "--link", "tcp", "--addr", &server.addr, "--batch-sizes", "1000,100", "--out", &out][..],
        &SMALL,
    ]
    .concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_rows(&out).len(), 7);

    std::thread::sleep(Duration::from_millis(100));
    let (status, log) = server.interrupt();
    assert_eq!(status, 0, "{log}");
    assert!(log.contains("interrupted, drained; 0 failed"), "{log}");
    // warm-up (3) + 2 sizes × 3 modes × 1 repetition
    assert_eq!(log.matches(", ok").count(), 9, "{log}");
}

#[test]
fn remote_bench_without_server_is_transport_error() {
    let free = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let o = run(&[
        &["bench", "--link", "tcp", "--addr", &free.to_string()][..],
        &SMALL,
    ]
    .concat());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn local_tcp_bench() {
    let d = TempDir::new().unwrap();
    let out = p(&d, "tcp.csv");
    let o = run(&[&["bench", "--link", "tcp", "--batch-sizes", "100", "--out", &out][..], &SMALL].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv_rows(&out).len(), 4);
}
