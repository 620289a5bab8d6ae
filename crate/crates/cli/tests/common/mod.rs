#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Run the binary from `cwd`.
pub fn run_in(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marketmode"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Every regular file under `dir`, relative path to contents.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Run the golden configuration of `command` with the given thread count
/// into `out`.
pub fn golden_run(command: &str, threads: usize, out: &Path) -> Output {
    let o = run_in(
        &fixtures().join("panel"),
        &[
            command,
            "--config",
            "golden.toml",
            "--out-dir",
            out.to_str().unwrap(),
            "--threads",
            &threads.to_string(),
        ],
    );
    assert!(o.status.success(), "{command} failed: {}", stderr(&o));
    o
}

/// Data files a golden run of `command` must reproduce byte for byte.
pub fn golden_files(command: &str) -> &'static [&'static str] {
    match command {
        "eigen" => &["eigen_per_day.csv", "eigen_sliding.csv", "acf_per_day.csv", "ccf_per_day.csv"],
        "precursor" => &["market_mode.csv", "indicator.csv", "events.csv", "alignment.txt"],
        _ => &[],
    }
}
