#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn golden(name: &str) -> PathBuf {
    fixture("golden").join(name)
}

pub fn convsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convsearch"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn convsearch")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
