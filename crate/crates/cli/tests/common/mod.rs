#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cotag_cli::service::{router, serve, Session};

pub fn cotag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cotag"))
        .args(args)
        .env_remove("COTAG_CONFIG")
        .output()
        .expect("run cotag")
}

pub fn ok(args: &[&str]) -> String {
    let out = cotag(args);
    assert!(
        out.status.success(),
        "cotag {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn code(args: &[&str]) -> i32 {
    cotag(args).status.code().expect("exit code")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic corpus split into `seed`, `test` and `raw` parts under `dir`.
pub fn synth(dir: &Path, seed: u64, split: &str) -> PathBuf {
    let out = dir.join(format!("synth{seed}"));
    ok(&["synth-gen", "--out", s(&out), "--seed", &seed.to_string(), "--split", split]);
    out
}

/// Serves `checkpoint` on an ephemeral port inside the current runtime.
pub async fn start(checkpoint: &Path, static_dir: Option<PathBuf>) -> (SocketAddr, tokio::task::JoinHandle<()>) {
    let session = Session::open(checkpoint, 3).expect("open session");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = tokio::spawn(async move {
        serve(listener, router(session, static_dir)).await.unwrap();
    });
    (addr, handle)
}
