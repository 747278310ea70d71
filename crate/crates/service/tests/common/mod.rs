#![allow(dead_code)]

use std::path::{Path, PathBuf};

use choreo_service::cli::{run, Cli};
use clap::Parser;

pub const SMALL_CONFIG: &str = r#"
seed = 5

[motif]
k = 6
dim = 10
restarts = 2

[neural]
hidden = 8
layers = 2
window = 20
batch = 2
learning_rate = 0.003

[training]
iterations = 3
"#;

pub struct Project {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

impl Project {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Runs `choreo --config <project> args..` and returns its stdout.
    pub fn run(&self, args: &[&str]) -> choreo_service::Result<String> {
        let mut argv = vec!["choreo", "--config", self.config.to_str().unwrap()];
        argv.extend_from_slice(args);
        run_cli(&argv)
    }
}

pub fn run_cli(argv: &[&str]) -> choreo_service::Result<String> {
    let cli = Cli::try_parse_from(argv).expect("valid arguments");
    let mut out = Vec::new();
    run(cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

/// Synthetic corpus written, ingested and clustered in a fresh directory.
pub fn project() -> Project {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("choreo.toml");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let p = Project { dir, config };
    let data = p.path("data");
    p.run(&["demo", "--out", data.to_str().unwrap(), "--dances", "4", "--prototypes", "5", "--min-beats", "16", "--max-beats", "20"])
        .unwrap();
    p.run(&["ingest", data.join("manifest.json").to_str().unwrap()]).unwrap();
    p.run(&["cluster"]).unwrap();
    p
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
