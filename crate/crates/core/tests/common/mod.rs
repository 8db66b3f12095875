#![allow(dead_code)]

use std::path::PathBuf;

use mqw_core::config::{load_config, Config};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Every corpus file, sorted by name.
pub fn corpus() -> Vec<(String, Config)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let cfg = load_config(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, cfg)
        })
        .collect()
}

pub fn corpus_model(name: &str) -> Config {
    load_config(corpus_dir().join(format!("{name}.json"))).unwrap()
}
