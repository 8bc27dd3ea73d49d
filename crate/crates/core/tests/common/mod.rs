#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Oracle {
    pub page: Vec<OraclePage>,
}

#[derive(Debug, Deserialize)]
pub struct OraclePage {
    pub file: String,
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn oracle() -> Oracle {
    let text = std::fs::read_to_string(fixtures_dir().join("oracle.toml")).expect("oracle table");
    toml::from_str(&text).expect("oracle table parses")
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every page of the corpus with its source.
pub fn corpus() -> Vec<(OraclePage, String)> {
    oracle()
        .page
        .into_iter()
        .map(|p| {
            let html = read_fixture(&p.file);
            (p, html)
        })
        .collect()
}
