//! Bundled model fixtures and frozen reference values.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::model::{validate_model, ModelError, ModelSpec, ValidatedModel};
use crate::verify::DichotomySettings;

pub const NAMES: [&str; 8] =
    ["det2", "yule1", "sym2", "asym2", "heavy", "heavy-multitype", "bounded-sym2", "gw15"];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "det2" => include_str!("../fixtures/det2.json"),
        "yule1" => include_str!("../fixtures/yule1.json"),
        "sym2" => include_str!("../fixtures/sym2.json"),
        "asym2" => include_str!("../fixtures/asym2.json"),
        "heavy" => include_str!("../fixtures/heavy.json"),
        "heavy-multitype" => include_str!("../fixtures/heavy-multitype.json"),
        "bounded-sym2" => include_str!("../fixtures/bounded-sym2.json"),
        "gw15" => include_str!("../fixtures/gw15.json"),
        _ => return None,
    })
}

pub fn spec(name: &str) -> Result<ModelSpec, ModelError> {
    let text = source(name).ok_or_else(|| ModelError::UnknownFixture(name.to_owned()))?;
    Ok(serde_json::from_str(text).expect("bundled fixture parses"))
}

pub fn model(name: &str) -> Result<ValidatedModel, ModelError> {
    validate_model(&spec(name)?)
}

#[derive(Debug, Clone, Deserialize)]
pub struct EigenValues {
    pub alpha: f64,
    pub pi: Vec<f64>,
    pub h: Vec<f64>,
    pub beta: f64,
    pub nu: Vec<f64>,
    pub spine_kernel: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Release {
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleValues {
    pub asym2: EigenValues,
    pub release: Release,
    pub dichotomy: BTreeMap<String, DichotomySettings>,
}

pub fn oracle_values() -> OracleValues {
    toml::from_str(include_str!("../fixtures/oracle_values.toml")).expect("oracle values parse")
}
