#![allow(dead_code)]

use std::path::PathBuf;

use freqstab_core::io;
use freqstab_core::model::{build_system, SystemConfig};
use freqstab_core::{ReferenceAnchor, TwoAreaSystem};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn reference_model() -> TwoAreaSystem {
    io::read_system(&data_dir().join("reference_model.json")).expect("shipped model")
}

pub fn anchor() -> ReferenceAnchor {
    io::read_anchor(&data_dir().join("anchor.json")).expect("shipped anchor")
}

/// Model from inline JSON.
pub fn system(json: &str) -> TwoAreaSystem {
    let cfg: SystemConfig = serde_json::from_str(json).expect("test model json");
    build_system(&cfg).expect("valid test model")
}

/// Two areas joined by a tie of coefficient `t`; IP carries one block of each
/// governor kind, CE a single steam unit.
pub fn mixed_system(t: f64) -> TwoAreaSystem {
    system(&format!(
        r#"{{
          "base": {{"s_base": 10.0, "f0": 50.0}},
          "area_ip": {{"h": 6.0, "d": 1.2, "blocks": [
            {{"name": "coal", "kind": "steam_tgov1", "pg": 0.3, "h_contrib": 1.5,
              "governor": {{"r": 0.25, "tg": 0.3, "t2": 2.1, "t3": 7.0}}}},
            {{"name": "ccgt", "kind": "gas_gast", "pg": 0.4, "h_contrib": 1.0,
              "governor": {{"r": 0.3, "tg": 0.3, "t2": 0.5, "t3": 3.0, "lmax": 0.5, "kt": 2.0}}}},
            {{"name": "hydro", "kind": "hydro_classic", "pg": 0.3, "h_contrib": 0.9,
              "governor": {{"r": 0.3, "tg": 0.3, "rt": 1.2, "tr": 5.0, "tw": 1.5}}}}
          ]}},
          "area_ce": {{"h": 60.0, "d": 8.0, "blocks": [
            {{"name": "steam", "kind": "steam_tgov1", "pg": 2.0, "h_contrib": 30.0,
              "governor": {{"r": 0.03, "tg": 0.3, "t2": 2.1, "t3": 7.0}}}}
          ]}},
          "tie": {{"t_coeff": {t}}}
        }}"#
    ))
}
