//! Shared fixtures for the benchmarks in `benches/`.

use std::path::PathBuf;

use freqstab_core::{io, ReferenceAnchor, TwoAreaSystem};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn reference_model() -> TwoAreaSystem {
    io::read_system(&data_dir().join("reference_model.json")).expect("shipped model")
}

pub fn anchor() -> ReferenceAnchor {
    io::read_anchor(&data_dir().join("anchor.json")).expect("shipped anchor")
}
