//! Small datasets compiled into the library so tests and demos run offline.
//!
//! - `fourclass`: 682 points in `[0, 200]²` labelled by a curved boundary
//!   with an inner hole and an island, matching the size and linear
//!   separability of the classic two-dimensional Fourclass set.
//! - `moons`: 300 two-moon points with Gaussian noise.
//! - `wine`: the 178-sample UCI wine recognition data, cultivar 1 against the rest.
//!
//! `reference_accuracy` is a 20 x 7 accuracy matrix (datasets by models) used to
//! check the rank statistics.

use crate::dataset_io::{parse_csv, Dataset, LoadOptions};
use crate::error::Result;
use crate::evaluation::{parse_acc_matrix, AccMatrix};

pub const FOURCLASS_CSV: &str = include_str!("../data/fourclass.csv");
pub const MOONS_CSV: &str = include_str!("../data/moons.csv");
pub const WINE_CSV: &str = include_str!("../data/wine.csv");
pub const REFERENCE_ACC_CSV: &str = include_str!("../data/reference_acc.csv");

pub const NAMES: [&str; 3] = ["fourclass", "moons", "wine"];

fn load(name: &str, text: &str) -> Result<Dataset> {
    parse_csv(text.as_bytes(), &LoadOptions::default())
        .map(|d| d.with_source_id(format!("bundled:{name}")))
}

pub fn fourclass() -> Dataset {
    load("fourclass", FOURCLASS_CSV).expect("bundled fourclass parses")
}

pub fn moons() -> Dataset {
    load("moons", MOONS_CSV).expect("bundled moons parses")
}

pub fn wine() -> Dataset {
    load("wine", WINE_CSV).expect("bundled wine parses")
}

/// Looks up a bundled dataset by name.
pub fn by_name(name: &str) -> Option<Dataset> {
    match name {
        "fourclass" => Some(fourclass()),
        "moons" => Some(moons()),
        "wine" => Some(wine()),
        _ => None,
    }
}

pub fn reference_accuracy() -> AccMatrix {
    parse_acc_matrix(REFERENCE_ACC_CSV.as_bytes()).expect("bundled accuracy matrix parses")
}
