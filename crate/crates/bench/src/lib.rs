//! Fixtures shared by the benchmarks under `benches/`.

use umsa_core::models::OuModel;
use umsa_core::{load_observations, PayloadKind, StateSpaceData};

pub const OU_THETA: [f64; 3] = [-0.3, 0.8, 0.55];

/// OU model and the ten-observation data set used by the core tests.
pub fn ou_fixture() -> (OuModel, StateSpaceData) {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/ou_t10.csv");
    let file = std::fs::File::open(path).expect("fixture");
    let obs = load_observations(file, PayloadKind::Real).expect("fixture parses");
    (OuModel::new(0.0, Some(-0.1)), OuModel::data(0.0, &obs).unwrap())
}
