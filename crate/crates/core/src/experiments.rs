//! placeholder
use crate::lti::SystemModel;
use crate::matkit::Mat;

/// Example system used across tests.
pub fn example_system() -> SystemModel {
    let a = Mat::from_rows(&[
        &[0.49, 0.49, 0.0, 0.0],
        &[0.0, 0.49, 0.49, 0.0],
        &[0.0, 0.0, 0.49, 0.49],
        &[0.0, 0.0, 0.0, 0.49],
    ]);
    let b = Mat::from_rows(&[&[0.0], &[0.0], &[0.0], &[0.49]]);
    SystemModel::new(a, b).expect("static matrices are consistent")
}

pub fn fmt_g12(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn round_sig(v: f64) -> f64 {
    fmt_g12(v).parse().unwrap()
}
