use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Twist, Units, WaveGrid};
use crate::error::{Error, Result};
use crate::linalg::CMat;

pub const STATE_SCHEMA: &str = "topobohm.state/v1";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TwistJson {
    Scalar {
        beta: f64,
    },
    /// Row-major entries of Γ as `[re, im]`.
    Matrix {
        generator: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateJson {
    schema: String,
    space: String,
    n_points: usize,
    components: usize,
    units: Units,
    twist: TwistJson,
    /// One array of `[re, im]` pairs per component, holding χ.
    values: Vec<Vec<[f64; 2]>>,
}

fn pair(z: &Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn state_to_json(state: &WaveGrid) -> serde_json::Value {
    let twist = match state.twist().beta() {
        Some(beta) => TwistJson::Scalar { beta },
        None => {
            let g = state.twist().generator();
            TwistJson::Matrix {
                generator: (0..g.nrows())
                    .map(|i| (0..g.ncols()).map(|j| pair(&g[(i, j)])).collect())
                    .collect(),
            }
        }
    };
    let doc = StateJson {
        schema: STATE_SCHEMA.into(),
        space: "ring".into(),
        n_points: state.n_points(),
        components: state.components(),
        units: *state.units(),
        twist,
        values: state.chi().iter().map(|c| c.iter().map(pair).collect()).collect(),
    };
    serde_json::to_value(doc).expect("state serializes")
}

pub fn state_from_json(value: &serde_json::Value) -> Result<WaveGrid> {
    let doc: StateJson = serde_path_to_error::deserialize(value.clone()).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if doc.schema != STATE_SCHEMA {
        return Err(Error::Schema {
            path: "schema".into(),
            message: format!("expected {STATE_SCHEMA}, got {}", doc.schema),
        });
    }
    if doc.space != "ring" {
        return Err(Error::Schema {
            path: "space".into(),
            message: format!("unsupported space {}", doc.space),
        });
    }
    if doc.values.len() != doc.components || doc.values.iter().any(|c| c.len() != doc.n_points) {
        return Err(Error::Schema {
            path: "values".into(),
            message: "shape does not match n_points × components".into(),
        });
    }
    let twist = match doc.twist {
        TwistJson::Scalar { beta } => Twist::scalar(beta, doc.components),
        TwistJson::Matrix { generator } => {
            let k = generator.len();
            if k != doc.components || generator.iter().any(|r| r.len() != k) {
                return Err(Error::Schema {
                    path: "twist.generator".into(),
                    message: "generator must be components × components".into(),
                });
            }
            let m = CMat::from_fn(k, k, |i, j| Complex64::new(generator[i][j][0], generator[i][j][1]));
            Twist::matrix(&m)?
        }
    };
    let chi = doc
        .values
        .iter()
        .map(|c| c.iter().map(|p| Complex64::new(p[0], p[1])).collect())
        .collect();
    WaveGrid::from_chi(chi, twist, doc.units)
}

/// Writes a state snapshot atomically (temporary file, then rename).
pub fn write_state(state: &WaveGrid, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&state_to_json(state))?;
    crate::output::write_atomic(path, text.as_bytes())
}

pub fn read_state(path: &Path) -> Result<WaveGrid> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    state_from_json(&v)
}

#[cfg(test)]
mod tests {
    use super::super::gaussian_packet;
    use super::*;
    use crate::linalg::{expm_hermitian, pauli_x};

    #[test]
    fn round_trip_scalar_and_matrix() {
        let n = 16;
        let s = WaveGrid::from_chi(
            vec![gaussian_packet(n, 1.0, 0.5, 1.0)],
            Twist::scalar(7.0, 1),
            Units::default(),
        )
        .unwrap();
        let back = state_from_json(&state_to_json(&s)).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-15);
        assert_eq!(back.twist().beta(), Some(7.0));

        let t = Twist::matrix(&expm_hermitian(&pauli_x(), 0.4)).unwrap();
        let s = WaveGrid::from_chi(
            vec![gaussian_packet(n, 1.0, 0.5, 1.0), gaussian_packet(n, 3.0, 0.5, 0.0)],
            t,
            Units::default(),
        )
        .unwrap();
        let back = state_from_json(&state_to_json(&s)).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn wrong_schema_rejected() {
        let s = WaveGrid::from_chi(
            vec![gaussian_packet(16, 1.0, 0.5, 1.0)],
            Twist::trivial(1),
            Units::default(),
        )
        .unwrap();
        let mut v = state_to_json(&s);
        v["schema"] = "other".into();
        assert!(matches!(state_from_json(&v), Err(Error::Schema { .. })));
        let mut v = state_to_json(&s);
        v["extra"] = 1.into();
        assert!(matches!(state_from_json(&v), Err(Error::Schema { .. })));
    }
}
