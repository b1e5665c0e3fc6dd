//! Catalog of body-force and applied-field profiles.
//!
//! Every profile reports its value and spatial Jacobian; the Jacobian feeds
//! the displacement sensitivity of field work evaluated on the deformed
//! placement.

use crate::tensor::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// `amplitude * exp(-|x - center|^2 / (2 sigma^2))`.
    GaussianBump {
        amplitude: [f64; 2],
        center: [f64; 2],
        sigma: f64,
    },
    /// `(alpha x_2, 0)`.
    Shear {
        alpha: f64,
    },
}

impl FieldSpec {
    pub fn value(&self, x: Vec2) -> Vec2 {
        match self {
            FieldSpec::Zero => [0.0, 0.0],
            FieldSpec::Constant { value } => *value,
            FieldSpec::GaussianBump {
                amplitude,
                center,
                sigma,
            } => {
                let g = gauss(x, *center, *sigma);
                [amplitude[0] * g, amplitude[1] * g]
            }
            FieldSpec::Shear { alpha } => [alpha * x[1], 0.0],
        }
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        match self {
            FieldSpec::Zero | FieldSpec::Constant { .. } => Mat2::zero(),
            FieldSpec::GaussianBump {
                amplitude,
                center,
                sigma,
            } => {
                let g = gauss(x, *center, *sigma);
                let s2 = sigma * sigma;
                let dg = [-(x[0] - center[0]) / s2 * g, -(x[1] - center[1]) / s2 * g];
                Mat2::new(
                    amplitude[0] * dg[0],
                    amplitude[0] * dg[1],
                    amplitude[1] * dg[0],
                    amplitude[1] * dg[1],
                )
            }
            FieldSpec::Shear { alpha } => Mat2::new(0.0, *alpha, 0.0, 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FieldSpec::Zero => true,
            FieldSpec::Constant { value } => *value == [0.0, 0.0],
            _ => false,
        }
    }
}

fn gauss(x: Vec2, c: Vec2, sigma: f64) -> f64 {
    let d = [(x[0] - c[0]) / sigma, (x[1] - c[1]) / sigma];
    (-0.5 * (d[0] * d[0] + d[1] * d[1])).exp()
}
