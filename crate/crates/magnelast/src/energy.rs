//! Scalar energy densities for planar magnetoelasticity.
//!
//! The stored elastic energy is
//!
//! ```text
//! stored_energy(F) = stretch_penalty(dist_so(F)) + volume_penalty(det F)
//! ```
//!
//! where the stretch penalty grows quadratically near the rotation group and
//! with power `p` far from it, and the volume penalty is a barrier that blows
//! up as `det F -> 0+` and is `+inf` for `det F <= 0`. Magnetostriction
//! enters through the spontaneous strain of a unit magnetization and its
//! Eulerian counterpart; the coupled density composes the two by a
//! multiplicative split of the deformation gradient. The small-strain limit
//! of all of this is the quadratic form `quadratic_density`.

use crate::tensor::{Mat2, TensorError, Vec2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    Domain(String),
    #[error("magnetization must be unit length (|m| = {len})")]
    UnitLength { len: f64 },
}

/// Spontaneous strain of a unit Lagrangian magnetization:
/// `-m (x) m + I/2`, trace-free with eigenvalues -1/2 along `m` and +1/2
/// across it.
pub fn spontaneous_strain(m: Vec2) -> Result<Mat2, ModelError> {
    let len = (m[0] * m[0] + m[1] * m[1]).sqrt();
    if (len - 1.0).abs() > 1e-10 {
        return Err(ModelError::UnitLength { len });
    }
    Ok(spontaneous_strain_unchecked(m))
}

pub(crate) fn spontaneous_strain_unchecked(m: Vec2) -> Mat2 {
    Mat2::identity() * 0.5 - Mat2::outer(m, m)
}

/// Eulerian spontaneous strain `-(det F)^2 m (x) m + I/2` for a spatial
/// magnetization `m`. When `m` satisfies the normalized volume constraint
/// `m = M / det F` with `|M| = 1`, this equals `spontaneous_strain(M)`.
pub fn spontaneous_strain_eulerian(f: &Mat2, m: Vec2) -> Mat2 {
    let d = f.det();
    Mat2::identity() * 0.5 - Mat2::outer(m, m) * (d * d)
}

/// Quadratic elastic moduli of the stored energy at the identity:
/// `apply(H) = sym H + a^2 (tr H) I`, so that
/// `quadratic(H) = |sym H|^2 + a^2 (tr H)^2`.
#[derive(Debug, Clone, Copy)]
pub struct Moduli {
    pub a: f64,
}

impl Moduli {
    pub fn apply(&self, h: &Mat2) -> Mat2 {
        h.sym() + Mat2::identity() * (self.a * self.a * h.trace())
    }

    pub fn quadratic(&self, h: &Mat2) -> f64 {
        let s = h.sym();
        let t = h.trace();
        s.norm_sq() + self.a * self.a * t * t
    }
}

/// Fourth-order tensor measured by finite differences, stored on the flat
/// basis `F_(2i+j) = e_i (x) e_j`. Produced by [`StoredEnergyModel::moduli_fd_oracle`].
#[derive(Debug, Clone)]
pub struct ModuliTable {
    pub c: [[f64; 4]; 4],
}

impl ModuliTable {
    pub fn quadratic(&self, h: &Mat2) -> f64 {
        let v = [h.m[0][0], h.m[0][1], h.m[1][0], h.m[1][1]];
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.c[i][j] * v[i] * v[j];
            }
        }
        s
    }
}

/// The two-parameter stored-energy model: stretch exponent `p >= 2` and
/// volumetric stiffness `a > 1`.
#[derive(Debug, Clone, Copy)]
pub struct StoredEnergyModel {
    p: f64,
    a: f64,
}

impl Default for StoredEnergyModel {
    fn default() -> Self {
        StoredEnergyModel { p: 4.0, a: 2.0 }
    }
}

impl StoredEnergyModel {
    pub fn new(p: f64, a: f64) -> Result<Self, ModelError> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(ModelError::Domain(format!(
                "stretch exponent p must satisfy p >= 2, got {p}"
            )));
        }
        if !(a > 1.0) || !a.is_finite() {
            return Err(ModelError::Domain(format!(
                "volumetric stiffness a must satisfy a > 1, got {a}"
            )));
        }
        Ok(StoredEnergyModel { p, a })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn moduli(&self) -> Moduli {
        Moduli { a: self.a }
    }

    /// Piecewise stretch penalty: `t^2/2` up to 1, then `t^p/p + 1/2 - 1/p`.
    /// C1 at the break by construction.
    pub fn stretch_penalty(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        if t <= 1.0 {
            0.5 * t * t
        } else {
            t.powf(self.p) / self.p + 0.5 - 1.0 / self.p
        }
    }

    pub fn stretch_penalty_slope(&self, t: f64) -> f64 {
        if t <= 1.0 {
            t
        } else {
            t.powf(self.p - 1.0)
        }
    }

    /// `stretch_penalty_slope(t) / t`, continuous down to `t = 0`.
    pub fn stretch_slope_ratio(&self, t: f64) -> f64 {
        if t <= 1.0 {
            1.0
        } else {
            t.powf(self.p - 2.0)
        }
    }

    /// Volumetric barrier `d^-a - 1 + a ln d`, nonnegative with a strict
    /// minimum of 0 at `d = 1`; `+inf` for `d <= 0`.
    pub fn volume_penalty(&self, d: f64) -> f64 {
        if d <= 0.0 {
            f64::INFINITY
        } else {
            // equals exp(x) - 1 - x at x = -a ln d; the direct form cancels
            // two O(d-1) terms to O((d-1)^2) near d = 1 and the lost digits
            // become visible after the 1/eps^2 amplification upstream
            exp_minus_one_minus_x(-self.a * d.ln())
        }
    }

    pub fn volume_penalty_slope(&self, d: f64) -> f64 {
        debug_assert!(d > 0.0);
        -self.a * (-self.a * d.ln()).exp_m1() / d
    }

    /// Frame-indifferent stored energy; `+inf` when `det F <= 0`.
    pub fn stored_energy(&self, f: &Mat2) -> f64 {
        let d = f.det();
        if d <= 0.0 {
            return f64::INFINITY;
        }
        self.stretch_penalty(f.dist_so()) + self.volume_penalty(d)
    }

    /// Gradient of `stored_energy` with respect to `F`; requires
    /// `det F > 0` (the energy is infinite elsewhere).
    pub fn stored_energy_grad(&self, f: &Mat2) -> Result<Mat2, TensorError> {
        let r = f.project_so()?.mat();
        let ratio = self.stretch_slope_ratio(f.dist_so());
        Ok((*f - r) * ratio + f.cof() * self.volume_penalty_slope(f.det()))
    }

    /// Magnetoelastic density: the stored energy of the elastic part of the
    /// multiplicative split,
    /// `coupled_energy(F, m) = stored_energy(exp(e(F, m)) F)` with `e` the
    /// Eulerian spontaneous strain. Vanishes exactly when `F` undoes the
    /// spontaneous distortion up to a rotation.
    pub fn coupled_energy(&self, f: &Mat2, m: Vec2) -> f64 {
        let e = spontaneous_strain_eulerian(f, m);
        self.stored_energy(&(e.exp() * *f))
    }

    /// Small-strain limit density
    /// `1/2 (|sym(H + E(m))|^2 + a^2 tr(H + E(m))^2)` for a displacement
    /// gradient `H` and unit magnetization `m`.
    pub fn quadratic_density(&self, h: &Mat2, m: Vec2) -> Result<f64, ModelError> {
        let s = *h + spontaneous_strain(m)?;
        Ok(0.5 * self.moduli().quadratic(&s))
    }

    /// Second-difference probe of `stored_energy` at the identity: the raw
    /// Hessian on the flat matrix basis, step 1e-4. Serves as an independent
    /// oracle for [`Moduli`].
    pub fn moduli_fd_oracle(&self) -> ModuliTable {
        let h = 1e-4;
        let basis = |k: usize| {
            let mut b = Mat2::zero();
            b.m[k / 2][k % 2] = 1.0;
            b
        };
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let (bi, bj) = (basis(i), basis(j));
                let fpp = self.stored_energy(&(Mat2::identity() + bi * h + bj * h));
                let fpm = self.stored_energy(&(Mat2::identity() + bi * h - bj * h));
                let fmp = self.stored_energy(&(Mat2::identity() - bi * h + bj * h));
                let fmm = self.stored_energy(&(Mat2::identity() - bi * h - bj * h));
                c[i][j] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            }
        }
        ModuliTable { c }
    }
}

/// `exp(x) - 1 - x` without the subtractive cancellation near `x = 0`.
fn exp_minus_one_minus_x(x: f64) -> f64 {
    if x.abs() > 0.35 {
        return x.exp_m1() - x;
    }
    // invariant: term holds x^k / k! entering iteration k
    let mut term = 0.5 * x * x;
    let mut acc = term;
    let mut k = 3.0;
    while term.abs() > acc.abs() * 1e-18 {
        term *= x / k;
        acc += term;
        k += 1.0;
    }
    acc
}
