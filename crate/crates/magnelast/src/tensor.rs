//! Dense 2x2 matrix kernels.
//!
//! Everything the energy densities need from linear algebra lives here:
//! determinants, inverses, singular values, distance to and projection onto
//! the rotation group SO(2), and the matrix exponential. All of it is
//! closed-form except `exp`, which uses scaling and squaring with a
//! fixed-order Taylor kernel.
//!
//! The closed forms exploit the planar identities
//! `sigma1 + sigma2 = sqrt(|F|^2 + 2 det F)` (det F >= 0) and
//! `sigma1 - sigma2 = sqrt(|F|^2 - 2 |det F|)`, which combine into the single
//! expression `dist_so(F)^2 = |F|^2 + 2 - 2 sqrt(|F|^2 + 2 det F)` valid for
//! either determinant sign.

use thiserror::Error;

/// Determinants at or below this magnitude are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("matrix is numerically singular (det = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("matrix is not orientation-preserving (det = {det:e})")]
    NotOrientationPreserving { det: f64 },
}

pub type Vec2 = [f64; 2];

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

/// Counterclockwise quarter turn of `a`.
pub fn perp(a: Vec2) -> Vec2 {
    [-a[1], a[0]]
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const fn new(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Mat2 {
            m: [[m00, m01], [m10, m11]],
        }
    }

    pub const fn zero() -> Self {
        Mat2::new(0.0, 0.0, 0.0, 0.0)
    }

    pub const fn identity() -> Self {
        Mat2::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    /// Outer product `a (x) b`.
    pub fn outer(a: Vec2, b: Vec2) -> Self {
        Mat2::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|x| x.is_finite())
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn sym(&self) -> Mat2 {
        let off = 0.5 * (self.m[0][1] + self.m[1][0]);
        Mat2::new(self.m[0][0], off, off, self.m[1][1])
    }

    /// Cofactor matrix; satisfies `d det(F)[H] = cof(F) : H`.
    pub fn cof(&self) -> Mat2 {
        Mat2::new(self.m[1][1], -self.m[1][0], -self.m[0][1], self.m[0][0])
    }

    pub fn norm_sq(&self) -> f64 {
        self.m.iter().flatten().map(|x| x * x).sum()
    }

    /// Frobenius norm.
    pub fn frob(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, other: &Mat2) -> f64 {
        let mut s = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                s += self.m[r][c] * other.m[r][c];
            }
        }
        s
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Left-multiplies a row vector: returns `v^T A` as a vector.
    pub fn apply_transposed(&self, v: Vec2) -> Vec2 {
        [
            self.m[0][0] * v[0] + self.m[1][0] * v[1],
            self.m[0][1] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn inverse(&self) -> Result<Mat2, TensorError> {
        let d = self.det();
        if d.abs() <= SINGULAR_TOL {
            return Err(TensorError::SingularMatrix { det: d });
        }
        let inv = 1.0 / d;
        Ok(Mat2::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    /// Singular values in decreasing order, via the planar sum/difference
    /// closed forms (no iteration).
    pub fn singular_values(&self) -> [f64; 2] {
        let n2 = self.norm_sq();
        let d2 = 2.0 * self.det().abs();
        let splus = (n2 + d2).max(0.0).sqrt();
        let sminus = (n2 - d2).max(0.0).sqrt();
        [0.5 * (splus + sminus), 0.5 * (splus - sminus)]
    }

    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        self.singular_values()[0]
    }

    /// Frobenius distance to SO(2). For det F > 0 this is
    /// `sqrt((s1-1)^2 + (s2-1)^2)`; for det F <= 0 the nearest rotation flips
    /// the small singular direction and the distance becomes
    /// `sqrt((s1-1)^2 + (s2+1)^2)`. One expression covers both cases.
    pub fn dist_so(&self) -> f64 {
        let d = self.det();
        let n2 = self.norm_sq();
        if d > 0.0 {
            // the nearest rotation is the polar factor; forming F - R keeps
            // full absolute accuracy near rotations, where the closed-form
            // square root cancels catastrophically
            let s = (n2 + 2.0 * d).sqrt();
            let c = self.cof();
            let mut acc = 0.0;
            for r in 0..2 {
                for k in 0..2 {
                    let diff = self.m[r][k] - (self.m[r][k] + c.m[r][k]) / s;
                    acc += diff * diff;
                }
            }
            return acc.sqrt();
        }
        let s = (n2 + 2.0 * d).max(0.0).sqrt();
        (n2 + 2.0 - 2.0 * s).max(0.0).sqrt()
    }

    /// Nearest rotation in Frobenius norm (the polar factor). Defined only
    /// for orientation-preserving input.
    pub fn project_so(&self) -> Result<Rotation2, TensorError> {
        let d = self.det();
        if d <= 0.0 {
            return Err(TensorError::NotOrientationPreserving { det: d });
        }
        // F + cof(F) = (s1 + s2) * R with R the polar rotation.
        let s = (self.norm_sq() + 2.0 * d).sqrt();
        let c = (self.m[0][0] + self.m[1][1]) / s;
        let sn = (self.m[1][0] - self.m[0][1]) / s;
        Ok(Rotation2 { cos: c, sin: sn })
    }

    /// Matrix exponential by scaling and squaring; the Taylor kernel at
    /// order 14 leaves a relative remainder ~1e-16 for the scaled argument.
    pub fn exp(&self) -> Mat2 {
        debug_assert!(self.is_finite());
        let norm = self.frob();
        let k = if norm <= 0.5 {
            0
        } else {
            (norm / 0.5).log2().ceil() as i32
        };
        let b = *self * 0.5f64.powi(k);
        let mut e = Mat2::identity();
        for m in (1..=14).rev() {
            e = Mat2::identity() + (b * e) * (1.0 / m as f64);
        }
        for _ in 0..k {
            e = e * e;
        }
        e
    }
}

impl std::ops::Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Mat2 { m: r }
    }
}

impl std::ops::Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }
}

impl std::ops::Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self * -1.0
    }
}

/// Neumaier compensated accumulator: keeps full precision when summing many
/// element contributions, where a plain running sum loses O(sqrt(n)) ulps.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A rotation stored as its cosine/sine pair; always orthogonal with
/// determinant one by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2 {
    cos: f64,
    sin: f64,
}

impl Rotation2 {
    pub fn from_angle(theta: f64) -> Self {
        Rotation2 {
            cos: theta.cos(),
            sin: theta.sin(),
        }
    }

    pub fn angle(&self) -> f64 {
        self.sin.atan2(self.cos)
    }

    pub fn mat(&self) -> Mat2 {
        Mat2::new(self.cos, -self.sin, self.sin, self.cos)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        self.mat().apply(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut impl Rng, scale: f64) -> Mat2 {
        Mat2::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn det_and_inverse() {
        let f = Mat2::new(2.0, 1.0, 0.5, 3.0);
        assert_eq!(f.det(), 5.5);
        let inv = f.inverse().unwrap();
        let id = f * inv;
        assert_relative_eq!(id.m[0][0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(id.m[1][1], 1.0, max_relative = 1e-14);
        assert!(id.m[0][1].abs() < 1e-14 && id.m[1][0].abs() < 1e-14);
    }

    #[test]
    fn inverse_rejects_singular() {
        let f = Mat2::new(1.0, 2.0, 0.5, 1.0);
        assert!(matches!(
            f.inverse(),
            Err(TensorError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn singular_values_match_eigen_oracle() {
        // Oracle: eigenvalues of F^T F by the quadratic formula.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let f = random_mat(&mut rng, 3.0);
            let ftf = f.transpose() * f;
            let tr = ftf.trace();
            let dt = ftf.det().max(0.0);
            let disc = (tr * tr - 4.0 * dt).max(0.0).sqrt();
            let l1 = 0.5 * (tr + disc);
            let l2 = 0.5 * (tr - disc).max(0.0);
            let [s1, s2] = f.singular_values();
            assert_relative_eq!(s1, l1.sqrt(), max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(s2, l2.sqrt(), max_relative = 1e-10, epsilon = 1e-10);
            // product of singular values is |det|
            assert_relative_eq!(s1 * s2, f.det().abs(), max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(f.operator_norm(), s1, max_relative = 1e-14);
        }
    }

    #[test]
    fn operator_norm_bounds_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..500 {
            let f = random_mat(&mut rng, 2.0);
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            assert!(norm(f.apply(v)) <= f.operator_norm() * norm(v) + 1e-12);
        }
    }

    #[test]
    fn dist_so_known_values() {
        assert_eq!(Mat2::identity().dist_so(), 0.0);
        for k in 0..32 {
            let r = Rotation2::from_angle(k as f64 * 0.2).mat();
            assert!(r.dist_so() < 1e-12);
        }
        assert_relative_eq!((Mat2::identity() * 2.0).dist_so(), 2f64.sqrt(), max_relative = 1e-14);
        // reflection: singular values (1,1) with det < 0 ~> distance 2
        assert_relative_eq!(Mat2::diag(1.0, -1.0).dist_so(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn dist_so_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..200 {
            let f = random_mat(&mut rng, 2.0);
            let mut best = f64::INFINITY;
            for k in 0..10_000 {
                let th = 2.0 * std::f64::consts::PI * (k as f64) / 10_000.0;
                let d = (f - Rotation2::from_angle(th).mat()).frob();
                best = best.min(d);
            }
            assert!(
                (f.dist_so() - best).abs() < 1e-6,
                "dist {} vs brute {}",
                f.dist_so(),
                best
            );
        }
    }

    #[test]
    fn dist_so_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..500 {
            let f = random_mat(&mut rng, 2.0);
            let q = Rotation2::from_angle(rng.gen_range(-3.0..3.0)).mat();
            assert_relative_eq!((q * f).dist_so(), f.dist_so(), max_relative = 1e-11, epsilon = 1e-11);
        }
    }

    #[test]
    fn project_so_is_nearest_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut done = 0;
        while done < 500 {
            let f = random_mat(&mut rng, 2.0);
            if f.det() <= 0.01 {
                continue;
            }
            done += 1;
            let r = f.project_so().unwrap().mat();
            assert!((r.transpose() * r - Mat2::identity()).frob() < 1e-12);
            assert_relative_eq!(r.det(), 1.0, max_relative = 1e-12);
            assert!(((f - r).frob() - f.dist_so()).abs() < 1e-10);
        }
    }

    #[test]
    fn project_so_fixes_rotations() {
        for k in 0..16 {
            let r = Rotation2::from_angle(0.4 * k as f64);
            let p = r.mat().project_so().unwrap();
            assert!((p.mat() - r.mat()).frob() < 1e-15);
        }
    }

    #[test]
    fn project_so_small_antisymmetric() {
        // I + theta*J is conformal; its polar rotation has angle atan(theta),
        // within O(theta^3) of theta itself.
        let a21 = 1e-2;
        let f = Mat2::new(1.0, -a21, a21, 1.0);
        let ang = f.project_so().unwrap().angle();
        assert!((ang - a21).abs() < 1e-6);
        assert_relative_eq!(ang, a21.atan(), max_relative = 1e-12);
    }

    #[test]
    fn project_so_rejects_flips() {
        let f = Mat2::diag(1.0, -1.0);
        assert!(matches!(
            f.project_so(),
            Err(TensorError::NotOrientationPreserving { .. })
        ));
    }

    // Closed-form oracle for traceless matrices: A^2 = -det(A) I, so
    // exp(A) = cos(w) I + sinc(w) A with w^2 = det A, hyperbolic for det A < 0.
    fn exp_traceless_oracle(a: &Mat2) -> Mat2 {
        assert!(a.trace().abs() < 1e-12);
        let d = a.det();
        if d > 0.0 {
            let w = d.sqrt();
            Mat2::identity() * w.cos() + *a * (w.sin() / w)
        } else if d < 0.0 {
            let w = (-d).sqrt();
            Mat2::identity() * w.cosh() + *a * (w.sinh() / w)
        } else {
            Mat2::identity() + *a
        }
    }

    #[test]
    fn exp_matches_traceless_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let x = rng.gen_range(-2.0..2.0);
            let y = rng.gen_range(-2.0..2.0);
            let z = rng.gen_range(-2.0..2.0);
            let a = Mat2::new(x, y, z, -x);
            let e = a.exp();
            let o = exp_traceless_oracle(&a);
            assert!(
                (e - o).frob() <= 1e-12 * o.frob().max(1.0),
                "exp mismatch {:?}",
                a
            );
        }
    }

    #[test]
    fn exp_diagonal_and_rotation_generator() {
        let e = Mat2::diag(-0.5, 0.5).exp();
        assert_relative_eq!(e.m[0][0], (-0.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(e.m[1][1], 0.5f64.exp(), max_relative = 1e-14);
        assert!(e.m[0][1].abs() < 1e-15 && e.m[1][0].abs() < 1e-15);

        let th = 0.7;
        let j = Mat2::new(0.0, -th, th, 0.0);
        let r = j.exp();
        assert!((r - Rotation2::from_angle(th).mat()).frob() < 1e-13);
    }

    #[test]
    fn compensated_sum_survives_cancellation_and_length() {
        // Kahan's variant fails this alternating giant pair; Neumaier's does not
        let mut s = CompensatedSum::new();
        for &x in &[1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.total(), 2.0);

        // a plain running sum absorbs every tiny addend into 1.0 and returns 1
        let mut s = CompensatedSum::new();
        s.add(1.0);
        let tiny = (2.0f64).powi(-53);
        for _ in 0..1_000_000 {
            s.add(tiny);
        }
        assert_relative_eq!(s.total() - 1.0, 1e6 * tiny, max_relative = 1e-12);
    }

    #[test]
    fn exp_determinant_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let a = random_mat(&mut rng, 2.5);
            if a.frob() > 5.0 {
                continue;
            }
            let e = a.exp();
            assert_relative_eq!(e.det(), a.trace().exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn exp_inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..500 {
            let a = random_mat(&mut rng, 1.5);
            let p = a.exp() * (-a).exp();
            assert!((p - Mat2::identity()).frob() < 1e-12);
        }
    }
}
