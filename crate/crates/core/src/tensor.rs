//! Plane elasticity tensors and symmetric 2×2 matrices.
//!
//! [`ElasticTensor2D`] stores the six independent entries of a fourth-order
//! tensor with full minor and major symmetry. Quadratic forms, stresses and
//! positive-definiteness checks go through the Mandel representation, in which
//! a symmetric strain `ε` maps to `(ε11, ε22, √2 ε12)` and the tensor becomes a
//! symmetric 3×3 matrix.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Symmetric 2×2 matrix (strain or stress).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, yy: 0.0, xy: 0.0 };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    /// Unit strain `ε_ij = ½(e_i ⊗ e_j + e_j ⊗ e_i)`.
    pub fn unit(i: usize, j: usize) -> Self {
        match (i, j) {
            (0, 0) => Self::new(1.0, 0.0, 0.0),
            (1, 1) => Self::new(0.0, 1.0, 0.0),
            (0, 1) | (1, 0) => Self::new(0.0, 0.0, 0.5),
            _ => panic!("index out of range: ({i}, {j})"),
        }
    }

    /// Symmetric part of a 2×2 gradient `[[a00, a01], [a10, a11]]`.
    pub fn sym_of(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Self::new(a00, a11, 0.5 * (a01 + a10))
    }

    pub fn identity() -> Self {
        Self::new(1.0, 1.0, 0.0)
    }

    /// Double contraction `a : b`.
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn mandel(&self) -> [f64; 3] {
        [self.xx, self.yy, SQRT2 * self.xy]
    }

    pub fn from_mandel(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2] / SQRT2)
    }

    /// `Q S Qᵀ` with `Q` the rotation by `alpha`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        let xx = c * c * self.xx - 2.0 * c * s * self.xy + s * s * self.yy;
        let yy = s * s * self.xx + 2.0 * c * s * self.xy + c * c * self.yy;
        let xy = c * s * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        Self::new(xx, yy, xy)
    }

    /// `R(α) diag(λ1, λ2) R(α)ᵀ`.
    pub fn from_eigen(alpha: f64, l1: f64, l2: f64) -> Self {
        Self::new(l1, l2, 0.0).rotated(alpha)
    }

    /// Eigen-decomposition ordered so that `|λ1| ≥ |λ2|`; `α ∈ [0, π)` is the
    /// angle of the eigenvector belonging to `λ1`. Equal eigenvalues give `α = 0`.
    pub fn eigen(&self) -> StressEigen {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        let lmax = mean + radius;
        let lmin = mean - radius;
        let mut alpha = if radius == 0.0 {
            0.0
        } else {
            0.5 * self.xy.atan2(half_diff)
        };
        let (l1, l2) = if lmin.abs() > lmax.abs() {
            alpha += std::f64::consts::FRAC_PI_2;
            (lmin, lmax)
        } else {
            (lmax, lmin)
        };
        StressEigen {
            alpha: wrap_angle(alpha),
            l1,
            l2,
        }
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, o: Sym2) {
        *self = *self + o;
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.yy - o.yy, self.xy - o.xy)
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        Sym2::new(-self.xx, -self.yy, -self.xy)
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.yy * s, self.xy * s)
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressEigen {
    /// Angle of the dominant eigenvector, in `[0, π)`.
    pub alpha: f64,
    /// Dominant eigenvalue, `|l1| ≥ |l2|`.
    pub l1: f64,
    pub l2: f64,
}

impl StressEigen {
    pub fn reconstruct(&self) -> Sym2 {
        Sym2::from_eigen(self.alpha, self.l1, self.l2)
    }
}

/// Maps an angle into `[0, π)`.
pub fn wrap_angle(alpha: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let a = alpha.rem_euclid(pi);
    if a >= pi {
        0.0
    } else {
        a
    }
}

type Full = [[[[f64; 2]; 2]; 2]; 2];

/// Fourth-order plane elasticity tensor with minor and major symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElasticTensor2D {
    pub c1111: f64,
    pub c2222: f64,
    pub c1122: f64,
    pub c1212: f64,
    pub c1112: f64,
    pub c2212: f64,
}

impl ElasticTensor2D {
    pub const ZERO: ElasticTensor2D = ElasticTensor2D {
        c1111: 0.0,
        c2222: 0.0,
        c1122: 0.0,
        c1212: 0.0,
        c1112: 0.0,
        c2212: 0.0,
    };

    pub fn new(c1111: f64, c2222: f64, c1122: f64, c1212: f64, c1112: f64, c2212: f64) -> Self {
        Self {
            c1111,
            c2222,
            c1122,
            c1212,
            c1112,
            c2212,
        }
    }

    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        Self::new(lambda + 2.0 * mu, lambda + 2.0 * mu, lambda, mu, 0.0, 0.0)
    }

    /// The identity on symmetric matrices, `I ξ = ξ`.
    pub fn identity() -> Self {
        Self::new(1.0, 1.0, 0.0, 0.5, 0.0, 0.0)
    }

    pub fn entries(&self) -> [f64; 6] {
        [
            self.c1111, self.c2222, self.c1122, self.c1212, self.c1112, self.c2212,
        ]
    }

    pub fn from_entries(e: [f64; 6]) -> Self {
        Self::new(e[0], e[1], e[2], e[3], e[4], e[5])
    }

    /// Entry `C_ijkl` with zero-based indices.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let pair = |a: usize, b: usize| -> usize {
            match (a, b) {
                (0, 0) => 0,
                (1, 1) => 1,
                _ => 2,
            }
        };
        let (p, q) = (pair(i, j), pair(k, l));
        match (p.min(q), p.max(q)) {
            (0, 0) => self.c1111,
            (1, 1) => self.c2222,
            (0, 1) => self.c1122,
            (2, 2) => self.c1212,
            (0, 2) => self.c1112,
            (1, 2) => self.c2212,
            _ => unreachable!(),
        }
    }

    fn to_full(self) -> Full {
        let mut f = [[[[0.0; 2]; 2]; 2]; 2];
        for (i, fi) in f.iter_mut().enumerate() {
            for (j, fij) in fi.iter_mut().enumerate() {
                for (k, fijk) in fij.iter_mut().enumerate() {
                    for (l, v) in fijk.iter_mut().enumerate() {
                        *v = self.get(i, j, k, l);
                    }
                }
            }
        }
        f
    }

    fn from_full(f: &Full) -> Self {
        // average the symmetric copies so round-off never breaks symmetry
        let c1112 = 0.25 * (f[0][0][0][1] + f[0][0][1][0] + f[0][1][0][0] + f[1][0][0][0]);
        let c2212 = 0.25 * (f[1][1][0][1] + f[1][1][1][0] + f[0][1][1][1] + f[1][0][1][1]);
        let c1212 = 0.25 * (f[0][1][0][1] + f[0][1][1][0] + f[1][0][0][1] + f[1][0][1][0]);
        let c1122 = 0.5 * (f[0][0][1][1] + f[1][1][0][0]);
        Self::new(f[0][0][0][0], f[1][1][1][1], c1122, c1212, c1112, c2212)
    }

    fn transform(&self, q: [[f64; 2]; 2]) -> Full {
        let c = self.to_full();
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for (m, om) in out.iter_mut().enumerate() {
            for (n, omn) in om.iter_mut().enumerate() {
                for (o, omno) in omn.iter_mut().enumerate() {
                    for (p, v) in omno.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                for k in 0..2 {
                                    for l in 0..2 {
                                        s += q[m][i] * q[n][j] * q[o][k] * q[p][l] * c[i][j][k][l];
                                    }
                                }
                            }
                        }
                        *v = s;
                    }
                }
            }
        }
        out
    }

    /// `C'_mnop = Q_mi Q_nj Q_ok Q_pl C_ijkl` with `Q = Q(alpha)`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self::from_full(&self.transform([[c, -s], [s, c]]))
    }

    /// Derivative of `alpha ↦ self.rotated(alpha)`.
    pub fn rotation_derivative(&self, alpha: f64) -> Self {
        // d/dβ R[β]C at β = 0, then rotate: R[α+β] = R[α]R[β]
        let c = self.to_full();
        let gen = [[0.0, -1.0], [1.0, 0.0]];
        let mut d = [[[[0.0; 2]; 2]; 2]; 2];
        for m in 0..2 {
            for n in 0..2 {
                for o in 0..2 {
                    for p in 0..2 {
                        let mut s = 0.0;
                        for r in 0..2 {
                            s += gen[m][r] * c[r][n][o][p]
                                + gen[n][r] * c[m][r][o][p]
                                + gen[o][r] * c[m][n][r][p]
                                + gen[p][r] * c[m][n][o][r];
                        }
                        d[m][n][o][p] = s;
                    }
                }
            }
        }
        Self::from_full(&d).rotated(alpha)
    }

    /// Stress `C ε`.
    pub fn apply(&self, e: &Sym2) -> Sym2 {
        Sym2::new(
            self.c1111 * e.xx + self.c1122 * e.yy + 2.0 * self.c1112 * e.xy,
            self.c1122 * e.xx + self.c2222 * e.yy + 2.0 * self.c2212 * e.xy,
            self.c1112 * e.xx + self.c2212 * e.yy + 2.0 * self.c1212 * e.xy,
        )
    }

    /// `C a : b`.
    pub fn bilinear(&self, a: &Sym2, b: &Sym2) -> f64 {
        self.apply(a).ddot(b)
    }

    /// `C ξ : ξ`.
    pub fn energy(&self, e: &Sym2) -> f64 {
        self.bilinear(e, e)
    }

    pub fn mandel(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.c1111,
            self.c1122,
            SQRT2 * self.c1112,
            self.c1122,
            self.c2222,
            SQRT2 * self.c2212,
            SQRT2 * self.c1112,
            SQRT2 * self.c2212,
            2.0 * self.c1212,
        )
    }

    pub fn from_mandel(m: &Matrix3<f64>) -> Self {
        Self::new(
            m[(0, 0)],
            m[(1, 1)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * m[(2, 2)],
            0.5 * (m[(0, 2)] + m[(2, 0)]) / SQRT2,
            0.5 * (m[(1, 2)] + m[(2, 1)]) / SQRT2,
        )
    }

    /// Smallest eigenvalue of the quadratic form on symmetric matrices.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.mandel()).eigenvalues.min()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    /// Solves `C ε = σ` for `ε`. Returns `None` if `C` is singular.
    pub fn solve(&self, sigma: &Sym2) -> Option<Sym2> {
        let m = self.mandel();
        let lu = m.lu();
        let rhs = nalgebra::Vector3::from(sigma.mandel());
        lu.solve(&rhs).map(|v| Sym2::from_mandel([v[0], v[1], v[2]]))
    }

    /// `C + eps · I`.
    pub fn regularized(&self, eps: f64) -> Self {
        *self + Self::identity() * eps
    }

    /// Frobenius norm of the full tensor.
    pub fn norm(&self) -> f64 {
        self.mandel().norm()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for ElasticTensor2D {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.entries(), o.entries());
        Self::from_entries(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl Sub for ElasticTensor2D {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (self.entries(), o.entries());
        Self::from_entries(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl Mul<f64> for ElasticTensor2D {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        let a = self.entries();
        Self::from_entries(std::array::from_fn(|i| a[i] * s))
    }
}

/// Isotropic material given by its Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicMaterial {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicMaterial {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, crate::Error> {
        if !(mu > 0.0 && lambda + mu > 0.0) {
            return Err(crate::Error::InvalidInput(format!(
                "Lamé parameters must satisfy mu > 0 and lambda + mu > 0 (got lambda={lambda}, mu={mu})"
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// `λ = μ = 1`.
    pub fn unit() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
        }
    }

    pub fn tensor(&self) -> ElasticTensor2D {
        ElasticTensor2D::isotropic(self.lambda, self.mu)
    }

    /// Planar bulk modulus `κ = λ + μ`.
    pub fn bulk(&self) -> f64 {
        self.lambda + self.mu
    }

    /// Plane-strain Poisson ratio.
    pub fn poisson(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lambda: self.lambda * s,
            mu: self.mu * s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn aniso() -> ElasticTensor2D {
        ElasticTensor2D::new(5.0, 3.0, 1.2, 0.9, 0.3, -0.4)
    }

    #[test]
    fn isotropic_is_rotation_invariant() {
        let a = ElasticTensor2D::isotropic(1.0, 1.0);
        for k in 0..10 {
            let r = a.rotated(0.37 * k as f64);
            assert!(r.max_abs_diff(&a) < 1e-13);
        }
    }

    #[test]
    fn rotation_by_pi_is_identity() {
        let c = aniso();
        assert!(c.rotated(std::f64::consts::PI).max_abs_diff(&c) < 1e-13);
    }

    #[test]
    fn rotation_composes() {
        let c = aniso();
        let a = c.rotated(0.3).rotated(0.5);
        let b = c.rotated(0.8);
        assert!(a.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn rotated_energy_matches_rotated_strain() {
        let c = aniso();
        let e = Sym2::new(0.3, -0.7, 0.45);
        let alpha = 0.61;
        // (R C)(Q e Qᵀ) : (Q e Qᵀ) = C e : e
        let lhs = c.rotated(alpha).energy(&e.rotated(alpha));
        assert_relative_eq!(lhs, c.energy(&e), epsilon = 1e-13);
    }

    #[test]
    fn rotation_derivative_matches_central_difference() {
        let c = aniso();
        let alpha = 0.4;
        let h = 1e-6;
        let fd = (c.rotated(alpha + h) - c.rotated(alpha - h)) * (0.5 / h);
        let d = c.rotation_derivative(alpha);
        assert!(d.max_abs_diff(&fd) < 1e-8);
    }

    #[test]
    fn mandel_roundtrip_and_quadratic_form() {
        let c = aniso();
        assert_eq!(ElasticTensor2D::from_mandel(&c.mandel()), c);
        let e = Sym2::new(0.2, 0.1, -0.3);
        let v = nalgebra::Vector3::from(e.mandel());
        assert_relative_eq!((v.transpose() * c.mandel() * v)[0], c.energy(&e), epsilon = 1e-14);
    }

    #[test]
    fn solve_inverts_apply() {
        let c = aniso();
        let e = Sym2::new(0.2, 0.1, -0.3);
        let back = c.solve(&c.apply(&e)).unwrap();
        assert!((back - e).norm() < 1e-13);
    }

    #[test]
    fn isotropic_material_validation() {
        assert!(IsotropicMaterial::new(1.0, 0.0).is_err());
        assert!(IsotropicMaterial::new(-2.0, 1.0).is_err());
        let m = IsotropicMaterial::new(1.0, 1.0).unwrap();
        assert_eq!(m.bulk(), 2.0);
        assert_relative_eq!(m.poisson(), 0.25);
    }

    #[test]
    fn hydrostatic_eigen_tie() {
        let e = Sym2::identity().eigen();
        assert_eq!(e.alpha, 0.0);
        assert_eq!((e.l1, e.l2), (1.0, 1.0));
    }

    #[test]
    fn eigen_orders_by_magnitude() {
        let e = Sym2::new(1.0, -3.0, 0.0).eigen();
        assert_eq!(e.l1, -3.0);
        assert_eq!(e.l2, 1.0);
        assert_relative_eq!(e.alpha, std::f64::consts::FRAC_PI_2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn eigen_reconstructs(xx in -10.0..10.0f64, yy in -10.0..10.0f64, xy in -10.0..10.0f64) {
            let s = Sym2::new(xx, yy, xy);
            let e = s.eigen();
            prop_assert!(e.l1.abs() >= e.l2.abs());
            prop_assert!((0.0..std::f64::consts::PI).contains(&e.alpha));
            let r = e.reconstruct();
            let scale = s.norm().max(1e-300);
            prop_assert!((r - s).norm() <= 1e-12 * scale);
        }
    }

    proptest! {
        #[test]
        fn rotation_preserves_symmetry_and_definiteness(alpha in -7.0..7.0f64) {
            let c = aniso();
            let r = c.rotated(alpha);
            prop_assert!(r.is_positive_definite());
            prop_assert!((r.min_eigenvalue() - c.min_eigenvalue()).abs() < 1e-12);
            // minor/major symmetry: all index permutations agree
            for i in 0..2 { for j in 0..2 { for k in 0..2 { for l in 0..2 {
                prop_assert_eq!(r.get(i,j,k,l), r.get(j,i,k,l));
                prop_assert_eq!(r.get(i,j,k,l), r.get(k,l,i,j));
            }}}}
        }
    }
}
