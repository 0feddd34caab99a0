//! Small fixed-size complex matrices for single-atom (3×3) and atom-pair
//! (9×9) reduced operators.
//!
//! Reduced matrices follow density-matrix indexing: entry `(m, l)` holds
//! `⟨σ^{lm}⟩` (0-based levels), so `⟨X⟩ = tr(X R)`. Pair matrices use the
//! composite index `3·i₁ + i₂`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::model::Sigma;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

macro_rules! square_matrix {
    ($name:ident, $n:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub [[Complex64; $n]; $n]);

        impl Default for $name {
            fn default() -> Self {
                Self::zeros()
            }
        }

        impl $name {
            pub const DIM: usize = $n;

            pub const fn zeros() -> Self {
                Self([[ZERO; $n]; $n])
            }

            pub fn identity() -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    m.0[i][i] = Complex64::new(1.0, 0.0);
                }
                m
            }

            /// Conjugate transpose.
            pub fn adjoint(&self) -> Self {
                let mut out = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        out.0[i][j] = self.0[j][i].conj();
                    }
                }
                out
            }

            pub fn trace(&self) -> Complex64 {
                (0..$n).map(|i| self.0[i][i]).sum()
            }

            pub fn matmul(&self, rhs: &Self) -> Self {
                let mut out = Self::zeros();
                for i in 0..$n {
                    for k in 0..$n {
                        let a = self.0[i][k];
                        if a == ZERO {
                            continue;
                        }
                        for j in 0..$n {
                            out.0[i][j] += a * rhs.0[k][j];
                        }
                    }
                }
                out
            }

            pub fn commutator(&self, rhs: &Self) -> Self {
                self.matmul(rhs) - rhs.matmul(self)
            }

            pub fn scale(&self, c: Complex64) -> Self {
                let mut out = *self;
                out *= c;
                out
            }

            pub fn max_abs(&self) -> f64 {
                self.0
                    .iter()
                    .flat_map(|r| r.iter())
                    .map(|v| v.norm())
                    .fold(0.0, f64::max)
            }

            pub fn is_finite(&self) -> bool {
                self.0
                    .iter()
                    .flat_map(|r| r.iter())
                    .all(|v| v.re.is_finite() && v.im.is_finite())
            }
        }

        impl Index<(usize, usize)> for $name {
            type Output = Complex64;
            fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
                &self.0[i][j]
            }
        }

        impl IndexMut<(usize, usize)> for $name {
            fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
                &mut self.0[i][j]
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                for i in 0..$n {
                    for j in 0..$n {
                        self.0[i][j] += rhs.0[i][j];
                    }
                }
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: Self) {
                for i in 0..$n {
                    for j in 0..$n {
                        self.0[i][j] -= rhs.0[i][j];
                    }
                }
            }
        }

        impl MulAssign<Complex64> for $name {
            fn mul_assign(&mut self, c: Complex64) {
                for row in self.0.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= c;
                    }
                }
            }
        }

        impl MulAssign<f64> for $name {
            fn mul_assign(&mut self, c: f64) {
                for row in self.0.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= c;
                    }
                }
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                self -= rhs;
                self
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(mut self) -> Self {
                self *= -1.0;
                self
            }
        }

        impl Mul<Complex64> for $name {
            type Output = Self;
            fn mul(mut self, c: Complex64) -> Self {
                self *= c;
                self
            }
        }

        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(mut self, c: f64) -> Self {
                self *= c;
                self
            }
        }
    };
}

square_matrix!(Mat3, 3);
square_matrix!(Mat9, 9);

impl Mat3 {
    /// Matrix of the transition operator `|l⟩⟨m|`.
    pub fn sigma(s: Sigma) -> Self {
        let mut m = Self::zeros();
        m.0[s.l as usize - 1][s.m as usize - 1] = Complex64::new(1.0, 0.0);
        m
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &[Complex64; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    /// `tr(σ^{lm} R) = R[m][l]`.
    pub fn expect(&self, s: Sigma) -> Complex64 {
        self.0[s.m as usize - 1][s.l as usize - 1]
    }

    /// Kronecker product in the pair index convention.
    pub fn kron(&self, rhs: &Mat3) -> Mat9 {
        let mut out = Mat9::zeros();
        for i1 in 0..3 {
            for j1 in 0..3 {
                let a = self.0[i1][j1];
                for i2 in 0..3 {
                    for j2 in 0..3 {
                        out.0[3 * i1 + i2][3 * j1 + j2] = a * rhs.0[i2][j2];
                    }
                }
            }
        }
        out
    }
}

impl Mat9 {
    /// `tr((σ^{lm} ⊗ σ^{l'm'}) R) = R[(m,m')][(l,l')]`.
    pub fn expect(&self, s: Sigma, t: Sigma) -> Complex64 {
        let row = 3 * (s.m as usize - 1) + (t.m as usize - 1);
        let col = 3 * (s.l as usize - 1) + (t.l as usize - 1);
        self.0[row][col]
    }

    /// `(h ⊗ I) R` for `side = 0`, `(I ⊗ h) R` for `side = 1`.
    pub fn left_local(&self, h: &Mat3, side: usize) -> Mat9 {
        let mut out = Mat9::zeros();
        for i1 in 0..3 {
            for i2 in 0..3 {
                let row = 3 * i1 + i2;
                for k in 0..3 {
                    let (c, src) = if side == 0 {
                        (h.0[i1][k], 3 * k + i2)
                    } else {
                        (h.0[i2][k], 3 * i1 + k)
                    };
                    if c == ZERO {
                        continue;
                    }
                    for j in 0..9 {
                        out.0[row][j] += c * self.0[src][j];
                    }
                }
            }
        }
        out
    }

    /// `R (h ⊗ I)` for `side = 0`, `R (I ⊗ h)` for `side = 1`.
    pub fn right_local(&self, h: &Mat3, side: usize) -> Mat9 {
        let mut out = Mat9::zeros();
        for j1 in 0..3 {
            for j2 in 0..3 {
                let col = 3 * j1 + j2;
                for k in 0..3 {
                    let (c, src) = if side == 0 {
                        (h.0[k][j1], 3 * k + j2)
                    } else {
                        (h.0[k][j2], 3 * j1 + k)
                    };
                    if c == ZERO {
                        continue;
                    }
                    for i in 0..9 {
                        out.0[i][col] += c * self.0[i][src];
                    }
                }
            }
        }
        out
    }

    /// `[h⊗I + I⊗h, R]`.
    pub fn symmetric_commutator(&self, h: &Mat3) -> Mat9 {
        let mut out = self.left_local(h, 0);
        out += self.left_local(h, 1);
        out -= self.right_local(h, 0);
        out -= self.right_local(h, 1);
        out
    }

    /// `tr₂((I ⊗ X) R)`: partial trace over the second atom.
    pub fn partial_trace_second_with(&self, x: &Mat3) -> Mat3 {
        let mut out = Mat3::zeros();
        for i1 in 0..3 {
            for j1 in 0..3 {
                let mut acc = ZERO;
                for i2 in 0..3 {
                    for k in 0..3 {
                        acc += x.0[i2][k] * self.0[3 * i1 + k][3 * j1 + i2];
                    }
                }
                out.0[i1][j1] = acc;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{S12, S23, S33};

    fn sample3(seed: f64) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let x = seed + (3 * i + j) as f64;
                m.0[i][j] = Complex64::new(x.sin(), (1.7 * x).cos());
            }
        }
        m
    }

    fn sample9(seed: f64) -> Mat9 {
        let mut m = Mat9::zeros();
        for i in 0..9 {
            for j in 0..9 {
                let x = seed + (9 * i + j) as f64;
                m.0[i][j] = Complex64::new((0.3 * x).sin(), (1.1 * x).cos());
            }
        }
        m
    }

    #[test]
    fn local_products_match_kronecker() {
        let h = sample3(0.4);
        let r = sample9(1.0);
        let h1 = h.kron(&Mat3::identity());
        let h2 = Mat3::identity().kron(&h);
        assert!((r.left_local(&h, 0) - h1.matmul(&r)).max_abs() < 1e-13);
        assert!((r.left_local(&h, 1) - h2.matmul(&r)).max_abs() < 1e-13);
        assert!((r.right_local(&h, 0) - r.matmul(&h1)).max_abs() < 1e-13);
        assert!((r.right_local(&h, 1) - r.matmul(&h2)).max_abs() < 1e-13);
    }

    #[test]
    fn partial_trace_matches_expectations() {
        let r = sample9(2.0);
        let x = Mat3::sigma(S23);
        let p = r.partial_trace_second_with(&x);
        // tr(σ^{lm} p) = tr((σ^{lm} ⊗ σ23) R)
        for s in Sigma::all() {
            let lhs = (Mat3::sigma(s).matmul(&p)).trace();
            let rhs = Mat3::sigma(s).kron(&x).matmul(&r).trace();
            assert!((lhs - rhs).norm() < 1e-13);
            assert!((rhs - r.expect(s, S23)).norm() < 1e-13);
        }
    }

    #[test]
    fn expectation_convention() {
        let r = sample3(0.0);
        for s in [S12, S23, S33] {
            assert!((Mat3::sigma(s).matmul(&r).trace() - r.expect(s)).norm() < 1e-14);
        }
    }
}
