//! Truncated bivariate Taylor polynomials.
//!
//! A [`Jet`] stores the Taylor coefficients of a function of `(x, y)` at a
//! point up to total degree [`MAX_ORDER`]. Arithmetic and composition with
//! univariate functions propagate the coefficients exactly, so any closed-form
//! expression built from jets yields exact partial derivatives up to the jet's
//! order. Differentiating a jet lowers its order by one.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest total derivative order carried by a jet.
pub const MAX_ORDER: usize = 4;
const LEN: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

const FACTORIAL: [f64; MAX_ORDER + 2] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];

#[inline]
const fn index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Taylor coefficients `c[i][j]` of `x^i y^j` for `i + j <= order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; LEN],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = value;
        Self {
            coeffs,
            order: MAX_ORDER,
        }
    }

    /// The coordinate function `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.coeffs[index(1, 0)] = 1.0;
        j
    }

    /// The coordinate function `y` expanded at `y0`.
    pub fn var_y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.coeffs[index(0, 1)] = 1.0;
        j
    }

    /// Jet of a function of `x` alone, from its derivatives `f, f', f'', ...`.
    pub fn univariate_x(derivs: &[f64]) -> Self {
        let mut j = Self::constant(0.0);
        for (k, d) in derivs.iter().take(MAX_ORDER + 1).enumerate() {
            j.coeffs[index(k, 0)] = d / FACTORIAL[k];
        }
        j
    }

    /// Builds a jet from partial derivatives grouped by total order:
    /// `[[f], [fx, fy], [fxx, fxy, fyy], [fxxx, fxxy, fxyy, fyyy], ...]`.
    pub fn from_partials(order: usize, partials: impl Fn(usize, usize) -> f64) -> Self {
        let mut j = Self::constant(0.0);
        j.order = order.min(MAX_ORDER);
        for d in 0..=j.order {
            for jj in 0..=d {
                let i = d - jj;
                j.coeffs[index(i, jj)] = partials(i, jj) / (FACTORIAL[i] * FACTORIAL[jj]);
            }
        }
        j
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of `x^i y^j`.
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.coeffs[index(i, j)]
        }
    }

    /// Partial derivative `d^{i+j} f / dx^i dy^j` at the expansion point.
    #[inline]
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * FACTORIAL[i] * FACTORIAL[j]
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.partial(1, 0), self.partial(0, 1)]
    }

    /// `[fxx, fxy, fyy]`.
    pub fn hessian(&self) -> [f64; 3] {
        [self.partial(2, 0), self.partial(1, 1), self.partial(0, 2)]
    }

    /// `[fxxx, fxxy, fxyy, fyyy]`.
    pub fn third(&self) -> [f64; 4] {
        [
            self.partial(3, 0),
            self.partial(2, 1),
            self.partial(1, 2),
            self.partial(0, 3),
        ]
    }

    /// `[fxxxx, fxxxy, fxxyy, fxyyy, fyyyy]`.
    pub fn fourth(&self) -> [f64; 5] {
        [
            self.partial(4, 0),
            self.partial(3, 1),
            self.partial(2, 2),
            self.partial(1, 3),
            self.partial(0, 4),
        ]
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(mut self, order: usize) -> Self {
        let order = order.min(self.order);
        for d in order + 1..=MAX_ORDER {
            for jj in 0..=d {
                self.coeffs[index(d - jj, jj)] = 0.0;
            }
        }
        self.order = order;
        self
    }

    /// Partial derivative in `x` as a jet of one lower order.
    ///
    /// # Panics
    /// If the jet has order zero.
    pub fn dx(&self) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let mut out = Self::constant(0.0);
        out.order = self.order - 1;
        for d in 0..=out.order {
            for jj in 0..=d {
                let i = d - jj;
                out.coeffs[index(i, jj)] = (i + 1) as f64 * self.coeffs[index(i + 1, jj)];
            }
        }
        out
    }

    /// Partial derivative in `y` as a jet of one lower order.
    pub fn dy(&self) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let mut out = Self::constant(0.0);
        out.order = self.order - 1;
        for d in 0..=out.order {
            for jj in 0..=d {
                let i = d - jj;
                out.coeffs[index(i, jj)] = (jj + 1) as f64 * self.coeffs[index(i, jj + 1)];
            }
        }
        out
    }

    pub fn scale(mut self, s: f64) -> Self {
        for c in self.coeffs.iter_mut() {
            *c *= s;
        }
        self
    }

    pub fn add_scalar(mut self, s: f64) -> Self {
        self.coeffs[0] += s;
        self
    }

    /// Composition `f(self)` given `f` and its derivatives at `self.value()`.
    ///
    /// `derivs[k]` is the k-th derivative; at least `order + 1` entries are used
    /// (missing ones are treated as zero).
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let order = self.order;
        let mut h = *self;
        h.coeffs[0] = 0.0;
        let coef = |k: usize| derivs.get(k).copied().unwrap_or(0.0) / FACTORIAL[k];
        let mut acc = Self::constant(coef(order));
        acc.order = order;
        for k in (0..order).rev() {
            acc = (acc * h).add_scalar(coef(k));
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let r = 1.0 / a;
        self.compose(&[
            a.ln(),
            r,
            -r * r,
            2.0 * r * r * r,
            -6.0 * r * r * r * r,
        ])
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.value();
        let r2 = r * r;
        self.compose(&[r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2, 24.0 * r2 * r2 * r])
    }

    /// `self^p` for a positive base.
    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let mut derivs = [0.0; MAX_ORDER + 1];
        let mut falling = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = falling * a.powf(p - k as f64);
            falling *= p - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn square(&self) -> Self {
        *self * *self
    }

    pub fn atan(&self) -> Self {
        let a = self.value();
        let q = 1.0 / (1.0 + a * a);
        self.compose(&[
            a.atan(),
            q,
            -2.0 * a * q * q,
            (6.0 * a * a - 2.0) * q * q * q,
            -24.0 * a * (a * a - 1.0) * q * q * q * q,
        ])
    }

    pub fn cosh(&self) -> Self {
        let (c, s) = (self.value().cosh(), self.value().sinh());
        self.compose(&[c, s, c, s, c])
    }

    pub fn sinh(&self) -> Self {
        let (c, s) = (self.value().cosh(), self.value().sinh());
        self.compose(&[s, c, s, c, s])
    }

    /// Branch of `atan2(y, x)` continuous near the expansion point.
    pub fn atan2(y: &Self, x: &Self) -> Self {
        let base = y.value().atan2(x.value());
        let mut out = if x.value().abs() >= y.value().abs() {
            (*y / *x).atan()
        } else {
            -(*x / *y).atan()
        };
        out.coeffs[0] = base;
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.order = self.order.min(rhs.order);
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
        self.truncate(self.order)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::constant(0.0);
        out.order = order;
        for d1 in 0..=order {
            for j1 in 0..=d1 {
                let a = self.coeffs[index(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=order - d1 {
                    for j2 in 0..=d2 {
                        let i = d1 - j1 + d2 - j2;
                        out.coeffs[index(i, j1 + j2)] += a * rhs.coeffs[index(d2 - j2, j2)];
                    }
                }
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_scalar(-rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn xy(x: f64, y: f64) -> (Jet, Jet) {
        (Jet::var_x(x), Jet::var_y(y))
    }

    #[test]
    fn polynomial_partials() {
        // f = x^3 y + 2 y^2
        let (x, y) = xy(1.5, -0.5);
        let f = x * x * x * y + 2.0 * y * y;
        assert_relative_eq!(f.value(), 1.5f64.powi(3) * -0.5 + 0.5, epsilon = 1e-14);
        assert_relative_eq!(f.partial(1, 0), 3.0 * 2.25 * -0.5, epsilon = 1e-14);
        assert_relative_eq!(f.partial(0, 1), 1.5f64.powi(3) + 2.0 * 2.0 * -0.5, epsilon = 1e-14);
        assert_relative_eq!(f.partial(2, 1), 6.0 * 1.5, epsilon = 1e-14);
        assert_relative_eq!(f.partial(3, 1), 6.0, epsilon = 1e-14);
        assert_relative_eq!(f.partial(0, 2), 4.0, epsilon = 1e-14);
        assert_eq!(f.partial(0, 3), 0.0);
    }

    #[test]
    fn log_radius_derivatives() {
        // ln r = 0.5 ln(x^2 + y^2): d/dx = x/r^2, d2/dx2 = (y^2 - x^2)/r^4
        let (x, y) = xy(0.6, 0.8);
        let f = (x * x + y * y).ln() * 0.5;
        assert_relative_eq!(f.partial(1, 0), 0.6, epsilon = 1e-14);
        assert_relative_eq!(f.partial(2, 0), 0.64 - 0.36, epsilon = 1e-14);
        // harmonic: every Laplacian vanishes
        assert!((f.partial(2, 0) + f.partial(0, 2)).abs() < 1e-13);
        assert!((f.partial(3, 0) + f.partial(1, 2)).abs() < 1e-12);
        assert!((f.partial(4, 0) + f.partial(2, 2)).abs() < 1e-11);
    }

    #[test]
    fn derivative_lowers_order() {
        let (x, y) = xy(0.3, 0.2);
        let f = (x * y).exp();
        let fx = f.dx();
        assert_eq!(fx.order(), 3);
        assert_relative_eq!(fx.value(), f.partial(1, 0), epsilon = 1e-14);
        assert_relative_eq!(fx.partial(1, 1), f.partial(2, 1), epsilon = 1e-13);
        assert_relative_eq!(f.dy().dx().value(), f.partial(1, 1), epsilon = 1e-14);
    }

    #[test]
    fn univariate_compositions_match_closed_forms() {
        let x = Jet::var_x(0.7);
        let a = x.atan();
        // d/dx atan = 1/(1+x^2); d4/dx4 = 24 x (1 - x^2) / (1+x^2)^4
        let q = 1.0 / (1.0 + 0.49);
        assert_relative_eq!(a.partial(1, 0), q, epsilon = 1e-14);
        assert_relative_eq!(a.partial(4, 0), 24.0 * 0.7 * (1.0 - 0.49) * q.powi(4), epsilon = 1e-12);
        let s = x.sqrt();
        assert_relative_eq!(s.partial(3, 0), 0.375 * 0.7f64.powf(-2.5), epsilon = 1e-12);
        let r = x.recip();
        assert_relative_eq!(r.partial(4, 0), 24.0 / 0.7f64.powi(5), epsilon = 1e-9);
    }

    #[test]
    fn atan2_branch_is_continuous() {
        for &(x0, y0) in &[(1.0, 0.2), (0.1, 1.0), (-1.0, 0.3), (-0.2, -1.0)] {
            let (x, y) = xy(x0, y0);
            let t = Jet::atan2(&y, &x);
            let r2 = x0 * x0 + y0 * y0;
            assert_relative_eq!(t.value(), f64::atan2(y0, x0), epsilon = 1e-15);
            assert_relative_eq!(t.partial(1, 0), -y0 / r2, epsilon = 1e-13);
            assert_relative_eq!(t.partial(0, 1), x0 / r2, epsilon = 1e-13);
        }
    }
}
