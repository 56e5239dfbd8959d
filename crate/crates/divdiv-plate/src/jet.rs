//! Truncated bivariate Taylor expansions (order 4) used to differentiate the
//! exact solutions analytically.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 4;
const N: usize = (ORDER + 1) * (ORDER + 2) / 2;

fn idx(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

/// Taylor coefficients of f(x0 + dx, y0 + dy) in dx^i dy^j, i + j <= 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; N],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }
    pub fn x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.c[idx(1, 0)] = 1.0;
        j
    }
    pub fn y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.c[idx(0, 1)] = 1.0;
        j
    }
    pub fn value(&self) -> f64 {
        self.c[0]
    }
    /// Partial derivative d^(i+j) / dx^i dy^j at the expansion point.
    pub fn d(&self, i: usize, j: usize) -> f64 {
        const F: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
        self.c[idx(i, j)] * F[i] * F[j]
    }
    pub fn scale(self, s: f64) -> Self {
        let mut r = self;
        r.c.iter_mut().for_each(|v| *v *= s);
        r
    }

    /// g(self) given g and its first four derivatives at the constant term.
    pub fn compose(self, g: [f64; 5]) -> Self {
        let mut delta = self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(g[0]);
        let mut pw = Self::constant(1.0);
        let mut fact = 1.0;
        for (m, gm) in g.iter().enumerate().skip(1) {
            pw = pw * delta;
            fact *= m as f64;
            out = out + pw.scale(gm / fact);
        }
        out
    }

    pub fn powf(self, p: f64) -> Self {
        let a = self.c[0];
        let mut g = [0.0; 5];
        let mut coef = 1.0;
        for (m, gm) in g.iter_mut().enumerate() {
            *gm = coef * a.powf(p - m as f64);
            coef *= p - m as f64;
        }
        self.compose(g)
    }
    pub fn recip(self) -> Self {
        self.powf(-1.0)
    }
    pub fn sin(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c, s])
    }
    pub fn cos(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s, c])
    }
    pub fn atan(self) -> Self {
        let a = self.c[0];
        let q = 1.0 + a * a;
        self.compose([
            a.atan(),
            1.0 / q,
            -2.0 * a / (q * q),
            (6.0 * a * a - 2.0) / (q * q * q),
            24.0 * a * (1.0 - a * a) / (q * q * q * q),
        ])
    }
    /// Polar angle of (x, y) continued from `theta0`, the branch value at the
    /// expansion point.
    pub fn atan2_from(y: Self, x: Self, theta0: f64) -> Self {
        let (x0, y0) = (x.c[0], y.c[0]);
        let u = (x.scale(-y0) + y.scale(x0)) / (x.scale(x0) + y.scale(y0));
        let mut r = u.atan();
        r.c[0] = theta0;
        r
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut r = self;
        for (a, b) in r.c.iter_mut().zip(o.c) {
            *a += b;
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + o.scale(-1.0)
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
    fn mul(self, o: Jet) -> Jet {
        let mut r = [0.0; N];
        for n1 in 0..=ORDER {
            for j1 in 0..=n1 {
                let a = self.c[idx(n1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for n2 in 0..=ORDER - n1 {
                    for j2 in 0..=n2 {
                        r[idx(n1 - j1 + n2 - j2, j1 + j2)] += a * o.c[idx(n2 - j2, j2)];
                    }
                }
            }
        }
        Jet { c: r }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        let mut r = self;
        r.c[0] += o;
        r
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        self.scale(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // f = x^3 y + 2 y^2 at (0.5, -1)
        let (x, y) = (Jet::x(0.5), Jet::y(-1.0));
        let f = x * x * x * y + y * y * 2.0;
        assert!((f.value() - (-0.125 + 2.0)).abs() < 1e-15);
        assert!((f.d(1, 0) - 3.0 * 0.25 * -1.0).abs() < 1e-14);
        assert!((f.d(2, 1) - 6.0 * 0.5).abs() < 1e-14);
        assert!((f.d(3, 1) - 6.0).abs() < 1e-14);
        assert!((f.d(0, 2) - 4.0).abs() < 1e-14);
        assert_eq!(f.d(4, 0), 0.0);
    }

    #[test]
    fn transcendental_against_closed_form() {
        let (x0, y0) = (0.3, 0.7);
        let (x, y) = (Jet::x(x0), Jet::y(y0));
        let r2 = x * x + y * y;
        let r = r2.powf(0.5);
        let th = Jet::atan2_from(y, x, y0.atan2(x0));
        // r cos(th) = x, r sin(th) = y
        let xx = r * th.cos();
        let yy = r * th.sin();
        for i in 0..=4 {
            for j in 0..=4 - i {
                assert!((xx.d(i, j) - x.d(i, j)).abs() < 1e-11, "{i}{j}");
                assert!((yy.d(i, j) - y.d(i, j)).abs() < 1e-11, "{i}{j}");
            }
        }
        // d/dx sin(x) at 0.3 up to fourth order
        let s = x.sin();
        assert!((s.d(4, 0) - x0.sin()).abs() < 1e-13);
        // (x/y) via division
        let q = x / y;
        assert!((q.d(0, 2) - 2.0 * x0 / y0.powi(3)).abs() < 1e-12);
    }
}
