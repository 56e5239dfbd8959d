//! Quadrature on triangles (collapsed Gauss) and edges (Gauss-Legendre).

use gauss_quad::GaussLegendre;
use thiserror::Error;

pub const MAX_ORDER: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature order {0} exceeds the supported maximum {MAX_ORDER}")]
    Unsupported(usize),
}

/// Rule on the reference simplex: barycentric points, weights summing to 1
/// (multiply by |K| or the edge length).
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_01(n: usize) -> Vec<(f64, f64)> {
    if n == 1 {
        return vec![(0.5, 1.0)];
    }
    let g = GaussLegendre::new(n).expect("n >= 2");
    let mut v: Vec<(f64, f64)> = g
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v
}

pub fn quad_triangle(order: usize) -> Result<QuadRule, QuadError> {
    if order > MAX_ORDER {
        return Err(QuadError::Unsupported(order));
    }
    let n = order / 2 + 2;
    let g = gauss_01(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            // x = u, y = v (1 - u); Jacobian (1 - u), reference area 1/2
            let x = u;
            let y = v * (1.0 - u);
            points.push([1.0 - x - y, x, y]);
            weights.push(2.0 * wu * wv * (1.0 - u));
        }
    }
    Ok(QuadRule { points, weights, order })
}

/// Edge rule; a point `s` is stored as barycentric (1-s, s, 0).
pub fn quad_edge(order: usize) -> Result<QuadRule, QuadError> {
    if order > MAX_ORDER {
        return Err(QuadError::Unsupported(order));
    }
    let n = order / 2 + 1;
    let g = gauss_01(n);
    Ok(QuadRule {
        points: g.iter().map(|&(s, _)| [1.0 - s, s, 0.0]).collect(),
        weights: g.iter().map(|&(_, w)| w).collect(),
        order,
    })
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    /// Edge parameters of an edge rule.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[1])
    }
}

/// Barycentric point on local edge `i` at parameter `s` (from a_{i+1} to a_{i+2}).
pub fn edge_point(i: usize, s: f64) -> [f64; 3] {
    let mut l = [0.0; 3];
    l[(i + 1) % 3] = 1.0 - s;
    l[(i + 2) % 3] = s;
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn monomials_exact() {
        for order in [2, 6, 10, 12, 20] {
            let q = quad_triangle(order).unwrap();
            for a in 0..=order {
                for b in 0..=order - a {
                    let c = order - a - b;
                    let num: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                        .sum();
                    // weights integrate over unit area: 2 a! b! c! / (d+2)!
                    let exact = 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
                    assert!((num - exact).abs() <= 1e-13 * exact.abs().max(1e-300) + 1e-16, "{order} {a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn reference_triangle_bubble() {
        let q = quad_triangle(10).unwrap();
        let s: f64 = q.points.iter().zip(&q.weights).map(|(l, w)| w * l[0] * l[1] * l[2]).sum();
        // |K| = 1/2
        assert!((0.5 * s - 1.0 / 120.0).abs() < 1e-15);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn edge_beta_integral() {
        let q = quad_edge(4).unwrap();
        let l = 2.5;
        let s: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * l * p[0] * p[1]).sum();
        assert!((s - l / 6.0).abs() < 1e-14);
    }

    #[test]
    fn unsupported() {
        assert_eq!(quad_triangle(41).unwrap_err(), QuadError::Unsupported(41));
        assert!(quad_edge(12).is_ok());
    }
}
