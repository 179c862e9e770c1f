//! Independent reference computations used as test oracles.
#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use sweep_core::geometry::Vector;

/// Projection onto `{x : <a_j, x> <= c_j}` by trying every subset of rows:
/// project `y` onto the affine hull `{A_S x = c_S}` with an SVD
/// pseudo-inverse, keep the feasible results, return the closest.
pub fn brute_projection(normals: &[Vector], offsets: &[f64], y: &Vector) -> Vector {
    let s = normals.len();
    let n = y.len();
    let feasible = |x: &Vector| normals.iter().zip(offsets).all(|(a, &c)| a.dot(x) <= c + 1e-10 * (1.0 + c.abs()));
    let mut best: Option<(f64, Vector)> = None;
    for mask in 0u32..(1 << s) {
        let rows: Vec<usize> = (0..s).filter(|j| mask & (1 << j) != 0).collect();
        let x = if rows.is_empty() {
            y.clone()
        } else {
            let a = DMatrix::from_fn(rows.len(), n, |r, c| normals[rows[r]][c]);
            let c = Vector::from_iterator(rows.len(), rows.iter().map(|&j| offsets[j]));
            let rhs = &a * y - c;
            let svd = a.clone().svd(true, true);
            let z = svd.solve(&rhs, 1e-12).unwrap();
            // x = y - A^+ (A y - c), the closest point of the affine hull
            let x = y - &z;
            // the affine hull may be empty if rows are inconsistent
            if (&a * &x - (&a * y - &rhs)).norm() > 1e-9 {
                continue;
            }
            x
        };
        if feasible(&x) {
            let d = (y - &x).norm();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    }
    best.expect("nonempty polyhedron").1
}

/// Distance from `w` to the cone generated by `gens`, by nonnegative least
/// squares over every subset of generators.
pub fn nnls_cone_distance(gens: &[Vector], w: &Vector) -> f64 {
    let s = gens.len();
    let n = w.len();
    let mut best = w.norm();
    for mask in 1u32..(1 << s) {
        let cols: Vec<usize> = (0..s).filter(|j| mask & (1 << j) != 0).collect();
        let g = DMatrix::from_fn(n, cols.len(), |r, c| gens[cols[c]][r]);
        let svd = g.clone().svd(true, true);
        let coef = svd.solve(w, 1e-12).unwrap();
        if coef.iter().all(|&c| c >= -1e-12) {
            best = best.min((w - &g * coef).norm());
        }
    }
    best
}

/// Composite-midpoint approximation of `(∫ |f - g|²)^{1/2}` on `[a, b]`.
pub fn midpoint_l2(f: impl Fn(f64) -> Vector, g: impl Fn(f64) -> Vector, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let t = a + (i as f64 + 0.5) * h;
            (f(t) - g(t)).norm_squared() * h
        })
        .sum::<f64>()
        .sqrt()
}

/// Polynomial with coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `p(t - d)`, expanded.
    pub fn shift(&self, d: f64) -> Poly {
        let mut out = vec![0.0; self.0.len()];
        for (k, &c) in self.0.iter().enumerate() {
            // c (t - d)^k
            let mut binom = 1.0;
            for j in 0..=k {
                out[j] += c * binom * (-d).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Poly(out)
    }

    pub fn scale(&self, a: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * a).collect())
    }

    /// Antiderivative vanishing at `t = a`, plus `value`.
    pub fn integral_from(&self, a: f64, value: f64) -> Poly {
        let mut out = vec![0.0; self.0.len() + 1];
        for (k, &c) in self.0.iter().enumerate() {
            out[k + 1] = c / (k + 1) as f64;
        }
        let p = Poly(out);
        let shift = value - p.eval(a);
        let mut q = p.0;
        q[0] += shift;
        Poly(q)
    }
}

/// Method of steps for `x' = k x(t - d)` on `[0, steps d]` with constant
/// history `phi`: one polynomial per step.
pub fn method_of_steps(k: f64, d: f64, phi: f64, steps: usize) -> Vec<Poly> {
    let mut pieces: Vec<Poly> = Vec::new();
    let mut prev = Poly(vec![phi]);
    let mut value = phi;
    for i in 0..steps {
        let a = i as f64 * d;
        let rate = prev.shift(d).scale(k);
        let next = rate.integral_from(a, value);
        value = next.eval(a + d);
        pieces.push(next.clone());
        prev = next;
    }
    pieces
}
