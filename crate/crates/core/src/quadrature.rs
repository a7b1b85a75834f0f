//! Gauss–Legendre rules on `[0, 1]` and collapsed (Duffy) product rules on the
//! reference triangle `(0,0), (1,0), (0,1)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::mesh::Point;

#[derive(Clone, Debug)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SegmentRule {
    /// `n`-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
    pub fn gauss(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        SegmentRule { points, weights }
    }

    /// Cheapest Gauss rule exact for polynomials of degree `order`.
    pub fn exact_to(order: usize) -> Self {
        Self::gauss(order / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative on `[-1, 1]`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    } else {
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    };
    (p1, d)
}

/// Values of the shifted Legendre polynomials `P_0 .. P_{n-1}` at `s` in `[0, 1]`.
pub fn shifted_legendre(n: usize, s: f64) -> Vec<f64> {
    let x = 2.0 * s - 1.0;
    let mut out = Vec::with_capacity(n);
    let (mut p0, mut p1) = (1.0, x);
    for k in 0..n {
        match k {
            0 => out.push(1.0),
            1 => out.push(x),
            _ => {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
                out.push(p2);
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<Point>,
    /// Weights summing to the reference area `1/2`.
    pub weights: Vec<f64>,
    pub order: usize,
}

impl TriangleRule {
    /// Collapsed Gauss product rule exact for total degree `order`.
    pub fn exact_to(order: usize) -> Self {
        // (u, v) in [0,1]^2 -> (u, v (1 - u)); the Jacobian adds one degree in u.
        let g = SegmentRule::gauss((order + 3) / 2);
        let mut points = Vec::with_capacity(g.len() * g.len());
        let mut weights = Vec::with_capacity(g.len() * g.len());
        for (u, wu) in g.points.iter().zip(&g.weights) {
            for (v, wv) in g.points.iter().zip(&g.weights) {
                points.push([*u, v * (1.0 - u)]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        TriangleRule { points, weights, order }
    }

    /// Shared instance for `order`.
    pub fn cached(order: usize) -> Arc<TriangleRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TriangleRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(order).or_insert_with(|| Arc::new(Self::exact_to(order))).clone()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
