//! Built-in model problems `omega^2 eps E + rot(nu curl E) = J` with constant
//! coefficients, two of them with known solutions in `H_0(curl)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::broken::VectorField;
use crate::mesh::{Mesh, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// `E = (y(1-y), x(1-x))` on the unit square; exactly representable for `p >= 2`.
    Polynomial,
    /// `E = (sin(pi y)(1+x), sin(pi x)(1+y))` on the unit square.
    Trigonometric,
    /// `J = (1, 1)` on the L-shaped domain, no closed-form solution.
    LShape,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Polynomial => "poly",
            ProblemKind::Trigonometric => "trig",
            ProblemKind::LShape => "lshape",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "poly" | "polynomial" => Ok(ProblemKind::Polynomial),
            "trig" | "trigonometric" => Ok(ProblemKind::Trigonometric),
            "lshape" | "l-shape" => Ok(ProblemKind::LShape),
            other => Err(format!("unknown problem `{other}` (expected poly, trig or lshape)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem {
    pub kind: ProblemKind,
    pub omega: f64,
    pub eps: f64,
    pub nu: f64,
}

impl Problem {
    pub fn new(kind: ProblemKind, omega: f64, eps: f64, nu: f64) -> Self {
        Problem { kind, omega, eps, nu }
    }

    /// Unit coefficients.
    pub fn standard(kind: ProblemKind) -> Self {
        Self::new(kind, 1.0, 1.0, 1.0)
    }

    /// The structured mesh family of the problem's domain.
    pub fn mesh(&self, n: usize) -> Mesh {
        match self.kind {
            ProblemKind::LShape => Mesh::l_shape(n),
            _ => Mesh::unit_square(n),
        }
    }

    pub fn has_exact(&self) -> bool {
        self.kind != ProblemKind::LShape
    }

    /// The exact solution as a field on any mesh of the domain.
    pub fn exact_field(&self) -> Option<ExactField> {
        self.has_exact().then_some(ExactField(*self))
    }

    pub fn exact(&self, x: Point) -> Option<[f64; 2]> {
        let [x, y] = x;
        match self.kind {
            ProblemKind::Polynomial => Some([y * (1.0 - y), x * (1.0 - x)]),
            ProblemKind::Trigonometric => Some([(PI * y).sin() * (1.0 + x), (PI * x).sin() * (1.0 + y)]),
            ProblemKind::LShape => None,
        }
    }

    pub fn exact_curl(&self, x: Point) -> Option<f64> {
        let [x, y] = x;
        match self.kind {
            ProblemKind::Polynomial => Some(2.0 * y - 2.0 * x),
            ProblemKind::Trigonometric => Some(PI * (PI * x).cos() * (1.0 + y) - PI * (PI * y).cos() * (1.0 + x)),
            ProblemKind::LShape => None,
        }
    }

    /// `rot(curl E)` of the exact solution.
    fn rot_curl(&self, x: Point) -> [f64; 2] {
        let [x, y] = x;
        match self.kind {
            ProblemKind::Polynomial => [2.0, 2.0],
            ProblemKind::Trigonometric => {
                let p2 = PI * PI;
                [
                    PI * (PI * x).cos() + p2 * (PI * y).sin() * (1.0 + x),
                    p2 * (PI * x).sin() * (1.0 + y) + PI * (PI * y).cos(),
                ]
            }
            ProblemKind::LShape => [0.0, 0.0],
        }
    }

    pub fn source(&self, x: Point) -> [f64; 2] {
        match self.exact(x) {
            Some(e) => {
                let rc = self.rot_curl(x);
                let m = self.omega * self.omega * self.eps;
                [m * e[0] + self.nu * rc[0], m * e[1] + self.nu * rc[1]]
            }
            None => [1.0, 1.0],
        }
    }

    /// `div J = omega^2 eps div E`.
    pub fn div_source(&self, x: Point) -> f64 {
        let [x, y] = x;
        let div_e = match self.kind {
            ProblemKind::Polynomial | ProblemKind::LShape => 0.0,
            ProblemKind::Trigonometric => (PI * y).sin() + (PI * x).sin(),
        };
        self.omega * self.omega * self.eps * div_e
    }
}

/// Exact solution of a [`Problem`] that has one.
#[derive(Clone, Copy, Debug)]
pub struct ExactField(Problem);

impl VectorField for ExactField {
    fn value(&self, _cell: usize, x: Point) -> [f64; 2] {
        self.0.exact(x).expect("problem has an exact solution")
    }

    fn curl(&self, _cell: usize, x: Point) -> f64 {
        self.0.exact_curl(x).expect("problem has an exact solution")
    }
}
