//! Points of the velocity and momentum phase spaces.

use std::fmt;

/// Which fiber coordinate a point or field uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rep {
    /// Velocity representation, fiber coordinates `v`.
    V,
    /// Momentum representation, fiber coordinates `p`.
    P,
}

impl Rep {
    pub fn letter(self) -> char {
        match self {
            Rep::V => 'v',
            Rep::P => 'p',
        }
    }

    pub fn other(self) -> Rep {
        match self {
            Rep::V => Rep::P,
            Rep::P => Rep::V,
        }
    }
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A point `(x, v)` or `(x, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub fiber: Vec<f64>,
    pub rep: Rep,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, fiber: Vec<f64>, rep: Rep) -> Self {
        assert_eq!(x.len(), fiber.len(), "position and fiber must have the same length");
        PhasePoint { x, fiber, rep }
    }

    pub fn velocity(x: Vec<f64>, v: Vec<f64>) -> Self {
        PhasePoint::new(x, v, Rep::V)
    }

    pub fn momentum(x: Vec<f64>, p: Vec<f64>) -> Self {
        PhasePoint::new(x, p, Rep::P)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Coordinates `(x, fiber)` concatenated.
    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.fiber).copied().collect()
    }
}
