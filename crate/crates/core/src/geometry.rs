//! Small fixed-size vectors and axis-aligned boxes.
//!
//! Everything works in one or two space dimensions. Points and vectors are
//! `[f64; 2]`; in 1D the second component is unused and kept at zero.

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

pub const ZERO: Vec2 = [0.0, 0.0];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn norm_sq(a: Vec2) -> f64 {
    dot(a, a)
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

pub fn is_finite(a: Vec2) -> bool {
    a[0].is_finite() && a[1].is_finite()
}

/// Fractional part, exact for every finite input.
#[inline]
pub fn frac(t: f64) -> f64 {
    t - libm::floor(t)
}

/// Axis-aligned box `[lo, hi]` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: Vec2,
    pub hi: Vec2,
}

impl BoxDomain {
    pub fn new(dim: usize, lo: Vec2, hi: Vec2) -> Result<Self> {
        let b = BoxDomain { dim, lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn unit(dim: usize) -> Self {
        let hi = if dim == 1 { [1.0, 0.0] } else { [1.0, 1.0] };
        BoxDomain { dim, lo: ZERO, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        BoxDomain {
            dim: 1,
            lo: [lo, 0.0],
            hi: [hi, 0.0],
        }
    }

    pub fn rect(lo: Vec2, hi: Vec2) -> Self {
        BoxDomain { dim: 2, lo, hi }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidMesh(alloc::format!(
                "dimension {} not supported (1 or 2)",
                self.dim
            )));
        }
        for i in 0..self.dim {
            if !(self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] < self.hi[i]) {
                return Err(Error::InvalidMesh(alloc::format!(
                    "box side {i} is empty or non-finite"
                )));
            }
        }
        Ok(())
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|i| self.side(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        libm::sqrt((0..self.dim).map(|i| self.side(i) * self.side(i)).sum())
    }

    pub fn centroid(&self) -> Vec2 {
        let mut c = ZERO;
        for i in 0..self.dim {
            c[i] = 0.5 * (self.lo[i] + self.hi[i]);
        }
        c
    }

    /// Membership in the closed box, with an absolute slack `tol`.
    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] - tol && x[i] <= self.hi[i] + tol)
    }

    /// True if `other` (closed) lies inside `self` (closed) up to `tol`.
    pub fn contains_box(&self, other: &BoxDomain, tol: f64) -> bool {
        (0..self.dim).all(|i| other.lo[i] >= self.lo[i] - tol && other.hi[i] <= self.hi[i] + tol)
    }

    /// True if the interiors intersect (positive-measure overlap).
    pub fn overlaps(&self, other: &BoxDomain, tol: f64) -> bool {
        (0..self.dim).all(|i| other.lo[i] < self.hi[i] - tol && other.hi[i] > self.lo[i] + tol)
    }
}
