//! Right-hand sides `f` of the Dirichlet problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Vec2;
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Monomial {
    pub coeff: f64,
    pub powers: [u32; 2],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Load {
    Constant {
        value: f64,
    },
    /// `amplitude * prod_i sin(frequency * pi * x_i)`.
    SineProduct {
        amplitude: f64,
        frequency: f64,
    },
    Polynomial {
        terms: Vec<Monomial>,
    },
}

impl Load {
    pub fn zero() -> Self {
        Load::Constant { value: 0.0 }
    }

    pub fn eval(&self, dim: usize, x: Vec2) -> f64 {
        match self {
            Load::Constant { value } => *value,
            Load::SineProduct {
                amplitude,
                frequency,
            } => {
                let w = frequency * core::f64::consts::PI;
                (0..dim).fold(*amplitude, |p, a| p * libm::sin(w * x[a]))
            }
            Load::Polynomial { terms } => terms
                .iter()
                .map(|t| (0..dim).fold(t.coeff, |p, a| p * libm::pow(x[a], t.powers[a] as f64)))
                .sum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Load::Constant { value } => value.is_finite(),
            Load::SineProduct {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
            Load::Polynomial { terms } => terms.iter().all(|t| t.coeff.is_finite()),
        }
    }

    /// Load vector `⟨f, φ_i⟩`, zero on constrained nodes.
    pub fn assemble(&self, mesh: &Mesh) -> Vec<f64> {
        let b = mesh.basis();
        let mut out = vec![0.0; mesh.num_nodes()];
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element_nodes(e);
            for q in 0..b.nq {
                let x = mesh.to_physical(e, b.points[q]);
                let f = self.eval(mesh.dim, x) * b.weights[q];
                for a in 0..b.nloc {
                    out[nodes[a]] += f * b.values[q][a];
                }
            }
        }
        for (i, v) in out.iter_mut().enumerate() {
            if mesh.is_constrained(i) {
                *v = 0.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxDomain;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_load_vector_1d() {
        let m = Mesh::macro_mesh(BoxDomain::unit(1), 4).unwrap();
        let f = Load::Constant { value: 1.0 }.assemble(&m);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[4], 0.0);
        for v in &f[1..4] {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn polynomial_and_sine_values() {
        let p = Load::Polynomial {
            terms: vec![
                Monomial {
                    coeff: 2.0,
                    powers: [2, 1],
                },
                Monomial {
                    coeff: -1.0,
                    powers: [0, 0],
                },
            ],
        };
        assert_abs_diff_eq!(p.eval(2, [3.0, 0.5]), 8.0, epsilon = 1e-14);
        let s = Load::SineProduct {
            amplitude: 2.0,
            frequency: 1.0,
        };
        assert_abs_diff_eq!(s.eval(2, [0.5, 0.5]), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eval(1, [0.5, 123.0]), 2.0, epsilon = 1e-14);
    }
}
