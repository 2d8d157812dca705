//! Planar vector fields shared by the kinetic and reduced systems.

use crate::model::{self, Matrix2, ModelParams, PlanarState};
use crate::ode::VectorField;

/// A smooth vector field on the plane with an analytic Jacobian.
pub trait PlanarField {
    fn rhs(&self, u: f64, v: f64) -> [f64; 2];
    fn jacobian(&self, u: f64, v: f64) -> Matrix2;

    fn divergence(&self, u: f64, v: f64) -> f64 {
        let j = self.jacobian(u, v);
        j[0][0] + j[1][1]
    }

    fn at(&self, s: PlanarState) -> [f64; 2] {
        self.rhs(s.u, s.v)
    }
}

impl<P: PlanarField + ?Sized> PlanarField for &P {
    fn rhs(&self, u: f64, v: f64) -> [f64; 2] {
        (**self).rhs(u, v)
    }
    fn jacobian(&self, u: f64, v: f64) -> Matrix2 {
        (**self).jacobian(u, v)
    }
    fn divergence(&self, u: f64, v: f64) -> f64 {
        (**self).divergence(u, v)
    }
}

/// The kinetic field `(F, G)`.
#[derive(Debug, Clone, Copy)]
pub struct KineticField {
    pub params: ModelParams,
}

impl KineticField {
    pub fn new(params: ModelParams) -> Self {
        KineticField { params }
    }
}

impl PlanarField for KineticField {
    fn rhs(&self, u: f64, v: f64) -> [f64; 2] {
        [
            model::prey_rate(&self.params, u, v),
            model::predator_rate(&self.params, u, v),
        ]
    }

    fn jacobian(&self, u: f64, v: f64) -> Matrix2 {
        model::jacobian_raw(&self.params, u, v)
    }
}

/// Views a [`PlanarField`] as a two-dimensional [`VectorField`].
pub struct Planar<P>(pub P);

impl<P: PlanarField> VectorField for Planar<P> {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let r = self.0.rhs(y[0], y[1]);
        dy[0] = r[0];
        dy[1] = r[1];
    }
}
