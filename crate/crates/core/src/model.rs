//! Closed-form kinetics of the rescaled predator-prey system
//!
//! ```text
//! U' = F(U, V) = alpha U (gamma - U) - U V / (1 + U)
//! V' = G(U, V) = V (beta U / (1 + U) - 1)
//! ```
//!
//! together with its equilibria, Jacobians, eigenvalue classification, the Hopf
//! threshold in `gamma` and the Dulac function used to rule out cycles.

use alloc::vec::Vec;
use libm::sqrt;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Residual bound for equilibrium locations.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

/// Dimensionless parameters `(alpha, beta, gamma, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Prey growth scale.
    pub alpha: f64,
    /// Predator conversion efficiency.
    pub beta: f64,
    /// Scaled carrying capacity.
    pub gamma: f64,
    /// Prey-to-predator diffusion ratio.
    pub d: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, d: f64) -> Result<Self> {
        let p = ModelParams { alpha, beta, gamma, d };
        p.validate()?;
        Ok(p)
    }

    /// Kinetic parameters with unit diffusion ratio.
    pub fn kinetic(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha, beta, gamma, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("d", self.d),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(alloc::format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// `gamma (beta - 1) > 1`: the interior equilibrium exists.
    pub fn has_interior(&self) -> bool {
        self.gamma * (self.beta - 1.0) > 1.0
    }

    /// `gamma (beta - 1) - (beta + 1)`; its sign decides sink vs source.
    pub fn hopf_discriminant(&self) -> f64 {
        self.gamma * (self.beta - 1.0) - (self.beta + 1.0)
    }

    /// Location of the interior equilibrium when it exists.
    pub fn interior(&self) -> Option<PlanarState> {
        if !self.has_interior() {
            return None;
        }
        let bm1 = self.beta - 1.0;
        Some(PlanarState::new(
            1.0 / bm1,
            self.alpha * self.beta * (self.gamma * bm1 - 1.0) / (bm1 * bm1),
        ))
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        ModelParams { gamma, ..self }
    }
}

/// Original constants of the dimensional model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub k: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// Maps the dimensional constants onto `(alpha, beta, gamma, d)`.
pub fn rescale_params(raw: &RawParams) -> Result<ModelParams> {
    let fields = [
        ("A", raw.a),
        ("B", raw.b),
        ("C", raw.c),
        ("D", raw.d),
        ("E", raw.e),
        ("K", raw.k),
        ("delta1", raw.delta1),
        ("delta2", raw.delta2),
    ];
    for (name, value) in fields {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::domain(alloc::format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    ModelParams::new(
        raw.a / (raw.e * raw.c * raw.k),
        raw.d / (raw.e * raw.c),
        raw.e * raw.k,
        raw.delta1 / raw.delta2,
    )
}

/// A prey/predator pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarState {
    pub u: f64,
    pub v: f64,
}

impl PlanarState {
    pub const fn new(u: f64, v: f64) -> Self {
        PlanarState { u, v }
    }

    pub fn in_quadrant(&self) -> bool {
        self.u >= 0.0 && self.v >= 0.0
    }

    pub fn dist(&self, other: &PlanarState) -> f64 {
        libm::hypot(self.u - other.u, self.v - other.v)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.u, self.v]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        PlanarState::new(y[0], y[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Origin,
    BoundaryGamma,
    Interior,
}

/// Linear type of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Sink,
    Source,
    Saddle,
    ImaginaryPair,
    /// A zero eigenvalue; not hyperbolic.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub location: PlanarState,
    pub kind: EquilibriumKind,
    pub eigenvalues: [Complex64; 2],
    pub classification: Stability,
}

pub type Matrix2 = [[f64; 2]; 2];

#[inline]
fn check_pole(u: f64) -> Result<()> {
    if u == -1.0 || !u.is_finite() {
        Err(Error::Singularity { at: u })
    } else {
        Ok(())
    }
}

/// `F(U, V)` without the pole check; callers guarantee `U > -1`.
#[inline]
pub fn prey_rate(p: &ModelParams, u: f64, v: f64) -> f64 {
    p.alpha * u * (p.gamma - u) - u * v / (1.0 + u)
}

/// `G(U, V)` without the pole check.
#[inline]
pub fn predator_rate(p: &ModelParams, u: f64, v: f64) -> f64 {
    v * (p.beta * u / (1.0 + u) - 1.0)
}

/// `(F, G)` at `s`.
pub fn kinetic_rhs(p: &ModelParams, s: PlanarState) -> Result<(f64, f64)> {
    check_pole(s.u)?;
    Ok((prey_rate(p, s.u, s.v), predator_rate(p, s.u, s.v)))
}

/// Prey nullcline `f(U) = alpha (gamma - U)(1 + U)`.
pub fn nullcline_f(p: &ModelParams, u: f64) -> f64 {
    p.alpha * (p.gamma - u) * (1.0 + u)
}

/// Jacobian without the pole check.
#[inline]
pub(crate) fn jacobian_raw(p: &ModelParams, u: f64, v: f64) -> Matrix2 {
    let q = 1.0 + u;
    [
        [p.alpha * (p.gamma - 2.0 * u) - v / (q * q), -u / q],
        [p.beta * v / (q * q), p.beta * u / q - 1.0],
    ]
}

/// Second partials of `(F, G)`: `[F_uu, F_uv, F_vv]` and `[G_uu, G_uv, G_vv]`.
#[inline]
pub(crate) fn hessians_raw(p: &ModelParams, u: f64, v: f64) -> ([f64; 3], [f64; 3]) {
    let q = 1.0 + u;
    let q2 = q * q;
    let q3 = q2 * q;
    (
        [-2.0 * p.alpha + 2.0 * v / q3, -1.0 / q2, 0.0],
        [-2.0 * p.beta * v / q3, p.beta / q2, 0.0],
    )
}

/// Exact partial-derivative matrix of `(F, G)`.
pub fn jacobian(p: &ModelParams, s: PlanarState) -> Result<Matrix2> {
    check_pole(s.u)?;
    Ok(jacobian_raw(p, s.u, s.v))
}

/// Closed-form Jacobian at the interior equilibrium.
pub fn interior_jacobian(p: &ModelParams) -> Result<Matrix2> {
    if !p.has_interior() {
        return Err(Error::domain("no interior equilibrium: gamma (beta - 1) <= 1"));
    }
    let bm1 = p.beta - 1.0;
    Ok([
        [p.alpha * p.hopf_discriminant() / (p.beta * bm1), -1.0 / p.beta],
        [p.alpha * (p.gamma * bm1 - 1.0), 0.0],
    ])
}

/// Eigenvalues of a 2x2 matrix by the quadratic formula.
///
/// Real pairs are ordered with the larger first.
pub fn eigenvalues_2x2(m: &Matrix2) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc < 0.0 {
        let im = sqrt(-disc);
        return [Complex64::new(half, im), Complex64::new(half, -im)];
    }
    let root = sqrt(disc);
    // avoid cancellation in the smaller root
    let big = if half >= 0.0 { half + root } else { half - root };
    let other = if big != 0.0 { det / big } else { 0.0 };
    let (hi, lo) = if big >= other { (big, other) } else { (other, big) };
    [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
}

/// Linear type from an eigenvalue pair.
pub fn classify_pair(ev: &[Complex64; 2]) -> Stability {
    if ev[0].im != 0.0 {
        return match ev[0].re {
            re if re < 0.0 => Stability::Sink,
            re if re > 0.0 => Stability::Source,
            _ => Stability::ImaginaryPair,
        };
    }
    let (a, b) = (ev[0].re, ev[1].re);
    if a == 0.0 || b == 0.0 {
        Stability::Degenerate
    } else if a < 0.0 && b < 0.0 {
        Stability::Sink
    } else if a > 0.0 && b > 0.0 {
        Stability::Source
    } else {
        Stability::Saddle
    }
}

fn equilibrium_at(p: &ModelParams, location: PlanarState, kind: EquilibriumKind) -> Equilibrium {
    let eigenvalues = eigenvalues_2x2(&jacobian_raw(p, location.u, location.v));
    Equilibrium {
        location,
        kind,
        eigenvalues,
        classification: classify_pair(&eigenvalues),
    }
}

/// Origin and `(gamma, 0)` always, the interior point when it exists.
pub fn equilibria(p: &ModelParams) -> Vec<Equilibrium> {
    let mut out = Vec::with_capacity(3);
    out.push(equilibrium_at(p, PlanarState::new(0.0, 0.0), EquilibriumKind::Origin));
    out.push(equilibrium_at(
        p,
        PlanarState::new(p.gamma, 0.0),
        EquilibriumKind::BoundaryGamma,
    ));
    if let Ok(eq) = classify_interior(p) {
        out.push(eq);
    }
    out
}

/// Interior equilibrium with the sink / source / centre verdict decided by the
/// sign of `gamma (beta - 1) - (beta + 1)`.
pub fn classify_interior(p: &ModelParams) -> Result<Equilibrium> {
    let location = p
        .interior()
        .ok_or_else(|| Error::domain("no interior equilibrium: gamma (beta - 1) <= 1"))?;
    let jac = interior_jacobian(p)?;
    let eigenvalues = eigenvalues_2x2(&jac);
    let disc = p.hopf_discriminant();
    let classification = if disc < 0.0 {
        Stability::Sink
    } else if disc > 0.0 {
        Stability::Source
    } else {
        Stability::ImaginaryPair
    };
    Ok(Equilibrium {
        location,
        kind: EquilibriumKind::Interior,
        eigenvalues,
        classification,
    })
}

/// Hopf threshold `gamma* = (beta + 1) / (beta - 1)`.
pub fn hopf_gamma(p: &ModelParams) -> Result<f64> {
    if p.beta <= 1.0 {
        return Err(Error::domain("beta <= 1: no finite Hopf threshold"));
    }
    Ok((p.beta + 1.0) / (p.beta - 1.0))
}

/// Exponent applied to `V` in the Dulac function `((1 + U)/U) V^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DulacExponent {
    /// `k = xi + 1`
    #[default]
    XiPlusOne,
    /// `k = xi - 1`
    XiMinusOne,
}

impl DulacExponent {
    pub fn power(self, xi: f64) -> f64 {
        match self {
            DulacExponent::XiPlusOne => xi + 1.0,
            DulacExponent::XiMinusOne => xi - 1.0,
        }
    }
}

/// Open window of admissible `xi`, present only when it is nonempty.
pub fn dulac_exponent_range(p: &ModelParams) -> Option<(f64, f64)> {
    if p.beta <= 1.0 {
        return None;
    }
    let bm1 = p.beta - 1.0;
    let scale = 4.0 * p.alpha / bm1;
    let quarter = (p.gamma - 1.0) / 4.0;
    let lo = ((p.gamma - 1.0) / 2.0 - quarter) * scale;
    let hi = (1.0 / bm1 - quarter) * scale;
    (lo < hi).then_some((lo, hi))
}

/// `d/dU (phi F) + d/dV (phi G)` with `phi = ((1 + U)/U) V^k`.
///
/// Since `phi F = V^k (f(U) - V)` and `phi G = V^(k+1) (beta - 1 - 1/U)`, the
/// divergence is `V^k [f'(U) + (k + 1)(beta - 1 - 1/U)]`.
pub fn dulac_divergence(
    p: &ModelParams,
    xi: f64,
    s: PlanarState,
    exponent: DulacExponent,
) -> Result<f64> {
    if s.u == 0.0 || s.v == 0.0 {
        return Err(Error::Singularity { at: s.u });
    }
    let k = exponent.power(xi);
    let f_prime = p.alpha * (p.gamma - 1.0 - 2.0 * s.u);
    let bracket = f_prime + (k + 1.0) * (p.beta - 1.0 - 1.0 / s.u);
    Ok(libm::pow(s.v, k) * bracket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(alpha: f64, beta: f64, gamma: f64) -> ModelParams {
        ModelParams::kinetic(alpha, beta, gamma).unwrap()
    }

    #[test]
    fn rescale_identity_and_hand_case() {
        let ones = RawParams {
            a: 1.0,
            b: 7.5,
            c: 1.0,
            d: 1.0,
            e: 1.0,
            k: 1.0,
            delta1: 1.0,
            delta2: 1.0,
        };
        let m = rescale_params(&ones).unwrap();
        assert_eq!((m.alpha, m.beta, m.gamma, m.d), (1.0, 1.0, 1.0, 1.0));

        let raw = RawParams {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 6.0,
            e: 2.0,
            k: 2.0,
            delta1: 1.0,
            delta2: 4.0,
        };
        let m = rescale_params(&raw).unwrap();
        assert_eq!((m.gamma, m.alpha, m.beta, m.d), (4.0, 0.25, 3.0, 0.25));

        let doubled = RawParams {
            delta1: 2.0,
            delta2: 8.0,
            ..raw
        };
        assert_eq!(rescale_params(&doubled).unwrap().d, m.d);
    }

    #[test]
    fn rescale_rejects_nonpositive() {
        let raw = RawParams {
            a: 1.0,
            b: 0.0,
            c: 1.0,
            d: 1.0,
            e: 1.0,
            k: 1.0,
            delta1: 1.0,
            delta2: 1.0,
        };
        assert!(matches!(rescale_params(&raw), Err(Error::Domain(_))));
        assert!(ModelParams::new(1.0, -3.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn kinetic_rhs_examples() {
        let m = p(1.0, 3.0, 1.6);
        assert_eq!(kinetic_rhs(&m, PlanarState::new(0.0, 0.0)).unwrap(), (0.0, 0.0));
        let (f, g) = kinetic_rhs(&m, PlanarState::new(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(f, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g, 0.5, epsilon = 1e-15);
        let (f, g) = kinetic_rhs(&m, PlanarState::new(0.5, 1.65)).unwrap();
        assert!(f.abs() <= 1e-12 && g.abs() <= 1e-12);
        assert!(matches!(
            kinetic_rhs(&m, PlanarState::new(-1.0, 0.3)),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn nullcline_roots_and_symmetry() {
        let m = p(1.0, 3.0, 1.6);
        assert_eq!(nullcline_f(&m, 1.6), 0.0);
        assert_eq!(nullcline_f(&m, -1.0), 0.0);
        assert_abs_diff_eq!(nullcline_f(&m, 0.0), 1.6, epsilon = 1e-15);
        assert_abs_diff_eq!(nullcline_f(&m, 0.6), 1.6, epsilon = 1e-15);
        for i in 0..50 {
            let x = -1.0 + 0.07 * i as f64;
            assert_abs_diff_eq!(
                nullcline_f(&m, x),
                nullcline_f(&m, m.gamma - 1.0 - x),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn equilibria_examples() {
        let eqs = equilibria(&p(1.0, 3.0, 1.6));
        assert_eq!(eqs.len(), 3);
        // 1.65 itself is not representable; agree to one ulp
        assert_eq!(eqs[2].location.u, 0.5);
        assert_abs_diff_eq!(eqs[2].location.v, 1.65, epsilon = 4e-16);
        assert_eq!(eqs[2].kind, EquilibriumKind::Interior);
        let eqs = equilibria(&p(1.0, 3.0, 2.4));
        assert_abs_diff_eq!(eqs[2].location.u, 0.5);
        assert_abs_diff_eq!(eqs[2].location.v, 2.85, epsilon = 1e-15);
        let eqs = equilibria(&p(1.0, 1.5, 1.0));
        assert_eq!(eqs.len(), 2);
        assert_eq!(eqs[1].classification, Stability::Sink);
    }

    #[test]
    fn boundary_eigenvalues() {
        let m = p(1.0, 3.0, 1.6);
        let eqs = equilibria(&m);
        let origin = eqs[0].eigenvalues;
        assert_eq!((origin[0].re, origin[1].re), (1.6, -1.0));
        assert_eq!(eqs[0].classification, Stability::Saddle);
        let g = eqs[1].eigenvalues;
        assert_abs_diff_eq!(g[0].re, 3.0 * 1.6 / 2.6 - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0].re, 0.846_153_846_153_846_1, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1].re, -1.6, epsilon = 1e-15);
        assert_eq!(eqs[1].classification, Stability::Saddle);
    }

    #[test]
    fn interior_jacobian_matches_printed_matrix() {
        for (a, b, g) in [(1.0, 3.0, 1.6), (1.0, 3.0, 2.4), (0.25, 2.0, 4.0), (0.7, 5.0, 0.9)] {
            let m = p(a, b, g);
            let eq = m.interior().unwrap();
            let j = jacobian(&m, eq).unwrap();
            let printed = interior_jacobian(&m).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert_abs_diff_eq!(j[r][c], printed[r][c], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_interior(&p(1.0, 3.0, 1.6)).unwrap().classification,
            Stability::Sink
        );
        let src = classify_interior(&p(1.0, 3.0, 2.4)).unwrap();
        assert_eq!(src.classification, Stability::Source);
        assert!(src.eigenvalues[0].im != 0.0 && src.eigenvalues[0].re > 0.0);
        let centre = classify_interior(&p(1.0, 3.0, 2.0)).unwrap();
        assert_eq!(centre.classification, Stability::ImaginaryPair);
        assert_abs_diff_eq!(centre.eigenvalues[0].re, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(centre.eigenvalues[0].im, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(centre.eigenvalues[1].im, -1.0, epsilon = 1e-10);
        assert!(classify_interior(&p(1.0, 1.5, 1.0)).is_err());
    }

    #[test]
    fn hopf_threshold_values() {
        assert_eq!(hopf_gamma(&p(1.0, 3.0, 1.0)).unwrap(), 2.0);
        assert_eq!(hopf_gamma(&p(0.25, 2.0, 4.0)).unwrap(), 3.0);
        assert!((hopf_gamma(&p(1.0, 1e9, 1.0)).unwrap() - 1.0).abs() < 1e-8);
        assert!(hopf_gamma(&p(1.0, 1.0, 1.0)).is_err());
        assert!(hopf_gamma(&p(1.0, 0.5, 1.0)).is_err());
    }

    #[test]
    fn dulac_window() {
        let (lo, hi) = dulac_exponent_range(&p(1.0, 3.0, 1.6)).unwrap();
        assert_abs_diff_eq!(lo, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.7, epsilon = 1e-15);
        assert!(dulac_exponent_range(&p(1.0, 3.0, 2.4)).is_none());
        assert!(dulac_exponent_range(&p(1.0, 3.0, 2.0)).is_none());
    }

    #[test]
    fn dulac_singular_on_axes() {
        let m = p(1.0, 3.0, 1.6);
        for s in [PlanarState::new(0.0, 1.0), PlanarState::new(1.0, 0.0)] {
            assert!(dulac_divergence(&m, 0.5, s, DulacExponent::XiPlusOne).is_err());
        }
    }
}
