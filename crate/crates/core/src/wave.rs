//! Traveling-wave profiles.
//!
//! The profile system is integrated in its internal time `tau`, in which the
//! derivative variables `u2, v2` relax quickly onto a slow manifold and the
//! slow shadow `(u1, v1)` follows the kinetic field backward at rate `eps`.
//! The wave coordinate is `s = -tau / c`; in `s` the shadow runs in the
//! kinetic direction.

use alloc::vec::Vec;
use libm::{fabs, hypot, sqrt};
use num_complex::Complex64;

use crate::cycles::{self, hausdorff, LimitCycle, EQUILIBRIUM_CAPTURE, RETURN_TOL};
use crate::error::{Error, Result};
use crate::field::{Planar, PlanarField};
use crate::model::{self, Matrix2, ModelParams, PlanarState};
use crate::ode::{
    first_crossing, step_crossing, AcceptedStep, AdaptiveOptions, Dopri5, Orientation, Section,
    Trajectory, VectorField,
};

/// Wave speed `c` and `eps = 1 / c^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub c: f64,
    pub epsilon: f64,
}

impl WaveParams {
    pub fn from_speed(c: f64) -> Result<Self> {
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::domain("wave speed must satisfy c >= 1 (eps <= 1)"));
        }
        Ok(WaveParams {
            c,
            epsilon: 1.0 / (c * c),
        })
    }

    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain("epsilon must lie in (0, 1]"));
        }
        Ok(WaveParams {
            c: 1.0 / sqrt(epsilon),
            epsilon,
        })
    }
}

/// Profile state `(u1, u2, v1, v2)` with `u2, v2` the derivative variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveState4 {
    pub u1: f64,
    pub u2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl WaveState4 {
    pub const fn new(u1: f64, u2: f64, v1: f64, v2: f64) -> Self {
        WaveState4 { u1, u2, v1, v2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.u1, self.u2, self.v1, self.v2]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        WaveState4::new(y[0], y[1], y[2], y[3])
    }

    pub fn shadow(&self) -> PlanarState {
        PlanarState::new(self.u1, self.v1)
    }
}

/// Slow pair `x = (U1, V1)` and fast pair `y = (U2, V2)` after the shift
/// `U2 = u2 + F`, `V2 = v2 + G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedState {
    pub x: PlanarState,
    pub y: [f64; 2],
}

impl TransformedState {
    /// Flat layout `(U1, U2, V1, V2)`, matching [`WaveState4::to_array`].
    pub fn to_array(self) -> [f64; 4] {
        [self.x.u, self.y[0], self.x.v, self.y[1]]
    }

    pub fn from_slice(z: &[f64]) -> Self {
        TransformedState {
            x: PlanarState::new(z[0], z[2]),
            y: [z[1], z[3]],
        }
    }
}

fn check_pole(u: f64) -> Result<()> {
    if u == -1.0 {
        Err(Error::Singularity { at: u })
    } else {
        Ok(())
    }
}

fn kinetic(p: &ModelParams, u: f64, v: f64) -> (f64, f64) {
    (model::prey_rate(p, u, v), model::predator_rate(p, u, v))
}

fn profile_rhs(p: &ModelParams, eps: f64, s: &[f64], out: &mut [f64]) {
    let (f, g) = kinetic(p, s[0], s[2]);
    out[0] = eps * s[1];
    out[1] = -(s[1] + f) / p.d;
    out[2] = eps * s[3];
    out[3] = -(s[3] + g);
}

/// Right-hand side of the first-order profile system in internal time.
pub fn wave_rhs_4d(p: &ModelParams, w: &WaveParams, s: WaveState4) -> Result<[f64; 4]> {
    check_pole(s.u1)?;
    let mut out = [0.0; 4];
    profile_rhs(p, w.epsilon, &s.to_array(), &mut out);
    Ok(out)
}

/// The profile system as an integrable field.
#[derive(Debug, Clone, Copy)]
pub struct WaveField {
    pub params: ModelParams,
    pub epsilon: f64,
}

impl WaveField {
    pub fn new(params: ModelParams, w: &WaveParams) -> Self {
        WaveField {
            params,
            epsilon: w.epsilon,
        }
    }
}

impl VectorField for WaveField {
    fn dim(&self) -> usize {
        4
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        profile_rhs(&self.params, self.epsilon, y, dy)
    }
}

/// Jacobian of the profile system, rows and columns in `(u1, u2, v1, v2)`.
pub fn wave_jacobian(p: &ModelParams, w: &WaveParams, s: WaveState4) -> [[f64; 4]; 4] {
    let j = model::jacobian_raw(p, s.u1, s.v1);
    let e = w.epsilon;
    [
        [0.0, e, 0.0, 0.0],
        [-j[0][0] / p.d, -1.0 / p.d, -j[0][1] / p.d, 0.0],
        [0.0, 0.0, 0.0, e],
        [-j[1][0], 0.0, -j[1][1], -1.0],
    ]
}

/// Maps internal times to the wave coordinate `s = -tau / c`, reversing the
/// sample order so that `s` increases.
pub fn profile_reparametrize(traj: &Trajectory, w: &WaveParams) -> Trajectory {
    retime(traj, |t| -t / w.c)
}

/// Inverse of [`profile_reparametrize`]: `tau = -c s`.
pub fn profile_to_internal(traj: &Trajectory, w: &WaveParams) -> Trajectory {
    retime(traj, |s| -w.c * s)
}

fn retime<M: Fn(f64) -> f64>(traj: &Trajectory, map: M) -> Trajectory {
    let mut out = Trajectory::new(traj.dim);
    for i in (0..traj.len()).rev() {
        out.push(map(traj.times[i]), traj.state(i));
    }
    out.stats = traj.stats;
    out
}

/// `(U2, V2) = (u2 + F, v2 + G)` at `(u1, v1)`.
pub fn transform_uv(p: &ModelParams, s: WaveState4) -> Result<TransformedState> {
    check_pole(s.u1)?;
    let (f, g) = kinetic(p, s.u1, s.v1);
    Ok(TransformedState {
        x: s.shadow(),
        y: [s.u2 + f, s.v2 + g],
    })
}

pub fn inverse_transform_uv(p: &ModelParams, t: TransformedState) -> Result<WaveState4> {
    check_pole(t.x.u)?;
    let (f, g) = kinetic(p, t.x.u, t.x.v);
    Ok(WaveState4::new(t.x.u, t.y[0] - f, t.x.v, t.y[1] - g))
}

fn pq_raw(p: &ModelParams, x: PlanarState, y: [f64; 2]) -> (f64, f64) {
    let (f, g) = kinetic(p, x.u, x.v);
    let j = model::jacobian_raw(p, x.u, x.v);
    let (a, b) = (y[0] - f, y[1] - g);
    (j[0][0] * a + j[0][1] * b, j[1][0] * a + j[1][1] * b)
}

/// Coupling terms `P = F_u (U2 - F) + F_v (V2 - G)` and the analogous `Q`.
pub fn pq_terms(p: &ModelParams, t: TransformedState) -> Result<(f64, f64)> {
    check_pole(t.x.u)?;
    Ok(pq_raw(p, t.x, t.y))
}

fn transformed_rhs(p: &ModelParams, eps: f64, z: &[f64], out: &mut [f64]) {
    let x = PlanarState::new(z[0], z[2]);
    let (f, g) = kinetic(p, x.u, x.v);
    let (pp, qq) = pq_raw(p, x, [z[1], z[3]]);
    out[0] = eps * (z[1] - f);
    out[1] = -z[1] / p.d + eps * pp;
    out[2] = eps * (z[3] - g);
    out[3] = -z[3] + eps * qq;
}

/// The profile system written in the shifted variables, layout
/// `(U1, U2, V1, V2)`.
#[derive(Debug, Clone, Copy)]
pub struct TransformedField {
    pub params: ModelParams,
    pub epsilon: f64,
}

impl VectorField for TransformedField {
    fn dim(&self) -> usize {
        4
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        transformed_rhs(&self.params, self.epsilon, y, dy)
    }
}

/// Leading-order slow manifold `Y = eps (d P0, Q0)` with `P0, Q0` the
/// coupling terms at `Y = 0`.
pub fn slow_manifold_first_order(p: &ModelParams, epsilon: f64, x: PlanarState) -> [f64; 2] {
    let (p0, q0) = pq_raw(p, x, [0.0, 0.0]);
    [epsilon * p.d * p0, epsilon * q0]
}

/// Jacobian of [`slow_manifold_first_order`] with respect to `(U1, V1)`.
pub fn slow_manifold_jacobian(p: &ModelParams, epsilon: f64, x: PlanarState) -> Matrix2 {
    let (f, g) = kinetic(p, x.u, x.v);
    let j = model::jacobian_raw(p, x.u, x.v);
    let (hf, hg) = model::hessians_raw(p, x.u, x.v);
    // second partials indexed [uu, uv, vv]
    let second = |h: &[f64; 3], a: usize, b: usize| h[a + b];
    let mut out = [[0.0; 2]; 2];
    for k in 0..2 {
        // d/dx_k (F_u F + F_v G) and d/dx_k (G_u F + G_v G)
        let dp = second(&hf, 0, k) * f + j[0][0] * j[0][k] + second(&hf, 1, k) * g + j[0][1] * j[1][k];
        let dq = second(&hg, 0, k) * f + j[1][0] * j[0][k] + second(&hg, 1, k) * g + j[1][1] * j[1][k];
        out[0][k] = -epsilon * p.d * dp;
        out[1][k] = -epsilon * dq;
    }
    out
}

/// Norm of the defect of the invariance equation for the first-order
/// manifold at `x`; of size `eps^2`.
pub fn invariance_residual(p: &ModelParams, epsilon: f64, x: PlanarState) -> f64 {
    let phi = slow_manifold_first_order(p, epsilon, x);
    let jphi = slow_manifold_jacobian(p, epsilon, x);
    let (f, g) = kinetic(p, x.u, x.v);
    let xdot = [epsilon * (phi[0] - f), epsilon * (phi[1] - g)];
    let (pp, qq) = pq_raw(p, x, phi);
    let r0 = jphi[0][0] * xdot[0] + jphi[0][1] * xdot[1] + phi[0] / p.d - epsilon * pp;
    let r1 = jphi[1][0] * xdot[0] + jphi[1][1] * xdot[1] + phi[1] - epsilon * qq;
    hypot(r0, r1)
}

/// Slow flow on the first-order manifold in kinetic orientation:
/// `(F - phi1, G - phi2)`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedField {
    pub params: ModelParams,
    pub epsilon: f64,
}

impl ReducedField {
    pub fn new(params: ModelParams, epsilon: f64) -> Self {
        ReducedField { params, epsilon }
    }
}

impl PlanarField for ReducedField {
    fn rhs(&self, u: f64, v: f64) -> [f64; 2] {
        let x = PlanarState::new(u, v);
        let phi = slow_manifold_first_order(&self.params, self.epsilon, x);
        let (f, g) = kinetic(&self.params, u, v);
        [f - phi[0], g - phi[1]]
    }

    fn jacobian(&self, u: f64, v: f64) -> Matrix2 {
        let j = model::jacobian_raw(&self.params, u, v);
        let jp = slow_manifold_jacobian(&self.params, self.epsilon, PlanarState::new(u, v));
        [
            [j[0][0] - jp[0][0], j[0][1] - jp[0][1]],
            [j[1][0] - jp[1][0], j[1][1] - jp[1][1]],
        ]
    }
}

pub fn reduced_rhs(p: &ModelParams, epsilon: f64, x: PlanarState) -> [f64; 2] {
    ReducedField::new(*p, epsilon).at(x)
}

/// Periodic orbit of the reduced field, if any.
pub fn reduced_limit_cycle(p: &ModelParams, epsilon: f64) -> Result<Option<LimitCycle>> {
    cycles::find_limit_cycle(&ReducedField::new(*p, epsilon), p, RETURN_TOL)
}

/// Midpoint between the interior equilibrium abscissa and the symmetry axis
/// of the prey nullcline.
pub fn line_witness(p: &ModelParams) -> f64 {
    0.5 * (1.0 / (p.beta - 1.0) + 0.5 * (p.gamma - 1.0))
}

/// Whether the cycle reaches the vertical line `U = line_witness(p)`.
pub fn cycle_crosses_line_check(cycle: &LimitCycle, p: &ModelParams) -> bool {
    cycle.max_u() >= line_witness(p)
}

type Matrix4 = [[f64; 4]; 4];

fn char_poly(m: &Matrix4) -> [f64; 4] {
    // Faddeev-LeVerrier: lambda^4 + c3 lambda^3 + c2 lambda^2 + c1 lambda + c0
    let mut mk = *m;
    let mut coeffs = [0.0; 4];
    for k in 1..=4 {
        let c = -(0..4).map(|i| mk[i][i]).sum::<f64>() / k as f64;
        coeffs[4 - k] = c;
        if k == 4 {
            break;
        }
        let mut shifted = mk;
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] += c;
        }
        let mut next = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                next[i][j] = (0..4).map(|l| m[i][l] * shifted[l][j]).sum();
            }
        }
        mk = next;
    }
    coeffs
}

fn poly_eval(c: &[f64; 4], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for k in (0..4).rev() {
        dp = dp * z + p;
        p = p * z + c[k];
    }
    (p, dp)
}

fn cbrt_c(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        return z;
    }
    z.powf(1.0 / 3.0)
}

/// Roots of the monic cubic `m^3 + a m^2 + b m + c`.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let pp = b - a * a / 3.0;
    let qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = Complex64::new(qq * qq / 4.0 + pp * pp * pp / 27.0, 0.0).sqrt();
    let mut u = cbrt_c(-qq / 2.0 + disc);
    let alt = cbrt_c(-qq / 2.0 - disc);
    if alt.norm() > u.norm() {
        u = alt;
    }
    let omega = Complex64::new(-0.5, 0.5 * sqrt(3.0));
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    let mut uk = u;
    for r in roots.iter_mut() {
        let t = if uk.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            uk - pp / (3.0 * uk)
        };
        *r = t - shift;
        uk *= omega;
    }
    roots
}

/// Closed-form quartic roots (Ferrari) for the monic polynomial with
/// coefficients `[c0, c1, c2, c3]`.
fn quartic_roots(c: &[f64; 4]) -> [Complex64; 4] {
    let a = c[3];
    let shift = a / 4.0;
    let p = c[2] - 3.0 * a * a / 8.0;
    let q = c[1] - a * c[2] / 2.0 + a * a * a / 8.0;
    let r = c[0] - a * c[1] / 4.0 + a * a * c[2] / 16.0 - 3.0 * a * a * a * a / 256.0;
    let mut ys = [Complex64::new(0.0, 0.0); 4];
    let scale = 1.0 + fabs(p) + fabs(q) + fabs(r);
    if fabs(q) <= 1e-14 * scale {
        let d = Complex64::new(p * p - 4.0 * r, 0.0).sqrt();
        let z1 = (-p + d) / 2.0;
        let z2 = (-p - d) / 2.0;
        ys = [z1.sqrt(), -z1.sqrt(), z2.sqrt(), -z2.sqrt()];
    } else {
        // resolvent: 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0
        let ms = cubic_roots(p, p * p / 4.0 - r, -q * q / 8.0);
        let m = ms
            .iter()
            .copied()
            .fold(ms[0], |best, z| if z.norm() > best.norm() { z } else { best });
        let s = (2.0 * m).sqrt();
        let mut k = 0;
        for sign in [1.0, -1.0] {
            let inner = (-(2.0 * p + 2.0 * m + sign * 2.0 * q / s)).sqrt();
            ys[k] = (sign * s + inner) / 2.0;
            ys[k + 1] = (sign * s - inner) / 2.0;
            k += 2;
        }
    }
    let mut roots = [Complex64::new(0.0, 0.0); 4];
    for (r, y) in roots.iter_mut().zip(ys) {
        *r = y - shift;
    }
    roots
}

fn polish(c: &[f64; 4], mut z: Complex64) -> Complex64 {
    for _ in 0..8 {
        let (p, dp) = poly_eval(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Eigenvalues of a 4x4 matrix, ordered by decreasing real part.
///
/// Characteristic polynomial by Faddeev-LeVerrier, closed-form quartic
/// roots with Newton polishing; a Schur decomposition of the companion
/// matrix is used if any polished root leaves a large residual.
pub fn eigenvalues_4x4(m: &Matrix4) -> [Complex64; 4] {
    let c = char_poly(m);
    let mut roots = quartic_roots(&c).map(|z| polish(&c, z));
    let scale = 1.0 + c.iter().map(|x| fabs(*x)).fold(0.0, f64::max);
    let bad = roots.iter().any(|z| {
        let (p, _) = poly_eval(&c, *z);
        let r2 = (1.0 + z.norm()) * (1.0 + z.norm());
        !(p.norm() <= 1e-9 * scale * r2 * r2)
    });
    if bad {
        let companion = nalgebra::Matrix4::new(
            0.0, 0.0, 0.0, -c[0], //
            1.0, 0.0, 0.0, -c[1], //
            0.0, 1.0, 0.0, -c[2], //
            0.0, 0.0, 1.0, -c[3],
        );
        let ev = companion.complex_eigenvalues();
        for (r, z) in roots.iter_mut().zip(ev.iter()) {
            *r = Complex64::new(z.re, z.im);
        }
    }
    for z in roots.iter_mut() {
        if fabs(z.im) <= 1e-12 * (1.0 + fabs(z.re)) {
            z.im = 0.0;
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    roots
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Unit null vector of `m - lambda I` for a real eigenvalue, taken as the
/// largest column of the adjugate.
pub fn real_eigenvector_4x4(m: &Matrix4, lambda: f64) -> Option<[f64; 4]> {
    let mut a = *m;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    let mut best = [0.0; 4];
    let mut best_norm = 0.0;
    // column j of adj(a) holds the cofactors of row j
    for j in 0..4 {
        let mut col = [0.0; 4];
        for (i, c) in col.iter_mut().enumerate() {
            let mut minor = [[0.0; 3]; 3];
            let rows = (0..4).filter(|&r| r != j);
            for (mi, r) in rows.enumerate() {
                let cols = (0..4).filter(|&k| k != i);
                for (mk, k) in cols.enumerate() {
                    minor[mi][mk] = a[r][k];
                }
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *c = sign * det3(minor);
        }
        let n = sqrt(col.iter().map(|x| x * x).sum());
        if n > best_norm {
            best_norm = n;
            best = col;
        }
    }
    if !(best_norm > 0.0) {
        return None;
    }
    Some(best.map(|x| x / best_norm))
}

/// Outcome of a heteroclinic shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShootingVerdict {
    ToEquilibrium,
    ToWaveTrain,
    Escaped,
}

impl ShootingVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            ShootingVerdict::ToEquilibrium => "ToEquilibrium",
            ShootingVerdict::ToWaveTrain => "ToWaveTrain",
            ShootingVerdict::Escaped => "Escaped",
        }
    }
}

/// Seed offset along the departing eigenvector at `(gamma, 0, 0, 0)`.
pub const WAVE_SEED_OFFSET: f64 = 1e-7;
/// Hausdorff tolerance between the trailing coil and the reduced cycle.
pub const WAVE_CYCLE_TOL: f64 = 1e-2;
const RAY_STOP: f64 = 1e-6;
const RAY_CONVERGED: f64 = 1e-9;
const MAX_TURNS: usize = 400;

/// A heteroclinic profile leaving `(gamma, 0, 0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveHeteroclinic {
    /// States against the wave coordinate `s`, starting next to
    /// `(gamma, 0, 0, 0)`.
    pub orbit: Trajectory,
    pub verdict: ShootingVerdict,
    /// Eigenvalue (in `s`) and unit eigenvector of the departing direction.
    pub eigenvalue: f64,
    pub direction: [f64; 4],
    /// Seed `(gamma, 0, 0, 0) + WAVE_SEED_OFFSET * direction`.
    pub seed: [f64; 4],
    /// Shadow distance from `(gamma, 0)` at which the computed orbit meets the
    /// linearized departure.
    pub start_gap: f64,
    /// `|cos|` of the angle between the departing eigenvector and the orbit
    /// offset from `(gamma, 0, 0, 0)` at that point.
    pub seed_alignment: f64,
    /// Successive heights above the interior equilibrium at which the orbit
    /// crosses the ray `u1 = U2, v1 > V2`, in the order they are visited.
    pub ray_heights: Vec<f64>,
    pub min_u1: f64,
    pub min_v1: f64,
    pub final_distance: f64,
    pub cycle_distance: Option<f64>,
}

impl WaveHeteroclinic {
    pub fn shadow(&self) -> Vec<PlanarState> {
        self.orbit.iter().map(|(_, y)| PlanarState::new(y[0], y[2])).collect()
    }
}

/// Departing eigen-direction at `(gamma, 0, 0, 0)`: real, with positive `v1`
/// component, growing in the wave coordinate `s` (decaying in `tau`).
pub fn departing_direction(p: &ModelParams, w: &WaveParams) -> Result<(f64, [f64; 4])> {
    let m = wave_jacobian(p, w, WaveState4::new(p.gamma, 0.0, 0.0, 0.0));
    let mut chosen: Option<(f64, [f64; 4])> = None;
    for z in eigenvalues_4x4(&m) {
        if z.im != 0.0 || !(z.re < 0.0) {
            continue;
        }
        let Some(mut e) = real_eigenvector_4x4(&m, z.re) else {
            continue;
        };
        if e[2] < 0.0 {
            e = e.map(|x| -x);
        }
        if e[2] > 1e-8 {
            // slowest such direction: the one carried by the shadow
            if chosen.map_or(true, |(l, _)| z.re > l) {
                chosen = Some((z.re, e));
            }
        }
    }
    let (lambda, e) = chosen.ok_or_else(|| {
        Error::Spectral("no real departing direction with v1 > 0 at (gamma, 0, 0, 0)".into())
    })?;
    Ok((-lambda / w.c, e))
}

/// Lifts a shadow point onto the first-order slow manifold.
pub fn lift_to_slow_manifold(p: &ModelParams, epsilon: f64, x: PlanarState) -> WaveState4 {
    let phi = slow_manifold_first_order(p, epsilon, x);
    let (f, g) = kinetic(p, x.u, x.v);
    WaveState4::new(x.u, phi[0] - f, x.v, phi[1] - g)
}

enum Shot {
    /// Returned to the ray at this height.
    Return(f64),
    Left,
    Right,
}

struct Shooter<'a> {
    p: &'a ModelParams,
    eps: f64,
    field: WaveField,
    eq: PlanarState,
    ray: Section,
    rho: f64,
    t_max: f64,
}

impl Shooter<'_> {
    fn seed(&self, r: f64) -> [f64; 4] {
        lift_to_slow_manifold(self.p, self.eps, PlanarState::new(self.eq.u, self.eq.v + r)).to_array()
    }

    /// Follows the seed at height `r` forward in internal time until it
    /// returns to the ray, or passes `(gamma, 0)` on one side.
    fn shoot(&self, r: f64, mut keep: Option<&mut Trajectory>) -> Result<Shot> {
        let y0 = self.seed(r);
        if let Some(t) = keep.as_deref_mut() {
            t.push(0.0, &y0);
        }
        let opts = AdaptiveOptions::new(1e-11, 1e-13);
        let mut stepper = Dopri5::new(&self.field, &y0, self.t_max, opts)?;
        let g = self.p.gamma;
        let mut entered = false;
        while stepper.time() < self.t_max {
            let step: AcceptedStep = match stepper.step(self.t_max) {
                Ok(s) => s,
                Err(Error::StepUnderflow { .. }) | Err(Error::NonFinite { .. }) => {
                    return Ok(Shot::Right)
                }
                Err(e) => return Err(e),
            };
            if let Some(c) = step_crossing(&self.field, &self.ray, &step) {
                if c.state[2] > self.eq.v {
                    if let Some(t) = keep.as_deref_mut() {
                        t.push(c.t, &c.state);
                    }
                    return Ok(Shot::Return(c.state[2] - self.eq.v));
                }
            }
            if let Some(t) = keep.as_deref_mut() {
                t.push(step.t1, &step.y1);
            }
            let y = &step.y1;
            let dist = hypot(y[0] - g, y[2]);
            if dist < self.rho {
                entered = true;
            } else if entered {
                return Ok(if y[0] > g { Shot::Right } else { Shot::Left });
            }
            if y[0] > g + self.rho {
                return Ok(Shot::Right);
            }
        }
        Err(Error::NoReturn { t_max: self.t_max })
    }

    /// Return height, with anything that does not come back counted as
    /// infinitely far.
    fn return_height(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        match self.shoot(r, None)? {
            Shot::Return(h) => Ok(h),
            _ => Ok(f64::INFINITY),
        }
    }

    fn side_is_left(&self, r: f64) -> Result<bool> {
        Ok(match self.shoot(r, None)? {
            Shot::Return(_) | Shot::Left => true,
            Shot::Right => false,
        })
    }
}

const ALIGNMENT_MIN: f64 = 0.999;
const LINEAR_SAMPLES: usize = 32;

/// Appends (in internal time) the linearized approach from the last point of
/// `head` down to the seed distance along `e`, when the last point already
/// lies on that direction. `rate` is the decay rate in internal time.
fn alignment(y: &[f64], gamma: f64, e: &[f64; 4]) -> f64 {
    let d = [y[0] - gamma, y[1], y[2], y[3]];
    let norm = sqrt(d.iter().map(|x| x * x).sum());
    fabs(d.iter().zip(e).map(|(a, b)| a * b).sum::<f64>()) / norm
}

fn extend_to_seed(head: &mut Trajectory, gamma: f64, rate: f64, e: &[f64; 4]) -> f64 {
    let y = head.last_state();
    let norm = sqrt((y[0] - gamma) * (y[0] - gamma) + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]);
    let cos = alignment(y, gamma, e);
    if !(cos >= ALIGNMENT_MIN) || norm <= WAVE_SEED_OFFSET {
        return cos;
    }
    let t_c = head.last_time();
    let ratio = WAVE_SEED_OFFSET / norm;
    for k in 1..=LINEAR_SAMPLES {
        let frac = libm::pow(ratio, k as f64 / LINEAR_SAMPLES as f64);
        let dist = norm * frac;
        let t = t_c + libm::log(frac) / -rate;
        let z = [gamma + dist * e[0], dist * e[1], dist * e[2], dist * e[3]];
        head.push(t, &z);
    }
    cos
}

fn bisect<P: FnMut(f64) -> Result<bool>>(mut lo: f64, mut hi: f64, mut is_low: P) -> Result<(f64, f64)> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if is_low(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// First crossing of the reduced-system orbit leaving `(gamma, 0)` with the
/// ray above the interior equilibrium.
fn reduced_first_height(p: &ModelParams, eps: f64) -> Result<f64> {
    let red = ReducedField::new(*p, eps);
    let e = cycles::unstable_direction_at_gamma(&red, p)?;
    let (sec, eq) = cycles::cycle_section(p)?;
    let seed = [p.gamma + 1e-7 * e[0], 1e-7 * e[1]];
    let c = first_crossing(&Planar(red), &seed, &sec, 1e4, AdaptiveOptions::new(1e-11, 1e-13), |_| {})?;
    Ok(c.state[1] - eq.v)
}

/// Computes the profile leaving `(gamma, 0, 0, 0)` into the positive
/// quadrant at speed `c`.
///
/// The departing direction is unstable in the wave coordinate but the fast
/// variables make the system violently unstable in that direction, so the
/// orbit is found in internal time instead: seeds on the slow manifold over
/// the ray `u1 = U2` are sorted by which side of `(gamma, 0)` they pass, the
/// separating height is bisected, and earlier turns are recovered by
/// inverting the first-return map. `horizon` caps each internal-time shot.
pub fn shoot_heteroclinic_4d(p: &ModelParams, c: f64, horizon: f64) -> Result<WaveHeteroclinic> {
    if !p.has_interior() {
        return Err(Error::domain("wave shooting requires gamma (beta - 1) > 1"));
    }
    let w = WaveParams::from_speed(c)?;
    let (eigenvalue, direction) = departing_direction(p, &w)?;
    let (ray, eq) = cycles::cycle_section(p)?;
    let ray = Section::axis(4, 0, ray.offset, Orientation::Increasing);
    let sh = Shooter {
        p,
        eps: w.epsilon,
        field: WaveField::new(*p, &w),
        eq,
        ray,
        rho: 0.2 * (p.gamma - eq.u).min(eq.v),
        t_max: horizon,
    };

    // bracket the last turn around the reduced-system estimate
    let r0 = reduced_first_height(p, w.epsilon)?;
    let mut delta = 1e-4;
    let (lo, hi) = loop {
        let (lo, hi) = (r0 * (1.0 - delta), r0 * (1.0 + delta));
        if sh.side_is_left(lo)? && !sh.side_is_left(hi)? {
            break (lo, hi);
        }
        delta *= 2.0;
        if delta > 0.5 {
            return Err(Error::NoConvergence {
                iterations: 13,
                what: "bracket for the departing profile".into(),
            });
        }
    };
    let (lo, hi) = bisect(lo, hi, |r| sh.side_is_left(r))?;

    let mut last = Trajectory::new(4);
    let mut alt = Trajectory::new(4);
    sh.shoot(lo, Some(&mut last))?;
    sh.shoot(hi, Some(&mut alt))?;
    let saddle = PlanarState::new(p.gamma, 0.0);
    let closest = |t: &Trajectory| {
        (0..t.len())
            .map(|i| (i, PlanarState::new(t.state(i)[0], t.state(i)[2]).dist(&saddle)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    };
    let (ia, da) = closest(&last);
    let (ib, db) = closest(&alt);
    let (head, cut) = if da <= db { (last, ia) } else { (alt, ib) };
    // the incoming branch follows the eigenvector until the outgoing
    // component takes over near the closest approach
    let cut = (0..=cut)
        .rev()
        .find(|&i| alignment(head.state(i), p.gamma, &direction) >= ALIGNMENT_MIN)
        .unwrap_or(cut);
    let start_gap = PlanarState::new(head.state(cut)[0], head.state(cut)[2]).dist(&saddle);
    let mut head = Trajectory::from_parts(
        4,
        head.times[..=cut].to_vec(),
        head.states_flat()[..4 * (cut + 1)].to_vec(),
    );
    let seed_alignment = extend_to_seed(&mut head, p.gamma, eigenvalue * w.c, &direction);

    // earlier turns: invert the first-return map
    let mut heights = alloc::vec![lo];
    let mut segments = alloc::vec![head];
    for _ in 0..MAX_TURNS {
        let target = *heights.last().unwrap();
        let (a, b) = bisect(0.0, target, |r| Ok(sh.return_height(r)? < target))?;
        let r = 0.5 * (a + b);
        let mut seg = Trajectory::new(4);
        match sh.shoot(r, Some(&mut seg))? {
            Shot::Return(_) => {}
            _ => break,
        }
        heights.push(r);
        segments.push(seg);
        if r < RAY_STOP * eq.v.max(1.0) || fabs(target - r) <= RAY_CONVERGED * target {
            break;
        }
    }

    // stitch in internal time, innermost turn first
    let mut tau = Trajectory::new(4);
    let mut t0 = 0.0;
    for seg in segments.iter().rev() {
        let skip = usize::from(!tau.is_empty());
        for i in skip..seg.len() {
            tau.push(t0 + seg.times[i], seg.state(i));
        }
        t0 = tau.last_time();
    }
    let orbit = profile_reparametrize(&tau, &w);

    let (mut min_u1, mut min_v1) = (f64::INFINITY, f64::INFINITY);
    for (_, y) in orbit.iter() {
        min_u1 = min_u1.min(y[0]);
        min_v1 = min_v1.min(y[2]);
    }
    let end = PlanarState::new(orbit.last_state()[0], orbit.last_state()[2]);
    let final_distance = end.dist(&eq);
    let mut cycle_distance = None;
    let verdict = if final_distance < EQUILIBRIUM_CAPTURE {
        ShootingVerdict::ToEquilibrium
    } else {
        match reduced_limit_cycle(p, w.epsilon)? {
            Some(cyc) => {
                let coil: Vec<PlanarState> = segments
                    .last()
                    .unwrap()
                    .iter()
                    .map(|(_, y)| PlanarState::new(y[0], y[2]))
                    .collect();
                let h = hausdorff(&coil, &cyc.points);
                cycle_distance = Some(h);
                if h < WAVE_CYCLE_TOL {
                    ShootingVerdict::ToWaveTrain
                } else {
                    ShootingVerdict::Escaped
                }
            }
            None => ShootingVerdict::Escaped,
        }
    };

    Ok(WaveHeteroclinic {
        orbit,
        verdict,
        eigenvalue,
        direction,
        seed: [
            p.gamma + WAVE_SEED_OFFSET * direction[0],
            WAVE_SEED_OFFSET * direction[1],
            WAVE_SEED_OFFSET * direction[2],
            WAVE_SEED_OFFSET * direction[3],
        ],
        start_gap,
        seed_alignment,
        ray_heights: heights,
        min_u1,
        min_v1,
        final_distance,
        cycle_distance,
    })
}

/// Profile along the invariant prey axis `v1 = v2 = 0`, from `(0, 0, 0, 0)`
/// to `(gamma, 0, 0, 0)` in the wave coordinate.
///
/// In internal time this is the one-dimensional unstable manifold of
/// `(gamma, 0, 0, 0)`, followed until `u1` falls below `1e-8`.
pub fn shoot_prey_axis(p: &ModelParams, c: f64, horizon: f64) -> Result<Trajectory> {
    let w = WaveParams::from_speed(c)?;
    // (u1, u2) block at u1 = gamma: [[0, eps], [alpha gamma / d, -1/d]]
    let a = p.alpha * p.gamma / p.d;
    let tr = -1.0 / p.d;
    let det = -w.epsilon * a;
    let lambda = 0.5 * (tr + sqrt(tr * tr - 4.0 * det));
    // eigenvector (eps, lambda), pointed toward smaller u1
    let n = hypot(w.epsilon, lambda);
    let e = [-w.epsilon / n, -lambda / n];
    let y0 = [p.gamma + WAVE_SEED_OFFSET * e[0], WAVE_SEED_OFFSET * e[1], 0.0, 0.0];
    let field = WaveField::new(*p, &w);
    let tau = crate::ode::integrate_with(&field, &y0, horizon, AdaptiveOptions::new(1e-11, 1e-14), |_, y| {
        fabs(y[0]) < 1e-8
    })?;
    Ok(profile_reparametrize(&tau, &w))
}

/// Eigenvalues of the reduced Jacobian at a point.
pub fn reduced_eigenvalues(p: &ModelParams, epsilon: f64, x: PlanarState) -> [Complex64; 2] {
    model::eigenvalues_2x2(&ReducedField::new(*p, epsilon).jacobian(x.u, x.v))
}
