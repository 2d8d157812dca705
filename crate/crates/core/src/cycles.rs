//! Attractor-level analysis of planar predator-prey fields: the invariant
//! triangle, Poincare return maps on the ray above the interior equilibrium,
//! limit cycles and their divergence integrals, seeded global-stability and
//! persistence probes, and the orbit leaving `(gamma, 0)`.
//!
//! Every routine is generic over [`PlanarField`] so that the same machinery
//! serves the kinetic field and its slow-manifold perturbation.

use alloc::vec;
use alloc::vec::Vec;
use libm::{atan2, fabs, hypot, sqrt};
use rand_core::{RngCore, SeedableRng};
use rand_pcg::Pcg32;

use crate::error::{Error, Result};
use crate::field::{KineticField, Planar, PlanarField};
use crate::model::{ModelParams, PlanarState};
use crate::ode::{
    first_crossing, integrate_to_times, AdaptiveOptions, Dopri5, Orientation, Reversed, Section,
    Trajectory,
};

/// Default number of uniform-time samples on a located cycle.
pub const CYCLE_SAMPLES: usize = 4096;
/// Distance below which an orbit is taken to have reached the equilibrium.
pub const EQUILIBRIUM_CAPTURE: f64 = 1e-5;
/// Hausdorff distance below which an orbit is taken to lie on a cycle.
pub const CYCLE_CAPTURE: f64 = 1e-3;
/// Default fixed-point tolerance of the return map.
pub const RETURN_TOL: f64 = 1e-10;
const MAX_CYCLE_ITERS: usize = 500;
const RETURN_T_MAX: f64 = 1e3;

pub(crate) fn tight() -> AdaptiveOptions {
    AdaptiveOptions::new(1e-11, 1e-13)
}

/// Forward-invariant triangle `{beta U + V <= r, U, V >= 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTriangle {
    pub r: f64,
    pub beta: f64,
}

impl InvariantTriangle {
    pub fn contains(&self, s: PlanarState, slack: f64) -> bool {
        s.u >= -slack && s.v >= -slack && self.beta * s.u + s.v <= self.r + slack
    }

    /// Hypotenuse point at fraction `x` from the V-axis to the U-axis.
    pub fn hypotenuse(&self, x: f64) -> PlanarState {
        let u = x * self.r / self.beta;
        PlanarState::new(u, (self.r - self.beta * u).max(0.0))
    }
}

const HYPOTENUSE_SAMPLES: usize = 1000;

fn hypotenuse_inward(p: &ModelParams, tri: &InvariantTriangle) -> bool {
    let f = KineticField::new(*p);
    (0..HYPOTENUSE_SAMPLES).all(|i| {
        let s = tri.hypotenuse(i as f64 / (HYPOTENUSE_SAMPLES - 1) as f64);
        let [fu, gv] = f.at(s);
        p.beta * fu + gv < 0.0
    })
}

/// Smallest `R` of the doubling ladder `R0 = beta (gamma + 1) + 1, 2 R0, ...`
/// for which `beta F + G < 0` at every sampled hypotenuse point.
pub fn invariant_triangle(p: &ModelParams) -> Result<InvariantTriangle> {
    let mut tri = InvariantTriangle {
        r: p.beta * (p.gamma + 1.0) + 1.0,
        beta: p.beta,
    };
    for _ in 0..=60 {
        if hypotenuse_inward(p, &tri) {
            return Ok(tri);
        }
        tri.r *= 2.0;
    }
    Err(Error::Configuration(
        "no invariant triangle found after 60 doublings".into(),
    ))
}

/// The section `U = U2` crossed leftward, i.e. on the ray above the interior
/// equilibrium where `F < 0`.
pub fn cycle_section(p: &ModelParams) -> Result<(Section, PlanarState)> {
    let eq = p
        .interior()
        .ok_or_else(|| Error::domain("no interior equilibrium"))?;
    Ok((Section::axis(2, 0, eq.u, Orientation::Decreasing), eq))
}

/// First return of the orbit through `s` to `sec`, with the return time.
pub fn poincare_map<P: PlanarField>(
    field: &P,
    sec: &Section,
    s: PlanarState,
    t_max: f64,
) -> Result<(PlanarState, f64)> {
    if fabs(sec.value(&s.to_array())) > 1e-10 {
        return Err(Error::domain("start point is not on the section"));
    }
    let c = first_crossing(&Planar(field), &s.to_array(), sec, t_max, tight(), |_| {})?;
    Ok((PlanarState::from_slice(&c.state), c.t))
}

/// A closed orbit sampled at uniform times `times[k] = k T / N`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    pub points: Vec<PlanarState>,
    pub times: Vec<f64>,
    pub period: f64,
    pub closure_residual: f64,
    pub divergence_integral: f64,
    pub encloses: PlanarState,
}

impl LimitCycle {
    pub fn max_u(&self) -> f64 {
        self.points.iter().map(|s| s.u).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|U - U_eq|` along the orbit.
    pub fn u_amplitude(&self) -> f64 {
        self.points
            .iter()
            .map(|s| fabs(s.u - self.encloses.u))
            .fold(0.0, f64::max)
    }

    pub fn winding_number(&self) -> i32 {
        winding_number(&self.points, self.encloses)
    }

    /// Ray crossing (height above the enclosed equilibrium) of the first sample.
    pub fn section_height(&self) -> f64 {
        self.points[0].v - self.encloses.v
    }
}

/// Return map restricted to the ray: height above the equilibrium in, height
/// out, plus the return time.
struct RayMap<'a, P> {
    field: &'a P,
    sec: Section,
    eq: PlanarState,
}

impl<P: PlanarField> RayMap<'_, P> {
    fn apply(&self, x: f64) -> Result<(f64, f64)> {
        let s = PlanarState::new(self.eq.u, self.eq.v + x);
        let (out, t) = poincare_map(self.field, &self.sec, s, RETURN_T_MAX)?;
        Ok((out.v - self.eq.v, t))
    }
}

/// Locates the periodic orbit around the interior equilibrium starting on the
/// ray halfway to the top of the invariant triangle.
pub fn find_limit_cycle<P: PlanarField>(
    field: &P,
    p: &ModelParams,
    tol: f64,
) -> Result<Option<LimitCycle>> {
    let eq = p
        .interior()
        .ok_or_else(|| Error::domain("no interior equilibrium"))?;
    let tri = invariant_triangle(p)?;
    let top = tri.r - p.beta * eq.u;
    let start = PlanarState::new(eq.u, eq.v + 0.5 * (top - eq.v).max(0.1));
    find_limit_cycle_from(field, p, start, tol)
}

/// As [`find_limit_cycle`], starting from an arbitrary interior point.
///
/// Fixed-point iteration of the ray return map, switching to secant steps
/// once two iterates are available. `None` when the iterates collapse onto
/// the equilibrium.
pub fn find_limit_cycle_from<P: PlanarField>(
    field: &P,
    p: &ModelParams,
    start: PlanarState,
    tol: f64,
) -> Result<Option<LimitCycle>> {
    let (sec, eq) = cycle_section(p)?;
    let map = RayMap { field, sec, eq };
    let x_min = 1e-7 * eq.v.max(1.0);

    let mut x = if fabs(start.u - eq.u) <= 1e-10 && start.v > eq.v {
        start.v - eq.v
    } else {
        if start.dist(&eq) < 1e-12 {
            return Ok(None);
        }
        let c = first_crossing(
            &Planar(field),
            &start.to_array(),
            &map.sec,
            RETURN_T_MAX,
            tight(),
            |_| {},
        )?;
        c.state[1] - eq.v
    };
    if x < x_min {
        return Ok(None);
    }

    let mut prev: Option<(f64, f64)> = None;
    for it in 0..MAX_CYCLE_ITERS {
        let (px, _) = map.apply(x)?;
        let g = px - x;
        if fabs(g) <= tol {
            return build_cycle(field, &map, x).map(Some);
        }
        if px < x_min {
            return Ok(None);
        }
        let mut next = px;
        if let Some((x0, g0)) = prev {
            if it >= 2 && g != g0 {
                let xs = x - g * (x - x0) / (g - g0);
                if xs.is_finite() && xs > x_min && xs < 4.0 * x.max(px) {
                    next = xs;
                } else if xs.is_finite() && xs <= x_min && g < 0.0 {
                    // secant points at the equilibrium: confirm it attracts
                    // locally before giving up on a cycle
                    let probe = 10.0 * x_min;
                    let (pp, _) = map.apply(probe)?;
                    if pp < probe {
                        return Ok(None);
                    }
                }
            }
        }
        prev = Some((x, g));
        x = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_CYCLE_ITERS,
        what: "limit-cycle fixed point".into(),
    })
}

fn build_cycle<P: PlanarField>(field: &P, map: &RayMap<'_, P>, x: f64) -> Result<LimitCycle> {
    let (_, period) = map.apply(x)?;
    sample_cycle(field, PlanarState::new(map.eq.u, map.eq.v + x), period, map.eq, CYCLE_SAMPLES)
}

/// Samples the orbit through `start` over one `period` and packages it.
pub fn sample_cycle<P: PlanarField>(
    field: &P,
    start: PlanarState,
    period: f64,
    encloses: PlanarState,
    samples: usize,
) -> Result<LimitCycle> {
    let times: Vec<f64> = (0..=samples)
        .map(|k| period * k as f64 / samples as f64)
        .collect();
    let traj = integrate_to_times(&Planar(field), &start.to_array(), &times, tight())?;
    let points: Vec<PlanarState> = traj.iter().map(|(_, y)| PlanarState::from_slice(y)).collect();
    if points.iter().any(|s| !(s.u > 0.0 && s.v > 0.0)) {
        return Err(Error::domain("periodic orbit leaves the open quadrant"));
    }
    let closure_residual = points[0].dist(&points[samples]);
    let mut cycle = LimitCycle {
        points,
        times,
        period,
        closure_residual,
        divergence_integral: 0.0,
        encloses,
    };
    cycle.divergence_integral = cycle_stability_integral(|u, v| field.divergence(u, v), &cycle);
    Ok(cycle)
}

/// `int_0^T div dt` along the cycle by the periodic trapezoid rule on the
/// uniform-time samples.
pub fn cycle_stability_integral<D: Fn(f64, f64) -> f64>(div: D, cycle: &LimitCycle) -> f64 {
    let n = cycle.points.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let h = cycle.period / n as f64;
    h * cycle.points[..n].iter().map(|s| div(s.u, s.v)).sum::<f64>()
}

/// Net number of turns of a closed polyline around `center`.
pub fn winding_number(points: &[PlanarState], center: PlanarState) -> i32 {
    let mut total = 0.0;
    for w in points.windows(2) {
        let a = atan2(w[0].v - center.v, w[0].u - center.u);
        let b = atan2(w[1].v - center.v, w[1].u - center.u);
        let mut d = b - a;
        while d > core::f64::consts::PI {
            d -= 2.0 * core::f64::consts::PI;
        }
        while d < -core::f64::consts::PI {
            d += 2.0 * core::f64::consts::PI;
        }
        total += d;
    }
    libm::round(total / (2.0 * core::f64::consts::PI)) as i32
}

fn point_segment(p: PlanarState, a: PlanarState, b: PlanarState) -> f64 {
    let (dx, dy) = (b.u - a.u, b.v - a.v);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.u - a.u) * dx + (p.v - a.v) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    hypot(p.u - (a.u + t * dx), p.v - (a.v + t * dy))
}

fn directed_hausdorff(a: &[PlanarState], b: &[PlanarState]) -> f64 {
    if b.len() == 1 {
        return a.iter().map(|p| p.dist(&b[0])).fold(0.0, f64::max);
    }
    let segs = b.len() - 1;
    let mut worst: f64 = 0.0;
    let mut hint = 0;
    for &p in a {
        // scan outward from the previous nearest segment; once any segment is
        // closer than `worst`, this point cannot raise the maximum
        let mut best = f64::INFINITY;
        let mut best_k = hint;
        for off in 0..segs {
            let k = (hint + off) % segs;
            let d = point_segment(p, b[k], b[k + 1]);
            if d < best {
                best = d;
                best_k = k;
                if best <= worst {
                    break;
                }
            }
        }
        hint = best_k;
        worst = worst.max(best);
    }
    worst
}

/// Hausdorff distance between two polylines (vertex-to-segment).
pub fn hausdorff(a: &[PlanarState], b: &[PlanarState]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Deterministic sampler of interior points of the invariant triangle.
pub struct TriangleSampler {
    rng: Pcg32,
    tri: InvariantTriangle,
}

impl TriangleSampler {
    pub fn new(tri: InvariantTriangle, seed: u64) -> Self {
        TriangleSampler {
            rng: Pcg32::seed_from_u64(seed),
            tri,
        }
    }

    fn unit(&mut self) -> f64 {
        // open interval (0, 1)
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_point(&mut self) -> PlanarState {
        let (mut a, mut b) = (self.unit(), self.unit());
        if a + b > 1.0 {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        PlanarState::new(a * self.tri.r / self.tri.beta, b * self.tri.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub start: PlanarState,
    pub end: PlanarState,
    pub distance: f64,
}

/// Outcome of [`global_stability_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProbe {
    pub samples: Vec<ProbeSample>,
    pub max_distance: Option<f64>,
    /// Every final state within `tolerance` of the interior equilibrium.
    pub converged: bool,
    pub tolerance: f64,
}

/// Tolerance of the global-stability verdict.
pub const PROBE_TOL: f64 = 1e-6;

/// Integrates the kinetic field from `n` seeded interior points of the
/// invariant triangle and reports the final distances to the interior
/// equilibrium.
pub fn global_stability_probe(
    p: &ModelParams,
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<StabilityProbe> {
    let eq = p
        .interior()
        .ok_or_else(|| Error::domain("no interior equilibrium"))?;
    let tri = invariant_triangle(p)?;
    let mut sampler = TriangleSampler::new(tri, seed);
    let field = Planar(KineticField::new(*p));
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let start = sampler.next_point();
        let traj = integrate_to_times(&field, &start.to_array(), &[horizon], tight())?;
        let end = PlanarState::from_slice(traj.last_state());
        samples.push(ProbeSample {
            start,
            end,
            distance: end.dist(&eq),
        });
    }
    let max_distance = samples.iter().map(|s| s.distance).reduce(f64::max);
    Ok(StabilityProbe {
        converged: max_distance.map_or(true, |d| d <= PROBE_TOL),
        samples,
        max_distance,
        tolerance: PROBE_TOL,
    })
}

/// Numerical lower bound on the liminf of both species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceReport {
    pub theta_estimate: f64,
    pub samples: usize,
    pub horizon: f64,
}

const PERSISTENCE_DT: f64 = 0.02;

/// Minimum of `min(U, V)` over the second half of the horizon, across `n`
/// seeded interior starts.
pub fn persistence_floor(
    p: &ModelParams,
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<PersistenceReport> {
    if !p.has_interior() {
        return Err(Error::domain("persistence requires gamma (beta - 1) > 1"));
    }
    if n == 0 || !(horizon > 0.0) {
        return Err(Error::domain("need at least one sample and a positive horizon"));
    }
    let tri = invariant_triangle(p)?;
    let mut sampler = TriangleSampler::new(tri, seed);
    let field = Planar(KineticField::new(*p));
    let steps = libm::ceil(0.5 * horizon / PERSISTENCE_DT) as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|k| 0.5 * horizon + 0.5 * horizon * k as f64 / steps as f64)
        .collect();
    let mut theta = f64::INFINITY;
    for _ in 0..n {
        let start = sampler.next_point();
        let traj = integrate_to_times(&field, &start.to_array(), &times, tight())?;
        for (_, y) in traj.iter() {
            theta = theta.min(y[0].min(y[1]));
        }
    }
    Ok(PersistenceReport {
        theta_estimate: theta,
        samples: n,
        horizon,
    })
}

/// Where an orbit ends up.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaLimit {
    Equilibrium { point: PlanarState, distance: f64 },
    Cycle { hausdorff: f64, cycle: LimitCycle },
    Unclassified { last: PlanarState },
}

impl OmegaLimit {
    pub fn label(&self) -> &'static str {
        match self {
            OmegaLimit::Equilibrium { .. } => "equilibrium",
            OmegaLimit::Cycle { .. } => "cycle",
            OmegaLimit::Unclassified { .. } => "unclassified",
        }
    }
}

/// Classifies the end state of an orbit: equilibrium within
/// [`EQUILIBRIUM_CAPTURE`], else a located cycle within `cycle_tol` of the
/// trailing segment (one period integrated onward from `last`), else
/// unclassified.
pub fn classify_omega<P: PlanarField>(
    field: &P,
    p: &ModelParams,
    last: PlanarState,
    cycle_tol: f64,
) -> Result<OmegaLimit> {
    let eq = p
        .interior()
        .ok_or_else(|| Error::domain("no interior equilibrium"))?;
    let distance = last.dist(&eq);
    if distance < EQUILIBRIUM_CAPTURE {
        return Ok(OmegaLimit::Equilibrium { point: eq, distance });
    }
    let cycle = match find_limit_cycle_from(field, p, last, RETURN_TOL) {
        Ok(Some(c)) => c,
        Ok(None) | Err(_) => return Ok(OmegaLimit::Unclassified { last }),
    };
    let trailing = sample_cycle(field, last, cycle.period, eq, CYCLE_SAMPLES)
        .map(|c| c.points)
        .or_else(|_| trailing_any(field, last, cycle.period))?;
    let h = hausdorff(&trailing, &cycle.points);
    if h < cycle_tol {
        Ok(OmegaLimit::Cycle { hausdorff: h, cycle })
    } else {
        Ok(OmegaLimit::Unclassified { last })
    }
}

fn trailing_any<P: PlanarField>(field: &P, last: PlanarState, span: f64) -> Result<Vec<PlanarState>> {
    let times: Vec<f64> = (0..=CYCLE_SAMPLES)
        .map(|k| span * k as f64 / CYCLE_SAMPLES as f64)
        .collect();
    let traj = integrate_to_times(&Planar(field), &last.to_array(), &times, tight())?;
    Ok(traj.iter().map(|(_, y)| PlanarState::from_slice(y)).collect())
}

/// Heteroclinic seed offset along the unstable eigenvector of `(gamma, 0)`.
pub const SEED_OFFSET: f64 = 1e-7;

/// Orbit leaving `(gamma, 0)` into the interior with its end-state diagnosis.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroclinicOrbit {
    pub orbit: Trajectory,
    pub direction: [f64; 2],
    pub offset: f64,
    pub omega: OmegaLimit,
}

impl HeteroclinicOrbit {
    pub fn points(&self) -> Vec<PlanarState> {
        self.orbit.iter().map(|(_, y)| PlanarState::from_slice(y)).collect()
    }
}

/// Unit eigenvector of the positive eigenvalue at `(gamma, 0)`, oriented into
/// `V > 0`.
pub fn unstable_direction_at_gamma<P: PlanarField>(field: &P, p: &ModelParams) -> Result<[f64; 2]> {
    let j = field.jacobian(p.gamma, 0.0);
    let ev = crate::model::eigenvalues_2x2(&j);
    let lambda = ev[0].re;
    if ev[0].im != 0.0 || !(lambda > 0.0) {
        return Err(Error::Spectral("(gamma, 0) has no unstable direction".into()));
    }
    // rows of (J - lambda I) are orthogonal to the eigenvector
    let r0 = [j[0][0] - lambda, j[0][1]];
    let r1 = [j[1][0], j[1][1] - lambda];
    let r = if hypot(r0[0], r0[1]) >= hypot(r1[0], r1[1]) { r0 } else { r1 };
    let mut e = [-r[1], r[0]];
    let norm = hypot(e[0], e[1]);
    if norm == 0.0 {
        return Err(Error::Spectral("degenerate eigenvector at (gamma, 0)".into()));
    }
    e = [e[0] / norm, e[1] / norm];
    if e[1] < 0.0 {
        e = [-e[0], -e[1]];
    }
    if !(e[1] > 0.0) {
        return Err(Error::Spectral(
            "unstable eigenvector does not enter the quadrant".into(),
        ));
    }
    Ok(e)
}

/// Sampling interval of heteroclinic orbits.
pub const ORBIT_DT: f64 = 0.02;

/// Orbit seeded at `(gamma, 0) + 1e-7 e_u`, integrated to `horizon` and
/// sampled every [`ORBIT_DT`].
pub fn heteroclinic_from_gamma<P: PlanarField>(
    field: &P,
    p: &ModelParams,
    horizon: f64,
) -> Result<HeteroclinicOrbit> {
    heteroclinic_from_gamma_with_offset(field, p, horizon, SEED_OFFSET)
}

pub fn heteroclinic_from_gamma_with_offset<P: PlanarField>(
    field: &P,
    p: &ModelParams,
    horizon: f64,
    offset: f64,
) -> Result<HeteroclinicOrbit> {
    if !p.has_interior() {
        return Err(Error::domain("heteroclinic requires gamma (beta - 1) > 1"));
    }
    let e = unstable_direction_at_gamma(field, p)?;
    let seed = [p.gamma + offset * e[0], offset * e[1]];
    let n = libm::ceil(horizon / ORBIT_DT) as usize;
    let times: Vec<f64> = (0..=n).map(|k| horizon * k as f64 / n as f64).collect();
    let orbit = integrate_to_times(&Planar(field), &seed, &times, tight())?;
    let last = PlanarState::from_slice(orbit.last_state());
    let omega = classify_omega(field, p, last, CYCLE_CAPTURE)?;
    Ok(HeteroclinicOrbit {
        orbit,
        direction: e,
        offset,
        omega,
    })
}

/// Points of the orbit after it first leaves the ball of radius `r` around
/// `(gamma, 0)`.
pub fn past_saddle(orbit: &HeteroclinicOrbit, gamma: f64, r: f64) -> Vec<PlanarState> {
    let saddle = PlanarState::new(gamma, 0.0);
    let pts = orbit.points();
    let first = pts.iter().position(|s| s.dist(&saddle) > r).unwrap_or(pts.len());
    pts[first..].to_vec()
}

/// What the backward orbit of an interior point does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OriginExclusion {
    /// The orbit left every bounded set: `component` (0 = U, 1 = V)
    /// exceeded the blow-up threshold at backward time `t`.
    BlowUp { t: f64, component: usize },
    /// The start is an equilibrium.
    Stationary,
    /// The backward orbit settled on an equilibrium away from the origin.
    Settled { t: f64, at: PlanarState },
    /// The backward orbit came within the capture radius of `(0, 0)`.
    ReachedOrigin { t: f64 },
    /// Neither happened before the horizon.
    Inconclusive,
}

impl OriginExclusion {
    /// True unless the backward orbit was seen approaching the origin.
    pub fn excludes_origin(&self) -> bool {
        !matches!(self, OriginExclusion::ReachedOrigin { .. })
    }
}

/// Threshold for the backward blow-up witness.
pub const BLOW_UP: f64 = 1e6;
const ORIGIN_CAPTURE: f64 = 1e-3;
const SETTLE_SPEED: f64 = 1e-7;

/// Follows the orbit through `start` backward in time until it escapes
/// beyond [`BLOW_UP`] or approaches the origin.
pub fn backward_fate<P: PlanarField>(
    field: &P,
    start: PlanarState,
    horizon: f64,
) -> Result<OriginExclusion> {
    let [a, b] = field.at(start);
    if a == 0.0 && b == 0.0 {
        return Ok(OriginExclusion::Stationary);
    }
    let back = Reversed(Planar(field));
    let mut stepper = Dopri5::new(&back, &start.to_array(), horizon, AdaptiveOptions::new(1e-9, 1e-12))?;
    while stepper.time() < horizon {
        let step = match stepper.step(horizon) {
            Ok(s) => s,
            Err(Error::StepUnderflow { t, .. }) | Err(Error::NonFinite { t }) => {
                // finite-time escape: report the dominant component
                let y = stepper.state();
                let component = if fabs(y[0]) >= fabs(y[1]) { 0 } else { 1 };
                return Ok(OriginExclusion::BlowUp { t, component });
            }
            Err(e) => return Err(e),
        };
        let y = &step.y1;
        if hypot(y[0], y[1]) < ORIGIN_CAPTURE {
            return Ok(OriginExclusion::ReachedOrigin { t: step.t1 });
        }
        for (k, &c) in y.iter().enumerate() {
            if fabs(c) > BLOW_UP {
                return Ok(OriginExclusion::BlowUp { t: step.t1, component: k });
            }
        }
        if hypot(step.f1[0], step.f1[1]) < SETTLE_SPEED {
            return Ok(OriginExclusion::Settled {
                t: step.t1,
                at: PlanarState::from_slice(y),
            });
        }
    }
    Ok(OriginExclusion::Inconclusive)
}

/// Backward orbits from just off the interior attractor never approach
/// `(0, 0)`. Starts from `eq + (0.01, 0.01)` and, when a cycle exists, from a
/// cycle point pushed outward by 0.01. Inside a cycle the backward orbit
/// settles on the (repelling) interior equilibrium instead of escaping.
pub fn no_heteroclinic_from_origin_check<P: PlanarField>(
    field: &P,
    p: &ModelParams,
) -> Result<bool> {
    let eq = p
        .interior()
        .ok_or_else(|| Error::domain("no interior equilibrium"))?;
    let mut starts = vec![PlanarState::new(eq.u + 0.01, eq.v + 0.01)];
    if let Some(c) = find_limit_cycle(field, p, RETURN_TOL)? {
        let s = c.points[0];
        starts.push(PlanarState::new(s.u, s.v + 0.01));
    }
    for s in starts {
        match backward_fate(field, s, 1e3)? {
            OriginExclusion::BlowUp { .. }
            | OriginExclusion::Stationary
            | OriginExclusion::Settled { .. } => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Euclidean distance, exported for tests comparing raw arrays.
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))
}
