//! Explicit integrators for autonomous systems: a fixed-step RK4 step, an
//! adaptive Dormand-Prince 5(4) driver with PI step control, cubic Hermite
//! dense output and section-crossing detection.

use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, pow, sqrt};

use crate::error::{Error, Result};

/// Right-hand side of an autonomous system `y' = f(y)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dy: &mut [f64]);
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        (**self).eval(y, dy)
    }
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        (self.f)(y, dy)
    }
}

/// The field with time reversed, `y' = -f(y)`.
pub struct Reversed<F>(pub F);

impl<F: VectorField> VectorField for Reversed<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        self.0.eval(y, dy);
        for d in dy.iter_mut() {
            *d = -*d;
        }
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One classical fourth-order Runge-Kutta step.
pub fn step_rk4<F: VectorField + ?Sized>(field: &F, y: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::domain("RK4 step size must be positive"));
    }
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    field.eval(y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    field.eval(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    field.eval(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    field.eval(&tmp, &mut k4);
    for i in 0..n {
        tmp[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if !all_finite(&tmp) {
        return Err(Error::NonFinite { t: h });
    }
    Ok(tmp)
}

/// Accepted/rejected step counts of an adaptive run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub last_step: f64,
}

/// Dense record of an integration: `times[i]` pairs with `state(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    states: Vec<f64>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            times: Vec::new(),
            states: Vec::new(),
            stats: StepStats::default(),
        }
    }

    pub fn from_parts(dim: usize, times: Vec<f64>, states: Vec<f64>) -> Self {
        assert_eq!(times.len() * dim, states.len());
        Trajectory {
            dim,
            times,
            states,
            stats: StepStats::default(),
        }
    }

    pub fn push(&mut self, t: f64, y: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.dim))
    }

    /// Component `k` of every state.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.chunks_exact(self.dim).map(|s| s[k]).collect()
    }

    /// Index range of samples with `t >= t0`.
    pub fn tail_from(&self, t0: f64) -> usize {
        self.times.partition_point(|&t| t < t0)
    }
}

/// Cubic Hermite interpolant between two accepted points.
pub fn hermite(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h * h10 * f0[i] + h01 * y1[i] + h * h11 * f1[i];
    }
}

/// Options for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl AdaptiveOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        AdaptiveOptions {
            rel_tol,
            abs_tol,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 5_000_000,
        }
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x <= 1e-2;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::domain("tolerances must lie in (0, 1e-2]"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::domain("max_step must be positive"));
        }
        Ok(())
    }
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions::new(1e-10, 1e-12)
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const PI_BETA: f64 = 0.04;

/// Stage buffers for one Dormand-Prince step.
struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: core::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    /// Fills `y_new` with the 5th-order solution and returns the scaled error
    /// norm. `k[0]` must hold `f(y)` on entry; `k[6]` holds `f(y_new)` on exit.
    fn attempt<F: VectorField + ?Sized>(
        &mut self,
        field: &F,
        y: &[f64],
        h: f64,
        y_new: &mut [f64],
        rel: f64,
        abs: f64,
    ) -> f64 {
        let n = y.len();
        let Stages { k, tmp } = self;
        macro_rules! stage {
            ($dst:expr, $($coef:expr => $src:expr),+) => {{
                for i in 0..n {
                    tmp[i] = y[i] + h * (0.0 $(+ $coef * k[$src][i])+);
                }
                let (head, tail) = k.split_at_mut($dst);
                let _ = head;
                field.eval(tmp, &mut tail[0]);
            }};
        }
        stage!(1, A21 => 0);
        stage!(2, A31 => 0, A32 => 1);
        stage!(3, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i]
                    + A76 * k[5][i]);
        }
        {
            let (_, tail) = k.split_at_mut(6);
            field.eval(y_new, &mut tail[0]);
        }
        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = abs + rel * fabs(y[i]).max(fabs(y_new[i]));
            acc += (e / sc) * (e / sc);
        }
        let err = sqrt(acc / n as f64);
        if err.is_finite() && all_finite(y_new) {
            err
        } else {
            f64::INFINITY
        }
    }
}

/// One accepted step, with derivatives at both ends for Hermite output.
#[derive(Debug, Clone)]
pub struct AcceptedStep {
    pub t0: f64,
    pub y0: Vec<f64>,
    pub f0: Vec<f64>,
    pub t1: f64,
    pub y1: Vec<f64>,
    pub f1: Vec<f64>,
}

impl AcceptedStep {
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        hermite(self.t0, &self.y0, &self.f0, self.t1, &self.y1, &self.f1, t, out)
    }
}

/// Step-by-step adaptive Dormand-Prince integrator.
pub struct Dopri5<'a, F: VectorField + ?Sized> {
    field: &'a F,
    opts: AdaptiveOptions,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    err_prev: f64,
    stages: Stages,
    y_new: Vec<f64>,
    pub stats: StepStats,
    h_floor: f64,
}

impl<'a, F: VectorField + ?Sized> Dopri5<'a, F> {
    /// `horizon` sets the scale of the step-size underflow floor.
    pub fn new(field: &'a F, y0: &[f64], horizon: f64, opts: AdaptiveOptions) -> Result<Self> {
        opts.validate()?;
        let n = field.dim();
        if y0.len() != n {
            return Err(Error::domain("initial state has wrong dimension"));
        }
        if !all_finite(y0) {
            return Err(Error::NonFinite { t: 0.0 });
        }
        let mut f = vec![0.0; n];
        field.eval(y0, &mut f);
        if !all_finite(&f) {
            return Err(Error::NonFinite { t: 0.0 });
        }
        let mut s = Dopri5 {
            field,
            opts,
            t: 0.0,
            y: y0.to_vec(),
            f,
            h: 0.0,
            err_prev: 1e-4,
            stages: Stages::new(n),
            y_new: vec![0.0; n],
            stats: StepStats::default(),
            h_floor: 1e-14 * fabs(horizon).max(1e-3),
        };
        s.h = match opts.initial_step {
            Some(h) => h,
            None => s.initial_step(horizon),
        }
        .min(opts.max_step);
        Ok(s)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    pub fn derivative(&self) -> &[f64] {
        &self.f
    }

    fn scale(&self, i: usize, y: &[f64]) -> f64 {
        self.opts.abs_tol + self.opts.rel_tol * fabs(y[i])
    }

    fn initial_step(&mut self, horizon: f64) -> f64 {
        let n = self.y.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.scale(i, &self.y);
            d0 += (self.y[i] / sc) * (self.y[i] / sc);
            d1 += (self.f[i] / sc) * (self.f[i] / sc);
        }
        let d0 = sqrt(d0 / n as f64);
        let d1 = sqrt(d1 / n as f64);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(fabs(horizon).max(1e-6)).min(self.opts.max_step);
        let mut y1 = vec![0.0; n];
        for i in 0..n {
            y1[i] = self.y[i] + h0 * self.f[i];
        }
        let mut f1 = vec![0.0; n];
        self.field.eval(&y1, &mut f1);
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.scale(i, &self.y);
            let e = (f1[i] - self.f[i]) / sc;
            d2 += e * e;
        }
        let d2 = sqrt(d2 / n as f64) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            pow(0.01 / d1.max(d2), 0.2)
        };
        let h = (100.0 * h0).min(h1);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            1e-6
        }
    }

    /// Takes one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<AcceptedStep> {
        let remaining = t_limit - self.t;
        if !(remaining > 0.0) {
            return Err(Error::domain("step requested past the integration limit"));
        }
        let mut nonfinite = false;
        loop {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::TooManySteps {
                    t: self.t,
                    steps: self.opts.max_steps,
                });
            }
            let mut h = self.h.min(self.opts.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            self.stages.k[0].copy_from_slice(&self.f);
            let err = self.stages.attempt(
                self.field,
                &self.y,
                h,
                &mut self.y_new,
                self.opts.rel_tol,
                self.opts.abs_tol,
            );
            if err <= 1.0 {
                let fac = SAFETY * pow(err.max(1e-10), -(0.2 - 0.75 * PI_BETA))
                    * pow(self.err_prev, PI_BETA);
                let fac = fac.clamp(FAC_MIN, FAC_MAX);
                self.err_prev = err.max(1e-4);
                let t0 = self.t;
                let t1 = if last { t_limit } else { self.t + h };
                let step = AcceptedStep {
                    t0,
                    y0: self.y.clone(),
                    f0: self.f.clone(),
                    t1,
                    y1: self.y_new.clone(),
                    f1: self.stages.k[6].clone(),
                };
                self.t = t1;
                core::mem::swap(&mut self.y, &mut self.y_new);
                self.f.copy_from_slice(&self.stages.k[6]);
                self.stats.accepted += 1;
                self.stats.last_step = h;
                self.h = (h * fac).min(self.opts.max_step);
                if last && !nonfinite {
                    // keep the proposed size rather than the truncated one
                    self.h = self.h.max(h);
                }
                return Ok(step);
            }
            self.stats.rejected += 1;
            if !err.is_finite() {
                nonfinite = true;
                self.h = h * FAC_MIN;
            } else {
                self.h = h * (SAFETY * pow(err, -0.2)).clamp(FAC_MIN, 1.0);
            }
            if self.h < self.h_floor {
                return Err(if nonfinite {
                    Error::NonFinite { t: self.t }
                } else {
                    Error::StepUnderflow { t: self.t, h: self.h }
                });
            }
        }
    }
}

/// Integrates from `t = 0` to `t_end`, recording every accepted step.
pub fn integrate_adaptive<F: VectorField + ?Sized>(
    field: &F,
    y0: &[f64],
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory> {
    integrate_with(field, y0, t_end, AdaptiveOptions::new(rel_tol, abs_tol), |_, _| false)
}

/// Like [`integrate_adaptive`] with explicit options and an early-stop
/// predicate checked after each accepted step.
pub fn integrate_with<F, S>(
    field: &F,
    y0: &[f64],
    t_end: f64,
    opts: AdaptiveOptions,
    mut stop: S,
) -> Result<Trajectory>
where
    F: VectorField + ?Sized,
    S: FnMut(f64, &[f64]) -> bool,
{
    if !(t_end >= 0.0) {
        return Err(Error::domain("t_end must be nonnegative"));
    }
    opts.validate()?;
    let mut traj = Trajectory::new(field.dim());
    traj.push(0.0, y0);
    if t_end == 0.0 {
        return Ok(traj);
    }
    let mut stepper = Dopri5::new(field, y0, t_end, opts)?;
    while stepper.time() < t_end {
        let step = stepper.step(t_end)?;
        traj.push(step.t1, &step.y1);
        if stop(step.t1, &step.y1) {
            break;
        }
    }
    traj.stats = stepper.stats;
    Ok(traj)
}

/// Integrates and returns samples at the requested (increasing) times,
/// each obtained by stepping exactly onto it.
pub fn integrate_to_times<F: VectorField + ?Sized>(
    field: &F,
    y0: &[f64],
    times: &[f64],
    opts: AdaptiveOptions,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new(field.dim());
    if times.is_empty() {
        return Ok(traj);
    }
    let t_end = *times.last().unwrap();
    if times[0] < 0.0 {
        return Err(Error::domain("sample times must be nonnegative"));
    }
    let mut stepper = Dopri5::new(field, y0, t_end.max(1e-12), opts)?;
    let mut stats = StepStats::default();
    for &t in times {
        while stepper.time() < t {
            stepper.step(t)?;
        }
        stats = stepper.stats;
        traj.push(t, stepper.state());
    }
    traj.stats = stats;
    Ok(traj)
}

/// Direction filter for a section crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Increasing,
    Decreasing,
    Both,
}

/// Hyperplane `<normal, y> = offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub orientation: Orientation,
}

impl Section {
    pub fn new(normal: Vec<f64>, offset: f64, orientation: Orientation) -> Result<Self> {
        if normal.iter().all(|&x| x == 0.0) || !all_finite(&normal) {
            return Err(Error::domain("section normal must be nonzero"));
        }
        Ok(Section {
            normal,
            offset,
            orientation,
        })
    }

    /// Coordinate hyperplane `y[axis] = value`.
    pub fn axis(dim: usize, axis: usize, value: f64, orientation: Orientation) -> Self {
        let mut normal = vec![0.0; dim];
        normal[axis] = 1.0;
        Section {
            normal,
            offset: value,
            orientation,
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }

    fn rate(&self, f: &[f64]) -> f64 {
        self.normal.iter().zip(f).map(|(a, b)| a * b).sum()
    }

    fn accepts(&self, g0: f64, g1: f64) -> bool {
        let up = g0 < 0.0 && g1 >= 0.0;
        let down = g0 > 0.0 && g1 <= 0.0;
        match self.orientation {
            Orientation::Increasing => up,
            Orientation::Decreasing => down,
            Orientation::Both => up || down,
        }
    }
}

/// Residual bound on returned crossings.
pub const CROSSING_TOL: f64 = 1e-10;
/// Section-function speed below which a crossing counts as tangential.
pub const GRAZING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub state: Vec<f64>,
    /// Set when the flow is (nearly) tangent to the section at the crossing.
    pub tangential: bool,
}

/// Single Dormand-Prince step from `y0` of size `h` (no error control).
fn dp_point<F: VectorField + ?Sized>(field: &F, y0: &[f64], f0: &[f64], h: f64) -> Vec<f64> {
    let n = y0.len();
    let mut st = Stages::new(n);
    st.k[0].copy_from_slice(f0);
    let mut out = vec![0.0; n];
    st.attempt(field, y0, h, &mut out, 1.0, 1.0);
    out
}

/// Locates the section crossing inside one step: bisection on the Hermite
/// interpolant, then Newton polishing with direct Dormand-Prince substeps.
fn refine_crossing<F: VectorField + ?Sized>(
    field: &F,
    sec: &Section,
    step: &AcceptedStep,
) -> Crossing {
    let n = step.y0.len();
    let mut buf = vec![0.0; n];
    let g0 = sec.value(&step.y0);
    let (mut a, mut b) = (step.t0, step.t1);
    let mut ga = g0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        step.interpolate(m, &mut buf);
        let gm = sec.value(&buf);
        if (gm < 0.0) == (ga < 0.0) && gm != 0.0 {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * (1.0 + fabs(b)) {
            break;
        }
    }
    let mut t = 0.5 * (a + b);
    step.interpolate(t, &mut buf);
    let mut chosen = (t, buf);
    let mut f = vec![0.0; n];
    for _ in 0..4 {
        let h = t - step.t0;
        let y = if h > 0.0 {
            dp_point(field, &step.y0, &step.f0, h)
        } else {
            step.y0.clone()
        };
        let g = sec.value(&y);
        if !g.is_finite() {
            break;
        }
        field.eval(&y, &mut f);
        let rate = sec.rate(&f);
        if fabs(g) <= CROSSING_TOL {
            chosen = (t, y);
        }
        if rate == 0.0 || g == 0.0 {
            break;
        }
        let next = t - g / rate;
        if !(next >= step.t0 && next <= step.t1) {
            break;
        }
        t = next;
    }
    let (t, state) = chosen;
    field.eval(&state, &mut f);
    Crossing {
        t,
        tangential: fabs(sec.rate(&f)) < GRAZING_TOL,
        state,
    }
}

/// Crossing of `sec` inside one accepted step, if its endpoints straddle the
/// section in the accepted direction.
pub fn step_crossing<F: VectorField + ?Sized>(
    field: &F,
    sec: &Section,
    step: &AcceptedStep,
) -> Option<Crossing> {
    let (g0, g1) = (sec.value(&step.y0), sec.value(&step.y1));
    sec.accepts(g0, g1).then(|| refine_crossing(field, sec, step))
}

/// All crossings of `sec` along a recorded trajectory, in time order.
pub fn find_crossings<F: VectorField + ?Sized>(
    field: &F,
    traj: &Trajectory,
    sec: &Section,
) -> Result<Vec<Crossing>> {
    let mut out = Vec::new();
    if traj.len() < 2 {
        return Ok(out);
    }
    let n = traj.dim;
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    field.eval(traj.state(0), &mut f0);
    for i in 0..traj.len() - 1 {
        let (y0, y1) = (traj.state(i), traj.state(i + 1));
        field.eval(y1, &mut f1);
        let (g0, g1) = (sec.value(y0), sec.value(y1));
        if sec.accepts(g0, g1) {
            let step = AcceptedStep {
                t0: traj.times[i],
                y0: y0.to_vec(),
                f0: f0.clone(),
                t1: traj.times[i + 1],
                y1: y1.to_vec(),
                f1: f1.clone(),
            };
            out.push(refine_crossing(field, sec, &step));
        }
        core::mem::swap(&mut f0, &mut f1);
    }
    Ok(out)
}

/// Integrates from `y0` until the first crossing of `sec` after leaving the
/// starting point; errors with [`Error::NoReturn`] past `t_max`.
///
/// `keep` receives every accepted step (for callers that record the orbit).
pub fn first_crossing<F, K>(
    field: &F,
    y0: &[f64],
    sec: &Section,
    t_max: f64,
    opts: AdaptiveOptions,
    mut keep: K,
) -> Result<Crossing>
where
    F: VectorField + ?Sized,
    K: FnMut(&AcceptedStep),
{
    let mut stepper = Dopri5::new(field, y0, t_max, opts)?;
    let mut first = true;
    while stepper.time() < t_max {
        let step = stepper.step(t_max)?;
        keep(&step);
        if first {
            // the start itself lies on the section
            first = false;
            continue;
        }
        let (g0, g1) = (sec.value(&step.y0), sec.value(&step.y1));
        if sec.accepts(g0, g1) {
            let c = refine_crossing(field, sec, &step);
            if c.tangential {
                return Err(Error::TangentialCrossing { t: c.t });
            }
            return Ok(c);
        }
    }
    Err(Error::NoReturn { t_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(1, |y: &[f64], d: &mut [f64]| d[0] = -y[0])
    }

    fn rotation() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(2, |y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        })
    }

    fn logistic() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(1, |y: &[f64], d: &mut [f64]| d[0] = y[0] * (1.6 - y[0]))
    }

    fn logistic_exact(t: f64) -> f64 {
        let (k, u0) = (1.6, 0.1);
        k / (1.0 + (k - u0) / u0 * libm::exp(-k * t))
    }

    #[test]
    fn rk4_constant_field() {
        let zero = FnField::new(3, |_: &[f64], d: &mut [f64]| d.fill(0.0));
        let y = [1.0, -2.0, 3.5];
        assert_eq!(step_rk4(&zero, &y, 0.7).unwrap(), y.to_vec());
    }

    #[test]
    fn rk4_exponential() {
        let y = step_rk4(&decay(), &[1.0], 0.1).unwrap();
        assert!((y[0] - libm::exp(-0.1)).abs() <= 1e-7);
        assert_abs_diff_eq!(y[0], 0.904_837_5, epsilon = 1e-7);
        assert!(step_rk4(&decay(), &[1.0], 0.0).is_err());
    }

    #[test]
    fn rk4_rotation_returns() {
        let h = 2.0 * PI / 1000.0;
        let mut y = vec![1.0, 0.0];
        for _ in 0..1000 {
            y = step_rk4(&rotation(), &y, h).unwrap();
        }
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8);
    }

    #[test]
    fn rk4_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = vec![1.0];
            for _ in 0..n {
                y = step_rk4(&decay(), &y, h).unwrap();
            }
            (y[0] - libm::exp(-1.0)).abs()
        };
        for n in [10, 20, 40] {
            let ratio = err(n) / err(2 * n);
            assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn rk4_nonfinite_is_error() {
        let bad = FnField::new(1, |_: &[f64], d: &mut [f64]| d[0] = f64::NAN);
        assert!(matches!(step_rk4(&bad, &[1.0], 0.1), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn adaptive_logistic() {
        let tr = integrate_adaptive(&logistic(), &[0.1], 50.0, 1e-10, 1e-12).unwrap();
        assert!((tr.last_state()[0] - 1.6).abs() < 1e-6);
        assert_eq!(tr.last_time(), 50.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        for (t, y) in tr.iter() {
            assert!((y[0] - logistic_exact(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn adaptive_energy_drift() {
        let tr = integrate_adaptive(&rotation(), &[1.0, 0.0], 200.0 * PI, 1e-9, 1e-12).unwrap();
        let s = tr.last_state();
        assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn adaptive_empty_span() {
        let tr = integrate_adaptive(&logistic(), &[0.1], 0.0, 1e-6, 1e-8).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.state(0), &[0.1]);
        assert!(integrate_adaptive(&logistic(), &[0.1], 1.0, 0.5, 1e-8).is_err());
        assert!(integrate_adaptive(&logistic(), &[0.1], 1.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn adaptive_detects_blow_up() {
        // y' = y^2 from 1 blows up at t = 1
        let f = FnField::new(1, |y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0]);
        let r = integrate_adaptive(&f, &[1.0], 2.0, 1e-8, 1e-10);
        assert!(matches!(
            r,
            Err(Error::StepUnderflow { .. }) | Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn adaptive_consistency_and_reversal() {
        let field = FnField::new(2, |y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -libm::sin(y[0]);
        });
        let y0 = [1.0, 0.2];
        for rel in [1e-6, 1e-8] {
            let a = integrate_adaptive(&field, &y0, 20.0, rel, rel * 1e-2).unwrap();
            let b = integrate_adaptive(&field, &y0, 20.0, rel / 10.0, rel * 1e-3).unwrap();
            let (sa, sb) = (a.last_state(), b.last_state());
            let norm = libm::hypot(sb[0], sb[1]);
            assert!(libm::hypot(sa[0] - sb[0], sa[1] - sb[1]) < 10.0 * rel * norm);

            let back = integrate_adaptive(&Reversed(&field), sa, 20.0, rel, rel * 1e-2).unwrap();
            let e = back.last_state();
            assert!(libm::hypot(e[0] - y0[0], e[1] - y0[1]) < 10.0 * rel);
        }
    }

    #[test]
    fn rotation_crossing_near_two_pi() {
        let ccw = FnField::new(2, |y: &[f64], d: &mut [f64]| {
            d[0] = -y[1];
            d[1] = y[0];
        });
        let tr = integrate_adaptive(&ccw, &[1.0, 0.0], 7.0, 1e-10, 1e-12).unwrap();
        let sec = Section::axis(2, 1, 0.0, Orientation::Increasing);
        let cs = find_crossings(&ccw, &tr, &sec).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].t - 2.0 * PI).abs() < 1e-8);
        assert!((cs[0].state[0] - 1.0).abs() < 1e-8);

        // the clockwise rotation passes V = 0 upward at pi, downward at 2 pi
        let tr = integrate_adaptive(&rotation(), &[1.0, 0.0], 7.0, 1e-10, 1e-12).unwrap();
        let cs = find_crossings(&rotation(), &tr, &sec).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].t - PI).abs() < 1e-8);
        let sec = Section::axis(2, 1, 0.0, Orientation::Decreasing);
        let cs = find_crossings(&rotation(), &tr, &sec).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].t - 2.0 * PI).abs() < 1e-8);
        for c in &cs {
            assert!(sec.value(&c.state).abs() <= CROSSING_TOL);
            assert!(!c.tangential);
        }
    }

    #[test]
    fn no_crossing_on_one_side() {
        let tr = integrate_adaptive(&logistic(), &[0.1], 50.0, 1e-10, 1e-12).unwrap();
        let sec = Section::axis(1, 0, 2.0, Orientation::Both);
        assert!(find_crossings(&logistic(), &tr, &sec).unwrap().is_empty());
    }

    #[test]
    fn logistic_crossing_matches_closed_form() {
        let tr = integrate_adaptive(&logistic(), &[0.1], 50.0, 1e-10, 1e-12).unwrap();
        let sec = Section::axis(1, 0, 0.5, Orientation::Both);
        let cs = find_crossings(&logistic(), &tr, &sec).unwrap();
        assert_eq!(cs.len(), 1);
        // invert u(t) = k / (1 + (k - u0)/u0 e^{-kt}) at u = 0.5
        let (k, u0, u) = (1.6, 0.1, 0.5);
        let t_exact = -libm::log((k / u - 1.0) * u0 / (k - u0)) / k;
        assert!((cs[0].t - t_exact).abs() < 1e-9, "{} vs {t_exact}", cs[0].t);
        assert!(sec.value(&cs[0].state).abs() <= CROSSING_TOL);
    }

    #[test]
    fn grazing_is_flagged() {
        // y = (t, (t-1)^2) touches the section y[1] = 0 tangentially at t = 1
        let f = FnField::new(2, |y: &[f64], d: &mut [f64]| {
            d[0] = 1.0;
            d[1] = 2.0 * (y[0] - 1.0);
        });
        let tr = integrate_adaptive(&f, &[0.0, 1.0], 2.0, 1e-10, 1e-12).unwrap();
        let sec = Section::new(vec![0.0, 1.0], 1e-30, Orientation::Both).unwrap();
        let cs = find_crossings(&f, &tr, &sec).unwrap();
        assert!(cs.iter().all(|c| c.tangential));
        assert!(Section::new(vec![0.0, 0.0], 0.0, Orientation::Both).is_err());
    }

    #[test]
    fn first_crossing_returns_period() {
        let sec = Section::axis(2, 1, 0.0, Orientation::Decreasing);
        let c = first_crossing(
            &rotation(),
            &[1.0, 0.0],
            &sec,
            20.0,
            AdaptiveOptions::new(1e-11, 1e-13),
            |_| {},
        )
        .unwrap();
        assert!((c.t - 2.0 * PI).abs() < 1e-9);
        assert!((c.state[0] - 1.0).abs() < 1e-9);
        let r = first_crossing(
            &rotation(),
            &[1.0, 0.0],
            &sec,
            3.0,
            AdaptiveOptions::default(),
            |_| {},
        );
        assert!(matches!(r, Err(Error::NoReturn { .. })));
    }

    #[test]
    fn samples_land_on_requested_times() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let tr = integrate_to_times(&decay(), &[1.0], &times, AdaptiveOptions::default()).unwrap();
        assert_eq!(tr.times, times);
        for (t, y) in tr.iter() {
            assert!((y[0] - libm::exp(-t)).abs() < 1e-10);
        }
    }
}
