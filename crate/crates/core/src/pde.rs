//! Method-of-lines solver for the diffusive predator-prey system on
//! `[0, L]` with zero-flux ends:
//!
//! `U_t = d U_xx + F(U, V)`, `V_t = V_xx + G(U, V)`.
//!
//! Cell-centered grid, mirror ghost cells, classical RK4 with a fixed step.

use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, fabs, round};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Initial state of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `U = gamma`, `V = v0_amp * exp(-delta x)`.
    Invasion { delta: f64, v0_amp: f64 },
    /// Explicit cell values.
    Cells { u: Vec<f64>, v: Vec<f64> },
}

impl InitialData {
    pub fn invasion(delta: f64) -> Self {
        InitialData::Invasion { delta, v0_amp: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub params: ModelParams,
    pub length: f64,
    pub cells: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Requested snapshot times; each is taken at the nearest completed step.
    pub snapshot_times: Vec<f64>,
    pub initial: InitialData,
    /// Positions whose cell values are recorded every `probe_every` steps.
    pub probes: Vec<f64>,
    pub probe_every: usize,
}

pub const MIN_CELLS: usize = 16;
const CFL: f64 = 0.4;

impl PdeConfig {
    /// Domain `[0, 1000]` on 4000 cells, `dt = 0.02`, predator invading a
    /// prey-only state with decay rate `delta`.
    pub fn invasion(params: ModelParams, delta: f64, t_end: f64) -> Self {
        PdeConfig {
            params,
            length: 1000.0,
            cells: 4000,
            dt: 0.02,
            t_end,
            snapshot_times: Vec::new(),
            initial: InitialData::invasion(delta),
            probes: Vec::new(),
            probe_every: 1,
        }
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Cell-center coordinate of cell `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: f64) -> usize {
        let i = libm::floor(x / self.dx());
        (i.max(0.0) as usize).min(self.cells - 1)
    }

    pub fn max_stable_dt(&self) -> f64 {
        let dx = self.dx();
        CFL * dx * dx / self.params.d.max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.cells < MIN_CELLS {
            return Err(Error::Configuration("at least 16 cells are required".into()));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Configuration("domain length must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Configuration("dt must be positive and t_end nonnegative".into()));
        }
        if self.dt > self.max_stable_dt() {
            return Err(Error::Configuration(alloc::format!(
                "dt = {} exceeds the stability bound {}",
                self.dt,
                self.max_stable_dt()
            )));
        }
        if self.snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Configuration("snapshot times must increase".into()));
        }
        if self.snapshot_times.iter().any(|&t| t < 0.0 || t > self.t_end) {
            return Err(Error::Configuration("snapshot times must lie in [0, t_end]".into()));
        }
        if self.probes.iter().any(|&x| !(x >= 0.0 && x <= self.length)) {
            return Err(Error::Configuration("probe positions must lie in [0, L]".into()));
        }
        if self.probe_every == 0 {
            return Err(Error::Configuration("probe interval must be at least one step".into()));
        }
        match &self.initial {
            InitialData::Invasion { delta, v0_amp } => {
                if !(*delta > 0.0) || !(*v0_amp >= 0.0) {
                    return Err(Error::Configuration(
                        "delta must be positive and the amplitude nonnegative".into(),
                    ));
                }
            }
            InitialData::Cells { u, v } => {
                if u.len() != self.cells || v.len() != self.cells {
                    return Err(Error::Configuration("initial arrays must have one value per cell".into()));
                }
                if u.iter().chain(v).any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Configuration(
                        "initial values must be finite and nonnegative".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn initial_cells(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.initial {
            InitialData::Invasion { delta, v0_amp } => {
                let u = vec![self.params.gamma; self.cells];
                let v = (0..self.cells).map(|i| v0_amp * exp(-delta * self.x(i))).collect();
                (u, v)
            }
            InitialData::Cells { u, v } => (u.clone(), v.clone()),
        }
    }
}

/// Both species on the grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub t: f64,
    pub dx: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Field {
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.u.iter().chain(&self.v).copied().fold(f64::INFINITY, f64::min)
    }

    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U,
    V,
}

/// Time series of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x: f64,
    pub cell: usize,
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub snapshots: Vec<Field>,
    pub probes: Vec<Probe>,
    pub steps: usize,
    /// Smallest value of either species over all steps.
    pub min_value: f64,
}

impl PdeRun {
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("a run always holds the final snapshot")
    }
}

#[inline]
fn stencil(left: f64, mid: f64, right: f64, inv_dx2: f64) -> f64 {
    (left - 2.0 * mid + right) * inv_dx2
}

fn laplacian_into(values: &[f64], inv_dx2: f64, out: &mut [f64]) {
    let n = values.len();
    // mirror ghosts: values[-1] = values[0], values[n] = values[n - 1]
    out[0] = stencil(values[0], values[0], values[1], inv_dx2);
    for i in 1..n - 1 {
        out[i] = stencil(values[i - 1], values[i], values[i + 1], inv_dx2);
    }
    out[n - 1] = stencil(values[n - 2], values[n - 1], values[n - 1], inv_dx2);
}

/// Second difference with zero-flux mirror boundaries.
pub fn laplacian_neumann(values: &[f64], dx: f64) -> Result<Vec<f64>> {
    if values.len() < 3 {
        return Err(Error::domain("the Laplacian needs at least three cells"));
    }
    if !(dx > 0.0) {
        return Err(Error::domain("dx must be positive"));
    }
    let mut out = vec![0.0; values.len()];
    laplacian_into(values, 1.0 / (dx * dx), &mut out);
    Ok(out)
}

struct Rhs {
    p: ModelParams,
    inv_dx2: f64,
    lap_u: Vec<f64>,
    lap_v: Vec<f64>,
}

impl Rhs {
    fn eval(&mut self, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        laplacian_into(u, self.inv_dx2, &mut self.lap_u);
        laplacian_into(v, self.inv_dx2, &mut self.lap_v);
        let p = &self.p;
        for i in 0..u.len() {
            let (a, b) = (u[i], v[i]);
            let sat = a / (1.0 + a);
            du[i] = p.d * self.lap_u[i] + p.alpha * a * (p.gamma - a) - sat * b;
            dv[i] = self.lap_v[i] + b * (p.beta * sat - 1.0);
        }
    }
}

/// Runs the configured simulation, returning the requested snapshots plus
/// the final state, and the probe series.
pub fn simulate(cfg: &PdeConfig) -> Result<PdeRun> {
    cfg.validate()?;
    let n = cfg.cells;
    let dt = cfg.dt;
    let total = round(cfg.t_end / dt) as usize;
    let mut snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| (round(t / dt) as usize).min(total))
        .collect();
    snap_steps.dedup();
    if snap_steps.last() != Some(&total) {
        snap_steps.push(total);
    }

    let (mut u, mut v) = cfg.initial_cells();
    let mut rhs = Rhs {
        p: cfg.params,
        inv_dx2: 1.0 / (cfg.dx() * cfg.dx()),
        lap_u: vec![0.0; n],
        lap_v: vec![0.0; n],
    };
    let mut k = [(); 4].map(|_| (vec![0.0; n], vec![0.0; n]));
    let (mut su, mut sv) = (vec![0.0; n], vec![0.0; n]);

    let mut probes: Vec<Probe> = cfg
        .probes
        .iter()
        .map(|&x| Probe {
            x,
            cell: cfg.cell_of(x),
            times: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
        })
        .collect();
    let record = |probes: &mut Vec<Probe>, t: f64, u: &[f64], v: &[f64]| {
        for pr in probes.iter_mut() {
            pr.times.push(t);
            pr.u.push(u[pr.cell]);
            pr.v.push(v[pr.cell]);
        }
    };
    let field = |t: f64, u: &[f64], v: &[f64]| Field {
        t,
        dx: cfg.dx(),
        u: u.to_vec(),
        v: v.to_vec(),
    };

    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut next_snap = 0;
    let mut min_value = u.iter().chain(&v).copied().fold(f64::INFINITY, f64::min);
    record(&mut probes, 0.0, &u, &v);
    while next_snap < snap_steps.len() && snap_steps[next_snap] == 0 {
        snapshots.push(field(0.0, &u, &v));
        next_snap += 1;
    }

    for step in 1..=total {
        {
            let [k1, k2, k3, k4] = &mut k;
            rhs.eval(&u, &v, &mut k1.0, &mut k1.1);
            for i in 0..n {
                su[i] = u[i] + 0.5 * dt * k1.0[i];
                sv[i] = v[i] + 0.5 * dt * k1.1[i];
            }
            rhs.eval(&su, &sv, &mut k2.0, &mut k2.1);
            for i in 0..n {
                su[i] = u[i] + 0.5 * dt * k2.0[i];
                sv[i] = v[i] + 0.5 * dt * k2.1[i];
            }
            rhs.eval(&su, &sv, &mut k3.0, &mut k3.1);
            for i in 0..n {
                su[i] = u[i] + dt * k3.0[i];
                sv[i] = v[i] + dt * k3.1[i];
            }
            rhs.eval(&su, &sv, &mut k4.0, &mut k4.1);
            let w = dt / 6.0;
            for i in 0..n {
                u[i] += w * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
                v[i] += w * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
            }
        }
        let t = step as f64 * dt;
        for (&a, &b) in u.iter().zip(&v) {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::BlowUp { t });
            }
            min_value = min_value.min(a).min(b);
        }
        if step % cfg.probe_every == 0 {
            record(&mut probes, t, &u, &v);
        }
        while next_snap < snap_steps.len() && snap_steps[next_snap] == step {
            snapshots.push(field(t, &u, &v));
            next_snap += 1;
        }
    }

    Ok(PdeRun {
        snapshots,
        probes,
        steps: total,
        min_value,
    })
}

/// Least-squares front-speed fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSpeedEstimate {
    pub level: f64,
    /// `(time, position)` for every snapshot where the level is crossed.
    pub positions: Vec<(f64, f64)>,
    /// Slope over the trailing half, present only when `r_squared >= 0.99`.
    pub speed: Option<f64>,
    pub slope: f64,
    pub r_squared: f64,
}

pub const MIN_R_SQUARED: f64 = 0.99;

/// Rightmost position where `values` crosses `level`, linearly interpolated.
pub fn front_position(field: &Field, c: Component, level: f64) -> Option<f64> {
    let z = field.component(c);
    (0..z.len().saturating_sub(1)).rev().find_map(|i| {
        let (a, b) = (z[i] - level, z[i + 1] - level);
        if (a >= 0.0) != (b >= 0.0) {
            Some(field.x(i) + a / (a - b) * field.dx)
        } else {
            None
        }
    })
}

/// Fits the speed of the rightmost `level` crossing of component `c`.
pub fn estimate_front_speed(snapshots: &[Field], c: Component, level: f64) -> Result<FrontSpeedEstimate> {
    let mut positions = Vec::new();
    for f in snapshots {
        if let Some(x) = front_position(f, c, level) {
            let length = f.dx * f.len() as f64;
            if x > 0.95 * length {
                return Err(Error::NotEstimable(alloc::format!(
                    "front at x = {x} is within 5% of the right boundary (t = {})",
                    f.t
                )));
            }
            positions.push((f.t, x));
        }
    }
    if positions.len() < 5 {
        return Err(Error::NotEstimable(alloc::format!(
            "level {level} is crossed in {} snapshots, need 5",
            positions.len()
        )));
    }
    let tail = &positions[positions.len() / 2..];
    let m = tail.len() as f64;
    let (st, sx) = tail.iter().fold((0.0, 0.0), |(a, b), &(t, x)| (a + t, b + x));
    let (mt, mx) = (st / m, sx / m);
    let (mut stt, mut stx, mut sxx) = (0.0, 0.0, 0.0);
    for &(t, x) in tail {
        stt += (t - mt) * (t - mt);
        stx += (t - mt) * (x - mx);
        sxx += (x - mx) * (x - mx);
    }
    let spread = tail.iter().map(|&(_, x)| fabs(x - mx)).fold(0.0, f64::max);
    if !(stt > 0.0) || spread <= 1e-12 * (1.0 + fabs(mx)) {
        return Err(Error::NotEstimable("the front does not move".into()));
    }
    let slope = stx / stt;
    let r_squared = stx * stx / (stt * sxx);
    Ok(FrontSpeedEstimate {
        level,
        positions,
        speed: (r_squared >= MIN_R_SQUARED).then_some(slope),
        slope,
        r_squared,
    })
}

/// Local maxima (time, value) of a sampled series, interior points only.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| (times[i], values[i]))
        .collect()
}

/// Interior local maxima `(x, value)` of one component.
pub fn spatial_maxima(field: &Field, c: Component) -> Vec<(f64, f64)> {
    let xs: Vec<f64> = (0..field.len()).map(|i| field.x(i)).collect();
    local_maxima(&xs, field.component(c))
}

/// Oscillation summary of a probe component over `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Oscillation {
    pub maxima: Vec<(f64, f64)>,
    /// Peak-to-trough range over the window.
    pub amplitude: f64,
    /// Mean spacing of successive maxima, when there are at least two.
    pub period: Option<f64>,
}

pub fn oscillation(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Oscillation {
    let lo = times.partition_point(|&t| t < t0);
    let hi = times.partition_point(|&t| t <= t1);
    let (ts, vs) = (&times[lo..hi], &values[lo..hi]);
    let maxima = local_maxima(ts, vs);
    let (mn, mx) = vs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let period = (maxima.len() >= 2)
        .then(|| (maxima[maxima.len() - 1].0 - maxima[0].0) / (maxima.len() - 1) as f64);
    Oscillation {
        maxima,
        amplitude: if vs.is_empty() { 0.0 } else { mx - mn },
        period,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn small(params: ModelParams, u: Vec<f64>, v: Vec<f64>, t_end: f64) -> PdeConfig {
        let n = u.len();
        PdeConfig {
            params,
            length: n as f64 * 0.25,
            cells: n,
            dt: 0.02,
            t_end,
            snapshot_times: Vec::new(),
            initial: InitialData::Cells { u, v },
            probes: Vec::new(),
            probe_every: 1,
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let l = laplacian_neumann(&[2.5; 10], 0.1).unwrap();
        assert!(l.iter().all(|&x| x == 0.0));
        assert!(laplacian_neumann(&[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn laplacian_is_conservative() {
        let vals: Vec<f64> = (0..101).map(|i| libm::sin(0.37 * i as f64) + 0.01 * i as f64).collect();
        let dx = 0.3;
        let l = laplacian_neumann(&vals, dx).unwrap();
        let total: f64 = l.iter().sum::<f64>() * dx;
        let norm = vals.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(total.abs() <= 1e-10 * norm);
    }

    #[test]
    fn laplacian_second_order_on_cosine() {
        let err = |n: usize| {
            let len = 10.0;
            let dx = len / n as f64;
            let vals: Vec<f64> = (0..n).map(|i| libm::cos(PI * (i as f64 + 0.5) * dx / len)).collect();
            let l = laplacian_neumann(&vals, dx).unwrap();
            l.iter()
                .zip(&vals)
                .map(|(a, b)| fabs(a + (PI / len) * (PI / len) * b))
                .fold(0.0, f64::max)
        };
        let ratio = err(100) / err(200);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn boundary_cells_use_ghost_copies() {
        let vals = [0.3, 1.7, -0.2, 4.4];
        let l = laplacian_neumann(&vals, 0.7).unwrap();
        let inv = 1.0 / (0.7 * 0.7);
        assert_eq!(l[0].to_bits(), ((vals[0] - 2.0 * vals[0] + vals[1]) * inv).to_bits());
        assert_eq!(l[3].to_bits(), ((vals[2] - 2.0 * vals[3] + vals[3]) * inv).to_bits());
    }

    #[test]
    fn config_rejects_unstable_step() {
        let p = ModelParams::new(0.25, 2.0, 4.0, 1.0).unwrap();
        let mut cfg = PdeConfig::invasion(p, 0.1, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.dt = 0.03;
        assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
        cfg.dt = 0.02;
        cfg.cells = 8;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn homogeneous_prey_grows_to_capacity() {
        let p = ModelParams::new(0.25, 2.0, 4.0, 1.0).unwrap();
        let run = simulate(&small(p, vec![0.1; 32], vec![0.0; 32], 60.0)).unwrap();
        let f = run.last();
        for (&a, &b) in f.u.iter().zip(&f.v) {
            assert!(fabs(a - 4.0) < 1e-6);
            assert_eq!(b.to_bits(), 0.0f64.to_bits());
        }
    }

    #[test]
    fn snapshots_land_on_steps() {
        let p = ModelParams::new(0.25, 2.0, 4.0, 1.0).unwrap();
        let mut cfg = small(p, vec![1.0; 32], vec![0.5; 32], 1.0);
        cfg.snapshot_times = vec![0.0, 0.5, 0.51];
        cfg.probes = vec![3.0];
        let run = simulate(&cfg).unwrap();
        let times: Vec<f64> = run.snapshots.iter().map(|f| f.t).collect();
        assert_eq!(times, vec![0.0, 0.5, 0.52, 1.0]);
        assert_eq!(run.probes[0].times.len(), 51);
        assert_eq!(run.probes[0].cell, 12);
    }

    #[test]
    fn stationary_front_is_not_estimable() {
        let f = Field {
            t: 0.0,
            dx: 1.0,
            u: vec![1.0; 20],
            v: (0..20).map(|i| if i < 10 { 1.0 } else { 0.0 }).collect(),
        };
        let snaps: Vec<Field> = (0..6).map(|k| Field { t: k as f64, ..f.clone() }).collect();
        assert!(matches!(
            estimate_front_speed(&snaps, Component::V, 0.5),
            Err(Error::NotEstimable(_))
        ));
        assert!(matches!(
            estimate_front_speed(&snaps, Component::V, 2.0),
            Err(Error::NotEstimable(_))
        ));
        assert_eq!(front_position(&f, Component::V, 0.5), Some(10.0));
    }

    #[test]
    fn maxima_and_period() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let vals: Vec<f64> = times.iter().map(|t| libm::sin(2.0 * PI * t / 2.5)).collect();
        let o = oscillation(&times, &vals, 0.0, 10.0);
        assert_eq!(o.maxima.len(), 4);
        assert!(fabs(o.period.unwrap() - 2.5) < 0.02);
        assert!(fabs(o.amplitude - 2.0) < 1e-3);
    }
}
