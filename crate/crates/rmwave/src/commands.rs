//! Command execution: calls into `rmwave-core` and stages the artifacts.

use std::io;
use std::path::PathBuf;

use num_complex::Complex64;
use rmwave_core::cycles::{self, find_limit_cycle, heteroclinic_from_gamma, LimitCycle, OmegaLimit, RETURN_TOL};
use rmwave_core::field::KineticField;
use rmwave_core::model::{self, EquilibriumKind, ModelParams, Stability};
use rmwave_core::pde::{self, Component, Field, InitialData, PdeConfig};
use rmwave_core::wave::{self, shoot_heteroclinic_4d};
use rmwave_core::Error;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::output::{label, to_json_text, Staging, Table};

/// Why a run produced no artifacts.
#[derive(Debug)]
pub enum Failure {
    /// The numerics failed or found nothing to report.
    Numerical { kind: &'static str, message: String },
    /// Input rejected at run time.
    Usage(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical {
                kind: error_kind(&e),
                message: e.to_string(),
            }
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Singularity { .. } => "singularity",
        Error::NonFinite { .. } => "non-finite",
        Error::StepUnderflow { .. } => "step-underflow",
        Error::TooManySteps { .. } => "too-many-steps",
        Error::NoReturn { .. } => "no-return",
        Error::TangentialCrossing { .. } => "tangential-crossing",
        Error::NoConvergence { .. } => "no-convergence",
        Error::Spectral(_) => "spectral",
        Error::Configuration(_) => "configuration",
        Error::BlowUp { .. } => "blow-up",
        Error::NotEstimable(_) => "not-estimable",
    }
}

fn not_found(message: impl Into<String>) -> Failure {
    Failure::Numerical {
        kind: "not-found",
        message: message.into(),
    }
}

fn params_json(p: &ModelParams) -> Value {
    json!({ "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "d": p.d })
}

fn pde_json(c: &PdeConfig) -> Value {
    let (delta, v0_amp) = match &c.initial {
        InitialData::Invasion { delta, v0_amp } => (Some(*delta), Some(*v0_amp)),
        InitialData::Cells { .. } => (None, None),
    };
    json!({
        "length": c.length,
        "cells": c.cells,
        "dt": c.dt,
        "t_end": c.t_end,
        "snapshot_times": c.snapshot_times,
        "delta": delta,
        "v0_amp": v0_amp,
        "probes": c.probes,
    })
}

/// The resolved configuration, minus the output directory so that artifacts
/// do not depend on where they are written.
pub fn config_json(cfg: &RunConfig) -> Value {
    json!({
        "command": cfg.command.name(),
        "params": params_json(&cfg.params),
        "seed": cfg.seed,
        "format": cfg.format.extension(),
        "wave": cfg.wave.map(|w| json!({ "c": w.c, "epsilon": w.epsilon })),
        "pde": cfg.pde.as_ref().map(pde_json),
        "horizon": cfg.horizon,
        "hopf_scan": cfg.hopf.map(|h| json!({
            "gamma_min": h.gamma_min, "gamma_max": h.gamma_max, "steps": h.steps,
        })),
        "front": cfg.front.map(|f| json!({
            "component": component_name(f.component), "level": f.level,
        })),
        "version": concat!("rmwave ", env!("CARGO_PKG_VERSION")),
    })
}

fn component_name(c: Component) -> &'static str {
    match c {
        Component::U => "U",
        Component::V => "V",
    }
}

fn complex_json(z: &Complex64) -> Value {
    json!([z.re, z.im])
}

fn kind_name(k: EquilibriumKind) -> &'static str {
    match k {
        EquilibriumKind::Origin => "origin",
        EquilibriumKind::BoundaryGamma => "prey-only",
        EquilibriumKind::Interior => "interior",
    }
}

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Sink => "Sink",
        Stability::Source => "Source",
        Stability::Saddle => "Saddle",
        Stability::ImaginaryPair => "ImaginaryPair",
        Stability::Degenerate => "Degenerate",
    }
}

struct Out<'a> {
    cfg: &'a RunConfig,
    stage: Staging,
}

impl Out<'_> {
    fn table(&mut self, stem: &str, t: &Table) -> io::Result<()> {
        let name = format!("{stem}.{}", self.cfg.format.extension());
        self.stage.write(&name, &t.render(self.cfg.format))
    }

    fn json(&mut self, name: &str, mut body: Value) -> io::Result<()> {
        body["config"] = config_json(self.cfg);
        self.stage.write(name, &to_json_text(&body))
    }
}

/// Executes the command, returning the artifact paths. Nothing is left in
/// the output directory on failure.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Out {
        cfg,
        stage: Staging::new(&cfg.out_dir)?,
    };
    match cfg.command {
        Command::Equilibria => equilibria(&mut out)?,
        Command::HopfScan => hopf_scan(&mut out)?,
        Command::Cycle => cycle(&mut out)?,
        Command::Heteroclinic => heteroclinic(&mut out)?,
        Command::WaveShoot => wave_shoot(&mut out)?,
        Command::ReducedCycle => reduced_cycle(&mut out)?,
        Command::Pde => pde_run(&mut out)?,
        Command::FrontSpeed => front_speed(&mut out)?,
    }
    Ok(out.stage.commit()?)
}

fn equilibria(out: &mut Out) -> Result<(), Failure> {
    let p = out.cfg.params;
    let eqs = model::equilibria(&p);
    let mut t = Table::new(&["U", "V", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2"]);
    let list: Vec<Value> = eqs
        .iter()
        .map(|e| {
            let [a, b] = e.eigenvalues;
            t.push(vec![e.location.u, e.location.v, a.re, a.im, b.re, b.im]);
            json!({
                "kind": kind_name(e.kind),
                "U": e.location.u,
                "V": e.location.v,
                "eigenvalues": [complex_json(&a), complex_json(&b)],
                "classification": stability_name(e.classification),
            })
        })
        .collect();
    out.table("equilibria", &t)?;
    out.json(
        "summary.json",
        json!({
            "equilibria": list,
            "hopf_gamma": model::hopf_gamma(&p).ok(),
        }),
    )?;
    Ok(())
}

/// Interior eigenvalue with the largest real part, then the largest
/// imaginary part.
fn leading(ev: [Complex64; 2]) -> Complex64 {
    let [a, b] = ev;
    if (b.re, b.im) > (a.re, a.im) {
        b
    } else {
        a
    }
}

fn hopf_scan(out: &mut Out) -> Result<(), Failure> {
    let h = out.cfg.hopf.expect("hopf-scan carries a range");
    let p = out.cfg.params;
    let mut t = Table::new(&["gamma", "re_lambda", "im_lambda"]);
    let mut skipped = 0usize;
    for k in 0..h.steps {
        let g = h.gamma_min + (h.gamma_max - h.gamma_min) * k as f64 / (h.steps - 1) as f64;
        let q = p.with_gamma(g);
        if !q.has_interior() {
            skipped += 1;
            continue;
        }
        let z = leading(model::eigenvalues_2x2(&model::interior_jacobian(&q)?));
        t.push(vec![g, z.re, z.im]);
    }
    let bracket = t
        .rows
        .windows(2)
        .find(|w| (w[0][1] < 0.0) != (w[1][1] < 0.0))
        .map(|w| [w[0][0], w[1][0]]);
    out.table("hopf_scan", &t)?;
    out.json(
        "summary.json",
        json!({
            "hopf_gamma": model::hopf_gamma(&p).ok(),
            "sign_change": bracket,
            "rows": t.rows.len(),
            "skipped_without_interior": skipped,
        }),
    )?;
    Ok(())
}

fn cycle_table(c: &LimitCycle) -> Table {
    let mut t = Table::new(&["t", "U", "V"]);
    for (s, &time) in c.points.iter().zip(&c.times) {
        t.push(vec![time, s.u, s.v]);
    }
    t
}

fn cycle_json(c: &LimitCycle) -> Value {
    json!({
        "period": c.period,
        "divergence_integral": c.divergence_integral,
        "closure_residual": c.closure_residual,
        "section_height": c.section_height(),
        "max_U": c.max_u(),
        "samples": c.points.len(),
        "encloses": [c.encloses.u, c.encloses.v],
    })
}

fn cycle(out: &mut Out) -> Result<(), Failure> {
    let p = out.cfg.params;
    let c = find_limit_cycle(&KineticField::new(p), &p, RETURN_TOL)?
        .ok_or_else(|| not_found("no limit cycle: orbits collapse onto the interior equilibrium"))?;
    out.table("cycle", &cycle_table(&c))?;
    out.json("summary.json", json!({ "cycle": cycle_json(&c) }))?;
    Ok(())
}

fn heteroclinic(out: &mut Out) -> Result<(), Failure> {
    let p = out.cfg.params;
    let field = KineticField::new(p);
    let h = heteroclinic_from_gamma(&field, &p, out.cfg.horizon.expect("orbit horizon"))?;
    let mut t = Table::new(&["t", "U", "V"]);
    for (time, y) in h.orbit.iter() {
        t.push(vec![time, y[0], y[1]]);
    }
    let omega = match &h.omega {
        OmegaLimit::Equilibrium { point, distance } => {
            json!({ "kind": h.omega.label(), "point": [point.u, point.v], "distance": distance })
        }
        OmegaLimit::Cycle { hausdorff, cycle } => {
            json!({ "kind": h.omega.label(), "hausdorff": hausdorff, "period": cycle.period })
        }
        OmegaLimit::Unclassified { last } => json!({ "kind": h.omega.label(), "last": [last.u, last.v] }),
    };
    let origin_excluded = cycles::no_heteroclinic_from_origin_check(&field, &p)?;
    out.table("heteroclinic", &t)?;
    out.json(
        "summary.json",
        json!({
            "direction": h.direction,
            "offset": h.offset,
            "omega": omega,
            "no_orbit_from_origin": origin_excluded,
        }),
    )?;
    Ok(())
}

fn wave_shoot(out: &mut Out) -> Result<(), Failure> {
    let p = out.cfg.params;
    let w = out.cfg.wave.expect("wave command carries a speed");
    let h = shoot_heteroclinic_4d(&p, w.c, out.cfg.horizon.expect("shot horizon"))?;
    let mut t = Table::new(&["s", "u1", "u2", "v1", "v2"]);
    for (s, y) in h.orbit.iter() {
        t.push(vec![s, y[0], y[1], y[2], y[3]]);
    }
    out.table("wave", &t)?;
    out.json(
        "summary.json",
        json!({
            "verdict": h.verdict.label(),
            "eigenvalue": h.eigenvalue,
            "direction": h.direction,
            "seed": h.seed,
            "start_gap": h.start_gap,
            "seed_alignment": h.seed_alignment,
            "ray_heights": h.ray_heights,
            "min_u1": h.min_u1,
            "min_v1": h.min_v1,
            "final_distance": h.final_distance,
            "cycle_distance": h.cycle_distance,
        }),
    )?;
    Ok(())
}

fn reduced_cycle(out: &mut Out) -> Result<(), Failure> {
    let p = out.cfg.params;
    let w = out.cfg.wave.expect("wave command carries a speed");
    let c = wave::reduced_limit_cycle(&p, w.epsilon)?
        .ok_or_else(|| not_found("no limit cycle of the reduced system"))?;
    out.table("reduced_cycle", &cycle_table(&c))?;
    out.json(
        "summary.json",
        json!({
            "cycle": cycle_json(&c),
            "line": wave::line_witness(&p),
            "crosses_line": wave::cycle_crosses_line_check(&c, &p),
        }),
    )?;
    Ok(())
}

fn snapshot_table(f: &Field) -> Table {
    let mut t = Table::new(&["x", "U", "V"]);
    for i in 0..f.len() {
        t.push(vec![f.x(i), f.u[i], f.v[i]]);
    }
    t
}

fn simulate(out: &mut Out, with_snapshots: bool) -> Result<(pde::PdeRun, Vec<String>), Failure> {
    let cfg = out.cfg.pde.as_ref().expect("pde commands carry a grid");
    let run = pde::simulate(cfg)?;
    let ext = out.cfg.format.extension();
    let mut files = Vec::new();
    if with_snapshots {
        for f in &run.snapshots {
            let stem = format!("snap_t{}", label(f.t));
            out.table(&stem, &snapshot_table(f))?;
            files.push(format!("{stem}.{ext}"));
        }
    }
    for pr in &run.probes {
        let mut t = Table::new(&["t", "U", "V"]);
        for k in 0..pr.times.len() {
            t.push(vec![pr.times[k], pr.u[k], pr.v[k]]);
        }
        let stem = format!("probe_x{}", label(pr.x));
        out.table(&stem, &t)?;
        files.push(format!("{stem}.{ext}"));
    }
    Ok((run, files))
}

fn pde_run(out: &mut Out) -> Result<(), Failure> {
    let (run, files) = simulate(out, true)?;
    out.json(
        "manifest.json",
        json!({
            "steps": run.steps,
            "min_value": run.min_value,
            "snapshot_times": run.snapshots.iter().map(|f| f.t).collect::<Vec<_>>(),
            "files": files,
        }),
    )?;
    Ok(())
}

fn front_speed(out: &mut Out) -> Result<(), Failure> {
    let target = out.cfg.front.expect("front-speed carries a level");
    let (run, files) = simulate(out, false)?;
    let est = pde::estimate_front_speed(&run.snapshots, target.component, target.level)?;
    let mut t = Table::new(&["t", "position"]);
    for &(time, x) in &est.positions {
        t.push(vec![time, x]);
    }
    out.table("fronts", &t)?;
    out.json(
        "manifest.json",
        json!({
            "steps": run.steps,
            "min_value": run.min_value,
            "component": component_name(target.component),
            "level": est.level,
            "speed": est.speed,
            "slope": est.slope,
            "r_squared": est.r_squared,
            "files": files,
        }),
    )?;
    Ok(())
}
