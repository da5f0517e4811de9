//! Command implementations.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::ValueEnum;
use log::info;
use serde::Serialize;

use waveobs_core::hypersolve::{simulate, Field, Grid, SolveOptions};
use waveobs_core::observe::{
    assemble_trace, boundary_series, discrete_norm, extract_observation, ratio_for_mode, ratio_study,
    InitialSamples, Observation,
};
use waveobs_core::obstime::{autonomous_bound, check_time_condition, classify_initial_times, min_observability_time};
use waveobs_core::problem::{make_problem, reduce_spherical, Problem, Side};
use waveobs_core::reconstruct::{
    reconstruct_one_sided, reconstruct_one_sided_right, reconstruct_two_sided, reconstruction_error,
    ReconstructOptions, ReconstructionResult,
};

use crate::config::{Delegate, ModeFlag, RunConfig, SchemaError};
use crate::output::{GridInfo, Manifest, Outputs, Table, Versions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Observe,
    Reconstruct,
    Obstime,
    Convergence,
    Spherical,
    /// Repeat a run from its manifest (passed as `--config`).
    Replay,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Observe => "observe",
            Command::Reconstruct => "reconstruct",
            Command::Obstime => "obstime",
            Command::Convergence => "convergence",
            Command::Spherical => "spherical",
            Command::Replay => "replay",
        }
    }

    fn parse(name: &str) -> anyhow::Result<Command> {
        Command::from_str(name, false).map_err(|_| SchemaError(format!("unknown command `{name}` in manifest")).into())
    }
}

pub struct Flags {
    pub config: PathBuf,
    pub mode: Option<ModeFlag>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub classify: bool,
}

fn schema(msg: impl Into<String>) -> anyhow::Error {
    SchemaError(msg.into()).into()
}

struct Ctx<'a> {
    config: &'a RunConfig,
    mode: ModeFlag,
    seed: u64,
    classify: bool,
    solve: SolveOptions,
}

impl Ctx<'_> {
    fn grid(&self, p: &Problem, scale: usize) -> anyhow::Result<Grid> {
        let g = &self.config.grid;
        if !(g.duration > 0.0) {
            return Err(schema("grid.duration must be positive"));
        }
        Ok(Grid::new(p.t0, p.t0 + g.duration, g.nt * scale, p.length, g.nx * scale)?)
    }

    fn reconstruct_opts(&self, nx: usize) -> ReconstructOptions {
        ReconstructOptions {
            nx: Some(self.config.reconstruct.nx.unwrap_or(nx)),
            enforce_time_condition: self.config.reconstruct.enforce_time_condition,
            solve: self.solve,
        }
    }
}

/// Runs `command` and writes its manifest; returns the manifest path.
pub fn run(command: Command, flags: &Flags) -> anyhow::Result<PathBuf> {
    if command == Command::Replay {
        let text = std::fs::read_to_string(&flags.config)
            .map_err(|e| schema(format!("reading {}: {e}", flags.config.display())))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| schema(format!("manifest: {e}")))?;
        let mode = match manifest.mode.as_deref() {
            Some(m) => Some(ModeFlag::from_str(m, false).map_err(|_| schema(format!("unknown mode `{m}`")))?),
            None => None,
        };
        let inner = Command::parse(&manifest.command)?;
        if inner == Command::Replay {
            return Err(schema("a manifest cannot name the replay command"));
        }
        let replay = Flags {
            config: flags.config.clone(),
            mode,
            out: flags.out.clone(),
            seed: Some(manifest.seed),
            classify: manifest.classify,
        };
        return execute(inner, &manifest.config, &replay);
    }
    let config = RunConfig::load(&flags.config).map_err(|e| match e.downcast::<SchemaError>() {
        Ok(s) => s.into(),
        Err(e) => schema(format!("{e:#}")),
    })?;
    execute(command, &config, flags)
}

fn execute(command: Command, config: &RunConfig, flags: &Flags) -> anyhow::Result<PathBuf> {
    let started = Instant::now();
    let ctx = Ctx {
        config,
        mode: flags.mode.or(config.mode).unwrap_or(ModeFlag::TwoSided),
        seed: flags.seed.or(config.seed).unwrap_or(0),
        classify: flags.classify,
        solve: SolveOptions::default(),
    };
    let dir = flags
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("waveobs-out"));
    let mut out = Outputs::create(&dir)?;
    let spec = config.problem_spec()?;
    let problem = match command {
        Command::Spherical => {
            let s = config
                .spherical
                .as_ref()
                .ok_or_else(|| schema("the spherical command needs a `spherical` section"))?;
            reduce_spherical(s.dim, s.r1, s.r2, &spec)?
        }
        _ => make_problem(&spec)?,
    };
    let grid = ctx.grid(&problem, 1)?;
    let target = match command {
        Command::Spherical => config.spherical.as_ref().map(|s| s.delegate).unwrap_or(Delegate::Reconstruct),
        Command::Simulate => Delegate::Simulate,
        Command::Observe => Delegate::Observe,
        Command::Reconstruct => Delegate::Reconstruct,
        Command::Obstime => Delegate::Obstime,
        Command::Convergence => Delegate::Convergence,
        Command::Replay => unreachable!("replay resolves to another command"),
    };
    info!("{} on {} ({}x{})", command.name(), spec.name.as_deref().unwrap_or("problem"), grid.nt, grid.nx);
    let outcome = match target {
        Delegate::Simulate => cmd_simulate(&ctx, &problem, &grid, &mut out),
        Delegate::Observe => cmd_observe(&ctx, &problem, &grid, &mut out),
        Delegate::Reconstruct => cmd_reconstruct(&ctx, &problem, &grid, &mut out),
        Delegate::Obstime => cmd_obstime(&ctx, &problem, &mut out),
        Delegate::Convergence => cmd_convergence(&ctx, &problem, &mut out),
    };
    let manifest = Manifest {
        command: command.name().to_string(),
        mode: flags.mode.or(config.mode).map(|m| m.name().to_string()),
        seed: ctx.seed,
        classify: ctx.classify,
        config: config.clone(),
        grid: GridInfo {
            t_start: grid.t_start,
            t_end: grid.t_end,
            nt: grid.nt,
            length: grid.length,
            nx: grid.nx,
            dt: grid.dt(),
            dx: grid.dx(),
        },
        versions: Versions {
            waveobs: env!("CARGO_PKG_VERSION").to_string(),
        },
        status: if outcome.is_ok() { "ok" } else { "failed" }.to_string(),
        error: outcome.as_ref().err().map(|e| format!("{e:#}")),
        outputs: out.written.clone(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    out.json("manifest.json", &manifest)?;
    outcome?;
    Ok(dir.join("manifest.json"))
}

fn cmd_simulate(ctx: &Ctx, p: &Problem, grid: &Grid, out: &mut Outputs) -> anyhow::Result<()> {
    let field = simulate(p, grid, &ctx.solve)?;
    let slices = ctx.config.simulate.slices.max(2);
    let mut levels: Vec<usize> = (0..slices).map(|k| (k * grid.nt + (slices - 1) / 2) / (slices - 1)).collect();
    levels.dedup();
    let mut table = Table::new(&["t", "x", "u", "v", "w"]);
    for &j in &levels {
        for i in 0..=grid.nx {
            let s = field.row(j)[i];
            table.push(vec![grid.t(j).into(), grid.x(i).into(), s.u.into(), s.v.into(), s.w.into()]);
        }
    }
    out.csv("field.csv", &table)
}

fn observations(ctx: &Ctx, p: &Problem, grid: &Grid) -> anyhow::Result<(Field, Observation, Observation)> {
    let field = simulate(p, grid, &ctx.solve)?;
    let left = extract_observation(&field, p, Side::Left)?;
    let right = extract_observation(&field, p, Side::Right)?;
    Ok((field, left, right))
}

fn cmd_observe(ctx: &Ctx, p: &Problem, grid: &Grid, out: &mut Outputs) -> anyhow::Result<()> {
    let (_, left, right) = observations(ctx, p, grid)?;
    let mut norms = Table::new(&["quantity", "value"]);
    for obs in [&left, &right] {
        let tr = assemble_trace(p, obs)?;
        let h = boundary_series(p, obs.side, &obs.k)?;
        let mut table = Table::new(&["t", "k", "h", "a", "b"]);
        for j in 0..obs.k.len() {
            table.push(vec![
                obs.k.t(j).into(),
                obs.k.values[j].into(),
                h.values[j].into(),
                tr.a.values[j].into(),
                tr.b.values[j].into(),
            ]);
        }
        let tag = side_tag(obs.side);
        out.csv(&format!("observation_{tag}.csv"), &table)?;
        norms.push(vec![
            format!("k_{tag}").into(),
            discrete_norm(&obs.k.values, obs.order, obs.k.step)?.into(),
        ]);
        norms.push(vec![
            format!("h_{tag}").into(),
            discrete_norm(&h.values, p.bc(obs.side).norm_order(), h.step)?.into(),
        ]);
    }
    let initial = InitialSamples::from_problem(p, grid.nx)?;
    norms.push(vec!["initial".into(), initial.norm()?.into()]);
    let ratio = match ctx.mode.observed() {
        None => ratio_for_mode(p, &initial, &left, Some(&right), ctx.mode.mode())?,
        Some(Side::Left) => ratio_for_mode(p, &initial, &left, None, ctx.mode.mode())?,
        Some(Side::Right) => ratio_for_mode(p, &initial, &right, None, ctx.mode.mode())?,
    };
    norms.push(vec![format!("ratio_{}", ctx.mode.name()).into(), ratio.into()]);
    out.csv("norms.csv", &norms)?;

    let trials = ctx.config.observe.trials;
    if trials > 0 {
        if ctx.mode == ModeFlag::OneSidedRight {
            return Err(schema("random-data trials observe x=0 in one-sided runs; use one_sided_left"));
        }
        let study = ratio_study(p, grid, ctx.mode.mode(), trials, ctx.config.observe.amplitude, ctx.seed, &ctx.solve)?;
        let mut table = Table::new(&["trial", "ratio"]);
        for (i, r) in study.ratios.iter().enumerate() {
            table.push(vec![i.into(), (*r).into()]);
        }
        out.csv("ratios.csv", &table)?;
        info!("max ratio over {trials} trials: {:e}", study.max);
    }
    Ok(())
}

fn side_tag(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn reconstruct(ctx: &Ctx, p: &Problem, grid: &Grid) -> anyhow::Result<ReconstructionResult> {
    let (_, left, right) = observations(ctx, p, grid)?;
    let duration = ctx.config.grid.duration;
    let opts = ctx.reconstruct_opts(grid.nx);
    let r = match ctx.mode.observed() {
        None => reconstruct_two_sided(p, &left, &right, duration, &opts),
        Some(Side::Left) => reconstruct_one_sided(p, &left, duration, &opts),
        Some(Side::Right) => reconstruct_one_sided_right(p, &right, duration, &opts),
    };
    Ok(r?)
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    mode: &'static str,
    sup_phi_error: f64,
    sup_psi_error: f64,
    #[serde(flatten)]
    result: &'a ReconstructionResult,
}

fn cmd_reconstruct(ctx: &Ctx, p: &Problem, grid: &Grid, out: &mut Outputs) -> anyhow::Result<()> {
    let r = reconstruct(ctx, p, grid)?;
    let mut table = Table::new(&["x", "phi_hat", "psi_hat", "phi", "psi", "phi_error", "psi_error"]);
    for (i, &x) in r.x.iter().enumerate() {
        let (phi, psi) = (p.phi(x)?, p.psi(x)?);
        table.push(vec![
            x.into(),
            r.phi_hat[i].into(),
            r.psi_hat[i].into(),
            phi.into(),
            psi.into(),
            (r.phi_hat[i] - phi).abs().into(),
            (r.psi_hat[i] - psi).abs().into(),
        ]);
    }
    out.csv("reconstruction.csv", &table)?;
    let (sup_phi_error, sup_psi_error) = reconstruction_error(p, &r)?;
    info!("sup errors: phi {sup_phi_error:e}, psi {sup_psi_error:e}");
    out.json(
        "diagnostics.json",
        &Diagnostics {
            mode: ctx.mode.name(),
            sup_phi_error,
            sup_psi_error,
            result: &r,
        },
    )
}

fn cmd_obstime(ctx: &Ctx, p: &Problem, out: &mut Outputs) -> anyhow::Result<()> {
    let mode = ctx.mode.mode();
    let opts = &ctx.config.obstime;
    let duration = ctx.config.grid.duration;
    let cond = check_time_condition(p, p.t0, duration, mode)?;
    let t_star = min_observability_time(p, p.t0, mode, opts.horizon)?;
    let bound = autonomous_bound(p, mode).ok();
    let mut table = Table::new(&[
        "mode",
        "t0",
        "duration",
        "integral",
        "threshold",
        "passes",
        "t_star",
        "autonomous_bound",
    ]);
    table.push(vec![
        mode.to_string().into(),
        p.t0.into(),
        duration.into(),
        cond.integral.into(),
        cond.threshold.into(),
        cond.passes().into(),
        t_star.into(),
        bound.into(),
    ]);
    out.csv("obstime.csv", &table)?;
    if ctx.classify {
        let t0 = opts.t0_grid().map_err(|e| schema(e.to_string()))?;
        let c = classify_initial_times(p, mode, &t0, opts.horizon, ctx.solve.exec)?;
        let mut table = Table::new(&["t0", "status", "t_star"]);
        for row in &c.rows {
            let status = if row.t_star.is_some() { "observable" } else { "never" };
            table.push(vec![row.t0.into(), status.into(), row.t_star.into()]);
        }
        out.csv("classification.csv", &table)?;
        let mut summary = Table::new(&["mode", "regime", "horizon"]);
        summary.push(vec![mode.to_string().into(), c.regime.to_string().into(), opts.horizon.into()]);
        out.csv("regime.csv", &summary)?;
        info!("initial-time regime: {}", c.regime);
    }
    Ok(())
}

fn cmd_convergence(ctx: &Ctx, p: &Problem, out: &mut Outputs) -> anyhow::Result<()> {
    let levels = ctx.config.convergence.levels;
    if levels == 0 {
        return Err(schema("convergence.levels must be at least 1"));
    }
    let mut table = Table::new(&["level", "nx", "nt", "phi_error", "psi_error", "total_error", "ratio"]);
    let mut previous: Option<f64> = None;
    for level in 0..levels {
        let grid = ctx.grid(p, 1 << level)?;
        let r = reconstruct(ctx, p, &grid).with_context(|| format!("level {level} ({}x{})", grid.nt, grid.nx))?;
        let (a, b) = reconstruction_error(p, &r)?;
        let total = a + b;
        table.push(vec![
            level.into(),
            grid.nx.into(),
            grid.nt.into(),
            a.into(),
            b.into(),
            total.into(),
            previous.map(|e| e / total).into(),
        ]);
        info!("level {level}: error {total:e}");
        previous = Some(total);
    }
    out.csv("convergence.csv", &table)
}
