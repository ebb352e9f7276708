//! Executes a parsed [`RunConfig`] and writes its artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::checkpoint::{read_checkpoint, write_checkpoint, RunIdentity};
use crate::config::{fmt_f64, Command, EstimatorChoice, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    rate_regression, run_ergodic_study, run_spatial_study, run_temporal_study, ConvergenceTable, ErgodicConfig,
    ModelSpec, ParamKind, Snapshots, SpatialConfig, TemporalConfig,
};
use crate::grid::SpectralBasis;
use crate::integrator::{run_from, time_to_steps};
use crate::noise::NoiseSource;
use crate::output::{
    convergence_csv, history_csv, line_chart, metadata_header, snapshots_csv, summary_csv, verify_csv, write_file,
    Series, SummaryRow,
};
use crate::verify::run_suite;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub svg: bool,
    /// Byte-reproducible output: no timestamps, wall-clock columns written as 0.
    pub deterministic: bool,
    /// `simulate` only: continue from this checkpoint.
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Human-readable summary lines for stdout.
    pub messages: Vec<String>,
    /// False when the `verify` suite reports a failure.
    pub success: bool,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    opts: &'a RunOptions,
    out: RunOutcome,
}

impl Ctx<'_> {
    fn header(&self, kind: &str, extra: &[(&str, String)]) -> String {
        let mut info: Vec<(&str, String)> = extra.to_vec();
        if !self.opts.deterministic {
            let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            info.push(("unix_time", now.to_string()));
        }
        metadata_header(kind, self.cfg, &info)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = write_file(&self.opts.out_dir, name, contents)?;
        self.out.files.push(p);
        Ok(())
    }

    fn say(&mut self, msg: String) {
        self.out.messages.push(msg);
    }

    fn wall(&self, secs: f64) -> f64 {
        if self.opts.deterministic {
            0.0
        } else {
            secs
        }
    }
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut ctx = Ctx {
        cfg,
        opts,
        out: RunOutcome {
            success: true,
            ..Default::default()
        },
    };
    if opts.resume.is_some() && cfg.command != Command::Simulate {
        return Err(Error::InvalidParameter("--resume only applies to simulate".into()));
    }
    check_dissipativity(cfg);
    match cfg.command {
        Command::Simulate => simulate(&mut ctx)?,
        Command::ConvergeTime | Command::ConvergeSpace => converge(&mut ctx)?,
        Command::Ergodic => ergodic(&mut ctx)?,
        Command::Verify => verify(&mut ctx)?,
    }
    Ok(ctx.out)
}

fn check_dissipativity(cfg: &RunConfig) {
    if cfg.validation || cfg.command == Command::Verify {
        return;
    }
    let d = cfg.drift.dissipativity(cfg.lf_radius, 1.0, 10_000);
    if !d.holds {
        log::warn!(
            "drift violates L_f < lambda_1 on [-{r}, {r}] (L_f = {:.4}); convergence guarantees may not apply",
            d.l_f,
            r = cfg.lf_radius
        );
    }
}

fn model(cfg: &RunConfig) -> ModelSpec {
    ModelSpec {
        sigma: cfg.sigma,
        drift: cfg.drift,
        initial: cfg.initial.clone(),
        validation: cfg.validation,
    }
}

fn simulate(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let tau = cfg.require_tau()?;
    let n = cfg.require_n_modes()?;
    let n_steps = time_to_steps(cfg.require_t_final()?, tau)?;
    let basis = Arc::new(SpectralBasis::new(n)?);
    let params = model(cfg).params(tau, basis.clone())?;
    params.warn_on_rate_constraint();
    let src = NoiseSource::new(cfg.seed, 0, tau, n - 1)?;
    let id = RunIdentity::of(&params, cfg.seed, 0);

    let state = match &ctx.opts.resume {
        Some(path) => {
            let s = read_checkpoint(path, &id)?;
            if s.step_index > n_steps {
                return Err(Error::Checkpoint(format!(
                    "checkpoint is at step {} beyond the final step {n_steps}",
                    s.step_index
                )));
            }
            s
        }
        None => params.initial_state(),
    };
    let start_step = state.step_index;
    let every = if cfg.snapshot_every == 0 {
        n_steps.max(1)
    } else {
        cfg.snapshot_every
    };
    let mut snaps = Snapshots {
        every,
        tau,
        frames: Vec::new(),
    };
    let timer = Instant::now();
    let last = run_from(&params, &src, state, n_steps - start_step, &mut [&mut snaps])?;
    let wall = timer.elapsed().as_secs_f64();
    if snaps.frames.last().map(|f| f.0) != Some(n_steps as f64 * tau) {
        snaps.frames.push((n_steps as f64 * tau, last.nodal(&basis)?));
    }

    let mut extra = vec![("trajectory_id", "0".to_string())];
    if start_step > 0 {
        extra.push(("resumed_from_step", start_step.to_string()));
    }
    let header = ctx.header("trajectory", &extra);
    ctx.write("trajectory.csv", &snapshots_csv(&header, &basis, &snaps))?;
    let ck = ctx.opts.out_dir.join("checkpoint.txt");
    write_checkpoint(&ck, &id, &last)?;
    ctx.out.files.push(ck);

    if ctx.opts.svg {
        let series: Vec<Series> = snaps
            .frames
            .iter()
            .rev()
            .take(6)
            .rev()
            .map(|(t, u)| Series {
                name: format!("t = {}", fmt_f64(*t)),
                points: basis.grid().iter().copied().zip(u.0.iter().copied()).collect(),
            })
            .collect();
        ctx.write("trajectory.svg", &line_chart("Snapshots", "x", "u", &series, false))?;
    }
    let u = last.nodal(&basis)?;
    let sup = u.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ctx.say(format!(
        "simulate: {} steps from step {start_step}, mass {}, sup|u| {}, {:.3} s",
        n_steps - start_step,
        fmt_f64(crate::observables::mass(&u)),
        fmt_f64(sup),
        wall
    ));
    Ok(())
}

fn converge(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let t_final = cfg.require_t_final()?;
    let timer = Instant::now();
    let (table, name): (ConvergenceTable, &str) = if cfg.command == Command::ConvergeTime {
        let n = cfg.require_n_modes()?;
        let tc = TemporalConfig {
            model: model(cfg),
            t_final,
            n_modes: n,
            n_ref: cfg.n_ref.unwrap_or(n),
            tau_ref: cfg.tau_ref.ok_or_else(|| Error::Config(vec!["missing required key `tau_ref`".into()]))?,
            taus: cfg.taus.clone(),
            trajectories: cfg.trajectories,
            seed: cfg.seed,
            check_every: cfg.check_every,
            coupling: cfg.coupling,
        };
        (run_temporal_study(&tc)?, "convergence_time")
    } else {
        let sc = SpatialConfig {
            model: model(cfg),
            t_final,
            tau: cfg.require_tau()?,
            n_ref: cfg.n_ref.ok_or_else(|| Error::Config(vec!["missing required key `n_ref`".into()]))?,
            n_modes: cfg.n_modes_list.clone(),
            trajectories: cfg.trajectories,
            seed: cfg.seed,
            check_every: cfg.check_every,
            coupling: cfg.coupling,
        };
        (run_spatial_study(&sc)?, "convergence_space")
    };
    let wall = timer.elapsed().as_secs_f64();
    let slope = match rate_regression(&table) {
        Ok(s) => Some(s),
        Err(Error::TooFewRows { .. }) => None,
        Err(e) => return Err(e),
    };
    let header = ctx.header("convergence", &[]);
    ctx.write(&format!("{name}.csv"), &convergence_csv(&header, &table, slope))?;
    if ctx.opts.svg {
        let kind = table.kind;
        let series = vec![Series {
            name: "E".into(),
            points: table.rows.iter().map(|r| (r.parameter(kind), r.error)).collect(),
        }];
        let xl = if kind == ParamKind::Tau { "tau" } else { "h" };
        ctx.write(&format!("{name}.svg"), &line_chart("Strong error", xl, "E", &series, true))?;
    }
    for r in &table.rows {
        ctx.say(format!(
            "tau {} N {}: E = {:.4e}{}",
            fmt_f64(r.tau),
            r.n_modes,
            r.error,
            r.rate.map(|x| format!(", pair rate {x:.3}")).unwrap_or_default()
        ));
    }
    match slope {
        Some(s) => ctx.say(format!("slope {s:.4} ({wall:.1} s)")),
        None => ctx.say(format!("fewer than 3 rows, no slope ({wall:.1} s)")),
    }
    Ok(())
}

fn ergodic(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let single = matches!(cfg.estimator, EstimatorChoice::Single | EstimatorChoice::Both);
    let ensemble = matches!(cfg.estimator, EstimatorChoice::Ensemble | EstimatorChoice::Both);
    let ec = ErgodicConfig {
        tau: cfg.require_tau()?,
        n_modes: cfg.require_n_modes()?,
        sigma: cfg.sigma,
        drift: cfg.drift,
        validation: cfg.validation,
        initials: cfg.initials.clone(),
        tests: cfg.tests.clone(),
        t_single: if single { Some(cfg.require_t_final()?) } else { None },
        ensemble: if ensemble {
            Some((
                cfg.ensemble_size,
                cfg.t_ensemble
                    .ok_or_else(|| Error::Config(vec!["missing required key `t_ensemble`".into()]))?,
            ))
        } else {
            None
        },
        seed: cfg.seed,
        burn_in: cfg.burn_in,
        record_every: cfg.record_every,
    };
    let report = run_ergodic_study(&ec)?;
    let mut rows = Vec::new();
    let mut charts: Vec<Series> = Vec::new();
    for e in &report.entries {
        let name = format!("u{}_g{}_{}", e.initial, e.test, e.estimator.label());
        let header = ctx.header(
            "ergodic_history",
            &[
                ("initial", e.initial.to_string()),
                ("test", e.test.to_string()),
                ("estimator", e.estimator.label().to_string()),
            ],
        );
        ctx.write(&format!("ergodic_{name}.csv"), &history_csv(&header, &e.average))?;
        let wall = ctx.wall(e.wallclock_s);
        ctx.say(format!("{name}: estimate {:+.5e} ({:.2} s)", e.estimate, e.wallclock_s));
        rows.push(SummaryRow {
            name: name.clone(),
            estimate: e.estimate,
            wallclock_s: wall,
        });
        charts.push(Series {
            name,
            points: e.average.history.clone(),
        });
    }
    let header = ctx.header("ergodic_summary", &[]);
    ctx.write("ergodic_summary.csv", &summary_csv(&header, &rows))?;
    if ctx.opts.svg {
        ctx.write(
            "ergodic.svg",
            &line_chart("Running time averages", "t", "average", &charts, false),
        )?;
    }
    Ok(())
}

fn verify(ctx: &mut Ctx) -> Result<()> {
    let results = run_suite(ctx.cfg);
    for r in &results {
        ctx.say(r.line());
    }
    ctx.out.success = results.iter().all(|r| r.passed);
    let header = ctx.header("verify", &[]);
    ctx.write("verify.csv", &verify_csv(&header, &results))?;
    Ok(())
}

/// Reads a config file that is either plain `key = value` text or an output
/// file carrying a metadata header.
pub fn load_config_text(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    Ok(crate::config::config_from_header(&text).unwrap_or(text))
}
