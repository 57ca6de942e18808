//! Runs the engines of a scenario on one shared innovation path.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use phasefilter::filters::{
    correction_terms, FilterState, KalmanFilter, PositivityPolicy, Trajectory, TrajectoryRow,
};
use phasefilter::measurement::{
    make_pq, simulate_innovation, uniform_times, Increment, InnovationPath,
};
use phasefilter::phase::{GridDomain, PSD_TOL};
use phasefilter::side::{
    extract_moments, write_snapshot_csv, MomentTrajectory, SideMode, SideOperator, SideState,
};
use serde::Serialize;

use crate::config::{to_rows, Engine, Positivity, Scenario};
use crate::error::{io_err, CliError};

/// Heisenberg violations below this are reported.
pub const PHYSICALITY_TOL: f64 = 1e-8;

/// Discrepancies between engines at one output time, in units of the
/// filter's posterior standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub t: f64,
    pub kalman_mean_err: Option<f64>,
    pub kalman_cov_err: Option<f64>,
    pub modified_mean_err: Option<f64>,
    pub modified_cov_err: Option<f64>,
    pub grid_mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Conservation {
    /// `max |mass - 1|` over output times.
    pub mass_drift: f64,
    /// `max |Phi(t, 0) - 1|` of the grid's QCF at checkpoints.
    pub phi0_drift: f64,
    /// Largest Hermitian violation of the grid's QCF at checkpoints.
    pub hermitian: f64,
    pub checkpoints: usize,
    pub max_leaked_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Physicality {
    pub kalman_min_eig: Option<f64>,
    pub modified_min_eig: Option<f64>,
    /// Steps at which the modified filter left the physical set.
    pub modified_violations: usize,
    pub modified_projections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub engine: Engine,
    pub steps: usize,
    pub seed: u64,
    pub conservation: Option<Conservation>,
    pub physicality: Physicality,
    pub worst_kalman_mean_err: Option<f64>,
    pub worst_kalman_cov_err: Option<f64>,
    pub worst_modified_mean_err: Option<f64>,
    pub worst_modified_cov_err: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub path: InnovationPath,
    pub kalman: Option<Trajectory>,
    pub modified: Option<Trajectory>,
    pub grid: Option<MomentTrajectory>,
    pub snapshots: Vec<SideState>,
    pub metrics: Vec<MetricRow>,
    pub summary: Summary,
}

fn discrepancy(
    mu: &DVector<f64>,
    cov: &DMatrix<f64>,
    fmu: &DVector<f64>,
    fcov: &DMatrix<f64>,
) -> (f64, f64) {
    let n = mu.len();
    let sd: Vec<f64> = (0..n).map(|i| fcov[(i, i)].max(0.0).sqrt()).collect();
    let mean = (0..n)
        .map(|i| (mu[i] - fmu[i]).abs() / sd[i])
        .fold(0.0, f64::max);
    let mut c = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            c = c.max((cov[(i, j)] - fcov[(i, j)]).abs() / (sd[i] * sd[j]));
        }
    }
    (mean, c)
}

fn worst(rows: &[MetricRow], f: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
    rows.iter().filter_map(f).reduce(f64::max)
}

fn runtime(e: phasefilter::Error) -> CliError {
    CliError::Runtime(e)
}

/// Number of QCF checkpoints on the grid over a run.
const QCF_CHECKPOINTS: usize = 20;

pub fn execute(scn: &Scenario) -> Result<RunOutputs, CliError> {
    let run = &scn.config.run;
    let engine = run.engine;
    let dt = run.dt;
    let steps = scn.steps;
    let every = run.output_every;
    let want_kalman = matches!(engine, Engine::Kalman | Engine::Compare);
    let want_modified = matches!(engine, Engine::ModifiedKalman | Engine::Compare);
    let want_grid = matches!(engine, Engine::SideGrid | Engine::Compare);
    let policy = match run.positivity {
        Positivity::Halt => PositivityPolicy::Halt,
        Positivity::Project => PositivityPolicy::Project {
            floor: run.project_floor,
        },
    };
    let model = &scn.model;
    let ccr = &model.ccr;
    let kf = KalmanFilter::new(model, &scn.channel).map_err(CliError::Validation)?;
    let mut path = simulate_innovation(&scn.channel.fft, &uniform_times(0.0, dt, steps), run.seed)
        .map_err(runtime)?;

    let (op, mut grid_state) = if want_grid {
        let g = scn.grid();
        let dom =
            GridDomain::cube(model.n(), g.half_width, g.points).map_err(CliError::Validation)?;
        let op = SideOperator::new(model, Some(&scn.channel), dom.clone(), scn.side_config())
            .map_err(CliError::Validation)?;
        op.check_dt(dt).map_err(CliError::Validation)?;
        let st = SideState::gaussian(dom, &scn.init, SideMode::Filtering)
            .map_err(CliError::Validation)?;
        (Some(op), Some(st))
    } else {
        (None, None)
    };

    let r = scn.channel.r();
    let mut kal = want_kalman.then(|| FilterState::new(scn.init.clone(), 0.0, r));
    let mut modf = want_modified.then(|| FilterState::new(scn.init.clone(), 0.0, r));
    let mut kal_traj = want_kalman.then(Trajectory::default);
    let mut mod_traj = want_modified.then(Trajectory::default);
    let mut grid_traj = want_grid.then(MomentTrajectory::default);
    let mut metrics = Vec::new();
    let mut conservation = want_grid.then(Conservation::default);
    let mut snapshots = Vec::new();
    let mut snap_steps: Vec<usize> = scn
        .grid()
        .snapshots
        .iter()
        .map(|t| (t / dt).round().min(steps as f64) as usize)
        .collect();
    snap_steps.sort_unstable();
    snap_steps.dedup();
    let checkpoint_every = (steps / QCF_CHECKPOINTS).max(1);
    let mut phys = Physicality {
        kalman_min_eig: None,
        modified_min_eig: None,
        modified_violations: 0,
        modified_projections: 0,
    };
    let mut last_corr = None;

    for i in 0..=steps {
        if i > 0 {
            let x = path.d_chi[i - 1].clone();
            let mut d_z = None;
            if let Some(s) = &kal {
                let out = kf
                    .step(
                        s,
                        Increment::Innovation(&x),
                        dt,
                        None,
                        PositivityPolicy::Halt,
                    )
                    .map_err(runtime)?;
                d_z = d_z.or(out.d_z);
                kal = Some(out.state);
            }
            if let Some(s) = &modf {
                let corr = if model.psi.is_zero() {
                    None
                } else {
                    Some(correction_terms(model, &s.belief).map_err(runtime)?)
                };
                let out = kf
                    .step(s, Increment::Innovation(&x), dt, corr.as_ref(), policy)
                    .map_err(runtime)?;
                if out.projected {
                    phys.modified_projections += 1;
                }
                d_z = d_z.or(out.d_z);
                modf = Some(out.state);
                last_corr = corr;
            }
            if let (Some(op), Some(s)) = (&op, &grid_state) {
                let (next, info) = op.step(s, Increment::Innovation(&x), dt).map_err(runtime)?;
                if let Some(c) = conservation.as_mut() {
                    c.max_leaked_cells = c.max_leaked_cells.max(info.leaked);
                }
                d_z = d_z.or(info.d_z);
                grid_state = Some(next);
            }
            path.d_z.push(d_z.expect("at least one engine runs"));
        }
        if let Some(s) = &kal {
            let h = s.belief.heisenberg_min_eig(ccr);
            phys.kalman_min_eig = Some(phys.kalman_min_eig.map_or(h, |m: f64| m.min(h)));
        }
        if let Some(s) = &modf {
            let h = s.belief.heisenberg_min_eig(ccr);
            phys.modified_min_eig = Some(phys.modified_min_eig.map_or(h, |m: f64| m.min(h)));
            if h < -PHYSICALITY_TOL {
                phys.modified_violations += 1;
                log::warn!(
                    "modified filter left the physical set at t = {}: min eig {h:e}",
                    s.t
                );
            }
        }
        if let (Some(s), Some(c)) = (&grid_state, conservation.as_mut()) {
            if i % checkpoint_every == 0 || i == steps {
                let qcf = s.qcf().map_err(runtime)?;
                c.phi0_drift = c.phi0_drift.max((qcf.at_origin() - 1.0).norm());
                c.hermitian = c.hermitian.max(qcf.hermitian_violation());
                c.checkpoints += 1;
            }
            if snap_steps.binary_search(&i).is_ok() {
                snapshots.push(s.clone());
            }
        }
        if i % every != 0 && i != steps {
            continue;
        }
        if let (Some(s), Some(t)) = (&kal, kal_traj.as_mut()) {
            t.push(TrajectoryRow::from_state(s, None, ccr));
        }
        if let (Some(s), Some(t)) = (&modf, mod_traj.as_mut()) {
            let corr = if i == 0 && !model.psi.is_zero() {
                Some(correction_terms(model, &s.belief).map_err(runtime)?)
            } else {
                last_corr.clone()
            };
            t.push(TrajectoryRow::from_state(s, corr.as_ref(), ccr));
        }
        if let (Some(s), Some(t)) = (&grid_state, grid_traj.as_mut()) {
            t.record(s).map_err(runtime)?;
            let mass = s.mass();
            if let Some(c) = conservation.as_mut() {
                c.mass_drift = c.mass_drift.max((mass - 1.0).abs());
            }
            if engine == Engine::Compare {
                let (mu, cov) = extract_moments(s).map_err(runtime)?;
                let k = kal
                    .as_ref()
                    .map(|f| discrepancy(&mu, &cov, &f.belief.mu, &f.belief.sigma));
                let m = modf
                    .as_ref()
                    .map(|f| discrepancy(&mu, &cov, &f.belief.mu, &f.belief.sigma));
                metrics.push(MetricRow {
                    t: s.t,
                    kalman_mean_err: k.map(|x| x.0),
                    kalman_cov_err: k.map(|x| x.1),
                    modified_mean_err: m.map(|x| x.0),
                    modified_cov_err: m.map(|x| x.1),
                    grid_mass: mass,
                });
            }
        }
    }
    if let Some(m) = phys.kalman_min_eig {
        if m < -PSD_TOL {
            log::warn!("Kalman covariance left the physical set: min eig {m:e}");
        }
    }

    let summary = Summary {
        engine,
        steps,
        seed: run.seed,
        conservation,
        physicality: phys,
        worst_kalman_mean_err: worst(&metrics, |r| r.kalman_mean_err),
        worst_kalman_cov_err: worst(&metrics, |r| r.kalman_cov_err),
        worst_modified_mean_err: worst(&metrics, |r| r.modified_mean_err),
        worst_modified_cov_err: worst(&metrics, |r| r.modified_cov_err),
    };
    Ok(RunOutputs {
        path,
        kalman: kal_traj,
        modified: mod_traj,
        grid: grid_traj,
        snapshots,
        metrics,
        summary,
    })
}

/// The resolved scenario followed by the derived matrices.
pub fn manifest(scn: &Scenario) -> Result<String, CliError> {
    let mut cfg = scn.config.resolved(scn);
    let ch = &scn.channel;
    let model = &scn.model;
    let (p, q) = make_pq(ch, &model.n_coupling, model.theta()).map_err(CliError::Validation)?;
    let mut derived = toml::Table::new();
    let mut put = |name: &str, m: &DMatrix<f64>| {
        derived.insert(
            name.into(),
            toml::Value::try_from(to_rows(m)).expect("finite matrix"),
        );
    };
    put("A", model.a());
    put("B", model.b());
    put("F", &ch.f);
    put("K", &ch.k_gain);
    put("E1", &ch.e1);
    put("E2", &ch.e2);
    put("P", &p);
    put("Q", &q);
    put("D_re", &ch.d.map(|z| z.re));
    put("D_im", &ch.d.map(|z| z.im));
    put("FFT", &ch.fft);
    cfg.derived = Some(derived);
    toml::to_string(&cfg).map_err(|e| io_err("serializing manifest", e))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let p = dir.join(name);
    File::create(&p)
        .map(BufWriter::new)
        .map_err(|e| io_err(&format!("creating {}", p.display()), e))
}

pub fn write_outputs(scn: &Scenario, out: &RunOutputs, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(&format!("creating {}", dir.display()), e))?;
    std::fs::write(dir.join("manifest.toml"), manifest(scn)?)
        .map_err(|e| io_err("writing manifest", e))?;
    let lib = |e: phasefilter::Error| CliError::Io(e.to_string());
    out.path
        .write_csv(create(dir, "innovations.csv")?)
        .map_err(lib)?;
    if let Some(t) = &out.kalman {
        t.write_csv(create(dir, "trajectory_kalman.csv")?)
            .map_err(lib)?;
    }
    if let Some(t) = &out.modified {
        t.write_csv(create(dir, "trajectory_modified.csv")?)
            .map_err(lib)?;
    }
    if let Some(t) = &out.grid {
        t.write_csv(create(dir, "moments_grid.csv")?).map_err(lib)?;
    }
    for (k, s) in out.snapshots.iter().enumerate() {
        write_snapshot_csv(s, create(dir, &format!("snapshot_{k:03}.csv"))?).map_err(lib)?;
    }
    if !out.metrics.is_empty() {
        let mut w = create(dir, "metrics.csv")?;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        writeln!(
            w,
            "t,kalman_mean_err,kalman_cov_err,modified_mean_err,modified_cov_err,grid_mass"
        )
        .map_err(|e| io_err("metrics", e))?;
        for r in &out.metrics {
            writeln!(
                w,
                "{:.17e},{},{},{},{},{:.17e}",
                r.t,
                f(r.kalman_mean_err),
                f(r.kalman_cov_err),
                f(r.modified_mean_err),
                f(r.modified_cov_err),
                r.grid_mass
            )
            .map_err(|e| io_err("metrics", e))?;
        }
        w.flush().map_err(|e| io_err("metrics", e))?;
    }
    let summary = serde_json::to_string_pretty(&out.summary).map_err(|e| io_err("summary", e))?;
    std::fs::write(dir.join("summary.json"), summary + "\n")
        .map_err(|e| io_err("writing summary", e))?;
    Ok(())
}
