//! Adam training over either loss, with loss/error history.

pub mod adam;
pub mod monitor;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm_grad_h, Grid, GridField};
use crate::loss::{CrvpinnObjective, PinnSystem, ResidualSystem, Sampler};
use crate::net::{Mlp, ParamGrads};
use crate::problem::Problem;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use monitor::{robustness_monitor, RobustnessReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    Pinn,
    Crvpinn,
}

impl LossMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossMode::Pinn => "pinn",
            LossMode::Crvpinn => "crvpinn",
        }
    }
}

/// Everything a run needs. Field names are the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: LossMode,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub scenario: String,
    /// Diffusion coefficient used for both axes.
    pub diffusion: f64,
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub log_every: usize,
    pub cg_tol: f64,
    /// Time indices to export; `None` means 12 evenly spaced levels.
    pub snapshot_indices: Option<Vec<usize>>,
    pub output_dir: PathBuf,
    pub overwrite: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: LossMode::Crvpinn,
            nx: 32,
            ny: 32,
            nt: 32,
            t_final: 1.0,
            scenario: "snowmobile".into(),
            diffusion: 0.1,
            layer_sizes: vec![3, 64, 64, 64, 1],
            seed: 0,
            iterations: 5000,
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            log_every: 10,
            cg_tol: 1e-10,
            snapshot_indices: None,
            output_dir: PathBuf::from("runs/latest"),
            overwrite: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.nx == 0 || self.ny == 0 || self.nt == 0 {
            return bad(format!(
                "nx, ny, nt must be at least 1 (got {}, {}, {})",
                self.nx, self.ny, self.nt
            ));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return bad(format!(
                "diffusion must be positive, got {}",
                self.diffusion
            ));
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!(
                "beta1 and beta2 must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.log_every < 1 {
            return bad("log_every must be at least 1".into());
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return bad(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol));
        }
        if let Some(idx) = &self.snapshot_indices {
            if let Some(&k) = idx.iter().find(|&&k| k > self.nt) {
                return bad(format!("snapshot index {k} exceeds nt = {}", self.nt));
            }
        }
        Mlp::new(&self.layer_sizes, self.seed)?;
        Problem::from_scenario(&self.scenario, self.diffusion, self.t_final)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.nt, self.t_final)
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::from_scenario(&self.scenario, self.diffusion, self.t_final)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn init_network(&self) -> Result<Mlp> {
        Ok(Mlp::new(&self.layer_sizes, self.seed)?.with_final_time(self.t_final))
    }

    /// Requested snapshot levels, or 12 evenly spaced ones.
    pub fn resolved_snapshot_indices(&self) -> Vec<usize> {
        match &self.snapshot_indices {
            Some(idx) => idx.clone(),
            None => default_snapshot_indices(self.nt),
        }
    }
}

/// Twelve evenly spaced time levels from 0 to `nt` (fewer when `nt < 11`).
pub fn default_snapshot_indices(nt: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..12)
        .map(|m| ((m * nt) as f64 / 11.0).round() as usize)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub loss: f64,
    pub sqrt_loss: f64,
    /// Discrete H¹ error against the exact field, when one exists.
    pub h1_error: Option<f64>,
    /// Seconds since training started.
    pub wall_time: f64,
}

/// Discrete H¹ seminorm of `u − exact` on the lattice of `u`.
pub fn h1_error(u: &GridField, exact: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let e = u.grid().sample(exact);
    norm_grad_h(&u.zip_with(&e, |a, b| a - b).unwrap())
}

/// The two loss modes behind one interface.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Objective {
    Pinn { system: PinnSystem, grid: Grid },
    Crvpinn(CrvpinnObjective),
}

impl Objective {
    /// PINN mode compares against the raw data; the robust mode always runs
    /// on the shifted problem (a no-op when `u₀ ≡ 0`).
    pub fn new(mode: LossMode, problem: &Problem, grid: &Grid, cg_tol: f64) -> Result<Self> {
        Ok(match mode {
            LossMode::Pinn => Objective::Pinn {
                system: PinnSystem::new(problem, grid, &Sampler::Lattice)?,
                grid: *grid,
            },
            LossMode::Crvpinn => Objective::Crvpinn(CrvpinnObjective::new(
                ResidualSystem::new(grid, problem, true),
                cg_tol,
            )),
        })
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Objective::Pinn { grid, .. } => grid,
            Objective::Crvpinn(obj) => obj.system().grid(),
        }
    }

    pub fn loss_and_grad(&mut self, mlp: &Mlp) -> Result<(f64, ParamGrads)> {
        match self {
            Objective::Pinn { system, .. } => {
                let (eval, grads) = system.loss_and_grad(mlp)?;
                Ok((eval.loss, grads))
            }
            Objective::Crvpinn(obj) => {
                let (eval, grads) = obj.evaluate_with_grad(mlp)?;
                Ok((eval.loss, grads))
            }
        }
    }

    pub fn loss(&mut self, mlp: &Mlp) -> Result<f64> {
        match self {
            Objective::Pinn { system, .. } => Ok(system.loss(mlp)?.loss),
            Objective::Crvpinn(obj) => Ok(obj.evaluate(mlp)?.loss),
        }
    }

    /// Physical solution on the lattice: network values plus the shift.
    pub fn solution_field(&self, mlp: &Mlp) -> GridField {
        let grid = self.grid();
        let u = GridField::from_values(grid, mlp.forward(&grid.points())).unwrap();
        match self {
            Objective::Pinn { .. } => u,
            Objective::Crvpinn(obj) => {
                let off = obj.system().solution_offset();
                u.zip_with(&off, |a, b| a + b).unwrap()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub mlp: Mlp,
    pub history: Vec<HistoryRecord>,
    /// Physical solution of the final network on the lattice.
    pub solution: GridField,
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(config, |_| {})
}

/// Run the configured optimization, calling `on_record` for every logged record.
///
/// Records are taken before the first update, every `log_every` updates, and
/// after the last one.
pub fn train_with(
    config: &TrainConfig,
    mut on_record: impl FnMut(&HistoryRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let grid = config.grid()?;
    let problem = config.problem()?;
    let mut mlp = config.init_network()?;
    let mut objective = Objective::new(config.mode, &problem, &grid, config.cg_tol)?;
    let adam = config.adam();
    let mut state = AdamState::new(mlp.num_params());
    let mut params = mlp.flatten();
    let start = Instant::now();
    let mut history = Vec::new();

    let abort = |iteration: usize, source: Error| Error::TrainingAborted {
        iteration,
        source: Box::new(source),
    };

    for it in 0..=config.iterations {
        let last = it == config.iterations;
        let (loss, grads) = if last {
            (objective.loss(&mlp).map_err(|e| abort(it, e))?, None)
        } else {
            let (l, g) = objective.loss_and_grad(&mlp).map_err(|e| abort(it, e))?;
            (l, Some(g))
        };
        if !loss.is_finite() {
            return Err(abort(it, Error::NonFinite(loss)));
        }
        if it % config.log_every == 0 || last {
            let h1 = problem.exact().map(|exact| {
                let u = objective.solution_field(&mlp);
                h1_error(&u, |x, y, t| exact(x, y, t).value)
            });
            let record = HistoryRecord {
                iteration: it,
                loss,
                // Roundoff can leave a tiny negative quadratic form.
                sqrt_loss: loss.max(0.0).sqrt(),
                h1_error: h1,
                wall_time: start.elapsed().as_secs_f64(),
            };
            on_record(&record);
            history.push(record);
        }
        if let Some(g) = grads {
            adam_step(&mut params, &g.flatten(), &mut state, &adam);
            mlp.assign(&params)?;
        }
    }
    let solution = objective.solution_field(&mlp);
    Ok(TrainOutcome {
        mlp,
        history,
        solution,
    })
}
