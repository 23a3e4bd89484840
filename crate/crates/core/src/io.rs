//! Config loading and run artifacts: metadata, history CSV, field snapshots
//! and network checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::net::Mlp;
use crate::train::{train_with, HistoryRecord, Objective, TrainConfig};

pub const HISTORY_HEADER: &str = "iteration,loss,sqrt_loss,h1_error,wall_time_s";
pub const METADATA_FILE: &str = "metadata.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Parse and validate a JSON config. Missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let config: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        what: "config",
        detail: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    let path = path.as_ref();
    parse_config(&read(path)?).map_err(|e| match e {
        Error::Parse { what, detail } => Error::Parse {
            what,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

pub fn format_history(records: &[HistoryRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        let h1 = r.h1_error.map(|e| format!("{e:e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:e},{:e},{},{:e}",
            r.iteration, r.loss, r.sqrt_loss, h1, r.wall_time
        )
        .unwrap();
    }
    out
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryRecord>> {
    let bad = |line: usize, detail: String| Error::Parse {
        what: "history",
        detail: format!("line {line}: {detail}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HISTORY_HEADER => {}
        other => return Err(bad(1, format!("unexpected header {other:?}"))),
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(
                line_no,
                format!("expected 5 columns, found {}", cols.len()),
            ));
        }
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| bad(line_no, format!("{s:?}: {e}")))
        };
        records.push(HistoryRecord {
            iteration: cols[0]
                .parse()
                .map_err(|e| bad(line_no, format!("{:?}: {e}", cols[0])))?,
            loss: float(cols[1])?,
            sqrt_loss: float(cols[2])?,
            h1_error: if cols[3].is_empty() {
                None
            } else {
                Some(float(cols[3])?)
            },
            wall_time: float(cols[4])?,
        });
    }
    Ok(records)
}

pub fn export_history(records: &[HistoryRecord], path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &format_history(records))
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<HistoryRecord>> {
    parse_history(&read(path.as_ref())?)
}

pub fn snapshot_name(k: usize) -> String {
    format!("snapshot_k{k:04}")
}

/// `x,y,u` table of one time level, `x` varying fastest.
pub fn format_snapshot_csv(field: &GridField, k: usize) -> Result<String> {
    let g = field.grid();
    g.linear_index(0, 0, k)?;
    let mut out = String::from("x,y,u\n");
    for j in 0..=g.ny() {
        for i in 0..=g.nx() {
            let [x, y, _] = g.point(i, j, k);
            writeln!(out, "{x:e},{y:e},{:e}", field.get(i, j, k)).unwrap();
        }
    }
    Ok(out)
}

/// Legacy VTK structured-points file of one time level.
pub fn format_snapshot_vtk(field: &GridField, k: usize) -> Result<String> {
    let g = field.grid();
    g.linear_index(0, 0, k)?;
    let [_, _, t] = g.point(0, 0, k);
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "u at t = {t:e} (k = {k})").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET STRUCTURED_POINTS").unwrap();
    writeln!(out, "DIMENSIONS {} {} 1", g.nx() + 1, g.ny() + 1).unwrap();
    writeln!(out, "ORIGIN 0 0 0").unwrap();
    writeln!(out, "SPACING {:e} {:e} 1", g.hx(), g.hy()).unwrap();
    writeln!(out, "POINT_DATA {}", (g.nx() + 1) * (g.ny() + 1)).unwrap();
    writeln!(out, "SCALARS u double 1").unwrap();
    writeln!(out, "LOOKUP_TABLE default").unwrap();
    for j in 0..=g.ny() {
        for i in 0..=g.nx() {
            writeln!(out, "{:e}", field.get(i, j, k)).unwrap();
        }
    }
    Ok(out)
}

/// Write one CSV (and optionally one VTK file) per requested time index into
/// `dir`. Returns the CSV paths.
pub fn export_snapshots(
    field: &GridField,
    indices: &[usize],
    dir: impl AsRef<Path>,
    vtk: bool,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let g = field.grid();
    if let Some(&k) = indices.iter().find(|&&k| k > g.nt()) {
        return Err(Error::IndexOutOfRange {
            i: 0,
            j: 0,
            k,
            nx: g.nx(),
            ny: g.ny(),
            nt: g.nt(),
        });
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(indices.len());
    for &k in indices {
        let csv = dir.join(format!("{}.csv", snapshot_name(k)));
        write(&csv, &format_snapshot_csv(field, k)?)?;
        if vtk {
            let path = dir.join(format!("{}.vtk", snapshot_name(k)));
            write(&path, &format_snapshot_vtk(field, k)?)?;
        }
        written.push(csv);
    }
    Ok(written)
}

/// Header line with the architecture, then one parameter per line.
pub fn format_checkpoint(mlp: &Mlp) -> String {
    let sizes: Vec<String> = mlp.layer_sizes().iter().map(|s| s.to_string()).collect();
    let mut out = format!(
        "layer_sizes={} seed={} time_scale={:e}\n",
        sizes.join(","),
        mlp.seed(),
        mlp.time_scale()
    );
    for p in mlp.flatten() {
        writeln!(out, "{p:e}").unwrap();
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<Mlp> {
    let bad = |detail: String| Error::Parse {
        what: "checkpoint",
        detail,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let (mut sizes, mut seed, mut scale) = (None, None, None);
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("header field {field:?}")))?;
        match key {
            "layer_sizes" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    value.split(',').map(str::parse).collect();
                sizes = Some(parsed.map_err(|e| bad(format!("layer_sizes: {e}")))?);
            }
            "seed" => {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|e| bad(format!("seed: {e}")))?,
                )
            }
            "time_scale" => {
                scale = Some(
                    value
                        .parse::<f64>()
                        .map_err(|e| bad(format!("time_scale: {e}")))?,
                )
            }
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    let (Some(sizes), Some(seed), Some(scale)) = (sizes, seed, scale) else {
        return Err(bad("header needs layer_sizes, seed and time_scale".into()));
    };
    let params = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("parameter {n}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut mlp = Mlp::new(&sizes, seed)?.with_time_scale(scale);
    if params.len() != mlp.num_params() {
        return Err(bad(format!(
            "expected {} parameters, found {}",
            mlp.num_params(),
            params.len()
        )));
    }
    mlp.assign(&params)?;
    Ok(mlp)
}

pub fn save_checkpoint(mlp: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &format_checkpoint(mlp))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Mlp> {
    parse_checkpoint(&read(path.as_ref())?)
}

/// Output directory of one run. Metadata is written on creation.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    dir: PathBuf,
    metadata: serde_json::Value,
}

impl RunArtifacts {
    /// Fails with [`Error::OutputExists`] when `dir` already holds a run and
    /// `overwrite` is off.
    pub fn create(dir: impl AsRef<Path>, config: &TrainConfig, overwrite: bool) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        if dir.join(METADATA_FILE).exists() || dir.join(HISTORY_FILE).exists() {
            if !overwrite {
                return Err(Error::OutputExists(dir));
            }
            for file in [METADATA_FILE, HISTORY_FILE, CHECKPOINT_FILE] {
                let p = dir.join(file);
                if p.exists() {
                    fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                }
            }
            let snaps = dir.join(SNAPSHOT_DIR);
            if snaps.is_dir() {
                fs::remove_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
            }
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let metadata = json!({
            "config": config,
            "version": env!("CARGO_PKG_VERSION"),
            "status": "running",
            "initialization": {
                "weights": "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))",
                "biases": "zero",
                "rng": "ChaCha8",
                "seed": config.seed,
            },
            "optimizer": {
                "name": "adam",
                "learning_rate": config.learning_rate,
                "beta1": config.beta1,
                "beta2": config.beta2,
                "eps": config.eps,
            },
            "wall_time_s": null,
        });
        let artifacts = Self { dir, metadata };
        artifacts.write_metadata()?;
        Ok(artifacts)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn metadata(&self) -> &serde_json::Value {
        &self.metadata
    }

    pub fn history_path(&self) -> PathBuf {
        self.dir.join(HISTORY_FILE)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }

    pub fn snapshot_dir(&self) -> PathBuf {
        self.dir.join(SNAPSHOT_DIR)
    }

    fn write_metadata(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        write(&self.dir.join(METADATA_FILE), &text)
    }

    /// Record the outcome and rewrite the metadata file.
    pub fn finish(&mut self, status: &str, wall_time: f64, final_loss: Option<f64>) -> Result<()> {
        self.metadata["status"] = json!(status);
        self.metadata["wall_time_s"] = json!(wall_time);
        self.metadata["final_loss"] = json!(final_loss);
        self.write_metadata()
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub history: Vec<HistoryRecord>,
    pub snapshots: Vec<PathBuf>,
}

/// Train per `config` and write every artifact into `config.output_dir`.
///
/// An aborted run still leaves its partial history and metadata behind.
pub fn run_training(
    config: &TrainConfig,
    mut progress: impl FnMut(&HistoryRecord),
) -> Result<RunReport> {
    config.validate()?;
    let mut artifacts = RunArtifacts::create(&config.output_dir, config, config.overwrite)?;
    let mut seen = Vec::new();
    let result = train_with(config, |r| {
        progress(r);
        seen.push(r.clone());
    });
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(e) => {
            export_history(&seen, artifacts.history_path())?;
            let t = seen.last().map_or(0.0, |r| r.wall_time);
            artifacts.finish("aborted", t, seen.last().map(|r| r.loss))?;
            return Err(e);
        }
    };
    export_history(&outcome.history, artifacts.history_path())?;
    save_checkpoint(&outcome.mlp, artifacts.checkpoint_path())?;
    let snapshots = export_snapshots(
        &outcome.solution,
        &config.resolved_snapshot_indices(),
        artifacts.snapshot_dir(),
        true,
    )?;
    let last = outcome.history.last();
    artifacts.finish(
        "complete",
        last.map_or(0.0, |r| r.wall_time),
        last.map(|r| r.loss),
    )?;
    Ok(RunReport {
        dir: artifacts.dir().to_path_buf(),
        history: outcome.history,
        snapshots,
    })
}

/// Snapshots of a saved network on the lattice of `config`.
pub fn export_from_checkpoint(
    mlp: &Mlp,
    config: &TrainConfig,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let grid = config.grid()?;
    let objective = Objective::new(config.mode, &config.problem()?, &grid, config.cg_tol)?;
    let field = objective.solution_field(mlp);
    export_snapshots(&field, &config.resolved_snapshot_indices(), dir, true)
}
