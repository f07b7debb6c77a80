//! Grid data for plotting two-dimensional instances.
//!
//! Three CSV files are written: `objective.csv` (`x,y,value`), `feasible.csv`
//! (`x,y,feasible` with 0/1 entries) and `points.csv` (`label,x,y`) holding solutions to
//! overlay on the plot.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qc2qp::model::{evaluate_q, Qc2qpInstance};
use qc2qp::recovery::{GapVerdict, OracleResult, VerdictKind, DEGENERATE_T_TOL};

/// Constraint slack, relative to `1 + data scale`, tolerated by the feasibility mask.
pub const MASK_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ContourError {
    #[error("contour output needs n = 2, got n = {0}")]
    Dimension(usize),
    #[error("invalid contour argument: {0}")]
    InvalidArgument(String),
    #[error("cannot write {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl ContourBox {
    pub fn validate(&self) -> Result<(), ContourError> {
        for (name, (lo, hi)) in [("x", self.x), ("y", self.y)] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ContourError::InvalidArgument(format!(
                    "{name} interval [{lo}, {hi}] must be finite with min < max"
                )));
            }
        }
        Ok(())
    }

    pub fn intervals(&self) -> [(f64, f64); 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayPoint {
    pub label: String,
    pub z: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourFiles {
    pub objective: PathBuf,
    pub feasible: PathBuf,
    pub points: PathBuf,
}

pub fn is_feasible(inst: &Qc2qpInstance, z: &[f64]) -> bool {
    let tol = MASK_TOL * (1.0 + inst.data_scale());
    [1, 2].iter().all(|&i| evaluate_q(inst, i, z).is_ok_and(|v| v <= tol))
}

/// Recovered solution for no-gap verdicts; the normalized decomposition vectors `z/t`
/// for gap verdicts; the oracle optimum when given.
pub fn overlay_points(verdict: Option<&GapVerdict>, oracle: Option<&OracleResult>) -> Vec<OverlayPoint> {
    let mut out = Vec::new();
    match verdict.map(|v| &v.kind) {
        Some(VerdictKind::NoGap(rec)) if rec.z.len() == 2 => out.push(OverlayPoint {
            label: "recovered".into(),
            z: [rec.z[0], rec.z[1]],
        }),
        Some(VerdictKind::Gap(report)) => {
            if let Some(d) = &report.decomposition {
                for (k, x) in d.vectors.iter().enumerate() {
                    if x.len() == 3 && x[0].abs() > DEGENERATE_T_TOL {
                        out.push(OverlayPoint {
                            label: format!("z_hat_{}", k + 1),
                            z: [x[1] / x[0], x[2] / x[0]],
                        });
                    }
                }
            }
        }
        _ => {}
    }
    if let Some(o) = oracle {
        out.push(OverlayPoint {
            label: "oracle".into(),
            z: [o.z[0], o.z[1]],
        });
    }
    out
}

fn create(path: PathBuf) -> Result<(BufWriter<File>, PathBuf), ContourError> {
    match File::create(&path) {
        Ok(f) => Ok((BufWriter::new(f), path)),
        Err(source) => Err(ContourError::Io { path, source }),
    }
}

/// Writes the three CSV files into `out_dir`, sampling `grid × grid` points.
pub fn write_contour(
    inst: &Qc2qpInstance,
    bx: &ContourBox,
    grid: usize,
    out_dir: &Path,
    points: &[OverlayPoint],
) -> Result<ContourFiles, ContourError> {
    if inst.n != 2 {
        return Err(ContourError::Dimension(inst.n));
    }
    bx.validate()?;
    if grid < 2 {
        return Err(ContourError::InvalidArgument("grid needs at least 2 points per side".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ContourError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let (mut obj, obj_path) = create(out_dir.join("objective.csv"))?;
    let (mut feas, feas_path) = create(out_dir.join("feasible.csv"))?;
    let (mut pts, pts_path) = create(out_dir.join("points.csv"))?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ContourError::Io { path, source }
    };

    writeln!(obj, "x,y,value").map_err(io(&obj_path))?;
    writeln!(feas, "x,y,feasible").map_err(io(&feas_path))?;
    let step = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (grid - 1) as f64;
    for i in 0..grid {
        let x = step(bx.x, i);
        for j in 0..grid {
            let y = step(bx.y, j);
            let z = [x, y];
            let value = inst.objective.eval(&z);
            writeln!(obj, "{x},{y},{value}").map_err(io(&obj_path))?;
            writeln!(feas, "{x},{y},{}", u8::from(is_feasible(inst, &z))).map_err(io(&feas_path))?;
        }
    }
    writeln!(pts, "label,x,y").map_err(io(&pts_path))?;
    for p in points {
        writeln!(pts, "{},{},{}", p.label, p.z[0], p.z[1]).map_err(io(&pts_path))?;
    }
    obj.flush().map_err(io(&obj_path))?;
    feas.flush().map_err(io(&feas_path))?;
    pts.flush().map_err(io(&pts_path))?;
    Ok(ContourFiles {
        objective: obj_path,
        feasible: feas_path,
        points: pts_path,
    })
}
