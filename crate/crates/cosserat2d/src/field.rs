//! Sampled solution fields on uniform rectangular grids, their CSV/JSON
//! serialization, and cross-solver comparison metrics.
//!
//! Both solvers sample their solutions onto the same evaluation grid (same
//! coordinate generator, same point order), so comparison is a pointwise
//! operation. Grids store the raw per-point quantities `(X, u, φ, F, d, ∇d)`;
//! the displacement magnitude and its square are derived columns emitted by
//! the exporter (plot conventions report both).

use crate::material::{self, KinematicState, MaterialParams};
use crate::tensor2::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Tolerance on `|d| = 1` for stored field points.
pub const FIELD_DIRECTOR_TOL: f64 = 1e-10;

/// Coordinate agreement required of two grids entering [`compare`].
pub const GRID_COORD_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse failure at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed field grid: {0}")]
    Format(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Material(#[from] material::MaterialError),
}

/// One evaluation point of a solution field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    /// Reference coordinates (X, Y).
    pub x: Vec2,
    /// Displacement.
    pub u: Vec2,
    /// Director angle (radians).
    pub phi: f64,
    /// Deformation gradient.
    pub f: Mat2,
    /// Director `(cos φ, sin φ)`.
    pub d: Vec2,
    /// Director gradient, entry `(i, A) = ∂d_i/∂X_A`.
    pub gradd: Mat2,
}

impl FieldPoint {
    pub fn state(&self) -> KinematicState {
        KinematicState::new(self.f, self.d, self.gradd)
    }
}

/// Uniform rectangular sampling of a solution over the full domain.
///
/// Point order is row-major with x fastest: `index = iy * nx + ix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    /// Points along X.
    pub nx: usize,
    /// Points along Y.
    pub ny: usize,
    pub points: Vec<FieldPoint>,
}

/// Grid coordinates for an `nx × ny` sampling of `[0, l] × [0, w]`, in field
/// point order. Endpoints land exactly on the domain boundary. Both solvers
/// sample through this one generator so their grids are comparable bitwise.
pub fn uniform_coords(l: f64, w: f64, nx: usize, ny: usize) -> Vec<Vec2> {
    // The far endpoint is pinned to the exact extent: `w·i/(n−1)` can land
    // one ulp off for extents like 0.2, and the boundary must be exact.
    fn coord(extent: f64, i: usize, n: usize) -> f64 {
        if n <= 1 || i == 0 {
            0.0
        } else if i + 1 == n {
            extent
        } else {
            extent * i as f64 / (n - 1) as f64
        }
    }
    let mut coords = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = coord(w, iy, ny);
        for ix in 0..nx {
            coords.push(Vec2::new(coord(l, ix, nx), y));
        }
    }
    coords
}

impl FieldGrid {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Structural validity: point count matches dimensions, directors unit
    /// length within [`FIELD_DIRECTOR_TOL`].
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.points.len() != self.nx * self.ny {
            return Err(FieldError::Format(format!(
                "point count {} does not match {}x{} grid",
                self.points.len(),
                self.nx,
                self.ny
            )));
        }
        for (i, pt) in self.points.iter().enumerate() {
            let err = (pt.d.norm() - 1.0).abs();
            if !(err <= FIELD_DIRECTOR_TOL) {
                return Err(FieldError::Format(format!(
                    "point {i}: director not unit length (|d| - 1 = {err:.3e})"
                )));
            }
        }
        Ok(())
    }

    /// Total stored energy of the sampled field by the trapezoidal rule on
    /// the uniform grid (boundary points weighted ½, corners ¼).
    pub fn trapezoid_energy(&self, p: &MaterialParams) -> Result<f64, FieldError> {
        if self.nx < 2 || self.ny < 2 {
            return Err(FieldError::Format(
                "energy quadrature needs at least a 2x2 grid".into(),
            ));
        }
        let first = self.points[0].x;
        let last = self.points[self.nx * self.ny - 1].x;
        let hx = (last.x - first.x) / (self.nx - 1) as f64;
        let hy = (last.y - first.y) / (self.ny - 1) as f64;
        let mut total = 0.0;
        for iy in 0..self.ny {
            let wy = if iy == 0 || iy == self.ny - 1 { 0.5 } else { 1.0 };
            for ix in 0..self.nx {
                let wx = if ix == 0 || ix == self.nx - 1 { 0.5 } else { 1.0 };
                let pt = &self.points[iy * self.nx + ix];
                let w = material::energy_density(&pt.state(), p)?;
                total += w * wx * wy * hx * hy;
            }
        }
        Ok(total)
    }
}

const CSV_HEADER: &str = "X,Y,u_x,u_y,u_mag,u_mag_sq,phi,F_11,F_12,F_21,F_22,d_x,d_y,gradd_11,gradd_12,gradd_21,gradd_22";

/// Chosen export format for field grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

fn push_f64(out: &mut String, v: f64) {
    // 17 significant digits: enough for exact f64 round-trips.
    let _ = write!(out, "{v:.16e}");
}

/// Serialize a grid to its CSV text form: header row, then one data row per
/// point in point-index order. `u_mag` / `u_mag_sq` are derived columns
/// (|u| and |u|²); they are regenerated from `u` on import.
pub fn fieldgrid_to_csv(grid: &FieldGrid) -> String {
    let mut out = String::with_capacity(64 + grid.points.len() * 420);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for pt in &grid.points {
        let umag_sq = pt.u.norm_sq();
        let values = [
            pt.x.x,
            pt.x.y,
            pt.u.x,
            pt.u.y,
            umag_sq.sqrt(),
            umag_sq,
            pt.phi,
            pt.f.m11,
            pt.f.m12,
            pt.f.m21,
            pt.f.m22,
            pt.d.x,
            pt.d.y,
            pt.gradd.m11,
            pt.gradd.m12,
            pt.gradd.m21,
            pt.gradd.m22,
        ];
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            push_f64(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

/// Parse the CSV form produced by [`fieldgrid_to_csv`]. Grid dimensions are
/// recovered from the row order: the first row whose Y coordinate differs
/// from row 0 ends the first x-sweep.
pub fn fieldgrid_from_csv(text: &str) -> Result<FieldGrid, FieldError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(FieldError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim() != CSV_HEADER {
        return Err(FieldError::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut vals = [0.0f64; 17];
        let mut n = 0;
        for tok in line.split(',') {
            if n >= 17 {
                n += 1;
                break;
            }
            vals[n] = tok.trim().parse().map_err(|e| FieldError::Parse {
                line: idx + 1,
                msg: format!("bad number {tok:?}: {e}"),
            })?;
            n += 1;
        }
        if n != 17 {
            return Err(FieldError::Parse {
                line: idx + 1,
                msg: format!("expected 17 columns, got {n}"),
            });
        }
        points.push(FieldPoint {
            x: Vec2::new(vals[0], vals[1]),
            u: Vec2::new(vals[2], vals[3]),
            // vals[4], vals[5] are the derived |u|, |u|² columns.
            phi: vals[6],
            f: Mat2::new(vals[7], vals[8], vals[9], vals[10]),
            d: Vec2::new(vals[11], vals[12]),
            gradd: Mat2::new(vals[13], vals[14], vals[15], vals[16]),
        });
    }
    let (nx, ny) = infer_dims(&points)?;
    Ok(FieldGrid { nx, ny, points })
}

fn infer_dims(points: &[FieldPoint]) -> Result<(usize, usize), FieldError> {
    if points.is_empty() {
        return Ok((0, 0));
    }
    let y0 = points[0].x.y;
    let nx = points
        .iter()
        .position(|p| p.x.y != y0)
        .unwrap_or(points.len());
    if points.len() % nx != 0 {
        return Err(FieldError::Format(format!(
            "row count {} is not a multiple of inferred nx = {nx}",
            points.len()
        )));
    }
    Ok((nx, points.len() / nx))
}

/// Write a grid to `path` in the requested format.
pub fn export_fieldgrid(
    grid: &FieldGrid,
    format: ExportFormat,
    path: &Path,
) -> Result<(), FieldError> {
    let text = match format {
        ExportFormat::Csv => fieldgrid_to_csv(grid),
        ExportFormat::Json => {
            serde_json::to_string_pretty(grid).expect("field grid serialization cannot fail")
        }
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a grid previously written by [`export_fieldgrid`]; the format is
/// chosen by file extension (`.json` ⇒ JSON, anything else ⇒ CSV).
pub fn import_fieldgrid(path: &Path) -> Result<FieldGrid, FieldError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| FieldError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    } else {
        fieldgrid_from_csv(&text)
    }
}

/// Relative L2 and max-absolute error of one scalar field.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FieldErrorStats {
    /// `‖a − b‖₂ / max(‖b‖₂, 1e-12)` with b the reference samples.
    pub rel_l2: f64,
    pub max_abs: f64,
}

/// Pointwise difference grids, NN minus reference, in field point order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DifferenceGrids {
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    pub u_mag: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Cross-solver agreement metrics on the common evaluation grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub nx: usize,
    pub ny: usize,
    pub u_x: FieldErrorStats,
    pub u_y: FieldErrorStats,
    pub u_mag: FieldErrorStats,
    pub phi: FieldErrorStats,
    /// Stored energy of the NN solution. [`compare`] fills this with the
    /// trapezoid-rule integral over the shared grid; the batch runner
    /// replaces it with the solver's own converged objective, whose
    /// discretization error is far below the grid quadrature's.
    pub energy_nn: f64,
    /// Stored energy of the reference solution; same convention as
    /// `energy_nn`.
    pub energy_ref: f64,
    pub diffs: DifferenceGrids,
}

fn error_stats(a: &[f64], b: &[f64]) -> FieldErrorStats {
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        diff_sq += (x - y) * (x - y);
        ref_sq += y * y;
        max_abs = max_abs.max((x - y).abs());
    }
    FieldErrorStats {
        rel_l2: diff_sq.sqrt() / ref_sq.sqrt().max(1e-12),
        max_abs,
    }
}

/// Compare an NN solution against the reference solution on their shared
/// evaluation grid. Differences are NN minus reference; φ differences are
/// raw angle differences (the computed directors stay far from wrap-around).
pub fn compare(
    nn: &FieldGrid,
    reference: &FieldGrid,
    p: &MaterialParams,
) -> Result<ComparisonReport, FieldError> {
    if nn.nx != reference.nx || nn.ny != reference.ny {
        return Err(FieldError::GridMismatch(format!(
            "{}x{} vs {}x{}",
            nn.nx, nn.ny, reference.nx, reference.ny
        )));
    }
    for (i, (a, b)) in nn.points.iter().zip(&reference.points).enumerate() {
        let dx = (a.x - b.x).norm();
        if dx > GRID_COORD_TOL {
            return Err(FieldError::GridMismatch(format!(
                "coordinates differ by {dx:.3e} at point {i}"
            )));
        }
    }
    let col = |g: &FieldGrid, f: fn(&FieldPoint) -> f64| -> Vec<f64> {
        g.points.iter().map(f).collect()
    };
    let fields: [(fn(&FieldPoint) -> f64,); 4] = [
        (|p| p.u.x,),
        (|p| p.u.y,),
        (|p| p.u.norm(),),
        (|p| p.phi,),
    ];
    let mut stats = Vec::with_capacity(4);
    let mut diffs = Vec::with_capacity(4);
    for (getter,) in fields {
        let a = col(nn, getter);
        let b = col(reference, getter);
        stats.push(error_stats(&a, &b));
        diffs.push(a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
    }
    let [du_x, du_y, du_mag, dphi] = <[Vec<f64>; 4]>::try_from(diffs).unwrap();
    Ok(ComparisonReport {
        nx: nn.nx,
        ny: nn.ny,
        u_x: stats[0],
        u_y: stats[1],
        u_mag: stats[2],
        phi: stats[3],
        energy_nn: nn.trapezoid_energy(p)?,
        energy_ref: reference.trapezoid_energy(p)?,
        diffs: DifferenceGrids {
            u_x: du_x,
            u_y: du_y,
            u_mag: du_mag,
            phi: dphi,
        },
    })
}
