//! Solver configs and grid output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridFunction};
use super::scheme::{solve_dirichlet, SchemeOp, SolveOptions, SolveReport};
use crate::catalog::BoxDomain;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::par::Exec;

/// A Dirichlet problem `F_h[u] = ψ` in the box, `u = g` on the boundary layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Operator key, e.g. `P`, `branch:k=2`, `pucci:1,2`, `sl`.
    pub operator: String,
    /// Constant right-hand side. Mutually exclusive with `psi`.
    #[serde(default)]
    pub level: Option<f64>,
    /// Right-hand side as an expression in `x1..xn`.
    #[serde(default)]
    pub psi: Option<Expr>,
    pub domain: BoxDomain,
    pub h: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Boundary data `g`.
    pub boundary: Expr,
    /// Exact solution, when known; the report then includes the max-node error.
    #[serde(default)]
    pub exact: Option<Expr>,
    #[serde(default = "default_nested")]
    pub nested: bool,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iter() -> usize {
    100_000
}

fn default_nested() -> bool {
    true
}

impl SolverConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn scheme(&self) -> Result<SchemeOp> {
        self.operator.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.domain.dim();
        self.scheme()?.check(n)?;
        if self.level.is_some() && self.psi.is_some() {
            return Err(Error::Parse("give either `level` or `psi`, not both".into()));
        }
        self.boundary.check_dim(n)?;
        if let Some(p) = &self.psi {
            p.check_dim(n)?;
        }
        if let Some(e) = &self.exact {
            e.check_dim(n)?;
        }
        Grid::new(&self.domain, self.h)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridHeader {
    pub seed: u64,
    pub operator: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    pub dims: Vec<usize>,
    pub stencil: Vec<Vec<i64>>,
    pub boundary: String,
    pub rhs: String,
    pub iterations: usize,
    pub coarse_iterations: usize,
    pub dt: f64,
    pub residual: f64,
    pub max_error: Option<f64>,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: GridFunction,
    pub report: SolveReport,
    pub header: GridHeader,
}

/// Solves the configured problem. `seed` is recorded in the header only; the
/// solve itself is deterministic.
pub fn run_config(cfg: &SolverConfig, seed: u64, exec: Exec) -> Result<SolveOutcome> {
    cfg.validate()?;
    let op = cfg.scheme()?;
    let grid = Grid::new(&cfg.domain, cfg.h)?;
    let level = cfg.level.unwrap_or(0.0);
    let psi = |x: &[f64]| cfg.psi.as_ref().map_or(level, |p| p.eval(x));
    let g = |x: &[f64]| cfg.boundary.eval(x);
    let opts = SolveOptions { dt: cfg.dt, tol: cfg.tol, max_iter: cfg.max_iter, nested: cfg.nested, exec };
    let (solution, report) = solve_dirichlet(&op, &psi, &g, &grid, &opts)?;
    let max_error = cfg.exact.as_ref().map(|e| {
        (0..grid.len()).map(|i| (solution.value(i) - e.eval(&grid.coords(i))).abs()).fold(0.0, f64::max)
    });
    let header = GridHeader {
        seed,
        operator: op.to_string(),
        lo: grid.lo().to_vec(),
        hi: grid.hi().to_vec(),
        h: grid.h(),
        dims: grid.dims().to_vec(),
        stencil: grid.dirs().to_vec(),
        boundary: cfg.boundary.to_string(),
        rhs: cfg.psi.as_ref().map_or_else(|| level.to_string(), |p| p.to_string()),
        iterations: report.iterations,
        coarse_iterations: report.coarse_iterations,
        dt: report.dt,
        residual: report.residual,
        max_error,
        history: report.history.clone(),
    };
    Ok(SolveOutcome { solution, report, header })
}

/// Writes one row `x1, …, xn, value` per node.
pub fn write_grid_csv(u: &GridFunction, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let grid = u.grid();
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut head: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
    head.push("value".into());
    w.write_record(&head).map_err(io)?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid.coords(i).iter().map(|c| c.to_string()).collect();
        row.push(u.value(i).to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Writes `solution.csv` and `solution.json` into `dir` and returns both paths.
pub fn write_outcome(out: &SolveOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
    let csv_path = dir.join("solution.csv");
    let json_path = dir.join("solution.json");
    write_grid_csv(&out.solution, &csv_path)?;
    let text = serde_json::to_string_pretty(&out.header).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&json_path, text).map_err(|e| Error::Parse(format!("{}: {e}", json_path.display())))?;
    Ok((csv_path, json_path))
}
