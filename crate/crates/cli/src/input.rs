//! Parsing of command-line values.

use subeq::par::Exec;
use subeq::{Error, Jet2, Result, SymMat};

/// Inline text, or the contents of the file after a leading `@`.
pub fn text_arg(s: &str) -> Result<String> {
    match s.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}"))),
        None => Ok(s.to_string()),
    }
}

/// JSON rows `[[..],..]` or `diag(a, b, ...)`.
pub fn matrix(s: &str) -> Result<SymMat> {
    let s = text_arg(s)?;
    let t = s.trim();
    if let Some(body) = t.strip_prefix("diag(").and_then(|b| b.strip_suffix(')')) {
        let d = body
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad diagonal entry '{}'", x.trim()))))
            .collect::<Result<Vec<f64>>>()?;
        return SymMat::from_rows(&diag_rows(&d));
    }
    let rows: Vec<Vec<f64>> = serde_json::from_str(t).map_err(|e| Error::Parse(format!("matrix: {e}")))?;
    SymMat::from_rows(&rows)
}

fn diag_rows(d: &[f64]) -> Vec<Vec<f64>> {
    (0..d.len()).map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect()
}

pub fn jet(s: &str) -> Result<Jet2> {
    serde_json::from_str(&text_arg(s)?).map_err(|e| Error::Parse(format!("jet: {e}")))
}

pub fn jet_or_matrix(matrix_arg: Option<&str>, jet_arg: Option<&str>) -> Result<Jet2> {
    match (matrix_arg, jet_arg) {
        (Some(m), None) => Ok(Jet2::pure(matrix(m)?)),
        (None, Some(j)) => jet(j),
        _ => Err(Error::Parse("give exactly one of --matrix and --jet".into())),
    }
}

pub fn points(s: &str) -> Result<Vec<Vec<f64>>> {
    serde_json::from_str(&text_arg(s)?).map_err(|e| Error::Parse(format!("points: {e}")))
}

/// `--threads 1` selects the sequential path; other counts size the pool.
pub fn exec(threads: Option<usize>) -> Result<Exec> {
    match threads {
        None => Ok(Exec::Parallel),
        Some(0) => Err(Error::Parse("--threads must be at least 1".into())),
        Some(1) => Ok(Exec::Sequential),
        Some(t) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Error::Precondition(e.to_string()))?;
            Ok(Exec::Parallel)
        }
    }
}
