//! Comparison of CSV artifacts against stored goldens.

use std::path::Path;

use crate::error::CliError;

fn read_records(text: &str, what: &str) -> Result<(csv::StringRecord, Vec<csv::StringRecord>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| CliError::Golden(format!("{what}: {e}")))?
        .clone();
    let rows = rdr
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Golden(format!("{what}: {e}")))?;
    Ok((header, rows))
}

fn cell_matches(a: &str, g: &str, rel_tol: f64) -> bool {
    match (a.parse::<f64>(), g.parse::<f64>()) {
        (Ok(x), Ok(y)) => {
            if x.is_nan() || y.is_nan() {
                false
            } else if x == y {
                true
            } else {
                (x - y).abs() <= rel_tol * x.abs().max(y.abs())
            }
        }
        _ => a == g,
    }
}

/// Elementwise relative comparison. Numeric cells must agree to `rel_tol`
/// (NaN never does), other cells exactly. Differing headers are an error;
/// differing shapes are a mismatch. Ragged files (the height field) are
/// compared row by row.
pub fn compare_golden(artifact: &str, golden: &str, rel_tol: f64) -> Result<bool, CliError> {
    let (ha, ra) = read_records(artifact, "artifact")?;
    let (hg, rg) = read_records(golden, "golden")?;
    if ha != hg {
        return Err(CliError::Golden(format!(
            "header mismatch: {:?} vs {:?}",
            ha.iter().collect::<Vec<_>>(),
            hg.iter().collect::<Vec<_>>()
        )));
    }
    if ra.len() != rg.len() {
        return Ok(false);
    }
    Ok(ra.iter().zip(&rg).all(|(a, g)| {
        a.len() == g.len() && a.iter().zip(g.iter()).all(|(x, y)| cell_matches(x, y, rel_tol))
    }))
}

/// Compares every CSV in `golden_dir` with the same-named file in `out_dir`;
/// returns the names that differ or are missing.
pub fn check_golden_dir(out_dir: &Path, golden_dir: &Path, rel_tol: f64) -> Result<Vec<String>, CliError> {
    let mut names: Vec<String> = std::fs::read_dir(golden_dir)
        .map_err(|e| CliError::io(golden_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Golden(format!("no csv files in {}", golden_dir.display())));
    }
    let mut bad = Vec::new();
    for name in names {
        let g = std::fs::read_to_string(golden_dir.join(&name)).map_err(|e| CliError::io(golden_dir.join(&name), e))?;
        let Ok(a) = std::fs::read_to_string(out_dir.join(&name)) else {
            bad.push(name);
            continue;
        };
        match compare_golden(&a, &g, rel_tol) {
            Ok(true) => {}
            Ok(false) | Err(_) => bad.push(name),
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: &str = "tau,ham\n-1,8\n-0.5,7.999999999\n";

    #[test]
    fn identical_files_match() {
        assert!(compare_golden(T, T, 1e-10).unwrap());
    }

    #[test]
    fn perturbed_cell_fails() {
        let rel = 1e-10;
        let bumped = format!("tau,ham\n-1,{}\n-0.5,7.999999999\n", 8.0 * (1.0 + 10.0 * rel));
        assert!(!compare_golden(&bumped, T, rel).unwrap());
        let tiny = format!("tau,ham\n-1,{}\n-0.5,7.999999999\n", 8.0 * (1.0 + 0.1 * rel));
        assert!(compare_golden(&tiny, T, rel).unwrap());
    }

    #[test]
    fn nan_and_shape() {
        let nan = "tau,ham\n-1,NaN\n-0.5,7.999999999\n";
        assert!(!compare_golden(nan, nan, 1e-10).unwrap());
        assert!(!compare_golden("tau,ham\n-1,8\n", T, 1e-10).unwrap());
        assert!(matches!(compare_golden("tau,vol\n-1,8\n", T, 1e-10), Err(CliError::Golden(_))));
    }

    #[test]
    fn ragged_rows() {
        let a = "origin,-1,-1\nspacing,0.1\n1,2,3\n";
        assert!(compare_golden(a, a, 1e-10).unwrap());
        assert!(!compare_golden("origin,-1,-1\nspacing,0.2\n1,2,3\n", a, 1e-10).unwrap());
        assert!(!compare_golden("origin,-1,-1\nspacing,0.1\n1,2\n", a, 1e-10).unwrap());
    }

    #[test]
    fn text_cells_compare_exactly() {
        let a = "check,pass\nx,true\n";
        assert!(compare_golden(a, a, 0.0).unwrap());
        assert!(!compare_golden("check,pass\nx,false\n", a, 0.0).unwrap());
    }
}
