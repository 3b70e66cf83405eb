//! CSV series for external plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{LaminaError, Result};
use crate::family::ConvergenceReport;
use crate::flowbox::Lamination;
use crate::gorny::{decompose_profile, GornyOptions, ProfileDecomposition};
use crate::io::csv::{read_node_triples, write_atomic};
use crate::lamination::Leaf;
use crate::scenario::read_text;
use crate::transverse::{TransverseMeasure, TransverseProfile};

pub const KINDS: [&str; 4] = ["heatmap", "leaves", "cdf", "traces"];

fn parse<T: serde::de::DeserializeOwned>(v: Value, path: &Path) -> Result<T> {
    serde_json::from_value(v).map_err(|e| LaminaError::Csv {
        path: path.into(),
        line: 0,
        message: format!("not a plottable artifact: {e}"),
    })
}

/// Writes the series of `kind` derived from `artifact` into `out_dir` and
/// returns the written paths.
///
/// * `heatmap`: node CSV to a grid with one row per `j`, bottom row first.
/// * `leaves`: leaves or lamination JSON to `leaves.csv` (leaf_id, x, y).
/// * `cdf`: decompositions or measures JSON to `cdf.csv` (box, k, u, ac, c, j).
/// * `traces`: convergence report to `traces.csv` (n, mode, metric).
pub fn emit_plot_data(artifact: &Path, kind: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !KINDS.contains(&kind) {
        return Err(LaminaError::UnknownKind(kind.to_string()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| LaminaError::io(out_dir, e))?;
    let (name, body) = match kind {
        "heatmap" => ("heatmap.csv", heatmap(artifact)?),
        "leaves" => ("leaves.csv", leaves_csv(&load_leaves(artifact)?)),
        "cdf" => ("cdf.csv", cdf_csv(&load_decompositions(artifact)?)),
        _ => {
            let r: ConvergenceReport = parse(serde_json::from_str(&read_text(artifact)?)?, artifact)?;
            ("traces.csv", traces_csv(&r))
        }
    };
    let path = out_dir.join(name);
    write_atomic(&path, body.as_bytes())?;
    Ok(vec![path])
}

fn heatmap(path: &Path) -> Result<String> {
    let rows = read_node_triples(path)?;
    let nx = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let ny = rows.iter().map(|r| r.1).max().unwrap_or(0);
    let mut grid = vec![vec![None; nx + 1]; ny + 1];
    for (i, j, v) in rows {
        grid[j][i] = Some(v);
    }
    let mut s = String::new();
    for row in grid {
        let cells: Vec<String> = row.iter().map(|v| v.map_or(String::new(), |v| format!("{v:e}"))).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}

pub fn load_leaves(path: &Path) -> Result<Vec<Leaf>> {
    let v: Value = serde_json::from_str(&read_text(path)?)?;
    if v.get("atlas").is_some() {
        Ok(parse::<Lamination>(v, path)?.leaves)
    } else if v.get("leaves").is_some() {
        parse(v["leaves"].clone(), path)
    } else {
        parse(v, path)
    }
}

pub fn leaves_csv(leaves: &[Leaf]) -> String {
    let mut s = String::from("leaf_id,x,y\n");
    for (id, l) in leaves.iter().enumerate() {
        for p in l.path() {
            let _ = writeln!(s, "{id},{:e},{:e}", p[0], p[1]);
        }
    }
    s
}

fn load_decompositions(path: &Path) -> Result<Vec<ProfileDecomposition>> {
    let v: Value = serde_json::from_str(&read_text(path)?)?;
    let first = v.as_array().and_then(|a| a.first());
    if first.is_some_and(|f| f.get("parts").is_some()) {
        return parse(v, path);
    }
    let ms: Vec<TransverseMeasure> = parse(v, path)?;
    ms.iter()
        .map(|m| {
            let p = TransverseProfile::from_samples(m.labels.clone(), m.cdf.clone())?;
            decompose_profile(&p, &GornyOptions::default())
        })
        .collect()
}

pub fn cdf_csv(decs: &[ProfileDecomposition]) -> String {
    let mut s = String::from("box,k,u,ac,c,j\n");
    for (b, d) in decs.iter().enumerate() {
        let u = d.reconstruct();
        for (i, k) in d.labels.iter().enumerate() {
            let _ = writeln!(
                s,
                "{b},{k:e},{:e},{:e},{:e},{:e}",
                u[i], d.parts[0][i], d.parts[1][i], d.parts[2][i]
            );
        }
    }
    s
}

pub fn traces_csv(r: &ConvergenceReport) -> String {
    let mut s = String::from("n,mode,metric\n");
    for (n, mode, v) in r.traces() {
        let _ = writeln!(s, "{n},{mode},{v:e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_kind() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_plot_data(&dir.path().join("x.json"), "histogram", dir.path()),
            Err(LaminaError::UnknownKind(k)) if k == "histogram"
        ));
    }

    #[test]
    fn leaves_to_csv() {
        let dir = tempfile::tempdir().unwrap();
        let leaves = vec![
            Leaf::synthetic(vec![[0.0, 0.0], [1.0, 0.0]], 0.5),
            Leaf::synthetic(vec![[0.0, 1.0], [0.5, 1.0], [1.0, 1.0]], 0.7),
        ];
        let path = dir.path().join("leaves.json");
        std::fs::write(&path, serde_json::to_string(&leaves).unwrap()).unwrap();
        let out = emit_plot_data(&path, "leaves", dir.path()).unwrap();
        let text = std::fs::read_to_string(&out[0]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "leaf_id,x,y");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("1,1e0,1e0"));
    }

    #[test]
    fn heatmap_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(&path, "i,j,value\n0,0,1\n1,0,2\n0,1,3\n").unwrap();
        emit_plot_data(&path, "heatmap", dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("heatmap.csv")).unwrap();
        assert_eq!(text, "1e0,2e0\n3e0,\n");
    }

    #[test]
    fn cdf_columns_sum_to_profile() {
        let labels: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let values: Vec<f64> = labels.iter().map(|&k| k + if k > 0.5 { 1.0 } else { 0.0 }).collect();
        let p = TransverseProfile::from_samples(labels, values.clone()).unwrap();
        let d = decompose_profile(&p, &GornyOptions::default()).unwrap();
        let text = cdf_csv(&[d]);
        for (line, v) in text.lines().skip(1).zip(&values) {
            let c: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
            assert!((c[0] - v).abs() < 1e-12);
            assert!((c[0] - c[1] - c[2] - c[3] - values[0]).abs() < 1e-12);
        }
    }
}
