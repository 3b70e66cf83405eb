//! Field CSV files: node fields as `i,j,value`, edge fields as
//! `i,j,orientation,value` with orientation `x` (east edge) or `y` (north edge).

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{EdgeField, MetricDomain, NodeField};
use crate::error::{LaminaError, Result};

/// Writes `contents` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| LaminaError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| LaminaError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| LaminaError::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#') && !l.starts_with('i'))
}

fn bad(path: &Path, line: usize, message: impl Into<String>) -> LaminaError {
    LaminaError::Csv {
        path: path.into(),
        line,
        message: message.into(),
    }
}

pub fn read_node_triples(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| LaminaError::io(path, e))?;
    data_lines(&text)
        .map(|(line, l)| {
            let cols: Vec<&str> = l.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad(path, line, "expected i,j,value"));
            }
            let i = cols[0].parse().map_err(|_| bad(path, line, "bad i"))?;
            let j = cols[1].parse().map_err(|_| bad(path, line, "bad j"))?;
            let v = cols[2].parse().map_err(|_| bad(path, line, "bad value"))?;
            Ok((i, j, v))
        })
        .collect()
}

pub fn node_field_csv(dom: &MetricDomain, u: &NodeField) -> String {
    let mut s = String::from("i,j,value\n");
    for n in dom.active_nodes() {
        let (i, j) = dom.node_ij(n);
        let _ = writeln!(s, "{i},{j},{:e}", u.values[n]);
    }
    s
}

pub fn write_node_field(path: &Path, dom: &MetricDomain, u: &NodeField) -> Result<()> {
    write_atomic(path, node_field_csv(dom, u).as_bytes())
}

pub fn read_node_field(path: &Path, dom: &MetricDomain) -> Result<NodeField> {
    let mut u = NodeField::zeros(dom.n_nodes());
    for (i, j, v) in read_node_triples(path)? {
        if i > dom.nx || j > dom.ny {
            return Err(bad(path, 0, format!("node ({i}, {j}) outside grid")));
        }
        u.values[dom.node(i, j)] = v;
    }
    Ok(u)
}

pub fn edge_field_csv(dom: &MetricDomain, x: &EdgeField) -> String {
    let mut s = String::from("i,j,orientation,value\n");
    for n in 0..dom.n_nodes() {
        let (i, j) = dom.node_ij(n);
        if dom.hedge_active(n) {
            let _ = writeln!(s, "{i},{j},x,{:e}", x.ex[n]);
        }
        if dom.vedge_active(n) {
            let _ = writeln!(s, "{i},{j},y,{:e}", x.ey[n]);
        }
    }
    s
}

pub fn write_edge_field(path: &Path, dom: &MetricDomain, x: &EdgeField) -> Result<()> {
    write_atomic(path, edge_field_csv(dom, x).as_bytes())
}

pub fn read_edge_field(path: &Path, dom: &MetricDomain) -> Result<EdgeField> {
    let text = std::fs::read_to_string(path).map_err(|e| LaminaError::io(path, e))?;
    let mut x = EdgeField::zeros(dom.n_nodes());
    for (line, l) in data_lines(&text) {
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(bad(path, line, "expected i,j,orientation,value"));
        }
        let i: usize = cols[0].parse().map_err(|_| bad(path, line, "bad i"))?;
        let j: usize = cols[1].parse().map_err(|_| bad(path, line, "bad j"))?;
        let v: f64 = cols[3].parse().map_err(|_| bad(path, line, "bad value"))?;
        if i > dom.nx || j > dom.ny {
            return Err(bad(path, line, "edge outside grid"));
        }
        let n = dom.node(i, j);
        match cols[2] {
            "x" => x.ex[n] = v,
            "y" => x.ey[n] = v,
            o => return Err(bad(path, line, format!("bad orientation {o:?}"))),
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{grad, DomainConfig};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn node_and_edge_fields_round_trip(seed in 0u64..1000) {
            let dom = MetricDomain::build(&DomainConfig::rect(6, 5, 0.2), None).unwrap();
            let u = dom.sample(|p| (p[0] * 7.1 + p[1] * 3.3 + seed as f64).sin());
            let dir = tempfile::tempdir().unwrap();
            let pu = dir.path().join("u.csv");
            write_node_field(&pu, &dom, &u).unwrap();
            prop_assert_eq!(read_node_field(&pu, &dom).unwrap(), u.clone());
            let g = grad(&u, &dom).unwrap();
            let px = dir.path().join("x.csv");
            write_edge_field(&px, &dom, &g).unwrap();
            prop_assert_eq!(read_edge_field(&px, &dom).unwrap(), g);
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "i,j,value\n0,0,1\n0,x,2\n").unwrap();
        let err = read_node_triples(&p).unwrap_err();
        assert!(matches!(err, LaminaError::Csv { line: 3, .. }));
    }
}
