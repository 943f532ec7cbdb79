use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// Per-node columns of `nodes.csv`.
pub struct NodeColumns {
    pub points: Vec<Vec<f64>>,
    pub quad_weights: Vec<f64>,
    pub omega: Vec<f64>,
    pub swept: Vec<f64>,
    pub u_omega: Vec<f64>,
    pub u_swept: Vec<f64>,
    pub region: Vec<bool>,
}

/// A plot-data file.
pub struct Series {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn csv_error(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn write_nodes(path: &Path, n: &NodeColumns) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let dim = n.points.first().map_or(0, |p| p.len());
    let mut header = vec!["index".to_string()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    header.extend(
        ["quad_weight", "omega", "swept", "U_omega", "U_swept", "region"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..n.points.len() {
        let mut row = vec![i.to_string()];
        row.extend(n.points[i].iter().map(|v| v.to_string()));
        row.push(n.quad_weights[i].to_string());
        row.push(n.omega[i].to_string());
        row.push(n.swept[i].to_string());
        row.push(n.u_omega[i].to_string());
        row.push(n.u_swept[i].to_string());
        row.push(u8::from(n.region[i]).to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()
}

fn write_series(path: &Path, s: &Series) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(&s.header).map_err(csv_error)?;
    for row in &s.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_outputs(
    dir: &Path,
    report: &impl Serialize,
    nodes: Option<&NodeColumns>,
    series: &[Series],
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    if let Some(n) = nodes {
        write_nodes(&dir.join("nodes.csv"), n)?;
    }
    for s in series {
        write_series(&dir.join(&s.name), s)?;
    }
    Ok(())
}
