use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{write_atomic, LoopError, RunHistory};
use crate::reward::{weight_matrix, WeightMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// `term,stage_0,...` then one row of normalized weights per term.
pub fn write_heatmap_csv(m: &WeightMatrix) -> String {
    let mut s = String::from("term");
    for k in 0..m.stages() {
        let _ = write!(s, ",stage_{k}");
    }
    s.push('\n');
    for (name, row) in m.terms.iter().zip(&m.normalized) {
        s.push_str(name);
        for w in row {
            let _ = write!(s, ",{w:?}");
        }
        s.push('\n');
    }
    s
}

/// Term names and the normalized matrix from [`write_heatmap_csv`] output.
pub fn read_heatmap_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let width = r.headers().map_err(|e| e.to_string())?.len();
    let mut terms = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != width {
            return Err(format!("row {i}: expected {width} fields, found {}", rec.len()));
        }
        terms.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| format!("row {i}: bad value `{v}`")))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((terms, rows))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Term-by-stage grid; darker cells carry more relative weight.
pub fn heatmap_svg(m: &WeightMatrix) -> String {
    let (cell, left, top) = (28, 150, 30);
    let w = left + cell * m.stages().max(1) + 10;
    let h = top + cell * m.terms.len().max(1) + 10;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for k in 0..m.stages() {
        let x = left + k * cell + cell / 2;
        let _ = writeln!(s, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{k}</text>", top - 8);
    }
    for (r, (name, row)) in m.terms.iter().zip(&m.normalized).enumerate() {
        let y = top + r * cell;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>", left - 6, y + cell / 2 + 4, escape(name));
        for (k, v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#ccc\"><title>{}: {v:.3}</title></rect>",
                left + k * cell,
                escape(name)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `heatmap.csv` and `heatmap.svg` for the incumbent program of each iteration.
pub fn export_heatmap(history: &RunHistory, dir: &Path) -> Result<HeatmapFiles, LoopError> {
    if history.iterations.is_empty() {
        return Err(LoopError::Config("history has no iterations".into()));
    }
    let m = weight_matrix(&history.incumbent_programs()?);
    let files = HeatmapFiles { csv: dir.join("heatmap.csv"), svg: dir.join("heatmap.svg") };
    write_atomic(&files.csv, write_heatmap_csv(&m).as_bytes())?;
    write_atomic(&files.svg, heatmap_svg(&m).as_bytes())?;
    Ok(files)
}
