//! PNG histograms and scatter plots over CSV exports.

use std::collections::BTreeMap;
use std::path::Path;

use shapematch::eval::histogram;
use shapematch::render::{write_png, Image};

use crate::CliError;

const W: usize = 640;
const H: usize = 400;
const MARGIN: usize = 32;

// colour-blind-safe palette
const PALETTE: [[f32; 3]; 8] = [
    [0.0, 0.447, 0.698],
    [0.835, 0.369, 0.0],
    [0.0, 0.620, 0.451],
    [0.800, 0.475, 0.655],
    [0.941, 0.894, 0.259],
    [0.337, 0.706, 0.914],
    [0.902, 0.624, 0.0],
    [0.2, 0.2, 0.2],
];

/// Column name → values, plus an optional grouping column.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(path, e))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::input(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::input(path, e))?;
        Ok(Table { headers, rows })
    }

    fn col(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("CSV has no column `{name}` (columns: {})", self.headers.join(","))))
    }

    /// Numeric values of `column`, grouped by `group` (one group when absent).
    /// Empty cells are skipped.
    pub fn series(&self, column: &str, group: Option<&str>) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
        let c = self.col(column)?;
        let g = group.map(|g| self.col(g)).transpose()?;
        let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let cell = row[c].trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::Usage(format!("row {}: `{cell}` in `{column}` is not a number", i + 1)))?;
            let key = g.map_or_else(|| column.to_string(), |g| row[g].clone());
            out.entry(key).or_default().push(v);
        }
        Ok(out)
    }
}

struct Canvas {
    img: Image,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            img: Image::filled(W, H, 3, 1.0),
        }
    }

    fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        if x < W && y < H {
            let i = (y * W + x) * 3;
            self.img.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    fn rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, rgb: [f32; 3]) {
        for y in y0..y1.min(H) {
            for x in x0..x1.min(W) {
                self.set(x, y, rgb);
            }
        }
    }

    fn axes(&mut self) {
        let k = [0.0; 3];
        self.rect(MARGIN, H - MARGIN, W - MARGIN, H - MARGIN + 1, k);
        self.rect(MARGIN, MARGIN, MARGIN + 1, H - MARGIN, k);
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Overlaid per-group histograms, each group in its own colour and a
/// narrower bar so overlapping groups stay visible.
pub fn histogram_png(series: &BTreeMap<String, Vec<f64>>, bins: usize, out: &Path) -> Result<(), CliError> {
    let (lo, hi) = range(series.values().flatten().copied());
    let counts: Vec<Vec<usize>> = series.values().map(|v| histogram(v, bins, lo, hi)).collect();
    let peak = counts.iter().flatten().copied().max().unwrap_or(1).max(1);
    let mut c = Canvas::new();
    let pw = (W - 2 * MARGIN) as f64;
    let ph = (H - 2 * MARGIN) as f64;
    let groups = counts.len().max(1);
    for (g, h) in counts.iter().enumerate() {
        let rgb = PALETTE[g % PALETTE.len()];
        for (b, &n) in h.iter().enumerate() {
            let bw = pw / bins as f64;
            let x0 = MARGIN as f64 + bw * (b as f64 + g as f64 / groups as f64);
            let x1 = x0 + (bw / groups as f64).max(1.0);
            let top = H as f64 - MARGIN as f64 - ph * n as f64 / peak as f64;
            c.rect(x0 as usize, top as usize, x1.ceil() as usize, H - MARGIN, rgb);
        }
    }
    c.axes();
    write_png(&c.img, out).map_err(CliError::Core)
}

/// Scatter of `x` against `y`, coloured by group.
pub fn scatter_png(points: &BTreeMap<String, Vec<(f64, f64)>>, out: &Path) -> Result<(), CliError> {
    let (x0, x1) = range(points.values().flatten().map(|p| p.0));
    let (y0, y1) = range(points.values().flatten().map(|p| p.1));
    let mut c = Canvas::new();
    let pw = (W - 2 * MARGIN - 4) as f64;
    let ph = (H - 2 * MARGIN - 4) as f64;
    for (g, pts) in points.values().enumerate() {
        let rgb = PALETTE[g % PALETTE.len()];
        for &(x, y) in pts {
            let px = MARGIN + 2 + (pw * (x - x0) / (x1 - x0)) as usize;
            let py = H - MARGIN - 2 - (ph * (y - y0) / (y1 - y0)) as usize;
            c.rect(px.saturating_sub(2), py.saturating_sub(2), px + 3, py + 3, rgb);
        }
    }
    c.axes();
    write_png(&c.img, out).map_err(CliError::Core)
}
