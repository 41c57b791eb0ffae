//! Two-column spectrum files: bin-center energy (keV) and counts.
//!
//! Optional `# first_edge_keV=` and `# bin_width_keV=` header tokens pin the
//! binning exactly; without them the edges are rebuilt from the centers,
//! which must be uniformly spaced. A `# edges_keV=e0;e1;...` token gives
//! arbitrary edges explicitly.

use std::fmt::Write as _;
use std::path::Path;

use delta_core::Spectrum;

use crate::error::{CliError, Result};
use crate::text::{parse_table, read_text};

/// Relative tolerance on center spacing, in units of the bin width.
const CENTER_TOL: f64 = 1e-6;

pub fn parse_spectrum_file(path: &Path) -> Result<Spectrum> {
    parse_spectrum(path, &read_text(path)?)
}

pub fn parse_spectrum(path: &Path, text: &str) -> Result<Spectrum> {
    let table = parse_table(path, text)?;
    table.uniform_width(path, &[2])?;
    if table.rows.is_empty() {
        return Err(CliError::parse(path, None, "no data rows"));
    }
    for w in table.rows.windows(2) {
        if !(w[1].1[0] > w[0].1[0]) {
            return Err(CliError::parse(
                path,
                Some(w[1].0),
                format!("energy {} does not increase", w[1].1[0]),
            ));
        }
    }
    for (line, row) in &table.rows {
        if row[1] < 0.0 {
            return Err(CliError::parse(path, Some(*line), format!("negative count {}", row[1])));
        }
    }
    let centers: Vec<f64> = table.rows.iter().map(|(_, r)| r[0]).collect();
    let counts: Vec<f64> = table.rows.iter().map(|(_, r)| r[1]).collect();
    let n = centers.len();

    if let Some((line, list)) = table.header.get("edges_keV") {
        let edges: Vec<f64> = list
            .split(';')
            .map(|e| e.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::parse(path, Some(*line), "edges_keV holds a non-number"))?;
        if edges.len() != n + 1 {
            return Err(CliError::parse(
                path,
                Some(*line),
                format!("{} edges for {n} rows", edges.len()),
            ));
        }
        return Spectrum::new(edges, counts).map_err(|e| CliError::parse(path, Some(*line), e.to_string()));
    }
    let width = match table.number(path, "bin_width_keV")? {
        Some(w) if w > 0.0 => w,
        Some(w) => return Err(CliError::parse(path, None, format!("bin_width_keV={w} must be > 0"))),
        None if n >= 2 => (centers[n - 1] - centers[0]) / (n - 1) as f64,
        None => return Err(CliError::parse(path, None, "one row and no bin_width_keV header")),
    };
    let first = table
        .number(path, "first_edge_keV")?
        .unwrap_or(centers[0] - 0.5 * width);
    for (i, (line, row)) in table.rows.iter().enumerate() {
        let expected = first + (i as f64 + 0.5) * width;
        if (row[0] - expected).abs() > CENTER_TOL * width {
            return Err(CliError::parse(
                path,
                Some(*line),
                format!("energy {} is off the uniform grid (expected {expected})", row[0]),
            ));
        }
    }
    Ok(Spectrum::uniform(first, width, counts)?)
}

/// Text form of a spectrum; `parse_spectrum` inverts it exactly.
pub fn format_spectrum(spectrum: &Spectrum) -> String {
    let edges = spectrum.bin_edges();
    let n = spectrum.len();
    let first = edges[0];
    // a width that regenerates every edge bit for bit, if there is one
    let exact = [(edges[n] - first) / n as f64, edges[1] - first]
        .into_iter()
        .find(|&w| w > 0.0 && edges.iter().enumerate().all(|(i, &e)| first + i as f64 * w == e));
    let mut out = String::with_capacity(24 * n + 64);
    match exact {
        Some(w) => writeln!(out, "# first_edge_keV={first:?} bin_width_keV={w:?}").unwrap(),
        None => {
            let list: Vec<String> = edges.iter().map(|e| format!("{e:?}")).collect();
            writeln!(out, "# edges_keV={}", list.join(";")).unwrap();
        }
    }
    writeln!(out, "energy_keV,counts").unwrap();
    for (c, k) in spectrum.centers().iter().zip(spectrum.counts()) {
        writeln!(out, "{c:?},{k:?}").unwrap();
    }
    out
}

pub fn write_spectrum_file(path: &Path, spectrum: &Spectrum) -> Result<()> {
    std::fs::write(path, format_spectrum(spectrum)).map_err(|e| CliError::io(path, e))
}
