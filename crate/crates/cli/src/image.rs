//! Map outputs: 16-bit binary graymaps for viewing and CSV grids for
//! machine use.

use std::fmt::Write as _;
use std::path::Path;

use delta_core::analysis::{DensityMap, IntensityMap};

use crate::error::{CliError, Result};

/// A scalar field on the scan lattice, row-major from the scan origin.
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub name: String,
    pub unit: String,
    pub nx: usize,
    pub ny: usize,
    pub pitch_x_um: f64,
    pub pitch_y_um: f64,
    pub origin_um: (f64, f64),
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub flags: Vec<Option<String>>,
}

impl GridData {
    pub fn from_intensity(m: &IntensityMap) -> Self {
        GridData {
            name: m.element.clone(),
            unit: "counts".into(),
            nx: m.nx,
            ny: m.ny,
            pitch_x_um: m.pitch_x_um,
            pitch_y_um: m.pitch_y_um,
            origin_um: m.origin_um,
            values: m.values.clone(),
            sigma: m.sigma.clone(),
            flags: m.flags.clone(),
        }
    }

    pub fn from_density(m: &DensityMap) -> Self {
        GridData {
            name: m.element.clone(),
            unit: "cm-2".into(),
            nx: m.nx,
            ny: m.ny,
            pitch_x_um: m.pitch_x_um,
            pitch_y_um: m.pitch_y_um,
            origin_um: m.origin_um,
            values: m.density_cm2.clone(),
            sigma: m.sigma.clone(),
            flags: m.flags.clone(),
        }
    }
}

/// Gray levels (0..=65535) for `values`, scaled linearly between the finite
/// minimum and maximum. Non-finite values map to 0.
pub fn gray_levels(values: &[f64]) -> (Vec<u16>, f64, f64) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        let lo = if lo.is_finite() { lo } else { 0.0 };
        return (vec![0; values.len()], lo, lo);
    }
    let levels = values
        .iter()
        .map(|&v| {
            if v.is_finite() {
                ((v - lo) / (hi - lo) * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    (levels, lo, hi)
}

/// Binary 16-bit graymap (P5, big-endian samples). The top image row is the
/// scan row with the largest y. The header comment records the linear map
/// from gray level to value.
pub fn encode_pgm(grid: &GridData) -> Vec<u8> {
    let (levels, lo, hi) = gray_levels(&grid.values);
    let mut header = String::new();
    writeln!(header, "P5").unwrap();
    writeln!(header, "# {} unit={} min={lo:?} max={hi:?}", grid.name, grid.unit).unwrap();
    writeln!(header, "{} {}", grid.nx, grid.ny).unwrap();
    writeln!(header, "65535").unwrap();
    let mut out = header.into_bytes();
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            out.extend_from_slice(&levels[iy * grid.nx + ix].to_be_bytes());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub comments: Vec<String>,
    /// Samples in file order (top row first).
    pub samples: Vec<u16>,
}

/// Decode a binary graymap with 8- or 16-bit samples.
pub fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<Graymap> {
    let bad = |m: &str| CliError::parse(path, None, m.to_string());
    let mut at = 0;
    let mut comments = Vec::new();
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if at >= bytes.len() {
            return Err(bad("truncated graymap header"));
        }
        if bytes[at] == b'#' {
            let end = bytes[at..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |p| at + p);
            comments.push(String::from_utf8_lossy(&bytes[at + 1..end]).trim().to_string());
            at = end;
            continue;
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() && bytes[at] != b'#' {
            at += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..at]).to_string());
    }
    // exactly one whitespace byte separates the header from the raster
    at += 1;
    if tokens[0] != "P5" {
        return Err(bad("not a binary graymap (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad graymap header number"));
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(bad("graymap maxval out of range"));
    }
    let wide = maxval > 255;
    let need = width * height * if wide { 2 } else { 1 };
    let raster = bytes
        .get(at..at + need)
        .ok_or_else(|| bad("truncated graymap raster"))?;
    let samples = if wide {
        raster
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    Ok(Graymap {
        width,
        height,
        maxval: maxval as u16,
        comments,
        samples,
    })
}

/// CSV grid: one row per pixel with position, value, sigma and flag.
pub fn format_grid_csv(grid: &GridData) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# name={} unit={} nx={} ny={} pitch_x_um={:?} pitch_y_um={:?} origin_x_um={:?} origin_y_um={:?}",
        grid.name, grid.unit, grid.nx, grid.ny, grid.pitch_x_um, grid.pitch_y_um, grid.origin_um.0, grid.origin_um.1
    )
    .unwrap();
    writeln!(out, "ix,iy,x_um,y_um,value,sigma,flag").unwrap();
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let k = iy * grid.nx + ix;
            let x = grid.origin_um.0 + ix as f64 * grid.pitch_x_um;
            let y = grid.origin_um.1 + iy as f64 * grid.pitch_y_um;
            let flag = grid.flags[k].as_deref().unwrap_or("").replace(['\n', '\r'], " ");
            writeln!(
                out,
                "{ix},{iy},{x:?},{y:?},{:?},{:?},{flag}",
                grid.values[k], grid.sigma[k]
            )
            .unwrap();
        }
    }
    out
}

pub fn parse_grid_csv(path: &Path, text: &str) -> Result<GridData> {
    let mut header = std::collections::BTreeMap::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            for tok in c.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    header.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        if line.trim().is_empty() || line.starts_with("ix,") {
            continue;
        }
        let fields: Vec<&str> = line.splitn(7, ',').collect();
        if fields.len() != 7 {
            return Err(CliError::parse(
                path,
                Some(line_no),
                format!("{} columns, expected 7", fields.len()),
            ));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::parse(path, Some(line_no), format!("'{s}' is not a number")))
        };
        let flag = fields[6].trim();
        rows.push((
            num(fields[0])? as usize,
            num(fields[1])? as usize,
            num(fields[4])?,
            num(fields[5])?,
            (!flag.is_empty()).then(|| flag.to_string()),
        ));
    }
    let get = |k: &str| {
        header
            .get(k)
            .cloned()
            .ok_or_else(|| CliError::parse(path, Some(1), format!("missing {k}= header")))
    };
    let getf = |k: &str| {
        get(k)?
            .parse::<f64>()
            .map_err(|_| CliError::parse(path, Some(1), format!("{k} is not a number")))
    };
    let nx = getf("nx")? as usize;
    let ny = getf("ny")? as usize;
    if rows.len() != nx * ny {
        return Err(CliError::parse(
            path,
            None,
            format!("{} rows for a {nx}x{ny} grid", rows.len()),
        ));
    }
    let mut grid = GridData {
        name: get("name")?,
        unit: get("unit")?,
        nx,
        ny,
        pitch_x_um: getf("pitch_x_um")?,
        pitch_y_um: getf("pitch_y_um")?,
        origin_um: (getf("origin_x_um")?, getf("origin_y_um")?),
        values: vec![f64::NAN; nx * ny],
        sigma: vec![f64::NAN; nx * ny],
        flags: vec![None; nx * ny],
    };
    for (ix, iy, v, s, f) in rows {
        if ix >= nx || iy >= ny {
            return Err(CliError::parse(
                path,
                None,
                format!("pixel ({ix}, {iy}) outside the grid"),
            ));
        }
        let k = iy * nx + ix;
        grid.values[k] = v;
        grid.sigma[k] = s;
        grid.flags[k] = f;
    }
    Ok(grid)
}

/// Write `<stem>.pgm` and `<stem>.csv` into `dir`.
pub fn write_grid(dir: &Path, stem: &str, grid: &GridData) -> Result<()> {
    let pgm = dir.join(format!("{stem}.pgm"));
    std::fs::write(&pgm, encode_pgm(grid)).map_err(|e| CliError::io(&pgm, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv, format_grid_csv(grid)).map_err(|e| CliError::io(&csv, e))
}
