//! Scan containers.
//!
//! * Directory: `scan.json` (grid metadata plus the relative path of every
//!   pixel file, row-major) and `pixels/x####_y####.csv` spectrum files.
//! * Packed file: the 8-byte magic `DMSCAN01`, a little-endian u64 header
//!   length, a UTF-8 JSON header (the directory index without the pixel
//!   list, plus `bins`), then `bins + 1` bin edges and `nx·ny·bins` counts,
//!   all little-endian f64, pixels row-major.

use std::path::{Path, PathBuf};

use delta_core::{BeamConfig, DetectorConfig, ScanGrid, Spectrum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::spectrum_io::{parse_spectrum_file, write_spectrum_file};

pub const MAGIC: &[u8; 8] = b"DMSCAN01";
const FORMAT: &str = "delta-metrology-scan";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScanFormat {
    Csv,
    Packed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanIndex {
    format: String,
    version: u32,
    nx: usize,
    ny: usize,
    pitch_x_um: f64,
    pitch_y_um: f64,
    origin_um: (f64, f64),
    seed: Option<u64>,
    beam: BeamConfig,
    detector: DetectorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pixels: Vec<String>,
}

impl ScanIndex {
    fn of(grid: &ScanGrid) -> Self {
        ScanIndex {
            format: FORMAT.into(),
            version: VERSION,
            nx: grid.nx,
            ny: grid.ny,
            pitch_x_um: grid.pitch_x_um,
            pitch_y_um: grid.pitch_y_um,
            origin_um: grid.origin_um,
            seed: grid.seed,
            beam: grid.beam.clone(),
            detector: grid.detector.clone(),
            bins: None,
            pixels: Vec::new(),
        }
    }

    fn check(&self, path: &Path) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(CliError::parse(
                path,
                None,
                format!(
                    "not a {FORMAT} v{VERSION} container ({} v{})",
                    self.format, self.version
                ),
            ));
        }
        Ok(())
    }

    fn into_grid(self, pixels: Vec<Spectrum>) -> ScanGrid {
        ScanGrid {
            nx: self.nx,
            ny: self.ny,
            pitch_x_um: self.pitch_x_um,
            pitch_y_um: self.pitch_y_um,
            origin_um: self.origin_um,
            pixels,
            beam: self.beam,
            detector: self.detector,
            seed: self.seed,
        }
    }
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::io(path, e))
}

pub fn pixel_file_name(ix: usize, iy: usize) -> String {
    format!("pixels/x{ix:04}_y{iy:04}.csv")
}

/// Write `grid` as a directory container at `dir`.
pub fn write_scan_dir(dir: &Path, grid: &ScanGrid) -> Result<()> {
    io(dir, std::fs::create_dir_all(dir.join("pixels")))?;
    let mut index = ScanIndex::of(grid);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let name = pixel_file_name(ix, iy);
            write_spectrum_file(&dir.join(&name), grid.pixel(ix, iy))?;
            index.pixels.push(name);
        }
    }
    let json = serde_json::to_string_pretty(&index).expect("index serializes");
    let path = dir.join("scan.json");
    io(&path, std::fs::write(&path, json + "\n"))
}

/// Write `grid` as a packed single file.
pub fn write_scan_packed(path: &Path, grid: &ScanGrid) -> Result<()> {
    let bins = grid.pixels[0].len();
    if grid.pixels.iter().any(|p| !p.same_binning(&grid.pixels[0])) {
        return Err(CliError::Config("packed scans need one binning for all pixels".into()));
    }
    let mut index = ScanIndex::of(grid);
    index.bins = Some(bins);
    let header = serde_json::to_vec(&index).expect("index serializes");
    let mut out = Vec::with_capacity(16 + header.len() + 8 * (bins + 1 + grid.pixels.len() * bins));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for e in grid.pixels[0].bin_edges() {
        out.extend_from_slice(&e.to_le_bytes());
    }
    for p in &grid.pixels {
        for c in p.counts() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    io(path, std::fs::write(path, out))
}

pub fn write_scan(path: &Path, grid: &ScanGrid, format: ScanFormat) -> Result<()> {
    match format {
        ScanFormat::Csv => write_scan_dir(path, grid),
        ScanFormat::Packed => write_scan_packed(path, grid),
    }
}

/// Conventional output location for a scan in `out_dir`.
pub fn scan_output_path(out_dir: &Path, format: ScanFormat) -> PathBuf {
    match format {
        ScanFormat::Csv => out_dir.join("scan"),
        ScanFormat::Packed => out_dir.join("scan.bin"),
    }
}

/// Read a container, detecting the layout: a directory (or its
/// `scan.json`) or a packed file.
pub fn read_scan(path: &Path) -> Result<ScanGrid> {
    if path.is_dir() {
        return read_scan_dir(path);
    }
    if path.file_name().is_some_and(|n| n == "scan.json") {
        return read_scan_dir(path.parent().unwrap_or(Path::new(".")));
    }
    let bytes = io(path, std::fs::read(path))?;
    parse_packed(path, &bytes)
}

fn read_scan_dir(dir: &Path) -> Result<ScanGrid> {
    let index_path = dir.join("scan.json");
    let text = io(&index_path, std::fs::read_to_string(&index_path))?;
    let index: ScanIndex =
        serde_json::from_str(&text).map_err(|e| CliError::parse(&index_path, Some(e.line()), e.to_string()))?;
    index.check(&index_path)?;
    if index.pixels.len() != index.nx * index.ny {
        return Err(CliError::parse(
            &index_path,
            None,
            format!(
                "{} pixel files for a {}x{} grid",
                index.pixels.len(),
                index.nx,
                index.ny
            ),
        ));
    }
    let pixels = index
        .pixels
        .par_iter()
        .map(|name| parse_spectrum_file(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    let grid = index.into_grid(pixels);
    grid.validate()?;
    Ok(grid)
}

fn take<'a>(path: &Path, bytes: &'a [u8], at: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = at.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
        CliError::parse(
            path,
            None,
            format!("truncated packed scan while reading {what} at byte {at}"),
        )
    })?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

fn f64s(chunk: &[u8]) -> Vec<f64> {
    chunk
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect()
}

pub fn parse_packed(path: &Path, bytes: &[u8]) -> Result<ScanGrid> {
    let mut at = 0;
    if take(path, bytes, &mut at, 8, "magic")? != MAGIC {
        return Err(CliError::parse(path, None, "not a packed scan (bad magic)"));
    }
    let len = u64::from_le_bytes(take(path, bytes, &mut at, 8, "header length")?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| CliError::parse(path, None, "header length overflows"))?;
    let index: ScanIndex = serde_json::from_slice(take(path, bytes, &mut at, len, "header")?)
        .map_err(|e| CliError::parse(path, None, format!("bad header: {e}")))?;
    index.check(path)?;
    let bins = index
        .bins
        .ok_or_else(|| CliError::parse(path, None, "header lacks bins"))?;
    let npix = index.nx * index.ny;
    let edges = f64s(take(path, bytes, &mut at, 8 * (bins + 1), "bin edges")?);
    let counts = f64s(take(path, bytes, &mut at, 8 * bins * npix, "counts")?);
    if at != bytes.len() {
        return Err(CliError::parse(
            path,
            None,
            format!("{} trailing bytes", bytes.len() - at),
        ));
    }
    let pixels = counts
        .chunks_exact(bins.max(1))
        .enumerate()
        .map(|(k, c)| {
            Spectrum::new(edges.clone(), c.to_vec()).map_err(|e| CliError::parse(path, None, format!("pixel {k}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = index.into_grid(pixels);
    grid.validate()?;
    Ok(grid)
}
