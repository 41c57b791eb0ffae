//! Magnetotransport files: columns (B_T or angle_deg, value, optional error)
//! and a header such as
//!
//! ```text
//! # orientation=tilt angle=35 quantity=delta_sigma temperature_K=1.8
//! ```
//!
//! `orientation` is one of `perpendicular`, `parallel`, `tilt` (needs
//! `angle=` in degrees) or `angle_sweep` (needs `field_T=`; the first column
//! is then the angle in degrees). `quantity` is `delta_sigma` (S, the
//! default) or `rxy` (Ω).

use std::fmt::Write as _;
use std::path::Path;

use delta_core::transport::{MagnetoPoint, MagnetoTrace, Orientation, Quantity};

use crate::error::{CliError, Result};
use crate::text::{parse_table, read_text, Table};

pub fn parse_transport_file(path: &Path) -> Result<MagnetoTrace> {
    parse_transport(path, &read_text(path)?)
}

fn header_number(table: &Table, path: &Path, keys: &[&str], needed_by: &str) -> Result<f64> {
    for k in keys {
        if let Some(v) = table.number(path, k)? {
            return Ok(v);
        }
    }
    let line = table.header.get("orientation").map(|(l, _)| *l);
    Err(CliError::parse(
        path,
        line,
        format!("{needed_by} needs a {}= header", keys[0]),
    ))
}

pub fn parse_transport(path: &Path, text: &str) -> Result<MagnetoTrace> {
    let table = parse_table(path, text)?;
    let Some((o_line, o)) = table.header.get("orientation") else {
        return Err(CliError::parse(path, None, "missing orientation= header"));
    };
    let orientation = match o.as_str() {
        "perpendicular" | "perp" => Orientation::Perpendicular,
        "parallel" | "par" => Orientation::Parallel,
        "tilt" => Orientation::Tilt {
            angle_deg: header_number(&table, path, &["angle", "angle_deg"], "tilt")?,
        },
        "angle_sweep" | "sweep" => Orientation::AngleSweep {
            field_t: header_number(&table, path, &["field_T", "field"], "angle_sweep")?,
        },
        other => {
            return Err(CliError::parse(
                path,
                Some(*o_line),
                format!("unknown orientation '{other}'"),
            ));
        }
    };
    let quantity = match table.header.get("quantity") {
        None => Quantity::DeltaSigma,
        Some((_, q)) if q == "delta_sigma" => Quantity::DeltaSigma,
        Some((_, q)) if q == "rxy" || q == "R_xy" => Quantity::Rxy,
        Some((line, q)) => return Err(CliError::parse(path, Some(*line), format!("unknown quantity '{q}'"))),
    };
    let temperature_k = table.number(path, "temperature_K")?;

    let width = table.uniform_width(path, &[2, 3])?;
    let mut points = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let error = if width == 3 {
            if !(row[2] > 0.0) {
                return Err(CliError::parse(
                    path,
                    Some(*line),
                    format!("error {} must be > 0", row[2]),
                ));
            }
            Some(row[2])
        } else {
            None
        };
        points.push(MagnetoPoint {
            x: row[0],
            value: row[1],
            error,
        });
    }
    let mut trace = MagnetoTrace::new(orientation, quantity, points)?;
    trace.temperature_k = temperature_k;
    Ok(trace)
}

pub fn format_transport(trace: &MagnetoTrace) -> String {
    let mut out = String::new();
    let orientation = match trace.orientation {
        Orientation::Perpendicular => "orientation=perpendicular".to_string(),
        Orientation::Parallel => "orientation=parallel".to_string(),
        Orientation::Tilt { angle_deg } => format!("orientation=tilt angle={angle_deg:?}"),
        Orientation::AngleSweep { field_t } => format!("orientation=angle_sweep field_T={field_t:?}"),
    };
    let quantity = match trace.quantity {
        Quantity::DeltaSigma => "delta_sigma",
        Quantity::Rxy => "rxy",
    };
    write!(out, "# {orientation} quantity={quantity}").unwrap();
    if let Some(t) = trace.temperature_k {
        write!(out, " temperature_K={t:?}").unwrap();
    }
    out.push('\n');
    let x = if matches!(trace.orientation, Orientation::AngleSweep { .. }) {
        "angle_deg"
    } else {
        "B_T"
    };
    let unit = if trace.quantity == Quantity::Rxy { "ohm" } else { "S" };
    let with_errors = trace.points.iter().all(|p| p.error.is_some());
    if with_errors {
        writeln!(out, "{x},value_{unit},error_{unit}").unwrap();
    } else {
        writeln!(out, "{x},value_{unit}").unwrap();
    }
    for p in &trace.points {
        match (with_errors, p.error) {
            (true, Some(e)) => writeln!(out, "{:?},{:?},{e:?}", p.x, p.value).unwrap(),
            _ => writeln!(out, "{:?},{:?}", p.x, p.value).unwrap(),
        }
    }
    out
}

pub fn write_transport_file(path: &Path, trace: &MagnetoTrace) -> Result<()> {
    std::fs::write(path, format_transport(trace)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> String {
        (1..=n).map(|i| format!("{},{}e-6,1e-8\n", 0.1 * i as f64, i)).collect()
    }

    #[test]
    fn tilt_header() {
        let text = format!("# orientation=tilt angle=35\n{}", rows(6));
        let t = parse_transport(Path::new("t"), &text).unwrap();
        assert_eq!(t.orientation, Orientation::Tilt { angle_deg: 35.0 });
        assert_eq!(t.quantity, Quantity::DeltaSigma);
        assert!(t.points.iter().all(|p| p.error == Some(1e-8)));
    }

    #[test]
    fn missing_orientation() {
        let e = parse_transport(Path::new("t"), &rows(6)).unwrap_err();
        assert!(matches!(e, CliError::Parse { .. }));
        assert!(e.to_string().contains("orientation"));
    }

    #[test]
    fn three_rows_is_insufficient() {
        let text = format!("# orientation=perpendicular\n{}", rows(3));
        let e = parse_transport(Path::new("t"), &text).unwrap_err();
        assert!(matches!(
            e,
            CliError::Core(delta_core::Error::InsufficientData { needed: 5, got: 3 })
        ));
    }

    #[test]
    fn tilt_without_angle() {
        let text = format!("# orientation=tilt\n{}", rows(6));
        assert!(matches!(
            parse_transport(Path::new("t"), &text),
            Err(CliError::Parse { line: Some(1), .. })
        ));
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "# orientation=angle_sweep field_T=9 quantity=delta_sigma temperature_K=1.8\n{}",
            rows(7)
        );
        let t = parse_transport(Path::new("t"), &text).unwrap();
        assert_eq!(parse_transport(Path::new("t"), &format_transport(&t)).unwrap(), t);
        let pairs: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let h = MagnetoTrace::from_pairs(Orientation::Perpendicular, Quantity::Rxy, &pairs).unwrap();
        assert_eq!(parse_transport(Path::new("t"), &format_transport(&h)).unwrap(), h);
    }
}
