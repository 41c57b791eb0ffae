//! Line traces through intensity maps and their signal-to-noise ratio.

use serde::{Deserialize, Serialize};

use super::map::IntensityMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAxis {
    /// Along x at fixed row `iy`.
    Row,
    /// Along y at fixed column `ix`.
    Column,
}

/// Half-open span `[start_um, start_um + length_um)` along the trace axis,
/// in the map's absolute coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceWindow {
    pub start_um: f64,
    pub length_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub position_um: f64,
    /// Counts per dwell.
    pub value: f64,
    pub flagged: bool,
}

/// Values along one row or column, optionally restricted to a window.
pub fn line_trace(
    map: &IntensityMap,
    axis: TraceAxis,
    index: usize,
    window: Option<TraceWindow>,
) -> Result<Vec<TracePoint>> {
    let (len, across, origin, pitch) = match axis {
        TraceAxis::Row => (map.nx, map.ny, map.origin_um.0, map.pitch_x_um),
        TraceAxis::Column => (map.ny, map.nx, map.origin_um.1, map.pitch_y_um),
    };
    if index >= across {
        return Err(Error::range("trace index", format!("{index} >= {across}")));
    }
    let (lo, hi) = match window {
        None => (f64::NEG_INFINITY, f64::INFINITY),
        Some(w) => {
            let extent = (origin - 0.5 * pitch, origin + (len as f64 - 0.5) * pitch);
            let eps = 1e-9 * pitch;
            if !(w.length_um > 0.0) || w.start_um < extent.0 - eps || w.start_um + w.length_um > extent.1 + eps {
                return Err(Error::range(
                    "trace window",
                    format!(
                        "[{}, {}) um not inside the map extent [{}, {}) um",
                        w.start_um,
                        w.start_um + w.length_um,
                        extent.0,
                        extent.1
                    ),
                ));
            }
            (w.start_um - eps, w.start_um + w.length_um - eps)
        }
    };
    let points = (0..len)
        .filter_map(|i| {
            let pos = origin + i as f64 * pitch;
            if pos < lo || pos >= hi {
                return None;
            }
            let k = match axis {
                TraceAxis::Row => index * map.nx + i,
                TraceAxis::Column => i * map.nx + index,
            };
            Some(TracePoint {
                position_um: pos,
                value: map.values[k],
                flagged: map.flags[k].is_some(),
            })
        })
        .collect();
    Ok(points)
}

/// Denominator of the standard deviation in [`snr`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N − 1.
    Sample,
}

fn mean_std(values: &[f64], convention: StdConvention) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let denom = match convention {
        StdConvention::Population => n,
        StdConvention::Sample => n - 1.0,
    };
    (mean, (ss / denom).sqrt())
}

/// (mean(on) − mean(off)) / std(on).
pub fn snr(trace_on: &[f64], trace_off: &[f64], convention: StdConvention) -> Result<f64> {
    if trace_on.is_empty() || trace_off.is_empty() {
        return Err(Error::DegenerateTrace("both traces must be nonempty".into()));
    }
    if trace_on.iter().chain(trace_off).any(|v| !v.is_finite()) {
        return Err(Error::Domain("trace contains non-finite values".into()));
    }
    if convention == StdConvention::Sample && trace_on.len() < 2 {
        return Err(Error::DegenerateTrace("sample std needs at least two points".into()));
    }
    let (m_on, s_on) = mean_std(trace_on, convention);
    let (m_off, _) = mean_std(trace_off, convention);
    if s_on == 0.0 {
        return Err(Error::DegenerateTrace("on-trace has zero spread".into()));
    }
    Ok((m_on - m_off) / s_on)
}

/// Values of the unflagged points of a trace.
pub fn trace_values(points: &[TracePoint]) -> Vec<f64> {
    points.iter().filter(|p| !p.flagged).map(|p| p.value).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_map(nx: usize, ny: usize, c: f64) -> IntensityMap {
        IntensityMap {
            element: "As".into(),
            nx,
            ny,
            pitch_x_um: 0.5,
            pitch_y_um: 0.5,
            origin_um: (10.0, 20.0),
            values: vec![c; nx * ny],
            sigma: vec![0.0; nx * ny],
            flags: vec![None; nx * ny],
            fingerprint: String::new(),
        }
    }

    #[test]
    fn constant_map_constant_trace() {
        let m = constant_map(8, 3, 4.5);
        let t = line_trace(&m, TraceAxis::Row, 1, None).unwrap();
        assert_eq!(t.len(), 8);
        assert!(t.iter().all(|p| p.value == 4.5));
        let c = line_trace(&m, TraceAxis::Column, 7, None).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].position_um, 21.0);
    }

    #[test]
    fn single_pixel_trace() {
        let t = line_trace(&constant_map(1, 1, 2.0), TraceAxis::Row, 0, None).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn window_selects_points() {
        let m = constant_map(80, 1, 1.0);
        let w = TraceWindow {
            start_um: 12.0,
            length_um: 30.0,
        };
        let t = line_trace(&m, TraceAxis::Row, 0, Some(w)).unwrap();
        assert_eq!(t.len(), 60);
        assert_eq!(t[0].position_um, 12.0);
    }

    #[test]
    fn out_of_bounds() {
        let m = constant_map(4, 4, 1.0);
        assert!(matches!(
            line_trace(&m, TraceAxis::Row, 4, None),
            Err(Error::Range { .. })
        ));
        let w = TraceWindow {
            start_um: 10.0,
            length_um: 30.0,
        };
        assert!(matches!(
            line_trace(&m, TraceAxis::Row, 0, Some(w)),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn snr_examples() {
        let on = [9.0, 10.0, 11.0];
        let off = [2.0, 3.0, 4.0];
        assert_relative_eq!(
            snr(&on, &off, StdConvention::Sample).unwrap(),
            7.0,
            max_relative = 1e-15
        );
        // population std of {9,10,11} is √(2/3)
        assert_relative_eq!(
            snr(&on, &off, StdConvention::Population).unwrap(),
            7.0 / (2.0f64 / 3.0).sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(snr(&on, &[8.0, 10.0, 12.0], StdConvention::Population).unwrap(), 0.0);
    }

    #[test]
    fn snr_degenerate() {
        assert!(matches!(
            snr(&[1.0, 1.0], &[0.0], StdConvention::Population),
            Err(Error::DegenerateTrace(_))
        ));
        assert!(matches!(
            snr(&[], &[0.0], StdConvention::Population),
            Err(Error::DegenerateTrace(_))
        ));
    }
}
