//! Device layouts: piecewise-constant areal densities over the sample plane.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle, μm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// Rectangle of size `w`×`h` centered on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Rect::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn corners(&self) -> Vec<(f64, f64)> {
        vec![
            (self.x0, self.y0),
            (self.x1, self.y0),
            (self.x1, self.y1),
            (self.x0, self.y1),
        ]
    }
}

/// A polygon with uniform density of one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub element: String,
    /// Vertices in μm, either winding order.
    pub polygon: Vec<(f64, f64)>,
    pub density_cm2: f64,
}

impl Region {
    pub fn rect(element: &str, r: Rect, density_cm2: f64) -> Self {
        Region {
            element: element.to_string(),
            polygon: r.corners(),
            density_cm2,
        }
    }
}

/// Per-element areal density map: uniform backgrounds plus polygonal regions.
/// Overlapping regions of the same element add.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLayout {
    pub bounds: Rect,
    #[serde(default)]
    pub regions: Vec<Region>,
    /// Uniform density per element, cm⁻².
    #[serde(default)]
    pub background: BTreeMap<String, f64>,
}

impl DeviceLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.area() > 0.0) {
            return Err(Error::Config("layout bounds have zero area".into()));
        }
        for (el, d) in &self.background {
            if !(*d >= 0.0) {
                return Err(Error::Config(format!("background density of {el} is negative")));
            }
        }
        for (i, r) in self.regions.iter().enumerate() {
            if !(r.density_cm2 >= 0.0) {
                return Err(Error::Config(format!(
                    "region {i} ({}) has negative density",
                    r.element
                )));
            }
            if r.polygon.len() < 3 {
                return Err(Error::Config(format!("region {i} has fewer than 3 vertices")));
            }
            let b = &self.bounds;
            if r.polygon.iter().any(|&(x, y)| !b.contains(x, y)) {
                return Err(Error::Config(format!(
                    "region {i} ({}) extends outside bounds",
                    r.element
                )));
            }
        }
        Ok(())
    }

    /// Element symbols present anywhere, sorted.
    pub fn elements(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .background
            .keys()
            .cloned()
            .chain(self.regions.iter().map(|r| r.element.clone()))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Mean density of `element` over `spot` (top-hat footprint), cm⁻².
    pub fn mean_density(&self, element: &str, spot: &Rect) -> f64 {
        let area = spot.area();
        let bg = self.background.get(element).copied().unwrap_or(0.0);
        let covered: f64 = self
            .regions
            .iter()
            .filter(|r| r.element == element && r.density_cm2 > 0.0)
            .map(|r| r.density_cm2 * clipped_area(&r.polygon, spot))
            .sum();
        bg + covered / area
    }

    /// Preset resembling a Hall bar: a 20 μm × 200 μm dopant bar along x with
    /// six side arms and two end leads, aluminium contact pads (with a trace of
    /// iron) at every lead end, and uniform Si, Ar and Au backgrounds.
    /// Bar occupies x ∈ [30, 230], y ∈ [70, 90] μm.
    pub fn hall_bar(dopant: &str, density_cm2: f64) -> Self {
        let bounds = Rect::new(0.0, 0.0, 260.0, 160.0);
        let mut regions = vec![Region::rect(dopant, Rect::new(30.0, 70.0, 230.0, 90.0), density_cm2)];
        let mut pads = Vec::new();
        for cx in [80.0, 130.0, 180.0] {
            // arms stop where the bar starts so densities do not stack
            regions.push(Region::rect(
                dopant,
                Rect::new(cx - 5.0, 90.0, cx + 5.0, 130.0),
                density_cm2,
            ));
            regions.push(Region::rect(
                dopant,
                Rect::new(cx - 5.0, 30.0, cx + 5.0, 70.0),
                density_cm2,
            ));
            pads.push(Rect::new(cx - 12.0, 125.0, cx + 12.0, 150.0));
            pads.push(Rect::new(cx - 12.0, 10.0, cx + 12.0, 35.0));
        }
        regions.push(Region::rect(dopant, Rect::new(15.0, 72.0, 30.0, 88.0), density_cm2));
        regions.push(Region::rect(dopant, Rect::new(230.0, 72.0, 245.0, 88.0), density_cm2));
        pads.push(Rect::new(2.0, 65.0, 22.0, 95.0));
        pads.push(Rect::new(238.0, 65.0, 258.0, 95.0));
        for p in pads {
            regions.push(Region::rect("Al", p, 6.0e15));
            regions.push(Region::rect("Fe", p, 1.0e13));
        }
        let background = [("Si", 1.0e19), ("Ar", 4.6e16), ("Au", 1.0e17)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        DeviceLayout {
            bounds,
            regions,
            background,
        }
    }

    /// Calibration standard: `element` spread uniformly at `density_cm2` in
    /// the same Si/Ar/Au environment as [`hall_bar`](Self::hall_bar).
    pub fn uniform_reference(element: &str, density_cm2: f64) -> Self {
        let mut layout = Self::hall_bar(element, 0.0);
        layout.regions.clear();
        layout.background.insert(element.to_string(), density_cm2);
        layout
    }
}

/// Area of `polygon ∩ rect` by Sutherland–Hodgman clipping against the
/// four rectangle edges followed by the shoelace formula.
pub fn clipped_area(polygon: &[(f64, f64)], rect: &Rect) -> f64 {
    let mut pts: Vec<(f64, f64)> = polygon.to_vec();
    let edges: [(u8, f64); 4] = [(0, rect.x0), (1, rect.x1), (2, rect.y0), (3, rect.y1)];
    for (kind, c) in edges {
        if pts.is_empty() {
            return 0.0;
        }
        let inside = |p: &(f64, f64)| match kind {
            0 => p.0 >= c,
            1 => p.0 <= c,
            2 => p.1 >= c,
            _ => p.1 <= c,
        };
        let cross = |a: &(f64, f64), b: &(f64, f64)| {
            if kind < 2 {
                let t = (c - a.0) / (b.0 - a.0);
                (c, a.1 + t * (b.1 - a.1))
            } else {
                let t = (c - a.1) / (b.1 - a.1);
                (a.0 + t * (b.0 - a.0), c)
            }
        };
        let mut out = Vec::with_capacity(pts.len() + 4);
        for i in 0..pts.len() {
            let cur = pts[i];
            let prev = pts[(i + pts.len() - 1) % pts.len()];
            match (inside(&prev), inside(&cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross(&prev, &cur)),
                (false, true) => {
                    out.push(cross(&prev, &cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        pts = out;
    }
    polygon_area(&pts)
}

pub fn polygon_area(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}
