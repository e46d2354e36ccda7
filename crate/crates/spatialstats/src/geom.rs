//! Domain geometry: locations, observation windows, and BAU tessellations.

use crate::error::{Error, Result};

/// Tolerance under which two locations are considered coincident,
/// applied per coordinate.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// A point in 1-, 2-, or 3-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    coords: Vec<f64>,
}

impl Location {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > 3 {
            return Err(Error::DimensionMismatch(format!(
                "locations must have 1 to 3 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coords",
                message: "coordinates must be finite".into(),
            });
        }
        Ok(Self { coords })
    }

    /// 1-d location. Panics on non-finite input.
    pub fn x(x: f64) -> Self {
        Self::new(vec![x]).expect("finite coordinate")
    }

    /// 2-d location. Panics on non-finite input.
    pub fn xy(x: f64, y: f64) -> Self {
        Self::new(vec![x, y]).expect("finite coordinates")
    }

    /// 3-d location. Panics on non-finite input.
    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Self::new(vec![x, y, z]).expect("finite coordinates")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    /// Euclidean distance. Panics if dimensions differ.
    pub fn distance(&self, other: &Location) -> f64 {
        assert_eq!(self.dim(), other.dim(), "mixed-dimension locations");
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// True when every coordinate agrees within [`DUPLICATE_TOL`].
    pub fn coincides(&self, other: &Location) -> bool {
        self.dim() == other.dim()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
    }
}

/// Scans a location list for pairwise duplicates and mixed dimensions.
pub(crate) fn check_distinct(locations: &[Location]) -> Result<()> {
    for (i, a) in locations.iter().enumerate() {
        if a.dim() != locations[0].dim() {
            return Err(Error::DimensionMismatch(format!(
                "location {i} has dimension {} but location 0 has {}",
                a.dim(),
                locations[0].dim()
            )));
        }
        for (j, b) in locations.iter().enumerate().skip(i + 1) {
            if a.coincides(b) {
                return Err(Error::DuplicateLocation(i, j));
            }
        }
    }
    Ok(())
}

/// A bounded observation window: an axis-aligned box in 1-3 dimensions
/// or a simple convex polygon in the plane.
#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    Rect { lo: Vec<f64>, hi: Vec<f64> },
    /// Convex polygon stored counter-clockwise.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Window {
    pub fn rect(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
            return Err(Error::DimensionMismatch(format!(
                "window bounds must share a dimension of 1 to 3, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !a.is_finite() || !b.is_finite() || b <= a {
                return Err(Error::InvalidParameter {
                    name: "window",
                    message: "each upper bound must exceed its lower bound".into(),
                });
            }
        }
        Ok(Window::Rect { lo, hi })
    }

    /// Convenience for the planar box [x0, x1] x [y0, y1].
    pub fn unit_square() -> Self {
        Window::Rect { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter {
                name: "window",
                message: "polygon needs at least 3 vertices".into(),
            });
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidParameter {
                name: "window",
                message: "polygon vertices must be finite".into(),
            });
        }
        let mut vertices = vertices;
        let area2 = signed_area2(&vertices);
        if area2.abs() <= f64::EPSILON {
            return Err(Error::InvalidParameter {
                name: "window",
                message: "polygon has zero area".into(),
            });
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        // convexity: every cross product of consecutive edges non-negative
        let n = vertices.len();
        let scale = polygon_scale(&vertices);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross < -1e-12 * scale * scale {
                return Err(Error::InvalidParameter {
                    name: "window",
                    message: "polygon must be convex".into(),
                });
            }
        }
        Ok(Window::Polygon { vertices })
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Rect { lo, .. } => lo.len(),
            Window::Polygon { .. } => 2,
        }
    }

    /// Length, area, or volume of the window.
    pub fn volume(&self) -> f64 {
        match self {
            Window::Rect { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Window::Polygon { vertices } => 0.5 * signed_area2(vertices),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Window::Rect { lo, hi } => (lo.clone(), hi.clone()),
            Window::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo.to_vec(), hi.to_vec())
            }
        }
    }

    /// Closed membership test: boundary points count as inside.
    pub fn contains(&self, p: &Location) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        match self {
            Window::Rect { lo, hi } => p
                .coords()
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (a, b))| *c >= *a && *c <= *b),
            Window::Polygon { vertices } => {
                let scale = polygon_scale(vertices);
                let (x, y) = (p.coord(0), p.coord(1));
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
                    cross >= -1e-12 * scale * scale
                })
            }
        }
    }

    /// True when `other` is entirely inside this window. Relies on both
    /// windows being convex: containment of all corners/vertices suffices.
    pub fn contains_window(&self, other: &Window) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        match other {
            Window::Rect { lo, hi } => {
                if self.dim() == 2 {
                    let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
                    corners
                        .iter()
                        .all(|c| self.contains(&Location::xy(c[0], c[1])))
                } else {
                    let lo_in = Location::new(lo.clone()).map(|l| self.contains(&l));
                    let hi_in = Location::new(hi.clone()).map(|l| self.contains(&l));
                    matches!((lo_in, hi_in), (Ok(true), Ok(true)))
                }
            }
            Window::Polygon { vertices } => vertices
                .iter()
                .all(|v| self.contains(&Location::xy(v[0], v[1]))),
        }
    }
}

fn signed_area2(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc
}

fn polygon_scale(vertices: &[[f64; 2]]) -> f64 {
    vertices
        .iter()
        .map(|v| v[0].abs().max(v[1].abs()))
        .fold(1.0, f64::max)
}

/// One basic areal unit of a tessellation.
#[derive(Debug, Clone)]
pub struct BauCell {
    /// per-axis grid index of the cell before clipping
    pub grid_index: Vec<usize>,
    pub centroid: Location,
    pub volume: f64,
    /// unclipped axis-aligned bounds of the cell
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A regular tessellation of a window into non-overlapping cells.
///
/// For polygon windows the rectangular cells are clipped to the polygon;
/// cells falling entirely outside are dropped.
#[derive(Debug, Clone)]
pub struct BauGrid {
    window: Window,
    resolution: Vec<usize>,
    cells: Vec<BauCell>,
    /// grid-index -> cell position, row-major over the resolution
    index_map: Vec<Option<usize>>,
}

impl BauGrid {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn cells(&self) -> &[BauCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn centroids(&self) -> Vec<Location> {
        self.cells.iter().map(|c| c.centroid.clone()).collect()
    }

    // axis 0 varies fastest
    fn flat_index(&self, grid_index: &[usize]) -> usize {
        let mut acc = 0;
        for (i, &g) in grid_index.iter().enumerate().rev() {
            acc = acc * self.resolution[i] + g;
        }
        acc
    }

    /// Cell whose unclipped bounds contain the point, if that cell exists.
    pub fn cell_containing(&self, p: &Location) -> Option<usize> {
        if p.dim() != self.window.dim() {
            return None;
        }
        let (lo, hi) = self.window.bbox();
        let mut gi = Vec::with_capacity(p.dim());
        for k in 0..p.dim() {
            let w = (hi[k] - lo[k]) / self.resolution[k] as f64;
            let c = p.coord(k);
            if c < lo[k] || c > hi[k] {
                return None;
            }
            let idx = (((c - lo[k]) / w).floor() as usize).min(self.resolution[k] - 1);
            gi.push(idx);
        }
        self.index_map[self.flat_index(&gi)]
    }
}

/// Tessellates a window into a regular grid of BAUs with the given
/// cells-per-axis resolution.
pub fn tessellate_baus(window: &Window, resolution: &[usize]) -> Result<BauGrid> {
    if resolution.len() != window.dim() {
        return Err(Error::DimensionMismatch(format!(
            "resolution has {} axes but window has {}",
            resolution.len(),
            window.dim()
        )));
    }
    if resolution.iter().any(|&r| r == 0) {
        return Err(Error::ZeroResolution);
    }
    let (lo, hi) = window.bbox();
    let d = window.dim();
    let widths: Vec<f64> = (0..d)
        .map(|k| (hi[k] - lo[k]) / resolution[k] as f64)
        .collect();

    let total: usize = resolution.iter().product();
    let mut cells = Vec::new();
    let mut index_map = vec![None; total];

    for flat in 0..total {
        // decode the grid index, axis 0 fastest
        let mut rem = flat;
        let mut gi = vec![0usize; d];
        for k in 0..d {
            gi[k] = rem % resolution[k];
            rem /= resolution[k];
        }
        let cell_lo: Vec<f64> = (0..d).map(|k| lo[k] + gi[k] as f64 * widths[k]).collect();
        let cell_hi: Vec<f64> = (0..d).map(|k| cell_lo[k] + widths[k]).collect();

        let (volume, centroid) = match window {
            Window::Rect { .. } => {
                let vol: f64 = widths.iter().product();
                let c: Vec<f64> = (0..d).map(|k| 0.5 * (cell_lo[k] + cell_hi[k])).collect();
                (vol, Location::new(c)?)
            }
            Window::Polygon { vertices } => {
                let rect = [
                    [cell_lo[0], cell_lo[1]],
                    [cell_hi[0], cell_lo[1]],
                    [cell_hi[0], cell_hi[1]],
                    [cell_lo[0], cell_hi[1]],
                ];
                let clipped = clip_convex(&rect, vertices);
                if clipped.len() < 3 {
                    continue;
                }
                let area = 0.5 * signed_area2(&clipped);
                let cell_area: f64 = widths.iter().product();
                if area <= 1e-14 * cell_area {
                    continue;
                }
                let c = polygon_centroid(&clipped);
                (area, Location::xy(c[0], c[1]))
            }
        };
        index_map[flat] = Some(cells.len());
        cells.push(BauCell { grid_index: gi, centroid, volume, lo: cell_lo, hi: cell_hi });
    }

    Ok(BauGrid { window: window.clone(), resolution: resolution.to_vec(), cells, index_map })
}

/// Sutherland-Hodgman clipping of a convex subject polygon against a
/// convex clip polygon (both counter-clockwise).
fn clip_convex(subject: &[[f64; 2]; 4], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
        let intersect = |p: [f64; 2], q: [f64; 2]| -> [f64; 2] {
            let dx = q[0] - p[0];
            let dy = q[1] - p[1];
            let num = (b[0] - a[0]) * (a[1] - p[1]) - (b[1] - a[1]) * (a[0] - p[0]);
            let den = (b[0] - a[0]) * dy - (b[1] - a[1]) * dx;
            let t = num / den;
            [p[0] + t * dx, p[1] + t * dy]
        };
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let nxt = input[(j + 1) % m];
            match (inside(cur), inside(nxt)) {
                (true, true) => out.push(nxt),
                (true, false) => out.push(intersect(cur, nxt)),
                (false, true) => {
                    out.push(intersect(cur, nxt));
                    out.push(nxt);
                }
                (false, false) => {}
            }
        }
    }
    out
}

fn polygon_centroid(vertices: &[[f64; 2]]) -> [f64; 2] {
    let n = vertices.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut a2 = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        let w = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
        a2 += w;
    }
    [cx / (3.0 * a2), cy / (3.0 * a2)]
}
