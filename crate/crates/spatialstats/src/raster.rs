//! Plain-text grid rasters and portable-graymap rendering of prediction
//! maps. Both formats are bit-exact 1:1 functions of their inputs.

use crate::error::{Error, Result};
use crate::geom::Window;
use crate::kriging::PredictionMap;

pub const NODATA: f64 = -9999.0;

/// Lays out per-cell values of a 2-d prediction map on the full
/// rectangular grid, row-major with the top (largest y) row first.
/// Cells clipped away by a polygon window become NaN.
fn full_grid_values(map: &PredictionMap, values: &[f64]) -> Result<(usize, usize, Vec<f64>)> {
    let res = map.grid.resolution();
    if res.len() != 2 {
        return Err(Error::DimensionMismatch(
            "grid rasters are defined for 2-d grids only".into(),
        ));
    }
    let (ncols, nrows) = (res[0], res[1]);
    let mut out = vec![f64::NAN; ncols * nrows];
    for (cell, &v) in map.grid.cells().iter().zip(values) {
        let (ix, iy) = (cell.grid_index[0], cell.grid_index[1]);
        let row = nrows - 1 - iy;
        out[row * ncols + ix] = v;
    }
    Ok((ncols, nrows, out))
}

/// Text raster with header `ncols nrows xll yll cellsize nodata` and
/// row-major values, top row first. Assumes square cells.
pub fn to_grid_raster(map: &PredictionMap, values: &[f64]) -> Result<String> {
    let (ncols, nrows, grid_vals) = full_grid_values(map, values)?;
    let (lo, hi) = match map.grid.window() {
        w @ (Window::Rect { .. } | Window::Polygon { .. }) => w.bbox(),
    };
    let cellsize = (hi[0] - lo[0]) / ncols as f64;
    let mut out = format!("{ncols} {nrows} {} {} {cellsize} {NODATA}\n", lo[0], lo[1]);
    for row in 0..nrows {
        let line: Vec<String> = (0..ncols)
            .map(|col| {
                let v = grid_vals[row * ncols + col];
                if v.is_nan() {
                    NODATA.to_string()
                } else {
                    v.to_string()
                }
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Renders the prediction surface as a binary 16-bit portable graymap
/// (P5, maxval 65535, big-endian samples), linearly scaled from min to
/// max. NaN cells map to 0; a constant surface maps to mid-gray.
pub fn render_pgm(map: &PredictionMap) -> Result<Vec<u8>> {
    render_values_pgm(map, &map.predictions)
}

/// Same rendering for an arbitrary per-cell value vector (e.g. standard
/// errors).
pub fn render_values_pgm(map: &PredictionMap, values: &[f64]) -> Result<Vec<u8>> {
    if map.grid.n_cells() == 0 {
        return Err(Error::EmptyMap);
    }
    if values.len() != map.grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} cells",
            values.len(),
            map.grid.n_cells()
        )));
    }
    let (ncols, nrows, grid_vals) = full_grid_values(map, values)?;
    let finite: Vec<f64> = grid_vals.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptyMap);
    }
    let min = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut out = format!("P5\n{ncols} {nrows}\n65535\n").into_bytes();
    for &v in &grid_vals {
        let level: u16 = if !v.is_finite() {
            0
        } else if max == min {
            32768
        } else {
            ((v - min) / (max - min) * 65535.0).round() as u16
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{tessellate_baus, Window};
    use crate::kriging::PredictionMap;

    fn map_with(values: Vec<f64>, res: usize) -> PredictionMap {
        let grid = tessellate_baus(&Window::unit_square(), &[res, res]).unwrap();
        let n = grid.n_cells();
        PredictionMap { grid, predictions: values, standard_errors: vec![0.0; n] }
    }

    #[test]
    fn constant_map_renders_mid_gray() {
        let map = map_with(vec![3.0; 4], 2);
        let pgm = render_pgm(&map).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&pgm[..header.len()], header);
        let body = &pgm[header.len()..];
        assert_eq!(body.len(), 8);
        for px in body.chunks(2) {
            assert_eq!(u16::from_be_bytes([px[0], px[1]]), 32768);
        }
    }

    #[test]
    fn monotone_scaling() {
        // values [0,1;2,3] by grid index; pixel levels strictly increase
        // with the value
        let grid = tessellate_baus(&Window::unit_square(), &[2, 2]).unwrap();
        let values: Vec<f64> = grid
            .cells()
            .iter()
            .map(|c| (c.grid_index[0] + 2 * c.grid_index[1]) as f64)
            .collect();
        let map = PredictionMap { grid, predictions: values.clone(), standard_errors: vec![0.0; 4] };
        let pgm = render_pgm(&map).unwrap();
        let body = &pgm[b"P5\n2 2\n65535\n".len()..];
        let levels: Vec<u16> = body.chunks(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect();
        // top row first: grid rows y=1 then y=0
        assert_eq!(levels, vec![43690, 65535, 0, 21845]);
        let mut by_value: Vec<(f64, u16)> = vec![
            (values[0], levels[2]),
            (values[1], levels[3]),
            (values[2], levels[0]),
            (values[3], levels[1]),
        ];
        by_value.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in by_value.windows(2) {
            assert!(w[0].1 < w[1].1);
        }
    }

    #[test]
    fn empty_map_rejected() {
        let grid = tessellate_baus(&Window::unit_square(), &[1, 1]).unwrap();
        let map = PredictionMap { grid, predictions: vec![], standard_errors: vec![] };
        assert!(matches!(render_values_pgm(&map, &[]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn grid_raster_layout() {
        let map = map_with(vec![1.0, 2.0, 3.0, 4.0], 2);
        let text = to_grid_raster(&map, &map.predictions).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2 2 0 0 0.5 -9999");
        // top row first: cells with iy = 1 are values 3,4
        assert_eq!(lines[1], "3 4");
        assert_eq!(lines[2], "1 2");
    }

    #[test]
    fn polygon_grid_raster_marks_missing_cells() {
        let tri = Window::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let grid = tessellate_baus(&tri, &[2, 2]).unwrap();
        let n = grid.n_cells();
        assert_eq!(n, 3);
        let map = PredictionMap {
            grid,
            predictions: vec![1.0; n],
            standard_errors: vec![0.0; n],
        };
        let text = to_grid_raster(&map, &map.predictions).unwrap();
        assert!(text.contains("-9999"));
        let pgm = render_pgm(&map).unwrap();
        let body = &pgm[b"P5\n2 2\n65535\n".len()..];
        // the clipped-away top-right cell renders as 0
        let levels: Vec<u16> = body.chunks(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect();
        assert_eq!(levels[1], 0);
    }
}
