//! Raster file I/O for elevation grids.
//!
//! Two plain-text formats are supported; [`load_grid`] sniffs which one it is given.
//!
//! **ESRI ASCII grid** (`.asc`): a header of `key value` lines followed by the data
//! rows, *top row first* (highest `x2`):
//!
//! ```text
//! ncols         50
//! nrows         40
//! xllcorner     0.0
//! yllcorner     0.0
//! cellsize      10.0
//! NODATA_value  -9999
//! <40 lines of 50 whitespace-separated values>
//! ```
//!
//! `ncols`, `nrows`, `xllcorner`, `yllcorner`, and `cellsize` are required (keys are
//! case-insensitive); `NODATA_value` is optional and defaults to −9999. Cells are
//! square; the extent is `[xllcorner, xllcorner + ncols·cellsize]` by
//! `[yllcorner, yllcorner + nrows·cellsize]`.
//!
//! **CSV grid** (`.csv`): one metadata header line naming the extent and shape, one
//! line of values for it, then the data rows top row first:
//!
//! ```text
//! x1_min,x1_max,x2_min,x2_max,nrows,ncols
//! 0.0,500.0,0.0,400.0,40,50
//! <40 lines of 50 comma-separated values>
//! ```
//!
//! In both formats a cell equal to the NODATA value (ESRI) or written as `nan` /
//! left empty (CSV) is treated as missing and filled with the value of the nearest
//! valid cell (4-neighbour breadth-first distance). A grid with no valid cell at all
//! is an error, as is any malformed header or ragged data row — parse errors carry
//! the offending line number.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::{ElevationGrid, Extent, WorldError};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> WorldError {
    WorldError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load an elevation grid from `path`, detecting ESRI ASCII vs CSV from the first
/// non-blank line (an ESRI header starts with an alphabetic key, a CSV grid with the
/// literal `x1_min` column header).
pub fn load_grid(path: impl AsRef<Path>) -> Result<ElevationGrid, WorldError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| parse_err(path, 1, "file is empty"))?;
    if first.to_ascii_lowercase().starts_with("x1_min") {
        parse_csv_grid(path, &text)
    } else if first
        .chars()
        .next()
        .map(|c| c.is_ascii_alphabetic())
        .unwrap_or(false)
    {
        parse_esri_ascii(path, &text)
    } else {
        Err(parse_err(
            path,
            1,
            "unrecognized grid format: expected an ESRI ASCII header or an 'x1_min,...' CSV header",
        ))
    }
}

fn parse_esri_ascii(path: &Path, text: &str) -> Result<ElevationGrid, WorldError> {
    let mut ncols: Option<usize> = None;
    let mut nrows: Option<usize> = None;
    let mut xll: Option<f64> = None;
    let mut yll: Option<f64> = None;
    let mut cellsize: Option<f64> = None;
    let mut nodata = -9999.0;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(idx, raw)) = lines.peek() {
        let line = raw.trim();
        if line.is_empty() {
            lines.next();
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("");
        if !key.chars().next().map(|c| c.is_ascii_alphabetic()).unwrap_or(false) {
            break; // start of data rows
        }
        let lineno = idx + 1;
        let value = parts
            .next()
            .ok_or_else(|| parse_err(path, lineno, format!("header key '{key}' has no value")))?;
        if parts.next().is_some() {
            return Err(parse_err(path, lineno, format!("header line '{line}' has trailing tokens")));
        }
        let key_lc = key.to_ascii_lowercase();
        let parse_f = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| parse_err(path, lineno, format!("cannot parse '{v}' as a number")))
        };
        let parse_u = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("cannot parse '{v}' as a positive integer")))
        };
        match key_lc.as_str() {
            "ncols" => ncols = Some(parse_u(value)?),
            "nrows" => nrows = Some(parse_u(value)?),
            "xllcorner" => xll = Some(parse_f(value)?),
            "yllcorner" => yll = Some(parse_f(value)?),
            "cellsize" => cellsize = Some(parse_f(value)?),
            "nodata_value" => nodata = parse_f(value)?,
            _ => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("unknown header key '{key}' (expected ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value)"),
                ))
            }
        }
        lines.next();
    }

    let header_end = lines.peek().map(|&(idx, _)| idx).unwrap_or(0);
    let require = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| parse_err(path, header_end, format!("missing required header key '{name}'")))
    };
    let ncols = ncols.ok_or_else(|| parse_err(path, header_end, "missing required header key 'ncols'"))?;
    let nrows = nrows.ok_or_else(|| parse_err(path, header_end, "missing required header key 'nrows'"))?;
    let xll = require("xllcorner", xll)?;
    let yll = require("yllcorner", yll)?;
    let cellsize = require("cellsize", cellsize)?;
    if cellsize <= 0.0 || !cellsize.is_finite() {
        return Err(parse_err(path, header_end, "cellsize must be positive and finite"));
    }

    let mut data = Vec::with_capacity(nrows * ncols);
    let mut rows_read = 0usize;
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if rows_read == nrows {
            return Err(parse_err(path, idx + 1, format!("expected {nrows} data rows, found extra data")));
        }
        let row: Result<Vec<f64>, WorldError> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(path, idx + 1, format!("cannot parse '{tok}' as a number")))
            })
            .collect();
        let row = row?;
        if row.len() != ncols {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {ncols} values in data row, found {}", row.len()),
            ));
        }
        data.extend(row);
        rows_read += 1;
    }
    if rows_read != nrows {
        return Err(parse_err(path, text.lines().count(), format!("expected {nrows} data rows, found {rows_read}")));
    }

    let top_down = Array2::from_shape_vec((nrows, ncols), data)
        .expect("shape checked row by row");
    let filled = fill_nodata(path, top_down, |v| v == nodata || !v.is_finite())?;
    let extent = Extent::new(
        xll,
        xll + ncols as f64 * cellsize,
        yll,
        yll + nrows as f64 * cellsize,
    )?;
    ElevationGrid::new(flip_rows(filled), extent)
}

fn parse_csv_grid(path: &Path, text: &str) -> Result<ElevationGrid, WorldError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (h_idx, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "file is empty"))?;
    let expected = ["x1_min", "x1_max", "x2_min", "x2_max", "nrows", "ncols"];
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != expected {
        return Err(parse_err(
            path,
            h_idx + 1,
            format!("CSV grid header must be '{}', found '{}'", expected.join(","), header.trim()),
        ));
    }
    let (m_idx, meta) = lines
        .next()
        .ok_or_else(|| parse_err(path, h_idx + 2, "missing metadata line after header"))?;
    let meta_vals: Vec<&str> = meta.split(',').map(str::trim).collect();
    if meta_vals.len() != 6 {
        return Err(parse_err(path, m_idx + 1, format!("expected 6 metadata values, found {}", meta_vals.len())));
    }
    let parse_f = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| parse_err(path, m_idx + 1, format!("cannot parse '{v}' as a number")))
    };
    let parse_u = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| parse_err(path, m_idx + 1, format!("cannot parse '{v}' as a positive integer")))
    };
    let extent = Extent::new(parse_f(meta_vals[0])?, parse_f(meta_vals[1])?, parse_f(meta_vals[2])?, parse_f(meta_vals[3])?)?;
    let nrows = parse_u(meta_vals[4])?;
    let ncols = parse_u(meta_vals[5])?;

    let mut data = Vec::with_capacity(nrows * ncols);
    let mut rows_read = 0usize;
    for (idx, raw) in lines {
        if rows_read == nrows {
            return Err(parse_err(path, idx + 1, format!("expected {nrows} data rows, found extra data")));
        }
        let row: Result<Vec<f64>, WorldError> = raw
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                if tok.is_empty() {
                    Ok(f64::NAN) // empty cell = missing
                } else {
                    tok.parse::<f64>()
                        .map_err(|_| parse_err(path, idx + 1, format!("cannot parse '{tok}' as a number")))
                }
            })
            .collect();
        let row = row?;
        if row.len() != ncols {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {ncols} values in data row, found {}", row.len()),
            ));
        }
        data.extend(row);
        rows_read += 1;
    }
    if rows_read != nrows {
        return Err(parse_err(path, text.lines().count(), format!("expected {nrows} data rows, found {rows_read}")));
    }
    let top_down = Array2::from_shape_vec((nrows, ncols), data).expect("shape checked row by row");
    let filled = fill_nodata(path, top_down, |v| !v.is_finite())?;
    ElevationGrid::new(flip_rows(filled), extent)
}

/// Replace missing cells with the nearest valid value (4-neighbour BFS distance;
/// among equidistant sources the one whose flood front arrives first wins, scanning
/// row-major from the top of the file).
fn fill_nodata(
    path: &Path,
    mut grid: Array2<f64>,
    is_missing: impl Fn(f64) -> bool,
) -> Result<Array2<f64>, WorldError> {
    let (rows, cols) = grid.dim();
    let mut queue = VecDeque::new();
    let mut missing = 0usize;
    for i in 0..rows {
        for j in 0..cols {
            if is_missing(grid[(i, j)]) {
                grid[(i, j)] = f64::NAN;
                missing += 1;
            } else {
                queue.push_back((i, j));
            }
        }
    }
    if missing == 0 {
        return Ok(grid);
    }
    if queue.is_empty() {
        return Err(parse_err(path, 1, "grid contains no valid cells to fill NODATA from"));
    }
    while let Some((i, j)) = queue.pop_front() {
        let v = grid[(i, j)];
        let visit = |ni: usize, nj: usize, grid: &mut Array2<f64>, queue: &mut VecDeque<(usize, usize)>| {
            if grid[(ni, nj)].is_nan() {
                grid[(ni, nj)] = v;
                queue.push_back((ni, nj));
            }
        };
        if i > 0 {
            visit(i - 1, j, &mut grid, &mut queue);
        }
        if i + 1 < rows {
            visit(i + 1, j, &mut grid, &mut queue);
        }
        if j > 0 {
            visit(i, j - 1, &mut grid, &mut queue);
        }
        if j + 1 < cols {
            visit(i, j + 1, &mut grid, &mut queue);
        }
    }
    Ok(grid)
}

fn flip_rows(top_down: Array2<f64>) -> Array2<f64> {
    let (rows, cols) = top_down.dim();
    Array2::from_shape_fn((rows, cols), |(i, j)| top_down[(rows - 1 - i, j)])
}

/// Write `grid` as an ESRI ASCII raster. Requires square cells (the format has a
/// single `cellsize`); grids with unequal cell sides must use [`write_csv_grid`].
pub fn write_esri_ascii(grid: &ElevationGrid, path: impl AsRef<Path>) -> Result<(), WorldError> {
    let geom = grid.geometry();
    let (dx1, dx2) = (geom.cell_dx1(), geom.cell_dx2());
    if (dx1 - dx2).abs() > 1e-9 * dx1.max(dx2) {
        return Err(WorldError::InvalidGrid(format!(
            "ESRI ASCII requires square cells; this grid has {dx1} x {dx2}"
        )));
    }
    let mut out = String::new();
    let e = geom.extent;
    writeln!(out, "ncols {}", geom.cols).unwrap();
    writeln!(out, "nrows {}", geom.rows).unwrap();
    writeln!(out, "xllcorner {}", e.x1_min).unwrap();
    writeln!(out, "yllcorner {}", e.x2_min).unwrap();
    writeln!(out, "cellsize {}", dx1).unwrap();
    writeln!(out, "NODATA_value -9999").unwrap();
    for i in (0..geom.rows).rev() {
        let mut first = true;
        for j in 0..geom.cols {
            if !first {
                out.push(' ');
            }
            write!(out, "{}", grid.value_at_cell(i, j)).unwrap();
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write `grid` in the headered CSV grid format described in the module docs.
pub fn write_csv_grid(grid: &ElevationGrid, path: impl AsRef<Path>) -> Result<(), WorldError> {
    let geom = grid.geometry();
    let e = geom.extent;
    let mut out = String::new();
    writeln!(out, "x1_min,x1_max,x2_min,x2_max,nrows,ncols").unwrap();
    writeln!(out, "{},{},{},{},{},{}", e.x1_min, e.x1_max, e.x2_min, e.x2_max, geom.rows, geom.cols).unwrap();
    for i in (0..geom.rows).rev() {
        let mut first = true;
        for j in 0..geom.cols {
            if !first {
                out.push(',');
            }
            write!(out, "{}", grid.value_at_cell(i, j)).unwrap();
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn esri_round_trip_is_exact() {
        let grid = ElevationGrid::new(
            array![[1.5, -2.25, 3.125], [0.1, 0.2, 0.3]],
            Extent::new(10.0, 13.0, 20.0, 22.0).unwrap(),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_esri_ascii(&grid, f.path()).unwrap();
        let loaded = load_grid(f.path()).unwrap();
        assert_eq!(loaded.values(), grid.values());
        assert_eq!(loaded.extent(), grid.extent());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = ElevationGrid::new(
            array![[1.5, -2.25, 3.125], [0.1, 0.2, 0.375]],
            Extent::new(0.0, 6.0, 0.0, 2.0).unwrap(), // non-square cells
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv_grid(&grid, f.path()).unwrap();
        let loaded = load_grid(f.path()).unwrap();
        assert_eq!(loaded.values(), grid.values());
        assert_eq!(loaded.extent(), grid.extent());
    }

    #[test]
    fn esri_rows_are_stored_top_down() {
        // Top data row in the file must land at the high-x2 (last) internal row.
        let f = write_tmp(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n9 9\n1 1\n",
        );
        let g = load_grid(f.path()).unwrap();
        assert_eq!(g.value_at_cell(0, 0), 1.0); // bottom row
        assert_eq!(g.value_at_cell(1, 0), 9.0); // top row
    }

    #[test]
    fn nodata_fills_from_nearest_valid() {
        let f = write_tmp(
            "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n5 -9999 7\n5 5 7\n",
        );
        let g = load_grid(f.path()).unwrap();
        // Missing top-middle cell is equidistant from 5s and a 7; the earliest valid
        // cell in file scan order (the 5 to its left) floods it first.
        assert_eq!(g.value_at_cell(1, 1), 5.0);

        let f = write_tmp(
            "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 -9999 7\n-9999 -9999 7\n",
        );
        let g = load_grid(f.path()).unwrap();
        assert!(g.values().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn all_nodata_is_an_error() {
        let f = write_tmp(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 -9999\n-9999 -9999\n",
        );
        let err = load_grid(f.path()).unwrap_err();
        assert!(err.to_string().contains("no valid cells"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let f = write_tmp("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 oops\n");
        let err = load_grid(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":7:"), "{msg}");
        assert!(msg.contains("oops"), "{msg}");

        let f = write_tmp("ncols 2\nnrows 2\nbogus_key 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n");
        let msg = load_grid(f.path()).unwrap_err().to_string();
        assert!(msg.contains(":3:") && msg.contains("bogus_key"), "{msg}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let f = write_tmp("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5\n");
        let msg = load_grid(f.path()).unwrap_err().to_string();
        assert!(msg.contains("expected 3 values") && msg.contains(":7:"), "{msg}");
    }

    #[test]
    fn missing_header_key_is_rejected() {
        let f = write_tmp("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n1 2\n3 4\n");
        let msg = load_grid(f.path()).unwrap_err().to_string();
        assert!(msg.contains("cellsize"), "{msg}");
    }

    #[test]
    fn csv_grid_empty_cells_fill() {
        let f = write_tmp("x1_min,x1_max,x2_min,x2_max,nrows,ncols\n0,2,0,2,2,2\n1,\n3,4\n");
        let g = load_grid(f.path()).unwrap();
        // Missing top-right cell fills from a 4-neighbour (top-left "1" arrives first
        // in scan order).
        assert_eq!(g.value_at_cell(1, 1), 1.0);
    }

    #[test]
    fn esri_writer_rejects_non_square_cells() {
        let grid = ElevationGrid::new(
            Array2::zeros((2, 3)),
            Extent::new(0.0, 6.0, 0.0, 2.0).unwrap(),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(write_esri_ascii(&grid, f.path()).is_err());
    }
}
