//! File formats: frame dumps, correlation-map CSV, PGM images and masks.

mod dump;
mod pgm;

pub use dump::{read_frame_dump, write_frame_dump, write_frame_dump_with, DumpHeader};
pub use pgm::{
    load_mask, read_pgm, write_map_pgm, write_mask_pgm, write_pgm, write_pgm_with_comments, GrayImage,
    MapScale,
};

use crate::correlation::CorrelationMap;
use crate::error::{Error, Result};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Formats a value with 9 significant digits.
pub fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes a map as CSV, one grid row per line, preceded by `# key = value`
/// comment lines.
pub fn write_map_csv(path: &Path, map: &CorrelationMap, comments: &[(String, String)]) -> Result<()> {
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# kind = {}", map.kind)?;
        writeln!(w, "# width = {}", map.grid.width)?;
        writeln!(w, "# height = {}", map.grid.height)?;
        writeln!(w, "# n_frames = {}", map.n_frames_used)?;
        for (k, v) in comments {
            writeln!(w, "# {k} = {v}")?;
        }
        for row in map.values.rows() {
            let line: Vec<String> = row.iter().map(|&v| fmt_sig9(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads the numeric body of a map CSV, skipping comment lines.
pub fn read_map_csv(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format {
                path: path.into(),
                msg: format!("line {}: {e}", n + 1),
            })?;
        rows.push(row);
    }
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if h == 0 || rows.iter().any(|r| r.len() != w) {
        return Err(Error::Format {
            path: path.into(),
            msg: "map rows are missing or ragged".into(),
        });
    }
    Ok(Array2::from_shape_vec((h, w), rows.concat()).expect("checked shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::MapKind;
    use crate::specklefield::GridSpec;

    #[test]
    fn csv_round_trip_keeps_nine_digits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let g = GridSpec::new(3, 2, 0.5).unwrap();
        let v = Array2::from_shape_fn((2, 3), |(y, x)| 1.0 + (x as f64 + 3.0 * y as f64) / 7.0);
        let m = CorrelationMap::new(v.clone(), g, MapKind::GI, 9).unwrap();
        write_map_csv(&p, &m, &[("seed".into(), "5".into())]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("# seed = 5"));
        let back = read_map_csv(&p).unwrap();
        for (a, b) in back.iter().zip(v.iter()) {
            assert!((a / b - 1.0).abs() < 1e-8);
        }
        assert_eq!(fmt_sig9(1.0 / 3.0), "3.33333333e-1");
    }
}
