use crate::correlation::{CorrelationMap, Mask};
use crate::error::{Error, Result};
use ndarray::Array2;
use std::fs;
use std::path::{Path, PathBuf};

/// Grayscale image with its declared full-scale value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub pixels: Array2<u16>,
    pub maxval: u16,
}

/// Writes a binary (P5) PGM; 16-bit samples are big-endian.
pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    write_pgm_with_comments(path, image, &[])
}

/// [`write_pgm`] with `# key = value` comment lines in the header.
pub fn write_pgm_with_comments(path: &Path, image: &GrayImage, comments: &[(String, String)]) -> Result<()> {
    let (h, w) = image.pixels.dim();
    let mut header = String::from("P5\n");
    for (k, v) in comments {
        header.push_str(&format!("# {k} = {v}\n"));
    }
    header.push_str(&format!("{w} {h}\n{}\n", image.maxval));
    let mut out = header.into_bytes();
    for &v in image.pixels.iter() {
        if image.maxval > 255 {
            out.extend_from_slice(&v.to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads plain (P2) or binary (P5) PGM files with 8- or 16-bit samples.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format {
        path: path.into(),
        msg: msg.into(),
    };
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos).ok_or_else(|| bad("empty file"))?;
    let num = |pos: &mut usize| -> Result<usize> {
        token(pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("malformed PGM header"))
    };
    let w = num(&mut pos)?;
    let h = num(&mut pos)?;
    let maxval = num(&mut pos)?;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("PGM dimensions or maxval out of range"));
    }
    let n = w * h;
    let values: Vec<u16> = match magic.as_str() {
        "P2" => {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(num(&mut pos)? as u16);
            }
            v
        }
        "P5" => {
            pos += 1; // single whitespace after maxval
            let bpp = if maxval > 255 { 2 } else { 1 };
            let body = bytes
                .get(pos..pos + n * bpp)
                .ok_or_else(|| bad("PGM raster is truncated"))?;
            if bpp == 2 {
                body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
            } else {
                body.iter().map(|&b| b as u16).collect()
            }
        }
        _ => return Err(bad("only P2 and P5 graymaps are supported")),
    };
    if values.iter().any(|&v| v as usize > maxval) {
        return Err(bad("sample exceeds maxval"));
    }
    Ok(GrayImage {
        pixels: Array2::from_shape_vec((h, w), values).expect("checked size"),
        maxval: maxval as u16,
    })
}

/// Binary mask from a graymap: pixels at or above half of full scale are
/// transmitting.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = read_pgm(path)?;
    let half = img.maxval as f64 / 2.0;
    Mask::new(img.pixels.mapv(|v| v as f64 >= half)).map_err(|e| Error::Format {
        path: path.into(),
        msg: e.to_string(),
    })
}

pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<()> {
    write_pgm(
        path,
        &GrayImage {
            pixels: mask.pixels().mapv(|p| if p { 255 } else { 0 }),
            maxval: 255,
        },
    )
}

/// How map values are mapped onto the 16-bit gray range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapScale {
    /// The map's own minimum and maximum.
    MinMax,
    /// Zero to the map's maximum.
    Max,
    /// A shared fixed range, for comparing several maps.
    Fixed { lo: f64, hi: f64 },
}

/// Writes a 16-bit PGM of the map and a sidecar `<path>.scale` text file with
/// the value range that black and white represent. `comments` go into both
/// headers. Returns the sidecar path.
pub fn write_map_pgm(
    path: &Path,
    map: &CorrelationMap,
    scale: MapScale,
    comments: &[(String, String)],
) -> Result<PathBuf> {
    let (min, max) = map.min_max();
    let (lo, hi, mode) = match scale {
        MapScale::MinMax => (min, max, "minmax"),
        MapScale::Max => (0.0, max, "max"),
        MapScale::Fixed { lo, hi } => (lo, hi, "fixed"),
    };
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::domain(format!("invalid image range [{lo}, {hi}]")));
    }
    let span = hi - lo;
    let pixels = map.values.mapv(|v| {
        if span > 0.0 {
            (((v - lo) / span).clamp(0.0, 1.0) * 65535.0).round() as u16
        } else {
            0
        }
    });
    write_pgm_with_comments(path, &GrayImage { pixels, maxval: 65535 }, comments)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".scale");
    let sidecar = PathBuf::from(sidecar);
    let mut text: String = comments.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect();
    text += &format!(
        "mode = {mode}\nblack = {}\nwhite = {}\nmap_min = {}\nmap_max = {}\nkind = {}\n",
        super::fmt_sig9(lo),
        super::fmt_sig9(hi),
        super::fmt_sig9(min),
        super::fmt_sig9(max),
        map.kind
    );
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::MapKind;
    use crate::specklefield::GridSpec;

    #[test]
    fn pgm_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for maxval in [255u16, 65535] {
            let p = dir.path().join(format!("i{maxval}.pgm"));
            let img = GrayImage {
                pixels: Array2::from_shape_fn((3, 4), |(y, x)| ((x * 50 + y * 7) as u16).min(maxval)),
                maxval,
            };
            write_pgm(&p, &img).unwrap();
            assert_eq!(read_pgm(&p).unwrap(), img);
        }
    }

    #[test]
    fn plain_pgm_mask_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        fs::write(&p, "P2\n# comment\n3 2\n10\n0 5 10\n4 6 0\n").unwrap();
        let m = load_mask(&p).unwrap();
        assert_eq!(m.pixels(), &ndarray::arr2(&[[false, true, true], [false, true, false]]));
        fs::write(&p, "P2\n2 1\n10\n0 4\n").unwrap();
        assert!(load_mask(&p).is_err());
    }

    #[test]
    fn map_image_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let g = GridSpec::new(2, 2, 0.5).unwrap();
        let m = CorrelationMap::new(ndarray::arr2(&[[1.0, 2.0], [3.0, 5.0]]), g, MapKind::DGI, 3).unwrap();
        let side = write_map_pgm(&p, &m, MapScale::MinMax, &[("seed".into(), "4".into())]).unwrap();
        let img = read_pgm(&p).unwrap();
        assert_eq!(img.pixels[[0, 0]], 0);
        assert_eq!(img.pixels[[1, 1]], 65535);
        assert_eq!(img.pixels[[0, 1]], 16384);
        let text = fs::read_to_string(side).unwrap();
        assert!(text.contains("white = 5.00000000e0") && text.contains("# seed = 4"));
        write_map_pgm(&p, &m, MapScale::Fixed { lo: 0.0, hi: 10.0 }, &[]).unwrap();
        assert_eq!(read_pgm(&p).unwrap().pixels[[1, 1]], 32768);
    }
}
