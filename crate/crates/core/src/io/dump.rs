use crate::error::{Error, Result};
use crate::specklefield::{Frame, FrameSource, GridSpec, StoredFrames};
use ndarray::Array2;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &str = "ghostim-frames 1";

/// Text header of a frame dump.
///
/// ```text
/// ghostim-frames 1
/// # optional comment lines
/// width 200
/// height 200
/// frames 100
/// source thermal
/// seed 42
/// speckle_radius 2
/// dtype f32le
/// end
/// ```
/// followed by `frames × height × width` little-endian `f32` values, frame
/// by frame, each frame row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub source: String,
    pub seed: u64,
    pub speckle_radius: f64,
}

impl DumpHeader {
    fn render(&self, comments: &[(String, String)]) -> String {
        let notes: String = comments.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect();
        format!(
            "{MAGIC}\n{notes}width {}\nheight {}\nframes {}\nsource {}\nseed {}\nspeckle_radius {}\ndtype f32le\nend\n",
            self.width, self.height, self.n_frames, self.source, self.seed, self.speckle_radius
        )
    }
}

/// Streams every frame of `source` to `path`, with `comments` recorded as
/// `# key = value` header lines. A partially written file is removed on
/// failure.
pub fn write_frame_dump<S: FrameSource + ?Sized>(
    path: &Path,
    source: &S,
    source_kind: &str,
    seed: u64,
    comments: &[(String, String)],
) -> Result<DumpHeader> {
    write_frame_dump_with(path, source, source_kind, seed, comments, |_| {})
}

/// [`write_frame_dump`] that also hands every frame, in index order, to
/// `on_frame`. Frames are generated in parallel waves on the current rayon
/// pool and written sequentially.
pub fn write_frame_dump_with<S: FrameSource + ?Sized>(
    path: &Path,
    source: &S,
    source_kind: &str,
    seed: u64,
    comments: &[(String, String)],
    mut on_frame: impl FnMut(&Frame),
) -> Result<DumpHeader> {
    let g = source.grid();
    let header = DumpHeader {
        width: g.width,
        height: g.height,
        n_frames: source.n_frames(),
        source: source_kind.to_string(),
        seed,
        speckle_radius: g.speckle_radius,
    };
    let result = (|| -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(header.render(comments).as_bytes())
            .map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::with_capacity(4 * g.len());
        let wave = (rayon::current_num_threads() * 4).max(1);
        let indices: Vec<usize> = (0..source.n_frames()).collect();
        for chunk in indices.chunks(wave) {
            let frames = chunk
                .par_iter()
                .map(|&i| source.frame(i).map_err(|e| e.at_frame(i)))
                .collect::<Result<Vec<_>>>()?;
            for frame in &frames {
                on_frame(frame);
                buf.clear();
                for &v in frame.as_slice() {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
                w.write_all(&buf).map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(path);
        return Err(e);
    }
    Ok(header)
}

/// Loads a frame dump written by [`write_frame_dump`].
pub fn read_frame_dump(path: &Path) -> Result<(DumpHeader, StoredFrames)> {
    let bad = |msg: String| Error::Format {
        path: path.into(),
        msg,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim_end() != MAGIC {
        return Err(bad("not a frame dump".into()));
    }
    let (mut width, mut height, mut frames, mut source, mut seed, mut radius) =
        (None, None, None, None, None, None);
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(bad("header ends without 'end'".into()));
        }
        let t = line.trim_end();
        if t == "end" {
            break;
        }
        if t.starts_with('#') {
            continue;
        }
        let (key, value) = t
            .split_once(' ')
            .ok_or_else(|| bad(format!("malformed header line '{t}'")))?;
        let num = |v: &str| v.parse::<u64>().map_err(|e| bad(format!("{key}: {e}")));
        match key {
            "width" => width = Some(num(value)? as usize),
            "height" => height = Some(num(value)? as usize),
            "frames" => frames = Some(num(value)? as usize),
            "source" => source = Some(value.to_string()),
            "seed" => seed = Some(num(value)?),
            "speckle_radius" => {
                radius = Some(value.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")))?)
            }
            "dtype" if value == "f32le" => {}
            "dtype" => return Err(bad(format!("unsupported dtype {value}"))),
            _ => return Err(bad(format!("unknown header key '{key}'"))),
        }
    }
    let missing = |k: &str| bad(format!("header lacks '{k}'"));
    let header = DumpHeader {
        width: width.ok_or_else(|| missing("width"))?,
        height: height.ok_or_else(|| missing("height"))?,
        n_frames: frames.ok_or_else(|| missing("frames"))?,
        source: source.ok_or_else(|| missing("source"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        speckle_radius: radius.ok_or_else(|| missing("speckle_radius"))?,
    };
    let grid = GridSpec::new(header.width, header.height, header.speckle_radius)?;
    let mut bytes = vec![0u8; 4 * grid.len()];
    let mut out = Vec::with_capacity(header.n_frames);
    for i in 0..header.n_frames {
        r.read_exact(&mut bytes)
            .map_err(|_| bad(format!("truncated at frame {i}")))?;
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let a = Array2::from_shape_vec(grid.shape(), values).expect("grid shape");
        out.push(Frame::new(grid, a, i).map_err(|e| e.at_frame(i))?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing data after the last frame".into()));
    }
    Ok((header, StoredFrames::new(grid, out)?))
}
