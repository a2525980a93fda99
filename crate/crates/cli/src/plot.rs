//! Minimal log-log chart of a sweep, rendered into an 8-bit graymap.
//!
//! Two panels (contrast left, SNR right). Each source has its own gray level;
//! GI points are filled squares and DGI points hollow squares. Fitted power
//! laws are dotted lines. The legend goes into the image header comments.

use ghostim::io::GrayImage;
use ghostim::metrics::{Method, MetricsRecord, PowerLawFit};
use ghostim::photostatistics::SourceKind;
use ndarray::Array2;

const PANEL_W: usize = 360;
const PANEL_H: usize = 280;
const MARGIN: usize = 30;

pub fn gray_for(source: SourceKind) -> u16 {
    match source {
        SourceKind::Thermal => 0,
        SourceKind::CaseA => 100,
        SourceKind::CaseB => 170,
    }
}

/// One curve: its points and, when available, its fit.
pub struct Series<'a> {
    pub source: SourceKind,
    pub method: Method,
    pub records: Vec<&'a MetricsRecord>,
    pub contrast_fit: Option<PowerLawFit>,
    pub snr_fit: Option<PowerLawFit>,
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn from_values(values: impl Iterator<Item = f64>) -> Option<Axis> {
        let (lo, hi) = values
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(f64::ln)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            return None;
        }
        let pad = ((hi - lo) * 0.08).max(0.1);
        Some(Axis { lo: lo - pad, hi: hi + pad })
    }

    fn frac(&self, v: f64) -> Option<f64> {
        (v > 0.0).then(|| (v.ln() - self.lo) / (self.hi - self.lo))
    }
}

struct Canvas {
    px: Array2<u16>,
}

impl Canvas {
    fn set(&mut self, x: i64, y: i64, v: u16) {
        let (h, w) = self.px.dim();
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            self.px[[y as usize, x as usize]] = v;
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), v: u16, dotted: bool) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err, mut step) = (x0, y0, dx + dy, 0usize);
        loop {
            if !dotted || (step / 3) % 2 == 0 {
                self.set(x, y, v);
            }
            step += 1;
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn marker(&mut self, x: i64, y: i64, v: u16, filled: bool) {
        let r: i64 = if filled { 2 } else { 3 };
        for j in -r..=r {
            for i in -r..=r {
                if filled || i.abs() == r || j.abs() == r {
                    self.set(x + i, y + j, v);
                }
            }
        }
    }
}

/// Renders the contrast and SNR panels. Returns `None` when nothing is
/// plottable on log axes.
pub fn render(series: &[Series]) -> Option<GrayImage> {
    let all = || series.iter().flat_map(|s| s.records.iter().copied());
    let xa = Axis::from_values(all().map(|r| r.ratio))?;
    let ya = [
        Axis::from_values(all().map(|r| r.contrast))?,
        Axis::from_values(all().map(|r| r.snr))?,
    ];
    let width = 2 * (PANEL_W + 2 * MARGIN);
    let height = PANEL_H + 2 * MARGIN;
    let mut c = Canvas {
        px: Array2::from_elem((height, width), 255),
    };
    for (panel, ya) in ya.iter().enumerate() {
        let ox = (panel * (PANEL_W + 2 * MARGIN) + MARGIN) as i64;
        let oy = (MARGIN + PANEL_H) as i64;
        let to_px = |x: f64, y: f64| -> Option<(i64, i64)> {
            let (fx, fy) = (xa.frac(x)?, ya.frac(y)?);
            Some((ox + (fx * PANEL_W as f64).round() as i64, oy - (fy * PANEL_H as f64).round() as i64))
        };
        c.line((ox, oy), (ox + PANEL_W as i64, oy), 0, false);
        c.line((ox, oy), (ox, oy - PANEL_H as i64), 0, false);
        let mut ticks: Vec<f64> = all().map(|r| r.target_ratio).collect();
        ticks.sort_by(f64::total_cmp);
        ticks.dedup();
        for t in ticks {
            if let Some(f) = xa.frac(t) {
                let x = ox + (f * PANEL_W as f64).round() as i64;
                c.line((x, oy), (x, oy + 5), 0, false);
            }
        }
        for s in series {
            let gray = gray_for(s.source);
            let fit = if panel == 0 { s.contrast_fit } else { s.snr_fit };
            if let Some(f) = fit {
                let (x0, x1) = (xa.lo.exp(), xa.hi.exp());
                let n = 60;
                let pts: Vec<_> = (0..=n)
                    .filter_map(|i| {
                        let x = x0 * (x1 / x0).powf(i as f64 / n as f64);
                        to_px(x, f.eval(x))
                    })
                    .collect();
                for w in pts.windows(2) {
                    c.line(w[0], w[1], gray, true);
                }
            }
            for r in &s.records {
                let y = if panel == 0 { r.contrast } else { r.snr };
                if let Some((x, y)) = to_px(r.ratio, y) {
                    c.marker(x, y, gray, s.method == Method::GI);
                }
            }
        }
    }
    Some(GrayImage {
        pixels: c.px,
        maxval: 255,
    })
}

/// Legend and axis ranges for the image header.
pub fn legend(series: &[Series]) -> Vec<(String, String)> {
    let mut out = vec![
        ("panels".to_string(), "left contrast, right snr; log-log against ratio".to_string()),
        ("markers".to_string(), "gi filled square, dgi hollow square, fits dotted".to_string()),
    ];
    let mut seen = Vec::new();
    for s in series {
        if !seen.contains(&s.source) {
            seen.push(s.source);
            out.push((format!("gray {}", gray_for(s.source)), s.source.to_string()));
        }
    }
    out
}
