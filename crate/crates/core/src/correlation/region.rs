use crate::error::{Error, Result};
use crate::specklefield::GridSpec;
use ndarray::Array2;

/// Binary object mask; `true` marks transmitting pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pixels: Array2<bool>,
}

impl Mask {
    pub fn new(pixels: Array2<bool>) -> Result<Self> {
        if !pixels.iter().any(|&p| p) {
            return Err(Error::domain("mask has no transmitting pixel"));
        }
        Ok(Mask { pixels })
    }

    /// Axis-aligned rectangle of `mw × mh` pixels with top-left `(x0, y0)`.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, mw: usize, mh: usize) -> Result<Self> {
        if x0 + mw > width || y0 + mh > height {
            return Err(Error::domain("mask rectangle leaves the grid"));
        }
        Self::new(Array2::from_shape_fn((height, width), |(y, x)| {
            (x0..x0 + mw).contains(&x) && (y0..y0 + mh).contains(&y)
        }))
    }

    /// `side × side` square centred on the grid centre.
    pub fn centered_square(grid: &GridSpec, side: usize) -> Result<Self> {
        let (cx, cy) = grid.center();
        let x0 = cx
            .checked_sub(side / 2)
            .ok_or_else(|| Error::domain("square mask leaves the grid"))?;
        let y0 = cy
            .checked_sub(side / 2)
            .ok_or_else(|| Error::domain("square mask leaves the grid"))?;
        Self::rect(grid.width, grid.height, x0, y0, side, side)
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> &Array2<bool> {
        &self.pixels
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn matches(&self, grid: &GridSpec) -> Result<()> {
        if self.width() != grid.width || self.height() != grid.height {
            return Err(Error::domain(format!(
                "mask {}x{} does not match grid {}x{}",
                self.width(),
                self.height(),
                grid.width,
                grid.height
            )));
        }
        Ok(())
    }

    pub fn region(&self) -> Region {
        let w = self.width();
        Region {
            width: w,
            height: self.height(),
            indices: self
                .pixels
                .indexed_iter()
                .filter(|(_, &p)| p)
                .map(|((y, x), _)| y * w + x)
                .collect(),
        }
    }

    /// Euclidean distance from every pixel centre to the nearest mask pixel.
    pub fn distance_map(&self) -> Array2<f64> {
        let (h, w) = self.pixels.dim();
        let edge: Vec<(f64, f64)> = self
            .pixels
            .indexed_iter()
            .filter(|&((y, x), &p)| {
                p && (x == 0
                    || y == 0
                    || x + 1 == w
                    || y + 1 == h
                    || !self.pixels[[y, x - 1]]
                    || !self.pixels[[y, x + 1]]
                    || !self.pixels[[y - 1, x]]
                    || !self.pixels[[y + 1, x]])
            })
            .map(|((y, x), _)| (x as f64, y as f64))
            .collect();
        Array2::from_shape_fn((h, w), |(y, x)| {
            if self.pixels[[y, x]] {
                return 0.0;
            }
            edge.iter()
                .map(|&(ex, ey)| (ex - x as f64).powi(2) + (ey - y as f64).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
    }
}

/// Non-empty set of pixels on a grid, stored as sorted row-major indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    width: usize,
    height: usize,
    indices: Vec<usize>,
}

impl Region {
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, rw: usize, rh: usize) -> Result<Self> {
        if rw == 0 || rh == 0 || x0 + rw > width || y0 + rh > height {
            return Err(Error::domain(format!(
                "rectangle {rw}x{rh} at ({x0}, {y0}) is empty or leaves the {width}x{height} grid"
            )));
        }
        let indices = (y0..y0 + rh)
            .flat_map(|y| (x0..x0 + rw).map(move |x| y * width + x))
            .collect();
        Ok(Region { width, height, indices })
    }

    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut indices = Vec::new();
        for (x, y) in pixels {
            if x >= width || y >= height {
                return Err(Error::domain(format!("pixel ({x}, {y}) outside the grid")));
            }
            indices.push(y * width + x);
        }
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::domain("region is empty"));
        }
        Ok(Region { width, height, indices })
    }

    pub fn single(width: usize, height: usize, x: usize, y: usize) -> Result<Self> {
        Self::from_pixels(width, height, [(x, y)])
    }

    /// Pixels at distance `>= margin` from the mask.
    pub fn far_from(mask: &Mask, margin: f64) -> Result<Self> {
        let d = mask.distance_map();
        let w = mask.width();
        let indices: Vec<usize> = d
            .indexed_iter()
            .filter(|(_, &v)| v >= margin)
            .map(|((y, x), _)| y * w + x)
            .collect();
        if indices.is_empty() {
            return Err(Error::domain(format!(
                "no pixel lies {margin} px away from the mask"
            )));
        }
        Ok(Region {
            width: w,
            height: mask.height(),
            indices,
        })
    }

    /// Rectangle holding about `area` pixels placed in the grid corner farthest
    /// from the mask's bounding box, kept at least `margin` px away from it.
    pub fn far_rectangle(mask: &Mask, area: usize, margin: f64) -> Result<Self> {
        let (w, h) = (mask.width(), mask.height());
        let side = (area as f64).sqrt().ceil().max(1.0) as usize;
        let (rw, rh) = (side.min(w), area.div_ceil(side).min(h));
        let d = mask.distance_map();
        let mut best: Option<(f64, usize, usize)> = None;
        for (x0, y0) in [(0, 0), (w - rw, 0), (0, h - rh), (w - rw, h - rh)] {
            let near = (y0..y0 + rh)
                .flat_map(|y| (x0..x0 + rw).map(move |x| (x, y)))
                .map(|(x, y)| d[[y, x]])
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(b, _, _)| near > b) {
                best = Some((near, x0, y0));
            }
        }
        let (near, x0, y0) = best.expect("four corners");
        if near < margin {
            return Err(Error::domain(format!(
                "no {rw}x{rh} reference rectangle fits {margin} px away from the mask"
            )));
        }
        Self::rect(w, h, x0, y0, rw, rh)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.width != grid.width || self.height != grid.height {
            return Err(Error::domain("region belongs to a different grid"));
        }
        if self.is_empty() {
            return Err(Error::domain("region is empty"));
        }
        Ok(())
    }

    pub fn to_mask(&self) -> Result<Mask> {
        let mut a = Array2::from_elem((self.height, self.width), false);
        for &i in &self.indices {
            a[[i / self.width, i % self.width]] = true;
        }
        Mask::new(a)
    }
}

/// Distance from the mask beyond which pixels count as background:
/// 5 px plus three speckle radii.
pub fn background_margin(grid: &GridSpec) -> f64 {
    5.0 + (3.0 * grid.speckle_radius).ceil()
}

/// Background pixels for the figures of merit.
pub fn default_background(mask: &Mask, grid: &GridSpec) -> Result<Region> {
    mask.matches(grid)?;
    Region::far_from(mask, background_margin(grid))
}

/// Reference bucket region for differential ghost imaging; the same pixel
/// set as [`default_background`].
pub fn default_reference(mask: &Mask, grid: &GridSpec) -> Result<Region> {
    default_background(mask, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_requires_a_pixel() {
        assert!(Mask::new(Array2::from_elem((3, 3), false)).is_err());
        assert_eq!(Mask::rect(10, 8, 2, 3, 4, 2).unwrap().count(), 8);
        assert!(Mask::rect(10, 8, 8, 0, 4, 2).is_err());
    }

    #[test]
    fn distance_and_far_region() {
        let m = Mask::rect(20, 20, 9, 9, 2, 2).unwrap();
        let d = m.distance_map();
        assert_eq!(d[[9, 9]], 0.0);
        assert_eq!(d[[9, 12]], 2.0);
        assert!((d[[5, 5]] - 32f64.sqrt()).abs() < 1e-12);
        let far = Region::far_from(&m, 5.0).unwrap();
        assert!(far.is_disjoint(&m.region()));
        assert!(!far.contains(9 * 20 + 13));
        assert!(far.contains(0));
    }

    #[test]
    fn far_rectangle_avoids_mask() {
        let m = Mask::rect(40, 40, 2, 2, 6, 6).unwrap();
        let r = Region::far_rectangle(&m, 36, 5.0).unwrap();
        assert_eq!(r.len(), 36);
        assert!(r.contains(39 * 40 + 39));
        assert!(r.is_disjoint(&m.region()));
    }

    #[test]
    fn region_validation() {
        assert!(Region::rect(5, 5, 4, 4, 2, 1).is_err());
        assert!(Region::from_pixels(5, 5, [(5, 0)]).is_err());
        assert!(Region::from_pixels(5, 5, []).is_err());
        let r = Region::from_pixels(5, 5, [(1, 1), (1, 1), (0, 0)]).unwrap();
        assert_eq!(r.indices(), &[0, 6]);
    }
}
