use super::pinhole::PinholeField;
use super::{Frame, GridSpec};
use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{PI, TAU};

/// Point scatterers that diffuse the light leaving a pinhole.
///
/// Positions are 3-D: the transverse coordinates are expressed as far-field
/// phase gradients (cycles per pixel at the camera, i.e. transverse offset
/// over wavelength × distance) and the axial coordinate in wavelengths. Each
/// scatterer contributes the phase `2π (x·u + y·v + z)` at camera pixel
/// `(u, v)` measured from the grid centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererCloud {
    pub positions: Vec<[f64; 3]>,
}

impl ScattererCloud {
    pub const DEFAULT_COUNT: usize = 100;

    /// Draws `count` scatterers with Gaussian transverse spread `lateral_std`
    /// and axial positions uniform over one wavelength.
    pub fn draw<R: Rng + ?Sized>(count: usize, lateral_std: f64, rng: &mut R) -> Result<Self> {
        if count == 0 {
            return Err(Error::domain("scatterer cloud needs at least one particle"));
        }
        let lateral = Normal::new(0.0, lateral_std)
            .map_err(|e| Error::domain(format!("lateral spread {lateral_std}: {e}")))?;
        let positions = (0..count)
            .map(|_| [lateral.sample(rng), lateral.sample(rng), rng.random::<f64>()])
            .collect();
        Ok(ScattererCloud { positions })
    }

    /// Transverse spread giving output speckle with intensity correlation
    /// `exp(-Δ²/2σ²)`, matching a thermal field of speckle radius σ.
    pub fn matched_lateral_std(speckle_radius: f64) -> f64 {
        1.0 / (2.0 * std::f64::consts::SQRT_2 * PI * speckle_radius)
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

/// Diffuses the pinhole field off the scatterer cloud onto the camera.
///
/// Scatterer `j` is lit by the field at a pixel drawn uniformly from the
/// pinhole and radiates with unit weight, so the camera field is
/// `E(p) = N^{-1/2} Σ_j A_j exp(i φ_j(p))` and `⟨I⟩` equals the mean pinhole
/// intensity.
pub fn scatter_speckled_speckle(
    pinhole: &PinholeField,
    cloud: &ScattererCloud,
    grid: &GridSpec,
    seed: u64,
) -> Result<Frame> {
    grid.validate()?;
    if cloud.count() == 0 {
        return Err(Error::domain("scatterer cloud is empty"));
    }
    let src = pinhole.field.as_slice().expect("standard layout");
    if pinhole.pixels.is_empty() || pinhole.pixels.iter().all(|&i| src[i].norm_sqr() == 0.0) {
        return Err(Error::Degenerate("pinhole field is identically zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (grid.width, grid.height);
    let (cx, cy) = grid.center();
    let inv_sqrt_n = 1.0 / (cloud.count() as f64).sqrt();

    let n = cloud.count();
    let mut amp = Vec::with_capacity(n);
    let mut row_re = vec![0.0; n * w];
    let mut row_im = vec![0.0; n * w];
    let mut col = Vec::with_capacity(n * h);
    for (j, p) in cloud.positions.iter().enumerate() {
        let pick = pinhole.pixels[rng.random_range(0..pinhole.pixels.len())];
        amp.push(src[pick] * Complex64::from_polar(inv_sqrt_n, TAU * p[2]));
        for u in 0..w {
            let (s, c) = (TAU * p[0] * (u as f64 - cx as f64)).sin_cos();
            row_re[j * w + u] = c;
            row_im[j * w + u] = s;
        }
        for v in 0..h {
            col.push(Complex64::from_polar(1.0, TAU * p[1] * (v as f64 - cy as f64)));
        }
    }

    let mut intensity = Array2::<f64>::zeros((h, w));
    let mut acc_re = vec![0.0; w];
    let mut acc_im = vec![0.0; w];
    for v in 0..h {
        acc_re.iter_mut().for_each(|a| *a = 0.0);
        acc_im.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..n {
            let c = amp[j] * col[j * h + v];
            let (xr, xi) = (&row_re[j * w..(j + 1) * w], &row_im[j * w..(j + 1) * w]);
            for u in 0..w {
                acc_re[u] += c.re * xr[u] - c.im * xi[u];
                acc_im[u] += c.re * xi[u] + c.im * xr[u];
            }
        }
        let mut out = intensity.row_mut(v);
        for u in 0..w {
            out[u] = acc_re[u] * acc_re[u] + acc_im[u] * acc_im[u];
        }
    }
    Frame::new(*grid, intensity, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specklefield::pinhole::{PinholeSpec, PreparedPinhole};
    use crate::specklefield::thermal::ThermalSynth;

    #[test]
    fn rejects_empty_inputs() {
        let g = GridSpec::new(16, 16, 1.0).unwrap();
        let s = ThermalSynth::new(&g).unwrap();
        let p = PreparedPinhole::new(PinholeSpec::centered(&g, 2.0), &s).unwrap();
        let zero = p.apply(&Array2::zeros(g.shape()));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cloud = ScattererCloud::draw(10, 0.1, &mut rng).unwrap();
        assert!(matches!(
            scatter_speckled_speckle(&zero, &cloud, &g, 1),
            Err(Error::Degenerate(_))
        ));
        assert!(ScattererCloud::draw(0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn single_scatterer_gives_uniform_intensity() {
        let g = GridSpec::new(8, 8, 1.0).unwrap();
        let s = ThermalSynth::new(&g).unwrap();
        let p = PreparedPinhole::new(PinholeSpec::centered(&g, 0.5), &s).unwrap();
        let field = Array2::from_elem(g.shape(), Complex64::new(0.6, 0.8));
        let pf = p.apply(&field);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = ScattererCloud::draw(1, 0.2, &mut rng).unwrap();
        let f = scatter_speckled_speckle(&pf, &cloud, &g, 3).unwrap();
        assert!(f.intensity.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn matches_direct_phasor_sum() {
        let g = GridSpec::new(10, 7, 1.0).unwrap();
        let field = Array2::from_shape_fn(g.shape(), |(y, x)| {
            Complex64::new((x as f64 * 0.3).cos(), (y as f64 * 0.7).sin())
        });
        let pf = PinholeField {
            field: field.clone(),
            pixels: vec![3 * 10 + 4],
            mu_eff: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cloud = ScattererCloud::draw(5, 0.15, &mut rng).unwrap();
        let f = scatter_speckled_speckle(&pf, &cloud, &g, 4).unwrap();
        let a = field[[3, 4]];
        let (cx, cy) = g.center();
        for v in 0..7 {
            for u in 0..10 {
                let mut e = Complex64::default();
                for p in &cloud.positions {
                    let ph = TAU
                        * (p[0] * (u as f64 - cx as f64) + p[1] * (v as f64 - cy as f64) + p[2]);
                    e += a * Complex64::from_polar(1.0 / 5f64.sqrt(), ph);
                }
                assert!((f.intensity[[v, u]] - e.norm_sqr()).abs() < 1e-12);
            }
        }
    }
}
