use ghostim::correlation::*;
use ghostim::parallel::with_threads;
use ghostim::photostatistics::SourceSpec;
use ghostim::specklefield::*;
use ghostim::verify;
use ghostim::Error;
use ndarray::Array2;
use proptest::prelude::*;

fn assert_rel(a: &Array2<f64>, b: &Array2<f64>, tol: f64, what: &str) {
    assert_eq!(a.dim(), b.dim());
    for ((i, x), y) in a.indexed_iter().zip(b.iter()) {
        let scale = x.abs().max(y.abs()).max(1e-300);
        assert!((x - y).abs() <= tol * scale, "{what} at {i:?}: {x} vs {y}");
    }
}

fn thermal_arrays(n: usize, side: usize, sigma: f64, seed: u64) -> (GridSpec, Vec<Array2<f64>>) {
    let g = GridSpec::new(side, side, sigma).unwrap();
    let e = generate_ensemble(&SourceSpec::thermal(1.0).unwrap(), &g, n, seed).unwrap();
    let arrays = (0..n).map(|i| e.generate(i).unwrap().intensity).collect();
    (g, arrays)
}

fn superthermal_arrays(n: usize, seed: u64) -> (GridSpec, Vec<Array2<f64>>) {
    let g = GridSpec::new(16, 16, 1.0).unwrap();
    let e = generate_ensemble(&SourceSpec::case_a(1.0, 1.0, 1.0).unwrap(), &g, n, seed).unwrap();
    (g, (0..n).map(|i| e.generate(i).unwrap().intensity).collect())
}

fn test_mask(g: &GridSpec) -> Mask {
    let mut m = Array2::from_elem(g.shape(), false);
    for (y, x) in [(3, 4), (3, 5), (4, 4), (4, 5), (5, 5), (6, 3)] {
        m[[y, x]] = true;
    }
    Mask::new(m).unwrap()
}

#[test]
fn maps_match_brute_force_oracles() {
    for (g, arrays) in [thermal_arrays(500, 16, 1.0, 1), superthermal_arrays(500, 2)] {
        let frames = StoredFrames::from_arrays(g, arrays.clone()).unwrap();
        let mask = test_mask(&g);
        let reference = Region::rect(16, 16, 10, 9, 4, 5).unwrap();

        let px = pixel_correlation(&frames, (7, 9)).unwrap();
        assert_rel(&px.values, &verify::pixel_correlation_naive(&arrays, (7, 9)), 1e-9, "pixel");
        let gi = ghost_image(&frames, &mask).unwrap();
        assert_rel(&gi.values, &verify::ghost_image_naive(&arrays, mask.pixels()), 1e-9, "gi");
        let dgi = differential_ghost_image(&frames, &mask, &reference).unwrap();
        let oracle = verify::dgi_naive(&arrays, mask.pixels(), reference.to_mask().unwrap().pixels());
        // DGI differences of O(1) terms: compare on the scale of the terms
        for (x, y) in dgi.values.iter().zip(oracle.iter()) {
            assert!((x - y).abs() <= 1e-9, "dgi: {x} vs {y}");
        }
        let ac = autocorrelation_fft(&frames).unwrap();
        assert_rel(&ac.values, &verify::autocorrelation_naive(&arrays), 1e-9, "autocorr");
        assert_eq!(ac.n_frames_used, 500);
        assert_eq!(ac.kind, MapKind::Autocorrelation);
    }
}

#[test]
fn odd_sized_grid_autocorrelation() {
    let g = GridSpec::new(13, 10, 1.0).unwrap();
    let e = generate_ensemble(&SourceSpec::case_b(1.0, 2.0, 1.0).unwrap(), &g, 64, 9).unwrap();
    let arrays: Vec<_> = (0..64).map(|i| e.generate(i).unwrap().intensity).collect();
    let frames = StoredFrames::from_arrays(g, arrays.clone()).unwrap();
    let ac = autocorrelation_fft(&frames).unwrap();
    assert_rel(&ac.values, &verify::autocorrelation_naive(&arrays), 1e-9, "autocorr 13x10");
}

#[test]
fn one_pixel_ghost_image_is_pixel_correlation() {
    let (g, arrays) = thermal_arrays(300, 16, 1.5, 4);
    let frames = StoredFrames::from_arrays(g, arrays).unwrap();
    let mask = Region::single(16, 16, 11, 2).unwrap().to_mask().unwrap();
    let gi = ghost_image(&frames, &mask).unwrap();
    let px = pixel_correlation(&frames, (11, 2)).unwrap();
    assert_eq!(gi.values, px.values);
    // and the map value at the pixel is that pixel's own g²
    let series: Vec<f64> = frames.frames().iter().map(|f| f.intensity[[2, 11]]).collect();
    let g2 = ghostim::photostatistics::estimate_g2(&series).unwrap();
    assert!((px.values[[2, 11]] / g2 - 1.0).abs() < 1e-12);
}

#[test]
fn streaming_matches_two_pass() {
    let (g, arrays) = thermal_arrays(1000, 16, 1.0, 5);
    let frames = StoredFrames::from_arrays(g, arrays.clone()).unwrap();
    let px = pixel_correlation(&frames, (3, 12)).unwrap();
    assert_rel(&px.values, &verify::pixel_correlation_two_pass(&arrays, (3, 12)), 1e-10, "two-pass");
}

#[test]
fn thread_count_does_not_change_maps() {
    let (g, arrays) = thermal_arrays(200, 16, 1.0, 6);
    let frames = StoredFrames::from_arrays(g, arrays).unwrap();
    let mask = test_mask(&g);
    let run = || {
        (
            autocorrelation_fft(&frames).unwrap().values,
            ghost_image(&frames, &mask).unwrap().values,
        )
    };
    let one = with_threads(1, run).unwrap();
    for t in [2, 5] {
        assert_eq!(with_threads(t, run).unwrap(), one);
    }
}

#[test]
fn constant_frames() {
    let g = GridSpec::new(12, 12, 1.0).unwrap();
    let frames = StoredFrames::from_arrays(g, vec![Array2::from_elem((12, 12), 2.5); 6]).unwrap();
    let mask = Mask::rect(12, 12, 1, 1, 3, 3).unwrap();
    let reference = Region::rect(12, 12, 7, 7, 3, 3).unwrap();
    let ac = autocorrelation_fft(&frames).unwrap();
    assert!(ac.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    let dgi = differential_ghost_image(&frames, &mask, &reference).unwrap();
    assert!(dgi.values.iter().all(|&v| v.abs() < 1e-12));
    assert!(ghost_image(&frames, &mask).unwrap().values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn degenerate_inputs_are_signalled() {
    let g = GridSpec::new(8, 8, 1.0).unwrap();
    let mut a = Array2::from_elem((8, 8), 1.0);
    a[[2, 2]] = 0.0;
    let frames = StoredFrames::from_arrays(g, vec![a.clone(), a]).unwrap();
    assert!(matches!(pixel_correlation(&frames, (2, 2)), Err(Error::Undefined(_))));
    let zeros = StoredFrames::from_arrays(g, vec![Array2::zeros((8, 8)); 3]).unwrap();
    assert!(matches!(autocorrelation_fft(&zeros), Err(Error::Analysis(_))));
    let mask = Mask::rect(8, 8, 0, 0, 3, 3).unwrap();
    let overlapping = Region::rect(8, 8, 2, 2, 3, 3).unwrap();
    assert!(matches!(
        differential_ghost_image(&frames, &mask, &overlapping),
        Err(Error::Domain(_))
    ));
    assert!(pixel_correlation(&frames, (8, 0)).is_err());
}

#[test]
fn thermal_and_case_a_ghost_levels() {
    let g = GridSpec::new(32, 32, 1.5).unwrap();
    let mask = Region::single(32, 32, 16, 16).unwrap().to_mask().unwrap();
    let bg = default_background(&mask, &g).unwrap();
    let obj = mask.region();

    let t = generate_ensemble(&SourceSpec::thermal(1.0).unwrap(), &g, 10_000, 21).unwrap();
    let gi = ghost_image(&t, &mask).unwrap();
    let (o, b) = (gi.region_mean(&obj).unwrap(), gi.region_mean(&bg).unwrap());
    assert!((o - 2.0).abs() < 0.1 && (b - 1.0).abs() < 0.05, "thermal {o} {b}");

    let a = generate_ensemble(&SourceSpec::case_a(1.0, 1.0, 1.0).unwrap(), &g, 10_000, 22).unwrap();
    let gi = ghost_image(&a, &mask).unwrap();
    let (o, b) = (gi.region_mean(&obj).unwrap(), gi.region_mean(&bg).unwrap());
    assert!((o - 4.0).abs() < 0.2 && (b - 2.0).abs() < 0.1, "case A {o} {b}");
}

#[test]
fn autocorrelation_and_pixel_sections_agree() {
    let g = GridSpec::new(40, 40, 2.0).unwrap();
    let e = generate_ensemble(&SourceSpec::thermal(1.0).unwrap(), &g, 4000, 33).unwrap();
    let (cx, cy) = g.center();
    let (ac, ac_se) = autocorrelation_with_errors(&e, 32).unwrap();
    let (px, px_se) = pixel_correlation_with_errors(&e, (cx, cy), 32).unwrap();
    let mut worst = 0.0f64;
    for x in 0..g.width {
        let se = (ac_se[[cy, x]].powi(2) + px_se[[cy, x]].powi(2)).sqrt();
        let z = (ac.values[[cy, x]] - px.values[[cy, x]]).abs() / se;
        worst = worst.max(z);
    }
    assert!(worst < 3.0, "largest section disagreement {worst:.2} SE");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn maps_are_scale_invariant(c in 1e-3f64..1e3, seed in any::<u64>()) {
        let (g, arrays) = thermal_arrays(40, 12, 1.0, seed);
        let scaled: Vec<_> = arrays.iter().map(|a| a * c).collect();
        let f1 = StoredFrames::from_arrays(g, arrays).unwrap();
        let f2 = StoredFrames::from_arrays(g, scaled).unwrap();
        let mask = Mask::rect(12, 12, 1, 1, 3, 2).unwrap();
        let reference = Region::rect(12, 12, 8, 8, 3, 2).unwrap();
        let pairs = [
            (autocorrelation_fft(&f1).unwrap(), autocorrelation_fft(&f2).unwrap()),
            (pixel_correlation(&f1, (5, 6)).unwrap(), pixel_correlation(&f2, (5, 6)).unwrap()),
            (ghost_image(&f1, &mask).unwrap(), ghost_image(&f2, &mask).unwrap()),
            (differential_ghost_image(&f1, &mask, &reference).unwrap(), differential_ghost_image(&f2, &mask, &reference).unwrap()),
        ];
        for (a, b) in pairs {
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                prop_assert!((x - y).abs() <= 1e-11 * x.abs().max(1.0), "{:?}: {} vs {}", a.kind, x, y);
            }
        }
    }

    #[test]
    fn maps_are_finite(seed in any::<u64>()) {
        let (g, arrays) = thermal_arrays(8, 10, 0.8, seed);
        let f = StoredFrames::from_arrays(g, arrays).unwrap();
        let ac = autocorrelation_fft(&f).unwrap();
        prop_assert!(ac.values.iter().all(|v| v.is_finite()));
        prop_assert_eq!(ac.values.dim(), g.shape());
    }
}
