use proptest::prelude::*;
use thermopipe::formats::FrameFile;
use thermopipe::grid::{GrayFrame, Grid2D, Unit};
use thermopipe::metrics::{emd, emd_histograms, mae, ssim, Histogram, MetricsConfig};
use thermopipe::ops::{bicubic_resample, conv2d, pixel_shuffle, ConvKernel};
use thermopipe::tensor::Tensor3;
use thermopipe::training::split;

fn grid(h: usize, w: usize) -> impl Strategy<Value = Grid2D> {
    prop::collection::vec(-10.0f32..60.0, h * w).prop_map(move |v| Grid2D::new(h, w, v, Unit::Celsius).unwrap())
}

fn grid_pair() -> impl Strategy<Value = (Grid2D, Grid2D)> {
    (11usize..20, 11usize..20).prop_flat_map(|(h, w)| (grid(h, w), grid(h, w)))
}

fn histogram(bins: usize) -> impl Strategy<Value = Histogram> {
    prop::collection::vec(0.0f64..1.0, bins).prop_filter_map("empty histogram", move |raw| {
        let total: f64 = raw.iter().sum();
        (total > 1e-6).then(|| {
            let mut m: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let fix = 1.0 - m.iter().sum::<f64>();
            m[0] = (m[0] + fix).max(0.0);
            Histogram::new((0..=bins).map(|i| i as f64).collect(), m).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn shuffle_is_a_permutation(c in 1usize..3, h in 1usize..6, w in 1usize..6, s in 2usize..4) {
        let n = c * s * s * h * w;
        let x = Tensor3::new(c * s * s, h, w, (0..n).map(|i| i as f32).collect()).unwrap();
        let mut y: Vec<f32> = pixel_shuffle(&x, s).unwrap().into_data();
        y.sort_by(f32::total_cmp);
        prop_assert_eq!(y, x.into_data());
    }

    #[test]
    fn conv_is_linear_in_the_input(seed in any::<u64>(), a in -2.0f32..2.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let k = ConvKernel::same(3, 2, 3, draw(54), vec![0.0; 3]).unwrap();
        let x = draw(2 * 7 * 9);
        let y = conv2d(&Tensor3::new(2, 7, 9, x.clone()).unwrap(), &k).unwrap();
        let ys = conv2d(&Tensor3::new(2, 7, 9, x.iter().map(|v| v * a).collect()).unwrap(), &k).unwrap();
        for (p, q) in y.data().iter().zip(ys.data()) {
            prop_assert!((p * a - q).abs() <= 1e-5);
        }
    }

    #[test]
    fn bicubic_keeps_constants(h in 1usize..12, w in 1usize..12, v in -10.0f32..60.0, f in prop::sample::select(vec![2.0, 4.0])) {
        let up = bicubic_resample(&Grid2D::filled(h, w, v, Unit::Celsius), f).unwrap();
        prop_assert_eq!(up.dims(), (h * f as usize, w * f as usize));
        for &x in up.values() {
            prop_assert!((x - v).abs() <= 1e-4);
        }
    }

    #[test]
    fn emd_is_a_metric(a in histogram(8), b in histogram(8), c in histogram(8)) {
        let d = |x: &Histogram, y: &Histogram| emd_histograms(x, y).unwrap();
        prop_assert!(d(&a, &a).abs() <= 1e-12);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn map_metrics_are_symmetric((a, b) in grid_pair()) {
        let cfg = MetricsConfig::default();
        prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
        prop_assert!(mae(&a, &b).unwrap() >= 0.0);
        let (s1, s2) = (ssim(&a, &b, &cfg).unwrap(), ssim(&b, &a, &cfg).unwrap());
        prop_assert!((s1 - s2).abs() <= 1e-12);
        prop_assert!(s1 <= 1.0 + 1e-12);
        prop_assert!((emd(&a, &b, &cfg).unwrap() - emd(&b, &a, &cfg).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn gray_frames_survive_encoding(h in 1usize..20, w in 1usize..20, seed in any::<u16>(), t in prop::option::of(-20.0f32..70.0)) {
        let levels = (0..h * w).map(|i| (i as u16).wrapping_mul(seed | 1)).collect();
        let f = FrameFile::Gray(GrayFrame::new(h, w, levels, t).unwrap());
        prop_assert_eq!(FrameFile::decode(&f.encode()).unwrap(), f);
    }

    #[test]
    fn split_is_a_partition(n in 2usize..300, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let (train, val) = split(n, frac, seed);
        prop_assert!(!train.is_empty() && !val.is_empty());
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
