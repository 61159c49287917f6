use std::path::Path;

use lasi_core::{lasi_distance, ImageTensor, LasiConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy(img: &ImageTensor, sigma: f64, seed: u64) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let data = img.data().iter().map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0)).collect();
    ImageTensor::new(img.height(), img.width(), img.channels(), data).unwrap()
}

#[test]
fn lasi_grows_with_noise_amplitude() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/camera64.pgm");
    let img = lasi_cli::load_image(&path).unwrap();
    let cfg = LasiConfig::default();
    for seed in 0..5 {
        let d: Vec<f64> = [0.02, 0.05, 0.1].iter().map(|&s| lasi_distance(&img, &noisy(&img, s, seed), &cfg).unwrap()).collect();
        assert!(d[0] < d[1] && d[1] < d[2], "seed {seed}: {d:?}");
    }
}
