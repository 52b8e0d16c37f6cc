use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::quanvolve::ImageU8;
use crate::rng::{stream, STREAM_SYNTH};

/// Two-class sanity set: label 0 is a Gaussian blob, label 1 a thin ring.
/// Centres, widths and radii are jittered per image and pixel noise is added,
/// so the classes differ in shape, not in any single pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub count: usize,
    pub size: usize,
    /// Standard deviation of additive pixel noise, in 8-bit units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            count: 200,
            size: 28,
            noise: 12.0,
            seed: 0,
        }
    }
}

/// Balanced blob-versus-ring images in a seed-determined order.
pub fn blob_or_ring(spec: &SyntheticSpec) -> Dataset {
    let mut rng = stream(spec.seed, STREAM_SYNTH);
    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise");
    let s = spec.size as f64;
    let mut labels: Vec<u8> = (0..spec.count).map(|k| (k % 2) as u8).collect();
    labels.shuffle(&mut rng);

    let images = labels
        .iter()
        .map(|&label| {
            let cy = s / 2.0 + rng.random_range(-0.08..0.08) * s;
            let cx = s / 2.0 + rng.random_range(-0.08..0.08) * s;
            let amp = rng.random_range(170.0..240.0);
            let (radius, width) = if label == 0 {
                (0.0, rng.random_range(0.12..0.18) * s)
            } else {
                (rng.random_range(0.24..0.32) * s, rng.random_range(0.035..0.05) * s)
            };
            let data = (0..spec.size * spec.size)
                .map(|p| {
                    let y = (p / spec.size) as f64 + 0.5 - cy;
                    let x = (p % spec.size) as f64 + 0.5 - cx;
                    let d = (y * y + x * x).sqrt() - radius;
                    let v = amp * (-d * d / (2.0 * width * width)).exp() + noise.sample(&mut rng);
                    v.round().clamp(0.0, 255.0) as u8
                })
                .collect();
            ImageU8::new(spec.size, spec.size, data).expect("square image")
        })
        .collect();
    Dataset::new(images, labels).expect("binary labels")
}
