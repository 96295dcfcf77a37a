//! The demo's operations on plain buffers, independent of the JS bindings.

use drivernet::data::image::decode_bytes;
use drivernet::data::{average_of, diff_image, AugmentPolicy, ImageBuffer, Preprocess, SynthConfig, SynthCorpus};
use drivernet::tensor::{conv2d_forward, relu, ConvParams};
use drivernet::{RngState, Result, Tensor};

/// Every view is a square grayscale frame of this side.
pub const SIDE: usize = 64;

/// Sobel x, Sobel y, Laplacian, 3x3 box blur.
pub const KERNELS: [[f32; 9]; 4] = [
    [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0],
    [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0],
    [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
    [1.0 / 9.0; 9],
];

pub fn frame(gray: &[u8]) -> Result<ImageBuffer> {
    ImageBuffer::new(1, SIDE, SIDE, gray.to_vec())
}

/// Decodes JPEG, PNG or PNM bytes into a grayscale `SIDE`x`SIDE` frame.
pub fn load_frame(bytes: &[u8]) -> Result<ImageBuffer> {
    Preprocess::new(SIDE, SIDE, true).apply(&decode_bytes(bytes)?)
}

pub fn to_rgba(image: &ImageBuffer) -> Vec<u8> {
    let c = image.channels();
    image
        .data()
        .chunks_exact(c)
        .flat_map(|p| if c == 1 { [p[0], p[0], p[0], 255] } else { [p[0], p[1], p[2], 255] })
        .collect()
}

/// One random training-style transform of `image`.
pub fn augment_frame(image: &ImageBuffer, policy: &AugmentPolicy, seed: u64) -> Result<ImageBuffer> {
    policy.validate()?;
    let mut rng = RngState::new(seed);
    Ok(drivernet::data::augment(image, policy, &mut rng))
}

/// Each of [`KERNELS`] convolved over the frame, rectified, then min-max
/// scaled to 8 bits per map.
pub fn feature_maps(image: &ImageBuffer) -> Result<Vec<ImageBuffer>> {
    let input = Tensor::from_fn(&[1, SIDE, SIDE], |i| image.data()[i] as f32 / 255.0);
    let weights = Tensor::new(&[KERNELS.len(), 1, 3, 3], KERNELS.concat())?;
    let params = ConvParams::same(3, 1, KERNELS.len()).without_bias();
    let maps = relu(&conv2d_forward(&input, &weights, None, &params)?);
    maps.data()
        .chunks_exact(SIDE * SIDE)
        .map(|m| {
            let hi = m.iter().copied().fold(0.0f32, f32::max);
            let scale = if hi > 0.0 { 255.0 / hi } else { 0.0 };
            ImageBuffer::new(1, SIDE, SIDE, m.iter().map(|v| (v * scale).round() as u8).collect())
        })
        .collect()
}

/// A small synthetic corpus kept in memory.
pub struct Corpus {
    inner: SynthCorpus,
}

impl Corpus {
    pub fn new(seed: u64, drivers: usize, per_class: usize) -> Result<Corpus> {
        let mut cfg = SynthConfig::new(drivers, per_class, seed);
        cfg.size = SIDE;
        Ok(Corpus {
            inner: drivernet::data::synth_dataset(&cfg)?,
        })
    }

    fn class_images(&self, class: usize) -> impl Iterator<Item = &ImageBuffer> {
        self.inner
            .index
            .rows()
            .iter()
            .zip(&self.inner.images)
            .filter(move |(r, _)| r.label.index() == class)
            .map(|(_, img)| img)
    }

    /// The `n`-th image of `class`, wrapping around.
    pub fn sample(&self, class: usize, n: usize) -> Option<&ImageBuffer> {
        let count = self.class_images(class).count();
        self.class_images(class).nth(n % count.max(1))
    }

    /// Average of class `a`, average of class `b`, and their rescaled
    /// difference.
    pub fn class_views(&self, a: usize, b: usize) -> Result<[ImageBuffer; 3]> {
        let avg_a = average_of(self.class_images(a))?;
        let avg_b = average_of(self.class_images(b))?;
        let diff = diff_image(&avg_a, &avg_b)?;
        Ok([avg_a.to_u8(), avg_b.to_u8(), diff.visual])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical_edge() -> ImageBuffer {
        ImageBuffer::from_fn(1, SIDE, SIDE, |_, _, x| if x < SIDE / 2 { 0 } else { 200 })
    }

    #[test]
    fn zero_policy_is_identity() {
        let img = Corpus::new(1, 2, 2).unwrap().sample(3, 0).unwrap().clone();
        let policy = AugmentPolicy {
            rotation_deg_max: 0.0,
            shift_frac_max: 0.0,
            brightness_frac_max: 0.0,
            enabled: true,
        };
        assert_eq!(augment_frame(&img, &policy, 9).unwrap(), img);
        assert_ne!(augment_frame(&img, &AugmentPolicy::default(), 9).unwrap(), img);
        assert!(augment_frame(&img, &AugmentPolicy { shift_frac_max: -1.0, ..policy }, 9).is_err());
    }

    #[test]
    fn sobel_x_fires_only_at_the_edge() {
        let maps = feature_maps(&vertical_edge()).unwrap();
        assert_eq!(maps.len(), 4);
        let sobel_x = &maps[0];
        for y in 1..SIDE - 1 {
            for x in 0..SIDE {
                let at_edge = x == SIDE / 2 - 1 || x == SIDE / 2;
                assert_eq!(sobel_x.get(0, y, x) > 0, at_edge, "({y},{x})");
            }
        }
        // Sobel y sees no horizontal structure away from the zero-padded border.
        assert!((1..SIDE - 1).all(|y| (1..SIDE - 1).all(|x| maps[1].get(0, y, x) == 0)));
    }

    #[test]
    fn class_views_match_their_definitions() {
        let corpus = Corpus::new(4, 3, 2).unwrap();
        let [a, b, diff] = corpus.class_views(2, 2).unwrap();
        assert_eq!(a, b);
        assert!(diff.data().iter().all(|&v| v == 0));
        let [_, _, diff] = corpus.class_views(0, 7).unwrap();
        assert_eq!(diff.data().iter().copied().max(), Some(255));
        assert_eq!(diff.data().iter().copied().min(), Some(0));
    }

    #[test]
    fn samples_wrap_and_belong_to_their_class() {
        let corpus = Corpus::new(5, 2, 3).unwrap();
        assert_eq!(corpus.sample(1, 0), corpus.sample(1, 6));
        assert_ne!(corpus.sample(1, 0), corpus.sample(2, 0));
    }

    #[test]
    fn uploads_become_grayscale_frames() {
        let mut pnm = b"P6\n4 2\n255\n".to_vec();
        pnm.extend((0..24).map(|i| (i * 10) as u8));
        let f = load_frame(&pnm).unwrap();
        assert_eq!((f.channels(), f.height(), f.width()), (1, SIDE, SIDE));
        assert!(load_frame(b"GIF89a").is_err());
        assert_eq!(to_rgba(&f).len(), SIDE * SIDE * 4);
        let mut pgm = b"P5\n2 2\n255\n".to_vec();
        pgm.extend([10, 10, 10, 10]);
        assert!(load_frame(&pgm).unwrap().data().iter().all(|&v| v == 10));
    }
}
