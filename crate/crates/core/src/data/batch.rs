//! Seeded stream of aligned random crops.

use mlsm_autodiff::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::PairedSample;
use crate::error::{Error, Result};
use crate::image::{stack, Image};

pub struct Batch {
    /// `batch×3×crop×crop`, unit interval.
    pub dark: Tensor<f32>,
    pub normal: Tensor<f32>,
    /// Sample index and `(left, top)` crop offset for each batch row.
    pub crops: Vec<(usize, usize, usize)>,
}

pub struct BatchStream<'a> {
    samples: &'a [PairedSample],
    crop: usize,
    batch: usize,
    seed: u64,
}

impl<'a> BatchStream<'a> {
    pub fn new(samples: &'a [PairedSample], crop: usize, batch: usize, seed: u64) -> Result<Self> {
        if crop == 0 || batch == 0 {
            return Err(Error::Usage("crop and batch size must be positive".into()));
        }
        if samples.len() < batch {
            return Err(Error::Usage(format!("{} samples cannot fill a batch of {}", samples.len(), batch)));
        }
        for (i, s) in samples.iter().enumerate() {
            let (w, h) = s.normal.dims();
            if s.compressed_dark.dims() != (w, h) {
                return Err(Error::Mismatch(format!("sample {} has mismatched pair extents", i)));
            }
            if crop > w || crop > h {
                return Err(Error::Usage(format!("crop {} exceeds sample {} extents {}x{}", crop, i, w, h)));
            }
        }
        Ok(BatchStream { samples, crop, batch, seed })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.samples.len() / self.batch
    }

    /// Batches of one epoch. The order and crops depend only on `(seed, epoch)`.
    pub fn epoch(&self, epoch: u64) -> EpochBatches<'_, 'a> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.shuffle(&mut rng);
        EpochBatches { stream: self, rng, order, next: 0 }
    }
}

pub struct EpochBatches<'s, 'a> {
    stream: &'s BatchStream<'a>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    next: usize,
}

impl EpochBatches<'_, '_> {
    /// Draws a crop offset for a `w×h` image, uniform over all valid positions.
    fn offset(&mut self, w: usize, h: usize) -> (usize, usize) {
        let crop = self.stream.crop;
        (self.rng.gen_range(0..=w - crop), self.rng.gen_range(0..=h - crop))
    }
}

impl Iterator for EpochBatches<'_, '_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let bs = self.stream.batch;
        if self.next + bs > self.order.len() {
            return None;
        }
        let crop = self.stream.crop;
        let mut darks: Vec<Image> = Vec::with_capacity(bs);
        let mut normals: Vec<Image> = Vec::with_capacity(bs);
        let mut crops = Vec::with_capacity(bs);
        for k in 0..bs {
            let idx = self.order[self.next + k];
            let s = &self.stream.samples[idx];
            let (w, h) = s.normal.dims();
            let (left, top) = self.offset(w, h);
            darks.push(s.compressed_dark.crop(left, top, crop, crop).expect("crop validated at construction"));
            normals.push(s.normal.crop(left, top, crop, crop).expect("crop validated at construction"));
            crops.push((idx, left, top));
        }
        self.next += bs;
        let dark = stack(&darks.iter().collect::<Vec<_>>()).expect("uniform crop extents");
        let normal = stack(&normals.iter().collect::<Vec<_>>()).expect("uniform crop extents");
        Some(Batch { dark, normal, crops })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DegradeParams, PairedSample};

    fn samples(n: usize) -> Vec<PairedSample> {
        (0..n)
            .map(|i| {
                let p = DegradeParams { gamma: 2.0, exposure: 0.3, noise_sigma: 0.0, qf: 80, seed: i as u64 };
                PairedSample::synthesize(p, 32, 32).unwrap()
            })
            .collect()
    }

    #[test]
    fn batch_shape_and_partial_drop() {
        let s = samples(7);
        let stream = BatchStream::new(&s, 16, 3, 1).unwrap();
        let batches: Vec<Batch> = stream.epoch(0).collect();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].dark.dims(), &[3, 3, 16, 16]);
        assert_eq!(batches[0].normal.dims(), &[3, 3, 16, 16]);
    }

    #[test]
    fn crops_are_aligned_between_pair_members() {
        let s = samples(2);
        let stream = BatchStream::new(&s, 8, 2, 4).unwrap();
        let b = stream.epoch(3).next().unwrap();
        for (row, &(idx, left, top)) in b.crops.iter().enumerate() {
            let want = s[idx].normal.crop(left, top, 8, 8).unwrap();
            let got = Image::batch_from_tensor(&b.normal).unwrap().remove(row);
            assert_eq!(got, want);
            let want = s[idx].compressed_dark.crop(left, top, 8, 8).unwrap();
            let got = Image::batch_from_tensor(&b.dark).unwrap().remove(row);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn oversized_crop_rejected() {
        let s = samples(2);
        assert!(matches!(BatchStream::new(&s, 40, 1, 0), Err(Error::Usage(_))));
    }
}
