//! Random patch sampling with dihedral augmentation.
//!
//! Every patch draws from its own ChaCha8 stream selected by the patch
//! index, so a batch is the same no matter how many workers build it or in
//! which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dih4, PatchGeometry, PlanarImage};
use crate::error::{Error, Result};
use crate::neuralnet::Tensor4;
use crate::raster::{BinaryMask, ClassLabel, LabelMask, MultispectralRaster};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOrigin {
    /// Index of the source image.
    pub image: usize,
    /// Top-left corner of the input window.
    pub x: usize,
    pub y: usize,
    pub transform: Dih4,
}

/// Co-registered input patches and their center-cropped targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchBatch {
    /// `n x channels x input x input`.
    pub inputs: Tensor4<f32>,
    /// `n x 1 x target x target`.
    pub targets: Tensor4<f32>,
    pub origins: Vec<PatchOrigin>,
}

impl PatchBatch {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

pub struct PatchSampler<'a> {
    sources: Vec<(&'a PlanarImage, &'a BinaryMask)>,
    geom: PatchGeometry,
    target_size: usize,
    seed: u64,
    augment: bool,
}

impl<'a> PatchSampler<'a> {
    pub fn new(sources: Vec<(&'a PlanarImage, &'a BinaryMask)>, geom: PatchGeometry, seed: u64) -> Result<Self> {
        geom.validate()?;
        if sources.is_empty() {
            return Err(Error::InvalidArgument("no images to sample from".into()));
        }
        let channels = sources[0].0.channels();
        for (img, mask) in &sources {
            if img.width < geom.input_size || img.height < geom.input_size {
                return Err(Error::ImageTooSmall {
                    width: img.width,
                    height: img.height,
                    required: geom.input_size,
                });
            }
            if mask.width() != img.width || mask.height() != img.height {
                return Err(Error::ShapeMismatch(format!(
                    "mask {}x{} is not aligned to image {}x{}",
                    mask.width(),
                    mask.height(),
                    img.width,
                    img.height
                )));
            }
            if img.channels() != channels {
                return Err(Error::BandMismatch(format!(
                    "images have {} and {} channels",
                    channels,
                    img.channels()
                )));
            }
        }
        Ok(Self {
            sources,
            geom,
            target_size: geom.output_size,
            seed,
            augment: true,
        })
    }

    pub fn with_augmentation(mut self, augment: bool) -> Self {
        self.augment = augment;
        self
    }

    /// Targets cover the whole input window instead of its center.
    pub fn with_full_targets(mut self) -> Self {
        self.target_size = self.geom.input_size;
        self
    }

    pub fn channels(&self) -> usize {
        self.sources[0].0.channels()
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn origin(&self, index: u64) -> PatchOrigin {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let image = rng.random_range(0..self.sources.len());
        let (img, _) = self.sources[image];
        let size = self.geom.input_size;
        let x = rng.random_range(0..=img.width - size);
        let y = rng.random_range(0..=img.height - size);
        let transform = if self.augment {
            Dih4::ALL[rng.random_range(0..Dih4::ALL.len())]
        } else {
            Dih4::Identity
        };
        PatchOrigin { image, x, y, transform }
    }

    fn fill(&self, origin: PatchOrigin, input: &mut [f32], target: &mut [f32]) {
        let (img, mask) = self.sources[origin.image];
        let n = self.geom.input_size;
        img.copy_window(origin.x, origin.y, n, input);
        if origin.transform != Dih4::Identity {
            for plane in input.chunks_exact_mut(n * n) {
                let t = origin.transform.apply_plane(plane, n);
                plane.copy_from_slice(&t);
            }
        }
        let t = self.target_size;
        let off = (n - t) / 2;
        let mut raw = Vec::with_capacity(t * t);
        for r in 0..t {
            let row = (origin.y + off + r) * img.width + origin.x + off;
            raw.extend(mask.data()[row..row + t].iter().map(|&v| v as f32));
        }
        target.copy_from_slice(&origin.transform.apply_plane(&raw, t));
    }

    /// Patches `first .. first + n` of this sampler's sequence.
    pub fn batch(&self, first: u64, n: usize) -> PatchBatch {
        let size = self.geom.input_size;
        let t = self.target_size;
        let c = self.channels();
        let origins: Vec<PatchOrigin> = (0..n as u64).map(|i| self.origin(first + i)).collect();
        let mut inputs = Tensor4::zeros(n, c, size, size);
        let mut targets = Tensor4::zeros(n, 1, t, t);
        if n > 0 {
            inputs
                .data
                .par_chunks_mut(c * size * size)
                .zip(targets.data.par_chunks_mut(t * t))
                .zip(origins.par_iter())
                .for_each(|((input, target), &o)| self.fill(o, input, target));
        }
        PatchBatch {
            inputs,
            targets,
            origins,
        }
    }
}

/// Samples `n` augmented patches of one class from a single image.
pub fn sample_patches(
    image: &MultispectralRaster,
    mask: &LabelMask,
    class: ClassLabel,
    geom: PatchGeometry,
    n: usize,
    seed: u64,
) -> Result<PatchBatch> {
    let planes = PlanarImage::from_raster(image);
    let target = mask.binary(class)?;
    let sampler = PatchSampler::new(vec![(&planes, &target)], geom, seed)?;
    Ok(sampler.batch(0, n))
}
