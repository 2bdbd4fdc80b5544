use super::Scalar;
use crate::error::{Error, Result};

/// Dense batch x channels x height x width tensor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![T::zero(); n * c * h * w],
        }
    }

    pub fn filled(n: usize, c: usize, h: usize, w: usize, value: T) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![value; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "{n}x{c}x{h}x{w} tensor needs {} values, got {}",
                n * c * h * w,
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn plane(&self, i: usize, c: usize) -> &[T] {
        let len = self.plane_len();
        let start = (i * self.c + c) * len;
        &self.data[start..start + len]
    }

    pub fn at(&self, i: usize, c: usize, y: usize, x: usize) -> T {
        self.data[((i * self.c + c) * self.h + y) * self.w + x]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Central `h - 2*crop` x `w - 2*crop` window of every plane.
    pub fn center_crop(&self, crop: usize) -> Self {
        if crop == 0 {
            return self.clone();
        }
        let (oh, ow) = (self.h - 2 * crop, self.w - 2 * crop);
        let mut data = Vec::with_capacity(self.n * self.c * oh * ow);
        for plane in self.data.chunks_exact(self.plane_len()) {
            for y in crop..crop + oh {
                data.extend_from_slice(&plane[y * self.w + crop..y * self.w + crop + ow]);
            }
        }
        Self {
            n: self.n,
            c: self.c,
            h: oh,
            w: ow,
            data,
        }
    }

    /// Inverse of [`center_crop`](Self::center_crop) for gradients: embeds
    /// every plane in a zero border of width `crop`.
    pub fn zero_pad(&self, crop: usize) -> Self {
        if crop == 0 {
            return self.clone();
        }
        let (oh, ow) = (self.h + 2 * crop, self.w + 2 * crop);
        let mut out = Self::zeros(self.n, self.c, oh, ow);
        for (src, dst) in self
            .data
            .chunks_exact(self.plane_len())
            .zip(out.data.chunks_exact_mut(oh * ow))
        {
            for y in 0..self.h {
                dst[(y + crop) * ow + crop..(y + crop) * ow + crop + self.w]
                    .copy_from_slice(&src[y * self.w..(y + 1) * self.w]);
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor4<U> {
        Tensor4 {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
