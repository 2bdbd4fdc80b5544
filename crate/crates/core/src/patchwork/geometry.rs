use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::MultispectralRaster;

/// Input window size fed to the network and the central output window it
/// predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchGeometry {
    pub input_size: usize,
    pub output_size: usize,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        Self {
            input_size: 112,
            output_size: 80,
        }
    }
}

impl PatchGeometry {
    pub fn new(input_size: usize, output_size: usize) -> Result<Self> {
        let g = Self {
            input_size,
            output_size,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_size == 0 || self.input_size <= self.output_size {
            return Err(Error::Config(format!(
                "patch input size {} must exceed output size {} (> 0)",
                self.input_size, self.output_size
            )));
        }
        if self.input_size % 2 != 0 || self.output_size % 2 != 0 {
            return Err(Error::Config(format!(
                "patch sizes {}/{} must both be even",
                self.input_size, self.output_size
            )));
        }
        Ok(())
    }

    pub fn margin(&self) -> usize {
        (self.input_size - self.output_size) / 2
    }
}

/// A stack of equally sized `f32` planes, the working form of a raster
/// inside the patch machinery.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarImage {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<f32>>,
}

impl PlanarImage {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f32>>) -> Result<Self> {
        if let Some(p) = planes.iter().find(|p| p.len() != width * height) {
            return Err(Error::ShapeMismatch(format!(
                "plane of {} values for a {width}x{height} image",
                p.len()
            )));
        }
        Ok(Self { width, height, planes })
    }

    pub fn from_raster(r: &MultispectralRaster) -> Self {
        Self {
            width: r.width(),
            height: r.height(),
            planes: r.planes_f32(),
        }
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn pad(&self, margin: usize) -> Result<Self> {
        let planes = self
            .planes
            .iter()
            .map(|p| super::reflect_pad_plane(p, self.width, self.height, margin))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width: self.width + 2 * margin,
            height: self.height + 2 * margin,
            planes,
        })
    }

    /// Copies the `size x size` window at `(x, y)` of every plane into `dst`
    /// (channel-major).
    pub fn copy_window(&self, x: usize, y: usize, size: usize, dst: &mut [f32]) {
        for (plane, out) in self.planes.iter().zip(dst.chunks_exact_mut(size * size)) {
            for (r, out_row) in out.chunks_exact_mut(size).enumerate() {
                let start = (y + r) * self.width + x;
                out_row.copy_from_slice(&plane[start..start + size]);
            }
        }
    }
}
