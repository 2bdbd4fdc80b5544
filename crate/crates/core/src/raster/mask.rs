use super::ClassLabel;
use crate::error::{Error, Result};

/// Single-plane 0/1 mask aligned to an image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} mask needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(&v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::ValueOutOfRange {
                value: v as u64,
                bit_depth: 1,
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Multi-hot class mask: one 0/1 plane per class. A pixel may carry several
/// classes at once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    classes: Vec<ClassLabel>,
    data: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, classes: Vec<ClassLabel>, data: Vec<u8>) -> Result<Self> {
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::InvalidArgument(format!("class {c} listed twice")));
            }
        }
        let expected = width * height * classes.len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "label mask needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(&v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::ValueOutOfRange {
                value: v as u64,
                bit_depth: 1,
            });
        }
        Ok(Self {
            width,
            height,
            classes,
            data,
        })
    }

    pub fn empty(width: usize, height: usize, classes: Vec<ClassLabel>) -> Self {
        let n = width * height * classes.len();
        Self {
            width,
            height,
            classes,
            data: vec![0; n],
        }
    }

    /// Assembles a mask from per-class planes.
    pub fn from_planes(planes: Vec<(ClassLabel, BinaryMask)>) -> Result<Self> {
        let (width, height) = planes
            .first()
            .map(|(_, m)| (m.width, m.height))
            .ok_or_else(|| Error::InvalidArgument("no class planes".into()))?;
        let mut classes = Vec::with_capacity(planes.len());
        let mut data = Vec::with_capacity(width * height * planes.len());
        for (class, plane) in planes {
            if plane.width != width || plane.height != height {
                return Err(Error::ShapeMismatch("class planes differ in size".into()));
            }
            classes.push(class);
            data.extend_from_slice(&plane.data);
        }
        Self::new(width, height, classes, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    fn class_slot(&self, class: ClassLabel) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::InvalidArgument(format!("mask has no plane for class {class}")))
    }

    pub fn plane(&self, class: ClassLabel) -> Result<&[u8]> {
        let n = self.pixel_count();
        let i = self.class_slot(class)?;
        Ok(&self.data[i * n..(i + 1) * n])
    }

    pub fn plane_mut(&mut self, class: ClassLabel) -> Result<&mut [u8]> {
        let n = self.pixel_count();
        let i = self.class_slot(class)?;
        Ok(&mut self.data[i * n..(i + 1) * n])
    }

    pub fn binary(&self, class: ClassLabel) -> Result<BinaryMask> {
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self.plane(class)?.to_vec(),
        })
    }
}
