//! Synthetic multispectral scenes with exact ground truth.
//!
//! Each scene is painted as a map of surfaces (soil, crops, road, river,
//! ponds, trees, buildings), each with a fixed reflectance signature. A
//! smooth multiplicative illumination field and small additive noise are
//! applied before quantizing to 11 bits. Masks mark the visible surface of
//! every pixel, so class planes never overlap.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    load_mask, load_raster, save_mask, save_raster, BandName, BinaryMask, ClassLabel, LabelMask, MultispectralRaster,
    RasterData,
};

pub const SYNTH_BIT_DEPTH: u8 = 11;
pub const MANIFEST_NAME: &str = "manifest.json";
/// Every fifth scene (index % 5 == 4) is held out for validation.
pub const VALIDATION_EVERY: usize = 5;
/// Half-width of the additive noise, in reflectance units.
pub const NOISE: f64 = 0.008;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Soil,
    Crops,
    Road,
    River,
    Pond,
    Tree,
    Building,
}

impl Surface {
    /// Reflectance in Coastal, Blue, Green, Yellow, Red, RedEdge, NIR1,
    /// NIR2 and the first SWIR band.
    pub fn signature(self) -> [f64; 9] {
        match self {
            Surface::Soil => [0.20, 0.22, 0.25, 0.28, 0.30, 0.33, 0.38, 0.40, 0.45],
            Surface::Crops => [0.06, 0.07, 0.18, 0.14, 0.10, 0.32, 0.50, 0.48, 0.30],
            Surface::Road => [0.17, 0.17, 0.18, 0.19, 0.20, 0.21, 0.22, 0.22, 0.24],
            Surface::River | Surface::Pond => [0.30, 0.32, 0.35, 0.20, 0.15, 0.10, 0.04, 0.03, 0.02],
            Surface::Tree => [0.04, 0.05, 0.15, 0.10, 0.06, 0.30, 0.60, 0.58, 0.25],
            Surface::Building => [0.50, 0.52, 0.55, 0.57, 0.58, 0.60, 0.66, 0.66, 0.62],
        }
    }

    /// Reflectance in all 16 scene bands (8 M-bands then SWIR1..8).
    pub fn reflectance(self) -> [f64; 16] {
        let s = self.signature();
        let mut out = [0.0; 16];
        out[..8].copy_from_slice(&s[..8]);
        let water = matches!(self, Surface::River | Surface::Pond);
        for k in 0..8 {
            out[8 + k] = if water { s[8] } else { s[8] * (1.0 - 0.03 * k as f64) };
        }
        out
    }

    pub fn class(self) -> Option<ClassLabel> {
        match self {
            Surface::Soil => None,
            Surface::Crops => Some(ClassLabel::Crops),
            Surface::Road => Some(ClassLabel::Road),
            Surface::River => Some(ClassLabel::Waterway),
            Surface::Pond => Some(ClassLabel::StandingWater),
            Surface::Tree => Some(ClassLabel::Trees),
            Surface::Building => Some(ClassLabel::Buildings),
        }
    }

    fn is_water(self) -> bool {
        matches!(self, Surface::River | Surface::Pond)
    }
}

pub fn scene_bands() -> Vec<BandName> {
    let mut bands = BandName::M_BANDS.to_vec();
    bands.extend(BandName::swir_bands());
    bands
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub scenes: usize,
    /// Scenes are `size x size` pixels.
    pub size: usize,
    /// Multiplies the number of objects per scene.
    pub density: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: 20,
            size: 512,
            density: 1.0,
        }
    }
}

/// One generated scene.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: MultispectralRaster,
    pub pan: MultispectralRaster,
    pub mask: LabelMask,
    pub surfaces: Vec<Surface>,
}

struct Canvas {
    size: usize,
    surf: Vec<Surface>,
}

impl Canvas {
    fn disc_touches(&self, cx: f64, cy: f64, r: f64, pred: impl Fn(Surface) -> bool) -> bool {
        let n = self.size as isize;
        let (x0, x1) = ((cx - r).floor() as isize, (cx + r).ceil() as isize);
        let (y0, y1) = ((cy - r).floor() as isize, (cy + r).ceil() as isize);
        for y in y0.max(0)..=y1.min(n - 1) {
            for x in x0.max(0)..=x1.min(n - 1) {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r && pred(self.surf[y as usize * self.size + x as usize]) {
                    return true;
                }
            }
        }
        false
    }

    fn paint_disc(&mut self, cx: f64, cy: f64, r: f64, s: Surface) {
        let n = self.size as isize;
        for y in ((cy - r).floor() as isize).max(0)..=((cy + r).ceil() as isize).min(n - 1) {
            for x in ((cx - r).floor() as isize).max(0)..=((cx + r).ceil() as isize).min(n - 1) {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.surf[y as usize * self.size + x as usize] = s;
                }
            }
        }
    }

    fn paint_where(&mut self, s: Surface, inside: impl Fn(f64, f64) -> bool) {
        for y in 0..self.size {
            for x in 0..self.size {
                if inside(x as f64, y as f64) {
                    self.surf[y * self.size + x] = s;
                }
            }
        }
    }
}

fn scaled_count(base: f64, size: usize, density: f64) -> usize {
    (base * density * (size * size) as f64 / (512.0 * 512.0)).round() as usize
}

/// Paints the surface map of one scene.
fn layout(rng: &mut ChaCha8Rng, size: usize, density: f64) -> Vec<Surface> {
    let n = size as f64;
    let mut c = Canvas {
        size,
        surf: vec![Surface::Soil; size * size],
    };

    for _ in 0..scaled_count(3.0, size, density).max(1) {
        let w = rng.random_range(0.12..0.3) * n;
        let h = rng.random_range(0.12..0.3) * n;
        let x0 = rng.random_range(0.0..n - w);
        let y0 = rng.random_range(0.0..n - h);
        c.paint_where(Surface::Crops, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h);
    }

    for _ in 0..rng.random_range(1..=2) {
        let (px, py) = (rng.random_range(0.2..0.8) * n, rng.random_range(0.2..0.8) * n);
        let angle = rng.random_range(0.0..TAU / 2.0);
        let (nx, ny) = (-angle.sin(), angle.cos());
        c.paint_where(Surface::Road, |x, y| ((x - px) * nx + (y - py) * ny).abs() <= 3.0);
    }

    let vertical = rng.random_bool(0.5);
    let center = rng.random_range(0.3..0.7) * n;
    let amplitude = rng.random_range(0.05..0.12) * n;
    let wavelength = rng.random_range(0.5..1.0) * n;
    let phase = rng.random_range(0.0..TAU);
    let half = rng.random_range(12..=16) as f64 / 2.0;
    c.paint_where(Surface::River, |x, y| {
        let (along, across) = if vertical { (y, x) } else { (x, y) };
        (across - (center + amplitude * (TAU * along / wavelength + phase).sin())).abs() <= half
    });

    let place = |c: &mut Canvas,
                 rng: &mut ChaCha8Rng,
                 count: usize,
                 radii: (u32, u32),
                 buffer: f64,
                 s: Surface| {
        let mut placed = 0;
        for _ in 0..count * 20 {
            if placed == count {
                break;
            }
            let r = rng.random_range(radii.0..=radii.1) as f64;
            let cx = rng.random_range(r..n - r);
            let cy = rng.random_range(r..n - r);
            if c.disc_touches(cx, cy, r + buffer, Surface::is_water) {
                continue;
            }
            c.paint_disc(cx, cy, r, s);
            placed += 1;
        }
    };
    place(&mut c, rng, scaled_count(4.0, size, density).max(1), (4, 9), 3.0, Surface::Pond);
    place(&mut c, rng, scaled_count(25.0, size, density), (3, 7), 2.0, Surface::Tree);
    place(&mut c, rng, scaled_count(40.0, size, density).max(1), (6, 14), 2.0, Surface::Building);
    c.surf
}

/// Generates scene `index` of the sequence for `seed`.
pub fn generate_scene(seed: u64, index: u64, size: usize, density: f64) -> Result<Scene> {
    if size < 32 {
        return Err(Error::InvalidArgument(format!("scene size {size} is too small (minimum 32)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let surfaces = layout(&mut rng, size, density);

    let n = size as f64;
    let (fx, fy) = (TAU / (rng.random_range(0.6..1.6) * n), TAU / (rng.random_range(0.6..1.6) * n));
    let (phx, phy) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let max_dn = ((1u32 << SYNTH_BIT_DEPTH) - 1) as f64;
    let npx = size * size;
    let mut data = vec![0u16; 16 * npx];
    let mut pan = vec![0u16; npx];
    for (p, &s) in surfaces.iter().enumerate() {
        let (x, y) = ((p % size) as f64, (p / size) as f64);
        let light = 1.0 + 0.1 * (fx * x + phx).sin() * (fy * y + phy).sin();
        let texture = match s {
            Surface::Crops => 1.0 + 0.04 * (y * 0.9).sin(),
            _ => 1.0,
        };
        let refl = s.reflectance();
        let mut pan_sum = 0.0;
        for (b, &r) in refl.iter().enumerate() {
            let v = (r * light * texture + rng.random_range(-NOISE..NOISE)).clamp(0.0, 1.0);
            if (1..=5).contains(&b) {
                pan_sum += v;
            }
            data[b * npx + p] = (v * max_dn).round() as u16;
        }
        pan[p] = (pan_sum / 5.0 * max_dn).round() as u16;
    }
    let image = MultispectralRaster::new(size, size, scene_bands(), SYNTH_BIT_DEPTH, RasterData::U16(data))?;
    let pan = MultispectralRaster::new(size, size, vec![BandName::Pan], SYNTH_BIT_DEPTH, RasterData::U16(pan))?;
    let planes = ClassLabel::ALL
        .iter()
        .map(|&class| {
            let plane = BinaryMask::new(
                size,
                size,
                surfaces.iter().map(|s| (s.class() == Some(class)) as u8).collect(),
            )?;
            Ok((class, plane))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        image,
        pan,
        mask: LabelMask::from_planes(planes)?,
        surfaces,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub image: String,
    pub pan: String,
    pub mask: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u64,
    pub seed: u64,
    pub scene_size: usize,
    pub density: f64,
    pub bands: Vec<BandName>,
    pub bit_depth: u8,
    pub scenes: Vec<SceneEntry>,
}

/// Writes `cfg.scenes` scenes and a manifest into `dir`.
pub fn synth_generate(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut scenes = Vec::with_capacity(cfg.scenes);
    for i in 0..cfg.scenes {
        let scene = generate_scene(cfg.seed, i as u64, cfg.size, cfg.density)?;
        let id = format!("scene_{i:03}");
        let entry = SceneEntry {
            image: format!("{id}.msr"),
            pan: format!("{id}_pan.msr"),
            mask: format!("{id}_mask.msr"),
            split: if i % VALIDATION_EVERY == VALIDATION_EVERY - 1 {
                Split::Validation
            } else {
                Split::Train
            },
            id,
        };
        save_raster(&scene.image, dir.join(&entry.image))?;
        save_raster(&scene.pan, dir.join(&entry.pan))?;
        save_mask(&scene.mask, dir.join(&entry.mask))?;
        scenes.push(entry);
    }
    let manifest = Manifest {
        version: 1,
        seed: cfg.seed,
        scene_size: cfg.size,
        density: cfg.density,
        bands: scene_bands(),
        bit_depth: SYNTH_BIT_DEPTH,
        scenes,
    };
    let path = dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// A dataset directory with its manifest.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(format!("{}: {e}", path.display())))?;
        Ok(Self { dir, manifest })
    }

    pub fn entries(&self, split: Option<Split>) -> impl Iterator<Item = &SceneEntry> {
        self.manifest
            .scenes
            .iter()
            .filter(move |e| split.is_none_or(|s| e.split == s))
    }

    pub fn load_image(&self, e: &SceneEntry) -> Result<MultispectralRaster> {
        load_raster(self.dir.join(&e.image))
    }

    pub fn load_pan(&self, e: &SceneEntry) -> Result<MultispectralRaster> {
        load_raster(self.dir.join(&e.pan))
    }

    pub fn load_mask(&self, e: &SceneEntry) -> Result<LabelMask> {
        load_mask(self.dir.join(&e.mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene(3, 1, 96, 1.0).unwrap();
        let b = generate_scene(3, 1, 96, 1.0).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.mask, b.mask);
        let c = generate_scene(3, 2, 96, 1.0).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn classes_are_exclusive_and_water_present() {
        let s = generate_scene(0, 0, 256, 1.0).unwrap();
        let planes: Vec<&[u8]> = ClassLabel::ALL.iter().map(|&c| s.mask.plane(c).unwrap()).collect();
        for p in 0..256 * 256 {
            assert!(planes.iter().map(|pl| pl[p] as u32).sum::<u32>() <= 1);
        }
        assert!(s.mask.binary(ClassLabel::Waterway).unwrap().count() > 1000);
        assert!(s.mask.binary(ClassLabel::Buildings).unwrap().count() > 0);
    }
}
