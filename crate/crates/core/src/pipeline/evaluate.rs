//! Per-class Jaccard reports and class pixel statistics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::loss::{intersection_union, jaccard_from_counts};
use crate::raster::{ClassLabel, LabelMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: ClassLabel,
    pub jaccard: f64,
    pub intersection: u64,
    pub union: u64,
    pub truth_pixels: u64,
    pub predicted_pixels: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassScore>,
    /// Total intersection over total union across all classes.
    pub micro_jaccard: f64,
    pub images: usize,
    pub pixels: u64,
    pub config_fingerprint: Option<String>,
    pub wall_clock_seconds: f64,
}

impl EvalReport {
    pub fn class(&self, class: ClassLabel) -> Option<&ClassScore> {
        self.classes.iter().find(|c| c.class == class)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        super::train::write_json(path.as_ref(), self)
    }
}

/// Compares predicted and true masks pairwise. Both sides of every pair
/// must have the same size and the same classes in the same order.
pub fn evaluate(pairs: &[(LabelMask, LabelMask)]) -> Result<EvalReport> {
    let started = std::time::Instant::now();
    let classes: Vec<ClassLabel> = pairs.first().map(|(_, t)| t.classes().to_vec()).unwrap_or_default();
    let mut counts = vec![(0u64, 0u64, 0u64, 0u64); classes.len()];
    let mut pixels = 0;
    for (pred, truth) in pairs {
        if pred.width() != truth.width() || pred.height() != truth.height() {
            return Err(Error::ShapeMismatch(format!(
                "prediction {}x{} vs truth {}x{}",
                pred.width(),
                pred.height(),
                truth.width(),
                truth.height()
            )));
        }
        if pred.classes() != classes.as_slice() || truth.classes() != classes.as_slice() {
            return Err(Error::ShapeMismatch("masks carry different class sets".into()));
        }
        pixels += truth.pixel_count() as u64;
        for (k, &class) in classes.iter().enumerate() {
            let (p, t) = (pred.plane(class)?, truth.plane(class)?);
            let (i, u) = intersection_union(p, t);
            let c = &mut counts[k];
            c.0 += i;
            c.1 += u;
            c.2 += t.iter().map(|&v| v as u64).sum::<u64>();
            c.3 += p.iter().map(|&v| v as u64).sum::<u64>();
        }
    }
    let (ti, tu) = counts.iter().fold((0, 0), |(a, b), c| (a + c.0, b + c.1));
    Ok(EvalReport {
        classes: classes
            .iter()
            .zip(&counts)
            .map(|(&class, &(i, u, t, p))| ClassScore {
                class,
                jaccard: jaccard_from_counts(i, u),
                intersection: i,
                union: u,
                truth_pixels: t,
                predicted_pixels: p,
            })
            .collect(),
        micro_jaccard: jaccard_from_counts(ti, tu),
        images: pairs.len(),
        pixels,
        config_fingerprint: None,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStat {
    pub class: ClassLabel,
    pub pixel_count: u64,
    pub fraction: f64,
}

/// Fraction of all pixels carrying each class, over every mask. An empty
/// set yields zeros for all classes.
pub fn class_stats(masks: &[LabelMask]) -> Vec<ClassStat> {
    let total: u64 = masks.iter().map(|m| m.pixel_count() as u64).sum();
    ClassLabel::ALL
        .iter()
        .map(|&class| {
            let pixel_count: u64 = masks
                .iter()
                .filter_map(|m| m.plane(class).ok())
                .map(|p| p.iter().map(|&v| v as u64).sum::<u64>())
                .sum();
            ClassStat {
                class,
                pixel_count,
                fraction: if total == 0 { 0.0 } else { pixel_count as f64 / total as f64 },
            }
        })
        .collect()
}

pub fn write_class_stats<W: Write>(stats: &[ClassStat], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in stats {
        wr.serialize(s)?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
