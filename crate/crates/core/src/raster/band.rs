use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Name of a single raster band.
///
/// Sensor bands follow the WorldView-3 layout: eight multispectral bands
/// (coastal through NIR2), eight short-wave infrared bands and the
/// panchromatic band. Derived channels such as reflectance indices carry
/// [`BandName::Index`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BandName {
    Coastal,
    Blue,
    Green,
    Yellow,
    Red,
    RedEdge,
    Nir1,
    Nir2,
    /// Short-wave infrared band 1..=8.
    Swir(u8),
    Pan,
    Index(String),
}

impl BandName {
    /// The eight multispectral (M-band) channels in sensor order.
    pub const M_BANDS: [BandName; 8] = [
        BandName::Coastal,
        BandName::Blue,
        BandName::Green,
        BandName::Yellow,
        BandName::Red,
        BandName::RedEdge,
        BandName::Nir1,
        BandName::Nir2,
    ];

    pub fn swir_bands() -> Vec<BandName> {
        (1..=8).map(BandName::Swir).collect()
    }

    pub fn index(name: impl Into<String>) -> Self {
        BandName::Index(name.into())
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandName::Coastal => f.write_str("Coastal"),
            BandName::Blue => f.write_str("Blue"),
            BandName::Green => f.write_str("Green"),
            BandName::Yellow => f.write_str("Yellow"),
            BandName::Red => f.write_str("Red"),
            BandName::RedEdge => f.write_str("RedEdge"),
            BandName::Nir1 => f.write_str("NIR1"),
            BandName::Nir2 => f.write_str("NIR2"),
            BandName::Swir(i) => write!(f, "SWIR{i}"),
            BandName::Pan => f.write_str("Pan"),
            BandName::Index(name) => write!(f, "index:{name}"),
        }
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let band = match s {
            "Coastal" => BandName::Coastal,
            "Blue" => BandName::Blue,
            "Green" => BandName::Green,
            "Yellow" => BandName::Yellow,
            "Red" => BandName::Red,
            "RedEdge" => BandName::RedEdge,
            "NIR1" => BandName::Nir1,
            "NIR2" => BandName::Nir2,
            "Pan" => BandName::Pan,
            _ => {
                if let Some(name) = s.strip_prefix("index:") {
                    if name.is_empty() {
                        return Err(Error::MalformedHeader("empty index band name".into()));
                    }
                    BandName::Index(name.to_string())
                } else if let Some(n) = s.strip_prefix("SWIR") {
                    match n.parse::<u8>() {
                        Ok(i @ 1..=8) => BandName::Swir(i),
                        _ => return Err(Error::MalformedHeader(format!("unknown band `{s}`"))),
                    }
                } else {
                    return Err(Error::MalformedHeader(format!("unknown band `{s}`")));
                }
            }
        };
        Ok(band)
    }
}

impl Serialize for BandName {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BandName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The ten target classes, with stable ids 0..=9.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Buildings,
    Structures,
    Road,
    Track,
    Trees,
    Crops,
    Waterway,
    StandingWater,
    VehicleLarge,
    VehicleSmall,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 10] = [
        ClassLabel::Buildings,
        ClassLabel::Structures,
        ClassLabel::Road,
        ClassLabel::Track,
        ClassLabel::Trees,
        ClassLabel::Crops,
        ClassLabel::Waterway,
        ClassLabel::StandingWater,
        ClassLabel::VehicleLarge,
        ClassLabel::VehicleSmall,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Buildings => "Buildings",
            ClassLabel::Structures => "Structures",
            ClassLabel::Road => "Road",
            ClassLabel::Track => "Track",
            ClassLabel::Trees => "Trees",
            ClassLabel::Crops => "Crops",
            ClassLabel::Waterway => "Waterway",
            ClassLabel::StandingWater => "StandingWater",
            ClassLabel::VehicleLarge => "VehicleLarge",
            ClassLabel::VehicleSmall => "VehicleSmall",
        }
    }

    pub fn is_water(self) -> bool {
        matches!(self, ClassLabel::Waterway | ClassLabel::StandingWater)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    /// Accepts the canonical name in any case, with or without `-`/`_`
    /// separators (`standing-water`, `STANDING_WATER`, `StandingWater`).
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_' && *c != ' ')
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().to_lowercase() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class `{s}`")))
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_names_round_trip_through_text() {
        let mut all: Vec<BandName> = BandName::M_BANDS.to_vec();
        all.extend(BandName::swir_bands());
        all.push(BandName::Pan);
        all.push(BandName::index("ndwi"));
        for band in all {
            let text = band.to_string();
            assert_eq!(text.parse::<BandName>().unwrap(), band);
        }
    }

    #[test]
    fn rejects_unknown_bands() {
        assert!("SWIR9".parse::<BandName>().is_err());
        assert!("SWIR0".parse::<BandName>().is_err());
        assert!("Purple".parse::<BandName>().is_err());
        assert!("index:".parse::<BandName>().is_err());
    }

    #[test]
    fn class_ids_are_stable() {
        assert_eq!(ClassLabel::ALL.len(), 10);
        for (i, class) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(class.id() as usize, i);
            assert_eq!(ClassLabel::from_id(i as u8), Some(*class));
        }
        assert_eq!(ClassLabel::from_id(10), None);
        assert_eq!(ClassLabel::Buildings.id(), 0);
        assert_eq!(ClassLabel::VehicleSmall.id(), 9);
    }

    #[test]
    fn class_parsing_is_forgiving() {
        assert_eq!("standing-water".parse::<ClassLabel>().unwrap(), ClassLabel::StandingWater);
        assert_eq!("BUILDINGS".parse::<ClassLabel>().unwrap(), ClassLabel::Buildings);
        assert!("lakes".parse::<ClassLabel>().is_err());
    }
}
