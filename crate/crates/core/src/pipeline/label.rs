use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Motor condition classes in canonical order. The discriminant is the
/// label index used everywhere else.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultClass {
    H,
    RU,
    RM,
    SW,
    VU,
    BR,
    KA,
    FB,
}

pub const NUM_CLASSES: usize = 8;

impl FaultClass {
    pub const ALL: [FaultClass; NUM_CLASSES] = [
        FaultClass::H,
        FaultClass::RU,
        FaultClass::RM,
        FaultClass::SW,
        FaultClass::VU,
        FaultClass::BR,
        FaultClass::KA,
        FaultClass::FB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Range(format!("class index {i} outside 0..{NUM_CLASSES}")))
    }

    pub fn code(self) -> &'static str {
        match self {
            FaultClass::H => "H",
            FaultClass::RU => "RU",
            FaultClass::RM => "RM",
            FaultClass::SW => "SW",
            FaultClass::VU => "VU",
            FaultClass::BR => "BR",
            FaultClass::KA => "KA",
            FaultClass::FB => "FB",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FaultClass::H => "healthy",
            FaultClass::RU => "rotor unbalance",
            FaultClass::RM => "rotor misalignment",
            FaultClass::SW => "stator winding fault",
            FaultClass::VU => "voltage unbalance",
            FaultClass::BR => "bowed rotor",
            FaultClass::KA => "broken rotor bars",
            FaultClass::FB => "faulty bearing",
        }
    }

    /// The two filename letters, e.g. `R-U`.
    pub fn letters(self) -> (char, char) {
        match self {
            FaultClass::H => ('H', 'H'),
            _ => {
                let mut c = self.code().chars();
                (c.next().unwrap(), c.next().unwrap())
            }
        }
    }

    fn from_letters(a: &str, b: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| {
            let (x, y) = c.letters();
            a.len() == 1 && b.len() == 1 && a.starts_with(x) && b.starts_with(y)
        })
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Speed settings 1..=4 in Hz.
pub const SPEEDS_HZ: [u32; 4] = [15, 30, 45, 60];

/// Decoded `{L}-{L}-{speed}-{load}` recording name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordingLabel {
    pub class: FaultClass,
    pub speed_hz: u32,
    pub loaded: bool,
}

impl RecordingLabel {
    /// Canonical file stem, the inverse of [`parse_label`].
    pub fn stem(&self) -> String {
        let (a, b) = self.class.letters();
        let setting = SPEEDS_HZ.iter().position(|&s| s == self.speed_hz).map_or(0, |i| i + 1);
        format!("{a}-{b}-{setting}-{}", u8::from(self.loaded))
    }
}

/// Parses a recording name such as `R-U-1-0` or `data/H-H-4-1.csv`.
/// Directories and the extension are ignored.
pub fn parse_label(filename: &str) -> Result<RecordingLabel> {
    let stem = Path::new(filename)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(filename);
    let tokens: Vec<&str> = stem.split('-').collect();
    if tokens.len() != 4 {
        return Err(Error::Parse(format!(
            "'{stem}': expected four '-'-separated tokens, found {}",
            tokens.len()
        )));
    }
    let class = FaultClass::from_letters(tokens[0], tokens[1]).ok_or_else(|| {
        Error::Parse(format!(
            "'{stem}': unknown class letters '{}-{}'",
            tokens[0], tokens[1]
        ))
    })?;
    let speed_hz = match tokens[2] {
        "1" => 15,
        "2" => 30,
        "3" => 45,
        "4" => 60,
        other => {
            return Err(Error::Parse(format!(
                "'{stem}': speed token '{other}' must be 1, 2, 3 or 4"
            )))
        }
    };
    let loaded = match tokens[3] {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::Parse(format!(
                "'{stem}': load token '{other}' must be 0 or 1"
            )))
        }
    };
    Ok(RecordingLabel {
        class,
        speed_hz,
        loaded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_names() {
        assert_eq!(
            parse_label("R-U-1-0").unwrap(),
            RecordingLabel {
                class: FaultClass::RU,
                speed_hz: 15,
                loaded: false
            }
        );
        assert_eq!(
            parse_label("H-H-4-1").unwrap(),
            RecordingLabel {
                class: FaultClass::H,
                speed_hz: 60,
                loaded: true
            }
        );
        assert_eq!(parse_label("/tmp/x/F-B-2-1.csv").unwrap().class, FaultClass::FB);
    }

    #[test]
    fn errors_name_the_token() {
        let err = parse_label("X-Z-5-0").unwrap_err().to_string();
        assert!(err.contains("X-Z"), "{err}");
        let err = parse_label("R-U-5-0").unwrap_err().to_string();
        assert!(err.contains("'5'"), "{err}");
        let err = parse_label("R-U-1-2").unwrap_err().to_string();
        assert!(err.contains("'2'"), "{err}");
        assert!(parse_label("R-U-1").is_err());
        assert!(parse_label("H-U-1-0").is_err());
    }

    #[test]
    fn stems_round_trip() {
        for class in FaultClass::ALL {
            for speed_hz in SPEEDS_HZ {
                for loaded in [false, true] {
                    let label = RecordingLabel {
                        class,
                        speed_hz,
                        loaded,
                    };
                    assert_eq!(parse_label(&label.stem()).unwrap(), label);
                }
            }
        }
    }

    #[test]
    fn indices_are_canonical() {
        let codes: Vec<&str> = FaultClass::ALL.iter().map(|c| c.code()).collect();
        assert_eq!(codes, ["H", "RU", "RM", "SW", "VU", "BR", "KA", "FB"]);
        for (i, c) in FaultClass::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(FaultClass::from_index(i).unwrap(), *c);
        }
        assert!(FaultClass::from_index(8).is_err());
    }
}
