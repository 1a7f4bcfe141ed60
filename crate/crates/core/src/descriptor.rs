//! JSON description of warps: named presets or sampled profiles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::equimeasurable::{build_f1, build_f2, Section5Params, DEFAULT_F2_SAMPLES};
use crate::error::{Error, Result};
use crate::warp::{WarpFunction, WarpKind};

/// `{"kind":"preset","name":...}` or `{"kind":"sampled","L":...,"points":[[y,f],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WarpDescriptor {
    Preset {
        name: String,
        /// Strip width for presets that take one.
        #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
        length: Option<f64>,
        /// `f(0)` of `exp-decay`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blend_start: Option<f64>,
        /// Samples used to build `sec5-f2`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    Sampled {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(rename = "L")]
        length: f64,
        points: Vec<[f64; 2]>,
    },
}

pub const PRESET_NAMES: [&str; 8] = [
    "flat",
    "cos1",
    "cos2",
    "exp-decay",
    "quadratic",
    "tanh",
    "sec5-f1",
    "sec5-f2",
];

impl WarpDescriptor {
    pub fn preset(name: &str) -> Self {
        WarpDescriptor::Preset {
            name: name.into(),
            length: None,
            scale: None,
            blend_start: None,
            samples: None,
        }
    }

    pub fn build(&self) -> Result<WarpFunction> {
        match self {
            WarpDescriptor::Preset {
                name,
                length,
                scale,
                blend_start,
                samples,
            } => {
                let params = Section5Params {
                    blend_start: blend_start.unwrap_or(Section5Params::default().blend_start),
                };
                let fixed_width = |n: &str| -> Result<()> {
                    if length.is_some() {
                        return Err(Error::InvalidInput(format!("preset {n} has a fixed width")));
                    }
                    Ok(())
                };
                match name.as_str() {
                    "flat" => WarpFunction::flat(length.unwrap_or(1.0)),
                    "cos1" => fixed_width(name).map(|_| WarpFunction::cos1()),
                    "cos2" => fixed_width(name).map(|_| WarpFunction::cos2()),
                    "exp-decay" => {
                        WarpFunction::exp_decay(length.unwrap_or(1.0), scale.unwrap_or(1.0))
                    }
                    "quadratic" => WarpFunction::quadratic(length.unwrap_or(0.4)),
                    "tanh" => WarpFunction::tanh_drop(length.unwrap_or(1.0)),
                    "sec5-f1" => {
                        fixed_width(name)?;
                        Ok(build_f1(params)?.warp)
                    }
                    "sec5-f2" => {
                        fixed_width(name)?;
                        build_f2(&build_f1(params)?, samples.unwrap_or(DEFAULT_F2_SAMPLES))
                    }
                    other => Err(Error::InvalidInput(format!(
                        "unknown preset {other:?}; expected one of {}",
                        PRESET_NAMES.join(", ")
                    ))),
                }
            }
            WarpDescriptor::Sampled {
                name,
                length,
                points,
            } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                WarpFunction::sampled(
                    name.clone().unwrap_or_else(|| "sampled".into()),
                    *length,
                    &pts,
                )
            }
        }
    }

    /// A preset name, or a path to a JSON file holding a descriptor.
    pub fn resolve(arg: &str) -> Result<Self> {
        if PRESET_NAMES.contains(&arg) {
            return Ok(Self::preset(arg));
        }
        let path = Path::new(arg);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            return serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("{arg}: {e}")));
        }
        Err(Error::InvalidInput(format!(
            "{arg:?} is neither a preset ({}) nor a readable file",
            PRESET_NAMES.join(", ")
        )))
    }

    /// The sampled description of a sampled warp.
    pub fn from_sampled(w: &WarpFunction) -> Option<Self> {
        match w.kind() {
            WarpKind::Sampled(s) => Some(WarpDescriptor::Sampled {
                name: Some(w.name().to_string()),
                length: w.length(),
                points: s.xs().iter().zip(s.ys()).map(|(y, f)| [*y, *f]).collect(),
            }),
            WarpKind::Analytic(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_build() {
        let d: WarpDescriptor =
            serde_json::from_str(r#"{"kind":"preset","name":"exp-decay","L":2.0}"#).unwrap();
        let w = d.build().unwrap();
        assert_eq!(w.length(), 2.0);
        assert!((w.value(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        for name in PRESET_NAMES.iter().filter(|n| **n != "sec5-f2") {
            WarpDescriptor::preset(name).build().unwrap();
        }
        assert!(WarpDescriptor::preset("nope").build().is_err());
        let bad: std::result::Result<WarpDescriptor, _> =
            serde_json::from_str(r#"{"kind":"preset","name":"flat","x":1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn sampled_round_trip() {
        let pts: Vec<[f64; 2]> = (0..=32)
            .map(|i| {
                let y = i as f64 / 32.0;
                [y, 1.0 + y * y]
            })
            .collect();
        let d = WarpDescriptor::Sampled {
            name: Some("bowl".into()),
            length: 1.0,
            points: pts,
        };
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains(r#""kind":"sampled""#) && text.contains(r#""L":1.0"#));
        let w = serde_json::from_str::<WarpDescriptor>(&text)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(WarpDescriptor::from_sampled(&w).unwrap(), d);
        assert!((w.value(0.5) - 1.25).abs() < 1e-3);
    }
}
