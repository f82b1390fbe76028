use serde::{Deserialize, Serialize};

use crate::grid::Norms;

/// One named residual check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "lossless")]
    pub sup: f64,
    #[serde(with = "lossless")]
    pub rms: f64,
    #[serde(with = "lossless")]
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    pub excluded: usize,
}

impl Check {
    pub fn new(name: impl Into<String>, norms: Norms, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            sup: norms.sup,
            rms: norms.rms,
            tolerance,
            pass: norms.sup <= tolerance,
            samples: norms.count,
            excluded: norms.excluded,
        }
    }

    /// Check over an explicit list of residual samples.
    pub fn from_samples(name: impl Into<String>, samples: impl IntoIterator<Item = f64>, tolerance: f64) -> Check {
        Check::new(name, Norms::collect(samples), tolerance)
    }

    /// Single scalar quantity compared against a bound.
    pub fn scalar(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check::from_samples(name, [value], tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub h: f64,
    pub lambda: Option<f64>,
    pub pipeline: String,
    pub input_hash: String,
}

/// Non-finite floats as the strings `"NaN"`, `"inf"`, `"-inf"`; plain
/// JSON would turn them into `null`.
pub mod lossless {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("bad float `{t}`"))),
            },
        }
    }
}

/// Named residual norms with pass/fail against their tolerances.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl ResidualReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn extend(&mut self, prefix: &str, other: ResidualReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
        self.warnings.extend(other.warnings.into_iter().map(|w| format!("{prefix}{w}")));
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn sup(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |c| c.sup)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}
