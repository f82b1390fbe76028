//! Run configuration: a flat `key = value` file plus overrides.
//!
//! Keys:
//!
//! | key            | value                                   | default          |
//! |----------------|-----------------------------------------|------------------|
//! | `pipeline`     | `twoplane`, `counterexample`, `obstacle`, `verify` | `twoplane` |
//! | `h`            | grid spacing, decimal or `1/n`          | `1/128`          |
//! | `window`       | `x0,x1,y0,y1`                           | `-1,1,-1,1`      |
//! | `lambda_plus`  | `Λ⁺ > 0`                                | `4`              |
//! | `lambda_minus` | `Λ⁻ > 0`                                | `1`              |
//! | `K`            | JSON list of `[a, b]` pairs             | `[[-0.5,0.5]]`   |
//! | `obstacle`     | obstacle data tag                       | `radial:0.5`     |
//! | `input`        | directory of an earlier run (`verify`)  |                  |
//! | `out`          | output directory                        | `out`            |
//! | `formats`      | subset of `csv,json,svg`                | `csv,json,svg`   |
//! | `tol.<check>`  | tolerance of a named check, `> 0`       | pipeline default |
//!
//! `#` starts a comment. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::export::Format;
use crate::counterexample::IntervalUnion;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::report::ResidualReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    TwoPlane,
    Counterexample,
    Obstacle,
    Verify,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::TwoPlane => "twoplane",
            Pipeline::Counterexample => "counterexample",
            Pipeline::Obstacle => "obstacle",
            Pipeline::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Result<Pipeline> {
        match s.trim() {
            "twoplane" => Ok(Pipeline::TwoPlane),
            "counterexample" => Ok(Pipeline::Counterexample),
            "obstacle" => Ok(Pipeline::Obstacle),
            "verify" => Ok(Pipeline::Verify),
            other => Err(Error::input(format!("unknown pipeline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub h: f64,
    pub window: [f64; 4],
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub k: String,
    pub obstacle: String,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: Pipeline::TwoPlane,
            h: 1.0 / 128.0,
            window: [-1.0, 1.0, -1.0, 1.0],
            lambda_plus: 4.0,
            lambda_minus: 1.0,
            k: "[[-0.5,0.5]]".into(),
            obstacle: "radial:0.5".into(),
            input: None,
            out: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
            tolerances: BTreeMap::new(),
        }
    }
}

fn parse_number(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| Error::input(format!("`{key}`: bad number `{v}`")))?;
            let b: f64 = b.trim().parse().map_err(|_| Error::input(format!("`{key}`: bad number `{v}`")))?;
            a / b
        }
        None => v.parse().map_err(|_| Error::input(format!("`{key}`: bad number `{v}`")))?,
    };
    if !x.is_finite() {
        return Err(Error::input(format!("`{key}` must be finite")));
    }
    Ok(x)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::input(format!("config line {}: expected `key = value`", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "pipeline" => self.pipeline = Pipeline::parse(value)?,
            "h" => self.h = parse_number(key, value)?,
            "window" => {
                let v: Vec<f64> = value.split(',').map(|s| parse_number(key, s)).collect::<Result<_>>()?;
                self.window = v.try_into().map_err(|_| Error::input("`window` needs four numbers x0,x1,y0,y1"))?;
            }
            "lambda_plus" => self.lambda_plus = parse_number(key, value)?,
            "lambda_minus" => self.lambda_minus = parse_number(key, value)?,
            "K" => self.k = value.to_string(),
            "obstacle" => self.obstacle = value.to_string(),
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "formats" => {
                let mut f: Vec<Format> = value.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
                f.sort();
                f.dedup();
                self.formats = f;
            }
            _ => match key.strip_prefix("tol.") {
                Some(name) if !name.is_empty() => {
                    self.tolerances.insert(name.to_string(), parse_number(key, value)?);
                }
                _ => return Err(Error::input(format!("unknown config key `{key}`"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::input("`h` must be positive"));
        }
        let [x0, x1, y0, y1] = self.window;
        if !(x1 - x0 >= 2.0 * self.h && y1 - y0 >= 2.0 * self.h) {
            return Err(Error::input("`window` must span at least two cells in each direction"));
        }
        if !(self.lambda_plus > 0.0 && self.lambda_minus > 0.0) {
            return Err(Error::input("`lambda_plus` and `lambda_minus` must be positive"));
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::input(format!("tolerance `tol.{k}` = {v} must be positive")));
        }
        match self.pipeline {
            Pipeline::Counterexample => {
                self.intervals()?;
            }
            Pipeline::Obstacle => {
                if !self.obstacle.ends_with(",critical") {
                    crate::obstacle::ObstacleData::parse(&self.obstacle)?;
                }
            }
            Pipeline::Verify if self.input.is_none() => return Err(Error::input("`verify` needs `input`")),
            _ => {}
        }
        Ok(())
    }

    pub fn intervals(&self) -> Result<IntervalUnion> {
        IntervalUnion::from_json(&self.k)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let [x0, x1, y0, y1] = self.window;
        GridSpec::aligned(x0, x1, y0, y1, self.h)
    }

    /// Sorted `key = value` lines of everything that affects the numbers;
    /// the output location and formats are left out.
    pub fn canonical(&self) -> String {
        let mut m: BTreeMap<String, String> = BTreeMap::new();
        m.insert("pipeline".into(), self.pipeline.name().into());
        m.insert("h".into(), format!("{:?}", self.h));
        m.insert("window".into(), self.window.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","));
        m.insert("lambda_plus".into(), format!("{:?}", self.lambda_plus));
        m.insert("lambda_minus".into(), format!("{:?}", self.lambda_minus));
        m.insert("K".into(), self.k.clone());
        m.insert("obstacle".into(), self.obstacle.clone());
        if let Some(p) = &self.input {
            m.insert("input".into(), p.display().to_string());
        }
        for (k, v) in &self.tolerances {
            m.insert(format!("tol.{k}"), format!("{v:?}"));
        }
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Git-style content hash: SHA-256 of `blob <len>\0<canonical>`.
    pub fn input_hash(&self) -> String {
        content_hash(self.canonical().as_bytes())
    }

    /// Applies `tol.<check>` overrides and recomputes the pass flags.
    pub fn apply_tolerances(&self, report: &mut ResidualReport) {
        for c in &mut report.checks {
            if let Some(&t) = self.tolerances.get(&c.name) {
                c.tolerance = t;
                c.pass = c.sup <= t;
            }
        }
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let c = RunConfig::parse(
            "# two planes\npipeline = twoplane\nh = 1/64\nlambda_plus = 9\nformats = svg,csv\ntol.capillary.transmission = 1e-6\n",
        )
        .unwrap();
        assert_eq!(c.h, 1.0 / 64.0);
        assert_eq!(c.lambda_plus, 9.0);
        assert_eq!(c.formats, vec![Format::Csv, Format::Svg]);
        assert_eq!(c.tolerances["capillary.transmission"], 1e-6);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("pipeline = nope").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("h").is_err());
        let c = RunConfig::parse("h = -0.1").unwrap();
        assert!(c.validate().unwrap_err().is_input());
        let c = RunConfig::parse("tol.x = 0").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("pipeline = counterexample\nK = [[0.5, -0.5]]").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("pipeline = verify").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig::parse("out = a\nformats = csv").unwrap();
        let b = RunConfig::parse("out = b").unwrap();
        assert_eq!(a.input_hash(), b.input_hash());
        let c = RunConfig::parse("h = 1/64").unwrap();
        assert_ne!(a.input_hash(), c.input_hash());
        assert_eq!(RunConfig::parse(&a.canonical()).unwrap().canonical(), a.canonical());
    }

    #[test]
    fn git_blob_hash_shape() {
        let h = content_hash(b"");
        assert_eq!(h.len(), 64);
        assert_eq!(h, content_hash(b""));
        assert_ne!(h, content_hash(b" "));
    }
}
