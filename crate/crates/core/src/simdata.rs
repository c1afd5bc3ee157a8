//! Blocks, Bumps, Heavisine and Doppler benchmark problems.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Frozen tables for the piecewise test functions.
pub const FIXTURE: &str = include_str!("../data/test_functions.txt");

/// Sample SD every truth vector is standardized to.
pub const TRUTH_SD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    Blocks,
    Bumps,
    Heavisine,
    Doppler,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [
        TestFunction::Blocks,
        TestFunction::Bumps,
        TestFunction::Heavisine,
        TestFunction::Doppler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Blocks => "blocks",
            TestFunction::Bumps => "bumps",
            TestFunction::Heavisine => "heavisine",
            TestFunction::Doppler => "doppler",
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestFunction::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTables {
    pub version: u32,
    pub blocks_knots: Vec<f64>,
    pub blocks_heights: Vec<f64>,
    pub bumps_knots: Vec<f64>,
    pub bumps_heights: Vec<f64>,
    pub bumps_widths: Vec<f64>,
}

pub fn parse_fixture(text: &str) -> Result<FunctionTables> {
    let mut version = None;
    let mut t = FunctionTables {
        version: 0,
        blocks_knots: vec![],
        blocks_heights: vec![],
        bumps_knots: vec![],
        bumps_heights: vec![],
        bumps_widths: vec![],
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Fixture {
            line: line_no,
            message,
        };
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        if head == "version" {
            let v = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad version record".into()))?;
            version = Some(v);
            continue;
        }
        if version.is_none() {
            return Err(err("version record must come first".into()));
        }
        let field = parts.next().ok_or_else(|| err("missing field name".into()))?;
        let values = parts
            .map(|p| p.parse::<f64>().map_err(|_| err(format!("bad number `{p}`"))))
            .collect::<Result<Vec<_>>>()?;
        let slot = match (head, field) {
            ("blocks", "knots") => &mut t.blocks_knots,
            ("blocks", "heights") => &mut t.blocks_heights,
            ("bumps", "knots") => &mut t.bumps_knots,
            ("bumps", "heights") => &mut t.bumps_heights,
            ("bumps", "widths") => &mut t.bumps_widths,
            _ => return Err(err(format!("unknown record `{head} {field}`"))),
        };
        *slot = values;
    }
    t.version = version.ok_or(Error::Fixture {
        line: 0,
        message: "missing version record".into(),
    })?;
    let n = t.blocks_knots.len();
    if n == 0 || t.blocks_heights.len() != n {
        return Err(Error::Fixture {
            line: 0,
            message: "blocks knots/heights length mismatch".into(),
        });
    }
    let n = t.bumps_knots.len();
    if n == 0 || t.bumps_heights.len() != n || t.bumps_widths.len() != n {
        return Err(Error::Fixture {
            line: 0,
            message: "bumps knots/heights/widths length mismatch".into(),
        });
    }
    Ok(t)
}

pub fn tables() -> &'static FunctionTables {
    static TABLES: OnceLock<FunctionTables> = OnceLock::new();
    TABLES.get_or_init(|| parse_fixture(FIXTURE).expect("embedded fixture is valid"))
}

/// Sign with `sgn(0) = 0`.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Unscaled test function at `t ∈ [0, 1]`.
pub fn true_function(f: TestFunction, t: f64) -> f64 {
    let tb = tables();
    match f {
        TestFunction::Blocks => tb
            .blocks_knots
            .iter()
            .zip(&tb.blocks_heights)
            .map(|(k, h)| h * 0.5 * (1.0 + sgn(t - k)))
            .sum(),
        TestFunction::Bumps => tb
            .bumps_knots
            .iter()
            .zip(&tb.bumps_heights)
            .zip(&tb.bumps_widths)
            .map(|((k, h), w)| h * (1.0 + ((t - k) / w).abs()).powi(-4))
            .sum(),
        TestFunction::Heavisine => 4.0 * (4.0 * std::f64::consts::PI * t).sin() - sgn(t - 0.3) - sgn(0.72 - t),
        TestFunction::Doppler => {
            (t * (1.0 - t)).max(0.0).sqrt() * (2.0 * std::f64::consts::PI * 1.05 / (t + 0.05)).sin()
        }
    }
}

/// Look up a function by name.
pub fn true_function_by_name(name: &str, t: f64) -> Result<f64> {
    Ok(true_function(name.parse()?, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub function: TestFunction,
    pub j_points: usize,
    pub snr: f64,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn new(function: TestFunction, j_points: usize, seed: u64) -> Self {
        Self {
            function,
            j_points,
            snr: 7.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_points < 8 {
            return Err(Error::InvalidParameter(format!(
                "need at least 8 design points (got {})",
                self.j_points
            )));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::InvalidParameter(format!("snr must be positive (got {})", self.snr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: TimeSeries,
    pub truth: Vec<f64>,
    pub sigma_eps: f64,
}

pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Equally spaced design `t_j = j / J`, `j = 1..=J`.
pub fn design_points(j: usize) -> Vec<f64> {
    (1..=j).map(|i| i as f64 / j as f64).collect()
}

/// Truth on the design, centered and scaled to sample SD [`TRUTH_SD`]. Independent of the seed.
pub fn scaled_truth(f: TestFunction, j: usize) -> Vec<f64> {
    let raw: Vec<f64> = design_points(j).iter().map(|&t| true_function(f, t)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let k = TRUTH_SD / sample_sd(&raw);
    raw.iter().map(|v| (v - mean) * k).collect()
}

pub fn make_dataset(spec: &BenchmarkSpec) -> Result<Dataset> {
    spec.validate()?;
    let truth = scaled_truth(spec.function, spec.j_points);
    let sigma_eps = sample_sd(&truth) / spec.snr;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let y = truth
        .iter()
        .map(|u| {
            let e: f64 = rng.sample(StandardNormal);
            u + sigma_eps * e
        })
        .collect();
    Ok(Dataset {
        series: TimeSeries::new(design_points(spec.j_points), y)?,
        truth,
        sigma_eps,
    })
}

pub fn mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            times: truth.len(),
            values: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum::<f64>() / truth.len() as f64)
}
