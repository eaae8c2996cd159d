//! Key-value experiment config files. Values given in a file override the
//! corresponding command-line flags.
//!
//! ```text
//! m 4
//! n 2
//! seed 7
//! trials 100000
//! horizon 10000
//! q 2
//! start_label 8
//! atom t 7/20
//! atom T 3/20
//! atom b 1/4
//! atom B 1/4
//! ```

use num_bigint::BigUint;

use bs_core::walks::{parse_ratio, StepMeasure};
use bs_core::words::Word;

#[derive(Debug, Default, Clone)]
pub struct ConfigOverlay {
    pub m: Option<i64>,
    pub n: Option<i64>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub horizon: Option<u64>,
    pub workers: Option<usize>,
    pub prime: Option<u64>,
    pub start_label: Option<BigUint>,
    pub disjoint_label: Option<BigUint>,
    pub radius: Option<u32>,
    pub epsilon: Option<f64>,
    pub k_values: Option<Vec<usize>>,
    pub calibration_trials: Option<u64>,
    pub measure: Option<StepMeasure>,
}

impl ConfigOverlay {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut overlay = ConfigOverlay::default();
        let mut atoms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap();
            let mut value = || {
                parts
                    .next()
                    .ok_or_else(|| format!("line {}: missing value for {key}", lineno + 1))
            };
            match key {
                "m" => overlay.m = Some(parse(value()?, key)?),
                "n" => overlay.n = Some(parse(value()?, key)?),
                "seed" => overlay.seed = Some(parse(value()?, key)?),
                "trials" => overlay.trials = Some(parse(value()?, key)?),
                "horizon" => overlay.horizon = Some(parse(value()?, key)?),
                "workers" => overlay.workers = Some(parse(value()?, key)?),
                "q" | "prime" => overlay.prime = Some(parse(value()?, key)?),
                "start_label" => overlay.start_label = Some(parse(value()?, key)?),
                "disjoint_label" => overlay.disjoint_label = Some(parse(value()?, key)?),
                "radius" => overlay.radius = Some(parse(value()?, key)?),
                "epsilon" => overlay.epsilon = Some(parse(value()?, key)?),
                "calibration_trials" => overlay.calibration_trials = Some(parse(value()?, key)?),
                "k_list" => {
                    let list = value()?
                        .split(',')
                        .map(|k| parse::<usize>(k, "k_list entry"))
                        .collect::<Result<Vec<_>, _>>()?;
                    overlay.k_values = Some(list);
                }
                "atom" => {
                    let word: Word = value()?
                        .parse()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    let prob = parse_ratio(value()?).map_err(|e| e.to_string())?;
                    atoms.push((word, prob));
                }
                other => return Err(format!("line {}: unknown key {other:?}", lineno + 1)),
            }
        }
        if !atoms.is_empty() {
            overlay.measure = Some(StepMeasure::new(atoms).map_err(|e| e.to_string())?);
        }
        Ok(overlay)
    }
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse()
        .map_err(|_| format!("bad value {s:?} for {what}"))
}
