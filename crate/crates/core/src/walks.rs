//! Step measures and random walks `S_k = G_1 ... G_k`.
//!
//! A step measure is a finite-support probability distribution on words.
//! Probabilities are exact rationals in every predicate; only the sampler
//! flattens them (through an alias table) to floating point. Walks are
//! seeded and deterministic: trial `i` of an experiment draws from the
//! ChaCha stream `i` of the master seed, so fanning trials out across
//! threads cannot change any result.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::parallel::run_trials;
use crate::preactions::{apply_saturating, Preaction};
use crate::words::{height, invert, multiply, reduce, spell, Letter, NormalForm, Params, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WalkError {
    #[error("BadParams: {0}")]
    BadParams(String),
    #[error("HypothesisViolated at step {index}")]
    HypothesisViolated { index: usize, trace: ValuationTrace },
    #[error("ParseError: {0}")]
    Parse(String),
}

/// A finite-support step measure. Atoms are stored sorted by their text
/// form; probabilities are positive rationals summing to one exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepMeasure {
    atoms: Vec<(Word, Rational64)>,
}

impl StepMeasure {
    pub fn new(mut atoms: Vec<(Word, Rational64)>) -> Result<Self, WalkError> {
        if atoms.is_empty() {
            return Err(WalkError::BadParams("measure needs at least one atom".into()));
        }
        atoms.sort_by_key(|(w, _)| w.to_string());
        for pair in atoms.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(WalkError::BadParams(format!(
                    "duplicate atom {}",
                    pair[0].0
                )));
            }
        }
        let mut total = Rational64::zero();
        for (word, prob) in &atoms {
            if *prob <= Rational64::zero() {
                return Err(WalkError::BadParams(format!(
                    "atom {word} has non-positive probability"
                )));
            }
            total += prob;
        }
        if total != Rational64::one() {
            return Err(WalkError::BadParams(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(StepMeasure { atoms })
    }

    /// The uniform measure on `{b, b^-1, t, t^-1}`.
    pub fn uniform_letters() -> Self {
        let quarter = Rational64::new(1, 4);
        StepMeasure::new(
            Letter::ALL
                .iter()
                .map(|&l| (Word::new(vec![l]), quarter))
                .collect(),
        )
        .expect("uniform measure is valid")
    }

    pub fn atoms(&self) -> &[(Word, Rational64)] {
        &self.atoms
    }

    pub fn probability_of(&self, w: &Word) -> Rational64 {
        self.atoms
            .iter()
            .find(|(atom, _)| atom == w)
            .map(|(_, p)| *p)
            .unwrap_or_else(Rational64::zero)
    }

    /// Parses `atom <word> <probability>` lines; probabilities may be
    /// fractions (`7/20`), decimals (`0.35`), or integers. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, WalkError> {
        let mut atoms = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("atom") => {
                    let word: Word = parts
                        .next()
                        .ok_or_else(|| WalkError::Parse("missing atom word".into()))?
                        .parse()
                        .map_err(|e| WalkError::Parse(format!("{e}")))?;
                    let prob = parse_ratio(
                        parts
                            .next()
                            .ok_or_else(|| WalkError::Parse("missing atom probability".into()))?,
                    )?;
                    atoms.push((word, prob));
                }
                Some(other) => {
                    return Err(WalkError::Parse(format!("unknown measure line {other:?}")))
                }
                None => {}
            }
        }
        StepMeasure::new(atoms)
    }

    pub fn to_text(&self) -> String {
        self.atoms
            .iter()
            .map(|(w, p)| format!("atom {w} {p}\n"))
            .collect()
    }
}

pub fn parse_ratio(s: &str) -> Result<Rational64, WalkError> {
    let bad = || WalkError::Parse(format!("bad probability {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.parse().map_err(|_| bad())?;
        let den: i64 = den.parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: i64 = frac.parse().map_err(|_| bad())?;
        let scale = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        return Ok(Rational64::from(whole) + Rational64::new(digits, scale));
    }
    let whole: i64 = s.parse().map_err(|_| bad())?;
    Ok(Rational64::from(whole))
}

/// Walker alias table, built from the exact weights.
#[derive(Debug, Clone)]
pub struct Sampler {
    threshold: Vec<f64>,
    alias: Vec<usize>,
}

impl Sampler {
    pub fn for_measure(mu: &StepMeasure) -> Sampler {
        let n = mu.atoms.len();
        let scaled: Vec<Rational64> = mu
            .atoms
            .iter()
            .map(|(_, p)| p * Rational64::from(n as i64))
            .collect();
        let mut threshold = vec![1.0f64; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<(usize, Rational64)> = Vec::new();
        let mut large: Vec<(usize, Rational64)> = Vec::new();
        for (i, w) in scaled.into_iter().enumerate() {
            if w < Rational64::one() {
                small.push((i, w));
            } else {
                large.push((i, w));
            }
        }
        while let (Some((s, ws)), Some((l, wl))) = (small.pop(), large.pop()) {
            threshold[s] = ratio_to_f64(ws);
            alias[s] = l;
            let rest = wl + ws - Rational64::one();
            if rest < Rational64::one() {
                small.push((l, rest));
            } else {
                large.push((l, rest));
            }
        }
        // Whatever remains pairs with itself at weight exactly 1.
        Sampler { threshold, alias }
    }

    pub fn sample<'a, R: Rng>(&self, mu: &'a StepMeasure, rng: &mut R) -> &'a Word {
        let col = rng.random_range(0..self.threshold.len());
        let u: f64 = rng.random();
        let idx = if u < self.threshold[col] {
            col
        } else {
            self.alias[col]
        };
        &mu.atoms[idx].0
    }
}

fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The RNG for trial `trial` of a seeded experiment: an independent ChaCha
/// stream per trial, so aggregation order never matters.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Generating {
    Yes,
    Unknown,
}

/// What [`check_support`] reports about a measure's support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportReport {
    /// The support (as group elements) is stable under inversion. Weights
    /// may still be asymmetric.
    pub symmetric: bool,
    /// Max height over the support; bounds every projected step.
    pub max_height: usize,
    /// `Yes` is a sufficient condition: symmetric support containing a
    /// `b`-letter and a `t`-letter generates the group as a semigroup.
    pub generating: Generating,
}

pub fn check_support(p: &Params, mu: &StepMeasure) -> SupportReport {
    let reduced: Vec<NormalForm> = mu.atoms.iter().map(|(w, _)| reduce(p, w)).collect();
    let symmetric = reduced.iter().all(|nf| reduced.contains(&invert(p, nf)));
    let max_height = reduced.iter().map(height).max().unwrap_or(0);
    let has_b = reduced
        .iter()
        .any(|nf| *nf == NormalForm::b_power(1) || *nf == NormalForm::b_power(-1));
    let has_t = {
        let t = reduce(p, &Word::new(vec![Letter::T]));
        let t_inv = reduce(p, &Word::new(vec![Letter::TInv]));
        reduced.iter().any(|nf| *nf == t || *nf == t_inv)
    };
    let generating = if symmetric && has_b && has_t {
        Generating::Yes
    } else {
        Generating::Unknown
    };
    SupportReport {
        symmetric,
        max_height,
        generating,
    }
}

/// A seeded realization of walk increments, with the partial products
/// `S_k = S_{k-1} g_k` cached on first use.
#[derive(Debug, Clone)]
pub struct WalkTrace {
    pub seed: u64,
    increments: Vec<Word>,
    products: OnceLock<Vec<NormalForm>>,
}

impl WalkTrace {
    pub fn from_increments(seed: u64, increments: Vec<Word>) -> Self {
        WalkTrace {
            seed,
            increments,
            products: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increments(&self) -> &[Word] {
        &self.increments
    }

    /// `[S_0 = 1, S_1, ..., S_k]` as normal forms.
    pub fn products(&self, p: &Params) -> &[NormalForm] {
        self.products.get_or_init(|| {
            let mut out = Vec::with_capacity(self.increments.len() + 1);
            out.push(NormalForm::identity());
            for g in &self.increments {
                let step = reduce(p, g);
                let next = multiply(p, out.last().unwrap(), &step);
                out.push(next);
            }
            out
        })
    }
}

impl PartialEq for WalkTrace {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.increments == other.increments
    }
}

impl Eq for WalkTrace {}

/// Draws `k` i.i.d. increments from `mu`; deterministic in the seed.
pub fn sample_walk(mu: &StepMeasure, k: usize, seed: u64) -> WalkTrace {
    let sampler = Sampler::for_measure(mu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let increments = (0..k)
        .map(|_| sampler.sample(mu, &mut rng).clone())
        .collect();
    WalkTrace::from_increments(seed, increments)
}

/// The exact `q`-adic valuation walk of the `b`-orbit cardinalities along a
/// single-letter trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValuationTrace {
    pub prime: u64,
    /// `v_q` of the starting orbit cardinality.
    pub start: u64,
    pub h_plus: Vec<u64>,
    pub h_minus: Vec<u64>,
    /// `values[i] = (h_plus[i] - h_minus[i]) (v_q(m) - v_q(n)) + start`.
    pub values: Vec<u64>,
}

pub(crate) fn valuation_u64(mut k: u64, q: u64) -> u64 {
    let mut v = 0;
    while k > 0 && k % q == 0 {
        k /= q;
        v += 1;
    }
    v
}

pub(crate) fn valuation_biguint(n: &BigUint, q: u64) -> u64 {
    let q = BigUint::from(q);
    let mut v = 0;
    let mut n = n.clone();
    loop {
        if n.is_zero() {
            return v;
        }
        let (quot, rem) = n.div_rem(&q);
        if rem.is_zero() {
            v += 1;
            n = quot;
        } else {
            return v;
        }
    }
}

/// Tracks `v_q` of the orbit cardinality along the trace via the closed form
/// `(h_i^+ - h_i^-)(v_q(m) - v_q(n)) + v_q(N_0)`, cross-checking every step
/// against the Transfer Equation recursion. Requires `v_q(m) > v_q(n)`,
/// `v_q(N_0) > v_q(m)`, single-letter increments, and `h^+ >= h^-` along the
/// trace; the first violating index truncates the trace.
pub fn valuation_trace(
    p: &Params,
    q: u64,
    n0: &BigUint,
    trace: &WalkTrace,
) -> Result<ValuationTrace, WalkError> {
    let vm = valuation_u64(p.abs_m(), q);
    let vn = valuation_u64(p.abs_n(), q);
    if vm <= vn {
        return Err(WalkError::BadParams(format!(
            "need v_{q}(m) > v_{q}(n), got {vm} <= {vn}"
        )));
    }
    let start = valuation_biguint(n0, q);
    if start <= vm {
        return Err(WalkError::BadParams(format!(
            "need v_{q}(N0) > v_{q}(m), got {start} <= {vm}"
        )));
    }
    let mut out = ValuationTrace {
        prime: q,
        start,
        h_plus: vec![0],
        h_minus: vec![0],
        values: vec![start],
    };
    let mut recursion = start;
    for (i, g) in trace.increments().iter().enumerate() {
        if g.len() != 1 {
            return Err(WalkError::BadParams(format!(
                "increment {i} is not a single letter"
            )));
        }
        let (mut h_plus, mut h_minus) = (*out.h_plus.last().unwrap(), *out.h_minus.last().unwrap());
        match g.letters()[0] {
            Letter::T => {
                h_plus += 1;
                // Transfer recursion: v - v_q(n) = v' - min(v', v_q(m)) with
                // v > v_q(n) forces v' = v + v_q(m) - v_q(n).
                debug_assert!(recursion > vn);
                recursion = recursion + vm - vn;
            }
            Letter::TInv => {
                h_minus += 1;
                if h_minus > h_plus {
                    return Err(WalkError::HypothesisViolated {
                        index: i + 1,
                        trace: out,
                    });
                }
                debug_assert!(recursion > vm);
                recursion -= vm - vn;
            }
            Letter::B | Letter::BInv => {}
        }
        let closed_form = (h_plus - h_minus) * (vm - vn) + start;
        assert_eq!(
            closed_form,
            recursion,
            "closed form and transfer recursion disagree at step {}",
            i + 1
        );
        out.h_plus.push(h_plus);
        out.h_minus.push(h_minus);
        out.values.push(closed_form);
    }
    Ok(out)
}

/// Monte Carlo estimates for the lazy one-dimensional walk with steps in
/// `{-1, 0, +1}`: the never-return probability `P(Z_n > 0 for all n > 0)`
/// (whose exact value is `p_plus - p_minus`) and the a.s. drift.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LazyWalkReport {
    pub p_plus: f64,
    pub p_minus: f64,
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
    pub never_return_hat: f64,
    pub drift_hat: f64,
    /// Binomial standard error of `never_return_hat`.
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// A walk still positive at the horizon counts as never-returning only
    /// if it cleared `drift * horizon / 2`; this bounds both
    /// misclassification directions.
    pub truncation_error_bound: f64,
}

pub fn lazy_walk_stats(
    p_plus: f64,
    p_minus: f64,
    trials: u64,
    horizon: u64,
    seed: u64,
) -> Result<LazyWalkReport, WalkError> {
    if !(p_plus > p_minus && p_minus >= 0.0 && p_plus + p_minus <= 1.0) {
        return Err(WalkError::BadParams(
            "need p_plus > p_minus >= 0 and p_plus + p_minus <= 1".into(),
        ));
    }
    if trials == 0 || horizon == 0 {
        return Err(WalkError::BadParams("trials and horizon must be >= 1".into()));
    }
    let drift = p_plus - p_minus;
    let guard = ((drift * horizon as f64) / 2.0).floor() as i64;
    let up = (p_plus * u64::MAX as f64) as u64;
    let down = up.saturating_add((p_minus * u64::MAX as f64) as u64);
    let outcomes = run_trials(trials, |trial| {
        let mut rng = trial_rng(seed, trial);
        let mut z: i64 = 0;
        let mut survived = true;
        for _ in 0..horizon {
            let u = rand::RngCore::next_u64(&mut rng);
            if u < up {
                z += 1;
            } else if u < down {
                z -= 1;
            }
            if z <= 0 {
                survived = false;
            }
        }
        (survived, z)
    });
    let mut never = 0u64;
    let mut z_sum: i128 = 0;
    for &(survived, z) in &outcomes {
        z_sum += z as i128;
        if survived && z > guard {
            never += 1;
        }
    }
    let never_return_hat = never as f64 / trials as f64;
    let drift_hat = z_sum as f64 / (trials as f64 * horizon as f64);
    let sigma = (never_return_hat * (1.0 - never_return_hat) / trials as f64).sqrt();
    // Misclassified up: a counted survivor later returns; from height above
    // the guard that has probability at most (p_minus/p_plus)^guard.
    // Misclassified down: a true never-returner below the guard at the
    // horizon; Hoeffding on the drift shortfall.
    let rho = if p_plus > 0.0 { p_minus / p_plus } else { 0.0 };
    let up_err = never as f64 * rho.powf(guard as f64);
    let down_err = trials as f64 * (-(drift * drift) * horizon as f64 / 8.0).exp();
    Ok(LazyWalkReport {
        p_plus,
        p_minus,
        trials,
        horizon,
        seed,
        never_return_hat,
        drift_hat,
        sigma,
        ci_low: never_return_hat - 3.0 * sigma,
        ci_high: never_return_hat + 3.0 * sigma,
        truncation_error_bound: up_err + down_err,
    })
}

/// The projected vertex path of a walk in the lazily saturated quotient
/// graph of `a`.
#[derive(Debug, Clone)]
pub struct ProjectedTrace {
    /// The preaction grown along the walk.
    pub preaction: Preaction,
    /// `path[i]` is the orbit of `x . S_i`; `path[0]` is the basepoint's.
    pub path: Vec<usize>,
}

/// Projects `x . S_0, x . S_1, ..., x . S_k` into the quotient graph, growing
/// the maximal-forest saturation on demand. Increments act through their
/// reduced spelling, so each projected step moves at most the increment's
/// height.
pub fn project_trace(p: &Params, a: &Preaction, trace: &WalkTrace) -> ProjectedTrace {
    let mut preaction = a.clone();
    let mut spelled: HashMap<Word, Word> = HashMap::new();
    let mut cur = preaction.basepoint().clone();
    let mut path = Vec::with_capacity(trace.len() + 1);
    path.push(cur.orbit);
    for g in trace.increments() {
        let word = spelled
            .entry(g.clone())
            .or_insert_with(|| spell(&reduce(p, g)))
            .clone();
        cur = apply_saturating(p, &mut preaction, &cur, &word);
        path.push(cur.orbit);
    }
    ProjectedTrace { preaction, path }
}
