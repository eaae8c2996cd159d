//! The conjugation-dynamics experiments on the space of subgroups.
//!
//! A finitely generated subgroup is handled through a finite preaction whose
//! basepoint it stabilizes; conjugating by a walk product amounts to moving
//! the basepoint. The experiments here exercise the two regimes:
//!
//! - with `|m| != |n|` and a `t`-biased measure, the `q`-adic valuation of
//!   the `b`-orbit cardinality drifts upward and with positive probability
//!   never returns, which pins conjugates of a basic open set away from any
//!   fixed one ([`nonmixing_experiment`]);
//! - with `|m| = |n|` (or infinite phenotype), two preactions whose walks
//!   have escaped their cores for good can be pasted along a bridge so that
//!   the walk product carries one basepoint exactly onto the other
//!   ([`paste`], [`mixing_witness_experiment`]).

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::graphs::{self, Label, MnGraph};
use crate::parallel::run_trials;
use crate::preactions::{
    apply, apply_saturating, apply_saturating_traced, ensure_ball_saturated, mn_graph_of, realize,
    validate_preaction, Point, Preaction, PreactionError,
};
use crate::walks::{
    check_support, trial_rng, valuation_biguint, valuation_u64, Generating, Sampler, StepMeasure,
};
use crate::words::{invert, multiply, reduce, spell, Letter, NormalForm, Params, Word};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("BadParams: {0}")]
    BadParams(String),
    #[error("HypothesesNotMet: {0}")]
    HypothesesNotMet(String),
    #[error("InvalidGraph: {0}")]
    InvalidGraph(String),
}

impl From<PreactionError> for DynamicsError {
    fn from(e: PreactionError) -> Self {
        DynamicsError::InvalidGraph(e.to_string())
    }
}

/// Shared experiment configuration; scenario-specific fields are optional
/// and validated by each scenario.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: Params,
    pub measure: StepMeasure,
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
    /// Prime `q` for valuation scenarios.
    pub prime: Option<u64>,
    /// Starting `b`-orbit cardinality `N`.
    pub start_label: Option<BigUint>,
    /// The label `M` of the open set the certificate separates from.
    pub disjoint_label: Option<BigUint>,
    /// Ball radius for neighborhood scenarios.
    pub radius: Option<u32>,
    /// Target failure probability per condition in the mixing witness.
    pub epsilon: Option<f64>,
    /// Walk lengths for the mixing witness.
    pub k_values: Option<Vec<usize>>,
    pub calibration_trials: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(params: Params, measure: StepMeasure, trials: u64, horizon: u64, seed: u64) -> Self {
        ExperimentConfig {
            params,
            measure,
            trials,
            horizon,
            seed,
            prime: None,
            start_label: None,
            disjoint_label: None,
            radius: None,
            epsilon: None,
            k_values: None,
            calibration_trials: None,
        }
    }

    fn validate_counts(&self) -> Result<(), DynamicsError> {
        if self.trials == 0 || self.horizon == 0 {
            return Err(DynamicsError::BadParams(
                "trials and horizon must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// The resolved configuration embedded in every report.
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            m: self.params.m(),
            n: self.params.n(),
            measure: self
                .measure
                .atoms()
                .iter()
                .map(|(w, p)| (w.to_string(), p.to_string()))
                .collect(),
            trials: self.trials,
            horizon: self.horizon,
            seed: self.seed,
            prime: self.prime,
            start_label: self.start_label.as_ref().map(|n| n.to_string()),
            disjoint_label: self.disjoint_label.as_ref().map(|n| n.to_string()),
            radius: self.radius,
            epsilon: self.epsilon,
            k_values: self.k_values.clone(),
            calibration_trials: self.calibration_trials,
        }
    }
}

/// Full audit copy of a configuration, serialized into reports.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConfigEcho {
    pub m: i64,
    pub n: i64,
    pub measure: Vec<(String, String)>,
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
    pub prime: Option<u64>,
    pub start_label: Option<String>,
    pub disjoint_label: Option<String>,
    pub radius: Option<u32>,
    pub epsilon: Option<f64>,
    pub k_values: Option<Vec<usize>>,
    pub calibration_trials: Option<u64>,
}

/// Whether the subgroup defined by the finite core `g` lies in the perfect
/// kernel: true iff `g` is non-saturated, in which case the maximal forest
/// saturation grafts an infinite forest and the full quotient graph is
/// infinite.
pub fn perfect_kernel_member(p: &Params, g: &MnGraph) -> Result<bool, DynamicsError> {
    let report = graphs::validate(p, g);
    if !report.is_valid() {
        return Err(DynamicsError::InvalidGraph(
            "core violates degree caps or the Transfer Equation".into(),
        ));
    }
    if !report.connected {
        return Err(DynamicsError::InvalidGraph("core not connected".into()));
    }
    Ok(!report.saturated)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EscapeReport {
    pub config: ConfigEcho,
    /// `occupancy_by_step[k]` is the fraction of trials whose projected
    /// position at step `k` lies in the core; decays toward 0.
    pub occupancy_by_step: Vec<f64>,
    /// Quantiles of the last step spent in the core; trials still inside at
    /// the horizon are censored to `horizon + 1`.
    pub last_visit_p50: u64,
    pub last_visit_p90: u64,
    pub last_visit_p99: u64,
    pub censored_trials: u64,
}

/// Projects walks from the basepoint of the realized core and measures how
/// the core's occupancy decays. Requires a non-saturated valid connected
/// core (a perfect-kernel subgroup) and a symmetric generating measure.
pub fn escape_experiment(cfg: &ExperimentConfig, g: &MnGraph) -> Result<EscapeReport, DynamicsError> {
    cfg.validate_counts()?;
    if !perfect_kernel_member(&cfg.params, g)? {
        return Err(DynamicsError::BadParams(
            "core is saturated: no reachable exits".into(),
        ));
    }
    let support = check_support(&cfg.params, &cfg.measure);
    if !support.symmetric || support.generating != Generating::Yes {
        return Err(DynamicsError::BadParams(
            "measure must have symmetric generating support".into(),
        ));
    }
    let base = realize(&cfg.params, g)?;
    let p = cfg.params;
    let sampler = Sampler::for_measure(&cfg.measure);
    let spelled: Vec<(Word, Word)> = cfg
        .measure
        .atoms()
        .iter()
        .map(|(w, _)| (w.clone(), spell(&reduce(&p, w))))
        .collect();
    let horizon = cfg.horizon as usize;
    let outcomes = run_trials(cfg.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, trial);
        let mut pre = base.clone();
        let mut cur = pre.basepoint().clone();
        let mut in_core = Vec::with_capacity(horizon + 1);
        in_core.push(true);
        let mut last_visit = 0u64;
        for step in 1..=horizon {
            let atom = sampler.sample(&cfg.measure, &mut rng);
            let word = &spelled.iter().find(|(w, _)| w == atom).unwrap().1;
            cur = apply_saturating(&p, &mut pre, &cur, word);
            let inside = pre.level(cur.orbit) == 0;
            in_core.push(inside);
            if inside {
                last_visit = step as u64;
            }
        }
        (in_core, last_visit)
    });
    let trials = cfg.trials as f64;
    let mut occupancy = vec![0u64; horizon + 1];
    let mut last_visits = Vec::with_capacity(outcomes.len());
    let mut censored = 0u64;
    for (in_core, last_visit) in &outcomes {
        for (k, &inside) in in_core.iter().enumerate() {
            if inside {
                occupancy[k] += 1;
            }
        }
        if *last_visit == horizon as u64 {
            censored += 1;
            last_visits.push(cfg.horizon + 1);
        } else {
            last_visits.push(*last_visit);
        }
    }
    last_visits.sort_unstable();
    let quantile = |q: f64| -> u64 {
        let idx = ((q * last_visits.len() as f64).ceil() as usize).clamp(1, last_visits.len());
        last_visits[idx - 1]
    };
    Ok(EscapeReport {
        config: cfg.echo(),
        occupancy_by_step: occupancy.iter().map(|&c| c as f64 / trials).collect(),
        last_visit_p50: quantile(0.50),
        last_visit_p90: quantile(0.90),
        last_visit_p99: quantile(0.99),
        censored_trials: censored,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CertificateSummary {
    /// Trials whose valuation exceeded `v_q(M)` within the prefix where the
    /// closed form is valid.
    pub eligible: u64,
    /// Eligible trials whose disjointness certificate fired.
    pub fired: u64,
    /// Exact label comparisons performed during certificate replays.
    pub exact_label_checks: u64,
    /// Disagreements between the replayed orbit labels and the closed form;
    /// must be zero.
    pub mismatches: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NonmixingReport {
    pub config: ConfigEcho,
    /// Probability of the valuation-raising letter.
    pub p_up: f64,
    /// Probability of the valuation-lowering letter.
    pub p_down: f64,
    /// `v_q(m) - v_q(n)` in absolute value: valuation change per `t`-step.
    pub valuation_step: u64,
    pub never_return_hat: f64,
    pub sigma: f64,
    /// Mean valuation change per walk step; concentrates at
    /// `(p_up - p_down) * valuation_step`.
    pub drift_hat: f64,
    /// The exact never-return probability `mu(t) - mu(t^-1)` of the biased
    /// valuation walk, which lower-bounds the certified-disjointness mass.
    pub bound: f64,
    /// `never_return_hat >= bound - 3 sigma`.
    pub bound_check: bool,
    pub truncation_error_bound: f64,
    pub certificates: CertificateSummary,
}

/// The non-mixing desk experiment: tracks the `t`-letter valuation walk,
/// estimates the probability it stays above its start forever, and
/// certifies per trial — by exact orbit-label replay — that once the
/// valuation exceeds `v_q(M)` the conjugated basic open set is disjoint
/// from the one at `M`.
pub fn nonmixing_experiment(cfg: &ExperimentConfig) -> Result<NonmixingReport, DynamicsError> {
    cfg.validate_counts()?;
    let p = cfg.params;
    if p.abs_m() == p.abs_n() {
        return Err(DynamicsError::BadParams("need |m| != |n|".into()));
    }
    let q = cfg
        .prime
        .ok_or_else(|| DynamicsError::BadParams("missing prime q".into()))?;
    let vm = valuation_u64(p.abs_m(), q);
    let vn = valuation_u64(p.abs_n(), q);
    if vm == vn {
        return Err(DynamicsError::BadParams(format!(
            "need v_{q}(m) != v_{q}(n)"
        )));
    }
    // The letter that raises the valuation: t when v_q(m) > v_q(n), else
    // t^-1 (the two roles swap with m and n).
    let (up_letter, down_letter) = if vm > vn {
        (Letter::T, Letter::TInv)
    } else {
        (Letter::TInv, Letter::T)
    };
    let step = vm.abs_diff(vn);
    let letters: Vec<(Letter, f64)> = {
        let mut out = Vec::new();
        for (w, prob) in cfg.measure.atoms() {
            if w.len() != 1 {
                return Err(DynamicsError::BadParams(
                    "support must be the four standard letters".into(),
                ));
            }
            out.push((
                w.letters()[0],
                *prob.numer() as f64 / *prob.denom() as f64,
            ));
        }
        out
    };
    if letters.len() != 4 {
        return Err(DynamicsError::BadParams(
            "support must be the four standard letters".into(),
        ));
    }
    let prob_of = |l: Letter| letters.iter().find(|(x, _)| *x == l).map(|(_, p)| *p).unwrap_or(0.0);
    let p_up = prob_of(up_letter);
    let p_down = prob_of(down_letter);
    if p_up <= p_down {
        return Err(DynamicsError::BadParams("bias required".into()));
    }
    let n0 = cfg
        .start_label
        .clone()
        .ok_or_else(|| DynamicsError::BadParams("missing start label N".into()))?;
    let v0 = valuation_biguint(&n0, q);
    if v0 <= vm.max(vn) {
        return Err(DynamicsError::BadParams(format!(
            "need v_{q}(N) > v_{q}(m) and v_{q}(n), got {v0}"
        )));
    }
    let m_label = cfg.disjoint_label.clone().unwrap_or_else(|| n0.clone());
    let v_m_label = valuation_biguint(&m_label, q);
    // First net up-count at which the valuation clears v_q(M).
    let crossing = if v_m_label < v0 {
        1i64
    } else {
        ((v_m_label - v0) / step) as i64 + 1
    };

    let sampler = Sampler::for_measure(&cfg.measure);
    let base = Preaction::single_orbit(Label::Fin(n0.clone()));
    let guard = ((p_up - p_down) * cfg.horizon as f64 / 2.0).floor() as i64;
    let horizon = cfg.horizon as usize;

    struct TrialOutcome {
        survived: bool,
        z_final: i64,
        cert_fired: bool,
        eligible: bool,
        label_checks: u64,
        mismatches: u64,
    }

    let outcomes = run_trials(cfg.trials, |trial| {
        let mut rng = trial_rng(cfg.seed, trial);
        let mut letters_drawn: Vec<Letter> = Vec::with_capacity(horizon);
        let mut z: i64 = 0;
        let mut survived = true;
        let mut valid_prefix = true;
        let mut cert_at: Option<usize> = None;
        for i in 0..horizon {
            let atom = sampler.sample(&cfg.measure, &mut rng);
            let letter = atom.letters()[0];
            letters_drawn.push(letter);
            if letter == up_letter {
                z += 1;
            } else if letter == down_letter {
                z -= 1;
            }
            if z <= 0 {
                survived = false;
            }
            if z < 0 {
                valid_prefix = false;
            }
            if valid_prefix && cert_at.is_none() && z >= crossing {
                cert_at = Some(i + 1);
            }
        }
        let eligible = cert_at.is_some();
        let mut label_checks = 0u64;
        let mut mismatches = 0u64;
        let mut fired = false;
        if let Some(k_star) = cert_at {
            // Exact certificate: replay the prefix through the realized
            // preaction and compare v_q of the actual orbit cardinality
            // with the closed form at every step.
            let mut pre = base.clone();
            let mut cur = pre.basepoint().clone();
            let mut zz: i64 = 0;
            let mut ok = true;
            for &letter in letters_drawn.iter().take(k_star) {
                let w = Word::new(vec![letter]);
                cur = apply_saturating(&p, &mut pre, &cur, &w);
                if letter == up_letter {
                    zz += 1;
                } else if letter == down_letter {
                    zz -= 1;
                }
                let expected = (v0 as i64 + zz * step as i64) as u64;
                let actual = match pre.card(cur.orbit) {
                    Label::Fin(card) => valuation_biguint(card, q),
                    Label::Inf => u64::MAX,
                };
                label_checks += 1;
                if actual != expected {
                    mismatches += 1;
                    ok = false;
                }
            }
            // Disjointness: the actual cardinality differs from M.
            let distinct = match pre.card(cur.orbit) {
                Label::Fin(card) => *card != m_label,
                Label::Inf => true,
            };
            fired = ok && distinct;
        }
        TrialOutcome {
            survived,
            z_final: z,
            cert_fired: fired,
            eligible,
            label_checks,
            mismatches,
        }
    });

    let mut never = 0u64;
    let mut z_sum: i128 = 0;
    let mut certs = CertificateSummary {
        eligible: 0,
        fired: 0,
        exact_label_checks: 0,
        mismatches: 0,
    };
    for o in &outcomes {
        z_sum += o.z_final as i128;
        if o.survived && o.z_final > guard {
            never += 1;
        }
        certs.eligible += o.eligible as u64;
        certs.fired += o.cert_fired as u64;
        certs.exact_label_checks += o.label_checks;
        certs.mismatches += o.mismatches;
    }
    let never_return_hat = never as f64 / cfg.trials as f64;
    let sigma = (never_return_hat * (1.0 - never_return_hat) / cfg.trials as f64).sqrt();
    let drift_hat = z_sum as f64 * step as f64 / (cfg.trials as f64 * cfg.horizon as f64);
    let bound = p_up - p_down;
    let rho = p_down / p_up;
    let truncation_error_bound = never as f64 * rho.powf(guard as f64)
        + cfg.trials as f64 * (-(bound * bound) * cfg.horizon as f64 / 8.0).exp();
    Ok(NonmixingReport {
        config: cfg.echo(),
        p_up,
        p_down,
        valuation_step: step,
        never_return_hat,
        sigma,
        drift_hat,
        bound,
        bound_check: never_return_hat >= bound - 3.0 * sigma,
        truncation_error_bound,
        certificates: certs,
    })
}

/// Input to the pasting construction: two finite transitive non-saturated
/// preactions of equal phenotype (infinite when `|m| != |n|`) and three
/// reduced words.
#[derive(Debug, Clone)]
pub struct MergeInput {
    pub pre1: Preaction,
    pub pre2: Preaction,
    pub s1: NormalForm,
    pub s2: NormalForm,
    pub s3: NormalForm,
    phenotype: Label,
}

impl MergeInput {
    pub fn new(
        p: &Params,
        pre1: Preaction,
        pre2: Preaction,
        s1: NormalForm,
        s2: NormalForm,
        s3: NormalForm,
    ) -> Result<Self, DynamicsError> {
        let mut phenotype = None;
        for pre in [&pre1, &pre2] {
            let report = validate_preaction(p, pre);
            if !report.is_valid() {
                return Err(DynamicsError::BadParams("preaction invalid".into()));
            }
            if !report.connected {
                return Err(DynamicsError::BadParams("preaction not transitive".into()));
            }
            if report.saturated {
                return Err(DynamicsError::BadParams(
                    "preaction saturated: nothing to extend".into(),
                ));
            }
            let ph = graphs::graph_phenotype(p, &mn_graph_of(pre))
                .map_err(|e| DynamicsError::BadParams(e.to_string()))?;
            match &phenotype {
                None => phenotype = Some(ph),
                Some(first) if *first != ph => {
                    return Err(DynamicsError::BadParams(format!(
                        "phenotype mismatch: {first} vs {ph}"
                    )))
                }
                Some(_) => {}
            }
        }
        let phenotype = phenotype.unwrap();
        if p.abs_m() != p.abs_n() && !phenotype.is_inf() {
            return Err(DynamicsError::BadParams(
                "finite phenotype requires |m| = |n|".into(),
            ));
        }
        Ok(MergeInput {
            pre1,
            pre2,
            s1,
            s2,
            s3,
            phenotype,
        })
    }

    pub fn phenotype(&self) -> &Label {
        &self.phenotype
    }
}

/// The three pasting hypotheses, plus the distances entering the third.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct MergeCheck {
    /// All positions `p1(x1 s1 w)`, `w` a prefix of the spelled `s2 s3`,
    /// avoid the first core.
    pub cond1: bool,
    /// All positions `p2(x2 s3^-1 w)`, `w` a prefix of the spelled
    /// `s2^-1 s1^-1`, avoid the second core.
    pub cond2: bool,
    /// `d(p1(x1 s1), p1(x1 s1 s2)) >= d(K1, p1(x1 s1)) + d(K2, p2(x2 s3^-1)) + 2`.
    pub cond3: bool,
    pub mid_distance: u32,
    pub dist_to_core1: u32,
    pub dist_to_core2: u32,
}

impl MergeCheck {
    pub fn all(&self) -> bool {
        self.cond1 && self.cond2 && self.cond3
    }
}

struct MergeContext {
    /// pre1 grown along the letters of `s1` only.
    r1: Preaction,
    /// pre2 grown along the letters of `s3^-1` only.
    r2: Preaction,
    x1s1: Point,
    x2s3inv: Point,
    check: MergeCheck,
}

fn merge_context(p: &Params, input: &MergeInput) -> MergeContext {
    let w1 = spell(&input.s1);
    let w2 = spell(&input.s2);
    let w3 = spell(&input.s3);

    // Side 1: grow along s1, then probe s2 s3 on a scratch copy.
    let mut r1 = input.pre1.clone();
    let x1 = r1.basepoint().clone();
    let x1s1 = apply_saturating(p, &mut r1, &x1, &w1);
    let mut probe1 = r1.clone();
    let w23 = w2.concat(&w3);
    let (_, orbits1) = apply_saturating_traced(p, &mut probe1, &x1s1, &w23);
    let cond1 = probe1.level(x1s1.orbit) > 0 && orbits1.iter().all(|&o| probe1.level(o) > 0);
    let after_s2 = if w2.is_empty() {
        x1s1.orbit
    } else {
        orbits1[w2.len() - 1]
    };
    let mid_distance = mn_graph_of(&probe1).distances_from(x1s1.orbit)[after_s2]
        .expect("walk endpoints lie in one component");

    // Side 2: grow along s3^-1, then probe s2^-1 s1^-1.
    let mut r2 = input.pre2.clone();
    let x2 = r2.basepoint().clone();
    let x2s3inv = apply_saturating(p, &mut r2, &x2, &w3.inverse());
    let mut probe2 = r2.clone();
    let w21inv = w2.inverse().concat(&w1.inverse());
    let (_, orbits2) = apply_saturating_traced(p, &mut probe2, &x2s3inv, &w21inv);
    let cond2 = probe2.level(x2s3inv.orbit) > 0 && orbits2.iter().all(|&o| probe2.level(o) > 0);

    let dist_to_core1 = r1.level(x1s1.orbit);
    let dist_to_core2 = r2.level(x2s3inv.orbit);
    let cond3 = mid_distance >= dist_to_core1 + dist_to_core2 + 2;
    MergeContext {
        r1,
        r2,
        x1s1,
        x2s3inv,
        check: MergeCheck {
            cond1,
            cond2,
            cond3,
            mid_distance,
            dist_to_core1,
            dist_to_core2,
        },
    }
}

/// Evaluates the three pasting hypotheses literally, growing the forest
/// saturations as far as the words need.
pub fn check_merge_hypotheses(p: &Params, input: &MergeInput) -> MergeCheck {
    merge_context(p, input).check
}

fn longest_defined_prefix(p: &Params, pre: &Preaction, start: &Point, w: &Word) -> (usize, Point) {
    let mut cur = start.clone();
    for (i, &letter) in w.letters().iter().enumerate() {
        match apply(p, pre, &cur, &Word::new(vec![letter])) {
            Ok(next) => cur = next,
            Err(_) => return (i, cur),
        }
    }
    (w.len(), cur)
}

/// Pastes the two preactions along a bridge realizing the middle of `s2`, so
/// that `x1 . s1 s2 s3 = x2` exactly. The result extends both inputs on
/// disjoint point sets, is transitive and non-saturated, and keeps their
/// common phenotype.
pub fn paste(p: &Params, input: &MergeInput) -> Result<Preaction, DynamicsError> {
    let ctx = merge_context(p, input);
    if !ctx.check.all() {
        return Err(DynamicsError::HypothesesNotMet(format!(
            "{:?}",
            ctx.check
        )));
    }
    let w2 = spell(&input.s2);

    // s2 = u . t^eps . mid . t^eta . v': u is the longest prefix defined on
    // x1 s1 inside r1; v' the longest suffix whose inverse is defined on
    // x2 s3^-1 inside r2.
    let (u_len, x1s1u) = longest_defined_prefix(p, &ctx.r1, &ctx.x1s1, &w2);
    let (vp_len, x2s3v) = longest_defined_prefix(p, &ctx.r2, &ctx.x2s3inv, &w2.inverse());
    if u_len + vp_len + 2 > w2.len() {
        return Err(DynamicsError::HypothesesNotMet(
            "no room for a bridge inside s2".into(),
        ));
    }
    let seg = &w2.letters()[u_len..w2.len() - vp_len];
    let eps = seg[0];
    let eta = *seg.last().unwrap();
    if !eps.is_t() || !eta.is_t() || seg.iter().filter(|l| l.is_t()).count() < 2 {
        return Err(DynamicsError::HypothesesNotMet(
            "bridge segment must start and end with t-letters".into(),
        ));
    }
    let mid = &seg[1..seg.len() - 1];

    // The bridge orbits all carry the constant forest label.
    let bridge_label = if input.phenotype.is_inf() {
        Label::Inf
    } else {
        graphs::unimodular_forest_label(p, &input.phenotype)
    };
    debug_assert_eq!(&bridge_label, ctx.r1.card(x1s1u.orbit));

    let mut merged = ctx.r1.clone();
    let shift2 = {
        // Append r2 verbatim with shifted orbit and edge ids.
        let shift = merged.orbit_count();
        for o in 0..ctx.r2.orbit_count() {
            merged.add_orbit(ctx.r2.card(o).clone(), ctx.r2.level(o), None);
        }
        for e in ctx.r2.edges() {
            let mut e = e.clone();
            e.src += shift;
            e.trg += shift;
            merged.add_edge(e);
        }
        shift
    };
    let x2_target = Point::new(x2s3v.orbit + shift2, x2s3v.offset.clone());

    // First bridge orbit and the junction out of side 1.
    let v0 = merged.add_orbit(bridge_label.clone(), 1, None);
    let y1 = Point::new(v0, 0);
    match eps {
        Letter::T => {
            merged.add_edge_mapping(p, x1s1u.orbit, &x1s1u.offset, v0, &BigInt::zero());
        }
        Letter::TInv => {
            merged.add_edge_mapping(p, v0, &BigInt::zero(), x1s1u.orbit, &x1s1u.offset);
        }
        _ => unreachable!("eps is a t-letter"),
    }

    // Walk the middle word, creating one fresh orbit per t-letter.
    let mut cur = y1;
    for &letter in mid {
        match letter {
            Letter::B => cur.offset += 1,
            Letter::BInv => cur.offset -= 1,
            Letter::T => {
                let fresh = merged.add_orbit(bridge_label.clone(), 1, None);
                merged.add_edge_mapping(p, cur.orbit, &cur.offset, fresh, &BigInt::zero());
                cur = Point::new(fresh, 0);
            }
            Letter::TInv => {
                let fresh = merged.add_orbit(bridge_label.clone(), 1, None);
                merged.add_edge_mapping(p, fresh, &BigInt::zero(), cur.orbit, &cur.offset);
                cur = Point::new(fresh, 0);
            }
        }
    }
    let y2 = cur;

    // Junction into side 2: y2 . t^eta = x2 s3^-1 v'^-1.
    match eta {
        Letter::T => {
            merged.add_edge_mapping(p, y2.orbit, &y2.offset, x2_target.orbit, &x2_target.offset);
        }
        Letter::TInv => {
            merged.add_edge_mapping(p, x2_target.orbit, &x2_target.offset, y2.orbit, &y2.offset);
        }
        _ => unreachable!("eta is a t-letter"),
    }

    merged.rebase_as_core();
    let x1 = input.pre1.basepoint().clone();
    merged.set_basepoint(x1.clone());

    // The defining identity of the pasting, checked exactly.
    let full = spell(&input.s1).concat(&w2).concat(&spell(&input.s3));
    let x2_embedded = Point::new(
        input.pre2.basepoint().orbit + shift2,
        input.pre2.basepoint().offset.clone(),
    );
    let end = apply(p, &merged, &x1, &full)
        .map_err(|e| DynamicsError::HypothesesNotMet(format!("pasting left the domain: {e}")))?;
    assert_eq!(
        end, x2_embedded,
        "pasting must carry x1 . s1 s2 s3 onto x2"
    );
    debug_assert!(validate_preaction(p, &merged).is_valid());
    Ok(merged)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MixingKResult {
    pub k: usize,
    pub trials: u64,
    /// Trials passing all three pasting hypotheses.
    pub hypotheses_passed: u64,
    /// Trials whose pasting succeeded and verified exactly.
    pub successes: u64,
    pub success_rate: f64,
    /// Exact verification failures after a passed hypothesis check; must be
    /// zero.
    pub verify_failures: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MixingReport {
    pub config: ConfigEcho,
    pub radius: u32,
    /// Head/tail length, calibrated so both projected walks have left the
    /// `M`-neighborhood of their cores for good in a `1 - epsilon` fraction
    /// of calibration walks.
    pub k0: usize,
    pub epsilon: f64,
    pub results: Vec<MixingKResult>,
}

/// The mixing-witness trend: for each walk length `k`, split the increments
/// into a `k0`-head, middle, and `k0`-tail, check the pasting hypotheses on
/// the preactions realized from the cores' `radius`-balls, paste, and count
/// exact successes. The success frequency should rise toward 1 in `k`.
pub fn mixing_witness_experiment(
    cfg: &ExperimentConfig,
    core1: &MnGraph,
    core2: &MnGraph,
    radius: u32,
) -> Result<MixingReport, DynamicsError> {
    cfg.validate_counts()?;
    let p = cfg.params;
    let ph1 = graphs::graph_phenotype(&p, core1)
        .map_err(|e| DynamicsError::BadParams(e.to_string()))?;
    let ph2 = graphs::graph_phenotype(&p, core2)
        .map_err(|e| DynamicsError::BadParams(e.to_string()))?;
    if ph1 != ph2 {
        return Err(DynamicsError::BadParams(format!(
            "phenotype mismatch: {ph1} vs {ph2}"
        )));
    }
    if p.abs_m() != p.abs_n() && !ph1.is_inf() {
        return Err(DynamicsError::BadParams(
            "finite phenotype requires |m| = |n|".into(),
        ));
    }
    let support = check_support(&p, &cfg.measure);
    if !support.symmetric || support.generating != Generating::Yes {
        return Err(DynamicsError::BadParams(
            "measure must have symmetric generating support".into(),
        ));
    }
    if !weights_symmetric(&p, &cfg.measure) {
        return Err(DynamicsError::BadParams(
            "measure weights must be symmetric under inversion".into(),
        ));
    }
    let k_values = cfg
        .k_values
        .clone()
        .ok_or_else(|| DynamicsError::BadParams("missing walk lengths".into()))?;
    if k_values.is_empty() {
        return Err(DynamicsError::BadParams("missing walk lengths".into()));
    }
    let epsilon = cfg.epsilon.unwrap_or(0.1);
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(DynamicsError::BadParams("epsilon must be in (0,1)".into()));
    }

    let root1 = core1
        .root()
        .ok_or_else(|| DynamicsError::BadParams("core1 has no root".into()))?;
    let root2 = core2
        .root()
        .ok_or_else(|| DynamicsError::BadParams("core2 has no root".into()))?;
    let pre1 = realize(&p, &graphs::rooted_ball(core1, root1, radius))?;
    let pre2 = realize(&p, &graphs::rooted_ball(core2, root2, radius))?;

    let sampler = Sampler::for_measure(&cfg.measure);
    let spelled: Vec<(Word, Word)> = cfg
        .measure
        .atoms()
        .iter()
        .map(|(w, _)| (w.clone(), spell(&reduce(&p, w))))
        .collect();
    let neighborhood = support.max_height as u32;

    // Calibration: the (1 - epsilon)-quantile of the last visit to the
    // M-neighborhood of each core, forward from x1 and reversed from x2.
    let cal_trials = cfg.calibration_trials.unwrap_or(200).max(1);
    let cal_len = *k_values.iter().max().unwrap();
    let last_exit = |pre: &Preaction, reversed: bool, stream_base: u64| -> Vec<usize> {
        run_trials(cal_trials, |trial| {
            let mut rng = trial_rng(cfg.seed, stream_base + trial);
            let mut grown = pre.clone();
            let mut cur = grown.basepoint().clone();
            let mut last = 0usize;
            for i in 1..=cal_len {
                let atom = sampler.sample(&cfg.measure, &mut rng);
                let mut word = spelled.iter().find(|(w, _)| w == atom).unwrap().1.clone();
                if reversed {
                    word = word.inverse();
                }
                cur = apply_saturating(&p, &mut grown, &cur, &word);
                if grown.level(cur.orbit) <= neighborhood {
                    last = i;
                }
            }
            last
        })
    };
    let stream_block = 1u64 << 32;
    let mut exits1 = last_exit(&pre1, false, stream_block);
    let mut exits2 = last_exit(&pre2, true, 2 * stream_block);
    exits1.sort_unstable();
    exits2.sort_unstable();
    let quantile = |sorted: &[usize]| -> usize {
        let idx = (((1.0 - epsilon) * sorted.len() as f64).ceil() as usize)
            .clamp(1, sorted.len());
        sorted[idx - 1]
    };
    let k0 = quantile(&exits1).max(quantile(&exits2)) + 1;

    let mut results = Vec::new();
    for (j, &k) in k_values.iter().enumerate() {
        let stream_base = (3 + j as u64) * stream_block;
        let outcomes = run_trials(cfg.trials, |trial| {
            let mut rng = trial_rng(cfg.seed, stream_base + trial);
            let k0_eff = k0.min(k / 2);
            let mut head = NormalForm::identity();
            let mut middle = NormalForm::identity();
            let mut tail = NormalForm::identity();
            for i in 0..k {
                let atom = sampler.sample(&cfg.measure, &mut rng);
                let g = reduce(&p, atom);
                let slot = if i < k0_eff {
                    &mut head
                } else if i < k - k0_eff {
                    &mut middle
                } else {
                    &mut tail
                };
                *slot = multiply(&p, slot, &g);
            }
            let input = MergeInput::new(&p, pre1.clone(), pre2.clone(), head, middle, tail)
                .expect("cores were validated");
            let check = check_merge_hypotheses(&p, &input);
            if !check.all() {
                return (false, false, false);
            }
            let verified = match paste(&p, &input) {
                Ok(result) => {
                    let graph = mn_graph_of(&result);
                    let phenotype_ok = graphs::graph_phenotype(&p, &graph)
                        .map(|ph| ph == *input.phenotype())
                        .unwrap_or(false);
                    let kernel_ok = perfect_kernel_member(&p, &graph).unwrap_or(false);
                    phenotype_ok && kernel_ok
                }
                Err(_) => false,
            };
            (true, verified, !verified)
        });
        let mut hypotheses_passed = 0u64;
        let mut successes = 0u64;
        let mut verify_failures = 0u64;
        for &(passed, success, failed) in &outcomes {
            hypotheses_passed += passed as u64;
            successes += success as u64;
            verify_failures += failed as u64;
        }
        results.push(MixingKResult {
            k,
            trials: cfg.trials,
            hypotheses_passed,
            successes,
            success_rate: successes as f64 / cfg.trials as f64,
            verify_failures,
        });
    }
    Ok(MixingReport {
        config: cfg.echo(),
        radius,
        k0,
        epsilon,
        results,
    })
}

fn weights_symmetric(p: &Params, mu: &StepMeasure) -> bool {
    mu.atoms().iter().all(|(w, prob)| {
        let inv = invert(p, &reduce(p, w));
        let mass: num_rational::Rational64 = mu
            .atoms()
            .iter()
            .filter(|(u, _)| reduce(p, u) == inv)
            .map(|(_, q)| *q)
            .sum();
        mass == *prob
    })
}

/// The rooted `radius`-ball at the moved basepoint `p(x . w)` in the lazily
/// grown saturation: the neighborhood datum of the conjugate subgroup
/// `w^-1 Λ w`.
pub fn conjugate_ball(p: &Params, a: &Preaction, w: &Word, radius: u32) -> MnGraph {
    let mut grown = a.clone();
    let base = grown.basepoint().clone();
    let end = apply_saturating(p, &mut grown, &base, w);
    ensure_ball_saturated(p, &mut grown, end.orbit, radius);
    graphs::rooted_ball(&mn_graph_of(&grown), end.orbit, radius)
}
