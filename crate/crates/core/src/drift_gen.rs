//! Synthetic insurance-claim logs with an abrupt concept drift.
//!
//! Every case runs
//!
//! ```text
//! Register Claim -> Check Documents -> (Basic Check | Complex Check
//!   [-> Contact Hospital] [-> Consult Medical Expert]) -> Decide Claim
//!   -> (Accept Claim | Reject Claim) -> notifications -> [Pay Claim]
//!   -> Archive Claim -> Close Claim
//! ```
//!
//! with a parallel branch `Send Questionnaire -> (Receive Questionnaire
//! Response | Questionnaire Deadline Expired)` started after registration
//! and joined before archiving. Both branches are merged by timestamp.
//!
//! * baseline: complex check iff the claim value is at or above the threshold;
//!   acceptance favours claimants without previous cases.
//! * drift1: complex check iff the claimant is 50 or older; acceptance
//!   favours VIP and Gold claimants.
//! * drift2: hospitals are no longer contacted, claimants are older and
//!   claims larger (so more complex checks).
//!
//! A drift log is `n_cases_baseline` baseline cases followed by
//! `n_cases_drift` drift cases. Each case draws from its own random stream
//! (seed, case index), so the baseline part of a drift log is identical to a
//! baseline log generated with the same seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{AttrKind, AttrScope, AttrSpec, AttrValue, Case, Event, EventLog};

pub const REGISTER: &str = "Register Claim";
pub const CHECK_DOCUMENTS: &str = "Check Documents";
pub const BASIC_CHECK: &str = "Basic Check";
pub const COMPLEX_CHECK: &str = "Complex Check";
pub const CONTACT_HOSPITAL: &str = "Contact Hospital";
pub const CONSULT_EXPERT: &str = "Consult Medical Expert";
pub const DECIDE: &str = "Decide Claim";
pub const ACCEPT: &str = "Accept Claim";
pub const REJECT: &str = "Reject Claim";
pub const NOTIFY_PHONE: &str = "Send Notification by Phone";
pub const NOTIFY_POST: &str = "Send Notification by Post";
pub const SEND_QUESTIONNAIRE: &str = "Send Questionnaire";
pub const RECEIVE_RESPONSE: &str = "Receive Questionnaire Response";
pub const DEADLINE_EXPIRED: &str = "Questionnaire Deadline Expired";
pub const PAY: &str = "Pay Claim";
pub const ARCHIVE: &str = "Archive Claim";
pub const CLOSE: &str = "Close Claim";

pub const ACTIVITIES: [&str; 17] = [
    REGISTER,
    CHECK_DOCUMENTS,
    BASIC_CHECK,
    COMPLEX_CHECK,
    CONTACT_HOSPITAL,
    CONSULT_EXPERT,
    DECIDE,
    ACCEPT,
    REJECT,
    NOTIFY_PHONE,
    NOTIFY_POST,
    SEND_QUESTIONNAIRE,
    RECEIVE_RESPONSE,
    DEADLINE_EXPIRED,
    PAY,
    ARCHIVE,
    CLOSE,
];

pub const STATUSES: [&str; 4] = ["VIP", "Gold", "Silver", "Regular"];

const HOUR_MS: f64 = 3_600_000.0;
// 2020-01-01T00:00:00Z
const EPOCH_MS: i64 = 1_577_836_800_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Drift1,
    Drift2,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::Drift1 => "drift1",
            Variant::Drift2 => "drift2",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "drift1" => Ok(Variant::Drift1),
            "drift2" => Ok(Variant::Drift2),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimProcessConfig {
    pub n_cases_baseline: usize,
    pub n_cases_drift: usize,
    pub seed: u64,
    /// Claimant age ~ Normal(mean, sd), rounded and clamped to [18, 95].
    pub age_mean: f64,
    pub age_sd: f64,
    pub drift2_age_mean: f64,
    /// Claim value ~ LogNormal(mu, sigma); the check threshold is `exp(mu)`,
    /// the baseline median.
    pub claim_log_mean: f64,
    pub claim_log_sd: f64,
    pub drift2_claim_log_mean: f64,
    /// Weights for VIP, Gold, Silver, Regular.
    pub status_weights: [f64; 4],
    /// Previous cases ~ Poisson(mean).
    pub previous_cases_mean: f64,
    pub favored_acceptance: f64,
    pub unfavored_acceptance: f64,
    pub questionnaire_response: f64,
    /// Chance of a phone notification for claimants below Gold.
    pub phone_probability: f64,
    pub expert_probability: f64,
}

impl Default for ClaimProcessConfig {
    fn default() -> Self {
        ClaimProcessConfig {
            n_cases_baseline: 1000,
            n_cases_drift: 1000,
            seed: 0,
            age_mean: 45.0,
            age_sd: 15.0,
            drift2_age_mean: 58.0,
            claim_log_mean: 7.0,
            claim_log_sd: 0.8,
            drift2_claim_log_mean: 7.4,
            status_weights: [0.1, 0.2, 0.3, 0.4],
            previous_cases_mean: 1.0,
            favored_acceptance: 0.8,
            unfavored_acceptance: 0.4,
            questionnaire_response: 0.7,
            phone_probability: 0.5,
            expert_probability: 0.3,
        }
    }
}

impl ClaimProcessConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.favored_acceptance,
            self.unfavored_acceptance,
            self.questionnaire_response,
            self.phone_probability,
            self.expert_probability,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        if self.n_cases_baseline == 0 {
            return Err(Error::InvalidConfig("case counts must be positive".into()));
        }
        if !(self.age_sd > 0.0 && self.claim_log_sd > 0.0 && self.previous_cases_mean > 0.0) {
            return Err(Error::InvalidConfig("spread parameters must be positive".into()));
        }
        if self.status_weights.iter().any(|w| *w < 0.0) || self.status_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig("status weights must be non-negative and not all zero".into()));
        }
        Ok(())
    }

    pub fn claim_threshold(&self) -> f64 {
        self.claim_log_mean.exp()
    }
}

/// Case attributes that drive routing and decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct Claimant {
    pub age: i64,
    pub claim_value: f64,
    pub status: &'static str,
    pub previous_cases: i64,
}

#[derive(Clone, Debug)]
pub struct GeneratedLog {
    pub log: EventLog,
    pub drift_index: usize,
}

pub fn generate_baseline(cfg: &ClaimProcessConfig) -> Result<GeneratedLog> {
    generate(cfg, Variant::Baseline)
}

pub fn generate_drift1(cfg: &ClaimProcessConfig) -> Result<GeneratedLog> {
    generate(cfg, Variant::Drift1)
}

pub fn generate_drift2(cfg: &ClaimProcessConfig) -> Result<GeneratedLog> {
    generate(cfg, Variant::Drift2)
}

/// Baseline cases, then (for a drift variant) `n_cases_drift` drift cases.
pub fn generate(cfg: &ClaimProcessConfig, variant: Variant) -> Result<GeneratedLog> {
    cfg.validate()?;
    let drift_cases = if variant == Variant::Baseline { 0 } else { cfg.n_cases_drift };
    let total = cfg.n_cases_baseline + drift_cases;
    let width = total.to_string().len().max(4);
    let cases = (0..total)
        .map(|i| {
            let v = if i < cfg.n_cases_baseline { Variant::Baseline } else { variant };
            generate_case(cfg, v, i, width)
        })
        .collect::<Result<Vec<_>>>()?;
    let log = EventLog::with_schema(cases, schema())?;
    Ok(GeneratedLog {
        log,
        drift_index: cfg.n_cases_baseline,
    })
}

fn schema() -> std::collections::BTreeMap<String, AttrSpec> {
    let spec = |kind, scope| AttrSpec { kind, scope };
    [
        ("age", spec(AttrKind::Int, AttrScope::Static)),
        ("claim_value", spec(AttrKind::Float, AttrScope::Static)),
        ("status", spec(AttrKind::String, AttrScope::Static)),
        ("previous_cases", spec(AttrKind::Int, AttrScope::Static)),
        ("resource", spec(AttrKind::String, AttrScope::Dynamic)),
    ]
    .into_iter()
    .map(|(k, s)| (k.to_string(), s))
    .collect()
}

pub fn is_complex(cfg: &ClaimProcessConfig, variant: Variant, c: &Claimant) -> bool {
    match variant {
        Variant::Drift1 => c.age >= 50,
        Variant::Baseline | Variant::Drift2 => c.claim_value >= cfg.claim_threshold(),
    }
}

pub fn acceptance_probability(cfg: &ClaimProcessConfig, variant: Variant, c: &Claimant) -> f64 {
    let favored = match variant {
        Variant::Drift1 => matches!(c.status, "VIP" | "Gold"),
        Variant::Baseline | Variant::Drift2 => c.previous_cases == 0,
    };
    if favored {
        cfg.favored_acceptance
    } else {
        cfg.unfavored_acceptance
    }
}

fn draw_claimant(cfg: &ClaimProcessConfig, variant: Variant, rng: &mut ChaCha8Rng) -> Result<Claimant> {
    let bad = |e: &dyn fmt::Display| Error::InvalidConfig(e.to_string());
    let (age_mean, claim_mu) = match variant {
        Variant::Drift2 => (cfg.drift2_age_mean, cfg.drift2_claim_log_mean),
        _ => (cfg.age_mean, cfg.claim_log_mean),
    };
    let age = Normal::new(age_mean, cfg.age_sd).map_err(|e| bad(&e))?.sample(rng);
    let claim = LogNormal::new(claim_mu, cfg.claim_log_sd).map_err(|e| bad(&e))?.sample(rng);
    let total: f64 = cfg.status_weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut status = STATUSES[STATUSES.len() - 1];
    for (s, w) in STATUSES.iter().zip(cfg.status_weights) {
        if u < w {
            status = s;
            break;
        }
        u -= w;
    }
    let previous = Poisson::new(cfg.previous_cases_mean).map_err(|e| bad(&e))?.sample(rng);
    Ok(Claimant {
        age: age.round().clamp(18.0, 95.0) as i64,
        claim_value: (claim * 100.0).round() / 100.0,
        status,
        previous_cases: previous as i64,
    })
}

fn generate_case(cfg: &ClaimProcessConfig, variant: Variant, index: usize, width: usize) -> Result<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let claimant = draw_claimant(cfg, variant, &mut rng)?;

    let start = EPOCH_MS + index as i64 * (HOUR_MS as i64 / 2);
    let mut t = start as f64;
    let gap = |rng: &mut ChaCha8Rng, mean_hours: f64| -> f64 {
        // exponential gap with a one-minute floor
        60_000.0 - mean_hours * HOUR_MS * (1.0 - rng.random::<f64>()).ln()
    };
    let clerk = |rng: &mut ChaCha8Rng| format!("clerk_{}", rng.random_range(1..=4));
    let expert = |rng: &mut ChaCha8Rng| format!("expert_{}", rng.random_range(1..=3));

    let mut main: Vec<(f64, &str, String)> = vec![(t, REGISTER, clerk(&mut rng))];
    let registered = t;
    t += gap(&mut rng, 2.0);
    main.push((t, CHECK_DOCUMENTS, clerk(&mut rng)));
    t += gap(&mut rng, 4.0);
    if is_complex(cfg, variant, &claimant) {
        main.push((t, COMPLEX_CHECK, expert(&mut rng)));
        if variant != Variant::Drift2 {
            t += gap(&mut rng, 12.0);
            main.push((t, CONTACT_HOSPITAL, expert(&mut rng)));
        }
        if rng.random::<f64>() < cfg.expert_probability {
            t += gap(&mut rng, 24.0);
            main.push((t, CONSULT_EXPERT, expert(&mut rng)));
        }
    } else {
        main.push((t, BASIC_CHECK, clerk(&mut rng)));
    }
    t += gap(&mut rng, 8.0);
    main.push((t, DECIDE, expert(&mut rng)));
    let accepted = rng.random::<f64>() < acceptance_probability(cfg, variant, &claimant);
    t += gap(&mut rng, 1.0);
    main.push((t, if accepted { ACCEPT } else { REJECT }, expert(&mut rng)));
    let phone = matches!(claimant.status, "VIP" | "Gold") || rng.random::<f64>() < cfg.phone_probability;
    if phone {
        t += gap(&mut rng, 2.0);
        main.push((t, NOTIFY_PHONE, clerk(&mut rng)));
    }
    if !phone || !accepted {
        t += gap(&mut rng, 2.0);
        main.push((t, NOTIFY_POST, "system".to_string()));
    }
    if accepted {
        t += gap(&mut rng, 24.0);
        main.push((t, PAY, "system".to_string()));
    }

    let sent = registered + gap(&mut rng, 1.0);
    let mut side = vec![(sent, SEND_QUESTIONNAIRE, "system".to_string())];
    let deadline_hours = 7.0 * 24.0;
    if rng.random::<f64>() < cfg.questionnaire_response {
        let after = rng.random_range(1.0..deadline_hours) * HOUR_MS;
        side.push((sent + after, RECEIVE_RESPONSE, clerk(&mut rng)));
    } else {
        side.push((sent + deadline_hours * HOUR_MS, DEADLINE_EXPIRED, "system".to_string()));
    }

    let joined = main.last().map_or(t, |e| e.0).max(side.last().map_or(t, |e| e.0));
    let archived = joined + gap(&mut rng, 2.0);
    let closed = archived + gap(&mut rng, 1.0);

    let mut events: Vec<(f64, &str, String)> = main.into_iter().chain(side).collect();
    // stable: the main branch wins exact ties
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events.push((archived, ARCHIVE, clerk(&mut rng)));
    events.push((closed, CLOSE, "system".to_string()));

    let events = events
        .into_iter()
        .map(|(ts, act, resource)| Event::new(act).at(ts as i64).with_attr("resource", AttrValue::Str(resource)))
        .collect();
    Ok(Case::new(format!("case_{index:0width$}"), events)
        .with_static("age", AttrValue::Num(claimant.age as f64))
        .with_static("claim_value", AttrValue::Num(claimant.claim_value))
        .with_static("status", AttrValue::Str(claimant.status.to_string()))
        .with_static("previous_cases", AttrValue::Num(claimant.previous_cases as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{label_log, parse_formula};

    fn small(n_base: usize, n_drift: usize, seed: u64) -> ClaimProcessConfig {
        ClaimProcessConfig {
            n_cases_baseline: n_base,
            n_cases_drift: n_drift,
            seed,
            ..ClaimProcessConfig::default()
        }
    }

    fn num(case: &Case, key: &str) -> f64 {
        match case.static_attr(key) {
            AttrValue::Num(v) => *v,
            other => panic!("{key}: {other:?}"),
        }
    }

    fn claimant(case: &Case) -> Claimant {
        let status = match case.static_attr("status") {
            AttrValue::Str(s) => STATUSES.iter().find(|x| **x == s).copied().unwrap(),
            other => panic!("{other:?}"),
        };
        Claimant {
            age: num(case, "age") as i64,
            claim_value: num(case, "claim_value"),
            status,
            previous_cases: num(case, "previous_cases") as i64,
        }
    }

    struct Cursor<'a> {
        acts: &'a [&'a str],
        i: usize,
    }

    impl Cursor<'_> {
        fn optional(&mut self, want: &str) -> bool {
            let hit = self.acts.get(self.i) == Some(&want);
            self.i += usize::from(hit);
            hit
        }

        fn expect(&mut self, want: &str) -> std::result::Result<(), String> {
            if self.optional(want) {
                Ok(())
            } else {
                Err(format!("expected {want} at {} in {:?}", self.i, self.acts))
            }
        }
    }

    /// Checks a trace against the variant's process, independently of the generator.
    fn accepts(cfg: &ClaimProcessConfig, variant: Variant, case: &Case) -> std::result::Result<(), String> {
        let acts = case.activities();
        let c = claimant(case);
        let main: Vec<&str> = acts
            .iter()
            .copied()
            .filter(|a| ![SEND_QUESTIONNAIRE, RECEIVE_RESPONSE, DEADLINE_EXPIRED].contains(a))
            .collect();
        let side: Vec<&str> = acts
            .iter()
            .copied()
            .filter(|a| [SEND_QUESTIONNAIRE, RECEIVE_RESPONSE, DEADLINE_EXPIRED].contains(a))
            .collect();
        if side.len() != 2 || side[0] != SEND_QUESTIONNAIRE {
            return Err(format!("questionnaire branch {side:?}"));
        }
        let complex = match variant {
            Variant::Drift1 => c.age >= 50,
            _ => c.claim_value >= cfg.claim_log_mean.exp(),
        };
        let mut cur = Cursor { acts: &main, i: 0 };
        cur.expect(REGISTER)?;
        cur.expect(CHECK_DOCUMENTS)?;
        if complex {
            cur.expect(COMPLEX_CHECK)?;
            if variant != Variant::Drift2 {
                cur.expect(CONTACT_HOSPITAL)?;
            }
            cur.optional(CONSULT_EXPERT);
        } else {
            cur.expect(BASIC_CHECK)?;
        }
        cur.expect(DECIDE)?;
        let accepted = cur.optional(ACCEPT);
        if !accepted {
            cur.expect(REJECT)?;
        }
        let phone = cur.optional(NOTIFY_PHONE);
        if !phone && matches!(c.status, "VIP" | "Gold") {
            return Err("high-status claimant without a phone call".into());
        }
        if !phone || !accepted {
            cur.expect(NOTIFY_POST)?;
        }
        if accepted {
            cur.expect(PAY)?;
        }
        cur.expect(ARCHIVE)?;
        cur.expect(CLOSE)?;
        if cur.i != main.len() {
            return Err(format!("trailing events in {main:?}"));
        }
        let last_two = &acts[acts.len() - 2..];
        if last_two != [ARCHIVE, CLOSE] {
            return Err("questionnaire branch not joined before archiving".into());
        }
        Ok(())
    }

    #[test]
    fn traces_follow_their_variant() {
        for variant in [Variant::Baseline, Variant::Drift1, Variant::Drift2] {
            let cfg = small(300, 300, 7);
            let g = generate(&cfg, variant).unwrap();
            for (i, case) in g.log.cases().iter().enumerate() {
                let v = if i < g.drift_index { Variant::Baseline } else { variant };
                accepts(&cfg, v, case).unwrap_or_else(|e| panic!("{variant} case {i}: {e}"));
            }
        }
    }

    #[test]
    fn vocabulary_and_drift_index() {
        let g = generate_drift1(&small(400, 400, 1)).unwrap();
        assert_eq!(g.drift_index, 400);
        assert_eq!(g.log.len(), 800);
        let mut expected: Vec<&str> = ACTIVITIES.to_vec();
        expected.sort_unstable();
        assert_eq!(g.log.activity_alphabet(), expected.as_slice());
        assert_eq!(generate_baseline(&small(50, 70, 1)).unwrap().log.len(), 50);
    }

    #[test]
    fn routing_examples() {
        let cfg = ClaimProcessConfig::default();
        let low = Claimant {
            age: 60,
            claim_value: cfg.claim_threshold() / 2.0,
            status: "Regular",
            previous_cases: 1,
        };
        assert!(!is_complex(&cfg, Variant::Baseline, &low));
        assert!(is_complex(&cfg, Variant::Drift1, &low));
        let vip = Claimant { status: "VIP", ..low.clone() };
        assert!(
            acceptance_probability(&cfg, Variant::Drift1, &vip) > acceptance_probability(&cfg, Variant::Drift1, &low)
        );

        let g = generate_drift1(&small(200, 400, 3)).unwrap();
        for case in &g.log.cases()[g.drift_index..] {
            let c = claimant(case);
            let acts = case.activities();
            if c.age >= 50 && c.claim_value < cfg.claim_threshold() {
                assert!(acts.contains(&COMPLEX_CHECK));
            }
        }
        let b = generate_baseline(&small(400, 0, 3)).unwrap();
        for case in b.log.cases() {
            let acts = case.activities();
            if claimant(case).claim_value < cfg.claim_threshold() {
                assert!(acts.contains(&BASIC_CHECK) && !acts.contains(&COMPLEX_CHECK));
            } else {
                assert!(acts.contains(&CONTACT_HOSPITAL));
            }
        }
    }

    #[test]
    fn drift2_changes() {
        let g = generate_drift2(&small(1000, 1000, 5)).unwrap();
        let (pre, post) = g.log.cases().split_at(g.drift_index);
        assert!(post.iter().all(|c| !c.activities().contains(&CONTACT_HOSPITAL)));
        let mean_age = |cs: &[Case]| cs.iter().map(|c| num(c, "age")).sum::<f64>() / cs.len() as f64;
        assert!(mean_age(post) > mean_age(pre));
        let complex = |cs: &[Case]| cs.iter().filter(|c| c.activities().contains(&COMPLEX_CHECK)).count();
        assert!(complex(post) > complex(pre));
    }

    #[test]
    fn events_per_case_near_eleven() {
        let g = generate_drift2(&small(4000, 4000, 11)).unwrap();
        let avg = g.log.event_count() as f64 / g.log.len() as f64;
        let target = 88_000.0 / 8_000.0;
        assert!((avg - target).abs() <= 0.1 * target, "{avg}");
    }

    #[test]
    fn determinism_and_shared_prefix() {
        let a = generate_drift1(&small(100, 100, 9)).unwrap();
        let b = generate_drift1(&small(100, 100, 9)).unwrap();
        assert_eq!(a.log, b.log);
        let base = generate_baseline(&small(100, 100, 9)).unwrap();
        assert_eq!(&a.log.cases()[..100], base.log.cases());
        let other = generate_drift1(&small(100, 100, 10)).unwrap();
        assert_ne!(a.log, other.log);
    }

    #[test]
    fn outcome_rates_are_mixed() {
        let cfg = small(1000, 1000, 2);
        let phi41 = parse_formula("F(\"Accept Claim\")").unwrap();
        let phi51 = parse_formula("F(\"Send Notification by Phone\") & F(\"Send Notification by Post\")").unwrap();
        for g in [generate_drift1(&cfg).unwrap(), generate_drift2(&cfg).unwrap()] {
            for f in [&phi41, &phi51] {
                let labels = label_log(&g.log, f).unwrap();
                let rate = labels.values().filter(|v| **v).count() as f64 / labels.len() as f64;
                assert!(rate > 0.05 && rate < 0.95, "{f}: {rate}");
            }
        }
    }

    #[test]
    fn canonical_order_keeps_generation_order() {
        let g = generate_drift1(&small(30, 30, 4)).unwrap();
        let ids: Vec<&str> = g.log.cases().iter().map(|c| c.case_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
        assert!(matches!(
            generate(&small(0, 10, 1), Variant::Drift1),
            Err(Error::InvalidConfig(_))
        ));
    }
}
