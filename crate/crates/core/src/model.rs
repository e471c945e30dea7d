//! Static game vocabulary: agent types, actions, the payoff matrix and the
//! per-realization configuration.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Dense agent index in `[0, N)`.
///
/// Cooperators occupy `[0, N/2)` and defectors `[N/2, N)` in a standard
/// population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Innate behaviour of an agent. Fixed for the whole realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentType {
    Cooperator,
    Defector,
}

impl AgentType {
    /// Probability of playing [`Action::Cooperate`] under error rate `epsilon`.
    pub fn cooperation_probability(self, epsilon: f64) -> f64 {
        match self {
            AgentType::Cooperator => 1.0 - epsilon,
            AgentType::Defector => epsilon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub fn to_char(self) -> char {
        match self {
            Action::Cooperate => 'C',
            Action::Defect => 'D',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'C' => Some(Action::Cooperate),
            'D' => Some(Action::Defect),
            _ => None,
        }
    }
}

/// Draws one action for an agent of type `ty`. Consumes exactly one `f64`
/// from `rng`.
pub fn sample_action<R: Rng + ?Sized>(ty: AgentType, epsilon: f64, rng: &mut R) -> Action {
    let u: f64 = rng.gen();
    if u < ty.cooperation_probability(epsilon) {
        Action::Cooperate
    } else {
        Action::Defect
    }
}

/// Symmetric two-player payoff matrix `(S, P, R, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub sucker: f64,
    pub punishment: f64,
    pub reward: f64,
    pub temptation: f64,
}

impl PayoffMatrix {
    pub const fn new(sucker: f64, punishment: f64, reward: f64, temptation: f64) -> Self {
        Self {
            sucker,
            punishment,
            reward,
            temptation,
        }
    }

    /// `(S, P, R, T) = (0, 1, 3, 5)`.
    pub const fn standard() -> Self {
        Self::new(0.0, 1.0, 3.0, 5.0)
    }

    /// Checks `0 <= S < P < R < T` and `S + T < 2R`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let Self {
            sucker: s,
            punishment: p,
            reward: r,
            temptation: t,
        } = *self;
        let finite = [s, p, r, t].iter().all(|v| v.is_finite());
        if !finite || !(s < p && p < r && r < t) {
            return Err(ConfigError::Payoffs(format!(
                "expected S < P < R < T, got ({s}, {p}, {r}, {t})"
            )));
        }
        if s + t >= 2.0 * r {
            return Err(ConfigError::Payoffs(format!(
                "expected S + T < 2R, got S + T = {} and 2R = {}",
                s + t,
                2.0 * r
            )));
        }
        if s < 0.0 {
            return Err(ConfigError::Payoffs(format!(
                "payoffs must be non-negative, got S = {s}"
            )));
        }
        Ok(())
    }

    /// Payoffs `(p_i, p_j)` for the action pair `(a_i, a_j)`.
    pub fn resolve(&self, a_i: Action, a_j: Action) -> (f64, f64) {
        use Action::*;
        match (a_i, a_j) {
            (Cooperate, Cooperate) => (self.reward, self.reward),
            (Defect, Defect) => (self.punishment, self.punishment),
            (Cooperate, Defect) => (self.sucker, self.temptation),
            (Defect, Cooperate) => (self.temptation, self.sucker),
        }
    }
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        Self::standard()
    }
}

impl FromStr for PayoffMatrix {
    type Err = ConfigError;

    /// Parses `"S,P,R,T"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::Payoffs(format!("cannot parse {s:?}: {e}")))?;
        let [sucker, punishment, reward, temptation] = values[..] else {
            return Err(ConfigError::Payoffs(format!(
                "expected four comma-separated values S,P,R,T, got {s:?}"
            )));
        };
        let m = Self::new(sucker, punishment, reward, temptation);
        m.validate()?;
        Ok(m)
    }
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.sucker, self.punishment, self.reward, self.temptation
        )
    }
}

/// Which victim a full memory evicts when a new opponent arrives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForgettingStrategy {
    /// Forget a perceived cooperator.
    #[serde(rename = "FC")]
    ForgetCooperators,
    /// Forget uniformly at random.
    #[serde(rename = "FR")]
    ForgetRandom,
    /// Forget a perceived defector.
    #[serde(rename = "FD")]
    ForgetDefectors,
}

impl ForgettingStrategy {
    pub const ALL: [ForgettingStrategy; 3] = [
        ForgettingStrategy::ForgetCooperators,
        ForgettingStrategy::ForgetRandom,
        ForgettingStrategy::ForgetDefectors,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ForgettingStrategy::ForgetCooperators => "FC",
            ForgettingStrategy::ForgetRandom => "FR",
            ForgettingStrategy::ForgetDefectors => "FD",
        }
    }
}

impl fmt::Display for ForgettingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ForgettingStrategy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FC" => Ok(ForgettingStrategy::ForgetCooperators),
            "FR" => Ok(ForgettingStrategy::ForgetRandom),
            "FD" => Ok(ForgettingStrategy::ForgetDefectors),
            _ => Err(ConfigError::Parse {
                field: "forget",
                value: s.to_string(),
                expected: "one of FC, FR, FD",
            }),
        }
    }
}

/// Ratio cutoff that splits remembered opponents into the perceived
/// cooperator and perceived defector forgetting lists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgetCutoff {
    /// `t > 0.5`, independent of the optimism threshold.
    #[default]
    Neutral,
    /// `t > alpha`, the same cutoff as the play decision.
    Alpha,
}

impl ForgetCutoff {
    pub fn threshold(self, alpha: f64) -> f64 {
        match self {
            ForgetCutoff::Neutral => 0.5,
            ForgetCutoff::Alpha => alpha,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ForgetCutoff::Neutral => "neutral",
            ForgetCutoff::Alpha => "alpha",
        }
    }
}

impl fmt::Display for ForgetCutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ForgetCutoff {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "neutral" => Ok(ForgetCutoff::Neutral),
            "alpha" => Ok(ForgetCutoff::Alpha),
            _ => Err(ConfigError::Parse {
                field: "forget-cutoff",
                value: s.to_string(),
                expected: "one of neutral, alpha",
            }),
        }
    }
}

/// How recommendations about an unknown opponent are aggregated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendationMode {
    /// Sum the recommenders' counts, then apply Laplace smoothing once.
    #[default]
    Pooled,
    /// Average the recommenders' individual perceived ratios.
    LegacyMean,
}

impl RecommendationMode {
    pub fn code(self) -> &'static str {
        match self {
            RecommendationMode::Pooled => "pooled",
            RecommendationMode::LegacyMean => "legacy-mean",
        }
    }
}

impl fmt::Display for RecommendationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RecommendationMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pooled" => Ok(RecommendationMode::Pooled),
            "legacy-mean" | "legacy_mean" | "legacymean" => Ok(RecommendationMode::LegacyMean),
            _ => Err(ConfigError::Parse {
                field: "mode",
                value: s.to_string(),
                expected: "one of pooled, legacy-mean",
            }),
        }
    }
}

/// Parameters of a single realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Population size. Even, at least 2.
    pub n: usize,
    /// Error rate in `[0, 0.5]`.
    pub epsilon: f64,
    /// Memory ratio `M / N` in `(0, 1]`.
    pub mu: f64,
    /// Optimism threshold in `[0, 1)`. A cooperator plays when `t > alpha`.
    pub alpha: f64,
    /// Tolerance: games that must be observed before a memory-based rejection.
    pub beta: u32,
    pub forgetting: ForgettingStrategy,
    /// Cutoff used by FC/FD to build their preferred forgetting list.
    pub forget_cutoff: ForgetCutoff,
    /// Average matchings per pair; a realization has `tau * C(N, 2)` match events.
    pub tau: u32,
    pub payoffs: PayoffMatrix,
    pub recommendation_mode: RecommendationMode,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            epsilon: 0.1,
            mu: 0.3,
            alpha: 0.5,
            beta: 1,
            forgetting: ForgettingStrategy::ForgetCooperators,
            forget_cutoff: ForgetCutoff::Neutral,
            tau: 30,
            payoffs: PayoffMatrix::standard(),
            recommendation_mode: RecommendationMode::Pooled,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(ConfigError::out_of_range(
                "n",
                self.n,
                "an even integer >= 2",
            ));
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(ConfigError::out_of_range(
                "epsilon",
                self.epsilon,
                "0 <= epsilon <= 0.5",
            ));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(ConfigError::out_of_range("mu", self.mu, "0 < mu <= 1"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ConfigError::out_of_range(
                "alpha",
                self.alpha,
                "0 <= alpha < 1",
            ));
        }
        if self.beta < 1 {
            return Err(ConfigError::out_of_range("beta", self.beta, "beta >= 1"));
        }
        if self.tau < 1 {
            return Err(ConfigError::out_of_range("tau", self.tau, "tau >= 1"));
        }
        self.payoffs.validate()
    }

    /// `tau * C(N, 2)`.
    pub fn match_events(&self) -> u64 {
        let n = self.n as u64;
        self.tau as u64 * n * (n - 1) / 2
    }
}

/// Memory capacity `M = round(mu * N)`, half away from zero, at least 1.
pub fn memory_capacity(config: &SimConfig) -> usize {
    // f64::round rounds half away from zero.
    let m = (config.mu * config.n as f64).round() as usize;
    m.clamp(1, config.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(mu: f64, n: usize) -> SimConfig {
        SimConfig {
            mu,
            n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn capacity_rounding() {
        assert_eq!(memory_capacity(&cfg(0.3, 100)), 30);
        assert_eq!(memory_capacity(&cfg(1.0, 100)), 100);
        // 2.5 rounds away from zero
        assert_eq!(memory_capacity(&cfg(0.25, 10)), 3);
        assert_eq!(memory_capacity(&cfg(0.01, 10)), 1);
    }

    #[test]
    fn payoff_table() {
        use Action::*;
        let m = PayoffMatrix::standard();
        assert_eq!(m.resolve(Cooperate, Cooperate), (3.0, 3.0));
        assert_eq!(m.resolve(Cooperate, Defect), (0.0, 5.0));
        assert_eq!(m.resolve(Defect, Cooperate), (5.0, 0.0));
        assert_eq!(m.resolve(Defect, Defect), (1.0, 1.0));
    }

    #[test]
    fn payoff_swap_symmetry_and_totals() {
        let m = PayoffMatrix::standard();
        let allowed = [2.0 * m.reward, 2.0 * m.punishment, m.sucker + m.temptation];
        for a in [Action::Cooperate, Action::Defect] {
            for b in [Action::Cooperate, Action::Defect] {
                let (x, y) = m.resolve(a, b);
                assert_eq!((y, x), m.resolve(b, a));
                assert!(allowed.contains(&(x + y)));
            }
        }
    }

    #[test]
    fn zero_error_actions_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(
                sample_action(AgentType::Cooperator, 0.0, &mut rng),
                Action::Cooperate
            );
            assert_eq!(
                sample_action(AgentType::Defector, 0.0, &mut rng),
                Action::Defect
            );
        }
    }

    #[test]
    fn cooperator_error_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let coop = (0..draws)
            .filter(|_| sample_action(AgentType::Cooperator, 0.1, &mut rng) == Action::Cooperate)
            .count();
        let freq = coop as f64 / draws as f64;
        assert!((freq - 0.9).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn sample_action_consumes_one_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        sample_action(AgentType::Defector, 0.1, &mut a);
        let _: f64 = b.gen();
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }

    #[test]
    fn seeded_actions_reproduce() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| sample_action(AgentType::Cooperator, 0.3, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn invalid_payoffs_rejected() {
        assert!(PayoffMatrix::new(0.0, 1.0, 3.0, 5.0).validate().is_ok());
        // S + T >= 2R
        assert!(PayoffMatrix::new(0.0, 1.0, 3.0, 6.0).validate().is_err());
        // ordering
        assert!(PayoffMatrix::new(1.0, 0.0, 3.0, 5.0).validate().is_err());
        assert!(PayoffMatrix::new(-1.0, 1.0, 3.0, 4.0).validate().is_err());
        assert!("0,1,3".parse::<PayoffMatrix>().is_err());
        assert_eq!(
            "0, 1, 3, 5".parse::<PayoffMatrix>().unwrap(),
            PayoffMatrix::standard()
        );
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = [
            SimConfig {
                n: 99,
                ..SimConfig::default()
            },
            SimConfig {
                n: 0,
                ..SimConfig::default()
            },
            SimConfig {
                epsilon: 0.6,
                ..SimConfig::default()
            },
            SimConfig {
                mu: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                mu: 1.2,
                ..SimConfig::default()
            },
            SimConfig {
                alpha: 1.0,
                ..SimConfig::default()
            },
            SimConfig {
                alpha: -0.1,
                ..SimConfig::default()
            },
            SimConfig {
                beta: 0,
                ..SimConfig::default()
            },
            SimConfig {
                tau: 0,
                ..SimConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn match_event_count() {
        assert_eq!(SimConfig::default().match_events(), 148_500);
    }

    #[test]
    fn parse_codes() {
        assert_eq!(
            "fc".parse::<ForgettingStrategy>().unwrap(),
            ForgettingStrategy::ForgetCooperators
        );
        assert_eq!(
            "legacy-mean".parse::<RecommendationMode>().unwrap(),
            RecommendationMode::LegacyMean
        );
        assert!("FX".parse::<ForgettingStrategy>().is_err());
    }
}
