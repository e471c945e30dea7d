//! One realization of the matching game.
//!
//! Every match event draws an unordered pair uniformly, lets both agents
//! decide against the pre-match state, tallies cooperator misjudgments and,
//! if neither side rejects, plays one prisoner's dilemma round.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::memory::{classify, Perception};
use crate::metrics::{self, RealizationResult};
use crate::model::{memory_capacity, sample_action, Action, AgentId, AgentType, SimConfig};
use crate::recommendation::aggregate_in_world;
use crate::world::World;

/// What a decision was based on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    MemoryDefined,
    MemoryUndefined,
    Recommendation,
    NoInformation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Play,
    Reject,
}

impl Decision {
    pub fn to_char(self) -> char {
        match self {
            Decision::Play => 'P',
            Decision::Reject => 'R',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'P' => Some(Decision::Play),
            'R' => Some(Decision::Reject),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Judgment {
    pub basis: Basis,
    pub perception: Option<Perception>,
    pub decision: Decision,
}

impl Judgment {
    const FORCED_PLAY: Judgment = Judgment {
        basis: Basis::NoInformation,
        perception: None,
        decision: Decision::Play,
    };

    fn from_perception(basis: Basis, perception: Perception) -> Self {
        let decision = match perception {
            Perception::PerceivedDefector => Decision::Reject,
            Perception::PerceivedCooperator | Perception::Undefined => Decision::Play,
        };
        Judgment {
            basis,
            perception: Some(perception),
            decision,
        }
    }
}

/// Misjudgment counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misjudgments {
    /// Cooperator perceived as defector.
    pub cd: u64,
    /// Defector perceived as cooperator.
    pub dc: u64,
}

impl Misjudgments {
    /// Counts one decision event against the opponent's actual type.
    pub fn tally(&mut self, judgment: &Judgment, actual: AgentType) {
        match (judgment.perception, actual) {
            (Some(Perception::PerceivedDefector), AgentType::Cooperator) => self.cd += 1,
            (Some(Perception::PerceivedCooperator), AgentType::Defector) => self.dc += 1,
            _ => {}
        }
    }
}

/// Everything that happened in one match event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchEvent {
    /// Lower id of the pair.
    pub first: AgentId,
    /// Higher id of the pair.
    pub second: AgentId,
    pub judgments: [Judgment; 2],
    /// Present only when both sides played.
    pub actions: Option<[Action; 2]>,
    pub payoffs: Option<[f64; 2]>,
}

impl MatchEvent {
    pub fn played(&self) -> bool {
        self.actions.is_some()
    }
}

/// Draws an unordered pair of distinct agents uniformly, returned as
/// `(lower, higher)`. Consumes two draws.
pub fn draw_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (AgentId, AgentId) {
    debug_assert!(n >= 2);
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (AgentId(a.min(b)), AgentId(a.max(b)))
}

/// Mutable state of a running realization.
#[derive(Clone, Debug)]
pub struct Realization {
    config: SimConfig,
    world: World,
    payoffs: Vec<f64>,
    misjudgments: Misjudgments,
    games_played: u64,
    match_events: u64,
    rng: ChaCha8Rng,
}

impl Realization {
    /// Standard half-cooperator, half-defector population.
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let world = World::standard(config.n, memory_capacity(&config));
        Ok(Self::from_world(config, world))
    }

    /// Custom type assignment. `types.len()` must equal `config.n`.
    pub fn with_types(config: SimConfig, types: Vec<AgentType>) -> Result<Self, ConfigError> {
        config.validate()?;
        if types.len() != config.n {
            return Err(ConfigError::out_of_range(
                "n",
                types.len(),
                "one agent type per agent",
            ));
        }
        let world = World::with_types(types, memory_capacity(&config));
        Ok(Self::from_world(config, world))
    }

    fn from_world(config: SimConfig, world: World) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            payoffs: vec![0.0; config.n],
            config,
            world,
            misjudgments: Misjudgments::default(),
            games_played: 0,
            match_events: 0,
            rng,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Mutable world access for building fixtures.
    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn misjudgments(&self) -> Misjudgments {
        self.misjudgments
    }

    pub fn games_played(&self) -> u64 {
        self.games_played
    }

    pub fn match_events(&self) -> u64 {
        self.match_events
    }

    /// How agent `i` judges a match against `j` in the current state.
    pub fn decide_to_play(&self, i: AgentId, j: AgentId) -> Judgment {
        debug_assert_ne!(i, j);
        let Some(memory) = self.world.memory(i) else {
            // defectors always play
            return Judgment::FORCED_PLAY;
        };
        let SimConfig {
            alpha,
            beta,
            recommendation_mode,
            ..
        } = self.config;
        if let Some(rec) = memory.get(j) {
            let perception = classify(*rec, alpha, beta);
            let basis = if perception == Perception::Undefined {
                Basis::MemoryUndefined
            } else {
                Basis::MemoryDefined
            };
            return Judgment::from_perception(basis, perception);
        }
        match aggregate_in_world(&self.world, i, j, recommendation_mode) {
            None => Judgment::FORCED_PLAY,
            Some(t) => {
                // no tolerance on second-hand evidence
                let perception = if t > alpha {
                    Perception::PerceivedCooperator
                } else {
                    Perception::PerceivedDefector
                };
                Judgment::from_perception(Basis::Recommendation, perception)
            }
        }
    }

    /// One match event with a freshly drawn pair.
    pub fn step(&mut self) -> MatchEvent {
        let (i, j) = draw_pair(self.config.n, &mut self.rng);
        self.play_match(i, j)
    }

    /// One match event for a given pair.
    pub fn play_match(&mut self, a: AgentId, b: AgentId) -> MatchEvent {
        assert_ne!(a, b, "an agent cannot be matched with itself");
        let (i, j) = (a.min(b), a.max(b));
        self.match_events += 1;

        let judgments = [self.decide_to_play(i, j), self.decide_to_play(j, i)];
        for (judgment, opponent) in judgments.iter().zip([j, i]) {
            self.misjudgments
                .tally(judgment, self.world.agent_type(opponent));
        }

        let mut event = MatchEvent {
            first: i,
            second: j,
            judgments,
            actions: None,
            payoffs: None,
        };
        if judgments.iter().any(|jd| jd.decision == Decision::Reject) {
            return event;
        }

        let epsilon = self.config.epsilon;
        let act_i = sample_action(self.world.agent_type(i), epsilon, &mut self.rng);
        let act_j = sample_action(self.world.agent_type(j), epsilon, &mut self.rng);
        let (pay_i, pay_j) = self.config.payoffs.resolve(act_i, act_j);
        self.payoffs[i.index()] += pay_i;
        self.payoffs[j.index()] += pay_j;
        self.games_played += 1;

        let SimConfig {
            forgetting,
            forget_cutoff,
            alpha,
            beta,
            ..
        } = self.config;
        let cutoff = forget_cutoff.threshold(alpha);
        for (owner, opponent, seen) in [(i, j, act_j), (j, i, act_i)] {
            if let Some(memory) = self.world.memory_mut(owner) {
                memory.record_outcome(opponent, seen, forgetting, cutoff, beta, &mut self.rng);
            }
        }

        event.actions = Some([act_i, act_j]);
        event.payoffs = Some([pay_i, pay_j]);
        event
    }

    /// Runs all remaining match events.
    pub fn run_to_end(&mut self) {
        self.run_with(|_| {});
    }

    /// Runs all remaining match events, handing each to `observer`.
    pub fn run_with<F: FnMut(&MatchEvent)>(&mut self, mut observer: F) {
        let total = self.config.match_events();
        while self.match_events < total {
            let event = self.step();
            observer(&event);
        }
    }

    /// End-of-realization measurements of the current state.
    pub fn result(&self) -> RealizationResult {
        metrics::measure(self)
    }
}

/// Runs a full realization from a fresh seed.
pub fn run_realization(config: &SimConfig) -> Result<RealizationResult, ConfigError> {
    let mut realization = Realization::new(config.clone())?;
    realization.run_to_end();
    Ok(realization.result())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::InteractionRecord;

    fn config(alpha: f64, beta: u32) -> SimConfig {
        SimConfig {
            n: 10,
            mu: 0.5,
            alpha,
            beta,
            ..SimConfig::default()
        }
    }

    fn with_record(alpha: f64, beta: u32, rec: InteractionRecord) -> Realization {
        let mut r = Realization::new(config(alpha, beta)).unwrap();
        r.world_mut()
            .memory_mut(AgentId(0))
            .unwrap()
            .insert(AgentId(1), rec)
            .unwrap();
        r
    }

    #[test]
    fn one_defection_rejected_at_half() {
        let r = with_record(0.5, 1, InteractionRecord::new(0, 1));
        let jd = r.decide_to_play(AgentId(0), AgentId(1));
        assert_eq!(jd.decision, Decision::Reject);
        assert_eq!(jd.basis, Basis::MemoryDefined);
        assert_eq!(jd.perception, Some(Perception::PerceivedDefector));
    }

    #[test]
    fn tolerance_forces_play() {
        let r = with_record(0.5, 2, InteractionRecord::new(0, 1));
        let jd = r.decide_to_play(AgentId(0), AgentId(1));
        assert_eq!(jd.decision, Decision::Play);
        assert_eq!(jd.basis, Basis::MemoryUndefined);
        assert_eq!(jd.perception, Some(Perception::Undefined));
    }

    #[test]
    fn unknown_without_recommenders_plays() {
        let r = Realization::new(config(0.5, 1)).unwrap();
        let jd = r.decide_to_play(AgentId(0), AgentId(7));
        assert_eq!(jd, Judgment::FORCED_PLAY);
    }

    #[test]
    fn defectors_always_play() {
        let r = Realization::new(config(0.9, 1)).unwrap();
        assert_eq!(
            r.decide_to_play(AgentId(6), AgentId(0)),
            Judgment::FORCED_PLAY
        );
    }

    #[test]
    fn recommendation_ignores_tolerance() {
        // 0 knows 1; 1 saw 7 defect once. beta = 3 would make the record
        // undefined in 1's own memory, but 0 decides on it directly.
        let mut r = Realization::new(config(0.5, 3)).unwrap();
        r.world_mut()
            .memory_mut(AgentId(0))
            .unwrap()
            .insert(AgentId(1), InteractionRecord::new(1, 0))
            .unwrap();
        r.world_mut()
            .memory_mut(AgentId(1))
            .unwrap()
            .insert(AgentId(7), InteractionRecord::new(0, 1))
            .unwrap();
        let jd = r.decide_to_play(AgentId(0), AgentId(7));
        assert_eq!(jd.basis, Basis::Recommendation);
        assert_eq!(jd.perception, Some(Perception::PerceivedDefector));
        assert_eq!(jd.decision, Decision::Reject);
    }

    #[test]
    fn tally_rules() {
        let mut m = Misjudgments::default();
        let as_defector =
            Judgment::from_perception(Basis::MemoryDefined, Perception::PerceivedDefector);
        let as_cooperator =
            Judgment::from_perception(Basis::Recommendation, Perception::PerceivedCooperator);
        let undefined = Judgment::from_perception(Basis::MemoryUndefined, Perception::Undefined);
        m.tally(&as_defector, AgentType::Cooperator);
        assert_eq!(m, Misjudgments { cd: 1, dc: 0 });
        m.tally(&as_cooperator, AgentType::Cooperator);
        m.tally(&as_defector, AgentType::Defector);
        m.tally(&undefined, AgentType::Defector);
        m.tally(&Judgment::FORCED_PLAY, AgentType::Defector);
        assert_eq!(m, Misjudgments { cd: 1, dc: 0 });
        m.tally(&as_cooperator, AgentType::Defector);
        assert_eq!(m, Misjudgments { cd: 1, dc: 1 });
    }

    #[test]
    fn rejection_changes_nothing() {
        let mut r = with_record(0.5, 1, InteractionRecord::new(0, 1));
        let before_mem = r.world().memory(AgentId(0)).unwrap().clone();
        let ev = r.play_match(AgentId(1), AgentId(0));
        assert!(!ev.played());
        assert_eq!(r.payoffs(), &[0.0; 10]);
        assert_eq!(r.games_played(), 0);
        assert_eq!(r.match_events(), 1);
        assert_eq!(r.world().memory(AgentId(0)).unwrap(), &before_mem);
        // the rejection was a misjudgment of a cooperator
        assert_eq!(r.misjudgments().cd, 1);
    }

    #[test]
    fn two_defectors_always_play() {
        let mut r = Realization::new(SimConfig {
            alpha: 0.9,
            ..config(0.9, 1)
        })
        .unwrap();
        for _ in 0..50 {
            let ev = r.play_match(AgentId(5), AgentId(9));
            let [a, b] = ev.actions.expect("defectors always play");
            assert_eq!(ev.payoffs.unwrap(), {
                let (x, y) = r.config().payoffs.resolve(a, b);
                [x, y]
            });
        }
        assert_eq!(r.games_played(), 50);
    }

    #[test]
    fn play_updates_cooperator_memory() {
        let mut r = Realization::new(SimConfig {
            epsilon: 0.0,
            ..config(0.5, 1)
        })
        .unwrap();
        let ev = r.play_match(AgentId(0), AgentId(6));
        assert_eq!(ev.actions, Some([Action::Cooperate, Action::Defect]));
        assert_eq!(ev.payoffs, Some([0.0, 5.0]));
        assert_eq!(
            r.world().memory(AgentId(0)).unwrap().get(AgentId(6)),
            Some(&InteractionRecord::new(0, 1))
        );
        assert!(r.world().memory(AgentId(6)).is_none());
    }

    #[test]
    fn forget_cutoff_picks_the_forgetting_list() {
        use crate::model::ForgetCutoff;
        // capacity 2; agent 0 remembers 1 as (1,0) and 2 as (0,1), then meets 3
        let run = |cutoff, seed| {
            let config = SimConfig {
                seed,
                n: 4,
                mu: 0.5,
                alpha: 0.7,
                epsilon: 0.0,
                forget_cutoff: cutoff,
                ..SimConfig::default()
            };
            let types = vec![AgentType::Cooperator; 4];
            let mut r = Realization::with_types(config, types).unwrap();
            let m = r.world_mut().memory_mut(AgentId(0)).unwrap();
            m.insert(AgentId(1), InteractionRecord::new(1, 0)).unwrap();
            m.insert(AgentId(2), InteractionRecord::new(0, 1)).unwrap();
            r.play_match(AgentId(0), AgentId(3));
            let m = r.world().memory(AgentId(0)).unwrap();
            (m.contains(AgentId(1)), m.contains(AgentId(2)))
        };
        // t = 2/3 is a perceived cooperator under 0.5, so FC forgets agent 1
        for seed in 0..40 {
            assert_eq!(run(ForgetCutoff::Neutral, seed), (false, true));
        }
        // under alpha = 0.7 both are perceived defectors, eviction is uniform
        let outcomes: std::collections::HashSet<_> =
            (0..40).map(|s| run(ForgetCutoff::Alpha, s)).collect();
        assert_eq!(outcomes.len(), 2, "{outcomes:?}");
    }

    #[test]
    fn pair_draw_is_distinct_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let (a, b) = draw_pair(7, &mut rng);
            assert!(a < b && b.index() < 7);
        }
    }
}
