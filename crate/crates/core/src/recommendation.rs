//! Second-hand evidence about an unknown opponent.
//!
//! An inquirer asks the cooperators in its own memory what they remember
//! about the target. Recommenders report raw counts, which are either pooled
//! before smoothing or smoothed per recommender and averaged.

use crate::error::ContractViolation;
use crate::memory::{laplace_ratio, perceived_ratio, InteractionRecord};
use crate::model::{AgentId, AgentType, RecommendationMode};
use crate::world::World;

/// Recommenders and their records of the target.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecommenderSet {
    pub members: Vec<(AgentId, InteractionRecord)>,
}

impl RecommenderSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = InteractionRecord> + '_ {
        self.members.iter().map(|(_, r)| *r)
    }
}

impl FromIterator<(AgentId, InteractionRecord)> for RecommenderSet {
    fn from_iter<I: IntoIterator<Item = (AgentId, InteractionRecord)>>(iter: I) -> Self {
        Self {
            members: iter.into_iter().collect(),
        }
    }
}

/// Cooperators in the inquirer's memory that remember `target`, with their
/// record of it.
pub fn recommenders<'w>(
    world: &'w World,
    inquirer: AgentId,
    target: AgentId,
) -> impl Iterator<Item = (AgentId, InteractionRecord)> + 'w {
    world
        .memory(inquirer)
        .into_iter()
        .flat_map(|m| m.members().iter().copied())
        .filter(move |&k| k != inquirer && k != target)
        .filter(move |&k| world.agent_type(k) == AgentType::Cooperator)
        .filter_map(move |k| {
            world
                .memory(k)
                .and_then(|mk| mk.get(target))
                .map(|rec| (k, *rec))
        })
}

/// Builds the recommender set for `inquirer` asking about `target`.
pub fn gather_recommenders(world: &World, inquirer: AgentId, target: AgentId) -> RecommenderSet {
    recommenders(world, inquirer, target).collect()
}

/// `(sum c + 1) / (sum (c + d) + 2)` over all recommenders.
pub fn pooled_ratio(recs: &RecommenderSet) -> Result<f64, ContractViolation> {
    pooled_from(recs.records()).ok_or(ContractViolation::EmptyRecommenderSet)
}

/// Mean of the recommenders' individual perceived ratios.
pub fn legacy_mean_ratio(recs: &RecommenderSet) -> Result<f64, ContractViolation> {
    legacy_mean_from(recs.records()).ok_or(ContractViolation::EmptyRecommenderSet)
}

/// Aggregates with the configured mode.
pub fn aggregate(
    recs: &RecommenderSet,
    mode: RecommendationMode,
) -> Result<f64, ContractViolation> {
    match mode {
        RecommendationMode::Pooled => pooled_ratio(recs),
        RecommendationMode::LegacyMean => legacy_mean_ratio(recs),
    }
}

/// Aggregated ratio straight from the world, or `None` when nobody
/// recommends. Same result as gathering then aggregating, without the
/// intermediate set.
pub(crate) fn aggregate_in_world(
    world: &World,
    inquirer: AgentId,
    target: AgentId,
    mode: RecommendationMode,
) -> Option<f64> {
    let recs = recommenders(world, inquirer, target).map(|(_, r)| r);
    match mode {
        RecommendationMode::Pooled => pooled_from(recs),
        RecommendationMode::LegacyMean => legacy_mean_from(recs),
    }
}

fn pooled_from(recs: impl Iterator<Item = InteractionRecord>) -> Option<f64> {
    let mut any = false;
    let (mut c, mut d) = (0u64, 0u64);
    for r in recs {
        any = true;
        c += r.cooperations as u64;
        d += r.defections as u64;
    }
    any.then(|| laplace_ratio(c, d))
}

fn legacy_mean_from(recs: impl Iterator<Item = InteractionRecord>) -> Option<f64> {
    let (sum, n) = recs.fold((0.0, 0usize), |(s, n), r| (s + perceived_ratio(r), n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(records: &[(u32, u32)]) -> RecommenderSet {
        records
            .iter()
            .enumerate()
            .map(|(k, &(c, d))| (AgentId(k), InteractionRecord::new(c, d)))
            .collect()
    }

    #[test]
    fn pooled_examples() {
        assert!((pooled_ratio(&set(&[(2, 1), (1, 0)])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(pooled_ratio(&set(&[(1, 0)])).unwrap(), 2.0 / 3.0);
        assert!((pooled_ratio(&set(&[(0, 5), (0, 5)])).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn legacy_examples() {
        assert_eq!(legacy_mean_ratio(&set(&[(1, 0)])).unwrap(), 2.0 / 3.0);
        assert!((legacy_mean_ratio(&set(&[(1, 0), (0, 1)])).unwrap() - 0.5).abs() < 1e-15);
        let legacy = legacy_mean_ratio(&set(&[(9, 0), (0, 1)])).unwrap();
        let pooled = pooled_ratio(&set(&[(9, 0), (0, 1)])).unwrap();
        assert!((legacy - (10.0 / 11.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((pooled - 10.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn empty_set_is_a_violation() {
        let empty = RecommenderSet::default();
        assert_eq!(
            pooled_ratio(&empty),
            Err(ContractViolation::EmptyRecommenderSet)
        );
        assert_eq!(
            legacy_mean_ratio(&empty),
            Err(ContractViolation::EmptyRecommenderSet)
        );
    }

    fn fixture() -> World {
        // agents 0..3 cooperators, 3..6 defectors
        use AgentType::*;
        let types = vec![
            Cooperator, Cooperator, Cooperator, Defector, Defector, Defector,
        ];
        World::with_types(types, 4)
    }

    #[test]
    fn empty_memory_has_no_recommenders() {
        let w = fixture();
        assert!(gather_recommenders(&w, AgentId(0), AgentId(5)).is_empty());
    }

    #[test]
    fn only_cooperators_that_remember_the_target() {
        let mut w = fixture();
        let target = AgentId(5);
        let m0 = w.memory_mut(AgentId(0)).unwrap();
        m0.insert(AgentId(1), InteractionRecord::new(1, 0)).unwrap();
        m0.insert(AgentId(2), InteractionRecord::new(1, 0)).unwrap();
        m0.insert(AgentId(4), InteractionRecord::new(0, 1)).unwrap();
        w.memory_mut(AgentId(1))
            .unwrap()
            .insert(target, InteractionRecord::new(3, 1))
            .unwrap();
        // agent 2 does not know the target; agent 4 is a defector
        w.memory_mut(AgentId(2))
            .unwrap()
            .insert(AgentId(3), InteractionRecord::new(0, 2))
            .unwrap();
        let recs = gather_recommenders(&w, AgentId(0), target);
        assert_eq!(
            recs.members,
            vec![(AgentId(1), InteractionRecord::new(3, 1))]
        );
        assert_eq!(
            aggregate_in_world(&w, AgentId(0), target, RecommendationMode::Pooled),
            Some(pooled_ratio(&recs).unwrap())
        );
    }

    #[test]
    fn recommender_without_target_gives_nothing() {
        let mut w = fixture();
        w.memory_mut(AgentId(0))
            .unwrap()
            .insert(AgentId(1), InteractionRecord::new(2, 0))
            .unwrap();
        assert!(gather_recommenders(&w, AgentId(0), AgentId(4)).is_empty());
        assert_eq!(
            aggregate_in_world(&w, AgentId(0), AgentId(4), RecommendationMode::LegacyMean),
            None
        );
    }
}
