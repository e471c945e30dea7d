//! Bounded opponent memory.
//!
//! Each cooperator keeps at most `M` interaction records keyed by opponent.
//! A record stores how often the opponent cooperated and defected against
//! the owner; the Laplace-smoothed ratio of those counts is the owner's
//! perception of the opponent. When a full memory must admit a new opponent,
//! one entry is evicted according to the configured [`ForgettingStrategy`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ContractViolation;
use crate::model::{Action, AgentId, ForgettingStrategy};

/// Cooperation and defection counts observed from one opponent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub cooperations: u32,
    pub defections: u32,
}

impl InteractionRecord {
    pub const fn new(cooperations: u32, defections: u32) -> Self {
        Self {
            cooperations,
            defections,
        }
    }

    /// Record of a single observed action.
    pub fn first(action: Action) -> Self {
        let mut rec = Self::default();
        rec.observe(action);
        rec
    }

    pub fn observe(&mut self, action: Action) {
        match action {
            Action::Cooperate => self.cooperations += 1,
            Action::Defect => self.defections += 1,
        }
    }

    /// Total observed games.
    pub fn games(&self) -> u64 {
        self.cooperations as u64 + self.defections as u64
    }

    pub fn perceived_ratio(&self) -> f64 {
        perceived_ratio(*self)
    }
}

/// Perceived cooperation ratio `(c + 1) / (c + d + 2)`.
pub fn perceived_ratio(rec: InteractionRecord) -> f64 {
    laplace_ratio(rec.cooperations as u64, rec.defections as u64)
}

/// Rule-of-succession estimate from raw counts.
pub(crate) fn laplace_ratio(cooperations: u64, defections: u64) -> f64 {
    (cooperations as f64 + 1.0) / ((cooperations + defections) as f64 + 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Perception {
    PerceivedCooperator,
    PerceivedDefector,
    /// Fewer than `beta` games observed.
    Undefined,
}

impl Perception {
    pub fn to_char(self) -> char {
        match self {
            Perception::PerceivedCooperator => 'C',
            Perception::PerceivedDefector => 'D',
            Perception::Undefined => 'U',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'C' => Some(Perception::PerceivedCooperator),
            'D' => Some(Perception::PerceivedDefector),
            'U' => Some(Perception::Undefined),
            _ => None,
        }
    }
}

/// Classifies a record under optimism threshold `alpha` and tolerance `beta`.
///
/// Records with fewer than `beta` games are [`Perception::Undefined`];
/// otherwise the opponent is a perceived cooperator iff its ratio is
/// strictly greater than `alpha`.
pub fn classify(rec: InteractionRecord, alpha: f64, beta: u32) -> Perception {
    if rec.games() < beta as u64 {
        Perception::Undefined
    } else if perceived_ratio(rec) > alpha {
        Perception::PerceivedCooperator
    } else {
        Perception::PerceivedDefector
    }
}

/// Bounded associative store `AgentId -> InteractionRecord` owned by one agent.
///
/// Lookups go through a dense slot table sized to the population; `members`
/// keeps the live keys in a deterministic order for victim selection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryStore {
    owner: AgentId,
    capacity: usize,
    slots: Vec<Option<InteractionRecord>>,
    members: Vec<AgentId>,
    position: Vec<usize>,
}

impl MemoryStore {
    /// Empty memory of `capacity` entries for `owner` in a population of
    /// `population` agents.
    pub fn new(owner: AgentId, capacity: usize, population: usize) -> Self {
        assert!(capacity >= 1, "memory capacity must be at least 1");
        assert!(owner.index() < population, "owner outside population");
        Self {
            owner,
            capacity,
            slots: vec![None; population],
            members: Vec::with_capacity(capacity),
            position: vec![usize::MAX; population],
        }
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.capacity
    }

    #[inline]
    pub fn get(&self, id: AgentId) -> Option<&InteractionRecord> {
        self.slots.get(id.index()).and_then(Option::as_ref)
    }

    #[inline]
    pub fn contains(&self, id: AgentId) -> bool {
        self.get(id).is_some()
    }

    /// Live entries in internal order.
    pub fn iter(&self) -> impl Iterator<Item = (AgentId, &InteractionRecord)> + '_ {
        self.members.iter().map(move |&id| {
            let rec = self.slots[id.index()]
                .as_ref()
                .expect("member has a record");
            (id, rec)
        })
    }

    /// Opponent ids in internal order.
    pub fn members(&self) -> &[AgentId] {
        &self.members
    }

    /// Inserts a record for an absent opponent without eviction. Fails if
    /// the memory is full, the id is the owner, or the id is already present.
    pub fn insert(&mut self, id: AgentId, rec: InteractionRecord) -> Result<(), MemoryInsertError> {
        if id == self.owner {
            return Err(MemoryInsertError::Owner);
        }
        if id.index() >= self.slots.len() {
            return Err(MemoryInsertError::OutsidePopulation);
        }
        if self.contains(id) {
            return Err(MemoryInsertError::Present);
        }
        if self.is_full() {
            return Err(MemoryInsertError::Full);
        }
        self.slots[id.index()] = Some(rec);
        self.position[id.index()] = self.members.len();
        self.members.push(id);
        Ok(())
    }

    /// Removes an entry, returning its record.
    pub fn remove(&mut self, id: AgentId) -> Option<InteractionRecord> {
        let rec = self.slots.get_mut(id.index())?.take()?;
        let pos = self.position[id.index()];
        self.members.swap_remove(pos);
        if let Some(&moved) = self.members.get(pos) {
            self.position[moved.index()] = pos;
        }
        self.position[id.index()] = usize::MAX;
        Some(rec)
    }

    /// Registers the opponent's action from a game just played.
    ///
    /// A known opponent has its counter incremented. An unknown opponent is
    /// inserted with a fresh record, evicting one entry first when the
    /// memory is full. `cutoff` and `beta` classify entries for
    /// [`select_victim`](Self::select_victim). Returns the evicted id, if any.
    pub fn record_outcome<R: Rng + ?Sized>(
        &mut self,
        opponent: AgentId,
        action: Action,
        strategy: ForgettingStrategy,
        cutoff: f64,
        beta: u32,
        rng: &mut R,
    ) -> Option<AgentId> {
        debug_assert_ne!(opponent, self.owner, "agents never play themselves");
        if let Some(rec) = self.slots[opponent.index()].as_mut() {
            rec.observe(action);
            return None;
        }
        let evicted = if self.is_full() {
            let victim = self
                .select_victim(strategy, cutoff, beta, rng)
                .expect("a full memory is non-empty");
            self.remove(victim);
            Some(victim)
        } else {
            None
        };
        self.insert(opponent, InteractionRecord::first(action))
            .expect("slot is free after eviction");
        evicted
    }

    /// Picks the entry to forget.
    ///
    /// FR draws uniformly over all entries. FC and FD draw uniformly over
    /// the preferred perception class (perceived cooperators or perceived
    /// defectors, as classified by `classify(record, cutoff, beta)`); if that
    /// class is empty they fall back to the undefined entries, and then to
    /// all entries.
    pub fn select_victim<R: Rng + ?Sized>(
        &self,
        strategy: ForgettingStrategy,
        cutoff: f64,
        beta: u32,
        rng: &mut R,
    ) -> Result<AgentId, ContractViolation> {
        if self.members.is_empty() {
            return Err(ContractViolation::EmptyMemory);
        }
        let preferred = match strategy {
            ForgettingStrategy::ForgetRandom => return Ok(self.uniform_member(rng)),
            ForgettingStrategy::ForgetCooperators => Perception::PerceivedCooperator,
            ForgettingStrategy::ForgetDefectors => Perception::PerceivedDefector,
        };
        for class in [preferred, Perception::Undefined] {
            if let Some(id) = self.uniform_in_class(class, cutoff, beta, rng) {
                return Ok(id);
            }
        }
        Ok(self.uniform_member(rng))
    }

    fn uniform_member<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentId {
        self.members[rng.gen_range(0..self.members.len())]
    }

    /// Uniform draw among entries classified as `class`; consumes no
    /// randomness when the class is empty.
    fn uniform_in_class<R: Rng + ?Sized>(
        &self,
        class: Perception,
        cutoff: f64,
        beta: u32,
        rng: &mut R,
    ) -> Option<AgentId> {
        let in_class =
            |(_, rec): &(AgentId, &InteractionRecord)| classify(**rec, cutoff, beta) == class;
        let count = self.iter().filter(in_class).count();
        if count == 0 {
            return None;
        }
        let k = rng.gen_range(0..count);
        self.iter().filter(in_class).nth(k).map(|(id, _)| id)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MemoryInsertError {
    #[error("memory is full")]
    Full,
    #[error("opponent already present")]
    Present,
    #[error("an agent cannot remember itself")]
    Owner,
    #[error("opponent id outside the population")]
    OutsidePopulation,
}
