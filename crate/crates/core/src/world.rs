use crate::memory::MemoryStore;
use crate::model::{AgentId, AgentType};

/// Agent types plus the memories of the agents that keep one.
///
/// Only cooperators carry a [`MemoryStore`]; defectors always play and never
/// recommend, so their slot is `None`.
#[derive(Clone, Debug)]
pub struct World {
    types: Vec<AgentType>,
    memories: Vec<Option<MemoryStore>>,
}

impl World {
    /// Standard population: cooperators on `[0, n/2)`, defectors on `[n/2, n)`.
    pub fn standard(n: usize, capacity: usize) -> Self {
        let types = (0..n)
            .map(|i| {
                if i < n / 2 {
                    AgentType::Cooperator
                } else {
                    AgentType::Defector
                }
            })
            .collect();
        Self::with_types(types, capacity)
    }

    /// Arbitrary type assignment, one entry per agent.
    pub fn with_types(types: Vec<AgentType>, capacity: usize) -> Self {
        let n = types.len();
        let memories = types
            .iter()
            .enumerate()
            .map(|(i, ty)| match ty {
                AgentType::Cooperator => Some(MemoryStore::new(AgentId(i), capacity, n)),
                AgentType::Defector => None,
            })
            .collect();
        Self { types, memories }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[AgentType] {
        &self.types
    }

    #[inline]
    pub fn agent_type(&self, id: AgentId) -> AgentType {
        self.types[id.index()]
    }

    #[inline]
    pub fn memory(&self, id: AgentId) -> Option<&MemoryStore> {
        self.memories[id.index()].as_ref()
    }

    #[inline]
    pub fn memory_mut(&mut self, id: AgentId) -> Option<&mut MemoryStore> {
        self.memories[id.index()].as_mut()
    }

    /// `(owner, memory)` for every cooperator, in id order.
    pub fn cooperator_memories(&self) -> impl Iterator<Item = (AgentId, &MemoryStore)> + '_ {
        self.memories
            .iter()
            .enumerate()
            .filter(|(i, _)| self.types[*i] == AgentType::Cooperator)
            .filter_map(|(i, m)| m.as_ref().map(|m| (AgentId(i), m)))
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.types.len()).map(AgentId)
    }
}
