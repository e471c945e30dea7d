//! End-of-realization measurements: payoff ratio, system knowledge, memory
//! census and the perception graph.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::engine::Realization;
use crate::memory::{classify, laplace_ratio, Perception};
use crate::model::{AgentId, AgentType};
use crate::world::World;

/// Average content of one cooperator memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryCensus {
    pub actual_cooperators: f64,
    pub actual_defectors: f64,
    pub perceived_cooperators: f64,
    pub perceived_defectors: f64,
    pub undefined: f64,
}

impl MemoryCensus {
    pub fn occupancy(&self) -> f64 {
        self.actual_cooperators + self.actual_defectors
    }
}

/// All measurements of one finished realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    /// Mean cooperator payoff over mean population payoff; `None` when the
    /// population earned nothing.
    pub phi: Option<f64>,
    pub eta_cd: u64,
    pub eta_dc: u64,
    pub t_c: f64,
    pub t_d: f64,
    pub census: MemoryCensus,
    pub mean_payoff_cooperators: Option<f64>,
    pub mean_payoff_defectors: Option<f64>,
    pub mean_payoff_all: f64,
    /// Total payoff divided by the number of player-games. Diagnostic only.
    pub payoff_per_game: Option<f64>,
    pub total_payoff: f64,
    pub games_played: u64,
    pub match_events: u64,
}

/// Total payoff of the population is zero, so the payoff ratio is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("degenerate run: total payoff is zero")]
pub struct DegenerateRun;

fn mean_over(payoffs: &[f64], types: &[AgentType], ty: AgentType) -> Option<f64> {
    let (sum, n) = payoffs
        .iter()
        .zip(types)
        .filter(|(_, t)| **t == ty)
        .fold((0.0, 0usize), |(s, n), (p, _)| (s + p, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `phi = mean payoff of cooperators / mean payoff of all agents`.
pub fn payoff_ratio(payoffs: &[f64], types: &[AgentType]) -> Result<f64, DegenerateRun> {
    assert_eq!(payoffs.len(), types.len());
    let total: f64 = payoffs.iter().sum();
    if total <= 0.0 || payoffs.is_empty() {
        return Err(DegenerateRun);
    }
    let mean_all = total / payoffs.len() as f64;
    let mean_c = mean_over(payoffs, types, AgentType::Cooperator).unwrap_or(0.0);
    Ok(mean_c / mean_all)
}

/// Laplace ratios over all counts cooperators hold about cooperators (`t_C`)
/// and about defectors (`t_D`).
pub fn system_knowledge(world: &World) -> (f64, f64) {
    let mut sums = [(0u64, 0u64); 2];
    for (_, memory) in world.cooperator_memories() {
        for (target, rec) in memory.iter() {
            let slot = match world.agent_type(target) {
                AgentType::Cooperator => 0,
                AgentType::Defector => 1,
            };
            sums[slot].0 += rec.cooperations as u64;
            sums[slot].1 += rec.defections as u64;
        }
    }
    (
        laplace_ratio(sums[0].0, sums[0].1),
        laplace_ratio(sums[1].0, sums[1].1),
    )
}

/// Per-memory average of entries split by actual type and by perception.
pub fn memory_census(world: &World, alpha: f64, beta: u32) -> MemoryCensus {
    let mut totals = [0usize; 5];
    let mut owners = 0usize;
    for (_, memory) in world.cooperator_memories() {
        owners += 1;
        for (target, rec) in memory.iter() {
            match world.agent_type(target) {
                AgentType::Cooperator => totals[0] += 1,
                AgentType::Defector => totals[1] += 1,
            }
            match classify(*rec, alpha, beta) {
                Perception::PerceivedCooperator => totals[2] += 1,
                Perception::PerceivedDefector => totals[3] += 1,
                Perception::Undefined => totals[4] += 1,
            }
        }
    }
    if owners == 0 {
        return MemoryCensus::default();
    }
    let avg = |k: usize| totals[k] as f64 / owners as f64;
    MemoryCensus {
        actual_cooperators: avg(0),
        actual_defectors: avg(1),
        perceived_cooperators: avg(2),
        perceived_defectors: avg(3),
        undefined: avg(4),
    }
}

/// Directed edge `source -> target` weighted by the source's perceived ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptionEdge {
    pub source: AgentId,
    pub target: AgentId,
    pub t: f64,
    pub c: u32,
    pub d: u32,
}

/// One edge per live memory record, sorted by `(source, target)`.
pub fn export_perception_graph(world: &World) -> Vec<PerceptionEdge> {
    let mut edges: Vec<PerceptionEdge> = world
        .cooperator_memories()
        .flat_map(|(source, memory)| {
            memory.iter().map(move |(target, rec)| PerceptionEdge {
                source,
                target,
                t: rec.perceived_ratio(),
                c: rec.cooperations,
                d: rec.defections,
            })
        })
        .collect();
    edges.sort_by_key(|e| (e.source, e.target));
    edges
}

/// Writes `source,target,t,c,d` rows, `t` with six decimals.
pub fn write_perception_graph<W: Write>(edges: &[PerceptionEdge], mut out: W) -> io::Result<()> {
    writeln!(out, "source,target,t,c,d")?;
    for e in edges {
        writeln!(out, "{},{},{:.6},{},{}", e.source, e.target, e.t, e.c, e.d)?;
    }
    out.flush()
}

pub(crate) fn measure(realization: &Realization) -> RealizationResult {
    let world = realization.world();
    let config = realization.config();
    let payoffs = realization.payoffs();
    let types = world.types();
    let (t_c, t_d) = system_knowledge(world);
    let total_payoff: f64 = payoffs.iter().sum();
    let games_played = realization.games_played();
    let misjudgments = realization.misjudgments();
    RealizationResult {
        phi: payoff_ratio(payoffs, types).ok(),
        eta_cd: misjudgments.cd,
        eta_dc: misjudgments.dc,
        t_c,
        t_d,
        census: memory_census(world, config.alpha, config.beta),
        mean_payoff_cooperators: mean_over(payoffs, types, AgentType::Cooperator),
        mean_payoff_defectors: mean_over(payoffs, types, AgentType::Defector),
        mean_payoff_all: total_payoff / payoffs.len() as f64,
        payoff_per_game: (games_played > 0).then(|| total_payoff / (2 * games_played) as f64),
        total_payoff,
        games_played,
        match_events: realization.match_events(),
    }
}

/// Formats an optional float with six decimals, empty when missing.
pub fn format_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl RealizationResult {
    /// `key=value` lines, floats with six decimals, missing values empty.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:.6}");
        vec![
            ("match_events", self.match_events.to_string()),
            ("games_played", self.games_played.to_string()),
            ("phi", format_opt(self.phi)),
            ("eta_cd", self.eta_cd.to_string()),
            ("eta_dc", self.eta_dc.to_string()),
            ("t_c", f(self.t_c)),
            ("t_d", f(self.t_d)),
            ("actual_cooperators", f(self.census.actual_cooperators)),
            ("actual_defectors", f(self.census.actual_defectors)),
            (
                "perceived_cooperators",
                f(self.census.perceived_cooperators),
            ),
            ("perceived_defectors", f(self.census.perceived_defectors)),
            ("undefined", f(self.census.undefined)),
            (
                "payoff_cooperators",
                format_opt(self.mean_payoff_cooperators),
            ),
            ("payoff_defectors", format_opt(self.mean_payoff_defectors)),
            ("payoff_all", f(self.mean_payoff_all)),
            ("payoff_per_game", format_opt(self.payoff_per_game)),
            ("total_payoff", f(self.total_payoff)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::InteractionRecord;
    use AgentType::*;

    fn half(n: usize) -> Vec<AgentType> {
        (0..n)
            .map(|i| if i < n / 2 { Cooperator } else { Defector })
            .collect()
    }

    #[test]
    fn uniform_payoffs_give_unit_ratio() {
        assert_eq!(payoff_ratio(&[10.0; 6], &half(6)), Ok(1.0));
    }

    #[test]
    fn ratio_arithmetic() {
        let payoffs = [6.0, 6.0, 2.0, 2.0];
        assert!((payoff_ratio(&payoffs, &half(4)).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_payoff_is_degenerate() {
        assert_eq!(payoff_ratio(&[0.0; 4], &half(4)), Err(DegenerateRun));
    }

    #[test]
    fn knowledge_prior_and_single_record() {
        let mut w = World::standard(4, 2);
        assert_eq!(system_knowledge(&w), (0.5, 0.5));
        w.memory_mut(AgentId(0))
            .unwrap()
            .insert(AgentId(1), InteractionRecord::new(9, 1))
            .unwrap();
        let (t_c, t_d) = system_knowledge(&w);
        assert!((t_c - 10.0 / 12.0).abs() < 1e-15);
        assert_eq!(t_d, 0.5);
    }

    #[test]
    fn census_counts_and_identity() {
        let mut w = World::standard(6, 3);
        let m0 = w.memory_mut(AgentId(0)).unwrap();
        m0.insert(AgentId(1), InteractionRecord::new(3, 0)).unwrap();
        m0.insert(AgentId(3), InteractionRecord::new(0, 1)).unwrap();
        m0.insert(AgentId(4), InteractionRecord::new(1, 1)).unwrap();
        w.memory_mut(AgentId(2))
            .unwrap()
            .insert(AgentId(5), InteractionRecord::new(0, 3))
            .unwrap();
        let c = memory_census(&w, 0.5, 2);
        // three cooperator memories: 3 + 0 + 1 entries
        assert!((c.actual_cooperators - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.actual_defectors - 1.0).abs() < 1e-15);
        assert!((c.perceived_cooperators - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.perceived_defectors - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.undefined - 1.0 / 3.0).abs() < 1e-15);
        let perceived = c.perceived_cooperators + c.perceived_defectors + c.undefined;
        assert!((perceived - c.occupancy()).abs() < 1e-12);
    }

    #[test]
    fn empty_census_is_zero() {
        assert_eq!(
            memory_census(&World::standard(4, 2), 0.5, 1),
            MemoryCensus::default()
        );
    }

    #[test]
    fn graph_is_asymmetric() {
        let mut w = World::standard(4, 2);
        assert!(export_perception_graph(&w).is_empty());
        w.memory_mut(AgentId(0))
            .unwrap()
            .insert(AgentId(1), InteractionRecord::new(1, 0))
            .unwrap();
        let edges = export_perception_graph(&w);
        assert_eq!(
            edges,
            vec![PerceptionEdge {
                source: AgentId(0),
                target: AgentId(1),
                t: 2.0 / 3.0,
                c: 1,
                d: 0
            }]
        );
        let mut buf = Vec::new();
        write_perception_graph(&edges, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source,target,t,c,d\n0,1,0.666667,1,0\n"
        );
    }
}
