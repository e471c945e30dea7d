//! Match-event log and an independent replay that recounts payoffs and
//! misjudgments from it.
//!
//! Layout (comma separated, one match event per line):
//!
//! ```text
//! # dilemma event log v1
//! # types=CCCCDDDD
//! # payoffs=0,1,3,5
//! event,first,second,decision_first,decision_second,perception_first,perception_second,action_first,action_second,payoff_first,payoff_second
//! 0,2,5,P,P,-,-,C,D,0,5
//! ```
//!
//! Decisions are `P`/`R`; perceptions `C`/`D`/`U`, or `-` when the decider
//! had no information; actions and payoffs are `-` on canceled games.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use crate::engine::{Decision, MatchEvent};
use crate::memory::Perception;
use crate::model::{Action, AgentType, PayoffMatrix};

const MAGIC: &str = "# dilemma event log v1";
const COLUMNS: &str = "event,first,second,decision_first,decision_second,perception_first,perception_second,action_first,action_second,payoff_first,payoff_second";

pub struct EventLogWriter<W: Write> {
    out: W,
    next: u64,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(mut out: W, types: &[AgentType], payoffs: &PayoffMatrix) -> io::Result<Self> {
        let types: String = types
            .iter()
            .map(|t| match t {
                AgentType::Cooperator => 'C',
                AgentType::Defector => 'D',
            })
            .collect();
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "# types={types}")?;
        writeln!(out, "# payoffs={payoffs}")?;
        writeln!(out, "{COLUMNS}")?;
        Ok(Self { out, next: 0 })
    }

    pub fn write(&mut self, ev: &MatchEvent) -> io::Result<()> {
        let perception = |p: Option<Perception>| p.map_or('-', Perception::to_char);
        let [ji, jj] = ev.judgments;
        write!(
            self.out,
            "{},{},{},{},{},{},{},",
            self.next,
            ev.first,
            ev.second,
            ji.decision.to_char(),
            jj.decision.to_char(),
            perception(ji.perception),
            perception(jj.perception),
        )?;
        match (ev.actions, ev.payoffs) {
            (Some([ai, aj]), Some([pi, pj])) => {
                writeln!(self.out, "{},{},{},{}", ai.to_char(), aj.to_char(), pi, pj)?
            }
            _ => writeln!(self.out, "-,-,-,-")?,
        }
        self.next += 1;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Quantities recomputed from a log.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySummary {
    pub match_events: u64,
    pub games_played: u64,
    pub eta_cd: u64,
    pub eta_dc: u64,
    pub payoffs: Vec<f64>,
    pub types: Vec<AgentType>,
    /// Played games whose logged payoffs disagree with the matrix.
    pub payoff_mismatches: u64,
}

impl ReplaySummary {
    pub fn total_payoff(&self) -> f64 {
        self.payoffs.iter().sum()
    }

    fn mean_of(&self, ty: AgentType) -> Option<f64> {
        let (s, n) = self
            .payoffs
            .iter()
            .zip(&self.types)
            .filter(|(_, t)| **t == ty)
            .fold((0.0, 0usize), |(s, n), (p, _)| (s + p, n + 1));
        (n > 0).then(|| s / n as f64)
    }

    pub fn phi(&self) -> Option<f64> {
        let total = self.total_payoff();
        if total <= 0.0 || self.payoffs.is_empty() {
            return None;
        }
        let mean_all = total / self.payoffs.len() as f64;
        Some(self.mean_of(AgentType::Cooperator).unwrap_or(0.0) / mean_all)
    }

    /// Compares against `key=value` output of a run. Only keys present in
    /// both are checked. Returns one message per disagreement.
    pub fn compare(&self, expected: &BTreeMap<String, String>) -> Vec<String> {
        let mut diffs = Vec::new();
        if self.payoff_mismatches > 0 {
            diffs.push(format!(
                "{} played games carry payoffs inconsistent with the matrix",
                self.payoff_mismatches
            ));
        }
        let counts = [
            ("match_events", self.match_events),
            ("games_played", self.games_played),
            ("eta_cd", self.eta_cd),
            ("eta_dc", self.eta_dc),
        ];
        for (key, value) in counts {
            if let Some(exp) = expected.get(key) {
                if exp.trim() != value.to_string() {
                    diffs.push(format!("{key}: expected {exp}, replay {value}"));
                }
            }
        }
        let floats = [
            ("phi", self.phi()),
            ("total_payoff", Some(self.total_payoff())),
            ("payoff_cooperators", self.mean_of(AgentType::Cooperator)),
            ("payoff_defectors", self.mean_of(AgentType::Defector)),
        ];
        for (key, value) in floats {
            let Some(exp) = expected.get(key) else {
                continue;
            };
            let exp = exp.trim();
            let agree = match (exp.is_empty(), value) {
                (true, None) => true,
                (false, Some(v)) => exp
                    .parse::<f64>()
                    .map(|e| (e - v).abs() <= 5e-7 * e.abs().max(1.0))
                    .unwrap_or(false),
                _ => false,
            };
            if !agree {
                let shown = value.map(|v| format!("{v:.6}")).unwrap_or_default();
                diffs.push(format!("{key}: expected {exp:?}, replay {shown:?}"));
            }
        }
        diffs
    }
}

/// Parses `key=value` lines, ignoring blanks and lines without `=`.
pub fn parse_key_values<R: BufRead>(reader: R) -> io::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in reader.lines() {
        let line = line?;
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

/// Replays a log written by [`EventLogWriter`].
pub fn replay<R: BufRead>(reader: R) -> Result<ReplaySummary, ReplayError> {
    let mut types: Option<Vec<AgentType>> = None;
    let mut matrix: Option<PayoffMatrix> = None;
    let mut summary = ReplaySummary {
        match_events: 0,
        games_played: 0,
        eta_cd: 0,
        eta_dc: 0,
        payoffs: Vec::new(),
        types: Vec::new(),
        payoff_mismatches: 0,
    };
    let mut seen_magic = false;
    let mut seen_columns = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let err = |message: String| ReplayError::Format {
            line: lineno,
            message,
        };
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if line == MAGIC {
                seen_magic = true;
            } else if let Some(t) = comment.strip_prefix("types=") {
                let parsed = t
                    .chars()
                    .map(|c| match c {
                        'C' => Ok(AgentType::Cooperator),
                        'D' => Ok(AgentType::Defector),
                        other => Err(err(format!("unknown agent type {other:?}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                summary.payoffs = vec![0.0; parsed.len()];
                types = Some(parsed);
            } else if let Some(p) = comment.strip_prefix("payoffs=") {
                matrix = Some(p.parse().map_err(|e| err(format!("{e}")))?);
            }
            continue;
        }
        if !seen_columns {
            if line != COLUMNS {
                return Err(err("missing column header".into()));
            }
            seen_columns = true;
            continue;
        }
        if !seen_magic {
            return Err(err("not a dilemma event log".into()));
        }
        let (Some(types), Some(matrix)) = (types.as_ref(), matrix.as_ref()) else {
            return Err(err("header lacks types= or payoffs=".into()));
        };

        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(err(format!("expected 11 fields, found {}", fields.len())));
        }
        let agent = |s: &str| -> Result<usize, ReplayError> {
            let i: usize = s.parse().map_err(|_| err(format!("bad agent id {s:?}")))?;
            if i >= types.len() {
                return Err(err(format!("agent {i} outside population")));
            }
            Ok(i)
        };
        let single = |s: &str| -> Result<char, ReplayError> {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(err(format!("expected one character, found {s:?}"))),
            }
        };
        let ids = [agent(fields[1])?, agent(fields[2])?];
        if ids[0] == ids[1] {
            return Err(err("agent matched with itself".into()));
        }
        let mut decisions = [Decision::Play; 2];
        let mut perceptions = [None, None];
        for k in 0..2 {
            let c = single(fields[3 + k])?;
            decisions[k] =
                Decision::from_char(c).ok_or_else(|| err(format!("bad decision {c:?}")))?;
            let c = single(fields[5 + k])?;
            perceptions[k] = match c {
                '-' => None,
                c => Some(
                    Perception::from_char(c).ok_or_else(|| err(format!("bad perception {c:?}")))?,
                ),
            };
        }

        summary.match_events += 1;
        for k in 0..2 {
            let (decider, opponent) = (ids[k], ids[1 - k]);
            if types[decider] != AgentType::Cooperator {
                continue;
            }
            match (perceptions[k], types[opponent]) {
                (Some(Perception::PerceivedDefector), AgentType::Cooperator) => summary.eta_cd += 1,
                (Some(Perception::PerceivedCooperator), AgentType::Defector) => summary.eta_dc += 1,
                _ => {}
            }
        }

        let both_play = decisions.iter().all(|d| *d == Decision::Play);
        if !both_play {
            if fields[7..].iter().any(|f| *f != "-") {
                return Err(err("canceled game carries actions or payoffs".into()));
            }
            continue;
        }
        let mut actions = [Action::Cooperate; 2];
        for k in 0..2 {
            let c = single(fields[7 + k])?;
            actions[k] = Action::from_char(c).ok_or_else(|| err(format!("bad action {c:?}")))?;
        }
        let mut logged = [0.0; 2];
        for k in 0..2 {
            logged[k] = fields[9 + k]
                .parse::<f64>()
                .map_err(|_| err(format!("bad payoff {:?}", fields[9 + k])))?;
        }
        let (pi, pj) = matrix.resolve(actions[0], actions[1]);
        if logged != [pi, pj] {
            summary.payoff_mismatches += 1;
        }
        summary.payoffs[ids[0]] += pi;
        summary.payoffs[ids[1]] += pj;
        summary.games_played += 1;
    }

    summary.types = types.ok_or_else(|| ReplayError::Format {
        line: 0,
        message: "log has no types= header".into(),
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Realization;
    use crate::model::SimConfig;

    fn small() -> SimConfig {
        SimConfig {
            n: 12,
            tau: 5,
            mu: 0.5,
            seed: 3,
            ..SimConfig::default()
        }
    }

    fn logged_run(config: SimConfig) -> (Realization, Vec<u8>) {
        let mut r = Realization::new(config).unwrap();
        let mut log =
            EventLogWriter::new(Vec::new(), r.world().types(), &r.config().payoffs).unwrap();
        r.run_with(|ev| log.write(ev).unwrap());
        (r, log.finish().unwrap())
    }

    #[test]
    fn replay_agrees_with_run() {
        let (r, log) = logged_run(small());
        let summary = replay(&log[..]).unwrap();
        let result = r.result();
        assert_eq!(summary.match_events, result.match_events);
        assert_eq!(summary.games_played, result.games_played);
        assert_eq!(summary.eta_cd, result.eta_cd);
        assert_eq!(summary.eta_dc, result.eta_dc);
        assert_eq!(summary.payoffs, r.payoffs());
        assert_eq!(summary.phi(), result.phi);
        let expected: BTreeMap<String, String> = result
            .key_values()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert!(summary.compare(&expected).is_empty());
    }

    #[test]
    fn tampered_payoff_is_detected() {
        let (r, log) = logged_run(small());
        let text = String::from_utf8(log).unwrap();
        let tampered: String = text
            .lines()
            .map(|l| {
                if l.ends_with(",3,3") {
                    l.trim_end_matches(",3,3").to_string() + ",3,4"
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let summary = replay(tampered.as_bytes()).unwrap();
        assert!(summary.payoff_mismatches > 0);
        let expected: BTreeMap<String, String> = r
            .result()
            .key_values()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert!(!summary.compare(&expected).is_empty());
    }

    #[test]
    fn wrong_expectation_is_reported() {
        let (_, log) = logged_run(small());
        let summary = replay(&log[..]).unwrap();
        let mut expected = BTreeMap::new();
        expected.insert("eta_cd".to_string(), (summary.eta_cd + 1).to_string());
        expected.insert("phi".to_string(), "9.0".to_string());
        assert_eq!(summary.compare(&expected).len(), 2);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let header = format!("{MAGIC}\n# types=CD\n# payoffs=0,1,3,5\n{COLUMNS}\n");
        let bad_rows = [
            "0,0,1,P,P,-,-,C,D,0\n",
            "0,0,0,P,P,-,-,C,D,0,5\n",
            "0,0,7,P,P,-,-,C,D,0,5\n",
            "0,0,1,X,P,-,-,C,D,0,5\n",
            "0,0,1,R,P,D,-,C,D,0,5\n",
        ];
        for row in bad_rows {
            assert!(
                replay(format!("{header}{row}").as_bytes()).is_err(),
                "{row}"
            );
        }
        let ok = replay(format!("{header}0,0,1,P,P,-,-,C,D,0,5\n").as_bytes()).unwrap();
        assert_eq!(ok.payoffs, vec![0.0, 5.0]);
    }
}
