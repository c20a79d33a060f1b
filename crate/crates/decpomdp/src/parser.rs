//! Parser for the line-oriented `.dpomdp` problem file format.
//!
//! Grammar (one declaration per line, `#` starts a comment, keywords are
//! case-sensitive):
//!
//! ```text
//! agents: <n>
//! discount: <float>          # accepted and ignored: planning is finite-horizon
//! values: reward
//! states: <k | name...>
//! start: <p...> | uniform    # values may also follow on the next line
//! actions:                   # then one line per agent: <k | name...>
//! observations:              # likewise
//! T: <ja> : <s> : <s'> : <p>
//! O: <ja> : <s'> : <jo> : <p>
//! R: <ja> : <s> : <s'> : <jo> : <r>
//! ```
//!
//! `<ja>`/`<jo>` are space-separated per-agent names or indices; `*` is a
//! wildcard matching all values of a slot (either a whole slot or a single
//! agent's position). Unspecified T/O/R entries default to 0; later entries
//! overwrite earlier ones. Rewards with wildcarded `s'`/`jo` denote the
//! marginal R(s,a); entries that pin `s'` or `jo` are folded into R(s,a) by
//! taking the expectation under T and O. Bare integers are interpreted as
//! 0-based indices, anything else as a declared name.
//!
//! The horizon is a run parameter, not a file property: the format has no
//! horizon field, so the caller supplies it.

use crate::model::{DecPomdpModel, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown {what} identifier `{ident}`")]
    UnknownIdent { line: usize, what: &'static str, ident: String },
    #[error("line {line}: index {index} out of range for {what} (size {size})")]
    IndexOutOfRange { line: usize, what: &'static str, index: usize, size: usize },
    #[error("invalid model: {0}")]
    Invalid(#[from] ModelError),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

/// One slot of a T/O/R entry: either every agent pinned/wild, or a single
/// `*` covering the whole slot.
#[derive(Debug, Clone)]
enum Slot {
    /// Per-agent constraints; `None` means wildcard for that agent.
    PerAgent(Vec<Option<usize>>),
    /// The whole slot is `*`.
    All,
}

impl Slot {
    fn matches(&self, ix: &crate::joint::JointIndexer, joint: usize) -> bool {
        match self {
            Slot::All => true,
            Slot::PerAgent(parts) => parts
                .iter()
                .enumerate()
                .all(|(agent, p)| p.map_or(true, |v| ix.component(joint, agent) == v)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum StateSlot {
    Any,
    Fixed(usize),
}

impl StateSlot {
    fn matches(&self, s: usize) -> bool {
        match self {
            StateSlot::Any => true,
            StateSlot::Fixed(v) => *v == s,
        }
    }
}

#[derive(Debug)]
struct RewardEntry {
    ja: Slot,
    s: StateSlot,
    s2: StateSlot,
    jo: Slot,
    val: f64,
}

struct Declarations {
    num_agents: Option<usize>,
    states: Option<Vec<String>>,
    actions: Option<Vec<Vec<String>>>,
    observations: Option<Vec<Vec<String>>>,
    start: Option<Vec<f64>>,
}

/// Parses a `.dpomdp` problem file. The horizon is supplied by the caller;
/// a `discount` declaration in the file is accepted and ignored.
pub fn parse_dpomdp(text: &str, horizon: usize) -> Result<DecPomdpModel, ParseError> {
    // (line number, content) with comments stripped and blanks dropped
    let lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let body = match l.find('#') {
                Some(p) => &l[..p],
                None => l,
            };
            (i + 1, body.trim().to_string())
        })
        .filter(|(_, l)| !l.is_empty())
        .collect();

    let mut decl = Declarations {
        num_agents: None,
        states: None,
        actions: None,
        observations: None,
        start: None,
    };
    let mut t_entries: Vec<(usize, Slot, StateSlot, StateSlot, f64)> = Vec::new();
    let mut o_entries: Vec<(usize, Slot, StateSlot, Slot, f64)> = Vec::new();
    let mut r_entries: Vec<(usize, RewardEntry)> = Vec::new();
    // raw entry text postponed until declarations are complete
    let mut pending: Vec<(usize, String)> = Vec::new();

    let mut i = 0;
    while i < lines.len() {
        let (ln, line) = &lines[i];
        let ln = *ln;
        if let Some(rest) = line.strip_prefix("agents:") {
            decl.num_agents = Some(
                rest.trim()
                    .parse::<usize>()
                    .map_err(|_| syntax(ln, format!("invalid agent count `{}`", rest.trim())))?,
            );
        } else if let Some(rest) = line.strip_prefix("discount:") {
            rest.trim()
                .parse::<f64>()
                .map_err(|_| syntax(ln, format!("invalid discount `{}`", rest.trim())))?;
        } else if let Some(rest) = line.strip_prefix("values:") {
            if rest.trim() != "reward" {
                return Err(syntax(ln, format!("unsupported values type `{}`", rest.trim())));
            }
        } else if let Some(rest) = line.strip_prefix("states:") {
            decl.states = Some(parse_name_list(ln, rest, "s")?);
        } else if let Some(rest) = line.strip_prefix("start:") {
            let rest = rest.trim();
            let content = if rest.is_empty() {
                i += 1;
                let (ln2, next) = lines
                    .get(i)
                    .ok_or_else(|| syntax(ln, "missing start distribution"))?;
                let _ = ln2;
                next.clone()
            } else {
                rest.to_string()
            };
            if content == "uniform" {
                decl.start = Some(Vec::new()); // empty marks uniform
            } else {
                let probs: Result<Vec<f64>, _> =
                    content.split_whitespace().map(|t| t.parse::<f64>()).collect();
                decl.start = Some(probs.map_err(|_| {
                    syntax(ln, format!("invalid start distribution `{content}`"))
                })?);
            }
        } else if line == "actions:" || line == "observations:" {
            let n = decl
                .num_agents
                .ok_or_else(|| syntax(ln, "`agents:` must precede actions/observations"))?;
            let mut per_agent = Vec::with_capacity(n);
            for k in 0..n {
                i += 1;
                let (ln2, body) = lines
                    .get(i)
                    .ok_or_else(|| syntax(ln, format!("expected {n} per-agent lines")))?;
                per_agent.push(parse_name_list(
                    *ln2,
                    body,
                    if line == "actions:" { "a" } else { "o" },
                )?);
                let _ = k;
            }
            if line == "actions:" {
                decl.actions = Some(per_agent);
            } else {
                decl.observations = Some(per_agent);
            }
        } else if line.starts_with("T:") || line.starts_with("O:") || line.starts_with("R:") {
            pending.push((ln, line.clone()));
        } else {
            return Err(syntax(ln, format!("unrecognized declaration `{line}`")));
        }
        i += 1;
    }

    let states = decl.states.ok_or_else(|| syntax(0, "missing `states:`"))?;
    let actions = decl.actions.ok_or_else(|| syntax(0, "missing `actions:`"))?;
    let observations = decl.observations.ok_or_else(|| syntax(0, "missing `observations:`"))?;
    let num_agents = decl.num_agents.ok_or_else(|| syntax(0, "missing `agents:`"))?;
    if actions.len() != num_agents || observations.len() != num_agents {
        return Err(syntax(0, "actions/observations do not match agent count"));
    }
    let start = decl.start.ok_or_else(|| syntax(0, "missing `start:`"))?;

    let action_sizes: Vec<usize> = actions.iter().map(Vec::len).collect();
    let obs_sizes: Vec<usize> = observations.iter().map(Vec::len).collect();
    let action_ix = crate::joint::JointIndexer::new(&action_sizes);
    let obs_ix = crate::joint::JointIndexer::new(&obs_sizes);

    let lookup = Lookup { states: &states, actions: &actions, observations: &observations };

    for (ln, line) in pending {
        let (head, parts) = split_entry(ln, &line)?;
        match head {
            "T" => {
                if parts.len() != 4 {
                    return Err(syntax(ln, "T entry needs `T: <ja> : <s> : <s'> : <p>`"));
                }
                let ja = lookup.joint_action_slot(ln, parts[0])?;
                let s = lookup.state_slot(ln, parts[1])?;
                let s2 = lookup.state_slot(ln, parts[2])?;
                let p = parse_num(ln, parts[3])?;
                t_entries.push((ln, ja, s, s2, p));
            }
            "O" => {
                if parts.len() != 4 {
                    return Err(syntax(ln, "O entry needs `O: <ja> : <s'> : <jo> : <p>`"));
                }
                let ja = lookup.joint_action_slot(ln, parts[0])?;
                let s2 = lookup.state_slot(ln, parts[1])?;
                let jo = lookup.joint_obs_slot(ln, parts[2])?;
                let p = parse_num(ln, parts[3])?;
                o_entries.push((ln, ja, s2, jo, p));
            }
            "R" => {
                if parts.len() != 5 {
                    return Err(syntax(ln, "R entry needs `R: <ja> : <s> : <s'> : <jo> : <r>`"));
                }
                let entry = RewardEntry {
                    ja: lookup.joint_action_slot(ln, parts[0])?,
                    s: lookup.state_slot(ln, parts[1])?,
                    s2: lookup.state_slot(ln, parts[2])?,
                    jo: lookup.joint_obs_slot(ln, parts[3])?,
                    val: parse_num(ln, parts[4])?,
                };
                r_entries.push((ln, entry));
            }
            _ => unreachable!(),
        }
    }

    let ns = states.len();
    let na = action_ix.len();
    let no = obs_ix.len();

    let mut transition = vec![0.0; ns * na * ns];
    for (_, ja_slot, s_slot, s2_slot, p) in &t_entries {
        for ja in 0..na {
            if !ja_slot.matches(&action_ix, ja) {
                continue;
            }
            for s in 0..ns {
                if !s_slot.matches(s) {
                    continue;
                }
                for s2 in 0..ns {
                    if s2_slot.matches(s2) {
                        transition[(s * na + ja) * ns + s2] = *p;
                    }
                }
            }
        }
    }

    let mut observation_fn = vec![0.0; na * ns * no];
    for (_, ja_slot, s2_slot, jo_slot, p) in &o_entries {
        for ja in 0..na {
            if !ja_slot.matches(&action_ix, ja) {
                continue;
            }
            for s2 in 0..ns {
                if !s2_slot.matches(s2) {
                    continue;
                }
                for jo in 0..no {
                    if jo_slot.matches(&obs_ix, jo) {
                        observation_fn[(ja * ns + s2) * no + jo] = *p;
                    }
                }
            }
        }
    }

    // R(s, ja): wildcard s'/jo entries assign the marginal directly; entries
    // pinning s' or jo are expanded on a per-(s, ja) slice and folded by
    // expectation under T and O.
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for ja in 0..na {
            let matching: Vec<&RewardEntry> = r_entries
                .iter()
                .filter(|(_, e)| e.s.matches(s) && e.ja.matches(&action_ix, ja))
                .map(|(_, e)| e)
                .collect();
            if matching.is_empty() {
                continue;
            }
            let all_marginal = matching.iter().all(|e| {
                matches!(e.s2, StateSlot::Any) && matches!(e.jo, Slot::All)
            });
            if all_marginal {
                reward[s * na + ja] = matching.last().unwrap().val;
            } else {
                let mut slice = vec![0.0; ns * no];
                for e in &matching {
                    for s2 in 0..ns {
                        if !e.s2.matches(s2) {
                            continue;
                        }
                        for jo in 0..no {
                            if e.jo.matches(&obs_ix, jo) {
                                slice[s2 * no + jo] = e.val;
                            }
                        }
                    }
                }
                let mut exp = 0.0;
                for s2 in 0..ns {
                    let tp = transition[(s * na + ja) * ns + s2];
                    if tp == 0.0 {
                        continue;
                    }
                    for jo in 0..no {
                        exp += tp * observation_fn[(ja * ns + s2) * no + jo] * slice[s2 * no + jo];
                    }
                }
                reward[s * na + ja] = exp;
            }
        }
    }

    let initial_belief =
        if start.is_empty() { vec![1.0 / ns as f64; ns] } else { start.clone() };
    if initial_belief.len() != ns {
        return Err(syntax(0, format!("start distribution has {} entries, expected {ns}", initial_belief.len())));
    }

    Ok(DecPomdpModel::new(
        String::new(),
        states,
        actions,
        observations,
        transition,
        observation_fn,
        reward,
        initial_belief,
        horizon,
    )?)
}

struct Lookup<'a> {
    states: &'a [String],
    actions: &'a [Vec<String>],
    observations: &'a [Vec<String>],
}

impl<'a> Lookup<'a> {
    fn state_slot(&self, ln: usize, tok: &str) -> Result<StateSlot, ParseError> {
        let tok = tok.trim();
        if tok == "*" {
            return Ok(StateSlot::Any);
        }
        Ok(StateSlot::Fixed(resolve(ln, tok, self.states, "state")?))
    }

    fn joint_action_slot(&self, ln: usize, tok: &str) -> Result<Slot, ParseError> {
        joint_slot(ln, tok, self.actions, "action")
    }

    fn joint_obs_slot(&self, ln: usize, tok: &str) -> Result<Slot, ParseError> {
        joint_slot(ln, tok, self.observations, "observation")
    }
}

fn joint_slot(
    ln: usize,
    tok: &str,
    sets: &[Vec<String>],
    what: &'static str,
) -> Result<Slot, ParseError> {
    let toks: Vec<&str> = tok.split_whitespace().collect();
    if toks.len() == 1 && toks[0] == "*" {
        return Ok(Slot::All);
    }
    if toks.len() != sets.len() {
        return Err(syntax(
            ln,
            format!("expected {} per-agent {what} tokens, got {}", sets.len(), toks.len()),
        ));
    }
    let mut parts = Vec::with_capacity(toks.len());
    for (agent, t) in toks.iter().enumerate() {
        if *t == "*" {
            parts.push(None);
        } else {
            parts.push(Some(resolve(ln, t, &sets[agent], what)?));
        }
    }
    Ok(Slot::PerAgent(parts))
}

fn resolve(ln: usize, tok: &str, names: &[String], what: &'static str) -> Result<usize, ParseError> {
    if let Ok(idx) = tok.parse::<usize>() {
        if idx >= names.len() {
            return Err(ParseError::IndexOutOfRange { line: ln, what, index: idx, size: names.len() });
        }
        return Ok(idx);
    }
    names
        .iter()
        .position(|n| n == tok)
        .ok_or_else(|| ParseError::UnknownIdent { line: ln, what, ident: tok.to_string() })
}

fn parse_num(ln: usize, tok: &str) -> Result<f64, ParseError> {
    tok.trim().parse::<f64>().map_err(|_| syntax(ln, format!("invalid number `{}`", tok.trim())))
}

fn parse_name_list(ln: usize, body: &str, prefix: &str) -> Result<Vec<String>, ParseError> {
    let toks: Vec<&str> = body.split_whitespace().collect();
    if toks.is_empty() {
        return Err(syntax(ln, "empty name list"));
    }
    if toks.len() == 1 {
        if let Ok(k) = toks[0].parse::<usize>() {
            if k == 0 {
                return Err(syntax(ln, "set size must be at least 1"));
            }
            return Ok((0..k).map(|i| format!("{prefix}{i}")).collect());
        }
    }
    Ok(toks.iter().map(|s| s.to_string()).collect())
}

fn split_entry<'a>(ln: usize, line: &'a str) -> Result<(&'a str, Vec<&'a str>), ParseError> {
    let mut it = line.splitn(2, ':');
    let head = it.next().unwrap().trim();
    let rest = it.next().ok_or_else(|| syntax(ln, "missing `:`"))?;
    let parts: Vec<&str> = rest.split(':').map(str::trim).collect();
    Ok((head, parts))
}

/// Serializes a model back to the `.dpomdp` grammar (single-entry lines,
/// non-zero probabilities only, marginal rewards). Re-parsing the result
/// yields a tensor-identical model.
pub fn to_dpomdp_string(m: &DecPomdpModel) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "agents: {}", m.num_agents).unwrap();
    writeln!(out, "discount: 1.0").unwrap();
    writeln!(out, "values: reward").unwrap();
    writeln!(out, "states: {}", m.states.join(" ")).unwrap();
    writeln!(out, "start:").unwrap();
    let b0: Vec<String> = m.initial_belief.as_slice().iter().map(|p| format!("{p}")).collect();
    writeln!(out, "{}", b0.join(" ")).unwrap();
    writeln!(out, "actions:").unwrap();
    for a in &m.actions {
        writeln!(out, "{}", a.join(" ")).unwrap();
    }
    writeln!(out, "observations:").unwrap();
    for o in &m.observations {
        writeln!(out, "{}", o.join(" ")).unwrap();
    }
    let ja_name = |ja: usize| -> String {
        m.action_ix()
            .decode(ja)
            .iter()
            .enumerate()
            .map(|(agent, &a)| m.actions[agent][a].clone())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let jo_name = |jo: usize| -> String {
        m.obs_ix()
            .decode(jo)
            .iter()
            .enumerate()
            .map(|(agent, &o)| m.observations[agent][o].clone())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for ja in 0..m.num_joint_actions() {
        for s in 0..m.num_states() {
            for s2 in 0..m.num_states() {
                let p = m.trans(s, ja, s2);
                if p != 0.0 {
                    writeln!(out, "T: {} : {} : {} : {p}", ja_name(ja), m.states[s], m.states[s2]).unwrap();
                }
            }
        }
    }
    for ja in 0..m.num_joint_actions() {
        for s2 in 0..m.num_states() {
            for jo in 0..m.num_joint_obs() {
                let p = m.obs(ja, s2, jo);
                if p != 0.0 {
                    writeln!(out, "O: {} : {} : {} : {p}", ja_name(ja), m.states[s2], jo_name(jo)).unwrap();
                }
            }
        }
    }
    for ja in 0..m.num_joint_actions() {
        for s in 0..m.num_states() {
            let r = m.reward(s, ja);
            if r != 0.0 {
                writeln!(out, "R: {} : {} : * : * : {r}", ja_name(ja), m.states[s]).unwrap();
            }
        }
    }
    out
}

/// The benchmark problems shipped with the crate, parsed from `problems/`.
pub mod builtin {
    use super::parse_dpomdp;
    use crate::model::DecPomdpModel;

    pub const DECTIGER: &str = include_str!("../../../problems/dectiger.dpomdp");
    pub const BROADCASTCHANNEL: &str = include_str!("../../../problems/broadcastchannel.dpomdp");
    pub const RECYCLING: &str = include_str!("../../../problems/recycling.dpomdp");

    pub fn dectiger(horizon: usize) -> DecPomdpModel {
        let mut m = parse_dpomdp(DECTIGER, horizon).expect("bundled dectiger parses");
        m.name = "dectiger".into();
        m
    }

    pub fn broadcastchannel(horizon: usize) -> DecPomdpModel {
        let mut m = parse_dpomdp(BROADCASTCHANNEL, horizon).expect("bundled broadcastchannel parses");
        m.name = "broadcastchannel".into();
        m
    }

    pub fn recycling(horizon: usize) -> DecPomdpModel {
        let mut m = parse_dpomdp(RECYCLING, horizon).expect("bundled recycling parses");
        m.name = "recycling".into();
        m
    }
}
