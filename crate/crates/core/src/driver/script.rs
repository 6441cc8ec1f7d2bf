//! Input scripts: one command per line, `#` comments, `&` continuation.

use crate::error::{Error, Result};

/// Registers or configures something that later commands use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Persistent,
    Immediate,
}

#[derive(Clone, Copy, Debug)]
pub struct CommandSpec {
    pub name: &'static str,
    pub min_args: usize,
    pub max_args: Option<usize>,
    /// Argument positions that must parse as numbers.
    pub numeric: &'static [usize],
    pub kind: CommandKind,
}

const fn spec(name: &'static str, min_args: usize, max_args: Option<usize>, numeric: &'static [usize], kind: CommandKind) -> CommandSpec {
    CommandSpec { name, min_args, max_args, numeric, kind }
}

use CommandKind::{Immediate, Persistent};

pub const COMMANDS: &[CommandSpec] = &[
    spec("units", 1, Some(1), &[], Persistent),
    spec("boundary", 3, Some(3), &[], Persistent),
    spec("lattice", 2, Some(2), &[1], Persistent),
    spec("create_box", 3, Some(4), &[0, 1, 2, 3], Immediate),
    spec("create_atoms", 1, Some(5), &[0], Immediate),
    spec("mass", 2, Some(2), &[0, 1], Persistent),
    spec("velocity", 4, Some(4), &[2, 3], Immediate),
    spec("pair_style", 1, None, &[], Persistent),
    spec("pair_coeff", 3, None, &[], Persistent),
    spec("pair_modify", 2, Some(2), &[], Persistent),
    spec("neighbor", 1, Some(2), &[0], Persistent),
    spec("package", 1, None, &[], Persistent),
    spec("qeq", 1, None, &[], Persistent),
    spec("torsion", 1, None, &[], Persistent),
    spec("suffix", 1, Some(1), &[], Persistent),
    spec("timestep", 1, Some(1), &[0], Persistent),
    spec("thermo", 1, Some(1), &[0], Persistent),
    spec("run", 1, Some(1), &[0], Immediate),
    spec("bench", 1, None, &[], Immediate),
];

pub fn command_spec(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Command {
    pub name: String,
    pub args: Vec<String>,
    /// First source line of the command, 1-based.
    pub line: usize,
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        command_spec(&self.name).map(|s| s.kind).unwrap_or(Immediate)
    }

    pub fn tokens(&self) -> Vec<&str> {
        std::iter::once(self.name.as_str()).chain(self.args.iter().map(String::as_str)).collect()
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.line, message: format!("{}: {}", self.name, message.into()) }
    }

    pub fn num(&self, k: usize) -> Result<f64> {
        let s = self.args.get(k).ok_or_else(|| self.error(format!("missing argument {}", k + 1)))?;
        s.parse().map_err(|_| self.error(format!("expected a number, got '{s}'")))
    }

    pub fn uint(&self, k: usize) -> Result<u64> {
        let s = self.args.get(k).ok_or_else(|| self.error(format!("missing argument {}", k + 1)))?;
        s.parse().map_err(|_| self.error(format!("expected a non-negative integer, got '{s}'")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Script {
    pub commands: Vec<Command>,
}

impl Script {
    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// Token stream without line numbers.
    pub fn tokens(&self) -> Vec<Vec<&str>> {
        self.commands.iter().map(Command::tokens).collect()
    }
}

pub fn parse_script(text: &str) -> Result<Script> {
    let mut commands = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut start = 0;
    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim_end();
        let (body, continued) = match body.strip_suffix('&') {
            Some(b) => (b, true),
            None => (body, false),
        };
        if pending.is_empty() {
            start = lineno;
        }
        pending.extend(body.split_whitespace().map(str::to_string));
        if continued {
            continue;
        }
        if let Some(cmd) = finish(&mut pending, start)? {
            commands.push(cmd);
        }
    }
    if let Some(cmd) = finish(&mut pending, start)? {
        commands.push(cmd);
    }
    Ok(Script { commands })
}

fn finish(tokens: &mut Vec<String>, line: usize) -> Result<Option<Command>> {
    if tokens.is_empty() {
        return Ok(None);
    }
    let mut it = std::mem::take(tokens).into_iter();
    let name = it.next().expect("non-empty");
    let args: Vec<String> = it.collect();
    let spec = command_spec(&name).ok_or_else(|| {
        let near = near_matches(&name, COMMANDS.iter().map(|c| c.name));
        let hint = if near.is_empty() { String::new() } else { format!(" (did you mean {}?)", near.join(", ")) };
        Error::Parse { line, message: format!("unknown command '{name}'{hint}") }
    })?;
    let n = args.len();
    if n < spec.min_args || spec.max_args.is_some_and(|m| n > m) {
        let want = match spec.max_args {
            Some(m) if m == spec.min_args => format!("{m}"),
            Some(m) => format!("{} to {m}", spec.min_args),
            None => format!("at least {}", spec.min_args),
        };
        return Err(Error::Parse { line, message: format!("{name} takes {want} arguments, got {n}") });
    }
    for &k in spec.numeric {
        if let Some(a) = args.get(k) {
            if a.parse::<f64>().is_err() {
                return Err(Error::Parse { line, message: format!("{name}: argument {} must be a number, got '{a}'", k + 1) });
            }
        }
    }
    Ok(Some(Command { name, args, line }))
}

/// Candidates within a small edit distance of `name`, closest first.
pub fn near_matches<'a>(name: &str, candidates: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = candidates
        .map(|c| (strsim::levenshtein(name, c), c))
        .filter(|&(d, c)| d <= 3.max(c.len() / 3))
        .collect();
    scored.sort();
    scored.into_iter().take(3).map(|(_, c)| c.to_string()).collect()
}

/// One command per line, single spaces.
pub fn serialize_script(script: &Script) -> String {
    let mut out = String::new();
    for c in &script.commands {
        out.push_str(&c.tokens().join(" "));
        out.push('\n');
    }
    out
}
