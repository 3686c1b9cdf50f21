//! Plain-text score reader and writer.
//!
//! One onset column per line:
//!
//! ```text
//! #title: Opening
//! 0: 1=B4@pp 2=Eb5@pp
//! 1: 1=Bb4 2=D5
//! |
//! 2..5: -
//! 6: 1=A4
//! !cresc 6..9 f voices=1
//! ```
//!
//! Column labels must run 0, 1, 2, ... without gaps; `a..b: -` consumes a
//! run of rest columns. Bar lines (`|`) carry no time. Dynamics persist
//! per voice until superseded; entries without a `<voice>=` tag share one
//! untagged voice.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Dynamic, Metadata, NoteEvent, PitchSpec, Score, TimeIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoiceKey(pub Option<u32>);

impl fmt::Display for VoiceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "voice {v}"),
            None => f.write_str("untagged voice"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown pitch `{token}`")]
    UnknownPitch {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}, column {column}: unknown dynamic `{token}`")]
    UnknownDynamic {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}: expected column {expected}, found {found}")]
    NonContiguousColumn {
        line: usize,
        expected: TimeIndex,
        found: TimeIndex,
    },
    #[error(
        "line {line}: span {start}..{end} reaches past the last column ({tick_count} columns)"
    )]
    DirectiveOutOfRange {
        line: usize,
        start: TimeIndex,
        end: TimeIndex,
        tick_count: usize,
    },
    #[error("line {line}, column {column}: {voice} has no dynamic at or before t_{t}")]
    NoInitialDynamic {
        line: usize,
        column: usize,
        voice: VoiceKey,
        t: TimeIndex,
    },
    #[error("line {line}: {voice} has no prevailing dynamic where the gradual span starts")]
    NoPrevailingDynamic { line: usize, voice: VoiceKey },
    #[error(
        "line {line}: {kind} target {target} runs against the prevailing {prevailing} in {voice}"
    )]
    TargetAgainstDirection {
        line: usize,
        kind: GradualKind,
        voice: VoiceKey,
        prevailing: Dynamic,
        target: Dynamic,
    },
    #[error("line {line}: {kind} in {voice} leaves the dynamic range")]
    PressureOverflow {
        line: usize,
        kind: GradualKind,
        voice: VoiceKey,
    },
    #[error("line {line}, column {column}: conflicting dynamics for {voice} at t_{t}")]
    ConflictingDynamics {
        line: usize,
        column: usize,
        voice: VoiceKey,
        t: TimeIndex,
    },
    #[error("line {line}, column {column}: explicit dynamic inside a gradual span of {voice}")]
    DynamicInsideSpan {
        line: usize,
        column: usize,
        voice: VoiceKey,
    },
    #[error("line {line}: gradual spans overlap in {voice}")]
    OverlappingDirectives { line: usize, voice: VoiceKey },
}

impl ParseError {
    /// 1-based source line the error points at.
    pub fn line(&self) -> usize {
        match *self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownPitch { line, .. }
            | ParseError::UnknownDynamic { line, .. }
            | ParseError::NonContiguousColumn { line, .. }
            | ParseError::DirectiveOutOfRange { line, .. }
            | ParseError::NoInitialDynamic { line, .. }
            | ParseError::NoPrevailingDynamic { line, .. }
            | ParseError::TargetAgainstDirection { line, .. }
            | ParseError::PressureOverflow { line, .. }
            | ParseError::ConflictingDynamics { line, .. }
            | ParseError::DynamicInsideSpan { line, .. }
            | ParseError::OverlappingDirectives { line, .. } => line,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub voice: Option<u32>,
    pub pitch: PitchSpec,
    pub dynamic: Option<Dynamic>,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub t: TimeIndex,
    /// Empty for a rest column.
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradualKind {
    Crescendo,
    Decrescendo,
}

impl fmt::Display for GradualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradualKind::Crescendo => "crescendo",
            GradualKind::Decrescendo => "decrescendo",
        })
    }
}

/// A crescendo or decrescendo over the inclusive column span
/// `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradualDirective {
    pub kind: GradualKind,
    pub start: TimeIndex,
    pub end: TimeIndex,
    /// Terminal dynamic; without one the net change is a single level.
    pub target: Option<Dynamic>,
    /// Restricts the directive to these voices. `None` applies it to every
    /// voice with a prevailing dynamic at `start`.
    pub voices: Option<Vec<u32>>,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScoreDocument {
    pub headers: BTreeMap<String, String>,
    pub columns: Vec<Column>,
    pub directives: Vec<GradualDirective>,
}

impl ScoreDocument {
    pub fn tick_count(&self) -> usize {
        self.columns.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (TimeIndex, &Entry)> {
        self.columns
            .iter()
            .flat_map(|c| c.entries.iter().map(move |e| (c.t, e)))
    }
}

/// Splits on whitespace, keeping each token's 1-based character column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn parse_index(tok: &str, line: usize, column: usize) -> Result<TimeIndex, ParseError> {
    tok.parse::<TimeIndex>().map_err(|_| {
        syntax(
            line,
            column,
            format!("expected a column number, found `{tok}`"),
        )
    })
}

fn parse_span(tok: &str, line: usize, column: usize) -> Result<(TimeIndex, TimeIndex), ParseError> {
    let (a, b) = tok.split_once("..").ok_or_else(|| {
        syntax(
            line,
            column,
            format!("expected `start..end`, found `{tok}`"),
        )
    })?;
    let start = parse_index(a, line, column)?;
    let end = parse_index(b, line, column + a.chars().count() + 2)?;
    if end < start {
        return Err(syntax(line, column, format!("span `{tok}` runs backwards")));
    }
    Ok((start, end))
}

fn parse_entry(tok: &str, line: usize, column: usize) -> Result<Entry, ParseError> {
    let (voice, rest, rest_col) = match tok.split_once('=') {
        Some((v, rest)) => {
            let voice = v
                .parse::<u32>()
                .map_err(|_| syntax(line, column, format!("invalid voice tag `{v}`")))?;
            (Some(voice), rest, column + v.chars().count() + 1)
        }
        None => (None, tok, column),
    };
    let (pitch_tok, dyn_tok) = match rest.split_once('@') {
        Some((p, d)) => (p, Some(d)),
        None => (rest, None),
    };
    let pitch = pitch_tok
        .parse::<PitchSpec>()
        .map_err(|_| ParseError::UnknownPitch {
            line,
            column: rest_col,
            token: pitch_tok.to_string(),
        })?;
    let dynamic = dyn_tok
        .map(|d| {
            d.parse::<Dynamic>()
                .map_err(|_| ParseError::UnknownDynamic {
                    line,
                    column: rest_col + pitch_tok.chars().count() + 1,
                    token: d.to_string(),
                })
        })
        .transpose()?;
    Ok(Entry {
        voice,
        pitch,
        dynamic,
        line,
        column,
    })
}

fn parse_directive(toks: &[(usize, &str)], line: usize) -> Result<GradualDirective, ParseError> {
    let (col, head) = toks[0];
    let kind = match head {
        "!cresc" => GradualKind::Crescendo,
        "!decresc" => GradualKind::Decrescendo,
        other => return Err(syntax(line, col, format!("unknown directive `{other}`"))),
    };
    let &(span_col, span_tok) = toks
        .get(1)
        .ok_or_else(|| syntax(line, col, "directive needs a `start..end` span"))?;
    let (start, end) = parse_span(span_tok, line, span_col)?;
    let mut target = None;
    let mut voices = None;
    for &(c, tok) in &toks[2..] {
        if let Some(list) = tok.strip_prefix("voices=") {
            if voices.is_some() {
                return Err(syntax(line, c, "duplicate `voices=`"));
            }
            let parsed = list
                .split(',')
                .map(|v| v.parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| syntax(line, c, format!("invalid voice list `{list}`")))?;
            voices = Some(parsed);
        } else if target.is_none() {
            target = Some(
                tok.parse::<Dynamic>()
                    .map_err(|_| ParseError::UnknownDynamic {
                        line,
                        column: c,
                        token: tok.to_string(),
                    })?,
            );
        } else {
            return Err(syntax(line, c, format!("unexpected `{tok}`")));
        }
    }
    Ok(GradualDirective {
        kind,
        start,
        end,
        target,
        voices,
        line,
    })
}

/// Parses the text grammar without resolving dynamics.
pub fn parse_document(text: &str) -> Result<ScoreDocument, ParseError> {
    let mut doc = ScoreDocument::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokens(raw);
        let Some(&(first_col, first)) = toks.first() else {
            continue;
        };
        if first.starts_with("//") || (toks.len() == 1 && first == "|") {
            continue;
        }
        let trimmed = raw.trim();
        if let Some(body) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = body.split_once(':') {
                let key = k.trim();
                if key.is_empty() {
                    return Err(syntax(line, first_col, "header line needs a key"));
                }
                doc.headers.insert(key.to_string(), v.trim().to_string());
            }
            continue;
        }
        if first.starts_with('!') {
            doc.directives.push(parse_directive(&toks, line)?);
            continue;
        }

        let (label, body) = trimmed
            .split_once(':')
            .ok_or_else(|| syntax(line, first_col, "expected `<t>: <entries>`"))?;
        let label = label.trim();
        let (start, end) = if label.contains("..") {
            parse_span(label, line, first_col)?
        } else {
            let t = parse_index(label, line, first_col)?;
            (t, t)
        };
        let expected = doc.columns.len();
        if start != expected {
            return Err(ParseError::NonContiguousColumn {
                line,
                expected,
                found: start,
            });
        }
        let body_offset = raw
            .find(':')
            .map(|b| raw[..=b].chars().count())
            .unwrap_or(0);
        let entries: Vec<(usize, &str)> = tokens(body)
            .into_iter()
            .map(|(c, t)| (c + body_offset, t))
            .collect();
        match entries.as_slice() {
            [] => {
                return Err(syntax(
                    line,
                    first_col,
                    "column needs at least one entry (`-` for a rest)",
                ))
            }
            [(_, "-")] => {
                for t in start..=end {
                    doc.columns.push(Column {
                        t,
                        entries: Vec::new(),
                    });
                }
            }
            _ if end != start => {
                return Err(syntax(line, first_col, "only rest columns may use a span"));
            }
            _ => {
                let mut parsed = Vec::with_capacity(entries.len());
                for &(c, tok) in &entries {
                    if tok == "-" {
                        return Err(syntax(line, c, "a rest cannot share a column with notes"));
                    }
                    parsed.push(parse_entry(tok, line, c)?);
                }
                doc.columns.push(Column {
                    t: start,
                    entries: parsed,
                });
            }
        }
    }

    let tick_count = doc.tick_count();
    for d in &doc.directives {
        if d.end >= tick_count {
            return Err(ParseError::DirectiveOutOfRange {
                line: d.line,
                start: d.start,
                end: d.end,
                tick_count,
            });
        }
    }
    Ok(doc)
}

/// Pressure path of a gradual change from `from` to `to` over
/// `span + 1` columns. Step `k` of `n` lands on offset `floor(k * span / n)`,
/// so the terminal value is reached on the final column.
pub fn gradual_schedule(from: u8, to: u8, span: usize) -> Vec<u8> {
    let steps = usize::from(from.abs_diff(to));
    let offsets: Vec<usize> = (1..=steps).map(|k| k * span / steps).collect();
    (0..=span)
        .map(|o| {
            let taken = offsets.iter().filter(|&&x| x <= o).count() as u8;
            if to >= from {
                from + taken
            } else {
                from - taken
            }
        })
        .collect()
}

struct Schedule {
    start: TimeIndex,
    end: TimeIndex,
    values: Vec<u8>,
}

/// Resolves every entry's pressure, in document order (columns left to
/// right, entries within a column as written).
pub fn resolve_dynamics(doc: &ScoreDocument) -> Result<Vec<u8>, ParseError> {
    let tick_count = doc.tick_count();
    let voices: BTreeSet<Option<u32>> = doc.entries().map(|(_, e)| e.voice).collect();

    let mut timelines: BTreeMap<Option<u32>, Vec<Option<u8>>> = BTreeMap::new();
    for &voice in &voices {
        let key = VoiceKey(voice);
        let mut explicit: BTreeMap<TimeIndex, &Entry> = BTreeMap::new();
        for (t, e) in doc.entries().filter(|(_, e)| e.voice == voice) {
            let Some(d) = e.dynamic else { continue };
            match explicit.get(&t) {
                Some(prev) if prev.dynamic != Some(d) => {
                    return Err(ParseError::ConflictingDynamics {
                        line: e.line,
                        column: e.column,
                        voice: key,
                        t,
                    })
                }
                Some(_) => {}
                None => {
                    explicit.insert(t, e);
                }
            }
        }
        let named = |d: &GradualDirective| {
            d.voices
                .as_ref()
                .is_some_and(|vs| voice.is_some_and(|v| vs.contains(&v)))
        };
        let applies = |d: &GradualDirective| d.voices.is_none() || named(d);

        let mut current: Option<u8> = None;
        let mut schedule: Option<Schedule> = None;
        let mut timeline = Vec::with_capacity(tick_count);
        for t in 0..tick_count {
            if let Some(e) = explicit.get(&t) {
                if schedule.as_ref().is_some_and(|s| t > s.start) {
                    return Err(ParseError::DynamicInsideSpan {
                        line: e.line,
                        column: e.column,
                        voice: key,
                    });
                }
                current = e.dynamic.map(Dynamic::pressure);
            }
            for d in doc.directives.iter().filter(|d| d.start == t && applies(d)) {
                if schedule.is_some() {
                    return Err(ParseError::OverlappingDirectives {
                        line: d.line,
                        voice: key,
                    });
                }
                let Some(prevailing) = current else {
                    if named(d) {
                        return Err(ParseError::NoPrevailingDynamic {
                            line: d.line,
                            voice: key,
                        });
                    }
                    continue;
                };
                let target = match (d.target, d.kind) {
                    (Some(target), _) => target.pressure(),
                    (None, GradualKind::Crescendo) => prevailing + 1,
                    (None, GradualKind::Decrescendo) => prevailing - 1,
                };
                if !(1..=18).contains(&target) {
                    return Err(ParseError::PressureOverflow {
                        line: d.line,
                        kind: d.kind,
                        voice: key,
                    });
                }
                let backwards = match d.kind {
                    GradualKind::Crescendo => target < prevailing,
                    GradualKind::Decrescendo => target > prevailing,
                };
                if backwards {
                    return Err(ParseError::TargetAgainstDirection {
                        line: d.line,
                        kind: d.kind,
                        voice: key,
                        prevailing: Dynamic::from_pressure(prevailing)
                            .expect("prevailing pressure is in range"),
                        target: Dynamic::from_pressure(target).expect("checked above"),
                    });
                }
                schedule = Some(Schedule {
                    start: d.start,
                    end: d.end,
                    values: gradual_schedule(prevailing, target, d.end - d.start),
                });
            }
            if let Some(s) = &schedule {
                current = Some(s.values[t - s.start]);
                if t == s.end {
                    schedule = None;
                }
            }
            timeline.push(current);
        }
        timelines.insert(voice, timeline);
    }

    doc.entries()
        .map(|(t, e)| {
            timelines[&e.voice][t].ok_or(ParseError::NoInitialDynamic {
                line: e.line,
                column: e.column,
                voice: VoiceKey(e.voice),
                t,
            })
        })
        .collect()
}

pub fn parse_score(text: &str) -> Result<Score, ParseError> {
    let doc = parse_document(text)?;
    let pressures = resolve_dynamics(&doc)?;
    let events = doc
        .entries()
        .zip(pressures)
        .map(|((t, e), pressure)| NoteEvent {
            onset: t,
            pitch: e.pitch,
            pressure,
            voice: e.voice,
        })
        .collect();
    let metadata = Metadata {
        headers: doc.headers.clone(),
        source: None,
    };
    Ok(Score::new(events, doc.tick_count(), metadata)
        .expect("parsed events lie inside the column range"))
}

pub fn read_score(path: &Path) -> Result<Score, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_score(&text)
        .map(|s| s.with_source(path.to_path_buf()))
        .map_err(|source| LoadError::Parse {
            path: path.to_path_buf(),
            source,
        })
}

/// Canonical text form. Dynamics are written only where a voice's pressure
/// changes, and runs of rests collapse to `a..b: -`. The text reads back
/// to the same score as long as each voice has one pressure per column.
pub fn write_score(score: &Score) -> String {
    let mut out = String::new();
    for (k, v) in &score.metadata().headers {
        out.push_str(&format!("#{k}: {v}\n"));
    }
    let mut last: BTreeMap<Option<u32>, u8> = BTreeMap::new();
    let mut t = 0;
    while t < score.tick_count() {
        let events = score.events_at(t);
        if events.is_empty() {
            let mut end = t;
            while end + 1 < score.tick_count() && score.events_at(end + 1).is_empty() {
                end += 1;
            }
            if end == t {
                out.push_str(&format!("{t}: -\n"));
            } else {
                out.push_str(&format!("{t}..{end}: -\n"));
            }
            t = end + 1;
            continue;
        }
        out.push_str(&format!("{t}:"));
        for e in events {
            out.push(' ');
            if let Some(v) = e.voice {
                out.push_str(&format!("{v}="));
            }
            out.push_str(&e.pitch.to_string());
            if last.get(&e.voice) != Some(&e.pressure) {
                let d = Dynamic::from_pressure(e.pressure).expect("score pressures are validated");
                out.push_str(&format!("@{d}"));
            }
        }
        // Same-column entries of one voice must agree, so update after the
        // whole column.
        for e in events {
            last.insert(e.voice, e.pressure);
        }
        out.push('\n');
        t += 1;
    }
    out
}

/// `t,y,pitch,pressure,voice`, one row per event in canonical order.
pub fn export_csv(score: &Score) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "y", "pitch", "pressure", "voice"])
        .expect("writing to memory");
    for e in score.events() {
        w.write_record([
            e.onset.to_string(),
            e.y().to_string(),
            e.pitch.to_string(),
            e.pressure.to_string(),
            e.voice.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}
