//! Pathline extraction: splitting a score into chromatic-descent layers.
//!
//! Columns are processed left to right. Every pathline that sounded in the
//! previous column may claim one event in the current column: a semitone
//! below its last pitch first, then a repeat, then a semitone above. The
//! last two are kept inside the layer so that turbulent spots can be found
//! later. Anything further away ends the pathline, and unclaimed events
//! open new ones.
//!
//! When several claims compete, the one with the better motion wins, then
//! the longer pathline, then the lower id. Voice tags partition the
//! claims: a tagged event can only join a pathline of the same voice.

use std::cmp::Reverse;
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::model::{FlowY, NoteEvent, Score, TimeIndex};

pub type PathlineId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pathline {
    /// Entry order, starting at 0.
    pub id: PathlineId,
    pub voice: Option<u32>,
    pub events: Vec<NoteEvent>,
}

impl Pathline {
    pub fn start(&self) -> TimeIndex {
        self.events[0].onset
    }

    /// Inclusive.
    pub fn end(&self) -> TimeIndex {
        self.events[self.events.len() - 1].onset
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_active_at(&self, t: TimeIndex) -> bool {
        self.event_at(t).is_some()
    }

    pub fn event_at(&self, t: TimeIndex) -> Option<&NoteEvent> {
        self.events
            .binary_search_by_key(&t, |e| e.onset)
            .ok()
            .map(|i| &self.events[i])
    }

    pub fn ys(&self) -> impl Iterator<Item = FlowY> + '_ {
        self.events.iter().map(NoteEvent::y)
    }
}

/// Claim preference for a pitch step: descent, repeat, ascent.
fn motion_rank(dy: FlowY) -> Option<u8> {
    match dy {
        -1 => Some(0),
        0 => Some(1),
        1 => Some(2),
        _ => None,
    }
}

/// Motion rank, longest line first, line id, event index in the column.
type ClaimKey = (u8, Reverse<usize>, PathlineId, usize);

pub fn extract_pathlines(score: &Score) -> Vec<Pathline> {
    let mut lines: Vec<Pathline> = Vec::new();
    // Indices into `lines` that sounded in the previous column.
    let mut active: Vec<usize> = Vec::new();

    for t in 0..score.tick_count() {
        let column = score.events_at(t);
        let mut claims: Vec<(ClaimKey, usize)> = Vec::new();
        for &li in &active {
            let line = &lines[li];
            let last = line.events[line.events.len() - 1];
            for (ei, e) in column.iter().enumerate() {
                if e.voice != line.voice {
                    continue;
                }
                if let Some(rank) = motion_rank(e.y() - last.y()) {
                    claims.push(((rank, Reverse(line.len()), line.id, ei), li));
                }
            }
        }
        claims.sort_unstable();

        let mut event_taken = vec![false; column.len()];
        let mut next_active = Vec::with_capacity(active.len());
        for ((_, _, _, ei), li) in claims {
            if event_taken[ei] || next_active.contains(&li) {
                continue;
            }
            event_taken[ei] = true;
            lines[li].events.push(column[ei]);
            next_active.push(li);
        }
        for (ei, e) in column.iter().enumerate() {
            if !event_taken[ei] {
                next_active.push(lines.len());
                lines.push(Pathline {
                    id: lines.len(),
                    voice: e.voice,
                    events: vec![*e],
                });
            }
        }
        active = next_active;
    }
    lines
}

/// Pathlines sounding together at one column, with their harmonic
/// intervals in semitones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjacencyRecord {
    pub t: TimeIndex,
    pub pairs: Vec<(PathlineId, PathlineId, u32)>,
}

pub fn adjacency_at(pathlines: &[Pathline], t: TimeIndex) -> AdjacencyRecord {
    let sounding: Vec<(PathlineId, FlowY)> = pathlines
        .iter()
        .filter_map(|p| p.event_at(t).map(|e| (p.id, e.y())))
        .collect();
    let mut pairs = Vec::new();
    for (i, &(a, ya)) in sounding.iter().enumerate() {
        for &(b, yb) in &sounding[i + 1..] {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            pairs.push((lo, hi, ya.abs_diff(yb)));
        }
    }
    pairs.sort_unstable();
    AdjacencyRecord { t, pairs }
}

/// Number of pathlines sounding at each column.
pub fn density_series(pathlines: &[Pathline], tick_count: usize) -> Vec<usize> {
    let mut density = vec![0; tick_count];
    for p in pathlines {
        for e in &p.events {
            if let Some(d) = density.get_mut(e.onset) {
                *d += 1;
            }
        }
    }
    density
}

/// Semitones per tick, as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Velocity(pub Ratio<u32>);

impl Velocity {
    pub fn as_f64(self) -> f64 {
        f64::from(*self.0.numer()) / f64::from(*self.0.denom())
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Velocity {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("pathline {0} has a single event and no velocity")]
pub struct UndefinedVelocity(pub PathlineId);

/// Velocity measured over the descending steps of a sequence of events.
/// Repeats and upward steps are deviations, not flow; with no descending
/// step at all the velocity is zero.
pub fn descent_velocity(events: &[NoteEvent]) -> Velocity {
    let (semitones, ticks) =
        events
            .windows(2)
            .filter(|w| w[1].y() < w[0].y())
            .fold((0u32, 0u32), |(s, t), w| {
                (
                    s + w[0].y().abs_diff(w[1].y()),
                    t + (w[1].onset - w[0].onset) as u32,
                )
            });
    if ticks == 0 {
        Velocity(Ratio::from_integer(0))
    } else {
        Velocity(Ratio::new(semitones, ticks))
    }
}

pub fn velocity_profile(p: &Pathline) -> Result<Velocity, UndefinedVelocity> {
    if p.len() < 2 {
        return Err(UndefinedVelocity(p.id));
    }
    Ok(descent_velocity(&p.events))
}
