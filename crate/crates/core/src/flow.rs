//! Laminar / turbulent classification over extracted pathlines.
//!
//! A window is laminar when at least two layers sound together, every pair
//! of layers moving between the same two columns moves by the same step,
//! simultaneous events share one pressure, overlapping layers share their
//! onsets, and nothing inside the window is a spot or a pressure change.
//!
//! Each column is labelled from the trailing window that ends on it, so a
//! disturbance only affects the columns at and after it. Labels are then
//! merged into maximal segments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{FlowY, NoteEvent, TimeIndex};
use crate::pathline::{descent_velocity, velocity_profile, Pathline, PathlineId, Velocity};

pub const DEFAULT_WINDOW: usize = 8;
pub const DEFAULT_MIN_SPOTTED_LAYERS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("window {start}..{end} is empty")]
    EmptyWindow { start: TimeIndex, end: TimeIndex },
    #[error("window size must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("turbulence needs spots in at least 2 layers, got {0}")]
    TooFewSpottedLayers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlowConfig {
    /// Columns per trailing window.
    pub window: usize,
    /// Distinct layers that must carry spots for a window to be turbulent.
    pub min_spotted_layers: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            window: DEFAULT_WINDOW,
            min_spotted_layers: DEFAULT_MIN_SPOTTED_LAYERS,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.window < 2 {
            return Err(FlowError::WindowTooSmall(self.window));
        }
        if self.min_spotted_layers < 2 {
            return Err(FlowError::TooFewSpottedLayers(self.min_spotted_layers));
        }
        Ok(())
    }
}

/// Inclusive column range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Window {
    pub start: TimeIndex,
    pub end: TimeIndex,
}

impl Window {
    pub fn new(start: TimeIndex, end: TimeIndex) -> Result<Self, FlowError> {
        if end < start {
            return Err(FlowError::EmptyWindow { start, end });
        }
        Ok(Window { start, end })
    }

    /// The window of `size` columns ending at `t`, cut off at column 0.
    pub fn trailing(t: TimeIndex, size: usize) -> Self {
        Window {
            start: (t + 1).saturating_sub(size),
            end: t,
        }
    }

    pub fn contains(&self, t: TimeIndex) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpotKind {
    /// A descent turning upward.
    Reversal,
    /// A descent stalling on a repeated pitch.
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpotEvent {
    pub pathline: PathlineId,
    pub t: TimeIndex,
    pub kind: SpotKind,
    pub prev_dy: FlowY,
    pub dy: FlowY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PressureChange {
    pub pathline: PathlineId,
    pub t: TimeIndex,
    pub from: u8,
    pub to: u8,
    pub delta: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LCheck {
    pub window: Window,
    pub holds: bool,
    pub a_parallel: bool,
    pub b_same_pressure: bool,
    pub c_same_rhythm: bool,
    /// Most layers sounding at any one column of the window.
    pub active_layer_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Phase {
    Laminar,
    Transitional,
    Turbulent,
    Sparse,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Laminar => "Laminar",
            Phase::Transitional => "Transitional",
            Phase::Turbulent => "Turbulent",
            Phase::Sparse => "Sparse",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open column range `[start, end)` with one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseSegment {
    pub start: TimeIndex,
    pub end: TimeIndex,
    pub label: Phase,
}

impl PhaseSegment {
    pub fn contains(&self, t: TimeIndex) -> bool {
        (self.start..self.end).contains(&t)
    }
}

/// Column-indexed view of a set of pathlines.
struct Field<'a> {
    lines: &'a [Pathline],
    by_tick: Vec<Vec<(usize, &'a NoteEvent)>>,
}

impl<'a> Field<'a> {
    fn new(lines: &'a [Pathline]) -> Self {
        let ticks = lines
            .iter()
            .filter(|p| !p.is_empty())
            .map(|p| p.end() + 1)
            .max()
            .unwrap_or(0);
        let mut by_tick = vec![Vec::new(); ticks];
        for (li, p) in lines.iter().enumerate() {
            for e in &p.events {
                by_tick[e.onset].push((li, e));
            }
        }
        Field { lines, by_tick }
    }

    fn at(&self, t: TimeIndex) -> &[(usize, &'a NoteEvent)] {
        self.by_tick.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    fn laminar_check(&self, window: Window) -> LCheck {
        let active_layer_count = (window.start..=window.end)
            .map(|t| self.at(t).len())
            .max()
            .unwrap_or(0);

        let mut a_parallel = true;
        for t in window.start..window.end {
            let now: BTreeMap<usize, FlowY> =
                self.at(t).iter().map(|(li, e)| (*li, e.y())).collect();
            let mut steps = self
                .at(t + 1)
                .iter()
                .filter_map(|(li, e)| now.get(li).map(|y| e.y() - y));
            if let Some(first) = steps.next() {
                if steps.any(|dy| dy != first) {
                    a_parallel = false;
                    break;
                }
            }
        }

        let b_same_pressure = (window.start..=window.end).all(|t| {
            let col = self.at(t);
            col.iter().all(|(_, e)| e.pressure == col[0].1.pressure)
        });

        let in_window: Vec<&Pathline> = self
            .lines
            .iter()
            .filter(|p| !p.is_empty() && p.start() <= window.end && p.end() >= window.start)
            .collect();
        let mut c_same_rhythm = true;
        'pairs: for (i, p) in in_window.iter().enumerate() {
            for q in &in_window[i + 1..] {
                let lo = p.start().max(q.start()).max(window.start);
                let hi = p.end().min(q.end()).min(window.end);
                if lo > hi {
                    continue;
                }
                let onsets = |l: &Pathline| -> Vec<TimeIndex> {
                    l.events
                        .iter()
                        .map(|e| e.onset)
                        .filter(|t| (lo..=hi).contains(t))
                        .collect()
                };
                if onsets(p) != onsets(q) {
                    c_same_rhythm = false;
                    break 'pairs;
                }
            }
        }

        LCheck {
            window,
            holds: active_layer_count >= 2 && a_parallel && b_same_pressure && c_same_rhythm,
            a_parallel,
            b_same_pressure,
            c_same_rhythm,
            active_layer_count,
        }
    }

    /// Whether the layers' velocities inside the window disagree.
    fn velocity_varies(&self, window: Window) -> bool {
        let mut seen: BTreeSet<Velocity> = BTreeSet::new();
        for p in self.lines {
            let inside: Vec<NoteEvent> = p
                .events
                .iter()
                .filter(|e| window.contains(e.onset))
                .copied()
                .collect();
            if inside.len() >= 2 {
                seen.insert(descent_velocity(&inside));
            }
        }
        seen.len() > 1
    }
}

pub fn check_laminar(pathlines: &[Pathline], window: Window) -> Result<LCheck, FlowError> {
    let window = Window::new(window.start, window.end)?;
    Ok(Field::new(pathlines).laminar_check(window))
}

/// Reversals and halts in every pathline, ordered by column then pathline.
pub fn detect_spots(pathlines: &[Pathline]) -> Vec<SpotEvent> {
    let mut spots = Vec::new();
    for p in pathlines {
        for w in p.events.windows(3) {
            let prev_dy = w[1].y() - w[0].y();
            let dy = w[2].y() - w[1].y();
            let kind = match (prev_dy, dy) {
                (-1, 1) => SpotKind::Reversal,
                (-1, 0) => SpotKind::Halt,
                _ => continue,
            };
            spots.push(SpotEvent {
                pathline: p.id,
                t: w[2].onset,
                kind,
                prev_dy,
                dy,
            });
        }
    }
    spots.sort_by_key(|s| (s.t, s.pathline));
    spots
}

pub fn detect_pressure_changes(pathlines: &[Pathline]) -> Vec<PressureChange> {
    let mut changes: Vec<PressureChange> = pathlines
        .iter()
        .flat_map(|p| {
            p.events
                .windows(2)
                .filter(|w| w[0].pressure != w[1].pressure)
                .map(move |w| PressureChange {
                    pathline: p.id,
                    t: w[1].onset,
                    from: w[0].pressure,
                    to: w[1].pressure,
                    delta: i32::from(w[1].pressure) - i32::from(w[0].pressure),
                })
        })
        .collect();
    changes.sort_by_key(|c| (c.t, c.pathline));
    changes
}

fn label_window(
    field: &Field<'_>,
    spots: &[SpotEvent],
    changes: &[PressureChange],
    window: Window,
    config: &FlowConfig,
) -> Phase {
    let check = field.laminar_check(window);
    if check.active_layer_count < 2 {
        return Phase::Sparse;
    }
    let spotted: BTreeSet<PathlineId> = spots
        .iter()
        .filter(|s| window.contains(s.t))
        .map(|s| s.pathline)
        .collect();
    let pressure_moved = changes.iter().any(|c| window.contains(c.t));
    if check.holds && spotted.is_empty() && !pressure_moved {
        return Phase::Laminar;
    }
    let magnitude_changed = !check.b_same_pressure || field.velocity_varies(window);
    if spotted.len() >= config.min_spotted_layers && magnitude_changed {
        Phase::Turbulent
    } else {
        Phase::Transitional
    }
}

/// One label per column, each from the trailing window ending there.
pub fn window_labels(
    pathlines: &[Pathline],
    tick_count: usize,
    config: &FlowConfig,
) -> Result<Vec<(Window, Phase)>, FlowError> {
    config.validate()?;
    let field = Field::new(pathlines);
    let spots = detect_spots(pathlines);
    let changes = detect_pressure_changes(pathlines);
    Ok((0..tick_count)
        .map(|t| {
            let w = Window::trailing(t, config.window);
            (w, label_window(&field, &spots, &changes, w, config))
        })
        .collect())
}

pub fn classify_phases(
    pathlines: &[Pathline],
    tick_count: usize,
    config: &FlowConfig,
) -> Result<Vec<PhaseSegment>, FlowError> {
    let labels = window_labels(pathlines, tick_count, config)?;
    Ok(merge_labels(labels.iter().map(|(_, p)| *p)))
}

/// Collapses per-column labels into maximal runs.
pub fn merge_labels(labels: impl IntoIterator<Item = Phase>) -> Vec<PhaseSegment> {
    let mut segments: Vec<PhaseSegment> = Vec::new();
    for (t, label) in labels.into_iter().enumerate() {
        match segments.last_mut() {
            Some(seg) if seg.label == label => seg.end = t + 1,
            _ => segments.push(PhaseSegment {
                start: t,
                end: t + 1,
                label,
            }),
        }
    }
    segments
}

/// Distinct pressures sounding in `[start, end)`.
pub fn pressure_set(pathlines: &[Pathline], start: TimeIndex, end: TimeIndex) -> BTreeSet<u8> {
    pathlines
        .iter()
        .flat_map(|p| p.events.iter())
        .filter(|e| (start..end).contains(&e.onset))
        .map(|e| e.pressure)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerVelocity {
    pub pathline: PathlineId,
    /// `None` for single-event pathlines.
    pub profile: Option<Velocity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VelocityReport {
    pub constant: bool,
    pub shared: Option<Velocity>,
    pub layers: Vec<LayerVelocity>,
}

/// Whether every pathline with a defined velocity moves at the same rate.
pub fn velocity_constancy(pathlines: &[Pathline]) -> VelocityReport {
    let layers: Vec<LayerVelocity> = pathlines
        .iter()
        .map(|p| LayerVelocity {
            pathline: p.id,
            profile: velocity_profile(p).ok(),
        })
        .collect();
    let distinct: BTreeSet<Velocity> = layers.iter().filter_map(|l| l.profile).collect();
    let constant = distinct.len() <= 1;
    VelocityReport {
        constant,
        shared: if constant {
            distinct.into_iter().next()
        } else {
            None
        },
        layers,
    }
}
