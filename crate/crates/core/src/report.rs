//! Full analysis of one score and its JSON report.

use serde::Serialize;

use crate::flow::{
    classify_phases, detect_pressure_changes, detect_spots, pressure_set, velocity_constancy,
    FlowConfig, FlowError, Phase, PhaseSegment, PressureChange, SpotEvent, VelocityReport,
};
use crate::model::{FlowY, PitchSpec, Score, TimeIndex};
use crate::pathline::{density_series, extract_pathlines, Pathline, PathlineId};

#[derive(Debug, Clone)]
pub struct Analysis {
    pub score: Score,
    pub config: FlowConfig,
    pub pathlines: Vec<Pathline>,
    pub spots: Vec<SpotEvent>,
    pub pressure_changes: Vec<PressureChange>,
    pub density: Vec<usize>,
    pub velocity: VelocityReport,
    pub phases: Vec<PhaseSegment>,
}

pub fn analyze(score: Score, config: FlowConfig) -> Result<Analysis, FlowError> {
    config.validate()?;
    let pathlines = extract_pathlines(&score);
    let phases = classify_phases(&pathlines, score.tick_count(), &config)?;
    Ok(Analysis {
        spots: detect_spots(&pathlines),
        pressure_changes: detect_pressure_changes(&pathlines),
        density: density_series(&pathlines, score.tick_count()),
        velocity: velocity_constancy(&pathlines),
        phases,
        pathlines,
        config,
        score,
    })
}

#[derive(Debug, Serialize)]
pub struct PointEntry {
    pub t: TimeIndex,
    pub y: FlowY,
    pub pitch: PitchSpec,
    pub pressure: u8,
}

#[derive(Debug, Serialize)]
pub struct PathlineEntry {
    pub id: PathlineId,
    pub voice: Option<u32>,
    pub start: TimeIndex,
    pub end: TimeIndex,
    pub events: Vec<PointEntry>,
}

#[derive(Debug, Serialize)]
pub struct PhaseEntry {
    pub start: TimeIndex,
    pub end: TimeIndex,
    pub label: Phase,
    /// Distinct pressures sounding inside the segment.
    pub pressures: Vec<u8>,
}

/// Report layout. Field order is the JSON key order.
#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub title: Option<&'a str>,
    pub tick_count: usize,
    pub config: FlowConfig,
    pub pathlines: Vec<PathlineEntry>,
    pub spots: &'a [SpotEvent],
    pub pressure_changes: &'a [PressureChange],
    pub density: &'a [usize],
    pub velocity: &'a VelocityReport,
    pub phases: Vec<PhaseEntry>,
}

impl Analysis {
    pub fn report(&self) -> Report<'_> {
        Report {
            title: self.score.metadata().title(),
            tick_count: self.score.tick_count(),
            config: self.config,
            pathlines: self
                .pathlines
                .iter()
                .map(|p| PathlineEntry {
                    id: p.id,
                    voice: p.voice,
                    start: p.start(),
                    end: p.end(),
                    events: p
                        .events
                        .iter()
                        .map(|e| PointEntry {
                            t: e.onset,
                            y: e.y(),
                            pitch: e.pitch,
                            pressure: e.pressure,
                        })
                        .collect(),
                })
                .collect(),
            spots: &self.spots,
            pressure_changes: &self.pressure_changes,
            density: &self.density,
            velocity: &self.velocity,
            phases: self
                .phases
                .iter()
                .map(|s| PhaseEntry {
                    start: s.start,
                    end: s.end,
                    label: s.label,
                    pressures: pressure_set(&self.pathlines, s.start, s.end)
                        .into_iter()
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report()).expect("report serializes");
        s.push('\n');
        s
    }
}
