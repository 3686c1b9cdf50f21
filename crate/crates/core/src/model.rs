//! Core score types: spelled pitches and their chromatic flow-field
//! coordinate, dynamics and their pressure magnitude, note events and the
//! assembled score.
//!
//! The flow field is chromatic. C3 sits at 0, every octave spans twelve
//! consecutive integers, and pitches below octave 3 are negative. Spellings
//! are kept for reporting only; every analysis works on the integer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Index of one onset column once bar lines are dropped.
pub type TimeIndex = usize;

/// Chromatic flow-field coordinate (C3 = 0).
pub type FlowY = i32;

pub const MIN_OCTAVE: u8 = 0;
pub const MAX_OCTAVE: u8 = 9;

/// Lowest coordinate with a canonical spelling (C0).
pub const MIN_Y: FlowY = -36;
/// Highest coordinate with a canonical spelling (B9).
pub const MAX_Y: FlowY = 83;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("flow coordinate {0} is outside [{MIN_Y}, {MAX_Y}]")]
    YOutOfRange(FlowY),
    #[error("octave {0} is outside [{MIN_OCTAVE}, {MAX_OCTAVE}]")]
    OctaveOutOfRange(u8),
    #[error("invalid pitch `{0}`")]
    InvalidPitch(String),
    #[error("unknown dynamic `{0}`")]
    UnknownDynamic(String),
    #[error("pressure {0} is outside 1..=18")]
    PressureOutOfRange(u8),
    #[error("event onset {onset} is outside a score of {tick_count} ticks")]
    OnsetOutOfRange { onset: TimeIndex, tick_count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Letter {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Letter {
    pub fn semitone(self) -> i32 {
        match self {
            Letter::C => 0,
            Letter::D => 2,
            Letter::E => 4,
            Letter::F => 5,
            Letter::G => 7,
            Letter::A => 9,
            Letter::B => 11,
        }
    }

    fn from_char(c: char) -> Option<Letter> {
        Some(match c {
            'C' => Letter::C,
            'D' => Letter::D,
            'E' => Letter::E,
            'F' => Letter::F,
            'G' => Letter::G,
            'A' => Letter::A,
            'B' => Letter::B,
            _ => return None,
        })
    }

    fn as_char(self) -> char {
        match self {
            Letter::C => 'C',
            Letter::D => 'D',
            Letter::E => 'E',
            Letter::F => 'F',
            Letter::G => 'G',
            Letter::A => 'A',
            Letter::B => 'B',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Accidental {
    Flat,
    Natural,
    Sharp,
}

impl Accidental {
    pub fn offset(self) -> i32 {
        match self {
            Accidental::Flat => -1,
            Accidental::Natural => 0,
            Accidental::Sharp => 1,
        }
    }
}

/// A spelled pitch. Enharmonic spellings are distinct values that share a
/// flow coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PitchSpec {
    letter: Letter,
    accidental: Accidental,
    octave: u8,
}

impl PitchSpec {
    pub fn new(letter: Letter, accidental: Accidental, octave: u8) -> Result<Self, ModelError> {
        if octave > MAX_OCTAVE {
            return Err(ModelError::OctaveOutOfRange(octave));
        }
        Ok(PitchSpec {
            letter,
            accidental,
            octave,
        })
    }

    pub fn letter(&self) -> Letter {
        self.letter
    }

    pub fn accidental(&self) -> Accidental {
        self.accidental
    }

    pub fn octave(&self) -> u8 {
        self.octave
    }

    /// Flow-field coordinate of this pitch.
    pub fn y(&self) -> FlowY {
        pitch_to_y(*self)
    }
}

/// `12 * (octave - 3) + semitone`, so C3 is 0 and B6 is 47.
pub fn pitch_to_y(p: PitchSpec) -> FlowY {
    12 * (i32::from(p.octave) - 3) + p.letter.semitone() + p.accidental.offset()
}

/// Canonical spelling for a coordinate: a natural when one exists,
/// otherwise the flat of the next letter up.
pub fn y_to_pitch(y: FlowY) -> Result<PitchSpec, ModelError> {
    if !(MIN_Y..=MAX_Y).contains(&y) {
        return Err(ModelError::YOutOfRange(y));
    }
    let octave = (y.div_euclid(12) + 3) as u8;
    let (letter, accidental) = match y.rem_euclid(12) {
        0 => (Letter::C, Accidental::Natural),
        1 => (Letter::D, Accidental::Flat),
        2 => (Letter::D, Accidental::Natural),
        3 => (Letter::E, Accidental::Flat),
        4 => (Letter::E, Accidental::Natural),
        5 => (Letter::F, Accidental::Natural),
        6 => (Letter::G, Accidental::Flat),
        7 => (Letter::G, Accidental::Natural),
        8 => (Letter::A, Accidental::Flat),
        9 => (Letter::A, Accidental::Natural),
        10 => (Letter::B, Accidental::Flat),
        _ => (Letter::B, Accidental::Natural),
    };
    PitchSpec::new(letter, accidental, octave)
}

impl fmt::Display for PitchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = match self.accidental {
            Accidental::Flat => "b",
            Accidental::Natural => "",
            Accidental::Sharp => "#",
        };
        write!(f, "{}{}{}", self.letter.as_char(), acc, self.octave)
    }
}

impl FromStr for PitchSpec {
    type Err = ModelError;

    /// Parses `Ab3`, `C#5`, `B4`: letter, optional `b`/`#`, one octave digit.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidPitch(s.to_string());
        let mut chars = s.chars();
        let letter = chars.next().and_then(Letter::from_char).ok_or_else(bad)?;
        let rest: Vec<char> = chars.collect();
        let (accidental, digits) = match rest.as_slice() {
            ['b', d @ ..] => (Accidental::Flat, d),
            ['#', d @ ..] => (Accidental::Sharp, d),
            d => (Accidental::Natural, d),
        };
        let octave = match digits {
            [d] => d.to_digit(10).ok_or_else(bad)? as u8,
            _ => return Err(bad()),
        };
        PitchSpec::new(letter, accidental, octave)
    }
}

impl Serialize for PitchSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

const DYNAMIC_MARKINGS: [&str; 18] = [
    "ppppppppp",
    "pppppppp",
    "ppppppp",
    "pppppp",
    "ppppp",
    "pppp",
    "ppp",
    "pp",
    "p",
    "mp",
    "mf",
    "f",
    "ff",
    "fff",
    "ffff",
    "fffff",
    "ffffff",
    "fffffff",
];

/// One of the eighteen markings from nine p's to seven f's.
///
/// Stored as its pressure magnitude, so ordering follows loudness.
/// Markings outside this closed range (the ten-f marking some scores use)
/// are rejected rather than clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dynamic(u8);

impl Dynamic {
    pub const SOFTEST: Dynamic = Dynamic(1);
    pub const LOUDEST: Dynamic = Dynamic(18);

    pub fn from_pressure(pressure: u8) -> Result<Self, ModelError> {
        if (1..=18).contains(&pressure) {
            Ok(Dynamic(pressure))
        } else {
            Err(ModelError::PressureOutOfRange(pressure))
        }
    }

    pub fn marking(self) -> &'static str {
        DYNAMIC_MARKINGS[usize::from(self.0) - 1]
    }

    /// All eighteen levels, softest first.
    pub fn all() -> impl Iterator<Item = Dynamic> {
        (1..=18).map(Dynamic)
    }

    pub fn pressure(self) -> u8 {
        dynamic_to_pressure(self)
    }
}

pub fn dynamic_to_pressure(d: Dynamic) -> u8 {
    d.0
}

impl FromStr for Dynamic {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DYNAMIC_MARKINGS
            .iter()
            .position(|m| *m == s)
            .map(|i| Dynamic(i as u8 + 1))
            .ok_or_else(|| ModelError::UnknownDynamic(s.to_string()))
    }
}

impl fmt::Display for Dynamic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.marking())
    }
}

/// One sounding pitch at an onset column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NoteEvent {
    pub onset: TimeIndex,
    pub pitch: PitchSpec,
    /// Pressure magnitude of the governing dynamic, 1..=18.
    pub pressure: u8,
    /// Staff or beam group from the encoding, when present.
    pub voice: Option<u32>,
}

impl NoteEvent {
    pub fn y(&self) -> FlowY {
        self.pitch.y()
    }

    /// Canonical order: onset ascending, then highest coordinate first.
    /// The remaining keys only separate unisons.
    pub fn canonical_cmp(&self, other: &NoteEvent) -> std::cmp::Ordering {
        self.onset
            .cmp(&other.onset)
            .then_with(|| other.y().cmp(&self.y()))
            .then_with(|| self.voice.cmp(&other.voice))
            .then_with(|| self.pitch.cmp(&other.pitch))
            .then_with(|| self.pressure.cmp(&other.pressure))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    /// `#key: value` header lines, `title` among them.
    pub headers: BTreeMap<String, String>,
    pub source: Option<PathBuf>,
}

impl Metadata {
    pub fn title(&self) -> Option<&str> {
        self.headers.get("title").map(String::as_str)
    }
}

/// A score as a flat, canonically sorted list of note events over a dense
/// range of onset columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    events: Vec<NoteEvent>,
    tick_count: usize,
    rests: BTreeSet<TimeIndex>,
    metadata: Metadata,
}

impl Score {
    pub fn new(
        mut events: Vec<NoteEvent>,
        tick_count: usize,
        metadata: Metadata,
    ) -> Result<Self, ModelError> {
        for e in &events {
            if e.onset >= tick_count {
                return Err(ModelError::OnsetOutOfRange {
                    onset: e.onset,
                    tick_count,
                });
            }
            Dynamic::from_pressure(e.pressure)?;
        }
        events.sort_by(NoteEvent::canonical_cmp);
        let sounding: BTreeSet<TimeIndex> = events.iter().map(|e| e.onset).collect();
        let rests = (0..tick_count).filter(|t| !sounding.contains(t)).collect();
        Ok(Score {
            events,
            tick_count,
            rests,
            metadata,
        })
    }

    pub fn empty() -> Self {
        Score {
            events: Vec::new(),
            tick_count: 0,
            rests: BTreeSet::new(),
            metadata: Metadata::default(),
        }
    }

    pub fn events(&self) -> &[NoteEvent] {
        &self.events
    }

    pub fn tick_count(&self) -> usize {
        self.tick_count
    }

    /// Columns with no sounding event.
    pub fn rests(&self) -> &BTreeSet<TimeIndex> {
        &self.rests
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn with_source(mut self, source: PathBuf) -> Self {
        self.metadata.source = Some(source);
        self
    }

    /// Events sounding at `t`, in canonical order.
    pub fn events_at(&self, t: TimeIndex) -> &[NoteEvent] {
        let lo = self.events.partition_point(|e| e.onset < t);
        let hi = self.events.partition_point(|e| e.onset <= t);
        &self.events[lo..hi]
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> PitchSpec {
        s.parse().unwrap()
    }

    #[test]
    fn table_rows() {
        assert_eq!(pitch_to_y(p("C4")), 12);
        assert_eq!(pitch_to_y(p("C1")), -24);
        assert_eq!(pitch_to_y(p("B6")), 47);
        assert_eq!(pitch_to_y(p("Bb3")), 10);
        assert_eq!(pitch_to_y(p("C3")), 0);
        assert_eq!(pitch_to_y(p("Db3")), 1);
    }

    #[test]
    fn enharmonics_collapse() {
        assert_eq!(p("C#3").y(), p("Db3").y());
        assert_eq!(p("C#3").y(), 1);
        assert_ne!(p("C#3"), p("Db3"));
        // B#4 lands on C5 under the chromatic formula.
        assert_eq!(p("B#4").y(), 24);
        assert_eq!(p("Cb4").y(), 11);
    }

    #[test]
    fn canonical_spellings() {
        assert_eq!(y_to_pitch(0).unwrap(), p("C3"));
        assert_eq!(y_to_pitch(12).unwrap(), p("C4"));
        assert_eq!(y_to_pitch(1).unwrap(), p("Db3"));
        assert_eq!(y_to_pitch(-13).unwrap(), p("B1"));
        assert_eq!(y_to_pitch(MIN_Y).unwrap(), p("C0"));
        assert_eq!(y_to_pitch(MAX_Y).unwrap(), p("B9"));
        assert_eq!(y_to_pitch(MIN_Y - 1), Err(ModelError::YOutOfRange(-37)));
        assert!(y_to_pitch(MAX_Y + 1).is_err());
    }

    #[test]
    fn pitch_tokens() {
        assert_eq!(p("Ab3").to_string(), "Ab3");
        assert_eq!(p("C#5").to_string(), "C#5");
        for bad in ["H4", "", "C", "Cb", "C10", "c4", "Bbb3", "A#x"] {
            assert!(bad.parse::<PitchSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn dynamics_table() {
        let d = |s: &str| s.parse::<Dynamic>().unwrap().pressure();
        assert_eq!(d("pppp"), 6);
        assert_eq!(d("p"), 9);
        assert_eq!(d("fffffff"), 18);
        assert_eq!(d("ppppppppp"), 1);
        assert_eq!(d("mf"), 11);
        assert!("ffffffff".parse::<Dynamic>().is_err());
        assert!("ffffffffff".parse::<Dynamic>().is_err());
        assert!("sfz".parse::<Dynamic>().is_err());
    }

    #[test]
    fn dynamics_strictly_increasing() {
        let levels: Vec<u8> = Dynamic::all().map(dynamic_to_pressure).collect();
        assert_eq!(levels, (1..=18).collect::<Vec<_>>());
        for d in Dynamic::all() {
            assert_eq!(d.marking().parse::<Dynamic>().unwrap(), d);
        }
    }

    #[test]
    fn score_sorts_and_records_rests() {
        let ev = |t, s: &str| NoteEvent {
            onset: t,
            pitch: p(s),
            pressure: 8,
            voice: None,
        };
        let s = Score::new(
            vec![ev(2, "C4"), ev(0, "C3"), ev(0, "D4")],
            4,
            Metadata::default(),
        )
        .unwrap();
        let ys: Vec<_> = s.events().iter().map(|e| (e.onset, e.y())).collect();
        assert_eq!(ys, vec![(0, 14), (0, 0), (2, 12)]);
        assert_eq!(s.rests().iter().copied().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(s.events_at(0).len(), 2);
        assert!(s.events_at(1).is_empty());
        assert!(Score::new(vec![ev(4, "C4")], 4, Metadata::default()).is_err());
    }

    fn any_pitch() -> impl Strategy<Value = PitchSpec> {
        (0usize..7, 0usize..3, 0u8..=9).prop_map(|(l, a, o)| {
            let letters = [
                Letter::C,
                Letter::D,
                Letter::E,
                Letter::F,
                Letter::G,
                Letter::A,
                Letter::B,
            ];
            let accs = [Accidental::Flat, Accidental::Natural, Accidental::Sharp];
            PitchSpec::new(letters[l], accs[a], o).unwrap()
        })
    }

    proptest! {
        #[test]
        fn y_round_trip(y in MIN_Y..=MAX_Y) {
            prop_assert_eq!(pitch_to_y(y_to_pitch(y).unwrap()), y);
        }

        #[test]
        fn octave_shift_is_twelve(pitch in any_pitch()) {
            prop_assume!(pitch.octave() < MAX_OCTAVE);
            let up = PitchSpec::new(pitch.letter(), pitch.accidental(), pitch.octave() + 1).unwrap();
            prop_assert_eq!(pitch_to_y(up) - pitch_to_y(pitch), 12);
        }

        #[test]
        fn token_round_trip(pitch in any_pitch()) {
            prop_assert_eq!(pitch.to_string().parse::<PitchSpec>().unwrap(), pitch);
        }
    }
}
