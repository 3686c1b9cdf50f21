//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use fluidscore::flow::Phase;
use fluidscore::model::{Metadata, NoteEvent, Score};
use fluidscore::{y_to_pitch, Pathline};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.score"))
}

pub fn load_fixture(name: &str) -> Score {
    fluidscore::read_score(&fixture(name)).expect("fixture parses")
}

pub fn note(onset: usize, y: i32, pressure: u8, voice: Option<u32>) -> NoteEvent {
    NoteEvent {
        onset,
        pitch: y_to_pitch(y).unwrap(),
        pressure,
        voice,
    }
}

pub fn score(events: Vec<NoteEvent>, tick_count: usize) -> Score {
    Score::new(events, tick_count, Metadata::default()).unwrap()
}

// ---------------------------------------------------------------------------
// Exhaustive partition oracle
// ---------------------------------------------------------------------------

/// A chain found by the oracle: its voice and events in onset order.
pub type Chain = (Option<u32>, Vec<NoteEvent>);

type ClaimKey = (u8, Reverse<usize>, usize, usize);

fn rank(dy: i32) -> u8 {
    match dy {
        -1 => 0,
        0 => 1,
        _ => 2,
    }
}

/// Longer lists win once a common prefix is exhausted.
fn cmp_column(a: &[ClaimKey], b: &[ClaimKey]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    b.len().cmp(&a.len())
}

fn cmp_partition(a: &[Vec<ClaimKey>], b: &[Vec<ClaimKey>]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match cmp_column(x, y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    Ordering::Equal
}

/// Evaluates one predecessor assignment: chain ids by head order, and per
/// column the sorted keys of every link into that column.
fn evaluate(
    events: &[NoteEvent],
    col_index: &[usize],
    pred: &[Option<usize>],
    ticks: usize,
) -> (Vec<Vec<ClaimKey>>, Vec<usize>) {
    let n = events.len();
    let mut chain = vec![0usize; n];
    let mut depth = vec![0usize; n];
    let mut next_id = 0;
    for j in 0..n {
        match pred[j] {
            None => {
                chain[j] = next_id;
                depth[j] = 1;
                next_id += 1;
            }
            Some(i) => {
                chain[j] = chain[i];
                depth[j] = depth[i] + 1;
            }
        }
    }
    let mut keys = vec![Vec::new(); ticks];
    for j in 0..n {
        if let Some(i) = pred[j] {
            let dy = events[j].y() - events[i].y();
            keys[events[j].onset].push((rank(dy), Reverse(depth[i]), chain[i], col_index[j]));
        }
    }
    for k in &mut keys {
        k.sort_unstable();
    }
    (keys, chain)
}

/// Enumerates every partition of the score into gap-free chains of
/// same-voice steps of at most one semitone, and returns the best one
/// under the claim-key ordering.
pub fn oracle_partition(score: &Score) -> Vec<Chain> {
    let events = score.events().to_vec();
    let n = events.len();
    let mut col_index = vec![0; n];
    for j in 1..n {
        if events[j].onset == events[j - 1].onset {
            col_index[j] = col_index[j - 1] + 1;
        }
    }
    let options: Vec<Vec<Option<usize>>> = (0..n)
        .map(|j| {
            let mut o = vec![None];
            o.extend(
                (0..n)
                    .filter(|&i| {
                        events[i].onset + 1 == events[j].onset
                            && events[i].voice == events[j].voice
                            && (events[i].y() - events[j].y()).abs() <= 1
                    })
                    .map(Some),
            );
            o
        })
        .collect();

    let mut best: Option<(Vec<Vec<ClaimKey>>, Vec<usize>)> = None;
    let mut pred = vec![None; n];
    let mut used = vec![false; n];

    fn walk(
        j: usize,
        options: &[Vec<Option<usize>>],
        pred: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[Option<usize>]),
    ) {
        if j == options.len() {
            visit(pred);
            return;
        }
        for &o in &options[j] {
            if let Some(i) = o {
                if used[i] {
                    continue;
                }
                used[i] = true;
            }
            pred[j] = o;
            walk(j + 1, options, pred, used, visit);
            if let Some(i) = o {
                used[i] = false;
            }
        }
    }

    let ticks = score.tick_count();
    walk(0, &options, &mut pred, &mut used, &mut |p| {
        let cand = evaluate(&events, &col_index, p, ticks);
        let better = match &best {
            None => true,
            Some(b) => cmp_partition(&cand.0, &b.0) == Ordering::Less,
        };
        if better {
            best = Some(cand);
        }
    });

    let Some((_, chain)) = best else {
        return Vec::new();
    };
    let count = chain.iter().copied().max().map_or(0, |m| m + 1);
    let mut out: Vec<Chain> = vec![(None, Vec::new()); count];
    for (j, &c) in chain.iter().enumerate() {
        out[c].0 = events[j].voice;
        out[c].1.push(events[j]);
    }
    out
}

pub fn as_chains(pathlines: &[Pathline]) -> Vec<Chain> {
    pathlines
        .iter()
        .map(|p| (p.voice, p.events.clone()))
        .collect()
}

/// Small dense scores: few columns, narrow register, mixed voice tags.
pub fn random_small_score(rng: &mut impl Rng) -> Score {
    let ticks = rng.random_range(1..=6);
    let n = rng.random_range(0..=12);
    let tagged = rng.random_bool(0.5);
    let events = (0..n)
        .map(|_| {
            let voice = if tagged {
                Some(rng.random_range(1..=2))
            } else {
                None
            };
            note(rng.random_range(0..ticks), rng.random_range(0..6), 8, voice)
        })
        .collect();
    score(events, ticks)
}

// ---------------------------------------------------------------------------
// Brute-force window labeler
// ---------------------------------------------------------------------------

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Descent rate as a reduced fraction.
fn rate(events: &[NoteEvent]) -> (u64, u64) {
    let (mut semis, mut ticks) = (0u64, 0u64);
    for w in events.windows(2) {
        if w[1].y() < w[0].y() {
            semis += (w[0].y() - w[1].y()) as u64;
            ticks += (w[1].onset - w[0].onset) as u64;
        }
    }
    if ticks == 0 {
        return (0, 1);
    }
    let g = gcd(semis, ticks);
    (semis / g, ticks / g)
}

/// Labels column `t` from the window `[t + 1 - w, t]`, working only from
/// events tagged with the layer each belongs to.
pub fn oracle_labels(
    membership: &[(NoteEvent, usize)],
    tick_count: usize,
    w: usize,
    min_spotted: usize,
) -> Vec<Phase> {
    let mut layers: BTreeMap<usize, Vec<NoteEvent>> = BTreeMap::new();
    for (e, l) in membership {
        layers.entry(*l).or_default().push(*e);
    }
    for evs in layers.values_mut() {
        evs.sort_by_key(|e| e.onset);
    }

    (0..tick_count)
        .map(|t| {
            let s = (t + 1).saturating_sub(w);
            let inside = |x: usize| s <= x && x <= t;
            let at = |x: usize| -> Vec<(usize, NoteEvent)> {
                membership
                    .iter()
                    .filter(|(e, _)| e.onset == x)
                    .map(|(e, l)| (*l, *e))
                    .collect()
            };

            let count = (s..=t).map(|x| at(x).len()).max().unwrap_or(0);
            if count < 2 {
                return Phase::Sparse;
            }

            let mut a = true;
            for x in s..t {
                let now = at(x);
                let next = at(x + 1);
                let dys: BTreeSet<i32> = next
                    .iter()
                    .filter_map(|(l, e)| {
                        now.iter().find(|(m, _)| m == l).map(|(_, p)| e.y() - p.y())
                    })
                    .collect();
                if dys.len() > 1 {
                    a = false;
                }
            }

            let b = (s..=t).all(|x| {
                let ps: BTreeSet<u8> = at(x).iter().map(|(_, e)| e.pressure).collect();
                ps.len() <= 1
            });

            let mut c = true;
            let spans: Vec<(usize, usize, usize)> = layers
                .iter()
                .map(|(l, evs)| (*l, evs[0].onset, evs[evs.len() - 1].onset))
                .filter(|&(_, lo, hi)| lo <= t && hi >= s)
                .collect();
            for (i, &(p, plo, phi)) in spans.iter().enumerate() {
                for &(q, qlo, qhi) in &spans[i + 1..] {
                    let lo = plo.max(qlo).max(s);
                    let hi = phi.min(qhi).min(t);
                    if lo > hi {
                        continue;
                    }
                    let on = |l: usize| -> Vec<usize> {
                        layers[&l]
                            .iter()
                            .map(|e| e.onset)
                            .filter(|&x| lo <= x && x <= hi)
                            .collect()
                    };
                    if on(p) != on(q) {
                        c = false;
                    }
                }
            }

            let mut spotted = BTreeSet::new();
            let mut changed = false;
            let mut rates = BTreeSet::new();
            for (l, evs) in &layers {
                for tri in evs.windows(3) {
                    let d1 = tri[1].y() - tri[0].y();
                    let d2 = tri[2].y() - tri[1].y();
                    if d1 == -1 && (d2 == 1 || d2 == 0) && inside(tri[2].onset) {
                        spotted.insert(*l);
                    }
                }
                for pair in evs.windows(2) {
                    if pair[0].pressure != pair[1].pressure && inside(pair[1].onset) {
                        changed = true;
                    }
                }
                let win: Vec<NoteEvent> = evs.iter().filter(|e| inside(e.onset)).copied().collect();
                if win.len() >= 2 {
                    rates.insert(rate(&win));
                }
            }

            if a && b && c && spotted.is_empty() && !changed {
                Phase::Laminar
            } else if spotted.len() >= min_spotted && (!b || rates.len() > 1) {
                Phase::Turbulent
            } else {
                Phase::Transitional
            }
        })
        .collect()
}

pub fn membership(pathlines: &[Pathline]) -> Vec<(NoteEvent, usize)> {
    pathlines
        .iter()
        .flat_map(|p| p.events.iter().map(move |e| (*e, p.id)))
        .collect()
}

/// Up to three random-walk voices over at most 20 columns, biased toward
/// descending steps and shared pressure so every label occurs.
pub fn random_flow_score(rng: &mut impl Rng) -> Score {
    let ticks = rng.random_range(1..=20);
    let voices = rng.random_range(1..=3);
    let tagged = rng.random_bool(0.7);
    let shared_pressure = rng.random_range(6..=12);
    let mut events = Vec::new();
    for v in 0..voices {
        let voice = tagged.then_some(v as u32 + 1);
        let mut y = rng.random_range(0..24) + 12 * v;
        let mut pressure = shared_pressure;
        for t in 0..ticks {
            if rng.random_bool(0.1) {
                continue;
            }
            y += match rng.random_range(0..10) {
                0..=5 => -1,
                6 => 0,
                7 => 1,
                8 => 3,
                _ => -4,
            };
            y = y.clamp(-30, 70);
            if rng.random_bool(0.08) {
                pressure = (pressure + rng.random_range(0..=2)).clamp(2, 17) - 1;
            }
            events.push(note(t, y, pressure, voice));
        }
    }
    score(events, ticks)
}
