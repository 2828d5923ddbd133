//! Deterministic synthetic corpus: four-voice functional progressions with
//! exact ground-truth annotation timelines. This is the desk-scale training
//! substrate; real-corpus converters are out of scope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::score::{Note, RationalTime, Score, SpelledPitch, Step, TimeSignature};
use crate::tasks::{
    derive_bass, derive_root, Degree, Key, LabelTimeline, Mode, Quality, RnLabel, Segment,
};

/// A chord scheme in the progression rule table.
#[derive(Clone, Copy, Debug)]
struct ChordScheme {
    degree: u8,
    secondary: Option<u8>,
    quality: Quality,
}

const fn c(degree: u8, quality: Quality) -> ChordScheme {
    ChordScheme { degree, secondary: None, quality }
}

/// Diatonic functional progressions, one row per state: (chord, successor
/// state indices). Index 0 is the tonic and also the final state.
fn rule_table(mode: Mode) -> Vec<(ChordScheme, &'static [usize])> {
    match mode {
        Mode::Major => vec![
            /* 0 I    */ (c(1, Quality::Maj), &[1, 2, 3, 4, 5, 7, 8][..]),
            /* 1 IV   */ (c(4, Quality::Maj), &[4, 5, 1, 6, 0]),
            /* 2 ii   */ (c(2, Quality::Min), &[4, 5, 6]),
            /* 3 vi   */ (c(6, Quality::Min), &[2, 1]),
            /* 4 V    */ (c(5, Quality::Maj), &[0, 3]),
            /* 5 V7   */ (c(5, Quality::Dom7), &[0, 3]),
            /* 6 viio */ (c(7, Quality::Dim), &[0]),
            /* 7 V/V  */ (ChordScheme { degree: 5, secondary: Some(5), quality: Quality::Dom7 }, &[4, 5]),
            /* 8 ii7  */ (c(2, Quality::Min7), &[4, 5]),
        ],
        Mode::Minor => vec![
            /* 0 i    */ (c(1, Quality::Min), &[1, 2, 3, 4, 5, 6, 7]),
            /* 1 iv   */ (c(4, Quality::Min), &[4, 5, 2]),
            /* 2 iio  */ (c(2, Quality::Dim), &[4, 5]),
            /* 3 VI   */ (c(6, Quality::Maj), &[1, 2]),
            /* 4 V    */ (c(5, Quality::Maj), &[0, 3]),
            /* 5 V7   */ (c(5, Quality::Dom7), &[0, 3]),
            /* 6 viio7*/ (c(7, Quality::Dim7), &[0]),
            /* 7 iio7 */ (c(2, Quality::HalfDim7), &[4, 5]),
        ],
    }
}

/// Spell a line-of-fifths pitch class at the octave whose MIDI number is
/// closest to `target_midi`.
fn pitch_from_fifths(f: i64, target_midi: i32) -> SpelledPitch {
    let letter = (f + 1).rem_euclid(7) - 1;
    let alter = ((f + 1).div_euclid(7)) as i32;
    let step = *Step::ALL
        .iter()
        .find(|s| s.fifths() as i64 == letter)
        .expect("letter fifths in -1..5");
    let mut best: Option<SpelledPitch> = None;
    for octave in 0..=9 {
        if let Ok(p) = SpelledPitch::new(step, alter, octave) {
            let better = match best {
                None => true,
                Some(b) => (p.midi() - target_midi).abs() < (b.midi() - target_midi).abs(),
            };
            if better {
                best = Some(p);
            }
        }
    }
    best.expect("spellable pitch")
}

/// Generate one four-voice piece: block chords with occasional soprano
/// figuration, plus the exact annotation timeline. Deterministic per seed.
pub fn generate_piece(seed: u64) -> (Score, LabelTimeline) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = if rng.gen_bool(0.5) { Mode::Major } else { Mode::Minor };
    let tonic_fifths = match mode {
        Mode::Major => rng.gen_range(-3..=3),
        // keep minor signatures within the same comfortable band
        Mode::Minor => rng.gen_range(-2..=4),
    };
    let key = Key { tonic_fifths, mode };
    let table = rule_table(mode);

    // walk the rule table; always end on the tonic in root position
    let n_chords = rng.gen_range(8..=14);
    let mut states = Vec::with_capacity(n_chords + 1);
    let mut state = 0usize;
    for _ in 0..n_chords {
        states.push(state);
        let succ = table[state].1;
        state = succ[rng.gen_range(0..succ.len())];
    }
    if state != 0 {
        // steer home: a dominant then the tonic reads as a cadence
        states.push(5.min(table.len() - 1));
    }
    states.push(0);

    let mut notes = Vec::new();
    let mut segments = Vec::new();
    let mut cursor = RationalTime::zero();
    let last = states.len() - 1;
    for (ci, &si) in states.iter().enumerate() {
        let scheme = table[si].0;
        let duration = if ci == last {
            RationalTime::new(1, 2)
        } else {
            RationalTime::new(rng.gen_range(1..=2), 4)
        };
        let quality = scheme.quality;
        let inversion = if ci == 0 || ci == last {
            0
        } else {
            let max = quality.chord_size() as u8;
            // root position most of the time
            if rng.gen_bool(0.55) { 0 } else { rng.gen_range(1..max) }
        };
        let degree = Degree::new(scheme.degree, 0);
        let secondary = scheme.secondary.map(|s| Degree::new(s, 0));
        let label = RnLabel { key, degree, secondary, quality, inversion };
        segments.push(Segment { onset: cursor, duration, label });

        let root = derive_root(key, degree, secondary, quality);
        let bass = derive_bass(root, quality, inversion);
        let offsets = quality.fifth_offsets();
        // upper voices: the chord tones other than the bass tone for
        // sevenths; for triads, double the root
        let mut upper: Vec<i64> = offsets
            .iter()
            .map(|&o| root + o)
            .filter(|&f| f != bass)
            .collect();
        while upper.len() < 3 {
            upper.insert(0, root);
        }
        upper.truncate(3);

        notes.push(Note {
            id: 0,
            onset: cursor,
            duration,
            pitch: pitch_from_fifths(bass, 45),
        });
        let targets = [60, 64, 69];
        for (vi, (&f, &target)) in upper.iter().zip(&targets).enumerate() {
            let figurate = vi == 2 && rng.gen_bool(0.3);
            let pitch = pitch_from_fifths(f, target);
            if figurate {
                let half = RationalTime::new(duration.numer(), duration.denom() * 2);
                notes.push(Note { id: 0, onset: cursor, duration: half, pitch });
                notes.push(Note { id: 0, onset: cursor + half, duration: half, pitch });
            } else {
                notes.push(Note { id: 0, onset: cursor, duration, pitch });
            }
        }
        cursor = cursor + duration;
    }

    let score = Score::new(
        notes,
        vec![TimeSignature { onset: RationalTime::zero(), beats: 4, beat_unit: 4 }],
    )
    .expect("generated notes are valid");
    (score, LabelTimeline { segments })
}

/// A named corpus of `n` pieces; seeds are derived from `seed` so pieces
/// are independent but the corpus is reproducible as a whole.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<(String, Score, LabelTimeline)> {
    (0..n)
        .map(|i| {
            let (score, tl) = generate_piece(seed.wrapping_mul(0x0100_0000_01b3).wrapping_add(i as u64));
            (format!("piece_{i:03}"), score, tl)
        })
        .collect()
}
