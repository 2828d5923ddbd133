//! Exact-time score representation, the note-table text format, and
//! note-wise input features (pitch spelling, duration, metrical position).

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Exact score time in whole-note units (a quarter note is 1/4).
/// Backed by a reduced `Ratio<i64>`; no floating-point time anywhere.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RationalTime(Ratio<i64>);

impl RationalTime {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational time with zero denominator");
        RationalTime(Ratio::new(num, den))
    }

    pub const fn zero() -> Self {
        RationalTime(Ratio::new_raw(0, 1))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Floor of self / other.
    pub fn div_floor(&self, other: RationalTime) -> i64 {
        (self.0 / other.0).floor().to_integer()
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl std::ops::Add for RationalTime {
    type Output = RationalTime;
    fn add(self, rhs: RationalTime) -> RationalTime {
        RationalTime(self.0 + rhs.0)
    }
}

impl std::ops::Sub for RationalTime {
    type Output = RationalTime;
    fn sub(self, rhs: RationalTime) -> RationalTime {
        RationalTime(self.0 - rhs.0)
    }
}

impl std::ops::Mul<i64> for RationalTime {
    type Output = RationalTime;
    fn mul(self, rhs: i64) -> RationalTime {
        RationalTime(self.0 * Ratio::from_integer(rhs))
    }
}

impl fmt::Display for RationalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

/// Diatonic letter name of a pitch.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Step {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Step {
    pub const ALL: [Step; 7] = [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B];

    /// Semitone offset of the natural step within an octave.
    pub fn base_semitones(self) -> i32 {
        match self {
            Step::C => 0,
            Step::D => 2,
            Step::E => 4,
            Step::F => 5,
            Step::G => 7,
            Step::A => 9,
            Step::B => 11,
        }
    }

    /// Index into [C, D, E, F, G, A, B].
    pub fn index(self) -> usize {
        match self {
            Step::C => 0,
            Step::D => 1,
            Step::E => 2,
            Step::F => 3,
            Step::G => 4,
            Step::A => 5,
            Step::B => 6,
        }
    }

    /// Line-of-fifths coordinate of the natural step (F=-1, C=0, G=1, ...).
    pub fn fifths(self) -> i32 {
        match self {
            Step::F => -1,
            Step::C => 0,
            Step::G => 1,
            Step::D => 2,
            Step::A => 3,
            Step::E => 4,
            Step::B => 5,
        }
    }
}

impl FromStr for Step {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "C" => Ok(Step::C),
            "D" => Ok(Step::D),
            "E" => Ok(Step::E),
            "F" => Ok(Step::F),
            "G" => Ok(Step::G),
            "A" => Ok(Step::A),
            "B" => Ok(Step::B),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Step::C => 'C',
            Step::D => 'D',
            Step::E => 'E',
            Step::F => 'F',
            Step::G => 'G',
            Step::A => 'A',
            Step::B => 'B',
        };
        write!(f, "{c}")
    }
}

/// A spelled pitch. Distinct spellings of the same MIDI number are distinct
/// values (G#4 != Ab4).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SpelledPitch {
    pub step: Step,
    /// Chromatic alteration in [-2, 2] (bb .. x).
    pub alter: i32,
    /// Octave in [0, 10]; C4 is middle C.
    pub octave: i32,
}

impl SpelledPitch {
    pub fn new(step: Step, alter: i32, octave: i32) -> Result<Self, ScoreError> {
        if !(-2..=2).contains(&alter) {
            return Err(ScoreError::PitchOutOfRange(format!("alter {alter} outside [-2,2]")));
        }
        if !(0..=10).contains(&octave) {
            return Err(ScoreError::PitchOutOfRange(format!("octave {octave} outside [0,10]")));
        }
        Ok(SpelledPitch { step, alter, octave })
    }

    pub fn midi(&self) -> i32 {
        12 * (self.octave + 1) + self.step.base_semitones() + self.alter
    }

    /// Line-of-fifths coordinate of the pitch class (C=0, G=1, F=-1, F#=6, Bb=-2, ...).
    pub fn fifths(&self) -> i32 {
        self.step.fifths() + 7 * self.alter
    }
}

/// A note with exact onset and duration.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Note {
    pub id: usize,
    pub onset: RationalTime,
    pub duration: RationalTime,
    pub pitch: SpelledPitch,
}

impl Note {
    pub fn offset(&self) -> RationalTime {
        self.onset + self.duration
    }
}

/// A time signature event: `beats` beats of `1/beat_unit` whole notes each.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TimeSignature {
    pub onset: RationalTime,
    pub beats: u32,
    pub beat_unit: u32,
}

impl TimeSignature {
    pub fn beat_length(&self) -> RationalTime {
        RationalTime::new(1, self.beat_unit as i64)
    }

    pub fn bar_length(&self) -> RationalTime {
        RationalTime::new(self.beats as i64, self.beat_unit as i64)
    }
}

/// A score: notes sorted by (onset, MIDI number, id), plus time signatures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Score {
    pub notes: Vec<Note>,
    pub time_signatures: Vec<TimeSignature>,
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("line {line}, col {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("pitch out of range: {0}")]
    PitchOutOfRange(String),
    #[error("time {0} precedes the first time signature")]
    BeforeFirstTimeSignature(RationalTime),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BeatStrength {
    Downbeat,
    Strong,
    Weak,
    Offbeat,
}

impl BeatStrength {
    pub fn index(self) -> usize {
        match self {
            BeatStrength::Downbeat => 0,
            BeatStrength::Strong => 1,
            BeatStrength::Weak => 2,
            BeatStrength::Offbeat => 3,
        }
    }
}

impl Score {
    /// Build a score from unsorted notes and time signature events.
    /// Notes get ids 0..n-1 in (onset, midi, insertion) order. A missing
    /// time signature defaults to 4/4 at onset 0.
    pub fn new(
        mut notes: Vec<Note>,
        mut time_signatures: Vec<TimeSignature>,
    ) -> Result<Self, ScoreError> {
        for n in &notes {
            if n.duration.is_zero() || n.duration.is_negative() {
                return Err(ScoreError::Invalid(format!(
                    "note at onset {} has non-positive duration",
                    n.onset
                )));
            }
            if n.onset.is_negative() {
                return Err(ScoreError::Invalid(format!("note onset {} is negative", n.onset)));
            }
        }
        if time_signatures.is_empty() {
            time_signatures.push(TimeSignature {
                onset: RationalTime::zero(),
                beats: 4,
                beat_unit: 4,
            });
        }
        time_signatures.sort_by_key(|t| t.onset);
        if !time_signatures[0].onset.is_zero() {
            return Err(ScoreError::Invalid(
                "first time signature must be at onset 0".into(),
            ));
        }
        notes.sort_by(|a, b| {
            (a.onset, a.pitch.midi(), a.id).cmp(&(b.onset, b.pitch.midi(), b.id))
        });
        for (i, n) in notes.iter_mut().enumerate() {
            n.id = i;
        }
        Ok(Score { notes, time_signatures })
    }

    /// End of the score: max note offset (0 for an empty score).
    pub fn end(&self) -> RationalTime {
        self.notes
            .iter()
            .map(|n| n.offset())
            .max()
            .unwrap_or(RationalTime::zero())
    }

    /// The distinct note onsets in increasing order.
    pub fn distinct_onsets(&self) -> Vec<RationalTime> {
        let mut out: Vec<RationalTime> = Vec::new();
        for n in &self.notes {
            if out.last() != Some(&n.onset) {
                out.push(n.onset);
            }
        }
        out
    }
}

fn parse_rational(tok: &str, line: usize, col: usize) -> Result<RationalTime, ScoreError> {
    let err = |msg: String| ScoreError::Parse { line, col, msg };
    let (n, d) = match tok.split_once('/') {
        Some((n, d)) => (n, d),
        None => return Err(err(format!("expected num/den rational, got `{tok}`"))),
    };
    let num: i64 = n
        .parse()
        .map_err(|_| err(format!("bad rational numerator `{n}`")))?;
    let den: i64 = d
        .parse()
        .map_err(|_| err(format!("bad rational denominator `{d}`")))?;
    if den == 0 {
        return Err(err("rational denominator is zero".into()));
    }
    Ok(RationalTime::new(num, den))
}

/// Parse the note-table format:
/// `T <onset_num>/<onset_den> <beats> <beat_unit>` and
/// `N <onset_num>/<onset_den> <dur_num>/<dur_den> <step> <alter> <octave>`,
/// with `#` comments and blank lines ignored.
pub fn parse_note_table(text: &str) -> Result<Score, ScoreError> {
    let mut notes = Vec::new();
    let mut sigs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<(usize, &str)> = content
            .split_whitespace()
            .map(|t| {
                // byte offset of token start, for column reporting
                let col = t.as_ptr() as usize - content.as_ptr() as usize + 1;
                (col, t)
            })
            .collect();
        if toks.is_empty() {
            continue;
        }
        let err = |col: usize, msg: String| ScoreError::Parse { line, col, msg };
        match toks[0].1 {
            "T" => {
                if toks.len() != 4 {
                    return Err(err(1, format!("T line needs 3 fields, got {}", toks.len() - 1)));
                }
                let onset = parse_rational(toks[1].1, line, toks[1].0)?;
                let beats: u32 = toks[2]
                    .1
                    .parse()
                    .map_err(|_| err(toks[2].0, format!("bad beat count `{}`", toks[2].1)))?;
                let beat_unit: u32 = toks[3]
                    .1
                    .parse()
                    .map_err(|_| err(toks[3].0, format!("bad beat unit `{}`", toks[3].1)))?;
                if beats == 0 {
                    return Err(err(toks[2].0, "beat count must be positive".into()));
                }
                if beat_unit == 0 || !beat_unit.is_power_of_two() {
                    return Err(err(toks[3].0, format!("beat unit `{beat_unit}` not a power of two")));
                }
                sigs.push(TimeSignature { onset, beats, beat_unit });
            }
            "N" => {
                if toks.len() != 6 {
                    return Err(err(1, format!("N line needs 5 fields, got {}", toks.len() - 1)));
                }
                let onset = parse_rational(toks[1].1, line, toks[1].0)?;
                let duration = parse_rational(toks[2].1, line, toks[2].0)?;
                if duration.is_zero() || duration.is_negative() {
                    return Err(err(toks[2].0, format!("non-positive duration {duration}")));
                }
                let step: Step = toks[3]
                    .1
                    .parse()
                    .map_err(|_| err(toks[3].0, format!("unknown step letter `{}`", toks[3].1)))?;
                let alter: i32 = toks[4]
                    .1
                    .parse()
                    .map_err(|_| err(toks[4].0, format!("bad alteration `{}`", toks[4].1)))?;
                let octave: i32 = toks[5]
                    .1
                    .parse()
                    .map_err(|_| err(toks[5].0, format!("bad octave `{}`", toks[5].1)))?;
                let pitch = SpelledPitch::new(step, alter, octave).map_err(|e| err(toks[3].0, e.to_string()))?;
                notes.push(Note { id: notes.len(), onset, duration, pitch });
            }
            other => {
                return Err(err(toks[0].0, format!("unknown record type `{other}`")));
            }
        }
    }
    Score::new(notes, sigs)
}

/// Serialize a score in the note-table format: T lines first, then N lines,
/// rationals in lowest terms.
pub fn serialize_note_table(score: &Score) -> String {
    let mut out = String::new();
    for t in &score.time_signatures {
        out.push_str(&format!("T {} {} {}\n", t.onset, t.beats, t.beat_unit));
    }
    for n in &score.notes {
        out.push_str(&format!(
            "N {} {} {} {} {}\n",
            n.onset, n.duration, n.pitch.step, n.pitch.alter, n.pitch.octave
        ));
    }
    out
}

/// Locate `t` in the bar structure induced by the score's time signatures.
/// Bars restart at every signature change.
pub fn metrical_position(
    score: &Score,
    t: RationalTime,
) -> Result<(usize, RationalTime, BeatStrength), ScoreError> {
    let sigs = &score.time_signatures;
    if sigs.is_empty() || t < sigs[0].onset {
        return Err(ScoreError::BeforeFirstTimeSignature(t));
    }
    // accumulate whole bars across signature regions
    let mut bar_index: i64 = 0;
    let mut region = sigs[0];
    for next in &sigs[1..] {
        if t < next.onset {
            break;
        }
        let region_len = next.onset - region.onset;
        let bars = region_len.div_floor(region.bar_length());
        let covered = region.bar_length() * bars;
        bar_index += bars;
        if covered < region_len {
            bar_index += 1; // partial bar before the change starts a new bar
        }
        region = *next;
    }
    let into_region = t - region.onset;
    let bars_here = into_region.div_floor(region.bar_length());
    bar_index += bars_here;
    let offset = into_region - region.bar_length() * bars_here;

    let beat_len = region.beat_length();
    let strength = if offset.is_zero() {
        BeatStrength::Downbeat
    } else {
        let beats_in = offset.div_floor(beat_len);
        if beat_len * beats_in == offset {
            // integer beat
            if region.beats % 2 == 0 && beats_in == (region.beats / 2) as i64 {
                BeatStrength::Strong
            } else {
                BeatStrength::Weak
            }
        } else {
            BeatStrength::Offbeat
        }
    };
    Ok((bar_index as usize, offset, strength))
}

/// Number of input feature columns: step(7) + alter(5) + octave(10) +
/// duration class(14) + beat strength(4).
pub const FEATURE_DIM: usize = 7 + 5 + 10 + 14 + 4;

const DURATION_VOCAB: [(i64, i64); 13] = [
    (2, 1),  // breve
    (1, 1),  // whole
    (1, 2),  // half
    (1, 4),  // quarter
    (1, 8),  // 8th
    (1, 16), // 16th
    (1, 32), // 32nd
    (1, 64), // 64th
    (3, 4),  // dotted half
    (3, 8),  // dotted quarter
    (3, 16), // dotted 8th
    (1, 6),  // triplet quarter
    (1, 12), // triplet 8th
];

fn duration_class(d: RationalTime) -> usize {
    for (i, (n, den)) in DURATION_VOCAB.iter().enumerate() {
        if d == RationalTime::new(*n, *den) {
            return i;
        }
    }
    13 // other
}

/// Note-wise feature matrix, one row per note, `FEATURE_DIM` columns of
/// concatenated one-hot blocks.
pub fn extract_features(score: &Score) -> Vec<Vec<f64>> {
    score
        .notes
        .iter()
        .map(|n| {
            let mut row = vec![0.0; FEATURE_DIM];
            row[n.pitch.step.index()] = 1.0;
            row[7 + (n.pitch.alter + 2) as usize] = 1.0;
            let oct = n.pitch.octave.min(9) as usize;
            row[7 + 5 + oct] = 1.0;
            row[7 + 5 + 10 + duration_class(n.duration)] = 1.0;
            let strength = metrical_position(score, n.onset)
                .map(|(_, _, s)| s)
                .unwrap_or(BeatStrength::Downbeat);
            row[7 + 5 + 10 + 14 + strength.index()] = 1.0;
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quarter(onset: RationalTime, step: Step, alter: i32, octave: i32) -> Note {
        Note {
            id: 0,
            onset,
            duration: RationalTime::new(1, 4),
            pitch: SpelledPitch::new(step, alter, octave).unwrap(),
        }
    }

    #[test]
    fn parses_single_note() {
        let score = parse_note_table("T 0/1 4 4\nN 0/1 1/4 C 0 4\n").unwrap();
        assert_eq!(score.notes.len(), 1);
        let n = &score.notes[0];
        assert_eq!(n.onset, RationalTime::zero());
        assert_eq!(n.duration, RationalTime::new(1, 4));
        assert_eq!(n.pitch.midi(), 60);
    }

    #[test]
    fn rejects_unknown_step() {
        let err = parse_note_table("N 0/1 1/4 H 0 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown step letter"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn rejects_zero_duration_and_zero_denominator() {
        assert!(parse_note_table("N 0/1 0/4 C 0 4\n").is_err());
        assert!(parse_note_table("N 0/0 1/4 C 0 4\n").is_err());
        assert!(parse_note_table("N 0/1 -1/4 C 0 4\n").is_err());
    }

    #[test]
    fn mixed_denominator_ordering() {
        // cross-multiplication oracle: a/b < c/d iff a*d < c*b (b,d > 0)
        let onsets = [(1i64, 3i64), (3, 8), (1, 8), (2, 3), (5, 8), (7, 24)];
        let mut text = String::from("T 0/1 4 4\n");
        for (n, d) in onsets {
            text.push_str(&format!("N {n}/{d} 1/8 C 0 4\n"));
        }
        let score = parse_note_table(&text).unwrap();
        for w in score.notes.windows(2) {
            let (a, b) = (w[0].onset, w[1].onset);
            assert!(a.numer() * b.denom() <= b.numer() * a.denom());
        }
        assert!(RationalTime::new(1, 3) < RationalTime::new(3, 8));
    }

    #[test]
    fn metrical_position_examples() {
        let s = parse_note_table("T 0/1 4 4\n").unwrap();
        let (bar, off, st) = metrical_position(&s, RationalTime::zero()).unwrap();
        assert_eq!((bar, off, st), (0, RationalTime::zero(), BeatStrength::Downbeat));
        let (bar, off, st) = metrical_position(&s, RationalTime::new(1, 2)).unwrap();
        assert_eq!((bar, off, st), (0, RationalTime::new(1, 2), BeatStrength::Strong));
        // beat 2 of 4/4 is weak, off-grid positions are offbeats
        assert_eq!(
            metrical_position(&s, RationalTime::new(1, 4)).unwrap().2,
            BeatStrength::Weak
        );
        assert_eq!(
            metrical_position(&s, RationalTime::new(1, 8)).unwrap().2,
            BeatStrength::Offbeat
        );
    }

    #[test]
    fn metrical_position_signature_change() {
        // 3/4 at 0 then 4/4 at 3/4; t = 7/4 begins bar 2.
        let s = parse_note_table("T 0/1 3 4\nT 3/4 4 4\n").unwrap();
        let (bar, off, st) = metrical_position(&s, RationalTime::new(7, 4)).unwrap();
        assert_eq!((bar, off, st), (2, RationalTime::zero(), BeatStrength::Downbeat));

        // step-by-step bar accumulator oracle over the same signatures
        let mut t = RationalTime::zero();
        let mut bars = 0usize;
        loop {
            let sig = if t < RationalTime::new(3, 4) {
                TimeSignature { onset: RationalTime::zero(), beats: 3, beat_unit: 4 }
            } else {
                TimeSignature { onset: RationalTime::new(3, 4), beats: 4, beat_unit: 4 }
            };
            let next = t + sig.bar_length();
            if next > RationalTime::new(7, 4) {
                break;
            }
            t = next;
            bars += 1;
        }
        assert_eq!(bars, bar);
    }

    #[test]
    fn no_strong_beat_in_triple_meter() {
        let s = parse_note_table("T 0/1 3 4\n").unwrap();
        for k in 1..3 {
            let st = metrical_position(&s, RationalTime::new(k, 4)).unwrap().2;
            assert_eq!(st, BeatStrength::Weak);
        }
    }

    #[test]
    fn before_first_signature_errors() {
        let mut s = parse_note_table("T 0/1 4 4\n").unwrap();
        s.time_signatures[0].onset = RationalTime::new(1, 4);
        assert!(metrical_position(&s, RationalTime::zero()).is_err());
    }

    #[test]
    fn default_time_signature_is_four_four() {
        let s = parse_note_table("N 0/1 1/4 C 0 4\n").unwrap();
        assert_eq!(s.time_signatures.len(), 1);
        assert_eq!((s.time_signatures[0].beats, s.time_signatures[0].beat_unit), (4, 4));
    }

    #[test]
    fn feature_one_hot_blocks() {
        let s = parse_note_table("T 0/1 4 4\nN 0/1 1/4 C 0 4\n").unwrap();
        let x = extract_features(&s);
        assert_eq!(x.len(), 1);
        assert_eq!(x[0].len(), FEATURE_DIM);
        assert_eq!(x[0][Step::C.index()], 1.0);
        assert_eq!(x[0][7 + 2], 1.0); // alter 0
        let blocks = [(0, 7), (7, 12), (12, 22), (22, 36), (36, 40)];
        for (lo, hi) in blocks {
            let sum: f64 = x[0][lo..hi].iter().sum();
            assert_eq!(sum, 1.0);
        }
    }

    #[test]
    fn features_ignore_bar_index() {
        // same pitch/duration/strength in different bars -> identical rows
        let s = parse_note_table("T 0/1 4 4\nN 0/1 1/4 C 0 4\nN 1/1 1/4 C 0 4\n").unwrap();
        let x = extract_features(&s);
        assert_eq!(x[0], x[1]);
    }

    /// Independent re-implementation of the encoding table, used as oracle.
    #[cfg(test)]
    fn oracle_encode(score: &Score, n: &Note) -> Vec<f64> {
        let mut row = vec![0.0; 40];
        let step_idx = match n.pitch.step {
            Step::C => 0,
            Step::D => 1,
            Step::E => 2,
            Step::F => 3,
            Step::G => 4,
            Step::A => 5,
            Step::B => 6,
        };
        row[step_idx] = 1.0;
        row[7 + (n.pitch.alter + 2) as usize] = 1.0;
        row[12 + n.pitch.octave.min(9) as usize] = 1.0;
        let table: Vec<RationalTime> = [
            (2, 1),
            (1, 1),
            (1, 2),
            (1, 4),
            (1, 8),
            (1, 16),
            (1, 32),
            (1, 64),
            (3, 4),
            (3, 8),
            (3, 16),
            (1, 6),
            (1, 12),
        ]
        .iter()
        .map(|&(a, b)| RationalTime::new(a, b))
        .collect();
        let dc = table.iter().position(|&d| d == n.duration).unwrap_or(13);
        row[22 + dc] = 1.0;
        let (_, _, s) = metrical_position(score, n.onset).unwrap();
        row[36 + s.index()] = 1.0;
        row
    }

    #[test]
    fn scale_matches_independent_encoder() {
        let steps = [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B, Step::C];
        let mut notes = Vec::new();
        for (i, st) in steps.iter().enumerate() {
            let oct = if i == 7 { 5 } else { 4 };
            notes.push(quarter(RationalTime::new(i as i64, 4), *st, 0, oct));
        }
        let score = Score::new(notes, vec![]).unwrap();
        let x = extract_features(&score);
        for (i, n) in score.notes.iter().enumerate() {
            assert_eq!(x[i], oracle_encode(&score, n));
        }
    }

    #[test]
    fn spelling_preserved_distinct() {
        let gs = SpelledPitch::new(Step::G, 1, 4).unwrap();
        let ab = SpelledPitch::new(Step::A, -1, 4).unwrap();
        assert_eq!(gs.midi(), ab.midi());
        assert_ne!(gs, ab);
    }

    proptest! {
        #[test]
        fn rational_arithmetic_exact(
            an in -50i64..50, ad in 1i64..40,
            bn in -50i64..50, bd in 1i64..40,
            cn in -50i64..50, cd in 1i64..40,
        ) {
            let a = RationalTime::new(an, ad);
            let b = RationalTime::new(bn, bd);
            let c = RationalTime::new(cn, cd);
            prop_assert_eq!((a + b) + c, a + (b + c));
            let cmp = a.cmp(&b);
            let oracle = (an as i128 * bd as i128).cmp(&(bn as i128 * ad as i128));
            prop_assert_eq!(cmp, oracle);
        }

        #[test]
        fn note_table_round_trip(
            seed_notes in proptest::collection::vec(
                (0i64..32, 1i64..9, 0usize..7, -2i32..3, 2i32..7),
                1..20,
            )
        ) {
            let notes: Vec<Note> = seed_notes
                .iter()
                .map(|&(on, dur, st, alter, oct)| Note {
                    id: 0,
                    onset: RationalTime::new(on, 8),
                    duration: RationalTime::new(dur, 8),
                    pitch: SpelledPitch::new(Step::ALL[st], alter, oct).unwrap(),
                })
                .collect();
            let score = Score::new(notes, vec![]).unwrap();
            let text = serialize_note_table(&score);
            let back = parse_note_table(&text).unwrap();
            prop_assert_eq!(score.notes, back.notes);
            prop_assert_eq!(score.time_signatures, back.time_signatures);
        }

        #[test]
        fn feature_rows_pure_in_note(perm in proptest::sample::select(vec![0usize,1,2,3])) {
            // permuting input order permutes but does not change rows
            let base = [
                (0i64, Step::C, 0, 4),
                (1, Step::E, -1, 4),
                (2, Step::G, 1, 3),
                (3, Step::B, 0, 5),
            ];
            let mut order: Vec<usize> = (0..4).collect();
            order.rotate_left(perm);
            let notes_a: Vec<Note> = base.iter().map(|&(k, s, a, o)| quarter(RationalTime::new(k, 4), s, a, o)).collect();
            let notes_b: Vec<Note> = order.iter().map(|&i| {
                let (k, s, a, o) = base[i];
                quarter(RationalTime::new(k, 4), s, a, o)
            }).collect();
            let sa = Score::new(notes_a, vec![]).unwrap();
            let sb = Score::new(notes_b, vec![]).unwrap();
            prop_assert_eq!(extract_features(&sa), extract_features(&sb));
        }
    }
}
