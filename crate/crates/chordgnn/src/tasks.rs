//! The 11-task Roman Numeral decomposition: vocabularies, annotation
//! timelines, label encoding, and reconstruction of conventional and
//! alternative Roman Numerals from per-task predictions.
//!
//! Vocabularies live in `vocab/*.txt` (one label per line, class index =
//! line number) so corrections don't touch logic; the conversion helpers
//! here are cross-checked against those files in tests.

use std::fmt;

use thiserror::Error;

use crate::score::RationalTime;

pub const N_TASKS: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    LocalKey,
    Tonicization,
    DegreePrimary,
    DegreeSecondary,
    Quality,
    Inversion,
    Root,
    RnRestricted,
    HarmonicRhythm,
    PcSet,
    Bass,
}

impl Task {
    pub const ALL: [Task; N_TASKS] = [
        Task::LocalKey,
        Task::Tonicization,
        Task::DegreePrimary,
        Task::DegreeSecondary,
        Task::Quality,
        Task::Inversion,
        Task::Root,
        Task::RnRestricted,
        Task::HarmonicRhythm,
        Task::PcSet,
        Task::Bass,
    ];

    pub fn index(self) -> usize {
        Task::ALL.iter().position(|&t| t == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::LocalKey => "localkey",
            Task::Tonicization => "tonicization",
            Task::DegreePrimary => "degree_primary",
            Task::DegreeSecondary => "degree_secondary",
            Task::Quality => "quality",
            Task::Inversion => "inversion",
            Task::Root => "root",
            Task::RnRestricted => "romannumeral_restricted",
            Task::HarmonicRhythm => "harmonic_rhythm",
            Task::PcSet => "pcset",
            Task::Bass => "bass",
        }
    }
}

const LOCALKEY_TXT: &str = include_str!("../vocab/localkey.txt");
const DEGREE_TXT: &str = include_str!("../vocab/degree.txt");
const DEGREE_SECONDARY_TXT: &str = include_str!("../vocab/degree_secondary.txt");
const QUALITY_TXT: &str = include_str!("../vocab/quality.txt");
const INVERSION_TXT: &str = include_str!("../vocab/inversion.txt");
const PITCHCLASS_TXT: &str = include_str!("../vocab/pitchclass.txt");
const RN_RESTRICTED_TXT: &str = include_str!("../vocab/rn_restricted.txt");
const HARMONIC_RHYTHM_TXT: &str = include_str!("../vocab/harmonic_rhythm.txt");
const PCSET_TXT: &str = include_str!("../vocab/pcset.txt");

fn vocab_lines(text: &'static str) -> Vec<&'static str> {
    text.lines().filter(|l| !l.is_empty()).collect()
}

#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub name: &'static str,
    pub vocab: Vec<&'static str>,
}

/// The full 11-task registry, in `Task::ALL` order.
pub fn task_registry() -> Vec<TaskSpec> {
    Task::ALL
        .iter()
        .map(|&t| {
            let vocab = match t {
                Task::LocalKey | Task::Tonicization => vocab_lines(LOCALKEY_TXT),
                Task::DegreePrimary => vocab_lines(DEGREE_TXT),
                Task::DegreeSecondary => vocab_lines(DEGREE_SECONDARY_TXT),
                Task::Quality => vocab_lines(QUALITY_TXT),
                Task::Inversion => vocab_lines(INVERSION_TXT),
                Task::Root | Task::Bass => vocab_lines(PITCHCLASS_TXT),
                Task::RnRestricted => vocab_lines(RN_RESTRICTED_TXT),
                Task::HarmonicRhythm => vocab_lines(HARMONIC_RHYTHM_TXT),
                Task::PcSet => vocab_lines(PCSET_TXT),
            };
            TaskSpec { name: t.name(), vocab }
        })
        .collect()
}

pub fn vocab_sizes() -> [usize; N_TASKS] {
    let reg = task_registry();
    let mut out = [0; N_TASKS];
    for (i, spec) in reg.iter().enumerate() {
        out[i] = spec.vocab.len();
    }
    out
}

#[derive(Error, Debug)]
pub enum TaskError {
    #[error("annotation parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("label outside vocabulary: {0}")]
    Vocab(String),
    #[error("onset {0} not covered by any annotation segment")]
    Uncovered(RationalTime),
    #[error("annotation segments overlap or are unsorted at onset {0}")]
    Overlap(RationalTime),
}

// ---------------------------------------------------------------------------
// Spelled pitch classes on the line of fifths.
// ---------------------------------------------------------------------------

const LOF_LETTERS: [char; 7] = ['F', 'C', 'G', 'D', 'A', 'E', 'B'];

/// Spell a line-of-fifths position, e.g. 6 -> "F#", -9 -> "Bbb".
pub fn fifths_to_name(f: i64) -> String {
    let step = (f + 1).rem_euclid(7) as usize;
    let alter = (f + 1).div_euclid(7);
    let mut s = String::new();
    s.push(LOF_LETTERS[step]);
    if alter >= 0 {
        for _ in 0..alter {
            s.push('#');
        }
    } else {
        for _ in 0..-alter {
            s.push('b');
        }
    }
    s
}

/// Parse a spelled pitch-class name (letter + '#'/'b' marks, any case for
/// the letter) to its line-of-fifths position.
pub fn name_to_fifths(name: &str) -> Result<i64, TaskError> {
    let mut chars = name.chars();
    let letter = chars
        .next()
        .ok_or_else(|| TaskError::Vocab("empty pitch name".into()))?;
    let step = LOF_LETTERS
        .iter()
        .position(|&c| c == letter.to_ascii_uppercase())
        .ok_or_else(|| TaskError::Vocab(format!("unknown step letter in {name:?}")))?;
    let mut alter = 0i64;
    for c in chars {
        match c {
            '#' => alter += 1,
            'b' => alter -= 1,
            _ => return Err(TaskError::Vocab(format!("bad accidental in {name:?}"))),
        }
    }
    Ok(step as i64 - 1 + 7 * alter)
}

/// Class index in the 35-entry spelled pitch-class vocabulary (LoF -15..19).
pub fn pitch_class_index(f: i64) -> Result<usize, TaskError> {
    if (-15..=19).contains(&f) {
        Ok((f + 15) as usize)
    } else {
        Err(TaskError::Vocab(format!(
            "pitch class {} outside spellable range",
            fifths_to_name(f)
        )))
    }
}

// ---------------------------------------------------------------------------
// Keys, degrees, qualities.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Major,
    Minor,
}

/// A spelled key: tonic on the line of fifths plus mode. The vocabulary
/// admits tonics within -9..9 fifths of C for each mode (38 keys).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Key {
    pub tonic_fifths: i64,
    pub mode: Mode,
}

impl Key {
    pub fn class_index(self) -> Result<usize, TaskError> {
        if !(-9..=9).contains(&self.tonic_fifths) {
            return Err(TaskError::Vocab(format!("key {self} outside vocabulary")));
        }
        let base = (self.tonic_fifths + 9) as usize;
        Ok(match self.mode {
            Mode::Major => base,
            Mode::Minor => 19 + base,
        })
    }

    pub fn from_class(class: usize) -> Key {
        assert!(class < 38, "key class out of range");
        let (mode, base) = if class < 19 {
            (Mode::Major, class)
        } else {
            (Mode::Minor, class - 19)
        };
        Key { tonic_fifths: base as i64 - 9, mode }
    }

    pub fn parse(text: &str) -> Result<Key, TaskError> {
        let first = text
            .chars()
            .next()
            .ok_or_else(|| TaskError::Vocab("empty key".into()))?;
        let mode = if first.is_ascii_uppercase() {
            Mode::Major
        } else {
            Mode::Minor
        };
        let tonic_fifths = name_to_fifths(text)?;
        Ok(Key { tonic_fifths, mode })
    }
}

impl fmt::Display for Key {
    /// Uppercase tonic letter for major, lowercase for minor: "Eb", "f#".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = fifths_to_name(self.tonic_fifths);
        match self.mode {
            Mode::Major => write!(f, "{name}"),
            Mode::Minor => {
                let mut c = name.chars();
                let head = c.next().unwrap().to_ascii_lowercase();
                write!(f, "{head}{}", c.as_str())
            }
        }
    }
}

/// A scale degree 1..7 with chromatic alteration -1 (flat), 0, or +1 (sharp).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Degree {
    pub step: u8,
    pub alter: i8,
}

impl Degree {
    pub fn new(step: u8, alter: i8) -> Degree {
        assert!((1..=7).contains(&step) && (-1..=1).contains(&alter));
        Degree { step, alter }
    }

    pub fn class_index(self) -> usize {
        let block = match self.alter {
            0 => 0,
            -1 => 1,
            1 => 2,
            _ => unreachable!(),
        };
        block * 7 + (self.step as usize - 1)
    }

    pub fn from_class(class: usize) -> Degree {
        assert!(class < 21, "degree class out of range");
        let alter = [0i8, -1, 1][class / 7];
        Degree { step: (class % 7) as u8 + 1, alter }
    }

    pub fn parse(text: &str) -> Result<Degree, TaskError> {
        let (alter, rest) = match text.chars().next() {
            Some('b') => (-1, &text[1..]),
            Some('#') => (1, &text[1..]),
            _ => (0, text),
        };
        let step: u8 = rest
            .parse()
            .map_err(|_| TaskError::Vocab(format!("bad degree {text:?}")))?;
        if !(1..=7).contains(&step) {
            return Err(TaskError::Vocab(format!("degree step {step} out of range")));
        }
        Ok(Degree { step, alter })
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alter {
            -1 => write!(f, "b{}", self.step),
            1 => write!(f, "#{}", self.step),
            _ => write!(f, "{}", self.step),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quality {
    Maj,
    Min,
    Dim,
    Aug,
    Maj7,
    Min7,
    Dom7,
    Dim7,
    HalfDim7,
}

impl Quality {
    pub const ALL: [Quality; 9] = [
        Quality::Maj,
        Quality::Min,
        Quality::Dim,
        Quality::Aug,
        Quality::Maj7,
        Quality::Min7,
        Quality::Dom7,
        Quality::Dim7,
        Quality::HalfDim7,
    ];

    pub fn class_index(self) -> usize {
        Quality::ALL.iter().position(|&q| q == self).unwrap()
    }

    pub fn symbol(self) -> &'static str {
        ["M", "m", "d", "a", "M7", "m7", "D7", "d7", "h7"][self.class_index()]
    }

    pub fn parse(text: &str) -> Result<Quality, TaskError> {
        Quality::ALL
            .iter()
            .copied()
            .find(|q| q.symbol() == text)
            .ok_or_else(|| TaskError::Vocab(format!("unknown quality {text:?}")))
    }

    pub fn chord_size(self) -> usize {
        self.fifth_offsets().len()
    }

    /// Chord members as line-of-fifths offsets from the root, in stacked
    /// thirds: root, third, fifth[, seventh].
    pub fn fifth_offsets(self) -> &'static [i64] {
        match self {
            Quality::Maj => &[0, 4, 1],
            Quality::Min => &[0, -3, 1],
            Quality::Dim => &[0, -3, -6],
            Quality::Aug => &[0, 4, 8],
            Quality::Maj7 => &[0, 4, 1, 5],
            Quality::Min7 => &[0, -3, 1, -2],
            Quality::Dom7 => &[0, 4, 1, -2],
            Quality::Dim7 => &[0, -3, -6, -9],
            Quality::HalfDim7 => &[0, -3, -6, -2],
        }
    }

    /// Chord members as semitone offsets from the root.
    pub fn semitones(self) -> &'static [u8] {
        match self {
            Quality::Maj => &[0, 4, 7],
            Quality::Min => &[0, 3, 7],
            Quality::Dim => &[0, 3, 6],
            Quality::Aug => &[0, 4, 8],
            Quality::Maj7 => &[0, 4, 7, 11],
            Quality::Min7 => &[0, 3, 7, 10],
            Quality::Dom7 => &[0, 4, 7, 10],
            Quality::Dim7 => &[0, 3, 6, 9],
            Quality::HalfDim7 => &[0, 3, 6, 10],
        }
    }
}

// ---------------------------------------------------------------------------
// Derivations.
// ---------------------------------------------------------------------------

/// Line-of-fifths offset of an unaltered scale degree from the tonic.
fn degree_step_fifths(mode: Mode, step: u8) -> i64 {
    let table = match mode {
        Mode::Major => [0, 2, 4, -1, 1, 3, 5],
        // natural minor
        Mode::Minor => [0, 2, -3, -1, 1, -4, -2],
    };
    table[step as usize - 1]
}

fn degree_fifths(mode: Mode, d: Degree) -> i64 {
    degree_step_fifths(mode, d.step) + 7 * d.alter as i64
}

/// The key a secondary degree tonicizes; the key itself when there is no
/// secondary degree. The mode of the tonicized key follows the diatonic
/// triad on that degree (major triad -> major key, otherwise minor);
/// altered degrees borrow: flattened -> major, sharpened -> minor.
pub fn tonicized_key(key: Key, secondary: Option<Degree>) -> Key {
    let Some(d) = secondary else { return key };
    let tonic_fifths = key.tonic_fifths + degree_fifths(key.mode, d);
    let mode = match d.alter {
        -1 => Mode::Major,
        1 => Mode::Minor,
        _ => {
            let major_steps: &[u8] = match key.mode {
                Mode::Major => &[1, 4, 5],
                Mode::Minor => &[3, 6, 7],
            };
            if major_steps.contains(&d.step) {
                Mode::Major
            } else {
                Mode::Minor
            }
        }
    };
    Key { tonic_fifths, mode }
}

/// Root of the chord: the scale step of `degree` in the key tonicized by
/// `secondary`, spelled on the line of fifths. The quality argument is
/// kept for signature completeness; the root does not depend on it.
pub fn derive_root(key: Key, degree: Degree, secondary: Option<Degree>, _quality: Quality) -> i64 {
    let local = tonicized_key(key, secondary);
    local.tonic_fifths + degree_fifths(local.mode, degree)
}

/// Bass of the chord: the chord member at position `inversion` above the
/// root (0 = root, 1 = third, 2 = fifth, 3 = seventh).
pub fn derive_bass(root_fifths: i64, quality: Quality, inversion: u8) -> i64 {
    let offsets = quality.fifth_offsets();
    assert!(
        (inversion as usize) < offsets.len(),
        "inversion {inversion} invalid for {}",
        quality.symbol()
    );
    root_fifths + offsets[inversion as usize]
}

/// The chord's pitch-class set, sorted ascending.
pub fn pcset_of(root_fifths: i64, quality: Quality) -> Vec<u8> {
    let root_pc = (7 * root_fifths).rem_euclid(12) as u8;
    let mut pcs: Vec<u8> = quality
        .semitones()
        .iter()
        .map(|&s| (root_pc + s) % 12)
        .collect();
    pcs.sort_unstable();
    pcs.dedup();
    pcs
}

fn pcset_vocab() -> Vec<Vec<u8>> {
    vocab_lines(PCSET_TXT)
        .iter()
        .map(|line| line.split(',').map(|s| s.parse().unwrap()).collect())
        .collect()
}

pub fn pcset_class(root_fifths: i64, quality: Quality) -> usize {
    let pcs = pcset_of(root_fifths, quality);
    pcset_vocab()
        .iter()
        .position(|v| *v == pcs)
        .expect("pcset vocabulary is closed under root x quality")
}

// ---------------------------------------------------------------------------
// Restricted Roman-Numeral vocabulary.
// ---------------------------------------------------------------------------

const ROMAN: [&str; 7] = ["i", "ii", "iii", "iv", "v", "vi", "vii"];

/// The exact restricted symbol for a (degree, quality) pair relative to the
/// tonicized key, if the pair is expressible: casing by quality family,
/// "o" for diminished chords, trailing "7" for sevenths. Altered degrees
/// and augmented triads fall outside the committed 31-symbol list.
pub fn restricted_symbol(degree: Degree, quality: Quality) -> String {
    let numeral = ROMAN[degree.step as usize - 1];
    let (cased, dim) = match quality {
        Quality::Maj | Quality::Aug | Quality::Maj7 | Quality::Dom7 => {
            (numeral.to_ascii_uppercase(), false)
        }
        Quality::Min | Quality::Min7 => (numeral.to_string(), false),
        Quality::Dim | Quality::Dim7 | Quality::HalfDim7 => (numeral.to_string(), true),
    };
    let seventh = quality.chord_size() == 4;
    let prefix = match degree.alter {
        -1 => "b",
        1 => "#",
        _ => "",
    };
    format!(
        "{prefix}{cased}{}{}",
        if dim { "o" } else { "" },
        if seventh { "7" } else { "" }
    )
}

/// Class index for the restricted-RN task. Labels whose exact symbol is
/// not in the vocabulary degrade: first the seventh is dropped, then the
/// degree alteration; as a last resort the tonic symbol of matching mode.
pub fn restricted_class(degree: Degree, quality: Quality) -> usize {
    let vocab = vocab_lines(RN_RESTRICTED_TXT);
    let lookup = |sym: &str| vocab.iter().position(|&v| v == sym);
    let exact = restricted_symbol(degree, quality);
    if let Some(i) = lookup(&exact) {
        return i;
    }
    let triad = match quality {
        Quality::Maj7 | Quality::Dom7 => Quality::Maj,
        Quality::Min7 => Quality::Min,
        Quality::Dim7 | Quality::HalfDim7 => Quality::Dim,
        q => q,
    };
    if let Some(i) = lookup(&restricted_symbol(degree, triad)) {
        return i;
    }
    let natural = Degree::new(degree.step, 0);
    if let Some(i) = lookup(&restricted_symbol(natural, triad)) {
        return i;
    }
    // any triad symbol on the same degree (first in vocabulary order)
    if let Some(i) = vocab.iter().position(|&sym| {
        matches!(restricted_decode(sym),
            Some((d, q)) if d.step == degree.step && q.chord_size() == 3)
    }) {
        return i;
    }
    let tonic = match quality {
        Quality::Min | Quality::Min7 | Quality::Dim | Quality::Dim7 | Quality::HalfDim7 => "i",
        _ => "I",
    };
    lookup(tonic).unwrap()
}

/// Decode a restricted symbol to its conventional (degree, quality) reading,
/// or None for the alternative-only augmented-sixth symbols (Ger, Fr, It).
pub fn restricted_decode(symbol: &str) -> Option<(Degree, Quality)> {
    if matches!(symbol, "Ger" | "Fr" | "It") {
        return None;
    }
    let (alter, rest) = match symbol.chars().next() {
        Some('b') => (-1i8, &symbol[1..]),
        Some('#') => (1, &symbol[1..]),
        _ => (0, symbol),
    };
    let seventh = rest.ends_with('7');
    let core = rest.trim_end_matches('7');
    let dim = core.ends_with('o');
    let numeral = core.trim_end_matches('o');
    let step = ROMAN
        .iter()
        .position(|&r| r == numeral.to_ascii_lowercase())? as u8
        + 1;
    let upper = numeral.chars().next()?.is_ascii_uppercase();
    let quality = match (upper, dim, seventh) {
        (_, true, false) => Quality::Dim,
        (_, true, true) => Quality::Dim7,
        (true, false, false) => Quality::Maj,
        // V7 is the dominant seventh; other uppercase sevenths are major 7ths
        (true, false, true) => {
            if step == 5 {
                Quality::Dom7
            } else {
                Quality::Maj7
            }
        }
        (false, false, false) => Quality::Min,
        (false, false, true) => Quality::Min7,
    };
    Some((Degree::new(step, alter), quality))
}

/// Fraction of timeline segments whose exact restricted symbol is in the
/// vocabulary: (covered, total).
pub fn restricted_coverage(timelines: &[LabelTimeline]) -> (usize, usize) {
    let vocab = vocab_lines(RN_RESTRICTED_TXT);
    let mut covered = 0;
    let mut total = 0;
    for tl in timelines {
        for seg in &tl.segments {
            total += 1;
            let sym = restricted_symbol(seg.label.degree, seg.label.quality);
            if vocab.contains(&sym.as_str()) {
                covered += 1;
            }
        }
    }
    (covered, total)
}

// ---------------------------------------------------------------------------
// Labels and timelines.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RnLabel {
    pub key: Key,
    pub degree: Degree,
    pub secondary: Option<Degree>,
    pub quality: Quality,
    pub inversion: u8,
}

impl RnLabel {
    pub fn root_fifths(&self) -> i64 {
        derive_root(self.key, self.degree, self.secondary, self.quality)
    }

    pub fn bass_fifths(&self) -> i64 {
        derive_bass(self.root_fifths(), self.quality, self.inversion)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub onset: RationalTime,
    pub duration: RationalTime,
    pub label: RnLabel,
}

impl Segment {
    /// Half-open containment: [onset, onset + duration).
    pub fn contains(&self, t: RationalTime) -> bool {
        self.onset <= t && t < self.onset + self.duration
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelTimeline {
    pub segments: Vec<Segment>,
}

impl LabelTimeline {
    /// Checks sortedness, positive durations, and non-overlap.
    pub fn validate(&self) -> Result<(), TaskError> {
        for seg in &self.segments {
            if seg.duration <= RationalTime::zero() {
                return Err(TaskError::Overlap(seg.onset));
            }
            if seg.inversion_invalid() {
                return Err(TaskError::Vocab(format!(
                    "inversion {} invalid for quality {}",
                    seg.label.inversion,
                    seg.label.quality.symbol()
                )));
            }
        }
        for w in self.segments.windows(2) {
            if w[0].onset + w[0].duration > w[1].onset {
                return Err(TaskError::Overlap(w[1].onset));
            }
        }
        Ok(())
    }

    pub fn segment_at(&self, t: RationalTime) -> Option<&Segment> {
        self.segments.iter().find(|s| s.contains(t))
    }

    pub fn end(&self) -> RationalTime {
        self.segments
            .last()
            .map(|s| s.onset + s.duration)
            .unwrap_or_else(RationalTime::zero)
    }
}

impl Segment {
    fn inversion_invalid(&self) -> bool {
        self.label.inversion as usize >= self.label.quality.chord_size()
    }
}

/// Parse an annotation timeline in TSV form:
/// `onset dur key degree1 degree2 quality inversion`, one segment per line,
/// whitespace-separated, degree2 `-` meaning none; `#`-prefixed comment
/// lines and blank lines are skipped.
pub fn parse_annotations(text: &str) -> Result<LabelTimeline, TaskError> {
    let mut segments = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(TaskError::Parse {
                line: line_no,
                msg: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let time = |s: &str| -> Result<RationalTime, TaskError> {
            let (n, d) = s.split_once('/').ok_or_else(|| TaskError::Parse {
                line: line_no,
                msg: format!("bad rational {s:?}"),
            })?;
            let n: i64 = n.parse().map_err(|_| TaskError::Parse {
                line: line_no,
                msg: format!("bad numerator {n:?}"),
            })?;
            let d: i64 = d.parse().map_err(|_| TaskError::Parse {
                line: line_no,
                msg: format!("bad denominator {d:?}"),
            })?;
            if d <= 0 {
                return Err(TaskError::Parse {
                    line: line_no,
                    msg: "non-positive denominator".into(),
                });
            }
            Ok(RationalTime::new(n, d))
        };
        let at_line = |e: TaskError| match e {
            TaskError::Parse { .. } => e,
            other => TaskError::Parse { line: line_no, msg: other.to_string() },
        };
        let onset = time(fields[0])?;
        let duration = time(fields[1])?;
        let key = Key::parse(fields[2]).map_err(at_line)?;
        let degree = Degree::parse(fields[3]).map_err(at_line)?;
        let secondary = if fields[4] == "-" {
            None
        } else {
            Some(Degree::parse(fields[4]).map_err(at_line)?)
        };
        let quality = Quality::parse(fields[5]).map_err(at_line)?;
        let inversion: u8 = fields[6].parse().map_err(|_| TaskError::Parse {
            line: line_no,
            msg: format!("bad inversion {:?}", fields[6]),
        })?;
        if inversion > 3 {
            return Err(TaskError::Parse {
                line: line_no,
                msg: format!("inversion {inversion} out of range"),
            });
        }
        segments.push(Segment {
            onset,
            duration,
            label: RnLabel { key, degree, secondary, quality, inversion },
        });
    }
    let tl = LabelTimeline { segments };
    tl.validate()?;
    Ok(tl)
}

pub fn serialize_annotations(tl: &LabelTimeline) -> String {
    let mut out = String::new();
    for seg in &tl.segments {
        let l = &seg.label;
        let secondary = match l.secondary {
            None => "-".to_string(),
            Some(d) => d.to_string(),
        };
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            seg.onset,
            seg.duration,
            l.key,
            l.degree,
            secondary,
            l.quality.symbol(),
            l.inversion
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Encoding and decoding.
// ---------------------------------------------------------------------------

/// Per-onset class indices: `classes[onset][task]` in `Task::ALL` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedLabels {
    pub classes: Vec<[usize; N_TASKS]>,
}

/// Encode ground-truth classes for every onset. Onsets must be sorted
/// ascending; each must fall inside a segment (half-open convention: an
/// onset exactly at a boundary takes the new segment's label).
pub fn encode_labels(
    timeline: &LabelTimeline,
    onsets: &[RationalTime],
) -> Result<EncodedLabels, TaskError> {
    timeline.validate()?;
    assert!(onsets.windows(2).all(|w| w[0] < w[1]), "onsets must be sorted and distinct");
    let mut classes = Vec::with_capacity(onsets.len());
    for &t in onsets {
        let seg = timeline
            .segment_at(t)
            .ok_or(TaskError::Uncovered(t))?;
        let l = &seg.label;
        let root = l.root_fifths();
        let bass = l.bass_fifths();
        let local = tonicized_key(l.key, l.secondary);
        // harmonic rhythm: onsets since this segment began, capped at 6
        let since = onsets
            .iter()
            .filter(|&&o| seg.onset <= o && o < t)
            .count()
            .min(6);
        let mut row = [0usize; N_TASKS];
        row[Task::LocalKey.index()] = l.key.class_index()?;
        row[Task::Tonicization.index()] = local.class_index()?;
        row[Task::DegreePrimary.index()] = l.degree.class_index();
        row[Task::DegreeSecondary.index()] = match l.secondary {
            None => 0,
            Some(d) => 1 + d.class_index(),
        };
        row[Task::Quality.index()] = l.quality.class_index();
        row[Task::Inversion.index()] = l.inversion as usize;
        row[Task::Root.index()] = pitch_class_index(root)?;
        row[Task::RnRestricted.index()] = restricted_class(l.degree, l.quality);
        row[Task::HarmonicRhythm.index()] = since;
        row[Task::PcSet.index()] = pcset_class(root, l.quality);
        row[Task::Bass.index()] = pitch_class_index(bass)?;
        classes.push(row);
    }
    Ok(EncodedLabels { classes })
}

/// Assemble the conventional Roman Numeral from the five component heads;
/// root and bass are recomputed from the result, not read from their tasks.
pub fn decode_conventional_rn(classes: &[usize; N_TASKS]) -> RnLabel {
    let key = Key::from_class(classes[Task::LocalKey.index()]);
    let degree = Degree::from_class(classes[Task::DegreePrimary.index()]);
    let secondary = match classes[Task::DegreeSecondary.index()] {
        0 => None,
        c => Some(Degree::from_class(c - 1)),
    };
    let quality = Quality::ALL[classes[Task::Quality.index()]];
    let inversion = classes[Task::Inversion.index()] as u8;
    RnLabel { key, degree, secondary, quality, inversion }
}

/// The alternative Roman Numeral: key + restricted symbol + inversion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AltRn {
    pub key: Key,
    pub symbol: &'static str,
    pub inversion: u8,
    /// Conventional (degree, quality) reading, None for symbols that exist
    /// only in the restricted vocabulary (augmented sixths).
    pub conventional: Option<(Degree, Quality)>,
}

pub fn decode_alternative_rn(classes: &[usize; N_TASKS]) -> AltRn {
    let key = Key::from_class(classes[Task::LocalKey.index()]);
    let symbol = vocab_lines(RN_RESTRICTED_TXT)[classes[Task::RnRestricted.index()]];
    let inversion = classes[Task::Inversion.index()] as u8;
    AltRn { key, symbol, inversion, conventional: restricted_decode(symbol) }
}
