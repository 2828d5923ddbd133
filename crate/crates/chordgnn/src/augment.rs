//! Transposition augmentation of (Score, LabelTimeline) pairs, training
//! split only. Intervals are line-of-fifths step counts, so pitch spelling
//! transposes deterministically.

use thiserror::Error;

use crate::score::{Note, Score, ScoreError, SpelledPitch, Step};
use crate::tasks::{Key, LabelTimeline, Mode};

#[derive(Error, Debug)]
pub enum AugmentError {
    #[error("transposition by {interval} fifths leaves the legal range: {what}")]
    OutOfRange { interval: i64, what: String },
    #[error("augmentation requested on a non-training corpus")]
    NotTrainingSplit,
}

/// Key signature in sharps (negative = flats): the tonic's line-of-fifths
/// position for major, shifted to the relative major for minor.
pub fn key_signature(key: Key) -> i64 {
    match key.mode {
        Mode::Major => key.tonic_fifths,
        Mode::Minor => key.tonic_fifths - 3,
    }
}

/// Semitone shift realizing `interval` fifths: the canonical pitch-class
/// shift, taken upward for positive intervals and downward for negative
/// ones so that transposing by -i exactly undoes transposing by i.
fn semitone_shift(interval: i64) -> i64 {
    let up = (7 * interval).rem_euclid(12);
    if interval >= 0 {
        up
    } else {
        up - 12
    }
}

fn step_from_letter_fifths(f: i64) -> Step {
    *Step::ALL
        .iter()
        .find(|s| s.fifths() as i64 == f)
        .expect("letter fifths in -1..5")
}

fn transpose_pitch(p: SpelledPitch, interval: i64) -> Result<SpelledPitch, ScoreError> {
    let fifths = p.fifths() as i64 + interval;
    let letter = (fifths + 1).rem_euclid(7) - 1;
    let alter = (fifths + 1).div_euclid(7);
    let step = step_from_letter_fifths(letter);
    let target_midi = p.midi() as i64 + semitone_shift(interval);
    // midi = 12(octave+1) + base + alter; solve for the octave
    let base = step.base_semitones() as i64;
    let octave = (target_midi - base - alter) / 12 - 1;
    SpelledPitch::new(step, alter as i32, octave as i32)
}

/// Transpose a score and its annotations by a spelled interval given as a
/// line-of-fifths step count. Degrees, qualities, inversions, and the
/// harmonic rhythm are untouched; keys (and thus every derived root, bass,
/// and pitch-class set) shift by the interval. Errors when a resulting key
/// signature leaves [-7, +7] or a pitch alteration leaves [-2, 2].
pub fn transpose(
    score: &Score,
    timeline: &LabelTimeline,
    interval: i64,
) -> Result<(Score, LabelTimeline), AugmentError> {
    let mut out_tl = timeline.clone();
    for seg in &mut out_tl.segments {
        let key = Key {
            tonic_fifths: seg.label.key.tonic_fifths + interval,
            mode: seg.label.key.mode,
        };
        let sig = key_signature(key);
        if !(-7..=7).contains(&sig) {
            return Err(AugmentError::OutOfRange {
                interval,
                what: format!("key {key} has signature {sig}"),
            });
        }
        seg.label.key = key;
    }
    let notes = score
        .notes
        .iter()
        .map(|n| {
            let pitch = transpose_pitch(n.pitch, interval).map_err(|e| {
                AugmentError::OutOfRange { interval, what: e.to_string() }
            })?;
            Ok(Note { pitch, ..*n })
        })
        .collect::<Result<Vec<_>, AugmentError>>()?;
    let transposed = Score::new(notes, score.time_signatures.clone())
        .expect("transposition preserves score validity");
    Ok((transposed, out_tl))
}

/// All legal transposition intervals for a piece: exactly the line-of-fifths
/// steps keeping every annotated key's signature within [-7, +7] (and every
/// pitch spellable). Always includes the unison.
pub fn enumerate_transpositions(score: &Score, timeline: &LabelTimeline) -> Vec<i64> {
    (-19..=19)
        .filter(|&i| transpose(score, timeline, i).is_ok())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusRole {
    Train,
    Eval,
}

/// Expand a corpus with every legal transposition of every piece. Only the
/// training split may be augmented; evaluation corpora reject the request.
pub fn augment_corpus(
    pieces: &[(Score, LabelTimeline)],
    role: CorpusRole,
) -> Result<Vec<(Score, LabelTimeline)>, AugmentError> {
    if role != CorpusRole::Train {
        return Err(AugmentError::NotTrainingSplit);
    }
    let mut out = Vec::new();
    for (score, tl) in pieces {
        for i in enumerate_transpositions(score, tl) {
            out.push(transpose(score, tl, i)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::parse_note_table;
    use crate::tasks::{derive_root, parse_annotations};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (Score, LabelTimeline) {
        let score = parse_note_table(
            "N 0/1 1/4 C 0 4\nN 0/1 1/4 E 0 4\nN 0/1 1/4 G 0 4\nN 1/4 1/4 B -1 3\nN 1/2 1/2 F 1 4\n",
        )
        .unwrap();
        let tl = parse_annotations("0/1 1/2 C 1 - M 0\n1/2 1/2 C 5 5 D7 1\n").unwrap();
        (score, tl)
    }

    #[test]
    fn unison_is_identity() {
        let (score, tl) = fixture();
        let (s2, tl2) = transpose(&score, &tl, 0).unwrap();
        assert_eq!(s2, score);
        assert_eq!(tl2, tl);
    }

    #[test]
    fn major_second_up_rekeys_to_d_and_keeps_other_fields() {
        let (score, tl) = fixture();
        let (s2, tl2) = transpose(&score, &tl, 2).unwrap();
        for (a, b) in tl.segments.iter().zip(&tl2.segments) {
            assert_eq!(tl2.segments[0].label.key.to_string(), "D");
            assert_eq!(a.label.degree, b.label.degree);
            assert_eq!(a.label.secondary, b.label.secondary);
            assert_eq!(a.label.quality, b.label.quality);
            assert_eq!(a.label.inversion, b.label.inversion);
            assert_eq!(a.onset, b.onset);
            assert_eq!(a.duration, b.duration);
        }
        // C4 E4 G4 up a major second -> D4 F#4 A4
        assert_eq!(s2.notes[0].pitch.midi(), score.notes[0].pitch.midi() + 2);
        assert_eq!(s2.notes[0].pitch.fifths(), 2);
        assert_eq!(s2.notes[1].pitch.fifths(), 6); // F#
    }

    #[test]
    fn round_trip_and_midi_differences_random_sweep() {
        let (score, tl) = fixture();
        let legal = enumerate_transpositions(&score, &tl);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let i = legal[rng.gen_range(0..legal.len())];
            let (s2, tl2) = transpose(&score, &tl, i).unwrap();
            // round trip is exact
            let (s3, tl3) = transpose(&s2, &tl2, -i).unwrap();
            assert_eq!(s3, score, "interval {i}");
            assert_eq!(tl3, tl);
            // MIDI differences between any two notes are preserved
            for a in 0..score.notes.len() {
                for b in 0..score.notes.len() {
                    assert_eq!(
                        s2.notes[a].pitch.midi() - s2.notes[b].pitch.midi(),
                        score.notes[a].pitch.midi() - score.notes[b].pitch.midi()
                    );
                }
            }
            // root derivation commutes with transposition
            for (sa, sb) in tl.segments.iter().zip(&tl2.segments) {
                let orig = derive_root(sa.label.key, sa.label.degree, sa.label.secondary, sa.label.quality);
                let moved = derive_root(sb.label.key, sb.label.degree, sb.label.secondary, sb.label.quality);
                assert_eq!(moved, orig + i, "interval {i}");
            }
        }
    }

    #[test]
    fn c_major_has_fifteen_targets() {
        let score = parse_note_table("N 0/1 1/1 C 0 4\n").unwrap();
        let tl = parse_annotations("0/1 1/1 C 1 - M 0\n").unwrap();
        let legal = enumerate_transpositions(&score, &tl);
        assert_eq!(legal, (-7..=7).collect::<Vec<i64>>());
        assert!(legal.contains(&0));
    }

    #[test]
    fn modulating_piece_intersects_legal_sets() {
        // piece annotated in C major and E major (+4): legal shifts must
        // keep both in range -> intersection of -7..7 and -11..3
        let score = parse_note_table("N 0/1 1/1 C 0 4\nN 1/1 1/1 E 0 4\n").unwrap();
        let tl = parse_annotations("0/1 1/1 C 1 - M 0\n1/1 1/1 E 1 - M 0\n").unwrap();
        let legal = enumerate_transpositions(&score, &tl);
        // brute-force validity predicate over all intervals
        let brute: Vec<i64> = (-19..=19)
            .filter(|&i| {
                tl.segments.iter().all(|s| {
                    let sig = key_signature(Key {
                        tonic_fifths: s.label.key.tonic_fifths + i,
                        mode: s.label.key.mode,
                    });
                    (-7..=7).contains(&sig)
                }) && score
                    .notes
                    .iter()
                    .all(|n| transpose_pitch(n.pitch, i).is_ok())
            })
            .collect();
        assert_eq!(legal, brute);
        assert_eq!(legal, (-7..=3).collect::<Vec<i64>>());
    }

    #[test]
    fn signature_bound_is_enforced() {
        let (score, tl) = fixture();
        let err = transpose(&score, &tl, 8).unwrap_err();
        assert!(matches!(err, AugmentError::OutOfRange { interval: 8, .. }));
    }

    #[test]
    fn eval_corpora_reject_augmentation() {
        let (score, tl) = fixture();
        let pieces = vec![(score, tl)];
        assert!(matches!(
            augment_corpus(&pieces, CorpusRole::Eval),
            Err(AugmentError::NotTrainingSplit)
        ));
        let augmented = augment_corpus(&pieces, CorpusRole::Train).unwrap();
        assert_eq!(augmented.len(), enumerate_transpositions(&pieces[0].0, &pieces[0].1).len());
    }

    #[test]
    fn minor_key_signatures() {
        assert_eq!(key_signature(Key::parse("a").unwrap()), 0);
        assert_eq!(key_signature(Key::parse("e").unwrap()), 1);
        assert_eq!(key_signature(Key::parse("d").unwrap()), -1);
        assert_eq!(key_signature(Key::parse("C").unwrap()), 0);
        assert_eq!(key_signature(Key::parse("B").unwrap()), 5);
    }
}
