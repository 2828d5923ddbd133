//! Chord Symbol Recall at 32nd-note granularity and onset-wise accuracy,
//! per task and for both Roman Numeral formulations.

use thiserror::Error;

use crate::score::RationalTime;
use crate::tasks::{
    pcset_class, pitch_class_index, restricted_class, tonicized_key, LabelTimeline, RnLabel, Task,
    TaskError, N_TASKS,
};

/// Per-onset model predictions over time: one segment per distinct onset,
/// carrying the argmax class of every task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisSegment {
    pub onset: RationalTime,
    pub duration: RationalTime,
    pub classes: [usize; N_TASKS],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnalysisTimeline {
    pub segments: Vec<AnalysisSegment>,
}

impl AnalysisTimeline {
    pub fn end(&self) -> RationalTime {
        self.segments
            .last()
            .map(|s| s.onset + s.duration)
            .unwrap_or_else(RationalTime::zero)
    }

    /// Sorted, positive durations, gap-free over [first onset, end).
    pub fn validate(&self) -> Result<(), EvalError> {
        for s in &self.segments {
            if s.duration <= RationalTime::zero() {
                return Err(EvalError::BadTimeline(s.onset));
            }
        }
        for w in self.segments.windows(2) {
            if w[0].onset + w[0].duration != w[1].onset {
                return Err(EvalError::BadTimeline(w[1].onset));
            }
        }
        Ok(())
    }

    pub fn classes_at(&self, t: RationalTime) -> Option<&[usize; N_TASKS]> {
        self.segments
            .iter()
            .find(|s| s.onset <= t && t < s.onset + s.duration)
            .map(|s| &s.classes)
    }
}

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("prediction and truth spans differ: {0} vs {1}")]
    SpanMismatch(RationalTime, RationalTime),
    #[error("empty evaluation span")]
    EmptySpan,
    #[error("timeline invalid at {0}")]
    BadTimeline(RationalTime),
    #[error("sample at {0} not covered")]
    Uncovered(RationalTime),
    #[error(transparent)]
    Label(#[from] TaskError),
}

/// What to compare at each time sample. `Degree` compares primary and
/// secondary degree jointly; the RN selectors compare all their
/// constituent component tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalField {
    Key,
    Degree,
    Quality,
    Inversion,
    Root,
    Tonicization,
    PcSet,
    Bass,
    /// key + primary degree + secondary degree + quality + inversion
    RnConventional,
    /// key + restricted symbol + inversion
    RnAlternative,
}

impl EvalField {
    fn tasks(self) -> &'static [Task] {
        match self {
            EvalField::Key => &[Task::LocalKey],
            EvalField::Degree => &[Task::DegreePrimary, Task::DegreeSecondary],
            EvalField::Quality => &[Task::Quality],
            EvalField::Inversion => &[Task::Inversion],
            EvalField::Root => &[Task::Root],
            EvalField::Tonicization => &[Task::Tonicization],
            EvalField::PcSet => &[Task::PcSet],
            EvalField::Bass => &[Task::Bass],
            EvalField::RnConventional => &[
                Task::LocalKey,
                Task::DegreePrimary,
                Task::DegreeSecondary,
                Task::Quality,
                Task::Inversion,
            ],
            EvalField::RnAlternative => &[Task::LocalKey, Task::RnRestricted, Task::Inversion],
        }
    }
}

/// Ground-truth class row for one label. The harmonic-rhythm slot is not
/// derivable from a label alone and is never compared through this path.
pub fn truth_classes(label: &RnLabel) -> Result<[usize; N_TASKS], TaskError> {
    let mut row = [0usize; N_TASKS];
    row[Task::LocalKey.index()] = label.key.class_index()?;
    row[Task::Tonicization.index()] = tonicized_key(label.key, label.secondary).class_index()?;
    row[Task::DegreePrimary.index()] = label.degree.class_index();
    row[Task::DegreeSecondary.index()] = match label.secondary {
        None => 0,
        Some(d) => 1 + d.class_index(),
    };
    row[Task::Quality.index()] = label.quality.class_index();
    row[Task::Inversion.index()] = label.inversion as usize;
    row[Task::Root.index()] = pitch_class_index(label.root_fifths())?;
    row[Task::RnRestricted.index()] = restricted_class(label.degree, label.quality);
    row[Task::PcSet.index()] = pcset_class(label.root_fifths(), label.quality);
    row[Task::Bass.index()] = pitch_class_index(label.bass_fifths())?;
    Ok(row)
}

/// View a label timeline as an analysis timeline (used when a prediction
/// is re-read from its serialized annotation form, and for truth-vs-truth
/// sanity checks).
pub fn timeline_from_labels(tl: &LabelTimeline) -> Result<AnalysisTimeline, TaskError> {
    let segments = tl
        .segments
        .iter()
        .map(|s| {
            Ok(AnalysisSegment {
                onset: s.onset,
                duration: s.duration,
                classes: truth_classes(&s.label)?,
            })
        })
        .collect::<Result<Vec<_>, TaskError>>()?;
    Ok(AnalysisTimeline { segments })
}

fn matches_at(
    pred: &AnalysisTimeline,
    truth: &LabelTimeline,
    field: EvalField,
    t: RationalTime,
) -> Result<bool, EvalError> {
    let p = pred.classes_at(t).ok_or(EvalError::Uncovered(t))?;
    let seg = truth.segment_at(t).ok_or(EvalError::Uncovered(t))?;
    let truth_row = truth_classes(&seg.label)?;
    Ok(field
        .tasks()
        .iter()
        .all(|task| p[task.index()] == truth_row[task.index()]))
}

/// Chord Symbol Recall: sample both timelines at t = 0, grid, 2·grid, …
/// strictly below the span end; CSR = matching samples / samples. Samples
/// on a boundary take the newer segment (half-open convention).
pub fn csr(
    pred: &AnalysisTimeline,
    truth: &LabelTimeline,
    field: EvalField,
    grid: RationalTime,
) -> Result<f64, EvalError> {
    pred.validate()?;
    truth.validate().map_err(EvalError::Label)?;
    assert!(grid > RationalTime::zero(), "grid must be positive");
    let end = pred.end();
    if end != truth.end() {
        return Err(EvalError::SpanMismatch(end, truth.end()));
    }
    if end <= RationalTime::zero() {
        return Err(EvalError::EmptySpan);
    }
    let mut t = RationalTime::zero();
    let mut samples = 0u64;
    let mut hits = 0u64;
    while t < end {
        samples += 1;
        if matches_at(pred, truth, field, t)? {
            hits += 1;
        }
        t = t + grid;
    }
    Ok(hits as f64 / samples as f64)
}

/// The 32nd-note CSR sampling grid (in whole-note units).
pub fn default_grid() -> RationalTime {
    RationalTime::new(1, 32)
}

/// Onset-wise accuracy: compare only at the prediction's segment onsets
/// (one per distinct score onset).
pub fn onset_accuracy(
    pred: &AnalysisTimeline,
    truth: &LabelTimeline,
    field: EvalField,
) -> Result<f64, EvalError> {
    if pred.segments.is_empty() {
        return Err(EvalError::EmptySpan);
    }
    let mut hits = 0u64;
    for seg in &pred.segments {
        if matches_at(pred, truth, field, seg.onset)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / pred.segments.len() as f64)
}

/// One row of the evaluation table, fractions in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieceReport {
    pub key: f64,
    pub degree: f64,
    pub quality: f64,
    pub inversion: f64,
    pub root: f64,
    pub rn: f64,
    pub rn_onset: f64,
    pub rn_alt: f64,
}

impl PieceReport {
    pub const COLUMNS: [&'static str; 8] = [
        "Key",
        "Degree",
        "Quality",
        "Inversion",
        "Root",
        "RN",
        "RN(Onset)",
        "RN_alt",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.key,
            self.degree,
            self.quality,
            self.inversion,
            self.root,
            self.rn,
            self.rn_onset,
            self.rn_alt,
        ]
    }
}

pub fn report(
    pred: &AnalysisTimeline,
    truth: &LabelTimeline,
    grid: RationalTime,
) -> Result<PieceReport, EvalError> {
    Ok(PieceReport {
        key: csr(pred, truth, EvalField::Key, grid)?,
        degree: csr(pred, truth, EvalField::Degree, grid)?,
        quality: csr(pred, truth, EvalField::Quality, grid)?,
        inversion: csr(pred, truth, EvalField::Inversion, grid)?,
        root: csr(pred, truth, EvalField::Root, grid)?,
        rn: csr(pred, truth, EvalField::RnConventional, grid)?,
        rn_onset: onset_accuracy(pred, truth, EvalField::RnConventional)?,
        rn_alt: csr(pred, truth, EvalField::RnAlternative, grid)?,
    })
}

/// Corpus aggregate: unweighted per-piece mean.
pub fn corpus_mean(reports: &[PieceReport]) -> PieceReport {
    assert!(!reports.is_empty(), "empty corpus");
    let n = reports.len() as f64;
    let mut acc = [0.0f64; 8];
    for r in reports {
        for (a, v) in acc.iter_mut().zip(r.values()) {
            *a += v;
        }
    }
    PieceReport {
        key: acc[0] / n,
        degree: acc[1] / n,
        quality: acc[2] / n,
        inversion: acc[3] / n,
        root: acc[4] / n,
        rn: acc[5] / n,
        rn_onset: acc[6] / n,
        rn_alt: acc[7] / n,
    }
}

/// Render per-piece rows plus the corpus mean, as an aligned table.
pub fn render_report(rows: &[(String, PieceReport)], mean: &PieceReport) -> String {
    let mut out = String::new();
    let name_w = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(["corpus mean".len()])
        .max()
        .unwrap_or(5)
        .max(5);
    out.push_str(&format!("{:name_w$}", "Piece"));
    for c in PieceReport::COLUMNS {
        out.push_str(&format!(" {c:>9}"));
    }
    out.push('\n');
    let mut line = |name: &str, r: &PieceReport| {
        out.push_str(&format!("{name:name_w$}"));
        for v in r.values() {
            out.push_str(&format!(" {:>9.1}", v * 100.0));
        }
        out.push('\n');
    };
    for (name, r) in rows {
        line(name, r);
    }
    line("corpus mean", mean);
    out
}

/// Same content as TSV (fractions as percentages, one row per piece).
pub fn report_tsv(rows: &[(String, PieceReport)], mean: &PieceReport) -> String {
    let mut out = String::from("piece");
    for c in PieceReport::COLUMNS {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for (name, r) in rows.iter().map(|(n, r)| (n.as_str(), r)).chain([("corpus mean", mean)]) {
        out.push_str(name);
        for v in r.values() {
            out.push_str(&format!("\t{:.4}", v * 100.0));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::parse_annotations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(n: i64, d: i64) -> RationalTime {
        RationalTime::new(n, d)
    }

    fn truth_fixture() -> LabelTimeline {
        parse_annotations("0/1 1/1 C 1 - M 0\n1/1 1/2 C 5 - D7 1\n3/2 1/2 C 1 - M 0\n").unwrap()
    }

    #[test]
    fn perfect_prediction_scores_one_everywhere() {
        let truth = truth_fixture();
        let pred = timeline_from_labels(&truth).unwrap();
        let r = report(&pred, &truth, default_grid()).unwrap();
        for v in r.values() {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn constant_prediction_on_half_span_scores_half() {
        // 2-whole-note piece, first whole note correct, second wrong
        let truth = parse_annotations("0/1 1/1 C 1 - M 0\n1/1 1/1 C 5 - M 0\n").unwrap();
        let constant = parse_annotations("0/1 2/1 C 1 - M 0\n").unwrap();
        let pred = timeline_from_labels(&constant).unwrap();
        let v = csr(&pred, &truth, EvalField::RnConventional, default_grid()).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn csr_matches_brute_force_grid_walk_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            // random contiguous truth and prediction over the same span,
            // boundaries deliberately off the 1/32 grid (thirds, fifths)
            let span = t(rng.gen_range(2..5), 1);
            let rand_tl = |rng: &mut ChaCha8Rng| {
                let mut segs = Vec::new();
                let mut at = t(0, 1);
                while at < span {
                    let denom = [3i64, 5, 7, 4][rng.gen_range(0..4)];
                    let mut dur = t(rng.gen_range(1..6), denom);
                    if at + dur > span {
                        dur = span - at;
                    }
                    let degree = rng.gen_range(1..8);
                    segs.push(format!("{} {} C {} - M 0", at, dur, degree));
                    at = at + dur;
                }
                parse_annotations(&(segs.join("\n") + "\n")).unwrap()
            };
            let truth = rand_tl(&mut rng);
            let pred_labels = rand_tl(&mut rng);
            let pred = timeline_from_labels(&pred_labels).unwrap();
            let got = csr(&pred, &truth, EvalField::Degree, default_grid()).unwrap();
            // oracle: walk every multiple of 1/32 independently
            let mut hits = 0usize;
            let mut n = 0usize;
            let mut k = 0i64;
            loop {
                let at = t(k, 32);
                if at >= span {
                    break;
                }
                n += 1;
                let a = pred_labels.segment_at(at).unwrap().label;
                let b = truth.segment_at(at).unwrap().label;
                if a.degree == b.degree && a.secondary == b.secondary {
                    hits += 1;
                }
                k += 1;
            }
            assert_eq!(got, hits as f64 / n as f64);
        }
    }

    #[test]
    fn csr_invariant_under_resegmentation() {
        let truth = truth_fixture();
        let pred = timeline_from_labels(&truth).unwrap();
        // split the first prediction segment in two; label function unchanged
        let mut split = pred.clone();
        let first = split.segments[0].clone();
        split.segments[0] = AnalysisSegment { duration: t(1, 2), ..first.clone() };
        split.segments.insert(
            1,
            AnalysisSegment { onset: t(1, 2), duration: t(1, 2), ..first },
        );
        for field in [EvalField::Key, EvalField::RnConventional, EvalField::Root] {
            assert_eq!(
                csr(&pred, &truth, field, default_grid()).unwrap(),
                csr(&split, &truth, field, default_grid()).unwrap()
            );
        }
    }

    #[test]
    fn grid_refinement_exact_when_boundaries_on_grid() {
        let truth = truth_fixture();
        let constant = parse_annotations("0/1 2/1 C 1 - M 0\n").unwrap();
        let pred = timeline_from_labels(&constant).unwrap();
        let coarse = csr(&pred, &truth, EvalField::RnConventional, t(1, 32)).unwrap();
        let fine = csr(&pred, &truth, EvalField::RnConventional, t(1, 64)).unwrap();
        assert_eq!(coarse, fine);
    }

    #[test]
    fn onset_accuracy_counts_onsets_not_time() {
        // short wrong segment on a long note: CSR and onset accuracy diverge
        let truth = parse_annotations("0/1 7/4 C 1 - M 0\n7/4 1/4 C 5 - M 0\n").unwrap();
        // prediction has 4 onset segments; wrong only on the last (short) one
        let pred_labels = parse_annotations(
            "0/1 1/2 C 1 - M 0\n1/2 1/2 C 1 - M 0\n1/1 3/4 C 1 - M 0\n7/4 1/4 C 2 - m 0\n",
        )
        .unwrap();
        let pred = timeline_from_labels(&pred_labels).unwrap();
        let oa = onset_accuracy(&pred, &truth, EvalField::RnConventional).unwrap();
        assert_eq!(oa, 0.75);
        let c = csr(&pred, &truth, EvalField::RnConventional, default_grid()).unwrap();
        // wrong on 1/4 whole note of a 2-whole-note span by time
        assert_eq!(c, 1.0 - (1.0 / 4.0) / 2.0);
        assert!(oa < c);
    }

    #[test]
    fn span_mismatch_and_empty_span_are_errors() {
        let truth = truth_fixture();
        let short = parse_annotations("0/1 1/1 C 1 - M 0\n").unwrap();
        let pred = timeline_from_labels(&short).unwrap();
        assert!(matches!(
            csr(&pred, &truth, EvalField::Key, default_grid()),
            Err(EvalError::SpanMismatch(..))
        ));
        let empty = AnalysisTimeline::default();
        assert!(matches!(
            csr(&empty, &LabelTimeline::default(), EvalField::Key, default_grid()),
            Err(EvalError::EmptySpan)
        ));
    }

    #[test]
    fn corpus_mean_is_unweighted() {
        let a = PieceReport {
            key: 1.0,
            degree: 1.0,
            quality: 1.0,
            inversion: 1.0,
            root: 1.0,
            rn: 1.0,
            rn_onset: 1.0,
            rn_alt: 1.0,
        };
        let b = PieceReport {
            key: 0.0,
            degree: 0.5,
            quality: 0.0,
            inversion: 0.0,
            root: 0.0,
            rn: 0.0,
            rn_onset: 0.0,
            rn_alt: 0.0,
        };
        let m = corpus_mean(&[a, b]);
        assert_eq!(m.key, 0.5);
        assert_eq!(m.degree, 0.75);
        let table = render_report(&[("x".into(), a), ("y".into(), b)], &m);
        assert!(table.contains("corpus mean"));
        let tsv = report_tsv(&[("x".into(), a)], &a);
        assert!(tsv.starts_with("piece\tKey\t"));
    }
}
