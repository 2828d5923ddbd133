//! Typed score graph with the four note-relation edge sets, the onset
//! partition used by contraction pooling, and a brute-force validator.

use std::fmt;

use thiserror::Error;

use crate::score::{RationalTime, Score};

/// The four note relations of the score graph.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Relation {
    Onset,
    During,
    Follow,
    Silence,
}

impl Relation {
    pub const ALL: [Relation; 4] =
        [Relation::Onset, Relation::During, Relation::Follow, Relation::Silence];

    pub fn index(self) -> usize {
        match self {
            Relation::Onset => 0,
            Relation::During => 1,
            Relation::Follow => 2,
            Relation::Silence => 3,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Relation::Onset => "onset",
            Relation::During => "during",
            Relation::Follow => "follow",
            Relation::Silence => "silence",
        };
        write!(f, "{s}")
    }
}

/// Immutable typed multigraph over note indices plus node features.
#[derive(Clone, Debug)]
pub struct ScoreGraph {
    pub n_nodes: usize,
    /// Edge lists indexed by `Relation::index()`, each sorted (src, dst).
    pub edges: [Vec<(usize, usize)>; 4],
    pub features: Vec<Vec<f64>>,
    pub onsets: Vec<RationalTime>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("feature rows ({rows}) do not match note count ({notes})")]
    FeatureMismatch { rows: usize, notes: usize },
}

/// A discrepancy between a graph's edge set and the relation predicates.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Violation {
    Missing(usize, Relation, usize),
    Extra(usize, Relation, usize),
}

fn predicate_edges(score: &Score) -> [Vec<(usize, usize)>; 4] {
    let notes = &score.notes;
    let n = notes.len();
    let mut edges: [Vec<(usize, usize)>; 4] = Default::default();
    for u in 0..n {
        let off_u = notes[u].offset();
        // first onset at or after off_u; a note starting exactly when u
        // ends blocks u's silence edges (it gets a follow edge instead)
        let next_onset = notes
            .iter()
            .filter(|v| v.onset >= off_u)
            .map(|v| v.onset)
            .min();
        for v in 0..n {
            if u == v {
                continue;
            }
            let (nu, nv) = (&notes[u], &notes[v]);
            if nu.onset == nv.onset {
                edges[Relation::Onset.index()].push((u, v));
            }
            // v starts while u is sounding: stored sounding -> entering
            if nv.onset > nu.onset && nv.onset <= off_u {
                edges[Relation::During.index()].push((u, v));
            }
            if off_u == nv.onset {
                edges[Relation::Follow.index()].push((u, v));
            }
            if off_u < nv.onset && Some(nv.onset) == next_onset {
                edges[Relation::Silence.index()].push((u, v));
            }
        }
    }
    for list in &mut edges {
        list.sort_unstable();
        list.dedup();
    }
    edges
}

/// Build the score graph: edge sets are exactly the pairs satisfying the
/// four relation predicates over exact rational times.
pub fn build_graph(score: &Score, features: Vec<Vec<f64>>) -> Result<ScoreGraph, GraphError> {
    if features.len() != score.notes.len() {
        return Err(GraphError::FeatureMismatch { rows: features.len(), notes: score.notes.len() });
    }
    Ok(ScoreGraph {
        n_nodes: score.notes.len(),
        edges: predicate_edges(score),
        features,
        onsets: score.notes.iter().map(|n| n.onset).collect(),
    })
}

/// Group node indices by exact onset; groups sorted by onset ascending,
/// indices sorted within each group.
pub fn onset_partition(graph: &ScoreGraph) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..graph.n_nodes).collect();
    order.sort_by_key(|&i| (graph.onsets[i], i));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if graph.onsets[g[0]] == graph.onsets[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Re-evaluate all four predicates pairwise and report every missing or
/// spurious edge. Empty iff the graph is exactly correct.
pub fn validate_graph(score: &Score, graph: &ScoreGraph) -> Vec<Violation> {
    let want = predicate_edges(score);
    let mut out = Vec::new();
    for r in Relation::ALL {
        let got = &graph.edges[r.index()];
        for &(u, v) in &want[r.index()] {
            if !got.contains(&(u, v)) {
                out.push(Violation::Missing(u, r, v));
            }
        }
        for &(u, v) in got {
            if !want[r.index()].contains(&(u, v)) {
                out.push(Violation::Extra(u, r, v));
            }
        }
    }
    out
}

/// Debug/golden dump: `E <relation> <src> <dst>` lines, lexicographically sorted.
pub fn dump_graph(graph: &ScoreGraph) -> String {
    let mut lines: Vec<String> = Vec::new();
    for r in Relation::ALL {
        for &(u, v) in &graph.edges[r.index()] {
            lines.push(format!("E {r} {u} {v}"));
        }
    }
    lines.sort();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Directed edge lists the message-passing layers aggregate over: the four
/// score relations plus (by default) the reverse of During, so information
/// also flows from entering notes back to sounding ones.
pub fn message_relations(graph: &ScoreGraph, during_rev: bool) -> Vec<Vec<(usize, usize)>> {
    let mut rels: Vec<Vec<(usize, usize)>> =
        Relation::ALL.iter().map(|r| graph.edges[r.index()].clone()).collect();
    if during_rev {
        let rev: Vec<(usize, usize)> = graph.edges[Relation::During.index()]
            .iter()
            .map(|&(u, v)| (v, u))
            .collect();
        rels.push(rev);
    }
    rels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{extract_features, parse_note_table, Note, SpelledPitch, Step};
    use crate::score::Score;
    use proptest::prelude::*;

    fn graph_of(text: &str) -> (Score, ScoreGraph) {
        let score = parse_note_table(text).unwrap();
        let x = extract_features(&score);
        let g = build_graph(&score, x).unwrap();
        (score, g)
    }

    #[test]
    fn two_simultaneous_notes_make_onset_pair() {
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 0/1 1/4 E 0 4\n");
        assert_eq!(g.edges[Relation::Onset.index()], vec![(0, 1), (1, 0)]);
        assert!(g.edges[Relation::During.index()].is_empty());
        assert!(g.edges[Relation::Follow.index()].is_empty());
        assert!(g.edges[Relation::Silence.index()].is_empty());
    }

    #[test]
    fn boundary_is_follow_not_silence() {
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 1/4 1/4 D 0 4\n");
        assert_eq!(g.edges[Relation::Follow.index()], vec![(0, 1)]);
        assert!(g.edges[Relation::Silence.index()].is_empty());
        // per the written During condition, the boundary note also sounds During
        assert_eq!(g.edges[Relation::During.index()], vec![(0, 1)]);
    }

    #[test]
    fn gap_makes_silence_edge() {
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 1/2 1/4 D 0 4\n");
        assert_eq!(g.edges[Relation::Silence.index()], vec![(0, 1)]);
        assert!(g.edges[Relation::Follow.index()].is_empty());
    }

    #[test]
    fn silence_blocked_by_intervening_onset_even_if_sounding() {
        // long pedal note still sounding does not block silence (predicate
        // only quantifies over onsets); an intervening onset does.
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 3/8 1/8 E 0 4\nN 1/2 1/4 D 0 4\n");
        let sil = &g.edges[Relation::Silence.index()];
        assert!(sil.contains(&(0, 1)));
        assert!(!sil.contains(&(0, 2)));
    }

    #[test]
    fn silence_targets_all_notes_at_first_post_gap_onset() {
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 1/2 1/4 D 0 4\nN 1/2 1/4 F 0 4\n");
        let sil = &g.edges[Relation::Silence.index()];
        assert_eq!(sil.as_slice(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn monophonic_line_edge_counts() {
        let (_, g) = graph_of(
            "N 0/1 1/4 C 0 4\nN 1/4 1/4 D 0 4\nN 1/2 1/4 E 0 4\nN 3/4 1/4 F 0 4\n",
        );
        assert_eq!(g.edges[Relation::Follow.index()].len(), 3);
        assert!(g.edges[Relation::Onset.index()].is_empty());
        assert!(g.edges[Relation::Silence.index()].is_empty());
    }

    #[test]
    fn feature_count_mismatch_is_error() {
        let score = parse_note_table("N 0/1 1/4 C 0 4\n").unwrap();
        assert!(build_graph(&score, vec![]).is_err());
    }

    #[test]
    fn validator_flags_mutations() {
        let (score, g) = graph_of("N 0/1 1/4 C 0 4\nN 0/1 1/4 E 0 4\nN 3/8 1/8 G 0 4\nN 5/8 1/4 D 0 4\n");
        assert!(validate_graph(&score, &g).is_empty());

        let mut missing = g.clone();
        missing.edges[Relation::Onset.index()].remove(0);
        let v = validate_graph(&score, &missing);
        assert_eq!(v, vec![Violation::Missing(0, Relation::Onset, 1)]);

        // a spurious silence edge bridging the intervening onset at 3/8
        assert!(!g.edges[Relation::Silence.index()].contains(&(0, 3)));
        let mut extra = g.clone();
        extra.edges[Relation::Silence.index()].push((0, 3));
        extra.edges[Relation::Silence.index()].sort_unstable();
        let v = validate_graph(&score, &extra);
        assert_eq!(v, vec![Violation::Extra(0, Relation::Silence, 3)]);
    }

    #[test]
    fn onset_partition_examples() {
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 1/4 1/4 D 0 4\nN 1/2 1/4 E 0 4\n");
        assert_eq!(onset_partition(&g), vec![vec![0], vec![1], vec![2]]);

        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 0/1 1/4 E 0 4\nN 0/1 1/4 G 0 4\nN 0/1 1/4 C 0 5\n");
        assert_eq!(onset_partition(&g), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn graph_dump_two_note_chord() {
        let (_, g) = graph_of("N 0/1 1/4 C 0 4\nN 0/1 1/4 E 0 4\n");
        assert_eq!(dump_graph(&g), "E onset 0 1\nE onset 1 0\n");
    }

    fn random_score(seed: Vec<(i64, i64, usize)>) -> Score {
        let notes: Vec<Note> = seed
            .iter()
            .map(|&(on, dur, st)| Note {
                id: 0,
                onset: RationalTime::new(on, 12),
                duration: RationalTime::new(dur, 12),
                pitch: SpelledPitch::new(Step::ALL[st], 0, 4).unwrap(),
            })
            .collect();
        Score::new(notes, vec![]).unwrap()
    }

    /// O(n^2) literal transcription of the four predicates, kept separate
    /// from `predicate_edges` as the test oracle.
    fn brute_force(score: &Score) -> [Vec<(usize, usize)>; 4] {
        let ns = &score.notes;
        let mut out: [Vec<(usize, usize)>; 4] = Default::default();
        for u in 0..ns.len() {
            for v in 0..ns.len() {
                if u == v {
                    continue;
                }
                let on_u = ns[u].onset;
                let on_v = ns[v].onset;
                let end_u = ns[u].onset + ns[u].duration;
                if on_u == on_v {
                    out[0].push((u, v));
                }
                if on_v > on_u && on_v <= end_u {
                    out[1].push((u, v));
                }
                if end_u == on_v {
                    out[2].push((u, v));
                }
                if end_u < on_v
                    && !ns.iter().any(|w| w.onset < on_v && w.onset >= end_u)
                {
                    out[3].push((u, v));
                }
            }
        }
        for l in &mut out {
            l.sort_unstable();
            l.dedup();
        }
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force_oracle(
            seed in proptest::collection::vec((0i64..24, 1i64..9, 0usize..7), 2..14)
        ) {
            let score = random_score(seed);
            let x = extract_features(&score);
            let g = build_graph(&score, x).unwrap();
            let want = brute_force(&score);
            for r in Relation::ALL {
                prop_assert_eq!(&g.edges[r.index()], &want[r.index()]);
            }
            prop_assert!(validate_graph(&score, &g).is_empty());
        }

        #[test]
        fn partition_matches_group_by_onset(
            seed in proptest::collection::vec((0i64..16, 1i64..6, 0usize..7), 1..12)
        ) {
            let score = random_score(seed);
            let x = extract_features(&score);
            let g = build_graph(&score, x).unwrap();
            let groups = onset_partition(&g);
            // independent group-by oracle
            let mut by_onset: Vec<(RationalTime, Vec<usize>)> = Vec::new();
            for (i, n) in score.notes.iter().enumerate() {
                match by_onset.iter_mut().find(|(t, _)| *t == n.onset) {
                    Some((_, v)) => v.push(i),
                    None => by_onset.push((n.onset, vec![i])),
                }
            }
            by_onset.sort_by_key(|(t, _)| *t);
            let want: Vec<Vec<usize>> = by_onset.into_iter().map(|(_, v)| v).collect();
            prop_assert_eq!(groups, want);
            // onset edges are symmetric and transitive (cliques)
            let onset = &g.edges[Relation::Onset.index()];
            for &(u, v) in onset {
                prop_assert!(onset.contains(&(v, u)));
            }
        }
    }
}
