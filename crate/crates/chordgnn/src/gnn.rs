//! The encoder: stacked heterogeneous graphSAGE layers over the score
//! graph, onset edge-contraction pooling, then an MLP and two GRU layers
//! producing one row per distinct onset.

use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{gru_layer, Ctx, GruParams, ParamStore, Tensor};
use crate::graph::{message_relations, onset_partition, ScoreGraph};
use crate::score::RationalTime;

/// Parameter-name suffixes for the message-passing relations, in the order
/// `message_relations` emits them. `during_rev` is the internal reverse of
/// During, not a score relation.
pub const RELATION_NAMES: [&str; 5] = ["onset", "during", "follow", "silence", "during_rev"];

#[derive(Clone, Debug)]
pub struct EncoderConfig {
    pub d_in: usize,
    pub hidden: usize,
    pub sage_layers: usize,
    /// Share one weight matrix across relations instead of per-relation W_r.
    pub shared_weights: bool,
    /// Include the reverse-During message relation.
    pub during_rev: bool,
}

impl EncoderConfig {
    pub fn n_relations(&self) -> usize {
        if self.during_rev {
            5
        } else {
            4
        }
    }

    fn sage_weight_names(&self, layer: usize) -> Vec<String> {
        if self.shared_weights {
            vec![format!("enc.sage{layer}.w_shared"); self.n_relations()]
        } else {
            RELATION_NAMES[..self.n_relations()]
                .iter()
                .map(|r| format!("enc.sage{layer}.w_{r}"))
                .collect()
        }
    }
}

/// Register all encoder parameters in the store.
pub fn init_encoder(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut ChaCha8Rng) {
    for l in 0..cfg.sage_layers {
        let d_in = if l == 0 { cfg.d_in } else { cfg.hidden };
        let mut names = cfg.sage_weight_names(l);
        names.dedup();
        for name in names {
            store.init_weight(&name, 2 * d_in, cfg.hidden, rng);
        }
    }
    store.init_weight("enc.cpool.w", cfg.hidden, cfg.hidden, rng);
    store.init_weight("enc.mlp.w", cfg.hidden, cfg.hidden, rng);
    store.init_zeros("enc.mlp.b", 1, cfg.hidden);
    for g in 1..=2 {
        for gate in ["r", "z", "n"] {
            store.init_weight(&format!("enc.gru{g}.w_i{gate}"), cfg.hidden, cfg.hidden, rng);
            store.init_weight(&format!("enc.gru{g}.w_h{gate}"), cfg.hidden, cfg.hidden, rng);
            store.init_zeros(&format!("enc.gru{g}.b_{gate}"), 1, cfg.hidden);
        }
    }
}

/// One heterogeneous graphSAGE block: for each relation r,
/// h_{v_r} = ReLU(W_r . concat(h_v, mean of in-neighbors under r)); the
/// node output is the mean of the per-relation terms over the full
/// relation set. Empty neighborhoods contribute a zero mean vector.
pub fn sage_forward(
    ctx: &mut Ctx,
    relations: &[Vec<(usize, usize)>],
    h: Tensor,
    weights: &[Tensor],
) -> Tensor {
    assert_eq!(relations.len(), weights.len(), "one weight per relation");
    let n = h.rows;
    let mut acc: Option<Tensor> = None;
    for (edges, &w) in relations.iter().zip(weights) {
        assert_eq!(w.rows, 2 * h.cols, "sage weight shape mismatch");
        let m = if edges.is_empty() {
            ctx.tape.zeros(n, h.cols)
        } else {
            let src: Vec<usize> = edges.iter().map(|&(u, _)| u).collect();
            let dst: Vec<usize> = edges.iter().map(|&(_, v)| v).collect();
            let mut deg = vec![0.0f64; n];
            for &v in &dst {
                deg[v] += 1.0;
            }
            let inv_deg: Vec<f64> = deg.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
            let gathered = ctx.tape.gather_rows(h, Rc::new(src));
            let summed = ctx.tape.scatter_add_rows(gathered, Rc::new(dst), n);
            ctx.tape.scale_rows(summed, Rc::new(inv_deg))
        };
        let cat = ctx.tape.concat_cols(h, m);
        let lin = ctx.tape.matmul(cat, w);
        let act = ctx.tape.relu(lin);
        acc = Some(match acc {
            None => act,
            Some(a) => ctx.tape.add(a, act),
        });
    }
    let sum = acc.expect("at least one relation");
    ctx.tape.scale(sum, 1.0 / relations.len() as f64)
}

/// Result of onset edge-contraction pooling.
pub struct Contraction {
    /// k x d, one row per distinct onset, sorted by onset ascending.
    pub s: Tensor,
    pub onsets: Vec<RationalTime>,
    /// node index -> row of `s` holding its onset group.
    pub rep_map: Vec<usize>,
}

fn group_row_map(graph: &ScoreGraph) -> (Vec<Vec<usize>>, Vec<usize>, Vec<RationalTime>) {
    let groups = onset_partition(graph);
    let mut rep_map = vec![0usize; graph.n_nodes];
    let mut onsets = Vec::with_capacity(groups.len());
    for (row, g) in groups.iter().enumerate() {
        for &u in g {
            rep_map[u] = row;
        }
        onsets.push(graph.onsets[g[0]]);
    }
    (groups, rep_map, onsets)
}

/// Onset edge-contraction pooling: H' = H . W_cpool, each onset group is
/// summed into a single representative row, rows sorted by onset.
pub fn contract_onsets(ctx: &mut Ctx, h: Tensor, graph: &ScoreGraph, w_cpool: Tensor) -> Contraction {
    let (groups, rep_map, onsets) = group_row_map(graph);
    let h_prime = ctx.tape.matmul(h, w_cpool);
    let s = ctx
        .tape
        .scatter_add_rows(h_prime, Rc::new(rep_map.clone()), groups.len());
    Contraction { s, onsets, rep_map }
}

/// Per-node contracted representations before vertex filtering:
/// h_u^(cp) = h'_u + sum of h'_v over u's onset neighbors. All members of
/// one onset group end up identical, which is what makes the choice of
/// representative irrelevant.
pub fn contract_pre_filter(ctx: &mut Ctx, h: Tensor, graph: &ScoreGraph, w_cpool: Tensor) -> Tensor {
    let h_prime = ctx.tape.matmul(h, w_cpool);
    let onset_edges = &graph.edges[crate::graph::Relation::Onset.index()];
    if onset_edges.is_empty() {
        return h_prime;
    }
    let src: Vec<usize> = onset_edges.iter().map(|&(u, _)| u).collect();
    let dst: Vec<usize> = onset_edges.iter().map(|&(_, v)| v).collect();
    let gathered = ctx.tape.gather_rows(h_prime, Rc::new(src));
    let neigh = ctx.tape.scatter_add_rows(gathered, Rc::new(dst), h.rows);
    ctx.tape.add(h_prime, neigh)
}

/// Full encoder: SAGE stack -> contraction -> MLP -> GRU -> GRU, with
/// dropout after each learning block. One output row per distinct onset.
pub fn encoder_forward(ctx: &mut Ctx, graph: &ScoreGraph, cfg: &EncoderConfig) -> Contraction {
    assert!(graph.n_nodes > 0, "encoder on empty score");
    let rels = message_relations(graph, cfg.during_rev);
    let x: Vec<f64> = graph.features.iter().flatten().copied().collect();
    let mut h = ctx.input(graph.n_nodes, cfg.d_in, x);
    for l in 0..cfg.sage_layers {
        let weights: Vec<Tensor> = cfg
            .sage_weight_names(l)
            .iter()
            .map(|n| ctx.param(n))
            .collect();
        h = sage_forward(ctx, &rels, h, &weights);
        h = ctx.dropout(h);
    }
    let w_cpool = ctx.param("enc.cpool.w");
    let contraction = contract_onsets(ctx, h, graph, w_cpool);

    let w_mlp = ctx.param("enc.mlp.w");
    let b_mlp = ctx.param("enc.mlp.b");
    let lin = ctx.tape.matmul(contraction.s, w_mlp);
    let lin = ctx.tape.add(lin, b_mlp);
    let act = ctx.tape.relu(lin);
    let mut seq = ctx.dropout(act);

    for g in 1..=2 {
        let p = GruParams::bind(ctx, &format!("enc.gru{g}"));
        seq = gru_layer(ctx, seq, &p);
        seq = ctx.dropout(seq);
    }
    Contraction { s: seq, onsets: contraction.onsets, rep_map: contraction.rep_map }
}
