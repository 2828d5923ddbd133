//! Recurrent layers unrolled on the tape: a GRU layer and a single-layer
//! bidirectional LSTM.

use std::rc::Rc;

use super::params::Ctx;
use super::tape::Tensor;

/// GRU cell parameters: input and hidden weights for the reset, update,
/// and candidate gates, plus biases.
#[derive(Clone, Copy)]
pub struct GruParams {
    pub w_ir: Tensor,
    pub w_iz: Tensor,
    pub w_in: Tensor,
    pub w_hr: Tensor,
    pub w_hz: Tensor,
    pub w_hn: Tensor,
    pub b_r: Tensor,
    pub b_z: Tensor,
    pub b_n: Tensor,
}

impl GruParams {
    pub fn bind(ctx: &mut Ctx, prefix: &str) -> Self {
        GruParams {
            w_ir: ctx.param(&format!("{prefix}.w_ir")),
            w_iz: ctx.param(&format!("{prefix}.w_iz")),
            w_in: ctx.param(&format!("{prefix}.w_in")),
            w_hr: ctx.param(&format!("{prefix}.w_hr")),
            w_hz: ctx.param(&format!("{prefix}.w_hz")),
            w_hn: ctx.param(&format!("{prefix}.w_hn")),
            b_r: ctx.param(&format!("{prefix}.b_r")),
            b_z: ctx.param(&format!("{prefix}.b_z")),
            b_n: ctx.param(&format!("{prefix}.b_n")),
        }
    }
}

/// LSTM cell parameters (input, forget, cell, output gates).
#[derive(Clone, Copy)]
pub struct LstmParams {
    pub w_ii: Tensor,
    pub w_if: Tensor,
    pub w_ig: Tensor,
    pub w_io: Tensor,
    pub w_hi: Tensor,
    pub w_hf: Tensor,
    pub w_hg: Tensor,
    pub w_ho: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_g: Tensor,
    pub b_o: Tensor,
}

impl LstmParams {
    pub fn bind(ctx: &mut Ctx, prefix: &str) -> Self {
        LstmParams {
            w_ii: ctx.param(&format!("{prefix}.w_ii")),
            w_if: ctx.param(&format!("{prefix}.w_if")),
            w_ig: ctx.param(&format!("{prefix}.w_ig")),
            w_io: ctx.param(&format!("{prefix}.w_io")),
            w_hi: ctx.param(&format!("{prefix}.w_hi")),
            w_hf: ctx.param(&format!("{prefix}.w_hf")),
            w_hg: ctx.param(&format!("{prefix}.w_hg")),
            w_ho: ctx.param(&format!("{prefix}.w_ho")),
            b_i: ctx.param(&format!("{prefix}.b_i")),
            b_f: ctx.param(&format!("{prefix}.b_f")),
            b_g: ctx.param(&format!("{prefix}.b_g")),
            b_o: ctx.param(&format!("{prefix}.b_o")),
        }
    }
}

fn gru_step(ctx: &mut Ctx, x: Tensor, h: Tensor, p: &GruParams) -> Tensor {
    let t = &mut ctx.tape;
    let xr = t.matmul(x, p.w_ir);
    let hr = t.matmul(h, p.w_hr);
    let s = t.add(xr, hr);
    let s = t.add(s, p.b_r);
    let r = t.sigmoid(s);

    let xz = t.matmul(x, p.w_iz);
    let hz = t.matmul(h, p.w_hz);
    let s = t.add(xz, hz);
    let s = t.add(s, p.b_z);
    let z = t.sigmoid(s);

    let xn = t.matmul(x, p.w_in);
    let hn = t.matmul(h, p.w_hn);
    let rhn = t.mul(r, hn);
    let s = t.add(xn, rhn);
    let s = t.add(s, p.b_n);
    let n = t.tanh(s);

    // h' = (1 - z) * n + z * h
    let neg_z = t.scale(z, -1.0);
    let one_minus_z = t.add_scalar(neg_z, 1.0);
    let a = t.mul(one_minus_z, n);
    let b = t.mul(z, h);
    t.add(a, b)
}

/// Run a GRU over the rows of `seq` (k x d_in), zero initial state.
/// Returns the k x hidden matrix of hidden states.
pub fn gru_layer(ctx: &mut Ctx, seq: Tensor, p: &GruParams) -> Tensor {
    assert!(seq.rows > 0, "gru_layer on empty sequence");
    let hidden = p.w_hr.rows;
    let mut h = ctx.tape.zeros(1, hidden);
    let mut out: Option<Tensor> = None;
    for i in 0..seq.rows {
        let x = ctx.tape.gather_rows(seq, Rc::new(vec![i]));
        h = gru_step(ctx, x, h, p);
        out = Some(match out {
            None => h,
            Some(acc) => ctx.tape.concat_rows(acc, h),
        });
    }
    out.unwrap()
}

fn lstm_step(ctx: &mut Ctx, x: Tensor, h: Tensor, c: Tensor, p: &LstmParams) -> (Tensor, Tensor) {
    let t = &mut ctx.tape;
    let gate = |t: &mut super::tape::Tape, wi, wh, b| {
        let xi = t.matmul(x, wi);
        let hi = t.matmul(h, wh);
        let s = t.add(xi, hi);
        t.add(s, b)
    };
    let i_pre = gate(t, p.w_ii, p.w_hi, p.b_i);
    let i = t.sigmoid(i_pre);
    let f_pre = gate(t, p.w_if, p.w_hf, p.b_f);
    let f = t.sigmoid(f_pre);
    let g_pre = gate(t, p.w_ig, p.w_hg, p.b_g);
    let g = t.tanh(g_pre);
    let o_pre = gate(t, p.w_io, p.w_ho, p.b_o);
    let o = t.sigmoid(o_pre);
    let fc = t.mul(f, c);
    let ig = t.mul(i, g);
    let c_new = t.add(fc, ig);
    let tc = t.tanh(c_new);
    let h_new = t.mul(o, tc);
    (h_new, c_new)
}

fn lstm_direction(ctx: &mut Ctx, seq: Tensor, p: &LstmParams, reverse: bool) -> Vec<Tensor> {
    let hidden = p.w_hi.rows;
    let mut h = ctx.tape.zeros(1, hidden);
    let mut c = ctx.tape.zeros(1, hidden);
    let order: Vec<usize> = if reverse {
        (0..seq.rows).rev().collect()
    } else {
        (0..seq.rows).collect()
    };
    let mut states = vec![None; seq.rows];
    for i in order {
        let x = ctx.tape.gather_rows(seq, Rc::new(vec![i]));
        let (h2, c2) = lstm_step(ctx, x, h, c, p);
        h = h2;
        c = c2;
        states[i] = Some(h);
    }
    states.into_iter().map(|s| s.unwrap()).collect()
}

/// Single-layer bidirectional LSTM over the rows of `seq`; output row i is
/// concat(forward state i, backward state i), width 2 x hidden.
pub fn lstm_bidirectional_layer(
    ctx: &mut Ctx,
    seq: Tensor,
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> Tensor {
    assert!(seq.rows > 0, "lstm_bidirectional_layer on empty sequence");
    let f = lstm_direction(ctx, seq, fwd, false);
    let b = lstm_direction(ctx, seq, bwd, true);
    let mut out: Option<Tensor> = None;
    for i in 0..seq.rows {
        let row = ctx.tape.concat_cols(f[i], b[i]);
        out = Some(match out {
            None => row,
            Some(acc) => ctx.tape.concat_rows(acc, row),
        });
    }
    out.unwrap()
}
