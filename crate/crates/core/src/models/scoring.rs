//! Single-triple scoring functions over raw vectors.
//!
//! Complex vectors are stored as `[re | im]` halves.

use ndarray::{s, Array1, ArrayView1, ArrayView2};

pub fn score_transe(s: ArrayView1<f64>, r: ArrayView1<f64>, o: ArrayView1<f64>) -> f64 {
    let mut sq = 0.0;
    for i in 0..s.len() {
        let d = s[i] + r[i] - o[i];
        sq += d * d;
    }
    -sq.sqrt()
}

pub fn score_distmult(s: ArrayView1<f64>, r: ArrayView1<f64>, o: ArrayView1<f64>) -> f64 {
    (0..s.len()).map(|i| s[i] * r[i] * o[i]).sum()
}

/// `Re <s, r, conj(o)>`.
pub fn score_complex(s: ArrayView1<f64>, r: ArrayView1<f64>, o: ArrayView1<f64>) -> f64 {
    let d = s.len() / 2;
    let mut total = 0.0;
    for k in 0..d {
        let (sr, si, rr, ri, or, oi) = (s[k], s[d + k], r[k], r[d + k], o[k], o[d + k]);
        total += (sr * rr - si * ri) * or + (si * rr + sr * ri) * oi;
    }
    total
}

/// `W x1 s x2 r x3 o` with the core flattened as `W[i, j * D + k]`.
pub fn score_tucker(
    core: ArrayView2<f64>,
    s: ArrayView1<f64>,
    r: ArrayView1<f64>,
    o: ArrayView1<f64>,
) -> f64 {
    let d = s.len();
    let mut total = 0.0;
    for (j, &rj) in r.iter().enumerate() {
        let block = core.slice(s![.., j * d..(j + 1) * d]);
        total += rj * s.dot(&block.dot(&o));
    }
    total
}

/// LiteralE gating parameters.
#[derive(Debug, Clone, Copy)]
pub struct Gate<'a> {
    /// `D x D`
    pub w_ze: ArrayView2<'a, f64>,
    /// `D x A`
    pub w_zl: ArrayView2<'a, f64>,
    /// length `D`
    pub b_z: ArrayView1<'a, f64>,
    /// `D x (D + A)`
    pub w_h: ArrayView2<'a, f64>,
}

/// `z * h + (1 - z) * e` with `z = sigmoid(W_ze e + W_zl x + b_z)` and
/// `h = tanh(W_h [e; x])`.
pub fn literale_enrich(e: ArrayView1<f64>, x: ArrayView1<f64>, gate: &Gate) -> Array1<f64> {
    let d = e.len();
    let z = (gate.w_ze.dot(&e) + gate.w_zl.dot(&x) + gate.b_z).mapv(|v| 1.0 / (1.0 + (-v).exp()));
    let h = (gate.w_h.slice(s![.., ..d]).dot(&e) + gate.w_h.slice(s![.., d..]).dot(&x)).mapv(f64::tanh);
    let mut out = e.to_owned();
    for i in 0..d {
        out[i] = z[i] * h[i] + (1.0 - z[i]) * e[i];
    }
    out
}

/// Literal expert of KBLN: `sum_a w[a] exp(-(d_a - c[a])^2 / (2 sigma[a]^2))`
/// with `d = x_s - x_o`.
pub fn kbln_literal_term(
    w: ArrayView1<f64>,
    center: ArrayView1<f64>,
    width: ArrayView1<f64>,
    xs: ArrayView1<f64>,
    xo: ArrayView1<f64>,
) -> f64 {
    (0..w.len())
        .map(|a| {
            let z = xs[a] - xo[a] - center[a];
            w[a] * (-(z * z) / (2.0 * width[a] * width[a])).exp()
        })
        .sum()
}

/// DistMult plus the KBLN literal expert.
#[allow(clippy::too_many_arguments)]
pub fn score_kbln(
    s: ArrayView1<f64>,
    r: ArrayView1<f64>,
    o: ArrayView1<f64>,
    w: ArrayView1<f64>,
    center: ArrayView1<f64>,
    width: ArrayView1<f64>,
    xs: ArrayView1<f64>,
    xo: ArrayView1<f64>,
) -> f64 {
    score_distmult(s, r, o) + kbln_literal_term(w, center, width, xs, xo)
}

/// One hidden tanh layer followed by a scalar readout.
#[derive(Debug, Clone, Copy)]
pub struct Mlp<'a> {
    pub hidden: ArrayView2<'a, f64>,
    pub hidden_bias: ArrayView1<'a, f64>,
    pub out: ArrayView1<'a, f64>,
    pub out_bias: f64,
}

impl Mlp<'_> {
    pub fn apply(&self, input: ArrayView1<f64>) -> f64 {
        let h = (self.hidden.dot(&input) + self.hidden_bias).mapv(f64::tanh);
        self.out.dot(&h) + self.out_bias
    }
}

/// MTKGNN outputs for one triple: the triple score and, per attribute,
/// the subject-net prediction for `s` and the object-net prediction for `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtkgnnOutput {
    pub triple: f64,
    pub subject_attrs: Vec<f64>,
    pub object_attrs: Vec<f64>,
}

pub fn mtkgnn_scores(
    s: ArrayView1<f64>,
    r: ArrayView1<f64>,
    o: ArrayView1<f64>,
    attr_emb: ArrayView2<f64>,
    triple_net: &Mlp,
    subject_net: &Mlp,
    object_net: &Mlp,
) -> MtkgnnOutput {
    let input = ndarray::concatenate![ndarray::Axis(0), s, r, o];
    let predict = |net: &Mlp, e: ArrayView1<f64>| -> Vec<f64> {
        attr_emb
            .rows()
            .into_iter()
            .map(|a| net.apply(ndarray::concatenate![ndarray::Axis(0), e, a].view()))
            .collect()
    };
    MtkgnnOutput {
        triple: triple_net.apply(input.view()),
        subject_attrs: predict(subject_net, s),
        object_attrs: predict(object_net, o),
    }
}
