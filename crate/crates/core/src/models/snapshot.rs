//! Immutable, dropout-free scoring views of a trained model.

use ndarray::{s, Array1, Array2, ArrayView1};

use super::*;

/// Anything that scores triples against the full entity set.
pub trait Scorer: Sync {
    fn num_entities(&self) -> usize;

    /// `out[c] = score(s, p, c)` for every entity `c`.
    fn score_objects(&self, s: usize, p: usize, out: &mut [f64]);

    /// `out[c] = score(c, p, o)` for every entity `c`.
    fn score_subjects(&self, p: usize, o: usize, out: &mut [f64]);

    fn score(&self, s: usize, p: usize, o: usize) -> f64 {
        let mut out = vec![0.0; self.num_entities()];
        self.score_objects(s, p, &mut out);
        out[o]
    }
}

/// A frozen copy of a model with per-entity work precomputed.
#[derive(Debug, Clone)]
pub struct Snapshot {
    state: ModelState,
    feats: LiteralFeatureMatrix,
    /// Entity rows as seen by the scoring function (literal-enriched for
    /// LiteralE).
    cand: Array2<f64>,
    /// TuckER relation matrices.
    tucker: Vec<Array2<f64>>,
    /// MTKGNN hidden pre-activations of every entity in subject and object
    /// position.
    mt_subject: Array2<f64>,
    mt_object: Array2<f64>,
}

impl Snapshot {
    pub fn new(state: &ModelState, feats: &LiteralFeatureMatrix) -> Self {
        let kind = state.kind();
        let ent = &state.params[ENT].value;
        let cand = if kind.is_literale() {
            literale_table(state, feats)
        } else {
            ent.clone()
        };
        let tucker = if kind == ModelKind::TuckER {
            state.params[REL]
                .value
                .rows()
                .into_iter()
                .map(|r| state.tucker_matrix(r))
                .collect()
        } else {
            Vec::new()
        };
        let (mt_subject, mt_object) = if kind == ModelKind::Mtkgnn {
            let de = ent.ncols();
            let w1 = &state.params[MT_W1].value;
            (
                ent.dot(&w1.slice(s![.., ..de]).t()),
                ent.dot(&w1.slice(s![.., 2 * de..]).t()),
            )
        } else {
            (Array2::zeros((0, 0)), Array2::zeros((0, 0)))
        };
        Snapshot {
            state: state.clone(),
            feats: feats.clone(),
            cand,
            tucker,
            mt_subject,
            mt_object,
        }
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    /// The (possibly literal-enriched) entity embedding used for scoring.
    pub fn entity(&self, e: usize) -> ArrayView1<'_, f64> {
        self.cand.row(e)
    }

    fn rel(&self, p: usize) -> ArrayView1<'_, f64> {
        self.state.params[REL].value.row(p)
    }

    /// `q` such that `score(s, p, c) = q . cand[c]` for bilinear models.
    fn object_query(&self, s: usize, p: usize) -> Array1<f64> {
        let (e, r) = (self.cand.row(s), self.rel(p));
        match self.state.kind() {
            ModelKind::TuckER => e.dot(&self.tucker[p]),
            k if k.is_complex() => {
                let d = e.len() / 2;
                let mut q = Array1::zeros(2 * d);
                for k in 0..d {
                    q[k] = e[k] * r[k] - e[d + k] * r[d + k];
                    q[d + k] = e[d + k] * r[k] + e[k] * r[d + k];
                }
                q
            }
            _ => &e * &r,
        }
    }

    /// `q` such that `score(c, p, o) = q . cand[c]` for bilinear models.
    fn subject_query(&self, p: usize, o: usize) -> Array1<f64> {
        let (e, r) = (self.cand.row(o), self.rel(p));
        match self.state.kind() {
            ModelKind::TuckER => self.tucker[p].dot(&e),
            k if k.is_complex() => {
                let d = e.len() / 2;
                let mut q = Array1::zeros(2 * d);
                for k in 0..d {
                    q[k] = r[k] * e[k] + r[d + k] * e[d + k];
                    q[d + k] = r[k] * e[d + k] - r[d + k] * e[k];
                }
                q
            }
            _ => &e * &r,
        }
    }

    fn kbln_add(&self, p: usize, fixed: usize, fixed_is_subject: bool, out: &mut [f64]) {
        let x = self.feats.values();
        let w = self.state.params[KBLN_W].value.row(p);
        let c = self.state.params[KBLN_C].value.row(p);
        let sd = self.state.params[KBLN_S].value.row(p);
        for (e, o) in out.iter_mut().enumerate() {
            let (xs, xo) = if fixed_is_subject {
                (x.row(fixed), x.row(e))
            } else {
                (x.row(e), x.row(fixed))
            };
            *o += scoring::kbln_literal_term(w, c, sd, xs, xo);
        }
    }

    fn mtkgnn_fill(&self, base: Array1<f64>, table: &Array2<f64>, out: &mut [f64]) {
        let w2 = self.state.params[MT_W2].value.row(0);
        let b2 = self.state.params[MT_B2].value[[0, 0]];
        for (c, o) in out.iter_mut().enumerate() {
            let u = table.row(c);
            let mut z = b2;
            for k in 0..base.len() {
                z += w2[k] * (base[k] + u[k]).tanh();
            }
            *o = z;
        }
    }

    fn mtkgnn_relation_part(&self, p: usize) -> Array1<f64> {
        let de = self.cand.ncols();
        let w1 = &self.state.params[MT_W1].value;
        w1.slice(s![.., de..2 * de]).dot(&self.rel(p)) + self.state.params[MT_B1].value.row(0)
    }

    /// `-|target - c|` for every entity `c`.
    fn transe_fill(&self, target: Array1<f64>, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let row = self.cand.row(c);
            let mut sq = 0.0;
            for k in 0..target.len() {
                let d = target[k] - row[k];
                sq += d * d;
            }
            *o = -sq.sqrt();
        }
    }
}

fn literale_table(state: &ModelState, feats: &LiteralFeatureMatrix) -> Array2<f64> {
    let p = &state.params;
    let gate = scoring::Gate {
        w_ze: p[GATE_E].value.view(),
        w_zl: p[GATE_L].value.view(),
        b_z: p[GATE_B].value.row(0),
        w_h: p[TRANSFORM].value.view(),
    };
    let ent = &p[ENT].value;
    let mut out = Array2::zeros(ent.dim());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row.assign(&scoring::literale_enrich(ent.row(i), feats.values().row(i), &gate));
    }
    out
}

impl Scorer for Snapshot {
    fn num_entities(&self) -> usize {
        self.cand.nrows()
    }

    fn score_objects(&self, s: usize, p: usize, out: &mut [f64]) {
        match self.state.kind() {
            ModelKind::TransE | ModelKind::TransEA => {
                self.transe_fill(&self.cand.row(s) + &self.rel(p), out);
            }
            ModelKind::Mtkgnn => {
                let base = &self.mt_subject.row(s) + &self.mtkgnn_relation_part(p);
                self.mtkgnn_fill(base, &self.mt_object, out);
            }
            kind => {
                let q = self.object_query(s, p);
                for (o, v) in out.iter_mut().zip(self.cand.dot(&q)) {
                    *o = v;
                }
                if kind == ModelKind::Kbln {
                    self.kbln_add(p, s, true, out);
                }
            }
        }
    }

    fn score_subjects(&self, p: usize, o: usize, out: &mut [f64]) {
        match self.state.kind() {
            ModelKind::TransE | ModelKind::TransEA => {
                self.transe_fill(&self.cand.row(o) - &self.rel(p), out);
            }
            ModelKind::Mtkgnn => {
                let base = &self.mt_object.row(o) + &self.mtkgnn_relation_part(p);
                self.mtkgnn_fill(base, &self.mt_subject, out);
            }
            kind => {
                let q = self.subject_query(p, o);
                for (s, v) in out.iter_mut().zip(self.cand.dot(&q)) {
                    *s = v;
                }
                if kind == ModelKind::Kbln {
                    self.kbln_add(p, o, false, out);
                }
            }
        }
    }

    fn score(&self, s: usize, p: usize, o: usize) -> f64 {
        let (es, r, eo) = (self.cand.row(s), self.rel(p), self.cand.row(o));
        let params = &self.state.params;
        match self.state.kind() {
            ModelKind::TransE | ModelKind::TransEA => scoring::score_transe(es, r, eo),
            ModelKind::DistMult | ModelKind::LiteralEDistMult => scoring::score_distmult(es, r, eo),
            ModelKind::ComplEx | ModelKind::LiteralEComplEx => scoring::score_complex(es, r, eo),
            ModelKind::TuckER => scoring::score_tucker(params[CORE].value.view(), es, r, eo),
            ModelKind::Kbln => {
                let x = self.feats.values();
                scoring::score_kbln(
                    es,
                    r,
                    eo,
                    params[KBLN_W].value.row(p),
                    params[KBLN_C].value.row(p),
                    params[KBLN_S].value.row(p),
                    x.row(s),
                    x.row(o),
                )
            }
            ModelKind::Mtkgnn => {
                let mut out = vec![0.0; 1];
                let base = &self.mt_subject.row(s) + &self.mtkgnn_relation_part(p);
                let table = self.mt_object.slice(s![o..o + 1, ..]).to_owned();
                self.mtkgnn_fill(base, &table, &mut out);
                out[0]
            }
        }
    }
}

/// `score -> scale * score + shift`, for checking that metrics depend on
/// score order only.
#[derive(Debug, Clone)]
pub struct Affine<S> {
    pub inner: S,
    pub scale: f64,
    pub shift: f64,
}

impl<S: Scorer> Scorer for Affine<S> {
    fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    fn score_objects(&self, s: usize, p: usize, out: &mut [f64]) {
        self.inner.score_objects(s, p, out);
        out.iter_mut().for_each(|v| *v = self.scale * *v + self.shift);
    }

    fn score_subjects(&self, p: usize, o: usize, out: &mut [f64]) {
        self.inner.score_subjects(p, o, out);
        out.iter_mut().for_each(|v| *v = self.scale * *v + self.shift);
    }

    fn score(&self, s: usize, p: usize, o: usize) -> f64 {
        self.scale * self.inner.score(s, p, o) + self.shift
    }
}

impl<S: Scorer> Scorer for &S {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }

    fn score_objects(&self, s: usize, p: usize, out: &mut [f64]) {
        (**self).score_objects(s, p, out)
    }

    fn score_subjects(&self, p: usize, o: usize, out: &mut [f64]) {
        (**self).score_subjects(p, o, out)
    }

    fn score(&self, s: usize, p: usize, o: usize) -> f64 {
        (**self).score(s, p, o)
    }
}
