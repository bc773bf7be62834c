//! Batched losses and their analytic gradients.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::*;

/// A batch of `(subject, predicate)` queries scored against every entity.
#[derive(Debug, Clone)]
pub struct OneToNBatch {
    pub queries: Vec<(usize, usize)>,
    /// `queries.len() x |E|`, already label-smoothed.
    pub labels: Array2<f64>,
    /// True training objects per query (unsmoothed).
    pub objects: Vec<Vec<usize>>,
}

/// Positives with `negatives.len() / positives.len()` corruptions each;
/// negative `j` belongs to positive `j / k`.
#[derive(Debug, Clone)]
pub struct MarginBatch {
    pub positives: Vec<Triple>,
    pub negatives: Vec<Triple>,
}

#[derive(Debug, Clone)]
pub enum Batch {
    OneToN(OneToNBatch),
    Margin(MarginBatch),
}

impl Batch {
    pub fn len(&self) -> usize {
        match self {
            Batch::OneToN(b) => b.queries.len(),
            Batch::Margin(b) => b.positives.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PassOptions<'a> {
    pub margin: f64,
    /// Weight of the literal regression loss for objective-fusion models.
    pub alpha: f64,
    /// Inverted-dropout mask on query entity rows (`batch x width`).
    pub input_mask: Option<&'a Array2<f64>>,
    /// Inverted-dropout mask on query vectors (`batch x width`).
    pub hidden_mask: Option<&'a Array2<f64>>,
}

impl Default for PassOptions<'_> {
    fn default() -> Self {
        PassOptions {
            margin: 1.0,
            alpha: 0.1,
            input_mask: None,
            hidden_mask: None,
        }
    }
}

/// Per-table gradients plus the rows that received any gradient.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tables: Vec<Array2<f64>>,
    pub rows: Vec<Vec<bool>>,
}

impl Gradients {
    pub fn zeros_like(state: &ModelState) -> Self {
        Gradients {
            tables: state.params.iter().map(|p| Array2::zeros(p.value.dim())).collect(),
            rows: state.params.iter().map(|p| vec![false; p.value.nrows()]).collect(),
        }
    }

    fn mark_all(&mut self, table: usize) {
        self.rows[table].iter_mut().for_each(|r| *r = true);
    }

    fn add_row(&mut self, table: usize, row: usize, g: ArrayView1<f64>) {
        self.tables[table].row_mut(row).scaled_add(1.0, &g);
        self.rows[table][row] = true;
    }
}

/// Numerically stable `BCE(sigmoid(logit), label)`.
pub fn bce_with_logits(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Literal-enriched entity table and the activations needed to backprop.
struct Enriched {
    out: Array2<f64>,
    gate: Array2<f64>,
    transform: Array2<f64>,
}

/// Mean BCE over the batch x entity logit table; overwrites `logits` with
/// dLoss/dlogit when `want_grad`.
fn bce_mean(logits: &mut Array2<f64>, labels: &Array2<f64>, want_grad: bool) -> f64 {
    let n = logits.len() as f64;
    let mut total = 0.0;
    Zip::from(&mut *logits).and(labels).for_each(|l, &y| {
        total += bce_with_logits(*l, y);
        if want_grad {
            *l = (sigmoid(*l) - y) / n;
        }
    });
    total / n
}

fn rbf(d: f64, center: f64, width: f64) -> f64 {
    let z = d - center;
    (-(z * z) / (2.0 * width * width)).exp()
}

impl ModelState {
    pub fn loss(&self, batch: &Batch, feats: &LiteralFeatureMatrix, opts: &PassOptions) -> Result<f64> {
        self.pass(batch, feats, opts, None)
    }

    /// Loss and gradients of every table. Errors on a regime mismatch or a
    /// non-finite loss.
    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        feats: &LiteralFeatureMatrix,
        opts: &PassOptions,
    ) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.pass(batch, feats, opts, Some(&mut grads))?;
        if !loss.is_finite() {
            let detail = match batch {
                Batch::OneToN(b) => format!("queries {:?}", b.queries),
                Batch::Margin(b) => format!("positives {:?}", b.positives),
            };
            return Err(KgError::NonFinite {
                loss,
                epoch: 0,
                batch: 0,
                detail,
            });
        }
        Ok((loss, grads))
    }

    fn pass(
        &self,
        batch: &Batch,
        feats: &LiteralFeatureMatrix,
        opts: &PassOptions,
        grads: Option<&mut Gradients>,
    ) -> Result<f64> {
        match (batch, self.kind.regime()) {
            (Batch::OneToN(b), LossRegime::OneToN) if self.kind == ModelKind::Mtkgnn => {
                Ok(self.mtkgnn_pass(b, feats, opts, grads))
            }
            (Batch::OneToN(b), LossRegime::OneToN) => Ok(self.bilinear_pass(b, feats, opts, grads)),
            (Batch::Margin(b), LossRegime::Margin) => Ok(self.margin_pass(b, feats, opts, grads)),
            _ => Err(KgError::Config(format!(
                "{} cannot be trained on this batch type",
                self.kind
            ))),
        }
    }

    fn enrich_all(&self, feats: &LiteralFeatureMatrix) -> Enriched {
        let e = &self.params[ENT].value;
        let x = feats.values();
        let de = e.ncols();
        let w_h = &self.params[TRANSFORM].value;
        let mut gate = e.dot(&self.params[GATE_E].value.t());
        gate += &x.dot(&self.params[GATE_L].value.t());
        gate += &self.params[GATE_B].value;
        gate.mapv_inplace(sigmoid);
        let mut transform = e.dot(&w_h.slice(s![.., ..de]).t());
        transform += &x.dot(&w_h.slice(s![.., de..]).t());
        transform.mapv_inplace(f64::tanh);
        let mut out = e.clone();
        Zip::from(&mut out)
            .and(&gate)
            .and(&transform)
            .for_each(|o, &z, &h| *o = z * h + (1.0 - z) * *o);
        Enriched {
            out,
            gate,
            transform,
        }
    }

    fn enrich_backward(
        &self,
        en: &Enriched,
        feats: &LiteralFeatureMatrix,
        d_out: &Array2<f64>,
        grads: &mut Gradients,
    ) {
        let e = &self.params[ENT].value;
        let x = feats.values();
        let de = e.ncols();
        let w_h = &self.params[TRANSFORM].value;
        let mut d_gate_pre = d_out.clone();
        Zip::from(&mut d_gate_pre)
            .and(&en.gate)
            .and(&en.transform)
            .and(e)
            .for_each(|d, &z, &h, &ev| *d *= (h - ev) * z * (1.0 - z));
        let mut d_trans_pre = d_out.clone();
        Zip::from(&mut d_trans_pre)
            .and(&en.gate)
            .and(&en.transform)
            .for_each(|d, &z, &h| *d *= z * (1.0 - h * h));

        let mut d_e = d_out.clone();
        Zip::from(&mut d_e).and(&en.gate).for_each(|d, &z| *d *= 1.0 - z);
        d_e += &d_gate_pre.dot(&self.params[GATE_E].value);
        d_e += &d_trans_pre.dot(&w_h.slice(s![.., ..de]));
        grads.tables[ENT] += &d_e;
        grads.mark_all(ENT);

        grads.tables[GATE_E] += &d_gate_pre.t().dot(e);
        grads.tables[GATE_L] += &d_gate_pre.t().dot(x);
        grads.tables[GATE_B] += &d_gate_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
        grads.tables[TRANSFORM]
            .slice_mut(s![.., ..de])
            .scaled_add(1.0, &d_trans_pre.t().dot(e));
        grads.tables[TRANSFORM]
            .slice_mut(s![.., de..])
            .scaled_add(1.0, &d_trans_pre.t().dot(x));
        for t in [GATE_E, GATE_L, GATE_B, TRANSFORM] {
            grads.mark_all(t);
        }
    }

    /// `core x_2 r`: the `D x D` matrix a TuckER relation applies.
    pub(crate) fn tucker_matrix(&self, rel: ArrayView1<f64>) -> Array2<f64> {
        let core = &self.params[CORE].value;
        let de = core.nrows();
        let mut m = Array2::zeros((de, de));
        for (j, &r) in rel.iter().enumerate() {
            m.scaled_add(r, &core.slice(s![.., j * de..(j + 1) * de]));
        }
        m
    }

    fn bilinear_pass(
        &self,
        b: &OneToNBatch,
        feats: &LiteralFeatureMatrix,
        opts: &PassOptions,
        grads: Option<&mut Gradients>,
    ) -> f64 {
        let kind = self.kind;
        let ent = &self.params[ENT].value;
        let rel = &self.params[REL].value;
        let enriched = kind.is_literale().then(|| self.enrich_all(feats));
        let cand: ArrayView2<f64> = enriched.as_ref().map_or(ent.view(), |en| en.out.view());
        let (bsz, de) = (b.queries.len(), cand.ncols());

        let mut subj = Array2::zeros((bsz, de));
        for (i, &(s, _)) in b.queries.iter().enumerate() {
            subj.row_mut(i).assign(&cand.row(s));
        }
        if let Some(mask) = opts.input_mask {
            subj *= mask;
        }

        // Query vectors: score(s, p, c) = q . cand[c].
        let mut q = Array2::zeros((bsz, de));
        let mut tucker_groups: Vec<(usize, Vec<usize>, Array2<f64>)> = Vec::new();
        match kind {
            ModelKind::TuckER => {
                let mut by_rel: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                for (i, &(_, p)) in b.queries.iter().enumerate() {
                    by_rel.entry(p).or_default().push(i);
                }
                for (p, rows) in by_rel {
                    let m = self.tucker_matrix(rel.row(p));
                    for &i in &rows {
                        q.row_mut(i).assign(&subj.row(i).dot(&m));
                    }
                    tucker_groups.push((p, rows, m));
                }
            }
            _ if kind.is_complex() => {
                let d = de / 2;
                for (i, &(_, p)) in b.queries.iter().enumerate() {
                    let (sr, si) = (subj.slice(s![i, ..d]), subj.slice(s![i, d..]));
                    let (rr, ri) = (rel.slice(s![p, ..d]), rel.slice(s![p, d..]));
                    let mut row = q.row_mut(i);
                    for k in 0..d {
                        row[k] = sr[k] * rr[k] - si[k] * ri[k];
                        row[d + k] = si[k] * rr[k] + sr[k] * ri[k];
                    }
                }
            }
            _ => {
                for (i, &(_, p)) in b.queries.iter().enumerate() {
                    let mut row = q.row_mut(i);
                    row.assign(&subj.row(i));
                    row *= &rel.row(p);
                }
            }
        }
        if let Some(mask) = opts.hidden_mask {
            q *= mask;
        }

        let mut logits = q.dot(&cand.t());
        let x = feats.values();
        if kind == ModelKind::Kbln {
            let (w, c, sd) = (
                &self.params[KBLN_W].value,
                &self.params[KBLN_C].value,
                &self.params[KBLN_S].value,
            );
            for (i, &(s, p)) in b.queries.iter().enumerate() {
                for (cidx, l) in logits.row_mut(i).iter_mut().enumerate() {
                    for a in 0..x.ncols() {
                        let d = x[[s, a]] - x[[cidx, a]];
                        *l += w[[p, a]] * rbf(d, c[[p, a]], sd[[p, a]]);
                    }
                }
            }
        }

        let want_grad = grads.is_some();
        let loss = bce_mean(&mut logits, &b.labels, want_grad);
        let Some(grads) = grads else {
            return loss;
        };
        let dlogits = logits;

        if kind == ModelKind::Kbln {
            let (c, sd) = (&self.params[KBLN_C].value, &self.params[KBLN_S].value);
            let dw = &mut grads.tables[KBLN_W];
            for (i, &(s, p)) in b.queries.iter().enumerate() {
                for (cidx, g) in dlogits.row(i).iter().enumerate() {
                    for a in 0..x.ncols() {
                        let d = x[[s, a]] - x[[cidx, a]];
                        dw[[p, a]] += g * rbf(d, c[[p, a]], sd[[p, a]]);
                    }
                }
                grads.rows[KBLN_W][p] = true;
            }
        }

        let mut dq = dlogits.dot(&cand);
        let mut dcand = dlogits.t().dot(&q);
        if let Some(mask) = opts.hidden_mask {
            dq *= mask;
        }

        let mut dsubj = Array2::zeros((bsz, de));
        match kind {
            ModelKind::TuckER => {
                let core = &self.params[CORE].value;
                let dr_width = rel.ncols();
                for (p, rows, m) in &tucker_groups {
                    let mut dm = Array2::<f64>::zeros((de, de));
                    for &i in rows {
                        dsubj.row_mut(i).assign(&m.dot(&dq.row(i)));
                        let si = subj.row(i).insert_axis(Axis(1));
                        let dqi = dq.row(i).insert_axis(Axis(0));
                        dm += &si.dot(&dqi);
                    }
                    let r = rel.row(*p);
                    let mut dr = Array1::zeros(dr_width);
                    for j in 0..dr_width {
                        let block = core.slice(s![.., j * de..(j + 1) * de]);
                        dr[j] = (&block * &dm).sum();
                        grads.tables[CORE]
                            .slice_mut(s![.., j * de..(j + 1) * de])
                            .scaled_add(r[j], &dm);
                    }
                    grads.add_row(REL, *p, dr.view());
                }
                grads.mark_all(CORE);
            }
            _ if kind.is_complex() => {
                let d = de / 2;
                for (i, &(_, p)) in b.queries.iter().enumerate() {
                    let mut dr = Array1::zeros(de);
                    {
                        let (sr, si) = (subj.slice(s![i, ..d]), subj.slice(s![i, d..]));
                        let (rr, ri) = (rel.slice(s![p, ..d]), rel.slice(s![p, d..]));
                        let (gr, gi) = (dq.slice(s![i, ..d]), dq.slice(s![i, d..]));
                        let mut ds = dsubj.row_mut(i);
                        for k in 0..d {
                            ds[k] = gr[k] * rr[k] + gi[k] * ri[k];
                            ds[d + k] = -gr[k] * ri[k] + gi[k] * rr[k];
                            dr[k] = gr[k] * sr[k] + gi[k] * si[k];
                            dr[d + k] = -gr[k] * si[k] + gi[k] * sr[k];
                        }
                    }
                    grads.add_row(REL, p, dr.view());
                }
            }
            _ => {
                for (i, &(_, p)) in b.queries.iter().enumerate() {
                    let mut ds = dsubj.row_mut(i);
                    ds.assign(&dq.row(i));
                    ds *= &rel.row(p);
                    let dr = &dq.row(i) * &subj.row(i);
                    grads.add_row(REL, p, dr.view());
                }
            }
        }
        if let Some(mask) = opts.input_mask {
            dsubj *= mask;
        }
        for (i, &(s, _)) in b.queries.iter().enumerate() {
            dcand.row_mut(s).scaled_add(1.0, &dsubj.row(i));
        }

        match &enriched {
            Some(en) => self.enrich_backward(en, feats, &dcand, grads),
            None => {
                grads.tables[ENT] += &dcand;
                grads.mark_all(ENT);
            }
        }
        loss
    }

    fn mtkgnn_pass(
        &self,
        b: &OneToNBatch,
        feats: &LiteralFeatureMatrix,
        opts: &PassOptions,
        mut grads: Option<&mut Gradients>,
    ) -> f64 {
        let ent = &self.params[ENT].value;
        let rel = &self.params[REL].value;
        let de = ent.ncols();
        let w1 = &self.params[MT_W1].value;
        let (w_s, w_r, w_o) = (
            w1.slice(s![.., ..de]),
            w1.slice(s![.., de..2 * de]),
            w1.slice(s![.., 2 * de..]),
        );
        let b1 = self.params[MT_B1].value.row(0);
        let w2 = self.params[MT_W2].value.row(0);
        let b2 = self.params[MT_B2].value[[0, 0]];
        let bsz = b.queries.len();
        let h = w1.nrows();

        let mut subj = Array2::zeros((bsz, de));
        let mut relq = Array2::zeros((bsz, de));
        for (i, &(s, p)) in b.queries.iter().enumerate() {
            subj.row_mut(i).assign(&ent.row(s));
            relq.row_mut(i).assign(&rel.row(p));
        }
        if let Some(mask) = opts.input_mask {
            subj *= mask;
        }
        let mut pre_q = subj.dot(&w_s.t());
        pre_q += &relq.dot(&w_r.t());
        pre_q += &b1;
        let pre_c = ent.dot(&w_o.t());

        let ne = ent.nrows();
        let mut logits = Array2::zeros((bsz, ne));
        let mut act = vec![0.0; h];
        for i in 0..bsz {
            let a = pre_q.row(i);
            for c in 0..ne {
                let u = pre_c.row(c);
                let mut z = b2;
                for k in 0..h {
                    z += w2[k] * (a[k] + u[k]).tanh();
                }
                logits[[i, c]] = z;
            }
        }

        let want_grad = grads.is_some();
        let triple_loss = bce_mean(&mut logits, &b.labels, want_grad);

        let mut subject_items = Vec::new();
        let mut object_items = Vec::new();
        let x = feats.values();
        let present = feats.present();
        let mut seen_s = std::collections::BTreeSet::new();
        let mut seen_o = std::collections::BTreeSet::new();
        for (i, &(s, _)) in b.queries.iter().enumerate() {
            seen_s.insert(s);
            seen_o.extend(b.objects[i].iter().copied());
        }
        for (set, items) in [(&seen_s, &mut subject_items), (&seen_o, &mut object_items)] {
            for &e in set.iter() {
                for a in 0..x.ncols() {
                    if present[[e, a]] {
                        items.push((e, a, x[[e, a]]));
                    }
                }
            }
        }
        let attr_loss = self.attr_net(MT_SUBJ, &subject_items, grads.as_deref_mut(), opts.alpha)
            + self.attr_net(MT_OBJ, &object_items, grads.as_deref_mut(), opts.alpha);
        let loss = (1.0 - opts.alpha) * triple_loss + opts.alpha * attr_loss;

        let Some(grads) = grads else {
            return loss;
        };
        let mut dlogits = logits;
        dlogits *= 1.0 - opts.alpha;

        let mut d_pre_q = Array2::<f64>::zeros((bsz, h));
        let mut d_pre_c = Array2::<f64>::zeros((ne, h));
        let mut dw2 = Array1::<f64>::zeros(h);
        let mut db2 = 0.0;
        for i in 0..bsz {
            let a = pre_q.row(i);
            for c in 0..ne {
                let g = dlogits[[i, c]];
                db2 += g;
                let u = pre_c.row(c);
                for k in 0..h {
                    act[k] = (a[k] + u[k]).tanh();
                }
                let mut dc = d_pre_c.row_mut(c);
                for k in 0..h {
                    dw2[k] += g * act[k];
                    let dz = g * w2[k] * (1.0 - act[k] * act[k]);
                    d_pre_q[[i, k]] += dz;
                    dc[k] += dz;
                }
            }
        }
        grads.tables[MT_W2].row_mut(0).scaled_add(1.0, &dw2);
        grads.tables[MT_B2][[0, 0]] += db2;
        grads.tables[MT_B1].row_mut(0).scaled_add(1.0, &d_pre_q.sum_axis(Axis(0)));
        {
            let dw1 = &mut grads.tables[MT_W1];
            dw1.slice_mut(s![.., ..de]).scaled_add(1.0, &d_pre_q.t().dot(&subj));
            dw1.slice_mut(s![.., de..2 * de]).scaled_add(1.0, &d_pre_q.t().dot(&relq));
            dw1.slice_mut(s![.., 2 * de..]).scaled_add(1.0, &d_pre_c.t().dot(ent));
        }
        for t in [MT_W1, MT_B1, MT_W2, MT_B2] {
            grads.mark_all(t);
        }
        let mut dsubj = d_pre_q.dot(&w_s);
        if let Some(mask) = opts.input_mask {
            dsubj *= mask;
        }
        let drel = d_pre_q.dot(&w_r);
        grads.tables[ENT] += &d_pre_c.dot(&w_o);
        grads.mark_all(ENT);
        for (i, &(s, p)) in b.queries.iter().enumerate() {
            grads.add_row(ENT, s, dsubj.row(i));
            grads.add_row(REL, p, drel.row(i));
        }
        loss
    }

    /// Mean squared error of one attribute regression net over `items`
    /// `(entity, attr, target)`. Gradients are scaled by `weight`.
    fn attr_net(
        &self,
        first: usize,
        items: &[(usize, usize, f64)],
        grads: Option<&mut Gradients>,
        weight: f64,
    ) -> f64 {
        if items.is_empty() {
            return 0.0;
        }
        let ent = &self.params[ENT].value;
        let attr = &self.params[MT_ATTR].value;
        let de = ent.ncols();
        let v1 = &self.params[first].value;
        let c1 = self.params[first + 1].value.row(0);
        let v2 = self.params[first + 2].value.row(0);
        let c2 = self.params[first + 3].value[[0, 0]];
        let n = items.len() as f64;
        let mut total = 0.0;
        let mut grads = grads;
        for &(e, a, target) in items {
            let input = ndarray::concatenate![Axis(0), ent.row(e), attr.row(a)];
            let mut hid = v1.dot(&input);
            hid += &c1;
            hid.mapv_inplace(f64::tanh);
            let pred = v2.dot(&hid) + c2;
            let r = pred - target;
            total += r * r;
            if let Some(g) = grads.as_deref_mut() {
                let dpred = weight * 2.0 * r / n;
                g.tables[first + 3][[0, 0]] += dpred;
                g.tables[first + 2].row_mut(0).scaled_add(dpred, &hid);
                let dpre = Zip::from(&hid).and(&v2).map_collect(|&t, &w| dpred * w * (1.0 - t * t));
                g.tables[first + 1].row_mut(0).scaled_add(1.0, &dpre);
                g.tables[first] += &dpre.view().insert_axis(Axis(1)).dot(&input.view().insert_axis(Axis(0)));
                let dinput = dpre.dot(v1);
                g.add_row(ENT, e, dinput.slice(s![..de]));
                g.add_row(MT_ATTR, a, dinput.slice(s![de..]));
                for t in first..first + 4 {
                    g.mark_all(t);
                }
            }
        }
        total / n
    }

    fn margin_pass(
        &self,
        b: &MarginBatch,
        feats: &LiteralFeatureMatrix,
        opts: &PassOptions,
        mut grads: Option<&mut Gradients>,
    ) -> f64 {
        let ent = &self.params[ENT].value;
        let rel = &self.params[REL].value;
        let de = ent.ncols();
        let k = if b.positives.is_empty() {
            0
        } else {
            b.negatives.len() / b.positives.len()
        };
        let pairs = b.negatives.len();
        let mut diff = Array1::zeros(de);
        let distance = |t: &Triple, diff: &mut Array1<f64>| {
            diff.assign(&ent.row(t.subject));
            *diff += &rel.row(t.predicate);
            *diff -= &ent.row(t.object);
            diff.dot(diff).sqrt()
        };
        let mut total = 0.0;
        let mut dpos = Array1::zeros(de);
        for (j, neg) in b.negatives.iter().enumerate() {
            let pos = &b.positives[j / k];
            let d_pos = distance(pos, &mut dpos);
            let d_neg = distance(neg, &mut diff);
            let l = opts.margin + d_pos - d_neg;
            if l <= 0.0 {
                continue;
            }
            total += l;
            if let Some(g) = grads.as_deref_mut() {
                let scale = if self.kind == ModelKind::TransEA {
                    1.0 - opts.alpha
                } else {
                    1.0
                } / pairs as f64;
                for (t, d, dist, sign) in [(pos, &dpos, d_pos, 1.0), (neg, &diff, d_neg, -1.0)] {
                    if dist == 0.0 {
                        continue;
                    }
                    let u = d * (sign * scale / dist);
                    g.add_row(ENT, t.subject, u.view());
                    g.add_row(REL, t.predicate, u.view());
                    g.add_row(ENT, t.object, (-&u).view());
                }
            }
        }
        let rank_loss = if pairs == 0 { 0.0 } else { total / pairs as f64 };
        if self.kind != ModelKind::TransEA {
            return rank_loss;
        }

        let mut ents: Vec<usize> = b.positives.iter().flat_map(|t| [t.subject, t.object]).collect();
        ents.sort_unstable();
        ents.dedup();
        let x = feats.values();
        let present = feats.present();
        let items: Vec<(usize, usize)> = ents
            .iter()
            .flat_map(|&e| (0..x.ncols()).filter(move |&a| present[[e, a]]).map(move |a| (e, a)))
            .collect();
        let (aw, ab) = (&self.params[TEA_W].value, &self.params[TEA_B].value);
        let mut attr_total = 0.0;
        let n = items.len() as f64;
        for &(e, a) in &items {
            let r = aw.row(a).dot(&ent.row(e)) + ab[[a, 0]] - x[[e, a]];
            attr_total += r.abs();
            if let Some(g) = grads.as_deref_mut() {
                let sgn = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let c = opts.alpha * sgn / n;
                let ge = &aw.row(a) * c;
                let gw = &ent.row(e) * c;
                g.add_row(ENT, e, ge.view());
                g.add_row(TEA_W, a, gw.view());
                g.tables[TEA_B][[a, 0]] += c;
                g.rows[TEA_B][a] = true;
            }
        }
        let attr_loss = if items.is_empty() { 0.0 } else { attr_total / n };
        (1.0 - opts.alpha) * rank_loss + opts.alpha * attr_loss
    }

    /// TransEA's two loss terms `(L_E, L_A)` on a margin batch.
    pub fn transea_losses(&self, b: &MarginBatch, feats: &LiteralFeatureMatrix, margin: f64) -> (f64, f64) {
        let only_rank = PassOptions {
            margin,
            alpha: 0.0,
            ..Default::default()
        };
        let only_attr = PassOptions {
            margin,
            alpha: 1.0,
            ..Default::default()
        };
        (
            self.margin_pass(b, feats, &only_rank, None),
            self.margin_pass(b, feats, &only_attr, None),
        )
    }
}
