//! Define-by-run computation record with reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass eagerly. Parameters
//! enter through [`Tape::param`]; whether they are tracked depends on whether
//! their store was marked trainable, which is how a frozen backbone and a
//! trainable branch coexist on one tape. [`Tape::backward`] walks the record
//! once in reverse and returns per-parameter gradients.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::kernels::{
    conv1d_backward, conv1d_forward, conv_out_len, group_norm_backward, group_norm_forward,
    silu_backward, silu_forward, GroupNormCache,
};
use crate::numerics::real::Real;
use crate::numerics::tensor::{ParamRef, ParamStore, Tensor};

/// Handle to a value on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<R: Real> {
    Leaf,
    Conv1d { x: Var, w: Var, b: Var, c_in: usize, c_out: usize, k: usize, t_in: usize, stride: usize },
    GroupNorm { x: Var, gamma: Var, beta: Var, channels: usize, t: usize, groups: usize, cache: GroupNormCache<R> },
    Silu { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    ScalarMul { x: Var, c: R },
    Linear { x: Var, w: Var, b: Var, n_in: usize, n_out: usize },
    RowSelect { table: Var, row: usize, width: usize },
    BroadcastTime { v: Var, t: usize },
    Concat { a: Var, b: Var, c_a: usize, t: usize },
    Upsample2 { x: Var, c: usize, t: usize },
    ScaleShift { x: Var, scale: Var, shift: Var, c: usize, t: usize },
    SumAll { x: Var },
    MeanAll { x: Var },
}

struct Node<R: Real> {
    value: Vec<R>,
    shape: Vec<usize>,
    tracked: bool,
    op: Op<R>,
}

/// Gradients keyed by (store tag, parameter index), produced by one backward.
pub struct Gradients<R: Real> {
    map: HashMap<(u32, usize), Vec<R>>,
}

impl<R: Real> Gradients<R> {
    pub fn get(&self, r: ParamRef) -> Option<&[R]> {
        self.map.get(&(r.store_tag(), r.index())).map(|v| v.as_slice())
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Adds `scale` times these gradients into the store's grad buffers,
    /// walking the store in index order so accumulation is deterministic.
    pub fn accumulate_into(&self, store: &mut ParamStore<R>, scale: R) -> Result<()> {
        for idx in 0..store.len() {
            if let Some(g) = self.map.get(&(store.tag(), idx)) {
                store.tensor_at_mut(idx).accumulate_grad(g, scale)?;
            }
        }
        Ok(())
    }
}

pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
    trainable_tags: Vec<u32>,
    param_vars: HashMap<(u32, usize), Var>,
    param_of_node: HashMap<usize, (u32, usize)>,
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            trainable_tags: Vec::new(),
            param_vars: HashMap::new(),
            param_of_node: HashMap::new(),
        }
    }

    /// Parameters of this store will be gradient-tracked on this tape.
    pub fn mark_trainable(&mut self, store_tag: u32) {
        if !self.trainable_tags.contains(&store_tag) {
            self.trainable_tags.push(store_tag);
        }
    }

    pub fn value(&self, v: Var) -> &[R] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<R> {
        Tensor::from_vec(&self.nodes[v.0].shape, self.nodes[v.0].value.clone())
            .expect("tape node shape is consistent")
    }

    fn push(&mut self, value: Vec<R>, shape: Vec<usize>, tracked: bool, op: Op<R>) -> Var {
        self.nodes.push(Node { value, shape, tracked, op });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Untracked input value.
    pub fn constant(&mut self, t: &Tensor<R>) -> Var {
        self.push(t.data().to_vec(), t.shape().to_vec(), false, Op::Leaf)
    }

    /// Parameter leaf; memoized so one parameter maps to one node per tape.
    pub fn param(&mut self, store: &ParamStore<R>, r: ParamRef) -> Var {
        if let Some(&v) = self.param_vars.get(&(r.store_tag(), r.index())) {
            return v;
        }
        let t = store.get(r);
        let tracked = self.trainable_tags.contains(&r.store_tag());
        let v = self.push(t.data().to_vec(), t.shape().to_vec(), tracked, Op::Leaf);
        self.param_vars.insert((r.store_tag(), r.index()), v);
        self.param_of_node.insert(v.0, (r.store_tag(), r.index()));
        v
    }

    fn expect_map(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::Dimension(format!("{what}: expected a CxT map, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    /// Strided 1-D convolution with same padding; kernel width must be odd.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let (c_in, t_in) = self.expect_map(x, "conv1d input")?;
        let ws = self.shape(w).to_vec();
        if ws.len() != 3 {
            return Err(Error::Dimension(format!("conv1d weight: expected CxCxK, got {ws:?}")));
        }
        let (c_out, w_cin, k) = (ws[0], ws[1], ws[2]);
        if k % 2 == 0 {
            return Err(Error::Config(format!("conv1d kernel width {k} must be odd")));
        }
        if w_cin != c_in {
            return Err(Error::Dimension(format!(
                "conv1d: input has {c_in} channels, weight expects {w_cin}"
            )));
        }
        if self.shape(b) != [c_out] {
            return Err(Error::Dimension(format!(
                "conv1d bias: expected [{c_out}], got {:?}",
                self.shape(b)
            )));
        }
        let out = conv1d_forward(
            self.value(x),
            self.value(w),
            self.value(b),
            c_in,
            c_out,
            k,
            t_in,
            stride,
        );
        let t_out = conv_out_len(t_in, stride);
        let tracked = self.tracked(x) || self.tracked(w) || self.tracked(b);
        Ok(self.push(out, vec![c_out, t_out], tracked, Op::Conv1d { x, w, b, c_in, c_out, k, t_in, stride }))
    }

    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize) -> Result<Var> {
        let (c, t) = self.expect_map(x, "group_norm input")?;
        if c % groups != 0 {
            return Err(Error::Config(format!("group_norm: {groups} groups do not divide {c} channels")));
        }
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::Dimension("group_norm: affine parameters must be [C]".into()));
        }
        let (out, cache) =
            group_norm_forward(self.value(x), self.value(gamma), self.value(beta), c, t, groups, 1e-5);
        let tracked = self.tracked(x) || self.tracked(gamma) || self.tracked(beta);
        Ok(self.push(out, vec![c, t], tracked, Op::GroupNorm { x, gamma, beta, channels: c, t, groups, cache }))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let out = silu_forward(self.value(x));
        let shape = self.shape(x).to_vec();
        let tracked = self.tracked(x);
        self.push(out, shape, tracked, Op::Silu { x })
    }

    fn binary_same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension(format!(
                "{what}: shape {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "add")?;
        let out: Vec<R> =
            self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x + *y).collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, shape, tracked, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "sub")?;
        let out: Vec<R> =
            self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x - *y).collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, shape, tracked, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape(a, b, "mul")?;
        let out: Vec<R> =
            self.value(a).iter().zip(self.value(b)).map(|(x, y)| *x * *y).collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, shape, tracked, Op::Mul { a, b }))
    }

    pub fn scalar_mul(&mut self, x: Var, c: R) -> Var {
        let out: Vec<R> = self.value(x).iter().map(|v| *v * c).collect();
        let shape = self.shape(x).to_vec();
        let tracked = self.tracked(x);
        self.push(out, shape, tracked, Op::ScalarMul { x, c })
    }

    /// Dense layer on a vector: y = W x + b.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 1 || ws.len() != 2 || ws[1] != xs[0] {
            return Err(Error::Dimension(format!("linear: x {xs:?} vs w {ws:?}")));
        }
        let (n_out, n_in) = (ws[0], ws[1]);
        if self.shape(b) != [n_out] {
            return Err(Error::Dimension("linear: bias must be [n_out]".into()));
        }
        let mut out = self.value(b).to_vec();
        {
            let xv = self.value(x);
            let wv = self.value(w);
            for (o, ov) in out.iter_mut().enumerate() {
                let row = &wv[o * n_in..(o + 1) * n_in];
                let mut acc = R::ZERO;
                for (wi, xi) in row.iter().zip(xv) {
                    acc += *wi * *xi;
                }
                *ov += acc;
            }
        }
        let tracked = self.tracked(x) || self.tracked(w) || self.tracked(b);
        Ok(self.push(out, vec![n_out], tracked, Op::Linear { x, w, b, n_in, n_out }))
    }

    /// Selects one row of an SxD table (embedding lookup).
    pub fn row_select(&mut self, table: Var, row: usize) -> Result<Var> {
        let ts = self.shape(table).to_vec();
        if ts.len() != 2 {
            return Err(Error::Dimension(format!("row_select: expected SxD table, got {ts:?}")));
        }
        if row >= ts[0] {
            return Err(Error::Contract(format!("row_select: row {row} out of {}", ts[0])));
        }
        let width = ts[1];
        let out = self.value(table)[row * width..(row + 1) * width].to_vec();
        let tracked = self.tracked(table);
        Ok(self.push(out, vec![width], tracked, Op::RowSelect { table, row, width }))
    }

    /// Repeats a [C] vector across T frames into a CxT map.
    pub fn broadcast_time(&mut self, v: Var, t: usize) -> Result<Var> {
        let vs = self.shape(v).to_vec();
        if vs.len() != 1 {
            return Err(Error::Dimension(format!("broadcast_time: expected [C], got {vs:?}")));
        }
        let c = vs[0];
        let mut out = vec![R::ZERO; c * t];
        for (ch, val) in self.value(v).to_vec().into_iter().enumerate() {
            out[ch * t..(ch + 1) * t].iter_mut().for_each(|o| *o = val);
        }
        let tracked = self.tracked(v);
        Ok(self.push(out, vec![c, t], tracked, Op::BroadcastTime { v, t }))
    }

    /// Channel-wise concatenation of two CxT maps with equal T.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (c_a, t_a) = self.expect_map(a, "concat lhs")?;
        let (c_b, t_b) = self.expect_map(b, "concat rhs")?;
        if t_a != t_b {
            return Err(Error::Dimension(format!("concat: time {t_a} vs {t_b}")));
        }
        let mut out = Vec::with_capacity((c_a + c_b) * t_a);
        out.extend_from_slice(self.value(a));
        out.extend_from_slice(self.value(b));
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, vec![c_a + c_b, t_a], tracked, Op::Concat { a, b, c_a, t: t_a }))
    }

    /// Nearest-neighbor 2x upsampling along time.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let (c, t) = self.expect_map(x, "upsample2 input")?;
        let xv = self.value(x);
        let mut out = vec![R::ZERO; c * t * 2];
        for ch in 0..c {
            for ti in 0..t {
                let v = xv[ch * t + ti];
                out[ch * 2 * t + 2 * ti] = v;
                out[ch * 2 * t + 2 * ti + 1] = v;
            }
        }
        let tracked = self.tracked(x);
        Ok(self.push(out, vec![c, 2 * t], tracked, Op::Upsample2 { x, c, t }))
    }

    /// Feature-wise affine from conditioning: y[c,t] = x[c,t]*(1+scale[c]) + shift[c].
    pub fn scale_shift(&mut self, x: Var, scale: Var, shift: Var) -> Result<Var> {
        let (c, t) = self.expect_map(x, "scale_shift input")?;
        if self.shape(scale) != [c] || self.shape(shift) != [c] {
            return Err(Error::Dimension("scale_shift: scale/shift must be [C]".into()));
        }
        let xv = self.value(x);
        let sv = self.value(scale);
        let hv = self.value(shift);
        let mut out = vec![R::ZERO; c * t];
        for ch in 0..c {
            let s = R::ONE + sv[ch];
            let h = hv[ch];
            for ti in 0..t {
                out[ch * t + ti] = xv[ch * t + ti] * s + h;
            }
        }
        let tracked = self.tracked(x) || self.tracked(scale) || self.tracked(shift);
        Ok(self.push(out, vec![c, t], tracked, Op::ScaleShift { x, scale, shift, c, t }))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let mut acc = R::ZERO;
        for v in self.value(x) {
            acc += *v;
        }
        let tracked = self.tracked(x);
        self.push(vec![acc], vec![1], tracked, Op::SumAll { x })
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        let mut acc = R::ZERO;
        for v in self.value(x) {
            acc += *v;
        }
        let tracked = self.tracked(x);
        self.push(vec![acc / R::of(n as f64)], vec![1], tracked, Op::MeanAll { x })
    }

    /// Reverse pass from a scalar loss. Returns gradients for every tracked
    /// parameter leaf; constants and frozen parameters get none.
    pub fn backward(&self, loss: Var) -> Result<Gradients<R>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<R>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![R::ONE]);

        for id in (0..=loss.0).rev() {
            if !self.nodes[id].tracked {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.dispatch_backward(id, &g, &mut grads);
            if self.param_of_node.contains_key(&id) {
                grads[id] = Some(g); // keep leaf grads for extraction
            }
        }

        let mut map = HashMap::new();
        for (&node, &key) in &self.param_of_node {
            if self.nodes[node].tracked {
                if let Some(g) = grads[node].take() {
                    map.insert(key, g);
                }
            }
        }
        Ok(Gradients { map })
    }

    fn add_grad(&self, grads: &mut [Option<Vec<R>>], v: Var, piece: &[R]) {
        if !self.nodes[v.0].tracked {
            return;
        }
        let slot = &mut grads[v.0];
        match slot {
            Some(acc) => {
                for (a, p) in acc.iter_mut().zip(piece) {
                    *a += *p;
                }
            }
            None => *slot = Some(piece.to_vec()),
        }
    }

    fn grad_buf<'a>(&self, grads: &'a mut [Option<Vec<R>>], v: Var) -> Option<&'a mut [R]> {
        if !self.nodes[v.0].tracked {
            return None;
        }
        let n = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![R::ZERO; n]).as_mut_slice())
    }

    fn dispatch_backward(&self, id: usize, g: &[R], grads: &mut Vec<Option<Vec<R>>>) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, c_in, c_out, k, t_in, stride } => {
                // Split borrows: compute into scratch buffers, then merge.
                let mut dx = if self.tracked(*x) { Some(vec![R::ZERO; self.nodes[x.0].value.len()]) } else { None };
                let mut dw = if self.tracked(*w) { Some(vec![R::ZERO; self.nodes[w.0].value.len()]) } else { None };
                let mut db = if self.tracked(*b) { Some(vec![R::ZERO; self.nodes[b.0].value.len()]) } else { None };
                conv1d_backward(
                    g,
                    &self.nodes[x.0].value,
                    &self.nodes[w.0].value,
                    *c_in,
                    *c_out,
                    *k,
                    *t_in,
                    *stride,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                if let Some(dx) = dx {
                    self.add_grad(grads, *x, &dx);
                }
                if let Some(dw) = dw {
                    self.add_grad(grads, *w, &dw);
                }
                if let Some(db) = db {
                    self.add_grad(grads, *b, &db);
                }
            }
            Op::GroupNorm { x, gamma, beta, channels, t, groups, cache } => {
                let mut dx = if self.tracked(*x) { Some(vec![R::ZERO; self.nodes[x.0].value.len()]) } else { None };
                let mut dgamma = if self.tracked(*gamma) { Some(vec![R::ZERO; *channels]) } else { None };
                let mut dbeta = if self.tracked(*beta) { Some(vec![R::ZERO; *channels]) } else { None };
                group_norm_backward(
                    g,
                    &self.nodes[x.0].value,
                    &self.nodes[gamma.0].value,
                    cache,
                    *channels,
                    *t,
                    *groups,
                    dx.as_deref_mut(),
                    dgamma.as_deref_mut(),
                    dbeta.as_deref_mut(),
                );
                if let Some(dx) = dx {
                    self.add_grad(grads, *x, &dx);
                }
                if let Some(dg) = dgamma {
                    self.add_grad(grads, *gamma, &dg);
                }
                if let Some(db) = dbeta {
                    self.add_grad(grads, *beta, &db);
                }
            }
            Op::Silu { x } => {
                if let Some(dx) = self.grad_buf(grads, *x) {
                    silu_backward(g, &self.nodes[x.0].value, dx);
                }
            }
            Op::Add { a, b } => {
                self.add_grad(grads, *a, g);
                self.add_grad(grads, *b, g);
            }
            Op::Sub { a, b } => {
                self.add_grad(grads, *a, g);
                if self.tracked(*b) {
                    let neg: Vec<R> = g.iter().map(|v| -*v).collect();
                    self.add_grad(grads, *b, &neg);
                }
            }
            Op::Mul { a, b } => {
                if self.tracked(*a) {
                    let da: Vec<R> =
                        g.iter().zip(&self.nodes[b.0].value).map(|(gv, bv)| *gv * *bv).collect();
                    self.add_grad(grads, *a, &da);
                }
                if self.tracked(*b) {
                    let db: Vec<R> =
                        g.iter().zip(&self.nodes[a.0].value).map(|(gv, av)| *gv * *av).collect();
                    self.add_grad(grads, *b, &db);
                }
            }
            Op::ScalarMul { x, c } => {
                if self.tracked(*x) {
                    let dx: Vec<R> = g.iter().map(|v| *v * *c).collect();
                    self.add_grad(grads, *x, &dx);
                }
            }
            Op::Linear { x, w, b, n_in, n_out } => {
                if self.tracked(*x) {
                    let wv = &self.nodes[w.0].value;
                    let mut dx = vec![R::ZERO; *n_in];
                    for o in 0..*n_out {
                        let gv = g[o];
                        let row = &wv[o * n_in..(o + 1) * n_in];
                        for (d, wi) in dx.iter_mut().zip(row) {
                            *d += gv * *wi;
                        }
                    }
                    self.add_grad(grads, *x, &dx);
                }
                if self.tracked(*w) {
                    let xv = &self.nodes[x.0].value;
                    let mut dw = vec![R::ZERO; n_in * n_out];
                    for o in 0..*n_out {
                        let gv = g[o];
                        for (i, xi) in xv.iter().enumerate() {
                            dw[o * n_in + i] = gv * *xi;
                        }
                    }
                    self.add_grad(grads, *w, &dw);
                }
                self.add_grad(grads, *b, g);
            }
            Op::RowSelect { table, row, width } => {
                if self.tracked(*table) {
                    let mut dt = vec![R::ZERO; self.nodes[table.0].value.len()];
                    dt[row * width..(row + 1) * width].copy_from_slice(g);
                    self.add_grad(grads, *table, &dt);
                }
            }
            Op::BroadcastTime { v, t } => {
                if self.tracked(*v) {
                    let c = self.nodes[v.0].value.len();
                    let mut dv = vec![R::ZERO; c];
                    for (ch, d) in dv.iter_mut().enumerate() {
                        for ti in 0..*t {
                            *d += g[ch * t + ti];
                        }
                    }
                    self.add_grad(grads, *v, &dv);
                }
            }
            Op::Concat { a, b, c_a, t } => {
                let split = c_a * t;
                self.add_grad(grads, *a, &g[..split]);
                self.add_grad(grads, *b, &g[split..]);
            }
            Op::Upsample2 { x, c, t } => {
                if self.tracked(*x) {
                    let mut dx = vec![R::ZERO; c * t];
                    for ch in 0..*c {
                        for ti in 0..*t {
                            dx[ch * t + ti] =
                                g[ch * 2 * t + 2 * ti] + g[ch * 2 * t + 2 * ti + 1];
                        }
                    }
                    self.add_grad(grads, *x, &dx);
                }
            }
            Op::ScaleShift { x, scale, shift, c, t } => {
                let sv = &self.nodes[scale.0].value;
                if self.tracked(*x) {
                    let mut dx = vec![R::ZERO; c * t];
                    for ch in 0..*c {
                        let s = R::ONE + sv[ch];
                        for ti in 0..*t {
                            dx[ch * t + ti] = g[ch * t + ti] * s;
                        }
                    }
                    self.add_grad(grads, *x, &dx);
                }
                if self.tracked(*scale) {
                    let xv = &self.nodes[x.0].value;
                    let mut ds = vec![R::ZERO; *c];
                    for (ch, d) in ds.iter_mut().enumerate() {
                        for ti in 0..*t {
                            *d += g[ch * t + ti] * xv[ch * t + ti];
                        }
                    }
                    self.add_grad(grads, *scale, &ds);
                }
                if self.tracked(*shift) {
                    let mut dh = vec![R::ZERO; *c];
                    for (ch, d) in dh.iter_mut().enumerate() {
                        for ti in 0..*t {
                            *d += g[ch * t + ti];
                        }
                    }
                    self.add_grad(grads, *shift, &dh);
                }
            }
            Op::SumAll { x } => {
                if self.tracked(*x) {
                    let n = self.nodes[x.0].value.len();
                    let dx = vec![g[0]; n];
                    self.add_grad(grads, *x, &dx);
                }
            }
            Op::MeanAll { x } => {
                if self.tracked(*x) {
                    let n = self.nodes[x.0].value.len();
                    let dx = vec![g[0] / R::of(n as f64); n];
                    self.add_grad(grads, *x, &dx);
                }
            }
        }
    }
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}
