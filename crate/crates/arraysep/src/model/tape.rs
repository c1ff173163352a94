//! Define-by-run reverse-mode autodiff on dense f64 tensors.
//!
//! Every operation evaluates eagerly and records itself on the tape; ops
//! only reference earlier nodes, so reverse node order is a topological
//! order and `backward` is a single reverse sweep. The op set is exactly
//! what the separator and its losses need: conv2d, a frequency-mapping
//! linear layer, ELU, concat/slice/pad/crop plumbing, and the elementwise
//! pieces of the L1 spectrum losses.

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

/// Dense tensor, shape `(batch, channels, t, f)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        Self { shape, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: [1, 1, 1, 1],
            data: vec![v],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, t: usize, f: usize) -> usize {
        ((b * self.shape[1] + c) * self.shape[2] + t) * self.shape[3] + f
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, t: usize, f: usize) -> f64 {
        self.data[self.offset(b, c, t, f)]
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: VarId,
        weight: VarId,
        bias: VarId,
        stride: usize,
        pad: usize,
    },
    FreqLinear {
        input: VarId,
        weight: VarId,
        bias: VarId,
    },
    Elu {
        input: VarId,
    },
    Add {
        a: VarId,
        b: VarId,
    },
    Sub {
        a: VarId,
        b: VarId,
    },
    MulConst {
        input: VarId,
        konst: Tensor,
    },
    Scale {
        input: VarId,
        factor: f64,
    },
    Concat {
        inputs: Vec<VarId>,
    },
    Upsample2 {
        input: VarId,
    },
    PadReflect {
        input: VarId,
        pad_t: usize,
        pad_f: usize,
    },
    Crop {
        input: VarId,
        t: usize,
        f: usize,
    },
    SliceChannels {
        input: VarId,
        start: usize,
        len: usize,
    },
    Abs {
        input: VarId,
    },
    Hypot {
        a: VarId,
        b: VarId,
    },
    Mean {
        input: VarId,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradient tape. Create one per forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        VarId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` loss w.r.t. node `id`, if reached.
    pub fn grad(&self, id: VarId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn leaf(&mut self, value: Tensor) -> VarId {
        self.push(value, Op::Leaf)
    }

    pub fn conv2d(
        &mut self,
        input: VarId,
        weight: VarId,
        bias: VarId,
        stride: usize,
        pad: usize,
    ) -> VarId {
        let y = conv2d_forward(
            self.value(input),
            self.value(weight),
            self.value(bias),
            stride,
            pad,
        );
        self.push(
            y,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            },
        )
    }

    pub fn freq_linear(&mut self, input: VarId, weight: VarId, bias: VarId) -> VarId {
        let y = freq_linear_forward(self.value(input), self.value(weight), self.value(bias));
        self.push(
            y,
            Op::FreqLinear {
                input,
                weight,
                bias,
            },
        )
    }

    pub fn elu(&mut self, input: VarId) -> VarId {
        let x = self.value(input);
        let data = x
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { v.exp() - 1.0 })
            .collect();
        let y = Tensor::from_vec(x.shape, data);
        self.push(y, Op::Elu { input })
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape, tb.shape, "add shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let y = Tensor::from_vec(ta.shape, data);
        self.push(y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape, tb.shape, "sub shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x - y).collect();
        let y = Tensor::from_vec(ta.shape, data);
        self.push(y, Op::Sub { a, b })
    }

    /// Elementwise product with a constant (non-differentiated) tensor.
    pub fn mul_const(&mut self, input: VarId, konst: Tensor) -> VarId {
        let x = self.value(input);
        assert_eq!(x.shape, konst.shape, "mul_const shape mismatch");
        let data = x.data.iter().zip(&konst.data).map(|(a, k)| a * k).collect();
        let y = Tensor::from_vec(x.shape, data);
        self.push(y, Op::MulConst { input, konst })
    }

    pub fn scale(&mut self, input: VarId, factor: f64) -> VarId {
        let x = self.value(input);
        let data = x.data.iter().map(|v| v * factor).collect();
        let y = Tensor::from_vec(x.shape, data);
        self.push(y, Op::Scale { input, factor })
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, inputs: &[VarId]) -> VarId {
        assert!(!inputs.is_empty());
        let first = self.value(inputs[0]).shape;
        let mut channels = 0;
        for &id in inputs {
            let s = self.value(id).shape;
            assert_eq!(
                (s[0], s[2], s[3]),
                (first[0], first[2], first[3]),
                "concat shape mismatch"
            );
            channels += s[1];
        }
        let mut y = Tensor::zeros([first[0], channels, first[2], first[3]]);
        let plane = first[2] * first[3];
        for b in 0..first[0] {
            let mut co = 0;
            for &id in inputs {
                let x = self.value(id);
                let cin = x.shape[1];
                let src = x.offset(b, 0, 0, 0);
                let dst = y.offset(b, co, 0, 0);
                y.data[dst..dst + cin * plane]
                    .copy_from_slice(&x.data[src..src + cin * plane]);
                co += cin;
            }
        }
        self.push(
            y,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
        )
    }

    /// Nearest-neighbor 2x upsampling of the (t, f) plane.
    pub fn upsample2(&mut self, input: VarId) -> VarId {
        let x = self.value(input);
        let [b, c, t, f] = x.shape;
        let mut y = Tensor::zeros([b, c, 2 * t, 2 * f]);
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..2 * t {
                    let src = x.offset(bi, ci, ti / 2, 0);
                    let dst = y.offset(bi, ci, ti, 0);
                    for fi in 0..2 * f {
                        y.data[dst + fi] = x.data[src + fi / 2];
                    }
                }
            }
        }
        self.push(y, Op::Upsample2 { input })
    }

    /// Reflect-pads the tail of the t and f axes (used to reach sizes
    /// divisible by 2^depth). Pad lengths must be below the axis size.
    pub fn pad_reflect(&mut self, input: VarId, pad_t: usize, pad_f: usize) -> VarId {
        let x = self.value(input);
        let [b, c, t, f] = x.shape;
        assert!(pad_t < t && pad_f < f, "reflect pad larger than axis");
        let (t2, f2) = (t + pad_t, f + pad_f);
        let reflect = |i: usize, n: usize| if i < n { i } else { 2 * n - 2 - i };
        let mut y = Tensor::zeros([b, c, t2, f2]);
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..t2 {
                    let src = x.offset(bi, ci, reflect(ti, t), 0);
                    let dst = y.offset(bi, ci, ti, 0);
                    for fi in 0..f2 {
                        y.data[dst + fi] = x.data[src + reflect(fi, f)];
                    }
                }
            }
        }
        self.push(y, Op::PadReflect { input, pad_t, pad_f })
    }

    /// Crops the (t, f) plane to the given size from the origin.
    pub fn crop(&mut self, input: VarId, t: usize, f: usize) -> VarId {
        let x = self.value(input);
        let [b, c, t_in, f_in] = x.shape;
        assert!(t <= t_in && f <= f_in, "crop larger than input");
        let mut y = Tensor::zeros([b, c, t, f]);
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..t {
                    let src = x.offset(bi, ci, ti, 0);
                    let dst = y.offset(bi, ci, ti, 0);
                    y.data[dst..dst + f].copy_from_slice(&x.data[src..src + f]);
                }
            }
        }
        self.push(y, Op::Crop { input, t, f })
    }

    /// Selects a contiguous channel range.
    pub fn slice_channels(&mut self, input: VarId, start: usize, len: usize) -> VarId {
        let x = self.value(input);
        let [b, c, t, f] = x.shape;
        assert!(start + len <= c, "channel slice out of range");
        let plane = t * f;
        let mut y = Tensor::zeros([b, len, t, f]);
        for bi in 0..b {
            let src = x.offset(bi, start, 0, 0);
            let dst = y.offset(bi, 0, 0, 0);
            y.data[dst..dst + len * plane].copy_from_slice(&x.data[src..src + len * plane]);
        }
        self.push(y, Op::SliceChannels { input, start, len })
    }

    pub fn abs(&mut self, input: VarId) -> VarId {
        let x = self.value(input);
        let data = x.data.iter().map(|v| v.abs()).collect();
        let y = Tensor::from_vec(x.shape, data);
        self.push(y, Op::Abs { input })
    }

    /// Elementwise `sqrt(a^2 + b^2)`; the magnitude of a complex pair.
    pub fn hypot(&mut self, a: VarId, b: VarId) -> VarId {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape, tb.shape, "hypot shape mismatch");
        let data = ta
            .data
            .iter()
            .zip(&tb.data)
            .map(|(x, y)| (x * x + y * y).sqrt())
            .collect();
        let y = Tensor::from_vec(ta.shape, data);
        self.push(y, Op::Hypot { a, b })
    }

    /// Mean over all elements, producing a scalar node.
    pub fn mean(&mut self, input: VarId) -> VarId {
        let x = self.value(input);
        let m = x.data.iter().sum::<f64>() / x.numel() as f64;
        self.push(Tensor::scalar(m), Op::Mean { input })
    }

    /// Reverse sweep from a scalar loss. Gradients are then available via
    /// [`Tape::grad`] for every node that influences the loss.
    pub fn backward(&mut self, loss: VarId) {
        assert!(
            self.nodes[loss.0].value.is_scalar(),
            "backward requires a scalar loss"
        );
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(gout) = self.grads[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    stride,
                    pad,
                } => {
                    let (dx, dw, db) = conv2d_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weight.0].value,
                        *stride,
                        *pad,
                        &gout,
                    );
                    accumulate(&mut self.grads, input.0, dx);
                    accumulate(&mut self.grads, weight.0, dw);
                    accumulate(&mut self.grads, bias.0, db);
                }
                Op::FreqLinear {
                    input,
                    weight,
                    bias,
                } => {
                    let (dx, dw, db) = freq_linear_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weight.0].value,
                        &gout,
                    );
                    accumulate(&mut self.grads, input.0, dx);
                    accumulate(&mut self.grads, weight.0, dw);
                    accumulate(&mut self.grads, bias.0, db);
                }
                Op::Elu { input } => {
                    let x = &self.nodes[input.0].value;
                    let y = &self.nodes[id].value;
                    let mut dx = Tensor::zeros(x.shape);
                    for i in 0..x.numel() {
                        let d = if x.data[i] > 0.0 { 1.0 } else { y.data[i] + 1.0 };
                        dx.data[i] = gout.data[i] * d;
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut self.grads, a.0, gout.clone());
                    accumulate(&mut self.grads, b.0, gout.clone());
                }
                Op::Sub { a, b } => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut self.grads, a.0, gout.clone());
                    let mut neg = gout.clone();
                    for v in neg.data.iter_mut() {
                        *v = -*v;
                    }
                    accumulate(&mut self.grads, b.0, neg);
                }
                Op::MulConst { input, konst } => {
                    let mut dx = gout.clone();
                    for (g, k) in dx.data.iter_mut().zip(&konst.data) {
                        *g *= k;
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::Scale { input, factor } => {
                    let mut dx = gout.clone();
                    for g in dx.data.iter_mut() {
                        *g *= factor;
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::Concat { inputs } => {
                    let inputs = inputs.clone();
                    let out_shape = self.nodes[id].value.shape;
                    let plane = out_shape[2] * out_shape[3];
                    let mut co = 0;
                    for inp in inputs {
                        let shape = self.nodes[inp.0].value.shape;
                        let cin = shape[1];
                        let mut dx = Tensor::zeros(shape);
                        for b in 0..out_shape[0] {
                            let src =
                                ((b * out_shape[1] + co) * out_shape[2]) * out_shape[3];
                            let dst = dx.offset(b, 0, 0, 0);
                            dx.data[dst..dst + cin * plane]
                                .copy_from_slice(&gout.data[src..src + cin * plane]);
                        }
                        accumulate(&mut self.grads, inp.0, dx);
                        co += cin;
                    }
                }
                Op::Upsample2 { input } => {
                    let x_shape = self.nodes[input.0].value.shape;
                    let [b, c, t, f] = x_shape;
                    let mut dx = Tensor::zeros(x_shape);
                    for bi in 0..b {
                        for ci in 0..c {
                            for ti in 0..2 * t {
                                let src = gout.offset(bi, ci, ti, 0);
                                let dst = dx.offset(bi, ci, ti / 2, 0);
                                for fi in 0..2 * f {
                                    dx.data[dst + fi / 2] += gout.data[src + fi];
                                }
                            }
                        }
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::PadReflect {
                    input,
                    pad_t,
                    pad_f,
                } => {
                    let x_shape = self.nodes[input.0].value.shape;
                    let [b, c, t, f] = x_shape;
                    let (t2, f2) = (t + pad_t, f + pad_f);
                    let reflect = |i: usize, n: usize| if i < n { i } else { 2 * n - 2 - i };
                    let mut dx = Tensor::zeros(x_shape);
                    for bi in 0..b {
                        for ci in 0..c {
                            for ti in 0..t2 {
                                let src = gout.offset(bi, ci, ti, 0);
                                let dst = dx.offset(bi, ci, reflect(ti, t), 0);
                                for fi in 0..f2 {
                                    dx.data[dst + reflect(fi, f)] += gout.data[src + fi];
                                }
                            }
                        }
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::Crop { input, t, f } => {
                    let x_shape = self.nodes[input.0].value.shape;
                    let (t, f) = (*t, *f);
                    let mut dx = Tensor::zeros(x_shape);
                    for bi in 0..x_shape[0] {
                        for ci in 0..x_shape[1] {
                            for ti in 0..t {
                                let src = gout.offset(bi, ci, ti, 0);
                                let dst = dx.offset(bi, ci, ti, 0);
                                dx.data[dst..dst + f].copy_from_slice(&gout.data[src..src + f]);
                            }
                        }
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::SliceChannels { input, start, len } => {
                    let x_shape = self.nodes[input.0].value.shape;
                    let (start, len) = (*start, *len);
                    let plane = x_shape[2] * x_shape[3];
                    let mut dx = Tensor::zeros(x_shape);
                    for b in 0..x_shape[0] {
                        let dst = dx.offset(b, start, 0, 0);
                        let src = b * len * plane;
                        dx.data[dst..dst + len * plane]
                            .copy_from_slice(&gout.data[src..src + len * plane]);
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::Abs { input } => {
                    let x = &self.nodes[input.0].value;
                    let mut dx = Tensor::zeros(x.shape);
                    for i in 0..x.numel() {
                        dx.data[i] = gout.data[i] * x.data[i].signum() * (x.data[i] != 0.0) as u8 as f64;
                    }
                    accumulate(&mut self.grads, input.0, dx);
                }
                Op::Hypot { a, b } => {
                    let (a, b) = (*a, *b);
                    let ta = &self.nodes[a.0].value;
                    let tb = &self.nodes[b.0].value;
                    let y = &self.nodes[id].value;
                    let mut da = Tensor::zeros(ta.shape);
                    let mut db = Tensor::zeros(tb.shape);
                    for i in 0..ta.numel() {
                        let h = y.data[i].max(1e-12);
                        da.data[i] = gout.data[i] * ta.data[i] / h;
                        db.data[i] = gout.data[i] * tb.data[i] / h;
                    }
                    accumulate(&mut self.grads, a.0, da);
                    accumulate(&mut self.grads, b.0, db);
                }
                Op::Mean { input } => {
                    let x_shape = self.nodes[input.0].value.shape;
                    let n: usize = x_shape.iter().product();
                    let g = gout.item() / n as f64;
                    let dx = Tensor::from_vec(x_shape, vec![g; n]);
                    accumulate(&mut self.grads, input.0, dx);
                }
            }
            self.grads[id] = Some(gout);
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, delta: Tensor) {
    match &mut grads[id] {
        Some(g) => {
            debug_assert_eq!(g.shape, delta.shape);
            for (a, d) in g.data.iter_mut().zip(&delta.data) {
                *a += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn conv_out_len(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad - k) / stride + 1
}

fn conv2d_forward(x: &Tensor, w: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Tensor {
    let [bs, cin, t_in, f_in] = x.shape;
    let [cout, cin_w, kh, kw] = w.shape;
    assert_eq!(cin, cin_w, "conv2d channel mismatch");
    assert_eq!(bias.numel(), cout, "conv2d bias size");
    let t_out = conv_out_len(t_in, kh, stride, pad);
    let f_out = conv_out_len(f_in, kw, stride, pad);
    let mut y = Tensor::zeros([bs, cout, t_out, f_out]);

    for b in 0..bs {
        for co in 0..cout {
            let base = y.offset(b, co, 0, 0);
            y.data[base..base + t_out * f_out].fill(bias.data[co]);
            for ci in 0..cin {
                for kh_i in 0..kh {
                    for kw_i in 0..kw {
                        let wv = w.at(co, ci, kh_i, kw_i);
                        if wv == 0.0 {
                            continue;
                        }
                        let f_shift = kw_i as isize - pad as isize;
                        for to in 0..t_out {
                            let ti = (to * stride + kh_i) as isize - pad as isize;
                            if ti < 0 || ti as usize >= t_in {
                                continue;
                            }
                            let in_base = x.offset(b, ci, ti as usize, 0);
                            let out_base = y.offset(b, co, to, 0);
                            if stride == 1 {
                                let fo_start = (-f_shift).max(0) as usize;
                                let fo_end =
                                    ((f_in as isize - f_shift).min(f_out as isize)).max(0) as usize;
                                for fo in fo_start..fo_end {
                                    y.data[out_base + fo] +=
                                        wv * x.data[in_base + (fo as isize + f_shift) as usize];
                                }
                            } else {
                                for fo in 0..f_out {
                                    let fi = (fo * stride) as isize + f_shift;
                                    if fi >= 0 && (fi as usize) < f_in {
                                        y.data[out_base + fo] += wv * x.data[in_base + fi as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    gout: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let [bs, cin, t_in, f_in] = x.shape;
    let [cout, _, kh, kw] = w.shape;
    let [_, _, t_out, f_out] = gout.shape;
    let mut dx = Tensor::zeros(x.shape);
    let mut dw = Tensor::zeros(w.shape);
    let mut db = Tensor::zeros([1, cout, 1, 1]);

    for b in 0..bs {
        for co in 0..cout {
            let g_base_plane = gout.offset(b, co, 0, 0);
            db.data[co] += gout.data[g_base_plane..g_base_plane + t_out * f_out]
                .iter()
                .sum::<f64>();
            for ci in 0..cin {
                for kh_i in 0..kh {
                    for kw_i in 0..kw {
                        let wv = w.at(co, ci, kh_i, kw_i);
                        let f_shift = kw_i as isize - pad as isize;
                        let mut wgrad = 0.0;
                        for to in 0..t_out {
                            let ti = (to * stride + kh_i) as isize - pad as isize;
                            if ti < 0 || ti as usize >= t_in {
                                continue;
                            }
                            let in_base = x.offset(b, ci, ti as usize, 0);
                            let out_base = gout.offset(b, co, to, 0);
                            if stride == 1 {
                                let fo_start = (-f_shift).max(0) as usize;
                                let fo_end =
                                    ((f_in as isize - f_shift).min(f_out as isize)).max(0) as usize;
                                for fo in fo_start..fo_end {
                                    let fi = (fo as isize + f_shift) as usize;
                                    let g = gout.data[out_base + fo];
                                    wgrad += g * x.data[in_base + fi];
                                    dx.data[in_base + fi] += g * wv;
                                }
                            } else {
                                for fo in 0..f_out {
                                    let fi = (fo * stride) as isize + f_shift;
                                    if fi >= 0 && (fi as usize) < f_in {
                                        let g = gout.data[out_base + fo];
                                        wgrad += g * x.data[in_base + fi as usize];
                                        dx.data[in_base + fi as usize] += g * wv;
                                    }
                                }
                            }
                        }
                        let widx = w.offset(co, ci, kh_i, kw_i);
                        dw.data[widx] += wgrad;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

fn freq_linear_forward(x: &Tensor, w: &Tensor, bias: &Tensor) -> Tensor {
    let [bs, c, t, f] = x.shape;
    assert_eq!(w.shape, [1, 1, f, f], "freq_linear weight must be FxF");
    assert_eq!(bias.numel(), f, "freq_linear bias size");
    let mut y = Tensor::zeros(x.shape);
    for b in 0..bs {
        for ci in 0..c {
            for ti in 0..t {
                let xin = x.offset(b, ci, ti, 0);
                let x_row = &x.data[xin..xin + f];
                let yout = xin; // same layout
                for fo in 0..f {
                    let w_row = &w.data[fo * f..(fo + 1) * f];
                    let mut acc = bias.data[fo];
                    for fi in 0..f {
                        acc += w_row[fi] * x_row[fi];
                    }
                    y.data[yout + fo] = acc;
                }
            }
        }
    }
    y
}

fn freq_linear_backward(x: &Tensor, w: &Tensor, gout: &Tensor) -> (Tensor, Tensor, Tensor) {
    let [bs, c, t, f] = x.shape;
    let mut dx = Tensor::zeros(x.shape);
    let mut dw = Tensor::zeros(w.shape);
    let mut db = Tensor::zeros([1, 1, 1, f]);
    for b in 0..bs {
        for ci in 0..c {
            for ti in 0..t {
                let base = x.offset(b, ci, ti, 0);
                let x_row = &x.data[base..base + f];
                let g_row = &gout.data[base..base + f];
                for fo in 0..f {
                    let g = g_row[fo];
                    if g == 0.0 {
                        continue;
                    }
                    db.data[fo] += g;
                    let w_row = &w.data[fo * f..(fo + 1) * f];
                    let dw_row = &mut dw.data[fo * f..(fo + 1) * f];
                    let dx_row = &mut dx.data[base..base + f];
                    for fi in 0..f {
                        dw_row[fi] += g * x_row[fi];
                        dx_row[fi] += g * w_row[fi];
                    }
                }
            }
        }
    }
    (dx, dw, db)
}
