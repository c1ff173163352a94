//! Dense-UNet mask estimator.
//!
//! Encoder/decoder levels with stride-2 down convs and nearest-neighbor
//! up convs wrap densely connected blocks; the middle layer of each block
//! is a frequency-mapping layer (a learned full mixing along the
//! frequency axis, shared across channels) instead of a convolution.
//! Input is the stacked real/imaginary mixture spectrograms of all
//! microphones; output is one complex mask per speaker, applied to the
//! reference-channel mixture spectrogram downstream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Tensor, VarId};
use super::ModelError;

/// Input featurization for the stacked multichannel spectrograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputFeatures {
    /// Real and imaginary parts of every channel as-is (the full-scale
    /// formulation; large networks learn cross-channel phase from it).
    RawRi,
    /// Reference channel as-is plus the remaining channels
    /// phase-and-magnitude referenced to it,
    /// `X_m = Y_m conj(Y_0) / (|Y_0|^2 + eps)`. This makes inter-channel
    /// phase (the spatial cue) an explicit input, which a desk-scale
    /// network can use within a desk-scale training budget: a linear
    /// combination of these features already equals the complex mask of a
    /// beamformed estimate.
    #[default]
    PhaseReferenced,
}

/// Architecture knobs. The toy default trains on a laptop; the full-scale
/// variant (depth 4, 9 blocks, 5 convs per block, 64 channels) is
/// expressible but far outside desk budgets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatorConfig {
    pub n_speakers: usize,
    pub n_mics: usize,
    /// Down/upsampling levels; blocks total 2*depth + 1.
    pub depth: usize,
    /// Layers per dense block, the middle one being the frequency
    /// mapping.
    pub convs_per_block: usize,
    /// Channels added by each conv layer.
    pub growth: usize,
    /// One-sided spectrogram bins the model is built for.
    pub n_bins: usize,
    #[serde(default)]
    pub input_features: InputFeatures,
}

impl SeparatorConfig {
    /// Desk-scale default: 3 dense blocks of 2 layers, 8 channels.
    pub fn toy(n_speakers: usize, n_mics: usize) -> Self {
        Self {
            n_speakers,
            n_mics,
            depth: 1,
            convs_per_block: 2,
            growth: 8,
            n_bins: 257,
            input_features: InputFeatures::default(),
        }
    }

    /// The full-scale configuration from the reference architecture; not a
    /// training target here.
    pub fn full_scale(n_speakers: usize) -> Self {
        Self {
            n_speakers,
            n_mics: 7,
            depth: 4,
            convs_per_block: 5,
            growth: 64,
            n_bins: 257,
            input_features: InputFeatures::RawRi,
        }
    }

    pub fn in_channels(&self) -> usize {
        2 * self.n_mics
    }

    pub fn out_channels(&self) -> usize {
        2 * self.n_speakers
    }

    /// Frequency bins after padding to a multiple of 2^depth.
    pub fn padded_bins(&self) -> usize {
        let unit = 1 << self.depth;
        self.n_bins.div_ceil(unit) * unit
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bounded = (1..=8).contains(&self.n_speakers)
            && (1..=7).contains(&self.n_mics)
            && (1..=8).contains(&self.depth)
            && (2..=16).contains(&self.convs_per_block)
            && (1..=1024).contains(&self.growth)
            && ((1 << self.depth)..=32_768).contains(&self.n_bins);
        if !bounded {
            return Err(ModelError::ShapeMismatch(format!(
                "invalid separator config: {self:?}"
            )));
        }
        Ok(())
    }

    /// Parameter tensor shapes in store order, without allocating them.
    pub fn param_shapes(&self) -> Vec<[usize; 4]> {
        plan_param_shapes(&build_plan(self))
            .into_iter()
            .map(|(shape, _)| shape)
            .collect()
    }
}

#[derive(Debug, Clone)]
enum LayerPlan {
    /// 3x3 conv, stride 1, same padding, ELU.
    Conv { cin: usize, cout: usize },
    /// Frequency mapping at this level's bin count, ELU. Preserves its
    /// input channel count.
    Freq { f: usize },
}

#[derive(Debug, Clone)]
struct BlockPlan {
    layers: Vec<LayerPlan>,
    out_channels: usize,
}

fn plan_block(cin: usize, convs: usize, growth: usize, f: usize) -> BlockPlan {
    let middle = convs / 2;
    let mut layers = Vec::with_capacity(convs);
    let mut feats = vec![cin];
    for i in 0..convs {
        let cat: usize = feats.iter().sum();
        if i == middle {
            layers.push(LayerPlan::Freq { f });
            feats.push(cat);
        } else {
            layers.push(LayerPlan::Conv { cin: cat, cout: growth });
            feats.push(growth);
        }
    }
    BlockPlan {
        out_channels: *feats.last().unwrap(),
        layers,
    }
}

#[derive(Debug, Clone)]
struct DownPlan {
    cin: usize,
    cout: usize,
}

#[derive(Debug, Clone)]
struct Plan {
    enc: Vec<(BlockPlan, DownPlan)>,
    mid: BlockPlan,
    dec: Vec<(DownPlan, BlockPlan)>, // up conv reuses the conv shape
    head: DownPlan,
}

fn build_plan(cfg: &SeparatorConfig) -> Plan {
    let g = cfg.growth;
    let f_pad = cfg.padded_bins();
    let mut enc = Vec::new();
    let mut ch = cfg.in_channels();
    for level in 0..cfg.depth {
        let block = plan_block(ch, cfg.convs_per_block, g, f_pad >> level);
        let down = DownPlan {
            cin: block.out_channels,
            cout: g << (level + 1),
        };
        ch = down.cout;
        enc.push((block, down));
    }
    let mid = plan_block(ch, cfg.convs_per_block, g, f_pad >> cfg.depth);
    let mut ch = mid.out_channels;
    let mut dec = Vec::new();
    for level in (0..cfg.depth).rev() {
        let up = DownPlan {
            cin: ch,
            cout: g << level,
        };
        let block_in = up.cout + enc[level].0.out_channels;
        let block = plan_block(block_in, cfg.convs_per_block, g, f_pad >> level);
        ch = block.out_channels;
        dec.push((up, block));
    }
    // The head also sees the network input (an input skip), so the mask
    // keeps a direct linear path to the stacked spectrogram features.
    let head = DownPlan {
        cin: ch + cfg.in_channels(),
        cout: cfg.out_channels(),
    };
    Plan {
        enc,
        mid,
        dec,
        head,
    }
}

/// The separator: config plus the flat parameter store. Parameter order is
/// the plan traversal order (encoder blocks and down convs, bottleneck,
/// decoder ups and blocks, head), each layer contributing weight then
/// bias.
#[derive(Debug, Clone)]
pub struct Separator {
    pub config: SeparatorConfig,
    pub params: Vec<Tensor>,
}

fn layer_shapes(layer: &LayerPlan) -> [( [usize; 4], usize); 2] {
    match layer {
        LayerPlan::Conv { cin, cout } => {
            [(([*cout, *cin, 3, 3]), cin * 9), (([1, *cout, 1, 1]), 0)]
        }
        LayerPlan::Freq { f, .. } => [(([1, 1, *f, *f]), *f), (([1, 1, 1, *f]), 0)],
    }
}

fn plan_param_shapes(plan: &Plan) -> Vec<([usize; 4], usize)> {
    let mut shapes = Vec::new();
    let push_block = |shapes: &mut Vec<([usize; 4], usize)>, block: &BlockPlan| {
        for layer in &block.layers {
            shapes.extend(layer_shapes(layer));
        }
    };
    for (block, down) in &plan.enc {
        push_block(&mut shapes, block);
        shapes.push(([down.cout, down.cin, 3, 3], down.cin * 9));
        shapes.push(([1, down.cout, 1, 1], 0));
    }
    push_block(&mut shapes, &plan.mid);
    for (up, block) in &plan.dec {
        shapes.push(([up.cout, up.cin, 3, 3], up.cin * 9));
        shapes.push(([1, up.cout, 1, 1], 0));
        push_block(&mut shapes, block);
    }
    // Head: 1x1 conv, zero-initialized (fan-in 0 marks zero init).
    shapes.push(([plan.head.cout, plan.head.cin, 1, 1], 0));
    shapes.push(([1, plan.head.cout, 1, 1], 0));
    shapes
}

impl Separator {
    /// Fan-in-scaled uniform init; biases and the final mask layer start
    /// at zero so initial masks are exactly zero.
    pub fn init(config: SeparatorConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let plan = build_plan(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = plan_param_shapes(&plan)
            .into_iter()
            .map(|(shape, fan_in)| {
                let mut t = Tensor::zeros(shape);
                if fan_in > 0 {
                    let limit = 1.0 / (fan_in as f64).sqrt();
                    for v in t.data.iter_mut() {
                        *v = rng.random_range(-limit..limit);
                    }
                }
                t
            })
            .collect();
        Ok(Self { config, params })
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Runs the network on `input` (shape `(1, 2M, T, F)`) with parameters
    /// already on the tape, returning per-speaker (real, imag) mask nodes
    /// of shape `(1, 1, T, F)`.
    pub fn forward_on(
        &self,
        tape: &mut Tape,
        param_ids: &[VarId],
        input: VarId,
    ) -> Result<Vec<(VarId, VarId)>, ModelError> {
        let cfg = &self.config;
        let shape = tape.value(input).shape;
        if shape[0] != 1 || shape[1] != cfg.in_channels() || shape[3] != cfg.n_bins {
            return Err(ModelError::ShapeMismatch(format!(
                "input shape {shape:?}, expected (1, {}, T, {})",
                cfg.in_channels(),
                cfg.n_bins
            )));
        }
        let (t_in, f_in) = (shape[2], shape[3]);
        let unit = 1 << cfg.depth;
        if t_in < unit {
            return Err(ModelError::ShapeMismatch(format!(
                "need at least {unit} frames, got {t_in}"
            )));
        }
        let pad_t = (unit - t_in % unit) % unit;
        let pad_f = cfg.padded_bins() - f_in;
        let plan = build_plan(cfg);
        let mut cursor = ParamCursor {
            ids: param_ids,
            next: 0,
        };

        let padded = tape.pad_reflect(input, pad_t, pad_f);
        let mut skips = Vec::new();
        let mut x = padded;
        for (block, _) in &plan.enc {
            let b = run_block(tape, &mut cursor, block, x);
            skips.push(b);
            let (w, bias) = cursor.take2();
            let down = tape.conv2d(b, w, bias, 2, 1);
            x = tape.elu(down);
        }
        x = run_block(tape, &mut cursor, &plan.mid, x);
        for (level, (_, block)) in plan.dec.iter().enumerate() {
            let up = tape.upsample2(x);
            let (w, bias) = cursor.take2();
            let conv = tape.conv2d(up, w, bias, 1, 1);
            let act = tape.elu(conv);
            let skip = skips[cfg.depth - 1 - level];
            let cat = tape.concat(&[act, skip]);
            x = run_block(tape, &mut cursor, block, cat);
        }
        let (w, bias) = cursor.take2();
        let with_input = tape.concat(&[x, padded]);
        let head = tape.conv2d(with_input, w, bias, 1, 1);
        let cropped = tape.crop(head, t_in, f_in);

        debug_assert_eq!(cursor.next, param_ids.len(), "plan/param drift");
        let masks = (0..cfg.n_speakers)
            .map(|n| {
                let re = tape.slice_channels(cropped, 2 * n, 1);
                let im = tape.slice_channels(cropped, 2 * n + 1, 1);
                (re, im)
            })
            .collect();
        Ok(masks)
    }
}

struct ParamCursor<'a> {
    ids: &'a [VarId],
    next: usize,
}

impl ParamCursor<'_> {
    fn take2(&mut self) -> (VarId, VarId) {
        let pair = (self.ids[self.next], self.ids[self.next + 1]);
        self.next += 2;
        pair
    }
}

fn run_block(tape: &mut Tape, cursor: &mut ParamCursor, block: &BlockPlan, x: VarId) -> VarId {
    let mut feats = vec![x];
    let mut last = x;
    for layer in &block.layers {
        let cat = if feats.len() == 1 {
            feats[0]
        } else {
            tape.concat(&feats)
        };
        let (w, b) = cursor.take2();
        let y = match layer {
            LayerPlan::Conv { .. } => tape.conv2d(cat, w, b, 1, 1),
            LayerPlan::Freq { .. } => tape.freq_linear(cat, w, b),
        };
        last = tape.elu(y);
        feats.push(last);
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input_tensor(cfg: &SeparatorConfig, t: usize, seed: u64) -> Tensor {
        let mut state = seed.max(1);
        let shape = [1, cfg.in_channels(), t, cfg.n_bins];
        let data = (0..shape.iter().product::<usize>())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                ((state >> 11) as f64 / (1u64 << 52) as f64 - 1.0) * 0.5
            })
            .collect();
        Tensor::from_vec(shape, data)
    }

    fn tiny_config() -> SeparatorConfig {
        SeparatorConfig {
            n_speakers: 2,
            n_mics: 2,
            depth: 1,
            convs_per_block: 2,
            growth: 3,
            n_bins: 10,
            input_features: InputFeatures::default(),
        }
    }

    #[test]
    fn toy_plan_has_three_blocks() {
        let cfg = SeparatorConfig::toy(2, 7);
        let plan = build_plan(&cfg);
        assert_eq!(plan.enc.len() + 1 + plan.dec.len(), 3);
        // Full scale: 9 blocks.
        let full = build_plan(&SeparatorConfig::full_scale(2));
        assert_eq!(full.enc.len() + 1 + full.dec.len(), 9);
    }

    #[test]
    fn zero_input_zero_init_head_gives_zero_masks() {
        let cfg = tiny_config();
        let sep = Separator::init(cfg.clone(), 1).unwrap();
        let mut tape = Tape::new();
        let ids: Vec<VarId> = sep.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let x = tape.leaf(Tensor::zeros([1, cfg.in_channels(), 8, cfg.n_bins]));
        let masks = sep.forward_on(&mut tape, &ids, x).unwrap();
        for (re, im) in masks {
            assert!(tape.value(re).data.iter().all(|&v| v == 0.0));
            assert!(tape.value(im).data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn output_shape_and_mask_count() {
        let cfg = tiny_config();
        let sep = Separator::init(cfg.clone(), 2).unwrap();
        for t in [8usize, 11, 16] {
            let mut tape = Tape::new();
            let ids: Vec<VarId> = sep.params.iter().map(|p| tape.leaf(p.clone())).collect();
            let x = tape.leaf(input_tensor(&cfg, t, t as u64));
            let masks = sep.forward_on(&mut tape, &ids, x).unwrap();
            assert_eq!(masks.len(), cfg.n_speakers);
            for (re, im) in masks {
                assert_eq!(tape.value(re).shape, [1, 1, t, cfg.n_bins]);
                assert_eq!(tape.value(im).shape, [1, 1, t, cfg.n_bins]);
            }
        }
    }

    #[test]
    fn forward_is_deterministic_across_runs() {
        let cfg = tiny_config();
        let a = Separator::init(cfg.clone(), 42).unwrap();
        let b = Separator::init(cfg.clone(), 42).unwrap();
        assert_eq!(a.params, b.params);
        let run = |sep: &Separator| {
            let mut tape = Tape::new();
            let ids: Vec<VarId> = sep.params.iter().map(|p| tape.leaf(p.clone())).collect();
            let x = tape.leaf(input_tensor(&cfg, 9, 5));
            let masks = sep.forward_on(&mut tape, &ids, x).unwrap();
            masks
                .into_iter()
                .flat_map(|(re, im)| {
                    let mut v = tape.value(re).data.clone();
                    v.extend_from_slice(&tape.value(im).data);
                    v
                })
                .collect::<Vec<f64>>()
        };
        assert_eq!(run(&a), run(&b));
        // Different seeds give different parameters.
        let c = Separator::init(cfg, 43).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn rejects_wrong_input_channels() {
        let cfg = tiny_config();
        let sep = Separator::init(cfg.clone(), 1).unwrap();
        let mut tape = Tape::new();
        let ids: Vec<VarId> = sep.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let x = tape.leaf(Tensor::zeros([1, 3, 8, cfg.n_bins]));
        assert!(matches!(
            sep.forward_on(&mut tape, &ids, x),
            Err(ModelError::ShapeMismatch(_))
        ));
    }
}
