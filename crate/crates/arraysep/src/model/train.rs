//! Training loop pieces: spectrogram featurization, the differentiable
//! RI+Mag loss, assignment-aware train steps, and inference.

use num_complex::Complex64;

use super::optim::{Adam, AdamConfig};
use super::separator::{InputFeatures, Separator, SeparatorConfig};
use super::tape::{Tape, Tensor, VarId};
use super::ModelError;
use crate::acoustics::{geometry_truth, MixtureExample};
use crate::criteria::{
    lbt_report_from_losses, pit_assign_from_matrix, Criterion, CriterionReport,
};
use crate::signals::{stft, ComplexSpectrogram, MultichannelWaveform, StftConfig, Waveform};

/// Everything needed to continue (or reproduce) a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub separator: Separator,
    pub optimizer: Adam,
    pub stft: StftConfig,
    pub criterion: Criterion,
    pub seed: u64,
    pub step: u64,
}

impl TrainState {
    pub fn init(
        config: SeparatorConfig,
        criterion: Criterion,
        adam: AdamConfig,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if criterion == Criterion::Combined {
            return Err(ModelError::ShapeMismatch(
                "the combined criterion selects between trained models at evaluation time; \
                 train with pit, azimuth, or distance"
                    .into(),
            ));
        }
        let separator = Separator::init(config, seed)?;
        let optimizer = Adam::new(adam, &separator.params);
        Ok(Self {
            separator,
            optimizer,
            stft: StftConfig::default(),
            criterion,
            seed,
            step: 0,
        })
    }
}

fn spectrogram_tensors(s: &ComplexSpectrogram) -> (Tensor, Tensor) {
    let shape = [1, 1, s.n_frames, s.n_bins];
    let re = Tensor::from_vec(shape, s.bins.iter().map(|c| c.re).collect());
    let im = Tensor::from_vec(shape, s.bins.iter().map(|c| c.im).collect());
    (re, im)
}

fn mixture_spectrograms(
    mixture: &MultichannelWaveform,
    cfg: &StftConfig,
) -> Result<Vec<ComplexSpectrogram>, ModelError> {
    mixture
        .channels
        .iter()
        .map(|ch| stft(ch, cfg).map_err(|e| ModelError::ShapeMismatch(e.to_string())))
        .collect()
}

/// Floor protecting the phase-referenced features on silent bins.
const FEATURE_EPS: f64 = 1e-8;

/// Stacks per-channel spectrogram planes into the model input tensor
/// `(1, 2M, T, F)`. With phase-referenced features, channel pair 0 stays
/// the raw reference spectrogram and pair m carries
/// `Y_m conj(Y_0) / (|Y_0|^2 + eps)`, putting inter-channel phase (the
/// spatial cue) directly into the input.
fn stack_input(specs: &[ComplexSpectrogram], features: InputFeatures) -> Tensor {
    let (t, f) = (specs[0].n_frames, specs[0].n_bins);
    let mut input = Tensor::zeros([1, 2 * specs.len(), t, f]);
    for (m, spec) in specs.iter().enumerate() {
        let re_base = input.offset(0, 2 * m, 0, 0);
        let im_base = input.offset(0, 2 * m + 1, 0, 0);
        for (i, c) in spec.bins.iter().enumerate() {
            let v = match features {
                InputFeatures::RawRi => *c,
                InputFeatures::PhaseReferenced if m == 0 => *c,
                InputFeatures::PhaseReferenced => {
                    let y0 = specs[0].bins[i];
                    c * y0.conj() / (y0.norm_sqr() + FEATURE_EPS)
                }
            };
            input.data[re_base + i] = v.re;
            input.data[im_base + i] = v.im;
        }
    }
    input
}

/// Differentiable per-pair loss: mean |dRe| + mean |dIm| + mean
/// ||S_hat| - |S||, matching the value convention of
/// [`crate::criteria::loss_ri_mag`].
fn pair_loss(
    tape: &mut Tape,
    est: (VarId, VarId),
    target: &ComplexSpectrogram,
) -> VarId {
    let (t_re, t_im) = spectrogram_tensors(target);
    let t_mag = Tensor::from_vec(
        [1, 1, target.n_frames, target.n_bins],
        target.bins.iter().map(|c| c.norm()).collect(),
    );
    let tre = tape.leaf(t_re);
    let tim = tape.leaf(t_im);
    let tmag = tape.leaf(t_mag);
    let dre = tape.sub(est.0, tre);
    let are = tape.abs(dre);
    let lre = tape.mean(are);
    let dim = tape.sub(est.1, tim);
    let aim = tape.abs(dim);
    let lim = tape.mean(aim);
    let mag = tape.hypot(est.0, est.1);
    let dmag = tape.sub(mag, tmag);
    let amag = tape.abs(dmag);
    let lmag = tape.mean(amag);
    let ri = tape.add(lre, lim);
    tape.add(ri, lmag)
}

/// Applies a complex mask node to the (constant) reference spectrogram.
fn mask_to_estimate(
    tape: &mut Tape,
    mask: (VarId, VarId),
    y_re: &Tensor,
    y_im: &Tensor,
) -> (VarId, VarId) {
    let re_yre = tape.mul_const(mask.0, y_re.clone());
    let im_yim = tape.mul_const(mask.1, y_im.clone());
    let s_re = tape.sub(re_yre, im_yim);
    let re_yim = tape.mul_const(mask.0, y_im.clone());
    let im_yre = tape.mul_const(mask.1, y_re.clone());
    let s_im = tape.add(re_yim, im_yre);
    (s_re, s_im)
}

/// Tape, loss node, parameter handles, and the assignment report for one
/// example under the given criterion.
fn build_loss_graph(
    separator: &Separator,
    stft_cfg: &StftConfig,
    criterion: Criterion,
    example: &MixtureExample,
) -> Result<(Tape, VarId, Vec<VarId>, CriterionReport), ModelError> {
    let n = separator.config.n_speakers;
    if example.targets.len() != n {
        return Err(ModelError::SpeakerCount {
            expected: n,
            got: example.targets.len(),
        });
    }
    if example.mixture.n_channels() != separator.config.n_mics {
        return Err(ModelError::ShapeMismatch(format!(
            "mixture has {} channels, model expects {}",
            example.mixture.n_channels(),
            separator.config.n_mics
        )));
    }

    let mix_specs = mixture_spectrograms(&example.mixture, stft_cfg)?;
    let target_specs: Vec<ComplexSpectrogram> = example
        .targets
        .iter()
        .map(|t| stft(t, stft_cfg).map_err(|e| ModelError::ShapeMismatch(e.to_string())))
        .collect::<Result<_, _>>()?;
    let (y_re, y_im) = spectrogram_tensors(&mix_specs[0]);

    let mut tape = Tape::new();
    let param_ids: Vec<VarId> = separator
        .params
        .iter()
        .map(|p| tape.leaf(p.clone()))
        .collect();
    let input = tape.leaf(stack_input(&mix_specs, separator.config.input_features));
    let masks = separator.forward_on(&mut tape, &param_ids, input)?;
    let estimates: Vec<(VarId, VarId)> = masks
        .into_iter()
        .map(|m| mask_to_estimate(&mut tape, m, &y_re, &y_im))
        .collect();

    let (report, chosen): (CriterionReport, Vec<VarId>) = match criterion {
        Criterion::Pit => {
            let mut nodes = vec![Vec::with_capacity(n); n];
            let mut matrix = vec![vec![0.0f64; n]; n];
            for (out, est) in estimates.iter().enumerate() {
                for (spk, target) in target_specs.iter().enumerate() {
                    let l = pair_loss(&mut tape, *est, target);
                    matrix[out][spk] = tape.value(l).item();
                    nodes[out].push(l);
                }
            }
            let report = pit_assign_from_matrix(&matrix)
                .map_err(|e| ModelError::ShapeMismatch(e.to_string()))?;
            let chosen = report
                .assignment
                .pairing
                .iter()
                .enumerate()
                .map(|(out, &spk)| nodes[out][spk])
                .collect();
            (report, chosen)
        }
        Criterion::Azimuth | Criterion::Distance => {
            let (az, dist) = geometry_truth(&example.scenario);
            let order = if criterion == Criterion::Azimuth { az } else { dist };
            let nodes: Vec<VarId> = estimates
                .iter()
                .zip(order.iter())
                .map(|(est, &spk)| pair_loss(&mut tape, *est, &target_specs[spk]))
                .collect();
            let losses = nodes.iter().map(|&l| tape.value(l).item()).collect();
            let report = lbt_report_from_losses(losses, &order, criterion);
            (report, nodes)
        }
        Criterion::Combined => {
            return Err(ModelError::ShapeMismatch(
                "combined criterion is evaluation-only".into(),
            ))
        }
    };

    let mut total = chosen[0];
    for &l in &chosen[1..] {
        total = tape.add(total, l);
    }
    let loss = tape.scale(total, 1.0 / n as f64);
    Ok((tape, loss, param_ids, report))
}

/// Loss and parameter gradients for one example without updating the
/// model; the gradient list pairs with `separator.params`.
pub fn example_loss(
    separator: &Separator,
    stft_cfg: &StftConfig,
    criterion: Criterion,
    example: &MixtureExample,
) -> Result<(f64, Vec<Option<Tensor>>, CriterionReport), ModelError> {
    let (mut tape, loss, param_ids, report) =
        build_loss_graph(separator, stft_cfg, criterion, example)?;
    let value = tape.value(loss).item();
    tape.backward(loss);
    let grads = param_ids
        .iter()
        .map(|&id| tape.grad(id).cloned())
        .collect();
    Ok((value, grads, report))
}

/// One optimizer update on a single example. Location-based criteria take
/// the assignment from the scene geometry (N loss evaluations); the
/// permutation-invariant criterion evaluates the full N x N matrix and
/// scans every permutation. The returned report carries the exact counts.
pub fn train_step(
    state: &mut TrainState,
    example: &MixtureExample,
) -> Result<CriterionReport, ModelError> {
    let (mut tape, loss, param_ids, report) = build_loss_graph(
        &state.separator,
        &state.stft,
        state.criterion,
        example,
    )?;
    tape.backward(loss);
    let grads: Vec<Option<&Tensor>> = param_ids.iter().map(|&id| tape.grad(id)).collect();
    state
        .optimizer
        .step(&mut state.separator.params, &grads);
    state.step += 1;
    Ok(report)
}

/// Runs the separator on a mixture, returning the per-speaker estimated
/// spectrograms (masks applied to the reference channel) together with
/// the mixture channel spectrograms.
pub fn separate_spectrograms(
    separator: &Separator,
    stft_cfg: &StftConfig,
    mixture: &MultichannelWaveform,
) -> Result<(Vec<ComplexSpectrogram>, Vec<ComplexSpectrogram>), ModelError> {
    if mixture.n_channels() != separator.config.n_mics {
        return Err(ModelError::ShapeMismatch(format!(
            "mixture has {} channels, model expects {}",
            mixture.n_channels(),
            separator.config.n_mics
        )));
    }
    let mix_specs = mixture_spectrograms(mixture, stft_cfg)?;
    let mut tape = Tape::new();
    let param_ids: Vec<VarId> = separator
        .params
        .iter()
        .map(|p| tape.leaf(p.clone()))
        .collect();
    let input = tape.leaf(stack_input(&mix_specs, separator.config.input_features));
    let masks = separator.forward_on(&mut tape, &param_ids, input)?;
    let (y_re, y_im) = spectrogram_tensors(&mix_specs[0]);
    let reference = &mix_specs[0];
    let estimates = masks
        .into_iter()
        .map(|m| {
            let (s_re, s_im) = mask_to_estimate(&mut tape, m, &y_re, &y_im);
            let re = tape.value(s_re);
            let im = tape.value(s_im);
            let mut spec = reference.clone();
            for (i, b) in spec.bins.iter_mut().enumerate() {
                *b = Complex64::new(re.data[i], im.data[i]);
            }
            spec
        })
        .collect();
    Ok((estimates, mix_specs))
}

/// Full separation to waveforms of the mixture's length.
pub fn separate_waveforms(
    separator: &Separator,
    stft_cfg: &StftConfig,
    mixture: &MultichannelWaveform,
) -> Result<Vec<Waveform>, ModelError> {
    let (specs, _) = separate_spectrograms(separator, stft_cfg, mixture)?;
    specs
        .iter()
        .map(|s| {
            crate::signals::istft(s, stft_cfg, mixture.len())
                .map_err(|e| ModelError::ShapeMismatch(e.to_string()))
        })
        .collect()
}
