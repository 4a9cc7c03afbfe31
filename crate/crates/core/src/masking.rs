//! Obfuscation and distortion estimation.
//!
//! An obfuscation keeps the masked part of a datum and replaces the rest
//! with infill: `z = x ⊙ s + g ⊙ (1 − s)`. The distortion of a mask is
//! `½ E[(Φ_d(x) − Φ_d(z))²]` over infill draws, estimated by Monte Carlo.
//! Draw `k` of an estimate seeded with `seed` always uses the sub-stream
//! `rng::substream(seed, k)`, so estimates are reproducible regardless of
//! how draws are scheduled across threads.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{expand_mask, ComponentGrouping, Datum, Mask};
use crate::error::{config_err, input_err, RdxError, Result};
use crate::models::{gradient_unchecked, ModelOracle, OutputSelector};
use crate::rng::{rng_from_seed, substream, Rng};

/// Default number of Monte-Carlo draws per estimate.
pub const DEFAULT_SAMPLES: usize = 64;

/// A conditional infill source `G(x, s, n)`. The noise `n` comes from `rng`.
pub trait InfillOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn infill(&self, x: &[f64], s_expanded: &[f64], rng: &mut Rng) -> Vec<f64>;

    /// True when the output ignores `rng`.
    fn is_deterministic(&self) -> bool {
        false
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::Value::String("conditional".into())
    }
}

/// Where replaced components come from.
#[derive(Clone)]
pub enum InfillSampler {
    /// Independent `Normal(mean_i, std_i²)` per component.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// A fixed baseline.
    Constant(Vec<f64>),
    Conditional(Arc<dyn InfillOracle>),
}

impl fmt::Debug for InfillSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { mean, std } => f
                .debug_struct("Gaussian")
                .field("mean", mean)
                .field("std", std)
                .finish(),
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Conditional(_) => f.write_str("Conditional(..)"),
        }
    }
}

impl InfillSampler {
    pub fn gaussian(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return config_err("gaussian mean and stddev lengths differ");
        }
        if std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return config_err("gaussian stddev must be finite and non-negative");
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return config_err("gaussian mean must be finite");
        }
        Ok(Self::Gaussian { mean, std })
    }

    pub fn constant(baseline: Vec<f64>) -> Result<Self> {
        if baseline.iter().any(|c| !c.is_finite()) {
            return config_err("constant baseline must be finite");
        }
        Ok(Self::Constant(baseline))
    }

    /// Gaussian with per-component moments fitted to a set of data.
    pub fn fit_gaussian(data: &[Datum]) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| RdxError::Input("cannot fit moments to an empty dataset".into()))?;
        let dim = first.dim();
        if data.iter().any(|d| d.dim() != dim) {
            return input_err("dataset dimensions differ");
        }
        let n = data.len() as f64;
        let mut mean = vec![0.0; dim];
        for d in data {
            for (m, v) in mean.iter_mut().zip(d.values()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for d in data {
            for ((s, v), m) in var.iter_mut().zip(d.values()).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        Self::gaussian(mean, var.into_iter().map(f64::sqrt).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::Constant(c) => c.len(),
            Self::Conditional(g) => g.dim(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Self::Gaussian { std, .. } => std.iter().all(|s| *s == 0.0),
            Self::Constant(_) => true,
            Self::Conditional(g) => g.is_deterministic(),
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            Self::Gaussian { mean, std } => {
                serde_json::json!({"kind": "gaussian", "mean": mean, "std": std})
            }
            Self::Constant(c) => serde_json::json!({"kind": "constant", "baseline": c}),
            Self::Conditional(g) => serde_json::json!({"kind": "conditional", "oracle": g.describe()}),
        }
    }

    fn draw(&self, x: &[f64], s: &[f64], rng: &mut Rng) -> Vec<f64> {
        match self {
            Self::Gaussian { mean, std } => mean
                .iter()
                .zip(std)
                .map(|(m, sd)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + sd * z
                })
                .collect(),
            Self::Constant(c) => c.clone(),
            Self::Conditional(g) => g.infill(x, s, rng),
        }
    }
}

/// `z_i = x_i s_i + g_i (1 − s_i)`.
pub fn blend(x: &Datum, s_expanded: &[f64], g: &[f64]) -> Result<Datum> {
    if s_expanded.len() != x.dim() || g.len() != x.dim() {
        return input_err(format!(
            "blend lengths differ: x {}, s {}, g {}",
            x.dim(),
            s_expanded.len(),
            g.len()
        ));
    }
    if s_expanded.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return input_err("blend weights must lie in [0, 1]");
    }
    Datum::new(blend_raw(x.values(), s_expanded, g))
}

fn blend_raw(x: &[f64], s: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(s)
        .zip(g)
        .map(|((xi, si), gi)| xi * si + gi * (1.0 - si))
        .collect()
}

fn checked_draw(sampler: &InfillSampler, x: &[f64], s: &[f64], seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let g = sampler.draw(x, s, &mut rng);
    if g.len() != x.len() {
        return Err(RdxError::Numerical(format!(
            "infill has {} components, expected {}",
            g.len(),
            x.len()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(RdxError::Numerical("infill produced a non-finite value".into()));
    }
    Ok(g)
}

/// One infill vector drawn with a generator seeded by `rng_seed`.
pub fn sample_infill(
    sampler: &InfillSampler,
    x: &Datum,
    s_expanded: &[f64],
    rng_seed: u64,
) -> Result<Vec<f64>> {
    if sampler.dim() != x.dim() || s_expanded.len() != x.dim() {
        return input_err("sampler, datum and mask dimensions differ");
    }
    checked_draw(sampler, x.values(), s_expanded, rng_seed)
}

/// Monte-Carlo estimate of a distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

impl DistortionEstimate {
    fn from_values(values: &[f64], n_samples: usize) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_err,
            n_samples,
        }
    }
}

/// `distortion_mean + λ Σ s`.
pub fn loss(distortion_mean: f64, mask: &Mask, lambda: f64) -> f64 {
    distortion_mean + lambda * mask.weights().iter().sum::<f64>()
}

/// A distortion landscape over per-group mask weights. Implemented for a
/// single datum and for datasets sharing one mask; optimizers only see this.
pub trait MaskObjective: Sync {
    fn n_groups(&self) -> usize;

    fn distortion(&self, weights: &[f64], seed: u64) -> Result<DistortionEstimate>;

    /// Distortion and its gradient with respect to the group weights. The
    /// infill is treated as a constant (no gradient flows through it).
    fn distortion_and_gradient(
        &self,
        weights: &[f64],
        seed: u64,
    ) -> Result<(DistortionEstimate, Vec<f64>)>;

    fn describe(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

/// Distortion of masks applied to one datum.
pub struct MaskedDistortion<'a> {
    model: &'a dyn ModelOracle,
    sel: OutputSelector,
    sel_weights: Vec<f64>,
    x: &'a Datum,
    grouping: &'a ComponentGrouping,
    sampler: &'a InfillSampler,
    n_samples: usize,
    reference: f64,
}

impl<'a> MaskedDistortion<'a> {
    pub fn new(
        model: &'a dyn ModelOracle,
        sel: &OutputSelector,
        x: &'a Datum,
        grouping: &'a ComponentGrouping,
        sampler: &'a InfillSampler,
        n_samples: usize,
    ) -> Result<Self> {
        if n_samples == 0 {
            return config_err("n_samples must be at least 1");
        }
        if model.in_dim() != x.dim() {
            return input_err(format!(
                "model expects {} inputs, datum has {}",
                model.in_dim(),
                x.dim()
            ));
        }
        if sampler.dim() != x.dim() {
            return input_err(format!(
                "sampler produces {} components, datum has {}",
                sampler.dim(),
                x.dim()
            ));
        }
        sel.validate(model.out_dim())?;
        grouping.check_dim(x.dim())?;
        let reference = sel.select(&model.forward(x.values()));
        if !reference.is_finite() {
            return Err(RdxError::Numerical("model output on x is not finite".into()));
        }
        Ok(Self {
            model,
            sel: sel.clone(),
            sel_weights: sel.weights(model.out_dim()),
            x,
            grouping,
            sampler,
            n_samples,
            reference,
        })
    }

    /// `Φ_d(x)`.
    pub fn reference(&self) -> f64 {
        self.reference
    }

    fn draws(&self) -> usize {
        if self.sampler.is_deterministic() {
            1
        } else {
            self.n_samples
        }
    }

    fn expanded(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let mask = Mask::new(weights.to_vec())?;
        expand_mask(&mask, self.grouping, self.x.dim())
    }

    fn draw_value(&self, s: &[f64], seed: u64, k: usize) -> Result<f64> {
        let g = checked_draw(self.sampler, self.x.values(), s, substream(seed, k as u64))?;
        let z = blend_raw(self.x.values(), s, &g);
        let d = self.reference - self.sel.select(&self.model.forward(&z));
        Ok(0.5 * d * d)
    }

    fn draw_value_and_gradient(&self, s: &[f64], seed: u64, k: usize) -> Result<(f64, Vec<f64>)> {
        let x = self.x.values();
        let g = checked_draw(self.sampler, x, s, substream(seed, k as u64))?;
        let z = blend_raw(x, s, &g);
        let phi_z = self.sel.select(&self.model.forward(&z));
        let diff = phi_z - self.reference;
        let dphi = gradient_unchecked(self.model, &z, &self.sel, &self.sel_weights);
        let per_group = self
            .grouping
            .groups()
            .iter()
            .map(|members| {
                members
                    .iter()
                    .map(|&j| diff * dphi[j] * (x[j] - g[j]))
                    .sum::<f64>()
            })
            .collect();
        Ok((0.5 * diff * diff, per_group))
    }
}

impl MaskObjective for MaskedDistortion<'_> {
    fn n_groups(&self) -> usize {
        self.grouping.n_groups()
    }

    fn distortion(&self, weights: &[f64], seed: u64) -> Result<DistortionEstimate> {
        let s = self.expanded(weights)?;
        let values = (0..self.draws())
            .into_par_iter()
            .map(|k| self.draw_value(&s, seed, k))
            .collect::<Result<Vec<f64>>>()?;
        Ok(DistortionEstimate::from_values(&values, self.n_samples))
    }

    fn distortion_and_gradient(
        &self,
        weights: &[f64],
        seed: u64,
    ) -> Result<(DistortionEstimate, Vec<f64>)> {
        let s = self.expanded(weights)?;
        let draws = (0..self.draws())
            .into_par_iter()
            .map(|k| self.draw_value_and_gradient(&s, seed, k))
            .collect::<Result<Vec<_>>>()?;
        let n = draws.len() as f64;
        let mut grad = vec![0.0; self.n_groups()];
        let mut values = Vec::with_capacity(draws.len());
        for (v, g) in draws {
            values.push(v);
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((DistortionEstimate::from_values(&values, self.n_samples), grad))
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "selector": self.sel,
            "sampler": self.sampler.describe(),
            "n_samples": self.n_samples,
        })
    }
}

/// Mean distortion of one shared mask over several data.
pub struct DatasetDistortion<'a> {
    items: Vec<MaskedDistortion<'a>>,
}

impl<'a> DatasetDistortion<'a> {
    pub fn new(items: Vec<MaskedDistortion<'a>>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| RdxError::Input("dataset is empty".into()))?;
        let n = first.n_groups();
        if items.iter().any(|i| i.n_groups() != n) {
            return input_err("dataset items disagree on the number of groups");
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl MaskObjective for DatasetDistortion<'_> {
    fn n_groups(&self) -> usize {
        self.items[0].n_groups()
    }

    fn distortion(&self, weights: &[f64], seed: u64) -> Result<DistortionEstimate> {
        let parts = self
            .items
            .par_iter()
            .enumerate()
            .map(|(i, item)| item.distortion(weights, substream(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(average(&parts))
    }

    fn distortion_and_gradient(
        &self,
        weights: &[f64],
        seed: u64,
    ) -> Result<(DistortionEstimate, Vec<f64>)> {
        let parts = self
            .items
            .par_iter()
            .enumerate()
            .map(|(i, item)| item.distortion_and_gradient(weights, substream(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let n = parts.len() as f64;
        let mut grad = vec![0.0; self.n_groups()];
        for (_, g) in &parts {
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi / n;
            }
        }
        let estimates: Vec<_> = parts.into_iter().map(|(e, _)| e).collect();
        Ok((average(&estimates), grad))
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "dataset_size": self.items.len(),
            "item": self.items[0].describe(),
        })
    }
}

fn average(parts: &[DistortionEstimate]) -> DistortionEstimate {
    let n = parts.len() as f64;
    let mean = parts.iter().map(|p| p.mean).sum::<f64>() / n;
    let var = parts.iter().map(|p| p.std_err * p.std_err).sum::<f64>() / (n * n);
    DistortionEstimate {
        mean,
        std_err: var.sqrt(),
        n_samples: parts.iter().map(|p| p.n_samples).sum(),
    }
}

/// Monte-Carlo estimate of `½ E[(Φ_d(x) − Φ_d(z))²]` for a mask.
#[allow(clippy::too_many_arguments)]
pub fn estimate_distortion(
    model: &dyn ModelOracle,
    sel: &OutputSelector,
    x: &Datum,
    mask: &Mask,
    grouping: &ComponentGrouping,
    sampler: &InfillSampler,
    n_samples: usize,
    rng_seed: u64,
) -> Result<DistortionEstimate> {
    MaskedDistortion::new(model, sel, x, grouping, sampler, n_samples)?
        .distortion(mask.weights(), rng_seed)
}

/// Gradient of `L′(s) = D(s) + λ‖s‖₁` with respect to the group weights.
/// The infill is held constant. Callers project `s` back into `[0, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn loss_gradient(
    model: &dyn ModelOracle,
    sel: &OutputSelector,
    x: &Datum,
    mask: &Mask,
    grouping: &ComponentGrouping,
    sampler: &InfillSampler,
    lambda: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    let objective = MaskedDistortion::new(model, sel, x, grouping, sampler, n_samples)?;
    let (_, mut grad) = objective.distortion_and_gradient(mask.weights(), rng_seed)?;
    grad.iter_mut().for_each(|g| *g += lambda);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConstantModel, LinearModel};
    use proptest::prelude::*;

    fn d(v: &[f64]) -> Datum {
        Datum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn blend_examples() {
        let x = d(&[2.0, 4.0]);
        assert_eq!(blend(&x, &[1.0, 1.0], &[9.0, 9.0]).unwrap(), x);
        assert_eq!(
            blend(&x, &[0.0, 0.0], &[7.0, -1.0]).unwrap().values(),
            &[7.0, -1.0]
        );
        assert_eq!(
            blend(&x, &[0.5, 1.0], &[0.0, 0.0]).unwrap().values(),
            &[1.0, 4.0]
        );
        assert!(blend(&x, &[0.5], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn constant_infill_is_fixed() {
        let s = InfillSampler::constant(vec![0.0; 3]).unwrap();
        let x = d(&[1.0, 2.0, 3.0]);
        for seed in 0..5 {
            assert_eq!(sample_infill(&s, &x, &[0.0; 3], seed).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn gaussian_infill_moments() {
        // 10^5 draws of one component: mean within 0.02 of 0, variance within 0.05 of 1.
        let s = InfillSampler::gaussian(vec![0.0; 10], vec![1.0; 10]).unwrap();
        let x = d(&[0.0; 10]);
        let mut vals = Vec::with_capacity(100_000);
        for seed in 0..10_000u64 {
            vals.extend(sample_infill(&s, &x, &[0.0; 10], seed).unwrap());
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn full_mask_has_zero_distortion() {
        let m = LinearModel::scalar(vec![1.0, 2.0], 0.5);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::gaussian(vec![0.0; 2], vec![3.0; 2]).unwrap();
        let e = estimate_distortion(
            &m,
            &OutputSelector::Index(0),
            &x,
            &Mask::filled(2, 1.0).unwrap(),
            &g,
            &s,
            100,
            3,
        )
        .unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.std_err, 0.0);
    }

    #[test]
    fn constant_infill_closed_form() {
        // Φ(x) = 3, Φ(z) = 1 for z = (1, 0): D = ½ (3 − 1)² = 2.
        let m = LinearModel::scalar(vec![1.0, 2.0], 0.0);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::constant(vec![0.0, 0.0]).unwrap();
        let mask = Mask::new(vec![1.0, 0.0]).unwrap();
        let sel = OutputSelector::Index(0);
        let e = estimate_distortion(&m, &sel, &x, &mask, &g, &s, 16, 0).unwrap();
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_err, 0.0);
        assert_eq!(e.n_samples, 16);

        // (Φ(z) − Φ(x))·w_j·(x_j − 0) = −2·w_j for both coordinates.
        let grad = loss_gradient(&m, &sel, &x, &mask, &g, &s, 0.0, 16, 0).unwrap();
        assert_eq!(grad, vec![-2.0, -4.0]);
    }

    #[test]
    fn gaussian_infill_closed_form() {
        // D = ½ (w₂x₂)² + ½ w₂²σ² = 4.
        let m = LinearModel::scalar(vec![1.0, 2.0], 0.0);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::gaussian(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mask = Mask::new(vec![1.0, 0.0]).unwrap();
        let e = estimate_distortion(&m, &OutputSelector::Index(0), &x, &mask, &g, &s, 100_000, 11)
            .unwrap();
        assert!(
            (e.mean - 4.0).abs() < 3.0 * e.std_err,
            "mean {} std_err {}",
            e.mean,
            e.std_err
        );
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(4.0, &Mask::new(vec![1.0, 0.0]).unwrap(), 50.0), 54.0);
        assert_eq!(loss(0.0, &Mask::new(vec![0.0, 0.0]).unwrap(), 7.0), 0.0);
        assert_eq!(loss(1.5, &Mask::new(vec![0.5, 0.5]).unwrap(), 30.0), 31.5);
    }

    #[test]
    fn full_mask_gradient_is_lambda() {
        let m = LinearModel::scalar(vec![1.0, -2.0, 0.5], 0.0);
        let x = d(&[1.0, 2.0, 3.0]);
        let g = ComponentGrouping::trivial(3);
        let s = InfillSampler::constant(vec![0.0; 3]).unwrap();
        let full = Mask::filled(3, 1.0).unwrap();
        let sel = OutputSelector::Index(0);
        let grad = loss_gradient(&m, &sel, &x, &full, &g, &s, 5.0, 8, 0).unwrap();
        assert_eq!(grad, vec![5.0; 3]);
        let grad = loss_gradient(&m, &sel, &x, &full, &g, &s, 0.0, 8, 0).unwrap();
        assert_eq!(grad, vec![0.0; 3]);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let m = LinearModel::scalar(vec![1.0, 2.0, 3.0], 0.0);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::constant(vec![0.0; 2]).unwrap();
        let r = estimate_distortion(
            &m,
            &OutputSelector::Index(0),
            &x,
            &Mask::filled(2, 0.0).unwrap(),
            &g,
            &s,
            1,
            0,
        );
        assert!(matches!(r, Err(RdxError::Input(_))));
    }

    #[test]
    fn estimates_are_reproducible_across_thread_counts() {
        let m = LinearModel::scalar(vec![1.0, 2.0, -1.0, 0.3], 0.0);
        let x = d(&[1.0, 1.0, 2.0, -1.0]);
        let g = ComponentGrouping::trivial(4);
        let s = InfillSampler::gaussian(vec![0.0; 4], vec![1.0; 4]).unwrap();
        let mask = Mask::new(vec![0.2, 0.0, 1.0, 0.5]).unwrap();
        let sel = OutputSelector::Index(0);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_distortion(&m, &sel, &x, &mask, &g, &s, 1000, 42).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn constant_model_has_zero_gradient_without_penalty() {
        let m = ConstantModel {
            in_dim: 3,
            scores: vec![2.0],
        };
        let x = d(&[1.0, 2.0, 3.0]);
        let g = ComponentGrouping::trivial(3);
        let s = InfillSampler::gaussian(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let mask = Mask::new(vec![0.1, 0.5, 0.9]).unwrap();
        let grad = loss_gradient(&m, &OutputSelector::Index(0), &x, &mask, &g, &s, 0.0, 16, 1)
            .unwrap();
        assert_eq!(grad, vec![0.0; 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn grouping_refinement_does_not_change_estimate(
            w in prop::collection::vec(-3.0f64..3.0, 4),
            keep_first in any::<bool>(),
            keep_second in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let m = LinearModel::scalar(w, 0.0);
            let x = d(&[1.0, -1.0, 2.0, 0.5]);
            let s = InfillSampler::gaussian(vec![0.0; 4], vec![1.0; 4]).unwrap();
            let sel = OutputSelector::Index(0);
            let a = if keep_first { 1.0 } else { 0.0 };
            let b = if keep_second { 1.0 } else { 0.0 };
            let coarse = ComponentGrouping::new(vec![vec![0, 1], vec![2, 3]]).unwrap();
            let fine = ComponentGrouping::trivial(4);
            let e1 = estimate_distortion(&m, &sel, &x, &Mask::new(vec![a, b]).unwrap(), &coarse, &s, 32, seed).unwrap();
            let e2 = estimate_distortion(&m, &sel, &x, &Mask::new(vec![a, a, b, b]).unwrap(), &fine, &s, 32, seed).unwrap();
            prop_assert_eq!(e1.mean.to_bits(), e2.mean.to_bits());
        }
    }
}
