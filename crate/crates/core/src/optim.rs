//! Mask search: ℓ1-relaxed projected gradient descent, the concrete
//! (relaxed Bernoulli) parameterization, and greedy matching pursuit.

use rand::Rng as _;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{BernoulliParams, ComponentGrouping, Datum, Explanation, Mask};
use crate::error::{config_err, RdxError, Result};
use crate::masking::{InfillSampler, MaskObjective, MaskedDistortion, DEFAULT_SAMPLES};
use crate::models::{sigmoid, ModelOracle, OutputSelector};
use crate::rng::{rng_from_seed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RelaxedSgd,
    Concrete,
    MatchingPursuit,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relaxed_sgd" => Some(Self::RelaxedSgd),
            "concrete" => Some(Self::Concrete),
            "matching_pursuit" => Some(Self::MatchingPursuit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// First/second moment scaling with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub method: Method,
    pub steps: usize,
    pub step_size: f64,
    pub lambda: f64,
    /// Concrete relaxation temperature.
    pub temperature: f64,
    pub n_samples: usize,
    pub rng_seed: u64,
    /// Number of groups matching pursuit selects.
    pub mp_budget: usize,
    pub update: UpdateRule,
    /// Initial value of every mask weight (or of every θ).
    pub init: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self::per_frequency()
    }
}

impl OptimConfig {
    /// Per-frequency audio masks: 10⁶ Adam steps of size 10⁻⁵, λ = 50, t = 0.1.
    pub fn per_frequency() -> Self {
        Self {
            method: Method::Concrete,
            steps: 1_000_000,
            step_size: 1e-5,
            lambda: 50.0,
            temperature: 0.1,
            n_samples: DEFAULT_SAMPLES,
            rng_seed: 0,
            mp_budget: 5,
            update: UpdateRule::Adam,
            init: 0.5,
        }
    }

    /// Group queries (magnitude vs phase): 2·10⁵ steps of size 10⁻⁴, λ = 30.
    pub fn group_query() -> Self {
        Self {
            steps: 200_000,
            step_size: 1e-4,
            lambda: 30.0,
            ..Self::per_frequency()
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return config_err("steps must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return config_err("step_size must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return config_err("lambda must be non-negative");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return config_err("temperature must be positive");
        }
        if self.n_samples == 0 {
            return config_err("n_samples must be positive");
        }
        if !(0.0..=1.0).contains(&self.init) {
            return config_err("init must lie in [0, 1]");
        }
        Ok(())
    }

    fn echo(&self, objective: &dyn MaskObjective) -> serde_json::Value {
        serde_json::json!({
            "optim": self,
            "objective": objective.describe(),
        })
    }
}

/// Adam moment state for a parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * mhat / (vhat.sqrt() + Self::EPS);
        }
    }
}

enum Updater {
    Adam(Adam),
    Sgd,
}

impl Updater {
    fn new(rule: UpdateRule, n: usize) -> Self {
        match rule {
            UpdateRule::Adam => Self::Adam(Adam::new(n)),
            UpdateRule::Sgd => Self::Sgd,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Self::Adam(a) => a.step(params, grad, lr),
            Self::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g),
        }
    }
}

fn curve_stride(steps: usize) -> usize {
    (steps / 1000).max(1)
}

fn check_finite(step: usize, distortion: f64, grad: &[f64]) -> Result<()> {
    if !distortion.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(RdxError::Numerical(format!(
            "non-finite loss or gradient at step {step} (distortion = {distortion})"
        )));
    }
    Ok(())
}

/// Projected descent on `s ∈ [0, 1]^groups` for `D(s) + λ‖s‖₁`.
pub fn optimize_relaxed_objective(
    objective: &dyn MaskObjective,
    cfg: &OptimConfig,
) -> Result<Explanation> {
    cfg.validate()?;
    if cfg.method != Method::RelaxedSgd {
        return config_err("optimize_relaxed requires method = relaxed_sgd");
    }
    let n = objective.n_groups();
    let mut s = vec![cfg.init; n];
    let mut updater = Updater::new(cfg.update, n);
    let stride = curve_stride(cfg.steps);
    let mut curve = Vec::with_capacity(cfg.steps / stride + 1);

    for step in 0..cfg.steps {
        let (est, mut grad) =
            objective.distortion_and_gradient(&s, substream(cfg.rng_seed, step as u64))?;
        grad.iter_mut().for_each(|g| *g += cfg.lambda);
        check_finite(step, est.mean, &grad)?;
        if step % stride == 0 {
            curve.push((s.iter().sum(), est.mean));
        }
        updater.step(&mut s, &grad, cfg.step_size);
        s.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }

    Ok(Explanation {
        final_mask: Mask::clipped(s),
        distortion_curve: curve,
        selected_order: None,
        config_echo: cfg.echo(objective),
    })
}

pub fn optimize_relaxed(
    model: &dyn ModelOracle,
    sel: &OutputSelector,
    x: &Datum,
    grouping: &ComponentGrouping,
    sampler: &InfillSampler,
    cfg: &OptimConfig,
) -> Result<Explanation> {
    let objective = MaskedDistortion::new(model, sel, x, grouping, sampler, cfg.n_samples)?;
    optimize_relaxed_objective(&objective, cfg)
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Relaxed Bernoulli draw `sigmoid((logit θ + logit u) / t)`.
pub fn sample_concrete(theta: f64, temperature: f64, u: f64) -> f64 {
    sigmoid((logit(theta) + logit(u)) / temperature)
}

/// `∂s/∂θ` of [`sample_concrete`] at fixed `u`.
pub fn concrete_gradient(theta: f64, temperature: f64, u: f64) -> f64 {
    let a = (logit(theta) + logit(u)) / temperature;
    // s(1 − s) as σ(a)σ(−a) stays accurate when s saturates.
    sigmoid(a) * sigmoid(-a) / (temperature * theta * (1.0 - theta))
}

/// Descent on Bernoulli parameters θ through concrete samples of the mask.
pub fn optimize_concrete_objective(
    objective: &dyn MaskObjective,
    cfg: &OptimConfig,
) -> Result<Explanation> {
    cfg.validate()?;
    if cfg.method != Method::Concrete {
        return config_err("optimize_concrete requires method = concrete");
    }
    let n = objective.n_groups();
    let mut params = BernoulliParams::new(vec![cfg.init; n], cfg.temperature)?;
    let mut updater = Updater::new(cfg.update, n);
    let stride = curve_stride(cfg.steps);
    let mut curve = Vec::with_capacity(cfg.steps / stride + 1);
    let t = cfg.temperature;

    for step in 0..cfg.steps {
        let step_seed = substream(cfg.rng_seed, step as u64);
        let mut urng = rng_from_seed(substream(step_seed, 0));
        let u: Vec<f64> = (0..n).map(|_| urng.sample(Open01)).collect();
        let theta = params.theta();
        let s: Vec<f64> = theta
            .iter()
            .zip(&u)
            .map(|(&th, &ui)| sample_concrete(th, t, ui))
            .collect();

        let (est, grad_s) = objective.distortion_and_gradient(&s, substream(step_seed, 1))?;
        let grad: Vec<f64> = grad_s
            .iter()
            .zip(theta.iter().zip(&u))
            .map(|(gs, (&th, &ui))| (gs + cfg.lambda) * concrete_gradient(th, t, ui))
            .collect();
        check_finite(step, est.mean, &grad)?;
        if step % stride == 0 {
            curve.push((theta.iter().sum(), est.mean));
        }
        updater.step(params.theta_mut(), &grad, cfg.step_size);
        params.clamp();
    }

    Ok(Explanation {
        final_mask: params.to_mask(),
        distortion_curve: curve,
        selected_order: None,
        config_echo: cfg.echo(objective),
    })
}

pub fn optimize_concrete(
    model: &dyn ModelOracle,
    sel: &OutputSelector,
    x: &Datum,
    grouping: &ComponentGrouping,
    sampler: &InfillSampler,
    cfg: &OptimConfig,
) -> Result<Explanation> {
    let objective = MaskedDistortion::new(model, sel, x, grouping, sampler, cfg.n_samples)?;
    optimize_concrete_objective(&objective, cfg)
}

/// Greedy selection of `cfg.mp_budget` groups. Every round re-estimates each
/// remaining candidate with the same seed; the smallest distortion wins and
/// ties go to the lowest group index. The curve holds `(k, distortion)` for
/// `k = 0..=budget`.
pub fn matching_pursuit_objective(
    objective: &dyn MaskObjective,
    cfg: &OptimConfig,
) -> Result<Explanation> {
    cfg.validate()?;
    let n = objective.n_groups();
    let budget = cfg.mp_budget;
    if budget > n {
        return config_err(format!("budget {budget} exceeds the {n} available groups"));
    }
    let mut weights = vec![0.0; n];
    let mut order = Vec::with_capacity(budget);
    let start = objective.distortion(&weights, cfg.rng_seed)?.mean;
    if !start.is_finite() {
        return Err(RdxError::Numerical("initial distortion is not finite".into()));
    }
    let mut curve = vec![(0.0, start)];

    for round in 0..budget {
        let candidates: Vec<usize> = (0..n).filter(|&g| weights[g] == 0.0).collect();
        let scores = candidates
            .par_iter()
            .map(|&g| {
                let mut trial = weights.clone();
                trial[g] = 1.0;
                objective.distortion(&trial, cfg.rng_seed).map(|e| e.mean)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut best: Option<(usize, f64)> = None;
        for (&g, &d) in candidates.iter().zip(&scores) {
            if !d.is_finite() {
                return Err(RdxError::Numerical(format!(
                    "distortion for group {g} in round {round} is not finite"
                )));
            }
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((g, d));
            }
        }
        let (g, d) = best.expect("budget <= n_groups leaves a candidate");
        weights[g] = 1.0;
        order.push(g);
        curve.push(((round + 1) as f64, d));
    }

    Ok(Explanation {
        final_mask: Mask::clipped(weights),
        distortion_curve: curve,
        selected_order: Some(order),
        config_echo: cfg.echo(objective),
    })
}

pub fn matching_pursuit(
    model: &dyn ModelOracle,
    sel: &OutputSelector,
    x: &Datum,
    grouping: &ComponentGrouping,
    completion: &InfillSampler,
    cfg: &OptimConfig,
) -> Result<Explanation> {
    let objective = MaskedDistortion::new(model, sel, x, grouping, completion, cfg.n_samples)?;
    matching_pursuit_objective(&objective, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{binarize, BINARIZE_THRESHOLD};
    use crate::models::{ConstantModel, LinearModel};

    fn d(v: &[f64]) -> Datum {
        Datum::new(v.to_vec()).unwrap()
    }

    fn desk(method: Method) -> OptimConfig {
        OptimConfig {
            method,
            steps: 4000,
            step_size: 1e-2,
            lambda: 1.0,
            n_samples: 1,
            ..OptimConfig::per_frequency()
        }
    }

    #[test]
    fn full_scale_presets() {
        let p = OptimConfig::per_frequency();
        assert_eq!((p.steps, p.step_size, p.lambda, p.temperature), (1_000_000, 1e-5, 50.0, 0.1));
        let g = OptimConfig::group_query();
        assert_eq!((g.steps, g.step_size, g.lambda, g.temperature), (200_000, 1e-4, 30.0, 0.1));
        assert_eq!(p.update, UpdateRule::Adam);
    }

    #[test]
    fn validation_messages() {
        let c = OptimConfig {
            lambda: -1.0,
            ..OptimConfig::default()
        };
        assert_eq!(
            c.validate().unwrap_err().to_string(),
            "configuration error: lambda must be non-negative"
        );
    }

    #[test]
    fn concrete_examples() {
        for t in [0.1, 0.5, 1.0, 3.0] {
            assert_eq!(sample_concrete(0.5, t, 0.5), 0.5);
        }
        let s = sample_concrete(0.9, 0.1, 0.5);
        assert!((1.0 - s) < 1e-9, "{s}");
        assert_eq!(concrete_gradient(0.5, 1.0, 0.5), 1.0);
    }

    #[test]
    fn concrete_gradient_is_non_negative() {
        for i in 1..50 {
            for j in 1..50 {
                let th = i as f64 / 50.0;
                let u = j as f64 / 50.0;
                assert!(concrete_gradient(th, 0.1, u) >= 0.0);
            }
        }
    }

    #[test]
    fn relaxed_recovers_separable_mask() {
        let m = LinearModel::scalar(vec![5.0, 0.01], 0.0);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::constant(vec![0.0, 0.0]).unwrap();
        let e = optimize_relaxed(&m, &OutputSelector::Index(0), &x, &g, &s, &desk(Method::RelaxedSgd))
            .unwrap();
        assert_eq!(binarize(&e.final_mask, BINARIZE_THRESHOLD).weights(), &[1.0, 0.0]);
        e.validate().unwrap();
    }

    #[test]
    fn concrete_recovers_separable_mask() {
        let m = LinearModel::scalar(vec![5.0, 0.01], 0.0);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::constant(vec![0.0, 0.0]).unwrap();
        let e = optimize_concrete(&m, &OutputSelector::Index(0), &x, &g, &s, &desk(Method::Concrete))
            .unwrap();
        assert_eq!(binarize(&e.final_mask, BINARIZE_THRESHOLD).weights(), &[1.0, 0.0]);
    }

    #[test]
    fn large_lambda_empties_the_mask() {
        // L′(0) = ½·3² = 4.5 < λ·d, so dropping everything wins.
        let m = LinearModel::scalar(vec![1.0, 2.0], 0.0);
        let x = d(&[1.0, 1.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::constant(vec![0.0, 0.0]).unwrap();
        let cfg = OptimConfig {
            lambda: 10.0,
            ..desk(Method::RelaxedSgd)
        };
        let e = optimize_relaxed(&m, &OutputSelector::Index(0), &x, &g, &s, &cfg).unwrap();
        assert_eq!(e.final_mask.weights(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_lambda_full_mask_is_fixed_point() {
        let m = LinearModel::scalar(vec![1.0, -2.0], 0.0);
        let x = d(&[1.0, 3.0]);
        let g = ComponentGrouping::trivial(2);
        let s = InfillSampler::gaussian(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let cfg = OptimConfig {
            lambda: 0.0,
            init: 1.0,
            steps: 50,
            n_samples: 8,
            ..desk(Method::RelaxedSgd)
        };
        let e = optimize_relaxed(&m, &OutputSelector::Index(0), &x, &g, &s, &cfg).unwrap();
        assert_eq!(e.final_mask.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn concrete_without_signal_stays_put() {
        let m = ConstantModel {
            in_dim: 3,
            scores: vec![1.0],
        };
        let x = d(&[1.0, 2.0, 3.0]);
        let g = ComponentGrouping::trivial(3);
        let s = InfillSampler::gaussian(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let cfg = OptimConfig {
            lambda: 0.0,
            steps: 10_000,
            step_size: 1e-3,
            n_samples: 1,
            ..desk(Method::Concrete)
        };
        let e = optimize_concrete(&m, &OutputSelector::Index(0), &x, &g, &s, &cfg).unwrap();
        for th in e.final_mask.weights() {
            assert!((0.45..=0.55).contains(th), "theta {th}");
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let m = LinearModel::scalar(vec![2.0, -1.0, 0.5], 0.0);
        let x = d(&[1.0, 1.0, 1.0]);
        let g = ComponentGrouping::trivial(3);
        let s = InfillSampler::gaussian(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let cfg = OptimConfig {
            steps: 300,
            n_samples: 4,
            ..desk(Method::Concrete)
        };
        let a = optimize_concrete(&m, &OutputSelector::Index(0), &x, &g, &s, &cfg).unwrap();
        let b = optimize_concrete(&m, &OutputSelector::Index(0), &x, &g, &s, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.config_echo["optim"]["steps"], serde_json::json!(300));
    }

    #[test]
    fn matching_pursuit_examples() {
        let x = d(&[1.0, 1.0, 1.0]);
        let g = ComponentGrouping::trivial(3);
        let s = InfillSampler::constant(vec![0.0; 3]).unwrap();
        let m = LinearModel::scalar(vec![3.0, 1.0, 2.0], 0.0);
        let cfg = OptimConfig {
            mp_budget: 3,
            ..desk(Method::MatchingPursuit)
        };
        let e = matching_pursuit(&m, &OutputSelector::Index(0), &x, &g, &s, &cfg).unwrap();
        assert_eq!(e.selected_order, Some(vec![0, 2, 1]));
        // D(∅) = ½·6², D({0}) = ½·3², D({0,2}) = ½·1², D(all) = 0.
        assert_eq!(e.distortion_curve, vec![(0.0, 18.0), (1.0, 4.5), (2.0, 0.5), (3.0, 0.0)]);

        let tie = LinearModel::scalar(vec![1.0, 1.0], 0.0);
        let x2 = d(&[1.0, 1.0]);
        let g2 = ComponentGrouping::trivial(2);
        let s2 = InfillSampler::constant(vec![0.0; 2]).unwrap();
        let cfg2 = OptimConfig {
            mp_budget: 2,
            ..cfg.clone()
        };
        let e = matching_pursuit(&tie, &OutputSelector::Index(0), &x2, &g2, &s2, &cfg2).unwrap();
        assert_eq!(e.selected_order, Some(vec![0, 1]));

        let empty = OptimConfig {
            mp_budget: 0,
            ..cfg.clone()
        };
        let e = matching_pursuit(&m, &OutputSelector::Index(0), &x, &g, &s, &empty).unwrap();
        assert_eq!(e.selected_order, Some(vec![]));
        assert_eq!(e.distortion_curve, vec![(0.0, 18.0)]);

        let too_many = OptimConfig {
            mp_budget: 4,
            ..cfg
        };
        assert!(matching_pursuit(&m, &OutputSelector::Index(0), &x, &g, &s, &too_many).is_err());
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut a = Adam::new(2);
        let mut p = vec![0.5, 0.5];
        a.step(&mut p, &[1.0, -1.0], 0.01);
        assert!((p[0] - 0.49).abs() < 1e-9);
        assert!((p[1] - 0.51).abs() < 1e-9);
    }
}
