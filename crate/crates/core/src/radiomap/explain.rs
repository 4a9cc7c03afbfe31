use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::completion::{complete_flags, CompletionPolicy};
use super::estimator::{phi_model_with, PhiParams};
use super::scene::{Measurement, RadioInput, RadioScene};
use crate::domain::{ComponentGrouping, Datum, Explanation};
use crate::error::Result;
use crate::masking::{InfillOracle, InfillSampler};
use crate::models::{ModelOracle, OutputSelector};
use crate::optim::{matching_pursuit, Method, OptimConfig};
use crate::rng::Rng;

/// Flat value of a measurement slot that holds no measurement.
pub const ABSENT: f64 = -1.0;

/// Flat layout of a scene's inputs: one indicator per noisy-city building
/// (in city order) followed by one strength per measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadioEncoding {
    pub n_buildings: usize,
    pub n_measurements: usize,
}

impl RadioEncoding {
    pub fn of(scene: &RadioScene) -> Self {
        Self {
            n_buildings: scene.noisy_city().buildings().len(),
            n_measurements: scene.measurements().len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_buildings + self.n_measurements
    }

    pub fn encode(scene: &RadioScene) -> Result<Datum> {
        let mut v = vec![1.0; scene.noisy_city().buildings().len()];
        v.extend(scene.measurements().iter().map(|m| m.strength));
        Datum::new(v)
    }

    /// `building:<id>` and `measurement:<index>` per component.
    pub fn labels(scene: &RadioScene) -> Vec<String> {
        let b = scene.noisy_city().buildings().iter().map(|b| format!("building:{}", b.id));
        let m = (0..scene.measurements().len()).map(|i| format!("measurement:{i}"));
        b.chain(m).collect()
    }

    /// Buildings with indicator ≥ 0.5 and measurements with value ≥ 0.
    pub fn decode(scene: &RadioScene, z: &[f64]) -> RadioInput {
        let nb = scene.noisy_city().buildings().len();
        let (zb, zm) = z.split_at(nb);
        let kept: Vec<u32> = scene
            .noisy_city()
            .buildings()
            .iter()
            .zip(zb)
            .filter(|(_, &v)| v >= 0.5)
            .map(|(b, _)| b.id)
            .collect();
        let measurements = scene
            .measurements()
            .iter()
            .zip(zm)
            .filter(|(_, &v)| v >= 0.0)
            .map(|(m, &v)| Measurement { strength: v, ..*m })
            .collect();
        RadioInput {
            city: scene.noisy_city().filtered(|id| kept.contains(&id)),
            tx: scene.tx(),
            measurements,
        }
    }
}

/// The estimator as a black box over the flat encoding; outputs the whole
/// map row-major.
#[derive(Debug, Clone)]
pub struct RadioInputModel {
    scene: RadioScene,
    params: PhiParams,
}

impl RadioInputModel {
    pub fn new(scene: RadioScene, params: PhiParams) -> Self {
        Self { scene, params }
    }
}

impl ModelOracle for RadioInputModel {
    fn in_dim(&self) -> usize {
        RadioEncoding::of(&self.scene).dim()
    }

    fn out_dim(&self) -> usize {
        self.scene.city().height() * self.scene.city().width()
    }

    fn forward(&self, z: &[f64]) -> Vec<f64> {
        let input = RadioEncoding::decode(&self.scene, z);
        phi_model_with(&input, &self.params)
            .expect("scene transmitter is validated free")
            .values
    }
}

/// Completion of unchosen items as an infill source over the flat encoding.
/// Buildings are never refilled; dropped measurements infill [`ABSENT`].
#[derive(Debug, Clone)]
pub struct RadioInfill {
    scene: RadioScene,
    policy: CompletionPolicy,
}

impl RadioInfill {
    pub fn new(scene: RadioScene, policy: CompletionPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self { scene, policy })
    }
}

impl InfillOracle for RadioInfill {
    fn dim(&self) -> usize {
        RadioEncoding::of(&self.scene).dim()
    }

    fn infill(&self, _x: &[f64], s: &[f64], rng: &mut Rng) -> Vec<f64> {
        let nb = self.scene.noisy_city().buildings().len();
        let keep: Vec<bool> = s.iter().map(|&v| v >= 0.5).collect();
        let (kb, km) = keep.split_at(nb);
        let (_, values) = complete_flags(&self.scene, kb, km, &self.policy, rng);
        let mut g = vec![0.0; nb];
        g.extend(values.into_iter().map(|v| v.unwrap_or(ABSENT)));
        g
    }

    fn is_deterministic(&self) -> bool {
        self.policy.is_deterministic()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "radio_completion": self.policy })
    }
}

/// A region explanation request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionQuery {
    pub policy: CompletionPolicy,
    pub budget: usize,
    /// Draws per estimate; ignored by deterministic policies.
    pub n_samples: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub estimator: PhiParams,
}

impl Default for RegionQuery {
    fn default() -> Self {
        Self {
            policy: CompletionPolicy { p_inpaint: 1.0 },
            budget: 5,
            n_samples: 64,
            rng_seed: 0,
            estimator: PhiParams::default(),
        }
    }
}

/// Greedy selection of buildings and measurements that keeps the mean
/// estimate over the scene's region close to its full-input value.
pub fn explain_region(scene: &RadioScene, query: &RegionQuery) -> Result<Explanation> {
    let model = RadioInputModel::new(scene.clone(), query.estimator);
    let x = RadioEncoding::encode(scene)?;
    let grouping = ComponentGrouping::trivial(x.dim());
    let sampler = InfillSampler::Conditional(Arc::new(RadioInfill::new(scene.clone(), query.policy)?));
    let width = scene.city().width();
    let sel = OutputSelector::uniform_region(model.out_dim(), &scene.region().cells(width))?;
    let cfg = OptimConfig {
        mp_budget: query.budget,
        n_samples: query.n_samples,
        rng_seed: query.rng_seed,
        ..OptimConfig::default().with_method(Method::MatchingPursuit)
    };
    let mut e = matching_pursuit(&model, &sel, &x, &grouping, &sampler, &cfg)?;
    e.config_echo = serde_json::json!({
        "optim": cfg,
        "completion": query.policy,
        "region": scene.region(),
        "region_aggregation": "mean",
        "components": RadioEncoding::labels(scene),
        "component_weighting": "equal",
        "estimator": query.estimator,
    });
    Ok(e)
}
