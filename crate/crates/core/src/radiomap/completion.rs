use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::city::CityMap;
use super::propagation::{strength_at, PropagationParams};
use super::scene::{Measurement, RadioInput, RadioScene};
use crate::error::{input_err, Result};
use crate::rng::{rng_from_seed, Rng};

/// Probability that an unchosen measurement is refilled from the simulator
/// of the kept city; otherwise it is dropped. 0 is zero-fill, 1 is full
/// model-based infill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionPolicy {
    pub p_inpaint: f64,
}

impl CompletionPolicy {
    pub fn new(p_inpaint: f64) -> Result<Self> {
        let p = Self { p_inpaint };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_inpaint) {
            return input_err(format!("p_inpaint {} is outside [0, 1]", self.p_inpaint));
        }
        Ok(())
    }

    /// True when completions do not depend on the random stream.
    pub fn is_deterministic(&self) -> bool {
        self.p_inpaint == 0.0 || self.p_inpaint == 1.0
    }
}

/// Kept building ids (of the noisy city) and kept measurement indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub buildings: Vec<u32>,
    pub measurements: Vec<usize>,
}

/// Completion on flag vectors aligned with the noisy city's buildings and
/// the scene's measurements. Draws one uniform per measurement, in order,
/// whether kept or not, so selections that differ in one item share the
/// remaining draws. Entry `m` of the result is `None` when dropped.
pub(crate) fn complete_flags(
    scene: &RadioScene,
    keep_buildings: &[bool],
    keep_measurements: &[bool],
    policy: &CompletionPolicy,
    rng: &mut Rng,
) -> (CityMap, Vec<Option<f64>>) {
    let noisy = scene.noisy_city();
    let kept: Vec<u32> = noisy
        .buildings()
        .iter()
        .zip(keep_buildings)
        .filter(|(_, &k)| k)
        .map(|(b, _)| b.id)
        .collect();
    let city = noisy.filtered(|id| kept.contains(&id));
    let params = PropagationParams::default();
    let values = scene
        .measurements()
        .iter()
        .zip(keep_measurements)
        .map(|(m, &keep)| {
            let u: f64 = rng.random();
            if keep {
                Some(m.strength)
            } else if u < policy.p_inpaint {
                Some(strength_at(&city, scene.tx(), m.cell(), &params))
            } else {
                None
            }
        })
        .collect();
    (city, values)
}

/// The estimator input induced by a selection: only the selected buildings
/// (buildings are never refilled), the selected measurements, and each
/// unchosen measurement refilled with probability `p_inpaint`.
pub fn complete_input(
    scene: &RadioScene,
    selection: &Selection,
    policy: &CompletionPolicy,
    seed: u64,
) -> Result<RadioInput> {
    policy.validate()?;
    let noisy = scene.noisy_city();
    if let Some(id) = selection.buildings.iter().find(|&&id| noisy.building(id).is_none()) {
        return input_err(format!("unknown building id {id}"));
    }
    let n_m = scene.measurements().len();
    if let Some(m) = selection.measurements.iter().find(|&&m| m >= n_m) {
        return input_err(format!("unknown measurement id {m}"));
    }
    let keep_b: Vec<bool> = noisy
        .buildings()
        .iter()
        .map(|b| selection.buildings.contains(&b.id))
        .collect();
    let keep_m: Vec<bool> = (0..n_m).map(|i| selection.measurements.contains(&i)).collect();
    let mut rng = rng_from_seed(seed);
    let (city, values) = complete_flags(scene, &keep_b, &keep_m, policy, &mut rng);
    Ok(assemble(scene, city, &values))
}

pub(crate) fn assemble(scene: &RadioScene, city: CityMap, values: &[Option<f64>]) -> RadioInput {
    let measurements = scene
        .measurements()
        .iter()
        .zip(values)
        .filter_map(|(m, v)| v.map(|strength| Measurement { strength, ..*m }))
        .collect();
    RadioInput {
        city,
        tx: scene.tx(),
        measurements,
    }
}
