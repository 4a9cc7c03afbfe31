use serde::{Deserialize, Serialize};

use super::propagation::{simulate_radio, RadioMap};
use super::scene::RadioInput;
use crate::error::Result;

/// Measurement correction applied on top of the simulated map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    /// Cells farther than this from a measurement ignore it.
    pub radius: f64,
    /// Weight of the simulated value against the kernel-weighted residuals.
    pub prior_weight: f64,
}

impl Default for PhiParams {
    fn default() -> Self {
        Self {
            radius: 4.0,
            prior_weight: 0.5,
        }
    }
}

pub fn phi_model(input: &RadioInput) -> Result<RadioMap> {
    phi_model_with(input, &PhiParams::default())
}

/// Simulates the given city, then pulls each cell toward nearby measurement
/// residuals: `base + Σ k·r / (w₀ + Σ k)` with `k = 1/(1+d)` inside the
/// radius and `r = strength − base` at the measurement. Building cells
/// stay 0 and values are clamped to `[0, 1]`.
pub fn phi_model_with(input: &RadioInput, params: &PhiParams) -> Result<RadioMap> {
    let mut map = simulate_radio(&input.city, input.tx)?;
    if input.measurements.is_empty() {
        return Ok(map);
    }
    let w = map.width;
    let anchors: Vec<(f64, f64, f64)> = input
        .measurements
        .iter()
        .map(|m| (m.x as f64, m.y as f64, m.strength - map.get(m.x, m.y)))
        .collect();
    for (i, v) in map.values.iter_mut().enumerate() {
        let (x, y) = (i % w, i / w);
        if input.city.is_occupied(x, y) {
            continue;
        }
        let (mut num, mut den) = (0.0, params.prior_weight);
        for &(mx, my, r) in &anchors {
            let d = (x as f64 - mx).hypot(y as f64 - my);
            if d <= params.radius {
                let k = 1.0 / (1.0 + d);
                num += k * r;
                den += k;
            }
        }
        *v = (*v + num / den).clamp(0.0, 1.0);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::super::city::{CityMap, Building};
    use super::super::scene::{Cell, Measurement};
    use super::*;

    fn city() -> CityMap {
        let b = Building { id: 0, x0: 10, y0: 10, x1: 12, y1: 14 };
        CityMap::new(24, 24, vec![b]).unwrap()
    }

    #[test]
    fn no_measurements_is_simulation() {
        let input = RadioInput { city: city(), tx: Cell { x: 2, y: 12 }, measurements: vec![] };
        assert_eq!(phi_model(&input).unwrap(), simulate_radio(&input.city, input.tx).unwrap());
    }

    #[test]
    fn zero_residual_changes_nothing() {
        let tx = Cell { x: 2, y: 12 };
        let base = simulate_radio(&city(), tx).unwrap();
        let m = Measurement { x: 16, y: 12, strength: base.get(16, 12) };
        let input = RadioInput { city: city(), tx, measurements: vec![m] };
        assert_eq!(phi_model(&input).unwrap(), base);
    }

    #[test]
    fn deterministic() {
        let tx = Cell { x: 2, y: 12 };
        let ms = vec![
            Measurement { x: 16, y: 12, strength: 0.1 },
            Measurement { x: 5, y: 3, strength: 0.9 },
        ];
        let input = RadioInput { city: city(), tx, measurements: ms };
        let a = phi_model(&input).unwrap();
        assert_eq!(a, phi_model(&input).unwrap());
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.get(11, 12), 0.0);
    }
}
