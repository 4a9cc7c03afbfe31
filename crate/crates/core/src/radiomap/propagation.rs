use serde::{Deserialize, Serialize};

use super::city::{Building, CityMap};
use super::scene::Cell;
use crate::error::{input_err, Result};

/// Log-distance pathloss with per-wall attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub alpha: f64,
    /// Factor applied per building wall on the straight path.
    pub beta: f64,
}

impl Default for PropagationParams {
    /// `alpha` puts free-space strength at 0.2 at distance 64.
    fn default() -> Self {
        Self {
            alpha: 0.8 / 65f64.ln(),
            beta: 0.5,
        }
    }
}

impl PropagationParams {
    pub fn free_space(&self, dist: f64) -> f64 {
        (1.0 - self.alpha * dist.ln_1p()).clamp(0.0, 1.0)
    }
}

/// Row-major grid of strengths in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl RadioMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

fn centre(c: Cell) -> (f64, f64) {
    (c.x as f64 + 0.5, c.y as f64 + 0.5)
}

/// Whether the open segment between two cell centres passes through the
/// building's interior with positive length. Grazing a corner does not count.
fn segment_hits(a: (f64, f64), b: (f64, f64), r: &Building) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let axes = [
        (a.0, b.0 - a.0, r.x0 as f64, (r.x1 + 1) as f64),
        (a.1, b.1 - a.1, r.y0 as f64, (r.y1 + 1) as f64),
    ];
    for (p, d, lo, hi) in axes {
        if d == 0.0 {
            // Cell centres never sit on integer boundaries.
            if p < lo || p > hi {
                return false;
            }
        } else {
            let (ta, tb) = ((lo - p) / d, (hi - p) / d);
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    t1 - t0 > 1e-12
}

/// Buildings the straight path `from → to` passes through.
pub fn buildings_crossed(city: &CityMap, from: Cell, to: Cell) -> usize {
    let (a, b) = (centre(from), centre(to));
    city.buildings().iter().filter(|r| segment_hits(a, b, r)).count()
}

/// Strength at one cell. Each crossed building costs two walls.
pub fn strength_at(city: &CityMap, tx: Cell, cell: Cell, params: &PropagationParams) -> f64 {
    if city.is_occupied(cell.x, cell.y) {
        return 0.0;
    }
    let dist = (cell.x as f64 - tx.x as f64).hypot(cell.y as f64 - tx.y as f64);
    let walls = 2 * buildings_crossed(city, tx, cell);
    params.free_space(dist) * params.beta.powi(walls as i32)
}

pub fn simulate_radio(city: &CityMap, tx: Cell) -> Result<RadioMap> {
    simulate_radio_with(city, tx, &PropagationParams::default())
}

pub fn simulate_radio_with(city: &CityMap, tx: Cell, params: &PropagationParams) -> Result<RadioMap> {
    if !city.in_bounds(tx.x, tx.y) {
        return input_err(format!("transmitter ({}, {}) is outside the grid", tx.x, tx.y));
    }
    if let Some(id) = city.owner(tx.x, tx.y) {
        return input_err(format!("transmitter ({}, {}) is inside building {id}", tx.x, tx.y));
    }
    if !(params.alpha >= 0.0 && (0.0..=1.0).contains(&params.beta)) {
        return input_err("propagation needs alpha ≥ 0 and beta in [0, 1]");
    }
    let (h, w) = (city.height(), city.width());
    let values = (0..h * w)
        .map(|i| strength_at(city, tx, Cell { x: i % w, y: i / w }, params))
        .collect();
    Ok(RadioMap {
        height: h,
        width: w,
        values,
    })
}
