use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::city::CityMap;
use super::propagation::RadioMap;
use crate::error::{input_err, RdxError, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub x: usize,
    pub y: usize,
    pub strength: f64,
}

impl Measurement {
    pub fn cell(&self) -> Cell {
        Cell { x: self.x, y: self.y }
    }
}

/// Inclusive rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    /// Flat indices in row-major order.
    pub fn cells(&self, width: usize) -> Vec<usize> {
        (self.y0..=self.y1)
            .flat_map(|y| (self.x0..=self.x1).map(move |x| y * width + x))
            .collect()
    }
}

/// What the estimator sees: a (possibly partial) city, the transmitter and
/// a list of measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioInput {
    pub city: CityMap,
    pub tx: Cell,
    pub measurements: Vec<Measurement>,
}

#[derive(Deserialize)]
struct RawScene {
    city: CityMap,
    tx: Cell,
    removed_ids: Vec<u32>,
    measurements: Vec<Measurement>,
    region: Region,
}

/// Ground-truth city, the noisy city with some buildings removed, the
/// measurements and the region being explained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScene")]
pub struct RadioScene {
    city: CityMap,
    tx: Cell,
    removed_ids: Vec<u32>,
    measurements: Vec<Measurement>,
    region: Region,
    #[serde(skip)]
    noisy_city: CityMap,
}

impl TryFrom<RawScene> for RadioScene {
    type Error = RdxError;
    fn try_from(r: RawScene) -> Result<Self> {
        RadioScene::new(r.city, r.tx, r.removed_ids, r.measurements, r.region)
    }
}

impl RadioScene {
    pub fn new(
        city: CityMap,
        tx: Cell,
        removed_ids: Vec<u32>,
        measurements: Vec<Measurement>,
        region: Region,
    ) -> Result<Self> {
        if !city.in_bounds(tx.x, tx.y) || city.is_occupied(tx.x, tx.y) {
            return input_err(format!(
                "transmitter ({}, {}) must be a free in-grid cell",
                tx.x, tx.y
            ));
        }
        let noisy_city = city.without(&removed_ids)?;
        for (i, m) in measurements.iter().enumerate() {
            if !city.in_bounds(m.x, m.y) || noisy_city.is_occupied(m.x, m.y) {
                return input_err(format!("measurement {i} at ({}, {}) is not a free cell", m.x, m.y));
            }
            if !(0.0..=1.0).contains(&m.strength) {
                return input_err(format!("measurement {i} strength {} is outside [0, 1]", m.strength));
            }
        }
        if region.x0 > region.x1 || region.y0 > region.y1 || !city.in_bounds(region.x1, region.y1) {
            return input_err("region must be a non-empty rectangle inside the grid");
        }
        Ok(Self {
            city,
            tx,
            removed_ids,
            measurements,
            region,
            noisy_city,
        })
    }

    pub fn city(&self) -> &CityMap {
        &self.city
    }

    pub fn noisy_city(&self) -> &CityMap {
        &self.noisy_city
    }

    pub fn tx(&self) -> Cell {
        self.tx
    }

    pub fn removed_ids(&self) -> &[u32] {
        &self.removed_ids
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn with_region(&self, region: Region) -> Result<Self> {
        Self::new(
            self.city.clone(),
            self.tx,
            self.removed_ids.clone(),
            self.measurements.clone(),
            region,
        )
    }

    /// The full input: noisy city and every measurement.
    pub fn input(&self) -> RadioInput {
        RadioInput {
            city: self.noisy_city.clone(),
            tx: self.tx,
            measurements: self.measurements.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `n` cells drawn uniformly over the grid, redrawing any that land inside
/// a building, each annotated with the map value there.
pub fn sample_measurements(gt_map: &RadioMap, city: &CityMap, n: usize, seed: u64) -> Result<Vec<Measurement>> {
    if gt_map.height != city.height() || gt_map.width != city.width() {
        return input_err("radio map and city have different shapes");
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if city.free_cells().is_empty() {
        return input_err("the city has no free cell to measure");
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.random_range(0..city.width());
        let y = rng.random_range(0..city.height());
        if city.is_occupied(x, y) {
            continue;
        }
        out.push(Measurement {
            x,
            y,
            strength: gt_map.get(x, y),
        });
    }
    Ok(out)
}
