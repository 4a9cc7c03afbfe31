use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, RdxError, Result};
use crate::rng::rng_from_seed;

/// Placement attempts allowed before [`generate_city`] gives up.
pub const MAX_REJECTIONS: usize = 10_000;

/// Axis-aligned building covering cells `x0..=x1` × `y0..=y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Building {
    pub id: u32,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Building {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn overlaps(&self, other: &Building) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }
}

#[derive(Deserialize)]
struct RawCity {
    height: usize,
    width: usize,
    buildings: Vec<Building>,
}

/// Occupancy grid plus the disjoint rectangles it rasterizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCity")]
pub struct CityMap {
    height: usize,
    width: usize,
    buildings: Vec<Building>,
    #[serde(skip)]
    owner: Vec<Option<u32>>,
}

impl TryFrom<RawCity> for CityMap {
    type Error = RdxError;
    fn try_from(r: RawCity) -> Result<Self> {
        CityMap::new(r.height, r.width, r.buildings)
    }
}

impl CityMap {
    pub fn new(height: usize, width: usize, buildings: Vec<Building>) -> Result<Self> {
        if height == 0 || width == 0 {
            return input_err("city grid must be non-empty");
        }
        let mut ids = BTreeSet::new();
        for (i, b) in buildings.iter().enumerate() {
            if b.x0 > b.x1 || b.y0 > b.y1 || b.x1 >= width || b.y1 >= height {
                return input_err(format!("building {} lies outside the {width}×{height} grid", b.id));
            }
            if !ids.insert(b.id) {
                return input_err(format!("duplicate building id {}", b.id));
            }
            if let Some(o) = buildings[..i].iter().find(|o| o.overlaps(b)) {
                return input_err(format!("buildings {} and {} overlap", o.id, b.id));
            }
        }
        let mut owner = vec![None; height * width];
        for b in &buildings {
            for y in b.y0..=b.y1 {
                for x in b.x0..=b.x1 {
                    owner[y * width + x] = Some(b.id);
                }
            }
        }
        Ok(Self {
            height,
            width,
            buildings,
            owner,
        })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, Vec::new())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn building(&self, id: u32) -> Option<&Building> {
        self.buildings.iter().find(|b| b.id == id)
    }

    pub fn in_bounds(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height
    }

    /// Id of the building covering a cell. Out-of-bounds cells have none.
    pub fn owner(&self, x: usize, y: usize) -> Option<u32> {
        if self.in_bounds(x, y) {
            self.owner[y * self.width + x]
        } else {
            None
        }
    }

    pub fn is_occupied(&self, x: usize, y: usize) -> bool {
        self.owner(x, y).is_some()
    }

    /// Row-major occupancy, 1 inside buildings.
    pub fn grid(&self) -> Vec<u8> {
        self.owner.iter().map(|o| u8::from(o.is_some())).collect()
    }

    /// Flat indices of free cells, ascending.
    pub fn free_cells(&self) -> Vec<usize> {
        (0..self.owner.len()).filter(|&i| self.owner[i].is_none()).collect()
    }

    /// The city restricted to buildings whose id satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(u32) -> bool) -> CityMap {
        let kept = self.buildings.iter().copied().filter(|b| keep(b.id)).collect();
        CityMap::new(self.height, self.width, kept).expect("subset of a valid city")
    }

    /// The city without the listed buildings.
    pub fn without(&self, ids: &[u32]) -> Result<CityMap> {
        if let Some(id) = ids.iter().find(|&&id| self.building(id).is_none()) {
            return input_err(format!("unknown building id {id}"));
        }
        Ok(self.filtered(|id| !ids.contains(&id)))
    }
}

/// Parameters of the random city generator. Side lengths are drawn
/// uniformly from `min_size..=max_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CityParams {
    pub height: usize,
    pub width: usize,
    pub n_buildings: usize,
    pub min_size: usize,
    pub max_size: usize,
}

impl Default for CityParams {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            n_buildings: 8,
            min_size: 2,
            max_size: 6,
        }
    }
}

/// Rejection-samples `n_buildings` disjoint rectangles; ids are `0..n`.
pub fn generate_city(seed: u64, params: &CityParams) -> Result<CityMap> {
    let CityParams {
        height,
        width,
        n_buildings,
        min_size,
        max_size,
    } = *params;
    if min_size == 0 || min_size > max_size || max_size > height.min(width) {
        return input_err(format!(
            "building sizes {min_size}..={max_size} do not fit a {width}×{height} grid"
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut buildings: Vec<Building> = Vec::with_capacity(n_buildings);
    let mut rejections = 0;
    while buildings.len() < n_buildings {
        let w = rng.random_range(min_size..=max_size);
        let h = rng.random_range(min_size..=max_size);
        let x0 = rng.random_range(0..=width - w);
        let y0 = rng.random_range(0..=height - h);
        let b = Building {
            id: buildings.len() as u32,
            x0,
            y0,
            x1: x0 + w - 1,
            y1: y0 + h - 1,
        };
        if buildings.iter().any(|o| o.overlaps(&b)) {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(RdxError::Generation(format!(
                    "placed {} of {n_buildings} buildings before {MAX_REJECTIONS} rejections",
                    buildings.len()
                )));
            }
            continue;
        }
        buildings.push(b);
    }
    CityMap::new(height, width, buildings)
}
