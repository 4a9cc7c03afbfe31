use super::city::{Building, CityMap};
use super::propagation::simulate_radio;
use super::scene::{Cell, Measurement, RadioScene, Region};

/// A pinned 32×32 scene with one building missing from the noisy city,
/// three measurements in its shadow and three in line of sight just before
/// it, plus scattered measurements elsewhere.
#[derive(Debug, Clone)]
pub struct ShadowFixture {
    pub scene: RadioScene,
    pub removed_id: u32,
    /// Measurement indices inside the removed building's shadow.
    pub shadow: Vec<usize>,
    /// Measurement indices with line of sight, between tx and the building.
    pub line_of_sight: Vec<usize>,
}

const TX: Cell = Cell { x: 4, y: 16 };

fn rect(id: u32, x0: usize, y0: usize, x1: usize, y1: usize) -> Building {
    Building { id, x0, y0, x1, y1 }
}

fn fixture_city() -> CityMap {
    CityMap::new(
        32,
        32,
        vec![
            rect(0, 14, 12, 17, 19),
            rect(1, 2, 2, 6, 5),
            rect(2, 24, 2, 29, 7),
            rect(3, 24, 24, 29, 29),
            rect(4, 8, 26, 11, 30),
            rect(5, 2, 22, 5, 25),
        ],
    )
    .expect("pinned city is valid")
}

const SHADOW: [(usize, usize); 3] = [(19, 14), (20, 16), (21, 17)];
const LINE_OF_SIGHT: [(usize, usize); 3] = [(11, 13), (12, 16), (11, 18)];
const SCATTERED: [(usize, usize); 5] = [(6, 9), (28, 12), (22, 28), (3, 28), (18, 4)];

fn scene_with_region(region: Region) -> RadioScene {
    let city = fixture_city();
    let gt = simulate_radio(&city, TX).expect("tx is free");
    let measurements = SHADOW
        .iter()
        .chain(&LINE_OF_SIGHT)
        .chain(&SCATTERED)
        .map(|&(x, y)| Measurement { x, y, strength: gt.get(x, y) })
        .collect();
    RadioScene::new(city, TX, vec![0], measurements, region).expect("pinned scene is valid")
}

pub fn shadow_fixture() -> ShadowFixture {
    ShadowFixture {
        scene: scene_with_region(Region { x0: 15, y0: 13, x1: 21, y1: 18 }),
        removed_id: 0,
        shadow: (0..SHADOW.len()).collect(),
        line_of_sight: (SHADOW.len()..SHADOW.len() + LINE_OF_SIGHT.len()).collect(),
    }
}

/// The shadow fixture queried on a patch behind the transmitter that has
/// line of sight and no measurement within the estimator's radius.
pub fn far_region_fixture() -> RadioScene {
    scene_with_region(Region { x0: 0, y0: 14, x1: 2, y1: 18 })
}
