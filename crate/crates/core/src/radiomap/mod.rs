//! Grid-city radio world: a deterministic propagation simulator, measurement
//! campaigns, a measurement-corrected estimator that plays the model under
//! explanation, input completions, and region explanations.
//!
//! Coordinates are `(x, y)` = (column, row); the flat cell index is
//! `y · width + x`.

mod city;
mod completion;
mod estimator;
mod explain;
mod fixtures;
pub mod io;
mod propagation;
mod scene;

pub use city::{generate_city, Building, CityMap, CityParams, MAX_REJECTIONS};
pub use completion::{complete_input, CompletionPolicy, Selection};
pub use estimator::{phi_model, phi_model_with, PhiParams};
pub use explain::{
    explain_region, RadioEncoding, RadioInfill, RadioInputModel, RegionQuery, ABSENT,
};
pub use fixtures::{far_region_fixture, shadow_fixture, ShadowFixture};
pub use propagation::{
    buildings_crossed, simulate_radio, simulate_radio_with, strength_at, PropagationParams,
    RadioMap,
};
pub use scene::{sample_measurements, Cell, Measurement, RadioInput, RadioScene, Region};
