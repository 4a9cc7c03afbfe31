//! Shared domain types: data vectors, component groupings, masks and
//! explanation results.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, RdxError, Result};

/// Lower clamp for Bernoulli inclusion probabilities. The upper clamp is
/// `1 - THETA_EPS`; both keep `logit(theta)` finite.
pub const THETA_EPS: f64 = 1e-6;

/// Default threshold used to turn soft masks into reported binary masks.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// A finite real-valued input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Datum {
    values: Vec<f64>,
}

impl Datum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return input_err("datum must have at least one component");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return input_err(format!("datum component {i} is not finite"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for Datum {
    type Error = RdxError;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Datum::new(values)
    }
}

impl From<Datum> for Vec<f64> {
    fn from(d: Datum) -> Self {
        d.values
    }
}

/// Ordered list of disjoint, non-empty index sets. Mask entry `g` controls
/// every component listed in group `g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentGrouping {
    groups: Vec<Vec<usize>>,
}

impl ComponentGrouping {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return config_err("grouping must contain at least one group");
        }
        let mut seen = BTreeSet::new();
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return config_err(format!("group {g} is empty"));
            }
            for &j in members {
                if !seen.insert(j) {
                    return config_err(format!("component {j} appears in more than one group"));
                }
            }
        }
        Ok(Self { groups })
    }

    /// One group per component.
    pub fn trivial(dim: usize) -> Self {
        Self {
            groups: (0..dim).map(|j| vec![j]).collect(),
        }
    }

    /// Contiguous blocks of the given sizes laid out back to back.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut groups = Vec::with_capacity(sizes.len());
        for &n in sizes {
            groups.push((start..start + n).collect());
            start += n;
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Largest component index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.groups.iter().flatten().copied().max()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.max_index() {
            Some(m) if m >= dim => config_err(format!(
                "grouping references component {m} but the datum has {dim} components"
            )),
            _ => Ok(()),
        }
    }
}

/// Per-group relevance weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Mask {
    weights: Vec<f64>,
}

impl Mask {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
            return input_err(format!(
                "mask weight {i} = {} lies outside [0, 1]",
                weights[i]
            ));
        }
        Ok(Self { weights })
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Binary mask preserving exactly the listed groups.
    pub fn from_selection(n: usize, selected: &[usize]) -> Result<Self> {
        let mut weights = vec![0.0; n];
        for &g in selected {
            if g >= n {
                return input_err(format!("group {g} out of range for {n} groups"));
            }
            weights[g] = 1.0;
        }
        Ok(Self { weights })
    }

    /// Clips each weight into `[0, 1]`; NaN maps to 0.
    pub fn clipped(weights: Vec<f64>) -> Self {
        let weights = weights
            .into_iter()
            .map(|w| if w.is_nan() { 0.0 } else { w.clamp(0.0, 1.0) })
            .collect();
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "weight")?;
        for w in &self.weights {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

impl TryFrom<Vec<f64>> for Mask {
    type Error = RdxError;
    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Mask::new(weights)
    }
}

impl From<Mask> for Vec<f64> {
    fn from(m: Mask) -> Self {
        m.weights
    }
}

/// Bernoulli inclusion probabilities and the concrete relaxation temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliParams {
    theta: Vec<f64>,
    temperature: f64,
}

impl BernoulliParams {
    pub fn new(theta: Vec<f64>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return config_err("temperature must be positive");
        }
        let mut p = Self { theta, temperature };
        p.clamp();
        Ok(p)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Restores `theta` into `[THETA_EPS, 1 - THETA_EPS]`.
    pub fn clamp(&mut self) {
        for t in &mut self.theta {
            *t = if t.is_nan() {
                0.5
            } else {
                t.clamp(THETA_EPS, 1.0 - THETA_EPS)
            };
        }
    }

    pub fn to_mask(&self) -> Mask {
        Mask::clipped(self.theta.clone())
    }
}

/// Result of a mask search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub final_mask: Mask,
    /// `(sparsity, distortion)` pairs in the order they were produced.
    pub distortion_curve: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selected_order: Option<Vec<usize>>,
    pub config_echo: serde_json::Value,
}

impl Explanation {
    pub fn validate(&self) -> Result<()> {
        for (i, (s, d)) in self.distortion_curve.iter().enumerate() {
            if !(s.is_finite() && d.is_finite() && *s >= 0.0 && *d >= 0.0) {
                return Err(RdxError::Numerical(format!(
                    "curve entry {i} = ({s}, {d}) is not finite and non-negative"
                )));
            }
        }
        if let Some(order) = &self.selected_order {
            let unique: BTreeSet<_> = order.iter().collect();
            if unique.len() != order.len() {
                return input_err("selected order contains repeated groups");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Explanation = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }
}

/// Broadcasts group weights onto components. Components outside every
/// group keep weight 1.
pub fn expand_mask(mask: &Mask, grouping: &ComponentGrouping, dim: usize) -> Result<Vec<f64>> {
    if mask.len() != grouping.n_groups() {
        return config_err(format!(
            "mask has {} entries but the grouping has {} groups",
            mask.len(),
            grouping.n_groups()
        ));
    }
    grouping.check_dim(dim)?;
    let mut out = vec![1.0; dim];
    for (w, members) in mask.weights().iter().zip(grouping.groups()) {
        for &j in members {
            out[j] = *w;
        }
    }
    Ok(out)
}

pub fn binarize(mask: &Mask, threshold: f64) -> Mask {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    Mask {
        weights: mask
            .weights()
            .iter()
            .map(|&w| if w >= threshold { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// `(l1, l0)` of the mask weights.
pub fn sparsity(mask: &Mask) -> (f64, usize) {
    let l1 = mask.weights().iter().sum();
    let l0 = mask.weights().iter().filter(|&&w| w > 0.0).count();
    (l1, l0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(w: &[f64]) -> Mask {
        Mask::new(w.to_vec()).unwrap()
    }

    #[test]
    fn expand_identity_group() {
        let g = ComponentGrouping::new(vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(expand_mask(&mask(&[1.0]), &g, 3).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn expand_broadcasts_groups() {
        let g = ComponentGrouping::new(vec![vec![0, 2], vec![1]]).unwrap();
        assert_eq!(
            expand_mask(&mask(&[0.5, 1.0]), &g, 3).unwrap(),
            vec![0.5, 1.0, 0.5]
        );
    }

    #[test]
    fn expand_keeps_ungrouped_components() {
        let g = ComponentGrouping::new(vec![vec![1]]).unwrap();
        assert_eq!(
            expand_mask(&mask(&[0.0]), &g, 3).unwrap(),
            vec![1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn expand_rejects_out_of_range() {
        let g = ComponentGrouping::new(vec![vec![3]]).unwrap();
        assert!(matches!(
            expand_mask(&mask(&[0.0]), &g, 3),
            Err(RdxError::Config(_))
        ));
    }

    #[test]
    fn grouping_rejects_overlap_and_empty() {
        assert!(ComponentGrouping::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(ComponentGrouping::new(vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(&mask(&[0.9, 0.1]), 0.5).weights(), &[1.0, 0.0]);
        assert_eq!(binarize(&mask(&[0.5]), 0.5).weights(), &[1.0]);
        assert_eq!(
            binarize(&mask(&[1.0, 0.0, 0.7]), 0.5).weights(),
            &[1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity(&mask(&[0.0, 0.0, 0.0])), (0.0, 0));
        assert_eq!(sparsity(&mask(&[1.0, 1.0])), (2.0, 2));
        assert_eq!(sparsity(&mask(&[0.25, 0.75, 0.0])), (1.0, 2));
    }

    #[test]
    fn datum_and_mask_validation() {
        assert!(Datum::new(vec![1.0, f64::NAN]).is_err());
        assert!(Datum::new(vec![]).is_err());
        assert!(Mask::new(vec![1.5]).is_err());
        assert!(Mask::new(vec![-0.1]).is_err());
    }

    #[test]
    fn theta_is_clamped() {
        let p = BernoulliParams::new(vec![0.0, 1.0, 0.3], 0.1).unwrap();
        assert_eq!(p.theta(), &[THETA_EPS, 1.0 - THETA_EPS, 0.3]);
        assert!(BernoulliParams::new(vec![0.5], 0.0).is_err());
    }

    #[test]
    fn explanation_json_layout() {
        let e = Explanation {
            final_mask: mask(&[1.0, 0.0]),
            distortion_curve: vec![(0.0, 2.0), (1.0, 0.5)],
            selected_order: Some(vec![0]),
            config_echo: serde_json::json!({"lambda": 1.0}),
        };
        let v: serde_json::Value = serde_json::from_str(&e.to_json().unwrap()).unwrap();
        assert_eq!(v["final_mask"], serde_json::json!([1.0, 0.0]));
        assert_eq!(v["distortion_curve"], serde_json::json!([[0.0, 2.0], [1.0, 0.5]]));
        assert_eq!(v["selected_order"], serde_json::json!([0]));
        assert_eq!(v["config_echo"]["lambda"], serde_json::json!(1.0));
        assert_eq!(Explanation::from_json(&e.to_json().unwrap()).unwrap(), e);
    }

    #[test]
    fn explanation_rejects_bad_curve_and_order() {
        let mut e = Explanation {
            final_mask: mask(&[1.0]),
            distortion_curve: vec![(0.0, -1.0)],
            selected_order: None,
            config_echo: serde_json::Value::Null,
        };
        assert!(e.validate().is_err());
        e.distortion_curve = vec![(0.0, 1.0)];
        e.selected_order = Some(vec![0, 0]);
        assert!(e.validate().is_err());
    }

    #[test]
    fn mask_csv_is_single_column() {
        let mut buf = Vec::new();
        mask(&[0.25, 1.0]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "weight\n0.25\n1\n");
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        prop::collection::vec(0.0f64..=1.0, 1..16).prop_map(|w| Mask::new(w).unwrap())
    }

    proptest! {
        #[test]
        fn expand_trivial_is_identity(m in arb_mask()) {
            let g = ComponentGrouping::trivial(m.len());
            prop_assert_eq!(expand_mask(&m, &g, m.len()).unwrap(), m.weights().to_vec());
        }

        #[test]
        fn binarize_is_idempotent(m in arb_mask(), t in 0.01f64..0.99) {
            let once = binarize(&m, t);
            prop_assert_eq!(binarize(&once, t), once.clone());
            let (l1, l0) = sparsity(&once);
            prop_assert_eq!(l1, l0 as f64);
        }
    }
}
