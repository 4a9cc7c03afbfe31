//! Black-box model interface and reference models.
//!
//! A model maps an input vector to a vector of pre-activation scores. The
//! explanation target is always a linear functional of those scores, chosen
//! through an [`OutputSelector`]: either a single coordinate or a weighted
//! mean over a region of outputs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Datum;
use crate::error::{input_err, RdxError, Result};

/// The black box under explanation.
///
/// Implementations must be callable concurrently; the Monte-Carlo estimator
/// evaluates independent draws on several threads.
pub trait ModelOracle: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    /// Scores for an input of length `in_dim`. Callers check the length.
    fn forward(&self, x: &[f64]) -> Vec<f64>;

    fn has_gradient(&self) -> bool {
        false
    }

    /// Gradient of `Σ_k out_weights[k] · forward(x)[k]` with respect to `x`.
    fn weighted_gradient(&self, _x: &[f64], _out_weights: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Which scalar of the model output is explained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSelector {
    Index(usize),
    /// Non-negative weights over all outputs summing to 1.
    Region(Vec<f64>),
}

impl OutputSelector {
    /// Uniform weights over the listed output coordinates.
    pub fn uniform_region(out_dim: usize, cells: &[usize]) -> Result<Self> {
        if cells.is_empty() {
            return input_err("region must contain at least one output");
        }
        let mut w = vec![0.0; out_dim];
        let share = 1.0 / cells.len() as f64;
        for &c in cells {
            if c >= out_dim {
                return input_err(format!("region output {c} out of range {out_dim}"));
            }
            w[c] += share;
        }
        Ok(Self::Region(w))
    }

    pub fn validate(&self, out_dim: usize) -> Result<()> {
        match self {
            Self::Index(i) if *i >= out_dim => {
                input_err(format!("output index {i} out of range for {out_dim} outputs"))
            }
            Self::Index(_) => Ok(()),
            Self::Region(w) => {
                if w.len() != out_dim {
                    return input_err(format!(
                        "region has {} weights but the model has {out_dim} outputs",
                        w.len()
                    ));
                }
                if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return input_err("region weights must be finite and non-negative");
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return input_err(format!("region weights sum to {total}, expected 1"));
                }
                Ok(())
            }
        }
    }

    pub fn select(&self, scores: &[f64]) -> f64 {
        match self {
            Self::Index(i) => scores[*i],
            Self::Region(w) => w.iter().zip(scores).map(|(a, b)| a * b).sum(),
        }
    }

    /// The selector as a dense weight vector over outputs.
    pub fn weights(&self, out_dim: usize) -> Vec<f64> {
        match self {
            Self::Index(i) => {
                let mut w = vec![0.0; out_dim];
                w[*i] = 1.0;
                w
            }
            Self::Region(w) => w.clone(),
        }
    }
}

fn check_input(model: &dyn ModelOracle, x: &[f64]) -> Result<()> {
    if x.len() != model.in_dim() {
        return input_err(format!(
            "model expects {} inputs, got {}",
            model.in_dim(),
            x.len()
        ));
    }
    Ok(())
}

pub fn evaluate(model: &dyn ModelOracle, x: &Datum) -> Result<Vec<f64>> {
    check_input(model, x.values())?;
    let out = model.forward(x.values());
    if out.len() != model.out_dim() || out.iter().any(|v| !v.is_finite()) {
        return Err(RdxError::Numerical(
            "model returned a non-finite or mis-sized score vector".into(),
        ));
    }
    Ok(out)
}

pub fn select_output(model: &dyn ModelOracle, x: &Datum, sel: &OutputSelector) -> Result<f64> {
    sel.validate(model.out_dim())?;
    Ok(sel.select(&evaluate(model, x)?))
}

/// Per-component step of the central finite-difference fallback.
pub fn fd_step(xi: f64) -> f64 {
    (1e-4 * xi.abs()).max(1e-4)
}

/// Central finite differences of the selected output.
pub fn finite_difference_gradient(
    model: &dyn ModelOracle,
    x: &[f64],
    sel: &OutputSelector,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            probe[i] = x[i] + h;
            let up = sel.select(&model.forward(&probe));
            probe[i] = x[i] - h;
            let down = sel.select(&model.forward(&probe));
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Unchecked gradient used on hot paths.
pub(crate) fn gradient_unchecked(
    model: &dyn ModelOracle,
    x: &[f64],
    sel: &OutputSelector,
    out_weights: &[f64],
) -> Vec<f64> {
    if model.has_gradient() {
        if let Some(g) = model.weighted_gradient(x, out_weights) {
            return g;
        }
    }
    finite_difference_gradient(model, x, sel)
}

/// Gradient of the selected output with respect to the input; analytic when
/// the model provides it, central finite differences otherwise.
pub fn input_gradient(model: &dyn ModelOracle, x: &Datum, sel: &OutputSelector) -> Result<Vec<f64>> {
    check_input(model, x.values())?;
    sel.validate(model.out_dim())?;
    let w = sel.weights(model.out_dim());
    Ok(gradient_unchecked(model, x.values(), sel, &w))
}

/// Affine map `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `out_dim` rows of `in_dim` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights[0].is_empty() {
            return input_err("linear model needs at least one weight");
        }
        let n = weights[0].len();
        if weights.iter().any(|r| r.len() != n) || bias.len() != weights.len() {
            return input_err("linear model weight rows and bias disagree in size");
        }
        Ok(Self { weights, bias })
    }

    /// Single-output model `w · x + b`.
    pub fn scalar(w: Vec<f64>, b: f64) -> Self {
        Self {
            weights: vec![w],
            bias: vec![b],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelOracle for LinearModel {
    fn in_dim(&self) -> usize {
        self.weights[0].len()
    }
    fn out_dim(&self) -> usize {
        self.weights.len()
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn weighted_gradient(&self, _x: &[f64], out_weights: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.in_dim()];
        for (row, &c) in self.weights.iter().zip(out_weights) {
            if c != 0.0 {
                for (gi, wi) in g.iter_mut().zip(row) {
                    *gi += c * wi;
                }
            }
        }
        Some(g)
    }
}

/// Which side of the sigmoid a [`LogisticModel`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// The logit `w · x + b`.
    #[default]
    Pre,
    /// `sigmoid(w · x + b)`.
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub output: Activation,
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self {
            weights,
            bias,
            output: Activation::Pre,
        }
    }

    pub fn with_output(mut self, output: Activation) -> Self {
        self.output = output;
        self
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ModelOracle for LogisticModel {
    fn in_dim(&self) -> usize {
        self.weights.len()
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let z = dot(&self.weights, x) + self.bias;
        match self.output {
            Activation::Pre => vec![z],
            Activation::Post => vec![sigmoid(z)],
        }
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn weighted_gradient(&self, x: &[f64], out_weights: &[f64]) -> Option<Vec<f64>> {
        let c = out_weights[0];
        let scale = match self.output {
            Activation::Pre => c,
            Activation::Post => {
                let s = sigmoid(dot(&self.weights, x) + self.bias);
                c * s * (1.0 - s)
            }
        };
        Some(self.weights.iter().map(|w| scale * w).collect())
    }
}

/// Two-layer perceptron `W2 · tanh(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn new(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<Vec<f64>>, b2: Vec<f64>) -> Result<Self> {
        let hidden = w1.len();
        if hidden == 0 || w1[0].is_empty() || w2.is_empty() {
            return input_err("mlp layers must be non-empty");
        }
        let n_in = w1[0].len();
        if w1.iter().any(|r| r.len() != n_in)
            || b1.len() != hidden
            || w2.iter().any(|r| r.len() != hidden)
            || b2.len() != w2.len()
        {
            return input_err("mlp layer shapes are inconsistent");
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.len()
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (dot(row, x) + b).tanh())
            .collect()
    }
}

impl ModelOracle for Mlp {
    fn in_dim(&self) -> usize {
        self.w1[0].len()
    }
    fn out_dim(&self) -> usize {
        self.w2.len()
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hidden(x);
        self.w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &h) + b)
            .collect()
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn weighted_gradient(&self, x: &[f64], out_weights: &[f64]) -> Option<Vec<f64>> {
        let h = self.hidden(x);
        let mut g = vec![0.0; self.in_dim()];
        for (k, hk) in h.iter().enumerate() {
            let back: f64 = self
                .w2
                .iter()
                .zip(out_weights)
                .map(|(row, c)| c * row[k])
                .sum();
            let delta = back * (1.0 - hk * hk);
            if delta != 0.0 {
                for (gi, wi) in g.iter_mut().zip(&self.w1[k]) {
                    *gi += delta * wi;
                }
            }
        }
        Some(g)
    }
}

/// A model that ignores its input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel {
    pub in_dim: usize,
    pub scores: Vec<f64>,
}

impl ModelOracle for ConstantModel {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.scores.len()
    }
    fn forward(&self, _x: &[f64]) -> Vec<f64> {
        self.scores.clone()
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn weighted_gradient(&self, _x: &[f64], _w: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.in_dim])
    }
}

/// Reference model loaded from a fixture file.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceModel {
    Linear(LinearModel),
    Logistic(LogisticModel),
    Mlp(Mlp),
}

impl ReferenceModel {
    pub fn as_oracle(&self) -> &dyn ModelOracle {
        match self {
            Self::Linear(m) => m,
            Self::Logistic(m) => m,
            Self::Mlp(m) => m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Linear(_) => "linear",
            Self::Logistic(_) => "logistic",
            Self::Mlp(_) => "mlp",
        }
    }

    /// Parses the fixture format:
    ///
    /// ```text
    /// MODEL linear <in> <out>          then <out> rows of <in> weights, 1 row of <out> biases
    /// MODEL logistic <in> 1            then 1 row of <in> weights, 1 row holding the bias
    /// MODEL mlp <in> <out> <hidden>    then W1 (<hidden> rows), b1, W2 (<out> rows), b2
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored. Numbers are parsed
    /// as binary64 exactly as written.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(RdxError::Parse {
            line: 0,
            message: "empty model file".into(),
        })?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let perr = |line: usize, message: String| RdxError::Parse { line, message };
        if tokens.first() != Some(&"MODEL") || tokens.len() < 4 {
            return Err(perr(
                hline,
                "expected header `MODEL <kind> <in_dim> <out_dim>`".into(),
            ));
        }
        let dim = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(perr(hline, format!("invalid dimension `{t}`"))),
            }
        };
        let in_dim = dim(tokens[2])?;
        let out_dim = dim(tokens[3])?;

        let rows: Vec<(usize, Vec<f64>)> = lines
            .map(|(n, l)| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| perr(n, format!("invalid number `{t}`")))
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map(|r| (n, r))
            })
            .collect::<Result<_>>()?;

        let mut cursor = rows.into_iter();
        let mut take = |count: usize, width: usize, what: &str| -> Result<Vec<Vec<f64>>> {
            (0..count)
                .map(|_| {
                    let (n, row) = cursor
                        .next()
                        .ok_or_else(|| perr(hline, format!("missing rows for {what}")))?;
                    if row.len() != width {
                        return Err(perr(
                            n,
                            format!("{what} row has {} values, expected {width}", row.len()),
                        ));
                    }
                    Ok(row)
                })
                .collect()
        };

        let model = match tokens[1] {
            "linear" => {
                if tokens.len() != 4 {
                    return Err(perr(hline, "linear header takes exactly 3 fields".into()));
                }
                let w = take(out_dim, in_dim, "weight")?;
                let b = take(1, out_dim, "bias")?.remove(0);
                Self::Linear(LinearModel::new(w, b)?)
            }
            "logistic" => {
                if tokens.len() != 4 || out_dim != 1 {
                    return Err(perr(hline, "logistic models have exactly one output".into()));
                }
                let w = take(1, in_dim, "weight")?.remove(0);
                let b = take(1, 1, "bias")?.remove(0)[0];
                Self::Logistic(LogisticModel::new(w, b))
            }
            "mlp" => {
                if tokens.len() != 5 {
                    return Err(perr(
                        hline,
                        "mlp header is `MODEL mlp <in_dim> <out_dim> <hidden>`".into(),
                    ));
                }
                let hidden = dim(tokens[4])?;
                let w1 = take(hidden, in_dim, "W1")?;
                let b1 = take(1, hidden, "b1")?.remove(0);
                let w2 = take(out_dim, hidden, "W2")?;
                let b2 = take(1, out_dim, "b2")?.remove(0);
                Self::Mlp(Mlp::new(w1, b1, w2, b2)?)
            }
            other => return Err(perr(hline, format!("unknown model kind `{other}`"))),
        };
        if let Some((n, _)) = cursor.next() {
            return Err(perr(n, "unexpected trailing rows".into()));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Writes the fixture format; floats use the shortest round-trip form.
    pub fn to_fixture(&self) -> String {
        fn row(out: &mut String, r: &[f64]) {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        let mut s = String::new();
        match self {
            Self::Linear(m) => {
                let _ = writeln!(s, "MODEL linear {} {}", m.in_dim(), m.out_dim());
                m.weights.iter().for_each(|r| row(&mut s, r));
                row(&mut s, &m.bias);
            }
            Self::Logistic(m) => {
                let _ = writeln!(s, "MODEL logistic {} 1", m.in_dim());
                row(&mut s, &m.weights);
                row(&mut s, &[m.bias]);
            }
            Self::Mlp(m) => {
                let _ = writeln!(
                    s,
                    "MODEL mlp {} {} {}",
                    m.in_dim(),
                    m.out_dim(),
                    m.hidden_dim()
                );
                m.w1.iter().for_each(|r| row(&mut s, r));
                row(&mut s, &m.b1);
                m.w2.iter().for_each(|r| row(&mut s, r));
                row(&mut s, &m.b2);
            }
        }
        s
    }
}
