//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers. `#` starts a comment. Keys outside any section are
//! top-level. Every key is checked against the schema of the chosen task.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rdx_core::audio::{class_query_config, Channel};
use rdx_core::radiomap::CompletionPolicy;
use rdx_core::{Method, OptimConfig, UpdateRule};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    AudioPerFreq,
    AudioMagVsPhase,
    RadioExplain,
    DistortionProbe,
}

impl Task {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "audio_per_freq" => Some(Self::AudioPerFreq),
            "audio_mag_vs_phase" => Some(Self::AudioMagVsPhase),
            "radio_explain" => Some(Self::RadioExplain),
            "distortion_probe" => Some(Self::DistortionProbe),
            _ => None,
        }
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Self::AudioPerFreq | Self::AudioMagVsPhase => &["optim", "model", "sampler", "audio"],
            Self::RadioExplain => &["optim", "radio"],
            Self::DistortionProbe => &["optim", "model", "sampler", "data"],
        }
    }
}

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "" => &["task", "seed"],
        "optim" => &[
            "method",
            "steps",
            "step_size",
            "lambda",
            "temperature",
            "n_samples",
            "budget",
            "update",
            "init",
        ],
        "model" => &["classifier", "path", "output"],
        "sampler" => &["kind", "mean", "std", "value"],
        "audio" => &["per_class", "dataset_seed", "class", "item"],
        "radio" => &["fixture", "scene", "p_inpaint"],
        "data" => &["datum", "mask"],
        _ => &[],
    }
}

/// One `key = value` line.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but untyped configuration.
#[derive(Debug, Default)]
struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(inner) = body.strip_prefix('[') {
                let name = inner
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::config(Some(n), None, "unterminated section header"))?
                    .trim();
                if name.is_empty() || keys_of(name).is_empty() {
                    return Err(CliError::config(Some(n), None, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| CliError::config(Some(n), None, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if !keys_of(&section).contains(&k) {
                let place = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
                return Err(CliError::config(Some(n), Some(k), format!("unknown key at {place}")));
            }
            let prev = raw.entries.insert(
                (section.clone(), k.to_string()),
                Entry { line: n, value: v.to_string() },
            );
            if let Some(p) = prev {
                return Err(CliError::config(Some(n), Some(k), format!("duplicate key (first set on line {})", p.line)));
            }
        }
        Ok(raw)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn typed<T>(&self, section: &str, key: &str, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<Option<T>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).ok_or_else(|| {
                CliError::config(Some(e.line), Some(key), format!("expected {expected}, got `{}`", e.value))
            }),
        }
    }

    fn num(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        self.typed(section, key, |v| v.parse::<f64>().ok().filter(|x| x.is_finite()), "a finite number")
    }

    fn int(&self, section: &str, key: &str) -> Result<Option<usize>, CliError> {
        self.typed(section, key, |v| v.parse::<usize>().ok(), "a non-negative integer")
    }

    fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.typed(
            section,
            key,
            |v| {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect()
            },
            "a comma-separated list of numbers",
        )
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.get(section, key).map(|e| e.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Magnitude,
    Phase,
    Constant,
}

impl ClassifierKind {
    pub fn channel(self) -> Option<Channel> {
        match self {
            Self::Magnitude => Some(Channel::Magnitude),
            Self::Phase => Some(Channel::Phase),
            Self::Constant => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierKind>,
    /// Fixture path as written in the config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Per-component Gaussian fitted to the synthetic dataset.
    Fitted,
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    Constant { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AudioSpec {
    pub per_class: usize,
    pub dataset_seed: u64,
    pub class: usize,
    /// Index within the class (per-frequency task only).
    pub item: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadioSpec {
    pub fixture: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    pub completion: CompletionPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSpec {
    pub datum: Vec<f64>,
    pub mask: Vec<f64>,
}

/// Fully resolved experiment. Output location and thread count are run
/// options, not part of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub optim: OptimConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio: Option<AudioSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radio: Option<RadioSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, seed_override, base)
    }

    /// `task_default` fills a missing `task` key (used by `probe`).
    pub fn parse_with_default(
        text: &str,
        seed_override: Option<u64>,
        base_dir: PathBuf,
        task_default: Option<Task>,
    ) -> Result<Self, CliError> {
        let raw = RawConfig::parse(text)?;
        let task = match raw.get("", "task") {
            Some(e) => Task::parse(&e.value).ok_or_else(|| {
                CliError::config(
                    Some(e.line),
                    Some("task"),
                    format!(
                        "unknown task `{}` (expected audio_per_freq, audio_mag_vs_phase, radio_explain or distortion_probe)",
                        e.value
                    ),
                )
            })?,
            None => task_default.ok_or_else(|| CliError::config(None, Some("task"), "missing required field"))?,
        };
        for ((section, key), e) in &raw.entries {
            if !section.is_empty() && !task.sections().contains(&section.as_str()) {
                return Err(CliError::config(
                    Some(e.line),
                    Some(key),
                    format!("section [{section}] does not apply to task {}", task_name(task)),
                ));
            }
        }
        let seed = match seed_override {
            Some(s) => s,
            None => raw.typed("", "seed", |v| v.parse::<u64>().ok(), "an unsigned 64-bit integer")?.unwrap_or(0),
        };
        let optim = resolve_optim(&raw, task, seed)?;
        let mut cfg = ExperimentConfig {
            task,
            seed,
            optim,
            model: None,
            sampler: None,
            audio: None,
            radio: None,
            data: None,
            base_dir,
        };
        match task {
            Task::AudioPerFreq | Task::AudioMagVsPhase => {
                let classifier = raw
                    .typed(
                        "model",
                        "classifier",
                        |v| match v {
                            "magnitude" => Some(ClassifierKind::Magnitude),
                            "phase" => Some(ClassifierKind::Phase),
                            "constant" => Some(ClassifierKind::Constant),
                            _ => None,
                        },
                        "magnitude, phase or constant",
                    )?
                    .unwrap_or(ClassifierKind::Magnitude);
                reject(&raw, "model", &["path", "output"], "audio tasks use a synthetic classifier")?;
                cfg.model = Some(ModelSpec { classifier: Some(classifier), path: None, output: 0 });
                cfg.sampler = Some(resolve_sampler(&raw, true)?.unwrap_or(SamplerSpec::Fitted));
                let audio = AudioSpec {
                    per_class: raw.int("audio", "per_class")?.unwrap_or(6),
                    dataset_seed: raw.int("audio", "dataset_seed")?.unwrap_or(1) as u64,
                    class: raw.int("audio", "class")?.unwrap_or(0),
                    item: raw.int("audio", "item")?.unwrap_or(0),
                };
                if audio.per_class == 0 {
                    return Err(CliError::config(raw.line_of("audio", "per_class"), Some("per_class"), "must be at least 1"));
                }
                if audio.class >= rdx_core::audio::N_CLASSES {
                    return Err(CliError::config(raw.line_of("audio", "class"), Some("class"), "class label out of range"));
                }
                if audio.item >= audio.per_class {
                    return Err(CliError::config(raw.line_of("audio", "item"), Some("item"), "item must be below per_class"));
                }
                cfg.audio = Some(audio);
            }
            Task::RadioExplain => {
                let fixture = raw.get("radio", "fixture").map(|e| e.value.clone()).unwrap_or_else(|| "shadow".into());
                if !["shadow", "far"].contains(&fixture.as_str()) {
                    return Err(CliError::config(raw.line_of("radio", "fixture"), Some("fixture"), "expected shadow or far"));
                }
                let p = raw.num("radio", "p_inpaint")?.unwrap_or(1.0);
                let completion = CompletionPolicy::new(p)
                    .map_err(|e| CliError::config(raw.line_of("radio", "p_inpaint"), Some("p_inpaint"), e.to_string()))?;
                cfg.radio = Some(RadioSpec {
                    fixture,
                    scene: raw.get("radio", "scene").map(|e| e.value.clone()),
                    completion,
                });
            }
            Task::DistortionProbe => {
                let path = raw
                    .get("model", "path")
                    .map(|e| e.value.clone())
                    .ok_or_else(|| CliError::config(None, Some("path"), "distortion_probe needs [model] path"))?;
                reject(&raw, "model", &["classifier"], "distortion_probe loads a model fixture")?;
                let output = raw.int("model", "output")?.unwrap_or(0);
                cfg.model = Some(ModelSpec { classifier: None, path: Some(path), output });
                let datum = raw
                    .list("data", "datum")?
                    .ok_or_else(|| CliError::config(None, Some("datum"), "distortion_probe needs [data] datum"))?;
                let mask = raw.list("data", "mask")?.unwrap_or_else(|| vec![0.0; datum.len()]);
                if mask.len() != datum.len() {
                    return Err(CliError::config(raw.line_of("data", "mask"), Some("mask"), "mask and datum lengths differ"));
                }
                let sampler = resolve_sampler(&raw, false)?
                    .unwrap_or(SamplerSpec::Constant { value: vec![0.0; datum.len()] });
                cfg.sampler = Some(sampler);
                cfg.data = Some(DataSpec { datum, mask });
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, seed_override: Option<u64>, base_dir: PathBuf) -> Result<Self, CliError> {
        Self::parse_with_default(text, seed_override, base_dir, None)
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// The resolved configuration as JSON, used for echoes.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

pub fn task_name(t: Task) -> &'static str {
    match t {
        Task::AudioPerFreq => "audio_per_freq",
        Task::AudioMagVsPhase => "audio_mag_vs_phase",
        Task::RadioExplain => "radio_explain",
        Task::DistortionProbe => "distortion_probe",
    }
}

fn reject(raw: &RawConfig, section: &str, keys: &[&str], why: &str) -> Result<(), CliError> {
    for k in keys {
        if let Some(e) = raw.get(section, k) {
            return Err(CliError::config(Some(e.line), Some(k), why));
        }
    }
    Ok(())
}

fn resolve_sampler(raw: &RawConfig, allow_fitted: bool) -> Result<Option<SamplerSpec>, CliError> {
    let Some(kind) = raw.get("sampler", "kind") else {
        reject(raw, "sampler", &["mean", "std", "value"], "set [sampler] kind first")?;
        return Ok(None);
    };
    let need = |k: &str| -> Result<Vec<f64>, CliError> {
        raw.list("sampler", k)?
            .ok_or_else(|| CliError::config(Some(kind.line), Some(k), format!("sampler kind `{}` needs {k}", kind.value)))
    };
    let spec = match kind.value.as_str() {
        "fitted" if allow_fitted => {
            reject(raw, "sampler", &["mean", "std", "value"], "a fitted sampler takes no parameters")?;
            SamplerSpec::Fitted
        }
        "gaussian" => {
            reject(raw, "sampler", &["value"], "a gaussian sampler takes mean and std")?;
            SamplerSpec::Gaussian { mean: need("mean")?, std: need("std")? }
        }
        "constant" => {
            reject(raw, "sampler", &["mean", "std"], "a constant sampler takes value")?;
            SamplerSpec::Constant { value: need("value")? }
        }
        other => {
            let options = if allow_fitted { "fitted, gaussian or constant" } else { "gaussian or constant" };
            return Err(CliError::config(Some(kind.line), Some("kind"), format!("unknown sampler `{other}`, expected {options}")));
        }
    };
    Ok(Some(spec))
}

fn resolve_optim(raw: &RawConfig, task: Task, seed: u64) -> Result<OptimConfig, CliError> {
    let mut o = match task {
        Task::AudioPerFreq => OptimConfig::per_frequency(),
        Task::AudioMagVsPhase => class_query_config(),
        Task::RadioExplain => OptimConfig::default().with_method(Method::MatchingPursuit),
        Task::DistortionProbe => OptimConfig::default(),
    };
    if let Some(m) = raw.typed("optim", "method", Method::parse, "relaxed_sgd, concrete or matching_pursuit")? {
        o.method = m;
    }
    if let Some(v) = raw.int("optim", "steps")? {
        o.steps = v;
    }
    if let Some(v) = raw.num("optim", "step_size")? {
        o.step_size = v;
    }
    if let Some(v) = raw.num("optim", "lambda")? {
        o.lambda = v;
    }
    if let Some(v) = raw.num("optim", "temperature")? {
        o.temperature = v;
    }
    if let Some(v) = raw.int("optim", "n_samples")? {
        o.n_samples = v;
    }
    if let Some(v) = raw.int("optim", "budget")? {
        o.mp_budget = v;
    }
    if let Some(v) = raw.num("optim", "init")? {
        o.init = v;
    }
    let update = raw.typed(
        "optim",
        "update",
        |v| match v {
            "adam" => Some(UpdateRule::Adam),
            "sgd" => Some(UpdateRule::Sgd),
            _ => None,
        },
        "adam or sgd",
    )?;
    if let Some(u) = update {
        o.update = u;
    }
    o.rng_seed = seed;
    if let Err(e) = o.validate() {
        let msg = match e {
            rdx_core::RdxError::Config(m) => m,
            other => other.to_string(),
        };
        let field = keys_of("optim").iter().find(|k| msg.contains(*k)).copied();
        let line = field.and_then(|k| raw.line_of("optim", k));
        return Err(CliError::config(line, field, msg));
    }
    let method_ok = match task {
        Task::AudioMagVsPhase => o.method == Method::Concrete,
        Task::RadioExplain => o.method == Method::MatchingPursuit,
        _ => true,
    };
    if !method_ok {
        return Err(CliError::config(
            raw.line_of("optim", "method"),
            Some("method"),
            format!("method is fixed for task {}", task_name(task)),
        ));
    }
    Ok(o)
}
