//! Task runners. Each writes `explanation.json`, `mask.csv` and its own
//! artifacts into the output directory and returns a one-line summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rdx_core::audio::{
    class_query, log_frequency_grid, magnitude_phase_grouping, reference_classifier, synthetic_dataset,
    top_class, unpack_features, DFT_LEN, F_MAX, F_MIN, N_CLASSES, N_FREQS, SAMPLE_RATE,
};
use rdx_core::models::{ConstantModel, ModelOracle};
use rdx_core::radiomap::io::{city_to_pgm, map_to_pgm, render_overlay};
use rdx_core::radiomap::{
    explain_region, far_region_fixture, phi_model, shadow_fixture, simulate_radio, RadioScene, RegionQuery,
};
use rdx_core::{
    estimate_distortion, matching_pursuit, optimize_concrete, optimize_relaxed, sparsity, ComponentGrouping, Datum,
    Explanation, InfillSampler, Mask, Method, OutputSelector, ReferenceModel,
};
use serde_json::json;

use crate::config::{task_name, ExperimentConfig, SamplerSpec, Task};
use crate::error::CliError;

pub struct Outcome {
    pub explanation: Explanation,
    pub summary: String,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Runs the configured task and writes every artifact under `out`.
pub fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let (mut explanation, detail) = match cfg.task {
        Task::AudioPerFreq => audio_per_freq(cfg, out)?,
        Task::AudioMagVsPhase => audio_mag_vs_phase(cfg, out)?,
        Task::RadioExplain => radio_explain(cfg, out)?,
        Task::DistortionProbe => distortion_probe(cfg, out)?,
    };
    explanation.validate()?;
    let run_echo = std::mem::take(&mut explanation.config_echo);
    explanation.config_echo = json!({ "experiment": cfg.echo(), "run": run_echo });
    write(&out.join("explanation.json"), &explanation.to_json()?)?;
    explanation.final_mask.save_csv(&out.join("mask.csv"))?;

    let (l1, l0) = sparsity(&explanation.final_mask);
    let distortion = explanation.distortion_curve.last().map_or(0.0, |c| c.1);
    // The pursuit is budget-constrained; λ plays no part in it.
    let lambda = if cfg.optim.method == Method::MatchingPursuit { 0.0 } else { cfg.optim.lambda };
    let loss = distortion + lambda * l1;
    let summary = format!(
        "task={} loss={loss:.6} distortion={distortion:.6} l1={l1:.4} l0={l0}{detail}",
        task_name(cfg.task)
    );
    Ok(Outcome { explanation, summary })
}

struct AudioSetup {
    data: Vec<(usize, Datum)>,
    model: Box<dyn ModelOracle>,
    sampler: InfillSampler,
}

fn audio_setup(cfg: &ExperimentConfig) -> Result<AudioSetup, CliError> {
    let audio = cfg.audio.as_ref().expect("audio task has an audio section");
    let data = synthetic_dataset(audio.per_class, audio.dataset_seed)?;
    let kind = cfg.model.as_ref().and_then(|m| m.classifier).expect("audio task has a classifier");
    let model: Box<dyn ModelOracle> = match kind.channel() {
        Some(ch) => Box::new(reference_classifier(&data, ch)?),
        None => Box::new(ConstantModel { in_dim: 2 * N_FREQS, scores: vec![1.0; N_CLASSES] }),
    };
    let sampler = build_sampler(cfg.sampler.as_ref().expect("sampler resolved"), &data, 2 * N_FREQS)?;
    Ok(AudioSetup { data, model, sampler })
}

fn build_sampler(spec: &SamplerSpec, data: &[(usize, Datum)], dim: usize) -> Result<InfillSampler, CliError> {
    let s = match spec {
        SamplerSpec::Fitted => {
            let all: Vec<Datum> = data.iter().map(|(_, d)| d.clone()).collect();
            InfillSampler::fit_gaussian(&all)?
        }
        SamplerSpec::Gaussian { mean, std } => InfillSampler::gaussian(mean.clone(), std.clone())?,
        SamplerSpec::Constant { value } => InfillSampler::constant(value.clone())?,
    };
    if s.dim() != dim {
        return Err(CliError::config(
            None,
            Some("sampler"),
            format!("sampler has {} components, the data has {dim}", s.dim()),
        ));
    }
    Ok(s)
}

fn spectrum_echo() -> serde_json::Value {
    json!({
        "dft_len": DFT_LEN,
        "window": "rectangular",
        "sample_rate_hz": SAMPLE_RATE,
        "grid": { "points": N_FREQS, "f_min_hz": F_MIN, "f_max_hz": F_MAX, "spacing": "log", "lookup": "nearest_bin" },
    })
}

fn members(data: &[(usize, Datum)], class: usize) -> Vec<Datum> {
    data.iter().filter(|(l, _)| *l == class).map(|(_, d)| d.clone()).collect()
}

fn audio_per_freq(cfg: &ExperimentConfig, out: &Path) -> Result<(Explanation, String), CliError> {
    let audio = cfg.audio.as_ref().expect("audio section");
    let setup = audio_setup(cfg)?;
    let x = members(&setup.data, audio.class).swap_remove(audio.item);
    let sel = OutputSelector::Index(top_class(&setup.model.forward(x.values())));
    let grouping = ComponentGrouping::trivial(2 * N_FREQS);
    let model = setup.model.as_ref();
    let mut e = match cfg.optim.method {
        Method::RelaxedSgd => optimize_relaxed(model, &sel, &x, &grouping, &setup.sampler, &cfg.optim)?,
        Method::Concrete => optimize_concrete(model, &sel, &x, &grouping, &setup.sampler, &cfg.optim)?,
        Method::MatchingPursuit => matching_pursuit(model, &sel, &x, &grouping, &setup.sampler, &cfg.optim)?,
    };
    e.config_echo["spectrum"] = spectrum_echo();

    let grid = log_frequency_grid();
    let (mag, phase) = unpack_features(&x)?;
    let w = e.final_mask.weights();
    let mut spectrum = String::from("freq_hz,magnitude,phase\n");
    let mut importance = String::from("freq_hz,magnitude_importance,phase_importance\n");
    for k in 0..N_FREQS {
        let _ = writeln!(spectrum, "{},{},{}", grid[k], mag[k], phase[k]);
        let _ = writeln!(importance, "{},{},{}", grid[k], w[k], w[N_FREQS + k]);
    }
    write(&out.join("spectrum.csv"), &spectrum)?;
    write(&out.join("importance.csv"), &importance)?;
    write(&out.join("importance.svg"), &importance_plot(&grid, &w[..N_FREQS], &w[N_FREQS..]))?;
    Ok((e, format!(" explained_output={}", sel_index(&sel))))
}

fn sel_index(sel: &OutputSelector) -> usize {
    match sel {
        OutputSelector::Index(i) => *i,
        OutputSelector::Region(_) => 0,
    }
}

/// Importance against log frequency: magnitude in blue, phase in red.
fn importance_plot(grid: &[f64], mag: &[f64], phase: &[f64]) -> String {
    let (w, h, pad) = (800.0, 300.0, 30.0);
    let lx = |f: f64| pad + (f / F_MIN).ln() / (F_MAX / F_MIN).ln() * (w - 2.0 * pad);
    let ly = |v: f64| h - pad - v.clamp(0.0, 1.0) * (h - 2.0 * pad);
    let line = |vals: &[f64]| -> String {
        grid.iter()
            .zip(vals)
            .map(|(&f, &v)| format!("{:.2},{:.2}", lx(f), ly(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    svg.push('\n');
    let _ = writeln!(
        svg,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="blue"/>"#, line(mag));
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="red"/>"#, line(phase));
    let _ = writeln!(svg, r#"<text x="{pad}" y="20">importance vs frequency ({F_MIN}-{F_MAX} Hz, log): magnitude blue, phase red</text>"#);
    svg.push_str("</svg>\n");
    svg
}

fn audio_mag_vs_phase(cfg: &ExperimentConfig, out: &Path) -> Result<(Explanation, String), CliError> {
    let audio = cfg.audio.as_ref().expect("audio section");
    let setup = audio_setup(cfg)?;
    let data = members(&setup.data, audio.class);
    let mut e = class_query(setup.model.as_ref(), &data, &magnitude_phase_grouping(), &setup.sampler, &cfg.optim)?;
    e.config_echo["spectrum"] = spectrum_echo();
    let (m, p) = (e.final_mask.weights()[0], e.final_mask.weights()[1]);
    let verdict = if m >= 0.95 && p <= 0.05 {
        "magnitude ≥ 0.95, phase ≤ 0.05"
    } else if p >= 0.95 && m <= 0.05 {
        "phase ≥ 0.95, magnitude ≤ 0.05"
    } else if m <= 0.05 && p <= 0.05 {
        "magnitude ≤ 0.05, phase ≤ 0.05"
    } else {
        "mixed"
    };
    let kind = cfg.model.as_ref().and_then(|s| s.classifier).expect("classifier");
    let classifier = serde_json::to_value(kind).expect("serializes");
    let classifier = classifier.as_str().unwrap_or("unknown");
    write(
        &out.join("report.csv"),
        &format!("class,classifier,magnitude,phase,verdict\n{},{classifier},{m},{p},\"{verdict}\"\n", audio.class),
    )?;
    Ok((e, format!(" magnitude={m:.6} phase={p:.6} verdict=\"{verdict}\"")))
}

fn load_scene(cfg: &ExperimentConfig) -> Result<RadioScene, CliError> {
    let radio = cfg.radio.as_ref().expect("radio section");
    if let Some(p) = &radio.scene {
        let path = cfg.resolve_path(p);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        return RadioScene::from_json(&text).map_err(|e| CliError::config(None, Some("scene"), e.to_string()));
    }
    Ok(match radio.fixture.as_str() {
        "far" => far_region_fixture(),
        _ => shadow_fixture().scene,
    })
}

fn radio_explain(cfg: &ExperimentConfig, out: &Path) -> Result<(Explanation, String), CliError> {
    let radio = cfg.radio.as_ref().expect("radio section");
    let scene = load_scene(cfg)?;
    let query = RegionQuery {
        policy: radio.completion,
        budget: cfg.optim.mp_budget,
        n_samples: cfg.optim.n_samples,
        rng_seed: cfg.seed,
        ..RegionQuery::default()
    };
    let e = explain_region(&scene, &query)?;
    let estimate = phi_model(&scene.input())?;
    write(&out.join("scene.json"), &scene.to_json()?)?;
    write(&out.join("city.pgm"), &city_to_pgm(scene.city()))?;
    write(&out.join("noisy_city.pgm"), &city_to_pgm(scene.noisy_city()))?;
    write(&out.join("gt_map.pgm"), &map_to_pgm(&simulate_radio(scene.city(), scene.tx())?))?;
    write(&out.join("estimate.pgm"), &map_to_pgm(&estimate))?;
    let order = e.selected_order.clone().unwrap_or_default();
    write(&out.join("overlay.svg"), &render_overlay(&scene, &estimate, &order))?;
    let labels = e.config_echo["components"].clone();
    let picked: Vec<String> = order
        .iter()
        .map(|&i| labels[i].as_str().unwrap_or("?").to_string())
        .collect();
    Ok((e, format!(" selected=[{}]", picked.join(","))))
}

fn distortion_probe(cfg: &ExperimentConfig, out: &Path) -> Result<(Explanation, String), CliError> {
    let spec = cfg.model.as_ref().expect("model section");
    let path = cfg.resolve_path(spec.path.as_deref().expect("probe has a model path"));
    let model = ReferenceModel::load(&path).map_err(|e| match e {
        rdx_core::RdxError::Io(io) => CliError::Io(format!("cannot read {}: {io}", path.display())),
        other => CliError::config(None, Some("path"), format!("{}: {other}", path.display())),
    })?;
    let oracle = model.as_oracle();
    let data = cfg.data.as_ref().expect("data section");
    let x = Datum::new(data.datum.clone())?;
    let mask = Mask::new(data.mask.clone())?;
    let grouping = ComponentGrouping::trivial(x.dim());
    let sampler = build_sampler(cfg.sampler.as_ref().expect("sampler"), &[], x.dim())?;
    let sel = OutputSelector::Index(spec.output);
    let est = estimate_distortion(oracle, &sel, &x, &mask, &grouping, &sampler, cfg.optim.n_samples, cfg.seed)?;
    let (l1, _) = sparsity(&mask);
    write(
        &out.join("probe.txt"),
        &format!("mean={}\nstd_err={}\nn_samples={}\n", est.mean, est.std_err, est.n_samples),
    )?;
    let e = Explanation {
        final_mask: mask,
        distortion_curve: vec![(l1, est.mean)],
        selected_order: None,
        config_echo: json!({ "estimate": est, "model_kind": model.kind() }),
    };
    Ok((e, format!(" mean={} std_err={} n_samples={}", est.mean, est.std_err, est.n_samples)))
}
