use rdx_core::audio::*;
use rdx_core::models::{ConstantModel, ModelOracle};
use rdx_core::{Datum, InfillSampler};

fn class_members(data: &[(usize, Datum)], label: usize) -> Vec<Datum> {
    data.iter().filter(|(l, _)| *l == label).map(|(_, d)| d.clone()).collect()
}

#[test]
fn magnitude_reader_keeps_only_magnitude() {
    let data = synthetic_dataset(6, 1).unwrap();
    let all: Vec<Datum> = data.iter().map(|(_, d)| d.clone()).collect();
    let sampler = InfillSampler::fit_gaussian(&all).unwrap();
    let model = reference_classifier(&data, Channel::Magnitude).unwrap();
    let e = class_query(&model, &class_members(&data, 2), &magnitude_phase_grouping(), &sampler, &class_query_config())
        .unwrap();
    let theta = e.final_mask.weights();
    assert!(theta[0] > 0.95 && theta[1] < 0.05, "{theta:?}");
}

#[test]
fn constant_classifier_keeps_nothing() {
    let data = synthetic_dataset(2, 4).unwrap();
    let all: Vec<Datum> = data.iter().map(|(_, d)| d.clone()).collect();
    let sampler = InfillSampler::fit_gaussian(&all).unwrap();
    let model = ConstantModel { in_dim: 2 * N_FREQS, scores: vec![1.0; N_CLASSES] };
    let e = class_query(&model, &class_members(&data, 5), &magnitude_phase_grouping(), &sampler, &class_query_config())
        .unwrap();
    assert!(e.final_mask.weights().iter().all(|&t| t < 0.05), "{:?}", e.final_mask.weights());
}

#[test]
fn reference_classifiers_read_one_channel() {
    let data = synthetic_dataset(3, 8).unwrap();
    let mag = reference_classifier(&data, Channel::Magnitude).unwrap();
    let phase = reference_classifier(&data, Channel::Phase).unwrap();
    let x = data[0].1.values().to_vec();
    let mut scrambled_phase = x.clone();
    scrambled_phase[N_FREQS..].iter_mut().for_each(|v| *v = -*v + 0.3);
    assert_eq!(mag.forward(&x), mag.forward(&scrambled_phase));
    let mut scrambled_mag = x.clone();
    scrambled_mag[..N_FREQS].iter_mut().for_each(|v| *v = 1.0 - *v);
    assert_eq!(phase.forward(&x), phase.forward(&scrambled_mag));
}

#[test]
fn spectral_csv_has_expected_columns() {
    let spec = class_tone(4, 123.4);
    let sd = log_dft(&synth_tone(&spec, 0.5, SAMPLE_RATE, 2).unwrap(), SAMPLE_RATE).unwrap();
    let mut buf = Vec::new();
    sd.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("freq_hz,magnitude,phase"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), N_FREQS);
    assert_eq!(rows[0][0], 20.0);
    assert_eq!(rows[7][1], sd.magnitude[7]);
    assert_eq!(rows[9][2], sd.phase[9]);
}
