use rdx_core::masking::InfillOracle;
use rdx_core::models::ModelOracle;
use rdx_core::radiomap::io::{city_to_pgm, map_to_pgm, parse_pgm, render_overlay};
use rdx_core::radiomap::*;
use rdx_core::rng::rng_from_seed;
use rdx_core::OutputSelector;
use rand::Rng as _;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn first_free(city: &CityMap) -> Cell {
    let i = city.free_cells()[0];
    Cell { x: i % city.width(), y: i / city.width() }
}

#[test]
fn golden_city_grid_is_stable() {
    let city = generate_city(7, &CityParams::default()).unwrap();
    let hex: String = Sha256::digest(city.grid()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, "0937b4f39946a8e5c09a9acec0fd9f05c9ed8bb52eef5b42b6a9913c791eec35");
    assert_eq!(generate_city(7, &CityParams::default()).unwrap(), city);
}

#[test]
fn conditional_infill_matches_golden_vector() {
    let f = shadow_fixture();
    let oracle = RadioInfill::new(f.scene.clone(), CompletionPolicy { p_inpaint: 0.5 }).unwrap();
    let x = RadioEncoding::encode(&f.scene).unwrap();
    let mut s = vec![0.0; x.dim()];
    for i in [0, 2, 5, 9] {
        s[i] = 1.0;
    }
    let g = oracle.infill(x.values(), &s, &mut rng_from_seed(42));
    let text = std::fs::read_to_string(fixture_path("radio_infill_golden.json")).unwrap();
    let golden: Vec<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(g, golden);
}

#[test]
fn measurement_density_is_uniform_over_free_cells() {
    let params = CityParams { height: 64, width: 64, n_buildings: 20, min_size: 3, max_size: 9 };
    let city = generate_city(5, &params).unwrap();
    let map = simulate_radio(&city, first_free(&city)).unwrap();
    let ms = sample_measurements(&map, &city, 10_000, 17).unwrap();
    let free = city.free_cells();
    let bins = 50;
    let mut counts = vec![0usize; bins];
    for m in &ms {
        let rank = free.binary_search(&(m.y * 64 + m.x)).expect("measurement on a free cell");
        counts[rank * bins / free.len()] += 1;
    }
    let mut stat = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let lo = (b * free.len()).div_ceil(bins);
        let hi = ((b + 1) * free.len()).div_ceil(bins);
        let expected = 10_000.0 * (hi - lo) as f64 / free.len() as f64;
        stat += (c as f64 - expected).powi(2) / expected;
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p {p}");
}

#[test]
fn building_removal_never_darkens() {
    for seed in 0..10 {
        let city = generate_city(seed, &CityParams::default()).unwrap();
        let tx = first_free(&city);
        let full = simulate_radio(&city, tx).unwrap();
        for b in city.buildings() {
            let fewer = city.without(&[b.id]).unwrap();
            let lighter = simulate_radio(&fewer, tx).unwrap();
            for (a, c) in lighter.values.iter().zip(&full.values) {
                assert!(a >= c);
            }
        }
    }
}

#[test]
fn estimator_darkens_the_missing_shadow() {
    let f = shadow_fixture();
    let scene = &f.scene;
    let base = simulate_radio(scene.noisy_city(), scene.tx()).unwrap();
    let phi = phi_model(&scene.input()).unwrap();
    let gt = simulate_radio(scene.city(), scene.tx()).unwrap();
    let shadow: Vec<usize> = (0..32 * 32)
        .filter(|&i| {
            let (x, y) = (i % 32, i / 32);
            !scene.city().is_occupied(x, y) && gt.values[i] < base.values[i] && x >= 18
        })
        .collect();
    assert!(!shadow.is_empty());
    let mean = |m: &RadioMap| shadow.iter().map(|&i| m.values[i]).sum::<f64>() / shadow.len() as f64;
    assert!(mean(&phi) < mean(&base));
}

#[test]
fn fixture_measurement_roles_hold() {
    let f = shadow_fixture();
    let scene = &f.scene;
    let gt = simulate_radio(scene.city(), scene.tx()).unwrap();
    let noisy = simulate_radio(scene.noisy_city(), scene.tx()).unwrap();
    for &i in &f.shadow {
        let m = scene.measurements()[i];
        assert!(gt.get(m.x, m.y) < noisy.get(m.x, m.y), "shadow measurement {i}");
    }
    for &i in &f.line_of_sight {
        let m = scene.measurements()[i];
        assert_eq!(buildings_crossed(scene.city(), scene.tx(), m.cell()), 0);
        assert!(m.x < 14, "line-of-sight measurement {i} sits before the building");
    }
}

#[test]
fn generic_pursuit_agrees_with_direct_completion() {
    let f = shadow_fixture();
    let scene = &f.scene;
    let model = RadioInputModel::new(scene.clone(), PhiParams::default());
    let x = RadioEncoding::encode(scene).unwrap();
    let nb = scene.noisy_city().buildings().len();
    let mut rng = rng_from_seed(3);
    for trial in 0..20 {
        let policy = CompletionPolicy { p_inpaint: [0.0, 1.0, 0.3][trial % 3] };
        let keep: Vec<bool> = (0..x.dim()).map(|_| rng.random::<f64>() < 0.5).collect();
        let s: Vec<f64> = keep.iter().map(|&k| f64::from(u8::from(k))).collect();
        let seed = 100 + trial as u64;
        let g = RadioInfill::new(scene.clone(), policy).unwrap().infill(x.values(), &s, &mut rng_from_seed(seed));
        let z: Vec<f64> = (0..x.dim()).map(|j| x.values()[j] * s[j] + g[j] * (1.0 - s[j])).collect();
        let via_model = model.forward(&z);

        let sel = Selection {
            buildings: scene.noisy_city().buildings().iter().zip(&keep).filter(|(_, &k)| k).map(|(b, _)| b.id).collect(),
            measurements: (0..x.dim() - nb).filter(|&j| keep[nb + j]).collect(),
        };
        let direct = phi_model(&complete_input(scene, &sel, &policy, seed).unwrap()).unwrap();
        assert_eq!(via_model, direct.values, "trial {trial}");
    }
}

#[test]
fn far_region_curve_is_flat() {
    let scene = far_region_fixture();
    for p in [0.0, 1.0] {
        let q = RegionQuery { policy: CompletionPolicy { p_inpaint: p }, ..Default::default() };
        let e = explain_region(&scene, &q).unwrap();
        assert!(e.distortion_curve.iter().all(|&(_, d)| d < 1e-12), "{:?}", e.distortion_curve);
    }
}

#[test]
fn full_infill_picks_shadow_first_with_non_increasing_curve() {
    let f = shadow_fixture();
    let nb = f.scene.noisy_city().buildings().len();
    for p in [0.0, 1.0] {
        let q = RegionQuery { policy: CompletionPolicy { p_inpaint: p }, ..Default::default() };
        let e = explain_region(&f.scene, &q).unwrap();
        let order = e.selected_order.unwrap();
        assert_eq!(order.len(), 5);
        assert!(e.distortion_curve.windows(2).all(|w| w[1].1 <= w[0].1));
        if p == 1.0 {
            assert!(f.shadow.contains(&(order[0] - nb)));
        }
    }
}

#[test]
fn budget_beyond_components_is_rejected() {
    let f = shadow_fixture();
    let q = RegionQuery { budget: 17, ..Default::default() };
    assert!(explain_region(&f.scene, &q).is_err());
}

#[test]
fn region_selector_is_the_region_mean() {
    let f = shadow_fixture();
    let r = f.scene.region();
    let sel = OutputSelector::uniform_region(32 * 32, &r.cells(32)).unwrap();
    let map = phi_model(&f.scene.input()).unwrap();
    let mean = r.cells(32).iter().map(|&i| map.values[i]).sum::<f64>() / r.cells(32).len() as f64;
    assert!((sel.select(&map.values) - mean).abs() < 1e-12);
}

#[test]
fn image_and_scene_outputs() {
    let f = shadow_fixture();
    let pgm = parse_pgm(&city_to_pgm(f.scene.city())).unwrap();
    assert_eq!((pgm.width, pgm.height), (32, 32));
    assert_eq!(pgm.pixels.iter().filter(|&&p| p == 255).count(), 32 + 20 + 36 + 36 + 20 + 16);
    let map = phi_model(&f.scene.input()).unwrap();
    let img = parse_pgm(&map_to_pgm(&map)).unwrap();
    assert_eq!(img.pixels.len(), 32 * 32);
    let svg = render_overlay(&f.scene, &map, &[5]);
    assert!(svg.starts_with("<svg") && svg.contains("yellow") && svg.contains("lime"));
    let back = RadioScene::from_json(&f.scene.to_json().unwrap()).unwrap();
    assert_eq!(back, f.scene);
}
