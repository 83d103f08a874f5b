use onfire_core::arch::ShuffleConfig;
use onfire_core::image::RgbImage;
use onfire_core::metrics::{accuracy_complexity_ratio, ConfusionCounts, MetricsReport};
use onfire_core::ops::sigmoid;
use onfire_core::pipeline::{bench, classify_frame, evaluate, frame_sources, BenchMode, DatasetLayout};
use onfire_core::preprocess::Preprocess;
use onfire_core::superpixel::SlicParams;
use onfire_core::synthetic::{synthetic_frame, write_synthetic_dataset};
use onfire_core::weights::{load_weights, save_weights};
use onfire_core::{Architecture, ModelGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_model(seed: u64) -> ModelGraph {
    ModelGraph::random_at(Architecture::ShuffleNet(ShuffleConfig::onfire()), seed, 32).unwrap()
}

#[test]
fn confusion_matches_brute_force_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.gen_range(1..300);
        let pairs: Vec<(bool, bool)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        let c = ConfusionCounts::from_pairs(pairs.iter().copied());
        let count = |p: bool, t: bool| pairs.iter().filter(|&&x| x == (p, t)).count() as u64;
        assert_eq!(
            c,
            ConfusionCounts::new(
                count(true, true),
                count(true, false),
                count(false, false),
                count(false, true)
            )
        );
        assert_eq!(c.total(), n as u64);

        let r = MetricsReport::from_counts(c);
        let correct = pairs.iter().filter(|(p, t)| p == t).count() as f64;
        assert!((r.accuracy.unwrap() - correct / n as f64).abs() < 1e-12);
        if let (Some(p), Some(t), Some(f)) = (r.precision, r.tpr, r.f_score) {
            assert!((f - 2.0 * p * t / (p + t)).abs() < 1e-12);
        }
    }
}

#[test]
fn all_correct_predictions() {
    let r = MetricsReport::from_counts(ConfusionCounts::new(10, 0, 12, 0));
    assert_eq!(
        (r.tpr, r.fpr, r.accuracy, r.precision, r.f_score),
        (Some(1.0), Some(0.0), Some(1.0), Some(1.0), Some(1.0))
    );
}

#[test]
fn published_efficiency_ratios() {
    assert!((accuracy_complexity_ratio(95.0, 0.156).unwrap() - 608.97).abs() <= 0.01);
    assert!((accuracy_complexity_ratio(95.3, 3.2).unwrap() - 29.78).abs() <= 0.01);
    // Computed from rounded table inputs these land at 77.83 and 1.34.
    assert!((accuracy_complexity_ratio(93.4, 1.2).unwrap() - 77.833).abs() < 1e-3);
    assert!((accuracy_complexity_ratio(91.5, 68.3).unwrap() - 1.3397).abs() < 1e-4);
}

#[test]
fn probability_is_sigmoid_of_logit() {
    let model = small_model(3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img = synthetic_frame(&mut rng, true, 50, 40);
    let p = classify_frame(&model, &img, 0.5).unwrap();
    let pre = Preprocess {
        size: 32,
        ..Preprocess::default()
    };
    let logit = model.forward(&pre.apply(&img).unwrap()).unwrap()[0];
    assert_eq!(p.logit, logit);
    assert_eq!(p.probability, sigmoid(logit as f64));
}

#[test]
fn lower_threshold_fires_on_a_superset() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = small_model(8);
    let imgs: Vec<RgbImage> = (0..10).map(|i| synthetic_frame(&mut rng, i % 2 == 0, 40, 40)).collect();
    let thresholds = [0.0, 0.2, 0.45, 0.5, 0.55, 0.8, 1.0];
    let fired: Vec<Vec<bool>> = thresholds
        .iter()
        .map(|&t| {
            imgs.iter()
                .map(|im| classify_frame(&model, im, t).unwrap().fire)
                .collect()
        })
        .collect();
    for w in fired.windows(2) {
        for (lo, hi) in w[0].iter().zip(&w[1]) {
            assert!(*lo || !*hi);
        }
    }
    assert!(fired[0].iter().all(|f| *f));
    assert!(fired[thresholds.len() - 1].iter().all(|f| !*f));
}

#[test]
fn evaluation_is_order_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic_dataset(dir.path(), 6, 36, 5).unwrap();
    assert_eq!(data.len(), 12);
    let model = small_model(4);
    let a = evaluate(&model, &data, 0.5).unwrap();
    let mut reversed = data.clone();
    reversed.items.reverse();
    let b = evaluate(&model, &reversed, 0.5).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.report.counts.total(), 12);
    assert_eq!(a.report.params_millions, Some(model.param_count() as f64 / 1e6));
    for (path, truth, _) in &a.predictions {
        assert_eq!(*truth, path.parent().unwrap().ends_with("fire"));
    }
}

#[test]
fn missing_class_reports_undefined_rates() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dataset(dir.path(), 3, 32, 1).unwrap();
    std::fs::remove_dir_all(dir.path().join("nofire")).unwrap();
    let data = DatasetLayout::open(dir.path()).unwrap();
    let r = evaluate(&small_model(1), &data, 0.5).unwrap().report;
    assert_eq!(r.fpr, None);
    assert!(r.to_csv().contains("fpr,n/a"));

    std::fs::remove_dir_all(dir.path().join("fire")).unwrap();
    assert!(DatasetLayout::open(dir.path()).is_err());
    assert!(DatasetLayout::open(dir.path().join("absent")).is_err());
}

#[test]
fn frame_directories_are_ordered_numerically() {
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::filled(4, 4, [1, 2, 3]);
    for i in [10, 2, 1] {
        onfire_core::image::save_ppm(dir.path().join(format!("{i}.ppm")), &img).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let frames = frame_sources(dir.path()).unwrap();
    let names: Vec<String> = frames
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["1.ppm", "2.ppm", "10.ppm"]);
    let empty = tempfile::tempdir().unwrap();
    assert!(frame_sources(empty.path()).is_err());
}

#[test]
fn bench_reports_positive_fps() {
    let model = small_model(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let imgs = vec![synthetic_frame(&mut rng, true, 48, 48)];
    let r = bench(&model, BenchMode::FullFrame, &imgs, 4, 1).unwrap();
    assert!(r.fps > 0.0 && r.frames == 4);
    let r = bench(&model, BenchMode::Superpixel(SlicParams::new(9, 10.0)), &imgs, 2, 0).unwrap();
    assert!(r.fps > 0.0);
    assert!(bench(&model, BenchMode::FullFrame, &imgs, 0, 0).is_err());
    assert!(bench(&model, BenchMode::FullFrame, &[], 1, 0).is_err());
}

#[test]
fn saved_weights_reproduce_outputs() {
    let model = small_model(6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ofw");
    save_weights(&path, &model.arch().to_string(), model.weights()).unwrap();
    let file = load_weights(&path).unwrap();
    assert_eq!(file.arch, "shufflenetv2-onfire");
    let back = ModelGraph::bind(model.arch(), model.shared_graph(), file.store).unwrap();
    assert_eq!(back.param_count(), model.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let img = synthetic_frame(&mut rng, false, 32, 32);
    let a = classify_frame(&model, &img, 0.5).unwrap();
    let b = classify_frame(&back, &img, 0.5).unwrap();
    assert_eq!(a.logit.to_bits(), b.logit.to_bits());
}
