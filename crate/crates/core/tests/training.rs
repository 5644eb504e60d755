use shapprune::data::{split, synth_blobs};
use shapprune::experiments::{grid_search, summarize_grid, GridSpec};
use shapprune::nn::train;
use shapprune::rng::derive_seed;
use shapprune::{MlpModel, TrainConfig};

#[test]
fn learns_separable_blobs() {
    let mut learned = 0;
    for seed in 0..10 {
        let ds = synth_blobs(3, 4, 60, 0.15, seed).unwrap();
        let s = split(&ds, [0.6, 0.2, 0.2], seed).unwrap();
        let model = MlpModel::init(4, 8, 3, derive_seed(seed, &[0])).unwrap();
        let cfg = TrainConfig { epochs: 30, seed, ..TrainConfig::default() };
        let trained = train(&model, &s.train, &cfg).unwrap();
        if trained.evaluate(&s.test, None).unwrap().accuracy >= 0.95 {
            learned += 1;
        }
    }
    assert!(learned >= 9, "learned in {learned} of 10 seeds");
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn grid_accuracy_grows_with_players() {
    let ds = synth_blobs(6, 8, 80, 0.5, 2).unwrap();
    let s = split(&ds, [0.7, 0.1, 0.2], 2).unwrap();
    let spec = GridSpec {
        player_counts: (1..=8).collect(),
        epoch_counts: vec![15],
        repetitions: 3,
        seed: 5,
        train: TrainConfig::default(),
    };
    let cells = grid_search(&spec, &s.train, &s.test).unwrap();
    assert_eq!(cells.len(), 8 * 3);
    assert_eq!(cells, grid_search(&spec, &s.train, &s.test).unwrap());
    let summary = summarize_grid(&cells);
    let players: Vec<f64> = summary.iter().map(|r| r.players as f64).collect();
    let means: Vec<f64> = summary.iter().map(|r| r.mean).collect();
    let rho = spearman(&players, &means);
    assert!(rho >= 0.8, "spearman {rho}, means {means:?}");
    for r in &summary {
        assert!(r.min <= r.mean && r.mean <= r.max);
    }
}

#[cfg(feature = "parallel")]
#[test]
fn results_do_not_depend_on_thread_count() {
    use shapprune::estimator::estimate;
    use shapprune::nn::as_game;
    use shapprune::SamplingPlan;

    let ds = synth_blobs(3, 5, 50, 0.4, 1).unwrap();
    let s = split(&ds, [0.6, 0.2, 0.2], 1).unwrap();
    let run = || {
        let model = MlpModel::init(5, 10, 3, 4).unwrap();
        let model = train(&model, &s.train, &TrainConfig::default()).unwrap();
        let game = as_game(&model, &s.validation).unwrap();
        let report = estimate(&game, &SamplingPlan::permutations(64, 9)).unwrap();
        (model.evaluate(&s.test, None).unwrap(), report)
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
    assert_eq!(single, many);
}
