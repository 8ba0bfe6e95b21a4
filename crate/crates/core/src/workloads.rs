//! Bundled UDFs and seeded synthetic datasets for them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pageio::{PageLayoutConfig, TupleRecord};

pub const LINEAR: &str = include_str!("../udf/linear.dana");
pub const LINEAR10: &str = include_str!("../udf/linear10.dana");
pub const LOGISTIC: &str = include_str!("../udf/logistic.dana");
pub const SVM: &str = include_str!("../udf/svm.dana");
pub const LRMF: &str = include_str!("../udf/lrmf.dana");

/// Weights the `linear` dataset is generated from.
pub const LINEAR_WEIGHTS: [f64; 2] = [3.0, -2.0];

#[derive(Debug, Clone)]
pub struct Workload {
    pub name: &'static str,
    pub source: &'static str,
    pub layout: PageLayoutConfig,
    pub records: Vec<TupleRecord>,
}

impl Workload {
    pub fn csv(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let row: Vec<String> = r.values().iter().map(|v| format!("{v}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noise-free `y = 3 x0 - 2 x1`, features uniform in [-1, 1].
pub fn linear(seed: u64, n: usize) -> Workload {
    let mut r = rng(seed);
    let records = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
            let y = x.iter().zip(LINEAR_WEIGHTS).map(|(a, b)| a * b).sum();
            TupleRecord::new(x, vec![y])
        })
        .collect();
    Workload { name: "linear", source: LINEAR, layout: PageLayoutConfig::new(2, 1), records }
}

/// Ten features, planted weights.
pub fn linear10(seed: u64, n: usize) -> Workload {
    let mut r = rng(seed);
    let w: Vec<f64> = (0..10).map(|_| r.gen_range(-2.0..2.0)).collect();
    let records = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..10).map(|_| r.gen_range(-1.0..1.0)).collect();
            let y = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            TupleRecord::new(x, vec![y])
        })
        .collect();
    Workload { name: "linear10", source: LINEAR10, layout: PageLayoutConfig::new(10, 1), records }
}

/// Two separable Gaussian-ish blobs in 2-D plus a bias column; labels 0/1.
pub fn logistic(seed: u64, n: usize) -> Workload {
    let mut r = rng(seed);
    let records = (0..n)
        .map(|i| {
            let label = (i % 2) as f64;
            let c = if label == 1.0 { 1.5 } else { -1.5 };
            let x = vec![c + r.gen_range(-1.0..1.0), c + r.gen_range(-1.0..1.0), 1.0];
            TupleRecord::new(x, vec![label])
        })
        .collect();
    Workload { name: "logistic", source: LOGISTIC, layout: PageLayoutConfig::new(3, 1), records }
}

/// Eight features; labels are the sign of a planted hyperplane.
pub fn svm(seed: u64, n: usize) -> Workload {
    let mut r = rng(seed);
    let w: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
    let records = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            TupleRecord::new(x, vec![if s >= 0.0 { 1.0 } else { -1.0 }])
        })
        .collect();
    Workload { name: "svm", source: SVM, layout: PageLayoutConfig::new(8, 1), records }
}

/// Ratings of a rank-2 16x16 matrix at random cells, one-hot encoded.
pub fn lrmf(seed: u64, n: usize) -> Workload {
    let mut r = rng(seed);
    let a: Vec<[f64; 2]> = (0..16).map(|_| [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).collect();
    let b: Vec<[f64; 2]> = (0..16).map(|_| [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).collect();
    let records = (0..n)
        .map(|_| {
            let (i, j) = (r.gen_range(0..16), r.gen_range(0..16));
            let mut x = vec![0.0; 64];
            x[i] = 1.0;
            x[32 + 16 + j] = 1.0;
            let y = a[i][0] * b[j][0] + a[i][1] * b[j][1];
            TupleRecord::new(x, vec![y])
        })
        .collect();
    Workload { name: "lrmf", source: LRMF, layout: PageLayoutConfig::new(64, 1), records }
}

/// The workloads every end-to-end property is checked on.
pub fn suite() -> Vec<Workload> {
    vec![linear(1, 1024), linear10(2, 2048), logistic(3, 512), svm(4, 2048), lrmf(5, 512)]
}
