//! Synthetic labeled datasets: each verb's frames are spherical Gaussians
//! with pairwise mean distance `separation · sigma`.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Instance, VerbDataset, UNGROUPED};
use crate::seed;

/// How instance counts are spread over a verb's frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameSizes {
    /// One size per verb shared by all of its frames.
    Balanced,
    /// Each frame draws its own size.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_verbs: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub min_per_frame: usize,
    pub max_per_frame: usize,
    pub dimension: usize,
    /// Distance between any two frame means, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub sizes: FrameSizes,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_verbs: 20,
            min_frames: 2,
            max_frames: 4,
            min_per_frame: 20,
            max_per_frame: 100,
            dimension: 16,
            separation: 6.0,
            sigma: 1.0,
            sizes: FrameSizes::Balanced,
            seed: 0,
        }
    }
}

/// Generate the dataset. Frame means sit on distinct scaled coordinate axes
/// around a random per-verb centre, so every pair is exactly
/// `separation · sigma` apart. Requires `max_frames <= dimension`.
pub fn generate(spec: &SyntheticSpec) -> VerbDataset {
    assert!(spec.max_frames <= spec.dimension, "not enough axes for the frames");
    assert!(spec.min_frames >= 1 && spec.min_frames <= spec.max_frames);
    let noise = Normal::new(0.0, spec.sigma).expect("positive sigma");
    let centre = Normal::new(0.0, 10.0 * spec.sigma).expect("valid");
    let offset = spec.separation * spec.sigma / std::f64::consts::SQRT_2;
    let mut instances = Vec::new();
    for v in 0..spec.n_verbs {
        let verb = format!("verb{v:03}");
        let mut rng = seed::rng(seed::derive(spec.seed, &verb));
        let n_frames = rng.random_range(spec.min_frames..=spec.max_frames);
        let shared = rng.random_range(spec.min_per_frame..=spec.max_per_frame);
        let base: Vec<f64> = (0..spec.dimension).map(|_| centre.sample(&mut rng)).collect();
        let axes = index::sample(&mut rng, spec.dimension, n_frames).into_vec();
        for (f, &axis) in axes.iter().enumerate() {
            let frame = format!("{verb}.{:02}", f + 1);
            let size = match spec.sizes {
                FrameSizes::Balanced => shared,
                FrameSizes::Independent => rng.random_range(spec.min_per_frame..=spec.max_per_frame),
            };
            for i in 0..size {
                let mut vector: Vec<f64> = base.iter().map(|b| b + noise.sample(&mut rng)).collect();
                vector[axis] += offset;
                instances.push(Instance {
                    verb: verb.clone(),
                    frame: frame.clone(),
                    instance_id: format!("{frame}-{i:03}"),
                    vector,
                    text: None,
                    group: UNGROUPED.to_string(),
                });
            }
        }
    }
    VerbDataset::from_instances(instances).unwrap_or_else(|_| VerbDataset::empty(spec.dimension))
}
