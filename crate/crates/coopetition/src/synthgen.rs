//! Planted-partition affiliation-data generator: k specialization groups
//! with overlapping curricula, an optional mixed cohort, and loners.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::affiliation::{AffiliationMatrix, EntityMetadata};
use crate::community::Partition;
use crate::error::{Error, Result};

pub const MIXED_LABEL: &str = "mixed";
pub const LONER_LABEL: &str = "none";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub k_groups: usize,
    pub group_sizes: Vec<usize>,
    pub courses_core_per_group: usize,
    pub courses_shared: usize,
    /// probability a member takes each of its own group's core courses
    pub p_core: f64,
    /// probability of taking another group's core course
    pub p_cross: f64,
    /// probability any student takes each shared (non-core) course
    pub p_shared: f64,
    pub mixed_group_size: usize,
    pub loner_count: usize,
    /// courses a loner samples uniformly at random
    pub loner_courses: usize,
    /// loners draw from the last `loner_pool` courses (0 = the whole
    /// catalogue); a small pool makes the loner tail mutually similar
    /// without tying it to any planted group
    pub loner_pool: usize,
    pub grade_means: Vec<f64>,
    pub grade_sd: f64,
    pub grade_min: f64,
    pub grade_max: f64,
    pub group_labels: Vec<String>,
    pub seed: u64,
}

impl SynthConfig {
    /// Approximates the aggregate shape of a 509-student / 759-course
    /// four-specialization cohort: ~21% mixed cohort, a tail of loners,
    /// density ~5-6%.
    pub fn tseba_like(seed: u64) -> Self {
        Self {
            k_groups: 4,
            group_sizes: vec![89, 89, 89, 88],
            courses_core_per_group: 50,
            courses_shared: 559,
            p_core: 0.7,
            p_cross: 0.07,
            p_shared: 0.008,
            mixed_group_size: 108,
            loner_count: 46,
            loner_courses: 32,
            loner_pool: 40,
            grade_means: vec![3.38, 3.15, 3.64, 3.35],
            grade_sd: 0.5,
            grade_min: 0.0,
            grade_max: 5.0,
            group_labels: vec![
                "marketing".into(),
                "management".into(),
                "finance".into(),
                "accounting".into(),
            ],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_groups == 0 || self.group_sizes.len() != self.k_groups {
            return Err(Error::Config(format!(
                "need {} group sizes, got {}",
                self.k_groups,
                self.group_sizes.len()
            )));
        }
        if self.grade_means.len() != self.k_groups {
            return Err(Error::Config("grade_means length must match k_groups".into()));
        }
        if self.group_labels.len() != self.k_groups {
            return Err(Error::Config("group_labels length must match k_groups".into()));
        }
        if self.n_courses() == 0 {
            return Err(Error::Config("zero courses is infeasible".into()));
        }
        for p in [self.p_core, self.p_cross, self.p_shared] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.p_core < self.p_cross {
            return Err(Error::Config("p_core must be >= p_cross".into()));
        }
        if self.grade_sd < 0.0 || self.grade_min >= self.grade_max {
            return Err(Error::Config("bad grade scale".into()));
        }
        Ok(())
    }

    pub fn n_entities(&self) -> usize {
        self.group_sizes.iter().sum::<usize>() + self.mixed_group_size + self.loner_count
    }

    pub fn n_courses(&self) -> usize {
        self.k_groups * self.courses_core_per_group + self.courses_shared
    }

    /// Probability a mixed-cohort member takes any given core course
    /// (uniform across all groups' cores). The rate is calibrated so the
    /// expected Hamming distance between two mixed members equals that
    /// between two members of a regular group, making the mixed cohort as
    /// internally coherent as a planted group: solve
    /// k * p(1-p) = p_core(1-p_core) + (k-1) * p_cross(1-p_cross).
    /// Of the two coherence-equivalent roots r and 1-r, take the one nearer
    /// the average planted rate, so p_core = p_cross degenerates to a mixed
    /// cohort indistinguishable from the regular groups (no planted signal).
    fn p_mixed(&self) -> f64 {
        let k = self.k_groups as f64;
        let v = (self.p_core * (1.0 - self.p_core)
            + (k - 1.0) * self.p_cross * (1.0 - self.p_cross))
            / k;
        // v <= 1/4 because each p(1-p) term is <= 1/4
        let r = (1.0 - (1.0 - 4.0 * v).max(0.0).sqrt()) / 2.0;
        let mean = (self.p_core + (k - 1.0) * self.p_cross) / k;
        if (r - mean).abs() <= (1.0 - r - mean).abs() {
            r
        } else {
            1.0 - r
        }
    }

    /// Closed-form expected cell count.
    pub fn expected_cells(&self) -> f64 {
        let core = self.courses_core_per_group as f64;
        let shared = self.courses_shared as f64;
        let k = self.k_groups as f64;
        let regular: f64 = self
            .group_sizes
            .iter()
            .map(|&sz| {
                sz as f64
                    * (core * self.p_core
                        + (k - 1.0) * core * self.p_cross
                        + shared * self.p_shared)
            })
            .sum();
        let mixed = self.mixed_group_size as f64
            * (k * core * self.p_mixed() + shared * self.p_shared);
        let pool = if self.loner_pool == 0 {
            self.n_courses()
        } else {
            self.loner_pool.min(self.n_courses())
        };
        let loners = self.loner_count as f64 * self.loner_courses.min(pool).max(1) as f64;
        regular + mixed + loners
    }

    /// Variance of the cell count (sum of independent Bernoulli draws;
    /// loner draws are without replacement and contribute no variance).
    pub fn cells_variance(&self) -> f64 {
        let core = self.courses_core_per_group as f64;
        let shared = self.courses_shared as f64;
        let k = self.k_groups as f64;
        let var = |p: f64| p * (1.0 - p);
        let regular: f64 = self
            .group_sizes
            .iter()
            .map(|&sz| {
                sz as f64
                    * (core * var(self.p_core)
                        + (k - 1.0) * core * var(self.p_cross)
                        + shared * var(self.p_shared))
            })
            .sum();
        let mixed = self.mixed_group_size as f64
            * (k * core * var(self.p_mixed()) + shared * var(self.p_shared));
        regular + mixed
    }

    pub fn expected_density(&self) -> f64 {
        self.expected_cells() / (self.n_entities() as f64 * self.n_courses() as f64)
    }
}

#[derive(Debug)]
pub struct SynthData {
    pub matrix: AffiliationMatrix,
    pub metadata: Vec<EntityMetadata>,
    pub ground_truth: Partition,
    /// loner entity indices (unassigned in the ground truth)
    pub loners: Vec<usize>,
}

/// Seeded, reproducible dataset with ground-truth labels and grades.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_entities = cfg.n_entities();
    let n_courses = cfg.n_courses();
    let core = cfg.courses_core_per_group;

    let entity_ids: Vec<String> = (0..n_entities).map(|i| format!("s{i:04}")).collect();
    let feature_ids: Vec<String> = (0..n_courses).map(|j| format!("c{j:04}")).collect();

    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut metadata = Vec::with_capacity(n_entities);
    let mut truth = Vec::with_capacity(n_entities);
    let mut loners = Vec::new();
    let shared_start = cfg.k_groups * core;

    let mut entity = 0usize;
    for (group, &size) in cfg.group_sizes.iter().enumerate() {
        let normal = Normal::new(cfg.grade_means[group], cfg.grade_sd)
            .map_err(|e| Error::Config(e.to_string()))?;
        for _ in 0..size {
            let before = cells.len();
            for g in 0..cfg.k_groups {
                let p = if g == group { cfg.p_core } else { cfg.p_cross };
                for j in 0..core {
                    if rng.gen_bool(p) {
                        cells.push((entity, g * core + j));
                    }
                }
            }
            for j in shared_start..n_courses {
                if rng.gen_bool(cfg.p_shared) {
                    cells.push((entity, j));
                }
            }
            // an enrolled student appears in at least one course; an all-zero
            // row would be unobservable in affiliation data
            if cells.len() == before {
                let j = if core > 0 {
                    group * core + rng.gen_range(0..core)
                } else {
                    rng.gen_range(0..n_courses)
                };
                cells.push((entity, j));
            }
            let grade = normal
                .sample(&mut rng)
                .clamp(cfg.grade_min, cfg.grade_max);
            metadata.push(EntityMetadata {
                entity_id: entity_ids[entity].clone(),
                grade: Some((grade * 100.0).round() / 100.0),
                label: Some(cfg.group_labels[group].clone()),
            });
            truth.push(group);
            entity += 1;
        }
    }

    // mixed cohort: samples every group's cores uniformly
    let mean_grade = cfg.grade_means.iter().sum::<f64>() / cfg.k_groups as f64;
    let mixed_normal =
        Normal::new(mean_grade, cfg.grade_sd).map_err(|e| Error::Config(e.to_string()))?;
    let p_mixed = cfg.p_mixed();
    for _ in 0..cfg.mixed_group_size {
        let before = cells.len();
        for j in 0..shared_start {
            if rng.gen_bool(p_mixed) {
                cells.push((entity, j));
            }
        }
        for j in shared_start..n_courses {
            if rng.gen_bool(cfg.p_shared) {
                cells.push((entity, j));
            }
        }
        if cells.len() == before {
            cells.push((entity, rng.gen_range(0..n_courses)));
        }
        let grade = mixed_normal
            .sample(&mut rng)
            .clamp(cfg.grade_min, cfg.grade_max);
        metadata.push(EntityMetadata {
            entity_id: entity_ids[entity].clone(),
            grade: Some((grade * 100.0).round() / 100.0),
            label: Some(MIXED_LABEL.to_string()),
        });
        truth.push(cfg.k_groups);
        entity += 1;
    }

    // loners: a handful of random courses each, drawn from the tail of the
    // catalogue when a pool is configured
    let pool = if cfg.loner_pool == 0 {
        n_courses
    } else {
        cfg.loner_pool.min(n_courses)
    };
    let pool_start = n_courses - pool;
    for _ in 0..cfg.loner_count {
        let picks = cfg.loner_courses.min(pool).max(1);
        let mut taken = std::collections::BTreeSet::new();
        while taken.len() < picks {
            taken.insert(rng.gen_range(pool_start..n_courses));
        }
        for &j in &taken {
            cells.push((entity, j));
        }
        let grade = mixed_normal
            .sample(&mut rng)
            .clamp(cfg.grade_min, cfg.grade_max);
        metadata.push(EntityMetadata {
            entity_id: entity_ids[entity].clone(),
            grade: Some((grade * 100.0).round() / 100.0),
            label: Some(LONER_LABEL.to_string()),
        });
        // each loner its own singleton community
        truth.push(cfg.k_groups + 1 + loners.len());
        loners.push(entity);
        entity += 1;
    }

    let matrix = AffiliationMatrix::from_cells(entity_ids, feature_ids, &cells)?;
    Ok(SynthData {
        matrix,
        metadata,
        ground_truth: Partition::from_assignment(&truth),
        loners,
    })
}
