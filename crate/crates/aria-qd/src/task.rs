//! Stochastic evaluation functions: the noisy 8-DoF planar arm and a
//! synthetic noisy point task used as a fast test fixture.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::Genotype;
use crate::grid::Descriptor;

/// One stochastic sample of (fitness, descriptor) for a genotype.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Arm8,
    Point2,
}

/// Task parameters: genotype box, descriptor box, noise levels, and the
/// normalization anchors used by the archive scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub name: TaskName,
    pub genotype_dim: usize,
    /// Box bounds applied to every genotype component.
    pub genotype_bounds: (f64, f64),
    pub sigma_f: f64,
    pub sigma_d: f64,
}

const ARM_N_JOINTS: usize = 8;
const ARM_LINK_LENGTH: f64 = 1.0 / ARM_N_JOINTS as f64;

impl Task {
    /// Planar 8-DoF arm. Genotype components in [0,1] map affinely to joint
    /// angles in [-pi, pi]; angles accumulate along the chain and the eight
    /// links have equal length 1/8, so the end effector stays inside the
    /// unit reach disc. The descriptor is the end-effector position mapped
    /// into [0,1]^2, with isotropic Gaussian noise added in descriptor
    /// units. Fitness is the negated population variance of the joint
    /// angles, plus Gaussian noise.
    pub fn arm8(sigma_f: f64, sigma_d: f64) -> Self {
        assert!(sigma_f >= 0.0 && sigma_d >= 0.0);
        Task {
            name: TaskName::Arm8,
            genotype_dim: ARM_N_JOINTS,
            genotype_bounds: (0.0, 1.0),
            sigma_f,
            sigma_d,
        }
    }

    /// Synthetic point task: descriptor = first two genotype components
    /// plus Gaussian noise, fitness = -||genotype||^2 plus Gaussian noise.
    pub fn point2(dim: usize, sigma_f: f64, sigma_d: f64) -> Self {
        assert!(dim >= 2);
        assert!(sigma_f >= 0.0 && sigma_d >= 0.0);
        Task {
            name: TaskName::Point2,
            genotype_dim: dim,
            genotype_bounds: (0.0, 1.0),
            sigma_f,
            sigma_d,
        }
    }

    /// Descriptor box associated with the task; both tasks use [0,1]^2.
    pub fn grid_box(&self) -> (Descriptor, Descriptor) {
        (Descriptor::new(0.0, 0.0), Descriptor::new(1.0, 1.0))
    }

    /// Fixed a-priori fitness normalization anchors for score computation.
    pub fn fitness_norm_bounds(&self) -> (f64, f64) {
        let pad = 4.0 * self.sigma_f;
        match self.name {
            // Var of angles in [-pi, pi] is bounded by pi^2.
            TaskName::Arm8 => (-(std::f64::consts::PI.powi(2)) - pad, pad),
            // ||theta||^2 <= dim for components in [0,1].
            TaskName::Point2 => (-(self.genotype_dim as f64) - pad, pad),
        }
    }

    /// Worst-case NDV anchor for V-Score normalization (maps to score 0).
    pub fn ndv_norm_lower(&self) -> f64 {
        let v = -8.0 * self.sigma_d.powi(2) * 2.0;
        if v < 0.0 {
            v
        } else {
            -1e-6
        }
    }

    /// One independent stochastic draw of (fitness, descriptor).
    pub fn evaluate<R: Rng>(&self, genotype: &[f64], rng: &mut R) -> Evaluation {
        assert_eq!(
            genotype.len(),
            self.genotype_dim,
            "genotype dimension mismatch: expected {}, got {}",
            self.genotype_dim,
            genotype.len()
        );
        let (fitness, descriptor) = match self.name {
            TaskName::Arm8 => arm_forward(genotype),
            TaskName::Point2 => {
                let sq: f64 = genotype.iter().map(|v| v * v).sum();
                (-sq, Descriptor::new(genotype[0], genotype[1]))
            }
        };
        let nf: f64 = rng.sample(StandardNormal);
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        Evaluation {
            fitness: fitness + self.sigma_f * nf,
            descriptor: Descriptor::new(
                descriptor.x + self.sigma_d * nx,
                descriptor.y + self.sigma_d * ny,
            ),
        }
    }

    /// Element-wise evaluation with independent noise per element.
    pub fn evaluate_batch<R: Rng>(&self, genotypes: &[Genotype], rng: &mut R) -> Vec<Evaluation> {
        genotypes.iter().map(|g| self.evaluate(g, rng)).collect()
    }

    /// Uniform random genotype within the task's box bounds.
    pub fn random_genotype<R: Rng>(&self, rng: &mut R) -> Genotype {
        let (lo, hi) = self.genotype_bounds;
        (0..self.genotype_dim)
            .map(|_| rng.gen_range(lo..hi))
            .collect()
    }

    /// Clip a genotype into the task's box bounds in place.
    pub fn clip(&self, genotype: &mut [f64]) {
        let (lo, hi) = self.genotype_bounds;
        for v in genotype.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Noise-free arm evaluation: (fitness, descriptor) from forward kinematics.
fn arm_forward(genotype: &[f64]) -> (f64, Descriptor) {
    let angles: Vec<f64> = genotype
        .iter()
        .map(|t| (t - 0.5) * 2.0 * std::f64::consts::PI)
        .collect();

    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let var = angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / angles.len() as f64;

    let mut heading = 0.0;
    let mut x = 0.0;
    let mut y = 0.0;
    for a in &angles {
        heading += a;
        x += ARM_LINK_LENGTH * heading.cos();
        y += ARM_LINK_LENGTH * heading.sin();
    }
    (-var, Descriptor::new((x + 1.0) / 2.0, (y + 1.0) / 2.0))
}

/// Task wrapper that counts stochastic evaluations. All algorithms draw
/// their evaluations through one of these, which makes budget accounting
/// exact and auditable.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub task: Task,
    count: u64,
}

impl Evaluator {
    pub fn new(task: Task) -> Self {
        Evaluator { task, count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn evaluate<R: Rng>(&mut self, genotype: &[f64], rng: &mut R) -> Evaluation {
        self.count += 1;
        self.task.evaluate(genotype, rng)
    }

    pub fn evaluate_batch<R: Rng>(
        &mut self,
        genotypes: &[Genotype],
        rng: &mut R,
    ) -> Vec<Evaluation> {
        self.count += genotypes.len() as u64;
        self.task.evaluate_batch(genotypes, rng)
    }
}
