//! Seeded random streams.
//!
//! Every independent task (a random state, an ensemble sample, a noise
//! realisation) draws from its own ChaCha stream selected by the task index,
//! so results do not depend on how tasks are scheduled across workers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TaskRng = ChaCha8Rng;

/// Independent generator for `task` derived from `master`.
pub fn task_rng(master: u64, task: u64) -> TaskRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(task);
    rng
}

/// Master seed for a named group of tasks.
pub fn group_seed(master: u64, group: u64) -> u64 {
    master ^ group.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Two-level stream: `task` within a `group` (e.g. sample within a curve).
pub fn subtask_rng(master: u64, group: u64, task: u64) -> TaskRng {
    task_rng(group_seed(master, group), task)
}

/// Complex normal variate with E|z|² = 1.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// d×d matrix of iid complex normals (Ginibre ensemble).
pub fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = DMatrix::zeros(d, d);
    for c in 0..d {
        for r in 0..d {
            m[(r, c)] = complex_normal(rng);
        }
    }
    m
}
