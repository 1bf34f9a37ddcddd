//! Single-flip Metropolis simulated annealing over a [`QuboProblem`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::QuboProblem;

/// Geometric cooling schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    /// Target acceptance rate of an average uphill flip at the start.
    pub initial_acceptance: f64,
    /// Acceptance rate of a unit uphill flip at the end.
    pub final_acceptance: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            initial_acceptance: 0.9,
            final_acceptance: 0.01,
        }
    }
}

struct Sampler<'a> {
    qubo: &'a QuboProblem,
    diag: Vec<f64>,
    neighbours: Vec<Vec<(usize, f64)>>,
}

impl<'a> Sampler<'a> {
    fn new(qubo: &'a QuboProblem) -> Self {
        let diag = (0..qubo.len()).map(|i| qubo.coefficient(i, i)).collect();
        Self {
            qubo,
            diag,
            neighbours: qubo.neighbours(),
        }
    }

    fn fields(&self, x: &[u8]) -> Vec<f64> {
        self.neighbours
            .iter()
            .map(|nb| nb.iter().map(|&(j, q)| q * x[j] as f64).sum())
            .collect()
    }

    fn delta(&self, x: &[u8], field: &[f64], i: usize) -> f64 {
        (1.0 - 2.0 * x[i] as f64) * (self.diag[i] + 2.0 * field[i])
    }

    fn flip(&self, x: &mut [u8], field: &mut [f64], i: usize) {
        let change = if x[i] == 1 { -1.0 } else { 1.0 };
        x[i] ^= 1;
        for &(j, q) in &self.neighbours[i] {
            field[j] += change * q;
        }
    }

    /// Temperature at which an average uphill flip from a random state is
    /// accepted with the requested probability.
    fn initial_temperature(&self, schedule: &AnnealSchedule, rng: &mut ChaCha8Rng) -> f64 {
        let n = self.qubo.len();
        let (mut sum, mut count) = (0.0, 0usize);
        for _ in 0..8 {
            let x: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let field = self.fields(&x);
            for i in 0..n {
                let d = self.delta(&x, &field, i);
                if d > 0.0 {
                    sum += d;
                    count += 1;
                }
            }
        }
        let mean = if count == 0 { 1.0 } else { sum / count as f64 };
        -mean / schedule.initial_acceptance.ln()
    }

    fn run(&self, schedule: &AnnealSchedule, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let n = self.qubo.len();
        let hot = self.initial_temperature(schedule, rng);
        let cold = (-1.0 / schedule.final_acceptance.ln()).min(hot);
        let mut x: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let mut field = self.fields(&x);
        let sweeps = schedule.sweeps.max(1);
        let ratio = if sweeps > 1 {
            (cold / hot).powf(1.0 / (sweeps - 1) as f64)
        } else {
            1.0
        };
        let mut temperature = hot;
        for _ in 0..sweeps {
            for i in 0..n {
                let d = self.delta(&x, &field, i);
                if d <= 0.0 || rng.random::<f64>() < (-d / temperature).exp() {
                    self.flip(&mut x, &mut field, i);
                }
            }
            temperature *= ratio;
        }
        // finish in a local minimum
        loop {
            let mut improved = false;
            for i in 0..n {
                if self.delta(&x, &field, i) < 0.0 {
                    self.flip(&mut x, &mut field, i);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        x
    }
}

/// Runs `n_samples` independent anneals. Sample `s` draws from ChaCha
/// stream `s` of `seed`, so output is independent of thread scheduling.
pub fn anneal_samples(
    qubo: &QuboProblem,
    n_samples: usize,
    seed: u64,
    schedule: &AnnealSchedule,
) -> Vec<Vec<u8>> {
    assert!(n_samples >= 1, "n_samples must be at least 1");
    let sampler = Sampler::new(qubo);
    (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            sampler.run(schedule, &mut rng)
        })
        .collect()
}
