use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Resamples per chunk. Chunk `c` draws from stream `c` of the master seed,
/// so results do not depend on how chunks are scheduled.
pub const CHUNK: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub resamples: usize,
    pub ratio: f64,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            resamples: 10_000,
            ratio: 0.5,
            seed: 0,
        }
    }
}

impl BootstrapParams {
    fn check(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::InvalidInput("resamples must be positive".into()));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidInput("sample ratio must be in (0, 1]".into()));
        }
        Ok(())
    }

    fn draws(&self, n: usize) -> usize {
        ((self.ratio * n as f64).ceil() as usize).clamp(1, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub system_a: String,
    pub system_b: String,
    pub metric: String,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
    pub resamples: usize,
    pub sample_ratio: f64,
    pub seed: u64,
}

impl BootstrapResult {
    /// A is declared better when p < 0.05.
    pub fn a_significantly_better(&self) -> bool {
        self.p_value < 0.05
    }
}

fn chunked_count<F>(params: &BootstrapParams, exec: Exec, body: F) -> usize
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync + Send,
{
    let chunks = params.resamples.div_ceil(CHUNK);
    exec.map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(c as u64);
        let todo = CHUNK.min(params.resamples - c * CHUNK);
        (0..todo).filter(|_| body(&mut rng)).count()
    })
    .into_iter()
    .sum()
}

/// Paired bootstrap. p is the share of resamples in which B's mean reaches
/// A's; ties count against A.
pub fn paired_bootstrap(a: &[f64], b: &[f64], params: &BootstrapParams, exec: Exec) -> Result<f64> {
    params.check()?;
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("paired bootstrap needs at least two items".into()));
    }
    let n = a.len();
    let m = params.draws(n);
    let hits = chunked_count(params, exec, |rng| {
        let (mut sa, mut sb) = (0.0, 0.0);
        for _ in 0..m {
            let i = rng.random_range(0..n);
            sa += a[i];
            sb += b[i];
        }
        sb >= sa
    });
    Ok(hits as f64 / params.resamples as f64)
}

/// Unpaired bootstrap over two independent samples; p is the share of
/// resamples in which `y`'s mean reaches `x`'s.
pub fn unpaired_bootstrap(x: &[f64], y: &[f64], params: &BootstrapParams, exec: Exec) -> Result<f64> {
    params.check()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let (mx, my) = (params.draws(x.len()), params.draws(y.len()));
    let hits = chunked_count(params, exec, |rng| {
        let sx: f64 = (0..mx).map(|_| x[rng.random_range(0..x.len())]).sum();
        let sy: f64 = (0..my).map(|_| y[rng.random_range(0..y.len())]).sum();
        sy / my as f64 >= sx / mx as f64
    });
    Ok(hits as f64 / params.resamples as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
