//! Multi-threaded drivers. Each returns exactly what its sequential
//! counterpart in `qdsim_core` returns for the same seed.

use rayon::prelude::*;

use qdsim_core::correlator::{ChannelSet, CorrelationHistogram, Correlator, HistogramSpec};
use qdsim_core::emitter::EmitterConfig;
use qdsim_core::interference::{hom_histogram, hom_seeds, stream_rep_period, tpi_result, HomSetup, Polarization, TPIResult};
use qdsim_core::pcfs::{pcfs_assemble, pcfs_position, voltage_seed, PCFSResult, PCFSScanConfig};
use qdsim_core::photon::TagStream;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `threads` workers (0 picks the number of cores).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

const CHUNK: usize = 1 << 14;

/// [`qdsim_core::correlator::correlate`] split over start-tag chunks.
pub fn correlate_parallel(
    stream: &TagStream,
    a: ChannelSet,
    b: ChannelSet,
    spec: HistogramSpec,
) -> Result<CorrelationHistogram> {
    let c = Correlator::new(stream, a, b, spec)?;
    let n = c.n_starts();
    let chunks: Vec<_> = (0..n).step_by(CHUNK).map(|s| s..(s + CHUNK).min(n)).collect();
    let counts = chunks
        .into_par_iter()
        .map(|r| c.partial(r))
        .reduce(
            || vec![0u64; spec.n_bins],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            },
        );
    Ok(c.finish(counts))
}

/// [`qdsim_core::interference::hom_simulate`] with both polarizations at once.
pub fn hom_simulate_parallel(stream: &TagStream, setup: &HomSetup, seed: u64) -> Result<TPIResult> {
    let period = stream_rep_period(stream)?;
    let (s_par, s_orth) = hom_seeds(seed);
    let (par, orth) = rayon::join(
        || hom_histogram(stream, setup, Polarization::Parallel, s_par),
        || hom_histogram(stream, setup, Polarization::Orthogonal, s_orth),
    );
    Ok(tpi_result(setup, period, par?, orth?)?)
}

/// [`qdsim_core::pcfs::pcfs_run`] with stage positions simulated concurrently.
pub fn pcfs_run_parallel(
    config: &PCFSScanConfig,
    emitter: &EmitterConfig,
    voltages: &[f64],
    seed: u64,
) -> Result<Vec<PCFSResult>> {
    config.validate()?;
    emitter.validate()?;
    if voltages.is_empty() {
        return Err(Error::Usage("no voltages given".into()));
    }
    let mut out = Vec::with_capacity(voltages.len());
    for (k, &v) in voltages.iter().enumerate() {
        let s = voltage_seed(seed, k);
        let positions = (0..config.positions())
            .into_par_iter()
            .map(|i| pcfs_position(config, emitter, v, i, s))
            .collect::<qdsim_core::Result<Vec<_>>>()?;
        out.push(pcfs_assemble(config, Some(v), positions)?);
    }
    Ok(out)
}

/// Applies `f` to every item concurrently, keeping input order.
pub fn map_ordered<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> Result<T> + Sync) -> Result<Vec<T>> {
    items.par_iter().map(&f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use qdsim_core::correlator::correlate;
    use qdsim_core::photon::poisson_stream;

    #[test]
    fn parallel_correlation_matches_sequential() {
        let s = poisson_stream(&[2e6, 3e6], 0.05, 4).unwrap();
        let spec = HistogramSpec::symmetric(256e-12, 100e-9).unwrap();
        let (a, b) = (ChannelSet::single(0), ChannelSet::single(1));
        let seq = correlate(&s, a, b, spec).unwrap();
        let par = with_threads(4, || correlate_parallel(&s, a, b, spec)).unwrap().unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn map_keeps_order() {
        let v: Vec<u64> = (0..100).collect();
        let out = with_threads(3, || map_ordered(&v, |x| Ok(x * 2))).unwrap().unwrap();
        assert_eq!(out, v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
