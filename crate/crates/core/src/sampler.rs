//! Bitstring sampling from a planar tensor network state.
//!
//! Partitions are sampled in line order. Inside a partition each qubit is
//! drawn from its reduced density matrix conditioned on the incoming
//! amplitude MPS `m` (and its conjugate), the precomputed norm message `M`
//! from the far side, and the qubits already drawn. The product of the
//! conditionals is `q(x)`; `p(x) = |⟨x|ψ⟩|²` is verified by a separate
//! boundary-MPS contraction.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::boundary::{
    amplitude, amplitude_blocks, bra, contract_block, contract_closed, fit_mps_mpo, ket, message_prefix,
    norm_blocks, place_incoming, BoundaryEnvironment, FitOptions, Mps, Partitioning, PauliString,
};
use crate::error::{Error, Result};
use crate::network::{phys_label, Bitstring, TensorNetworkState};
use crate::tensor::Tensor;

/// Conditional probabilities more negative than this (relative to the
/// total) are counted as numerical incidents before being clamped.
const NEGATIVE_MASS_TOLERANCE: f64 = 1e-10;
/// Attempts per sample before a zero-mass branch is reported as an error.
const MAX_ATTEMPTS: usize = 16;

/// Sampling ranks and run settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Rank of the amplitude-side messages `m`.
    pub rank_x: usize,
    /// Rank of the norm-side messages `M`; must match the environment.
    pub rank_n: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Rank of the independent `⟨x|ψ⟩` contraction.
    pub verify_rank: usize,
    /// Magnetization sector the samples should lie in, if known.
    pub expected_magnetization: Option<i64>,
    pub fit: FitOptions,
}

impl SamplerConfig {
    /// Equal ranks `R_x = R_n = rank`, verification at `2χ`.
    pub fn new(rank: usize, chi: usize, n_samples: usize, seed: u64) -> Self {
        SamplerConfig {
            rank_x: rank,
            rank_n: rank,
            n_samples,
            seed,
            verify_rank: 2 * chi.max(1),
            expected_magnetization: None,
            fit: FitOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rank_x == 0 || self.rank_n == 0 || self.verify_rank == 0 {
            return Err(Error::Config("sampling ranks must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("at least one sample is required".into()));
        }
        Ok(())
    }
}

fn bits_as_string<S: Serializer>(x: &Bitstring, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(x)
}

/// One drawn bitstring.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRecord {
    #[serde(serialize_with = "bits_as_string")]
    pub x: Bitstring,
    /// Probability with which `x` was drawn.
    pub q: f64,
    /// Verified `|⟨x|ψ⟩|²`.
    pub p: f64,
    /// `p / q`.
    pub ratio: f64,
    /// `|⟨x|ψ⟩|²` read off the sampling sweep itself; present only when no
    /// amplitude-side fit was truncated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_sweep: Option<f64>,
}

/// Aggregate of a sampling run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport {
    #[serde(skip)]
    pub records: Vec<SampleRecord>,
    /// Mean of `log(q/p)` over records with `p > 0`.
    pub kld: f64,
    /// Records left out of the KLD because `p = 0`.
    pub kld_excluded: usize,
    /// Mean of `p/q`, an unbiased estimate of `⟨ψ|ψ⟩`.
    pub norm_estimate: f64,
    pub norm_std_error: f64,
    /// Share of samples in the expected magnetization sector.
    pub magnetization_pass_rate: Option<f64>,
    /// Wall-clock sampling time divided by the number of samples.
    pub mean_seconds_per_sample: f64,
    /// Conditional distributions that needed clamping of negative mass.
    pub negative_mass_incidents: usize,
    /// Zero-mass branches that forced a sample to be redrawn.
    pub resamples: usize,
}

struct Draw {
    x: Bitstring,
    q: f64,
    p_sweep: Option<f64>,
    incidents: usize,
    resamples: usize,
}

/// Draw one bitstring with the random stream of sample `index`.
fn draw_one(state: &TensorNetworkState, env: &BoundaryEnvironment, cfg: &SamplerConfig, index: u64) -> Result<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let mut incidents = 0;
    for attempt in 0..MAX_ATTEMPTS {
        match sweep(state, env, cfg, &mut rng, &mut incidents)? {
            Some((x, q, p_sweep)) => return Ok(Draw { x, q, p_sweep, incidents, resamples: attempt }),
            None => continue,
        }
    }
    Err(Error::Degenerate(format!("sample {index} hit zero conditional mass {MAX_ATTEMPTS} times")))
}

/// One pass over all partitions. `None` when a conditional distribution has
/// no mass at all.
fn sweep(
    state: &TensorNetworkState,
    env: &BoundaryEnvironment,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
    incidents: &mut usize,
) -> Result<Option<(Bitstring, f64, Option<f64>)>> {
    let part = env.partitioning();
    let nb = part.len();
    let mut bits = vec![0u8; state.num_qubits()];
    let mut q = 1.0;
    let mut m: Option<Mps> = None;
    let mut exact_sweep = true;
    for b in 0..nb {
        if !sample_partition(state, part, b, m.as_ref(), env.message(b), &mut bits, &mut q, rng, incidents)? {
            return Ok(None);
        }
        let x = Bitstring::new(bits.clone())?;
        let blocks = amplitude_blocks(state, part, b, &x)?;
        if b + 1 < nb {
            let (next, rep) = fit_mps_mpo(m.as_ref(), &blocks, cfg.rank_x, &cfg.fit, &message_prefix('m', b))?;
            exact_sweep &= !rep.truncated;
            m = Some(next);
        } else {
            let p_sweep = exact_sweep.then(|| contract_closed(m.as_ref(), &blocks).map(|a| a.norm_sqr()));
            return Ok(Some((x, q, p_sweep.transpose()?)));
        }
    }
    unreachable!("the last partition returns")
}

/// Sample the qubits of partition `b` in order, writing them into `bits`
/// and multiplying their conditional probabilities into `q`.
#[allow(clippy::too_many_arguments)]
fn sample_partition(
    state: &TensorNetworkState,
    part: &Partitioning,
    b: usize,
    m: Option<&Mps>,
    big_m: Option<&Mps>,
    bits: &mut [u8],
    q: &mut f64,
    rng: &mut ChaCha8Rng,
    incidents: &mut usize,
) -> Result<bool> {
    let group = part.group(b);
    let mut blocks = norm_blocks(state, part, b);
    if let Some(m) = m {
        place_incoming(&mut blocks, m.sites().to_vec());
        place_incoming(&mut blocks, m.conj_mapped(|l| l.prime()).sites().to_vec());
    }
    if let Some(big) = big_m {
        place_incoming(&mut blocks, big.sites().to_vec());
    }
    let k = group.len();
    let mut rights: Vec<Option<Tensor>> = vec![None; k + 1];
    for j in (1..k).rev() {
        rights[j] = Some(contract_block(rights[j + 1].clone(), &blocks[j], None)?);
    }
    let mut left: Option<Tensor> = None;
    for (j, &v) in group.iter().enumerate() {
        let p = phys_label(v);
        let mut open = blocks[j].clone();
        open[1] = bra(state, v, true);
        let rho = contract_block(left.clone(), &open, rights[j + 1].as_ref())?.permute(&[p.clone(), p.prime()])?;
        let mut w = [rho.get(&[0, 0]).re, rho.get(&[1, 1]).re];
        let total = w[0] + w[1];
        for x in &mut w {
            if *x < 0.0 {
                if *x < -NEGATIVE_MASS_TOLERANCE * total.abs() {
                    *incidents += 1;
                }
                *x = 0.0;
            }
        }
        let total = w[0] + w[1];
        if !(total > 0.0) || !total.is_finite() {
            return Ok(false);
        }
        let s = usize::from(rng.random::<f64>() * total >= w[0]);
        *q *= w[s] / total;
        bits[v] = s as u8;
        let mut fixed = blocks[j].clone();
        fixed[0] = ket(state, v).fix(&p, s)?;
        fixed[1] = bra(state, v, false).fix(&p, s)?;
        left = Some(contract_block(left, &fixed, None)?);
    }
    Ok(true)
}

/// `|⟨x|ψ⟩|²` from a boundary-MPS contraction at `verify_rank`.
pub fn verify_p(
    state: &TensorNetworkState,
    x: &Bitstring,
    partitioning: &Partitioning,
    verify_rank: usize,
    fit: &FitOptions,
) -> Result<f64> {
    Ok(amplitude(state, x, partitioning, verify_rank, fit)?.norm_sqr())
}

/// Draw `cfg.n_samples` bitstrings. Sample `i` uses random stream `i` of
/// `cfg.seed`, so the output does not depend on the thread count.
pub fn draw_samples(state: &TensorNetworkState, env: &BoundaryEnvironment, cfg: &SamplerConfig) -> Result<SampleReport> {
    cfg.validate()?;
    if env.rank() != cfg.rank_n {
        return Err(Error::Config(format!(
            "environment was built at rank {} but the sampler expects {}",
            env.rank(),
            cfg.rank_n
        )));
    }
    let start = Instant::now();
    let part = env.partitioning();
    let draws: Vec<(Draw, f64)> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let d = draw_one(state, env, cfg, i)?;
            let p = verify_p(state, &d.x, part, cfg.verify_rank, &cfg.fit)?;
            Ok((d, p))
        })
        .collect::<Result<_>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut incidents = 0;
    let mut resamples = 0;
    let records: Vec<SampleRecord> = draws
        .into_iter()
        .map(|(d, p)| {
            incidents += d.incidents;
            resamples += d.resamples;
            SampleRecord { ratio: p / d.q, x: d.x, q: d.q, p, p_sweep: d.p_sweep }
        })
        .collect();
    Ok(summarize(records, cfg.expected_magnetization, elapsed, incidents, resamples))
}

/// Build a report from records.
pub fn summarize(
    records: Vec<SampleRecord>,
    expected_magnetization: Option<i64>,
    seconds: f64,
    negative_mass_incidents: usize,
    resamples: usize,
) -> SampleReport {
    let (kld, kld_excluded) = kld(&records);
    let (norm_estimate, norm_std_error) = norm_estimator(&records);
    let magnetization_pass_rate = expected_magnetization.map(|m| magnetization_pass_rate(&records, m));
    let n = records.len().max(1) as f64;
    SampleReport {
        kld,
        kld_excluded,
        norm_estimate,
        norm_std_error,
        magnetization_pass_rate,
        mean_seconds_per_sample: seconds / n,
        negative_mass_incidents,
        resamples,
        records,
    }
}

/// Mean of `log(q/p)` over records with `p > 0`, and the number of records
/// left out.
pub fn kld(records: &[SampleRecord]) -> (f64, usize) {
    let kept: Vec<f64> = records.iter().filter(|r| r.p > 0.0).map(|r| (r.q / r.p).ln()).collect();
    let excluded = records.len() - kept.len();
    if kept.is_empty() {
        return (f64::NAN, excluded);
    }
    (kept.iter().sum::<f64>() / kept.len() as f64, excluded)
}

fn mean_and_std_error(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean of `p/q` with its standard error.
pub fn norm_estimator(records: &[SampleRecord]) -> (f64, f64) {
    mean_and_std_error(records.iter().map(|r| r.ratio))
}

/// Share of records whose magnetization equals `expected`.
pub fn magnetization_pass_rate(records: &[SampleRecord], expected: i64) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    records.iter().filter(|r| r.x.magnetization() == expected).count() as f64 / records.len() as f64
}

/// Importance-sampled `⟨O⟩ = (1/N) · mean((p/q) ⟨x|O|x⟩)` with `N` the mean
/// ratio, plus a delta-method standard error.
pub fn importance_expectation(records: &[SampleRecord], obs: &PauliString) -> Result<(f64, f64)> {
    let (norm, _) = norm_estimator(records);
    if !(norm >= 1e-12) {
        return Err(Error::Numerical(format!("norm estimate {norm:e} is too small for a reliable estimate")));
    }
    let values: Vec<f64> = records.iter().map(|r| obs.diagonal_value(&r.x)).collect::<Result<_>>()?;
    let n = records.len() as f64;
    let mean = records.iter().zip(&values).map(|(r, o)| r.ratio * o).sum::<f64>() / n / norm;
    let var = records.iter().zip(&values).map(|(r, o)| (r.ratio * (o - mean)).powi(2)).sum::<f64>() / n;
    Ok((mean, (var / n).sqrt() / norm))
}

/// Plain sample mean of `⟨x|O|x⟩` with its standard error, ignoring `p/q`.
pub fn raw_expectation(records: &[SampleRecord], obs: &PauliString) -> Result<(f64, f64)> {
    let values: Vec<f64> = records.iter().map(|r| obs.diagonal_value(&r.x)).collect::<Result<_>>()?;
    Ok(mean_and_std_error(values.into_iter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{norm_environments, Strategy};
    use crate::network::NetworkGraph;

    fn record(q: f64, p: f64) -> SampleRecord {
        SampleRecord { x: Bitstring::zeros(1), q, p, ratio: p / q, p_sweep: None }
    }

    #[test]
    fn kld_arithmetic() {
        assert_eq!(kld(&[record(0.5, 0.5), record(0.25, 0.25)]).0, 0.0);
        let (k, excl) = kld(&[record(0.5, 0.25), record(0.5, 1.0)]);
        assert!(k.abs() < 1e-15);
        assert_eq!(excl, 0);
        let (k, excl) = kld(&[record(0.5, 0.0), record(0.5, 0.5)]);
        assert_eq!((k, excl), (0.0, 1));
    }

    #[test]
    fn identity_observable_is_one() {
        let recs = [record(0.5, 0.2), record(0.1, 0.3)];
        let id: PauliString = "I0".parse().unwrap();
        assert!((importance_expectation(&recs, &id).unwrap().0 - 1.0).abs() < 1e-15);
        assert!(importance_expectation(&[record(0.5, 0.0)], &id).is_err());
    }

    #[test]
    fn product_state_gives_its_bitstring() {
        let g = NetworkGraph::heavy_hex(1, 1).unwrap();
        let x = Bitstring::new(g.domain_wall_bits()).unwrap();
        let s = TensorNetworkState::product_state(&g, &x).unwrap();
        let part = Partitioning::new(&g, Strategy::Columns).unwrap();
        let env = norm_environments(&s, &part, 1, &FitOptions::default()).unwrap();
        let mut cfg = SamplerConfig::new(1, 1, 20, 7);
        cfg.expected_magnetization = Some(x.magnetization());
        let rep = draw_samples(&s, &env, &cfg).unwrap();
        for r in &rep.records {
            assert_eq!(r.x, x);
            assert!((r.q - 1.0).abs() < 1e-14 && (r.p - 1.0).abs() < 1e-14);
        }
        assert_eq!(rep.magnetization_pass_rate, Some(1.0));
        assert!(rep.kld.abs() < 1e-14);
        assert!((rep.norm_estimate - 1.0).abs() < 1e-14);
        let z0: PauliString = format!("Z{}", 0).parse().unwrap();
        let want = 1.0 - 2.0 * x.bits()[0] as f64;
        assert!((importance_expectation(&rep.records, &z0).unwrap().0 - want).abs() < 1e-14);
    }

    #[test]
    fn rank_mismatch_is_rejected() {
        let g = NetworkGraph::chain(3).unwrap();
        let s = TensorNetworkState::product_state(&g, &Bitstring::zeros(3)).unwrap();
        let part = Partitioning::new(&g, Strategy::Columns).unwrap();
        let env = norm_environments(&s, &part, 2, &FitOptions::default()).unwrap();
        assert!(draw_samples(&s, &env, &SamplerConfig::new(1, 1, 5, 0)).is_err());
    }
}
