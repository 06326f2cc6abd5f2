//! Coupled Monte Carlo simulation of abstraction chains under shared noise,
//! empirical deviation frequencies and sampled checks of the decrease
//! inequality.
//!
//! Noise comes from ChaCha8 with stream `run` and, within a run, the block
//! of words starting at `k · 2 · (noise channels)` for step `k`. Standard
//! normals are obtained by inverse CDF from 53-bit uniforms. Every level of
//! a chain consumes the same draw, which is what couples the trajectories.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fmdp::Grid;
use crate::linalg::{Mat, Vector};
use crate::model::{step, Interconnection, NonlinearSCS};
use crate::spsf::{self, QuadSPSF};
use crate::synth::{refine_input, GridController, Link, RefineMode};

/// One level of an abstraction chain.
#[derive(Clone, Debug)]
pub struct Level {
    pub net: Interconnection,
    /// State grids of a finite level; states are re-quantized after every step.
    pub grids: Option<Vec<Grid>>,
}

/// Input source at the most abstract level.
#[derive(Clone, Debug)]
pub enum TopPolicy {
    Constant(Vec<Vector>),
    Grid(Vec<GridController>),
}

/// `levels[0]` is the concrete network; `links[l][i]` refines inputs of
/// subsystem `i` from level `l+1` to level `l`.
#[derive(Clone, Debug)]
pub struct Chain {
    pub levels: Vec<Level>,
    pub links: Vec<Vec<Link>>,
    pub top: TopPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub keep_traces: bool,
    /// Box for every concrete output; a run is safe if it never leaves it.
    pub safe_box: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBundle {
    pub seed: u64,
    pub runs: usize,
    pub horizon: usize,
    /// Level pairs `(a, b)`, `a < b`, in lexicographic order.
    pub pairs: Vec<(usize, usize)>,
    /// `sup_dev[pair][run] = sup_k max_i ‖y_a,i(k) − y_b,i(k)‖`.
    pub sup_dev: Vec<Vec<f64>>,
    /// `traces[run][level]`: outputs of all subsystems, step-major.
    pub traces: Option<Vec<Vec<Vec<f64>>>>,
    pub safe: Option<Vec<bool>>,
    /// Per-run checksum of the noise stream.
    pub noise_checksum: Vec<u64>,
}

struct RunResult {
    sup: Vec<f64>,
    trace: Option<Vec<Vec<f64>>>,
    safe: bool,
    checksum: u64,
}

/// Standard normal from a 64-bit word by inverse CDF.
pub fn normal_from_bits(bits: u64) -> f64 {
    let u = ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    Normal::standard().inverse_cdf(u)
}

fn noise_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

fn draw_step(rng: &mut ChaCha8Rng, k: usize, dims: &[usize], checksum: &mut u64) -> Vec<Vector> {
    let total: usize = dims.iter().sum();
    rng.set_word_pos(k as u128 * 2 * total as u128);
    dims.iter()
        .map(|&d| {
            Vector::from_iterator(
                d,
                (0..d).map(|_| {
                    let b = rng.next_u64();
                    *checksum = checksum.rotate_left(5) ^ b;
                    normal_from_bits(b)
                }),
            )
        })
        .collect()
}

fn check_chain(chain: &Chain, init: &[Vec<Vector>]) -> Result<Vec<usize>> {
    let levels = chain.levels.len();
    if levels == 0 || chain.links.len() + 1 != levels || init.len() != levels {
        return Err(Error::Dimension("chain needs one link fewer than levels and one initial state per level".into()));
    }
    let n = chain.levels[0].net.len();
    let dims: Vec<usize> = chain.levels[0].net.subsystems.iter().map(|s| s.r_dim()).collect();
    for (l, lvl) in chain.levels.iter().enumerate() {
        if lvl.net.len() != n || init[l].len() != n {
            return Err(Error::Dimension(format!("level {l} has a different subsystem count")));
        }
        for (i, s) in lvl.net.subsystems.iter().enumerate() {
            if s.r_dim() != dims[i] {
                return Err(Error::Dimension(format!("level {l} subsystem {i}: noise channels differ from the concrete level")));
            }
            if s.q() != chain.levels[0].net.subsystems[i].q() {
                return Err(Error::Dimension(format!("level {l} subsystem {i}: output dimension differs")));
            }
            if init[l][i].len() != s.n() {
                return Err(Error::Dimension(format!("level {l} subsystem {i}: initial state dimension")));
            }
        }
        if let Some(g) = &lvl.grids {
            if g.len() != n {
                return Err(Error::Dimension(format!("level {l}: one grid per subsystem required")));
            }
        }
    }
    for (l, links) in chain.links.iter().enumerate() {
        if links.len() != n {
            return Err(Error::Dimension(format!("link {l}: one interface per subsystem required")));
        }
    }
    match &chain.top {
        TopPolicy::Constant(v) if v.len() != n => return Err(Error::Dimension("one constant input per subsystem".into())),
        TopPolicy::Grid(v) if v.len() != n => return Err(Error::Dimension("one controller per subsystem".into())),
        _ => {}
    }
    Ok(dims)
}

fn run_one(chain: &Chain, cfg: &SimConfig, init: &[Vec<Vector>], dims: &[usize], run: usize) -> Result<RunResult> {
    let levels = chain.levels.len();
    let n = chain.levels[0].net.len();
    let mut rng = noise_rng(cfg.seed, run as u64);
    let mut checksum = 0u64;
    let mut x: Vec<Vec<Vector>> = init.to_vec();
    let npairs = levels * (levels - 1) / 2;
    let mut sup = vec![0.0f64; npairs];
    let mut trace: Option<Vec<Vec<f64>>> = cfg.keep_traces.then(|| vec![Vec::new(); levels]);
    let mut safe = true;
    for k in 0..=cfg.horizon {
        let y: Vec<Vec<Vector>> = (0..levels)
            .map(|l| (0..n).map(|i| chain.levels[l].net.subsystems[i].output(&x[l][i])).collect())
            .collect();
        let mut p = 0;
        for a in 0..levels {
            for b in a + 1..levels {
                let d = (0..n).map(|i| (&y[a][i] - &y[b][i]).norm()).fold(0.0, f64::max);
                sup[p] = sup[p].max(d);
                p += 1;
            }
        }
        if let Some(t) = trace.as_mut() {
            for l in 0..levels {
                t[l].extend(y[l].iter().flat_map(|v| v.iter().cloned()));
            }
        }
        if let Some((lo, hi)) = cfg.safe_box {
            if y[0].iter().flat_map(|v| v.iter()).any(|&v| v < lo || v > hi) {
                safe = false;
            }
        }
        if k == cfg.horizon {
            break;
        }
        let w: Vec<Vec<Vector>> = (0..levels).map(|l| (0..n).map(|i| chain.levels[l].net.internal_input(i, &y[l])).collect()).collect();
        let mut nu: Vec<Vec<Vector>> = vec![vec![Vector::zeros(0); n]; levels];
        for i in 0..n {
            nu[levels - 1][i] = match &chain.top {
                TopPolicy::Constant(v) => v[i].clone(),
                TopPolicy::Grid(c) => c[i].abstract_input(k, &x[levels - 1][i])?,
            };
            for l in (0..levels - 1).rev() {
                let link = &chain.links[l][i];
                nu[l][i] = refine_input(&link.spsf, link.mode, &x[l][i], &x[l + 1][i], &nu[l + 1][i], &w[l + 1][i])?;
            }
        }
        let zeta = draw_step(&mut rng, k, dims, &mut checksum);
        for l in 0..levels {
            for i in 0..n {
                let s = &chain.levels[l].net.subsystems[i];
                let mut next = step(s, &x[l][i], &nu[l][i], &w[l][i], &zeta[i])?;
                if let Some(g) = &chain.levels[l].grids {
                    next = g[i].lattice_quantize(&next);
                }
                x[l][i] = next;
            }
        }
    }
    Ok(RunResult { sup, trace, safe, checksum })
}

/// Simulate all levels of `chain` with identical noise draws.
pub fn coupled_simulate(chain: &Chain, init: &[Vec<Vector>], cfg: &SimConfig) -> Result<TrajectoryBundle> {
    let dims = check_chain(chain, init)?;
    let levels = chain.levels.len();
    let results: Vec<RunResult> = (0..cfg.runs).into_par_iter().map(|r| run_one(chain, cfg, init, &dims, r)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..levels).flat_map(|a| (a + 1..levels).map(move |b| (a, b))).collect();
    let sup_dev = (0..pairs.len()).map(|p| results.iter().map(|r| r.sup[p]).collect()).collect();
    Ok(TrajectoryBundle {
        seed: cfg.seed,
        runs: cfg.runs,
        horizon: cfg.horizon,
        pairs,
        sup_dev,
        traces: cfg.keep_traces.then(|| results.iter().map(|r| r.trace.clone().unwrap_or_default()).collect()),
        safe: cfg.safe_box.map(|_| results.iter().map(|r| r.safe).collect()),
        noise_checksum: results.iter().map(|r| r.checksum).collect(),
    })
}

/// Frequency with a Clopper–Pearson interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    pub hits: usize,
    pub runs: usize,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn clopper_pearson(hits: usize, runs: usize, confidence: f64) -> (f64, f64) {
    if runs == 0 {
        return (0.0, 1.0);
    }
    let a = 1.0 - confidence;
    let (k, n) = (hits as f64, runs as f64);
    let low = if hits == 0 { 0.0 } else { Beta::new(k, n - k + 1.0).map(|b| b.inverse_cdf(a / 2.0)).unwrap_or(0.0) };
    let high = if hits == runs { 1.0 } else { Beta::new(k + 1.0, n - k).map(|b| b.inverse_cdf(1.0 - a / 2.0)).unwrap_or(1.0) };
    (low, high)
}

pub fn frequency(hits: usize, runs: usize) -> Frequency {
    let (ci_low, ci_high) = clopper_pearson(hits, runs, 0.95);
    Frequency { hits, runs, value: if runs == 0 { 0.0 } else { hits as f64 / runs as f64 }, ci_low, ci_high }
}

/// Fraction of runs with `sup_k ‖y_a − y_b‖ ≥ ε` for level pair `(a, b)`.
pub fn empirical_deviation_prob(bundle: &TrajectoryBundle, epsilon: f64, pair: (usize, usize)) -> Result<Frequency> {
    let p = bundle
        .pairs
        .iter()
        .position(|&q| q == pair)
        .ok_or_else(|| Error::Dimension(format!("level pair {pair:?} not simulated")))?;
    let hits = bundle.sup_dev[p].iter().filter(|&&d| d >= epsilon).count();
    Ok(frequency(hits, bundle.runs))
}

/// Fraction of runs whose concrete outputs stayed in the safe box.
pub fn safe_frequency(bundle: &TrajectoryBundle) -> Option<Frequency> {
    bundle.safe.as_ref().map(|s| frequency(s.iter().filter(|&&b| b).count(), s.len()))
}

/// Per-run sup deviations, one column per level pair.
pub fn bundle_csv(bundle: &TrajectoryBundle) -> String {
    let mut s = String::from("run");
    for (a, b) in &bundle.pairs {
        s.push_str(&format!(",sup_dev_{a}_{b}"));
    }
    s.push('\n');
    for r in 0..bundle.runs {
        s.push_str(&r.to_string());
        for col in &bundle.sup_dev {
            s.push_str(&format!(",{:.16e}", col[r]));
        }
        s.push('\n');
    }
    s
}

/// State pair and inputs at which the decrease inequality is tested.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsfSample {
    pub x: Vector,
    pub x_hat: Vector,
    pub nu_hat: Vector,
    pub w: Vector,
    pub w_hat: Vector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expectation {
    /// Noise cancels in the error (`R = P R̂`): evaluate with zero noise.
    Exact,
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleCheck {
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationReport {
    pub checks: Vec<SampleCheck>,
    pub violations: usize,
    /// Largest `(mean − bound) / max(std_err, tiny)` over samples.
    pub worst_excess: f64,
}

/// Sampled check of `E[S(x⁺, x̂⁺)] ≤ max{κ(S), ρ_int(‖w−ŵ‖), ρ_ext(‖ν̂‖), ψ}`.
///
/// With `quantizer` the abstract successor is re-quantized on the grid
/// lattice, as for finite abstractions.
pub fn validate_spsf_inequality(
    sys: &NonlinearSCS,
    abs_sys: &NonlinearSCS,
    spsf: &QuadSPSF,
    mode: RefineMode,
    quantizer: Option<&Grid>,
    samples: &[SpsfSample],
    expectation: Expectation,
) -> Result<ViolationReport> {
    if sys.r_dim() != abs_sys.r_dim() {
        return Err(Error::Dimension("concrete and abstract systems need the same noise channels".into()));
    }
    if expectation == Expectation::Exact {
        let concrete = &sys.r * Mat::from_diagonal(&sys.noise_std);
        let lifted = &spsf.p * &abs_sys.r * Mat::from_diagonal(&abs_sys.noise_std);
        if quantizer.is_some() || (concrete - lifted).amax() > 0.0 {
            return Err(Error::Precondition("exact expectation needs matched noise and no quantizer".into()));
        }
    }
    let checks: Vec<SampleCheck> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, s)| -> Result<SampleCheck> {
            let nu = refine_input(spsf, mode, &s.x, &s.x_hat, &s.nu_hat, &s.w_hat)?;
            let s0 = spsf::evaluate_spsf(spsf, &s.x, &s.x_hat);
            let bound = spsf::decrease_bound(spsf, s0, (&s.w - &s.w_hat).norm(), s.nu_hat.norm());
            let next = |zeta: &Vector| -> Result<f64> {
                let xp = step(sys, &s.x, &nu, &s.w, zeta)?;
                let mut xh = step(abs_sys, &s.x_hat, &s.nu_hat, &s.w_hat, zeta)?;
                if let Some(g) = quantizer {
                    xh = g.lattice_quantize(&xh);
                }
                Ok(spsf::evaluate_spsf(spsf, &xp, &xh))
            };
            let (mean, std_err) = match expectation {
                Expectation::Exact => (next(&Vector::zeros(sys.r_dim()))?, 0.0),
                Expectation::MonteCarlo { draws, seed } => {
                    let mut rng = noise_rng(seed, idx as u64);
                    let (mut sum, mut sq) = (0.0, 0.0);
                    for _ in 0..draws {
                        let z = Vector::from_iterator(sys.r_dim(), (0..sys.r_dim()).map(|_| normal_from_bits(rng.next_u64())));
                        let v = next(&z)?;
                        sum += v;
                        sq += v * v;
                    }
                    let n = draws.max(1) as f64;
                    let m = sum / n;
                    let var = ((sq / n - m * m) * n / (n - 1.0).max(1.0)).max(0.0);
                    (m, (var / n).sqrt())
                }
            };
            let slack = 3.0 * std_err + 1e-12 * bound.max(1.0);
            Ok(SampleCheck { mean, std_err, bound, violated: mean - bound > slack })
        })
        .collect::<Result<_>>()?;
    let violations = checks.iter().filter(|c| c.violated).count();
    let worst_excess = checks.iter().map(|c| (c.mean - c.bound) / c.std_err.max(1e-300)).fold(f64::NEG_INFINITY, f64::max);
    Ok(ViolationReport { checks, violations, worst_excess })
}
