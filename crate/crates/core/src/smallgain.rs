//! Gain matrices, the max-type cycle condition and network composition.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinf::{self, IdCompare, MaxOf, MinOf, PowerFn, STRICT_TOL};
use crate::linalg::{Mat, Vector};
use crate::spsf::{self, QuadSPSF};
use crate::verdict::Verdict;

/// Largest network for which simple cycles are enumerated by default.
pub const DEFAULT_CYCLE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteExtras {
    pub delta_tilde_f: PowerFn,
    pub bar_lambda: PowerFn,
    /// `mu[j][i] = μ_ji`: quantization radius of the internal input `i` receives from `j`.
    pub mu: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Flavor {
    Infinite,
    Finite(FiniteExtras),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainMatrix {
    pub entries: Vec<Vec<PowerFn>>,
    pub sigmas: Vec<PowerFn>,
    pub flavor: Flavor,
}

impl GainMatrix {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Matrix with the given entries and identity weights.
    pub fn from_entries(entries: Vec<Vec<PowerFn>>) -> Self {
        let n = entries.len();
        GainMatrix { entries, sigmas: vec![PowerFn::identity(); n], flavor: Flavor::Infinite }
    }

    pub fn is_linear(&self) -> bool {
        self.entries.iter().flatten().all(|f| f.is_zero() || f.p == 1.0)
    }
}

/// `adjacency[i][j]`: subsystem `j` feeds an internal input of `i`.
pub fn build_gains(spsfs: &[QuadSPSF], adjacency: &[Vec<bool>], flavor: Flavor) -> Result<GainMatrix> {
    let n = spsfs.len();
    if adjacency.len() != n || adjacency.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("adjacency must be {n}x{n}")));
    }
    let alpha_inv = spsfs.iter().map(|s| s.alpha.inverse()).collect::<Result<Vec<_>>>()?;
    let front = match &flavor {
        Flavor::Infinite => None,
        Flavor::Finite(x) => {
            if x.mu.len() != n || x.mu.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(format!("mu must be {n}x{n}")));
            }
            let (plus, _) = kinf::plus_identity_variants(&x.delta_tilde_f, 1.0)?;
            if !plus.exact {
                return Err(Error::Precondition("delta_tilde_f must be linear".into()));
            }
            Some((plus.f, x.bar_lambda))
        }
    };
    let mut entries = vec![vec![PowerFn::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            entries[i][j] = if i == j {
                spsfs[i].kappa
            } else if !adjacency[i][j] || spsfs[i].rho_int.is_zero() {
                PowerFn::zero()
            } else {
                match front {
                    None => spsfs[i].rho_int.compose(&alpha_inv[j]),
                    Some((plus, lam)) => plus.compose(&spsfs[i].rho_int).compose(&lam).compose(&alpha_inv[j]),
                }
            };
        }
    }
    Ok(GainMatrix { entries, sigmas: vec![PowerFn::identity(); n], flavor })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: Vec<usize>,
    pub composed: PowerFn,
    pub compare: IdCompare,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    pub verdict: Verdict,
    /// Worst cycle when the condition is not strictly satisfied.
    pub witness: Option<CycleRecord>,
    /// All enumerated cycles; empty when the max-cycle-mean reduction was used.
    pub cycles: Vec<CycleRecord>,
    pub method: &'static str,
}

fn compare_rank(c: IdCompare) -> u8 {
    match c {
        IdCompare::Below => 0,
        IdCompare::Boundary => 1,
        IdCompare::NotBelow => 2,
    }
}

fn verdict_of(c: IdCompare) -> Verdict {
    match c {
        IdCompare::Below => Verdict::Satisfied,
        IdCompare::Boundary => Verdict::Boundary,
        IdCompare::NotBelow => Verdict::Violated,
    }
}

/// `κ_{i₁i₂}∘κ_{i₂i₃}∘⋯∘κ_{i_r i₁}`.
pub fn compose_cycle(entries: &[Vec<PowerFn>], cycle: &[usize]) -> PowerFn {
    let r = cycle.len();
    let mut f = PowerFn::identity();
    for k in 0..r {
        f = f.compose(&entries[cycle[k]][cycle[(k + 1) % r]]);
    }
    f
}

/// Simple cycles with nonzero gains, each listed once starting at its smallest vertex.
pub fn enumerate_cycles(entries: &[Vec<PowerFn>]) -> Vec<Vec<usize>> {
    let n = entries.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|start| {
            let mut out = Vec::new();
            let mut path = vec![start];
            let mut on = vec![false; n];
            on[start] = true;
            dfs(entries, start, &mut path, &mut on, &mut out);
            out
        })
        .collect()
}

fn dfs(entries: &[Vec<PowerFn>], start: usize, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
    let last = *path.last().unwrap();
    for next in start..entries.len() {
        if entries[last][next].is_zero() {
            continue;
        }
        if next == start {
            out.push(path.clone());
        } else if !on[next] {
            on[next] = true;
            path.push(next);
            dfs(entries, start, path, on, out);
            path.pop();
            on[next] = false;
        }
    }
}

/// Decide whether every cycle composition lies strictly below the identity.
///
/// Up to `cap` subsystems all simple cycles are enumerated. Larger networks
/// with linear gains use the maximum cycle mean of the log-coefficients
/// (the max-times spectral radius), which is below one exactly when every
/// cycle product is.
pub fn verify_cycle_condition(g: &GainMatrix, strict_tol: f64, cap: usize) -> CycleReport {
    if g.len() > cap && g.is_linear() {
        return max_cycle_mean(g, strict_tol);
    }
    let cycles: Vec<CycleRecord> = enumerate_cycles(&g.entries)
        .into_iter()
        .map(|cycle| {
            let composed = compose_cycle(&g.entries, &cycle);
            let compare = composed.less_than_identity(strict_tol);
            CycleRecord { cycle, composed, compare }
        })
        .collect();
    let witness = cycles
        .iter()
        .filter(|c| c.compare != IdCompare::Below)
        .max_by(|a, b| {
            compare_rank(a.compare)
                .cmp(&compare_rank(b.compare))
                .then(a.composed.c.partial_cmp(&b.composed.c).unwrap_or(std::cmp::Ordering::Equal))
                .then(b.cycle.len().cmp(&a.cycle.len()))
        })
        .cloned();
    let verdict = witness.as_ref().map_or(Verdict::Satisfied, |w| verdict_of(w.compare));
    CycleReport { verdict, witness, cycles, method: "enumeration" }
}

/// Maximum cycle mean of the log-coefficients and a cycle attaining it (Karp).
fn karp(g: &GainMatrix) -> Option<(f64, Vec<usize>)> {
    let n = g.len();
    let w = |i: usize, j: usize| {
        let c = g.entries[i][j].c;
        if c > 0.0 {
            c.ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    // walks of exact length k from a virtual source
    let mut d = vec![vec![f64::NEG_INFINITY; n]; n + 1];
    let mut parent = vec![vec![usize::MAX; n]; n + 1];
    d[0].iter_mut().for_each(|v| *v = 0.0);
    for k in 1..=n {
        for v in 0..n {
            for u in 0..n {
                let cand = d[k - 1][u] + w(u, v);
                if cand > d[k][v] {
                    d[k][v] = cand;
                    parent[k][v] = u;
                }
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for v in 0..n {
        if d[n][v] == f64::NEG_INFINITY {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| d[k][v] > f64::NEG_INFINITY)
            .map(|k| (d[n][v] - d[k][v]) / (n - k) as f64)
            .fold(f64::INFINITY, f64::min);
        if worst > best.0 {
            best = (worst, v);
        }
    }
    if best.1 == usize::MAX {
        return None;
    }
    // the optimal walk to the maximizing vertex contains a critical cycle
    let mut walk = vec![best.1];
    let mut v = best.1;
    for k in (1..=n).rev() {
        v = parent[k][v];
        walk.push(v);
    }
    walk.reverse();
    let mut seen = vec![usize::MAX; n];
    for (pos, &u) in walk.iter().enumerate() {
        if seen[u] != usize::MAX {
            let mut cycle = walk[seen[u]..pos].to_vec();
            let m = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
            cycle.rotate_left(m);
            return Some((best.0, cycle));
        }
        seen[u] = pos;
    }
    unreachable!("a walk of n edges revisits a vertex")
}

fn max_cycle_mean(g: &GainMatrix, strict_tol: f64) -> CycleReport {
    let Some((mean, cycle)) = karp(g) else {
        return CycleReport { verdict: Verdict::Satisfied, witness: None, cycles: vec![], method: "max-cycle-mean" };
    };
    let gamma = mean.exp();
    let compare = if gamma < 1.0 - strict_tol {
        IdCompare::Below
    } else if gamma <= 1.0 + strict_tol {
        IdCompare::Boundary
    } else {
        IdCompare::NotBelow
    };
    let composed = compose_cycle(&g.entries, &cycle);
    let witness = (compare != IdCompare::Below).then(|| CycleRecord { cycle, composed, compare });
    CycleReport { verdict: verdict_of(compare), witness, cycles: vec![], method: "max-cycle-mean" }
}

/// Conjugate entries to `σ_i⁻¹∘κ_ij∘σ_j` and check that all of them lie below the identity.
pub fn apply_sigmas(g: &GainMatrix, sigmas: &[PowerFn]) -> Result<(GainMatrix, Verdict)> {
    let n = g.len();
    if sigmas.len() != n {
        return Err(Error::Dimension(format!("{} weights for {n} subsystems", sigmas.len())));
    }
    let mut inv = Vec::with_capacity(n);
    for (index, s) in sigmas.iter().enumerate() {
        let si = s.inverse()?;
        if si.p > 1.0 {
            return Err(Error::NotConcave { index, p: s.p });
        }
        inv.push(si);
    }
    let mut out = g.clone();
    let mut verdict = Verdict::Satisfied;
    for i in 0..n {
        for j in 0..n {
            let e = inv[i].compose(&g.entries[i][j]).compose(&sigmas[j]);
            verdict = verdict.worst(verdict_of(e.less_than_identity(STRICT_TOL)));
            out.entries[i][j] = e;
        }
    }
    out.sigmas = sigmas.to_vec();
    Ok((out, verdict))
}

/// Linear weights `σ_i(s) = v_i s` making every conjugated entry strictly contractive.
///
/// With `γ` the largest cycle gain and `γ < γ' < 1`, `v` is the max-times
/// closure of `C/γ'` applied to the ones vector, so `C_ij v_j ≤ γ' v_i`.
pub fn find_linear_sigmas(g: &GainMatrix) -> Option<Vec<PowerFn>> {
    if !g.is_linear() {
        return None;
    }
    let rep = verify_cycle_condition(g, STRICT_TOL, 0);
    if rep.verdict != Verdict::Satisfied {
        return None;
    }
    let n = g.len();
    let gamma = cycle_gain(g);
    let target = 0.5 * (gamma.max(0.0) + 1.0);
    let mut star = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            star[i][j] = g.entries[i][j].c / target;
        }
        star[i][i] = star[i][i].max(1.0);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let v = star[i][k] * star[k][j];
                if v > star[i][j] {
                    star[i][j] = v;
                }
            }
        }
    }
    Some(star.iter().map(|r| PowerFn::linear(r.iter().cloned().fold(0.0, f64::max))).collect())
}

fn cycle_gain(g: &GainMatrix) -> f64 {
    karp(g).map_or(0.0, |(mean, _)| mean.exp())
}

/// Network-level simulation function `V = max_i σ_i⁻¹(S_i)` with its gains.
#[derive(Clone, Debug, PartialEq)]
pub struct SsfDescriptor {
    pub blocks: Vec<(Mat, Mat)>,
    pub sigmas: Vec<PowerFn>,
    pub alpha: MinOf,
    pub kappa: MaxOf,
    pub rho_ext: MaxOf,
    pub psi: f64,
    pub cycle_verdict: Verdict,
    pub caveat: Option<String>,
}

impl SsfDescriptor {
    /// Single power-form `κ` when all entries are linear.
    pub fn kappa_power(&self) -> Option<PowerFn> {
        self.kappa.as_power()
    }

    /// `κ̂` with `κ(s) ≤ (1−κ̂)s`, when `κ` is linear.
    pub fn kappa_hat(&self) -> Option<f64> {
        self.kappa.as_power().filter(|k| k.is_zero() || k.p == 1.0).map(|k| 1.0 - k.c)
    }
}

pub fn compose_ssf(spsfs: &[QuadSPSF], g: &GainMatrix, allow_boundary: bool) -> Result<SsfDescriptor> {
    let n = spsfs.len();
    if g.len() != n {
        return Err(Error::Dimension(format!("gain matrix has {} rows for {n} subsystems", g.len())));
    }
    let (conj, entry_verdict) = apply_sigmas(g, &g.sigmas)?;
    let cycles = verify_cycle_condition(g, STRICT_TOL, DEFAULT_CYCLE_CAP);
    let verdict = cycles.verdict.worst(entry_verdict);
    let caveat = match verdict {
        Verdict::Satisfied => None,
        Verdict::Boundary if allow_boundary => Some(format!(
            "small-gain condition holds only up to tolerance{}",
            cycles.witness.as_ref().map(|w| format!(" (cycle {:?} composes to {})", w.cycle, w.composed)).unwrap_or_default()
        )),
        _ => {
            return Err(Error::Unverified(format!(
                "small-gain condition {verdict}{}",
                cycles.witness.as_ref().map(|w| format!(" on cycle {:?}: {}", w.cycle, w.composed)).unwrap_or_default()
            )))
        }
    };
    let inv: Vec<PowerFn> = g.sigmas.iter().map(|s| s.inverse()).collect::<Result<_>>()?;
    let alpha = MinOf(spsfs.iter().zip(&inv).map(|(s, si)| si.compose(&s.alpha)).collect());
    let kappa = MaxOf(conj.entries.iter().flatten().cloned().collect());
    let rho_ext = MaxOf(spsfs.iter().zip(&inv).map(|(s, si)| si.compose(&s.rho_ext)).collect());
    let lambdas: Vec<f64> = match &g.flavor {
        Flavor::Infinite => spsfs.iter().map(|s| s.psi).collect(),
        Flavor::Finite(x) => {
            let (_, plus_inv) = kinf::plus_identity_variants(&x.delta_tilde_f, 1.0)?;
            let lam_chain = x.bar_lambda.compose(&kinf::minus_identity_inverse(&x.bar_lambda)?);
            (0..n)
                .map(|i| {
                    let mu = (0..n).filter(|&j| j != i).map(|j| x.mu[j][i]).fold(0.0, f64::max);
                    if mu == 0.0 {
                        // ρ ≤ (Id+δ̃_f)∘ρ∘λ̄ already covers the cross terms without quantized inputs
                        spsfs[i].psi
                    } else {
                        plus_inv.f.eval(spsfs[i].rho_int.eval(lam_chain.eval(mu)) + spsfs[i].psi)
                    }
                })
                .collect()
        }
    };
    let psi = lambdas.iter().zip(&inv).map(|(l, si)| si.eval(*l)).fold(0.0, f64::max);
    Ok(SsfDescriptor {
        blocks: spsfs.iter().map(|s| (s.m.clone(), s.p.clone())).collect(),
        sigmas: g.sigmas.clone(),
        alpha,
        kappa,
        rho_ext,
        psi,
        cycle_verdict: verdict,
        caveat,
    })
}

/// `max_i σ_i⁻¹(S_i(x_i, x̂_i))`.
pub fn evaluate_ssf(desc: &SsfDescriptor, xs: &[Vector], x_hats: &[Vector]) -> Result<f64> {
    if xs.len() != desc.blocks.len() || x_hats.len() != desc.blocks.len() {
        return Err(Error::Dimension("state blocks differ from subsystem count".into()));
    }
    let mut v: f64 = 0.0;
    for (((m, p), sigma), (x, xh)) in desc.blocks.iter().zip(&desc.sigmas).zip(xs.iter().zip(x_hats)) {
        if x.len() != m.nrows() || xh.len() != p.ncols() {
            return Err(Error::Dimension("block dimension mismatch".into()));
        }
        v = v.max(sigma.inverse()?.eval(spsf::quad_form(m, p, x, xh)));
    }
    Ok(v)
}

/// CSV rows `cycle,coefficient,exponent,verdict`.
pub fn cycle_report_csv(rep: &CycleReport) -> String {
    let mut out = String::from("cycle,coefficient,exponent,verdict\n");
    for c in &rep.cycles {
        let path: Vec<String> = c.cycle.iter().map(|v| (v + 1).to_string()).collect();
        out.push_str(&format!("{},{:.17e},{},{}\n", path.join("-"), c.composed.c, c.composed.p, verdict_of(c.compare)));
    }
    out
}
