//! Scenario files: TOML documents describing a network, optional
//! reduced-order stage, finite abstraction, objective and simulation.
//!
//! ```toml
//! name = "rooms_desk"
//!
//! [network]
//! generator = "room_ring"      # room_ring | consensus | explicit
//! size = 3
//! noise_std = 0.21
//!
//! [certificate]                # finite-abstraction certificate, shared by all subsystems
//! m = [[1.0]]
//! k = [[0.0]]
//! kappa_hat = 0.48
//! pi = 1.0
//! pi_tilde = 0.99
//! delta_tilde = 2.0
//!
//! [abstraction]
//! lower = [19.0]
//! upper = [21.0]
//! cells = [200]
//! input_lower = [0.0]
//! input_upper = [0.6]
//! input_cells = [15]
//!
//! [objective]
//! horizon = 20
//! epsilons = [0.25, 0.5, 1.0]
//! safe_lower = 19.0
//! safe_upper = 21.0
//! synth_lower = 19.25
//! synth_upper = 20.75
//! initial = [20.0]
//!
//! [simulation]
//! runs = 10000
//! seed = 2024
//! ```
//!
//! Explicit networks list `[[network.subsystem]]` tables with matrices
//! `a, b, c, d, r` (row-major nested arrays), optional `noise_std`,
//! `offset`, `bilinear`, `input_lower`/`input_upper`, a `nonlinearity`
//! table `{ e, f, phi, slope_a, slope_b }` and `sources`, the 1-based
//! subsystems whose full outputs feed the internal input in order.
//!
//! A `[reduction]` table inserts an infinite reduced-order stage between
//! the concrete network and the finite abstraction. `generator =
//! "consensus_scalar"` builds the scalar aggregation of the consensus
//! network; `generator = "explicit"` takes the reduced matrices `a, b, c,
//! d, r` (plus an optional `nonlinearity`) and the certificate matrices
//! `m, p, k, q, s, l1, l2` and optional `r_tilde`.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::cases::{self, QChoice};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{InputSlice, Interconnection, NonlinTerm, NonlinearSCS, OutputBlock, OutputPartition, Phi};
use crate::spsf::{ReducedCertificate, Tuning};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkSpec,
    pub reduction: Option<ReductionSpec>,
    pub certificate: CertificateSpec,
    pub abstraction: AbstractionSpec,
    pub objective: ObjectiveSpec,
    pub simulation: Option<SimulationSpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub generator: String,
    pub size: Option<usize>,
    pub noise_std: Option<f64>,
    pub block_dim: Option<usize>,
    pub tau: Option<f64>,
    #[serde(default)]
    pub subsystem: Vec<SubsystemSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinSpec {
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub phi: String,
    pub slope_a: f64,
    pub slope_b: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    pub d: Option<Rows>,
    pub r: Rows,
    pub noise_std: Option<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    pub bilinear: Option<Vec<Rows>>,
    pub input_lower: Option<Vec<f64>>,
    pub input_upper: Option<Vec<f64>>,
    pub nonlinearity: Option<NonlinSpec>,
    #[serde(default)]
    pub sources: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    pub generator: String,
    pub q: Option<String>,
    pub kappa_hat: f64,
    pub pi: f64,
    pub pi_tilde: f64,
    pub delta_tilde: f64,
    pub epsilons: Option<Vec<f64>>,
    pub a: Option<Rows>,
    pub b: Option<Rows>,
    pub c: Option<Rows>,
    pub d: Option<Rows>,
    pub r: Option<Rows>,
    pub nonlinearity: Option<NonlinSpec>,
    pub m: Option<Rows>,
    pub p: Option<Rows>,
    pub k: Option<Rows>,
    pub qm: Option<Rows>,
    pub s: Option<Rows>,
    pub l1: Option<Vec<f64>>,
    pub l2: Option<Vec<f64>>,
    pub r_tilde: Option<Rows>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub m: Rows,
    pub k: Rows,
    pub kappa_hat: f64,
    pub pi: f64,
    pub pi_tilde: f64,
    pub delta_tilde: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
    pub input_lower: Option<Vec<f64>>,
    pub input_upper: Option<Vec<f64>>,
    pub input_cells: Option<Vec<usize>>,
    /// Coarsening of internal-input grids relative to neighbour state grids.
    pub internal_coarsen: Option<usize>,
    /// Write the full transition tensor (can be very large).
    #[serde(default)]
    pub export_tensor: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub horizon: usize,
    pub epsilons: Vec<f64>,
    pub safe_lower: Option<f64>,
    pub safe_upper: Option<f64>,
    pub synth_lower: Option<f64>,
    pub synth_upper: Option<f64>,
    /// Initial state of every concrete subsystem.
    pub initial: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub runs: usize,
    pub seed: u64,
    /// Constant top-level input when no controller is synthesized.
    pub input: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sizes: Option<Vec<usize>>,
    pub epsilons: Option<Vec<f64>>,
    pub deltas: Option<Vec<f64>>,
}

/// Parsed scenario with the source text kept for line-anchored messages.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub scenario: Scenario,
    pub text: String,
}

/// Line (1-based) of `key = ...` inside table `table` (`""` for the root).
pub fn line_of(text: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table && table_line.is_none() {
                table_line = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    table_line
}

impl Loaded {
    pub fn parse(text: &str) -> Result<Loaded> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        let loaded = Loaded { scenario, text: text.to_string() };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn from_file(path: &Path) -> Result<Loaded> {
        Loaded::parse(&std::fs::read_to_string(path)?)
    }

    /// Schema error anchored at `table.key`.
    pub fn err(&self, table: &str, key: &str, msg: impl std::fmt::Display) -> Error {
        let at = line_of(&self.text, table, key).map(|l| format!("line {l}: ")).unwrap_or_default();
        let path = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
        Error::Scenario(format!("{at}{path}: {msg}"))
    }

    fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let a = &s.abstraction;
        if a.lower.len() != a.upper.len() || a.lower.len() != a.cells.len() {
            return Err(self.err("abstraction", "cells", "lower, upper and cells must have equal length"));
        }
        if a.lower.iter().zip(&a.upper).any(|(l, u)| !(l < u)) {
            return Err(self.err("abstraction", "upper", "upper bounds must exceed lower bounds"));
        }
        let input = [a.input_lower.is_some(), a.input_upper.is_some(), a.input_cells.is_some()];
        if input.iter().any(|&b| b) && !input.iter().all(|&b| b) {
            return Err(self.err("abstraction", "input_cells", "input_lower, input_upper and input_cells go together"));
        }
        if s.objective.horizon == 0 {
            return Err(self.err("objective", "horizon", "must be positive"));
        }
        if s.objective.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(self.err("objective", "epsilons", "radii must be positive"));
        }
        if s.objective.safe_lower.is_some() != s.objective.safe_upper.is_some() {
            return Err(self.err("objective", "safe_upper", "safe_lower and safe_upper go together"));
        }
        if let Some(sim) = &s.simulation {
            if sim.runs == 0 {
                return Err(self.err("simulation", "runs", "must be positive"));
            }
        }
        // Build everything once so dimension errors surface before any computation.
        let plan = self.plan()?;
        let top = plan.top();
        for (i, sys) in top.subsystems.iter().enumerate() {
            if sys.n() != a.lower.len() {
                return Err(self.err("abstraction", "lower", format!("subsystem {} has {} states, grid has {}", i + 1, sys.n(), a.lower.len())));
            }
            if let Some(il) = &a.input_lower {
                if il.len() != sys.m() {
                    return Err(self.err("abstraction", "input_lower", format!("subsystem {} has {} inputs", i + 1, sys.m())));
                }
            }
            if plan.finite_m.nrows() != sys.n() || plan.finite_m.ncols() != sys.n() {
                return Err(self.err("certificate", "m", format!("must be {0}x{0}", sys.n())));
            }
            if plan.finite_k.nrows() != sys.m() || plan.finite_k.ncols() != sys.n() {
                return Err(self.err("certificate", "k", format!("must be {}x{}", sys.m(), sys.n())));
            }
        }
        for (i, sys) in plan.concrete.subsystems.iter().enumerate() {
            if s.objective.initial.len() != sys.n() {
                return Err(self.err("objective", "initial", format!("subsystem {} has {} states", i + 1, sys.n())));
            }
        }
        if let (Some(sim), None) = (&s.simulation, &a.input_lower) {
            match &sim.input {
                Some(u) if top.subsystems.iter().all(|t| t.m() == u.len()) => {}
                _ => return Err(self.err("simulation", "input", "a constant input of the top-level input dimension is required without an input grid")),
            }
        }
        Ok(())
    }

    pub fn tuning(&self) -> Result<Tuning> {
        let c = &self.scenario.certificate;
        Tuning::new(c.pi, c.pi_tilde, c.delta_tilde).map_err(|e| self.err("certificate", "pi_tilde", e))
    }

    /// Networks and certificates described by the scenario, with the network
    /// size overridden by `size` when given.
    pub fn plan_sized(&self, size: Option<usize>) -> Result<Plan> {
        let s = &self.scenario;
        let net = &s.network;
        let n_sub = size.or(net.size);
        let concrete = match net.generator.as_str() {
            "room_ring" => {
                let k = n_sub.ok_or_else(|| self.err("network", "size", "required by room_ring"))?;
                if k == 0 {
                    return Err(self.err("network", "size", "must be positive"));
                }
                cases::room_ring(k, net.noise_std.unwrap_or(0.21)).map_err(|e| self.err("network", "generator", e))?
            }
            "consensus" => {
                let k = n_sub.ok_or_else(|| self.err("network", "size", "required by consensus"))?;
                if k < 2 {
                    return Err(self.err("network", "size", "consensus needs at least 2 subsystems"));
                }
                let ni = net.block_dim.ok_or_else(|| self.err("network", "block_dim", "required by consensus"))?;
                cases::consensus_network(k, ni, net.tau.unwrap_or(cases::CONSENSUS_TAU), net.noise_std.unwrap_or(1.0))
                    .map_err(|e| self.err("network", "generator", e))?
            }
            "explicit" => self.explicit_network()?,
            other => return Err(self.err("network", "generator", format!("unknown generator `{other}`"))),
        };
        let v = crate::model::validate_interconnection(&concrete);
        if !v.pass {
            return Err(self.err("network", "generator", format!("interconnection invalid: {}", v.issues.join("; "))));
        }
        let reduced = match &s.reduction {
            None => None,
            Some(r) => Some(self.reduction(r, &concrete)?),
        };
        let c = &s.certificate;
        Ok(Plan {
            concrete,
            reduced,
            finite_m: matrix(&c.m).map_err(|e| self.err("certificate", "m", e))?,
            finite_k: matrix(&c.k).map_err(|e| self.err("certificate", "k", e))?,
            finite_kappa_hat: c.kappa_hat,
            finite_tuning: self.tuning()?,
        })
    }

    pub fn plan(&self) -> Result<Plan> {
        self.plan_sized(None)
    }

    fn explicit_network(&self) -> Result<Interconnection> {
        let specs = &self.scenario.network.subsystem;
        if specs.is_empty() {
            return Err(self.err("network", "generator", "explicit networks need [[network.subsystem]] tables"));
        }
        let k = specs.len();
        let mut subsystems = Vec::with_capacity(k);
        for (i, sp) in specs.iter().enumerate() {
            let tag = |e: Error| self.err("network.subsystem", "a", format!("subsystem {}: {e}", i + 1));
            for &src in &sp.sources {
                if src == 0 || src > k || src == i + 1 {
                    return Err(self.err("network.subsystem", "sources", format!("subsystem {}: invalid source {src}", i + 1)));
                }
            }
            subsystems.push(subsystem(sp).map_err(tag)?);
        }
        let mut partitions: Vec<OutputPartition> =
            subsystems.iter().map(|s| OutputPartition { blocks: vec![], external: 0..s.q() }).collect();
        let mut inputs = Vec::with_capacity(k);
        for (i, sp) in specs.iter().enumerate() {
            let mut slices = Vec::new();
            for &src in &sp.sources {
                let j = src - 1;
                partitions[j].blocks.push(OutputBlock { target: i, rows: 0..subsystems[j].q() });
                slices.push(InputSlice { source: j, width: subsystems[j].q() });
            }
            let width: usize = slices.iter().map(|s| s.width).sum();
            if width != subsystems[i].p() {
                return Err(self.err(
                    "network.subsystem",
                    "sources",
                    format!("subsystem {}: sources provide {width} internal inputs, D has {} columns", i + 1, subsystems[i].p()),
                ));
            }
            inputs.push(slices);
        }
        Ok(Interconnection { subsystems, partitions, inputs })
    }

    fn reduction(&self, r: &ReductionSpec, concrete: &Interconnection) -> Result<(Interconnection, Vec<ReducedCertificate>)> {
        let k = concrete.len();
        match r.generator.as_str() {
            "consensus_scalar" => {
                let net = &self.scenario.network;
                if net.generator != "consensus" {
                    return Err(self.err("reduction", "generator", "consensus_scalar needs a consensus network"));
                }
                let ni = net.block_dim.unwrap_or(5);
                let q = match r.q.as_deref().unwrap_or("exact") {
                    "exact" => QChoice::Exact,
                    "published" => QChoice::Published,
                    other => return Err(self.err("reduction", "q", format!("expected exact or published, got `{other}`"))),
                };
                let tau = net.tau.unwrap_or(cases::CONSENSUS_TAU);
                let red = cases::reduced_network(k, ni, net.noise_std.unwrap_or(1.0)).map_err(|e| self.err("reduction", "generator", e))?;
                let cert = cases::consensus_certificate(k, ni, tau, q);
                Ok((red, vec![cert; k]))
            }
            "explicit" => {
                let need = |m: &Option<Rows>, key: &str| -> Result<Mat> {
                    let rows = m.as_ref().ok_or_else(|| self.err("reduction", key, "required for explicit reductions"))?;
                    matrix(rows).map_err(|e| self.err("reduction", key, e))
                };
                let mut subs = Vec::with_capacity(k);
                for i in 0..k {
                    let mut s = NonlinearSCS::linear(need(&r.a, "a")?, need(&r.b, "b")?, need(&r.c, "c")?, need(&r.d, "d")?, need(&r.r, "r")?)
                        .map_err(|e| self.err("reduction", "a", e))?;
                    s.noise_std = concrete.subsystems[i].noise_std.clone();
                    if let Some(nl) = &r.nonlinearity {
                        s = s.with_term(nonlin(nl)?).map_err(|e| self.err("reduction", "nonlinearity", e))?;
                    }
                    subs.push(s);
                }
                let red = Interconnection {
                    subsystems: subs,
                    partitions: concrete.partitions.clone(),
                    inputs: concrete
                        .inputs
                        .iter()
                        .map(|sl| sl.iter().map(|x| InputSlice { source: x.source, width: 0 }).collect())
                        .collect(),
                };
                let red = fix_widths(red);
                let vec_of = |v: &Option<Vec<f64>>, key: &str| -> Result<Vector> {
                    v.as_ref().map(|x| Vector::from_vec(x.clone())).ok_or_else(|| self.err("reduction", key, "required for explicit reductions"))
                };
                let p = need(&r.p, "p")?;
                let r_tilde = match &r.r_tilde {
                    Some(m) => matrix(m).map_err(|e| self.err("reduction", "r_tilde", e))?,
                    None => crate::spsf::optimal_r_tilde(&concrete.subsystems[0].b, &need(&r.m, "m")?, &p, &red.subsystems[0].b)
                        .map_err(|e| self.err("reduction", "r_tilde", e))?,
                };
                let cert = ReducedCertificate {
                    m: need(&r.m, "m")?,
                    p,
                    k: need(&r.k, "k")?,
                    q: need(&r.qm, "qm")?,
                    s: need(&r.s, "s")?,
                    l1: vec_of(&r.l1, "l1")?,
                    l2: vec_of(&r.l2, "l2")?,
                    r_tilde,
                };
                Ok((red, vec![cert; k]))
            }
            other => Err(self.err("reduction", "generator", format!("unknown generator `{other}`"))),
        }
    }

    pub fn reduction_tuning(&self) -> Result<Option<(f64, Tuning)>> {
        match &self.scenario.reduction {
            None => Ok(None),
            Some(r) => {
                let t = Tuning::new(r.pi, r.pi_tilde, r.delta_tilde).map_err(|e| self.err("reduction", "pi_tilde", e))?;
                Ok(Some((r.kappa_hat, t)))
            }
        }
    }
}

/// Reduced slices take the width of the reduced source output and the
/// partitions are rebuilt accordingly.
fn fix_widths(mut net: Interconnection) -> Interconnection {
    let q: Vec<usize> = net.subsystems.iter().map(|s| s.q()).collect();
    for slices in &mut net.inputs {
        for s in slices.iter_mut() {
            s.width = q[s.source];
        }
    }
    for (j, part) in net.partitions.iter_mut().enumerate() {
        part.external = 0..q[j];
        for b in &mut part.blocks {
            b.rows = 0..q[j];
        }
    }
    net
}

/// Everything needed downstream of parsing.
#[derive(Clone, Debug)]
pub struct Plan {
    pub concrete: Interconnection,
    pub reduced: Option<(Interconnection, Vec<ReducedCertificate>)>,
    pub finite_m: Mat,
    pub finite_k: Mat,
    pub finite_kappa_hat: f64,
    pub finite_tuning: Tuning,
}

impl Plan {
    /// Continuous network that gets gridded.
    pub fn top(&self) -> &Interconnection {
        self.reduced.as_ref().map_or(&self.concrete, |(n, _)| n)
    }
}

pub fn matrix(rows: &Rows) -> std::result::Result<Mat, String> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err("rows have different lengths".into());
    }
    Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn nonlin(nl: &NonlinSpec) -> Result<NonlinTerm> {
    let phi = Phi::from_name(&nl.phi)?;
    Ok(NonlinTerm::new(Vector::from_vec(nl.e.clone()), Vector::from_vec(nl.f.clone()), phi, nl.slope_a, nl.slope_b))
}

fn subsystem(sp: &SubsystemSpec) -> Result<NonlinearSCS> {
    let m = |r: &Rows, name: &str| matrix(r).map_err(|e| Error::Dimension(format!("{name}: {e}")));
    let a = m(&sp.a, "a")?;
    let d = match &sp.d {
        Some(d) => m(d, "d")?,
        None => Mat::zeros(a.nrows(), 0),
    };
    let mut s = NonlinearSCS::linear(a, m(&sp.b, "b")?, m(&sp.c, "c")?, d, m(&sp.r, "r")?)?;
    if let Some(v) = &sp.noise_std {
        s.noise_std = Vector::from_vec(v.clone());
    }
    if let Some(v) = &sp.offset {
        s.offset = Vector::from_vec(v.clone());
    }
    if let Some(b) = &sp.bilinear {
        s.bilinear = b.iter().map(|r| m(r, "bilinear")).collect::<Result<_>>()?;
    }
    if let (Some(lo), Some(hi)) = (&sp.input_lower, &sp.input_upper) {
        s.input_box = Some((Vector::from_vec(lo.clone()), Vector::from_vec(hi.clone())));
    }
    if let Some(nl) = &sp.nonlinearity {
        s = s.with_term(nonlin(nl)?)?;
    }
    s.validate()?;
    Ok(s)
}

/// Named overrides applied before validation, e.g. from the command line.
pub fn apply_overrides(text: &str, overrides: &HashMap<&str, String>) -> String {
    let mut out = String::new();
    let mut table = String::new();
    for line in text.lines() {
        let l = line.trim();
        if l.starts_with('[') {
            table = l.trim_matches(|c| c == '[' || c == ']').to_string();
        }
        let replaced = l.split_once('=').and_then(|(k, _)| overrides.get(format!("{table}.{}", k.trim()).as_str()));
        match replaced {
            Some(v) => out.push_str(&format!("{} = {v}\n", l.split_once('=').unwrap().0.trim())),
            None => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROOMS: &str = r#"
name = "t"
[network]
generator = "room_ring"
size = 3
noise_std = 0.21
[certificate]
m = [[1.0]]
k = [[0.0]]
kappa_hat = 0.48
pi = 1.0
pi_tilde = 0.99
delta_tilde = 2.0
[abstraction]
lower = [19.0]
upper = [21.0]
cells = [200]
[objective]
horizon = 20
epsilons = [0.5]
initial = [20.0]
"#;

    #[test]
    fn parses_generator() {
        let l = Loaded::parse(ROOMS).unwrap();
        assert_eq!(l.plan().unwrap().concrete.len(), 3);
    }

    #[test]
    fn line_anchored_errors() {
        let bad = ROOMS.replace("m = [[1.0]]", "m = [[1.0, 0.0]]");
        let e = Loaded::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("line 8") && e.contains("certificate.m"), "{e}");
        let bad = ROOMS.replace("horizon = 20", "horizon = \"x\"");
        let e = Loaded::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("line 19"), "{e}");
        let bad = ROOMS.replace("size = 3", "size = 3\ncolour = 1");
        assert!(Loaded::parse(&bad).unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn explicit_matches_generator() {
        let text = ROOMS.replace(
            "generator = \"room_ring\"\nsize = 3\nnoise_std = 0.21",
            r#"generator = "explicit"
[[network.subsystem]]
a = [[0.4]]
b = [[25.0]]
c = [[1.0]]
d = [[0.1, 0.1]]
r = [[1.0]]
noise_std = [0.21]
offset = [-0.4]
bilinear = [[[-0.5]]]
input_lower = [0.0]
input_upper = [0.6]
sources = [2, 2]
[[network.subsystem]]
a = [[0.4]]
b = [[25.0]]
c = [[1.0]]
d = [[0.1, 0.1]]
r = [[1.0]]
noise_std = [0.21]
offset = [-0.4]
bilinear = [[[-0.5]]]
input_lower = [0.0]
input_upper = [0.6]
sources = [1, 1]"#,
        );
        let l = Loaded::parse(&text).unwrap();
        let plan = l.plan().unwrap();
        let gen = cases::room_ring(2, 0.21).unwrap();
        assert_eq!(plan.concrete.subsystems, gen.subsystems);
    }

    #[test]
    fn overrides() {
        let mut o = HashMap::new();
        o.insert("network.size", "5".to_string());
        let l = Loaded::parse(&apply_overrides(ROOMS, &o)).unwrap();
        assert_eq!(l.plan().unwrap().concrete.len(), 5);
    }
}
