//! Scenario pipeline: verify certificates, compose, bound, abstract,
//! synthesize, simulate, and write the artifact directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bounds::{self, ClosenessBound, StageBound};
use crate::error::{Error, Result};
use crate::fmdp::{self, FiniteMDP, Grid};
use crate::kinf::{PowerFn, STRICT_TOL};
use crate::linalg::{Mat, Vector};
use crate::model::Interconnection;
use crate::scenario::{Loaded, Plan};
use crate::sim::{self, Chain, Frequency, Level, SimConfig, TopPolicy, TrajectoryBundle};
use crate::smallgain::{self, CycleReport, FiniteExtras, Flavor, GainMatrix, SsfDescriptor, DEFAULT_CYCLE_CAP};
use crate::spsf::{self, MarginReport, QuadSPSF, ResidualReport};
use crate::synth::{self, GridController, InternalMode, Link, Policy, RefineMode};
use crate::verdict::Verdict;

/// Cross-term split used when internal inputs are quantized (`μ > 0`).
pub const DELTA_TILDE_F: f64 = 0.1;
pub const BAR_LAMBDA: f64 = 2.0;
/// Largest internal grid for which an MDP is built.
pub const MAX_INTERNAL_POINTS: usize = 1_000_000;
/// Largest tensor written row by row; bigger MDPs get the kernel export.
pub const MAX_TENSOR_ROWS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Verify,
    Compose,
    Bound,
    Abstract,
    Synthesize,
    Simulate,
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Stage> {
        Ok(match s.trim() {
            "verify" => Stage::Verify,
            "compose" => Stage::Compose,
            "bound" => Stage::Bound,
            "abstract" => Stage::Abstract,
            "synthesize" | "synth" => Stage::Synthesize,
            "simulate" | "sim" => Stage::Simulate,
            other => return Err(Error::Scenario(format!("unknown stage `{other}`"))),
        })
    }
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Verify, Stage::Compose, Stage::Bound, Stage::Abstract, Stage::Synthesize, Stage::Simulate];
}

/// `--stages verify` runs certificate checks and the small-gain analysis.
pub fn parse_stages(list: &str) -> Result<BTreeSet<Stage>> {
    let mut set: BTreeSet<Stage> = list.split(',').filter(|s| !s.trim().is_empty()).map(Stage::from_str).collect::<Result<_>>()?;
    if set.contains(&Stage::Verify) {
        set.insert(Stage::Compose);
    }
    Ok(set)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub stages: BTreeSet<Stage>,
    pub strict: bool,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { stages: Stage::ALL.into_iter().collect(), strict: false, seed: None, runs: None, out: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    Warning,
    Failed,
}

/// Certificates, gains and composition of one abstraction step.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub name: &'static str,
    pub margins: Vec<MarginReport>,
    pub residuals: Vec<ResidualReport>,
    pub spsfs: Vec<QuadSPSF>,
    pub gains: Option<GainMatrix>,
    pub cycles: Option<CycleReport>,
    pub ssf: Option<SsfDescriptor>,
    pub v0: Option<f64>,
    pub bounds: Vec<ClosenessBound>,
}

#[derive(Clone, Debug)]
pub struct SimSummary {
    pub bundle: TrajectoryBundle,
    /// `(pair, epsilon, frequency, delta_hat)`.
    pub rows: Vec<((usize, usize), f64, Frequency, f64)>,
    pub safe: Option<Frequency>,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    pub composed: Vec<StageBound>,
    pub mdps: Vec<FiniteMDP>,
    pub policies: Vec<Policy>,
    /// Safety value of the initial cell per subsystem.
    pub cell_values: Vec<f64>,
    /// Union bound over subsystems.
    pub network_value: Option<f64>,
    pub sim: Option<SimSummary>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
    /// Relative paths of written artifacts, in write order.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn status(&self, strict: bool) -> Status {
        if !self.failures.is_empty() || (strict && !self.warnings.is_empty()) {
            Status::Failed
        } else if !self.warnings.is_empty() {
            Status::Warning
        } else {
            Status::Ok
        }
    }

    /// Final stage, whose bound relates the top continuous model and the finite MDP.
    pub fn finite(&self) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == "finite")
    }
}

fn adjacency(net: &Interconnection) -> Vec<Vec<bool>> {
    let n = net.len();
    let mut adj = vec![vec![false; n]; n];
    for (i, slices) in net.inputs.iter().enumerate() {
        for s in slices {
            adj[i][s.source] = true;
        }
    }
    adj
}

pub fn state_grid(loaded: &Loaded) -> Result<Grid> {
    let a = &loaded.scenario.abstraction;
    Grid::new(a.lower.clone(), a.upper.clone(), a.cells.clone())
}

fn input_grid(loaded: &Loaded) -> Result<Option<Grid>> {
    let a = &loaded.scenario.abstraction;
    match (&a.input_lower, &a.input_upper, &a.input_cells) {
        (Some(l), Some(u), Some(c)) => Ok(Some(Grid::new(l.clone(), u.clone(), c.clone())?)),
        _ => Ok(None),
    }
}

/// Gains and composition for a list of certificates. Boundary verdicts
/// are recorded as warnings; a violated condition falls back to linear
/// weights when they exist.
fn compose(stage: &mut StageReport, net: &Interconnection, flavor: Flavor, warn: &mut Vec<String>, fail: &mut Vec<String>) -> Result<()> {
    let mut g = smallgain::build_gains(&stage.spsfs, &adjacency(net), flavor)?;
    let cycles = smallgain::verify_cycle_condition(&g, STRICT_TOL, DEFAULT_CYCLE_CAP);
    if cycles.verdict == Verdict::Violated {
        if let Some(s) = smallgain::find_linear_sigmas(&g) {
            warn.push(format!("{}: identity weights violate the cycle condition; using constructed linear weights", stage.name));
            g.sigmas = s;
        }
    }
    match smallgain::compose_ssf(&stage.spsfs, &g, true) {
        Ok(desc) => {
            if let Some(c) = &desc.caveat {
                warn.push(format!("{}: {c}", stage.name));
            }
            stage.ssf = Some(desc);
        }
        Err(e) => fail.push(format!("{}: {e}", stage.name)),
    }
    stage.gains = Some(g);
    stage.cycles = Some(cycles);
    Ok(())
}

fn verify_reduced(loaded: &Loaded, plan: &Plan, warn: &mut Vec<String>, fail: &mut Vec<String>) -> Result<Option<StageReport>> {
    let Some((red, certs)) = &plan.reduced else {
        return Ok(None);
    };
    let (kh, tuning) = loaded.reduction_tuning()?.expect("reduction table present");
    let mut st = StageReport {
        name: "reduced",
        margins: vec![],
        residuals: vec![],
        spsfs: vec![],
        gains: None,
        cycles: None,
        ssf: None,
        v0: None,
        bounds: vec![],
    };
    for (i, (sys, cert)) in plan.concrete.subsystems.iter().zip(certs).enumerate() {
        let m = spsf::check_eq8a(sys, &red.subsystems[i], cert, kh, tuning.pi)?;
        let r = spsf::check_structural(sys, &red.subsystems[i], cert)?;
        match m.verdict {
            Verdict::Violated => fail.push(format!("reduced: subsystem {} sector inequality margin {:e}", i + 1, m.margin)),
            Verdict::Boundary => warn.push(format!("reduced: subsystem {} sector inequality on the boundary", i + 1)),
            Verdict::Satisfied => {}
        }
        if !r.pass {
            for (name, v) in &r.residuals {
                if *v > spsf::PSD_TOL {
                    fail.push(format!("reduced: subsystem {} structural condition {name} residual {v:e}", i + 1));
                }
            }
        }
        if m.verdict.holds() && r.pass {
            st.spsfs.push(spsf::build_reduced_spsf(sys, &red.subsystems[i], cert, kh, tuning)?);
        }
        st.margins.push(m);
        st.residuals.push(r);
    }
    if st.spsfs.len() == certs.len() {
        compose(&mut st, &plan.concrete, Flavor::Infinite, warn, fail)?;
    }
    Ok(Some(st))
}

fn verify_finite(plan: &Plan, grid: &Grid, coarsen: usize, warn: &mut Vec<String>, fail: &mut Vec<String>) -> Result<StageReport> {
    let top = plan.top();
    let mut st = StageReport {
        name: "finite",
        margins: vec![],
        residuals: vec![],
        spsfs: vec![],
        gains: None,
        cycles: None,
        ssf: None,
        v0: None,
        bounds: vec![],
    };
    for (i, sys) in top.subsystems.iter().enumerate() {
        let m = spsf::check_eq88a(sys, &plan.finite_m, &plan.finite_k, plan.finite_kappa_hat, plan.finite_tuning.pi)?;
        match m.verdict {
            Verdict::Violated => fail.push(format!("finite: subsystem {} sector inequality margin {:e}", i + 1, m.margin)),
            Verdict::Boundary => warn.push(format!("finite: subsystem {} sector inequality on the boundary (margin {:e})", i + 1, m.margin)),
            Verdict::Satisfied => {}
        }
        if m.verdict.holds() {
            st.spsfs.push(spsf::build_finite_spsf(sys, &plan.finite_m, &plan.finite_k, plan.finite_kappa_hat, plan.finite_tuning, grid.delta())?);
        }
        st.margins.push(m);
    }
    if st.spsfs.len() == top.len() {
        let grids = vec![grid.clone(); top.len()];
        let (_, mu) = fmdp::align_internal_grids(top, &grids, coarsen)?;
        let flavor = if mu.iter().flatten().all(|&m| m == 0.0) {
            Flavor::Infinite
        } else {
            Flavor::Finite(FiniteExtras { delta_tilde_f: PowerFn::linear(DELTA_TILDE_F), bar_lambda: PowerFn::linear(BAR_LAMBDA), mu })
        };
        compose(&mut st, top, flavor, warn, fail)?;
    }
    Ok(st)
}

/// Certificates and composition of every stage, in chain order.
pub fn verify_stages(loaded: &Loaded, plan: &Plan, warn: &mut Vec<String>, fail: &mut Vec<String>) -> Result<Vec<StageReport>> {
    let grid = state_grid(loaded)?;
    let coarsen = loaded.scenario.abstraction.internal_coarsen.unwrap_or(1);
    let mut nets = vec![("concrete", &plan.concrete)];
    if let Some((r, _)) = &plan.reduced {
        nets.push(("reduced", r));
    }
    for (name, net) in nets {
        let local: Vec<String> = net
            .subsystems
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                s.terms.iter().any(|t| {
                    let (lo, hi) = t.phi.slope_bounds();
                    t.slope_a > lo + 1e-12 || t.slope_b < hi - 1e-12
                })
            })
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        if !local.is_empty() {
            warn.push(format!(
                "{name}: subsystems {} declare slope bounds tighter than the nonlinearity's global range; certificates hold only while trajectories stay where those bounds apply",
                local.join(",")
            ));
        }
    }
    let mut out = Vec::new();
    if let Some(r) = verify_reduced(loaded, plan, warn, fail)? {
        out.push(r);
    }
    out.push(verify_finite(plan, &grid, coarsen, warn, fail)?);
    Ok(out)
}

/// Initial states per level: concrete, reduced (weighted projection), finite (quantized).
pub fn initial_states(loaded: &Loaded, plan: &Plan) -> Result<Vec<Vec<Vector>>> {
    let x0 = Vector::from_vec(loaded.scenario.objective.initial.clone());
    let grid = state_grid(loaded)?;
    let n = plan.concrete.len();
    let mut levels = vec![vec![x0.clone(); n]];
    if let Some((_, certs)) = &plan.reduced {
        let red: Vec<Vector> = certs
            .iter()
            .map(|c| {
                let ptm = c.p.transpose() * &c.m;
                (&ptm * &c.p).lu().solve(&(&ptm * &x0)).ok_or(Error::NonInvertible)
            })
            .collect::<Result<_>>()?;
        levels.push(red);
    }
    let fin = levels.last().unwrap().iter().map(|x| grid.lattice_quantize(x)).collect();
    levels.push(fin);
    Ok(levels)
}

fn nu_hat_sup(loaded: &Loaded) -> f64 {
    let a = &loaded.scenario.abstraction;
    match (&a.input_lower, &a.input_upper) {
        (Some(l), Some(u)) => l.iter().chain(u).map(|v| v * v).sum::<f64>().sqrt(),
        _ => loaded.scenario.simulation.as_ref().and_then(|s| s.input.as_ref()).map_or(0.0, |u| u.iter().map(|v| v * v).sum::<f64>().sqrt()),
    }
}

/// `δ̂` of a composed stage at each radius.
pub fn stage_bounds(ssf: &SsfDescriptor, v0: f64, nu_sup: f64, epsilons: &[f64], horizon: usize) -> Result<Vec<ClosenessBound>> {
    let kh = ssf.kappa_hat().ok_or_else(|| Error::Precondition("network decay is not linear".into()))?;
    let psi_hat = bounds::psi_hat(&ssf.rho_ext, nu_sup, ssf.psi);
    epsilons.iter().map(|&e| bounds::closeness_bound(v0, &ssf.alpha, kh, psi_hat, e, horizon)).collect()
}

fn bound_stages(loaded: &Loaded, plan: &Plan, stages: &mut [StageReport]) -> Result<Vec<StageBound>> {
    let obj = &loaded.scenario.objective;
    let init = initial_states(loaded, plan)?;
    let nu = nu_hat_sup(loaded);
    for (k, st) in stages.iter_mut().enumerate() {
        let Some(ssf) = &st.ssf else { continue };
        let v0 = smallgain::evaluate_ssf(ssf, &init[k], &init[k + 1])?;
        let eps = match (st.name, &loaded.scenario.reduction) {
            ("reduced", Some(r)) => r.epsilons.clone().unwrap_or_else(|| obj.epsilons.clone()),
            _ => obj.epsilons.clone(),
        };
        st.v0 = Some(v0);
        st.bounds = stage_bounds(ssf, v0, nu, &eps, obj.horizon)?;
    }
    let mut composed = Vec::new();
    if stages.len() == 2 && stages.iter().all(|s| !s.bounds.is_empty()) {
        for b1 in &stages[0].bounds {
            for b2 in &stages[1].bounds {
                composed.push(bounds::transitivity(b1.into(), b2.into())?);
            }
        }
    }
    Ok(composed)
}

/// One MDP per subsystem, built once per distinct (subsystem, internal grid).
pub fn build_mdps(loaded: &Loaded, plan: &Plan) -> Result<Option<Vec<FiniteMDP>>> {
    let Some(ig) = input_grid(loaded)? else { return Ok(None) };
    let top = plan.top();
    let sg = state_grid(loaded)?;
    let coarsen = loaded.scenario.abstraction.internal_coarsen.unwrap_or(1);
    let (wgrids, _) = fmdp::align_internal_grids(top, &vec![sg.clone(); top.len()], coarsen)?;
    let mut out: Vec<FiniteMDP> = Vec::with_capacity(top.len());
    for (i, sys) in top.subsystems.iter().enumerate() {
        let wg = &wgrids[i];
        let points = wg.cells.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        if points.map_or(true, |p| p > MAX_INTERNAL_POINTS) {
            return Err(Error::Precondition(format!("internal grid of subsystem {} is too large to enumerate", i + 1)));
        }
        let same = (0..i).find(|&j| top.subsystems[j] == *sys && wgrids[j] == *wg);
        out.push(match same {
            Some(j) => out[j].clone(),
            None => fmdp::build_fmdp(sys, &sg, &ig, wg)?,
        });
    }
    Ok(Some(out))
}

/// Worst case over neighbour outputs inside the synthesis box when the
/// neighbours' outputs are their states; otherwise over the whole grid.
///
/// Restricting to the box is sound for the union bound: up to the first
/// exit of any subsystem every neighbour is inside the box.
fn robust_mode(net: &Interconnection, i: usize, mdp: &FiniteMDP, lo: f64, hi: f64) -> InternalMode {
    let states_out = net.inputs[i].iter().all(|sl| {
        let c = &net.subsystems[sl.source].c;
        c.nrows() == c.ncols() && *c == Mat::identity(c.nrows(), c.ncols())
    });
    if !states_out {
        return InternalMode::RobustMin;
    }
    let inside: Vec<usize> =
        (0..mdp.n_internal()).filter(|&w| mdp.internal_grid.center(w).iter().all(|&v| v >= lo && v <= hi)).collect();
    if inside.is_empty() {
        InternalMode::RobustMin
    } else {
        InternalMode::RobustOver(inside)
    }
}

/// Robust safety policies on the synthesis box and the initial-cell values.
pub fn synthesize(loaded: &Loaded, plan: &Plan, mdps: &[FiniteMDP]) -> Result<Option<(Vec<Policy>, Vec<f64>, f64)>> {
    let obj = &loaded.scenario.objective;
    let (Some(lo), Some(hi)) = (obj.synth_lower.or(obj.safe_lower), obj.synth_upper.or(obj.safe_upper)) else {
        return Ok(None);
    };
    let sg = state_grid(loaded)?;
    let mask = synth::safe_mask(&sg, &vec![lo; sg.dim()], &vec![hi; sg.dim()]);
    let init = initial_states(loaded, plan)?;
    let fin = init.last().unwrap();
    let top = plan.top();
    let mut policies: Vec<Policy> = Vec::with_capacity(mdps.len());
    for (i, mdp) in mdps.iter().enumerate() {
        let same = (0..i).find(|&j| top.subsystems[j] == top.subsystems[i] && mdps[j].internal_grid == mdp.internal_grid);
        policies.push(match same {
            Some(j) => policies[j].clone(),
            None => synth::dp_safety(mdp, &mask, obj.horizon, &robust_mode(top, i, mdp, lo, hi))?,
        });
    }
    let values: Vec<f64> = policies
        .iter()
        .zip(fin)
        .map(|(p, x)| sg.index_of(x).map_or(0.0, |c| p.value[0][c]))
        .collect();
    let network = (1.0 - values.iter().map(|v| 1.0 - v).sum::<f64>()).max(0.0);
    Ok(Some((policies, values, network)))
}

/// Coupled chain concrete → (reduced) → finite with the given top policy.
pub fn build_chain(loaded: &Loaded, plan: &Plan, stages: &[StageReport], top: TopPolicy) -> Result<Chain> {
    let sg = state_grid(loaded)?;
    let mut levels = vec![Level { net: plan.concrete.clone(), grids: None }];
    let mut links = Vec::new();
    for st in stages {
        let mode = if st.name == "reduced" { RefineMode::Reduced } else { RefineMode::Finite };
        links.push(st.spsfs.iter().map(|s| Link { spsf: s.clone(), mode }).collect());
    }
    if let Some((red, _)) = &plan.reduced {
        levels.push(Level { net: red.clone(), grids: None });
    }
    levels.push(Level { net: plan.top().clone(), grids: Some(vec![sg; plan.top().len()]) });
    Ok(Chain { levels, links, top })
}

fn simulate(loaded: &Loaded, plan: &Plan, rep: &RunReport, opts: &RunOptions) -> Result<Option<SimSummary>> {
    let Some(spec) = &loaded.scenario.simulation else { return Ok(None) };
    let obj = &loaded.scenario.objective;
    let top = if rep.policies.is_empty() {
        let u = Vector::from_vec(spec.input.clone().unwrap_or_default());
        TopPolicy::Constant(vec![u; plan.top().len()])
    } else {
        TopPolicy::Grid(rep.policies.iter().zip(&rep.mdps).map(|(p, m)| GridController::new(p.clone(), m)).collect())
    };
    let chain = build_chain(loaded, plan, &rep.stages, top)?;
    let init = initial_states(loaded, plan)?;
    let cfg = SimConfig {
        runs: opts.runs.unwrap_or(spec.runs),
        horizon: obj.horizon,
        seed: opts.seed.unwrap_or(spec.seed),
        keep_traces: false,
        safe_box: obj.safe_lower.zip(obj.safe_upper),
    };
    let bundle = sim::coupled_simulate(&chain, &init, &cfg)?;
    let levels = chain.levels.len();
    let mut rows = Vec::new();
    for (k, st) in rep.stages.iter().enumerate() {
        for b in &st.bounds {
            rows.push(((k, k + 1), b.epsilon, sim::empirical_deviation_prob(&bundle, b.epsilon, (k, k + 1))?, b.delta_hat));
        }
    }
    for c in &rep.composed {
        rows.push(((0, levels - 1), c.epsilon, sim::empirical_deviation_prob(&bundle, c.epsilon, (0, levels - 1))?, c.delta_hat));
    }
    let safe = sim::safe_frequency(&bundle);
    Ok(Some(SimSummary { bundle, rows, safe }))
}

/// Run the requested stages; artifacts are written when `opts.out` is set.
pub fn run(loaded: &Loaded, opts: &RunOptions) -> Result<RunReport> {
    let plan = loaded.plan()?;
    let mut rep = RunReport::default();
    let (mut warn, mut fail) = (Vec::new(), Vec::new());
    let want = |s: Stage| opts.stages.contains(&s);
    let needs_stages = want(Stage::Verify) || want(Stage::Compose) || want(Stage::Bound) || want(Stage::Simulate);
    if needs_stages {
        rep.stages = verify_stages(loaded, &plan, &mut warn, &mut fail)?;
    }
    let composed_ok = !rep.stages.is_empty() && rep.stages.iter().all(|s| s.ssf.is_some());
    if (want(Stage::Bound) || want(Stage::Simulate)) && composed_ok {
        rep.composed = bound_stages(loaded, &plan, &mut rep.stages)?;
    }
    if want(Stage::Abstract) || want(Stage::Synthesize) {
        match build_mdps(loaded, &plan) {
            Ok(Some(m)) => rep.mdps = m,
            Ok(None) => {}
            Err(Error::Precondition(msg)) => warn.push(format!("abstract: {msg}; MDP export and synthesis skipped")),
            Err(e) => return Err(e),
        }
    }
    if want(Stage::Synthesize) && !rep.mdps.is_empty() {
        if let Some((p, v, net)) = synthesize(loaded, &plan, &rep.mdps)? {
            rep.policies = p;
            rep.cell_values = v;
            rep.network_value = Some(net);
        }
    }
    if want(Stage::Simulate) && composed_ok {
        rep.sim = simulate(loaded, &plan, &rep, opts)?;
        if let Some(s) = &rep.sim {
            for (pair, eps, f, dh) in &s.rows {
                if f.ci_low > *dh {
                    fail.push(format!("simulation: pair {pair:?} at epsilon {eps}: frequency {} exceeds bound {dh}", f.value));
                }
            }
        }
    }
    rep.warnings = warn;
    rep.failures = fail;
    if let Some(dir) = &opts.out {
        write_artifacts(loaded, &plan, &mut rep, opts, dir)?;
    }
    Ok(rep)
}

fn power(f: &PowerFn) -> String {
    format!("{:.12e}*s^{}", f.c, f.p)
}

fn certificate_text(loaded: &Loaded, rep: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", loaded.scenario.name);
    for st in &rep.stages {
        let _ = writeln!(s, "\n[stage {}]", st.name);
        for (i, m) in st.margins.iter().enumerate() {
            let _ = writeln!(s, "subsystem {}:", i + 1);
            let _ = writeln!(s, "  sector_margin = {:.12e}", m.margin);
            if let Some(t) = m.multiplier {
                let _ = writeln!(s, "  multiplier = {t:.6e}");
            }
            if let Some(p) = m.printed_margin {
                let _ = writeln!(s, "  unit_multiplier_margin = {p:.12e}");
            }
            let _ = writeln!(s, "  verdict = {}", m.verdict);
            for (k, v) in &m.diagnostics {
                let _ = writeln!(s, "  {k} = {v:.12e}");
            }
            if let Some(r) = st.residuals.get(i) {
                for (name, v) in &r.residuals {
                    let _ = writeln!(s, "  residual[{name}] = {v:.6e}");
                }
            }
            if let Some(g) = st.spsfs.get(i) {
                let _ = writeln!(s, "  alpha = {}", power(&g.alpha));
                let _ = writeln!(s, "  kappa = {}", power(&g.kappa));
                let _ = writeln!(s, "  rho_int = {}", power(&g.rho_int));
                let _ = writeln!(s, "  rho_ext = {}", power(&g.rho_ext));
                let _ = writeln!(s, "  psi = {:.12e}", g.psi);
            }
        }
    }
    s
}

fn ssf_text(rep: &RunReport) -> String {
    let mut s = String::new();
    for st in &rep.stages {
        let _ = writeln!(s, "[stage {}]", st.name);
        if let Some(c) = &st.cycles {
            let _ = writeln!(s, "cycle_method = {}", c.method);
            let _ = writeln!(s, "cycle_verdict = {}", c.verdict);
            if let Some(w) = &c.witness {
                let path: Vec<String> = w.cycle.iter().map(|v| (v + 1).to_string()).collect();
                let _ = writeln!(s, "witness = {} ({})", path.join("-"), power(&w.composed));
            }
        }
        match &st.ssf {
            Some(d) => {
                let sig: Vec<String> = d.sigmas.iter().map(power).collect();
                let _ = writeln!(s, "sigmas = [{}]", sig.join(", "));
                match d.alpha.as_power() {
                    Some(a) => _ = writeln!(s, "alpha = {}", power(&a)),
                    None => _ = writeln!(s, "alpha = min of {} terms", d.alpha.0.len()),
                }
                match d.kappa_power() {
                    Some(k) => _ = writeln!(s, "kappa = {}", power(&k)),
                    None => _ = writeln!(s, "kappa = max of {} terms", d.kappa.0.len()),
                }
                if let Some(kh) = d.kappa_hat() {
                    let _ = writeln!(s, "kappa_hat = {kh:.12e}");
                }
                match d.rho_ext.as_power() {
                    Some(r) => _ = writeln!(s, "rho_ext = {}", power(&r)),
                    None => _ = writeln!(s, "rho_ext = max of {} terms", d.rho_ext.0.len()),
                }
                let _ = writeln!(s, "psi = {:.12e}", d.psi);
                if let Some(v) = st.v0 {
                    let _ = writeln!(s, "V0 = {v:.12e}");
                }
            }
            None => _ = writeln!(s, "composition = unavailable"),
        }
        s.push('\n');
    }
    s
}

fn bounds_csv(rep: &RunReport) -> String {
    let mut s = format!("stage,{}\n", bounds::CSV_HEADER);
    for st in &rep.stages {
        for b in &st.bounds {
            let _ = writeln!(s, "{},{}", st.name, b.csv_row());
        }
    }
    for c in &rep.composed {
        let _ = writeln!(s, "composed,{},{},,,,,{:.17e},", c.epsilon, c.horizon, c.delta_hat);
    }
    s
}

/// `δ̂` of the finite stage over network size, radius and grid parameter.
pub fn surface(loaded: &Loaded, sizes: &[usize], epsilons: &[f64], deltas: &[f64]) -> Result<String> {
    let obj = &loaded.scenario.objective;
    let base = state_grid(loaded)?;
    let mut s = String::from("N,delta,epsilon,psi,kappa_hat,delta_hat\n");
    for &n in sizes {
        let plan = loaded.plan_sized(Some(n))?;
        for &d in deltas {
            let cells: Vec<usize> = (0..base.dim()).map(|k| ((base.upper[k] - base.lower[k]) / d).round().max(1.0) as usize).collect();
            let grid = Grid::new(base.lower.clone(), base.upper.clone(), cells)?;
            let (mut w, mut f) = (Vec::new(), Vec::new());
            let st = verify_finite(&plan, &grid, loaded.scenario.abstraction.internal_coarsen.unwrap_or(1), &mut w, &mut f)?;
            let Some(ssf) = &st.ssf else {
                return Err(Error::Unverified(format!("N = {n}, delta = {d}: {}", f.join("; "))));
            };
            let kh = ssf.kappa_hat().ok_or_else(|| Error::Precondition("network decay is not linear".into()))?;
            // V0 = 0: both networks start in the same grid point
            for b in stage_bounds(ssf, 0.0, nu_hat_sup(loaded), epsilons, obj.horizon)? {
                let _ = writeln!(s, "{n},{d},{},{:.17e},{:.17e},{:.17e}", b.epsilon, ssf.psi, kh, b.delta_hat);
            }
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Size,
    Epsilon,
    Delta,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "N" | "n" | "size" => SweepAxis::Size,
            "epsilon" | "eps" => SweepAxis::Epsilon,
            "delta" => SweepAxis::Delta,
            other => return Err(Error::Scenario(format!("unknown sweep axis `{other}`"))),
        })
    }
}

/// CSV surface along one axis; the other two stay at the scenario values.
pub fn sweep(loaded: &Loaded, axis: SweepAxis) -> Result<String> {
    let sc = &loaded.scenario;
    let sw = sc.sweep.as_ref();
    let base_size = sc.network.size.map(|s| vec![s]).unwrap_or_else(|| vec![sc.network.subsystem.len()]);
    let base_delta = vec![state_grid(loaded)?.delta()];
    let base_eps = sc.objective.epsilons.clone();
    let missing = |k: &str| loaded.err("sweep", k, "sweep range not declared");
    match axis {
        SweepAxis::Size => {
            if sc.network.generator == "explicit" {
                return Err(loaded.err("network", "generator", "size sweeps need a generator"));
            }
            let sizes = sw.and_then(|s| s.sizes.clone()).ok_or_else(|| missing("sizes"))?;
            surface(loaded, &sizes, &base_eps, &base_delta)
        }
        SweepAxis::Epsilon => surface(loaded, &base_size, &sw.and_then(|s| s.epsilons.clone()).ok_or_else(|| missing("epsilons"))?, &base_delta),
        SweepAxis::Delta => surface(loaded, &base_size, &base_eps, &sw.and_then(|s| s.deltas.clone()).ok_or_else(|| missing("deltas"))?),
    }
}

fn write_artifacts(loaded: &Loaded, plan: &Plan, rep: &mut RunReport, opts: &RunOptions, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        std::fs::write(dir.join(&name), body)?;
        files.push(name);
        Ok(())
    };
    if !rep.stages.is_empty() {
        put("certificates.txt".into(), &certificate_text(loaded, rep))?;
        put("ssf.txt".into(), &ssf_text(rep))?;
        for st in &rep.stages {
            if let Some(c) = &st.cycles {
                put(format!("cycles_{}.csv", st.name), &smallgain::cycle_report_csv(c))?;
            }
        }
    }
    if rep.stages.iter().any(|s| !s.bounds.is_empty()) {
        put("bounds.csv".into(), &bounds_csv(rep))?;
        let sc = &loaded.scenario;
        let sizes = match (sc.network.generator.as_str(), sc.sweep.as_ref().and_then(|s| s.sizes.clone())) {
            ("explicit", _) | (_, None) => vec![plan.concrete.len()],
            (_, Some(v)) => v,
        };
        put("surface.csv".into(), &surface(loaded, &sizes, &sc.objective.epsilons, &[state_grid(loaded)?.delta()])?)?;
    }
    let mut written: Vec<usize> = Vec::new();
    for (i, m) in rep.mdps.iter().enumerate() {
        let top = plan.top();
        if written.iter().any(|&j| top.subsystems[j] == top.subsystems[i] && rep.mdps[j].internal_grid == m.internal_grid) {
            continue;
        }
        written.push(i);
        if loaded.scenario.abstraction.export_tensor || m.tensor_rows() <= MAX_TENSOR_ROWS {
            put(format!("mdp_{}.csv", i + 1), &m.to_csv())?;
        } else if let Some(k) = m.kernel_csv() {
            put(format!("mdp_kernel_{}.csv", i + 1), &k)?;
        }
    }
    for &i in &written {
        if let Some(p) = rep.policies.get(i) {
            put(format!("policy_{}.csv", i + 1), &p.to_csv())?;
        }
    }
    if let Some(sim) = &rep.sim {
        let mut s = String::from("pair,epsilon,hits,runs,frequency,ci_low,ci_high,delta_hat\n");
        for ((a, b), eps, f, dh) in &sim.rows {
            let _ = writeln!(s, "{a}-{b},{eps},{},{},{:.10e},{:.10e},{:.10e},{:.10e}", f.hits, f.runs, f.value, f.ci_low, f.ci_high, dh);
        }
        if let Some(f) = &sim.safe {
            let v0 = rep.network_value.map_or(String::new(), |v| format!("{v:.10e}"));
            let _ = writeln!(s, "safe,,{},{},{:.10e},{:.10e},{:.10e},{v0}", f.hits, f.runs, f.value, f.ci_low, f.ci_high);
        }
        put("simulation.csv".into(), &s)?;
        put("runs.csv".into(), &sim::bundle_csv(&sim.bundle))?;
    }
    let mut s = String::new();
    let status = rep.status(opts.strict);
    let _ = writeln!(s, "status = {status:?}");
    for w in &rep.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    for f in &rep.failures {
        let _ = writeln!(s, "failure: {f}");
    }
    if let Some(v) = rep.network_value {
        let _ = writeln!(s, "initial_cell_values = {:?}", rep.cell_values);
        let _ = writeln!(s, "network_safety_lower_bound = {v:.10e}");
    }
    put("summary.txt".into(), &s)?;
    rep.files = files;
    Ok(())
}

/// Matrix from rows, for tests and examples.
pub fn mat(rows: &[&[f64]]) -> Mat {
    Mat::from_fn(rows.len(), rows.first().map_or(0, |r| r.len()), |i, j| rows[i][j])
}
