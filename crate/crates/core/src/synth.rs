//! Finite-horizon safety synthesis on finite MDPs and refinement of abstract
//! policies to concrete inputs through interface maps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmdp::{FiniteMDP, Grid};
use crate::linalg::Vector;
use crate::spsf::{self, QuadSPSF};

/// How the internal input is treated during local synthesis.
#[derive(Clone, Debug, PartialEq)]
pub enum InternalMode {
    /// A fixed internal grid index.
    Fixed(usize),
    /// Worst case over the internal grid.
    RobustMin,
    /// Internal grid index per time step.
    NominalTrace(Vec<usize>),
    /// Worst case over a subset of internal grid indices.
    RobustOver(Vec<usize>),
}

/// Deterministic Markov policy with its value function.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub horizon: usize,
    /// `table[k][x]`, `k < horizon`.
    pub table: Vec<Vec<usize>>,
    /// `value[k][x]` for `k ≤ horizon`.
    pub value: Vec<Vec<f64>>,
}

impl Policy {
    pub fn input(&self, k: usize, x: usize) -> Result<usize> {
        if k >= self.horizon {
            return Err(Error::HorizonExhausted(k));
        }
        Ok(self.table[k][x])
    }

    /// CSV rows `k,state_index,input_index,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,state_index,input_index,value\n");
        for k in 0..self.horizon {
            for (x, u) in self.table[k].iter().enumerate() {
                s.push_str(&format!("{k},{x},{u},{:.16e}\n", self.value[k][x]));
            }
        }
        s
    }

    /// Re-import a policy table; the terminal values are not part of the CSV
    /// and are filled with zeros.
    pub fn from_csv(text: &str) -> Result<Policy> {
        let bad = |m: &str| Error::Scenario(format!("policy CSV: {m}"));
        let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
        for l in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let p = |i: usize| f[i].trim().parse::<usize>().map_err(|_| bad("index"));
            rows.push((p(0)?, p(1)?, p(2)?, f[3].trim().parse().map_err(|_| bad("value"))?));
        }
        let horizon = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let ns = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let mut table = vec![vec![0; ns]; horizon];
        let mut value = vec![vec![0.0; ns]; horizon + 1];
        for (k, x, u, v) in rows {
            table[k][x] = u;
            value[k][x] = v;
        }
        Ok(Policy { horizon, table, value })
    }
}

/// Maximal probability of staying in `safe` for `horizon` steps.
///
/// `V_T = 1_safe`, `V_k(x) = max_u agg_w Σ_x' P(x'|x,u,w) V_{k+1}(x')` on safe
/// states and 0 elsewhere (the sink is unsafe). Ties go to the lowest input.
/// Unsafe states keep value 0 but still get the maximizing input, so a
/// trajectory that leaves the safe set is steered back rather than given
/// an arbitrary input.
pub fn dp_safety(mdp: &FiniteMDP, safe: &[bool], horizon: usize, mode: &InternalMode) -> Result<Policy> {
    let ns = mdp.n_states();
    if safe.len() != ns {
        return Err(Error::Dimension(format!("safe mask has {} entries for {ns} states", safe.len())));
    }
    if !safe.iter().any(|&s| s) {
        return Err(Error::EmptySafeSet);
    }
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let classes_at = |k: usize| -> Result<Vec<usize>> {
        Ok(match mode {
            InternalMode::Fixed(w) => {
                if *w >= mdp.n_internal() {
                    return Err(Error::Dimension(format!("internal index {w} out of range")));
                }
                vec![mdp.class_of(*w)]
            }
            InternalMode::RobustMin => (0..mdp.n_classes()).collect(),
            InternalMode::RobustOver(ws) => {
                if ws.is_empty() || ws.iter().any(|&w| w >= mdp.n_internal()) {
                    return Err(Error::Dimension("robust subset must be nonempty and in range".into()));
                }
                let mut c: Vec<usize> = ws.iter().map(|&w| mdp.class_of(w)).collect();
                c.sort_unstable();
                c.dedup();
                c
            }
            InternalMode::NominalTrace(t) => {
                let w = *t.get(k).ok_or_else(|| Error::Dimension(format!("nominal trace shorter than horizon {horizon}")))?;
                if w >= mdp.n_internal() {
                    return Err(Error::Dimension(format!("internal index {w} out of range")));
                }
                vec![mdp.class_of(w)]
            }
        })
    };
    let mut value = vec![vec![0.0; ns]; horizon + 1];
    let mut table = vec![vec![0; ns]; horizon];
    value[horizon] = safe.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    for k in (0..horizon).rev() {
        let classes = extremes_first(classes_at(k)?);
        let next = &value[k + 1];
        let hint = table.get(k + 1);
        let step: Vec<(usize, f64)> = (0..ns)
            .into_par_iter()
            .map(|x| {
                // Start from the input chosen one step later; the tie rule
                // (lowest index among maximizers) is kept by comparing indices.
                let first = hint.map_or(0, |t| t[x]);
                let order = std::iter::once(first).chain((0..mdp.n_inputs()).filter(|&u| u != first));
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for u in order {
                    let beaten = |agg: f64, best: (usize, f64)| if u < best.0 { agg < best.1 } else { agg <= best.1 };
                    let mut agg = f64::INFINITY;
                    for &c in &classes {
                        agg = agg.min(mdp.expect(x, u, c, next));
                        if beaten(agg, best) {
                            break;
                        }
                    }
                    if !beaten(agg, best) {
                        best = (u, agg);
                    }
                }
                (best.0, if safe[x] { best.1.clamp(0.0, 1.0) } else { 0.0 })
            })
            .collect();
        for (x, (u, v)) in step.into_iter().enumerate() {
            table[k][x] = u;
            value[k][x] = v;
        }
    }
    Ok(Policy { horizon, table, value })
}

/// Reorder as first, last, second, second-to-last, ... Drive classes are
/// sorted, so the worst case of a robust minimum tends to show up early
/// and dominated inputs are abandoned after a few rows.
fn extremes_first(v: Vec<usize>) -> Vec<usize> {
    let n = v.len();
    (0..n).map(|i| if i % 2 == 0 { v[i / 2] } else { v[n - 1 - i / 2] }).collect()
}

/// Safe mask of cells whose centres lie in the box `[lo, hi]`.
pub fn safe_mask(grid: &Grid, lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..grid.len())
        .map(|i| {
            let c = grid.center(i);
            (0..grid.dim()).all(|k| c[k] >= lo[k] && c[k] <= hi[k])
        })
        .collect()
}

/// Abstract policy lifted to grid points: state lookup on the MDP state grid,
/// input as the representative of the selected input cell. States off the
/// grid use the nearest cell.
#[derive(Clone, Debug)]
pub struct GridController {
    pub policy: Policy,
    pub state_grid: Grid,
    pub inputs: Vec<Vector>,
}

impl GridController {
    pub fn new(policy: Policy, mdp: &FiniteMDP) -> Self {
        GridController { policy, state_grid: mdp.state_grid.clone(), inputs: mdp.input_grid.centers() }
    }

    /// `ν̂ = policy(k, Π(x̂))`.
    pub fn abstract_input(&self, k: usize, x_hat: &Vector) -> Result<Vector> {
        if k >= self.policy.horizon {
            return Err(Error::HorizonExhausted(k));
        }
        let g = &self.state_grid;
        let clamped = Vector::from_iterator(g.dim(), (0..g.dim()).map(|d| x_hat[d].clamp(g.lower[d], g.upper[d])));
        let x = g.index_of(&clamped).ok_or_else(|| Error::Dimension("state outside the controller grid".into()))?;
        let u = self.policy.table[k][x];
        Ok(self.inputs[u].clone())
    }
}

/// Refinement mode of an interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineMode {
    Reduced,
    Finite,
}

/// Concrete input from an abstract one through a certificate's interface.
pub fn refine_input(spsf: &QuadSPSF, mode: RefineMode, x: &Vector, x_hat: &Vector, nu_hat: &Vector, w_hat: &Vector) -> Result<Vector> {
    match mode {
        RefineMode::Reduced => spsf::interface_reduced(spsf, x, x_hat, nu_hat, w_hat),
        RefineMode::Finite => spsf::interface_finite(spsf, x, x_hat, nu_hat),
    }
}

/// One link of a refinement chain, from a more abstract level to the next concrete one.
#[derive(Clone, Debug)]
pub struct Link {
    pub spsf: QuadSPSF,
    pub mode: RefineMode,
}

/// Refined controller: an abstract policy at the top of a chain of interfaces.
///
/// `states[0]` is the concrete state and `states.last()` the top abstract
/// state; `links[l]` maps inputs of level `l+1` to level `l`. The abstract
/// trackers are advanced by the simulator.
#[derive(Clone, Debug)]
pub struct RefinedController {
    pub top: GridController,
    pub links: Vec<Link>,
}

impl RefinedController {
    pub fn new(top: GridController, links: Vec<Link>) -> Self {
        RefinedController { top, links }
    }

    /// Inputs at every level, `inputs[0]` being the concrete one.
    pub fn act(&self, k: usize, states: &[Vector], internal: &[Vector]) -> Result<Vec<Vector>> {
        let levels = self.links.len() + 1;
        if states.len() != levels || internal.len() != levels {
            return Err(Error::Dimension(format!("controller expects {levels} levels")));
        }
        let mut inputs = vec![Vector::zeros(0); levels];
        inputs[levels - 1] = self.top.abstract_input(k, &states[levels - 1])?;
        for l in (0..levels - 1).rev() {
            let link = &self.links[l];
            inputs[l] = refine_input(&link.spsf, link.mode, &states[l], &states[l + 1], &inputs[l + 1], &internal[l + 1])?;
        }
        Ok(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(p_stay: f64) -> FiniteMDP {
        FiniteMDP::from_rows(1, 1, 1, vec![vec![vec![vec![p_stay, 1.0 - p_stay]]]]).unwrap()
    }

    #[test]
    fn scalar_recursion() {
        let p = dp_safety(&chain(0.9), &[true], 3, &InternalMode::RobustMin).unwrap();
        assert!((p.value[0][0] - 0.729).abs() < 1e-15);
    }

    #[test]
    fn empty_safe_set_rejected() {
        assert!(matches!(dp_safety(&chain(0.9), &[false], 3, &InternalMode::RobustMin), Err(Error::EmptySafeSet)));
    }

    #[test]
    fn deterministic_stay() {
        let rows = (0..4)
            .map(|x| {
                vec![vec![(0..5).map(|j| if j == x { 1.0 } else { 0.0 }).collect::<Vec<f64>>()]]
            })
            .collect();
        let mdp = FiniteMDP::from_rows(4, 1, 1, rows).unwrap();
        let p = dp_safety(&mdp, &[true, true, false, true], 5, &InternalMode::Fixed(0)).unwrap();
        assert_eq!(p.value[0], vec![1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn tie_break_lowest_index() {
        let row = vec![0.5, 0.5];
        let mdp = FiniteMDP::from_rows(1, 3, 1, vec![vec![vec![row.clone()], vec![row.clone()], vec![row]]]).unwrap();
        let p = dp_safety(&mdp, &[true], 2, &InternalMode::RobustMin).unwrap();
        assert!(p.table.iter().all(|t| t[0] == 0));
    }

    #[test]
    fn policy_csv_round_trip() {
        let p = dp_safety(&chain(0.8), &[true], 4, &InternalMode::RobustMin).unwrap();
        let q = Policy::from_csv(&p.to_csv()).unwrap();
        assert_eq!(q.table, p.table);
        assert_eq!(q.value[..4], p.value[..4]);
        assert!(matches!(p.input(4, 0), Err(Error::HorizonExhausted(4))));
    }

    fn random_mdp(ns: usize, nu: usize, nw: usize, seed: &[f64]) -> FiniteMDP {
        let mut it = seed.iter().cycle();
        let rows = (0..ns)
            .map(|_| {
                (0..nu)
                    .map(|_| {
                        (0..nw)
                            .map(|_| {
                                let raw: Vec<f64> = (0..=ns).map(|_| *it.next().unwrap()).collect();
                                let s: f64 = raw.iter().sum();
                                let mut r: Vec<f64> = raw.iter().map(|v| v / s).collect();
                                let tail: f64 = r[..ns].iter().sum();
                                r[ns] = (1.0 - tail).max(0.0);
                                r
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        FiniteMDP::from_rows(ns, nu, nw, rows).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn dp_invariants(seed in proptest::collection::vec(0.01f64..1.0, 37), mask in proptest::collection::vec(any::<bool>(), 6), scale in 0.1f64..10.0) {
            prop_assume!(mask.iter().any(|&b| b));
            let mdp = random_mdp(6, 3, 2, &seed);
            let robust = dp_safety(&mdp, &mask, 5, &InternalMode::RobustMin).unwrap();
            let fixed = dp_safety(&mdp, &mask, 5, &InternalMode::Fixed(1)).unwrap();
            for k in 0..=5 {
                for x in 0..6 {
                    let v = robust.value[k][x];
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert!(v <= fixed.value[k][x] + 1e-15);
                    if k > 0 {
                        prop_assert!(robust.value[k - 1][x] <= robust.value[k][x] + 1e-15);
                    }
                }
            }
            // argmax is invariant under positive scaling of the terminal values
            let values: Vec<f64> = mask.iter().map(|&b| if b { scale } else { 0.0 }).collect();
            for x in 0..6 {
                let pick = |vals: &[f64]| {
                    let mut best = (0, f64::NEG_INFINITY);
                    for u in 0..3 {
                        let e = mdp.expect(x, u, 1, vals);
                        if e > best.1 { best = (u, e); }
                    }
                    best.0
                };
                let unit: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                prop_assert_eq!(pick(&unit), pick(&values));
            }
        }
    }
}
