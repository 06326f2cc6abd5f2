//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.
//! Attainable parts are asserted; a criterion that cannot hold as stated
//! prints FAIL with the reason and asserts the value that is obtained
//! instead.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stochabs::cases::{self, QChoice};
use stochabs::fmdp::{FiniteMDP, Grid};
use stochabs::kinf::{IdCompare, PowerFn, STRICT_TOL};
use stochabs::linalg::{Mat, Vector};
use stochabs::model::{self, Interconnection, NonlinearSCS};
use stochabs::pipeline::{self, RunOptions, RunReport, Stage};
use stochabs::scenario::Loaded;
use stochabs::sim::{self, Expectation, SpsfSample};
use stochabs::smallgain::{self, Flavor};
use stochabs::spsf::{self, QuadSPSF, Tuning};
use stochabs::synth::{self, InternalMode, RefineMode};
use stochabs::verdict::Verdict;

struct Outcome {
    pass: bool,
    note: String,
}

fn scenario(name: &str) -> Loaded {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Loaded::from_file(&p).unwrap()
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

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.gen_range(lo..hi)))
}

/// `freq ≤ bound + (ci_high − freq)`.
fn within(f: &sim::Frequency, bound: f64) -> bool {
    f.value <= bound + (f.ci_high - f.value)
}

// 1 ---------------------------------------------------------------------

fn c1() -> Outcome {
    let n = 20;
    let sys = cases::consensus_subsystem(n, 5, cases::CONSENSUS_TAU, 0.5).unwrap();
    let red = cases::reduced_subsystem(n, 5, 0.5).unwrap();
    let published = cases::consensus_certificate(n, 5, cases::CONSENSUS_TAU, QChoice::Published);
    let lmi = spsf::check_eq8a(&sys, &red, &published, cases::CONSENSUS_KAPPA_HAT, 1.0).unwrap();
    assert!(lmi.verdict.holds(), "reduced sector inequality: {lmi:?}");

    let st = spsf::check_structural(&sys, &red, &published).unwrap();
    let worst = st.residuals.iter().cloned().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    // A·1 = (1 − τ(n − n_i))·1 = 0.905·1 while PÂ − BQ = (0.5 + 0.4)·1
    approx::assert_abs_diff_eq!(worst.1, 0.005, epsilon = 1e-12);
    let others_zero = st.residuals.iter().filter(|r| r.0 != worst.0).all(|r| r.1 == 0.0);
    assert!(others_zero, "{:?}", st.residuals);
    let exact = cases::consensus_certificate(n, 5, cases::CONSENSUS_TAU, QChoice::Exact);
    let st_exact = spsf::check_structural(&sys, &red, &exact).unwrap();
    assert!(st_exact.pass && st_exact.residuals.iter().all(|r| r.1 <= 1e-15), "{:?}", st_exact.residuals);

    let room = cases::room(2, 0.21).unwrap();
    let one = Mat::from_element(1, 1, 1.0);
    let m88 = spsf::check_eq88a(&room, &one, &Mat::zeros(1, 1), cases::ROOM_KAPPA_HAT, 1.0).unwrap();
    assert!(m88.margin.abs() <= 1e-9, "room margin {}", m88.margin);
    assert!(m88.verdict.holds());

    Outcome {
        pass: st.pass,
        note: format!(
            "reduced sector margin {:.3e} ({}); structural residual {} = {:.3e} with Q = -0.4 (Q = {:.3} is exact at N = 20, residuals 0); room margin {:.1e}",
            lmi.margin,
            lmi.verdict,
            worst.0,
            worst.1,
            exact.q[(0, 0)],
            m88.margin
        ),
    }
}

// 2 ---------------------------------------------------------------------

/// `sup_s f(s)/s < 1` on a log grid; the sampling oracle for cycle gains.
fn sampled_below_identity(f: impl Fn(f64) -> f64) -> bool {
    (-60..=60).map(|k| 10f64.powf(k as f64 / 10.0)).all(|s| f(s) < s * (1.0 - 1e-9))
}

fn c2() -> Outcome {
    let n = 20;
    let sys = cases::consensus_subsystem(n, 5, cases::CONSENSUS_TAU, 0.5).unwrap();
    let red = cases::reduced_subsystem(n, 5, 0.5).unwrap();
    let cert = cases::consensus_certificate(n, 5, cases::CONSENSUS_TAU, QChoice::Exact);
    let tuning = Tuning::new(1.0, 0.99, 0.1).unwrap();
    let computed = spsf::build_reduced_spsf(&sys, &red, &cert, cases::CONSENSUS_KAPPA_HAT, tuning).unwrap();
    let net = cases::consensus_network(n, 5, cases::CONSENSUS_TAU, 0.5).unwrap();
    let adj = adjacency(&net);
    let g_computed = smallgain::build_gains(&vec![computed.clone(); n], &adj, Flavor::Infinite).unwrap();
    let computed_cross = g_computed.entries[0][1];

    let published = QuadSPSF {
        alpha: PowerFn::quadratic(0.2),
        kappa: PowerFn::linear(0.99),
        rho_int: PowerFn::quadratic(0.2),
        ..computed.clone()
    };
    let g = smallgain::build_gains(&vec![published; n], &adj, Flavor::Infinite).unwrap();
    for i in 0..n {
        assert_eq!(g.entries[i][i], PowerFn::linear(0.99));
        for j in (0..n).filter(|&j| j != i) {
            let e = g.entries[i][j];
            assert!((e.c - 1.0).abs() <= 1e-12 && e.p == 1.0, "cross gain {e}");
        }
    }
    let rep = smallgain::verify_cycle_condition(&g, STRICT_TOL, smallgain::DEFAULT_CYCLE_CAP);
    assert_eq!(rep.verdict, Verdict::Boundary);
    let witness = rep.witness.clone().unwrap();
    assert_eq!(witness.cycle.len(), 2);

    // two-subsystem example with square-root and quadratic couplings
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut agree_oracle, mut agree_root, mut agree_printed) = (0, 0, 0);
    for _ in 0..20 {
        let b1: f64 = rng.gen_range(-2.0..2.0);
        let b2: f64 = rng.gen_range(-2.0..2.0);
        let l: f64 = rng.gen_range(0.1..3.0);
        let a1: f64 = rng.gen_range(0.05..0.95);
        let a2: f64 = rng.gen_range(0.05..0.95);
        let k12 = PowerFn::new(b1.abs(), 0.5);
        let k21 = PowerFn::new(b2.abs() * l, 2.0);
        let entries = vec![vec![PowerFn::linear(a1), k12], vec![k21, PowerFn::linear(a2)]];
        let gm = smallgain::GainMatrix::from_entries(entries.clone());
        let symbolic = smallgain::verify_cycle_condition(&gm, STRICT_TOL, 2);
        let r01 = smallgain::compose_cycle(&entries, &[0, 1]).less_than_identity(STRICT_TOL) == IdCompare::Below;
        let r10 = smallgain::compose_cycle(&entries, &[1, 0]).less_than_identity(STRICT_TOL) == IdCompare::Below;
        let f12 = |s: f64| b1.abs() * s.sqrt();
        let f21 = |s: f64| b2.abs() * l * s * s;
        let o01 = sampled_below_identity(|s| f12(f21(s)));
        let o10 = sampled_below_identity(|s| f21(f12(s)));
        let holds = symbolic.verdict == Verdict::Satisfied;
        if r01 == o01 && r10 == o10 && holds == (o01 && o10) {
            agree_oracle += 1;
        }
        let root = b1.abs() * (b2.abs() * l).sqrt() < 1.0;
        if r01 == root && r10 == (b1 * b1 * b2.abs() * l < 1.0) {
            agree_root += 1;
        }
        if r10 == (b2.abs() * (b1 * l).powi(2) < 1.0) {
            agree_printed += 1;
        }
    }
    assert_eq!(agree_oracle, 20);
    assert_eq!(agree_root, 20);

    Outcome {
        pass: agree_printed == 20,
        note: format!(
            "published gains: diagonal 0.99s, cross {}, verdict {} on cycle {:?}; computed cross gain {} at N = 20; \
             example: symbolic = sampling oracle 20/20, |b1|sqrt(|b2|L) < 1 20/20, |b2|(b1 L)^2 < 1 {}/20 \
             (exact second rotation is b1^2|b2|L < 1)",
            g.entries[0][1],
            rep.verdict,
            witness.cycle,
            computed_cross,
            agree_printed
        ),
    }
}

// 3 ---------------------------------------------------------------------

fn c3() -> Outcome {
    let grid = Grid::interval(19.0, 21.0, 200).unwrap();
    let one = Mat::from_element(1, 1, 1.0);
    let tuning = Tuning::new(1.0, 0.99, 2.0).unwrap();
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for k in 1..=8 {
        let net = cases::room_ring(k, 0.21).unwrap();
        let spsfs: Vec<QuadSPSF> = net
            .subsystems
            .iter()
            .map(|s| spsf::build_finite_spsf(s, &one, &Mat::zeros(1, 1), cases::ROOM_KAPPA_HAT, tuning, grid.delta()).unwrap())
            .collect();
        let g = smallgain::build_gains(&spsfs, &adjacency(&net), Flavor::Infinite).unwrap();
        let ssf = smallgain::compose_ssf(&spsfs, &g, false).unwrap();
        let b = pipeline::stage_bounds(&ssf, 0.0, cases::ROOM_INPUT_MAX, &[0.25, 0.5, 1.0], 20).unwrap();
        rows.push((ssf.psi, b.iter().map(|b| b.delta_hat).collect()));
    }
    let same = rows.iter().all(|r| r.0 == rows[0].0 && r.1 == rows[0].1);
    assert!(same, "{rows:?}");
    Outcome { pass: same, note: format!("psi {:.6e}, delta_hat {:?} for k = 1..8", rows[0].0, rows[0].1) }
}

// 4 and 9 share one pipeline run ------------------------------------------

fn rooms_run() -> RunReport {
    let l = scenario("rooms_desk.scn");
    let opts = RunOptions { stages: Stage::ALL.into_iter().collect(), strict: false, seed: None, runs: Some(10_000), out: None };
    pipeline::run(&l, &opts).unwrap()
}

fn c4(rep: &RunReport) -> Outcome {
    let s = rep.sim.as_ref().unwrap();
    assert_eq!(s.bundle.runs, 10_000);
    assert_eq!(s.bundle.horizon, 20);
    let fin = rep.finite().unwrap();
    assert!((fin.spsfs[0].psi - 1.1655011655011655e-3).abs() < 1e-15);
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [0.25, 0.5, 1.0] {
        let (_, _, f, dh) = s.rows.iter().find(|r| r.0 == (0, 1) && r.1 == eps).unwrap();
        ok &= within(f, *dh);
        parts.push(format!("eps {eps}: {:.4} <= {:.4} + {:.1e}", f.value, dh, f.ci_high - f.value));
    }
    assert!(ok);
    Outcome { pass: ok, note: parts.join("; ") }
}

fn c9(rep: &RunReport) -> Outcome {
    let s = rep.sim.as_ref().unwrap();
    let safe = s.safe.unwrap();
    let v0 = rep.network_value.unwrap();
    let dh = rep.finite().unwrap().bounds.iter().find(|b| b.epsilon == 0.25).unwrap().delta_hat;
    let se = (safe.value * (1.0 - safe.value) / safe.runs as f64).sqrt();
    let ok = safe.value >= v0 - dh - 3.0 * se;
    assert!(ok);
    Outcome {
        pass: ok,
        note: format!("safe frequency {:.4} >= V0 {:.4} - delta_hat {:.4} - 3*{:.1e}", safe.value, v0, dh, se),
    }
}

// 5 ---------------------------------------------------------------------

fn c5() -> Outcome {
    let l = scenario("network_desk.scn");
    let opts = RunOptions { stages: Stage::ALL.into_iter().collect(), strict: false, seed: None, runs: Some(10_000), out: None };
    let rep = pipeline::run(&l, &opts).unwrap();
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    let grid = pipeline::state_grid(&l).unwrap();
    assert!((grid.delta() - 0.005).abs() < 1e-12);
    let s = rep.sim.as_ref().unwrap();
    assert_eq!((s.bundle.runs, s.bundle.horizon), (10_000, 50));
    let composed: Vec<_> = s.rows.iter().filter(|r| r.0 == (0, 2)).collect();
    assert!(!composed.is_empty());
    let ok = composed.iter().all(|(_, _, f, dh)| within(f, *dh));
    assert!(ok);
    let note = composed
        .iter()
        .map(|(_, e, f, dh)| format!("eps {e}: {:.4} <= {:.4}", f.value, dh))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass: ok, note }
}

// 6 ---------------------------------------------------------------------

fn room_mdp() -> (NonlinearSCS, FiniteMDP) {
    let sys = cases::room(2, 0.21).unwrap();
    let sg = Grid::interval(19.0, 21.0, 200).unwrap();
    let ig = Grid::interval(0.0, 0.6, 60).unwrap();
    let wg = sg.product(&sg);
    let mdp = stochabs::fmdp::build_fmdp(&sys, &sg, &ig, &wg).unwrap();
    (sys, mdp)
}

fn c6() -> Outcome {
    let (sys, mdp) = room_mdp();
    // Every row: the in-grid mass from the cached-boundary path must not
    // exceed 1 (the sink takes the rest). A sample of rows is materialized
    // and summed including the sink, and checked against that path.
    let ones = vec![1.0; mdp.n_states()];
    let mut worst: f64 = 0.0;
    for x in 0..mdp.n_states() {
        for u in 0..mdp.n_inputs() {
            for c in 0..mdp.n_classes() {
                worst = worst.max(mdp.expect(x, u, c, &ones) - 1.0);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for _ in 0..20_000 {
        let (x, u, c) = (rng.gen_range(0..mdp.n_states()), rng.gen_range(0..mdp.n_inputs()), rng.gen_range(0..mdp.n_classes()));
        let row = mdp.class_row(x, u, c);
        let inside: f64 = row[..mdp.n_states()].iter().sum();
        worst = worst.max((row.iter().sum::<f64>() - 1.0).abs()).max((inside - mdp.expect(x, u, c, &ones)).abs());
    }
    assert!(worst <= 1e-9, "row sum error {worst}");

    // five groups of roughly equal tensor mass plus the sink
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut misses = 0;
    let mut max_z: f64 = 0.0;
    for t in 0..20 {
        let x = rng.gen_range(0..mdp.n_states());
        let u = rng.gen_range(0..mdp.n_inputs());
        let w = rng.gen_range(0..mdp.n_internal());
        let row = mdp.row(x, u, w);
        let ns = mdp.n_states();
        let mut group = vec![0usize; ns + 1];
        let mut acc = 0.0;
        for j in 0..ns {
            group[j] = ((acc * 5.0) as usize).min(4);
            acc += row[j];
        }
        group[ns] = 5;
        let mut expected = [0.0; 6];
        for j in 0..=ns {
            expected[group[j]] += row[j];
        }
        let (xc, uc, wc) = (mdp.state_grid.center(x), mdp.input_grid.center(u), mdp.internal_grid.center(w));
        let mut sample_rng = ChaCha8Rng::seed_from_u64(1000 + t);
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            let z = Vector::from_element(1, sim::normal_from_bits(sample_rng.gen()));
            let next = model::step(&sys, &xc, &uc, &wc, &z).unwrap();
            let j = mdp.state_grid.index_of(&next).unwrap_or(ns);
            counts[group[j]] += 1;
        }
        for k in 0..6 {
            let p = expected[k];
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            let diff = (counts[k] as f64 / draws as f64 - p).abs();
            if diff > 3.0 * sd + 1e-12 {
                misses += 1;
            }
            if sd > 0.0 {
                max_z = max_z.max(diff / sd);
            }
        }
    }
    Outcome {
        pass: misses == 0,
        note: format!("max row-sum error {worst:.1e}; 20 triples x 10^5 steps, {misses} group frequencies outside 3 sigma (max z {max_z:.2})"),
    }
}

// 7 ---------------------------------------------------------------------

fn random_mdp(rng: &mut ChaCha8Rng) -> FiniteMDP {
    let (ns, nu, nw) = (10, 3, 2);
    let rows = (0..ns)
        .map(|_| {
            (0..nu)
                .map(|_| {
                    (0..nw)
                        .map(|_| {
                            let mut r: Vec<f64> = (0..=ns).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
                            let s: f64 = r.iter().sum();
                            r.iter_mut().for_each(|p| *p /= s);
                            r
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    FiniteMDP::from_rows(ns, nu, nw, rows).unwrap()
}

/// Maximal safe probability by expanding every branch of the game tree.
fn game_value(m: &FiniteMDP, safe: &[bool], x: usize, left: usize, ws: &[usize]) -> f64 {
    if !safe[x] {
        return 0.0;
    }
    if left == 0 {
        return 1.0;
    }
    (0..m.n_inputs())
        .map(|u| {
            ws.iter()
                .map(|&w| m.row(x, u, w)[..m.n_states()].iter().enumerate().map(|(j, p)| p * game_value(m, safe, j, left - 1, ws)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Probability of all safe state paths under a fixed policy and internal input.
fn path_sum(m: &FiniteMDP, pol: &synth::Policy, safe: &[bool], w: usize, path: &mut Vec<usize>, horizon: usize) -> f64 {
    let x = *path.last().unwrap();
    if !safe[x] {
        return 0.0;
    }
    let k = path.len() - 1;
    if k == horizon {
        return 1.0;
    }
    let row = m.row(x, pol.table[k][x], w);
    let mut total = 0.0;
    for (j, p) in row[..m.n_states()].iter().enumerate() {
        path.push(j);
        total += p * path_sum(m, pol, safe, w, path, horizon);
        path.pop();
    }
    total
}

fn c7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let horizon = 4;
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let m = random_mdp(&mut rng);
        let safe: Vec<bool> = (0..10).map(|x| x != 3 && x != 8).collect();
        let robust = synth::dp_safety(&m, &safe, horizon, &InternalMode::RobustMin).unwrap();
        for x in 0..10 {
            worst = worst.max((robust.value[0][x] - game_value(&m, &safe, x, horizon, &[0, 1])).abs());
        }
        for w in 0..2 {
            let fixed = synth::dp_safety(&m, &safe, horizon, &InternalMode::Fixed(w)).unwrap();
            for x in 0..10 {
                worst = worst.max((fixed.value[0][x] - game_value(&m, &safe, x, horizon, &[w])).abs());
                worst = worst.max((fixed.value[0][x] - path_sum(&m, &fixed, &safe, w, &mut vec![x], horizon)).abs());
                for k in 0..=horizon {
                    let (r, f) = (robust.value[k][x], fixed.value[k][x]);
                    assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&f));
                    assert!(r <= f + 1e-15);
                }
            }
        }
    }
    assert!(worst <= 1e-12, "{worst}");
    Outcome { pass: true, note: format!("max deviation from path enumeration {worst:.1e} on three random MDPs") }
}

// 8 ---------------------------------------------------------------------

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut notes = Vec::new();
    let mut total_violations = 0;

    // reduced stage of the consensus desk scenario: noise cancels exactly
    let l = scenario("network_desk.scn");
    let plan = l.plan().unwrap();
    let (mut w, mut f) = (Vec::new(), Vec::new());
    let stages = pipeline::verify_stages(&l, &plan, &mut w, &mut f).unwrap();
    let (red_net, _) = plan.reduced.as_ref().unwrap();
    let red_stage = &stages[0];
    assert_eq!(red_stage.spsfs.len(), 3);
    for (i, s) in red_stage.spsfs.iter().enumerate() {
        let (sys, abs) = (&plan.concrete.subsystems[i], &red_net.subsystems[i]);
        let samples: Vec<SpsfSample> = (0..200)
            .map(|_| SpsfSample {
                x: uniform(&mut rng, sys.n(), -1.0, 1.0),
                x_hat: uniform(&mut rng, abs.n(), -1.0, 1.0),
                nu_hat: uniform(&mut rng, abs.m(), -1.0, 1.0),
                w: uniform(&mut rng, sys.p(), -1.0, 1.0),
                w_hat: uniform(&mut rng, abs.p(), -1.0, 1.0),
            })
            .collect();
        let r = sim::validate_spsf_inequality(sys, abs, s, RefineMode::Reduced, None, &samples, Expectation::Exact).unwrap();
        total_violations += r.violations;
    }
    notes.push(format!("consensus reduced (exact) {total_violations}"));

    // finite stage of the consensus desk scenario
    let grid = pipeline::state_grid(&l).unwrap();
    let fin = &stages[1];
    let mut v = 0;
    for (i, s) in fin.spsfs.iter().enumerate() {
        let sys = &red_net.subsystems[i];
        let samples = finite_samples(&mut rng, sys, &grid, (-1.0, 1.0), (0.0, 0.0), 100);
        v += sim::validate_spsf_inequality(sys, sys, s, RefineMode::Finite, Some(&grid), &samples, Expectation::MonteCarlo { draws: 4000, seed: 81 })
            .unwrap()
            .violations;
    }
    notes.push(format!("consensus finite {v}"));
    total_violations += v;

    // room finite stage
    let room = cases::room(2, 0.21).unwrap();
    let rgrid = Grid::interval(19.0, 21.0, 200).unwrap();
    let one = Mat::from_element(1, 1, 1.0);
    let k0 = Mat::zeros(1, 1);
    let accepted = spsf::build_finite_spsf(&room, &one, &k0, cases::ROOM_KAPPA_HAT, Tuning::new(1.0, 0.99, 2.0).unwrap(), rgrid.delta()).unwrap();
    let samples = finite_samples(&mut rng, &room, &rgrid, (19.0, 21.0), (0.0, cases::ROOM_INPUT_MAX), 200);
    let mc = Expectation::MonteCarlo { draws: 4000, seed: 82 };
    let r = sim::validate_spsf_inequality(&room, &room, &accepted, RefineMode::Finite, Some(&rgrid), &samples, mc).unwrap();
    notes.push(format!("room finite {}", r.violations));
    total_violations += r.violations;

    // κ̂/100 with a tight decay split
    let tight = Tuning::new(1.0, 0.1, 2.0).unwrap();
    let falsified = spsf::finite_spsf_unchecked(&room, &one, &k0, cases::ROOM_KAPPA_HAT / 100.0, tight, rgrid.delta()).unwrap();
    let honest = spsf::finite_spsf_unchecked(&room, &one, &k0, cases::ROOM_KAPPA_HAT, tight, rgrid.delta()).unwrap();
    let detected = sim::validate_spsf_inequality(&room, &room, &falsified, RefineMode::Finite, Some(&rgrid), &samples, mc).unwrap().violations;
    let honest_v = sim::validate_spsf_inequality(&room, &room, &honest, RefineMode::Finite, Some(&rgrid), &samples, mc).unwrap().violations;
    notes.push(format!("falsified room detected {detected}/200 (unfalsified with the same tuning {honest_v})"));

    assert_eq!(total_violations, 0);
    assert_eq!(honest_v, 0);
    assert!(detected >= 1);
    Outcome { pass: true, note: notes.join("; ") }
}

fn finite_samples(rng: &mut ChaCha8Rng, sys: &NonlinearSCS, grid: &Grid, state: (f64, f64), input: (f64, f64), count: usize) -> Vec<SpsfSample> {
    let centers = grid.centers();
    (0..count)
        .map(|_| {
            let w = uniform(rng, sys.p(), state.0, state.1);
            // neighbour abstraction close to the neighbour, as after quantization
            let w_hat = &w + uniform(rng, sys.p(), -0.05, 0.05);
            SpsfSample {
                x: uniform(rng, sys.n(), state.0, state.1),
                x_hat: centers[rng.gen_range(0..centers.len())].clone(),
                nu_hat: if input.1 > input.0 { uniform(rng, sys.m(), input.0, input.1) } else { Vector::zeros(sys.m()) },
                w,
                w_hat,
            }
        })
        .collect()
}

fn main() {
    let mut results: Vec<(usize, Outcome, Duration, Duration)> = Vec::new();
    let mut timed = |id: usize, limit: u64, extra: Duration, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((id, o, t.elapsed() + extra, Duration::from_secs(limit)));
        let (id, o, el, lim) = results.last().unwrap();
        let ok = o.pass && el <= lim;
        println!("criterion {id}: {} ({:.2} s) {}", if ok { "PASS" } else { "FAIL" }, el.as_secs_f64(), o.note);
    };
    let zero = Duration::ZERO;
    timed(1, 1, zero, &c1);
    timed(2, 1, zero, &c2);
    timed(3, 5, zero, &c3);
    // criteria 4 and 9 are read off one full pipeline run; its time counts for both
    let t = Instant::now();
    let rooms = rooms_run();
    let shared = t.elapsed();
    timed(4, 120, shared, &|| c4(&rooms));
    timed(5, 600, zero, &c5);
    timed(6, 60, zero, &c6);
    timed(7, 10, zero, &c7);
    timed(8, 120, zero, &c8);
    timed(9, 180, shared, &|| c9(&rooms));
    let failed: Vec<usize> = results.iter().filter(|r| !(r.1.pass && r.2 <= r.3)).map(|r| r.0).collect();
    println!("acceptance: {} of 9 criteria pass; failing: {:?}", 9 - failed.len(), failed);
}
