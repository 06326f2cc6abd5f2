//! Discrete-time stochastic control subsystems and their interconnection.
//!
//! A subsystem evolves as
//! `x⁺ = A x + Σ E_k φ_k(F_k x) + B ν + Σ_j ν_j N_j x + D w + c + R·diag(σ)·ζ`
//! with output `y = C x`. The bilinear terms `N_j` and the drift `c` are
//! zero for most systems; the room-temperature model needs both.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_shape, Mat, Vector};

/// Scalar nonlinearities selectable by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    Sin,
    /// Clamp to `[-1, 1]`.
    Saturation,
    Identity,
    Zero,
    /// Piecewise-linear interpolation through `(xs, ys)`, constant outside.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

impl Phi {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Phi::Sin => s.sin(),
            Phi::Saturation => s.clamp(-1.0, 1.0),
            Phi::Identity => s,
            Phi::Zero => 0.0,
            Phi::Tabulated { xs, ys } => {
                if s <= xs[0] {
                    return ys[0];
                }
                let last = xs.len() - 1;
                if s >= xs[last] {
                    return ys[last];
                }
                let k = xs.partition_point(|x| *x <= s) - 1;
                let t = (s - xs[k]) / (xs[k + 1] - xs[k]);
                ys[k] + t * (ys[k + 1] - ys[k])
            }
        }
    }

    pub fn from_name(name: &str) -> Result<Phi> {
        match name {
            "sin" => Ok(Phi::Sin),
            "sat" | "saturation" => Ok(Phi::Saturation),
            "identity" => Ok(Phi::Identity),
            "zero" => Ok(Phi::Zero),
            other => Err(Error::Scenario(format!("unknown nonlinearity `{other}`"))),
        }
    }

    /// Tightest slope bounds over the whole line, when they are known in closed form.
    pub fn slope_bounds(&self) -> (f64, f64) {
        match self {
            Phi::Sin => (-1.0, 1.0),
            Phi::Saturation => (0.0, 1.0),
            Phi::Identity => (1.0, 1.0),
            Phi::Zero => (0.0, 0.0),
            Phi::Tabulated { xs, ys } => {
                let mut lo = 0.0_f64;
                let mut hi = 0.0_f64;
                for k in 0..xs.len() - 1 {
                    let sl = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
                    lo = lo.min(sl);
                    hi = hi.max(sl);
                }
                (lo, hi)
            }
        }
    }
}

/// One term `E·φ̃(F x)` with `φ̃(s) = φ(s) − shift·s` and slope bounds `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinTerm {
    pub e: Vector,
    pub f: Vector,
    pub phi: Phi,
    pub shift: f64,
    pub slope_a: f64,
    /// `f64::INFINITY` encodes an unbounded sector.
    pub slope_b: f64,
}

impl NonlinTerm {
    pub fn new(e: Vector, f: Vector, phi: Phi, slope_a: f64, slope_b: f64) -> Self {
        NonlinTerm { e, f, phi, shift: 0.0, slope_a, slope_b }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.phi.eval(s) - self.shift * s
    }

    pub fn readout(&self, x: &Vector) -> f64 {
        self.f.dot(x)
    }

    pub fn is_active(&self) -> bool {
        self.phi != Phi::Zero && self.e.iter().any(|v| *v != 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearSCS {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub r: Mat,
    pub terms: Vec<NonlinTerm>,
    /// One `n×n` matrix per external-input channel, or empty.
    pub bilinear: Vec<Mat>,
    pub offset: Vector,
    pub noise_std: Vector,
    /// Admissible external inputs `[lo, hi]`, needed when `bilinear` is nonempty.
    pub input_box: Option<(Vector, Vector)>,
}

impl NonlinearSCS {
    /// Linear system with zero drift and unit noise scaling.
    pub fn linear(a: Mat, b: Mat, c: Mat, d: Mat, r: Mat) -> Result<Self> {
        let n = a.nrows();
        let nr = r.ncols();
        let sys = NonlinearSCS {
            a,
            b,
            c,
            d,
            r,
            terms: Vec::new(),
            bilinear: Vec::new(),
            offset: Vector::zeros(n),
            noise_std: Vector::from_element(nr, 1.0),
            input_box: None,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_term(mut self, term: NonlinTerm) -> Result<Self> {
        self.terms.push(term);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.d.ncols()
    }
    pub fn q(&self) -> usize {
        self.c.nrows()
    }
    pub fn r_dim(&self) -> usize {
        self.r.ncols()
    }

    pub fn is_linear(&self) -> bool {
        !self.terms.iter().any(NonlinTerm::is_active)
    }

    /// Single-term accessors: `E`, `F` and the sector bound `b` of the first term
    /// (zero vectors and `b = ∞` for linear systems).
    pub fn e_vec(&self) -> Vector {
        self.terms.first().map(|t| t.e.clone()).unwrap_or_else(|| Vector::zeros(self.n()))
    }
    pub fn f_vec(&self) -> Vector {
        self.terms.first().map(|t| t.f.clone()).unwrap_or_else(|| Vector::zeros(self.n()))
    }
    pub fn slope_b(&self) -> f64 {
        self.terms.first().map(|t| t.slope_b).unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        check_shape("A", &self.a, n, n)?;
        check_shape("B", &self.b, n, self.m())?;
        check_shape("C", &self.c, self.q(), n)?;
        check_shape("D", &self.d, n, self.p())?;
        check_shape("R", &self.r, n, self.r_dim())?;
        if self.offset.len() != n {
            return Err(Error::Dimension(format!("offset has {} entries, expected {n}", self.offset.len())));
        }
        if self.noise_std.len() != self.r_dim() {
            return Err(Error::Dimension(format!(
                "noise_std has {} entries, expected {}",
                self.noise_std.len(),
                self.r_dim()
            )));
        }
        if !self.bilinear.is_empty() {
            if self.bilinear.len() != self.m() {
                return Err(Error::Dimension(format!(
                    "{} bilinear matrices for {} inputs",
                    self.bilinear.len(),
                    self.m()
                )));
            }
            for nk in &self.bilinear {
                check_shape("bilinear term", nk, n, n)?;
            }
        }
        if let Some((lo, hi)) = &self.input_box {
            if lo.len() != self.m() || hi.len() != self.m() || lo.iter().zip(hi.iter()).any(|(a, b)| a > b) {
                return Err(Error::Dimension("input box must have m entries with lo <= hi".into()));
            }
        }
        for t in &self.terms {
            if t.e.len() != n || t.f.len() != n {
                return Err(Error::Dimension("nonlinearity E/F length differs from state dimension".into()));
            }
            if t.slope_a > t.slope_b || t.slope_b <= 0.0 {
                return Err(Error::Precondition(format!(
                    "slope bounds [{}, {}] need a <= b and b > 0",
                    t.slope_a, t.slope_b
                )));
            }
        }
        Ok(())
    }

    /// Deterministic part of the update.
    pub fn mean(&self, x: &Vector, nu: &Vector, w: &Vector) -> Result<Vector> {
        self.check_args(x, nu, w)?;
        let mut out = &self.a * x + &self.b * nu + &self.d * w + &self.offset;
        for t in &self.terms {
            out.axpy(t.eval(t.readout(x)), &t.e, 1.0);
        }
        for (k, nk) in self.bilinear.iter().enumerate() {
            if nu[k] != 0.0 {
                out += nk * x * nu[k];
            }
        }
        Ok(out)
    }

    /// Noise contribution `R·diag(σ)·ζ`.
    pub fn noise(&self, zeta: &Vector) -> Result<Vector> {
        if zeta.len() != self.r_dim() {
            return Err(Error::Dimension(format!("zeta has {} entries, expected {}", zeta.len(), self.r_dim())));
        }
        Ok(&self.r * zeta.component_mul(&self.noise_std))
    }

    pub fn output(&self, x: &Vector) -> Vector {
        &self.c * x
    }

    /// Effective per-state noise standard deviations, when every state
    /// receives at most one independent channel.
    pub fn per_state_std(&self) -> Result<Vector> {
        let n = self.n();
        let mut out = Vector::zeros(n);
        for i in 0..n {
            let mut seen = None;
            for j in 0..self.r_dim() {
                let v = self.r[(i, j)] * self.noise_std[j];
                if v != 0.0 {
                    if seen.is_some() {
                        return Err(Error::NoiseNotDiagonal);
                    }
                    seen = Some(j);
                    out[i] = v.abs();
                }
            }
        }
        // two states sharing one channel would be correlated
        for j in 0..self.r_dim() {
            let hits = (0..n).filter(|&i| self.r[(i, j)] * self.noise_std[j] != 0.0).count();
            if hits > 1 {
                return Err(Error::NoiseNotDiagonal);
            }
        }
        Ok(out)
    }

    fn check_args(&self, x: &Vector, nu: &Vector, w: &Vector) -> Result<()> {
        if x.len() != self.n() || nu.len() != self.m() || w.len() != self.p() {
            return Err(Error::Dimension(format!(
                "step got x:{} nu:{} w:{}, system has n={} m={} p={}",
                x.len(),
                nu.len(),
                w.len(),
                self.n(),
                self.m(),
                self.p()
            )));
        }
        Ok(())
    }
}

/// One transition `x⁺ = f(x, ν, w, ζ)`.
pub fn step(sys: &NonlinearSCS, x: &Vector, nu: &Vector, w: &Vector, zeta: &Vector) -> Result<Vector> {
    Ok(sys.mean(x, nu, w)? + sys.noise(zeta)?)
}

/// Rewrite every sector `[a, b]` as `[0, b − a]` by moving `a·E·F` into `A`.
pub fn normalize_slope(sys: &NonlinearSCS) -> NonlinearSCS {
    let mut out = sys.clone();
    for t in out.terms.iter_mut() {
        let a = t.slope_a;
        if a == 0.0 {
            continue;
        }
        out.a += &t.e * t.f.transpose() * a;
        t.shift += a;
        t.slope_b -= a;
        t.slope_a = 0.0;
    }
    out
}

/// Sampled check of the sector condition on pairs from `points`.
pub fn slope_condition_holds(term: &NonlinTerm, points: &[f64], tol: f64) -> bool {
    for (i, &c) in points.iter().enumerate() {
        for &d in &points[i + 1..] {
            if c == d {
                continue;
            }
            let s = (term.eval(c) - term.eval(d)) / (c - d);
            if s < term.slope_a - tol || s > term.slope_b + tol {
                return false;
            }
        }
    }
    true
}

/// Output rows of one subsystem sent to one neighbor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputBlock {
    pub target: usize,
    pub rows: Range<usize>,
}

/// How a subsystem's output splits into neighbor-bound blocks.
///
/// Blocks may share rows: the output maps `h_ij` are independent functions
/// and often coincide (every neighbor sees the full state in a diffusive network).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPartition {
    pub blocks: Vec<OutputBlock>,
    /// Rows forming the external output.
    pub external: Range<usize>,
}

/// One slice of an internal input, fed by `source`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputSlice {
    pub source: usize,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct Interconnection {
    pub subsystems: Vec<NonlinearSCS>,
    pub partitions: Vec<OutputPartition>,
    /// For each subsystem, the ordered slices of `w_i`.
    pub inputs: Vec<Vec<InputSlice>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCheck {
    pub source: usize,
    pub target: usize,
    pub output_rows: usize,
    pub slice_width: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub edges: Vec<EdgeCheck>,
    /// `(source, target)` pairs whose dimensions disagree or are unmatched.
    pub violations: Vec<(usize, usize)>,
    pub issues: Vec<String>,
    pub pass: bool,
}

/// Check `w_ji = y_ij` dimensionally for every edge.
pub fn validate_interconnection(net: &Interconnection) -> ValidationReport {
    let n = net.subsystems.len();
    let mut edges = Vec::new();
    let mut violations = Vec::new();
    let mut issues = Vec::new();
    if net.partitions.len() != n || net.inputs.len() != n {
        issues.push(format!(
            "{} subsystems, {} partitions, {} input lists",
            n,
            net.partitions.len(),
            net.inputs.len()
        ));
        return ValidationReport { edges, violations, issues, pass: false };
    }
    let mut used = vec![vec![false; 0]; n];
    for (j, part) in net.partitions.iter().enumerate() {
        used[j] = vec![false; part.blocks.len()];
        let q = net.subsystems[j].q();
        for blk in part.blocks.iter().chain(std::iter::once(&OutputBlock { target: j, rows: part.external.clone() })) {
            if blk.rows.end > q || blk.rows.start > blk.rows.end {
                issues.push(format!("subsystem {j}: rows {:?} outside output dimension {q}", blk.rows));
                violations.push((j, blk.target));
            }
        }
    }
    for (i, slices) in net.inputs.iter().enumerate() {
        let total: usize = slices.iter().map(|s| s.width).sum();
        if total != net.subsystems[i].p() {
            issues.push(format!(
                "subsystem {i}: slices cover {total} internal inputs, D has {}",
                net.subsystems[i].p()
            ));
            violations.push((i, i));
        }
        for sl in slices {
            let j = sl.source;
            if j >= n || j == i {
                issues.push(format!("subsystem {i}: invalid source {j}"));
                violations.push((j, i));
                continue;
            }
            let k = net.partitions[j]
                .blocks
                .iter()
                .enumerate()
                .position(|(bi, b)| b.target == i && !used[j][bi]);
            match k {
                Some(bi) => {
                    used[j][bi] = true;
                    let rows = net.partitions[j].blocks[bi].rows.len();
                    let ok = rows == sl.width;
                    edges.push(EdgeCheck { source: j, target: i, output_rows: rows, slice_width: sl.width, ok });
                    if !ok {
                        violations.push((j, i));
                    }
                }
                None => {
                    issues.push(format!("no output block of {j} targets {i}"));
                    violations.push((j, i));
                }
            }
        }
    }
    for (j, flags) in used.iter().enumerate() {
        for (bi, f) in flags.iter().enumerate() {
            if !f {
                let t = net.partitions[j].blocks[bi].target;
                issues.push(format!("output block of {j} to {t} is not consumed"));
                violations.push((j, t));
            }
        }
    }
    violations.sort_unstable();
    violations.dedup();
    let pass = violations.is_empty() && issues.is_empty();
    ValidationReport { edges, violations, issues, pass }
}

impl Interconnection {
    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// Assemble `w_i` from the neighbours' current outputs.
    pub fn internal_input(&self, i: usize, outputs: &[Vector]) -> Vector {
        let mut w = Vector::zeros(self.subsystems[i].p());
        let mut seen = vec![0usize; self.len()];
        let mut off = 0;
        for sl in &self.inputs[i] {
            let j = sl.source;
            let blk = self.partitions[j]
                .blocks
                .iter()
                .filter(|b| b.target == i)
                .nth(seen[j])
                .expect("validated interconnection");
            seen[j] += 1;
            w.rows_mut(off, sl.width).copy_from(&outputs[j].rows(blk.rows.start, sl.width));
            off += sl.width;
        }
        w
    }

    pub fn external_output(&self, i: usize, y: &Vector) -> Vector {
        let r = &self.partitions[i].external;
        y.rows(r.start, r.len()).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> Mat {
        Mat::from_element(1, 1, a)
    }

    #[test]
    fn room_step_example() {
        let mut sys = NonlinearSCS::linear(
            scalar(0.4),
            scalar(25.0),
            scalar(1.0),
            Mat::from_row_slice(1, 2, &[0.1, 0.1]),
            scalar(1.0),
        )
        .unwrap();
        sys.offset = Vector::from_element(1, -0.4);
        let x = step(&sys, &Vector::from_element(1, 20.0), &Vector::zeros(1), &Vector::from_vec(vec![20.0, 20.0]), &Vector::zeros(1))
            .unwrap();
        assert!((x[0] - 11.6).abs() < 1e-12);
    }

    #[test]
    fn zero_map() {
        let sys = NonlinearSCS::linear(Mat::zeros(2, 2), Mat::zeros(2, 1), Mat::zeros(1, 2), Mat::zeros(2, 0), Mat::zeros(2, 1))
            .unwrap();
        let x = step(&sys, &Vector::from_vec(vec![3.0, -1.0]), &Vector::zeros(1), &Vector::zeros(0), &Vector::zeros(1)).unwrap();
        assert_eq!(x, Vector::zeros(2));
    }

    #[test]
    fn dimension_errors() {
        let sys = NonlinearSCS::linear(Mat::identity(2, 2), Mat::zeros(2, 1), Mat::identity(2, 2), Mat::zeros(2, 0), Mat::zeros(2, 1))
            .unwrap();
        assert!(matches!(
            step(&sys, &Vector::zeros(3), &Vector::zeros(1), &Vector::zeros(0), &Vector::zeros(1)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn normalize_sin() {
        let t = NonlinTerm::new(Vector::from_element(1, 1.0), Vector::from_element(1, 1.0), Phi::Sin, -1.0, 1.0);
        let sys = NonlinearSCS::linear(scalar(0.5), scalar(1.0), scalar(1.0), Mat::zeros(1, 0), scalar(1.0))
            .unwrap()
            .with_term(t)
            .unwrap();
        let ns = normalize_slope(&sys);
        let nt = &ns.terms[0];
        assert_eq!((nt.slope_a, nt.slope_b), (0.0, 2.0));
        assert!((nt.eval(0.3) - (0.3f64.sin() + 0.3)).abs() < 1e-15);
        assert!((ns.a[(0, 0)] - (-0.5)).abs() < 1e-15);
        let pts: Vec<f64> = (0..50).map(|k| -5.0 + 0.2 * k as f64).collect();
        assert!(slope_condition_holds(nt, &pts, 1e-12));
        let unchanged = normalize_slope(&ns);
        assert_eq!(unchanged, ns);
    }

    #[test]
    fn tabulated_phi() {
        let phi = Phi::Tabulated { xs: vec![-1.0, 0.0, 1.0], ys: vec![-2.0, 0.0, 1.0] };
        assert_eq!(phi.eval(-0.5), -1.0);
        assert_eq!(phi.eval(0.5), 0.5);
        assert_eq!(phi.eval(3.0), 1.0);
        assert_eq!(phi.slope_bounds(), (0.0, 2.0));
    }

    fn two_rooms(width: usize) -> Interconnection {
        let room = NonlinearSCS::linear(scalar(0.4), scalar(25.0), scalar(1.0), Mat::zeros(1, 2), scalar(1.0)).unwrap();
        let part = |t| OutputPartition {
            blocks: vec![OutputBlock { target: t, rows: 0..1 }, OutputBlock { target: t, rows: 0..1 }],
            external: 0..1,
        };
        Interconnection {
            subsystems: vec![room.clone(), room],
            partitions: vec![part(1), part(0)],
            inputs: vec![
                vec![InputSlice { source: 1, width: 1 }, InputSlice { source: 1, width: width }],
                vec![InputSlice { source: 0, width: 1 }, InputSlice { source: 0, width: 1 }],
            ],
        }
    }

    #[test]
    fn validate_examples() {
        assert!(validate_interconnection(&two_rooms(1)).pass);
        let single = Interconnection {
            subsystems: vec![NonlinearSCS::linear(scalar(0.5), scalar(1.0), scalar(1.0), Mat::zeros(1, 0), scalar(1.0)).unwrap()],
            partitions: vec![OutputPartition { blocks: vec![], external: 0..1 }],
            inputs: vec![vec![]],
        };
        assert!(validate_interconnection(&single).pass);

        // y_01 has 2 rows but the slice of w_1 has 3
        let big = NonlinearSCS::linear(Mat::identity(2, 2), Mat::zeros(2, 1), Mat::identity(2, 2), Mat::zeros(2, 0), Mat::zeros(2, 1))
            .unwrap();
        let small = NonlinearSCS::linear(scalar(0.5), scalar(1.0), scalar(1.0), Mat::zeros(1, 3), scalar(1.0)).unwrap();
        let net = Interconnection {
            subsystems: vec![big, small],
            partitions: vec![
                OutputPartition { blocks: vec![OutputBlock { target: 1, rows: 0..2 }], external: 0..2 },
                OutputPartition { blocks: vec![], external: 0..1 },
            ],
            inputs: vec![vec![], vec![InputSlice { source: 0, width: 3 }]],
        };
        let rep = validate_interconnection(&net);
        assert!(!rep.pass);
        assert_eq!(rep.violations, vec![(0, 1)]);
    }

    #[test]
    fn internal_input_wiring() {
        let net = two_rooms(1);
        let ys = vec![Vector::from_element(1, 19.0), Vector::from_element(1, 21.0)];
        assert_eq!(net.internal_input(0, &ys), Vector::from_vec(vec![21.0, 21.0]));
    }
}
