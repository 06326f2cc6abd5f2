//! Grid quantization and finite MDPs with Gaussian-CDF kernels.
//!
//! Internal inputs enter the drift additively through `D·ŵ`, so transition
//! rows only depend on `(x̂, û)` and the drive vector `D·ŵ`. Internal grid
//! points with the same drive share a row ("drive class"); rows are computed
//! on demand rather than stored, which keeps ring networks with two
//! neighbours (200 × 15 × 200² triples) within desk memory.

use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{Interconnection, NonlinearSCS};

/// Below this standard deviation a dimension is treated as deterministic.
pub const SIGMA_MIN: f64 = 1e-8;

/// Uniform box grid with cell-centre representatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

/// Result of quantizing a point.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    In(usize),
    Sink,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != cells.len() {
            return Err(Error::Dimension("grid bounds and cell counts differ in length".into()));
        }
        for k in 0..lower.len() {
            if !(lower[k] < upper[k]) || cells[k] == 0 {
                return Err(Error::Precondition(format!(
                    "grid dimension {k} needs lower < upper and at least one cell"
                )));
            }
        }
        Ok(Grid { lower, upper, cells })
    }

    /// One-dimensional grid.
    pub fn interval(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Grid::new(vec![lower], vec![upper], vec![cells])
    }

    /// Zero-dimensional grid with the single point `[]`.
    pub fn empty() -> Self {
        Grid { lower: vec![], upper: vec![], cells: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    /// Number of cells (1 for the empty grid).
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self, k: usize) -> f64 {
        (self.upper[k] - self.lower[k]) / self.cells[k] as f64
    }

    /// Largest cell width.
    pub fn delta(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).fold(0.0, f64::max)
    }

    fn center_1d(&self, k: usize, i: i64) -> f64 {
        self.lower[k] + (i as f64 + 0.5) * self.width(k)
    }

    fn split(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.cells[k];
            flat /= self.cells[k];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.cells).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn center(&self, flat: usize) -> Vector {
        let idx = self.split(flat);
        Vector::from_iterator(self.dim(), (0..self.dim()).map(|k| self.center_1d(k, idx[k] as i64)))
    }

    pub fn centers(&self) -> Vec<Vector> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    fn index_1d(&self, k: usize, v: f64) -> Option<usize> {
        if !(v >= self.lower[k] && v <= self.upper[k]) {
            return None;
        }
        let i = ((v - self.lower[k]) / self.width(k)).floor() as usize;
        Some(i.min(self.cells[k] - 1))
    }

    /// Cell containing `x`, or the sink when `x` leaves the box.
    pub fn quantize(&self, x: &Vector) -> Cell {
        let mut idx = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            match self.index_1d(k, x[k]) {
                Some(i) => idx.push(i),
                None => return Cell::Sink,
            }
        }
        Cell::In(self.flat(&idx))
    }

    pub fn index_of(&self, x: &Vector) -> Option<usize> {
        match self.quantize(x) {
            Cell::In(i) => Some(i),
            Cell::Sink => None,
        }
    }

    /// Nearest centre of the grid lattice extended beyond the box.
    ///
    /// Agrees with `center(quantize(x))` inside the box and always satisfies
    /// `‖Π(x) − x‖_∞ ≤ δ/2`.
    pub fn lattice_quantize(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|k| {
                let i = match self.index_1d(k, x[k]) {
                    Some(i) => i as i64,
                    None => ((x[k] - self.lower[k]) / self.width(k)).floor() as i64,
                };
                self.center_1d(k, i)
            }),
        )
    }

    /// Product grid, `self` varying slowest.
    pub fn product(&self, other: &Grid) -> Grid {
        let cat = |a: &[f64], b: &[f64]| a.iter().chain(b).cloned().collect::<Vec<_>>();
        Grid {
            lower: cat(&self.lower, &other.lower),
            upper: cat(&self.upper, &other.upper),
            cells: self.cells.iter().chain(&other.cells).cloned().collect(),
        }
    }

    fn header(&self) -> String {
        let mut s = format!("{}", self.dim());
        for k in 0..self.dim() {
            let _ = write!(s, ",{:.16e},{:.16e},{}", self.lower[k], self.upper[k], self.cells[k]);
        }
        s
    }

    fn parse_header(fields: &[&str]) -> Result<Grid> {
        let bad = || Error::Scenario("malformed grid header".into());
        let d: usize = fields.first().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        if fields.len() != 1 + 3 * d {
            return Err(bad());
        }
        let mut g = Grid::empty();
        for k in 0..d {
            g.lower.push(fields[1 + 3 * k].trim().parse().map_err(|_| bad())?);
            g.upper.push(fields[2 + 3 * k].trim().parse().map_err(|_| bad())?);
            g.cells.push(fields[3 + 3 * k].trim().parse().map_err(|_| bad())?);
        }
        Ok(g)
    }
}

/// Standard normal CDF through cubic Hermite interpolation on `[-10, 10]`.
///
/// Nodes come from `erfc`; with spacing 1e-3 the interpolation error is
/// below 1e-14, far under the row-sum tolerance.
pub struct NormalCdf {
    lo: f64,
    inv_step: f64,
    step: f64,
    vals: Vec<f64>,
    ders: Vec<f64>,
}

impl NormalCdf {
    const HALF_WIDTH: f64 = 10.0;
    const STEP: f64 = 1e-3;

    fn build() -> Self {
        let n = (2.0 * Self::HALF_WIDTH / Self::STEP).round() as usize;
        let lo = -Self::HALF_WIDTH;
        let mut vals = Vec::with_capacity(n + 1);
        let mut ders = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let z = lo + i as f64 * Self::STEP;
            vals.push(phi_exact(z));
            ders.push((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt());
        }
        NormalCdf { lo, inv_step: 1.0 / Self::STEP, step: Self::STEP, vals, ders }
    }

    pub fn global() -> &'static NormalCdf {
        static CDF: OnceLock<NormalCdf> = OnceLock::new();
        CDF.get_or_init(NormalCdf::build)
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        if z <= self.lo {
            return if z <= -38.0 { 0.0 } else { phi_exact(z) };
        }
        let t = (z - self.lo) * self.inv_step;
        let i = t as usize;
        if i + 1 >= self.vals.len() {
            return if z > 38.0 { 1.0 } else { phi_exact(z) };
        }
        let s = t - i as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.vals[i] + h10 * self.step * self.ders[i] + h01 * self.vals[i + 1] + h11 * self.step * self.ders[i + 1]
    }
}

/// `Φ(z)` via the complementary error function.
pub fn phi_exact(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug)]
struct GaussKernel {
    /// Drift at `(x̂, û)` with zero internal input, indexed `x*nu + u`.
    base: Vec<Vector>,
    /// Distinct drives `D·ŵ`.
    drives: Vec<Vector>,
    std: Vector,
}

#[derive(Clone, Debug)]
enum Kernel {
    Gaussian(GaussKernel),
    /// Rows of length `n_states + 1` indexed `(x*nu + u)*n_classes + c`.
    Explicit { rows: Vec<f64> },
}

/// Finite MDP over a state grid plus an absorbing sink.
#[derive(Clone, Debug)]
pub struct FiniteMDP {
    pub state_grid: Grid,
    pub input_grid: Grid,
    pub internal_grid: Grid,
    class_of: Vec<usize>,
    n_classes: usize,
    kernel: Kernel,
}

impl FiniteMDP {
    pub fn n_states(&self) -> usize {
        self.state_grid.len()
    }
    pub fn n_inputs(&self) -> usize {
        self.input_grid.len()
    }
    pub fn n_internal(&self) -> usize {
        self.internal_grid.len()
    }
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
    /// Drive class of an internal grid point.
    pub fn class_of(&self, w: usize) -> usize {
        self.class_of[w]
    }

    /// Explicit MDP; `rows[x][u][w]` has `n_states + 1` entries, the last being the sink.
    pub fn from_rows(n_states: usize, n_inputs: usize, n_internal: usize, rows: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        if rows.len() != n_states {
            return Err(Error::Dimension("one row block per state required".into()));
        }
        let mut flat = Vec::with_capacity(n_states * n_inputs * n_internal * (n_states + 1));
        for bx in &rows {
            if bx.len() != n_inputs {
                return Err(Error::Dimension("one row block per input required".into()));
            }
            for bu in bx {
                if bu.len() != n_internal {
                    return Err(Error::Dimension("one row per internal input required".into()));
                }
                for r in bu {
                    if r.len() != n_states + 1 {
                        return Err(Error::Dimension(format!("rows need {} entries", n_states + 1)));
                    }
                    let s: f64 = r.iter().sum();
                    if r.iter().any(|p| !(0.0..=1.0).contains(p)) || (s - 1.0).abs() > 1e-9 {
                        return Err(Error::Precondition("rows must be probability vectors".into()));
                    }
                    flat.extend_from_slice(r);
                }
            }
        }
        let axis = |n: usize| Grid::interval(0.0, n as f64, n);
        Ok(FiniteMDP {
            state_grid: axis(n_states)?,
            input_grid: axis(n_inputs)?,
            internal_grid: axis(n_internal)?,
            class_of: (0..n_internal).collect(),
            n_classes: n_internal,
            kernel: Kernel::Explicit { rows: flat },
        })
    }

    /// Transition row over states followed by the sink.
    pub fn row(&self, x: usize, u: usize, w: usize) -> Vec<f64> {
        self.class_row(x, u, self.class_of[w])
    }

    pub fn class_row(&self, x: usize, u: usize, c: usize) -> Vec<f64> {
        let ns = self.n_states();
        match &self.kernel {
            Kernel::Explicit { rows } => {
                let at = ((x * self.n_inputs() + u) * self.n_classes + c) * (ns + 1);
                rows[at..at + ns + 1].to_vec()
            }
            Kernel::Gaussian(g) => {
                let mu = &g.base[x * self.n_inputs() + u] + &g.drives[c];
                let per_dim: Vec<Vec<f64>> =
                    (0..self.state_grid.dim()).map(|k| cell_probs(&self.state_grid, k, mu[k], g.std[k])).collect();
                let mut out = vec![0.0; ns + 1];
                let mut total = 0.0;
                for (j, o) in out.iter_mut().take(ns).enumerate() {
                    let idx = self.state_grid.split(j);
                    let p: f64 = idx.iter().enumerate().map(|(k, &i)| per_dim[k][i]).product();
                    *o = p;
                    total += p;
                }
                out[ns] = (1.0 - total).max(0.0);
                out
            }
        }
    }

    /// `Σ_j P(j | x, u, c)·values[j]`, with value zero on the sink.
    pub fn expect(&self, x: usize, u: usize, c: usize, values: &[f64]) -> f64 {
        match &self.kernel {
            Kernel::Gaussian(g) if self.state_grid.dim() == 1 => {
                let mu = g.base[x * self.n_inputs() + u][0] + g.drives[c][0];
                expect_1d(&self.state_grid, mu, g.std[0], values)
            }
            Kernel::Explicit { rows } => {
                let ns = self.n_states();
                let at = ((x * self.n_inputs() + u) * self.n_classes + c) * (ns + 1);
                rows[at..at + ns].iter().zip(values).map(|(p, v)| p * v).sum()
            }
            _ => self.class_row(x, u, c).iter().zip(values).map(|(p, v)| p * v).sum(),
        }
    }

    /// Drift at a grid triple; `None` for explicit MDPs.
    pub fn mean(&self, x: usize, u: usize, w: usize) -> Option<Vector> {
        match &self.kernel {
            Kernel::Gaussian(g) => Some(&g.base[x * self.n_inputs() + u] + &g.drives[self.class_of[w]]),
            Kernel::Explicit { .. } => None,
        }
    }

    /// Portable CSV: grid headers, class map, then one row per `(x, u, class)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# stochabs finite MDP v1\n");
        let _ = writeln!(s, "state_grid,{}", self.state_grid.header());
        let _ = writeln!(s, "input_grid,{}", self.input_grid.header());
        let _ = writeln!(s, "internal_grid,{}", self.internal_grid.header());
        let classes: Vec<String> = self.class_of.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "class_of,{}", classes.join(","));
        for x in 0..self.n_states() {
            for u in 0..self.n_inputs() {
                for c in 0..self.n_classes {
                    let _ = write!(s, "{x},{u},{c}");
                    for p in self.class_row(x, u, c) {
                        let _ = write!(s, ",{p:.16e}");
                    }
                    s.push('\n');
                }
            }
        }
        s
    }

    /// Number of `(x, u, class)` rows `to_csv` would write.
    pub fn tensor_rows(&self) -> usize {
        self.n_states() * self.n_inputs() * self.n_classes
    }

    /// Parametric export of a Gaussian kernel: drift per `(x, u)` at zero
    /// internal input, drive per class and the per-state noise deviation.
    /// Together with the grid headers this determines every row.
    pub fn kernel_csv(&self) -> Option<String> {
        let Kernel::Gaussian(g) = &self.kernel else {
            return None;
        };
        let mut s = String::from("# stochabs gaussian kernel v1\n");
        let _ = writeln!(s, "state_grid,{}", self.state_grid.header());
        let _ = writeln!(s, "input_grid,{}", self.input_grid.header());
        let _ = writeln!(s, "internal_grid,{}", self.internal_grid.header());
        let join = |v: &Vector| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "std,{}", join(&g.std));
        for (c, d) in g.drives.iter().enumerate() {
            let _ = writeln!(s, "drive,{c},{}", join(d));
        }
        let nu = self.n_inputs();
        for (i, m) in g.base.iter().enumerate() {
            let _ = writeln!(s, "drift,{},{},{}", i / nu, i % nu, join(m));
        }
        Some(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Scenario(format!("MDP CSV: {what}"));
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut grid = |name: &str| -> Result<Grid> {
            let l = lines.next().ok_or_else(|| bad("missing grid header"))?;
            let f: Vec<&str> = l.split(',').collect();
            if f[0] != name {
                return Err(bad(&format!("expected {name}")));
            }
            Grid::parse_header(&f[1..])
        };
        let (sg, ig, wg) = (grid("state_grid")?, grid("input_grid")?, grid("internal_grid")?);
        let cl = lines.next().ok_or_else(|| bad("missing class map"))?;
        let class_of: Vec<usize> = cl
            .split(',')
            .skip(1)
            .map(|v| v.trim().parse().map_err(|_| bad("class index")))
            .collect::<Result<_>>()?;
        let n_classes = class_of.iter().max().map_or(0, |m| m + 1);
        let ns = sg.len();
        let mut rows = Vec::new();
        for l in lines {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != ns + 4 {
                return Err(bad("row length"));
            }
            for v in &f[3..] {
                rows.push(v.trim().parse::<f64>().map_err(|_| bad("probability"))?);
            }
        }
        if rows.len() != ns * ig.len() * n_classes * (ns + 1) {
            return Err(bad("row count"));
        }
        Ok(FiniteMDP { state_grid: sg, input_grid: ig, internal_grid: wg, class_of, n_classes, kernel: Kernel::Explicit { rows } })
    }
}

fn cell_probs(grid: &Grid, k: usize, mu: f64, sigma: f64) -> Vec<f64> {
    let n = grid.cells[k];
    let h = grid.width(k);
    let mut out = vec![0.0; n];
    if sigma < SIGMA_MIN {
        if let Some(i) = grid.index_1d(k, mu) {
            out[i] = 1.0;
        }
        return out;
    }
    let cdf = NormalCdf::global();
    let mut prev = cdf.eval((grid.lower[k] - mu) / sigma);
    for (j, o) in out.iter_mut().enumerate() {
        let next = cdf.eval((grid.lower[k] + (j + 1) as f64 * h - mu) / sigma);
        *o = (next - prev).max(0.0);
        prev = next;
    }
    out
}

fn expect_1d(grid: &Grid, mu: f64, sigma: f64, values: &[f64]) -> f64 {
    if sigma < SIGMA_MIN {
        return grid.index_1d(0, mu).map_or(0.0, |i| values[i]);
    }
    let cdf = NormalCdf::global();
    let (lo, h) = (grid.lower[0], grid.width(0));
    let inv = 1.0 / sigma;
    let mut acc = 0.0;
    let mut cached: Option<(usize, f64)> = None;
    for (j, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let left = match cached {
            Some((b, f)) if b == j => f,
            _ => cdf.eval((lo + j as f64 * h - mu) * inv),
        };
        let right = cdf.eval((lo + (j + 1) as f64 * h - mu) * inv);
        acc += v * (right - left).max(0.0);
        cached = Some((j + 1, right));
    }
    acc
}

/// Gaussian-kernel MDP of `x̂⁺ = Π(f(x̂, û, ŵ, ζ))`.
pub fn build_fmdp(sys: &NonlinearSCS, state_grid: &Grid, input_grid: &Grid, internal_grid: &Grid) -> Result<FiniteMDP> {
    if state_grid.dim() != sys.n() || input_grid.dim() != sys.m() || internal_grid.dim() != sys.p() {
        return Err(Error::Dimension(format!(
            "grids have dims ({}, {}, {}), system has (n={}, m={}, p={})",
            state_grid.dim(),
            input_grid.dim(),
            internal_grid.dim(),
            sys.n(),
            sys.m(),
            sys.p()
        )));
    }
    let std = sys.per_state_std()?;
    let zero_w = Vector::zeros(sys.p());
    let xs = state_grid.centers();
    let us = input_grid.centers();
    let mut base = Vec::with_capacity(xs.len() * us.len());
    for x in &xs {
        for u in &us {
            base.push(sys.mean(x, u, &zero_w)?);
        }
    }
    let (drives, class_of) = drive_classes(&sys.d, internal_grid);
    Ok(FiniteMDP {
        state_grid: state_grid.clone(),
        input_grid: input_grid.clone(),
        internal_grid: internal_grid.clone(),
        n_classes: drives.len(),
        class_of,
        kernel: Kernel::Gaussian(GaussKernel { base, drives, std }),
    })
}

fn drive_classes(d: &Mat, internal_grid: &Grid) -> (Vec<Vector>, Vec<usize>) {
    let mut keyed: Vec<(Vec<i64>, Vector, usize)> = (0..internal_grid.len())
        .map(|w| {
            let v = d * internal_grid.center(w);
            let key = v.iter().map(|x| (x * 1e12).round() as i64).collect();
            (key, v, w)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut drives: Vec<Vector> = Vec::new();
    let mut class_of = vec![0; internal_grid.len()];
    let mut last: Option<&Vec<i64>> = None;
    for (key, v, w) in &keyed {
        if last != Some(key) {
            drives.push(v.clone());
            last = Some(key);
        }
        class_of[*w] = drives.len() - 1;
    }
    (drives, class_of)
}

/// Internal-input grids induced by neighbours' state grids.
///
/// A slice whose output rows are coordinate projections inherits the
/// projected state grid, coarsened by `coarsen` (1 keeps it aligned, μ = 0).
/// Other rows get an interval grid over the image of the state box and
/// μ is half the internal cell diameter. Returns the grids and `mu[j][i]`.
pub fn align_internal_grids(net: &Interconnection, state_grids: &[Grid], coarsen: usize) -> Result<(Vec<Grid>, Vec<Vec<f64>>)> {
    let n = net.len();
    if state_grids.len() != n {
        return Err(Error::Dimension("one state grid per subsystem required".into()));
    }
    let coarsen = coarsen.max(1);
    let mut mu = vec![vec![0.0f64; n]; n];
    let mut grids = Vec::with_capacity(n);
    for i in 0..n {
        let mut g = Grid::empty();
        for slice in &net.inputs[i] {
            let j = slice.source;
            let block = net.partitions[j]
                .blocks
                .iter()
                .find(|b| b.target == i)
                .ok_or_else(|| Error::Dimension(format!("subsystem {} has no output block for {}", j + 1, i + 1)))?;
            let c = &net.subsystems[j].c;
            let sg = &state_grids[j];
            let mut part = Grid::empty();
            let mut diam: f64 = 0.0;
            for r in block.rows.clone() {
                let row = c.row(r);
                let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] != 0.0).collect();
                let projection = nz.len() == 1 && row[nz[0]] == 1.0;
                if projection && coarsen == 1 {
                    let k = nz[0];
                    part = part.product(&Grid::interval(sg.lower[k], sg.upper[k], sg.cells[k])?);
                } else {
                    let (mut lo, mut hi, mut w) = (0.0, 0.0, 0.0);
                    for k in 0..row.len() {
                        let (a, b) = (row[k] * sg.lower[k], row[k] * sg.upper[k]);
                        lo += a.min(b);
                        hi += a.max(b);
                        w += row[k].abs() * sg.width(k);
                    }
                    let cw = w * coarsen as f64;
                    let cells = (((hi - lo) / cw).round() as usize).max(1);
                    let gi = Grid::interval(lo, hi.max(lo + cw * cells as f64), cells)?;
                    diam = diam.max(gi.width(0));
                    part = part.product(&gi);
                }
            }
            mu[j][i] = mu[j][i].max(diam / 2.0);
            g = g.product(&part);
        }
        grids.push(g);
    }
    Ok((grids, mu))
}
