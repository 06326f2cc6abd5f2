//! Quadratic stochastic pseudo-simulation functions.
//!
//! Three constructions are covered: reduced-order abstractions (sector matrix
//! inequality, structural equalities, interface with nonlinearity cancellation),
//! grid-based finite abstractions (matrix inequality plus a quantization
//! offset `ψ`), and the general incremental-ISS route expressed with
//! power-form gains.

use crate::error::{Error, Result};
use crate::kinf::{self, PowerFn};
use crate::linalg::{self, check_shape, Mat, Vector};
use crate::model::{NonlinTerm, NonlinearSCS};
use crate::verdict::Verdict;

/// Tolerance on `λ_max(LHS − RHS)` and on structural residuals.
pub const PSD_TOL: f64 = 1e-9;

/// Young's-inequality parameter `π` and the free constants `π̃ ∈ (0,1)`, `δ̃ > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tuning {
    pub pi: f64,
    pub pi_tilde: f64,
    pub delta_tilde: f64,
}

impl Tuning {
    pub fn new(pi: f64, pi_tilde: f64, delta_tilde: f64) -> Result<Self> {
        if !(pi > 0.0) || !(pi_tilde > 0.0 && pi_tilde < 1.0) || !(delta_tilde > 0.0) {
            return Err(Error::Precondition(format!(
                "tuning needs pi > 0, 0 < pi_tilde < 1, delta_tilde > 0; got ({pi}, {pi_tilde}, {delta_tilde})"
            )));
        }
        Ok(Tuning { pi, pi_tilde, delta_tilde })
    }
}

/// Matrices of a reduced-order certificate and its interface.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedCertificate {
    pub m: Mat,
    pub p: Mat,
    pub k: Mat,
    pub q: Mat,
    pub s: Mat,
    pub l1: Vector,
    pub l2: Vector,
    pub r_tilde: Mat,
}

/// Interface maps refining abstract inputs.
#[derive(Clone, Debug, PartialEq)]
pub enum Interface {
    /// `ν = K(x−Px̂) + Qx̂ + R̃ν̂ + Sŵ + L₁φ(Fx) − L₂φ(FPx̂)`.
    Reduced { cert: ReducedCertificate, term: Option<NonlinTerm> },
    /// `ν = K(x−x̂) + ν̂`.
    Finite { k: Mat },
    /// `ν = ν̂`.
    Passthrough,
}

/// Quadratic function `S(x,x̂) = (x−Px̂)ᵀM(x−Px̂)` with its gains.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadSPSF {
    pub m: Mat,
    pub p: Mat,
    pub interface: Interface,
    pub alpha: PowerFn,
    pub kappa: PowerFn,
    pub rho_int: PowerFn,
    pub rho_ext: PowerFn,
    pub psi: f64,
    pub kappa_hat: f64,
    pub tuning: Tuning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginReport {
    /// `λ_max(LHS − RHS)` with the best sector multiplier.
    pub margin: f64,
    /// Sector multiplier achieving `margin`; `None` when the nonlinear block decouples.
    pub multiplier: Option<f64>,
    /// The inequality exactly as printed (unit multiplier), when dimensions allow it.
    pub printed_margin: Option<f64>,
    pub verdict: Verdict,
    pub diagnostics: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// `(condition, max-abs residual)` for the six structural conditions.
    pub residuals: Vec<(&'static str, f64)>,
    pub pass: bool,
}

/// `S(x, x̂)`.
pub fn evaluate_spsf(spsf: &QuadSPSF, x: &Vector, x_hat: &Vector) -> f64 {
    quad_form(&spsf.m, &spsf.p, x, x_hat)
}

pub fn quad_form(m: &Mat, p: &Mat, x: &Vector, x_hat: &Vector) -> f64 {
    let e = x - p * x_hat;
    e.dot(&(m * &e))
}

/// Sector-bounded matrix inequality shared by both constructions.
///
/// With `G` the closed-loop matrix and `h` the direction through which the
/// nonlinearity increment enters the error, the expansion of
/// `(1+2/π)‖G e + h δ̄ F e‖²_M` gives the left-hand side; the right-hand side is
/// `[[κ̂M, −τFᵀ], [−τF, 2τ/b]]` with sector multiplier `τ ≥ 0`.
fn sector_matrix(m: &Mat, g: &Mat, h: &Vector, f: &Vector, b: f64, kappa_hat: f64, pi: f64, offdiag: f64, tau: f64) -> Mat {
    let n = m.nrows();
    let c = 1.0 + 2.0 / pi;
    let mut out = Mat::zeros(n + 1, n + 1);
    let tl = g.transpose() * m * g * c - m * kappa_hat;
    out.view_mut((0, 0), (n, n)).copy_from(&tl);
    let tr = g.transpose() * (m * h) * offdiag + f * tau;
    out.view_mut((0, n), (n, 1)).copy_from(&tr);
    out.view_mut((n, 0), (1, n)).copy_from(&tr.transpose());
    let two_over_b = if b.is_infinite() { 0.0 } else { 2.0 / b };
    out[(n, n)] = c * h.dot(&(m * h)) - tau * two_over_b;
    out
}

fn best_multiplier(eval: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (eval(0.0), 0.0);
    for k in -8..=8 {
        let t = 10f64.powi(k);
        let v = eval(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    if best.1 > 0.0 {
        // golden section on log τ around the coarse optimum; λ_max is convex in τ
        let (mut lo, mut hi) = ((best.1 / 10.0).ln(), (best.1 * 10.0).ln());
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let a = hi - gr * (hi - lo);
            let b = lo + gr * (hi - lo);
            if eval(a.exp()) < eval(b.exp()) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let t = (0.5 * (lo + hi)).exp();
        let v = eval(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best
}

fn lmi_report(m: &Mat, gs: &[Mat], h: &Vector, f: &Vector, b: f64, kappa_hat: f64, pi: f64, printed_br: Option<f64>) -> Result<MarginReport> {
    let lmin = linalg::require_pd(m)?;
    let lmax = linalg::lambda_max(m);
    let mut diagnostics = vec![("cond(M)".to_string(), lmax / lmin)];
    let decoupled = h.iter().all(|v| *v == 0.0);
    let mut margin = f64::NEG_INFINITY;
    let mut multiplier = None;
    let mut printed = printed_br.map(|_| f64::NEG_INFINITY);
    let c = 1.0 + 2.0 / pi;
    for (v, g) in gs.iter().enumerate() {
        let name = if gs.len() == 1 { "||G||".to_string() } else { format!("||G|| vertex {v}") };
        diagnostics.push((name, linalg::spectral_norm(g)));
        if decoupled {
            let tl = g.transpose() * m * g * c - m * kappa_hat;
            margin = margin.max(linalg::lambda_max(&tl));
        } else {
            let (v, t) = best_multiplier(|tau| linalg::lambda_max(&sector_matrix(m, g, h, f, b, kappa_hat, pi, c, tau)));
            if v > margin {
                margin = v;
                multiplier = Some(t);
            }
        }
        if let (Some(br), Some(pm)) = (printed_br, printed.as_mut()) {
            let mut lit = sector_matrix(m, g, h, f, b, kappa_hat, pi, 1.0, 1.0);
            let n = m.nrows();
            let two_over_b = if b.is_infinite() { 0.0 } else { 2.0 / b };
            lit[(n, n)] = c * br - two_over_b;
            *pm = pm.max(linalg::lambda_max(&lit));
        }
    }
    diagnostics.push(("||sqrt(M) h||".to_string(), h.dot(&(m * h)).max(0.0).sqrt()));
    Ok(MarginReport { margin, multiplier, printed_margin: printed, verdict: Verdict::from_margin(margin, PSD_TOL), diagnostics })
}

fn nonlinear_parts(sys: &NonlinearSCS) -> Result<(Vector, Vector, f64)> {
    let active: Vec<&NonlinTerm> = sys.terms.iter().filter(|t| t.is_active()).collect();
    if active.len() > 1 {
        return Err(Error::Precondition("matrix inequalities cover a single nonlinearity".into()));
    }
    match active.first() {
        Some(t) => {
            if t.slope_a != 0.0 {
                return Err(Error::Precondition("normalize the sector to [0, b] first".into()));
            }
            Ok((t.e.clone(), t.f.clone(), t.slope_b))
        }
        None => Ok((Vector::zeros(sys.n()), Vector::zeros(sys.n()), f64::INFINITY)),
    }
}

/// Closed-loop matrices `A + Σν_k N_k + BK` over the vertices of the input box.
fn closed_loop_family(sys: &NonlinearSCS, k: &Mat) -> Result<Vec<Mat>> {
    let base = &sys.a + &sys.b * k;
    if sys.bilinear.is_empty() {
        return Ok(vec![base]);
    }
    if k.iter().any(|v| *v != 0.0) {
        return Err(Error::Precondition("bilinear input terms require K = 0".into()));
    }
    let Some((lo, hi)) = &sys_input_box(sys) else {
        return Err(Error::Precondition("bilinear input terms require an input box".into()));
    };
    let m = sys.m();
    let mut out = Vec::with_capacity(1 << m);
    for mask in 0..(1usize << m) {
        let mut g = base.clone();
        for j in 0..m {
            let v = if mask >> j & 1 == 1 { hi[j] } else { lo[j] };
            g += &sys.bilinear[j] * v;
        }
        out.push(g);
    }
    Ok(out)
}

fn sys_input_box(sys: &NonlinearSCS) -> Option<(Vector, Vector)> {
    sys.input_box.clone()
}

/// Reduced-order sector inequality.
pub fn check_eq8a(sys: &NonlinearSCS, abs_sys: &NonlinearSCS, cert: &ReducedCertificate, kappa_hat: f64, pi: f64) -> Result<MarginReport> {
    let n = sys.n();
    let (m_in, m_hat) = (sys.m(), abs_sys.m());
    check_shape("M", &cert.m, n, n)?;
    check_shape("K", &cert.k, m_in, n)?;
    check_shape("P", &cert.p, n, abs_sys.n())?;
    check_shape("R_tilde", &cert.r_tilde, m_in, m_hat)?;
    if cert.l1.len() != m_in {
        return Err(Error::Dimension(format!("L1 has {} entries, expected {m_in}", cert.l1.len())));
    }
    if !sys.bilinear.is_empty() {
        return Err(Error::Precondition("reduced-order certificates do not cover bilinear inputs".into()));
    }
    let (e, f, b) = nonlinear_parts(sys)?;
    let h = &sys.b * &cert.l1 + e;
    let j = &sys.b * &cert.r_tilde - &cert.p * &abs_sys.b;
    let printed = (j.ncols() == 1).then(|| {
        let jj = j.column(0).into_owned();
        jj.dot(&(&cert.m * &jj))
    });
    let gs = closed_loop_family(sys, &cert.k)?;
    lmi_report(&cert.m, &gs, &h, &f, b, kappa_hat, pi, printed)
}

/// Finite-abstraction sector inequality (`P = I`, no `L₁`).
pub fn check_eq88a(sys: &NonlinearSCS, m: &Mat, k: &Mat, kappa_hat: f64, pi: f64) -> Result<MarginReport> {
    let n = sys.n();
    check_shape("M", m, n, n)?;
    check_shape("K", k, sys.m(), n)?;
    let (e, f, b) = nonlinear_parts(sys)?;
    let gs = closed_loop_family(sys, k)?;
    let printed = Some(e.dot(&(m * &e)));
    lmi_report(m, &gs, &e, &f, b, kappa_hat, pi, printed)
}

/// Residuals of `AP = PÂ − BQ`, `E = PÊ − B(L₁−L₂)`, `D = PD̂ − BS`, `R = PR̂`,
/// `F̂ = FP`, `Ĉ = CP`.
pub fn check_structural(sys: &NonlinearSCS, abs_sys: &NonlinearSCS, cert: &ReducedCertificate) -> Result<ResidualReport> {
    let (n, nh) = (sys.n(), abs_sys.n());
    check_shape("P", &cert.p, n, nh)?;
    check_shape("Q", &cert.q, sys.m(), nh)?;
    check_shape("S", &cert.s, sys.m(), abs_sys.p())?;
    if cert.l2.len() != sys.m() || cert.l1.len() != sys.m() {
        return Err(Error::Dimension("L1/L2 length differs from input dimension".into()));
    }
    let (e, f) = (sys.e_vec(), sys.f_vec());
    let (eh, fh) = (abs_sys.e_vec(), abs_sys.f_vec());
    let r10 = &sys.a * &cert.p - (&cert.p * &abs_sys.a - &sys.b * &cert.q);
    let r15 = e - (&cert.p * eh - &sys.b * (&cert.l1 - &cert.l2));
    let r14 = if sys.p() == abs_sys.p() {
        linalg::max_abs(&(&sys.d - (&cert.p * &abs_sys.d - &sys.b * &cert.s)))
    } else {
        f64::INFINITY
    };
    let r11 = if sys.r_dim() == abs_sys.r_dim() {
        linalg::max_abs(&(&sys.r - &cert.p * &abs_sys.r))
    } else {
        f64::INFINITY
    };
    let r16 = fh.transpose() - f.transpose() * &cert.p;
    let r26 = if sys.q() == abs_sys.q() {
        linalg::max_abs(&(&abs_sys.c - &sys.c * &cert.p))
    } else {
        f64::INFINITY
    };
    let residuals = vec![
        ("AP=PAhat-BQ", linalg::max_abs(&r10)),
        ("E=PEhat-B(L1-L2)", r15.amax()),
        ("D=PDhat-BS", r14),
        ("R=PRhat", r11),
        ("Fhat=FP", r16.amax()),
        ("Chat=CP", r26),
    ];
    let pass = residuals.iter().all(|(_, v)| *v <= PSD_TOL);
    Ok(ResidualReport { residuals, pass })
}

/// Least-squares `R̃ = (BᵀMB)⁻¹BᵀMPB̂`.
pub fn optimal_r_tilde(b: &Mat, m: &Mat, p: &Mat, b_hat: &Mat) -> Result<Mat> {
    let btmb = b.transpose() * m * b;
    let dim = btmb.nrows();
    let r = linalg::rank(&btmb, 1e-12);
    if r < dim {
        return Err(Error::Singular { rank: r, dim });
    }
    let rhs = b.transpose() * m * p * b_hat;
    btmb.lu().solve(&rhs).ok_or(Error::Singular { rank: r, dim })
}

fn output_alpha(sys: &NonlinearSCS, m: &Mat) -> Result<PowerFn> {
    let ctc = linalg::lambda_max(&(sys.c.transpose() * &sys.c));
    if ctc <= 0.0 {
        return Err(Error::Precondition("output matrix is zero".into()));
    }
    Ok(PowerFn::quadratic(linalg::lambda_min(m) / (sys.n() as f64 * ctc)))
}

fn decay(kappa_hat: f64, t: &Tuning) -> Result<(f64, PowerFn)> {
    if !(kappa_hat > 0.0 && kappa_hat < 1.0) {
        return Err(Error::Precondition(format!("kappa_hat must lie in (0,1), got {kappa_hat}")));
    }
    let kt = 1.0 - kappa_hat;
    Ok((kt, PowerFn::linear(1.0 - (1.0 - t.pi_tilde) * kt)))
}

fn rho_int(sys: &NonlinearSCS, m: &Mat, kt: f64, t: &Tuning) -> PowerFn {
    let p = sys.p() as f64;
    let c = (1.0 + t.delta_tilde) / (kt * t.pi_tilde) * p * (1.0 + 2.0 * t.pi + 1.0 / t.pi) * linalg::weighted_norm_sq(m, &sys.d);
    if c == 0.0 {
        PowerFn::zero()
    } else {
        PowerFn::quadratic(c)
    }
}

/// Reduced-order certificate with gains; requires both checks to hold.
pub fn build_reduced_spsf(
    sys: &NonlinearSCS,
    abs_sys: &NonlinearSCS,
    cert: &ReducedCertificate,
    kappa_hat: f64,
    tuning: Tuning,
) -> Result<QuadSPSF> {
    let lmi = check_eq8a(sys, abs_sys, cert, kappa_hat, tuning.pi)?;
    if !lmi.verdict.holds() {
        return Err(Error::Precondition(format!("sector inequality violated (margin {:e})", lmi.margin)));
    }
    let st = check_structural(sys, abs_sys, cert)?;
    if !st.pass {
        let worst = st.residuals.iter().cloned().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
        return Err(Error::Precondition(format!("structural condition {} has residual {:e}", worst.0, worst.1)));
    }
    let (kt, kappa) = decay(kappa_hat, &tuning)?;
    let j = &sys.b * &cert.r_tilde - &cert.p * &abs_sys.b;
    let ext = (1.0 + 1.0 / tuning.delta_tilde) / (kt * tuning.pi_tilde)
        * j.ncols() as f64
        * (1.0 + 3.0 * tuning.pi)
        * linalg::weighted_norm_sq(&cert.m, &j);
    let term = sys.terms.iter().find(|t| t.is_active()).cloned();
    Ok(QuadSPSF {
        m: cert.m.clone(),
        p: cert.p.clone(),
        interface: Interface::Reduced { cert: cert.clone(), term },
        alpha: output_alpha(sys, &cert.m)?,
        kappa,
        rho_int: rho_int(sys, &cert.m, kt, &tuning),
        rho_ext: if ext == 0.0 { PowerFn::zero() } else { PowerFn::quadratic(ext) },
        psi: 0.0,
        kappa_hat,
        tuning,
    })
}

/// Finite-abstraction certificate for grid parameter `delta`.
pub fn build_finite_spsf(sys: &NonlinearSCS, m: &Mat, k: &Mat, kappa_hat: f64, tuning: Tuning, delta: f64) -> Result<QuadSPSF> {
    if !(delta >= 0.0) {
        return Err(Error::Precondition(format!("grid parameter must be nonnegative, got {delta}")));
    }
    let lmi = check_eq88a(sys, m, k, kappa_hat, tuning.pi)?;
    if !lmi.verdict.holds() {
        return Err(Error::Precondition(format!("sector inequality violated (margin {:e})", lmi.margin)));
    }
    finite_spsf_unchecked(sys, m, k, kappa_hat, tuning, delta)
}

/// Gains of the finite construction without the matrix-inequality check.
///
/// Used to build deliberately falsified certificates for validation.
pub fn finite_spsf_unchecked(sys: &NonlinearSCS, m: &Mat, k: &Mat, kappa_hat: f64, tuning: Tuning, delta: f64) -> Result<QuadSPSF> {
    let (kt, kappa) = decay(kappa_hat, &tuning)?;
    let n = sys.n() as f64;
    let psi = (1.0 + 1.0 / tuning.delta_tilde) / (kt * tuning.pi_tilde) * n * (1.0 + 3.0 * tuning.pi) * linalg::lambda_max(m) * delta * delta;
    Ok(QuadSPSF {
        m: m.clone(),
        p: Mat::identity(sys.n(), sys.n()),
        interface: Interface::Finite { k: k.clone() },
        alpha: output_alpha(sys, m)?,
        kappa,
        rho_int: rho_int(sys, m, kt, &tuning),
        rho_ext: PowerFn::zero(),
        psi,
        kappa_hat,
        tuning,
    })
}

/// `ν = K(x−Px̂) + Qx̂ + R̃ν̂ + Sŵ + L₁φ(Fx) − L₂φ(FPx̂)`.
pub fn interface_reduced(spsf: &QuadSPSF, x: &Vector, x_hat: &Vector, nu_hat: &Vector, w_hat: &Vector) -> Result<Vector> {
    let Interface::Reduced { cert, term } = &spsf.interface else {
        return Err(Error::MissingInterface("reduced-order interface matrices"));
    };
    let px = &cert.p * x_hat;
    let mut nu = &cert.k * (x - &px) + &cert.q * x_hat + &cert.r_tilde * nu_hat + &cert.s * w_hat;
    if let Some(t) = term {
        nu.axpy(t.eval(t.readout(x)), &cert.l1, 1.0);
        nu.axpy(-t.eval(t.readout(&px)), &cert.l2, 1.0);
    }
    Ok(nu)
}

/// `ν = K(x − x̂) + ν̂`.
pub fn interface_finite(spsf: &QuadSPSF, x: &Vector, x_hat: &Vector, nu_hat: &Vector) -> Result<Vector> {
    match &spsf.interface {
        Interface::Finite { k } => Ok(k * (x - x_hat) + nu_hat),
        Interface::Passthrough => Ok(nu_hat.clone()),
        Interface::Reduced { .. } => Err(Error::MissingInterface("finite-abstraction gain K")),
    }
}

/// `E[S⁺]` bound `max{κ(S), ρ_int(‖w−ŵ‖), ρ_ext(‖ν̂‖), ψ}`.
pub fn decrease_bound(spsf: &QuadSPSF, s: f64, dw: f64, nu_hat_norm: f64) -> f64 {
    spsf.kappa
        .eval(s)
        .max(spsf.rho_int.eval(dw))
        .max(spsf.rho_ext.eval(nu_hat_norm))
        .max(spsf.psi)
}

/// Incremental ISS data for the general construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaISSCertificate {
    pub underline_alpha: PowerFn,
    pub overline_alpha: PowerFn,
    pub bar_kappa: PowerFn,
    pub bar_rho_int: PowerFn,
    pub bar_rho_ext: PowerFn,
    pub gamma: PowerFn,
    /// Lipschitz bound of the output map, `‖h(x)−h(x')‖ ≤ α̃(‖x−x'‖)`.
    pub output_lipschitz: PowerFn,
}

/// Free functions of the general construction; all must be linear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IssTuning {
    pub pi_tilde_f: PowerFn,
    pub delta_tilde_f: PowerFn,
    pub bar_lambda: PowerFn,
    pub underline_kappa: PowerFn,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainSet {
    pub alpha: PowerFn,
    pub kappa: PowerFn,
    pub rho_int: PowerFn,
    pub rho_ext: PowerFn,
    pub psi: f64,
}

/// Gains of the pseudo-simulation function obtained from an incrementally
/// ISS system and its grid abstraction with parameter `delta`.
pub fn general_iss_to_spsf(cert: &DeltaISSCertificate, t: &IssTuning, delta: f64) -> Result<GainSet> {
    for (name, f) in [
        ("pi_tilde_f", t.pi_tilde_f),
        ("delta_tilde_f", t.delta_tilde_f),
        ("bar_lambda", t.bar_lambda),
        ("underline_kappa", t.underline_kappa),
    ] {
        if f.p != 1.0 || f.is_zero() {
            return Err(Error::Precondition(format!("{name} must be a nonzero linear function, got {f}")));
        }
    }
    let id_minus_pi = kinf::identity_minus(&t.pi_tilde_f)
        .map_err(|_| Error::Precondition("Id - pi_tilde_f is not K-infinity".into()))?;
    let lam_inv = kinf::minus_identity_inverse(&t.bar_lambda)
        .map_err(|_| Error::Precondition("bar_lambda - Id is not K-infinity".into()))?;
    kinf::identity_minus(&t.underline_kappa)
        .map_err(|_| Error::Precondition("Id - underline_kappa is not K-infinity".into()))?;
    let grid: Vec<f64> = (1..=200).map(|k| 0.05 * k as f64).collect();
    if grid.iter().any(|&s| t.underline_kappa.eval(s) > cert.bar_kappa.eval(s) * (1.0 + 1e-12)) {
        return Err(Error::Precondition("underline_kappa exceeds bar_kappa on the sample grid".into()));
    }
    if grid.iter().any(|&s| cert.underline_alpha.eval(s) > cert.overline_alpha.eval(s) * (1.0 + 1e-12)) {
        return Err(Error::Precondition("underline_alpha exceeds overline_alpha on the sample grid".into()));
    }
    let kappa = kinf::identity_minus(&id_minus_pi.compose(&t.underline_kappa))?;
    let (id_plus_d, id_plus_dinv) = kinf::plus_identity_variants(&t.delta_tilde_f, 1.0)?;
    let chain = t.underline_kappa.inverse()?.compose(&t.pi_tilde_f.inverse()?).compose(&t.bar_lambda);
    let rho_int = id_plus_d.f.compose(&chain).compose(&cert.bar_rho_int);
    let gamma_tilde = id_plus_dinv.f.compose(&chain).compose(&lam_inv).compose(&cert.gamma);
    let alpha_hat = cert.output_lipschitz.compose(&cert.underline_alpha.inverse()?);
    Ok(GainSet { alpha: alpha_hat.inverse()?, kappa, rho_int, rho_ext: PowerFn::zero(), psi: gamma_tilde.eval(delta) })
}

/// Formula output next to a published constant.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetDeviation {
    pub name: String,
    pub computed: f64,
    pub target: f64,
    pub relative: f64,
}

pub fn deviation(name: &str, computed: f64, target: f64) -> TargetDeviation {
    let relative = if target == 0.0 { computed.abs() } else { (computed - target) / target };
    TargetDeviation { name: name.to_string(), computed, target, relative }
}
