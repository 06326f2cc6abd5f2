//! Probabilistic output-closeness bounds over a finite horizon.

use std::fmt;

use crate::error::{Error, Result};
use crate::kinf::{Gain, PowerFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundCase {
    /// `α(ε) ≥ ψ̂/κ̂`.
    One,
    Two,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoundFlags {
    /// `V₀ ≥ α(ε)`: the bound carries no information.
    pub vacuous: bool,
    /// The raw formula left `[0, 1]` and was clamped.
    pub clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosenessBound {
    pub epsilon: f64,
    pub horizon: usize,
    pub delta_hat: f64,
    pub v0: f64,
    pub alpha_eps: f64,
    pub kappa_hat: f64,
    pub psi_hat: f64,
    pub case_taken: BoundCase,
    pub flags: BoundFlags,
}

impl ClosenessBound {
    /// Report row `epsilon,Td,V0,kappa_hat,psi_hat,case,delta_hat,flags`.
    pub fn csv_row(&self) -> String {
        let mut flags = Vec::new();
        if self.flags.vacuous {
            flags.push("vacuous");
        }
        if self.flags.clamped {
            flags.push("clamped");
        }
        format!(
            "{},{},{:.17e},{:.17e},{:.17e},{},{:.17e},{}",
            self.epsilon,
            self.horizon,
            self.v0,
            self.kappa_hat,
            self.psi_hat,
            self.case_taken,
            self.delta_hat,
            flags.join("|")
        )
    }
}

impl fmt::Display for BoundCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundCase::One => "1",
            BoundCase::Two => "2",
        })
    }
}

pub const CSV_HEADER: &str = "epsilon,Td,V0,kappa_hat,psi_hat,case,delta_hat,flags";

/// Upper bound on `P(sup_{k ≤ Td} ‖y(k) − ŷ(k)‖ ≥ ε)`.
///
/// `alpha` is the network lower bound `α(‖h(x)−ĥ(x̂)‖) ≤ V(x, x̂)`.
pub fn closeness_bound(v0: f64, alpha: &dyn Gain, kappa_hat: f64, psi_hat: f64, epsilon: f64, horizon: usize) -> Result<ClosenessBound> {
    if !(kappa_hat > 0.0 && kappa_hat < 1.0) {
        return Err(Error::Precondition(format!("kappa_hat must lie in (0,1), got {kappa_hat}")));
    }
    if !(epsilon > 0.0) || !(psi_hat >= 0.0) || !(v0 >= 0.0) {
        return Err(Error::Precondition("need epsilon > 0, psi_hat >= 0 and V0 >= 0".into()));
    }
    let a = alpha.eval(epsilon);
    if !(a > 0.0) {
        return Err(Error::Precondition(format!("alpha(epsilon) must be positive, got {a}")));
    }
    let td = horizon as i32;
    let mut flags = BoundFlags::default();
    let (case_taken, raw) = if a >= psi_hat / kappa_hat {
        if v0 / a > 1.0 {
            flags.vacuous = true;
        }
        (BoundCase::One, 1.0 - (1.0 - v0 / a) * (1.0 - psi_hat / a).powi(td))
    } else {
        let decay = (1.0 - kappa_hat).powi(td);
        (BoundCase::Two, v0 / a * decay + psi_hat / (kappa_hat * a) * (1.0 - decay))
    };
    let delta_hat = if flags.vacuous {
        1.0
    } else if !(0.0..=1.0).contains(&raw) {
        flags.clamped = true;
        raw.clamp(0.0, 1.0)
    } else {
        raw
    };
    if flags.vacuous {
        flags.clamped = raw != 1.0;
    }
    Ok(ClosenessBound { epsilon, horizon, delta_hat, v0, alpha_eps: a, kappa_hat, psi_hat, case_taken, flags })
}

/// `ψ̂ = ρ_ext(‖ν̂‖_∞) + ψ` for an abstract input bounded by `nu_hat_sup`.
pub fn psi_hat(rho_ext: &dyn Gain, nu_hat_sup: f64, psi: f64) -> f64 {
    rho_ext.eval(nu_hat_sup) + psi
}

/// Radius–probability pair over a horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageBound {
    pub epsilon: f64,
    pub delta_hat: f64,
    pub horizon: usize,
}

impl From<&ClosenessBound> for StageBound {
    fn from(b: &ClosenessBound) -> Self {
        StageBound { epsilon: b.epsilon, delta_hat: b.delta_hat, horizon: b.horizon }
    }
}

/// Chain two stages: radii add, probabilities add (clamped at one).
pub fn transitivity(b1: StageBound, b2: StageBound) -> Result<StageBound> {
    if b1.horizon != b2.horizon {
        return Err(Error::HorizonMismatch(b1.horizon, b2.horizon));
    }
    Ok(StageBound { epsilon: b1.epsilon + b2.epsilon, delta_hat: (b1.delta_hat + b2.delta_hat).min(1.0), horizon: b1.horizon })
}

/// `κ̂` for a linear decay `κ(s) = c·s`, i.e. `κ(s) ≤ (1−κ̂)s`.
pub fn decay_rate(kappa: &PowerFn) -> Result<f64> {
    if kappa.is_zero() {
        return Ok(1.0 - f64::EPSILON);
    }
    if kappa.p != 1.0 || kappa.c >= 1.0 {
        return Err(Error::Precondition(format!("decay {kappa} is not a linear contraction")));
    }
    Ok(1.0 - kappa.c)
}

/// `δ̂` over an `(N, ε)` grid; `alpha_for(N)` and `psi_for(N)` give the network constants.
pub fn error_surface(
    sizes: &[usize],
    epsilons: &[f64],
    v0: f64,
    kappa_hat: f64,
    horizon: usize,
    alpha_for: &dyn Fn(usize) -> PowerFn,
    psi_for: &dyn Fn(usize) -> f64,
) -> Result<String> {
    let mut out = String::from("N,epsilon,delta_hat\n");
    for &n in sizes {
        let alpha = alpha_for(n);
        for &e in epsilons {
            let b = closeness_bound(v0, &alpha, kappa_hat, psi_for(n), e, horizon)?;
            out.push_str(&format!("{n},{e},{:.17e}\n", b.delta_hat));
        }
    }
    Ok(out)
}
