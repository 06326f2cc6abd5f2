//! Built-in case studies: a ring of heated rooms and a complete-graph
//! consensus network with a sine nonlinearity, plus its scalar reduction.

use crate::error::Result;
use crate::linalg::{ones, Mat, Vector};
use crate::model::{InputSlice, Interconnection, NonlinTerm, NonlinearSCS, OutputBlock, OutputPartition, Phi};
use crate::spsf::ReducedCertificate;

/// Room parameters: neighbour conduction, outside conduction, heater conduction.
pub const ETA: f64 = 0.1;
pub const BETA: f64 = 0.4;
pub const GAMMA: f64 = 0.5;
pub const T_HEATER: f64 = 50.0;
pub const T_OUTSIDE: f64 = -1.0;
pub const ROOM_INPUT_MAX: f64 = 0.6;
pub const ROOM_KAPPA_HAT: f64 = 0.48;

/// One room with `neighbours` internal inputs:
/// `T⁺ = (1−2η−β)T − γνT + γT_h ν + η Σ w + β T_e + σζ`.
pub fn room(neighbours: usize, noise_std: f64) -> Result<NonlinearSCS> {
    let mut sys = NonlinearSCS::linear(
        Mat::from_element(1, 1, 1.0 - 2.0 * ETA - BETA),
        Mat::from_element(1, 1, GAMMA * T_HEATER),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, neighbours, ETA),
        Mat::from_element(1, 1, 1.0),
    )?;
    sys.bilinear = vec![Mat::from_element(1, 1, -GAMMA)];
    sys.offset = Vector::from_element(1, BETA * T_OUTSIDE);
    sys.noise_std = Vector::from_element(1, noise_std);
    sys.input_box = Some((Vector::from_element(1, 0.0), Vector::from_element(1, ROOM_INPUT_MAX)));
    sys.validate()?;
    Ok(sys)
}

/// Circular building of `k` rooms. With two rooms both slices come from the
/// other room; a single room has no internal inputs.
pub fn room_ring(k: usize, noise_std: f64) -> Result<Interconnection> {
    let neighbours = |i: usize| -> Vec<usize> {
        match k {
            1 => vec![],
            2 => vec![1 - i, 1 - i],
            _ => vec![(i + k - 1) % k, (i + 1) % k],
        }
    };
    let width = if k == 1 { 0 } else { 2 };
    let subsystems = (0..k).map(|_| room(width, noise_std)).collect::<Result<Vec<_>>>()?;
    let mut partitions: Vec<OutputPartition> = (0..k).map(|_| OutputPartition { blocks: vec![], external: 0..1 }).collect();
    for i in 0..k {
        for j in neighbours(i) {
            partitions[j].blocks.push(OutputBlock { target: i, rows: 0..1 });
        }
    }
    let inputs = (0..k).map(|i| neighbours(i).into_iter().map(|source| InputSlice { source, width: 1 }).collect()).collect();
    Ok(Interconnection { subsystems, partitions, inputs })
}

/// Block `I − τL_i` of the complete-graph Laplacian for total dimension `n`.
fn consensus_block(n: usize, ni: usize, tau: f64) -> Mat {
    let mut a = Mat::from_element(ni, ni, tau);
    for d in 0..ni {
        a[(d, d)] = 1.0 - tau * (n as f64 - 1.0);
    }
    a
}

/// Subsystem of the complete-graph network:
/// `x⁺ = (I − τL_i)x + 1 sin(0.1 x₁) + ν + τ 1 1ᵀ w + 1ζ`.
pub fn consensus_subsystem(subsystems: usize, ni: usize, tau: f64, noise_std: f64) -> Result<NonlinearSCS> {
    let n = subsystems * ni;
    let mut f = Vector::zeros(ni);
    f[0] = 0.1;
    let mut sys = NonlinearSCS::linear(
        consensus_block(n, ni, tau),
        Mat::identity(ni, ni),
        Mat::identity(ni, ni),
        Mat::from_element(ni, n - ni, tau),
        ones(ni, 1),
    )?
    .with_term(NonlinTerm::new(Vector::from_element(ni, 1.0), f, Phi::Sin, 0.0, 1.0))?;
    sys.noise_std = Vector::from_element(1, noise_std);
    Ok(sys)
}

/// Scalar reduction `x̂⁺ = 0.5x̂ + 0.1 sin(0.1x̂) + ν̂ + 0.001·1ᵀŵ + ζ`, `ŷ = 1x̂`.
pub fn reduced_subsystem(subsystems: usize, ni: usize, noise_std: f64) -> Result<NonlinearSCS> {
    let p = (subsystems - 1) * ni;
    let mut sys = NonlinearSCS::linear(
        Mat::from_element(1, 1, 0.5),
        Mat::from_element(1, 1, 1.0),
        ones(ni, 1),
        Mat::from_element(1, p, 0.001),
        Mat::from_element(1, 1, 1.0),
    )?
    .with_term(NonlinTerm::new(Vector::from_element(1, 0.1), Vector::from_element(1, 0.1), Phi::Sin, 0.0, 1.0))?;
    sys.noise_std = Vector::from_element(1, noise_std);
    Ok(sys)
}

/// Complete interconnection: every subsystem feeds all others with its whole output.
pub fn complete_graph(subsystems: Vec<NonlinearSCS>) -> Interconnection {
    let k = subsystems.len();
    let partitions = subsystems
        .iter()
        .enumerate()
        .map(|(j, s)| OutputPartition {
            blocks: (0..k).filter(|&i| i != j).map(|target| OutputBlock { target, rows: 0..s.q() }).collect(),
            external: 0..s.q(),
        })
        .collect();
    let inputs = (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|source| InputSlice { source, width: subsystems[source].q() }).collect())
        .collect();
    Interconnection { subsystems, partitions, inputs }
}

pub fn consensus_network(subsystems: usize, ni: usize, tau: f64, noise_std: f64) -> Result<Interconnection> {
    Ok(complete_graph((0..subsystems).map(|_| consensus_subsystem(subsystems, ni, tau, noise_std)).collect::<Result<_>>()?))
}

pub fn reduced_network(subsystems: usize, ni: usize, noise_std: f64) -> Result<Interconnection> {
    Ok(complete_graph((0..subsystems).map(|_| reduced_subsystem(subsystems, ni, noise_std)).collect::<Result<_>>()?))
}

/// Which `Q` to use in the reduction certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QChoice {
    /// `Q = −0.4·1`, as published for the 100-dimensional network.
    Published,
    /// `Q` solving `AP = PÂ − BQ` exactly for the given size.
    Exact,
}

/// Reduction certificate with `M = I`, `P = 1`, `L₁ = −1`, `L₂ = −0.1·1`,
/// `R̃ = 1`, `S = 0` and `K` placing `A + K = 0.001 I`.
pub fn consensus_certificate(subsystems: usize, ni: usize, tau: f64, q: QChoice) -> ReducedCertificate {
    let n = subsystems * ni;
    let a = consensus_block(n, ni, tau);
    let k = Mat::identity(ni, ni) * 0.001 - &a;
    let q_val = match q {
        QChoice::Published => -0.4,
        // A·1 = (1 − τ(n − n_i))·1
        QChoice::Exact => 0.5 - (1.0 - tau * (n - ni) as f64),
    };
    ReducedCertificate {
        m: Mat::identity(ni, ni),
        p: ones(ni, 1),
        k,
        q: ones(ni, 1) * q_val,
        s: Mat::zeros(ni, n - ni),
        l1: Vector::from_element(ni, -1.0),
        l2: Vector::from_element(ni, -0.1),
        r_tilde: ones(ni, 1),
    }
}

pub const CONSENSUS_TAU: f64 = 0.001;
pub const CONSENSUS_KAPPA_HAT: f64 = 0.003;
/// Finite stage on the scalar reduction: `M = 1`, `K = −0.49`, `κ̂ = 0.009`.
pub const REDUCED_FINITE_K: f64 = -0.49;
pub const REDUCED_FINITE_KAPPA_HAT: f64 = 0.009;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_interconnection;

    #[test]
    fn room_matches_closed_form() {
        let r = room(2, 0.0).unwrap();
        let x = Vector::from_element(1, 20.0);
        let nu = Vector::from_element(1, 0.3);
        let w = Vector::from_vec(vec![19.0, 21.0]);
        let m = r.mean(&x, &nu, &w).unwrap();
        let expect = (1.0 - 2.0 * ETA - BETA - GAMMA * 0.3) * 20.0 + GAMMA * T_HEATER * 0.3 + ETA * 40.0 + BETA * T_OUTSIDE;
        assert!((m[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn rings_validate() {
        for k in 1..=8 {
            let net = room_ring(k, 0.21).unwrap();
            let rep = validate_interconnection(&net);
            assert!(rep.pass, "ring {k}: {:?}", rep.issues);
        }
    }

    #[test]
    fn consensus_closed_loop() {
        let c = consensus_certificate(3, 5, CONSENSUS_TAU, QChoice::Exact);
        let s = consensus_subsystem(3, 5, CONSENSUS_TAU, 1.0).unwrap();
        let g = &s.a + &s.b * &c.k;
        assert!((g - Mat::identity(5, 5) * 0.001).amax() < 1e-15);
        assert!((c.q[(0, 0)] + 0.49).abs() < 1e-12);
        let c20 = consensus_certificate(20, 5, CONSENSUS_TAU, QChoice::Published);
        assert!((c20.k[(0, 0)] + 0.9).abs() < 1e-12 && (c20.k[(0, 1)] + 0.001).abs() < 1e-15);
        assert!(validate_interconnection(&consensus_network(3, 5, CONSENSUS_TAU, 1.0).unwrap()).pass);
        assert!(validate_interconnection(&reduced_network(3, 5, 1.0).unwrap()).pass);
    }
}
