use std::fmt;

/// Three-way outcome of a certificate check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Satisfied,
    /// Holds only up to the numerical tolerance.
    Boundary,
    Violated,
}

impl Verdict {
    /// Classify a margin where `margin ≤ 0` means the condition holds.
    pub fn from_margin(margin: f64, tol: f64) -> Verdict {
        if margin < -tol {
            Verdict::Satisfied
        } else if margin <= tol {
            Verdict::Boundary
        } else {
            Verdict::Violated
        }
    }

    pub fn holds(self) -> bool {
        self != Verdict::Violated
    }

    /// The less favourable of two verdicts.
    pub fn worst(self, other: Verdict) -> Verdict {
        self.max(other)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Boundary => "boundary",
            Verdict::Violated => "violated",
        })
    }
}
