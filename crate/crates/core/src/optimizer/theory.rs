use crate::error::{Error, Result};

/// Multipliers for the recommended batch schedule. `gamma` switches on the
/// discount-dependent scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub gamma: Option<f64>,
}

impl Default for BatchConstants {
    fn default() -> Self {
        Self { c0: 1.0, c1: 1.0, c2: 1.0, c3: 1.0, gamma: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSchedule {
    pub n: usize,
    pub b: usize,
    pub m: usize,
    pub s: usize,
}

// ceil that does not round 100000.00000000001 up to 100001
fn tolerant_ceil(x: f64) -> usize {
    let c = (x * (1.0 - 1e-12)).ceil();
    c.max(1.0) as usize
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidInput(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

/// Batch sizes, epoch length and epoch count for target accuracy `epsilon`.
pub fn recommended_batches(epsilon: f64, constants: &BatchConstants) -> Result<BatchSchedule> {
    check_positive("epsilon", epsilon)?;
    for (name, c) in [("c0", constants.c0), ("c1", constants.c1), ("c2", constants.c2), ("c3", constants.c3)] {
        check_positive(name, c)?;
    }
    let (fn_, fb, fm) = match constants.gamma {
        Some(g) => {
            check_gamma(g)?;
            let q = 1.0 - g;
            (q.powi(-3), q.recip(), q.powi(-2))
        }
        None => (1.0, 1.0, 1.0),
    };
    let root = epsilon.sqrt();
    Ok(BatchSchedule {
        n: tolerant_ceil(constants.c0 / epsilon * fn_),
        b: tolerant_ceil(constants.c1 / root * fb),
        m: tolerant_ceil(constants.c2 / root * fm),
        s: tolerant_ceil(constants.c3 / root),
    })
}

/// Smoothness constant L and gradient bound C_g from the score bounds
/// `‖∇log π‖ ≤ g_bound`, `‖∇²log π‖ ≤ m_bound` and reward bound `r_bound`.
pub fn smoothness_constants(g_bound: f64, m_bound: f64, r_bound: f64, gamma: f64) -> Result<(f64, f64)> {
    check_positive("G", g_bound)?;
    check_positive("M", m_bound)?;
    check_positive("R", r_bound)?;
    check_gamma(gamma)?;
    let q = 1.0 - gamma;
    let l = m_bound * r_bound / q.powi(2) + 2.0 * g_bound * g_bound * r_bound / q.powi(3);
    let cg = g_bound * r_bound / q.powi(2);
    Ok((l, cg))
}

/// η = 1/(4L).
pub fn theoretical_step_size(l: f64) -> Result<f64> {
    check_positive("L", l)?;
    Ok(0.25 / l)
}

/// Upper bound on the PGT variance for a Gaussian policy with bounded
/// features over horizon `h`.
pub fn variance_bound_gaussian(r_bound: f64, m_phi: f64, sigma: f64, gamma: f64, h: usize) -> Result<f64> {
    check_positive("R", r_bound)?;
    check_positive("M_phi", m_phi)?;
    check_positive("sigma", sigma)?;
    check_gamma(gamma)?;
    let q = 1.0 - gamma;
    let hf = h as f64;
    let gh = gamma.powi(h as i32);
    let g2h = gh * gh;
    let bracket = (1.0 - g2h) / (1.0 - gamma * gamma) + hf * g2h - 2.0 * gh * (1.0 - gh) / q;
    let scale = r_bound * r_bound * m_phi * m_phi / (q * q * sigma * sigma);
    Ok(scale * bracket.max(0.0))
}
