//! Mutual-information margins `m = I_AB − I_AE` for intercept-resend and
//! time-shift attacks.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("{name} = {value} is outside the formula's domain")]
    OutOfDomain { name: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, SecurityError>;

fn out(name: &'static str, value: f64) -> SecurityError {
    SecurityError::OutOfDomain { name, value }
}

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(out("x", x));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// `P_D1 · (1 − h(P_e1 / P_D1))`.
pub fn compute_m_ir(p_d1: f64, p_e1: f64) -> Result<f64> {
    if !(p_d1 > 0.0 && p_d1 <= 1.0) {
        return Err(out("p_d1", p_d1));
    }
    if !(0.0..=p_d1).contains(&p_e1) {
        return Err(out("p_e1", p_e1));
    }
    Ok(p_d1 * (1.0 - binary_entropy(p_e1 / p_d1)?))
}

/// `(1 − η)/(2η) · (P_D2 − P_e2)`.
pub fn delta_i_ae(eta: f64, p_d2: f64, p_e2: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(out("eta", eta));
    }
    if !(0.0..=1.0).contains(&p_d2) {
        return Err(out("p_d2", p_d2));
    }
    if !(p_e2 >= 0.0 && p_e2 <= p_d2) {
        return Err(out("p_e2", p_e2));
    }
    Ok((1.0 - eta) / (2.0 * eta) * (p_d2 - p_e2))
}

/// `m_IR − γ − ΔI_AE(η)`.
pub fn compute_m_ts(m_ir: f64, gamma: f64, eta: f64, p_d2: f64, p_e2: f64) -> Result<f64> {
    if !m_ir.is_finite() {
        return Err(out("m_ir", m_ir));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(out("gamma", gamma));
    }
    Ok(m_ir - gamma - delta_i_ae(eta, p_d2, p_e2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_edges() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn m_ir_edges() {
        assert_eq!(compute_m_ir(0.4, 0.0).unwrap(), 0.4);
        assert!(compute_m_ir(0.4, 0.2).unwrap().abs() < 1e-12);
        assert!(compute_m_ir(0.0, 0.0).is_err());
        assert!(compute_m_ir(0.4, 0.5).is_err());
    }

    #[test]
    fn m_ts_reduces_to_m_ir_for_ideal_detectors() {
        assert_eq!(compute_m_ts(0.2, 0.0, 1.0, 0.3, 0.1).unwrap(), 0.2);
        assert!(compute_m_ts(0.2, 0.5, 1.0, 0.3, 0.1).unwrap() < 0.0);
        assert!(compute_m_ts(0.2, 0.0, 0.0, 0.3, 0.1).is_err());
        assert!(compute_m_ts(0.2, 0.0, 0.5, 0.1, 0.3).is_err());
    }
}
