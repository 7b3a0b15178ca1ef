//! Small statistics toolkit shared by the protocol modules.

use serde::{Deserialize, Serialize};

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn new(value: f64, std_err: f64) -> Self {
        Self { value, std_err }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, std_err: 0.0 }
    }

    /// True when `target` lies within `k` standard errors of the estimate.
    pub fn within_sigma(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_err
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.value, self.std_err)
    }
}

/// Binomial rate `k / n` with standard error `sqrt(p(1-p)/n)`.
pub fn binomial_rate(k: u64, n: u64) -> Option<Estimate> {
    if n == 0 {
        return None;
    }
    let p = k as f64 / n as f64;
    Some(Estimate::new(p, (p * (1.0 - p) / n as f64).sqrt()))
}

/// Standard deviation of a binomial proportion with true probability `p`.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `a / (a + b)` for two independent rate estimates, with first-order error
/// propagation.
pub fn ratio_of_rates(a: Estimate, b: Estimate) -> Option<Estimate> {
    let total = a.value + b.value;
    if total <= 0.0 {
        return None;
    }
    let q = a.value / total;
    // dq/da = b / total², dq/db = -a / total²
    let da = b.value / (total * total);
    let db = a.value / (total * total);
    let err = ((da * a.std_err).powi(2) + (db * b.std_err).powi(2)).sqrt();
    Some(Estimate::new(q, err))
}

/// Least-squares fit of `y = offset + amplitude * cos(phase - phi0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phi0: f64,
    /// Fringe visibility `amplitude / offset`, clamped to [0, 1].
    pub visibility: Estimate,
}

/// Fits counts against phases. Needs at least three distinct phases; otherwise
/// falls back to the raw `(max - min) / (max + min)` contrast.
pub fn fit_sinusoid(phases: &[f64], counts: &[f64]) -> Option<SinusoidFit> {
    if phases.is_empty() || phases.len() != counts.len() {
        return None;
    }
    let mut distinct: Vec<f64> = phases
        .iter()
        .map(|p| p.rem_euclid(std::f64::consts::TAU))
        .collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 3 {
        let v = raw_contrast(counts);
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        return Some(SinusoidFit {
            offset: mean,
            amplitude: v * mean,
            phi0: 0.0,
            visibility: Estimate::exact(v),
        });
    }

    // Normal equations for the basis (1, cos, sin).
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (&phi, &y) in phases.iter().zip(counts) {
        let row = [1.0, phi.cos(), phi.sin()];
        for i in 0..3 {
            xty[i] += row[i] * y;
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let inv = invert3(&xtx)?;
    let beta: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|j| inv[i][j] * xty[j]).sum())
        .collect();
    let (c, a, b) = (beta[0], beta[1], beta[2]);

    let n = phases.len();
    let rss: f64 = phases
        .iter()
        .zip(counts)
        .map(|(&phi, &y)| {
            let r = y - (c + a * phi.cos() + b * phi.sin());
            r * r
        })
        .sum();
    let s2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };

    let r = (a * a + b * b).sqrt();
    let (v, v_err) = if c <= 0.0 {
        (0.0, 0.0)
    } else {
        let v = r / c;
        let grad = if r > 0.0 {
            [-r / (c * c), a / (r * c), b / (r * c)]
        } else {
            [0.0, 0.0, 0.0]
        };
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += grad[i] * s2 * inv[i][j] * grad[j];
            }
        }
        (v, var.max(0.0).sqrt())
    };

    Some(SinusoidFit {
        offset: c,
        amplitude: r,
        phi0: b.atan2(a),
        visibility: Estimate::new(v.clamp(0.0, 1.0), v_err),
    })
}

/// `(max - min) / (max + min)` of raw counts; zero for an all-zero series.
pub fn raw_contrast(counts: &[f64]) -> f64 {
    let max = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = counts.iter().copied().fold(f64::INFINITY, f64::min);
    let sum = max + min;
    if sum.is_nan() || sum <= 0.0 {
        return 0.0;
    }
    (max - min) / sum
}

#[allow(clippy::needless_range_loop)]
fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[i][j] = sign * minor / det;
        }
    }
    Some(inv)
}
