//! Marčenko–Pastur eigenvalue law for correlation matrices of independent,
//! unit-variance series with `Q = T / N > 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPastur {
    q: f64,
}

impl MarchenkoPastur {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::invalid(format!("Marchenko-Pastur ratio Q = T/N must exceed 1, got {q}")));
        }
        Ok(Self { q })
    }

    /// Law for a panel with `t` rows and `n` series.
    pub fn for_panel(t: usize, n: usize) -> Result<Self> {
        Self::new(t as f64 / n as f64)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Support `(λ-, λ+) = ((1 ∓ sqrt(1/Q))²)`.
    pub fn bounds(&self) -> (f64, f64) {
        let r = (1.0 / self.q).sqrt();
        ((1.0 - r).powi(2), (1.0 + r).powi(2))
    }

    pub fn density(&self, lambda: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if lambda <= lo || lambda >= hi {
            return 0.0;
        }
        self.q * ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * lambda)
    }

    /// Cumulative distribution. Integrates in the angle `φ` with
    /// `λ = λ- + (λ+ - λ-)(1 - cos φ)/2`, which removes the square-root
    /// endpoint singularities and leaves a smooth integrand for Simpson's rule.
    pub fn cdf(&self, lambda: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if lambda <= lo {
            return 0.0;
        }
        if lambda >= hi {
            return 1.0;
        }
        let half = (hi - lo) / 2.0;
        let phi_max = (1.0 - (lambda - lo) / half).clamp(-1.0, 1.0).acos();
        let f = |phi: f64| {
            let s = phi.sin();
            let l = lo + half * (1.0 - phi.cos());
            self.q * half * half * s * s / (2.0 * PI * l)
        };
        const STEPS: usize = 2048;
        let h = phi_max / STEPS as f64;
        let mut acc = f(0.0) + f(phi_max);
        for k in 1..STEPS {
            acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        (acc * h / 3.0).clamp(0.0, 1.0)
    }
}
