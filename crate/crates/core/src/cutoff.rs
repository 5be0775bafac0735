//! C² plateau cutoffs built from the quintic smoothstep.

/// Quintic smoothstep on [0, 1], clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Equals 1 for r ≤ inner, 0 for r ≥ outer, smooth in between.
pub fn plateau(r: f64, inner: f64, outer: f64) -> f64 {
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        1.0 - smoothstep((r - inner) / (outer - inner))
    }
}

/// C^∞ step from 0 (x ≤ 0) to 1 (x ≥ 1).
pub fn smooth_step_infinite(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Radial plateau cutoff in |x|, one factor per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Plateau {
    pub inner: f64,
    pub outer: f64,
}

impl Plateau {
    pub fn new(inner: f64, outer: f64) -> Self {
        Plateau { inner, outer }
    }

    pub fn eval(&self, x: f64) -> f64 {
        plateau(x.abs(), self.inner, self.outer)
    }

    /// ∫_ℝ of the cutoff: the transition band contributes half its width on each side.
    pub fn mass(&self) -> f64 {
        2.0 * self.inner + (self.outer - self.inner)
    }

    pub fn breakpoints(&self) -> [f64; 2] {
        [self.inner, self.outer]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints_and_symmetry() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((smoothstep(x) + smoothstep(1.0 - x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn plateau_mass_matches_quadrature() {
        let p = Plateau::new(0.5, 1.5);
        let r = crate::quad::composite_legendre(&[-2.0, -1.5, -0.5, 0.5, 1.5, 2.0], 12);
        assert!((r.integrate(|x| p.eval(x)) - p.mass()).abs() < 1e-13);
        assert!((p.mass() - 2.0).abs() < 1e-15);
    }
}
