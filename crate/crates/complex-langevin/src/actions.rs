//! Complex actions, their drifts and the exact moments of e^{-S}.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionKind {
    /// S = (√λ/2) e^{iθ/2} q⁴
    Quartic { lambda: f64 },
    /// S = ω e^{iθ/2} q²
    Quadratic { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub theta: f64,
}

impl Action {
    pub fn quartic(lambda: f64, theta: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        check_theta(theta)?;
        Ok(Self { kind: ActionKind::Quartic { lambda }, theta })
    }

    pub fn quadratic(omega: f64, theta: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        check_theta(theta)?;
        Ok(Self { kind: ActionKind::Quadratic { omega }, theta })
    }

    /// e^{iθ/2}
    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, 0.5 * self.theta)
    }

    /// Complex coefficient of the leading power: α for the quartic, ω e^{iθ/2} for the quadratic.
    pub fn alpha(&self) -> Complex64 {
        match self.kind {
            ActionKind::Quartic { lambda } => 0.5 * lambda.sqrt() * self.phase(),
            ActionKind::Quadratic { omega } => omega * self.phase(),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.kind {
            ActionKind::Quartic { lambda } => Some(lambda),
            ActionKind::Quadratic { .. } => None,
        }
    }

    pub fn omega(&self) -> Option<f64> {
        match self.kind {
            ActionKind::Quadratic { omega } => Some(omega),
            ActionKind::Quartic { .. } => None,
        }
    }

    pub fn action(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ActionKind::Quartic { .. } => self.alpha() * z.powi(4),
            ActionKind::Quadratic { .. } => self.alpha() * z * z,
        }
    }

    /// −S′(z).
    pub fn drift(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ActionKind::Quartic { lambda } => -2.0 * lambda.sqrt() * self.phase() * z * z * z,
            ActionKind::Quadratic { omega } => -2.0 * omega * self.phase() * z,
        }
    }

    /// Real forces (F_x, F_y) written out in components.
    #[inline]
    pub fn force_components(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = (0.5 * self.theta).sin_cos();
        match self.kind {
            ActionKind::Quartic { lambda } => {
                let g = 2.0 * lambda.sqrt();
                let re3 = x * x * x - 3.0 * x * y * y;
                let im3 = 3.0 * x * x * y - y * y * y;
                (-g * (c * re3 - s * im3), -g * (c * im3 + s * re3))
            }
            ActionKind::Quadratic { omega } => {
                let g = 2.0 * omega;
                (-g * (c * x - s * y), -g * (c * y + s * x))
            }
        }
    }

    /// V_FP = S′²/4 − S″/2.
    pub fn fokker_planck_potential(&self, q: Complex64) -> Complex64 {
        let a = self.alpha();
        match self.kind {
            ActionKind::Quartic { .. } => {
                let s1 = 4.0 * a * q * q * q;
                let s2 = 12.0 * a * q * q;
                s1 * s1 / 4.0 - s2 / 2.0
            }
            ActionKind::Quadratic { .. } => {
                let s1 = 2.0 * a * q;
                s1 * s1 / 4.0 - a
            }
        }
    }

    /// ⟨q^p⟩ under the complex weight e^{−S}; only even p.
    pub fn boltzmann_moment(&self, p: usize) -> Result<Complex64> {
        if p % 2 == 1 {
            return Err(Error::OddMoment(p));
        }
        let a = self.alpha();
        Ok(match self.kind {
            ActionKind::Quartic { .. } => {
                let g = libm::tgamma((p as f64 + 1.0) / 4.0) / libm::tgamma(0.25);
                g * a.powf(-(p as f64) / 4.0)
            }
            ActionKind::Quadratic { .. } => gaussian_moment(p, a),
        })
    }
}

/// p!/(p/2)! · (1/(4a))^{p/2}
pub(crate) fn gaussian_moment(p: usize, a: Complex64) -> Complex64 {
    let h = p / 2;
    let mut ratio = 1.0;
    for k in (h + 1)..=p {
        ratio *= k as f64;
    }
    ratio * (4.0 * a).inv().powi(h as i32)
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..std::f64::consts::PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("theta must lie in [0, π), got {theta}")))
    }
}

/// Noise split with A_R − A_I = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    a_i: f64,
}

impl NoiseConfig {
    pub fn new(a_i: f64) -> Result<Self> {
        if !(a_i >= 0.0 && a_i.is_finite()) {
            return Err(Error::InvalidParameter(format!("A_I must be nonnegative, got {a_i}")));
        }
        Ok(Self { a_i })
    }

    pub fn a_i(&self) -> f64 {
        self.a_i
    }

    pub fn a_r(&self) -> f64 {
        self.a_i + 1.0
    }
}
