//! Redescending robust losses, their IRLS weights, and the annealing schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::scalar::Real;

/// Robust scale used by the production pipeline.
pub const DEFAULT_CAUCHY_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    Cauchy,
    Welsch,
    Tukey,
    /// Truncated least squares (hard threshold).
    Tls,
}

impl LossFamily {
    pub const ALL: [LossFamily; 4] = [Self::Cauchy, Self::Welsch, Self::Tls, Self::Tukey];

    /// `psi(r) / r` at scale `s`.
    pub fn weight<T: Real>(self, r: T, s: T) -> T {
        let x = r / s;
        let x2 = x * x;
        match self {
            Self::Cauchy => T::one() / (T::one() + x2),
            Self::Welsch => (-x2).exp(),
            Self::Tukey => {
                let u = (T::one() - x2).max(T::zero());
                u * u
            }
            Self::Tls => {
                if r.abs() < s {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `rho(r)` at scale `s`, normalized so that `rho'(r) = psi(r)`.
    pub fn rho<T: Real>(self, r: T, s: T) -> T {
        let half = T::lit(0.5);
        let x2 = (r / s) * (r / s);
        let s2 = s * s;
        match self {
            Self::Cauchy => half * s2 * x2.ln_1p(),
            Self::Welsch => half * s2 * (T::one() - (-x2).exp()),
            Self::Tukey => {
                let u = (T::one() - x2).max(T::zero());
                s2 / T::lit(6.0) * (T::one() - u * u * u)
            }
            Self::Tls => half * (r * r).min(s2),
        }
    }

    /// Clean-window lower slope `m(a)`: the infimum of `psi(r)/r` over `|r| <= a s`.
    pub fn window_slope(self, a: f64) -> f64 {
        match self {
            Self::Cauchy => 1.0 / (1.0 + a * a),
            Self::Welsch => (-a * a).exp(),
            Self::Tukey => (1.0 - a * a).max(0.0).powi(2),
            Self::Tls => {
                if a <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Maximum score `K = sup |psi(r)| / s`.
    pub fn max_score(self) -> f64 {
        match self {
            Self::Cauchy => 0.5,
            Self::Welsch => 1.0 / (2.0 * std::f64::consts::E).sqrt(),
            Self::Tukey => 16.0 / (25.0 * 5f64.sqrt()),
            Self::Tls => 1.0,
        }
    }

    /// Window parameter maximizing `a m(a) / (2K)`; for the hard threshold
    /// this is the limit `a -> 1`.
    pub fn default_window(self) -> f64 {
        match self {
            Self::Cauchy => 1.0,
            Self::Welsch => std::f64::consts::FRAC_1_SQRT_2,
            Self::Tukey => 1.0 / 5f64.sqrt(),
            Self::Tls => 1.0,
        }
    }

    /// `a m(a) / (2K)`.
    pub fn profile_margin(self, a: f64) -> f64 {
        a * self.window_slope(a) / (2.0 * self.max_score())
    }
}

impl std::str::FromStr for LossFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cauchy" => Ok(Self::Cauchy),
            "welsch" => Ok(Self::Welsch),
            "tukey" => Ok(Self::Tukey),
            "tls" => Ok(Self::Tls),
            other => Err(format!("unknown loss `{other}` (expected cauchy|welsch|tukey|tls)")),
        }
    }
}

/// Geometric annealing: stage `k` runs at `sigma0 * tau^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    /// Starting scale; `None` means the largest residual of the initial iterate.
    pub sigma0: Option<f64>,
    pub tau: f64,
    pub window: f64,
    pub stages: usize,
    /// Smallest scale; the schedule ends once it is reached.
    #[serde(default)]
    pub floor: Option<f64>,
}

impl AnnealSchedule {
    /// Stage scales starting from `sigma0`.
    pub fn scales(&self, sigma0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.stages);
        let mut sigma = sigma0;
        for _ in 0..self.stages {
            match self.floor {
                Some(f) if sigma <= f => {
                    out.push(f);
                    break;
                }
                _ => out.push(sigma),
            }
            sigma *= self.tau;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub family: LossFamily,
    pub scale: f64,
    pub schedule: Option<AnnealSchedule>,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::cauchy(DEFAULT_CAUCHY_SCALE)
    }
}

impl LossSpec {
    pub fn cauchy(scale: f64) -> Self {
        Self { family: LossFamily::Cauchy, scale, schedule: None }
    }

    pub fn annealed(family: LossFamily, tau: f64, stages: usize) -> Self {
        Self {
            family,
            scale: DEFAULT_CAUCHY_SCALE,
            schedule: Some(AnnealSchedule {
                sigma0: None,
                tau,
                window: family.default_window(),
                stages,
                floor: None,
            }),
        }
    }

    pub fn weight<T: Real>(&self, r: T) -> T {
        self.family.weight(r, T::lit(self.scale))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(TripError::InvalidParameter(format!("loss scale must be positive, got {}", self.scale)));
        }
        if let Some(s) = &self.schedule {
            if !(s.tau > 0.0 && s.tau < 1.0) {
                return Err(TripError::InvalidParameter(format!("tau must lie in (0,1), got {}", s.tau)));
            }
            if s.stages == 0 {
                return Err(TripError::InvalidParameter("at least one annealing stage required".into()));
            }
            if let Some(s0) = s.sigma0 {
                if !(s0 > 0.0 && s0.is_finite()) {
                    return Err(TripError::InvalidParameter(format!("sigma0 must be positive, got {s0}")));
                }
            }
            if !(s.window > 0.0) {
                return Err(TripError::InvalidParameter("window parameter must be positive".into()));
            }
        }
        Ok(())
    }
}

/// The free function form of [`LossSpec::weight`].
pub fn loss_weight<T: Real>(residual: T, spec: &LossSpec) -> T {
    spec.weight(residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let c = LossSpec::cauchy(0.1);
        assert_eq!(loss_weight(0.0, &c), 1.0);
        assert!((loss_weight(0.1f64, &c) - 0.5).abs() < 1e-15);
        let w = LossSpec { family: LossFamily::Welsch, scale: 1.0, schedule: None };
        assert!((loss_weight(1.0f64, &w) - 0.367_879_441_171_442_3).abs() < 1e-12);
        assert_eq!(LossFamily::Tls.weight(0.5, 1.0), 1.0);
        assert_eq!(LossFamily::Tls.weight(1.5, 1.0), 0.0);
        assert_eq!(LossFamily::Tukey.weight(2.0, 1.0), 0.0);
        assert!((LossFamily::Tukey.weight(0.5f64, 1.0) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn weights_lie_in_unit_interval() {
        for fam in LossFamily::ALL {
            for k in 0..200 {
                let r = k as f64 * 0.013;
                let w = fam.weight(r, 0.3);
                assert!((0.0..=1.0).contains(&w));
            }
        }
    }

    #[test]
    fn rho_derivative_is_score() {
        // Central differences against psi(r) = r * weight(r).
        for fam in LossFamily::ALL {
            for &r in &[0.05, 0.2, 0.45, 0.8, 1.7] {
                let s = 0.6;
                if fam == LossFamily::Tls && (r - s as f64).abs() < 1e-3 {
                    continue;
                }
                let h = 1e-6;
                let fd = (fam.rho(r + h, s) - fam.rho(r - h, s)) / (2.0 * h);
                assert!((fd - r * fam.weight(r, s)).abs() < 1e-7, "{fam:?} at {r}");
            }
        }
    }

    #[test]
    fn max_score_is_supremum_of_psi() {
        // Dense scan oracle for K = sup_x x w(x) at unit scale.
        for fam in LossFamily::ALL {
            let scan = (0..200_000)
                .map(|k| k as f64 * 1e-5)
                .map(|x| x * fam.weight(x, 1.0))
                .fold(0.0, f64::max);
            assert!((scan - fam.max_score()).abs() < 2e-5, "{fam:?}: {scan}");
        }
    }

    #[test]
    fn profile_margin_is_one_half_at_default_window() {
        for fam in LossFamily::ALL {
            let h = fam.profile_margin(fam.default_window());
            assert!((h - 0.5).abs() < 1e-12, "{fam:?}: {h}");
            // And that window maximizes the margin (scan oracle).
            let best = (1..1000)
                .map(|k| k as f64 * 1e-3)
                .map(|a| fam.profile_margin(a))
                .fold(0.0, f64::max);
            assert!(best <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn validation() {
        assert!(LossSpec::cauchy(0.0).validate().is_err());
        let mut s = LossSpec::annealed(LossFamily::Cauchy, 0.5, 20);
        assert!(s.validate().is_ok());
        s.schedule.as_mut().unwrap().tau = 1.0;
        assert!(s.validate().is_err());
    }
}
