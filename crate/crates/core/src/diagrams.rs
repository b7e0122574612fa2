//! Equilibrium speed-density laws and the wave speeds derived from them.
//!
//! A [`FundamentalDiagram`] wraps one closed-form family `v*(ρ)` together with
//! its critical density `α` (where `λ*(α) = 0`) and the capacity `f*(α)`.
//! The unchecked evaluators ([`FundamentalDiagram::v`], [`FundamentalDiagram::flux`], ...)
//! are the hot-path API used by the solvers; `eval_*` variants validate the
//! density first.

use thiserror::Error;

use crate::num::Real;
use crate::roots;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagramError {
    #[error("density {rho} outside the valid domain (0, {rho_max}]")]
    Domain { rho: f64, rho_max: f64 },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("characteristic speed does not change sign on the domain")]
    NoSignChange,
    #[error("expected exactly two stability bounds, found {found}")]
    RootCount { found: usize },
}

/// Closed-form equilibrium speed laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family<T> {
    /// `v_f (1 - ρ/ρ_j)`
    Greenshields { v_f: T, rho_j: T },
    /// `v_f (1 - (ρ/ρ_j)^n)`
    Polynomial { v_f: T, rho_j: T, n: T },
    /// `v_0 ln(ρ_j/ρ)`
    Greenberg { v_0: T, rho_j: T },
    /// `v_f exp(-ρ/ρ_0)`, restricted to the concave range `(0, 2ρ_0]`.
    Underwood { v_f: T, rho_0: T },
    /// `v_f (1 - exp(|c_j|/v_f (1 - ρ_j/ρ)))`
    Newell { v_f: T, c_j: T, rho_j: T },
    /// `A [(1 + exp((ρ - ρ_0)/w))^-1 - offset]`
    KernerSigmoid {
        amplitude: T,
        rho_0: T,
        width: T,
        offset: T,
    },
}

/// Model whose characteristic speeds are requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveModel<T> {
    Lwr,
    Zhang,
    PayneWhitham { c0: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeeds<T> {
    pub lambda_star: T,
    pub sound_speed: T,
    pub lambda1: T,
    pub lambda2: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalDiagram<T> {
    family: Family<T>,
    rho_max: T,
    critical: T,
    capacity: T,
    phi_anchor: T,
}

impl<T: Real> FundamentalDiagram<T> {
    pub fn new(family: Family<T>) -> Result<Self, DiagramError> {
        fn positive<T: Real>(name: &'static str, x: T) -> Result<(), DiagramError> {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(DiagramError::InvalidParameter {
                    name,
                    value: x.to_f64().unwrap_or(f64::NAN),
                })
            }
        }
        let rho_max = match family {
            Family::Greenshields { v_f, rho_j } => {
                positive("v_f", v_f)?;
                positive("rho_j", rho_j)?;
                rho_j
            }
            Family::Polynomial { v_f, rho_j, n } => {
                positive("v_f", v_f)?;
                positive("rho_j", rho_j)?;
                positive("n", n)?;
                rho_j
            }
            Family::Greenberg { v_0, rho_j } => {
                positive("v_0", v_0)?;
                positive("rho_j", rho_j)?;
                rho_j
            }
            Family::Underwood { v_f, rho_0 } => {
                positive("v_f", v_f)?;
                positive("rho_0", rho_0)?;
                T::two() * rho_0
            }
            Family::Newell { v_f, c_j, rho_j } => {
                positive("v_f", v_f)?;
                positive("|c_j|", c_j.abs())?;
                positive("rho_j", rho_j)?;
                rho_j
            }
            Family::KernerSigmoid {
                amplitude,
                rho_0,
                width,
                offset,
            } => {
                positive("amplitude", amplitude)?;
                positive("rho_0", rho_0)?;
                positive("width", width)?;
                positive("offset", offset)?;
                if offset >= T::half() {
                    return Err(DiagramError::InvalidParameter {
                        name: "offset",
                        value: offset.to_f64().unwrap_or(f64::NAN),
                    });
                }
                rho_0 + width * (T::one() / offset - T::one()).ln()
            }
        };
        let mut fd = FundamentalDiagram {
            family,
            rho_max,
            critical: T::zero(),
            capacity: T::zero(),
            phi_anchor: rho_max * T::half(),
        };
        fd.critical = critical_density(&fd)?;
        fd.capacity = fd.flux(fd.critical);
        Ok(fd)
    }

    pub fn greenshields(v_f: T, rho_j: T) -> Result<Self, DiagramError> {
        Self::new(Family::Greenshields { v_f, rho_j })
    }

    pub fn newell(v_f: T, c_j: T, rho_j: T) -> Result<Self, DiagramError> {
        Self::new(Family::Newell { v_f, c_j, rho_j })
    }

    /// Newell's law with `v_f = |c_j| = ρ_j = 1`: `v*(ρ) = 1 - exp(1 - 1/ρ)`.
    pub fn newell_normalized() -> Self {
        Self::new(Family::Newell {
            v_f: T::one(),
            c_j: -T::one(),
            rho_j: T::one(),
        })
        .expect("normalized Newell parameters are valid")
    }

    /// Kerner–Konhäuser sigmoid in units of l and τ, jam density close to 1.
    pub fn kerner() -> Self {
        Self::new(Family::KernerSigmoid {
            amplitude: T::lit(5.0461),
            rho_0: T::lit(0.25),
            width: T::lit(0.06),
            offset: T::lit(3.72e-6),
        })
        .expect("Kerner parameters are valid")
    }

    /// Moves the lower limit of the numeric `φ` quadrature (sigmoid family only).
    pub fn with_phi_anchor(mut self, rho: T) -> Self {
        self.phi_anchor = rho;
        self
    }

    pub fn family(&self) -> Family<T> {
        self.family
    }

    /// Upper end of the valid density domain.
    pub fn rho_max(&self) -> T {
        self.rho_max
    }

    /// Density `α` with `λ*(α) = 0`.
    pub fn critical_density(&self) -> T {
        self.critical
    }

    /// `f*(α)`, the maximum equilibrium flow.
    pub fn capacity(&self) -> T {
        self.capacity
    }

    /// Free-flow limit `v*(0⁺)`, infinite for Greenberg.
    pub fn free_speed(&self) -> T {
        self.v(T::zero())
    }

    pub fn check(&self, rho: T) -> Result<(), DiagramError> {
        let at_zero_ok = !matches!(self.family, Family::Greenberg { .. });
        let ok = if at_zero_ok {
            rho >= T::zero()
        } else {
            rho > T::zero()
        };
        if ok && rho <= self.rho_max {
            Ok(())
        } else {
            Err(DiagramError::Domain {
                rho: rho.to_f64().unwrap_or(f64::NAN),
                rho_max: self.rho_max.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    /// Equilibrium speed `v*(ρ)`.
    pub fn v(&self, rho: T) -> T {
        let one = T::one();
        match self.family {
            Family::Greenshields { v_f, rho_j } => v_f * (one - rho / rho_j),
            Family::Polynomial { v_f, rho_j, n } => v_f * (one - (rho / rho_j).powf(n)),
            Family::Greenberg { v_0, rho_j } => v_0 * (rho_j / rho).ln(),
            Family::Underwood { v_f, rho_0 } => v_f * (-rho / rho_0).exp(),
            Family::Newell { v_f, c_j, rho_j } => {
                if rho <= T::zero() {
                    return v_f;
                }
                let e = c_j.abs() / v_f * (one - rho_j / rho);
                -v_f * e.exp_m1()
            }
            Family::KernerSigmoid {
                amplitude,
                rho_0,
                width,
                offset,
            } => amplitude * (one / (one + ((rho - rho_0) / width).exp()) - offset),
        }
    }

    /// `dv*/dρ` in closed form.
    pub fn dv(&self, rho: T) -> T {
        let one = T::one();
        match self.family {
            Family::Greenshields { v_f, rho_j } => -v_f / rho_j,
            Family::Polynomial { v_f, rho_j, n } => {
                if rho <= T::zero() {
                    return if n == one { -v_f / rho_j } else { T::zero() };
                }
                -v_f * n * (rho / rho_j).powf(n - one) / rho_j
            }
            Family::Greenberg { v_0, .. } => -v_0 / rho,
            Family::Underwood { v_f, rho_0 } => -v_f / rho_0 * (-rho / rho_0).exp(),
            Family::Newell { v_f, c_j, rho_j } => {
                if rho <= T::zero() {
                    return T::zero();
                }
                let k = c_j.abs() / v_f;
                let ex = (k * (one - rho_j / rho)).exp();
                if ex == T::zero() {
                    return T::zero();
                }
                -c_j.abs() * rho_j / (rho * rho) * ex
            }
            Family::KernerSigmoid {
                amplitude,
                rho_0,
                width,
                ..
            } => {
                // e^z/(1+e^z)^2 written in a form that cannot overflow.
                let z = (rho - rho_0) / width;
                let e = (-z.abs()).exp();
                -amplitude / width * e / ((one + e) * (one + e))
            }
        }
    }

    /// Equilibrium flow `f*(ρ) = ρ v*(ρ)`.
    pub fn flux(&self, rho: T) -> T {
        if rho <= T::zero() {
            return T::zero();
        }
        rho * self.v(rho)
    }

    /// Sub-characteristic speed `λ*(ρ) = v* + ρ v*'`.
    pub fn lambda(&self, rho: T) -> T {
        if rho <= T::zero() {
            return self.v(T::zero());
        }
        self.v(rho) + rho * self.dv(rho)
    }

    /// Zhang velocity flux `φ`, with `φ' = ρ (v*')²`.
    pub fn phi(&self, rho: T) -> T {
        let one = T::one();
        let two = T::two();
        match self.family {
            Family::Greenshields { v_f, rho_j } => v_f * v_f * rho * rho / (two * rho_j * rho_j),
            Family::Polynomial { v_f, rho_j, n } => {
                n * v_f * v_f / two * (rho / rho_j).powf(two * n)
            }
            Family::Greenberg { v_0, .. } => v_0 * v_0 * rho.ln(),
            Family::Underwood { v_f, rho_0 } => {
                let u = rho / rho_0;
                -v_f * v_f / T::lit(4.0) * (one + two * u) * (-two * u).exp()
            }
            Family::Newell { v_f, c_j, rho_j } => {
                if rho <= T::zero() {
                    return T::zero();
                }
                let k = c_j.abs() / v_f;
                let e = k * (one - rho_j / rho);
                v_f * v_f / two * (rho_j * k / rho + T::half()) * (two * e).exp()
            }
            Family::KernerSigmoid { .. } => {
                let dphi = |r: T| {
                    let d = self.dv(r);
                    r * d * d
                };
                adaptive_simpson(&dphi, self.phi_anchor, rho, T::lit(1e-13))
            }
        }
    }

    /// `v*(ρ)` with domain checking.
    pub fn eval_v_star(&self, rho: T) -> Result<T, DiagramError> {
        self.check(rho)?;
        Ok(self.v(rho))
    }

    /// `f*(ρ)` with domain checking.
    pub fn eval_f_star(&self, rho: T) -> Result<T, DiagramError> {
        self.check(rho)?;
        Ok(self.flux(rho))
    }

    /// Velocity flux for a second-order model: the family `φ` for Zhang, `c0² ρ` for PW.
    pub fn velocity_flux_phi(&self, rho: T, model: WaveModel<T>) -> Result<T, DiagramError> {
        self.check(rho)?;
        Ok(match model {
            WaveModel::PayneWhitham { c0 } => c0 * c0 * rho,
            _ => self.phi(rho),
        })
    }

    pub fn wave_speeds(
        &self,
        rho: T,
        v: T,
        model: WaveModel<T>,
    ) -> Result<WaveSpeeds<T>, DiagramError> {
        self.check(rho)?;
        let lambda_star = self.lambda(rho);
        Ok(match model {
            WaveModel::Lwr => WaveSpeeds {
                lambda_star,
                sound_speed: T::zero(),
                lambda1: lambda_star,
                lambda2: lambda_star,
            },
            WaveModel::Zhang => {
                let c = -rho * self.dv(rho);
                WaveSpeeds {
                    lambda_star,
                    sound_speed: c,
                    lambda1: v - c,
                    lambda2: v + c,
                }
            }
            WaveModel::PayneWhitham { c0 } => WaveSpeeds {
                lambda_star,
                sound_speed: c0,
                lambda1: v - c0,
                lambda2: v + c0,
            },
        })
    }

    /// Densities bounding the band where `ρ v*'(ρ) + c0 < 0` (PW linear instability).
    pub fn pw_stability_bounds(&self, c0: T) -> Result<(T, T), DiagramError> {
        let g = |r: T| r * self.dv(r) + c0;
        let samples = 4000;
        let h = self.rho_max / T::from_usize(samples).unwrap();
        let mut brackets = Vec::new();
        let mut prev = g(h);
        for i in 2..=samples {
            let r = h * T::from_usize(i).unwrap();
            let cur = g(r);
            if prev.signum() != cur.signum() {
                brackets.push((r - h, r));
            }
            prev = cur;
        }
        if brackets.len() != 2 {
            return Err(DiagramError::RootCount {
                found: brackets.len(),
            });
        }
        let solve = |(a, b): (T, T)| {
            roots::bracketed(g, a, b, T::zero()).map_err(|_| DiagramError::NoSignChange)
        };
        Ok((solve(brackets[0])?, solve(brackets[1])?))
    }
}

/// Root of `λ*` on the open domain, by bracketed bisection and secant steps.
pub fn critical_density<T: Real>(fd: &FundamentalDiagram<T>) -> Result<T, DiagramError> {
    let lo = fd.rho_max * T::lit(1e-9);
    let hi = fd.rho_max;
    roots::bracketed(|r| fd.lambda(r), lo, hi, T::zero()).map_err(|_| DiagramError::NoSignChange)
}

fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
        (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<T: Real, F: Fn(T) -> T>(
        f: &F,
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: u32,
    ) -> T {
        let m = (a + b) * T::half();
        let lm = (a + m) * T::half();
        let rm = (m + b) * T::half();
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= T::lit(15.0) * tol {
            return left + right + diff / T::lit(15.0);
        }
        recurse(f, a, m, fa, flm, fm, left, tol * T::half(), depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol * T::half(), depth - 1)
    }
    if a == b {
        return T::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f((a + b) * T::half());
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_newell_closed_form() {
        let fd = FundamentalDiagram::<f64>::newell_normalized();
        for &r in &[0.1f64, 0.3, 0.5, 0.9, 1.0] {
            let expect = 1.0 - (1.0 - 1.0 / r).exp();
            assert!((fd.v(r) - expect).abs() < 1e-15);
            let lam = 1.0 - (1.0 + 1.0 / r) * (1.0 - 1.0 / r).exp();
            assert!((fd.lambda(r) - lam).abs() < 1e-14);
        }
        assert_eq!(fd.v(0.0), 1.0);
        assert_eq!(fd.v(1.0), 0.0);
        assert_eq!(fd.flux(1.0), 0.0);
    }

    #[test]
    fn newell_dimensional_flow() {
        let fd = FundamentalDiagram::<f64>::newell(60.0, -10.0, 250.0).unwrap();
        let f = fd.eval_f_star(60.0).unwrap();
        assert!((f - 1476.0).abs() < 0.5, "{f}");
    }

    #[test]
    fn domain_errors() {
        let fd = FundamentalDiagram::<f64>::newell_normalized();
        assert!(fd.eval_v_star(-0.1).is_err());
        assert!(fd.eval_v_star(1.1).is_err());
        let gb = FundamentalDiagram::<f64>::new(Family::Greenberg {
            v_0: 1.0,
            rho_j: 1.0,
        })
        .unwrap();
        assert!(gb.eval_v_star(0.0).is_err());
    }

    #[test]
    fn greenshields_values() {
        let fd = FundamentalDiagram::<f64>::greenshields(1.0, 1.0).unwrap();
        assert!((fd.critical_density() - 0.5).abs() < 1e-12);
        assert!((fd.phi(1.0) - 0.5).abs() < 1e-15);
        let pw = WaveModel::PayneWhitham { c0: 2.0 };
        assert_eq!(fd.velocity_flux_phi(0.75, pw).unwrap(), 2.0 * 2.0 * 0.75);
    }

    #[test]
    fn pw_lambda1_zero_at_sound_speed() {
        let fd = FundamentalDiagram::<f64>::kerner();
        let ws = fd
            .wave_speeds(0.2, 2.5, WaveModel::PayneWhitham { c0: 2.5 })
            .unwrap();
        assert_eq!(ws.lambda1, 0.0);
    }

    #[test]
    fn kerner_stability_bounds() {
        let fd = FundamentalDiagram::<f64>::kerner();
        let (a, b) = fd.pw_stability_bounds(2.48445).unwrap();
        assert!((a - 0.173).abs() < 0.002, "{a}");
        assert!((b - 0.396).abs() < 0.002, "{b}");
        assert!(matches!(
            fd.pw_stability_bounds(1e6),
            Err(DiagramError::RootCount { found: 0 })
        ));
    }

    #[test]
    fn f32_evaluation() {
        let fd = FundamentalDiagram::<f32>::newell_normalized();
        let a = fd.critical_density();
        assert!(fd.lambda(a).abs() < 1e-5);
    }
}
