//! Riemann solvers for the two second-order models.
//!
//! Both models carry `(ρ, v)` and relax `v` toward `v*(ρ)` with time scale `τ`.
//! Zhang's model uses the velocity flux `φ` with `φ' = ρ (v*')²`; Payne–Whitham
//! uses `φ = c₀² ρ`. A Riemann solution is a 1-wave followed by a 2-wave, each
//! a shock (H) or rarefaction (R), separated by an intermediate state `U_m`.
//!
//! The intermediate density solves `g(ρ_m) = v₁(ρ_m) − v₂(ρ_m) = 0`, where `v₁`
//! is the forward 1-wave curve through `U_l` and `v₂` the backward 2-wave curve
//! through `U_r`. `g` is strictly decreasing, so the location of its root
//! relative to `ρ_l` and `ρ_r` selects the wave pattern.

use thiserror::Error;

use crate::diagrams::FundamentalDiagram;
use crate::num::Real;
use crate::roots;

/// Tolerance for deciding that the right state lies on a single wave curve.
pub const CURVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiemannError {
    #[error("vacuum: no admissible intermediate density between ({rho_l}, {v_l}) and ({rho_r}, {v_r})")]
    Vacuum {
        rho_l: f64,
        v_l: f64,
        rho_r: f64,
        v_r: f64,
    },
    #[error("intermediate density above the valid domain between ({rho_l}, {v_l}) and ({rho_r}, {v_r})")]
    AboveDomain {
        rho_l: f64,
        v_l: f64,
        rho_r: f64,
        v_r: f64,
    },
    #[error("negative radicand {radicand} on the shock locus")]
    NegativeRadicand { radicand: f64 },
    #[error("state with non-positive density {rho}")]
    InvalidState { rho: f64 },
}

/// Rarefaction curves used for Payne–Whitham.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwCurves {
    /// `v − v*(ρ)` constant across rarefactions, as for Zhang's model.
    AsPrinted,
    /// Integral curves `v ± c₀ ln ρ = const` of the isothermal system, with the
    /// exact Rankine–Hugoniot locus.
    Isothermal,
}

impl Default for PwCurves {
    fn default() -> Self {
        if cfg!(feature = "pw-curves-isothermal") {
            PwCurves::Isothermal
        } else {
            PwCurves::AsPrinted
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind<T> {
    Zhang,
    PayneWhitham { c0: T, curves: PwCurves },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelVariant<T> {
    pub kind: ModelKind<T>,
    pub fd: FundamentalDiagram<T>,
    pub tau: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State2<T> {
    pub rho: T,
    pub v: T,
}

impl<T: Real> State2<T> {
    pub fn new(rho: T, v: T) -> Self {
        Self { rho, v }
    }

    pub fn m(&self) -> T {
        self.rho * self.v
    }

    fn midpoint(self, other: Self) -> Self {
        Self::new(
            (self.rho + other.rho) * T::half(),
            (self.v + other.v) * T::half(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    H1,
    H2,
    R1,
    R2,
    R1R2,
    R1H2,
    H1H2,
    H1R2,
}

impl Pattern {
    pub fn name(&self) -> &'static str {
        match self {
            Pattern::H1 => "H1",
            Pattern::H2 => "H2",
            Pattern::R1 => "R1",
            Pattern::R2 => "R2",
            Pattern::R1R2 => "R1R2",
            Pattern::R1H2 => "R1H2",
            Pattern::H1H2 => "H1H2",
            Pattern::H1R2 => "H1R2",
        }
    }

    fn first_is_shock(&self) -> Option<bool> {
        match self {
            Pattern::H1 | Pattern::H1H2 | Pattern::H1R2 => Some(true),
            Pattern::R1 | Pattern::R1R2 | Pattern::R1H2 => Some(false),
            Pattern::H2 | Pattern::R2 => None,
        }
    }

    fn second_is_shock(&self) -> Option<bool> {
        match self {
            Pattern::H2 | Pattern::R1H2 | Pattern::H1H2 => Some(true),
            Pattern::R2 | Pattern::R1R2 | Pattern::H1R2 => Some(false),
            Pattern::H1 | Pattern::R1 => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePattern2<T> {
    pub pattern: Pattern,
    pub left: State2<T>,
    pub right: State2<T>,
    pub intermediate: Option<State2<T>>,
    pub boundary_avg: State2<T>,
}

impl<T: Real> WavePattern2<T> {
    /// State between the two waves (the right state for single waves).
    pub fn middle(&self) -> State2<T> {
        match self.pattern {
            Pattern::H1 | Pattern::R1 => self.right,
            Pattern::H2 | Pattern::R2 => self.left,
            _ => self.intermediate.unwrap_or(self.right),
        }
    }

    /// Speed range `(min, max)` of each wave, left to right.
    pub fn wave_speeds(&self, model: &ModelVariant<T>) -> Vec<(T, T)> {
        let mid = self.middle();
        let mut out = Vec::with_capacity(2);
        if let Some(shock) = self.pattern.first_is_shock() {
            if shock {
                let s = shock_speed(self.left, mid);
                out.push((s, s));
            } else {
                out.push((model.lambda1(self.left), model.lambda1(mid)));
            }
        }
        if let Some(shock) = self.pattern.second_is_shock() {
            if shock {
                let s = shock_speed(mid, self.right);
                out.push((s, s));
            } else {
                out.push((model.lambda2(mid), model.lambda2(self.right)));
            }
        }
        out
    }
}

/// Mass-conserving shock speed `[ρv]/[ρ]`.
pub fn shock_speed<T: Real>(l: State2<T>, r: State2<T>) -> T {
    let d = r.rho - l.rho;
    if d == T::zero() {
        return (l.v + r.v) * T::half();
    }
    (r.m() - l.m()) / d
}

impl<T: Real> ModelVariant<T> {
    pub fn zhang(fd: FundamentalDiagram<T>, tau: T) -> Self {
        Self {
            kind: ModelKind::Zhang,
            fd,
            tau,
        }
    }

    pub fn payne_whitham(fd: FundamentalDiagram<T>, c0: T, tau: T) -> Self {
        Self {
            kind: ModelKind::PayneWhitham {
                c0,
                curves: PwCurves::default(),
            },
            fd,
            tau,
        }
    }

    pub fn with_curves(mut self, curves: PwCurves) -> Self {
        if let ModelKind::PayneWhitham { c0, .. } = self.kind {
            self.kind = ModelKind::PayneWhitham { c0, curves };
        }
        self
    }

    fn isothermal(&self) -> Option<T> {
        match self.kind {
            ModelKind::PayneWhitham {
                c0,
                curves: PwCurves::Isothermal,
            } => Some(c0),
            _ => None,
        }
    }

    /// Velocity flux.
    pub fn phi(&self, rho: T) -> T {
        match self.kind {
            ModelKind::Zhang => self.fd.phi(rho),
            ModelKind::PayneWhitham { c0, .. } => c0 * c0 * rho,
        }
    }

    pub fn lambda1(&self, u: State2<T>) -> T {
        match self.kind {
            ModelKind::Zhang => u.v + u.rho * self.fd.dv(u.rho),
            ModelKind::PayneWhitham { c0, .. } => u.v - c0,
        }
    }

    pub fn lambda2(&self, u: State2<T>) -> T {
        match self.kind {
            ModelKind::Zhang => u.v - u.rho * self.fd.dv(u.rho),
            ModelKind::PayneWhitham { c0, .. } => u.v + c0,
        }
    }

    /// Relaxation source `(v*(ρ) − v)/τ` of the velocity equation.
    pub fn relaxation(&self, u: State2<T>) -> T {
        (self.fd.v(u.rho) - u.v) / self.tau
    }

    fn shock_radicand(&self, a: T, b: T) -> T {
        let num = (a - b) * (self.phi(a) - self.phi(b));
        match self.kind {
            ModelKind::Zhang => T::two() * num / (a + b),
            ModelKind::PayneWhitham {
                curves: PwCurves::AsPrinted,
                ..
            } => T::two() * num / (a * b),
            ModelKind::PayneWhitham {
                curves: PwCurves::Isothermal,
                ..
            } => num / (a * b),
        }
    }

    fn shock_jump(&self, a: T, b: T) -> T {
        if a == b {
            return T::zero();
        }
        -self.shock_radicand(a, b).max(T::zero()).sqrt()
    }

    /// Velocity jump `v_to − v_from` along the shock locus.
    pub fn hugoniot_velocity_jump(&self, rho_from: T, rho_to: T) -> Result<T, RiemannError> {
        if rho_from == rho_to {
            return Ok(T::zero());
        }
        let rad = self.shock_radicand(rho_from, rho_to);
        if rad < T::zero() {
            return Err(RiemannError::NegativeRadicand {
                radicand: rad.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(-rad.sqrt())
    }

    /// Velocity jump `v_to − v_from` along a rarefaction curve of the given family.
    pub fn rarefaction_velocity_jump(&self, rho_from: T, rho_to: T, family: u8) -> T {
        let jump = match self.isothermal() {
            Some(c0) => -c0 * (rho_to / rho_from).ln(),
            None => self.fd.v(rho_to) - self.fd.v(rho_from),
        };
        if family == 1 {
            jump
        } else {
            -jump
        }
    }

    /// `dv/dρ` along a 1-rarefaction curve.
    fn r1_slope(&self, rho: T) -> T {
        match self.isothermal() {
            Some(c0) => -c0 / rho,
            None => self.fd.dv(rho),
        }
    }

    /// Speed on the forward 1-wave curve through `ul`.
    fn forward_1(&self, ul: State2<T>, rho: T) -> T {
        if rho <= ul.rho {
            ul.v + self.rarefaction_velocity_jump(ul.rho, rho, 1)
        } else {
            ul.v + self.shock_jump(ul.rho, rho)
        }
    }

    /// Speed of states that reach `ur` through a 2-wave.
    fn backward_2(&self, ur: State2<T>, rho: T) -> T {
        if rho <= ur.rho {
            ur.v - self.rarefaction_velocity_jump(rho, ur.rho, 2)
        } else {
            ur.v - self.shock_jump(rho, ur.rho)
        }
    }

    /// `g(ρ_m)`; zero at the intermediate density.
    pub fn g(&self, ul: State2<T>, ur: State2<T>, rho_m: T) -> T {
        self.forward_1(ul, rho_m) - self.backward_2(ur, rho_m)
    }

    fn vacuum(&self, ul: State2<T>, ur: State2<T>, above: bool) -> RiemannError {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        let (rho_l, v_l, rho_r, v_r) = (f(ul.rho), f(ul.v), f(ur.rho), f(ur.v));
        if above {
            RiemannError::AboveDomain {
                rho_l,
                v_l,
                rho_r,
                v_r,
            }
        } else {
            RiemannError::Vacuum {
                rho_l,
                v_l,
                rho_r,
                v_r,
            }
        }
    }

    /// Wave pattern and intermediate state; single waves return `ρ_m` equal to the far state.
    pub fn solve_intermediate(
        &self,
        ul: State2<T>,
        ur: State2<T>,
    ) -> Result<(Pattern, State2<T>), RiemannError> {
        for u in [ul, ur] {
            if !(u.rho > T::zero()) {
                return Err(RiemannError::InvalidState {
                    rho: u.rho.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let tol = T::lit(CURVE_TOL);
        if (self.forward_1(ul, ur.rho) - ur.v).abs() <= tol {
            let p = if ur.rho > ul.rho { Pattern::H1 } else { Pattern::R1 };
            return Ok((p, ur));
        }
        if (self.backward_2(ur, ul.rho) - ul.v).abs() <= tol {
            let p = if ur.rho < ul.rho { Pattern::H2 } else { Pattern::R2 };
            return Ok((p, ul));
        }
        let g = |r: T| self.g(ul, ur, r);
        let a = ul.rho.min(ur.rho);
        let b = ul.rho.max(ur.rho);
        let ga = g(a);
        let gb = g(b);
        let growth = T::lit(1.6);
        let ftol = T::root_tol() * T::lit(1e-3);
        let (pattern, lo, hi) = if ga <= T::zero() {
            let mut hi = a;
            let mut lo = a / growth;
            let floor = self.fd.rho_max() * T::lit(1e-12);
            while g(lo) <= T::zero() {
                if lo <= floor {
                    if g(T::zero()) <= T::zero() {
                        return Err(self.vacuum(ul, ur, false));
                    }
                    lo = T::zero();
                    break;
                }
                hi = lo;
                lo = lo / growth;
            }
            (Pattern::R1R2, lo, hi)
        } else if gb >= T::zero() {
            let top = self.fd.rho_max();
            let mut lo = b;
            let mut hi = (b * growth).min(top);
            while g(hi) >= T::zero() {
                if hi >= top {
                    return Err(self.vacuum(ul, ur, true));
                }
                lo = hi;
                hi = (hi * growth).min(top);
            }
            (Pattern::H1H2, lo, hi)
        } else if ur.rho < ul.rho {
            (Pattern::R1H2, a, b)
        } else {
            (Pattern::H1R2, a, b)
        };
        let rho_m = roots::bracketed(g, lo, hi, ftol).map_err(|_| self.vacuum(ul, ur, false))?;
        if !(rho_m > T::zero()) {
            return Err(self.vacuum(ul, ur, false));
        }
        Ok((pattern, State2::new(rho_m, self.forward_1(ul, rho_m))))
    }

    /// Sonic state on the 1-rarefaction from `ul` toward density `rho_end`.
    fn sonic_1(&self, ul: State2<T>, rho_end: T) -> State2<T> {
        let on_curve = |r: T| State2::new(r, self.forward_1(ul, r));
        let closed = match self.kind {
            ModelKind::PayneWhitham {
                c0,
                curves: PwCurves::AsPrinted,
            } => {
                // v = c0 and v*(ρ) = c0 − v_l + v*(ρ_l)
                let target = c0 - ul.v + self.fd.v(ul.rho);
                roots::bracketed(|r| self.fd.v(r) - target, rho_end, ul.rho, T::zero())
                    .ok()
                    .map(|r| State2::new(r, c0))
            }
            ModelKind::PayneWhitham {
                c0,
                curves: PwCurves::Isothermal,
            } => {
                let r = ul.rho * ((ul.v - c0) / c0).exp();
                Some(State2::new(r, c0))
            }
            ModelKind::Zhang => {
                // λ*(ρ) = v*(ρ_l) − v_l
                let dv = self.fd.v(ul.rho) - ul.v;
                roots::bracketed(|r| self.fd.lambda(r) - dv, rho_end, ul.rho, T::zero())
                    .ok()
                    .map(on_curve)
            }
        };
        closed.unwrap_or_else(|| {
            let r = roots::bracketed(
                |r| self.lambda1(on_curve(r)),
                rho_end,
                ul.rho,
                T::zero(),
            )
            .unwrap_or(ul.rho);
            on_curve(r)
        })
    }

    fn average_for(&self, pattern: Pattern, ul: State2<T>, mid: State2<T>) -> State2<T> {
        match pattern.first_is_shock() {
            None => ul,
            Some(true) => {
                let s = shock_speed(ul, mid);
                if s > T::zero() {
                    ul
                } else if s < T::zero() {
                    mid
                } else {
                    ul.midpoint(mid)
                }
            }
            Some(false) => {
                if self.lambda1(ul) > T::zero() {
                    ul
                } else if self.lambda1(mid) < T::zero() {
                    mid
                } else {
                    self.sonic_1(ul, mid.rho)
                }
            }
        }
    }

    /// Full solution with the state at `x = 0`.
    pub fn solve(&self, ul: State2<T>, ur: State2<T>) -> Result<WavePattern2<T>, RiemannError> {
        if ul == ur {
            if !(ul.rho > T::zero()) {
                return Err(RiemannError::InvalidState {
                    rho: ul.rho.to_f64().unwrap_or(f64::NAN),
                });
            }
            return Ok(WavePattern2 {
                pattern: Pattern::R1,
                left: ul,
                right: ur,
                intermediate: None,
                boundary_avg: ul,
            });
        }
        let (pattern, m) = self.solve_intermediate(ul, ur)?;
        let intermediate = match pattern {
            Pattern::H1 | Pattern::H2 | Pattern::R1 | Pattern::R2 => None,
            _ => Some(m),
        };
        let mid = match pattern {
            Pattern::H1 | Pattern::R1 => ur,
            _ => m,
        };
        let boundary_avg = self.average_for(pattern, ul, mid);
        Ok(WavePattern2 {
            pattern,
            left: ul,
            right: ur,
            intermediate,
            boundary_avg,
        })
    }

    /// State at `x = 0` for the Riemann problem `(ul, ur)`.
    pub fn boundary_average(&self, ul: State2<T>, ur: State2<T>) -> Result<State2<T>, RiemannError> {
        Ok(self.solve(ul, ur)?.boundary_avg)
    }

    /// PW boundary state averaged over `[0, dt]` when a 1-rarefaction straddles `x = 0`.
    ///
    /// The relaxation term bends the sonic characteristic into a parabola; to first
    /// order the speed at `x = 0` drifts linearly from `c₀`, and the density follows
    /// along the 1-rarefaction curve.
    pub fn pw_cauchy_boundary_average(
        &self,
        ul: State2<T>,
        ur: State2<T>,
        dt: T,
    ) -> Result<State2<T>, RiemannError> {
        let sol = self.solve(ul, ur)?;
        let ModelKind::PayneWhitham { c0, .. } = self.kind else {
            return Ok(sol.boundary_avg);
        };
        if sol.pattern.first_is_shock() != Some(false) {
            return Ok(sol.boundary_avg);
        }
        let mid = sol.middle();
        let straddles = self.lambda1(ul) <= T::zero() && self.lambda1(mid) >= T::zero();
        if !straddles || ul == ur {
            return Ok(sol.boundary_avg);
        }
        let sonic = sol.boundary_avg;
        let rho0 = sonic.rho;
        let rate = (self.fd.flux(rho0) - rho0 * c0) / (T::two() * self.tau * rho0);
        let dv = -rate * dt * T::half();
        let slope = self.r1_slope(rho0);
        let rho = if slope == T::zero() { rho0 } else { rho0 + dv / slope };
        Ok(State2::new(rho, c0 + dv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zhang_gs() -> ModelVariant<f64> {
        ModelVariant::zhang(FundamentalDiagram::greenshields(1.0, 1.0).unwrap(), 1.0)
    }

    #[test]
    fn pw_hugoniot_closed_form() {
        let fd = FundamentalDiagram::<f64>::kerner();
        let m = ModelVariant::payne_whitham(fd, 1.0, 1.0).with_curves(PwCurves::AsPrinted);
        let (a, b) = (0.2, 0.5);
        let j = m.hugoniot_velocity_jump(a, b).unwrap();
        let expect = -(2.0f64).sqrt() * (b - a) / (a * b).sqrt();
        assert!((j - expect).abs() < 1e-14);
        let iso = m.with_curves(PwCurves::Isothermal);
        let j = iso.hugoniot_velocity_jump(a, b).unwrap();
        assert!((j + (b - a) / (a * b).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rarefaction_jumps() {
        let m = zhang_gs();
        assert_eq!(m.rarefaction_velocity_jump(0.4, 0.4, 1), 0.0);
        assert!(m.rarefaction_velocity_jump(0.6, 0.3, 1) > 0.0);
        assert!(m.rarefaction_velocity_jump(0.3, 0.6, 2) > 0.0);
    }

    #[test]
    fn single_r1_membership() {
        let m = zhang_gs();
        let ul = State2::new(0.6, 0.5);
        let ur = State2::new(0.3, 0.5 + m.rarefaction_velocity_jump(0.6, 0.3, 1));
        let (p, s) = m.solve_intermediate(ul, ur).unwrap();
        assert_eq!(p, Pattern::R1);
        assert_eq!(s.rho, 0.3);
    }

    #[test]
    fn h1h2_for_velocity_drop() {
        let m = zhang_gs();
        let ul = State2::new(0.6, 0.4);
        let ur = State2::new(0.6, 0.3);
        let (p, s) = m.solve_intermediate(ul, ur).unwrap();
        assert_eq!(p, Pattern::H1H2);
        assert!(s.rho > 0.6);
        assert!(m.g(ul, ur, s.rho).abs() < 1e-10);
    }

    #[test]
    fn vacuum_detected() {
        let m = zhang_gs();
        let ul = State2::new(0.05, 0.9);
        let ur = State2::new(0.02, 3.0);
        assert!(matches!(
            m.solve_intermediate(ul, ur),
            Err(RiemannError::Vacuum { .. })
        ));
    }

    #[test]
    fn pw_sonic_rarefaction() {
        let fd = FundamentalDiagram::<f64>::kerner();
        let m = ModelVariant::payne_whitham(fd, 2.48445, 1.0).with_curves(PwCurves::AsPrinted);
        let ul = State2::new(0.4, 0.5);
        let ur = State2::new(0.1, 0.5 + m.rarefaction_velocity_jump(0.4, 0.1, 1));
        let sol = m.solve(ul, ur).unwrap();
        assert_eq!(sol.pattern, Pattern::R1);
        let b = sol.boundary_avg;
        assert!((b.v - 2.48445).abs() < 1e-12);
        assert!((fd.v(b.rho) - (2.48445 - ul.v + fd.v(ul.rho))).abs() < 1e-10);
    }
}
