//! Closed-form optimum under the isotropic budget `Tr H^2 / 2 = omega^2`.
//!
//! The optimal Hamiltonian is constant and generates a Fubini-Study geodesic
//! through the plane spanned by the endpoints:
//!
//! ```text
//! psi(t) = cos(w t) psi_i + sin(w t) psi_f'
//! H      = i w (|psi_f'><psi_i| - |psi_i><psi_f'|)
//! T      = arccos|<psi_f|psi_i>| / w
//! ```
//!
//! When the endpoints are orthogonal every phase of `psi_f'` gives a geodesic
//! of the same length; the phase is fixed by making `<psi_f|psi_f'>` real and
//! positive.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    fubini_study_distance, gram_schmidt_final, max_abs, projector, CMatrix, CVector,
    HermitianOperator, PureState, CONSTRUCTION_TOL,
};
use crate::propagator::{evolve, HamiltonianSchedule, Sample, Trajectory};

/// The constant optimal Hamiltonian and geodesic for one pair of endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicSolution {
    h_tilde: HermitianOperator,
    duration: f64,
    psi_i: PureState,
    psi_f_prime: PureState,
    omega: f64,
}

/// Either a geodesic or the trivial `T = 0` answer for coincident rays.
#[derive(Debug, Clone, PartialEq)]
pub enum IsotropicOutcome {
    Geodesic(IsotropicSolution),
    Coincident,
}

impl IsotropicOutcome {
    pub fn duration(&self) -> f64 {
        match self {
            IsotropicOutcome::Geodesic(sol) => sol.duration,
            IsotropicOutcome::Coincident => 0.0,
        }
    }

    pub fn geodesic(&self) -> Result<&IsotropicSolution> {
        match self {
            IsotropicOutcome::Geodesic(sol) => Ok(sol),
            IsotropicOutcome::Coincident => Err(Error::DegenerateEndpoints),
        }
    }

    pub fn into_geodesic(self) -> Result<IsotropicSolution> {
        match self {
            IsotropicOutcome::Geodesic(sol) => Ok(sol),
            IsotropicOutcome::Coincident => Err(Error::DegenerateEndpoints),
        }
    }
}

pub fn solve_isotropic(psi_i: &PureState, psi_f: &PureState, omega: f64) -> Result<IsotropicOutcome> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    let psi_f_prime = match gram_schmidt_final(psi_i, psi_f) {
        Ok(v) => v,
        Err(Error::DegenerateEndpoints) => return Ok(IsotropicOutcome::Coincident),
        Err(e) => return Err(e),
    };
    let a = psi_f_prime.amplitudes() * psi_i.amplitudes().adjoint();
    let h = (&a - a.adjoint()) * Complex64::new(0.0, omega);
    Ok(IsotropicOutcome::Geodesic(IsotropicSolution {
        h_tilde: HermitianOperator::from_matrix_unchecked(h),
        duration: fubini_study_distance(psi_i, psi_f) / omega,
        psi_i: psi_i.clone(),
        psi_f_prime,
        omega,
    }))
}

impl IsotropicSolution {
    /// Assembles a candidate from explicit parts, checking only that the
    /// pair is orthonormal. Used to test the residual checks on non-optimal
    /// inputs.
    pub fn from_parts(
        h_tilde: HermitianOperator,
        psi_i: PureState,
        psi_f_prime: PureState,
        omega: f64,
        duration: f64,
    ) -> Result<Self> {
        if psi_i.dim() != psi_f_prime.dim() || h_tilde.dim() != psi_i.dim() {
            return Err(Error::DimensionMismatch { expected: psi_i.dim(), found: psi_f_prime.dim() });
        }
        if psi_i.inner(&psi_f_prime).norm() > CONSTRUCTION_TOL {
            return Err(Error::InvalidArgument("endpoint pair is not orthogonal".into()));
        }
        if !(duration.is_finite() && duration > 0.0 && omega > 0.0) {
            return Err(Error::InvalidArgument("duration and omega must be positive".into()));
        }
        Ok(Self { h_tilde, duration, psi_i, psi_f_prime, omega })
    }

    pub fn h_tilde(&self) -> &HermitianOperator {
        &self.h_tilde
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn psi_i(&self) -> &PureState {
        &self.psi_i
    }

    pub fn psi_f_prime(&self) -> &PureState {
        &self.psi_f_prime
    }

    pub fn schedule(&self) -> HamiltonianSchedule {
        HamiltonianSchedule::constant(self.h_tilde.clone(), self.duration)
            .expect("isotropic generator is traceless")
    }

    /// Numerically integrated trajectory under the constant optimal Hamiltonian.
    pub fn trajectory(&self, steps: usize) -> Result<Trajectory> {
        evolve(&self.schedule(), &self.psi_i, steps)
    }

    /// Samples of `cos(wt) psi_i + sin(wt) psi_f'` on a uniform grid.
    pub fn closed_form_trajectory(&self, steps: usize) -> Result<Trajectory> {
        if steps < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
        }
        let dt = self.duration / steps as f64;
        let samples = (0..=steps)
            .map(|j| {
                let t = j as f64 * dt;
                let state = PureState::new(self.amplitude_at(t))?;
                Ok(Sample { t, state, h: self.h_tilde.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(dt, samples)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.duration.max(1.0);
        if !(t >= -slack && t <= self.duration + slack) {
            return Err(Error::OutOfRange { t, duration: self.duration });
        }
        Ok(())
    }

    fn amplitude_at(&self, t: f64) -> CVector {
        let (s, c) = (self.omega * t).sin_cos();
        self.psi_i.amplitudes() * Complex64::new(c, 0.0)
            + self.psi_f_prime.amplitudes() * Complex64::new(s, 0.0)
    }

    fn velocity_at(&self, t: f64) -> CVector {
        let (s, c) = (self.omega * t).sin_cos();
        (self.psi_i.amplitudes() * Complex64::new(-s, 0.0)
            + self.psi_f_prime.amplitudes() * Complex64::new(c, 0.0))
            * Complex64::new(self.omega, 0.0)
    }
}

/// The closed-form state `cos(w t) psi_i + sin(w t) psi_f'`.
pub fn geodesic_state(sol: &IsotropicSolution, t: f64) -> Result<PureState> {
    sol.check_time(t)?;
    PureState::new(sol.amplitude_at(t))
}

/// Largest residuals of the reduced optimality equations along the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedResiduals {
    /// `max |H - (H P + P H)|`.
    pub structure: f64,
    /// `max |H - i(|psi'><psi| - |psi><psi'|)|`.
    pub generator: f64,
    /// `max |<psi|psi'>|`.
    pub orthogonality: f64,
}

impl ReducedResiduals {
    pub fn max(&self) -> f64 {
        self.structure.max(self.generator).max(self.orthogonality)
    }
}

/// Evaluates the reduced equations at `samples` evenly spaced times in `[0, T]`.
pub fn verify_reduced_equations(sol: &IsotropicSolution, samples: usize) -> ReducedResiduals {
    let h = sol.h_tilde.matrix();
    let mut out = ReducedResiduals { structure: 0.0, generator: 0.0, orthogonality: 0.0 };
    let count = samples.max(1);
    for k in 0..count {
        let t = if count == 1 { 0.0 } else { sol.duration * k as f64 / (count - 1) as f64 };
        let psi = sol.amplitude_at(t);
        let dpsi = sol.velocity_at(t);
        let state = PureState::new(psi.clone()).expect("closed form is normalized");
        let p = projector(&state);
        let anti = h * p.matrix() + p.matrix() * h;
        out.structure = out.structure.max(max_abs(&(h - anti)));
        let outer: CMatrix = &dpsi * psi.adjoint() - &psi * dpsi.adjoint();
        out.generator = out.generator.max(max_abs(&(h - outer * Complex64::new(0.0, 1.0))));
        out.orthogonality = out.orthogonality.max(psi.dotc(&dpsi).norm());
    }
    out
}
