//! Time evolution under a (possibly time-dependent) traceless Hamiltonian and
//! geometric diagnostics of sampled trajectories.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{
    energy_variance, fubini_study_distance, projector, CMatrix, CVector, HermitianOperator,
    PureState, NORM_TOL,
};

/// Default bound on `max|H_ij| * dt` before an integration is refused.
pub const STEP_NORM_LIMIT: f64 = 0.5;

/// Tracelessness tolerance for scheduled and sampled Hamiltonians.
pub const TRACE_TOL: f64 = 1e-10;

type Evaluator = dyn Fn(f64) -> HermitianOperator + Send + Sync;

/// A traceless control Hamiltonian `H(t)` on `[0, duration]`.
#[derive(Clone)]
pub struct HamiltonianSchedule {
    duration: f64,
    dim: usize,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for HamiltonianSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSchedule")
            .field("duration", &self.duration)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSchedule {
    pub fn new<F>(duration: f64, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> HermitianOperator + Send + Sync + 'static,
    {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        let h0 = eval(0.0);
        check_traceless(&h0)?;
        Ok(Self { duration, dim: h0.dim(), eval: Arc::new(eval) })
    }

    pub fn constant(h: HermitianOperator, duration: f64) -> Result<Self> {
        Self::new(duration, move |_| h.clone())
    }

    /// Piecewise-cubic interpolation of the Hamiltonians stored in a
    /// trajectory. Each interval uses the four nearest grid samples.
    pub fn interpolated(traj: &Trajectory) -> Result<Self> {
        let hs: Vec<HermitianOperator> = traj.samples().iter().map(|s| s.h.clone()).collect();
        let dt = traj.dt();
        let last = hs.len() - 1;
        Self::new(traj.duration(), move |t| {
            let x = (t / dt).clamp(0.0, last as f64);
            if hs.len() < 4 {
                let j = (x.floor() as usize).min(last - 1);
                let w = x - j as f64;
                return hs[j].scale(1.0 - w) + hs[j + 1].scale(w);
            }
            let j = (x.floor() as usize).min(last - 1);
            let start = j.saturating_sub(1).min(last - 3);
            let nodes: Vec<f64> = (start..start + 4).map(|k| k as f64).collect();
            let mut acc = HermitianOperator::zeros(hs[0].dim());
            for (a, &na) in nodes.iter().enumerate() {
                let weight: f64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(b, _)| b != a)
                    .map(|(_, &nb)| (x - nb) / (na - nb))
                    .product();
                acc = acc + hs[start + a].scale(weight);
            }
            acc
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `H(t)`, with `t` clamped into `[0, duration]`.
    pub fn at(&self, t: f64) -> HermitianOperator {
        (self.eval)(t.clamp(0.0, self.duration))
    }
}

fn check_traceless(h: &HermitianOperator) -> Result<()> {
    let tr = h.trace();
    if tr.abs() > TRACE_TOL * h.max_norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("Hamiltonian has trace {tr:e}")));
    }
    Ok(())
}

/// One point of a sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: PureState,
    pub h: HermitianOperator,
}

/// States and traceless Hamiltonians on a uniform grid `t_j = j dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(dt: f64, samples: Vec<Sample>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("a trajectory needs at least two samples".into()));
        }
        let n = samples[0].state.dim();
        for (j, s) in samples.iter().enumerate() {
            if s.state.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.state.dim() });
            }
            if s.h.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.h.dim() });
            }
            let expected = j as f64 * dt;
            if (s.t - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                return Err(Error::Format(format!("sample {j} at t = {} is off the uniform grid", s.t)));
            }
            let norm = s.state.amplitudes().norm();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized { norm });
            }
            check_traceless(&s.h)?;
        }
        Ok(Self { dt, samples })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.samples[0].state.dim()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// Number of steps `N`; there are `N + 1` samples.
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.steps()].t
    }

    pub fn initial(&self) -> &PureState {
        &self.samples[0].state
    }

    pub fn terminal(&self) -> &PureState {
        &self.samples[self.steps()].state
    }
}

fn check_step(h: &HermitianOperator, dt: f64, limit: f64) -> Result<()> {
    let product = h.max_norm() * dt;
    if product > limit {
        return Err(Error::StepTooCoarse { product, limit });
    }
    Ok(())
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
    }
    Ok(())
}

/// Integrates `i d/dt psi = H(t) psi` with [`STEP_NORM_LIMIT`].
pub fn evolve(schedule: &HamiltonianSchedule, psi0: &PureState, steps: usize) -> Result<Trajectory> {
    evolve_with_limit(schedule, psi0, steps, STEP_NORM_LIMIT)
}

/// Fixed-step classical Runge-Kutta on the amplitude vector, renormalized
/// after every step.
pub fn evolve_with_limit(
    schedule: &HamiltonianSchedule,
    psi0: &PureState,
    steps: usize,
    step_norm_limit: f64,
) -> Result<Trajectory> {
    check_steps(steps)?;
    if psi0.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch { expected: schedule.dim(), found: psi0.dim() });
    }
    let dt = schedule.duration() / steps as f64;
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |h: &HermitianOperator, v: &CVector| h.apply(v) * minus_i;
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);

    let mut h_now = schedule.at(0.0);
    check_step(&h_now, dt, step_norm_limit)?;
    let mut psi = psi0.amplitudes().clone();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample { t: 0.0, state: psi0.clone(), h: h_now.clone() });

    for j in 0..steps {
        let t = j as f64 * dt;
        let t_next = (j + 1) as f64 * dt;
        let h_mid = schedule.at(t + 0.5 * dt);
        let h_next = schedule.at(t_next);
        check_traceless(&h_mid)?;
        check_traceless(&h_next)?;
        check_step(&h_mid, dt, step_norm_limit)?;
        check_step(&h_next, dt, step_norm_limit)?;

        let k1 = rhs(&h_now, &psi);
        let k2 = rhs(&h_mid, &(&psi + &k1 * half));
        let k3 = rhs(&h_mid, &(&psi + &k2 * half));
        let k4 = rhs(&h_next, &(&psi + &k3 * full));
        psi += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(dt / 6.0, 0.0);
        let state = PureState::new(psi.clone())?;
        psi = state.amplitudes().clone();
        samples.push(Sample { t: t_next, state, h: h_next.clone() });
        h_now = h_next;
    }
    Trajectory::new(dt, samples)
}

/// Discretization of the time-ordered exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeOrdering {
    /// `prod_j exp(-i H(t_j + dt/2) dt)`; second order.
    Midpoint,
    /// Two exponentials per step with Gauss-Legendre nodes; fourth order.
    #[default]
    CommutatorFree4,
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6

/// One step of the time-ordered product starting at `t`.
fn step_propagator(
    schedule: &HamiltonianSchedule,
    t: f64,
    dt: f64,
    ordering: TimeOrdering,
    limit: f64,
) -> Result<CMatrix> {
    match ordering {
        TimeOrdering::Midpoint => {
            let h = schedule.at(t + 0.5 * dt);
            check_step(&h, dt, limit)?;
            Ok(h.propagator(dt))
        }
        TimeOrdering::CommutatorFree4 => {
            let h1 = schedule.at(t + (0.5 - SQRT3_6) * dt);
            let h2 = schedule.at(t + (0.5 + SQRT3_6) * dt);
            check_step(&h1, dt, limit)?;
            check_step(&h2, dt, limit)?;
            let (big, small) = (0.25 + SQRT3_6, 0.25 - SQRT3_6);
            let first = h1.scale(big) + h2.scale(small);
            let second = h1.scale(small) + h2.scale(big);
            Ok(second.propagator(dt) * first.propagator(dt))
        }
    }
}

/// `U(T)` for the schedule, as a product of per-step unitaries.
pub fn propagator_matrix(schedule: &HamiltonianSchedule, steps: usize) -> Result<CMatrix> {
    propagator_matrix_with(schedule, steps, TimeOrdering::default())
}

pub fn propagator_matrix_with(
    schedule: &HamiltonianSchedule,
    steps: usize,
    ordering: TimeOrdering,
) -> Result<CMatrix> {
    Ok(propagator_path(schedule, steps, ordering)?.pop().expect("steps >= 2"))
}

/// `U(t_j)` for every grid time `t_j = j T / steps`, `j = 0..=steps`.
pub fn propagator_path(
    schedule: &HamiltonianSchedule,
    steps: usize,
    ordering: TimeOrdering,
) -> Result<Vec<CMatrix>> {
    check_steps(steps)?;
    let n = schedule.dim();
    let dt = schedule.duration() / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut u = CMatrix::identity(n, n);
    out.push(u.clone());
    for j in 0..steps {
        u = step_propagator(schedule, j as f64 * dt, dt, ordering, STEP_NORM_LIMIT)? * u;
        out.push(u.clone());
    }
    Ok(out)
}

/// Sum of Fubini-Study distances between consecutive samples.
pub fn path_length(traj: &Trajectory) -> f64 {
    traj.samples()
        .windows(2)
        .map(|w| fubini_study_distance(&w[0].state, &w[1].state))
        .sum()
}

/// Largest discrepancy of `ds = dE dt` over the grid: the chord length of
/// each step divided by `dt`, against the mean of `dE` at its two ends.
pub fn aa_residual(traj: &Trajectory) -> f64 {
    let dt = traj.dt();
    let speeds: Vec<f64> =
        traj.samples().iter().map(|s| energy_variance(&s.h, &s.state).sqrt()).collect();
    traj.samples()
        .windows(2)
        .zip(speeds.windows(2))
        .map(|(w, v)| {
            let ds = fubini_study_distance(&w[0].state, &w[1].state) / dt;
            (ds - 0.5 * (v[0] + v[1])).abs()
        })
        .fold(0.0, f64::max)
}

/// States re-phased so that consecutive overlaps are real and non-negative.
pub fn phase_aligned(traj: &Trajectory) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::with_capacity(traj.samples().len());
    for s in traj.samples() {
        let v = s.state.amplitudes();
        let aligned = match out.last() {
            Some(prev) => {
                let c = prev.dotc(v);
                if c.norm() > 0.0 {
                    v * (c.conj() / c.norm())
                } else {
                    v.clone()
                }
            }
            None => v.clone(),
        };
        out.push(aligned);
    }
    out
}

/// Largest `|(1 - P_j) psi''_j|` over interior samples, with `psi''` the
/// central second difference of the phase-aligned states. Vanishes to
/// discretization error only on Fubini-Study geodesics traversed at
/// constant speed.
pub fn geodesic_residual(traj: &Trajectory) -> Result<f64> {
    if traj.steps() < 4 {
        return Err(Error::InvalidArgument("geodesic residual needs at least 4 steps".into()));
    }
    let dt2 = traj.dt() * traj.dt();
    let states = phase_aligned(traj);
    let mut worst: f64 = 0.0;
    for j in 1..states.len() - 1 {
        let accel = (&states[j + 1] - &states[j] * Complex64::new(2.0, 0.0) + &states[j - 1])
            / Complex64::new(dt2, 0.0);
        let p = projector(&traj.samples()[j].state);
        let normal = &accel - p.apply(&accel);
        worst = worst.max(normal.norm());
    }
    Ok(worst)
}
