//! Optimality conditions and a shooting solver for the norm budget plus any
//! number of linear forbidden directions.
//!
//! The multiplier-weighted constraint gradient is
//!
//! ```text
//! F = lambda_1 (H - <H> P) + sum_a lambda_a (A_a - <A_a> P)
//! ```
//!
//! A time-optimal trajectory satisfies the structure condition
//! `F = F P + P F` at every instant and the transport law
//! `F(t) = U(t) F(0) U(t)^dagger`. Only the ratios `lambda_a / lambda_1` are
//! observable, so `lambda_1 = 1` throughout and the remaining entries are
//! called `mu_a`.
//!
//! With constant ratios and `K = sum_a mu_a A_a`, the transport law closes:
//! `G = H + K` obeys `dG/dt = i [K, G]`, hence
//!
//! ```text
//! H(t) = exp(iKt) (H(0) + K) exp(-iKt) - K
//! U(t) = exp(iKt) exp(-i (H(0) + K) t)
//! ```
//!
//! The shooting solver searches over `F(0) = |psi><v| + |v><psi|` with
//! `v` orthogonal to `psi(0)` and over the duration `T`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    complement_basis, expectation, projector, traceless_part, CMatrix, CVector, ConstraintSet,
    HermitianOperator, PureState,
};
use crate::isotropic::solve_isotropic;
use crate::optimize::{levenberg_marquardt, nelder_mead, SimplexOptions};
use crate::propagator::{
    propagator_path, HamiltonianSchedule, Sample, TimeOrdering, Trajectory, STEP_NORM_LIMIT,
};

/// Relative singular value below which multipliers count as undetermined.
pub const RANK_TOL: f64 = 1e-8;
/// Per-sample fits with relative conditioning below this are recorded but
/// excluded from the constancy check.
const SPREAD_COND: f64 = 1e-4;
/// Weight of the squared constraint drift in the shooting objective.
pub const PENALTY_WEIGHT: f64 = 1e3;

/// `[Tr h^2 / 2 - omega^2, Tr(h A_1), ..., Tr(h A_m)]`.
pub fn constraint_value(cset: &ConstraintSet, h: &HermitianOperator) -> Vec<f64> {
    let omega = cset.omega();
    std::iter::once(0.5 * h.trace_product(h) - omega * omega)
        .chain(cset.forbidden().iter().map(|a| h.trace_product(a)))
        .collect()
}

/// `F` for multipliers `lambdas = [lambda_1, lambda_a...]`.
pub fn build_f(
    cset: &ConstraintSet,
    lambdas: &[f64],
    h: &HermitianOperator,
    psi: &PureState,
) -> Result<HermitianOperator> {
    let m = cset.forbidden().len();
    if lambdas.len() != m + 1 {
        return Err(Error::DimensionMismatch { expected: m + 1, found: lambdas.len() });
    }
    if h.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: psi.dim(), found: h.dim() });
    }
    cset.check_dim(h.dim())?;
    let p = projector(psi);
    let mut f = (h - &p.scale(expectation(h, psi))).scale(lambdas[0]);
    for (a, &l) in cset.forbidden().iter().zip(&lambdas[1..]) {
        f = f + (a - &p.scale(expectation(a, psi))).scale(l);
    }
    Ok(f)
}

/// `F - F P - P F`.
fn structure_defect(f: &HermitianOperator, p: &HermitianOperator) -> CMatrix {
    let (f, p) = (f.matrix(), p.matrix());
    f - f * p - p * f
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub structure: f64,
    pub transport: f64,
    pub constraints: f64,
    /// Allowed spread of the per-sample multiplier fits.
    pub lambda: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { structure: 1e-7, transport: 1e-7, constraints: 1e-7, lambda: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    /// `mu_a(t)` from each sample alone; `None` where that sample does not
    /// determine them.
    pub lambda_fit: Vec<Option<Vec<f64>>>,
    /// Constant `mu_a` fitted to all samples at once; used for every residual.
    pub lambda_mean: Vec<f64>,
    /// Largest deviation of a well-conditioned per-sample fit from the mean.
    pub lambda_spread: f64,
    pub lambda_constant: bool,
    pub residual_structure: f64,
    pub residual_transport: f64,
    pub residual_constraints: f64,
    /// `|(dF/dt + i[H, F]) psi|` by finite differences; informational only.
    pub residual_projected: Option<f64>,
    pub tolerances: Tolerances,
    pub verdict: Verdict,
}

/// Real least-squares columns `vec(Q A_a Q) / |A_a|` and right-hand side
/// `-vec(Q h Q)` for one sample.
fn sample_system(
    cset: &ConstraintSet,
    q: &CMatrix,
    h: &HermitianOperator,
) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = q.nrows();
    let m = cset.forbidden().len();
    let mut cols = DMatrix::<f64>::zeros(2 * n * n, m);
    let mut scales = Vec::with_capacity(m);
    for (c, a) in cset.forbidden().iter().enumerate() {
        let qaq = q * a.matrix() * q;
        let s = a.matrix().norm();
        scales.push(s);
        for (i, z) in qaq.iter().enumerate() {
            cols[(2 * i, c)] = z.re / s;
            cols[(2 * i + 1, c)] = z.im / s;
        }
    }
    let qhq = q * h.matrix() * q;
    let rhs = qhq.iter().flat_map(|z| [-z.re, -z.im]).collect();
    (cols, rhs, scales)
}

/// Checks the structure and transport conditions along a sampled trajectory.
pub fn verify_optimality(
    traj: &Trajectory,
    cset: &ConstraintSet,
    tolerances: Tolerances,
) -> Result<OptimalityReport> {
    let n = traj.dim();
    cset.check_dim(n)?;
    let m = cset.forbidden().len();
    let samples = traj.samples();
    let identity = CMatrix::identity(n, n);
    let projectors: Vec<HermitianOperator> = samples.iter().map(|s| projector(&s.state)).collect();

    let mut lambda_fit = Vec::with_capacity(samples.len());
    let mut stacked_rows: Vec<f64> = Vec::new();
    let mut stacked_rhs: Vec<f64> = Vec::new();
    let mut scales = vec![1.0; m];
    let mut conditioning = Vec::with_capacity(samples.len());
    for (s, p) in samples.iter().zip(&projectors) {
        if m == 0 {
            lambda_fit.push(Some(Vec::new()));
            conditioning.push(1.0);
            continue;
        }
        let q = &identity - p.matrix();
        let (cols, rhs, sc) = sample_system(cset, &q, &s.h);
        scales = sc;
        let svd = cols.clone().svd(true, true);
        let smin = svd.singular_values.min();
        conditioning.push(smin);
        if smin >= RANK_TOL {
            let x = svd.solve(&nalgebra::DVector::from_column_slice(&rhs), 0.0).expect("full rank");
            lambda_fit.push(Some(x.iter().zip(&scales).map(|(v, s)| v / s).collect()));
        } else {
            lambda_fit.push(None);
        }
        for r in 0..cols.nrows() {
            stacked_rows.extend(cols.row(r).iter());
        }
        stacked_rhs.extend(rhs);
    }

    let lambda_mean: Vec<f64> = if m == 0 {
        Vec::new()
    } else {
        let rows = stacked_rhs.len();
        let a = DMatrix::from_row_slice(rows, m, &stacked_rows);
        let svd = a.svd(true, true);
        let rms = svd.singular_values.min() / (samples.len() as f64).sqrt();
        if rms < RANK_TOL {
            return Err(Error::IndeterminateMultipliers(format!(
                "stacked least-squares system has relative singular value {rms:e}"
            )));
        }
        let x = svd.solve(&nalgebra::DVector::from_vec(stacked_rhs), 0.0).expect("full rank");
        x.iter().zip(&scales).map(|(v, s)| v / s).collect()
    };

    let lambda_spread = lambda_fit
        .iter()
        .zip(&conditioning)
        .filter(|(_, &c)| c >= SPREAD_COND)
        .filter_map(|(fit, _)| fit.as_ref())
        .flat_map(|fit| fit.iter().zip(&lambda_mean).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);

    let lambdas: Vec<f64> = std::iter::once(1.0).chain(lambda_mean.iter().copied()).collect();
    let fs: Vec<HermitianOperator> = samples
        .iter()
        .map(|s| build_f(cset, &lambdas, &s.h, &s.state))
        .collect::<Result<_>>()?;

    let residual_structure =
        fs.iter().zip(&projectors).map(|(f, p)| max_abs(&structure_defect(f, p))).fold(0.0, f64::max);

    let schedule = HamiltonianSchedule::interpolated(traj)?;
    let unitaries = propagator_path(&schedule, traj.steps(), TimeOrdering::CommutatorFree4)?;
    let f0 = fs[0].matrix();
    let residual_transport = fs
        .iter()
        .zip(&unitaries)
        .map(|(f, u)| max_abs(&(f.matrix() - u * f0 * u.adjoint())))
        .fold(0.0, f64::max);

    let residual_constraints = samples
        .iter()
        .flat_map(|s| constraint_value(cset, &s.h))
        .map(f64::abs)
        .fold(0.0, f64::max);

    let residual_projected = (samples.len() >= 5).then(|| {
        let dt = traj.dt();
        (2..samples.len() - 2)
            .map(|j| {
                let fm = |k: usize| fs[k].matrix();
                let fdot = (fm(j - 2) - fm(j + 2) + (fm(j + 1) - fm(j - 1)) * Complex64::from(8.0))
                    / Complex64::from(12.0 * dt);
                let h = samples[j].h.matrix();
                let comm = h * fm(j) - fm(j) * h;
                let lhs = fdot + comm * Complex64::i();
                (lhs * samples[j].state.amplitudes()).norm()
            })
            .fold(0.0, f64::max)
    });

    let verdict = if residual_structure < tolerances.structure
        && residual_transport < tolerances.transport
        && residual_constraints < tolerances.constraints
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    Ok(OptimalityReport {
        lambda_fit,
        lambda_constant: lambda_spread <= tolerances.lambda,
        lambda_mean,
        lambda_spread,
        residual_structure,
        residual_transport,
        residual_constraints,
        residual_projected,
        tolerances,
        verdict,
    })
}

/// Initial data for the shooting search.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingParameters {
    lambda_ratios: Vec<f64>,
    h0: HermitianOperator,
    duration: f64,
}

impl ShootingParameters {
    pub fn new(
        lambda_ratios: Vec<f64>,
        h0: HermitianOperator,
        duration: f64,
        cset: &ConstraintSet,
    ) -> Result<Self> {
        if lambda_ratios.len() != cset.forbidden().len() {
            return Err(Error::DimensionMismatch {
                expected: cset.forbidden().len(),
                found: lambda_ratios.len(),
            });
        }
        cset.check_dim(h0.dim())?;
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        let tol = 1e-10 * cset.omega().powi(2).max(1.0);
        if let Some(bad) = constraint_value(cset, &h0).into_iter().find(|v| v.abs() > tol) {
            return Err(Error::InvalidArgument(format!("h0 violates a constraint by {bad:e}")));
        }
        if h0.trace().abs() > tol {
            return Err(Error::InvalidArgument("h0 must be traceless".into()));
        }
        Ok(Self { lambda_ratios, h0, duration })
    }

    /// The isotropic geodesic Hamiltonian with the forbidden directions
    /// projected out and the budget restored, run for the geodesic time.
    pub fn isotropic_guess(psi_i: &PureState, psi_f: &PureState, cset: &ConstraintSet) -> Result<Self> {
        cset.check_dim(psi_i.dim())?;
        let sol = solve_isotropic(psi_i, psi_f, cset.omega())?.into_geodesic()?;
        let duration = sol.duration();
        let h = project_out(cset, sol.h_tilde());
        let norm = (0.5 * h.trace_product(&h)).sqrt();
        let h0 = if norm > 1e-9 * cset.omega() {
            h.scale(cset.omega() / norm)
        } else {
            // the geodesic generator is entirely forbidden; take the
            // strongest admissible direction instead
            let param = Parameterization::new(psi_i, cset)?;
            param.strongest_direction()?.1
        };
        let mu = vec![0.0; cset.forbidden().len()];
        Self::new(mu, h0, duration, cset)
    }

    pub fn lambda_ratios(&self) -> &[f64] {
        &self.lambda_ratios
    }

    pub fn h0(&self) -> &HermitianOperator {
        &self.h0
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }
}

/// `h - sum_a nu_a A_a` with `nu` chosen so that every `Tr(. A_b)` vanishes.
fn project_out(cset: &ConstraintSet, h: &HermitianOperator) -> HermitianOperator {
    let nu = solve_gram(cset, h);
    cset.forbidden().iter().zip(&nu).fold(h.clone(), |acc, (a, &c)| acc - a.scale(c))
}

fn solve_gram(cset: &ConstraintSet, h: &HermitianOperator) -> Vec<f64> {
    let m = cset.forbidden().len();
    if m == 0 {
        return Vec::new();
    }
    let c = nalgebra::DVector::from_iterator(m, cset.forbidden().iter().map(|a| h.trace_product(a)));
    let x = cset.gram().cholesky().expect("independent directions").solve(&c);
    x.iter().copied().collect()
}

fn k_operator(cset: &ConstraintSet, mu: &[f64], n: usize) -> HermitianOperator {
    cset.forbidden().iter().zip(mu).fold(HermitianOperator::zeros(n), |acc, (a, &c)| acc + a.scale(c))
}

/// Maps complement coordinates of `v` to `(mu, H(0))`.
struct Parameterization<'a> {
    psi0: PureState,
    basis: CMatrix,
    cset: &'a ConstraintSet,
}

impl<'a> Parameterization<'a> {
    fn new(psi0: &PureState, cset: &'a ConstraintSet) -> Result<Self> {
        cset.check_dim(psi0.dim())?;
        Ok(Self { psi0: psi0.clone(), basis: complement_basis(psi0), cset })
    }

    fn len(&self) -> usize {
        2 * self.basis.ncols()
    }

    fn vector(&self, b: &[f64]) -> CVector {
        let coeffs = CVector::from_iterator(
            self.basis.ncols(),
            b.chunks(2).map(|c| Complex64::new(c[0], c[1])),
        );
        &self.basis * coeffs
    }

    fn f0(&self, b: &[f64]) -> HermitianOperator {
        HermitianOperator::symmetric_outer(self.psi0.amplitudes(), &self.vector(b))
    }

    /// `(mu, H(0))` before rescaling to the budget.
    fn raw(&self, b: &[f64]) -> (Vec<f64>, HermitianOperator) {
        let f0 = self.f0(b);
        let mu = solve_gram(self.cset, &f0);
        let h = &f0 - &k_operator(self.cset, &mu, f0.dim());
        (mu, h)
    }

    /// `(mu, H(0))` with `Tr H(0)^2 / 2 = omega^2`, or `None` if `v` gives no
    /// admissible Hamiltonian.
    fn scaled(&self, b: &[f64]) -> Option<(Vec<f64>, HermitianOperator)> {
        let (mu, h) = self.raw(b);
        let norm = (0.5 * h.trace_product(&h)).sqrt();
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-12 * bnorm) {
            return None;
        }
        let s = self.cset.omega() / norm;
        Some((mu.iter().map(|x| x * s).collect(), h.scale(s)))
    }

    /// The basis direction of `v` whose Hamiltonian is largest.
    fn strongest_direction(&self) -> Result<(Vec<f64>, HermitianOperator)> {
        let best = (0..self.len())
            .map(|k| {
                let mut b = vec![0.0; self.len()];
                b[k] = 1.0;
                let (_, h) = self.raw(&b);
                (k, h.max_norm())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("n >= 2");
        if best.1 < 1e-12 {
            return Err(Error::ConstraintInfeasible(
                "every admissible F(0) lies in the span of the forbidden directions".into(),
            ));
        }
        let mut b = vec![0.0; self.len()];
        b[best.0] = 1.0;
        Ok(self.scaled(&b).expect("nonzero"))
    }

    /// Complement coordinates of `v = (1 - P)(h0 + K) psi0`, normalized.
    fn coords_of(&self, params: &ShootingParameters) -> Vec<f64> {
        let n = self.psi0.dim();
        let f = params.h0() + &k_operator(self.cset, params.lambda_ratios(), n);
        let v = f.apply(self.psi0.amplitudes());
        let c = self.basis.adjoint() * v;
        let mut b: Vec<f64> = c.iter().flat_map(|z| [z.re, z.im]).collect();
        normalize(&mut b);
        b
    }
}

fn normalize(b: &mut [f64]) {
    let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        b.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Closed-form constant-multiplier dynamics from `(mu, H(0))`.
#[derive(Clone)]
struct Extremal {
    k: HermitianOperator,
    g0: HermitianOperator,
}

impl Extremal {
    fn new(cset: &ConstraintSet, mu: &[f64], h0: &HermitianOperator) -> Self {
        let k = k_operator(cset, mu, h0.dim());
        let g0 = h0 + &k;
        Self { k, g0 }
    }

    fn unitary(&self, t: f64) -> CMatrix {
        self.k.propagator(-t) * self.g0.propagator(t)
    }

    fn hamiltonian(&self, t: f64) -> HermitianOperator {
        let r = self.k.propagator(-t);
        &self.g0.conjugated(&r) - &self.k
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Terminal infidelity a restart must reach to count as converged.
    pub tol: f64,
    /// Integration steps for the returned trajectory.
    pub steps: usize,
    /// Relative size of the Gaussian perturbation applied to the initial
    /// parameters of every restart except the first.
    pub jitter: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { restarts: 32, seed: 0, tol: 1e-12, steps: 2000, jitter: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartOutcome {
    pub index: usize,
    pub converged: bool,
    pub duration: f64,
    pub infidelity: f64,
    pub constraint_drift: f64,
    pub lambda_ratios: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ShootResult {
    pub schedule: HamiltonianSchedule,
    pub trajectory: Trajectory,
    pub params: ShootingParameters,
    pub infidelity: f64,
    pub restarts: Vec<RestartOutcome>,
}

struct Shooter<'a> {
    param: Parameterization<'a>,
    cset: &'a ConstraintSet,
    psi_f: PureState,
    target_complement: CMatrix,
}

/// Sample points for the drift of linear constraints along the orbit.
const DRIFT_SAMPLES: usize = 8;

impl Shooter<'_> {
    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], f64) {
        let (b, t) = x.split_at(x.len() - 1);
        (b, t[0].abs())
    }

    fn extremal(&self, b: &[f64]) -> Option<(Vec<f64>, HermitianOperator, Extremal)> {
        let (mu, h0) = self.param.scaled(b)?;
        let ex = Extremal::new(self.cset, &mu, &h0);
        Some((mu, h0, ex))
    }

    /// Linear-constraint values along the orbit. They vanish identically
    /// when the forbidden directions commute with `K`.
    fn drift(&self, ex: &Extremal, t_end: f64) -> Vec<f64> {
        if self.cset.forbidden().len() < 2 {
            return Vec::new();
        }
        (1..=DRIFT_SAMPLES)
            .flat_map(|s| {
                let h = ex.hamiltonian(t_end * s as f64 / DRIFT_SAMPLES as f64);
                self.cset.forbidden().iter().map(move |a| h.trace_product(a)).collect::<Vec<_>>()
            })
            .collect()
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let (b, t) = self.split(x);
        let m = self.target_complement.ncols();
        let Some((_, _, ex)) = self.extremal(b) else {
            return vec![1.0; 2 * m];
        };
        let end = ex.unitary(t) * self.param.psi0.amplitudes();
        let proj = self.target_complement.adjoint() * end;
        let w = PENALTY_WEIGHT.sqrt();
        proj.iter()
            .flat_map(|z| [z.re, z.im])
            .chain(self.drift(&ex, t).into_iter().map(|d| w * d))
            .collect()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().map(|r| r * r).sum()
    }

    fn infidelity(&self, x: &[f64]) -> f64 {
        let (b, t) = self.split(x);
        match self.extremal(b) {
            Some((_, _, ex)) => {
                let end = PureState::new(ex.unitary(t) * self.param.psi0.amplitudes()).expect("unitary");
                end.infidelity(&self.psi_f)
            }
            None => 1.0,
        }
    }
}

/// Solves the two-point boundary-value problem by multi-start shooting and
/// returns the shortest converged extremal.
pub fn shoot(
    psi_i: &PureState,
    psi_f: &PureState,
    cset: &ConstraintSet,
    params0: &ShootingParameters,
    options: ShootOptions,
) -> Result<ShootResult> {
    if psi_i.dim() != psi_f.dim() {
        return Err(Error::DimensionMismatch { expected: psi_i.dim(), found: psi_f.dim() });
    }
    if psi_i.overlap(psi_f) >= 1.0 - 1e-12 {
        return Err(Error::DegenerateEndpoints);
    }
    if options.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    cset.check_dim(params0.h0().dim())?;
    let param = Parameterization::new(psi_i, cset)?;
    param.strongest_direction()?;
    let shooter = Shooter {
        cset,
        psi_f: psi_f.clone(),
        target_complement: complement_basis(psi_f),
        param,
    };

    let mut base = shooter.param.coords_of(params0);
    if base.iter().all(|&x| x == 0.0) {
        base[0] = 1.0;
    }
    base.push(params0.duration());
    let dim = base.len();

    let run = |index: usize| -> (Vec<f64>, RestartOutcome) {
        let mut x0 = base.clone();
        if index > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(index as u64);
            let scale = options.jitter / ((dim - 1) as f64).sqrt();
            for v in &mut x0[..dim - 1] {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += scale * g;
            }
            let g: f64 = StandardNormal.sample(&mut rng);
            x0[dim - 1] *= 1.0 + options.jitter * g;
        }
        normalize(&mut x0[..dim - 1]);
        let mut steps = vec![0.1; dim];
        steps[dim - 1] = 0.05 * x0[dim - 1].abs().max(1e-3);
        let coarse = nelder_mead(
            |x| shooter.objective(x),
            &x0,
            &steps,
            SimplexOptions { max_evals: 1500 * dim, f_tol: 1e-20, x_tol: 1e-12 },
        );
        let fine = levenberg_marquardt(|x| shooter.residual(x), &coarse.x, 200, 1e-32);
        let mut x = if fine.value <= coarse.value { fine.x } else { coarse.x };
        normalize(&mut x[..dim - 1]);
        x[dim - 1] = x[dim - 1].abs();
        let infidelity = shooter.infidelity(&x);
        let (mu, drift) = match shooter.extremal(&x[..dim - 1]) {
            Some((mu, _, ex)) => {
                let d = shooter.drift(&ex, x[dim - 1]).iter().map(|v| v.abs()).fold(0.0, f64::max);
                (mu, d)
            }
            None => (vec![f64::NAN; cset.forbidden().len()], f64::INFINITY),
        };
        let converged = infidelity < options.tol && drift < 1e-7 && x[dim - 1] > 0.0;
        let outcome = RestartOutcome {
            index,
            converged,
            duration: x[dim - 1],
            infidelity,
            constraint_drift: drift,
            lambda_ratios: mu,
        };
        (x, outcome)
    };

    let runs: Vec<(Vec<f64>, RestartOutcome)> = (0..options.restarts).into_par_iter().map(run).collect();
    let best = runs
        .iter()
        .filter(|(_, o)| o.converged)
        .min_by(|a, b| a.1.duration.total_cmp(&b.1.duration).then(a.1.index.cmp(&b.1.index)));
    let Some((x, outcome)) = best else {
        let best_infidelity = runs.iter().map(|(_, o)| o.infidelity).fold(f64::INFINITY, f64::min);
        return Err(Error::NoConvergence { best_infidelity });
    };

    let (mu, h0, extremal) = shooter.extremal(&x[..dim - 1]).expect("converged point is admissible");
    let duration = x[dim - 1];
    // F(0) = H(0) + K, with both already scaled to the budget
    let f0 = &h0 + &extremal.k;
    let trajectory = integrate_transport(psi_i, &f0, &extremal.k, duration, options.steps)?;
    let schedule = {
        let ex = extremal.clone();
        HamiltonianSchedule::new(duration, move |t| ex.hamiltonian(t))?
    };
    let params = ShootingParameters { lambda_ratios: mu, h0, duration };
    Ok(ShootResult {
        schedule,
        trajectory,
        params,
        infidelity: outcome.infidelity,
        restarts: runs.into_iter().map(|(_, o)| o).collect(),
    })
}

/// RK4 integration of `dU/dt = -i H U` with `H = U F(0) U^dagger - K`
/// recovered from the transported multiplier operator at every stage.
fn integrate_transport(
    psi0: &PureState,
    f0: &HermitianOperator,
    k: &HermitianOperator,
    duration: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
    }
    let n = psi0.dim();
    let dt = duration / steps as f64;
    let minus_i = Complex64::new(0.0, -1.0);
    let hamiltonian = |u: &CMatrix| -> CMatrix { u * f0.matrix() * u.adjoint() - k.matrix() };
    let rhs = |u: &CMatrix| -> CMatrix { hamiltonian(u) * u * minus_i };
    let sample = |t: f64, u: &CMatrix| -> Result<Sample> {
        let state = PureState::new(u * psi0.amplitudes())?;
        let h = traceless_part(&HermitianOperator::new(hamiltonian(u))?);
        Ok(Sample { t, state, h })
    };

    let mut u = CMatrix::identity(n, n);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sample(0.0, &u)?);
    let half = Complex64::from(0.5 * dt);
    let full = Complex64::from(dt);
    for j in 0..steps {
        let product = HermitianOperator::new(hamiltonian(&u))?.max_norm() * dt;
        if product > STEP_NORM_LIMIT {
            return Err(Error::StepTooCoarse { product, limit: STEP_NORM_LIMIT });
        }
        let k1 = rhs(&u);
        let k2 = rhs(&(&u + &k1 * half));
        let k3 = rhs(&(&u + &k2 * half));
        let k4 = rhs(&(&u + &k3 * full));
        u += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(dt / 6.0);
        samples.push(sample((j + 1) as f64 * dt, &u)?);
    }
    Trajectory::new(dt, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::energy_variance;
    use crate::qubit_restricted::{enumerate_families, minus_x, plus_x, QubitFamily, Orientation};
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use std::f64::consts::FRAC_PI_2;

    fn sigma_z_set(omega: f64) -> ConstraintSet {
        ConstraintSet::new(omega, vec![HermitianOperator::pauli_z()]).unwrap()
    }

    #[test]
    fn constraint_value_examples() {
        let c = sigma_z_set(1.5);
        let v = constraint_value(&c, &HermitianOperator::pauli_y().scale(-1.5));
        assert!(v.iter().all(|x| x.abs() < 1e-15), "{v:?}");
        let v = constraint_value(&c, &HermitianOperator::pauli_z().scale(1.5));
        assert!(v[0].abs() < 1e-15 && (v[1] - 3.0).abs() < 1e-15);
        let v = constraint_value(&c, &HermitianOperator::zeros(2));
        assert_eq!(v, vec![-2.25, 0.0]);
    }

    #[test]
    fn build_f_examples() {
        let c = sigma_z_set(1.0);
        let psi = plus_x();
        let h = HermitianOperator::pauli_y().scale(-1.0);
        let f = build_f(&c, &[2.0, 0.7], &h, &psi).unwrap();
        let expected = h.scale(2.0) + HermitianOperator::pauli_z().scale(0.7);
        assert!((&f - &expected).max_norm() < 1e-15);

        let iso = ConstraintSet::isotropic(1.0).unwrap();
        let f = build_f(&iso, &[1.0], &h, &psi).unwrap();
        assert!((&f - &h).max_norm() < 1e-15);

        assert!(matches!(build_f(&c, &[1.0], &h, &psi), Err(Error::DimensionMismatch { .. })));
        let psi3 = PureState::basis(3, 0).unwrap();
        assert!(build_f(&c, &[1.0, 0.0], &HermitianOperator::zeros(3), &psi3).is_err());
    }

    proptest! {
        /// `<F> = 0` always. `Tr F = -(lambda_1 <h> + sum_a lambda_a <A_a>)`,
        /// which vanishes in the gauge where that combination has zero mean,
        /// as it does along every extremal with traceless `h`.
        #[test]
        fn build_f_is_traceless_and_unseen(seed in any::<u64>()) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = traceless_part(&HermitianOperator::random(3, &mut rng));
            let c = ConstraintSet::new(1.0, vec![a.clone()]).unwrap();
            let psi = PureState::random(3, &mut rng).unwrap();
            let lambdas = [1.3, -0.4];
            let raw = traceless_part(&HermitianOperator::random(3, &mut rng));
            let f = build_f(&c, &lambdas, &raw, &psi).unwrap();
            prop_assert!(expectation(&f, &psi).abs() < 1e-11);
            let mean = lambdas[0] * expectation(&raw, &psi) + lambdas[1] * expectation(&a, &psi);
            prop_assert!((f.trace() + mean).abs() < 1e-11);

            let z = traceless_part(&projector(&psi));
            let h = &raw - &z.scale(mean / (lambdas[0] * expectation(&z, &psi)));
            let f = build_f(&c, &lambdas, &h, &psi).unwrap();
            prop_assert!(f.trace().abs() < 1e-11);
            prop_assert!(expectation(&f, &psi).abs() < 1e-11);
        }
    }

    /// Solve `F = F P + P F`, `<F> = 0` on a real basis of Hermitian
    /// matrices and check every solution has the form `|psi><v| + |v><psi|`.
    #[test]
    fn f0_parameterization_spans_structure_solutions() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in [2usize, 3] {
            let psi = PureState::random(n, &mut rng).unwrap();
            let p = projector(&psi);
            let mut basis = Vec::new();
            for a in 0..n {
                for b in a..n {
                    let mut m = CMatrix::zeros(n, n);
                    m[(a, b)] = Complex64::from(1.0);
                    m[(b, a)] = Complex64::from(1.0);
                    basis.push(m);
                    if a != b {
                        let mut m = CMatrix::zeros(n, n);
                        m[(a, b)] = Complex64::i();
                        m[(b, a)] = -Complex64::i();
                        basis.push(m);
                    }
                }
            }
            let rows = 2 * n * n + 1;
            let mut sys = DMatrix::<f64>::zeros(rows, basis.len());
            for (c, m) in basis.iter().enumerate() {
                let f = HermitianOperator::new(m.clone()).unwrap();
                let d = structure_defect(&f, &p);
                for (i, z) in d.iter().enumerate() {
                    sys[(2 * i, c)] = z.re;
                    sys[(2 * i + 1, c)] = z.im;
                }
                sys[(rows - 1, c)] = expectation(&f, &psi);
            }
            let svd = sys.svd(true, true);
            let v_t = svd.v_t.unwrap();
            let null: Vec<usize> = (0..basis.len()).filter(|&k| svd.singular_values[k] < 1e-10).collect();
            assert_eq!(null.len(), 2 * (n - 1), "n = {n}");

            let c = ConstraintSet::isotropic(1.0).unwrap();
            let param = Parameterization::new(&psi, &c).unwrap();
            for k in null {
                let f = basis
                    .iter()
                    .enumerate()
                    .fold(CMatrix::zeros(n, n), |acc, (i, m)| acc + m * Complex64::from(v_t[(k, i)]));
                let f = HermitianOperator::new(f).unwrap();
                let v = f.apply(psi.amplitudes());
                let coords = param.basis.adjoint() * &v;
                let b: Vec<f64> = coords.iter().flat_map(|z| [z.re, z.im]).collect();
                assert!((&param.f0(&b) - &f).max_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn isotropic_closed_form_passes() {
        let mut rng = StdRng::seed_from_u64(11);
        let psi_i = PureState::random(3, &mut rng).unwrap();
        let psi_f = PureState::random(3, &mut rng).unwrap();
        let sol = solve_isotropic(&psi_i, &psi_f, 1.2).unwrap().into_geodesic().unwrap();
        let traj = sol.trajectory(2000).unwrap();
        let report = verify_optimality(&traj, &ConstraintSet::isotropic(1.2).unwrap(), Tolerances::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        assert!(report.residual_structure < 1e-8);
        assert!(report.residual_transport < 1e-8);
        assert!(report.residual_constraints < 1e-8);
        assert!(report.lambda_constant);
        assert!(report.residual_projected.unwrap() < 1e-7);
    }

    #[test]
    fn qubit_families_pass_with_fitted_rate() {
        let c = sigma_z_set(1.0);
        for f in enumerate_families(1.0, 5).unwrap() {
            let traj = f.closed_form_trajectory(2000).unwrap();
            let report = verify_optimality(&traj, &c, Tolerances::default()).unwrap();
            assert_eq!(report.verdict, Verdict::Pass, "({}, {}) {report:?}", f.k(), f.l());
            assert!((report.lambda_mean[0] - f.field_rate()).abs() < 1e-6);
            assert!(report.lambda_constant, "spread {}", report.lambda_spread);
            assert!(report.lambda_fit[0].is_none(), "equator start leaves mu free");
        }
    }

    #[test]
    fn numerically_evolved_family_passes() {
        let f = QubitFamily::new(1, 2, 1.0, Orientation::Canonical).unwrap();
        let traj = crate::propagator::evolve(&f.schedule(), &plus_x(), 2000).unwrap();
        let report = verify_optimality(&traj, &sigma_z_set(1.0), Tolerances::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
        assert!((report.lambda_mean[0] - f.field_rate()).abs() < 1e-6);
    }

    #[test]
    fn forbidden_component_fails() {
        let f = QubitFamily::new(1, 2, 1.0, Orientation::Canonical).unwrap();
        let traj = f.closed_form_trajectory(2000).unwrap();
        let dt = traj.dt();
        let samples = traj
            .into_samples()
            .into_iter()
            .map(|s| Sample { h: &s.h + &HermitianOperator::pauli_z().scale(0.05), ..s })
            .collect();
        let bad = Trajectory::new(dt, samples).unwrap();
        let report = verify_optimality(&bad, &sigma_z_set(1.0), Tolerances::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.residual_constraints >= 0.1 - 1e-12);
    }

    #[test]
    fn equatorial_orbit_leaves_multiplier_free() {
        let h = HermitianOperator::pauli_z();
        let schedule = HamiltonianSchedule::constant(h, 1.0).unwrap();
        let traj = crate::propagator::evolve(&schedule, &plus_x(), 200).unwrap();
        let err = verify_optimality(&traj, &sigma_z_set(1.0), Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::IndeterminateMultipliers(_)));
    }

    #[test]
    fn shooting_parameters_validate() {
        let c = sigma_z_set(1.0);
        let y = HermitianOperator::pauli_y().scale(-1.0);
        assert!(ShootingParameters::new(vec![0.0], y.clone(), 1.0, &c).is_ok());
        assert!(ShootingParameters::new(vec![], y.clone(), 1.0, &c).is_err());
        assert!(ShootingParameters::new(vec![0.0], y.scale(2.0), 1.0, &c).is_err());
        assert!(ShootingParameters::new(vec![0.0], HermitianOperator::pauli_z(), 1.0, &c).is_err());
        assert!(ShootingParameters::new(vec![0.0], y, -1.0, &c).is_err());
    }

    #[test]
    fn isotropic_guess_for_antipode_is_sigma_y() {
        let g = ShootingParameters::isotropic_guess(&plus_x(), &minus_x(), &sigma_z_set(2.0)).unwrap();
        assert!((g.h0() - &HermitianOperator::pauli_y().scale(-2.0)).max_norm() < 1e-12);
        assert!((g.duration() - FRAC_PI_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn shoot_recovers_geodesic_family() {
        let c = sigma_z_set(1.0);
        let p0 = ShootingParameters::isotropic_guess(&plus_x(), &minus_x(), &c).unwrap();
        let opts = ShootOptions { restarts: 8, ..Default::default() };
        let res = shoot(&plus_x(), &minus_x(), &c, &p0, opts).unwrap();
        assert!((res.params.duration() - FRAC_PI_2).abs() < 1e-6 * FRAC_PI_2);
        assert!(res.params.lambda_ratios()[0].abs() < 1e-6);
        assert!(res.trajectory.terminal().infidelity(&minus_x()) < 1e-10);
        for s in res.trajectory.samples() {
            for v in constraint_value(&c, &s.h) {
                assert!(v.abs() < 1e-7);
            }
        }
    }

    #[test]
    fn shoot_finds_second_branch_when_seeded_there() {
        let c = sigma_z_set(1.0);
        let fam = QubitFamily::new(1, 2, 1.0, Orientation::Canonical).unwrap();
        let h0 = HermitianOperator::pauli_y().scale(-1.0);
        let p0 = ShootingParameters::new(vec![fam.field_rate() * 1.02], h0, fam.duration() * 1.01, &c).unwrap();
        let opts = ShootOptions { restarts: 8, jitter: 0.01, ..Default::default() };
        let res = shoot(&plus_x(), &minus_x(), &c, &p0, opts).unwrap();
        let rel = (res.params.duration() - fam.duration()).abs() / fam.duration();
        assert!(rel < 1e-5, "T = {}", res.params.duration());
        assert!((res.params.lambda_ratios()[0].abs() - fam.field_rate()).abs() < 1e-5);
    }

    #[test]
    fn shoot_outputs_agree_and_transport_spectrum() {
        let mut rng = StdRng::seed_from_u64(5);
        let psi_i = PureState::random(3, &mut rng).unwrap();
        let psi_f = PureState::random(3, &mut rng).unwrap();
        let a = traceless_part(&HermitianOperator::random(3, &mut rng));
        let c = ConstraintSet::new(1.0, vec![a]).unwrap();
        let p0 = ShootingParameters::isotropic_guess(&psi_i, &psi_f, &c).unwrap();
        let res = shoot(&psi_i, &psi_f, &c, &p0, ShootOptions { restarts: 8, ..Default::default() }).unwrap();
        let lambdas: Vec<f64> = std::iter::once(1.0).chain(res.params.lambda_ratios().iter().copied()).collect();
        let spectrum = |s: &Sample| build_f(&c, &lambdas, &s.h, &s.state).unwrap().eigh().0;
        let first = spectrum(&res.trajectory.samples()[0]);
        for s in res.trajectory.samples() {
            for (x, y) in spectrum(s).iter().zip(&first) {
                assert!((x - y).abs() < 1e-8);
            }
            assert!((&s.h - &res.schedule.at(s.t)).max_norm() < 1e-8);
            for v in constraint_value(&c, &s.h) {
                assert!(v.abs() < 1e-7);
            }
            assert!((energy_variance(&s.h, &s.state)).is_finite());
        }
        let report = verify_optimality(&res.trajectory, &c, Tolerances::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    }

    #[test]
    fn fully_forbidden_qubit_is_infeasible() {
        let c = ConstraintSet::new(
            1.0,
            vec![HermitianOperator::pauli_x(), HermitianOperator::pauli_y(), HermitianOperator::pauli_z()],
        )
        .unwrap();
        let p0 = ShootingParameters { lambda_ratios: vec![0.0; 3], h0: HermitianOperator::zeros(2), duration: 1.0 };
        let err = shoot(&plus_x(), &minus_x(), &c, &p0, ShootOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ConstraintInfeasible(_)));
    }

    #[test]
    fn unreachable_budget_does_not_converge() {
        let c = sigma_z_set(1.0);
        let p0 = ShootingParameters::isotropic_guess(&plus_x(), &minus_x(), &c).unwrap();
        let opts = ShootOptions { restarts: 2, tol: -1.0, ..Default::default() };
        assert!(matches!(shoot(&plus_x(), &minus_x(), &c, &p0, opts), Err(Error::NoConvergence { .. })));
        assert!(matches!(
            shoot(&plus_x(), &plus_x().with_phase(1.0), &c, &p0, opts),
            Err(Error::DegenerateEndpoints)
        ));
    }
}
