//! Finite-dimensional Hilbert-space primitives.
//!
//! States are stored as raw amplitude vectors; equality of rays (states up to
//! a global phase) is a separate predicate, [`PureState::ray_eq`]. Operators
//! are dense complex matrices that are symmetrized on construction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for invariants established at construction time.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Largest accepted deviation of a supplied state's norm from one.
pub const NORM_TOL: f64 = 1e-9;
/// Largest accepted anti-Hermitian part (max-norm) of a supplied operator.
pub const HERMITIAN_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A unit-norm amplitude vector of dimension `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    /// Builds a state by normalizing `amps`.
    pub fn new(amps: CVector) -> Result<Self> {
        check_dimension(amps.len())?;
        let norm = amps.norm();
        if !(norm.is_finite() && norm >= CONSTRUCTION_TOL) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps: amps.unscale(norm) })
    }

    /// Wraps an already normalized vector without touching its bits.
    pub fn from_normalized(amps: CVector) -> Result<Self> {
        check_dimension(amps.len())?;
        let norm = amps.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    pub fn from_slice(amps: &[Complex64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amps))
    }

    /// Real amplitudes, normalized.
    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(
            amps.len(),
            amps.iter().map(|&a| Complex64::new(a, 0.0)),
        ))
    }

    /// Computational basis vector `e_k`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidArgument(format!("basis index {k} >= dimension {n}")));
        }
        let mut amps = CVector::zeros(n);
        amps[k] = ONE;
        Self::new(amps)
    }

    /// A Haar-distributed random state.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let amps = CVector::from_fn(n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    /// `|<self|other>|`, clamped to `[0, 1]`.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm().min(1.0)
    }

    /// `1 - |<self|other>|^2`.
    pub fn infidelity(&self, other: &PureState) -> f64 {
        (1.0 - self.inner(other).norm_sqr()).max(0.0)
    }

    /// True when both states represent the same ray within `tol`.
    pub fn ray_eq(&self, other: &PureState, tol: f64) -> bool {
        self.dim() == other.dim() && (1.0 - self.inner(other).norm()).abs() <= tol
    }

    /// The same ray multiplied by `e^{i phase}`.
    pub fn with_phase(&self, phase: f64) -> PureState {
        PureState { amps: self.amps.map(|a| a * Complex64::from_polar(1.0, phase)) }
    }

    /// Applies a unitary and renormalizes against round-off.
    pub fn evolved(&self, unitary: &CMatrix) -> Result<PureState> {
        if unitary.nrows() != self.dim() || unitary.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: unitary.nrows() });
        }
        PureState::new(unitary * &self.amps)
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {n}")));
    }
    Ok(())
}

/// A dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Symmetrizes `m` to `(m + m^dagger)/2`, rejecting inputs whose
    /// anti-Hermitian part exceeds [`HERMITIAN_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let adj = m.adjoint();
        let deviation = max_abs(&((&m - &adj) * Complex64::new(0.5, 0.0)));
        if !deviation.is_finite() || deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        // exactly Hermitian input is kept as given, signed zeros included,
        // so that serialized operators read back bit for bit
        if m == adj {
            return Ok(Self { m });
        }
        Ok(Self { m: (m + adj) * Complex64::new(0.5, 0.0) })
    }

    /// For matrices that are Hermitian by construction; only symmetrizes.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self { m: (m + adj) * Complex64::new(0.5, 0.0) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: CMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMatrix::identity(n, n) }
    }

    pub fn pauli_x() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]) }
    }

    pub fn pauli_y() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]) }
    }

    pub fn pauli_z() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]) }
    }

    /// `b . sigma` for a qubit.
    pub fn bloch(b: [f64; 3]) -> Self {
        Self::pauli_x().scale(b[0]) + Self::pauli_y().scale(b[1]) + Self::pauli_z().scale(b[2])
    }

    /// `|u><v| + |v><u|`.
    pub fn symmetric_outer(u: &CVector, v: &CVector) -> Self {
        let m = u * v.adjoint();
        Self::from_matrix_unchecked(&m + m.adjoint())
    }

    /// Entries drawn from a Gaussian unitary ensemble.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        Self::from_matrix_unchecked(g)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// `Re Tr(self * other)`; exact trace for Hermitian pairs.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        // Tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
        self.m.iter().zip(other.m.iter()).map(|(a, b)| (a * b.conj()).re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: &self.m * Complex64::new(s, 0.0) }
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.m * v
    }

    /// `U self U^dagger`.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        Self::from_matrix_unchecked(u * &self.m * u.adjoint())
    }

    /// `i [self, other]`, which is Hermitian.
    pub fn i_commutator(&self, other: &HermitianOperator) -> Self {
        let c = &self.m * &other.m - &other.m * &self.m;
        Self::from_matrix_unchecked(c * I)
    }

    /// Eigenvalues in ascending order and the matching orthonormal eigenvectors.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let eig = self.m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// `exp(-i self t)`, via the eigendecomposition; unitary to round-off.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let (values, vectors) = self.eigh();
        let phases = CVector::from_iterator(
            values.len(),
            values.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        );
        let scaled = CMatrix::from_fn(self.dim(), self.dim(), |r, c| vectors[(r, c)] * phases[c]);
        scaled * vectors.adjoint()
    }
}

impl std::ops::Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: HermitianOperator) -> HermitianOperator {
        HermitianOperator { m: self.m + rhs.m }
    }
}

impl std::ops::Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: HermitianOperator) -> HermitianOperator {
        HermitianOperator { m: self.m - rhs.m }
    }
}

impl<'a> std::ops::Add<&'a HermitianOperator> for &'a HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl<'a> std::ops::Sub<&'a HermitianOperator> for &'a HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// The isotropic norm budget `Tr H^2 / 2 = omega^2` plus linear
/// forbidden-direction constraints `Tr(H A_a) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    omega: f64,
    forbidden: Vec<HermitianOperator>,
}

impl ConstraintSet {
    pub fn new(omega: f64, forbidden: Vec<HermitianOperator>) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
        }
        if let Some(first) = forbidden.first() {
            let n = first.dim();
            for a in &forbidden {
                if a.dim() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: a.dim() });
                }
                if a.trace().abs() > CONSTRUCTION_TOL * a.max_norm().max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "forbidden direction has trace {}",
                        a.trace()
                    )));
                }
            }
            let gram = gram_matrix(&forbidden);
            let eig = gram.clone().symmetric_eigen();
            let max = eig.eigenvalues.max();
            let min = eig.eigenvalues.min();
            if min <= 1e-10 * max.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(
                    "forbidden directions are linearly dependent".into(),
                ));
            }
        }
        Ok(Self { omega, forbidden })
    }

    /// The isotropic constraint alone.
    pub fn isotropic(omega: f64) -> Result<Self> {
        Self::new(omega, Vec::new())
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn forbidden(&self) -> &[HermitianOperator] {
        &self.forbidden
    }

    /// Gram matrix `Tr(A_a A_b)` of the forbidden directions.
    pub fn gram(&self) -> DMatrix<f64> {
        gram_matrix(&self.forbidden)
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self.forbidden.first() {
            Some(a) if a.dim() != n => Err(Error::DimensionMismatch { expected: n, found: a.dim() }),
            _ => Ok(()),
        }
    }
}

fn gram_matrix(ops: &[HermitianOperator]) -> DMatrix<f64> {
    DMatrix::from_fn(ops.len(), ops.len(), |a, b| ops[a].trace_product(&ops[b]))
}

/// `|psi><psi|`.
pub fn projector(psi: &PureState) -> HermitianOperator {
    let v = psi.amplitudes();
    HermitianOperator::from_matrix_unchecked(v * v.adjoint())
}

/// `H - (Tr H / n) I`.
pub fn traceless_part(h: &HermitianOperator) -> HermitianOperator {
    let n = h.dim();
    let shift = h.trace() / n as f64;
    let mut m = h.matrix().clone();
    for k in 0..n {
        m[(k, k)] -= shift;
    }
    HermitianOperator { m }
}

/// `<psi|H|psi>`. The imaginary part is round-off for Hermitian `h`.
pub fn expectation(h: &HermitianOperator, psi: &PureState) -> f64 {
    let v = psi.amplitudes();
    let z = v.dotc(&h.apply(v));
    debug_assert!(z.im.abs() <= HERMITIAN_TOL * (1.0 + h.max_norm()));
    z.re
}

/// `<H^2> - <H>^2`, clamped at zero.
pub fn energy_variance(h: &HermitianOperator, psi: &PureState) -> f64 {
    let v = psi.amplitudes();
    let hv = h.apply(v);
    let mean = v.dotc(&hv).re;
    (hv.norm_squared() - mean * mean).max(0.0)
}

/// `arccos |<psi1|psi2>|`, in `[0, pi/2]`.
///
/// Evaluated as `atan2(|(1 - P1) psi2|, |<psi1|psi2>|)`, which keeps full
/// relative precision for nearby rays.
pub fn fubini_study_distance(psi1: &PureState, psi2: &PureState) -> f64 {
    let c = psi1.inner(psi2);
    let orthogonal = (psi2.amplitudes() - psi1.amplitudes() * c).norm();
    orthogonal.atan2(c.norm())
}

/// The unit vector `psi_f'` orthogonal to `psi_i` spanning the same plane as
/// `{psi_i, psi_f}`, phased so that `cos(d) psi_i + sin(d) psi_f'` lies on
/// the ray of `psi_f`, with `d` the Fubini-Study distance.
pub fn gram_schmidt_final(psi_i: &PureState, psi_f: &PureState) -> Result<PureState> {
    if psi_i.dim() != psi_f.dim() {
        return Err(Error::DimensionMismatch { expected: psi_i.dim(), found: psi_f.dim() });
    }
    let c = psi_i.inner(psi_f);
    if c.norm() >= 1.0 - CONSTRUCTION_TOL {
        return Err(Error::DegenerateEndpoints);
    }
    let phase = if c.norm() > 0.0 { c.conj() / c.norm() } else { Complex64::new(1.0, 0.0) };
    let residual = (psi_f.amplitudes() - psi_i.amplitudes() * c) * phase;
    PureState::new(residual).map_err(|_| Error::DegenerateEndpoints)
}

/// An orthonormal basis of the complement of `psi`, as the columns of an
/// `n x (n-1)` matrix.
pub fn complement_basis(psi: &PureState) -> CMatrix {
    let n = psi.dim();
    let v = psi.amplitudes();
    let mut basis: Vec<CVector> = Vec::with_capacity(n - 1);
    // Gram-Schmidt over the computational basis, skipping the direction
    // most aligned with psi.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()));
    for &k in order.iter().take(n - 1) {
        let mut w = CVector::zeros(n);
        w[k] = ONE;
        for _ in 0..2 {
            w -= v * v.dotc(&w);
            for b in &basis {
                w -= b * b.dotc(&w);
            }
        }
        let norm = w.norm();
        basis.push(w.unscale(norm));
    }
    CMatrix::from_columns(&basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn plus() -> PureState {
        PureState::from_real(&[1.0, 1.0]).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn projector_of_basis_state() {
        let p = projector(&PureState::basis(2, 0).unwrap());
        assert_eq!(p.matrix(), &CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]));
    }

    #[test]
    fn projector_of_plus_is_half_one_plus_sigma_x() {
        let p = projector(&plus());
        let expected = (HermitianOperator::identity(2) + HermitianOperator::pauli_x()).scale(0.5);
        assert!((&p - &expected).max_norm() < 1e-15);
    }

    #[test]
    fn random_projector_is_rank_one_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = PureState::random(5, &mut rng).unwrap();
        let p = projector(&psi);
        let p2 = p.matrix() * p.matrix();
        assert!(max_abs(&(p2 - p.matrix())) < 1e-12);
        assert!((p.trace() - 1.0).abs() < 1e-12);
        assert!((p.apply(psi.amplitudes()) - psi.amplitudes()).norm() < 1e-12);
        let (values, _) = p.eigh();
        let nonzero = values.iter().filter(|e| e.abs() > 1e-9).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn unnormalizable_states_are_rejected() {
        let zero = CVector::zeros(3);
        assert!(matches!(PureState::new(zero), Err(Error::NotNormalized { .. })));
        let off = CVector::from_element(2, c(1.0));
        assert!(matches!(PureState::from_normalized(off), Err(Error::NotNormalized { .. })));
        assert!(PureState::from_real(&[1.0]).is_err());
    }

    #[test]
    fn non_hermitian_matrices_are_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
        let tiny = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0 + 1e-12), c(0.0)]);
        let h = HermitianOperator::new(tiny).unwrap();
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
    }

    #[test]
    fn traceless_part_examples() {
        assert!(traceless_part(&HermitianOperator::identity(2)).max_norm() < 1e-15);
        let h = HermitianOperator::pauli_z() + HermitianOperator::identity(2).scale(3.0);
        assert!((&traceless_part(&h) - &HermitianOperator::pauli_z()).max_norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = HermitianOperator::random(4, &mut rng);
        let direct: Complex64 = (0..4).map(|k| traceless_part(&r).matrix()[(k, k)]).sum();
        assert!(direct.norm() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let z = HermitianOperator::pauli_z();
        assert_eq!(expectation(&z, &PureState::basis(2, 0).unwrap()), 1.0);
        assert!(expectation(&z, &plus()).abs() < 1e-15);
    }

    #[test]
    fn expectation_and_variance_match_eigenbasis_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [5, 6] {
            let h = HermitianOperator::random(n, &mut rng);
            let psi = PureState::random(n, &mut rng).unwrap();
            let (values, vectors) = h.eigh();
            let weights: Vec<f64> =
                (0..n).map(|k| vectors.column(k).dotc(psi.amplitudes()).norm_sqr()).collect();
            let mean: f64 = weights.iter().zip(&values).map(|(w, e)| w * e).sum();
            let var: f64 = weights.iter().zip(&values).map(|(w, e)| w * (e - mean).powi(2)).sum();
            assert!((expectation(&h, &psi) - mean).abs() < 1e-10);
            assert!((energy_variance(&h, &psi) - var).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(energy_variance(&HermitianOperator::pauli_z(), &PureState::basis(2, 0).unwrap()), 0.0);
        let omega = 1.7;
        let h = HermitianOperator::pauli_y().scale(-omega);
        assert!((energy_variance(&h, &plus()) - omega * omega).abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        let e0 = PureState::basis(2, 0).unwrap();
        let e1 = PureState::basis(2, 1).unwrap();
        assert_eq!(fubini_study_distance(&e0, &e0), 0.0);
        assert!((fubini_study_distance(&e0, &e1) - FRAC_PI_2).abs() < 1e-15);
        assert!((fubini_study_distance(&e0, &plus()) - FRAC_1_SQRT_2.acos()).abs() < 1e-15);
        assert!((fubini_study_distance(&e0, &plus()) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_examples() {
        let e0 = PureState::basis(2, 0).unwrap();
        let e1 = PureState::basis(2, 1).unwrap();
        assert!((gram_schmidt_final(&e0, &e1).unwrap().amplitudes() - e1.amplitudes()).norm() < 1e-15);
        // psi_f - <psi_i|psi_f> psi_i = (0, 1/sqrt2) -> (0, 1)
        let out = gram_schmidt_final(&e0, &plus()).unwrap();
        assert!((out.amplitudes() - e1.amplitudes()).norm() < 1e-15);
        assert!(matches!(gram_schmidt_final(&e0, &e0), Err(Error::DegenerateEndpoints)));
        assert!(matches!(
            gram_schmidt_final(&e0, &e0.with_phase(0.3)),
            Err(Error::DegenerateEndpoints)
        ));
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..6 {
            let psi = PureState::random(n, &mut rng).unwrap();
            let b = complement_basis(&psi);
            assert_eq!(b.ncols(), n - 1);
            let gram = b.adjoint() * &b;
            assert!(max_abs(&(gram - CMatrix::identity(n - 1, n - 1))) < 1e-12);
            assert!((b.adjoint() * psi.amplitudes()).norm() < 1e-12);
        }
    }

    #[test]
    fn propagator_is_unitary_and_matches_closed_form() {
        let omega = 0.8;
        let t = 1.3;
        let u = HermitianOperator::pauli_x().scale(omega).propagator(t);
        let (cs, sn) = ((omega * t).cos(), (omega * t).sin());
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c(cs), Complex64::new(0.0, -sn), Complex64::new(0.0, -sn), c(cs)],
        );
        assert!(max_abs(&(u - expected)) < 1e-14);
    }

    #[test]
    fn constraint_set_validation() {
        assert!(ConstraintSet::isotropic(0.0).is_err());
        assert!(ConstraintSet::new(1.0, vec![HermitianOperator::identity(2)]).is_err());
        let z = HermitianOperator::pauli_z();
        assert!(ConstraintSet::new(1.0, vec![z.clone(), z.scale(2.0)]).is_err());
        let ok = ConstraintSet::new(1.0, vec![z, HermitianOperator::pauli_x()]).unwrap();
        assert_eq!(ok.gram()[(0, 0)], 2.0);
        assert_eq!(ok.gram()[(0, 1)], 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state(n: usize, seed: u64) -> PureState {
            PureState::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        }

        proptest! {
            #[test]
            fn projector_idempotent_unit_trace(n in 2usize..7, seed in any::<u64>()) {
                let p = projector(&state(n, seed));
                prop_assert!(max_abs(&(p.matrix() * p.matrix() - p.matrix())) < 1e-11);
                prop_assert!((p.trace() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn traceless_part_is_idempotent(n in 2usize..6, seed in any::<u64>(), shift in -5.0f64..5.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = HermitianOperator::random(n, &mut rng) + HermitianOperator::identity(n).scale(shift);
                let once = traceless_part(&h);
                prop_assert!((&traceless_part(&once) - &once).max_norm() < 1e-12);
                prop_assert!(once.trace().abs() < 1e-12);
            }

            #[test]
            fn variance_is_shift_invariant(n in 2usize..6, seed in any::<u64>(), shift in -5.0f64..5.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = HermitianOperator::random(n, &mut rng);
                let psi = PureState::random(n, &mut rng).unwrap();
                let shifted = &h + &HermitianOperator::identity(n).scale(shift);
                prop_assert!((energy_variance(&shifted, &psi) - energy_variance(&h, &psi)).abs() < 1e-10);
                prop_assert!((energy_variance(&traceless_part(&h), &psi) - energy_variance(&h, &psi)).abs() < 1e-10);
            }

            #[test]
            fn distance_symmetric_and_phase_blind(
                n in 2usize..6, s1 in any::<u64>(), s2 in any::<u64>(), a in -6.0f64..6.0, b in -6.0f64..6.0
            ) {
                let (p, q) = (state(n, s1), state(n, s2));
                let d = fubini_study_distance(&p, &q);
                prop_assert!((d - fubini_study_distance(&q, &p)).abs() < 1e-14);
                prop_assert!((d - fubini_study_distance(&p.with_phase(a), &q.with_phase(b))).abs() < 1e-12);
                prop_assert!(fubini_study_distance(&p, &p.with_phase(a)) < 1e-7);
                prop_assert!((0.0..=FRAC_PI_2).contains(&d));
            }

            #[test]
            fn gram_schmidt_reconstructs_target(n in 2usize..6, s1 in any::<u64>(), s2 in any::<u64>()) {
                let (pi, pf) = (state(n, s1), state(n, s2));
                let fp = gram_schmidt_final(&pi, &pf).unwrap();
                prop_assert!(pi.inner(&fp).norm() < 1e-12);
                let rebuilt = pi.amplitudes() * pi.inner(&pf) + fp.amplitudes() * fp.inner(&pf);
                let diff = rebuilt - pf.amplitudes();
                prop_assert!(diff.iter().all(|z| z.norm() < 1e-11));
                let d = fubini_study_distance(&pi, &pf);
                let end = pi.amplitudes() * Complex64::from(d.cos()) + fp.amplitudes() * Complex64::from(d.sin());
                let end = PureState::new(end).unwrap();
                prop_assert!(end.infidelity(&pf) < 1e-12);
            }
        }
    }
}
