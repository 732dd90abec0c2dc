//! One qubit driven by a field confined to the x-y plane.
//!
//! With the budget `Tr H^2 / 2 = w^2` and the forbidden direction `sigma_z`,
//! the optimal field has constant magnitude `w` and rotates at angular
//! velocity `2 Omega`, where `Omega` is the ratio of the two multipliers:
//!
//! ```text
//! H(t) = -sigma . B(t),   B(t) = w (sin 2 Omega t, cos 2 Omega t, 0)
//! U(t) = exp(i Omega t sigma_z) exp(-i [H(0) + Omega sigma_z] t)
//! ```
//!
//! Starting from `+x` (the state `(1, 1)/sqrt 2`), the orbit returns to the
//! equator whenever `sin 2 Omega' t = 0` with `Omega' = sqrt(w^2 + Omega^2)`.
//! It reaches the antipode `-x` exactly for the families
//! `2|Omega| T = k pi`, `2 Omega' T = l pi` with `l > k >= 0`, `k + l` odd.
//! Each family is a local optimum; durations must be compared to find the
//! global one.
//!
//! The sign of `Omega` is not fixed by the boundary conditions. Families are
//! built with `Omega >= 0` ([`Orientation::Canonical`]); the mirror image in
//! the x-z plane is [`Orientation::Mirrored`].

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{expectation, CMatrix, CVector, HermitianOperator, PureState};
use crate::optimize::{bisect, golden_section, levenberg_marquardt};
use crate::propagator::{HamiltonianSchedule, Sample, Trajectory};

/// `|<sigma_z>|` below this counts as lying on the equator.
pub const EQUATOR_TOL: f64 = 1e-9;
/// Largest `|Delta sigma_z|` between neighbouring samples accepted by [`count_nodes`].
pub const MAX_Z_GAP: f64 = 0.5;
/// Bloch-vector distance under which a target counts as reached.
pub const REACH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// `Omega >= 0`.
    Canonical,
    /// `Omega <= 0`; the orbit reflected through the x-z plane.
    Mirrored,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Canonical => 1.0,
            Orientation::Mirrored => -1.0,
        }
    }
}

/// The closed-form rotating-field solution for given budget and rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingField {
    pub omega: f64,
    /// `Omega`; the field turns at `2 Omega`.
    pub rate: f64,
}

impl RotatingField {
    /// `Omega' = sqrt(w^2 + Omega^2)`.
    pub fn orbit_rate(&self) -> f64 {
        self.omega.hypot(self.rate)
    }

    /// `<sigma>(t)` for the orbit starting at `+x`.
    pub fn bloch(&self, t: f64) -> [f64; 3] {
        let op = self.orbit_rate();
        let (s, c) = (2.0 * self.rate * t).sin_cos();
        let (sp, cp) = (2.0 * op * t).sin_cos();
        let r = self.rate / op;
        [c * cp + r * s * sp, -s * cp + r * c * sp, self.omega / op * sp]
    }

    /// `B(t) = w (sin 2 Omega t, cos 2 Omega t, 0)`.
    pub fn field(&self, t: f64) -> [f64; 3] {
        let (s, c) = (2.0 * self.rate * t).sin_cos();
        [self.omega * s, self.omega * c, 0.0]
    }

    /// `H(t) = -sigma . B(t)`.
    pub fn hamiltonian(&self, t: f64) -> HermitianOperator {
        let b = self.field(t);
        HermitianOperator::bloch([-b[0], -b[1], -b[2]])
    }

    /// `Delta E(t) = w [1 - (Omega/Omega' sin 2 Omega' t)^2]^(1/2)`.
    pub fn speed(&self, t: f64) -> f64 {
        let op = self.orbit_rate();
        let q = self.rate / op * (2.0 * op * t).sin();
        self.omega * (1.0 - q * q).max(0.0).sqrt()
    }

    /// `U(t) = exp(i Omega t sigma_z) exp(-i [H(0) + Omega sigma_z] t)`.
    pub fn unitary(&self, t: f64) -> CMatrix {
        let z = HermitianOperator::pauli_z();
        let generator = self.hamiltonian(0.0) + z.scale(self.rate);
        z.propagator(-self.rate * t) * generator.propagator(t)
    }

    /// `U(t) |+x>`.
    pub fn state(&self, t: f64) -> PureState {
        plus_x().evolved(&self.unitary(t)).expect("unitary image of a unit vector")
    }
}

/// `(1, 1)/sqrt 2`, the `+x` eigenstate.
pub fn plus_x() -> PureState {
    PureState::from_real(&[1.0, 1.0]).expect("nonzero")
}

/// `(1, -1)/sqrt 2`, the `-x` eigenstate.
pub fn minus_x() -> PureState {
    PureState::from_real(&[1.0, -1.0]).expect("nonzero")
}

/// `(<sigma_x>, <sigma_y>, <sigma_z>)`.
pub fn bloch_vector(psi: &PureState) -> [f64; 3] {
    [
        expectation(&HermitianOperator::pauli_x(), psi),
        expectation(&HermitianOperator::pauli_y(), psi),
        expectation(&HermitianOperator::pauli_z(), psi),
    ]
}

fn distance3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// One `(k, l)` branch of antipodal solutions, possibly truncated to end
/// earlier than its natural duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitFamily {
    k: u32,
    l: u32,
    orientation: Orientation,
    field: RotatingField,
    orbit_rate: f64,
    natural_duration: f64,
    duration: f64,
}

impl QubitFamily {
    pub fn new(k: u32, l: u32, omega: f64, orientation: Orientation) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
        }
        if l <= k || (k + l) % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "(k, l) = ({k}, {l}) needs l > k >= 0 with k + l odd"
            )));
        }
        let (kf, lf) = (k as f64, l as f64);
        let root = ((l * l - k * k) as f64).sqrt();
        let rate = orientation.sign() * kf * omega / root;
        let natural_duration = FRAC_PI_2 * root / omega;
        Ok(Self {
            k,
            l,
            orientation,
            field: RotatingField { omega, rate },
            orbit_rate: lf * omega / root,
            natural_duration,
            duration: natural_duration,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn omega(&self) -> f64 {
        self.field.omega
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Signed `Omega = lambda_2 / lambda_1`.
    pub fn field_rate(&self) -> f64 {
        self.field.rate
    }

    /// `Omega'`.
    pub fn orbit_rate(&self) -> f64 {
        self.orbit_rate
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// `(pi/2) sqrt(l^2 - k^2) / w`, the time at which the antipode is reached.
    pub fn natural_duration(&self) -> f64 {
        self.natural_duration
    }

    pub fn is_truncated(&self) -> bool {
        self.duration < self.natural_duration
    }

    pub fn rotating_field(&self) -> RotatingField {
        self.field
    }

    /// The same family, stopped at `t`.
    pub fn truncated(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= self.natural_duration) {
            return Err(Error::OutOfRange { t, duration: self.natural_duration });
        }
        Ok(Self { duration: t, ..*self })
    }

    pub fn mirrored(&self) -> Self {
        let orientation = match self.orientation {
            Orientation::Canonical => Orientation::Mirrored,
            Orientation::Mirrored => Orientation::Canonical,
        };
        Self { orientation, field: RotatingField { rate: -self.field.rate, ..self.field }, ..*self }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.duration.max(1.0);
        if !(t >= -slack && t <= self.duration + slack) {
            return Err(Error::OutOfRange { t, duration: self.duration });
        }
        Ok(())
    }

    pub fn schedule(&self) -> HamiltonianSchedule {
        let field = self.field;
        HamiltonianSchedule::new(self.duration, move |t| field.hamiltonian(t))
            .expect("Pauli combinations are traceless")
    }

    /// Exact samples of the state and Hamiltonian on a uniform grid.
    pub fn closed_form_trajectory(&self, steps: usize) -> Result<Trajectory> {
        closed_form_trajectory(self.field, self.duration, steps, None)
    }
}

fn closed_form_trajectory(
    field: RotatingField,
    duration: f64,
    steps: usize,
    frame: Option<&CMatrix>,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
    }
    let dt = duration / steps as f64;
    let samples = (0..=steps)
        .map(|j| {
            let t = j as f64 * dt;
            let (state, h) = match frame {
                Some(r) => (
                    field.state(t).evolved(r).expect("unitary"),
                    field.hamiltonian(t).conjugated(r),
                ),
                None => (field.state(t), field.hamiltonian(t)),
            };
            Sample { t, state, h }
        })
        .collect();
    Trajectory::new(dt, samples)
}

/// The serializable identity of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub k: u32,
    pub l: u32,
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub field_rate: f64,
    #[serde(rename = "OmegaPrime")]
    pub orbit_rate: f64,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl From<&QubitFamily> for FamilyRecord {
    fn from(f: &QubitFamily) -> Self {
        Self {
            k: f.k,
            l: f.l,
            omega: f.omega(),
            field_rate: f.field_rate(),
            orbit_rate: f.orbit_rate,
            duration: f.duration,
        }
    }
}

/// Every canonical family with `l <= max_l`, sorted by duration.
pub fn enumerate_families(omega: f64, max_l: u32) -> Result<Vec<QubitFamily>> {
    if max_l == 0 {
        return Err(Error::InvalidArgument("max_l must be at least 1".into()));
    }
    let mut out = Vec::new();
    for l in 1..=max_l {
        for k in (0..l).filter(|k| (k + l) % 2 == 1) {
            out.push(QubitFamily::new(k, l, omega, Orientation::Canonical)?);
        }
    }
    // l^2 - k^2 is an exact integer key
    out.sort_by_key(|f| (f.l * f.l - f.k * f.k, f.k));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochSample {
    pub t: f64,
    pub sigma: [f64; 3],
    pub field: [f64; 3],
    /// `Delta E(t)`.
    pub speed: f64,
}

/// `<sigma>(t)`, `B(t)` and `Delta E(t)` on `samples` evenly spaced times in `[0, T]`.
pub fn bloch_trajectory(family: &QubitFamily, samples: usize) -> Result<Vec<BlochSample>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {samples}")));
    }
    let field = family.field;
    let dt = family.duration / (samples - 1) as f64;
    Ok((0..samples)
        .map(|j| {
            let t = if j == samples - 1 { family.duration } else { j as f64 * dt };
            BlochSample { t, sigma: field.bloch(t), field: field.field(t), speed: field.speed(t) }
        })
        .collect())
}

/// `B(t)`.
pub fn field_profile(family: &QubitFamily, t: f64) -> Result<[f64; 3]> {
    family.check_time(t)?;
    Ok(family.field.field(t))
}

/// `Delta E(t)`.
pub fn variance_profile(family: &QubitFamily, t: f64) -> Result<f64> {
    family.check_time(t)?;
    Ok(family.field.speed(t))
}

fn z_signs(samples: &[BlochSample]) -> Result<Vec<(usize, f64)>> {
    for w in samples.windows(2) {
        let gap = (w[1].sigma[2] - w[0].sigma[2]).abs();
        if gap > MAX_Z_GAP {
            return Err(Error::DensityTooLow { gap, limit: MAX_Z_GAP });
        }
    }
    let last = samples.len().saturating_sub(1);
    Ok(samples
        .iter()
        .enumerate()
        .filter(|&(j, s)| j > 0 && j < last && s.sigma[2].abs() >= EQUATOR_TOL)
        .map(|(j, s)| (j, s.sigma[2].signum()))
        .collect())
}

/// Number of sign changes of `<sigma_z>` strictly inside the sampled interval.
pub fn count_nodes(samples: &[BlochSample]) -> Result<usize> {
    let signs = z_signs(samples)?;
    Ok(signs.windows(2).filter(|w| w[0].1 != w[1].1).count())
}

/// Interior equator crossings, bracketed on a grid of `samples` points and
/// refined by bisection on the closed-form `<sigma_z>(t)` to `1e-13`.
pub fn node_times(family: &QubitFamily, samples: usize) -> Result<Vec<f64>> {
    let grid = bloch_trajectory(family, samples)?;
    let signs = z_signs(&grid)?;
    let field = family.field;
    Ok(signs
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| {
            // the crossing lies between the last sample of one sign and the
            // first of the other
            let (a, b) = (grid[w[0].0].t, grid[w[1].0].t);
            bisect(|t| field.bloch(t)[2], a, b, 1e-13)
        })
        .collect())
}

/// The fastest listed family reaching a target, or the trivial answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QubitOptimum {
    Family(QubitFamily),
    /// The target is the initial ray; `T = 0`.
    Stationary,
}

impl QubitOptimum {
    pub fn duration(&self) -> f64 {
        match self {
            QubitOptimum::Family(f) => f.duration(),
            QubitOptimum::Stationary => 0.0,
        }
    }
}

/// Earliest `t` in `(0, horizon]` at which the orbit reaches `target` within
/// [`REACH_TOL`] in Bloch distance.
fn earliest_hit(field: RotatingField, target: [f64; 3], horizon: f64) -> Option<f64> {
    let grid = 2048.max((horizon * field.orbit_rate() * 64.0) as usize);
    let dist = |t: f64| distance3(field.bloch(t), target);
    let step = horizon / grid as f64;
    let values: Vec<f64> = (0..=grid).map(|j| dist(j as f64 * step)).collect();
    for j in 1..=grid {
        let left = values[j - 1];
        let right = if j < grid { values[j + 1] } else { f64::INFINITY };
        if values[j] <= left && values[j] <= right {
            let lo = (j - 1) as f64 * step;
            let hi = ((j + 1) as f64 * step).min(horizon);
            let (t, d) = golden_section(dist, lo, hi, 1e-15 * horizon.max(1.0));
            let (t, d) = if j == grid && values[grid] < d { (horizon, values[grid]) } else { (t, d) };
            if d < REACH_TOL {
                return Some(t);
            }
        }
    }
    None
}

/// Among `families`, the one reaching the target ray soonest, truncated at
/// the time it gets there.
pub fn global_optimum(families: &[QubitFamily], target: &PureState) -> Result<QubitOptimum> {
    if families.is_empty() {
        return Err(Error::InvalidArgument("no families to compare".into()));
    }
    if target.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: target.dim() });
    }
    if target.ray_eq(&plus_x(), 1e-15) || distance3(bloch_vector(target), [1.0, 0.0, 0.0]) < REACH_TOL {
        return Ok(QubitOptimum::Stationary);
    }
    let s_target = bloch_vector(target);
    let mut best: Option<(f64, QubitFamily)> = None;
    for family in families {
        if let Some(t) = earliest_hit(family.field, s_target, family.natural_duration) {
            // families sharing an orbit tie; keep the earlier-listed one
            if best.as_ref().is_none_or(|(bt, _)| t < *bt - 1e-9 * *bt) {
                best = Some((t, *family));
            }
        }
    }
    let (t, family) = best.ok_or(Error::TargetUnreachable)?;
    let chosen = if (family.natural_duration - t).abs() <= 1e-9 * family.natural_duration {
        family
    } else {
        family.truncated(t)?
    };
    Ok(QubitOptimum::Family(chosen))
}

/// A rotating-field orbit with an arbitrary rate, in the frame where the
/// initial state is rotated about z by `frame_angle` from `+x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedSolution {
    pub field: RotatingField,
    pub duration: f64,
    pub frame_angle: f64,
}

impl RestrictedSolution {
    fn frame(&self) -> CMatrix {
        z_rotation(self.frame_angle)
    }

    pub fn state(&self, t: f64) -> PureState {
        self.field.state(t).evolved(&self.frame()).expect("unitary")
    }

    pub fn hamiltonian(&self, t: f64) -> HermitianOperator {
        self.field.hamiltonian(t).conjugated(&self.frame())
    }

    pub fn schedule(&self) -> HamiltonianSchedule {
        let field = self.field;
        let frame = self.frame();
        HamiltonianSchedule::new(self.duration, move |t| field.hamiltonian(t).conjugated(&frame))
            .expect("traceless")
    }

    pub fn closed_form_trajectory(&self, steps: usize) -> Result<Trajectory> {
        closed_form_trajectory(self.field, self.duration, steps, Some(&self.frame()))
    }
}

/// `exp(-i phi sigma_z / 2)`: turns Bloch vectors by `phi` about z.
pub fn z_rotation(phi: f64) -> CMatrix {
    HermitianOperator::pauli_z().propagator(0.5 * phi)
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Rates are scanned over `[-max_rate, max_rate]` in units of omega.
    pub max_rate: f64,
    pub rate_samples: usize,
    pub time_samples: usize,
    /// Longest duration considered.
    pub horizon: f64,
}

impl ScanOptions {
    pub fn for_omega(omega: f64) -> Self {
        Self { max_rate: 4.0, rate_samples: 241, time_samples: 480, horizon: 3.0 * FRAC_PI_2 / omega }
    }
}

/// Fastest rotating-field orbit from `+x` to `target` over all rates: grid
/// scan in `(Omega, t)` followed by root polishing of the terminal condition.
pub fn scan_optimum(omega: f64, target: &PureState, opts: ScanOptions) -> Result<Option<RestrictedSolution>> {
    if target.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: target.dim() });
    }
    let s_target = bloch_vector(target);
    if distance3(s_target, [1.0, 0.0, 0.0]) < REACH_TOL {
        return Ok(None);
    }
    let (nr, nt) = (opts.rate_samples.max(3), opts.time_samples.max(3));
    let rate_at = |i: usize| omega * opts.max_rate * (2.0 * i as f64 / (nr - 1) as f64 - 1.0);
    let time_at = |j: usize| opts.horizon * j as f64 / (nt - 1) as f64;
    let dist = |rate: f64, t: f64| distance3(RotatingField { omega, rate }.bloch(t), s_target);
    let grid: Vec<Vec<f64>> =
        (0..nr).map(|i| (0..nt).map(|j| dist(rate_at(i), time_at(j))).collect()).collect();

    let mut best: Option<RestrictedSolution> = None;
    for i in 0..nr {
        for j in 1..nt {
            let v = grid[i][j];
            let is_min = (i.saturating_sub(1)..=(i + 1).min(nr - 1))
                .flat_map(|a| (j - 1..=(j + 1).min(nt - 1)).map(move |b| (a, b)))
                .all(|(a, b)| grid[a][b] >= v);
            if !is_min {
                continue;
            }
            let residual = |x: &[f64]| {
                let s = RotatingField { omega, rate: x[0] }.bloch(x[1]);
                vec![s[0] - s_target[0], s[1] - s_target[1], s[2] - s_target[2]]
            };
            let polished = levenberg_marquardt(residual, &[rate_at(i), time_at(j)], 60, 1e-30);
            let (rate, t) = (polished.x[0], polished.x[1]);
            if polished.value.sqrt() < REACH_TOL
                && t > 0.0
                && t <= opts.horizon * (1.0 + 1e-9)
                && best.is_none_or(|b| t < b.duration)
            {
                best = Some(RestrictedSolution { field: RotatingField { omega, rate }, duration: t, frame_angle: 0.0 });
            }
        }
    }
    Ok(best)
}

/// Outcome of the restricted-field problem for arbitrary endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestrictedOutcome {
    Solution { solution: RestrictedSolution, family: Option<QubitFamily> },
    Stationary,
}

/// Solves from an equatorial initial state by rotating it onto `+x`,
/// comparing the `(k, l)` families up to `max_l`, and falling back to a rate
/// scan when none of them passes through the target.
pub fn solve_restricted(
    psi_i: &PureState,
    psi_f: &PureState,
    omega: f64,
    max_l: u32,
) -> Result<RestrictedOutcome> {
    if psi_i.dim() != 2 || psi_f.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: psi_i.dim().max(psi_f.dim()) });
    }
    let s = bloch_vector(psi_i);
    if s[2].abs() >= EQUATOR_TOL {
        return Err(Error::InvalidArgument(format!(
            "initial state must lie on the equator, <sigma_z> = {}",
            s[2]
        )));
    }
    let frame_angle = s[1].atan2(s[0]);
    let target = psi_f.evolved(&z_rotation(-frame_angle))?;
    match global_optimum(&enumerate_families(omega, max_l)?, &target) {
        Ok(QubitOptimum::Stationary) => Ok(RestrictedOutcome::Stationary),
        Ok(QubitOptimum::Family(family)) => Ok(RestrictedOutcome::Solution {
            solution: RestrictedSolution { field: family.field, duration: family.duration, frame_angle },
            family: Some(family),
        }),
        Err(Error::TargetUnreachable) => {
            let mut opts = ScanOptions::for_omega(omega);
            opts.horizon = FRAC_PI_2 * max_l.max(3) as f64 / omega;
            match scan_optimum(omega, &target, opts)? {
                Some(sol) => Ok(RestrictedOutcome::Solution {
                    solution: RestrictedSolution { frame_angle, ..sol },
                    family: None,
                }),
                None => Err(Error::TargetUnreachable),
            }
        }
        Err(e) => Err(e),
    }
}

/// Amplitudes of the state with Bloch vector `s` (unit length).
pub fn state_from_bloch(s: [f64; 3]) -> Result<PureState> {
    let theta = s[2].clamp(-1.0, 1.0).acos();
    let phi = s[1].atan2(s[0]);
    let amps = CVector::from_column_slice(&[
        Complex64::new((0.5 * theta).cos(), 0.0),
        Complex64::from_polar((0.5 * theta).sin(), phi),
    ]);
    PureState::new(amps)
}
