//! Parameter and state types shared across the crate.
//!
//! Basis convention: states are written in the ordered basis (|e⟩, |g⟩), so
//! σ⁻ = |g⟩⟨e| has matrix form `[[0, 0], [1, 0]]` and σ_z|e⟩ = |e⟩. The
//! system Hamiltonian is H_s = ω σ_z / 2.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the qubit + lossy cavity + bath model.
///
/// `gamma_w = f64::INFINITY` selects the memory-less (Markov) bath limit,
/// where closed forms are used instead of the finite-memory cubic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Qubit frequency ω.
    pub omega: f64,
    /// Cavity frequency ω_c.
    pub omega_c: f64,
    /// Bath central frequency Ω_w.
    pub omega_w: f64,
    /// Qubit–cavity coupling κ.
    pub kappa: f64,
    /// Bath memory rate γ_w (larger means shorter memory).
    pub gamma_w: f64,
    /// Cavity–bath coupling strength Γ_w.
    pub bath_coupling: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            omega_c: 1.0,
            omega_w: 1.0,
            kappa: 0.43,
            gamma_w: 0.9,
            bath_coupling: 1.0,
        }
    }
}

impl ModelParams {
    /// Resonant parameters with ω = ω_c = Ω_w = 1 and Γ_w = 1.
    pub fn resonant(gamma_w: f64, kappa: f64) -> Self {
        Self { gamma_w, kappa, ..Self::default() }
    }

    /// Resonant parameters in the memory-less bath limit γ_w → ∞.
    pub fn markov_limit(kappa: f64, bath_coupling: f64) -> Self {
        Self { kappa, bath_coupling, gamma_w: f64::INFINITY, ..Self::default() }
    }

    pub fn with_omega(self, omega: f64) -> Self {
        Self { omega, omega_c: omega, omega_w: omega, ..self }
    }

    pub fn is_markov_limit(&self) -> bool {
        self.gamma_w == f64::INFINITY
    }

    /// True iff ω, ω_c and Ω_w are exactly equal.
    pub fn is_resonant(&self) -> bool {
        self.omega == self.omega_c && self.omega_c == self.omega_w
    }

    /// Bath correlation at zero lag, α_w(t, t) = γ_w Γ_w / 2.
    pub fn alpha_w0(&self) -> f64 {
        0.5 * self.gamma_w * self.bath_coupling
    }

    pub fn validate(self) -> Result<Self> {
        for (name, value) in [
            ("omega", self.omega),
            ("omega_c", self.omega_c),
            ("omega_w", self.omega_w),
            ("kappa", self.kappa),
            ("bath_coupling", self.bath_coupling),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFinite { name, value });
            }
        }
        if self.gamma_w.is_nan() {
            return Err(Error::NonFinite { name: "gamma_w", value: self.gamma_w });
        }
        if self.gamma_w <= 0.0 {
            return Err(Error::NonPositiveRate { name: "gamma_w", value: self.gamma_w });
        }
        if self.bath_coupling <= 0.0 {
            return Err(Error::NonPositiveRate { name: "bath_coupling", value: self.bath_coupling });
        }
        if self.kappa < 0.0 {
            return Err(Error::NegativeCoupling(self.kappa));
        }
        Ok(self)
    }
}

/// Returns `p` unchanged when all parameter invariants hold.
pub fn validate_params(p: ModelParams) -> Result<ModelParams> {
    p.validate()
}

/// Pure qubit state (c_e, c_g). Trajectory evolution may leave it unnormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState2 {
    pub e: C64,
    pub g: C64,
}

impl PureState2 {
    pub const EXCITED: Self = Self { e: C64::new(1.0, 0.0), g: C64::new(0.0, 0.0) };
    pub const GROUND: Self = Self { e: C64::new(0.0, 0.0), g: C64::new(1.0, 0.0) };

    pub fn new(e: C64, g: C64) -> Self {
        Self { e, g }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.e.norm_sqr() + self.g.norm_sqr()
    }

    pub fn outer(&self) -> DensityMatrix2 {
        DensityMatrix2 {
            ee: self.e * self.e.conj(),
            eg: self.e * self.g.conj(),
            ge: self.g * self.e.conj(),
            gg: self.g * self.g.conj(),
        }
    }
}

/// Bloch-sphere initial state (cos(θ/2), sin(θ/2)) for θ ∈ [0, π].
pub fn initial_state(theta: f64) -> Result<PureState2> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::OutOfRangeAngle(theta));
    }
    let (s, c) = (0.5 * theta).sin_cos();
    Ok(PureState2::new(C64::new(c, 0.0), C64::new(s, 0.0)))
}

/// 2×2 density matrix in the (|e⟩, |g⟩) basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix2 {
    pub ee: C64,
    pub eg: C64,
    pub ge: C64,
    pub gg: C64,
}

impl DensityMatrix2 {
    pub fn excited() -> Self {
        PureState2::EXCITED.outer()
    }

    pub fn ground() -> Self {
        PureState2::GROUND.outer()
    }

    pub fn maximally_mixed() -> Self {
        let half = C64::new(0.5, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self { ee: half, eg: zero, ge: zero, gg: half }
    }

    /// Density matrix from a Bloch vector (x, y, z).
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Self {
        let eg = C64::new(0.5 * x, -0.5 * y);
        Self {
            ee: C64::new(0.5 * (1.0 + z), 0.0),
            eg,
            ge: eg.conj(),
            gg: C64::new(0.5 * (1.0 - z), 0.0),
        }
    }

    pub fn trace(&self) -> C64 {
        self.ee + self.gg
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.ge - self.eg.conj()).norm() <= tol
            && self.ee.im.abs() <= tol
            && self.gg.im.abs() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.ee.re + self.gg.re);
        let half_gap = 0.5 * (self.ee.re - self.gg.re);
        let off = 0.5 * (self.eg + self.ge.conj());
        let r = half_gap.hypot(off.norm());
        [mean - r, mean + r]
    }

    /// Bloch vector (⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩).
    pub fn bloch(&self) -> [f64; 3] {
        let off = 0.5 * (self.eg + self.ge.conj());
        [2.0 * off.re, -2.0 * off.im, self.ee.re - self.gg.re]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            self.ee - other.ee,
            self.eg - other.eg,
            self.ge - other.ge,
            self.gg - other.gg,
        ]
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.ee, self.eg, self.ge, self.gg]
    }
}

/// Uniform time grid t_k = t0 + k·dt, k = 0..=n_steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl Grid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidGrid(format!("t0 must be finite, got {t0}")));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid on [0, t_max]; `t_max/dt` must be an integer to within 1e-6 steps.
    pub fn span(t_max: f64, dt: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        let steps = t_max / dt;
        let n = steps.round();
        if (steps - n).abs() > 1e-6 || n < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "t_max = {t_max} is not a whole number of steps dt = {dt}"
            )));
        }
        Self::new(0.0, dt, n as usize)
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n_steps)
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.t(k))
    }

    /// The same interval sampled `factor` times more densely.
    pub fn refined(&self, factor: usize) -> Self {
        Self { t0: self.t0, dt: self.dt / factor as f64, n_steps: self.n_steps * factor }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl Channel {
    pub fn len(&self) -> usize {
        match self {
            Channel::Real(v) => v.len(),
            Channel::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named channels sampled on one shared grid. Missing samples (poles) are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub grid: Grid,
    channels: BTreeMap<String, Channel>,
}

impl TimeSeries {
    pub fn new(grid: Grid) -> Self {
        Self { grid, channels: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, channel: Channel) -> Result<()> {
        if channel.len() != self.grid.len() {
            return Err(Error::InvalidGrid(format!(
                "channel length {} does not match grid length {}",
                channel.len(),
                self.grid.len()
            )));
        }
        self.channels.insert(name.into(), channel);
        Ok(())
    }

    pub fn insert_real(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        self.insert(name, Channel::Real(values))
    }

    pub fn insert_complex(&mut self, name: impl Into<String>, values: Vec<C64>) -> Result<()> {
        self.insert(name, Channel::Complex(values))
    }

    pub fn get(&self, name: &str) -> Option<&Channel> {
        self.channels.get(name)
    }

    pub fn real(&self, name: &str) -> Option<&[f64]> {
        match self.channels.get(name)? {
            Channel::Real(v) => Some(v),
            Channel::Complex(_) => None,
        }
    }

    pub fn complex(&self, name: &str) -> Option<&[C64]> {
        match self.channels.get(name)? {
            Channel::Complex(v) => Some(v),
            Channel::Real(_) => None,
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    /// Merges channels of `other`, which must share the grid.
    pub fn merge(&mut self, other: TimeSeries) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::InvalidGrid("cannot merge series on different grids".into()));
        }
        self.channels.extend(other.channels);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reference_point_is_valid_and_resonant() {
        let p = validate_params(ModelParams::resonant(0.9, 0.43)).unwrap();
        assert!(p.is_resonant());
        assert_eq!(p, ModelParams::resonant(0.9, 0.43));
    }

    #[test]
    fn rejects_bad_rates_and_couplings() {
        let p = ModelParams { gamma_w: -1.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(Error::NonPositiveRate { name: "gamma_w", .. })));
        let p = ModelParams { bath_coupling: 0.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(Error::NonPositiveRate { .. })));
        let p = ModelParams { kappa: -0.1, ..Default::default() };
        assert_eq!(p.validate(), Err(Error::NegativeCoupling(-0.1)));
        assert!(ModelParams { kappa: 0.0, ..Default::default() }.validate().is_ok());
        assert!(ModelParams::markov_limit(0.5, 1.0).validate().is_ok());
    }

    #[test]
    fn detuning_breaks_resonance() {
        let p = ModelParams { omega: 1.5, ..Default::default() };
        assert!(!p.is_resonant());
    }

    #[test]
    fn pole_states() {
        let e = initial_state(0.0).unwrap();
        assert_eq!(e, PureState2::EXCITED);
        let g = initial_state(PI).unwrap();
        assert!(g.e.norm() < 1e-16 && (g.g.re - 1.0).abs() < 1e-16);
        let s = initial_state(PI / 4.0).unwrap();
        assert!((s.e.re - (PI / 8.0).cos()).abs() < 1e-16);
        assert!((s.g.re - (PI / 8.0).sin()).abs() < 1e-16);
        assert_eq!(initial_state(-0.1), Err(Error::OutOfRangeAngle(-0.1)));
        assert!(initial_state(3.2).is_err());
    }

    #[test]
    fn density_helpers() {
        let rho = DensityMatrix2::maximally_mixed();
        assert_eq!(rho.bloch(), [0.0, 0.0, 0.0]);
        assert_eq!(DensityMatrix2::excited().bloch(), [0.0, 0.0, 1.0]);
        let r = DensityMatrix2::from_bloch(0.3, -0.2, 0.5);
        let b = r.bloch();
        assert!((b[0] - 0.3).abs() < 1e-15 && (b[1] + 0.2).abs() < 1e-15);
        assert!(r.is_hermitian(1e-15));
        let ev = r.eigenvalues();
        let norm = (0.09f64 + 0.04 + 0.25).sqrt();
        assert!((ev[0] - 0.5 * (1.0 - norm)).abs() < 1e-15);
    }

    #[test]
    fn grid_span() {
        let g = Grid::span(20.0, 0.01).unwrap();
        assert_eq!(g.len(), 2001);
        assert!((g.t_end() - 20.0).abs() < 1e-12);
        assert!(Grid::span(1.0, 0.3).is_err());
        assert!(Grid::new(0.0, 0.0, 4).is_err());
    }

    #[test]
    fn series_rejects_length_mismatch() {
        let mut s = TimeSeries::new(Grid::span(1.0, 0.5).unwrap());
        assert!(s.insert_real("x", vec![0.0; 2]).is_err());
        s.insert_real("x", vec![0.0; 3]).unwrap();
        assert_eq!(s.real("x").unwrap().len(), 3);
    }

    proptest::proptest! {
        #[test]
        fn initial_state_is_normalized(theta in 0.0..=PI) {
            let s = initial_state(theta).unwrap();
            proptest::prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        }

        #[test]
        fn validation_is_idempotent(k in 0.0..2.0f64, gw in 1e-3..5.0f64, big in 1e-3..3.0f64) {
            let p = ModelParams { kappa: k, gamma_w: gw, bath_coupling: big, ..Default::default() };
            let once = p.validate().unwrap();
            proptest::prop_assert_eq!(once.validate().unwrap(), once);
        }
    }
}
