//! Physical parameters, the moment-state layout and initial states.
//!
//! Moments are stored for the slowly varying operators of the rotating frame
//! set by the probe (`ω_p`) and microwave (`ω_m`) frequencies. Each elementary
//! operator carries a pair of integer weights `(n_p, n_m)`; the stored variable
//! is the lab-frame operator multiplied by `exp(i (n_p ω_p + n_m ω_m) t)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{param, Error, Result};
use crate::matrix::Mat3;

const TAU: f64 = 2.0 * PI;

/// Parameters in ordinary frequency units, as they appear in configuration
/// files (`2π×f` quantities are given as `f`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsHz {
    pub n_atoms: u64,
    pub omega_c: f64,
    pub omega_32: f64,
    pub omega_21: f64,
    pub kappa: f64,
    pub g: f64,
    pub gamma: f64,
    pub chi: f64,
    /// Probe offset from the cavity frequency. `None` places the probe on the
    /// upper dressed state, `√(N/2)·g` above the cavity.
    pub omega_p_offset: Option<f64>,
    /// Probe strength in √Hz.
    pub omega_prob_amp: f64,
    /// Microwave offset from the hyperfine frequency.
    pub omega_m_offset: f64,
    pub omega_mw_amp: f64,
    pub eta: f64,
}

impl Default for ParamsHz {
    fn default() -> Self {
        Self {
            n_atoms: 10_000,
            omega_c: 377e12,
            omega_32: 377e12,
            omega_21: 6.8e9,
            kappa: 11.1e6,
            g: 0.253e6,
            gamma: 5.75e6,
            chi: 10e3,
            omega_p_offset: None,
            omega_prob_amp: 1e4,
            omega_m_offset: 0.0,
            omega_mw_amp: 1e6,
            eta: 0.12,
        }
    }
}

impl ParamsHz {
    /// The single conversion point from configuration units to angular units.
    pub fn to_angular(&self) -> Result<PhysicalParams> {
        let n = self.n_atoms as f64;
        let offset = self
            .omega_p_offset
            .unwrap_or_else(|| (n / 2.0).sqrt() * self.g);
        let omega_c = TAU * self.omega_c;
        let kappa = TAU * self.kappa;
        let omega_21 = TAU * self.omega_21;
        let params = PhysicalParams {
            n_atoms: self.n_atoms,
            omega_c,
            omega_32: TAU * self.omega_32,
            omega_21,
            kappa,
            kappa_1: kappa / 2.0,
            kappa_2: kappa / 2.0,
            g: TAU * self.g,
            gamma: TAU * self.gamma,
            chi: TAU * self.chi,
            omega_p: omega_c + TAU * offset,
            omega_prob_amp: TAU * self.omega_prob_amp,
            omega_m: omega_21 + TAU * self.omega_m_offset,
            omega_mw_amp: TAU * self.omega_mw_amp,
            eta: self.eta,
        };
        params.validate()?;
        Ok(params)
    }
}

/// System parameters in angular units (rad/s; the probe strength in √(rad/s)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub n_atoms: u64,
    pub omega_c: f64,
    pub omega_32: f64,
    pub omega_21: f64,
    /// Total cavity loss, `kappa_1 + kappa_2`.
    pub kappa: f64,
    /// Loss through the input mirror (sets the drive strength).
    pub kappa_1: f64,
    /// Loss through the output mirror (sets the detected signal).
    pub kappa_2: f64,
    pub g: f64,
    pub gamma: f64,
    pub chi: f64,
    pub omega_p: f64,
    pub omega_prob_amp: f64,
    pub omega_m: f64,
    pub omega_mw_amp: f64,
    pub eta: f64,
}

/// Default parameters of the probed rubidium ensemble with symmetric mirrors.
pub fn default_params() -> PhysicalParams {
    ParamsHz::default()
        .to_angular()
        .expect("default parameters are valid")
}

impl Default for PhysicalParams {
    fn default() -> Self {
        default_params()
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(param("n_atoms", "must be at least 1"));
        }
        let positive = [("kappa", self.kappa), ("kappa_1", self.kappa_1), ("kappa_2", self.kappa_2)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(name, format!("must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("g", self.g),
            ("gamma", self.gamma),
            ("chi", self.chi),
            ("omega_prob_amp", self.omega_prob_amp),
            ("omega_mw_amp", self.omega_mw_amp),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(param(name, format!("must be non-negative and finite, got {v}")));
            }
        }
        for (name, v) in [
            ("omega_c", self.omega_c),
            ("omega_32", self.omega_32),
            ("omega_21", self.omega_21),
            ("omega_p", self.omega_p),
            ("omega_m", self.omega_m),
        ] {
            if !v.is_finite() {
                return Err(param(name, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(param("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if ((self.kappa_1 + self.kappa_2) - self.kappa).abs() > 1e-12 * self.kappa {
            return Err(param("kappa", "must equal kappa_1 + kappa_2"));
        }
        Ok(())
    }

    pub fn n(&self) -> f64 {
        self.n_atoms as f64
    }

    /// Cavity detuning `ω_c − ω_p`.
    pub fn delta_c(&self) -> f64 {
        self.omega_c - self.omega_p
    }

    /// Optical detuning `ω_32 − ω_p`.
    pub fn delta_32(&self) -> f64 {
        self.omega_32 - self.omega_p
    }

    /// Microwave detuning `ω_21 − ω_m`.
    pub fn delta_21(&self) -> f64 {
        self.omega_21 - self.omega_m
    }

    /// Collective coupling `√(N/2)·g` that splits the dressed states.
    pub fn collective_coupling(&self) -> f64 {
        (self.n() / 2.0).sqrt() * self.g
    }

    /// Effective cavity drive rate `Ω_p √κ₁`.
    pub fn drive_rate(&self) -> f64 {
        self.omega_prob_amp * self.kappa_1.sqrt()
    }

    pub fn with_n_atoms(mut self, n_atoms: u64) -> Self {
        self.n_atoms = n_atoms;
        self
    }

    /// Puts the probe `delta` above the upper dressed state `ω_32 + √(N/2)·g`.
    pub fn with_probe_detuning(mut self, delta: f64) -> Self {
        self.omega_p = self.omega_32 + self.collective_coupling() + delta;
        self
    }

    /// Puts the probe `offset` above the bare optical transition.
    pub fn with_probe_offset(mut self, offset: f64) -> Self {
        self.omega_p = self.omega_32 + offset;
        self
    }

    pub fn with_probe_amplitude(mut self, amp: f64) -> Self {
        self.omega_prob_amp = amp;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_decay(mut self, gamma: f64, chi: f64) -> Self {
        self.gamma = gamma;
        self.chi = chi;
        self
    }

    /// Ideal atoms: no spontaneous emission and no dephasing.
    pub fn ideal(self) -> Self {
        self.with_decay(0.0, 0.0)
    }

    pub fn with_mirrors(mut self, kappa_1: f64, kappa_2: f64) -> Self {
        self.kappa_1 = kappa_1;
        self.kappa_2 = kappa_2;
        self.kappa = kappa_1 + kappa_2;
        self
    }
}

/// Atomic transition operator `σ^{lm} = |l⟩⟨m|` on a single atom, levels 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sigma {
    pub l: u8,
    pub m: u8,
}

impl Sigma {
    pub const fn new(l: u8, m: u8) -> Self {
        Self { l, m }
    }

    pub const fn adjoint(self) -> Self {
        Self { l: self.m, m: self.l }
    }

    pub fn is_valid(self) -> bool {
        (1..=3).contains(&self.l) && (1..=3).contains(&self.m)
    }

    /// Every single-atom transition operator, projectors included.
    pub fn all() -> impl Iterator<Item = Sigma> {
        (1..=3u8).flat_map(|l| (1..=3u8).map(move |m| Sigma::new(l, m)))
    }
}

pub const S11: Sigma = Sigma::new(1, 1);
pub const S12: Sigma = Sigma::new(1, 2);
pub const S13: Sigma = Sigma::new(1, 3);
pub const S21: Sigma = Sigma::new(2, 1);
pub const S22: Sigma = Sigma::new(2, 2);
pub const S23: Sigma = Sigma::new(2, 3);
pub const S31: Sigma = Sigma::new(3, 1);
pub const S32: Sigma = Sigma::new(3, 2);
pub const S33: Sigma = Sigma::new(3, 3);

/// Normal-ordered photonic factor of a moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Photon {
    One,
    A,
    Ad,
    AdA,
    AA,
    AdAd,
}

impl Photon {
    pub const fn order(self) -> usize {
        match self {
            Photon::One => 0,
            Photon::A | Photon::Ad => 1,
            _ => 2,
        }
    }

    pub const fn adjoint(self) -> Self {
        match self {
            Photon::One => Photon::One,
            Photon::A => Photon::Ad,
            Photon::Ad => Photon::A,
            Photon::AdA => Photon::AdA,
            Photon::AA => Photon::AdAd,
            Photon::AdAd => Photon::AA,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Photon::One => "",
            Photon::A => "a",
            Photon::Ad => "a†",
            Photon::AdA => "a†a",
            Photon::AA => "aa",
            Photon::AdAd => "a†a†",
        }
    }
}

/// Atomic factor of a moment: nothing, one atom, or two distinct atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atoms {
    None,
    One(Sigma),
    Two(Sigma, Sigma),
}

impl Atoms {
    pub const fn count(self) -> usize {
        match self {
            Atoms::None => 0,
            Atoms::One(_) => 1,
            Atoms::Two(..) => 2,
        }
    }
}

/// Symbolic name of an expectation value `⟨P X₁ Y₂⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MomentId {
    pub photon: Photon,
    pub atoms: Atoms,
}

impl MomentId {
    pub const fn new(photon: Photon, atoms: Atoms) -> Self {
        Self { photon, atoms }
    }

    pub const fn photon(photon: Photon) -> Self {
        Self::new(photon, Atoms::None)
    }

    pub const fn atom(s: Sigma) -> Self {
        Self::new(Photon::One, Atoms::One(s))
    }

    pub const fn with_photon(photon: Photon, s: Sigma) -> Self {
        Self::new(photon, Atoms::One(s))
    }

    pub const fn pair(s: Sigma, t: Sigma) -> Self {
        Self::new(Photon::One, Atoms::Two(s, t))
    }

    pub const fn order(&self) -> usize {
        self.photon.order() + self.atoms.count()
    }

    /// Identifier of the complex-conjugate moment.
    pub fn adjoint(&self) -> Self {
        let atoms = match self.atoms {
            Atoms::None => Atoms::None,
            Atoms::One(s) => Atoms::One(s.adjoint()),
            Atoms::Two(s, t) => Atoms::Two(s.adjoint(), t.adjoint()),
        };
        Self::new(self.photon.adjoint(), atoms)
    }

    /// Same moment with the two atoms relabelled.
    pub fn exchanged(&self) -> Self {
        match self.atoms {
            Atoms::Two(s, t) => Self::new(self.photon, Atoms::Two(t, s)),
            _ => *self,
        }
    }

    /// All moments of order one and two, projectors included: the set
    /// reachable from a stored state.
    pub fn catalog() -> Vec<MomentId> {
        let mut ids = vec![
            Self::photon(Photon::A),
            Self::photon(Photon::Ad),
            Self::photon(Photon::AdA),
            Self::photon(Photon::AA),
            Self::photon(Photon::AdAd),
        ];
        for s in Sigma::all() {
            ids.push(Self::atom(s));
            ids.push(Self::with_photon(Photon::A, s));
            ids.push(Self::with_photon(Photon::Ad, s));
        }
        for s in Sigma::all() {
            for t in Sigma::all() {
                ids.push(Self::pair(s, t));
            }
        }
        ids
    }
}

impl fmt::Display for MomentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}", self.photon.symbol())?;
        match self.atoms {
            Atoms::None => {}
            Atoms::One(s) => write!(f, "σ{}{}", s.l, s.m)?,
            Atoms::Two(s, t) => write!(f, "σ{}{}σ{}{}", s.l, s.m, t.l, t.m)?,
        }
        if self.photon == Photon::One && self.atoms == Atoms::None {
            write!(f, "1")?;
        }
        write!(f, "⟩")
    }
}

macro_rules! slots {
    ($($name:ident => $id:expr),* $(,)?) => {
        /// Independently evolved moments.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Slot { $($name),* }

        impl Slot {
            pub const ALL: [Slot; SLOT_COUNT] = [$(Slot::$name),*];

            pub const fn id(self) -> MomentId {
                match self { $(Slot::$name => $id),* }
            }
        }
    };
}

pub const SLOT_COUNT: usize = 37;

use Photon::{Ad, AdA, AA, A};

slots! {
    A => MomentId::photon(A),
    S12 => MomentId::atom(S12),
    S13 => MomentId::atom(S13),
    S23 => MomentId::atom(S23),
    S22 => MomentId::atom(S22),
    S33 => MomentId::atom(S33),
    AdA => MomentId::photon(AdA),
    AA => MomentId::photon(AA),
    AdS12 => MomentId::with_photon(Ad, S12),
    AdS13 => MomentId::with_photon(Ad, S13),
    AdS23 => MomentId::with_photon(Ad, S23),
    AdS22 => MomentId::with_photon(Ad, S22),
    AdS33 => MomentId::with_photon(Ad, S33),
    AS12 => MomentId::with_photon(A, S12),
    AS13 => MomentId::with_photon(A, S13),
    AS23 => MomentId::with_photon(A, S23),
    P12_12 => MomentId::pair(S12, S12),
    P22_22 => MomentId::pair(S22, S22),
    P23_23 => MomentId::pair(S23, S23),
    P33_33 => MomentId::pair(S33, S33),
    P13_13 => MomentId::pair(S13, S13),
    P12_21 => MomentId::pair(S12, S21),
    P12_13 => MomentId::pair(S12, S13),
    P21_13 => MomentId::pair(S21, S13),
    P32_23 => MomentId::pair(S32, S23),
    P32_13 => MomentId::pair(S32, S13),
    P12_32 => MomentId::pair(S12, S32),
    P12_23 => MomentId::pair(S12, S23),
    P31_13 => MomentId::pair(S31, S13),
    P23_13 => MomentId::pair(S23, S13),
    P22_13 => MomentId::pair(S22, S13),
    P33_13 => MomentId::pair(S33, S13),
    P33_32 => MomentId::pair(S33, S32),
    P22_33 => MomentId::pair(S22, S33),
    P22_23 => MomentId::pair(S22, S23),
    P22_12 => MomentId::pair(S22, S12),
    P33_12 => MomentId::pair(S33, S12),
}

impl Slot {
    /// Slots whose operator is self-adjoint; their values must be real.
    pub const SELF_ADJOINT: [Slot; 9] = [
        Slot::AdA,
        Slot::S22,
        Slot::S33,
        Slot::P12_21,
        Slot::P31_13,
        Slot::P32_23,
        Slot::P22_22,
        Slot::P33_33,
        Slot::P22_33,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_pair(self) -> bool {
        matches!(self.id().atoms, Atoms::Two(..))
    }

    pub fn find(id: &MomentId) -> Option<Slot> {
        Slot::ALL.iter().copied().find(|s| s.id() == *id)
    }
}

/// First- and second-order moments of the atoms-cavity system, rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub values: [Complex64; SLOT_COUNT],
}

impl Default for MomentState {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Index<Slot> for MomentState {
    type Output = Complex64;
    fn index(&self, slot: Slot) -> &Complex64 {
        &self.values[slot as usize]
    }
}

impl IndexMut<Slot> for MomentState {
    fn index_mut(&mut self, slot: Slot) -> &mut Complex64 {
        &mut self.values[slot as usize]
    }
}

impl MomentState {
    pub fn zeros() -> Self {
        Self {
            values: [Complex64::new(0.0, 0.0); SLOT_COUNT],
        }
    }

    /// Expectation value of any first- or second-order moment, resolving
    /// conjugate partners, atom relabelling and `σ¹¹ = 1 − σ²² − σ³³`.
    pub fn lookup(&self, id: &MomentId) -> Result<Complex64> {
        conjugate_closure(self, id)
    }

    /// `⟨σ¹¹⟩ = 1 − ⟨σ²²⟩ − ⟨σ³³⟩`.
    pub fn ground_population(&self) -> f64 {
        1.0 - self[Slot::S22].re - self[Slot::S33].re
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Zeroes the imaginary parts of self-adjoint slots and returns the
    /// largest magnitude removed.
    pub fn repair_self_adjoint(&mut self) -> f64 {
        let mut largest = 0.0f64;
        for slot in Slot::SELF_ADJOINT {
            let v = &mut self.values[slot as usize];
            largest = largest.max(v.im.abs());
            v.im = 0.0;
        }
        largest
    }

    pub fn axpy(&mut self, factor: f64, other: &MomentState) {
        for (v, o) in self.values.iter_mut().zip(other.values.iter()) {
            *v += o * factor;
        }
    }

    pub fn max_abs_diff(&self, other: &MomentState) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Product state with single-atom density matrix `rho1` and a coherent
    /// cavity field of amplitude `alpha`. All cross-cumulants vanish.
    pub fn product(rho1: &Mat3, alpha: Complex64) -> Self {
        let mut state = Self::zeros();
        let atom = |s: Sigma| rho1.expect(s);
        let photon = |p: Photon| match p {
            Photon::One => Complex64::new(1.0, 0.0),
            Photon::A => alpha,
            Photon::Ad => alpha.conj(),
            Photon::AdA => alpha.norm_sqr().into(),
            Photon::AA => alpha * alpha,
            Photon::AdAd => (alpha * alpha).conj(),
        };
        for slot in Slot::ALL {
            let id = slot.id();
            let atoms = match id.atoms {
                Atoms::None => Complex64::new(1.0, 0.0),
                Atoms::One(s) => atom(s),
                Atoms::Two(s, t) => atom(s) * atom(t),
            };
            state[slot] = photon(id.photon) * atoms;
        }
        state.repair_self_adjoint();
        state
    }
}

/// Resolves `id` against the stored slots of `state`.
pub fn conjugate_closure(state: &MomentState, id: &MomentId) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    if id.order() > 2 {
        return Err(Error::UnknownMoment(id.to_string()));
    }
    match id.atoms {
        Atoms::None if id.photon == Photon::One => return Ok(one),
        Atoms::One(s) if !s.is_valid() => return Err(Error::UnknownMoment(id.to_string())),
        Atoms::Two(s, t) if !s.is_valid() || !t.is_valid() => {
            return Err(Error::UnknownMoment(id.to_string()))
        }
        Atoms::One(S11) => {
            let without = MomentId::photon(id.photon);
            return Ok(conjugate_closure(state, &without)?
                - conjugate_closure(state, &MomentId::with_photon(id.photon, S22))?
                - conjugate_closure(state, &MomentId::with_photon(id.photon, S33))?);
        }
        Atoms::Two(S11, t) => {
            return Ok(conjugate_closure(state, &MomentId::atom(t))?
                - conjugate_closure(state, &MomentId::pair(S22, t))?
                - conjugate_closure(state, &MomentId::pair(S33, t))?);
        }
        Atoms::Two(s, S11) => {
            return Ok(conjugate_closure(state, &MomentId::atom(s))?
                - conjugate_closure(state, &MomentId::pair(s, S22))?
                - conjugate_closure(state, &MomentId::pair(s, S33))?);
        }
        _ => {}
    }
    for candidate in [*id, id.exchanged()] {
        if let Some(slot) = Slot::find(&candidate) {
            return Ok(state[slot]);
        }
        if let Some(slot) = Slot::find(&candidate.adjoint()) {
            return Ok(state[slot].conj());
        }
    }
    Err(Error::UnknownMoment(id.to_string()))
}

/// Integer phase weights `(n_p, n_m)` of an operator relative to the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameWeight {
    pub probe: i32,
    pub microwave: i32,
}

impl std::ops::Add for FrameWeight {
    type Output = FrameWeight;
    fn add(self, rhs: FrameWeight) -> FrameWeight {
        FrameWeight {
            probe: self.probe + rhs.probe,
            microwave: self.microwave + rhs.microwave,
        }
    }
}

impl std::ops::Neg for FrameWeight {
    type Output = FrameWeight;
    fn neg(self) -> FrameWeight {
        FrameWeight {
            probe: -self.probe,
            microwave: -self.microwave,
        }
    }
}

/// Fixed phase-weight assignment: `a → (1,0)`, `σ¹² → (0,1)`, `σ²³ → (1,0)`,
/// `σ¹³ → (1,1)`, projectors `(0,0)`; products add, adjoints negate.
pub struct FrameConvention;

impl FrameConvention {
    fn level(level: u8) -> FrameWeight {
        match level {
            1 => FrameWeight { probe: 0, microwave: 0 },
            2 => FrameWeight { probe: 0, microwave: -1 },
            _ => FrameWeight { probe: -1, microwave: -1 },
        }
    }

    pub fn sigma(s: Sigma) -> FrameWeight {
        Self::level(s.l) + -Self::level(s.m)
    }

    pub fn photon(p: Photon) -> FrameWeight {
        let a = FrameWeight { probe: 1, microwave: 0 };
        match p {
            Photon::One | Photon::AdA => FrameWeight::default(),
            Photon::A => a,
            Photon::Ad => -a,
            Photon::AA => a + a,
            Photon::AdAd => -(a + a),
        }
    }

    pub fn weight(id: &MomentId) -> FrameWeight {
        let atoms = match id.atoms {
            Atoms::None => FrameWeight::default(),
            Atoms::One(s) => Self::sigma(s),
            Atoms::Two(s, t) => Self::sigma(s) + Self::sigma(t),
        };
        Self::photon(id.photon) + atoms
    }

    /// Re-expresses a moment value from `from` to `to` at time `t`.
    pub fn transform(value: Complex64, id: &MomentId, from: Frame, to: Frame, t: f64) -> Complex64 {
        let w = Self::weight(id);
        let phase = (w.probe as f64 * (to.probe - from.probe)
            + w.microwave as f64 * (to.microwave - from.microwave))
            * t;
        value * Complex64::from_polar(1.0, phase)
    }
}

/// Reference frequencies of the frame the equations are written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub probe: f64,
    pub microwave: f64,
}

impl Frame {
    /// Frame co-rotating with the probe and microwave drives; the equations
    /// are autonomous here.
    pub fn rotating(params: &PhysicalParams) -> Self {
        Self {
            probe: params.omega_p,
            microwave: params.omega_m,
        }
    }

    pub fn lab() -> Self {
        Self {
            probe: 0.0,
            microwave: 0.0,
        }
    }
}

/// Single-atom density matrix of `√(1−p)|1⟩ + √p e^{iφ}|2⟩`.
pub fn two_level_pure_state(upper_population: f64, phase: f64) -> Mat3 {
    let c1 = Complex64::new((1.0 - upper_population).max(0.0).sqrt(), 0.0);
    let c2 = Complex64::from_polar(upper_population.max(0.0).sqrt(), phase);
    Mat3::pure(&[c1, c2, Complex64::new(0.0, 0.0)])
}

/// Spin coherent state on the equator with the collective spin along
/// `azimuth` (0 → +x, π/2 → +y); cavity in vacuum.
pub fn init_spin_coherent(params: &PhysicalParams, azimuth: f64) -> MomentState {
    init_spin_coherent_at(params, 0.0, azimuth)
}

/// Spin coherent state with `J_z/N = jz_over_n` and transverse spin along
/// `azimuth`.
pub fn init_spin_coherent_at(_params: &PhysicalParams, jz_over_n: f64, azimuth: f64) -> MomentState {
    // ⟨σ¹²⟩ = conj(c₁)c₂, and J_y = −N Im⟨σ¹²⟩, so the relative phase is −azimuth.
    let rho1 = two_level_pure_state(jz_over_n + 0.5, -azimuth);
    MomentState::product(&rho1, Complex64::new(0.0, 0.0))
}

/// All atoms in `|1⟩`, cavity in vacuum.
pub fn init_all_down(_params: &PhysicalParams) -> MomentState {
    MomentState::zeros()
}
