//! Drift and measurement back-action of the stored moments.
//!
//! The moments are unpacked into reduced objects: the field moments
//! `α = ⟨a⟩`, `n = ⟨a†a⟩`, `m = ⟨aa⟩`, the single-atom density matrix `ρ₁`,
//! the atom-field matrix `A` with `⟨aσ^{lm}⟩ = tr(σ^{lm} A)`, and the pair
//! density matrix `ρ₁₂`. The equations of motion are written once for these
//! objects and the result is projected back onto the slots.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{Mat3, Mat9};
use crate::model::{
    Atoms, Frame, MomentId, MomentState, PhysicalParams, Photon, Sigma, Slot, S23, S32,
    SLOT_COUNT,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which drives and which measurement channel are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DriveFlags {
    pub probe_on: bool,
    pub microwave_on: bool,
    pub measurement_on: bool,
}

impl DriveFlags {
    pub const OFF: DriveFlags = DriveFlags {
        probe_on: false,
        microwave_on: false,
        measurement_on: false,
    };
    /// Probe on and detected.
    pub const PROBE: DriveFlags = DriveFlags {
        probe_on: true,
        microwave_on: false,
        measurement_on: true,
    };
    pub const MICROWAVE: DriveFlags = DriveFlags {
        probe_on: false,
        microwave_on: true,
        measurement_on: false,
    };
}

/// `⟨o⟩⟨pq⟩ + ⟨p⟩⟨oq⟩ + ⟨q⟩⟨op⟩ − 2⟨o⟩⟨p⟩⟨q⟩`.
pub fn third_order_closure(
    o: Complex64,
    p: Complex64,
    q: Complex64,
    op: Complex64,
    oq: Complex64,
    pq: Complex64,
) -> Complex64 {
    o * pq + p * oq + q * op - 2.0 * o * p * q
}

/// Moments in reduced-matrix form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reduced {
    pub alpha: Complex64,
    pub n: Complex64,
    pub m: Complex64,
    pub rho1: Mat3,
    pub a: Mat3,
    pub rho12: Mat9,
}

/// Third-order moments entering the first- and second-order equations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThirdOrder {
    /// `tr(σ N) = ⟨a†a σ⟩`.
    pub nmat: Mat3,
    /// `tr(σ M) = ⟨aa σ⟩`.
    pub mmat: Mat3,
    /// `tr((σ⊗τ) T) = ⟨a σ τ⟩`.
    pub t: Mat9,
    /// `⟨a†aa⟩`.
    pub adaa: Complex64,
    /// `⟨aaa⟩`.
    pub aaa: Complex64,
}

impl ThirdOrder {
    /// Cumulant closure: all third-order cumulants set to zero.
    pub fn closure(r: &Reduced) -> Self {
        let alpha = r.alpha;
        let a_dag = r.a.adjoint();
        let abs2 = alpha.norm_sqr();
        let nmat = r.a * alpha.conj() + a_dag * alpha + r.rho1 * (r.n - 2.0 * abs2);
        let mmat = r.a * (2.0 * alpha) + r.rho1 * (r.m - 2.0 * alpha * alpha);
        let t = r.rho12 * alpha + r.a.kron(&r.rho1) + r.rho1.kron(&r.a)
            - r.rho1.kron(&r.rho1) * (2.0 * alpha);
        Self {
            nmat,
            mmat,
            t,
            adaa: third_order_closure(alpha.conj(), alpha, alpha, r.n, r.n, r.m),
            aaa: third_order_closure(alpha, alpha, alpha, r.m, r.m, r.m),
        }
    }
}

/// Position of a reduced entry in the flat layout used by [`Plan`].
const REDUCED_LEN: usize = 3 + 9 + 9 + 81;

fn reduced_entry_id(e: usize) -> MomentId {
    let sig = |row: usize, col: usize| Sigma::new(col as u8 + 1, row as u8 + 1);
    match e {
        0 => MomentId::photon(Photon::A),
        1 => MomentId::photon(Photon::AdA),
        2 => MomentId::photon(Photon::AA),
        3..=11 => MomentId::atom(sig((e - 3) / 3, (e - 3) % 3)),
        12..=20 => MomentId::with_photon(Photon::A, sig((e - 12) / 3, (e - 12) % 3)),
        _ => {
            let k = e - 21;
            let (row, col) = (k / 9, k % 9);
            MomentId::pair(sig(row / 3, col / 3), sig(row % 3, col % 3))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    slot: usize,
    coef: Complex64,
    conj: bool,
}

/// Affine, conjugate-linear map from slots to reduced entries, derived once
/// from the symbolic lookup.
struct Plan {
    constant: Vec<Complex64>,
    terms: Vec<Vec<Term>>,
}

fn plan() -> &'static Plan {
    static PLAN: OnceLock<Plan> = OnceLock::new();
    PLAN.get_or_init(|| {
        let eval = |state: &MomentState, e: usize| {
            state
                .lookup(&reduced_entry_id(e))
                .expect("reduced entries are resolvable")
        };
        let zero = MomentState::zeros();
        let mut constant = Vec::with_capacity(REDUCED_LEN);
        let mut terms = Vec::with_capacity(REDUCED_LEN);
        for e in 0..REDUCED_LEN {
            let c0 = eval(&zero, e);
            let mut list = Vec::new();
            for slot in 0..SLOT_COUNT {
                let mut s = MomentState::zeros();
                s.values[slot] = Complex64::new(1.0, 0.0);
                let u = eval(&s, e) - c0;
                s.values[slot] = I;
                let v = eval(&s, e) - c0;
                let lin = (u - I * v) * 0.5;
                let anti = (u + I * v) * 0.5;
                if lin != ZERO {
                    list.push(Term { slot, coef: lin, conj: false });
                }
                if anti != ZERO {
                    list.push(Term { slot, coef: anti, conj: true });
                }
            }
            constant.push(c0);
            terms.push(list);
        }
        Plan { constant, terms }
    })
}

impl Reduced {
    pub fn from_state(state: &MomentState) -> Self {
        let plan = plan();
        let mut flat = [ZERO; REDUCED_LEN];
        for (e, out) in flat.iter_mut().enumerate() {
            let mut acc = plan.constant[e];
            for t in &plan.terms[e] {
                let v = state.values[t.slot];
                acc += t.coef * if t.conj { v.conj() } else { v };
            }
            *out = acc;
        }
        let mut r = Reduced {
            alpha: flat[0],
            n: flat[1],
            m: flat[2],
            ..Default::default()
        };
        for k in 0..9 {
            r.rho1.0[k / 3][k % 3] = flat[3 + k];
            r.a.0[k / 3][k % 3] = flat[12 + k];
        }
        for k in 0..81 {
            r.rho12.0[k / 9][k % 9] = flat[21 + k];
        }
        r
    }

    /// Reads the stored slots out of a reduced object (or its time derivative).
    pub fn to_state(&self) -> MomentState {
        let mut out = MomentState::zeros();
        for slot in Slot::ALL {
            let id = slot.id();
            out[slot] = match (id.photon, id.atoms) {
                (Photon::A, Atoms::None) => self.alpha,
                (Photon::AdA, Atoms::None) => self.n,
                (Photon::AA, Atoms::None) => self.m,
                (Photon::One, Atoms::One(s)) => self.rho1.expect(s),
                (Photon::A, Atoms::One(s)) => self.a.expect(s),
                (Photon::Ad, Atoms::One(s)) => self.a.expect(s.adjoint()).conj(),
                (Photon::One, Atoms::Two(s, t)) => self.rho12.expect(s, t),
                _ => unreachable!("slot {id} has no reduced counterpart"),
            };
        }
        out
    }
}

/// Time-dependent coefficients of the equations in a given frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub n_atoms: u64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub chi: f64,
    pub delta_c: f64,
    pub delta_21: f64,
    pub delta_31: f64,
    /// Cavity drive rate `Ω_p √κ₁`, zero with the probe off.
    pub drive: f64,
    /// Microwave strength, zero with the microwave off.
    pub microwave: f64,
    /// Measurement strength `√(ηκ₂)`, zero with detection off.
    pub measurement: f64,
    /// Residual probe phase factor `exp(i(ω_p − f_p)t)`.
    pub phase_p: Complex64,
    /// Residual microwave phase factor `exp(i(ω_m − f_m)t)`.
    pub phase_m: Complex64,
}

impl Coefficients {
    /// Autonomous coefficients of the co-rotating frame.
    pub fn rotating(params: &PhysicalParams, flags: DriveFlags) -> Self {
        Self::in_frame(params, flags, Frame::rotating(params), 0.0)
    }

    pub fn in_frame(params: &PhysicalParams, flags: DriveFlags, frame: Frame, t: f64) -> Self {
        let residual_p = params.omega_p - frame.probe;
        let residual_m = params.omega_m - frame.microwave;
        Self {
            n_atoms: params.n_atoms,
            g: params.g,
            kappa: params.kappa,
            gamma: params.gamma,
            chi: params.chi,
            delta_c: params.omega_c - frame.probe,
            delta_21: params.omega_21 - frame.microwave,
            delta_31: (params.omega_21 - frame.microwave) + (params.omega_32 - frame.probe),
            drive: if flags.probe_on { params.drive_rate() } else { 0.0 },
            microwave: if flags.microwave_on { params.omega_mw_amp } else { 0.0 },
            measurement: if flags.measurement_on {
                (params.eta * params.kappa_2).sqrt()
            } else {
                0.0
            },
            phase_p: if residual_p == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, residual_p * t)
            },
            phase_m: if residual_m == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, residual_m * t)
            },
        }
    }

    /// Single-atom Hamiltonian.
    pub fn atom_hamiltonian(&self) -> Mat3 {
        let mut h = Mat3::zeros();
        h.0[1][1] = self.delta_21.into();
        h.0[2][2] = self.delta_31.into();
        h.0[0][1] = self.phase_m * self.microwave;
        h.0[1][0] = self.phase_m.conj() * self.microwave;
        h
    }
}

// level energies of σ²² − σ³³ and the excited-state projector
const Z: [f64; 3] = [0.0, 1.0, -1.0];
const E3: [f64; 3] = [0.0, 0.0, 1.0];

fn local_damping(c: &Coefficients, i: usize, j: usize) -> f64 {
    let dz = Z[i] - Z[j];
    -0.5 * c.gamma * (E3[i] + E3[j]) - 0.25 * c.chi * dz * dz
}

fn local_generator(r: &Mat3, h: &Mat3, c: &Coefficients) -> Mat3 {
    let mut out = h.commutator(r) * (-I);
    for i in 0..3 {
        for j in 0..3 {
            out.0[i][j] += r.0[i][j] * local_damping(c, i, j);
        }
    }
    out.0[1][1] += r.0[2][2] * c.gamma;
    out
}

fn pair_generator(r: &Mat9, h: &Mat3, c: &Coefficients) -> Mat9 {
    let mut out = r.symmetric_commutator(h) * (-I);
    for row in 0..9 {
        for col in 0..9 {
            let (i1, i2, j1, j2) = (row / 3, row % 3, col / 3, col % 3);
            let rate = local_damping(c, i1, j1) + local_damping(c, i2, j2);
            out.0[row][col] += r.0[row][col] * rate;
        }
    }
    for x in 0..3 {
        for y in 0..3 {
            out.0[3 + x][3 + y] += r.0[6 + x][6 + y] * c.gamma;
            out.0[3 * x + 1][3 * y + 1] += r.0[3 * x + 2][3 * y + 2] * c.gamma;
        }
    }
    out
}

fn sym_left(r: &Mat9, x: &Mat3) -> Mat9 {
    r.left_local(x, 0) + r.left_local(x, 1)
}

fn sym_right(r: &Mat9, x: &Mat3) -> Mat9 {
    r.right_local(x, 0) + r.right_local(x, 1)
}

/// Deterministic part of the equations of motion in reduced form.
pub fn reduced_drift(r: &Reduced, third: &ThirdOrder, c: &Coefficients) -> Reduced {
    let n = c.n_atoms as f64;
    let n_minus_1 = (c.n_atoms - 1) as f64;
    let g = c.g;
    let ep = c.phase_p;
    let field = Complex64::new(-0.5 * c.kappa, -c.delta_c);
    let e23 = Mat3::sigma(S23);
    let e32 = Mat3::sigma(S32);
    let h = c.atom_hamiltonian();
    let a_dag = r.a.adjoint();
    let ig = I * g;

    let alpha = field * r.alpha - I * c.drive * ep.conj() - ig * n * r.rho1.expect(S23);
    let x = r.a.expect(S32);
    let n_dot = -c.kappa * r.n
        + I * c.drive * (ep * r.alpha - ep.conj() * r.alpha.conj())
        + ig * n * (x - x.conj());
    let m_dot = 2.0 * field * r.m - 2.0 * I * c.drive * ep.conj() * r.alpha
        - 2.0 * ig * n * r.a.expect(S23);

    let rho1 = local_generator(&r.rho1, &h, c) + (a_dag.commutator(&e23) + r.a.commutator(&e32)) * ig;

    let coupling = third.nmat.commutator(&e23)
        - e23.matmul(&r.rho1)
        - r.rho12.partial_trace_second_with(&e23) * n_minus_1
        + third.mmat.commutator(&e32);
    let a = r.a * field - r.rho1 * (I * c.drive * ep.conj())
        + local_generator(&r.a, &h, c)
        + coupling * ig;

    let rho12 = if c.n_atoms < 2 {
        Mat9::zeros()
    } else {
        let t_dag = third.t.adjoint();
        let comm = sym_right(&t_dag, &e23) - sym_left(&t_dag, &e23) + sym_right(&third.t, &e32)
            - sym_left(&third.t, &e32);
        pair_generator(&r.rho12, &h, c) + comm * ig
    };

    Reduced {
        alpha,
        n: n_dot,
        m: m_dot,
        rho1,
        a,
        rho12,
    }
}

/// Coefficients of `dW` in reduced form.
pub fn reduced_diffusion(r: &Reduced, third: &ThirdOrder, c: &Coefficients) -> Reduced {
    if c.measurement == 0.0 {
        return Reduced::default();
    }
    let s = c.measurement;
    let ep = c.phase_p;
    let em = ep.conj();
    let mean = 2.0 * (ep * r.alpha).re;
    let rho12 = if c.n_atoms < 2 {
        Mat9::zeros()
    } else {
        (third.t * ep + third.t.adjoint() * em - r.rho12 * mean) * s
    };
    Reduced {
        alpha: s * (ep * r.m + em * r.n - mean * r.alpha),
        n: s * (ep * third.adaa + em * third.adaa.conj() - mean * r.n),
        m: s * (ep * third.aaa + em * third.adaa - mean * r.m),
        rho1: (r.a * ep + r.a.adjoint() * em - r.rho1 * mean) * s,
        a: (third.mmat * ep + third.nmat * em - r.a * mean) * s,
        rho12,
    }
}

fn check_finite(state: &MomentState) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::IntegrationAbort {
            step: 0,
            reason: "non-finite moment in right-hand side input".into(),
        })
    }
}

/// Drift and diffusion together (the closure is evaluated once).
pub fn evaluate(state: &MomentState, c: &Coefficients) -> Result<(MomentState, MomentState)> {
    check_finite(state)?;
    let r = Reduced::from_state(state);
    let third = ThirdOrder::closure(&r);
    let drift = reduced_drift(&r, &third, c).to_state();
    let diffusion = reduced_diffusion(&r, &third, c).to_state();
    Ok((drift, diffusion))
}

/// Deterministic time derivative of every stored moment (co-rotating frame).
pub fn drift(state: &MomentState, params: &PhysicalParams, flags: DriveFlags) -> Result<MomentState> {
    check_finite(state)?;
    let r = Reduced::from_state(state);
    let third = ThirdOrder::closure(&r);
    Ok(reduced_drift(&r, &third, &Coefficients::rotating(params, flags)).to_state())
}

/// Coefficient of `dW` for every stored moment (co-rotating frame).
pub fn diffusion(
    state: &MomentState,
    params: &PhysicalParams,
    flags: DriveFlags,
) -> Result<MomentState> {
    check_finite(state)?;
    let c = Coefficients::rotating(params, flags);
    if c.measurement == 0.0 {
        return Ok(MomentState::zeros());
    }
    let r = Reduced::from_state(state);
    let third = ThirdOrder::closure(&r);
    Ok(reduced_diffusion(&r, &third, &c).to_state())
}
