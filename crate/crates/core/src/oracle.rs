//! Brute-force conditional density matrix on a truncated Hilbert space.
//!
//! The basis is `photon ⊗ atom₁ ⊗ … ⊗ atom_N` with the photon number most
//! significant. The equations use the same frame coefficients as
//! [`crate::dynamics`], so the two can be compared entry by entry.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{Coefficients, DriveFlags, Reduced, ThirdOrder};
use crate::error::{Error, Result};
use crate::integrator::{photocurrent_sample, step, wiener_increment, TrajectorySeed};
use crate::matrix::{Mat3, Mat9};
use crate::model::{Atoms, MomentId, MomentState, PhysicalParams, Photon, Sigma, Slot};

type CMat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const MAX_ATOMS: usize = 3;
pub const MAX_CUTOFF: usize = 8;

/// Sparse operator as a list of `(row, col, value)` triplets.
#[derive(Debug, Clone, Default)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn from_dense(m: &CMat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    pub fn product(&self, rhs: &SparseOp) -> Self {
        Self::from_dense(&(self.to_dense() * rhs.to_dense()))
    }

    /// Appends `c·rhs` to this operator.
    fn add_scaled(&mut self, rhs: &SparseOp, c: Complex64) {
        if c == ZERO {
            return;
        }
        self.entries.extend(rhs.entries.iter().map(|&(i, j, v)| (i, j, v * c)));
    }

    /// `S R`.
    pub fn left(&self, r: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        let n = self.dim;
        for &(i, k, v) in &self.entries {
            for col in 0..n {
                out[(i, col)] += v * r[(k, col)];
            }
        }
        out
    }

    /// `R S`.
    pub fn right(&self, r: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for &(k, j, v) in &self.entries {
            let src = r.column(k).clone_owned();
            let mut dst = out.column_mut(j);
            dst.axpy(v, &src, ONE);
        }
        out
    }

    /// `R S†`.
    pub fn right_adjoint(&self, r: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for &(j, k, v) in &self.entries {
            let src = r.column(k).clone_owned();
            let mut dst = out.column_mut(j);
            dst.axpy(v.conj(), &src, ONE);
        }
        out
    }

    /// `tr(S R)`.
    pub fn expect(&self, r: &CMat) -> Complex64 {
        self.entries.iter().map(|&(i, j, v)| v * r[(j, i)]).sum()
    }
}

/// Operators of the truncated system.
#[derive(Debug, Clone)]
struct Operators {
    a: SparseOp,
    ad: SparseOp,
    n: SparseOp,
    /// `sigma[k][3(l−1) + (m−1)]` is `σ^{lm}` on atom `k`.
    sigma: Vec<Vec<SparseOp>>,
    /// `a†σ²³` and `aσ³²` per atom.
    raise: Vec<SparseOp>,
    lower: Vec<SparseOp>,
    /// `σ²² − σ³³` per atom.
    dephase: Vec<SparseOp>,
    /// `L†L` for each jump operator in [`TruncatedSystem::jumps`] order.
    jump_norms: Vec<SparseOp>,
}

/// Density matrix of `N ≤ 3` three-level atoms and a truncated cavity mode.
#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    pub n_atoms: usize,
    pub fock_cutoff: usize,
    pub rho: CMat,
    ops: Operators,
}

fn sigma_index(s: Sigma) -> usize {
    3 * (s.l as usize - 1) + (s.m as usize - 1)
}

impl TruncatedSystem {
    pub fn dimension(n_atoms: usize, fock_cutoff: usize) -> usize {
        fock_cutoff * 3usize.pow(n_atoms as u32)
    }

    /// Vacuum with every atom in `|1⟩`.
    pub fn ground(n_atoms: usize, fock_cutoff: usize) -> Result<Self> {
        let mut rho1 = Mat3::zeros();
        rho1.0[0][0] = ONE;
        Self::product(n_atoms, fock_cutoff, &rho1, ZERO)
    }

    /// Product of identical atomic states `rho1` and a (truncated, renormalized)
    /// coherent field of amplitude `alpha`.
    pub fn product(n_atoms: usize, fock_cutoff: usize, rho1: &Mat3, alpha: Complex64) -> Result<Self> {
        if !(1..=MAX_ATOMS).contains(&n_atoms) {
            return Err(Error::Oracle(format!("n_atoms must be 1..={MAX_ATOMS}, got {n_atoms}")));
        }
        if !(2..=MAX_CUTOFF).contains(&fock_cutoff) {
            return Err(Error::Oracle(format!(
                "fock cutoff must be 2..={MAX_CUTOFF}, got {fock_cutoff}"
            )));
        }
        let mut field = CMat::zeros(fock_cutoff, 1);
        let mut coef = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for k in 0..fock_cutoff {
            if k > 0 {
                coef *= alpha / (k as f64).sqrt();
            }
            field[(k, 0)] = coef;
        }
        let field_rho = &field * field.adjoint();
        let atom = CMat::from_fn(3, 3, |i, j| rho1.0[i][j]);
        let mut rho = field_rho;
        for _ in 0..n_atoms {
            rho = rho.kronecker(&atom);
        }
        let tr = rho.trace();
        rho /= tr;
        Self::from_density(n_atoms, fock_cutoff, rho)
    }

    pub fn from_density(n_atoms: usize, fock_cutoff: usize, rho: CMat) -> Result<Self> {
        let dim = Self::dimension(n_atoms, fock_cutoff);
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::Oracle(format!("density matrix must be {dim}×{dim}")));
        }
        Ok(Self {
            n_atoms,
            fock_cutoff,
            rho,
            ops: build_operators(n_atoms, fock_cutoff),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// `σ^{lm}` on atom `k`.
    pub fn sigma_op(&self, k: usize, s: Sigma) -> &SparseOp {
        &self.ops.sigma[k][sigma_index(s)]
    }

    pub fn annihilation(&self) -> &SparseOp {
        &self.ops.a
    }

    fn hamiltonian(&self, c: &Coefficients) -> SparseOp {
        let ops = &self.ops;
        let mut h = SparseOp { dim: self.dim(), entries: Vec::new() };
        h.add_scaled(&ops.n, c.delta_c.into());
        h.add_scaled(&ops.a, c.phase_p * c.drive);
        h.add_scaled(&ops.ad, c.phase_p.conj() * c.drive);
        for k in 0..self.n_atoms {
            let s = |sig: Sigma| &ops.sigma[k][sigma_index(sig)];
            h.add_scaled(s(Sigma::new(2, 2)), c.delta_21.into());
            h.add_scaled(s(Sigma::new(3, 3)), c.delta_31.into());
            h.add_scaled(s(Sigma::new(1, 2)), c.phase_m * c.microwave);
            h.add_scaled(s(Sigma::new(2, 1)), c.phase_m.conj() * c.microwave);
            h.add_scaled(&ops.raise[k], c.g.into());
            h.add_scaled(&ops.lower[k], c.g.into());
        }
        h
    }

    fn jumps(&self, c: &Coefficients) -> Vec<(&SparseOp, f64)> {
        let mut out = vec![(&self.ops.a, c.kappa)];
        for k in 0..self.n_atoms {
            out.push((&self.ops.sigma[k][sigma_index(Sigma::new(2, 3))], c.gamma));
            out.push((&self.ops.dephase[k], c.chi / 2.0));
        }
        out
    }

    /// Deterministic generator applied to `rho`.
    pub fn liouvillian(&self, rho: &CMat, c: &Coefficients) -> CMat {
        let h = self.hamiltonian(c);
        let mut out = (h.left(rho) - h.right(rho)) * (-I);
        for ((l, rate), ldl) in self.jumps(c).into_iter().zip(&self.ops.jump_norms) {
            if rate == 0.0 {
                continue;
            }
            let lr = l.left(rho);
            out += l.right_adjoint(&lr) * Complex64::from(rate);
            out -= (ldl.left(rho) + ldl.right(rho)) * Complex64::from(0.5 * rate);
        }
        out
    }

    /// Coefficient of `dW` in the conditional update.
    pub fn backaction(&self, rho: &CMat, c: &Coefficients) -> CMat {
        if c.measurement == 0.0 {
            return CMat::zeros(self.dim(), self.dim());
        }
        let b_mean = c.phase_p * self.ops.a.expect(rho);
        let br = self.ops.a.left(rho) * c.phase_p;
        let rbd = self.ops.a.right_adjoint(rho) * c.phase_p.conj();
        let mean = 2.0 * b_mean.re;
        (br + rbd - rho * Complex64::from(mean)) * Complex64::from(c.measurement)
    }

    /// One Euler–Maruyama step of the conditional master equation with the
    /// given frame coefficients, followed by Hermitization and renormalization.
    pub fn sme_step_with(&mut self, c: &Coefficients, dt: f64, dw: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Oracle(format!("dt must be positive, got {dt}")));
        }
        let drift = self.liouvillian(&self.rho, c);
        let noise = self.backaction(&self.rho, c);
        let mut next = &self.rho + drift * Complex64::from(dt) + noise * Complex64::from(dw);
        let herm = (&next + next.adjoint()) * Complex64::from(0.5);
        next = herm;
        let tr = next.trace();
        if !(tr.re.is_finite() && tr.re > 1e-3) || next.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Oracle(format!("trace collapsed or non-finite state (trace {tr})")));
        }
        next /= Complex64::from(tr.re);
        self.rho = next;
        Ok(())
    }

    /// One step in the co-rotating frame of `params`.
    pub fn sme_step(&mut self, params: &PhysicalParams, flags: DriveFlags, dt: f64, dw: f64) -> Result<()> {
        self.sme_step_with(&Coefficients::rotating(params, flags), dt, dw)
    }

    /// Photocurrent sample `√(ηκ₂) Re⟨ã⟩ + dW/dt`.
    pub fn photocurrent(&self, c: &Coefficients, dw: f64, dt: f64) -> f64 {
        c.measurement * (c.phase_p * self.ops.a.expect(&self.rho)).re + dw / dt
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::from(0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Population of the highest retained Fock state.
    pub fn top_fock_population(&self) -> f64 {
        let block = 3usize.pow(self.n_atoms as u32);
        let start = (self.fock_cutoff - 1) * block;
        (start..start + block).map(|i| self.rho[(i, i)].re).sum()
    }

    /// Rejects the run if the photon truncation is not negligible.
    pub fn check_truncation(&self, limit: f64) -> Result<()> {
        let p = self.top_fock_population();
        if p < limit {
            Ok(())
        } else {
            Err(Error::Oracle(format!("top Fock population {p:e} exceeds {limit:e}")))
        }
    }

    fn operator_for(&self, id: &MomentId, atoms: (usize, usize)) -> SparseOp {
        let photon = match id.photon {
            Photon::One => None,
            Photon::A => Some(self.ops.a.clone()),
            Photon::Ad => Some(self.ops.ad.clone()),
            Photon::AdA => Some(self.ops.n.clone()),
            Photon::AA => Some(self.ops.a.product(&self.ops.a)),
            Photon::AdAd => Some(self.ops.ad.product(&self.ops.ad)),
        };
        let atom_op = match id.atoms {
            Atoms::None => None,
            Atoms::One(s) => Some(self.ops.sigma[atoms.0][sigma_index(s)].clone()),
            Atoms::Two(s, t) => Some(
                self.ops.sigma[atoms.0][sigma_index(s)]
                    .product(&self.ops.sigma[atoms.1][sigma_index(t)]),
            ),
        };
        match (photon, atom_op) {
            (Some(p), Some(x)) => p.product(&x),
            (Some(p), None) => p,
            (None, Some(x)) => x,
            (None, None) => SparseOp::from_dense(&CMat::identity(self.dim(), self.dim())),
        }
    }

    fn moments_of(&self, rho: &CMat, atoms: (usize, usize)) -> MomentState {
        let mut out = MomentState::zeros();
        for slot in Slot::ALL {
            let id = slot.id();
            if matches!(id.atoms, Atoms::Two(..)) && self.n_atoms < 2 {
                continue;
            }
            out[slot] = self.operator_for(&id, atoms).expect(rho);
        }
        out
    }

    /// Exact expectation values of every stored moment; pair moments are read
    /// from atoms 1 and 2.
    pub fn extract_moments(&self) -> MomentState {
        self.moments_of(&self.rho, (0, 1))
    }

    /// Stored moments with single-atom quantities from atom `i` and pair
    /// quantities from atoms `(i, j)`.
    pub fn extract_moments_for(&self, i: usize, j: usize) -> MomentState {
        self.moments_of(&self.rho, (i, j))
    }

    /// Exact third-order moments in the layout used by the closure.
    pub fn exact_third_order(&self) -> ThirdOrder {
        let rho = &self.rho;
        let ops = &self.ops;
        let aa = ops.a.product(&ops.a);
        let mut third = ThirdOrder {
            adaa: ops.ad.product(&aa).expect(rho),
            aaa: aa.product(&ops.a).expect(rho),
            ..Default::default()
        };
        for s in Sigma::all() {
            let (row, col) = (s.m as usize - 1, s.l as usize - 1);
            let x = &ops.sigma[0][sigma_index(s)];
            third.nmat.0[row][col] = ops.n.product(x).expect(rho);
            third.mmat.0[row][col] = aa.product(x).expect(rho);
            if self.n_atoms >= 2 {
                for t in Sigma::all() {
                    let y = &ops.sigma[1][sigma_index(t)];
                    let r9 = 3 * (s.m as usize - 1) + (t.m as usize - 1);
                    let c9 = 3 * (s.l as usize - 1) + (t.l as usize - 1);
                    third.t.0[r9][c9] = ops.a.product(x).product(y).expect(rho);
                }
            }
        }
        third
    }

    /// Exact time derivatives `tr(X 𝓛ρ)` and back-action coefficients
    /// `tr(X ℬρ)` of the stored moments.
    pub fn moment_derivatives(&self, c: &Coefficients) -> (MomentState, MomentState) {
        let l = self.liouvillian(&self.rho, c);
        let b = self.backaction(&self.rho, c);
        (self.moments_of(&l, (0, 1)), self.moments_of(&b, (0, 1)))
    }

    /// Reduced objects built from exact moments.
    pub fn exact_reduced(&self) -> Reduced {
        Reduced::from_state(&self.extract_moments())
    }

    /// Single-atom and pair density matrices traced directly from `rho`.
    pub fn reduced_density(&self) -> (Mat3, Mat9) {
        let mut rho1 = Mat3::zeros();
        let mut rho12 = Mat9::zeros();
        for s in Sigma::all() {
            rho1.0[s.m as usize - 1][s.l as usize - 1] = self.ops.sigma[0][sigma_index(s)].expect(&self.rho);
            if self.n_atoms >= 2 {
                for t in Sigma::all() {
                    let op = self.ops.sigma[0][sigma_index(s)].product(&self.ops.sigma[1][sigma_index(t)]);
                    let r9 = 3 * (s.m as usize - 1) + (t.m as usize - 1);
                    let c9 = 3 * (s.l as usize - 1) + (t.l as usize - 1);
                    rho12.0[r9][c9] = op.expect(&self.rho);
                }
            }
        }
        (rho1, rho12)
    }

    /// Permutation of atoms `i` and `j` as a basis map.
    pub fn swap_atoms(&self, i: usize, j: usize) -> CMat {
        let block = 3usize.pow(self.n_atoms as u32);
        let dim = self.dim();
        let mut p = CMat::zeros(dim, dim);
        for idx in 0..dim {
            let (photon, atoms) = (idx / block, idx % block);
            let mut levels = digits(atoms, self.n_atoms);
            levels.swap(i, j);
            let target = photon * block + undigits(&levels);
            p[(target, idx)] = ONE;
        }
        p
    }
}

fn digits(mut x: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = x % 3;
        x /= 3;
    }
    out
}

fn undigits(levels: &[usize]) -> usize {
    levels.iter().fold(0, |acc, &l| 3 * acc + l)
}

fn build_operators(n_atoms: usize, cutoff: usize) -> Operators {
    let block = 3usize.pow(n_atoms as u32);
    let dim = cutoff * block;
    let mut a = SparseOp { dim, entries: Vec::new() };
    for p in 1..cutoff {
        for s in 0..block {
            a.entries.push(((p - 1) * block + s, p * block + s, Complex64::new((p as f64).sqrt(), 0.0)));
        }
    }
    let ad = a.adjoint();
    let n = ad.product(&a);
    let mut sigma = Vec::with_capacity(n_atoms);
    for k in 0..n_atoms {
        let mut per_atom = Vec::with_capacity(9);
        for l in 0..3 {
            for m in 0..3 {
                let mut op = SparseOp { dim, entries: Vec::new() };
                for idx in 0..dim {
                    let (photon, atoms) = (idx / block, idx % block);
                    let mut levels = digits(atoms, n_atoms);
                    if levels[k] != m {
                        continue;
                    }
                    levels[k] = l;
                    op.entries.push((photon * block + undigits(&levels), idx, ONE));
                }
                per_atom.push(op);
            }
        }
        sigma.push(per_atom);
    }
    let idx = |l: u8, m: u8| sigma_index(Sigma::new(l, m));
    let raise: Vec<_> = sigma.iter().map(|s| ad.product(&s[idx(2, 3)])).collect();
    let lower: Vec<_> = sigma.iter().map(|s| a.product(&s[idx(3, 2)])).collect();
    let dephase: Vec<_> = sigma
        .iter()
        .map(|s| SparseOp::from_dense(&(s[idx(2, 2)].to_dense() - s[idx(3, 3)].to_dense())))
        .collect();
    let mut jump_norms = vec![n.clone()];
    for k in 0..n_atoms {
        let decay = &sigma[k][idx(2, 3)];
        jump_norms.push(decay.adjoint().product(decay));
        jump_norms.push(dephase[k].adjoint().product(&dephase[k]));
    }
    Operators { a, ad, n, sigma, raise, lower, dephase, jump_norms }
}

/// Agreement between the oracle and the moment equations after one shared step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub time: f64,
    /// Largest absolute difference over all stored moments.
    pub moment_diff: f64,
    /// Photocurrent difference for the step, and the oracle's current.
    pub current_diff: f64,
    pub current: f64,
    pub top_fock: f64,
    pub trace_error: f64,
}

/// Steps `sys` and its extracted moments side by side with one noise
/// sequence. Requires at least two atoms.
pub fn joint_trajectory(
    mut sys: TruncatedSystem,
    params: &PhysicalParams,
    flags: DriveFlags,
    dt: f64,
    steps: usize,
    seed: TrajectorySeed,
) -> Result<Vec<JointSample>> {
    if sys.n_atoms < 2 {
        return Err(Error::Oracle("pair moments need at least two atoms".into()));
    }
    let c = Coefficients::rotating(params, flags);
    let mut state = sys.extract_moments();
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(steps);
    for k in 1..=steps {
        let dw = wiener_increment(&mut rng, dt)?;
        let current = sys.photocurrent(&c, dw, dt);
        let current_diff = (current - photocurrent_sample(&state, params, dw, dt)).abs();
        sys.sme_step_with(&c, dt, dw)?;
        state = step(&state, params, flags, dt, dw)?;
        out.push(JointSample {
            time: k as f64 * dt,
            moment_diff: sys.extract_moments().max_abs_diff(&state),
            current_diff,
            current,
            top_fock: sys.top_fock_population(),
            trace_error: (sys.trace() - ONE).norm(),
        });
    }
    Ok(out)
}
