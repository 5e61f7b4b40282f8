use nalgebra::{DMatrix, DVector};

use super::{DensityOperator, FockSpace, KetState, C64};
use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };
/// Extra levels used internally when building displaced number states.
const DISPLACEMENT_PAD: usize = 20;
/// Cumulative weight at which the thermal geometric series is cut.
const THERMAL_WEIGHT_CUT: f64 = 1.0 - 1e-10;
const MIN_HERALD_PROBABILITY: f64 = 1e-14;

/// Truncated single-mode annihilation operator.
pub fn annihilation(space: FockSpace) -> DMatrix<C64> {
    let n = space.levels();
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) })
}

/// D(β) = exp(βb† − β*b) exponentiated on the truncated single-mode space.
pub fn displacement(beta: C64, space: FockSpace) -> DMatrix<C64> {
    let b = annihilation(space.mode());
    let generator = b.adjoint() * beta - &b * beta.conj();
    // H = iG is Hermitian and D = exp(−iH).
    let h = &generator * I;
    let eig = h.symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-I * l).exp()));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Weighted pure-state decomposition of the displaced thermal state,
/// (1−s)sⁿ D(β)|n⟩ with s = n̄₀/(1+n̄₀), cut once the cumulative weight
/// exceeds 1 − 10⁻¹⁰ (or at n_max).
pub fn thermal_coherent_ensemble(beta: C64, n0: f64, space: FockSpace) -> Result<Vec<(f64, KetState)>> {
    if !(n0.is_finite() && n0 >= 0.0) {
        return Err(Error::InvalidInput(format!("thermal occupation must be >= 0, got {n0}")));
    }
    let space = space.mode();
    let padded = FockSpace::single(space.n_max + DISPLACEMENT_PAD)?;
    let d = displacement(beta, padded);
    let s = n0 / (1.0 + n0);
    let mut out = Vec::new();
    let mut cumulative = 0.0;
    for n in 0..=space.n_max {
        let w = (1.0 - s) * s.powi(n as i32);
        let column = DVector::from_iterator(space.levels(), d.column(n).iter().take(space.levels()).copied());
        out.push((w, KetState::new(space, column)?));
        cumulative += w;
        if cumulative > THERMAL_WEIGHT_CUT {
            break;
        }
    }
    Ok(out)
}

/// ρ_th,c = (1−s) Σ sⁿ D(β)|n⟩⟨n|D†(β), without truncating the series at n = 1.
pub fn thermal_coherent_state(beta: C64, n0: f64, space: FockSpace) -> Result<DensityOperator> {
    let space = space.mode();
    let mut rho = DMatrix::zeros(space.dim(), space.dim());
    for (w, ket) in thermal_coherent_ensemble(beta, n0, space)? {
        rho += &ket.amplitudes * ket.amplitudes.adjoint() * C64::new(w, 0.0);
    }
    DensityOperator::new(space, rho)
}

/// Write-pulse propagator
/// U = e^{i√(1−Z²) A†b†} Z^{1 + A†A + b†b} e^{i√(1−Z²) A b},
/// stored as blocks over the invariant sectors of fixed n_A − n_b.
#[derive(Debug, Clone)]
pub struct WritePropagator {
    pub z: f64,
    pub space: FockSpace,
    blocks: Vec<DMatrix<C64>>,
}

impl WritePropagator {
    /// Product of the three normal-ordered factors.
    pub fn new(z: f64, space: FockSpace) -> Result<Self> {
        Self::from_factors(z, space, 1.0)
    }

    /// The same factorization with the sign of the annihilating exponent
    /// flipped, e^{−i√(1−Z²) A b}. This operator is Hermitian rather than
    /// unitary but agrees with [`WritePropagator::new`] on every state with
    /// the cavity in vacuum.
    pub fn with_conjugate_annihilator(z: f64, space: FockSpace) -> Result<Self> {
        Self::from_factors(z, space, -1.0)
    }

    /// exp[i r (A†b† + A b)] with cosh r = 1/Z, exponentiated sector by sector.
    pub fn exponential(z: f64, space: FockSpace) -> Result<Self> {
        check_z(z, space)?;
        let r = (1.0 / z).acosh();
        let n = space.n_max as isize;
        let blocks = (-n..=n)
            .map(|d| {
                let (c0, m0) = sector_origin(d);
                let len = sector_len(space, d);
                let k = DMatrix::<f64>::from_fn(len, len, |i, j| {
                    let p = i.min(j);
                    if i.abs_diff(j) == 1 {
                        (((c0 + p + 1) * (m0 + p + 1)) as f64).sqrt()
                    } else {
                        0.0
                    }
                });
                let eig = k.symmetric_eigen();
                let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
                let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (I * r * l).exp()));
                &v * phases * v.transpose()
            })
            .collect();
        Ok(Self { z, space, blocks })
    }

    fn from_factors(z: f64, space: FockSpace, annihilator_sign: f64) -> Result<Self> {
        check_z(z, space)?;
        let s = (1.0 - z * z).max(0.0).sqrt();
        let n = space.n_max as isize;
        let blocks = (-n..=n)
            .map(|d| {
                let (c0, m0) = sector_origin(d);
                let len = sector_len(space, d);
                let mut left = DMatrix::<C64>::zeros(len, len);
                let mut right = DMatrix::<C64>::zeros(len, len);
                let mut middle = DMatrix::<C64>::zeros(len, len);
                for p in 0..len {
                    let (nc, nm) = (c0 + p, m0 + p);
                    middle[(p, p)] = C64::new(z.powi((1 + nc + nm) as i32), 0.0);
                    // (A†b†)^k |nc, nm⟩ / k!
                    let mut c = C64::new(1.0, 0.0);
                    for k in 0..len - p {
                        if k > 0 {
                            c *= I * s * ((((nc + k) * (nm + k)) as f64).sqrt() / k as f64);
                        }
                        left[(p + k, p)] = c;
                    }
                    // (A b)^k |nc, nm⟩ / k!
                    let mut c = C64::new(1.0, 0.0);
                    for k in 0..=p {
                        if k > 0 {
                            c *= I * annihilator_sign * s * ((((nc + 1 - k) * (nm + 1 - k)) as f64).sqrt() / k as f64);
                        }
                        right[(p - k, p)] = c;
                    }
                }
                left * middle * right
            })
            .collect();
        Ok(Self { z, space, blocks })
    }

    /// Block of the sector n_A − n_b = `d`, indexed by min(n_A, n_b).
    pub fn block(&self, d: isize) -> &DMatrix<C64> {
        &self.blocks[(d + self.space.n_max as isize) as usize]
    }

    pub fn apply(&self, ket: &KetState) -> Result<KetState> {
        if ket.space != self.space {
            return Err(Error::InvalidInput("ket and propagator live in different spaces".into()));
        }
        let mut out = DVector::zeros(self.space.dim());
        let n = self.space.n_max as isize;
        for d in -n..=n {
            let (c0, m0) = sector_origin(d);
            let len = sector_len(self.space, d);
            let v = DVector::from_fn(len, |p, _| ket.amplitudes[self.space.index(c0 + p, m0 + p)]);
            let w = self.block(d) * v;
            for p in 0..len {
                out[self.space.index(c0 + p, m0 + p)] = w[p];
            }
        }
        KetState::new(self.space, out)
    }

    /// Dense matrix on the full two-mode space.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut u = DMatrix::zeros(self.space.dim(), self.space.dim());
        let n = self.space.n_max as isize;
        for d in -n..=n {
            let (c0, m0) = sector_origin(d);
            let blk = self.block(d);
            for p in 0..blk.nrows() {
                for q in 0..blk.ncols() {
                    u[(self.space.index(c0 + p, m0 + p), self.space.index(c0 + q, m0 + q))] = blk[(p, q)];
                }
            }
        }
        u
    }
}

fn check_z(z: f64, space: FockSpace) -> Result<()> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::InvalidInput(format!("Z must lie in (0, 1], got {z}")));
    }
    if space.modes != 2 {
        return Err(Error::InvalidInput("write propagator needs a two-mode space".into()));
    }
    Ok(())
}

fn sector_origin(d: isize) -> (usize, usize) {
    (d.max(0) as usize, (-d).max(0) as usize)
}

fn sector_len(space: FockSpace, d: isize) -> usize {
    space.n_max + 1 - d.unsigned_abs()
}

/// Projects the cavity mode onto |1⟩ and returns the normalized mechanical
/// ket with the heralding probability.
pub fn condition_on_single_photon(state: &KetState) -> Result<(KetState, f64)> {
    let (branch, p) = single_photon_branch(state)?;
    if p < MIN_HERALD_PROBABILITY {
        return Err(Error::DegenerateConditioning { probability: p });
    }
    Ok((KetState::new(branch.space, &branch.amplitudes / C64::new(p.sqrt(), 0.0))?, p))
}

fn single_photon_branch(state: &KetState) -> Result<(KetState, f64)> {
    let space = state.space;
    if space.modes != 2 {
        return Err(Error::InvalidInput("conditioning needs a two-mode state".into()));
    }
    let mech = space.mode();
    let v = DVector::from_fn(mech.levels(), |m, _| state.amplitudes[space.index(1, m)]);
    let branch = KetState::new(mech, v)?;
    let p = branch.norm_sqr();
    Ok((branch, p))
}

/// Heralds a weighted ensemble of two-mode kets on one cavity photon.
/// Returns the normalized mechanical density operator and the total
/// heralding probability.
pub fn condition_ensemble_on_single_photon(ensemble: &[(f64, KetState)]) -> Result<(DensityOperator, f64)> {
    let first = ensemble.first().ok_or_else(|| Error::InvalidInput("empty ensemble".into()))?;
    let mech = first.1.space.mode();
    let mut rho = DMatrix::zeros(mech.dim(), mech.dim());
    for (w, ket) in ensemble {
        let (branch, _) = single_photon_branch(ket)?;
        rho += &branch.amplitudes * branch.amplitudes.adjoint() * C64::new(*w, 0.0);
    }
    let p = rho.trace().re;
    if p < MIN_HERALD_PROBABILITY {
        return Err(Error::DegenerateConditioning { probability: p });
    }
    Ok((DensityOperator::new(mech, rho / C64::new(p, 0.0))?, p))
}

/// Runs the write pulse on |0⟩_c ⊗ each mechanical ket of `ensemble`, then
/// heralds on a single cavity photon.
pub fn herald_ensemble(ensemble: &[(f64, KetState)], write: &WritePropagator) -> Result<(DensityOperator, f64)> {
    let vac = KetState::vacuum(write.space.mode());
    let evolved = ensemble
        .iter()
        .map(|(w, ket)| Ok((*w, write.apply(&KetState::product(&vac, ket)?)?)))
        .collect::<Result<Vec<_>>>()?;
    condition_ensemble_on_single_photon(&evolved)
}

/// Beamsplitter amplitudes ⟨k, n−k| exp[iφ(A†b + A b†)] |0, n⟩ with cos φ = B,
/// indexed `[n][k]` for n ≤ n_max, obtained by exponentiating each
/// fixed-excitation sector.
pub fn readout_amplitudes(b: f64, n_max: usize) -> Result<Vec<Vec<C64>>> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidInput(format!("B must lie in (0, 1], got {b}")));
    }
    let phi = b.min(1.0).acos();
    Ok((0..=n_max)
        .map(|n| {
            let len = n + 1;
            // basis |k, n−k⟩, k = cavity excitations
            let x = DMatrix::<f64>::from_fn(len, len, |i, j| {
                let k = i.min(j);
                if i.abs_diff(j) == 1 {
                    (((k + 1) * (n - k)) as f64).sqrt()
                } else {
                    0.0
                }
            });
            let eig = x.symmetric_eigen();
            (0..len)
                .map(|k| {
                    (0..len)
                        .map(|l| eig.eigenvectors[(k, l)] * eig.eigenvectors[(0, l)] * (I * phi * eig.eigenvalues[l]).exp())
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Output-mode reduction of the readout beamsplitter applied to
/// |0⟩_c ⊗ (any single-mode operator X): Tr_b[U (|0⟩⟨0| ⊗ X) U†].
pub fn readout_matrix(x: &DMatrix<C64>, b: f64) -> Result<DMatrix<C64>> {
    let n = x.nrows();
    if n == 0 || x.ncols() != n {
        return Err(Error::InvalidInput("readout input must be a non-empty square matrix".into()));
    }
    let amp = readout_amplitudes(b, n - 1)?;
    Ok(DMatrix::from_fn(n, n, |k, kp| {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n - k.max(kp) {
            acc += x[(k + j, kp + j)] * amp[k + j][k] * amp[kp + j][kp].conj();
        }
        acc
    }))
}

/// Reduced state of the output temporal mode after the readout pulse acts on
/// (vacuum ⊗ mechanical state).
pub fn readout_bogoliubov(mech: &DensityOperator, b: f64) -> Result<DensityOperator> {
    if mech.space.modes != 1 {
        return Err(Error::InvalidInput("readout acts on a single-mode mechanical state".into()));
    }
    DensityOperator::new(mech.space, readout_matrix(&mech.matrix, b)?)
}
