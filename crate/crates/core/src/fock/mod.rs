//! Truncated Fock-space oracle: states, the write-pulse two-mode squeezer,
//! single-photon heralding, the readout beamsplitter and number/quadrature
//! measurements.
//!
//! Two-mode kets are indexed `n_c * (n_max + 1) + n_m`, cavity (temporal
//! mode A) first, mechanics (b) second.

mod measure;
mod ops;

pub use measure::{
    converge, mandel_q_numeric, mean_number, number_moments, operator_mandel_q, operator_number_moments,
    operator_quadrature_variance, quadrature_variance_numeric, Converged, ConvergenceOptions,
};
pub use ops::{
    annihilation, condition_ensemble_on_single_photon, condition_on_single_photon, displacement, herald_ensemble,
    readout_amplitudes, readout_bogoliubov, readout_matrix, thermal_coherent_ensemble, thermal_coherent_state,
    WritePropagator,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default truncation for |β| ≤ 3.
pub const DEFAULT_N_MAX: usize = 40;

/// Truncation `|0⟩..|n_max⟩` on each of one or two modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub n_max: usize,
    pub modes: usize,
}

impl FockSpace {
    pub fn new(n_max: usize, modes: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidInput(format!("n_max must be >= 1, got {n_max}")));
        }
        if !(modes == 1 || modes == 2) {
            return Err(Error::InvalidInput(format!("mode count must be 1 or 2, got {modes}")));
        }
        Ok(Self { n_max, modes })
    }

    pub fn single(n_max: usize) -> Result<Self> {
        Self::new(n_max, 1)
    }

    pub fn two_mode(n_max: usize) -> Result<Self> {
        Self::new(n_max, 2)
    }

    /// Levels per mode, `n_max + 1`.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        self.levels().pow(self.modes as u32)
    }

    /// Index of |n_c, n_m⟩ in a two-mode space.
    pub fn index(&self, n_c: usize, n_m: usize) -> usize {
        n_c * self.levels() + n_m
    }

    /// The single-mode space with the same truncation.
    pub fn mode(&self) -> Self {
        Self { n_max: self.n_max, modes: 1 }
    }

    /// Warning text when |β|² exceeds n_max/4.
    pub fn displacement_warning(&self, beta: C64) -> Option<String> {
        let b2 = beta.norm_sqr();
        (b2 > self.n_max as f64 / 4.0)
            .then(|| format!("|beta|^2 = {b2:.3} exceeds n_max/4 = {:.2}; truncation error may be large", self.n_max as f64 / 4.0))
    }
}

/// Pure state; the norm may be below 1 for a conditional branch.
#[derive(Debug, Clone, PartialEq)]
pub struct KetState {
    pub space: FockSpace,
    pub amplitudes: DVector<C64>,
}

impl KetState {
    pub fn new(space: FockSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidInput(format!("ket length {} does not match dimension {}", amplitudes.len(), space.dim())));
        }
        Ok(Self { space, amplitudes })
    }

    /// Single-mode number state |n⟩.
    pub fn number(space: FockSpace, n: usize) -> Result<Self> {
        if space.modes != 1 || n > space.n_max {
            return Err(Error::InvalidInput(format!("|{n}> is not in a single-mode space with n_max = {}", space.n_max)));
        }
        let mut v = DVector::zeros(space.dim());
        v[n] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes: v })
    }

    pub fn vacuum(space: FockSpace) -> Self {
        let mut v = DVector::zeros(space.dim());
        v[0] = C64::new(1.0, 0.0);
        Self { space, amplitudes: v }
    }

    /// Truncated coherent state from the closed-form expansion
    /// e^{−|α|²/2} αⁿ/√n!, not renormalized.
    pub fn coherent(space: FockSpace, alpha: C64) -> Result<Self> {
        if space.modes != 1 {
            return Err(Error::InvalidInput("coherent state needs a single-mode space".into()));
        }
        let mut v = DVector::zeros(space.dim());
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..=space.n_max {
            if n > 0 {
                c *= alpha / (n as f64).sqrt();
            }
            v[n] = c;
        }
        Ok(Self { space, amplitudes: v })
    }

    /// Product state |cavity⟩ ⊗ |mechanics⟩ of two single-mode kets.
    pub fn product(cavity: &KetState, mech: &KetState) -> Result<Self> {
        if cavity.space.modes != 1 || mech.space != cavity.space {
            return Err(Error::InvalidInput("product needs two single-mode kets with equal n_max".into()));
        }
        let space = FockSpace::two_mode(cavity.space.n_max)?;
        Ok(Self { space, amplitudes: cavity.amplitudes.kronecker(&mech.amplitudes) })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero ket".into()));
        }
        Ok(Self { space: self.space, amplitudes: &self.amplitudes / C64::new(n, 0.0) })
    }

    /// Applies the creation operator of a single-mode ket (top level dropped).
    pub fn create(&self) -> Result<Self> {
        if self.space.modes != 1 {
            return Err(Error::InvalidInput("create acts on single-mode kets".into()));
        }
        let mut v = DVector::zeros(self.space.dim());
        for n in 0..self.space.n_max {
            v[n + 1] = self.amplitudes[n] * ((n + 1) as f64).sqrt();
        }
        Ok(Self { space: self.space, amplitudes: v })
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &KetState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// |⟨a|b⟩|² / (‖a‖²‖b‖²).
    pub fn fidelity(&self, other: &KetState) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    /// Probability weight on single-mode levels `n > n`.
    pub fn tail_weight(&self, above: usize) -> f64 {
        self.amplitudes.iter().skip(above + 1).map(|c| c.norm_sqr()).sum()
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator { space: self.space, matrix: &self.amplitudes * self.amplitudes.adjoint() }
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = KetDump { n_max: self.space.n_max, modes: self.space.modes, amplitudes: self.amplitudes.iter().map(|c| [c.re, c.im]).collect() };
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: KetDump = serde_json::from_str(text)?;
        let space = FockSpace::new(dump.n_max, dump.modes)?;
        Self::new(space, DVector::from_iterator(dump.amplitudes.len(), dump.amplitudes.iter().map(|a| C64::new(a[0], a[1]))))
    }
}

/// Density matrix; the trace may be below 1 for a conditional branch.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub space: FockSpace,
    pub matrix: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(space: FockSpace, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, space dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("cannot normalize a state with trace {t}")));
        }
        Ok(Self { space: self.space, matrix: &self.matrix / C64::new(t, 0.0) })
    }

    /// Largest |ρ − ρ†| element.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Checks Hermiticity (10⁻¹²), trace in (0, 1] and positivity (−10⁻⁹).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::InvalidInput(format!("density operator is not Hermitian (error {herm:.3e})")));
        }
        let t = self.trace();
        if !(t > 0.0 && t <= 1.0 + 1e-9) {
            return Err(Error::InvalidInput(format!("trace {t} outside (0, 1]")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -1e-9 {
            return Err(Error::InvalidInput(format!("smallest eigenvalue {lmin:.3e} is negative")));
        }
        Ok(())
    }

    /// Diagonal of a single-mode state, real part.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|c| c.re).collect()
    }

    /// ⟨ψ|ρ|ψ⟩ / (‖ψ‖² tr ρ).
    pub fn fidelity_with(&self, ket: &KetState) -> f64 {
        let v = &ket.amplitudes;
        (v.adjoint() * &self.matrix * v)[(0, 0)].re / (ket.norm_sqr() * self.trace())
    }

    pub fn to_json(&self) -> Result<String> {
        let rows = self.matrix.row_iter().map(|r| r.iter().map(|c| [c.re, c.im]).collect()).collect();
        Ok(serde_json::to_string_pretty(&DensityDump { n_max: self.space.n_max, modes: self.space.modes, rows })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: DensityDump = serde_json::from_str(text)?;
        let space = FockSpace::new(dump.n_max, dump.modes)?;
        let dim = dump.rows.len();
        if dump.rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("density dump is not square".into()));
        }
        Self::new(space, DMatrix::from_fn(dim, dim, |i, j| C64::new(dump.rows[i][j][0], dump.rows[i][j][1])))
    }
}

#[derive(Serialize, Deserialize)]
struct KetDump {
    n_max: usize,
    modes: usize,
    amplitudes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct DensityDump {
    n_max: usize,
    modes: usize,
    rows: Vec<Vec<[f64; 2]>>,
}
