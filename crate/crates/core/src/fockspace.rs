//! Truncated Fock spaces for two harmonic modes.
//!
//! Natural units with hbar = 1 throughout. States |n1, n2> are ordered
//! lexicographically, so index = n1 * (n_max + 1) + n2.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Elementwise bound for `O == O^dagger`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// One harmonic mode: angular frequency and mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    omega: f64,
    mass: f64,
}

impl OscillatorSpec {
    pub fn new(omega: f64, mass: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(invalid("omega", format!("must be finite and > 0, got {omega}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid("mass", format!("must be finite and > 0, got {mass}")));
        }
        Ok(Self { omega, mass })
    }

    /// Unit-mass mode.
    pub fn with_omega(omega: f64) -> Result<Self> {
        Self::new(omega, 1.0)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// Which of the two modes an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    First,
    Second,
}

impl TryFrom<u8> for Mode {
    type Error = Error;

    fn try_from(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Mode::First),
            2 => Ok(Mode::Second),
            other => Err(invalid("which", format!("oscillator index must be 1 or 2, got {other}"))),
        }
    }
}

/// Product basis |n1, n2> with 0 <= n_i <= n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasis {
    n_max: usize,
    omega1: f64,
    omega2: f64,
    states: Vec<(usize, usize)>,
    energies: Vec<f64>,
}

/// Builds the `(n_max + 1)^2` product basis with energies
/// `omega1 (n1 + 1/2) + omega2 (n2 + 1/2)`.
pub fn build_basis(
    spec1: &OscillatorSpec,
    spec2: &OscillatorSpec,
    n_max: usize,
) -> Result<ProductBasis> {
    if n_max < 1 {
        return Err(invalid(
            "n_max",
            "at least two levels per mode are needed to exchange a quantum",
        ));
    }
    let (w1, w2) = (spec1.omega(), spec2.omega());
    let levels = n_max + 1;
    let mut states = Vec::with_capacity(levels * levels);
    let mut energies = Vec::with_capacity(levels * levels);
    for n1 in 0..levels {
        for n2 in 0..levels {
            states.push((n1, n2));
            energies.push(w1 * (n1 as f64 + 0.5) + w2 * (n2 as f64 + 0.5));
        }
    }
    Ok(ProductBasis {
        n_max,
        omega1: w1,
        omega2: w2,
        states,
        energies,
    })
}

impl ProductBasis {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn omega(&self, mode: Mode) -> f64 {
        match mode {
            Mode::First => self.omega1,
            Mode::Second => self.omega2,
        }
    }

    pub fn states(&self) -> &[(usize, usize)] {
        &self.states
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, index: usize) -> f64 {
        self.energies[index]
    }

    /// Index of |n1, n2>, or `None` outside the truncation.
    pub fn index(&self, n1: usize, n2: usize) -> Option<usize> {
        (n1 <= self.n_max && n2 <= self.n_max).then(|| n1 * (self.n_max + 1) + n2)
    }

    pub fn state(&self, index: usize) -> (usize, usize) {
        self.states[index]
    }

    /// Quantum number of `mode` in state `index`.
    pub fn occupation(&self, index: usize, mode: Mode) -> usize {
        let (n1, n2) = self.states[index];
        match mode {
            Mode::First => n1,
            Mode::Second => n2,
        }
    }

    /// Indices of states inside the top `shells` Fock levels of either mode.
    pub fn top_shell_indices(&self, shells: usize) -> Vec<usize> {
        let cut = (self.n_max + 1).saturating_sub(shells);
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &(n1, n2))| n1 >= cut || n2 >= cut)
            .map(|(i, _)| i)
            .collect()
    }

    /// Unit vector on basis state `index`.
    pub fn unit_vector(&self, index: usize) -> nalgebra::DVector<Complex64> {
        let mut v = nalgebra::DVector::zeros(self.dim());
        v[index] = Complex64::new(1.0, 0.0);
        v
    }
}

/// Dense Hermitian matrix in a product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Wraps `entries`, rejecting anything farther than [`HERMITIAN_TOL`]
    /// from its conjugate transpose.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let deviation = hermitian_deviation(&entries);
        if deviation >= HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    /// Real diagonal operator.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(values[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// `self * factor`
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * Complex64::new(factor, 0.0),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, Complex64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    out.push((i, j, z));
                }
            }
        }
        out
    }

    pub fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Max elementwise `|O - O^dagger|`.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Lowering and raising operator of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderPair {
    pub lowering: DMatrix<Complex64>,
    pub raising: DMatrix<Complex64>,
}

/// `a|n> = sqrt(n)|n-1>` and `a^dagger|n> = sqrt(n+1)|n+1>`; the raising
/// operator maps the top level to zero.
pub fn ladder_ops(basis: &ProductBasis, mode: Mode) -> LadderPair {
    let dim = basis.dim();
    let mut lowering = DMatrix::zeros(dim, dim);
    for (col, &(n1, n2)) in basis.states().iter().enumerate() {
        let (n, lowered) = match mode {
            Mode::First => (n1, n1.checked_sub(1).map(|m| (m, n2))),
            Mode::Second => (n2, n2.checked_sub(1).map(|m| (n1, m))),
        };
        if let Some((m1, m2)) = lowered {
            let row = basis.index(m1, m2).expect("lowered state is in range");
            lowering[(row, col)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
    }
    let raising = lowering.adjoint();
    LadderPair { lowering, raising }
}

/// `N_mode` as a diagonal operator.
pub fn number_operator(basis: &ProductBasis, mode: Mode) -> HermitianOperator {
    let values: Vec<f64> = (0..basis.dim())
        .map(|i| basis.occupation(i, mode) as f64)
        .collect();
    HermitianOperator::diagonal(&values)
}

/// Unperturbed Hamiltonian, diagonal in the product basis.
pub fn free_hamiltonian(basis: &ProductBasis) -> HermitianOperator {
    HermitianOperator::diagonal(basis.energies())
}

fn exchange_elements(basis: &ProductBasis, entries: &mut DMatrix<Complex64>) {
    let n_max = basis.n_max();
    for (row, &(n1, n2)) in basis.states().iter().enumerate() {
        // <n1,n2| a1 a2^dagger |n1+1,n2-1> = sqrt(n1+1) sqrt(n2)
        if n2 >= 1 && n1 < n_max {
            let col = basis.index(n1 + 1, n2 - 1).unwrap();
            entries[(row, col)] += Complex64::new(((n1 + 1) as f64).sqrt() * (n2 as f64).sqrt(), 0.0);
        }
        // <n1,n2| a1^dagger a2 |n1-1,n2+1> = sqrt(n1) sqrt(n2+1)
        if n1 >= 1 && n2 < n_max {
            let col = basis.index(n1 - 1, n2 + 1).unwrap();
            entries[(row, col)] += Complex64::new((n1 as f64).sqrt() * ((n2 + 1) as f64).sqrt(), 0.0);
        }
    }
}

/// Rotating-wave coupling `a1 a2^dagger + a1^dagger a2`.
pub fn rwa_coupling(basis: &ProductBasis) -> HermitianOperator {
    let dim = basis.dim();
    let mut entries = DMatrix::zeros(dim, dim);
    exchange_elements(basis, &mut entries);
    HermitianOperator { entries }
}

/// Full position-position coupling in ladder form,
/// `a1 a2 + a1 a2^dagger + a1^dagger a2 + a1^dagger a2^dagger`.
///
/// Dimensionless: every physical prefactor lives in the drive amplitude.
pub fn full_coupling(basis: &ProductBasis) -> HermitianOperator {
    let dim = basis.dim();
    let n_max = basis.n_max();
    let mut entries = DMatrix::zeros(dim, dim);
    exchange_elements(basis, &mut entries);
    for (row, &(n1, n2)) in basis.states().iter().enumerate() {
        // <n1,n2| a1 a2 |n1+1,n2+1>
        if n1 < n_max && n2 < n_max {
            let col = basis.index(n1 + 1, n2 + 1).unwrap();
            entries[(row, col)] +=
                Complex64::new(((n1 + 1) as f64).sqrt() * ((n2 + 1) as f64).sqrt(), 0.0);
        }
        // <n1,n2| a1^dagger a2^dagger |n1-1,n2-1>
        if n1 >= 1 && n2 >= 1 {
            let col = basis.index(n1 - 1, n2 - 1).unwrap();
            entries[(row, col)] += Complex64::new((n1 as f64).sqrt() * (n2 as f64).sqrt(), 0.0);
        }
    }
    HermitianOperator { entries }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Max elementwise `|[X, Y]|`.
pub fn commutator_norm(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> f64 {
    max_abs(&(x * y - y * x))
}
