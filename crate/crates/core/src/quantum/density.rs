use nalgebra::DMatrix;
use num_complex::Complex64;

use super::layout::{IndexSplit, SubsystemLayout};
use super::operator::{hermiticity_defect, matmul_raw, selection_positions, Operator};
use super::state::StateVector;
use super::{
    check_finite, QuantumError, Result, EIGENVALUE_FLOOR, HERMITIAN_TOL, MAX_DENSITY_DIM, TRACE_TOL,
};

/// Dense density matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SubsystemLayout,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// Validated constructor: Hermitian, unit trace and positive
    /// semidefinite within the crate tolerances.
    pub fn new(layout: SubsystemLayout, data: Vec<Complex64>) -> Result<Self> {
        let rho = Self::unchecked(layout, data)?;
        rho.validate()?;
        Ok(rho)
    }

    fn unchecked(layout: SubsystemLayout, data: Vec<Complex64>) -> Result<Self> {
        let dim = layout.dim();
        if dim > MAX_DENSITY_DIM {
            return Err(QuantumError::TooLarge {
                dim,
                cap: MAX_DENSITY_DIM,
            });
        }
        if data.len() != dim * dim {
            return Err(QuantumError::WrongLength {
                expected: dim * dim,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { layout, data })
    }

    pub(crate) fn from_parts(layout: SubsystemLayout, data: Vec<Complex64>) -> Result<Self> {
        Self::unchecked(layout, data)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(state: &StateVector) -> Result<Self> {
        state.require_normalized()?;
        let amps = state.amplitudes();
        let n = amps.len();
        if n > MAX_DENSITY_DIM {
            return Err(QuantumError::TooLarge {
                dim: n,
                cap: MAX_DENSITY_DIM,
            });
        }
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = amps[i] * amps[j].conj();
            }
        }
        Self::unchecked(state.layout().clone(), data)
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Result<Self> {
        let n = layout.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0 / n as f64, 0.0);
        }
        Self::unchecked(layout, data)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.dim();
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data, self.dim())
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, j| {
            (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn validate(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(QuantumError::NotHermitian { defect });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QuantumError::InvalidTrace { trace: tr.re });
        }
        if let Some(&min) = self.eigenvalues().first() {
            if min < EIGENVALUE_FLOOR {
                return Err(QuantumError::NotPositive { min_eigenvalue: min });
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if self.layout != other.layout {
            return Err(QuantumError::LayoutMismatch {
                left: self.layout.to_string(),
                right: other.layout.to_string(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `U ρ U†` without the unitarity gate.
    pub(crate) fn conjugate_raw(&self, u: &Operator) -> Result<Self> {
        if u.layout() != &self.layout {
            return Err(QuantumError::LayoutMismatch {
                left: u.layout().to_string(),
                right: self.layout.to_string(),
            });
        }
        let n = self.dim();
        let ur = matmul_raw(u.data(), &self.data, n);
        let adj = u.adjoint();
        let data = matmul_raw(&ur, adj.data(), n);
        Self::unchecked(self.layout.clone(), data)
    }

    /// Reduced state on `keep` (layout order).
    pub(crate) fn reduced_raw(&self, keep: &SubsystemLayout) -> Result<Vec<Complex64>> {
        let selection = selection_positions(keep, &self.layout)?;
        let split = IndexSplit::new(&self.layout, &selection);
        let n = self.dim();
        let k = split.sub_dim;
        let mut out = vec![Complex64::new(0.0, 0.0); k * k];
        for a in 0..k {
            for b in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..split.rest_dim {
                    acc += self.data[split.full_index(a, r) * n + split.full_index(b, r)];
                }
                out[a * k + b] = acc;
            }
        }
        Ok(out)
    }
}
