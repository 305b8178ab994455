use num_complex::Complex64;

use super::layout::{IndexSplit, SubsystemLayout};
use super::operator::{selection_positions, Operator};
use super::{check_finite, QuantumError, Result, MAX_STATE_DIM, NORMALIZATION_TOL};

/// Amplitudes over a labeled tensor-product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SubsystemLayout,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(layout: SubsystemLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = layout.dim();
        if dim > MAX_STATE_DIM {
            return Err(QuantumError::TooLarge {
                dim,
                cap: MAX_STATE_DIM,
            });
        }
        if amplitudes.len() != dim {
            return Err(QuantumError::WrongLength {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        check_finite(&amplitudes)?;
        Ok(Self { layout, amplitudes })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(layout: SubsystemLayout, index: usize) -> Result<Self> {
        let dim = layout.dim();
        if index >= dim {
            return Err(QuantumError::IndexOutOfRange { index, dim });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(layout, amps)
    }

    /// Single-factor state from its amplitudes.
    pub fn on_factor(label: impl Into<String>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let layout = SubsystemLayout::single(label, amplitudes.len())?;
        Self::new(layout, amplitudes)
    }

    pub(crate) fn from_parts(layout: SubsystemLayout, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(layout.dim(), amplitudes.len());
        Self { layout, amplitudes }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(QuantumError::NotNormalized { norm: 0.0 });
        }
        Ok(Self::from_parts(
            self.layout.clone(),
            self.amplitudes.iter().map(|a| a / n).collect(),
        ))
    }

    pub fn require_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm * norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(QuantumError::NotNormalized { norm });
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(QuantumError::LayoutMismatch {
                left: self.layout.to_string(),
                right: other.layout.to_string(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Largest amplitude modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        if self.layout != other.layout {
            return Err(QuantumError::LayoutMismatch {
                left: self.layout.to_string(),
                right: other.layout.to_string(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Applies an operator defined on a subset of this layout's factors
    /// without materializing its full-space embedding.
    pub fn apply_local(&self, op: &Operator) -> Result<StateVector> {
        let selection = selection_positions(op.layout(), &self.layout)?;
        let split = IndexSplit::new(&self.layout, &selection);
        let sub = op.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        let mut scratch = vec![Complex64::new(0.0, 0.0); sub];
        for r in 0..split.rest_dim {
            for (b, s) in scratch.iter_mut().enumerate() {
                *s = self.amplitudes[split.full_index(b, r)];
            }
            for a in 0..sub {
                let mut acc = Complex64::new(0.0, 0.0);
                for (b, s) in scratch.iter().enumerate() {
                    let m = op.get(a, b);
                    if m.re != 0.0 || m.im != 0.0 {
                        acc += m * s;
                    }
                }
                out[split.full_index(a, r)] = acc;
            }
        }
        Ok(Self::from_parts(self.layout.clone(), out))
    }

    /// Reduced density entries on the kept factors (layout order), computed
    /// directly from the amplitudes.
    pub(crate) fn reduced_raw(&self, keep: &SubsystemLayout) -> Result<Vec<Complex64>> {
        let selection = selection_positions(keep, &self.layout)?;
        let split = IndexSplit::new(&self.layout, &selection);
        let k = split.sub_dim;
        let mut out = vec![Complex64::new(0.0, 0.0); k * k];
        for r in 0..split.rest_dim {
            for a in 0..k {
                let pa = self.amplitudes[split.full_index(a, r)];
                if pa.re == 0.0 && pa.im == 0.0 {
                    continue;
                }
                for b in 0..k {
                    out[a * k + b] += pa * self.amplitudes[split.full_index(b, r)].conj();
                }
            }
        }
        Ok(out)
    }
}
