use num_complex::Complex64;

use super::layout::{IndexSplit, SubsystemLayout};
use super::{check_finite, QuantumError, Result, MAX_OPERATOR_DIM};

/// Dense square operator over a labeled layout, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: SubsystemLayout,
    data: Vec<Complex64>,
    hermitian: bool,
}

impl Operator {
    pub fn new(layout: SubsystemLayout, data: Vec<Complex64>) -> Result<Self> {
        let dim = layout.dim();
        if dim > MAX_OPERATOR_DIM {
            return Err(QuantumError::TooLarge {
                dim,
                cap: MAX_OPERATOR_DIM,
            });
        }
        if data.len() != dim * dim {
            return Err(QuantumError::WrongLength {
                expected: dim * dim,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            layout,
            data,
            hermitian: false,
        })
    }

    /// Builds an operator on a single factor from nested rows.
    pub fn from_rows<R: AsRef<[Complex64]>>(
        label: impl Into<String>,
        rows: &[R],
    ) -> Result<Self> {
        let dim = rows.len();
        let layout = SubsystemLayout::single(label, dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(QuantumError::WrongLength {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(layout, data)
    }

    pub fn identity(layout: SubsystemLayout) -> Result<Self> {
        let dim = layout.dim();
        let mut op = Self::zeros(layout)?;
        for i in 0..dim {
            op.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn zeros(layout: SubsystemLayout) -> Result<Self> {
        let dim = layout.dim();
        Self::new(layout, vec![Complex64::new(0.0, 0.0); dim * dim])
    }

    /// `|ket⟩⟨bra|` between computational basis states.
    pub fn basis_outer(layout: SubsystemLayout, ket: usize, bra: usize) -> Result<Self> {
        let dim = layout.dim();
        if ket >= dim || bra >= dim {
            return Err(QuantumError::IndexOutOfRange {
                index: ket.max(bra),
                dim,
            });
        }
        let mut op = Self::zeros(layout)?;
        op.data[ket * dim + bra] = Complex64::new(1.0, 0.0);
        op.hermitian = ket == bra;
        Ok(op)
    }

    pub(crate) fn from_parts(layout: SubsystemLayout, data: Vec<Complex64>, hermitian: bool) -> Self {
        debug_assert_eq!(data.len(), layout.dim() * layout.dim());
        Self {
            layout,
            data,
            hermitian,
        }
    }

    pub fn with_hermitian_hint(mut self, hermitian: bool) -> Self {
        self.hermitian = hermitian;
        self
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian
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

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        Ok(Self {
            layout: self.layout.relabel(from, to)?,
            data: self.data.clone(),
            hermitian: self.hermitian,
        })
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Self::from_parts(self.layout.clone(), data, self.hermitian)
    }

    fn require_same_layout(&self, other: &SubsystemLayout) -> Result<()> {
        if &self.layout != other {
            return Err(QuantumError::LayoutMismatch {
                left: self.layout.to_string(),
                right: other.to_string(),
            });
        }
        Ok(())
    }

    /// Matrix product `self · rhs`. Zero entries of `self` are skipped, which
    /// keeps projector and permutation products cheap.
    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        self.require_same_layout(&rhs.layout)?;
        Ok(Self::from_parts(
            self.layout.clone(),
            matmul_raw(&self.data, &rhs.data, self.dim()),
            false,
        ))
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.require_same_layout(&rhs.layout)?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::from_parts(
            self.layout.clone(),
            data,
            self.hermitian && rhs.hermitian,
        ))
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Operator> {
        self.require_same_layout(&rhs.layout)?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_parts(
            self.layout.clone(),
            data,
            self.hermitian && rhs.hermitian,
        ))
    }

    pub fn scale(&self, factor: Complex64) -> Operator {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self::from_parts(
            self.layout.clone(),
            data,
            self.hermitian && factor.im == 0.0,
        )
    }

    pub(crate) fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, x) in row.iter().zip(v) {
                if a.re != 0.0 || a.im != 0.0 {
                    acc += a * x;
                }
            }
            *o = acc;
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Operator) -> Result<f64> {
        self.require_same_layout(&rhs.layout)?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `max |A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data, self.dim())
    }

    /// `max |U†U − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let adj = self.adjoint();
        let prod = matmul_raw(&adj.data, &self.data, n);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[i * n + j] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn require_unitary(&self, tol: f64) -> Result<()> {
        let defect = self.unitarity_defect();
        if defect > tol {
            return Err(QuantumError::NotUnitary { defect });
        }
        Ok(())
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.dim();
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    /// Kronecker product in layout order `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Operator) -> Result<Operator> {
        let layout = self.layout.concat(&rhs.layout)?;
        let (m, n) = (self.dim(), rhs.dim());
        let dim = m * n;
        if dim > MAX_OPERATOR_DIM {
            return Err(QuantumError::TooLarge {
                dim,
                cap: MAX_OPERATOR_DIM,
            });
        }
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..m {
            for j in 0..m {
                let a = self.data[i * m + j];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        data[(i * n + k) * dim + (j * n + l)] = a * rhs.data[k * n + l];
                    }
                }
            }
        }
        Ok(Self::from_parts(
            layout,
            data,
            self.hermitian && rhs.hermitian,
        ))
    }

    /// Embeds this operator into a larger layout, acting as the identity on
    /// every factor it does not name. Factors are matched by label and may
    /// appear in any order in `target`.
    pub fn embed(&self, target: &SubsystemLayout) -> Result<Operator> {
        let selection = selection_positions(&self.layout, target)?;
        let dim = target.dim();
        if dim > MAX_OPERATOR_DIM {
            return Err(QuantumError::TooLarge {
                dim,
                cap: MAX_OPERATOR_DIM,
            });
        }
        let split = IndexSplit::new(target, &selection);
        let sub = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..split.rest_dim {
            for a in 0..sub {
                let row = split.full_index(a, r);
                for b in 0..sub {
                    let v = self.data[a * sub + b];
                    if v.re != 0.0 || v.im != 0.0 {
                        data[row * dim + split.full_index(b, r)] = v;
                    }
                }
            }
        }
        Ok(Self::from_parts(target.clone(), data, self.hermitian))
    }
}

/// Layout positions in `target` of each factor of `sub`, in `sub` order.
pub(crate) fn selection_positions(
    sub: &SubsystemLayout,
    target: &SubsystemLayout,
) -> Result<Vec<usize>> {
    sub.factors()
        .iter()
        .map(|f| {
            let pos = target
                .position(&f.label)
                .ok_or_else(|| QuantumError::UnknownLabel(f.label.clone()))?;
            let dim = target.factors()[pos].dim;
            if dim != f.dim {
                return Err(QuantumError::DimensionMismatch {
                    label: f.label.clone(),
                    expected: dim,
                    found: f.dim,
                });
            }
            Ok(pos)
        })
        .collect()
}

pub(crate) fn matmul_raw(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let out_row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let b_row = &b[k * n..(k + 1) * n];
            for (o, bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    out
}

pub(crate) fn hermiticity_defect(data: &[Complex64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((data[i * n + j] - data[j * n + i].conj()).norm());
        }
    }
    worst
}
