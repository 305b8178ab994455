use std::fmt;

use serde::Serialize;

use super::{QuantumError, Result};

/// One labeled tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled tensor factors.
///
/// Basis indices are row-major over the factors: the last factor varies
/// fastest, so the index of `|i_0 i_1 ... i_k⟩` is
/// `((i_0 * d_1 + i_1) * d_2 + ...) + i_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SubsystemLayout {
    factors: Vec<Factor>,
}

impl SubsystemLayout {
    pub fn new<I, S>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut out: Vec<Factor> = Vec::new();
        for (label, dim) in factors {
            let label = label.into();
            if dim == 0 {
                return Err(QuantumError::ZeroDimension(label));
            }
            if out.iter().any(|f| f.label == label) {
                return Err(QuantumError::DuplicateLabel(label));
            }
            out.push(Factor { label, dim });
        }
        if out.is_empty() {
            return Err(QuantumError::EmptyLayout);
        }
        Ok(Self { factors: out })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.label.as_str())
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn factor_dim(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|p| self.factors[p].dim)
            .ok_or_else(|| QuantumError::UnknownLabel(label.to_string()))
    }

    /// Layout of `self` followed by `other`.
    pub fn concat(&self, other: &SubsystemLayout) -> Result<Self> {
        Self::new(
            self.factors
                .iter()
                .chain(other.factors.iter())
                .map(|f| (f.label.clone(), f.dim)),
        )
    }

    /// Sub-layout holding the named factors in this layout's order.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(QuantumError::EmptyKeepSet);
        }
        for l in labels {
            if !self.contains(l.as_ref()) {
                return Err(QuantumError::UnknownLabel(l.as_ref().to_string()));
            }
        }
        Self::new(
            self.factors
                .iter()
                .filter(|f| labels.iter().any(|l| l.as_ref() == f.label))
                .map(|f| (f.label.clone(), f.dim)),
        )
    }

    /// Copy with one factor renamed.
    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let pos = self
            .position(from)
            .ok_or_else(|| QuantumError::UnknownLabel(from.to_string()))?;
        let mut factors = self.factors.clone();
        factors[pos].label = to.to_string();
        Self::new(factors.into_iter().map(|f| (f.label, f.dim)))
    }
}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| format!("{}[{}]", x.label, x.dim))
            .collect();
        write!(f, "{}", parts.join(" ⊗ "))
    }
}

/// Splits full-layout basis indices into a selected group of factors and the
/// remaining ones.
///
/// `full_index(s, r)` returns the index in the full layout whose digits on the
/// selected factors compose to `s` (in selection order) and whose remaining
/// digits compose to `r` (in layout order).
#[derive(Debug, Clone)]
pub(crate) struct IndexSplit {
    pub sub_dim: usize,
    pub rest_dim: usize,
    table: Vec<usize>,
}

impl IndexSplit {
    /// `selection` lists layout positions; their order defines the sub index.
    pub fn new(layout: &SubsystemLayout, selection: &[usize]) -> Self {
        let dims: Vec<usize> = layout.factors.iter().map(|f| f.dim).collect();
        let n = dims.len();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let rest: Vec<usize> = (0..n).filter(|p| !selection.contains(p)).collect();
        let sub_dim: usize = selection.iter().map(|&p| dims[p]).product();
        let rest_dim: usize = rest.iter().map(|&p| dims[p]).product();

        // Offsets contributed by each sub index and each rest index.
        let offsets = |positions: &[usize], total: usize| -> Vec<usize> {
            let mut out = Vec::with_capacity(total);
            for mut idx in 0..total {
                let mut off = 0;
                for &p in positions.iter().rev() {
                    off += (idx % dims[p]) * strides[p];
                    idx /= dims[p];
                }
                out.push(off);
            }
            out
        };
        let sub_off = offsets(selection, sub_dim);
        let rest_off = offsets(&rest, rest_dim);

        let mut table = Vec::with_capacity(sub_dim * rest_dim);
        for s in &sub_off {
            for r in &rest_off {
                table.push(s + r);
            }
        }
        Self {
            sub_dim,
            rest_dim,
            table,
        }
    }

    #[inline]
    pub fn full_index(&self, sub: usize, rest: usize) -> usize {
        self.table[sub * self.rest_dim + rest]
    }
}
