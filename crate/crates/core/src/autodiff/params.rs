use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which part of the model a parameter belongs to.
///
/// `Model` parameters make up the model size without word representations and are the
/// only ones the ℓ2 penalty touches. `Embedding` covers tunable word vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Model,
    Embedding,
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub group: ParamGroup,
    pub value: Tensor<T>,
}

/// Named trainable tensors of one model configuration, in a fixed order.
#[derive(Clone, Debug)]
pub struct ParameterSet<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Real> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        ParameterSet {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, group: ParamGroup, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, group, value });
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.value(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Total number of scalars, optionally restricted to one group.
    pub fn count(&self, group: Option<ParamGroup>) -> usize {
        self.params
            .iter()
            .filter(|p| group.is_none_or(|g| p.group == g))
            .map(|p| p.value.len())
            .sum()
    }

    /// ½‖θ‖² over the model group.
    pub fn half_sq_norm_model(&self) -> T {
        let half = T::from_f64(0.5);
        self.params
            .iter()
            .filter(|p| p.group == ParamGroup::Model)
            .map(|p| p.value.sum_squares())
            .sum::<T>()
            * half
    }

    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    group: p.group,
                    value: p.value.cast(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    pub fn zeroed(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.params {
            p.value = Tensor::zeros(p.value.rows(), p.value.cols());
        }
        out
    }

    /// Checks that `other` has the same names, groups, and shapes in the same order.
    pub fn check_layout<U: Real>(&self, other: &ParameterSet<U>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Integrity(format!(
                "expected {} parameters, found {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.name != b.name || a.group != b.group || a.value.shape() != b.value.shape() {
                return Err(Error::Integrity(format!(
                    "parameter mismatch: expected `{}` {:?}, found `{}` {:?}",
                    a.name,
                    a.value.shape(),
                    b.name,
                    b.value.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.params
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                group: p.group,
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.data().iter().map(|v| v.to_f64()).collect(),
            })
            .collect()
    }

    pub fn from_records(records: &[ParamRecord]) -> Result<Self> {
        let mut set = ParameterSet::new();
        for r in records {
            if set.id(&r.name).is_some() {
                return Err(Error::Integrity(format!("duplicate parameter `{}`", r.name)));
            }
            let data = r.data.iter().map(|&v| T::from_f64(v)).collect();
            set.insert(r.name.clone(), r.group, Tensor::from_vec(r.rows, r.cols, data)?);
        }
        Ok(set)
    }
}

/// Serialized form of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub group: ParamGroup,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Gradient for one parameter: dense, or a sparse set of rows for embedding gathers.
#[derive(Clone, Debug, PartialEq)]
pub enum GradBuf<T> {
    Dense(Tensor<T>),
    Rows {
        cols: usize,
        rows: BTreeMap<usize, Vec<T>>,
    },
}

impl<T: Real> GradBuf<T> {
    /// Gradient entry at flat row-major `index`; absent sparse rows read as zero.
    pub fn at(&self, index: usize) -> T {
        match self {
            GradBuf::Dense(t) => t.data()[index],
            GradBuf::Rows { cols, rows } => rows
                .get(&(index / cols))
                .map_or(T::zero(), |r| r[index % cols]),
        }
    }

    fn add(&mut self, other: &GradBuf<T>) {
        match (self, other) {
            (GradBuf::Dense(a), GradBuf::Dense(b)) => a.add_assign(b),
            (GradBuf::Rows { rows: a, .. }, GradBuf::Rows { rows: b, .. }) => {
                for (r, v) in b {
                    add_row(a, *r, v);
                }
            }
            (GradBuf::Dense(a), GradBuf::Rows { cols, rows }) => {
                for (r, v) in rows {
                    for (dst, &g) in a.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(v) {
                        *dst += g;
                    }
                }
            }
            (this @ GradBuf::Rows { .. }, GradBuf::Dense(b)) => {
                let mut dense = b.clone();
                if let GradBuf::Rows { cols, rows } = &*this {
                    for (r, v) in rows {
                        for (dst, &g) in dense.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(v) {
                            *dst += g;
                        }
                    }
                }
                *this = GradBuf::Dense(dense);
            }
        }
    }

    fn scale(&mut self, c: T) {
        match self {
            GradBuf::Dense(t) => {
                for v in t.data_mut() {
                    *v *= c;
                }
            }
            GradBuf::Rows { rows, .. } => {
                for v in rows.values_mut().flatten() {
                    *v *= c;
                }
            }
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            GradBuf::Dense(t) => t.all_finite(),
            GradBuf::Rows { rows, .. } => rows.values().flatten().all(|v| v.is_finite()),
        }
    }
}

fn add_row<T: Real>(rows: &mut BTreeMap<usize, Vec<T>>, row: usize, values: &[T]) {
    match rows.get_mut(&row) {
        Some(dst) => {
            for (d, &g) in dst.iter_mut().zip(values) {
                *d += g;
            }
        }
        None => {
            rows.insert(row, values.to_vec());
        }
    }
}

/// Gradients keyed by parameter. Parameters the loss never touched are absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamGrads<T> {
    grads: BTreeMap<ParamId, GradBuf<T>>,
}

impl<T: Real> ParamGrads<T> {
    pub fn new() -> Self {
        ParamGrads {
            grads: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&GradBuf<T>> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &GradBuf<T>)> {
        self.grads.iter().map(|(id, g)| (*id, g))
    }

    pub fn add_dense(&mut self, id: ParamId, grad: &Tensor<T>) {
        self.merge_buf(id, GradBuf::Dense(grad.clone()));
    }

    pub fn add_row(&mut self, id: ParamId, cols: usize, row: usize, grad: &[T]) {
        match self.grads.get_mut(&id) {
            Some(GradBuf::Rows { rows, .. }) => add_row(rows, row, grad),
            Some(dense @ GradBuf::Dense(_)) => {
                let mut rows = BTreeMap::new();
                rows.insert(row, grad.to_vec());
                dense.add(&GradBuf::Rows { cols, rows });
            }
            None => {
                let mut rows = BTreeMap::new();
                rows.insert(row, grad.to_vec());
                self.grads.insert(id, GradBuf::Rows { cols, rows });
            }
        }
    }

    fn merge_buf(&mut self, id: ParamId, buf: GradBuf<T>) {
        match self.grads.get_mut(&id) {
            Some(existing) => existing.add(&buf),
            None => {
                self.grads.insert(id, buf);
            }
        }
    }

    /// Accumulates `other` into `self` (summation).
    pub fn accumulate(&mut self, other: &ParamGrads<T>) {
        for (id, g) in &other.grads {
            match self.grads.get_mut(id) {
                Some(existing) => existing.add(g),
                None => {
                    self.grads.insert(*id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, c: T) {
        for g in self.grads.values_mut() {
            g.scale(c);
        }
    }

    /// Flat gradient for `id` with the parameter's full size, zero where untouched.
    pub fn dense(&self, id: ParamId, len: usize) -> Vec<T> {
        match self.grads.get(&id) {
            None => vec![T::zero(); len],
            Some(g) => (0..len).map(|i| g.at(i)).collect(),
        }
    }

    /// Name of the first parameter with a non-finite gradient, if any.
    pub fn first_non_finite<'a>(&self, params: &'a ParameterSet<T>) -> Option<&'a str> {
        self.grads
            .iter()
            .find(|(_, g)| !g.all_finite())
            .map(|(id, _)| params.get(*id).name.as_str())
    }
}
