use crate::autodiff::{GradBuf, ParamGrads, ParameterSet, Real};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments for every parameter, plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

fn densify<T: Real>(grad: Option<&GradBuf<T>>, len: usize) -> Vec<T> {
    match grad {
        None => vec![T::zero(); len],
        Some(GradBuf::Dense(t)) => t.data().to_vec(),
        Some(GradBuf::Rows { cols, rows }) => {
            let mut out = vec![T::zero(); len];
            for (r, vals) in rows {
                out[r * cols..(r + 1) * cols].copy_from_slice(vals);
            }
            out
        }
    }
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParameterSet<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|(_, p)| vec![T::zero(); p.value.len()]).collect();
        AdamState {
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn first_moment(&self, index: usize) -> &[T] {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &[T] {
        &self.v[index]
    }

    /// One bias-corrected update. Parameters without a gradient entry see `g = 0`, so
    /// sparse embedding rows keep decaying their moments like dense ones.
    pub fn step(&mut self, params: &mut ParameterSet<T>, grads: &ParamGrads<T>, lr: f64) -> Result<()> {
        if let Some(name) = grads.first_non_finite(params) {
            return Err(Error::NanGradient { param: name.to_string() });
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let bc1 = T::from_f64(1.0 - self.beta1.powi(t));
        let bc2 = T::from_f64(1.0 - self.beta2.powi(t));
        let lr = T::from_f64(lr);
        let eps = T::from_f64(self.epsilon);

        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let i = id.index();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let g = densify(grads.get(id), m.len());
            let value = params.value_mut(id).data_mut();
            for (j, (theta, &g)) in value.iter_mut().zip(&g).enumerate() {
                m[j] = b1 * m[j] + c1 * g;
                v[j] = b2 * v[j] + c2 * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
