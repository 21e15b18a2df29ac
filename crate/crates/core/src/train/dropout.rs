use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// How a forward pass runs. Dropout is only active while training.
pub enum Phase<'a> {
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
    Inference,
}

impl Phase<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Phase::Train { .. })
    }
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} must be in [0, 1)")));
    }
    Ok(())
}

/// Inverted dropout: while training, zeroes each entry with probability `rate` and
/// scales survivors by `1 / (1 − rate)`. Identity at inference or when `rate` is 0.
pub fn apply_dropout<T: Real>(tape: &mut Tape<T>, x: Var, phase: &mut Phase<'_>) -> Result<Var> {
    let Phase::Train { dropout, rng } = phase else {
        return Ok(x);
    };
    let rate = *dropout;
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(x);
    }
    let (rows, cols) = tape.shape(x);
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask = Tensor::from_fn(rows, cols, |_, _| {
        if rng.gen::<f64>() < rate {
            T::zero()
        } else {
            keep
        }
    });
    let mask = tape.constant(mask);
    tape.mul(x, mask)
}
