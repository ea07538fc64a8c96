//! Time-varying kernel families and their conversion into a single
//! mechanistically stationary transducer with a time-stamped latent.

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::transducer::{StochasticKernel, Transducer};

/// Kernels `T(t)` for `t = 0..H-1` sharing alphabets and latent size.
#[derive(Clone, Debug)]
pub struct TimeVaryingTransducer {
    pub in_alphabet: Alphabet,
    pub out_alphabet: Alphabet,
    pub latent_alphabet: Alphabet,
    pub kernels: Vec<StochasticKernel>,
    pub prior: Vec<f64>,
}

impl TimeVaryingTransducer {
    pub fn new(
        in_alphabet: Alphabet,
        out_alphabet: Alphabet,
        latent_alphabet: Alphabet,
        kernels: Vec<StochasticKernel>,
        prior: Option<Vec<f64>>,
    ) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::EmptyKernelList);
        }
        let dims = (
            in_alphabet.size(),
            latent_alphabet.size(),
            out_alphabet.size(),
            latent_alphabet.size(),
        );
        if let Some(t) = kernels.iter().position(|k| k.dims() != dims) {
            return Err(Error::AlphabetMismatch(format!(
                "kernel {t} has dims {:?}, expected {dims:?}",
                kernels[t].dims()
            )));
        }
        let nr = latent_alphabet.size();
        let prior = prior.unwrap_or_else(|| vec![1.0 / nr as f64; nr]);
        if prior.len() != nr {
            return Err(Error::InvalidTransducer("prior length does not match latent alphabet".into()));
        }
        Ok(Self {
            in_alphabet,
            out_alphabet,
            latent_alphabet,
            kernels,
            prior,
        })
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    /// `Pr(y_{0:t} | x_{0:t})` applying `T(i)` at step `i`, for `t ≤ H`.
    pub fn sequence_probability(&self, xs: &[usize], ys: &[usize]) -> Result<f64> {
        if xs.len() > self.horizon() || xs.len() != ys.len() {
            return Err(Error::Horizon {
                horizon: xs.len(),
                max: self.horizon(),
            });
        }
        let nr = self.latent_alphabet.size();
        let mut v = self.prior.clone();
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let k = &self.kernels[i];
            let mut next = vec![0.0; nr];
            for (r, &w) in v.iter().enumerate() {
                if w != 0.0 {
                    for (n, &p) in next.iter_mut().zip(k.block(x, r, y)) {
                        *n += w * p;
                    }
                }
            }
            v = next;
        }
        Ok(v.iter().sum())
    }
}

/// Builds a stationary transducer over the latent `R × {0..H}` whose kernel
/// moves `(r, t) → (r', t+1)` with `T(t)`. The final time slot `H` is
/// absorbing and reuses `T(H-1)` so every row stays stochastic; it is never
/// visited within the horizon.
pub fn stationarize(family: &TimeVaryingTransducer) -> Result<Transducer> {
    let h = family.horizon();
    if h == 0 {
        return Err(Error::EmptyKernelList);
    }
    let nr = family.latent_alphabet.size();
    let nx = family.in_alphabet.size();
    let ny = family.out_alphabet.size();
    let slots = h + 1;
    let idx = |r: usize, t: usize| r * slots + t;

    let symbols: Vec<String> = family
        .latent_alphabet
        .symbols()
        .iter()
        .flat_map(|r| (0..slots).map(move |t| format!("{r}@{t}")))
        .collect();
    let latent = Alphabet::new(format!("{}@time", family.latent_alphabet.name()), symbols)?;

    let mut kernel = StochasticKernel::zeros(nx, nr * slots, ny);
    for t in 0..slots {
        let (source, next_t) = if t < h {
            (&family.kernels[t], t + 1)
        } else {
            (&family.kernels[h - 1], h)
        };
        for x in 0..nx {
            for r in 0..nr {
                for y in 0..ny {
                    for (rn, &p) in source.block(x, r, y).iter().enumerate() {
                        kernel.set(x, idx(r, t), y, idx(rn, next_t), p);
                    }
                }
            }
        }
    }

    let mut prior = vec![0.0; nr * slots];
    for (r, &p) in family.prior.iter().enumerate() {
        prior[idx(r, 0)] = p;
    }
    Transducer::new(
        family.in_alphabet.clone(),
        family.out_alphabet.clone(),
        latent,
        kernel,
        Some(prior),
    )
}
