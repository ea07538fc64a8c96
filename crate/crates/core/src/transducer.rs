//! Stochastic transducers: alphabets, the four-index kernel, validation and
//! the linear-operator view.
//!
//! The kernel entry `T[x][r][y][r']` is `Pr(Y_t = y, R_{t+1} = r' | X_t = x, R_t = r)`
//! and is stored row-major in exactly that order.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::DEFAULT_TOL;

/// Dense kernel tensor with dimensions `(|X|, |R|, |Y|, |R|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticKernel {
    n_in: usize,
    n_latent: usize,
    n_out: usize,
    entries: Vec<f64>,
}

impl StochasticKernel {
    pub fn zeros(n_in: usize, n_latent: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_latent,
            n_out,
            entries: vec![0.0; n_in * n_latent * n_out * n_latent],
        }
    }

    pub fn from_entries(n_in: usize, n_latent: usize, n_out: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = n_in * n_latent * n_out * n_latent;
        if entries.len() != expected {
            return Err(Error::InvalidTransducer(format!(
                "kernel has {} entries, expected {expected}",
                entries.len()
            )));
        }
        Ok(Self {
            n_in,
            n_latent,
            n_out,
            entries,
        })
    }

    /// Builds a kernel from the nested `[x][r][y][r']` layout.
    pub fn from_nested(nested: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let n_in = nested.len();
        let n_latent = nested.first().map_or(0, Vec::len);
        let n_out = nested.first().and_then(|a| a.first()).map_or(0, Vec::len);
        if n_in == 0 || n_latent == 0 || n_out == 0 {
            return Err(Error::InvalidTransducer("kernel has an empty dimension".into()));
        }
        let mut entries = Vec::with_capacity(n_in * n_latent * n_out * n_latent);
        for (x, by_r) in nested.iter().enumerate() {
            if by_r.len() != n_latent {
                return Err(Error::InvalidTransducer(format!("kernel[{x}] is ragged")));
            }
            for (r, by_y) in by_r.iter().enumerate() {
                if by_y.len() != n_out {
                    return Err(Error::InvalidTransducer(format!("kernel[{x}][{r}] is ragged")));
                }
                for (y, row) in by_y.iter().enumerate() {
                    if row.len() != n_latent {
                        return Err(Error::InvalidTransducer(format!("kernel[{x}][{r}][{y}] is ragged")));
                    }
                    entries.extend_from_slice(row);
                }
            }
        }
        Self::from_entries(n_in, n_latent, n_out, entries)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.n_in)
            .map(|x| {
                (0..self.n_latent)
                    .map(|r| (0..self.n_out).map(|y| self.block(x, r, y).to_vec()).collect())
                    .collect()
            })
            .collect()
    }

    /// `(|X|, |R|, |Y|, |R'|)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n_in, self.n_latent, self.n_out, self.n_latent)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_latent(&self) -> usize {
        self.n_latent
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    #[inline]
    fn offset(&self, x: usize, r: usize, y: usize) -> usize {
        ((x * self.n_latent + r) * self.n_out + y) * self.n_latent
    }

    #[inline]
    pub fn get(&self, x: usize, r: usize, y: usize, next: usize) -> f64 {
        self.entries[self.offset(x, r, y) + next]
    }

    #[inline]
    pub fn set(&mut self, x: usize, r: usize, y: usize, next: usize, p: f64) {
        let o = self.offset(x, r, y);
        self.entries[o + next] = p;
    }

    /// Probabilities over `r'` for fixed `(x, r, y)`.
    #[inline]
    pub fn block(&self, x: usize, r: usize, y: usize) -> &[f64] {
        let o = self.offset(x, r, y);
        &self.entries[o..o + self.n_latent]
    }

    /// The `(y, r')` distribution for fixed `(x, r)`, flattened `y`-major.
    #[inline]
    pub fn row(&self, x: usize, r: usize) -> &[f64] {
        let o = self.offset(x, r, 0);
        &self.entries[o..o + self.n_out * self.n_latent]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }
}

/// A single problem found by [`validate_transducer`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowSum {
        x: usize,
        r: usize,
        sum: f64,
        residual: f64,
    },
    Negative {
        x: usize,
        r: usize,
        y: usize,
        next: usize,
        value: f64,
    },
    NotFinite {
        x: usize,
        r: usize,
        y: usize,
        next: usize,
    },
    PriorSum {
        sum: f64,
        residual: f64,
    },
    PriorNegative {
        r: usize,
        value: f64,
    },
}

/// A transducer `(X, Y, R, T)` together with the prior over `R_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transducer {
    in_alphabet: Alphabet,
    out_alphabet: Alphabet,
    latent_alphabet: Alphabet,
    kernel: StochasticKernel,
    prior: Vec<f64>,
}

impl Transducer {
    /// Checks dimensions only; probability rules are reported by
    /// [`validate_transducer`]. A missing prior defaults to uniform.
    pub fn new(
        in_alphabet: Alphabet,
        out_alphabet: Alphabet,
        latent_alphabet: Alphabet,
        kernel: StochasticKernel,
        prior: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (nx, nr, ny, _) = kernel.dims();
        if nx != in_alphabet.size() || ny != out_alphabet.size() || nr != latent_alphabet.size() {
            return Err(Error::InvalidTransducer(format!(
                "kernel dims ({nx}, {nr}, {ny}, {nr}) do not match alphabets ({}, {}, {}, {})",
                in_alphabet.size(),
                latent_alphabet.size(),
                out_alphabet.size(),
                latent_alphabet.size()
            )));
        }
        let prior = prior.unwrap_or_else(|| vec![1.0 / nr as f64; nr]);
        if prior.len() != nr {
            return Err(Error::InvalidTransducer(format!(
                "prior has {} entries, latent alphabet has {nr}",
                prior.len()
            )));
        }
        Ok(Self {
            in_alphabet,
            out_alphabet,
            latent_alphabet,
            kernel,
            prior,
        })
    }

    /// Like [`Transducer::new`] but also rejects kernels that fail validation.
    pub fn checked(
        in_alphabet: Alphabet,
        out_alphabet: Alphabet,
        latent_alphabet: Alphabet,
        kernel: StochasticKernel,
        prior: Option<Vec<f64>>,
    ) -> Result<Self> {
        let t = Self::new(in_alphabet, out_alphabet, latent_alphabet, kernel, prior)?;
        t.ensure_valid()?;
        Ok(t)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        match validate_transducer(self).first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidTransducer(format!("{v:?}"))),
        }
    }

    /// Memoryless transducer from a channel `channel[x][y]`.
    pub fn memoryless(in_alphabet: Alphabet, out_alphabet: Alphabet, channel: &[Vec<f64>]) -> Result<Self> {
        let nx = in_alphabet.size();
        let ny = out_alphabet.size();
        if channel.len() != nx || channel.iter().any(|row| row.len() != ny) {
            return Err(Error::InvalidTransducer("channel shape does not match alphabets".into()));
        }
        let mut kernel = StochasticKernel::zeros(nx, 1, ny);
        for (x, row) in channel.iter().enumerate() {
            for (y, &p) in row.iter().enumerate() {
                kernel.set(x, 0, y, 0, p);
            }
        }
        Self::new(in_alphabet, out_alphabet, Alphabet::unit().with_name("latent"), kernel, None)
    }

    pub fn in_alphabet(&self) -> &Alphabet {
        &self.in_alphabet
    }

    pub fn out_alphabet(&self) -> &Alphabet {
        &self.out_alphabet
    }

    pub fn latent_alphabet(&self) -> &Alphabet {
        &self.latent_alphabet
    }

    pub fn kernel(&self) -> &StochasticKernel {
        &self.kernel
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn n_in(&self) -> usize {
        self.kernel.n_in
    }

    pub fn n_out(&self) -> usize {
        self.kernel.n_out
    }

    pub fn n_latent(&self) -> usize {
        self.kernel.n_latent
    }

    pub fn with_prior(mut self, prior: Vec<f64>) -> Result<Self> {
        if prior.len() != self.n_latent() {
            return Err(Error::InvalidTransducer("prior length does not match latent alphabet".into()));
        }
        self.prior = prior;
        Ok(self)
    }

    /// Point-mass prior on latent state `r`.
    pub fn starting_in(self, r: usize) -> Result<Self> {
        let mut prior = vec![0.0; self.n_latent()];
        *prior
            .get_mut(r)
            .ok_or_else(|| Error::InvalidTransducer(format!("latent state {r} out of range")))? = 1.0;
        self.with_prior(prior)
    }

    /// One operator application `v ↦ T̂^{(y|x)} v`, skipping zero mass.
    pub fn apply(&self, v: &[f64], x: usize, y: usize) -> Vec<f64> {
        let nr = self.n_latent();
        let mut out = vec![0.0; nr];
        for (r, &w) in v.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.kernel.block(x, r, y)) {
                *o += w * p;
            }
        }
        out
    }

    /// True when every `(x, r)` row is identical across `x`.
    pub fn is_input_agnostic(&self, tol: f64) -> bool {
        (1..self.n_in()).all(|x| {
            (0..self.n_latent()).all(|r| {
                self.kernel
                    .row(x, r)
                    .iter()
                    .zip(self.kernel.row(0, r))
                    .all(|(a, b)| (a - b).abs() <= tol)
            })
        })
    }
}

/// Reports every kernel and prior entry that breaks the probability rules.
/// An empty list means the transducer is valid.
pub fn validate_transducer(t: &Transducer) -> Vec<Violation> {
    validate_with_tol(t, DEFAULT_TOL)
}

pub fn validate_with_tol(t: &Transducer, tol: f64) -> Vec<Violation> {
    let k = &t.kernel;
    let mut out = Vec::new();
    for x in 0..k.n_in {
        for r in 0..k.n_latent {
            let mut sum = 0.0;
            for y in 0..k.n_out {
                for (next, &p) in k.block(x, r, y).iter().enumerate() {
                    if !p.is_finite() {
                        out.push(Violation::NotFinite { x, r, y, next });
                    } else if p < 0.0 {
                        out.push(Violation::Negative { x, r, y, next, value: p });
                    }
                    sum += p;
                }
            }
            let residual = 1.0 - sum;
            if sum.is_finite() && residual.abs() > tol {
                out.push(Violation::RowSum { x, r, sum, residual });
            }
        }
    }
    let mut prior_sum = 0.0;
    for (r, &p) in t.prior.iter().enumerate() {
        if p < 0.0 || !p.is_finite() {
            out.push(Violation::PriorNegative { r, value: p });
        }
        prior_sum += p;
    }
    if (1.0 - prior_sum).abs() > tol {
        out.push(Violation::PriorSum {
            sum: prior_sum,
            residual: 1.0 - prior_sum,
        });
    }
    out
}

/// The operator view: one `|R| × |R|` matrix per `(x, y)` with entry
/// `(r', r) = T[x][r][y][r']`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelOperator {
    n_in: usize,
    n_out: usize,
    matrices: Vec<Array2<f64>>,
}

impl KernelOperator {
    pub fn from_transducer(t: &Transducer) -> Self {
        let (nx, ny) = (t.n_in(), t.n_out());
        let matrices = (0..nx)
            .flat_map(|x| (0..ny).map(move |y| (x, y)))
            .map(|(x, y)| operator_matrix(t.kernel(), x, y))
            .collect();
        Self {
            n_in: nx,
            n_out: ny,
            matrices,
        }
    }

    pub fn matrix(&self, x: usize, y: usize) -> &Array2<f64> {
        &self.matrices[x * self.n_out + y]
    }

    /// Reassembles the kernel tensor.
    pub fn to_kernel(&self) -> StochasticKernel {
        let nr = self.matrices[0].nrows();
        let mut k = StochasticKernel::zeros(self.n_in, nr, self.n_out);
        for x in 0..self.n_in {
            for y in 0..self.n_out {
                let m = self.matrix(x, y);
                for r in 0..nr {
                    for next in 0..nr {
                        k.set(x, r, y, next, m[[next, r]]);
                    }
                }
            }
        }
        k
    }

    /// `⟨1| Π_t T̂^{(y_t|x_t)} |ρ⟩`, multiplying operators in time order.
    pub fn sequence_probability(&self, prior: &[f64], xs: &[usize], ys: &[usize]) -> f64 {
        let mut v = Array1::from(prior.to_vec());
        for (&x, &y) in xs.iter().zip(ys) {
            v = self.matrix(x, y).dot(&v);
        }
        v.sum()
    }
}

fn operator_matrix(k: &StochasticKernel, x: usize, y: usize) -> Array2<f64> {
    let nr = k.n_latent();
    Array2::from_shape_fn((nr, nr), |(next, r)| k.get(x, r, y, next))
}

/// `|r⟩`: the basis column vector for latent state `r`.
pub fn basis(n: usize, r: usize) -> Array1<f64> {
    let mut v = Array1::zeros(n);
    v[r] = 1.0;
    v
}

/// `|1⟩`: the all-ones vector.
pub fn ones(n: usize) -> Array1<f64> {
    Array1::ones(n)
}

/// `|ρ_{R0}⟩`: the prior as a column vector.
pub fn prior_vector(t: &Transducer) -> Array1<f64> {
    Array1::from(t.prior().to_vec())
}

/// Operator matrix for the symbol pair `(x, y)` given by name.
pub fn kernel_operator(t: &Transducer, x: &str, y: &str) -> Result<Array2<f64>> {
    let xi = t.in_alphabet().index_of(x)?;
    let yi = t.out_alphabet().index_of(y)?;
    Ok(operator_matrix(t.kernel(), xi, yi))
}

/// Wire format: `{"in", "out", "latent", "prior", "kernel": [x][r][y][r']}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransducerJson {
    #[serde(rename = "in")]
    pub input: Vec<String>,
    pub out: Vec<String>,
    pub latent: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    pub kernel: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<&Transducer> for TransducerJson {
    fn from(t: &Transducer) -> Self {
        Self {
            input: t.in_alphabet.symbols().to_vec(),
            out: t.out_alphabet.symbols().to_vec(),
            latent: t.latent_alphabet.symbols().to_vec(),
            prior: Some(t.prior.clone()),
            kernel: t.kernel.to_nested(),
        }
    }
}

impl TryFrom<TransducerJson> for Transducer {
    type Error = Error;

    fn try_from(j: TransducerJson) -> Result<Self> {
        Transducer::new(
            Alphabet::new("in", j.input)?,
            Alphabet::new("out", j.out)?,
            Alphabet::new("latent", j.latent)?,
            StochasticKernel::from_nested(&j.kernel)?,
            j.prior,
        )
    }
}

impl Serialize for Transducer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransducerJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Transducer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TransducerJson::deserialize(d)?;
        Transducer::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identity_is_valid() {
        assert!(validate_transducer(&fixtures::identity(2)).is_empty());
    }

    #[test]
    fn short_row_reports_residual() {
        let mut t = fixtures::identity(2);
        t.kernel.set(0, 0, 0, 0, 0.9);
        let v = validate_transducer(&t);
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::RowSum { x, r, residual, .. } => {
                assert_eq!((*x, *r), (0, 0));
                assert!((residual - 0.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_entry_reported() {
        let mut t = fixtures::identity(2);
        // keep the row sum at one so only the sign rule fires
        t.kernel.set(1, 0, 0, 0, -0.1);
        t.kernel.set(1, 0, 1, 0, 1.1);
        let v = validate_transducer(&t);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Negative { value, .. } if value == -0.1));
    }

    #[test]
    fn bad_prior_reported() {
        let t = fixtures::identity(2).with_prior(vec![0.5]).unwrap();
        assert!(matches!(validate_transducer(&t)[0], Violation::PriorSum { .. }));
    }

    #[test]
    fn dims_must_match() {
        let k = StochasticKernel::zeros(2, 1, 2);
        let err = Transducer::new(Alphabet::binary("x"), Alphabet::numbered("y", 3), Alphabet::unit(), k, None);
        assert!(err.is_err());
    }

    #[test]
    fn operator_of_identity() {
        let t = fixtures::identity(2);
        assert_eq!(kernel_operator(&t, "0", "0").unwrap()[[0, 0]], 1.0);
        assert_eq!(kernel_operator(&t, "0", "1").unwrap()[[0, 0]], 0.0);
        assert!(matches!(kernel_operator(&t, "2", "0"), Err(Error::UnknownSymbol { .. })));
    }

    #[test]
    fn operator_of_delayed_copy() {
        // latent holds the previous input and is emitted as the output
        let t = fixtures::delayed_copy(None);
        let m = kernel_operator(&t, "1", "0").unwrap();
        for next in 0..2 {
            for r in 0..2 {
                let expected = if (next, r) == (1, 0) { 1.0 } else { 0.0 };
                assert_eq!(m[[next, r]], expected, "entry ({next}, {r})");
            }
        }
    }

    #[test]
    fn bra_ket_helpers() {
        let t = fixtures::delayed_copy(None);
        let ops = KernelOperator::from_transducer(&t);
        let v = ops.matrix(1, 0).dot(&basis(2, 0));
        assert_eq!(v, basis(2, 1));
        assert_eq!(ones(2).dot(&prior_vector(&t)), 1.0);
    }

    #[test]
    fn json_shape() {
        let t = fixtures::identity(2);
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["in"], serde_json::json!(["0", "1"]));
        assert_eq!(v["kernel"][1][0][1][0], serde_json::json!(1.0));
        let back: Transducer = serde_json::from_value(v).unwrap();
        assert_eq!(back.kernel(), t.kernel());
    }
}
