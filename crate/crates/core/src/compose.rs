//! Pairwise composition of transducers, the restricted special cases, and
//! embeddings of the classical serial and cascade products.
//!
//! `compose_pair(T, U)` has latent `R × S` (index `r * |S| + s`) and output
//! `Y × Z` (index `y * |Z| + z`), so its operator for `(x, (y, z))` is the
//! Kronecker product `T̂^{(y|x)} ⊗ Û^{(z|xy)}` in that factor order.

use ndarray::linalg::kron;
use ndarray::Array2;
use rayon::prelude::*;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::transducer::{kernel_operator, StochasticKernel, Transducer};
use crate::DEFAULT_TOL;

fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&p| b.iter().map(move |&q| p * q)).collect()
}

/// General composition: `U` reads both the input and the output of `T`.
/// `U`'s input alphabet must have `|X|·|Y|` symbols, ordered `x`-major.
pub fn compose_pair(t: &Transducer, u: &Transducer) -> Result<Transducer> {
    let (nx, ny, nr) = (t.n_in(), t.n_out(), t.n_latent());
    let (nz, ns) = (u.n_out(), u.n_latent());
    if u.n_in() != nx * ny {
        return Err(Error::AlphabetMismatch(format!(
            "second transducer reads {} symbols, expected |X|·|Y| = {}",
            u.n_in(),
            nx * ny
        )));
    }
    let nl = nr * ns;
    let no = ny * nz;
    let mut kernel = StochasticKernel::zeros(nx, nl, no);
    let block_len = nl * no * nl;
    let tk = t.kernel();
    let uk = u.kernel();
    kernel
        .entries_mut()
        .par_chunks_mut(block_len)
        .enumerate()
        .for_each(|(x, block)| {
            for r in 0..nr {
                for s in 0..ns {
                    let src = r * ns + s;
                    for y in 0..ny {
                        let xy = x * ny + y;
                        for z in 0..nz {
                            let out = y * nz + z;
                            let base = (src * no + out) * nl;
                            let t_row = tk.block(x, r, y);
                            let u_row = uk.block(xy, s, z);
                            for (rn, &tp) in t_row.iter().enumerate() {
                                if tp == 0.0 {
                                    continue;
                                }
                                for (sn, &up) in u_row.iter().enumerate() {
                                    block[base + rn * ns + sn] = tp * up;
                                }
                            }
                        }
                    }
                }
            }
        });
    Transducer::new(
        t.in_alphabet().clone(),
        Alphabet::product(&[t.out_alphabet(), u.out_alphabet()]),
        Alphabet::product(&[t.latent_alphabet(), u.latent_alphabet()]),
        kernel,
        Some(kron_vec(t.prior(), u.prior())),
    )
}

/// `T̂^{(y|x)} ⊗ Û^{(z|xy)}` computed directly from the operator views.
pub fn composite_operator(t: &Transducer, u: &Transducer, x: usize, y: usize, z: usize) -> Result<Array2<f64>> {
    let ny = t.n_out();
    let xy = u.in_alphabet().symbol(x * ny + y).to_string();
    let a = kernel_operator(t, t.in_alphabet().symbol(x), t.out_alphabet().symbol(y))?;
    let b = kernel_operator(u, &xy, u.out_alphabet().symbol(z))?;
    Ok(kron(&a, &b))
}

/// Rewrites `u` so that it reads `(first, second)` pairs. `keep_first`
/// selects which coordinate of the pair is forwarded to `u`.
fn lift(u: &Transducer, first: &Alphabet, second: &Alphabet, keep_first: bool) -> Result<Transducer> {
    let (n1, n2) = (first.size(), second.size());
    let expected = if keep_first { n1 } else { n2 };
    if u.n_in() != expected {
        return Err(Error::AlphabetMismatch(format!(
            "transducer reads {} symbols, expected {expected}",
            u.n_in()
        )));
    }
    let (nr, nz) = (u.n_latent(), u.n_out());
    let mut kernel = StochasticKernel::zeros(n1 * n2, nr, nz);
    for a in 0..n1 {
        for b in 0..n2 {
            let src = if keep_first { a } else { b };
            for r in 0..nr {
                for z in 0..nz {
                    for (rn, &p) in u.kernel().block(src, r, z).iter().enumerate() {
                        kernel.set(a * n2 + b, r, z, rn, p);
                    }
                }
            }
        }
    }
    Transducer::new(
        Alphabet::product(&[first, second]),
        u.out_alphabet().clone(),
        u.latent_alphabet().clone(),
        kernel,
        Some(u.prior().to_vec()),
    )
}

/// Gives an input-agnostic transducer (typically a source with the unit
/// input) the input alphabet `inputs`, ignoring the symbol read.
pub fn with_ignored_input(t: &Transducer, inputs: &Alphabet) -> Result<Transducer> {
    if !t.is_input_agnostic(DEFAULT_TOL) {
        return Err(Error::Precondition("transducer depends on its input".into()));
    }
    let (nr, ny) = (t.n_latent(), t.n_out());
    let mut kernel = StochasticKernel::zeros(inputs.size(), nr, ny);
    for x in 0..inputs.size() {
        for r in 0..nr {
            for y in 0..ny {
                for (rn, &p) in t.kernel().block(0, r, y).iter().enumerate() {
                    kernel.set(x, r, y, rn, p);
                }
            }
        }
    }
    Transducer::new(
        inputs.clone(),
        t.out_alphabet().clone(),
        t.latent_alphabet().clone(),
        kernel,
        Some(t.prior().to_vec()),
    )
}

/// Series: `u` reads only `T`'s output. Both `Y` and `Z` are emitted.
pub fn compose_series(t: &Transducer, u: &Transducer) -> Result<Transducer> {
    if u.n_in() != t.n_out() {
        return Err(Error::AlphabetMismatch("series: second input must equal first output".into()));
    }
    compose_pair(t, &lift(u, t.in_alphabet(), t.out_alphabet(), false)?)
}

/// Parallel: `u` reads only the shared input `X`.
pub fn compose_parallel(t: &Transducer, u: &Transducer) -> Result<Transducer> {
    if u.n_in() != t.n_in() {
        return Err(Error::AlphabetMismatch("parallel: both transducers must read X".into()));
    }
    compose_pair(t, &lift(u, t.in_alphabet(), t.out_alphabet(), true)?)
}

/// Convergent: `t` ignores its input, `u` reads `(X, Y)`.
pub fn compose_convergent(t: &Transducer, u: &Transducer) -> Result<Transducer> {
    if !t.is_input_agnostic(DEFAULT_TOL) {
        return Err(Error::Precondition(
            "convergent: first transducer must be input-agnostic".into(),
        ));
    }
    compose_pair(t, u)
}

/// Classical serial product: `V^{(z|x)}_{rs→r's'} = Σ_y T^{(y|x)}_{r→r'} U^{(z|y)}_{s→s'}`.
pub fn embed_serial_marginalized(t: &Transducer, u: &Transducer) -> Result<Transducer> {
    if u.n_in() != t.n_out() {
        return Err(Error::AlphabetMismatch("serial: second input must equal first output".into()));
    }
    let (nx, ny, nr) = (t.n_in(), t.n_out(), t.n_latent());
    let (nz, ns) = (u.n_out(), u.n_latent());
    let mut kernel = StochasticKernel::zeros(nx, nr * ns, nz);
    for x in 0..nx {
        for r in 0..nr {
            for s in 0..ns {
                for z in 0..nz {
                    for y in 0..ny {
                        let t_row = t.kernel().block(x, r, y);
                        let u_row = u.kernel().block(y, s, z);
                        for (rn, &tp) in t_row.iter().enumerate() {
                            if tp == 0.0 {
                                continue;
                            }
                            for (sn, &up) in u_row.iter().enumerate() {
                                let next = rn * ns + sn;
                                let cur = kernel.get(x, r * ns + s, z, next);
                                kernel.set(x, r * ns + s, z, next, cur + tp * up);
                            }
                        }
                    }
                }
            }
        }
    }
    Transducer::new(
        t.in_alphabet().clone(),
        u.out_alphabet().clone(),
        Alphabet::product(&[t.latent_alphabet(), u.latent_alphabet()]),
        kernel,
        Some(kron_vec(t.prior(), u.prior())),
    )
}

/// Cascade product. `t` must emit its current latent (`Y = R` and
/// `T^{(y|x)}_{r→r'} = 0` unless `y = r`); `u` reads `(x, r)`.
pub fn embed_cascade(t: &Transducer, u: &Transducer) -> Result<Transducer> {
    let (nx, ny, nr) = (t.n_in(), t.n_out(), t.n_latent());
    if ny != nr {
        return Err(Error::Precondition(
            "cascade: output alphabet must equal latent alphabet".into(),
        ));
    }
    for x in 0..nx {
        for r in 0..nr {
            for y in (0..ny).filter(|&y| y != r) {
                if t.kernel().block(x, r, y).iter().any(|&p| p != 0.0) {
                    return Err(Error::Precondition(format!(
                        "cascade: first transducer emits {y} from latent {r} on input {x}"
                    )));
                }
            }
        }
    }
    if u.n_in() != nx * nr {
        return Err(Error::AlphabetMismatch("cascade: second input must be X × R".into()));
    }
    let (nz, ns) = (u.n_out(), u.n_latent());
    let mut kernel = StochasticKernel::zeros(nx, nr * ns, nz);
    for x in 0..nx {
        for r in 0..nr {
            let t_row = t.kernel().block(x, r, r);
            for s in 0..ns {
                for z in 0..nz {
                    let u_row = u.kernel().block(x * nr + r, s, z);
                    for (rn, &tp) in t_row.iter().enumerate() {
                        for (sn, &up) in u_row.iter().enumerate() {
                            kernel.set(x, r * ns + s, z, rn * ns + sn, tp * up);
                        }
                    }
                }
            }
        }
    }
    Transducer::new(
        t.in_alphabet().clone(),
        u.out_alphabet().clone(),
        Alphabet::product(&[t.latent_alphabet(), u.latent_alphabet()]),
        kernel,
        Some(kron_vec(t.prior(), u.prior())),
    )
}

/// Sums a product output `A × B` down to one factor.
pub fn marginalize_output(t: &Transducer, first: &Alphabet, second: &Alphabet, keep_first: bool) -> Result<Transducer> {
    let (na, nb) = (first.size(), second.size());
    if t.n_out() != na * nb {
        return Err(Error::AlphabetMismatch("output is not the declared product".into()));
    }
    let (nx, nr) = (t.n_in(), t.n_latent());
    let kept = if keep_first { first } else { second };
    let mut kernel = StochasticKernel::zeros(nx, nr, kept.size());
    for x in 0..nx {
        for r in 0..nr {
            for a in 0..na {
                for b in 0..nb {
                    let k = if keep_first { a } else { b };
                    for (rn, &p) in t.kernel().block(x, r, a * nb + b).iter().enumerate() {
                        let cur = kernel.get(x, r, k, rn);
                        kernel.set(x, r, k, rn, cur + p);
                    }
                }
            }
        }
    }
    Transducer::new(
        t.in_alphabet().clone(),
        kept.clone(),
        t.latent_alphabet().clone(),
        kernel,
        Some(t.prior().to_vec()),
    )
}
