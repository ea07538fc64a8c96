//! Finite alphabets and the mixed-radix encoding used for product alphabets.
//!
//! A product alphabet `A × B × ...` orders its symbols with the first factor
//! as the most significant digit, so the tuple `(a, b)` has index
//! `a * |B| + b`. Every tensor, Kronecker block and parent tuple in the crate
//! follows this convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered list of distinct symbols. A symbol's index is its position.
/// Equality compares symbols only; the name is a display label.
#[derive(Clone, Debug, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    name: String,
    symbols: Vec<String>,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Alphabet {
    pub fn new<S: Into<String>>(name: impl Into<String>, symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet(format!("`{name}` has no symbols")));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidAlphabet(format!("`{name}` contains an empty symbol")));
            }
            if symbols[..i].contains(s) {
                return Err(Error::InvalidAlphabet(format!("`{name}` repeats symbol `{s}`")));
            }
        }
        Ok(Self { name, symbols })
    }

    /// Alphabet with symbols `"0"`, `"1"`, ..., `"n-1"`.
    pub fn numbered(name: impl Into<String>, n: usize) -> Self {
        assert!(n > 0, "alphabet must have at least one symbol");
        Self {
            name: name.into(),
            symbols: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::numbered(name, 2)
    }

    /// The one-symbol alphabet used as the input of source nodes.
    pub fn unit() -> Self {
        Self {
            name: "unit".into(),
            symbols: vec!["*".into()],
        }
    }

    /// Product alphabet, first factor most significant. Symbols are written
    /// `(a,b,...)`. The empty product is [`Alphabet::unit`].
    pub fn product(factors: &[&Alphabet]) -> Self {
        match factors {
            [] => Self::unit(),
            [single] => (*single).clone(),
            _ => {
                let radices: Vec<usize> = factors.iter().map(|a| a.size()).collect();
                let total: usize = radices.iter().product();
                let symbols = (0..total)
                    .map(|code| {
                        let digits = decode(code, &radices);
                        let parts: Vec<&str> = digits.iter().zip(factors).map(|(&d, a)| a.symbols[d].as_str()).collect();
                        format!("({})", parts.join(","))
                    })
                    .collect();
                let name = factors.iter().map(|a| a.name.as_str()).collect::<Vec<_>>().join("x");
                Self { name, symbols }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol {
                alphabet: self.name.clone(),
                symbol: symbol.to_string(),
            })
    }

    fn single_char(&self) -> bool {
        self.symbols.iter().all(|s| s.chars().count() == 1)
    }

    /// Renders a sequence of symbol indices. Single-character alphabets are
    /// concatenated (`"0110"`), others are space separated.
    pub fn format_seq(&self, seq: &[usize]) -> String {
        let parts: Vec<&str> = seq.iter().map(|&i| self.symbols[i].as_str()).collect();
        if self.single_char() {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }

    /// Inverse of [`Alphabet::format_seq`].
    pub fn parse_seq(&self, text: &str) -> Result<Vec<usize>> {
        if self.single_char() {
            text.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| self.index_of(&c.to_string()))
                .collect()
        } else {
            text.split_whitespace().map(|s| self.index_of(s)).collect()
        }
    }
}

/// Mixed-radix index of `digits`, first digit most significant.
pub fn encode(digits: &[usize], radices: &[usize]) -> usize {
    debug_assert_eq!(digits.len(), radices.len());
    digits.iter().zip(radices).fold(0, |acc, (&d, &r)| {
        debug_assert!(d < r);
        acc * r + d
    })
}

/// Inverse of [`encode`].
pub fn decode(mut code: usize, radices: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (slot, &r) in digits.iter_mut().zip(radices).rev() {
        *slot = code % r;
        code /= r;
    }
    digits
}

/// Every sequence of length `len` over an alphabet of size `n`, in
/// lexicographic order.
pub fn all_sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let total = n.checked_pow(len as u32).expect("sequence space overflow");
    let radices = vec![n; len];
    (0..total).map(|code| decode(code, &radices)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(Alphabet::new("a", ["x", "x"]).is_err());
        assert!(Alphabet::new("a", Vec::<String>::new()).is_err());
        assert!(Alphabet::new("a", ["x", ""]).is_err());
    }

    #[test]
    fn product_is_first_factor_major() {
        let a = Alphabet::new("a", ["p", "q"]).unwrap();
        let b = Alphabet::new("b", ["u", "v", "w"]).unwrap();
        let ab = Alphabet::product(&[&a, &b]);
        assert_eq!(ab.size(), 6);
        assert_eq!(ab.symbol(encode(&[1, 0], &[2, 3])), "(q,u)");
        assert_eq!(ab.symbol(2), "(p,w)");
        assert_eq!(Alphabet::product(&[]).size(), 1);
    }

    #[test]
    fn encode_decode_inverse() {
        let radices = [3, 1, 4, 2];
        for code in 0..24 {
            assert_eq!(encode(&decode(code, &radices), &radices), code);
        }
    }

    #[test]
    fn sequence_text_round_trip() {
        let bin = Alphabet::binary("x");
        assert_eq!(bin.parse_seq("0110").unwrap(), vec![0, 1, 1, 0]);
        assert_eq!(bin.format_seq(&[1, 0]), "10");
        let pairs = Alphabet::product(&[&bin, &bin]);
        let text = pairs.format_seq(&[3, 0]);
        assert_eq!(text, "(1,1) (0,0)");
        assert_eq!(pairs.parse_seq(&text).unwrap(), vec![3, 0]);
        assert!(bin.parse_seq("012").is_err());
    }

    #[test]
    fn all_sequences_lexicographic() {
        let seqs = all_sequences(2, 2);
        assert_eq!(seqs, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(all_sequences(3, 0), vec![Vec::<usize>::new()]);
    }
}
