//! Binary BCH codes and a code-offset fuzzy extractor.
//!
//! Words are stored little-endian as polynomials: bit `i` of a [`Word`] is
//! the coefficient of `x^i`. Encoding is systematic, with the `k` message
//! bits in the top positions `n - k .. n` of the codeword.

use std::fmt::{self, Write as _};

use rand::Rng;

use crate::bits::{bit_word, mask};
use crate::error::{PufError, Result};
use crate::response::Response;
use crate::seed::rng;
use crate::textfmt;

bit_word!(
    /// A message, codeword or offset for a [`BchCode`].
    Word,
    "codeword"
);

/// Primitive polynomials for GF(2^m), m = 3..=7.
const PRIMITIVE: [(u32, u32); 5] = [(3, 0xB), (4, 0x13), (5, 0x25), (6, 0x43), (7, 0x89)];

/// Log/antilog tables for GF(2^m).
#[derive(Clone, Debug)]
struct Field {
    order: usize,
    exp: Vec<u8>,
    log: Vec<u8>,
}

impl Field {
    fn new(m: u32) -> Result<Self> {
        let &(_, poly) = PRIMITIVE
            .iter()
            .find(|(d, _)| *d == m)
            .ok_or_else(|| PufError::Parameter(format!("field degree {m} outside 3..=7")))?;
        let order = (1usize << m) - 1;
        let mut exp = vec![0u8; 2 * order];
        let mut log = vec![0u8; order + 1];
        let mut x = 1u32;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            *slot = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Field { order, exp, log })
    }

    fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    fn inv(&self, a: u8) -> u8 {
        debug_assert!(a != 0);
        self.exp[(self.order - self.log[a as usize] as usize) % self.order]
    }

    /// `alpha^e` for any integer exponent.
    fn pow_alpha(&self, e: i64) -> u8 {
        self.exp[e.rem_euclid(self.order as i64) as usize]
    }

    /// Evaluates a binary polynomial at `alpha^e`.
    fn eval_binary(&self, poly: u128, e: usize) -> u8 {
        let mut acc = 0u8;
        let mut bits = poly;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            acc ^= self.exp[(i * e) % self.order];
            bits &= bits - 1;
        }
        acc
    }
}

fn degree(p: u128) -> u32 {
    127 - p.leading_zeros()
}

fn clmul(a: u128, b: u128) -> u128 {
    let mut out = 0;
    let mut bits = b;
    while bits != 0 {
        out ^= a << bits.trailing_zeros();
        bits &= bits - 1;
    }
    out
}

fn poly_mod(mut a: u128, g: u128) -> u128 {
    let dg = degree(g);
    while a != 0 && degree(a) >= dg {
        a ^= g << (degree(a) - dg);
    }
    a
}

/// Outcome of decoding one received word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decoding {
    Corrected { message: Word, errors: u32 },
    /// More errors than the code can correct were detected.
    Failure,
}

impl Decoding {
    pub fn message(&self) -> Option<Word> {
        match self {
            Decoding::Corrected { message, .. } => Some(*message),
            Decoding::Failure => None,
        }
    }
}

/// A narrow-sense primitive binary BCH code of length `2^m - 1`.
#[derive(Clone, Debug)]
pub struct BchCode {
    m: u32,
    n: usize,
    k: usize,
    t: usize,
    generator: u128,
    field: Field,
}

impl PartialEq for BchCode {
    fn eq(&self, other: &Self) -> bool {
        (self.m, self.t) == (other.m, other.t)
    }
}

impl BchCode {
    /// Code over GF(2^m) correcting `t` errors; the generator is the least
    /// common multiple of the minimal polynomials of `alpha^1 .. alpha^2t`.
    pub fn new(m: u32, t: usize) -> Result<Self> {
        let field = Field::new(m)?;
        let n = field.order;
        if t == 0 {
            return Err(PufError::Parameter("BCH code needs t >= 1".into()));
        }
        let mut seen = vec![false; n];
        let mut generator: u128 = 1;
        for i in 1..=2 * t {
            let i = i % n;
            if seen[i] {
                continue;
            }
            // Minimal polynomial: product of (x - alpha^j) over the cyclotomic coset of i.
            let mut coeffs = vec![1u8];
            let mut j = i;
            loop {
                seen[j] = true;
                let root = field.exp[j];
                let mut next = vec![0u8; coeffs.len() + 1];
                for (d, &c) in coeffs.iter().enumerate() {
                    next[d + 1] ^= c;
                    next[d] ^= field.mul(c, root);
                }
                coeffs = next;
                j = (j * 2) % n;
                if j == i {
                    break;
                }
            }
            let mut min_poly = 0u128;
            for (d, &c) in coeffs.iter().enumerate() {
                debug_assert!(c <= 1, "minimal polynomial must be binary");
                min_poly |= (c as u128) << d;
            }
            if degree(generator) + degree(min_poly) >= n as u32 {
                return Err(PufError::Parameter(format!("t={t} leaves no message bits at n={n}")));
            }
            generator = clmul(generator, min_poly);
        }
        let k = n - degree(generator) as usize;
        Ok(BchCode {
            m,
            n,
            k,
            t,
            generator,
            field,
        })
    }

    /// BCH(127, 64, t = 10), the default key code.
    pub fn default_key_code() -> Self {
        BchCode::new(7, 10).expect("BCH(127,64,10) exists")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn t(&self) -> usize {
        self.t
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    /// Generator polynomial, bit `i` = coefficient of `x^i`.
    pub fn generator(&self) -> u128 {
        self.generator
    }

    fn check(&self, w: &Word, width: usize) -> Result<()> {
        if w.width() != width {
            return Err(PufError::Shape(format!("expected {width} bits, got {}", w.width())));
        }
        Ok(())
    }

    pub fn encode(&self, message: &Word) -> Result<Word> {
        self.check(message, self.k)?;
        let shifted = message.raw() << (self.n - self.k);
        Word::new(self.n, shifted ^ poly_mod(shifted, self.generator))
    }

    pub fn is_codeword(&self, word: &Word) -> bool {
        word.width() == self.n && poly_mod(word.raw(), self.generator) == 0
    }

    pub fn message_of(&self, codeword: &Word) -> Result<Word> {
        self.check(codeword, self.n)?;
        Word::new(self.k, codeword.raw() >> (self.n - self.k))
    }

    /// Syndromes, Berlekamp-Massey, Chien search. Every outcome that does
    /// not land on a codeword within distance `t` is reported as
    /// [`Decoding::Failure`].
    pub fn decode(&self, received: &Word) -> Result<Decoding> {
        self.check(received, self.n)?;
        let f = &self.field;
        let r = received.raw();
        let syndromes: Vec<u8> = (1..=2 * self.t).map(|j| f.eval_binary(r, j)).collect();
        if syndromes.iter().all(|&s| s == 0) {
            return Ok(Decoding::Corrected {
                message: self.message_of(received)?,
                errors: 0,
            });
        }

        let mut lambda = vec![0u8; 2 * self.t + 1];
        let mut prev = lambda.clone();
        lambda[0] = 1;
        prev[0] = 1;
        let (mut len, mut shift, mut prev_disc) = (0usize, 1usize, 1u8);
        for step in 0..2 * self.t {
            let mut disc = syndromes[step];
            for i in 1..=len {
                disc ^= f.mul(lambda[i], syndromes[step - i]);
            }
            if disc == 0 {
                shift += 1;
                continue;
            }
            let scale = f.mul(disc, f.inv(prev_disc));
            let snapshot = lambda.clone();
            for i in 0..lambda.len() - shift {
                lambda[i + shift] ^= f.mul(scale, prev[i]);
            }
            if 2 * len <= step {
                len = step + 1 - len;
                prev = snapshot;
                prev_disc = disc;
                shift = 1;
            } else {
                shift += 1;
            }
        }
        if len > self.t || lambda[len + 1..].iter().any(|&c| c != 0) {
            return Ok(Decoding::Failure);
        }

        let mut error_mask = 0u128;
        let mut roots = 0usize;
        for pos in 0..self.n {
            let x = f.pow_alpha(-(pos as i64));
            let mut acc = 0u8;
            let mut xp = 1u8;
            for &c in &lambda[..=len] {
                acc ^= f.mul(c, xp);
                xp = f.mul(xp, x);
            }
            if acc == 0 {
                error_mask |= 1 << pos;
                roots += 1;
            }
        }
        if roots != len {
            return Ok(Decoding::Failure);
        }
        let corrected = Word::new(self.n, r ^ error_mask)?;
        if !self.is_codeword(&corrected) {
            return Ok(Decoding::Failure);
        }
        Ok(Decoding::Corrected {
            message: self.message_of(&corrected)?,
            errors: roots as u32,
        })
    }
}

impl fmt::Display for BchCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BCH({},{},{})", self.n, self.k, self.t)
    }
}

/// The key recovered by a successful reproduction: the raw `k`-bit message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SecretKey(pub Word);

impl SecretKey {
    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }
}

/// Public helper data: the codeword XOR the first `n` response bits.
#[derive(Clone, Debug, PartialEq)]
pub struct HelperData {
    pub code: BchCode,
    pub offset: Word,
    /// Width of the enrolled response; only bits `0..n` are used.
    pub response_bits: usize,
}

fn response_slice(response: &Response, n: usize) -> Result<Word> {
    if response.width() < n {
        return Err(PufError::Parameter(format!(
            "response has {} bits, code needs {n}",
            response.width()
        )));
    }
    Word::new(n, response.raw() & mask(n))
}

/// Draws a random message from `key_seed` and publishes the code offset.
pub fn enroll(response: &Response, code: &BchCode, key_seed: u64) -> Result<(HelperData, SecretKey)> {
    let slice = response_slice(response, code.n())?;
    let message = Word::new(code.k(), rng(key_seed).random::<u128>() & mask(code.k()))?;
    let codeword = code.encode(&message)?;
    let helper = HelperData {
        code: code.clone(),
        offset: Word::new(code.n(), codeword.raw() ^ slice.raw())?,
        response_bits: response.width(),
    };
    Ok((helper, SecretKey(message)))
}

/// Outcome of one key reproduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reproduction {
    Key { key: SecretKey, corrected: u32 },
    Failure,
}

impl Reproduction {
    pub fn key(&self) -> Option<SecretKey> {
        match self {
            Reproduction::Key { key, .. } => Some(*key),
            Reproduction::Failure => None,
        }
    }
}

pub fn reproduce(noisy: &Response, helper: &HelperData) -> Result<Reproduction> {
    if noisy.width() != helper.response_bits {
        return Err(PufError::Shape(format!(
            "helper expects {}-bit responses, got {}",
            helper.response_bits,
            noisy.width()
        )));
    }
    let slice = response_slice(noisy, helper.code.n())?;
    let received = Word::new(helper.code.n(), slice.raw() ^ helper.offset.raw())?;
    Ok(match helper.code.decode(&received)? {
        Decoding::Corrected { message, errors } => Reproduction::Key {
            key: SecretKey(message),
            corrected: errors,
        },
        Decoding::Failure => Reproduction::Failure,
    })
}

impl HelperData {
    pub fn to_text(&self) -> String {
        let c = &self.code;
        let mut out = String::from("# papuf-helper v1\n");
        let _ = writeln!(out, "n={}", c.n());
        let _ = writeln!(out, "k={}", c.k());
        let _ = writeln!(out, "t={}", c.t());
        let _ = writeln!(out, "generator={:x}", c.generator());
        let _ = writeln!(out, "response_bits={}", self.response_bits);
        let _ = writeln!(out, "offset={}", self.offset.to_hex());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const WHAT: &str = "helper file";
        let kv = textfmt::key_values(text, WHAT)?;
        let n: usize = textfmt::parse_field(&kv, "n", WHAT)?;
        let t: usize = textfmt::parse_field(&kv, "t", WHAT)?;
        if !(n + 1).is_power_of_two() {
            return Err(PufError::format(WHAT, format!("n={n} is not 2^m - 1")));
        }
        let code = BchCode::new((n + 1).trailing_zeros(), t)?;
        let k: usize = textfmt::parse_field(&kv, "k", WHAT)?;
        let generator = u128::from_str_radix(textfmt::field(&kv, "generator", WHAT)?, 16)
            .map_err(|e| PufError::format(WHAT, format!("generator: {e}")))?;
        if k != code.k() || generator != code.generator() {
            return Err(PufError::format(WHAT, format!("parameters do not describe {code}")));
        }
        let response_bits: usize = textfmt::parse_field(&kv, "response_bits", WHAT)?;
        if response_bits < n {
            return Err(PufError::format(WHAT, "response_bits smaller than n"));
        }
        let offset = Word::from_hex(textfmt::field(&kv, "offset", WHAT)?, n)?;
        Ok(HelperData {
            code,
            offset,
            response_bits,
        })
    }
}
