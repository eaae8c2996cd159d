//! Exact arithmetic on elements of the Baumslag-Solitar group
//! `BS(m,n) = <b, t | t b^m t^-1 = b^n>`.
//!
//! Elements are represented by their Britton normal form
//! `b^{n_1} t^{e_1} b^{n_2} ... t^{e_r} b^{n_{r+1}}` where the exponent
//! following `t` lies in `[0, |m|-1]`, the exponent following `t^-1` lies in
//! `[0, |n|-1]`, and no factor `t^e b^0 t^-e` occurs. With these conventions
//! the normal form of a group element is unique, so structural equality of
//! [`NormalForm`] values is equality in the group.
//!
//! Exponents are arbitrary-precision: pushing a power of `b` through a `t`
//! multiplies it by `n/m` (or `m/n`), so exponents grow geometrically along
//! long words and fixed-width integers would overflow silently.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Group parameters `(m, n)` with the standing hypothesis `|m|, |n| >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Params {
    m: i64,
    n: i64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("BadParams: |m| and |n| must both be at least 2, got m={m}, n={n}")]
    BadParams { m: i64, n: i64 },
    #[error("ParseError: {0}")]
    Parse(String),
}

impl Params {
    pub fn new(m: i64, n: i64) -> Result<Self, WordError> {
        if m.unsigned_abs() < 2 || n.unsigned_abs() < 2 {
            return Err(WordError::BadParams { m, n });
        }
        Ok(Params { m, n })
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn abs_m(&self) -> u64 {
        self.m.unsigned_abs()
    }

    pub fn abs_n(&self) -> u64 {
        self.n.unsigned_abs()
    }
}

/// One of the four standard generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    /// `b`
    B,
    /// `b^-1`
    BInv,
    /// `t`
    T,
    /// `t^-1`
    TInv,
}

impl Letter {
    pub fn inverse(self) -> Letter {
        match self {
            Letter::B => Letter::BInv,
            Letter::BInv => Letter::B,
            Letter::T => Letter::TInv,
            Letter::TInv => Letter::T,
        }
    }

    pub fn is_t(self) -> bool {
        matches!(self, Letter::T | Letter::TInv)
    }

    pub const ALL: [Letter; 4] = [Letter::B, Letter::BInv, Letter::T, Letter::TInv];
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Letter::B => 'b',
            Letter::BInv => 'B',
            Letter::T => 't',
            Letter::TInv => 'T',
        };
        write!(f, "{c}")
    }
}

/// A word over the four generators. No reduction is assumed; the empty word
/// is the identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of `t`-letters, in either direction. For a spelled normal form
    /// this is the height of the element.
    pub fn t_count(&self) -> usize {
        self.0.iter().filter(|l| l.is_t()).count()
    }

    /// The formal inverse as a word: reversed sequence of inverted letters.
    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    pub fn push(&mut self, letter: Letter) {
        self.0.push(letter);
    }
}

impl FromIterator<Letter> for Word {
    fn from_iter<I: IntoIterator<Item = Letter>>(iter: I) -> Self {
        Word(iter.into_iter().collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "");
        }
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = WordError;

    /// Parses the text syntax: a string over `b`, `B`, `t`, `T` (uppercase
    /// meaning inverse), with an optional exponent suffix `^k` where `k` may
    /// be negative, e.g. `b^-3` for `BBB`. Whitespace between tokens is
    /// ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut letters = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            if c.is_whitespace() {
                continue;
            }
            let base = match c {
                'b' => Letter::B,
                'B' => Letter::BInv,
                't' => Letter::T,
                'T' => Letter::TInv,
                other => {
                    return Err(WordError::Parse(format!(
                        "unexpected character {other:?} in word"
                    )))
                }
            };
            let mut exp: i64 = 1;
            if chars.peek() == Some(&'^') {
                chars.next();
                let mut digits = String::new();
                if chars.peek() == Some(&'-') {
                    digits.push('-');
                    chars.next();
                }
                while let Some(d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(*d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                exp = digits
                    .parse::<i64>()
                    .map_err(|_| WordError::Parse(format!("bad exponent {digits:?}")))?;
            }
            let letter = if exp < 0 { base.inverse() } else { base };
            for _ in 0..exp.unsigned_abs() {
                letters.push(letter);
            }
        }
        Ok(Word(letters))
    }
}

/// Sign of a `t`-letter in a normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TSign {
    Pos,
    Neg,
}

impl TSign {
    pub fn opposite(self) -> TSign {
        match self {
            TSign::Pos => TSign::Neg,
            TSign::Neg => TSign::Pos,
        }
    }

    pub fn letter(self) -> Letter {
        match self {
            TSign::Pos => Letter::T,
            TSign::Neg => Letter::TInv,
        }
    }
}

/// One `t^e b^k` block of a normal form. The exponent constraint depends on
/// the sign: `k` in `[0, |m|-1]` after `t`, `k` in `[0, |n|-1]` after `t^-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub sign: TSign,
    pub exp: BigInt,
}

/// The unique Britton normal form of a group element. Values are canonical:
/// two `NormalForm`s built under the same [`Params`] are equal as structs iff
/// they represent the same group element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NormalForm {
    leading: BigInt,
    blocks: Vec<Block>,
}

impl NormalForm {
    pub fn identity() -> Self {
        NormalForm::default()
    }

    pub fn is_identity(&self) -> bool {
        self.leading.is_zero() && self.blocks.is_empty()
    }

    /// `b^k` as a normal form.
    pub fn b_power(k: impl Into<BigInt>) -> Self {
        NormalForm {
            leading: k.into(),
            blocks: Vec::new(),
        }
    }

    pub fn leading(&self) -> &BigInt {
        &self.leading
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Right-multiplies by `b^delta`, restoring the exponent constraints by
    /// carrying multiples of `m` (resp. `n`) leftwards through each `t`
    /// (resp. `t^-1`).
    fn push_b(&mut self, p: &Params, delta: &BigInt) {
        if delta.is_zero() {
            return;
        }
        let Some(last) = self.blocks.len().checked_sub(1) else {
            self.leading += delta;
            return;
        };
        self.blocks[last].exp += delta;
        let mut j = last;
        loop {
            let (modulus, divisor, factor) = match self.blocks[j].sign {
                // t b^{qm+s} = b^{qn} t b^s
                TSign::Pos => (p.abs_m(), p.m(), p.n()),
                // t^-1 b^{qn+s} = b^{qm} t^-1 b^s
                TSign::Neg => (p.abs_n(), p.n(), p.m()),
            };
            let modulus = BigInt::from(modulus);
            let exp = &self.blocks[j].exp;
            if !exp.is_negative() && *exp < modulus {
                break;
            }
            let s = exp.mod_floor(&modulus);
            let q = (exp - &s) / BigInt::from(divisor);
            let carry = q * BigInt::from(factor);
            self.blocks[j].exp = s;
            if j == 0 {
                self.leading += carry;
                break;
            }
            j -= 1;
            self.blocks[j].exp += carry;
        }
    }

    /// Right-multiplies by `t` or `t^-1`. A trailing `t^e b^0` followed by
    /// `t^-e` is a pinch and cancels; otherwise a fresh block is opened.
    fn push_t(&mut self, sign: TSign) {
        if let Some(last) = self.blocks.last() {
            if last.exp.is_zero() && last.sign == sign.opposite() {
                self.blocks.pop();
                return;
            }
        }
        self.blocks.push(Block {
            sign,
            exp: BigInt::zero(),
        });
    }

    fn push_letter(&mut self, p: &Params, letter: Letter) {
        match letter {
            Letter::B => self.push_b(p, &BigInt::from(1)),
            Letter::BInv => self.push_b(p, &BigInt::from(-1)),
            Letter::T => self.push_t(TSign::Pos),
            Letter::TInv => self.push_t(TSign::Neg),
        }
    }

    /// Compact text form, parseable back by the word parser: e.g. `b^6tb`,
    /// or `identity` for the trivial element.
    pub fn display_string(&self) -> String {
        if self.is_identity() {
            return "identity".to_string();
        }
        let mut out = String::new();
        push_b_exp(&mut out, &self.leading);
        for block in &self.blocks {
            out.push(match block.sign {
                TSign::Pos => 't',
                TSign::Neg => 'T',
            });
            push_b_exp(&mut out, &block.exp);
        }
        out
    }
}

fn push_b_exp(out: &mut String, exp: &BigInt) {
    if exp.is_zero() {
        return;
    }
    if *exp == BigInt::from(1) {
        out.push('b');
    } else if *exp == BigInt::from(-1) {
        out.push('B');
    } else {
        out.push_str(&format!("b^{exp}"));
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_string())
    }
}

/// Reduces a word to the normal form of the element it represents. Total and
/// idempotent on spelled normal forms.
pub fn reduce(p: &Params, w: &Word) -> NormalForm {
    let mut nf = NormalForm::identity();
    for &letter in w.letters() {
        nf.push_letter(p, letter);
    }
    nf
}

/// Spells a normal form back as a flat letter sequence
/// `b^{n_1} t^{e_1} b^{n_2} ...`.
///
/// Panics if a `b`-exponent is too large to expand letter by letter.
pub fn spell(nf: &NormalForm) -> Word {
    let mut letters = Vec::new();
    spell_b_run(&mut letters, &nf.leading);
    for block in &nf.blocks {
        letters.push(block.sign.letter());
        spell_b_run(&mut letters, &block.exp);
    }
    Word(letters)
}

fn spell_b_run(letters: &mut Vec<Letter>, exp: &BigInt) {
    let count = exp
        .abs()
        .to_biguint()
        .and_then(|u| u64::try_from(u).ok())
        .filter(|&u| u <= (1 << 32))
        .expect("spell: b-exponent too large to expand into letters");
    let letter = if exp.is_negative() {
        Letter::BInv
    } else {
        Letter::B
    };
    letters.extend(std::iter::repeat(letter).take(count as usize));
}

/// The group law: `reduce(spell(a) . spell(b))`, computed blockwise.
pub fn multiply(p: &Params, a: &NormalForm, b: &NormalForm) -> NormalForm {
    let mut out = a.clone();
    out.push_b(p, &b.leading);
    for block in &b.blocks {
        out.push_t(block.sign);
        out.push_b(p, &block.exp);
    }
    out
}

/// The group inverse: `multiply(a, invert(a))` is the identity.
pub fn invert(p: &Params, a: &NormalForm) -> NormalForm {
    // Reversing b^{n_1} t^{e_1} b^{n_2} ... t^{e_r} b^{n_{r+1}} pairs each
    // inverted t-sign with the exponent on its left.
    let mut out = NormalForm::identity();
    let Some(last) = a.blocks.last() else {
        return NormalForm::b_power(-&a.leading);
    };
    out.push_b(p, &(-&last.exp));
    for i in (0..a.blocks.len()).rev() {
        out.push_t(a.blocks[i].sign.opposite());
        let left_exp = if i == 0 {
            &a.leading
        } else {
            &a.blocks[i - 1].exp
        };
        out.push_b(p, &(-left_exp));
    }
    out
}

/// The height `h(g)`: the number of `t`-blocks of the normal form. This is
/// also the distance moved by `g` from the base vertex of the Bass-Serre
/// tree.
pub fn height(a: &NormalForm) -> usize {
    a.blocks.len()
}

/// All `|w| + 1` prefixes of the letter sequence, in increasing length,
/// starting with the empty word and ending with `w` itself. Subwords are a
/// property of the spelling, not of the group element.
pub fn subwords(w: &Word) -> Vec<Word> {
    (0..=w.len())
        .map(|i| Word(w.letters()[..i].to_vec()))
        .collect()
}
