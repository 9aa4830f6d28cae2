//! Butcher tableaus for embedded explicit Runge-Kutta pairs, ingested from
//! plain-text data files.
//!
//! File format: comment lines start with '#'; the first data line is
//! "stages p phat"; then one line per stage i holding c_i followed by the
//! strictly-lower-triangular row a_i0..a_i,i-1; then the order-p weights b
//! and the order-phat weights bhat. Entries are plain decimal strings parsed
//! with `str::parse::<f64>` (correctly rounded, locale-independent).
//!
//! Validation re-reads every entry in double-double arithmetic and checks
//! the row-sum condition c_i = sum_j a_ij and both weight sums against 1
//! at 1e-30. The shipped Verner 9(8) file carries 40 significant digits
//! (see scripts/refine_verner98.py for how they are produced), so any
//! transcription error down to the last digits binary64 or double-double
//! can see is caught at load.

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Row-sum / weight-sum validation threshold; the shipped data is
/// consistent to ~1e-38, double-double resolves ~1e-32, and anything above
/// 1e-30 indicates a corrupted entry.
pub const VALIDATION_TOL: f64 = 1e-30;

#[derive(Clone, Debug)]
pub struct ButcherTableau {
    pub stages: usize,
    /// Order of the propagating weights b.
    pub order: usize,
    /// Order of the embedded weights bhat.
    pub embedded_order: usize,
    /// Coefficients are held in double-double so extended-precision runs
    /// are not limited by binary64 coefficient rounding.
    pub c: Vec<DoubleDouble>,
    /// Strictly lower triangular: `a[i]` has i entries.
    pub a: Vec<Vec<DoubleDouble>>,
    pub b: Vec<DoubleDouble>,
    pub b_hat: Vec<DoubleDouble>,
}

impl ButcherTableau {
    /// Parse and validate a tableau from the text format above.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens_by_line: Vec<(usize, Vec<&str>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            tokens_by_line.push((lineno + 1, line.split_whitespace().collect()));
        }
        if tokens_by_line.is_empty() {
            return Err(Error::Parse("tableau file has no data lines".into()));
        }
        let (header_line, header) = &tokens_by_line[0];
        if header.len() != 3 {
            return Err(Error::Parse(format!(
                "line {header_line}: header must be 'stages p phat'"
            )));
        }
        let parse_usize = |tok: &str, what: &str, line: usize| -> Result<usize> {
            tok.parse()
                .map_err(|_| Error::Parse(format!("line {line}: invalid {what} '{tok}'")))
        };
        let stages = parse_usize(header[0], "stage count", *header_line)?;
        let order = parse_usize(header[1], "order", *header_line)?;
        let embedded_order = parse_usize(header[2], "embedded order", *header_line)?;
        if stages == 0 || stages > 64 {
            return Err(Error::Parse(format!("unreasonable stage count {stages}")));
        }
        if embedded_order + 1 != order {
            return Err(Error::Parse(format!(
                "expected an embedded pair with phat = p - 1, got {order}({embedded_order})"
            )));
        }
        let expected_lines = 1 + stages + 2;
        if tokens_by_line.len() != expected_lines {
            return Err(Error::Parse(format!(
                "expected {expected_lines} data lines for {stages} stages, found {}",
                tokens_by_line.len()
            )));
        }

        let parse_entry = |tok: &str, line: usize| -> Result<DoubleDouble> {
            // Bit-exact decimal parsing; also reject anything str::parse
            // would not accept as a plain decimal.
            let check: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: invalid number '{tok}'")))?;
            if !check.is_finite() {
                return Err(Error::Parse(format!(
                    "line {line}: non-finite entry '{tok}'"
                )));
            }
            DoubleDouble::parse(tok)
                .ok_or_else(|| Error::Parse(format!("line {line}: invalid number '{tok}'")))
        };

        let mut c = Vec::with_capacity(stages);
        let mut a = Vec::with_capacity(stages);
        for i in 0..stages {
            let (line, toks) = &tokens_by_line[1 + i];
            if toks.len() != i + 1 {
                return Err(Error::Parse(format!(
                    "line {line}: stage {i} needs {} entries (c_i then {} a's), found {}",
                    i + 1,
                    i,
                    toks.len()
                )));
            }
            c.push(parse_entry(toks[0], *line)?);
            let row: Result<Vec<DoubleDouble>> =
                toks[1..].iter().map(|t| parse_entry(t, *line)).collect();
            a.push(row?);
        }
        let weight_row = |idx: usize| -> Result<Vec<DoubleDouble>> {
            let (line, toks) = &tokens_by_line[idx];
            if toks.len() != stages {
                return Err(Error::Parse(format!(
                    "line {line}: weight row needs {stages} entries, found {}",
                    toks.len()
                )));
            }
            toks.iter().map(|t| parse_entry(t, *line)).collect()
        };
        let b = weight_row(1 + stages)?;
        let b_hat = weight_row(2 + stages)?;

        let tableau = ButcherTableau {
            stages,
            order,
            embedded_order,
            c,
            a,
            b,
            b_hat,
        };
        tableau.validate(text)?;
        Ok(tableau)
    }

    /// Re-read the decimal strings and verify the consistency conditions
    /// exactly (fixed-point accumulation of the decimal digits), so the
    /// 1e-30 threshold applies to the stored decimals themselves.
    fn validate(&self, text: &str) -> Result<()> {
        let rows: Vec<Vec<&str>> = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split_whitespace().collect())
            .collect();

        for (i, row) in rows[..self.stages].iter().enumerate() {
            let mut acc = ExactAccumulator::default();
            for tok in &row[1..] {
                acc.add(tok, 1)?;
            }
            acc.add(row[0], -1)?;
            if acc.magnitude() > VALIDATION_TOL {
                return Err(Error::Invariant(format!(
                    "row-sum condition fails at stage {i}: |sum a - c| = {:e}",
                    acc.magnitude()
                )));
            }
        }
        for (name, row) in [("b", &rows[self.stages]), ("bhat", &rows[self.stages + 1])] {
            let mut acc = ExactAccumulator::default();
            for tok in row {
                acc.add(tok, 1)?;
            }
            acc.add("1.0", -1)?;
            if acc.magnitude() > VALIDATION_TOL {
                return Err(Error::Invariant(format!(
                    "{name} weights sum to 1 {:e} away",
                    acc.magnitude()
                )));
            }
        }
        Ok(())
    }

    /// Error-estimate weights e_i = b_i - bhat_i.
    pub fn error_weights(&self) -> Vec<DoubleDouble> {
        self.b
            .iter()
            .zip(&self.b_hat)
            .map(|(&b, &bh)| b - bh)
            .collect()
    }
}

/// Exact signed fixed-point sum of decimal strings in three limbs of
/// 10^16, covering places 10^3 down to 10^-45. Digits below the window are
/// discarded (bounded by 1e-45 per entry, far under the 1e-30 threshold);
/// magnitudes at or above 10^4 overflow the window and are rejected.
#[derive(Default)]
struct ExactAccumulator {
    /// limb[k] holds the digits for places 10^(3 - 16k) .. 10^(3 - 16k - 15).
    limbs: [i128; 3],
}

impl ExactAccumulator {
    const LIMB: i128 = 10_000_000_000_000_000; // 10^16
    const TOP_PLACE: i32 = 3;

    fn add(&mut self, token: &str, sign: i128) -> Result<()> {
        let bad = || Error::Parse(format!("entry '{token}' not a plain decimal"));
        let mut tok = token;
        let mut sign = sign;
        let mut exponent = 0i32;
        if let Some(pos) = tok.find(['e', 'E']) {
            exponent = tok[pos + 1..].parse().map_err(|_| bad())?;
            tok = &tok[..pos];
        }
        if let Some(rest) = tok.strip_prefix('-') {
            sign = -sign;
            tok = rest;
        } else if let Some(rest) = tok.strip_prefix('+') {
            tok = rest;
        }
        let (int_part, frac_part) = match tok.split_once('.') {
            Some((a, b)) => (a, b),
            None => (tok, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        // Place value of the digit right before the decimal point.
        let mut place = int_part.len() as i32 - 1 + exponent;
        for ch in int_part.chars().chain(frac_part.chars()) {
            let d = ch.to_digit(10).ok_or_else(bad)? as i128;
            if d != 0 {
                if place > Self::TOP_PLACE {
                    return Err(Error::Parse(format!(
                        "entry '{token}' too large for exact validation"
                    )));
                }
                let offset = (Self::TOP_PLACE - place) as usize;
                let (limb, within) = (offset / 16, offset % 16);
                if limb < 3 {
                    self.limbs[limb] += sign * d * 10i128.pow(15 - within as u32);
                }
            }
            place -= 1;
        }
        Ok(())
    }

    /// Absolute value of the accumulated sum, exact down to the window
    /// floor.
    fn magnitude(&self) -> f64 {
        let mut limbs = self.limbs;
        // Normalize so all limbs share the sign of the total.
        for k in (1..3).rev() {
            let carry = limbs[k].div_euclid(Self::LIMB);
            limbs[k] = limbs[k].rem_euclid(Self::LIMB);
            limbs[k - 1] += carry;
        }
        if limbs[0] < 0 {
            // Flip to magnitude form: value = -((-l0) - l1/LIMB - ...).
            let mut borrow = 0i128;
            for k in (1..3).rev() {
                let mut v = -limbs[k] - borrow;
                borrow = 0;
                while v < 0 {
                    v += Self::LIMB;
                    borrow += 1;
                }
                limbs[k] = v;
            }
            limbs[0] = -limbs[0] - borrow;
        }
        let scale = 10f64.powi(Self::TOP_PLACE - 15);
        limbs[0] as f64 * scale
            + limbs[1] as f64 * scale / Self::LIMB as f64
            + limbs[2] as f64 * scale / (Self::LIMB as f64 * Self::LIMB as f64)
    }
}

static VERNER98: OnceLock<ButcherTableau> = OnceLock::new();

/// The shipped Verner efficient 9(8) pair (16 stages), validated at load.
pub fn verner98() -> &'static ButcherTableau {
    VERNER98.get_or_init(|| {
        ButcherTableau::parse(include_str!("../../data/verner98.txt"))
            .expect("bundled Verner 9(8) tableau must validate")
    })
}
