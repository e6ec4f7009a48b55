use crate::error::{Error, Result};

pub const DEFAULT_MAX_DENOMINATOR: u32 = 16;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer repetition counts proportional to `coefficients`: the largest
/// coefficient maps to `max_denominator`, the rest are rounded, and the
/// counts are reduced by their common divisor.
pub fn rationalize(coefficients: &[f64], max_denominator: u32) -> Result<Vec<u32>> {
    if max_denominator == 0 {
        return Err(Error::param("max_denominator", "must be at least 1"));
    }
    if let Some(c) = coefficients.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::param("coefficients", format!("{c} is not a finite nonnegative value")));
    }
    let max = coefficients.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::param("coefficients", "at least one must be positive"));
    }
    let counts: Vec<u32> = coefficients
        .iter()
        .map(|c| (c / max * max_denominator as f64).round() as u32)
        .collect();
    let g = counts.iter().fold(0, |g, c| gcd(g, *c));
    Ok(counts.into_iter().map(|c| c / g).collect())
}

/// Byte sequence whose spectrum points approximately along
/// `sum_j coefficients[j] * spectrum(basis[j])`, built by concatenating
/// basis sequences with rationalized repetition counts.
pub fn approximate_sequence(coefficients: &[f64], basis: &[Vec<u8>], max_denominator: u32) -> Result<Vec<u8>> {
    if coefficients.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: coefficients.len(),
        });
    }
    let counts = rationalize(coefficients, max_denominator)?;
    let mut out = Vec::new();
    for (seq, &c) in basis.iter().zip(&counts) {
        for _ in 0..c {
            out.extend_from_slice(seq);
        }
    }
    Ok(out)
}
