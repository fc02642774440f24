//! Exact decimal rendering of integer quantities and ratios.
//!
//! All rounding is half-up on exact rationals, so a displayed value never
//! depends on floating-point representation.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive};

/// Renders `num / den` with `digits` significant figures, keeping trailing
/// zeros ("5.90").
pub fn sig_figs(num: u128, den: u128, digits: u32) -> String {
    big_sig_figs(BigUint::from(num), BigUint::from(den), digits)
}

/// [`sig_figs`] for arbitrary-size operands.
pub fn big_sig_figs(n: BigUint, d: BigUint, digits: u32) -> String {
    assert!(d > BigUint::ZERO, "denominator must be positive");
    assert!(digits > 0, "need at least one significant figure");
    if n == BigUint::ZERO {
        return "0".to_string();
    }
    let ten = BigUint::from(10u32);

    // Decimal exponent e with 10^e <= n/d < 10^(e+1).
    // Start from the digit-count estimate, then settle it exactly.
    let mut e = n.to_string().len() as i64 - d.to_string().len() as i64;
    while pow_cmp(&n, &d, e + 1) != std::cmp::Ordering::Less {
        e += 1;
    }
    while pow_cmp(&n, &d, e) == std::cmp::Ordering::Less {
        e -= 1;
    }

    // q = round_half_up(n/d * 10^(digits-1-e))
    let shift = digits as i64 - 1 - e;
    let (sn, sd) = if shift >= 0 {
        (n * ten.pow(shift as u32), d)
    } else {
        (n, d * ten.pow((-shift) as u32))
    };
    let (mut q, r) = sn.div_rem(&sd);
    if r * 2u32 >= sd {
        q += 1u32;
    }
    if q == ten.pow(digits) {
        q /= &ten;
        e += 1;
    }
    place_point(&q.to_string(), e)
}

/// Compares n/d against 10^e.
fn pow_cmp(n: &BigUint, d: &BigUint, e: i64) -> std::cmp::Ordering {
    let ten = BigUint::from(10u32);
    if e >= 0 {
        n.cmp(&(d * ten.pow(e as u32)))
    } else {
        (n * ten.pow((-e) as u32)).cmp(d)
    }
}

fn place_point(digits: &str, e: i64) -> String {
    let int_len = e + 1;
    let len = digits.len() as i64;
    if int_len <= 0 {
        format!("0.{}{}", "0".repeat((-int_len) as usize), digits)
    } else if int_len >= len {
        format!("{}{}", digits, "0".repeat((int_len - len) as usize))
    } else {
        let (a, b) = digits.split_at(int_len as usize);
        format!("{a}.{b}")
    }
}

/// Drops trailing fractional zeros ("1.0" -> "1", "4.20" -> "4.2").
pub fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Rounds a ratio to `digits` significant figures, trailing zeros removed.
pub fn ratio_sig_figs(r: &Ratio<u128>, digits: u32) -> String {
    trim_zeros(&sig_figs(*r.numer(), *r.denom(), digits))
}

/// Fixed-point rendering with `places` decimals (half-up).
pub fn ratio_decimal(r: &Ratio<u128>, places: u32) -> String {
    big_decimal(BigUint::from(*r.numer()), BigUint::from(*r.denom()), places)
}

/// [`ratio_decimal`] for arbitrary-size operands.
pub fn big_decimal(n: BigUint, d: BigUint, places: u32) -> String {
    let scale = BigUint::from(10u32).pow(places);
    let (mut q, rem) = (n * &scale).div_rem(&d);
    if rem * 2u32 >= d {
        q += BigUint::one();
    }
    let s = q.to_string();
    if places == 0 {
        return s;
    }
    let p = places as usize;
    let s = if s.len() <= p {
        format!("{}{}", "0".repeat(p + 1 - s.len()), s)
    } else {
        s
    };
    let (a, b) = s.split_at(s.len() - p);
    format!("{a}.{b}")
}

pub fn ratio_to_f64(r: &Ratio<u128>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

const PREFIXES: [(u128, &str); 5] = [
    (1_000_000_000_000_000, "P"),
    (1_000_000_000_000, "T"),
    (1_000_000_000, "G"),
    (1_000_000, "M"),
    (1_000, "K"),
];

/// Decimal-prefixed quantity to three significant figures, e.g. "30.4 MB".
pub fn si(value: u128, unit: &str) -> String {
    for (scale, prefix) in PREFIXES {
        if value >= scale {
            return format!("{} {prefix}{unit}", sig_figs(value, scale, 3));
        }
    }
    if value == 0 {
        return format!("0 {unit}");
    }
    format!("{} {unit}", sig_figs(value, 1, 3))
}

pub fn bytes(value: u128) -> String {
    si(value, "B")
}

/// FLOP counts use the "GF"/"TF" shorthand.
pub fn flops(value: u128) -> String {
    si(value, "F")
}
