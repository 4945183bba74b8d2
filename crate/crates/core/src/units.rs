//! Exact rational arithmetic shared by every module.
//!
//! Traffic costs, message sizes, link coefficients and simulated timestamps
//! are all `i64` rationals. Keeping them exact means the analytical cost
//! model and the simulator's traffic ledger can be compared with `==`
//! instead of a tolerance; floats only appear at the reporting boundary.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use thiserror::Error;

/// Exact rational used for sizes, link coefficients and costs.
pub type Rat = Ratio<i64>;

/// Shorthand for an integer-valued rational.
pub fn rat(n: i64) -> Rat {
    Ratio::from_integer(n)
}

/// Shorthand for `num / den`. Panics if `den` is zero.
pub fn ratio(num: i64, den: i64) -> Rat {
    Ratio::new(num, den)
}

/// Lossy conversion for report output only.
pub fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rounds to the nearest integer, halves away from zero.
pub fn round_half_up(r: Rat) -> i64 {
    *r.round().numer()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecimalError {
    #[error("empty numeric field")]
    Empty,
    #[error("invalid decimal literal {0:?}")]
    Invalid(String),
    #[error("numeric literal {0:?} has too many digits")]
    TooManyDigits(String),
}

/// Parses a decimal literal (`"3"`, `"-0.25"`, `"2.5"`) into an exact
/// rational. Scientific notation is not accepted; scenario files stay
/// human-auditable and every value stays exactly representable.
pub fn parse_decimal(s: &str) -> Result<Rat, DecimalError> {
    let t = s.trim();
    if t.is_empty() {
        return Err(DecimalError::Empty);
    }
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match t.split_once('.') {
        Some((i, f)) => (i, f),
        None => (t, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(DecimalError::Invalid(s.to_string()));
    }
    let all_digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return Err(DecimalError::Invalid(s.to_string()));
    }
    if int_part.len() + frac_part.len() > 15 {
        return Err(DecimalError::TooManyDigits(s.to_string()));
    }
    let mut numer: i64 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer * 10 + (c as u8 - b'0') as i64;
    }
    let denom = 10_i64.pow(frac_part.len() as u32);
    let mut r = Ratio::new(numer, denom);
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Formats a rational exactly: integers without a point, terminating
/// decimals in decimal notation, everything else as `numer/denom`.
pub fn fmt_exact(r: Rat) -> String {
    let denom = *r.denom();
    if denom == 1 {
        return r.numer().to_string();
    }
    let (mut twos, mut fives, mut rest) = (0u32, 0u32, denom);
    while rest % 2 == 0 {
        twos += 1;
        rest /= 2;
    }
    while rest % 5 == 0 {
        fives += 1;
        rest /= 5;
    }
    let places = twos.max(fives);
    if rest != 1 || places > 15 {
        return format!("{}/{}", r.numer(), denom);
    }
    let scale = 10_i64.pow(places) / denom;
    let scaled = r.numer().abs() * scale;
    let sign = if r.is_negative() { "-" } else { "" };
    let int = scaled / 10_i64.pow(places);
    let frac = scaled % 10_i64.pow(places);
    format!("{sign}{int}.{frac:0width$}", width = places as usize)
}

/// Simulated clock value in milliseconds, exact.
///
/// The same type doubles as a duration; subtraction may go negative and
/// callers enforce chronology where it matters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Default, Hash)]
pub struct SimTime(Rat);

impl SimTime {
    pub const ZERO: SimTime = SimTime(Ratio::new_raw(0, 1));

    pub fn from_ms(ms: Rat) -> Self {
        SimTime(ms)
    }

    pub fn from_ms_int(ms: i64) -> Self {
        SimTime(rat(ms))
    }

    pub fn from_secs(secs: Rat) -> Self {
        SimTime(secs * rat(1000))
    }

    pub fn ms(self) -> Rat {
        self.0
    }

    pub fn secs(self) -> Rat {
        self.0 / rat(1000)
    }

    pub fn to_f64_ms(self) -> f64 {
        rat_to_f64(self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    /// Duration scaled by an integer factor, e.g. `interval.scaled(k)`.
    pub fn scaled(self, k: i64) -> Self {
        SimTime(self.0 * rat(k))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", fmt_exact(self.0))
    }
}
