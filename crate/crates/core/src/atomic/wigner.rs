//! Wigner 3j and 6j symbols from the Racah sum formulas.
//!
//! Arguments with every j at most 20 are summed in exact rational arithmetic
//! and rounded once at the end. Larger arguments use log-factorials.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::HalfInt;
use crate::error::{Error, Result};

/// Largest `2j` handled with exact arithmetic.
const EXACT_TWICE_LIMIT: i32 = 40;

const LN_FACT_TABLE: usize = 2048;

fn ln_factorial(n: i64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_TABLE];
        for k in 1..LN_FACT_TABLE {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    });
    let n = n as usize;
    if n < LN_FACT_TABLE {
        return table[n];
    }
    // Stirling series, accurate to double precision at this size.
    let x = n as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * std::f64::consts::TAU.ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}

fn factorial(n: i64) -> BigInt {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![BigInt::one()];
        for k in 1..=(4 * EXACT_TWICE_LIMIT as i64 + 2) {
            let next = &t[(k - 1) as usize] * BigInt::from(k);
            t.push(next);
        }
        t
    });
    table[n as usize].clone()
}

fn sign(k: i64) -> i64 {
    if k.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

fn check_j(j: HalfInt) -> Result<()> {
    if j.twice() < 0 {
        return Err(Error::invalid(format!("negative angular momentum {j}")));
    }
    Ok(())
}

/// Half of an even integer. Callers guarantee evenness.
fn h(twice: i32) -> i64 {
    debug_assert!(twice % 2 == 0);
    (twice / 2) as i64
}

fn triangle_ok(a: i32, b: i32, c: i32) -> bool {
    (a + b + c) % 2 == 0 && c >= (a - b).abs() && c <= a + b
}

/// A Racah-type sum, described as factorial arguments so it can be evaluated
/// exactly or in log space. The value is
/// `phase * sqrt(prod num_sqrt! / prod den_sqrt!) * sum_k sign * prod up(k)! / prod down(k)!`.
struct RacahSum {
    phase: i64,
    num_sqrt: Vec<i64>,
    den_sqrt: Vec<i64>,
    terms: Vec<(i64, Vec<i64>, Vec<i64>)>,
}

impl RacahSum {
    fn exact(&self) -> f64 {
        let mut pref = BigRational::one();
        for &n in &self.num_sqrt {
            pref *= BigRational::from_integer(factorial(n));
        }
        for &n in &self.den_sqrt {
            pref /= BigRational::from_integer(factorial(n));
        }
        let mut sum = BigRational::zero();
        for (s, up, down) in &self.terms {
            let mut num = BigInt::from(*s);
            for &n in up {
                num *= factorial(n);
            }
            let mut den = BigInt::one();
            for &n in down {
                den *= factorial(n);
            }
            sum += BigRational::new(num, den);
        }
        if sum.is_zero() {
            return 0.0;
        }
        let s = if sum.is_negative() { -1.0 } else { 1.0 };
        let sq = (pref * &sum * &sum).to_f64().unwrap_or(f64::NAN);
        self.phase as f64 * s * sq.sqrt()
    }

    fn logarithmic(&self) -> f64 {
        let ln_pref: f64 = 0.5
            * (self.num_sqrt.iter().map(|&n| ln_factorial(n)).sum::<f64>()
                - self.den_sqrt.iter().map(|&n| ln_factorial(n)).sum::<f64>());
        let mut sum = 0.0;
        for (s, up, down) in &self.terms {
            let ln_t = up.iter().map(|&n| ln_factorial(n)).sum::<f64>()
                - down.iter().map(|&n| ln_factorial(n)).sum::<f64>();
            sum += *s as f64 * (ln_pref + ln_t).exp();
        }
        self.phase as f64 * sum
    }
}

fn sum_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<Option<RacahSum>> {
    for (j, m) in [(j1, m1), (j2, m2), (j3, m3)] {
        check_j(j)?;
        if (j.twice() - m.twice()) % 2 != 0 {
            return Err(Error::invalid(format!("projection {m} incompatible with j = {j}")));
        }
    }
    let (a1, a2, a3) = (j1.twice(), j2.twice(), j3.twice());
    let (b1, b2, b3) = (m1.twice(), m2.twice(), m3.twice());
    if b1 + b2 + b3 != 0
        || !triangle_ok(a1, a2, a3)
        || b1.abs() > a1
        || b2.abs() > a2
        || b3.abs() > a3
    {
        return Ok(None);
    }
    let n1 = h(a1 + a2 - a3);
    let n2 = h(a1 - a2 + a3);
    let n3 = h(-a1 + a2 + a3);
    let big = h(a1 + a2 + a3) + 1;
    let kmin = 0.max(h(a2 - a3 - b1)).max(h(a1 - a3 + b2));
    let kmax = n1.min(h(a1 - b1)).min(h(a2 + b2));
    let terms = (kmin..=kmax)
        .map(|k| {
            (
                sign(k),
                vec![],
                vec![
                    k,
                    h(a3 - a2 + b1) + k,
                    h(a3 - a1 - b2) + k,
                    n1 - k,
                    h(a1 - b1) - k,
                    h(a2 + b2) - k,
                ],
            )
        })
        .collect();
    let sum = RacahSum {
        phase: sign(h(a1 - a2 - b3)),
        num_sqrt: vec![
            n1,
            n2,
            n3,
            h(a1 + b1),
            h(a1 - b1),
            h(a2 + b2),
            h(a2 - b2),
            h(a3 + b3),
            h(a3 - b3),
        ],
        den_sqrt: vec![big],
        terms,
    };
    Ok(Some(sum))
}

fn evaluate(sum: Option<RacahSum>, largest_twice: i32) -> f64 {
    match sum {
        None => 0.0,
        Some(s) if largest_twice <= EXACT_TWICE_LIMIT => s.exact(),
        Some(s) => s.logarithmic(),
    }
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Returns zero when the triangle rule, the projection sum rule or `|m| <= j`
/// fails. Negative `j` or a projection of the wrong parity is an error.
pub fn wigner_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<f64> {
    let largest = j1.twice().max(j2.twice()).max(j3.twice());
    Ok(evaluate(sum_3j(j1, j2, j3, m1, m2, m3)?, largest))
}

fn sum_6j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    j4: HalfInt,
    j5: HalfInt,
    j6: HalfInt,
) -> Result<Option<RacahSum>> {
    for j in [j1, j2, j3, j4, j5, j6] {
        check_j(j)?;
    }
    let (a, b, c, d, e, f) = (
        j1.twice(),
        j2.twice(),
        j3.twice(),
        j4.twice(),
        j5.twice(),
        j6.twice(),
    );
    let triads = [(a, b, c), (a, e, f), (d, b, f), (d, e, c)];
    if triads.iter().any(|&(x, y, z)| !triangle_ok(x, y, z)) {
        return Ok(None);
    }
    let mut num_sqrt = Vec::with_capacity(12);
    let mut den_sqrt = Vec::with_capacity(4);
    for &(x, y, z) in &triads {
        num_sqrt.extend([h(x + y - z), h(x - y + z), h(-x + y + z)]);
        den_sqrt.push(h(x + y + z) + 1);
    }
    let alpha = triads.map(|(x, y, z)| h(x + y + z));
    let beta = [h(a + b + d + e), h(a + c + d + f), h(b + c + e + f)];
    let tmin = *alpha.iter().max().unwrap();
    let tmax = *beta.iter().min().unwrap();
    let terms = (tmin..=tmax)
        .map(|t| {
            let mut down: Vec<i64> = alpha.iter().map(|&x| t - x).collect();
            down.extend(beta.iter().map(|&x| x - t));
            (sign(t), vec![t + 1], down)
        })
        .collect();
    let sum = RacahSum {
        phase: 1,
        num_sqrt,
        den_sqrt,
        terms,
    };
    Ok(Some(sum))
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`; zero when a triad is not a triangle.
pub fn wigner_6j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    j4: HalfInt,
    j5: HalfInt,
    j6: HalfInt,
) -> Result<f64> {
    let largest = [j1, j2, j3, j4, j5, j6].iter().map(|j| j.twice()).max().unwrap();
    Ok(evaluate(sum_6j(j1, j2, j3, j4, j5, j6)?, largest))
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>` in the Condon-Shortley convention.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    let w = wigner_3j(j1, j2, j, m1, m2, -m)?;
    let phase = sign(h(j1.twice() - j2.twice() + m.twice()));
    Ok(phase as f64 * (j.multiplicity() as f64).sqrt() * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hi(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn closed_form_zero_column() {
        let v = wigner_3j(hi(2), hi(2), hi(0), hi(0), hi(0), hi(0)).unwrap();
        assert!((v + 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stretched_state() {
        // A fully stretched coupling has CG = 1, so |3j| = 1/sqrt(2J+1).
        let v = wigner_3j(hi(1), hi(2), hi(3), hi(1), hi(2), hi(-3)).unwrap();
        assert!((v.abs() - 0.5).abs() < 1e-15, "{v}");
    }

    #[test]
    fn projection_rule_gives_zero() {
        assert_eq!(wigner_3j(hi(2), hi(2), hi(2), hi(2), hi(0), hi(0)).unwrap(), 0.0);
        assert_eq!(wigner_3j(hi(2), hi(2), hi(6), hi(0), hi(0), hi(0)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(wigner_3j(hi(-2), hi(2), hi(0), hi(0), hi(0), hi(0)).is_err());
        assert!(wigner_3j(hi(2), hi(2), hi(0), hi(1), hi(-1), hi(0)).is_err());
        assert!(wigner_6j(hi(2), hi(2), hi(2), hi(2), hi(2), hi(-2)).is_err());
    }

    #[test]
    fn exact_and_log_paths_agree() {
        let s = sum_3j(hi(12), hi(8), hi(10), hi(4), hi(-2), hi(-2)).unwrap().unwrap();
        assert!((s.exact() - s.logarithmic()).abs() < 1e-13);
        let s = sum_6j(hi(7), hi(9), hi(4), hi(5), hi(3), hi(8)).unwrap().unwrap();
        assert!((s.exact() - s.logarithmic()).abs() < 1e-13);
    }

    #[test]
    fn zero_column_past_exact_limit() {
        let j = hi(60);
        let v = wigner_3j(j, j, hi(0), hi(10), hi(-10), hi(0)).unwrap();
        let expect = sign(h(60 - 10)) as f64 / 61f64.sqrt();
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn six_j_zero_argument() {
        // {0 j j; j' j' x} = (-1)^(j+j'+x) / sqrt((2j+1)(2j'+1)); the triads force x = j'.
        let (j, jp, x) = (hi(2), hi(4), hi(4));
        let v = wigner_6j(hi(0), j, j, jp, jp, x).unwrap();
        let expect = sign(h(2 + 4 + 4)) as f64 / (3.0f64 * 5.0).sqrt();
        assert!((v - expect).abs() < 1e-15, "{v} {expect}");
    }

    #[test]
    fn six_j_large_arguments_use_log_path() {
        let (j, jp, x) = (hi(52), hi(46), hi(46));
        let v = wigner_6j(hi(0), j, j, jp, jp, x).unwrap();
        let expect = sign(h(52 + 46 + 46)) as f64 / (53.0f64 * 47.0).sqrt();
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn clebsch_gordan_spin_half_pair() {
        let cg = clebsch_gordan(hi(1), hi(1), hi(1), hi(-1), hi(0), hi(0)).unwrap();
        assert!((cg - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let cg = clebsch_gordan(hi(1), hi(-1), hi(1), hi(1), hi(0), hi(0)).unwrap();
        assert!((cg + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }
}
