//! Reference computations that share no code with the library.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

const TEMPLATES: [(&str, &[u8]); 8] = [
    ("maj", &[0, 4, 7]),
    ("min", &[0, 3, 7]),
    ("dim", &[0, 3, 6]),
    ("aug", &[0, 4, 8]),
    ("maj7", &[0, 4, 7, 11]),
    ("min7", &[0, 3, 7, 10]),
    ("dom7", &[0, 4, 7, 10]),
    ("sus4", &[0, 5, 7]),
];

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Score, tie-break rank, root, chroma, name.
type Candidate = (BigRational, (usize, u8, usize), u8, u16, &'static str);

/// Exhaustive template scoring in exact arithmetic.
///
/// `sounding` is `(pitch, first step, steps)`; each sounding step adds one to
/// its pitch class. Score is `matched - 3/10 * unmatched`. Ties go to the
/// smaller template, then the lower root, then template order.
pub fn best_chord(sounding: &[(u8, usize, usize)]) -> Option<(u8, u16, &'static str)> {
    let mut hist = [0i64; 12];
    for &(pitch, _, steps) in sounding {
        hist[(pitch % 12) as usize] += steps as i64;
    }
    let total: i64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let mut best: Option<Candidate> = None;
    for (order, (name, intervals)) in TEMPLATES.iter().enumerate() {
        for root in 0..12u8 {
            let mut chroma = 0u16;
            for &i in intervals.iter() {
                chroma |= 1 << ((root + i) % 12);
            }
            let matched: i64 = (0..12).filter(|pc| chroma & (1 << pc) != 0).map(|pc| hist[pc]).sum();
            let score = ratio(matched, 1) - ratio(3, 10) * ratio(total - matched, 1);
            let rank = (intervals.len(), root, order);
            let better = match &best {
                None => true,
                Some((s, r, ..)) => score > *s || (score == *s && rank < *r),
            };
            if better {
                best = Some((score, rank, root, chroma, name));
            }
        }
    }
    best.map(|(_, _, root, chroma, name)| (root, chroma, name))
}

/// `P(X >= k)` for every `k` in `0..=n`, exactly, for `X ~ Binomial(n, num/den)`.
///
/// Works on integers, `C(n, i) * num^i * (den - num)^(n - i)`, and divides by
/// `den^n` once per tail.
pub fn binomial_tails(n: u64, num: i64, den: i64) -> Vec<f64> {
    let (a, b) = (BigInt::from(num), BigInt::from(den - num));
    let mut weights = Vec::with_capacity(n as usize + 1);
    let mut choose = BigInt::one();
    for i in 0..=n {
        weights.push(&choose * Pow::pow(&a, i as u32) * Pow::pow(&b, (n - i) as u32));
        choose = choose * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    let total = BigInt::from(den).pow(n as u32);
    let mut tails = vec![0.0; n as usize + 1];
    let mut acc = BigInt::zero();
    for k in (0..=n as usize).rev() {
        acc += &weights[k];
        tails[k] = BigRational::new(acc.clone(), total.clone()).to_f64().expect("finite");
    }
    tails
}
