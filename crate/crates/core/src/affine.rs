//! Affine forms `a·k + d` and the symbolic Collatz step.
//!
//! An [`AffineForm`] stands for every member of a congruence class at once:
//! the class `b·k − c` (k ≥ 1) is the form with coefficient `b` and offset
//! `−c`. When the coefficient is even the parity of `a·k + d` does not depend
//! on `k`, so the Collatz map can be applied to the whole class symbolically.
//! Once the coefficient turns odd the parity splits and the symbolic
//! trajectory ends.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// The function `k ↦ coeff·k + offset`, with `coeff ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineForm {
    coeff: BigInt,
    offset: BigInt,
}

/// Parity of a form over all `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    /// Odd coefficient: the parity alternates with `k`.
    Indeterminate,
}

impl AffineForm {
    pub fn new(coeff: impl Into<BigInt>, offset: impl Into<BigInt>) -> Result<Self> {
        let coeff = coeff.into();
        if coeff < BigInt::one() {
            return Err(Error::InvalidCoefficient(coeff));
        }
        Ok(AffineForm {
            coeff,
            offset: offset.into(),
        })
    }

    pub fn coeff(&self) -> &BigInt {
        &self.coeff
    }

    pub fn offset(&self) -> &BigInt {
        &self.offset
    }

    /// `coeff·k + offset`.
    pub fn evaluate(&self, k: u64) -> BigInt {
        &self.coeff * BigInt::from(k) + &self.offset
    }

    pub fn parity(&self) -> Parity {
        if self.coeff.is_odd() {
            Parity::Indeterminate
        } else if self.offset.is_even() {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// One Collatz step applied to every member of the form.
    pub fn step(&self) -> Result<AffineForm> {
        match self.parity() {
            Parity::Even => Ok(AffineForm {
                coeff: &self.coeff >> 1u32,
                offset: &self.offset >> 1u32,
            }),
            Parity::Odd => Ok(AffineForm {
                coeff: &self.coeff * 3u32,
                offset: &self.offset * 3u32 + 1u32,
            }),
            Parity::Indeterminate => Err(Error::IndeterminateParity(self.clone())),
        }
    }

    /// True iff `self(k) < other(k)` for every `k ≥ from_k`.
    ///
    /// Both sides are linear in `k`, so the comparison reduces to the
    /// coefficient ordering plus the single point `from_k`.
    pub fn strictly_below(&self, other: &AffineForm, from_k: u64) -> bool {
        match other.coeff.cmp(&self.coeff) {
            std::cmp::Ordering::Greater => {
                (&other.coeff - &self.coeff) * BigInt::from(from_k) > &self.offset - &other.offset
            }
            std::cmp::Ordering::Equal => other.offset > self.offset,
            std::cmp::Ordering::Less => false,
        }
    }

    /// 2-adic valuation of the coefficient.
    pub fn coeff_v2(&self) -> u64 {
        self.coeff.trailing_zeros().unwrap_or(0)
    }
}

impl fmt::Display for AffineForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}k", self.coeff)?;
        if self.offset.is_zero() {
            Ok(())
        } else if self.offset.is_negative() {
            write!(f, "-{}", self.offset.abs())
        } else {
            write!(f, "+{}", self.offset)
        }
    }
}

/// Default step cap for an anchor: the proven bound `2·v2(coeff) + 1` plus slack.
pub fn default_step_cap(anchor: &AffineForm) -> usize {
    2 * anchor.coeff_v2() as usize + 8
}

/// Iterates the symbolic step from `anchor` until the coefficient becomes odd.
///
/// The returned list starts with the anchor (element 1) and ends at the first
/// form whose coefficient is odd. Every halving lowers `v2(coeff)` by one and
/// every tripling is followed by a halving, so the length never exceeds
/// `2·v2(coeff) + 1`; hitting `step_cap` means something is broken.
pub fn build_trajectory(anchor: &AffineForm, step_cap: usize) -> Result<Vec<AffineForm>> {
    let mut elements = vec![anchor.clone()];
    let mut current = anchor.clone();
    while current.parity() != Parity::Indeterminate {
        if elements.len() >= step_cap {
            return Err(Error::StepCapExceeded {
                anchor: anchor.clone(),
                cap: step_cap,
            });
        }
        current = current.step()?;
        elements.push(current.clone());
    }
    Ok(elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn form(a: i64, d: i64) -> AffineForm {
        AffineForm::new(a, d).unwrap()
    }

    fn collatz(n: i128) -> i128 {
        if n % 2 == 0 {
            n / 2
        } else {
            3 * n + 1
        }
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(form(4, -3).evaluate(1), BigInt::from(1));
        assert_eq!(form(6, -1).evaluate(2), BigInt::from(11));
        assert_eq!(form(96, -25).evaluate(1), BigInt::from(71));
    }

    #[test]
    fn rejects_non_positive_coefficient() {
        assert!(matches!(
            AffineForm::new(0, 1),
            Err(Error::InvalidCoefficient(_))
        ));
        assert!(AffineForm::new(-2, 1).is_err());
    }

    #[test]
    fn parity_examples() {
        assert_eq!(form(6, -4).parity(), Parity::Even);
        assert_eq!(form(4, -3).parity(), Parity::Odd);
        assert_eq!(form(3, -2).parity(), Parity::Indeterminate);
    }

    #[test]
    fn step_examples() {
        assert_eq!(form(4, -1).step().unwrap(), form(12, -2));
        assert_eq!(form(12, -2).step().unwrap(), form(6, -1));
        assert_eq!(form(128, -33).step().unwrap(), form(384, -98));
        assert!(matches!(
            form(3, -2).step(),
            Err(Error::IndeterminateParity(_))
        ));
    }

    #[test]
    fn trajectory_examples() {
        let t = build_trajectory(&form(4, -3), 16).unwrap();
        assert_eq!(t, vec![form(4, -3), form(12, -8), form(6, -4), form(3, -2)]);

        let t = build_trajectory(&form(2, 1), 16).unwrap();
        assert_eq!(t, vec![form(2, 1), form(6, 4), form(3, 2)]);

        // 16k-5 keeps going past its 6th element 18k-5 (still even coefficient).
        let t = build_trajectory(&form(16, -5), 16).unwrap();
        assert_eq!(
            t,
            vec![
                form(16, -5),
                form(48, -14),
                form(24, -7),
                form(72, -20),
                form(36, -10),
                form(18, -5),
                form(54, -14),
                form(27, -7),
            ]
        );
    }

    #[test]
    fn odd_anchor_is_its_own_trajectory() {
        assert_eq!(build_trajectory(&form(3, 1), 4).unwrap(), vec![form(3, 1)]);
    }

    #[test]
    fn step_cap_is_enforced() {
        let err = build_trajectory(&form(1 << 10, -1), 5).unwrap_err();
        assert!(matches!(err, Error::StepCapExceeded { cap: 5, .. }));
        assert_eq!(default_step_cap(&form(1 << 10, -1)), 28);
    }

    #[test]
    fn strictly_below_examples() {
        assert!(form(3, -2).strictly_below(&form(4, -3), 2));
        assert!(!form(3, -2).strictly_below(&form(4, -3), 1));
        assert!(!form(4, -1).strictly_below(&form(4, -3), 1));
        assert!(form(4, -3).strictly_below(&form(4, -1), 1));
    }

    #[test]
    fn display() {
        assert_eq!(form(12, -8).to_string(), "12k-8");
        assert_eq!(form(6, 4).to_string(), "6k+4");
        assert_eq!(form(2, 0).to_string(), "2k");
    }

    fn arb_form() -> impl Strategy<Value = (i64, i64)> {
        (1i64..5000, -5000i64..5000)
    }

    proptest! {
        #[test]
        fn step_matches_concrete_map((a, d) in arb_form()) {
            let f = form(a, d);
            prop_assume!(f.parity() != Parity::Indeterminate);
            let g = f.step().unwrap();
            for k in 1..=1000i128 {
                let n = a as i128 * k + d as i128;
                prop_assert_eq!(g.evaluate(k as u64), BigInt::from(collatz(n)));
            }
        }

        #[test]
        fn parity_is_uniform((a, d) in arb_form()) {
            let f = form(a, d);
            let expect = match f.parity() {
                Parity::Even => 0,
                Parity::Odd => 1,
                Parity::Indeterminate => return Ok(()),
            };
            for k in 1..=1000i128 {
                prop_assert_eq!((a as i128 * k + d as i128).rem_euclid(2), expect);
            }
        }

        #[test]
        fn trajectory_length_law(odd in 0u32..200, t in 1u32..12, d in -4000i64..4000) {
            let coeff = (2 * odd as i64 + 1) << t;
            let anchor = form(coeff, d);
            let traj = build_trajectory(&anchor, default_step_cap(&anchor)).unwrap();
            let odd_steps = traj.windows(2).filter(|w| w[1].coeff() > w[0].coeff()).count() as u32;
            prop_assert!(odd_steps <= t);
            prop_assert_eq!(traj.len() as u32, 1 + odd_steps + t);
            let last = traj.last().unwrap();
            prop_assert_eq!(last.coeff(), &(BigInt::from(2 * odd as i64 + 1) * BigInt::from(3u32).pow(odd_steps)));
            prop_assert!(last.coeff().is_odd());
        }

        #[test]
        fn strictly_below_matches_brute_force(
            (a, d) in arb_form(),
            (b, e) in arb_form(),
            from_k in 1u64..50,
        ) {
            let f = form(a, d);
            let g = form(b, e);
            let brute = (from_k..from_k + 10_000).all(|k| {
                (a as i128) * (k as i128) + (d as i128) < (b as i128) * (k as i128) + (e as i128)
            });
            prop_assert_eq!(f.strictly_below(&g, from_k), brute);
        }
    }
}
