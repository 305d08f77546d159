//! Exact coverage of the positive integers by certified congruence classes.
//!
//! The ledger keeps a pairwise-disjoint list of residue classes. Adding a
//! class that partially overlaps a stored one splits it into finer classes
//! until every piece is either contained in a stored class or disjoint from
//! all of them, so the covered density is always the plain sum of `1/modulus`.
//! The common modulus (the LCM of everything added) is never materialized.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::PatternClass;

/// Largest modulus the brute-force oracle will materialize.
pub const BRUTE_FORCE_CAP: u64 = 10_000_000;

/// The integers `≡ residue (mod modulus)`, with `0 ≤ residue < modulus`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResidueClass {
    modulus: BigUint,
    residue: BigUint,
}

impl ResidueClass {
    /// Builds a class, reducing `residue` into `0..modulus`.
    pub fn new(modulus: impl Into<BigUint>, residue: impl Into<BigUint>) -> Result<Self> {
        let modulus = modulus.into();
        if modulus.is_zero() {
            return Err(Error::InvalidResidue("modulus must be at least 1".into()));
        }
        let residue = residue.into() % &modulus;
        Ok(ResidueClass { modulus, residue })
    }

    /// The residue class of the values `b·k − c`.
    pub fn from_pattern(class: &PatternClass) -> Self {
        let b = class.modulus();
        let residue = (b - class.remainder()) % b;
        ResidueClass {
            modulus: BigUint::from(b),
            residue: BigUint::from(residue),
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn residue(&self) -> &BigUint {
        &self.residue
    }

    pub fn intersects(&self, other: &ResidueClass) -> bool {
        let g = self.modulus.gcd(&other.modulus);
        &self.residue % &g == &other.residue % &g
    }

    /// True iff every member of `other` is a member of `self`.
    pub fn contains(&self, other: &ResidueClass) -> bool {
        other.modulus.is_multiple_of(&self.modulus)
            && &other.residue % &self.modulus == self.residue
    }

    /// Splits into the `p` classes modulo `p·modulus`.
    fn split(&self, p: u64) -> impl Iterator<Item = ResidueClass> + '_ {
        let modulus = &self.modulus * p;
        (0..p).map(move |j| ResidueClass {
            modulus: modulus.clone(),
            residue: &self.residue + &self.modulus * j,
        })
    }
}

impl fmt::Display for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.residue, self.modulus)
    }
}

impl FromStr for ResidueClass {
    type Err = Error;

    /// Parses `modulus:residue`.
    fn from_str(s: &str) -> Result<Self> {
        let (m, r) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidResidue(format!("expected modulus:residue, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<BigUint>()
                .map_err(|_| Error::InvalidResidue(format!("not a non-negative integer: {v:?}")))
        };
        ResidueClass::new(parse(m)?, parse(r)?)
    }
}

/// Disjoint union of residue classes with its exact density.
#[derive(Clone, Debug)]
pub struct CoverageLedger {
    classes: Vec<ResidueClass>,
    density: BigRational,
    lcm: BigUint,
    contributing_lcm: BigUint,
}

impl Default for CoverageLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl CoverageLedger {
    pub fn new() -> Self {
        CoverageLedger {
            classes: Vec::new(),
            density: BigRational::zero(),
            lcm: BigUint::one(),
            contributing_lcm: BigUint::one(),
        }
    }

    /// Rebuilds a ledger from stored classes, rejecting overlapping input.
    pub fn from_classes(classes: Vec<ResidueClass>) -> Result<Self> {
        let mut ledger = CoverageLedger::new();
        for class in classes {
            if let Some(other) = ledger.classes.iter().find(|c| c.intersects(&class)) {
                return Err(Error::InvalidResidue(format!(
                    "{class} overlaps stored class {other}"
                )));
            }
            ledger.density += unit_fraction(&class.modulus);
            ledger.lcm = ledger.lcm.lcm(&class.modulus);
            ledger.classes.push(class);
        }
        Ok(ledger)
    }

    /// Adds `class` and returns the density gained.
    pub fn add_class(&mut self, class: &ResidueClass) -> BigRational {
        let mut fresh = Vec::new();
        let _ = self.uncovered_parts(class, &mut |piece| {
            fresh.push(piece);
            ControlFlow::<()>::Continue(())
        });
        let mut gain = BigRational::zero();
        for piece in fresh {
            gain += unit_fraction(&piece.modulus);
            self.lcm = self.lcm.lcm(&piece.modulus);
            self.classes.push(piece);
        }
        if !gain.is_zero() {
            self.contributing_lcm = self.contributing_lcm.lcm(&class.modulus);
            self.density += &gain;
        }
        gain
    }

    /// True iff every member of `class` is already covered.
    pub fn covers(&self, class: &ResidueClass) -> bool {
        self.uncovered_parts(class, &mut |_| ControlFlow::Break(()))
            .is_continue()
    }

    /// Feeds a disjoint decomposition of `class` minus the covered set to
    /// `sink`.
    ///
    /// The covered set is periodic modulo the LCM `L` of the stored moduli,
    /// so the work is done on the projection of `class` modulo
    /// `g = gcd(modulus, L)` and each uncovered piece is lifted back by CRT.
    /// This keeps refinement inside the divisors of `L` however foreign the
    /// modulus of `class` is.
    fn uncovered_parts<B>(
        &self,
        class: &ResidueClass,
        sink: &mut impl FnMut(ResidueClass) -> ControlFlow<B>,
    ) -> ControlFlow<B> {
        let g = class.modulus.gcd(&self.lcm);
        let projected = ResidueClass {
            residue: &class.residue % &g,
            modulus: g.clone(),
        };
        let m_g = &class.modulus / &g;
        self.refine(&projected, &mut |piece| {
            // Every piece modulus n divides L and is a multiple of g, so
            // gcd(modulus, n) = g and the intersection is a class modulo
            // modulus·n/g.
            let n_g = &piece.modulus / &g;
            let lifted = if n_g.is_one() {
                class.clone()
            } else {
                let r = BigInt::from(class.residue.clone());
                let q = BigInt::from(piece.residue.clone());
                let n_g_i = BigInt::from(n_g.clone());
                let inv = mod_inverse(&BigInt::from(m_g.clone()), &n_g_i);
                let t = ((q - &r) / BigInt::from(g.clone()) * inv).mod_floor(&n_g_i);
                let modulus = &class.modulus * &n_g;
                let residue = (r + BigInt::from(class.modulus.clone()) * t)
                    .to_biguint()
                    .expect("non-negative CRT lift")
                    % &modulus;
                ResidueClass { modulus, residue }
            };
            sink(lifted)
        })
    }

    fn refine<B>(
        &self,
        class: &ResidueClass,
        sink: &mut impl FnMut(ResidueClass) -> ControlFlow<B>,
    ) -> ControlFlow<B> {
        let Some(stored) = self.classes.iter().find(|c| c.intersects(class)) else {
            return sink(class.clone());
        };
        let g = class.modulus.gcd(&stored.modulus);
        let excess = &stored.modulus / &g;
        if excess.is_one() {
            return ControlFlow::Continue(());
        }
        let p = smallest_prime_factor(&excess);
        for piece in class.split(p) {
            self.refine(&piece, sink)?;
        }
        ControlFlow::Continue(())
    }

    pub fn classes(&self) -> &[ResidueClass] {
        &self.classes
    }

    pub fn density(&self) -> &BigRational {
        &self.density
    }

    /// LCM of the stored (refined) moduli.
    pub fn lcm_of_moduli(&self) -> BigUint {
        self.lcm.clone()
    }

    /// LCM of the moduli of classes that added coverage.
    pub fn contributing_lcm(&self) -> &BigUint {
        &self.contributing_lcm
    }

    pub fn is_disjoint(&self) -> bool {
        self.classes
            .iter()
            .enumerate()
            .all(|(i, a)| self.classes[i + 1..].iter().all(|b| !a.intersects(b)))
    }
}

/// Inverse of `a` modulo `n`, for coprime `a` and `n > 1`.
fn mod_inverse(a: &BigInt, n: &BigInt) -> BigInt {
    let e = a.extended_gcd(n);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(n)
}

fn unit_fraction(modulus: &BigUint) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(modulus.clone()))
}

fn smallest_prime_factor(n: &BigUint) -> u64 {
    debug_assert!(*n > BigUint::one());
    let mut p = 2u64;
    loop {
        if (n % p).is_zero() {
            return p;
        }
        if BigUint::from(p) * p > *n {
            return n.to_u64().expect("prime cofactor above u64 range");
        }
        p += if p == 2 { 1 } else { 2 };
    }
}

/// Covered fraction of `0..l` by marking every residue explicitly.
pub fn brute_force_density(classes: &[ResidueClass], l: u64) -> Result<BigRational> {
    if l == 0 {
        return Err(Error::InvalidResidue(
            "oracle modulus must be at least 1".into(),
        ));
    }
    if l > BRUTE_FORCE_CAP {
        return Err(Error::OracleCap(l));
    }
    let mut covered = vec![false; l as usize];
    for class in classes {
        let m = class
            .modulus
            .to_u64()
            .filter(|m| l.is_multiple_of(*m))
            .ok_or_else(|| {
                Error::InvalidResidue(format!("modulus of {class} does not divide {l}"))
            })?;
        let r = class.residue.to_u64().unwrap_or(0);
        for slot in covered.iter_mut().skip(r as usize).step_by(m as usize) {
            *slot = true;
        }
    }
    let count = covered.iter().filter(|&&c| c).count();
    Ok(BigRational::new(BigInt::from(count), BigInt::from(l)))
}

/// Percentage with `places` decimals, rounded half up.
pub fn format_percent(value: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = value * BigRational::from_integer(BigInt::from(100) * &scale);
    let rounded = (scaled + BigRational::new(BigInt::one(), BigInt::from(2)))
        .floor()
        .to_integer();
    let (int, frac) = rounded.div_mod_floor(&scale);
    if places == 0 {
        return int.to_string();
    }
    format!(
        "{int}.{:0>width$}",
        frac.to_string(),
        width = places as usize
    )
}

/// `p/q` text form of a rational.
pub fn format_fraction(value: &BigRational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn parse_fraction(s: &str) -> Result<BigRational> {
    let bad = || Error::Checkpoint(format!("malformed fraction {s:?}"));
    let (p, q) = s.split_once('/').ok_or_else(bad)?;
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

/// Ledger density recorded after a modulus has been fully processed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityCheckpoint {
    pub modulus: u64,
    #[serde(with = "fraction_string")]
    pub density: BigRational,
}

mod fraction_string {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_fraction(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_fraction(&s).map_err(serde::de::Error::custom)
    }
}

/// Completion gains around powers of two.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeltaReport {
    /// `(t, gain)`: density gained by processing modulus `2^t`.
    pub powers: Vec<(u32, BigRational)>,
    /// `(t, gain)`: density gained by all moduli strictly between `2^t` and `2^(t+1)`.
    pub between: Vec<(u32, BigRational)>,
}

pub fn delta_report(checkpoints: &[DensityCheckpoint]) -> DeltaReport {
    let mut report = DeltaReport::default();
    let mut before = BigRational::zero();
    // Density right after the most recent power of two, keyed by its exponent.
    let mut last_power: Option<(u32, BigRational)> = None;
    for cp in checkpoints {
        if cp.modulus.is_power_of_two() && cp.modulus > 1 {
            let t = cp.modulus.trailing_zeros();
            if let Some((prev_t, after_prev)) = &last_power {
                if *prev_t + 1 == t {
                    report.between.push((*prev_t, &before - after_prev));
                }
            }
            report.powers.push((t, &cp.density - &before));
            last_power = Some((t, cp.density.clone()));
        }
        before = cp.density.clone();
    }
    report
}
