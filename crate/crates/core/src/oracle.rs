//! Concrete integer trajectories: the Collatz map, stopping times, modified
//! stopping times and an independent checker for search certificates.
//!
//! Indices are 1-based throughout: the starting value is element 1.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::search::{Certificate, PatternClass, SuccessRecord};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

/// Default entry limit of a [`VisitedSet`]; ~3·10^7 entries is under 1 GiB.
pub const DEFAULT_VISITED_LIMIT: usize = 30_000_000;

/// `n/2` for even `n`, `3n+1` for odd `n`.
pub fn collatz_step(n: u64) -> Result<u64> {
    if n.is_multiple_of(2) {
        Ok(n / 2)
    } else {
        n.checked_mul(3)
            .and_then(|v| v.checked_add(1))
            .ok_or(Error::Overflow(n))
    }
}

pub fn collatz_step_big(n: &BigInt) -> BigInt {
    if n.is_even() {
        n >> 1u32
    } else {
        n * 3u32 + 1u32
    }
}

/// Concrete trajectory truncated at the first 1 or at `cap` elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub start: u64,
    pub values: Vec<u64>,
}

impl Trajectory {
    pub fn new(start: u64, cap: u64) -> Result<Self> {
        if start == 0 {
            return Err(Error::Config("trajectory start must be at least 1".into()));
        }
        let mut values = vec![start];
        let mut v = start;
        while v != 1 && (values.len() as u64) < cap {
            v = collatz_step(v)?;
            values.push(v);
        }
        Ok(Trajectory { start, values })
    }

    pub fn reached_one(&self) -> bool {
        self.values.last() == Some(&1)
    }
}

/// Least index `i ≥ 2` with `values[i] < n`.
pub fn stopping_time(n: u64, cap: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::Config("stopping time needs n ≥ 2".into()));
    }
    let mut v = n;
    for index in 2..=cap {
        v = collatz_step(v)?;
        if v < n {
            return Ok(index);
        }
    }
    Err(Error::CapBreach {
        start: n.to_string(),
        cap,
    })
}

/// True once the trajectory of `n` falls below `n` or reaches 1.
///
/// Returns `CapBreach` if neither happens within `cap` steps.
pub fn descends(n: &BigInt, cap: u64) -> Result<bool> {
    if n < &BigInt::one() {
        return Err(Error::Config(format!("cannot iterate from {n}")));
    }
    if let Some(start) = n.to_u64() {
        let mut v = start;
        for _ in 0..cap {
            if v == 1 {
                return Ok(true);
            }
            v = match collatz_step(v) {
                Ok(next) => next,
                Err(_) => return descends_big(n, cap),
            };
            if v < start {
                return Ok(true);
            }
        }
        return Err(Error::CapBreach {
            start: n.to_string(),
            cap,
        });
    }
    descends_big(n, cap)
}

fn descends_big(n: &BigInt, cap: u64) -> Result<bool> {
    let mut v = n.clone();
    for _ in 0..cap {
        if v.is_one() {
            return Ok(true);
        }
        v = collatz_step_big(&v);
        if &v < n {
            return Ok(true);
        }
    }
    Err(Error::CapBreach {
        start: n.to_string(),
        cap,
    })
}

/// First point where a trajectory meets the trajectory of a smaller start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StopRecord {
    pub n: u64,
    pub modified_stop_index: u64,
    pub join_value: u64,
    /// Smallest start whose trajectory contains `join_value`.
    pub joined_start: u64,
    /// Halving steps among the first `modified_stop_index − 1` steps.
    pub divisions_by_2: u64,
}

impl StopRecord {
    pub fn odd_steps(&self) -> u64 {
        self.modified_stop_index - 1 - self.divisions_by_2
    }
}

/// Every value on the trajectories of `1..next`, each mapped to the smallest
/// start whose trajectory contains it.
///
/// Grows one start at a time; a new trajectory only contributes the values
/// before its join point, since everything after it is already present.
#[derive(Clone, Debug)]
pub struct VisitedSet {
    witness: HashMap<u64, u64>,
    next: u64,
    limit: usize,
    step_cap: u64,
}

impl VisitedSet {
    pub fn new(limit: usize, step_cap: u64) -> Self {
        let mut witness = HashMap::new();
        witness.insert(1, 1);
        VisitedSet {
            witness,
            next: 2,
            limit,
            step_cap,
        }
    }

    /// The next start that [`VisitedSet::absorb_next`] will process.
    pub fn next_start(&self) -> u64 {
        self.next
    }

    pub fn len(&self) -> usize {
        self.witness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.witness.is_empty()
    }

    pub fn witness(&self, value: u64) -> Option<u64> {
        self.witness.get(&value).copied()
    }

    /// Modified stopping time of `n` against the current contents.
    pub fn query(&self, n: u64) -> Result<StopRecord> {
        self.scan(n).map(|(record, _)| record)
    }

    fn scan(&self, n: u64) -> Result<(StopRecord, Vec<u64>)> {
        if n < 2 {
            return Err(Error::Config("modified stopping time needs n ≥ 2".into()));
        }
        let mut fresh = Vec::new();
        let mut v = n;
        let mut halvings = 0;
        for index in 1..=self.step_cap {
            if let Some(&joined_start) = self.witness.get(&v) {
                return Ok((
                    StopRecord {
                        n,
                        modified_stop_index: index,
                        join_value: v,
                        joined_start,
                        divisions_by_2: halvings,
                    },
                    fresh,
                ));
            }
            fresh.push(v);
            if v.is_multiple_of(2) {
                halvings += 1;
            }
            v = collatz_step(v)?;
        }
        Err(Error::CapBreach {
            start: n.to_string(),
            cap: self.step_cap,
        })
    }

    /// Computes the record of the next start and adds its new values.
    pub fn absorb_next(&mut self) -> Result<StopRecord> {
        let n = self.next;
        let (record, fresh) = self.scan(n)?;
        if self.witness.len() + fresh.len() > self.limit {
            return Err(Error::MemoryGuard(self.limit));
        }
        for v in fresh {
            self.witness.insert(v, n);
        }
        self.next += 1;
        Ok(record)
    }

    /// Absorbs every start below `end`.
    pub fn absorb_until(&mut self, end: u64) -> Result<()> {
        while self.next < end {
            self.absorb_next()?;
        }
        Ok(())
    }
}

/// Modified stopping time of `n` against the trajectories of `2..n`.
pub fn modified_stopping_time(n: u64, limit: usize, step_cap: u64) -> Result<StopRecord> {
    let mut visited = VisitedSet::new(limit, step_cap);
    visited.absorb_until(n)?;
    visited.query(n)
}

/// Argmax of the modified stopping time over `2..range_max` (ties: smallest `n`).
pub fn longest_modified_stop(range_max: u64, limit: usize, step_cap: u64) -> Result<StopRecord> {
    if range_max < 3 {
        return Err(Error::Config("range must include at least n = 2".into()));
    }
    let mut visited = VisitedSet::new(limit, step_cap);
    let mut best: Option<StopRecord> = None;
    while visited.next_start() < range_max {
        let record = visited.absorb_next()?;
        if best.is_none_or(|b| record.modified_stop_index > b.modified_stop_index) {
            best = Some(record);
        }
    }
    Ok(best.expect("range is non-empty"))
}

/// Outcome of checking a certificate member by member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub class: PatternClass,
    pub k_checked: u64,
    pub first_violation: Option<u64>,
}

impl VerificationReport {
    pub fn verified(&self) -> bool {
        self.first_violation.is_none()
    }
}

fn walk(start: &BigInt, steps: u32) -> BigInt {
    (0..steps).fold(start.clone(), |v, _| collatz_step_big(&v))
}

/// Replays `record` on the concrete members `k = 1..=k_max`.
///
/// Uses only the integer map, never the symbolic trajectory code.
pub fn verify_success_record(record: &SuccessRecord, k_max: u64) -> Result<VerificationReport> {
    if k_max == 0 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    let steps = record.stop_index.saturating_sub(1);
    let mut first_violation = None;
    for k in 1..=k_max {
        let n = record.class.member(k);
        if !n.is_positive() {
            first_violation = Some(k);
            break;
        }
        let value = walk(&n, steps);
        let ok = match record.certificate {
            Certificate::Drop => value < n || n.is_one(),
            Certificate::Join { class, index } => {
                let m = class.member(k);
                let target = walk(&m, index.saturating_sub(1));
                m.is_positive()
                    && value == target
                    && (m < n || (k == 1 && m == n && descends(&n, DEFAULT_STEP_CAP)?))
            }
        };
        if !ok {
            first_violation = Some(k);
            break;
        }
    }
    Ok(VerificationReport {
        class: record.class,
        k_checked: k_max,
        first_violation,
    })
}
