//! Empirical laws observed in search output: which moduli succeed, how the
//! remainders of a join relate when the modulus halves, and the dead zone
//! above `3·2^(t−1)`.

use std::collections::BTreeSet;

use crate::search::{is_3smooth_even, PatternClass, SuccessRecord};

/// Join with `b = 2d` and whether `c − e` has the form `2^t·3^s`, `t ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalvingJoin {
    pub class: PatternClass,
    pub joined: PatternClass,
    pub difference: i128,
    pub smooth: bool,
}

/// Largest successful modulus strictly inside `(2^t, 2^(t+1))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeadZoneRow {
    pub t: u32,
    pub largest: u64,
    /// `3·2^(t−1)`.
    pub midpoint: u64,
}

impl DeadZoneRow {
    pub fn within(&self) -> bool {
        self.largest <= self.midpoint
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuliReport {
    /// Successful moduli, ascending, with their `2^t·3^s` status.
    pub moduli: Vec<(u64, bool)>,
    pub halving_joins: Vec<HalvingJoin>,
    pub dead_zone: Vec<DeadZoneRow>,
}

impl ModuliReport {
    pub fn all_moduli_smooth(&self) -> bool {
        self.moduli.iter().all(|&(_, smooth)| smooth)
    }

    pub fn all_halving_joins_smooth(&self) -> bool {
        self.halving_joins.iter().all(|j| j.smooth)
    }

    pub fn dead_zone_respected(&self) -> bool {
        self.dead_zone.iter().all(DeadZoneRow::within)
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }
}

pub fn analyze_moduli(records: &[SuccessRecord]) -> ModuliReport {
    let moduli: BTreeSet<u64> = records.iter().map(|r| r.class.modulus()).collect();

    let halving_joins = records
        .iter()
        .filter_map(|r| {
            let (joined, _) = r.joined()?;
            if r.class.modulus() != 2 * joined.modulus() {
                return None;
            }
            let difference = r.class.remainder() as i128 - joined.remainder() as i128;
            let smooth = difference > 0 && u64::try_from(difference).is_ok_and(is_3smooth_even);
            Some(HalvingJoin {
                class: r.class,
                joined,
                difference,
                smooth,
            })
        })
        .collect();

    let mut dead_zone: Vec<DeadZoneRow> = Vec::new();
    for &b in &moduli {
        if b.is_power_of_two() || b < 4 {
            continue;
        }
        let t = 63 - b.leading_zeros();
        let row = DeadZoneRow {
            t,
            largest: b,
            midpoint: 3 << (t - 1),
        };
        match dead_zone.last_mut() {
            Some(last) if last.t == t => *last = row,
            _ => dead_zone.push(row),
        }
    }

    ModuliReport {
        moduli: moduli
            .into_iter()
            .map(|b| (b, is_3smooth_even(b)))
            .collect(),
        halving_joins,
        dead_zone,
    }
}
