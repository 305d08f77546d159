//! Certification of congruence classes and the modulus-by-modulus search.
//!
//! Each candidate class `b·k − c` gets its symbolic trajectory built and is
//! then certified in one of two ways:
//!
//! * **Drop**: some element is pointwise below the anchor, so every member
//!   reaches a smaller number.
//! * **Join**: some element coincides, as an affine form, with an element of
//!   an earlier class whose anchor is pointwise below this one.
//!
//! The drop test runs over the whole trajectory before any join is looked
//! up. Every enumerated class is registered as a join target, certified or
//! not, since a join only needs the smaller anchor to be covered by the
//! induction hypothesis.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use smallvec::SmallVec;

use crate::affine::{build_trajectory, default_step_cap, AffineForm};
use crate::coverage::{CoverageLedger, DensityCheckpoint, ResidueClass};
use crate::error::{Error, Result};
use crate::oracle;

/// Step cap for the numeric check of the `k = 1` member.
pub const NUMERIC_STEP_CAP: u64 = 1_000_000;

/// The pattern `modulus·k − remainder`, `k ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternClass {
    modulus: u64,
    remainder: u64,
}

impl PatternClass {
    pub fn new(modulus: u64, remainder: u64) -> Result<Self> {
        let invalid = |reason| Error::InvalidClass {
            modulus,
            remainder,
            reason,
        };
        if modulus < 2 || !modulus.is_multiple_of(2) {
            return Err(invalid("modulus must be even and at least 2"));
        }
        if remainder >= modulus {
            return Err(invalid("remainder must be below the modulus"));
        }
        if modulus >= 4 && remainder.is_multiple_of(2) {
            return Err(invalid("searched classes need an odd remainder"));
        }
        Ok(PatternClass { modulus, remainder })
    }

    /// The even-number class `2k`.
    pub fn seed() -> Self {
        PatternClass {
            modulus: 2,
            remainder: 0,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn remainder(&self) -> u64 {
        self.remainder
    }

    pub fn anchor(&self) -> AffineForm {
        AffineForm::new(self.modulus, -BigInt::from(self.remainder)).expect("modulus is at least 2")
    }

    /// `modulus·k − remainder`.
    pub fn member(&self, k: u64) -> BigInt {
        BigInt::from(self.modulus) * k - self.remainder
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.remainder == 0 {
            write!(f, "{}k", self.modulus)
        } else {
            write!(f, "{}k-{}", self.modulus, self.remainder)
        }
    }
}

/// Symbolic trajectory of a class, element 1 being the anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryPattern {
    class: PatternClass,
    elements: Vec<AffineForm>,
}

impl TrajectoryPattern {
    pub fn build(class: PatternClass, step_cap: Option<usize>) -> Result<Self> {
        let anchor = class.anchor();
        let cap = step_cap.unwrap_or_else(|| default_step_cap(&anchor));
        let elements = build_trajectory(&anchor, cap)?;
        Ok(TrajectoryPattern { class, elements })
    }

    pub fn class(&self) -> PatternClass {
        self.class
    }

    pub fn elements(&self) -> &[AffineForm] {
        &self.elements
    }

    /// 1-based element access.
    pub fn element(&self, index: usize) -> Option<&AffineForm> {
        index.checked_sub(1).and_then(|i| self.elements.get(i))
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CertificateKind {
    Drop,
    Join,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Certificate {
    Drop,
    /// Element `stop_index` equals element `index` of `class`'s trajectory.
    Join {
        class: PatternClass,
        index: u32,
    },
}

/// A certified class and its certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SuccessRecord {
    pub class: PatternClass,
    pub stop_index: u32,
    pub certificate: Certificate,
}

impl SuccessRecord {
    pub fn kind(&self) -> CertificateKind {
        match self.certificate {
            Certificate::Drop => CertificateKind::Drop,
            Certificate::Join { .. } => CertificateKind::Join,
        }
    }

    pub fn joined(&self) -> Option<(PatternClass, u32)> {
        match self.certificate {
            Certificate::Drop => None,
            Certificate::Join { class, index } => Some((class, index)),
        }
    }
}

impl fmt::Display for SuccessRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.certificate {
            Certificate::Drop => write!(f, "{} drops at element {}", self.class, self.stop_index),
            Certificate::Join { class, index } => write!(
                f,
                "{} element {} is element {} of {}",
                self.class, self.stop_index, index, class
            ),
        }
    }
}

/// Where a form occurs: element `index` of `class`'s trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Occurrence {
    pub class: PatternClass,
    pub index: u32,
}

/// Registry key: forms small enough for a word pair are stored inline.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum FormKey {
    Small(u64, i64),
    Big(AffineForm),
}

impl From<&AffineForm> for FormKey {
    fn from(f: &AffineForm) -> Self {
        match (f.coeff().to_u64(), f.offset().to_i64()) {
            (Some(a), Some(d)) => FormKey::Small(a, d),
            _ => FormKey::Big(f.clone()),
        }
    }
}

/// Index from affine form to every trajectory element registered so far.
#[derive(Clone, Default)]
pub struct TrajectoryRegistry {
    forms: HashMap<FormKey, SmallVec<[Occurrence; 1]>>,
    classes: HashSet<PatternClass>,
    entries: usize,
    hasher: Sha256,
}

impl fmt::Debug for TrajectoryRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrajectoryRegistry")
            .field("classes", &self.classes.len())
            .field("entries", &self.entries)
            .finish()
    }
}

impl TrajectoryRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, trajectory: &TrajectoryPattern) -> Result<()> {
        let class = trajectory.class();
        if !self.classes.insert(class) {
            return Err(Error::DuplicateRegistration(class));
        }
        self.hasher
            .update(format!("{},{}:", class.modulus, class.remainder));
        for (i, form) in trajectory.elements().iter().enumerate() {
            self.hasher.update(format!("{};", form));
            self.forms
                .entry(FormKey::from(form))
                .or_default()
                .push(Occurrence {
                    class,
                    index: i as u32 + 1,
                });
        }
        self.hasher.update(b"\n");
        self.entries += trajectory.len();
        Ok(())
    }

    /// Prior occurrences of `form`, in registration order.
    pub fn lookup(&self, form: &AffineForm) -> &[Occurrence] {
        self.forms
            .get(&FormKey::from(form))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn contains_class(&self, class: &PatternClass) -> bool {
        self.classes.contains(class)
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Number of registered trajectory elements.
    pub fn entry_count(&self) -> usize {
        self.entries
    }

    /// SHA-256 over everything registered, in registration order.
    pub fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

/// `b = 2^t·3^s` with `t ≥ 1`.
pub fn is_3smooth_even(b: u64) -> bool {
    if b == 0 || !b.is_multiple_of(2) {
        return false;
    }
    let mut n = b >> b.trailing_zeros();
    while n.is_multiple_of(3) {
        n /= 3;
    }
    n == 1
}

/// Even moduli in `(after, max_modulus]`, starting at 4, ascending.
pub fn enumerate_moduli(
    after: u64,
    max_modulus: u64,
    filter_3smooth: bool,
) -> impl Iterator<Item = u64> {
    let start = (after.max(2) + 2) & !1;
    (start..=max_modulus)
        .step_by(2)
        .filter(move |&b| !filter_3smooth || is_3smooth_even(b))
}

/// Odd remainders of one modulus, descending (smaller members first).
pub fn classes_of_modulus(modulus: u64) -> impl Iterator<Item = PatternClass> {
    (1..modulus)
        .rev()
        .step_by(2)
        .map(move |remainder| PatternClass { modulus, remainder })
}

/// All searched classes up to `max_modulus` in canonical order.
pub fn enumerate_classes(
    max_modulus: u64,
    filter_3smooth: bool,
) -> impl Iterator<Item = PatternClass> {
    enumerate_moduli(2, max_modulus, filter_3smooth).flat_map(classes_of_modulus)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub step_cap: Option<usize>,
    /// Only accept join targets whose modulus is `2^t·3^s`.
    pub join_smooth_only: bool,
    pub numeric_cap: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            step_cap: None,
            join_smooth_only: false,
            numeric_cap: NUMERIC_STEP_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub trajectory: TrajectoryPattern,
    pub record: Option<SuccessRecord>,
}

/// Builds the trajectory of `class` and tries to certify it against `registry`.
pub fn check_class(
    class: PatternClass,
    registry: &TrajectoryRegistry,
    options: &CheckOptions,
) -> Result<CheckOutcome> {
    let trajectory = TrajectoryPattern::build(class, options.step_cap)?;
    let record = certify(&trajectory, registry, options)?;
    Ok(CheckOutcome { trajectory, record })
}

fn certify(
    trajectory: &TrajectoryPattern,
    registry: &TrajectoryRegistry,
    options: &CheckOptions,
) -> Result<Option<SuccessRecord>> {
    let class = trajectory.class();
    let anchor = &trajectory.elements()[0];
    let first_member = anchor.evaluate(1);
    // The k = 1 member is checked numerically at most once.
    let mut first_member_ok: Option<bool> = None;
    let mut check_first = || -> Result<bool> {
        if first_member_ok.is_none() {
            first_member_ok = Some(oracle::descends(&first_member, options.numeric_cap)?);
        }
        Ok(first_member_ok == Some(true))
    };

    for (i, form) in trajectory.elements().iter().enumerate().skip(1) {
        if form.strictly_below(anchor, 2) && check_first()? {
            return Ok(Some(SuccessRecord {
                class,
                stop_index: i as u32 + 1,
                certificate: Certificate::Drop,
            }));
        }
    }

    for (i, form) in trajectory.elements().iter().enumerate() {
        for occ in registry.lookup(form) {
            if occ.class == class {
                continue;
            }
            if options.join_smooth_only && !is_3smooth_even(occ.class.modulus) {
                continue;
            }
            let target = occ.class.anchor();
            if !target.strictly_below(anchor, 2) {
                continue;
            }
            let target_first = target.evaluate(1);
            let admissible = match target_first.cmp(&first_member) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => check_first()?,
                std::cmp::Ordering::Greater => false,
            };
            if admissible {
                return Ok(Some(SuccessRecord {
                    class,
                    stop_index: i as u32 + 1,
                    certificate: Certificate::Join {
                        class: occ.class,
                        index: occ.index,
                    },
                }));
            }
        }
    }
    Ok(None)
}

/// Search parameters that affect results (and so are echoed in checkpoints).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub max_modulus: u64,
    pub filter_3smooth: bool,
    /// Skip (neither check nor register) classes the ledger already covers.
    pub skip_covered: bool,
    pub join_smooth_only: bool,
    pub step_cap: Option<usize>,
    /// Verify each emitted record for `k = 1..=k_verify`; 0 disables.
    pub k_verify: u64,
    pub threads: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_modulus: 4,
            filter_3smooth: false,
            skip_covered: false,
            join_smooth_only: false,
            step_cap: None,
            k_verify: 0,
            threads: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_modulus < 4 {
            return Err(Error::Config("max_modulus must be at least 4".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn check_options(&self) -> CheckOptions {
        CheckOptions {
            step_cap: self.step_cap,
            join_smooth_only: self.join_smooth_only,
            numeric_cap: NUMERIC_STEP_CAP,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchCounts {
    pub classes_checked: u64,
    /// Certified classes that added no coverage.
    pub redundant: u64,
    pub skipped_covered: u64,
}

#[derive(Clone, Debug)]
pub struct SearchSummary {
    pub records: usize,
    pub counts: SearchCounts,
    pub moduli_processed: usize,
    pub final_density: BigRational,
    pub checkpoints: Vec<DensityCheckpoint>,
    pub elapsed: Duration,
    /// Slowest modulus of this run and its wall time.
    pub slowest_modulus: Option<(u64, Duration)>,
}

/// Receives results as the search makes progress.
pub trait SearchObserver {
    fn on_record(&mut self, _record: &SuccessRecord) -> Result<()> {
        Ok(())
    }

    /// Called after a modulus is fully processed and the state is consistent.
    fn on_modulus_done(&mut self, _search: &Search) -> Result<()> {
        Ok(())
    }
}

impl SearchObserver for () {}

impl SearchObserver for Vec<SuccessRecord> {
    fn on_record(&mut self, record: &SuccessRecord) -> Result<()> {
        self.push(*record);
        Ok(())
    }
}

/// Saved progress from which a search can continue.
#[derive(Clone, Debug)]
pub struct ResumeState {
    pub frontier_modulus: u64,
    pub records: Vec<SuccessRecord>,
    pub checkpoints: Vec<DensityCheckpoint>,
    pub counts: SearchCounts,
    pub ledger_classes: Vec<ResidueClass>,
    pub registry_digest: String,
}

/// Search state: registry, ledger, emitted records and density history.
#[derive(Debug)]
pub struct Search {
    config: SearchConfig,
    registry: TrajectoryRegistry,
    ledger: CoverageLedger,
    records: Vec<SuccessRecord>,
    checkpoints: Vec<DensityCheckpoint>,
    counts: SearchCounts,
    frontier: u64,
}

impl Search {
    /// Fresh search seeded with the even numbers `2k`.
    pub fn new(config: SearchConfig) -> Result<Self> {
        config.validate()?;
        let mut search = Search {
            config,
            registry: TrajectoryRegistry::new(),
            ledger: CoverageLedger::new(),
            records: Vec::new(),
            checkpoints: Vec::new(),
            counts: SearchCounts::default(),
            frontier: 2,
        };
        let seed = check_class(
            PatternClass::seed(),
            &search.registry,
            &search.config.check_options(),
        )?;
        let record = seed
            .record
            .ok_or_else(|| Error::Checkpoint("seed class failed to certify".into()))?;
        search
            .ledger
            .add_class(&ResidueClass::from_pattern(&record.class));
        search.registry.register(&seed.trajectory)?;
        search.records.push(record);
        search.checkpoints.push(DensityCheckpoint {
            modulus: 2,
            density: search.ledger.density().clone(),
        });
        Ok(search)
    }

    /// Restores a search from saved progress.
    ///
    /// The registry is rebuilt by re-deriving the trajectories of every class
    /// up to the frontier; its digest and the replayed ledger must both match
    /// the saved state.
    pub fn resume(config: SearchConfig, state: ResumeState) -> Result<Self> {
        let mut search = Search::new(config)?;
        if state.records.first() != search.records.first() {
            return Err(Error::Checkpoint(
                "saved records do not start with the seed".into(),
            ));
        }
        let mut pending = state.records[1..].iter().peekable();
        let mut replay = search.ledger.clone();
        for modulus in enumerate_moduli(2, state.frontier_modulus, search.config.filter_3smooth) {
            for class in classes_of_modulus(modulus) {
                if search.config.skip_covered && replay.covers(&ResidueClass::from_pattern(&class))
                {
                    continue;
                }
                let trajectory = TrajectoryPattern::build(class, search.config.step_cap)?;
                search.registry.register(&trajectory)?;
            }
            while let Some(rec) = pending.next_if(|r| r.class.modulus == modulus) {
                replay.add_class(&ResidueClass::from_pattern(&rec.class));
            }
        }
        if pending.next().is_some() {
            return Err(Error::Checkpoint(
                "records beyond the frontier modulus".into(),
            ));
        }
        if search.registry.digest() != state.registry_digest {
            return Err(Error::Checkpoint("registry digest mismatch".into()));
        }
        let saved = CoverageLedger::from_classes(state.ledger_classes)?;
        if saved.classes() != replay.classes() {
            return Err(Error::Checkpoint(
                "ledger does not match the saved records".into(),
            ));
        }
        search.ledger = replay;
        search.records = state.records;
        search.checkpoints = state.checkpoints;
        search.counts = state.counts;
        search.frontier = state.frontier_modulus;
        Ok(search)
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    /// Extends the search bound, e.g. when resuming with a larger target.
    pub fn set_max_modulus(&mut self, max_modulus: u64) {
        self.config.max_modulus = max_modulus;
    }

    pub fn registry(&self) -> &TrajectoryRegistry {
        &self.registry
    }

    pub fn ledger(&self) -> &CoverageLedger {
        &self.ledger
    }

    pub fn records(&self) -> &[SuccessRecord] {
        &self.records
    }

    pub fn checkpoints(&self) -> &[DensityCheckpoint] {
        &self.checkpoints
    }

    pub fn counts(&self) -> &SearchCounts {
        &self.counts
    }

    /// Largest modulus processed so far.
    pub fn frontier(&self) -> u64 {
        self.frontier
    }

    /// Processes every modulus up to `config.max_modulus` not yet done.
    pub fn run(&mut self, observer: &mut dyn SearchObserver) -> Result<SearchSummary> {
        let started = Instant::now();
        let pool = if self.config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.config.threads)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?,
            )
        } else {
            None
        };
        let mut moduli_processed = 0;
        let mut slowest: Option<(u64, Duration)> = None;
        let moduli: Vec<u64> = enumerate_moduli(
            self.frontier,
            self.config.max_modulus,
            self.config.filter_3smooth,
        )
        .collect();
        for modulus in moduli {
            let t0 = Instant::now();
            self.process_modulus(modulus, pool.as_ref(), observer)?;
            observer.on_modulus_done(self)?;
            moduli_processed += 1;
            let dt = t0.elapsed();
            if slowest.is_none_or(|(_, d)| dt > d) {
                slowest = Some((modulus, dt));
            }
        }
        Ok(SearchSummary {
            records: self.records.len(),
            counts: self.counts.clone(),
            moduli_processed,
            final_density: self.ledger.density().clone(),
            checkpoints: self.checkpoints.clone(),
            elapsed: started.elapsed(),
            slowest_modulus: slowest,
        })
    }

    fn process_modulus(
        &mut self,
        modulus: u64,
        pool: Option<&rayon::ThreadPool>,
        observer: &mut dyn SearchObserver,
    ) -> Result<()> {
        let options = self.config.check_options();
        let candidates: Vec<PatternClass> = classes_of_modulus(modulus)
            .filter(|class| {
                !(self.config.skip_covered
                    && self.ledger.covers(&ResidueClass::from_pattern(class)))
            })
            .collect();
        self.counts.skipped_covered += (modulus / 2) - candidates.len() as u64;

        // Classes of one modulus never join each other, so they can all be
        // checked against the same frozen registry.
        let registry = &self.registry;
        let outcomes: Vec<Result<CheckOutcome>> = match pool {
            Some(pool) => pool.install(|| {
                candidates
                    .par_iter()
                    .map(|&c| check_class(c, registry, &options))
                    .collect()
            }),
            None => candidates
                .iter()
                .map(|&c| check_class(c, registry, &options))
                .collect(),
        };

        let mut trajectories = Vec::with_capacity(outcomes.len());
        for outcome in outcomes {
            let outcome = outcome?;
            self.counts.classes_checked += 1;
            if let Some(record) = outcome.record {
                let gain = self
                    .ledger
                    .add_class(&ResidueClass::from_pattern(&record.class));
                if gain.is_zero() {
                    self.counts.redundant += 1;
                } else {
                    if self.config.k_verify > 0 {
                        let report = oracle::verify_success_record(&record, self.config.k_verify)?;
                        if let Some(k) = report.first_violation {
                            return Err(Error::VerificationFailed {
                                class: record.class,
                                k,
                            });
                        }
                    }
                    self.records.push(record);
                    observer.on_record(&record)?;
                }
            }
            trajectories.push(outcome.trajectory);
        }
        for trajectory in &trajectories {
            self.registry.register(trajectory)?;
        }
        self.frontier = modulus;
        self.checkpoints.push(DensityCheckpoint {
            modulus,
            density: self.ledger.density().clone(),
        });
        Ok(())
    }
}

/// Registry holding the seed and every class with modulus below `modulus`.
pub fn registry_below(modulus: u64, options: &CheckOptions) -> Result<TrajectoryRegistry> {
    let mut registry = TrajectoryRegistry::new();
    registry.register(&TrajectoryPattern::build(
        PatternClass::seed(),
        options.step_cap,
    )?)?;
    for class in enumerate_classes(modulus.saturating_sub(1), false) {
        registry.register(&TrajectoryPattern::build(class, options.step_cap)?)?;
    }
    Ok(registry)
}
