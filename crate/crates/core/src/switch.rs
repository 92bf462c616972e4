//! Slot-level dynamics of an `n x n` input-queued switch.
//!
//! Each slot is observed at its beginning, served in the middle by a
//! schedule (a matching between inputs and outputs) and receives Bernoulli
//! arrivals at its end. Counts are kept per virtual output queue; the
//! cumulative arrival and service matrices make the conservation identity
//! `Q = A - S` checkable at any slot.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwitchError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square with n >= 1")]
    NotSquare,
    #[error("schedule is not a matching: {0}")]
    InvalidSchedule(String),
    #[error("eligible count {eligible} exceeds queue ({i},{j}) length {queued}")]
    EligibilityExceedsQueue {
        i: usize,
        j: usize,
        eligible: u64,
        queued: u64,
    },
    #[error(
        "conservation violated at slot {tau}, queue ({i},{j}): Q={queued}, A={arrived}, S={served}"
    )]
    Conservation {
        tau: u64,
        i: usize,
        j: usize,
        queued: u64,
        arrived: u64,
        served: u64,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid arrival configuration: {0}")]
    InvalidConfig(String),
}

/// Square matrix of nonnegative packet counts, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QueueMatrix {
    n: usize,
    cells: Vec<u64>,
}

impl QueueMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "queue matrix needs n >= 1");
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self, SwitchError> {
        let n = rows.len();
        if n == 0 {
            return Err(SwitchError::NotSquare);
        }
        let mut cells = Vec::with_capacity(n * n);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n {
                return Err(SwitchError::NotSquare);
            }
            cells.extend_from_slice(row);
        }
        Ok(Self { n, cells })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> u64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.cells[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.cells[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.cells[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: u64) {
        self.cells[i * self.n + j] += v;
    }

    /// Decrements cell `(i, j)`; panics on underflow.
    #[inline]
    pub fn dec(&mut self, i: usize, j: usize) {
        let c = &mut self.cells[i * self.n + j];
        *c = c.checked_sub(1).expect("queue underflow");
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.cells[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.cells.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n];
        for row in self.cells.chunks(self.n) {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(|&v| v == 0)
    }

    /// Entrywise `self >= other`.
    pub fn dominates(&self, other: &QueueMatrix) -> bool {
        self.n == other.n && self.cells.iter().zip(&other.cells).all(|(a, b)| a >= b)
    }

    /// Moves every packet of `self` into `dst`, leaving `self` zero.
    pub fn drain_into(&mut self, dst: &mut QueueMatrix) {
        assert_eq!(self.n, dst.n);
        for (s, d) in self.cells.iter_mut().zip(dst.cells.iter_mut()) {
            *d += *s;
            *s = 0;
        }
    }

    pub fn clear(&mut self) {
        self.cells.iter_mut().for_each(|c| *c = 0);
    }
}

impl fmt::Debug for QueueMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.cells.chunks(self.n)).finish()
    }
}

/// Text form: one row per line, comma-separated counts.
impl fmt::Display for QueueMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.n) {
            let mut first = true;
            for v in row {
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                write!(f, "{v}")?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

impl FromStr for QueueMatrix {
    type Err = SwitchError;

    /// Blank lines are skipped. Errors carry the 1-based line number.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rows: Vec<Vec<u64>> = Vec::new();
        let mut last_line = 0;
        for (idx, line) in s.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            last_line = line_no;
            let row = trimmed
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<u64>().map_err(|e| SwitchError::Parse {
                        line: line_no,
                        msg: format!("bad entry {:?}: {e}", tok.trim()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(SwitchError::Parse {
                        line: line_no,
                        msg: format!("expected {} entries, found {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(SwitchError::Parse {
                line: 1,
                msg: "empty matrix".into(),
            });
        }
        if rows.len() != rows[0].len() {
            return Err(SwitchError::Parse {
                line: last_line,
                msg: format!("matrix is {}x{}, not square", rows.len(), rows[0].len()),
            });
        }
        QueueMatrix::from_rows(&rows)
    }
}

/// A feasible schedule stored as the output matched to each input.
///
/// Construction goes through checked constructors, so a `Schedule` value is
/// always a matching.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Schedule {
    assign: Vec<Option<usize>>,
}

impl Schedule {
    pub fn empty(n: usize) -> Self {
        Self {
            assign: vec![None; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assign: (0..n).map(Some).collect(),
        }
    }

    /// Builds from an input -> output assignment, rejecting shared outputs.
    pub fn from_assignment(assign: Vec<Option<usize>>) -> Result<Self, SwitchError> {
        let n = assign.len();
        let mut used = vec![false; n];
        for (i, a) in assign.iter().enumerate() {
            if let Some(j) = *a {
                if j >= n {
                    return Err(SwitchError::InvalidSchedule(format!(
                        "input {i} mapped to output {j} >= n"
                    )));
                }
                if std::mem::replace(&mut used[j], true) {
                    return Err(SwitchError::InvalidSchedule(format!(
                        "output {j} matched twice"
                    )));
                }
            }
        }
        Ok(Self { assign })
    }

    pub fn from_matrix<R: AsRef<[u8]>>(sigma: &[R]) -> Result<Self, SwitchError> {
        let n = sigma.len();
        let mut assign = vec![None; n];
        for (i, row) in sigma.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(SwitchError::NotSquare);
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 if assign[i].is_none() => assign[i] = Some(j),
                    1 => {
                        return Err(SwitchError::InvalidSchedule(format!(
                            "input {i} matched twice"
                        )))
                    }
                    other => {
                        return Err(SwitchError::InvalidSchedule(format!(
                            "entry ({i},{j}) = {other} is not 0/1"
                        )))
                    }
                }
            }
        }
        Self::from_assignment(assign)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.assign.len()
    }

    #[inline]
    pub fn output_of(&self, input: usize) -> Option<usize> {
        self.assign[input]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assign
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.assign[i] == Some(j)
    }

    /// Matched `(input, output)` pairs in input order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|j| (i, j)))
    }

    pub fn size(&self) -> usize {
        self.assign.iter().filter(|a| a.is_some()).count()
    }

    pub fn is_full_permutation(&self) -> bool {
        self.size() == self.n()
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        let mut m = vec![vec![0u8; n]; n];
        for (i, j) in self.pairs() {
            m[i][j] = 1;
        }
        m
    }

    /// Sum of queue lengths under the matched cells.
    pub fn weight(&self, q: &QueueMatrix) -> u64 {
        self.pairs().map(|(i, j)| q.get(i, j)).sum()
    }
}

/// True iff `sigma` is a square 0/1 matrix whose rows and columns each sum
/// to at most one.
pub fn is_valid_schedule<R: AsRef<[u8]>>(sigma: &[R]) -> bool {
    let n = sigma.len();
    let mut col = vec![0u32; n];
    for row in sigma {
        let row = row.as_ref();
        if row.len() != n {
            return false;
        }
        let mut r = 0u32;
        for (j, &v) in row.iter().enumerate() {
            if v > 1 {
                return false;
            }
            r += v as u32;
            col[j] += v as u32;
        }
        if r > 1 {
            return false;
        }
    }
    col.iter().all(|&c| c <= 1)
}

/// Uniform Bernoulli arrival configuration: every queue receives a packet
/// in each slot with probability `rho / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalConfig {
    pub n: usize,
    pub rho: f64,
    pub per_queue_rate: f64,
    pub seed: u64,
}

impl ArrivalConfig {
    pub fn new(n: usize, rho: f64, seed: u64) -> Result<Self, SwitchError> {
        if n == 0 {
            return Err(SwitchError::InvalidConfig("n must be >= 1".into()));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(SwitchError::InvalidConfig(format!(
                "load {rho} outside (0, 1)"
            )));
        }
        Ok(Self {
            n,
            rho,
            per_queue_rate: rho / n as f64,
            seed,
        })
    }

    /// Load `rho = 1 - 1/f_n`, with `f_n >= 2` an integer gap parameter.
    pub fn from_gap(n: usize, f_n: u64, seed: u64) -> Result<Self, SwitchError> {
        if f_n < 2 {
            return Err(SwitchError::InvalidConfig(format!("f_n = {f_n} < 2")));
        }
        Self::new(n, 1.0 - 1.0 / f_n as f64, seed)
    }
}

/// Per-replication random stream.
///
/// The split function is: seed a ChaCha8 generator with `seed` through
/// `seed_from_u64`, then select ChaCha stream number `stream`. Distinct
/// `(seed, stream)` pairs give non-overlapping sequences, so replications can
/// run in any order or in parallel.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One slot of arrivals for `cfg`, drawn row-major (`i` outer, `j` inner).
pub fn gen_arrivals<R: Rng + ?Sized>(cfg: &ArrivalConfig, rng: &mut R) -> Vec<u8> {
    let mut out = vec![0u8; cfg.n * cfg.n];
    fill_bernoulli(cfg.per_queue_rate, rng, &mut out);
    out
}

fn fill_bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R, out: &mut [u8]) {
    let dist = Bernoulli::new(p).expect("probability in [0, 1]");
    for x in out.iter_mut() {
        *x = dist.sample(rng) as u8;
    }
}

/// Source of per-slot arrival matrices (row-major 0/1 entries).
pub trait ArrivalSource {
    fn fill(&mut self, out: &mut [u8]);
}

/// Independent Bernoulli arrivals at a fixed per-queue rate.
pub struct BernoulliArrivals<R = ChaCha8Rng> {
    dist: Bernoulli,
    rng: R,
}

impl BernoulliArrivals<ChaCha8Rng> {
    pub fn from_config(cfg: &ArrivalConfig, stream: u64) -> Self {
        Self::with_rate(cfg.per_queue_rate, replication_rng(cfg.seed, stream))
    }
}

impl<R: Rng> BernoulliArrivals<R> {
    /// Any `p` in `[0, 1]` is accepted, including the degenerate endpoints.
    pub fn with_rate(p: f64, rng: R) -> Self {
        Self {
            dist: Bernoulli::new(p).expect("probability in [0, 1]"),
            rng,
        }
    }
}

impl<R: Rng> ArrivalSource for BernoulliArrivals<R> {
    fn fill(&mut self, out: &mut [u8]) {
        for x in out.iter_mut() {
            *x = self.dist.sample(&mut self.rng) as u8;
        }
    }
}

/// Arrival source that never produces packets.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoArrivals;

impl ArrivalSource for NoArrivals {
    fn fill(&mut self, out: &mut [u8]) {
        out.iter_mut().for_each(|x| *x = 0);
    }
}

/// Replays a fixed list of arrival matrices, then produces nothing.
#[derive(Clone, Debug, Default)]
pub struct ScriptedArrivals {
    slots: std::collections::VecDeque<Vec<u8>>,
}

impl ScriptedArrivals {
    pub fn new(slots: impl IntoIterator<Item = Vec<u8>>) -> Self {
        Self {
            slots: slots.into_iter().collect(),
        }
    }
}

impl ArrivalSource for ScriptedArrivals {
    fn fill(&mut self, out: &mut [u8]) {
        match self.slots.pop_front() {
            Some(s) => out.copy_from_slice(&s),
            None => out.iter_mut().for_each(|x| *x = 0),
        }
    }
}

/// Per-class view of the queues used by policies that only serve part of
/// each queue (for example the current batch but not the backlog).
///
/// The defaults treat the whole queue as one class.
pub trait ClassAccounting {
    /// Packets of queue `(i, j)` that may be served this slot; must not
    /// exceed `queued`.
    #[inline]
    fn eligible(&self, _i: usize, _j: usize, queued: u64) -> u64 {
        queued
    }

    #[inline]
    fn on_served(&mut self, _i: usize, _j: usize) {}

    #[inline]
    fn on_arrival(&mut self, _i: usize, _j: usize) {}
}

/// Whole-queue eligibility, no classes.
#[derive(Clone, Copy, Debug, Default)]
pub struct WholeQueue;

impl ClassAccounting for WholeQueue {}

/// Result of one `advance_slot`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub served: u64,
    pub wasted: u64,
    pub arrived: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchState {
    tau: u64,
    queues: QueueMatrix,
    cum_arrivals: QueueMatrix,
    cum_service: QueueMatrix,
    wasted_service: u64,
    total: u64,
    last_arrivals: Vec<u8>,
}

impl SwitchState {
    /// Empty switch at slot 1.
    pub fn new(n: usize) -> Self {
        Self {
            tau: 1,
            queues: QueueMatrix::zeros(n),
            cum_arrivals: QueueMatrix::zeros(n),
            cum_service: QueueMatrix::zeros(n),
            wasted_service: 0,
            total: 0,
            last_arrivals: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.queues.n()
    }

    /// Index of the current slot (1-based).
    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn queues(&self) -> &QueueMatrix {
        &self.queues
    }

    pub fn cum_arrivals(&self) -> &QueueMatrix {
        &self.cum_arrivals
    }

    pub fn cum_service(&self) -> &QueueMatrix {
        &self.cum_service
    }

    pub fn wasted_service(&self) -> u64 {
        self.wasted_service
    }

    /// Total number of queued packets.
    pub fn total_queued(&self) -> u64 {
        self.total
    }

    /// Arrival matrix of the most recent slot, row-major.
    pub fn last_arrivals(&self) -> &[u8] {
        &self.last_arrivals
    }

    /// Serves one packet from every matched queue that has an eligible
    /// packet; matched queues without one count as wasted service.
    /// Returns the number of packets removed.
    pub fn apply_schedule<C: ClassAccounting + ?Sized>(
        &mut self,
        s: &Schedule,
        classes: &mut C,
    ) -> Result<u64, SwitchError> {
        let n = self.n();
        if s.n() != n {
            return Err(SwitchError::DimensionMismatch {
                expected: n,
                got: s.n(),
            });
        }
        let mut served = 0;
        for (i, j) in s.pairs() {
            let queued = self.queues.get(i, j);
            let eligible = classes.eligible(i, j, queued);
            if eligible > queued {
                return Err(SwitchError::EligibilityExceedsQueue {
                    i,
                    j,
                    eligible,
                    queued,
                });
            }
            if eligible > 0 {
                self.queues.dec(i, j);
                self.cum_service.add(i, j, 1);
                classes.on_served(i, j);
                served += 1;
            } else {
                self.wasted_service += 1;
            }
        }
        self.total -= served;
        Ok(served)
    }

    /// Adds an arrival matrix (row-major 0/1) at the end of the slot.
    pub fn add_arrivals<C: ClassAccounting + ?Sized>(
        &mut self,
        arrivals: &[u8],
        classes: &mut C,
    ) -> Result<u64, SwitchError> {
        let n = self.n();
        if arrivals.len() != n * n {
            return Err(SwitchError::DimensionMismatch {
                expected: n * n,
                got: arrivals.len(),
            });
        }
        let mut count = 0;
        for (idx, &a) in arrivals.iter().enumerate() {
            if a != 0 {
                let (i, j) = (idx / n, idx % n);
                self.queues.add(i, j, 1);
                self.cum_arrivals.add(i, j, 1);
                classes.on_arrival(i, j);
                count += 1;
            }
        }
        self.total += count;
        Ok(count)
    }

    /// One full slot: serve with `s`, draw arrivals from `source` and route
    /// them through `classes`, then move to the next slot.
    pub fn advance_slot<C, A>(
        &mut self,
        s: &Schedule,
        classes: &mut C,
        source: &mut A,
    ) -> Result<SlotOutcome, SwitchError>
    where
        C: ClassAccounting + ?Sized,
        A: ArrivalSource + ?Sized,
    {
        let wasted_before = self.wasted_service;
        let served = self.apply_schedule(s, classes)?;
        let mut buf = std::mem::take(&mut self.last_arrivals);
        source.fill(&mut buf);
        let arrived = self.add_arrivals(&buf, classes);
        self.last_arrivals = buf;
        let arrived = arrived?;
        self.tau += 1;
        Ok(SlotOutcome {
            served,
            wasted: self.wasted_service - wasted_before,
            arrived,
        })
    }

    /// Checks `Q = A - S` entrywise and the cached total.
    pub fn check_conservation(&self) -> Result<(), SwitchError> {
        let n = self.n();
        let q = self.queues.cells();
        let a = self.cum_arrivals.cells();
        let s = self.cum_service.cells();
        let mut total = 0;
        for idx in 0..n * n {
            total += q[idx];
            if s[idx] > a[idx] || q[idx] != a[idx] - s[idx] {
                return Err(SwitchError::Conservation {
                    tau: self.tau,
                    i: idx / n,
                    j: idx % n,
                    queued: q[idx],
                    arrived: a[idx],
                    served: s[idx],
                });
            }
        }
        if total != self.total {
            return Err(SwitchError::Conservation {
                tau: self.tau,
                i: n,
                j: n,
                queued: self.total,
                arrived: total,
                served: 0,
            });
        }
        Ok(())
    }
}
