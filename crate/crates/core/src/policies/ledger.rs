use crate::switch::{ClassAccounting, QueueMatrix};

/// Packet classes tracked by the batching policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    /// Packets left over from earlier batches.
    Backlog,
    /// The batch whose service period is in progress.
    Current,
    /// The batch arriving while the current one is being cleared.
    Next,
}

/// Per-queue packet counts split by class, plus per-period backlog scalars.
///
/// The three classes always add up to the switch's queue matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLedger {
    pub backlog: QueueMatrix,
    pub batch_cur: QueueMatrix,
    pub batch_next: QueueMatrix,
    /// Index of the service period in progress (or about to start).
    pub k: u64,
    /// Backlog at the start of service period `k`.
    pub backlog_start: u64,
    /// Packets of batch `k` left after its normal clearing, once known.
    pub newly_backlogged: Option<u64>,
    serve: Option<Class>,
    arrive: Class,
}

impl BatchLedger {
    pub fn new(n: usize) -> Self {
        Self {
            backlog: QueueMatrix::zeros(n),
            batch_cur: QueueMatrix::zeros(n),
            batch_next: QueueMatrix::zeros(n),
            k: 0,
            backlog_start: 0,
            newly_backlogged: None,
            serve: None,
            arrive: Class::Current,
        }
    }

    pub fn class(&self, c: Class) -> &QueueMatrix {
        match c {
            Class::Backlog => &self.backlog,
            Class::Current => &self.batch_cur,
            Class::Next => &self.batch_next,
        }
    }

    fn class_mut(&mut self, c: Class) -> &mut QueueMatrix {
        match c {
            Class::Backlog => &mut self.backlog,
            Class::Current => &mut self.batch_cur,
            Class::Next => &mut self.batch_next,
        }
    }

    /// Selects the class served and the class receiving arrivals for the
    /// coming slot. `None` serves nothing.
    pub fn route(&mut self, serve: Option<Class>, arrive: Class) {
        self.serve = serve;
        self.arrive = arrive;
    }

    pub fn routing(&self) -> (Option<Class>, Class) {
        (self.serve, self.arrive)
    }

    /// Moves what remains of the current batch into the backlog and returns
    /// how many packets moved.
    pub fn backlog_current(&mut self) -> u64 {
        let moved = self.batch_cur.total();
        self.batch_cur.drain_into(&mut self.backlog);
        moved
    }

    /// Ends period `k`: the next batch becomes current.
    pub fn promote(&mut self) {
        debug_assert!(self.batch_cur.is_zero());
        std::mem::swap(&mut self.batch_cur, &mut self.batch_next);
        self.batch_next.clear();
        self.k += 1;
        self.newly_backlogged = None;
    }

    /// Checks that the classes add up to `q`.
    pub fn consistent_with(&self, q: &QueueMatrix) -> bool {
        let (a, b, c) = (
            self.backlog.cells(),
            self.batch_cur.cells(),
            self.batch_next.cells(),
        );
        q.cells()
            .iter()
            .enumerate()
            .all(|(idx, &v)| a[idx] + b[idx] + c[idx] == v)
    }
}

impl ClassAccounting for BatchLedger {
    #[inline]
    fn eligible(&self, i: usize, j: usize, _queued: u64) -> u64 {
        match self.serve {
            Some(c) => self.class(c).get(i, j),
            None => 0,
        }
    }

    #[inline]
    fn on_served(&mut self, i: usize, j: usize) {
        let c = self
            .serve
            .expect("service only happens from a routed class");
        self.class_mut(c).dec(i, j);
    }

    #[inline]
    fn on_arrival(&mut self, i: usize, j: usize) {
        let c = self.arrive;
        self.class_mut(c).add(i, j, 1);
    }
}
