use crate::switch::Schedule;

use super::params::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Slots `1..=d` before the first service period starts.
    PreService,
    RoundRobin,
    NormalClearing,
    BacklogClearing,
}

/// Position of a slot in the three-phase timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseTag {
    /// Service period index `k` (0 during the initial pre-service slots).
    pub period: u64,
    pub phase: Phase,
    /// 1-based slot index within the phase.
    pub slot_in_phase: u64,
}

/// Service period `k` covers slots `kb+d+1 ..= (k+1)b+d`: round-robin on
/// `kb+d+1 ..= (k+1)b`, normal clearing on `(k+1)b+1 ..= kb+d+s`, backlog
/// clearing on `kb+d+s+1 ..= (k+1)b+d`.
pub fn phase_of(tau: u64, p: &PolicyParams) -> PhaseTag {
    assert!(tau >= 1, "slots are 1-based");
    if tau <= p.d {
        return PhaseTag {
            period: 0,
            phase: Phase::PreService,
            slot_in_phase: tau,
        };
    }
    let since = tau - p.d - 1;
    let period = since / p.b;
    let offset = since % p.b + 1;
    let rr = p.round_robin_len();
    let (phase, slot_in_phase) = if offset <= rr {
        (Phase::RoundRobin, offset)
    } else if offset <= rr + p.ell {
        (Phase::NormalClearing, offset - rr)
    } else {
        (Phase::BacklogClearing, offset - rr - p.ell)
    };
    PhaseTag {
        period,
        phase,
        slot_in_phase,
    }
}

/// Cyclic shift schedule: input `i` sends to output `i + m - 1 (mod n)`,
/// for `m` in `1..=n` (0-based ports internally).
pub fn round_robin_schedule(m: usize, n: usize) -> Schedule {
    assert!(m >= 1 && m <= n, "round-robin index {m} outside 1..={n}");
    Schedule::from_assignment((0..n).map(|i| Some((i + m - 1) % n)).collect())
        .expect("cyclic shift is a permutation")
}
