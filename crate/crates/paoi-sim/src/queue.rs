//! Zero-buffer queue state, tracked for both disciplines at once.
//!
//! With at most one packet in the system, the busy/idle trajectory does not
//! depend on the discipline: an arrival to a busy server either replaces the
//! packet in service (preemptive) or is dropped (non-preemptive), and in
//! both cases the server stays busy until a delivery succeeds. Under shared
//! arrival, medium-access, and delivery randomness the two disciplines
//! therefore deliver on exactly the same slots and differ only in the birth
//! time of what they deliver — so one pass tracks both, and per-delivery
//! peak ages are directly comparable link by link.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One successful delivery, as seen by one discipline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    /// Slot whose end carried the delivery.
    pub slot: u64,
    /// Arrival slot of the delivered packet.
    pub birth: u64,
    /// Slot on which the server last turned busy (start of this busy
    /// period; equals `birth` for the non-preemptive queue).
    pub busy_start: u64,
    /// Recorded peak age, `slot - previous_birth + 1`; absent on a link's
    /// first-ever delivery, which has no previous packet to age against.
    pub peak: Option<u64>,
}

/// Why a delivery trace is not a valid peak-age sample path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum IdentityViolation {
    #[error("delivery {index}: recorded peak {got}, but slots and births imply {expected}")]
    Peak {
        index: usize,
        expected: u64,
        got: u64,
    },
    #[error("delivery {index}: slot {slot} does not increase over previous slot {prev}")]
    SlotOrder { index: usize, slot: u64, prev: u64 },
    #[error("delivery {index}: birth {birth} outside busy period [{busy_start}, {slot}]")]
    BirthRange {
        index: usize,
        birth: u64,
        busy_start: u64,
        slot: u64,
    },
    #[error("delivery {index}: first delivery must carry no peak")]
    UnexpectedFirstPeak { index: usize },
}

/// Check the defining recurrence of the recorded peaks: each peak equals the
/// inter-delivery gap plus the previous packet's system time, i.e.
/// `peak_k = slot_k - birth_{k-1} + 1`, with the first delivery carrying no
/// peak. Returns the first violation with its index, or `Ok(())`.
pub fn paoi_identity_check(trace: &[DeliveryRecord]) -> Result<(), IdentityViolation> {
    for (index, rec) in trace.iter().enumerate() {
        if !(rec.busy_start <= rec.birth && rec.birth <= rec.slot) {
            return Err(IdentityViolation::BirthRange {
                index,
                birth: rec.birth,
                busy_start: rec.busy_start,
                slot: rec.slot,
            });
        }
        if index == 0 {
            if rec.peak.is_some() {
                return Err(IdentityViolation::UnexpectedFirstPeak { index });
            }
            continue;
        }
        let prev = &trace[index - 1];
        if rec.slot <= prev.slot {
            return Err(IdentityViolation::SlotOrder {
                index,
                slot: rec.slot,
                prev: prev.slot,
            });
        }
        let expected = rec.slot - prev.birth + 1;
        match rec.peak {
            Some(got) if got != expected => {
                return Err(IdentityViolation::Peak {
                    index,
                    expected,
                    got,
                });
            }
            None => {
                return Err(IdentityViolation::Peak {
                    index,
                    expected,
                    got: 0,
                });
            }
            _ => {}
        }
    }
    Ok(())
}

/// Mutable per-link state for the slot loop, carrying both disciplines.
#[derive(Debug, Clone, Default)]
pub struct LinkState {
    pub busy: bool,
    busy_start: u64,
    birth_np: u64,
    birth_p: u64,
    prev_birth_np: Option<u64>,
    prev_birth_p: Option<u64>,
    // In-window tallies.
    pub busy_slots: u64,
    pub attempts: u64,
    pub successes: u64,
    pub peak_sum_np: f64,
    pub peak_sum_p: f64,
    pub peaks: u64,
}

impl LinkState {
    /// A packet arrives at the start of `slot`. An idle server starts a busy
    /// period with it; a busy server keeps its packet (non-preemptive view)
    /// and simultaneously treats the newcomer as the packet in service
    /// (preemptive view).
    pub fn arrival(&mut self, slot: u64) {
        if self.busy {
            self.birth_p = slot;
        } else {
            self.busy = true;
            self.busy_start = slot;
            self.birth_np = slot;
            self.birth_p = slot;
        }
    }

    /// The transmission at the end of `slot` succeeded. Records peaks (when
    /// a previous delivery exists and the slot is inside the measurement
    /// window) and returns the per-discipline delivery records.
    pub fn deliver(&mut self, slot: u64, in_window: bool) -> (DeliveryRecord, DeliveryRecord) {
        debug_assert!(self.busy, "delivery on an idle server");
        let peak_np = self.prev_birth_np.map(|b| slot - b + 1);
        let peak_p = self.prev_birth_p.map(|b| slot - b + 1);
        if in_window {
            self.successes += 1;
            if let (Some(a_np), Some(a_p)) = (peak_np, peak_p) {
                self.peak_sum_np += a_np as f64;
                self.peak_sum_p += a_p as f64;
                self.peaks += 1;
            }
        }
        let rec_np = DeliveryRecord {
            slot,
            birth: self.birth_np,
            busy_start: self.busy_start,
            peak: peak_np,
        };
        let rec_p = DeliveryRecord {
            slot,
            birth: self.birth_p,
            busy_start: self.busy_start,
            peak: peak_p,
        };
        self.prev_birth_np = Some(self.birth_np);
        self.prev_birth_p = Some(self.birth_p);
        self.busy = false;
        (rec_np, rec_p)
    }
}
