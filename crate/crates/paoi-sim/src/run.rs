//! The slot loop.

use crate::config::{Mode, SimConfig, SimError};
use crate::network::{conditional_success, success_factors, Network};
use crate::queue::{DeliveryRecord, LinkState};
use crate::rng::{draw, Stream};
use crate::summary::SpatialSummary;

/// Per-delivery records for every link, one list per discipline, in slot
/// order within each link.
#[derive(Debug, Clone)]
pub struct SimTraces {
    pub non_preemptive: Vec<Vec<DeliveryRecord>>,
    pub preemptive: Vec<Vec<DeliveryRecord>>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub summary: SpatialSummary,
    /// Present when the config asked for trace recording.
    pub traces: Option<SimTraces>,
}

/// Run one configured simulation to completion.
///
/// Slot structure: arrivals land at the slot start (an arrival to an idle
/// server can be delivered within the same slot, so ages bottom out at one);
/// busy links transmit when their medium-access coin fires; transmissions
/// succeed with the exact conditional probability given this slot's active
/// set, and successes empty the server at the slot end.
///
/// Fading never has to be materialized: with unit-mean exponential gains,
/// the probability that a receiver's signal beats `beta` times the
/// interference from the active set is the product of its per-interferer
/// success factors, and since each pairwise gain would enter exactly one
/// receiver's test in exactly one slot, drawing one Bernoulli per
/// transmitting link per slot from that product reproduces the joint law of
/// all delivery outcomes exactly.
///
/// In [`Mode::DominantStep1`] every transmitter radiates whenever its coin
/// fires (dummy packets when idle), while deliveries still require a busy
/// queue; the same coins drive both roles, so the mode changes only the
/// interference environment, not the traffic.
pub fn run(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    for w in cfg.validate()? {
        log::warn!("{w}");
    }
    let window = cfg.window();
    let net = match cfg.mode {
        Mode::SingleLink => Network::single_link(&cfg.network, window, cfg.seed),
        _ => Network::generate(&cfg.network, window, cfg.seed)?,
    };
    let n = net.n_links();
    let factors = success_factors(&net, &cfg.network);

    let lambda_a = cfg.traffic.lambda_a;
    let xi = cfg.network.xi;
    let seed = net.seed_used;
    let total_slots = cfg
        .warmup_slots
        .checked_add(cfg.measure_slots)
        .ok_or_else(|| SimError::InvalidConfig {
            detail: "warmup_slots + measure_slots overflows".into(),
        })?;

    let mut states = vec![LinkState::default(); n];
    let mut traces = cfg.record_traces.then(|| SimTraces {
        non_preemptive: vec![Vec::new(); n],
        preemptive: vec![Vec::new(); n],
    });
    // Reused active-set buffers; `radiating` is what interferes, `sending`
    // is who can actually deliver. They coincide except in the dominant
    // mode, where idle links radiate dummy packets.
    let mut radiating: Vec<usize> = Vec::with_capacity(n);
    let mut sending: Vec<usize> = Vec::with_capacity(n);

    for slot in 1..=total_slots {
        let in_window = slot > cfg.warmup_slots;

        for (i, st) in states.iter_mut().enumerate() {
            if draw(seed, Stream::Arrival, slot, i as u64, 0) < lambda_a {
                st.arrival(slot);
            }
        }

        radiating.clear();
        sending.clear();
        for (i, st) in states.iter_mut().enumerate() {
            let mac = draw(seed, Stream::Mac, slot, i as u64, 0) < xi;
            let sends = st.busy && mac;
            let radiates = match cfg.mode {
                Mode::DominantStep1 => mac,
                Mode::Original | Mode::SingleLink => sends,
            };
            if radiates {
                radiating.push(i);
            }
            if sends {
                sending.push(i);
            }
            if in_window {
                if st.busy {
                    st.busy_slots += 1;
                }
                if sends {
                    st.attempts += 1;
                }
            }
        }

        for &i in &sending {
            let p = conditional_success(&factors, n, i, &radiating);
            if draw(seed, Stream::Delivery, slot, i as u64, 0) < p {
                let (rec_np, rec_p) = states[i].deliver(slot, in_window);
                if let Some(t) = traces.as_mut() {
                    t.non_preemptive[i].push(rec_np);
                    t.preemptive[i].push(rec_p);
                }
            }
        }
    }

    let summary = SpatialSummary::build(cfg, &net, &states);
    Ok(SimOutput { summary, traces })
}
