//! Allocation-light basic flooding for graphs of at most 64 nodes, used by
//! the exhaustive sweeps. State is one sender bitmask per node; it agrees
//! with [`Instance::run`](super::Instance::run) on static synchronous
//! single-message runs with all initiations in round 0.

/// Runs basic flooding from the `sources` bitmask and writes the round-set
/// bitmasks `R_0, R_1, ..., R_last` into `round_sets`. Returns `None` if
/// more than `max_rounds` rounds would be needed.
pub fn basic_round_sets(adjacency: &[u64], sources: u64, max_rounds: usize, round_sets: &mut Vec<u64>) -> Option<u32> {
    let n = adjacency.len();
    assert!(n <= 64, "kernel handles at most 64 nodes");
    round_sets.clear();
    if sources == 0 {
        round_sets.push(0);
        return Some(0);
    }
    round_sets.push(sources);

    // received[v] = nodes that sent to v in the current round
    let mut received = [0u64; 64];
    let mut next = [0u64; 64];
    let mut bits = sources;
    while bits != 0 {
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let mut targets = adjacency[v];
        while targets != 0 {
            let u = targets.trailing_zeros() as usize;
            targets &= targets - 1;
            received[u] |= 1 << v;
        }
    }

    loop {
        let mut set = 0u64;
        for (v, &r) in received[..n].iter().enumerate() {
            if r != 0 {
                set |= 1 << v;
            }
        }
        if set == 0 {
            break;
        }
        if round_sets.len() > max_rounds {
            return None;
        }
        round_sets.push(set);

        next[..n].fill(0);
        let mut bits = set;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let mut targets = adjacency[v] & !received[v];
            while targets != 0 {
                let u = targets.trailing_zeros() as usize;
                targets &= targets - 1;
                next[u] |= 1 << v;
            }
        }
        received[..n].copy_from_slice(&next[..n]);
    }
    Some(round_sets.len() as u32 - 1)
}
