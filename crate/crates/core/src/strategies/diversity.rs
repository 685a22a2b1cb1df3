use crate::netmodel::{NetworkTopology, Relay, RelayId};

/// Two relays may not share an id, an AS, or a `/16`.
pub(crate) fn conflicts(a: &Relay, b: &Relay) -> bool {
    a.id == b.id || a.as_number == b.as_number || a.prefix16() == b.prefix16()
}

pub fn passes_diversity(
    topology: &NetworkTopology,
    guard_id: RelayId,
    middle_id: RelayId,
    exit_id: RelayId,
) -> bool {
    let (g, m, e) = (
        topology.relay(guard_id),
        topology.relay(middle_id),
        topology.relay(exit_id),
    );
    !conflicts(g, m) && !conflicts(m, e) && !conflicts(g, e)
}
