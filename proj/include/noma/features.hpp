#pragma once

#include <vector>

#include "noma/netmodel.hpp"

namespace noma {

// ---------------------------------------------------------------------------
// Learner I/O layout. Networks run once per station over a fixed number of
// user slots; a slot carries the user's per-subchannel gains in dB plus an
// occupancy flag (the flag is what pads stations serving fewer users).
// Slot order is ascending user index.
// ---------------------------------------------------------------------------

struct SlotLayout {
    int slots = 0;
    int n_subchannels = 0;

    int feature_dim() const { return slots * (n_subchannels + 1); }
    int subchannel_label_dim() const { return slots * n_subchannels; }
    int power_label_dim() const { return slots; }
};

// Slots sized to the association cap, so any cap-respecting association fits.
SlotLayout slot_layout(const Scenario& sc);

constexpr double kPadGainDb = -250.0;

std::vector<int> station_slot_users(const Association& x, int b);

// Raw (un-normalized) feature block for station b. Throws InfeasibleError
// when the station serves more users than there are slots.
Vec station_features(const Scenario& sc, const Association& x, int b);

// 0/1 targets: slot-major, one entry per (slot, subchannel).
Vec station_subchannel_labels(const Scenario& sc, const Association& x,
                              const SubchannelAlloc& s, int b);

// Per-slot transmit power as a fraction of the station's budget.
Vec station_power_labels(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                         const PowerAlloc& p, int b);

// Stitch per-station learner outputs into a [B][M][N] score tensor for
// project_to_feasible. Entries of non-associated pairs are zero and ignored.
Vec assemble_subchannel_scores(const Scenario& sc, const Association& x,
                               const std::vector<Vec>& per_station_scores);

// Turn per-slot budget fractions into a PowerAlloc on the users' occupied
// subchannels: clamp to [0, 1], scale down any station over budget.
PowerAlloc assemble_power(const Scenario& sc, const Association& x, const SubchannelAlloc& s,
                          const std::vector<Vec>& per_station_fractions);

}  // namespace noma
