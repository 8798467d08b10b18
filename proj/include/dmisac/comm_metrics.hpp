#pragma once

#include <vector>

#include "dmisac/waveform.hpp"

namespace dmisac {

/// Per-UE downlink SINR terms at one symbol instant. Powers are expectations
/// over the (unit-power) data symbols and the sensing waveform with the
/// realized channels and beams held fixed.
struct SinrBreakdown {
    double desired = 0.0;
    double multiuser = 0.0;
    double sensing = 0.0;
    double noise = 0.0;

    double sinr() const { return desired / (multiuser + sensing + noise); }
};

struct SEReport {
    std::vector<double> per_ue_se;  // bits/s/Hz, averaged over the frame
    double sum_se = 0.0;
};

/// SINR of UE k at instant l. `channels[t][k]` indexes the transmit set the
/// same way as build_frame.
SinrBreakdown ue_sinr(const Scenario& scenario, const TransmitFrame& frame,
                      const std::vector<std::vector<CommChannelRealization>>& channels,
                      int ue, int instant);

/// Frame-averaged spectral efficiency per UE and the network sum.
SEReport sum_se(const Scenario& scenario, const TransmitFrame& frame,
                const std::vector<std::vector<CommChannelRealization>>& channels);

}  // namespace dmisac
