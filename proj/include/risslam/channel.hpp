#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "risslam/environment.hpp"
#include "risslam/waveform.hpp"

namespace risslam {

using Complex = std::complex<double>;

/// Uniform linear Rx array; antenna phases are taken relative to the phase
/// center. The array axis lies in the horizontal plane at azimuth
/// `axis_azimuth_rad` (the agent heading).
struct ArrayGeometry {
    int count = 4;
    double spacing_m = 0.0;  // default lambda/2, set by make()
    double axis_azimuth_rad = 0.0;

    static ArrayGeometry make(int count, double wavelength_m, double axis_azimuth_rad);

    // Offset of antenna l from the phase center along the array axis.
    double offset_m(int l) const { return (l - 0.5 * (count - 1)) * spacing_m; }

    // b_l(phi): unit-magnitude response for a plane wave with azimuth-of-
    // arrival phi (bearing from Rx toward the source).
    Complex response(int l, double aoa_rad, double wavelength_m) const;
};

/// Discrete phase-shift matrix Xi. Levels h are stored row-major with values
/// in {1, ..., H}; element (n, m) applies phase h(n, m) * 2*pi / H.
struct PhaseConfig {
    int rows = 0;
    int cols = 0;
    int levels = 1;  // H
    std::vector<int> h;

    static PhaseConfig uniform(int rows, int cols, int levels, int value);

    int flat(int n, int m) const { return n * cols + m; }
    double phase(int n, int m) const { return h[flat(n, m)] * 2.0 * kPi / levels; }
    bool valid() const;
};

/// One resolvable multipath component at the Rx phase center.
struct Mpc {
    double delay_s = 0.0;
    double aoa_rad = 0.0;
    Complex gain{0.0, 0.0};
    int landmark_index = -1;
    LandmarkKind kind = LandmarkKind::Direct;
    std::vector<Complex> antenna_response;  // b_l(aoa), length L
    bool near_field = false;                // RIS far-field validity flag
};

struct ReceivedSignal {
    Eigen::MatrixXcd samples;  // L x U
    double noise_variance = 0.0;
    double sample_rate_hz = 0.0;
};

// Eq.-(2) style single-reflection gain for a path of unfolded length d.
Complex reflector_gain(double length_m, const Waveform& wf, double antenna_gain,
                       double coefficient);

// Eq.-(3) style scatterer gain with legs (Tx->S, S->Rx).
Complex scatterer_gain(double leg_tx_m, double leg_rx_m, const Waveform& wf,
                       double antenna_gain, double rcs_m2);

// Exact per-element RIS gain (oracle for the far-field aggregate).
Complex ris_element_gain(const RisPanel& panel, int n, int m, const Vec3& tx,
                         const Vec3& rx, const Waveform& wf, double antenna_gain,
                         const PhaseConfig& cfg);

// Sum of ris_element_gain over all elements.
Complex ris_exact_sum(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                      const Waveform& wf, double antenna_gain,
                      const PhaseConfig& cfg);

struct RisAggregate {
    Complex gain{0.0, 0.0};
    bool near_field = false;
};

// Far-field closed form: common amplitude factor times the phased element
// sum using center distances and center angles. Computation proceeds in the
// near field but the flag is set.
RisAggregate ris_aggregate_gain(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                                const Waveform& wf, double antenna_gain,
                                const PhaseConfig& cfg);

// Common single-element amplitude factor of the far-field sum (everything
// except the phased sum and A).
double ris_element_amplitude(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                             const Waveform& wf, double antenna_gain);

// Quantized phase alignment: maximizes |phased element sum| exactly over the
// family of per-element alignments to a common reference phase. Baseline
// gain oracle; within one quantization step of the coherent optimum.
PhaseConfig phase_align(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                        const Waveform& wf, int levels);

// True MPC parameters for the given paths under the commanded phases.
// Zero-gain paths are dropped.
std::vector<Mpc> mpcs_for_paths(const std::vector<PropagationPath>& paths,
                                const Environment& env, const Waveform& wf,
                                const ArrayGeometry& array, double antenna_gain,
                                const PhaseConfig& cfg);

// Eq. (1): sampled baseband signal with seeded circularly symmetric noise of
// total per-sample variance sigma_n2.
ReceivedSignal synthesize_received(const std::vector<Mpc>& mpcs, const Waveform& wf,
                                   const ArrayGeometry& array, double sigma_n2,
                                   std::uint64_t seed);

// ||Y||^2 / (L * U * sigma_n2); the Section-V SNR of a synthesized signal.
double measured_snr(const ReceivedSignal& sig);

// Matched-filter delay estimate on antenna l with parabolic peak refinement
// (test utility).
double matched_filter_peak(const ReceivedSignal& sig, const Waveform& wf, int l = 0);

}  // namespace risslam
