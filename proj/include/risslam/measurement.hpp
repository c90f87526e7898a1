#pragma once

#include <cstdint>
#include <vector>

#include "risslam/channel.hpp"

namespace risslam {

/// A noisy per-cycle MPC observation. sigma_* are the error scales an
/// estimator would report and are what the filter likelihoods consume.
/// true_landmark_index / true_kind are simulator diagnostics: the SLAM stack
/// never reads them.
struct ObservedMpc {
    double toa_s = 0.0;
    double aoa_rad = 0.0;
    Complex amplitude{0.0, 0.0};
    double sigma_toa_s = 0.0;
    double sigma_aoa_rad = 0.0;
    int true_landmark_index = -1;
    LandmarkKind true_kind = LandmarkKind::Direct;
};

/// Estimation-error model of the emulated channel estimator.
///
/// TOA errors follow the single-path information bound
/// sigma_tau^2 = N0 / (8 pi^2 zeta^2 |alpha|^2), optionally clamped from
/// below by a device accuracy floor. AOA errors mirror the 1/|alpha| law:
/// sigma_phi = aoa_coeff * sqrt(N0) / |alpha|, so both vanish as N0 -> 0.
struct NoiseModel {
    double n0 = 0.0;                    // noise spectral density, W/Hz
    double zeta_sq_hz2 = 0.0;           // effective bandwidth^2 of the probe
    double aoa_coeff = 0.0;             // rad * amplitude / sqrt(W/Hz)
    double detection_threshold = 0.0;   // drop MPCs with |alpha| below this
    double toa_device_floor_s = 0.0;    // quantization floor on sigma_tau
    double reported_sigma_toa_floor_s = 1e-13;  // keeps reported sigma > 0
    double reported_sigma_aoa_floor_rad = 1e-4;

    double sigma_toa(double amp) const;
    double sigma_aoa(double amp) const;
};

// Observation synthesis: truth plus CRLB-scaled noise, seeded. Input order
// does not matter (MPCs are canonicalized internally). Amplitude noise is
// complex Gaussian with total variance N0 / R_s(0); per-component N0/2 under
// the unit-energy convention.
std::vector<ObservedMpc> extract_mpcs(const std::vector<Mpc>& true_mpcs,
                                      const NoiseModel& model, std::uint64_t seed);

// Collapse per-element RIS observations (test mode): entries within
// `window_s` of each other merge into one with the complex-sum amplitude.
std::vector<ObservedMpc> merge_ris_mpcs(const std::vector<ObservedMpc>& observed,
                                        double window_s = 0.5e-9);

}  // namespace risslam
