#pragma once

#include <cstdint>
#include <string>

#include "risslam/channel.hpp"
#include "risslam/environment.hpp"
#include "risslam/measurement.hpp"
#include "risslam/optimizer.hpp"
#include "risslam/slam.hpp"
#include "risslam/waveform.hpp"

namespace risslam {

struct CycleConfig {
    double cycle_s = 0.1;          // delta
    double optimization_s = 0.02;  // delta_O (simulated)
    double communication_s = 0.01; // delta_C (simulated)
    int cycles = 600;

    void validate() const;
};

/// A complete experiment description. Noise quantities that depend on the
/// received power (sigma_n2, N0, detection threshold, aoa coefficient) are
/// derived by calibrate_noise() and cached here.
struct Scenario {
    Environment env;
    AgentState agent_start;
    Waveform waveform;
    int rx_antennas = 4;
    double antenna_gain = 1.0;  // G
    CycleConfig cycle;
    SlamConfig slam;
    GaConfig ga;

    // Noise configuration.
    double snr_db = 20.0;
    double toa_device_floor_s = 0.5e-9;
    double aoa_ref_deg = 2.0;       // sigma_phi at the reference amplitude
    double detection_snr_db = 0.0;  // single-MPC energy SNR cutoff

    std::uint64_t seed = 1;

    // Derived by calibrate_noise().
    double sigma_n2 = 0.0;
    double reference_energy = 0.0;  // ||Y0||^2 of the calibration signal
    double reference_amp = 0.0;     // strongest static-landmark amplitude
    NoiseModel noise;
    bool calibrated = false;
};

// The Section-V room: 6x6x3 m, RIS 6x6 at (3,3,3) on the ceiling with 15 mm
// elements and H=4, scatterer at (2,1,1) with 5 cm radius, one reflecting
// wall at x=0 with R=0.85, agent from the origin at (0.0707, 0.0707, 0) m/s,
// 10 GHz carrier.
Scenario default_scenario();

Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& sc);

// Solve sigma_n2 from the Section-V SNR definition using the noise-free
// static-landmark signal at the start pose under neutral phases, then derive
// N0, the detection threshold and the AOA coefficient. Idempotent.
void calibrate_noise(Scenario& sc);

// Override the SNR (dB) and recalibrate.
void set_snr(Scenario& sc, double snr_db);

// Desk-scale profile: fewer cycles and particles for test runs.
void apply_desk_profile(Scenario& sc);

}  // namespace risslam
