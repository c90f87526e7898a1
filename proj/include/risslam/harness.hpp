#pragma once

#include <string>
#include <vector>

#include "risslam/orchestrator.hpp"

namespace risslam {

struct ResultRow {
    std::string scheme;
    double sweep_value = 0.0;
    int trial = 0;
    double rmse_m = 0.0;
    double mean_crlb_m2 = 0.0;
    double mean_gain = 0.0;
};

struct ResultTable {
    std::string sweep_variable;
    std::vector<ResultRow> rows;
    std::vector<RunLog> logs;  // retained when keep_logs is set

    std::string to_csv() const;
};

struct SweepOptions {
    std::vector<Scheme> schemes{Scheme::Optimized, Scheme::RandomPhase, Scheme::NoRis};
    int trials = 10;
    std::uint64_t seed_base = 1;
    int burn_in_cycles = 50;
    bool keep_logs = false;
};

// Positioning RMSE over cycles after burn-in.
double rmse(const std::vector<Vec3>& truth, const std::vector<Vec3>& estimate,
            int burn_in = 50);
double rmse_of_log(const RunLog& log, int burn_in = 50);

// Fig. 4(a) analog: |alpha| of the RIS channel under aligned and random
// phases, and of the aperture-matched scatterer, along the panel boresight.
struct GainCurveRow {
    double distance_m = 0.0;
    double optimized = 0.0;
    double random_mean = 0.0;
    double scatterer = 0.0;
    double element_amplitude = 0.0;
};
std::vector<GainCurveRow> gain_vs_distance(const Scenario& scenario,
                                           const std::vector<double>& distances,
                                           int random_draws, std::uint64_t seed);
std::string gain_curve_csv(const std::vector<GainCurveRow>& rows);

// Fig. 4(b) analog: RMSE per scheme over an SNR sweep.
ResultTable rmse_vs_snr(const Scenario& scenario, const std::vector<double>& snr_db,
                        const SweepOptions& opt);

// Fig. 4(c) analog: RMSE over square panel sizes (optimized scheme).
ResultTable rmse_vs_ris_size(const Scenario& scenario, const std::vector<int>& sizes,
                             const SweepOptions& opt);

}  // namespace risslam
