#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "risslam/scenario.hpp"

namespace risslam {

enum class Scheme { Optimized, RandomPhase, NoRis };

const char* scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct CycleRecord {
    int cycle = 0;
    Vec3 true_position = Vec3::Zero();
    Vec3 estimated_position = Vec3::Zero();
    Vec3 estimated_velocity = Vec3::Zero();
    std::vector<int> phase_levels;  // commanded Xi
    double crlb_m2 = 0.0;           // GA objective at the commanded config
    int mpc_count = 0;
    double ris_belief_max = 0.0;
    Vec3 ris_position_est = Vec3::Zero();
    bool ris_identified = false;
    double position_cov_trace = 0.0;
    double ga_wall_ms = 0.0;
    bool dead_reckoned = false;
};

struct RunLog {
    Scheme scheme = Scheme::Optimized;
    std::uint64_t seed = 0;
    std::vector<CycleRecord> records;

    // Stable serialization for determinism checks; wall-clock fields are
    // excluded on purpose.
    std::string serialize_deterministic() const;
    // Line-delimited records including timing, for --trace output.
    std::string to_jsonl() const;
};

struct RunOptions {
    Scheme scheme = Scheme::Optimized;
    std::uint64_t seed = 1;
    bool trace_mpcs = false;
};

// Execute the cycle protocol: Optimization -> Communication -> Measurement
// Acquisition -> Localization and Mapping, per cycle. Deterministic given
// (scenario, options).
RunLog run(const Scenario& scenario, const RunOptions& options);

}  // namespace risslam
