#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "risslam/environment.hpp"
#include "risslam/measurement.hpp"
#include "risslam/rng.hpp"

namespace risslam {

struct SlamConfig {
    int agent_particles = 200;
    int landmark_particles = 600;
    double accel_noise = 0.01;       // q of the white-noise acceleration model, (m/s^2)^2
    double resample_ess_frac = 0.5;  // resample when ESS < frac * N
    double gate_nsigma = 3.0;        // association gate
    double min_delay_m = 0.3;        // direct-coupling blanking (path length)
    bool tempered_rho = false;       // Eq. (13) variant: rho as likelihood exponent
    int discard_min_cycles = 3;      // evidence needed by the PT/VT heuristic
    int discard_max_window = 6;
    double discard_speed_frac = 0.7; // drift threshold as a fraction of agent speed
    int pairing_min_cycles = 3;      // VS/VRIS pairing evidence
    double pairing_abs_tol_m = 0.02; // drift tolerance floor for pairing
    int prune_after_misses = 12;
    int max_tracks = 16;
    double antenna_separation_m = 0.1;
    double antenna_height_m = 0.0;
    double room_height_m = 3.0;      // landmark z support [0, H]
};

/// One landmark hypothesis set (structure of arrays). Weights are kept
/// normalized between cycles.
struct LandmarkSet {
    int track_id = -1;
    std::vector<double> px, py, pz;
    std::vector<double> w;

    int size() const { return static_cast<int>(w.size()); }
    Vec3 mean() const;
    double ess() const;
};

struct AgentParticle {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double log_weight = 0.0;
    std::vector<LandmarkSet> sets;  // aligned with SlamState track order
};

/// One raw associated observation retained for pairing tests.
struct TrackObs {
    double toa_c_m = 0.0;
    double aoa_rad = 0.0;
    Vec3 tx = Vec3::Zero();
    Vec3 rx = Vec3::Zero();
    double sigma_pos_m = 0.0;
};

/// Global per-track bookkeeping shared by association, the PT/VT heuristic,
/// pairing and the RIS belief. Holds no particle state.
struct Track {
    int id = -1;
    int birth_cycle = 0;
    int misses = 0;
    int observations = 0;
    int paired_source = -1;  // track id of the mirror source (VS/VRIS mode)
    bool observed_this_cycle = false;
    double last_amp = 0.0;
    double amp_ema = 0.0;
    // Cached global estimates (refreshed by estimate_state).
    Vec3 position_est = Vec3::Zero();
    double sigma_range_m = 0.5;
    double sigma_aoa_rad = 0.2;
    std::deque<TrackObs> history;  // recent raw observations (pairing window)
};

struct RisBelief {
    std::map<int, double> p;  // track id -> probability, sums to 1
    bool degenerate_update = false;

    int argmax() const;
};

struct ReflectorEstimate {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitX();
    int source_track = -1;
    int virtual_track = -1;
};

struct EstimatedMap {
    std::vector<ReflectorEstimate> reflectors;
    std::vector<std::pair<int, Vec3>> scatterers;  // track id, position
    std::optional<std::pair<int, Vec3>> ris;       // argmax-belief track
    std::vector<int> unpaired_virtual_tracks;      // reported, no plane estimate
};

struct Association {
    std::vector<int> track_of_mpc;  // -1 when unassociated
    std::vector<int> spawned;       // mpc indices that create new tracks
    std::vector<int> discarded;     // mpc indices dropped
};

/// Pre-association PT/VT stream filter. Maintains its own lightweight
/// (toa, aoa) continuity tracks and back-projects each stream onto the
/// antenna plane; streams whose implied source drifts like the moving
/// transmitter mirror are flagged and their MPCs removed.
struct DiscardStream {
    double last_toa_c = 0.0;  // meters
    double last_aoa = 0.0;
    int misses = 0;
    bool flagged = false;
    std::deque<Vec3> implied;
    std::deque<double> sigma_pos;
};

struct DiscardHistory {
    std::vector<DiscardStream> streams;
    int cycles_seen = 0;
};

struct SlamEstimate {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double position_cov_trace = 0.0;
    std::vector<std::pair<int, Vec3>> landmarks;  // track id, position
};

struct CycleFlags {
    bool no_evidence = false;       // dead-reckoned cycle
    bool agent_weights_reset = false;
    int landmark_sets_reset = 0;
    bool belief_degenerate = false;
};

/// Predicted |RIS aggregate| at a hypothetical panel location under the
/// commanded phases; supplied by the orchestrator (Eq. 12 likelihood model).
using RisAmplitudeModel = std::function<double(const Vec3& panel_center)>;

struct SlamState {
    SlamConfig cfg;
    std::vector<AgentParticle> particles;
    std::vector<Track> tracks;  // sorted by id
    RisBelief belief;
    DiscardHistory discard;
    SlamEstimate estimate;
    int cycle = 0;
    int next_track_id = 0;
    CycleFlags last_flags;

    const Track* find_track(int id) const;
    Track* find_track(int id);
    int track_order_index(int id) const;  // index into particle set arrays
};

// --- Elementary operations (exposed for tests) ---

// Back-projection of (toa, aoa) onto the horizontal antenna plane with the
// two-leg ellipse model; extra_leg_m subtracts a known Tx->source leg.
Vec3 back_project(const Vec3& tx, const Vec3& rx, double toa_c_m, double aoa_rad,
                  double extra_leg_m = 0.0);

// Motion-consistency filter replacing the paper's PT/VT classifier network.
std::vector<ObservedMpc> discard_transmitter_mpcs(const std::vector<ObservedMpc>& observed,
                                                  DiscardHistory& history,
                                                  const Vec3& tx, const Vec3& rx,
                                                  double speed_dt_m,
                                                  const SlamConfig& cfg);

// Nearest-neighbor gating in (toa, aoa) against predicted track observations.
Association associate(const std::vector<ObservedMpc>& observed, SlamState& state,
                      const Vec3& tx_pred, const Vec3& rx_pred);

// Eq. (12) Bayes update over tracks observed this cycle.
void update_ris_belief(SlamState& state, const std::vector<ObservedMpc>& observed,
                       const Association& assoc, const RisAmplitudeModel& ris_model,
                       double amp_noise_std);

// Discrete white-noise acceleration transition.
void transition_agent_particles(std::vector<AgentParticle>& particles, double dt_s,
                                double accel_noise_q, Rng& rng);

// rho_i = |alpha_i| / mean(|alpha|).
std::vector<double> mpc_weights(const std::vector<ObservedMpc>& observed);

// Eq. (13) for one landmark set under one agent hypothesis: multiply the
// previous weights by rho * N(aoa residual) * N(toa residual) per landmark
// particle, computed in the log domain. Returns the log of the unnormalized
// weight sum (the Eq.-14 factor) and leaves the set normalized.
// extra_leg_m >= 0 selects the paired one-leg model; negative uses two legs.
// A fully underflowed set is reset to uniform and counted in *resets.
double update_landmark_set(LandmarkSet& set, const Vec3& tx, const Vec3& rx,
                           const ObservedMpc& o, double rho, double extra_leg_m,
                           bool tempered, int* resets);

// Systematic (low-variance) resampler over normalized weights; returns the
// chosen source index per slot.
std::vector<int> systematic_resample(const std::vector<double>& weights, int count,
                                     Rng& rng);

double effective_sample_size(const std::vector<double>& weights);

// Weighted mean pose + landmark positions across all particles.
SlamEstimate estimate_state(const SlamState& state);

// Perpendicular-bisector reflector planes from paired (source, virtual)
// landmark estimates, plus point landmarks and the believed RIS.
EstimatedMap build_map(const SlamState& state);

struct CycleResult {
    EstimatedMap map;
    SlamEstimate estimate;
    CycleFlags flags;
};

// Algorithm-1 cycle: associate -> transition -> rho -> Eq.(13) -> Eq.(14) ->
// normalize/resample -> estimate -> map. Input MPC order is irrelevant.
CycleResult lme_cycle(SlamState& state, const std::vector<ObservedMpc>& observed,
                      double dt_s, const RisAmplitudeModel& ris_model,
                      double amp_noise_std, std::uint64_t cycle_seed);

// Initial state: all agent particles at the prior pose.
SlamState make_initial_state(const SlamConfig& cfg, const Vec3& start_position,
                             const Vec3& start_velocity);

}  // namespace risslam
