#include "risslam/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "risslam/crlb.hpp"
#include "risslam/optimizer.hpp"

namespace risslam {

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Optimized: return "optimized";
        case Scheme::RandomPhase: return "random_phase";
        case Scheme::NoRis: return "no_ris";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "optimized") return Scheme::Optimized;
    if (name == "random_phase") return Scheme::RandomPhase;
    if (name == "no_ris") return Scheme::NoRis;
    throw ScenarioError("unknown scheme: " + name);
}

namespace {

PhaseConfig random_config(const RisPanel& panel, Rng& rng) {
    PhaseConfig c;
    c.rows = panel.rows;
    c.cols = panel.cols;
    c.levels = panel.phase_levels;
    c.h.resize(panel.element_count());
    for (int& v : c.h) v = rng.uniform_int(1, panel.phase_levels);
    return c;
}

// Scene context for the CRLB-GA: predicted pose, mapped landmarks with their
// latest amplitudes, and the Xi-dependent RIS aggregate for the landmark the
// Bayes belief designates as the RIS. Built entirely from estimates; truth
// never leaks in.
struct GaContext {
    std::vector<PathDirectionSums> dirs;
    std::vector<std::complex<double>> gains;
    int ris_path = -1;  // index whose gain depends on Xi
    RisPanel panel_at_estimate;
    Vec3 tx, rx;
    bool usable = false;
};

GaContext build_ga_context(const Scenario& sc, const SlamState& slam_state,
                           double dt_s) {
    GaContext ctx;
    if (!sc.env.ris) return ctx;

    const Vec3 pred_pos =
        slam_state.estimate.position + slam_state.estimate.velocity * dt_s;
    Vec3 h(slam_state.estimate.velocity.x(), slam_state.estimate.velocity.y(), 0.0);
    const double hn = h.norm();
    h = hn > 0.0 ? Vec3(h / hn) : Vec3::UnitX();
    const Vec3 lift(0.0, 0.0, sc.env.antenna_height_m);
    ctx.tx = pred_pos + 0.5 * sc.env.antenna_separation_m * h + lift;
    ctx.rx = pred_pos - 0.5 * sc.env.antenna_separation_m * h + lift;

    const int ris_track = slam_state.belief.argmax();
    for (const auto& t : slam_state.tracks) {
        if (t.observations < 2 || t.amp_ema <= 0.0) continue;
        PathObs obs;
        if (t.paired_source >= 0) {
            const Track* s = slam_state.find_track(t.paired_source);
            if (!s) continue;
            obs = predict_virtual_obs(ctx.tx, ctx.rx, s->position_est, t.position_est);
        } else {
            obs = predict_point_obs(ctx.tx, ctx.rx, t.position_est);
        }
        PathDirectionSums d;
        d.nu = obs.dlength_dxy.x();
        d.kappa = obs.dlength_dxy.y();
        ctx.dirs.push_back(d);
        ctx.gains.emplace_back(t.amp_ema, 0.0);
        if (t.id == ris_track) {
            ctx.ris_path = static_cast<int>(ctx.dirs.size()) - 1;
            ctx.panel_at_estimate = *sc.env.ris;
            ctx.panel_at_estimate.center = t.position_est;
        }
    }
    ctx.usable = ctx.ris_path >= 0 && ctx.dirs.size() >= 2;
    return ctx;
}

}  // namespace

std::string RunLog::serialize_deterministic() const {
    std::ostringstream os;
    os.precision(17);
    os << scheme_name(scheme) << " seed=" << seed << "\n";
    for (const auto& r : records) {
        os << r.cycle << " " << r.true_position.transpose() << " "
           << r.estimated_position.transpose() << " "
           << r.estimated_velocity.transpose() << " crlb=" << r.crlb_m2
           << " mpc=" << r.mpc_count << " belief=" << r.ris_belief_max << " xi=";
        for (int v : r.phase_levels) os << v;
        os << " dr=" << r.dead_reckoned << "\n";
    }
    return os.str();
}

std::string RunLog::to_jsonl() const {
    std::ostringstream os;
    os.precision(12);
    for (const auto& r : records) {
        os << "{\"cycle\":" << r.cycle << ",\"true\":[" << r.true_position.x() << ","
           << r.true_position.y() << "," << r.true_position.z() << "],\"est\":["
           << r.estimated_position.x() << "," << r.estimated_position.y() << ","
           << r.estimated_position.z() << "],\"crlb\":" << r.crlb_m2
           << ",\"mpc\":" << r.mpc_count << ",\"belief\":" << r.ris_belief_max
           << ",\"cov\":" << r.position_cov_trace << ",\"ga_ms\":" << r.ga_wall_ms
           << "}\n";
    }
    return os.str();
}

RunLog run(const Scenario& scenario, const RunOptions& options) {
    Scenario sc = scenario;
    if (options.scheme == Scheme::NoRis) sc.env.ris.reset();
    if (!sc.calibrated) calibrate_noise(sc);
    sc.slam.antenna_separation_m = sc.env.antenna_separation_m;
    sc.slam.antenna_height_m = sc.env.antenna_height_m;
    sc.slam.room_height_m = sc.env.room.extents.z();

    RunLog log;
    log.scheme = options.scheme;
    log.seed = options.seed;
    log.records.reserve(sc.cycle.cycles);

    const Waveform& wf = sc.waveform;
    AgentState truth = sc.agent_start;
    ArrayGeometry array = ArrayGeometry::make(
        sc.rx_antennas, wf.wavelength_m,
        std::atan2(sc.env.heading(truth).y(), sc.env.heading(truth).x()));

    SlamState slam_state = make_initial_state(sc.slam, sc.agent_start.position,
                                              sc.agent_start.velocity);
    std::vector<Individual> ga_population;
    GaConfig ga_cfg = sc.ga;

    const bool has_ris = sc.env.ris.has_value() && sc.env.ris->element_count() > 0;
    const double amp_noise_std = std::sqrt(sc.noise.n0 * 0.5) + 1e-12;

    PhaseConfig cmd;
    if (has_ris) {
        cmd = PhaseConfig::uniform(sc.env.ris->rows, sc.env.ris->cols,
                                   sc.env.ris->phase_levels, sc.env.ris->phase_levels);
    }

    for (int k = 1; k <= sc.cycle.cycles; ++k) {
        CycleRecord rec;
        rec.cycle = k;

        // --- Optimization: select Xi^k (and the rho-weighted LME behavior)
        // from prior-cycle information only.
        Rng cycle_rng(mix_seed(options.seed, 0x637963ULL, static_cast<std::uint64_t>(k)));
        const auto ga_t0 = std::chrono::steady_clock::now();
        double crlb_at_cmd = std::numeric_limits<double>::infinity();
        if (has_ris) {
            GaContext ctx = build_ga_context(sc, slam_state, sc.cycle.cycle_s);
            if (options.scheme == Scheme::Optimized && ctx.usable) {
                const double n0 = sc.noise.n0;
                CrlbEvaluator eval = [&](const PhaseConfig& cfg) {
                    auto gains = ctx.gains;
                    const RisAggregate agg =
                        ris_aggregate_gain(ctx.panel_at_estimate, ctx.tx, ctx.rx, wf,
                                           sc.antenna_gain, cfg);
                    gains[ctx.ris_path] = agg.gain;
                    return closed_form_crlb(ctx.dirs, gains, wf, n0).value_m2;
                };
                ga_cfg.seed = mix_seed(options.seed, 0x6761ULL, static_cast<std::uint64_t>(k));
                const GaResult res =
                    optimize_phases(sc.env.ris->rows, sc.env.ris->cols,
                                    sc.env.ris->phase_levels, eval, ga_cfg, ga_population);
                cmd = res.best;
                crlb_at_cmd = res.best_adaptability > 0.0
                                  ? 1.0 / res.best_adaptability
                                  : std::numeric_limits<double>::infinity();
            } else {
                // No identified RIS yet (or a non-optimizing scheme): random
                // phases for this cycle.
                cmd = random_config(*sc.env.ris, cycle_rng);
            }
        }
        rec.phase_levels = cmd.h;
        rec.crlb_m2 = crlb_at_cmd;
        rec.ga_wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - ga_t0)
                             .count();

        // --- Communication: the commanded phases take effect after delta_C,
        // still within this cycle (simulated latency only).

        // --- Measurement acquisition: ground truth advances, the channel is
        // sampled under Xi^k.
        truth = advance_ground_truth(sc.env, truth, sc.cycle.cycle_s);
        rec.true_position = truth.position;
        const auto paths = propagation_paths(sc.env, truth);
        const auto mpcs =
            mpcs_for_paths(paths, sc.env, wf, array, sc.antenna_gain, cmd);
        const auto observed = extract_mpcs(
            mpcs, sc.noise, mix_seed(options.seed, 0x6f6273ULL, static_cast<std::uint64_t>(k)));
        rec.mpc_count = static_cast<int>(observed.size());

        // --- Localization and mapping.
        RisAmplitudeModel ris_model;
        if (has_ris) {
            const RisPanel deployed = *sc.env.ris;
            const Vec3 tx_est = slam_state.estimate.position;  // refreshed inside
            ris_model = [&sc, deployed, &slam_state, &wf, cmd](const Vec3& center) {
                RisPanel p = deployed;
                p.center = center;
                Vec3 h(slam_state.estimate.velocity.x(), slam_state.estimate.velocity.y(),
                       0.0);
                const double hn = h.norm();
                h = hn > 0.0 ? Vec3(h / hn) : Vec3::UnitX();
                const Vec3 pos = slam_state.estimate.position;
                const Vec3 lift(0.0, 0.0, sc.env.antenna_height_m);
                const Vec3 tx = pos + 0.5 * sc.env.antenna_separation_m * h + lift;
                const Vec3 rx = pos - 0.5 * sc.env.antenna_separation_m * h + lift;
                return std::abs(
                    ris_aggregate_gain(p, tx, rx, wf, sc.antenna_gain, cmd).gain);
            };
            (void)tx_est;
        }
        const CycleResult cr = lme_cycle(
            slam_state, observed, sc.cycle.cycle_s, ris_model, amp_noise_std,
            mix_seed(options.seed, 0x6c6d65ULL, static_cast<std::uint64_t>(k)));

        rec.estimated_position = cr.estimate.position;
        rec.estimated_velocity = cr.estimate.velocity;
        rec.position_cov_trace = cr.estimate.position_cov_trace;
        rec.dead_reckoned = cr.flags.no_evidence;
        const int ris_track = slam_state.belief.argmax();
        if (ris_track >= 0) {
            rec.ris_belief_max = slam_state.belief.p.at(ris_track);
            if (cr.map.ris) {
                rec.ris_position_est = cr.map.ris->second;
                rec.ris_identified = true;
            }
        }
        log.records.push_back(std::move(rec));
    }
    return log;
}

}  // namespace risslam
