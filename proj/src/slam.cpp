#include "risslam/slam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace risslam {

namespace {

constexpr double kLogFloor = -700.0;  // keeps exp() representable
constexpr double kLog2Pi = 1.8378770664093453;

double log_gaussian(double residual, double sigma) {
    const double z = residual / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * kLog2Pi;
}

Vec3 heading_of(const Vec3& velocity) {
    Vec3 h(velocity.x(), velocity.y(), 0.0);
    const double n = h.norm();
    return n > 0.0 ? Vec3(h / n) : Vec3::UnitX();
}

void antenna_positions(const Vec3& pos, const Vec3& vel, const SlamConfig& cfg,
                       Vec3& tx, Vec3& rx) {
    const Vec3 h = heading_of(vel);
    const Vec3 lift(0.0, 0.0, cfg.antenna_height_m);
    tx = pos + 0.5 * cfg.antenna_separation_m * h + lift;
    rx = pos - 0.5 * cfg.antenna_separation_m * h + lift;
}

// Ellipse solve: range r along direction u from rx such that
// ||x - tx|| + r = toa_c. Returns a negative value when infeasible.
double ellipse_range(const Vec3& tx, const Vec3& rx, const Vec3& u, double toa_c) {
    const Vec3 delta = rx - tx;
    const double denom = 2.0 * (toa_c + u.dot(delta));
    if (denom <= 1e-12) return -1.0;
    return (toa_c * toa_c - delta.squaredNorm()) / denom;
}

struct TrackPrediction {
    double toa_c = 0.0;  // meters
    double aoa = 0.0;
    double sigma_range = 0.5;
    double sigma_aoa = 0.2;
    bool valid = false;
};

TrackPrediction predict_track_obs(const SlamState& state, const Track& t,
                                  const Vec3& tx, const Vec3& rx) {
    TrackPrediction p;
    double extra = 0.0;
    if (t.paired_source >= 0) {
        const Track* s = state.find_track(t.paired_source);
        if (s) extra = (s->position_est - tx).norm();
    }
    const Vec3 d = t.position_est - rx;
    const double lr = d.norm();
    if (lr <= 1e-9) return p;
    if (t.paired_source >= 0) {
        p.toa_c = extra + lr;
    } else {
        p.toa_c = (t.position_est - tx).norm() + lr;
    }
    p.aoa = std::atan2(d.y(), d.x());
    p.sigma_range = t.sigma_range_m;
    p.sigma_aoa = t.sigma_aoa_rad;
    p.valid = true;
    return p;
}

double drift_per_cycle(const std::deque<Vec3>& pts) {
    if (pts.size() < 2) return 0.0;
    return (pts.back() - pts.front()).norm() / static_cast<double>(pts.size() - 1);
}

}  // namespace

Vec3 LandmarkSet::mean() const {
    Vec3 m = Vec3::Zero();
    for (int i = 0; i < size(); ++i) {
        m += w[i] * Vec3(px[i], py[i], pz[i]);
    }
    return m;
}

double LandmarkSet::ess() const { return effective_sample_size(w); }

int RisBelief::argmax() const {
    int best = -1;
    double best_p = -1.0;
    for (const auto& [id, prob] : p) {
        if (prob > best_p) {
            best_p = prob;
            best = id;
        }
    }
    return best;
}

const Track* SlamState::find_track(int id) const {
    for (const auto& t : tracks) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

Track* SlamState::find_track(int id) {
    for (auto& t : tracks) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

int SlamState::track_order_index(int id) const {
    for (int i = 0; i < static_cast<int>(tracks.size()); ++i) {
        if (tracks[i].id == id) return i;
    }
    return -1;
}

Vec3 back_project(const Vec3& tx, const Vec3& rx, double toa_c_m, double aoa_rad,
                  double extra_leg_m) {
    const Vec3 u(std::cos(aoa_rad), std::sin(aoa_rad), 0.0);
    double r;
    if (extra_leg_m > 0.0) {
        r = toa_c_m - extra_leg_m;  // one-leg model with known Tx->source leg
    } else {
        r = ellipse_range(tx, rx, u, toa_c_m);
    }
    r = std::max(r, 0.0);
    return rx + r * u;
}

std::vector<ObservedMpc> discard_transmitter_mpcs(const std::vector<ObservedMpc>& observed,
                                                  DiscardHistory& history,
                                                  const Vec3& tx, const Vec3& rx,
                                                  double speed_dt_m,
                                                  const SlamConfig& cfg) {
    history.cycles_seen += 1;
    for (auto& s : history.streams) s.misses += 1;

    std::vector<ObservedMpc> kept;
    kept.reserve(observed.size());
    for (const auto& o : observed) {
        const double toa_c = o.toa_s * kSpeedOfLight;
        // Direct-coupling blanking: the Tx-Rx offset is known hardware.
        if (toa_c < cfg.min_delay_m) continue;

        const double sigma_c = std::max(o.sigma_toa_s * kSpeedOfLight, 1e-4);
        const double sigma_phi = std::max(o.sigma_aoa_rad, 1e-4);

        // Continuity match against existing streams (generous gates; the
        // stream must keep following its MPC even while drifting).
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (int i = 0; i < static_cast<int>(history.streams.size()); ++i) {
            const auto& s = history.streams[i];
            if (s.misses > 3) continue;
            const double dt_c = std::abs(toa_c - s.last_toa_c);
            const double dphi = std::abs(wrap_angle(o.aoa_rad - s.last_aoa));
            const double gate_c = 6.0 * sigma_c + 3.0 * speed_dt_m + 0.05;
            const double gate_phi = 6.0 * sigma_phi + 0.05;
            if (dt_c > gate_c || dphi > gate_phi) continue;
            const double d = dt_c / gate_c + dphi / gate_phi;
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best < 0) {
            history.streams.emplace_back();
            best = static_cast<int>(history.streams.size()) - 1;
        }
        DiscardStream& s = history.streams[best];
        s.misses = 0;
        s.last_toa_c = toa_c;
        s.last_aoa = o.aoa_rad;

        const Vec3 implied = back_project(tx, rx, toa_c, o.aoa_rad);
        const double range = (implied - rx).norm();
        const double sigma_pos =
            std::sqrt(0.25 * sigma_c * sigma_c + range * range * sigma_phi * sigma_phi);
        s.implied.push_back(implied);
        s.sigma_pos.push_back(sigma_pos);
        while (static_cast<int>(s.implied.size()) > cfg.discard_max_window) {
            s.implied.pop_front();
            s.sigma_pos.pop_front();
        }

        const int n = static_cast<int>(s.implied.size());
        if (!s.flagged && n >= cfg.discard_min_cycles) {
            const double drift = drift_per_cycle(s.implied);
            const double sig =
                std::accumulate(s.sigma_pos.begin(), s.sigma_pos.end(), 0.0) / n;
            const double sigma_drift = sig * std::sqrt(2.0) / (n - 1);
            if (drift > cfg.discard_speed_frac * speed_dt_m + 3.0 * sigma_drift) {
                s.flagged = true;
            }
        }
        if (!s.flagged) kept.push_back(o);
    }

    // Drop stale streams.
    history.streams.erase(
        std::remove_if(history.streams.begin(), history.streams.end(),
                       [](const DiscardStream& s) { return s.misses > 5; }),
        history.streams.end());
    return kept;
}

Association associate(const std::vector<ObservedMpc>& observed, SlamState& state,
                      const Vec3& tx_pred, const Vec3& rx_pred) {
    Association assoc;
    assoc.track_of_mpc.assign(observed.size(), -1);

    const double agent_sigma = std::sqrt(std::max(state.estimate.position_cov_trace, 0.0));

    std::vector<TrackPrediction> preds(state.tracks.size());
    for (std::size_t j = 0; j < state.tracks.size(); ++j) {
        preds[j] = predict_track_obs(state, state.tracks[j], tx_pred, rx_pred);
    }

    // Best gated track per MPC.
    std::vector<double> best_d(observed.size(), std::numeric_limits<double>::max());
    for (std::size_t n = 0; n < observed.size(); ++n) {
        const auto& o = observed[n];
        const double toa_c = o.toa_s * kSpeedOfLight;
        for (std::size_t j = 0; j < state.tracks.size(); ++j) {
            if (!preds[j].valid) continue;
            const double range = std::max(preds[j].toa_c * 0.5, 0.3);
            const double s_c = std::sqrt(std::pow(o.sigma_toa_s * kSpeedOfLight, 2) +
                                         preds[j].sigma_range * preds[j].sigma_range +
                                         agent_sigma * agent_sigma);
            const double s_phi = std::sqrt(o.sigma_aoa_rad * o.sigma_aoa_rad +
                                           preds[j].sigma_aoa * preds[j].sigma_aoa +
                                           std::pow(agent_sigma / range, 2));
            const double dc = std::abs(toa_c - preds[j].toa_c);
            const double dphi = std::abs(wrap_angle(o.aoa_rad - preds[j].aoa));
            if (dc > state.cfg.gate_nsigma * s_c) continue;
            if (dphi > state.cfg.gate_nsigma * s_phi) continue;
            const double d = std::pow(dc / s_c, 2) + std::pow(dphi / s_phi, 2);
            if (d < best_d[n]) {
                best_d[n] = d;
                assoc.track_of_mpc[n] = state.tracks[j].id;
            }
        }
    }

    // Conflict resolution: a track keeps its strongest-amplitude MPC; losers
    // spawn new landmarks.
    for (std::size_t j = 0; j < state.tracks.size(); ++j) {
        const int tid = state.tracks[j].id;
        int winner = -1;
        double winner_amp = -1.0;
        for (std::size_t n = 0; n < observed.size(); ++n) {
            if (assoc.track_of_mpc[n] != tid) continue;
            const double amp = std::abs(observed[n].amplitude);
            if (amp > winner_amp) {
                winner_amp = amp;
                winner = static_cast<int>(n);
            }
        }
        for (std::size_t n = 0; n < observed.size(); ++n) {
            if (assoc.track_of_mpc[n] == tid && static_cast<int>(n) != winner) {
                assoc.track_of_mpc[n] = -1;
            }
        }
    }

    for (std::size_t n = 0; n < observed.size(); ++n) {
        if (assoc.track_of_mpc[n] >= 0) continue;
        if (static_cast<int>(state.tracks.size()) + static_cast<int>(assoc.spawned.size()) <
            state.cfg.max_tracks) {
            assoc.spawned.push_back(static_cast<int>(n));
        } else {
            assoc.discarded.push_back(static_cast<int>(n));
        }
    }
    return assoc;
}

void transition_agent_particles(std::vector<AgentParticle>& particles, double dt_s,
                                double accel_noise_q, Rng& rng) {
    if (dt_s <= 0.0) return;
    const double s = std::sqrt(accel_noise_q);
    for (auto& p : particles) {
        const double wx = accel_noise_q > 0.0 ? s * rng.gaussian() : 0.0;
        const double wy = accel_noise_q > 0.0 ? s * rng.gaussian() : 0.0;
        p.position.x() += p.velocity.x() * dt_s + 0.5 * wx * dt_s * dt_s;
        p.position.y() += p.velocity.y() * dt_s + 0.5 * wy * dt_s * dt_s;
        p.position.z() += p.velocity.z() * dt_s;
        p.velocity.x() += wx * dt_s;
        p.velocity.y() += wy * dt_s;
    }
}

std::vector<double> mpc_weights(const std::vector<ObservedMpc>& observed) {
    std::vector<double> rho(observed.size(), 1.0);
    if (observed.empty()) return rho;
    double mean = 0.0;
    for (const auto& o : observed) mean += std::abs(o.amplitude);
    mean /= static_cast<double>(observed.size());
    if (mean <= 0.0) return rho;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        rho[i] = std::abs(observed[i].amplitude) / mean;
    }
    return rho;
}

double update_landmark_set(LandmarkSet& set, const Vec3& tx, const Vec3& rx,
                           const ObservedMpc& o, double rho, double extra_leg_m,
                           bool tempered, int* resets) {
    const double toa_c = o.toa_s * kSpeedOfLight;
    const double sc = o.sigma_toa_s * kSpeedOfLight;
    const int nlp = set.size();
    std::vector<double> lw(nlp);
    double max_lw = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < nlp; ++m) {
        const double dx = set.px[m] - rx.x();
        const double dy = set.py[m] - rx.y();
        const double dz = set.pz[m] - rx.z();
        const double lr = std::sqrt(dx * dx + dy * dy + dz * dz);
        double pred_c;
        if (extra_leg_m >= 0.0) {
            pred_c = extra_leg_m + lr;
        } else {
            const double ex = set.px[m] - tx.x();
            const double ey = set.py[m] - tx.y();
            const double ez = set.pz[m] - tx.z();
            pred_c = std::sqrt(ex * ex + ey * ey + ez * ez) + lr;
        }
        const double pred_phi = std::atan2(dy, dx);
        const double l_phi = log_gaussian(wrap_angle(o.aoa_rad - pred_phi), o.sigma_aoa_rad);
        const double l_tau = log_gaussian(toa_c - pred_c, sc);
        double ll;
        if (tempered) {
            ll = rho * (l_phi + l_tau);
        } else {
            ll = std::log(std::max(rho, 1e-300)) + l_phi + l_tau;
        }
        const double v = std::log(std::max(set.w[m], 1e-300)) + ll;
        lw[m] = v;
        max_lw = std::max(max_lw, v);
    }
    if (!std::isfinite(max_lw)) {
        set.w.assign(nlp, 1.0 / nlp);
        if (resets) *resets += 1;
        return kLogFloor;
    }
    double s = 0.0;
    for (int m = 0; m < nlp; ++m) s += std::exp(lw[m] - max_lw);
    const double log_sum = max_lw + std::log(s);
    const double inv = 1.0 / s;
    for (int m = 0; m < nlp; ++m) set.w[m] = std::exp(lw[m] - max_lw) * inv;
    return std::max(log_sum, kLogFloor);
}

std::vector<int> systematic_resample(const std::vector<double>& weights, int count,
                                     Rng& rng) {
    std::vector<int> picks(count);
    const double step = 1.0 / count;
    double u = rng.uniform01() * step;
    double c = weights.empty() ? 1.0 : weights[0];
    int i = 0;
    const int n = static_cast<int>(weights.size());
    for (int m = 0; m < count; ++m) {
        while (u > c && i + 1 < n) {
            ++i;
            c += weights[i];
        }
        picks[m] = i;
        u += step;
    }
    return picks;
}

double effective_sample_size(const std::vector<double>& weights) {
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

SlamEstimate estimate_state(const SlamState& state) {
    SlamEstimate est;
    // Agent weights in linear domain.
    double max_lw = -std::numeric_limits<double>::infinity();
    for (const auto& p : state.particles) max_lw = std::max(max_lw, p.log_weight);
    std::vector<double> w(state.particles.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < state.particles.size(); ++i) {
        w[i] = std::isfinite(max_lw) ? std::exp(state.particles[i].log_weight - max_lw)
                                     : 1.0;
        sum += w[i];
    }
    for (auto& wi : w) wi /= sum;

    for (std::size_t i = 0; i < state.particles.size(); ++i) {
        est.position += w[i] * state.particles[i].position;
        est.velocity += w[i] * state.particles[i].velocity;
    }
    double var = 0.0;
    for (std::size_t i = 0; i < state.particles.size(); ++i) {
        const Vec3 d = state.particles[i].position - est.position;
        var += w[i] * (d.x() * d.x() + d.y() * d.y());
    }
    est.position_cov_trace = var;

    for (std::size_t j = 0; j < state.tracks.size(); ++j) {
        Vec3 lm = Vec3::Zero();
        for (std::size_t i = 0; i < state.particles.size(); ++i) {
            lm += w[i] * state.particles[i].sets[j].mean();
        }
        est.landmarks.emplace_back(state.tracks[j].id, lm);
    }
    return est;
}

EstimatedMap build_map(const SlamState& state) {
    EstimatedMap map;
    const int ris_id = state.belief.argmax();

    for (const auto& t : state.tracks) {
        if (t.paired_source >= 0) {
            const Track* s = state.find_track(t.paired_source);
            if (!s) {
                map.unpaired_virtual_tracks.push_back(t.id);
                continue;
            }
            ReflectorEstimate r;
            const Vec3 a = s->position_est;
            const Vec3 b = t.position_est;
            const Vec3 d = b - a;
            const double n = d.norm();
            if (n < 1e-9) {
                map.unpaired_virtual_tracks.push_back(t.id);
                continue;
            }
            r.point = 0.5 * (a + b);
            r.normal = d / n;
            r.source_track = s->id;
            r.virtual_track = t.id;
            map.reflectors.push_back(r);
        } else if (t.id == ris_id) {
            map.ris = std::make_pair(t.id, t.position_est);
        } else {
            map.scatterers.emplace_back(t.id, t.position_est);
        }
    }
    return map;
}

void update_ris_belief(SlamState& state, const std::vector<ObservedMpc>& observed,
                       const Association& assoc, const RisAmplitudeModel& ris_model,
                       double amp_noise_std) {
    if (!ris_model || state.tracks.empty()) return;
    RisBelief& belief = state.belief;
    belief.degenerate_update = false;

    // Log-score per track: RIS-model likelihood against amplitude-persistence
    // likelihood; tracks without an observation (or without history)
    // contribute flat evidence.
    std::map<int, double> logscore;
    bool any = false;
    for (std::size_t n = 0; n < observed.size(); ++n) {
        const int tid = assoc.track_of_mpc[n];
        if (tid < 0) continue;
        const Track* t = state.find_track(tid);
        if (!t || t->observations < 2 || t->amp_ema <= 0.0) continue;
        const double amp = std::abs(observed[n].amplitude);
        const double pred_ris = ris_model(t->position_est);
        const double s_ris = std::max({amp_noise_std, 0.2 * pred_ris, 0.2 * amp, 1e-12});
        const double s_per = std::max({amp_noise_std, 0.2 * t->amp_ema, 1e-12});
        const double l_ris = log_gaussian(amp - pred_ris, s_ris);
        const double l_per = log_gaussian(amp - t->amp_ema, s_per);
        logscore[tid] = l_ris - l_per;
        any = true;
    }
    if (!any) return;

    double max_ls = 0.0;  // flat evidence of unobserved tracks scores log 1
    for (const auto& [id, ls] : logscore) max_ls = std::max(max_ls, ls);

    std::map<int, double> updated = belief.p;
    double sum = 0.0;
    for (auto& [id, prob] : updated) {
        const auto it = logscore.find(id);
        const double ls = (it == logscore.end()) ? 0.0 : it->second;
        prob *= std::exp(std::max(ls - max_ls, kLogFloor));
        sum += prob;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        belief.degenerate_update = true;  // evidence unusable; belief unchanged
        return;
    }
    for (auto& [id, prob] : updated) prob /= sum;
    belief.p = std::move(updated);
}

SlamState make_initial_state(const SlamConfig& cfg, const Vec3& start_position,
                             const Vec3& start_velocity) {
    SlamState state;
    state.cfg = cfg;
    state.particles.resize(cfg.agent_particles);
    for (auto& p : state.particles) {
        p.position = start_position;
        p.velocity = start_velocity;
        p.log_weight = -std::log(static_cast<double>(cfg.agent_particles));
    }
    state.estimate.position = start_position;
    state.estimate.velocity = start_velocity;
    return state;
}

namespace {

// Sample one landmark particle position for a spawned track: azimuth and TOA
// jittered by the reported sigmas, target height uniform over the landmark
// z support, range from the ellipse (or corrected one-leg) solve.
Vec3 sample_spawn_position(const Vec3& tx, const Vec3& rx, const ObservedMpc& o,
                           double room_h, Rng& rng) {
    const double toa_c = std::max(o.toa_s * kSpeedOfLight, 0.05);
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double phi = o.aoa_rad + rng.gaussian(0.0, o.sigma_aoa_rad);
        const double tc = std::max(toa_c + rng.gaussian(0.0, o.sigma_toa_s * kSpeedOfLight),
                                   0.05);
        const double zt = rng.uniform(0.0, room_h);
        // Fixed-point on elevation so the particle lands near height zt.
        double elev = 0.0;
        double r = 0.0;
        for (int it = 0; it < 3; ++it) {
            const Vec3 u(std::cos(phi) * std::cos(elev), std::sin(phi) * std::cos(elev),
                         std::sin(elev));
            r = ellipse_range(tx, rx, u, tc);
            if (r <= 0.0) break;
            const double dz = zt - rx.z();
            elev = std::asin(std::clamp(dz / std::max(r, 1e-6), -0.9, 0.9));
        }
        if (r <= 0.0) continue;
        const Vec3 u(std::cos(phi) * std::cos(elev), std::sin(phi) * std::cos(elev),
                     std::sin(elev));
        Vec3 pos = rx + r * u;
        if (pos.z() < -0.05 || pos.z() > room_h + 0.05) continue;
        pos.z() = std::clamp(pos.z(), 0.0, room_h);
        return pos;
    }
    // Fallback: along the measured bearing in-plane.
    const Vec3 u(std::cos(o.aoa_rad), std::sin(o.aoa_rad), 0.0);
    const double r = std::max(ellipse_range(tx, rx, u, toa_c), 0.05);
    return rx + r * u;
}

void spawn_track(SlamState& state, const ObservedMpc& o, Rng& rng) {
    Track t;
    t.id = state.next_track_id++;
    t.birth_cycle = state.cycle;
    t.observations = 1;
    t.observed_this_cycle = true;
    t.last_amp = std::abs(o.amplitude);
    t.amp_ema = t.last_amp;
    state.tracks.push_back(t);

    const int nlp = state.cfg.landmark_particles;
    for (auto& p : state.particles) {
        Vec3 tx, rx;
        antenna_positions(p.position, p.velocity, state.cfg, tx, rx);
        LandmarkSet set;
        set.track_id = t.id;
        set.px.resize(nlp);
        set.py.resize(nlp);
        set.pz.resize(nlp);
        set.w.assign(nlp, 1.0 / nlp);
        for (int m = 0; m < nlp; ++m) {
            const Vec3 pos = sample_spawn_position(tx, rx, o, state.cfg.room_height_m, rng);
            set.px[m] = pos.x();
            set.py[m] = pos.y();
            set.pz[m] = pos.z();
        }
        p.sets.push_back(std::move(set));
    }

    // Re-spread the RIS prior over the enlarged track set.
    const double share = 1.0 / static_cast<double>(state.tracks.size());
    double total = 0.0;
    for (auto& [id, prob] : state.belief.p) total += prob;
    for (auto& [id, prob] : state.belief.p) {
        prob *= (1.0 - share) / (total > 0.0 ? total : 1.0);
    }
    state.belief.p[t.id] = share;
}

void prune_track(SlamState& state, int order_index) {
    const int tid = state.tracks[order_index].id;
    state.tracks.erase(state.tracks.begin() + order_index);
    for (auto& p : state.particles) {
        p.sets.erase(p.sets.begin() + order_index);
    }
    state.belief.p.erase(tid);
    double total = 0.0;
    for (auto& [id, prob] : state.belief.p) total += prob;
    if (total > 0.0) {
        for (auto& [id, prob] : state.belief.p) prob /= total;
    }
    // Unpair children of the removed source.
    for (auto& t : state.tracks) {
        if (t.paired_source == tid) t.paired_source = -1;
    }
}

}  // namespace

CycleResult lme_cycle(SlamState& state, const std::vector<ObservedMpc>& observed_in,
                      double dt_s, const RisAmplitudeModel& ris_model,
                      double amp_noise_std, std::uint64_t cycle_seed) {
    state.cycle += 1;
    CycleFlags flags;

    Rng rng_motion(mix_seed(cycle_seed, 0x6d6f74ULL));
    Rng rng_spawn(mix_seed(cycle_seed, 0x737061ULL));
    Rng rng_resample(mix_seed(cycle_seed, 0x726573ULL));

    // Canonical MPC order: the cycle is invariant to caller ordering.
    std::vector<ObservedMpc> observed = observed_in;
    std::sort(observed.begin(), observed.end(),
              [](const ObservedMpc& a, const ObservedMpc& b) {
                  if (a.toa_s != b.toa_s) return a.toa_s < b.toa_s;
                  if (a.aoa_rad != b.aoa_rad) return a.aoa_rad < b.aoa_rad;
                  return std::abs(a.amplitude) < std::abs(b.amplitude);
              });

    // Predicted pose for association and the PT/VT heuristic.
    const Vec3 pred_pos = state.estimate.position + state.estimate.velocity * dt_s;
    Vec3 tx_pred, rx_pred;
    antenna_positions(pred_pos, state.estimate.velocity, state.cfg, tx_pred, rx_pred);
    const double speed_dt = state.estimate.velocity.norm() * dt_s;

    const std::vector<ObservedMpc> filtered = discard_transmitter_mpcs(
        observed, state.discard, tx_pred, rx_pred, speed_dt, state.cfg);

    // Step 1: data association.
    const Association assoc = associate(filtered, state, tx_pred, rx_pred);

    // Step 2: agent particle transition.
    transition_agent_particles(state.particles, dt_s, state.cfg.accel_noise, rng_motion);

    // Step 3: MPC weights.
    const std::vector<double> rho = mpc_weights(filtered);

    // Track bookkeeping for this cycle.
    for (auto& t : state.tracks) {
        t.observed_this_cycle = false;
        t.misses += 1;
    }
    for (std::size_t n = 0; n < filtered.size(); ++n) {
        const int tid = assoc.track_of_mpc[n];
        if (tid < 0) continue;
        Track* t = state.find_track(tid);
        t->observed_this_cycle = true;
        t->misses = 0;
        t->observations += 1;
        t->last_amp = std::abs(filtered[n].amplitude);

        const double toa_c = filtered[n].toa_s * kSpeedOfLight;
        const double sigma_c = filtered[n].sigma_toa_s * kSpeedOfLight;
        const double range = std::max(toa_c * 0.5, 0.1);
        TrackObs po{toa_c, filtered[n].aoa_rad, tx_pred, rx_pred,
                    std::sqrt(0.25 * sigma_c * sigma_c +
                              range * range * filtered[n].sigma_aoa_rad *
                                  filtered[n].sigma_aoa_rad)};
        t->history.push_back(po);
        while (static_cast<int>(t->history.size()) > 8) t->history.pop_front();
    }

    // Steps 4-5: Eq. (13) landmark-weight update and Eq. (14) agent-weight
    // update, in the log domain with unnormalized set sums.
    bool any_update = false;
    std::vector<char> track_updated(state.tracks.size(), 0);
    std::vector<int> mpc_of_track(state.tracks.size(), -1);
    for (std::size_t n = 0; n < filtered.size(); ++n) {
        const int tid = assoc.track_of_mpc[n];
        if (tid < 0) continue;
        const int j = state.track_order_index(tid);
        track_updated[j] = 1;
        mpc_of_track[j] = static_cast<int>(n);
        any_update = true;
    }

    if (any_update) {
        for (auto& part : state.particles) {
            Vec3 tx, rx;
            antenna_positions(part.position, part.velocity, state.cfg, tx, rx);
            double agent_log_factor = 0.0;
            for (std::size_t j = 0; j < state.tracks.size(); ++j) {
                if (!track_updated[j]) continue;
                const int n = mpc_of_track[j];
                const Track& trk = state.tracks[j];

                double extra = -1.0;
                if (trk.paired_source >= 0) {
                    const int sj = state.track_order_index(trk.paired_source);
                    if (sj >= 0) extra = (part.sets[sj].mean() - tx).norm();
                }
                agent_log_factor += update_landmark_set(
                    part.sets[j], tx, rx, filtered[n], rho[n], extra,
                    state.cfg.tempered_rho, &flags.landmark_sets_reset);
            }
            part.log_weight += agent_log_factor;
        }
    } else {
        flags.no_evidence = true;
    }

    // Normalize agent weights.
    {
        double max_lw = -std::numeric_limits<double>::infinity();
        for (const auto& p : state.particles) max_lw = std::max(max_lw, p.log_weight);
        if (!std::isfinite(max_lw)) {
            for (auto& p : state.particles) {
                p.log_weight = -std::log(static_cast<double>(state.particles.size()));
            }
            flags.agent_weights_reset = true;
        } else {
            double sum = 0.0;
            for (const auto& p : state.particles) sum += std::exp(p.log_weight - max_lw);
            const double log_norm = max_lw + std::log(sum);
            for (auto& p : state.particles) p.log_weight -= log_norm;
        }
    }

    // Step 6: landmark birth (after weighting so new tracks carry no
    // evidence yet).
    for (int n : assoc.spawned) {
        spawn_track(state, filtered[n], rng_spawn);
    }

    // Prune tracks that stopped being observed.
    for (int j = static_cast<int>(state.tracks.size()) - 1; j >= 0; --j) {
        if (state.tracks[j].misses > state.cfg.prune_after_misses) {
            prune_track(state, j);
        }
    }

    // Step 6b: normalize/resample. Agent resampling first, then per-set.
    {
        std::vector<double> w(state.particles.size());
        double max_lw = -std::numeric_limits<double>::infinity();
        for (const auto& p : state.particles) max_lw = std::max(max_lw, p.log_weight);
        double sum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] = std::exp(state.particles[i].log_weight - max_lw);
            sum += w[i];
        }
        for (auto& wi : w) wi /= sum;
        if (effective_sample_size(w) <
            state.cfg.resample_ess_frac * static_cast<double>(w.size())) {
            const std::vector<int> picks =
                systematic_resample(w, static_cast<int>(w.size()), rng_resample);
            std::vector<AgentParticle> next(w.size());
            for (std::size_t m = 0; m < picks.size(); ++m) {
                next[m] = state.particles[picks[m]];
                next[m].log_weight = -std::log(static_cast<double>(w.size()));
            }
            state.particles = std::move(next);
        }
    }
    for (auto& part : state.particles) {
        for (auto& set : part.sets) {
            const int nlp = set.size();
            if (nlp == 0) continue;
            if (set.ess() < state.cfg.resample_ess_frac * nlp) {
                const std::vector<int> picks = systematic_resample(set.w, nlp, rng_resample);
                LandmarkSet next;
                next.track_id = set.track_id;
                next.px.resize(nlp);
                next.py.resize(nlp);
                next.pz.resize(nlp);
                next.w.assign(nlp, 1.0 / nlp);
                for (int m = 0; m < nlp; ++m) {
                    next.px[m] = set.px[picks[m]];
                    next.py[m] = set.py[picks[m]];
                    next.pz[m] = set.pz[picks[m]];
                }
                set = std::move(next);
            }
        }
    }

    // Step 7: estimates; refresh track caches.
    state.estimate = estimate_state(state);
    {
        // Observation spread per track from the highest-weight particle.
        int ref = 0;
        for (std::size_t i = 1; i < state.particles.size(); ++i) {
            if (state.particles[i].log_weight > state.particles[ref].log_weight) {
                ref = static_cast<int>(i);
            }
        }
        const AgentParticle& rp = state.particles[ref];
        Vec3 tx, rx;
        antenna_positions(rp.position, rp.velocity, state.cfg, tx, rx);
        for (std::size_t j = 0; j < state.tracks.size(); ++j) {
            Track& t = state.tracks[j];
            for (const auto& [id, pos] : state.estimate.landmarks) {
                if (id == t.id) t.position_est = pos;
            }
            const LandmarkSet& set = rp.sets[j];
            const int nlp = set.size();
            if (nlp == 0) continue;
            double mr = 0.0, ma = 0.0, vr = 0.0, va = 0.0;
            const int stride = std::max(1, nlp / 64);
            int cnt = 0;
            const double ref_aoa =
                std::atan2(set.py[0] - rx.y(), set.px[0] - rx.x());
            for (int m = 0; m < nlp; m += stride) {
                const double dx = set.px[m] - rx.x();
                const double dy = set.py[m] - rx.y();
                const double dz = set.pz[m] - rx.z();
                const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
                const double a = wrap_angle(std::atan2(dy, dx) - ref_aoa);
                mr += r;
                ma += a;
                vr += r * r;
                va += a * a;
                ++cnt;
            }
            mr /= cnt;
            ma /= cnt;
            // Curved particle clouds make the range of the mean position
            // differ from the mean range; cover that bias in the gate.
            const double range_of_mean = (t.position_est - rx).norm();
            const double bias = std::abs(mr - range_of_mean);
            t.sigma_range_m =
                std::sqrt(std::max(vr / cnt - mr * mr, 1e-8)) + bias + 0.01;
            t.sigma_aoa_rad = std::sqrt(std::max(va / cnt - ma * ma, 1e-10)) + 2e-3;
        }
    }

    // RIS belief (Eq. 12) against the commanded-phase amplitude model.
    update_ris_belief(state, filtered, assoc, ris_model, amp_noise_std);
    flags.belief_degenerate = state.belief.degenerate_update;
    for (auto& t : state.tracks) {
        if (t.observed_this_cycle) {
            t.amp_ema = (t.observations <= 1) ? t.last_amp
                                              : 0.7 * t.amp_ema + 0.3 * t.last_amp;
        }
    }

    // VS/VRIS pairing: a virtual track is recognized when subtracting a
    // candidate source's Tx leg makes its back-projected position stop
    // moving.
    {
        int ris_id = state.belief.argmax();
        if (ris_id >= 0 && !state.tracks.empty()) {
            const double maxp = state.belief.p.at(ris_id);
            if (maxp < 1.5 / static_cast<double>(state.tracks.size())) ris_id = -1;
        }
        for (auto& v : state.tracks) {
            if (v.paired_source >= 0) continue;
            if (v.id == ris_id) continue;
            const auto& hist = v.history;
            if (static_cast<int>(hist.size()) < state.cfg.pairing_min_cycles) continue;

            // Window scatter of the implied positions under each source
            // hypothesis; the right extra-leg correction makes a true
            // virtual landmark's implied position stop moving.
            auto scatter_of = [](const std::deque<Vec3>& pts) {
                Vec3 c = Vec3::Zero();
                for (const auto& p : pts) c += p;
                c /= static_cast<double>(pts.size());
                double acc = 0.0;
                for (const auto& p : pts) acc += (p - c).squaredNorm();
                return std::sqrt(acc / pts.size());
            };

            std::deque<Vec3> base;
            double sig = 0.0;
            for (const auto& ob : hist) {
                base.push_back(back_project(ob.tx, ob.rx, ob.toa_c_m, ob.aoa_rad));
                sig += ob.sigma_pos_m;
            }
            sig /= hist.size();
            const double base_scatter = scatter_of(base);

            int best_src = -1;
            double best_scatter = std::numeric_limits<double>::max();
            for (const auto& s : state.tracks) {
                if (s.id == v.id || s.paired_source >= 0) continue;
                if (s.observations < state.cfg.pairing_min_cycles) continue;
                std::deque<Vec3> corr;
                bool ok = true;
                for (const auto& ob : hist) {
                    const double extra = (s.position_est - ob.tx).norm();
                    if (ob.toa_c_m - extra < 0.05) {
                        ok = false;
                        break;
                    }
                    corr.push_back(
                        back_project(ob.tx, ob.rx, ob.toa_c_m, ob.aoa_rad, extra));
                }
                if (!ok) continue;
                const double d = scatter_of(corr);
                if (d < best_scatter) {
                    best_scatter = d;
                    best_src = s.id;
                }
            }
            const double tol = state.cfg.pairing_abs_tol_m + 2.0 * sig;
            if (best_src >= 0 && best_scatter < 0.6 * base_scatter &&
                best_scatter < tol) {
                v.paired_source = best_src;
                // Re-anchor particle sets: keep each particle's direction,
                // correct the range to the one-leg locus.
                const TrackObs& last = hist.back();
                const Track* s = state.find_track(best_src);
                const int j = state.track_order_index(v.id);
                for (auto& part : state.particles) {
                    Vec3 tx, rx;
                    antenna_positions(part.position, part.velocity, state.cfg, tx, rx);
                    const double extra = (s->position_est - tx).norm();
                    LandmarkSet& set = part.sets[j];
                    const int nlp = set.size();
                    for (int m = 0; m < nlp; ++m) {
                        Vec3 dir(set.px[m] - rx.x(), set.py[m] - rx.y(),
                                 set.pz[m] - rx.z());
                        const double dn = dir.norm();
                        if (dn < 1e-9) continue;
                        dir /= dn;
                        const double r =
                            std::max(last.toa_c_m - extra +
                                         rng_spawn.gaussian(0.0, std::max(sig, 1e-4)),
                                     0.05);
                        const Vec3 pos = rx + r * dir;
                        set.px[m] = pos.x();
                        set.py[m] = pos.y();
                        set.pz[m] = std::clamp(pos.z(), 0.0, state.cfg.room_height_m);
                    }
                    set.w.assign(nlp, 1.0 / nlp);
                }
                // Refresh the cached estimate from the re-anchored sets so
                // the next association and this cycle's map see the
                // corrected locus.
                {
                    double max_lw = -std::numeric_limits<double>::infinity();
                    for (const auto& p : state.particles) {
                        max_lw = std::max(max_lw, p.log_weight);
                    }
                    double wsum = 0.0;
                    Vec3 lm = Vec3::Zero();
                    for (const auto& p : state.particles) {
                        const double w = std::exp(p.log_weight - max_lw);
                        lm += w * p.sets[j].mean();
                        wsum += w;
                    }
                    v.position_est = lm / wsum;
                    v.sigma_range_m = std::max(v.sigma_range_m, 0.05);
                    for (auto& e : state.estimate.landmarks) {
                        if (e.first == v.id) e.second = v.position_est;
                    }
                }
            }
        }
    }

    // Step 8: map building.
    CycleResult result;
    result.map = build_map(state);
    result.estimate = state.estimate;
    result.flags = flags;
    state.last_flags = flags;
    return result;
}

}  // namespace risslam
