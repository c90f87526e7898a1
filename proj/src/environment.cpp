#include "risslam/environment.hpp"

#include <algorithm>
#include <cmath>

namespace risslam {

namespace {

constexpr double kUnitTol = 1e-12;
constexpr double kRoomPad = 0.2;  // tolerance for reflection-point containment

double azimuth_of(const Vec3& d) { return std::atan2(d.y(), d.x()); }

Vec3 safe_unit(const Vec3& v) {
    const double n = v.norm();
    return n > 0.0 ? Vec3(v / n) : Vec3::Zero();
}

// Intersection of segment (a -> b) with the reflector plane; returns false if
// the segment does not cross, the hit parameter is degenerate, or the hit
// point misses a bounded face.
bool reflection_point(const Reflector& r, const Vec3& a, const Vec3& b, Vec3& q) {
    const double da = r.normal.dot(a - r.point);
    const double db = r.normal.dot(b - r.point);
    const double denom = da - db;
    if (std::abs(denom) < 1e-15) return false;
    const double t = da / denom;
    if (t <= 1e-9 || t >= 1.0 - 1e-9) return false;
    q = a + t * (b - a);
    if (r.bounded) {
        const Vec3 rel = q - r.point;
        if (std::abs(rel.dot(r.u_axis)) > r.half_u + 1e-9) return false;
        if (std::abs(rel.dot(r.v_axis)) > r.half_v + 1e-9) return false;
    }
    return true;
}

}  // namespace

const char* landmark_kind_name(LandmarkKind k) {
    switch (k) {
        case LandmarkKind::Ps: return "PS";
        case LandmarkKind::Ris: return "RIS";
        case LandmarkKind::Vt: return "VT";
        case LandmarkKind::Vs: return "VS";
        case LandmarkKind::Vris: return "VRIS";
        case LandmarkKind::Direct: return "direct";
    }
    return "?";
}

Reflector Reflector::room_face(const Room& room, const std::string& face,
                               double coefficient) {
    Reflector r;
    r.coefficient = coefficient;
    r.bounded = true;
    const Vec3 e = room.extents;
    const Vec3 c = 0.5 * e;
    if (face == "x0" || face == "x1") {
        const double x = (face == "x0") ? 0.0 : e.x();
        r.point = Vec3(x, c.y(), c.z());
        r.normal = Vec3::UnitX();
        r.u_axis = Vec3::UnitY();
        r.v_axis = Vec3::UnitZ();
        r.half_u = c.y();
        r.half_v = c.z();
    } else if (face == "y0" || face == "y1") {
        const double y = (face == "y0") ? 0.0 : e.y();
        r.point = Vec3(c.x(), y, c.z());
        r.normal = Vec3::UnitY();
        r.u_axis = Vec3::UnitX();
        r.v_axis = Vec3::UnitZ();
        r.half_u = c.x();
        r.half_v = c.z();
    } else if (face == "z0" || face == "z1") {
        const double z = (face == "z0") ? 0.0 : e.z();
        r.point = Vec3(c.x(), c.y(), z);
        r.normal = Vec3::UnitZ();
        r.u_axis = Vec3::UnitX();
        r.v_axis = Vec3::UnitY();
        r.half_u = c.x();
        r.half_v = c.y();
    } else {
        throw ScenarioError("unknown room face: " + face);
    }
    return r;
}

Vec3 Environment::heading(const AgentState& agent) const {
    const Vec3 h = safe_unit(Vec3(agent.velocity.x(), agent.velocity.y(), 0.0));
    return h.isZero() ? Vec3::UnitX() : h;
}

Vec3 Environment::tx_position(const AgentState& agent) const {
    return agent.position + 0.5 * antenna_separation_m * heading(agent) +
           Vec3(0.0, 0.0, antenna_height_m);
}

Vec3 Environment::rx_position(const AgentState& agent) const {
    return agent.position - 0.5 * antenna_separation_m * heading(agent) +
           Vec3(0.0, 0.0, antenna_height_m);
}

Vec3 mirror_point(const Vec3& point, const Reflector& reflector) {
    const double nn = reflector.normal.norm();
    if (std::abs(nn - 1.0) > 1e-9) {
        throw ScenarioError("reflector normal must be unit length");
    }
    const double d = reflector.normal.dot(point - reflector.point);
    return point - 2.0 * d * reflector.normal;
}

std::vector<Landmark> derive_virtual_landmarks(const Environment& env,
                                               const AgentState& agent) {
    std::vector<Landmark> out;
    const Vec3 tx = env.tx_position(agent);

    const bool has_ris = env.ris.has_value() && env.ris->element_count() > 0;

    for (int i = 0; i < static_cast<int>(env.scatterers.size()); ++i) {
        Landmark lm;
        lm.kind = LandmarkKind::Ps;
        lm.position = env.scatterers[i].position;
        lm.source_id = i;
        out.push_back(lm);
    }
    if (has_ris) {
        Landmark lm;
        lm.kind = LandmarkKind::Ris;
        lm.position = env.ris->center;
        out.push_back(lm);
    }
    for (int r = 0; r < static_cast<int>(env.reflectors.size()); ++r) {
        Landmark lm;
        lm.kind = LandmarkKind::Vt;
        lm.position = mirror_point(tx, env.reflectors[r]);
        lm.reflector_id = r;
        out.push_back(lm);
    }
    for (int i = 0; i < static_cast<int>(env.scatterers.size()); ++i) {
        for (int r = 0; r < static_cast<int>(env.reflectors.size()); ++r) {
            Landmark lm;
            lm.kind = LandmarkKind::Vs;
            lm.position = mirror_point(env.scatterers[i].position, env.reflectors[r]);
            lm.extra_delay_m = (tx - env.scatterers[i].position).norm();
            lm.source_id = i;
            lm.reflector_id = r;
            out.push_back(lm);
        }
    }
    if (has_ris) {
        for (int r = 0; r < static_cast<int>(env.reflectors.size()); ++r) {
            Landmark lm;
            lm.kind = LandmarkKind::Vris;
            lm.position = mirror_point(env.ris->center, env.reflectors[r]);
            lm.extra_delay_m = (tx - env.ris->center).norm();
            lm.reflector_id = r;
            out.push_back(lm);
        }
    }
    return out;
}

PathObs predict_point_obs(const Vec3& tx, const Vec3& rx, const Vec3& landmark) {
    PathObs o;
    const Vec3 dt = landmark - tx;
    const Vec3 dr = landmark - rx;
    const double lt = dt.norm();
    const double lr = dr.norm();
    o.length_m = lt + lr;
    o.aoa_rad = azimuth_of(dr);
    if (lt > 0.0 && lr > 0.0) {
        // Both antennas are agent-mounted: gradient is the sum of unit
        // vectors pointing from the landmark toward each antenna.
        const Vec3 g = (tx - landmark) / lt + (rx - landmark) / lr;
        o.dlength_dxy = Vec2(g.x(), g.y());
    }
    return o;
}

PathObs predict_virtual_obs(const Vec3& tx, const Vec3& rx, const Vec3& source,
                            const Vec3& virtual_pos) {
    PathObs o;
    const Vec3 dt = source - tx;
    const Vec3 dr = virtual_pos - rx;
    const double lt = dt.norm();
    const double lr = dr.norm();
    o.length_m = lt + lr;
    o.aoa_rad = azimuth_of(dr);
    if (lt > 0.0 && lr > 0.0) {
        const Vec3 g = (tx - source) / lt + (rx - virtual_pos) / lr;
        o.dlength_dxy = Vec2(g.x(), g.y());
    }
    return o;
}

std::vector<PropagationPath> propagation_paths(const Environment& env,
                                               const AgentState& agent) {
    if (!env.room.contains(agent.position, 1e-9)) {
        throw ScenarioError("agent outside room");
    }
    const Vec3 tx = env.tx_position(agent);
    const Vec3 rx = env.rx_position(agent);
    const auto landmarks = derive_virtual_landmarks(env, agent);

    std::vector<PropagationPath> paths;
    paths.reserve(landmarks.size() + 1);

    if (env.include_direct_path && env.antenna_separation_m > 0.0) {
        PropagationPath p;
        p.kind = LandmarkKind::Direct;
        p.vertices = {tx, rx};
        p.length_m = (rx - tx).norm();
        p.leg_tx_m = p.length_m;
        p.leg_rx_m = p.length_m;
        p.aoa_rad = azimuth_of(tx - rx);
        // Rigid-body pair: length is invariant to agent translation.
        p.dlength_dxy = Vec2::Zero();
        paths.push_back(p);
    }

    for (int li = 0; li < static_cast<int>(landmarks.size()); ++li) {
        const Landmark& lm = landmarks[li];
        PropagationPath p;
        p.landmark_index = li;
        p.kind = lm.kind;
        p.extra_delay_m = lm.extra_delay_m;
        p.via_ris = (lm.kind == LandmarkKind::Ris || lm.kind == LandmarkKind::Vris);
        p.source_id = lm.source_id;
        p.reflector_id = lm.reflector_id;

        switch (lm.kind) {
            case LandmarkKind::Ps:
            case LandmarkKind::Ris: {
                const Vec3& s = lm.position;
                const double lt = (s - tx).norm();
                const double lr = (rx - s).norm();
                if (lt < 1e-9 || lr < 1e-9) continue;  // degenerate
                p.vertices = {tx, s, rx};
                p.leg_tx_m = lt;
                p.leg_rx_m = lr;
                p.length_m = lt + lr;
                const PathObs o = predict_point_obs(tx, rx, s);
                p.aoa_rad = o.aoa_rad;
                p.dlength_dxy = o.dlength_dxy;
                break;
            }
            case LandmarkKind::Vt: {
                const Reflector& refl = env.reflectors[lm.reflector_id];
                Vec3 q;
                if (!reflection_point(refl, lm.position, rx, q)) continue;
                if (!env.room.contains(q, kRoomPad)) continue;
                const double d = (lm.position - rx).norm();
                if (d < 1e-9) continue;
                p.vertices = {tx, q, rx};
                p.leg_tx_m = d;
                p.leg_rx_m = d;
                p.length_m = d;
                p.aoa_rad = azimuth_of(lm.position - rx);
                // Mirror image of the Tx moves with the agent:
                // grad = (M - I) u with M the Householder reflection.
                const Vec3 u = (lm.position - rx) / d;
                const Vec3 g = -2.0 * refl.normal.dot(u) * refl.normal;
                p.dlength_dxy = Vec2(g.x(), g.y());
                break;
            }
            case LandmarkKind::Vs:
            case LandmarkKind::Vris: {
                const Reflector& refl = env.reflectors[lm.reflector_id];
                const Vec3 obj = (lm.kind == LandmarkKind::Vs)
                                     ? env.scatterers[lm.source_id].position
                                     : env.ris->center;
                Vec3 q;
                if (!reflection_point(refl, lm.position, rx, q)) continue;
                if (!env.room.contains(q, kRoomPad)) continue;
                const double lt = (obj - tx).norm();
                const double lr = (lm.position - rx).norm();
                if (lt < 1e-9 || lr < 1e-9) continue;
                p.vertices = {tx, obj, q, rx};
                p.leg_tx_m = lt;
                p.leg_rx_m = lr;
                p.length_m = lt + lr;
                const PathObs o = predict_virtual_obs(tx, rx, obj, lm.position);
                p.aoa_rad = o.aoa_rad;
                p.dlength_dxy = o.dlength_dxy;
                break;
            }
            case LandmarkKind::Direct:
                continue;
        }
        paths.push_back(p);
    }
    return paths;
}

AgentState advance_ground_truth(const Environment& env, const AgentState& agent,
                                double dt_s) {
    if (dt_s < 0.0) throw ScenarioError("negative time step");
    AgentState next = agent;
    next.position += agent.velocity * dt_s;
    if (!env.room.contains(next.position, 1e-9)) {
        throw ScenarioError("ground-truth trajectory leaves the room");
    }
    return next;
}

}  // namespace risslam
