#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "risslam/common.hpp"

namespace risslam {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct Room {
    Vec3 extents{6.0, 6.0, 3.0};  // width, depth, height; corner at origin

    bool contains(const Vec3& p, double tol = 0.0) const {
        return p.x() >= -tol && p.x() <= extents.x() + tol &&
               p.y() >= -tol && p.y() <= extents.y() + tol &&
               p.z() >= -tol && p.z() <= extents.z() + tol;
    }
};

// Smooth specular surface. Bounded reflectors carry an in-plane rectangle
// (half-extents along u/v) used for the reflection-point validity check;
// unbounded ones act as infinite planes.
struct Reflector {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitX();
    double coefficient = 0.85;  // reflection coefficient R in [0, 1]
    bool bounded = false;
    Vec3 u_axis = Vec3::UnitY();
    Vec3 v_axis = Vec3::UnitZ();
    double half_u = 0.0;
    double half_v = 0.0;

    // Room face by name: one of x0, x1, y0, y1, z0, z1.
    static Reflector room_face(const Room& room, const std::string& face,
                               double coefficient);
};

struct Scatterer {
    Vec3 position = Vec3::Zero();
    double rcs = 0.0;     // radar cross-section sigma, m^2
    double radius = 0.0;  // sphere radius used for rendering/derived rcs
};

enum class RisPattern { Cosine, Isotropic };

struct RisPanel {
    Vec3 center{3.0, 3.0, 3.0};
    Vec3 normal{0.0, 0.0, -1.0};   // points into the room
    Vec3 u_axis{1.0, 0.0, 0.0};    // row direction
    Vec3 v_axis{0.0, 1.0, 0.0};    // column direction
    int rows = 6;
    int cols = 6;
    double dx = 0.015;             // element width along v (cols)
    double dy = 0.015;             // element height along u (rows)
    double element_gain = kPi;     // G_R; default aperture gain 4*pi*dx*dy/lambda^2 at 10 GHz
    double amplitude = 1.0;        // reflection amplitude A in (0, 1]
    int phase_levels = 4;          // H
    RisPattern pattern = RisPattern::Cosine;

    int element_count() const { return rows * cols; }
    double delta_theta() const { return 2.0 * kPi / phase_levels; }

    // Offset of element (n, m) from the panel center, n in [0, rows),
    // m in [0, cols); offsets are symmetric about the center.
    Vec3 element_offset(int n, int m) const {
        return (n - 0.5 * (rows - 1)) * dy * u_axis + (m - 0.5 * (cols - 1)) * dx * v_axis;
    }
    Vec3 element_position(int n, int m) const { return center + element_offset(n, m); }

    // Radiation pattern F(theta, phi) >= 0 toward a target seen from `from`.
    double pattern_gain(const Vec3& from, const Vec3& target) const {
        if (pattern == RisPattern::Isotropic) return 1.0;
        const Vec3 d = target - from;
        const double n = d.norm();
        if (n <= 0.0) return 0.0;
        return std::max(0.0, normal.dot(d) / n);
    }

    double aperture_m() const { return std::max(rows * dy, cols * dx); }
    double far_field_distance_m(double wavelength) const {
        const double d = aperture_m();
        return 2.0 * d * d / wavelength;
    }
};

struct AgentState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

enum class LandmarkKind { Ps, Ris, Vt, Vs, Vris, Direct };

const char* landmark_kind_name(LandmarkKind k);

// A (possibly virtual) signal source with fixed position. extra_delay_m is
// path length traversed before the landmark (Tx->object leg of channel 3);
// it depends on the agent pose for VS/VRIS and is zero for PS/RIS.
struct Landmark {
    LandmarkKind kind = LandmarkKind::Ps;
    Vec3 position = Vec3::Zero();
    double extra_delay_m = 0.0;
    int source_id = -1;     // index of generating scatterer, or -1 for RIS
    int reflector_id = -1;  // mirroring reflector for Vt/Vs/Vris
};

struct PropagationPath {
    int landmark_index = -1;  // index into the derive_virtual_landmarks list; -1 = direct
    LandmarkKind kind = LandmarkKind::Direct;
    std::vector<Vec3> vertices;  // Tx, intermediate physical points, Rx
    double length_m = 0.0;       // includes extra_delay_m
    double extra_delay_m = 0.0;
    double aoa_rad = 0.0;        // azimuth of (virtual source - Rx)
    bool via_ris = false;
    Vec2 dlength_dxy = Vec2::Zero();  // gradient of length w.r.t. agent (x, y)
    // Leg lengths for gain evaluation: Tx->object and object->Rx (unfolded).
    double leg_tx_m = 0.0;
    double leg_rx_m = 0.0;
    int source_id = -1;     // generating scatterer (Ps/Vs)
    int reflector_id = -1;  // mirroring reflector (Vt/Vs/Vris)
};

struct Environment {
    Room room;
    std::vector<Reflector> reflectors;
    std::vector<Scatterer> scatterers;
    std::optional<RisPanel> ris;
    double antenna_separation_m = 0.1;  // Tx-Rx spacing along the heading
    double antenna_height_m = 0.0;
    bool include_direct_path = true;

    Vec3 heading(const AgentState& agent) const;
    Vec3 tx_position(const AgentState& agent) const;
    Vec3 rx_position(const AgentState& agent) const;
};

// Reflection of a point across a reflector plane. Involution.
Vec3 mirror_point(const Vec3& point, const Reflector& reflector);

// Landmarks of the scene at the given agent pose: one PS per scatterer, the
// RIS, one VT per reflector, one VS/VRIS per (scatterer-or-RIS, reflector)
// pair. Fails if more than one RIS is configured.
std::vector<Landmark> derive_virtual_landmarks(const Environment& env,
                                               const AgentState& agent);

// Geometric propagation paths for every visible landmark (plus the direct
// Tx->Rx path when enabled). Paths with out-of-room or off-face reflection
// points, zero-length legs, or a blocked RIS pattern are excluded.
std::vector<PropagationPath> propagation_paths(const Environment& env,
                                               const AgentState& agent);

// Constant-velocity ground truth. Throws ScenarioError if the agent leaves
// the room.
AgentState advance_ground_truth(const Environment& env, const AgentState& agent,
                                double dt_s);

// Predicted observation geometry shared by the simulator, the filter and the
// CRLB context: two-leg model for point landmarks, extra-leg + one-leg model
// for paired virtual landmarks.
struct PathObs {
    double length_m = 0.0;
    double aoa_rad = 0.0;
    Vec2 dlength_dxy = Vec2::Zero();
};

PathObs predict_point_obs(const Vec3& tx, const Vec3& rx, const Vec3& landmark);
PathObs predict_virtual_obs(const Vec3& tx, const Vec3& rx, const Vec3& source,
                            const Vec3& virtual_pos);

}  // namespace risslam
