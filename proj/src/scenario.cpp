#include "risslam/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace risslam {

using nlohmann::json;

void CycleConfig::validate() const {
    if (cycle_s <= 0.0 || cycles <= 0) throw ScenarioError("invalid cycle config");
    if (optimization_s + communication_s >= cycle_s) {
        throw ScenarioError("optimization + communication latency must fit in a cycle");
    }
}

Scenario default_scenario() {
    Scenario sc;
    sc.env.room.extents = Vec3(6.0, 6.0, 3.0);
    sc.env.reflectors.push_back(Reflector::room_face(sc.env.room, "x0", 0.85));

    Scatterer s;
    s.position = Vec3(2.0, 1.0, 1.0);
    s.radius = 0.05;
    s.rcs = kPi * s.radius * s.radius;  // geometric-optics sphere
    sc.env.scatterers.push_back(s);

    RisPanel ris;
    ris.center = Vec3(3.0, 3.0, 3.0);
    ris.normal = Vec3(0.0, 0.0, -1.0);
    ris.u_axis = Vec3(1.0, 0.0, 0.0);
    ris.v_axis = Vec3(0.0, 1.0, 0.0);
    ris.rows = 6;
    ris.cols = 6;
    ris.dx = 0.015;
    ris.dy = 0.015;
    ris.amplitude = 1.0;
    ris.phase_levels = 4;
    sc.env.ris = ris;

    sc.env.antenna_separation_m = 0.1;
    sc.env.antenna_height_m = 0.0;
    sc.env.include_direct_path = true;

    sc.agent_start.position = Vec3(0.0, 0.0, 0.0);
    sc.agent_start.velocity = Vec3(0.0707, 0.0707, 0.0);

    sc.waveform = Waveform::root_raised_cosine(10e9, 2e9, 0.25, 5e9, 1.2e-7);
    // Element gain: aperture gain of a dx x dy patch at the carrier.
    sc.env.ris->element_gain =
        4.0 * kPi * ris.dx * ris.dy / (sc.waveform.wavelength_m * sc.waveform.wavelength_m);

    sc.rx_antennas = 4;
    sc.cycle.cycles = 600;
    sc.cycle.cycle_s = 0.1;

    sc.slam.agent_particles = 2000;
    sc.slam.landmark_particles = 6000;
    sc.slam.antenna_separation_m = sc.env.antenna_separation_m;
    sc.slam.antenna_height_m = sc.env.antenna_height_m;
    sc.slam.room_height_m = sc.env.room.extents.z();

    return sc;
}

void apply_desk_profile(Scenario& sc) {
    sc.cycle.cycles = 200;
    sc.slam.agent_particles = 200;
    sc.slam.landmark_particles = 600;
}

void calibrate_noise(Scenario& sc) {
    sc.cycle.validate();
    const AgentState agent = sc.agent_start;
    const ArrayGeometry array = ArrayGeometry::make(
        sc.rx_antennas, sc.waveform.wavelength_m,
        std::atan2(sc.env.heading(agent).y(), sc.env.heading(agent).x()));

    // Reference signal: static landmarks only (PS/VS/RIS/VRIS) at the start
    // pose under neutral phases. Direct coupling and VT artifacts are kept
    // out of the reference so the SNR scales the information-bearing MPCs.
    PhaseConfig neutral;
    if (sc.env.ris) {
        neutral = PhaseConfig::uniform(sc.env.ris->rows, sc.env.ris->cols,
                                       sc.env.ris->phase_levels,
                                       sc.env.ris->phase_levels);
    }
    auto paths = propagation_paths(sc.env, agent);
    paths.erase(std::remove_if(paths.begin(), paths.end(),
                               [](const PropagationPath& p) {
                                   return p.kind == LandmarkKind::Direct ||
                                          p.kind == LandmarkKind::Vt;
                               }),
                paths.end());
    const auto mpcs = mpcs_for_paths(paths, sc.env, sc.waveform, array,
                                     sc.antenna_gain, neutral);
    if (mpcs.empty()) throw ScenarioError("calibration scene produces no static MPCs");

    const ReceivedSignal ref = synthesize_received(mpcs, sc.waveform, array, 0.0, 0);
    sc.reference_energy = ref.samples.squaredNorm();
    double ref_amp = 0.0;
    for (const auto& m : mpcs) ref_amp = std::max(ref_amp, std::abs(m.gain));
    sc.reference_amp = ref_amp;

    const double snr_lin = std::pow(10.0, sc.snr_db / 10.0);
    const double lu = static_cast<double>(ref.samples.rows()) *
                      static_cast<double>(ref.samples.cols());
    // Include the noise contribution to ||Y||^2 when the target SNR allows,
    // so the measured Section-V ratio lands on the configured value.
    const double divisor = snr_lin > 2.0 ? (snr_lin - 1.0) : snr_lin;
    sc.sigma_n2 = sc.reference_energy / (lu * divisor);

    NoiseModel nm;
    nm.n0 = sc.sigma_n2 / sc.waveform.sample_rate_hz;
    nm.zeta_sq_hz2 = sc.waveform.zeta_sq_hz2;
    nm.toa_device_floor_s = sc.toa_device_floor_s;
    // sigma_phi = aoa_coeff * sqrt(N0) / amp == aoa_ref at (N0, ref_amp).
    nm.aoa_coeff = deg2rad(sc.aoa_ref_deg) * ref_amp / std::sqrt(nm.n0);
    // Detection threshold: single-MPC energy SNR |a|^2 E_s / N0 at the cutoff.
    nm.detection_threshold =
        std::sqrt(std::pow(10.0, sc.detection_snr_db / 10.0) * nm.n0);
    sc.noise = nm;
    sc.calibrated = true;
}

void set_snr(Scenario& sc, double snr_db) {
    sc.snr_db = snr_db;
    calibrate_noise(sc);
}

namespace {

Vec3 vec3_of(const json& a) {
    if (!a.is_array() || a.size() != 3) throw ScenarioError("expected [x, y, z]");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("scenario parse error: ") + e.what());
    }

    Scenario sc = default_scenario();
    sc.env.reflectors.clear();
    sc.env.scatterers.clear();
    sc.env.ris.reset();

    if (j.contains("room")) {
        sc.env.room.extents = vec3_of(j["room"].at("extents"));
    }
    for (const auto& r : j.value("reflectors", json::array())) {
        if (r.contains("face")) {
            sc.env.reflectors.push_back(Reflector::room_face(
                sc.env.room, r["face"].get<std::string>(),
                r.value("reflection_coefficient", 0.85)));
        } else {
            Reflector refl;
            refl.point = vec3_of(r.at("point"));
            refl.normal = vec3_of(r.at("normal")).normalized();
            refl.coefficient = r.value("reflection_coefficient", 0.85);
            sc.env.reflectors.push_back(refl);
        }
    }
    for (const auto& s : j.value("scatterers", json::array())) {
        Scatterer sct;
        sct.position = vec3_of(s.at("position"));
        sct.radius = s.value("radius", 0.05);
        sct.rcs = s.value("rcs", kPi * sct.radius * sct.radius);
        sc.env.scatterers.push_back(sct);
    }
    if (j.contains("ris")) {
        const auto& r = j["ris"];
        RisPanel ris;
        ris.center = vec3_of(r.at("center"));
        if (r.contains("normal")) ris.normal = vec3_of(r["normal"]).normalized();
        if (r.contains("x_axis")) ris.u_axis = vec3_of(r["x_axis"]).normalized();
        ris.v_axis = ris.normal.cross(ris.u_axis).normalized();
        ris.rows = r.value("rows", 6);
        ris.cols = r.value("cols", 6);
        ris.dx = r.value("element_size", 0.015);
        ris.dy = ris.dx;
        ris.amplitude = r.value("reflection_amplitude", 1.0);
        ris.phase_levels = r.value("phase_levels", 4);
        if (r.value("pattern", std::string("cosine")) == "isotropic") {
            ris.pattern = RisPattern::Isotropic;
        }
        if (ris.rows > 0 && ris.cols > 0) sc.env.ris = ris;
    }
    if (j.contains("agent")) {
        const auto& a = j["agent"];
        sc.agent_start.position = vec3_of(a.at("start"));
        sc.agent_start.velocity = vec3_of(a.at("velocity"));
        sc.env.antenna_separation_m = a.value("antenna_separation", 0.1);
        sc.env.antenna_height_m = a.value("antenna_height", 0.0);
        sc.rx_antennas = a.value("rx_antennas", 4);
    }
    if (j.contains("waveform")) {
        const auto& w = j["waveform"];
        sc.waveform = Waveform::root_raised_cosine(
            w.value("carrier_hz", 10e9), w.value("bandwidth_hz", 2e9),
            w.value("rolloff", 0.25), w.value("sample_rate_hz", 5e9),
            w.value("duration_s", 1.2e-7));
    }
    if (sc.env.ris) {
        sc.env.ris->element_gain =
            j.contains("ris") && j["ris"].contains("element_gain")
                ? j["ris"]["element_gain"].get<double>()
                : 4.0 * kPi * sc.env.ris->dx * sc.env.ris->dy /
                      (sc.waveform.wavelength_m * sc.waveform.wavelength_m);
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        sc.snr_db = n.value("snr_db", 20.0);
        sc.toa_device_floor_s = n.value("toa_device_floor_s", 0.5e-9);
        sc.aoa_ref_deg = n.value("aoa_ref_deg", 2.0);
        sc.detection_snr_db = n.value("detection_snr_db", 0.0);
    }
    if (j.contains("run")) {
        const auto& r = j["run"];
        sc.cycle.cycles = r.value("cycles", 600);
        sc.cycle.cycle_s = r.value("cycle_s", 0.1);
        sc.cycle.optimization_s = r.value("optimization_s", 0.02);
        sc.cycle.communication_s = r.value("communication_s", 0.01);
        sc.env.include_direct_path = r.value("include_direct_path", true);
        sc.seed = r.value("seed", 1);
    }
    if (j.contains("filter")) {
        const auto& f = j["filter"];
        sc.slam.agent_particles = f.value("agent_particles", 2000);
        sc.slam.landmark_particles = f.value("landmark_particles", 6000);
        sc.slam.accel_noise = f.value("accel_noise", 0.01);
        sc.slam.resample_ess_frac = f.value("resample_ess_frac", 0.5);
        sc.slam.min_delay_m = f.value("min_delay_m", 0.3);
        sc.slam.tempered_rho = f.value("tempered_rho", false);
        sc.slam.max_tracks = f.value("max_tracks", 16);
    }
    if (j.contains("ga")) {
        const auto& g = j["ga"];
        sc.ga.population = g.value("pop", 32);
        sc.ga.elites = g.value("elites", 4);
        sc.ga.iterations = g.value("iters", 40);
        sc.ga.mutation_p = g.value("pm", 0.05);
        sc.ga.warm_start = g.value("warm_start", true);
    }
    sc.slam.antenna_separation_m = sc.env.antenna_separation_m;
    sc.slam.antenna_height_m = sc.env.antenna_height_m;
    sc.slam.room_height_m = sc.env.room.extents.z();
    sc.cycle.validate();
    return sc;
}

std::string scenario_to_json(const Scenario& sc) {
    json j;
    j["room"]["extents"] = vec3_json(sc.env.room.extents);
    j["reflectors"] = json::array();
    for (const auto& r : sc.env.reflectors) {
        json jr;
        jr["point"] = vec3_json(r.point);
        jr["normal"] = vec3_json(r.normal);
        jr["reflection_coefficient"] = r.coefficient;
        j["reflectors"].push_back(jr);
    }
    j["scatterers"] = json::array();
    for (const auto& s : sc.env.scatterers) {
        json js;
        js["position"] = vec3_json(s.position);
        js["radius"] = s.radius;
        js["rcs"] = s.rcs;
        j["scatterers"].push_back(js);
    }
    if (sc.env.ris) {
        const auto& r = *sc.env.ris;
        j["ris"] = {{"center", vec3_json(r.center)},
                    {"normal", vec3_json(r.normal)},
                    {"rows", r.rows},
                    {"cols", r.cols},
                    {"element_size", r.dx},
                    {"element_gain", r.element_gain},
                    {"reflection_amplitude", r.amplitude},
                    {"phase_levels", r.phase_levels}};
    }
    j["agent"] = {{"start", vec3_json(sc.agent_start.position)},
                  {"velocity", vec3_json(sc.agent_start.velocity)},
                  {"antenna_separation", sc.env.antenna_separation_m},
                  {"antenna_height", sc.env.antenna_height_m},
                  {"rx_antennas", sc.rx_antennas}};
    j["waveform"] = {{"carrier_hz", sc.waveform.carrier_hz},
                     {"bandwidth_hz", sc.waveform.bandwidth_hz},
                     {"rolloff", sc.waveform.rolloff},
                     {"sample_rate_hz", sc.waveform.sample_rate_hz},
                     {"duration_s", sc.waveform.duration_s}};
    j["noise"] = {{"snr_db", sc.snr_db},
                  {"toa_device_floor_s", sc.toa_device_floor_s},
                  {"aoa_ref_deg", sc.aoa_ref_deg},
                  {"detection_snr_db", sc.detection_snr_db}};
    j["run"] = {{"cycles", sc.cycle.cycles},
                {"cycle_s", sc.cycle.cycle_s},
                {"optimization_s", sc.cycle.optimization_s},
                {"communication_s", sc.cycle.communication_s},
                {"include_direct_path", sc.env.include_direct_path},
                {"seed", sc.seed}};
    j["filter"] = {{"agent_particles", sc.slam.agent_particles},
                   {"landmark_particles", sc.slam.landmark_particles},
                   {"accel_noise", sc.slam.accel_noise},
                   {"min_delay_m", sc.slam.min_delay_m}};
    j["ga"] = {{"pop", sc.ga.population},
               {"elites", sc.ga.elites},
               {"iters", sc.ga.iterations},
               {"pm", sc.ga.mutation_p},
               {"warm_start", sc.ga.warm_start}};
    return j.dump(2);
}

}  // namespace risslam
