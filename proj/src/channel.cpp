#include "risslam/channel.hpp"

#include <algorithm>
#include <cmath>

#include "risslam/rng.hpp"

namespace risslam {

namespace {

const Complex kJ{0.0, 1.0};

double four_pi_pow_3_2() {
    static const double v = std::pow(4.0 * kPi, 1.5);
    return v;
}

}  // namespace

ArrayGeometry ArrayGeometry::make(int count, double wavelength_m,
                                  double axis_azimuth_rad) {
    ArrayGeometry g;
    g.count = count;
    g.spacing_m = 0.5 * wavelength_m;
    g.axis_azimuth_rad = axis_azimuth_rad;
    return g;
}

Complex ArrayGeometry::response(int l, double aoa_rad, double wavelength_m) const {
    const double proj = offset_m(l) * std::cos(aoa_rad - axis_azimuth_rad);
    return std::exp(-kJ * (2.0 * kPi * proj / wavelength_m));
}

PhaseConfig PhaseConfig::uniform(int rows, int cols, int levels, int value) {
    PhaseConfig c;
    c.rows = rows;
    c.cols = cols;
    c.levels = levels;
    c.h.assign(static_cast<std::size_t>(rows) * cols, value);
    return c;
}

bool PhaseConfig::valid() const {
    if (rows < 0 || cols < 0 || levels < 1) return false;
    if (h.size() != static_cast<std::size_t>(rows) * cols) return false;
    for (int v : h) {
        if (v < 1 || v > levels) return false;
    }
    return true;
}

Complex reflector_gain(double length_m, const Waveform& wf, double antenna_gain,
                       double coefficient) {
    if (length_m <= 0.0) throw ScenarioError("reflector path of zero length");
    const double lam = wf.wavelength_m;
    const double amp = lam * coefficient * std::sqrt(antenna_gain) /
                       (4.0 * kPi * length_m);
    return amp * std::exp(-kJ * (2.0 * kPi * length_m / lam));
}

Complex scatterer_gain(double leg_tx_m, double leg_rx_m, const Waveform& wf,
                       double antenna_gain, double rcs_m2) {
    if (leg_tx_m <= 0.0 || leg_rx_m <= 0.0) {
        throw ScenarioError("scatterer path with zero-length leg");
    }
    const double lam = wf.wavelength_m;
    const double d2 = leg_tx_m + leg_rx_m;
    const double amp = lam * std::sqrt(antenna_gain * rcs_m2) /
                       (four_pi_pow_3_2() * leg_tx_m * leg_rx_m);
    return amp * std::exp(-kJ * (2.0 * kPi * d2 / lam));
}

Complex ris_element_gain(const RisPanel& panel, int n, int m, const Vec3& tx,
                         const Vec3& rx, const Waveform& wf, double antenna_gain,
                         const PhaseConfig& cfg) {
    const Vec3 z = panel.element_position(n, m);
    const double rt = (tx - z).norm();
    const double rr = (rx - z).norm();
    if (rt <= 0.0 || rr <= 0.0) throw ScenarioError("RIS element coincides with antenna");
    const double ft = panel.pattern_gain(z, tx);
    const double fr = panel.pattern_gain(z, rx);
    if (std::abs(panel.normal.dot(tx - z)) < 1e-12 ||
        std::abs(panel.normal.dot(rx - z)) < 1e-12) {
        throw ScenarioError("Tx/Rx in the RIS panel plane");
    }
    const double lam = wf.wavelength_m;
    const double amp = lam *
                       std::sqrt(antenna_gain * panel.element_gain * ft * fr *
                                 panel.dx * panel.dy) /
                       (four_pi_pow_3_2() * rt * rr);
    const double xi = cfg.phase(n, m);
    return amp * panel.amplitude *
           std::exp(-kJ * (2.0 * kPi * (rt + rr) / lam + xi));
}

Complex ris_exact_sum(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                      const Waveform& wf, double antenna_gain,
                      const PhaseConfig& cfg) {
    Complex sum{0.0, 0.0};
    for (int n = 0; n < panel.rows; ++n) {
        for (int m = 0; m < panel.cols; ++m) {
            sum += ris_element_gain(panel, n, m, tx, rx, wf, antenna_gain, cfg);
        }
    }
    return sum;
}

double ris_element_amplitude(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                             const Waveform& wf, double antenna_gain) {
    const double dt = (tx - panel.center).norm();
    const double dr = (rx - panel.center).norm();
    if (dt <= 0.0 || dr <= 0.0) return 0.0;
    const double ft = panel.pattern_gain(panel.center, tx);
    const double fr = panel.pattern_gain(panel.center, rx);
    return wf.wavelength_m *
           std::sqrt(antenna_gain * panel.element_gain * ft * fr * panel.dx *
                     panel.dy) /
           (four_pi_pow_3_2() * dt * dr);
}

RisAggregate ris_aggregate_gain(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                                const Waveform& wf, double antenna_gain,
                                const PhaseConfig& cfg) {
    RisAggregate out;
    const double lam = wf.wavelength_m;
    const double dt = (tx - panel.center).norm();
    const double dr = (rx - panel.center).norm();
    if (dt <= 0.0 || dr <= 0.0) return out;
    const double ff = panel.far_field_distance_m(lam);
    out.near_field = (dt < ff || dr < ff);

    const double common = ris_element_amplitude(panel, tx, rx, wf, antenna_gain);
    const Vec3 zt = (tx - panel.center) / dt;
    const Vec3 zr = (rx - panel.center) / dr;
    const double d3 = dt + dr;

    Complex sum{0.0, 0.0};
    for (int n = 0; n < panel.rows; ++n) {
        for (int m = 0; m < panel.cols; ++m) {
            const Vec3 z = panel.element_offset(n, m);
            const double geom = d3 - z.dot(zt) - z.dot(zr);
            const double xi = cfg.phase(n, m);
            sum += std::exp(-kJ * (2.0 * kPi * geom / lam + xi));
        }
    }
    out.gain = common * panel.amplitude * sum;
    return out;
}

PhaseConfig phase_align(const RisPanel& panel, const Vec3& tx, const Vec3& rx,
                        const Waveform& wf, int levels) {
    // Each summand has geometry phase psi_nm; choosing h aligns it to a
    // common reference theta. |sum| as a function of theta is piecewise
    // sinusoidal with breakpoints where an element switches level, so the
    // exact maximum is attained at a breakpoint or an interior stationary
    // point of one piece.
    const double lam = wf.wavelength_m;
    const double dt = (tx - panel.center).norm();
    const double dr = (rx - panel.center).norm();
    const Vec3 zt = (tx - panel.center) / dt;
    const Vec3 zr = (rx - panel.center) / dr;
    const double d3 = dt + dr;
    const double dtheta = 2.0 * kPi / levels;

    const int count = panel.element_count();
    std::vector<double> psi(count);
    for (int n = 0; n < panel.rows; ++n) {
        for (int m = 0; m < panel.cols; ++m) {
            const Vec3 z = panel.element_offset(n, m);
            psi[n * panel.cols + m] = -2.0 * kPi * (d3 - z.dot(zt) - z.dot(zr)) / lam;
        }
    }

    auto levels_for = [&](double theta, std::vector<int>& h) {
        for (int i = 0; i < count; ++i) {
            // Summand phase psi - h*dtheta; align to theta.
            const double want = psi[i] - theta;
            int hi = static_cast<int>(std::lround(want / dtheta));
            hi = ((hi - 1) % levels + levels) % levels + 1;  // wrap to {1..H}
            h[i] = hi;
        }
    };
    auto sum_for = [&](const std::vector<int>& h) {
        Complex s{0.0, 0.0};
        for (int i = 0; i < count; ++i) {
            s += std::exp(kJ * (psi[i] - h[i] * dtheta));
        }
        return s;
    };

    // Candidate thetas: one breakpoint per element within one quantization
    // period, plus the per-piece stationary point arg(sum).
    std::vector<double> breaks;
    breaks.reserve(count + 1);
    for (int i = 0; i < count; ++i) {
        double b = std::fmod(psi[i] + 0.5 * dtheta, dtheta);
        if (b < 0.0) b += dtheta;
        breaks.push_back(b);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.push_back(breaks.empty() ? dtheta : breaks.front() + dtheta);

    std::vector<int> h(count), best_h(count);
    double best = -1.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
        levels_for(mid, h);
        Complex s = sum_for(h);
        if (std::abs(s) > best) {
            best = std::abs(s);
            best_h = h;
        }
        // Interior stationary point of this piece.
        const double th = std::arg(s);
        levels_for(th, h);
        s = sum_for(h);
        if (std::abs(s) > best) {
            best = std::abs(s);
            best_h = h;
        }
    }

    PhaseConfig cfg;
    cfg.rows = panel.rows;
    cfg.cols = panel.cols;
    cfg.levels = levels;
    cfg.h = best_h;
    return cfg;
}

std::vector<Mpc> mpcs_for_paths(const std::vector<PropagationPath>& paths,
                                const Environment& env, const Waveform& wf,
                                const ArrayGeometry& array, double antenna_gain,
                                const PhaseConfig& cfg) {
    std::vector<Mpc> out;
    out.reserve(paths.size());
    for (const auto& p : paths) {
        Mpc mpc;
        mpc.delay_s = p.length_m / kSpeedOfLight;
        mpc.aoa_rad = p.aoa_rad;
        mpc.landmark_index = p.landmark_index;
        mpc.kind = p.kind;
        const Vec3 rx = p.vertices.back();
        switch (p.kind) {
            case LandmarkKind::Direct:
                // Free-space line-of-sight coupling between the two antennas.
                mpc.gain = reflector_gain(p.length_m, wf, antenna_gain, 1.0);
                break;
            case LandmarkKind::Vt:
                mpc.gain = reflector_gain(p.length_m, wf, antenna_gain,
                                          env.reflectors[p.reflector_id].coefficient);
                break;
            case LandmarkKind::Ps:
                mpc.gain = scatterer_gain(p.leg_tx_m, p.leg_rx_m, wf, antenna_gain,
                                          env.scatterers[p.source_id].rcs);
                break;
            case LandmarkKind::Vs:
                // Channel 3 combines Eq. (2) and Eq. (3): scatterer bounce
                // with the reflected second leg scaled by R.
                mpc.gain = env.reflectors[p.reflector_id].coefficient *
                           scatterer_gain(p.leg_tx_m, p.leg_rx_m, wf, antenna_gain,
                                          env.scatterers[p.source_id].rcs);
                break;
            case LandmarkKind::Ris: {
                const RisAggregate agg =
                    ris_aggregate_gain(*env.ris, p.vertices.front(), rx, wf,
                                       antenna_gain, cfg);
                mpc.gain = agg.gain;
                mpc.near_field = agg.near_field;
                break;
            }
            case LandmarkKind::Vris: {
                // Unfold the reflected leg: the panel radiates toward the
                // mirror image of the Rx.
                const Reflector& refl = env.reflectors[p.reflector_id];
                const Vec3 rx_mirror = mirror_point(rx, refl);
                const RisAggregate agg =
                    ris_aggregate_gain(*env.ris, p.vertices.front(), rx_mirror, wf,
                                       antenna_gain, cfg);
                mpc.gain = refl.coefficient * agg.gain;
                mpc.near_field = agg.near_field;
                break;
            }
        }
        if (std::abs(mpc.gain) <= 0.0) continue;
        mpc.antenna_response.resize(array.count);
        for (int l = 0; l < array.count; ++l) {
            mpc.antenna_response[l] = array.response(l, mpc.aoa_rad, wf.wavelength_m);
        }
        out.push_back(mpc);
    }
    return out;
}

ReceivedSignal synthesize_received(const std::vector<Mpc>& mpcs, const Waveform& wf,
                                   const ArrayGeometry& array, double sigma_n2,
                                   std::uint64_t seed) {
    const int U = wf.sample_count();
    ReceivedSignal sig;
    sig.samples = Eigen::MatrixXcd::Zero(array.count, U);
    sig.noise_variance = sigma_n2;
    sig.sample_rate_hz = wf.sample_rate_hz;

    const double dt = 1.0 / wf.sample_rate_hz;
    const double support = 16.0 * wf.symbol_time_s;
    for (const auto& mpc : mpcs) {
        const int u_lo = std::max(0, static_cast<int>((mpc.delay_s - support) / dt));
        const int u_hi = std::min(U, static_cast<int>((mpc.delay_s + support) / dt) + 1);
        for (int l = 0; l < array.count; ++l) {
            const Complex bl = array.response(l, mpc.aoa_rad, wf.wavelength_m);
            const Complex a = mpc.gain * bl;
            for (int u = u_lo; u < u_hi; ++u) {
                sig.samples(l, u) += a * wf.pulse(u * dt - mpc.delay_s);
            }
        }
    }
    if (sigma_n2 > 0.0) {
        Rng rng(mix_seed(seed, 0x6e6f697365ULL));
        for (int l = 0; l < array.count; ++l) {
            for (int u = 0; u < U; ++u) {
                sig.samples(l, u) += rng.complex_gaussian(sigma_n2);
            }
        }
    }
    return sig;
}

double measured_snr(const ReceivedSignal& sig) {
    const double energy = sig.samples.squaredNorm();
    const double denom = static_cast<double>(sig.samples.rows()) *
                         static_cast<double>(sig.samples.cols()) * sig.noise_variance;
    return energy / denom;
}

double matched_filter_peak(const ReceivedSignal& sig, const Waveform& wf, int l) {
    const int U = static_cast<int>(sig.samples.cols());
    const double dt = 1.0 / wf.sample_rate_hz;
    // Correlate with the pulse on the sample grid.
    const int half = static_cast<int>(16.0 * wf.symbol_time_s / dt);
    std::vector<double> mag(U, 0.0);
    for (int u0 = 0; u0 < U; ++u0) {
        Complex acc{0.0, 0.0};
        for (int k = -half; k <= half; ++k) {
            const int u = u0 + k;
            if (u < 0 || u >= U) continue;
            acc += sig.samples(l, u) * wf.pulse(k * dt);
        }
        mag[u0] = std::abs(acc);
    }
    int peak = 0;
    for (int u = 1; u < U; ++u) {
        if (mag[u] > mag[peak]) peak = u;
    }
    double tau = peak * dt;
    if (peak > 0 && peak + 1 < U) {
        const double y0 = mag[peak - 1], y1 = mag[peak], y2 = mag[peak + 1];
        const double den = y0 - 2.0 * y1 + y2;
        if (std::abs(den) > 1e-30) {
            tau += 0.5 * (y0 - y2) / den * dt;
        }
    }
    return tau;
}

}  // namespace risslam
