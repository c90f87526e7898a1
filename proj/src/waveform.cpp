#include "risslam/waveform.hpp"

#include <cmath>
#include <stdexcept>

#include "risslam/common.hpp"

namespace risslam {

namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-8) {
        const double px = kPi * x;
        return 1.0 - px * px / 6.0;
    }
    return std::sin(kPi * x) / (kPi * x);
}

// cos(pi b x) / (1 - (2 b x)^2) with the removable singularity at |2bx| = 1
// handled by a local series.
double rc_cos_factor(double x, double b) {
    if (b <= 0.0) return std::cos(0.0);
    const double x0 = 1.0 / (2.0 * b);
    const double u = std::abs(x) - x0;
    if (std::abs(u) < 1e-5 * x0) {
        // cos(pi b x) = -sin(pi b u) around x0; denominator = -4bu(1 + bu).
        return (kPi / 4.0) * (1.0 - b * u + (b * b - kPi * kPi * b * b / 6.0) * u * u);
    }
    const double den = 1.0 - (2.0 * b * x) * (2.0 * b * x);
    return std::cos(kPi * b * x) / den;
}

}  // namespace

Waveform Waveform::root_raised_cosine(double carrier_hz, double bandwidth_hz,
                                      double rolloff, double sample_rate_hz,
                                      double duration_s) {
    if (carrier_hz <= 0.0 || bandwidth_hz <= 0.0) {
        throw ScenarioError("waveform: carrier and bandwidth must be positive");
    }
    if (rolloff < 0.0 || rolloff > 1.0) {
        throw ScenarioError("waveform: roll-off must be in [0, 1]");
    }
    Waveform wf;
    wf.carrier_hz = carrier_hz;
    wf.wavelength_m = kSpeedOfLight / carrier_hz;
    wf.bandwidth_hz = bandwidth_hz;
    wf.rolloff = rolloff;
    wf.symbol_time_s = 1.0 / bandwidth_hz;
    wf.sample_rate_hz = sample_rate_hz;
    wf.duration_s = duration_s;
    // Second spectral moment of the raised-cosine spectrum in closed form;
    // the quadrature route in effective_bandwidth_sq_from_spectrum must agree.
    const double b = rolloff;
    wf.zeta_sq_hz2 = (1.0 / 12.0 + b * b * (0.25 - 2.0 / (kPi * kPi))) *
                     bandwidth_hz * bandwidth_hz;
    wf.energy = 1.0;
    return wf;
}

double Waveform::autocorr(double tau_s) const {
    const double x = tau_s / symbol_time_s;
    return sinc(x) * rc_cos_factor(x, rolloff);
}

void Waveform::autocorr_derivs(double tau_s, double& r, double& r1, double& r2) const {
    if (tau_s == 0.0) {
        r = 1.0;
        r1 = 0.0;
        r2 = -4.0 * kPi * kPi * zeta_sq_hz2;
        return;
    }
    const double h = 1e-3 * symbol_time_s;
    const double f2 = autocorr(tau_s + 2.0 * h);
    const double f1 = autocorr(tau_s + h);
    const double f0 = autocorr(tau_s);
    const double fm1 = autocorr(tau_s - h);
    const double fm2 = autocorr(tau_s - 2.0 * h);
    r = f0;
    r1 = (-f2 + 8.0 * f1 - 8.0 * fm1 + fm2) / (12.0 * h);
    r2 = (-f2 + 16.0 * f1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
}

double Waveform::pulse(double t_s) const {
    const double T = symbol_time_s;
    const double b = rolloff;
    const double x = t_s / T;
    const double norm = 1.0 / std::sqrt(T);
    if (std::abs(x) < 1e-8) {
        return norm * (1.0 + b * (4.0 / kPi - 1.0));
    }
    if (b > 0.0) {
        const double xs = 1.0 / (4.0 * b);
        if (std::abs(std::abs(x) - xs) < 1e-6 * xs) {
            const double s = kPi / (4.0 * b);
            return norm * (b / std::sqrt(2.0)) *
                   ((1.0 + 2.0 / kPi) * std::sin(s) + (1.0 - 2.0 / kPi) * std::cos(s));
        }
    }
    const double num = std::sin(kPi * x * (1.0 - b)) +
                       4.0 * b * x * std::cos(kPi * x * (1.0 + b));
    const double den = kPi * x * (1.0 - (4.0 * b * x) * (4.0 * b * x));
    return norm * num / den;
}

int Waveform::sample_count() const {
    return static_cast<int>(duration_s * sample_rate_hz + 0.5);
}

std::vector<double> Waveform::sample_times() const {
    const int n = sample_count();
    std::vector<double> t(n);
    const double dt = 1.0 / sample_rate_hz;
    for (int i = 0; i < n; ++i) t[i] = i * dt;
    return t;
}

double effective_bandwidth_sq_from_spectrum(const Waveform& wf, int grid) {
    // |S(f)|^2 of the RRC pulse is the raised-cosine spectrum.
    const double T = wf.symbol_time_s;
    const double b = wf.rolloff;
    const double fmax = (1.0 + b) / (2.0 * T);
    auto spec = [&](double f) {
        const double af = std::abs(f);
        const double f1 = (1.0 - b) / (2.0 * T);
        if (af <= f1) return T;
        if (af >= fmax) return 0.0;
        return 0.5 * T * (1.0 + std::cos(kPi * T / b * (af - f1)));
    };
    if (grid % 2 == 0) ++grid;
    const double h = 2.0 * fmax / (grid - 1);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double f = -fmax + i * h;
        const double w = (i == 0 || i == grid - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double s = spec(f);
        num += w * f * f * s;
        den += w * s;
    }
    return num / den;
}

}  // namespace risslam
