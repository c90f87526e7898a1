#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "risslam/common.hpp"
#include "risslam/waveform.hpp"

using namespace risslam;

namespace {
Waveform wf() { return Waveform::root_raised_cosine(10e9, 2e9, 0.25, 5e9, 1.2e-7); }
}

TEST_CASE("autocorrelation basics") {
    const Waveform w = wf();
    CHECK(w.autocorr(0.0) == doctest::Approx(1.0));

    double r, r1, r2;
    w.autocorr_derivs(0.0, r, r1, r2);
    CHECK(r1 == doctest::Approx(0.0));

    // Evenness on a sample grid.
    for (double t : {0.1e-9, 0.35e-9, 0.9e-9, 2.2e-9}) {
        CHECK(w.autocorr(t) == doctest::Approx(w.autocorr(-t)).epsilon(1e-12));
    }

    // Nyquist zero crossings at integer symbol times.
    CHECK(std::abs(w.autocorr(w.symbol_time_s)) < 1e-12);
    CHECK(std::abs(w.autocorr(3.0 * w.symbol_time_s)) < 1e-12);
}

TEST_CASE("zeta^2: closed form vs spectrum quadrature within 1%") {
    const Waveform w = wf();
    const double from_spectrum = effective_bandwidth_sq_from_spectrum(w);
    CHECK(std::abs(w.zeta_sq_hz2 - from_spectrum) / from_spectrum < 0.01);
}

TEST_CASE("R''(0) equals -(2 pi zeta)^2 against a numerical stencil") {
    const Waveform w = wf();
    // Independent stencil straight on the closed-form autocorrelation.
    const double h = 2e-13;
    const double r2_num = (-w.autocorr(2 * h) + 16.0 * w.autocorr(h) - 30.0 +
                           16.0 * w.autocorr(-h) - w.autocorr(-2 * h)) /
                          (12.0 * h * h);
    const double r2_closed = -4.0 * kPi * kPi * w.zeta_sq_hz2;
    CHECK(std::abs(r2_num - r2_closed) / std::abs(r2_closed) < 0.01);
}

TEST_CASE("removable singularities of the pulse and autocorrelation") {
    const Waveform w = wf();
    const double T = w.symbol_time_s;
    // tau = T / (2 beta) for the RC autocorrelation.
    const double tau_s = T / (2.0 * w.rolloff);
    const double eps = 1e-9 * T;
    CHECK(w.autocorr(tau_s) == doctest::Approx(w.autocorr(tau_s + eps)).epsilon(1e-5));
    // t = T / (4 beta) for the RRC pulse.
    const double ts = T / (4.0 * w.rolloff);
    CHECK(w.pulse(ts) == doctest::Approx(w.pulse(ts + eps)).epsilon(1e-4));
}

TEST_CASE("sampled pulse energy is near unity") {
    const Waveform w = wf();
    const double dt = 1.0 / w.sample_rate_hz;
    double e = 0.0;
    for (double t = -40.0 * w.symbol_time_s; t <= 40.0 * w.symbol_time_s; t += dt) {
        const double s = w.pulse(t);
        e += s * s * dt;
    }
    CHECK(e == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("autocorr matches the pulse self-correlation") {
    const Waveform w = wf();
    const double dt = 2e-11;
    for (double tau : {0.0, 0.2e-9, 0.5e-9, 1.3e-9}) {
        double acc = 0.0;
        for (double t = -30 * w.symbol_time_s; t <= 30 * w.symbol_time_s; t += dt) {
            acc += w.pulse(t) * w.pulse(t - tau) * dt;
        }
        CHECK(acc == doctest::Approx(w.autocorr(tau)).epsilon(5e-3));
    }
}
