#pragma once

#include <vector>

namespace risslam {

/// Probe waveform model: root-raised-cosine pulse at carrier f_c, described
/// by its autocorrelation R_s (a raised-cosine pulse in closed form) and the
/// effective bandwidth zeta^2 = -R_s''(0) / ((2 pi)^2 R_s(0)).
///
/// The pulse is normalized to unit energy, so R_s(0) = 1 and gain magnitudes
/// carry all amplitude scaling. All delay-information formulas in the CRLB
/// module assume this convention.
struct Waveform {
    double carrier_hz = 0.0;
    double wavelength_m = 0.0;
    double bandwidth_hz = 0.0;      // symbol rate 1/T of the RRC pulse
    double rolloff = 0.25;          // RRC roll-off beta in [0, 1]
    double symbol_time_s = 0.0;     // T = 1 / bandwidth
    double sample_rate_hz = 0.0;    // complex baseband sampling rate
    double duration_s = 0.0;        // observation window
    double zeta_sq_hz2 = 0.0;       // effective bandwidth squared
    double energy = 1.0;            // R_s(0)

    static Waveform root_raised_cosine(double carrier_hz, double bandwidth_hz,
                                       double rolloff, double sample_rate_hz,
                                       double duration_s);

    // Autocorrelation R_s(tau) of the unit-energy RRC pulse (raised cosine).
    double autocorr(double tau_s) const;

    // R_s, R_s' and R_s'' at tau. Exact at tau = 0 where the values must be
    // consistent with zeta_sq to machine precision; elsewhere a 5-point
    // stencil on the closed form.
    void autocorr_derivs(double tau_s, double& r, double& r1, double& r2) const;

    // Unit-energy RRC pulse value at time t (pulse centered at t = 0).
    double pulse(double t_s) const;

    int sample_count() const;
    std::vector<double> sample_times() const;
};

// Independent spectral definition of zeta^2: second moment of the
// raised-cosine energy spectrum, evaluated by quadrature. Used as the
// cross-check oracle for Waveform::zeta_sq_hz2.
double effective_bandwidth_sq_from_spectrum(const Waveform& wf, int grid = 200001);

}  // namespace risslam
