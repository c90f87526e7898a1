#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "risslam/crlb.hpp"
#include "risslam/environment.hpp"
#include "risslam/rng.hpp"

using namespace risslam;
using std::complex;

namespace {

Waveform wf() { return Waveform::root_raised_cosine(10e9, 2e9, 0.25, 5e9, 1.2e-7); }

// Random delay-orthogonal instance: pairwise separations of hundreds of
// symbol times so every cross term of R_s is negligible.
struct Instance {
    ChiVars chi;
    std::vector<PathDirectionSums> dirs;
    std::vector<complex<double>> gains;
};

Instance random_orthogonal_instance(Rng& rng, int paths) {
    Instance inst;
    double tau = 100e-9;
    for (int i = 0; i < paths; ++i) {
        tau += 300e-9 + rng.uniform(0.0, 100e-9);
        const double re = rng.uniform(0.5e-5, 2e-5) * (rng.uniform01() < 0.5 ? -1 : 1);
        const double im = rng.uniform(0.5e-5, 2e-5) * (rng.uniform01() < 0.5 ? -1 : 1);
        inst.chi.delays_s.push_back(tau);
        inst.chi.gains_re.push_back(re);
        inst.chi.gains_im.push_back(im);
        inst.gains.emplace_back(re, im);
        PathDirectionSums d;
        d.nu = rng.uniform(-2.0, 2.0);
        d.kappa = rng.uniform(-2.0, 2.0);
        inst.dirs.push_back(d);
    }
    return inst;
}

}  // namespace

TEST_CASE("fim_chi single path matches the hand-evaluated blocks") {
    const Waveform w = wf();
    const double n0 = 1e-14;
    ChiVars chi;
    chi.delays_s = {30e-9};
    chi.gains_re = {1.2e-5};
    chi.gains_im = {-0.5e-5};

    const Fim J = fim_chi(chi, w, n0);
    REQUIRE(J.matrix.rows() == 3);

    const double a2 = 1.2e-5 * 1.2e-5 + 0.5e-5 * 0.5e-5;
    // Lambda_A = (2/N0)|a|^2 (2 pi)^2 zeta^2 R_s(0) with R_s(0) = 1.
    CHECK(J.matrix(0, 0) ==
          doctest::Approx(2.0 / n0 * a2 * 4.0 * kPi * kPi * w.zeta_sq_hz2));
    // Lambda_B vanishes because R_s'(0) = 0.
    CHECK(J.matrix(0, 1) == doctest::Approx(0.0));
    CHECK(J.matrix(0, 2) == doctest::Approx(0.0));
    // Lambda_C = (2/N0) R_s(0).
    CHECK(J.matrix(1, 1) == doctest::Approx(2.0 / n0));
    CHECK(J.matrix(2, 2) == doctest::Approx(2.0 / n0));
    CHECK(J.matrix(1, 2) == doctest::Approx(0.0));
}

TEST_CASE("well-separated paths decouple and the matrix is exactly symmetric") {
    const Waveform w = wf();
    ChiVars chi;
    chi.delays_s = {20e-9, 420e-9};
    chi.gains_re = {1e-5, 2e-5};
    chi.gains_im = {0.0, -1e-5};
    const Fim J = fim_chi(chi, w, 1e-14);
    CHECK(J.matrix == J.matrix.transpose());
    // Cross-block entries are tiny relative to the diagonals.
    const double diag = std::abs(J.matrix(0, 0));
    CHECK(std::abs(J.matrix(0, 1)) < 1e-6 * diag);
    const double cdiag = std::abs(J.matrix(2, 2));
    CHECK(std::abs(J.matrix(2, 3)) < 1e-6 * cdiag);
}

TEST_CASE("jacobian_T block structure and direction columns") {
    std::vector<PathDirectionSums> dirs{{1.0, 0.0},
                                        {std::sqrt(0.5), std::sqrt(0.5)}};
    const Eigen::MatrixXd T = jacobian_T(dirs);
    REQUIRE(T.rows() == 6);
    REQUIRE(T.cols() == 6);
    CHECK(T(0, 0) == doctest::Approx(1.0 / kSpeedOfLight));
    CHECK(T(1, 0) == doctest::Approx(0.0));
    CHECK(T(0, 1) == doctest::Approx(std::sqrt(0.5) / kSpeedOfLight));
    CHECK(T(1, 1) == doctest::Approx(std::sqrt(0.5) / kSpeedOfLight));
    // Identity over the gain block, zeros elsewhere.
    CHECK(T.block(2, 2, 4, 4) == Eigen::MatrixXd::Identity(4, 4));
    CHECK(T.block(0, 2, 2, 4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(T.block(2, 0, 4, 2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("direction sums of a two-segment path are unit-vector sums") {
    const Vec3 tx(1.0, 1.0, 0.0);
    const Vec3 rx(1.2, 1.0, 0.0);
    const Vec3 lm(4.0, 3.0, 1.0);
    const PathObs obs = predict_point_obs(tx, rx, lm);
    const Vec3 ut = (tx - lm).normalized();
    const Vec3 ur = (rx - lm).normalized();
    CHECK(obs.dlength_dxy.x() == doctest::Approx(ut.x() + ur.x()));
    CHECK(obs.dlength_dxy.y() == doctest::Approx(ut.y() + ur.y()));
}

TEST_CASE("position CRLB: orthogonal equal-strength paths in closed form") {
    const Waveform w = wf();
    const double n0 = 1e-14;
    const double amp = 1.5e-5;

    ChiVars chi;
    chi.delays_s = {20e-9, 520e-9};
    chi.gains_re = {amp, amp};
    chi.gains_im = {0.0, 0.0};
    std::vector<PathDirectionSums> dirs{{1.0, 0.0}, {0.0, 1.0}};
    std::vector<complex<double>> gains{{amp, 0.0}, {amp, 0.0}};

    const double expected =
        2.0 * kSpeedOfLight * kSpeedOfLight * n0 /
        (8.0 * kPi * kPi * w.zeta_sq_hz2 * amp * amp);

    const CrlbResult cf = closed_form_crlb(dirs, gains, w, n0);
    CHECK(!cf.singular);
    CHECK(cf.value_m2 == doctest::Approx(expected).epsilon(1e-9));

    const Fim J = fim_eta(dirs, chi, w, n0);
    const CrlbResult pipe = position_crlb(J);
    CHECK(pipe.value_m2 == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("single path is unobservable") {
    const Waveform w = wf();
    ChiVars chi;
    chi.delays_s = {20e-9};
    chi.gains_re = {1e-5};
    chi.gains_im = {0.0};
    std::vector<PathDirectionSums> dirs{{1.0, 0.3}};
    std::vector<complex<double>> gains{{1e-5, 0.0}};

    CHECK(closed_form_crlb(dirs, gains, w, 1e-14).singular);
    const Fim J = fim_eta(dirs, chi, w, 1e-14);
    CHECK(position_crlb(J, /*allow_regularization=*/false).singular);
}

TEST_CASE("doubling all gains divides the CRLB by four") {
    const Waveform w = wf();
    Rng rng(9);
    const Instance inst = random_orthogonal_instance(rng, 3);
    auto gains2 = inst.gains;
    for (auto& g : gains2) g *= 2.0;
    const double c1 = closed_form_crlb(inst.dirs, inst.gains, w, 1e-14).value_m2;
    const double c2 = closed_form_crlb(inst.dirs, gains2, w, 1e-14).value_m2;
    CHECK(c2 == doctest::Approx(0.25 * c1).epsilon(1e-12));
}

TEST_CASE("closed form vs Appendix-B pipeline on 50 random orthogonal instances") {
    const Waveform w = wf();
    Rng rng(123);
    int tested = 0;
    for (int k = 0; k < 50; ++k) {
        const int paths = 2 + (k % 4);
        const Instance inst = random_orthogonal_instance(rng, paths);
        const CrlbResult cf = closed_form_crlb(inst.dirs, inst.gains, w, 1e-14);
        if (cf.singular) continue;  // degenerate random geometry
        const Fim J = fim_eta(inst.dirs, inst.chi, w, 1e-14);

        // PSD check via eigenvalues.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J.matrix);
        CHECK(es.eigenvalues().minCoeff() >=
              -1e-9 * std::abs(es.eigenvalues().maxCoeff()));

        const CrlbResult pipe = position_crlb(J);
        CHECK(std::abs(pipe.value_m2 - cf.value_m2) / cf.value_m2 < 1e-6);
        ++tested;
    }
    CHECK(tested >= 45);
}

TEST_CASE("increasing one gain never increases the closed-form CRLB") {
    const Waveform w = wf();
    Rng rng(77);
    for (int k = 0; k < 30; ++k) {
        const Instance inst = random_orthogonal_instance(rng, 3);
        const double base = closed_form_crlb(inst.dirs, inst.gains, w, 1e-14).value_m2;
        if (!std::isfinite(base)) continue;
        for (int i = 0; i < 3; ++i) {
            auto gains = inst.gains;
            gains[i] *= rng.uniform(1.1, 3.0);
            const double up = closed_form_crlb(inst.dirs, gains, w, 1e-14).value_m2;
            CHECK(up <= base * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("Monte-Carlo score outer product matches J(eta) on a two-path toy") {
    const Waveform w = wf();
    const double n0 = 4e-15;
    const double fs = w.sample_rate_hz;
    const double dt = 1.0 / fs;
    const int U = w.sample_count();

    ChiVars chi;
    chi.delays_s = {20e-9, 60e-9};
    chi.gains_re = {1.2e-5, 0.8e-5};
    chi.gains_im = {-0.4e-5, 0.6e-5};
    // Directions chosen so every position-block entry is well conditioned
    // relative to the Monte-Carlo estimator's variance.
    std::vector<PathDirectionSums> dirs{{1.0, 0.7}, {0.2, 1.0}};
    const Fim J = fim_eta(dirs, chi, w, n0);

    // Model derivatives on the sample grid; pulse derivative by stencil.
    auto pulse_d = [&](double t) {
        const double h = 2e-12;
        return (w.pulse(t + h) - w.pulse(t - h)) / (2.0 * h);
    };
    const int P = 2;
    const int dim = 2 + 2 * P;
    std::vector<std::vector<complex<double>>> dmu(
        dim, std::vector<complex<double>>(U, {0.0, 0.0}));
    for (int u = 0; u < U; ++u) {
        const double t = u * dt;
        for (int l = 0; l < P; ++l) {
            const complex<double> a(chi.gains_re[l], chi.gains_im[l]);
            const complex<double> dtau = -a * pulse_d(t - chi.delays_s[l]);
            dmu[0][u] += dirs[l].nu / kSpeedOfLight * dtau;
            dmu[1][u] += dirs[l].kappa / kSpeedOfLight * dtau;
            dmu[2 + l][u] = complex<double>(w.pulse(t - chi.delays_s[l]), 0.0);
            dmu[2 + P + l][u] =
                complex<double>(0.0, 1.0) * w.pulse(t - chi.delays_s[l]);
        }
    }

    const double sigma2 = n0 * fs;  // per-sample complex noise variance
    Rng rng(2024);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
    const int draws = 4000;
    Eigen::VectorXd score(dim);
    for (int d = 0; d < draws; ++d) {
        // Score depends on the noise only: y - mu = n.
        std::vector<complex<double>> noise(U);
        for (int u = 0; u < U; ++u) noise[u] = rng.complex_gaussian(sigma2);
        for (int a = 0; a < dim; ++a) {
            complex<double> s{0.0, 0.0};
            for (int u = 0; u < U; ++u) s += std::conj(dmu[a][u]) * noise[u];
            score(a) = 2.0 / n0 * s.real() * dt;
        }
        acc += score * score.transpose();
    }
    acc /= draws;

    // Compare the position block within 5%.
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            CHECK(acc(a, b) == doctest::Approx(J.matrix(a, b)).epsilon(0.05));
        }
    }
    // Gain block diagonal too.
    CHECK(acc(2, 2) == doctest::Approx(J.matrix(2, 2)).epsilon(0.05));
    CHECK(acc(5, 5) == doctest::Approx(J.matrix(5, 5)).epsilon(0.05));
}
