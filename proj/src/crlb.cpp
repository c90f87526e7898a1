#include "risslam/crlb.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include "risslam/common.hpp"

namespace risslam {

Fim fim_chi(const ChiVars& chi, const Waveform& wf, double n0) {
    const int P = chi.paths();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3 * P, 3 * P);
    const double scale = 2.0 / n0;

    for (int l = 0; l < P; ++l) {
        for (int lp = l; lp < P; ++lp) {
            double r, r1, r2;
            wf.autocorr_derivs(chi.delays_s[l] - chi.delays_s[lp], r, r1, r2);

            const double re_ll = chi.gains_re[l] * chi.gains_re[lp] +
                                 chi.gains_im[l] * chi.gains_im[lp];
            // d^2 R_s(tau_l - tau_l') / (d tau_l d tau_l') = -R_s''.
            const double a = -scale * re_ll * r2;
            J(l, lp) = a;
            J(lp, l) = a;

            // Gain blocks: (2/N0) R_s at the delay difference, zero couplings
            // between Re and Im.
            const double cgg = scale * r;
            J(P + l, P + lp) = cgg;
            J(P + lp, P + l) = cgg;
            J(2 * P + l, 2 * P + lp) = cgg;
            J(2 * P + lp, 2 * P + l) = cgg;
        }
        // Delay-gain coupling rows use the delay index gain: entry (l, l') =
        // (2/N0) * Re/Im(alpha_l) * R_s'(tau_l - tau_l').
        for (int lp = 0; lp < P; ++lp) {
            double r, r1, r2;
            wf.autocorr_derivs(chi.delays_s[l] - chi.delays_s[lp], r, r1, r2);
            const double br = scale * chi.gains_re[l] * r1;
            const double bi = scale * chi.gains_im[l] * r1;
            J(l, P + lp) = br;
            J(P + lp, l) = br;
            J(l, 2 * P + lp) = bi;
            J(2 * P + lp, l) = bi;
        }
    }
    assert(J.isApprox(J.transpose()));
    return Fim{std::move(J)};
}

Eigen::MatrixXd jacobian_T(const std::vector<PathDirectionSums>& dirs) {
    const int P = static_cast<int>(dirs.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(2 + 2 * P, 3 * P);
    for (int l = 0; l < P; ++l) {
        T(0, l) = dirs[l].nu / kSpeedOfLight;
        T(1, l) = dirs[l].kappa / kSpeedOfLight;
    }
    T.block(2, P, 2 * P, 2 * P) = Eigen::MatrixXd::Identity(2 * P, 2 * P);
    return T;
}

Fim fim_eta(const std::vector<PathDirectionSums>& dirs, const ChiVars& chi,
            const Waveform& wf, double n0) {
    const Eigen::MatrixXd T = jacobian_T(dirs);
    const Fim jchi = fim_chi(chi, wf, n0);
    Eigen::MatrixXd J = T * jchi.matrix * T.transpose();
    // Symmetrize away floating-point asymmetry from the triple product.
    J = 0.5 * (J + J.transpose()).eval();
    return Fim{std::move(J)};
}

namespace {

CrlbResult invert_position_block(const Eigen::MatrixXd& J, bool allow_reg) {
    CrlbResult out;
    const int n = static_cast<int>(J.rows());
    Eigen::MatrixXd M = J;

    auto try_solve = [&](const Eigen::MatrixXd& A, double& trace_out) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() != Eigen::Success) return false;
        // Solve for the first two columns of the inverse only.
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
        rhs(0, 0) = 1.0;
        rhs(1, 1) = 1.0;
        const Eigen::MatrixXd cols = ldlt.solve(rhs);
        const double resid = (A * cols - rhs).norm();
        const double tol = 1e-9 * (1.0 + A.norm() * cols.norm());
        if (!std::isfinite(resid) || resid > tol) return false;
        trace_out = cols(0, 0) + cols(1, 1);
        return std::isfinite(trace_out) && trace_out > 0.0;
    };

    double tr = 0.0;
    if (try_solve(M, tr)) {
        out.value_m2 = tr;
        return out;
    }
    if (allow_reg) {
        const double eps = 1e-12 * std::max(M.trace(), 1e-300);
        M += eps * Eigen::MatrixXd::Identity(n, n);
        if (try_solve(M, tr)) {
            out.value_m2 = tr;
            out.regularized = true;
            return out;
        }
    }
    out.singular = true;
    out.value_m2 = std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace

CrlbResult position_crlb(const Fim& fim, bool allow_regularization) {
    return invert_position_block(fim.matrix, allow_regularization);
}

CrlbResult closed_form_crlb(const std::vector<PathDirectionSums>& dirs,
                            const std::vector<std::complex<double>>& gains,
                            const Waveform& wf, double n0) {
    CrlbResult out;
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    const double scale = 8.0 * kPi * kPi * wf.zeta_sq_hz2 /
                         (kSpeedOfLight * kSpeedOfLight);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const double p = std::norm(gains[i]) / n0;
        const double nu = dirs[i].nu;
        const double ka = dirs[i].kappa;
        info(0, 0) += p * nu * nu;
        info(0, 1) += p * nu * ka;
        info(1, 1) += p * ka * ka;
    }
    info(1, 0) = info(0, 1);
    info *= scale;

    const double det = info(0, 0) * info(1, 1) - info(0, 1) * info(1, 0);
    const double tr = info(0, 0) + info(1, 1);
    if (!(det > 1e-24 * tr * tr) || tr <= 0.0) {
        out.singular = true;
        out.value_m2 = std::numeric_limits<double>::infinity();
        return out;
    }
    out.value_m2 = tr / det;  // trace of the 2x2 inverse
    return out;
}

}  // namespace risslam
