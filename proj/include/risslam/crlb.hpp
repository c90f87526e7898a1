#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "risslam/waveform.hpp"

namespace risslam {

/// Intermediate estimation variables chi = [delays; Re(alpha); Im(alpha)].
struct ChiVars {
    std::vector<double> delays_s;
    std::vector<double> gains_re;
    std::vector<double> gains_im;

    int paths() const { return static_cast<int>(delays_s.size()); }
};

/// Fisher information matrix with its variable ordering. For chi the order
/// is [tau_1..tau_P, Re a_1..Re a_P, Im a_1..Im a_P]; for eta it is
/// [x, y, Re a_1..Re a_P, Im a_1..Im a_P].
struct Fim {
    Eigen::MatrixXd matrix;
};

/// Direction-cosine sums (nu, kappa) of a path: the gradient of its length
/// with respect to the agent (x, y). Equals the sum over agent-terminated
/// segments of the unit-vector components pointing toward the agent.
struct PathDirectionSums {
    double nu = 0.0;
    double kappa = 0.0;
};

struct CrlbResult {
    double value_m2 = 0.0;
    bool singular = false;     // unobservable geometry (no regularized inverse)
    bool regularized = false;  // ridge regularization was applied
};

// J(chi) per the block structure [[L_A, L_B^R, L_B^I], [', L_C, 0], [', 0, L_C]].
// Entries use R_s and its derivatives at pairwise delay differences; the
// assembled matrix is exactly symmetric by construction.
Fim fim_chi(const ChiVars& chi, const Waveform& wf, double n0);

// Jacobian T = [[H, 0], [0, I]] with column l of H = (1/c) * dlength_l/d(x,y).
// dlength is the per-path spatial gradient (nu, kappa).
Eigen::MatrixXd jacobian_T(const std::vector<PathDirectionSums>& dirs);

// J(eta) = T J(chi) T^T.
Fim fim_eta(const std::vector<PathDirectionSums>& dirs, const ChiVars& chi,
            const Waveform& wf, double n0);

// Trace of the 2x2 position block of J(eta)^-1. Near-singular matrices are
// ridge-regularized (epsilon = 1e-12 * trace) and flagged when allowed,
// otherwise reported singular.
CrlbResult position_crlb(const Fim& fim_eta, bool allow_regularization = true);

// Proposition-1 closed form: trace of the inverse of
// (8 pi^2 zeta^2 / c^2) * sum_i |alpha_i|^2/N0 * [[nu^2, nu k], [nu k, k^2]].
CrlbResult closed_form_crlb(const std::vector<PathDirectionSums>& dirs,
                            const std::vector<std::complex<double>>& gains,
                            const Waveform& wf, double n0);

}  // namespace risslam
