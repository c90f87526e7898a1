#include "risslam/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "risslam/rng.hpp"

namespace risslam {

double NoiseModel::sigma_toa(double amp) const {
    if (amp <= 0.0) return std::numeric_limits<double>::infinity();
    const double formula =
        std::sqrt(n0 / (8.0 * kPi * kPi * zeta_sq_hz2 * amp * amp));
    return std::max(formula, toa_device_floor_s);
}

double NoiseModel::sigma_aoa(double amp) const {
    if (amp <= 0.0) return std::numeric_limits<double>::infinity();
    return aoa_coeff * std::sqrt(n0) / amp;
}

std::vector<ObservedMpc> extract_mpcs(const std::vector<Mpc>& true_mpcs,
                                      const NoiseModel& model, std::uint64_t seed) {
    // Canonical order: draws depend on content, not caller ordering.
    std::vector<const Mpc*> sorted;
    sorted.reserve(true_mpcs.size());
    for (const auto& m : true_mpcs) sorted.push_back(&m);
    std::sort(sorted.begin(), sorted.end(), [](const Mpc* a, const Mpc* b) {
        if (a->delay_s != b->delay_s) return a->delay_s < b->delay_s;
        if (a->aoa_rad != b->aoa_rad) return a->aoa_rad < b->aoa_rad;
        return std::abs(a->gain) < std::abs(b->gain);
    });

    Rng rng(mix_seed(seed, 0x6d656173ULL));
    std::vector<ObservedMpc> out;
    out.reserve(sorted.size());
    for (const Mpc* m : sorted) {
        const double amp = std::abs(m->gain);
        if (amp < model.detection_threshold) continue;

        ObservedMpc o;
        const double s_tau = model.sigma_toa(amp);
        const double s_phi = model.sigma_aoa(amp);
        o.toa_s = m->delay_s + rng.gaussian(0.0, s_tau);
        o.aoa_rad = wrap_angle(m->aoa_rad + rng.gaussian(0.0, s_phi));
        o.amplitude = m->gain + rng.complex_gaussian(model.n0);
        o.sigma_toa_s = std::max(s_tau, model.reported_sigma_toa_floor_s);
        o.sigma_aoa_rad = std::max(s_phi, model.reported_sigma_aoa_floor_rad);
        o.true_landmark_index = m->landmark_index;
        o.true_kind = m->kind;
        out.push_back(o);
    }
    return out;
}

std::vector<ObservedMpc> merge_ris_mpcs(const std::vector<ObservedMpc>& observed,
                                        double window_s) {
    std::vector<ObservedMpc> sorted = observed;
    std::sort(sorted.begin(), sorted.end(),
              [](const ObservedMpc& a, const ObservedMpc& b) { return a.toa_s < b.toa_s; });

    std::vector<ObservedMpc> out;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i + 1;
        // Greedy cluster anchored at the first element of the group.
        while (j < sorted.size() && sorted[j].toa_s - sorted[i].toa_s <= window_s) ++j;
        ObservedMpc merged = sorted[i];
        if (j > i + 1) {
            Complex amp{0.0, 0.0};
            double wtoa = 0.0, waoa = 0.0, wsum = 0.0;
            for (std::size_t k = i; k < j; ++k) {
                const double w = std::abs(sorted[k].amplitude);
                amp += sorted[k].amplitude;
                wtoa += w * sorted[k].toa_s;
                waoa += w * sorted[k].aoa_rad;
                wsum += w;
            }
            merged.amplitude = amp;
            if (wsum > 0.0) {
                merged.toa_s = wtoa / wsum;
                merged.aoa_rad = waoa / wsum;
            }
        }
        out.push_back(merged);
        i = j;
    }
    return out;
}

}  // namespace risslam
