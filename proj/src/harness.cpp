#include "risslam/harness.hpp"

#include <cmath>
#include <sstream>

#include "risslam/rng.hpp"

namespace risslam {

double rmse(const std::vector<Vec3>& truth, const std::vector<Vec3>& estimate,
            int burn_in) {
    if (truth.size() != estimate.size()) {
        throw ScenarioError("rmse: trajectory length mismatch");
    }
    const int n = static_cast<int>(truth.size());
    const int start = std::min(burn_in, std::max(n - 1, 0));
    double acc = 0.0;
    int cnt = 0;
    for (int i = start; i < n; ++i) {
        acc += (truth[i] - estimate[i]).squaredNorm();
        ++cnt;
    }
    return cnt > 0 ? std::sqrt(acc / cnt) : 0.0;
}

double rmse_of_log(const RunLog& log, int burn_in) {
    std::vector<Vec3> t, e;
    t.reserve(log.records.size());
    e.reserve(log.records.size());
    for (const auto& r : log.records) {
        t.push_back(r.true_position);
        e.push_back(r.estimated_position);
    }
    return rmse(t, e, burn_in);
}

std::string ResultTable::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "scheme," << sweep_variable << ",trial,rmse_m,mean_crlb_m2,mean_gain\n";
    for (const auto& r : rows) {
        os << r.scheme << "," << r.sweep_value << "," << r.trial << "," << r.rmse_m
           << "," << r.mean_crlb_m2 << "," << r.mean_gain << "\n";
    }
    return os.str();
}

std::vector<GainCurveRow> gain_vs_distance(const Scenario& scenario,
                                           const std::vector<double>& distances,
                                           int random_draws, std::uint64_t seed) {
    if (!scenario.env.ris) throw ScenarioError("gain curve needs a RIS");
    const RisPanel& panel = *scenario.env.ris;
    const Waveform& wf = scenario.waveform;

    // Comparison sphere with the RIS aperture cross-section, at the panel
    // position (Fig. 4(a) setup).
    const double rcs = (panel.rows * panel.dy) * (panel.cols * panel.dx);

    std::vector<GainCurveRow> rows;
    rows.reserve(distances.size());
    Rng rng(mix_seed(seed, 0x6761696eULL));
    for (double d : distances) {
        GainCurveRow row;
        row.distance_m = d;
        // Tx = Rx on the panel boresight at range d.
        const Vec3 p = panel.center + d * panel.normal;
        row.element_amplitude =
            ris_element_amplitude(panel, p, p, wf, scenario.antenna_gain) *
            panel.amplitude;

        const PhaseConfig aligned = phase_align(panel, p, p, wf, panel.phase_levels);
        row.optimized =
            std::abs(ris_aggregate_gain(panel, p, p, wf, scenario.antenna_gain, aligned)
                         .gain);

        double acc = 0.0;
        PhaseConfig rnd = aligned;
        for (int t = 0; t < random_draws; ++t) {
            for (int& h : rnd.h) h = rng.uniform_int(1, panel.phase_levels);
            acc += std::abs(
                ris_aggregate_gain(panel, p, p, wf, scenario.antenna_gain, rnd).gain);
        }
        row.random_mean = random_draws > 0 ? acc / random_draws : 0.0;
        row.scatterer =
            std::abs(scatterer_gain(d, d, wf, scenario.antenna_gain, rcs));
        rows.push_back(row);
    }
    return rows;
}

std::string gain_curve_csv(const std::vector<GainCurveRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "distance_m,optimized,random_mean,scatterer,element_amplitude\n";
    for (const auto& r : rows) {
        os << r.distance_m << "," << r.optimized << "," << r.random_mean << ","
           << r.scatterer << "," << r.element_amplitude << "\n";
    }
    return os.str();
}

namespace {

ResultRow row_of_run(const Scenario& sc, Scheme scheme, double value, int trial,
                     std::uint64_t seed, int burn_in, RunLog* log_out) {
    RunOptions opt;
    opt.scheme = scheme;
    opt.seed = seed;
    const RunLog log = run(sc, opt);

    ResultRow row;
    row.scheme = scheme_name(scheme);
    row.sweep_value = value;
    row.trial = trial;
    row.rmse_m = rmse_of_log(log, burn_in);
    double crlb = 0.0, gain = 0.0;
    int crlb_n = 0;
    for (const auto& r : log.records) {
        if (std::isfinite(r.crlb_m2)) {
            crlb += r.crlb_m2;
            ++crlb_n;
        }
    }
    row.mean_crlb_m2 = crlb_n > 0 ? crlb / crlb_n : 0.0;
    row.mean_gain = gain;
    if (log_out) *log_out = log;
    return row;
}

}  // namespace

ResultTable rmse_vs_snr(const Scenario& scenario, const std::vector<double>& snr_db,
                        const SweepOptions& opt) {
    ResultTable table;
    table.sweep_variable = "snr_db";
    for (std::size_t vi = 0; vi < snr_db.size(); ++vi) {
        Scenario sc = scenario;
        set_snr(sc, snr_db[vi]);
        for (std::size_t si = 0; si < opt.schemes.size(); ++si) {
            for (int t = 0; t < opt.trials; ++t) {
                const std::uint64_t seed =
                    mix_seed(opt.seed_base, (vi << 16) | (si << 8), t);
                RunLog log;
                table.rows.push_back(row_of_run(sc, opt.schemes[si], snr_db[vi], t,
                                                seed, opt.burn_in_cycles,
                                                opt.keep_logs ? &log : nullptr));
                if (opt.keep_logs) table.logs.push_back(std::move(log));
            }
        }
    }
    return table;
}

ResultTable rmse_vs_ris_size(const Scenario& scenario, const std::vector<int>& sizes,
                             const SweepOptions& opt) {
    ResultTable table;
    table.sweep_variable = "ris_size";
    for (std::size_t vi = 0; vi < sizes.size(); ++vi) {
        Scenario sc = scenario;
        const int n = sizes[vi];
        Scheme scheme = Scheme::Optimized;
        if (n <= 0) {
            sc.env.ris.reset();
            scheme = Scheme::NoRis;
        } else {
            if (!sc.env.ris) throw ScenarioError("size sweep needs a RIS template");
            sc.env.ris->rows = n;
            sc.env.ris->cols = n;
        }
        calibrate_noise(sc);
        for (int t = 0; t < opt.trials; ++t) {
            const std::uint64_t seed = mix_seed(opt.seed_base, 0x737a30ULL + vi, t);
            RunLog log;
            table.rows.push_back(row_of_run(sc, scheme, n, t, seed,
                                            opt.burn_in_cycles,
                                            opt.keep_logs ? &log : nullptr));
            if (opt.keep_logs) table.logs.push_back(std::move(log));
        }
    }
    return table;
}

}  // namespace risslam
