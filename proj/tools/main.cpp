// Experiment runner: single simulations and the Fig.-4 style sweeps, with
// CSV result tables and line-delimited run logs.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "risslam/harness.hpp"

namespace {

using namespace risslam;

Scenario load_or_default(const std::string& path, bool desk_profile) {
    Scenario sc = path.empty() ? default_scenario() : load_scenario(path);
    if (desk_profile) apply_desk_profile(sc);
    return sc;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw ScenarioError("cannot write output file: " + path);
    out << content;
}

void apply_ga_flags(Scenario& sc, int pop, int elites, int iters, double pm) {
    if (pop > 0) sc.ga.population = pop;
    if (elites > 0) sc.ga.elites = elites;
    if (iters > 0) sc.ga.iterations = iters;
    if (pm >= 0.0) sc.ga.mutation_p = pm;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS-assisted indoor wireless SLAM simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_path;
    std::uint64_t seed = 1;
    bool desk = false;
    int ga_pop = -1, ga_elites = -1, ga_iters = -1;
    double ga_pm = -1.0;
    app.add_option("--scenario", scenario_path, "scenario JSON file (default: built-in room)");
    app.add_option("--out", out_path, "output path ('-' for stdout)");
    app.add_option("--seed", seed, "base RNG seed");
    app.add_flag("--desk", desk, "desk-scale profile (200 cycles, 200/600 particles)");
    app.add_option("--ga-pop", ga_pop, "GA population size K");
    app.add_option("--ga-elites", ga_elites, "GA elite count Q");
    app.add_option("--ga-iters", ga_iters, "GA iterations C^A");
    app.add_option("--ga-pm", ga_pm, "GA mutation probability p_m");

    // simulate
    auto* sim = app.add_subcommand("simulate", "single run of the cycle protocol");
    std::string scheme_str = "optimized";
    int cycles_override = -1;
    double snr_override = std::numeric_limits<double>::quiet_NaN();
    bool trace = false;
    sim->add_option("--scheme", scheme_str, "optimized | random_phase | no_ris");
    sim->add_option("--cycles", cycles_override, "override cycle count");
    sim->add_option("--snr-db", snr_override, "override SNR in dB");
    sim->add_flag("--trace", trace, "emit per-cycle JSONL records");

    // sweep-snr
    auto* ssnr = app.add_subcommand("sweep-snr", "RMSE vs SNR for the three schemes");
    std::vector<double> snr_values{10.0, 15.0, 20.0, 25.0, 30.0};
    int trials = 10;
    ssnr->add_option("--values", snr_values, "SNR grid in dB");
    ssnr->add_option("--trials", trials, "trials per sweep point");

    // sweep-ris-size
    auto* ssize = app.add_subcommand("sweep-ris-size", "RMSE vs square panel size");
    std::vector<int> sizes{2, 4, 6, 8};
    int size_trials = 10;
    double size_snr = 20.0;
    ssize->add_option("--values", sizes, "panel sizes N (NxN elements); 0 = no RIS");
    ssize->add_option("--trials", size_trials, "trials per size");
    ssize->add_option("--snr-db", size_snr, "SNR in dB");

    // gain-curve
    auto* gc = app.add_subcommand("gain-curve", "channel gain vs distance (Fig. 4a)");
    std::vector<double> distances{1, 2, 3, 4, 5, 6, 7, 8};
    int draws = 100;
    gc->add_option("--distances", distances, "distances in meters");
    gc->add_option("--draws", draws, "random phase draws per distance");

    CLI11_PARSE(app, argc, argv);

    try {
        Scenario sc = load_or_default(scenario_path, desk);
        sc.seed = seed;
        apply_ga_flags(sc, ga_pop, ga_elites, ga_iters, ga_pm);

        if (sim->parsed()) {
            if (cycles_override > 0) sc.cycle.cycles = cycles_override;
            if (!std::isnan(snr_override)) sc.snr_db = snr_override;
            calibrate_noise(sc);
            RunOptions opt;
            opt.scheme = scheme_from_name(scheme_str);
            opt.seed = seed;
            const RunLog log = run(sc, opt);
            std::ostringstream os;
            os.precision(10);
            if (trace) {
                os << log.to_jsonl();
            }
            os << "scheme=" << scheme_name(opt.scheme) << " cycles="
               << log.records.size() << " rmse_m=" << rmse_of_log(log) << "\n";
            write_output(out_path, os.str());
        } else if (ssnr->parsed()) {
            SweepOptions opt;
            opt.trials = trials;
            opt.seed_base = seed;
            const ResultTable table = rmse_vs_snr(sc, snr_values, opt);
            write_output(out_path, table.to_csv());
        } else if (ssize->parsed()) {
            sc.snr_db = size_snr;
            SweepOptions opt;
            opt.trials = size_trials;
            opt.seed_base = seed;
            const ResultTable table = rmse_vs_ris_size(sc, sizes, opt);
            write_output(out_path, table.to_csv());
        } else if (gc->parsed()) {
            const auto rows = gain_vs_distance(sc, distances, draws, seed);
            write_output(out_path, gain_curve_csv(rows));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
