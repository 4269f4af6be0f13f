#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stabopf/experiments.hpp"

using namespace stabopf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPointFailure = 2;

// Either an a:b:n axis or a comma-separated list.
std::vector<double> values(const std::string& text) {
    return text.find(':') != std::string::npos ? parse_axis(text) : parse_list(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability-constrained OPF experiment runner"};
    app.require_subcommand(1);

    std::string case_path, out_dir = "out", mq, alpha, etaq, gamma, slice;
    bool full = false;
    bool cold = false;
    std::uint64_t seed = 1;
    double tol = 1e-8;
    std::optional<std::size_t> starts;
    std::size_t threads = 0;

    for (ExperimentId id : {ExperimentId::gap_ratio, ExperimentId::table1, ExperimentId::table2, ExperimentId::ieee39_mq,
                            ExperimentId::ieee39_alpha, ExperimentId::ieee39_etaq}) {
        CLI::App* sub = app.add_subcommand(to_string(id));
        sub->add_option("--case", case_path, "case file")->required();
        sub->add_flag("--full", full, "full scan grids instead of the smoke grids");
        sub->add_option("--seed", seed, "seed for random starts");
        sub->add_option("--out", out_dir, "output root directory");
        sub->add_option("--mq", mq, "m_q axis a:b:n (gap-ratio: droop grid)");
        sub->add_option("--alpha", alpha, "alpha axis a:b:n (gap-ratio: B values)");
        sub->add_option("--etaq", etaq, "comma-separated eta_q values");
        sub->add_option("--gamma", gamma, "comma-separated Gamma_1 values (tables)");
        sub->add_option("--slice", slice, "symmetric-slice m_q axis a:b:n (gap-ratio)");
        sub->add_option("--tol", tol, "solver tolerance");
        sub->add_option("--starts", starts, "number of random starts");
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        sub->add_flag("--cold", cold, "disable warm starts along sweeps");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    ExperimentSpec spec;
    try {
        const auto id = parse_experiment_id(app.get_subcommands().front()->get_name());
        spec = preset(*id);
        spec.case_path = case_path;
        spec.out_dir = out_dir;
        spec.full = full;
        spec.seed = seed;
        spec.solve.tol = tol;
        spec.solve.acceptable_tol = std::max(spec.solve.acceptable_tol, tol);
        spec.threads = threads;
        spec.warm_start = !cold;
        if (starts) spec.random_starts = *starts;
        if (!mq.empty()) spec.mq = values(mq);
        if (!alpha.empty()) spec.alpha = values(alpha);
        if (!etaq.empty()) spec.etaq = values(etaq);
        if (!gamma.empty()) spec.gamma = values(gamma);
        if (!slice.empty()) spec.slice_mq = values(slice);
        if (!(tol > 0.0)) throw SpecError("--tol must be positive");
        spec.validate();
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        const ExperimentResult r = run_experiment(spec);
        for (const auto& p : r.outputs) std::cout << p.string() << '\n';
        std::cout << r.n_points << " points, " << r.n_failed << " failed\n";
        return r.n_failed ? kExitPointFailure : kExitOk;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CaseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPointFailure;
    }
}
