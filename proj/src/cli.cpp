#include "rmdp/cli.hpp"

#include "rmdp/experiments.hpp"
#include "rmdp/io.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <ostream>

namespace rmdp {

using nlohmann::json;

namespace {

struct Options {
    std::string instance;
    double eps = 1e-6;
    std::uint64_t seed = 0;
    std::vector<double> tau;
    std::string out;
    std::string json_out;
    std::string variant = "f1";
    std::string policy;
    long threads = 1;
    long r = 0;
    long n = 10000;
    long restarts = 10;
    bool lp = false;
    bool skip_absorbing = false;
    std::vector<double> lambdas;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("rmdp", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::err);
    if (const char* level = std::getenv("RMDP_LOG")) {
        const std::string value(level);
        if (value == "debug") logger->set_level(spdlog::level::debug);
        else if (value == "info") logger->set_level(spdlog::level::info);
    }
    return logger;
}

std::optional<double> single_tau(const Options& opt) {
    if (opt.tau.empty()) return std::nullopt;
    if (opt.tau.size() > 1) throw ValidationError("--tau: this command takes a single value");
    return opt.tau.front();
}

Variant parse_variant(const std::string& name) { return name == "f2" ? Variant::F2 : Variant::F1; }

void emit(const json& doc, const Options& opt, std::ostream& out) {
    out << doc.dump(2) << '\n';
    if (!opt.out.empty()) write_json_file(doc, opt.out);
}

void cmd_solve_nominal(const Options& opt, std::ostream& out, spdlog::logger& log) {
    const InstanceFile file = load_instance(opt.instance);
    const NominalSolution sol = nominal_value_iteration(file.instance, file.nominal_kernel(), opt.eps);
    log.info("value iteration converged in {} iterations", sol.iterations);
    emit({{"policy", matrix_to_json(sol.policy.matrix())},
          {"value", vector_to_json(sol.value)},
          {"objective", file.instance.p0().dot(sol.value)},
          {"iterations", sol.iterations}},
         opt, out);
}

void cmd_build_factors(const Options& opt, std::ostream& out, spdlog::logger& log) {
    InstanceFile file = load_instance(opt.instance);
    const TransitionKernel P = file.nominal_kernel();
    const std::vector<long> absorbing = opt.skip_absorbing ? absorbing_states(P) : std::vector<long>{};
    NmfOptions nmf;
    nmf.restarts = opt.restarts;
    nmf.seed = opt.seed;
    const NmfResult fit = nmf_factorize(P, opt.r, nmf, absorbing);
    log.info("best restart {} after {} iterations, objective {}", fit.best_restart, fit.history.size() - 1,
             fit.objective);
    file.factor_model = factor_model_from_nmf(fit, P.actions(), absorbing);
    if (!file.kernel) file.kernel = P;
    json doc = {{"r", opt.r},
                {"residuals", {{"l2", fit.residuals.l2}, {"l1", fit.residuals.l1}, {"linf", fit.residuals.linf}}},
                {"objective", fit.objective},
                {"best_restart", fit.best_restart},
                {"absorbing_states", absorbing}};
    out << doc.dump(2) << '\n';
    if (!opt.out.empty()) save_instance(file, opt.out);
}

void cmd_evaluate(const Options& opt, std::ostream& out, spdlog::logger& log) {
    const InstanceFile file = load_instance(opt.instance);
    if (opt.policy.empty()) throw ValidationError("evaluate: --policy is required");
    const Policy pi = parse_policy(read_json_file(opt.policy));
    check_dimensions(file.instance, pi);
    const FactorUncertainty fu = build_uncertainty(file, single_tau(opt));
    const WorstCaseEvaluation ev = evaluate_worst_case(file.instance, *file.factor_model, fu, pi, opt.eps);
    log.info("policy evaluation converged in {} iterations", ev.iterations);
    json doc = {{"objective", ev.z},
                {"beta", vector_to_json(ev.beta)},
                {"value", vector_to_json(ev.value)},
                {"W_star", matrix_to_json(ev.W_star)},
                {"iterations", ev.iterations}};
    if (opt.lp) {
        std::vector<Polytope> sets;
        for (const auto& set : fu.sets) sets.push_back(as_polytope(set));
        const LpEvaluation lp = evaluate_worst_case_lp(file.instance, *file.factor_model, sets, pi);
        doc["lp_objective"] = lp.z;
    }
    emit(doc, opt, out);
}

void cmd_improve(const Options& opt, std::ostream& out, spdlog::logger& log) {
    const InstanceFile file = load_instance(opt.instance);
    const FactorUncertainty fu = build_uncertainty(file, single_tau(opt));
    const RobustSolveReport report =
        improve_policy(file.instance, *file.factor_model, fu, opt.eps, parse_variant(opt.variant));
    log.info("robust value iteration converged in {} iterations", report.iterations);
    emit(to_json(report), opt, out);
}

void cmd_s_rect(const Options& opt, std::ostream& out, spdlog::logger& log) {
    const InstanceFile file = load_instance(opt.instance);
    const SRectUncertainty sr = build_s_rect(file, single_tau(opt));
    const SRectSolution sol = s_rect_robust_vi(file.instance, sr, opt.eps);
    log.info("s-rectangular value iteration converged in {} iterations", sol.iterations);
    emit({{"policy", matrix_to_json(sol.policy.matrix())},
          {"value", vector_to_json(sol.v)},
          {"objective", sol.z},
          {"iterations", sol.iterations}},
         opt, out);
}

void cmd_compare(const Options& opt, std::ostream& out, spdlog::logger& log) {
    const InstanceFile file = load_instance(opt.instance);
    if (!file.factor_model) throw ValidationError("compare: instance has no \"factor_model\"");
    ComparisonConfig config{
        .instance = file.instance, .P_nom = file.nominal_kernel(), .model = *file.factor_model, .taus = opt.tau};
    if (config.taus.empty()) {
        if (!file.uncertainty || file.uncertainty->type != "budget")
            throw ValidationError("compare: give --tau or a budget uncertainty block");
        config.taus = {file.uncertainty->tau};
    }
    if (file.uncertainty) {
        if (file.uncertainty->type != "budget") throw ValidationError("compare: requires budget uncertainty");
        config.c = file.uncertainty->c;
        config.pinned_factors = file.uncertainty->pinned;
    }
    if (file.s_rect) config.pinned_states = file.s_rect->pinned_states;
    config.sample_rank = opt.r;
    config.n = opt.n;
    config.seed = opt.seed;
    config.eps = opt.eps;
    config.threads = opt.threads;

    const auto start = std::chrono::steady_clock::now();
    const ComparisonReport report = comparison_pipeline(config);
    log.info("comparison finished in {:.2f} s",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (opt.out.empty()) {
        write_csv(report, out);
    } else {
        std::ofstream os(opt.out);
        if (!os) throw ValidationError("cannot write " + opt.out);
        write_csv(report, os);
    }
    if (!opt.json_out.empty()) write_json_file(to_json(report), opt.json_out);
}

void cmd_blackwell(const Options& opt, std::ostream& out, spdlog::logger& log) {
    const InstanceFile file = load_instance(opt.instance);
    const FactorUncertainty fu = build_uncertainty(file, single_tau(opt));
    const BlackwellScan scan =
        blackwell_scan(file.instance, *file.factor_model, fu, opt.lambdas, opt.eps, parse_variant(opt.variant));
    json reports = json::array();
    for (std::size_t k = 0; k < scan.reports.size(); ++k) {
        const auto& rep = scan.reports[k];
        log.info("lambda {}: {} iterations", opt.lambdas[k], rep.iterations);
        reports.push_back({{"lambda", opt.lambdas[k]},
                           {"policy", matrix_to_json(rep.policy.matrix())},
                           {"W_star", matrix_to_json(rep.W_star)},
                           {"objective", rep.objective}});
    }
    emit({{"threshold_index", scan.threshold_index},
          {"stable_policy", matrix_to_json(scan.stable_policy.matrix())},
          {"stable_signature", matrix_to_json(scan.stable_signature)},
          {"reports", std::move(reports)}},
         opt, out);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto logger = make_logger(err);
    Options opt;

    CLI::App app{"Robust MDP solver for factor matrix uncertainty sets", "rmdp"};
    app.require_subcommand(1);

    auto common = [&](CLI::App* sub) {
        sub->add_option("instance", opt.instance, "Instance JSON file")->required();
        sub->add_option("--eps", opt.eps, "Accuracy target")->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "Random seed");
        sub->add_option("--out", opt.out, "Output file");
    };
    auto tau = [&](CLI::App* sub, bool many) {
        auto* o = sub->add_option("--tau", opt.tau, many ? "Deviation budgets (comma separated)" : "Deviation budget");
        o->check(CLI::Range(0.0, 1.0));
        if (many) o->delimiter(',');
        else o->expected(1);
    };
    auto variant = [&](CLI::App* sub) {
        sub->add_option("--variant", opt.variant, "Fixed-point operator")->check(CLI::IsMember({"f1", "f2"}));
    };

    auto* solve = app.add_subcommand("solve-nominal", "Nominal value iteration");
    common(solve);

    auto* build = app.add_subcommand("build-factors", "Factor model of the nominal kernel by NMF");
    common(build);
    build->add_option("--r", opt.r, "Number of factors")->required()->check(CLI::PositiveNumber);
    build->add_option("--restarts", opt.restarts, "NMF restarts")->check(CLI::PositiveNumber);
    build->add_flag("--skip-absorbing", opt.skip_absorbing, "Give absorbing states their own pinned factor");

    auto* evaluate = app.add_subcommand("evaluate", "Worst-case evaluation of a policy");
    common(evaluate);
    tau(evaluate, false);
    evaluate->add_option("--policy", opt.policy, "Policy JSON (matrix or report)")->required();
    evaluate->add_flag("--lp", opt.lp, "Also solve the dual linear program");

    auto* improve = app.add_subcommand("improve", "Optimal robust policy");
    common(improve);
    tau(improve, false);
    variant(improve);

    auto* srect = app.add_subcommand("s-rect", "s-rectangular robust baseline");
    common(srect);
    tau(srect, false);

    auto* compare = app.add_subcommand("compare", "Nominal versus robust comparison tables (CSV)");
    common(compare);
    tau(compare, true);
    compare->add_option("--r", opt.r, "Rank of sampled deviations (default: factor count)")->check(CLI::NonNegativeNumber);
    compare->add_option("--n", opt.n, "Kernels per sample")->check(CLI::PositiveNumber);
    compare->add_option("--threads", opt.threads, "Worker threads for sample evaluation")->check(CLI::PositiveNumber);
    compare->add_option("--json", opt.json_out, "Also write the report as JSON");

    auto* blackwell = app.add_subcommand("blackwell", "Stability of the robust optimum as the discount grows");
    common(blackwell);
    tau(blackwell, false);
    variant(blackwell);
    blackwell->add_option("--lambdas", opt.lambdas, "Ascending discount grid")->required()->delimiter(',');

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("rmdp");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "error: " << e.what() << '\n' << app.help();
        return kUsage;
    }

    try {
        if (*solve) cmd_solve_nominal(opt, out, *logger);
        else if (*build) cmd_build_factors(opt, out, *logger);
        else if (*evaluate) cmd_evaluate(opt, out, *logger);
        else if (*improve) cmd_improve(opt, out, *logger);
        else if (*srect) cmd_s_rect(opt, out, *logger);
        else if (*compare) cmd_compare(opt, out, *logger);
        else if (*blackwell) cmd_blackwell(opt, out, *logger);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "solver error: " << e.what() << '\n';
        return kSolver;
    }
    return kOk;
}

} // namespace rmdp
