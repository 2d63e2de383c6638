#include "rmdp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <thread>

namespace rmdp {

std::string to_string(Family family) { return family == Family::B_r ? "B_r" : "B_inf"; }

namespace {

Vec box_lower(const Vec& p, double tau) { return (p.array() - tau).cwiseMax(0.0).matrix(); }
Vec box_upper(const Vec& p, double tau) { return (p.array() + tau).cwiseMin(1.0).matrix(); }

Vec fix_row(const Vec& nominal, const Vec& candidate, double tau) {
    if (candidate.minCoeff() >= 0.0) return candidate;
    return project_capped_simplex(candidate, box_lower(nominal, tau), box_upper(nominal, tau));
}

void check_sampling_args(double tau, long n) {
    if (n < 1) throw ValidationError("sample size n must be >= 1");
    if (!(tau >= 0.0)) throw ValidationError("tau must be >= 0");
}

} // namespace

PerturbationSample sample_B_inf(const TransitionKernel& P_nom, double tau, long n, std::uint64_t seed) {
    check_sampling_args(tau, n);
    const long S = P_nom.states();
    const long A = P_nom.actions();
    PerturbationSample out;
    out.family = Family::B_inf;
    out.tau = tau;
    out.seed = seed;
    out.kernels.reserve(n);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (long k = 0; k < n; ++k) {
        if (tau == 0.0) {
            out.kernels.push_back(P_nom);
            continue;
        }
        std::vector<Mat> slices = P_nom.slices();
        for (long s = 0; s < S; ++s) {
            for (long a = 0; a < A; ++a) {
                const Vec p = P_nom.row(s, a);
                Vec candidate = p;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    Vec d(S);
                    for (long t = 0; t < S; ++t) d(t) = normal(rng);
                    d.array() -= d.mean();
                    const double norm = d.lpNorm<Eigen::Infinity>();
                    const double radius = unif(rng) * tau;
                    candidate = norm > 0.0 ? Vec(p + d * (radius / norm)) : p;
                    if (candidate.minCoeff() >= 0.0) break;
                }
                slices[s].row(a) = fix_row(p, candidate, tau).transpose();
            }
        }
        out.kernels.emplace_back(std::move(slices));
    }
    return out;
}

PerturbationSample sample_B_r(const TransitionKernel& P_nom, long r, double tau, long n, std::uint64_t seed) {
    check_sampling_args(tau, n);
    const long S = P_nom.states();
    const long A = P_nom.actions();
    if (r < 1 || r > S * A) throw RankTooLarge("sample_B_r: r must lie in [1, S*A]");
    PerturbationSample out;
    out.family = Family::B_r;
    out.tau = tau;
    out.r = r;
    out.seed = seed;
    out.kernels.reserve(n);
    out.deviations.reserve(n);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Mat M = stacked_kernel(P_nom);
    for (long k = 0; k < n; ++k) {
        Mat W(S, r), u(r, S * A);
        for (long i = 0; i < W.size(); ++i) W.data()[i] = unif(rng);
        for (long i = 0; i < u.size(); ++i) u.data()[i] = unif(rng);
        Mat D = W * u;
        D.rowwise() -= D.colwise().mean();
        const double norm = D.cwiseAbs().maxCoeff();
        const double radius = unif(rng) * tau;
        if (norm > 0.0) D *= radius / norm;
        else D.setZero();

        std::vector<Mat> slices(S, Mat(A, S));
        for (long s = 0; s < S; ++s) {
            for (long a = 0; a < A; ++a) {
                const long j = s * A + a;
                slices[s].row(a) = fix_row(M.col(j), M.col(j) + D.col(j), tau).transpose();
            }
        }
        out.kernels.emplace_back(std::move(slices));
        out.deviations.push_back(std::move(D));
    }
    return out;
}

EmpiricalStats summarize(const std::vector<double>& values, double normalizer) {
    EmpiricalStats out;
    out.n = static_cast<long>(values.size());
    out.normalizer = normalizer;
    if (values.empty()) throw EmptyInput("summarize: no observations");
    out.mean = pairwise_sum(values.data(), out.n) / static_cast<double>(out.n);
    if (out.n > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t k = 0; k < values.size(); ++k) sq[k] = (values[k] - out.mean) * (values[k] - out.mean);
        const double var = pairwise_sum(sq.data(), out.n) / static_cast<double>(out.n - 1);
        out.conf95 = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(out.n));
    }
    return out;
}

EmpiricalStats empirical_stats(const MdpInstance& inst, const Policy& pi, const PerturbationSample& sample,
                               double normalizer, long threads) {
    if (!(normalizer > 0.0)) throw ValidationError("empirical_stats: normalizer must be positive");
    const long n = static_cast<long>(sample.kernels.size());
    std::vector<double> values(n);
    auto work = [&](long begin, long end) {
        for (long k = begin; k < end; ++k)
            values[k] = 100.0 * expected_reward(inst, pi, sample.kernels[k]) / normalizer;
    };
    threads = std::clamp(threads, 1L, std::max(1L, n));
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (n + threads - 1) / threads;
        for (long t = 0; t < threads; ++t) pool.emplace_back(work, std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
        for (auto& th : pool) th.join();
    }
    return summarize(values, normalizer);
}

const ReportRow* ComparisonReport::find(double tau, const std::string& metric) const {
    for (const auto& row : rows)
        if (row.tau == tau && row.metric == metric) return &row;
    return nullptr;
}

ComparisonReport comparison_pipeline(const ComparisonConfig& config) {
    const MdpInstance& inst = config.instance;
    check_dimensions(inst, config.P_nom);
    if (config.model.states() != inst.states() || config.model.actions() != inst.actions())
        throw DimensionMismatch("comparison: factor model dimensions do not match the instance");
    if (config.taus.empty()) throw EmptyInput("comparison: empty tau grid");

    ComparisonReport out;
    out.nominal_policy = nominal_value_iteration(inst, config.P_nom, config.eps).policy;
    out.normalizer = expected_reward(inst, out.nominal_policy, config.P_nom);
    if (!(out.normalizer > 0.0)) throw ValidationError("comparison: nominal reward must be positive");
    const double scale = 100.0 / out.normalizer;
    const long rank = config.sample_rank > 0 ? config.sample_rank : config.model.factors();

    for (std::size_t k = 0; k < config.taus.size(); ++k) {
        const double tau = config.taus[k];
        FactorUncertainty fu = build_budget_uncertainty(config.model.W_nom(), tau, config.c);
        for (const auto& [index, point] : config.pinned_factors) fu = pin_factor(fu, index, point);
        const SRectUncertainty sr = build_s_rect_uncertainty(config.P_nom, tau, config.pinned_states);

        auto add = [&](int table, const std::string& metric, double value, std::optional<double> conf = {}) {
            out.rows.push_back({tau, table, metric, value, conf});
        };
        auto worst_r = [&](const Policy& pi) {
            return scale * evaluate_worst_case(inst, config.model, fu, pi, config.eps).z;
        };
        auto worst_s = [&](const Policy& pi) {
            return scale * inst.p0().dot(s_rect_evaluate(inst, sr, pi, config.eps));
        };
        auto nominal = [&](const Policy& pi) { return scale * expected_reward(inst, pi, config.P_nom); };

        add(1, "nominal_reward", nominal(out.nominal_policy));
        add(1, "nominal_worst_case_r", worst_r(out.nominal_policy));
        add(1, "nominal_worst_case_s", worst_s(out.nominal_policy));

        const Policy pi_r = improve_policy(inst, config.model, fu, config.eps, Variant::F1).policy;
        const Policy pi_s = s_rect_robust_vi(inst, sr, config.eps).policy;
        out.robust_r_policies.push_back(pi_r);
        out.robust_s_policies.push_back(pi_s);
        add(2, "robust_r_nominal", nominal(pi_r));
        add(2, "robust_r_worst_case_r", worst_r(pi_r));
        add(2, "robust_s_nominal", nominal(pi_s));
        add(2, "robust_s_worst_case_s", worst_s(pi_s));

        const std::uint64_t base = config.seed * 1000003ULL + 2 * k;
        const PerturbationSample b_r = sample_B_r(config.P_nom, rank, tau, config.n, base);
        const PerturbationSample b_inf = sample_B_inf(config.P_nom, tau, config.n, base + 1);
        for (const auto* sample : {&b_r, &b_inf}) {
            const std::string family = to_string(sample->family);
            const auto st_r = empirical_stats(inst, pi_r, *sample, out.normalizer, config.threads);
            const auto st_s = empirical_stats(inst, pi_s, *sample, out.normalizer, config.threads);
            add(3, "robust_r_" + family, st_r.mean, st_r.conf95);
            add(3, "robust_s_" + family, st_s.mean, st_s.conf95);
        }
    }
    return out;
}

void write_csv(const ComparisonReport& report, std::ostream& os) {
    os << "tau,table,metric,value,conf95\n";
    char buf[64];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%g", row.tau);
        os << buf << ',' << row.table << ',' << row.metric << ',';
        std::snprintf(buf, sizeof buf, "%.6f", row.value);
        os << buf << ',';
        if (row.conf95) {
            std::snprintf(buf, sizeof buf, "%.6f", *row.conf95);
            os << buf;
        }
        os << '\n';
    }
}

DeskProblem three_state_desk(double tau) {
    Mat rewards(3, 2);
    rewards << 1.0, 0.4,
               0.0, 0.7,
               0.2, 0.9;
    MdpInstance inst(rewards, 0.9, Vec::Constant(3, 1.0 / 3.0));
    Mat W(3, 2);
    W << 0.6, 0.2,
         0.3, 0.2,
         0.1, 0.6;
    std::vector<Mat> U(3, Mat(2, 2));
    U[0] << 0.8, 0.3,
            0.2, 0.7;
    U[1] << 0.5, 0.9,
            0.5, 0.1;
    U[2] << 0.2, 0.6,
            0.8, 0.4;
    FactorModel fm(std::move(U), W);
    FactorUncertainty fu = build_budget_uncertainty(W, tau);
    return {std::move(inst), std::move(fm), std::move(fu)};
}

SixStateDesk six_state_desk() {
    Mat rewards(6, 3);
    rewards << 0.94, 0.54, 0.81,
               0.66, 0.61, 0.19,
               0.57, 0.04, 0.80,
               0.96, 0.85, 0.05,
               0.34, 0.32, 0.11,
               0.63, 0.80, 0.31;
    Mat W(6, 4);
    W << 0.18, 0.29, 0.19, 0.11,
         0.14, 0.26, 0.03, 0.12,
         0.11, 0.05, 0.22, 0.13,
         0.19, 0.02, 0.08, 0.02,
         0.11, 0.06, 0.08, 0.13,
         0.27, 0.32, 0.40, 0.49;
    std::vector<Mat> U(6, Mat(4, 3));
    U[0] << 0.05, 0.22, 0.64,
            0.30, 0.28, 0.11,
            0.33, 0.12, 0.01,
            0.32, 0.38, 0.24;
    U[1] << 0.28, 0.25, 0.25,
            0.11, 0.08, 0.33,
            0.50, 0.18, 0.23,
            0.11, 0.49, 0.19;
    U[2] << 0.01, 0.32, 0.13,
            0.06, 0.17, 0.16,
            0.84, 0.32, 0.49,
            0.09, 0.19, 0.22;
    U[3] << 0.01, 0.33, 0.22,
            0.26, 0.02, 0.37,
            0.38, 0.52, 0.27,
            0.35, 0.13, 0.14;
    U[4] << 0.24, 0.25, 0.05,
            0.28, 0.14, 0.14,
            0.20, 0.17, 0.51,
            0.28, 0.44, 0.30;
    U[5] << 0.46, 0.29, 0.33,
            0.27, 0.18, 0.10,
            0.08, 0.22, 0.40,
            0.19, 0.31, 0.17;
    FactorModel fm(std::move(U), W);
    TransitionKernel P = assemble_kernel(fm, W);
    MdpInstance inst(rewards, 0.95, Vec::Constant(6, 1.0 / 6.0));
    return {std::move(inst), std::move(fm), std::move(P)};
}

} // namespace rmdp
