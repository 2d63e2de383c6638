#pragma once

#include "rmdp/factor_model.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/robust.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rmdp {

enum class Family { B_r, B_inf };

std::string to_string(Family family);

/**
 * Kernels drawn around a nominal kernel. For B_r the signed deviation of
 * every draw is kept (S x S*A, stacked like stacked_kernel) before the rows
 * are projected back onto the simplex.
 */
struct PerturbationSample {
    std::vector<TransitionKernel> kernels;
    std::vector<Mat> deviations;
    Family family = Family::B_inf;
    double tau = 0.0;
    long r = 0;
    std::uint64_t seed = 0;
};

/**
 * Every row gets a uniformly oriented zero-sum direction scaled to a random
 * sup-norm in [0, tau]. Draws leaving the nonnegative orthant are rejected
 * (up to 100 times); after that the row is projected onto the simplex
 * restricted to the tau box around the nominal row.
 */
PerturbationSample sample_B_inf(const TransitionKernel& P_nom, double tau, long n, std::uint64_t seed);

/**
 * Rank-r signed deviations: W (S x r) and u (r x S*A) uniform on [0, 1], the
 * product centered to zero column sums and scaled to a random sup-norm in
 * [0, tau]; rows are then projected onto the simplex restricted to the tau box.
 */
PerturbationSample sample_B_r(const TransitionKernel& P_nom, long r, double tau, long n, std::uint64_t seed);

struct EmpiricalStats {
    double mean = 0.0;
    double conf95 = 0.0; ///< 1.96 * sample std / sqrt(n)
    long n = 0;
    double normalizer = 1.0;
};

/// Statistics of 100 R(pi, P) / normalizer over the sample. Rewards may be
/// computed on several threads; the result does not depend on the thread count.
EmpiricalStats empirical_stats(const MdpInstance& inst, const Policy& pi, const PerturbationSample& sample,
                               double normalizer, long threads = 1);

/// Mean and conf95 of raw observations.
EmpiricalStats summarize(const std::vector<double>& values, double normalizer = 1.0);

struct ComparisonConfig {
    MdpInstance instance;
    TransitionKernel P_nom;
    FactorModel model;
    std::vector<double> taus;
    double c = 1.0;
    std::vector<std::pair<long, Vec>> pinned_factors{};
    std::vector<long> pinned_states{}; ///< excluded from the s-rectangular set
    long sample_rank = 0;              ///< rank of B_r deviations; 0 means model.factors()
    long n = 10000;
    std::uint64_t seed = 0;
    double eps = 1e-6;
    long threads = 1;
};

struct ReportRow {
    double tau = 0.0;
    int table = 0;
    std::string metric;
    double value = 0.0;
    std::optional<double> conf95;
};

struct ComparisonReport {
    double normalizer = 0.0; ///< R(pi_nom, P_nom)
    Policy nominal_policy;
    std::vector<Policy> robust_r_policies; ///< one per tau
    std::vector<Policy> robust_s_policies;
    std::vector<ReportRow> rows;

    const ReportRow* find(double tau, const std::string& metric) const;
};

/**
 * Per tau: worst cases of the nominal policy over the factor and
 * s-rectangular sets (table 1), nominal and worst-case rewards of both
 * robust policies (table 2), empirical means over B_r and B_inf (table 3).
 * All values are scaled so that the nominal policy at P_nom reads 100.
 */
ComparisonReport comparison_pipeline(const ComparisonConfig& config);

void write_csv(const ComparisonReport& report, std::ostream& os);

/// Three-state, two-action instance used for structural checks.
struct DeskProblem {
    MdpInstance instance;
    FactorModel model;
    FactorUncertainty uncertainty;
};

DeskProblem three_state_desk(double tau = 0.1);

/// Six-state, three-action instance built from an exact rank-4 factor model.
struct SixStateDesk {
    MdpInstance instance;
    FactorModel model;
    TransitionKernel kernel;
};

SixStateDesk six_state_desk();

} // namespace rmdp
