#pragma once

#include "rmdp/mdp.hpp"
#include "rmdp/numerics.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace rmdp {

/**
 * Factor representation of a kernel: P_sa = sum_i u_s(i, a) w_i.
 *
 * U holds one r x A coefficient block per state whose columns are
 * distributions over factors; W_nom is S x r with stochastic columns.
 */
class FactorModel {
public:
    FactorModel() = default;
    FactorModel(std::vector<Mat> U, Mat W_nom);

    long states() const { return W_nom_.rows(); }
    long factors() const { return W_nom_.cols(); }
    long actions() const { return U_.empty() ? 0 : U_.front().cols(); }

    const std::vector<Mat>& U() const { return U_; }
    const Mat& coefficients(long s) const { return U_.at(s); }
    double u(long s, long i, long a) const { return U_[s](i, a); }
    const Mat& W_nom() const { return W_nom_; }

private:
    std::vector<Mat> U_;
    Mat W_nom_;
};

/// Feasible set of a single factor: a budget set or a general polytope
/// (first S columns are the factor, extra columns are auxiliary).
using FactorSet = std::variant<BudgetSet, Polytope>;

/// Cartesian product W^1 x ... x W^r of per-factor sets.
struct FactorUncertainty {
    std::vector<FactorSet> sets;

    long factors() const { return static_cast<long>(sets.size()); }
};

/// Per-state budget set for the s-rectangular baseline.
struct SRectStateSet {
    Mat P_nom; ///< A x S nominal block
    double tau = 0.0;
    double gamma = 0.0;
};

struct SRectUncertainty {
    std::vector<SRectStateSet> states;
};

/// Singleton set {point}.
FactorSet singleton_set(const Vec& point);

/// Minimizes c'w over a factor set; argmin has length c.size() (the factor only).
LpResult minimize_over(const FactorSet& set, const Vec& c);

/// Polytope form of a factor set (budget sets are lifted, see to_polytope).
Polytope as_polytope(const FactorSet& set);

bool contains(const FactorSet& set, const Vec& w, double tol = feasibility_tol);

/// Throws if any set is malformed, empty, or admits non-distributions.
void validate(const FactorUncertainty& fu, long n_states);

/// T_pi[s][i] = sum_a pi[s][a] u_s(i, a).
Mat build_T_pi(const FactorModel& fm, const Policy& pi);

/// Kernel with P_sa = sum_i u_s(i,a) w_i. Throws NotStochastic when a column
/// of W misses normalization by more than 1e-8.
TransitionKernel assemble_kernel(const FactorModel& fm, const Mat& W);

struct Embedding {
    FactorModel model;
    FactorUncertainty uncertainty;
};

/**
 * Embeds an (s,a)-rectangular family (one set per pair, index s*A + a) as a
 * factor model with r = S*A and unit-selection coefficients.
 */
Embedding embed_sa_rectangular(long n_states, long n_actions, std::vector<FactorSet> per_pair_sets);

struct NmfOptions {
    long max_iters = 20000;
    double tol = 1e-13;
    long restarts = 10;
    std::uint64_t seed = 0;
};

struct NmfResiduals {
    double l2 = 0.0;   ///< Frobenius norm
    double l1 = 0.0;   ///< max column absolute sum
    double linf = 0.0; ///< max row absolute sum
};

struct NmfResult {
    Mat W;                        ///< S x r, stochastic columns
    Mat u;                        ///< r x n_columns, stochastic columns
    std::vector<long> column_state; ///< origin state of every factorized column
    NmfResiduals residuals;
    double objective = 0.0;
    std::vector<double> history;  ///< objective after every iteration of the winning restart
    long best_restart = 0;
};

/// Columns (s,a) of the stacked matrix, one per pair, in s-major order.
Mat stacked_kernel(const TransitionKernel& P, const std::vector<long>& skip_states = {});

/// Residual norms of M - W u.
NmfResiduals residual_norms(const Mat& error);

/**
 * Factorizes the stacked kernel min 0.5 |P~' - W u|_F^2 with W and u
 * column-stochastic by alternating projected gradient steps with
 * backtracking. States listed in skip_states are left out of the fit.
 * Throws RankTooLarge if r exceeds the number of fitted columns.
 */
NmfResult nmf_factorize(const TransitionKernel& P, long r, const NmfOptions& opts = {},
                        const std::vector<long>& skip_states = {});

/**
 * Factor model from an NMF fit. Every skipped (absorbing) state m gets one
 * extra factor e_m selected by all of its actions; other states put zero
 * weight on those extra factors.
 */
FactorModel factor_model_from_nmf(const NmfResult& fit, long n_actions,
                                  const std::vector<long>& absorbing_states = {});

/// r budget sets around the columns of W_nom with gamma = c sqrt(S) tau.
FactorUncertainty build_budget_uncertainty(const Mat& W_nom, double tau, double c = 1.0);

/// Replaces set i with the singleton {point}.
FactorUncertainty pin_factor(const FactorUncertainty& fu, long index, const Vec& point);

/// Per-state budget sets with gamma_s = sqrt(S A) tau; pinned states get tau = 0.
SRectUncertainty build_s_rect_uncertainty(const TransitionKernel& P_nom, double tau,
                                          const std::vector<long>& pinned_states = {});

} // namespace rmdp
