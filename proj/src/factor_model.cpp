#include "rmdp/factor_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace rmdp {

FactorModel::FactorModel(std::vector<Mat> U, Mat W_nom) : U_(std::move(U)), W_nom_(std::move(W_nom)) {
    const long S = W_nom_.rows();
    const long r = W_nom_.cols();
    if (S < 1 || r < 1) throw EmptyInput("factor model: W_nom must be non-empty");
    if (static_cast<long>(U_.size()) != S)
        throw DimensionMismatch("factor model: need one coefficient block per state");
    const long A = U_.front().cols();
    if (A < 1) throw EmptyInput("factor model: no actions");
    for (long i = 0; i < r; ++i) {
        if (!is_distribution(W_nom_.col(i), 1e-10) || W_nom_.col(i).minCoeff() < 0.0)
            throw NotStochastic("factor model: W_nom column " + std::to_string(i) +
                                " is not a distribution");
    }
    for (long s = 0; s < S; ++s) {
        if (U_[s].rows() != r || U_[s].cols() != A)
            throw DimensionMismatch("factor model: U block " + std::to_string(s) + " is not r x A");
        for (long a = 0; a < A; ++a) {
            if (!is_distribution(U_[s].col(a), 1e-10) || U_[s].col(a).minCoeff() < 0.0)
                throw NotStochastic("factor model: coefficients of (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") do not sum to 1");
        }
    }
}

FactorSet singleton_set(const Vec& point) { return BudgetSet{point, 0.0, 0.0}; }

LpResult minimize_over(const FactorSet& set, const Vec& c) {
    if (const auto* budget = std::get_if<BudgetSet>(&set)) return budget_min_oracle(c, *budget);
    const auto& poly = std::get<Polytope>(set);
    if (poly.cols() < c.size()) throw DimensionMismatch("factor polytope has too few columns");
    Vec padded = Vec::Zero(poly.cols());
    padded.head(c.size()) = c;
    LpResult res = lp_minimize(padded, poly);
    LpResult out;
    out.argmin = res.argmin.head(c.size());
    out.value = c.dot(out.argmin);
    return out;
}

Polytope as_polytope(const FactorSet& set) {
    if (const auto* budget = std::get_if<BudgetSet>(&set)) return to_polytope(*budget);
    return std::get<Polytope>(set);
}

bool contains(const FactorSet& set, const Vec& w, double tol) {
    if (const auto* budget = std::get_if<BudgetSet>(&set)) return contains(*budget, w, tol);
    const auto& poly = std::get<Polytope>(set);
    const long S = w.size();
    if (poly.cols() < S) return false;
    if (poly.cols() == S) return contains(poly, w, tol);

    // Lifted polytope: look for auxiliary values compatible with w.
    Polytope pinned = poly;
    const long m = poly.rows();
    pinned.A.conservativeResize(m + 2 * S, Eigen::NoChange);
    pinned.b.conservativeResize(m + 2 * S);
    pinned.A.bottomRows(2 * S).setZero();
    for (long j = 0; j < S; ++j) {
        pinned.A(m + j, j) = 1.0;
        pinned.b(m + j) = w(j) - tol;
        pinned.A(m + S + j, j) = -1.0;
        pinned.b(m + S + j) = -w(j) - tol;
    }
    try {
        lp_minimize(Vec::Zero(poly.cols()), pinned);
        return true;
    } catch (const Infeasible&) {
        return false;
    }
}

void validate(const FactorUncertainty& fu, long n_states) {
    if (fu.sets.empty()) throw EmptyInput("uncertainty: no factor sets");
    for (std::size_t i = 0; i < fu.sets.size(); ++i) {
        const std::string where = "uncertainty: set " + std::to_string(i);
        if (const auto* budget = std::get_if<BudgetSet>(&fu.sets[i])) {
            if (budget->w_nom.size() != n_states) throw DimensionMismatch(where + " has wrong dimension");
            validate(*budget);
            continue;
        }
        const auto& poly = std::get<Polytope>(fu.sets[i]);
        if (poly.cols() < n_states || poly.b.size() != poly.rows())
            throw DimensionMismatch(where + " has wrong dimension");
        if (!poly.nonneg) throw ValidationError(where + " must constrain variables to be non-negative");
        try {
            const Vec ones = Vec::Ones(n_states);
            const double lo = minimize_over(fu.sets[i], ones).value;
            const double hi = -minimize_over(fu.sets[i], -ones).value;
            if (std::abs(lo - 1.0) > 1e-9 || std::abs(hi - 1.0) > 1e-9)
                throw NotStochastic(where + " admits points that are not distributions");
        } catch (const Infeasible&) {
            throw ValidationError(where + " is empty");
        } catch (const Unbounded&) {
            throw ValidationError(where + " is unbounded");
        }
    }
}

Mat build_T_pi(const FactorModel& fm, const Policy& pi) {
    if (pi.states() != fm.states() || pi.actions() != fm.actions())
        throw DimensionMismatch("build_T_pi: policy and factor model dimensions differ");
    Mat T(fm.states(), fm.factors());
    for (long s = 0; s < fm.states(); ++s)
        T.row(s) = (fm.coefficients(s) * pi.matrix().row(s).transpose()).transpose();
    return T;
}

TransitionKernel assemble_kernel(const FactorModel& fm, const Mat& W) {
    if (W.rows() != fm.states() || W.cols() != fm.factors())
        throw DimensionMismatch("assemble_kernel: W must be S x r");
    Mat Wn = W;
    for (long i = 0; i < W.cols(); ++i) {
        if (W.col(i).minCoeff() < -1e-8 || std::abs(W.col(i).sum() - 1.0) > 1e-8)
            throw NotStochastic("assemble_kernel: column " + std::to_string(i) +
                                " of W is not a distribution");
        Wn.col(i) = W.col(i).cwiseMax(0.0);
        Wn.col(i) /= Wn.col(i).sum();
    }
    std::vector<Mat> slices(fm.states());
    for (long s = 0; s < fm.states(); ++s) slices[s] = fm.coefficients(s).transpose() * Wn.transpose();
    return TransitionKernel(std::move(slices));
}

Embedding embed_sa_rectangular(long n_states, long n_actions, std::vector<FactorSet> per_pair_sets) {
    const long r = n_states * n_actions;
    if (n_states < 1 || n_actions < 1) throw EmptyInput("embed_sa_rectangular: empty dimensions");
    if (static_cast<long>(per_pair_sets.size()) != r)
        throw DimensionMismatch("embed_sa_rectangular: need one set per (s,a) pair");

    Mat W_nom(n_states, r);
    std::vector<Mat> U(n_states, Mat::Zero(r, n_actions));
    for (long s = 0; s < n_states; ++s) {
        for (long a = 0; a < n_actions; ++a) {
            const long i = s * n_actions + a;
            U[s](i, a) = 1.0;
            if (const auto* budget = std::get_if<BudgetSet>(&per_pair_sets[i])) {
                W_nom.col(i) = budget->w_nom;
            } else {
                // Any feasible point serves as the nominal factor.
                W_nom.col(i) = minimize_over(per_pair_sets[i], Vec::Zero(n_states)).argmin;
            }
        }
    }
    Embedding out{FactorModel(std::move(U), std::move(W_nom)), FactorUncertainty{std::move(per_pair_sets)}};
    validate(out.uncertainty, n_states);
    return out;
}

Mat stacked_kernel(const TransitionKernel& P, const std::vector<long>& skip_states) {
    const long S = P.states();
    const long A = P.actions();
    std::vector<long> kept;
    for (long s = 0; s < S; ++s)
        if (std::find(skip_states.begin(), skip_states.end(), s) == skip_states.end()) kept.push_back(s);
    Mat M(S, static_cast<long>(kept.size()) * A);
    for (std::size_t k = 0; k < kept.size(); ++k)
        M.middleCols(static_cast<long>(k) * A, A) = P.slice(kept[k]).transpose();
    return M;
}

NmfResiduals residual_norms(const Mat& error) {
    NmfResiduals out;
    out.l2 = error.norm();
    out.l1 = error.cwiseAbs().colwise().sum().maxCoeff();
    out.linf = error.cwiseAbs().rowwise().sum().maxCoeff();
    return out;
}

namespace {

void project_columns(Mat& X) {
    for (long j = 0; j < X.cols(); ++j) X.col(j) = project_simplex(X.col(j));
}

double nmf_objective(const Mat& M, const Mat& W, const Mat& u) { return 0.5 * (M - W * u).squaredNorm(); }

double largest_eigenvalue(const Mat& G) {
    Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues().maxCoeff(), 1e-12);
}

/// One projected gradient step on X for f(X) = 0.5 |target - left X right|^2 style
/// blocks; `objective` evaluates f and `gradient` its gradient. The step starts at
/// 4/L and halves until the standard sufficient-decrease test holds.
template <typename Objective>
void projected_step(Mat& X, const Mat& grad, double lipschitz, double& f, Objective&& objective) {
    double step = 4.0 / lipschitz;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
        Mat candidate = X - step * grad;
        project_columns(candidate);
        const Mat d = candidate - X;
        const double fc = objective(candidate);
        if (fc <= f + (grad.array() * d.array()).sum() + d.squaredNorm() / (2.0 * step) && fc <= f) {
            X = std::move(candidate);
            f = fc;
            return;
        }
    }
}

struct RestartOutcome {
    Mat W, u;
    double objective;
    std::vector<double> history;
};

RestartOutcome run_restart(const Mat& M, Mat W, Mat u, const NmfOptions& opts) {
    RestartOutcome out;
    double f = nmf_objective(M, W, u);
    out.history.push_back(f);
    for (long it = 0; it < opts.max_iters && f > 0.0; ++it) {
        const double before = f;

        const Mat uuT = u * u.transpose();
        const Mat gradW = (W * u - M) * u.transpose();
        projected_step(W, gradW, largest_eigenvalue(uuT), f,
                       [&](const Mat& Wc) { return nmf_objective(M, Wc, u); });

        const Mat WtW = W.transpose() * W;
        const Mat gradU = W.transpose() * (W * u - M);
        projected_step(u, gradU, largest_eigenvalue(WtW), f,
                       [&](const Mat& uc) { return nmf_objective(M, W, uc); });

        out.history.push_back(f);
        if (before - f <= opts.tol * before) break;
    }
    out.W = std::move(W);
    out.u = std::move(u);
    out.objective = f;
    return out;
}

/// Farthest-point selection of r columns of M (a simplex-vertex heuristic).
std::vector<long> farthest_columns(const Mat& M, long r) {
    std::vector<long> picked;
    Vec dist = Vec::Constant(M.cols(), std::numeric_limits<double>::infinity());
    Eigen::Index first;
    (M.colwise() - M.rowwise().mean()).colwise().squaredNorm().maxCoeff(&first);
    picked.push_back(first);
    while (static_cast<long>(picked.size()) < r) {
        const long last = picked.back();
        for (long j = 0; j < M.cols(); ++j) dist(j) = std::min(dist(j), (M.col(j) - M.col(last)).squaredNorm());
        for (long p : picked) dist(p) = -1.0;
        Eigen::Index next;
        dist.maxCoeff(&next);
        picked.push_back(next);
    }
    return picked;
}

} // namespace

NmfResult nmf_factorize(const TransitionKernel& P, long r, const NmfOptions& opts,
                        const std::vector<long>& skip_states) {
    if (opts.max_iters < 1) throw ValidationError("nmf_factorize: max_iters must be >= 1");
    if (opts.restarts < 1) throw ValidationError("nmf_factorize: restarts must be >= 1");
    for (long s : skip_states)
        if (s < 0 || s >= P.states()) throw IndexOutOfRange("nmf_factorize: skipped state out of range");
    const Mat M = stacked_kernel(P, skip_states);
    const long S = M.rows();
    const long n = M.cols();
    if (r < 1) throw ValidationError("nmf_factorize: r must be >= 1");
    if (r > n) throw RankTooLarge("nmf_factorize: r = " + std::to_string(r) + " exceeds the " +
                                  std::to_string(n) + " state-action columns");

    NmfResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (long k = 0; k < opts.restarts; ++k) {
        std::mt19937_64 rng(opts.seed * 1000003ULL + static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        Mat W(S, r);
        Mat u = Mat::Constant(r, n, 1.0 / static_cast<double>(r));
        if (k == 0 && r == n) {
            // Exact selection embedding.
            W = M;
            u.setIdentity();
        } else if (k == 0) {
            const auto cols = farthest_columns(M, r);
            for (long i = 0; i < r; ++i) W.col(i) = M.col(cols[i]);
        } else {
            std::vector<long> perm(n);
            for (long j = 0; j < n; ++j) perm[j] = j;
            std::shuffle(perm.begin(), perm.end(), rng);
            for (long i = 0; i < r; ++i) {
                Vec noise(S);
                for (long t = 0; t < S; ++t) noise(t) = unif(rng);
                noise /= noise.sum();
                W.col(i) = 0.8 * M.col(perm[i]) + 0.2 * noise;
            }
        }
        project_columns(W);

        RestartOutcome run = run_restart(M, std::move(W), std::move(u), opts);
        if (run.objective < best.objective) {
            best.W = std::move(run.W);
            best.u = std::move(run.u);
            best.objective = run.objective;
            best.history = std::move(run.history);
            best.best_restart = k;
        }
    }
    best.residuals = residual_norms(M - best.W * best.u);
    for (long s = 0; s < P.states(); ++s) {
        if (std::find(skip_states.begin(), skip_states.end(), s) != skip_states.end()) continue;
        for (long a = 0; a < P.actions(); ++a) best.column_state.push_back(s);
    }
    return best;
}

FactorModel factor_model_from_nmf(const NmfResult& fit, long n_actions,
                                  const std::vector<long>& absorbing_states) {
    const long S = fit.W.rows();
    const long r = fit.W.cols();
    const long extra = static_cast<long>(absorbing_states.size());
    Mat W(S, r + extra);
    W.leftCols(r) = fit.W;
    std::vector<Mat> U(S, Mat::Zero(r + extra, n_actions));
    for (long k = 0; k < extra; ++k) {
        const long m = absorbing_states[k];
        if (m < 0 || m >= S) throw IndexOutOfRange("factor_model_from_nmf: absorbing state out of range");
        W.col(r + k) = Vec::Unit(S, m);
        U[m].row(r + k).setOnes();
    }
    long col = 0;
    for (long s = 0; s < S; ++s) {
        if (std::find(absorbing_states.begin(), absorbing_states.end(), s) != absorbing_states.end())
            continue;
        if (col + n_actions > fit.u.cols())
            throw DimensionMismatch("factor_model_from_nmf: coefficient matrix too small");
        U[s].topRows(r) = fit.u.middleCols(col, n_actions);
        col += n_actions;
    }
    if (col != fit.u.cols()) throw DimensionMismatch("factor_model_from_nmf: column count mismatch");
    return FactorModel(std::move(U), std::move(W));
}

FactorUncertainty build_budget_uncertainty(const Mat& W_nom, double tau, double c) {
    if (!(tau >= 0.0)) throw ValidationError("build_budget_uncertainty: tau must be >= 0");
    if (!(c >= 0.0)) throw ValidationError("build_budget_uncertainty: c must be >= 0");
    const double gamma = c * std::sqrt(static_cast<double>(W_nom.rows())) * tau;
    FactorUncertainty fu;
    for (long i = 0; i < W_nom.cols(); ++i) fu.sets.emplace_back(BudgetSet{W_nom.col(i), tau, gamma});
    return fu;
}

FactorUncertainty pin_factor(const FactorUncertainty& fu, long index, const Vec& point) {
    if (index < 0 || index >= fu.factors())
        throw IndexOutOfRange("pin_factor: factor index " + std::to_string(index) + " out of range");
    if (!is_distribution(point, 1e-12)) throw NotStochastic("pin_factor: point is not a distribution");
    FactorUncertainty out = fu;
    out.sets[index] = singleton_set(point);
    return out;
}

SRectUncertainty build_s_rect_uncertainty(const TransitionKernel& P_nom, double tau,
                                          const std::vector<long>& pinned_states) {
    if (!(tau >= 0.0) || tau > 1.0) throw ValidationError("s-rect uncertainty: tau must lie in [0, 1]");
    const long S = P_nom.states();
    const double gamma = std::sqrt(static_cast<double>(S * P_nom.actions())) * tau;
    SRectUncertainty out;
    for (long s = 0; s < S; ++s) {
        const bool pinned = std::find(pinned_states.begin(), pinned_states.end(), s) != pinned_states.end();
        out.states.push_back({P_nom.slice(s), pinned ? 0.0 : tau, pinned ? 0.0 : gamma});
    }
    return out;
}

} // namespace rmdp
