#include "oracles.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace oracle {

using namespace rmdp;

std::vector<Vec> enumerate_vertices(const Polytope& P, double tol) {
    const long n = P.cols();
    const long m = P.rows();
    Mat G(m + (P.nonneg ? n : 0), n);
    Vec h(G.rows());
    G.topRows(m) = P.A;
    h.head(m) = P.b;
    if (P.nonneg) {
        G.bottomRows(n).setIdentity();
        h.tail(n).setZero();
    }
    const long total = G.rows();
    std::vector<Vec> out;
    if (total < n) return out;

    std::vector<long> pick(n);
    for (long k = 0; k < n; ++k) pick[k] = k;
    for (;;) {
        Mat sub(n, n);
        Vec rhs(n);
        for (long k = 0; k < n; ++k) {
            sub.row(k) = G.row(pick[k]);
            rhs(k) = h(pick[k]);
        }
        Eigen::FullPivLU<Mat> lu(sub);
        if (lu.rank() == n) {
            const Vec x = lu.solve(rhs);
            if (((G * x - h).array() >= -tol).all()) {
                bool seen = false;
                for (const auto& v : out) seen = seen || (v - x).lpNorm<Eigen::Infinity>() < 1e-9;
                if (!seen) out.push_back(x);
            }
        }
        long pos = n - 1;
        while (pos >= 0 && pick[pos] == total - n + pos) --pos;
        if (pos < 0) break;
        ++pick[pos];
        for (long k = pos + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
    }
    return out;
}

std::vector<Vec> budget_vertices(const BudgetSet& set) {
    const long S = set.w_nom.size();
    const long signs = 1L << S;
    Polytope P;
    P.A = Mat::Zero(2 + 2 * S + signs, S);
    P.b = Vec::Zero(P.A.rows());
    P.A.row(0).setOnes();
    P.b(0) = 1.0;
    P.A.row(1).setConstant(-1.0);
    P.b(1) = -1.0;
    for (long j = 0; j < S; ++j) {
        P.A(2 + j, j) = 1.0;
        P.b(2 + j) = set.w_nom(j) - set.tau;
        P.A(2 + S + j, j) = -1.0;
        P.b(2 + S + j) = -set.w_nom(j) - set.tau;
    }
    for (long mask = 0; mask < signs; ++mask) {
        Vec sigma(S);
        for (long j = 0; j < S; ++j) sigma(j) = (mask >> j) & 1 ? 1.0 : -1.0;
        P.A.row(2 + 2 * S + mask) = -sigma.transpose();
        P.b(2 + 2 * S + mask) = -set.gamma - sigma.dot(set.w_nom);
    }
    return enumerate_vertices(P);
}

double min_over(const std::vector<Vec>& vertices, const Vec& c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) best = std::min(best, c.dot(v));
    return best;
}

Vec random_distribution(long n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Vec p(n);
    for (long k = 0; k < n; ++k) p(k) = e(rng);
    p /= p.sum();
    return p;
}

Mat random_stochastic_rows(long rows, long cols, std::mt19937_64& rng) {
    Mat M(rows, cols);
    for (long i = 0; i < rows; ++i) M.row(i) = random_distribution(cols, rng).transpose();
    return M;
}

TransitionKernel random_kernel(long S, long A, std::mt19937_64& rng) {
    std::vector<Mat> slices;
    for (long s = 0; s < S; ++s) slices.push_back(random_stochastic_rows(A, S, rng));
    return TransitionKernel(std::move(slices));
}

MdpInstance random_instance(long S, long A, std::mt19937_64& rng, double discount) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat R(S, A);
    for (long i = 0; i < R.size(); ++i) R.data()[i] = u(rng);
    if (discount < 0.0) discount = 0.5 + 0.45 * u(rng);
    Vec p0 = random_distribution(S, rng);
    p0(S - 1) = 1.0 - p0.head(S - 1).sum();
    if (p0(S - 1) < 0.0) p0 = Vec::Constant(S, 1.0 / static_cast<double>(S));
    return MdpInstance(R, discount, p0);
}

FactorModel random_factor_model(long S, long A, long r, std::mt19937_64& rng) {
    std::vector<Mat> U;
    for (long s = 0; s < S; ++s) U.push_back(random_stochastic_rows(A, r, rng).transpose());
    return FactorModel(std::move(U), random_stochastic_rows(r, S, rng).transpose());
}

Policy random_policy(long S, long A, std::mt19937_64& rng) {
    Mat pi = random_stochastic_rows(S, A, rng);
    for (long s = 0; s < S; ++s) pi(s, A - 1) = 1.0 - pi.row(s).head(A - 1).sum();
    return Policy(pi.cwiseMax(0.0));
}

std::vector<Policy> all_deterministic_policies(long S, long A) {
    std::vector<Policy> out;
    std::vector<long> actions(S, 0);
    for (;;) {
        out.push_back(Policy::deterministic(actions, A));
        long pos = S - 1;
        while (pos >= 0 && ++actions[pos] == A) actions[pos--] = 0;
        if (pos < 0) break;
    }
    return out;
}

Polytope few_vertex_polytope(long S, std::mt19937_64& rng, bool extra_cut) {
    std::uniform_real_distribution<double> u(0.0, 0.2);
    Vec lower(S);
    for (long j = 0; j < S; ++j) lower(j) = u(rng);
    const double slack = 1.0 - lower.sum();
    Polytope P;
    P.A = Mat::Zero(2 + S + (extra_cut ? 1 : 0), S);
    P.b = Vec::Zero(P.A.rows());
    P.A.row(0).setOnes();
    P.b(0) = 1.0;
    P.A.row(1).setConstant(-1.0);
    P.b(1) = -1.0;
    for (long j = 0; j < S; ++j) {
        P.A(2 + j, j) = 1.0;
        P.b(2 + j) = lower(j);
    }
    if (extra_cut) {
        const long k = std::uniform_int_distribution<long>(0, S - 1)(rng);
        P.A(2 + S, k) = -1.0;
        P.b(2 + S) = -(lower(k) + 0.5 * slack);
    }
    return P;
}

SmallProblem random_small_problem(std::mt19937_64& rng, long max_states, long max_actions, long max_factors) {
    const long S = std::uniform_int_distribution<long>(1, max_states)(rng);
    const long A = std::uniform_int_distribution<long>(1, max_actions)(rng);
    const long r = std::uniform_int_distribution<long>(1, max_factors)(rng);
    MdpInstance inst = random_instance(S, A, rng);
    FactorModel fm = random_factor_model(S, A, r, rng);
    FactorUncertainty fu;
    std::vector<std::vector<Vec>> vertices;
    std::uniform_int_distribution<int> kind(0, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (long i = 0; i < r; ++i) {
        const int k = S == 1 ? 3 : kind(rng);
        if (k <= 1) {
            Polytope P = few_vertex_polytope(S, rng, k == 1);
            vertices.push_back(enumerate_vertices(P));
            fu.sets.emplace_back(std::move(P));
        } else if (k == 2 && S <= 2) {
            BudgetSet B{random_distribution(S, rng), 0.3 * u(rng), 0.0};
            B.gamma = std::sqrt(static_cast<double>(S)) * B.tau;
            vertices.push_back(budget_vertices(B));
            fu.sets.emplace_back(std::move(B));
        } else {
            Vec w = random_distribution(S, rng);
            vertices.push_back({w});
            fu.sets.push_back(singleton_set(w));
        }
    }
    // W_nom of the model must lie in the sets for the nominal kernel to be feasible.
    Mat W(S, r);
    for (long i = 0; i < r; ++i) W.col(i) = vertices[i].front();
    FactorModel model(fm.U(), W);
    return {std::move(inst), std::move(model), std::move(fu), std::move(vertices)};
}

double truncated_series_reward(const MdpInstance& inst, const Policy& pi, const TransitionKernel& P, long T) {
    const Mat L = induced_chain(pi, P);
    const Vec r = policy_rewards(inst, pi);
    Vec row = inst.p0();
    double total = 0.0, discount = 1.0;
    for (long t = 0; t <= T; ++t) {
        total += discount * row.dot(r);
        row = L.transpose() * row;
        discount *= inst.discount();
    }
    return total;
}

Vec best_deterministic_value(const MdpInstance& inst, const TransitionKernel& P) {
    Vec best = Vec::Constant(inst.states(), -std::numeric_limits<double>::infinity());
    for (const auto& pi : all_deterministic_policies(inst.states(), inst.actions())) {
        const Mat L = induced_chain(pi, P);
        const Vec v = (Mat::Identity(inst.states(), inst.states()) - inst.discount() * L)
                          .fullPivLu()
                          .solve(policy_rewards(inst, pi));
        best = best.cwiseMax(v);
    }
    return best;
}

double factor_reward(const MdpInstance& inst, const FactorModel& fm, const Policy& pi, const Mat& W) {
    const Mat T = build_T_pi(fm, pi);
    const Vec r = policy_rewards(inst, pi);
    const long k = fm.factors();
    const Vec beta = (Mat::Identity(k, k) - inst.discount() * W.transpose() * T)
                         .fullPivLu()
                         .solve(W.transpose() * r);
    return inst.p0().dot(r + inst.discount() * T * beta);
}

} // namespace oracle
