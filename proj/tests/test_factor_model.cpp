#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rmdp/factor_model.hpp"
#include "rmdp/robust.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace rmdp;

namespace {

double max_kernel_gap(const TransitionKernel& a, const TransitionKernel& b) {
    double gap = 0.0;
    for (long s = 0; s < a.states(); ++s) gap = std::max(gap, (a.slice(s) - b.slice(s)).cwiseAbs().maxCoeff());
    return gap;
}

TransitionKernel planted_kernel(long S, long A, long r, std::mt19937_64& rng) {
    const FactorModel fm = oracle::random_factor_model(S, A, r, rng);
    return assemble_kernel(fm, fm.W_nom());
}

} // namespace

TEST_CASE("factor model validation") {
    std::vector<Mat> U{Mat::Constant(2, 1, 0.5)};
    CHECK_NOTHROW(FactorModel(U, Mat::Constant(1, 2, 1.0)));
    CHECK_THROWS_AS(FactorModel(U, Mat::Constant(1, 2, 0.5)), NotStochastic);
    CHECK_THROWS_AS(FactorModel(std::vector<Mat>{Mat::Constant(2, 1, 0.6)}, Mat::Ones(1, 2)), NotStochastic);
    CHECK_THROWS_AS(FactorModel(std::vector<Mat>{Mat::Constant(3, 1, 1.0 / 3.0)}, Mat::Ones(1, 2)),
                    DimensionMismatch);
}

TEST_CASE("assemble_kernel: one factor couples every row") {
    const Vec w{{0.3, 0.7}};
    std::vector<Mat> U(2, Mat::Ones(1, 2));
    const FactorModel fm(U, w);
    const TransitionKernel P = assemble_kernel(fm, w);
    for (long s = 0; s < 2; ++s)
        for (long a = 0; a < 2; ++a) CHECK((P.row(s, a) - w).norm() == 0.0);
}

TEST_CASE("assemble_kernel: normalization, linearity and rejection") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const FactorModel fm = oracle::random_factor_model(4, 3, 3, rng);
        const Mat W1 = oracle::random_stochastic_rows(3, 4, rng).transpose();
        const Mat W2 = oracle::random_stochastic_rows(3, 4, rng).transpose();
        const TransitionKernel P1 = assemble_kernel(fm, W1), P2 = assemble_kernel(fm, W2);
        const TransitionKernel Pm = assemble_kernel(fm, 0.5 * (W1 + W2));
        for (long s = 0; s < 4; ++s) {
            CHECK((P1.slice(s).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
            CHECK((Pm.slice(s) - 0.5 * (P1.slice(s) + P2.slice(s))).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    const FactorModel fm = oracle::random_factor_model(3, 2, 2, rng);
    Mat bad = fm.W_nom();
    bad(0, 0) += 1e-6;
    CHECK_THROWS_AS(assemble_kernel(fm, bad), NotStochastic);
    CHECK_THROWS_AS(assemble_kernel(fm, Mat::Constant(3, 3, 1.0 / 3.0)), DimensionMismatch);
}

TEST_CASE("embed_sa_rectangular: base cases") {
    const Vec w{{1.0}};
    const Embedding one = embed_sa_rectangular(1, 1, {singleton_set(w)});
    CHECK(one.model.factors() == 1);
    CHECK(one.model.u(0, 0, 0) == 1.0);

    const Vec p1{{0.2, 0.8}}, p2{{0.9, 0.1}};
    const Embedding two = embed_sa_rectangular(2, 1, {singleton_set(p1), singleton_set(p2)});
    const TransitionKernel P = assemble_kernel(two.model, two.model.W_nom());
    CHECK(P.row(0, 0) == p1);
    CHECK(P.row(1, 0) == p2);
    CHECK_THROWS_AS(embed_sa_rectangular(2, 2, {singleton_set(p1)}), DimensionMismatch);
}

TEST_CASE("embed_sa_rectangular reproduces every selection") {
    std::mt19937_64 rng(22);
    std::vector<FactorSet> sets;
    for (int k = 0; k < 4; ++k) sets.emplace_back(BudgetSet{oracle::random_distribution(2, rng), 0.2, 0.3});
    const Embedding emb = embed_sa_rectangular(2, 2, sets);
    CHECK(emb.model.factors() == 4);
    for (int trial = 0; trial < 100; ++trial) {
        Mat W(2, 4);
        for (long i = 0; i < 4; ++i) {
            const auto& set = std::get<BudgetSet>(sets[i]);
            const Vec c = oracle::random_distribution(2, rng) - Vec::Constant(2, 0.5);
            W.col(i) = budget_min_oracle(c, set).argmin;
            CHECK(contains(emb.uncertainty.sets[i], W.col(i)));
        }
        const TransitionKernel P = assemble_kernel(emb.model, W);
        for (long s = 0; s < 2; ++s)
            for (long a = 0; a < 2; ++a) CHECK((P.row(s, a) - W.col(s * 2 + a)).lpNorm<Eigen::Infinity>() <= 1e-14);
    }
}

TEST_CASE("polytope factor sets: minimize, contain, validate") {
    std::mt19937_64 rng(23);
    const Polytope P = oracle::few_vertex_polytope(3, rng, true);
    const FactorSet set = P;
    const auto vertices = oracle::enumerate_vertices(P);
    CHECK(vertices.size() == 4);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec c = oracle::random_distribution(3, rng);
        CHECK(minimize_over(set, c).value == doctest::Approx(oracle::min_over(vertices, c)));
    }
    for (const auto& v : vertices) CHECK(contains(set, v));
    CHECK_FALSE(contains(set, Vec{{1.0, 0.0, 0.0}}));

    // Lifted budget polytope: membership goes through the auxiliary columns.
    const BudgetSet budget{Vec{{0.5, 0.3, 0.2}}, 0.1, 0.15};
    const FactorSet lifted = to_polytope(budget);
    CHECK(contains(lifted, Vec{{0.55, 0.25, 0.2}}));
    CHECK_FALSE(contains(lifted, Vec{{0.58, 0.22, 0.2}}));

    FactorUncertainty fu{{set, lifted}};
    CHECK_NOTHROW(validate(fu, 3));
    Polytope loose;
    loose.A = Mat::Ones(1, 3);
    loose.b = Vec::Ones(1);
    CHECK_THROWS_AS(validate(FactorUncertainty{{FactorSet(loose)}}, 3), ValidationError);
    Polytope empty = P;
    empty.b(2) = 2.0;
    CHECK_THROWS_AS(validate(FactorUncertainty{{FactorSet(empty)}}, 3), ValidationError);
}

TEST_CASE("budget uncertainty builder") {
    std::mt19937_64 rng(24);
    const Mat W = oracle::random_stochastic_rows(3, 6, rng).transpose();
    const FactorUncertainty zero = build_budget_uncertainty(W, 0.0);
    for (long i = 0; i < 3; ++i) {
        const Vec c = oracle::random_distribution(6, rng);
        CHECK(minimize_over(zero.sets[i], c).argmin == W.col(i));
    }

    const FactorUncertainty wide = build_budget_uncertainty(W, 1.0, 10.0);
    for (int trial = 0; trial < 20; ++trial)
        CHECK(contains(wide.sets[0], oracle::random_distribution(6, rng)));

    const FactorUncertainty fu = build_budget_uncertainty(W, 0.05);
    const auto& set = std::get<BudgetSet>(fu.sets[0]);
    CHECK(set.gamma == doctest::Approx(std::sqrt(6.0) * 0.05));
    Vec feasible = W.col(0);
    const long hi = [&] { Eigen::Index k; feasible.maxCoeff(&k); return static_cast<long>(k); }();
    const long lo = hi == 0 ? 1 : 0;
    const double step = std::min(0.04, feasible(hi));
    feasible(hi) -= step;
    feasible(lo) += step;
    CHECK(contains(fu.sets[0], feasible));
    Vec too_far = W.col(0);
    const double big = std::min(0.06, too_far(hi));
    too_far(hi) -= big;
    too_far(lo) += big;
    if (big > 0.05) CHECK_FALSE(contains(fu.sets[0], too_far));
    for (long i = 0; i < 3; ++i) CHECK(contains(fu.sets[i], W.col(i)));
}

TEST_CASE("pin_factor") {
    std::mt19937_64 rng(25);
    const long S = 4, A = 2;
    FactorModel fm = oracle::random_factor_model(S, A, 2, rng);
    // Add an absorbing factor for state 3.
    std::vector<Mat> U(S, Mat::Zero(3, A));
    for (long s = 0; s < S - 1; ++s) U[s].topRows(2) = fm.coefficients(s);
    U[S - 1].row(2).setOnes();
    Mat W(S, 3);
    W.leftCols(2) = fm.W_nom();
    W.col(2) = Vec::Unit(S, S - 1);
    const FactorModel model(U, W);

    FactorUncertainty fu = build_budget_uncertainty(W, 0.2);
    fu = pin_factor(fu, 2, Vec::Unit(S, S - 1));
    CHECK(minimize_over(fu.sets[2], Vec{{-5.0, 1.0, 2.0, 3.0}}).argmin == Vec::Unit(S, S - 1));
    for (int trial = 0; trial < 20; ++trial) {
        Mat Wt(S, 3);
        for (long i = 0; i < 3; ++i) Wt.col(i) = minimize_over(fu.sets[i], oracle::random_distribution(S, rng)).argmin;
        const TransitionKernel P = assemble_kernel(model, Wt);
        for (long a = 0; a < A; ++a) CHECK(P.row(S - 1, a) == Vec::Unit(S, S - 1));
    }
    CHECK_THROWS_AS(pin_factor(fu, 3, Vec::Unit(S, 0)), IndexOutOfRange);
    CHECK_THROWS_AS(pin_factor(fu, 0, Vec::Constant(S, 0.3)), NotStochastic);
}

TEST_CASE("pinning every factor reduces worst case to the nominal reward") {
    std::mt19937_64 rng(26);
    const MdpInstance inst = oracle::random_instance(3, 2, rng);
    const FactorModel fm = oracle::random_factor_model(3, 2, 2, rng);
    FactorUncertainty fu = build_budget_uncertainty(fm.W_nom(), 0.3);
    for (long i = 0; i < 2; ++i) fu = pin_factor(fu, i, fm.W_nom().col(i));
    const Policy pi = oracle::random_policy(3, 2, rng);
    const double z = evaluate_worst_case(inst, fm, fu, pi, 1e-8).z;
    CHECK(z == doctest::Approx(expected_reward(inst, pi, assemble_kernel(fm, fm.W_nom()))).epsilon(1e-8));
}

TEST_CASE("s-rect uncertainty builder") {
    std::mt19937_64 rng(27);
    const TransitionKernel P = oracle::random_kernel(3, 2, rng);
    const SRectUncertainty sr = build_s_rect_uncertainty(P, 0.1, {2});
    CHECK(sr.states[0].gamma == doctest::Approx(std::sqrt(6.0) * 0.1));
    CHECK(sr.states[2].tau == 0.0);
    CHECK(sr.states[1].P_nom == P.slice(1));
    CHECK_THROWS_AS(build_s_rect_uncertainty(P, 1.5), ValidationError);
}

TEST_CASE("stacked kernel layout and residual norms") {
    std::mt19937_64 rng(28);
    const TransitionKernel P = oracle::random_kernel(3, 2, rng);
    const Mat M = stacked_kernel(P);
    CHECK(M.rows() == 3);
    CHECK(M.cols() == 6);
    CHECK(M.col(1 * 2 + 1) == P.row(1, 1));
    CHECK(stacked_kernel(P, {0}).cols() == 4);

    Mat E(2, 2);
    E << 1, -2, 3, 4;
    const NmfResiduals res = residual_norms(E);
    CHECK(res.l2 == doctest::Approx(std::sqrt(30.0)));
    CHECK(res.l1 == doctest::Approx(6.0));
    CHECK(res.linf == doctest::Approx(7.0));
}

TEST_CASE("nmf: planted factorizations are recovered") {
    std::mt19937_64 rng(29);
    for (long r0 : {2L, 3L}) {
        for (int trial = 0; trial < 3; ++trial) {
            const TransitionKernel P = planted_kernel(5, 3, r0, rng);
            const NmfResult fit = nmf_factorize(P, r0);
            CHECK(fit.residuals.linf <= 1e-6);
        }
    }
}

TEST_CASE("nmf: full rank reaches the selection embedding") {
    std::mt19937_64 rng(30);
    const TransitionKernel P = oracle::random_kernel(3, 2, rng);
    const NmfResult fit = nmf_factorize(P, 6);
    CHECK(fit.residuals.linf <= 1e-8);
    CHECK_THROWS_AS(nmf_factorize(P, 7), RankTooLarge);
    CHECK_THROWS_AS(nmf_factorize(P, 2, NmfOptions{0, 1e-13, 10, 0}), ValidationError);
}

TEST_CASE("nmf: monotone objective and exact feasibility on random kernels") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 6; ++trial) {
        const long S = 3 + trial % 3, A = 2;
        const TransitionKernel P = oracle::random_kernel(S, A, rng);
        const long r = 1 + trial % 4;
        NmfOptions opts;
        opts.restarts = 3;
        opts.max_iters = 2000;
        opts.seed = static_cast<std::uint64_t>(trial);
        const NmfResult fit = nmf_factorize(P, r, opts);
        for (std::size_t k = 1; k < fit.history.size(); ++k) CHECK(fit.history[k] <= fit.history[k - 1] + 1e-12);
        CHECK((fit.W.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
        CHECK((fit.u.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
        CHECK(fit.W.minCoeff() >= 0.0);
        CHECK(fit.u.minCoeff() >= 0.0);
        CHECK(fit.objective == doctest::Approx(0.5 * (stacked_kernel(P) - fit.W * fit.u).squaredNorm()));
    }
}

TEST_CASE("nmf: same seed gives the same factorization") {
    std::mt19937_64 rng(32);
    const TransitionKernel P = oracle::random_kernel(4, 2, rng);
    NmfOptions opts;
    opts.restarts = 4;
    opts.max_iters = 500;
    opts.seed = 7;
    const NmfResult a = nmf_factorize(P, 3, opts), b = nmf_factorize(P, 3, opts);
    CHECK(a.W == b.W);
    CHECK(a.u == b.u);
}

TEST_CASE("factor model from an NMF fit with an absorbing state") {
    std::mt19937_64 rng(33);
    const long S = 4, A = 2;
    std::vector<Mat> slices;
    for (long s = 0; s < S - 1; ++s) slices.push_back(oracle::random_stochastic_rows(A, S, rng));
    Mat absorbing = Mat::Zero(A, S);
    absorbing.col(S - 1).setOnes();
    slices.push_back(absorbing);
    const TransitionKernel P(slices);
    const NmfResult fit = nmf_factorize(P, 6, {}, {S - 1});
    CHECK(fit.residuals.linf <= 1e-8);
    const FactorModel fm = factor_model_from_nmf(fit, A, {S - 1});
    CHECK(fm.factors() == 7);
    const TransitionKernel Q = assemble_kernel(fm, fm.W_nom());
    CHECK(max_kernel_gap(P, Q) <= 1e-8);
    for (long s = 0; s < S - 1; ++s) CHECK(fm.coefficients(s).row(6).norm() == 0.0);
}
