#include "rmdp/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rmdp {

namespace {

void check_model(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu) {
    if (fm.states() != inst.states() || fm.actions() != inst.actions())
        throw DimensionMismatch("factor model dimensions do not match the instance");
    if (fu.factors() != fm.factors())
        throw DimensionMismatch("uncertainty has " + std::to_string(fu.factors()) + " sets for " +
                                std::to_string(fm.factors()) + " factors");
}

void check_eps_and_discount(double eps, double discount) {
    if (!(eps > 0.0)) throw ValidationError("eps must be positive");
    if (discount >= 1.0 - 1e-6) throw InvalidDiscount("discount must be below 1 - 1e-6");
}

/// Minimizes c over every factor set; fills the argmin columns of W.
Vec minimize_factors(const FactorUncertainty& fu, const Vec& c, Mat* W) {
    const long r = fu.factors();
    Vec out(r);
    if (W) W->resize(c.size(), r);
    for (long i = 0; i < r; ++i) {
        LpResult res = minimize_over(fu.sets[i], c);
        out(i) = res.value;
        if (W) W->col(i) = res.argmin;
    }
    return out;
}

/// V_s = max_a r_sa + lambda sum_i u_s(i,a) beta_i with lowest-index ties.
Vec greedy_values(const MdpInstance& inst, const FactorModel& fm, const Vec& beta, std::vector<long>& actions) {
    const long S = inst.states();
    const long A = inst.actions();
    Vec out(S);
    actions.assign(S, 0);
    for (long s = 0; s < S; ++s) {
        const Vec q = inst.rewards().row(s).transpose() +
                      inst.discount() * (fm.coefficients(s).transpose() * beta);
        long best = 0;
        for (long a = 1; a < A; ++a)
            if (q(a) > q(best)) best = a;
        out(s) = q(best);
        actions[s] = best;
    }
    return out;
}

Mat clean_policy_rows(Mat pi) {
    for (long s = 0; s < pi.rows(); ++s) {
        pi.row(s) = pi.row(s).cwiseMax(0.0);
        pi.row(s) /= pi.row(s).sum();
    }
    return pi;
}

bool is_singleton(const SRectStateSet& set) { return set.tau == 0.0 || set.gamma == 0.0; }

void check_s_rect(const MdpInstance& inst, const SRectUncertainty& sr) {
    if (static_cast<long>(sr.states.size()) != inst.states())
        throw DimensionMismatch("s-rect uncertainty: need one set per state");
    for (const auto& set : sr.states)
        if (set.P_nom.rows() != inst.actions() || set.P_nom.cols() != inst.states())
            throw DimensionMismatch("s-rect uncertainty: nominal block is not A x S");
}

/// Joint LP over (pi_s, mu+, mu-, y1, y2, y3, y4) for one state.
double s_rect_state_lp(const MdpInstance& inst, const SRectStateSet& set, long s, const Vec& v, Vec& pi_s) {
    const long A = inst.actions();
    const long S = inst.states();
    const long AS = A * S;
    const double lambda = inst.discount();
    const long o_pi = 0, o_mp = A, o_mm = 2 * A, o_y1 = 3 * A, o_y2 = o_y1 + AS, o_y3 = o_y2 + AS,
               o_y4 = o_y3 + AS;
    const long n = o_y4 + 1;

    Polytope lp;
    lp.A = Mat::Zero(2 + 2 * AS, n);
    lp.b = Vec::Zero(2 + 2 * AS);
    lp.A.row(0).segment(o_pi, A).setOnes();
    lp.b(0) = 1.0;
    lp.A.row(1).segment(o_pi, A).setConstant(-1.0);
    lp.b(1) = -1.0;
    for (long a = 0; a < A; ++a) {
        for (long t = 0; t < S; ++t) {
            const long k = a * S + t;
            const long row = 2 + k;
            lp.A(row, o_pi + a) = lambda * v(t);
            lp.A(row, o_mp + a) = -1.0;
            lp.A(row, o_mm + a) = 1.0;
            lp.A(row, o_y1 + k) = 1.0;
            lp.A(row, o_y2 + k) = -1.0;
            const long row2 = 2 + AS + k;
            lp.A(row2, o_y1 + k) = -1.0;
            lp.A(row2, o_y2 + k) = -1.0;
            lp.A(row2, o_y3 + k) = 1.0;
            lp.A(row2, o_y4) = 1.0;
        }
    }
    Vec c = Vec::Zero(n);
    c.segment(o_pi, A) = -inst.rewards().row(s).transpose();
    c.segment(o_mp, A).setConstant(-1.0);
    c.segment(o_mm, A).setConstant(1.0);
    for (long a = 0; a < A; ++a) {
        for (long t = 0; t < S; ++t) {
            const long k = a * S + t;
            c(o_y1 + k) = set.P_nom(a, t);
            c(o_y2 + k) = -set.P_nom(a, t);
            c(o_y3 + k) = set.tau;
        }
    }
    c(o_y4) = set.gamma;

    const LpResult res = lp_minimize(c, lp);
    pi_s = res.argmin.segment(o_pi, A);
    return -res.value;
}

} // namespace

Vec adversarial_bellman_phi(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                            const Policy& pi, const Vec& beta, Mat* argmins) {
    check_model(inst, fm, fu);
    check_dimensions(inst, pi);
    if (beta.size() != fm.factors()) throw DimensionMismatch("phi: beta must have one entry per factor");
    const Vec c = policy_rewards(inst, pi) + inst.discount() * (build_T_pi(fm, pi) * beta);
    return minimize_factors(fu, c, argmins);
}

WorstCaseEvaluation evaluate_worst_case(const MdpInstance& inst, const FactorModel& fm,
                                        const FactorUncertainty& fu, const Policy& pi, double eps) {
    check_model(inst, fm, fu);
    check_dimensions(inst, pi);
    check_eps_and_discount(eps, inst.discount());
    const double lambda = inst.discount();
    const double threshold = stopping_threshold(eps, lambda);
    const Vec r_pi = policy_rewards(inst, pi);
    const Mat T = build_T_pi(fm, pi);

    WorstCaseEvaluation out;
    Vec beta = Vec::Zero(fm.factors());
    for (long k = 1;; ++k) {
        Vec next = minimize_factors(fu, r_pi + lambda * (T * beta), &out.W_star);
        const double change = (next - beta).lpNorm<Eigen::Infinity>();
        beta = std::move(next);
        if (change < threshold) {
            out.iterations = k;
            break;
        }
        if (k > 100'000'000) throw NotConverged("evaluate_worst_case: iteration limit");
    }
    out.value = r_pi + lambda * (T * beta);
    out.z = inst.p0().dot(out.value);
    out.beta = std::move(beta);
    return out;
}

LpEvaluation evaluate_worst_case_lp(const MdpInstance& inst, const FactorModel& fm,
                                    const std::vector<Polytope>& sets, const Policy& pi) {
    check_dimensions(inst, pi);
    if (fm.states() != inst.states() || fm.actions() != inst.actions())
        throw DimensionMismatch("factor model dimensions do not match the instance");
    const long S = inst.states();
    const long r = fm.factors();
    if (static_cast<long>(sets.size()) != r) throw DimensionMismatch("need one polytope per factor");
    if (!(inst.discount() < 1.0)) throw InvalidDiscount("discount must lie in (0, 1)");

    std::vector<long> offset(r + 1, 0);
    long n_rows = 0;
    for (long l = 0; l < r; ++l) {
        if (!sets[l].nonneg) throw ValidationError("factor polytopes must have non-negative variables");
        if (sets[l].cols() < S || sets[l].b.size() != sets[l].rows())
            throw DimensionMismatch("factor polytope " + std::to_string(l) + " has wrong dimension");
        offset[l + 1] = offset[l] + sets[l].rows();
        n_rows += sets[l].cols();
    }
    const long n = offset[r];
    const double lambda = inst.discount();
    const Vec r_pi = policy_rewards(inst, pi);
    const Mat T = build_T_pi(fm, pi);

    // B maps alpha to (b_i' alpha_i)_i.
    Mat B = Mat::Zero(r, n);
    for (long i = 0; i < r; ++i) B.row(i).segment(offset[i], sets[i].rows()) = sets[i].b.transpose();

    Polytope lp;
    lp.A = Mat::Zero(n_rows, n);
    lp.b = Vec::Zero(n_rows);
    long row = 0;
    const Mat coupling = lambda * T * B;
    for (long l = 0; l < r; ++l) {
        for (long j = 0; j < sets[l].cols(); ++j, ++row) {
            if (j < S) {
                lp.A.row(row) = coupling.row(j);
                lp.b(row) = -r_pi(j);
            }
            lp.A.row(row).segment(offset[l], sets[l].rows()) -= sets[l].A.col(j).transpose();
        }
    }
    const Vec c = -lambda * (B.transpose() * (T.transpose() * inst.p0()));
    const LpResult res = lp_minimize(c, lp);

    LpEvaluation out;
    out.z = inst.p0().dot(r_pi) - res.value;
    for (long l = 0; l < r; ++l) out.certificate.alphas.push_back(res.argmin.segment(offset[l], sets[l].rows()));
    out.certificate.objective = out.z;
    return out;
}

double certificate_violation(const MdpInstance& inst, const FactorModel& fm,
                             const std::vector<Polytope>& sets, const Policy& pi,
                             const DualCertificate& cert) {
    const long S = inst.states();
    const long r = fm.factors();
    if (static_cast<long>(cert.alphas.size()) != r || static_cast<long>(sets.size()) != r)
        throw DimensionMismatch("certificate: need one block per factor");
    Vec bbar(r);
    double worst = 0.0;
    for (long i = 0; i < r; ++i) {
        if (cert.alphas[i].size() != sets[i].rows()) throw DimensionMismatch("certificate: block size");
        bbar(i) = sets[i].b.dot(cert.alphas[i]);
        worst = std::max(worst, -cert.alphas[i].minCoeff());
    }
    const Vec rhs = policy_rewards(inst, pi) + inst.discount() * (build_T_pi(fm, pi) * bbar);
    for (long l = 0; l < r; ++l) {
        const Vec lhs = sets[l].A.transpose() * cert.alphas[l];
        for (long j = 0; j < lhs.size(); ++j) worst = std::max(worst, lhs(j) - (j < S ? rhs(j) : 0.0));
    }
    return worst;
}

OperatorStep robust_bellman_F1(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                               const Vec& v) {
    check_model(inst, fm, fu);
    if (v.size() != inst.states()) throw DimensionMismatch("F1: v must have one entry per state");
    OperatorStep out;
    out.inner = minimize_factors(fu, v, &out.W);
    out.next = greedy_values(inst, fm, out.inner, out.actions);
    return out;
}

OperatorStep robust_bellman_F2(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                               const Vec& beta) {
    check_model(inst, fm, fu);
    if (beta.size() != fm.factors()) throw DimensionMismatch("F2: beta must have one entry per factor");
    OperatorStep out;
    out.inner = greedy_values(inst, fm, beta, out.actions);
    out.next = minimize_factors(fu, out.inner, &out.W);
    return out;
}

RobustSolveReport improve_policy(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                                 double eps, Variant variant) {
    check_model(inst, fm, fu);
    check_eps_and_discount(eps, inst.discount());
    const double threshold = stopping_threshold(eps, inst.discount());

    RobustSolveReport out;
    out.epsilon = eps;
    out.variant = variant;
    Vec x = variant == Variant::F1 ? Vec::Zero(inst.states()) : Vec::Zero(fm.factors());
    for (long k = 1;; ++k) {
        OperatorStep step = variant == Variant::F1 ? robust_bellman_F1(inst, fm, fu, x)
                                                   : robust_bellman_F2(inst, fm, fu, x);
        const double change = (step.next - x).lpNorm<Eigen::Infinity>();
        if (change < threshold) {
            out.iterations = k;
            out.residual = change;
            out.policy = Policy::deterministic(step.actions, inst.actions());
            out.W_star = std::move(step.W);
            if (variant == Variant::F1) {
                out.v = std::move(step.next);
                out.beta = std::move(step.inner);
            } else {
                out.v = std::move(step.inner);
                out.beta = std::move(x);
            }
            break;
        }
        x = std::move(step.next);
        if (k > 100'000'000) throw NotConverged("improve_policy: iteration limit");
    }
    out.objective = inst.p0().dot(out.v);
    return out;
}

BruteForceResult brute_force_oracle(const MdpInstance& inst, const FactorModel& fm,
                                    const std::vector<std::vector<Vec>>& vertices) {
    const long S = inst.states();
    const long A = inst.actions();
    const long r = fm.factors();
    if (fm.states() != S || fm.actions() != A)
        throw DimensionMismatch("factor model dimensions do not match the instance");
    if (static_cast<long>(vertices.size()) != r) throw DimensionMismatch("need one vertex list per factor");

    double total = std::pow(static_cast<double>(A), static_cast<double>(S));
    for (const auto& list : vertices) {
        if (list.empty()) throw EmptyInput("brute_force_oracle: empty vertex list");
        for (const auto& w : list)
            if (w.size() != S) throw DimensionMismatch("brute_force_oracle: vertex has wrong length");
        total *= static_cast<double>(list.size());
    }
    if (total > 1e6) throw TooLarge("brute_force_oracle: more than 1e6 evaluations");

    // Kernels for every vertex combination, in lexicographic order.
    std::vector<Mat> combos;
    std::vector<TransitionKernel> kernels;
    std::vector<long> idx(r, 0);
    for (;;) {
        Mat W(S, r);
        for (long i = 0; i < r; ++i) W.col(i) = vertices[i][idx[i]];
        kernels.push_back(assemble_kernel(fm, W));
        combos.push_back(std::move(W));
        long pos = r - 1;
        while (pos >= 0 && ++idx[pos] == static_cast<long>(vertices[pos].size())) idx[pos--] = 0;
        if (pos < 0) break;
    }

    BruteForceResult best;
    best.z = -std::numeric_limits<double>::infinity();
    std::vector<long> actions(S, 0);
    for (;;) {
        const Policy pi = Policy::deterministic(actions, A);
        double worst = std::numeric_limits<double>::infinity();
        long worst_k = 0;
        for (std::size_t k = 0; k < kernels.size(); ++k) {
            const double z = expected_reward(inst, pi, kernels[k]);
            if (z < worst) {
                worst = z;
                worst_k = static_cast<long>(k);
            }
        }
        if (worst > best.z) {
            best.z = worst;
            best.policy = pi;
            best.W_star = combos[worst_k];
        }
        long pos = S - 1;
        while (pos >= 0 && ++actions[pos] == A) actions[pos--] = 0;
        if (pos < 0) break;
    }
    return best;
}

DualityResiduals verify_duality(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                                const RobustSolveReport& report, double eps) {
    DualityResiduals out;
    out.gap = std::abs(report.objective - evaluate_worst_case(inst, fm, fu, report.policy, eps).z);
    const TransitionKernel P_star = assemble_kernel(fm, report.W_star);
    const Vec v_pi = policy_value(inst, report.policy, P_star);
    out.bellman_residual = (bellman_optimality(inst, P_star, v_pi) - v_pi).lpNorm<Eigen::Infinity>();
    out.eval_residual = (report.W_star.transpose() * report.v - report.beta).lpNorm<Eigen::Infinity>();
    return out;
}

double s_rect_inner_min(const MdpInstance& inst, const SRectUncertainty& sr, long s, const Vec& pi_s,
                        const Vec& v) {
    check_s_rect(inst, sr);
    if (s < 0 || s >= inst.states()) throw IndexOutOfRange("s_rect_inner_min: state out of range");
    const long A = inst.actions();
    const long S = inst.states();
    if (pi_s.size() != A || v.size() != S) throw DimensionMismatch("s_rect_inner_min: vector lengths");
    const SRectStateSet& set = sr.states[s];
    const double lambda = inst.discount();
    const double immediate = pi_s.dot(inst.rewards().row(s).transpose());
    if (is_singleton(set)) return immediate + lambda * pi_s.dot(set.P_nom * v);

    // Variables (P, t) with t >= |P - P_nom| entrywise.
    const long AS = A * S;
    Polytope lp;
    lp.A = Mat::Zero(2 * A + 3 * AS + 1, 2 * AS);
    lp.b = Vec::Zero(lp.A.rows());
    for (long a = 0; a < A; ++a) {
        lp.A.row(2 * a).segment(a * S, S).setOnes();
        lp.b(2 * a) = 1.0;
        lp.A.row(2 * a + 1).segment(a * S, S).setConstant(-1.0);
        lp.b(2 * a + 1) = -1.0;
    }
    for (long k = 0; k < AS; ++k) {
        const double nominal = set.P_nom(k / S, k % S);
        long row = 2 * A + k;
        lp.A(row, AS + k) = 1.0;
        lp.A(row, k) = -1.0;
        lp.b(row) = -nominal;
        row = 2 * A + AS + k;
        lp.A(row, AS + k) = 1.0;
        lp.A(row, k) = 1.0;
        lp.b(row) = nominal;
        row = 2 * A + 2 * AS + k;
        lp.A(row, AS + k) = -1.0;
        lp.b(row) = -set.tau;
        lp.A(2 * A + 3 * AS, AS + k) = -1.0;
    }
    lp.b(2 * A + 3 * AS) = -set.gamma;
    Vec c = Vec::Zero(2 * AS);
    for (long k = 0; k < AS; ++k) c(k) = lambda * pi_s(k / S) * v(k % S);
    return immediate + lp_minimize(c, lp).value;
}

Vec s_rect_bellman(const MdpInstance& inst, const SRectUncertainty& sr, const Vec& v, Mat* policy) {
    check_s_rect(inst, sr);
    const long S = inst.states();
    const long A = inst.actions();
    if (v.size() != S) throw DimensionMismatch("s_rect_bellman: v must have one entry per state");
    Vec out(S);
    if (policy) policy->setZero(S, A);
    for (long s = 0; s < S; ++s) {
        const SRectStateSet& set = sr.states[s];
        if (is_singleton(set)) {
            const Vec q = inst.rewards().row(s).transpose() + inst.discount() * (set.P_nom * v);
            long best = 0;
            for (long a = 1; a < A; ++a)
                if (q(a) > q(best)) best = a;
            out(s) = q(best);
            if (policy) (*policy)(s, best) = 1.0;
            continue;
        }
        Vec pi_s;
        out(s) = s_rect_state_lp(inst, set, s, v, pi_s);
        if (policy) policy->row(s) = pi_s.transpose();
    }
    if (policy) *policy = clean_policy_rows(*policy);
    return out;
}

SRectSolution s_rect_robust_vi(const MdpInstance& inst, const SRectUncertainty& sr, double eps) {
    check_s_rect(inst, sr);
    check_eps_and_discount(eps, inst.discount());
    const double threshold = stopping_threshold(eps, inst.discount());
    SRectSolution out;
    Vec v = Vec::Zero(inst.states());
    Mat pi;
    for (long k = 1;; ++k) {
        Vec next = s_rect_bellman(inst, sr, v, &pi);
        const double change = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (change < threshold) {
            out.iterations = k;
            break;
        }
        if (k > 100'000'000) throw NotConverged("s_rect_robust_vi: iteration limit");
    }
    out.policy = Policy(std::move(pi));
    out.z = inst.p0().dot(v);
    out.v = std::move(v);
    return out;
}

Vec s_rect_evaluate(const MdpInstance& inst, const SRectUncertainty& sr, const Policy& pi, double eps) {
    check_s_rect(inst, sr);
    check_dimensions(inst, pi);
    check_eps_and_discount(eps, inst.discount());
    const double threshold = stopping_threshold(eps, inst.discount());
    Vec v = Vec::Zero(inst.states());
    for (long k = 1;; ++k) {
        Vec next(inst.states());
        for (long s = 0; s < inst.states(); ++s)
            next(s) = s_rect_inner_min(inst, sr, s, pi.matrix().row(s).transpose(), v);
        const double change = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (change < threshold) break;
        if (k > 100'000'000) throw NotConverged("s_rect_evaluate: iteration limit");
    }
    return v;
}

Mat vertex_signature(const Mat& W) {
    return W.unaryExpr([](double x) { return std::round(x * 1e8) / 1e8 + 0.0; });
}

BlackwellScan blackwell_scan(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                             const std::vector<double>& lambdas, double eps, Variant variant) {
    if (lambdas.empty()) throw EmptyInput("blackwell_scan: empty discount grid");
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] > 0.0 && lambdas[k] < 1.0)) throw InvalidDiscount("blackwell_scan: grid values must lie in (0, 1)");
        if (k > 0 && !(lambdas[k] > lambdas[k - 1])) throw ValidationError("blackwell_scan: grid must be ascending");
    }
    BlackwellScan out;
    std::vector<Mat> signatures;
    for (double lambda : lambdas) {
        out.reports.push_back(improve_policy(inst.with_discount(lambda), fm, fu, eps, variant));
        signatures.push_back(vertex_signature(out.reports.back().W_star));
    }
    const long last = static_cast<long>(lambdas.size()) - 1;
    out.stable_policy = out.reports[last].policy;
    out.stable_signature = signatures[last];
    out.threshold_index = last;
    while (out.threshold_index > 0 && out.reports[out.threshold_index - 1].policy == out.stable_policy &&
           signatures[out.threshold_index - 1] == out.stable_signature)
        --out.threshold_index;
    return out;
}

MaxPrincipleCheck check_max_principle(const MdpInstance& inst, const FactorModel& fm,
                                      const FactorUncertainty& fu, const std::vector<Policy>& candidates,
                                      const RobustSolveReport& report) {
    const double eps = report.epsilon > 0.0 ? report.epsilon : 1e-6;
    const Vec v_star = evaluate_worst_case(inst, fm, fu, report.policy, eps).value;
    MaxPrincipleCheck out;
    out.min_slack = std::numeric_limits<double>::infinity();
    for (const auto& pi : candidates) {
        const Vec v = evaluate_worst_case(inst, fm, fu, pi, eps).value;
        out.min_slack = std::min(out.min_slack, (v_star - v).minCoeff());
    }
    if (candidates.empty()) out.min_slack = 0.0;
    out.holds = out.min_slack >= -10.0 * eps;
    return out;
}

} // namespace rmdp
