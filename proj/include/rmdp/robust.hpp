#pragma once

#include "rmdp/factor_model.hpp"
#include "rmdp/mdp.hpp"

#include <vector>

namespace rmdp {

/// Result of worst-case policy evaluation over an r-rectangular set.
struct WorstCaseEvaluation {
    double z = 0.0;   ///< p0'(r_pi + lambda T_pi beta)
    Mat W_star;       ///< per-factor minimizers at the final iterate (S x r)
    Vec beta;         ///< adversary value, one entry per factor
    Vec value;        ///< worst-case value vector r_pi + lambda T_pi beta
    long iterations = 0;
};

/**
 * phi(beta)_i = min over W^i of w'(r_pi + lambda T_pi beta). `argmins`, if
 * given, receives the minimizing factor matrix.
 */
Vec adversarial_bellman_phi(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                            const Policy& pi, const Vec& beta, Mat* argmins = nullptr);

/// Iterates phi from beta = 0 until successive iterates differ by less than
/// eps (1 - lambda) / (2 lambda).
WorstCaseEvaluation evaluate_worst_case(const MdpInstance& inst, const FactorModel& fm,
                                        const FactorUncertainty& fu, const Policy& pi, double eps = 1e-6);

/// Dual multipliers alpha_i >= 0 (one block per factor polytope).
struct DualCertificate {
    std::vector<Vec> alphas;
    double objective = 0.0;
};

struct LpEvaluation {
    double z = 0.0;
    DualCertificate certificate;
};

/**
 * Worst-case evaluation as a single LP over the duals of the per-factor
 * polytopes:
 *   max p0'(r_pi + lambda T_pi b)   with b_i = b_i' alpha_i
 *   s.t. A_l' alpha_l <= r_pi + lambda T_pi b on the factor columns,
 *        A_l' alpha_l <= 0 on auxiliary columns, alpha >= 0.
 */
LpEvaluation evaluate_worst_case_lp(const MdpInstance& inst, const FactorModel& fm,
                                    const std::vector<Polytope>& sets, const Policy& pi);

/// Largest violation of the dual constraints (and of alpha >= 0) by a certificate.
double certificate_violation(const MdpInstance& inst, const FactorModel& fm,
                             const std::vector<Polytope>& sets, const Policy& pi,
                             const DualCertificate& cert);

/// One application of a robust Bellman operator.
struct OperatorStep {
    Vec next;                  ///< F1: next v (length S); F2: next beta (length r)
    std::vector<long> actions; ///< greedy action per state, lowest index on ties
    Mat W;                     ///< per-factor minimizers used in this step
    Vec inner;                 ///< F1: beta_i = min w'v; F2: V_s = max_a (...)
};

/// F1(v)_s = max_a r_sa + lambda sum_i u_s(i,a) min_{w in W^i} w'v.
OperatorStep robust_bellman_F1(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                               const Vec& v);

/// F2(beta)_i = min_{w in W^i} w'V with V_s = max_a r_sa + lambda sum_i u_s(i,a) beta_i.
OperatorStep robust_bellman_F2(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                               const Vec& beta);

enum class Variant { F1, F2 };

struct RobustSolveReport {
    Policy policy; ///< deterministic
    Mat W_star;
    Vec v;
    Vec beta;
    double objective = 0.0; ///< p0'v
    long iterations = 0;
    double residual = 0.0;  ///< sup-norm change at the last iteration
    double epsilon = 0.0;
    Variant variant = Variant::F1;
};

/**
 * Robust value iteration from zero with the stopping threshold
 * eps (1 - lambda) / (2 lambda). Discounts at or above 1 - 1e-6 are rejected.
 *
 * F1 reports v = F1(v^k), beta and W* from the inner minimization at v^k.
 * F2 reports beta = beta^k, v = V computed from beta^k and W* minimizing at that V.
 */
RobustSolveReport improve_policy(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                                 double eps = 1e-6, Variant variant = Variant::F1);

struct BruteForceResult {
    Policy policy;
    Mat W_star;
    double z = 0.0;
};

/**
 * Exhaustive max over deterministic policies of the min over vertex
 * combinations of expected_reward. Policies are visited in lexicographic
 * order of their action vectors and vertex combinations in lexicographic
 * order of vertex indices; the first optimum found is kept.
 * Throws TooLarge when A^S times the number of combinations exceeds 1e6.
 */
BruteForceResult brute_force_oracle(const MdpInstance& inst, const FactorModel& fm,
                                    const std::vector<std::vector<Vec>>& vertices);

struct DualityResiduals {
    double gap = 0.0;              ///< |p0'v - z(pi*)|
    double bellman_residual = 0.0; ///< optimality of pi* in the MDP at kernel W*
    double eval_residual = 0.0;    ///< |W*'v - beta|_inf
};

/**
 * Checks a report against the saddle-point conditions. The Bellman residual
 * is taken at the exact value of pi* under the kernel assembled from W*, so a
 * suboptimal policy in the report shows up as a positive residual.
 */
DualityResiduals verify_duality(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                                const RobustSolveReport& report, double eps = 1e-6);

/// Inner problem of the s-rectangular baseline at state s for fixed action weights.
double s_rect_inner_min(const MdpInstance& inst, const SRectUncertainty& sr, long s, const Vec& pi_s,
                        const Vec& v);

/**
 * s-rectangular robust Bellman update. Each state solves one LP jointly over
 * the action weights and the duals of the inner minimization. `policy`, if
 * given, receives the (possibly randomized) maximizing action weights.
 */
Vec s_rect_bellman(const MdpInstance& inst, const SRectUncertainty& sr, const Vec& v, Mat* policy = nullptr);

struct SRectSolution {
    Policy policy;
    double z = 0.0;
    Vec v;
    long iterations = 0;
};

SRectSolution s_rect_robust_vi(const MdpInstance& inst, const SRectUncertainty& sr, double eps = 1e-6);

/// Worst-case value vector of a fixed policy over the s-rectangular set.
Vec s_rect_evaluate(const MdpInstance& inst, const SRectUncertainty& sr, const Policy& pi, double eps = 1e-6);

/// W rounded to a 1e-8 grid; identifies the vertex chosen for every factor.
Mat vertex_signature(const Mat& W);

struct BlackwellScan {
    std::vector<RobustSolveReport> reports; ///< one per grid value
    Policy stable_policy;
    Mat stable_signature;
    long threshold_index = 0; ///< earliest index after which (policy, signature) never changes
};

BlackwellScan blackwell_scan(const MdpInstance& inst, const FactorModel& fm, const FactorUncertainty& fu,
                             const std::vector<double>& lambdas, double eps = 1e-6,
                             Variant variant = Variant::F1);

struct MaxPrincipleCheck {
    bool holds = true;
    double min_slack = 0.0; ///< min over candidates and states of v*_s - v^pi_s
};

/// Compares the worst-case value vector of report.policy with those of the
/// candidates; holds when every slack is at least -10 eps.
MaxPrincipleCheck check_max_principle(const MdpInstance& inst, const FactorModel& fm,
                                      const FactorUncertainty& fu, const std::vector<Policy>& candidates,
                                      const RobustSolveReport& report);

} // namespace rmdp
