#include "rmdp/mdp.hpp"

#include <cmath>
#include <string>

namespace rmdp {

bool is_distribution(const Vec& p, double tol) {
    return p.size() > 0 && p.allFinite() && p.minCoeff() >= -tol && std::abs(p.sum() - 1.0) <= tol;
}

TransitionKernel::TransitionKernel(std::vector<Mat> slices) : slices_(std::move(slices)) {
    const long S = states();
    if (S == 0) throw EmptyInput("kernel: no states");
    const long A = actions();
    if (A == 0) throw EmptyInput("kernel: no actions");
    for (long s = 0; s < S; ++s) {
        if (slices_[s].rows() != A || slices_[s].cols() != S)
            throw DimensionMismatch("kernel: slice " + std::to_string(s) + " is not A x S");
        for (long a = 0; a < A; ++a) {
            if (!is_distribution(slices_[s].row(a).transpose(), 1e-10) ||
                slices_[s].row(a).minCoeff() < 0.0)
                throw NotStochastic("kernel: row (" + std::to_string(s) + "," + std::to_string(a) +
                                    ") is not a probability vector");
        }
    }
}

MdpInstance::MdpInstance(Mat rewards, double discount, Vec p0)
    : rewards_(std::move(rewards)), discount_(discount), p0_(std::move(p0)) {
    if (rewards_.rows() < 1 || rewards_.cols() < 1) throw EmptyInput("rewards: need S >= 1 and A >= 1");
    if (!rewards_.allFinite() || rewards_.minCoeff() < 0.0)
        throw ValidationError("rewards: entries must be finite and non-negative");
    if (!(discount_ > 0.0 && discount_ < 1.0)) throw InvalidDiscount("discount: must lie in (0, 1)");
    if (p0_.size() != rewards_.rows()) throw DimensionMismatch("p0: length differs from state count");
    if (!p0_.allFinite() || p0_.minCoeff() < 0.0 || std::abs(p0_.sum() - 1.0) > 1e-12)
        throw NotStochastic("p0: must be non-negative and sum to 1");
}

Policy::Policy(Mat pi) : pi_(std::move(pi)) {
    if (pi_.rows() < 1 || pi_.cols() < 1) throw EmptyInput("policy: empty matrix");
    for (long s = 0; s < pi_.rows(); ++s) {
        if (pi_.row(s).minCoeff() < 0.0 || std::abs(pi_.row(s).sum() - 1.0) > 1e-12)
            throw NotStochastic("policy: row " + std::to_string(s) + " is not a distribution");
    }
}

Policy Policy::deterministic(const std::vector<long>& actions, long n_actions) {
    Mat pi = Mat::Zero(static_cast<long>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw IndexOutOfRange("policy: action index out of range");
        pi(static_cast<long>(s), actions[s]) = 1.0;
    }
    return Policy(std::move(pi));
}

Policy Policy::uniform(long n_states, long n_actions) {
    return Policy(Mat::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
}

bool Policy::is_deterministic() const {
    for (long s = 0; s < pi_.rows(); ++s) {
        long ones = 0;
        for (long a = 0; a < pi_.cols(); ++a) {
            if (pi_(s, a) == 1.0)
                ++ones;
            else if (pi_(s, a) != 0.0)
                return false;
        }
        if (ones != 1) return false;
    }
    return true;
}

std::vector<long> Policy::actions_taken() const {
    if (!is_deterministic()) throw ValidationError("policy: not deterministic");
    std::vector<long> out(pi_.rows());
    for (long s = 0; s < pi_.rows(); ++s) pi_.row(s).maxCoeff(&out[s]);
    return out;
}

void check_dimensions(const MdpInstance& inst, const TransitionKernel& P) {
    if (P.states() != inst.states() || P.actions() != inst.actions())
        throw DimensionMismatch("kernel dimensions do not match the instance");
}

void check_dimensions(const MdpInstance& inst, const Policy& pi) {
    if (pi.states() != inst.states() || pi.actions() != inst.actions())
        throw DimensionMismatch("policy dimensions do not match the instance");
}

Mat induced_chain(const Policy& pi, const TransitionKernel& P) {
    if (pi.states() != P.states() || pi.actions() != P.actions())
        throw DimensionMismatch("induced_chain: policy and kernel dimensions differ");
    const long S = P.states();
    Mat L(S, S);
    for (long s = 0; s < S; ++s) L.row(s) = pi.matrix().row(s) * P.slice(s);
    return L;
}

Vec policy_rewards(const MdpInstance& inst, const Policy& pi) {
    check_dimensions(inst, pi);
    return pi.matrix().cwiseProduct(inst.rewards()).rowwise().sum();
}

Vec policy_value(const MdpInstance& inst, const Policy& pi, const TransitionKernel& P) {
    check_dimensions(inst, P);
    check_dimensions(inst, pi);
    const double lambda = inst.discount();
    if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidDiscount("discount must lie in (0, 1)");
    const long S = inst.states();
    const Mat M = Mat::Identity(S, S) - lambda * induced_chain(pi, P);
    return solve_linear_system(M, policy_rewards(inst, pi));
}

double expected_reward(const MdpInstance& inst, const Policy& pi, const TransitionKernel& P) {
    return inst.p0().dot(policy_value(inst, pi, P));
}

Vec bellman_optimality(const MdpInstance& inst, const TransitionKernel& P, const Vec& v,
                       std::vector<long>* actions) {
    check_dimensions(inst, P);
    const long S = inst.states();
    const long A = inst.actions();
    if (v.size() != S) throw DimensionMismatch("bellman_optimality: value vector length");
    Vec out(S);
    if (actions) actions->assign(S, 0);
    for (long s = 0; s < S; ++s) {
        const Vec q = inst.rewards().row(s).transpose() + inst.discount() * (P.slice(s) * v);
        long best = 0;
        for (long a = 1; a < A; ++a)
            if (q(a) > q(best)) best = a;
        out(s) = q(best);
        if (actions) (*actions)[s] = best;
    }
    return out;
}

NominalSolution nominal_value_iteration(const MdpInstance& inst, const TransitionKernel& P,
                                        double eps) {
    if (!(eps > 0.0)) throw ValidationError("nominal_value_iteration: eps must be positive");
    check_dimensions(inst, P);
    const double threshold = stopping_threshold(eps, inst.discount());

    NominalSolution out;
    Vec v = Vec::Zero(inst.states());
    std::vector<long> actions;
    for (long k = 1;; ++k) {
        Vec next = bellman_optimality(inst, P, v);
        const double change = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (change < threshold) {
            out.iterations = k;
            break;
        }
        if (k > 10'000'000) throw NotConverged("nominal_value_iteration: iteration limit");
    }
    bellman_optimality(inst, P, v, &actions);
    out.policy = Policy::deterministic(actions, inst.actions());
    out.value = std::move(v);
    return out;
}

} // namespace rmdp
