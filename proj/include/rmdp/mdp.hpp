#pragma once

#include "rmdp/numerics.hpp"

#include <vector>

namespace rmdp {

/**
 * Transition probabilities P[s][a][s']. Stored as one A x S matrix per
 * origin state, so slice(s).row(a) is the distribution P_sa.
 */
class TransitionKernel {
public:
    TransitionKernel() = default;
    /// Validates nonnegativity and that every (s,a) row sums to 1 within 1e-10.
    explicit TransitionKernel(std::vector<Mat> slices);

    long states() const { return static_cast<long>(slices_.size()); }
    long actions() const { return slices_.empty() ? 0 : slices_.front().rows(); }

    const Mat& slice(long s) const { return slices_.at(s); }
    const std::vector<Mat>& slices() const { return slices_; }
    double operator()(long s, long a, long t) const { return slices_[s](a, t); }
    Vec row(long s, long a) const { return slices_[s].row(a).transpose(); }

private:
    std::vector<Mat> slices_;
};

/// Nominal decision problem: rewards r[s][a] >= 0, discount in (0,1), initial distribution p0.
class MdpInstance {
public:
    MdpInstance(Mat rewards, double discount, Vec p0);

    long states() const { return rewards_.rows(); }
    long actions() const { return rewards_.cols(); }
    const Mat& rewards() const { return rewards_; }
    double discount() const { return discount_; }
    const Vec& p0() const { return p0_; }
    double max_reward() const { return rewards_.maxCoeff(); }

    MdpInstance with_discount(double discount) const { return {rewards_, discount, p0_}; }
    MdpInstance with_rewards(Mat rewards) const { return {std::move(rewards), discount_, p0_}; }

private:
    Mat rewards_;
    double discount_;
    Vec p0_;
};

/// Stationary Markovian policy; row s is the action distribution in state s.
class Policy {
public:
    Policy() = default;
    explicit Policy(Mat pi);

    static Policy deterministic(const std::vector<long>& actions, long n_actions);
    static Policy uniform(long n_states, long n_actions);

    long states() const { return pi_.rows(); }
    long actions() const { return pi_.cols(); }
    const Mat& matrix() const { return pi_; }
    double operator()(long s, long a) const { return pi_(s, a); }

    bool is_deterministic() const;
    /// Chosen action per state; throws ValidationError for randomized policies.
    std::vector<long> actions_taken() const;

    bool operator==(const Policy& other) const { return pi_ == other.pi_; }

private:
    Mat pi_;
};

/// Checks that a probability vector is nonnegative and sums to 1 within tol.
bool is_distribution(const Vec& p, double tol);

/// L[s][s'] = sum_a pi[s][a] P[s][a][s'].
Mat induced_chain(const Policy& pi, const TransitionKernel& P);

/// r_pi[s] = sum_a pi[s][a] r[s][a].
Vec policy_rewards(const MdpInstance& inst, const Policy& pi);

/// Value vector (I - lambda L)^{-1} r_pi of a policy under a fixed kernel.
Vec policy_value(const MdpInstance& inst, const Policy& pi, const TransitionKernel& P);

/// Expected discounted reward p0' (I - lambda L)^{-1} r_pi.
double expected_reward(const MdpInstance& inst, const Policy& pi, const TransitionKernel& P);

/// One Bellman optimality update at kernel P. `actions`, if given, receives the
/// greedy action per state (lowest index wins ties).
Vec bellman_optimality(const MdpInstance& inst, const TransitionKernel& P, const Vec& v,
                       std::vector<long>* actions = nullptr);

struct NominalSolution {
    Policy policy;
    Vec value;
    long iterations = 0;
};

/**
 * Value iteration from v = 0, stopped once successive iterates differ by less
 * than eps (1 - lambda) / (2 lambda) in the sup norm. The returned greedy
 * policy is deterministic.
 */
NominalSolution nominal_value_iteration(const MdpInstance& inst, const TransitionKernel& P,
                                        double eps = 1e-6);

/// Stopping threshold eps (1 - lambda) / (2 lambda) shared by all value iterations.
inline double stopping_threshold(double eps, double discount) {
    return eps * (1.0 - discount) / (2.0 * discount);
}

void check_dimensions(const MdpInstance& inst, const TransitionKernel& P);
void check_dimensions(const MdpInstance& inst, const Policy& pi);

} // namespace rmdp
