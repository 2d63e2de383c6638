#pragma once

#include "rmdp/errors.hpp"

#include <Eigen/Dense>

namespace rmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Primal feasibility tolerance used by the LP solver and membership tests.
inline constexpr double feasibility_tol = 1e-9;
/// Reduced-cost tolerance used by the LP solver.
inline constexpr double optimality_tol = 1e-9;

/**
 * Polyhedron { x | A x >= b, x >= 0 } (or x free when `nonneg` is false).
 *
 * When a polytope is used as a factor set over S next states, the first S
 * columns are the factor w itself and any further columns are auxiliary
 * variables with zero cost.
 */
struct Polytope {
    Mat A;
    Vec b;
    bool nonneg = true;

    long rows() const { return A.rows(); }
    long cols() const { return A.cols(); }
};

/**
 * Budget-of-uncertainty set around a nominal distribution:
 *   { w | w >= 0, sum(w) = 1, |w - w_nom|_inf <= tau, |w - w_nom|_1 <= gamma }.
 * tau = 0 (or gamma = 0) pins the set to the singleton {w_nom}.
 */
struct BudgetSet {
    Vec w_nom;
    double tau = 0.0;
    double gamma = 0.0;
};

struct LpResult {
    Vec argmin;
    double value = 0.0;
};

/// Throws ValidationError if the budget set breaks its invariants.
void validate(const BudgetSet& set);

bool contains(const BudgetSet& set, const Vec& w, double tol = feasibility_tol);
bool contains(const Polytope& set, const Vec& x, double tol = feasibility_tol);

/// Largest constraint violation of x (0 when feasible).
double max_violation(const Polytope& set, const Vec& x);

/**
 * Solves M x = rhs by LU factorization with partial pivoting.
 * Throws SingularMatrix when a pivot falls below 1e-12 in magnitude.
 */
Vec solve_linear_system(const Mat& M, const Vec& rhs);

/**
 * Minimizes c'x over a polytope with a dense two-phase primal simplex using
 * Bland's rule. The returned point is a basic (vertex) solution.
 *
 * Throws Infeasible or Unbounded.
 */
LpResult lp_minimize(const Vec& c, const Polytope& set);

/**
 * Minimizes c'w over a budget set. Moves probability mass from the most
 * expensive coordinates to the cheapest ones, subject to the box, the l1
 * budget and nonnegativity. Agrees with lp_minimize on to_polytope(set).
 */
LpResult budget_min_oracle(const Vec& c, const BudgetSet& set);

/**
 * Lifted polytope for a budget set over S coordinates. Variables are
 * x = (w_0..w_{S-1}, t_0..t_{S-1}) with t_j >= |w_j - w_nom_j|. Row layout:
 *   0        :  sum(w) >= 1
 *   1        : -sum(w) >= -1
 *   2+j      :  t_j - w_j >= -w_nom_j          (j < S)
 *   2+S+j    :  t_j + w_j >=  w_nom_j          (j < S)
 *   2+2S+j   : -t_j       >= -tau              (j < S)
 *   2+3S     : -sum(t)    >= -gamma
 */
Polytope to_polytope(const BudgetSet& set);

/// The probability simplex over n coordinates in polytope form (two rows, n columns).
Polytope simplex_polytope(long n);

/// Euclidean projection onto the probability simplex. Throws EmptyInput for n = 0.
Vec project_simplex(const Vec& x);

/**
 * Euclidean projection onto { p | sum(p) = 1, lo <= p <= hi }.
 * Requires sum(lo) <= 1 <= sum(hi) and lo <= hi.
 */
Vec project_capped_simplex(const Vec& y, const Vec& lo, const Vec& hi);

/// Sum with pairwise (cascade) summation; deterministic for a fixed input order.
double pairwise_sum(const double* data, long n);

} // namespace rmdp
