#include "rmdp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace rmdp {

namespace {

constexpr double pivot_tol = 1e-11;
constexpr long max_simplex_iterations = 200000;

/**
 * Dense simplex tableau for  min c'x  s.t.  E x = d, x >= 0  with d >= 0.
 * Columns [0, n_struct) are structural, the last m columns are artificials.
 */
class Tableau {
public:
    Tableau(const Mat& E, const Vec& d) : m_(E.rows()), n_struct_(E.cols()) {
        const long ncols = n_struct_ + m_;
        T_ = Mat::Zero(m_, ncols + 1);
        T_.leftCols(n_struct_) = E;
        T_.block(0, n_struct_, m_, m_).setIdentity();
        T_.col(ncols) = d;
        basis_.resize(m_);
        std::iota(basis_.begin(), basis_.end(), n_struct_);
        allowed_.assign(ncols, true);
    }

    long rows() const { return static_cast<long>(basis_.size()); }
    long ncols() const { return T_.cols() - 1; }

    /// Runs simplex iterations for cost vector c (length ncols()).
    /// Returns false when the problem is unbounded in the entering direction.
    bool optimize(const Vec& c) {
        for (long iter = 0; iter < max_simplex_iterations; ++iter) {
            const long entering = choose_entering(c);
            if (entering < 0) return true;
            const long leaving = choose_leaving(entering);
            if (leaving < 0) return false;
            pivot(leaving, entering);
        }
        throw NotConverged("simplex: iteration limit reached");
    }

    double objective(const Vec& c) const {
        double z = 0.0;
        for (long i = 0; i < rows(); ++i) z += c(basis_[i]) * T_(i, ncols());
        return z;
    }

    /// Pivots basic artificials out of the basis; drops redundant rows.
    void expel_artificials() {
        for (long i = 0; i < rows();) {
            if (basis_[i] < n_struct_) {
                ++i;
                continue;
            }
            long col = -1;
            for (long j = 0; j < n_struct_; ++j) {
                if (std::abs(T_(i, j)) > pivot_tol) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) {
                pivot(i, col);
                ++i;
            } else {
                remove_row(i);
            }
        }
        for (long j = n_struct_; j < ncols(); ++j) allowed_[j] = false;
    }

    Vec structural_solution() const {
        Vec x = Vec::Zero(n_struct_);
        for (long i = 0; i < rows(); ++i) {
            if (basis_[i] < n_struct_) x(basis_[i]) = std::max(0.0, T_(i, ncols()));
        }
        return x;
    }

private:
    long choose_entering(const Vec& c) const {
        // Bland: lowest-index column with a negative reduced cost.
        for (long j = 0; j < ncols(); ++j) {
            if (!allowed_[j] || is_basic(j)) continue;
            double reduced = c(j);
            for (long i = 0; i < rows(); ++i) reduced -= c(basis_[i]) * T_(i, j);
            if (reduced < -optimality_tol) return j;
        }
        return -1;
    }

    long choose_leaving(long entering) const {
        long best = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (long i = 0; i < rows(); ++i) {
            const double a = T_(i, entering);
            if (a <= pivot_tol) continue;
            const double ratio = std::max(0.0, T_(i, ncols())) / a;
            if (best < 0) {
                best = i;
                best_ratio = ratio;
                continue;
            }
            const double slack = 1e-12 * std::max(1.0, best_ratio);
            if (ratio < best_ratio - slack) {
                best = i;
                best_ratio = ratio;
            } else if (ratio <= best_ratio + slack && basis_[i] < basis_[best]) {
                best = i;
            }
        }
        return best;
    }

    bool is_basic(long j) const {
        return std::find(basis_.begin(), basis_.end(), j) != basis_.end();
    }

    void pivot(long r, long c) {
        T_.row(r) /= T_(r, c);
        for (long i = 0; i < rows(); ++i) {
            if (i == r) continue;
            const double f = T_(i, c);
            if (f != 0.0) T_.row(i) -= f * T_.row(r);
        }
        basis_[r] = c;
    }

    void remove_row(long r) {
        const long last = rows() - 1;
        if (r != last) {
            T_.row(r) = T_.row(last);
            basis_[r] = basis_[last];
        }
        T_.conservativeResize(last, Eigen::NoChange);
        basis_.pop_back();
    }

    long m_;
    long n_struct_;
    Mat T_;
    std::vector<long> basis_;
    std::vector<bool> allowed_;
};

} // namespace

void validate(const BudgetSet& set) {
    if (set.w_nom.size() == 0) throw EmptyInput("budget set: empty nominal vector");
    if ((set.w_nom.array() < 0.0).any())
        throw NotStochastic("budget set: w_nom has negative entries");
    if (std::abs(set.w_nom.sum() - 1.0) > 1e-12)
        throw NotStochastic("budget set: w_nom does not sum to 1");
    if (!(set.tau >= 0.0) || set.tau > 1.0)
        throw ValidationError("budget set: tau must lie in [0, 1]");
    if (!(set.gamma >= 0.0)) throw ValidationError("budget set: gamma must be >= 0");
}

bool contains(const BudgetSet& set, const Vec& w, double tol) {
    if (w.size() != set.w_nom.size()) return false;
    if ((w.array() < -tol).any()) return false;
    if (std::abs(w.sum() - 1.0) > tol) return false;
    const Vec delta = w - set.w_nom;
    if (delta.lpNorm<Eigen::Infinity>() > set.tau + tol) return false;
    return delta.lpNorm<1>() <= set.gamma + tol;
}

double max_violation(const Polytope& set, const Vec& x) {
    if (x.size() != set.cols()) throw DimensionMismatch("polytope: point has wrong dimension");
    double worst = 0.0;
    if (set.rows() > 0) worst = std::max(worst, (set.b - set.A * x).maxCoeff());
    if (set.nonneg && x.size() > 0) worst = std::max(worst, -x.minCoeff());
    return worst;
}

bool contains(const Polytope& set, const Vec& x, double tol) {
    return x.size() == set.cols() && max_violation(set, x) <= tol;
}

Vec solve_linear_system(const Mat& M, const Vec& rhs) {
    const long n = M.rows();
    if (M.cols() != n) throw DimensionMismatch("solve_linear_system: matrix is not square");
    if (rhs.size() != n) throw DimensionMismatch("solve_linear_system: rhs length mismatch");

    Mat lu = M;
    Vec x = rhs;
    for (long k = 0; k < n; ++k) {
        long p = k;
        for (long i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
        if (std::abs(lu(p, k)) < 1e-12)
            throw SingularMatrix("solve_linear_system: pivot below 1e-12 at column " +
                                 std::to_string(k));
        if (p != k) {
            lu.row(p).swap(lu.row(k));
            std::swap(x(p), x(k));
        }
        for (long i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            if (f == 0.0) continue;
            lu.row(i).tail(n - k - 1) -= f * lu.row(k).tail(n - k - 1);
            x(i) -= f * x(k);
        }
    }
    for (long k = n - 1; k >= 0; --k) {
        double s = x(k);
        for (long j = k + 1; j < n; ++j) s -= lu(k, j) * x(j);
        x(k) = s / lu(k, k);
    }
    return x;
}

LpResult lp_minimize(const Vec& c, const Polytope& set) {
    const long m = set.rows();
    const long n = set.cols();
    if (n == 0) throw EmptyInput("lp_minimize: no variables");
    if (c.size() != n) throw DimensionMismatch("lp_minimize: cost vector length mismatch");
    if (set.b.size() != m) throw DimensionMismatch("lp_minimize: rhs length mismatch");

    // Free variables are split as x = x+ - x-.
    const long nx = set.nonneg ? n : 2 * n;
    Mat Ax(m, nx);
    Vec cx(nx);
    if (set.nonneg) {
        Ax = set.A;
        cx = c;
    } else {
        Ax << set.A, -set.A;
        cx << c, -c;
    }

    // A x - s = b, rows flipped so the right-hand side is nonnegative.
    const long n_struct = nx + m;
    Mat E(m, n_struct);
    Vec d(m);
    E.leftCols(nx) = Ax;
    E.rightCols(m) = -Mat::Identity(m, m);
    d = set.b;
    for (long i = 0; i < m; ++i) {
        if (d(i) < 0.0) {
            E.row(i) *= -1.0;
            d(i) = -d(i);
        }
    }

    Tableau tab(E, d);
    Vec phase1 = Vec::Zero(tab.ncols());
    phase1.tail(m).setOnes();
    tab.optimize(phase1);
    if (tab.objective(phase1) > feasibility_tol * std::max(1.0, d.lpNorm<Eigen::Infinity>()))
        throw Infeasible("lp_minimize: constraints are infeasible");
    tab.expel_artificials();

    Vec phase2 = Vec::Zero(tab.ncols());
    phase2.head(nx) = cx;
    if (!tab.optimize(phase2)) throw Unbounded("lp_minimize: objective is unbounded below");

    const Vec xs = tab.structural_solution();
    LpResult out;
    out.argmin = set.nonneg ? Vec(xs.head(n)) : Vec(xs.head(n) - xs.segment(n, n));
    out.value = c.dot(out.argmin);
    return out;
}

LpResult budget_min_oracle(const Vec& c, const BudgetSet& set) {
    validate(set);
    const long n = set.w_nom.size();
    if (c.size() != n) throw DimensionMismatch("budget_min_oracle: cost vector length mismatch");

    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return c(a) < c(b); });

    Vec w = set.w_nom;
    Vec in_room(n), out_room(n);
    for (long j = 0; j < n; ++j) {
        in_room(j) = set.tau;
        out_room(j) = std::min(set.tau, set.w_nom(j));
    }
    // Each unit moved costs two units of l1 budget.
    double movable = 0.5 * set.gamma;
    long lo = 0, hi = n - 1;
    while (lo < hi && movable > 0.0) {
        const long to = order[lo];
        const long from = order[hi];
        if (!(c(to) < c(from))) break;
        const double amount = std::min({in_room(to), out_room(from), movable});
        if (amount > 0.0) {
            w(to) += amount;
            w(from) -= amount;
            in_room(to) -= amount;
            out_room(from) -= amount;
            movable -= amount;
        }
        if (in_room(to) <= 0.0) ++lo;
        if (out_room(from) <= 0.0) --hi;
    }
    w = w.cwiseMax(0.0);

    LpResult out;
    out.argmin = std::move(w);
    out.value = c.dot(out.argmin);
    return out;
}

Polytope to_polytope(const BudgetSet& set) {
    validate(set);
    const long S = set.w_nom.size();
    Polytope p;
    p.A = Mat::Zero(3 * S + 3, 2 * S);
    p.b = Vec::Zero(3 * S + 3);
    p.A.block(0, 0, 1, S).setOnes();
    p.b(0) = 1.0;
    p.A.block(1, 0, 1, S).setConstant(-1.0);
    p.b(1) = -1.0;
    for (long j = 0; j < S; ++j) {
        p.A(2 + j, S + j) = 1.0;
        p.A(2 + j, j) = -1.0;
        p.b(2 + j) = -set.w_nom(j);

        p.A(2 + S + j, S + j) = 1.0;
        p.A(2 + S + j, j) = 1.0;
        p.b(2 + S + j) = set.w_nom(j);

        p.A(2 + 2 * S + j, S + j) = -1.0;
        p.b(2 + 2 * S + j) = -set.tau;
    }
    p.A.block(2 + 3 * S, S, 1, S).setConstant(-1.0);
    p.b(2 + 3 * S) = -set.gamma;
    return p;
}

Polytope simplex_polytope(long n) {
    Polytope p;
    p.A = Mat::Ones(2, n);
    p.A.row(1) *= -1.0;
    p.b = Vec(2);
    p.b << 1.0, -1.0;
    return p;
}

Vec project_simplex(const Vec& x) {
    const long n = x.size();
    if (n == 0) throw EmptyInput("project_simplex: empty input");
    if (x.minCoeff() >= 0.0 && std::abs(x.sum() - 1.0) <= 1e-12) return x;

    std::vector<double> u(x.data(), x.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (long k = 0; k < n; ++k) {
        cumulative += u[k];
        const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    Vec p = (x.array() - theta).cwiseMax(0.0);
    // Fold the rounding residue into the largest entry.
    Eigen::Index top;
    p.maxCoeff(&top);
    p(top) += 1.0 - p.sum();
    return p;
}

Vec project_capped_simplex(const Vec& y, const Vec& lo, const Vec& hi) {
    const long n = y.size();
    if (n == 0) throw EmptyInput("project_capped_simplex: empty input");
    if (lo.size() != n || hi.size() != n)
        throw DimensionMismatch("project_capped_simplex: bound length mismatch");
    if ((lo.array() > hi.array()).any() || lo.sum() > 1.0 + 1e-12 || hi.sum() < 1.0 - 1e-12)
        throw Infeasible("project_capped_simplex: bounds exclude the simplex");

    auto clipped = [&](double theta) { return (y.array() - theta).max(lo.array()).min(hi.array()).matrix().eval(); };
    double left = (y - hi).minCoeff();  // sum >= 1 here
    double right = (y - lo).maxCoeff(); // sum <= 1 here
    for (int iter = 0; iter < 200 && right - left > 0.0; ++iter) {
        const double mid = 0.5 * (left + right);
        if (mid <= left || mid >= right) break;
        if (clipped(mid).sum() >= 1.0)
            left = mid;
        else
            right = mid;
    }
    Vec p = clipped(left);
    // Spread the residue over coordinates with room, largest room first.
    double residue = 1.0 - p.sum();
    for (long j = 0; j < n && residue != 0.0; ++j) {
        const double room = residue > 0.0 ? hi(j) - p(j) : lo(j) - p(j);
        const double step = residue > 0.0 ? std::min(room, residue) : std::max(room, residue);
        p(j) += step;
        residue -= step;
    }
    return p;
}

double pairwise_sum(const double* data, long n) {
    if (n <= 8) {
        double s = 0.0;
        for (long i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const long half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

} // namespace rmdp
