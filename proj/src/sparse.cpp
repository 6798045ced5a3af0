#include "driftlim/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace driftlim {

CsrMatrix CsrMatrix::fromTriplets(int n, std::vector<Triplet> entries) {
    if (n <= 0)
        throw InvalidArgumentError("matrix dimension must be positive");
    for (const auto& t : entries)
        if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
            throw InvalidArgumentError("triplet index out of range");

    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    CsrMatrix m;
    m.n = n;
    m.rowPtr.assign(n + 1, 0);
    m.col.reserve(entries.size());
    m.val.reserve(entries.size());
    std::size_t k = 0;
    for (int r = 0; r < n; ++r) {
        while (k < entries.size() && entries[k].row == r) {
            int c = entries[k].col;
            double v = entries[k].value;
            ++k;
            while (k < entries.size() && entries[k].row == r && entries[k].col == c) {
                v += entries[k].value;
                ++k;
            }
            m.col.push_back(c);
            m.val.push_back(v);
        }
        m.rowPtr[r + 1] = static_cast<int>(m.col.size());
    }
    return m;
}

double CsrMatrix::diag(int i) const {
    for (int k = rowPtr[i]; k < rowPtr[i + 1]; ++k)
        if (col[k] == i)
            return val[k];
    return 0.0;
}

double CsrMatrix::maxDiag() const {
    double d = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        d = std::max(d, diag(i));
    return d;
}

double CsrMatrix::minDiag() const {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        d = std::min(d, diag(i));
    return d;
}

bool CsrMatrix::isZMatrix(double tol) const {
    for (int i = 0; i < n; ++i)
        for (int k = rowPtr[i]; k < rowPtr[i + 1]; ++k)
            if (col[k] != i && val[k] > tol)
                return false;
    return true;
}

CsrMatrix CsrMatrix::transposed() const {
    std::vector<Triplet> tr;
    tr.reserve(val.size());
    for (int i = 0; i < n; ++i)
        for (int k = rowPtr[i]; k < rowPtr[i + 1]; ++k)
            tr.push_back({col[k], i, val[k]});
    return fromTriplets(n, std::move(tr));
}

void spmv(const CsrMatrix& M, std::span<const double> x, std::span<double> y) {
    if (static_cast<int>(x.size()) != M.n || static_cast<int>(y.size()) != M.n)
        throw InvalidArgumentError("spmv size mismatch");
    for (int i = 0; i < M.n; ++i) {
        double acc = 0.0;
        for (int k = M.rowPtr[i]; k < M.rowPtr[i + 1]; ++k)
            acc += M.val[k] * x[M.col[k]];
        y[i] = acc;
    }
}

std::vector<double> spmv(const CsrMatrix& M, std::span<const double> x) {
    std::vector<double> y(M.n);
    spmv(M, x, y);
    return y;
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace

namespace {

// Banded LU of a shifted operator matrix. Grid unknowns are numbered so
// neighbours stay close together, which keeps every coefficient within a
// narrow band of the diagonal; elimination keeps the pivots of an M-matrix
// positive, so the factorization needs no pivoting. Preconditions the
// refinement solves, where unpreconditioned iterations fall apart once
// advection dominates the operator.
class BandFactor {
public:
    bool factor(const CsrMatrix& A, std::size_t byteBudget) {
        ok_ = false;
        n_ = A.n;
        hw_ = 0;
        for (int i = 0; i < n_; ++i)
            for (int k = A.rowPtr[static_cast<std::size_t>(i)];
                 k < A.rowPtr[static_cast<std::size_t>(i) + 1]; ++k)
                hw_ = std::max(hw_, std::abs(A.col[static_cast<std::size_t>(k)] - i));
        const std::size_t width = 2 * static_cast<std::size_t>(hw_) + 1;
        if (width * static_cast<std::size_t>(n_) > byteBudget / sizeof(double))
            return false;
        a_.assign(width * static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i)
            for (int k = A.rowPtr[static_cast<std::size_t>(i)];
                 k < A.rowPtr[static_cast<std::size_t>(i) + 1]; ++k)
                at(i, A.col[static_cast<std::size_t>(k)]) = A.val[static_cast<std::size_t>(k)];
        for (int k = 0; k < n_; ++k) {
            const double piv = at(k, k);
            if (!std::isfinite(piv) || piv <= 0.0)
                return false;
            const int last = std::min(n_ - 1, k + hw_);
            for (int i = k + 1; i <= last; ++i) {
                double& lik = at(i, k);
                if (lik == 0.0)
                    continue;
                lik /= piv;
                const double l = lik;
                for (int j = k + 1; j <= last; ++j)
                    at(i, j) -= l * at(k, j);
            }
        }
        ok_ = true;
        return true;
    }

    void solve(const std::vector<double>& b, std::vector<double>& x) const {
        x = b;
        for (int i = 0; i < n_; ++i) {
            double acc = x[static_cast<std::size_t>(i)];
            for (int k = std::max(0, i - hw_); k < i; ++k)
                acc -= at(i, k) * x[static_cast<std::size_t>(k)];
            x[static_cast<std::size_t>(i)] = acc;
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double acc = x[static_cast<std::size_t>(i)];
            const int last = std::min(n_ - 1, i + hw_);
            for (int j = i + 1; j <= last; ++j)
                acc -= at(i, j) * x[static_cast<std::size_t>(j)];
            x[static_cast<std::size_t>(i)] = acc / at(i, i);
        }
    }

    explicit operator bool() const { return ok_; }

private:
    double& at(int i, int j) {
        return a_[static_cast<std::size_t>(i) * (2 * static_cast<std::size_t>(hw_) + 1) +
                  static_cast<std::size_t>(j - i + hw_)];
    }
    double at(int i, int j) const {
        return a_[static_cast<std::size_t>(i) * (2 * static_cast<std::size_t>(hw_) + 1) +
                  static_cast<std::size_t>(j - i + hw_)];
    }

    int n_ = 0;
    int hw_ = 0;
    std::vector<double> a_;
    bool ok_ = false;
};

template <class Prec>
BicgstabResult bicgstabCore(const CsrMatrix& A, std::span<const double> rhs, double tol,
                            int maxIterations, const std::vector<double>* initial,
                            Prec&& applyPrec) {
    const int n = A.n;

    BicgstabResult res;
    res.x = initial ? *initial : std::vector<double>(n, 0.0);

    double rhsNorm = norm2(rhs);
    if (rhsNorm == 0.0) {
        res.x.assign(n, 0.0);
        res.status = SolveStatus::Converged;
        return res;
    }

    std::vector<double> r(n), rhat(n), p(n), v(n, 0.0), s(n), t(n), phat(n), shat(n);
    spmv(A, res.x, r);
    for (int i = 0; i < n; ++i)
        r[i] = rhs[i] - r[i];
    rhat = r;

    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::fill(p.begin(), p.end(), 0.0);

    std::vector<double> best = res.x;
    double bestRes = norm2(r) / rhsNorm;

    int it = 0;
    for (; it < maxIterations; ++it) {
        double rhoNew = dot(rhat, r);
        if (std::abs(rhoNew) < 1e-300 * rhsNorm * rhsNorm) {
            res.status = SolveStatus::Breakdown;
            break;
        }
        double beta = (rhoNew / rho) * (alpha / omega);
        rho = rhoNew;
        for (int i = 0; i < n; ++i)
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        applyPrec(p, phat);
        spmv(A, phat, v);
        double denom = dot(rhat, v);
        if (std::abs(denom) < 1e-300) {
            res.status = SolveStatus::Breakdown;
            break;
        }
        alpha = rho / denom;
        for (int i = 0; i < n; ++i)
            s[i] = r[i] - alpha * v[i];
        double sNorm = norm2(s) / rhsNorm;
        if (sNorm <= tol) {
            for (int i = 0; i < n; ++i)
                res.x[i] += alpha * phat[i];
            ++it;
            res.status = SolveStatus::Converged;
            bestRes = sNorm;
            best = res.x;
            break;
        }
        applyPrec(s, shat);
        spmv(A, shat, t);
        double tt = dot(t, t);
        if (tt < 1e-300) {
            res.status = SolveStatus::Breakdown;
            break;
        }
        omega = dot(t, s) / tt;
        for (int i = 0; i < n; ++i)
            res.x[i] += alpha * phat[i] + omega * shat[i];
        for (int i = 0; i < n; ++i)
            r[i] = s[i] - omega * t[i];
        double rNorm = norm2(r) / rhsNorm;
        if (rNorm < bestRes) {
            bestRes = rNorm;
            best = res.x;
        }
        if (rNorm <= tol) {
            ++it;
            res.status = SolveStatus::Converged;
            break;
        }
        if (std::abs(omega) < 1e-300) {
            res.status = SolveStatus::Breakdown;
            break;
        }
    }

    if (res.status != SolveStatus::Converged) {
        if (it >= maxIterations)
            res.status = SolveStatus::MaxIterations;
        res.x = best;
    }
    // Report the true residual of the returned iterate, and make the status
    // agree with it: the recurrence residual can drift arbitrarily far from
    // b - Ax on ill-conditioned systems, in both directions.
    spmv(A, res.x, r);
    for (int i = 0; i < n; ++i)
        r[i] = rhs[i] - r[i];
    res.relativeResidual = norm2(r) / rhsNorm;
    res.iterations = it;
    if (res.relativeResidual <= tol)
        res.status = SolveStatus::Converged;
    else if (res.status == SolveStatus::Converged)
        res.status = it >= maxIterations ? SolveStatus::MaxIterations : SolveStatus::Breakdown;
    return res;
}

BicgstabResult bicgstabBanded(const CsrMatrix& A, std::span<const double> rhs, double tol,
                              int maxIterations, const BandFactor& f) {
    return bicgstabCore(A, rhs, tol, maxIterations, nullptr,
                        [&f](const std::vector<double>& in, std::vector<double>& out) {
                            f.solve(in, out);
                        });
}

}  // namespace

BicgstabResult bicgstab(const CsrMatrix& A, std::span<const double> rhs, double tol,
                        int maxIterations, const std::vector<double>* initial) {
    if (static_cast<int>(rhs.size()) != A.n)
        throw InvalidArgumentError("rhs size mismatch");
    if (tol < 1e-14)
        throw InvalidArgumentError("bicgstab tolerance below 1e-14");

    std::vector<double> prec(static_cast<std::size_t>(A.n));
    for (int i = 0; i < A.n; ++i) {
        double d = A.diag(i);
        prec[static_cast<std::size_t>(i)] = std::abs(d) > 1e-300 ? 1.0 / d : 1.0;
    }
    return bicgstabCore(A, rhs, tol, maxIterations, initial,
                        [&prec](const std::vector<double>& in, std::vector<double>& out) {
                            for (std::size_t i = 0; i < in.size(); ++i)
                                out[i] = prec[i] * in[i];
                        });
}

namespace {

struct RayleighStats {
    double lambdaMedian = 0.0;
    double lambdaLow = 0.0;  // min over entries of (Lv)_i / v_i
    double spread = 0.0;
    double residual = 0.0;
};

// Per-entry quotients (Lv)_i / v_i over entries with non-negligible v_i.
// Their median estimates the eigenvalue, their range bounds it
// (Collatz-Wielandt for the shifted nonnegative matrix), and the residual is
// measured in the max norm against the median.
RayleighStats rayleighStats(const std::vector<double>& Lv, const std::vector<double>& v) {
    double vmax = 0.0;
    for (double x : v)
        vmax = std::max(vmax, std::abs(x));
    double floor = vmax * 1e-13;
    static thread_local std::vector<double> q;
    q.clear();
    double qmin = std::numeric_limits<double>::infinity();
    double qmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > floor) {
            double qi = Lv[i] / v[i];
            q.push_back(qi);
            qmin = std::min(qmin, qi);
            qmax = std::max(qmax, qi);
        }
    }
    RayleighStats st;
    if (q.empty())
        return st;
    auto mid = q.begin() + q.size() / 2;
    std::nth_element(q.begin(), mid, q.end());
    st.lambdaMedian = *mid;
    st.lambdaLow = qmin;
    st.spread = qmax - qmin;
    double res = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        res = std::max(res, std::abs(Lv[i] - st.lambdaMedian * v[i]));
    st.residual = res / vmax;
    return st;
}

void normalizeMax(std::vector<double>& v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    if (m == 0.0)
        throw NumericalError("eigeniterate collapsed to zero");
    for (double& x : v)
        x /= m;
}

void checkNonnegative(const std::vector<double>& v, const char* phase) {
    for (double x : v)
        if (x < -1e-12)
            throw NumericalError(std::string("eigenvector positivity violated during ") + phase);
}

} // namespace

EigenResult principal_eigenpair(const CsrMatrix& L, const EigenOptions& opts) {
    if (L.n <= 0)
        throw InvalidArgumentError("empty matrix");
    if (!L.isZMatrix(1e-12))
        throw InvalidArgumentError("principal_eigenpair requires a Z-matrix");

    const int n = L.n;
    const double s = L.maxDiag() + 1.0;

    std::vector<double> v(n, 1.0), Lv(n), w(n);
    EigenResult out;
    out.method = EigenMethod::Power;

    auto applyL = [&](const std::vector<double>& x, std::vector<double>& y) { spmv(L, x, y); };

    RayleighStats st;
    double lambdaPrev = std::numeric_limits<double>::quiet_NaN();
    int sweeps = 0;
    double windowResidual = std::numeric_limits<double>::infinity();
    int windowStart = 0;
    bool inverseFailed = false;

    auto converged = [&](double lambda) {
        bool cauchy = std::isfinite(lambdaPrev) &&
                      std::abs(lambda - lambdaPrev) <= opts.tol * std::max(1.0, std::abs(lambda));
        return cauchy && st.residual <= opts.tol;
    };

    while (sweeps < opts.maxSweeps) {
        applyL(v, Lv);
        st = rayleighStats(Lv, v);
        if (converged(st.lambdaMedian))
            break;
        lambdaPrev = st.lambdaMedian;

        bool tryInverse = opts.refine && !inverseFailed && sweeps >= opts.refineAfter;
        if (!tryInverse && sweeps - windowStart >= 200) {
            if (st.residual > 0.1 * windowResidual) {
                if (opts.refine && !inverseFailed) {
                    tryInverse = true;
                } else {
                    throw NumericalError(
                        "power iteration stagnated: residual " + std::to_string(st.residual) +
                        " after " + std::to_string(sweeps) + " sweeps");
                }
            } else {
                windowStart = sweeps;
                windowResidual = st.residual;
            }
        }
        if (windowResidual == std::numeric_limits<double>::infinity())
            windowResidual = st.residual;

        if (tryInverse) {
            // Residual-correction refinement: solve (L - mu I) e = Lv - lambda v
            // and subtract the correction from v. With the residual vector as
            // right-hand side, solver error enters scaled by the current
            // residual, so a step either contracts it or is rejected at the
            // cost of one linear solve; the iterate is never contaminated.
            // The shift tracks the smallest quotient from below, which keeps
            // L - mu I an M-matrix while the contraction per step improves as
            // the quotients tighten. The distance kept below that bound is
            // the laddered knob: wider when a solve overwhelms the linear
            // solver, narrower when solves are comfortable but contraction
            // is poor.
            const double scale = std::max(1.0, std::abs(st.lambdaMedian));
            const double marginMin = std::max(opts.tol * scale, 1e-8 * s);
            double margin = std::max({0.1 * st.spread, marginMin, 1e-6 * s});
            double mu = std::min(st.lambdaMedian, st.lambdaLow) - margin;
            CsrMatrix M = L;
            auto setShift = [&](double next) {
                for (int i = 0; i < n; ++i)
                    for (int k = M.rowPtr[static_cast<std::size_t>(i)];
                         k < M.rowPtr[static_cast<std::size_t>(i) + 1]; ++k)
                        if (M.col[static_cast<std::size_t>(k)] == i)
                            M.val[static_cast<std::size_t>(k)] += mu - next;
                mu = next;
            };
            for (int i = 0; i < n; ++i)
                for (int k = M.rowPtr[static_cast<std::size_t>(i)];
                     k < M.rowPtr[static_cast<std::size_t>(i) + 1]; ++k)
                    if (M.col[static_cast<std::size_t>(k)] == i)
                        M.val[static_cast<std::size_t>(k)] -= mu;

            BandFactor lu;
            const std::size_t bandBudget = opts.bandBytes;
            lu.factor(M, bandBudget);
            auto recenter = [&](double target) {
                if (std::abs(target - mu) <= 0.3 * margin)
                    return;
                setShift(target);
                lu.factor(M, bandBudget);
            };

            const double entryResidual = st.residual;
            const double floorResidual =
                200.0 * std::numeric_limits<double>::epsilon() * s;
            std::vector<double> r(static_cast<std::size_t>(n));
            std::vector<double> Lw(static_cast<std::size_t>(n));
            int coldMoves = 0, stalls = 0;
            int innerSweeps = 0;
            for (int step = 0; step < 60 && sweeps + innerSweeps < opts.maxSweeps; ++step) {
                for (std::size_t i = 0; i < r.size(); ++i)
                    r[i] = Lv[i] - st.lambdaMedian * v[i];
                auto sol = lu ? bicgstabBanded(M, r, 1e-10, 50, lu)
                              : bicgstab(M, r, 1e-10, opts.linearMaxIterations);
                ++innerSweeps;
                bool solved = std::isfinite(sol.relativeResidual) &&
                              sol.relativeResidual <= 1e-2;
                RayleighStats next;
                bool usable = false;
                if (solved) {
                    w = v;
                    double wmin = 0.0, wmax = 0.0;
                    for (std::size_t i = 0; i < w.size(); ++i) {
                        w[i] -= sol.x[i];
                        wmin = std::min(wmin, w[i]);
                        wmax = std::max(wmax, w[i]);
                    }
                    usable = std::isfinite(wmin) && std::isfinite(wmax) &&
                             wmax > 0.0 && wmin >= -1e-8 * wmax;
                    if (usable) {
                        for (double& x : w)
                            x = std::max(x, 0.0);
                        normalizeMax(w);
                        applyL(w, Lw);
                        next = rayleighStats(Lw, w);
                        usable = std::isfinite(next.residual);
                    }
                }
                if (usable && next.residual <= opts.tol) {
                    out.method = EigenMethod::InverseRefined;
                    out.lambda = next.lambdaMedian;
                    out.vector = std::move(w);
                    out.residualNorm = next.residual;
                    out.iterations = sweeps + innerSweeps;
                    checkNonnegative(out.vector, "inverse refinement");
                    normalizeMax(out.vector);
                    return out;
                }
                if (usable && next.residual < st.residual) {
                    double contraction = next.residual / st.residual;
                    v.swap(w);
                    Lv.swap(Lw);
                    st = next;
                    out.method = EigenMethod::InverseRefined;
                    lambdaPrev = st.lambdaMedian;
                    stalls = 0;
                    bool comfortable = sol.relativeResidual <= 1e-8 &&
                                       2 * sol.iterations <= opts.linearMaxIterations;
                    if (contraction > 0.5 && comfortable)
                        margin = std::max(margin / 4.0, marginMin);
                    recenter(std::min(st.lambdaMedian, st.lambdaLow) - margin);
                    continue;
                }
                if (!solved || !usable) {
                    if (++coldMoves > 8)
                        break;
                    margin *= 4.0;
                    recenter(std::min(st.lambdaMedian, st.lambdaLow) - margin);
                    continue;
                }
                if (st.residual <= floorResidual || ++stalls >= 3)
                    break;
                margin *= 4.0;
                recenter(std::min(st.lambdaMedian, st.lambdaLow) - margin);
            }
            sweeps += innerSweeps;
            if (st.residual <= opts.tol)
                break;
            // A phase that at least halved the residual may be retried after
            // more power sweeps; one that could not ends refinement for good.
            inverseFailed = st.residual > 0.5 * entryResidual;
            windowStart = sweeps;
            windowResidual = st.residual;
            continue;
        }

        // Power sweep on sI - L.
        for (int i = 0; i < n; ++i)
            w[i] = s * v[i] - Lv[i];
        checkNonnegative(w, "power iteration");
        for (double& x : w)
            x = std::max(x, 0.0);
        normalizeMax(w);
        std::swap(v, w);
        ++sweeps;
    }

    if (sweeps >= opts.maxSweeps && st.residual > opts.tol)
        throw NumericalError("principal eigenpair did not converge in " +
                             std::to_string(opts.maxSweeps) + " sweeps (residual " +
                             std::to_string(st.residual) + ")");

    out.lambda = st.lambdaMedian;
    out.vector = std::move(v);
    out.residualNorm = st.residual;
    out.iterations = sweeps;
    checkNonnegative(out.vector, "power iteration");
    normalizeMax(out.vector);
    return out;
}

} // namespace driftlim
