#pragma once

// Independent reference computations used by the tests.

#include <slope/objectives.hpp>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

inline double sorted_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda)
{
    std::vector<double> a(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) a[i] = std::abs(x[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += lambda[static_cast<Eigen::Index>(i)] * a[i];
    return s;
}

/// Exhaustive prox: for every ordering, sign pattern and face of the
/// monotone cone, the face-restricted minimizer is the block average; the
/// best feasible candidate under the true objective is the prox.
inline Eigen::VectorXd brute_prox(const Eigen::VectorXd& v, const Eigen::VectorXd& lambda)
{
    const int p = static_cast<int>(v.size());
    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    Eigen::VectorXd best = Eigen::VectorXd::Zero(p);
    double best_val = 0.5 * v.squaredNorm();
    auto objective = [&](const Eigen::VectorXd& x) { return 0.5 * (x - v).squaredNorm() + sorted_norm(x, lambda); };
    do {
        for (int signs = 0; signs < (1 << p); ++signs) {
            Eigen::VectorXd w(p);
            for (int i = 0; i < p; ++i) {
                const double s = (signs >> i & 1) ? -1.0 : 1.0;
                w[i] = s * v[perm[i]] - lambda[i];
            }
            // Breaks between consecutive positions (p-1 bits) and a zero tail length.
            for (int cuts = 0; cuts < (1 << (p - 1)); ++cuts) {
                for (int zeros = 0; zeros <= p; ++zeros) {
                    const int free = p - zeros;
                    Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
                    int start = 0;
                    for (int i = 0; i < free; ++i) {
                        const bool end_block = i == free - 1 || (cuts >> i & 1);
                        if (end_block) {
                            const double mean = w.segment(start, i - start + 1).mean();
                            u.segment(start, i - start + 1).setConstant(mean);
                            start = i + 1;
                        }
                    }
                    bool feasible = true;
                    for (int i = 0; i + 1 < p; ++i) feasible = feasible && u[i] >= u[i + 1] - 1e-15;
                    feasible = feasible && (p == 0 || u[p - 1] >= -1e-15);
                    if (!feasible) continue;
                    Eigen::VectorXd x(p);
                    for (int i = 0; i < p; ++i) {
                        const double s = (signs >> i & 1) ? -1.0 : 1.0;
                        x[perm[i]] = s * std::max(u[i], 0.0);
                    }
                    const double val = objective(x);
                    if (val < best_val) {
                        best_val = val;
                        best = x;
                    }
                }
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Quantile by bisection on the erfc-based cdf.
inline double normal_quantile(double prob)
{
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Central finite-difference gradient.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x,
                                   double h = 1e-6)
{
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x;
        Eigen::VectorXd b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

/// Losses written out from their definitions, without stabilization.
inline double naive_loss(slope::Family family, const Eigen::MatrixXd& eta, const Eigen::VectorXd& y)
{
    double f = 0.0;
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        switch (family) {
        case slope::Family::gaussian: f += 0.5 * (y[i] - eta(i, 0)) * (y[i] - eta(i, 0)); break;
        case slope::Family::logistic: f += std::log(1.0 + std::exp(eta(i, 0))) - y[i] * eta(i, 0); break;
        case slope::Family::poisson: f += std::exp(eta(i, 0)) - y[i] * eta(i, 0); break;
        case slope::Family::multinomial: {
            double z = 0.0;
            for (Eigen::Index l = 0; l < eta.cols(); ++l) z += std::exp(eta(i, l));
            f += std::log(z) - eta(i, static_cast<Eigen::Index>(y[i]));
            break;
        }
        }
    }
    return f;
}

/// Duality gap built from scratch: primal minus the dual objective at the
/// rescaled negative residual.
inline double relative_gap(const Eigen::MatrixXd& x,
                           slope::Family family,
                           const Eigen::VectorXd& y,
                           int classes,
                           const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& lambda)
{
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const int K = family == slope::Family::multinomial ? classes : 1;
    Eigen::MatrixXd eta(n, K);
    for (int l = 0; l < K; ++l) eta.col(l) = x * beta.segment(l * p, p);
    // Residual r = y - mu (negative loss derivative).
    Eigen::MatrixXd r(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (family) {
        case slope::Family::gaussian: r(i, 0) = y[i] - eta(i, 0); break;
        case slope::Family::logistic: r(i, 0) = y[i] - 1.0 / (1.0 + std::exp(-eta(i, 0))); break;
        case slope::Family::poisson: r(i, 0) = y[i] - std::exp(eta(i, 0)); break;
        case slope::Family::multinomial: {
            double z = 0.0;
            for (int l = 0; l < K; ++l) z += std::exp(eta(i, l));
            for (int l = 0; l < K; ++l) r(i, l) = (y[i] == l ? 1.0 : 0.0) - std::exp(eta(i, l)) / z;
            break;
        }
        }
    }
    Eigen::VectorXd corr(p * K);
    for (int l = 0; l < K; ++l) corr.segment(l * p, p) = x.transpose() * r.col(l);
    std::vector<double> a(corr.size());
    for (Eigen::Index i = 0; i < corr.size(); ++i) a[i] = std::abs(corr[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    double ca = 0.0;
    double cl = 0.0;
    double rho = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca += a[i];
        cl += lambda[static_cast<Eigen::Index>(i)];
        rho = std::max(rho, ca / cl);
    }
    const Eigen::MatrixXd u = r / std::max(1.0, rho);
    auto xlogx = [](double t) { return t > 0.0 ? t * std::log(t) : 0.0; };
    // Dual objective: -sum f_i^*(-u_i), with mean parameter mu_i = y_i - u_i.
    double conj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (family) {
        case slope::Family::gaussian: conj += 0.5 * u(i, 0) * u(i, 0) - u(i, 0) * y[i]; break;
        case slope::Family::logistic: {
            const double mu = y[i] - u(i, 0);
            conj += xlogx(mu) + xlogx(1.0 - mu);
            break;
        }
        case slope::Family::poisson: {
            const double mu = y[i] - u(i, 0);
            conj += xlogx(mu) - mu;
            break;
        }
        case slope::Family::multinomial:
            for (int l = 0; l < K; ++l) conj += xlogx((y[i] == l ? 1.0 : 0.0) - u(i, l));
            break;
        }
    }
    const double primal = naive_loss(family, eta, y) + sorted_norm(beta, lambda);
    return (primal + conj) / primal;
}

} // namespace oracle
