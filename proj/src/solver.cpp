#include <slope/solver.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace slope {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kStepGrowth = 1.1;
constexpr int kRefineEvery = 25;
constexpr Index kRefineMaxClusters = 500;

double xlogx(double x)
{
    return x > 0.0 ? x * std::log(x) : 0.0;
}

/// Columns of the working set, grouped by coefficient column (class).
class WorkingSet
{
public:
    WorkingSet(const Design& design, std::span<const Index> subset, int coef_columns)
        : n_(design.rows()), classes_(coef_columns)
    {
        const Index p = design.cols();
        offsets_.assign(static_cast<std::size_t>(coef_columns) + 1, 0);
        std::vector<IndexSet> columns(static_cast<std::size_t>(coef_columns));
        for (Index idx : subset) {
            columns[static_cast<std::size_t>(idx / p)].push_back(idx % p);
        }
        for (int l = 0; l < coef_columns; ++l) {
            const auto& cols = columns[static_cast<std::size_t>(l)];
            offsets_[l + 1] = offsets_[l] + static_cast<Index>(cols.size());
            if (coef_columns == 1 && static_cast<Index>(cols.size()) == p) {
                views_.push_back(&design);
            } else {
                owned_.push_back(std::make_unique<Design>(design.select_columns(cols)));
                views_.push_back(owned_.back().get());
            }
        }
    }

    Eigen::MatrixXd eta(const Eigen::VectorXd& b) const
    {
        Eigen::MatrixXd out(n_, classes_);
        for (int l = 0; l < classes_; ++l) {
            const Index m = offsets_[l + 1] - offsets_[l];
            if (m == 0) {
                out.col(l).setZero();
            } else {
                out.col(l) = views_[l]->times(b.segment(offsets_[l], m));
            }
        }
        return out;
    }

    Eigen::VectorXd gradient(const Eigen::MatrixXd& w) const
    {
        Eigen::VectorXd g(offsets_.back());
        for (int l = 0; l < classes_; ++l) {
            const Index m = offsets_[l + 1] - offsets_[l];
            if (m > 0) {
                g.segment(offsets_[l], m) = views_[l]->transpose_times(w.col(l));
            }
        }
        return g;
    }

    /// Columns sum_j sign_j x_j over each group of (local index, sign) pairs.
    /// Single coefficient column only.
    Eigen::MatrixXd combine(const std::vector<std::vector<std::pair<Index, double>>>& groups) const
    {
        const Design& x = *views_.front();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, static_cast<Index>(groups.size()));
        for (std::size_t c = 0; c < groups.size(); ++c) {
            for (const auto& [j, sign] : groups[c]) {
                if (x.is_sparse()) {
                    for (SparseMatrix::InnerIterator it(x.sparse(), j); it; ++it) {
                        out(it.row(), static_cast<Index>(c)) += sign * it.value();
                    }
                } else {
                    out.col(static_cast<Index>(c)) += sign * x.dense().col(j);
                }
            }
        }
        return out;
    }

    double spectral_norm_sq() const
    {
        double out = 0.0;
        for (int l = 0; l < classes_; ++l) {
            if (offsets_[l + 1] > offsets_[l]) {
                out = std::max(out, views_[l]->spectral_norm_squared());
            }
        }
        return out;
    }

private:
    Index n_;
    int classes_;
    std::vector<Index> offsets_;
    std::vector<const Design*> views_;
    std::vector<std::unique_ptr<Design>> owned_;
};

double curvature_bound(const Response& response, const Eigen::MatrixXd& eta)
{
    switch (response.family) {
    case Family::gaussian: return 1.0;
    case Family::logistic: return 0.25;
    case Family::multinomial: return 0.5;
    case Family::poisson: return std::exp(std::min(eta.maxCoeff(), 700.0));
    }
    return 1.0;
}

/// Newton's method on the cluster magnitudes of b with signs and ordering
/// held fixed, where the penalty is linear. A step that would reorder two
/// clusters merges them; one that would zero the last cluster drops it.
/// The caller accepts the result only if the true objective decreases.
std::optional<Eigen::VectorXd> refine(const WorkingSet& ws,
                                      const Response& response,
                                      const LambdaSeq& lam,
                                      const Eigen::VectorXd& b)
{
    struct Cluster
    {
        std::vector<std::pair<Index, double>> members;
        double weight = 0.0;
        double magnitude = 0.0;
    };
    const IndexSet order = magnitude_order(b);
    std::vector<Cluster> clusters;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const Index j = order[pos];
        const double mag = std::abs(b[j]);
        if (mag == 0.0) {
            break;
        }
        if (clusters.empty() || mag != clusters.back().magnitude) {
            clusters.push_back({{}, 0.0, mag});
        }
        clusters.back().members.emplace_back(j, b[j] > 0.0 ? 1.0 : -1.0);
        clusters.back().weight += lam[static_cast<Index>(pos)];
    }
    const Index n = response.size();
    if (clusters.empty() || static_cast<Index>(clusters.size()) > kRefineMaxClusters ||
        static_cast<Index>(clusters.size()) >= n) {
        return std::nullopt;
    }

    std::vector<std::vector<std::pair<Index, double>>> groups;
    for (const auto& c : clusters) groups.push_back(c.members);
    Eigen::MatrixXd xt = ws.combine(groups);
    Eigen::VectorXd lt(static_cast<Index>(clusters.size()));
    Eigen::VectorXd m(lt.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        lt[static_cast<Index>(c)] = clusters[c].weight;
        m[static_cast<Index>(c)] = clusters[c].magnitude;
    }

    auto value = [&](const Eigen::VectorXd& v) { return loss_from_eta(response, xt * v) + lt.dot(v); };
    auto remove = [](Eigen::VectorXd& v, Index k) {
        const Index tail = v.size() - k - 1;
        v.segment(k, tail) = v.segment(k + 1, tail).eval();
        v.conservativeResize(v.size() - 1);
    };
    double f = value(m);
    for (int it = 0; it < 100 && m.size() > 0; ++it) {
        const Index C = m.size();
        const Eigen::MatrixXd eta = xt * m;
        const Eigen::VectorXd w = loss_derivative(response, eta).col(0);
        Eigen::VectorXd h(n);
        for (Index i = 0; i < n; ++i) {
            const double mu = w[i] + response.values[i];
            switch (response.family) {
            case Family::gaussian: h[i] = 1.0; break;
            case Family::logistic: h[i] = mu * (1.0 - mu); break;
            case Family::poisson: h[i] = mu; break;
            case Family::multinomial: return std::nullopt;
            }
        }
        const Eigen::VectorXd grad = xt.transpose() * w + lt;
        const Eigen::LDLT<Eigen::MatrixXd> hess(xt.transpose() * h.asDiagonal() * xt);
        if (hess.info() != Eigen::Success) {
            return std::nullopt;
        }
        const Eigen::VectorXd dir = hess.solve(grad);
        const double decrement = grad.dot(dir);
        if (!std::isfinite(decrement) || decrement < 0.0) {
            return std::nullopt;
        }
        if (decrement <= 1e-15 * std::max(1.0, std::abs(f))) {
            break;
        }

        // Largest step keeping magnitudes positive and strictly ordered.
        double limit = std::numeric_limits<double>::infinity();
        Index blocking = -1;
        bool to_zero = false;
        if (dir[C - 1] > 0.0) {
            limit = m[C - 1] / dir[C - 1];
            to_zero = true;
        }
        for (Index c = 0; c + 1 < C; ++c) {
            if (dir[c] > dir[c + 1] && (m[c] - m[c + 1]) / (dir[c] - dir[c + 1]) < limit) {
                limit = (m[c] - m[c + 1]) / (dir[c] - dir[c + 1]);
                blocking = c;
                to_zero = false;
            }
        }

        double step = std::min(1.0, limit);
        double f_new = value(m - step * dir);
        while (!(f_new <= f - 0.25 * step * decrement) && step > 1e-10) {
            step *= 0.5;
            f_new = value(m - step * dir);
        }
        if (!(f_new <= f)) {
            break;
        }
        m -= step * dir;
        f = f_new;
        if (step < limit) {
            continue;
        }

        if (to_zero) {
            // The smallest cluster reaches zero.
            remove(m, C - 1);
            remove(lt, C - 1);
            xt.conservativeResize(Eigen::NoChange, C - 1);
            clusters.pop_back();
        } else {
            // Clusters blocking and blocking + 1 meet.
            const Index c = blocking;
            const double merged = 0.5 * (m[c] + m[c + 1]);
            auto& into = clusters[static_cast<std::size_t>(c)];
            const auto& from = clusters[static_cast<std::size_t>(c + 1)];
            into.members.insert(into.members.end(), from.members.begin(), from.members.end());
            clusters.erase(clusters.begin() + c + 1);
            xt.col(c) += xt.col(c + 1);
            const Index tail = C - c - 2;
            xt.middleCols(c + 1, tail) = xt.middleCols(c + 2, tail).eval();
            xt.conservativeResize(Eigen::NoChange, C - 1);
            lt[c] += lt[c + 1];
            remove(lt, c + 1);
            m[c] = merged;
            remove(m, c + 1);
        }
        f = value(m);
    }

    Eigen::VectorXd out = Eigen::VectorXd::Zero(b.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (const auto& [j, sign] : clusters[c].members) {
            out[j] = sign * m[static_cast<Index>(c)];
        }
    }
    return out;
}

} // namespace

double GapInfo::relative_gap() const
{
    return gap / std::max(std::abs(primal), kTiny);
}

double SolverResult::relative_gap() const
{
    return gap / std::max(std::abs(primal), kTiny);
}

double conjugate_sum(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& theta)
{
    const auto& y = response.values;
    const Index n = response.size();
    double total = 0.0;
    switch (response.family) {
    case Family::gaussian:
        for (Index i = 0; i < n; ++i) {
            total += 0.5 * theta(i, 0) * theta(i, 0) - theta(i, 0) * y[i];
        }
        break;
    case Family::logistic:
        for (Index i = 0; i < n; ++i) {
            const double a = std::clamp(y[i] - theta(i, 0), 0.0, 1.0);
            total += xlogx(a) + xlogx(1.0 - a);
        }
        break;
    case Family::poisson:
        for (Index i = 0; i < n; ++i) {
            const double a = std::max(y[i] - theta(i, 0), 0.0);
            total += xlogx(a) - a;
        }
        break;
    case Family::multinomial:
        for (Index i = 0; i < n; ++i) {
            for (Index l = 0; l < theta.cols(); ++l) {
                const double indicator = static_cast<Index>(y[i]) == l ? 1.0 : 0.0;
                total += xlogx(std::max(indicator - theta(i, l), 0.0));
            }
        }
        break;
    }
    return total;
}

GapInfo gap_from_state(const Response& response,
                       const Eigen::Ref<const Eigen::MatrixXd>& eta,
                       const Eigen::Ref<const Eigen::MatrixXd>& derivative,
                       const Eigen::Ref<const Eigen::VectorXd>& beta_values,
                       const Eigen::Ref<const Eigen::VectorXd>& gradient,
                       const LambdaSeq& lambda)
{
    const Index m = gradient.size();
    GapInfo info;
    info.primal = loss_from_eta(response, eta);
    if (m > 0) {
        const LambdaSeq lam = lambda.head(m);
        info.primal += sorted_l1_norm(beta_values, lam);

        Eigen::VectorXd mags = gradient.cwiseAbs();
        std::sort(mags.begin(), mags.end(), std::greater<>());
        double grad_sum = 0.0;
        double lambda_sum = 0.0;
        double worst = 0.0;
        double rho = 0.0;
        for (Index i = 0; i < m; ++i) {
            grad_sum += mags[i];
            lambda_sum += lam[i];
            worst = std::max(worst, grad_sum - lambda_sum);
            if (lambda_sum > 0.0) {
                rho = std::max(rho, grad_sum / lambda_sum);
            } else if (grad_sum > 0.0) {
                rho = std::numeric_limits<double>::infinity();
            }
        }
        if (lambda_sum > 0.0) {
            info.infeasibility = worst / lambda_sum;
        } else {
            info.infeasibility = worst > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        }

        const double scale = std::max(1.0, rho);
        const Eigen::MatrixXd theta =
            std::isfinite(scale) ? Eigen::MatrixXd(-derivative / scale) : Eigen::MatrixXd::Zero(eta.rows(), eta.cols());
        info.dual = -conjugate_sum(response, theta);
    } else {
        info.dual = -conjugate_sum(response, -derivative);
    }
    // Weak duality; negative values are rounding.
    info.gap = std::max(info.primal - info.dual, 0.0);
    return info;
}

GapInfo duality_gap(const Design& design, const Response& response, const Coefficients& beta, const LambdaSeq& lambda)
{
    if (lambda.size() != beta.size()) {
        throw std::invalid_argument("duality_gap: lambda length does not match coefficients");
    }
    const Eigen::MatrixXd eta = linear_predictor(design, beta, response.coef_columns());
    const Eigen::MatrixXd w = loss_derivative(response, eta);
    const Eigen::VectorXd g = gradient_from_derivative(design, w);
    return gap_from_state(response, eta, w, beta, g, lambda);
}

SolverResult fista_solve(const Design& design,
                         const Response& response,
                         const LambdaSeq& lambda,
                         std::span<const Index> subset,
                         const Coefficients& warm_start,
                         const SolverConfig& config,
                         const SolverHints& hints)
{
    const int K = response.coef_columns();
    const Index total = design.cols() * K;
    if (lambda.size() != total || warm_start.size() != total) {
        throw std::invalid_argument("fista_solve: lambda or warm start length does not match p * K");
    }
    if (response.size() != design.rows()) {
        throw std::invalid_argument("fista_solve: response length does not match design rows");
    }
    if (!(config.gap_tol > 0.0) || !(config.infeas_tol > 0.0) || config.max_iterations < 1) {
        throw std::invalid_argument("fista_solve: invalid solver configuration");
    }
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (subset[i] < 0 || subset[i] >= total || (i > 0 && subset[i] <= subset[i - 1])) {
            throw std::invalid_argument("fista_solve: subset must be strictly increasing indices in range");
        }
    }

    const Index m = static_cast<Index>(subset.size());
    SolverResult result;
    result.beta = Coefficients::Zero(total);

    const WorkingSet ws(design, subset, K);

    Eigen::VectorXd b(m);
    for (Index i = 0; i < m; ++i) {
        b[i] = warm_start[subset[i]];
    }

    auto finish = [&](const Eigen::MatrixXd& eta_final, const Eigen::MatrixXd& w_final) {
        result.eta = eta_final;
        for (Index i = 0; i < m; ++i) {
            result.beta[subset[i]] = b[i];
        }
        result.derivative = w_final;
        if (config.compute_full_gradient) {
            result.gradient_full = gradient_from_derivative(design, w_final);
        }
    };

    Eigen::MatrixXd eta = ws.eta(b);
    Eigen::MatrixXd w = loss_derivative(response, eta);
    Eigen::VectorXd g = ws.gradient(w);

    auto check = [&]() {
        const GapInfo info = gap_from_state(response, eta, w, b, g, lambda);
        result.primal = info.primal;
        result.gap = info.gap;
        result.infeasibility = info.infeasibility;
        return info.relative_gap() <= config.gap_tol && info.infeasibility <= config.infeas_tol;
    };

    if (check() || m == 0) {
        result.converged = true;
        finish(eta, w);
        return result;
    }

    const LambdaSeq lam = lambda.head(m);
    const double norm_sq = hints.spectral_norm_sq > 0.0 ? hints.spectral_norm_sq : ws.spectral_norm_sq();
    const double lipschitz = curvature_bound(response, eta) * norm_sq;
    double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
    if (!(step >= config.min_step)) {
        throw SolverFailure("fista_solve: step size underflow");
    }

    double objective = loss_from_eta(response, eta) + sorted_l1_norm(b, lam);
    Eigen::VectorXd b_prev = b;
    Eigen::MatrixXd eta_prev = eta;
    double t = 1.0;

    for (int it = 1; it <= config.max_iterations; ++it) {
        result.iterations = it;
        // Try a longer step each iteration; backtracking shrinks it again
        // where the local curvature is high.
        const double step_prev = step;
        step *= kStepGrowth;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * (step_prev / step) * t * t));
        const double momentum = (t - 1.0) / t_next;

        const Eigen::VectorXd z = b + momentum * (b - b_prev);
        const Eigen::MatrixXd eta_z = eta + momentum * (eta - eta_prev);
        const Eigen::MatrixXd w_z = loss_derivative(response, eta_z);
        const Eigen::VectorXd g_z = ws.gradient(w_z);
        const double f_z = loss_from_eta(response, eta_z);

        Eigen::VectorXd x;
        Eigen::MatrixXd eta_x;
        double f_x = 0.0;
        while (true) {
            x = prox_sorted_l1(z - step * g_z, lam.scaled(step));
            eta_x = ws.eta(x);
            f_x = loss_from_eta(response, eta_x);
            const Eigen::VectorXd d = x - z;
            const double upper = f_z + g_z.dot(d) + d.squaredNorm() / (2.0 * step);
            if (std::isfinite(f_x) && f_x <= upper + 1e-12 * std::max(1.0, std::abs(upper))) {
                break;
            }
            step *= 0.5;
            if (step < config.min_step) {
                throw SolverFailure("fista_solve: step size underflow");
            }
        }

        const double objective_x = f_x + sorted_l1_norm(x, lam);
        if (objective_x > objective && momentum > 0.0) {
            // Restart: drop the momentum and retake the step from b.
            t = 1.0;
            b_prev = b;
            eta_prev = eta;
            continue;
        }

        // Gradient-based restart when the momentum points uphill.
        const bool uphill = (z - x).dot(x - b) > 0.0;
        b_prev = std::move(b);
        eta_prev = std::move(eta);
        b = std::move(x);
        eta = std::move(eta_x);
        objective = objective_x;
        t = uphill ? 1.0 : t_next;

        bool refined = false;
        if (K == 1 && it % kRefineEvery == 0) {
            if (auto candidate = refine(ws, response, lam, b)) {
                const Eigen::MatrixXd eta_c = ws.eta(*candidate);
                const double objective_c = loss_from_eta(response, eta_c) + sorted_l1_norm(*candidate, lam);
                if (objective_c < objective) {
                    b = std::move(*candidate);
                    eta = eta_c;
                    objective = objective_c;
                    b_prev = b;
                    eta_prev = eta;
                    t = 1.0;
                    refined = true;
                }
            }
        }

        w = loss_derivative(response, eta);
        g = ws.gradient(w);
        // A refined point may drop coordinates; let a prox step revisit them.
        if (!refined && check()) {
            result.converged = true;
            break;
        }
    }

    finish(eta, w);
    return result;
}

} // namespace slope
