#include <slope/path.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <string>

namespace slope {

std::string_view to_string(Screening screening)
{
    return screening == Screening::none ? "none" : "strong";
}

std::string_view to_string(Driver driver)
{
    return driver == Driver::strong_set ? "strong-set" : "previous-set";
}

std::string_view to_string(Termination reason)
{
    switch (reason) {
    case Termination::completed: return "completed";
    case Termination::too_many_clusters: return "too_many_clusters";
    case Termination::deviance_change: return "deviance_change";
    case Termination::deviance_ratio: return "deviance_ratio";
    }
    return "unknown";
}

Screening parse_screening(std::string_view name)
{
    if (name == "none") return Screening::none;
    if (name == "strong") return Screening::strong;
    throw std::invalid_argument("unknown screening mode '" + std::string(name) + "'");
}

Driver parse_driver(std::string_view name)
{
    if (name == "strong-set" || name == "strong_set") return Driver::strong_set;
    if (name == "previous-set" || name == "previous_set") return Driver::previous_set;
    throw std::invalid_argument("unknown driver '" + std::string(name) + "'");
}

double normal_quantile(double prob)
{
    if (!(prob > 0.0 && prob < 1.0)) {
        throw std::invalid_argument("normal_quantile: probability must lie in (0, 1)");
    }
    // Acklam's rational approximation, refined by one Halley step.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double low = 0.02425;

    double x = 0.0;
    if (prob < low) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (prob <= 1.0 - low) {
        const double q = prob - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-prob));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - prob;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

LambdaSeq bh_lambda(Index p, double q)
{
    if (!(q > 0.0 && q < 1.0)) {
        throw std::invalid_argument("bh_lambda: q must lie in (0, 1)");
    }
    if (p < 1) {
        throw std::invalid_argument("bh_lambda: p must be positive");
    }
    Eigen::VectorXd w(p);
    for (Index i = 0; i < p; ++i) {
        w[i] = normal_quantile(1.0 - q * static_cast<double>(i + 1) / (2.0 * static_cast<double>(p)));
    }
    return LambdaSeq(std::move(w));
}

double sigma_max(const Eigen::Ref<const Eigen::VectorXd>& grad_at_zero, const LambdaSeq& lambda)
{
    if (grad_at_zero.size() != lambda.size()) {
        throw std::invalid_argument("sigma_max: dimension mismatch");
    }
    if (lambda[0] <= 0.0) {
        throw std::invalid_argument("sigma_max: lambda has no positive entry");
    }
    Eigen::VectorXd mags = grad_at_zero.cwiseAbs();
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double grad_sum = 0.0;
    double lambda_sum = 0.0;
    double out = 0.0;
    for (Index i = 0; i < mags.size(); ++i) {
        grad_sum += mags[i];
        lambda_sum += lambda[i];
        out = std::max(out, grad_sum / lambda_sum);
    }
    return out;
}

std::vector<double> sigma_grid(double sigma1, double t, int l)
{
    if (!(sigma1 > 0.0)) {
        throw std::invalid_argument("sigma_grid: sigma1 must be positive");
    }
    if (!(t > 0.0 && t < 1.0) || l < 1) {
        throw std::invalid_argument("sigma_grid: need 0 < t < 1 and l >= 1");
    }
    std::vector<double> out(static_cast<std::size_t>(l));
    out[0] = sigma1;
    for (int i = 1; i < l; ++i) {
        out[i] = sigma1 * std::pow(t, static_cast<double>(i) / static_cast<double>(l - 1));
    }
    if (l > 1) {
        out.back() = t * sigma1;
    }
    return out;
}

Index unique_magnitudes(const Eigen::Ref<const Eigen::VectorXd>& beta)
{
    const Clustering clustering = ordering_and_ranks(beta);
    Index count = 0;
    for (const auto& block : clustering.clusters) {
        if (block.magnitude != 0.0) {
            ++count;
        }
    }
    return count;
}

IndexSet support(const Eigen::Ref<const Eigen::VectorXd>& beta)
{
    IndexSet out;
    for (Index i = 0; i < beta.size(); ++i) {
        if (beta[i] != 0.0) {
            out.push_back(i);
        }
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

IndexSet set_union(const IndexSet& a, const IndexSet& b)
{
    IndexSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b)
{
    IndexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IndexSet all_indices(Index total)
{
    IndexSet out(static_cast<std::size_t>(total));
    std::iota(out.begin(), out.end(), Index{0});
    return out;
}

Eigen::VectorXd gradient_subset(const Design& design, const Eigen::MatrixXd& w, const IndexSet& indices)
{
    const Index p = design.cols();
    Eigen::VectorXd g(static_cast<Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Index idx = indices[i];
        g[static_cast<Index>(i)] = design.col_dot(idx % p, w.col(idx / p));
    }
    return g;
}

/// Solves on E and tracks bookkeeping shared by both drivers.
class Refitter
{
public:
    explicit Refitter(const StepContext& ctx, bool full_gradient) : ctx_(ctx), config_(ctx.config.solver)
    {
        config_.compute_full_gradient = full_gradient;
    }

    SolverResult solve(const IndexSet& working, const Coefficients& warm, StepSolution& out) const
    {
        // The full design's norm bounds any subset's; use it once the subset
        // is large enough that the bound is not too loose.
        SolverHints hints;
        if (2 * working.size() >= static_cast<std::size_t>(ctx_.warm_start.size())) {
            hints.spectral_norm_sq = ctx_.spectral_norm_sq;
        }
        SolverResult fit = fista_solve(ctx_.design, ctx_.response, ctx_.lambda_next, working, warm, config_, hints);
        out.solves += 1;
        out.iterations += fit.iterations;
        out.work += static_cast<double>(working.size()) * fit.iterations;
        out.trace.push_back(DriverEvent::solve);
        return fit;
    }

    SolverConfig& config() { return config_; }

private:
    const StepContext& ctx_;
    SolverConfig config_;
};

IndexSet full_violations(const StepContext& ctx, const SolverResult& fit, const IndexSet& working, double tol)
{
    return set_difference(detect_violations(fit.beta, fit.gradient_full, ctx.lambda_next, tol), working);
}

/// Tightens the fit until the full problem meets the solver certificates.
void certify(const StepContext& ctx, Refitter& refitter, IndexSet& working, StepSolution& out)
{
    const SolverConfig& base = ctx.config.solver;
    for (int round = 0; round < 8; ++round) {
        auto& fit = out.fit;
        if (fit.gradient_full.size() == 0) {
            fit.gradient_full = gradient_from_derivative(ctx.design, fit.derivative);
        }
        const GapInfo info =
            gap_from_state(ctx.response, fit.eta, fit.derivative, fit.beta, fit.gradient_full, ctx.lambda_next);
        fit.primal = info.primal;
        fit.gap = info.gap;
        fit.infeasibility = info.infeasibility;
        if (info.relative_gap() <= base.gap_tol && info.infeasibility <= base.infeas_tol) {
            return;
        }
        if (!fit.converged) {
            return;
        }
        const IndexSet exact = full_violations(ctx, fit, working, 0.0);
        if (!exact.empty()) {
            working = set_union(working, exact);
        } else {
            refitter.config().gap_tol *= 0.1;
            refitter.config().infeas_tol *= 0.1;
        }
        out.trace.push_back(DriverEvent::certificate_refit);
        fit = refitter.solve(working, fit.beta, out);
    }
}

} // namespace

StepSolution strong_set_drive(const StepContext& ctx)
{
    StepSolution out;
    Refitter refitter(ctx, true);
    const Index total = ctx.warm_start.size();
    IndexSet working = set_union(ctx.strong_set, ctx.previous_active);
    Coefficients warm = ctx.warm_start;

    while (true) {
        out.fit = refitter.solve(working, warm, out);
        const IndexSet violations = full_violations(ctx, out.fit, working, ctx.config.kkt_tol);
        if (violations.empty()) {
            out.trace.push_back(DriverEvent::full_check_clean);
            break;
        }
        out.trace.push_back(DriverEvent::full_check_violation);
        out.violation_count += static_cast<Index>(violations.size());
        out.refits += 1;
        working = out.refits > ctx.config.max_refits ? all_indices(total) : set_union(working, violations);
        warm = out.fit.beta;
    }

    certify(ctx, refitter, working, out);
    out.working_set_size = static_cast<Index>(working.size());
    return out;
}

StepSolution previous_set_drive(const StepContext& ctx)
{
    StepSolution out;
    Refitter refitter(ctx, false);
    const Index total = ctx.warm_start.size();
    IndexSet working = ctx.previous_active;
    Coefficients warm = ctx.warm_start;

    while (true) {
        out.fit = refitter.solve(working, warm, out);
        warm = out.fit.beta;

        // Stationarity of the problem restricted to the strong set and E.
        const IndexSet checked = set_union(working, ctx.strong_set);
        const Eigen::VectorXd grad = gradient_subset(ctx.design, out.fit.derivative, checked);
        Eigen::VectorXd beta_checked(static_cast<Index>(checked.size()));
        for (std::size_t i = 0; i < checked.size(); ++i) {
            beta_checked[static_cast<Index>(i)] = out.fit.beta[checked[i]];
        }
        IndexSet in_strong;
        if (!checked.empty()) {
            const LambdaSeq lam = ctx.lambda_next.head(static_cast<Index>(checked.size()));
            for (Index pos : detect_violations(beta_checked, grad, lam, ctx.config.kkt_tol)) {
                in_strong.push_back(checked[pos]);
            }
            in_strong = set_difference(in_strong, working);
        }
        if (!in_strong.empty()) {
            out.trace.push_back(DriverEvent::strong_check_violation);
            out.refits += 1;
            working = out.refits > ctx.config.max_refits ? all_indices(total) : set_union(working, in_strong);
            continue;
        }
        out.trace.push_back(DriverEvent::strong_check_clean);

        out.fit.gradient_full = gradient_from_derivative(ctx.design, out.fit.derivative);
        const IndexSet violations = full_violations(ctx, out.fit, working, ctx.config.kkt_tol);
        if (violations.empty()) {
            out.trace.push_back(DriverEvent::full_check_clean);
            break;
        }
        out.trace.push_back(DriverEvent::full_check_violation);
        out.violation_count += static_cast<Index>(violations.size());
        out.refits += 1;
        working = out.refits > ctx.config.max_refits ? all_indices(total) : set_union(working, violations);
    }

    certify(ctx, refitter, working, out);
    out.working_set_size = static_cast<Index>(working.size());
    return out;
}

Termination stop_reason(const PathStep& last, double previous_deviance, int step, Index n, const PathConfig& config)
{
    if (unique_magnitudes(last.beta) > n) {
        return Termination::too_many_clusters;
    }
    if (step >= config.dev_change_min_step && last.deviance > 0.0 &&
        std::abs(last.deviance - previous_deviance) / last.deviance < config.dev_change_tol) {
        return Termination::deviance_change;
    }
    if (last.deviance_ratio > config.dev_ratio_max) {
        return Termination::deviance_ratio;
    }
    return Termination::completed;
}

PathResult fit_path(const Design& design, const Response& response, const PathConfig& config)
{
    const auto start = Clock::now();
    if (config.length < 2) {
        throw std::invalid_argument("fit_path: path length must be at least 2");
    }
    if (response.size() != design.rows()) {
        throw std::invalid_argument("fit_path: response length does not match design rows");
    }

    const Index n = design.rows();
    const Index p = design.cols();
    const int K = response.coef_columns();
    const Index total = p * K;
    const double t = config.terminal_ratio > 0.0 ? config.terminal_ratio : (n < p ? 1e-2 : 1e-4);
    if (!(t < 1.0)) {
        throw std::invalid_argument("fit_path: terminal ratio must lie in (0, 1)");
    }

    PathResult result;
    result.lambda = bh_lambda(total, config.q);
    const Coefficients zero = Coefficients::Zero(total);
    const Eigen::VectorXd grad0 = loss_gradient(design, response, zero);
    const double sigma1 = sigma_max(grad0, result.lambda);
    if (!(sigma1 > 0.0)) {
        throw std::runtime_error("fit_path: gradient at zero vanishes; the null model is optimal everywhere");
    }
    result.sigmas = sigma_grid(sigma1, t, config.length);
    result.null_deviance = null_deviance(design, response);
    const double saturated = saturated_loss(response);

    SolverConfig full_config = config.solver;
    full_config.compute_full_gradient = true;
    SolverHints full_hints;
    full_hints.spectral_norm_sq = design.spectral_norm_squared();
    const IndexSet everything = all_indices(total);

    Coefficients beta = zero;
    Eigen::VectorXd gradient = grad0;
    double previous_deviance = 0.0;
    bool any_converged = false;

    for (std::size_t m = 0; m < result.sigmas.size(); ++m) {
        const auto step_start = Clock::now();
        const LambdaSeq lambda_m = result.lambda.scaled(result.sigmas[m]);
        PathStep step;
        step.sigma = result.sigmas[m];
        double loss = 0.0;

        if (m == 0) {
            const Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, K);
            const Eigen::MatrixXd w = loss_derivative(response, eta);
            const GapInfo info = gap_from_state(response, eta, w, beta, gradient, lambda_m);
            step.relative_gap = info.relative_gap();
            step.infeasibility = info.infeasibility;
            step.screened_count = config.screening == Screening::none ? total : 0;
            loss = info.primal;
        } else if (config.screening == Screening::none) {
            SolverResult fit = fista_solve(design, response, lambda_m, everything, beta, full_config, full_hints);
            step.solves = 1;
            step.solver_iterations = fit.iterations;
            step.solver_work = static_cast<double>(total) * fit.iterations;
            step.trace = {DriverEvent::solve};
            step.screened_count = total;
            step.strong_count = total;
            step.converged = fit.converged;
            step.relative_gap = fit.relative_gap();
            step.infeasibility = fit.infeasibility;
            beta = std::move(fit.beta);
            gradient = std::move(fit.gradient_full);
            loss = fit.primal - sorted_l1_norm(beta, lambda_m);
        } else {
            const LambdaSeq lambda_prev = result.lambda.scaled(result.sigmas[m - 1]);
            StepContext ctx{design,
                            response,
                            lambda_m,
                            strong_rule_slope(gradient, lambda_prev, lambda_m, config.pairing).indices,
                            support(beta),
                            beta,
                            config,
                            full_hints.spectral_norm_sq};
            StepSolution sol = config.driver == Driver::strong_set ? strong_set_drive(ctx) : previous_set_drive(ctx);
            step.strong_count = static_cast<Index>(ctx.strong_set.size());
            step.screened_count = sol.working_set_size;
            step.violation_count = sol.violation_count;
            step.refits = sol.refits;
            step.solves = sol.solves;
            step.solver_iterations = sol.iterations;
            step.solver_work = sol.work;
            step.trace = std::move(sol.trace);
            step.converged = sol.fit.converged;
            step.relative_gap = sol.fit.relative_gap();
            step.infeasibility = sol.fit.infeasibility;
            beta = std::move(sol.fit.beta);
            gradient = std::move(sol.fit.gradient_full);
            loss = sol.fit.primal - sorted_l1_norm(beta, lambda_m);
        }

        if (m > 0) {
            any_converged = any_converged || step.converged;
        }
        step.beta = beta;
        step.active_count = static_cast<Index>(support(beta).size());
        step.deviance = 2.0 * (loss - saturated);
        step.deviance_ratio = deviance_ratio(step.deviance, result.null_deviance).value_or(0.0);
        step.seconds = seconds_since(step_start);
        result.steps.push_back(std::move(step));

        const PathStep& last = result.steps.back();
        if (config.early_stop && m > 0) {
            result.termination = stop_reason(last, previous_deviance, static_cast<int>(m), n, config);
            if (result.termination != Termination::completed) {
                break;
            }
        }
        previous_deviance = last.deviance;
    }

    if (!any_converged) {
        throw SolverFailure("fit_path: solver failed to converge at every step");
    }
    result.seconds = seconds_since(start);
    return result;
}

} // namespace slope
