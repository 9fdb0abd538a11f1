#include <slope/screening.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace slope {

namespace {

void check_sorted(const Eigen::Ref<const Eigen::VectorXd>& c, const LambdaSeq& lambda)
{
    if (c.size() != lambda.size()) {
        throw std::invalid_argument("screen_support: dimension mismatch");
    }
    for (Index i = 1; i < c.size(); ++i) {
        if (c[i] > c[i - 1]) {
            throw std::invalid_argument("screen_support: input not sorted non-increasing at position " +
                                        std::to_string(i));
        }
    }
}

IndexSet first_k(const IndexSet& order, Index k)
{
    IndexSet out(order.begin(), order.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

ScreenSet screen_support(const Eigen::Ref<const Eigen::VectorXd>& c, const LambdaSeq& lambda)
{
    check_sorted(c, lambda);
    ScreenSet out;
    Index batch_begin = 0;
    double batch_sum = 0.0;
    for (Index i = 0; i < c.size(); ++i) {
        batch_sum += c[i] - lambda[i];
        if (batch_sum >= 0.0) {
            for (Index j = batch_begin; j <= i; ++j) {
                out.indices.push_back(j);
            }
            batch_begin = i + 1;
            batch_sum = 0.0;
        }
    }
    out.predicted_count = static_cast<Index>(out.indices.size());
    return out;
}

Index screen_support_fast(const Eigen::Ref<const Eigen::VectorXd>& c, const LambdaSeq& lambda)
{
    check_sorted(c, lambda);
    const Index p = c.size();
    Index i = 1;
    Index k = 0;
    double s = 0.0;
    while (i + k <= p) {
        s += c[i + k - 1] - lambda[i + k - 1];
        if (s >= 0.0) {
            k += i;
            i = 1;
            s = 0.0;
        } else {
            ++i;
        }
    }
    return k;
}

ScreenSet strong_rule_slope(const Eigen::Ref<const Eigen::VectorXd>& grad_prev,
                            const LambdaSeq& lambda_prev,
                            const LambdaSeq& lambda_next,
                            StrongRulePairing pairing)
{
    const Index p = grad_prev.size();
    if (lambda_prev.size() != p || lambda_next.size() != p) {
        throw std::invalid_argument("strong_rule_slope: dimension mismatch");
    }
    for (Index i = 0; i < p; ++i) {
        if (lambda_next[i] > lambda_prev[i]) {
            throw std::invalid_argument("strong_rule_slope: lambda_next exceeds lambda_prev at position " +
                                        std::to_string(i));
        }
    }

    IndexSet order;
    Eigen::VectorXd c(p);
    if (pairing == StrongRulePairing::magnitude_rank) {
        order = magnitude_order(grad_prev);
        for (Index r = 0; r < p; ++r) {
            c[r] = std::abs(grad_prev[order[r]]) + lambda_prev[r] - lambda_next[r];
        }
    } else {
        order.resize(static_cast<std::size_t>(p));
        std::iota(order.begin(), order.end(), Index{0});
        for (Index j = 0; j < p; ++j) {
            c[j] = std::abs(grad_prev[j]) + lambda_prev[j] - lambda_next[j];
        }
    }

    if (!std::is_sorted(c.begin(), c.end(), std::greater<>())) {
        IndexSet pos(static_cast<std::size_t>(p));
        std::iota(pos.begin(), pos.end(), Index{0});
        std::stable_sort(pos.begin(), pos.end(), [&](Index a, Index b) { return c[a] > c[b]; });
        Eigen::VectorXd sorted(p);
        IndexSet reordered(static_cast<std::size_t>(p));
        for (Index r = 0; r < p; ++r) {
            sorted[r] = c[pos[r]];
            reordered[r] = order[pos[r]];
        }
        c = std::move(sorted);
        order = std::move(reordered);
    }

    ScreenSet out;
    out.predicted_count = screen_support_fast(c, lambda_next);
    out.indices = first_k(order, out.predicted_count);
    return out;
}

ScreenSet strong_rule_lasso(const Eigen::Ref<const Eigen::VectorXd>& grad_prev,
                            double lambda_prev,
                            double lambda_next)
{
    if (!(lambda_prev > 0.0) || !(lambda_next > 0.0) || lambda_next > lambda_prev) {
        throw std::invalid_argument("strong_rule_lasso: need 0 < lambda_next <= lambda_prev");
    }
    const double threshold = 2.0 * lambda_next - lambda_prev;
    ScreenSet out;
    for (Index j = 0; j < grad_prev.size(); ++j) {
        if (std::abs(grad_prev[j]) >= threshold) {
            out.indices.push_back(j);
        }
    }
    out.predicted_count = static_cast<Index>(out.indices.size());
    return out;
}

IndexSet detect_violations(const Eigen::Ref<const Eigen::VectorXd>& beta,
                           const Eigen::Ref<const Eigen::VectorXd>& grad_full,
                           const LambdaSeq& lambda,
                           double tol)
{
    const Index p = beta.size();
    if (grad_full.size() != p || lambda.size() != p) {
        throw std::invalid_argument("detect_violations: dimension mismatch");
    }
    const Eigen::VectorXd s = -grad_full;
    const double slack = tol * lambda[0];
    const Clustering clustering = ordering_and_ranks(beta);

    IndexSet out;
    for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
        const auto& block = clustering.clusters[c];
        const auto members = clustering.members(c);
        const bool zero = block.magnitude == 0.0;
        const auto verdict = cluster_verdict(members, block.begin, zero, beta, s, lambda, slack);
        if (verdict.feasible) {
            continue;
        }
        if (!zero) {
            out.insert(out.end(), members.begin(), members.end());
            continue;
        }

        // Zero set: flag the prefix selected by the batch rule on the tail of lambda.
        IndexSet zero_order(members.begin(), members.end());
        std::stable_sort(zero_order.begin(), zero_order.end(),
                         [&](Index a, Index b) { return std::abs(s[a]) > std::abs(s[b]); });
        const Index m = static_cast<Index>(zero_order.size());
        Eigen::VectorXd mags(m);
        for (Index i = 0; i < m; ++i) {
            mags[i] = std::abs(s[zero_order[i]]);
        }
        const LambdaSeq tail(lambda.weights().segment(block.begin, m));
        const ScreenSet flagged = screen_support(mags, tail);
        for (Index pos : flagged.indices) {
            out.push_back(zero_order[pos]);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace slope
