#include <slope/sorted_l1.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace slope {

namespace {

void require_same_size(Index a, Index b, const char* what)
{
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
    }
}

} // namespace

LambdaSeq::LambdaSeq(Eigen::VectorXd weights) : weights_(std::move(weights))
{
    if (weights_.size() < 1) {
        throw std::invalid_argument("LambdaSeq: empty weight vector");
    }
    for (Index i = 0; i < weights_.size(); ++i) {
        if (!std::isfinite(weights_[i]) || weights_[i] < 0.0) {
            throw std::invalid_argument("LambdaSeq: weight " + std::to_string(i) + " is negative or not finite");
        }
        if (i > 0 && weights_[i] > weights_[i - 1]) {
            throw std::invalid_argument("LambdaSeq: weights must be non-increasing (index " + std::to_string(i) + ")");
        }
    }
}

LambdaSeq LambdaSeq::scaled(double factor) const
{
    if (!(factor >= 0.0)) {
        throw std::invalid_argument("LambdaSeq::scaled: negative factor");
    }
    return LambdaSeq(weights_ * factor);
}

LambdaSeq LambdaSeq::head(Index m) const
{
    if (m < 1 || m > size()) {
        throw std::invalid_argument("LambdaSeq::head: length out of range");
    }
    return LambdaSeq(weights_.head(m));
}

Eigen::VectorXd cumsum(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    Eigen::VectorXd out(x.size());
    std::partial_sum(x.begin(), x.end(), out.begin());
    return out;
}

IndexSet magnitude_order(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    IndexSet order(static_cast<std::size_t>(x.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(x[a]) > std::abs(x[b]); });
    return order;
}

Clustering ordering_and_ranks(const Eigen::Ref<const Eigen::VectorXd>& beta)
{
    Clustering out;
    out.ordering = magnitude_order(beta);
    const Index p = beta.size();
    out.ranks.resize(static_cast<std::size_t>(p));
    for (Index r = 0; r < p; ++r) {
        out.ranks[out.ordering[r]] = r;
    }

    Index begin = 0;
    for (Index r = 1; r <= p; ++r) {
        bool split = r == p;
        if (!split) {
            const double prev = std::abs(beta[out.ordering[r - 1]]);
            const double cur = std::abs(beta[out.ordering[r]]);
            if (cur == 0.0) {
                split = prev != 0.0;
            } else {
                split = prev - cur > kClusterTolerance * std::max(1.0, prev);
            }
        }
        if (split) {
            out.clusters.push_back({begin, r, std::abs(beta[out.ordering[begin]])});
            begin = r;
        }
    }
    return out;
}

double sorted_l1_norm(const Eigen::Ref<const Eigen::VectorXd>& beta, const LambdaSeq& lambda)
{
    require_same_size(beta.size(), lambda.size(), "sorted_l1_norm");
    Eigen::VectorXd mags = beta.cwiseAbs();
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return mags.dot(lambda.weights());
}

Eigen::VectorXd prox_sorted_l1(const Eigen::Ref<const Eigen::VectorXd>& v, const LambdaSeq& lambda)
{
    const Index p = v.size();
    require_same_size(p, lambda.size(), "prox_sorted_l1");

    const IndexSet order = magnitude_order(v);

    struct Block
    {
        Index begin;
        Index end;
        double sum;
        double mean() const { return sum / static_cast<double>(end - begin); }
    };
    std::vector<Block> stack;
    stack.reserve(static_cast<std::size_t>(p));

    for (Index i = 0; i < p; ++i) {
        Block cur{i, i + 1, std::abs(v[order[i]]) - lambda[i]};
        // Merge while the fitted sequence would increase.
        while (!stack.empty() && stack.back().mean() < cur.mean()) {
            cur.begin = stack.back().begin;
            cur.sum += stack.back().sum;
            stack.pop_back();
        }
        stack.push_back(cur);
    }

    Eigen::VectorXd x(p);
    for (const auto& b : stack) {
        const double level = std::max(b.mean(), 0.0);
        for (Index i = b.begin; i < b.end; ++i) {
            const Index j = order[i];
            x[j] = level == 0.0 ? 0.0 : std::copysign(level, v[j]);
        }
    }
    return x;
}

SubgradientVerdict cluster_verdict(std::span<const Index> members,
                                   Index lambda_offset,
                                   bool zero_cluster,
                                   const Eigen::Ref<const Eigen::VectorXd>& beta,
                                   const Eigen::Ref<const Eigen::VectorXd>& s,
                                   const LambdaSeq& lambda,
                                   double tol)
{
    std::vector<double> mags;
    mags.reserve(members.size());
    for (Index j : members) {
        mags.push_back(std::abs(s[j]));
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());

    SubgradientVerdict verdict;
    double running = 0.0;
    for (std::size_t i = 0; i < mags.size(); ++i) {
        running += mags[i] - lambda[lambda_offset + static_cast<Index>(i)];
        verdict.worst_excess = std::max(verdict.worst_excess, running);
    }
    if (!zero_cluster) {
        verdict.equality_residual = running;
        for (Index j : members) {
            if (s[j] * beta[j] < 0.0 && std::abs(s[j]) > tol) {
                verdict.sign_mismatch = true;
            }
        }
    }
    verdict.feasible = verdict.worst_excess <= tol && std::abs(verdict.equality_residual) <= tol &&
                       !verdict.sign_mismatch;
    return verdict;
}

SubgradientVerdict subdiff_feasible(const Eigen::Ref<const Eigen::VectorXd>& beta,
                                    const Eigen::Ref<const Eigen::VectorXd>& s,
                                    const LambdaSeq& lambda,
                                    double tol)
{
    require_same_size(beta.size(), s.size(), "subdiff_feasible");
    require_same_size(beta.size(), lambda.size(), "subdiff_feasible");
    if (!(tol >= 0.0)) {
        throw std::invalid_argument("subdiff_feasible: negative tolerance");
    }

    const Clustering clustering = ordering_and_ranks(beta);
    SubgradientVerdict verdict;
    for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
        const auto& block = clustering.clusters[c];
        const auto v = cluster_verdict(clustering.members(c), block.begin, block.magnitude == 0.0, beta, s,
                                       lambda, tol);
        verdict.worst_excess = std::max(verdict.worst_excess, v.worst_excess);
        if (std::abs(v.equality_residual) > std::abs(verdict.equality_residual)) {
            verdict.equality_residual = v.equality_residual;
        }
        verdict.sign_mismatch = verdict.sign_mismatch || v.sign_mismatch;
    }
    verdict.feasible = verdict.worst_excess <= tol && std::abs(verdict.equality_residual) <= tol &&
                       !verdict.sign_mismatch;
    return verdict;
}

} // namespace slope
