#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace slope {

using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

/// Non-increasing, nonnegative penalty weights for the sorted-L1 norm.
class LambdaSeq
{
public:
    explicit LambdaSeq(Eigen::VectorXd weights);

    Index size() const { return weights_.size(); }
    double operator[](Index i) const { return weights_[i]; }
    const Eigen::VectorXd& weights() const { return weights_; }

    /// Sequence scaled by a nonnegative factor.
    LambdaSeq scaled(double factor) const;
    /// The m largest weights (the leading block).
    LambdaSeq head(Index m) const;

    double sum() const { return weights_.sum(); }

private:
    Eigen::VectorXd weights_;
};

/// Ordering, ranks and magnitude clusters of a vector.
///
/// All indices are zero-based. `ordering[r]` is the index holding the r-th
/// largest magnitude, `ranks[i]` the position of index i in that ordering.
/// Clusters are listed in ordering position, each as a contiguous block
/// `[begin, end)` of positions; the zero cluster, if present, is last.
struct Clustering
{
    struct Block
    {
        Index begin;
        Index end;
        double magnitude;
    };

    IndexSet ordering;
    IndexSet ranks;
    std::vector<Block> clusters;

    /// Members of cluster c, in ordering order.
    std::span<const Index> members(std::size_t c) const
    {
        const auto& b = clusters[c];
        return {ordering.data() + b.begin, static_cast<std::size_t>(b.end - b.begin)};
    }
};

struct SubgradientVerdict
{
    bool feasible = true;
    double worst_excess = 0.0;
    double equality_residual = 0.0;
    bool sign_mismatch = false;
};

/// Relative tolerance for deciding that two magnitudes belong to one cluster.
inline constexpr double kClusterTolerance = 1e-10;

Eigen::VectorXd cumsum(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Stable ordering by decreasing magnitude with clusters of (numerically)
/// equal magnitude.
Clustering ordering_and_ranks(const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Permutation sorting |x| in decreasing order, ties by ascending index.
IndexSet magnitude_order(const Eigen::Ref<const Eigen::VectorXd>& x);

double sorted_l1_norm(const Eigen::Ref<const Eigen::VectorXd>& beta, const LambdaSeq& lambda);

/// argmin_x 0.5 ||x - v||^2 + J(x; lambda), exact (stack-based pool adjacent
/// violators on |v| sorted minus lambda).
Eigen::VectorXd prox_sorted_l1(const Eigen::Ref<const Eigen::VectorXd>& v, const LambdaSeq& lambda);

/// Subgradient conditions for one magnitude cluster of beta occupying
/// ordering positions starting at `lambda_offset`.
SubgradientVerdict cluster_verdict(std::span<const Index> members,
                                   Index lambda_offset,
                                   bool zero_cluster,
                                   const Eigen::Ref<const Eigen::VectorXd>& beta,
                                   const Eigen::Ref<const Eigen::VectorXd>& s,
                                   const LambdaSeq& lambda,
                                   double tol);

/// Membership test s in dJ(beta; lambda), checked cluster by cluster.
SubgradientVerdict subdiff_feasible(const Eigen::Ref<const Eigen::VectorXd>& beta,
                                    const Eigen::Ref<const Eigen::VectorXd>& s,
                                    const LambdaSeq& lambda,
                                    double tol = 1e-9);

} // namespace slope
