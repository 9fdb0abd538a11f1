#pragma once

#include <slope/sorted_l1.hpp>

#include <Eigen/Core>

namespace slope {

/// Predictors retained by a screening rule. `indices` are sorted ascending;
/// `predicted_count` is the k returned by the sparsity-pattern rule.
struct ScreenSet
{
    IndexSet indices;
    Index predicted_count = 0;
};

/// How the penalty decrement is paired with gradient magnitudes when forming
/// the strong-rule input.
enum class StrongRulePairing
{
    /// Decrement added to |grad| sorted in decreasing order (default).
    magnitude_rank,
    /// Decrement added to |grad| in original coordinate order.
    coordinate,
};

/// Batch-flush sparsity-pattern rule. `c` must be sorted non-increasing.
/// Returns positions {0, ..., k-1}.
ScreenSet screen_support(const Eigen::Ref<const Eigen::VectorXd>& c, const LambdaSeq& lambda);

/// Single-scalar version of screen_support; returns k.
Index screen_support_fast(const Eigen::Ref<const Eigen::VectorXd>& c, const LambdaSeq& lambda);

/// Strong rule for the sorted-L1 norm. Returns predictor indices kept when
/// moving from lambda_prev to lambda_next given the gradient at the previous
/// solution.
ScreenSet strong_rule_slope(const Eigen::Ref<const Eigen::VectorXd>& grad_prev,
                            const LambdaSeq& lambda_prev,
                            const LambdaSeq& lambda_next,
                            StrongRulePairing pairing = StrongRulePairing::magnitude_rank);

/// Lasso strong rule: keeps j iff |g_j| >= 2 lambda_next - lambda_prev.
ScreenSet strong_rule_lasso(const Eigen::Ref<const Eigen::VectorXd>& grad_prev,
                            double lambda_prev,
                            double lambda_next);

/// Predictors that violate the stationarity conditions at beta. `tol` is
/// relative to lambda[0]. An empty result means beta is KKT-optimal.
IndexSet detect_violations(const Eigen::Ref<const Eigen::VectorXd>& beta,
                           const Eigen::Ref<const Eigen::VectorXd>& grad_full,
                           const LambdaSeq& lambda,
                           double tol = 1e-4);

} // namespace slope
