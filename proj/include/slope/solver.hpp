#pragma once

#include <slope/objectives.hpp>
#include <slope/sorted_l1.hpp>

#include <span>
#include <stdexcept>

namespace slope {

/// Numerical failure of the solver (as opposed to invalid input).
class SolverFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct SolverConfig
{
    int max_iterations = 100000;
    /// Duality gap as a fraction of the primal objective.
    double gap_tol = 1e-5;
    /// Worst positive cumulative-sum excess of |grad| over lambda, divided by sum(lambda).
    double infeas_tol = 1e-3;
    /// Smallest step size before the backtracking search gives up.
    double min_step = 1e-20;
    bool compute_full_gradient = true;
};

/// Optional precomputed quantities that save work across repeated solves.
struct SolverHints
{
    /// Largest eigenvalue of X_E^T X_E for the working set; <= 0 means unknown.
    double spectral_norm_sq = 0.0;
};

struct GapInfo
{
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double infeasibility = 0.0;

    double relative_gap() const;
};

struct SolverResult
{
    Coefficients beta;
    /// Gradient over all p * K coefficients; empty unless requested.
    Eigen::VectorXd gradient_full;
    /// Linear predictor at beta (n x K).
    Eigen::MatrixXd eta;
    /// Loss derivative with respect to the linear predictor at beta (n x K).
    Eigen::MatrixXd derivative;
    double primal = 0.0;
    double gap = 0.0;
    double infeasibility = 0.0;
    int iterations = 0;
    bool converged = false;

    double relative_gap() const;
};

/// Duality gap and infeasibility from precomputed state. `beta_values` and
/// `gradient` cover the same coefficients, which are paired with the leading
/// weights of `lambda`.
GapInfo gap_from_state(const Response& response,
                       const Eigen::Ref<const Eigen::MatrixXd>& eta,
                       const Eigen::Ref<const Eigen::MatrixXd>& derivative,
                       const Eigen::Ref<const Eigen::VectorXd>& beta_values,
                       const Eigen::Ref<const Eigen::VectorXd>& gradient,
                       const LambdaSeq& lambda);

/// Duality gap of the full problem at beta.
GapInfo duality_gap(const Design& design, const Response& response, const Coefficients& beta, const LambdaSeq& lambda);

/// Sum of the loss conjugate at the negated dual point theta (n x K).
double conjugate_sum(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& theta);

/// Accelerated proximal gradient on the coefficients listed in `subset`
/// (indices into the flattened coefficient vector). The restricted problem
/// uses the |subset| largest weights of `lambda`.
SolverResult fista_solve(const Design& design,
                         const Response& response,
                         const LambdaSeq& lambda,
                         std::span<const Index> subset,
                         const Coefficients& warm_start,
                         const SolverConfig& config = {},
                         const SolverHints& hints = {});

} // namespace slope
