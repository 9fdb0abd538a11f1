#pragma once

#include <slope/objectives.hpp>
#include <slope/screening.hpp>
#include <slope/solver.hpp>

#include <string>
#include <vector>

namespace slope {

enum class Screening
{
    none,
    strong,
};

enum class Driver
{
    strong_set,
    previous_set,
};

std::string_view to_string(Screening screening);
std::string_view to_string(Driver driver);
Screening parse_screening(std::string_view name);
Driver parse_driver(std::string_view name);

struct PathConfig
{
    double q = 0.1;
    int length = 100;
    /// Terminal ratio sigma_l / sigma_1; <= 0 selects 1e-2 if n < p, else 1e-4.
    double terminal_ratio = 0.0;
    Screening screening = Screening::strong;
    Driver driver = Driver::strong_set;
    StrongRulePairing pairing = StrongRulePairing::magnitude_rank;

    bool early_stop = true;
    double dev_change_tol = 1e-5;
    double dev_ratio_max = 0.995;
    /// First (zero-based) step at which the deviance-change rule is applied.
    int dev_change_min_step = 4;

    /// Stationarity slack relative to lambda_1 for the safeguard checks.
    double kkt_tol = 1e-4;
    /// Cap on safeguard refits per step before giving up on screening.
    int max_refits = 100;

    SolverConfig solver;
};

/// Instrumentation of the safeguard loop for one step.
enum class DriverEvent
{
    solve,
    strong_check_clean,
    strong_check_violation,
    full_check_clean,
    full_check_violation,
    certificate_refit,
};

struct PathStep
{
    double sigma = 0.0;
    Coefficients beta;
    Index active_count = 0;
    /// Size of the final working set (all coefficients when unscreened).
    Index screened_count = 0;
    /// Size of the strong-rule set for this step.
    Index strong_count = 0;
    /// Coefficients outside the working set flagged by the KKT check.
    Index violation_count = 0;
    int refits = 0;
    int solves = 0;
    int solver_iterations = 0;
    /// Sum over solves of working-set size times iterations.
    double solver_work = 0.0;
    double deviance = 0.0;
    double deviance_ratio = 0.0;
    double relative_gap = 0.0;
    double infeasibility = 0.0;
    bool converged = true;
    double seconds = 0.0;
    std::vector<DriverEvent> trace;
};

enum class Termination
{
    completed,
    too_many_clusters,
    deviance_change,
    deviance_ratio,
};

std::string_view to_string(Termination reason);

struct PathResult
{
    LambdaSeq lambda{Eigen::VectorXd::Ones(1)};
    std::vector<double> sigmas;
    std::vector<PathStep> steps;
    Termination termination = Termination::completed;
    double null_deviance = 0.0;
    double seconds = 0.0;
};

/// lambda_i = Phi^{-1}(1 - q i / (2p)), i = 1..p.
LambdaSeq bh_lambda(Index p, double q);

/// Standard normal quantile.
double normal_quantile(double prob);

/// Smallest sigma for which zero is optimal under sigma * lambda.
double sigma_max(const Eigen::Ref<const Eigen::VectorXd>& grad_at_zero, const LambdaSeq& lambda);

/// l log-spaced values from sigma1 down to t * sigma1.
std::vector<double> sigma_grid(double sigma1, double t, int l);

/// Everything a driver needs to move from one step to the next.
struct StepContext
{
    const Design& design;
    const Response& response;
    LambdaSeq lambda_next;
    /// Strong-rule set at the new penalty.
    IndexSet strong_set;
    /// Nonzero coefficients at the previous step.
    IndexSet previous_active;
    Coefficients warm_start;
    const PathConfig& config;
    /// Largest eigenvalue of X^T X if known, else 0.
    double spectral_norm_sq = 0.0;
};

struct StepSolution
{
    SolverResult fit;
    Index working_set_size = 0;
    Index violation_count = 0;
    int refits = 0;
    int solves = 0;
    int iterations = 0;
    double work = 0.0;
    std::vector<DriverEvent> trace;
};

/// E = strong set union previous active set; refit on full-set violations.
StepSolution strong_set_drive(const StepContext& ctx);
/// E = previous active set; refit on violations inside the strong set, then
/// in the full set.
StepSolution previous_set_drive(const StepContext& ctx);

/// Early-stopping decision after zero-based step `step`; `completed` means
/// keep going.
Termination stop_reason(const PathStep& last, double previous_deviance, int step, Index n, const PathConfig& config);

/// Fits the regularization path on standardized data.
PathResult fit_path(const Design& design, const Response& response, const PathConfig& config);

/// Number of distinct nonzero magnitudes in beta.
Index unique_magnitudes(const Eigen::Ref<const Eigen::VectorXd>& beta);

IndexSet support(const Eigen::Ref<const Eigen::VectorXd>& beta);

} // namespace slope
