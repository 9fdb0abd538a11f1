#pragma once

#include <slope/sorted_l1.hpp>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace slope {

enum class Family
{
    gaussian,
    logistic,
    poisson,
    multinomial,
};

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Predictor matrix, dense or compressed sparse columns, with the
/// standardization applied to it.
class Design
{
public:
    explicit Design(DenseMatrix x);
    explicit Design(SparseMatrix x);

    Index rows() const;
    Index cols() const;
    bool is_sparse() const { return std::holds_alternative<SparseMatrix>(x_); }

    const DenseMatrix& dense() const { return std::get<DenseMatrix>(x_); }
    const SparseMatrix& sparse() const { return std::get<SparseMatrix>(x_); }

    Eigen::VectorXd times(const Eigen::Ref<const Eigen::VectorXd>& v) const;
    Eigen::VectorXd transpose_times(const Eigen::Ref<const Eigen::VectorXd>& r) const;
    double col_dot(Index j, const Eigen::Ref<const Eigen::VectorXd>& r) const;
    /// Sum of squares of column j.
    double col_squared_norm(Index j) const;

    /// New design holding only the given columns, in the given order.
    Design select_columns(std::span<const Index> columns) const;

    /// Largest eigenvalue of X^T X, by power iteration.
    double spectral_norm_squared(int iterations = 100, double tol = 1e-6) const;

    const Eigen::VectorXd& column_centers() const { return centers_; }
    const Eigen::VectorXd& column_scales() const { return scales_; }
    bool standardized() const { return standardized_; }

    void set_standardization(Eigen::VectorXd centers, Eigen::VectorXd scales);

private:
    SparseMatrix& sparse_mut();

    std::variant<DenseMatrix, SparseMatrix> x_;
    Eigen::VectorXd centers_;
    Eigen::VectorXd scales_;
    bool standardized_ = false;
};

/// Family-typed response. Multinomial labels are stored zero-based as
/// 0, ..., classes - 1.
struct Response
{
    Family family = Family::gaussian;
    Eigen::VectorXd values;
    int classes = 1;
    bool centered = false;

    Index size() const { return values.size(); }
    /// Number of coefficient columns (K for multinomial, 1 otherwise).
    int coef_columns() const { return family == Family::multinomial ? classes : 1; }
};

/// Validates raw labels for the family and converts them to the internal
/// encoding: logistic accepts {0,1} or {-1,1}; multinomial accepts 1..K.
Response make_response(Family family, const Eigen::Ref<const Eigen::VectorXd>& raw);

/// Coefficients are stored flattened column-major: entry (j, l) of the p x K
/// matrix lives at j + l * p.
using Coefficients = Eigen::VectorXd;

struct Standardized
{
    Design design;
    Response response;
};

/// Dense: center columns and scale them to unit l2 norm. Sparse: scale only.
/// Gaussian responses are centered.
Standardized standardize(const Design& design, const Response& response);

/// Linear predictor as an n x K matrix.
Eigen::MatrixXd linear_predictor(const Design& design, const Coefficients& beta, int coef_columns);

/// Loss value from the linear predictor.
double loss_from_eta(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& eta);
/// Derivative of the loss with respect to the linear predictor (n x K).
Eigen::MatrixXd loss_derivative(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& eta);
/// Loss of the saturated model.
double saturated_loss(const Response& response);
/// X^T W flattened into a gradient of length p * K.
Eigen::VectorXd gradient_from_derivative(const Design& design, const Eigen::Ref<const Eigen::MatrixXd>& w);

double loss_value(const Design& design, const Response& response, const Coefficients& beta);
Eigen::VectorXd loss_gradient(const Design& design, const Response& response, const Coefficients& beta);

double deviance(const Design& design, const Response& response, const Coefficients& beta);
double null_deviance(const Design& design, const Response& response);
/// 1 - dev/null_dev; nullopt when the null deviance is zero.
std::optional<double> deviance_ratio(double dev, double null_dev);

} // namespace slope
