#include <slope/objectives.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace slope {

std::string_view to_string(Family family)
{
    switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::logistic: return "logistic";
    case Family::poisson: return "poisson";
    case Family::multinomial: return "multinomial";
    }
    return "unknown";
}

Family parse_family(std::string_view name)
{
    if (name == "gaussian") return Family::gaussian;
    if (name == "logistic") return Family::logistic;
    if (name == "poisson") return Family::poisson;
    if (name == "multinomial") return Family::multinomial;
    throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

// --- Design -----------------------------------------------------------------

Design::Design(DenseMatrix x) : x_(std::move(x))
{
    centers_ = Eigen::VectorXd::Zero(cols());
    scales_ = Eigen::VectorXd::Ones(cols());
}

Design::Design(SparseMatrix x) : x_(std::move(x))
{
    sparse_mut().makeCompressed();
    centers_ = Eigen::VectorXd::Zero(cols());
    scales_ = Eigen::VectorXd::Ones(cols());
}

SparseMatrix& Design::sparse_mut()
{
    return std::get<SparseMatrix>(x_);
}

Index Design::rows() const
{
    return std::visit([](const auto& m) { return static_cast<Index>(m.rows()); }, x_);
}

Index Design::cols() const
{
    return std::visit([](const auto& m) { return static_cast<Index>(m.cols()); }, x_);
}

Eigen::VectorXd Design::times(const Eigen::Ref<const Eigen::VectorXd>& v) const
{
    return std::visit([&](const auto& m) -> Eigen::VectorXd { return m * v; }, x_);
}

Eigen::VectorXd Design::transpose_times(const Eigen::Ref<const Eigen::VectorXd>& r) const
{
    return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.transpose() * r; }, x_);
}

double Design::col_dot(Index j, const Eigen::Ref<const Eigen::VectorXd>& r) const
{
    if (is_sparse()) {
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(sparse(), j); it; ++it) {
            acc += it.value() * r[it.row()];
        }
        return acc;
    }
    return dense().col(j).dot(r);
}

double Design::col_squared_norm(Index j) const
{
    if (is_sparse()) {
        return sparse().col(j).squaredNorm();
    }
    return dense().col(j).squaredNorm();
}

Design Design::select_columns(std::span<const Index> columns) const
{
    const Index m = static_cast<Index>(columns.size());
    if (is_sparse()) {
        const auto& x = sparse();
        std::vector<Eigen::Triplet<double>> triplets;
        for (Index k = 0; k < m; ++k) {
            for (SparseMatrix::InnerIterator it(x, columns[k]); it; ++it) {
                triplets.emplace_back(it.row(), k, it.value());
            }
        }
        SparseMatrix out(x.rows(), m);
        out.setFromTriplets(triplets.begin(), triplets.end());
        return Design(std::move(out));
    }
    const auto& x = dense();
    DenseMatrix out(x.rows(), m);
    for (Index k = 0; k < m; ++k) {
        out.col(k) = x.col(columns[k]);
    }
    return Design(std::move(out));
}

double Design::spectral_norm_squared(int iterations, double tol) const
{
    const Index p = cols();
    if (p == 0) {
        return 0.0;
    }
    Eigen::VectorXd v = Eigen::VectorXd::Ones(p) / std::sqrt(static_cast<double>(p));
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = transpose_times(times(v));
        const double norm = w.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        v = w / norm;
        if (std::abs(norm - estimate) <= tol * norm) {
            estimate = norm;
            break;
        }
        estimate = norm;
    }
    return estimate;
}

void Design::set_standardization(Eigen::VectorXd centers, Eigen::VectorXd scales)
{
    centers_ = std::move(centers);
    scales_ = std::move(scales);
    standardized_ = true;
}

// --- Response ---------------------------------------------------------------

Response make_response(Family family, const Eigen::Ref<const Eigen::VectorXd>& raw)
{
    Response out;
    out.family = family;
    out.values = raw;
    for (Index i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw[i])) {
            throw std::invalid_argument("response value " + std::to_string(i) + " is not finite");
        }
    }

    switch (family) {
    case Family::gaussian:
        break;
    case Family::logistic: {
        const bool has_minus = (raw.array() == -1.0).any();
        const bool has_zero = (raw.array() == 0.0).any();
        if (has_minus && has_zero) {
            throw std::invalid_argument("logistic response mixes {0,1} and {-1,1} encodings");
        }
        for (Index i = 0; i < raw.size(); ++i) {
            const double y = raw[i];
            if (y == 1.0) {
                out.values[i] = 1.0;
            } else if (y == 0.0 || y == -1.0) {
                out.values[i] = 0.0;
            } else {
                throw std::invalid_argument("logistic response value at row " + std::to_string(i) +
                                            " is not binary");
            }
        }
        break;
    }
    case Family::poisson:
        for (Index i = 0; i < raw.size(); ++i) {
            if (raw[i] < 0.0 || raw[i] != std::floor(raw[i])) {
                throw std::invalid_argument("poisson response at row " + std::to_string(i) +
                                            " is not a nonnegative integer");
            }
        }
        break;
    case Family::multinomial: {
        double max_label = 0.0;
        for (Index i = 0; i < raw.size(); ++i) {
            if (raw[i] < 1.0 || raw[i] != std::floor(raw[i])) {
                throw std::invalid_argument("multinomial label at row " + std::to_string(i) +
                                            " is not an integer >= 1");
            }
            max_label = std::max(max_label, raw[i]);
        }
        if (max_label < 2.0) {
            throw std::invalid_argument("multinomial response needs at least two classes");
        }
        out.classes = static_cast<int>(max_label);
        out.values = raw.array() - 1.0;
        break;
    }
    }
    return out;
}

// --- Standardization --------------------------------------------------------

Standardized standardize(const Design& design, const Response& response)
{
    const Index n = design.rows();
    const Index p = design.cols();
    if (n < 2) {
        throw std::invalid_argument("standardize: need at least two observations");
    }
    if (response.size() != n) {
        throw std::invalid_argument("standardize: response length does not match design rows");
    }

    Eigen::VectorXd centers = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd scales(p);

    if (design.is_sparse()) {
        SparseMatrix x = design.sparse();
        for (Index j = 0; j < p; ++j) {
            const double norm = x.col(j).norm();
            if (norm == 0.0) {
                throw std::invalid_argument("standardize: column " + std::to_string(j) + " is constant (all zero)");
            }
            scales[j] = norm;
            x.col(j) /= norm;
        }
        Design out(std::move(x));
        out.set_standardization(centers, scales);
        Response r = response;
        if (r.family == Family::gaussian) {
            r.values.array() -= r.values.mean();
            r.centered = true;
        }
        return {std::move(out), std::move(r)};
    }

    DenseMatrix x = design.dense();
    for (Index j = 0; j < p; ++j) {
        auto col = x.col(j);
        if (col.maxCoeff() == col.minCoeff()) {
            throw std::invalid_argument("standardize: column " + std::to_string(j) + " is constant");
        }
        centers[j] = col.mean();
        col.array() -= centers[j];
        scales[j] = col.norm();
        col /= scales[j];
    }
    Design out(std::move(x));
    out.set_standardization(centers, scales);
    Response r = response;
    if (r.family == Family::gaussian) {
        r.values.array() -= r.values.mean();
        r.centered = true;
    }
    return {std::move(out), std::move(r)};
}

// --- Losses -----------------------------------------------------------------

namespace {

double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_eta(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& eta)
{
    if (eta.rows() != response.size() || eta.cols() != response.coef_columns()) {
        throw std::invalid_argument("linear predictor shape does not match response");
    }
}

} // namespace

Eigen::MatrixXd linear_predictor(const Design& design, const Coefficients& beta, int coef_columns)
{
    const Index p = design.cols();
    if (beta.size() != p * coef_columns) {
        throw std::invalid_argument("linear_predictor: coefficient length does not match design");
    }
    Eigen::MatrixXd eta(design.rows(), coef_columns);
    for (int l = 0; l < coef_columns; ++l) {
        eta.col(l) = design.times(beta.segment(l * p, p));
    }
    return eta;
}

double loss_from_eta(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& eta)
{
    check_eta(response, eta);
    const auto& y = response.values;
    const Index n = response.size();
    double total = 0.0;
    switch (response.family) {
    case Family::gaussian:
        total = 0.5 * (y - eta.col(0)).squaredNorm();
        break;
    case Family::logistic:
        for (Index i = 0; i < n; ++i) {
            total += softplus(eta(i, 0)) - y[i] * eta(i, 0);
        }
        break;
    case Family::poisson:
        for (Index i = 0; i < n; ++i) {
            total += std::exp(eta(i, 0)) - y[i] * eta(i, 0);
        }
        break;
    case Family::multinomial:
        for (Index i = 0; i < n; ++i) {
            const double top = eta.row(i).maxCoeff();
            const double lse = top + std::log((eta.row(i).array() - top).exp().sum());
            total += lse - eta(i, static_cast<Index>(y[i]));
        }
        break;
    }
    return total;
}

Eigen::MatrixXd loss_derivative(const Response& response, const Eigen::Ref<const Eigen::MatrixXd>& eta)
{
    check_eta(response, eta);
    const auto& y = response.values;
    const Index n = response.size();
    Eigen::MatrixXd w(n, eta.cols());
    switch (response.family) {
    case Family::gaussian:
        w.col(0) = eta.col(0) - y;
        break;
    case Family::logistic:
        for (Index i = 0; i < n; ++i) {
            w(i, 0) = sigmoid(eta(i, 0)) - y[i];
        }
        break;
    case Family::poisson:
        for (Index i = 0; i < n; ++i) {
            w(i, 0) = std::exp(eta(i, 0)) - y[i];
        }
        break;
    case Family::multinomial:
        for (Index i = 0; i < n; ++i) {
            const double top = eta.row(i).maxCoeff();
            Eigen::RowVectorXd e = (eta.row(i).array() - top).exp();
            w.row(i) = e / e.sum();
            w(i, static_cast<Index>(y[i])) -= 1.0;
        }
        break;
    }
    return w;
}

double saturated_loss(const Response& response)
{
    if (response.family != Family::poisson) {
        return 0.0;
    }
    double total = 0.0;
    for (Index i = 0; i < response.size(); ++i) {
        const double y = response.values[i];
        if (y > 0.0) {
            total += y - y * std::log(y);
        }
    }
    return total;
}

Eigen::VectorXd gradient_from_derivative(const Design& design, const Eigen::Ref<const Eigen::MatrixXd>& w)
{
    const Index p = design.cols();
    Eigen::VectorXd g(p * w.cols());
    for (Index l = 0; l < w.cols(); ++l) {
        g.segment(l * p, p) = design.transpose_times(w.col(l));
    }
    return g;
}

double loss_value(const Design& design, const Response& response, const Coefficients& beta)
{
    const Eigen::MatrixXd eta = linear_predictor(design, beta, response.coef_columns());
    if (!eta.allFinite()) {
        throw std::domain_error("loss_value: linear predictor is not finite");
    }
    return loss_from_eta(response, eta);
}

Eigen::VectorXd loss_gradient(const Design& design, const Response& response, const Coefficients& beta)
{
    const Eigen::MatrixXd eta = linear_predictor(design, beta, response.coef_columns());
    if (!eta.allFinite()) {
        throw std::domain_error("loss_gradient: linear predictor is not finite");
    }
    return gradient_from_derivative(design, loss_derivative(response, eta));
}

double deviance(const Design& design, const Response& response, const Coefficients& beta)
{
    return 2.0 * (loss_value(design, response, beta) - saturated_loss(response));
}

double null_deviance(const Design& design, const Response& response)
{
    return deviance(design, response, Coefficients::Zero(design.cols() * response.coef_columns()));
}

std::optional<double> deviance_ratio(double dev, double null_dev)
{
    if (null_dev == 0.0) {
        return std::nullopt;
    }
    return 1.0 - dev / null_dev;
}

} // namespace slope
