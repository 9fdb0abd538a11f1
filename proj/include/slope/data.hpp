#pragma once

#include <slope/objectives.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slope {

enum class DesignKind
{
    equicorrelated,
    ar_chain,
};

enum class BetaScheme
{
    /// First k entries standard normal.
    gaussian_unit,
    /// First k entries drawn from {-2, 2}.
    pm2,
    /// First k entries drawn without replacement from {1, ..., 20}.
    grid_1_20,
    /// First k entries drawn without replacement from {1/40, ..., 20/40}.
    grid_fractions,
    /// First k rows of a p x K matrix each get one value from {1, ..., 20}
    /// (drawn without replacement) in a random column.
    multinomial_rowscatter,
};

std::string_view to_string(DesignKind kind);
std::string_view to_string(BetaScheme scheme);
DesignKind parse_design_kind(std::string_view name);
BetaScheme parse_beta_scheme(std::string_view name);

struct GenSpec
{
    Index n = 100;
    Index p = 100;
    Index k = 10;
    double rho = 0.0;
    DesignKind design = DesignKind::equicorrelated;
    Family family = Family::gaussian;
    BetaScheme beta = BetaScheme::gaussian_unit;
    double noise_scale = 1.0;
    int classes = 3;
    std::uint64_t seed = 1;
};

/// Generated or loaded data. `labels` holds the response in its file
/// encoding (multinomial classes 1..K, logistic 0/1).
struct Dataset
{
    Design design;
    Eigen::VectorXd labels;
    Response response;
    Coefficients true_beta;
};

/// Rows i.i.d. N(0, Sigma) with unit diagonal and constant off-diagonal rho.
Dataset gen_equicorrelated(const GenSpec& spec);
/// Columns X_1 ~ N(0, I), X_j ~ N(rho X_{j-1}, I).
Dataset gen_ar_chain(const GenSpec& spec);
Dataset generate(const GenSpec& spec);

/// FNV-1a over the design entries and response values.
std::uint64_t dataset_checksum(const Design& design, const Response& response);

/// CSV with a header row; `response_column` names the response.
Dataset read_csv(const std::filesystem::path& path, const std::string& response_column, Family family);
/// libsvm/svmlight sparse format, one-based strictly increasing indices.
Dataset read_libsvm(const std::filesystem::path& path, Family family);

/// Writes a dense design plus response column `y` (header x1..xp,y).
void write_csv(const std::filesystem::path& path, const Design& design, const Eigen::VectorXd& labels);

} // namespace slope
