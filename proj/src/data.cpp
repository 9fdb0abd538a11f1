#include <slope/data.hpp>
#include <slope/random.hpp>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace slope {

namespace {

// Stream tags for Rng::stream.
constexpr std::uint64_t kTagRows = 1;
constexpr std::uint64_t kTagColumns = 2;
constexpr std::uint64_t kTagBeta = 3;
constexpr std::uint64_t kTagNoise = 4;
constexpr std::uint64_t kTagResponse = 5;

void validate(const GenSpec& spec)
{
    if (spec.n < 1 || spec.p < 1) {
        throw std::invalid_argument("GenSpec: n and p must be positive");
    }
    if (spec.k < 0 || spec.k > spec.p) {
        throw std::invalid_argument("GenSpec: need 0 <= k <= p");
    }
    if (!(spec.noise_scale >= 0.0)) {
        throw std::invalid_argument("GenSpec: noise_scale must be nonnegative");
    }
    if (spec.family == Family::multinomial && spec.classes < 2) {
        throw std::invalid_argument("GenSpec: multinomial needs at least two classes");
    }
    const bool grid = spec.beta == BetaScheme::grid_1_20 || spec.beta == BetaScheme::grid_fractions ||
                      spec.beta == BetaScheme::multinomial_rowscatter;
    if (grid && spec.k > 20) {
        throw std::invalid_argument("GenSpec: grid coefficient schemes sample without replacement from 20 values; need k <= 20");
    }
    if (spec.beta == BetaScheme::multinomial_rowscatter && spec.family != Family::multinomial) {
        throw std::invalid_argument("GenSpec: multinomial_rowscatter requires the multinomial family");
    }
}

/// k distinct draws from {1, ..., 20} by partial Fisher-Yates.
std::vector<double> draw_grid(Rng& rng, Index k)
{
    std::vector<double> pool(20);
    std::iota(pool.begin(), pool.end(), 1.0);
    for (Index i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(20 - static_cast<std::uint64_t>(i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

Coefficients draw_beta(const GenSpec& spec)
{
    const int K = spec.family == Family::multinomial ? spec.classes : 1;
    Coefficients beta = Coefficients::Zero(spec.p * K);
    Rng rng = Rng::stream(spec.seed, kTagBeta);

    std::vector<double> values(static_cast<std::size_t>(spec.k));
    switch (spec.beta) {
    case BetaScheme::gaussian_unit:
        for (auto& v : values) v = rng.normal();
        break;
    case BetaScheme::pm2:
        for (auto& v : values) v = rng.below(2) == 0 ? -2.0 : 2.0;
        break;
    case BetaScheme::grid_1_20:
    case BetaScheme::multinomial_rowscatter:
        values = draw_grid(rng, spec.k);
        break;
    case BetaScheme::grid_fractions:
        values = draw_grid(rng, spec.k);
        for (auto& v : values) v /= 40.0;
        break;
    }

    for (Index j = 0; j < spec.k; ++j) {
        const Index column = K == 1 ? 0 : static_cast<Index>(rng.below(static_cast<std::uint64_t>(K)));
        beta[j + column * spec.p] = values[static_cast<std::size_t>(j)];
    }
    return beta;
}

Dataset finish(const GenSpec& spec, DenseMatrix x)
{
    Dataset out{Design(std::move(x)), {}, {}, draw_beta(spec)};
    const int K = spec.family == Family::multinomial ? spec.classes : 1;
    const Eigen::MatrixXd eta = linear_predictor(out.design, out.true_beta, K);
    const Index n = spec.n;
    Eigen::VectorXd labels(n);
    Rng noise = Rng::stream(spec.seed, kTagNoise);
    Rng draws = Rng::stream(spec.seed, kTagResponse);

    switch (spec.family) {
    case Family::gaussian:
        for (Index i = 0; i < n; ++i) {
            labels[i] = eta(i, 0) + spec.noise_scale * noise.normal();
        }
        break;
    case Family::logistic:
        for (Index i = 0; i < n; ++i) {
            labels[i] = eta(i, 0) + spec.noise_scale * noise.normal() > 0.0 ? 1.0 : 0.0;
        }
        break;
    case Family::poisson:
        for (Index i = 0; i < n; ++i) {
            if (eta(i, 0) > 30.0) {
                throw std::domain_error("gen: poisson mean exp(" + std::to_string(eta(i, 0)) +
                                        ") overflows; shrink the coefficients");
            }
            labels[i] = static_cast<double>(draws.poisson(std::exp(eta(i, 0))));
        }
        break;
    case Family::multinomial: {
        std::vector<double> probs(static_cast<std::size_t>(K));
        for (Index i = 0; i < n; ++i) {
            const double top = eta.row(i).maxCoeff();
            double total = 0.0;
            for (int l = 0; l < K; ++l) {
                probs[l] = std::exp(eta(i, l) - top);
                total += probs[l];
            }
            for (auto& pr : probs) pr /= total;
            labels[i] = static_cast<double>(draws.categorical(probs) + 1);
        }
        break;
    }
    }

    out.labels = labels;
    if (spec.family == Family::multinomial) {
        // Keep the class count even if a class happens not to be drawn.
        out.response.family = Family::multinomial;
        out.response.values = labels.array() - 1.0;
        out.response.classes = K;
    } else {
        out.response = make_response(spec.family, labels);
    }
    return out;
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\n\"");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n\"");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out)
{
    const std::string t = trim(text);
    if (t.empty()) {
        return false;
    }
    char* end = nullptr;
    errno = 0;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && errno != ERANGE;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

} // namespace

std::string_view to_string(DesignKind kind)
{
    return kind == DesignKind::equicorrelated ? "equicorrelated" : "ar-chain";
}

std::string_view to_string(BetaScheme scheme)
{
    switch (scheme) {
    case BetaScheme::gaussian_unit: return "gaussian_unit";
    case BetaScheme::pm2: return "pm2";
    case BetaScheme::grid_1_20: return "grid_1_20";
    case BetaScheme::grid_fractions: return "grid_fractions";
    case BetaScheme::multinomial_rowscatter: return "multinomial_rowscatter";
    }
    return "unknown";
}

DesignKind parse_design_kind(std::string_view name)
{
    if (name == "equicorrelated") return DesignKind::equicorrelated;
    if (name == "ar-chain" || name == "ar_chain") return DesignKind::ar_chain;
    throw std::invalid_argument("unknown design kind '" + std::string(name) + "'");
}

BetaScheme parse_beta_scheme(std::string_view name)
{
    if (name == "gaussian_unit") return BetaScheme::gaussian_unit;
    if (name == "pm2") return BetaScheme::pm2;
    if (name == "grid_1_20") return BetaScheme::grid_1_20;
    if (name == "grid_fractions") return BetaScheme::grid_fractions;
    if (name == "multinomial_rowscatter") return BetaScheme::multinomial_rowscatter;
    throw std::invalid_argument("unknown coefficient scheme '" + std::string(name) + "'");
}

Dataset gen_equicorrelated(const GenSpec& spec)
{
    validate(spec);
    if (!(spec.rho >= 0.0 && spec.rho < 1.0)) {
        throw std::invalid_argument("gen_equicorrelated: rho must lie in [0, 1)");
    }
    const double shared = std::sqrt(spec.rho);
    const double own = std::sqrt(1.0 - spec.rho);

    Eigen::VectorXd z(spec.n);
    Rng rows = Rng::stream(spec.seed, kTagRows);
    for (Index i = 0; i < spec.n; ++i) {
        z[i] = rows.normal();
    }
    DenseMatrix x(spec.n, spec.p);
    for (Index j = 0; j < spec.p; ++j) {
        Rng col = Rng::stream(spec.seed, kTagColumns, static_cast<std::uint64_t>(j));
        for (Index i = 0; i < spec.n; ++i) {
            x(i, j) = shared * z[i] + own * col.normal();
        }
    }
    return finish(spec, std::move(x));
}

Dataset gen_ar_chain(const GenSpec& spec)
{
    validate(spec);
    if (!std::isfinite(spec.rho)) {
        throw std::invalid_argument("gen_ar_chain: rho must be finite");
    }
    DenseMatrix x(spec.n, spec.p);
    for (Index j = 0; j < spec.p; ++j) {
        Rng col = Rng::stream(spec.seed, kTagColumns, static_cast<std::uint64_t>(j));
        for (Index i = 0; i < spec.n; ++i) {
            const double previous = j == 0 ? 0.0 : spec.rho * x(i, j - 1);
            x(i, j) = previous + col.normal();
        }
    }
    return finish(spec, std::move(x));
}

Dataset generate(const GenSpec& spec)
{
    return spec.design == DesignKind::equicorrelated ? gen_equicorrelated(spec) : gen_ar_chain(spec);
}

std::uint64_t dataset_checksum(const Design& design, const Response& response)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&](double value) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &value, sizeof(double));
        for (unsigned char b : bytes) {
            hash ^= b;
            hash *= 0x100000001b3ULL;
        }
    };
    if (design.is_sparse()) {
        const auto& x = design.sparse();
        for (Index j = 0; j < x.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(x, j); it; ++it) {
                mix(static_cast<double>(it.row()));
                mix(it.value());
            }
        }
    } else {
        const auto& x = design.dense();
        for (Index j = 0; j < x.cols(); ++j) {
            for (Index i = 0; i < x.rows(); ++i) {
                mix(x(i, j));
            }
        }
    }
    for (Index i = 0; i < response.size(); ++i) {
        mix(response.values[i]);
    }
    return hash;
}

Dataset read_csv(const std::filesystem::path& path, const std::string& response_column, Family family)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("read_csv: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("read_csv: empty file " + path.string());
    }
    const auto header = split(line, ',');
    std::size_t response_index = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (trim(header[c]) == response_column) {
            response_index = c;
        }
    }
    if (response_index == header.size()) {
        throw std::invalid_argument("read_csv: no column named '" + response_column + "'");
    }
    const Index p = static_cast<Index>(header.size()) - 1;

    std::vector<double> cells;
    std::vector<double> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != header.size()) {
            throw std::invalid_argument("read_csv: line " + std::to_string(row) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double value = 0.0;
            if (!parse_double(fields[c], value)) {
                throw std::invalid_argument("read_csv: non-numeric cell at line " + std::to_string(row) +
                                            ", column " + std::to_string(c + 1));
            }
            if (c == response_index) {
                labels.push_back(value);
            } else {
                cells.push_back(value);
            }
        }
    }
    const Index n = static_cast<Index>(labels.size());
    DenseMatrix x(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            x(i, j) = cells[static_cast<std::size_t>(i * p + j)];
        }
    }
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(labels.data(), n);
    Dataset out{Design(std::move(x)), y, make_response(family, y), {}};
    return out;
}

Dataset read_libsvm(const std::filesystem::path& path, Family family)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("read_libsvm: cannot open " + path.string());
    }
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> labels;
    Index p = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream tokens(line);
        std::string token;
        if (!(tokens >> token)) {
            continue;
        }
        auto fail = [&](const std::string& what) {
            return std::invalid_argument("read_libsvm: line " + std::to_string(line_no) + ": " + what);
        };
        double label = 0.0;
        if (!parse_double(token, label)) {
            throw fail("bad label '" + token + "'");
        }
        const Index row = static_cast<Index>(labels.size());
        labels.push_back(label);

        long long last = 0;
        while (tokens >> token) {
            const auto colon = token.find(':');
            if (colon == std::string::npos) {
                throw fail("expected index:value, got '" + token + "'");
            }
            long long idx = 0;
            const auto idx_text = token.substr(0, colon);
            const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
            if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx < 1) {
                throw fail("bad feature index '" + idx_text + "'");
            }
            if (idx == last) {
                throw fail("duplicate feature index " + idx_text);
            }
            if (idx < last) {
                throw fail("feature indices not increasing at " + idx_text);
            }
            double value = 0.0;
            if (!parse_double(token.substr(colon + 1), value)) {
                throw fail("bad feature value in '" + token + "'");
            }
            last = idx;
            p = std::max<Index>(p, static_cast<Index>(idx));
            triplets.emplace_back(row, static_cast<Index>(idx - 1), value);
        }
    }
    const Index n = static_cast<Index>(labels.size());
    SparseMatrix x(n, p);
    x.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(labels.data(), n);
    Dataset out{Design(std::move(x)), y, make_response(family, y), {}};
    return out;
}

void write_csv(const std::filesystem::path& path, const Design& design, const Eigen::VectorXd& labels)
{
    if (design.is_sparse()) {
        throw std::invalid_argument("write_csv: sparse designs are written in libsvm format");
    }
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("write_csv: cannot open " + path.string());
    }
    const auto& x = design.dense();
    for (Index j = 0; j < x.cols(); ++j) {
        out << 'x' << (j + 1) << ',';
    }
    out << "y\n";
    char buf[32];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            emit(x(i, j));
            out << ',';
        }
        emit(labels[i]);
        out << '\n';
    }
}

} // namespace slope
