#pragma once

#include <slope/data.hpp>
#include <slope/path.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace slope {

inline constexpr std::string_view kVersion = "0.1.0";

/// One row of the experiment matrix. Every combination of the list-valued
/// fields is a cell; each cell is fitted once per screening x driver pair
/// on the same data.
struct Experiment
{
    std::string name;
    DesignKind design = DesignKind::equicorrelated;
    Family family = Family::gaussian;
    BetaScheme beta = BetaScheme::gaussian_unit;
    std::vector<Index> n{100};
    std::vector<Index> p{100};
    std::vector<double> rho{0.0};
    std::vector<double> q{0.1};
    /// Support size; when unset, k = round(k_fraction * p).
    std::optional<Index> k;
    double k_fraction = 0.1;
    double noise_scale = 1.0;
    int classes = 3;
    std::vector<Screening> screening{Screening::none, Screening::strong};
    std::vector<Driver> driver{Driver::strong_set};
    PathConfig path;
};

struct BenchConfig
{
    int workers = 1;
    std::uint64_t seed = 1;
    int replicates = 1;
    std::vector<Experiment> experiments;
};

BenchConfig parse_bench_config(const std::filesystem::path& path);
BenchConfig parse_bench_config_string(std::string_view text);

/// A dataset to generate: one experiment cell and replicate.
struct BenchCell
{
    std::size_t experiment = 0;
    int replicate = 0;
    GenSpec spec;
    double q = 0.1;
};

std::vector<BenchCell> expand_cells(const BenchConfig& config);

/// Result of one (dataset, configuration) fit.
struct BenchRecord
{
    std::string experiment;
    int replicate = 0;
    GenSpec spec;
    double q = 0.1;
    std::uint64_t checksum = 0;
    Screening screening = Screening::strong;
    Driver driver = Driver::strong_set;
    /// Empty on success.
    std::string error;
    std::optional<PathResult> path;
};

/// Fits every screening x driver configuration of the cell on one dataset.
std::vector<BenchRecord> run_cell(const BenchConfig& config, const BenchCell& cell);

struct BenchSummary
{
    std::size_t cells = 0;
    std::size_t records = 0;
    std::size_t failures = 0;
};

/// Runs all cells on `config.workers` threads and writes the long-format CSV
/// to `csv` in cell order. Each record is also passed to `observe`, if set.
BenchSummary bench_run(const BenchConfig& config,
                       std::ostream& csv,
                       const std::function<void(const BenchRecord&)>& observe = {});

/// Runs the benchmark, writing `out` and a JSON manifest next to it.
BenchSummary bench_run_to_file(const BenchConfig& config, const std::filesystem::path& out);

std::filesystem::path manifest_path(const std::filesystem::path& csv_path);

void write_csv_header(std::ostream& out);
void write_csv_rows(std::ostream& out, const BenchRecord& record);

} // namespace slope
