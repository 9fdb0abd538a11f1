#include <slope/bench.hpp>
#include <slope/data.hpp>
#include <slope/path.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <numeric>

namespace {

using namespace slope;

constexpr int kExitBadInput = 1;
constexpr int kExitSolver = 2;

struct FitOptions
{
    std::string data;
    std::string format = "csv";
    std::string family = "gaussian";
    std::string response = "y";
    double q = 0.1;
    int path_length = 100;
    std::string screening = "strong";
    std::string driver = "strong-set";
    double gap_tol = 1e-5;
    double infeas_tol = 1e-3;
    std::uint64_t seed = 1;
    bool drop_constant = false;
    bool no_early_stop = false;
    std::string out = "results.json";
};

struct GenOptions
{
    GenSpec spec;
    std::string design = "equicorrelated";
    std::string family = "gaussian";
    std::string beta = "gaussian_unit";
    std::string out = "data.csv";
};

/// Columns that standardization cannot handle: constant dense columns and
/// empty sparse ones.
std::vector<Index> degenerate_columns(const Design& design)
{
    std::vector<Index> out;
    for (Index j = 0; j < design.cols(); ++j) {
        if (design.is_sparse()) {
            if (design.col_squared_norm(j) == 0.0) out.push_back(j);
        } else {
            const auto col = design.dense().col(j);
            if (col.maxCoeff() == col.minCoeff()) out.push_back(j);
        }
    }
    return out;
}

int run_fit(const FitOptions& opt)
{
    const Family family = parse_family(opt.family);
    Dataset data = opt.format == "libsvm" ? read_libsvm(opt.data, family)
                   : opt.format == "csv"  ? read_csv(opt.data, opt.response, family)
                                          : throw std::invalid_argument("unknown format '" + opt.format + "'");

    std::vector<Index> kept(static_cast<std::size_t>(data.design.cols()));
    std::iota(kept.begin(), kept.end(), Index{0});
    std::vector<Index> dropped;
    if (opt.drop_constant) {
        dropped = degenerate_columns(data.design);
        if (!dropped.empty()) {
            kept.clear();
            std::size_t d = 0;
            for (Index j = 0; j < data.design.cols(); ++j) {
                if (d < dropped.size() && dropped[d] == j) ++d;
                else kept.push_back(j);
            }
            if (kept.empty()) {
                throw std::invalid_argument("every column is constant");
            }
            data.design = data.design.select_columns(kept);
        }
    }

    const Standardized s = standardize(data.design, data.response);
    PathConfig config;
    config.q = opt.q;
    config.length = opt.path_length;
    config.screening = parse_screening(opt.screening);
    config.driver = parse_driver(opt.driver);
    config.solver.gap_tol = opt.gap_tol;
    config.solver.infeas_tol = opt.infeas_tol;
    config.early_stop = !opt.no_early_stop;

    const PathResult path = fit_path(s.design, s.response, config);

    const Index p = s.design.cols();
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& st : path.steps) {
        nlohmann::json beta = nlohmann::json::array();
        for (Index i = 0; i < st.beta.size(); ++i) {
            if (st.beta[i] != 0.0) {
                beta.push_back({{"column", kept[static_cast<std::size_t>(i % p)] + 1},
                                {"class", i / p + 1},
                                {"value", st.beta[i]}});
            }
        }
        steps.push_back({{"sigma", st.sigma},
                         {"active", st.active_count},
                         {"screened", st.screened_count},
                         {"violations", st.violation_count},
                         {"refits", st.refits},
                         {"iterations", st.solver_iterations},
                         {"deviance", st.deviance},
                         {"deviance_ratio", st.deviance_ratio},
                         {"relative_gap", st.relative_gap},
                         {"infeasibility", st.infeasibility},
                         {"converged", st.converged},
                         {"seconds", st.seconds},
                         {"beta", beta}});
    }
    nlohmann::json dropped_json = nlohmann::json::array();
    for (Index j : dropped) dropped_json.push_back(j + 1);

    nlohmann::json out{{"version", kVersion},
                       {"data", opt.data},
                       {"family", to_string(family)},
                       {"n", s.design.rows()},
                       {"p", p},
                       {"q", opt.q},
                       {"screening", opt.screening},
                       {"driver", opt.driver},
                       {"seed", opt.seed},
                       {"dropped_columns", dropped_json},
                       {"column_centers", std::vector<double>(s.design.column_centers().begin(), s.design.column_centers().end())},
                       {"column_scales", std::vector<double>(s.design.column_scales().begin(), s.design.column_scales().end())},
                       {"lambda", std::vector<double>(path.lambda.weights().begin(), path.lambda.weights().end())},
                       {"termination", to_string(path.termination)},
                       {"null_deviance", path.null_deviance},
                       {"seconds", path.seconds},
                       {"steps", steps}};
    std::ofstream file(opt.out);
    if (!file) {
        throw std::invalid_argument("cannot write " + opt.out);
    }
    file << out.dump(2) << '\n';
    std::cout << "fitted " << path.steps.size() << " steps (" << to_string(path.termination) << ") -> " << opt.out
              << '\n';
    return 0;
}

int run_gen(GenOptions opt)
{
    opt.spec.design = parse_design_kind(opt.design);
    opt.spec.family = parse_family(opt.family);
    opt.spec.beta = parse_beta_scheme(opt.beta);
    const Dataset d = generate(opt.spec);
    write_csv(opt.out, d.design, d.labels);
    std::cout << "wrote " << opt.spec.n << " x " << opt.spec.p << " to " << opt.out << " (checksum "
              << std::hex << dataset_checksum(d.design, d.response) << std::dec << ")\n";
    return 0;
}

int run_bench(const std::string& config_path, const std::string& out, int workers)
{
    BenchConfig config = parse_bench_config(config_path);
    if (workers > 0) {
        config.workers = workers;
    }
    const auto summary = bench_run_to_file(config, out);
    std::cout << summary.cells << " cells, " << summary.records << " records, " << summary.failures
              << " failed -> " << out << " and " << manifest_path(out).string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"SLOPE regularization paths with strong screening"};
    app.require_subcommand(1);

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a regularization path to a data file");
    fit_cmd->add_option("--data", fit.data, "Input file")->required();
    fit_cmd->add_option("--format", fit.format, "csv or libsvm")->check(CLI::IsMember({"csv", "libsvm"}));
    fit_cmd->add_option("--family", fit.family, "gaussian, logistic, poisson or multinomial")
        ->check(CLI::IsMember({"gaussian", "logistic", "poisson", "multinomial"}));
    fit_cmd->add_option("--response", fit.response, "Response column name (csv)");
    fit_cmd->add_option("--q", fit.q, "BH false discovery parameter")->check(CLI::Range(0.0, 1.0));
    fit_cmd->add_option("--path-length", fit.path_length, "Number of path steps")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--screening", fit.screening, "none or strong")->check(CLI::IsMember({"none", "strong"}));
    fit_cmd->add_option("--driver", fit.driver, "strong-set or previous-set")
        ->check(CLI::IsMember({"strong-set", "previous-set"}));
    fit_cmd->add_option("--gap-tol", fit.gap_tol, "Relative duality gap tolerance")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--infeas-tol", fit.infeas_tol, "Relative infeasibility tolerance")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--seed", fit.seed, "Recorded in the output");
    fit_cmd->add_flag("--drop-constant", fit.drop_constant, "Drop constant (or empty sparse) columns");
    fit_cmd->add_flag("--no-early-stop", fit.no_early_stop, "Fit the full path");
    fit_cmd->add_option("--out", fit.out, "Output JSON");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic data set as CSV");
    gen_cmd->add_option("--design", gen.design, "equicorrelated or ar-chain")
        ->check(CLI::IsMember({"equicorrelated", "ar-chain", "ar_chain"}));
    gen_cmd->add_option("--n", gen.spec.n)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--p", gen.spec.p)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--k", gen.spec.k)->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--rho", gen.spec.rho);
    gen_cmd->add_option("--family", gen.family)
        ->check(CLI::IsMember({"gaussian", "logistic", "poisson", "multinomial"}));
    gen_cmd->add_option("--beta", gen.beta, "Coefficient scheme");
    gen_cmd->add_option("--noise-scale", gen.spec.noise_scale);
    gen_cmd->add_option("--classes", gen.spec.classes);
    gen_cmd->add_option("--seed", gen.spec.seed);
    gen_cmd->add_option("--out", gen.out, "Output CSV");

    std::string bench_config;
    std::string bench_out = "bench.csv";
    int bench_workers = 0;
    auto* bench_cmd = app.add_subcommand("bench", "Run an experiment matrix from a TOML config");
    bench_cmd->add_option("--config", bench_config, "TOML experiment matrix")->required();
    bench_cmd->add_option("--out", bench_out, "Output CSV");
    bench_cmd->add_option("--workers", bench_workers, "Override the worker count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadInput;
    }

    try {
        if (*fit_cmd) return run_fit(fit);
        if (*gen_cmd) return run_gen(gen);
        if (*bench_cmd) return run_bench(bench_config, bench_out, bench_workers);
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    }
    return 0;
}
