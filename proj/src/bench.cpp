#include <slope/bench.hpp>
#include <slope/random.hpp>

#include <json.hpp>
#include <toml.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace slope {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what)
{
    throw std::invalid_argument("bench config: " + where + ": " + what);
}

template <typename T>
T scalar(const toml::node& node, const std::string& where)
{
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node.value<double>()) {
            return *v;
        }
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node.value<std::string>()) {
            return *v;
        }
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node.value_exact<bool>()) {
            return *v;
        }
    } else {
        if (auto v = node.value_exact<std::int64_t>()) {
            return static_cast<T>(*v);
        }
    }
    config_error(where, "wrong value type");
}

/// A key given either as a scalar or as an array of scalars.
template <typename T>
std::vector<T> list(const toml::node& node, const std::string& where)
{
    std::vector<T> out;
    if (const auto* arr = node.as_array()) {
        for (const auto& el : *arr) {
            out.push_back(scalar<T>(el, where));
        }
        if (out.empty()) {
            config_error(where, "empty list");
        }
    } else {
        out.push_back(scalar<T>(node, where));
    }
    return out;
}

template <typename T, typename Parse>
std::vector<T> parsed_list(const toml::node& node, const std::string& where, Parse parse)
{
    std::vector<T> out;
    for (const auto& name : list<std::string>(node, where)) {
        try {
            out.push_back(parse(name));
        } catch (const std::invalid_argument& e) {
            config_error(where, e.what());
        }
    }
    return out;
}

Experiment parse_experiment(const toml::table& table, std::size_t position)
{
    static const std::set<std::string> known{
        "name",     "design",      "family",         "beta",           "n",
        "p",        "rho",         "q",              "k",              "k_fraction",
        "noise_scale", "classes",  "screening",      "driver",         "path_length",
        "terminal_ratio", "early_stop", "gap_tol",   "infeas_tol",     "kkt_tol",
        "max_iterations", "pairing"};

    Experiment ex;
    ex.name = "experiment" + std::to_string(position + 1);
    for (const auto& [key, node] : table) {
        const std::string k(key.str());
        const std::string where = "experiment " + std::to_string(position + 1) + " key '" + k + "'";
        if (!known.contains(k)) {
            config_error(where, "unknown key");
        }
        try {
            if (k == "name") ex.name = scalar<std::string>(node, where);
            else if (k == "design") ex.design = parse_design_kind(scalar<std::string>(node, where));
            else if (k == "family") ex.family = parse_family(scalar<std::string>(node, where));
            else if (k == "beta") ex.beta = parse_beta_scheme(scalar<std::string>(node, where));
            else if (k == "n") ex.n = list<Index>(node, where);
            else if (k == "p") ex.p = list<Index>(node, where);
            else if (k == "rho") ex.rho = list<double>(node, where);
            else if (k == "q") ex.q = list<double>(node, where);
            else if (k == "k") ex.k = scalar<Index>(node, where);
            else if (k == "k_fraction") ex.k_fraction = scalar<double>(node, where);
            else if (k == "noise_scale") ex.noise_scale = scalar<double>(node, where);
            else if (k == "classes") ex.classes = scalar<int>(node, where);
            else if (k == "screening") ex.screening = parsed_list<Screening>(node, where, parse_screening);
            else if (k == "driver") ex.driver = parsed_list<Driver>(node, where, parse_driver);
            else if (k == "path_length") ex.path.length = scalar<int>(node, where);
            else if (k == "terminal_ratio") ex.path.terminal_ratio = scalar<double>(node, where);
            else if (k == "early_stop") ex.path.early_stop = scalar<bool>(node, where);
            else if (k == "gap_tol") ex.path.solver.gap_tol = scalar<double>(node, where);
            else if (k == "infeas_tol") ex.path.solver.infeas_tol = scalar<double>(node, where);
            else if (k == "kkt_tol") ex.path.kkt_tol = scalar<double>(node, where);
            else if (k == "max_iterations") ex.path.solver.max_iterations = scalar<int>(node, where);
            else if (k == "pairing") {
                const auto name = scalar<std::string>(node, where);
                if (name == "magnitude") ex.path.pairing = StrongRulePairing::magnitude_rank;
                else if (name == "coordinate") ex.path.pairing = StrongRulePairing::coordinate;
                else config_error(where, "expected 'magnitude' or 'coordinate'");
            }
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            if (msg.rfind("bench config", 0) == 0) throw;
            config_error(where, msg);
        }
    }
    if (ex.path.length < 1) {
        config_error(ex.name, "path_length must be positive");
    }
    if (!(ex.k_fraction >= 0.0 && ex.k_fraction <= 1.0)) {
        config_error(ex.name, "k_fraction must lie in [0, 1]");
    }
    for (double q : ex.q) {
        if (!(q > 0.0 && q < 1.0)) config_error(ex.name, "q must lie in (0, 1)");
    }
    return ex;
}

BenchConfig parse_table(const toml::table& root)
{
    BenchConfig config;
    for (const auto& [key, node] : root) {
        const std::string k(key.str());
        const std::string where = "key '" + k + "'";
        if (k == "workers") config.workers = scalar<int>(node, where);
        else if (k == "seed") config.seed = static_cast<std::uint64_t>(scalar<std::int64_t>(node, where));
        else if (k == "replicates") config.replicates = scalar<int>(node, where);
        else if (k == "experiment") {
            const auto* arr = node.as_array();
            if (arr == nullptr) {
                config_error(where, "expected [[experiment]] tables");
            }
            for (const auto& el : *arr) {
                const auto* table = el.as_table();
                if (table == nullptr) {
                    config_error(where, "expected [[experiment]] tables");
                }
                config.experiments.push_back(parse_experiment(*table, config.experiments.size()));
            }
        } else {
            config_error(where, "unknown key");
        }
    }
    if (config.workers < 1) config_error("workers", "must be at least 1");
    if (config.replicates < 1) config_error("replicates", "must be at least 1");
    if (config.experiments.empty()) config_error("experiment", "no experiments listed");
    return config;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string hex(std::uint64_t v)
{
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Minimal CSV quoting for free-text fields.
std::string quote(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

BenchConfig parse_bench_config_string(std::string_view text)
{
    try {
        return parse_table(toml::parse(text));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "bench config: line " << e.source().begin.line << ": " << e.description();
        throw std::invalid_argument(msg.str());
    }
}

BenchConfig parse_bench_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("bench config: cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_bench_config_string(buf.str());
}

std::vector<BenchCell> expand_cells(const BenchConfig& config)
{
    std::vector<BenchCell> cells;
    for (std::size_t e = 0; e < config.experiments.size(); ++e) {
        const auto& ex = config.experiments[e];
        std::uint64_t index = 0;
        for (Index n : ex.n)
            for (Index p : ex.p)
                for (double rho : ex.rho)
                    for (double q : ex.q)
                        for (int r = 0; r < config.replicates; ++r, ++index) {
                            BenchCell cell;
                            cell.experiment = e;
                            cell.replicate = r;
                            cell.q = q;
                            GenSpec& s = cell.spec;
                            s.n = n;
                            s.p = p;
                            s.rho = rho;
                            s.k = ex.k ? std::min(*ex.k, p) : static_cast<Index>(std::lround(ex.k_fraction * static_cast<double>(p)));
                            s.design = ex.design;
                            s.family = ex.family;
                            s.beta = ex.beta;
                            s.noise_scale = ex.noise_scale;
                            s.classes = ex.classes;
                            s.seed = Rng::stream(config.seed, e + 1, index).below(std::uint64_t{1} << 62);
                            cells.push_back(cell);
                        }
    }
    return cells;
}

std::vector<BenchRecord> run_cell(const BenchConfig& config, const BenchCell& cell)
{
    const auto& ex = config.experiments.at(cell.experiment);
    std::vector<BenchRecord> records;
    BenchRecord base;
    base.experiment = ex.name;
    base.replicate = cell.replicate;
    base.spec = cell.spec;
    base.q = cell.q;

    std::optional<Standardized> data;
    try {
        const Dataset raw = generate(cell.spec);
        data.emplace(standardize(raw.design, raw.response));
        base.checksum = dataset_checksum(raw.design, raw.response);
    } catch (const std::exception& e) {
        base.error = e.what();
    }

    for (Screening screening : ex.screening) {
        for (Driver driver : ex.driver) {
            BenchRecord rec = base;
            rec.screening = screening;
            rec.driver = driver;
            if (data) {
                PathConfig pc = ex.path;
                pc.q = cell.q;
                pc.screening = screening;
                pc.driver = driver;
                try {
                    rec.path = fit_path(data->design, data->response, pc);
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
            }
            records.push_back(std::move(rec));
        }
    }
    return records;
}

void write_csv_header(std::ostream& out)
{
    out << "experiment,replicate,seed,checksum,family,design,beta,n,p,k,rho,q,screening,driver,status,"
           "termination,step,sigma,active,screened,strong,violations,refits,solves,iterations,"
           "deviance,deviance_ratio,relative_gap,infeasibility,converged,error,step_seconds,path_seconds\n";
}

void write_csv_rows(std::ostream& out, const BenchRecord& rec)
{
    std::ostringstream prefix;
    prefix << quote(rec.experiment) << ',' << rec.replicate << ',' << rec.spec.seed << ',' << hex(rec.checksum) << ','
           << to_string(rec.spec.family) << ',' << to_string(rec.spec.design) << ',' << to_string(rec.spec.beta) << ','
           << rec.spec.n << ',' << rec.spec.p << ',' << rec.spec.k << ',' << fmt(rec.spec.rho) << ',' << fmt(rec.q)
           << ',' << to_string(rec.screening) << ',' << to_string(rec.driver) << ',';

    if (!rec.path) {
        out << prefix.str() << "error,,,,,,,,,,,,,,,," << quote(rec.error) << ",,\n";
        return;
    }
    const auto& path = *rec.path;
    for (std::size_t s = 0; s < path.steps.size(); ++s) {
        const auto& st = path.steps[s];
        out << prefix.str() << "ok," << to_string(path.termination) << ',' << s << ',' << fmt(st.sigma) << ','
            << st.active_count << ',' << st.screened_count << ',' << st.strong_count << ',' << st.violation_count
            << ',' << st.refits << ',' << st.solves << ',' << st.solver_iterations << ',' << fmt(st.deviance) << ','
            << fmt(st.deviance_ratio) << ',' << fmt(st.relative_gap) << ',' << fmt(st.infeasibility) << ','
            << (st.converged ? 1 : 0) << ",," << fmt(st.seconds) << ',' << fmt(path.seconds) << '\n';
    }
}

BenchSummary bench_run(const BenchConfig& config,
                       std::ostream& csv,
                       const std::function<void(const BenchRecord&)>& observe)
{
    const auto cells = expand_cells(config);
    std::vector<std::optional<std::vector<BenchRecord>>> slots(cells.size());
    std::mutex mutex;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) {
                return;
            }
            auto records = run_cell(config, cells[i]);
            {
                std::lock_guard lock(mutex);
                slots[i] = std::move(records);
            }
            ready.notify_all();
        }
    };
    const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(cells.size())));
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }

    BenchSummary summary;
    summary.cells = cells.size();
    write_csv_header(csv);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::vector<BenchRecord> records;
        {
            std::unique_lock lock(mutex);
            ready.wait(lock, [&] { return slots[i].has_value(); });
            records = std::move(*slots[i]);
            slots[i].reset();
        }
        for (const auto& rec : records) {
            write_csv_rows(csv, rec);
            ++summary.records;
            if (!rec.path) {
                ++summary.failures;
            }
            if (observe) {
                observe(rec);
            }
        }
        csv.flush();
    }
    return summary;
}

std::filesystem::path manifest_path(const std::filesystem::path& csv_path)
{
    auto out = csv_path;
    out.replace_extension(".manifest.json");
    return out;
}

BenchSummary bench_run_to_file(const BenchConfig& config, const std::filesystem::path& out)
{
    std::ofstream csv(out);
    if (!csv) {
        throw std::invalid_argument("bench: cannot write " + out.string());
    }

    // Fits with at least one violation, per experiment / p / configuration.
    struct Tally
    {
        std::size_t fits = 0;
        std::size_t with_violation = 0;
        double screened_sum = 0.0;
        double active_sum = 0.0;
        std::size_t steps = 0;
    };
    std::map<std::tuple<std::string, Index, std::string, std::string>, Tally> tallies;
    nlohmann::json failures = nlohmann::json::array();

    const auto start = std::chrono::steady_clock::now();
    const auto summary = bench_run(config, csv, [&](const BenchRecord& rec) {
        if (!rec.path) {
            failures.push_back({{"experiment", rec.experiment},
                                {"replicate", rec.replicate},
                                {"seed", rec.spec.seed},
                                {"screening", to_string(rec.screening)},
                                {"driver", to_string(rec.driver)},
                                {"error", rec.error}});
            return;
        }
        auto& t = tallies[{rec.experiment, rec.spec.p, std::string(to_string(rec.screening)),
                           std::string(to_string(rec.driver))}];
        ++t.fits;
        bool violated = false;
        for (const auto& st : rec.path->steps) {
            violated = violated || st.violation_count > 0;
            t.screened_sum += static_cast<double>(st.screened_count);
            t.active_sum += static_cast<double>(st.active_count);
            ++t.steps;
        }
        t.with_violation += violated ? 1 : 0;
    });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json experiments = nlohmann::json::array();
    for (const auto& ex : config.experiments) {
        nlohmann::json screening = nlohmann::json::array();
        for (auto s : ex.screening) screening.push_back(to_string(s));
        nlohmann::json driver = nlohmann::json::array();
        for (auto d : ex.driver) driver.push_back(to_string(d));
        nlohmann::json e{{"name", ex.name},
                         {"design", to_string(ex.design)},
                         {"family", to_string(ex.family)},
                         {"beta", to_string(ex.beta)},
                         {"n", ex.n},
                         {"p", ex.p},
                         {"rho", ex.rho},
                         {"q", ex.q},
                         {"k_fraction", ex.k_fraction},
                         {"noise_scale", ex.noise_scale},
                         {"classes", ex.classes},
                         {"screening", screening},
                         {"driver", driver},
                         {"path_length", ex.path.length},
                         {"terminal_ratio", ex.path.terminal_ratio},
                         {"early_stop", ex.path.early_stop},
                         {"gap_tol", ex.path.solver.gap_tol},
                         {"infeas_tol", ex.path.solver.infeas_tol},
                         {"kkt_tol", ex.path.kkt_tol},
                         {"max_iterations", ex.path.solver.max_iterations}};
        if (ex.k) e["k"] = *ex.k;
        experiments.push_back(e);
    }
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& cell : expand_cells(config)) {
        seeds.push_back({{"experiment", config.experiments[cell.experiment].name},
                         {"n", cell.spec.n},
                         {"p", cell.spec.p},
                         {"rho", cell.spec.rho},
                         {"q", cell.q},
                         {"replicate", cell.replicate},
                         {"seed", cell.spec.seed}});
    }
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& [key, t] : tallies) {
        const auto& [name, p, screening, driver] = key;
        summaries.push_back({{"experiment", name},
                             {"p", p},
                             {"screening", screening},
                             {"driver", driver},
                             {"fits", t.fits},
                             {"fits_with_violation", t.with_violation},
                             {"violation_fraction", t.fits ? static_cast<double>(t.with_violation) / t.fits : 0.0},
                             {"mean_screened", t.steps ? t.screened_sum / t.steps : 0.0},
                             {"mean_active", t.steps ? t.active_sum / t.steps : 0.0}});
    }

    nlohmann::json manifest{{"version", kVersion},
                            {"results", out.filename().string()},
                            {"seed", config.seed},
                            {"replicates", config.replicates},
                            {"workers", config.workers},
                            {"experiments", experiments},
                            {"cells", seeds},
                            {"records", summary.records},
                            {"failures", failures},
                            {"summary", summaries},
                            {"seconds", seconds}};
    std::ofstream(manifest_path(out)) << manifest.dump(2) << '\n';
    return summary;
}

} // namespace slope
