// Command-line front end: cluster-number selection on CSV data, simulation
// scenarios, degrees-of-freedom curves, and the Monte-Carlo df oracle.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kselect/kselect.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace kselect;

constexpr int kExitSuccess = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;

struct CommonOpts {
    int k_min = 1;
    int k_max = 30;
    int n_init = 10;
    std::uint64_t seed = 42;
    bool standardize = true;
    double bandwidth = 3.0;
    int gap_b = 50;
    std::string methods = "bic_edf,bic_naive,gap,fk,silhouette,jump";
    std::string format;
    std::string out;
    int threads = hardware_threads();
};

void add_common(CLI::App* cmd, CommonOpts& opts, const std::string& default_format) {
    opts.format = default_format;
    cmd->add_option("--kmin", opts.k_min, "Smallest number of clusters considered");
    cmd->add_option("--kmax", opts.k_max, "Largest number of clusters considered");
    cmd->add_option("--inits", opts.n_init, "Random initialisations per fit");
    cmd->add_option("--seed", opts.seed, "Seed for all random draws");
    cmd->add_flag("--standardize,!--no-standardize", opts.standardize,
                  "Scale every column to unit variance first");
    cmd->add_option("--bandwidth", opts.bandwidth, "Local-linear smoothing bandwidth (k units)");
    cmd->add_option("--gap-B", opts.gap_b, "Reference data sets for the gap statistic");
    cmd->add_option("--methods", opts.methods, "Comma list of selectors to run");
    cmd->add_option("--format", opts.format, "Output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", opts.out, "Output path (default: stdout)");
    cmd->add_option("--threads", opts.threads, "Worker threads (results do not depend on this)");
}

std::set<Method> parse_methods(const std::string& spec) {
    std::set<Method> methods;
    std::stringstream stream(spec);
    std::string name;
    while (std::getline(stream, name, ',')) {
        if (name.empty()) continue;
        const auto method = method_from_name(name);
        if (!method) throw ConfigError("unknown method '" + name + "'");
        methods.insert(*method);
    }
    if (methods.empty()) throw ConfigError("no methods selected");
    return methods;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot open output file '" + path + "'");
    file << content;
}

// ---------------------------------------------------------------------------
// Label-column handling for `select`.

struct LabelSpec {
    std::vector<std::size_t> columns;  // 0-based indices into the CSV
};

LabelSpec parse_label_spec(const std::string& text, std::size_t n_cols) {
    LabelSpec spec;
    if (text == "none" || text.empty()) return spec;
    if (text == "last") {
        spec.columns.push_back(n_cols - 1);
        return spec;
    }
    if (text == "first") {
        spec.columns.push_back(0);
        return spec;
    }
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ',')) {
        std::size_t pos = 0;
        int column = 0;
        try {
            column = std::stoi(token, &pos);
        } catch (const std::exception&) {
            throw ConfigError("bad label column '" + token + "'");
        }
        if (pos != token.size() || column < 1 || std::cmp_greater(column, n_cols))
            throw ConfigError("label column '" + token + "' out of range (1.." +
                              std::to_string(n_cols) + ")");
        spec.columns.push_back(static_cast<std::size_t>(column - 1));
    }
    return spec;
}

struct LoadedData {
    DataMatrix x;
    std::vector<std::vector<int>> truths;
    std::vector<std::string> feature_names;
};

LoadedData load_csv(const std::string& path, const std::string& labels) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ParseError(1, 1, "cannot open '" + path + "'");
    const NumericCsv csv = read_numeric_csv(file);
    const LabelSpec spec = parse_label_spec(labels, csv.values.cols());
    std::vector<bool> is_label(csv.values.cols(), false);
    for (std::size_t c : spec.columns) is_label[c] = true;

    std::size_t n_features = 0;
    for (bool flag : is_label)
        if (!flag) ++n_features;
    if (n_features == 0) throw ConfigError("all columns are label columns");

    Matrix features(csv.values.rows(), n_features);
    std::vector<std::string> names;
    std::size_t out_col = 0;
    for (std::size_t c = 0; c < csv.values.cols(); ++c) {
        if (is_label[c]) continue;
        if (!csv.header.empty()) names.push_back(csv.header[c]);
        for (std::size_t i = 0; i < csv.values.rows(); ++i) features(i, out_col) = csv.values(i, c);
        ++out_col;
    }
    std::vector<std::vector<int>> truths;
    for (std::size_t c : spec.columns) {
        std::vector<int> truth(csv.values.rows());
        for (std::size_t i = 0; i < csv.values.rows(); ++i) {
            const double v = csv.values(i, c);
            const int rounded = static_cast<int>(std::llround(v));
            if (std::abs(v - rounded) > 1e-9)
                throw ParseError(i + (csv.header.empty() ? 1 : 2), c + 1,
                                 "label value is not an integer");
            truth[i] = rounded;
        }
        truths.push_back(std::move(truth));
    }
    return LoadedData{DataMatrix(std::move(features)), std::move(truths), std::move(names)};
}

// ---------------------------------------------------------------------------
// select

int cmd_select(const std::string& input, const std::string& labels, const CommonOpts& opts) {
    const LoadedData data = load_csv(input, labels);
    const DataMatrix x = opts.standardize ? standardize(data.x) : data.x;
    if (opts.k_min < 1 || opts.k_min > opts.k_max) throw ConfigError("need 1 <= kmin <= kmax");
    if (opts.n_init < 1) throw ConfigError("need at least one initialisation");

    const auto t_fit = std::chrono::steady_clock::now();
    const FitSeries series =
        fit_series(x, opts.k_min, opts.k_max, opts.n_init, opts.seed, opts.threads);

    SelectConfig config;
    config.methods = parse_methods(opts.methods);
    config.bandwidth = opts.bandwidth;
    config.gap_B = opts.gap_b;
    config.seed = opts.seed;
    config.threads = opts.threads;
    const SelectAllOutcome outcome = select_all(x, series, config);
    const double fit_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t_fit)
                              .count();
    std::cerr << "fit+select took " << fit_ms << " ms\n";

    std::optional<std::pair<int, double>> ideal;
    if (!data.truths.empty()) ideal = ideal_selection(series, data.truths);

    auto method_ari = [&](int k_hat) {
        double mean = 0.0;
        for (const auto& truth : data.truths)
            mean += adjusted_rand_index(series.at(k_hat).assignments, truth);
        return mean / static_cast<double>(data.truths.size());
    };

    if (opts.format == "json") {
        json report;
        report["schema"] = "kselect/1";
        report["command"] = "select";
        report["input"] = input;
        report["n"] = x.n();
        report["d"] = x.d();
        report["k_min"] = opts.k_min;
        report["k_max"] = opts.k_max;
        report["n_init"] = opts.n_init;
        report["seed"] = opts.seed;
        report["standardized"] = opts.standardize;
        report["results"] = json::array();
        for (const SelectionResult& result : outcome.results) {
            json entry;
            entry["method"] = method_name(result.method);
            entry["k_hat"] = result.k_hat;
            entry["ks"] = result.ks;
            entry["scores"] = result.scores;
            if (!result.aux.empty()) entry["aux"] = result.aux;
            if (!data.truths.empty()) {
                const double ari = method_ari(result.k_hat);
                entry["ari"] = ari;
                if (ideal->second > 0.0)
                    entry["regret"] = normalized_regret(ideal->second, ari);
            }
            report["results"].push_back(std::move(entry));
        }
        if (!outcome.failures.empty()) {
            report["failures"] = json::array();
            for (const auto& [method, message] : outcome.failures)
                report["failures"].push_back({{"method", method_name(method)}, {"error", message}});
        }
        if (ideal) report["ideal"] = {{"k", ideal->first}, {"ari", ideal->second}};
        write_output(opts.out, report.dump(2) + "\n");
    } else {
        std::string csv = data.truths.empty() ? "method,k_hat\n" : "method,k_hat,ari,regret\n";
        for (const SelectionResult& result : outcome.results) {
            csv += method_name(result.method);
            csv += ',';
            csv += std::to_string(result.k_hat);
            if (!data.truths.empty()) {
                const double ari = method_ari(result.k_hat);
                csv += ',';
                csv += format_double(ari);
                csv += ',';
                csv += ideal->second > 0.0 ? format_double(normalized_regret(ideal->second, ari))
                                           : std::string("nan");
            }
            csv += '\n';
        }
        if (ideal)
            csv += "ideal," + std::to_string(ideal->first) + "," + format_double(ideal->second) +
                   ",0\n";
        write_output(opts.out, csv);
    }
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// simulate

struct GenOpts {
    std::string scheme = "assumptions_met";
    std::vector<int> k{5};
    std::vector<int> d{5};
    int n = 1000;
    double separation = 4.0;
    double sigma = 1.0;
};

void add_gen(CLI::App* cmd, GenOpts& gen) {
    cmd->add_option("--scheme", gen.scheme, "Mixture scheme")
        ->check(CLI::IsMember({"assumptions_met", "varying_scale", "varying_shape", "t_tails",
                               "uniform_clusters", "nonconvex"}));
    cmd->add_option("--k-true", gen.k, "True component counts (comma list)")->delimiter(',');
    cmd->add_option("--d", gen.d, "Dimensions (comma list)")->delimiter(',');
    cmd->add_option("--n", gen.n, "Sample size");
    cmd->add_option("--separation", gen.separation,
                    "Minimum pairwise mean distance, in base-sigma units");
    cmd->add_option("--sigma", gen.sigma, "Base residual scale");
}

MixtureSpec make_spec(const GenOpts& gen, int k, int d, std::uint64_t seed) {
    MixtureSpec spec;
    const auto scheme = scheme_from_name(gen.scheme);
    if (!scheme) throw ConfigError("unknown scheme '" + gen.scheme + "'");
    spec.scheme = *scheme;
    spec.k = k;
    spec.d = d;
    spec.n = gen.n;
    spec.seed = seed;
    spec.separation = gen.separation;
    spec.base_sigma = gen.sigma;
    return spec;
}

int cmd_simulate(const GenOpts& gen, int reps, const std::string& dump_prefix,
                 const CommonOpts& opts) {
    ScenarioConfig config;
    config.k_min = opts.k_min;
    config.k_max = opts.k_max;
    config.n_init = opts.n_init;
    config.standardize = opts.standardize;
    config.bandwidth = opts.bandwidth;
    config.gap_B = opts.gap_b;
    config.methods = parse_methods(opts.methods);
    config.threads = opts.threads;

    std::vector<std::string> method_names;
    for (Method m : config.methods) method_names.push_back(method_name(m));

    std::string csv = "scheme,k,d,n,reps";
    for (const std::string& name : method_names)
        csv += "," + name + "_khat_med," + name + "_khat_p10," + name + "_khat_p90," + name +
               "_ari_med," + name + "_ari_p10," + name + "_ari_p90";
    csv += "\n";
    json rows = json::array();

    for (int k : gen.k)
        for (int d : gen.d) {
            const MixtureSpec spec = make_spec(gen, k, d, 0);
            const std::uint64_t scenario_seed =
                derive_seed(opts.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(d)});
            if (!dump_prefix.empty()) {
                for (int rep = 0; rep < reps; ++rep) {
                    MixtureSpec rep_spec = spec;
                    rep_spec.seed = derive_seed(scenario_seed, {0xda7au, static_cast<std::uint64_t>(rep)});
                    const LabeledDataset data = generate(rep_spec);
                    std::ofstream file(dump_prefix + "_" + scheme_name(spec.scheme) + "_k" +
                                           std::to_string(k) + "_d" + std::to_string(d) + "_rep" +
                                           std::to_string(rep) + ".csv",
                                       std::ios::binary);
                    for (std::size_t j = 0; j < data.x.d(); ++j) file << "x" << j + 1 << ",";
                    file << "label\n";
                    for (std::size_t i = 0; i < data.x.n(); ++i) {
                        for (std::size_t j = 0; j < data.x.d(); ++j)
                            file << format_double(data.x(i, j)) << ",";
                        file << data.labels[i] + 1 << "\n";
                    }
                }
            }
            const ScenarioSummary summary = run_scenario(spec, reps, config, scenario_seed);
            for (const auto& [rep, message] : summary.failures)
                std::cerr << "rep " << rep << " failed: " << message << "\n";

            csv += std::string(scheme_name(spec.scheme)) + "," + std::to_string(k) + "," +
                   std::to_string(d) + "," + std::to_string(gen.n) + "," + std::to_string(reps);
            json row;
            row["scheme"] = scheme_name(spec.scheme);
            row["k"] = k;
            row["d"] = d;
            row["n"] = gen.n;
            row["reps"] = reps;
            for (const MethodScenario& ms : summary.methods) {
                if (ms.k_hats.empty()) {
                    csv += ",nan,nan,nan,nan,nan,nan";
                    continue;
                }
                const auto& ks = ms.k_hat_summary;
                const auto& ari = ms.ari_summary;
                csv += "," + format_double(ks.median) + "," + format_double(ks.centile_values[0]) +
                       "," + format_double(ks.centile_values[1]) + "," +
                       format_double(ari.median) + "," + format_double(ari.centile_values[0]) +
                       "," + format_double(ari.centile_values[1]);
                row[std::string(method_name(ms.method))] = {
                    {"khat_med", ks.median},
                    {"khat_p10", ks.centile_values[0]},
                    {"khat_p90", ks.centile_values[1]},
                    {"ari_med", ari.median},
                    {"ari_p10", ari.centile_values[0]},
                    {"ari_p90", ari.centile_values[1]}};
            }
            csv += "\n";
            rows.push_back(std::move(row));
        }

    if (opts.format == "json") {
        json report;
        report["schema"] = "kselect/1";
        report["command"] = "simulate";
        report["rows"] = std::move(rows);
        write_output(opts.out, report.dump(2) + "\n");
    } else {
        write_output(opts.out, csv);
    }
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// df-curve

int cmd_df_curve(const std::string& input, const std::string& labels, const GenOpts& gen,
                 const std::vector<int>& k_list, int kp_min, int kp_max, const CommonOpts& opts) {
    std::optional<DataMatrix> x;
    if (!input.empty()) {
        LoadedData data = load_csv(input, labels);
        x = opts.standardize ? standardize(data.x) : data.x;
    } else {
        const MixtureSpec spec = make_spec(gen, gen.k.front(), gen.d.front(), opts.seed);
        const LabeledDataset generated = generate(spec);
        x = opts.standardize ? standardize(generated.x) : generated.x;
    }
    if (kp_min < 1 || kp_min > kp_max || std::cmp_greater(kp_max, x->n() - 1))
        throw ConfigError("k' range must lie within [1, n-1]");
    for (int k : k_list)
        if (k < 1 || std::cmp_greater(k, x->n())) throw ConfigError("k out of range");

    std::string csv = "k,k_prime,df_hat\n";
    json rows = json::array();
    for (int k : k_list) {
        const auto curve = df_vs_kprime_curve(*x, k, kp_min, kp_max, opts.n_init,
                                              derive_seed(opts.seed, {static_cast<std::uint64_t>(k)}),
                                              opts.threads);
        for (const auto& [kp, df] : curve) {
            csv += std::to_string(k) + "," + std::to_string(kp) + "," + format_double(df) + "\n";
            if (opts.format == "json")
                rows.push_back({{"k", k}, {"k_prime", kp}, {"df_hat", df}});
        }
    }
    if (opts.format == "json") {
        json report;
        report["schema"] = "kselect/1";
        report["command"] = "df-curve";
        report["rows"] = std::move(rows);
        write_output(opts.out, report.dump(2) + "\n");
    } else {
        write_output(opts.out, csv);
    }
    return kExitSuccess;
}

// ---------------------------------------------------------------------------
// oracle

int cmd_oracle(const GenOpts& gen, int reps, const CommonOpts& opts) {
    if (reps < 2) throw ConfigError("need at least 2 replicates");
    const MixtureSpec spec = make_spec(gen, gen.k.front(), gen.d.front(), opts.seed);
    const LabeledDataset data = generate(spec);
    const std::size_t n = data.x.n();
    const std::size_t d = data.x.d();
    Matrix mu_truth(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            mu_truth(i, j) = data.means(static_cast<std::size_t>(data.labels[i]), j);

    const int k_lo = opts.k_min;
    const int k_hi = opts.k_max;
    const std::size_t n_k = static_cast<std::size_t>(k_hi - k_lo + 1);
    // Shared fits: one series per replicate provides both the covariance
    // samples and the plug-in df estimates, with k' = kmax + 1.
    std::vector<std::vector<Matrix>> fitted(static_cast<std::size_t>(reps));
    std::vector<Matrix> draws(static_cast<std::size_t>(reps));
    std::vector<std::vector<double>> df_hat(static_cast<std::size_t>(reps));
    parallel_for(static_cast<std::size_t>(reps), opts.threads, [&](std::size_t rep) {
        Rng rng(derive_seed(opts.seed, {0x0dacu, rep}));
        Matrix draw(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                draw(i, j) = mu_truth(i, j) + spec.base_sigma * rng.normal();
        const DataMatrix x(draw);
        const FitSeries series =
            fit_series(x, k_lo, k_hi, opts.n_init, derive_seed(opts.seed, {0xf1fu, rep}), 1);
        const NuisanceParams nuis = nuisance_from_fit(x, series.at(series.k_max_plus()));
        fitted[rep].reserve(n_k);
        df_hat[rep].reserve(n_k);
        for (int k = k_lo; k <= k_hi; ++k) {
            const KMeansFit& fit = series.at(k);
            fitted[rep].push_back(fitted_values(fit));
            df_hat[rep].push_back(total_df(fit, excess_df(x, fit, nuis)));
        }
        draws[rep] = std::move(draw);
    });

    std::string csv = "k,df_oracle,df_hat,kd\n";
    json rows = json::array();
    const double sigma2 = spec.base_sigma * spec.base_sigma;
    for (std::size_t ki = 0; ki < n_k; ++ki) {
        Matrix fit_mean(n, d), draw_mean(n, d);
        for (int rep = 0; rep < reps; ++rep)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    fit_mean(i, j) += fitted[static_cast<std::size_t>(rep)][ki](i, j);
                    draw_mean(i, j) += draws[static_cast<std::size_t>(rep)](i, j);
                }
        const double inv = 1.0 / static_cast<double>(reps);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                fit_mean(i, j) *= inv;
                draw_mean(i, j) *= inv;
            }
        double cov = 0.0;
        double df_mean = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    cov += (fitted[static_cast<std::size_t>(rep)][ki](i, j) - fit_mean(i, j)) *
                           (draws[static_cast<std::size_t>(rep)](i, j) - draw_mean(i, j));
            df_mean += df_hat[static_cast<std::size_t>(rep)][ki];
        }
        cov /= static_cast<double>(reps - 1);
        df_mean /= static_cast<double>(reps);
        const int k = k_lo + static_cast<int>(ki);
        const double oracle = cov / sigma2;
        const double kd = static_cast<double>(k) * static_cast<double>(d);
        csv += std::to_string(k) + "," + format_double(oracle) + "," + format_double(df_mean) +
               "," + format_double(kd) + "\n";
        if (opts.format == "json")
            rows.push_back({{"k", k}, {"df_oracle", oracle}, {"df_hat", df_mean}, {"kd", kd}});
    }
    if (opts.format == "json") {
        json report;
        report["schema"] = "kselect/1";
        report["command"] = "oracle";
        report["rows"] = std::move(rows);
        write_output(opts.out, report.dump(2) + "\n");
    } else {
        write_output(opts.out, csv);
    }
    return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster-number selection for k-means via effective degrees of freedom"};
    app.require_subcommand(1);

    CommonOpts select_opts, sim_opts, curve_opts, oracle_opts;
    GenOpts sim_gen, curve_gen, oracle_gen;
    std::string select_input, select_labels = "none";
    std::string curve_input, curve_labels = "none";
    int sim_reps = 30, oracle_reps = 30;
    std::string dump_prefix;
    std::vector<int> curve_k{5};
    int kp_min = 1, kp_max = 30;

    CLI::App* select = app.add_subcommand("select", "Select k for a CSV data set");
    select->add_option("input", select_input, "Numeric CSV file")->required();
    select->add_option("--labels", select_labels,
                       "Ground-truth column: last, first, none, or 1-based indices");
    add_common(select, select_opts, "json");

    CLI::App* simulate = app.add_subcommand("simulate", "Run simulation scenarios");
    add_gen(simulate, sim_gen);
    simulate->add_option("--reps", sim_reps, "Replicates per scenario");
    simulate->add_option("--dump-data", dump_prefix, "Write each generated data set to CSV");
    add_common(simulate, sim_opts, "csv");

    CLI::App* df_curve_cmd = app.add_subcommand("df-curve", "Effective df against k'");
    df_curve_cmd->add_option("input", curve_input, "Numeric CSV file (omit to simulate)");
    df_curve_cmd->add_option("--labels", curve_labels, "Label columns to drop");
    df_curve_cmd->add_option("--k", curve_k, "Model sizes k (comma list)")->delimiter(',');
    df_curve_cmd->add_option("--kprime-min", kp_min, "Smallest k'");
    df_curve_cmd->add_option("--kprime-max", kp_max, "Largest k'");
    add_gen(df_curve_cmd, curve_gen);
    add_common(df_curve_cmd, curve_opts, "csv");

    CLI::App* oracle = app.add_subcommand("oracle", "Monte-Carlo df oracle vs the estimate");
    add_gen(oracle, oracle_gen);
    oracle->add_option("--reps", oracle_reps, "Monte-Carlo replicates");
    add_common(oracle, oracle_opts, "csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitSuccess : kExitConfig;
    }

    try {
        if (select->parsed()) return cmd_select(select_input, select_labels, select_opts);
        if (simulate->parsed()) return cmd_simulate(sim_gen, sim_reps, dump_prefix, sim_opts);
        if (df_curve_cmd->parsed())
            return cmd_df_curve(curve_input, curve_labels, curve_gen, curve_k, kp_min, kp_max,
                                curve_opts);
        if (oracle->parsed()) return cmd_oracle(oracle_gen, oracle_reps, oracle_opts);
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitConfig;
}
