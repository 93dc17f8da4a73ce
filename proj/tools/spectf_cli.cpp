// spectf command-line interface: fit, predict, bootstrap, cv, simulate, benchmark.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectf/benchmark.hpp"
#include "spectf/inference.hpp"
#include "spectf/ingest.hpp"
#include "spectf/models.hpp"
#include "spectf/serialize.hpp"
#include "spectf/simulation.hpp"

using namespace spectf;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) { return detail::format_double(v); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(detail::trim(item));
    return out;
}

std::vector<int> parse_orders(const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("--orders expects one or two integers, got '" + s + "'");
        }
    }
    if (out.empty() || out.size() > 2) throw UsageError("--orders expects one or two derivative orders");
    for (int o : out)
        if (o < 1) throw UsageError("penalized derivative orders must be at least 1");
    if (out.size() == 2 && out[0] == out[1]) throw UsageError("the two penalty orders must differ");
    return out;
}

std::vector<double> parse_lambdas(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        const auto v = detail::parse_number(item);
        if (!v || !(*v >= 0.0)) throw UsageError("--lambda expects nonnegative numbers, got '" + s + "'");
        out.push_back(*v);
    }
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    return out;
}

// Every output file gets its resolved config next to it.
void write_config(const ojson& config, const std::string& out_path) {
    auto f = open_out(out_path + ".config.json");
    f << config.dump(2) << '\n';
}

ojson penalty_json(const PenaltySpec& pen) { return to_json(pen); }

std::string describe(const PenaltySpec& pen) {
    std::string s;
    for (const auto& t : pen.terms) {
        if (!s.empty()) s += ", ";
        s += "order " + std::to_string(t.order) + " lambda " + fmt(t.lambda);
    }
    return s;
}

/// Options shared by the data-driven commands.
struct DataOptions {
    std::string data;
    std::string schema;
    int aggregate = 0;  // 0: use the schema's value
    bool log_response = false;
    bool standardize = false;

    void attach(CLI::App* cmd, bool with_preprocessing) {
        cmd->add_option("--data", data, "Input CSV (id, scalar covariates, response, one column per wavelength)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--schema", schema, "JSON schema with column roles and preprocessing")->check(CLI::ExistingFile);
        if (with_preprocessing) {
            cmd->add_option("--aggregate", aggregate, "Average blocks of F adjacent wavelengths")->check(CLI::PositiveNumber);
            cmd->add_flag("--log-response", log_response, "Fit log(response)");
            cmd->add_flag("--standardize", standardize, "Centre and scale each wavelength column");
        }
    }

    IngestSchema resolve_schema() const {
        IngestSchema s = schema.empty() ? IngestSchema{} : IngestSchema::from_file(schema);
        if (aggregate > 0) s.aggregate = aggregate;
        if (log_response) s.transform = "log";
        if (standardize) s.standardize = true;
        return s;
    }

    ojson to_json(const IngestSchema& s) const {
        ojson j;
        j["data"] = data;
        j["schema"] = schema.empty() ? ojson(nullptr) : ojson(schema);
        j["id_column"] = s.id_column;
        j["response_column"] = s.response_column ? ojson(*s.response_column) : ojson(nullptr);
        j["transform"] = s.transform;
        j["aggregate"] = s.aggregate;
        j["partial_block"] = detail::partial_name(s.partial_block);
        j["standardize"] = s.standardize;
        return j;
    }
};

struct Prepared {
    SpectraTable raw;
    SpectraTable data;
    IngestSchema schema;
    Preprocessing pp;
};

Prepared prepare(const DataOptions& d) {
    Prepared out;
    out.schema = d.resolve_schema();
    out.raw = read_csv(d.data, out.schema);
    if (!out.raw.response) throw DataError("data file '" + d.data + "' has no response column");
    out.data = preprocess(out.raw, out.schema);
    out.pp = preprocessing_of(out.raw, out.schema, out.data);
    return out;
}

/// Penalty selection settings shared by fit and cv.
struct SelectionOptions {
    std::string family = "gaussian";
    std::string orders = "4";
    std::string lambda;
    int cv = 0;
    std::string holdout;
    int grid_count = 0;
    double grid_ratio = 1e-4;
    bool no_intercept = false;
    int max_iter = 5000;

    void attach(CLI::App* cmd, bool allow_fixed) {
        cmd->add_option("--family", family, "Response family")
            ->check(CLI::IsMember({"gaussian", "bernoulli", "poisson"}));
        cmd->add_option("--orders", orders, "Penalized derivative orders, one or two (e.g. 4 or 4,1)");
        CLI::Option* cv_opt = cmd->add_option("--cv", cv, "Select the penalty by K-fold cross-validation");
        cv_opt->check(CLI::Range(2, 1000000));
        if (allow_fixed) {
            CLI::Option* lam = cmd->add_option("--lambda", lambda, "Fixed penalty weight(s), one per order");
            CLI::Option* hold = cmd->add_option("--holdout", holdout, "Select the penalty on a validation CSV")
                                    ->check(CLI::ExistingFile);
            lam->excludes(cv_opt)->excludes(hold);
            hold->excludes(cv_opt);
        }
        cmd->add_option("--grid-count", grid_count, "Grid points per penalty axis (default 50, or 15 for two orders)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--grid-ratio", grid_ratio, "Smallest over largest lambda on each axis")
            ->check(CLI::Range(1e-12, 1.0));
        cmd->add_flag("--no-intercept", no_intercept, "Fit without an intercept");
        cmd->add_option("--max-iter", max_iter, "ADMM iteration cap")->check(CLI::PositiveNumber);
    }

    ModelOptions model() const {
        ModelOptions m;
        m.intercept = !no_intercept;
        m.admm.max_iter = max_iter;
        return m;
    }

    int resolved_count(std::size_t n_orders) const {
        if (grid_count > 0) return grid_count;
        return n_orders == 2 ? 15 : 50;
    }

    PenaltyGrid grid(const SpectraTable& t, ResponseFamily fam, const std::vector<int>& ord) const {
        const Matrix design = detail::build_design(t.absorbances, t.scalars, !no_intercept);
        const Eigen::Index r = design.cols() - t.p();
        const int count = resolved_count(ord.size());
        std::vector<std::vector<double>> axes;
        for (int o : ord) {
            const double lmax = glm_lambda_max(design, *t.response, fam, o, r);
            axes.push_back(geometric_grid(lmax > 0.0 ? lmax : 1.0, count, grid_ratio));
        }
        if (ord.size() == 1) return PenaltyGrid::single(ord[0], axes[0]);
        return PenaltyGrid::mixed(ord[0], axes[0], ord[1], axes[1]);
    }

    ojson to_json(const std::vector<int>& ord) const {
        ojson j;
        j["family"] = family;
        j["orders"] = ord;
        j["intercept"] = !no_intercept;
        j["admm_max_iter"] = max_iter;
        return j;
    }
};

ojson cv_table_json(const CvReport& rep) {
    ojson j;
    j["method"] = rep.holdout ? "holdout" : "kfold";
    j["folds"] = rep.folds;
    j["grid_points"] = rep.grid.size();
    j["best_index"] = rep.best_index;
    j["best_score"] = rep.mean_score[rep.best_index];
    if (!rep.holdout) j["best_se"] = rep.se_score[rep.best_index];
    if (!rep.mean_misclassification.empty())
        j["best_misclassification"] = rep.mean_misclassification[rep.best_index];
    return j;
}

void write_cv_csv(const CvReport& rep, std::ostream& out) {
    const std::size_t terms = rep.grid.empty() ? 1 : rep.grid[0].terms.size();
    out << "order1,lambda1";
    if (terms == 2) out << ",order2,lambda2";
    out << ",mean_score,se_score";
    const bool miss = !rep.mean_misclassification.empty();
    if (miss) out << ",misclassification";
    out << ",selected\n";
    for (std::size_t g = 0; g < rep.grid.size(); ++g) {
        for (std::size_t t = 0; t < terms; ++t)
            out << (t ? "," : "") << rep.grid[g].terms[t].order << ',' << fmt(rep.grid[g].terms[t].lambda);
        out << ',' << fmt(rep.mean_score[g]) << ',' << fmt(rep.se_score[g]);
        if (miss) out << ',' << fmt(rep.mean_misclassification[g]);
        out << ',' << (g == rep.best_index ? 1 : 0) << '\n';
    }
}

void name_scalars(TfFit& fit, const SpectraTable& t) {
    fit.grid = t.wavelengths;
    fit.scalar_names.clear();
    if (fit.intercept) fit.scalar_names.emplace_back("Intercept");
    for (const auto& n : t.scalar_names) fit.scalar_names.push_back(n);
}

void print_fit_report(const TfFit& fit, const std::optional<CvReport>& rep, std::ostream& out) {
    out << "family: " << to_string(fit.family.kind) << '\n';
    out << "penalty: " << describe(fit.penalty) << '\n';
    if (rep) {
        out << "selection: " << (rep->holdout ? "holdout" : std::to_string(rep->folds) + "-fold cv") << " over "
            << rep->grid.size() << " grid points, score " << fmt(rep->mean_score[rep->best_index]) << '\n';
        if (!rep->mean_misclassification.empty())
            out << "misclassification: " << fmt(rep->mean_misclassification[rep->best_index]) << '\n';
    }
    const FitDiagnostics& d = fit.diagnostics;
    out << "admm iterations: " << d.admm_iterations << ", outer iterations: " << d.outer_iterations
        << ", converged: " << (d.converged ? "yes" : "no") << '\n';
    out << "objective: " << fmt(d.objective) << '\n';
    for (std::size_t k = 0; k < fit.scalar_names.size(); ++k)
        out << "  " << fit.scalar_names[k] << " = " << fmt(fit.gamma_hat[static_cast<Eigen::Index>(k)]) << '\n';
}

// ---- fit -------------------------------------------------------------------

struct FitCommand {
    DataOptions data;
    SelectionOptions sel;
    std::string out;
    std::string cv_out;

    void attach(CLI::App* cmd) {
        data.attach(cmd, true);
        sel.attach(cmd, true);
        cmd->add_option("--out", out, "Model JSON to write")->required();
        cmd->add_option("--cv-out", cv_out, "Optional CSV with the score of every grid point");
    }

    int run(std::uint64_t seed, unsigned threads) const {
        const std::vector<int> ord = parse_orders(sel.orders);
        const ResponseFamily fam{family_from_string(sel.family)};
        const Prepared prep = prepare(data);
        const SpectraTable& t = prep.data;
        const ModelOptions opts = sel.model();

        ojson config;
        config["command"] = "fit";
        config["seed"] = seed;
        config["input"] = data.to_json(prep.schema);
        config["model"] = sel.to_json(ord);

        std::optional<CvReport> rep;
        TfFit fit;
        if (!sel.lambda.empty()) {
            const std::vector<double> lam = parse_lambdas(sel.lambda);
            if (lam.size() != ord.size()) throw UsageError("--lambda needs one value per penalty order");
            const PenaltySpec pen = ord.size() == 1 ? PenaltySpec::single(ord[0], lam[0])
                                                    : PenaltySpec::mixed(ord[0], lam[0], ord[1], lam[1]);
            config["selection"] = {{"method", "fixed"}, {"penalty", penalty_json(pen)}};
            fit = fit_glm(t.absorbances, t.scalars, *t.response, fam, pen, opts);
        } else {
            const PenaltyGrid grid = sel.grid(t, fam, ord);
            config["selection"] = {{"grid_count", sel.resolved_count(ord.size())}, {"grid_ratio", sel.grid_ratio}};
            if (!sel.holdout.empty()) {
                IngestSchema hs = prediction_schema(prep.pp);
                hs.response_required = true;
                const SpectraTable hv = apply_preprocessing(read_csv(sel.holdout, hs), prep.pp);
                if (!hv.response) throw DataError("holdout file '" + sel.holdout + "' has no response column");
                auto [r, f] = holdout_select(t.absorbances, t.scalars, *t.response, hv.absorbances, hv.scalars,
                                             *hv.response, fam, grid, opts);
                rep = std::move(r);
                fit = std::move(f);
                config["selection"]["holdout"] = sel.holdout;
            } else {
                const int K = sel.cv > 0 ? sel.cv : 10;
                rep = cross_validate(t.absorbances, t.scalars, *t.response, fam, grid, K, seed, opts, threads);
                fit = fit_glm(t.absorbances, t.scalars, *t.response, fam, rep->best, opts);
            }
            config["selection"]["result"] = cv_table_json(*rep);
            config["selection"]["penalty"] = penalty_json(rep->best);
        }
        name_scalars(fit, t);

        ModelDocument doc{fit, prep.pp, config};
        save_model(doc, out);
        if (!cv_out.empty() && rep) {
            auto f = open_out(cv_out);
            write_cv_csv(*rep, f);
        }
        print_fit_report(fit, rep, std::cout);
        return 0;
    }
};

// ---- cv --------------------------------------------------------------------

struct CvCommand {
    DataOptions data;
    SelectionOptions sel;
    std::string out;

    void attach(CLI::App* cmd) {
        data.attach(cmd, true);
        sel.attach(cmd, false);
        cmd->add_option("--out", out, "CSV with the cross-validated score of every grid point")->required();
    }

    int run(std::uint64_t seed, unsigned threads) const {
        const std::vector<int> ord = parse_orders(sel.orders);
        const ResponseFamily fam{family_from_string(sel.family)};
        const Prepared prep = prepare(data);
        const SpectraTable& t = prep.data;
        const int K = sel.cv > 0 ? sel.cv : 10;
        const PenaltyGrid grid = sel.grid(t, fam, ord);
        const CvReport rep = cross_validate(t.absorbances, t.scalars, *t.response, fam, grid, K, seed, sel.model(), threads);

        ojson config;
        config["command"] = "cv";
        config["seed"] = seed;
        config["input"] = data.to_json(prep.schema);
        config["model"] = sel.to_json(ord);
        config["selection"] = {{"folds", K}, {"grid_count", sel.resolved_count(ord.size())}, {"grid_ratio", sel.grid_ratio}};
        config["selection"]["result"] = cv_table_json(rep);
        config["selection"]["penalty"] = penalty_json(rep.best);

        auto f = open_out(out);
        write_cv_csv(rep, f);
        write_config(config, out);
        std::cout << "selected: " << describe(rep.best) << ", score " << fmt(rep.mean_score[rep.best_index]) << " (se "
                  << fmt(rep.se_score[rep.best_index]) << ")\n";
        return 0;
    }
};

// ---- predict ---------------------------------------------------------------

struct PredictCommand {
    std::string model;
    std::string data;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", model, "Model JSON written by fit")->required()->check(CLI::ExistingFile);
        cmd->add_option("--data", data, "CSV with new spectra")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "Predictions CSV to write")->required();
    }

    int run() const {
        const ModelDocument doc = load_model(model);
        if (!doc.preprocessing) throw DataError("model file has no preprocessing metadata");
        const SpectraTable raw = read_csv(data, prediction_schema(*doc.preprocessing));
        const SpectraTable t = apply_preprocessing(raw, *doc.preprocessing);
        const Prediction pred = predict(doc.fit, t.absorbances, t.scalars);

        ojson config;
        config["command"] = "predict";
        config["model"] = model;
        config["data"] = data;
        config["family"] = to_string(doc.fit.family.kind);
        config["rows"] = t.n();

        auto f = open_out(out);
        write_predictions_csv(t.ids, pred, doc.fit.family.kind, f);
        write_config(config, out);
        std::cout << "predicted " << t.n() << " rows\n";
        return 0;
    }
};

// ---- bootstrap -------------------------------------------------------------

struct BootstrapCommand {
    std::string model;
    std::string data;
    std::string out;
    std::string intervals_out;
    int B = 1000;
    double conf = 0.95;
    std::string law = "mammen";

    void attach(CLI::App* cmd) {
        cmd->add_option("--model", model, "Gaussian model JSON written by fit")->required()->check(CLI::ExistingFile);
        cmd->add_option("--data", data, "The data the model was fitted on")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "Bands CSV to write")->required();
        cmd->add_option("--intervals-out", intervals_out, "Scalar-covariate interval CSV (default: <out>.intervals.csv)");
        cmd->add_option("--boot", B, "Number of bootstrap replicates")->check(CLI::PositiveNumber);
        cmd->add_option("--conf", conf, "Pointwise confidence level")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--law", law, "Auxiliary distribution")->check(CLI::IsMember({"mammen", "rademacher", "uniform"}));
    }

    int run(std::uint64_t seed, unsigned threads) const {
        const ModelDocument doc = load_model(model);
        if (!doc.preprocessing) throw DataError("model file has no preprocessing metadata");
        if (doc.fit.family.kind != Family::Gaussian)
            throw DataError("bootstrap bands need a Gaussian model, this one is " + to_string(doc.fit.family.kind));
        IngestSchema s = prediction_schema(*doc.preprocessing);
        s.response_required = true;
        const SpectraTable t = apply_preprocessing(read_csv(data, s), *doc.preprocessing);
        if (!t.response) throw DataError("data file '" + data + "' has no response column");

        BootstrapOptions opts;
        opts.B = B;
        opts.law = auxiliary_law_from_string(law);
        opts.seed = seed;
        opts.threads = threads;
        const BootstrapBands bands = wild_bootstrap(doc.fit, t.absorbances, t.scalars, *t.response, conf, opts);

        ojson config;
        config["command"] = "bootstrap";
        config["seed"] = seed;
        config["model"] = model;
        config["data"] = data;
        config["replicates"] = B;
        config["conf_level"] = conf;
        config["law"] = law;
        config["penalty"] = penalty_json(doc.fit.penalty);
        int unconverged = 0;
        for (bool c : bands.replicate_converged) unconverged += c ? 0 : 1;
        config["unconverged_replicates"] = unconverged;

        auto f = open_out(out);
        write_bands_csv(bands, doc.fit.grid, f);
        const std::string iv_path = intervals_out.empty() ? out + ".intervals.csv" : intervals_out;
        auto iv = open_out(iv_path);
        write_intervals_csv(bands, iv);
        write_config(config, out);

        std::size_t sig = 0;
        for (bool m : bands.significant_mask) sig += m ? 1 : 0;
        std::cout << "bands: " << sig << " of " << bands.significant_mask.size()
                  << " grid points exclude zero at level " << fmt(conf) << '\n';
        for (const auto& si : bands.scalar_intervals)
            std::cout << "  " << si.name << ": " << fmt(si.estimate) << " [" << fmt(si.lower) << ", " << fmt(si.upper)
                      << "]" << (si.significant ? " *" : "") << '\n';
        return 0;
    }
};

// ---- simulate --------------------------------------------------------------

struct SimulateCommand {
    std::string scenario = "a";
    std::string target = "f2";
    Eigen::Index n = 250;
    Eigen::Index p = 100;
    double snr = 4.0;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--scenario", scenario, "Scenario")->check(CLI::IsMember({"a", "b", "c"}));
        cmd->add_option("--target", target, "Coefficient function")->check(CLI::IsMember({"f1", "f2", "f3"}));
        cmd->add_option("--n", n, "Observations")->check(CLI::PositiveNumber);
        cmd->add_option("--p", p, "Grid points")->check(CLI::Range(8, 1000000));
        cmd->add_option("--snr", snr, "Signal-to-noise ratio (Gaussian scenarios)")->check(CLI::PositiveNumber);
        cmd->add_option("--out", out, "Dataset CSV to write; the true coefficient goes to <out>.truth.csv")->required();
    }

    int run(std::uint64_t seed) const {
        ScenarioSpec spec;
        spec.kind = scenario_from_string(scenario);
        spec.target = target_from_string(target);
        spec.n = n;
        spec.p = p;
        spec.snr = snr;
        spec.seed = seed;
        spec.validate();
        const SyntheticDataset d = gen_scenario(spec);

        SpectraTable t;
        for (Eigen::Index i = 0; i < n; ++i) t.ids.push_back("obs" + std::to_string(i + 1));
        t.wavelengths = d.grid;
        t.absorbances = d.X;
        t.response = d.y;
        t.scalars = d.Z.size() == 0 ? Matrix(n, 0) : d.Z;
        for (Eigen::Index k = 0; k < t.scalars.cols(); ++k) t.scalar_names.push_back("z" + std::to_string(k + 1));

        ojson config;
        config["command"] = "simulate";
        config["seed"] = seed;
        config["scenario"] = scenario;
        config["target"] = target;
        config["n"] = n;
        config["p"] = p;
        config["snr"] = snr;
        config["family"] = to_string(spec.family().kind);
        config["noise_sd"] = d.sigma;

        auto f = open_out(out);
        write_csv(t, f);
        auto truth = open_out(out + ".truth.csv");
        truth << "grid,domain,f_true\n";
        for (Eigen::Index j = 0; j < p; ++j)
            truth << fmt(d.grid[j]) << ',' << fmt(d.domain_grid[j]) << ',' << fmt(d.f_true[j]) << '\n';
        write_config(config, out);
        std::cout << "wrote " << n << " observations on " << p << " grid points\n";
        return 0;
    }
};

// ---- benchmark -------------------------------------------------------------

struct BenchmarkCommand {
    int reps = 100;
    std::string scenarios = "a,b,c";
    std::string targets = "f1,f2,f3";
    std::string estimators = "TF-4,TF-1,MTF,SPL";
    Eigen::Index n = 250;
    Eigen::Index p = 100;
    std::string out;

    void attach(CLI::App* cmd) {
        cmd->add_option("--reps", reps, "Repetitions per cell (at least 10)");
        cmd->add_option("--scenario", scenarios, "Comma-separated scenarios");
        cmd->add_option("--target", targets, "Comma-separated coefficient functions");
        cmd->add_option("--estimators", estimators, "Comma-separated estimators (TF-4, TF-1, MTF, SPL)");
        cmd->add_option("--n", n, "Observations")->check(CLI::PositiveNumber);
        cmd->add_option("--p", p, "Grid points")->check(CLI::Range(8, 1000000));
        cmd->add_option("--out", out, "Table CSV to write")->required();
    }

    int run(std::uint64_t seed, unsigned threads) const {
        BenchmarkConfig cfg;
        cfg.reps = reps;
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.n = n;
        cfg.p = p;
        cfg.scenarios.clear();
        cfg.targets.clear();
        cfg.estimators.clear();
        for (const auto& s : split_list(scenarios)) cfg.scenarios.push_back(scenario_from_string(s));
        for (const auto& s : split_list(targets)) cfg.targets.push_back(target_from_string(s));
        for (const auto& s : split_list(estimators)) {
            bool found = false;
            for (BenchEstimator e : {BenchEstimator::TF4, BenchEstimator::TF1, BenchEstimator::MTF, BenchEstimator::SPL})
                if (to_string(e) == s) {
                    cfg.estimators.push_back(e);
                    found = true;
                }
            if (!found) throw UsageError("unknown estimator '" + s + "'");
        }
        const BenchmarkReport report = run_table1(cfg);

        ojson config;
        config["command"] = "benchmark";
        config["seed"] = seed;
        config["reps"] = reps;
        config["n"] = n;
        config["p"] = p;
        config["snr"] = cfg.snr;
        config["scenarios"] = split_list(scenarios);
        config["targets"] = split_list(targets);
        config["estimators"] = split_list(estimators);
        config["grid"] = {{"single_count", cfg.grid_count}, {"single_ratio", cfg.grid_ratio},
                          {"mixed_count", cfg.mixed_count}, {"mixed_ratio", cfg.mixed_ratio},
                          {"spline_count", cfg.spline_count}};
        ojson fails = ojson::object();
        for (const auto& r : report.rows)
            if (r.failures > 0) fails[to_string(r.scenario) + "/" + to_string(r.target) + "/" + to_string(r.estimator)] = r.failures;
        config["failed_repetitions"] = fails;

        auto f = open_out(out);
        write_benchmark_csv(report, f);
        write_config(config, out);
        std::cout << "wrote " << report.rows.size() << " rows\n";
        return 0;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trend-filtering regression of scalar responses on spectra"};
    app.require_subcommand(1);
    std::uint64_t seed = 1;
    unsigned threads = default_threads();
    app.add_option("--seed", seed, "Random seed (falls back to SPECTF_SEED, then 1)")->envname("SPECTF_SEED");
    app.add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

    FitCommand fit;
    CvCommand cv;
    PredictCommand pred;
    BootstrapCommand boot;
    SimulateCommand sim;
    BenchmarkCommand bench;
    CLI::App* c_fit = app.add_subcommand("fit", "Fit a model and write it as JSON");
    CLI::App* c_cv = app.add_subcommand("cv", "Cross-validate a penalty grid");
    CLI::App* c_pred = app.add_subcommand("predict", "Predict new spectra with a fitted model");
    CLI::App* c_boot = app.add_subcommand("bootstrap", "Wild-bootstrap bands for a Gaussian model");
    CLI::App* c_sim = app.add_subcommand("simulate", "Write a synthetic dataset");
    CLI::App* c_bench = app.add_subcommand("benchmark", "Run the simulation study");
    fit.attach(c_fit);
    cv.attach(c_cv);
    pred.attach(c_pred);
    boot.attach(c_boot);
    sim.attach(c_sim);
    bench.attach(c_bench);
    // --seed and --threads are accepted after the subcommand as well
    for (CLI::App* sub : {c_fit, c_cv, c_pred, c_boot, c_sim, c_bench}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_fit->parsed()) return fit.run(seed, threads);
        if (c_cv->parsed()) return cv.run(seed, threads);
        if (c_pred->parsed()) return pred.run();
        if (c_boot->parsed()) return boot.run(seed, threads);
        if (c_sim->parsed()) return sim.run(seed);
        if (c_bench->parsed()) return bench.run(seed, threads);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
