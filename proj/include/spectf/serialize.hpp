#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spectf/errors.hpp"
#include "spectf/inference.hpp"
#include "spectf/ingest.hpp"
#include "spectf/models.hpp"

namespace spectf {

using ojson = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

/// How the training table was read and transformed, so new spectra can be
/// brought onto the same grid and coding.
struct Preprocessing {
    std::string id_column = "id";
    std::optional<std::string> response_column = std::string("response");
    std::vector<std::string> scalar_columns;  // source columns, before indicator expansion
    std::vector<CategoricalCoding> categorical;
    std::vector<std::string> scalar_names;    // after expansion, as seen by the model
    std::string transform = "identity";
    int aggregation = 1;
    PartialBlock partial_block = PartialBlock::Keep;
    Eigen::Index raw_p = 0;
    Eigen::VectorXd wavelengths;  // after aggregation
    std::optional<Standardization> standardization;
};

namespace detail {

inline ojson vec_json(const Eigen::VectorXd& v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Eigen::VectorXd json_vec(const ojson& a) {
    if (!a.is_array()) throw DataError("expected a numeric array in the model file");
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw DataError("non-numeric entry in a model array");
        v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    }
    return v;
}

inline std::string partial_name(PartialBlock b) { return b == PartialBlock::Drop ? "drop" : "keep"; }

/// Names of the source scalar columns, in the order their indicators appear.
inline std::vector<std::string> source_scalar_columns(const SpectraTable& t) {
    std::vector<std::string> out;
    for (const auto& name : t.scalar_names) {
        std::string source = name;
        for (const auto& c : t.categorical)
            if (name.size() > c.column.size() && name.compare(0, c.column.size() + 1, c.column + "=") == 0)
                source = c.column;
        if (std::find(out.begin(), out.end(), source) == out.end()) out.push_back(source);
    }
    // a categorical column with a single level contributes no indicator but still has a role
    for (const auto& c : t.categorical)
        if (std::find(out.begin(), out.end(), c.column) == out.end()) out.push_back(c.column);
    return out;
}

} // namespace detail

/// Metadata for a table read with `schema` and preprocessed into `processed`.
inline Preprocessing preprocessing_of(const SpectraTable& raw, const IngestSchema& schema,
                                      const SpectraTable& processed) {
    Preprocessing pp;
    pp.id_column = schema.id_column;
    pp.response_column = schema.response_column;
    pp.scalar_columns = detail::source_scalar_columns(raw);
    pp.categorical = raw.categorical;
    pp.scalar_names = raw.scalar_names;
    pp.transform = processed.response_transform;
    pp.aggregation = processed.aggregation;
    pp.partial_block = schema.partial_block;
    pp.raw_p = raw.p();
    pp.wavelengths = processed.wavelengths;
    pp.standardization = processed.standardization;
    return pp;
}

/// Schema that reads new data with the training roles and categorical levels.
inline IngestSchema prediction_schema(const Preprocessing& pp) {
    IngestSchema s;
    s.id_column = pp.id_column;
    s.response_column = pp.response_column;
    s.response_required = false;
    s.scalar_columns = pp.scalar_columns;
    for (const auto& c : pp.categorical) s.categorical[c.column] = c.levels;
    s.transform = pp.transform;
    s.aggregate = pp.aggregation;
    s.partial_block = pp.partial_block;
    return s;
}

/// Applies the stored aggregation, transform and standardization to a raw
/// table, checking that it lands on the training grid.
inline SpectraTable apply_preprocessing(const SpectraTable& raw, const Preprocessing& pp) {
    if (raw.p() != pp.raw_p)
        throw DataError("model was trained on spectra with " + std::to_string(pp.raw_p) + " wavelengths, got " +
                        std::to_string(raw.p()));
    if (raw.scalar_names != pp.scalar_names)
        throw DataError("scalar covariates do not match the ones the model was trained on");
    SpectraTable out = aggregate_wavelengths(raw, pp.aggregation, pp.partial_block);
    if (out.p() != pp.wavelengths.size()) throw DataError("aggregated grid length does not match the model");
    const double tol = 1e-9 * std::max(1.0, pp.wavelengths.cwiseAbs().maxCoeff());
    if ((out.wavelengths - pp.wavelengths).cwiseAbs().maxCoeff() > tol)
        throw DataError("wavelengths do not match the model grid");
    if (out.response) out = transform_response(out, pp.transform);
    if (pp.standardization) {
        out.absorbances = apply_standardization(out.absorbances, *pp.standardization);
        out.standardization = pp.standardization;
    }
    return out;
}

inline ojson to_json(const Preprocessing& pp) {
    ojson j;
    j["id_column"] = pp.id_column;
    j["response_column"] = pp.response_column ? ojson(*pp.response_column) : ojson(nullptr);
    j["scalar_columns"] = pp.scalar_columns;
    ojson cats = ojson::array();
    for (const auto& c : pp.categorical) cats.push_back({{"column", c.column}, {"levels", c.levels}});
    j["categorical"] = cats;
    j["scalar_names"] = pp.scalar_names;
    j["transform"] = pp.transform;
    j["aggregation"] = pp.aggregation;
    j["partial_block"] = detail::partial_name(pp.partial_block);
    j["raw_p"] = pp.raw_p;
    j["wavelengths"] = detail::vec_json(pp.wavelengths);
    if (pp.standardization) {
        j["standardization"] = {{"mean", detail::vec_json(pp.standardization->mean)},
                                {"scale", detail::vec_json(pp.standardization->scale)}};
    } else {
        j["standardization"] = nullptr;
    }
    return j;
}

inline Preprocessing preprocessing_from_json(const ojson& j) {
    Preprocessing pp;
    pp.id_column = j.at("id_column").get<std::string>();
    if (j.at("response_column").is_null()) {
        pp.response_column.reset();
    } else {
        pp.response_column = j.at("response_column").get<std::string>();
    }
    pp.scalar_columns = j.at("scalar_columns").get<std::vector<std::string>>();
    for (const auto& c : j.at("categorical")) {
        CategoricalCoding coding;
        coding.column = c.at("column").get<std::string>();
        coding.levels = c.at("levels").get<std::vector<std::string>>();
        if (coding.levels.empty()) throw DataError("categorical column without levels in the model file");
        coding.reference = coding.levels.front();
        pp.categorical.push_back(std::move(coding));
    }
    pp.scalar_names = j.at("scalar_names").get<std::vector<std::string>>();
    pp.transform = j.at("transform").get<std::string>();
    pp.aggregation = j.at("aggregation").get<int>();
    pp.partial_block = j.at("partial_block").get<std::string>() == "drop" ? PartialBlock::Drop : PartialBlock::Keep;
    pp.raw_p = j.at("raw_p").get<Eigen::Index>();
    pp.wavelengths = detail::json_vec(j.at("wavelengths"));
    if (!j.at("standardization").is_null())
        pp.standardization = Standardization{detail::json_vec(j.at("standardization").at("mean")),
                                             detail::json_vec(j.at("standardization").at("scale"))};
    return pp;
}

inline ojson to_json(const PenaltySpec& pen) {
    ojson terms = ojson::array();
    for (const auto& t : pen.terms) terms.push_back({{"order", t.order}, {"lambda", t.lambda}});
    return terms;
}

inline PenaltySpec penalty_from_json(const ojson& j) {
    PenaltySpec pen;
    for (const auto& t : j) pen.terms.push_back({t.at("order").get<int>(), t.at("lambda").get<double>()});
    return pen;
}

/// A fitted model with optional preprocessing metadata and the run config
/// that produced it.
struct ModelDocument {
    TfFit fit;
    std::optional<Preprocessing> preprocessing;
    ojson config = ojson::object();
};

inline ojson to_json(const ModelDocument& doc) {
    const TfFit& fit = doc.fit;
    ojson j;
    j["format"] = "spectf-model";
    j["version"] = kModelFormatVersion;
    j["estimator"] = fit.estimator == Estimator::Spline ? "spline" : "trend_filter";
    j["family"] = to_string(fit.family.kind);
    j["penalty"] = to_json(fit.penalty);
    j["spline_lambda"] = fit.spline_lambda;
    j["intercept"] = fit.intercept;
    j["grid"] = detail::vec_json(fit.grid);
    j["f_hat"] = detail::vec_json(fit.f_hat);
    j["scalar_names"] = fit.scalar_names;
    j["gamma_hat"] = detail::vec_json(fit.gamma_hat);
    j["sigma2"] = fit.sigma2;
    const FitDiagnostics& d = fit.diagnostics;
    j["diagnostics"] = {{"admm_iterations", d.admm_iterations}, {"outer_iterations", d.outer_iterations},
                        {"primal_residual", d.primal_res},     {"dual_residual", d.dual_res},
                        {"objective", d.objective},            {"converged", d.converged},
                        {"objective_trace", d.objective_trace}};
    // solver state, so that refits (bootstrap) can warm-start exactly as in memory
    j["solver_state"] = {{"alpha", detail::vec_json(fit.state.alpha)},
                         {"delta", detail::vec_json(fit.state.delta)},
                         {"u", detail::vec_json(fit.state.u)},
                         {"rho", fit.state.rho},
                         {"iterations", fit.state.iter}};
    j["preprocessing"] = doc.preprocessing ? to_json(*doc.preprocessing) : ojson(nullptr);
    j["config"] = doc.config;
    return j;
}

inline ModelDocument model_from_json(const ojson& j) {
    try {
        if (j.value("format", std::string()) != "spectf-model") throw DataError("not a spectf model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw DataError("unsupported model format version " + std::to_string(version));
        ModelDocument doc;
        TfFit& fit = doc.fit;
        fit.estimator = j.at("estimator").get<std::string>() == "spline" ? Estimator::Spline : Estimator::TrendFilter;
        fit.family.kind = family_from_string(j.at("family").get<std::string>());
        fit.penalty = penalty_from_json(j.at("penalty"));
        fit.spline_lambda = j.at("spline_lambda").get<double>();
        fit.intercept = j.at("intercept").get<bool>();
        fit.grid = detail::json_vec(j.at("grid"));
        fit.f_hat = detail::json_vec(j.at("f_hat"));
        fit.scalar_names = j.at("scalar_names").get<std::vector<std::string>>();
        fit.gamma_hat = detail::json_vec(j.at("gamma_hat"));
        fit.sigma2 = j.at("sigma2").get<double>();
        if (fit.grid.size() != fit.f_hat.size()) throw DataError("model grid and f_hat lengths differ");
        if (static_cast<Eigen::Index>(fit.scalar_names.size()) != fit.gamma_hat.size())
            throw DataError("model scalar names and gamma_hat lengths differ");
        const ojson& d = j.at("diagnostics");
        fit.diagnostics.admm_iterations = d.at("admm_iterations").get<int>();
        fit.diagnostics.outer_iterations = d.at("outer_iterations").get<int>();
        fit.diagnostics.primal_res = d.at("primal_residual").get<double>();
        fit.diagnostics.dual_res = d.at("dual_residual").get<double>();
        fit.diagnostics.objective = d.at("objective").get<double>();
        fit.diagnostics.converged = d.at("converged").get<bool>();
        fit.diagnostics.objective_trace = d.at("objective_trace").get<std::vector<double>>();
        const ojson& s = j.at("solver_state");
        fit.state.alpha = detail::json_vec(s.at("alpha"));
        fit.state.delta = detail::json_vec(s.at("delta"));
        fit.state.u = detail::json_vec(s.at("u"));
        fit.state.rho = s.at("rho").get<std::vector<double>>();
        fit.state.iter = s.at("iterations").get<int>();
        fit.state.converged = fit.diagnostics.converged;
        if (!j.at("preprocessing").is_null()) doc.preprocessing = preprocessing_from_json(j.at("preprocessing"));
        doc.config = j.at("config");
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

inline void save_model(const ModelDocument& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << to_json(doc).dump(2) << '\n';
}

inline ModelDocument load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

/// wavelength,estimate,lower,upper,significant
inline void write_bands_csv(const BootstrapBands& bands, const Eigen::VectorXd& grid, std::ostream& out) {
    if (grid.size() != bands.estimate.size()) throw DimensionError("grid and band lengths differ");
    out << "wavelength,estimate,lower,upper,significant\n";
    for (Eigen::Index j = 0; j < grid.size(); ++j)
        out << detail::format_double(grid[j]) << ',' << detail::format_double(bands.estimate[j]) << ','
            << detail::format_double(bands.lower[j]) << ',' << detail::format_double(bands.upper[j]) << ','
            << (bands.significant_mask[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
}

/// covariate,estimate,lower,upper,significant
inline void write_intervals_csv(const BootstrapBands& bands, std::ostream& out) {
    out << "covariate,estimate,lower,upper,significant\n";
    for (const auto& s : bands.scalar_intervals)
        out << detail::quote_if_needed(s.name) << ',' << detail::format_double(s.estimate) << ','
            << detail::format_double(s.lower) << ',' << detail::format_double(s.upper) << ','
            << (s.significant ? 1 : 0) << '\n';
}

/// id,prediction on the response scale; Bernoulli models report the
/// log-odds as the prediction, then the probability and label.
inline void write_predictions_csv(const std::vector<std::string>& ids, const Prediction& pred, Family family,
                                  std::ostream& out) {
    const bool binary = family == Family::Bernoulli;
    out << (binary ? "id,prediction,probability,label\n" : "id,prediction\n");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out << detail::quote_if_needed(ids[i]) << ',' << detail::format_double(binary ? pred.eta[k] : pred.mean[k]);
        if (binary) out << ',' << detail::format_double(pred.mean[k]) << ',' << pred.label[i];
        out << '\n';
    }
}

} // namespace spectf
