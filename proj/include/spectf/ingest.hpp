#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spectf/errors.hpp"
#include "spectf/random.hpp"

namespace spectf {

/// Indicator coding of one categorical column; `reference` gets no column.
struct CategoricalCoding {
    std::string column;
    std::string reference;
    std::vector<std::string> levels;  // all levels, reference first
};

enum class PartialBlock { Keep, Drop };

struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
};

struct SpectraTable {
    std::vector<std::string> ids;
    Eigen::VectorXd wavelengths;
    Eigen::MatrixXd absorbances;  // n x p
    std::optional<Eigen::VectorXd> response;
    std::vector<std::string> scalar_names;  // after indicator expansion
    Eigen::MatrixXd scalars;                // n x r
    std::vector<CategoricalCoding> categorical;
    std::string response_transform = "identity";
    int aggregation = 1;
    std::optional<Standardization> standardization;

    Eigen::Index n() const { return absorbances.rows(); }
    Eigen::Index p() const { return absorbances.cols(); }
};

/// Column roles and preprocessing, usually read from a JSON schema file.
struct IngestSchema {
    std::string id_column = "id";
    std::optional<std::string> response_column = std::string("response");
    bool response_required = true;
    // when set, exactly these scalar columns; otherwise every non-wavelength column
    std::optional<std::vector<std::string>> scalar_columns;
    // categorical columns, with optional fixed level order (reference first)
    std::map<std::string, std::vector<std::string>> categorical;
    std::string transform = "identity";
    int aggregate = 1;
    PartialBlock partial_block = PartialBlock::Keep;
    bool standardize = false;

    static IngestSchema from_json(const nlohmann::json& j) {
        IngestSchema s;
        if (!j.is_object()) throw DataError("schema must be a JSON object");
        static const std::set<std::string> known = {"id",        "response",  "scalars",       "categorical",
                                                    "transform", "aggregate", "partial_block", "standardize"};
        for (const auto& item : j.items())
            if (!known.count(item.key())) throw DataError("unknown schema key '" + item.key() + "'");
        if (j.contains("id")) s.id_column = j.at("id").get<std::string>();
        if (j.contains("response")) {
            if (j.at("response").is_null()) {
                s.response_column.reset();
            } else {
                s.response_column = j.at("response").get<std::string>();
            }
        }
        if (j.contains("scalars")) s.scalar_columns = j.at("scalars").get<std::vector<std::string>>();
        if (j.contains("categorical")) {
            const auto& c = j.at("categorical");
            if (c.is_array()) {
                for (const auto& name : c) s.categorical[name.get<std::string>()] = {};
            } else {
                for (const auto& [name, levels] : c.items()) s.categorical[name] = levels.get<std::vector<std::string>>();
            }
        }
        if (j.contains("transform")) s.transform = j.at("transform").get<std::string>();
        if (j.contains("aggregate")) s.aggregate = j.at("aggregate").get<int>();
        if (j.contains("partial_block")) {
            const auto mode = j.at("partial_block").get<std::string>();
            if (mode == "keep") {
                s.partial_block = PartialBlock::Keep;
            } else if (mode == "drop") {
                s.partial_block = PartialBlock::Drop;
            } else {
                throw DataError("partial_block must be 'keep' or 'drop'");
            }
        }
        if (j.contains("standardize")) s.standardize = j.at("standardize").get<bool>();
        if (s.transform != "identity" && s.transform != "log")
            throw DataError("transform must be 'identity' or 'log', got '" + s.transform + "'");
        if (s.aggregate < 1) throw DataError("aggregate must be at least 1");
        return s;
    }

    static IngestSchema from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open schema file '" + path + "'");
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("schema file '" + path + "': " + e.what());
        }
    }
};

namespace detail {

/// Splits one CSV record; double quotes protect commas, "" is a literal quote.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
    out.push_back(std::move(field));
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool is_missing(const std::string& raw) {
    const std::string s = trim(raw);
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

/// Shortest text that reads back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace detail

/// Parses a wide spectra CSV: `id,<scalars...>,response,<wavelength headers...>`.
/// Columns with numeric headers are wavelengths; they must be strictly
/// monotone and are stored ascending.
inline SpectraTable read_csv(std::istream& in, const IngestSchema& schema = {}) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            header = detail::split_csv_line(line, line_no);
            break;
        }
    }
    if (header.empty()) throw DataError("CSV file is empty (no header row)");
    for (auto& h : header) h = detail::trim(h);

    std::map<std::string, std::size_t> col_index;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!col_index.emplace(header[c], c).second) throw DataError("duplicated column '" + header[c] + "'");
    }
    auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = col_index.find(name);
        if (it == col_index.end()) return std::nullopt;
        return it->second;
    };

    const auto id_col = find_col(schema.id_column);
    if (!id_col) throw DataError("missing id column '" + schema.id_column + "'");
    std::optional<std::size_t> resp_col;
    if (schema.response_column) {
        resp_col = find_col(*schema.response_column);
        if (!resp_col && schema.response_required)
            throw DataError("missing response column '" + *schema.response_column + "'");
    }

    std::vector<std::size_t> wave_cols;
    std::vector<double> waves;
    std::vector<std::size_t> scalar_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == *id_col || (resp_col && c == *resp_col)) continue;
        const auto w = detail::parse_number(header[c]);
        if (w) {
            wave_cols.push_back(c);
            waves.push_back(*w);
        } else if (!schema.scalar_columns) {
            scalar_cols.push_back(c);
        }
    }
    if (schema.scalar_columns) {
        for (const auto& name : *schema.scalar_columns) {
            const auto c = find_col(name);
            if (!c) throw DataError("schema names scalar column '" + name + "' which is not in the file");
            scalar_cols.push_back(*c);
        }
    }
    for (const auto& entry : schema.categorical) {
        const std::string& name = entry.first;
        const auto c = find_col(name);
        if (!c || std::find(scalar_cols.begin(), scalar_cols.end(), *c) == scalar_cols.end())
            throw DataError("categorical column '" + name + "' is not a scalar column of the file");
    }
    if (wave_cols.empty()) throw DataError("no wavelength columns (numeric headers) found");

    // strictly monotone, stored ascending
    const std::size_t p = wave_cols.size();
    bool ascending = true, descending = true;
    for (std::size_t j = 1; j < p; ++j) {
        if (!(waves[j] > waves[j - 1])) ascending = false;
        if (!(waves[j] < waves[j - 1])) descending = false;
    }
    if (p > 1 && !ascending && !descending) throw DataError("wavelength headers are not strictly monotone");
    if (p > 1 && descending) {
        std::reverse(wave_cols.begin(), wave_cols.end());
        std::reverse(waves.begin(), waves.end());
    }

    // read records
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_line;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line, line_no);
        if (fields.size() != header.size())
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        rows.push_back(std::move(fields));
        row_line.push_back(line_no);
    }
    if (rows.empty()) throw DataError("CSV file has a header but no data rows");

    const auto n = static_cast<Eigen::Index>(rows.size());
    SpectraTable t;
    t.wavelengths = Eigen::Map<const Eigen::VectorXd>(waves.data(), static_cast<Eigen::Index>(p));
    t.absorbances.resize(n, static_cast<Eigen::Index>(p));
    std::set<std::string> seen;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        const std::string id = detail::trim(row[*id_col]);
        if (id.empty()) throw DataError("line " + std::to_string(row_line[static_cast<std::size_t>(i)]) + ": empty id");
        if (!seen.insert(id).second) throw DataError("duplicated id '" + id + "'");
        t.ids.push_back(id);
        for (std::size_t j = 0; j < p; ++j) {
            const std::string& raw = row[wave_cols[j]];
            const auto v = detail::is_missing(raw) ? std::nullopt : detail::parse_number(raw);
            if (!v || !std::isfinite(*v))
                throw DataError("row '" + id + "', column '" + header[wave_cols[j]] + "': " +
                                (detail::is_missing(raw) ? "missing absorbance" : "invalid absorbance '" + raw + "'"));
            t.absorbances(i, static_cast<Eigen::Index>(j)) = *v;
        }
    }

    if (resp_col) {
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::string& raw = rows[static_cast<std::size_t>(i)][*resp_col];
            const auto v = detail::is_missing(raw) ? std::nullopt : detail::parse_number(raw);
            if (!v || !std::isfinite(*v))
                throw DataError("row '" + t.ids[static_cast<std::size_t>(i)] + "', column '" + header[*resp_col] +
                                "': " + (detail::is_missing(raw) ? "missing response" : "invalid response '" + raw + "'"));
            y[i] = *v;
        }
        t.response = std::move(y);
    }

    // scalar covariates; categorical ones become indicators against the reference level
    std::vector<Eigen::VectorXd> cols;
    for (std::size_t c : scalar_cols) {
        const std::string& name = header[c];
        const auto cat = schema.categorical.find(name);
        bool numeric = cat == schema.categorical.end();
        if (numeric) {
            for (const auto& row : rows)
                if (!detail::is_missing(row[c]) && !detail::parse_number(row[c])) numeric = false;
        }
        if (numeric) {
            Eigen::VectorXd v(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::string& raw = rows[static_cast<std::size_t>(i)][c];
                if (detail::is_missing(raw))
                    throw DataError("row '" + t.ids[static_cast<std::size_t>(i)] + "', column '" + name +
                                    "': missing value");
                v[i] = *detail::parse_number(raw);
            }
            t.scalar_names.push_back(name);
            cols.push_back(std::move(v));
            continue;
        }
        CategoricalCoding coding;
        coding.column = name;
        if (cat != schema.categorical.end()) coding.levels = cat->second;
        const bool fixed = !coding.levels.empty();
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::string level = detail::trim(rows[static_cast<std::size_t>(i)][c]);
            if (detail::is_missing(level))
                throw DataError("row '" + t.ids[static_cast<std::size_t>(i)] + "', column '" + name + "': missing value");
            if (std::find(coding.levels.begin(), coding.levels.end(), level) == coding.levels.end()) {
                if (fixed)
                    throw DataError("row '" + t.ids[static_cast<std::size_t>(i)] + "', column '" + name +
                                    "': level '" + level + "' is not among the schema levels");
                coding.levels.push_back(level);
            }
        }
        coding.reference = coding.levels.front();
        for (std::size_t l = 1; l < coding.levels.size(); ++l) {
            Eigen::VectorXd v(n);
            for (Eigen::Index i = 0; i < n; ++i)
                v[i] = detail::trim(rows[static_cast<std::size_t>(i)][c]) == coding.levels[l] ? 1.0 : 0.0;
            t.scalar_names.push_back(name + "=" + coding.levels[l]);
            cols.push_back(std::move(v));
        }
        t.categorical.push_back(std::move(coding));
    }
    t.scalars.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) t.scalars.col(static_cast<Eigen::Index>(k)) = cols[k];
    return t;
}

inline SpectraTable read_csv(const std::string& path, const IngestSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    return read_csv(in, schema);
}

/// Writes the table in the input layout with shortest round-trip numbers, so
/// reading the output back reproduces every value bit for bit.
inline void write_csv(const SpectraTable& t, std::ostream& out) {
    out << "id";
    for (const auto& s : t.scalar_names) out << ',' << detail::quote_if_needed(s);
    if (t.response) out << ",response";
    for (Eigen::Index j = 0; j < t.p(); ++j) out << ',' << detail::format_double(t.wavelengths[j]);
    out << '\n';
    for (Eigen::Index i = 0; i < t.n(); ++i) {
        out << detail::quote_if_needed(t.ids[static_cast<std::size_t>(i)]);
        for (Eigen::Index k = 0; k < t.scalars.cols(); ++k) out << ',' << detail::format_double(t.scalars(i, k));
        if (t.response) out << ',' << detail::format_double((*t.response)[i]);
        for (Eigen::Index j = 0; j < t.p(); ++j) out << ',' << detail::format_double(t.absorbances(i, j));
        out << '\n';
    }
}

/// Averages non-overlapping blocks of `factor` adjacent wavelengths (both the
/// absorbances and the wavelength values). A trailing block with fewer than
/// `factor` columns is averaged as-is, or dropped on request.
inline SpectraTable aggregate_wavelengths(const SpectraTable& t, int factor,
                                          PartialBlock partial = PartialBlock::Keep) {
    if (factor < 1) throw DataError("aggregation factor must be at least 1");
    const Eigen::Index p = t.p();
    if (factor > p) throw DataError("aggregation factor " + std::to_string(factor) + " exceeds the " +
                                    std::to_string(p) + " wavelengths");
    if (factor == 1) return t;
    const Eigen::Index full = p / factor;
    const bool tail = p % factor != 0 && partial == PartialBlock::Keep;
    const Eigen::Index blocks = full + (tail ? 1 : 0);
    SpectraTable out = t;
    out.wavelengths.resize(blocks);
    out.absorbances.resize(t.n(), blocks);
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const Eigen::Index start = b * factor;
        const Eigen::Index len = std::min<Eigen::Index>(factor, p - start);
        out.wavelengths[b] = t.wavelengths.segment(start, len).mean();
        out.absorbances.col(b) = t.absorbances.middleCols(start, len).rowwise().mean();
    }
    out.aggregation = t.aggregation * factor;
    return out;
}

inline SpectraTable transform_response(const SpectraTable& t, const std::string& transform) {
    if (transform == "identity") return t;
    if (transform != "log") throw DataError("unknown response transform '" + transform + "'");
    if (!t.response) throw DataError("log transform requested but the table has no response");
    if (t.response_transform != "identity") throw DataError("response is already transformed");
    SpectraTable out = t;
    for (Eigen::Index i = 0; i < t.n(); ++i) {
        const double v = (*t.response)[i];
        if (!(v > 0.0))
            throw DataError("row '" + t.ids[static_cast<std::size_t>(i)] + "': log transform needs a positive response, got " +
                            detail::format_double(v));
        (*out.response)[i] = std::log(v);
    }
    out.response_transform = "log";
    return out;
}

/// Column-wise centring and scaling of the absorbances. Constant columns keep
/// scale 1.
inline Standardization standardization_of(const Eigen::MatrixXd& A) {
    Standardization s;
    const auto n = static_cast<double>(A.rows());
    s.mean = A.colwise().mean().transpose();
    s.scale.resize(A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        const double var = n > 1 ? (A.col(j).array() - s.mean[j]).square().sum() / (n - 1.0) : 0.0;
        s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

inline Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& A, const Standardization& s) {
    if (A.cols() != s.mean.size()) throw DimensionError("standardization does not match the number of wavelengths");
    return (A.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array();
}

inline SpectraTable standardize(const SpectraTable& t) {
    SpectraTable out = t;
    out.standardization = standardization_of(t.absorbances);
    out.absorbances = apply_standardization(t.absorbances, *out.standardization);
    return out;
}

/// All schema-driven preprocessing in order: aggregation, response transform,
/// standardization.
inline SpectraTable preprocess(const SpectraTable& t, const IngestSchema& schema) {
    SpectraTable out = aggregate_wavelengths(t, schema.aggregate, schema.partial_block);
    if (out.response) out = transform_response(out, schema.transform);
    if (schema.standardize) out = standardize(out);
    return out;
}

/// Deterministic random split; returns (train, holdout) row indices, each sorted.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_holdout(Eigen::Index n, double fraction,
                                                                                     std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("holdout fraction must lie in (0, 1)");
    const auto h = static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(n)));
    if (h < 1 || h >= n) throw DataError("holdout fraction leaves an empty training or holdout set");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng = substream(seed, streams::folds, 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<Eigen::Index> hold(idx.begin(), idx.begin() + h), train(idx.begin() + h, idx.end());
    std::sort(hold.begin(), hold.end());
    std::sort(train.begin(), train.end());
    return {train, hold};
}

/// Rows `rows` of a table, in the given order.
inline SpectraTable take_rows(const SpectraTable& t, const std::vector<Eigen::Index>& rows) {
    SpectraTable out = t;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.ids.clear();
    out.absorbances.resize(m, t.p());
    out.scalars.resize(m, t.scalars.cols());
    if (t.response) out.response = Eigen::VectorXd(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        out.ids.push_back(t.ids[static_cast<std::size_t>(r)]);
        out.absorbances.row(i) = t.absorbances.row(r);
        if (t.scalars.cols() > 0) out.scalars.row(i) = t.scalars.row(r);
        if (t.response) (*out.response)[i] = (*t.response)[r];
    }
    return out;
}

} // namespace spectf
