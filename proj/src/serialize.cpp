#include "flip/serialize.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "flip/errors.hpp"

namespace flip {

namespace {

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json int_matrix_to_json(const Eigen::MatrixXi& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

const Json& field(const Json& value, const char* name) {
    if (!value.is_object() || !value.contains(name))
        throw ValidationError(std::string("missing field '") + name + "'");
    return value.at(name);
}

Matrix matrix_from_json(const Json& rows, const char* name) {
    if (!rows.is_array())
        throw ValidationError(std::string("field '") + name + "' must be an array");
    const Index r = static_cast<Index>(rows.size());
    Index c = -1;
    Matrix out;
    for (Index i = 0; i < r; ++i) {
        const Json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array())
            throw ValidationError(std::string("field '") + name +
                                  "' must be an array of arrays");
        if (c < 0) {
            c = static_cast<Index>(row.size());
            out.resize(r, c);
        }
        if (static_cast<Index>(row.size()) != c)
            throw ValidationError(std::string("ragged rows in field '") + name + "'");
        for (Index j = 0; j < c; ++j) {
            const Json& cell = row[static_cast<std::size_t>(j)];
            if (!cell.is_number())
                throw ValidationError(std::string("non-numeric entry in field '") +
                                      name + "'");
            out(i, j) = cell.get<double>();
        }
    }
    if (r == 0) out.resize(0, 0);
    return out;
}

Vector vector_from_json(const Json& arr, const char* name) {
    if (!arr.is_array())
        throw ValidationError(std::string("field '") + name + "' must be an array");
    Vector out(static_cast<Index>(arr.size()));
    for (Index i = 0; i < out.size(); ++i) {
        const Json& cell = arr[static_cast<std::size_t>(i)];
        if (!cell.is_number())
            throw ValidationError(std::string("non-numeric entry in field '") + name +
                                  "'");
        out(i) = cell.get<double>();
    }
    return out;
}

std::vector<std::string> strings_from_json(const Json& arr, const char* name) {
    if (!arr.is_array())
        throw ValidationError(std::string("field '") + name + "' must be an array");
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const Json& cell : arr) {
        if (!cell.is_string())
            throw ValidationError(std::string("non-string entry in field '") + name +
                                  "'");
        out.push_back(cell.get<std::string>());
    }
    return out;
}

long line_of_byte(const std::string& text, std::size_t byte) {
    long line = 1;
    const std::size_t stop = std::min(byte, text.size());
    for (std::size_t i = 0; i < stop; ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace

Json panel_to_json(const SignPanel& panel) {
    Json out;
    out["entities"] = panel.entities;
    out["timestamps"] = panel.timestamps;
    out["signs"] = int_matrix_to_json(panel.signs);
    out["zero_returns"] = panel.zero_returns;
    return out;
}

SignPanel panel_from_json(const Json& value) {
    SignPanel panel;
    panel.entities = strings_from_json(field(value, "entities"), "entities");
    panel.timestamps = strings_from_json(field(value, "timestamps"), "timestamps");
    const Json& rows = field(value, "signs");
    if (!rows.is_array()) throw ValidationError("field 'signs' must be an array");
    panel.signs.resize(static_cast<Index>(panel.entities.size()),
                       static_cast<Index>(panel.timestamps.size()));
    if (static_cast<Index>(rows.size()) != panel.signs.rows())
        throw ValidationError("field 'signs' must hold one row per entity");
    for (Index i = 0; i < panel.signs.rows(); ++i) {
        const Json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != panel.signs.cols())
            throw ValidationError("field 'signs' rows must match the timestamp count");
        for (Index t = 0; t < panel.signs.cols(); ++t) {
            const Json& cell = row[static_cast<std::size_t>(t)];
            if (!cell.is_number_integer())
                throw ValidationError("orientations must be integers");
            panel.signs(i, t) = cell.get<int>();
        }
    }
    if (value.contains("zero_returns")) {
        if (!value.at("zero_returns").is_number_integer())
            throw ValidationError("field 'zero_returns' must be an integer");
        panel.zero_returns = value.at("zero_returns").get<std::int64_t>();
    }
    panel.validate();
    return panel;
}

Json coupling_to_json(const CouplingSet& params) {
    Json out;
    out["n"] = params.size();
    out["lag_count"] = params.lag_count();
    out["j"] = matrix_to_json(params.j);
    out["h"] = vector_to_json(params.h);
    Json lags = Json::array();
    for (const Matrix& k : params.lags) lags.push_back(matrix_to_json(k));
    out["lags"] = lags;
    return out;
}

CouplingSet coupling_from_json(const Json& value) {
    CouplingSet params;
    params.j = matrix_from_json(field(value, "j"), "j");
    params.h = vector_from_json(field(value, "h"), "h");
    const Json& lags = field(value, "lags");
    if (!lags.is_array()) throw ValidationError("field 'lags' must be an array");
    for (const Json& k : lags) params.lags.push_back(matrix_from_json(k, "lags"));
    if (value.contains("n") &&
        value.at("n").get<Index>() != params.size())
        throw ValidationError("declared entity count does not match the matrices");
    if (value.contains("lag_count") &&
        value.at("lag_count").get<Index>() != params.lag_count())
        throw ValidationError("declared lag count does not match the matrices");
    params.validate();
    return params;
}

Json reversal_coupling_to_json(const ReversalCouplingSet& params) {
    Json out;
    out["n"] = params.size();
    out["w"] = matrix_to_json(params.w);
    return out;
}

ReversalCouplingSet reversal_coupling_from_json(const Json& value) {
    ReversalCouplingSet params;
    params.w = matrix_from_json(field(value, "w"), "w");
    if (value.contains("n") && value.at("n").get<Index>() != params.size())
        throw ValidationError("declared entity count does not match the matrix");
    params.validate();
    return params;
}

Json dg_to_json(const DgParams& params) {
    Json out;
    out["mu"] = vector_to_json(params.mu);
    out["sigma"] = matrix_to_json(params.sigma);
    return out;
}

DgParams dg_from_json(const Json& value) {
    DgParams params;
    params.mu = vector_from_json(field(value, "mu"), "mu");
    params.sigma = matrix_from_json(field(value, "sigma"), "sigma");
    if (params.sigma.rows() != params.mu.size() ||
        params.sigma.cols() != params.mu.size())
        throw ValidationError("latent covariance shape does not match the means");
    return params;
}

Json poisson_to_json(const PoissonModel& model) {
    Json out;
    out["rate"] = model.rate;
    return out;
}

PoissonModel poisson_from_json(const Json& value) {
    PoissonModel model;
    const Json& rate = field(value, "rate");
    if (!rate.is_number()) throw ValidationError("field 'rate' must be a number");
    model.rate = rate.get<double>();
    if (!(model.rate >= 0.0)) throw ValidationError("rate must be non-negative");
    return model;
}

Json report_to_json(const FitReport& report) {
    Json out;
    out["converged"] = report.converged;
    out["iterations_used"] = report.iterations_used;
    out["lambda"] = report.lambda;
    out["method"] = report.method;
    out["objective"] = report.objective;
    out["objective_trace"] = report.objective_trace;
    out["warnings"] = report.warnings;
    return out;
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
    write_text_file(path, value.dump(2) + "\n");
}

Json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        // Re-parse with exceptions to recover the error position.
        try {
            [[maybe_unused]] const Json reparsed = Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw ParseError(std::string("invalid JSON in ") + path.string() + ": " +
                                 e.what(),
                             line_of_byte(text, e.byte));
        }
        throw ParseError("invalid JSON in " + path.string(), 0);
    }
    return value;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw ValidationError("cannot read file: " + path.string());
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open file for writing: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw ValidationError("cannot write file: " + path.string());
}

std::string csv_number(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ULL;
    }
    char buffer[17];
    for (int i = 15; i >= 0; --i) {
        buffer[i] = "0123456789abcdef"[hash & 0xF];
        hash >>= 4;
    }
    buffer[16] = '\0';
    return std::string(buffer, 16);
}

std::string hash_file(const std::filesystem::path& path) {
    return fnv1a_hex(read_text_file(path));
}

}  // namespace flip
