#include "flip/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace flip {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

double parse_price(const std::string& text, long line_no, const std::string& column) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw ParseError("could not parse " + column + " value '" + text + "'", line_no);
    return v;
}

}  // namespace

PricePanel load_price_csv(const std::filesystem::path& path, const CsvFormat& format) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file: " + path.string());

    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    ++line_no;
    const std::vector<std::string> header = split_csv_line(strip_cr(line));
    auto column_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ParseError("header is missing column '" + name + "'", 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ts_col = column_of(format.timestamp_column);
    const std::size_t ent_col = column_of(format.entity_column);
    const std::size_t open_col = column_of(format.open_column);
    const std::size_t close_col = column_of(format.close_column);
    const std::size_t min_cols =
        1 + std::max({ts_col, ent_col, open_col, close_col});

    struct Cell {
        double open;
        double close;
    };
    std::map<std::string, std::size_t> bin_of;            // timestamp -> ordered later
    std::vector<std::string> entities;                    // first-appearance order
    std::unordered_map<std::string, std::size_t> ent_of;
    std::map<std::pair<std::size_t, std::string>, Cell> cells;  // (entity, timestamp)

    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = strip_cr(line);
        if (row.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(row);
        if (fields.size() < min_cols)
            throw ParseError("expected at least " + std::to_string(min_cols) +
                                 " columns, got " + std::to_string(fields.size()),
                             line_no);
        const std::string& ts = fields[ts_col];
        const std::string& ent = fields[ent_col];
        if (ts.empty() || ent.empty())
            throw ParseError("empty timestamp or entity field", line_no);
        const double open = parse_price(fields[open_col], line_no, format.open_column);
        const double close = parse_price(fields[close_col], line_no, format.close_column);
        if (!(open > 0.0) || !(close > 0.0))
            throw ValidationError("non-positive price for entity " + ent + " at " + ts);

        auto [eit, inserted] = ent_of.try_emplace(ent, entities.size());
        if (inserted) entities.push_back(ent);
        bin_of.try_emplace(ts, 0);
        if (!cells.emplace(std::make_pair(eit->second, ts), Cell{open, close}).second)
            throw ParseError("duplicate row for entity " + ent + " at " + ts, line_no);
    }
    if (bin_of.empty()) throw InsufficientDataError("no data rows in " + path.string());

    PricePanel panel;
    panel.entities = entities;
    panel.timestamps.reserve(bin_of.size());
    std::size_t bin = 0;
    for (auto& [ts, idx] : bin_of) {
        idx = bin++;
        panel.timestamps.push_back(ts);
    }
    const Index n = static_cast<Index>(entities.size());
    const Index t = static_cast<Index>(panel.timestamps.size());
    panel.open = Matrix::Zero(n, t);
    panel.close = Matrix::Zero(n, t);
    panel.present = PresenceMask::Constant(n, t, false);
    for (const auto& [key, cell] : cells) {
        const Index i = static_cast<Index>(key.first);
        const Index k = static_cast<Index>(bin_of.at(key.second));
        panel.open(i, k) = cell.open;
        panel.close(i, k) = cell.close;
        panel.present(i, k) = true;
    }
    panel.validate();
    return panel;
}

PricePanel synchronize(const PricePanel& panel, std::vector<std::string>* dropped) {
    panel.validate();
    std::vector<Index> keep;
    for (Index k = 0; k < panel.t(); ++k) {
        const bool full = panel.present.size() == 0 || panel.present.col(k).all();
        if (full)
            keep.push_back(k);
        else if (dropped)
            dropped->push_back(panel.timestamps[static_cast<std::size_t>(k)]);
    }
    if (static_cast<Index>(keep.size()) < 2)
        throw InsufficientDataError("fewer than 2 complete time bins after synchronization (" +
                                    std::to_string(keep.size()) + " left)");

    PricePanel out;
    out.entities = panel.entities;
    out.open = Matrix(panel.n(), static_cast<Index>(keep.size()));
    out.close = Matrix(panel.n(), static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        out.timestamps.push_back(panel.timestamps[static_cast<std::size_t>(keep[c])]);
        out.open.col(static_cast<Index>(c)) = panel.open.col(keep[c]);
        out.close.col(static_cast<Index>(c)) = panel.close.col(keep[c]);
    }
    out.validate();
    return out;
}

SignPanel compute_signs(const PricePanel& panel, ZeroPolicy policy) {
    panel.validate();
    detail::require(!panel.has_missing(), "compute_signs: panel must be synchronized first");

    SignPanel out;
    out.entities = panel.entities;
    out.timestamps = panel.timestamps;
    out.signs = SignMatrix(panel.n(), panel.t());
    for (Index i = 0; i < panel.n(); ++i) {
        int prev = 1;
        for (Index k = 0; k < panel.t(); ++k) {
            const double diff = panel.close(i, k) - panel.open(i, k);
            int s;
            if (diff > 0.0)
                s = 1;
            else if (diff < 0.0)
                s = -1;
            else {
                ++out.zero_returns;
                s = policy == ZeroPolicy::positive ? 1 : prev;
            }
            out.signs(i, k) = s;
            prev = s;
        }
    }
    return out;
}

ReversalPanel compute_reversals(const SignPanel& signs) {
    signs.validate();
    if (signs.t() < 2)
        throw InsufficientDataError("compute_reversals: at least 2 time bins required");

    ReversalPanel out;
    out.entities = signs.entities;
    out.timestamps.assign(signs.timestamps.begin() + 1, signs.timestamps.end());
    out.flips = BinaryMatrix(signs.n(), signs.t() - 1);
    for (Index i = 0; i < signs.n(); ++i)
        for (Index k = 0; k + 1 < signs.t(); ++k)
            out.flips(i, k) = signs.signs(i, k + 1) == -signs.signs(i, k) ? 1 : 0;
    return out;
}

}  // namespace flip
