#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flip/types.hpp"

namespace flip {

// How to resolve a zero intraperiod return when binarizing. `positive` maps
// it to +1; `carry_forward` repeats the entity's previous sign (+1 if none).
enum class ZeroPolicy { positive, carry_forward };

// Column mapping for the input CSV. The header row must name all four
// columns; order and extra columns are irrelevant.
struct CsvFormat {
    std::string timestamp_column = "timestamp";
    std::string entity_column = "entity";
    std::string open_column = "open";
    std::string close_column = "close";
};

// Reads one row per (time bin, entity) and assembles the union of all rows
// into an N x T panel. Cells absent from the file are flagged in the presence
// mask; they are only removed by synchronize(). Time bins are the distinct
// timestamp strings in lexicographic order, entities in order of first
// appearance.
PricePanel load_price_csv(const std::filesystem::path& path, const CsvFormat& format = {});

// Removes every time bin that is missing for at least one entity, for all
// entities, preserving the order of the surviving bins. Labels of the dropped
// bins are appended to `dropped` when given.
PricePanel synchronize(const PricePanel& panel, std::vector<std::string>* dropped = nullptr);

// Binarizes intraperiod returns r = (close - open) / open into signs. The
// result depends only on the sign of close - open; zero returns are resolved
// by `policy` and counted in the panel's zero_returns field.
SignPanel compute_signs(const PricePanel& panel, ZeroPolicy policy = ZeroPolicy::positive);

// flips[i][t] = 1 iff the orientation of entity i reverses between bins t and
// t+1, i.e. signs[i][t+1] = -signs[i][t].
ReversalPanel compute_reversals(const SignPanel& signs);

}  // namespace flip
