#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "flip/infer.hpp"
#include "flip/model.hpp"
#include "flip/types.hpp"

namespace flip {

// nlohmann::json keeps object keys in alphabetical order and prints doubles
// with shortest-round-trip precision, so dumping the same value twice yields
// identical bytes.
using Json = nlohmann::json;

Json panel_to_json(const SignPanel& panel);
SignPanel panel_from_json(const Json& value);

Json coupling_to_json(const CouplingSet& params);
CouplingSet coupling_from_json(const Json& value);

Json reversal_coupling_to_json(const ReversalCouplingSet& params);
ReversalCouplingSet reversal_coupling_from_json(const Json& value);

Json dg_to_json(const DgParams& params);
DgParams dg_from_json(const Json& value);

Json poisson_to_json(const PoissonModel& model);
PoissonModel poisson_from_json(const Json& value);

Json report_to_json(const FitReport& report);

// Whole-file helpers. Writing appends a final newline; reading raises
// ParseError with a line number on malformed JSON and ValidationError when
// the file cannot be opened.
void write_json_file(const std::filesystem::path& path, const Json& value);
Json read_json_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Shortest decimal string that round-trips the value exactly.
std::string csv_number(double value);

// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::filesystem::path& path);

}  // namespace flip
