#pragma once

#include "pdgd/problem.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace pdgd {

/// Raised for malformed problem documents; the message carries the JSON path
/// (or the line/column for syntax errors).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kProblemFormatVersion = 1;

Problem problem_from_json(const nlohmann::json& doc);
Problem load_problem(const std::filesystem::path& path);
nlohmann::json problem_to_json(const Problem& p);

/// FNV-1a 64-bit hash of the canonical JSON dump, as 16 hex digits.
std::string problem_hash(const Problem& p);
std::string fnv1a_hex(const std::string& bytes);

/// Dense row-major helpers shared by the serializers.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace pdgd
