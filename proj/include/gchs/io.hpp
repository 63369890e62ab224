#pragma once

#include "gchs/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gchs {

int parse_int(std::string_view text);
double parse_double(std::string_view text);

// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

// Matrix text format: a "rows cols" header line followed by one
// whitespace-separated row per line.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

// A sequence of named matrices, each introduced by a "name" line.
using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;
void save_named_matrices(const std::filesystem::path& path, const NamedMatrices& mats);
NamedMatrices load_named_matrices(const std::filesystem::path& path);

// One value per line.
void save_vector(const std::filesystem::path& path, const Vector& v);
Vector load_vector(const std::filesystem::path& path);

// Flat "key = value" configuration; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace gchs
