#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bouss/space.hpp"

namespace bouss {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolutionFile {
  Params params;
  SymCoeffs<double> x;
  std::optional<double> energy_target;
};

std::string solution_to_text(const SolutionFile& s);
SolutionFile solution_from_text(const std::string& text);
void write_solution(const std::filesystem::path& path, const SolutionFile& s);
SolutionFile read_solution(const std::filesystem::path& path);

struct ManifestEntry {
  std::string file;
  double lambda = 0;
  double energy = 0;
  double norm_nu = 0;
  double residual = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
// Lowercase hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

}  // namespace bouss
