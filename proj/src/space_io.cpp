#include "bouss/space_io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace bouss {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i)
    ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

std::string solution_to_text(const SolutionFile& s) {
  const Params& p = s.params;
  json j;
  j["format"] = "bouss-solution/1";
  j["lambda"] = p.lambda;
  j["L"] = p.L;
  j["nu"] = p.nu;
  j["m1"] = p.m.m1;
  j["m2"] = p.m.m2;
  j["c00"] = s.x.c00();
  if (s.energy_target) j["energy_target"] = *s.energy_target;
  json coeffs = json::array();
  for (const MultiIndex& k : p.m.indices()) coeffs.push_back({k.k1, k.k2, s.x[k]});
  j["coefficients"] = std::move(coeffs);
  return j.dump(1) + "\n";
}

SolutionFile solution_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("solution file is not valid JSON: ") + e.what());
  }
  try {
    SolutionFile s;
    s.params.lambda = j.at("lambda").get<double>();
    s.params.L = j.at("L").get<double>();
    s.params.nu = j.at("nu").get<double>();
    s.params.m = {j.at("m1").get<int>(), j.at("m2").get<int>()};
    s.params.validate();
    s.x = SymCoeffs<double>(s.params.m, j.at("c00").get<double>());
    if (j.contains("energy_target")) s.energy_target = j["energy_target"].get<double>();
    for (const json& t : j.at("coefficients")) {
      const MultiIndex k{t.at(0).get<int>(), t.at(1).get<int>()};
      if (!s.params.m.contains(k))
        throw FormatError("coefficient index (" + std::to_string(k.k1) + "," +
                          std::to_string(k.k2) + ") outside F_m");
      s.x[k] = t.at(2).get<double>();
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed solution file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid parameters in solution file: ") + e.what());
  }
}

void write_solution(const std::filesystem::path& path, const SolutionFile& s) {
  write_text(path, solution_to_text(s));
}

SolutionFile read_solution(const std::filesystem::path& path) {
  return solution_from_text(read_text(path));
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  json arr = json::array();
  for (const ManifestEntry& e : entries)
    arr.push_back({{"file", e.file},
                   {"lambda", e.lambda},
                   {"energy", e.energy},
                   {"norm_nu", e.norm_nu},
                   {"residual", e.residual}});
  write_text(path, json{{"format", "bouss-branch/1"}, {"points", arr}}.dump(1) + "\n");
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text(path));
    std::vector<ManifestEntry> out;
    for (const json& e : j.at("points"))
      out.push_back({e.at("file").get<std::string>(), e.at("lambda").get<double>(),
                     e.at("energy").get<double>(), e.at("norm_nu").get<double>(),
                     e.at("residual").get<double>()});
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace bouss
