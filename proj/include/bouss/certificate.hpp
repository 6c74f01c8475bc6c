#pragma once

#include <filesystem>
#include <string>

#include "bouss/certify.hpp"

namespace bouss {

struct Certificate {
  ProofResult proof;
  double c00 = 0;
  std::string solution_path;
  std::string solution_sha256;
  int threads = 1;
  // Effective configuration of the run that produced it.
  std::string config;
};

// Decimal text enclosing v from below / above.
std::string decimal_down(double v);
std::string decimal_up(double v);

std::string certificate_to_text(const Certificate& c);
Certificate certificate_from_text(const std::string& text);
void write_certificate(const std::filesystem::path& path, const Certificate& c);
Certificate read_certificate(const std::filesystem::path& path);

}  // namespace bouss
