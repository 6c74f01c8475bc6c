#include "bouss/certificate.hpp"

#include <cstdio>
#include <cstdlib>

#include "bouss/space_io.hpp"
#include "json.hpp"

namespace bouss {

using nlohmann::json;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json interval_json(const Interval& a) { return json::array({decimal_down(a.lo()), decimal_up(a.hi())}); }

double parse_double(const json& j) {
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw FormatError("bad number in certificate: " + s);
  return v;
}

// Parsing widens by one ulp so the result still encloses the written decimals.
Interval interval_from(const json& j) {
  return Interval(rnd::next_down(parse_double(j.at(0))), rnd::next_up(parse_double(j.at(1))));
}

}  // namespace

// 17 significant digits of the neighbouring double lie strictly beyond v.
std::string decimal_down(double v) {
  if (v == 0 || std::isinf(v)) return g17(v);
  return g17(rnd::next_down(v));
}

std::string decimal_up(double v) {
  if (v == 0 || std::isinf(v)) return g17(v);
  return g17(rnd::next_up(v));
}

std::string certificate_to_text(const Certificate& c) {
  const ProofResult& r = c.proof;
  const Params& p = r.params;
  json j;
  j["format"] = "bouss-certificate/1";
  j["params"] = {{"lambda", p.lambda}, {"L", p.L}, {"nu", p.nu}, {"m1", p.m.m1}, {"m2", p.m.m2}};
  j["c00"] = c.c00;
  j["solution"] = {{"path", c.solution_path}, {"sha256", c.solution_sha256}};
  j["bounds"] = {{"Y", interval_json(r.bounds.Y)},
                 {"Z0", interval_json(r.bounds.Z0)},
                 {"Z1", interval_json(r.bounds.Z1)},
                 {"Z2", interval_json(r.bounds.Z2)}};
  j["z1_parts"] = {{"case1", interval_json(r.z1.case1)},
                   {"case2", interval_json(r.z1.case2)},
                   {"tail", interval_json(r.z1.tail)}};
  j["radius"] = {{"r_min", interval_json(r.radii.r_min)},
                 {"r_max", interval_json(r.radii.r_max)},
                 {"r_star", g17(r.radii.r_star)},
                 {"p_at_r_star", interval_json(r.radii.p_at_r_star)}};
  j["error_bounds"] = {{"c0", decimal_up(r.errors.c0)}, {"l2", decimal_up(r.errors.l2)}};
  j["checks"] = {{"cond_m", r.cond_m},
                 {"injective", r.injective},
                 {"p_negative", r.radii.p_at_r_star.hi() < 0},
                 {"min_mu_ring1", interval_json(r.min_mu_ring1)}};
  j["wall_time_s"] = r.wall_time;
  j["threads"] = c.threads;
  j["config"] = c.config;
  return j.dump(1) + "\n";
}

Certificate certificate_from_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "bouss-certificate/1") throw FormatError("unknown certificate format");
    Certificate c;
    ProofResult& r = c.proof;
    const json& p = j.at("params");
    r.params.lambda = p.at("lambda").get<double>();
    r.params.L = p.at("L").get<double>();
    r.params.nu = p.at("nu").get<double>();
    r.params.m = {p.at("m1").get<int>(), p.at("m2").get<int>()};
    c.c00 = j.at("c00").get<double>();
    c.solution_path = j.at("solution").at("path").get<std::string>();
    c.solution_sha256 = j.at("solution").at("sha256").get<std::string>();
    const json& b = j.at("bounds");
    r.bounds = {interval_from(b.at("Y")), interval_from(b.at("Z0")), interval_from(b.at("Z1")),
                interval_from(b.at("Z2"))};
    const json& z = j.at("z1_parts");
    r.z1 = {interval_from(z.at("case1")), interval_from(z.at("case2")), interval_from(z.at("tail")),
            r.bounds.Z1};
    const json& rad = j.at("radius");
    r.radii.r_min = interval_from(rad.at("r_min"));
    r.radii.r_max = interval_from(rad.at("r_max"));
    r.radii.r_star = parse_double(rad.at("r_star"));
    r.radii.p_at_r_star = interval_from(rad.at("p_at_r_star"));
    r.errors = {parse_double(j.at("error_bounds").at("c0")),
                parse_double(j.at("error_bounds").at("l2"))};
    const json& ch = j.at("checks");
    r.cond_m = ch.at("cond_m").get<bool>();
    r.injective = ch.at("injective").get<bool>();
    r.min_mu_ring1 = interval_from(ch.at("min_mu_ring1"));
    r.wall_time = j.at("wall_time_s").get<double>();
    c.threads = j.at("threads").get<int>();
    c.config = j.at("config").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed certificate: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("malformed certificate interval: ") + e.what());
  }
}

void write_certificate(const std::filesystem::path& path, const Certificate& c) {
  write_text(path, certificate_to_text(c));
}

Certificate read_certificate(const std::filesystem::path& path) {
  return certificate_from_text(read_text(path));
}

}  // namespace bouss
