#include "bouss/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

#include "CLI11.hpp"
#include "bouss/certificate.hpp"
#include "bouss/certify.hpp"
#include "bouss/solver.hpp"
#include "bouss/space_io.hpp"
#include "json.hpp"

namespace bouss::cli {

namespace {

using nlohmann::json;

// JSON config files: a flat object whose keys are long option names of the
// subcommand being run.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      std::vector<std::string> vals;
      if (opt->count() > 0) vals = opt->results();
      else if (default_also && !opt->get_default_str().empty()) vals = {opt->get_default_str()};
      else continue;
      j[name] = vals.size() == 1 ? json(vals.front()) : json(vals);
    }
    return j.dump(1);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) throw CLI::ConversionError("nested config section \"" + key + "\" is not supported");
      CLI::ConfigItem item;
      if (!section_.empty()) item.parents = {section_};
      item.name = key;
      if (v.is_array())
        for (const json& e : v) item.inputs.push_back(scalar(e));
      else
        item.inputs.push_back(scalar(v));
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  std::string section_;

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported config value " + v.dump());
  }
};

void set_threads(int n) {
  if (n <= 0) return;
  omp_set_num_threads(n);
}

struct ModelOpts {
  double lambda = 0.1446;
  double L = 2.0 * std::numbers::pi;
  double nu = 1.01;
  int m1 = 35;
  int m2 = 35;
  std::vector<int> mode{0, 1};
  double amplitude = 0.1;
  std::optional<double> energy;
  std::string policy = "energy";
  double tol = 1e-13;
  int max_iter = 30;
  bool grow = false;
  int threads = 0;

  Params params() const {
    Params p{lambda, L, nu, {m1, m2}};
    p.validate();
    return p;
  }
  NewtonOptions newton() const { return {tol, max_iter}; }
  Policy pol() const { return policy == "mean" ? Policy::Mean : Policy::Energy; }
};

void add_model_options(CLI::App* app, ModelOpts& o) {
  app->add_option("--lambda", o.lambda, "dispersion coefficient")->capture_default_str();
  app->add_option("--L", o.L, "temporal frequency scale (period 2 pi / L)")->capture_default_str();
  app->add_option("--nu", o.nu, "weight of the l1 norm")->capture_default_str();
  app->add_option("--m1", o.m1, "temporal truncation")->capture_default_str();
  app->add_option("--m2", o.m2, "spatial truncation")->capture_default_str();
  app->add_option("--mode", o.mode, "seed mode k1,k2")->expected(2)->delimiter(',')->capture_default_str();
  app->add_option("--amplitude", o.amplitude, "seed amplitude")->capture_default_str();
  app->add_option("--energy", o.energy, "energy target (default: energy of the seed)");
  app->add_option("--policy", o.policy, "energy: fix E; mean: fix c00")
      ->check(CLI::IsMember({"energy", "mean"}))
      ->capture_default_str();
  app->add_option("--tol", o.tol, "Newton tolerance")->capture_default_str();
  app->add_option("--max-iter", o.max_iter, "Newton iteration limit")->capture_default_str();
  app->add_flag("--grow,!--no-grow", o.grow, "grow m until trailing coefficients are negligible")
      ->capture_default_str();
}

void add_threads(CLI::App* app, int& threads) {
  app->add_option("--threads", threads, "worker threads (0: library default)")->capture_default_str();
}

BranchPoint seeded_point(const ModelOpts& o) {
  const Params p = o.params();
  const MultiIndex mode{o.mode.at(0), o.mode.at(1)};
  SymCoeffs<double> x = seed_branch(mode, p, o.amplitude);
  const double target = o.energy ? *o.energy : energy(x, p);
  NewtonResult res = o.pol() == Policy::Energy ? newton_solve({p, target}, x, o.newton())
                                               : newton_solve_fixed_mean(p, x, o.newton());
  return make_branch_point(p, res.x, target, res.report.iterations);
}

void save_point(const std::filesystem::path& path, const BranchPoint& b) {
  write_solution(path, {b.params, b.x, b.energy_target});
}

void report_point(const BranchPoint& b) {
  std::printf("lambda=%.10g m=(%d,%d) c00=%.12g E=%.12g |x|_nu=%.12g |f|_inf=%.3g iters=%d\n",
              b.params.lambda, b.params.m.m1, b.params.m.m2, b.x.c00(), b.energy, b.norm_nu,
              b.residual, b.iterations);
}

int cmd_solve(const ModelOpts& o, const std::string& out) {
  set_threads(o.threads);
  BranchPoint b = seeded_point(o);
  if (o.grow) b = ensure_resolution(b, o.pol(), o.newton());
  save_point(out, b);
  report_point(b);
  return kOk;
}

struct ContinueOpts {
  std::string from;
  double lambda_end = 0.2346;
  double step = 1e-3;
  double step_min = 1e-7;
  double step_max = 1e-2;
  std::vector<double> stops;
  int max_steps = 100000;
  std::string out_dir;
  std::string manifest;
};

int cmd_continue(const ModelOpts& o, const ContinueOpts& c, const CLI::App& sub) {
  set_threads(o.threads);
  BranchPoint start;
  if (!c.from.empty()) {
    const SolutionFile s = read_solution(c.from);
    double target = s.energy_target.value_or(energy(s.x, s.params));
    if (sub.count("--energy") && o.energy) target = *o.energy;
    start = make_branch_point(s.params, s.x, target);
  } else {
    start = seeded_point(o);
  }
  ContinuationOptions opt;
  opt.lambda_end = c.lambda_end;
  opt.step = c.step;
  opt.step_min = c.step_min;
  opt.step_max = c.step_max;
  opt.stops = c.stops;
  opt.max_steps = c.max_steps;
  opt.policy = o.pol();
  opt.newton = o.newton();

  const std::filesystem::path dir(c.out_dir);
  const std::filesystem::path manifest =
      c.manifest.empty() ? dir / "manifest.json" : std::filesystem::path(c.manifest);
  auto flush = [&](const Branch& br) {
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < br.points.size(); ++i) {
      BranchPoint b = br.points[i];
      if (o.grow) b = ensure_resolution(b, o.pol(), o.newton());
      char name[32];
      std::snprintf(name, sizeof name, "point_%04zu.json", i);
      save_point(dir / name, b);
      entries.push_back({name, b.params.lambda, b.energy, b.norm_nu, b.residual});
    }
    write_manifest(manifest, entries);
  };

  try {
    const Branch br = continue_branch(start, opt);
    flush(br);
    std::printf("branch: %zu points, lambda %.10g -> %.10g\n", br.points.size(),
                br.points.front().params.lambda, br.points.back().params.lambda);
    report_point(br.points.back());
    return kOk;
  } catch (const StepUnderflow& e) {
    flush(e.partial());
    std::fprintf(stderr, "error: %s (partial manifest with %zu points written)\n", e.what(),
                 e.partial().points.size());
    return kFailure;
  }
}

struct ProveOpts {
  std::string solution;
  std::string out;
  int m1 = 0;
  int m2 = 0;
  int threads = 0;
};

// Reads the solution, pads it to the requested m and returns the proof input.
std::pair<Params, SymCoeffs<double>> proof_input(const std::string& path, int m1, int m2) {
  const SolutionFile s = read_solution(path);
  Params p = s.params;
  const Truncation m{std::max(m1, p.m.m1), std::max(m2, p.m.m2)};
  if ((m1 > 0 && m1 < p.m.m1) || (m2 > 0 && m2 < p.m.m2))
    throw CLI::ValidationError("--m1/--m2 may only enlarge the truncation");
  p.m = m;
  return {p, s.x.resized(m)};
}

int cmd_prove(const ProveOpts& o, const std::string& config) {
  set_threads(o.threads);
  const auto [p, x] = proof_input(o.solution, o.m1, o.m2);
  Certificate cert;
  try {
    cert.proof = prove(x, p);
  } catch (const NoNegativeRadius& e) {
    const BoundSet& b = e.bounds();
    std::fprintf(stderr, "no negative radius: %s\n  Y<=%.6g Z0<=%.6g Z1<=%.6g Z2<=%.6g\n",
                 e.what(), b.Y.hi(), b.Z0.hi(), b.Z1.hi(), b.Z2.hi());
    return kNoRadius;
  } catch (const PreconditionFailure& e) {
    std::fprintf(stderr, "precondition failed: %s\n", e.what());
    return kPrecondition;
  } catch (const MuSignError& e) {
    std::fprintf(stderr, "mu sign not provable: %s\n", e.what());
    return kPrecondition;
  } catch (const SingularJacobian& e) {
    std::fprintf(stderr, "precondition failed: %s\n", e.what());
    return kPrecondition;
  }
  cert.c00 = x.c00();
  cert.solution_path = o.solution;
  cert.solution_sha256 = sha256_file(o.solution);
  cert.threads = omp_get_max_threads();
  cert.config = config;
  write_certificate(o.out, cert);
  const ProofResult& r = cert.proof;
  std::printf(
      "certified lambda=%.10g m=(%d,%d)\n  Y<=%.6e Z0<=%.6e Z1<=%.6e Z2<=%.6e\n"
      "  r_min in [%.6e, %.6e] r_star=%.6e  C0/L2 error <= %.6e  (%.2f s)\n",
      p.lambda, p.m.m1, p.m.m2, r.bounds.Y.hi(), r.bounds.Z0.hi(), r.bounds.Z1.hi(),
      r.bounds.Z2.hi(), r.radii.r_min.lo(), r.radii.r_min.hi(), r.radii.r_star, r.errors.c0,
      r.wall_time);
  return kOk;
}

int cmd_verify(const std::string& cert_path, const std::string& sol_override, int threads) {
  set_threads(threads);
  const Certificate cert = read_certificate(cert_path);
  const std::string sol = sol_override.empty() ? cert.solution_path : sol_override;
  const std::string digest = sha256_file(sol);
  if (digest != cert.solution_sha256) {
    std::fprintf(stderr, "solution digest mismatch: %s vs recorded %s\n", digest.c_str(),
                 cert.solution_sha256.c_str());
    return kFailure;
  }
  const Params& cp = cert.proof.params;
  const auto [p, x] = proof_input(sol, cp.m.m1, cp.m.m2);
  if (p.lambda != cp.lambda || p.L != cp.L || p.nu != cp.nu || p.m != cp.m) {
    std::fprintf(stderr, "parameters in certificate and solution differ\n");
    return kFailure;
  }
  ProofResult r;
  try {
    r = prove(x, p);
  } catch (const NoNegativeRadius& e) {
    std::fprintf(stderr, "re-verification failed: %s\n", e.what());
    return kNoRadius;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "re-verification failed: %s\n", e.what());
    return kPrecondition;
  }
  const BoundSet& a = r.bounds;
  const BoundSet& b = cert.proof.bounds;
  const bool bounds_ok = a.Y.hi() <= b.Y.hi() && a.Z0.hi() <= b.Z0.hi() &&
                         a.Z1.hi() <= b.Z1.hi() && a.Z2.hi() <= b.Z2.hi();
  // p(r_star) with the recomputed bounds.
  const Interval R(cert.proof.radii.r_star);
  const Interval pr = Interval(a.Y.hi()) +
                      (Interval(a.Z0.hi()) + Interval(a.Z1.hi()) - Interval(1.0)) * R +
                      Interval(a.Z2.hi()) * R * R;
  const bool radius_ok = pr.hi() < 0 && cert.proof.errors.c0 >= rnd::mul_up(4.0, R.hi());
  if (!bounds_ok || !radius_ok) {
    std::fprintf(stderr, "certificate not confirmed (bounds %s, radius %s)\n",
                 bounds_ok ? "ok" : "exceeded", radius_ok ? "ok" : "not validated");
    return kFailure;
  }
  std::printf("certificate confirmed: r_star=%.6e p(r_star)<=%.6e\n", cert.proof.radii.r_star,
              pr.hi());
  return kOk;
}

}  // namespace

Matrix<double> render_grid(const SymCoeffs<double>& x, double L, int nt, int ny) {
  if (nt < 2 || ny < 2) throw std::invalid_argument("render grid needs at least 2 samples per axis");
  (void)L;  // t is sampled over one period, so only the phase k1 i / (nt - 1) matters.
  const Truncation m = x.truncation();
  // cos(2 pi p / n) on a folded phase so mirrored samples agree bitwise.
  auto table = [](int modes, int samples) {
    const int n = samples - 1;
    Matrix<double> c(static_cast<std::size_t>(modes), static_cast<std::size_t>(samples));
    for (int k = 0; k < modes; ++k)
      for (int i = 0; i < samples; ++i) {
        long ph = (static_cast<long>(k) * i) % n;
        ph = std::min<long>(ph, n - ph);
        c(k, i) = std::cos(2.0 * std::numbers::pi * static_cast<double>(ph) / n);
      }
    return c;
  };
  const Matrix<double> ct = table(m.m1, nt), cy = table(m.m2, ny);
  Matrix<double> u(static_cast<std::size_t>(nt), static_cast<std::size_t>(ny), x.c00());
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < ny; ++j) {
      double s = x.c00();
      for (const MultiIndex& k : m.indices())
        s += (k.k1 == 0 ? 2.0 : 4.0) * x[k] * ct(k.k1, i) * cy(k.k2, j);
      u(i, j) = s;
    }
  return u;
}

void write_render_csv(std::ostream& out, const Matrix<double>& u, double L) {
  const int nt = static_cast<int>(u.rows()), ny = static_cast<int>(u.cols());
  const double period = 2.0 * std::numbers::pi / L;
  char buf[40];
  out << "t\\y";
  for (int j = 0; j < ny; ++j) {
    std::snprintf(buf, sizeof buf, ",%.17g", static_cast<double>(j) / (ny - 1));
    out << buf;
  }
  out << '\n';
  for (int i = 0; i < nt; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", period * i / (nt - 1));
    out << buf;
    for (int j = 0; j < ny; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", u(i, j));
      out << buf;
    }
    out << '\n';
  }
}

int run(int argc, char** argv) {
  // CLI11 reads config files only on the top-level app, so --config is
  // hoisted there from wherever it appears and scoped to the subcommand.
  const std::vector<std::string> names{"solve", "continue", "prove", "render", "verify-cert"};
  std::vector<std::string> args{argc > 0 ? argv[0] : "bouss"}, configs;
  std::string section;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (section.empty() && std::find(names.begin(), names.end(), a) != names.end()) section = a;
    if (a == "--config" && i + 1 < argc) {
      configs.push_back(argv[++i]);
    } else if (a.rfind("--config=", 0) == 0) {
      configs.push_back(a.substr(9));
    } else {
      args.push_back(a);
    }
  }
  for (const std::string& c : configs) args.insert(args.begin() + 1, {"--config", c});
  std::vector<char*> av;
  for (std::string& a : args) av.push_back(a.data());

  CLI::App app{"Periodic orbits of the Boussinesq equation and their validation"};
  app.config_formatter(std::make_shared<JsonConfig>(section));
  app.set_config("--config", "", "JSON config file of long option names; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  ModelOpts solve_o;
  std::string solve_out;
  CLI::App* solve = app.add_subcommand("solve", "seed a branch and solve with Newton");
  add_model_options(solve, solve_o);
  add_threads(solve, solve_o.threads);
  solve->add_option("--out", solve_out, "solution file")->required();

  ModelOpts cont_o;
  ContinueOpts cont_c;
  CLI::App* cont = app.add_subcommand("continue", "natural continuation in lambda");
  add_model_options(cont, cont_o);
  add_threads(cont, cont_o.threads);
  cont->add_option("--from", cont_c.from, "start from a solution file instead of a seed");
  cont->add_option("--lambda-end", cont_c.lambda_end, "final lambda")->capture_default_str();
  cont->add_option("--step", cont_c.step, "initial lambda step")->capture_default_str();
  cont->add_option("--step-min", cont_c.step_min, "abort below this step")->capture_default_str();
  cont->add_option("--step-max", cont_c.step_max, "largest step")->capture_default_str();
  cont->add_option("--stops", cont_c.stops, "lambda values to land on exactly")->delimiter(',');
  cont->add_option("--max-steps", cont_c.max_steps, "step limit")->capture_default_str();
  cont->add_option("--out-dir", cont_c.out_dir, "directory for solution files")->required();
  cont->add_option("--manifest", cont_c.manifest, "manifest path (default out-dir/manifest.json)");

  ProveOpts prove_o;
  CLI::App* prv = app.add_subcommand("prove", "validate a solution file");
  prv->add_option("--solution", prove_o.solution, "solution file")->required()->check(CLI::ExistingFile);
  prv->add_option("--out", prove_o.out, "certificate file")->required();
  prv->add_option("--m1", prove_o.m1, "enlarge the temporal truncation (zero padding)");
  prv->add_option("--m2", prove_o.m2, "enlarge the spatial truncation (zero padding)");
  add_threads(prv, prove_o.threads);

  std::string render_sol, render_out;
  int nt = 65, ny = 65;
  CLI::App* render = app.add_subcommand("render", "sample u(t, y) on a grid as CSV");
  render->add_option("--solution", render_sol, "solution file")->required()->check(CLI::ExistingFile);
  render->add_option("--nt", nt, "samples in t")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  render->add_option("--ny", ny, "samples in y")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  render->add_option("--out", render_out, "CSV file (default stdout)");

  std::string ver_cert, ver_sol;
  int ver_threads = 0;
  CLI::App* verify = app.add_subcommand("verify-cert", "re-check a certificate against its solution");
  verify->add_option("--certificate", ver_cert, "certificate file")->required()->check(CLI::ExistingFile);
  verify->add_option("--solution", ver_sol, "solution file (default: recorded path)");
  add_threads(verify, ver_threads);

  try {
    app.parse(static_cast<int>(av.size()), av.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*solve) return cmd_solve(solve_o, solve_out);
    if (*cont) return cmd_continue(cont_o, cont_c, *cont);
    if (*prv) return cmd_prove(prove_o, prv->config_to_str(true, false));
    if (*render) {
      const SolutionFile s = read_solution(render_sol);
      const Matrix<double> u = render_grid(s.x, s.params.L, nt, ny);
      if (render_out.empty()) {
        write_render_csv(std::cout, u, s.params.L);
      } else {
        std::ofstream f(render_out);
        if (!f) throw FormatError("cannot write " + render_out);
        write_render_csv(f, u, s.params.L);
      }
      return kOk;
    }
    if (*verify) return cmd_verify(ver_cert, ver_sol, ver_threads);
  } catch (const NoConvergence& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  } catch (const SingularJacobian& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> store{"bouss"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : store) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace bouss::cli
