#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "bouss/matrix.hpp"
#include "bouss/space.hpp"

namespace bouss::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,         // NoConvergence, StepUnderflow, certificate mismatch
  kNoRadius = 2,        // bounds computed but p(r) < 0 not achieved
  kPrecondition = 3,    // cond_m, injectivity or mu sign
  kUsage = 64,
};

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

// u(t_i, y_j) on t_i = i (2 pi / L) / (nt - 1), y_j = j / (ny - 1).
Matrix<double> render_grid(const SymCoeffs<double>& x, double L, int nt, int ny);
void write_render_csv(std::ostream& out, const Matrix<double>& u, double L);

}  // namespace bouss::cli
