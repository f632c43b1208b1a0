#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "volterra/kernels.hpp"
#include "volterra/lift.hpp"
#include "volterra/ou_lift.hpp"
#include "volterra/sve.hpp"

namespace volterra::io {

// Round-trippable text form of a double (%.17g).
std::string fmt(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// path, t, X_1..X_d
void write_ensemble_csv(const std::string& path, const PathEnsemble& e);

// "SVEE", u32 version = 1, u64 paths, u64 times, u64 dim, then f64 path x time x dim,
// all little-endian.
struct BinaryEnsemble {
  std::uint64_t paths = 0, times = 0, dim = 0;
  std::vector<double> data;
};
void write_ensemble_binary(const std::string& path, const PathEnsemble& e);
BinaryEnsemble read_ensemble_binary(const std::string& path);

// path, t, x, lambda_1..lambda_d
void write_lift_csv(const std::string& path, const LiftEnsemble& lift);
// path, t, z, Y
void write_ou_csv(const std::string& path, const OUField& ou);

// x, f_1..f_d[, f'_1..f'_d] on the given nodes.
void write_curve_csv(const std::string& path, const Curve& c, const std::vector<double>& x,
                     bool derivatives = true);
// Reads the layout above into a tabulated curve of dimension `dim`.
Curve read_curve_csv(const std::string& path, std::size_t dim);

// t, value (entry (0,0) of each matrix; all entries for d > 1 as value_ij).
void write_resolvent_csv(const std::string& path, const ResolventGrid& r);
// condition, value, pass
void write_condition_csv(const std::string& path, const KernelConditionReport& r);

}  // namespace volterra::io
