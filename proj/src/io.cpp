#include "volterra/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "volterra/errors.hpp"

namespace volterra::io {

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw InvalidArgument("cannot write '" + path + "'");
  return f;
}

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw InvalidArgument("truncated binary file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void header_line(std::ostream& os, const std::vector<std::string>& h) {
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
  os << '\n';
}

}  // namespace

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto f = open_out(path);
  header_line(f, header);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << fmt(r[i]);
    f << '\n';
  }
}

void write_ensemble_csv(const std::string& path, const PathEnsemble& e) {
  auto f = open_out(path);
  std::vector<std::string> h{"path", "t"};
  for (std::size_t i = 0; i < e.d; ++i) h.push_back("X" + std::to_string(i + 1));
  header_line(f, h);
  for (std::size_t p = 0; p < e.n_paths; ++p)
    for (std::size_t n = e.start; n <= e.grid.steps; ++n) {
      f << p << ',' << fmt(e.grid.t(n));
      for (std::size_t i = 0; i < e.d; ++i) f << ',' << fmt(e.X(p, n, i));
      f << '\n';
    }
}

void write_ensemble_binary(const std::string& path, const PathEnsemble& e) {
  auto f = open_out(path, true);
  f.write("SVEE", 4);
  put_le<std::uint32_t>(f, 1);
  put_le<std::uint64_t>(f, e.n_paths);
  put_le<std::uint64_t>(f, e.grid.steps + 1);
  put_le<std::uint64_t>(f, e.d);
  for (double v : e.v) put_le<double>(f, v);
}

BinaryEnsemble read_ensemble_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read '" + path + "'");
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "SVEE", 4) != 0) throw InvalidArgument("not an SVEE file");
  if (get_le<std::uint32_t>(f) != 1) throw InvalidArgument("unsupported SVEE version");
  BinaryEnsemble b;
  b.paths = get_le<std::uint64_t>(f);
  b.times = get_le<std::uint64_t>(f);
  b.dim = get_le<std::uint64_t>(f);
  b.data.resize(b.paths * b.times * b.dim);
  for (double& v : b.data) v = get_le<double>(f);
  return b;
}

void write_lift_csv(const std::string& path, const LiftEnsemble& lift) {
  auto f = open_out(path);
  const std::size_t d = lift.paths.d;
  std::vector<std::string> h{"path", "t", "x"};
  for (std::size_t i = 0; i < d; ++i) h.push_back("lambda" + std::to_string(i + 1));
  header_line(f, h);
  for (std::size_t p = 0; p < lift.paths.n_paths; ++p)
    for (std::size_t ti = 0; ti < lift.times.size(); ++ti)
      for (std::size_t q = 0; q < lift.x.size(); ++q) {
        f << p << ',' << fmt(lift.paths.grid.t(lift.times[ti])) << ',' << fmt(lift.x[q]);
        for (std::size_t i = 0; i < d; ++i) f << ',' << fmt(lift.value(p, ti, q, i));
        f << '\n';
      }
}

void write_ou_csv(const std::string& path, const OUField& ou) {
  auto f = open_out(path);
  header_line(f, {"path", "t", "z", "Y"});
  for (std::size_t p = 0; p < ou.n_paths; ++p)
    for (std::size_t n = 0; n <= ou.grid.steps; ++n)
      for (std::size_t i = 0; i < ou.quad.size(); ++i)
        f << p << ',' << fmt(ou.grid.t(n)) << ',' << fmt(ou.quad.z[i]) << ',' << fmt(ou.y(p, n, i)) << '\n';
}

void write_curve_csv(const std::string& path, const Curve& c, const std::vector<double>& x,
                     bool derivatives) {
  auto f = open_out(path);
  const std::size_t d = c.dim();
  std::vector<std::string> h{"x"};
  for (std::size_t i = 0; i < d; ++i) h.push_back("f" + std::to_string(i + 1));
  if (derivatives)
    for (std::size_t i = 0; i < d; ++i) h.push_back("df" + std::to_string(i + 1));
  header_line(f, h);
  std::vector<double> v(d), dv(d);
  for (double xi : x) {
    c.value(xi, v.data());
    f << fmt(xi);
    for (double a : v) f << ',' << fmt(a);
    if (derivatives) {
      c.derivative(xi, dv.data());
      for (double a : dv) f << ',' << fmt(a);
    }
    f << '\n';
  }
}

Curve read_curve_csv(const std::string& path, std::size_t dim) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read '" + path + "'");
  std::string line;
  std::getline(f, line);
  SpaceGrid g;
  std::vector<double> vals, ders;
  bool with_d = false;
  std::size_t row = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
    if (cols.size() != 1 + dim && cols.size() != 1 + 2 * dim)
      throw InvalidArgument("curve CSV row " + std::to_string(row) + " has " +
                            std::to_string(cols.size()) + " columns");
    if (row == 0) with_d = cols.size() == 1 + 2 * dim;
    g.nodes.push_back(cols[0]);
    for (std::size_t i = 0; i < dim; ++i) vals.push_back(cols[1 + i]);
    if (with_d)
      for (std::size_t i = 0; i < dim; ++i) ders.push_back(cols[1 + dim + i]);
    ++row;
  }
  if (g.nodes.size() < 2 || g.nodes[0] != 0.0) throw InvalidArgument("curve CSV must start at x = 0");
  return Curve::tabulated(g, dim, std::move(vals), std::move(ders));
}

void write_resolvent_csv(const std::string& path, const ResolventGrid& r) {
  auto f = open_out(path);
  const std::size_t d = r.values.empty() ? 1 : r.values[0].rows;
  std::vector<std::string> h{"t"};
  if (d == 1) {
    h.push_back("value");
  } else {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) h.push_back("value_" + std::to_string(i) + std::to_string(j));
  }
  header_line(f, h);
  for (std::size_t n = 0; n < r.values.size(); ++n) {
    f << fmt(r.grid.t(n));
    for (double v : r.values[n].a) f << ',' << fmt(v);
    f << '\n';
  }
}

void write_condition_csv(const std::string& path, const KernelConditionReport& r) {
  auto f = open_out(path);
  header_line(f, {"condition", "value", "pass"});
  f << "cond1," << fmt(r.cond1.value) << ',' << r.cond1.pass << '\n';
  f << "cond2," << fmt(r.cond2.value) << ',' << r.cond2.pass << '\n';
  f << "cond2_target," << fmt(r.cond2_target) << ",\n";
  f << "cond3," << fmt(r.cond3.value) << ',' << r.cond3.pass << '\n';
  f << "q," << fmt(r.q) << ",\n";
  f << "q_low," << fmt(r.q_low) << ",\n";
  f << "q_high," << fmt(r.q_high) << ',' << !r.q_interval_empty << '\n';
}

}  // namespace volterra::io
