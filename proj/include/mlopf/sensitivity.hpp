#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mlopf/error.hpp"
#include "mlopf/network.hpp"
#include "mlopf/path_oracle.hpp"

namespace mlopf {

/// Row-major dense square matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(int n) : n_(n), data_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {}

  int dim() const { return n_; }
  double& operator()(int r, int c) { return data_[idx(r, c)]; }
  double operator()(int r, int c) const { return data_[idx(r, c)]; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(c); }
  int n_ = 0;
  std::vector<double> data_;
};

/// Linear model v = R p + X q + v_tilde. R(a, b) is the derivative of the
/// squared voltage at flat index a with respect to the injection at b.
struct SensitivityMatrices {
  DenseMatrix R;
  DenseMatrix X;
  std::vector<double> v_tilde;

  int dim() const { return R.dim(); }
};

/// conj(Z^{phi psi}) * omega^{phi - psi}; both sensitivity entries are read off it.
inline Complex rotated_conj(Complex z, Phase phi, Phase psi) { return std::conj(z) * rotation(phi, psi); }

namespace detail {
inline void require_phase(const Network& net, int bus, Phase p) {
  if (!net.phases(bus).contains(p))
    throw std::invalid_argument("phase " + std::string(1, to_char(p)) + " not present at bus " + std::to_string(bus));
}
}  // namespace detail

/// d v_i^phi / d p_j^psi
inline double dv_dp_entry(const PathOracle& paths, int i, Phase phi, int j, Phase psi) {
  detail::require_phase(paths.network(), i, phi);
  detail::require_phase(paths.network(), j, psi);
  return 2.0 * rotated_conj(paths.common_path_impedance(i, j, phi, psi), phi, psi).real();
}

/// d v_i^phi / d q_j^psi
inline double dv_dq_entry(const PathOracle& paths, int i, Phase phi, int j, Phase psi) {
  detail::require_phase(paths.network(), i, phi);
  detail::require_phase(paths.network(), j, psi);
  return -2.0 * rotated_conj(paths.common_path_impedance(i, j, phi, psi), phi, psi).imag();
}

/// Materializes R and X densely. For each bus i one O(n) tree walk yields
/// lca(i, j) for every j, so the build is O(n^2) in buses plus O(N^2) fill.
inline SensitivityMatrices build_sensitivity(const Network& net, const PathOracle& paths) {
  const int n = net.dim();
  SensitivityMatrices s{DenseMatrix(n), DenseMatrix(n), std::vector<double>(static_cast<std::size_t>(n), net.base_v_squared())};
  const int buses = net.bus_count();
  std::vector<int> lca_with(static_cast<std::size_t>(buses));
  std::vector<char> on_path(static_cast<std::size_t>(buses));
  for (int i = 1; i < buses; ++i) {
    std::fill(on_path.begin(), on_path.end(), 0);
    for (int u = i; u != 0; u = net.parent(u)) on_path[static_cast<std::size_t>(u)] = 1;
    on_path[0] = 1;
    for (int u : net.preorder()) {
      lca_with[static_cast<std::size_t>(u)] = on_path[static_cast<std::size_t>(u)] ? u : lca_with[static_cast<std::size_t>(net.parent(u))];
    }
    const PhaseSet phi_set = net.phases(i);
    const int row0 = net.flat_offset(i);
    for (int j = 1; j < buses; ++j) {
      const PhaseMatrix& z = paths.cumulative(lca_with[static_cast<std::size_t>(j)]);
      const PhaseSet psi_set = net.phases(j);
      const int col0 = net.flat_offset(j);
      for (Phase phi : kAllPhases) {
        if (!phi_set.contains(phi)) continue;
        const int r = row0 + phi_set.rank(phi);
        for (Phase psi : kAllPhases) {
          if (!psi_set.contains(psi)) continue;
          const int c = col0 + psi_set.rank(psi);
          const Complex w = rotated_conj(z(phi, psi), phi, psi);
          s.R(r, c) = 2.0 * w.real();
          s.X(r, c) = -2.0 * w.imag();
        }
      }
    }
  }
  return s;
}

inline SensitivityMatrices build_sensitivity(const Network& net) { return build_sensitivity(net, PathOracle(net)); }

/// R p + X q + v_tilde
inline std::vector<double> voltage_linear(const SensitivityMatrices& s, std::span<const double> p, std::span<const double> q) {
  const int n = s.dim();
  require_size(p.size(), static_cast<std::size_t>(n), "voltage_linear p");
  require_size(q.size(), static_cast<std::size_t>(n), "voltage_linear q");
  std::vector<double> v(s.v_tilde);
  for (int a = 0; a < n; ++a) {
    const auto rr = s.R.row(a);
    const auto xr = s.X.row(a);
    double acc = 0.0;
    for (int b = 0; b < n; ++b) acc += rr[static_cast<std::size_t>(b)] * p[static_cast<std::size_t>(b)] + xr[static_cast<std::size_t>(b)] * q[static_cast<std::size_t>(b)];
    v[static_cast<std::size_t>(a)] += acc;
  }
  return v;
}

/// Same linear model evaluated by a backward sum of downstream injections and
/// a forward accumulation of line drops: O(N) instead of O(N^2). Results agree
/// with voltage_linear up to summation order.
class TreeLinearVoltage {
 public:
  explicit TreeLinearVoltage(const Network& net) : net_(&net) {
    coeff_.resize(static_cast<std::size_t>(net.bus_count()));
    for (int u = 1; u < net.bus_count(); ++u) {
      const PhaseMatrix& z = net.line_into(u).z;
      PhaseMatrix& w = coeff_[static_cast<std::size_t>(u)];
      for (Phase phi : kAllPhases)
        for (Phase psi : kAllPhases) w(phi, psi) = 2.0 * rotated_conj(z(phi, psi), phi, psi);
    }
  }

  std::vector<double> operator()(std::span<const double> p, std::span<const double> q) const {
    const Network& net = *net_;
    const auto n = static_cast<std::size_t>(net.dim());
    require_size(p.size(), n, "TreeLinearVoltage p");
    require_size(q.size(), n, "TreeLinearVoltage q");
    const auto buses = static_cast<std::size_t>(net.bus_count());
    std::vector<std::array<Complex, 3>> down(buses);
    const auto& flat = net.flat_entries();
    for (std::size_t k = 0; k < n; ++k) down[static_cast<std::size_t>(flat[k].bus)][static_cast<std::size_t>(code(flat[k].phase))] = {p[k], q[k]};
    const auto& order = net.preorder();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == 0) continue;
      auto& up = down[static_cast<std::size_t>(net.parent(*it))];
      const auto& mine = down[static_cast<std::size_t>(*it)];
      for (std::size_t f = 0; f < 3; ++f) up[f] += mine[f];
    }
    std::vector<std::array<double, 3>> rise(buses, {0.0, 0.0, 0.0});
    for (int u : order) {
      if (u == 0) continue;
      auto& r = rise[static_cast<std::size_t>(u)];
      r = rise[static_cast<std::size_t>(net.parent(u))];
      const PhaseMatrix& w = coeff_[static_cast<std::size_t>(u)];
      const auto& s = down[static_cast<std::size_t>(u)];
      for (Phase phi : kAllPhases)
        for (Phase psi : kAllPhases) r[static_cast<std::size_t>(code(phi))] += (w(phi, psi) * s[static_cast<std::size_t>(code(psi))]).real();
    }
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = net.base_v_squared() + rise[static_cast<std::size_t>(flat[k].bus)][static_cast<std::size_t>(code(flat[k].phase))];
    return v;
  }

 private:
  const Network* net_;
  std::vector<PhaseMatrix> coeff_;
};

// ---------------------------------------------------------------------------
// Binary dump: "OPFSENS1", u32 N, 4 reserved bytes, then R and X row-major as
// little-endian float64.

inline void write_sensitivity(const SensitivityMatrices& s, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const char magic[8] = {'O', 'P', 'F', 'S', 'E', 'N', 'S', '1'};
  const auto n = static_cast<std::uint32_t>(s.dim());
  const std::uint32_t reserved = 0;
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  out.write(reinterpret_cast<const char*>(s.R.data().data()), static_cast<std::streamsize>(s.R.data().size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(s.X.data().data()), static_cast<std::streamsize>(s.X.data().size() * sizeof(double)));
}

inline SensitivityMatrices read_sensitivity(const std::string& path, double base_v_squared = 1.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  char magic[8];
  std::uint32_t n = 0;
  std::uint32_t reserved = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&reserved), 4);
  if (!in || std::memcmp(magic, "OPFSENS1", 8) != 0) throw ParseError(path + ": not a sensitivity dump");
  SensitivityMatrices s{DenseMatrix(static_cast<int>(n)), DenseMatrix(static_cast<int>(n)), std::vector<double>(n, base_v_squared)};
  in.read(reinterpret_cast<char*>(s.R.data().data()), static_cast<std::streamsize>(s.R.data().size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(s.X.data().data()), static_cast<std::streamsize>(s.X.data().size() * sizeof(double)));
  if (!in) throw ParseError(path + ": truncated sensitivity dump");
  return s;
}

}  // namespace mlopf
