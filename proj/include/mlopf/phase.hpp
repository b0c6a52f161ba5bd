#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

namespace mlopf {

using Complex = std::complex<double>;

enum class Phase : std::uint8_t { a = 0, b = 1, c = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::a, Phase::b, Phase::c};

constexpr int code(Phase p) { return static_cast<int>(p); }

constexpr char to_char(Phase p) { return static_cast<char>('a' + code(p)); }

inline std::optional<Phase> phase_from_char(char ch) {
  switch (ch) {
    case 'a': return Phase::a;
    case 'b': return Phase::b;
    case 'c': return Phase::c;
    default: return std::nullopt;
  }
}

/// Subset of {a, b, c} stored as a 3-bit mask.
class PhaseSet {
 public:
  constexpr PhaseSet() = default;
  constexpr PhaseSet(std::initializer_list<Phase> phases) {
    for (Phase p : phases) insert(p);
  }

  static constexpr PhaseSet all() { return PhaseSet{Phase::a, Phase::b, Phase::c}; }
  static constexpr PhaseSet from_mask(std::uint8_t m) {
    PhaseSet s;
    s.mask_ = m & 0x7;
    return s;
  }

  constexpr void insert(Phase p) { mask_ |= static_cast<std::uint8_t>(1u << code(p)); }
  constexpr void erase(Phase p) { mask_ &= static_cast<std::uint8_t>(~(1u << code(p))); }
  constexpr bool contains(Phase p) const { return (mask_ >> code(p)) & 1u; }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr std::uint8_t mask() const { return mask_; }
  constexpr int size() const { return (mask_ & 1) + ((mask_ >> 1) & 1) + ((mask_ >> 2) & 1); }
  constexpr bool subset_of(PhaseSet other) const { return (mask_ & ~other.mask_) == 0; }

  /// Position of `p` among the phases of this set in a < b < c order.
  constexpr int rank(Phase p) const {
    int r = 0;
    for (int k = 0; k < code(p); ++k) r += (mask_ >> k) & 1;
    return r;
  }

  std::string str() const {
    std::string s;
    for (Phase p : kAllPhases)
      if (contains(p)) s.push_back(to_char(p));
    return s;
  }

  friend constexpr bool operator==(PhaseSet, PhaseSet) = default;

 private:
  std::uint8_t mask_ = 0;
};

/// The 120-degree rotation e^{-i 2 pi / 3}.
inline const Complex kOmega{-0.5, -std::numbers::sqrt3 / 2.0};

/// omega^k for a signed exponent k in [-2, 2]; negative powers are conjugates.
inline Complex omega_pow(int k) {
  static const std::array<Complex, 3> powers{Complex{1.0, 0.0}, kOmega, std::conj(kOmega)};
  const int m = ((k % 3) + 3) % 3;
  return powers[static_cast<std::size_t>(m)];
}

/// omega^{code(from) - code(to)}.
inline Complex rotation(Phase from, Phase to) { return omega_pow(code(from) - code(to)); }

}  // namespace mlopf
