#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cvn/errors.hpp"

namespace cvn {

/// Binary symmetric p x p matrix with zero diagonal.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(int p) : p_(p), bits_(static_cast<std::size_t>(p) * p, 0) {
    if (p < 0) throw InvalidDimension("Adjacency: negative dimension");
  }

  static Adjacency complete(int p) {
    Adjacency a(p);
    for (int s = 0; s < p; ++s)
      for (int t = s + 1; t < p; ++t) a.set(s, t, true);
    return a;
  }

  int dim() const noexcept { return p_; }

  bool operator()(int s, int t) const { return bits_[index(s, t)] != 0; }

  void set(int s, int t, bool present) {
    if (s == t) return;
    bits_[index(s, t)] = present ? 1 : 0;
    bits_[index(t, s)] = present ? 1 : 0;
  }

  void toggle(int s, int t) { set(s, t, !(*this)(s, t)); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (int s = 0; s < p_; ++s)
      for (int t = s + 1; t < p_; ++t) n += (*this)(s, t);
    return n;
  }

  /// Upper-triangle pairs (s < t) that are present, in row-major order.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int s = 0; s < p_; ++s)
      for (int t = s + 1; t < p_; ++t)
        if ((*this)(s, t)) out.emplace_back(s, t);
    return out;
  }

  friend bool operator==(const Adjacency& a, const Adjacency& b) {
    return a.p_ == b.p_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t index(int s, int t) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(p_) + static_cast<std::size_t>(t);
  }

  int p_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace cvn
