#pragma once

#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <span>
#include <string>
#include <vector>

namespace cmm {

// One cluster outcome: k >= 2 non-negative category counts summing to m.
class CountVector {
 public:
  CountVector() = default;
  explicit CountVector(std::vector<int> counts);
  CountVector(std::initializer_list<int> counts);

  int total() const { return total_; }
  std::size_t categories() const { return counts_.size(); }
  int operator[](std::size_t j) const { return counts_[j]; }
  std::span<const int> counts() const { return counts_; }
  const std::vector<int>& vec() const { return counts_; }

  auto operator<=>(const CountVector&) const = default;

 private:
  std::vector<int> counts_;
  int total_ = 0;
};

std::ostream& operator<<(std::ostream& os, const CountVector& y);
std::string to_string(const CountVector& y);

// Default ceiling on |Omega_{m,k}| for anything that enumerates the space.
inline constexpr std::uint64_t kDefaultSpaceLimit = 50'000'000;

// Active ceiling: kDefaultSpaceLimit unless CMM_MAX_SPACE_SIZE is set to a
// positive integer in the environment.
std::uint64_t space_limit();

// binom(m + k - 1, m). Throws NumericalError instead of wrapping on overflow.
std::uint64_t space_size(int m, int k);

// Throws SpaceTooLarge when |Omega_{m,k}| exceeds space_limit().
void check_space(int m, int k);

double log_factorial(int n);

// ln(m! / (y_1! ... y_k!)) via lgamma.
double log_multinomial_coeff(std::span<const int> y);
inline double log_multinomial_coeff(const CountVector& y) {
  return log_multinomial_coeff(y.counts());
}

// Streaming walk over Omega_{m,k} in reverse-lexicographic order on
// (y_1, ..., y_{k-1}): (m,0,..,0), (m-1,1,0,..), ..., (0,..,0,m).
class CompositionWalker {
 public:
  CompositionWalker(int m, int k);

  const std::vector<int>& current() const { return y_; }
  bool done() const { return done_; }
  void advance();

 private:
  std::vector<int> y_;
  bool done_ = false;
};

// Input range over Omega_{m,k}; usable in range-for without materializing.
class Compositions {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = std::vector<int>;
    using difference_type = std::ptrdiff_t;
    using pointer = const std::vector<int>*;
    using reference = const std::vector<int>&;

    iterator() = default;
    explicit iterator(CompositionWalker* w) : walker_(w) {}
    reference operator*() const { return walker_->current(); }
    pointer operator->() const { return &walker_->current(); }
    iterator& operator++() {
      walker_->advance();
      return *this;
    }
    void operator++(int) { walker_->advance(); }
    bool operator==(std::default_sentinel_t) const { return walker_->done(); }

   private:
    CompositionWalker* walker_ = nullptr;
  };

  Compositions(int m, int k);

  iterator begin() { return iterator(&walker_); }
  std::default_sentinel_t end() const { return {}; }

 private:
  CompositionWalker walker_;
};

// Validating entry point: rejects k < 2 and spaces past the guard.
Compositions enumerate_compositions(int m, int k);

// Materialized form of enumerate_compositions.
std::vector<CountVector> list_compositions(int m, int k);

struct SpaceSubsets {
  std::vector<CountVector> vertices;  // m * e_j
  std::vector<CountVector> centers;   // entries q or q+1, r of them q+1
  int q = 0;
  int r = 0;
};

SpaceSubsets distinguished_subsets(int m, int k);

}  // namespace cmm
