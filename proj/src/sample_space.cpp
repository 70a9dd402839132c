#include "cmm/sample_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cmm/error.hpp"

namespace cmm {

namespace {

void validate_counts(const std::vector<int>& counts) {
  if (counts.size() < 2) {
    throw InvalidArgument("count vector needs at least 2 categories, got " +
                          std::to_string(counts.size()));
  }
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] < 0) {
      throw InvalidArgument("negative count " + std::to_string(counts[j]) +
                            " in category " + std::to_string(j));
    }
  }
}

}  // namespace

CountVector::CountVector(std::vector<int> counts) : counts_(std::move(counts)) {
  validate_counts(counts_);
  long long sum = 0;
  for (int c : counts_) sum += c;
  if (sum > std::numeric_limits<int>::max()) {
    throw InvalidArgument("count vector total overflows int");
  }
  total_ = static_cast<int>(sum);
}

CountVector::CountVector(std::initializer_list<int> counts)
    : CountVector(std::vector<int>(counts)) {}

std::ostream& operator<<(std::ostream& os, const CountVector& y) {
  os << '(';
  for (std::size_t j = 0; j < y.categories(); ++j) {
    if (j) os << ',';
    os << y[j];
  }
  return os << ')';
}

std::string to_string(const CountVector& y) {
  std::ostringstream os;
  os << y;
  return os.str();
}

std::uint64_t space_limit() {
  if (const char* env = std::getenv("CMM_MAX_SPACE_SIZE")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return kDefaultSpaceLimit;
}

std::uint64_t space_size(int m, int k) {
  if (k < 2) throw InvalidArgument("k must be >= 2, got " + std::to_string(k));
  if (m < 0) throw InvalidArgument("m must be >= 0, got " + std::to_string(m));
  // binom(m + k - 1, k - 1) built up multiplicatively; every partial
  // product binom(m + i, i) is an integer.
  const std::uint64_t n = static_cast<std::uint64_t>(m);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= static_cast<std::uint64_t>(k - 1); ++i) {
    const std::uint64_t factor = n + i;
    const std::uint64_t g = std::gcd(result, i);
    const std::uint64_t reduced = result / g;
    const std::uint64_t rest = i / g;  // divides factor
    const std::uint64_t f = factor / rest;
    if (reduced != 0 && f > std::numeric_limits<std::uint64_t>::max() / reduced) {
      throw NumericalError("sample space size binom(" + std::to_string(m + k - 1) +
                           ", " + std::to_string(m) + ") overflows 64 bits");
    }
    result = reduced * f;
  }
  return result;
}

void check_space(int m, int k) {
  const std::uint64_t size = space_size(m, k);
  const std::uint64_t limit = space_limit();
  if (size > limit) {
    throw SpaceTooLarge("sample space Omega_{" + std::to_string(m) + "," +
                        std::to_string(k) + "} has " + std::to_string(size) +
                        " points, above the limit of " + std::to_string(limit) +
                        " (set CMM_MAX_SPACE_SIZE to raise it)");
  }
}

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

double log_multinomial_coeff(std::span<const int> y) {
  int m = 0;
  double acc = 0.0;
  for (int c : y) {
    m += c;
    acc -= log_factorial(c);
  }
  return acc + log_factorial(m);
}

CompositionWalker::CompositionWalker(int m, int k) : y_(static_cast<std::size_t>(k), 0) {
  if (k < 2) throw InvalidArgument("k must be >= 2, got " + std::to_string(k));
  if (m < 0) throw InvalidArgument("m must be >= 0, got " + std::to_string(m));
  y_[0] = m;
}

void CompositionWalker::advance() {
  if (done_) return;
  const std::size_t k = y_.size();
  // Rightmost non-baseline coordinate that can give up a unit.
  std::size_t j = k - 1;
  while (j > 0 && y_[j - 1] == 0) --j;
  if (j == 0) {
    done_ = true;
    return;
  }
  const std::size_t pos = j - 1;
  int tail = 0;
  for (std::size_t i = pos + 1; i < k; ++i) {
    tail += y_[i];
    y_[i] = 0;
  }
  --y_[pos];
  y_[pos + 1] = tail + 1;
}

Compositions::Compositions(int m, int k) : walker_(m, k) {}

Compositions enumerate_compositions(int m, int k) {
  check_space(m, k);
  return Compositions(m, k);
}

std::vector<CountVector> list_compositions(int m, int k) {
  std::vector<CountVector> out;
  out.reserve(space_size(m, k));
  for (const auto& y : enumerate_compositions(m, k)) out.emplace_back(y);
  return out;
}

SpaceSubsets distinguished_subsets(int m, int k) {
  if (k < 2) throw InvalidArgument("k must be >= 2, got " + std::to_string(k));
  if (m < 1) throw InvalidArgument("m must be >= 1, got " + std::to_string(m));
  SpaceSubsets out;
  out.q = m / k;
  out.r = m % k;
  for (int j = 0; j < k; ++j) {
    std::vector<int> v(static_cast<std::size_t>(k), 0);
    v[static_cast<std::size_t>(j)] = m;
    out.vertices.emplace_back(std::move(v));
  }
  // Patterns of r ones among k slots, largest first: (1,1,0), (1,0,1), (0,1,1).
  std::vector<int> pattern(static_cast<std::size_t>(k), 0);
  std::fill(pattern.begin(), pattern.begin() + out.r, 1);
  do {
    std::vector<int> c(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) c[static_cast<std::size_t>(j)] = out.q + pattern[static_cast<std::size_t>(j)];
    out.centers.emplace_back(std::move(c));
  } while (std::prev_permutation(pattern.begin(), pattern.end()));
  return out;
}

}  // namespace cmm
