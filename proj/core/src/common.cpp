#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "smoothfix/error.hpp"
#include "smoothfix/parallel.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kModelDefinition: return "model definition error";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kAlphaNotBracketed: return "alpha not bracketed";
    case ErrorCode::kInconclusive: return "inconclusive at budget";
    case ErrorCode::kPopulationCap: return "population cap exceeded";
    case ErrorCode::kContractViolation: return "contract violation";
    case ErrorCode::kEmptySample: return "empty sample";
    case ErrorCode::kLatticeDiscipline: return "lattice discipline";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kChecksum: return "checksum error";
    case ErrorCode::kIo: return "io error";
  }
  return "unknown error";
}

namespace {
std::atomic<std::size_t> g_workers{1};
}  // namespace

void set_workers(std::size_t w) { g_workers.store(std::max<std::size_t>(w, 1)); }

std::size_t workers() { return g_workers.load(); }

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t w = std::min(workers(), count);
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(1, count / (w * 8));
  auto worker = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= count) return;
      const std::size_t end = std::min(count, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (std::size_t t = 1; t < w; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double excess_kurtosis(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

double z_score(const Estimate& a, const Estimate& b, double exact_tol) {
  const double diff = a.value - b.value;
  const double se = std::hypot(a.std_error, b.std_error);
  if (se > 0.0) return diff / se;
  const double scale = std::max({1.0, std::abs(a.value), std::abs(b.value)});
  if (std::abs(diff) <= exact_tol * scale) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
}

}  // namespace smoothfix
