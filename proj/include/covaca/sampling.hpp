#pragma once
//
// Offline/online sampling from N(0, C_I(theta)): the index set is selected
// once by param_aca, then each parameter needs only C(theta)(:,I) and a
// k x k Cholesky factor.
//

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "covaca/aca.hpp"

namespace covaca {

struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Standard normal variates from a counter-based splitmix64 generator keyed
/// by (seed, stream), transformed pairwise by Box-Muller. Variate i depends
/// only on the key and i.
class NormalStream {
 public:
  explicit NormalStream(RngSeed seed);
  double next();
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// `count` parameters drawn uniformly from the box with the same generator.
std::vector<ParamPoint> uniform_parameters(const ParamBox& box, Index count, RngSeed rng);

enum class OnlineSource { expansion, true_kernel };

struct OfflineCounters {
  long long entry_evaluations = 0;
  double flop_estimate = 0.0;
  double seconds = 0.0;
};

class ApproxGaussian {
 public:
  /// Per-parameter data: C(theta)(:,I) and the upper factor of C(theta)(I,I).
  /// When the pivot block is numerically singular, indices of I whose Schur
  /// pivot is at rounding level are dropped; `kept` then lists the positions
  /// in I that remain and `cols` holds only those columns.
  struct Setup {
    DenseMatrix cols;
    TriangularFactor chol;
    std::vector<Index> kept;  // empty: all of I
  };

  ApproxGaussian(AffineFamily fam, IndexSet index_set, OnlineSource source);

  const AffineFamily& family() const { return fam_; }
  const IndexSet& index_set() const { return index_set_; }
  OnlineSource source() const { return source_; }
  Index n() const { return fam_.n; }
  Index k() const { return index_set_.size(); }

  /// Cached per exact parameter bits. Throws Errc::CholeskyFailure if the
  /// pivot block has a pivot below -1e-10 times its largest diagonal entry.
  std::shared_ptr<const Setup> setup(std::span<const double> theta) const;
  /// Dense C_I(theta).
  DenseMatrix covariance(std::span<const double> theta) const;

  void clear_cache() const;
  std::size_t max_cache_entries = 256;
  /// Test hook: replaces every xi by zero.
  bool zero_xi = false;

  OfflineCounters counters;
  std::optional<ParamAcaResult> offline_result;

 private:
  AffineFamily fam_;
  IndexSet index_set_;
  OnlineSource source_;
  struct Cache {
    std::mutex mutex;
    std::map<std::vector<std::uint64_t>, std::shared_ptr<const Setup>> entries;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();  // shared by copies
};

/// Runs param_aca and wraps its index set. The online source defaults to the
/// true kernel when the family carries one.
ApproxGaussian offline(const AffineFamily& fam, const std::vector<ParamPoint>& theta_set, double tol,
                       Index k_max, const ParamAcaOptions& options = {},
                       std::optional<OnlineSource> source = std::nullopt);

/// `count` samples of N(0, C_I(theta)) as the columns of an n x count matrix.
/// Sample u consumes normals u*k .. u*k + k - 1 of the stream.
DenseMatrix sample(const ApproxGaussian& g, std::span<const double> theta, RngSeed rng, Index count);

/// (1/u) sum x x^T over the columns of `samples` (mean zero, no centring).
DenseMatrix empirical_covariance(const DenseMatrix& samples);
DenseMatrix empirical_covariance(const std::vector<Vector>& samples);

/// sqrt(trace(C(theta) - C_I(theta))) on the true covariance. Throws
/// Errc::OrderViolated if a residual diagonal entry is below -1e-8 * trace.
double certify_online(const ApproxGaussian& g, std::span<const double> theta);

/// One sample per row, 17 significant digits.
void write_samples_csv(std::ostream& os, const DenseMatrix& samples);

}  // namespace covaca
