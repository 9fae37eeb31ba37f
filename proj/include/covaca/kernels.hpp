#pragma once
//
// Isotropic covariance kernels, the spatial grid on [0,1]^2 and lazy
// covariance entry oracles.
//

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covaca/numerics.hpp"

namespace covaca {

using ParamPoint = std::vector<double>;

enum class KernelFamily { gaussian, matern };

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double sigma2 = 1.0;
  int theta_dim = 1;
  std::optional<double> fixed_nu;  // Matern smoothness when it is not a parameter

  static KernelSpec gaussian(double sigma2 = 1.0);
  static KernelSpec matern_fixed(double nu, double sigma2 = 1.0);
  static KernelSpec matern_free(double sigma2 = 1.0);

  /// Throws Errc::InvalidArgument if the fields are inconsistent.
  void validate() const;
  std::string describe() const;
};

struct ParamBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> theta) const;
  void validate() const;
};

double gaussian_kernel(double d, double theta, double sigma2 = 1.0);

/// K_nu(x). Underflows to 0 for large x.
double bessel_k(double nu, double x);
/// log K_nu(x); finite where K_nu itself over- or underflows.
double log_bessel_k(double nu, double x);

double matern_kernel(double d, double theta1, double theta2, double sigma2 = 1.0);

/// c(d; theta) for the given kernel; theta has spec.theta_dim entries.
double kernel_value(const KernelSpec& spec, double d, std::span<const double> theta);

using IsotropicKernel = std::function<double(double, std::span<const double>)>;
IsotropicKernel kernel_function(const KernelSpec& spec);

/// Node placement for make_grid. cell_centre puts x_i at the centre of the
/// i-th of n0 x n0 equal cells, ((c + 0.5) / n0, (r + 0.5) / n0); scaled_by_n0_plus_1
/// divides by n0 + 1 instead, which leaves a wider margin at the top and right.
enum class GridSpacing { cell_centre, scaled_by_n0_plus_1 };

/// Uniform n0 x n0 point grid in the open unit square. Point i (0-based)
/// sits at column c = i mod n0 and row r = i div n0, so point 0 is bottom-left
/// and point n0 is directly above it.
struct SpatialGrid {
  Index n0 = 0;
  std::vector<std::array<double, 2>> points;
  double weight = 0.0;  // 1 / n
  double step = 0.0;    // distance between neighbouring points

  Index size() const { return static_cast<Index>(points.size()); }
  double spacing() const { return step; }
  double distance(Index i, Index j) const;
  double max_distance() const;
};

SpatialGrid make_grid(Index n0, GridSpacing spacing = GridSpacing::cell_centre);

/// Lazily evaluable symmetric n x n matrix.
struct EntryOracle {
  Index n = 0;
  std::function<double(Index, Index)> eval;
  std::optional<Vector> diag_hint;
  /// Optional fast path for column(): writes column j into out[0..n).
  std::function<void(Index, double*)> fill_column;

  /// Symmetric access: eval is always called with i <= j.
  double operator()(Index i, Index j) const { return i <= j ? eval(i, j) : eval(j, i); }
  Vector column(Index j) const;
  Vector diagonal() const;
  DenseMatrix submatrix(std::span<const Index> rows, std::span<const Index> cols) const;
  DenseMatrix materialize() const;
};

/// C(theta)_{ij} = c(|x_i - x_j|; theta) / n.
EntryOracle covariance_oracle(const KernelSpec& spec, const SpatialGrid& grid,
                              std::span<const double> theta);

/// Oracle (i, j) -> f(|x_i - x_j|) / n backed by a table over grid offsets.
EntryOracle grid_distance_oracle(const SpatialGrid& grid, const std::function<double(double)>& f);

EntryOracle dense_oracle(DenseMatrix a);

}  // namespace covaca
