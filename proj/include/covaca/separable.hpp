#pragma once
//
// Affine-separable expansions c(d, theta) ~ sum_j phi_j(theta) a_j(d) of
// isotropic kernels, built by function-valued ACA (one parameter) or the
// empirical interpolation method (any number of parameters).
//

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "covaca/aca.hpp"
#include "covaca/kernels.hpp"

namespace covaca {

/// Chebyshev-Lobatto points on [lo, hi] in ascending order; the endpoints are exact.
Vector chebyshev_lobatto_nodes(Index count, double lo, double hi);

/// Clenshaw-Curtis quadrature weights matching chebyshev_lobatto_nodes.
Vector clenshaw_curtis_weights(Index count, double lo, double hi);

/// A function on [lo, hi] stored by its values at Chebyshev-Lobatto nodes
/// and evaluated by barycentric interpolation.
class Func1D {
 public:
  Func1D() = default;
  Func1D(double lo, double hi, Vector values);

  static Func1D sample(double lo, double hi, Index count, const std::function<double(double)>& f);

  double operator()(double x) const;

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  Index size() const { return values_.size(); }
  const Vector& values() const { return values_; }
  const Vector& nodes() const { return nodes_; }

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  Vector values_;
  Vector nodes_;
};

/// Coefficient functions theta -> (phi_1, ..., phi_s).
///
/// aca: phi_l(theta) = (c(d_l, theta) - sum_{m<l} coupling(l, m) phi_m(theta)) / pivot_l
///      where d_l are the pivot distances and coupling(l, m) = a_m(d_l).
/// eim: phi(theta) = U_s^{-1} c(nodes, theta) with U_s = U(nodes, 1:s).
struct ParamBasis {
  enum class Kind { aca, eim };

  Kind kind = Kind::aca;
  IsotropicKernel kernel;
  Vector points;          // pivot distances (aca) or interpolation nodes (eim)
  Vector pivots;          // aca only
  DenseMatrix matrix;     // aca: strictly lower coupling; eim: U_s
  std::shared_ptr<const Eigen::PartialPivLU<DenseMatrix>> lu;  // eim only

  Index size() const { return points.size(); }
  Vector evaluate(std::span<const double> theta) const;
  /// Keeps the first s functions; nesting makes this exact for both kinds.
  ParamBasis truncated(Index s) const;
};

ParamBasis make_aca_basis(IsotropicKernel kernel, Vector pivot_d, Vector pivots, DenseMatrix coupling);
ParamBasis make_eim_basis(IsotropicKernel kernel, Vector nodes, DenseMatrix u_s);

struct SeparableExpansion {
  std::vector<Func1D> terms;  // a_j
  ParamBasis phi;
  std::array<double, 2> d_domain{0.0, 1.0};
  ParamBox param_box;
  double reported_error = 0.0;

  Index s() const { return static_cast<Index>(terms.size()); }
  double eval(double d, std::span<const double> theta) const;
  SeparableExpansion truncated(Index s) const;
};

struct FunctionAcaOptions {
  Index n_d = 513;
  Index n_theta = 257;
};

struct FunctionAcaResult {
  SeparableExpansion expansion;
  std::vector<double> max_residual;  // grid max residual, index 0 before any pivot
  std::vector<double> pivot_theta;
};

/// Greedy cross approximation of c(d, theta) on a Chebyshev-Lobatto tensor grid.
FunctionAcaResult function_aca_1dparam(const IsotropicKernel& kernel, std::array<double, 2> d_domain,
                                       std::array<double, 2> theta_interval, Index s_max, double tol,
                                       const FunctionAcaOptions& options = {});

/// Greedy interpolation nodes for the given basis. Returns node indices into
/// the common Chebyshev grid of the basis functions.
std::vector<Index> eim_node_selection(std::span<const Func1D> basis);

struct EimOptions {
  Index n_d = 513;
  /// tau is relative to sigma_1 when true.
  bool relative_tau = true;
  Index max_snapshots = 900;
};

struct EimResult {
  SeparableExpansion expansion;
  Vector singular_values;  // of the weighted snapshot matrix
  std::vector<ParamPoint> snapshots;
  std::vector<Func1D> basis;  // u_1..u_s
  std::vector<Index> node_indices;
};

/// Snapshot SVD plus greedy interpolation. r_samples is the per-axis count of
/// the equispaced snapshot grid.
EimResult eim(const IsotropicKernel& kernel, std::array<double, 2> d_domain, const ParamBox& box,
              Index r_samples, double tau, const EimOptions& options = {});

/// Tensor grid of count points per axis, equispaced on each box edge.
std::vector<ParamPoint> equispaced_grid(const ParamBox& box, Index count);

/// max |c - c_s| over d_probe equispaced distances times theta_probe
/// equispaced parameters per axis.
double expansion_error(const SeparableExpansion& exp, const IsotropicKernel& kernel, Index d_probe,
                       Index theta_probe);

/// A_j(i, i') = a_j(|x_i - x_i'|) / n, with phi_j as coefficients.
AffineFamily affine_family_from_expansion(const SeparableExpansion& exp, const SpatialGrid& grid);

void write_expansion(std::ostream& os, const SeparableExpansion& exp, const KernelSpec& spec);
/// Reads an expansion; the kernel spec recorded in the file is returned in *spec.
SeparableExpansion read_expansion(std::istream& is, KernelSpec* spec = nullptr);

}  // namespace covaca
