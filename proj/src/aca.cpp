#include "covaca/aca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "covaca/csv.hpp"

namespace covaca {

EntryOracle AffineFamily::at(std::span<const double> theta) const {
  const Vector phi = coeffs(theta);
  auto terms_copy = std::make_shared<const std::vector<EntryOracle>>(terms);
  EntryOracle o;
  o.n = n;
  o.eval = [terms_copy, phi](Index i, Index j) {
    double v = 0.0;
    for (std::size_t t = 0; t < terms_copy->size(); ++t) v += phi(static_cast<Index>(t)) * (*terms_copy)[t](i, j);
    return v;
  };
  Vector diag = Vector::Zero(n);
  for (std::size_t t = 0; t < terms.size(); ++t) diag += phi(static_cast<Index>(t)) * terms[t].diagonal();
  o.diag_hint = std::move(diag);
  return o;
}

void AffineFamily::validate() const {
  if (terms.empty()) throw Error(Errc::InvalidArgument, "affine family has no terms");
  if (traces.size() != terms.size()) throw Error(Errc::InvalidArgument, "affine family: traces/terms mismatch");
  if (!coeffs) throw Error(Errc::InvalidArgument, "affine family: missing coefficient map");
  for (const auto& t : terms)
    if (t.n != n) throw Error(Errc::InvalidArgument, "affine family: term dimension mismatch");
}

AffineFamily single_matrix_family(const EntryOracle& a) {
  AffineFamily fam;
  fam.n = a.n;
  fam.terms = {a};
  fam.traces = {a.diagonal().sum()};
  fam.coeffs = [](std::span<const double>) { return Vector::Ones(1); };
  fam.param_box = ParamBox{{1.0}, {1.0}};
  fam.true_oracle = [a](std::span<const double>) { return a; };
  return fam;
}

bool IndexSet::contains(Index i) const {
  return std::find(indices.begin(), indices.end(), i) != indices.end();
}

IndexSet IndexSet::prefix(Index k) const {
  return IndexSet{{indices.begin(), indices.begin() + std::min(k, size())}};
}

DenseMatrix CrossFactorization::materialize() const {
  const DenseMatrix x = scaled_cols();
  return x * x.transpose();
}

CrossFactorization build_cross(const EntryOracle& a, const IndexSet& index_set) {
  CrossFactorization c;
  c.index_set = index_set;
  const Index k = index_set.size();
  c.cols.resize(a.n, k);
  for (Index l = 0; l < k; ++l) c.cols.col(l) = a.column(index_set.indices[static_cast<std::size_t>(l)]);
  c.pivot_block.resize(k, k);
  for (Index r = 0; r < k; ++r) c.pivot_block.row(r) = c.cols.row(index_set.indices[static_cast<std::size_t>(r)]);
  try {
    c.pivot_chol = cholesky(c.pivot_block);
  } catch (const Error& e) {
    throw Error(Errc::CholeskyFailure, e.what());
  }
  return c;
}

std::string_view to_string(AcaTermination t) noexcept {
  switch (t) {
    case AcaTermination::ToleranceReached: return "ToleranceReached";
    case AcaTermination::KmaxReached: return "KmaxReached";
    case AcaTermination::NonpositivePivot: return "NonpositivePivot";
    case AcaTermination::NoPositiveResidual: return "NoPositiveResidual";
  }
  return "Unknown";
}

std::string AcaTrace::to_csv(std::size_t param_dim) const {
  std::ostringstream os;
  std::vector<std::string> header{"iter", "res_max"};
  for (std::size_t a = 0; a < param_dim; ++a) header.push_back("theta_star_" + std::to_string(a + 1));
  header.push_back("pivot_index");
  write_csv_row(os, header);
  for (const AcaStep& st : steps) {
    std::vector<std::string> row{std::to_string(st.k), format_double(st.trace_residual)};
    for (std::size_t a = 0; a < param_dim; ++a)
      row.push_back(st.theta_star && a < st.theta_star->size() ? format_double((*st.theta_star)[a]) : "");
    row.push_back(st.pivot_index >= 0 ? std::to_string(st.pivot_index) : "");
    write_csv_row(os, row);
  }
  return os.str();
}

Index default_k_max(Index n) { return std::min<Index>(n, 512); }

// ---------------------------------------------------------------------------

AcaResult aca_spsd(const EntryOracle& a, double tol, Index k_max) {
  if (!(tol >= 0.0)) throw Error(Errc::InvalidArgument, "tol must be nonnegative");
  const Index n = a.n;
  k_max = std::min(k_max < 0 ? default_k_max(n) : k_max, n);
  AcaResult out;
  Vector d = a.diagonal();
  out.initial_trace = d.sum();
  DenseMatrix u(n, std::max<Index>(k_max, 1));
  std::vector<char> selected(static_cast<std::size_t>(n), 0);
  Index k = 0;
  while (true) {
    const double tr = d.sum();
    out.final_trace = tr;
    if (tr <= tol) {
      out.trace.termination = AcaTermination::ToleranceReached;
      break;
    }
    if (k >= k_max) {
      out.trace.termination = AcaTermination::KmaxReached;
      break;
    }
    Index piv = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i)
      if (!selected[static_cast<std::size_t>(i)] && d(i) > best) {
        best = d(i);
        piv = i;
      }
    if (piv < 0 || !(best > 0.0)) {
      out.trace.termination = AcaTermination::NonpositivePivot;
      break;
    }
    Vector col = a.column(piv);
    if (k > 0) col.noalias() -= u.leftCols(k) * u.row(piv).head(k).transpose();
    const double p = col(piv);
    if (!(p > 0.0)) {
      out.trace.termination = AcaTermination::NonpositivePivot;
      break;
    }
    u.col(k) = col / std::sqrt(p);
    d -= u.col(k).cwiseAbs2();
    d(piv) = 0.0;
    selected[static_cast<std::size_t>(piv)] = 1;
    out.index_set.indices.push_back(piv);
    out.factors.push_back(u.col(k));
    ++k;
    AcaStep st;
    st.k = k;
    st.pivot_index = piv;
    st.pivot_value = p;
    st.trace_residual = d.sum();
    out.trace.steps.push_back(std::move(st));
  }
  return out;
}

// ---------------------------------------------------------------------------

EntryOracle residual_oracle(const EntryOracle& a, const CrossFactorization& cross) {
  auto x = std::make_shared<const DenseMatrix>(cross.scaled_cols());
  EntryOracle o;
  o.n = a.n;
  o.eval = [a, x](Index i, Index j) { return a(i, j) - x->row(i).dot(x->row(j)); };
  o.diag_hint = a.diagonal() - x->rowwise().squaredNorm();
  return o;
}

EntryOracle residual_oracle(const AffineFamily& fam, const IndexSet& index_set,
                            std::span<const double> theta) {
  const EntryOracle a = fam.at(theta);
  return residual_oracle(a, build_cross(a, index_set));
}

double residual_trace(const EntryOracle& a, const IndexSet& index_set) {
  const double tr = a.diagonal().sum();
  if (index_set.size() == 0) return tr;
  return tr - build_cross(a, index_set).scaled_cols().squaredNorm();
}

// ---------------------------------------------------------------------------

RobustnessBound robustness_bound(const DenseMatrix& a, const DenseMatrix& e, const IndexSet& index_set,
                                 double tol) {
  const Index n = a.rows();
  if (a.cols() != n || e.rows() != n || e.cols() != n)
    throw Error(Errc::InvalidArgument, "robustness_bound: dimension mismatch");
  const Index k = index_set.size();
  RobustnessBound b;
  b.delta = spectral_norm(symmetrize(e));
  if (k == 0) {
    b.bound = tol + static_cast<double>(n) * b.delta;
    return b;
  }
  std::vector<Index> comp;
  for (Index i = 0; i < n; ++i)
    if (!index_set.contains(i)) comp.push_back(i);
  DenseMatrix aii(k, k), aic(k, static_cast<Index>(comp.size()));
  for (Index r = 0; r < k; ++r) {
    const Index ir = index_set.indices[static_cast<std::size_t>(r)];
    for (Index c = 0; c < k; ++c) aii(r, c) = a(ir, index_set.indices[static_cast<std::size_t>(c)]);
    for (std::size_t c = 0; c < comp.size(); ++c) aic(r, static_cast<Index>(c)) = a(ir, comp[c]);
  }
  const Vector lam = sym_eigenvalues(symmetrize(aii));
  const double lam_min = lam(k - 1);
  if (!(lam_min > 0.0)) throw Error(Errc::RhoTooLarge, "pivot block is not positive definite");
  b.rho = b.delta / lam_min;
  const DenseMatrix w = cholesky(symmetrize(aii)).solve_right(DenseMatrix::Identity(k, k));
  const DenseMatrix wmat = (w * w.transpose()) * aic;
  b.w_norm = comp.empty() ? 0.0 : thin_svd(wmat).sigma(0);
  if (!(b.rho < 1.0))
    throw Error(Errc::RhoTooLarge, "rho = " + std::to_string(b.rho) + " >= 1");
  b.bound = tol + static_cast<double>(n - k) * b.delta * (1.0 + b.w_norm) * (1.0 + b.w_norm) / (1.0 - b.rho);
  return b;
}

bool foster_bound_check(const DenseMatrix& a, const IndexSet& index_set, double trace_residual) {
  const Index n = a.rows();
  const Index k = index_set.size();
  if (k >= n) throw Error(Errc::InvalidArgument, "foster_bound_check needs |I| < n");
  constexpr double slack = 1e-10;
  if (trace_residual <= slack) return true;
  const Vector lam = sym_eigenvalues(symmetrize(a));
  const double sigma = std::abs(lam(k));  // sigma_{k+1} for SPSD input
  if (!(sigma > 0.0)) return false;
  const double log_rhs = static_cast<double>(k) * std::log(4.0) + std::log(static_cast<double>(n - k)) +
                         std::log(sigma);
  const double log_lhs = std::log(trace_residual - slack);
  return log_lhs <= log_rhs;
}

}  // namespace covaca
