#include <algorithm>
#include <cmath>
#include <limits>

#include "covaca/aca.hpp"
#include "covaca/parallel.hpp"

namespace covaca {
namespace {

constexpr double kSkipped = -std::numeric_limits<double>::infinity();

struct Selection {
  Index star = -1;
  double res_max = 0.0;
  Index skipped = 0;
};

// res_max starts at 0 and only a strictly larger residual moves theta*, so the
// earliest parameter wins ties and nonpositive residuals never become theta*.
Selection select_theta(const Vector& res) {
  Selection sel;
  for (Index t = 0; t < res.size(); ++t) {
    if (res(t) == kSkipped) {
      ++sel.skipped;
      continue;
    }
    if (res(t) > sel.res_max) {
      sel.res_max = res(t);
      sel.star = t;
    }
  }
  return sel;
}

// Index of the largest residual diagonal entry outside I; -1 if none is positive.
Index select_pivot(const Vector& d, const std::vector<char>& selected, double* value) {
  Index piv = -1;
  double best = 0.0;
  for (Index i = 0; i < d.size(); ++i)
    if (!selected[static_cast<std::size_t>(i)] && d(i) > best) {
      best = d(i);
      piv = i;
    }
  *value = best;
  return piv;
}

// Shared outer loop. `residuals` fills res(theta) for every theta given the
// current index set; `pivot` returns the residual diagonal of A(theta*) - A_I(theta*)
// given the position of theta* in theta_set; `append` adds a new index.
template <class Residuals, class Pivot, class Append>
ParamAcaResult greedy_loop(Index n, const std::vector<ParamPoint>& theta_set, double tol, Index k_max,
                           const ParamAcaOptions& options, Residuals&& residuals, Pivot&& pivot,
                           Append&& append) {
  if (theta_set.empty()) throw Error(Errc::InvalidArgument, "parameter set is empty");
  if (!(tol >= 0.0)) throw Error(Errc::InvalidArgument, "tol must be nonnegative");
  k_max = std::min(k_max < 0 ? default_k_max(n) : k_max, n);
  const Index m = static_cast<Index>(theta_set.size());

  ParamAcaResult out;
  std::vector<char> selected(static_cast<std::size_t>(n), 0);
  while (true) {
    const Index k = out.index_set.size();
    Vector res(m);
    residuals(out.index_set, res);
    if (options.record_residuals) out.residuals.push_back(res);
    const Selection sel = select_theta(res);
    if (sel.skipped == m)
      throw Error(Errc::CholeskyFailure, "pivot block indefinite for every parameter at k = " + std::to_string(k));

    AcaStep st;
    st.k = k;
    st.trace_residual = sel.res_max;
    st.skipped_thetas = sel.skipped;
    if (sel.star >= 0) st.theta_star = theta_set[static_cast<std::size_t>(sel.star)];
    out.final_res_max = sel.res_max;

    if (sel.star < 0) {
      out.trace.termination = AcaTermination::NoPositiveResidual;
      out.trace.steps.push_back(std::move(st));
      break;
    }
    if (sel.res_max <= tol) {
      out.trace.termination = AcaTermination::ToleranceReached;
      out.trace.steps.push_back(std::move(st));
      break;
    }
    if (k >= k_max) {
      out.trace.termination = AcaTermination::KmaxReached;
      out.trace.steps.push_back(std::move(st));
      break;
    }
    const Vector d = pivot(out.index_set, sel.star);
    double pv = 0.0;
    const Index piv = select_pivot(d, selected, &pv);
    if (piv < 0) {
      out.trace.termination = AcaTermination::NonpositivePivot;
      out.trace.steps.push_back(std::move(st));
      break;
    }
    st.pivot_index = piv;
    st.pivot_value = pv;
    out.trace.steps.push_back(std::move(st));
    selected[static_cast<std::size_t>(piv)] = 1;
    append(piv);
    out.index_set.indices.push_back(piv);
  }
  return out;
}

}  // namespace

ParamAcaResult param_aca(const AffineFamily& fam, const std::vector<ParamPoint>& theta_set, double tol,
                         Index k_max, const ParamAcaOptions& options) {
  fam.validate();
  const Index n = fam.n;
  const Index s = fam.s();
  const Index m = static_cast<Index>(theta_set.size());

  // phi(theta) and sum_j phi_j t_j for every theta.
  DenseMatrix phi(s, m);
  Vector trace_theta(m);
  const Eigen::Map<const Vector> traces(fam.traces.data(), s);
  for (Index t = 0; t < m; ++t) {
    phi.col(t) = fam.coeffs(theta_set[static_cast<std::size_t>(t)]);
    trace_theta(t) = phi.col(t).dot(traces);
  }

  DenseMatrix diag_terms(n, s);
  for (Index j = 0; j < s; ++j) diag_terms.col(j) = fam.terms[static_cast<std::size_t>(j)].diagonal();

  // Raw columns A_j(:, i_l) stored at column l*s + j, and their incremental QR.
  DenseMatrix raw(n, 0);
  IncrementalQR qr(n);
  long long evals = static_cast<long long>(n) * s;
  double flops = 0.0;

  // Per theta: Z = R_I Phi(theta) R_A(theta)^{-1} in the coordinates of the QR
  // basis, grown by one column per index, so res(theta) = tr - ||Z||_F^2.
  // Its leading rows and columns never change once written.
  struct State {
    DenseMatrix z;
    double z_norm2 = 0.0;
    double max_diag = 0.0;
    bool alive = true;  // false once A(theta)(I,I) is not positive definite
  };
  std::vector<State> state(static_cast<std::size_t>(m));
  Index k = 0;

  auto residuals = [&](const IndexSet&, Vector& res) {
    for (Index t = 0; t < m; ++t) {
      const State& st = state[static_cast<std::size_t>(t)];
      res(t) = st.alive ? trace_theta(t) - st.z_norm2 : kSkipped;
    }
  };

  auto pivot = [&](const IndexSet&, Index star) -> Vector {
    Vector d = diag_terms * phi.col(star);
    if (k == 0) return d;
    const State& st = state[static_cast<std::size_t>(star)];
    const Index rank = qr.rank();
    d -= (qr.q() * st.z.topLeftCorner(rank, k)).rowwise().squaredNorm();
    flops += 2.0 * static_cast<double>(n) * static_cast<double>(rank) * static_cast<double>(k);
    return d;
  };

  auto append = [&](Index i) {
    const Index old_rank = qr.rank();
    raw.conservativeResize(n, (k + 1) * s);
    for (Index j = 0; j < s; ++j) {
      raw.col(k * s + j) = fam.terms[static_cast<std::size_t>(j)].column(i);
      qr.append_projected(raw.col(k * s + j));
      flops += 4.0 * static_cast<double>(n) * static_cast<double>(qr.rank());
    }
    evals += static_cast<long long>(n) * s;
    const Index rank = qr.rank();
    const auto rcols = qr.r_factor().middleCols(k * s, s);  // rank x s
    const Vector q_row = qr.q().row(i).head(old_rank).transpose();
    const Vector a_diag_raw = raw.row(i).segment(k * s, s).transpose();

    parallel_for(m, options.threads, [&](long long b, long long e) {
      Vector r, col;
      for (long long t = b; t < e; ++t) {
        State& st = state[static_cast<std::size_t>(t)];
        if (!st.alive) continue;
        const auto ph = phi.col(static_cast<Index>(t));
        if (st.z.rows() < rank || st.z.cols() < k + 1) {
          DenseMatrix grown = DenseMatrix::Zero(std::min(n, std::max<Index>(rank, 2 * st.z.rows())),
                                                std::max<Index>(k + 1, 2 * st.z.cols()));
          grown.topLeftCorner(old_rank, k) = st.z.topLeftCorner(old_rank, k);
          st.z = std::move(grown);
        }
        // r = R_A^{-T} A(theta)(I, i) is row i of Q Z; the new pivot is its Schur complement.
        r = st.z.topLeftCorner(old_rank, k).transpose() * q_row;
        const double a_ii = a_diag_raw.dot(ph);
        st.max_diag = std::max(st.max_diag, a_ii);
        const double p = a_ii - r.squaredNorm();
        if (!(p > 1e-14 * st.max_diag)) {
          st.alive = false;
          continue;
        }
        col = rcols * ph;
        col.head(old_rank).noalias() -= st.z.topLeftCorner(old_rank, k) * r;
        col /= std::sqrt(p);
        st.z.col(k).head(rank) = col;
        st.z_norm2 += col.squaredNorm();
      }
    });
    flops += static_cast<double>(m) * (4.0 * static_cast<double>(old_rank) * static_cast<double>(k) +
                                       2.0 * static_cast<double>(rank) * static_cast<double>(s));
    ++k;
  };

  ParamAcaResult out = greedy_loop(n, theta_set, tol, k_max, options, residuals, pivot, append);
  out.entry_evaluations = evals;
  out.flop_estimate = flops;
  return out;
}

ParamAcaResult param_aca_direct(const AffineFamily& fam, const std::vector<ParamPoint>& theta_set,
                                double tol, Index k_max, const ParamAcaOptions& options) {
  if (!fam.has_true_oracle()) throw Error(Errc::InvalidArgument, "param_aca_direct needs a true oracle");
  const Index n = fam.n;
  const Index m = static_cast<Index>(theta_set.size());
  std::vector<EntryOracle> oracles;
  oracles.reserve(static_cast<std::size_t>(m));
  for (const auto& th : theta_set) oracles.push_back(fam.true_oracle(th));
  long long evals = 0;

  // trace(C) - ||C(:,I) R^{-1}||_F^2 and the residual diagonal for one oracle.
  auto residual_diag = [](const EntryOracle& o, const IndexSet& set) -> Vector {
    Vector d = o.diagonal();
    if (set.size() == 0) return d;
    const CrossFactorization cross = build_cross(o, set);
    d -= cross.scaled_cols().rowwise().squaredNorm();
    return d;
  };

  auto residuals = [&](const IndexSet& set, Vector& res) {
    parallel_for(m, options.threads, [&](long long b, long long e) {
      for (long long t = b; t < e; ++t) {
        try {
          res(static_cast<Index>(t)) = residual_diag(oracles[static_cast<std::size_t>(t)], set).sum();
        } catch (const Error& err) {
          if (err.code() != Errc::CholeskyFailure) throw;
          res(static_cast<Index>(t)) = kSkipped;
        }
      }
    });
    evals += static_cast<long long>(m) * n * (set.size() + 1);
  };
  auto pivot = [&](const IndexSet& set, Index star) {
    evals += static_cast<long long>(n) * (set.size() + 1);
    return residual_diag(oracles[static_cast<std::size_t>(star)], set);
  };
  auto append = [](Index) {};

  ParamAcaResult out = greedy_loop(n, theta_set, tol, k_max, options, residuals, pivot, append);
  out.entry_evaluations = evals;
  return out;
}

}  // namespace covaca
