#pragma once
//
// Batch experiments behind the covaca command line tool. Each run_* function
// computes its results, writes its CSV files into config.output_dir (when
// non-empty) and returns the data for programmatic checks.
//

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "covaca/sampling.hpp"
#include "covaca/separable.hpp"
#include "covaca/wasserstein.hpp"

namespace covaca {

struct ExperimentConfig {
  KernelSpec kernel = KernelSpec::gaussian();
  Index n0 = 64;
  ParamBox theta_box{{0.1}, {1.4142135623730951}};
  Index m = 100;           // |Theta_f|
  double tol = 0.1;
  Index s_max = 18;
  double tau = 1e-8;       // relative to sigma_1
  Index r_samples = 30;    // EIM snapshots per axis
  Index k_max = -1;        // -1: min(n, 512)
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  int threads = 1;
  bool full = false;
  GridSpacing spacing = GridSpacing::cell_centre;

  // sample-bench
  Index u_max = 200;
  Index cov_samples = 20000;
  // eig-decay
  Index eig_count = 70;
  Index eig_thetas = 5;
  // tsvd-compare
  double tsvd_tol = 1e-9;
  // certify
  Index certify_thetas = 50;

  void validate() const;
};

/// Recognised configuration keys, in documentation order.
const std::vector<std::string>& config_keys();

/// Flat `key = value` lines; '#' starts a comment. Later lines win.
/// Throws Errc::ParseError on malformed lines or unknown keys.
std::map<std::string, std::string> parse_config(std::istream& is);

/// Defaults overridden by the given settings. `kernel`, `nu` and `sigma2`
/// select the kernel; without `theta_lo`/`theta_hi` the box defaults to
/// [0.1, sqrt 2] (and [2.5, 7.5] for a free Matern smoothness).
/// Throws Errc::ParseError on bad values.
ExperimentConfig config_from_settings(const std::map<std::string, std::string>& settings);

/// Fixed output file names.
namespace files {
inline constexpr const char* expansion = "expansion.txt";
inline constexpr const char* linearize_error = "linearize_error.csv";
inline constexpr const char* param_aca_trace = "param_aca_trace.csv";
inline constexpr const char* index_set = "index_set.txt";
inline constexpr const char* sample_bench = "sample_bench.csv";
inline constexpr const char* eig_decay = "eig_decay.csv";
inline constexpr const char* tsvd_compare = "tsvd_compare.csv";
inline constexpr const char* certify = "certify.csv";
}  // namespace files

/// Function ACA for one parameter, EIM otherwise.
SeparableExpansion linearize(const ExperimentConfig& cfg);

/// Affine family of the expansion on the configured grid, carrying the exact
/// covariance as its true oracle.
AffineFamily build_family(const ExperimentConfig& cfg, const SeparableExpansion& exp);

/// Theta_f: m equispaced points for one parameter, ceil(m^(1/dim)) per axis otherwise.
std::vector<ParamPoint> theta_set(const ExperimentConfig& cfg);

struct LinearizeOutput {
  SeparableExpansion expansion;
  std::vector<std::pair<Index, double>> error_by_s;  // probed error of each truncation
};
LinearizeOutput run_linearize(const ExperimentConfig& cfg);

struct ParamAcaOutput {
  ParamAcaResult result;
  double seconds = 0.0;
};
ParamAcaOutput run_param_aca(const ExperimentConfig& cfg, const SeparableExpansion& exp);

struct SampleBenchOutput {
  std::vector<double> time_plain;  // cumulative seconds after u samples
  std::vector<double> time_param;
  double offline_seconds = 0.0;
  double slope_plain = 0.0;
  double slope_param = 0.0;
  double intercept_param = 0.0;
  double crossover_u = 0.0;        // infinity when the lines never cross
  double cov_error_plain = 0.0;    // relative Frobenius error of empirical covariances
  double cov_error_param = 0.0;
  Index rank_param = 0;
};
SampleBenchOutput run_sample_bench(const ExperimentConfig& cfg, const SeparableExpansion& exp,
                                   const IndexSet& index_set);

struct EigDecayOutput {
  std::vector<double> thetas;
  std::vector<Vector> eigenvalues;  // top eig_count per theta, descending
  std::vector<double> traces;
};
/// Throws Errc::RefusesLargeN if n0 > 128.
EigDecayOutput run_eig_decay(const ExperimentConfig& cfg);

struct TsvdRow {
  Index k = 0;
  double aca_trace_error = 0.0;
  double nuclear_error = 0.0;
  double tsvd_trace_error = 0.0;
};
/// Throws Errc::RefusesLargeN if n0 > 24.
std::vector<TsvdRow> run_tsvd_compare(const ExperimentConfig& cfg, const SeparableExpansion& exp);

struct CertifyRow {
  ParamPoint theta;
  double bound = 0.0;
};
std::vector<CertifyRow> run_certify(const ExperimentConfig& cfg, const SeparableExpansion& exp,
                                    const IndexSet& index_set);

void write_index_set(const std::string& path, const IndexSet& set);
IndexSet read_index_set(const std::string& path);
void write_expansion_file(const std::string& path, const SeparableExpansion& exp, const KernelSpec& spec);
SeparableExpansion read_expansion_file(const std::string& path, KernelSpec* spec = nullptr);

}  // namespace covaca
