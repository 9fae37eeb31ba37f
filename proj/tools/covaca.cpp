// covaca: batch experiments for parameter-dependent covariance approximation.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "covaca/experiments.hpp"
#include "covaca/parallel.hpp"

namespace {

using namespace covaca;
namespace fs = std::filesystem;

struct Assertions {
  std::vector<std::string> failed;

  void check(bool ok, const std::string& criterion) {
    if (!ok) failed.push_back(criterion);
  }
  int exit_code() const {
    for (const auto& f : failed) std::cerr << "assertion failed: " << f << '\n';
    return failed.empty() ? 0 : 2;
  }
};

struct CommonArgs {
  std::string config_path;
  std::string expansion_path;
  std::string index_path;
  bool full = false;
  std::map<std::string, std::string> flags;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key = value configuration file");
  cmd->add_flag("--full", args.full, "allow grids above n0 = 128 (n0 defaults to 512)");
  for (const std::string& key : config_keys()) {
    if (key == "full") continue;
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    cmd->add_option_function<std::string>(
        names, [&args, key](const std::string& v) { args.flags[key] = v; }, "overrides `" + key + "`");
  }
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  std::map<std::string, std::string> settings;
  if (!args.config_path.empty()) {
    std::ifstream is(args.config_path);
    if (!is) throw Error(Errc::InvalidArgument, "cannot read " + args.config_path);
    settings = parse_config(is);
  }
  if (std::getenv("COVACA_THREADS")) settings["threads"] = std::to_string(threads_from_env());
  for (const auto& [k, v] : args.flags) settings[k] = v;
  if (args.full) settings["full"] = "true";
  const bool full = settings.count("full") && (settings["full"] == "true" || settings["full"] == "1" ||
                                               settings["full"] == "yes");
  if (full && !settings.count("n0")) settings["n0"] = "512";
  return config_from_settings(settings);
}

void require_desk_scale(const ExperimentConfig& cfg) {
  if (cfg.n0 > 128 && !cfg.full)
    throw Error(Errc::RefusesLargeN, "n0 = " + std::to_string(cfg.n0) + " needs --full");
}

std::string artifact(const ExperimentConfig& cfg, const std::string& given, const char* name) {
  return given.empty() ? (fs::path(cfg.output_dir) / name).string() : given;
}

SeparableExpansion load_expansion(const ExperimentConfig& cfg, const std::string& given) {
  const std::string path = artifact(cfg, given, files::expansion);
  if (!fs::exists(path)) {
    if (!given.empty()) throw Error(Errc::InvalidArgument, "cannot read " + path);
    std::cerr << "note: " << path << " not found, linearizing in memory\n";
    return linearize(cfg);
  }
  KernelSpec spec;
  SeparableExpansion exp = read_expansion_file(path, &spec);
  if (spec.describe() != cfg.kernel.describe())
    throw Error(Errc::DomainMismatch,
                path + " was built for kernel '" + spec.describe() + "', config has '" + cfg.kernel.describe() + "'");
  for (std::size_t a = 0; a < cfg.theta_box.dim(); ++a)
    if (cfg.theta_box.lower[a] < exp.param_box.lower[a] || cfg.theta_box.upper[a] > exp.param_box.upper[a])
      throw Error(Errc::DomainMismatch, "parameter box exceeds the box of " + path);
  return exp;
}

IndexSet load_index_set(const ExperimentConfig& cfg, const std::string& given, const SeparableExpansion& exp) {
  const std::string path = artifact(cfg, given, files::index_set);
  if (fs::exists(path)) return read_index_set(path);
  if (!given.empty()) throw Error(Errc::InvalidArgument, "cannot read " + path);
  std::cerr << "note: " << path << " not found, running param_aca in memory\n";
  ParamAcaOptions opt;
  opt.threads = cfg.threads;
  return param_aca(build_family(cfg, exp), theta_set(cfg), cfg.tol, cfg.k_max, opt).index_set;
}

int cmd_linearize(const ExperimentConfig& cfg) {
  const LinearizeOutput out = run_linearize(cfg);
  Assertions a;
  a.check(!out.error_by_s.empty(), "expansion has at least one term");
  for (const auto& [s, e] : out.error_by_s) a.check(std::isfinite(e), "probe error finite at s = " + std::to_string(s));
  std::printf("terms %lld\n", static_cast<long long>(out.expansion.s()));
  if (!out.error_by_s.empty()) std::printf("max_error %.3e\n", out.error_by_s.back().second);
  return a.exit_code();
}

int cmd_param_aca(const ExperimentConfig& cfg, const CommonArgs& args) {
  require_desk_scale(cfg);
  const ParamAcaOutput out = run_param_aca(cfg, load_expansion(cfg, args.expansion_path));
  const ParamAcaResult& r = out.result;
  std::printf("rank %lld\ntermination %s\nres_max %.6e\nseconds %.3f\n", static_cast<long long>(r.index_set.size()),
              std::string(to_string(r.trace.termination)).c_str(), r.final_res_max, out.seconds);
  Assertions a;
  a.check(r.trace.termination == AcaTermination::ToleranceReached,
          "param_aca reaches tol (status " + std::string(to_string(r.trace.termination)) + ")");
  return a.exit_code();
}

int cmd_sample_bench(const ExperimentConfig& cfg, const CommonArgs& args) {
  require_desk_scale(cfg);
  const SeparableExpansion exp = load_expansion(cfg, args.expansion_path);
  const std::string index_path = artifact(cfg, args.index_path, files::index_set);
  IndexSet set;
  if (fs::exists(index_path)) set = read_index_set(index_path);
  else if (!args.index_path.empty()) throw Error(Errc::InvalidArgument, "cannot read " + index_path);
  const SampleBenchOutput out = run_sample_bench(cfg, exp, set);
  std::printf("rank %lld\noffline_seconds %.4f\nslope_plain %.4e\nslope_param %.4e\nslope_ratio %.3f\n"
              "crossover_u %.1f\ncov_error_plain %.4f\ncov_error_param %.4f\n",
              static_cast<long long>(out.rank_param), out.offline_seconds, out.slope_plain, out.slope_param,
              out.slope_plain / out.slope_param, out.crossover_u, out.cov_error_plain, out.cov_error_param);
  Assertions a;
  for (std::size_t u = 1; u < out.time_plain.size(); ++u) {
    a.check(out.time_plain[u] >= out.time_plain[u - 1], "time_plain_aca nondecreasing");
    a.check(out.time_param[u] >= out.time_param[u - 1], "time_param_aca nondecreasing");
  }
  a.check(out.cov_error_plain <= 0.05, "plain ACA empirical covariance within 5%");
  a.check(out.cov_error_param <= 0.05, "parameter-dependent empirical covariance within 5%");
  a.check(out.intercept_param > 0.0, "parameter-dependent path has a positive offline intercept");
  return a.exit_code();
}

int cmd_eig_decay(const ExperimentConfig& cfg) {
  const EigDecayOutput out = run_eig_decay(cfg);
  Assertions a;
  const double sigma2 = cfg.kernel.sigma2;
  for (std::size_t t = 0; t < out.traces.size(); ++t)
    a.check(std::abs(out.traces[t] - sigma2) <= 1e-8 * sigma2, "eigenvalue sum equals sigma2");
  if (cfg.theta_box.dim() == 1 && out.eigenvalues.size() >= 2) {
    const Vector& first = out.eigenvalues.front();
    const Vector& last = out.eigenvalues.back();
    const Index i = std::min(first.size(), last.size()) - 1;
    a.check(first(i) > last(i), "smallest correlation length decays slowest");
    std::printf("lambda_%lld: %.4e (theta %.4g) vs %.4e (theta %.4g)\n", static_cast<long long>(i + 1), first(i),
                out.thetas.front(), last(i), out.thetas.back());
  }
  return a.exit_code();
}

int cmd_tsvd_compare(const ExperimentConfig& cfg, const CommonArgs& args) {
  const std::vector<TsvdRow> rows = run_tsvd_compare(cfg, load_expansion(cfg, args.expansion_path));
  Assertions a;
  bool agree = true;
  for (const TsvdRow& r : rows) {
    a.check(r.tsvd_trace_error <= r.aca_trace_error * (1.0 + 1e-8) + 1e-14,
            "tsvd below aca at k = " + std::to_string(r.k));
    if (r.aca_trace_error > 1e-7 && r.nuclear_error > 1e-7 && agree) {
      const bool ok = std::abs(r.aca_trace_error - r.nuclear_error) <= 0.05 * r.nuclear_error;
      a.check(ok, "aca and nuclear curves within 5% at k = " + std::to_string(r.k));
      agree = ok;
    }
  }
  std::printf("rows %zu\nfinal aca %.3e nuclear %.3e tsvd %.3e\n", rows.size(), rows.back().aca_trace_error,
              rows.back().nuclear_error, rows.back().tsvd_trace_error);
  return a.exit_code();
}

int cmd_certify(const ExperimentConfig& cfg, const CommonArgs& args) {
  require_desk_scale(cfg);
  const SeparableExpansion exp = load_expansion(cfg, args.expansion_path);
  const IndexSet set = load_index_set(cfg, args.index_path, exp);
  const std::vector<CertifyRow> rows = run_certify(cfg, exp, set);
  Assertions a;
  double worst = 0.0;
  for (const CertifyRow& r : rows) {
    worst = std::max(worst, r.bound);
    a.check(r.bound * r.bound <= cfg.tol * (1.0 + 1e-3), "certified trace residual below tol");
  }
  std::printf("rank %lld\nmax_bound %.6e\nsqrt_tol %.6e\n", static_cast<long long>(set.size()), worst,
              std::sqrt(cfg.tol));
  return a.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter-dependent covariance approximation experiments"};
  app.require_subcommand(1);
  CommonArgs args;

  auto* lin = app.add_subcommand("linearize", "separable expansion of the kernel");
  auto* aca = app.add_subcommand("param-aca", "index set selection over the parameter set");
  auto* bench = app.add_subcommand("sample-bench", "sampling cost, plain vs parameter-dependent ACA");
  auto* eig = app.add_subcommand("eig-decay", "top eigenvalues of C(theta)");
  auto* tsvd = app.add_subcommand("tsvd-compare", "trace, nuclear and truncated-SVD error curves");
  auto* cert = app.add_subcommand("certify", "online residual certificate over a parameter grid");
  for (auto* cmd : {lin, aca, bench, eig, tsvd, cert}) add_common_options(cmd, args);
  for (auto* cmd : {aca, bench, tsvd, cert})
    cmd->add_option("--expansion", args.expansion_path, "expansion file (default <output_dir>/expansion.txt)");
  for (auto* cmd : {bench, cert})
    cmd->add_option("--index", args.index_path, "index set file (default <output_dir>/index_set.txt)");

  CLI11_PARSE(app, argc, argv);
  try {
    const ExperimentConfig cfg = resolve_config(args);
    if (lin->parsed()) return cmd_linearize(cfg);
    if (aca->parsed()) return cmd_param_aca(cfg, args);
    if (bench->parsed()) return cmd_sample_bench(cfg, args);
    if (eig->parsed()) return cmd_eig_decay(cfg);
    if (tsvd->parsed()) return cmd_tsvd_compare(cfg, args);
    if (cert->parsed()) return cmd_certify(cfg, args);
  } catch (const std::exception& e) {
    std::cerr << "covaca: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
