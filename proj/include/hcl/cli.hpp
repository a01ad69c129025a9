#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hcl/battery.hpp"
#include "hcl/config.hpp"
#include "hcl/error.hpp"
#include "hcl/field_io.hpp"
#include "hcl/solve.hpp"

namespace hcl {

inline const std::vector<std::string>& cli_commands() {
  static const std::vector<std::string> c{"lemma-check",     "cone-check",       "subsol-check", "solve-closed",
                                          "solve-dirichlet", "degenerate-sweep", "exhaustion",   "estimate-report"};
  return c;
}

struct RunConfig {
  std::string command;
  std::string config_path;  // empty: battery defaults
  std::string out_dir = "hcl-out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

enum ExitCode : int { exit_ok = 0, exit_findings = 2, exit_numeric = 3, exit_config = 4 };

[[nodiscard]] inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
      return exit_config;
    case ErrorKind::lemma_violation:
      return exit_findings;
    default:
      return exit_numeric;
  }
}

/// Shortest round-trip formatting, independent of locale and stream state.
[[nodiscard]] inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// CSV document with the versioned schema header and the seed line.
class CsvWriter {
 public:
  CsvWriter(std::string command, std::uint64_t seed, std::vector<std::string> columns) : columns_(std::move(columns)) {
    os_ << "# hcl-schema v1\n# command=" << command << "\n# seed=" << seed << "\n";
    for (std::size_t c = 0; c < columns_.size(); ++c) os_ << (c ? "," : "") << columns_[c];
    os_ << "\n";
  }
  void comment(const std::string& text) { os_ << "# " << text << "\n"; }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) fail(ErrorKind::numeric, "CsvWriter: row width differs from header");
    for (std::size_t c = 0; c < cells.size(); ++c) os_ << (c ? "," : "") << cells[c];
    os_ << "\n";
  }
  [[nodiscard]] std::string str() const { return os_.str(); }
  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::config, "cannot write " + path.string());
    f << os_.str();
  }

 private:
  std::vector<std::string> columns_;
  std::ostringstream os_;
};

namespace detail {

inline const std::vector<std::string> kResultColumns{"run-id", "iterations", "residual", "c", "ratio2nd", "bdry_ratio", "sandwich_ok"};

inline std::vector<std::string> result_row(const std::string& id, const SolveResult& r) {
  return {id,
          std::to_string(r.iterations),
          fmt_num(r.residual()),
          r.c ? fmt_num(*r.c) : std::string(),
          fmt_num(r.estimates.ratio2nd),
          fmt_num(r.estimates.bdry_ratio),
          r.estimates.sandwich_ok ? "true" : "false"};
}

inline const char* boolstr(bool b) { return b ? "true" : "false"; }

struct Context {
  RunConfig run;
  LoadedConfig cfg;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::ostream* log = &std::cout;

  void say(const std::string& s) const {
    if (!run.quiet) *log << s << "\n";
  }
  [[nodiscard]] const ProblemSpec& spec() const {
    if (!cfg.spec) fail(ErrorKind::config, run.command + " needs a config with a domain");
    return *cfg.spec;
  }
  void write_meta(const std::vector<std::string>& files) const {
    json m{{"schema", "hcl-schema v1"}, {"command", run.command}, {"seed", seed}, {"run_id", cfg.run_id}, {"files", files}};
    if (cfg.spec) {
      m["family"] = cfg.spec->family.name();
      m["mode"] = to_string(cfg.spec->mode);
      m["nodes"] = cfg.spec->domain.size();
    }
    std::ofstream f(out / "run.json", std::ios::binary);
    f << m.dump(2) << "\n";
  }
};

inline int cmd_lemma(Context& cx) {
  const auto rows = lemma_battery(cx.cfg.options.count, cx.seed);
  CsvWriter w(cx.run.command, cx.seed, {"id", "n", "eps", "corner_factor", "threshold", "satisfied", "max_violation", "top_boundary_hit"});
  int bad = 0;
  for (const auto& r : rows) {
    bad += !r.verdict.satisfied;
    w.row({std::to_string(r.id), std::to_string(r.n), fmt_num(r.eps), fmt_num(r.corner_factor), fmt_num(r.verdict.threshold),
           boolstr(r.verdict.satisfied), fmt_num(r.verdict.max_violation), boolstr(r.verdict.top_boundary_hit)});
  }
  w.save(cx.out / "lemma.csv");
  cx.write_meta({"lemma.csv"});
  cx.say("lemma-check: " + std::to_string(rows.size()) + " instances, " + std::to_string(bad) + " violations");
  return bad ? exit_findings : exit_ok;
}

inline int cmd_cone(Context& cx) {
  std::vector<FuncFamily> fams;
  if (cx.cfg.spec) fams.push_back(cx.cfg.spec->family);
  else fams = {FuncFamily::guan_mixed(3, 2, {0.0, 1.0}), FuncFamily::log_det(3)};
  const int count = cx.cfg.spec ? cx.cfg.options.count : std::min(cx.cfg.options.count, 200);
  CsvWriter w(cx.run.command, cx.seed, {"id", "family", "lambda", "in_gamma", "in_gamma_G", "slope_ok", "pairing_ok", "agree"});
  int bad = 0;
  for (const auto& F : fams) {
    for (const auto& r : cone_battery(F, count, cx.seed)) {
      bad += !r.agree();
      std::string lam;
      for (std::size_t i = 0; i < r.lambda.size(); ++i) lam += (i ? " " : "") + fmt_num(r.lambda[i]);
      w.row({std::to_string(r.id), r.family, lam, boolstr(r.verdict.in_gamma), boolstr(r.verdict.in_gamma_G),
             boolstr(r.slope_ok), boolstr(r.pairing_ok), boolstr(r.agree())});
    }
  }
  w.save(cx.out / "cone.csv");
  cx.write_meta({"cone.csv"});
  cx.say("cone-check: " + std::to_string(bad) + " disagreements");
  return bad ? exit_findings : exit_ok;
}

inline int cmd_subsol(Context& cx) {
  const int per = std::min(cx.cfg.options.count, 500);
  const auto rows = dichotomy_battery(standard_contexts(cx.seed), per, cx.seed);
  CsvWriter w(cx.run.command, cx.seed, {"id", "context", "epsilon", "case"});
  int bad = 0;
  for (const auto& r : rows) {
    bad += r.neither;
    w.row({std::to_string(r.id), r.context, fmt_num(r.epsilon), r.neither ? "neither" : to_string(r.result)});
  }
  std::vector<std::string> files{"dichotomy.csv"};
  if (cx.cfg.spec && cx.cfg.spec->mode == SolveMode::dirichlet) {
    const auto sub = build_subsolution(*cx.cfg.spec, cx.cfg.options.solve.strictness);
    w.comment("subsolution t=" + fmt_num(sub.t));
    save_field((cx.out / "subsolution.bin").string(), sub.u);
    files.push_back("subsolution.bin");
  }
  w.save(cx.out / "dichotomy.csv");
  cx.write_meta(files);
  cx.say("subsol-check: " + std::to_string(rows.size()) + " samples, " + std::to_string(bad) + " with neither case");
  return bad ? exit_findings : exit_ok;
}

inline int cmd_solve(Context& cx, SolveMode mode) {
  ProblemSpec spec = cx.spec();
  if (spec.mode != mode) fail(ErrorKind::config, cx.run.command + ": config mode is " + to_string(spec.mode));
  const SolveResult r = solve(spec, cx.cfg.options.solve);
  CsvWriter w(cx.run.command, cx.seed, kResultColumns);
  w.row(result_row(cx.cfg.run_id, r));
  w.save(cx.out / "results.csv");
  save_field((cx.out / "u.bin").string(), r.u);
  cx.write_meta({"results.csv", "u.bin"});
  std::ostringstream os;
  os << cx.run.command << ": " << r.iterations << " iterations, residual " << fmt_num(r.residual());
  if (r.c) os << ", c = " << fmt_num(*r.c);
  cx.say(os.str());
  return exit_ok;
}

inline int cmd_degenerate(Context& cx) {
  const ProblemSpec& spec = cx.spec();
  if (!cx.cfg.weight) fail(ErrorKind::config, "degenerate-sweep needs \"degenerate\": true and a weight");
  const auto& o = cx.cfg.options;
  const auto rep = degenerate_sweep(spec, *cx.cfg.weight, o.ladder, o.solve);
  CsvWriter w(cx.run.command, cx.seed, kResultColumns);
  CsvWriter sw(cx.run.command, cx.seed, {"k", "eps", "rho", "cauchy"});
  for (std::size_t k = 0; k < rep.results.size(); ++k) {
    w.row(result_row(cx.cfg.run_id + "-eps" + std::to_string(k), rep.results[k]));
    sw.row({std::to_string(k), fmt_num(rep.eps[k]), fmt_num(rep.rho[k]), k ? fmt_num(rep.cauchy[k - 1]) : std::string()});
  }
  sw.comment(std::string("cauchy_monotone=") + boolstr(rep.cauchy_monotone()));
  if (rep.aborted) sw.comment("aborted: " + rep.abort_reason);
  int code = rep.aborted ? exit_numeric : exit_ok;
  if (!rep.aborted) {
    const auto st = stability_pair(spec, *cx.cfg.weight, o.stability_eps, ScalarField(spec.domain, o.boundary_shift), o.solve);
    w.row(result_row(cx.cfg.run_id + "-shifted", st.second));
    sw.comment("stability shift=" + fmt_num(st.boundary_shift) + " diff=" + fmt_num(st.solution_diff) +
               " ratio=" + fmt_num(st.ratio) + " within=" + boolstr(st.within()));
  }
  w.save(cx.out / "results.csv");
  sw.save(cx.out / "sweep.csv");
  if (!rep.results.empty()) save_field((cx.out / "u.bin").string(), rep.results.back().u);
  cx.write_meta({"results.csv", "sweep.csv", "u.bin"});
  cx.say("degenerate-sweep: " + std::to_string(rep.results.size()) + " levels" + (rep.aborted ? " (aborted)" : ""));
  if (rep.aborted) std::cerr << "degenerate-sweep: " << rep.abort_reason << "\n";
  return code;
}

inline int cmd_exhaustion(Context& cx) {
  const auto rep = domain_exhaustion(cx.spec(), cx.cfg.options.levels, cx.cfg.options.solve);
  CsvWriter w(cx.run.command, cx.seed, kResultColumns);
  CsvWriter ew(cx.run.command, cx.seed, {"k", "alpha", "interior_nodes", "diff_to_full", "diff_to_previous"});
  w.row(result_row(cx.cfg.run_id + "-full", rep.full));
  for (std::size_t k = 0; k < rep.results.size(); ++k) {
    w.row(result_row(cx.cfg.run_id + "-level" + std::to_string(k), rep.results[k]));
    ew.row({std::to_string(k), fmt_num(rep.levels[k]), std::to_string(rep.interior_counts[k]), fmt_num(rep.diff_to_full[k]),
            k ? fmt_num(rep.successive_diff[k - 1]) : std::string()});
  }
  w.save(cx.out / "results.csv");
  ew.save(cx.out / "exhaustion.csv");
  cx.write_meta({"results.csv", "exhaustion.csv"});
  cx.say("exhaustion: " + std::to_string(rep.results.size()) + " sub-domains");
  return exit_ok;
}

/// psi_a = psi0 + a (psi - psi0) with psi0 = f(lambda(chi)) nodewise.
inline int cmd_estimates(Context& cx) {
  const ProblemSpec& base = cx.spec();
  CsvWriter w(cx.run.command, cx.seed, kResultColumns);
  double worst2 = 0.0, worstb = 0.0;
  for (double a : cx.cfg.options.amplitudes) {
    ProblemSpec s = base;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
      const double p0 = eval_f_ext(s.family, eigenvalues(s.chi.at(i)));
      if (std::isfinite(p0)) s.psi[i] = p0 + a * (base.psi[i] - p0);
    }
    const SolveResult r = solve(s, cx.cfg.options.solve);
    worst2 = std::max(worst2, r.estimates.ratio2nd);
    worstb = std::max(worstb, r.estimates.bdry_ratio);
    w.row(result_row(cx.cfg.run_id + "-amp" + fmt_num(a), r));
  }
  w.comment("max ratio2nd=" + fmt_num(worst2) + " max bdry_ratio=" + fmt_num(worstb));
  w.save(cx.out / "results.csv");
  cx.write_meta({"results.csv"});
  cx.say("estimate-report: max ratio2nd " + fmt_num(worst2) + ", max bdry_ratio " + fmt_num(worstb));
  return exit_ok;
}

}  // namespace detail

/// Executes one command; never throws. Diagnostics go to stderr.
[[nodiscard]] inline int run(const RunConfig& rc, std::ostream& log = std::cout) {
  try {
    const auto& cmds = cli_commands();
    if (std::find(cmds.begin(), cmds.end(), rc.command) == cmds.end()) fail(ErrorKind::config, "unknown command " + rc.command);
    detail::Context cx;
    cx.run = rc;
    cx.log = &log;
    if (!rc.config_path.empty()) cx.cfg = load_config_file(rc.config_path);
    cx.seed = rc.seed ? *rc.seed : cx.cfg.options.seed.value_or(0);
    cx.out = rc.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(cx.out, ec);
    if (ec) fail(ErrorKind::config, "cannot create output directory " + rc.out_dir);
    const std::string& c = rc.command;
    if (c == "lemma-check") return detail::cmd_lemma(cx);
    if (c == "cone-check") return detail::cmd_cone(cx);
    if (c == "subsol-check") return detail::cmd_subsol(cx);
    if (c == "solve-closed") return detail::cmd_solve(cx, SolveMode::closed);
    if (c == "solve-dirichlet") return detail::cmd_solve(cx, SolveMode::dirichlet);
    if (c == "degenerate-sweep") return detail::cmd_degenerate(cx);
    if (c == "exhaustion") return detail::cmd_exhaustion(cx);
    return detail::cmd_estimates(cx);
  } catch (const Error& e) {
    std::cerr << "hcl " << rc.command << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "hcl " << rc.command << ": " << e.what() << "\n";
    return exit_numeric;
  }
}

}  // namespace hcl
