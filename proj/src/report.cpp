#include "budgetlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace budgetlab {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string signed_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", digits, v);
  return buf;
}

std::string ci(const Interval& i, int digits) {
  return "[" + fixed(i.lo, digits) + ", " + fixed(i.hi, digits) + "]";
}

void open_or_throw(std::ofstream& f, const fs::path& p) {
  f.open(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<TrialReport>& trials) {
  out << "trial,seed,controller,quarter_budget,total_return,total_spend,utilization,"
         "normalized_return,improvement_pct,oracle_gap_pct,relaxed_solves,maxiter_solves,status\n";
  for (const auto& t : trials) {
    if (t.failed) {
      out << t.trial_id << ',' << t.seed << ",,,,,,,,,,,failed\n";
      continue;
    }
    const ControllerOutcome* base = t.find(ControllerKind::kBaselinePacing);
    for (const auto& o : t.outcomes) {
      out << t.trial_id << ',' << t.seed << ',' << to_string(o.kind) << ',' << format_number(t.quarter_budget)
          << ',' << format_number(o.total_return) << ',' << format_number(o.total_spend) << ','
          << format_number(o.utilization) << ',' << format_number(o.total_return / t.oracle_return) << ',';
      if (base != nullptr && base->total_return > 0.0) {
        out << format_number(100.0 * (o.total_return - base->total_return) / base->total_return);
      }
      out << ',' << format_number(100.0 * (t.oracle_return - o.total_return) / t.oracle_return) << ','
          << o.relaxed_solves << ',' << o.maxiter_solves << ",ok\n";
    }
  }
}

void write_summary_csv(std::ostream& out, const ExperimentSummary& s) {
  out << "controller,n_trials,n_failed,mean_return,mean_normalized_return,mean_utilization,"
         "mean_improvement_pct,improvement_t_lo,improvement_t_hi,improvement_boot_lo,improvement_boot_hi,"
         "t_stat,p_value,mean_oracle_gap_pct,gap_t_lo,gap_t_hi,gap_boot_lo,gap_boot_hi,"
         "relaxed_solves,maxiter_solves\n";
  for (const auto& c : s.controllers) {
    const ComparisonSummary* cmp = nullptr;
    for (const auto& x : s.comparisons) {
      if (x.label == c.label) cmp = &x;
    }
    out << c.label << ',' << s.n_trials << ',' << s.n_failed << ',' << format_number(c.mean_return) << ','
        << format_number(c.mean_normalized) << ',' << format_number(c.mean_utilization) << ',';
    if (cmp != nullptr) {
      out << format_number(cmp->mean_delta_pct) << ',' << format_number(cmp->delta_t_ci.lo) << ','
          << format_number(cmp->delta_t_ci.hi) << ',' << format_number(cmp->delta_bootstrap_ci.lo) << ','
          << format_number(cmp->delta_bootstrap_ci.hi) << ',' << format_number(cmp->t_stat) << ','
          << format_number(cmp->p_value) << ',';
    } else {
      out << ",,,,,,,";
    }
    out << format_number(c.mean_gap_pct) << ',' << format_number(c.gap_t_ci.lo) << ','
        << format_number(c.gap_t_ci.hi) << ',' << format_number(c.gap_bootstrap_ci.lo) << ','
        << format_number(c.gap_bootstrap_ci.hi) << ',' << c.relaxed_solves << ',' << c.maxiter_solves << '\n';
  }
}

void write_traces_csv(std::ostream& out, const std::vector<TrialReport>& trials) {
  out << "trial,controller,week,planned_budget,realized_spend,realized_return,remaining_before,"
         "remaining_after,solver_status\n";
  for (const auto& t : trials) {
    for (const auto& o : t.outcomes) {
      for (std::size_t w = 0; w < o.trace.size(); ++w) {
        const WeekRecord& r = o.trace[w];
        out << t.trial_id << ',' << to_string(o.kind) << ',' << r.week << ',' << format_number(r.planned_budget)
            << ',' << format_number(r.realized_spend) << ',' << format_number(r.realized_return) << ','
            << format_number(o.remaining_before[w]) << ','
            << format_number(o.remaining_before[w] - r.realized_spend) << ',' << o.solver_status[w] << '\n';
      }
    }
  }
}

void write_report_md(std::ostream& out, const ExperimentConfig& config, const ExperimentSummary& s) {
  out << "# " << config.name << "\n\n";
  out << "Regime: " << to_string(config.regime.kind);
  if (config.regime.kind == RegimeKind::kRandomWalk) out << ", rw_sigma = " << format_number(config.regime.rw_sigma);
  if (config.regime.kind == RegimeKind::kSeasonal) {
    out << ", decline_rate = " << format_number(config.regime.decline_rate);
  }
  out << ", smoothness -" << fixed(100 * config.regime.smooth_lower, 0) << "% / +"
      << fixed(100 * config.regime.smooth_upper, 0) << "%\n\n";
  out << "Trials: " << s.n_trials << " used, " << s.n_failed << " failed. Seed " << config.master_seed << ".\n\n";

  out << "| Controller | Normalized return | Utilization | Improvement vs baseline (%) | 95% CI (t) | "
         "95% CI (bootstrap) | p | Oracle gap (%) | Gap 95% CI (t) |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& c : s.controllers) {
    const ComparisonSummary* cmp = nullptr;
    for (const auto& x : s.comparisons) {
      if (x.label == c.label) cmp = &x;
    }
    out << "| " << c.label << " | " << fixed(c.mean_normalized, 3) << " | " << fixed(c.mean_utilization, 3) << " | ";
    if (cmp != nullptr) {
      out << signed_fixed(cmp->mean_delta_pct, 2) << " | " << ci(cmp->delta_t_ci, 2) << " | "
          << ci(cmp->delta_bootstrap_ci, 2) << " | " << format_number(cmp->p_value) << " | ";
    } else {
      out << "- | - | - | - | ";
    }
    out << fixed(c.mean_gap_pct, 2) << " | " << ci(c.gap_t_ci, 2) << " |\n";
  }
  int relaxed = 0, maxiter = 0;
  for (const auto& c : s.controllers) {
    relaxed += c.relaxed_solves;
    maxiter += c.maxiter_solves;
  }
  out << "\nSolver: " << relaxed << " solves with relaxed lower bounds, " << maxiter
      << " solves that stopped at the iteration limit.\n";
  if (s.pairing_violations > 0) {
    out << "\nWARNING: " << s.pairing_violations << " trials failed the pairing audit.\n";
  }
  if (!s.failures.empty()) {
    out << "\nFailed trials:\n\n";
    for (const auto& f : s.failures) out << "- " << f << "\n";
  }
}

void write_trajectory_svg(std::ostream& out, const TrialReport& trial) {
  const double width = 640, height = 360, left = 70, right = 150, top = 30, bottom = 40;
  double ymax = 0.0;
  std::size_t weeks = 0;
  for (const auto& o : trial.outcomes) {
    weeks = std::max(weeks, o.trace.size());
    for (const auto& r : o.trace) ymax = std::max(ymax, r.planned_budget);
  }
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.05;
  const double pw = width - left - right, ph = height - top - bottom;
  auto x_of = [&](double w) { return left + (weeks > 1 ? (w - 1) / (weeks - 1) : 0.5) * pw; };
  auto y_of = [&](double v) { return top + ph * (1.0 - v / ymax); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">Trial " << trial.trial_id
      << ": planned weekly budget</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ymax * i / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y_of(v) + 4, 1) << "\" text-anchor=\"end\">"
        << fixed(v, 0) << "</text>\n";
  }
  for (std::size_t w = 1; w <= weeks; ++w) {
    out << "<text x=\"" << fixed(x_of(w), 1) << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">"
        << w << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 6 << "\" text-anchor=\"middle\">week</text>\n";
  for (std::size_t c = 0; c < trial.outcomes.size(); ++c) {
    const auto& o = trial.outcomes[c];
    const char* color = kPalette[c % (sizeof kPalette / sizeof kPalette[0])];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : o.trace) out << fixed(x_of(r.week), 1) << ',' << fixed(y_of(r.planned_budget), 1) << ' ';
    out << "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(c);
    out << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << width - right + 30
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << width - right + 35 << "\" y=\"" << ly << "\">" << to_string(o.kind) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_sweep_csv(std::ostream& out, const std::string& parameter, const std::vector<SweepRow>& rows) {
  out << parameter << ",controller,n_trials,mean_normalized_return,mean_utilization,mean_improvement_pct,"
         "improvement_t_lo,improvement_t_hi,improvement_boot_lo,improvement_boot_hi,p_value,"
         "mean_oracle_gap_pct,gap_t_lo,gap_t_hi\n";
  for (const auto& row : rows) {
    for (const auto& c : row.summary.controllers) {
      const ComparisonSummary* cmp = nullptr;
      for (const auto& x : row.summary.comparisons) {
        if (x.label == c.label) cmp = &x;
      }
      out << format_number(row.value) << ',' << c.label << ',' << row.summary.n_trials << ','
          << format_number(c.mean_normalized) << ',' << format_number(c.mean_utilization) << ',';
      if (cmp != nullptr) {
        out << format_number(cmp->mean_delta_pct) << ',' << format_number(cmp->delta_t_ci.lo) << ','
            << format_number(cmp->delta_t_ci.hi) << ',' << format_number(cmp->delta_bootstrap_ci.lo) << ','
            << format_number(cmp->delta_bootstrap_ci.hi) << ',' << format_number(cmp->p_value) << ',';
      } else {
        out << ",,,,,,";
      }
      out << format_number(c.mean_gap_pct) << ',' << format_number(c.gap_t_ci.lo) << ','
          << format_number(c.gap_t_ci.hi) << '\n';
    }
  }
}

void write_sweep_md(std::ostream& out, const ExperimentConfig& config, const std::string& parameter,
                    const std::vector<SweepRow>& rows) {
  out << "# " << config.name << ": sweep over " << parameter << "\n\n";
  out << "| " << parameter << " | Controller | Normalized return | Improvement vs baseline (%) | 95% CI (t) | "
         "95% CI (bootstrap) | Oracle gap (%) |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    for (const auto& cmp : row.summary.comparisons) {
      double norm = 0.0;
      for (const auto& c : row.summary.controllers) {
        if (c.label == cmp.label) norm = c.mean_normalized;
      }
      out << "| " << format_number(row.value) << " | " << cmp.label << " | " << fixed(norm, 3) << " | "
          << signed_fixed(cmp.mean_delta_pct, 2) << " | " << ci(cmp.delta_t_ci, 2) << " | "
          << ci(cmp.delta_bootstrap_ci, 2) << " | " << fixed(cmp.mean_gap_pct, 2) << " |\n";
    }
  }
}

void write_experiment_outputs(const std::string& dir, const ExperimentConfig& config,
                              const std::vector<TrialReport>& trials, const ExperimentSummary& summary,
                              const OutputOptions& options) {
  const fs::path root(dir);
  fs::create_directories(root);
  std::ofstream f;
  open_or_throw(f, root / "trials.csv");
  write_trials_csv(f, trials);
  f.close();
  open_or_throw(f, root / "summary.csv");
  write_summary_csv(f, summary);
  f.close();
  open_or_throw(f, root / "report.md");
  write_report_md(f, config, summary);
  f.close();
  open_or_throw(f, root / "effective_config.json");
  f << to_json(config).dump(2) << '\n';
  f.close();

  if (options.plots) {
    fs::create_directories(root / "plots");
    const int n = std::min<int>(options.plot_trials, static_cast<int>(trials.size()));
    for (int i = 0; i < n; ++i) {
      if (trials[i].failed) continue;
      open_or_throw(f, root / "plots" / ("trial_" + std::to_string(trials[i].trial_id) + ".svg"));
      write_trajectory_svg(f, trials[i]);
      f.close();
    }
  }
  if (options.debug_dumps) {
    const fs::path dbg = root / "debug";
    fs::create_directories(dbg);
    open_or_throw(f, dbg / "traces.csv");
    write_traces_csv(f, trials);
    f.close();
    for (const auto& t : trials) {
      for (const auto& o : t.outcomes) {
        for (std::size_t w = 0; w < o.solver_dumps.size(); ++w) {
          open_or_throw(f, dbg / ("trial_" + std::to_string(t.trial_id) + "_" + std::string(to_string(o.kind)) +
                                  "_week_" + std::to_string(w + 1) + ".json"));
          f << o.solver_dumps[w] << '\n';
          f.close();
        }
      }
    }
  }
}

}  // namespace budgetlab
