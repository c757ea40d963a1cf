// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment runners. Every command computes its artifacts in memory, then
// writes them to the output directory one file at a time (temp + rename),
// with manifest.json last.

#pragma once

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "assocmem/analysis.hpp"
#include "assocmem/closed_form.hpp"
#include "assocmem/config.hpp"
#include "assocmem/dynamics.hpp"
#include "assocmem/svg.hpp"

#ifndef ASSOCMEM_VERSION
#define ASSOCMEM_VERSION "v0.1.0-unknown"
#endif

namespace assocmem {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = ASSOCMEM_VERSION;
inline constexpr const char* kOutputEnv = "ASSOCMEM_OUT";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 1000000007u);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing: " + std::strerror(errno));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      const std::string why = std::strerror(errno);
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("write to '" + tmp.string() + "' failed: " + why);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

// Explicit `output`, else $ASSOCMEM_OUT/<id>, else ./assocmem-out/<id>.
inline fs::path output_dir(const ExperimentConfig& cfg) {
  if (cfg.output) return fs::path(*cfg.output);
  const char* env = std::getenv(kOutputEnv);
  const fs::path base = (env && *env) ? fs::path(env) : fs::path("assocmem-out");
  return base / cfg.id;
}

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  Json summary = Json::object();

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<fs::path> out_dir;
};

struct RunResult {
  fs::path dir;
  std::vector<fs::path> files;
  Json manifest;
};

// --- shared pieces ------------------------------------------------------------------

namespace detail {

inline std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  std::string s = buf;
  for (char& c : s)
    if (c == '-') c = 'm';
  return s;
}

inline std::string grid_csv(const LandscapeGrid& g, const Matrix& field, const std::string& name) {
  std::ostringstream os;
  write_grid_csv(os, g.axis1, g.axis2, field, "gamma1,gamma2," + name);
  return os.str();
}

inline std::vector<double> default_levels(const Matrix& field, int count = 14) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Index k = 0; k < field.size(); ++k) {
    const double v = field.data()[k];
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  std::vector<double> out;
  if (!std::isfinite(lo) || hi <= lo) return out;
  lo = std::max(lo, hi * 1e-4);
  for (int k = 1; k <= count; ++k) out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count + 1)));
  return out;
}

inline svg::Series gamma_path(const std::string& name, const TrajectoryRecord& rec, const std::string& color = "") {
  svg::Series s{name, {}, {}, color};
  for (const auto& g : rec.gamma) {
    s.x.push_back(g.gamma1);
    s.y.push_back(g.gamma2);
  }
  return s;
}

inline svg::Heatmap landscape_heatmap(const LandscapeGrid& g, const Matrix& field, const std::string& title,
                                      const std::string& label, bool log_color, std::vector<double> levels) {
  svg::Heatmap hm;
  hm.title = title;
  hm.xlabel = "gamma1";
  hm.ylabel = "gamma2";
  hm.colorbar_label = label;
  hm.xs = g.axis1;
  hm.ys = g.axis2;
  hm.field = field;
  hm.log_color = log_color;
  hm.contour_levels = std::move(levels);
  return hm;
}

inline svg::Series record_series(const std::string& name, const TrajectoryRecord& rec, const std::vector<double>& values) {
  return {name, rec.times, values, ""};
}

inline std::string margins_svg(const std::string& title, const TrajectoryRecord& rec, bool log_x) {
  svg::LinePlot plot;
  plot.title = title;
  plot.xlabel = "t";
  plot.ylabel = "gap margin";
  plot.log_x = log_x;
  plot.hlines = {0.0};
  const Index n = rec.gaps.empty() ? 0 : rec.gaps.front().size();
  for (Index x = 0; x < n; ++x) {
    std::vector<double> ys;
    for (const auto& g : rec.gaps) ys.push_back(g(x));
    plot.series.push_back(record_series("token " + std::to_string(x + 1), rec, ys));
  }
  return svg::render(plot);
}

inline Json trajectory_summary(const TrajectoryRecord& rec) {
  Json s = Json::object();
  s["records"] = rec.size();
  s["diverged"] = rec.diverged;
  if (!rec.diagnostic.empty()) s["diagnostic"] = rec.diagnostic;
  if (rec.size() > 0) {
    s["final_time"] = rec.times.back();
    s["final_loss"] = rec.loss.back();
    s["final_zero_one"] = rec.zero_one.back();
    s["final_min_gap"] = rec.gaps.back().minCoeff();
  }
  return s;
}

inline std::vector<double> log_times(double t_end, std::size_t count, double decades = 4.0) {
  std::vector<double> out{0.0};
  const double hi = std::log10(t_end);
  for (double t : logspace(hi - decades, hi, static_cast<Index>(count)))
    if (t > out.back()) out.push_back(t);
  out.back() = t_end;
  return out;
}

inline std::vector<double> or_default(const std::vector<double>& v, std::vector<double> fallback) {
  return v.empty() ? fallback : v;
}

}  // namespace detail

inline Weights initial_weights(const ExperimentConfig& cfg) {
  const Index d = cfg.embedding.dim();
  Weights W = Matrix::Zero(d, d);
  if (cfg.gaussian_init) {
    Rng rng = make_stream(cfg.seed, {0x1417});
    std::normal_distribution<double> gauss(0.0, cfg.init_scale);
    for (Index k = 0; k < W.size(); ++k) W.data()[k] = gauss(rng);
  }
  return W;
}

// --- config-driven commands ---------------------------------------------------------

inline Artifacts run_simulate(const ExperimentConfig& cfg, std::size_t /*jobs*/) {
  Artifacts a;
  const auto rec = run_dynamics(initial_weights(cfg), cfg.embedding, cfg.task, cfg.dynamics);
  a.add("trajectory.csv", trajectory_csv(rec));
  svg::LinePlot plot;
  plot.title = std::string(to_string(cfg.dynamics.kind)) + " loss";
  plot.xlabel = "t";
  plot.ylabel = "loss";
  plot.series.push_back(detail::record_series("loss", rec, rec.loss));
  plot.series.push_back(detail::record_series("0-1 loss", rec, rec.zero_one));
  a.add("loss.svg", svg::render(plot));
  a.add("margins.svg", detail::margins_svg("gap margins", rec, false));
  a.summary = detail::trajectory_summary(rec);
  a.summary["kind"] = to_string(cfg.dynamics.kind);
  return a;
}

inline Artifacts run_landscape(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  const auto grid = detail::keyed("landscape.basis", [&] { return landscape(cfg.embedding, cfg.task, cfg.landscape, jobs); });
  a.add("landscape_loss.csv", detail::grid_csv(grid, grid.loss, "loss"));
  a.add("landscape_zero_one.csv", detail::grid_csv(grid, grid.zero_one, "zero_one"));
  auto loss_map = detail::landscape_heatmap(grid, grid.loss, "loss level lines", "loss", true,
                                            cfg.contours.empty() ? detail::default_levels(grid.loss) : cfg.contours);
  auto zo_map = detail::landscape_heatmap(grid, grid.zero_one, "0-1 loss", "0-1", false, {});
  if (cfg.overlay) {
    DynamicsConfig dc = cfg.dynamics;
    dc.gamma = cfg.landscape.basis;
    const auto rec = run_dynamics(initial_weights(cfg), cfg.embedding, cfg.task, dc);
    a.add("trajectory.csv", trajectory_csv(rec));
    loss_map.overlays.push_back(detail::gamma_path(to_string(dc.kind), rec, "#00e5ff"));
    zo_map.overlays.push_back(detail::gamma_path(to_string(dc.kind), rec, "#00e5ff"));
    a.summary["trajectory"] = detail::trajectory_summary(rec);
  }
  a.add("landscape_loss.svg", svg::render(loss_map));
  a.add("landscape_zero_one.svg", svg::render(zo_map));
  if (grid.sharpness) {
    a.add("landscape_sharpness.csv", detail::grid_csv(grid, *grid.sharpness, "sharpness"));
    a.add("landscape_sharpness.svg",
          svg::render(detail::landscape_heatmap(grid, *grid.sharpness, "sharpness", "sharpness", true,
                                                detail::default_levels(*grid.sharpness))));
  }
  Index bi = 0, bj = 0;
  a.summary["min_grid_loss"] = grid.loss.minCoeff(&bi, &bj);
  a.summary["argmin_gamma"] = {grid.axis1[static_cast<std::size_t>(bi)], grid.axis2[static_cast<std::size_t>(bj)]};
  a.summary["perfect_fraction"] =
      static_cast<double>((grid.zero_one.array() == 0.0).count()) / static_cast<double>(grid.zero_one.size());
  return a;
}

inline std::string phase_svg(const PhaseDiagram& pd, const std::string& title) {
  svg::Heatmap hm;
  hm.title = title;
  hm.xlabel = "log10 eta";
  hm.ylabel = to_string(pd.spec.axis);
  hm.colorbar_label = "steps";
  for (double e : pd.spec.etas) hm.xs.push_back(std::log10(e));
  hm.ys = pd.spec.axis_values;
  hm.field.resize(static_cast<Index>(hm.xs.size()), static_cast<Index>(hm.ys.size()));
  for (std::size_t av = 0; av < pd.cells.size(); ++av)
    for (std::size_t e = 0; e < pd.cells[av].size(); ++e)
      hm.field(static_cast<Index>(e), static_cast<Index>(av)) = static_cast<double>(pd.steps(av, e));
  hm.log_color = true;
  return svg::render(hm);
}

inline Json phase_summary(const PhaseDiagram& pd) {
  Json s = Json::object();
  std::size_t reached = 0, capped = 0, diverged = 0;
  Json steps = Json::array();
  for (const auto& row : pd.cells) {
    Json r = Json::array();
    for (const auto& c : row) {
      r.push_back(c.steps);
      reached += c.status == StepsStatus::Reached;
      capped += c.status == StepsStatus::Capped;
      diverged += c.status == StepsStatus::Diverged;
    }
    steps.push_back(std::move(r));
  }
  s["axis"] = to_string(pd.spec.axis);
  s["reached"] = reached;
  s["capped"] = capped;
  s["diverged"] = diverged;
  s["steps"] = std::move(steps);
  return s;
}

inline std::string phase_csv(const PhaseDiagram& pd) {
  std::ostringstream os;
  write_phase_csv(os, pd);
  return os.str();
}

inline Artifacts run_phase(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  const auto pd = phase_diagram(cfg.phase, jobs);
  a.add("phase.csv", phase_csv(pd));
  a.add("phase.svg", phase_svg(pd, "steps to perfect accuracy"));
  a.summary = phase_summary(pd);
  return a;
}

// Closed-form oracles against simulation, picked by the shape of the problem:
// two classes with orthonormal inputs (binary), two correlated tokens, or
// orthonormal multi-class.
inline Artifacts run_closed_form(const ExperimentConfig& cfg, std::size_t /*jobs*/) {
  Artifacts a;
  const auto& emb = cfg.embedding;
  const auto& task = cfg.task;
  const auto& cf = cfg.closed_form;
  const Weights W0 = initial_weights(cfg);
  const auto times = detail::log_times(cf.t_end, cf.points);
  DynamicsConfig gf;
  gf.kind = DynamicsKind::GF;
  gf.t_end = cf.t_end;
  gf.record_times = times;
  gf.ode = cfg.dynamics.ode;

  if (emb.num_classes() == 2 && rows_orthonormal(emb.inputs)) {
    a.summary["oracle"] = "binary_orthogonal";
    const Index n = emb.num_tokens();
    const Vector m0 = gap_margins(W0, emb, task);
    const auto rec = gf_run(W0, emb, task, gf);
    std::ostringstream os;
    os << "t";
    for (Index x = 0; x < n; ++x) os << ",closed_" << x + 1;
    for (Index x = 0; x < n; ++x) os << ",gf_" << x + 1;
    os << '\n';
    double worst = 0.0;
    std::vector<std::vector<double>> closed(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < rec.size(); ++k) {
      os << format_double(rec.times[k]);
      for (Index x = 0; x < n; ++x) {
        const double c = binary_rate(emb, task, x);
        const double v = c > 0.0 ? binary_margin_closed(BinaryOrthogonalInstance::make(c, m0(x)), rec.times[k]).value : m0(x);
        closed[static_cast<std::size_t>(x)].push_back(v);
        os << ',' << format_double(v);
        worst = std::max(worst, std::abs(v - rec.gaps[k](x)));
      }
      for (Index x = 0; x < n; ++x) os << ',' << format_double(rec.gaps[k](x));
      os << '\n';
    }
    a.add("closed_form.csv", os.str());
    svg::LinePlot plot;
    plot.title = "margins: closed form (dashed) and gradient flow";
    plot.xlabel = "t";
    plot.ylabel = "margin";
    plot.log_x = true;
    for (Index x = 0; x < n; ++x) {
      std::vector<double> ys;
      for (const auto& g : rec.gaps) ys.push_back(g(x));
      plot.series.push_back({"gf " + std::to_string(x + 1), rec.times, ys, svg::kPalette[static_cast<std::size_t>(x) % 8]});
      plot.series.push_back({"closed " + std::to_string(x + 1), rec.times, closed[static_cast<std::size_t>(x)],
                             svg::kPalette[static_cast<std::size_t>(x) % 8], true});
    }
    a.add("closed_form.svg", svg::render(plot));
    a.summary["max_abs_error"] = worst;

    DynamicsConfig gd;
    gd.kind = DynamicsKind::GD;
    gd.eta = Schedule::constant(cf.eta);
    gd.t_end = static_cast<double>(cf.steps);
    const auto grec = gd_run(Matrix::Zero(emb.dim(), emb.dim()), emb, task, gd);
    std::ostringstream gs;
    gs << "t,loss,bound,bound_x2\n";
    bool holds = true, holds_x2 = true;
    std::vector<double> ts, ls, bs;
    for (std::size_t k = 0; k < grec.size(); ++k) {
      if (grec.times[k] < 1.0) continue;
      const double b = gd_loss_bound(emb, task, cf.eta, grec.times[k]);
      holds = holds && grec.loss[k] <= b;
      holds_x2 = holds_x2 && grec.loss[k] <= 2.0 * b;
      gs << format_double(grec.times[k]) << ',' << format_double(grec.loss[k]) << ',' << format_double(b) << ','
         << format_double(2.0 * b) << '\n';
      ts.push_back(grec.times[k]);
      ls.push_back(grec.loss[k]);
      bs.push_back(b);
    }
    a.add("gd_bound.csv", gs.str());
    svg::LinePlot lp;
    lp.title = "GD loss and its upper bound";
    lp.xlabel = "step";
    lp.ylabel = "loss";
    lp.log_x = lp.log_y = true;
    lp.series.push_back({"GD loss", ts, ls, ""});
    lp.series.push_back({"bound", ts, bs, "", true});
    a.add("gd_bound.svg", svg::render(lp));
    a.summary["gd_bound_holds"] = holds;
    a.summary["gd_bound_x2_holds"] = holds_x2;
    return a;
  }

  if (emb.num_tokens() == 2 && emb.num_classes() == 2) {
    a.summary["oracle"] = "two_token";
    const auto inst = two_token_instance(emb, task);
    // Instance coordinates put the more frequent token first.
    auto orient = [&](GammaCoords g) {
      if (inst.swapped) g.gamma1 = -g.gamma1;
      return g;
    };
    gf.gamma = GammaBasis::TwoToken;
    const auto rec = gf_run(W0, emb, task, gf);
    const auto ode = gamma_flow(inst, orient(gamma_coords(W0, emb, GammaBasis::TwoToken)), rec.times);
    std::ostringstream os;
    os << "t,ode_gamma1,ode_gamma2,gf_gamma1,gf_gamma2\n";
    double worst = 0.0;
    std::vector<double> o1, g1;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const GammaCoords g = orient(rec.gamma[k]);
      worst = std::max({worst, std::abs(g.gamma1 - ode[k].gamma1), std::abs(g.gamma2 - ode[k].gamma2)});
      os << format_double(rec.times[k]) << ',' << format_double(ode[k].gamma1) << ',' << format_double(ode[k].gamma2)
         << ',' << format_double(g.gamma1) << ',' << format_double(g.gamma2) << '\n';
      o1.push_back(ode[k].gamma1);
      g1.push_back(g.gamma1);
    }
    a.add("gamma_flow.csv", os.str());
    svg::LinePlot plot;
    plot.title = "gamma1 along gradient flow";
    plot.xlabel = "t";
    plot.ylabel = "gamma1";
    plot.log_x = true;
    plot.hlines = {gamma1_limit(inst)};
    plot.series.push_back({"gradient flow", rec.times, g1, ""});
    plot.series.push_back({"reduced ODE", rec.times, o1, "", true});
    a.add("gamma_flow.svg", svg::render(plot));
    a.summary["gamma1_limit"] = gamma1_limit(inst);
    a.summary["final_gamma1"] = g1.back();
    a.summary["max_abs_error"] = worst;

    DynamicsConfig gd;
    gd.kind = DynamicsKind::GD;
    gd.eta = Schedule::constant(cf.eta);
    gd.t_end = static_cast<double>(cf.steps);
    gd.gamma = GammaBasis::TwoToken;
    const auto grec = gd_run(Matrix::Zero(emb.dim(), emb.dim()), emb, task, gd);
    const auto b = gd_gamma_bounds(inst, cf.eta);
    std::ostringstream gs;
    gs << "t,gamma1,gamma2,gamma1_lower,gamma1_upper,gamma2_lower\n";
    bool holds = true;
    for (std::size_t k = 0; k < grec.size(); ++k) {
      const GammaCoords g = orient(grec.gamma[k]);
      const double t = grec.times[k];
      holds = holds && g.gamma1 >= b.gamma1_lower() && g.gamma1 <= b.gamma1_upper() &&
              std::exp(g.gamma2) >= b.exp_gamma2_lower(t);
      gs << format_double(t) << ',' << format_double(g.gamma1) << ',' << format_double(g.gamma2) << ','
         << format_double(b.gamma1_lower()) << ',' << format_double(b.gamma1_upper()) << ','
         << format_double(b.gamma2_lower(t)) << '\n';
    }
    a.add("gd_envelope.csv", gs.str());
    a.summary["gd_envelope_holds"] = holds;
    const auto spike = spike_lower_bound(inst, cf.eta);
    a.summary["spike_applicable"] = spike.applicable;
    a.summary["spike_bound"] = 0.5 * inst.c * spike.value;
    a.summary["first_step_loss"] = grec.size() > 1 ? grec.loss[1] : grec.loss.front();
    return a;
  }

  if (rows_orthonormal(emb.inputs) && rows_orthonormal(emb.outputs)) {
    a.summary["oracle"] = "multiclass_orthonormal";
    const auto dir = asymptotic_direction(emb, task);
    const auto span = update_span(emb);
    std::ostringstream os;
    os << "t,cosine,invariant_drift\n";
    // Piecewise integration so the weights are available at every output time.
    DynamicsConfig leg = gf;
    std::vector<double> cos;
    double drift = 0.0;
    const Matrix S0 = scores(W0, emb);
    Weights W = W0;
    double t_prev = 0.0;
    for (double t : times) {
      if (t > t_prev) {
        leg.t_end = t - t_prev;
        leg.record_times = {leg.t_end};
        W = gf_run(W, emb, task, leg).final_weights;
        t_prev = t;
      }
      const double cs = cosine_similarity(span.project(W), dir.direction);
      cos.push_back(cs);
      const Matrix S = scores(W, emb);
      for (Index x = 0; x < emb.num_tokens(); ++x) {
        const Index y = task.targets[static_cast<std::size_t>(x)];
        const auto i0 = multiclass_invariants(S0.row(x).transpose(), y);
        const auto it = multiclass_invariants(S.row(x).transpose(), y);
        for (std::size_t q = 0; q < i0.size(); ++q) drift = std::max(drift, std::abs(it[q] - i0[q]));
      }
      os << format_double(t) << ',' << format_double(cs) << ',' << format_double(drift) << '\n';
    }
    a.add("direction.csv", os.str());
    svg::LinePlot plot;
    plot.title = "cosine to the asymptotic direction";
    plot.xlabel = "t";
    plot.ylabel = "cosine";
    plot.log_x = true;
    plot.series.push_back({"gradient flow", times, cos, ""});
    a.add("direction.svg", svg::render(plot));
    a.summary["final_cosine"] = cos.back();
    a.summary["max_invariant_drift"] = drift;
    return a;
  }

  throw ConfigError("embedding.kind",
                    "config key 'embedding.kind': no closed form applies (need two classes with orthonormal inputs, "
                    "a two-token problem, or orthonormal embeddings)");
}

// --- figure registry ---------------------------------------------------------------

struct FigureInfo {
  std::string id;
  std::string figure;  // what is scaled down
  std::string scale;   // how
};

inline const std::vector<FigureInfo>& figure_registry() {
  static const std::vector<FigureInfo> r{
      {"fig1", "Figure 1: loss level lines and 0-1 regions for two correlated tokens (alpha = -0.5, 0.95)",
       "128x128 grid over [-10, 10]^2 (1/16 of the 512x512 default cells); gradient flow to t = 1e3"},
      {"fig2", "Figure 2: loss spikes, GD trajectories with eta = 1 and eta = 10 over 35 steps",
       "1:1 in steps; 128x128 landscape backdrop"},
      {"fig3", "Figure 3: forgetting and excess risk with N = 3 > d = 2",
       "seeded witness instance instead of the unpublished one; 128x128 grid; 2000 GD/SGD steps"},
      {"fig4", "Figure 4: steps to perfect accuracy over (eta, alpha) and (eta, log(p1/p2))",
       "9 learning rates x 9 axis values (the original grids are not published); cap 1e6 steps"},
      {"fig5", "Figure 5: sharpness level lines and sharpness along GD with eta = 1 and eta = 10",
       "64x64 sharpness grid; 100 GD steps"},
      {"fig6", "Figure 6: margins for N = M = 5, p(x) ~ 1/x, random sphere embeddings",
       "d in {3, 5, 64}, eta in {0.1, 1, 10}, 1e4 GD steps, one seeded replica"},
  };
  return r;
}

inline const FigureInfo& figure_info(const std::string& id) {
  for (const auto& f : figure_registry())
    if (f.id == id) return f;
  throw ConfigError("command", "unknown experiment '" + id + "'");
}

// Default configuration document of a registered figure.
inline Json figure_defaults(const std::string& id) {
  figure_info(id);
  Json j = Json::object();
  j["id"] = id;
  j["command"] = id;
  if (id == "fig1" || id == "fig2" || id == "fig5") {
    j["embedding"] = {{"kind", "correlated_pair"}, {"d", 2}, {"alpha", 0.95}};
    j["task"] = {{"n", 2}, {"m", 2}, {"freq", "pair"}, {"p1", 0.75}};
  }
  if (id == "fig1") {
    j["landscape"] = {{"n1", 128}, {"n2", 128}};
    j["dynamics"] = {{"kind", "GF"}, {"t_end", 1000.0}};
    j["figure"] = {{"alphas", {-0.5, 0.95}}};
  } else if (id == "fig2") {
    j["landscape"] = {{"n1", 128}, {"n2", 128}};
    j["figure"] = {{"etas", {1.0, 10.0}}, {"steps", 35}};
  } else if (id == "fig3") {
    j["seed"] = 2026;
    j["landscape"] = {{"n1", 128}, {"n2", 128}};
    j["dynamics"] = {{"batch_size", 4}};
    j["figure"] = {{"etas", {1.0}}, {"steps", 2000}};
  } else if (id == "fig4") {
    j["phase"] = {{"etas", {0.01, 0.0316227766016838, 0.1, 0.316227766016838, 1.0, 3.16227766016838, 10.0,
                            31.6227766016838, 100.0}},
                  {"values", {-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}},
                  {"fixed_p1", 0.75},
                  {"fixed_alpha", 0.9}};
    j["figure"] = {{"log_ratios", {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}}};
  } else if (id == "fig5") {
    j["seed"] = 2026;
    j["landscape"] = {{"n1", 64}, {"n2", 64}, {"sharpness", true}};
    j["figure"] = {{"etas", {1.0, 10.0}}, {"steps", 100}};
  } else if (id == "fig6") {
    j["task"] = {{"n", 5}, {"m", 5}, {"freq", "zipf"}};
    j["embedding"] = {{"kind", "sphere"}, {"d", 5}};
    j["figure"] = {{"etas", {0.1, 1.0, 10.0}}, {"dims", {3, 5, 64}}, {"steps", 10000}, {"replicas", 1}};
  }
  return j;
}

// N = M = 5, identity targets, p(x) ~ 1/x, sphere embeddings in dimension d.
// Each (seed, d, replica) gets its own embedding stream.
inline std::pair<EmbeddingSet, TaskSpec> fig6_problem(std::uint64_t seed, Index d, std::size_t replica) {
  Rng rng = make_stream(seed, {0xf166, static_cast<std::uint64_t>(d), replica});
  return {sphere_embeddings(5, 5, d, rng()), TaskSpec{identity_targets(5), zipf_freq(5)}};
}

// First recorded time at which token x's gap margin is positive, if any.
inline std::optional<double> first_positive(const TrajectoryRecord& rec, Index x) {
  for (std::size_t k = 0; k < rec.size(); ++k)
    if (rec.gaps[k](x) > 0.0) return rec.times[k];
  return std::nullopt;
}

namespace detail {

inline TrajectoryRecord gd_trace(const EmbeddingSet& emb, const TaskSpec& task, double eta, std::size_t steps,
                                 std::optional<GammaBasis> gamma, bool sharp = false,
                                 DynamicsKind kind = DynamicsKind::GD, std::size_t batch = 1, std::uint64_t seed = 0) {
  DynamicsConfig dc;
  dc.kind = kind;
  dc.eta = Schedule::constant(eta);
  dc.t_end = static_cast<double>(steps);
  dc.gamma = gamma;
  dc.track_sharpness = sharp;
  dc.batch_size = batch;
  dc.seed = seed;
  return run_dynamics(Matrix::Zero(emb.dim(), emb.dim()), emb, task, dc);
}

inline Json witness_json(const Witness& w) {
  Json j = Json::object();
  j["seed"] = w.seed;
  j["draw"] = w.draw;
  Json inputs = Json::array();
  for (Index x = 0; x < w.emb.num_tokens(); ++x) inputs.push_back({w.emb.inputs(x, 0), w.emb.inputs(x, 1)});
  j["inputs"] = inputs;
  j["targets"] = w.task.targets;
  j["freq"] = w.task.freq;
  j["excess_risk"] = w.risk.value;
  j["separable"] = w.risk.separable;
  j["min_loss"] = w.risk.min_loss;
  j["zero_one_at_minimizer"] = w.risk.zero_one_at_minimizer;
  j["min_zero_one"] = w.risk.min_zero_one;
  j["minimizer"] = {w.risk.minimizer(0), w.risk.minimizer(1)};
  return j;
}

inline Witness require_witness(std::uint64_t seed) {
  auto w = find_excess_risk_witness(seed);
  if (!w) throw std::runtime_error("no excess-risk witness found for seed " + std::to_string(seed));
  return std::move(*w);
}

inline std::string loss_traces_svg(const std::string& title, const std::vector<std::pair<std::string, TrajectoryRecord>>& runs,
                                   bool zero_one = false, bool log_y = false) {
  svg::LinePlot plot;
  plot.title = title;
  plot.xlabel = "step";
  plot.ylabel = zero_one ? "0-1 loss" : "loss";
  plot.log_y = log_y;
  if (!zero_one) plot.hlines = {std::log(2.0)};
  for (const auto& [name, rec] : runs) plot.series.push_back(record_series(name, rec, zero_one ? rec.zero_one : rec.loss));
  return svg::render(plot);
}

}  // namespace detail

inline Artifacts run_fig1(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  for (double alpha : detail::or_default(cfg.figure.alphas, {-0.5, 0.95})) {
    const auto emb = correlated_pair_embeddings(alpha, 2, cfg.embedding.output_scale);
    const auto grid = landscape(emb, cfg.task, cfg.landscape, jobs);
    DynamicsConfig dc;
    dc.kind = DynamicsKind::GF;
    dc.t_end = cfg.dynamics.t_end;
    dc.record_times = detail::log_times(dc.t_end, 80, 5.0);
    dc.gamma = cfg.landscape.basis;
    const auto rec = gf_run(Matrix::Zero(2, 2), emb, cfg.task, dc);
    const std::string stem = "fig1_alpha_" + detail::tag(alpha);
    a.add(stem + "_loss.csv", detail::grid_csv(grid, grid.loss, "loss"));
    a.add(stem + "_zero_one.csv", detail::grid_csv(grid, grid.zero_one, "zero_one"));
    a.add(stem + "_gf.csv", trajectory_csv(rec));
    auto loss_map = detail::landscape_heatmap(grid, grid.loss, "alpha = " + svg::num(alpha) + ": loss", "loss", true,
                                              detail::default_levels(grid.loss));
    auto zo_map = detail::landscape_heatmap(grid, grid.zero_one, "alpha = " + svg::num(alpha) + ": 0-1 loss", "0-1",
                                            false, {});
    loss_map.overlays.push_back(detail::gamma_path("gradient flow", rec, "#00e5ff"));
    zo_map.overlays.push_back(detail::gamma_path("gradient flow", rec, "#00e5ff"));
    a.add(stem + "_loss.svg", svg::render(loss_map));
    a.add(stem + "_zero_one.svg", svg::render(zo_map));
    Json s = Json::object();
    s["optimal_region_nonempty"] = (grid.zero_one.array() == 0.0).any();
    s["gf_final_zero_one"] = rec.zero_one.back();
    s["gf_final_gamma"] = {rec.gamma.back().gamma1, rec.gamma.back().gamma2};
    a.summary["alpha_" + detail::tag(alpha)] = s;
  }
  return a;
}

inline Artifacts run_fig2(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  const double alpha = cfg.figure.alphas.empty() ? cfg.embedding.alpha : cfg.figure.alphas.front();
  const auto emb = correlated_pair_embeddings(alpha, 2, cfg.embedding.output_scale);
  const auto grid = landscape(emb, cfg.task, cfg.landscape, jobs);
  const std::size_t steps = cfg.figure.steps ? cfg.figure.steps : 35;
  a.add("fig2_landscape_loss.csv", detail::grid_csv(grid, grid.loss, "loss"));
  auto hm = detail::landscape_heatmap(grid, grid.loss, "loss with GD trajectories", "loss", true,
                                      detail::default_levels(grid.loss));
  std::vector<std::pair<std::string, TrajectoryRecord>> runs;
  for (double eta : detail::or_default(cfg.figure.etas, {1.0, 10.0})) {
    auto rec = detail::gd_trace(emb, cfg.task, eta, steps, cfg.landscape.basis);
    a.add("fig2_eta_" + detail::tag(eta) + ".csv", trajectory_csv(rec));
    hm.overlays.push_back(detail::gamma_path("eta = " + svg::num(eta), rec));
    double early = 0.0;
    for (std::size_t k = 1; k < rec.size() && rec.times[k] <= 5.0; ++k) early = std::max(early, rec.loss[k]);
    Json s = detail::trajectory_summary(rec);
    s["max_loss_first_5_steps"] = early;
    s["spike_above_log2"] = early > std::log(2.0);
    a.summary["eta_" + detail::tag(eta)] = s;
    runs.emplace_back("eta = " + svg::num(eta), std::move(rec));
  }
  a.add("fig2_landscape.svg", svg::render(hm));
  a.add("fig2_loss.svg", detail::loss_traces_svg("training loss", runs));
  a.add("fig2_zero_one.svg", detail::loss_traces_svg("0-1 loss", runs, true));
  return a;
}

inline Artifacts run_fig3(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  const Witness w = detail::require_witness(cfg.seed);
  a.add("fig3_witness.json", detail::witness_json(w).dump(2) + "\n");
  const auto grid = landscape(w.emb, w.task, cfg.landscape, jobs);
  a.add("fig3_loss.csv", detail::grid_csv(grid, grid.loss, "loss"));
  a.add("fig3_zero_one.csv", detail::grid_csv(grid, grid.zero_one, "zero_one"));
  auto loss_map = detail::landscape_heatmap(grid, grid.loss, "loss (N = 3, d = 2)", "loss", true,
                                            detail::default_levels(grid.loss));
  auto zo_map = detail::landscape_heatmap(grid, grid.zero_one, "0-1 loss (N = 3, d = 2)", "0-1", false, {});
  const std::size_t steps = cfg.figure.steps ? cfg.figure.steps : 2000;
  std::vector<std::pair<std::string, TrajectoryRecord>> runs;
  const auto etas = detail::or_default(cfg.figure.etas, {1.0});
  for (double eta : etas) {
    auto rec = detail::gd_trace(w.emb, w.task, eta, steps, GammaBasis::Canonical);
    a.add("fig3_gd_eta_" + detail::tag(eta) + ".csv", trajectory_csv(rec));
    loss_map.overlays.push_back(detail::gamma_path("GD eta = " + svg::num(eta), rec));
    zo_map.overlays.push_back(detail::gamma_path("GD eta = " + svg::num(eta), rec));
    a.summary["gd_eta_" + detail::tag(eta)] = detail::trajectory_summary(rec);
    runs.emplace_back("GD eta = " + svg::num(eta), std::move(rec));
  }
  {
    const double eta = etas.front();
    auto rec = detail::gd_trace(w.emb, w.task, eta, steps, GammaBasis::Canonical, false, DynamicsKind::SGD,
                                cfg.dynamics.batch_size, cfg.seed);
    a.add("fig3_sgd.csv", trajectory_csv(rec));
    loss_map.overlays.push_back(detail::gamma_path("SGD", rec));
    zo_map.overlays.push_back(detail::gamma_path("SGD", rec));
    a.summary["sgd"] = detail::trajectory_summary(rec);
    runs.emplace_back("SGD", std::move(rec));
  }
  a.add("fig3_loss.svg", svg::render(loss_map));
  a.add("fig3_zero_one.svg", svg::render(zo_map));
  a.add("fig3_traces.svg", detail::loss_traces_svg("0-1 loss along training", runs, true));
  a.summary["witness"] = detail::witness_json(w);
  return a;
}

inline Artifacts run_fig4(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  PhaseSpec by_alpha = cfg.phase;
  by_alpha.axis = PhaseAxis::Alpha;
  const auto pa = phase_diagram(by_alpha, jobs);
  a.add("fig4_alpha.csv", phase_csv(pa));
  a.add("fig4_alpha.svg", phase_svg(pa, "steps to perfect accuracy, p1 / p2 = " + svg::num(cfg.phase.fixed_p1 / (1 - cfg.phase.fixed_p1))));
  a.summary["alpha"] = phase_summary(pa);
  PhaseSpec by_ratio = cfg.phase;
  by_ratio.axis = PhaseAxis::LogRatio;
  by_ratio.axis_values = detail::or_default(cfg.figure.log_ratios, {0.0, 1.0, 2.0, 3.0, 4.0});
  const auto pr = phase_diagram(by_ratio, jobs);
  a.add("fig4_log_ratio.csv", phase_csv(pr));
  a.add("fig4_log_ratio.svg", phase_svg(pr, "steps to perfect accuracy, alpha = " + svg::num(cfg.phase.fixed_alpha)));
  a.summary["log_ratio"] = phase_summary(pr);
  return a;
}

inline Artifacts run_fig5(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  GridSpec spec = cfg.landscape;
  spec.with_sharpness = true;
  const auto over_emb = correlated_pair_embeddings(cfg.embedding.alpha, 2, cfg.embedding.output_scale);
  const Witness w = detail::require_witness(cfg.seed);
  const std::size_t steps = cfg.figure.steps ? cfg.figure.steps : 100;
  const std::vector<std::pair<std::string, std::pair<const EmbeddingSet*, const TaskSpec*>>> regimes{
      {"over", {&over_emb, &cfg.task}}, {"under", {&w.emb, &w.task}}};
  for (const auto& [name, prob] : regimes) {
    const auto grid = landscape(*prob.first, *prob.second, spec, jobs);
    a.add("fig5_" + name + "_sharpness.csv", detail::grid_csv(grid, *grid.sharpness, "sharpness"));
    auto hm = detail::landscape_heatmap(grid, *grid.sharpness, name + "parameterized: sharpness", "sharpness", true,
                                        detail::default_levels(*grid.sharpness));
    std::vector<std::pair<std::string, TrajectoryRecord>> runs;
    svg::LinePlot trace;
    trace.title = name + "parameterized: sharpness along GD";
    trace.xlabel = "step";
    trace.ylabel = "sharpness";
    trace.log_y = true;
    for (double eta : detail::or_default(cfg.figure.etas, {1.0, 10.0})) {
      auto rec = detail::gd_trace(*prob.first, *prob.second, eta, steps, GammaBasis::Canonical, true);
      a.add("fig5_" + name + "_eta_" + detail::tag(eta) + ".csv", trajectory_csv(rec));
      hm.overlays.push_back(detail::gamma_path("eta = " + svg::num(eta), rec));
      trace.series.push_back(detail::record_series("eta = " + svg::num(eta), rec, rec.sharpness));
      trace.hlines.push_back(2.0 / eta);
      Json s = detail::trajectory_summary(rec);
      s["final_sharpness"] = rec.sharpness.empty() ? 0.0 : rec.sharpness.back();
      s["stability_threshold"] = 2.0 / eta;
      a.summary[name + "_eta_" + detail::tag(eta)] = s;
    }
    a.add("fig5_" + name + "_sharpness.svg", svg::render(hm));
    a.add("fig5_" + name + "_trace.svg", svg::render(trace));
  }
  return a;
}

inline Artifacts run_fig6(const ExperimentConfig& cfg, std::size_t jobs) {
  Artifacts a;
  const auto dims = detail::or_default(cfg.figure.dims, {3.0, 5.0, 64.0});
  const auto etas = detail::or_default(cfg.figure.etas, {0.1, 1.0, 10.0});
  const std::size_t steps = cfg.figure.steps ? cfg.figure.steps : 10000;
  struct Job {
    Index d;
    double eta;
    std::size_t replica;
  };
  std::vector<Job> work;
  for (double d : dims)
    for (double eta : etas)
      for (std::size_t r = 0; r < cfg.figure.replicas; ++r) work.push_back({static_cast<Index>(d), eta, r});
  std::vector<TrajectoryRecord> recs(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t k) {
    const auto [emb, task] = fig6_problem(cfg.seed, work[k].d, work[k].replica);
    recs[k] = detail::gd_trace(emb, task, work[k].eta, steps, std::nullopt);
  });
  for (std::size_t k = 0; k < work.size(); ++k) {
    const auto& rec = recs[k];
    std::string stem = "fig6_d" + std::to_string(work[k].d) + "_eta_" + detail::tag(work[k].eta);
    if (cfg.figure.replicas > 1) stem += "_r" + std::to_string(work[k].replica);
    a.add(stem + ".csv", trajectory_csv(rec));
    a.add(stem + ".svg", detail::margins_svg("d = " + std::to_string(work[k].d) + ", eta = " + svg::num(work[k].eta), rec, true));
    Json s = detail::trajectory_summary(rec);
    Json first = Json::array();
    for (Index x = 0; x < 5; ++x) {
      const auto t = first_positive(rec, x);
      first.push_back(t ? Json(*t) : Json(nullptr));
    }
    s["first_positive_time"] = first;
    s["all_margins_positive"] = rec.size() > 0 && rec.gaps.back().minCoeff() > 0.0;
    a.summary[stem] = s;
  }
  return a;
}

// --- dispatch and persistence ---------------------------------------------------------

inline Artifacts compute_artifacts(const ExperimentConfig& cfg, std::size_t jobs) {
  const std::string& c = cfg.command;
  if (c == "simulate") return run_simulate(cfg, jobs);
  if (c == "landscape") return run_landscape(cfg, jobs);
  if (c == "phase") return run_phase(cfg, jobs);
  if (c == "closed_form") return run_closed_form(cfg, jobs);
  if (c == "fig1") return run_fig1(cfg, jobs);
  if (c == "fig2") return run_fig2(cfg, jobs);
  if (c == "fig3") return run_fig3(cfg, jobs);
  if (c == "fig4") return run_fig4(cfg, jobs);
  if (c == "fig5") return run_fig5(cfg, jobs);
  if (c == "fig6") return run_fig6(cfg, jobs);
  throw ConfigError("command", "unknown command '" + c + "'");
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  Artifacts art = compute_artifacts(cfg, opt.jobs);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunResult res;
  res.dir = opt.out_dir ? *opt.out_dir : output_dir(cfg);
  std::error_code ec;
  fs::create_directories(res.dir, ec);
  if (ec) throw IoError("cannot create output directory '" + res.dir.string() + "': " + ec.message());
  Json files = Json::array();
  for (const auto& [name, content] : art.files) {
    write_file_atomic(res.dir / name, content);
    res.files.push_back(res.dir / name);
    files.push_back(name);
  }

  Json m = Json::object();
  m["version"] = kVersion;
  m["experiment"] = cfg.id;
  m["command"] = cfg.command;
  if (cfg.command.rfind("fig", 0) == 0) {
    const auto& info = figure_info(cfg.command);
    m["figure"] = info.figure;
    m["scale"] = info.scale;
  }
  m["seed"] = cfg.seed;
  m["started_at"] = utc_timestamp(started);
  m["wall_clock_seconds"] = seconds;
  m["jobs"] = opt.jobs;
  m["files"] = files;
  m["summary"] = art.summary;
  m["config"] = cfg.resolved;
  write_file_atomic(res.dir / "manifest.json", m.dump(2) + "\n");
  res.files.push_back(res.dir / "manifest.json");
  res.manifest = std::move(m);
  return res;
}

// Resolved configuration for a registered figure, optionally from a saved
// manifest or config document instead of the registry defaults.
inline ExperimentConfig figure_config(const std::string& id, std::optional<std::uint64_t> seed = {},
                                      std::optional<Json> doc = {}) {
  figure_info(id);
  return make_config(doc ? *doc : figure_defaults(id), seed, id);
}

}  // namespace assocmem
