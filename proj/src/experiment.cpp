#include "nashmg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nashmg/batch.hpp"
#include "nashmg/exact.hpp"
#include "nashmg/residual.hpp"

namespace nashmg {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

// Population standard deviation; 0 for a single value.
double std_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace

int ExperimentConfig::train_samples() const {
  return std::max(1, static_cast<int>(std::lround(alpha * garnet.n_states * garnet.n_actions)));
}

void ExperimentConfig::validate() const {
  garnet.validate();
  train.validate();
  if (n_garnets < 1 || n_resamples < 1) throw std::invalid_argument("ExperimentConfig: need at least one run");
  if (!(alpha > 0.0)) throw std::invalid_argument("ExperimentConfig: alpha must be positive");
  if (jobs < 0) throw std::invalid_argument("ExperimentConfig: jobs must be >= 0");
  if (out_dir.empty()) throw std::invalid_argument("ExperimentConfig: out_dir must be set");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["garnet"] = {{"n_players", garnet.n_players},   {"n_states", garnet.n_states},
                 {"n_actions", garnet.n_actions},   {"sigma_next", garnet.sigma_next},
                 {"sigma_noise", garnet.sigma_noise}, {"sparsity", garnet.sparsity},
                 {"gamma", garnet.gamma}};
  j["train"] = {{"lr_q", train.lr_q},
                {"lr_pi", train.lr_pi},
                {"lr_q_decay", train.lr_q_decay},
                {"lr_pi_decay", train.lr_pi_decay},
                {"weight_decay", train.weight_decay},
                {"minibatch", train.minibatch},
                {"epochs", train.epochs},
                {"p", train.p},
                {"rho", train.rho},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"adam_eps", train.adam_eps},
                {"eval_every", train.eval_every},
                {"kind", nashmg::to_string(train.kind)},
                {"encoding", nashmg::to_string(train.encoding)},
                {"hidden", train.hidden},
                {"divergence_factor", train.divergence_factor}};
  j["n_garnets"] = n_garnets;
  j["n_resamples"] = n_resamples;
  j["alpha"] = alpha;
  j["out_dir"] = out_dir;
  j["jobs"] = jobs;
  j["seed"] = seed;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("garnet")) {
    const json& g = j["garnet"];
    cfg.garnet.n_players = g.value("n_players", cfg.garnet.n_players);
    cfg.garnet.n_states = g.value("n_states", cfg.garnet.n_states);
    cfg.garnet.n_actions = g.value("n_actions", cfg.garnet.n_actions);
    cfg.garnet.sigma_next = g.value("sigma_next", cfg.garnet.sigma_next);
    cfg.garnet.sigma_noise = g.value("sigma_noise", cfg.garnet.sigma_noise);
    cfg.garnet.sparsity = g.value("sparsity", cfg.garnet.sparsity);
    cfg.garnet.gamma = g.value("gamma", cfg.garnet.gamma);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    cfg.train.lr_q = t.value("lr_q", cfg.train.lr_q);
    cfg.train.lr_pi = t.value("lr_pi", cfg.train.lr_pi);
    cfg.train.lr_q_decay = t.value("lr_q_decay", cfg.train.lr_q_decay);
    cfg.train.lr_pi_decay = t.value("lr_pi_decay", cfg.train.lr_pi_decay);
    cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
    cfg.train.minibatch = t.value("minibatch", cfg.train.minibatch);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.p = t.value("p", cfg.train.p);
    cfg.train.rho = t.value("rho", cfg.train.rho);
    cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
    cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
    cfg.train.adam_eps = t.value("adam_eps", cfg.train.adam_eps);
    cfg.train.eval_every = t.value("eval_every", cfg.train.eval_every);
    if (t.contains("kind")) cfg.train.kind = model_kind_from_string(t["kind"].get<std::string>());
    if (t.contains("encoding")) cfg.train.encoding = encoding_from_string(t["encoding"].get<std::string>());
    cfg.train.hidden = t.value("hidden", cfg.train.hidden);
    cfg.train.divergence_factor = t.value("divergence_factor", cfg.train.divergence_factor);
  }
  cfg.n_garnets = j.value("n_garnets", cfg.n_garnets);
  cfg.n_resamples = j.value("n_resamples", cfg.n_resamples);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.jobs = j.value("jobs", cfg.jobs);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
  return Rng::splitmix(Rng::splitmix(base ^ Rng::splitmix(tag)) + index);
}

// ---------------------------------------------------------------------------
// SVG plotting

namespace {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct Panel {
  std::string title, x_label, y_label;
  bool log_y = false;
  std::vector<Series> series;
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

double transform_y(double y, bool log_y) {
  if (!log_y) return y;
  return std::log10(std::max(y, 1e-12));
}

void render_panel(std::ostream& os, const Panel& panel, int panel_index, int width, int height) {
  const int left = 70, right = 20, top = 30, bottom = 42;
  const double x0 = left, y0_offset = panel_index * height;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : panel.series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      const double ty = transform_y(s.y[k], panel.log_y);
      xmin = std::min(xmin, s.x[k]);
      xmax = std::max(xmax, s.x[k]);
      ymin = std::min(ymin, ty);
      ymax = std::max(ymax, ty);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto sx = [&](double x) { return x0 + plot_w * (x - xmin) / (xmax - xmin); };
  auto sy = [&](double ty) { return y0_offset + top + plot_h * (1.0 - (ty - ymin) / (ymax - ymin)); };

  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << x0 << "\" y=\"" << y0_offset + 18 << "\" font-size=\"13\">" << panel.title << "</text>\n";
  // frame
  os << "<rect x=\"" << x0 << "\" y=\"" << y0_offset + top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
     << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fx = xmin + (xmax - xmin) * t / ticks;
    const double px = sx(fx);
    os << "<line x1=\"" << px << "\" y1=\"" << y0_offset + top + plot_h << "\" x2=\"" << px << "\" y2=\""
       << y0_offset + top + plot_h + 4 << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << px << "\" y=\"" << y0_offset + top + plot_h + 16 << "\" text-anchor=\"middle\">"
       << fmt_short(fx) << "</text>\n";

    const double ty = ymin + (ymax - ymin) * t / ticks;
    const double py = sy(ty);
    const double label = panel.log_y ? std::pow(10.0, ty) : ty;
    os << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\"" << py
       << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << x0 - 7 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
       << (panel.log_y ? fmt_short(label) : fmt_short(label)) << "</text>\n";
  }
  os << "<text x=\"" << x0 + plot_w / 2 << "\" y=\"" << y0_offset + height - 8 << "\" text-anchor=\"middle\">"
     << panel.x_label << "</text>\n";
  os << "<text x=\"14\" y=\"" << y0_offset + top + plot_h / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << y0_offset + top + plot_h / 2 << ")\">"
     << panel.y_label << "</text>\n";

  for (std::size_t si = 0; si < panel.series.size(); ++si) {
    const Series& s = panel.series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::ostringstream points;
    bool open = false;
    auto flush = [&] {
      if (open) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.4\" points=\"" << points.str()
           << "\"/>\n";
        points.str("");
        open = false;
      }
    };
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) {
        flush();
        continue;
      }
      points << sx(s.x[k]) << "," << sy(transform_y(s.y[k], panel.log_y)) << " ";
      open = true;
    }
    flush();
    // legend
    const double lx = x0 + plot_w - 150;
    const double ly = y0_offset + top + 14 + 14 * static_cast<double>(si);
    os << "<rect x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << lx + 14 << "\" y=\"" << ly << "\">" << s.label << "</text>\n";
  }
  os << "</g>\n";
}

void write_svg(const std::string& path, const std::vector<Panel>& panels, int width = 900, int panel_height = 260) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const int height = panel_height * static_cast<int>(panels.size());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    render_panel(os, panels[k], static_cast<int>(k), width, panel_height);
  }
  os << "</svg>\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

struct FinalStats {
  std::vector<double> err_mean, err_std, train_res, test_res;
};

FinalStats collect_final(const std::vector<RunOutcome>& runs) {
  FinalStats stats;
  for (const RunOutcome& run : runs) {
    if (run.failed || run.report.checkpoints.empty()) continue;
    const Checkpoint& last = run.report.checkpoints.back();
    stats.err_mean.push_back(mean_of(last.error_vs_br));
    stats.err_std.push_back(std_of(last.error_vs_br));
    stats.train_res.push_back(last.train_residual);
    stats.test_res.push_back(last.test_residual);
  }
  return stats;
}

void write_metrics_csv(const std::string& path, const std::vector<RunOutcome>& runs, int n_players) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "garnet,resample,epoch,step,train_residual,test_residual,err_mean,err_std";
  for (int i = 0; i < n_players; ++i) os << ",err_p" << i;
  os << "\n";
  for (const RunOutcome& run : runs) {
    if (run.failed) continue;
    for (const Checkpoint& cp : run.report.checkpoints) {
      os << run.garnet_id << "," << run.resample_id << "," << cp.epoch << "," << cp.step << ","
         << fmt(cp.train_residual) << "," << fmt(cp.test_residual) << "," << fmt(mean_of(cp.error_vs_br)) << ","
         << fmt(std_of(cp.error_vs_br));
      for (double e : cp.error_vs_br) os << "," << fmt(e);
      os << "\n";
    }
  }
}

void write_curves_svg(const std::string& path, const std::vector<RunOutcome>& runs, int n_players) {
  std::vector<Panel> panels;

  const RunOutcome* first_ok = nullptr;
  for (const RunOutcome& run : runs) {
    if (!run.failed && !run.report.checkpoints.empty()) {
      first_ok = &run;
      break;
    }
  }

  if (first_ok) {
    Panel top;
    top.title = "Error vs best response (garnet " + std::to_string(first_ok->garnet_id) + ", resample " +
                std::to_string(first_ok->resample_id) + ")";
    top.x_label = "epoch";
    top.y_label = "error vs BR";
    for (int i = 0; i < n_players; ++i) {
      Series s;
      s.label = "player " + std::to_string(i);
      for (const Checkpoint& cp : first_ok->report.checkpoints) {
        s.x.push_back(cp.epoch);
        s.y.push_back(cp.error_vs_br[static_cast<std::size_t>(i)]);
      }
      top.series.push_back(std::move(s));
    }
    panels.push_back(std::move(top));

    Panel mid;
    mid.title = "Empirical Bellman residual (garnet " + std::to_string(first_ok->garnet_id) + ", resample " +
                std::to_string(first_ok->resample_id) + ")";
    mid.x_label = "epoch";
    mid.y_label = "residual (log)";
    mid.log_y = true;
    Series train_s{"train", {}, {}}, test_s{"test", {}, {}};
    for (const Checkpoint& cp : first_ok->report.checkpoints) {
      train_s.x.push_back(cp.epoch);
      train_s.y.push_back(cp.train_residual);
      test_s.x.push_back(cp.epoch);
      test_s.y.push_back(cp.test_residual);
    }
    mid.series.push_back(std::move(train_s));
    mid.series.push_back(std::move(test_s));
    panels.push_back(std::move(mid));

    Panel bottom;
    bottom.title = "Mean error vs best response (all garnets and resamples)";
    bottom.x_label = "epoch";
    bottom.y_label = "mean error";
    Series avg{"mean over players and runs", {}, {}};
    const std::size_t n_cp = first_ok->report.checkpoints.size();
    for (std::size_t k = 0; k < n_cp; ++k) {
      std::vector<double> values;
      for (const RunOutcome& run : runs) {
        if (run.failed || run.report.checkpoints.size() != n_cp) continue;
        values.push_back(mean_of(run.report.checkpoints[k].error_vs_br));
      }
      avg.x.push_back(first_ok->report.checkpoints[k].epoch);
      avg.y.push_back(mean_of(values));
    }
    bottom.series.push_back(std::move(avg));
    panels.push_back(std::move(bottom));
  }

  write_svg(path, panels);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);

  const int n_runs = cfg.n_garnets * cfg.n_resamples;
  ExperimentResult result;
  result.runs.resize(static_cast<std::size_t>(n_runs));

  std::atomic<int> cursor{0};
  auto worker = [&] {
    while (true) {
      const int idx = cursor.fetch_add(1);
      if (idx >= n_runs) break;
      RunOutcome& out = result.runs[static_cast<std::size_t>(idx)];
      out.garnet_id = idx / cfg.n_resamples;
      out.resample_id = idx % cfg.n_resamples;
      try {
        GarnetSpec spec = cfg.garnet;
        spec.seed = derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(out.garnet_id));
        const TurnBasedGarnet game = generate_garnet(spec);
        const std::uint64_t run_tag = static_cast<std::uint64_t>(out.garnet_id) * 1000 +
                                      static_cast<std::uint64_t>(out.resample_id);
        const Dataset train_data = sample_batch(game, cfg.train_samples(), derive_seed(cfg.seed, 2, run_tag), "train");
        const Dataset test_data = sample_batch(game, cfg.test_samples(), derive_seed(cfg.seed, 3, run_tag), "test");
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, 4, run_tag);
        out.report = train(game, train_data, test_data, tc).report;
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
    }
  };

  int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, n_runs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const RunOutcome& run : result.runs) {
    if (run.failed) ++result.n_failed;
  }

  const FinalStats stats = collect_final(result.runs);
  result.final_error_mean = mean_of(stats.err_mean);
  result.final_error_std_players = mean_of(stats.err_std);
  result.final_train_residual = mean_of(stats.train_res);
  result.final_test_residual = mean_of(stats.test_res);

  result.metrics_path = cfg.out_dir + "/metrics.csv";
  result.summary_path = cfg.out_dir + "/summary.csv";
  result.curves_path = cfg.out_dir + "/curves.svg";
  write_metrics_csv(result.metrics_path, result.runs, cfg.garnet.n_players);
  {
    std::ofstream os(result.summary_path);
    if (!os) throw std::runtime_error("cannot open for writing: " + result.summary_path);
    os << "n_players,n_states,n_actions,gamma,alpha,epochs,n_garnets,n_resamples,n_ok,n_failed,"
          "final_err_mean,final_err_std_players,final_train_residual,final_test_residual\n";
    os << cfg.garnet.n_players << "," << cfg.garnet.n_states << "," << cfg.garnet.n_actions << ","
       << fmt(cfg.garnet.gamma) << "," << fmt(cfg.alpha) << "," << cfg.train.epochs << "," << cfg.n_garnets << ","
       << cfg.n_resamples << "," << (n_runs - result.n_failed) << "," << result.n_failed << ","
       << fmt(result.final_error_mean) << "," << fmt(result.final_error_std_players) << ","
       << fmt(result.final_train_residual) << "," << fmt(result.final_test_residual) << "\n";
  }
  write_curves_svg(result.curves_path, result.runs, cfg.garnet.n_players);
  return result;
}

SweepResult sweep_samples(const ExperimentConfig& base, const std::vector<double>& alphas) {
  if (alphas.empty()) throw std::invalid_argument("sweep_samples: need at least one alpha");
  for (double a : alphas) {
    if (!(a > 0.0)) throw std::invalid_argument("sweep_samples: alphas must be positive");
  }
  std::filesystem::create_directories(base.out_dir);

  SweepResult sweep;
  for (double a : alphas) {
    ExperimentConfig cfg = base;
    cfg.alpha = a;
    cfg.out_dir = base.out_dir + "/alpha_" + fmt_short(a);
    SweepPoint point;
    point.alpha = a;
    point.n_samples = cfg.train_samples();
    point.result = run_experiment(cfg);
    sweep.points.push_back(std::move(point));
  }

  sweep.csv_path = base.out_dir + "/sweep.csv";
  {
    std::ofstream os(sweep.csv_path);
    if (!os) throw std::runtime_error("cannot open for writing: " + sweep.csv_path);
    os << "alpha,n_samples,n_failed,final_err_mean,final_err_std_players\n";
    for (const SweepPoint& point : sweep.points) {
      os << fmt(point.alpha) << "," << point.n_samples << "," << point.result.n_failed << ","
         << fmt(point.result.final_error_mean) << "," << fmt(point.result.final_error_std_players) << "\n";
    }
  }

  sweep.svg_path = base.out_dir + "/sweep.svg";
  Panel panel;
  panel.title = "Final mean error vs best response against sample multiplier";
  panel.x_label = "alpha (train samples = alpha * n_states * n_actions)";
  panel.y_label = "final mean error";
  Series s{"final mean error", {}, {}};
  for (const SweepPoint& point : sweep.points) {
    s.x.push_back(point.alpha);
    s.y.push_back(point.result.final_error_mean);
  }
  panel.series.push_back(std::move(s));
  write_svg(sweep.svg_path, {panel});
  return sweep;
}

// ---------------------------------------------------------------------------
// Verification battery

bool VerifyReport::all_passed() const {
  for (const VerifyCheck& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

namespace {

std::vector<Eigen::VectorXd> random_value_family(const TurnBasedGarnet& game, double scale, Rng& rng) {
  std::vector<Eigen::VectorXd> v;
  for (int i = 0; i < game.n_players(); ++i) {
    Eigen::VectorXd vi(game.n_states());
    for (int s = 0; s < game.n_states(); ++s) vi[s] = rng.uniform(-scale, scale);
    v.push_back(std::move(vi));
  }
  return v;
}

VerifyCheck check_lemma1_random(std::uint64_t seed) {
  VerifyCheck check{"lemma1_random_instances", true, ""};
  Rng rng(seed);
  int held = 0;
  const int total = 100;
  for (int it = 0; it < total; ++it) {
    const double gamma = rng.uniform(0.3, 0.95);
    const TurnBasedGarnet game = random_game(2, 5, 2, gamma, rng);
    const JointStrategy js = random_strategy(game, rng);
    const auto v = random_value_family(game, 5.0, rng);
    const MeasureSet measures = MeasureSet::uniform(game.n_states(), game.n_players());
    const Lemma1Report report = check_lemma1(game, v, js, measures);
    if (report.holds) {
      ++held;
    } else {
      check.passed = false;
    }
  }
  check.detail = std::to_string(held) + "/" + std::to_string(total) + " instances satisfy the bound";
  return check;
}

VerifyCheck check_equivalence_random(std::uint64_t seed) {
  VerifyCheck check{"definition_equivalence", true, ""};
  Rng rng(seed);
  int agreed = 0, total = 0;
  try {
    for (int it = 0; it < 10; ++it) {
      const TurnBasedGarnet game = random_game(2, 3, 2, 0.8, rng);
      const MinEpsilonStrategy best = brute_force_min_epsilon(game);
      // Both characterizations must agree on the epsilon-minimal strategy,
      // on the uniform strategy and on a random one.
      check_definition_equivalence(game, deterministic_strategy(game, best.action));
      ++agreed;
      check_definition_equivalence(game, uniform_strategy(game));
      ++agreed;
      check_definition_equivalence(game, random_strategy(game, rng));
      ++agreed;
      total += 3;
    }
  } catch (const std::exception& e) {
    check.passed = false;
    check.detail = e.what();
    return check;
  }
  check.detail = std::to_string(agreed) + "/" + std::to_string(total) + " strategies: both sides agree";
  return check;
}

VerifyCheck check_estimator_exactness(std::uint64_t seed) {
  VerifyCheck check{"deterministic_estimator", true, ""};
  Rng rng(seed);
  double max_diff = 0.0;
  const int probes = 10000;
  TurnBasedGarnet game;
  JointStrategy js;
  std::vector<Eigen::MatrixXd> q;
  for (int it = 0; it < probes; ++it) {
    if (it % 100 == 0) {
      game = random_game(1 + rng.uniform_int(3), 2 + rng.uniform_int(5), 1 + rng.uniform_int(3),
                         rng.uniform(0.2, 0.95), rng);
      js = random_strategy(game, rng);
      q.clear();
      for (int i = 0; i < game.n_players(); ++i) {
        Eigen::MatrixXd qi(game.n_states(), game.n_actions());
        for (Eigen::Index k = 0; k < qi.size(); ++k) qi.data()[k] = rng.uniform(-5.0, 5.0);
        q.push_back(std::move(qi));
      }
    }
    const int s = rng.uniform_int(game.n_states());
    const int a = rng.uniform_int(game.n_actions());
    const int s_next = game.next(s, a);
    for (int i = 0; i < game.n_players(); ++i) {
      const Eigen::MatrixXd& qi = q[static_cast<std::size_t>(i)];
      const double emp_star = game.r(i, s, a) + game.gamma() * backup_star(game, s_next, qi, js, i);
      const double emp_joint = game.r(i, s, a) + game.gamma() * expected_q_turnbased(qi, js, s_next);
      max_diff = std::max(max_diff, std::abs(emp_star - model_based_backup(game, s, a, qi, js, i, BackupMode::kStar)));
      max_diff =
          std::max(max_diff, std::abs(emp_joint - model_based_backup(game, s, a, qi, js, i, BackupMode::kJoint)));
    }
  }
  check.passed = max_diff <= 1e-12;
  check.detail = "max |sample - model| = " + fmt(max_diff) + " over " + std::to_string(probes) + " probes";
  return check;
}

VerifyCheck check_gradients(std::uint64_t seed, ModelKind kind) {
  VerifyCheck check{kind == ModelKind::kMlp ? "gradient_check_mlp" : "gradient_check_tabular", false, ""};
  Rng rng(seed);
  const TurnBasedGarnet game = random_game(2, 3, 2, 0.9, rng);
  const Dataset data = sample_batch(game, 8, rng.next_u64());

  TrainConfig cfg;
  cfg.kind = kind;
  cfg.hidden = 16;
  cfg.weight_decay = 0.0;

  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng init(derive_seed(seed, 7, static_cast<std::uint64_t>(attempt)));
    Model model = kind == ModelKind::kMlp
                      ? Model::mlp(game.n_players(), game.n_states(), game.n_actions(), cfg.hidden, cfg.encoding, init)
                      : Model::tabular(game.n_players(), game.n_states(), game.n_actions());
    if (kind == ModelKind::kTabular) {
      for (auto& nets : model.players) {
        for (Eigen::Index k = 0; k < nets.q[0].size(); ++k) nets.q[0].data()[k] = init.uniform(-1.0, 1.0);
        for (Eigen::Index k = 0; k < nets.pi[0].size(); ++k) nets.pi[0].data()[k] = init.uniform(-1.0, 1.0);
      }
    }
    if (!fd_safe_point(model, data.samples, 1e-3, 1e-4)) continue;
    Rng pick(derive_seed(seed, 8, static_cast<std::uint64_t>(attempt)));
    const GradCheckResult gc = gradient_check(model, data.samples, game.gamma(), cfg, 200, 1e-5, pick);
    check.passed = gc.max_rel_err <= 1e-4;
    check.detail = "max relative error " + fmt(gc.max_rel_err) + " over " + std::to_string(gc.checked) + " weights";
    return check;
  }
  check.detail = "no tie-free initialization found";
  return check;
}

}  // namespace

VerifyReport verify(std::uint64_t seed, std::ostream& log) {
  VerifyReport report;
  report.checks.push_back(check_lemma1_random(derive_seed(seed, 11, 0)));
  report.checks.push_back(check_equivalence_random(derive_seed(seed, 12, 0)));
  report.checks.push_back(check_estimator_exactness(derive_seed(seed, 13, 0)));
  report.checks.push_back(check_gradients(derive_seed(seed, 14, 0), ModelKind::kMlp));
  report.checks.push_back(check_gradients(derive_seed(seed, 15, 0), ModelKind::kTabular));
  for (const VerifyCheck& check : report.checks) {
    log << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail << "\n";
  }
  return report;
}

}  // namespace nashmg
