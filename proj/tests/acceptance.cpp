// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tcat/cli/cli.hpp"
#include "tcat/cli/train.hpp"
#include "tcat/data/cloud.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/loss/losses.hpp"
#include "tcat/metrics/metrics.hpp"
#include "tcat/network/config.hpp"
#include "tcat/network/model.hpp"

namespace fs = std::filesystem;
using namespace tcat;
using diff::Tensor;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return std::ranges::equal(a.data(), b.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "tcat_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Verdict gradient_integrity() {
  const auto t0 = Clock::now();
  const CliRun r = cli({"grad-check", "--tol", "1e-3", "--op-tol", "1e-4"});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t groups = 0;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) {
    const auto at = line.find("max_rel_err=");
    if (at == std::string::npos) continue;
    ++groups;
    worst = std::max(worst, std::stod(line.substr(at + 12)));
  }
  return {r.code == 0 && secs < 60.0 && groups > 0,
          fmt("%zu groups, worst rel err %.2e, %.1f s", groups, worst, secs)};
}

Verdict hungarian_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8675309);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const loss::CostMatrix m = oracle::random_cost(rng, dim(rng), dim(rng), trial % 2 == 0);
    const loss::Assignment got = loss::hungarian(m);
    const auto want = oracle::brute_force_assignment(m);
    if (got.cost != want.cost || got.pairs != want.pairs) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, fmt("500 matrices, %zu mismatches, %.2f s", mismatches, secs)};
}

Verdict fps_oracle() {
  std::mt19937_64 rng(1234);
  std::size_t violations = 0, steps = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    const geom::Coords c = oracle::random_cloud(rng, n, trial % 2 == 1);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const std::size_t seed = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (oracle::fps_violation(c, geom::farthest_point_sample(c, m, seed), seed) != -1) ++violations;
    steps += m;
  }
  return {violations == 0, fmt("200 clouds, %zu selections verified, %zu violations", steps, violations)};
}

Verdict loss_unit_values() {
  const double a = loss::loss_offset(Tensor::from({1, 3}, {1, 0, 0}), Tensor::from({1, 3}, {0, 0, 0})).item();
  const double b =
      loss::loss_offset(Tensor::from({1, 3}, {0, 0, 0}), Tensor::from({2, 3}, {0, 0, 0, 1, 0, 0})).item();
  const std::vector<int> label{5};
  const double seg = loss::loss_seg(Tensor::zeros({1, 17}), label).item();
  const geom::Coords gt{{0, 0, 0}, {1, 2, 3}, {-1, 0.5, 2}, {0.25, -4, 1}};
  const geom::Coords perm{gt[2], gt[0], gt[3], gt[1]};
  const double tcp = loss::loss_tcp({geom::to_tensor(perm), geom::to_tensor(perm)}, gt).item();
  const bool ok = a == 2.0 && b == 0.5 && std::abs(seg - std::log(17.0)) <= 1e-9 && tcp == 0.0;
  return {ok, fmt("offset %.17g and %.17g, seg - ln17 = %.1e, tcp %.17g", a, b, seg - std::log(17.0), tcp)};
}

Verdict superpoint_geometry() {
  net::ModelConfig cfg;
  cfg.level_widths = {16, 16, 16, 16};
  cfg.stem_width = 16;
  std::size_t outside = 0, checked = 0;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    cfg.seed = 100 + trial;
    const net::Model model = net::build_model(cfg);
    data::ArchSpec spec;
    spec.teeth = 8 + static_cast<int>(trial % 9);
    spec.crowding = 0.1 * static_cast<double>(trial % 6);
    spec.seed = 500 + trial;
    data::distribute_points(spec, cfg.n_input);
    const net::ModelOutput out = net::forward(model, data::generate_arch(spec));
    for (std::size_t l = 0; l < out.tcp_positions.size(); ++l) {
      const geom::Coords x = geom::from_tensor(out.level_points[l + 1].X);
      for (const auto& y : geom::from_tensor(out.tcp_positions[l])) {
        for (int d = 0; d < 3; ++d) {
          double lo = x[0][d], hi = x[0][d];
          for (const auto& p : x) {
            lo = std::min(lo, p[d]);
            hi = std::max(hi, p[d]);
          }
          worst = std::max({worst, lo - y[d], y[d] - hi});
          if (y[d] < lo - 1e-9 || y[d] > hi + 1e-9) ++outside;
          ++checked;
        }
      }
    }
  }
  return {outside == 0, fmt("50 forwards, %zu coordinates, %zu outside, worst excess %.1e", checked,
                            outside, worst)};
}

// Overfit run driven through the command layer, as a user would.
Verdict overfit_proxy() {
  const auto t0 = Clock::now();
  const fs::path dir = workdir() / "overfit";
  const fs::path data = dir / "data", run = dir / "run", report = dir / "report";
  fs::create_directories(dir);
  std::ofstream(dir / "overfit.cfg") << "n_input = 1024\n"
                                        "epochs = 300\n"
                                        "learning_rate = 1e-3\n"
                                        "optimizer = adam\n"
                                        "batch_size = 1\n";
  const std::string cfg = (dir / "overfit.cfg").string();
  const CliRun s = cli({"synth", "--teeth", "14", "--count", "8", "--points", "1024", "--crowding",
                        "0.5", "--seed", "7", "--out", data.string()});
  if (s.code != 0) return {false, "synth failed: " + s.err};
  const CliRun t = cli({"train", "--config", cfg, "--data", data.string(), "--out", run.string()});
  if (t.code != 0) return {false, "train failed: " + t.err};
  const CliRun e = cli({"eval", "--config", cfg, "--checkpoint", (run / "model.ckpt").string(), "--data",
                        data.string(), "--out", report.string()});
  if (e.code != 0) return {false, "eval failed: " + e.err};
  const double secs = seconds_since(t0);

  std::vector<double> totals;
  std::istringstream log(slurp(run / "loss.log"));
  for (std::string line; std::getline(log, line);) {
    std::istringstream f(line);
    double epoch, seg, tcp, off, total;
    f >> epoch >> seg >> tcp >> off >> total;
    totals.push_back(total);
  }
  if (totals.size() != 300) return {false, fmt("loss log has %zu lines", totals.size())};
  const double ratio = totals.back() / totals.front();

  // Metrics recomputed at full precision; the report files round to 0.01%.
  const net::ConfigFile config = net::load_config(cfg);
  net::Model model = net::build_model(config.model);
  diff::load_checkpoint(run / "model.ckpt", model.params);
  double oa = 0.0, tir = 0.0, dist = 0.0, dump_mismatch = 0.0;
  const auto files = cli::list_clouds(data);
  for (const auto& f : files) {
    const data::LabeledCloud raw = data::read_cloud(f);
    const data::LabeledCloud sampled = data::resample(raw, config.model.n_input, config.model.seed);
    const net::ModelOutput out = net::forward(model, sampled);
    metrics::EvalInput in{out.normalization.apply(raw.points), raw.labels, raw.instances,
                          net::predict_full(raw.points, sampled.points, out.logits),
                          geom::from_tensor(out.tcp_positions.back()), config.model.n_classes};
    const metrics::MetricsReport r = metrics::evaluate(in);
    oa += r.oa / static_cast<double>(files.size());
    tir += r.tir / static_cast<double>(files.size());
    const geom::Coords gt = out.normalization.apply(raw.centroid_positions());
    dist += loss::match_centroids(out.tcp_positions.back(), gt).cost / static_cast<double>(gt.size()) /
            static_cast<double>(files.size());

    // The level-4 rows of the eval dump must be the positions scored here.
    std::istringstream dump(slurp(report / (f.stem().string() + ".tcp")));
    const geom::Coords y = geom::from_tensor(out.tcp_positions.back());
    for (std::string line; std::getline(dump, line);) {
      std::istringstream row(line);
      std::size_t level, m;
      geom::Point3 p;
      row >> level >> m >> p[0] >> p[1] >> p[2];
      if (level != out.tcp_positions.size()) continue;
      dump_mismatch = std::max(dump_mismatch, geom::distance(p, y[m]));
    }
  }
  const std::string agg = slurp(report / "aggregate.metrics");
  const bool report_agrees = agg.find(fmt("oa=%.2f", 100 * oa)) != std::string::npos &&
                             agg.find(fmt("tir=%.2f", 100 * tir)) != std::string::npos;

  const bool a = ratio <= 0.10, b = oa >= 0.95 && tir >= 0.90, c = dist < 0.05;
  return {a && b && c && report_agrees && dump_mismatch == 0.0 && secs < 1800.0,
          fmt("(a) loss %.4g -> %.4g, ratio %.4f %s; (b) OA %.4f TIR %.4f %s; (c) level-4 matched "
              "distance %.4f %s; report %s; %.0f s",
              totals.front(), totals.back(), ratio, a ? "ok" : "FAIL", oa, tir, b ? "ok" : "FAIL", dist,
              c ? "ok" : "FAIL", report_agrees && dump_mismatch == 0.0 ? "consistent" : "INCONSISTENT",
              secs)};
}

Verdict shape_pipeline() {
  net::ModelConfig cfg;
  cfg.seed = 11;
  net::Model model = net::build_model(cfg);
  data::ArchSpec spec;
  spec.seed = 12;
  spec.crowding = 0.4;
  data::distribute_points(spec, 1024);
  const data::LabeledCloud cloud = data::generate_arch(spec);
  const net::ModelOutput out = net::forward(model, cloud);

  std::vector<std::size_t> sizes;
  for (const auto& l : out.level_points) sizes.push_back(l.size());
  const bool sizes_ok = sizes == std::vector<std::size_t>{1024, 256, 64, 16, 4};
  const bool restored = out.logits.dim(0) == 1024 && out.offsets.dim(0) == 1024;

  const fs::path ckpt = workdir() / "shape.ckpt";
  diff::save_checkpoint(ckpt, model.params);
  cfg.seed = 999;  // different initialization, overwritten by the checkpoint
  net::Model reloaded = net::build_model(cfg);
  diff::load_checkpoint(ckpt, reloaded.params);
  const net::ModelOutput again = net::forward(reloaded, cloud);
  bool identical = same_values(again.logits, out.logits) && same_values(again.offsets, out.offsets);
  for (std::size_t l = 0; l < out.tcp_positions.size(); ++l) {
    identical = identical && same_values(again.tcp_positions[l], out.tcp_positions[l]);
  }
  return {sizes_ok && restored && identical,
          fmt("levels %zu/%zu/%zu/%zu/%zu, decoder rows %zu, reload %s", sizes[0], sizes[1], sizes[2],
              sizes[3], sizes[4], out.logits.dim(0), identical ? "bit-identical" : "DIFFERS")};
}

Verdict metric_oracle() {
  data::ArchSpec spec;
  spec.seed = 21;
  spec.missing.assign(static_cast<std::size_t>(spec.teeth), false);
  spec.missing[3] = true;
  data::distribute_points(spec, 2048);
  const data::LabeledCloud c = data::generate_arch(spec);
  const metrics::MetricsReport r = metrics::evaluate(
      {c.points, c.labels, c.instances, c.labels, c.centroid_positions(), 17});
  const bool all_one = r.oa == 1.0 && r.dsc == 1.0 && r.sen == 1.0 && r.ppv == 1.0 && r.tir == 1.0 &&
                       r.tla == 1.0 && r.tsa == 1.0 && r.score == 1.0;

  const std::vector<int> gt{0, 1, 1, 2, 2};
  const std::vector<int> pred{0, 1, 2, 2, 0};
  const metrics::Confusion conf = metrics::confusion(pred, gt, 3);
  const metrics::PointMetrics pm = metrics::point_metrics(conf);
  const bool hand = conf == metrics::Confusion{{1, 0, 0}, {0, 1, 1}, {1, 0, 1}} && pm.oa == 3.0 / 5.0 &&
                    pm.sen == 0.5 && pm.ppv == 0.75 && pm.dsc == (2.0 / 3.0 + 0.5) / 2.0;
  return {all_one && hand, fmt("ground truth: %s; five-point tallies: %s", all_one ? "all 1.0" : "NOT 1.0",
                               hand ? "match" : "DIFFER")};
}

// Every file under `a` must exist byte-identically under `b`, and vice versa.
std::size_t compare_trees(const fs::path& a, const fs::path& b, std::vector<std::string>& diffs) {
  std::size_t files = 0;
  std::map<std::string, bool> seen;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a);
    seen[rel.string()] = true;
    ++files;
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) diffs.push_back(rel.string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file() && !seen.count(fs::relative(e.path(), b).string())) {
      diffs.push_back(fs::relative(e.path(), b).string());
    }
  }
  return files;
}

Verdict determinism() {
  const fs::path cfg = workdir() / "determinism.cfg";
  std::ofstream(cfg) << "n_input = 512\nlevel_widths = 8, 16, 16, 16\nstem_width = 8\nepochs = 3\n"
                        "batch_size = 2\n";
  std::vector<std::string> stdout_runs[2];
  for (const char* rep : {"r1", "r2"}) {
    const fs::path root = workdir() / "determinism" / rep;
    const std::string data = (root / "data").string();
    const std::string ckpt = (root / "train" / "model.ckpt").string();
    const std::vector<std::vector<std::string>> commands{
        {"synth", "--count", "3", "--points", "600", "--seed", "31", "--crowding", "0.6", "--missing", "4",
         "--out", data},
        {"train", "--config", cfg.string(), "--data", data, "--out", (root / "train").string()},
        {"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--data", data, "--out",
         (root / "eval").string()},
        {"dump-tcp", "--config", cfg.string(), "--checkpoint", ckpt, "--input",
         (root / "data" / "arch_0002.tcat").string(), "--out", (root / "dump.txt").string()},
        {"eval", "--self-test", "--data", data, "--out", (root / "self").string()},
    };
    for (const auto& args : commands) {
      const CliRun r = cli(args);
      if (r.code != 0) return {false, args[0] + " failed: " + r.err};
      stdout_runs[rep[1] - '1'].push_back(r.out);
    }
  }
  std::vector<std::string> diffs;
  const std::size_t files =
      compare_trees(workdir() / "determinism" / "r1", workdir() / "determinism" / "r2", diffs);
  // Console output of most commands names the output paths, which differ by
  // design; eval prints only file names.
  const bool console = stdout_runs[0][2] == stdout_runs[1][2];
  std::string detail = fmt("%zu files compared, %zu differ", files, diffs.size());
  for (const auto& d : diffs) detail += " " + d;
  return {diffs.empty() && files > 0 && console, detail + (console ? "" : "; eval console output differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"AC1 gradient integrity", gradient_integrity},
      {"AC2 hungarian oracle", hungarian_oracle},
      {"AC3 fps oracle", fps_oracle},
      {"AC4 loss unit values", loss_unit_values},
      {"AC5 superpoint geometry", superpoint_geometry},
      {"AC6 overfit proxy", overfit_proxy},
      {"AC7 shape pipeline", shape_pipeline},
      {"AC8 metric oracle", metric_oracle},
      {"AC9 determinism", determinism},
  };
  // Optional arguments select criteria by number, e.g. `acceptance 2 3`.
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << criteria[i].first << ": " << v.detail << std::endl;
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
