#include "tcat/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "tcat/cli/gradsuite.hpp"
#include "tcat/cli/train.hpp"
#include "tcat/data/cloud.hpp"
#include "tcat/diff/ops.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/errors.hpp"
#include "tcat/metrics/metrics.hpp"
#include "tcat/network/config.hpp"
#include "tcat/network/model.hpp"

namespace tcat::cli {

namespace fs = std::filesystem;

namespace {

struct SynthOptions {
  int teeth = 14;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::size_t points = 1024;
  double curvature = 0.1;
  double jitter = 0.1;
  double crowding = 0.3;
  std::vector<int> missing;  // tooth labels, 1-based
  std::string spec;
  std::string out;
};

// Spec files reuse the `key = value` syntax of model configs.
void apply_spec_file(SynthOptions& o, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open spec " + path.string());
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const auto eq = raw.find('=');
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) {
      throw ValidationError("spec line " + std::to_string(line) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(raw.substr(0, eq)), value = trim(raw.substr(eq + 1));
    try {
      if (key == "teeth") o.teeth = std::stoi(value);
      else if (key == "count") o.count = std::stoul(value);
      else if (key == "seed") o.seed = std::stoull(value);
      else if (key == "points") o.points = std::stoul(value);
      else if (key == "curvature") o.curvature = std::stod(value);
      else if (key == "jitter") o.jitter = std::stod(value);
      else if (key == "crowding") o.crowding = std::stod(value);
      else if (key == "missing") {
        o.missing.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) o.missing.push_back(std::stoi(trim(tok)));
      } else {
        throw ValidationError("spec line " + std::to_string(line) + ": unknown key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ValidationError*>(&e)) throw;
      throw ValidationError("spec line " + std::to_string(line) + ": bad value '" + value + "'");
    }
  }
}

data::ArchSpec arch_spec(const SynthOptions& o, std::size_t index) {
  data::ArchSpec s;
  s.teeth = o.teeth;
  s.curvature = o.curvature;
  s.jitter = o.jitter;
  s.crowding = o.crowding;
  s.seed = o.seed + index;
  if (o.teeth >= 1 && o.teeth <= 16) s.missing.assign(static_cast<std::size_t>(o.teeth), false);
  for (int label : o.missing) {
    if (label < 1 || label > o.teeth) {
      throw ValidationError("synth: missing tooth " + std::to_string(label) + " outside 1.." +
                            std::to_string(o.teeth));
    }
    s.missing[static_cast<std::size_t>(label - 1)] = true;
  }
  s.validate();
  data::distribute_points(s, o.points);
  return s;
}

std::string cloud_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "arch_%04zu.tcat", i);
  return buf;
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  std::vector<data::ArchSpec> specs;
  for (std::size_t i = 0; i < o.count; ++i) specs.push_back(arch_spec(o, i));
  if (o.count == 0) throw ValidationError("synth: --count must be positive");
  fs::create_directories(o.out);

  std::string missing;
  for (std::size_t i = 0; i < o.missing.size(); ++i) {
    missing += (i ? "," : "") + std::to_string(o.missing[i]);
  }
  std::ostringstream manifest;
  manifest << "# file seed teeth points curvature jitter crowding missing\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string name = cloud_name(i);
    data::write_cloud(fs::path(o.out) / name, data::generate_arch(specs[i]));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %llu %d %zu %.17g %.17g %.17g %s\n", name.c_str(),
                  static_cast<unsigned long long>(specs[i].seed), o.teeth, o.points, o.curvature,
                  o.jitter, o.crowding, missing.empty() ? "-" : missing.c_str());
    manifest << buf;
  }
  std::ofstream(fs::path(o.out) / "manifest.txt") << manifest.str();
  out << "wrote " << specs.size() << " clouds to " << o.out << "\n";
  return kExitOk;
}

net::ConfigFile config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return net::load_config(path);
}

std::vector<data::LabeledCloud> load_dataset(const fs::path& dir, const net::ModelConfig& cfg) {
  const auto files = list_clouds(dir);
  if (files.empty()) throw ValidationError("no .tcat files in " + dir.string());
  std::vector<data::LabeledCloud> out;
  for (const auto& f : files) out.push_back(data::resample(data::read_cloud(f), cfg.n_input, cfg.seed));
  return out;
}

struct TrainOptions {
  std::string config, data, out;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::string optimizer;
};

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  net::ConfigFile cfg = config_or_default(o.config);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.lr) {
    if (!(*o.lr > 0.0)) throw ValidationError("--lr must be positive");
    cfg.train.learning_rate = *o.lr;
  }
  if (o.seed) cfg.model.seed = *o.seed;
  if (!o.optimizer.empty()) cfg.train.optimizer = net::optimizer_from_string(o.optimizer);
  const auto samples = load_dataset(o.data, cfg.model);
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  std::ofstream(dir / "config.txt") << net::format_config(cfg);

  net::Model model = net::build_model(cfg.model);
  std::ofstream log(dir / "loss.log", std::ios::trunc);
  const TrainResult r = train(model, samples, cfg.train, log, dir / "model.ckpt", dir / "best.ckpt");
  if (r.aborted) {
    err << "error: non-finite loss at epoch " << r.epochs.size() + 1 << "; training aborted\n";
    return kExitNumerical;
  }
  if (!r.epochs.empty()) {
    const auto& first = r.epochs.front();
    const auto& last = r.epochs.back();
    out << "epochs " << r.epochs.size() << " first_total " << first.total << " last_total "
        << last.total << "\n";
  }
  out << "checkpoint " << (dir / "model.ckpt").string() << "\n";
  return kExitOk;
}

std::string format_tcp(const std::vector<diff::Tensor>& levels) {
  std::string out;
  char buf[160];
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const geom::Coords y = geom::from_tensor(levels[l]);
    for (std::size_t m = 0; m < y.size(); ++m) {
      std::snprintf(buf, sizeof buf, "%zu %zu %.17g %.17g %.17g\n", l + 1, m, y[m][0], y[m][1],
                    y[m][2]);
      out += buf;
    }
  }
  return out;
}

net::Model load_model(const net::ModelConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ValidationError("--checkpoint is required");
  if (!fs::is_regular_file(checkpoint)) throw ValidationError("checkpoint not found: " + checkpoint);
  net::Model model = net::build_model(cfg);
  diff::load_checkpoint(checkpoint, model.params);
  return model;
}

struct EvalOptions {
  std::string config, checkpoint, data, out;
  bool self_test = false;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const net::ConfigFile cfg = config_or_default(o.config);
  const auto files = list_clouds(o.data);
  if (files.empty()) throw ValidationError("no .tcat files in " + o.data);
  std::optional<net::Model> model;
  if (!o.self_test) model = load_model(cfg.model, o.checkpoint);
  fs::create_directories(o.out);
  const fs::path dir(o.out);

  std::vector<metrics::MetricsReport> reports;
  for (const auto& f : files) {
    const data::LabeledCloud raw = data::read_cloud(f);
    metrics::EvalInput in;
    in.gt_labels = raw.labels;
    in.gt_instances = raw.instances;
    in.n_classes = cfg.model.n_classes;
    if (o.self_test) {
      const auto norm = geom::fit_normalization(raw.points);
      in.points = norm.apply(raw.points);
      in.pred_labels = raw.labels;
      in.tcp = norm.apply(raw.centroid_positions());
    } else {
      const data::LabeledCloud sampled = data::resample(raw, cfg.model.n_input, cfg.model.seed);
      const net::ModelOutput fwd = net::forward(*model, sampled);
      in.points = fwd.normalization.apply(raw.points);
      in.pred_labels = net::predict_full(raw.points, sampled.points, fwd.logits);
      in.tcp = geom::from_tensor(fwd.tcp_positions.back());
      std::ofstream(dir / (f.stem().string() + ".tcp")) << format_tcp(fwd.tcp_positions);
    }
    const metrics::MetricsReport r = metrics::evaluate(in);
    std::ofstream(dir / (f.stem().string() + ".metrics")) << metrics::format_flat(r);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s oa=%.2f tir=%.2f tla=%.2f score=%.2f\n",
                  f.filename().string().c_str(), 100 * r.oa, 100 * r.tir, 100 * r.tla,
                  100 * r.score);
    out << buf;
    reports.push_back(r);
  }
  const metrics::MetricsReport agg = metrics::mean_report(reports);
  std::ofstream(dir / "aggregate.metrics") << metrics::format_flat(agg);
  out << metrics::format_table(agg);
  return kExitOk;
}

struct DumpOptions {
  std::string config, checkpoint, input, out;
};

int cmd_dump_tcp(const DumpOptions& o, std::ostream& out) {
  const net::ConfigFile cfg = config_or_default(o.config);
  const net::Model model = load_model(cfg.model, o.checkpoint);
  const data::LabeledCloud sampled =
      data::resample(data::read_cloud(o.input), cfg.model.n_input, cfg.model.seed);
  const std::string text = format_tcp(net::forward(model, sampled).tcp_positions);
  if (o.out.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out);
    if (!f) throw ValidationError("cannot open " + o.out + " for writing");
    f << text;
  }
  return kExitOk;
}

struct GradOptions {
  std::string config;
  double tol = 1e-3;
  double op_tol = 1e-4;
  std::string corrupt_op;
};

int cmd_grad_check(const GradOptions& o, std::ostream& out) {
  const net::ModelConfig cfg =
      o.config.empty() ? reduced_grad_config() : net::load_config(o.config).model;
  struct Reset {
    ~Reset() { diff::testing::corrupt_backward(""); }
  } reset;
  if (!o.corrupt_op.empty()) diff::testing::corrupt_backward(o.corrupt_op, 1.5);

  SuiteReport all;
  for (SuiteReport part : {run_op_suite(o.op_tol), run_module_suite(o.op_tol),
                           run_model_suite(cfg, o.tol)}) {
    all.groups.insert(all.groups.end(), part.groups.begin(), part.groups.end());
  }
  out << format_suite(all);
  if (all.passed()) {
    out << "grad-check: PASS\n";
    return kExitOk;
  }
  out << "grad-check: FAIL";
  for (const auto& f : all.failures()) out << " [" << f << "]";
  out << "\n";
  return kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tooth segmentation with learnable superpoints", "tcatseg"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate synthetic labeled dental arches");
  s->add_option("--teeth", synth.teeth, "Tooth count, 1..16");
  s->add_option("--count", synth.count, "Number of clouds");
  s->add_option("--seed", synth.seed, "Seed of the first cloud; cloud i uses seed + i");
  s->add_option("--points", synth.points, "Points per cloud");
  s->add_option("--curvature", synth.curvature, "Arch parabola coefficient");
  s->add_option("--jitter", synth.jitter, "Relative tooth shape jitter");
  s->add_option("--crowding", synth.crowding, "Crowding factor in [0,1]");
  s->add_option("--missing", synth.missing, "Missing tooth labels")->delimiter(',');
  s->add_option("--spec", synth.spec, "key = value spec file, applied before flags");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainOptions train_opts;
  auto* t = app.add_subcommand("train", "Train on a directory of clouds");
  t->add_option("--config", train_opts.config, "Config file");
  t->add_option("--data", train_opts.data, "Directory of .tcat clouds")->required();
  t->add_option("--out", train_opts.out, "Output directory")->required();
  t->add_option("--epochs", train_opts.epochs, "Override epochs");
  t->add_option("--lr", train_opts.lr, "Override learning rate");
  t->add_option("--seed", train_opts.seed, "Override model seed");
  t->add_option("--optimizer", train_opts.optimizer, "sgd | momentum | adam");

  EvalOptions eval_opts;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a directory of clouds");
  e->add_option("--config", eval_opts.config, "Config file");
  e->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file");
  e->add_option("--data", eval_opts.data, "Directory of .tcat clouds")->required();
  e->add_option("--out", eval_opts.out, "Report directory")->required();
  e->add_flag("--self-test", eval_opts.self_test, "Score ground truth against itself");

  GradOptions grad_opts;
  auto* g = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  g->add_option("--config", grad_opts.config, "Config for the model checks");
  g->add_option("--tol", grad_opts.tol, "Tolerance for model parameter groups");
  g->add_option("--op-tol", grad_opts.op_tol, "Tolerance for op and module checks");
  g->add_option("--corrupt-op", grad_opts.corrupt_op)->group("");

  DumpOptions dump;
  auto* d = app.add_subcommand("dump-tcp", "Write superpoint positions of every level");
  d->add_option("--config", dump.config, "Config file");
  d->add_option("--checkpoint", dump.checkpoint, "Checkpoint file")->required();
  d->add_option("--input", dump.input, "Input cloud")->required();
  d->add_option("--out", dump.out, "Output file (stdout when omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << ex.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (s->parsed()) {
      SynthOptions o = synth;
      if (!synth.spec.empty()) {
        o = SynthOptions{};
        apply_spec_file(o, synth.spec);
        // Explicit flags override the spec file.
        for (const auto* opt : s->get_options()) {
          if (opt->count() == 0) continue;
          const std::string n = opt->get_name();
          if (n == "--teeth") o.teeth = synth.teeth;
          else if (n == "--count") o.count = synth.count;
          else if (n == "--seed") o.seed = synth.seed;
          else if (n == "--points") o.points = synth.points;
          else if (n == "--curvature") o.curvature = synth.curvature;
          else if (n == "--jitter") o.jitter = synth.jitter;
          else if (n == "--crowding") o.crowding = synth.crowding;
          else if (n == "--missing") o.missing = synth.missing;
        }
        o.out = synth.out;
      }
      return cmd_synth(o, out);
    }
    if (t->parsed()) return cmd_train(train_opts, out, err);
    if (e->parsed()) return cmd_eval(eval_opts, out);
    if (g->parsed()) return cmd_grad_check(grad_opts, out);
    if (d->parsed()) return cmd_dump_tcp(dump, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace tcat::cli
