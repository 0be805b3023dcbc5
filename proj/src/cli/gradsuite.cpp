#include "tcat/cli/gradsuite.hpp"

#include <cstdio>
#include <functional>
#include <map>

#include "tcat/attention/cwa.hpp"
#include "tcat/data/cloud.hpp"
#include "tcat/diff/gradcheck.hpp"
#include "tcat/diff/ops.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/dpda/dpda.hpp"
#include "tcat/loss/losses.hpp"
#include "tcat/network/model.hpp"
#include "tcat/sgda/sgda.hpp"

namespace tcat::cli {

using diff::ParamStore;
using diff::Rng;
using diff::Tensor;

bool SuiteReport::passed() const {
  for (const auto& g : groups) {
    if (!g.passed) return false;
  }
  return true;
}

std::vector<std::string> SuiteReport::failures() const {
  std::vector<std::string> out;
  for (const auto& g : groups) {
    if (!g.passed) out.push_back(g.kind + " " + g.name);
  }
  return out;
}

namespace {

GroupResult to_group(const std::string& kind, const std::string& name,
                     const diff::CheckReport& r) {
  GroupResult g;
  g.kind = kind;
  g.name = name;
  g.max_rel_err = r.max_rel_err;
  g.tol = r.tol;
  g.passed = r.passed;
  if (!r.diagnostic.empty()) {
    g.detail = r.diagnostic;
  } else {
    for (const auto& p : r.params) {
      if (p.max_rel_err == r.max_rel_err) {
        g.detail = p.name + "[" + std::to_string(p.worst_index) + "]";
        break;
      }
    }
  }
  return g;
}

// Checks sum(body() * R) for a fixed random R shaped like the output, so
// operations whose plain sum has zero gradient (softmax) are still covered.
GroupResult check_readout(const std::string& kind, const std::string& name,
                          const ParamStore& store, const std::function<Tensor()>& body,
                          double tol, Rng& rng) {
  const Tensor probe = body();
  std::vector<double> r(probe.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : r) v = u(rng);
  const Tensor readout = Tensor::from(probe.shape(), std::move(r));
  auto f = [&] { return diff::sum(diff::mul(body(), readout)); };
  return to_group(kind, name, diff::finite_diff_check(f, store.entries(), kGradEps, tol));
}

Tensor positive(ParamStore& s, const std::string& name, diff::Shape shape, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> v(diff::shape_size(shape));
  for (double& x : v) x = u(rng);
  return s.add(name, std::move(shape), std::move(v));
}

}  // namespace

SuiteReport run_op_suite(double tol, std::uint64_t seed) {
  SuiteReport rep;
  Rng rng(seed);
  struct Case {
    std::string name;
    std::function<std::function<Tensor()>(ParamStore&, Rng&)> build;
  };
  const std::vector<std::size_t> idx{2, 0, 2, 1};
  const std::vector<std::size_t> seg{0, 2, 2, 5};
  const std::vector<Case> cases{
      {"add", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g), b = s.add_uniform("b", {4}, 1.0, g);
         return [=] { return diff::add(a, b); };
       }},
      {"sub", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g), b = s.add_uniform("b", {3, 4}, 1.0, g);
         return [=] { return diff::sub(a, b); };
       }},
      {"mul", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g), b = s.add_uniform("b", {1}, 1.0, g);
         Tensor c = s.add_uniform("c", {3, 4}, 1.0, g);
         return [=] { return diff::mul(diff::mul(a, c), b); };
       }},
      {"scale", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {5}, 1.0, g);
         return [=] { return diff::scale(a, -2.5); };
       }},
      {"add_scalar", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {5}, 1.0, g);
         return [=] { return diff::add_scalar(a, 0.75); };
       }},
      {"relu", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 3}, 1.0, g);
         return [=] { return diff::relu(a); };
       }},
      {"sigmoid", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 3}, 3.0, g);
         return [=] { return diff::sigmoid(a); };
       }},
      {"exp", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {6}, 1.0, g);
         return [=] { return diff::exp(a); };
       }},
      {"log", [](ParamStore& s, Rng& g) {
         Tensor a = positive(s, "a", {6}, g);
         return [=] { return diff::log(a); };
       }},
      {"square", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {6}, 1.0, g);
         return [=] { return diff::square(a); };
       }},
      {"smooth_l1", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 3}, 2.5, g);
         return [=] { return diff::smooth_l1(a, 1.0); };
       }},
      {"sum", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g);
         return [=] { return diff::sum(a); };
       }},
      {"sum_axis", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4, 2}, 1.0, g);
         return [=] { return diff::sum_axis(a, 1); };
       }},
      {"max_axis", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 5}, 1.0, g);
         return [=] { return diff::max_axis(a, 1); };
       }},
      {"softmax", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 5}, 2.0, g);
         return [=] { return diff::softmax(a, 1); };
       }},
      {"log_softmax", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 3}, 2.0, g);
         return [=] { return diff::log_softmax(a, 0); };
       }},
      {"matmul", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g), b = s.add_uniform("b", {4, 2}, 1.0, g);
         return [=] { return diff::matmul(a, b); };
       }},
      {"transpose", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g);
         return [=] { return diff::transpose(a); };
       }},
      {"reshape", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g);
         return [=] { return diff::reshape(a, {2, 6}); };
       }},
      {"concat", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 2}, 1.0, g), b = s.add_uniform("b", {3, 4}, 1.0, g);
         return [=] { return diff::concat({a, b}, 1); };
       }},
      {"gather", [&idx](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {3, 4}, 1.0, g);
         return [=] { return diff::gather(a, 0, idx); };
       }},
      {"scatter_add", [&idx](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 3}, 1.0, g);
         return [=] { return diff::scatter_add(a, 0, idx, 3); };
       }},
      {"mul_rows", [](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {4, 3}, 1.0, g), w = s.add_uniform("w", {4}, 1.0, g);
         return [=] { return diff::mul_rows(a, w); };
       }},
      {"segment_softmax", [&seg](ParamStore& s, Rng& g) {
         Tensor a = s.add_uniform("a", {5, 3}, 2.0, g);
         return [=] { return diff::segment_softmax(a, seg); };
       }},
  };
  for (const auto& c : cases) {
    ParamStore store;
    const auto body = c.build(store, rng);
    rep.groups.push_back(check_readout("op", c.name, store, body, tol, rng));
  }
  return rep;
}

SuiteReport run_module_suite(double tol, std::uint64_t seed) {
  SuiteReport rep;
  Rng rng(seed);
  constexpr std::size_t C = 4;

  auto points = [&](ParamStore& s, const std::string& name, std::size_t n, std::size_t width) {
    return attn::PointSet{s.add_uniform(name + ".X", {n, 3}, 0.5, rng),
                          s.add_uniform(name + ".F", {n, width}, 1.0, rng)};
  };

  {
    ParamStore s;
    const auto cwa = attn::make_cwa(s, "cwa", C, rng);
    const auto q = points(s, "q", 3, C), k = points(s, "k", 5, C);
    rep.groups.push_back(check_readout(
        "module", "cwa_dense", s, [&] { return attn::cwa_update(cwa, q, k); }, tol, rng));
  }
  {
    ParamStore s;
    const auto cwa = attn::make_cwa(s, "cwa", C, rng);
    const auto q = points(s, "q", 3, C), k = points(s, "k", 6, C);
    const auto table =
        geom::ball_query(geom::from_tensor(q.X), geom::from_tensor(k.X), 0.6, 4);
    rep.groups.push_back(check_readout(
        "module", "cwa_masked", s, [&] { return attn::cwa_update_masked(cwa, q, k, table); },
        tol, rng));
  }
  {
    ParamStore s;
    const auto p = dpda::make_dpda(s, "dpda", 2, C, C + 2, dpda::kSuperpoints, rng);
    const auto pts = points(s, "p", 6, C);
    dpda::Superpoints prev;
    prev.Y = s.add_uniform("prev.Y", {dpda::kSuperpoints, 3}, 0.5, rng);
    prev.H = s.add_uniform("prev.H", {dpda::kSuperpoints, C + 2}, 1.0, rng);
    prev.level = 1;
    rep.groups.push_back(check_readout(
        "module", "dpda_step", s,
        [&] {
          const auto z = dpda::dpda_step(2, &prev, pts, p);
          return diff::concat({z.H, z.Y}, 1);
        },
        tol, rng));
  }
  {
    ParamStore s;
    const auto p = sgda::make_sgda(s, "sgda", C, C - 1, rng);
    const auto prev = points(s, "prev", 8, C - 1);
    const auto q = points(s, "q", 3, C);
    dpda::Superpoints z;
    z.Y = s.add_uniform("z.Y", {dpda::kSuperpoints, 3}, 0.5, rng);
    z.H = s.add_uniform("z.H", {dpda::kSuperpoints, C}, 1.0, rng);
    rep.groups.push_back(check_readout(
        "module", "sgda", s,
        [&] {
          const Tensor local = sgda::local_branch(q, prev, 0.7, 4, p);
          return sgda::sgda_fuse(local, sgda::global_branch(q, z, p), p.raw_alpha);
        },
        tol, rng));
  }
  {
    ParamStore s;
    const Tensor y1 = s.add_uniform("Y1", {dpda::kSuperpoints, 3}, 1.0, rng);
    const Tensor y2 = s.add_uniform("Y2", {dpda::kSuperpoints, 3}, 1.0, rng);
    geom::Coords gt;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) gt.push_back({u(rng), u(rng), u(rng)});
    auto f = [&] { return loss::loss_tcp({y1, y2}, gt); };
    rep.groups.push_back(to_group("module", "loss_tcp",
                                  diff::finite_diff_check(f, s.entries(), kGradEps, tol)));
  }
  {
    ParamStore s;
    const Tensor pred = s.add_uniform("pred", {6, 3}, 1.0, rng);
    ParamStore fixed;
    const Tensor gt = fixed.add_uniform("gt", {6, 3}, 1.0, rng);
    auto f = [&] { return loss::loss_offset(pred, gt); };
    rep.groups.push_back(to_group("module", "loss_offset",
                                  diff::finite_diff_check(f, s.entries(), kGradEps, tol)));
  }
  {
    ParamStore s;
    const Tensor logits = s.add_uniform("logits", {6, 5}, 2.0, rng);
    const std::vector<int> labels{0, 4, 2, 2, 1, 3};
    auto f = [&] { return loss::loss_seg(logits, labels); };
    rep.groups.push_back(to_group("module", "loss_seg",
                                  diff::finite_diff_check(f, s.entries(), kGradEps, tol)));
  }
  return rep;
}

net::ModelConfig reduced_grad_config() {
  net::ModelConfig cfg;
  cfg.n_input = 64;
  cfg.level_widths = {8, 16};
  cfg.ball_radii = {0.3, 0.6};
  cfg.k_neighbors = 8;
  cfg.n_classes = 7;
  cfg.stem_width = 8;
  cfg.seed = 5;
  return cfg;
}

SuiteReport run_model_suite(const net::ModelConfig& cfg, double tol) {
  net::Model model = net::build_model(cfg);
  data::ArchSpec spec;
  spec.teeth = static_cast<int>(std::min<std::size_t>(cfg.n_classes - 1, 16));
  spec.crowding = 0.5;
  spec.seed = 11;
  data::distribute_points(spec, std::max<std::size_t>(cfg.n_input, 4 * spec.teeth));
  const data::LabeledCloud cloud =
      data::resample(data::generate_arch(spec), cfg.n_input, 0);

  std::vector<std::string> order;
  std::map<std::string, std::vector<ParamStore::Entry>> groups;
  for (const auto& e : model.params.entries()) {
    const std::string g = net::param_group(e.name);
    if (!groups.count(g)) order.push_back(g);
    groups[g].push_back(e);
  }
  auto f = [&] { return net::sample_loss(model, cloud).first; };
  SuiteReport rep;
  for (const auto& g : order) {
    model.params.zero_grad();
    rep.groups.push_back(
        to_group("model", g, diff::finite_diff_check(f, groups[g], kGradEps, tol)));
  }
  return rep;
}

std::string format_suite(const SuiteReport& report) {
  std::string out;
  char buf[256];
  for (const auto& g : report.groups) {
    std::snprintf(buf, sizeof buf, "%-6s %-16s max_rel_err=%.3e tol=%.0e %s", g.kind.c_str(),
                  g.name.c_str(), g.max_rel_err, g.tol, g.passed ? "PASS" : "FAIL");
    out += buf;
    if (!g.passed && !g.detail.empty()) out += " (" + g.detail + ")";
    out += "\n";
  }
  return out;
}

}  // namespace tcat::cli
