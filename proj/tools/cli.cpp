// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ela/accounting.hpp"
#include "ela/attention.hpp"
#include "ela/error.hpp"
#include "ela/gradcheck.hpp"
#include "ela/io.hpp"
#include "ela/parallel.hpp"
#include "ela/simd.hpp"
#include "ela/toy/dataset.hpp"
#include "ela/toy/gradcam.hpp"
#include "ela/toy/trainer.hpp"

namespace ela::cli {
namespace {

namespace fs = std::filesystem;

constexpr double kGradTol = 1e-5;

Shape4 parse_shape(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    unsigned long x = 0;
    try {
      x = std::stoul(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.empty() || x == 0)
      throw ConfigError("--shape: expected N,C,H,W with positive integers, got '" + s + "'");
    v.push_back(x);
  }
  if (v.size() != 4) throw ConfigError("--shape: expected N,C,H,W, got '" + s + "'");
  return {v[0], v[1], v[2], v[3]};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  if (out.empty()) throw ConfigError("empty module list");
  return out;
}

// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text << std::flush;
  else
    io::atomic_write(path, text);
}

std::string fmt(double v, int prec = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

template <typename T>
Tensor4<T> random_tensor(const Shape4& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor4<T> t(s);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
  return t;
}

// Linear interpolation between closest ranks.
double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

void require_f64(const std::string& precision, const char* cmd) {
  if (precision != "f64")
    throw ConfigError(std::string(cmd) + " runs in double precision only (--precision f64)");
}

// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string config, module, format = "csv", out;
};

int cmd_audit(const AuditArgs& a) {
  if (a.config.empty() == a.module.empty())
    throw ConfigError("audit: pass exactly one of --config <placement.json> or --module");
  accounting::PlacementSpec spec;
  if (!a.config.empty()) {
    std::string text;
    try {
      text = io::read_file(a.config);
    } catch (const Error& e) {
      throw ConfigError(std::string("audit: ") + e.what());
    }
    spec = accounting::parse_placement(text);
  } else {
    spec = accounting::resnet18_placement(parse_module(a.module));
  }
  const auto report = accounting::audit_network(spec);
  if (a.format == "json") {
    emit(a.out, report_json(report).dump(2) + "\n");
  } else {
    emit(a.out, report_csv(report));
    for (const auto& s : report.assumptions) std::cerr << "assumption: " << s << "\n";
  }
  if (!report.enumeration_matches) {
    std::cerr << "audit: closed-form parameter count disagrees with enumeration\n";
    return kCheckFailed;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string module = "ela-b", shape = "2,16,5,7", precision = "f64", out;
  std::uint64_t seed = 1;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  require_f64(a.precision, "gradcheck");
  const AttentionConfig cfg = parse_module(a.module);
  const Shape4 shape = parse_shape(a.shape);
  validate(cfg, shape.c);
  const auto report = gradcheck_attention(cfg, {shape, a.seed, kGradCheckStep, a.corrupt});
  std::ostringstream t;
  t << "group,count,max_rel,max_abs,status\n";
  for (const auto& g : report.groups)
    t << g.name << ',' << g.count << ',' << fmt(g.max_rel, 6) << ',' << fmt(g.max_abs, 6) << ','
      << (g.max_rel < kGradTol ? "pass" : "FAIL") << '\n';
  emit(a.out, t.str());
  const bool ok = report.passed(kGradTol);
  std::cerr << module_name(cfg) << " " << shape.str() << ": max rel error " << fmt(report.max_rel(), 3)
            << (ok ? " < " : " >= ") << "1e-05\n";
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string module = "ela-b", shape = "4,64,28,28", precision = "f64", out;
  std::uint64_t seed = 1;
  std::size_t reps = 20, warmup = 3;
};

struct BenchRow {
  std::string direction;
  std::vector<double> us;
  double checksum = 0;
};

template <typename T>
std::vector<BenchRow> bench_module(const AttentionConfig& cfg, const Shape4& s, const BenchArgs& a) {
  Attention<T> att(cfg, s.c, a.seed);
  const auto x = random_tensor<T>(s, a.seed + 1);
  const auto dy = random_tensor<T>(s, a.seed + 2);
  BenchRow fwd{"forward", {}, 0}, bwd{"backward", {}, 0};
  using clock = std::chrono::steady_clock;
  for (std::size_t r = 0; r < a.warmup + a.reps; ++r) {
    const auto t0 = clock::now();
    const Tensor4<T> y = att.forward(x, true);
    const auto t1 = clock::now();
    const Tensor4<T> dx = att.backward(dy);
    const auto t2 = clock::now();
    att.params().zero_grad();
    if (r < a.warmup) continue;
    fwd.us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    bwd.us.push_back(std::chrono::duration<double, std::micro>(t2 - t1).count());
    if (r == a.warmup) {
      for (T v : y.vec()) fwd.checksum += static_cast<double>(v);
      for (T v : dx.vec()) bwd.checksum += static_cast<double>(v);
    }
  }
  return {fwd, bwd};
}

int cmd_bench(const BenchArgs& a) {
  if (a.reps < 10) throw ConfigError("bench: --reps must be >= 10");
  if (a.precision != "f32" && a.precision != "f64") throw ConfigError("bench: --precision must be f32 or f64");
  const Shape4 s = parse_shape(a.shape);
  std::vector<AttentionConfig> cfgs;
  for (const auto& m : split_list(a.module)) {
    cfgs.push_back(parse_module(m));
    validate(cfgs.back(), s.c);
  }
  std::ostringstream t;
  t << "module,direction,precision,n,c,h,w,reps,median_us,p10_us,p90_us,checksum\n";
  for (const auto& cfg : cfgs) {
    const auto rows = a.precision == "f32" ? bench_module<float>(cfg, s, a) : bench_module<double>(cfg, s, a);
    for (const auto& r : rows)
      t << module_name(cfg) << ',' << r.direction << ',' << a.precision << ',' << s.n << ',' << s.c << ','
        << s.h << ',' << s.w << ',' << a.reps << ',' << fmt(percentile(r.us, 0.5), 6) << ','
        << fmt(percentile(r.us, 0.1), 6) << ',' << fmt(percentile(r.us, 0.9), 6) << ',' << fmt(r.checksum)
        << '\n';
  }
  emit(a.out, t.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string module = "ela-b", out, precision = "f64";
  std::uint64_t seed = 7;
  std::size_t steps = 500, batch = 32, eval_samples = 256;
  double lr = 0.05, momentum = 0.9, weight_decay = 0;
  std::optional<double> min_accuracy;
};

int cmd_train_toy(const TrainArgs& a) {
  require_f64(a.precision, "train-toy");
  toy::MiniCnnConfig mc;
  if (a.module != "none") mc.attention = parse_module(a.module);
  mc.validate();
  toy::TrainConfig tc;
  tc.steps = a.steps;
  tc.batch = a.batch;
  tc.lr = a.lr;
  tc.momentum = a.momentum;
  tc.weight_decay = a.weight_decay;
  tc.seed = a.seed;
  tc.eval_samples = a.eval_samples;
  tc.validate();

  toy::MiniCnn model(mc, a.seed);
  std::ostringstream csv;
  csv << "step,loss,accuracy\n";
  auto write_csv = [&] { io::atomic_write(fs::path(a.out) / "loss.csv", csv.str()); };
  try {
    toy::train(model, tc, [&](const toy::TrainRecord& r) {
      csv << r.step << ',' << fmt(r.loss) << ',' << fmt(r.accuracy) << '\n';
    });
  } catch (const DivergenceError&) {
    write_csv();  // keep the history up to the failure for diagnosis
    throw;
  }
  write_csv();
  const auto eval = toy::make_toy_batch(tc.eval_samples, toy::eval_seed(a.seed), tc.data);
  const double acc = toy::evaluate_accuracy(model, eval);
  const nlohmann::json train_meta = {{"steps", tc.steps}, {"batch", tc.batch},     {"lr", tc.lr},
                                     {"momentum", tc.momentum}, {"weight_decay", tc.weight_decay},
                                     {"seed", tc.seed}};
  toy::save_model(fs::path(a.out) / "model.elap", model, {{"train", train_meta}});
  nlohmann::json summary = {{"module", a.module},
                            {"train", train_meta},
                            {"params", model.param_count()},
                            {"eval_samples", tc.eval_samples},
                            {"train_accuracy", acc},
                            {"threads", worker_threads()},
                            {"simd", simd::level_name(simd::active_level())}};
  io::atomic_write(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  std::cout << "train accuracy " << fmt(acc, 6) << " on " << tc.eval_samples << " samples\n";
  if (a.min_accuracy && acc < *a.min_accuracy) {
    std::cerr << "train-toy: accuracy " << fmt(acc, 6) << " below --min-accuracy " << fmt(*a.min_accuracy, 6)
              << "\n";
    return kCheckFailed;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradcamArgs {
  std::string model, out;
  std::uint64_t seed = 12345;
  std::size_t samples = 4, stage = 1;
};

int cmd_gradcam(const GradcamArgs& a) {
  if (a.samples == 0) throw ConfigError("gradcam: --samples must be >= 1");
  toy::MiniCnn model = [&] {
    try {
      return toy::load_model(a.model);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(std::string("gradcam: ") + e.what(), 0);
    }
  }();
  if (a.stage >= model.num_stages())
    throw ConfigError("gradcam: --stage must be < " + std::to_string(model.num_stages()));
  model.set_mode(Mode::eval);
  const auto& mc = model.config();
  toy::ToyDataConfig dc;
  dc.height = mc.height;
  dc.width = mc.width;
  const auto batch = toy::make_toy_batch(a.samples, a.seed, dc);
  std::ostringstream csv;
  csv << "sample,label,predicted,center_row,center_col,peak_row,peak_col,distance_px\n";
  const std::size_t per = mc.height * mc.width;
  for (std::size_t i = 0; i < a.samples; ++i) {
    const auto src = batch.images.sample(i);
    Tensor4<double> x({1, 1, mc.height, mc.width}, std::vector<double>(src.begin(), src.end()));
    const auto logits = model.forward(x);
    std::size_t pred = 0;
    for (std::size_t k = 1; k < mc.classes; ++k)
      if (logits(0, k, 0) > logits(0, pred, 0)) pred = k;
    const auto hm = toy::gradcam(model, x, pred, a.stage);
    const auto [r, c] = hm.argmax();
    const auto& ctr = batch.centers[i];
    const double dist = std::hypot(static_cast<double>(r) - static_cast<double>(ctr.row),
                                   static_cast<double>(c) - static_cast<double>(ctr.col));
    char name[32];
    std::snprintf(name, sizeof name, "heatmap_%03zu.pgm", i);
    io::atomic_write(fs::path(a.out) / name, io::encode_pgm(mc.width, mc.height, io::to_gray8(hm.values)));
    std::snprintf(name, sizeof name, "input_%03zu.pgm", i);
    io::atomic_write(fs::path(a.out) / name,
                     io::encode_pgm(mc.width, mc.height, io::to_gray8(std::span<const double>(src.data(), per))));
    csv << i << ',' << batch.labels[i] << ',' << pred << ',' << ctr.row << ',' << ctr.col << ',' << r << ','
        << c << ',' << fmt(dist, 6) << '\n';
  }
  io::atomic_write(fs::path(a.out) / "gradcam.csv", csv.str());
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Efficient Local Attention kernels: audit, gradient check, benchmark, toy training, Grad-CAM"};
  app.require_subcommand(1);
  app.footer(
      "Environment:\n"
      "  ELA_THREADS  cap on worker threads (results are identical for a fixed value)\n"
      "  ELA_SIMD     scalar | avx2, overrides CPU detection\n"
      "Modules: se, eca, ca, ca-gn, ela-t, ela-b, ela-s, ela-l, or custom forms such as\n"
      "  ela-k7-g-ng16, ela-k5-g8-ng32, se-r16, eca-k5, ca-r24, ca-gn-r16\n"
      "Exit codes: 0 ok, 1 check failed, 2 usage or parse error, 3 numeric divergence");

  AuditArgs au;
  auto* audit = app.add_subcommand("audit", "Parameter/FLOP audit of a placement (CSV or JSON report)");
  audit->add_option("--config", au.config, "Placement JSON file");
  audit->add_option("--module", au.module, "Audit the built-in ResNet-18 placement with this module");
  audit->add_option("--format", au.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  audit->add_option("--out", au.out, "Output file (default stdout)");

  GradcheckArgs gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of a module's backward pass");
  grad->add_option("--module", gc.module, "Attention module")->capture_default_str();
  grad->add_option("--shape", gc.shape, "N,C,H,W")->capture_default_str();
  grad->add_option("--seed", gc.seed, "Seed for inputs and parameters")->capture_default_str();
  grad->add_option("--precision", gc.precision, "f64 (f32 is rejected)")->capture_default_str();
  grad->add_option("--out", gc.out, "Write the table here instead of stdout");
  grad->add_flag("--corrupt-backward", gc.corrupt, "Test hook: perturb dx by 0.1%")->group("");

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Forward/backward wall-time statistics");
  bench->add_option("--module", bn.module, "Module or comma-separated list")->capture_default_str();
  bench->add_option("--shape", bn.shape, "N,C,H,W")->capture_default_str();
  bench->add_option("--reps", bn.reps, "Timed repetitions (>= 10)")->capture_default_str();
  bench->add_option("--warmup", bn.warmup, "Untimed warm-up repetitions")->capture_default_str();
  bench->add_option("--seed", bn.seed, "Workload seed")->capture_default_str();
  bench->add_option("--precision", bn.precision, "f32 | f64")->capture_default_str();
  bench->add_option("--out", bn.out, "CSV output (default stdout)");

  TrainArgs tr;
  double min_acc = -1;
  auto* train = app.add_subcommand("train-toy", "Train the mini CNN on the quadrant task");
  train->add_option("--module", tr.module, "Attention module or 'none'")->capture_default_str();
  train->add_option("--steps", tr.steps, "SGD steps")->capture_default_str();
  train->add_option("--seed", tr.seed, "Seed for init and data")->capture_default_str();
  train->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
  train->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  train->add_option("--momentum", tr.momentum, "SGD momentum")->capture_default_str();
  train->add_option("--weight-decay", tr.weight_decay, "L2 weight decay")->capture_default_str();
  train->add_option("--eval-samples", tr.eval_samples, "Samples for the final accuracy")->capture_default_str();
  auto* min_opt = train->add_option("--min-accuracy", min_acc, "Exit 1 if the final accuracy is lower");
  train->add_option("--precision", tr.precision, "f64 (f32 is rejected)")->capture_default_str();
  train->add_option("--out", tr.out, "Output directory")->required();

  GradcamArgs gm;
  auto* cam = app.add_subcommand("gradcam", "Grad-CAM heatmaps (PGM) for a trained toy model");
  cam->add_option("--model", gm.model, "Model file written by train-toy")->required();
  cam->add_option("--seed", gm.seed, "Sample seed")->capture_default_str();
  cam->add_option("--samples", gm.samples, "Number of held-out samples")->capture_default_str();
  cam->add_option("--stage", gm.stage, "Target stage (post-attention activation)")->capture_default_str();
  cam->add_option("--out", gm.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*audit) return cmd_audit(au);
    if (*grad) return cmd_gradcheck(gc);
    if (*bench) return cmd_bench(bn);
    if (*train) {
      if (*min_opt) tr.min_accuracy = min_acc;
      return cmd_train_toy(tr);
    }
    if (*cam) return cmd_gradcam(gm);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace ela::cli
