// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/cli.hpp"

#include "cca/harness/demo_train.hpp"
#include "cca/harness/det_io.hpp"
#include "cca/harness/gradcheck_suite.hpp"
#include "cca/harness/run_config.hpp"
#include "cca/harness/synthetic.hpp"
#include "cca/harness/tensor_file.hpp"
#include "cca/params.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

namespace cca::harness {

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dtype;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file (defaults apply when omitted)");
    cmd->add_option("--seed", seed, "overrides the config seed");
    cmd->add_option("--dtype", dtype, "f32 or f64; overrides the config dtype")
        ->check(CLI::IsMember({"f32", "f64"}));
  }

  RunConfig resolve() const {
    RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed) rc.seed = *seed;
    if (dtype) rc.dtype = parse_dtype(*dtype);
    return rc;
  }
};

template <typename Scalar>
void print_keys(std::ostream& out, const GcfcTrace<Scalar>& g) {
  out << "\nbatch  key      x      y         score\n";
  for (std::size_t n = 0; n < g.keys.size(); ++n) {
    const auto& k = g.keys[n];
    for (std::size_t i = 0; i < k.positions.size(); ++i) {
      out << std::setw(5) << n << std::setw(5) << i << std::setw(7) << k.positions[i].x
          << std::setw(7) << k.positions[i].y << std::setw(14) << std::setprecision(6)
          << double(k.raw_scores[i]) << '\n';
    }
  }
}

template <typename Scalar>
int forward(const RunConfig& rc, const AnyTensor& input, bool zeroed, const std::string& out_path,
            std::ostream& out) {
  const Tensor<Scalar> x = std::visit([](const auto& t) { return t.template cast<Scalar>(); }, input);
  auto params = make_cca_params<Scalar>(rc.cca, rc.seed);
  if (zeroed) zero_weights(params);
  const auto trace = cca_forward_traced(x, params);

  const auto row = [&](const std::string& stage, const std::string& shape) {
    out << std::left << std::setw(14) << stage << shape << std::right << '\n';
  };
  const auto tokens = [&](const auto& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  };
  row("stage", "shape");
  row("input", to_string(x.shape()));
  row("conv1", to_string(trace.f1.shape()));
  row("conv2", to_string(trace.f2.shape()));
  row("lcfe", to_string(trace.lcfe.output.shape()));
  row("gcfc.scores", to_string(trace.gcfc.scores.shape()));
  for (std::size_t n = 0; n < trace.tokens.size(); ++n) {
    row("tokens[" + std::to_string(n) + "]", tokens(trace.tokens[n]));
  }
  row("context", to_string(trace.context.shape()));
  row("concat", to_string(trace.fused.shape()));
  row("conv3", to_string(trace.output.shape()));
  print_keys(out, trace.gcfc);

  if (!out_path.empty()) {
    save_tensor(out_path, trace.output);
    out << "\nwrote " << out_path << '\n';
  }
  return kExitOk;
}

void print_table(std::ostream& out, const CostTable& t, const char* unit) {
  out << std::left << std::setw(18) << "stage" << std::right << std::setw(16) << unit << '\n';
  for (const auto& s : t.stages) {
    out << std::left << std::setw(18) << s.stage << std::right << std::setw(16) << s.count << '\n';
  }
  out << std::left << std::setw(18) << "total" << std::right << std::setw(16) << t.total() << '\n';
}

Shape parse_shape(const std::vector<std::size_t>& dims) {
  if (dims.size() != 4) throw CLI::ValidationError("--input", "expects N,C,H,W");
  return {dims[0], dims[1], dims[2], dims[3]};
}

int eval_map(const RunConfig& rc, const std::string& det_path, const std::string& gt_path,
             std::vector<double> thresholds, std::ostream& out, std::ostream& err) {
  const auto dets = load_detections(det_path);
  const auto gts = load_ground_truths(gt_path);
  if (thresholds.empty()) thresholds = {0.5};
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("IoU thresholds must lie in (0, 1]");
  }
  if (dets.empty() && gts.empty()) {
    err << "eval-map: no classes in either file; mAP is undefined\n";
    return kExitInvalid;
  }
  out << std::fixed << std::setprecision(6);
  out << "  iou  class          ap\n";
  for (double t : thresholds) {
    for (const auto& c : metrics::per_class_ap(dets, gts, t, rc.interpolation)) {
      out << std::setw(5) << std::setprecision(2) << t << std::setw(7) << c.class_id
          << std::setw(12) << std::setprecision(6) << c.ap << '\n';
    }
  }
  out << '\n';
  for (double t : thresholds) {
    out << "mAP@" << std::setprecision(2) << t << "      " << std::setprecision(6)
        << metrics::map_at(dets, gts, t, rc.interpolation) << '\n';
  }
  out << "mAP@.5:.95   " << metrics::map_range(dets, gts, {}, rc.interpolation) << '\n';
  out << std::defaultfloat;
  return kExitOk;
}

int gradcheck(const RunConfig& rc, std::ostream& out) {
  const auto result = run_gradcheck_suite(rc.cca, rc.seed, rc.gradcheck_tolerance);
  out << "tolerance " << rc.gradcheck_tolerance << " (64-bit, central differences)\n\n";
  out << std::left << std::setw(18) << "stage" << std::right << std::setw(8) << "values"
      << std::setw(14) << "max error" << "  result\n";
  for (const auto& s : result.stages) {
    std::size_t values = 0;
    for (const auto& e : s.report.entries) values += e.count;
    out << std::left << std::setw(18) << s.stage << std::right << std::setw(8) << values
        << std::setw(14) << std::setprecision(3) << std::scientific << s.report.max_rel_error()
        << std::defaultfloat << "  " << (s.report.passed() ? "pass" : "FAIL") << '\n';
    if (!s.report.passed()) {
      for (const auto& e : s.report.entries) {
        if (!e.pass) out << "    " << e.name << " worst index " << e.worst_index << '\n';
      }
    }
  }
  for (const auto& m : result.missing) out << std::left << std::setw(18) << m << "missing  FAIL\n";
  out << "\n" << (result.passed() ? "PASS" : "FAIL") << '\n';
  return result.passed() ? kExitOk : kExitInvalid;
}

int demo(const RunConfig& rc, const std::string& out_dir, std::ostream& out) {
  const DemoResult r = demo_train(rc, rc.seed);
  if (out_dir.empty()) {
    write_loss_trace(out, r);
    write_key_trace(out, r);
  } else {
    std::filesystem::create_directories(out_dir);
    std::ofstream loss(std::filesystem::path(out_dir) / "loss.txt");
    std::ofstream keys(std::filesystem::path(out_dir) / "keys.txt");
    if (!loss || !keys) throw std::runtime_error("cannot write traces under " + out_dir);
    write_loss_trace(loss, r);
    write_key_trace(keys, r);
  }
  out << "# epochs " << rc.demo.epochs << "  seed " << rc.seed << '\n';
  out << "# loss " << r.initial_loss() << " -> " << r.final_loss() << '\n';
  out << "# patch centers:";
  for (const auto& p : r.patches) out << " (" << p.center().x << "," << p.center().y << ")";
  out << "\n# final keys:";
  for (const auto& k : r.keys.back()) out << " (" << k.x << "," << k.y << ")";
  out << "\n# keys within " << rc.demo.key_radius
      << " of a patch center: " << r.keys_near_patches(rc.demo.key_radius) << '\n';
  return kExitOk;
}

template <typename Scalar>
int synthetic(const RunConfig& rc, const std::string& out_path, const std::string& mask_path,
              std::ostream& out) {
  const auto scene = make_scene<Scalar>(rc.cca.c_in, rc.demo, rc.seed);
  save_tensor(out_path, scene.features);
  if (!mask_path.empty()) save_tensor(mask_path, scene.mask);
  out << "patch      x      y   side\n";
  for (std::size_t i = 0; i < scene.patches.size(); ++i) {
    const auto& p = scene.patches[i];
    out << std::setw(5) << i << std::setw(7) << p.top_left.x << std::setw(7) << p.top_left.y
        << std::setw(7) << p.side << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context collection block kernels and detection metrics"};
  app.require_subcommand(1);
  app.name("cca");

  Common common;
  auto* fwd = app.add_subcommand("forward", "run the block on a tensor file");
  std::string in_path, out_path, mask_path, det_path, gt_path;
  bool zeroed = false;
  common.attach(fwd);
  fwd->add_option("--in", in_path, "input tensor file")->required();
  fwd->add_option("--out", out_path, "output tensor file");
  fwd->add_flag("--zero-weights", zeroed, "zero every weight, keep biases");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every stage");
  common.attach(gc);

  auto* params = app.add_subcommand("params", "parameter count per stage");
  common.attach(params);

  auto* flops = app.add_subcommand("flops", "floating-point operations per stage");
  std::vector<std::size_t> dims;
  common.attach(flops);
  flops->add_option("--input", dims, "N,C,H,W (default 1,c_in,32,32)")->delimiter(',');

  auto* map = app.add_subcommand("eval-map", "mean average precision of a detection file");
  std::vector<double> thresholds;
  common.attach(map);
  map->add_option("--det", det_path, "detections: class conf x_min y_min x_max y_max")->required();
  map->add_option("--gt", gt_path, "ground truth: class x_min y_min x_max y_max")->required();
  map->add_option("--iou", thresholds, "IoU thresholds (default 0.5)")->delimiter(',');

  auto* dt = app.add_subcommand("demo-train", "toy objectness training on a synthetic scene");
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  common.attach(dt);
  dt->add_option("--epochs", epochs, "overrides demo.epochs");
  dt->add_option("--lr", lr, "overrides demo.learning_rate");
  dt->add_option("--out", out_path, "directory for loss.txt and keys.txt (stdout if omitted)");

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic scene as tensor files");
  common.attach(gen);
  gen->add_option("--out", out_path, "feature tensor file")->required();
  gen->add_option("--mask", mask_path, "mask tensor file");

  auto* cfg = app.add_subcommand("config", "print every config key at its default");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitIo;
  }

  try {
    if (cfg->parsed()) {
      out << default_config_text();
      return kExitOk;
    }
    RunConfig rc = common.resolve();
    rc.cca.validate();
    if (fwd->parsed()) {
      const AnyTensor input = load_tensor(in_path);
      return rc.dtype == DType::f64 ? forward<double>(rc, input, zeroed, out_path, out)
                                    : forward<float>(rc, input, zeroed, out_path, out);
    }
    if (gc->parsed()) return gradcheck(rc, out);
    if (params->parsed()) {
      print_table(out, param_count(rc.cca), "parameters");
      out << "enumerated total  " << std::setw(16)
          << enumerate_parameters<double>(make_cca_params<double>(rc.cca, rc.seed)) << '\n';
      return kExitOk;
    }
    if (flops->parsed()) {
      const Shape s = dims.empty() ? Shape{1, rc.cca.c_in, 32, 32} : parse_shape(dims);
      out << "input " << to_string(s) << "\n";
      print_table(out, flop_count(rc.cca, s), "flops");
      return kExitOk;
    }
    if (map->parsed()) return eval_map(rc, det_path, gt_path, thresholds, out, err);
    if (dt->parsed()) {
      if (epochs) rc.demo.epochs = *epochs;
      if (lr) rc.demo.learning_rate = *lr;
      return demo(rc, out_path, out);
    }
    if (gen->parsed()) {
      return rc.dtype == DType::f64 ? synthetic<double>(rc, out_path, mask_path, out)
                                    : synthetic<float>(rc, out_path, mask_path, out);
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const TensorFileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const BoxFileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {  // includes ShapeError
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitIo;
}

}  // namespace cca::harness
