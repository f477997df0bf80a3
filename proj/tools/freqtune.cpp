// freqtune command line: dataset synthesis, classifier training, universal
// perturbations and their evaluation.
//
// Exit codes: 0 success, 1 domain/data error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "freqtune/freqtune.hpp"

namespace fs = std::filesystem;
using namespace freqtune;

namespace {

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands

struct DisplayOpts {
  DisplayModel disp;

  void add(CLI::App* app) {
    app->add_option("--l-min", disp.l_min, "Display black level (cd/m^2)")
        ->capture_default_str();
    app->add_option("--l-max", disp.l_max, "Display peak luminance (cd/m^2)")
        ->capture_default_str();
    app->add_option("--code-max", disp.m, "Maximum code value")
        ->capture_default_str();
    app->add_option("--wx", disp.w_x, "Horizontal pixel size (degrees)")
        ->capture_default_str();
    app->add_option("--wy", disp.w_y, "Vertical pixel size (degrees)")
        ->capture_default_str();
  }

  DisplayModel resolve() const {
    try {
      disp.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    return disp;
  }
};

struct GainOpts {
  std::string preset;
  std::optional<double> lambda_l, lambda_h, f_c;

  void add(CLI::App* app) {
    std::vector<std::string> names;
    for (const auto& p : kGainPresets) names.emplace_back(p.name);
    app->add_option("--preset", preset, "Named gain preset")
        ->check(CLI::IsMember(names, CLI::ignore_case));
    app->add_option("--lambda-l", lambda_l, "Low-frequency gain (default 0)");
    app->add_option("--lambda-h", lambda_h, "High-frequency gain (default 3)");
    app->add_option("--fc", f_c, "Sigmoid centre in cycles/degree (default 4)");
  }

  // Explicit flags override the preset, which overrides the defaults.
  GainSchedule resolve() const {
    GainSchedule g;
    if (!preset.empty()) g = *find_preset(preset);
    if (lambda_l) g.lambda_l = *lambda_l;
    if (lambda_h) g.lambda_h = *lambda_h;
    if (f_c) g.f_c = *f_c;
    try {
      g.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    return g;
  }
};

struct AttackOpts {
  std::string variant = "ft-spgd";
  double eps = 10.0;
  AttackConfig cfg;
  std::string loss = "tar";
  std::string reparam = "clamp";
  GainOpts gain;
  DisplayOpts display;

  void add(CLI::App* app, bool with_variant = true) {
    if (with_variant)
      app->add_option("--variant", variant, "spgd, upgd, ft-spgd or ft-upgd")
          ->check(CLI::IsMember({"spgd", "upgd", "ft-spgd", "ft-upgd"}))
          ->capture_default_str();
    app->add_option("--eps", eps, "l-inf bound of the spatial variants")
        ->capture_default_str();
    app->add_option("--batch-size", cfg.batch_size)->capture_default_str();
    app->add_option("--max-epochs", cfg.max_epochs)->capture_default_str();
    app->add_option("--patience", cfg.patience)->capture_default_str();
    app->add_option("--min-improvement", cfg.min_improvement)->capture_default_str();
    app->add_option("--step", cfg.step, "Sign-step size (spatial variants)")
        ->capture_default_str();
    app->add_option("--step-decay-epochs", cfg.step_decay_epochs,
                    "UPGD halves the step this often (0 = never)")
        ->capture_default_str();
    app->add_option("--momentum", cfg.momentum, "UPGD momentum")
        ->capture_default_str();
    app->add_option("--ft-lr", cfg.ft_lr,
                    "Adam step as a fraction of each band's bound")
        ->capture_default_str();
    app->add_option("--adam-beta1", cfg.adam_beta1)->capture_default_str();
    app->add_option("--adam-beta2", cfg.adam_beta2)->capture_default_str();
    app->add_option("--loss", loss, "tar or llc")
        ->check(CLI::IsMember({"tar", "llc"}))
        ->capture_default_str();
    app->add_option("--reparam", reparam, "Band constraint: clamp or tanh")
        ->check(CLI::IsMember({"clamp", "tanh"}))
        ->capture_default_str();
    app->add_flag("--augment", cfg.augment, "Flip+crop the attack images");
    app->add_option("--epoch-samples", cfg.epoch_samples,
                    "Augmented samples per epoch (default: one pass)")
        ->capture_default_str();
    gain.add(app);
    display.add(app);
  }

  AttackConfig resolve(std::uint64_t seed) const {
    AttackConfig c = cfg;
    c.variant = *parse_variant(variant);
    c.loss = loss == "llc" ? AttackLoss::kLlc : AttackLoss::kTar;
    c.reparam = reparam == "tanh" ? Reparam::kTanh : Reparam::kClamp;
    c.seed = seed;
    if (c.batch_size == 0) throw UsageError("--batch-size must be positive");
    if (!is_frequency_tuned(c.variant) && c.reparam == Reparam::kTanh)
      throw UsageError("--reparam tanh needs a frequency-tuned variant");
    return c;
  }

  AttackBudget budget(const AttackConfig& c) const {
    AttackBudget b;
    if (is_frequency_tuned(c.variant)) {
      b.thresholds = effective_thresholds(gain.resolve(), display.resolve());
    } else {
      if (!(eps >= 0.0)) throw UsageError("--eps must be >= 0");
      b.linf_eps = eps;
    }
    return b;
  }
};

// ---------------------------------------------------------------------------
// Helpers

std::string base_path(const std::string& p) {
  std::string s = p;
  while (s.size() > 1 && (s.back() == '/' || s.back() == '\\')) s.pop_back();
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(path + ": cannot open for writing");
  os << text;
  if (!os) throw Error(path + ": write failed");
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

// Every option of the subcommand with its effective value; unset optional
// options are left out.
void write_resolved_config(const CLI::App* sub, const std::string& artifact) {
  std::vector<std::pair<std::string, std::string>> kv;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 && opt->as<bool>() ? "true" : "false";
    } else if (opt->count() > 0) {
      value = join(opt->results());
    } else {
      value = opt->get_default_str();
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']')
        value = value.substr(1, value.size() - 2);
      if (value.empty()) continue;
    }
    kv.emplace_back(name, value);
  }
  std::ofstream os(base_path(artifact) + ".resolved.cfg");
  if (!os) throw Error(base_path(artifact) + ".resolved.cfg: cannot open for writing");
  write_run_config(os, kv);
}

SplitRole parse_role(const std::string& s) {
  if (s == "train") return SplitRole::kTrain;
  if (s == "attack") return SplitRole::kAttack;
  return SplitRole::kTest;
}

LabeledSet load_data(const std::string& dir, const std::string& split) {
  return split == "all" ? load_dataset(dir) : load_dataset_split(dir, parse_role(split));
}

CLI::Option* add_split(CLI::App* app, const std::string& flag, std::string& target,
                       const std::string& help) {
  return app->add_option(flag, target, help)
      ->check(CLI::IsMember({"train", "attack", "test", "all"}))
      ->capture_default_str();
}

void check_model_data(const TexModel& m, const LabeledSet& set,
                      const std::string& model_path, const std::string& data) {
  if (set.images.front().channels != m.shape.in_channels)
    throw ShapeError(data + ": images have " +
                     std::to_string(set.images.front().channels) +
                     " channels but " + model_path + " expects " +
                     std::to_string(m.shape.in_channels));
  for (std::size_t l : set.labels)
    if (l >= m.shape.num_classes)
      throw ShapeError(data + ": more classes than " + model_path + " predicts");
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string rate_str(const Rate& r) {
  return fmt(r.value(), 4) + " (" + std::to_string(r.count) + "/" +
         std::to_string(r.total) + ")";
}

std::vector<double> parse_list(const std::vector<std::string>& raw,
                               const char* flag) {
  std::vector<double> out;
  for (const auto& s : raw) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
      throw UsageError(std::string(flag) + ": not a number: " + s);
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

// ---------------------------------------------------------------------------
// Config files: `--config file` supplies defaults for any option not given on
// the command line.

std::vector<std::string> expand_config(const CLI::App& app,
                                       std::vector<std::string> args) {
  if (args.empty() || args[0].rfind("-", 0) == 0) return args;
  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string path;
  std::size_t at = 0, span = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      at = i;
      span = 2;
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      at = i;
      span = 1;
      break;
    }
  }
  if (span == 0) return args;
  const auto entries = read_run_config(path);
  args.erase(args.begin() + static_cast<std::ptrdiff_t>(at),
             args.begin() + static_cast<std::ptrdiff_t>(at + span));
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> injected;
  for (const auto& e : entries) {
    const std::string flag = "--" + e.key;
    if (e.key == "help" || e.key == "config" ||
        sub->get_option_no_throw(flag) == nullptr)
      throw UsageError(path + ":" + std::to_string(e.line) + ": unknown key '" +
                       e.key + "' for " + args[0]);
    if (!given(flag)) injected.push_back(flag + "=" + e.value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-tuned universal adversarial perturbations for texture classifiers"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::simple);

  std::string config_path;  // consumed by expand_config, listed for --help
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "key=value file; command-line flags take precedence");
  };

  // jnd-table -------------------------------------------------------------
  auto* jnd = app.add_subcommand("jnd-table", "Print the 8x8 DCT JND threshold matrix");
  DisplayOpts jnd_display;
  GainOpts jnd_gain;
  bool jnd_effective = false;
  std::string jnd_csv;
  add_config(jnd);
  jnd_display.add(jnd);
  jnd_gain.add(jnd);
  jnd->add_flag("--effective", jnd_effective, "Print gain-scaled thresholds");
  jnd->add_option("--csv", jnd_csv, "Also write the matrix as CSV");

  // synth -----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate the procedural texture data set");
  SynthSpec spec;
  double attack_fraction = 0.15, test_fraction = 0.15;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  add_config(synth);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", spec.num_classes)->capture_default_str();
  synth->add_option("--per-class", spec.images_per_class)->capture_default_str();
  synth->add_option("--size", spec.image_size)->capture_default_str();
  synth->add_option("--noise", spec.noise_level, "Noise std-dev (code values)")
      ->capture_default_str();
  synth->add_option("--contrast", spec.contrast, "Texture amplitude multiplier")
      ->capture_default_str();
  synth->add_option("--channels", spec.channels)->capture_default_str();
  synth->add_option("--attack-fraction", attack_fraction)->capture_default_str();
  synth->add_option("--test-fraction", test_fraction)->capture_default_str();
  synth->add_option("--seed", synth_seed)->required();

  // train -----------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the texture classifier");
  TrainOptions topt;
  std::string train_data, train_out, train_split = "train", heldout_split = "test";
  add_config(train);
  train->add_option("--data", train_data, "Data set directory")->required();
  add_split(train, "--split", train_split, "Training split");
  add_split(train, "--heldout-split", heldout_split, "Held-out split");
  train->add_option("--epochs", topt.epochs)->capture_default_str();
  train->add_option("--batch-size", topt.batch_size)->capture_default_str();
  train->add_option("--lr", topt.lr)->capture_default_str();
  train->add_option("--momentum", topt.momentum, "0 gives plain SGD")
      ->capture_default_str();
  train->add_option("--seed", topt.seed)->required();
  train->add_option("--out", train_out, "Model file (.fttx)")->required();

  // attack ----------------------------------------------------------------
  auto* attack = app.add_subcommand("attack", "Compute a universal perturbation");
  AttackOpts aopt;
  std::string attack_model, attack_data, attack_split = "attack", attack_out;
  std::uint64_t attack_seed = 0;
  add_config(attack);
  attack->add_option("--model", attack_model)->required();
  attack->add_option("--data", attack_data)->required();
  add_split(attack, "--split", attack_split, "Split the perturbation is fitted on");
  aopt.add(attack);
  attack->add_option("--seed", attack_seed)->required();
  attack->add_option("--out", attack_out, "Perturbation file (.ftup)")->required();

  // apply -----------------------------------------------------------------
  auto* apply = app.add_subcommand("apply", "Add a perturbation to an image or data set");
  std::string apply_pert, apply_in, apply_out;
  add_config(apply);
  apply->add_option("--pert", apply_pert)->required();
  apply->add_option("--in", apply_in, "Image file or data set directory")->required();
  apply->add_option("--out", apply_out, "Image file or directory")->required();

  // eval ------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Fooling rate, accuracy and perceptibility");
  std::vector<std::string> eval_models, eval_perts;
  std::string eval_data, eval_split = "test", eval_adv, eval_out, eval_label;
  std::uint64_t eval_seed = 0;
  bool eval_random = false, eval_cross = false;
  add_config(eval);
  eval->add_option("--model", eval_models, "Model file; repeat with --cross")
      ->required()
      ->delimiter(',');
  eval->add_option("--data", eval_data, "Clean data set directory")->required();
  add_split(eval, "--split", eval_split, "Split to evaluate");
  eval->add_option("--pert", eval_perts, "Perturbation file; repeat with --cross")
      ->delimiter(',');
  eval->add_option("--adv-data", eval_adv,
                   "Directory of already perturbed images (from apply)");
  eval->add_option("--label", eval_label, "Variant column of the report");
  eval->add_flag("--random-baseline", eval_random,
                 "Add a row for a random perturbation with the same constraint");
  eval->add_flag("--cross", eval_cross, "Write the model x perturbation matrix");
  eval->add_option("--seed", eval_seed, "Seed column / random baseline seed")
      ->capture_default_str();
  eval->add_option("--out", eval_out, "report.csv or cross.csv")->required();

  // sweep -----------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Fooling rate against attack-set size");
  AttackOpts sopt;
  std::string sweep_model, sweep_data, sweep_attack_split = "attack",
                                       sweep_test_split = "test", sweep_out,
                                       sweep_aug = "both";
  std::vector<std::string> sweep_fractions{"1", "0.5", "0.25", "0.1", "0.05"};
  std::uint64_t sweep_seed = 0;
  add_config(sweep);
  sweep->add_option("--model", sweep_model)->required();
  sweep->add_option("--data", sweep_data)->required();
  add_split(sweep, "--attack-split", sweep_attack_split, "Split the attacks use");
  add_split(sweep, "--test-split", sweep_test_split, "Split the FR is measured on");
  sopt.add(sweep);
  sweep->add_option("--fractions", sweep_fractions, "Attack-set fractions")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--augmentation", sweep_aug, "off, on or both")
      ->check(CLI::IsMember({"off", "on", "both"}))
      ->capture_default_str();
  sweep->add_option("--seed", sweep_seed)->required();
  sweep->add_option("--out", sweep_out, "sweep.csv")->required();

  // ablate ----------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "Grid over the gain schedule");
  AttackOpts bopt;
  bopt.variant = "ft-spgd";
  std::string ablate_model, ablate_data, ablate_attack_split = "attack",
                                         ablate_test_split = "test", ablate_out;
  std::vector<std::string> ll_values{"0"}, lh_values{"1", "2", "3"}, fc_values{"4"};
  std::uint64_t ablate_seed = 0;
  add_config(ablate);
  ablate->add_option("--model", ablate_model)->required();
  ablate->add_option("--data", ablate_data)->required();
  add_split(ablate, "--attack-split", ablate_attack_split, "Split the attacks use");
  add_split(ablate, "--test-split", ablate_test_split, "Split the FR is measured on");
  bopt.add(ablate);
  ablate->add_option("--lambda-l-values", ll_values)->delimiter(',')->capture_default_str();
  ablate->add_option("--lambda-h-values", lh_values)->delimiter(',')->capture_default_str();
  ablate->add_option("--fc-values", fc_values)->delimiter(',')->capture_default_str();
  ablate->add_option("--seed", ablate_seed)->required();
  ablate->add_option("--out", ablate_out, "ablation.csv")->required();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*jnd) {
      const DisplayModel disp = jnd_display.resolve();
      const ThresholdMatrix t = jnd_effective
                                    ? effective_thresholds(jnd_gain.resolve(), disp)
                                    : jnd_matrix(disp);
      std::cout << format_matrix(t, 2, " ");
      if (!jnd_csv.empty()) {
        write_text(jnd_csv, to_csv(t));
        write_resolved_config(jnd, jnd_csv);
      }
    } else if (*synth) {
      try {
        spec.seed = synth_seed;
        spec.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const LabeledSet set = synth_dataset(spec);
      const auto roles = split_roles(set, synth_seed, attack_fraction, test_fraction);
      save_dataset(synth_out, set, &roles);
      write_resolved_config(synth, synth_out);
      std::size_t counts[3] = {0, 0, 0};
      for (auto r : roles) ++counts[static_cast<int>(r)];
      std::cout << "wrote " << set.size() << " images to " << synth_out
                << " (train " << counts[0] << ", attack " << counts[1]
                << ", test " << counts[2] << ")\n";
    } else if (*train) {
      const LabeledSet tr = load_data(train_data, train_split);
      const LabeledSet ho = load_data(train_data, heldout_split);
      const ModelShape shape{tr.images.front().channels, tr.num_classes()};
      if (topt.batch_size == 0) throw UsageError("--batch-size must be positive");
      const TrainResult r =
          train_classifier(TexModel::initialized(shape, topt.seed), tr, ho, topt);
      save_model(r.model, train_out);
      std::string hist = "epoch,train_loss,heldout_top1\n";
      for (const auto& e : r.history)
        hist += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," +
                fmt(e.heldout_top1) + "\n";
      write_text(base_path(train_out) + ".history.csv", hist);
      write_resolved_config(train, train_out);
      std::cout << "held-out top-1 "
                << fmt(r.history.empty() ? accuracy(r.model, ho)
                                         : r.history.back().heldout_top1,
                       4)
                << " after " << r.history.size() << " epochs\n";
    } else if (*attack) {
      const AttackConfig cfg = aopt.resolve(attack_seed);
      const AttackBudget budget = aopt.budget(cfg);
      const TexModel model = load_model(attack_model);
      const LabeledSet set = load_data(attack_data, attack_split);
      check_model_data(model, set, attack_model, attack_data);
      const AttackResult r = run_attack(model, set, cfg, budget);
      save_perturbation(r.perturbation, attack_out);
      write_text(base_path(attack_out) + ".curve.csv", curve_csv(r.curve));
      write_resolved_config(attack, attack_out);
      std::cout << to_string(cfg.variant) << ": attack-set fooling rate "
                << fmt(r.best_fooling_rate, 4) << " after " << r.curve.size()
                << " epochs\n";
    } else if (*apply) {
      const Perturbation p = load_perturbation(apply_pert);
      if (fs::is_directory(apply_in)) {
        std::vector<std::string> rel;
        const LabeledSet set = load_dataset(apply_in, &rel);
        for (std::size_t i = 0; i < set.size(); ++i) {
          const fs::path dst = fs::path(apply_out) / rel[i];
          fs::create_directories(dst.parent_path());
          save_image(dst, apply_perturbation(set.images[i], p));
        }
        const fs::path manifest = fs::path(apply_in) / kSplitManifest;
        if (fs::exists(manifest))
          fs::copy_file(manifest, fs::path(apply_out) / kSplitManifest,
                        fs::copy_options::overwrite_existing);
        std::cout << "perturbed " << set.size() << " images into " << apply_out
                  << "\n";
      } else {
        save_image(apply_out, apply_perturbation(load_image(apply_in), p));
        std::cout << "wrote " << apply_out << "\n";
      }
      write_resolved_config(apply, apply_out);
    } else if (*eval) {
      const LabeledSet set = load_data(eval_data, eval_split);
      std::vector<TexModel> models;
      for (const auto& m : eval_models) {
        models.push_back(load_model(m));
        check_model_data(models.back(), set, m, eval_data);
      }
      if (eval_cross) {
        if (eval_perts.empty()) throw UsageError("--cross needs --pert");
        std::vector<Perturbation> perts;
        std::vector<std::string> sources, targets;
        for (const auto& p : eval_perts) {
          perts.push_back(load_perturbation(p));
          sources.push_back(stem(p));
        }
        for (const auto& m : eval_models) targets.push_back(stem(m));
        const CrossModelMatrix cm = cross_model_matrix(models, set, perts);
        write_text(eval_out, cross_csv(cm, sources, targets));
        for (std::size_t i = 0; i < perts.size(); ++i)
          std::cout << sources[i] << ": mean fooling rate " << fmt(cm.row_means[i], 4)
                    << "\n";
      } else {
        if (models.size() != 1 || eval_perts.size() > 1)
          throw UsageError("several models or perturbations need --cross");
        if (eval_perts.empty() == eval_adv.empty())
          throw UsageError("give exactly one of --pert and --adv-data");
        std::vector<AttackReport> rows;
        std::optional<Perturbation> pert;
        if (!eval_adv.empty()) {
          const LabeledSet adv = load_data(eval_adv, eval_split);
          if (adv.labels != set.labels)
            throw ShapeError(eval_adv + ": images do not pair with " + eval_data);
          rows.push_back(make_report_pairs(models[0], set, adv.images,
                                           eval_label.empty() ? "adv" : eval_label,
                                           eval_seed));
        } else {
          pert = load_perturbation(eval_perts[0]);
          rows.push_back(make_report(models[0], set, *pert,
                                     eval_label.empty() ? stem(eval_perts[0]) : eval_label,
                                     eval_seed));
        }
        if (eval_random) {
          if (!pert) throw UsageError("--random-baseline needs --pert");
          AttackBudget b;
          if (pert->is_bands())
            b.thresholds = pert->thresholds;
          else
            b.linf_eps = pert->linf_eps;
          const Perturbation rp =
              random_perturbation(pert->spatial.channels, pert->spatial.height,
                                  pert->spatial.width, b, eval_seed);
          rows.push_back(make_report(models[0], set, rp, "random", eval_seed));
        }
        write_text(eval_out, report_csv(rows));
        for (const auto& r : rows)
          std::cout << r.variant << ": fooling rate " << rate_str(r.fooling)
                    << ", clean top-1 " << rate_str(r.clean_top1)
                    << ", perturbed top-1 " << rate_str(r.perturbed_top1)
                    << ", PSNR " << csv_number(r.psnr_db) << " dB\n";
      }
      write_resolved_config(eval, eval_out);
    } else if (*sweep) {
      const AttackConfig cfg = sopt.resolve(sweep_seed);
      const AttackBudget budget = sopt.budget(cfg);
      const auto fractions = parse_list(sweep_fractions, "--fractions");
      const TexModel model = load_model(sweep_model);
      const LabeledSet aset = load_data(sweep_data, sweep_attack_split);
      const LabeledSet tset = load_data(sweep_data, sweep_test_split);
      check_model_data(model, aset, sweep_model, sweep_data);
      std::vector<SweepPoint> rows;
      for (bool aug : {false, true}) {
        if ((aug && sweep_aug == "off") || (!aug && sweep_aug == "on")) continue;
        auto pts = data_size_sweep(model, aset, tset, fractions, aug, cfg, budget);
        rows.insert(rows.end(), pts.begin(), pts.end());
      }
      write_text(sweep_out, sweep_csv(rows));
      write_resolved_config(sweep, sweep_out);
      for (const auto& r : rows)
        std::cout << "fraction " << fmt(r.fraction, 3) << (r.augment ? " +aug" : "     ")
                  << " (" << r.attack_images << " images): fooling rate "
                  << fmt(r.fr, 4) << "\n";
    } else if (*ablate) {
      const AttackConfig cfg = bopt.resolve(ablate_seed);
      if (!is_frequency_tuned(cfg.variant))
        throw UsageError("ablate needs a frequency-tuned --variant");
      const auto ll = parse_list(ll_values, "--lambda-l-values");
      const auto lh = parse_list(lh_values, "--lambda-h-values");
      const auto fc = parse_list(fc_values, "--fc-values");
      for (double v : ll)
        if (v < 0) throw UsageError("--lambda-l-values must be >= 0");
      for (double v : lh)
        if (v < 0) throw UsageError("--lambda-h-values must be >= 0");
      for (double v : fc)
        if (v < 0) throw UsageError("--fc-values must be >= 0");
      const TexModel model = load_model(ablate_model);
      const LabeledSet aset = load_data(ablate_data, ablate_attack_split);
      const LabeledSet tset = load_data(ablate_data, ablate_test_split);
      check_model_data(model, aset, ablate_model, ablate_data);
      const auto rows = ablation_grid(model, aset, tset, ll, lh, fc, cfg,
                                      bopt.display.resolve());
      write_text(ablate_out, ablation_csv(rows));
      write_resolved_config(ablate, ablate_out);
      for (const auto& r : rows)
        std::cout << "lambda_l " << fmt(r.lambda_l, 2) << " lambda_h "
                  << fmt(r.lambda_h, 2) << " f_c " << fmt(r.f_c, 2)
                  << ": fooling rate " << fmt(r.fr, 4) << ", PSNR "
                  << csv_number(r.psnr_db) << " dB\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
