#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "plexsyn/adversarial.hpp"
#include "plexsyn/cluster.hpp"
#include "plexsyn/config.hpp"
#include "plexsyn/error.hpp"
#include "plexsyn/experiment.hpp"
#include "plexsyn/linear.hpp"
#include "plexsyn/metrics.hpp"
#include "plexsyn/mlp.hpp"
#include "plexsyn/patches.hpp"
#include "plexsyn/preprocess.hpp"
#include "plexsyn/similarity.hpp"
#include "plexsyn/stack_io.hpp"
#include "plexsyn/synthetic.hpp"
#include "plexsyn/tiff.hpp"

namespace plexsyn::cli {

inline constexpr const char* version = "0.1.0";

namespace fs = std::filesystem;
using nlohmann::json;

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    fail(ErrorKind::io, "cannot initialise SHA-256");
  }
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char text[32];
  std::strftime(text, sizeof(text), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return text;
}

/// Collects inputs, outputs and stage timings for one command; the
/// manifest is written after every other output.
class Run {
 public:
  Run(std::string command, RunConfig config)
      : command_(std::move(command)), config_(std::move(config)), started_(utc_timestamp()) {}

  const RunConfig& config() const { return config_; }
  fs::path out_dir() const { return config_.out; }

  void prepare_out_dir() const {
    std::error_code ec;
    fs::create_directories(out_dir(), ec);
    if (ec || !fs::is_directory(out_dir())) {
      fail(ErrorKind::io, "cannot create output directory '" + config_.out + "'");
    }
  }

  void input(const fs::path& path) {
    inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }

  template <typename F>
  auto stage(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    const auto finish = [&] {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      stages_.push_back({{"stage", name}, {"seconds", elapsed.count()}});
    };
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto result = body();
      finish();
      return result;
    }
  }

  fs::path write_text(const std::string& name, const std::string& text) {
    const fs::path path = out_dir() / name;
    write_text_file(path, text);
    record(path);
    return path;
  }

  fs::path write_json(const std::string& name, const json& value) {
    return write_text(name, value.dump(2) + "\n");
  }

  fs::path write_stack(const fs::path& path, const ChannelStack& stack) {
    save_raw(stack, path);
    record(path);
    return path;
  }

  void record(const fs::path& path) { outputs_.push_back(path.string()); }

  const std::vector<std::string>& outputs() const { return outputs_; }

  void write_manifest() {
    for (const auto& o : outputs_) {
      if (!fs::exists(o)) fail(ErrorKind::io, "declared output '" + o + "' is missing");
    }
    const json manifest = {{"tool", "plexsyn"},
                           {"version", version},
                           {"command", command_},
                           {"started_utc", started_},
                           {"finished_utc", utc_timestamp()},
                           {"config", config_.to_json()},
                           {"inputs", inputs_},
                           {"outputs", outputs_},
                           {"stages", stages_}};
    write_text_file(out_dir() / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::string command_;
  RunConfig config_;
  std::string started_;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
  json stages_ = json::array();
};

inline std::vector<std::size_t> channel_indices(const ChannelStack& stack,
                                                const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    const std::size_t c = stack.find(n);
    require(c < stack.channels(), "channel '" + n + "' is not in the input stack");
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> channel_names(const ChannelStack& stack,
                                              const std::vector<std::size_t>& indices) {
  std::vector<std::string> out;
  for (auto i : indices) out.push_back(stack.name(i));
  return out;
}

/// Analysis products shared by analyze and train.
struct Analysis {
  ClusterPipeline pipeline;
  ChannelSelection selection;
};

inline std::size_t requested_count(const RunConfig& cfg, std::size_t channels,
                                   bool select_given) {
  if (select_given) {
    require(cfg.select >= 1, "--select must be >= 1");
    require(cfg.select < channels, "--select must leave at least one channel to predict");
    return cfg.select;
  }
  return selection_count(cfg.fraction, channels);
}

inline Analysis analyse(Run& run, const ChannelStack& stack, bool select_given) {
  const RunConfig& cfg = run.config();
  require(stack.channels() >= 2, "analysis needs at least two channels");
  const auto options = cfg.experiment_options();
  require(cfg.k <= stack.channels(), "--k exceeds the channel count");
  const std::size_t count = requested_count(cfg, stack.channels(), select_given);
  Analysis a;
  a.pipeline = run.stage("cluster", [&] { return cluster_channels(stack, options); });
  a.selection = cfg.method == "cluster"
                    ? select_by_cluster(a.pipeline.clusters, a.pipeline.similarity, count)
                    : select_random(stack.channels(), count, cfg.seed);
  return a;
}

inline int cmd_import(Run& run, const std::string& input, const std::string& output,
                      const std::vector<std::size_t>& downsample, bool normalize,
                      std::ostream& out) {
  run.prepare_out_dir();
  run.input(input);
  auto stack = run.stage("import", [&] { return import_tiff(input); });
  if (!downsample.empty()) {
    require(downsample.size() == 2, "--downsample takes H and W");
    stack = run.stage("downsample", [&] {
      return downsample_area(stack, downsample[0], downsample[1], run.config().threads);
    });
  }
  if (normalize) {
    stack = run.stage("normalize", [&] { return normalize_minmax(stack, run.config().threads); });
  }
  const fs::path target = output.empty() ? run.out_dir() / "stack.mcs1" : fs::path(output);
  run.write_stack(target, stack);
  run.write_manifest();
  out << json{{"command", "import"},
              {"output", target.string()},
              {"height", stack.height()},
              {"width", stack.width()},
              {"channels", stack.channels()},
              {"names", stack.names()}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_synth(Run& run, std::ostream& out) {
  const auto spec = run.config().synthetic_spec();
  run.prepare_out_dir();
  const auto syn = run.stage("generate", [&] { return generate_synthetic(spec); });
  const auto stack_path = run.write_stack(run.out_dir() / "stack.mcs1", syn.stack);
  run.write_json("labels.json", {{"names", syn.stack.names()},
                                 {"labels", syn.labels},
                                 {"templates", spec.template_count},
                                 {"seed", spec.seed}});
  run.write_manifest();
  out << json{{"command", "synth"},
              {"output", stack_path.string()},
              {"height", spec.height},
              {"width", spec.width},
              {"channels", spec.channel_count},
              {"templates", spec.template_count}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_analyze(Run& run, const std::string& input, bool select_given, std::ostream& out) {
  run.config().validate();
  run.prepare_out_dir();
  run.input(input);
  const auto stack = run.stage("load", [&] { return load_raw(input); });
  const auto a = analyse(run, stack, select_given);
  const auto pearson = run.stage("pearson", [&] { return pearson_matrix(stack, run.config().threads); });
  run.write_text("ssim_matrix.csv", to_csv(a.pipeline.similarity));
  run.write_text("pearson_matrix.csv", to_csv(pearson));
  run.write_json("dendrogram.json", to_json(a.pipeline.tree));
  run.write_text("dendrogram.nwk", to_newick(a.pipeline.tree, stack.names()));
  auto clusters = to_json(a.pipeline.clusters, stack.names());
  clusters["silhouette"] = mean_silhouette(to_distance(a.pipeline.similarity), a.pipeline.clusters);
  clusters["k_mode"] = run.config().k ? "fixed" : "silhouette";
  run.write_json("clusters.json", clusters);
  run.write_json("selection.json", to_json(a.selection, stack.names()));
  run.write_manifest();
  out << json{{"command", "analyze"},
              {"channels", stack.channels()},
              {"merges", a.pipeline.tree.merges.size()},
              {"k", a.pipeline.clusters.k},
              {"selected", channel_names(stack, a.selection.indices)},
              {"outputs", run.outputs()}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_experiment(Run& run, const std::string& input, std::ostream& out) {
  const RunConfig& cfg = run.config();
  cfg.validate();
  run.prepare_out_dir();
  run.input(input);
  const auto stack = run.stage("load", [&] { return load_raw(input); });
  const auto table = run.stage("experiment", [&] {
    return run_selection_experiment(stack, cfg.experiment_options());
  });
  run.write_text("experiment.csv", to_csv(table));

  json reports = json::array();
  std::vector<std::pair<double, double>> points;
  for (const auto& row : table.rows) {
    reports.push_back({{"fraction", row.fraction},
                       {"method", row.method},
                       {"seed", row.seed},
                       {"selected", channel_names(stack, row.selected)},
                       {"train", to_json(row.train_report)},
                       {"test", to_json(row.test_report)}});
    if (row.method == "cluster") {
      points.emplace_back(static_cast<double>(row.n_selected), row.test_report.normalized);
    }
  }
  run.write_json("loss_reports.json", {{"k", table.k}, {"rows", reports}});

  json regression = {{"x", "conditioning_channels"},
                     {"y", "normalized_test_l1"},
                     {"method", "cluster"}};
  json extrapolation;
  const auto no_fit = [&](const std::string& reason) {
    regression["fit"] = nullptr;
    regression["reason"] = reason;
    extrapolation = {{"fit", nullptr},
                     {"threshold", cfg.threshold},
                     {"max_channels", nullptr},
                     {"reason", reason}};
  };
  std::set<double> distinct_x;
  for (const auto& p : points) distinct_x.insert(p.first);
  if (distinct_x.size() < 2) {
    no_fit("regression needs at least two distinct conditioning channel counts");
  } else {
    try {
      const auto fit = fit_line(points);
      regression["fit"] = to_json(fit);
      extrapolation = extrapolation_json(fit, cfg.threshold);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_fit) throw;
      no_fit(e.what());
    }
  }
  run.write_json("regression.json", regression);
  run.write_json("extrapolation.json", extrapolation);
  run.write_manifest();

  std::size_t wins = 0;
  for (double f : cfg.fractions) {
    for (auto s : cfg.seeds) {
      const auto [c, r] = table.cell(f, s);
      if (c && r && c->test_l1 < r->test_l1) ++wins;
    }
  }
  out << json{{"command", "experiment"},
              {"rows", table.rows.size()},
              {"k", table.k},
              {"cluster_wins", wins},
              {"cells", cfg.fractions.size() * cfg.seeds.size()},
              {"max_channels", extrapolation["max_channels"]},
              {"outputs", run.outputs()}}
             .dump()
      << "\n";
  return 0;
}

/// Geometry and parameters of a trained predictor, as stored in model.json.
struct SavedModel {
  std::string kind;  // "linear" or "adversarial"
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::size_t radius = 0;
  std::size_t stride = 1;
  LinearModel linear;
  Mlp generator;

  std::size_t feature_dim() const {
    return kind == "linear" ? linear.feature_dim : generator.input_size();
  }
};

inline SavedModel load_model(const fs::path& path) {
  json j;
  try {
    const auto bytes = read_file_bytes(path);
    j = json::parse(std::string(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    fail(ErrorKind::format, "model file is not valid JSON: " + std::string(e.what()));
  }
  try {
    SavedModel m;
    m.kind = j.at("kind").get<std::string>();
    m.sources = j.at("sources").get<std::vector<std::string>>();
    m.targets = j.at("targets").get<std::vector<std::string>>();
    m.radius = j.at("radius").get<std::size_t>();
    m.stride = j.at("stride").get<std::size_t>();
    require(m.kind == "linear" || m.kind == "adversarial", "unknown model kind");
    if (m.kind == "linear") {
      m.linear = linear_from_json(j.at("model"));
    } else {
      m.generator = mlp_from_json(j.at("generator"));
    }
    const std::size_t side = 2 * m.radius + 1;
    require(m.feature_dim() == m.sources.size() * side * side,
            "model feature dimension does not match its sources and radius");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::format, "model file is missing fields: " + std::string(e.what()));
  }
}

/// Predicts model targets from a stack that holds (at least) the sources.
inline PredictedChannels predict_with(const SavedModel& m, const ChannelStack& stack,
                                      unsigned threads) {
  const auto sources = channel_indices(stack, m.sources);
  // Targets need not exist in the input; a zero placeholder stands in.
  const ChannelStack conditioning = stack.subset(sources);
  auto names = conditioning.names();
  std::vector<float> data(conditioning.data().begin(), conditioning.data().end());
  std::vector<std::size_t> target_slots;
  for (std::size_t t = 0; t < m.targets.size(); ++t) {
    std::string placeholder = "target_" + std::to_string(t);
    while (std::find(names.begin(), names.end(), placeholder) != names.end()) placeholder += "_";
    names.push_back(placeholder);
    target_slots.push_back(names.size() - 1);
    data.resize(data.size() + stack.pixels(), 0.0f);
  }
  const ChannelStack work(stack.height(), stack.width(), names, data);
  ChannelSelection sel;
  sel.indices.resize(sources.size());
  std::iota(sel.indices.begin(), sel.indices.end(), std::size_t{0});
  if (m.kind == "linear") {
    return predict(m.linear, work, sel, target_slots, m.radius, m.stride, threads);
  }
  return predict(m.generator, work, sel, target_slots, m.radius, m.stride, threads);
}

inline int cmd_train(Run& run, const std::string& input, const std::string& selection_path,
                     bool select_given, std::ostream& out) {
  const RunConfig& cfg = run.config();
  cfg.validate();
  run.prepare_out_dir();
  run.input(input);
  const auto stack = run.stage("load", [&] { return load_raw(input); });

  ChannelSelection selection;
  if (!selection_path.empty()) {
    run.input(selection_path);
    const auto bytes = read_file_bytes(selection_path);
    try {
      const json j = json::parse(std::string(bytes.begin(), bytes.end()));
      selection = selection_from_json(j);
      if (j.contains("names")) {
        const auto named = channel_indices(stack, j.at("names").get<std::vector<std::string>>());
        std::vector<std::size_t> sorted = named;
        std::sort(sorted.begin(), sorted.end());
        require(sorted == selection.indices, "selection indices and names disagree with the stack");
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::format, "selection file is not valid: " + std::string(e.what()));
    }
    for (auto i : selection.indices) require(i < stack.channels(), "selection index out of range");
    require(selection.indices.size() < stack.channels(),
            "selection must leave at least one channel to predict");
  } else {
    selection = analyse(run, stack, select_given).selection;
  }

  const auto targets = complement(selection.indices, stack.channels());
  const auto data = run.stage("patches", [&] {
    return extract_patches(stack, selection, targets, cfg.radius, cfg.stride);
  });
  const auto split = split_indices(data.rows(), cfg.train_fraction, derive_seed(cfg.seed, 7));
  const auto train = data.subset(split.train);
  const auto test = data.subset(split.test);
  const auto tc = cfg.train_config();

  json model = {{"kind", cfg.model},
                {"sources", channel_names(stack, selection.indices)},
                {"targets", channel_names(stack, targets)},
                {"radius", cfg.radius},
                {"stride", cfg.stride},
                {"train_config", to_json(tc)}};
  double train_l1 = 0.0;
  double test_l1 = 0.0;
  if (cfg.model == "linear") {
    const auto result = run.stage("train", [&] { return train_linear_l1(train, tc); });
    model["model"] = to_json(result.model);
    train_l1 = dataset_l1(result.model, train);
    test_l1 = dataset_l1(result.model, test);
    std::string csv = "epoch,l1\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      csv += std::to_string(e + 1) + "," + format_double(result.epoch_loss[e]) + "\n";
    }
    run.write_text("history.csv", csv);
  } else {
    std::vector<std::size_t> g_sizes = {data.feature_dim};
    std::vector<std::size_t> d_sizes = {data.feature_dim + data.target_count};
    for (auto h : cfg.hidden) {
      g_sizes.push_back(h);
      d_sizes.push_back(h);
    }
    g_sizes.push_back(data.target_count);
    d_sizes.push_back(1);
    const auto result = run.stage("train", [&] { return train_adversarial(train, g_sizes, d_sizes, tc); });
    model["generator"] = to_json(result.generator);
    model["discriminator"] = to_json(result.discriminator);
    train_l1 = l1_loss(predict_rows(result.generator, train), train.target_values);
    test_l1 = l1_loss(predict_rows(result.generator, test), test.target_values);
    run.write_text("history.csv", history_csv(result.history));
  }
  run.write_json("model.json", model);
  run.write_json("training.json", {{"train_rows", train.rows()},
                                   {"test_rows", test.rows()},
                                   {"train_l1", train_l1},
                                   {"test_l1", test_l1}});
  run.write_manifest();
  out << json{{"command", "train"},
              {"model", cfg.model},
              {"sources", model["sources"]},
              {"targets", model["targets"]},
              {"train_l1", train_l1},
              {"test_l1", test_l1},
              {"outputs", run.outputs()}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_predict(Run& run, const std::string& input, const std::string& model_path,
                       std::ostream& out) {
  run.config().validate();
  run.prepare_out_dir();
  run.input(input);
  run.input(model_path);
  const auto stack = run.stage("load", [&] { return load_raw(input); });
  const auto model = load_model(model_path);
  const auto predicted = run.stage("predict", [&] { return predict_with(model, stack, run.config().threads); });
  const auto path = run.write_stack(run.out_dir() / "predicted.mcs1", predicted.to_stack(model.targets));
  std::size_t valid = 0;
  for (auto v : predicted.valid) valid += v;
  run.write_manifest();
  out << json{{"command", "predict"},
              {"output", path.string()},
              {"targets", model.targets},
              {"valid_pixels", valid},
              {"height", predicted.height},
              {"width", predicted.width}}
             .dump()
      << "\n";
  return 0;
}

inline int cmd_evaluate(Run& run, const std::string& input, const std::string& model_path,
                        const std::string& predicted_path, std::ostream& out) {
  run.config().validate();
  run.prepare_out_dir();
  run.input(input);
  run.input(model_path);
  const auto stack = run.stage("load", [&] { return load_raw(input); });
  const auto model = load_model(model_path);
  const auto targets = channel_indices(stack, model.targets);

  PredictedChannels predicted;
  if (predicted_path.empty()) {
    predicted = run.stage("predict", [&] { return predict_with(model, stack, run.config().threads); });
  } else {
    run.input(predicted_path);
    const auto file = load_raw(predicted_path);
    require(file.height() == stack.height() && file.width() == stack.width(),
            "predicted stack dimensions differ from the input");
    const auto idx = channel_indices(file, model.targets);
    predicted.height = file.height();
    predicted.width = file.width();
    for (auto i : idx) {
      const auto ch = file.channel(i);
      predicted.values.insert(predicted.values.end(), ch.begin(), ch.end());
    }
    predicted.valid.assign(stack.pixels(), 0);
    for (const auto& [y, x] : patch_centers(stack.height(), stack.width(), model.radius, model.stride)) {
      predicted.valid[y * stack.width() + x] = 1;
    }
  }

  std::vector<std::pair<std::string, double>> per_channel;
  json variance = json::array();
  std::vector<float> maps;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto real = stack.channel(targets[t]);
    const auto gen = predicted.channel(t);
    per_channel.emplace_back(model.targets[t], masked_l1(gen, real, predicted.valid));
    const auto v = pixel_variance_map(real, gen, predicted.valid);
    variance.push_back({{"channel", model.targets[t]}, {"mean", v.mean}, {"max", v.max}});
    for (double m : v.map) maps.push_back(static_cast<float>(m));
  }
  const auto report = make_loss_report(per_channel);
  run.write_json("evaluation.json", {{"loss", to_json(report)},
                                     {"variance", variance},
                                     {"threshold", run.config().threshold},
                                     {"below_threshold", report.normalized < run.config().threshold}});
  run.write_stack(run.out_dir() / "variance.mcs1",
                  ChannelStack(stack.height(), stack.width(), model.targets, maps));
  run.write_manifest();
  out << json{{"command", "evaluate"},
              {"total", report.total},
              {"normalized", report.normalized},
              {"n_prediction_channels", report.n_prediction_channels},
              {"outputs", run.outputs()}}
             .dump()
      << "\n";
  return 0;
}

/// Entry point: `args` excludes the program name. Returns the exit status
/// (0 success, 1 I/O failure, 2 invalid input or usage).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Channel similarity analysis and selection-guided channel synthesis", "plexsyn"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the command name
  app.set_version_flag("--version", version);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "base random seed");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");

  // Per-command flags land here as raw text and override the config.
  std::vector<std::pair<CLI::Option*, std::string>> overrides;
  std::map<std::string, std::string> values;
  const auto setting = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                           const std::string& help) {
    auto* opt = cmd->add_option(flag, values[key], help);
    overrides.emplace_back(opt, key);
    return opt;
  };

  std::string input;
  std::string output;
  std::string selection_path;
  std::string model_path;
  std::string predicted_path;
  std::vector<std::size_t> downsample;
  bool normalize = false;

  auto* imp = app.add_subcommand("import", "convert a multi-page TIFF into an MCS1 stack");
  imp->add_option("input", input, "TIFF file")->required();
  imp->add_option("-o,--output", output, "output .mcs1 path (default OUT/stack.mcs1)");
  imp->add_option("--downsample", downsample, "target height and width")->expected(2);
  imp->add_flag("--normalize", normalize, "min-max normalise each channel");

  auto* syn = app.add_subcommand("synth", "generate a synthetic stack with known templates");
  setting(syn, "--height", "height", "image height");
  setting(syn, "--width", "width", "image width");
  setting(syn, "--channels", "channels", "channel count");
  setting(syn, "--templates", "templates", "template count K");
  setting(syn, "--noise", "noise", "Gaussian noise sigma");
  setting(syn, "--blobs", "blobs", "blobs per template");

  auto* ana = app.add_subcommand("analyze", "SSIM and Pearson matrices, clustering, selection");
  ana->add_option("input", input, ".mcs1 stack")->required();

  auto* exp = app.add_subcommand("experiment", "cluster-guided versus random selection");
  exp->add_option("input", input, ".mcs1 stack")->required();
  setting(exp, "--fractions", "fractions", "comma-separated selection fractions");
  setting(exp, "--seeds", "seeds", "comma-separated seeds");
  setting(exp, "--threshold", "threshold", "normalised loss threshold for extrapolation");

  auto* trn = app.add_subcommand("train", "fit a predictor for the non-selected channels");
  trn->add_option("input", input, ".mcs1 stack")->required();
  trn->add_option("--selection", selection_path, "selection.json from analyze");
  setting(trn, "--model", "model", "linear or adversarial");
  setting(trn, "--epochs", "epochs", "training epochs");
  setting(trn, "--lambda", "lambda", "L1 weight");

  auto* prd = app.add_subcommand("predict", "synthesise target channels from a trained model");
  prd->add_option("input", input, ".mcs1 stack holding the model's sources")->required();
  prd->add_option("--model", model_path, "model.json from train")->required();

  auto* evl = app.add_subcommand("evaluate", "loss report and variance maps against real channels");
  evl->add_option("input", input, ".mcs1 stack holding sources and targets")->required();
  evl->add_option("--model", model_path, "model.json from train")->required();
  evl->add_option("--predicted", predicted_path, "score an existing predicted.mcs1");
  setting(evl, "--threshold", "threshold", "normalised loss threshold");

  for (auto* cmd : {ana, exp, trn}) {
    setting(cmd, "--k", "k", "cluster count (0 or auto: silhouette)");
    setting(cmd, "--linkage", "linkage", "single, complete or average");
    setting(cmd, "--ssim-mode", "ssim_mode", "windowed or global");
    setting(cmd, "--window", "window_size", "SSIM window size");
  }
  for (auto* cmd : {ana, trn}) {
    setting(cmd, "--select", "select", "number of conditioning channels");
    setting(cmd, "--fraction", "fraction", "fraction of channels to select");
    setting(cmd, "--method", "method", "cluster or random");
  }
  for (auto* cmd : {exp, trn}) {
    setting(cmd, "--radius", "radius", "patch radius");
    setting(cmd, "--stride", "stride", "patch stride");
  }

  std::vector<std::string> argv_storage = {"plexsyn"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    bool select_given = cfg.select != 0;
    for (const auto& [opt, key] : overrides) {
      if (opt->count() == 0) continue;
      cfg.set(key, values[key]);
      if (key == "select") select_given = true;
      if (key == "fraction") select_given = false;
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (out_dir) cfg.out = *out_dir;

    CLI::App* cmd = app.get_subcommands().front();
    Run run(cmd->get_name(), cfg);
    if (cmd == imp) return cmd_import(run, input, output, downsample, normalize, out);
    if (cmd == syn) return cmd_synth(run, out);
    if (cmd == ana) return cmd_analyze(run, input, select_given, out);
    if (cmd == exp) return cmd_experiment(run, input, out);
    if (cmd == trn) return cmd_train(run, input, selection_path, select_given, out);
    if (cmd == prd) return cmd_predict(run, input, model_path, out);
    if (cmd == evl) return cmd_evaluate(run, input, model_path, predicted_path, out);
    err << "error: unknown command\n";
    return 2;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == ErrorKind::io ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace plexsyn::cli
