#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plexsyn/cluster.hpp"
#include "plexsyn/error.hpp"
#include "plexsyn/experiment.hpp"
#include "plexsyn/format.hpp"
#include "plexsyn/linear.hpp"
#include "plexsyn/ssim.hpp"
#include "plexsyn/synthetic.hpp"

namespace plexsyn {

/// Every tunable of a CLI run. Populated from defaults, then a `key = value`
/// file, then command-line flags.
struct RunConfig {
  // SSIM
  std::size_t window_size = 11;
  std::string window_weighting = "gaussian";
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  std::string c3 = "auto";  // "auto" is c2 / 2, otherwise a number
  std::string ssim_mode = "windowed";

  // clustering and selection
  std::string linkage = "average";
  std::size_t k = 0;  // 0 chooses k by silhouette
  std::string method = "cluster";
  std::size_t select = 0;  // 0 derives the count from `fraction`
  double fraction = 0.25;

  // experiment
  std::vector<double> fractions = {0.25, 0.5};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  double threshold = 65.0;

  // predictor
  std::string model = "linear";
  std::vector<std::size_t> hidden = {16};
  std::size_t radius = 0;
  std::size_t stride = 1;
  std::size_t epochs = 40;
  double learning_rate = 0.02;
  std::size_t batch_size = 32;
  double lambda = 100.0;
  std::size_t d_steps = 1;
  double lr_decay = 0.1;
  double train_fraction = 0.8;

  // synthetic fixtures
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 24;
  std::size_t templates = 4;
  double noise = 0.05;
  std::size_t blobs = 10;
  double gain_min = 0.6;
  double gain_max = 1.4;
  double offset_min = 0.0;
  double offset_max = 0.2;

  // run
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "out";

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "window_size", "window_weighting", "window_sigma", "k1", "k2",
        "dynamic_range", "c3", "ssim_mode", "linkage", "k", "method", "select",
        "fraction", "fractions", "seeds", "threshold", "model", "hidden",
        "radius", "stride", "epochs", "learning_rate", "batch_size", "lambda",
        "d_steps", "lr_decay", "train_fraction", "height", "width",
        "channels", "templates", "noise", "blobs", "gain_min", "gain_max",
        "offset_min", "offset_max", "seed", "threads", "out"};
    return k;
  }

  void set(const std::string& key, const std::string& raw) {
    const std::string value(trim(raw));
    const auto list = [&]<typename T>(std::vector<T>& dst) {
      dst.clear();
      for (const auto& part : split(value, ',')) {
        if (!trim(part).empty()) dst.push_back(parse_number<T>(part, key));
      }
    };
    if (key == "window_size") window_size = parse_number<std::size_t>(value, key);
    else if (key == "window_weighting") window_weighting = value;
    else if (key == "window_sigma") window_sigma = parse_number<double>(value, key);
    else if (key == "k1") k1 = parse_number<double>(value, key);
    else if (key == "k2") k2 = parse_number<double>(value, key);
    else if (key == "dynamic_range") dynamic_range = parse_number<double>(value, key);
    else if (key == "c3") c3 = value;
    else if (key == "ssim_mode") ssim_mode = value;
    else if (key == "linkage") linkage = value;
    else if (key == "k") k = value == "auto" ? 0 : parse_number<std::size_t>(value, key);
    else if (key == "method") method = value;
    else if (key == "select") select = parse_number<std::size_t>(value, key);
    else if (key == "fraction") fraction = parse_number<double>(value, key);
    else if (key == "fractions") list(fractions);
    else if (key == "seeds") list(seeds);
    else if (key == "threshold") threshold = parse_number<double>(value, key);
    else if (key == "model") model = value;
    else if (key == "hidden") list(hidden);
    else if (key == "radius") radius = parse_number<std::size_t>(value, key);
    else if (key == "stride") stride = parse_number<std::size_t>(value, key);
    else if (key == "epochs") epochs = parse_number<std::size_t>(value, key);
    else if (key == "learning_rate") learning_rate = parse_number<double>(value, key);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(value, key);
    else if (key == "lambda") lambda = parse_number<double>(value, key);
    else if (key == "d_steps") d_steps = parse_number<std::size_t>(value, key);
    else if (key == "lr_decay") lr_decay = parse_number<double>(value, key);
    else if (key == "train_fraction") train_fraction = parse_number<double>(value, key);
    else if (key == "height") height = parse_number<std::size_t>(value, key);
    else if (key == "width") width = parse_number<std::size_t>(value, key);
    else if (key == "channels") channels = parse_number<std::size_t>(value, key);
    else if (key == "templates") templates = parse_number<std::size_t>(value, key);
    else if (key == "noise") noise = parse_number<double>(value, key);
    else if (key == "blobs") blobs = parse_number<std::size_t>(value, key);
    else if (key == "gain_min") gain_min = parse_number<double>(value, key);
    else if (key == "gain_max") gain_max = parse_number<double>(value, key);
    else if (key == "offset_min") offset_min = parse_number<double>(value, key);
    else if (key == "offset_max") offset_max = parse_number<double>(value, key);
    else if (key == "seed") seed = parse_number<std::uint64_t>(value, key);
    else if (key == "threads") threads = parse_number<unsigned>(value, key);
    else if (key == "out") out = value;
    else fail(ErrorKind::validation, "unknown config key '" + key + "'");
  }

  /// Reads `key = value` lines; `#` starts a comment.
  void load_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos,
              "config line " + std::to_string(number) + " is not 'key = value'");
      const std::string key(trim(std::string_view(line).substr(0, eq)));
      try {
        set(key, line.substr(eq + 1));
      } catch (const Error& e) {
        fail(e.kind(), "config line " + std::to_string(number) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    load_text(buffer.str());
  }

  WindowSpec window() const {
    require(window_weighting == "gaussian" || window_weighting == "uniform",
            "window_weighting must be gaussian or uniform");
    const WindowSpec w = window_weighting == "gaussian"
                              ? WindowSpec::gaussian(window_size, window_sigma)
                              : WindowSpec::uniform(window_size);
    w.validate();
    return w;
  }

  SsimConstants constants() const {
    auto c = SsimConstants::from_k(k1, k2, dynamic_range);
    if (c3 != "auto") c = c.with_c3(parse_number<double>(c3, "c3"));
    return c;
  }

  SsimMode mode() const {
    require(ssim_mode == "windowed" || ssim_mode == "global",
            "ssim_mode must be windowed or global");
    return ssim_mode == "windowed" ? SsimMode::windowed : SsimMode::global;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = learning_rate;
    t.batch_size = batch_size;
    t.lambda_l1 = lambda;
    t.seed = seed;
    t.d_steps_per_g_step = d_steps;
    t.lr_decay = lr_decay;
    t.validate();
    return t;
  }

  ExperimentOptions experiment_options() const {
    ExperimentOptions o;
    o.fractions = fractions;
    o.seeds = seeds;
    o.predictor = train_config();
    o.radius = radius;
    o.stride = stride;
    o.train_fraction = train_fraction;
    o.window = window();
    o.constants = constants();
    o.ssim_mode = mode();
    o.linkage = parse_linkage(linkage);
    o.fixed_k = k;
    o.threads = threads;
    return o;
  }

  SyntheticSpec synthetic_spec() const {
    SyntheticSpec s;
    s.height = height;
    s.width = width;
    s.channel_count = channels;
    s.template_count = templates;
    s.noise_sigma = noise;
    s.blob_count = blobs;
    s.gain_min = gain_min;
    s.gain_max = gain_max;
    s.offset_min = offset_min;
    s.offset_max = offset_max;
    s.seed = seed;
    s.validate();
    return s;
  }

  /// Checks every field against its module's preconditions.
  void validate() const {
    window();
    constants();
    mode();
    parse_linkage(linkage);
    train_config();
    require(method == "cluster" || method == "random", "method must be cluster or random");
    require(model == "linear" || model == "adversarial", "model must be linear or adversarial");
    require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
    require(!fractions.empty(), "fractions must not be empty");
    for (double f : fractions) require(f > 0.0 && f <= 1.0, "fractions must lie in (0, 1]");
    require(!seeds.empty(), "seeds must not be empty");
    require(std::isfinite(threshold), "threshold must be finite");
    require(!hidden.empty(), "hidden must list at least one layer size");
    for (auto h : hidden) require(h >= 1, "hidden layer sizes must be >= 1");
    require(stride >= 1, "stride must be >= 1");
    require(train_fraction > 0.0 && train_fraction < 1.0,
            "train_fraction must lie strictly between 0 and 1");
    require(threads >= 1, "threads must be >= 1");
    require(!out.empty(), "out directory must not be empty");
  }

  nlohmann::json to_json() const {
    return {{"window_size", window_size},     {"window_weighting", window_weighting},
            {"window_sigma", window_sigma},   {"k1", k1},
            {"k2", k2},                       {"dynamic_range", dynamic_range},
            {"c3", c3},                       {"ssim_mode", ssim_mode},
            {"linkage", linkage},             {"k", k},
            {"method", method},               {"select", select},
            {"fraction", fraction},           {"fractions", fractions},
            {"seeds", seeds},                 {"threshold", threshold},
            {"model", model},                 {"hidden", hidden},
            {"radius", radius},               {"stride", stride},
            {"epochs", epochs},               {"learning_rate", learning_rate},
            {"batch_size", batch_size},       {"lambda", lambda},
            {"d_steps", d_steps},             {"lr_decay", lr_decay},
            {"train_fraction", train_fraction}, {"height", height},
            {"width", width},                 {"channels", channels},
            {"templates", templates},         {"noise", noise},
            {"blobs", blobs},                 {"gain_min", gain_min},
            {"gain_max", gain_max},           {"offset_min", offset_min},
            {"offset_max", offset_max},       {"seed", seed},
            {"threads", threads},             {"out", out}};
  }
};

}  // namespace plexsyn
