#include "distcap/config.hpp"

#include <fstream>
#include <sstream>

namespace distcap {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw UserError("config key '" + key + "': expected integer, got '" + value + "'");
  }
  if (pos != value.size())
    throw UserError("config key '" + key + "': expected integer, got '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw UserError("config key '" + key + "': expected number, got '" + value + "'");
  }
  if (pos != value.size())
    throw UserError("config key '" + key + "': expected number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UserError("config key '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace

void apply_preset(ExperimentConfig& config, const std::string& name) {
  if (name == "desk") {
    config = ExperimentConfig{};
    return;
  }
  if (name == "paper") {
    config = ExperimentConfig{};
    config.batch_size = 20;
    config.alpha = 0.94;
    config.epochs = 5;
    config.policy_lr = 1e-6;
    return;
  }
  throw UserError("unknown preset '" + name + "' (known: desk, paper)");
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "n_scenes") c.n_scenes = static_cast<int>(parse_int(key, value));
  else if (key == "n_test") c.n_test = static_cast<int>(parse_int(key, value));
  else if (key == "salience") c.salience = parse_double(key, value);
  else if (key == "retriever_dim") c.retriever_dim = static_cast<int>(parse_int(key, value));
  else if (key == "retriever_noise") c.retriever_noise = parse_double(key, value);
  else if (key == "policy_embed_dim") c.policy_embed_dim = static_cast<int>(parse_int(key, value));
  else if (key == "policy_hidden_dim") c.policy_hidden_dim = static_cast<int>(parse_int(key, value));
  else if (key == "max_len") c.max_len = static_cast<int>(parse_int(key, value));
  else if (key == "beam_size") c.beam_size = static_cast<int>(parse_int(key, value));
  else if (key == "policy_lr") c.policy_lr = parse_double(key, value);
  else if (key == "tf_pretrain_epochs") c.tf_pretrain_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "tau") c.tau = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "mined_m") c.mined_m = static_cast<int>(parse_int(key, value));
  else if (key == "eval_every") c.eval_every = static_cast<int>(parse_int(key, value));
  else if (key == "clamp_gt_reward") c.clamp_gt_reward = parse_bool(key, value);
  else if (key == "disc_lr") c.disc_lr = parse_double(key, value);
  else if (key == "disc_pretrain_steps") c.disc_pretrain_steps = static_cast<int>(parse_int(key, value));
  else if (key == "disc_hidden") c.disc_hidden = static_cast<int>(parse_int(key, value));
  else if (key == "disc_batch") c.disc_batch = static_cast<int>(parse_int(key, value));
  else if (key == "data_dir") c.data_dir = value;
  else throw UserError("unknown config key '" + key + "'");
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UserError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "preset") apply_preset(config, value);
    else set_config_value(config, key, value);
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  ExperimentConfig config;
  apply_config_file(config, path);
  return config;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << '\n';
  out << "n_scenes = " << c.n_scenes << '\n';
  out << "n_test = " << c.n_test << '\n';
  out << "salience = " << fmt_g17(c.salience) << '\n';
  out << "retriever_dim = " << c.retriever_dim << '\n';
  out << "retriever_noise = " << fmt_g17(c.retriever_noise) << '\n';
  out << "policy_embed_dim = " << c.policy_embed_dim << '\n';
  out << "policy_hidden_dim = " << c.policy_hidden_dim << '\n';
  out << "max_len = " << c.max_len << '\n';
  out << "beam_size = " << c.beam_size << '\n';
  out << "policy_lr = " << fmt_g17(c.policy_lr) << '\n';
  out << "tf_pretrain_epochs = " << c.tf_pretrain_epochs << '\n';
  out << "alpha = " << fmt_g17(c.alpha) << '\n';
  out << "tau = " << fmt_g17(c.tau) << '\n';
  out << "batch_size = " << c.batch_size << '\n';
  out << "epochs = " << c.epochs << '\n';
  out << "mined_m = " << c.mined_m << '\n';
  out << "eval_every = " << c.eval_every << '\n';
  out << "clamp_gt_reward = " << (c.clamp_gt_reward ? "true" : "false") << '\n';
  out << "disc_lr = " << fmt_g17(c.disc_lr) << '\n';
  out << "disc_pretrain_steps = " << c.disc_pretrain_steps << '\n';
  out << "disc_hidden = " << c.disc_hidden << '\n';
  out << "disc_batch = " << c.disc_batch << '\n';
  out << "data_dir = " << c.data_dir << '\n';
  return out.str();
}

void validate_config(const ExperimentConfig& c) {
  if (c.n_scenes < 2) throw UserError("config: n_scenes must be at least 2");
  if (c.n_test < 0 || c.n_test >= c.n_scenes)
    throw UserError("config: n_test must be in [0, n_scenes)");
  if (!(c.salience >= 0.0 && c.salience <= 1.0))
    throw UserError("config: salience must be in [0,1]");
  if (c.retriever_dim < 48) throw UserError("config: retriever_dim must be at least 48");
  if (c.retriever_noise < 0) throw UserError("config: retriever_noise must be nonnegative");
  if (c.policy_embed_dim < 1 || c.policy_hidden_dim < 1)
    throw UserError("config: policy dimensions must be positive");
  if (c.max_len < 2) throw UserError("config: max_len must be at least 2");
  if (c.beam_size < 1) throw UserError("config: beam_size must be at least 1");
  if (c.tf_pretrain_epochs < 0) throw UserError("config: tf_pretrain_epochs must be >= 0");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw UserError("config: alpha must be in [0,1]");
  if (!(c.tau > 0.0)) throw UserError("config: tau must be positive");
  if (c.batch_size < 2) throw UserError("config: batch_size must be at least 2");
  if (c.epochs < 0) throw UserError("config: epochs must be >= 0");
  if (c.mined_m < 0 || c.mined_m >= c.n_scenes)
    throw UserError("config: mined_m must be in [0, n_scenes)");
  if (c.eval_every < 1) throw UserError("config: eval_every must be at least 1");
  if (c.disc_pretrain_steps < 0) throw UserError("config: disc_pretrain_steps must be >= 0");
  if (c.disc_hidden < 1) throw UserError("config: disc_hidden must be positive");
  if (c.disc_batch < 1) throw UserError("config: disc_batch must be positive");
  if (c.n_scenes - c.n_test < c.batch_size)
    throw UserError("config: train split smaller than one batch");
}

}  // namespace distcap
