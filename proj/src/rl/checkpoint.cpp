#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sassopt/rl.hpp"

namespace sassopt {

using nlohmann::json;

std::string kernel_fingerprint(const Kernel& k) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_kernel(k)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json config_json(const PPOConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"anneal_lr", c.anneal_lr},
          {"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip", c.clip},
          {"epochs", c.epochs},
          {"minibatch_size", c.minibatch_size},
          {"rollout_length", c.rollout_length},
          {"total_steps", c.total_steps},
          {"ent_coef", c.ent_coef},
          {"vf_coef", c.vf_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"norm_adv", c.norm_adv},
          {"clip_vloss", c.clip_vloss},
          {"episode_length", c.episode_length},
          {"seed", c.seed}};
}

PPOConfig config_from(const json& j) {
  PPOConfig c;
  c.learning_rate = j.at("learning_rate");
  c.anneal_lr = j.at("anneal_lr");
  c.gamma = j.at("gamma");
  c.gae_lambda = j.at("gae_lambda");
  c.clip = j.at("clip");
  c.epochs = j.at("epochs");
  c.minibatch_size = j.at("minibatch_size");
  c.rollout_length = j.at("rollout_length");
  c.total_steps = j.at("total_steps");
  c.ent_coef = j.at("ent_coef");
  c.vf_coef = j.at("vf_coef");
  c.max_grad_norm = j.at("max_grad_norm");
  c.norm_adv = j.at("norm_adv");
  c.clip_vloss = j.at("clip_vloss");
  c.episode_length = j.at("episode_length");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

std::string checkpoint_json(const PolicyCheckpoint& ck) {
  const NetworkShape& s = ck.network.shape();
  json j = {{"format", "sassopt-checkpoint"},
            {"version", 1},
            {"kernel", ck.kernel_name},
            {"kernel_fingerprint", ck.kernel_fingerprint},
            {"num_actions", s.num_actions},
            {"row_width", s.row_width},
            {"network",
             {{"conv1_channels", s.conv1_channels}, {"conv2_channels", s.conv2_channels}, {"hidden", s.hidden}}},
            {"config", config_json(ck.config)},
            {"step", ck.step},
            {"rng_state", ck.rng_state},
            {"best_order", ck.best_order},
            {"best_time", ck.best_time},
            {"weights", ck.network.params()}};
  return j.dump(1) + "\n";
}

PolicyCheckpoint parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "sassopt-checkpoint") throw std::runtime_error("not a checkpoint file");
  try {
    NetworkShape s;
    s.num_actions = j.at("num_actions");
    s.row_width = j.at("row_width");
    s.conv1_channels = j.at("network").at("conv1_channels");
    s.conv2_channels = j.at("network").at("conv2_channels");
    s.hidden = j.at("network").at("hidden");
    PolicyCheckpoint ck;
    ck.network = PolicyNetwork(s, j.at("weights").get<std::vector<double>>());
    ck.config = config_from(j.at("config"));
    ck.config.network = s;
    ck.step = j.at("step");
    ck.rng_state = j.at("rng_state");
    ck.kernel_name = j.at("kernel");
    ck.kernel_fingerprint = j.at("kernel_fingerprint");
    ck.best_order = j.at("best_order").get<std::vector<std::size_t>>();
    ck.best_time = j.at("best_time");
    return ck;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const PolicyCheckpoint& ck, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << checkpoint_json(ck);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_checkpoint(os.str());
}

std::string log_jsonl(const std::vector<LogRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    json j = {{"step", r.step},
              {"update", r.update},
              {"episodic_return", r.episodic_return ? json(*r.episodic_return) : json(nullptr)},
              {"approx_kl", r.approx_kl},
              {"entropy", r.entropy},
              {"pg_loss", r.pg_loss},
              {"v_loss", r.v_loss},
              {"clipfrac", r.clipfrac},
              {"learning_rate", r.learning_rate},
              {"best_time", r.best_time}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<LogRecord> parse_log_jsonl(const std::string& text) {
  std::vector<LogRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      LogRecord r;
      r.step = j.at("step");
      r.update = j.value("update", 0);
      if (j.contains("episodic_return") && !j["episodic_return"].is_null()) r.episodic_return = j["episodic_return"].get<double>();
      r.approx_kl = j.value("approx_kl", 0.0);
      r.entropy = j.value("entropy", 0.0);
      r.pg_loss = j.value("pg_loss", 0.0);
      r.v_loss = j.value("v_loss", 0.0);
      r.clipfrac = j.value("clipfrac", 0.0);
      r.learning_rate = j.value("learning_rate", 0.0);
      r.best_time = j.value("best_time", 0.0);
      out.push_back(r);
    } catch (const json::exception& e) {
      throw std::runtime_error("training log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sassopt
