#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sassopt/environment.hpp"

namespace sassopt {

/// Seeded generator with a platform-independent uniform/normal draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal();

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

struct NetworkShape {
  std::size_t row_width = 0;
  std::size_t num_actions = 0;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 16;
  std::size_t hidden = 64;

  bool operator==(const NetworkShape&) const = default;
};

/// Per-sample forward cache, reused by backward().
struct ForwardPass {
  std::size_t rows = 0;
  std::vector<double> input;  // rows x (row_width + 1)
  std::vector<double> h1;     // rows x conv1
  std::vector<double> h2;     // rows x conv2
  std::vector<std::size_t> argmax;
  std::vector<double> pooled;  // mean then max
  std::vector<double> hidden;
  std::vector<double> logits;
  double value = 0;
};

/// Two 1-d convolutions over the instruction axis, mean+max pooling, one
/// tanh layer, then actor and critic heads. Parameters live in one flat
/// vector so the optimizer and checkpoint see a single array.
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(NetworkShape shape, Rng& rng);
  /// Restores saved weights; throws if the count does not fit the shape.
  PolicyNetwork(NetworkShape shape, std::vector<double> params);

  const NetworkShape& shape() const { return shape_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  ForwardPass forward(const StateEmbedding& x) const;
  /// Accumulates d(loss)/d(params) into grad given the loss gradient with
  /// respect to the logits and the value.
  void backward(const ForwardPass& fp, const std::vector<double>& dlogits, double dvalue, std::vector<double>& grad) const;

 private:
  struct Layout {
    std::size_t w1, b1, w2, b2, wf, bf, wa, ba, wv, bv, total;
  };
  static Layout layout_of(const NetworkShape& s);

  NetworkShape shape_;
  Layout layout_{};
  std::vector<double> params_;
};

/// Masked categorical distribution. Masked entries have probability 0.
struct MaskedDistribution {
  std::vector<double> probs;
  std::vector<double> log_probs;  // -inf where masked
  double entropy = 0;
};

MaskedDistribution masked_softmax(const std::vector<double>& logits, const std::vector<std::uint8_t>& mask);

enum class SelectMode { Sample, Greedy };

struct Selection {
  int action = 0;
  double log_prob = 0;
  double value = 0;
};

/// Throws ContractViolation if every action is masked.
Selection select_action(const PolicyNetwork& net, const StateEmbedding& x, const std::vector<std::uint8_t>& mask,
                        SelectMode mode, Rng& rng);

struct PPOConfig {
  double learning_rate = 2.5e-4;
  bool anneal_lr = true;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch_size = 32;
  int rollout_length = 128;
  int total_steps = 2000;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  bool norm_adv = true;
  bool clip_vloss = true;
  int episode_length = 32;
  std::uint64_t seed = 1;
  NetworkShape network;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct Transition {
  StateEmbedding state;
  int action = 0;
  std::vector<std::uint8_t> mask;
  double log_prob = 0;
  double reward = 0;
  double value = 0;
  bool done = false;
};

/// GAE advantages and returns. `next_value` bootstraps the final step when
/// it is not terminal.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& dones,
                 double next_value, double gamma, double lambda, std::vector<double>& advantages,
                 std::vector<double>& returns);
/// Zero mean, unit (population) standard deviation, epsilon 1e-8.
std::vector<double> normalize(const std::vector<double>& v);

struct LossStats {
  double pg_loss = 0;
  double v_loss = 0;
  double entropy = 0;
  double approx_kl = 0;
  double clipfrac = 0;
};

/// Clipped-surrogate PPO loss of a minibatch and its parameter gradient.
LossStats ppo_loss(const PolicyNetwork& net, const std::vector<const Transition*>& batch,
                   const std::vector<double>& advantages, const std::vector<double>& returns, const PPOConfig& cfg,
                   std::vector<double>* grad);

class Adam {
 public:
  explicit Adam(std::size_t n, double eps = 1e-5) : m_(n, 0.0), v_(n, 0.0), eps_(eps) {}
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr);

 private:
  std::vector<double> m_, v_;
  double eps_;
  long t_ = 0;
};

struct LogRecord {
  long step = 0;
  int update = 0;
  std::optional<double> episodic_return;
  double approx_kl = 0;
  double entropy = 0;
  double pg_loss = 0;
  double v_loss = 0;
  double clipfrac = 0;
  double learning_rate = 0;
  double best_time = 0;
};

std::string log_jsonl(const std::vector<LogRecord>& log);
std::vector<LogRecord> parse_log_jsonl(const std::string& text);

struct PolicyCheckpoint {
  PolicyNetwork network;
  PPOConfig config;
  long step = 0;
  std::string rng_state;
  std::string kernel_name;
  std::string kernel_fingerprint;
  /// Best schedule seen, as a permutation of original ordinals.
  std::vector<std::size_t> best_order;
  double best_time = 0;
};

/// FNV-1a over the serialized kernel, as 16 hex digits.
std::string kernel_fingerprint(const Kernel& k);

std::string checkpoint_json(const PolicyCheckpoint& ck);
PolicyCheckpoint parse_checkpoint(const std::string& text);
/// Writes to a sibling temp file, then renames over the target.
void save_checkpoint(const PolicyCheckpoint& ck, const std::filesystem::path& path);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  PolicyCheckpoint checkpoint;
  Schedule best_schedule;
  Kernel best_kernel;
  double initial_time = 0;
  double best_time = 0;
  std::vector<LogRecord> log;
  long steps = 0;
  /// Set when the evaluator failed mid-run; artifacts are partial.
  std::optional<std::string> aborted;
};

TrainResult train(std::shared_ptr<const GameContext> ctx, Evaluator& evaluator, const PPOConfig& cfg,
                  const std::string& kernel_name = "kernel");

/// Raised when a checkpoint does not fit the kernel it is applied to.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayResult {
  std::vector<TraceRecord> trace;
  Schedule final_schedule;
  double final_time = 0;
  Schedule best_schedule;
  double best_time = 0;
};

ReplayResult replay(std::shared_ptr<const GameContext> ctx, Evaluator& evaluator, const PolicyCheckpoint& ck,
                    std::uint64_t seed, SelectMode mode = SelectMode::Greedy, int max_steps = 32);

}  // namespace sassopt
