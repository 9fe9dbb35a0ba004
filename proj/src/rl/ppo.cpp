#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "sassopt/rl.hpp"

namespace sassopt {

void PPOConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(clip > 0 && clip < 1)) throw std::invalid_argument("clip must be in (0, 1)");
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) throw std::invalid_argument("gae_lambda must be in [0, 1]");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (epochs <= 0 || minibatch_size <= 0 || rollout_length <= 0 || total_steps < 0 || episode_length <= 0)
    throw std::invalid_argument("epochs, minibatch_size, rollout_length and episode_length must be positive");
  if (max_grad_norm <= 0) throw std::invalid_argument("max_grad_norm must be positive");
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& dones,
                 double next_value, double gamma, double lambda, std::vector<double>& advantages,
                 std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double last = 0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_v = t + 1 < n ? values[t + 1] : next_value;
    const double nonterminal = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_v * nonterminal - values[t];
    last = delta + gamma * lambda * nonterminal * last;
    advantages[t] = last;
    returns[t] = last + values[t];
  }
}

std::vector<double> normalize(const std::vector<double>& v) {
  if (v.empty()) return v;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / (sd + 1e-8);
  return out;
}

LossStats ppo_loss(const PolicyNetwork& net, const std::vector<const Transition*>& batch,
                   const std::vector<double>& advantages, const std::vector<double>& returns, const PPOConfig& cfg,
                   std::vector<double>* grad) {
  const std::size_t b = batch.size();
  if (b == 0) return {};
  const std::vector<double> adv = cfg.norm_adv && b > 1 ? normalize(advantages) : advantages;
  const double inv_b = 1.0 / static_cast<double>(b);
  if (grad) grad->assign(net.params().size(), 0.0);

  LossStats s;
  std::vector<double> dlogits;
  for (std::size_t i = 0; i < b; ++i) {
    const Transition& tr = *batch[i];
    const ForwardPass fp = net.forward(tr.state);
    const MaskedDistribution d = masked_softmax(fp.logits, tr.mask);
    const auto a = static_cast<std::size_t>(tr.action);
    const double logratio = d.log_probs[a] - tr.log_prob;
    const double ratio = std::exp(logratio);
    s.approx_kl += ((ratio - 1.0) - logratio) * inv_b;
    if (std::abs(ratio - 1.0) > cfg.clip) s.clipfrac += inv_b;

    const double l1 = -adv[i] * ratio;
    const double l2 = -adv[i] * std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    s.pg_loss += std::max(l1, l2) * inv_b;
    const double dlogp = l1 >= l2 ? -adv[i] * ratio : 0.0;

    s.entropy += d.entropy * inv_b;

    const double v = fp.value;
    const double r = returns[i];
    double vloss = 0, dv = 0;
    if (cfg.clip_vloss) {
      const double vclipped = tr.value + std::clamp(v - tr.value, -cfg.clip, cfg.clip);
      const double unclipped = (v - r) * (v - r);
      const double clipped = (vclipped - r) * (vclipped - r);
      vloss = 0.5 * std::max(unclipped, clipped);
      if (unclipped >= clipped) dv = v - r;
      else if (std::abs(v - tr.value) < cfg.clip) dv = vclipped - r;
    } else {
      vloss = 0.5 * (v - r) * (v - r);
      dv = v - r;
    }
    s.v_loss += vloss * inv_b;

    if (grad) {
      dlogits.assign(fp.logits.size(), 0.0);
      for (std::size_t j = 0; j < dlogits.size(); ++j) {
        if (!tr.mask[j]) continue;
        const double pj = d.probs[j];
        const double dlogp_dz = (j == a ? 1.0 : 0.0) - pj;
        const double dent_dz = -pj * (d.log_probs[j] + d.entropy);
        dlogits[j] = inv_b * (dlogp * dlogp_dz - cfg.ent_coef * dent_dz);
      }
      net.backward(fp, dlogits, inv_b * cfg.vf_coef * dv, *grad);
    }
  }
  return s;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1 - beta1) * grad[i];
    v_[i] = beta2 * v_[i] + (1 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

namespace {

void clip_grad_norm(std::vector<double>& g, double max_norm) {
  double sq = 0;
  for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (double& x : g) x *= scale;
  }
}

PolicyCheckpoint make_checkpoint(const PolicyNetwork& net, const PPOConfig& cfg, long step, const Rng& rng,
                                 const GameContext& ctx, const std::string& name, const AssemblyGame* game,
                                 double t0) {
  PolicyCheckpoint ck;
  ck.network = net;
  ck.config = cfg;
  ck.config.network = net.shape();
  ck.step = step;
  ck.rng_state = rng.state();
  ck.kernel_name = name;
  ck.kernel_fingerprint = kernel_fingerprint(ctx.original());
  if (game && game->best_schedule().size() == ctx.original().num_instructions()) {
    ck.best_order = game->best_schedule().order();
    ck.best_time = game->best_time();
  } else {
    ck.best_order = Schedule(ctx.original().num_instructions()).order();
    ck.best_time = t0;
  }
  return ck;
}

}  // namespace

TrainResult train(std::shared_ptr<const GameContext> ctx, Evaluator& evaluator, const PPOConfig& cfg,
                  const std::string& kernel_name) {
  cfg.validate();
  Rng rng(cfg.seed);
  NetworkShape shape = cfg.network;
  shape.row_width = ctx->row_width();
  shape.num_actions = ctx->num_actions();
  PolicyNetwork net(shape, rng);

  AssemblyGame game(ctx, evaluator, cfg.episode_length);
  TrainResult result;
  auto finish = [&](long step) {
    result.steps = step;
    result.checkpoint = make_checkpoint(net, cfg, step, rng, *ctx, kernel_name, &game, result.initial_time);
    result.best_schedule = game.best_schedule();
    result.best_time = game.best_time();
    result.best_kernel = ctx->materialize(result.best_schedule);
    return result;
  };

  try {
    game.reset();
  } catch (const EvaluatorError& e) {
    result.aborted = e.what();
    result.best_schedule = Schedule(ctx->original().num_instructions());
    result.best_kernel = ctx->original();
    result.checkpoint = make_checkpoint(net, cfg, 0, rng, *ctx, kernel_name, nullptr, 0);
    return result;
  }
  result.initial_time = game.best_time();
  if (game.state().done) {
    spdlog::info("no legal reordering; keeping the original schedule");
    return finish(0);
  }

  Adam opt(net.params().size());
  const int num_updates = (cfg.total_steps + cfg.rollout_length - 1) / cfg.rollout_length;
  long global_step = 0;
  double episode_return = 0;
  std::vector<Transition> buffer;
  std::vector<double> grad;

  for (int update = 1; update <= num_updates; ++update) {
    const double frac = 1.0 - static_cast<double>(update - 1) / num_updates;
    const double lr = cfg.anneal_lr ? frac * cfg.learning_rate : cfg.learning_rate;

    buffer.clear();
    std::vector<double> finished_returns;
    for (int s = 0; s < cfg.rollout_length && global_step < cfg.total_steps; ++s) {
      Transition tr;
      tr.state = game.observation();
      tr.mask = game.state().mask;
      const Selection sel = select_action(net, tr.state, tr.mask, SelectMode::Sample, rng);
      StepResult res;
      try {
        res = game.step(sel.action);
      } catch (const EvaluatorError& e) {
        spdlog::error("evaluator failed at step {}: {}", global_step, e.what());
        result.aborted = e.what();
        return finish(global_step);
      }
      tr.action = sel.action;
      tr.log_prob = sel.log_prob;
      tr.value = sel.value;
      tr.reward = res.reward;
      tr.done = res.done;
      buffer.push_back(std::move(tr));
      ++global_step;
      episode_return += res.reward;
      if (res.done) {
        finished_returns.push_back(episode_return);
        episode_return = 0;
        game.reset();
      }
    }
    if (buffer.empty()) break;

    std::vector<double> rewards, values;
    std::vector<bool> dones;
    for (const auto& tr : buffer) {
      rewards.push_back(tr.reward);
      values.push_back(tr.value);
      dones.push_back(tr.done);
    }
    const double next_value = buffer.back().done ? 0.0 : net.forward(game.observation()).value;
    std::vector<double> advantages, returns;
    compute_gae(rewards, values, dones, next_value, cfg.gamma, cfg.gae_lambda, advantages, returns);

    std::vector<std::size_t> idx(buffer.size());
    LossStats sum;
    int batches = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
      }
      for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.minibatch_size)) {
        const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
        std::vector<const Transition*> mb;
        std::vector<double> mb_adv, mb_ret;
        for (std::size_t k = start; k < end; ++k) {
          mb.push_back(&buffer[idx[k]]);
          mb_adv.push_back(advantages[idx[k]]);
          mb_ret.push_back(returns[idx[k]]);
        }
        const LossStats s = ppo_loss(net, mb, mb_adv, mb_ret, cfg, &grad);
        clip_grad_norm(grad, cfg.max_grad_norm);
        opt.step(net.params(), grad, lr);
        sum.pg_loss += s.pg_loss;
        sum.v_loss += s.v_loss;
        sum.entropy += s.entropy;
        sum.approx_kl += s.approx_kl;
        sum.clipfrac += s.clipfrac;
        ++batches;
      }
    }

    LogRecord rec;
    rec.step = global_step;
    rec.update = update;
    if (!finished_returns.empty())
      rec.episodic_return = std::accumulate(finished_returns.begin(), finished_returns.end(), 0.0) /
                            static_cast<double>(finished_returns.size());
    rec.pg_loss = sum.pg_loss / batches;
    rec.v_loss = sum.v_loss / batches;
    rec.entropy = sum.entropy / batches;
    rec.approx_kl = sum.approx_kl / batches;
    rec.clipfrac = sum.clipfrac / batches;
    rec.learning_rate = lr;
    rec.best_time = game.best_time();
    result.log.push_back(rec);
    spdlog::debug("update {} step {} kl {:.5f} entropy {:.4f} best {}", update, global_step, rec.approx_kl, rec.entropy,
                  rec.best_time);
  }
  return finish(global_step);
}

ReplayResult replay(std::shared_ptr<const GameContext> ctx, Evaluator& evaluator, const PolicyCheckpoint& ck,
                    std::uint64_t seed, SelectMode mode, int max_steps) {
  const NetworkShape& shape = ck.network.shape();
  if (shape.num_actions != ctx->num_actions() || shape.row_width != ctx->row_width())
    throw CheckpointMismatch("checkpoint was trained on kernel '" + ck.kernel_name + "' (" +
                             std::to_string(shape.num_actions) + " actions, row width " +
                             std::to_string(shape.row_width) + "); this kernel has " +
                             std::to_string(ctx->num_actions()) + " actions, row width " +
                             std::to_string(ctx->row_width()));
  Rng rng(seed);
  AssemblyGame game(ctx, evaluator, max_steps);
  game.reset();
  while (!game.state().done) {
    const Selection sel = select_action(ck.network, game.observation(), game.state().mask, mode, rng);
    game.step(sel.action);
  }
  ReplayResult out;
  out.trace = game.trace();
  annotate_lingering(out.trace);
  out.final_schedule = game.state().schedule;
  out.final_time = game.state().t_cur;
  out.best_schedule = game.best_schedule();
  out.best_time = game.best_time();
  return out;
}

}  // namespace sassopt
