#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sassopt/rl.hpp"

namespace sassopt {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw std::invalid_argument("malformed RNG state");
}

PolicyNetwork::Layout PolicyNetwork::layout_of(const NetworkShape& s) {
  const std::size_t c0 = s.row_width + 1;
  Layout l{};
  std::size_t at = 0;
  auto take = [&](std::size_t n) {
    std::size_t start = at;
    at += n;
    return start;
  };
  l.w1 = take(s.conv1_channels * c0 * 3);
  l.b1 = take(s.conv1_channels);
  l.w2 = take(s.conv2_channels * s.conv1_channels * 3);
  l.b2 = take(s.conv2_channels);
  l.wf = take(s.hidden * 2 * s.conv2_channels);
  l.bf = take(s.hidden);
  l.wa = take(s.num_actions * s.hidden);
  l.ba = take(s.num_actions);
  l.wv = take(s.hidden);
  l.bv = take(1);
  l.total = at;
  return l;
}

PolicyNetwork::PolicyNetwork(NetworkShape shape, Rng& rng) : shape_(shape), layout_(layout_of(shape)) {
  if (shape_.row_width == 0 || shape_.conv1_channels == 0 || shape_.conv2_channels == 0 || shape_.hidden == 0)
    throw std::invalid_argument("network dimensions must be positive");
  params_.assign(layout_.total, 0.0);
  auto fill = [&](std::size_t off, std::size_t n, double stddev) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = stddev * rng.normal();
  };
  const std::size_t c0 = shape_.row_width + 1;
  fill(layout_.w1, shape_.conv1_channels * c0 * 3, 1.0 / std::sqrt(3.0 * c0));
  fill(layout_.w2, shape_.conv2_channels * shape_.conv1_channels * 3, 1.0 / std::sqrt(3.0 * shape_.conv1_channels));
  fill(layout_.wf, shape_.hidden * 2 * shape_.conv2_channels, 1.0 / std::sqrt(2.0 * shape_.conv2_channels));
  fill(layout_.wa, shape_.num_actions * shape_.hidden, 0.01 / std::sqrt(static_cast<double>(shape_.hidden)));
  fill(layout_.wv, shape_.hidden, 1.0 / std::sqrt(static_cast<double>(shape_.hidden)));
}

PolicyNetwork::PolicyNetwork(NetworkShape shape, std::vector<double> params)
    : shape_(shape), layout_(layout_of(shape)), params_(std::move(params)) {
  if (params_.size() != layout_.total)
    throw std::invalid_argument("expected " + std::to_string(layout_.total) + " weights, got " + std::to_string(params_.size()));
}

ForwardPass PolicyNetwork::forward(const StateEmbedding& x) const {
  if (x.cols != shape_.row_width) throw std::invalid_argument("embedding width does not match the network");
  if (x.rows == 0) throw std::invalid_argument("empty embedding");
  const std::size_t n = x.rows;
  const std::size_t c0 = shape_.row_width + 1;
  const std::size_t c1 = shape_.conv1_channels;
  const std::size_t c2 = shape_.conv2_channels;
  const std::size_t h = shape_.hidden;
  const double* p = params_.data();

  ForwardPass fp;
  fp.rows = n;
  fp.input.resize(n * c0);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(r * x.cols), x.cols, fp.input.begin() + static_cast<std::ptrdiff_t>(r * c0));
    fp.input[r * c0 + x.cols] = static_cast<double>(r) / static_cast<double>(n);
  }

  auto conv = [n](const std::vector<double>& in, std::size_t cin, const double* w, const double* b, std::size_t cout) {
    std::vector<double> out(n * cout);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = b[o];
        for (std::size_t k = 0; k < 3; ++k) {
          if (r + k < 1 || r + k - 1 >= n) continue;
          const double* row = &in[(r + k - 1) * cin];
          const double* wk = w + (o * cin) * 3 + k;
          for (std::size_t c = 0; c < cin; ++c) acc += wk[c * 3] * row[c];
        }
        out[r * cout + o] = std::tanh(acc);
      }
    }
    return out;
  };
  fp.h1 = conv(fp.input, c0, p + layout_.w1, p + layout_.b1, c1);
  fp.h2 = conv(fp.h1, c1, p + layout_.w2, p + layout_.b2, c2);

  fp.pooled.assign(2 * c2, 0.0);
  fp.argmax.assign(c2, 0);
  for (std::size_t o = 0; o < c2; ++o) {
    double sum = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
      const double v = fp.h2[r * c2 + o];
      sum += v;
      if (v > best) {
        best = v;
        fp.argmax[o] = r;
      }
    }
    fp.pooled[o] = sum / static_cast<double>(n);
    fp.pooled[c2 + o] = best;
  }

  fp.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    double acc = p[layout_.bf + j];
    const double* w = p + layout_.wf + j * 2 * c2;
    for (std::size_t i = 0; i < 2 * c2; ++i) acc += w[i] * fp.pooled[i];
    fp.hidden[j] = std::tanh(acc);
  }

  fp.logits.resize(shape_.num_actions);
  for (std::size_t a = 0; a < shape_.num_actions; ++a) {
    double acc = p[layout_.ba + a];
    const double* w = p + layout_.wa + a * h;
    for (std::size_t j = 0; j < h; ++j) acc += w[j] * fp.hidden[j];
    fp.logits[a] = acc;
  }
  double v = p[layout_.bv];
  for (std::size_t j = 0; j < h; ++j) v += p[layout_.wv + j] * fp.hidden[j];
  fp.value = v;
  return fp;
}

void PolicyNetwork::backward(const ForwardPass& fp, const std::vector<double>& dlogits, double dvalue,
                             std::vector<double>& grad) const {
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
  const std::size_t n = fp.rows;
  const std::size_t c0 = shape_.row_width + 1;
  const std::size_t c1 = shape_.conv1_channels;
  const std::size_t c2 = shape_.conv2_channels;
  const std::size_t h = shape_.hidden;
  const double* p = params_.data();
  double* g = grad.data();

  std::vector<double> dhidden(h, 0.0);
  for (std::size_t a = 0; a < shape_.num_actions; ++a) {
    const double d = dlogits[a];
    if (d == 0.0) continue;
    g[layout_.ba + a] += d;
    for (std::size_t j = 0; j < h; ++j) {
      g[layout_.wa + a * h + j] += d * fp.hidden[j];
      dhidden[j] += d * p[layout_.wa + a * h + j];
    }
  }
  g[layout_.bv] += dvalue;
  for (std::size_t j = 0; j < h; ++j) {
    g[layout_.wv + j] += dvalue * fp.hidden[j];
    dhidden[j] += dvalue * p[layout_.wv + j];
  }

  std::vector<double> dpooled(2 * c2, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double d = dhidden[j] * (1.0 - fp.hidden[j] * fp.hidden[j]);
    g[layout_.bf + j] += d;
    for (std::size_t i = 0; i < 2 * c2; ++i) {
      g[layout_.wf + j * 2 * c2 + i] += d * fp.pooled[i];
      dpooled[i] += d * p[layout_.wf + j * 2 * c2 + i];
    }
  }

  std::vector<double> dpre2(n * c2);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < c2; ++o) {
      double d = dpooled[o] / static_cast<double>(n);
      if (fp.argmax[o] == r) d += dpooled[c2 + o];
      const double y = fp.h2[r * c2 + o];
      dpre2[r * c2 + o] = d * (1.0 - y * y);
    }
  }

  auto conv_back = [n](const std::vector<double>& dpre, std::size_t cout, const std::vector<double>& in, std::size_t cin,
                       const double* w, double* gw, double* gb, std::vector<double>* din) {
    if (din) din->assign(n * cin, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < cout; ++o) {
        const double d = dpre[r * cout + o];
        gb[o] += d;
        for (std::size_t k = 0; k < 3; ++k) {
          if (r + k < 1 || r + k - 1 >= n) continue;
          const std::size_t src = (r + k - 1) * cin;
          for (std::size_t c = 0; c < cin; ++c) {
            const std::size_t wi = (o * cin + c) * 3 + k;
            gw[wi] += d * in[src + c];
            if (din) (*din)[src + c] += d * w[wi];
          }
        }
      }
    }
  };

  std::vector<double> dh1;
  conv_back(dpre2, c2, fp.h1, c1, p + layout_.w2, g + layout_.w2, g + layout_.b2, &dh1);
  for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] *= 1.0 - fp.h1[i] * fp.h1[i];
  conv_back(dh1, c1, fp.input, c0, p + layout_.w1, g + layout_.w1, g + layout_.b1, nullptr);
}

MaskedDistribution masked_softmax(const std::vector<double>& logits, const std::vector<std::uint8_t>& mask) {
  if (logits.size() != mask.size()) throw std::invalid_argument("mask size does not match the action count");
  MaskedDistribution d;
  d.probs.assign(logits.size(), 0.0);
  d.log_probs.assign(logits.size(), -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) top = std::max(top, logits[i]);
  }
  if (top == -std::numeric_limits<double>::infinity()) throw ContractViolation("every action is masked");
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) z += std::exp(logits[i] - top);
  }
  const double log_z = top + std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    d.log_probs[i] = logits[i] - log_z;
    d.probs[i] = std::exp(d.log_probs[i]);
    d.entropy -= d.probs[i] * d.log_probs[i];
  }
  return d;
}

Selection select_action(const PolicyNetwork& net, const StateEmbedding& x, const std::vector<std::uint8_t>& mask,
                        SelectMode mode, Rng& rng) {
  if (std::none_of(mask.begin(), mask.end(), [](auto m) { return m != 0; })) throw ContractViolation("every action is masked");
  const ForwardPass fp = net.forward(x);
  const MaskedDistribution d = masked_softmax(fp.logits, mask);
  int chosen = -1;
  if (mode == SelectMode::Greedy) {
    for (std::size_t i = 0; i < d.probs.size(); ++i) {
      if (mask[i] && (chosen < 0 || fp.logits[i] > fp.logits[static_cast<std::size_t>(chosen)])) chosen = static_cast<int>(i);
    }
  } else {
    const double u = rng.uniform();
    double acc = 0;
    for (std::size_t i = 0; i < d.probs.size(); ++i) {
      if (!mask[i]) continue;
      chosen = static_cast<int>(i);
      acc += d.probs[i];
      if (u < acc) break;
    }
  }
  return Selection{chosen, d.log_probs[static_cast<std::size_t>(chosen)], fp.value};
}

}  // namespace sassopt
