/* Copyright 2026 The parkdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "parkdiff/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "parkdiff/error.hpp"

namespace parkdiff {

void TrainConfig::validate(std::size_t future_steps) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("train." + what);
  };
  require(stage == 1 || stage == 2, "stage must be 1 or 2");
  require(lr > 0.0, "lr must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lambda_ce >= 0.0, "lambda_ce must be >= 0");
  require(grad_clip >= 0.0, "grad_clip must be >= 0");
  require(log_every >= 1, "log_every must be >= 1");
  require(W.empty() || W.size() == future_steps,
          "W must have one entry per future step (" + std::to_string(future_steps) + ")");
  for (double w : W) require(w > 0.0 && std::isfinite(w), "W entries must be strictly positive");
}

std::vector<double> TrainConfig::weights(std::size_t future_steps) const {
  return W.empty() ? std::vector<double>(future_steps, 1.0) : W;
}

std::vector<double> weight_preset(const std::string& name, std::size_t future_steps) {
  std::vector<double> w(future_steps, 1.0);
  if (name == "uniform") return w;
  if (name == "linear") {
    for (std::size_t t = 0; t < future_steps; ++t) {
      w[t] = static_cast<double>(t + 1) / static_cast<double>(future_steps);
    }
    return w;
  }
  throw ConfigError("unknown weight preset \"" + name + "\" (expected uniform or linear)");
}

// ---- losses ---------------------------------------------------------------------

Var masked_noise_mse(Var eps_hat, const Tensor& eps, const Tensor& valid) {
  const Tensor& E = eps_hat.value();
  if (E.shape() != eps.shape() || E.rank() != 3 || valid.shape() != Shape{E.dim(0), E.dim(1)}) {
    throw DimensionError("masked_noise_mse: shapes " + shape_string(E.shape()) + ", " + shape_string(eps.shape()) +
                         ", " + shape_string(valid.shape()));
  }
  const std::size_t C = E.dim(2);
  double count = 0.0;
  for (double v : valid.values()) count += v != 0.0 ? static_cast<double>(C) : 0.0;
  Tensor neg(eps.shape()), w(eps.shape());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    neg[i] = -eps[i];
    w[i] = count > 0.0 && valid[i / C] != 0.0 ? 1.0 / count : 0.0;
  }
  return ops::sum(ops::mul_const(ops::square(ops::add_const(eps_hat, neg)), w));
}

Var loss_denoiser(const Scope& s, const ModelConfig& cfg, const DiffusionSchedule& schedule, const Tensor& y_gt,
                  const std::vector<std::size_t>& steps, const Tensor& eps, Var context, const Tensor& valid) {
  if (y_gt.rank() != 3 || steps.size() != y_gt.dim(0)) {
    throw DimensionError("loss_denoiser: one step per trajectory row required");
  }
  const std::size_t R = y_gt.dim(0), row = y_gt.size() / std::max<std::size_t>(R, 1);
  Tensor noisy(y_gt.shape());
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t t = steps[r];
    if (t < 1 || t > schedule.steps) throw ContractError("loss_denoiser: step outside the schedule");
    const double a = std::sqrt(schedule.alpha_bar_at(t)), b = std::sqrt(1.0 - schedule.alpha_bar_at(t));
    for (std::size_t i = r * row; i < (r + 1) * row; ++i) noisy[i] = a * y_gt[i] + b * eps[i];
  }
  Var eps_hat = denoise_eps(s, cfg, s.graph().constant(std::move(noisy)), steps, context);
  return masked_noise_mse(eps_hat, eps, valid);
}

WtaResult loss_wta(Var candidates, std::size_t K, const Tensor& gt, const Tensor& future_valid,
                   const std::vector<double>& W) {
  if (K == 0) throw ContractError("loss_wta: K must be >= 1");
  if (gt.rank() != 3 || gt.dim(2) != 2) throw DimensionError("loss_wta: gt must be [N, T_f, 2]");
  const std::size_t N = gt.dim(0), T = gt.dim(1);
  const Tensor& Cv = candidates.value();
  if (Cv.size() != N * K * T * 2) {
    throw DimensionError("loss_wta: candidates " + shape_string(Cv.shape()) + " do not match " +
                         std::to_string(N) + " agents x " + std::to_string(K) + " candidates");
  }
  if (future_valid.shape() != Shape{N, T} || W.size() != T) {
    throw DimensionError("loss_wta: future_valid must be [N, T_f] and W must have T_f entries");
  }
  double w_total = 0.0;
  for (double w : W) {
    if (!(w > 0.0)) throw ContractError("loss_wta: W must be strictly positive");
    w_total += w;
  }

  WtaResult out;
  out.winners.assign(N, -1);
  out.errors = Tensor(Shape{N, K});
  Tensor wn(Shape{N, T});
  for (std::size_t n = 0; n < N; ++n) {
    double w_valid = 0.0;
    for (std::size_t t = 0; t < T; ++t) w_valid += future_valid[n * T + t] != 0.0 ? W[t] : 0.0;
    if (w_valid == 0.0) continue;
    for (std::size_t t = 0; t < T; ++t) wn[n * T + t] = future_valid[n * T + t] != 0.0 ? W[t] * w_total / w_valid : 0.0;
    long best = -1;
    for (std::size_t k = 0; k < K; ++k) {
      double e = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double* c = Cv.data() + ((n * K + k) * T + t) * 2;
        const double* y = gt.data() + (n * T + t) * 2;
        e += wn[n * T + t] * ((c[0] - y[0]) * (c[0] - y[0]) + (c[1] - y[1]) * (c[1] - y[1]));
      }
      out.errors[n * K + k] = e;
      if (best < 0 || e < out.errors[n * K + static_cast<std::size_t>(best)]) best = static_cast<long>(k);
    }
    out.winners[n] = best;
    ++out.counted;
  }

  Var flat = ops::reshape(candidates, Shape{N * K, 2 * T});
  if (out.counted == 0) {
    out.loss = ops::scale(ops::sum(flat), 0.0);
    return out;
  }
  std::vector<std::size_t> rows;
  Tensor neg(Shape{out.counted, 2 * T}), w(Shape{out.counted, 2 * T});
  for (std::size_t n = 0, m = 0; n < N; ++n) {
    if (out.winners[n] < 0) continue;
    rows.push_back(n * K + static_cast<std::size_t>(out.winners[n]));
    for (std::size_t j = 0; j < 2 * T; ++j) {
      neg[m * 2 * T + j] = -gt[n * 2 * T + j];
      w[m * 2 * T + j] = wn[n * T + j / 2] / static_cast<double>(out.counted);
    }
    ++m;
  }
  Var diff = ops::add_const(ops::gather_rows(flat, rows), neg);
  out.loss = ops::sum(ops::mul_const(ops::square(diff), w));
  return out;
}

Var loss_prob(Var logits, const std::vector<long>& winners) {
  const Tensor& L = logits.value();
  if (L.rank() != 2 || L.dim(0) != winners.size()) throw DimensionError("loss_prob: logits must be [N, K]");
  const std::size_t N = L.dim(0), K = L.dim(1);
  std::size_t counted = 0;
  for (long w : winners) {
    if (w >= static_cast<long>(K)) throw ContractError("loss_prob: winner index out of range");
    counted += w >= 0 ? 1 : 0;
  }
  if (counted == 0) return ops::scale(ops::sum(logits), 0.0);
  Tensor pick(Shape{N, K});
  for (std::size_t n = 0; n < N; ++n) {
    if (winners[n] >= 0) pick[n * K + static_cast<std::size_t>(winners[n])] = -1.0 / static_cast<double>(counted);
  }
  return ops::sum(ops::mul_const(ops::log_softmax(logits), pick));
}

// ---- optimizer -----------------------------------------------------------------

void adam_step(ParameterSet& params, const GradMap& grads, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.get_mut(name);
    if (g.shape() != p.shape()) throw DimensionError("adam_step: gradient shape mismatch for " + name);
    Tensor& m = state.m.try_emplace(name, p.shape()).first->second;
    Tensor& v = state.v.try_emplace(name, p.shape()).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

double global_grad_norm(const GradMap& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

void clip_grad_norm(GradMap& grads, double max_norm) {
  const double n = global_grad_norm(grads);
  if (max_norm <= 0.0 || n <= max_norm) return;
  const double f = max_norm / n;
  for (auto& [name, g] : grads) {
    for (double& v : g.values()) v *= f;
  }
}

// ---- training loop --------------------------------------------------------------

namespace {

std::mt19937_64 iteration_rng(std::uint64_t seed, int stage, std::size_t iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(iteration) >> 32)};
  std::mt19937_64 rng;
  rng.seed(seq);
  return rng;
}

double batch_min_ade(const Tensor& cand, std::size_t K, const Tensor& gt, const Tensor& valid, std::size_t* count) {
  const std::size_t N = gt.dim(0), T = gt.dim(1);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t nv = 0;
    for (std::size_t t = 0; t < T; ++t) nv += valid[n * T + t] != 0.0 ? 1 : 0;
    if (nv == 0) continue;
    double best = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double e = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        if (valid[n * T + t] == 0.0) continue;
        const double* c = cand.data() + ((n * K + k) * T + t) * 2;
        const double* y = gt.data() + (n * T + t) * 2;
        e += std::hypot(c[0] - y[0], c[1] - y[1]);
      }
      e /= static_cast<double>(nv);
      if (k == 0 || e < best) best = e;
    }
    total += best;
    ++*count;
  }
  return total;
}

void check_finite(double v, const char* what, int stage, std::size_t iteration) {
  if (!std::isfinite(v)) {
    throw NumericError("training diverged: " + std::string(what) + " is " + std::to_string(v) + " at stage " +
                       std::to_string(stage) + " iteration " + std::to_string(iteration));
  }
}

}  // namespace

void train(TrainState& state, const std::vector<EgoSample>& data, const TrainConfig& config,
           std::vector<TrainLogRow>* log, const TrainCallback& on_log) {
  const ModelConfig& cfg = state.model.config;
  config.validate(cfg.future_steps);
  if (data.empty()) throw ContractError("train: empty dataset");
  if (state.stage != config.stage) {
    throw ContractError("train: state is at stage " + std::to_string(state.stage) + ", config asks for stage " +
                        std::to_string(config.stage));
  }
  const DiffusionSchedule schedule = make_schedule(cfg);
  const std::vector<double> W = config.weights(cfg.future_steps);
  const AdamConfig adam{config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps};
  const std::size_t T = cfg.future_steps;

  for (; state.iteration < config.iterations; ++state.iteration) {
    const std::size_t it = state.iteration;
    std::mt19937_64 rng = iteration_rng(config.seed, config.stage, it);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    std::vector<const EgoSample*> samples;
    for (std::size_t i = 0; i < config.batch_size; ++i) samples.push_back(&data[pick(rng)]);
    const Batch batch = make_batch(samples);

    TrainLogRow row;
    row.iteration = it;
    row.stage = config.stage;
    GradMap grads;
    try {
      Graph g;
      const Scope s(g, state.model.params);
      Var loss;
      if (config.stage == 1) {
        const Encoding enc = encode(s, cfg, batch);
        std::vector<std::size_t> rows;
        for (std::size_t a = 0; a < batch.num_agents; ++a) {
          bool any = false;
          for (std::size_t t = 0; t < T; ++t) any = any || batch.future_valid[a * T + t] != 0.0;
          if (any && batch.agent_valid[a] != 0.0) rows.push_back(a);
        }
        if (rows.empty()) continue;
        const std::size_t R = rows.size();
        Tensor y(Shape{R, T, 2}), valid(Shape{R, T}), eps(Shape{R, T, 2});
        std::vector<std::size_t> steps(R);
        std::uniform_int_distribution<std::size_t> step_dist(1, schedule.steps);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t r = 0; r < R; ++r) {
          std::copy_n(batch.gt_future.data() + rows[r] * T * 2, T * 2, y.data() + r * T * 2);
          std::copy_n(batch.future_valid.data() + rows[r] * T, T, valid.data() + r * T);
          steps[r] = step_dist(rng);
        }
        for (double& v : eps.values()) v = normal(rng);
        loss = loss_denoiser(s, cfg, schedule, y, steps, eps, ops::gather_rows(enc.context, rows), valid);
        row.loss_main = loss.value().item();
      } else {
        g.freeze_prefix(kDenoiserPrefix);
        const ForwardPass f = forward(s, cfg, schedule, batch, cfg.tau, &rng);
        const WtaResult wta = loss_wta(f.candidates, cfg.K, batch.gt_future, batch.future_valid, W);
        if (wta.counted == 0) continue;
        const Var ce = loss_prob(f.logits, wta.winners);
        loss = ops::add(wta.loss, ops::scale(ce, config.lambda_ce));
        row.loss_main = wta.loss.value().item();
        row.loss_ce = ce.value().item();
        std::size_t count = 0;
        row.min_ade = batch_min_ade(f.candidates.value(), cfg.K, batch.gt_future, batch.future_valid, &count);
        row.min_ade /= static_cast<double>(std::max<std::size_t>(count, 1));
      }
      row.loss = loss.value().item();
      check_finite(row.loss, "loss", config.stage, it);
      g.backward(loss);
      grads = g.param_grads();
    } catch (const NumericError& e) {
      throw NumericError("training diverged at stage " + std::to_string(config.stage) + " iteration " +
                         std::to_string(it) + ": " + e.what());
    }
    row.grad_norm = global_grad_norm(grads);
    check_finite(row.grad_norm, "gradient norm", config.stage, it);
    clip_grad_norm(grads, config.grad_clip);
    adam_step(state.model.params, grads, state.adam, adam);

    if (it % config.log_every == 0 || it + 1 == config.iterations) {
      if (log != nullptr) log->push_back(row);
      if (on_log) on_log(row);
    }
  }
}

TrainState train_stage1(Model model, const std::vector<EgoSample>& data, const TrainConfig& config,
                        std::vector<TrainLogRow>* log, const TrainCallback& on_log) {
  if (config.stage != 1) throw ContractError("train_stage1: config.stage must be 1");
  TrainState state{std::move(model), AdamState{}, 1, 0};
  train(state, data, config, log, on_log);
  return state;
}

TrainState train_stage2(Model stage1, const std::vector<EgoSample>& data, const TrainConfig& config,
                        std::vector<TrainLogRow>* log, const TrainCallback& on_log) {
  if (config.stage != 2) throw ContractError("train_stage2: config.stage must be 2");
  std::map<std::string, Tensor> frozen;
  for (const auto& [name, value] : stage1.params) {
    if (name.rfind(kDenoiserPrefix, 0) == 0) frozen.emplace(name, value);
  }
  TrainState state{std::move(stage1), AdamState{}, 2, 0};
  train(state, data, config, log, on_log);
  for (const auto& [name, value] : frozen) {
    if (!(state.model.params.get(name) == value)) {
      throw Error("train_stage2: frozen denoiser parameter " + name + " changed");
    }
  }
  return state;
}

void write_train_log(const std::vector<TrainLogRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log " + path);
  out << "iteration,stage,loss,loss_main,loss_ce,min_ade,grad_norm\n";
  char buf[256];
  for (const TrainLogRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.stage, r.loss,
                  r.loss_main, r.loss_ce, r.min_ade, r.grad_norm);
    out << buf;
  }
  if (!out) throw IoError("failed writing training log " + path);
}

}  // namespace parkdiff
