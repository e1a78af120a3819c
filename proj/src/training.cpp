#include "placefuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include "placefuse/errors.hpp"
#include "placefuse/ops.hpp"
#include "placefuse/parallel.hpp"

namespace placefuse {

PairLabel label_pair(const Pose& a, const Pose& b, const LabelRules& rules) {
  const double d = planar_distance(a, b);
  const double heading_limit = rules.positive_heading_deg * std::numbers::pi / 180.0;
  if (d < rules.positive_distance && heading_difference(a, b) < heading_limit) {
    return PairLabel::positive;
  }
  if (d > rules.negative_distance) return PairLabel::negative;
  return PairLabel::ignore;
}

bool within_retrieval_radius(const Pose& a, const Pose& b, const LabelRules& rules) {
  return planar_distance(a, b) < rules.negative_distance;
}

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < margin)) {
    throw ConfigError("loss requires 0 < alpha < m (alpha = " + std::to_string(alpha) +
                      ", m = " + std::to_string(margin) + ")");
  }
}

int label_sign(PairLabel label) {
  switch (label) {
    case PairLabel::positive:
      return 1;
    case PairLabel::negative:
      return -1;
    case PairLabel::ignore:
      break;
  }
  throw ContractError("ignore-labeled pairs carry no loss");
}

double margin_loss(int y, double distance, const LossConfig& cfg) {
  return std::max(cfg.alpha + y * (distance - cfg.margin), 0.0);
}

double margin_loss_grad(int y, double distance, const LossConfig& cfg) {
  return cfg.alpha + y * (distance - cfg.margin) > 0.0 ? static_cast<double>(y) : 0.0;
}

void MiningConfig::validate() const {
  if (k0 < 1 || n0 < 1) throw ConfigError("mining requires k0 >= 1 and n0 >= 1");
  if (!(gamma_k >= 1.0)) throw ConfigError("gamma_k must be >= 1");
  if (growth_period < 1) throw ConfigError("R (refreshes per pool growth) must be >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (k_max < k0) throw ConfigError("k_max must be >= k0");
}

MiningState MiningState::initial(const MiningConfig& cfg) {
  MiningState s;
  s.k = cfg.k0;
  s.n = cfg.n0;
  return s;
}

HardSelection select_hardest(const Matrix<double>& losses, const LabelMatrix& labels,
                             std::span<const std::size_t> query_ids,
                             std::span<const std::size_t> database_ids, std::size_t n) {
  if (labels.rows != losses.rows || labels.cols != losses.cols ||
      query_ids.size() != losses.rows || database_ids.size() != losses.cols) {
    throw ShapeError("mining pool matrices disagree in size");
  }
  HardSelection sel;
  std::size_t zero = 0;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < losses.values.size(); ++i) {
    if (labels.values[i] == PairLabel::ignore) continue;
    ++sel.scored_pairs;
    if (losses.values[i] > 0.0) {
      eligible.push_back(i);
    } else {
      ++zero;
    }
  }
  sel.zero_loss_fraction =
      sel.scored_pairs > 0 ? static_cast<double>(zero) / static_cast<double>(sel.scored_pairs) : 1.0;
  std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    return losses.values[a] > losses.values[b];
  });
  sel.shortfall = eligible.size() < n;
  eligible.resize(std::min(n, eligible.size()));
  for (std::size_t idx : eligible) {
    const std::size_t r = idx / losses.cols;
    const std::size_t c = idx % losses.cols;
    sel.pairs.push_back({query_ids[r], database_ids[c], labels.values[idx]});
    sel.losses.push_back(losses.values[idx]);
  }
  return sel;
}

HardSelection mine_hard(const DescriptorModel& model, std::span<const Observation> observations,
                        std::span<const std::size_t> query_ids,
                        std::span<const std::size_t> database_ids, Modality mode,
                        const LossConfig& loss, MiningState& state, std::size_t threads) {
  for (std::size_t id : query_ids) {
    if (id >= observations.size()) throw InputError("mining pool index out of range");
  }
  for (std::size_t id : database_ids) {
    if (id >= observations.size()) throw InputError("mining pool index out of range");
  }
  const std::size_t kq = query_ids.size();
  const std::size_t kd = database_ids.size();
  std::vector<std::vector<double>> desc(kq + kd);
  parallel_for(kq + kd, threads, [&](std::size_t i) {
    const std::size_t id = i < kq ? query_ids[i] : database_ids[i - kq];
    desc[i] = model.forward(observations[id], mode);
  });
  Matrix<double> losses(kq, kd, 0.0);
  LabelMatrix labels(kq, kd, PairLabel::ignore);
  for (std::size_t r = 0; r < kq; ++r) {
    for (std::size_t c = 0; c < kd; ++c) {
      const auto& q = observations[query_ids[r]];
      const auto& d = observations[database_ids[c]];
      if (query_ids[r] == database_ids[c]) continue;
      labels(r, c) = label_pair(q.pose, d.pose);
      if (labels(r, c) == PairLabel::ignore) continue;
      losses(r, c) = margin_loss(label_sign(labels(r, c)), l1_distance(desc[r], desc[kq + c]), loss);
    }
  }
  HardSelection sel = select_hardest(losses, labels, query_ids, database_ids, state.n);
  state.zero_loss_fraction = sel.zero_loss_fraction;
  return sel;
}

MiningState adapt_schedule(MiningState state, const MiningConfig& cfg) {
  ++state.refreshes;
  if (state.refreshes % cfg.growth_period == 0) {
    const auto grown = static_cast<std::size_t>(std::ceil(static_cast<double>(state.k) * cfg.gamma_k));
    state.k = std::min(cfg.k_max, std::max(grown, state.k));
  }
  if (state.zero_loss_fraction > cfg.tau) state.n = std::max<std::size_t>(1, state.n / 2);
  return state;
}

Batch compose_batch(std::span<const LabeledPair> hard, std::size_t& hard_cursor,
                    std::span<const LabeledPair> positives, std::span<const LabeledPair> negatives,
                    std::size_t batch_size, Rng& rng) {
  if (batch_size == 0 || batch_size % 3 != 0) {
    throw ConfigError("batch_size must be a positive multiple of 3, got " + std::to_string(batch_size));
  }
  if (positives.empty()) throw InputError("positive pair pool is empty");
  if (negatives.empty()) throw InputError("negative pair pool is empty");
  const std::size_t third = batch_size / 3;
  Batch batch;
  batch.pairs.reserve(batch_size);
  for (std::size_t t = 0; t < third; ++t) {
    if (!hard.empty()) {
      batch.pairs.push_back({hard[hard_cursor % hard.size()], PairSource::hard});
      ++hard_cursor;
    } else {
      const std::size_t r = rng.index(positives.size() + negatives.size());
      const LabeledPair& p = r < positives.size() ? positives[r] : negatives[r - positives.size()];
      batch.pairs.push_back({p, PairSource::backfill});
      ++batch.backfilled;
    }
  }
  for (std::size_t t = 0; t < third; ++t) {
    batch.pairs.push_back({positives[rng.index(positives.size())], PairSource::positive});
  }
  for (std::size_t t = 0; t < third; ++t) {
    batch.pairs.push_back({negatives[rng.index(negatives.size())], PairSource::negative});
  }
  return batch;
}

std::size_t default_batch_size(Modality mode) { return mode == Modality::composite ? 12 : 24; }

TrainConfig TrainConfig::from_config(const Config& c) {
  TrainConfig t;
  t.sgd.learning_rate = c.get_double("lr", t.sgd.learning_rate);
  t.sgd.momentum = c.get_double("momentum", t.sgd.momentum);
  t.sgd.weight_decay = c.get_double("weight_decay", t.sgd.weight_decay);
  t.loss.margin = c.get_double("m", t.loss.margin);
  t.loss.alpha = c.get_double("alpha", t.loss.alpha);
  t.mining.k0 = c.get_size("k0", t.mining.k0);
  t.mining.n0 = c.get_size("n0", t.mining.n0);
  t.mining.gamma_k = c.get_double("gamma_k", t.mining.gamma_k);
  t.mining.growth_period = c.get_size("R", t.mining.growth_period);
  t.mining.tau = c.get_double("tau", t.mining.tau);
  t.mining.k_max = c.get_size("k_max", std::max(t.mining.k_max, t.mining.k0));
  t.mode = parse_modality(c.get_string("mode", modality_name(t.mode)));
  t.batch_size = c.get_size("batch_size", default_batch_size(t.mode));
  t.iterations = c.get_size("iterations", t.iterations);
  t.validation_period = c.get_size("validation_period", t.validation_period);
  t.negative_pool_size = c.get_size("negative_pool_size", t.negative_pool_size);
  t.seed = c.get_u64("seed", t.seed);
  t.threads = c.get_size("threads", t.threads);
  return t;
}

void TrainConfig::validate() const {
  loss.validate();
  mining.validate();
  if (!(sgd.learning_rate >= 0.0) || !std::isfinite(sgd.learning_rate)) {
    throw ConfigError("lr must be a finite value >= 0");
  }
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(sgd.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size == 0 || batch_size % 3 != 0) {
    throw ConfigError("batch_size must be a positive multiple of 3, got " + std::to_string(batch_size));
  }
  if (validation_period == 0) throw ConfigError("validation_period must be >= 1");
  if (negative_pool_size == 0) throw ConfigError("negative_pool_size must be >= 1");
}

namespace {

bool pairable(const Observation& a, const Observation& b, bool single_sequence) {
  return single_sequence ? a.frame_id != b.frame_id : a.sequence != b.sequence;
}

bool single_sequence(std::span<const Observation> obs) {
  for (const auto& o : obs) {
    if (o.sequence != obs.front().sequence) return false;
  }
  return true;
}

// Observation indices grouped by sequence id, in ascending id order.
std::vector<std::vector<std::size_t>> group_by_sequence(std::span<const Observation> obs) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < obs.size(); ++i) groups[obs[i].sequence].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [seq, ids] : groups) out.push_back(std::move(ids));
  return out;
}

// Up to k distinct entries of `ids`, in random order.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> ids, std::size_t k,
                                                    Rng& rng) {
  k = std::min(k, ids.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);
  ids.resize(k);
  return ids;
}

struct PairOutcome {
  double loss = 0.0;
  GradientSet grads;
};

PairOutcome pair_step(const DescriptorModel& model, std::span<const Observation> obs,
                      const LabeledPair& pair, Modality mode, const LossConfig& loss_cfg) {
  DescriptorModel::Trace tq, td;
  const std::vector<double> fq = model.forward(obs[pair.query], mode, &tq);
  const std::vector<double> fd = model.forward(obs[pair.database], mode, &td);
  const int y = label_sign(pair.label);
  const double d = l1_distance(fq, fd);
  PairOutcome out;
  out.loss = margin_loss(y, d, loss_cfg);
  out.grads = GradientSet(model.parameters());
  const double g = margin_loss_grad(y, d, loss_cfg);
  if (g != 0.0) {
    const Tensor tq_vec(Shape{fq.size()}, fq);
    const Tensor td_vec(Shape{fd.size()}, fd);
    auto [gq, gd] = l1_distance_backward(tq_vec, td_vec, g);
    model.backward(tq, gq.data(), out.grads);
    model.backward(td, gd.data(), out.grads);
  }
  return out;
}

}  // namespace

std::vector<LabeledPair> positive_pairs(std::span<const Observation> obs, const LabelRules& rules) {
  const bool single = single_sequence(obs);
  std::vector<LabeledPair> out;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = i + 1; j < obs.size(); ++j) {
      if (!pairable(obs[i], obs[j], single)) continue;
      if (label_pair(obs[i].pose, obs[j].pose, rules) == PairLabel::positive) {
        out.push_back({i, j, PairLabel::positive});
      }
    }
  }
  return out;
}

std::vector<LabeledPair> sample_negative_pairs(std::span<const Observation> obs, std::size_t count,
                                               Rng& rng, const LabelRules& rules) {
  std::vector<LabeledPair> out;
  if (obs.size() < 2) return out;
  const bool single = single_sequence(obs);
  const std::size_t attempts = count * 50;
  for (std::size_t a = 0; a < attempts && out.size() < count; ++a) {
    const std::size_t i = rng.index(obs.size());
    const std::size_t j = rng.index(obs.size());
    if (!pairable(obs[i], obs[j], single)) continue;
    if (label_pair(obs[i].pose, obs[j].pose, rules) == PairLabel::negative) {
      out.push_back({i, j, PairLabel::negative});
    }
  }
  return out;
}

std::optional<double> validation_recall1(const DescriptorModel& model,
                                         std::span<const Observation> observations, Modality mode,
                                         std::size_t threads) {
  if (observations.empty()) return std::nullopt;
  const std::vector<Descriptor> desc = model.extract_all(observations, mode, threads);
  const auto groups = group_by_sequence(observations);
  auto recall_between = [&](const std::vector<std::size_t>& qs,
                            const std::vector<std::size_t>& ds) -> std::optional<double> {
    std::vector<Descriptor> qd, dd;
    std::vector<Pose> qp, dp;
    for (std::size_t i : qs) {
      qd.push_back(desc[i]);
      qp.push_back(observations[i].pose);
    }
    for (std::size_t i : ds) {
      dd.push_back(desc[i]);
      dp.push_back(observations[i].pose);
    }
    try {
      return recall_at_n(distance_matrix(qd, dd), retrieval_truth(qp, dp), 1);
    } catch (const EvaluationError&) {
      return std::nullopt;
    }
  };
  double sum = 0.0;
  std::size_t count = 0;
  if (groups.size() == 1) {
    if (auto r = recall_between(groups[0], groups[0])) {
      sum += *r;
      ++count;
    }
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      if (auto r = recall_between(groups[i], groups[j])) {
        sum += *r;
        ++count;
      }
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

TrainResult train(DescriptorModel& model, std::span<const Observation> train_set,
                  std::span<const Observation> validation_set, const TrainConfig& cfg,
                  std::ostream* progress, const std::filesystem::path* snapshot_dir) {
  cfg.validate();
  model.check_mode(cfg.mode);
  if (train_set.size() < 2) throw InputError("training split needs at least two observations");

  Rng rng(cfg.seed);
  const std::vector<LabeledPair> positives = positive_pairs(train_set);
  if (positives.empty()) throw InputError("training split contains no positive pairs");
  const std::vector<LabeledPair> negatives =
      sample_negative_pairs(train_set, cfg.negative_pool_size, rng);
  if (negatives.empty()) throw InputError("training split contains no negative pairs");
  const auto groups = group_by_sequence(train_set);

  ParameterSet& params = model.parameters();
  SgdOptimizer optimizer(cfg.sgd);
  MiningState state = MiningState::initial(cfg.mining);
  std::vector<LabeledPair> hard;
  std::size_t hard_cursor = 0;
  std::size_t next_refresh = 1;
  const std::size_t chunk = std::max<std::size_t>(1, cfg.threads);

  TrainResult result;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    if (it == next_refresh) {
      std::size_t qa = 0, qb = 0;
      if (groups.size() > 1) {
        qa = rng.index(groups.size());
        qb = (qa + 1 + rng.index(groups.size() - 1)) % groups.size();
      }
      const auto qids = sample_without_replacement(groups[qa], state.k, rng);
      const auto dids = sample_without_replacement(groups[qb], state.k, rng);
      HardSelection sel = mine_hard(model, train_set, qids, dids, cfg.mode, cfg.loss, state, cfg.threads);
      hard = std::move(sel.pairs);
      hard_cursor = 0;
      const std::size_t period = state.n;
      state = adapt_schedule(state, cfg.mining);
      next_refresh = it + period;
    }
    state.iteration = it;

    const Batch batch = compose_batch(hard, hard_cursor, positives, negatives, cfg.batch_size, rng);
    if (batch.backfilled > 0) {
      result.backfilled_pairs += batch.backfilled;
      if (progress) {
        *progress << "iter " << it << ": hard set empty, backfilled " << batch.backfilled
                  << " random pairs\n";
      }
    }

    GradientSet total(params);
    double loss_sum = 0.0;
    std::vector<double> pair_losses(batch.pairs.size());
    for (std::size_t start = 0; start < batch.pairs.size(); start += chunk) {
      const std::size_t count = std::min(chunk, batch.pairs.size() - start);
      std::vector<PairOutcome> outcomes(count);
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        outcomes[i] = pair_step(model, train_set, batch.pairs[start + i].pair, cfg.mode, cfg.loss);
      });
      for (std::size_t i = 0; i < count; ++i) {
        pair_losses[start + i] = outcomes[i].loss;
        loss_sum += outcomes[i].loss;
        total.add(outcomes[i].grads);
      }
    }
    const double batch_loss = loss_sum / static_cast<double>(batch.pairs.size());
    if (!std::isfinite(batch_loss)) {
      std::string where;
      if (snapshot_dir) {
        std::filesystem::create_directories(*snapshot_dir);
        const auto base = *snapshot_dir / ("nonfinite_iter" + std::to_string(it));
        save_checkpoint(base.string() + ".ckpt", params);
        std::ofstream os(base.string() + ".txt");
        os << "iteration " << it << "\nquery,database,label,loss\n";
        for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
          const auto& p = batch.pairs[i].pair;
          os << p.query << ',' << p.database << ',' << label_sign(p.label) << ',' << pair_losses[i]
             << '\n';
        }
        where = " (snapshot at " + base.string() + ".*)";
      }
      throw NumericalError("non-finite loss at iteration " + std::to_string(it) + where);
    }
    total.scale(1.0 / static_cast<double>(batch.pairs.size()));
    total.write_to(params);
    optimizer.step(params);

    TrainLogRow row;
    row.iteration = it;
    row.loss = batch_loss;
    row.zero_loss_fraction = state.zero_loss_fraction;
    row.k = state.k;
    row.n = state.n;
    if (!validation_set.empty() && (it % cfg.validation_period == 0 || it == cfg.iterations)) {
      row.val_recall1 = validation_recall1(model, validation_set, cfg.mode, cfg.threads);
      if (row.val_recall1 && (!result.best_val_recall1 || *row.val_recall1 > *result.best_val_recall1)) {
        result.best_val_recall1 = row.val_recall1;
        result.best = params;
        result.best_iteration = it;
      }
      if (progress && row.val_recall1) {
        *progress << "iter " << it << ": loss " << batch_loss << ", validation recall@1 "
                  << *row.val_recall1 << "\n";
      }
    }
    result.log.push_back(row);
  }
  if (!result.best_val_recall1) {
    result.best = params;
    result.best_iteration = cfg.iterations;
  }
  return result;
}

void write_train_log(const std::filesystem::path& path, std::span<const TrainLogRow> rows,
                     const std::string& header_comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << header_comment << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "iter,loss,zero_loss_frac,k,n,val_recall1\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.loss << ',' << r.zero_loss_fraction << ',' << r.k << ',' << r.n
       << ',';
    if (r.val_recall1) os << *r.val_recall1;
    os << '\n';
  }
}

}  // namespace placefuse
