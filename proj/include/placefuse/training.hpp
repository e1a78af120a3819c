#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "placefuse/config.hpp"
#include "placefuse/evaluation.hpp"
#include "placefuse/labels.hpp"
#include "placefuse/nets.hpp"
#include "placefuse/optimizer.hpp"
#include "placefuse/random.hpp"

namespace placefuse {

/// Hinge loss on descriptor distance: max(alpha + y * (d - margin), 0).
struct LossConfig {
  double margin = 1.0;
  double alpha = 0.2;

  void validate() const;
};

/// +1 for positive pairs, -1 for negative ones. Throws ContractError for
/// ignore-labeled pairs.
int label_sign(PairLabel label);

double margin_loss(int y, double distance, const LossConfig& cfg);
/// d(loss)/d(distance); 0 at the hinge point.
double margin_loss_grad(int y, double distance, const LossConfig& cfg);

/// A pair of observations by index into the training set.
struct LabeledPair {
  std::size_t query = 0;
  std::size_t database = 0;
  PairLabel label = PairLabel::ignore;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

struct MiningConfig {
  std::size_t k0 = 24;
  std::size_t n0 = 8;
  double gamma_k = 1.25;
  std::size_t growth_period = 10;  // refreshes between pool growth steps
  double tau = 0.9;
  std::size_t k_max = 256;

  void validate() const;
};

struct MiningState {
  std::size_t k = 24;
  std::size_t n = 8;
  double zero_loss_fraction = 0.0;
  std::size_t iteration = 0;
  std::size_t refreshes = 0;

  static MiningState initial(const MiningConfig& cfg);
};

struct HardSelection {
  std::vector<LabeledPair> pairs;  // descending loss, ties by pair index
  std::vector<double> losses;      // loss of each selected pair
  std::size_t scored_pairs = 0;    // non-ignore pairs in the pool
  double zero_loss_fraction = 1.0;
  bool shortfall = false;          // fewer than n pairs had non-zero loss
};

/// Picks the n largest-loss pairs from a k_q x k_d pool. Only non-ignore
/// pairs with strictly positive loss are eligible; equal losses go to the
/// lower row-major pair index. `query_ids` / `database_ids` map matrix rows
/// and columns back to observation indices.
HardSelection select_hardest(const Matrix<double>& losses, const LabelMatrix& labels,
                             std::span<const std::size_t> query_ids,
                             std::span<const std::size_t> database_ids, std::size_t n);

/// Computes the 2k descriptors of the pool, the k^2 pair losses, and the
/// hardest state.n pairs. Updates state.zero_loss_fraction.
HardSelection mine_hard(const DescriptorModel& model, std::span<const Observation> observations,
                        std::span<const std::size_t> query_ids,
                        std::span<const std::size_t> database_ids, Modality mode,
                        const LossConfig& loss, MiningState& state, std::size_t threads = 1);

/// Called once per refresh. Every growth_period refreshes k grows to
/// min(k_max, ceil(k * gamma_k)); when the zero-loss fraction exceeds tau,
/// n halves (never below 1).
MiningState adapt_schedule(MiningState state, const MiningConfig& cfg);

enum class PairSource : std::uint8_t { hard, positive, negative, backfill };

struct BatchPair {
  LabeledPair pair;
  PairSource source = PairSource::hard;
};

struct Batch {
  std::vector<BatchPair> pairs;
  std::size_t backfilled = 0;
};

/// batch_size / 3 pairs each from the hard set (cycled from `hard_cursor`),
/// the positive pool and the negative pool. Missing hard pairs are replaced
/// by random picks from the union of both pools. Throws ConfigError if
/// batch_size is not a positive multiple of 3 and InputError if a pool it
/// must draw from is empty.
Batch compose_batch(std::span<const LabeledPair> hard, std::size_t& hard_cursor,
                    std::span<const LabeledPair> positives, std::span<const LabeledPair> negatives,
                    std::size_t batch_size, Rng& rng);

/// 12 for composite models, 24 for single-modality ones.
std::size_t default_batch_size(Modality mode);

struct TrainConfig {
  SgdConfig sgd;
  LossConfig loss;
  MiningConfig mining;
  Modality mode = Modality::composite;
  std::size_t batch_size = 12;
  std::size_t iterations = 500;
  std::size_t validation_period = 50;
  std::size_t negative_pool_size = 20000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  /// Reads lr, momentum, weight_decay, m, alpha, batch_size, k0, n0,
  /// gamma_k, R, tau, k_max, iterations, validation_period,
  /// negative_pool_size, seed, threads and mode. batch_size defaults to
  /// default_batch_size(mode).
  static TrainConfig from_config(const Config& cfg);
  void validate() const;
};

struct TrainLogRow {
  std::size_t iteration = 0;
  double loss = 0.0;
  double zero_loss_fraction = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
  std::optional<double> val_recall1;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  ParameterSet best;                   // parameters at the best validation score
  std::optional<double> best_val_recall1;
  std::size_t best_iteration = 0;
  std::size_t backfilled_pairs = 0;
};

/// Pairs between different sequences (any pair when there is only one
/// sequence), excluding an observation paired with itself.
std::vector<LabeledPair> positive_pairs(std::span<const Observation> observations,
                                        const LabelRules& rules = {});
std::vector<LabeledPair> sample_negative_pairs(std::span<const Observation> observations,
                                               std::size_t count, Rng& rng,
                                               const LabelRules& rules = {});

/// Mean recall@1 over sequence pairs (i, j), i < j, with sequence i as
/// queries. A single sequence is matched against itself. Pairs without
/// eligible queries are skipped; nullopt when none remain.
std::optional<double> validation_recall1(const DescriptorModel& model,
                                         std::span<const Observation> observations, Modality mode,
                                         std::size_t threads = 1);

/// Runs the mining / batch / step loop on `model` in place. `progress`
/// receives human-readable notes (backfills, validation). On a non-finite
/// loss a snapshot is written to `snapshot_dir` (when given) and
/// NumericalError is thrown.
TrainResult train(DescriptorModel& model, std::span<const Observation> train_set,
                  std::span<const Observation> validation_set, const TrainConfig& cfg,
                  std::ostream* progress = nullptr,
                  const std::filesystem::path* snapshot_dir = nullptr);

void write_train_log(const std::filesystem::path& path, std::span<const TrainLogRow> rows,
                     const std::string& header_comment = {});

}  // namespace placefuse
