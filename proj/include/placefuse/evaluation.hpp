#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "placefuse/labels.hpp"
#include "placefuse/nets.hpp"

namespace placefuse {

/// Dense row-major matrix; rows index queries, columns database entries.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), values(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

using LabelMatrix = Matrix<PairLabel>;
using TruthMatrix = Matrix<std::uint8_t>;

/// All-pairs L1 distances between query and database descriptors.
struct DistanceMatrix : Matrix<double> {
  std::vector<std::uint64_t> query_ids;
  std::vector<std::uint64_t> database_ids;
};

DistanceMatrix distance_matrix(std::span<const Descriptor> queries,
                               std::span<const Descriptor> database, std::size_t threads = 1);

LabelMatrix label_matrix(std::span<const Pose> queries, std::span<const Pose> database,
                         const LabelRules& rules = {});
TruthMatrix retrieval_truth(std::span<const Pose> queries, std::span<const Pose> database,
                            const LabelRules& rules = {});

struct PRPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;
  double mean_average_precision = 0.0;
};

/// Exhaustive pairwise matching. A pair is declared a match when its
/// distance is strictly below the threshold. Thresholds sweep every unique
/// distance among non-ignore pairs plus one sentinel below the minimum and
/// one above the maximum. Points with no declared matches report precision
/// 1 and are left out of the area. The area is the trapezoid rule over
/// recall, starting from (recall 0, precision of the first point).
/// Throws EvaluationError when there is no positive pair.
PRCurve pr_and_map(const Matrix<double>& distances, const LabelMatrix& labels);

/// Percentage of eligible queries (at least one true column) whose N
/// nearest database entries contain a true column. Distance ties go to the
/// lower column index. Throws EvaluationError if no query is eligible.
double recall_at_n(const Matrix<double>& distances, const TruthMatrix& truth, std::size_t n);
/// recall@1 .. recall@max_n.
std::vector<double> recall_curve(const Matrix<double>& distances, const TruthMatrix& truth,
                                 std::size_t max_n);

struct SequencePairMetrics {
  std::string query_sequence;
  std::string database_sequence;
  double mean_average_precision = 0.0;
  std::vector<double> recall;  // recall@1 .. recall@N in percent
};

struct SequenceSummary {
  std::vector<SequencePairMetrics> pairs;  // ordered as the expected pairs
  double mean_map = 0.0;
  std::vector<double> mean_recall;
};

/// Expects one record for every (sequences[i], sequences[j]) with i < j,
/// query first. Throws EvaluationError naming every missing pair.
SequenceSummary aggregate_sequence_pairs(std::span<const SequencePairMetrics> metrics,
                                         std::span<const std::string> sequences);

void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve,
                  const std::string& header_comment = {});
void write_summary_csv(const std::filesystem::path& path, const SequenceSummary& summary,
                       const std::string& header_comment = {});

/// Principal axes of a descriptor set.
struct PCAModel {
  std::vector<double> mean;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> projection;           // output_dim x input_dim, rows orthonormal
  std::vector<double> explained_variance;   // non-increasing, length output_dim
};

/// Sample-covariance PCA. Requires output_dim <= input_dim <= sample count
/// and output_dim <= numerical rank of the centered data.
PCAModel pca_fit(std::span<const Descriptor> samples, std::size_t output_dim);
Descriptor pca_project(const PCAModel& model, const Descriptor& d);

void write_pca_model(const std::filesystem::path& path, const PCAModel& model);
PCAModel read_pca_model(const std::filesystem::path& path);

}  // namespace placefuse
