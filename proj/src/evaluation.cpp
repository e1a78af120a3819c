#include "placefuse/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "placefuse/binary_io.hpp"
#include "placefuse/errors.hpp"
#include "placefuse/ops.hpp"
#include "placefuse/parallel.hpp"

namespace placefuse {

DistanceMatrix distance_matrix(std::span<const Descriptor> queries,
                               std::span<const Descriptor> database, std::size_t threads) {
  DistanceMatrix dm;
  dm.rows = queries.size();
  dm.cols = database.size();
  dm.values.assign(dm.rows * dm.cols, 0.0);
  const std::size_t dim = !queries.empty() ? queries[0].dim() : (!database.empty() ? database[0].dim() : 0);
  for (const auto& q : queries) {
    if (q.dim() != dim) throw ShapeError("query descriptors differ in dimension");
    dm.query_ids.push_back(q.frame_id);
  }
  for (const auto& d : database) {
    if (d.dim() != dim) {
      throw ShapeError("database descriptor dimension " + std::to_string(d.dim()) +
                       " does not match query dimension " + std::to_string(dim));
    }
    dm.database_ids.push_back(d.frame_id);
  }
  parallel_for(dm.rows, threads, [&](std::size_t r) {
    for (std::size_t c = 0; c < dm.cols; ++c) {
      dm(r, c) = l1_distance(queries[r].values, database[c].values);
    }
  });
  return dm;
}

LabelMatrix label_matrix(std::span<const Pose> queries, std::span<const Pose> database,
                         const LabelRules& rules) {
  LabelMatrix m(queries.size(), database.size(), PairLabel::ignore);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = label_pair(queries[r], database[c], rules);
  }
  return m;
}

TruthMatrix retrieval_truth(std::span<const Pose> queries, std::span<const Pose> database,
                            const LabelRules& rules) {
  TruthMatrix m(queries.size(), database.size(), 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      m(r, c) = within_retrieval_radius(queries[r], database[c], rules) ? 1 : 0;
    }
  }
  return m;
}

PRCurve pr_and_map(const Matrix<double>& distances, const LabelMatrix& labels) {
  if (labels.rows != distances.rows || labels.cols != distances.cols) {
    throw ShapeError("label matrix does not match distance matrix");
  }
  struct Scored {
    double distance;
    bool positive;
  };
  std::vector<Scored> pairs;
  pairs.reserve(distances.values.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < distances.values.size(); ++i) {
    if (labels.values[i] == PairLabel::ignore) continue;
    const bool pos = labels.values[i] == PairLabel::positive;
    positives += pos ? 1 : 0;
    pairs.push_back({distances.values[i], pos});
  }
  if (positives == 0) throw EvaluationError("mAP undefined: no positive pairs");
  const std::size_t negatives = pairs.size() - positives;
  std::sort(pairs.begin(), pairs.end(),
            [](const Scored& a, const Scored& b) { return a.distance < b.distance; });

  PRCurve curve;
  std::size_t tp = 0, fp = 0;
  auto emit = [&](double threshold) {
    PRPoint p;
    p.threshold = threshold;
    p.tp = tp;
    p.fp = fp;
    p.fn = positives - tp;
    p.tn = negatives - fp;
    p.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    p.recall = static_cast<double>(tp) / static_cast<double>(positives);
    curve.points.push_back(p);
  };

  emit(pairs.front().distance - 1.0);
  std::size_t i = 0;
  while (i < pairs.size()) {
    // Threshold equal to this distance: only strictly smaller ones match.
    const double t = pairs[i].distance;
    emit(t);
    while (i < pairs.size() && pairs[i].distance == t) {
      (pairs[i].positive ? tp : fp) += 1;
      ++i;
    }
  }
  emit(pairs.back().distance + 1.0);

  // Threshold order already has non-decreasing recall; the stable sort only
  // states the integration order explicitly.
  std::vector<PRPoint> defined;
  for (const PRPoint& p : curve.points) {
    if (p.tp + p.fp > 0) defined.push_back(p);
  }
  std::stable_sort(defined.begin(), defined.end(),
                   [](const PRPoint& a, const PRPoint& b) { return a.recall < b.recall; });
  double area = 0.0;
  double prev_recall = 0.0;
  double prev_precision = defined.front().precision;
  for (const PRPoint& p : defined) {
    area += (p.recall - prev_recall) * 0.5 * (p.precision + prev_precision);
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  curve.mean_average_precision = area;
  return curve;
}

namespace {

// Position of the best-ranked true column under (distance, index) order,
// or cols when the row has no true column.
std::size_t first_true_rank(const Matrix<double>& distances, const TruthMatrix& truth,
                            std::size_t row) {
  std::size_t best = distances.cols;
  for (std::size_t c = 0; c < distances.cols; ++c) {
    if (!truth(row, c)) continue;
    if (best == distances.cols || distances(row, c) < distances(row, best)) best = c;
  }
  if (best == distances.cols) return best;
  const double d = distances(row, best);
  std::size_t rank = 0;
  for (std::size_t c = 0; c < distances.cols; ++c) {
    if (distances(row, c) < d || (distances(row, c) == d && c < best)) ++rank;
  }
  return rank;
}

}  // namespace

std::vector<double> recall_curve(const Matrix<double>& distances, const TruthMatrix& truth,
                                 std::size_t max_n) {
  if (truth.rows != distances.rows || truth.cols != distances.cols) {
    throw ShapeError("ground-truth matrix does not match distance matrix");
  }
  if (max_n < 1) throw ConfigError("recall@N requires N >= 1");
  std::vector<std::size_t> hits(max_n, 0);
  std::size_t eligible = 0;
  for (std::size_t r = 0; r < distances.rows; ++r) {
    const std::size_t rank = first_true_rank(distances, truth, r);
    if (rank == distances.cols) continue;
    ++eligible;
    for (std::size_t n = rank; n < max_n; ++n) ++hits[n];
  }
  if (eligible == 0) throw EvaluationError("recall@N undefined: no query has a true match");
  std::vector<double> out(max_n);
  for (std::size_t n = 0; n < max_n; ++n) {
    out[n] = 100.0 * static_cast<double>(hits[n]) / static_cast<double>(eligible);
  }
  return out;
}

double recall_at_n(const Matrix<double>& distances, const TruthMatrix& truth, std::size_t n) {
  return recall_curve(distances, truth, n).back();
}

SequenceSummary aggregate_sequence_pairs(std::span<const SequencePairMetrics> metrics,
                                         std::span<const std::string> sequences) {
  SequenceSummary summary;
  std::string missing;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    for (std::size_t j = i + 1; j < sequences.size(); ++j) {
      auto it = std::find_if(metrics.begin(), metrics.end(), [&](const SequencePairMetrics& m) {
        return m.query_sequence == sequences[i] && m.database_sequence == sequences[j];
      });
      if (it == metrics.end()) {
        missing += (missing.empty() ? "" : ", ") + sequences[i] + "/" + sequences[j];
      } else {
        summary.pairs.push_back(*it);
      }
    }
  }
  if (!missing.empty()) throw EvaluationError("missing sequence pairs: " + missing);
  if (summary.pairs.empty()) throw EvaluationError("no sequence pairs to aggregate");

  std::size_t n_recall = summary.pairs.front().recall.size();
  for (const auto& p : summary.pairs) n_recall = std::min(n_recall, p.recall.size());
  summary.mean_recall.assign(n_recall, 0.0);
  for (const auto& p : summary.pairs) {
    summary.mean_map += p.mean_average_precision;
    for (std::size_t n = 0; n < n_recall; ++n) summary.mean_recall[n] += p.recall[n];
  }
  const double count = static_cast<double>(summary.pairs.size());
  summary.mean_map /= count;
  for (double& r : summary.mean_recall) r /= count;
  return summary;
}

void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve,
                  const std::string& header_comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << header_comment << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "threshold,precision,recall,tp,fp,tn,fn\n";
  for (const PRPoint& p : curve.points) {
    os << p.threshold << ',' << p.precision << ',' << p.recall << ',' << p.tp << ',' << p.fp
       << ',' << p.tn << ',' << p.fn << '\n';
  }
  os << "# map = " << curve.mean_average_precision << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const SequenceSummary& summary,
                       const std::string& header_comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << header_comment << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "query_seq,db_seq,map";
  for (std::size_t n = 1; n <= summary.mean_recall.size(); ++n) os << ",recall" << n;
  os << '\n';
  for (const auto& p : summary.pairs) {
    os << p.query_sequence << ',' << p.database_sequence << ',' << p.mean_average_precision;
    for (std::size_t n = 0; n < summary.mean_recall.size(); ++n) os << ',' << p.recall[n];
    os << '\n';
  }
  os << "mean,mean," << summary.mean_map;
  for (double r : summary.mean_recall) os << ',' << r;
  os << '\n';
}

PCAModel pca_fit(std::span<const Descriptor> samples, std::size_t output_dim) {
  if (samples.empty()) throw InputError("PCA needs at least one sample");
  const std::size_t dim = samples[0].dim();
  const std::size_t n = samples.size();
  if (output_dim == 0 || output_dim > dim) {
    throw InputError("PCA output dimension must lie in [1, " + std::to_string(dim) + "]");
  }
  if (dim > n) {
    throw InputError("PCA needs at least as many samples (" + std::to_string(n) +
                     ") as input dimensions (" + std::to_string(dim) + ")");
  }
  Eigen::MatrixXd data(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (samples[i].dim() != dim) throw ShapeError("PCA samples differ in dimension");
    for (std::size_t j = 0; j < dim; ++j) data(i, j) = samples[i].values[j];
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw EvaluationError("PCA eigen-decomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Eigen::MatrixXd& evecs = solver.eigenvectors();
  const double largest = std::max(evals(static_cast<Eigen::Index>(dim) - 1), 0.0);
  const double tol = largest * static_cast<double>(dim) * std::numeric_limits<double>::epsilon() * 16.0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals(i) > tol) ++rank;
  }
  if (output_dim > rank) {
    throw InputError("PCA output dimension " + std::to_string(output_dim) +
                     " exceeds the data rank " + std::to_string(rank));
  }

  PCAModel model;
  model.input_dim = dim;
  model.output_dim = output_dim;
  model.mean.assign(mean.data(), mean.data() + dim);
  model.projection.resize(output_dim * dim);
  model.explained_variance.resize(output_dim);
  for (std::size_t k = 0; k < output_dim; ++k) {
    const Eigen::Index col = static_cast<Eigen::Index>(dim - 1 - k);
    Eigen::VectorXd axis = evecs.col(col);
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis(pivot) < 0) axis = -axis;
    for (std::size_t j = 0; j < dim; ++j) model.projection[k * dim + j] = axis(static_cast<Eigen::Index>(j));
    model.explained_variance[k] = evals(col);
  }
  return model;
}

Descriptor pca_project(const PCAModel& model, const Descriptor& d) {
  if (d.dim() != model.input_dim) {
    throw ShapeError("PCA model expects dimension " + std::to_string(model.input_dim) + ", got " +
                     std::to_string(d.dim()));
  }
  Descriptor out;
  out.modality = d.modality;
  out.frame_id = d.frame_id;
  out.values.assign(model.output_dim, 0.0);
  for (std::size_t k = 0; k < model.output_dim; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < model.input_dim; ++j) {
      acc += model.projection[k * model.input_dim + j] * (d.values[j] - model.mean[j]);
    }
    out.values[k] = acc;
  }
  return out;
}

void write_pca_model(const std::filesystem::path& path, const PCAModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  binio::write_bytes(os, "PCA1");
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(model.input_dim));
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(model.output_dim));
  for (double v : model.mean) binio::write<double>(os, v);
  for (double v : model.projection) binio::write<double>(os, v);
  for (double v : model.explained_variance) binio::write<double>(os, v);
}

PCAModel read_pca_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open PCA model: " + path.string());
  binio::expect_magic(is, "PCA1");
  PCAModel m;
  m.input_dim = binio::read<std::uint32_t>(is, "input dim");
  m.output_dim = binio::read<std::uint32_t>(is, "output dim");
  m.mean.resize(m.input_dim);
  m.projection.resize(m.input_dim * m.output_dim);
  m.explained_variance.resize(m.output_dim);
  for (double& v : m.mean) v = binio::read<double>(is, "mean");
  for (double& v : m.projection) v = binio::read<double>(is, "projection");
  for (double& v : m.explained_variance) v = binio::read<double>(is, "variance");
  return m;
}

}  // namespace placefuse
