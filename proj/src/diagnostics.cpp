#include "glatent/diagnostics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "glatent/util.hpp"

namespace glatent {

PcaResult pca(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw std::invalid_argument("pca: no points");
  const std::size_t c = points[0].size();
  if (c == 0) throw std::invalid_argument("pca: zero-dimensional points");
  if (points.size() < c + 1)
    throw std::invalid_argument("pca: " + std::to_string(points.size()) +
                                " points cannot estimate a " + std::to_string(c) +
                                "-dimensional covariance; need at least " + std::to_string(c + 1));
  for (const auto& p : points)
    if (p.size() != c) throw std::invalid_argument("pca: inconsistent point dimensions");

  const auto n = static_cast<Eigen::Index>(points.size());
  const auto dim = static_cast<Eigen::Index>(c);
  Eigen::MatrixXd data(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      data(i, j) = points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  const Eigen::RowVectorXd mean = data.colwise().mean();
  data.rowwise() -= mean;
  const Eigen::MatrixXd cov = data.transpose() * data / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca: eigen-decomposition did not converge");

  // Eigen returns ascending eigenvalues; flip to descending and fix signs so
  // each vector's largest-magnitude component is positive.
  PcaResult result;
  for (Eigen::Index j = dim - 1; j >= 0; --j) {
    result.eigenvalues.push_back(solver.eigenvalues()(j));
    Eigen::VectorXd vec = solver.eigenvectors().col(j);
    Eigen::Index arg = 0;
    vec.cwiseAbs().maxCoeff(&arg);
    if (vec(arg) < 0) vec = -vec;
    result.eigenvectors.emplace_back(vec.data(), vec.data() + dim);
  }
  return result;
}

CosineMatrix cosine_alignment(const std::vector<std::vector<double>>& points) {
  const PcaResult p = pca(points);
  const int c = static_cast<int>(p.eigenvalues.size());
  CosineMatrix m;
  m.c = c;
  m.eigenvalues = p.eigenvalues;
  m.cells.resize(static_cast<std::size_t>(c) * c);
  // Basis vector e_i dotted with eigenvector c_j is just component i of c_j.
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j)
      m.cells[static_cast<std::size_t>(i) * c + j] =
          std::abs(p.eigenvectors[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);

  m.j_star = c - 1;  // eigenvalues are descending
  m.i_star = 0;
  for (int i = 1; i < c; ++i)
    if (m.cell(i, m.j_star) > m.cell(m.i_star, m.j_star)) m.i_star = i;
  m.white.assign(static_cast<std::size_t>(c) * c, false);
  for (int j = 0; j < c; ++j) m.white[static_cast<std::size_t>(m.i_star) * c + j] = true;
  for (int i = 0; i < c; ++i) m.white[static_cast<std::size_t>(i) * c + m.j_star] = true;
  return m;
}

double white_cell_entropy(const CosineMatrix& matrix) {
  double total = 0;
  for (std::size_t k = 0; k < matrix.white.size(); ++k)
    if (matrix.white[k]) total += matrix.cells[k];
  if (total <= 0)
    throw std::invalid_argument("white-cell entropy is undefined: all white cells are zero");
  double entropy = 0;
  for (std::size_t k = 0; k < matrix.white.size(); ++k) {
    if (!matrix.white[k]) continue;
    const double p = matrix.cells[k] / total;
    if (p > 0) entropy -= p * std::log(p);
  }
  return entropy;
}

double experiment_entropy(const std::vector<double>& label_entropies) {
  if (label_entropies.empty())
    throw std::invalid_argument("experiment entropy needs at least one label");
  double sum = 0;
  for (double e : label_entropies) sum += e;
  return sum / static_cast<double>(label_entropies.size());
}

AlignmentReport alignment_report(const ModelParams& params, const ModelConfig& config,
                                 const std::vector<LoadedObservation>& observations) {
  // Posterior means clustered by ground-truth vocabulary label.
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>>> clusters;
  for (const auto& obs : observations) {
    std::vector<double> mu, lv;
    encode_values(*obs.example.image, params, config, mu, lv);
    for (const auto& group : config.groups) {
      const auto it = obs.truth.find(group.name);
      if (it == obs.truth.end() || it->second == kUnknownLabel) continue;
      clusters[group.name][it->second].push_back(mu);
    }
  }

  AlignmentReport report;
  for (const auto& group : config.groups) {
    for (const auto& label : group.labels) {
      const auto git = clusters.find(group.name);
      if (git == clusters.end() || !git->second.count(label))
        throw std::invalid_argument("no observations carry ground truth '" + label +
                                    "' for group '" + group.name + "'");
      CosineMatrix m = cosine_alignment(git->second.at(label));
      m.group = group.name;
      m.label = label;
      report.entropies.push_back(white_cell_entropy(m));
      report.matrices.push_back(std::move(m));
    }
  }
  report.experiment_avg = experiment_entropy(report.entropies);
  return report;
}

F1Report f1_scores(const std::vector<LabelledId>& predictions,
                   const std::vector<LabelledId>& truths,
                   const std::vector<ConceptGroup>& groups) {
  std::map<std::pair<std::string, std::string>, std::string> truth_by_key;
  for (const auto& t : truths) {
    if (!truth_by_key.emplace(std::make_pair(t.id, t.group), t.label).second)
      throw std::invalid_argument("duplicate ground-truth record for id '" + t.id + "', group '" +
                                  t.group + "'");
  }
  std::set<std::pair<std::string, std::string>> seen;
  // (group, truth, predicted) counts
  std::map<std::string, std::map<std::string, std::map<std::string, int>>> confusion;
  for (const auto& p : predictions) {
    const auto key = std::make_pair(p.id, p.group);
    const auto it = truth_by_key.find(key);
    if (it == truth_by_key.end())
      throw std::invalid_argument("prediction for id '" + p.id + "', group '" + p.group +
                                  "' has no matching ground truth");
    if (!seen.insert(key).second)
      throw std::invalid_argument("duplicate prediction for id '" + p.id + "', group '" +
                                  p.group + "'");
    ++confusion[p.group][it->second][p.label];
  }
  if (seen.size() != truth_by_key.size())
    throw std::invalid_argument("ground truth covers " + std::to_string(truth_by_key.size()) +
                                " records but predictions cover " + std::to_string(seen.size()));

  F1Report report;
  report.confusion = confusion;
  for (const auto& group : groups) {
    std::vector<std::string> labels = group.labels;
    labels.push_back(kUnknownLabel);
    const auto& table = confusion[group.name];
    for (const auto& label : labels) {
      int tp = 0, fp = 0, fn = 0, support = 0;
      for (const auto& [truth, row] : table)
        for (const auto& [predicted, count] : row) {
          if (truth == label && predicted == label) tp += count;
          if (truth != label && predicted == label) fp += count;
          if (truth == label && predicted != label) fn += count;
          if (truth == label) support += count;
        }
      F1Row row;
      row.group = group.name;
      row.label = label;
      row.support = support;
      row.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
      row.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
      row.f1 = row.precision + row.recall == 0
                   ? 0.0
                   : 2.0 * row.precision * row.recall / (row.precision + row.recall);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

F1Report f1_scores(const std::vector<PredictionRecord>& records,
                   const std::vector<ConceptGroup>& groups) {
  std::vector<LabelledId> predictions, truths;
  predictions.reserve(records.size());
  truths.reserve(records.size());
  for (const auto& r : records) {
    predictions.push_back({r.id, r.group, r.predicted});
    truths.push_back({r.id, r.group, r.truth});
  }
  return f1_scores(predictions, truths, groups);
}

std::string hinton_svg(const CosineMatrix& m) {
  const int cell = 40, pad = 10;
  const int span = m.c * cell + 2 * pad;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(span) +
                    "\" height=\"" + std::to_string(span) + "\" viewBox=\"0 0 " +
                    std::to_string(span) + " " + std::to_string(span) + "\">\n";
  for (int i = 0; i < m.c; ++i)
    for (int j = 0; j < m.c; ++j) {
      const double value = std::min(std::max(m.cell(i, j), 0.0), 1.0);
      const double side = cell * 0.9 * std::sqrt(value);
      const double cx = pad + j * cell + cell / 2.0;
      const double cy = pad + i * cell + cell / 2.0;
      const bool white = m.white[static_cast<std::size_t>(i) * m.c + j];
      svg += "  <rect x=\"" + format_double(cx - side / 2) + "\" y=\"" +
             format_double(cy - side / 2) + "\" width=\"" + format_double(side) +
             "\" height=\"" + format_double(side) + "\" fill=\"#444\"";
      svg += white ? " stroke=\"#c00\" stroke-width=\"2\"" : " stroke=\"none\"";
      svg += "/>\n";
    }
  svg += "</svg>\n";
  return svg;
}

void render_reports(const AlignmentReport& alignment, const F1Report& f1,
                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::string entropy = "group,label,entropy\n";
  for (std::size_t k = 0; k < alignment.matrices.size(); ++k)
    entropy += alignment.matrices[k].group + "," + alignment.matrices[k].label + "," +
               format_double(alignment.entropies[k]) + "\n";
  entropy += "all,average," + format_double(alignment.experiment_avg) + "\n";
  write_text_file_atomic(out_dir / "entropy.csv", entropy);

  std::string f1_csv = "group,label,precision,recall,f1,support\n";
  for (const auto& row : f1.rows)
    f1_csv += row.group + "," + row.label + "," + format_double(row.precision) + "," +
              format_double(row.recall) + "," + format_double(row.f1) + "," +
              std::to_string(row.support) + "\n";
  write_text_file_atomic(out_dir / "f1.csv", f1_csv);

  std::string confusion = "group,truth,predicted,count\n";
  for (const auto& [group, table] : f1.confusion)
    for (const auto& [truth, row] : table)
      for (const auto& [predicted, count] : row)
        confusion += group + "," + truth + "," + predicted + "," + std::to_string(count) + "\n";
  write_text_file_atomic(out_dir / "confusion.csv", confusion);

  for (const auto& m : alignment.matrices)
    write_text_file_atomic(out_dir / ("label_" + m.group + "_" + m.label + ".svg"),
                           hinton_svg(m));
}

}  // namespace glatent
