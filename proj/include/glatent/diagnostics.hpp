#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "glatent/datasets.hpp"
#include "glatent/grounding.hpp"
#include "glatent/model.hpp"

namespace glatent {

struct PcaResult {
  std::vector<double> eigenvalues;                 // descending
  std::vector<std::vector<double>> eigenvectors;   // [j] = unit eigenvector j
};

// Eigen-decomposition of the sample covariance (n-1 divisor). Eigenvectors
// are sign-fixed so their largest-magnitude component is positive. Needs at
// least C+1 points.
PcaResult pca(const std::vector<std::vector<double>>& points);

struct CosineMatrix {
  std::string group, label;
  int c = 0;
  std::vector<double> cells;        // row-major, cell(i,j) = |e_i . c_j|
  std::vector<double> eigenvalues;  // descending
  int i_star = 0, j_star = 0;       // white row / white column
  std::vector<bool> white;          // row i_star plus column j_star

  double cell(int i, int j) const { return cells[static_cast<std::size_t>(i) * c + j]; }
};

// j* is the smallest-eigenvalue column, i* the basis vector most parallel to
// it; the white set is that full row plus that full column (2C-1 cells).
CosineMatrix cosine_alignment(const std::vector<std::vector<double>>& points);

// Shannon entropy (natural log) of the white cells normalized to sum 1.
double white_cell_entropy(const CosineMatrix& matrix);

double experiment_entropy(const std::vector<double>& label_entropies);

struct AlignmentReport {
  std::vector<CosineMatrix> matrices;  // one per (group, vocabulary label)
  std::vector<double> entropies;       // aligned with matrices
  double experiment_avg = 0;
};

// Clusters the test split's posterior means by ground-truth label (known
// vocabulary labels only) and runs the cosine analysis per cluster.
AlignmentReport alignment_report(const ModelParams& params, const ModelConfig& config,
                                 const std::vector<LoadedObservation>& observations);

struct F1Row {
  std::string group, label;
  double precision = 0, recall = 0, f1 = 0;
  int support = 0;  // ground-truth count
};

struct F1Report {
  std::vector<F1Row> rows;
  // (group, truth, predicted) -> count
  std::map<std::string, std::map<std::string, std::map<std::string, int>>> confusion;
};

struct LabelledId {
  std::string id, group, label;
};

// One-vs-rest precision/recall/F1 per group label plus "unknown", with the
// 0/0 -> 0 convention. The two record sets must cover identical (id, group)
// keys.
F1Report f1_scores(const std::vector<LabelledId>& predictions,
                   const std::vector<LabelledId>& truths,
                   const std::vector<ConceptGroup>& groups);
F1Report f1_scores(const std::vector<PredictionRecord>& records,
                   const std::vector<ConceptGroup>& groups);

// entropy.csv, f1.csv, confusion.csv and one Hinton-style SVG per label.
void render_reports(const AlignmentReport& alignment, const F1Report& f1,
                    const std::filesystem::path& out_dir);

std::string hinton_svg(const CosineMatrix& matrix);

}  // namespace glatent
