#include "supcon/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "supcon/errors.hpp"

namespace supcon {

namespace {

// Per class in ascending row order, first max(2, 4n/5) samples train.
void apply_stratified_split(Dataset& ds) {
  ds.train_idx.clear();
  ds.heldout_idx.clear();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.y[i]].push_back(i);
  for (auto& [label, rows] : by_class) {
    const std::size_t n = rows.size();
    const std::size_t n_train = std::min(n, std::max<std::size_t>(2, 4 * n / 5));
    for (std::size_t j = 0; j < n; ++j)
      (j < n_train ? ds.train_idx : ds.heldout_idx).push_back(rows[j]);
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.heldout_idx.begin(), ds.heldout_idx.end());
}

}  // namespace

int Dataset::num_classes() const {
  int mx = -1;
  for (int label : y) mx = std::max(mx, label);
  return mx + 1;
}

Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                   double separation, double spread, std::uint64_t seed) {
  if (classes < 1 || per_class < 2 || dim < 2)
    throw ConfigError("make_blobs: need classes >= 1, per_class >= 2, dim >= 2");
  Dataset ds;
  ds.x = Matrix(classes * per_class, dim);
  ds.y.resize(classes * per_class);

  Rng center_rng = Rng(seed).child(stream::kDatasetCenters);
  Matrix centers(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    auto row = centers.row(c);
    center_rng.fill_normal(row, 1.0);
    const double len = norm(row);
    for (double& v : row) v *= separation / len;
  }

  Rng noise_rng = Rng(seed).child(stream::kDatasetNoise);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < per_class; ++j) {
      const std::size_t i = c * per_class + j;
      ds.y[i] = static_cast<int>(c);
      auto row = ds.x.row(i);
      noise_rng.fill_normal(row, spread);
      for (std::size_t k = 0; k < dim; ++k) row[k] += centers.at(c, k);
    }
  }
  apply_stratified_split(ds);
  return ds;
}

std::vector<double> augment(std::span<const double> x, const AugmentSpec& spec,
                            Rng& rng) {
  std::vector<double> out(x.begin(), x.end());
  // Fixed draw count: 1 jitter scale + d noise normals + d mask uniforms.
  const double scale =
      rng.uniform(1.0 - spec.scale_jitter, 1.0 + spec.scale_jitter);
  for (double& v : out) v *= scale;
  for (double& v : out) v += rng.normal(0.0, spec.noise_sigma);
  for (double& v : out)
    if (rng.uniform01() < spec.mask_prob) v = 0.0;
  return out;
}

BatchInputs assemble_multiview_batch(const Dataset& ds,
                                     std::span<const std::size_t> indices,
                                     const AugmentSpec& spec, Rng& rng,
                                     LabelMode mode) {
  const std::size_t n_src = indices.size();
  if (n_src < 1) throw ConfigError("assemble_multiview_batch: empty batch");
  if (mode == LabelMode::kWithLabels && n_src < 2)
    throw ConfigError(
        "assemble_multiview_batch: labeled batches need at least 2 sources");
  for (std::size_t idx : indices)
    if (idx >= ds.size())
      throw ConfigError("assemble_multiview_batch: index out of range");

  BatchInputs out;
  out.x = Matrix(2 * n_src, ds.dim());
  std::vector<int> source_labels(n_src);
  for (std::size_t k = 0; k < n_src; ++k) {
    source_labels[k] = ds.y[indices[k]];
    for (std::size_t view = 0; view < 2; ++view) {
      const std::vector<double> v = augment(ds.x.row(indices[k]), spec, rng);
      auto row = out.x.row(2 * k + view);
      std::copy(v.begin(), v.end(), row.begin());
    }
  }
  out.structure =
      make_batch_structure(source_labels, mode == LabelMode::kWithLabels);
  return out;
}

std::vector<double> corrupt(std::span<const double> x, int severity,
                            double base_sigma, Rng& rng) {
  if (severity < 0 || severity > 5)
    throw ConfigError("corrupt: severity must be in 0..5");
  std::vector<double> out(x.begin(), x.end());
  if (severity == 0) return out;
  const double sigma = severity * base_sigma;
  for (double& v : out) v += rng.normal(0.0, sigma);
  return out;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvParseError(0, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2)
      throw CsvParseError(line_no, "need at least one feature and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw CsvParseError(line_no, "inconsistent column count");
    std::vector<double> feat(width - 1);
    for (std::size_t j = 0; j + 1 < width; ++j) {
      try {
        std::size_t used = 0;
        feat[j] = std::stod(cells[j], &used);
        if (used != cells[j].size())
          throw CsvParseError(line_no, "trailing junk in '" + cells[j] + "'");
      } catch (const CsvParseError&) {
        throw;
      } catch (const std::exception&) {
        throw CsvParseError(line_no, "bad float '" + cells[j] + "'");
      }
      if (!std::isfinite(feat[j]))
        throw CsvParseError(line_no, "non-finite value");
    }
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(cells.back(), &used);
      if (used != cells.back().size())
        throw CsvParseError(line_no, "label is not an integer");
    } catch (const CsvParseError&) {
      throw;
    } catch (const std::exception&) {
      throw CsvParseError(line_no, "bad label '" + cells.back() + "'");
    }
    if (label < 0) throw CsvParseError(line_no, "negative label");
    rows.push_back(std::move(feat));
    labels.push_back(label);
  }
  if (rows.empty()) throw CsvParseError(0, "empty file");

  Dataset ds;
  ds.x = Matrix(rows.size(), width - 1);
  ds.y = std::move(labels);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), ds.x.row(i).begin());
  apply_stratified_split(ds);
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_csv: cannot open " + path);
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x.at(i, j));
      out << buf << ',';
    }
    out << ds.y[i] << '\n';
  }
  if (!out) throw Error("save_csv: write failed for " + path);
}

}  // namespace supcon
