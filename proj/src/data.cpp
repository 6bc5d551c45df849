/*
 * Copyright 2026 The FedL2G Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fedl2g/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "fedl2g/rng.hpp"

namespace fedl2g {
namespace {

constexpr int kMaxRedraws = 100;

std::vector<std::vector<std::size_t>> RowsByClass(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> rows(
      static_cast<std::size_t>(ds.class_count));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rows[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  }
  return rows;
}

// Largest-remainder apportionment of `total` items by `shares` (which need
// not be normalized). Ties go to the lower index.
std::vector<std::size_t> Apportion(const std::vector<double>& shares,
                                   std::size_t total) {
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<std::size_t> counts(shares.size(), 0);
  std::vector<double> frac(shares.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    const double exact = shares[k] / sum * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    frac[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  // Floating error can push the floor sum past the total by a hair.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; assigned < total; ++r) {
    ++counts[order[r % order.size()]];
    ++assigned;
  }
  return counts;
}

std::vector<double> DrawDirichlet(std::size_t n, double alpha, Engine& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> v(n);
  double sum = 0.0;
  // A symmetric draw with tiny alpha can underflow to all zeros.
  while (sum <= 0.0) {
    sum = 0.0;
    for (auto& x : v) {
      x = gamma(rng);
      sum += x;
    }
  }
  for (auto& x : v) x /= sum;
  return v;
}

std::size_t SmallestClient(const std::vector<int>& assignment, int clients) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(clients), 0);
  for (int c : assignment) ++sizes[static_cast<std::size_t>(c)];
  return *std::min_element(sizes.begin(), sizes.end());
}

void CheckPartitionArgs(const Dataset& ds, int clients) {
  if (clients < 2) throw std::invalid_argument("partition needs N >= 2");
  if (ds.size() == 0) throw std::invalid_argument("cannot partition empty dataset");
}

}  // namespace

Dataset Dataset::Subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.class_count = class_count;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.inputs.row(static_cast<Eigen::Index>(k)) =
        inputs.row(static_cast<Eigen::Index>(rows[k]));
    out.labels.push_back(labels[rows[k]]);
  }
  return out;
}

MiniBatch Dataset::Batch(const std::vector<std::size_t>& rows) const {
  Dataset sub = Subset(rows);
  return {std::move(sub.inputs), std::move(sub.labels)};
}

std::vector<int> Dataset::Classes() const {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

Dataset GenerateSynthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.class_count <= 0 || spec.input_dim <= 0 ||
      spec.samples_per_class <= 0 || spec.cluster_spread < 0.0) {
    throw std::invalid_argument("synthetic dataset parameters must be positive");
  }
  Engine rng = MakeStream(seed, StreamPurpose::kSynthetic);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int c = spec.class_count;
  const int d = spec.input_dim;
  Eigen::MatrixXd means(c, d);
  for (int y = 0; y < c; ++y) {
    for (int j = 0; j < d; ++j) means(y, j) = normal(rng);
    means.row(y).normalize();
  }
  Dataset ds;
  ds.class_count = c;
  ds.inputs.resize(static_cast<Eigen::Index>(c) * spec.samples_per_class, d);
  ds.labels.reserve(static_cast<std::size_t>(ds.inputs.rows()));
  Eigen::Index row = 0;
  for (int y = 0; y < c; ++y) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int j = 0; j < d; ++j) {
        ds.inputs(row, j) = means(y, j) + spec.cluster_spread * normal(rng);
      }
      ds.labels.push_back(y);
    }
  }
  return ds;
}

Dataset LoadDelimited(const std::filesystem::path& path,
                      const DelimitedSchema& schema) {
  if (schema.input_dim <= 0 || schema.class_count <= 0) {
    throw std::invalid_argument("delimited schema needs positive input_dim and class_count");
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                             ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != static_cast<std::size_t>(schema.input_dim) + 1) {
      fail("expected " + std::to_string(schema.input_dim + 1) + " fields, got " +
           std::to_string(fields.size()));
    }
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
      return s;
    };
    for (int j = 0; j < schema.input_dim; ++j) {
      auto f = trim(fields[static_cast<std::size_t>(j)]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        fail("field " + std::to_string(j + 1) + " is not a finite number");
      }
      values.push_back(v);
    }
    auto lf = trim(fields.back());
    int label = 0;
    auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || ptr != lf.data() + lf.size()) {
      fail("label is not an integer");
    }
    if (label < 0 || label >= schema.class_count) {
      fail("label " + std::to_string(label) + " outside [0, " +
           std::to_string(schema.class_count) + ")");
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw std::runtime_error(path.string() + ": no samples");

  Dataset ds;
  ds.class_count = schema.class_count;
  ds.labels = std::move(labels);
  ds.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(ds.labels.size()), schema.input_dim);
  return ds;
}

PartitionScheme PartitionScheme::Parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("partition must be dirichlet:BETA or pathological:CPC");
  }
  std::string_view kind = text.substr(0, colon);
  std::string value(text.substr(colon + 1));
  PartitionScheme s;
  try {
    std::size_t used = 0;
    if (kind == "dirichlet") {
      s.kind = Kind::kDirichlet;
      s.beta = std::stod(value, &used);
      if (!(s.beta > 0.0)) throw std::invalid_argument("beta");
    } else if (kind == "pathological") {
      s.kind = Kind::kPathological;
      s.classes_per_client = std::stoi(value, &used);
      if (s.classes_per_client < 1) throw std::invalid_argument("cpc");
    } else {
      throw std::invalid_argument("kind");
    }
    if (used != value.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid partition: " + std::string(text));
  }
  return s;
}

std::string PartitionScheme::ToString() const {
  std::ostringstream os;
  if (kind == Kind::kDirichlet) {
    // Shortest text that parses back to the same double.
    char buf[32];
    const auto end = std::to_chars(buf, buf + sizeof buf, beta).ptr;
    os << "dirichlet:" << std::string_view(buf, static_cast<std::size_t>(end - buf));
  } else {
    os << "pathological:" << classes_per_client;
  }
  return os.str();
}

std::vector<std::size_t> PartitionPlan::ClientRows(int client) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == client) rows.push_back(i);
  }
  return rows;
}

PartitionPlan PartitionDirichlet(const Dataset& ds, int clients, double beta,
                                 std::uint64_t seed,
                                 std::size_t min_client_samples) {
  CheckPartitionArgs(ds, clients);
  if (!(beta > 0.0)) throw std::invalid_argument("dirichlet beta must be > 0");
  const auto by_class = RowsByClass(ds);
  const auto n_clients = static_cast<std::size_t>(clients);
  const double fair_share =
      static_cast<double>(ds.size()) / static_cast<double>(clients);
  Engine rng = MakeStream(seed, StreamPurpose::kPartition);

  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    std::vector<int> assignment(ds.size(), -1);
    std::vector<std::size_t> held(n_clients, 0);
    for (const auto& rows : by_class) {
      if (rows.empty()) continue;
      std::vector<double> shares = DrawDirichlet(n_clients, beta, rng);
      // Clients already above the fair share take no more classes, as in the
      // reference partitioner of Lin et al.
      std::vector<double> capped = shares;
      double capped_sum = 0.0;
      for (std::size_t k = 0; k < n_clients; ++k) {
        if (static_cast<double>(held[k]) >= fair_share) capped[k] = 0.0;
        capped_sum += capped[k];
      }
      const auto counts = Apportion(capped_sum > 0.0 ? capped : shares, rows.size());
      std::vector<std::size_t> order = rows;
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t next = 0;
      for (std::size_t k = 0; k < n_clients; ++k) {
        for (std::size_t j = 0; j < counts[k]; ++j) {
          assignment[order[next++]] = static_cast<int>(k);
        }
        held[k] += counts[k];
      }
    }
    if (SmallestClient(assignment, clients) >= min_client_samples) {
      PartitionPlan plan;
      plan.assignment = std::move(assignment);
      plan.client_count = clients;
      plan.scheme.kind = PartitionScheme::Kind::kDirichlet;
      plan.scheme.beta = beta;
      plan.seed = seed;
      return plan;
    }
  }
  throw std::runtime_error("dirichlet partition: no draw in " +
                           std::to_string(kMaxRedraws) +
                           " attempts gives every client >= " +
                           std::to_string(min_client_samples) + " samples");
}

PartitionPlan PartitionPathological(const Dataset& ds, int clients,
                                    int classes_per_client, std::uint64_t seed,
                                    std::size_t min_client_samples) {
  CheckPartitionArgs(ds, clients);
  const int c = ds.class_count;
  if (classes_per_client < 1 || classes_per_client > c) {
    throw std::invalid_argument("pathological partition: classes_per_client must be in [1, C]");
  }
  if (static_cast<long>(clients) * classes_per_client < c) {
    throw std::invalid_argument("pathological partition: N * classes_per_client < C leaves classes unused");
  }
  const auto by_class = RowsByClass(ds);
  Engine rng = MakeStream(seed, StreamPurpose::kPartition);

  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    std::vector<int> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<int>> holders(static_cast<std::size_t>(c));
    for (int i = 0; i < clients; ++i) {
      for (int j = 0; j < classes_per_client; ++j) {
        const int y = perm[static_cast<std::size_t>((i * classes_per_client + j) % c)];
        holders[static_cast<std::size_t>(y)].push_back(i);
      }
    }
    std::vector<int> assignment(ds.size(), -1);
    for (int y = 0; y < c; ++y) {
      const auto& rows = by_class[static_cast<std::size_t>(y)];
      const auto& hs = holders[static_cast<std::size_t>(y)];
      if (rows.size() < hs.size()) {
        throw std::invalid_argument("pathological partition: class " + std::to_string(y) +
                                    " has fewer samples than clients holding it");
      }
      // One guaranteed sample per holder, the rest by Dirichlet(1) shares.
      auto counts = Apportion(DrawDirichlet(hs.size(), 1.0, rng), rows.size() - hs.size());
      std::vector<std::size_t> order = rows;
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t next = 0;
      for (std::size_t k = 0; k < hs.size(); ++k) {
        for (std::size_t j = 0; j < counts[k] + 1; ++j) {
          assignment[order[next++]] = hs[k];
        }
      }
    }
    if (SmallestClient(assignment, clients) >= min_client_samples) {
      PartitionPlan plan;
      plan.assignment = std::move(assignment);
      plan.client_count = clients;
      plan.scheme.kind = PartitionScheme::Kind::kPathological;
      plan.scheme.classes_per_client = classes_per_client;
      plan.seed = seed;
      return plan;
    }
  }
  throw std::runtime_error("pathological partition: no draw in " +
                           std::to_string(kMaxRedraws) +
                           " attempts gives every client >= " +
                           std::to_string(min_client_samples) + " samples");
}

PartitionPlan Partition(const Dataset& ds, int clients,
                        const PartitionScheme& scheme, std::uint64_t seed,
                        std::size_t min_client_samples) {
  if (scheme.kind == PartitionScheme::Kind::kDirichlet) {
    return PartitionDirichlet(ds, clients, scheme.beta, seed, min_client_samples);
  }
  return PartitionPathological(ds, clients, scheme.classes_per_client, seed,
                               min_client_samples);
}

ClientDataset SplitClient(const Dataset& local, const SplitOptions& options,
                          std::uint64_t seed, int client_index) {
  if (options.quiz_size < 1) throw std::invalid_argument("quiz_size must be >= 1");
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must be in (0, 1)");
  }
  const std::size_t n = local.size();
  const auto quiz_size = static_cast<std::size_t>(options.quiz_size);
  const std::size_t test_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * options.test_fraction)));
  if (n < quiz_size + 4 || n < test_count + quiz_size + 1) {
    throw std::invalid_argument("client " + std::to_string(client_index) + " has " +
                                std::to_string(n) + " samples, too few for a " +
                                std::to_string(quiz_size) + "-sample quiz plus test and study sets");
  }
  Engine rng = MakeStream(seed, StreamPurpose::kSplit,
                          static_cast<std::uint64_t>(client_index));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<long>(test_count));
  std::vector<std::size_t> pool(order.begin() + static_cast<long>(test_count), order.end());

  std::vector<bool> in_quiz(pool.size(), false);
  if (options.stratified_quiz) {
    // Round-robin over the pool's classes in random order.
    std::vector<std::vector<std::size_t>> slots(static_cast<std::size_t>(local.class_count));
    for (std::size_t k = 0; k < pool.size(); ++k) {
      slots[static_cast<std::size_t>(local.labels[pool[k]])].push_back(k);
    }
    std::vector<std::size_t> classes;
    for (std::size_t y = 0; y < slots.size(); ++y) {
      if (!slots[y].empty()) classes.push_back(y);
    }
    std::shuffle(classes.begin(), classes.end(), rng);
    std::size_t taken = 0;
    for (std::size_t depth = 0; taken < quiz_size; ++depth) {
      for (std::size_t y : classes) {
        if (taken == quiz_size) break;
        if (depth < slots[y].size()) {
          in_quiz[slots[y][depth]] = true;
          ++taken;
        }
      }
    }
  } else {
    for (std::size_t k = 0; k < quiz_size; ++k) in_quiz[k] = true;
  }
  std::vector<std::size_t> quiz_rows;
  std::vector<std::size_t> study_rows;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    (in_quiz[k] ? quiz_rows : study_rows).push_back(pool[k]);
  }

  ClientDataset out;
  out.client_index = client_index;
  out.study = local.Subset(study_rows);
  out.quiz = local.Batch(quiz_rows);
  out.test = local.Subset(test_rows);
  out.label_inventory = out.study.Classes();
  return out;
}

}  // namespace fedl2g
