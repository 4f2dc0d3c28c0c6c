#include "prevcal/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "prevcal/errors.hpp"

namespace prevcal {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    fields.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    fields.push_back("");
  }
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open file: " + path);
  }
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InputError(path + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) {
    throw EmptyDataError("empty file: " + path);
  }
  return table;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(context + ": not a number: '" + s + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write file: " + path);
  }
  return out;
}

constexpr const char* kPredPrefix = "pred_";

}  // namespace

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

UnlabeledData load_unlabeled(const std::string& path,
                             const ClassLabelMap& labels) {
  const CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "record_id") {
    throw InputError(path + ": first column must be record_id");
  }
  UnlabeledData out;
  std::vector<std::size_t> pred_cols, cov_cols;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name.rfind(kPredPrefix, 0) == 0) {
      out.algorithms.push_back(name.substr(std::string(kPredPrefix).size()));
      pred_cols.push_back(c);
    } else {
      out.covariate_names.push_back(name);
      cov_cols.push_back(c);
    }
  }
  if (pred_cols.empty()) {
    throw InputError(path + ": missing column pred_<algorithm>");
  }
  if (table.rows.empty()) {
    throw EmptyDataError("empty file: " + path);
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::vector<int> preds;
    for (std::size_t c : pred_cols) {
      if (!labels.contains(row[c])) {
        throw InputError(path + ": row " + std::to_string(r + 2) +
                         ": unknown label '" + row[c] + "'");
      }
      preds.push_back(static_cast<int>(labels.index(row[c])));
    }
    out.predictions.push_back(std::move(preds));
    if (!cov_cols.empty()) {
      Vec cov;
      for (std::size_t c : cov_cols) {
        cov.push_back(parse_double(
            row[c], path + ": row " + std::to_string(r + 2) + ", column " +
                        table.header[c]));
      }
      out.covariates.push_back(std::move(cov));
    }
  }
  return out;
}

LabeledData load_labeled(const std::string& path, const ClassLabelMap& labels) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 3 || table.header[0] != "record_id" ||
      table.header[1] != "true_label") {
    throw InputError(path +
                     ": header must start with record_id, true_label, pred_*");
  }
  LabeledData out;
  std::vector<std::size_t> pred_cols;
  for (std::size_t c = 2; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name.rfind(kPredPrefix, 0) != 0) {
      throw InputError(path + ": unexpected column '" + name +
                       "' (labeled files carry only predictions)");
    }
    out.algorithms.push_back(name.substr(std::string(kPredPrefix).size()));
    pred_cols.push_back(c);
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (!labels.contains(row[1])) {
      throw InputError(path + ": row " + std::to_string(r + 2) +
                       ": unknown true label '" + row[1] + "'");
    }
    out.true_labels.push_back(static_cast<int>(labels.index(row[1])));
    std::vector<int> preds;
    for (std::size_t c : pred_cols) {
      if (!labels.contains(row[c])) {
        throw InputError(path + ": row " + std::to_string(r + 2) +
                         ": unknown label '" + row[c] + "'");
      }
      preds.push_back(static_cast<int>(labels.index(row[c])));
    }
    out.predictions.push_back(std::move(preds));
  }
  return out;
}

EnsembleCounts UnlabeledData::to_ensemble_counts(std::size_t c) const {
  return EnsembleCounts::from_records(c, predictions);
}

PredictionCounts UnlabeledData::to_counts(std::size_t c,
                                          unsigned classifier) const {
  if (classifier >= algorithms.size()) {
    throw ShapeError("classifier index out of range");
  }
  IVec v(c, 0);
  for (const auto& rec : predictions) {
    ++v[static_cast<std::size_t>(rec[classifier])];
  }
  return PredictionCounts::checked(std::move(v));
}

EnsembleTransferErrors LabeledData::to_transfer_errors(std::size_t c) const {
  std::vector<TransferErrorMatrix> mats;
  for (unsigned a = 0; a < algorithms.size(); ++a) {
    mats.push_back(to_transfer(c, a));
  }
  return EnsembleTransferErrors::checked(std::move(mats));
}

TransferErrorMatrix LabeledData::to_transfer(std::size_t c,
                                             unsigned classifier) const {
  if (classifier >= algorithms.size()) {
    throw ShapeError("classifier index out of range");
  }
  IMat t(c, c, 0);
  for (std::size_t r = 0; r < true_labels.size(); ++r) {
    ++t(static_cast<std::size_t>(true_labels[r]),
        static_cast<std::size_t>(predictions[r][classifier]));
  }
  return TransferErrorMatrix::checked(std::move(t));
}

GroupedCovariates group_by_covariates(const UnlabeledData& data, std::size_t c,
                                      unsigned classifier) {
  GroupedCovariates out;
  const std::size_t n_cov = data.covariate_names.size();
  // Unique covariate rows in lexicographic order; deterministic grouping.
  std::map<Vec, std::size_t> group_of;
  std::vector<Vec> unique_rows;
  const Vec empty_row;
  for (std::size_t r = 0; r < data.predictions.size(); ++r) {
    const Vec& row = n_cov == 0 ? empty_row : data.covariates[r];
    if (group_of.emplace(row, 0).second) {
      unique_rows.push_back(row);
    }
  }
  std::sort(unique_rows.begin(), unique_rows.end());
  for (std::size_t g = 0; g < unique_rows.size(); ++g) {
    group_of[unique_rows[g]] = g;
  }

  const std::size_t groups = unique_rows.size();
  IMat counts(groups, c, 0);
  for (std::size_t r = 0; r < data.predictions.size(); ++r) {
    const Vec& row = n_cov == 0 ? empty_row : data.covariates[r];
    const std::size_t g = group_of[row];
    ++counts(g, static_cast<std::size_t>(data.predictions[r][classifier]));
  }

  out.design.x = Mat(groups, 1 + n_cov, 0.0);
  out.design.term_names.push_back("intercept");
  for (const auto& name : data.covariate_names) {
    out.design.term_names.push_back(name);
  }
  for (std::size_t g = 0; g < groups; ++g) {
    out.design.x(g, 0) = 1.0;
    for (std::size_t d = 0; d < n_cov; ++d) {
      out.design.x(g, d + 1) = unique_rows[g][d];
    }
  }
  out.counts = StratifiedCounts::checked(std::move(counts));
  return out;
}

namespace {

// Render the row/col of a tracked scalar with class labels where they apply.
std::pair<std::string, std::string> name_cells(
    const ParamName& name, const ClassLabelMap& labels,
    const std::vector<std::string>& term_names) {
  const auto label_or_index = [&](int idx) {
    return idx >= 0 && idx < static_cast<int>(labels.size())
               ? labels.label(static_cast<std::size_t>(idx))
               : std::to_string(idx + 1);
  };
  if (name.block == "beta") {
    std::string row = name.row >= 0 &&
                              name.row < static_cast<int>(term_names.size())
                          ? term_names[static_cast<std::size_t>(name.row)]
                          : std::to_string(name.row + 1);
    return {row, label_or_index(name.col)};
  }
  if (name.block == "p_group") {
    return {std::to_string(name.row + 1), label_or_index(name.col)};
  }
  std::string row = name.row >= 0 ? label_or_index(name.row) : "";
  std::string col = name.col >= 0 ? label_or_index(name.col) : "";
  return {row, col};
}

}  // namespace

void write_posterior_summary(const std::string& path,
                             const PosteriorSummary& summary,
                             const ClassLabelMap& labels,
                             const std::vector<std::string>& term_names) {
  auto out = open_out(path);
  out << "parameter,row,col,mean,sd,q2.5,q50,q97.5\n";
  for (std::size_t k = 0; k < summary.schema.size(); ++k) {
    const ParamName& name = summary.schema.names[k];
    const auto [row, col] = name_cells(name, labels, term_names);
    const ScalarSummary& s = summary.stats[k];
    out << name.block << ',' << row << ',' << col << ','
        << format_double(s.mean) << ',' << format_double(s.sd) << ','
        << format_double(s.q025) << ',' << format_double(s.q500) << ','
        << format_double(s.q975) << '\n';
  }
}

void write_draws(const std::string& path, const PosteriorSummary& summary) {
  if (summary.chains.empty()) {
    throw InvalidStateError(
        "write_draws: no retained draws (run with keep_draws)");
  }
  auto out = open_out(path);
  out << "chain,iter";
  for (const auto& name : summary.schema.names) {
    out << ',' << name.dotted();
  }
  out << '\n';
  for (std::size_t c = 0; c < summary.chains.size(); ++c) {
    const auto& draws = summary.chains[c].draws;
    for (std::size_t it = 0; it < draws.size(); ++it) {
      out << c << ',' << it + 1;
      for (double x : draws[it]) {
        out << ',' << format_double(x);
      }
      out << '\n';
    }
  }
}

PosteriorSummary read_draws(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 3 || table.header[0] != "chain" ||
      table.header[1] != "iter") {
    throw InputError(path + ": not a draws file (expected chain,iter,...)");
  }
  DrawSchema schema;
  for (std::size_t c = 2; c < table.header.size(); ++c) {
    const std::string& dotted = table.header[c];
    ParamName name;
    std::stringstream ss(dotted);
    std::string tok;
    std::vector<std::string> parts;
    while (std::getline(ss, tok, '.')) parts.push_back(tok);
    if (parts.empty()) {
      throw InputError(path + ": bad parameter column '" + dotted + "'");
    }
    name.block = parts[0];
    if (parts.size() > 1) name.row = std::stoi(parts[1]) - 1;
    if (parts.size() > 2) name.col = std::stoi(parts[2]) - 1;
    if (parts.size() > 3) {
      throw InputError(path + ": bad parameter column '" + dotted + "'");
    }
    schema.names.push_back(name);
  }
  if (table.rows.empty()) {
    throw EmptyDataError(path + ": draws file has no rows");
  }
  std::vector<ChainDraws> chains;
  long long current_chain = -1;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const long long chain = static_cast<long long>(
        parse_double(row[0], path + ": row " + std::to_string(r + 2)));
    if (chain != current_chain) {
      chains.emplace_back();
      current_chain = chain;
    }
    Vec draw(schema.size());
    for (std::size_t k = 0; k < schema.size(); ++k) {
      draw[k] =
          parse_double(row[k + 2], path + ": row " + std::to_string(r + 2));
    }
    chains.back().draws.push_back(std::move(draw));
  }
  return summarize(std::move(schema), std::move(chains), true);
}

void write_diagnostics_json(const std::string& path,
                            const PosteriorSummary& summary,
                            const std::map<std::string, std::string>& config_echo) {
  nlohmann::json j;
  j["seed"] = summary.seed;
  j["n_chains"] = summary.n_chains;
  j["n_retained_per_chain"] = summary.n_retained_per_chain;
  j["config"] = config_echo;

  nlohmann::json acc = nlohmann::json::object();
  for (std::size_t i = 0; i < summary.accept_names.size(); ++i) {
    std::vector<double> per_chain;
    for (const auto& chain : summary.accept_rate) {
      per_chain.push_back(chain[i]);
    }
    acc[summary.accept_names[i].dotted()] = per_chain;
  }
  j["mh_acceptance_rate"] = acc;

  nlohmann::json rhat = nlohmann::json::object();
  nlohmann::json means = nlohmann::json::object();
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < summary.schema.size(); ++k) {
    const ParamName& name = summary.schema.names[k];
    // Convergence is monitored on the class probabilities and the shrinkage
    // weights (the latter on the log scale, handled in summarize).
    const bool monitored =
        name.block == "p" || name.block.rfind("gamma", 0) == 0;
    if (!monitored) continue;
    const double r = summary.rhat[k];
    rhat[name.dotted()] = r;
    std::vector<double> per_chain;
    for (const auto& chain : summary.per_chain_mean) {
      per_chain.push_back(chain[k]);
    }
    means[name.dotted()] = per_chain;
    if (std::isfinite(r) && r > 1.05) {
      warnings.push_back("split R-hat above 1.05 for " + name.dotted());
    }
  }
  j["split_rhat"] = rhat;
  j["per_chain_mean"] = means;
  j["warnings"] = warnings;

  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_results(const std::string& path,
                   const std::vector<ExperimentRow>& rows,
                   const ClassLabelMap& labels) {
  auto out = open_out(path);
  out << "replicate,method,metric,class,value\n";
  for (const auto& row : rows) {
    out << row.replicate << ',' << row.method << ',' << row.metric << ','
        << (row.class_index >= 0
                ? labels.label(static_cast<std::size_t>(row.class_index))
                : "")
        << ',' << format_double(row.value) << '\n';
  }
}

void write_dataset(const std::string& unlabeled_path,
                   const std::string& labeled_path, const SyntheticDataset& ds,
                   const ClassLabelMap& labels) {
  {
    auto out = open_out(unlabeled_path);
    out << "record_id";
    for (unsigned a = 0; a < ds.k; ++a) out << ",pred_alg" << a + 1;
    out << '\n';
    for (std::size_t r = 0; r < ds.unlabeled_pred.size(); ++r) {
      out << "u" << r + 1;
      for (unsigned a = 0; a < ds.k; ++a) {
        out << ','
            << labels.label(static_cast<std::size_t>(ds.unlabeled_pred[r][a]));
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(labeled_path);
    out << "record_id,true_label";
    for (unsigned a = 0; a < ds.k; ++a) out << ",pred_alg" << a + 1;
    out << '\n';
    for (std::size_t r = 0; r < ds.labeled_pred.size(); ++r) {
      out << "l" << r + 1 << ','
          << labels.label(static_cast<std::size_t>(ds.labeled_true[r]));
      for (unsigned a = 0; a < ds.k; ++a) {
        out << ','
            << labels.label(static_cast<std::size_t>(ds.labeled_pred[r][a]));
      }
      out << '\n';
    }
  }
}

void write_individual_posteriors(
    const std::string& path,
    const std::vector<std::pair<std::vector<int>, IndividualPosterior>>& rows,
    const ClassLabelMap& labels) {
  auto out = open_out(path);
  out << "pattern";
  for (const auto& l : labels.labels()) out << ",p_" << l;
  for (const auto& l : labels.labels()) out << ",se_" << l;
  out << ",draws_used,draws_skipped\n";
  for (const auto& [pattern, post] : rows) {
    std::string key;
    for (std::size_t a = 0; a < pattern.size(); ++a) {
      if (a > 0) key += '|';
      key += labels.label(static_cast<std::size_t>(pattern[a]));
    }
    out << key;
    for (double x : post.probs) out << ',' << format_double(x);
    for (double x : post.mc_se) out << ',' << format_double(x);
    out << ',' << post.draws_used << ',' << post.draws_skipped << '\n';
  }
}

void write_metrics(const std::string& path,
                   const std::vector<std::pair<std::string, double>>& rows) {
  auto out = open_out(path);
  out << "metric,value\n";
  for (const auto& [name, value] : rows) {
    out << name << ',' << format_double(value) << '\n';
  }
}

void write_map_estimate(const std::string& path, const EmState& state,
                        const ClassLabelMap& labels) {
  auto out = open_out(path);
  out << "parameter,row,col,value\n";
  const std::size_t c = state.p.size();
  for (std::size_t i = 0; i < c; ++i) {
    out << "p," << labels.label(i) << ",," << format_double(state.p[i])
        << '\n';
  }
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out << "m," << labels.label(i) << ',' << labels.label(j) << ','
          << format_double(state.m(i, j)) << '\n';
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    out << "gamma," << labels.label(i) << ",,"
        << format_double(state.gamma[i]) << '\n';
  }
}

}  // namespace prevcal
