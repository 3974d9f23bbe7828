#include "polprog/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "polprog/csv.hpp"
#include "polprog/error.hpp"
#include "polprog/io.hpp"

namespace polprog {

std::string_view group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::Text: return "text";
    case FeatureGroup::Metadata: return "metadata";
    case FeatureGroup::Embedding: return "embedding";
  }
  return "?";
}

std::optional<FeatureGroup> parse_group(std::string_view text) {
  for (auto g : {FeatureGroup::Text, FeatureGroup::Metadata, FeatureGroup::Embedding}) {
    if (text == group_name(g)) return g;
  }
  return std::nullopt;
}

// ----------------------------------------------------------- FeatureMatrix

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].name == name) return j;
  }
  return std::nullopt;
}

void FeatureMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != row_ids.size() ||
      static_cast<std::size_t>(values.cols()) != columns.size()) {
    throw ValidationError("feature matrix shape does not match its row ids and columns");
  }
  std::unordered_set<std::string_view> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw ValidationError("duplicate column name: " + c.name);
  }
  std::unordered_set<std::string_view> ids;
  for (const auto& id : row_ids) {
    if (!ids.insert(id).second) throw ValidationError("duplicate row id: " + id);
  }
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!std::isfinite(values(i, j))) {
        throw ValidationError("non-finite value at row " + row_ids[static_cast<std::size_t>(i)] +
                              ", column " + columns[static_cast<std::size_t>(j)].name);
      }
    }
  }
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string_view, Eigen::Index> index;
  for (std::size_t i = 0; i < row_ids.size(); ++i) index.emplace(row_ids[i], static_cast<Eigen::Index>(i));
  FeatureMatrix out;
  out.row_ids = ids;
  out.columns = columns;
  out.values.resize(static_cast<Eigen::Index>(ids.size()), values.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = index.find(ids[r]);
    if (it == index.end()) throw ValidationError("unknown row id: " + ids[r]);
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(it->second);
  }
  return out;
}

// ----------------------------------------------------------------- TF-IDF

double TfidfModel::idf(std::size_t column) const {
  return std::log((1.0 + static_cast<double>(n_docs)) /
                  (1.0 + static_cast<double>(doc_freq.at(column)))) +
         1.0;
}

std::vector<std::string> TfidfModel::tokens_in_column_order() const {
  std::vector<std::string> tokens(vocabulary.size());
  for (const auto& [token, col] : vocabulary) tokens[col] = token;
  return tokens;
}

TfidfModel fit_tfidf(std::span<const CleanDoc> train_docs, std::size_t min_df,
                     std::optional<std::size_t> max_features) {
  if (train_docs.empty()) throw ValidationError("TF-IDF needs at least one training document");

  std::map<std::string, std::size_t, std::less<>> df;
  for (const auto& doc : train_docs) {
    std::set<std::string_view> unique(doc.tokens.begin(), doc.tokens.end());
    for (auto t : unique) ++df[std::string(t)];
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : df) {
    if (count >= min_df) kept.emplace_back(token, count);
  }
  if (max_features && kept.size() > *max_features) {
    // Highest df first; df ties resolved lexicographically (kept is sorted).
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    kept.resize(*max_features);
    std::sort(kept.begin(), kept.end());
  }
  if (kept.empty()) {
    throw ValidationError("TF-IDF vocabulary is empty after min_df=" + std::to_string(min_df) +
                          " filtering");
  }

  TfidfModel model;
  model.n_docs = train_docs.size();
  model.min_df = min_df;
  model.max_features = max_features;
  model.doc_freq.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    model.vocabulary.emplace(kept[i].first, i);
    model.doc_freq.push_back(kept[i].second);
  }
  return model;
}

FeatureMatrix transform_tfidf(const TfidfModel& model, std::span<const CleanDoc> docs) {
  const std::size_t v = model.vocabulary.size();
  std::vector<double> idf(v);
  for (std::size_t c = 0; c < v; ++c) idf[c] = model.idf(c);

  FeatureMatrix out;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(docs.size()),
                                     static_cast<Eigen::Index>(v));
  for (const auto& token : model.tokens_in_column_order()) {
    out.columns.push_back({token, FeatureGroup::Text});
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    out.row_ids.push_back(docs[d].id);
    const auto row = static_cast<Eigen::Index>(d);
    for (const auto& t : docs[d].tokens) {
      auto it = model.vocabulary.find(t);
      if (it != model.vocabulary.end()) out.values(row, static_cast<Eigen::Index>(it->second)) += 1.0;
    }
    double norm2 = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
      double& cell = out.values(row, static_cast<Eigen::Index>(c));
      cell *= idf[c];
      norm2 += cell * cell;
    }
    if (norm2 > 0.0) out.values.row(row) /= std::sqrt(norm2);
  }
  return out;
}

// ------------------------------------------------------------- embeddings

EmbeddingTable parse_embeddings(std::string_view csv_text, std::string source_tag) {
  EmbeddingTable table;
  table.source_tag = std::move(source_tag);
  // A leading "# ..." line records how the vectors were produced.
  if (table.source_tag.empty() && !csv_text.empty() && csv_text.front() == '#') {
    const std::size_t end = std::min(csv_text.find('\n'), csv_text.size());
    std::string_view comment = csv_text.substr(1, end - 1);
    while (!comment.empty() && (comment.front() == ' ')) comment.remove_prefix(1);
    while (!comment.empty() && (comment.back() == '\r')) comment.remove_suffix(1);
    table.source_tag = std::string(comment);
  }

  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw ValidationError("embedding file has no header row");
  const auto& header = rows.front().fields;
  if (header.size() < 2 || header.front() != "policy_id") {
    throw ValidationError("embedding header must be policy_id,e0,...");
  }
  table.dim = header.size() - 1;

  std::vector<std::string> issues;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "line " + std::to_string(row.line);
    const std::string id = row.fields.empty() ? std::string() : row.fields.front();
    if (row.fields.size() != header.size()) {
      issues.push_back(where + " (policy_id " + id + "): dimension mismatch, expected " +
                       std::to_string(table.dim) + " values, got " +
                       std::to_string(row.fields.size() - 1));
      continue;
    }
    if (table.vectors.count(id)) {
      issues.push_back(where + ": duplicate policy_id \"" + id + "\"");
      continue;
    }
    std::vector<double> vec(table.dim);
    bool ok = true;
    for (std::size_t c = 0; c < table.dim; ++c) {
      if (!csv::parse_double(row.fields[c + 1], vec[c]) || !std::isfinite(vec[c])) {
        issues.push_back(where + ": non-numeric cell in column " + header[c + 1]);
        ok = false;
        break;
      }
    }
    if (ok) table.vectors.emplace(id, std::move(vec));
  }
  if (!issues.empty()) {
    std::string msg = "invalid embedding file:";
    for (const auto& i : issues) msg += "\n  " + i;
    throw ValidationError(msg, issues);
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  try {
    return parse_embeddings(io::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.issues());
  }
}

FeatureMatrix embedding_block(const EmbeddingTable& table, const std::vector<std::string>& ids) {
  FeatureMatrix out;
  out.row_ids = ids;
  for (std::size_t c = 0; c < table.dim; ++c) {
    out.columns.push_back({"e" + std::to_string(c), FeatureGroup::Embedding});
  }
  out.values.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(table.dim));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = table.vectors.find(ids[r]);
    if (it == table.vectors.end()) {
      throw ValidationError("embedding table has no vector for policy " + ids[r]);
    }
    for (std::size_t c = 0; c < table.dim; ++c) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second[c];
    }
  }
  return out;
}

// --------------------------------------------------------------- metadata

std::map<std::string, double, std::less<>> parse_lookup_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  std::map<std::string, double, std::less<>> out;
  std::vector<std::string> issues;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const std::string where = "line " + std::to_string(rows[r].line);
    double v = 0.0;
    if (f.size() != 2) {
      issues.push_back(where + ": expected 2 fields");
    } else if (!csv::parse_double(f[1], v) || !std::isfinite(v) || v < 0.0) {
      issues.push_back(where + ": value must be a non-negative number");
    } else if (!out.emplace(f[0], v).second) {
      issues.push_back(where + ": duplicate key \"" + f[0] + "\"");
    }
  }
  if (!issues.empty()) {
    std::string msg = "invalid lookup table:";
    for (const auto& i : issues) msg += "\n  " + i;
    throw ValidationError(msg, issues);
  }
  return out;
}

std::map<std::string, double, std::less<>> load_lookup_csv(const std::filesystem::path& path) {
  try {
    return parse_lookup_csv(io::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.issues());
  }
}

namespace {

// Most frequent first, lexicographic tie-break, truncated to `cap`.
std::vector<std::string> top_categories(const std::map<std::string, std::size_t>& counts,
                                        std::size_t cap) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (items.size() > cap) items.resize(cap);
  std::vector<std::string> out;
  for (auto& [name, count] : items) out.push_back(std::move(name));
  return out;
}

}  // namespace

std::vector<Column> MetadataSchema::columns() const {
  std::vector<Column> cols;
  auto add = [&](std::string name) { cols.push_back({std::move(name), FeatureGroup::Metadata}); };
  add("month");
  add("year");
  for (const auto& c : country_columns) add("country=" + c);
  add("no_rapporteur");
  add("voting_weight");
  for (const auto& p : party_columns) add("party=" + p);
  add("no_party");
  add("seat_share");
  add("spotlight");
  for (const auto& s : spotlight_columns) add("spotlight=" + s);
  add("procedure_year");
  for (const auto& p : procedure_columns) add("procedure=" + p);
  add("legislative");
  for (const auto& s : sidecar_columns) add(s);
  return cols;
}

MetadataSchema fit_metadata_schema(std::span<const PolicyRecord> train,
                                   const MetadataLookups& lookups) {
  if (train.empty()) throw ValidationError("metadata schema needs training records");

  std::map<std::string, std::size_t> countries, parties, spotlights, procedures;
  std::set<std::string> sidecars;
  for (const auto& rec : train) {
    for (const auto& rap : rec.rapporteurs) {
      ++countries[rap.country];
      if (rap.party) ++parties[*rap.party];
    }
    if (rec.spotlight) ++spotlights[*rec.spotlight];
    if (rec.procedure_type) ++procedures[*rec.procedure_type];
    for (const auto& [name, value] : rec.sidecar_scores) sidecars.insert(name);
  }

  MetadataSchema schema;
  schema.country_columns = top_categories(countries, kMaxCountryColumns);
  schema.party_columns = top_categories(parties, kMaxPartyColumns);
  schema.spotlight_columns = top_categories(spotlights, kMaxSpotlightColumns);
  schema.procedure_columns = top_categories(procedures, kMaxProcedureColumns);
  schema.sidecar_columns.assign(sidecars.begin(), sidecars.end());
  schema.voting_weight_lookup = lookups.voting_weight;
  schema.seat_share_lookup = lookups.seat_share;

  for (const auto& [country, count] : countries) {
    if (!schema.voting_weight_lookup.count(country)) {
      schema.warnings.push_back("no voting weight for country \"" + country + "\"; encoded as 0");
    }
  }
  for (const auto& [party, count] : parties) {
    if (!schema.seat_share_lookup.count(party)) {
      schema.warnings.push_back("no seat share for party \"" + party + "\"; encoded as 0");
    }
  }
  return schema;
}

FeatureMatrix encode_metadata(std::span<const PolicyRecord> records, const MetadataSchema& schema) {
  FeatureMatrix out;
  out.columns = schema.columns();
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(records.size()),
                                     static_cast<Eigen::Index>(out.columns.size()));

  auto position = [](const std::vector<std::string>& list, const std::string& v) -> long {
    auto it = std::find(list.begin(), list.end(), v);
    return it == list.end() ? -1 : static_cast<long>(it - list.begin());
  };
  auto lookup = [](const auto& table, const std::string& key) {
    auto it = table.find(key);
    return it == table.end() ? 0.0 : it->second;
  };

  const Eigen::Index country0 = 2;
  const Eigen::Index no_rap = country0 + static_cast<Eigen::Index>(schema.country_columns.size());
  const Eigen::Index voting = no_rap + 1;
  const Eigen::Index party0 = voting + 1;
  const Eigen::Index no_party = party0 + static_cast<Eigen::Index>(schema.party_columns.size());
  const Eigen::Index seat = no_party + 1;
  const Eigen::Index spot = seat + 1;
  const Eigen::Index spot0 = spot + 1;
  const Eigen::Index proc_year = spot0 + static_cast<Eigen::Index>(schema.spotlight_columns.size());
  const Eigen::Index proc0 = proc_year + 1;
  const Eigen::Index legislative = proc0 + static_cast<Eigen::Index>(schema.procedure_columns.size());
  const Eigen::Index sidecar0 = legislative + 1;

  for (std::size_t r = 0; r < records.size(); ++r) {
    const PolicyRecord& rec = records[r];
    const auto row = static_cast<Eigen::Index>(r);
    auto cell = [&](Eigen::Index c) -> double& { return out.values(row, c); };
    out.row_ids.push_back(rec.id);

    cell(0) = rec.month;
    cell(1) = rec.year;

    double weight_sum = 0.0;
    double share_sum = 0.0;
    std::size_t with_party = 0;
    bool retained_party = false;
    for (const auto& rap : rec.rapporteurs) {
      if (long c = position(schema.country_columns, rap.country); c >= 0) cell(country0 + c) += 1.0;
      weight_sum += lookup(schema.voting_weight_lookup, rap.country);
      if (rap.party) {
        ++with_party;
        share_sum += lookup(schema.seat_share_lookup, *rap.party);
        if (long p = position(schema.party_columns, *rap.party); p >= 0) {
          cell(party0 + p) = 1.0;
          retained_party = true;
        }
      }
    }
    cell(no_rap) = rec.rapporteurs.empty() ? 1.0 : 0.0;
    cell(voting) = rec.rapporteurs.empty() ? 0.0 : weight_sum / static_cast<double>(rec.rapporteurs.size());
    cell(no_party) = retained_party ? 0.0 : 1.0;
    cell(seat) = with_party == 0 ? 0.0 : share_sum / static_cast<double>(with_party);

    cell(spot) = rec.spotlight ? 1.0 : 0.0;
    if (rec.spotlight) {
      if (long s = position(schema.spotlight_columns, *rec.spotlight); s >= 0) cell(spot0 + s) = 1.0;
    }
    cell(proc_year) = rec.procedure_year.value_or(0);
    if (rec.procedure_type) {
      if (long p = position(schema.procedure_columns, *rec.procedure_type); p >= 0) cell(proc0 + p) = 1.0;
    }
    cell(legislative) = rec.legislative ? 1.0 : 0.0;
    for (std::size_t s = 0; s < schema.sidecar_columns.size(); ++s) {
      auto it = rec.sidecar_scores.find(schema.sidecar_columns[s]);
      if (it != rec.sidecar_scores.end()) cell(sidecar0 + static_cast<Eigen::Index>(s)) = it->second;
    }
  }
  return out;
}

// --------------------------------------------------------------- assembly

FeatureMatrix assemble(std::span<const FeatureMatrix> blocks) {
  if (blocks.empty()) throw ValidationError("assemble needs at least one block");
  if (blocks.size() == 1) return blocks.front();

  const auto& ids = blocks.front().row_ids;
  Eigen::Index total_cols = 0;
  for (const auto& b : blocks) {
    if (b.row_ids.size() != ids.size()) {
      throw ValidationError("row count mismatch between feature blocks");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (b.row_ids[i] != ids[i]) {
        throw ValidationError("row order mismatch between feature blocks at id " + ids[i] +
                              " (other block has " + b.row_ids[i] + ")");
      }
    }
    total_cols += b.values.cols();
  }

  FeatureMatrix out;
  out.row_ids = ids;
  out.values.resize(static_cast<Eigen::Index>(ids.size()), total_cols);
  std::unordered_set<std::string> names;
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    for (const auto& c : b.columns) {
      std::string name = std::string(group_name(c.group)) + ":" + c.name;
      if (!names.insert(name).second) throw ValidationError("duplicate column name: " + name);
      out.columns.push_back({std::move(name), c.group});
    }
    out.values.middleCols(at, b.values.cols()) = b.values;
    at += b.values.cols();
  }
  return out;
}

}  // namespace polprog
