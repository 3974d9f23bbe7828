#include "polprog/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "polprog/csv.hpp"
#include "polprog/error.hpp"

namespace polprog {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("0.", 1) == std::string::npos) s.erase(0, 1);
  return s;
}

std::string_view display_representation(Representation rep) {
  switch (rep) {
    case Representation::Tfidf: return "TF-IDF";
    case Representation::EmbeddingA: return "Embedding A";
    case Representation::EmbeddingB: return "Embedding B";
  }
  return "?";
}

std::string_view display_model(ModelKind kind) {
  switch (kind) {
    case ModelKind::BayesianRidge: return "Bayesian Ridge";
    case ModelKind::RandomForest: return "Random Forest";
    case ModelKind::Gbdt: return "GBDT";
    case ModelKind::Svr: return "SVR";
  }
  return "?";
}

bool grid_order(const GridRow& a, const GridRow& b) {
  if (a.metrics.rmse != b.metrics.rmse) return a.metrics.rmse < b.metrics.rmse;
  return a.metrics.r2 > b.metrics.r2;
}

void markdown_table(std::string& out, const std::vector<GridRow>& rows) {
  std::string best_rmse, best_r2;
  if (!rows.empty()) {
    double lo = rows.front().metrics.rmse, hi = rows.front().metrics.r2;
    for (const auto& r : rows) {
      lo = std::min(lo, r.metrics.rmse);
      hi = std::max(hi, r.metrics.r2);
    }
    best_rmse = fixed(lo, 3);
    best_r2 = fixed(hi, 3);
  }
  out += "| Feature Representation | Regression Model | RMSE ↓ | R² ↑ | Stage accuracy* |\n";
  out += "|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    const std::string rmse_s = fixed(r.metrics.rmse, 3);
    const std::string r2_s = fixed(r.metrics.r2, 3);
    out += "| ";
    out += display_representation(r.representation);
    out += " | ";
    out += display_model(r.model);
    out += " | " + (rmse_s == best_rmse ? "**" + rmse_s + "**" : rmse_s);
    out += " | " + (r2_s == best_r2 ? "**" + r2_s + "**" : r2_s);
    out += " | " + fixed(r.stage_accuracy, 3) + " |\n";
  }
}

const std::vector<std::string> kGridHeader = {"representation", "model", "with_metadata", "rmse",
                                              "r2", "n", "seed"};

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        // Control characters are not allowed in XML 1.0 text.
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n') {
          out += '?';
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::string display_name(std::string_view column) {
  for (auto g : {FeatureGroup::Text, FeatureGroup::Metadata, FeatureGroup::Embedding}) {
    const std::string prefix = std::string(group_name(g)) + ":";
    if (column.starts_with(prefix)) return std::string(column.substr(prefix.size()));
  }
  return std::string(column);
}

constexpr std::array<std::string_view, 8> kSubgroups = {
    "party", "country", "date", "spotlight", "procedure", "type", "rapporteur", "sidecar"};
constexpr std::array<std::string_view, 7> kPaletteTail = {
    "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22"};

std::string group_color(const Column& col, const ChartSpec& spec) {
  if (col.group == FeatureGroup::Text) return "#000000";
  if (col.group == FeatureGroup::Embedding) {
    auto it = spec.group_colors.find(FeatureGroup::Embedding);
    return it != spec.group_colors.end() ? it->second : "#7f7f7f";
  }
  const std::string sub = metadata_subgroup(col.name);
  for (std::size_t i = 0; i < kSubgroups.size(); ++i) {
    if (kSubgroups[i] != sub) continue;
    if (i == 0) {
      auto it = spec.group_colors.find(FeatureGroup::Metadata);
      return it != spec.group_colors.end() ? it->second : "#1f77b4";
    }
    return std::string(kPaletteTail[i - 1]);
  }
  return "#1f77b4";
}

std::size_t checked_top_k(const ChartSpec& spec, std::size_t available,
                          std::vector<std::string>& warnings) {
  if (spec.top_k < 1) throw ValidationError("chart top_k must be at least 1");
  if (spec.width < 400) throw ValidationError("chart width must be at least 400 pixels");
  const auto k = static_cast<std::size_t>(spec.top_k);
  if (k > available) {
    warnings.push_back("top_k " + std::to_string(k) + " exceeds the " + std::to_string(available) +
                       " available features; showing all");
    return available;
  }
  return k;
}

void check_spec_colors(const ChartSpec& spec, std::vector<std::string>& warnings) {
  auto it = spec.group_colors.find(FeatureGroup::Text);
  if (it != spec.group_colors.end() && it->second != "#000000") {
    warnings.push_back("text features are always drawn in black; ignoring colour " + it->second);
  }
}

struct Axis {
  double lo = 0.0, hi = 0.0;
  double px_lo = 0.0, px_hi = 0.0;

  double operator()(double v) const {
    if (hi <= lo) return px_lo;
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

std::string svg_open(int width, int height, const std::string& title) {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(title) + "</text>\n";
  return out;
}

void axis_ticks(std::string& out, const Axis& axis, double y_top, double y_axis) {
  constexpr int kTicks = 5;
  for (int t = 0; t < kTicks; ++t) {
    const double v = axis.lo + (axis.hi - axis.lo) * t / (kTicks - 1);
    const double x = axis(v);
    out += "<line x1=\"" + fixed(x, 1) + "\" y1=\"" + fixed(y_top, 1) + "\" x2=\"" + fixed(x, 1) +
           "\" y2=\"" + fixed(y_axis, 1) + "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + fixed(x, 1) + "\" y=\"" + fixed(y_axis + 14, 1) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + fixed(v, 4) + "</text>\n";
  }
}

}  // namespace

// ------------------------------------------------------------------- grid

GridTables render_grid(const GridResult& result) {
  if (result.rows.empty()) throw ValidationError("render_grid: empty grid");
  std::vector<GridRow> rows = result.rows;
  std::stable_sort(rows.begin(), rows.end(), grid_order);

  GridTables tables;
  tables.csv = csv::join(kGridHeader) + "\n";
  for (const auto& r : rows) {
    tables.csv += csv::join({std::string(representation_name(r.representation)),
                             std::string(kind_name(r.model)), r.with_metadata ? "true" : "false",
                             csv::format_double(r.metrics.rmse), csv::format_double(r.metrics.r2),
                             std::to_string(r.metrics.n), std::to_string(r.seed)}) +
                  "\n";
  }

  std::vector<GridRow> with_meta, text_only;
  for (const auto& r : rows) (r.with_metadata ? with_meta : text_only).push_back(r);
  std::string& md = tables.markdown;
  if (!with_meta.empty()) {
    md += "### Policy text and metadata features\n\n";
    markdown_table(md, with_meta);
    md += "\n";
  }
  if (!text_only.empty()) {
    md += "### Policy text features only\n\n";
    markdown_table(md, text_only);
    md += "\n";
  }
  md += "\\* Supplementary: share of test policies whose prediction, snapped to the nearest "
        "stage, equals the true stage.\n";
  return tables;
}

GridResult grid_from_csv(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows.front().fields != kGridHeader) {
    throw ValidationError("expected grid CSV header " + csv::join(kGridHeader));
  }
  GridResult result;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    const std::string where = "grid CSV line " + std::to_string(rows[i].line);
    if (f.size() != kGridHeader.size()) throw ValidationError(where + ": wrong field count");
    GridRow row;
    auto rep = parse_representation(f[0]);
    auto kind = parse_kind(f[1]);
    if (!rep) throw ValidationError(where + ": unknown representation " + f[0]);
    if (!kind) throw ValidationError(where + ": unknown model " + f[1]);
    if (f[2] != "true" && f[2] != "false") throw ValidationError(where + ": with_metadata must be true/false");
    row.representation = *rep;
    row.model = *kind;
    row.with_metadata = f[2] == "true";
    double n = 0.0;
    if (!csv::parse_double(f[3], row.metrics.rmse) || !csv::parse_double(f[4], row.metrics.r2) ||
        !csv::parse_double(f[5], n)) {
      throw ValidationError(where + ": malformed number");
    }
    row.metrics.n = static_cast<std::size_t>(n);
    try {
      row.seed = std::stoull(f[6]);
    } catch (const std::exception&) {
      throw ValidationError(where + ": malformed seed " + f[6]);
    }
    result.rows.push_back(row);
  }
  return result;
}

// ----------------------------------------------------------------- charts

std::string metadata_subgroup(std::string_view column_name) {
  const std::string name = display_name(column_name);
  const std::string_view n = name;
  if (n == "month" || n == "year") return "date";
  if (n.starts_with("country=") || n == "voting_weight") return "country";
  if (n.starts_with("party=") || n == "no_party" || n == "seat_share") return "party";
  if (n == "no_rapporteur") return "rapporteur";
  if (n.starts_with("spotlight")) return "spotlight";
  if (n.starts_with("procedure")) return "procedure";
  if (n == "legislative") return "type";
  return "sidecar";
}

SvgOutput render_importance_chart(const ImportanceReport& report, const ChartSpec& spec) {
  if (report.entries.empty()) throw ValidationError("render_importance_chart: empty report");
  SvgOutput out;
  check_spec_colors(spec, out.warnings);
  const std::size_t k = checked_top_k(spec, report.entries.size(), out.warnings);
  std::vector<ImportanceEntry> ranked = report.ranked();
  ranked.resize(k);

  constexpr double kRow = 22.0, kTop = 44.0, kLabel = 240.0;
  const int height = spec.height > 0 ? spec.height : static_cast<int>(kTop + kRow * static_cast<double>(k) + 70);
  const double row_h = (height - kTop - 70) / static_cast<double>(k);
  Axis axis;
  for (const auto& e : ranked) {
    axis.lo = std::min(axis.lo, e.importance);
    axis.hi = std::max(axis.hi, e.importance);
  }
  axis.px_lo = kLabel + 10;
  axis.px_hi = spec.width - 30.0;
  const double zero = axis(0.0);
  const double y_axis = kTop + row_h * static_cast<double>(k);

  std::string& svg = out.svg;
  svg = svg_open(spec.width, height, spec.title);
  axis_ticks(svg, axis, kTop, y_axis);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& e = ranked[i];
    const double y = kTop + row_h * static_cast<double>(i);
    const double end = axis(e.importance);
    const double x0 = std::min(zero, end);
    const double w = std::abs(end - zero);
    const std::string color = group_color(Column{e.feature, e.group}, spec);
    svg += "<text x=\"" + fixed(kLabel, 1) + "\" y=\"" + fixed(y + row_h * 0.65, 1) +
           "\" text-anchor=\"end\" fill=\"" + color + "\">" + xml_escape(display_name(e.feature)) +
           "</text>\n";
    svg += "<rect x=\"" + fixed(x0, 2) + "\" y=\"" + fixed(y + row_h * 0.15, 2) + "\" width=\"" +
           fixed(w, 2) + "\" height=\"" + fixed(row_h * 0.7, 2) + "\" fill=\"" + color + "\" class=\"bar\"/>\n";
  }
  svg += "<line x1=\"" + fixed(zero, 1) + "\" y1=\"" + fixed(kTop, 1) + "\" x2=\"" + fixed(zero, 1) +
         "\" y2=\"" + fixed(y_axis, 1) + "\" stroke=\"#333333\"/>\n";
  svg += "<text x=\"" + fixed((axis.px_lo + axis.px_hi) / 2, 1) + "\" y=\"" + fixed(y_axis + 34, 1) +
         "\" text-anchor=\"middle\">Increase in RMSE after shuffling</text>\n";

  // Legend: groups present among the shown bars, in first-appearance order.
  std::vector<std::pair<std::string, std::string>> legend;
  for (const auto& e : ranked) {
    std::string label = e.group == FeatureGroup::Metadata ? "metadata: " + metadata_subgroup(e.feature)
                                                          : std::string(group_name(e.group));
    const std::string color = group_color(Column{e.feature, e.group}, spec);
    if (std::none_of(legend.begin(), legend.end(), [&](const auto& p) { return p.first == label; })) {
      legend.emplace_back(label, color);
    }
  }
  double lx = 10.0;
  for (const auto& [label, color] : legend) {
    svg += "<rect x=\"" + fixed(lx, 1) + "\" y=\"" + fixed(height - 22.0, 1) +
           "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"" + fixed(lx + 14, 1) + "\" y=\"" + fixed(height - 13.0, 1) + "\">" +
           xml_escape(label) + "</text>\n";
    lx += 24.0 + 7.0 * static_cast<double>(label.size());
  }
  svg += "</svg>\n";
  return out;
}

std::vector<std::size_t> shap_feature_order(const ShapMatrix& matrix) {
  const auto d = static_cast<std::size_t>(matrix.values.cols());
  std::vector<double> mean_abs(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    mean_abs[j] = matrix.values.col(static_cast<Eigen::Index>(j)).cwiseAbs().mean();
  }
  std::vector<std::size_t> order(d);
  for (std::size_t j = 0; j < d; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (mean_abs[a] != mean_abs[b]) return mean_abs[a] > mean_abs[b];
    return matrix.columns[a].name < matrix.columns[b].name;
  });
  return order;
}

SvgOutput render_shap_summary(const ShapMatrix& matrix, const FeatureMatrix& feature_values,
                              const ChartSpec& spec) {
  if (feature_values.row_ids != matrix.row_ids || feature_values.columns != matrix.columns ||
      feature_values.values.rows() != matrix.values.rows() ||
      feature_values.values.cols() != matrix.values.cols()) {
    throw ValidationError("render_shap_summary: feature values are not aligned with the SHAP matrix");
  }
  if (matrix.values.rows() == 0 || matrix.values.cols() == 0) {
    throw ValidationError("render_shap_summary: empty SHAP matrix");
  }
  SvgOutput out;
  check_spec_colors(spec, out.warnings);
  const std::size_t k = checked_top_k(spec, matrix.columns.size(), out.warnings);
  std::vector<std::size_t> order = shap_feature_order(matrix);
  order.resize(k);

  constexpr double kTop = 44.0, kLabel = 240.0;
  const int height = spec.height > 0 ? spec.height : static_cast<int>(kTop + 28.0 * static_cast<double>(k) + 70);
  const double row_h = (height - kTop - 70) / static_cast<double>(k);
  Axis axis;
  for (std::size_t j : order) {
    const auto col = matrix.values.col(static_cast<Eigen::Index>(j));
    axis.lo = std::min(axis.lo, col.minCoeff());
    axis.hi = std::max(axis.hi, col.maxCoeff());
  }
  axis.px_lo = kLabel + 10;
  axis.px_hi = spec.width - 60.0;
  const double y_axis = kTop + row_h * static_cast<double>(k);

  std::string& svg = out.svg;
  svg = svg_open(spec.width, height, spec.title);
  axis_ticks(svg, axis, kTop, y_axis);
  const double zero = axis(0.0);
  svg += "<line x1=\"" + fixed(zero, 1) + "\" y1=\"" + fixed(kTop, 1) + "\" x2=\"" + fixed(zero, 1) +
         "\" y2=\"" + fixed(y_axis, 1) + "\" stroke=\"#333333\"/>\n";

  for (std::size_t slot = 0; slot < k; ++slot) {
    const std::size_t j = order[slot];
    const auto jj = static_cast<Eigen::Index>(j);
    const Column& col = matrix.columns[j];
    const double y_mid = kTop + row_h * (static_cast<double>(slot) + 0.5);
    svg += "<text x=\"" + fixed(kLabel, 1) + "\" y=\"" + fixed(y_mid + 4, 1) +
           "\" text-anchor=\"end\" fill=\"" + group_color(col, spec) + "\">" +
           xml_escape(display_name(col.name)) + "</text>\n";

    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < feature_values.values.rows(); ++i) {
      const double v = feature_values.values(i, jj);
      if (!std::isfinite(v)) continue;
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    std::map<long, int> stack;
    const double step = std::min(3.0, row_h / 12.0);
    for (Eigen::Index i = 0; i < matrix.values.rows(); ++i) {
      const double x = axis(matrix.values(i, jj));
      const int n_at = stack[std::lround(x)]++;
      // 0, +1, -1, +2, -2, ... steps away from the strip centre.
      const int offset = (n_at + 1) / 2 * (n_at % 2 == 1 ? -1 : 1);
      const double y = std::clamp(y_mid + offset * step, y_mid - row_h / 2 + 3, y_mid + row_h / 2 - 3);
      const double v = feature_values.values(i, jj);
      std::string fill = "#808080";
      if (std::isfinite(v) && vmax > vmin) {
        const double t = (v - vmin) / (vmax - vmin);
        const int r = static_cast<int>(std::lround(255.0 * t));
        const int b = 255 - r;
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x30%02x", r, b);
        fill = buf;
      }
      svg += "<circle cx=\"" + fixed(x, 2) + "\" cy=\"" + fixed(y, 2) + "\" r=\"2.5\" fill=\"" + fill +
             "\" class=\"point\" fill-opacity=\"0.8\"/>\n";
    }
  }
  svg += "<text x=\"" + fixed((axis.px_lo + axis.px_hi) / 2, 1) + "\" y=\"" + fixed(y_axis + 34, 1) +
         "\" text-anchor=\"middle\">SHAP value (impact on predicted stage)</text>\n";

  // Colour bar from low (blue) to high (red) feature values.
  const double bx = spec.width - 40.0;
  svg += "<defs><linearGradient id=\"fv\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
         "<stop offset=\"0\" stop-color=\"#0030ff\"/><stop offset=\"1\" stop-color=\"#ff3000\"/>"
         "</linearGradient></defs>\n";
  svg += "<rect x=\"" + fixed(bx, 1) + "\" y=\"" + fixed(kTop, 1) + "\" width=\"10\" height=\"" +
         fixed(y_axis - kTop, 1) + "\" fill=\"url(#fv)\"/>\n";
  svg += "<text x=\"" + fixed(bx + 5, 1) + "\" y=\"" + fixed(kTop - 4, 1) +
         "\" text-anchor=\"middle\" font-size=\"10\">high</text>\n";
  svg += "<text x=\"" + fixed(bx + 5, 1) + "\" y=\"" + fixed(y_axis + 12, 1) +
         "\" text-anchor=\"middle\" font-size=\"10\">low</text>\n";
  svg += "</svg>\n";
  return out;
}

ShapTable collapse_embedding_columns(const ShapMatrix& matrix, const FeatureMatrix& feature_values) {
  if (feature_values.row_ids != matrix.row_ids || feature_values.columns != matrix.columns) {
    throw ValidationError("collapse_embedding_columns: inputs are not aligned");
  }
  std::vector<Eigen::Index> keep;
  std::vector<Eigen::Index> embedding;
  std::ptrdiff_t slot = -1;
  for (std::size_t j = 0; j < matrix.columns.size(); ++j) {
    if (matrix.columns[j].group == FeatureGroup::Embedding) {
      if (slot < 0) {
        slot = static_cast<std::ptrdiff_t>(keep.size());
        keep.push_back(-1);
      }
      embedding.push_back(static_cast<Eigen::Index>(j));
    } else {
      keep.push_back(static_cast<Eigen::Index>(j));
    }
  }
  ShapTable table;
  table.matrix = matrix;
  if (embedding.empty()) {
    table.feature_values = feature_values;
    return table;
  }
  const auto n = matrix.values.rows();
  const auto d = static_cast<Eigen::Index>(keep.size());
  table.matrix.columns.clear();
  table.matrix.values.resize(n, d);
  const bool has_se = matrix.std_errors.size() > 0;
  if (has_se) table.matrix.std_errors.resize(n, d);
  table.feature_values.row_ids = feature_values.row_ids;
  table.feature_values.values.resize(n, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const Eigen::Index src = keep[static_cast<std::size_t>(c)];
    if (src >= 0) {
      table.matrix.columns.push_back(matrix.columns[static_cast<std::size_t>(src)]);
      table.matrix.values.col(c) = matrix.values.col(src);
      if (has_se) table.matrix.std_errors.col(c) = matrix.std_errors.col(src);
      table.feature_values.values.col(c) = feature_values.values.col(src);
      continue;
    }
    table.matrix.columns.push_back({"text-embedding", FeatureGroup::Embedding});
    table.matrix.values.col(c).setZero();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
    for (Eigen::Index e : embedding) {
      table.matrix.values.col(c) += matrix.values.col(e);
      if (has_se) var += matrix.std_errors.col(e).cwiseAbs2();
    }
    if (has_se) table.matrix.std_errors.col(c) = var.cwiseSqrt();
    // A summed dimension has no meaningful feature value.
    table.feature_values.values.col(c).setConstant(std::nan(""));
  }
  table.feature_values.columns = table.matrix.columns;
  return table;
}

}  // namespace polprog
