#pragma once

#include <map>
#include <string>
#include <vector>

#include "polprog/eval.hpp"
#include "polprog/explain.hpp"

namespace polprog {

struct ChartSpec {
  std::string title = "Feature importance";
  int top_k = 20;
  /// Colour per group tag. The text group is always drawn in black.
  std::map<FeatureGroup, std::string> group_colors = {
      {FeatureGroup::Text, "#000000"},
      {FeatureGroup::Metadata, "#1f77b4"},
      {FeatureGroup::Embedding, "#7f7f7f"},
  };
  int width = 900;
  int height = 0;  // 0: derived from the number of rows
};

struct GridTables {
  std::string markdown;
  std::string csv;
};

/// Markdown (one table per metadata setting, best RMSE and R^2 in bold,
/// supplementary stage accuracy marked with an asterisk) and CSV
/// `representation,model,with_metadata,rmse,r2,n,seed`. Rows are sorted by
/// RMSE ascending, then R^2 descending.
GridTables render_grid(const GridResult& result);

/// Parses the CSV written by render_grid.
GridResult grid_from_csv(std::string_view text);

struct SvgOutput {
  std::string svg;
  std::vector<std::string> warnings;
};

/// Horizontal bar chart of the top_k features by importance, coloured by
/// group (metadata bars by sub-group from an 8-colour palette).
SvgOutput render_importance_chart(const ImportanceReport& report, const ChartSpec& spec);

/// One strip per feature (top_k by mean |SHAP|), one point per row at
/// x = SHAP value, coloured blue (low) to red (high) by the min-max scaled
/// feature value. Constant features are drawn in mid grey. Points that fall
/// in the same pixel column are stacked vertically.
SvgOutput render_shap_summary(const ShapMatrix& matrix, const FeatureMatrix& feature_values,
                              const ChartSpec& spec);

/// Features by mean |SHAP| descending, ties by name.
std::vector<std::size_t> shap_feature_order(const ShapMatrix& matrix);

/// Sums embedding columns into a single "text-embedding" column.
ShapTable collapse_embedding_columns(const ShapMatrix& matrix, const FeatureMatrix& feature_values);

/// Metadata sub-group of a column name: date, country, party, spotlight,
/// procedure, type, rapporteur or sidecar.
std::string metadata_subgroup(std::string_view column_name);

}  // namespace polprog
