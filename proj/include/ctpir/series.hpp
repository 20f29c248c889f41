#pragma once

#include <cstddef>
#include <vector>

namespace ctpir {

// Cumulative citation counts for years start_year+1 .. start_year+N.
struct CitationSeries {
  int start_year = 0;
  std::vector<double> values;

  std::size_t horizon() const { return values.size(); }
  bool operator==(const CitationSeries&) const = default;
};

}  // namespace ctpir
