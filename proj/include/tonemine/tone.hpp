#pragma once

#include <string>
#include <vector>

namespace tonemine {

/// Marker for "no syllable" before the first / after the last syllable of an utterance.
inline constexpr int kBoundaryTone = -1;

/// A tone n-gram category, e.g. {2, 4}. Tone 0 is neutral.
using Category = std::vector<int>;

/// "2-4" style name used in file names and CSV columns.
std::string category_name(const Category& c);
Category parse_category(const std::string& name);

}  // namespace tonemine
