#pragma once

#include <string>

namespace recap::evalsuite {

// Surface-style predicates. The contraction patterns are a declared
// constant of the evaluation contract:
//   apostrophe form: \b\w+n't\b
//   bare form: \b(ca|wo|do|did|is|are|was|were|has|have|had|would|should|
//              could|ai|does|s?hould)nt\b
// Both are applied to the lowercased string.
enum class ContractionClass { apostrophe, bare_nt, neither };

// final non-whitespace character is one of . ! ? , ; : or the UTF-8 ellipsis
bool ends_with_punctuation(const std::string& text);

// apostrophe wins over bare when both forms appear
ContractionClass contraction_class(const std::string& text);

// no ASCII uppercase letters anywhere
bool is_all_lowercase(const std::string& text);

// casing | contraction | punctuation profile, used for grouping texts
// with matching surface style
std::string surface_profile_key(const std::string& text);

}  // namespace recap::evalsuite
