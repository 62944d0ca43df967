#include "recap/style_features.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace recap::evalsuite {

namespace {

const std::regex kApostropheContraction(R"(\b\w+n't\b)");
const std::regex kBareContraction(
    R"(\b(ca|wo|do|did|is|are|was|were|has|have|had|would|should|could|ai|does|s?hould)nt\b)");

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

bool ends_with_punctuation(const std::string& text) {
    size_t end = text.size();
    while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    if (end == 0) return false;
    const char last = text[end - 1];
    if (last == '.' || last == '!' || last == '?' || last == ',' || last == ';' || last == ':')
        return true;
    // UTF-8 ellipsis U+2026 = E2 80 A6
    return end >= 3 && static_cast<unsigned char>(text[end - 3]) == 0xE2 &&
           static_cast<unsigned char>(text[end - 2]) == 0x80 &&
           static_cast<unsigned char>(text[end - 1]) == 0xA6;
}

ContractionClass contraction_class(const std::string& text) {
    const std::string lower = lowercase(text);
    if (std::regex_search(lower, kApostropheContraction)) return ContractionClass::apostrophe;
    if (std::regex_search(lower, kBareContraction)) return ContractionClass::bare_nt;
    return ContractionClass::neither;
}

bool is_all_lowercase(const std::string& text) {
    return std::none_of(text.begin(), text.end(),
                        [](unsigned char c) { return std::isupper(c); });
}

std::string surface_profile_key(const std::string& text) {
    std::string key;
    key += is_all_lowercase(text) ? "l" : "U";
    switch (contraction_class(text)) {
        case ContractionClass::apostrophe: key += "a"; break;
        case ContractionClass::bare_nt: key += "b"; break;
        case ContractionClass::neither: key += "n"; break;
    }
    key += ends_with_punctuation(text) ? "p" : "o";
    return key;
}

}  // namespace recap::evalsuite
