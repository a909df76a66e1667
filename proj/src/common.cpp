#include "ccfrec/common.hpp"

namespace ccfrec {

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

std::string truncate_tokens(const std::string& text, std::size_t max_tokens) {
    auto toks = whitespace_tokens(text);
    if (toks.size() <= max_tokens) return text;
    std::string out;
    for (std::size_t i = 0; i < max_tokens; ++i) {
        if (i) out += ' ';
        out.append(toks[i]);
    }
    return out;
}

}  // namespace ccfrec
