#ifndef LONGREG_PAIRTYPE_HPP
#define LONGREG_PAIRTYPE_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace longreg {

// IF: intra-subject time-forward; IB: intra-subject time-backward;
// IT: inter-subject.
enum class PairType { IF, IB, IT };

inline const char* to_string(PairType t) {
    switch (t) {
    case PairType::IF: return "IF";
    case PairType::IB: return "IB";
    case PairType::IT: return "IT";
    }
    return "?";
}

inline PairType pair_type_from_string(std::string_view s) {
    if (s == "IF") return PairType::IF;
    if (s == "IB") return PairType::IB;
    if (s == "IT") return PairType::IT;
    throw std::invalid_argument("unknown pair type: " + std::string(s));
}

} // namespace longreg

#endif
