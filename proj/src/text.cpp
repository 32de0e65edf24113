#include "crowdtrend/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace crowdtrend::text {

bool valid_utf8(std::string_view s) {
    std::int32_t i = 0;
    const auto len = static_cast<std::int32_t>(s.size());
    while (i < len) {
        UChar32 c;
        U8_NEXT(s.data(), i, len, c);
        if (c < 0) return false;
    }
    return true;
}

std::optional<std::string> nfc_normalize(std::string_view utf8) {
    if (!valid_utf8(utf8)) return std::nullopt;
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) return std::nullopt;
    auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<std::int32_t>(utf8.size())));
    if (nfc->isNormalized(src, status) && U_SUCCESS(status)) return std::string(utf8);
    status = U_ZERO_ERROR;
    icu::UnicodeString out = nfc->normalize(src, status);
    if (U_FAILURE(status)) return std::nullopt;
    std::string result;
    out.toUTF8String(result);
    return result;
}

std::string to_lower(std::string_view utf8) {
    auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<std::int32_t>(utf8.size())));
    s.toLower(icu::Locale::getRoot());
    std::string out;
    s.toUTF8String(out);
    return out;
}

bool is_blank(std::string_view utf8) {
    std::int32_t i = 0;
    const auto len = static_cast<std::int32_t>(utf8.size());
    while (i < len) {
        UChar32 c;
        U8_NEXT(utf8.data(), i, len, c);
        if (c < 0 || !u_isUWhiteSpace(c)) return false;
    }
    return true;
}

}  // namespace crowdtrend::text
