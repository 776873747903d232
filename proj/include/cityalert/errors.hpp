#pragma once

#include <stdexcept>
#include <string>

namespace cityalert {

// Base for every error raised by the library. Each subtype names one failure
// from the component contracts so callers can branch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CITYALERT_DEFINE_ERROR(Name)                                           \
    class Name : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
    }

CITYALERT_DEFINE_ERROR(FormatError);
CITYALERT_DEFINE_ERROR(EmptyAfterCleaning);
CITYALERT_DEFINE_ERROR(EmptyVocabulary);
CITYALERT_DEFINE_ERROR(MissingClass);
CITYALERT_DEFINE_ERROR(SingleClass);
CITYALERT_DEFINE_ERROR(DimensionMismatch);
CITYALERT_DEFINE_ERROR(VocabularyMismatch);
CITYALERT_DEFINE_ERROR(TooFewExamples);
CITYALERT_DEFINE_ERROR(GeocoderUnavailable);
CITYALERT_DEFINE_ERROR(StorageFull);
CITYALERT_DEFINE_ERROR(CorruptLog);
CITYALERT_DEFINE_ERROR(ConfigError);

#undef CITYALERT_DEFINE_ERROR

} // namespace cityalert
